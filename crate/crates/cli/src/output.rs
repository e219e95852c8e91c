//! Run directories and the CSV files written into them.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::ConfigFile;
use crate::error::{usage, CliResult};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "BARGAIN_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";
pub const CONFIG_FILE: &str = "config.toml";

pub const SUMMARY_SCHEMA: &str = "# schema: bargain.summary.v1";
pub const FRONTIER_SCHEMA: &str = "# schema: bargain.frontier.v1";
pub const NASH_SCHEMA: &str = "# schema: bargain.nash.v1";
pub const STOPPING_SCHEMA: &str = "# schema: bargain.stopping.v1";
pub const DERIVATIVES_SCHEMA: &str = "# schema: bargain.derivatives.v1";
pub const SPNE_SCHEMA: &str = "# schema: bargain.spne.v1";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

fn is_empty_dir(path: &Path) -> CliResult<bool> {
    Ok(fs::read_dir(path)?.next().is_none())
}

/// Creates the directory a run writes into. An occupied `wanted` is only
/// reused with `overwrite`, and only if it looks like an earlier run;
/// otherwise the first free sibling `wanted.N` is taken.
pub fn prepare_run_dir(wanted: &Path, overwrite: bool) -> CliResult<PathBuf> {
    if !wanted.exists() || (wanted.is_dir() && is_empty_dir(wanted)?) {
        fs::create_dir_all(wanted)?;
        return Ok(wanted.to_path_buf());
    }
    if overwrite {
        if !wanted.join(CONFIG_FILE).is_file() {
            return Err(usage(format!(
                "refusing to overwrite {}: it holds no {CONFIG_FILE}, so it is not a run directory",
                wanted.display()
            )));
        }
        fs::remove_dir_all(wanted)?;
        fs::create_dir_all(wanted)?;
        return Ok(wanted.to_path_buf());
    }
    let name = wanted
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    for n in 1.. {
        let candidate = wanted.with_file_name(format!("{name}.{n}"));
        if !candidate.exists() || (candidate.is_dir() && is_empty_dir(&candidate)?) {
            fs::create_dir_all(&candidate)?;
            log::warn!("{} is taken; writing to {}", wanted.display(), candidate.display());
            return Ok(candidate);
        }
    }
    unreachable!()
}

pub fn write_snapshot(dir: &Path, config: &ConfigFile) -> CliResult<()> {
    fs::write(dir.join(CONFIG_FILE), config.render()?)?;
    Ok(())
}

pub fn create(path: &Path) -> CliResult<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// Schema line, header, rows.
pub fn write_table(path: &Path, schema: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut out = create(path)?;
    writeln!(out, "{schema}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn fmt(v: f64) -> String {
    v.to_string()
}
