//! Plain-text checkpoints: one section per network, each with its Adam state.
//!
//! ```text
//! bargain-checkpoint 1
//! seed 42
//! epoch 8000
//! meta head normal
//! section accept
//! adam 0.00003 8000
//! tensor base.0.weight 512 4
//! <one line of space-separated values per row>
//! …
//! tensor adam.m.base.0.weight 512 4
//! …
//! tensor adam.v.base.0.weight 512 4
//! …
//! section offer
//! …
//! ```
//!
//! Floats are written in shortest round-trip form, so a reload is bit exact
//! and two runs with the same seed produce identical files.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::neural::adam::AdamState;
use crate::neural::params::Parameterized;

pub const MAGIC: &str = "bargain-checkpoint 1";

#[derive(Clone, Debug, PartialEq)]
pub struct StoredTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Parameters and optimizer state of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub name: String,
    pub learning_rate: f64,
    pub step: u64,
    /// Model tensors, then `adam.m.*`, then `adam.v.*`, all in model order.
    pub tensors: Vec<StoredTensor>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub epoch: u64,
    /// Free-form key/value pairs describing the architecture.
    pub meta: Vec<(String, String)>,
    pub sections: Vec<Section>,
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

impl Section {
    pub fn capture(name: &str, model: &dyn Parameterized, adam: &AdamState) -> Result<Section> {
        let params = model.tensors();
        let total: usize = params.iter().map(|t| t.data.len()).sum();
        if adam.m.len() != total || adam.v.len() != total {
            return Err(schema(format!("adam state of `{name}` does not match its model")));
        }
        let mut tensors: Vec<StoredTensor> = params
            .iter()
            .map(|t| StoredTensor {
                name: t.name.clone(),
                rows: t.rows,
                cols: t.cols,
                data: t.data.to_vec(),
            })
            .collect();
        for (label, buf) in [("m", &adam.m), ("v", &adam.v)] {
            let mut offset = 0;
            for t in &params {
                let n = t.data.len();
                tensors.push(StoredTensor {
                    name: format!("adam.{label}.{}", t.name),
                    rows: t.rows,
                    cols: t.cols,
                    data: buf[offset..offset + n].to_vec(),
                });
                offset += n;
            }
        }
        Ok(Section {
            name: name.to_string(),
            learning_rate: adam.learning_rate,
            step: adam.step,
            tensors,
        })
    }

    /// Copies this section into `model` and `adam` after checking every
    /// tensor name and shape. Nothing is modified on a mismatch.
    pub fn restore(&self, model: &mut dyn Parameterized, adam: &mut AdamState) -> Result<()> {
        let shapes: Vec<(String, usize, usize)> = model
            .tensors()
            .iter()
            .map(|t| (t.name.clone(), t.rows, t.cols))
            .collect();
        let n = shapes.len();
        if self.tensors.len() != 3 * n {
            return Err(schema(format!(
                "section `{}` holds {} tensors, the model needs {}",
                self.name,
                self.tensors.len(),
                3 * n
            )));
        }
        for (k, stored) in self.tensors.iter().enumerate() {
            let (name, rows, cols) = &shapes[k % n];
            let expected = match k / n {
                0 => name.clone(),
                1 => format!("adam.m.{name}"),
                _ => format!("adam.v.{name}"),
            };
            if stored.name != expected || stored.rows != *rows || stored.cols != *cols {
                return Err(schema(format!(
                    "section `{}`: expected tensor {expected} {rows}x{cols}, found {} {}x{}",
                    self.name, stored.name, stored.rows, stored.cols
                )));
            }
        }
        for (dst, src) in model.tensors_mut().into_iter().zip(&self.tensors) {
            dst.data.copy_from_slice(&src.data);
        }
        let flat = |part: usize| -> Vec<f64> {
            self.tensors[part * n..(part + 1) * n]
                .iter()
                .flat_map(|t| t.data.iter().copied())
                .collect()
        };
        *adam = AdamState {
            learning_rate: self.learning_rate,
            step: self.step,
            m: flat(1),
            v: flat(2),
        };
        Ok(())
    }
}

impl Checkpoint {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn section(&self, name: &str) -> Result<&Section> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| schema(format!("checkpoint has no section `{name}`")))
    }

    pub fn write(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "seed {}", self.seed)?;
        writeln!(out, "epoch {}", self.epoch)?;
        for (k, v) in &self.meta {
            if k.is_empty() || k.contains(char::is_whitespace) || v.contains('\n') {
                return Err(schema(format!("meta entry {k:?} cannot be written")));
            }
            writeln!(out, "meta {k} {v}")?;
        }
        for s in &self.sections {
            if s.name.is_empty() || s.name.contains(char::is_whitespace) {
                return Err(schema(format!("bad section name {:?}", s.name)));
            }
            writeln!(out, "section {}", s.name)?;
            writeln!(out, "adam {} {}", s.learning_rate, s.step)?;
            for t in &s.tensors {
                writeln!(out, "tensor {} {} {}", t.name, t.rows, t.cols)?;
                for row in t.data.chunks(t.cols.max(1)) {
                    let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                    writeln!(out, "{}", line.join(" "))?;
                }
            }
        }
        Ok(())
    }

    pub fn read(input: impl BufRead) -> Result<Checkpoint> {
        let mut lines = input.lines().enumerate().peekable();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, line)) => Ok((i + 1, line?)),
                None => Err(schema(format!("checkpoint ends before {what}"))),
            }
        };
        let (_, magic) = next("the header")?;
        if magic != MAGIC {
            return Err(schema(format!("not a checkpoint: {magic:?}")));
        }
        let keyed = |(n, line): (usize, String), key: &str| -> Result<String> {
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| schema(format!("line {n}: expected `{key}`, found {line:?}")))
        };
        let seed = parse(&keyed(next("seed")?, "seed")?)?;
        let epoch = parse(&keyed(next("epoch")?, "epoch")?)?;
        let mut meta = Vec::new();
        let mut sections: Vec<Section> = Vec::new();
        let mut pending = next("the first section").ok();
        while let Some((n, line)) = pending.take() {
            if let Some(rest) = line.strip_prefix("meta ") {
                if !sections.is_empty() {
                    return Err(schema(format!("line {n}: meta after sections")));
                }
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                meta.push((k.to_string(), v.to_string()));
            } else if let Some(name) = line.strip_prefix("section ") {
                let adam = keyed(next("adam")?, "adam")?;
                let (lr, step) = adam
                    .split_once(' ')
                    .ok_or_else(|| schema(format!("line {}: adam needs a rate and a step", n + 1)))?;
                sections.push(Section {
                    name: name.to_string(),
                    learning_rate: parse(lr)?,
                    step: parse(step)?,
                    tensors: Vec::new(),
                });
            } else if let Some(rest) = line.strip_prefix("tensor ") {
                let section = sections
                    .last_mut()
                    .ok_or_else(|| schema(format!("line {n}: tensor outside a section")))?;
                let parts: Vec<&str> = rest.split(' ').collect();
                let [name, rows, cols] = parts[..] else {
                    return Err(schema(format!("line {n}: malformed tensor header")));
                };
                let (rows, cols): (usize, usize) = (parse(rows)?, parse(cols)?);
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    let (n, row) = next("tensor data")?;
                    let before = data.len();
                    for v in row.split(' ') {
                        data.push(parse(v)?);
                    }
                    if data.len() - before != cols {
                        return Err(schema(format!("line {n}: expected {cols} values")));
                    }
                }
                section.tensors.push(StoredTensor {
                    name: name.to_string(),
                    rows,
                    cols,
                    data,
                });
            } else {
                return Err(schema(format!("line {n}: unexpected {line:?}")));
            }
            pending = next("").ok();
        }
        Ok(Checkpoint {
            seed,
            epoch,
            meta,
            sections,
        })
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| schema(format!("cannot parse {s:?}")))
}
