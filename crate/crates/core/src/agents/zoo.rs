//! Agents selectable by name in experiment configs, e.g.
//! `time(c=0.3,mode=preference)`, `tft(delta=1)`, `bayes_tft()`,
//! `hardliner`, `random`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::agents::{BayesianTft, Hardliner, OfferMode, RandomWalker, RelativeTft, TimeAgent, TimeAgentConfig};
use crate::error::{contract, Error, Result};
use crate::protocol::Negotiator;

#[derive(Clone, Debug, PartialEq)]
pub enum AgentSpec {
    Time(TimeAgentConfig),
    Tft { delta: usize },
    BayesTft { delta: usize, reserve: f64 },
    Hardliner,
    Random { accept_probability: f64 },
}

impl AgentSpec {
    pub fn build(&self) -> Result<Box<dyn Negotiator + Send>> {
        Ok(match self {
            AgentSpec::Time(config) => Box::new(TimeAgent::new(config.clone())?),
            AgentSpec::Tft { delta } => Box::new(RelativeTft::new(*delta)?),
            AgentSpec::BayesTft { delta, reserve } => Box::new(BayesianTft::new(*delta, *reserve)?),
            AgentSpec::Hardliner => Box::new(Hardliner),
            AgentSpec::Random { accept_probability } => {
                if !(0.0..=1.0).contains(accept_probability) {
                    return Err(contract("accept probability outside [0, 1]"));
                }
                Box::new(RandomWalker {
                    accept_probability: *accept_probability,
                })
            }
        })
    }
}

fn parse_params(body: &str) -> Result<BTreeMap<String, String>> {
    let mut params = BTreeMap::new();
    for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| contract(format!("expected key=value, got `{part}`")))?;
        let key = key.trim().to_string();
        if params.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(contract(format!("parameter `{key}` given twice")));
        }
    }
    Ok(params)
}

struct Params {
    agent: String,
    map: BTreeMap<String, String>,
}

impl Params {
    fn take<T: FromStr>(&mut self, keys: &[&str], default: T) -> Result<T> {
        for key in keys {
            if let Some(raw) = self.map.remove(*key) {
                return raw
                    .parse()
                    .map_err(|_| contract(format!("{}: cannot parse {key}=`{raw}`", self.agent)));
            }
        }
        Ok(default)
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(key) => Err(contract(format!("{}: unknown parameter `{key}`", self.agent))),
            None => Ok(()),
        }
    }
}

impl FromStr for AgentSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, body) = match s.find('(') {
            Some(open) => {
                let body = s[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| contract(format!("unbalanced parentheses in `{s}`")))?;
                (s[..open].trim(), body)
            }
            None => (s, ""),
        };
        let mut p = Params {
            agent: name.to_string(),
            map: parse_params(body)?,
        };
        let spec = match name {
            "time" => {
                let d = TimeAgentConfig::default();
                let mode = match p.take(&["mode"], "preference".to_string())?.as_str() {
                    "planar" => OfferMode::Planar,
                    "preference" => OfferMode::PreferenceConcession,
                    other => return Err(contract(format!("time: unknown mode `{other}`"))),
                };
                let config = TimeAgentConfig {
                    concession: p.take(&["c"], d.concession)?,
                    k: p.take(&["k"], d.k)?,
                    p_min: p.take(&["p_min"], d.p_min)?,
                    p_max: p.take(&["p_max"], d.p_max)?,
                    offer_mode: mode,
                    noise_sigma: p.take(&["sigma"], d.noise_sigma)?,
                };
                config.validate()?;
                AgentSpec::Time(config)
            }
            "tft" => AgentSpec::Tft {
                delta: p.take(&["delta"], 1)?,
            },
            "bayes_tft" => AgentSpec::BayesTft {
                delta: p.take(&["delta"], 1)?,
                reserve: p.take(&["reserve"], 0.0)?,
            },
            "hardliner" => AgentSpec::Hardliner,
            "random" => AgentSpec::Random {
                accept_probability: p.take(&["p"], 0.5)?,
            },
            other => return Err(contract(format!("unknown agent `{other}`"))),
        };
        p.finish()?;
        Ok(spec)
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentSpec::Time(c) => {
                let mode = match c.offer_mode {
                    OfferMode::Planar => "planar",
                    OfferMode::PreferenceConcession => "preference",
                };
                write!(
                    f,
                    "time(c={},k={},p_min={},p_max={},mode={mode},sigma={})",
                    c.concession, c.k, c.p_min, c.p_max, c.noise_sigma
                )
            }
            AgentSpec::Tft { delta } => write!(f, "tft(delta={delta})"),
            AgentSpec::BayesTft { delta, reserve } => {
                write!(f, "bayes_tft(delta={delta},reserve={reserve})")
            }
            AgentSpec::Hardliner => f.write_str("hardliner"),
            AgentSpec::Random { accept_probability } => write!(f, "random(p={accept_probability})"),
        }
    }
}
