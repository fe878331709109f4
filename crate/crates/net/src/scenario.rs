//! Flat `key=value` scenario files.
//!
//! ```text
//! # four processes, one of them equivocating
//! n=4
//! byzantine=auto
//! seed=7
//! protocol=at2d
//! adversary=equivocate
//! ```
//!
//! Keys the simulator itself understands are `n`, `f`, `byzantine`
//! (a comma list, `auto` or `none`), `seed`, `adversary`, `protocol`,
//! `max_delay`, `fifo` and `expose_endpoints`. Everything else is kept as a
//! protocol parameter.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use at2_core::ProcessId;

use crate::sim::{SimConfig, SimError};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scenario {
    pub entries: BTreeMap<String, String>,
}

fn bad(msg: impl Into<String>) -> SimError {
    SimError::Config(msg.into())
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, SimError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected key=value", i + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(bad(format!("line {}: empty key", i + 1)));
            }
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Scenario { entries })
    }

    /// Later values win.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, SimError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| bad(format!("cannot parse {key}={v}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, SimError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, SimError> {
        self.get(key)?.ok_or_else(|| bad(format!("missing {key}")))
    }

    pub fn n(&self) -> Result<usize, SimError> {
        self.require("n")
    }

    pub fn f(&self) -> Result<Option<f64>, SimError> {
        let f: Option<f64> = self.get("f")?;
        if let Some(f) = f {
            if !(0.0..1.0).contains(&f) {
                return Err(bad(format!("f={f} must be in [0, 1)")));
            }
        }
        Ok(f)
    }

    /// The Byzantine set. `auto` takes the highest ⌊fN⌋ ids, or the largest
    /// count below N/3 when `f` is absent.
    pub fn byzantine(&self) -> Result<BTreeSet<ProcessId>, SimError> {
        let n = self.n()?;
        let f = self.f()?;
        let set: BTreeSet<ProcessId> = match self.raw("byzantine").unwrap_or("none") {
            "none" | "" => BTreeSet::new(),
            "auto" => {
                let count = match f {
                    Some(f) => (f * n as f64).floor() as usize,
                    None => n.saturating_sub(1) / 3,
                };
                (n - count..n).map(|i| ProcessId(i as u32)).collect()
            }
            list => list
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<u32>()
                        .map(ProcessId)
                        .map_err(|_| bad(format!("bad process id {s:?}")))
                })
                .collect::<Result<_, _>>()?,
        };
        if let Some(f) = f {
            let cap = (f * n as f64).floor() as usize;
            if set.len() > cap {
                return Err(bad(format!("{} Byzantine processes exceed floor(f*n) = {cap}", set.len())));
            }
        }
        Ok(set)
    }

    pub fn sim_config(&self) -> Result<SimConfig, SimError> {
        let mut cfg = SimConfig::new(self.n()?, self.get_or("seed", 0)?);
        cfg.byzantine = self.byzantine()?;
        cfg.max_delay = self.get_or("max_delay", cfg.max_delay)?;
        cfg.fifo = self.get_or("fifo", false)?;
        cfg.expose_endpoints = self.get_or("expose_endpoints", false)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let s = Scenario::parse("# hi\nn=7\n\nseed = 3 # trailing\nG=8\n").unwrap();
        assert_eq!(s.n().unwrap(), 7);
        assert_eq!(s.get::<u64>("seed").unwrap(), Some(3));
        assert_eq!(s.get::<usize>("G").unwrap(), Some(8));
        assert!(Scenario::parse("n 7").is_err());
    }

    #[test]
    fn auto_byzantine_set() {
        let s = Scenario::parse("n=10\nbyzantine=auto").unwrap();
        assert_eq!(s.byzantine().unwrap(), (7..10).map(ProcessId).collect());
        let s = Scenario::parse("n=50\nf=0.1\nbyzantine=auto").unwrap();
        assert_eq!(s.byzantine().unwrap().len(), 5);
        let s = Scenario::parse("n=10\nf=0.1\nbyzantine=1,2").unwrap();
        assert!(s.byzantine().is_err());
        let s = Scenario::parse("n=4\nbyzantine=9").unwrap();
        assert!(s.sim_config().is_err());
    }
}
