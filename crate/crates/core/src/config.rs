//! Flat `key = value` configuration files.
//!
//! One assignment per line; `#` starts a comment; vectors are
//! comma-separated. The four cell-logit rows are keyed
//! `cell_logit_coefs.00`, `.01`, `.10` and `.11`.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::data::Design;
use crate::dgp::DgpConfig;
use crate::error::{Error, Result};

/// Parsed `(line number, key, value)` triples in file order.
pub(crate) fn parse_pairs(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected `key = value`", i + 1)))?;
        let key = k.trim().to_string();
        if out.iter().any(|(_, existing, _)| *existing == key) {
            return Err(Error::InvalidConfig(format!("line {}: duplicate key {key:?}", i + 1)));
        }
        out.push((i + 1, key, v.trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn scalar<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidConfig(format!("line {line}: cannot parse {key} = {v:?}")))
}

pub(crate) fn boolean(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("line {line}: {key} must be true or false, got {v:?}"))),
    }
}

pub(crate) fn vector(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| scalar::<f64>(line, key, s.trim())).collect()
}

pub(crate) fn design(line: usize, v: &str) -> Result<Design> {
    match v {
        "panel" => Ok(Design::Panel),
        "rc" => Ok(Design::Rc),
        _ => Err(Error::InvalidConfig(format!("line {line}: design must be panel or rc, got {v:?}"))),
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

const CELL_KEYS: [&str; 4] = ["00", "01", "10", "11"];

impl DgpConfig {
    /// Applies one assignment. Returns `Ok(false)` for keys it does not own.
    pub(crate) fn apply(&mut self, line: usize, key: &str, v: &str) -> Result<bool> {
        match key {
            "n" => self.n = scalar(line, key, v)?,
            "k" => {
                let k: usize = scalar(line, key, v)?;
                self.resize(k);
            }
            "design" => self.design = design(line, v)?,
            "tau0" => self.tau0 = scalar(line, key, v)?,
            "trend_g" => self.trend_g = vector(line, key, v)?,
            "trend_d" => self.trend_d = vector(line, key, v)?,
            "base_coefs" => self.base_coefs = vector(line, key, v)?,
            "noise_sd" => self.noise_sd = scalar(line, key, v)?,
            "p_t1" => self.p_t1 = scalar(line, key, v)?,
            "compositional_shift" => self.compositional_shift = vector(line, key, v)?,
            "violate_pdt" => self.violate_pdt = scalar(line, key, v)?,
            "anticipation" => self.anticipation = scalar(line, key, v)?,
            "heterogeneous" => self.heterogeneous = boolean(line, key, v)?,
            "seed" => self.seed = scalar(line, key, v)?,
            _ => match key.strip_prefix("cell_logit_coefs.") {
                Some(cell) => {
                    let c = CELL_KEYS
                        .iter()
                        .position(|k| *k == cell)
                        .ok_or_else(|| Error::InvalidConfig(format!("line {line}: unknown cell {cell:?}")))?;
                    self.cell_logit_coefs[c] = vector(line, key, v)?;
                }
                None => return Ok(false),
            },
        }
        Ok(true)
    }

    /// Pads or truncates every coefficient vector to `k` covariates.
    fn resize(&mut self, k: usize) {
        self.k = k;
        for v in [&mut self.trend_g, &mut self.trend_d, &mut self.base_coefs, &mut self.compositional_shift] {
            v.resize(k, 0.0);
        }
        for row in &mut self.cell_logit_coefs {
            row.resize(k + 1, 0.0);
        }
    }

    /// Parses a config, starting from the reference design. `k` is applied
    /// before any vector so that omitted vectors are padded consistently.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let mut cfg = DgpConfig::default();
        let ordered = pairs.iter().filter(|p| p.1 == "k").chain(pairs.iter().filter(|p| p.1 != "k"));
        for (line, key, v) in ordered {
            if !cfg.apply(*line, key, v)? {
                return Err(Error::InvalidConfig(format!("line {line}: unknown key {key:?}")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "design = {}", self.design);
        let _ = writeln!(s, "tau0 = {}", self.tau0);
        for (c, row) in self.cell_logit_coefs.iter().enumerate() {
            let _ = writeln!(s, "cell_logit_coefs.{} = {}", CELL_KEYS[c], fmt_vec(row));
        }
        let _ = writeln!(s, "trend_g = {}", fmt_vec(&self.trend_g));
        let _ = writeln!(s, "trend_d = {}", fmt_vec(&self.trend_d));
        let _ = writeln!(s, "base_coefs = {}", fmt_vec(&self.base_coefs));
        let _ = writeln!(s, "noise_sd = {}", self.noise_sd);
        let _ = writeln!(s, "p_t1 = {}", self.p_t1);
        let _ = writeln!(s, "compositional_shift = {}", fmt_vec(&self.compositional_shift));
        let _ = writeln!(s, "violate_pdt = {}", self.violate_pdt);
        let _ = writeln!(s, "anticipation = {}", self.anticipation);
        let _ = writeln!(s, "heterogeneous = {}", self.heterogeneous);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let cfg = DgpConfig {
            design: Design::Rc,
            compositional_shift: vec![1.0, 0.0, 0.0, -0.5],
            heterogeneous: true,
            seed: 17,
            ..DgpConfig::default()
        };
        assert_eq!(DgpConfig::from_kv_str(&cfg.to_kv_string()).unwrap(), cfg);
    }

    #[test]
    fn comments_blank_lines_and_defaults() {
        let cfg = DgpConfig::from_kv_str("# reference\n\nn = 500   # small\ndesign = rc\n").unwrap();
        assert_eq!(cfg.n, 500);
        assert_eq!(cfg.design, Design::Rc);
        assert_eq!(cfg.tau0, 1.0);
    }

    #[test]
    fn k_resizes_vectors() {
        let cfg = DgpConfig::from_kv_str("trend_g = 1, 2\nk = 2\n").unwrap();
        assert_eq!(cfg.k, 2);
        assert_eq!(cfg.base_coefs.len(), 2);
        assert_eq!(cfg.cell_logit_coefs[3].len(), 3);
        assert_eq!(cfg.trend_g, vec![1.0, 2.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(DgpConfig::from_kv_str("n = 4"), Err(Error::InvalidConfig(_))));
        assert!(matches!(DgpConfig::from_kv_str("bogus = 1"), Err(Error::InvalidConfig(_))));
        assert!(matches!(DgpConfig::from_kv_str("n 10"), Err(Error::InvalidConfig(_))));
        assert!(matches!(DgpConfig::from_kv_str("n = 10\nn = 12"), Err(Error::InvalidConfig(_))));
        assert!(matches!(DgpConfig::from_kv_str("cell_logit_coefs.22 = 1"), Err(Error::InvalidConfig(_))));
        assert!(matches!(DgpConfig::from_kv_str("heterogeneous = maybe"), Err(Error::InvalidConfig(_))));
    }
}
