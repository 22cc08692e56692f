//! Experiment configuration, overrides and sweeps.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::PortGrid;
use crate::error::{Error, Result};
use crate::mac::PolicyKind;

/// How users pick codewords and configure their ports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Subspace codeword selection, OMP ports, closed-form real combining.
    #[default]
    Cpsc,
    /// Subspace codeword selection, greedy ports with equal weights.
    CpscNoCombining,
    /// First `K` ports always; only the codeword and weights are optimized.
    FixedAntenna,
    /// Subspace codeword selection, exhaustive port search.
    CpscExhaustive,
    /// Codewords drawn uniformly at random, OMP ports.
    BsRandomCodeword,
}

impl Scheme {
    pub const ALL: [Scheme; 5] =
        [Scheme::Cpsc, Scheme::CpscNoCombining, Scheme::FixedAntenna, Scheme::CpscExhaustive, Scheme::BsRandomCodeword];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Cpsc => "cpsc",
            Scheme::CpscNoCombining => "cpsc_no_combining",
            Scheme::FixedAntenna => "fixed_antenna",
            Scheme::CpscExhaustive => "cpsc_exhaustive",
            Scheme::BsRandomCodeword => "bs_random_codeword",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('-', "_");
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}")))
    }
}

/// Parameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Total port count; the grid becomes `sqrt(n) x sqrt(n)` on the same surface.
    N,
    U,
    M,
    T,
    SnrDb,
    K,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::N => "n",
            SweepParam::U => "u",
            SweepParam::M => "m",
            SweepParam::T => "t",
            SweepParam::SnrDb => "snr_db",
            SweepParam::K => "k",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::Config(format!("cannot sweep over {s:?}; expected n, u, m, t, snr_db or k")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// One Monte-Carlo experiment, optionally swept over one parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// BS antennas, also the codebook size.
    pub m: usize,
    pub grid: PortGrid,
    /// Users per slot.
    pub u: usize,
    /// Active ports per user.
    pub k: usize,
    /// Retained singular vectors; defaults to `min(k, m, n)`.
    #[serde(default)]
    pub t: Option<usize>,
    pub snr_db: f64,
    pub rice_factor: f64,
    pub trials: u64,
    pub seed: u64,
    pub scheme: Scheme,
    pub collision_policy: PolicyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            m: 32,
            grid: PortGrid { n1: 8, n2: 8, w1: 4.0, w2: 4.0 },
            u: 8,
            k: 8,
            t: None,
            snr_db: 10.0,
            rice_factor: 0.1,
            trials: 10_000,
            seed: 1,
            scheme: Scheme::Cpsc,
            collision_policy: PolicyKind::Deferral,
            sweep: None,
        }
    }
}

fn config_err(e: impl fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn num_ports(&self) -> usize {
        self.grid.num_ports()
    }

    /// Retained singular vectors actually used.
    pub fn effective_t(&self) -> usize {
        self.t.unwrap_or(self.k).min(self.m).min(self.num_ports())
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate().map_err(config_err)?;
        let n = self.num_ports();
        if self.m == 0 || self.u == 0 || self.k == 0 {
            return Err(Error::Config("m, u and k must be at least 1".into()));
        }
        if self.k > n {
            return Err(Error::Config(format!("k = {} exceeds the {n} available ports", self.k)));
        }
        if let Some(t) = self.t {
            if t == 0 || t > self.m.min(n) {
                return Err(Error::Config(format!("t = {t} outside 1..={}", self.m.min(n))));
            }
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::Config("snr_db must be finite".into()));
        }
        if !(self.rice_factor >= 0.0) || !self.rice_factor.is_finite() {
            return Err(Error::Config(format!("rice_factor {} must be >= 0", self.rice_factor)));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config("sweep has no values".into()));
            }
            for &v in &sweep.values {
                self.at_sweep_point(sweep.param, v)?;
            }
        }
        Ok(())
    }

    /// Legal but outside the usual operating regime.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.m < self.u {
            w.push(format!("m = {} < u = {}: codewords cannot all be distinct", self.m, self.u));
        }
        w
    }

    /// Copy with one sweep parameter set; the copy carries no sweep.
    pub fn at_sweep_point(&self, param: SweepParam, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.sweep = None;
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!("{} must be a positive integer, got {value}", param.name())))
            }
        };
        match param {
            SweepParam::N => {
                let n = count()?;
                let side = (n as f64).sqrt().round() as usize;
                if side * side != n {
                    return Err(Error::Config(format!("port count {n} is not a perfect square")));
                }
                cfg.grid.n1 = side;
                cfg.grid.n2 = side;
            }
            SweepParam::U => cfg.u = count()?,
            SweepParam::M => cfg.m = count()?,
            SweepParam::T => cfg.t = Some(count()?),
            SweepParam::K => cfg.k = count()?,
            SweepParam::SnrDb => cfg.snr_db = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply `KEY=VALUE`. Keys are config fields; grid fields are `grid.n1` etc.
    /// Values parse as JSON, falling back to a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not KEY=VALUE")))?;
        let key = key.trim();
        let value: serde_json::Value =
            serde_json::from_str(raw.trim()).unwrap_or_else(|_| serde_json::Value::String(raw.trim().to_owned()));
        let mut doc = serde_json::to_value(&*self).expect("config serializes");
        let mut slot = &mut doc;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| Error::Config(format!("unknown config key {key:?}")))?;
        }
        if slot.is_object() {
            return Err(Error::Config(format!("{key:?} is a section; set its fields instead")));
        }
        *slot = value;
        let updated: Self = serde_json::from_value(doc).map_err(|e| Error::Config(format!("{key}: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    /// Sweep points as configs, or `self` alone when there is no sweep.
    pub fn points(&self) -> Result<Vec<(Option<SweepParam>, f64, Self)>> {
        match &self.sweep {
            None => {
                let mut cfg = self.clone();
                cfg.validate()?;
                cfg.sweep = None;
                Ok(vec![(None, 0.0, cfg)])
            }
            Some(s) => s
                .values
                .iter()
                .map(|&v| Ok((Some(s.param), v, self.at_sweep_point(s.param, v)?)))
                .collect(),
        }
    }
}
