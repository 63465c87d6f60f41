//! Nuisance functions: cell propensities and per-cell outcome regressions.

mod crossfit;
mod misspecify;
mod outcome;
mod propensity;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::Matrix;

pub use crossfit::crossfit_assign;
pub use misspecify::misspecify;
pub use outcome::{fit_outcome, CellRegression, OutcomeModel, OutcomeParams, ResponseKind};
pub use propensity::{fit_propensity, predict_propensity, MultinomialObjective, PropensityModel, PropensityParams, PropensitySummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropensityFamily {
    LogitLinear,
    Saturated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeFamily {
    Ols,
    Saturated,
}

/// Settings shared by nuisance fitting and the estimators that consume them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceConfig {
    pub propensity_family: PropensityFamily,
    pub outcome_family: OutcomeFamily,
    /// Ridge penalty on slope coefficients (never the intercept).
    pub ridge: f64,
    pub max_iter: usize,
    /// Stop when the max-norm of the mean penalized log-likelihood gradient drops below this.
    pub grad_tol: f64,
    /// Cross-fitting folds; 1 fits on the full sample.
    pub folds: usize,
    /// Propensities below this are reported, and clipped when `clip` is set.
    pub trim_floor: f64,
    pub clip: bool,
    /// Renormalize inverse-probability weights to unit mean within each comparison arm.
    pub hajek: bool,
    pub seed: u64,
}

impl Default for NuisanceConfig {
    fn default() -> Self {
        Self {
            propensity_family: PropensityFamily::LogitLinear,
            outcome_family: OutcomeFamily::Ols,
            ridge: 1e-8,
            max_iter: 100,
            grad_tol: 1e-8,
            folds: 1,
            trim_floor: 1e-3,
            clip: false,
            hajek: false,
            seed: 0,
        }
    }
}

impl NuisanceConfig {
    pub fn saturated() -> Self {
        Self {
            propensity_family: PropensityFamily::Saturated,
            outcome_family: OutcomeFamily::Saturated,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error::InvalidConfig;
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(InvalidConfig(format!("ridge must be >= 0, got {}", self.ridge)));
        }
        if !(0.0..0.5).contains(&self.trim_floor) {
            return Err(InvalidConfig(format!(
                "trim_floor must lie in [0, 0.5), got {}",
                self.trim_floor
            )));
        }
        if self.max_iter == 0 {
            return Err(InvalidConfig("max_iter must be >= 1".into()));
        }
        if self.grad_tol.is_nan() || self.grad_tol <= 0.0 {
            return Err(InvalidConfig("grad_tol must be > 0".into()));
        }
        if self.folds == 0 {
            return Err(InvalidConfig("folds must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-column centering and scaling applied inside nuisance fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(k: usize) -> Self {
        Self {
            mean: vec![0.0; k],
            scale: vec![1.0; k],
        }
    }

    /// Population mean and standard deviation per column. Constant columns
    /// keep scale 1 and standardize to zero.
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows() as f64;
        let k = x.cols();
        let mut mean = vec![0.0; k];
        for i in 0..x.rows() {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; k];
        for i in 0..x.rows() {
            for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let scale = var
            .iter()
            .zip(&mean)
            .map(|(&s, m)| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 * (1.0 + m.abs()) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn k(&self) -> usize {
        self.mean.len()
    }

    /// Writes `[1, z_1, ..., z_k]` into `out`.
    #[inline]
    pub fn design_row(&self, row: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        for j in 0..row.len() {
            out[j + 1] = (row[j] - self.mean[j]) / self.scale[j];
        }
    }
}

/// Exact-match lookup from a discrete covariate pattern to a stored value.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "StrataRepr<T>", into = "StrataRepr<T>")]
#[serde(bound(serialize = "T: Serialize + Clone", deserialize = "T: Deserialize<'de>"))]
pub struct Strata<T> {
    keys: Vec<Vec<f64>>,
    values: Vec<T>,
    index: HashMap<Vec<u64>, usize>,
}

#[derive(Serialize, Deserialize)]
struct StrataRepr<T> {
    strata: Vec<StratumEntry<T>>,
}

#[derive(Serialize, Deserialize)]
struct StratumEntry<T> {
    x: Vec<f64>,
    value: T,
}

impl<T> From<StrataRepr<T>> for Strata<T> {
    fn from(r: StrataRepr<T>) -> Self {
        let mut s = Strata::new();
        for e in r.strata {
            s.insert(e.x, e.value);
        }
        s
    }
}

impl<T: Clone> From<Strata<T>> for StrataRepr<T> {
    fn from(s: Strata<T>) -> Self {
        StrataRepr {
            strata: s
                .keys
                .into_iter()
                .zip(s.values)
                .map(|(x, value)| StratumEntry { x, value })
                .collect(),
        }
    }
}

pub(crate) fn stratum_key(row: &[f64]) -> Vec<u64> {
    // -0.0 and 0.0 are the same stratum
    row.iter().map(|&v| (v + 0.0).to_bits()).collect()
}

impl<T> Strata<T> {
    pub fn new() -> Self {
        Self {
            keys: Vec::new(),
            values: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    fn insert(&mut self, x: Vec<f64>, value: T) {
        let key = stratum_key(&x);
        self.index.insert(key, self.keys.len());
        self.keys.push(x);
        self.values.push(value);
    }

    pub fn get(&self, row: &[f64]) -> Option<&T> {
        self.index.get(&stratum_key(row)).map(|&i| &self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], &T)> {
        self.keys.iter().map(Vec::as_slice).zip(&self.values)
    }

    /// Groups row indices of `x` by covariate pattern, in first-seen order.
    pub(crate) fn group(x: &Matrix) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut keys = Vec::new();
        let mut of_row = Vec::with_capacity(x.rows());
        for i in 0..x.rows() {
            let row = x.row(i);
            let next = keys.len();
            let s = *index.entry(stratum_key(row)).or_insert(next);
            if s == next {
                keys.push(row.to_vec());
            }
            of_row.push(s);
        }
        (keys, of_row)
    }

    pub(crate) fn from_parts(keys: Vec<Vec<f64>>, values: Vec<T>) -> Self {
        let mut s = Self::new();
        for (k, v) in keys.into_iter().zip(values) {
            s.insert(k, v);
        }
        s
    }
}

impl<T> Default for Strata<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: PartialEq> PartialEq for Strata<T> {
    fn eq(&self, other: &Self) -> bool {
        self.keys == other.keys && self.values == other.values
    }
}

pub(crate) fn stratum_label(row: &[f64]) -> String {
    let parts: Vec<String> = row.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(", "))
}
