use serde::{Deserialize, Serialize};

use crate::data::Design;
use crate::error::{Error, Result};
use crate::nuisance::{NuisanceConfig, PropensitySummary};
use crate::weights::CellProbs;

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959964;

/// Point estimate of the ATT with optional uncertainty and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub estimator: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub ci: Option<[f64; 2]>,
    pub n: usize,
    pub n_treated: usize,
    pub diagnostics: Diagnostics,
    /// Estimated influence function per unit, evaluated at the estimate.
    #[serde(skip)]
    pub influence: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub min_propensity: Option<f64>,
    /// Units with at least one cell probability below the trim floor.
    pub below_trim_floor: usize,
    pub trim_floor: f64,
    pub clipped: bool,
    pub hajek: bool,
    pub folds: usize,
    pub propensity_fit: Vec<PropensitySummary>,
    pub bootstrap_reps: Option<usize>,
    pub warnings: Vec<String>,
}

impl EstimateResult {
    pub(crate) fn point(estimator: &str, estimate: f64, n: usize, n_treated: usize, diagnostics: Diagnostics) -> Self {
        Self {
            estimator: estimator.to_string(),
            estimate,
            se: None,
            ci: None,
            n,
            n_treated,
            diagnostics,
            influence: None,
        }
    }

    /// Attaches `se = sqrt(var(psi) / n)` and the normal 95% interval.
    pub(crate) fn with_influence(mut self, psi: Vec<f64>) -> Self {
        let n = psi.len() as f64;
        let mean = psi.iter().sum::<f64>() / n;
        let mut var = psi.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        if var < 0.0 {
            self.diagnostics.warnings.push(format!("negative variance {var:e} clamped to 0"));
            var = 0.0;
        }
        let se = (var / n).sqrt();
        self.se = Some(se);
        self.ci = Some([self.estimate - Z_95 * se, self.estimate + Z_95 * se]);
        self.influence = Some(psi);
        self
    }

    pub fn ci_lower(&self) -> Option<f64> {
        self.ci.map(|c| c[0])
    }

    pub fn ci_upper(&self) -> Option<f64> {
        self.ci.map(|c| c[1])
    }

    pub fn covers(&self, value: f64) -> Option<bool> {
        self.ci.map(|[lo, hi]| lo <= value && value <= hi)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

/// Validates raw per-unit cell probabilities against the positivity policy:
/// values under 1e-12 are fatal unless clipping lifts them, values under the
/// trim floor are counted, and clipped only when `config.clip` is set.
pub(crate) fn prepare_probs<const N: usize>(
    raw: &[Vec<f64>],
    design: Design,
    config: &NuisanceConfig,
    diag: &mut Diagnostics,
) -> Result<Vec<CellProbs<N>>> {
    let floor = config.trim_floor;
    let mut min = f64::INFINITY;
    let mut below = 0;
    let mut out = Vec::with_capacity(raw.len());
    for (i, p) in raw.iter().enumerate() {
        if p.len() != N {
            return Err(Error::IncompatibleModel(format!("expected {N} cell probabilities, got {}", p.len())));
        }
        let unit_min = p.iter().copied().fold(f64::INFINITY, f64::min);
        min = min.min(unit_min);
        let mut arr: [f64; N] = p.as_slice().try_into().expect("length checked");
        if unit_min < floor {
            below += 1;
            if config.clip {
                arr.iter_mut().for_each(|v| *v = v.max(floor));
                let s: f64 = arr.iter().sum();
                arr.iter_mut().for_each(|v| *v /= s);
            }
        }
        if let Some(c) = arr.iter().position(|&v| v.is_nan() || v < 1e-12) {
            return Err(Error::PositivityViolation {
                cell: design.label(c),
                unit: i,
                prob: arr[c],
            });
        }
        out.push(CellProbs::new(arr)?);
    }
    diag.min_propensity = Some(min);
    diag.below_trim_floor += below;
    diag.trim_floor = floor;
    diag.clipped = config.clip && below > 0;
    if below > 0 {
        diag.warnings.push(format!(
            "{below} units have a propensity below the trim floor {floor}{}",
            if config.clip { " (clipped)" } else { "" }
        ));
    }
    Ok(out)
}
