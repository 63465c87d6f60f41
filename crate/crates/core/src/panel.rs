//! Outcome-regression, inverse-probability-weighting and doubly robust
//! estimators of the ATT from two-period panel data.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{panel_cell, Design, PanelDataset};
use crate::error::{Error, Result};
use crate::nuisance::{NuisanceConfig, OutcomeModel, PropensityModel, ResponseKind};
use crate::pipeline::{predict_nuisances, OutcomeTask, Predictions, PropensityTask, Specification};
use crate::result::{prepare_probs, Diagnostics, EstimateResult};
use crate::weights::{rho0, w_gd, CellProbs4};

const CELLS: [(u8, u8); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PanelEstimator {
    Or,
    Ipw,
    Dr,
}

impl PanelEstimator {
    pub const ALL: [PanelEstimator; 3] = [Self::Or, Self::Ipw, Self::Dr];

    pub fn name(self) -> &'static str {
        match self {
            Self::Or => "or-panel",
            Self::Ipw => "ipw-panel",
            Self::Dr => "dr-panel",
        }
    }

    pub fn needs_propensity(self) -> bool {
        !matches!(self, Self::Or)
    }

    pub fn needs_outcome(self) -> bool {
        !matches!(self, Self::Ipw)
    }

    /// Fits the nuisances this estimator needs (cross-fitted when
    /// `config.folds > 1`) and evaluates it.
    pub fn fit_estimate(self, data: &PanelDataset, config: &NuisanceConfig, spec: Specification) -> Result<EstimateResult> {
        let preds = panel_predictions(data, config, spec, self.needs_propensity(), self.needs_outcome())?;
        self.estimate_with(data, &preds, config)
    }

    pub(crate) fn estimate_with(self, data: &PanelDataset, preds: &Predictions, config: &NuisanceConfig) -> Result<EstimateResult> {
        let mut diag = Diagnostics {
            folds: config.folds,
            hajek: config.hajek,
            trim_floor: config.trim_floor,
            propensity_fit: preds.summaries.clone(),
            ..Diagnostics::default()
        };
        let probs = match (&preds.probs, self.needs_propensity()) {
            (Some(raw), true) => Some(prepare_probs::<4>(raw, Design::Panel, config, &mut diag)?),
            (None, true) => return Err(Error::IncompatibleModel("propensity predictions missing".into())),
            _ => None,
        };
        let mu = match (&preds.mu, self.needs_outcome()) {
            (Some(mu), true) => Some(mu.as_slice()),
            (None, true) => return Err(Error::IncompatibleModel("outcome predictions missing".into())),
            _ => None,
        };
        run(self, data, probs.as_deref(), mu, config.hajek, diag)
    }
}

impl fmt::Display for PanelEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Or => "or",
            Self::Ipw => "ipw",
            Self::Dr => "dr",
        })
    }
}

impl FromStr for PanelEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "or" => Ok(Self::Or),
            "ipw" => Ok(Self::Ipw),
            "dr" => Ok(Self::Dr),
            _ => Err(Error::InvalidConfig(format!("unknown panel estimator {s:?}"))),
        }
    }
}

pub(crate) fn panel_predictions(
    data: &PanelDataset,
    config: &NuisanceConfig,
    spec: Specification,
    propensity: bool,
    outcome: bool,
) -> Result<Predictions> {
    let cells = data.cells();
    let dy = data.delta_y();
    predict_nuisances(
        data.x(),
        spec,
        config,
        propensity.then(|| PropensityTask {
            cells: &cells,
            design: Design::Panel,
        }),
        outcome.then(|| OutcomeTask {
            response: &dy,
            cells: &cells,
            design: Design::Panel,
            kind: ResponseKind::Delta,
        }),
    )
}

fn run(
    est: PanelEstimator,
    data: &PanelDataset,
    probs: Option<&[CellProbs4]>,
    mu: Option<&[Vec<f64>]>,
    hajek: bool,
    diag: Diagnostics,
) -> Result<EstimateResult> {
    let n_treated = data.n_treated();
    if n_treated == 0 {
        return Err(Error::NoTreatedUnits);
    }
    let n = data.n();
    Ok(match est {
        PanelEstimator::Or => EstimateResult::point(est.name(), or_value(data, mu.expect("outcome"))?, n, n_treated, diag),
        PanelEstimator::Ipw => EstimateResult::point(est.name(), ipw_value(data, probs.expect("propensity"), hajek), n, n_treated, diag),
        PanelEstimator::Dr => {
            let (tau, psi) = dr_value(data, probs.expect("propensity"), mu.expect("outcome"), hajek)?;
            EstimateResult::point(est.name(), tau, n, n_treated, diag).with_influence(psi)
        }
    })
}

fn check_mu(mu: &[Vec<f64>], n: usize) -> Result<()> {
    if mu.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mu.len(),
        });
    }
    if let Some(bad) = mu.iter().find(|m| m.len() != 4) {
        return Err(Error::IncompatibleModel(format!("expected 4 cell means, got {}", bad.len())));
    }
    Ok(())
}

/// Mean over treated units of `dY - mu_01 - mu_10 + mu_00`.
fn or_value(data: &PanelDataset, mu: &[Vec<f64>]) -> Result<f64> {
    check_mu(mu, data.n())?;
    let (g, d) = (data.g(), data.d());
    let dy = data.delta_y();
    let mut sum = 0.0;
    let mut m = 0usize;
    for i in 0..data.n() {
        if g[i] == 1 && d[i] == 1 {
            let mi = &mu[i];
            sum += dy[i] - (mi[panel_cell(0, 1)] + mi[panel_cell(1, 0)] - mi[panel_cell(0, 0)]);
            m += 1;
        }
    }
    Ok(sum / m as f64)
}

/// Hajek rescaling factor per cell: `E_n[G D] / E_n[pi_11 1{cell} / pi_cell]`.
fn hajek_scale(data: &PanelDataset, probs: &[CellProbs4], hajek: bool) -> [f64; 4] {
    let mut s = [1.0; 4];
    if !hajek {
        return s;
    }
    let mut mass = [0.0; 4];
    let cells = data.cells();
    for (i, p) in probs.iter().enumerate() {
        mass[cells[i]] += p.treated() / p.get(cells[i]);
    }
    let treated = mass[3];
    for c in 0..3 {
        if mass[c] > 0.0 {
            s[c] = treated / mass[c];
        }
    }
    s
}

/// `E_n[pi_11 * rho0 * dY] / E_n[G D]`.
fn ipw_value(data: &PanelDataset, probs: &[CellProbs4], hajek: bool) -> f64 {
    let (g, d) = (data.g(), data.d());
    let dy = data.delta_y();
    let scale = hajek_scale(data, probs, hajek);
    let mut num = 0.0;
    let mut gd = 0.0;
    for i in 0..data.n() {
        let p = &probs[i];
        num += scale[panel_cell(g[i], d[i])] * p.treated() * rho0(p, g[i], d[i]) * dy[i];
        gd += f64::from(g[i] * d[i]);
    }
    num / gd
}

/// Doubly robust estimate and its influence function,
/// `psi_i = (sum_{g,d} (-1)^(g+d+1) w_gd (dY - mu_gd) - G D tau) / E_n[G D]`.
fn dr_value(data: &PanelDataset, probs: &[CellProbs4], mu: &[Vec<f64>], hajek: bool) -> Result<(f64, Vec<f64>)> {
    check_mu(mu, data.n())?;
    let n = data.n();
    let (g, d) = (data.g(), data.d());
    let dy = data.delta_y();
    let scale = hajek_scale(data, probs, hajek);
    let mut terms = Vec::with_capacity(n);
    let mut gd_sum = 0.0;
    for i in 0..n {
        let p = &probs[i];
        let gd = f64::from(g[i] * d[i]);
        let mut s = 0.0;
        for (c, &(tg, td)) in CELLS.iter().enumerate() {
            let w = w_gd((tg, td), p, g[i], d[i]);
            let w = (1.0 - scale[c]) * gd + scale[c] * w;
            let sign = if (tg + td) % 2 == 0 { -1.0 } else { 1.0 };
            s += sign * w * (dy[i] - mu[i][c]);
        }
        terms.push(s);
        gd_sum += gd;
    }
    let gd_mean = gd_sum / n as f64;
    let tau = terms.iter().sum::<f64>() / n as f64 / gd_mean;
    let psi = terms
        .iter()
        .enumerate()
        .map(|(i, s)| (s - f64::from(g[i] * d[i]) * tau) / gd_mean)
        .collect();
    Ok((tau, psi))
}

fn outcome_predictions(data: &PanelDataset, outcome: &OutcomeModel) -> Result<Vec<Vec<f64>>> {
    if outcome.arity() != 4 || outcome.response_kind() != ResponseKind::Delta {
        return Err(Error::IncompatibleModel("panel estimators need a 4-cell model of Y1 - Y0".into()));
    }
    outcome.predict_all(data.x())
}

fn propensity_predictions(data: &PanelDataset, propensity: &PropensityModel) -> Result<Vec<Vec<f64>>> {
    if propensity.arity() != 4 {
        return Err(Error::IncompatibleModel("panel estimators need a 4-cell propensity model".into()));
    }
    propensity.predict_all(data.x())
}

/// Outcome-regression estimator from a fitted model of `Y1 - Y0`.
pub fn estimate_or_panel(data: &PanelDataset, outcome: &OutcomeModel) -> Result<EstimateResult> {
    let preds = Predictions {
        mu: Some(outcome_predictions(data, outcome)?),
        ..Predictions::default()
    };
    PanelEstimator::Or.estimate_with(data, &preds, &NuisanceConfig::default())
}

/// Inverse-probability-weighting estimator from a fitted 4-cell propensity model.
pub fn estimate_ipw_panel(data: &PanelDataset, propensity: &PropensityModel, config: &NuisanceConfig) -> Result<EstimateResult> {
    let preds = Predictions {
        probs: Some(propensity_predictions(data, propensity)?),
        summaries: propensity.summary.iter().cloned().collect(),
        ..Predictions::default()
    };
    PanelEstimator::Ipw.estimate_with(data, &preds, config)
}

/// Doubly robust estimator with influence-function standard error. The
/// models are used as given; [`PanelEstimator::fit_estimate`] fits them,
/// with cross-fitting when requested.
pub fn estimate_dr_panel(
    data: &PanelDataset,
    propensity: &PropensityModel,
    outcome: &OutcomeModel,
    config: &NuisanceConfig,
) -> Result<EstimateResult> {
    let preds = Predictions {
        probs: Some(propensity_predictions(data, propensity)?),
        mu: Some(outcome_predictions(data, outcome)?),
        summaries: propensity.summary.iter().cloned().collect(),
    };
    PanelEstimator::Dr.estimate_with(data, &preds, config)
}
