//! Estimators of the ATT from repeated cross-sections, with and without the
//! assumption that the covariate/group composition is stable across periods.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{panel_cell, rc_cell, Design, RcDataset};
use crate::error::{Error, Result};
use crate::nuisance::{NuisanceConfig, OutcomeModel, PropensityModel, PropensitySummary, ResponseKind};
use crate::pipeline::{predict_nuisances, OutcomeTask, PropensityTask, Specification};
use crate::result::{prepare_probs, Diagnostics, EstimateResult};
use crate::weights::{omega_gdt, phi0, rho0, w_gd, CellProbs4, CellProbs8};

/// Bounds on the sample period share outside which the stable-composition
/// estimator refuses to run.
pub const TIME_SHARE_BOUNDS: (f64, f64) = (0.02, 0.98);

/// Standardized mean difference above which a covariate is flagged.
pub const SMD_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RcEstimator {
    Or,
    Ipw,
    Dr,
    DrNcc,
}

impl RcEstimator {
    pub const ALL: [RcEstimator; 4] = [Self::Or, Self::Ipw, Self::Dr, Self::DrNcc];

    pub fn name(self) -> &'static str {
        match self {
            Self::Or => "or-rc",
            Self::Ipw => "ipw-rc",
            Self::Dr => "dr-rc",
            Self::DrNcc => "dr-rc-ncc",
        }
    }

    fn needs_cell_propensity(self) -> bool {
        matches!(self, Self::Ipw | Self::Dr)
    }

    fn needs_group_propensity(self) -> bool {
        matches!(self, Self::DrNcc)
    }

    fn needs_outcome(self) -> bool {
        !matches!(self, Self::Ipw)
    }

    /// Fits the nuisances this estimator needs and evaluates it.
    pub fn fit_estimate(self, data: &RcDataset, config: &NuisanceConfig, spec: Specification) -> Result<EstimateResult> {
        if self == Self::DrNcc {
            checked_time_share(data)?;
        }
        let preds = RcPredictions::fit(data, config, spec, &[self])?;
        self.estimate_with(data, &preds, config)
    }

    pub(crate) fn estimate_with(self, data: &RcDataset, preds: &RcPredictions, config: &NuisanceConfig) -> Result<EstimateResult> {
        let n_treated = data.n_treated();
        if n_treated == 0 {
            return Err(Error::NoTreatedUnits);
        }
        let mut diag = Diagnostics {
            folds: config.folds,
            hajek: config.hajek,
            trim_floor: config.trim_floor,
            ..Diagnostics::default()
        };
        let mu = if self.needs_outcome() {
            let mu = preds.mu.as_deref().ok_or_else(|| missing("outcome"))?;
            check_mu(mu, data.n())?;
            Some(mu)
        } else {
            None
        };
        let n = data.n();
        let name = self.name();
        match self {
            Self::Or => Ok(EstimateResult::point(name, or_value(data, mu.expect("outcome")), n, n_treated, diag)),
            Self::Ipw | Self::Dr => {
                let raw = preds.cell_probs.as_deref().ok_or_else(|| missing("propensity"))?;
                diag.propensity_fit = preds.cell_summaries.clone();
                let probs = prepare_probs::<8>(raw, Design::Rc, config, &mut diag)?;
                if self == Self::Ipw {
                    let tau = ipw_value(data, &probs, config.hajek);
                    Ok(EstimateResult::point(name, tau, n, n_treated, diag))
                } else {
                    let (tau, psi) = dr_value(data, &probs, mu.expect("outcome"), config.hajek);
                    Ok(EstimateResult::point(name, tau, n, n_treated, diag).with_influence(psi))
                }
            }
            Self::DrNcc => {
                let p_t1 = checked_time_share(data)?;
                let raw = preds.group_probs.as_deref().ok_or_else(|| missing("propensity"))?;
                diag.propensity_fit = preds.group_summaries.clone();
                let probs = prepare_probs::<4>(raw, Design::Panel, config, &mut diag)?;
                let (tau, psi) = ncc_value(data, &probs, mu.expect("outcome"), p_t1, config.hajek);
                let gd = data.g().iter().zip(data.d()).filter(|(g, d)| **g == 1 && **d == 1).count();
                let mut r = EstimateResult::point(name, tau, n, n_treated, diag).with_influence(psi);
                if gd > n_treated {
                    r.diagnostics.warnings.push(format!("{} treated-group units observed in the pre period", gd - n_treated));
                }
                Ok(r)
            }
        }
    }
}

impl fmt::Display for RcEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Or => "or",
            Self::Ipw => "ipw",
            Self::Dr => "dr",
            Self::DrNcc => "dr-ncc",
        })
    }
}

impl FromStr for RcEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "or" => Ok(Self::Or),
            "ipw" => Ok(Self::Ipw),
            "dr" => Ok(Self::Dr),
            "dr-ncc" => Ok(Self::DrNcc),
            _ => Err(Error::InvalidConfig(format!("unknown rc estimator {s:?}"))),
        }
    }
}

fn missing(what: &str) -> Error {
    Error::IncompatibleModel(format!("{what} predictions missing"))
}

/// Per-unit nuisance predictions for the rc estimators: 8-cell propensities,
/// 4-cell (period-free) propensities, and 8-cell outcome means.
#[derive(Default)]
pub(crate) struct RcPredictions {
    pub cell_probs: Option<Vec<Vec<f64>>>,
    pub group_probs: Option<Vec<Vec<f64>>>,
    pub mu: Option<Vec<Vec<f64>>>,
    pub cell_summaries: Vec<PropensitySummary>,
    pub group_summaries: Vec<PropensitySummary>,
}

impl RcPredictions {
    /// Fits every nuisance required by any of `estimators`.
    pub fn fit(data: &RcDataset, config: &NuisanceConfig, spec: Specification, estimators: &[RcEstimator]) -> Result<Self> {
        let cells = data.cells();
        let need_cell = estimators.iter().any(|e| e.needs_cell_propensity());
        let need_group = estimators.iter().any(|e| e.needs_group_propensity());
        let need_mu = estimators.iter().any(|e| e.needs_outcome());
        let main = predict_nuisances(
            data.x(),
            spec,
            config,
            need_cell.then(|| PropensityTask {
                cells: &cells,
                design: Design::Rc,
            }),
            need_mu.then(|| OutcomeTask {
                response: data.y(),
                cells: &cells,
                design: Design::Rc,
                kind: ResponseKind::Level,
            }),
        )?;
        let mut out = RcPredictions {
            cell_probs: main.probs,
            mu: main.mu,
            cell_summaries: main.summaries,
            ..Default::default()
        };
        if need_group {
            let groups = data.group_cells();
            let g = predict_nuisances(
                data.x(),
                spec,
                config,
                Some(PropensityTask {
                    cells: &groups,
                    design: Design::Panel,
                }),
                None,
            )?;
            out.group_probs = g.probs;
            out.group_summaries = g.summaries;
        }
        Ok(out)
    }
}

fn check_mu(mu: &[Vec<f64>], n: usize) -> Result<()> {
    if mu.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mu.len(),
        });
    }
    if let Some(bad) = mu.iter().find(|m| m.len() != 8) {
        return Err(Error::IncompatibleModel(format!("expected 8 cell means, got {}", bad.len())));
    }
    Ok(())
}

fn checked_time_share(data: &RcDataset) -> Result<f64> {
    let p = data.time_share();
    if !(p > TIME_SHARE_BOUNDS.0 && p < TIME_SHARE_BOUNDS.1) {
        return Err(Error::DegenerateTimeShare(p));
    }
    Ok(p)
}

#[inline]
fn mu_delta(mu: &[f64], g: u8, d: u8) -> f64 {
    mu[rc_cell(g, d, 1)] - mu[rc_cell(g, d, 0)]
}

/// Mean over treated post-period units of
/// `Y - (mu_110 + mu_01D + mu_10D - mu_00D)`.
fn or_value(data: &RcDataset, mu: &[Vec<f64>]) -> f64 {
    let (g, d, t, y) = (data.g(), data.d(), data.t(), data.y());
    let mut sum = 0.0;
    let mut m = 0usize;
    for i in 0..data.n() {
        if g[i] == 1 && d[i] == 1 && t[i] == 1 {
            let mi = &mu[i];
            let cf = mi[rc_cell(1, 1, 0)] + mu_delta(mi, 0, 1) + mu_delta(mi, 1, 0) - mu_delta(mi, 0, 0);
            sum += y[i] - cf;
            m += 1;
        }
    }
    sum / m as f64
}

/// Hajek factors `E_n[treated] / E_n[p_treated 1{cell} / p_cell]` per cell.
fn hajek_scale<const N: usize>(cells: &[usize], probs: &[crate::weights::CellProbs<N>], hajek: bool) -> [f64; N] {
    let mut s = [1.0; N];
    if !hajek {
        return s;
    }
    let mut mass = [0.0; N];
    for (c, p) in cells.iter().zip(probs) {
        mass[*c] += p.treated() / p.get(*c);
    }
    for c in 0..N - 1 {
        if mass[c] > 0.0 {
            s[c] = mass[N - 1] / mass[c];
        }
    }
    s
}

fn ipw_value(data: &RcDataset, probs: &[CellProbs8], hajek: bool) -> f64 {
    let (g, d, t, y) = (data.g(), data.d(), data.t(), data.y());
    let cells = data.cells();
    let scale = hajek_scale(&cells, probs, hajek);
    let mut num = 0.0;
    let mut gdt = 0.0;
    for i in 0..data.n() {
        let p = &probs[i];
        num += scale[cells[i]] * p.treated() * phi0(p, g[i], d[i], t[i]) * y[i];
        gdt += f64::from(g[i] * d[i] * t[i]);
    }
    num / gdt
}

/// Doubly robust estimate with influence function
/// `psi_i = (sum_{g,d,t} (-1)^(g+d+t) omega_gdt (Y - mu_gdt) - G D T tau) / E_n[G D T]`.
fn dr_value(data: &RcDataset, probs: &[CellProbs8], mu: &[Vec<f64>], hajek: bool) -> (f64, Vec<f64>) {
    let n = data.n();
    let (g, d, t, y) = (data.g(), data.d(), data.t(), data.y());
    let scale = hajek_scale(&data.cells(), probs, hajek);
    let mut terms = Vec::with_capacity(n);
    let mut treated = 0.0;
    for i in 0..n {
        let gdt = f64::from(g[i] * d[i] * t[i]);
        let mut s = 0.0;
        for c in 0..8usize {
            let (cg, cd, ct) = ((c >> 2) as u8, ((c >> 1) & 1) as u8, (c & 1) as u8);
            let w = omega_gdt((cg, cd, ct), &probs[i], g[i], d[i], t[i]);
            let w = (1.0 - scale[c]) * gdt + scale[c] * w;
            let sign = if (cg + cd + ct) % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * w * (y[i] - mu[i][c]);
        }
        terms.push(s);
        treated += gdt;
    }
    let norm = treated / n as f64;
    let tau = terms.iter().sum::<f64>() / n as f64 / norm;
    let psi = terms
        .iter()
        .enumerate()
        .map(|(i, s)| (s - f64::from(g[i] * d[i] * t[i]) * tau) / norm)
        .collect();
    (tau, psi)
}

/// Stable-composition estimator built on the transformed outcome
/// `(T - p) / (p (1 - p)) * Y` with the sample period share `p`.
///
/// The influence function is the per-unit summand minus `G D tau`, plus the
/// linearization of the estimated period share, `-(T - p) * mean(q)` with
/// `q = pi_11 rho0 (mu_GD1 / p + mu_GD0 / (1 - p))`, all over `E_n[G D]`.
fn ncc_value(data: &RcDataset, probs: &[CellProbs4], mu: &[Vec<f64>], p_t1: f64, hajek: bool) -> (f64, Vec<f64>) {
    let n = data.n();
    let (g, d, t, y) = (data.g(), data.d(), data.t(), data.y());
    let scale = hajek_scale(&data.group_cells(), probs, hajek);
    let denom = p_t1 * (1.0 - p_t1);
    let mut terms = Vec::with_capacity(n);
    let mut gd_sum = 0.0;
    let mut q_sum = 0.0;
    for i in 0..n {
        let p = &probs[i];
        let gd = f64::from(g[i] * d[i]);
        let y_tilde = (f64::from(t[i]) - p_t1) / denom * y[i];
        let mut s = 0.0;
        for (c, (cg, cd)) in [(0u8, 0u8), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
            let w = w_gd((cg, cd), p, g[i], d[i]);
            let w = (1.0 - scale[c]) * gd + scale[c] * w;
            let sign = if (cg + cd) % 2 == 0 { -1.0 } else { 1.0 };
            s += sign * w * (y_tilde - mu_delta(&mu[i], cg, cd));
        }
        let c = panel_cell(g[i], d[i]);
        let own = p.treated() * rho0(p, g[i], d[i]) * scale[c];
        q_sum += own * (mu[i][rc_cell(g[i], d[i], 1)] / p_t1 + mu[i][rc_cell(g[i], d[i], 0)] / (1.0 - p_t1));
        terms.push(s);
        gd_sum += gd;
    }
    let norm = gd_sum / n as f64;
    let q_bar = q_sum / n as f64;
    let tau = terms.iter().sum::<f64>() / n as f64 / norm;
    let psi = terms
        .iter()
        .enumerate()
        .map(|(i, s)| (s - f64::from(g[i] * d[i]) * tau - (f64::from(t[i]) - p_t1) * q_bar) / norm)
        .collect();
    (tau, psi)
}

fn outcome_predictions(data: &RcDataset, outcome: &OutcomeModel) -> Result<Vec<Vec<f64>>> {
    if outcome.arity() != 8 || outcome.response_kind() != ResponseKind::Level {
        return Err(Error::IncompatibleModel("rc estimators need an 8-cell model of the outcome level".into()));
    }
    outcome.predict_all(data.x())
}

fn propensity_predictions(data: &RcDataset, propensity: &PropensityModel, arity: usize) -> Result<Vec<Vec<f64>>> {
    if propensity.arity() != arity {
        return Err(Error::IncompatibleModel(format!(
            "expected a {arity}-cell propensity model, got {} cells",
            propensity.arity()
        )));
    }
    propensity.predict_all(data.x())
}

/// Outcome-regression estimator from a fitted 8-cell model of `Y`.
pub fn estimate_or_rc(data: &RcDataset, outcome: &OutcomeModel) -> Result<EstimateResult> {
    let preds = RcPredictions {
        mu: Some(outcome_predictions(data, outcome)?),
        ..Default::default()
    };
    RcEstimator::Or.estimate_with(data, &preds, &NuisanceConfig::default())
}

/// Inverse-probability-weighting estimator from an 8-cell propensity model.
pub fn estimate_ipw_rc(data: &RcDataset, propensity: &PropensityModel, config: &NuisanceConfig) -> Result<EstimateResult> {
    let preds = RcPredictions {
        cell_probs: Some(propensity_predictions(data, propensity, 8)?),
        cell_summaries: propensity.summary.iter().cloned().collect(),
        ..Default::default()
    };
    RcEstimator::Ipw.estimate_with(data, &preds, config)
}

/// Doubly robust estimator allowing compositional changes between periods.
pub fn estimate_dr_rc(
    data: &RcDataset,
    propensity: &PropensityModel,
    outcome: &OutcomeModel,
    config: &NuisanceConfig,
) -> Result<EstimateResult> {
    let preds = RcPredictions {
        cell_probs: Some(propensity_predictions(data, propensity, 8)?),
        mu: Some(outcome_predictions(data, outcome)?),
        cell_summaries: propensity.summary.iter().cloned().collect(),
        ..Default::default()
    };
    RcEstimator::Dr.estimate_with(data, &preds, config)
}

/// Doubly robust estimator under a stable composition across periods.
/// `propensity` is a 4-cell model of `(G, D)`; `outcome` is the 8-cell level
/// model, whose per-group period differences give the trend regressions.
pub fn estimate_dr_rc_ncc(
    data: &RcDataset,
    propensity: &PropensityModel,
    outcome: &OutcomeModel,
    config: &NuisanceConfig,
) -> Result<EstimateResult> {
    checked_time_share(data)?;
    let preds = RcPredictions {
        group_probs: Some(propensity_predictions(data, propensity, 4)?),
        mu: Some(outcome_predictions(data, outcome)?),
        group_summaries: propensity.summary.iter().cloned().collect(),
        ..Default::default()
    };
    RcEstimator::DrNcc.estimate_with(data, &preds, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateBalance {
    pub name: String,
    pub mean_t0: f64,
    pub mean_t1: f64,
    pub smd: f64,
    pub flagged: bool,
}

/// Comparison of the `T = 0` and `T = 1` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionReport {
    pub n_t0: usize,
    pub n_t1: usize,
    pub threshold: f64,
    pub covariates: Vec<CovariateBalance>,
    /// Share of each `(g,d)` cell in `T = 1` minus its share in `T = 0`.
    pub cell_share_diff: BTreeMap<String, f64>,
    pub ncc_suspect: bool,
}

impl CompositionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let v = if values.len() > 1 {
        values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, v)
}

/// Standardized mean differences of each covariate between periods,
/// `(mean_1 - mean_0) / sqrt((var_1 + var_0) / 2)`, and the shift in
/// `(g,d)` cell shares.
pub fn compositional_change_diagnostic(data: &RcDataset) -> Result<CompositionReport> {
    let t = data.t();
    let idx1: Vec<usize> = (0..data.n()).filter(|&i| t[i] == 1).collect();
    let idx0: Vec<usize> = (0..data.n()).filter(|&i| t[i] == 0).collect();
    if idx0.is_empty() || idx1.is_empty() {
        return Err(Error::EmptyTimeGroup);
    }
    let x = data.x();
    let mut covariates = Vec::with_capacity(data.k());
    for (j, name) in data.covariate_names().iter().enumerate() {
        let v0: Vec<f64> = idx0.iter().map(|&i| x.get(i, j)).collect();
        let v1: Vec<f64> = idx1.iter().map(|&i| x.get(i, j)).collect();
        let (m0, s0) = mean_var(&v0);
        let (m1, s1) = mean_var(&v1);
        let pooled = ((s0 + s1) / 2.0).sqrt();
        let diff = m1 - m0;
        let smd = if diff == 0.0 {
            0.0
        } else if pooled > 0.0 {
            diff / pooled
        } else {
            diff.signum() * f64::INFINITY
        };
        covariates.push(CovariateBalance {
            name: name.clone(),
            mean_t0: m0,
            mean_t1: m1,
            smd,
            flagged: smd.abs() > SMD_THRESHOLD,
        });
    }
    let groups = data.group_cells();
    let mut share0 = [0.0; 4];
    let mut share1 = [0.0; 4];
    for &i in &idx0 {
        share0[groups[i]] += 1.0 / idx0.len() as f64;
    }
    for &i in &idx1 {
        share1[groups[i]] += 1.0 / idx1.len() as f64;
    }
    let cell_share_diff = (0..4).map(|c| (Design::Panel.label(c), share1[c] - share0[c])).collect();
    let ncc_suspect = covariates.iter().any(|c| c.flagged);
    Ok(CompositionReport {
        n_t0: idx0.len(),
        n_t1: idx1.len(),
        threshold: SMD_THRESHOLD,
        covariates,
        cell_share_diff,
        ncc_suspect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Matrix;
    use crate::nuisance::{fit_outcome, fit_propensity};

    /// One stratum with cell means 9,4,5,3,4,3,2,2 for (1,1,1),(1,1,0),(0,1,1),(0,1,0),(1,0,1),(1,0,0),(0,0,1),(0,0,0).
    fn hand_dataset() -> RcDataset {
        let means = [(1, 1, 1, 9.0), (1, 1, 0, 4.0), (0, 1, 1, 5.0), (0, 1, 0, 3.0), (1, 0, 1, 4.0), (1, 0, 0, 3.0), (0, 0, 1, 2.0), (0, 0, 0, 2.0)];
        let mut rows = Vec::new();
        for &(g, d, t, m) in &means {
            rows.push((g, d, t, m - 0.5));
            rows.push((g, d, t, m + 0.5));
            if g == 0 {
                rows.push((g, d, t, m));
            }
        }
        let n = rows.len();
        RcDataset::new(
            Matrix::zeros(n, 1),
            rows.iter().map(|r| r.0).collect(),
            rows.iter().map(|r| r.1).collect(),
            rows.iter().map(|r| r.2).collect(),
            rows.iter().map(|r| r.3).collect(),
        )
        .unwrap()
    }

    fn saturated(data: &RcDataset) -> (PropensityModel, OutcomeModel) {
        let cfg = NuisanceConfig::saturated();
        let p = fit_propensity(data.x(), &data.cells(), Design::Rc, &cfg).unwrap();
        let o = fit_outcome(data.x(), data.y(), &data.cells(), Design::Rc, ResponseKind::Level, &cfg).unwrap();
        (p, o)
    }

    #[test]
    fn hand_contrast() {
        let data = hand_dataset();
        let (p, o) = saturated(&data);
        let cfg = NuisanceConfig::saturated();
        assert!((estimate_or_rc(&data, &o).unwrap().estimate - 2.0).abs() < 1e-10);
        assert!((estimate_ipw_rc(&data, &p, &cfg).unwrap().estimate - 2.0).abs() < 1e-10);
        let dr = estimate_dr_rc(&data, &p, &o, &cfg).unwrap();
        assert!((dr.estimate - 2.0).abs() < 1e-10);
        let psi = dr.influence.unwrap();
        assert!((psi.iter().sum::<f64>() / psi.len() as f64).abs() < 1e-10);
    }

    #[test]
    fn zero_outcome_gives_zero() {
        let data = hand_dataset();
        let data = data.with_outcome(vec![0.0; data.n()]).unwrap();
        let (p, o) = saturated(&data);
        let cfg = NuisanceConfig::saturated();
        assert_eq!(estimate_ipw_rc(&data, &p, &cfg).unwrap().estimate, 0.0);
        let p4 = fit_propensity(data.x(), &data.group_cells(), Design::Panel, &cfg).unwrap();
        assert_eq!(estimate_dr_rc_ncc(&data, &p4, &o, &cfg).unwrap().estimate, 0.0);
    }

    #[test]
    fn constant_outcome_or_is_zero() {
        let data = hand_dataset();
        let data = data.with_outcome(vec![3.25; data.n()]).unwrap();
        let (_, o) = saturated(&data);
        assert!(estimate_or_rc(&data, &o).unwrap().estimate.abs() < 1e-12);
    }

    #[test]
    fn ncc_influence_has_zero_mean() {
        let data = hand_dataset();
        let cfg = NuisanceConfig::saturated();
        let (_, o) = saturated(&data);
        let p4 = fit_propensity(data.x(), &data.group_cells(), Design::Panel, &cfg).unwrap();
        let r = estimate_dr_rc_ncc(&data, &p4, &o, &cfg).unwrap();
        let psi = r.influence.unwrap();
        assert!((psi.iter().sum::<f64>() / psi.len() as f64).abs() < 1e-10);
        assert!(r.se.unwrap() >= 0.0);
    }

    #[test]
    fn degenerate_time_share() {
        let n = 300;
        let t: Vec<u8> = (0..n).map(|i| u8::from(i == 0)).collect();
        let g: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
        let d: Vec<u8> = (0..n).map(|i| u8::from(i % 4 < 2)).collect();
        let data = RcDataset::new(Matrix::zeros(n, 1), g, d, t, vec![1.0; n]).unwrap();
        let cfg = NuisanceConfig::saturated();
        let err = RcEstimator::DrNcc.fit_estimate(&data, &cfg, Specification::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateTimeShare(p) if p < 0.02));
    }

    #[test]
    fn diagnostic_identical_periods() {
        let data = RcDataset::new(Matrix::new(2, 1, vec![0.3, 0.3]).unwrap(), vec![1, 1], vec![1, 1], vec![0, 1], vec![0.0, 1.0]).unwrap();
        let r = compositional_change_diagnostic(&data).unwrap();
        assert_eq!(r.covariates[0].smd, 0.0);
        assert!(!r.ncc_suspect);
    }

    #[test]
    fn diagnostic_flags_shift() {
        let x = Matrix::new(4, 1, vec![0.0, 1.0, 1.0, 2.0]).unwrap();
        let data = RcDataset::new(x, vec![1; 4], vec![1; 4], vec![0, 0, 1, 1], vec![0.0; 4]).unwrap();
        let r = compositional_change_diagnostic(&data).unwrap();
        assert!((r.covariates[0].smd - 1.0 / 0.5f64.sqrt()).abs() < 1e-12);
        assert!(r.ncc_suspect);
    }

    #[test]
    fn diagnostic_needs_both_periods() {
        let data = RcDataset::new(Matrix::zeros(2, 1), vec![1, 0], vec![1, 0], vec![1, 1], vec![0.0, 1.0]).unwrap();
        assert!(matches!(compositional_change_diagnostic(&data), Err(Error::EmptyTimeGroup)));
    }
}
