//! Monte Carlo evaluation of the estimators on simulated data.
//!
//! Replicate `r` draws its dataset from `derive_seed(master_seed, r)`, so
//! reports are reproducible and independent of the thread count. In a
//! robustness grid the four specifications share each replicate's dataset,
//! and each nuisance is fitted once per arm (correct or misspecified).

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{boolean, parse_pairs, scalar};
use crate::data::{Design, Matrix, PanelDataset, RcDataset};
use crate::dgp::{derive_seed, simulate_panel, simulate_rc, true_att, true_nuisances, DgpConfig};
use crate::error::{Error, Result};
use crate::nuisance::{NuisanceConfig, OutcomeFamily, PropensityFamily, PropensityModel, PropensitySummary, ResponseKind, Standardizer};
use crate::panel::PanelEstimator;
use crate::pipeline::{predict_nuisances, OutcomeTask, Predictions, PropensityTask, Specification};
use crate::rc::{RcEstimator, RcPredictions};
use crate::result::EstimateResult;

/// A simulation study: a data-generating process, the estimators to run,
/// and how their nuisances are fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub dgp: DgpConfig,
    /// Estimator names as accepted by the CLI (`or`, `ipw`, `dr`, `dr-ncc`).
    /// Empty means every estimator available for the design.
    pub estimators: Vec<String>,
    pub specification: Specification,
    pub reps: usize,
    pub master_seed: u64,
    pub nuisance: NuisanceConfig,
    /// Use the generating nuisance functions instead of fitted ones; the
    /// specification is then ignored.
    pub oracle_nuisances: bool,
}

impl Scenario {
    pub fn new(dgp: DgpConfig, reps: usize, master_seed: u64) -> Self {
        Self {
            dgp,
            estimators: Vec::new(),
            specification: Specification::default(),
            reps,
            master_seed,
            nuisance: NuisanceConfig::default(),
            oracle_nuisances: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        self.nuisance.validate()?;
        if self.reps < 2 {
            return Err(Error::InvalidScenario(format!("reps must be >= 2, got {}", self.reps)));
        }
        Estimators::parse(self.dgp.design, &self.estimators)?;
        Ok(())
    }

    /// Parses a scenario file: any key accepted by [`DgpConfig::from_kv_str`]
    /// plus `reps`, `master_seed`, `estimators`, `propensity_correct`,
    /// `outcome_correct`, `oracle_nuisances` and the nuisance settings
    /// `folds`, `ridge`, `max_iter`, `grad_tol`, `trim_floor`, `clip`,
    /// `hajek`, `propensity_family`, `outcome_family`, `crossfit_seed`.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let mut s = Scenario::new(DgpConfig::default(), 200, 0);
        let ordered = pairs.iter().filter(|p| p.1 == "k").chain(pairs.iter().filter(|p| p.1 != "k"));
        for (line, key, v) in ordered {
            let (line, key, v) = (*line, key.as_str(), v.as_str());
            if s.dgp.apply(line, key, v)? {
                continue;
            }
            let nc = &mut s.nuisance;
            match key {
                "reps" => s.reps = scalar(line, key, v)?,
                "master_seed" => s.master_seed = scalar(line, key, v)?,
                "estimators" => {
                    s.estimators = v.split(',').map(|e| e.trim().to_string()).filter(|e| !e.is_empty()).collect()
                }
                "propensity_correct" => s.specification.propensity_correct = boolean(line, key, v)?,
                "outcome_correct" => s.specification.outcome_correct = boolean(line, key, v)?,
                "oracle_nuisances" => s.oracle_nuisances = boolean(line, key, v)?,
                "folds" => nc.folds = scalar(line, key, v)?,
                "ridge" => nc.ridge = scalar(line, key, v)?,
                "max_iter" => nc.max_iter = scalar(line, key, v)?,
                "grad_tol" => nc.grad_tol = scalar(line, key, v)?,
                "trim_floor" => nc.trim_floor = scalar(line, key, v)?,
                "clip" => nc.clip = boolean(line, key, v)?,
                "hajek" => nc.hajek = boolean(line, key, v)?,
                "crossfit_seed" => nc.seed = scalar(line, key, v)?,
                "propensity_family" => {
                    nc.propensity_family = match v {
                        "logit-linear" => PropensityFamily::LogitLinear,
                        "saturated" => PropensityFamily::Saturated,
                        _ => return Err(Error::InvalidConfig(format!("line {line}: unknown propensity family {v:?}"))),
                    }
                }
                "outcome_family" => {
                    nc.outcome_family = match v {
                        "ols" => OutcomeFamily::Ols,
                        "saturated" => OutcomeFamily::Saturated,
                        _ => return Err(Error::InvalidConfig(format!("line {line}: unknown outcome family {v:?}"))),
                    }
                }
                _ => return Err(Error::InvalidConfig(format!("line {line}: unknown key {key:?}"))),
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }
}

/// Summary of one estimator over the replicates of one specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: String,
    pub successes: usize,
    pub failures: usize,
    pub mean_estimate: f64,
    pub bias: f64,
    /// Standard deviation across replicates (divisor = successes), so that
    /// `rmse^2 = bias^2 + sd^2`.
    pub sd: f64,
    pub rmse: f64,
    /// Mean influence-function standard error, for estimators that report one.
    pub mean_se: Option<f64>,
    /// Share of replicates whose 95% interval contains the true ATT.
    pub coverage: Option<f64>,
    /// Largest absolute sample mean of the estimated influence function.
    pub max_abs_if_mean: Option<f64>,
    pub first_error: Option<String>,
    /// Per-replicate estimates in replicate order; `None` marks a failure.
    pub estimates: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub design: Design,
    pub specification: Specification,
    pub oracle_nuisances: bool,
    pub n: usize,
    pub reps: usize,
    pub master_seed: u64,
    pub true_att: f64,
    pub estimators: Vec<EstimatorSummary>,
}

const CSV_HEADER: &str =
    "design,propensity_correct,outcome_correct,estimator,n,reps,true_att,successes,failures,mean_estimate,bias,sd,rmse,mean_se,coverage";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl McReport {
    pub fn summary(&self, estimator: &str) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|s| s.estimator == estimator)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    fn csv_rows(&self, out: &mut String) {
        for s in &self.estimators {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.design,
                self.specification.propensity_correct,
                self.specification.outcome_correct,
                s.estimator,
                self.n,
                self.reps,
                self.true_att,
                s.successes,
                s.failures,
                s.mean_estimate,
                s.bias,
                s.sd,
                s.rmse,
                opt(s.mean_se),
                opt(s.coverage)
            );
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        self.csv_rows(&mut out);
        out
    }
}

/// The four specifications of a robustness grid, both-correct first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub cells: Vec<McReport>,
}

impl GridReport {
    pub fn cell(&self, spec: Specification) -> Option<&McReport> {
        self.cells.iter().find(|c| c.specification == spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for c in &self.cells {
            c.csv_rows(&mut out);
        }
        out
    }
}

enum Estimators {
    Panel(Vec<PanelEstimator>),
    Rc(Vec<RcEstimator>),
}

impl Estimators {
    fn parse(design: Design, names: &[String]) -> Result<Self> {
        let bad = |e: Error| Error::InvalidScenario(e.to_string());
        Ok(match design {
            Design::Panel if names.is_empty() => Self::Panel(PanelEstimator::ALL.to_vec()),
            Design::Rc if names.is_empty() => Self::Rc(RcEstimator::ALL.to_vec()),
            Design::Panel => Self::Panel(names.iter().map(|s| s.parse().map_err(bad)).collect::<Result<_>>()?),
            Design::Rc => Self::Rc(names.iter().map(|s| s.parse().map_err(bad)).collect::<Result<_>>()?),
        })
    }

    fn names(&self) -> Vec<&'static str> {
        match self {
            Self::Panel(v) => v.iter().map(|e| e.name()).collect(),
            Self::Rc(v) => v.iter().map(|e| e.name()).collect(),
        }
    }
}

struct Draw {
    estimate: f64,
    se: Option<f64>,
    covers: Option<bool>,
    if_mean: Option<f64>,
}

type Outcome = std::result::Result<Draw, String>;
type Arm<T> = std::result::Result<T, String>;

fn draw(r: Result<EstimateResult>, truth: f64) -> Outcome {
    let r = r.map_err(|e| e.to_string())?;
    Ok(Draw {
        estimate: r.estimate,
        se: r.se,
        covers: r.covers(truth),
        if_mean: r.influence.as_ref().map(|p| p.iter().sum::<f64>() / p.len() as f64),
    })
}

/// Fitted per-unit nuisance predictions for one arm.
#[derive(Clone)]
struct Fitted {
    probs: Vec<Vec<f64>>,
    summaries: Vec<PropensitySummary>,
}

fn fit_probs(x: &Matrix, cells: &[usize], design: Design, correct: bool, config: &NuisanceConfig) -> Arm<Fitted> {
    let spec = Specification::new(correct, correct);
    let p = predict_nuisances(x, spec, config, Some(PropensityTask { cells, design }), None).map_err(|e| e.to_string())?;
    Ok(Fitted {
        probs: p.probs.expect("requested"),
        summaries: p.summaries,
    })
}

fn fit_mu(
    x: &Matrix,
    response: &[f64],
    cells: &[usize],
    design: Design,
    kind: ResponseKind,
    correct: bool,
    config: &NuisanceConfig,
) -> Arm<Vec<Vec<f64>>> {
    let spec = Specification::new(correct, correct);
    let task = OutcomeTask {
        response,
        cells,
        design,
        kind,
    };
    let p = predict_nuisances(x, spec, config, None, Some(task)).map_err(|e| e.to_string())?;
    Ok(p.mu.expect("requested"))
}

fn oracle_probs(model: &PropensityModel, x: &Matrix) -> Arm<Fitted> {
    Ok(Fitted {
        probs: model.predict_all(x).map_err(|e| e.to_string())?,
        summaries: Vec::new(),
    })
}

/// Nuisances for arm `false` (index 0) and `true` (index 1); `None` when
/// no estimator or specification needs them.
type Arms<T> = [Option<Arm<T>>; 2];

fn arms<T>(needed: bool, specs: &[Specification], outcome: bool, fit: impl Fn(bool) -> Arm<T>) -> Arms<T> {
    let used = |arm: bool| specs.iter().any(|s| if outcome { s.outcome_correct } else { s.propensity_correct } == arm);
    [
        (needed && used(false)).then(|| fit(false)),
        (needed && used(true)).then(|| fit(true)),
    ]
}

fn pick<T: Clone>(arms: &Arms<T>, correct: bool) -> Arm<Option<T>> {
    match &arms[usize::from(correct)] {
        Some(Ok(v)) => Ok(Some(v.clone())),
        Some(Err(e)) => Err(e.clone()),
        None => Ok(None),
    }
}

fn panel_replicate(
    s: &Scenario,
    ests: &[PanelEstimator],
    specs: &[Specification],
    data: &PanelDataset,
    oracle: Option<&(PropensityModel, crate::nuisance::OutcomeModel)>,
    truth: f64,
) -> Vec<Vec<Outcome>> {
    let cfg = &s.nuisance;
    let cells = data.cells();
    let dy = data.delta_y();
    let x = data.x();
    let need_p = ests.iter().any(|e| e.needs_propensity());
    let need_m = ests.iter().any(|e| e.needs_outcome());
    let prop = arms(need_p, specs, false, |c| match oracle {
        Some((p, _)) => oracle_probs(p, x),
        None => fit_probs(x, &cells, Design::Panel, c, cfg),
    });
    let mu = arms(need_m, specs, true, |c| match oracle {
        Some((_, m)) => m.predict_all(x).map_err(|e| e.to_string()),
        None => fit_mu(x, &dy, &cells, Design::Panel, ResponseKind::Delta, c, cfg),
    });
    specs
        .iter()
        .map(|spec| {
            let p = pick(&prop, spec.propensity_correct);
            let m = pick(&mu, spec.outcome_correct);
            ests.iter()
                .map(|e| {
                    if e.needs_propensity() {
                        p.as_ref().map_err(Clone::clone)?;
                    }
                    if e.needs_outcome() {
                        m.as_ref().map_err(Clone::clone)?;
                    }
                    let (probs, summaries) = match p.as_ref().ok().cloned().flatten() {
                        Some(f) => (Some(f.probs), f.summaries),
                        None => (None, Vec::new()),
                    };
                    let preds = Predictions {
                        probs: if e.needs_propensity() { probs } else { None },
                        mu: if e.needs_outcome() { m.as_ref().ok().cloned().flatten() } else { None },
                        summaries,
                    };
                    draw(e.estimate_with(data, &preds, cfg), truth)
                })
                .collect()
        })
        .collect()
}

type Oracle = (PropensityModel, PropensityModel, crate::nuisance::OutcomeModel);

fn rc_replicate(
    s: &Scenario,
    ests: &[RcEstimator],
    specs: &[Specification],
    data: &RcDataset,
    oracle: Option<&Oracle>,
    truth: f64,
) -> Vec<Vec<Outcome>> {
    let cfg = &s.nuisance;
    let cells = data.cells();
    let groups = data.group_cells();
    let x = data.x();
    let need_cell = ests.iter().any(|e| matches!(e, RcEstimator::Ipw | RcEstimator::Dr));
    let need_group = ests.contains(&RcEstimator::DrNcc);
    let need_m = ests.iter().any(|e| *e != RcEstimator::Ipw);
    let cell_prop = arms(need_cell, specs, false, |c| match oracle {
        Some((p, _, _)) => oracle_probs(p, x),
        None => fit_probs(x, &cells, Design::Rc, c, cfg),
    });
    let group_prop = arms(need_group, specs, false, |c| match oracle {
        Some((_, p, _)) => oracle_probs(p, x),
        None => fit_probs(x, &groups, Design::Panel, c, cfg),
    });
    let mu = arms(need_m, specs, true, |c| match oracle {
        Some((_, _, m)) => m.predict_all(x).map_err(|e| e.to_string()),
        None => fit_mu(x, data.y(), &cells, Design::Rc, ResponseKind::Level, c, cfg),
    });
    specs
        .iter()
        .map(|spec| {
            let cp = pick(&cell_prop, spec.propensity_correct);
            let gp = pick(&group_prop, spec.propensity_correct);
            let m = pick(&mu, spec.outcome_correct);
            ests.iter()
                .map(|e| {
                    let uses_cell = matches!(e, RcEstimator::Ipw | RcEstimator::Dr);
                    let uses_group = *e == RcEstimator::DrNcc;
                    let uses_mu = *e != RcEstimator::Ipw;
                    let cp = if uses_cell { cp.clone()? } else { None };
                    let gp = if uses_group { gp.clone()? } else { None };
                    let mu = if uses_mu { m.clone()? } else { None };
                    let (cell_probs, cell_summaries) = cp.map(|f| (Some(f.probs), f.summaries)).unwrap_or_default();
                    let (group_probs, group_summaries) = gp.map(|f| (Some(f.probs), f.summaries)).unwrap_or_default();
                    let preds = RcPredictions {
                        cell_probs,
                        group_probs,
                        mu,
                        cell_summaries,
                        group_summaries,
                    };
                    draw(e.estimate_with(data, &preds, cfg), truth)
                })
                .collect()
        })
        .collect()
}

fn summarize(name: &str, outcomes: Vec<&Outcome>, truth: f64) -> EstimatorSummary {
    let ok: Vec<&Draw> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let m = ok.len() as f64;
    let mean = ok.iter().map(|d| d.estimate).sum::<f64>() / m;
    let sd = (ok.iter().map(|d| (d.estimate - mean).powi(2)).sum::<f64>() / m).sqrt();
    let rmse = (ok.iter().map(|d| (d.estimate - truth).powi(2)).sum::<f64>() / m).sqrt();
    let ses: Vec<f64> = ok.iter().filter_map(|d| d.se).collect();
    let covers: Vec<bool> = ok.iter().filter_map(|d| d.covers).collect();
    let if_means: Vec<f64> = ok.iter().filter_map(|d| d.if_mean).collect();
    EstimatorSummary {
        estimator: name.to_string(),
        successes: ok.len(),
        failures: outcomes.len() - ok.len(),
        mean_estimate: mean,
        bias: mean - truth,
        sd,
        rmse,
        mean_se: (!ses.is_empty()).then(|| ses.iter().sum::<f64>() / ses.len() as f64),
        coverage: (!covers.is_empty()).then(|| covers.iter().filter(|c| **c).count() as f64 / covers.len() as f64),
        max_abs_if_mean: (!if_means.is_empty()).then(|| if_means.iter().fold(0.0_f64, |a, v| a.max(v.abs()))),
        first_error: outcomes.iter().find_map(|o| o.as_ref().err().cloned()),
        estimates: outcomes.iter().map(|o| o.as_ref().ok().map(|d| d.estimate)).collect(),
    }
}

fn oracle_group_propensity(cfg: &DgpConfig) -> Result<PropensityModel> {
    PropensityModel::logit_linear(Design::Panel, Standardizer::identity(cfg.k), cfg.cell_logit_coefs.clone())
}

fn run(s: &Scenario, specs: &[Specification]) -> Result<Vec<McReport>> {
    s.validate()?;
    let ests = Estimators::parse(s.dgp.design, &s.estimators)?;
    let truth = true_att(&s.dgp)?.0;
    let (oracle_panel, oracle_rc) = if s.oracle_nuisances {
        let (p, m) = true_nuisances(&s.dgp)?;
        match s.dgp.design {
            Design::Panel => (Some((p, m)), None),
            Design::Rc => (None, Some((p, oracle_group_propensity(&s.dgp)?, m))),
        }
    } else {
        (None, None)
    };

    // [replicate][spec][estimator]
    let per_rep: Vec<Vec<Vec<Outcome>>> = (0..s.reps)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(s.master_seed, r as u64);
            let fail_all = |e: Error| {
                let msg = e.to_string();
                specs.iter().map(|_| ests.names().iter().map(|_| Err(msg.clone())).collect()).collect()
            };
            match &ests {
                Estimators::Panel(v) => match simulate_panel(&s.dgp, seed) {
                    Ok(data) => panel_replicate(s, v, specs, &data, oracle_panel.as_ref(), truth),
                    Err(e) => fail_all(e),
                },
                Estimators::Rc(v) => match simulate_rc(&s.dgp, seed) {
                    Ok(data) => rc_replicate(s, v, specs, &data, oracle_rc.as_ref(), truth),
                    Err(e) => fail_all(e),
                },
            }
        })
        .collect();

    let names = ests.names();
    let mut reports = Vec::with_capacity(specs.len());
    for (si, spec) in specs.iter().enumerate() {
        let mut summaries = Vec::with_capacity(names.len());
        for (ei, name) in names.iter().enumerate() {
            let outcomes: Vec<&Outcome> = per_rep.iter().map(|rep| &rep[si][ei]).collect();
            let summary = summarize(name, outcomes, truth);
            if summary.failures * 10 > s.reps {
                return Err(Error::ScenarioDegenerate {
                    failures: summary.failures,
                    reps: s.reps,
                });
            }
            summaries.push(summary);
        }
        reports.push(McReport {
            design: s.dgp.design,
            specification: *spec,
            oracle_nuisances: s.oracle_nuisances,
            n: s.dgp.n,
            reps: s.reps,
            master_seed: s.master_seed,
            true_att: truth,
            estimators: summaries,
        });
    }
    Ok(reports)
}

/// Runs the scenario under its own specification.
pub fn run_scenario(scenario: &Scenario) -> Result<McReport> {
    Ok(run(scenario, &[scenario.specification])?.remove(0))
}

/// Runs all four correct/misspecified combinations on shared replicates.
/// The scenario's own specification is ignored.
pub fn robustness_grid(scenario: &Scenario) -> Result<GridReport> {
    Ok(GridReport {
        cells: run(scenario, &Specification::grid())?,
    })
}
