//! Fit-then-estimate plumbing shared by both designs: which covariates each
//! nuisance sees, and out-of-fold prediction under cross-fitting.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::data::{Design, Matrix};
use crate::error::Result;
use crate::nuisance::{crossfit_assign, fit_outcome, fit_propensity, misspecify, NuisanceConfig, PropensitySummary, ResponseKind};

/// Whether each nuisance is fitted on the original covariates (correct) or
/// on their distorted copy from [`misspecify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Specification {
    pub propensity_correct: bool,
    pub outcome_correct: bool,
}

impl Default for Specification {
    fn default() -> Self {
        Self {
            propensity_correct: true,
            outcome_correct: true,
        }
    }
}

impl Specification {
    pub fn new(propensity_correct: bool, outcome_correct: bool) -> Self {
        Self {
            propensity_correct,
            outcome_correct,
        }
    }

    /// The four combinations, both-correct first.
    pub fn grid() -> [Specification; 4] {
        [
            Self::new(true, true),
            Self::new(true, false),
            Self::new(false, true),
            Self::new(false, false),
        ]
    }

    pub fn label(&self) -> String {
        format!(
            "propensity-{}/outcome-{}",
            if self.propensity_correct { "correct" } else { "misspecified" },
            if self.outcome_correct { "correct" } else { "misspecified" }
        )
    }
}

fn covariates(x: &Matrix, correct: bool) -> Cow<'_, Matrix> {
    if correct {
        Cow::Borrowed(x)
    } else {
        Cow::Owned(misspecify(x))
    }
}

pub(crate) struct PropensityTask<'a> {
    pub cells: &'a [usize],
    pub design: Design,
}

pub(crate) struct OutcomeTask<'a> {
    pub response: &'a [f64],
    pub cells: &'a [usize],
    pub design: Design,
    pub kind: ResponseKind,
}

#[derive(Default)]
pub(crate) struct Predictions {
    pub probs: Option<Vec<Vec<f64>>>,
    pub mu: Option<Vec<Vec<f64>>>,
    pub summaries: Vec<PropensitySummary>,
}

/// Per-unit nuisance predictions. With one fold the models are fitted and
/// evaluated on the full sample; otherwise each fold is predicted by models
/// fitted on the remaining folds.
pub(crate) fn predict_nuisances(
    x: &Matrix,
    spec: Specification,
    config: &NuisanceConfig,
    prop: Option<PropensityTask<'_>>,
    outcome: Option<OutcomeTask<'_>>,
) -> Result<Predictions> {
    config.validate()?;
    let n = x.rows();
    let folds = crossfit_assign(n, config.folds, config.seed)?;
    let k = config.folds;
    let mut out = Predictions {
        probs: prop.as_ref().map(|_| vec![Vec::new(); n]),
        mu: outcome.as_ref().map(|_| vec![Vec::new(); n]),
        summaries: Vec::new(),
    };
    let px = prop.as_ref().map(|_| covariates(x, spec.propensity_correct));
    let ox = outcome.as_ref().map(|_| covariates(x, spec.outcome_correct));

    for fold in 0..k {
        let (train, test): (Vec<usize>, Vec<usize>) = if k == 1 {
            ((0..n).collect(), (0..n).collect())
        } else {
            ((0..n).filter(|&i| folds[i] != fold).collect(), (0..n).filter(|&i| folds[i] == fold).collect())
        };
        if let (Some(task), Some(px)) = (&prop, &px) {
            let cells: Vec<usize> = train.iter().map(|&i| task.cells[i]).collect();
            let model = fit_propensity(&px.select_rows(&train), &cells, task.design, config)?;
            if let Some(s) = &model.summary {
                out.summaries.push(s.clone());
            }
            let probs = out.probs.as_mut().expect("allocated");
            for &i in &test {
                probs[i] = model.predict(px.row(i))?;
            }
        }
        if let (Some(task), Some(ox)) = (&outcome, &ox) {
            let cells: Vec<usize> = train.iter().map(|&i| task.cells[i]).collect();
            let response: Vec<f64> = train.iter().map(|&i| task.response[i]).collect();
            let model = fit_outcome(&ox.select_rows(&train), &response, &cells, task.design, task.kind, config)?;
            let mu = out.mu.as_mut().expect("allocated");
            for &i in &test {
                mu[i] = model.predict(ox.row(i))?;
            }
        }
    }
    Ok(out)
}
