//! Nonparametric bootstrap over units, refitting nuisances per resample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{PanelDataset, RcDataset};
use crate::dgp::derive_seed;
use crate::error::{Error, Result};
use crate::result::EstimateResult;

/// A dataset that can be resampled by unit index.
pub trait Resample: Sized + Sync {
    fn n(&self) -> usize;

    /// Whether the units at `idx` leave some treatment cell empty.
    fn has_empty_cell(&self, idx: &[usize]) -> bool;

    fn resample(&self, idx: &[usize]) -> Result<Self>;
}

fn any_empty(cells: &[usize], arity: usize, idx: &[usize]) -> bool {
    let mut seen = vec![false; arity];
    for &i in idx {
        seen[cells[i]] = true;
    }
    seen.contains(&false)
}

impl Resample for PanelDataset {
    fn n(&self) -> usize {
        PanelDataset::n(self)
    }

    fn has_empty_cell(&self, idx: &[usize]) -> bool {
        any_empty(&self.cells(), 4, idx)
    }

    fn resample(&self, idx: &[usize]) -> Result<Self> {
        self.subset(idx)
    }
}

impl Resample for RcDataset {
    fn n(&self) -> usize {
        RcDataset::n(self)
    }

    fn has_empty_cell(&self, idx: &[usize]) -> bool {
        any_empty(&self.cells(), 8, idx)
    }

    fn resample(&self, idx: &[usize]) -> Result<Self> {
        self.subset(idx)
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Runs `estimator` on the full sample and on `b` bootstrap resamples.
/// The returned result carries the full-sample estimate, the standard
/// deviation of the replicates as `se`, and the percentile 95% interval.
///
/// Resamples that leave a treatment cell empty are redrawn; more than
/// `10 * b` redraws in total is an error.
pub fn bootstrap_se<D, F>(estimator: F, data: &D, b: usize, seed: u64) -> Result<EstimateResult>
where
    D: Resample,
    F: Fn(&D) -> Result<EstimateResult> + Sync,
{
    if b < 2 {
        return Err(Error::InvalidB(b));
    }
    let mut full = estimator(data)?;
    let n = data.n();
    let mut redraws = 0usize;
    let mut samples = Vec::with_capacity(b);
    for r in 0..b {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, r as u64));
        loop {
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            if !data.has_empty_cell(&idx) {
                samples.push(idx);
                break;
            }
            redraws += 1;
            if redraws > 10 * b {
                return Err(Error::BootstrapDegenerate { attempts: redraws });
            }
        }
    }
    let estimates: Vec<f64> = samples
        .par_iter()
        .map(|idx| estimator(&data.resample(idx)?).map(|r| r.estimate))
        .collect::<Result<_>>()?;

    let m = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / m;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let mut sorted = estimates;
    sorted.sort_by(f64::total_cmp);
    full.se = Some(var.sqrt());
    full.ci = Some([quantile(&sorted, 0.025), quantile(&sorted, 0.975)]);
    full.diagnostics.bootstrap_reps = Some(b);
    if redraws > 0 {
        full.diagnostics.warnings.push(format!("{redraws} bootstrap resamples redrawn for empty cells"));
    }
    Ok(full)
}
