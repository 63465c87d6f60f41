use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{stratum_label, NuisanceConfig, PropensityFamily, Standardizer, Strata};
use crate::data::{Design, Matrix};
use crate::error::{Error, Result};

/// Multinomial model for p(cell | X), over 4 panel or 8 repeated
/// cross-section cells. The reference cell (index 0) has zero coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    family: PropensityFamily,
    arity: usize,
    reference_cell: usize,
    params: PropensityParams,
    /// Iterations used, final gradient max-norm and smallest fitted probability.
    pub summary: Option<PropensitySummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PropensityParams {
    LogitLinear {
        standardizer: Standardizer,
        /// `arity` rows of `k + 1` coefficients (intercept first), on the
        /// standardized scale.
        coefficients: Vec<Vec<f64>>,
    },
    Saturated { counts: Strata<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensitySummary {
    pub iterations: usize,
    pub grad_norm: f64,
    pub min_fitted_prob: f64,
}

impl PropensityModel {
    /// Logit-linear model from explicit coefficients. Row 0 must be zero.
    pub fn logit_linear(design: Design, standardizer: Standardizer, coefficients: Vec<Vec<f64>>) -> Result<Self> {
        let p = standardizer.k() + 1;
        if coefficients.len() != design.arity() {
            return Err(Error::DimensionMismatch {
                expected: design.arity(),
                found: coefficients.len(),
            });
        }
        if let Some(bad) = coefficients.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: bad.len(),
            });
        }
        if coefficients[0].iter().any(|&c| c != 0.0) {
            return Err(Error::IncompatibleModel("reference cell coefficients must be zero".into()));
        }
        Ok(Self {
            family: PropensityFamily::LogitLinear,
            arity: design.arity(),
            reference_cell: 0,
            params: PropensityParams::LogitLinear {
                standardizer,
                coefficients,
            },
            summary: None,
        })
    }

    pub fn family(&self) -> PropensityFamily {
        self.family
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn design(&self) -> Design {
        Design::from_arity(self.arity).expect("arity is 4 or 8")
    }

    pub fn reference_cell(&self) -> usize {
        self.reference_cell
    }

    pub fn params(&self) -> &PropensityParams {
        &self.params
    }

    /// Number of covariates the model expects, when known.
    pub fn k(&self) -> Option<usize> {
        match &self.params {
            PropensityParams::LogitLinear { standardizer, .. } => Some(standardizer.k()),
            PropensityParams::Saturated { counts } => counts.iter().next().map(|(x, _)| x.len()),
        }
    }

    pub fn predict(&self, x_row: &[f64]) -> Result<Vec<f64>> {
        match &self.params {
            PropensityParams::LogitLinear {
                standardizer,
                coefficients,
            } => {
                if x_row.len() != standardizer.k() {
                    return Err(Error::DimensionMismatch {
                        expected: standardizer.k(),
                        found: x_row.len(),
                    });
                }
                let mut z = vec![0.0; x_row.len() + 1];
                standardizer.design_row(x_row, &mut z);
                let mut eta: Vec<f64> = coefficients.iter().map(|b| dot(b, &z)).collect();
                softmax_in_place(&mut eta);
                Ok(eta)
            }
            PropensityParams::Saturated { counts } => {
                if let Some(k) = self.k() {
                    if x_row.len() != k {
                        return Err(Error::DimensionMismatch {
                            expected: k,
                            found: x_row.len(),
                        });
                    }
                }
                let c = counts.get(x_row).ok_or(Error::UnseenStratum)?;
                let total: usize = c.iter().sum();
                Ok(c.iter().map(|&m| m as f64 / total as f64).collect())
            }
        }
    }

    /// Predictions for every row of `x`.
    pub fn predict_all(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        (0..x.rows()).map(|i| self.predict(x.row(i))).collect()
    }
}

pub fn predict_propensity(model: &PropensityModel, x_row: &[f64]) -> Result<Vec<f64>> {
    model.predict(x_row)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softmax_in_place(eta: &mut [f64]) {
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for e in eta.iter_mut() {
        *e = (*e - m).exp();
        s += *e;
    }
    for e in eta.iter_mut() {
        *e /= s;
    }
}

/// Penalized mean log-likelihood of a multinomial logit with cell 0 as
/// reference. Parameters are laid out cell-major: block `c - 1` holds the
/// `p` coefficients of cell `c`. Column 0 of the design is the intercept and
/// is not penalized.
pub struct MultinomialObjective<'a> {
    design: &'a Matrix,
    cells: &'a [usize],
    arity: usize,
    ridge: f64,
}

impl<'a> MultinomialObjective<'a> {
    pub fn new(design: &'a Matrix, cells: &'a [usize], arity: usize, ridge: f64) -> Self {
        Self {
            design,
            cells,
            arity,
            ridge,
        }
    }

    pub fn n_params(&self) -> usize {
        (self.arity - 1) * self.design.cols()
    }

    fn probs(&self, theta: &[f64], z: &[f64], out: &mut [f64]) {
        let p = z.len();
        out[0] = 0.0;
        for c in 1..self.arity {
            out[c] = dot(&theta[(c - 1) * p..c * p], z);
        }
        softmax_in_place(out);
    }

    fn penalty(&self, theta: &[f64]) -> f64 {
        let p = self.design.cols();
        theta
            .iter()
            .enumerate()
            .filter(|(i, _)| i % p != 0)
            .map(|(_, v)| v * v)
            .sum::<f64>()
            * self.ridge
            / 2.0
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let p = self.design.cols();
        let n = self.design.rows();
        let mut eta = vec![0.0; self.arity];
        let mut ll = 0.0;
        for i in 0..n {
            let z = self.design.row(i);
            eta[0] = 0.0;
            for c in 1..self.arity {
                eta[c] = dot(&theta[(c - 1) * p..c * p], z);
            }
            let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + eta.iter().map(|e| (e - m).exp()).sum::<f64>().ln();
            ll += eta[self.cells[i]] - lse;
        }
        ll / n as f64 - self.penalty(theta)
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.evaluate(theta, false).1
    }

    /// Value, gradient and (when requested) the negated Hessian.
    fn evaluate(&self, theta: &[f64], hessian: bool) -> (f64, Vec<f64>, Option<DMatrix<f64>>) {
        let p = self.design.cols();
        let n = self.design.rows();
        let q = self.n_params();
        let mut grad = vec![0.0; q];
        let mut info = hessian.then(|| DMatrix::<f64>::zeros(q, q));
        let mut pr = vec![0.0; self.arity];
        let mut w = vec![0.0; (self.arity - 1) * (self.arity - 1)];
        let mut ll = 0.0;
        for i in 0..n {
            let z = self.design.row(i);
            pr[0] = 0.0;
            for c in 1..self.arity {
                pr[c] = dot(&theta[(c - 1) * p..c * p], z);
            }
            let m = pr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + pr.iter().map(|e| (e - m).exp()).sum::<f64>().ln();
            let yi = self.cells[i];
            ll += pr[yi] - lse;
            pr.iter_mut().for_each(|e| *e = (*e - lse).exp());
            for c in 1..self.arity {
                let r = f64::from(u8::from(yi == c)) - pr[c];
                for j in 0..p {
                    grad[(c - 1) * p + j] += r * z[j];
                }
            }
            if let Some(h) = info.as_mut() {
                for a in 1..self.arity {
                    for b in a..self.arity {
                        let v = if a == b { pr[a] * (1.0 - pr[a]) } else { -pr[a] * pr[b] };
                        w[(a - 1) * (self.arity - 1) + (b - 1)] = v;
                    }
                }
                for a in 1..self.arity {
                    for b in a..self.arity {
                        let wab = w[(a - 1) * (self.arity - 1) + (b - 1)];
                        for j in 0..p {
                            let r = (a - 1) * p + j;
                            let wz = wab * z[j];
                            let l0 = if a == b { j } else { 0 };
                            for l in l0..p {
                                h[(r, (b - 1) * p + l)] += wz * z[l];
                            }
                        }
                    }
                }
            }
        }
        let nf = n as f64;
        for (i, g) in grad.iter_mut().enumerate() {
            *g /= nf;
            if i % p != 0 {
                *g -= self.ridge * theta[i];
            }
        }
        if let Some(h) = info.as_mut() {
            for r in 0..q {
                for c in r..q {
                    let v = h[(r, c)] / nf + if r == c && r % p != 0 { self.ridge } else { 0.0 };
                    h[(r, c)] = v;
                    h[(c, r)] = v;
                }
            }
        }
        (ll / nf - self.penalty(theta), grad, info)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn newton_direction(info: DMatrix<f64>, grad: &[f64]) -> Option<DVector<f64>> {
    let g = DVector::from_column_slice(grad);
    let scale = (0..info.nrows()).map(|i| info[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut damp = 0.0;
    for _ in 0..12 {
        let mut m = info.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += damp;
        }
        if let Some(ch) = m.cholesky() {
            return Some(ch.solve(&g));
        }
        damp = if damp == 0.0 { 1e-10 * scale } else { damp * 100.0 };
    }
    None
}

pub fn fit_propensity(x: &Matrix, cells: &[usize], design: Design, config: &NuisanceConfig) -> Result<PropensityModel> {
    config.validate()?;
    if cells.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            found: cells.len(),
        });
    }
    let arity = design.arity();
    if let Some(&bad) = cells.iter().find(|&&c| c >= arity) {
        return Err(Error::InvalidData(format!("cell label {bad} out of range for {design}")));
    }
    let mut counts = vec![0usize; arity];
    for &c in cells {
        counts[c] += 1;
    }
    if let Some(c) = counts.iter().position(|&m| m == 0) {
        return Err(Error::EmptyCell {
            cell: design.label(c),
            stratum: None,
        });
    }
    match config.propensity_family {
        PropensityFamily::Saturated => fit_saturated(x, cells, design),
        PropensityFamily::LogitLinear => fit_logit(x, cells, design, &counts, config),
    }
}

fn fit_saturated(x: &Matrix, cells: &[usize], design: Design) -> Result<PropensityModel> {
    let arity = design.arity();
    let (keys, of_row) = Strata::<()>::group(x);
    let mut counts = vec![vec![0usize; arity]; keys.len()];
    for (i, &s) in of_row.iter().enumerate() {
        counts[s][cells[i]] += 1;
    }
    for (s, c) in counts.iter().enumerate() {
        if let Some(cell) = c.iter().position(|&m| m == 0) {
            return Err(Error::EmptyCell {
                cell: design.label(cell),
                stratum: Some(stratum_label(&keys[s])),
            });
        }
    }
    let min_fitted_prob = counts
        .iter()
        .map(|c| {
            let tot: usize = c.iter().sum();
            *c.iter().min().unwrap() as f64 / tot as f64
        })
        .fold(1.0, f64::min);
    Ok(PropensityModel {
        family: PropensityFamily::Saturated,
        arity,
        reference_cell: 0,
        params: PropensityParams::Saturated {
            counts: Strata::from_parts(keys, counts),
        },
        summary: Some(PropensitySummary {
            iterations: 0,
            grad_norm: 0.0,
            min_fitted_prob,
        }),
    })
}

fn fit_logit(x: &Matrix, cells: &[usize], design: Design, counts: &[usize], config: &NuisanceConfig) -> Result<PropensityModel> {
    let arity = design.arity();
    let standardizer = Standardizer::fit(x);
    let p = x.cols() + 1;
    let mut dm = Matrix::zeros(x.rows(), p);
    for i in 0..x.rows() {
        standardizer.design_row(x.row(i), dm.row_mut(i));
    }
    let obj = MultinomialObjective::new(&dm, cells, arity, config.ridge);

    // start from the marginal cell frequencies
    let mut theta = vec![0.0; obj.n_params()];
    for c in 1..arity {
        theta[(c - 1) * p] = (counts[c] as f64 / counts[0] as f64).ln();
    }

    let mut iterations = 0;
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;
    while iterations < config.max_iter {
        let (f, grad, info) = obj.evaluate(&theta, true);
        grad_norm = max_abs(&grad);
        if grad_norm < config.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let Some(dir) = newton_direction(info.expect("hessian requested"), &grad) else {
            break;
        };
        let mut step = 1.0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(dir.iter()).map(|(t, d)| t + step * d).collect();
            let fc = obj.value(&cand);
            if fc >= f - 1e-14 * f.abs().max(1.0) || step < 1e-10 {
                theta = cand;
                break;
            }
            step *= 0.5;
        }
    }
    if !converged {
        grad_norm = max_abs(&obj.gradient(&theta));
        converged = grad_norm < config.grad_tol;
    }

    let mut coefficients = vec![vec![0.0; p]; arity];
    for c in 1..arity {
        coefficients[c].copy_from_slice(&theta[(c - 1) * p..c * p]);
    }

    let mut min_prob = (1.0, 0usize);
    let mut pr = vec![0.0; arity];
    for i in 0..dm.rows() {
        obj.probs(&theta, dm.row(i), &mut pr);
        for (c, &v) in pr.iter().enumerate() {
            if v < min_prob.0 {
                min_prob = (v, c);
            }
        }
    }
    if min_prob.0 < 1e-12 && !config.clip {
        return Err(Error::SeparationDetected {
            cell: design.label(min_prob.1),
            prob: min_prob.0,
        });
    }
    if !converged && min_prob.0 >= 1e-12 {
        return Err(Error::NoConvergence {
            iterations,
            grad_norm,
        });
    }

    Ok(PropensityModel {
        family: PropensityFamily::LogitLinear,
        arity,
        reference_cell: 0,
        params: PropensityParams::LogitLinear {
            standardizer,
            coefficients,
        },
        summary: Some(PropensitySummary {
            iterations,
            grad_norm,
            min_fitted_prob: min_prob.0,
        }),
    })
}
