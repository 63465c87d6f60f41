use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{stratum_label, NuisanceConfig, OutcomeFamily, Standardizer, Strata};
use crate::data::{Design, Matrix};
use crate::error::{Error, Result};

/// What the per-cell regressions model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    /// Y1 - Y0 given X within each (g,d) cell.
    Delta,
    /// Y given X within each (g,d,t) cell.
    Level,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRegression {
    pub intercept: f64,
    /// Slopes on the standardized covariates.
    pub coefficients: Vec<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum OutcomeParams {
    Ols {
        standardizer: Standardizer,
        cells: Vec<CellRegression>,
    },
    /// Per-stratum cell means.
    Saturated { means: Strata<Vec<f64>> },
}

/// Conditional mean of the response in every treatment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    family: OutcomeFamily,
    arity: usize,
    response_kind: ResponseKind,
    params: OutcomeParams,
}

impl OutcomeModel {
    /// Linear model from explicit per-cell coefficients.
    pub fn linear(design: Design, response_kind: ResponseKind, standardizer: Standardizer, cells: Vec<CellRegression>) -> Result<Self> {
        if cells.len() != design.arity() {
            return Err(Error::DimensionMismatch {
                expected: design.arity(),
                found: cells.len(),
            });
        }
        if let Some(bad) = cells.iter().find(|c| c.coefficients.len() != standardizer.k()) {
            return Err(Error::DimensionMismatch {
                expected: standardizer.k(),
                found: bad.coefficients.len(),
            });
        }
        Ok(Self {
            family: OutcomeFamily::Ols,
            arity: design.arity(),
            response_kind,
            params: OutcomeParams::Ols { standardizer, cells },
        })
    }

    pub fn family(&self) -> OutcomeFamily {
        self.family
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn response_kind(&self) -> ResponseKind {
        self.response_kind
    }

    pub fn params(&self) -> &OutcomeParams {
        &self.params
    }

    /// Predicted mean for every cell at one covariate row.
    pub fn predict(&self, x_row: &[f64]) -> Result<Vec<f64>> {
        match &self.params {
            OutcomeParams::Ols { standardizer, cells } => {
                if x_row.len() != standardizer.k() {
                    return Err(Error::DimensionMismatch {
                        expected: standardizer.k(),
                        found: x_row.len(),
                    });
                }
                let mut z = vec![0.0; x_row.len() + 1];
                standardizer.design_row(x_row, &mut z);
                Ok(cells
                    .iter()
                    .map(|r| r.intercept + r.coefficients.iter().zip(&z[1..]).map(|(b, v)| b * v).sum::<f64>())
                    .collect())
            }
            OutcomeParams::Saturated { means } => {
                if let Some((k, _)) = means.iter().next() {
                    if x_row.len() != k.len() {
                        return Err(Error::DimensionMismatch {
                            expected: k.len(),
                            found: x_row.len(),
                        });
                    }
                }
                means.get(x_row).cloned().ok_or(Error::UnseenStratum)
            }
        }
    }

    pub fn predict_all(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        (0..x.rows()).map(|i| self.predict(x.row(i))).collect()
    }
}

/// Fits one regression per cell: OLS with intercept and a ridge penalty on
/// the slopes of the normal equations, or exact stratum-cell means.
pub fn fit_outcome(
    x: &Matrix,
    response: &[f64],
    cells: &[usize],
    design: Design,
    response_kind: ResponseKind,
    config: &NuisanceConfig,
) -> Result<OutcomeModel> {
    config.validate()?;
    let n = x.rows();
    if response.len() != n || cells.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if response.len() != n { response.len() } else { cells.len() },
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
    let params = match config.outcome_family {
        OutcomeFamily::Ols => fit_ols(x, response, cells, design, config.ridge)?,
        OutcomeFamily::Saturated => fit_saturated(x, response, cells, design)?,
    };
    Ok(OutcomeModel {
        family: config.outcome_family,
        arity,
        response_kind,
        params,
    })
}

fn fit_ols(x: &Matrix, response: &[f64], cells: &[usize], design: Design, ridge: f64) -> Result<OutcomeParams> {
    let arity = design.arity();
    let standardizer = Standardizer::fit(x);
    let p = x.cols() + 1;
    let mut xtx = vec![DMatrix::<f64>::zeros(p, p); arity];
    let mut xty = vec![DVector::<f64>::zeros(p); arity];
    let mut counts = vec![0usize; arity];
    let mut z = vec![0.0; p];
    for i in 0..x.rows() {
        standardizer.design_row(x.row(i), &mut z);
        let c = cells[i];
        counts[c] += 1;
        let a = &mut xtx[c];
        for r in 0..p {
            for s in r..p {
                a[(r, s)] += z[r] * z[s];
            }
            xty[c][r] += z[r] * response[i];
        }
    }
    let mut out = Vec::with_capacity(arity);
    for c in 0..arity {
        let mut a = xtx[c].clone();
        for r in 0..p {
            for s in 0..r {
                a[(r, s)] = a[(s, r)];
            }
            if r > 0 {
                a[(r, r)] += ridge;
            }
        }
        let ch = a.cholesky().ok_or_else(|| Error::RankDeficient { cell: design.label(c) })?;
        let beta = ch.solve(&xty[c]);
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::RankDeficient { cell: design.label(c) });
        }
        out.push(CellRegression {
            intercept: beta[0],
            coefficients: beta.iter().skip(1).copied().collect(),
            n: counts[c],
        });
    }
    Ok(OutcomeParams::Ols {
        standardizer,
        cells: out,
    })
}

fn fit_saturated(x: &Matrix, response: &[f64], cells: &[usize], design: Design) -> Result<OutcomeParams> {
    let arity = design.arity();
    let (keys, of_row) = Strata::<()>::group(x);
    let mut sums = vec![vec![0.0; arity]; keys.len()];
    let mut counts = vec![vec![0usize; arity]; keys.len()];
    for (i, &s) in of_row.iter().enumerate() {
        sums[s][cells[i]] += response[i];
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
    let means = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, c)| s.iter().zip(c).map(|(v, &m)| v / m as f64).collect())
        .collect();
    Ok(OutcomeParams::Saturated {
        means: Strata::from_parts(keys, means),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> NuisanceConfig {
        NuisanceConfig::default()
    }

    #[test]
    fn constant_response_fits_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 40;
        let x = Matrix::new(n, 2, (0..2 * n).map(|_| rng.random::<f64>()).collect()).unwrap();
        let cells: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let m = fit_outcome(&x, &vec![7.0; n], &cells, Design::Panel, ResponseKind::Delta, &cfg()).unwrap();
        for i in 0..n {
            for v in m.predict(x.row(i)).unwrap() {
                assert!((v - 7.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn single_unit_per_cell_is_interpolated() {
        let x = Matrix::new(4, 2, vec![0.3, -1.0, 2.0, 0.5, -0.7, 0.1, 1.1, 1.9]).unwrap();
        let y = [1.5, -2.0, 3.25, 0.125];
        let m = fit_outcome(&x, &y, &[0, 1, 2, 3], Design::Panel, ResponseKind::Delta, &cfg()).unwrap();
        for c in 0..4 {
            let pred = m.predict(x.row(c)).unwrap();
            assert!((pred[c] - y[c]).abs() < 1e-12, "{} vs {}", pred[c], y[c]);
        }
    }

    #[test]
    fn residuals_are_orthogonal_to_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 400;
        let x = Matrix::new(n, 3, (0..3 * n).map(|_| rng.random::<f64>() * 3.0).collect()).unwrap();
        let cells: Vec<usize> = (0..n).map(|i| i % 8).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| x.row(i).iter().sum::<f64>() * (cells[i] as f64) + rng.random::<f64>())
            .collect();
        let m = fit_outcome(&x, &y, &cells, Design::Rc, ResponseKind::Level, &cfg()).unwrap();
        let OutcomeParams::Ols { standardizer, .. } = m.params() else { unreachable!() };
        let mut xtr = vec![vec![0.0; 4]; 8];
        let mut z = vec![0.0; 4];
        for i in 0..n {
            standardizer.design_row(x.row(i), &mut z);
            let r = y[i] - m.predict(x.row(i)).unwrap()[cells[i]];
            for j in 0..4 {
                xtr[cells[i]][j] += z[j] * r;
            }
        }
        let worst = xtr.iter().flatten().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn saturated_means_are_exact() {
        let x = Matrix::new(8, 1, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let cells = [0, 0, 1, 2, 3, 0, 1, 2];
        let err = fit_outcome(&x, &y, &cells, Design::Panel, ResponseKind::Delta, &NuisanceConfig::saturated()).unwrap_err();
        assert!(matches!(err, Error::EmptyCell { .. }));

        let cells = [0, 0, 1, 2, 3, 0, 1, 2];
        let x = Matrix::new(8, 1, vec![0.0; 8]).unwrap();
        let m = fit_outcome(&x, &y, &cells, Design::Panel, ResponseKind::Delta, &NuisanceConfig::saturated()).unwrap();
        assert_eq!(m.predict(&[0.0]).unwrap(), vec![(1.0 + 2.0 + 6.0) / 3.0, 5.0, 6.0, 5.0]);
        assert!(matches!(m.predict(&[1.0]), Err(Error::UnseenStratum)));
    }

    #[test]
    fn zero_ridge_collinear_design_is_rank_deficient() {
        let x = Matrix::new(8, 2, vec![1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0, 1.0, 2.0, 2.0, 4.0, 3.0, 6.0, 4.0, 8.0]).unwrap();
        let cells = [0, 0, 1, 1, 2, 2, 3, 3];
        let cfg = NuisanceConfig { ridge: 0.0, ..NuisanceConfig::default() };
        let err = fit_outcome(&x, &[1.0; 8], &cells, Design::Panel, ResponseKind::Delta, &cfg).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }), "{err:?}");
        // the default ridge resolves it
        fit_outcome(&x, &[1.0; 8], &cells, Design::Panel, ResponseKind::Delta, &NuisanceConfig::default()).unwrap();
    }
}
