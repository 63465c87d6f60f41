//! Weighting functions of the triple-difference estimands, evaluated at one
//! unit's cell probabilities and indicators.
//!
//! All functions are pure and assume strictly positive probabilities; the
//! [`CellProbs`] constructor is the only place positivity is checked.

use crate::data::{panel_cell, rc_cell};
use crate::error::{Error, Result};

/// Strictly positive probabilities over `N` treatment cells summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellProbs<const N: usize>([f64; N]);

pub type CellProbs4 = CellProbs<4>;
pub type CellProbs8 = CellProbs<8>;

impl<const N: usize> CellProbs<N> {
    pub fn new(p: [f64; N]) -> Result<Self> {
        if let Some(c) = p.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidData(format!("cell probability {} at index {c} is not positive", p[c])));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidData(format!("cell probabilities sum to {s}")));
        }
        Ok(Self(p))
    }

    pub fn from_slice(p: &[f64]) -> Result<Self> {
        let arr: [f64; N] = p.try_into().map_err(|_| Error::DimensionMismatch {
            expected: N,
            found: p.len(),
        })?;
        Self::new(arr)
    }

    #[inline]
    pub fn get(&self, cell: usize) -> f64 {
        self.0[cell]
    }

    pub fn as_array(&self) -> &[f64; N] {
        &self.0
    }

    /// Probability of the treated cell, the last index.
    #[inline]
    pub fn treated(&self) -> f64 {
        self.0[N - 1]
    }
}

impl CellProbs8 {
    /// `p8[(g,d,t)] = p4[(g,d)] * p(T = t)`, the product form implied when
    /// the period is independent of covariates and groups.
    pub fn product(p4: &CellProbs4, p_t1: f64) -> Result<Self> {
        let mut out = [0.0; 8];
        for g in 0..2u8 {
            for d in 0..2u8 {
                for t in 0..2u8 {
                    let pt = if t == 1 { p_t1 } else { 1.0 - p_t1 };
                    out[rc_cell(g, d, t)] = p4.get(panel_cell(g, d)) * pt;
                }
            }
        }
        Self::new(out)
    }
}

#[inline]
fn sign_factor(level: u8, bit: u8) -> f64 {
    1.0 - level as f64 - bit as f64
}

/// `rho0 = sum_{g,d} (1-g-G)(1-d-D) / pi_{g,d}`; only the `(G,D)` term is
/// nonzero, giving `(-1)^(G+D) / pi_{G,D}`.
pub fn rho0(p: &CellProbs4, g_obs: u8, d_obs: u8) -> f64 {
    let mut s = 0.0;
    for g in 0..2u8 {
        for d in 0..2u8 {
            s += sign_factor(g, g_obs) * sign_factor(d, d_obs) / p.get(panel_cell(g, d));
        }
    }
    s
}

/// `phi0 = -sum_{g,d,t} (1-g-G)(1-d-D)(1-t-T) / pi_{g,d,t}`, which equals
/// `(-1)^(G+D+T+1) / pi_{G,D,T}`.
pub fn phi0(p: &CellProbs8, g_obs: u8, d_obs: u8, t_obs: u8) -> f64 {
    let mut s = 0.0;
    for g in 0..2u8 {
        for d in 0..2u8 {
            for t in 0..2u8 {
                s += sign_factor(g, g_obs) * sign_factor(d, d_obs) * sign_factor(t, t_obs) / p.get(rc_cell(g, d, t));
            }
        }
    }
    -s
}

/// `w_{g,d} = G*D - pi_{1,1} * 1{G=g, D=d} / pi_{g,d}`.
pub fn w_gd(target: (u8, u8), p: &CellProbs4, g_obs: u8, d_obs: u8) -> f64 {
    let gd = f64::from(g_obs * d_obs);
    if (g_obs, d_obs) == target {
        gd - p.treated() / p.get(panel_cell(target.0, target.1))
    } else {
        gd
    }
}

/// `omega_{g,d,t} = G*D*T - pi_{1,1,1} * 1{G=g, D=d, T=t} / pi_{g,d,t}`.
pub fn omega_gdt(target: (u8, u8, u8), p: &CellProbs8, g_obs: u8, d_obs: u8, t_obs: u8) -> f64 {
    let gdt = f64::from(g_obs * d_obs * t_obs);
    if (g_obs, d_obs, t_obs) == target {
        gdt - p.treated() / p.get(rc_cell(target.0, target.1, target.2))
    } else {
        gdt
    }
}

/// `alpha_{g,d,t} = G*D - 1{T=t} / p(T=t) * pi_{1,1} * 1{G=g, D=d} / pi_{g,d}`,
/// the weights of the influence function when periods share one composition.
pub fn alpha_gdt(target: (u8, u8, u8), p4: &CellProbs4, p_t1: f64, g_obs: u8, d_obs: u8, t_obs: u8) -> f64 {
    let gd = f64::from(g_obs * d_obs);
    if (g_obs, d_obs, t_obs) == target {
        let pt = if target.2 == 1 { p_t1 } else { 1.0 - p_t1 };
        gd - p4.treated() / p4.get(panel_cell(target.0, target.1)) / pt
    } else {
        gd
    }
}
