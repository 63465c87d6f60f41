//! Synthetic data with a known ATT.
//!
//! Covariates are iid standard normal (shifted by `compositional_shift` in
//! the post period of repeated cross-sections). The `(g,d)` cell follows a
//! multinomial logit in `[1, x]`. Untreated outcome changes are additive in a
//! group trend and a domain trend, which satisfies conditional parallel
//! differences in trends exactly; `violate_pdt` adds an interaction that
//! breaks it and `anticipation` shifts pre-period outcomes of the treated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{panel_cell, rc_cell, Design, Matrix, PanelDataset, RcDataset};
use crate::error::{Error, Result};
use crate::nuisance::{CellRegression, OutcomeModel, PropensityModel, ResponseKind, Standardizer};

/// Draws used for Monte Carlo integrals of the ATT and bias gaps.
pub const TRUTH_DRAWS: usize = 1_000_000;

/// Slope of the heterogeneous effect `tau(x) = tau0 + 0.5 * x_0`.
pub const HETEROGENEITY_SLOPE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub n: usize,
    pub k: usize,
    pub design: Design,
    pub tau0: f64,
    /// Four rows of `k + 1` coefficients (intercept first) for cells
    /// (0,0), (0,1), (1,0), (1,1); the (0,0) row is zero.
    pub cell_logit_coefs: Vec<Vec<f64>>,
    pub trend_g: Vec<f64>,
    pub trend_d: Vec<f64>,
    pub base_coefs: Vec<f64>,
    pub noise_sd: f64,
    pub p_t1: f64,
    pub compositional_shift: Vec<f64>,
    pub violate_pdt: f64,
    pub anticipation: f64,
    /// Use `tau(x) = tau0 + 0.5 * x_0` instead of a constant effect.
    pub heterogeneous: bool,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self::reference(Design::Panel)
    }
}

impl DgpConfig {
    /// Reference design: G loads on x_0 and x_1, D on x_1, and both trends
    /// load on x_1, which the misspecification transform captures poorly.
    pub fn reference(design: Design) -> Self {
        Self {
            n: 20_000,
            k: 4,
            design,
            tau0: 1.0,
            cell_logit_coefs: vec![
                vec![0.0; 5],
                vec![0.0, 0.0, 0.25, 0.0, 0.0],
                vec![0.0, 0.15, 0.25, 0.0, 0.0],
                vec![0.0, 0.15, 0.5, 0.0, 0.0],
            ],
            trend_g: vec![0.0, 4.0, 0.0, 0.0],
            trend_d: vec![0.0, 4.0, 0.0, 0.0],
            base_coefs: vec![0.5; 4],
            noise_sd: 1.0,
            p_t1: 0.5,
            compositional_shift: vec![0.0; 4],
            violate_pdt: 0.0,
            anticipation: 0.0,
            heterogeneous: false,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n < 8 {
            return bad(format!("n must be at least 8, got {}", self.n));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise_sd must be positive, got {}", self.noise_sd));
        }
        if !(self.p_t1 > 0.0 && self.p_t1 < 1.0) {
            return bad(format!("p_t1 must lie in (0, 1), got {}", self.p_t1));
        }
        for (name, v) in [
            ("trend_g", &self.trend_g),
            ("trend_d", &self.trend_d),
            ("base_coefs", &self.base_coefs),
            ("compositional_shift", &self.compositional_shift),
        ] {
            if v.len() != self.k {
                return bad(format!("{name} has {} entries, expected k = {}", v.len(), self.k));
            }
            if v.iter().any(|c| !c.is_finite()) {
                return bad(format!("{name} has non-finite entries"));
            }
        }
        if self.cell_logit_coefs.len() != 4 {
            return bad(format!("cell_logit_coefs needs 4 rows, got {}", self.cell_logit_coefs.len()));
        }
        for (c, row) in self.cell_logit_coefs.iter().enumerate() {
            if row.len() != self.k + 1 {
                return bad(format!(
                    "cell_logit_coefs row {} has {} entries, expected k + 1 = {}",
                    Design::Panel.label(c),
                    row.len(),
                    self.k + 1
                ));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return bad("cell_logit_coefs has non-finite entries".into());
            }
        }
        if self.cell_logit_coefs[0].iter().any(|&v| v != 0.0) {
            return bad("cell_logit_coefs row (0,0) is the reference and must be zero".into());
        }
        for (name, v) in [("tau0", self.tau0), ("violate_pdt", self.violate_pdt), ("anticipation", self.anticipation)] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        Ok(())
    }

    /// Whether the identifying assumptions hold by construction.
    pub fn assumptions_hold(&self) -> bool {
        self.violate_pdt == 0.0 && self.anticipation == 0.0
    }

    fn cell_probs(&self, x: &[f64]) -> [f64; 4] {
        let mut eta = [0.0; 4];
        for (c, row) in self.cell_logit_coefs.iter().enumerate() {
            eta[c] = row[0] + dot(&row[1..], x);
        }
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for e in eta.iter_mut() {
            *e = (*e - m).exp();
            s += *e;
        }
        eta.map(|e| e / s)
    }

    fn tau(&self, x: &[f64]) -> f64 {
        if self.heterogeneous {
            self.tau0 + HETEROGENEITY_SLOPE * x[0]
        } else {
            self.tau0
        }
    }

    /// Change in the untreated outcome between periods for a unit in `(g,d)`.
    fn untreated_trend(&self, x: &[f64], g: u8, d: u8) -> f64 {
        let mut s = 0.0;
        if g == 1 {
            s += dot(&self.trend_g, x);
        }
        if d == 1 {
            s += dot(&self.trend_d, x);
        }
        if g == 1 && d == 1 {
            s += self.violate_pdt * x[0];
        }
        s
    }

    /// Smallest and largest cell probability over `draws` covariate draws
    /// from the generating distribution.
    pub fn positivity_probe(&self, draws: usize, seed: u64) -> Result<(f64, f64)> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0; self.k];
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..draws {
            let t = self.design == Design::Rc && rng.random::<f64>() < self.p_t1;
            self.draw_x(&mut rng, t, &mut x);
            for p in self.cell_probs(&x) {
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
        Ok((lo, hi))
    }

    fn draw_x(&self, rng: &mut ChaCha8Rng, post: bool, x: &mut [f64]) {
        for (j, v) in x.iter_mut().enumerate() {
            let z: f64 = rng.sample(StandardNormal);
            *v = if post { z + self.compositional_shift[j] } else { z };
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// SplitMix64 finalizer over `(master, index)`; used to derive independent
/// per-replicate seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn draw_cell(rng: &mut ChaCha8Rng, p: &[f64; 4]) -> (u8, u8) {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (c, &pc) in p.iter().enumerate() {
        acc += pc;
        if u < acc {
            return ((c >> 1) as u8, (c & 1) as u8);
        }
    }
    (1, 1)
}

/// Panel draw without the truth integral.
pub(crate) fn simulate_panel(cfg: &DgpConfig, seed: u64) -> Result<PanelDataset> {
    cfg.validate()?;
    let (n, k) = (cfg.n, cfg.k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Matrix::zeros(n, k);
    let (mut g, mut d) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut y0, mut y1) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n {
        let row = x.row_mut(i);
        cfg.draw_x(&mut rng, false, row);
        let (gi, di) = draw_cell(&mut rng, &cfg.cell_probs(row));
        let e0: f64 = rng.sample(StandardNormal);
        let e1: f64 = rng.sample(StandardNormal);
        let y0_untreated = dot(&cfg.base_coefs, row) + cfg.noise_sd * e0;
        let y1_untreated = y0_untreated + cfg.untreated_trend(row, gi, di) + cfg.noise_sd * e1;
        let treated = gi == 1 && di == 1;
        // Observed outcomes select potential outcomes by G * D.
        y0.push(if treated { y0_untreated + cfg.anticipation } else { y0_untreated });
        y1.push(if treated { y1_untreated + cfg.tau(row) } else { y1_untreated });
        g.push(gi);
        d.push(di);
    }
    if !g.iter().zip(&d).any(|(a, b)| a * b == 1) {
        return Err(Error::InvalidConfig("the draw has no unit with g = d = 1; increase n".into()));
    }
    PanelDataset::new(x, g, d, y0, y1)
}

/// Repeated cross-section draw without the truth integral.
pub(crate) fn simulate_rc(cfg: &DgpConfig, seed: u64) -> Result<RcDataset> {
    cfg.validate()?;
    let (n, k) = (cfg.n, cfg.k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Matrix::zeros(n, k);
    let (mut g, mut d, mut t) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let ti = u8::from(rng.random::<f64>() < cfg.p_t1);
        let row = x.row_mut(i);
        cfg.draw_x(&mut rng, ti == 1, row);
        let (gi, di) = draw_cell(&mut rng, &cfg.cell_probs(row));
        let e: f64 = rng.sample(StandardNormal);
        let mut yi = dot(&cfg.base_coefs, row) + cfg.noise_sd * e;
        if ti == 1 {
            yi += cfg.untreated_trend(row, gi, di);
        }
        if gi == 1 && di == 1 {
            yi += if ti == 1 { cfg.tau(row) } else { cfg.anticipation };
        }
        g.push(gi);
        d.push(di);
        t.push(ti);
        y.push(yi);
    }
    if !(0..n).any(|i| g[i] * d[i] * t[i] == 1) {
        return Err(Error::InvalidConfig("the draw has no unit with g = d = t = 1; increase n".into()));
    }
    RcDataset::new(x, g, d, t, y)
}

/// `E[x_0 | treated]` with its Monte Carlo standard error, integrating the
/// treated-cell probability analytically over covariate draws (from the
/// post-period distribution for repeated cross-sections).
pub fn treated_mean_x0(cfg: &DgpConfig, draws: usize, seed: u64) -> Result<(f64, f64)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; cfg.k];
    let post = cfg.design == Design::Rc;
    let (mut sw, mut swx) = (0.0, 0.0);
    let mut pairs = Vec::with_capacity(draws);
    for _ in 0..draws {
        cfg.draw_x(&mut rng, post, &mut x);
        let w = cfg.cell_probs(&x)[3];
        sw += w;
        swx += w * x[0];
        pairs.push((w, x[0]));
    }
    let m = draws as f64;
    let ratio = swx / sw;
    let wbar = sw / m;
    // Delta-method variance of a ratio of means.
    let var = pairs.iter().map(|(w, x0)| (w * (x0 - ratio)).powi(2)).sum::<f64>() / (m - 1.0) / (wbar * wbar) / m;
    Ok((ratio, var.sqrt()))
}

/// True ATT and its Monte Carlo standard error (zero for a constant effect).
pub fn true_att(cfg: &DgpConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    if !cfg.heterogeneous {
        return Ok((cfg.tau0, 0.0));
    }
    let (m, se) = treated_mean_x0(cfg, TRUTH_DRAWS, derive_seed(cfg.seed, u64::MAX))?;
    Ok((cfg.tau0 + HETEROGENEITY_SLOPE * m, HETEROGENEITY_SLOPE * se))
}

/// Asymptotic bias of the outcome-regression estimator when `violate_pdt`
/// is nonzero: `violate_pdt * E[x_0 | treated]`.
pub fn pdt_violation_gap(cfg: &DgpConfig, draws: usize, seed: u64) -> Result<f64> {
    Ok(cfg.violate_pdt * treated_mean_x0(cfg, draws, seed)?.0)
}

/// Panel dataset and its true ATT. `seed` drives the draw.
pub fn generate_panel(cfg: &DgpConfig, seed: u64) -> Result<(PanelDataset, f64)> {
    let data = simulate_panel(cfg, seed)?;
    Ok((data, true_att(cfg)?.0))
}

/// Repeated cross-section dataset and its true ATT.
pub fn generate_rc(cfg: &DgpConfig, seed: u64) -> Result<(RcDataset, f64)> {
    let data = simulate_rc(cfg, seed)?;
    Ok((data, true_att(cfg)?.0))
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// The generating propensity and conditional-mean functions, in model form
/// on the raw covariate scale. Panel outcome models describe `Y1 - Y0`;
/// repeated cross-section models describe `Y` in each `(g,d,t)` cell.
pub fn true_nuisances(cfg: &DgpConfig) -> Result<(PropensityModel, OutcomeModel)> {
    cfg.validate()?;
    let k = cfg.k;
    let scale = Standardizer::identity(k);
    let mut het = vec![0.0; k];
    if cfg.heterogeneous {
        het[0] = HETEROGENEITY_SLOPE;
    }
    // Untreated trend of cell (g,d) as [intercept, slopes].
    let trend = |g: u8, d: u8| -> Vec<f64> {
        let mut s: Vec<f64> = (0..k)
            .map(|j| f64::from(g) * cfg.trend_g[j] + f64::from(d) * cfg.trend_d[j])
            .collect();
        if g == 1 && d == 1 {
            s[0] += cfg.violate_pdt;
        }
        s
    };
    match cfg.design {
        Design::Panel => {
            let prop = PropensityModel::logit_linear(Design::Panel, scale.clone(), cfg.cell_logit_coefs.clone())?;
            let mut cells = Vec::with_capacity(4);
            for c in 0..4 {
                let (g, d) = ((c >> 1) as u8, (c & 1) as u8);
                let mut coef = trend(g, d);
                let mut intercept = 0.0;
                if c == panel_cell(1, 1) {
                    intercept = cfg.tau0 - cfg.anticipation;
                    coef.iter_mut().zip(&het).for_each(|(a, h)| *a += h);
                }
                cells.push(CellRegression {
                    intercept,
                    coefficients: coef,
                    n: 0,
                });
            }
            let outcome = OutcomeModel::linear(Design::Panel, ResponseKind::Delta, scale, cells)?;
            Ok((prop, outcome))
        }
        Design::Rc => {
            let shift = &cfg.compositional_shift;
            let time_intercept = logit(cfg.p_t1) - 0.5 * dot(shift, shift);
            let mut coefs = vec![vec![0.0; k + 1]; 8];
            let mut cells = Vec::with_capacity(8);
            for (c, coef_row) in coefs.iter_mut().enumerate() {
                let (g, d, t) = ((c >> 2) as u8, ((c >> 1) & 1) as u8, (c & 1) as u8);
                let row = &cfg.cell_logit_coefs[panel_cell(g, d)];
                coef_row.copy_from_slice(row);
                if t == 1 {
                    coef_row[0] += time_intercept;
                    coef_row[1..].iter_mut().zip(shift).for_each(|(a, s)| *a += s);
                }
                let mut coef = cfg.base_coefs.clone();
                let mut intercept = 0.0;
                if t == 1 {
                    coef.iter_mut().zip(trend(g, d)).for_each(|(a, b)| *a += b);
                }
                if g == 1 && d == 1 {
                    if t == 1 {
                        intercept = cfg.tau0;
                        coef.iter_mut().zip(&het).for_each(|(a, h)| *a += h);
                    } else {
                        intercept = cfg.anticipation;
                    }
                }
                cells.push(CellRegression {
                    intercept,
                    coefficients: coef,
                    n: 0,
                });
            }
            debug_assert_eq!(rc_cell(0, 0, 0), 0);
            let prop = PropensityModel::logit_linear(Design::Rc, scale.clone(), coefs)?;
            let outcome = OutcomeModel::linear(Design::Rc, ResponseKind::Level, scale, cells)?;
            Ok((prop, outcome))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_validates_and_probe_is_within_bounds() {
        let cfg = DgpConfig::default();
        cfg.validate().unwrap();
        let (lo, hi) = cfg.positivity_probe(100_000, 1).unwrap();
        assert!(lo > 0.05 && hi < 0.6, "({lo}, {hi})");
        let (lo, hi) = DgpConfig::reference(Design::Rc).positivity_probe(100_000, 1).unwrap();
        assert!(lo > 0.05 && hi < 0.6, "({lo}, {hi})");
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            DgpConfig { n: 4, ..DgpConfig::default() },
            DgpConfig { noise_sd: 0.0, ..DgpConfig::default() },
            DgpConfig { p_t1: 1.0, ..DgpConfig::default() },
            DgpConfig { trend_g: vec![1.0], ..DgpConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        }
        let mut cfg = DgpConfig::default();
        cfg.cell_logit_coefs[0][0] = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = DgpConfig { n: 200, ..DgpConfig::default() };
        let (a, ta) = generate_panel(&cfg, 9).unwrap();
        let (b, tb) = generate_panel(&cfg, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, 1.0);
        assert_eq!(tb, 1.0);
        let (c, _) = generate_panel(&cfg, 10).unwrap();
        assert_ne!(a, c);
        let cfg = DgpConfig { n: 200, ..DgpConfig::reference(Design::Rc) };
        assert_eq!(generate_rc(&cfg, 3).unwrap().0, generate_rc(&cfg, 3).unwrap().0);
    }

    #[test]
    fn zero_noise_outcomes_match_oracle_means() {
        let cfg = DgpConfig {
            n: 300,
            noise_sd: 1e-300,
            anticipation: 0.3,
            violate_pdt: 0.2,
            heterogeneous: true,
            ..DgpConfig::default()
        };
        let data = simulate_panel(&cfg, 1).unwrap();
        let (_, outcome) = true_nuisances(&cfg).unwrap();
        let dy = data.delta_y();
        for (i, c) in data.cells().into_iter().enumerate() {
            let mu = outcome.predict(data.x().row(i)).unwrap();
            assert!((dy[i] - mu[c]).abs() < 1e-12);
        }

        let cfg = DgpConfig {
            design: Design::Rc,
            compositional_shift: vec![0.5, 0.0, -0.3, 0.0],
            ..cfg
        };
        let data = simulate_rc(&cfg, 1).unwrap();
        let (_, outcome) = true_nuisances(&cfg).unwrap();
        for (i, c) in data.cells().into_iter().enumerate() {
            let mu = outcome.predict(data.x().row(i)).unwrap();
            assert!((data.y()[i] - mu[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_propensity_matches_generating_probs() {
        let cfg = DgpConfig::default();
        let (p, _) = true_nuisances(&cfg).unwrap();
        let x = [0.3, -1.2, 0.5, 2.0];
        let got = p.predict(&x).unwrap();
        let want = cfg.cell_probs(&x);
        for c in 0..4 {
            assert!((got[c] - want[c]).abs() < 1e-15);
        }
        let zero = DgpConfig {
            cell_logit_coefs: vec![vec![0.0; 5]; 4],
            ..DgpConfig::reference(Design::Rc)
        };
        let (p, o) = true_nuisances(&zero).unwrap();
        assert!(p.predict(&x).unwrap().iter().all(|&v| (v - 0.125).abs() < 1e-15));
        let mu0 = o.predict(&[0.0; 4]).unwrap();
        assert_eq!(mu0[rc_cell(1, 1, 1)], zero.tau0);
        assert_eq!(mu0[rc_cell(0, 1, 1)], 0.0);
    }

    #[test]
    fn rc_oracle_time_odds_follow_shift() {
        let cfg = DgpConfig {
            compositional_shift: vec![1.0, 0.0, 0.0, 0.0],
            p_t1: 0.3,
            ..DgpConfig::reference(Design::Rc)
        };
        let (p, _) = true_nuisances(&cfg).unwrap();
        let x = [0.7, 0.1, -0.4, 0.0];
        let pr = p.predict(&x).unwrap();
        // p(T=1 | x) / p(T=0 | x) = p1/(1-p1) * exp(s.x - |s|^2 / 2)
        let odds = pr[rc_cell(0, 1, 1)] / pr[rc_cell(0, 1, 0)];
        let want = (0.3f64 / 0.7).ln() + 0.7 - 0.5;
        assert!((odds.ln() - want).abs() < 1e-12);
    }

    #[test]
    fn additive_trends_satisfy_parallel_differences() {
        // mu_11D - mu_10D - mu_01D + mu_00D is free of x when there is no violation.
        let cfg = DgpConfig::default();
        let (_, o) = true_nuisances(&cfg).unwrap();
        let cells = match o.params() {
            crate::nuisance::OutcomeParams::Ols { cells, .. } => cells.clone(),
            _ => unreachable!(),
        };
        for j in 0..cfg.k {
            let dd = cells[3].coefficients[j] - cells[2].coefficients[j] - cells[1].coefficients[j] + cells[0].coefficients[j];
            assert_eq!(dd, 0.0);
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn heterogeneous_truth_uses_treated_mean() {
        let cfg = DgpConfig { heterogeneous: true, ..DgpConfig::default() };
        let (att, se) = true_att(&cfg).unwrap();
        let (m, _) = treated_mean_x0(&cfg, 200_000, 5).unwrap();
        assert!(se > 0.0 && se < 1e-3);
        assert!((att - (1.0 + 0.5 * m)).abs() < 0.01);
        assert!(m > 0.0);
    }
}
