//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each, and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use tripledd::data::{panel_cell, rc_cell};
use tripledd::nuisance::{MultinomialObjective, PropensityParams};
use tripledd::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn simplex<const N: usize>(rng: &mut ChaCha8Rng) -> [f64; N] {
    let mut p = [0.0; N];
    for v in &mut p {
        *v = Exp1.sample(rng);
    }
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_sign = 0.0_f64;
    let mut nonzero = 0usize;
    let mut worst_fact = 0.0_f64;
    for _ in 0..10_000 {
        let p4 = CellProbs4::new(simplex::<4>(&mut rng)).unwrap();
        let p8 = CellProbs8::new(simplex::<8>(&mut rng)).unwrap();
        let pt: f64 = rng.random_range(0.05..0.95);
        let prod = CellProbs8::product(&p4, pt).unwrap();
        for g in 0..2u8 {
            for d in 0..2u8 {
                let expect = if (g + d) % 2 == 0 { 1.0 } else { -1.0 } / p4.get(panel_cell(g, d));
                worst_sign = worst_sign.max(rel(rho0(&p4, g, d), expect));
                if w_gd((1, 1), &p4, g, d) != 0.0 {
                    nonzero += 1;
                }
                for t in 0..2u8 {
                    let expect = if (g + d + t) % 2 == 1 { 1.0 } else { -1.0 } / p8.get(rc_cell(g, d, t));
                    worst_sign = worst_sign.max(rel(phi0(&p8, g, d, t), expect));
                    if omega_gdt((1, 1, 1), &p8, g, d, t) != 0.0 {
                        nonzero += 1;
                    }
                    let time = (f64::from(t) - pt) / (pt * (1.0 - pt));
                    worst_fact = worst_fact.max(rel(phi0(&prod, g, d, t), time * rho0(&p4, g, d)));
                }
            }
        }
    }
    check(
        worst_sign < 1e-12 && nonzero == 0 && worst_fact < 1e-12,
        format!("sign-law rel err {worst_sign:.1e}, nonzero treated weights {nonzero}, factorization rel err {worst_fact:.1e}"),
    )
}

/// Discrete covariate with `strata` levels and every cell present in every stratum.
fn discrete_cells(rng: &mut ChaCha8Rng, n: usize, strata: usize, arity: usize) -> (Matrix, Vec<usize>) {
    let mut x = Vec::with_capacity(n);
    let mut cells = Vec::with_capacity(n);
    for i in 0..n {
        let (s, c) = if i < strata * arity {
            (i / arity, i % arity)
        } else {
            (rng.random_range(0..strata), rng.random_range(0..arity))
        };
        x.push(s as f64);
        cells.push(c);
    }
    (Matrix::new(n, 1, x).unwrap(), cells)
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = NuisanceConfig::saturated();
    let spec = Specification::default();
    let mut worst_agree = 0.0_f64;
    let mut worst_mean = 0.0_f64;
    let mut errors = Vec::new();
    for _ in 0..100 {
        let strata = rng.random_range(3..=5);
        let n = rng.random_range(50..=500).max(strata * 8);

        // Panel.
        let (x, cells) = discrete_cells(&mut rng, n, strata, 4);
        let g: Vec<u8> = cells.iter().map(|c| (c >> 1) as u8).collect();
        let d: Vec<u8> = cells.iter().map(|c| (c & 1) as u8).collect();
        let y0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y1: Vec<f64> = (0..n).map(|i| y0[i] + rng.random_range(-2.0..3.0) + x.get(i, 0)).collect();
        let data = PanelDataset::new(x.clone(), g.clone(), d.clone(), y0, y1).unwrap();
        let est: Result<Vec<f64>> = PanelEstimator::ALL.iter().map(|e| e.fit_estimate(&data, &cfg, spec).map(|r| r.estimate)).collect();
        match est {
            Ok(v) => worst_agree = worst_agree.max((v[0] - v[1]).abs()).max((v[0] - v[2]).abs()),
            Err(e) => errors.push(e.to_string()),
        }
        let model = fit_propensity(&x, &cells, Design::Panel, &cfg).unwrap();
        let probs = model.predict_all(&x).unwrap();
        for tg in 0..2u8 {
            for td in 0..2u8 {
                let m = (0..n)
                    .map(|i| w_gd((tg, td), &CellProbs4::from_slice(&probs[i]).unwrap(), g[i], d[i]))
                    .sum::<f64>()
                    / n as f64;
                worst_mean = worst_mean.max(m.abs());
            }
        }

        // Repeated cross-sections.
        let (x, cells) = discrete_cells(&mut rng, n, strata, 8);
        let bit = |s: usize| -> Vec<u8> { cells.iter().map(|c| ((c >> s) & 1) as u8).collect() };
        let (g, d, t) = (bit(2), bit(1), bit(0));
        let y: Vec<f64> = (0..n).map(|i| rng.random_range(-1.0..1.0) + f64::from(t[i]) * x.get(i, 0)).collect();
        let data = RcDataset::new(x.clone(), g.clone(), d.clone(), t.clone(), y).unwrap();
        let est: Result<Vec<f64>> = [RcEstimator::Or, RcEstimator::Ipw, RcEstimator::Dr]
            .iter()
            .map(|e| e.fit_estimate(&data, &cfg, spec).map(|r| r.estimate))
            .collect();
        match est {
            Ok(v) => worst_agree = worst_agree.max((v[0] - v[1]).abs()).max((v[0] - v[2]).abs()),
            Err(e) => errors.push(e.to_string()),
        }
        let model = fit_propensity(&x, &cells, Design::Rc, &cfg).unwrap();
        let probs = model.predict_all(&x).unwrap();
        for c in 0..8usize {
            let target = ((c >> 2) as u8, ((c >> 1) & 1) as u8, (c & 1) as u8);
            let m = (0..n)
                .map(|i| omega_gdt(target, &CellProbs8::from_slice(&probs[i]).unwrap(), g[i], d[i], t[i]))
                .sum::<f64>()
                / n as f64;
            worst_mean = worst_mean.max(m.abs());
        }
    }
    check(
        errors.is_empty() && worst_agree < 1e-8 && worst_mean < 1e-12,
        format!(
            "max |OR-IPW|,|OR-DR| {worst_agree:.1e}, max |mean weight| {worst_mean:.1e}, errors {}",
            errors.len()
        ),
    )
}

fn criterion_3() -> Outcome {
    let cfg = NuisanceConfig::saturated();
    let spec = Specification::default();
    // Panel: cell means of dY for (1,1), (0,1), (1,0), (0,0).
    let means = [((1, 1), 5.0), ((0, 1), 3.0), ((1, 0), 2.0), ((0, 0), 1.0)];
    let (mut g, mut d, mut dy) = (Vec::new(), Vec::new(), Vec::new());
    for ((gg, dd), m) in means {
        for off in [-0.5, 0.0, 0.5] {
            g.push(gg);
            d.push(dd);
            dy.push(m + off);
        }
    }
    let n = g.len();
    let panel = PanelDataset::new(Matrix::zeros(n, 1), g, d, vec![0.0; n], dy).unwrap();
    let mut worst = 0.0_f64;
    let mut errors = 0;
    for e in PanelEstimator::ALL {
        match e.fit_estimate(&panel, &cfg, spec) {
            Ok(r) => worst = worst.max((r.estimate - 1.0).abs()),
            Err(_) => errors += 1,
        }
    }
    let means = [
        ((1, 1, 1), 9.0),
        ((1, 1, 0), 4.0),
        ((0, 1, 1), 5.0),
        ((0, 1, 0), 3.0),
        ((1, 0, 1), 4.0),
        ((1, 0, 0), 3.0),
        ((0, 0, 1), 2.0),
        ((0, 0, 0), 2.0),
    ];
    let (mut g, mut d, mut t, mut y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for ((gg, dd, tt), m) in means {
        for off in [-1.0, 1.0] {
            g.push(gg);
            d.push(dd);
            t.push(tt);
            y.push(m + off);
        }
    }
    let n = g.len();
    let rc = RcDataset::new(Matrix::zeros(n, 1), g, d, t, y).unwrap();
    for e in [RcEstimator::Or, RcEstimator::Ipw, RcEstimator::Dr] {
        match e.fit_estimate(&rc, &cfg, spec) {
            Ok(r) => worst = worst.max((r.estimate - 2.0).abs()),
            Err(_) => errors += 1,
        }
    }
    check(errors == 0 && worst < 1e-10, format!("max deviation {worst:.1e}, errors {errors}"))
}

struct Grids {
    panel: GridReport,
    rc: GridReport,
    seconds: f64,
}

fn grids() -> Result<Grids> {
    let start = Instant::now();
    let panel = robustness_grid(&Scenario::new(DgpConfig::reference(Design::Panel), 200, 2024))?;
    let rc = robustness_grid(&Scenario::new(DgpConfig::reference(Design::Rc), 200, 2025))?;
    Ok(Grids {
        panel,
        rc,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn criterion_4(g: &Grids) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (report, names) in [
        (&g.panel, ["or-panel", "ipw-panel", "dr-panel"]),
        (&g.rc, ["or-rc", "ipw-rc", "dr-rc"]),
    ] {
        let cell = report.cell(Specification::new(true, true)).unwrap();
        for name in names {
            let s = cell.summary(name).unwrap();
            ok &= s.bias.abs() < 0.03 && s.rmse < 0.1;
            parts.push(format!("{name} bias {:+.4} rmse {:.4}", s.bias, s.rmse));
        }
    }
    ok &= g.seconds < 600.0;
    check(ok, format!("{}; both grids {:.0}s", parts.join(", "), g.seconds))
}

fn criterion_5(g: &Grids) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (report, or, ipw, drs) in [
        (&g.panel, "or-panel", "ipw-panel", vec!["dr-panel"]),
        (&g.rc, "or-rc", "ipw-rc", vec!["dr-rc", "dr-rc-ncc"]),
    ] {
        for cell in &report.cells {
            let spec = cell.specification;
            let tag = format!("{}{}", u8::from(spec.propensity_correct), u8::from(spec.outcome_correct));
            if spec.propensity_correct || spec.outcome_correct {
                for dr in &drs {
                    let b = cell.summary(dr).unwrap().bias;
                    ok &= b.abs() < 0.05;
                    parts.push(format!("{dr}[{tag}] {b:+.3}"));
                }
            }
            if !spec.outcome_correct {
                let b = cell.summary(or).unwrap().bias;
                ok &= b.abs() > 0.15;
                parts.push(format!("{or}[{tag}] {b:+.3}"));
            }
            if !spec.propensity_correct {
                let b = cell.summary(ipw).unwrap().bias;
                ok &= b.abs() > 0.15;
                parts.push(format!("{ipw}[{tag}] {b:+.3}"));
            }
        }
    }
    check(ok, parts.join(", "))
}

fn max_if_mean(reports: &[&McReport]) -> f64 {
    reports
        .iter()
        .flat_map(|r| r.estimators.iter())
        .filter_map(|s| s.max_abs_if_mean)
        .fold(0.0, f64::max)
}

fn criterion_6(g: &Grids) -> Result<Outcome> {
    let mut reports = Vec::new();
    for (design, estimators, seed) in [
        (Design::Panel, vec!["dr"], 606),
        (Design::Rc, vec!["dr", "dr-ncc"], 607),
    ] {
        let mut s = Scenario::new(DgpConfig { n: 5000, ..DgpConfig::reference(design) }, 500, seed);
        s.estimators = estimators.into_iter().map(String::from).collect();
        reports.push(run_scenario(&s)?);
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for r in &reports {
        for s in &r.estimators {
            let c = s.coverage.unwrap_or(f64::NAN);
            ok &= (0.90..=0.98).contains(&c) && s.failures == 0;
            parts.push(format!("{} coverage {c:.3}", s.estimator));
        }
    }
    let all: Vec<&McReport> = reports.iter().chain(&g.panel.cells).chain(&g.rc.cells).collect();
    let m = max_if_mean(&all);
    ok &= m < 1e-10;
    parts.push(format!("max |mean IF| {m:.1e}"));
    Ok(check(ok, parts.join(", ")))
}

/// The 8-cell propensity `pi_gd(x) * p(T = t)` built from a fitted 4-cell model.
fn product_model(p4: &PropensityModel, p_t1: f64) -> Result<PropensityModel> {
    let PropensityParams::LogitLinear { standardizer, coefficients } = p4.params() else {
        unreachable!("logit-linear fit")
    };
    let lt = (p_t1 / (1.0 - p_t1)).ln();
    let mut rows = vec![Vec::new(); 8];
    for g in 0..2u8 {
        for d in 0..2u8 {
            for t in 0..2u8 {
                let mut row = coefficients[panel_cell(g, d)].clone();
                row[0] += f64::from(t) * lt;
                rows[rc_cell(g, d, t)] = row;
            }
        }
    }
    PropensityModel::logit_linear(Design::Rc, standardizer.clone(), rows)
}

fn criterion_7(g: &Grids) -> Result<Outcome> {
    let cell = g.rc.cell(Specification::new(true, true)).unwrap();
    let dr = cell.summary("dr-rc").unwrap().mean_estimate;
    let ncc = cell.summary("dr-rc-ncc").unwrap().mean_estimate;
    let gap = (dr - ncc).abs();

    let cfg = NuisanceConfig::default();
    let mut worst = 0.0_f64;
    for seed in 0..5 {
        let (panel, _) = generate_panel(&DgpConfig { n: 5000, ..DgpConfig::default() }, seed)?;
        let data = panel.stack_periods()?;
        let p4 = fit_propensity(data.x(), &data.group_cells(), Design::Panel, &cfg)?;
        let mu = fit_outcome(data.x(), data.y(), &data.cells(), Design::Rc, ResponseKind::Level, &cfg)?;
        let p8 = product_model(&p4, data.time_share())?;
        let a = estimate_dr_rc(&data, &p8, &mu, &cfg)?.estimate;
        let b = estimate_dr_rc_ncc(&data, &p4, &mu, &cfg)?.estimate;
        worst = worst.max((a - b).abs());
    }
    Ok(check(
        gap < 0.03 && worst < 1e-8,
        format!("mean dr-rc {dr:.4} vs dr-rc-ncc {ncc:.4} (gap {gap:.4}); product-form max |diff| {worst:.1e}"),
    ))
}

fn criterion_8() -> Result<Outcome> {
    let dgp = DgpConfig {
        n: 50_000,
        violate_pdt: 0.5,
        ..DgpConfig::reference(Design::Panel)
    };
    let gap = pdt_violation_gap(&dgp, 1_000_000, 88)?;
    let mut s = Scenario::new(dgp, 50, 808);
    s.estimators = vec!["or".into()];
    let bias = run_scenario(&s)?.estimators[0].bias;
    Ok(check(
        (bias - gap).abs() < 0.05,
        format!("or-panel bias {bias:+.4}, analytic gap {gap:+.4}"),
    ))
}

fn criterion_9() -> Result<Outcome> {
    // Finite-difference check of the multinomial log-likelihood gradient.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0_f64;
    for arity in [4usize, 8] {
        let n = 300;
        let p = 4;
        let z: Vec<f64> = (0..n * p)
            .map(|i| if i % p == 0 { 1.0 } else { rng.random_range(-2.0..2.0) })
            .collect();
        let design = Matrix::new(n, p, z).unwrap();
        let cells: Vec<usize> = (0..n).map(|i| if i < arity { i } else { rng.random_range(0..arity) }).collect();
        let obj = MultinomialObjective::new(&design, &cells, arity, 0.01);
        let theta: Vec<f64> = (0..obj.n_params()).map(|_| rng.random_range(-0.5..0.5)).collect();
        let grad = obj.gradient(&theta);
        for j in 0..theta.len() {
            let h = 1e-5;
            let (mut up, mut dn) = (theta.clone(), theta.clone());
            up[j] += h;
            dn[j] -= h;
            let fd = (obj.value(&up) - obj.value(&dn)) / (2.0 * h);
            worst = worst.max((fd - grad[j]).abs() / grad[j].abs().max(1e-3));
        }
    }

    // Determinism of datasets, estimates and reports.
    let cfg = DgpConfig { n: 2000, ..DgpConfig::reference(Design::Rc) };
    let same_data = generate_rc(&cfg, 5)?.0 == generate_rc(&cfg, 5)?.0;
    let data = generate_rc(&cfg, 5)?.0;
    let nc = NuisanceConfig { folds: 3, ..NuisanceConfig::default() };
    let e1 = RcEstimator::Dr.fit_estimate(&data, &nc, Specification::default())?;
    let e2 = RcEstimator::Dr.fit_estimate(&data, &nc, Specification::default())?;
    let same_est = e1.estimate.to_bits() == e2.estimate.to_bits() && e1.to_json() == e2.to_json();
    let s = Scenario::new(cfg, 8, 99);
    let r1 = robustness_grid(&s)?.to_json();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().expect("pool");
    let r2 = pool.install(|| robustness_grid(&s))?.to_json();
    let same_report = r1 == r2;
    Ok(check(
        worst < 1e-4 && same_data && same_est && same_report,
        format!("gradient rel err {worst:.1e}; identical data {same_data}, estimates {same_est}, reports {same_report}"),
    ))
}

fn timed(label: usize, limit: Option<f64>, f: impl FnOnce() -> Result<Outcome>) -> bool {
    let start = Instant::now();
    let outcome = f().unwrap_or_else(|e| check(false, format!("error: {e}")));
    let secs = start.elapsed().as_secs_f64();
    let in_time = limit.is_none_or(|l| secs < l);
    let pass = outcome.pass && in_time;
    let budget = limit.map(|l| format!(" (limit {l:.0}s)")).unwrap_or_default();
    println!(
        "criterion {label}: {} - {} [{secs:.1}s{budget}]",
        if pass { "PASS" } else { "FAIL" },
        outcome.detail
    );
    pass
}

fn main() -> ExitCode {
    let mut all = true;
    all &= timed(1, Some(5.0), || Ok(criterion_1()));
    all &= timed(2, Some(30.0), || Ok(criterion_2()));
    all &= timed(3, None, || Ok(criterion_3()));
    let grids = grids();
    match &grids {
        Ok(g) => {
            all &= timed(4, None, || Ok(criterion_4(g)));
            all &= timed(5, None, || Ok(criterion_5(g)));
            all &= timed(6, None, || criterion_6(g));
            all &= timed(7, None, || criterion_7(g));
        }
        Err(e) => {
            for c in 4..=7 {
                println!("criterion {c}: FAIL - grid error: {e}");
            }
            all = false;
        }
    }
    all &= timed(8, None, criterion_8);
    all &= timed(9, None, criterion_9);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
