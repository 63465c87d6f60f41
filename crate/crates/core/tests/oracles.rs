use proptest::prelude::*;
use tripledd::data::rc_cell;
use tripledd::*;

fn sat() -> NuisanceConfig {
    NuisanceConfig::saturated()
}

/// Panel data on a discrete covariate, every cell present in every stratum.
fn discrete_panel(strata: usize, extra: &[(usize, usize, f64, f64)]) -> PanelDataset {
    let mut rows: Vec<(usize, usize, f64, f64)> = Vec::new();
    for s in 0..strata {
        for c in 0..4 {
            rows.push((s, c, 0.0, (s * 4 + c) as f64 * 0.3));
        }
    }
    rows.extend_from_slice(extra);
    let n = rows.len();
    PanelDataset::new(
        Matrix::new(n, 1, rows.iter().map(|r| r.0 as f64).collect()).unwrap(),
        rows.iter().map(|r| (r.1 >> 1) as u8).collect(),
        rows.iter().map(|r| (r.1 & 1) as u8).collect(),
        rows.iter().map(|r| r.2).collect(),
        rows.iter().map(|r| r.3).collect(),
    )
    .unwrap()
}

fn discrete_rc(strata: usize, extra: &[(usize, usize, f64)]) -> RcDataset {
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    for s in 0..strata {
        for c in 0..8 {
            rows.push((s, c, ((s * 8 + c) as f64 * 0.7).sin()));
        }
    }
    rows.extend_from_slice(extra);
    let n = rows.len();
    RcDataset::new(
        Matrix::new(n, 1, rows.iter().map(|r| r.0 as f64).collect()).unwrap(),
        rows.iter().map(|r| (r.1 >> 2) as u8).collect(),
        rows.iter().map(|r| ((r.1 >> 1) & 1) as u8).collect(),
        rows.iter().map(|r| (r.1 & 1) as u8).collect(),
        rows.iter().map(|r| r.2).collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn saturated_panel_estimators_agree(
        strata in 2usize..5,
        extra in prop::collection::vec((0usize..2, 0usize..4, -5.0f64..5.0, -5.0f64..5.0), 0..60),
    ) {
        let data = discrete_panel(strata, &extra);
        let est: Vec<f64> = PanelEstimator::ALL
            .iter()
            .map(|e| e.fit_estimate(&data, &sat(), Specification::default()).unwrap().estimate)
            .collect();
        prop_assert!((est[0] - est[1]).abs() < 1e-8);
        prop_assert!((est[0] - est[2]).abs() < 1e-8);
    }

    #[test]
    fn saturated_rc_estimators_agree(
        strata in 2usize..4,
        extra in prop::collection::vec((0usize..2, 0usize..8, -5.0f64..5.0), 0..80),
    ) {
        let data = discrete_rc(strata, &extra);
        let est: Vec<f64> = [RcEstimator::Or, RcEstimator::Ipw, RcEstimator::Dr]
            .iter()
            .map(|e| e.fit_estimate(&data, &sat(), Specification::default()).unwrap().estimate)
            .collect();
        prop_assert!((est[0] - est[1]).abs() < 1e-8);
        prop_assert!((est[0] - est[2]).abs() < 1e-8);
    }

    #[test]
    fn weight_sign_laws(raw in prop::array::uniform8(0.01f64..1.0), pt in 0.05f64..0.95) {
        let s8: f64 = raw.iter().sum();
        let p8 = CellProbs8::new(raw.map(|v| v / s8)).unwrap();
        let s4: f64 = raw[..4].iter().sum();
        let p4 = CellProbs4::new([raw[0] / s4, raw[1] / s4, raw[2] / s4, raw[3] / s4]).unwrap();
        for g in 0..2u8 {
            for d in 0..2u8 {
                let r = rho0(&p4, g, d);
                prop_assert_eq!(r.signum(), if (g + d) % 2 == 0 { 1.0 } else { -1.0 });
                prop_assert_eq!(w_gd((1, 1), &p4, g, d), 0.0);
                for t in 0..2u8 {
                    let f = phi0(&p8, g, d, t);
                    prop_assert_eq!(f.signum(), if (g + d + t) % 2 == 1 { 1.0 } else { -1.0 });
                    prop_assert!((f.abs() * p8.get(rc_cell(g, d, t)) - 1.0).abs() < 1e-12);
                    prop_assert_eq!(omega_gdt((1, 1, 1), &p8, g, d, t), 0.0);
                    // Under product-form probabilities alpha is omega rescaled by p(T=1).
                    let prod = CellProbs8::product(&p4, pt).unwrap();
                    for c in 0..8usize {
                        let target = ((c >> 2) as u8, ((c >> 1) & 1) as u8, (c & 1) as u8);
                        let a = alpha_gdt(target, &p4, pt, g, d, t) - f64::from(g * d);
                        let o = omega_gdt(target, &prod, g, d, t) - f64::from(g * d * t);
                        prop_assert!((a - o / pt).abs() <= 1e-9 * a.abs().max(1.0));
                    }
                }
            }
        }
    }
}

#[test]
fn hand_contrast_panel() {
    let means = [((1u8, 1u8), 5.0), ((0, 1), 3.0), ((1, 0), 2.0), ((0, 0), 1.0)];
    let (mut g, mut d, mut y1) = (vec![], vec![], vec![]);
    for ((gg, dd), m) in means {
        for off in [-1.0, 1.0] {
            g.push(gg);
            d.push(dd);
            y1.push(m + off);
        }
    }
    let data = PanelDataset::new(Matrix::zeros(8, 1), g, d, vec![0.0; 8], y1).unwrap();
    for e in PanelEstimator::ALL {
        let r = e.fit_estimate(&data, &sat(), Specification::default()).unwrap();
        assert!((r.estimate - 1.0).abs() < 1e-10, "{e}: {}", r.estimate);
    }
}

#[test]
fn ncc_transformed_outcome_on_balanced_periods() {
    // One stratum, balanced T, treated cell only differs: with constant
    // outcome models the estimator reduces to the transformed-outcome
    // contrast +2Y (T=1) / -2Y (T=0) over the treated share.
    let data = discrete_rc(1, &[]);
    assert_eq!(data.time_share(), 0.5);
    let r = RcEstimator::DrNcc.fit_estimate(&data, &sat(), Specification::default()).unwrap();
    let or = RcEstimator::Or.fit_estimate(&data, &sat(), Specification::default()).unwrap();
    assert!((r.estimate - or.estimate).abs() < 1e-10);
}

#[test]
fn zero_outcome_gives_zero_everywhere() {
    let data = discrete_rc(2, &[(0, 7, 0.0), (1, 3, 0.0)]);
    let data = data.with_outcome(vec![0.0; data.n()]).unwrap();
    for e in RcEstimator::ALL {
        let r = e.fit_estimate(&data, &NuisanceConfig::default(), Specification::default()).unwrap();
        assert!(r.estimate.abs() < 1e-12, "{e}");
    }
}

#[test]
fn location_scale_equivariance() {
    let cfg = DgpConfig { n: 3000, ..DgpConfig::default() };
    let (panel, _) = generate_panel(&cfg, 3).unwrap();
    let (a, b) = (7.5, -2.0);
    let moved = panel
        .with_outcomes(
            panel.y0().iter().map(|y| a + b * y).collect(),
            panel.y1().iter().map(|y| a + b * y).collect(),
        )
        .unwrap();
    let nc = NuisanceConfig::default();
    for e in PanelEstimator::ALL {
        let r0 = e.fit_estimate(&panel, &nc, Specification::default()).unwrap();
        let r1 = e.fit_estimate(&moved, &nc, Specification::default()).unwrap();
        assert!((r1.estimate - b * r0.estimate).abs() < 1e-8, "{e}");
        if let (Some(s0), Some(s1)) = (r0.se, r1.se) {
            assert!((s1 - b.abs() * s0).abs() < 1e-8);
        }
    }
    let (rc, _) = generate_rc(&DgpConfig { n: 4000, ..DgpConfig::reference(Design::Rc) }, 4).unwrap();
    // Every estimator is scale-equivariant; the unnormalized IPW weights and
    // the transformed-outcome NCC term are not location-invariant in sample.
    for (shift, ests) in [(0.0, RcEstimator::ALL.to_vec()), (a, vec![RcEstimator::Or, RcEstimator::Dr])] {
        let moved = rc.with_outcome(rc.y().iter().map(|y| shift + b * y).collect()).unwrap();
        for e in ests {
            let r0 = e.fit_estimate(&rc, &nc, Specification::default()).unwrap();
            let r1 = e.fit_estimate(&moved, &nc, Specification::default()).unwrap();
            assert!((r1.estimate - b * r0.estimate).abs() < 1e-8, "{e}: {} vs {}", r1.estimate, b * r0.estimate);
        }
    }
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (panel, _) = generate_panel(&DgpConfig { n: 200, ..DgpConfig::default() }, 1).unwrap();
    let p = dir.path().join("panel.csv");
    write_panel_csv(&panel, &p).unwrap();
    assert_eq!(load_panel_csv(&p, &PanelColumns::standard()).unwrap(), panel);
    let (rc, _) = generate_rc(&DgpConfig { n: 200, ..DgpConfig::reference(Design::Rc) }, 1).unwrap();
    let p = dir.path().join("rc.csv");
    write_rc_csv(&rc, &p).unwrap();
    assert_eq!(load_rc_csv(&p, &RcColumns::standard()).unwrap(), rc);
}

#[test]
fn zero_noise_oracle_grid_is_exact() {
    for design in [Design::Panel, Design::Rc] {
        let dgp = DgpConfig {
            n: 2000,
            noise_sd: 1e-300,
            ..DgpConfig::reference(design)
        };
        let mut s = Scenario::new(dgp, 4, 5);
        s.oracle_nuisances = true;
        s.estimators = vec!["or".into(), "dr".into()];
        let grid = robustness_grid(&s).unwrap();
        for cell in &grid.cells {
            for e in &cell.estimators {
                assert!(e.bias.abs() < 1e-8, "{design} {}: {}", e.estimator, e.bias);
            }
        }
    }
}

#[test]
fn tau_zero_dr_panel_is_unbiased() {
    let dgp = DgpConfig {
        n: 5000,
        tau0: 0.0,
        ..DgpConfig::default()
    };
    let mut s = Scenario::new(dgp, 200, 31);
    s.estimators = vec!["dr".into()];
    let r = run_scenario(&s).unwrap();
    assert!(r.estimators[0].bias.abs() < 0.03);
    assert_eq!(r.true_att, 0.0);
}

#[test]
fn both_misspecified_dr_is_biased() {
    let mut s = Scenario::new(DgpConfig { n: 5000, ..DgpConfig::default() }, 20, 32);
    s.estimators = vec!["dr".into()];
    s.specification = Specification::new(false, false);
    let r = run_scenario(&s).unwrap();
    assert!(r.estimators[0].bias > 0.1, "{}", r.estimators[0].bias);
}

#[test]
fn paired_grid_shares_datasets() {
    // The outcome-only estimator sees identical data and identical outcome
    // fits in the two cells that share an outcome arm.
    let s = Scenario::new(DgpConfig { n: 1000, ..DgpConfig::default() }, 5, 8);
    let grid = robustness_grid(&s).unwrap();
    let a = grid.cell(Specification::new(true, true)).unwrap().summary("or-panel").unwrap();
    let b = grid.cell(Specification::new(false, true)).unwrap().summary("or-panel").unwrap();
    assert_eq!(a.estimates, b.estimates);
}

#[test]
fn bootstrap_close_to_influence_se() {
    let (data, _) = generate_panel(&DgpConfig { n: 2000, ..DgpConfig::default() }, 12).unwrap();
    let nc = NuisanceConfig::default();
    let f = |d: &PanelDataset| PanelEstimator::Dr.fit_estimate(d, &nc, Specification::default());
    let plain = f(&data).unwrap();
    let boot = bootstrap_se(f, &data, 100, 3).unwrap();
    let ratio = boot.se.unwrap() / plain.se.unwrap();
    assert!((0.7..1.4).contains(&ratio), "{ratio}");
    assert_eq!(boot.estimate, plain.estimate);
}
