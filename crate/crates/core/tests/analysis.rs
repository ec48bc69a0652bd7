use powerlaw_ghz::analysis::*;
use powerlaw_ghz::scheduler::{gamma, stretched_min_r1, PlanMode};

fn continuous(r0: u64) -> SweepOptions {
    SweepOptions {
        mode: SweepMode::ContinuousAnalytic,
        r0,
        ..Default::default()
    }
}

#[test]
fn power_law_tail_exponents() {
    let doubling: Vec<f64> = (2..=10).map(|k| 2f64.powi(k)).collect();
    let rows = scaling_sweep(&[2.5], 1, &doubling, &SweepOptions::default()).unwrap();
    assert!(rows.iter().all(|r| r.mode == PlanMode::ContinuousAnalytic));
    let slope = power_law_exponent(&rows, 128.0).unwrap();
    assert!((slope - 0.5).abs() <= 0.05, "{slope}");

    let grid = log_grid(0.6, 3.1, 10);
    for alpha in [2.2, 2.5, 2.8] {
        let rows = scaling_sweep(&[alpha], 1, &grid, &continuous(2)).unwrap();
        let slope = power_law_exponent(&rows, 128.0).unwrap();
        assert!((slope - (alpha - 2.0)).abs() <= 0.05, "alpha={alpha}: {slope}");
    }
}

#[test]
fn stretched_exponential_fit() {
    let r0 = stretched_min_r1(1);
    let rows = scaling_sweep(&[2.0], 1, &log_grid(4.0, 60.0, 10), &continuous(r0)).unwrap();
    let slope = stretched_exponent(&rows, 0.0).unwrap();
    assert!((slope / gamma(1) - 1.0).abs() <= 0.10, "{slope}");
}

#[test]
fn polylog_beats_every_power() {
    let grid = log_grid(100.0, 300.0, 1);
    let rows = scaling_sweep(&[1.5], 1, &grid, &continuous(2)).unwrap();
    for eps in [0.1, 0.05] {
        let ratios: Vec<f64> = rows.iter().map(|r| r.t_protocol / r.r.powf(eps)).collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]), "eps={eps}");
        assert!(*ratios.last().unwrap() < ratios[0] * 1e-3, "eps={eps}");
    }
}

#[test]
fn polylog_level_exponents_fall_toward_zero() {
    let exps = level_exponents(1.5, 1, 1e300, &SweepOptions::default()).unwrap();
    assert!(exps.len() > 10);
    assert!(exps.windows(2).all(|w| w[1].exponent < w[0].exponent));
    assert!(exps.last().unwrap().exponent < 0.02);
    assert!(exps.iter().all(|w| w.exponent > 0.0));
}

#[test]
fn rows_respect_their_envelope() {
    let alphas = [1.3, 1.7, 2.4, 3.0];
    let rows = scaling_sweep(&alphas, 1, &log_grid(0.5, 12.0, 4), &SweepOptions::default()).unwrap();
    for r in &rows {
        assert!(r.t_protocol >= 0.0 && r.t_bound >= 0.0);
        if r.within_bound {
            assert!(r.t_protocol <= r.t_bound * (1.0 + 1e-9), "{r:?}");
        }
    }
    // alpha-major ordering
    assert_eq!(rows[0].alpha, 1.3);
    assert_eq!(rows.last().unwrap().alpha, 3.0);
}

#[test]
fn integer_rows_where_reachable() {
    let rows = scaling_sweep(&[2.5], 1, &[2.0, 20.0, 200.0, 50.0], &SweepOptions::default()).unwrap();
    let modes: Vec<PlanMode> = rows.iter().map(|r| r.mode).collect();
    assert_eq!(
        modes,
        vec![PlanMode::IntegerExact, PlanMode::IntegerExact, PlanMode::IntegerExact, PlanMode::ContinuousAnalytic]
    );
}

#[test]
fn speedup_classes() {
    let opts = SweepOptions::default();
    let power = speedup_report(2.5, 1, 1e6, &opts).unwrap();
    assert_eq!(power.classification, SpeedupClass::Polynomial);
    assert_eq!(power.previous_exponent, 1.0);
    let last = power.protocol_exponents.last().unwrap().exponent;
    assert!((power.previous_exponent - last - 0.5).abs() < 1e-6);

    let poly = speedup_report(1.5, 1, 1e6, &opts).unwrap();
    assert_eq!(poly.classification, SpeedupClass::Superpolynomial);
    assert_eq!(poly.previous_exponent, 0.5);

    assert_eq!(speedup_report(1.5, 1, 1.0, &opts).unwrap().ratio, 1.0);
}

#[test]
fn speedup_crossover_exists_on_the_alpha_grid() {
    let opts = SweepOptions::default();
    for k in 11..=29 {
        let alpha = k as f64 / 10.0;
        let rep = speedup_report(alpha, 1, 1e3, &opts).unwrap();
        let cross = rep.crossover.unwrap_or_else(|| panic!("no crossover for alpha={alpha}"));
        for &(r, ratio) in &rep.samples {
            if r >= cross {
                assert!(ratio >= 1.0, "alpha={alpha} r={r:e} ratio={ratio}");
            }
        }
        assert_ne!(rep.classification, SpeedupClass::None, "alpha={alpha}");
    }
}

#[test]
fn gate_table() {
    let rows = gate_bound_table(2.5, 1, &[1, 100, 10_000]).unwrap();
    assert_eq!(rows[0].t_star, 1.0);
    assert_eq!((rows[0].lower, rows[0].upper), (1.0, 1.0));
    let r = &rows[2];
    assert!((r.t_star - 100.0).abs() < 1e-9);
    assert_eq!(r.lower, 1e4);
    assert!((r.upper / 1e10 - 1.0).abs() < 1e-12);
    assert!((r.gap / 1e6 - 1.0).abs() < 1e-12);
    // quadratic case
    let q = gate_bound_table(1.5, 1, &[3]).unwrap();
    assert_eq!((q[0].lower, q[0].upper), (3.0, 9.0));
}

#[test]
fn csv_and_json_output() {
    let rows = scaling_sweep(&[2.5], 1, &[2.0, 20.0], &SweepOptions::default()).unwrap();
    let csv = to_csv(&rows).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "alpha,d,r,regime,mode,t_protocol,t_bound,t_prev_best,t_lightcone,within_bound"
    );
    assert_eq!(lines.count(), 2);
    let json: serde_json::Value = serde_json::from_str(&to_json(&rows).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);
    assert_eq!(json[0]["regime"], "power-law");
}
