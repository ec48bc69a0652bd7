mod support;

use powerlaw_ghz_cli::MAX_Q;
use support::{call, call_in, fuzz_case, Outcome};

fn json(text: &str) -> serde_json::Value {
    serde_json::from_str(text).unwrap()
}

fn error_kind(o: &Outcome) -> String {
    json(o.stderr.trim())["error"].as_str().unwrap().to_string()
}

#[test]
fn simulate_example() {
    let o = call(&["simulate", "--alpha", "2.5", "--d", "1", "--r", "8", "--r0", "2", "--force-m", "2,2", "--coeff", "0.6,0.8"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let v = json(&o.stdout);
    assert!(v["final_fidelity"].as_f64().unwrap() >= 1.0 - 1e-9);
    assert!(v["coefficient_fidelity"].as_f64().unwrap() >= 1.0 - 1e-9);
}

#[test]
fn plan_example() {
    let o = call(&["plan", "--alpha", "2.5", "--d", "1", "--r", "20", "--r0", "2"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let v = json(&o.stdout);
    assert_eq!(v["root"]["m"], 10.0);
    let t2 = v["root"]["t2"].as_f64().unwrap();
    let expected = std::f64::consts::PI * 20f64.powf(2.5) / 4.0;
    assert!((t2 / expected - 1.0).abs() < 1e-12, "{t2} vs {expected}");
}

#[test]
fn plan_csv_lists_levels_root_first() {
    let o = call(&["plan", "--alpha", "2.5", "--r", "8", "--force-m", "2,2", "--format", "csv"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let lines: Vec<&str> = o.stdout.lines().collect();
    assert_eq!(lines[0], "level,r,r1,m,t1,t2,t_total,bound,within_bound,forced");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("2,8.0,4.0,2.0,"));
    assert!(lines[3].starts_with("0,2.0,,,"));
}

#[test]
fn continuous_plan() {
    let o = call(&["plan", "--alpha", "1.5", "--r", "1e12", "--mode", "continuous-analytic"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(json(&o.stdout)["mode"], "continuous-analytic");
}

#[test]
fn exit_codes() {
    let cases: &[(&[&str], i32, &str)] = &[
        (&["simulate", "--alpha", "0.5", "--d", "1", "--r", "8"], 3, "unsupported-regime"),
        (&["plan", "--alpha", "3.5", "--r", "8"], 3, "unsupported-regime"),
        (&["plan", "--alpha", "2.5", "--r", "16"], 4, "unreachable-size"),
        (&["simulate", "--alpha", "2.5", "--r", "64", "--force-m", "2,2,2,2,2"], 5, "memory-cap"),
        (&["simulate", "--alpha", "2.5", "--r", "8", "--force-m", "2,2", "--mem-cap", "100"], 5, "memory-cap"),
        (&["simulate", "--alpha", "2.5", "--r", "8", "--force-m", "2,2", "--coeff", "1,1"], 6, "invalid-input"),
        (&["simulate", "--alpha", "2.5", "--r", "8", "--force-m", "2,2", "--c", "8"], 6, "invalid-input"),
        (&["simulate", "--alpha", "2.5", "--r", "8", "--force-m", "3,2"], 4, "unreachable-size"),
        (&["plan", "--alpha", "2.5"], 2, "usage"),
        (&["plan", "--alpha", "x", "--r", "4"], 2, "usage"),
        (&["frobnicate"], 2, "usage"),
        (&[], 2, "usage"),
        (&["plan", "--alpha", "2.5", "--r", "4", "--config", "/nonexistent/cfg"], 8, "config"),
        (&["plan", "--alpha", "2.5", "--r", "20", "--out", "/proc/forbidden/x.json"], 7, "io"),
    ];
    for (args, code, kind) in cases {
        let o = call(args);
        assert_eq!(o.code, *code, "{args:?}: {}", o.stderr);
        assert_eq!(error_kind(&o), *kind, "{args:?}");
        let v = json(o.stderr.trim());
        assert_eq!(v["code"], *code);
        assert!(!v["message"].as_str().unwrap().is_empty());
        assert!(o.stdout.is_empty());
    }
    let q = (MAX_Q + 1).to_string();
    assert_eq!(call(&["simulate", "--alpha", "2.5", "--r", "4", "--q", &q]).code, 6);
}

#[test]
fn unsupported_regime_message_names_the_condition() {
    let o = call(&["simulate", "--alpha", "0.5", "--d", "1", "--r", "8"]);
    assert!(json(o.stderr.trim())["message"].as_str().unwrap().contains("alpha <= d"));
}

#[test]
fn help_and_version_succeed() {
    let o = call(&["--help"]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.contains("simulate"));
    assert_eq!(call(&["--version"]).code, 0);
    assert_eq!(call(&["sweep", "--help"]).code, 0);
}

#[test]
fn config_file_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# shared settings\nalpha = 2.5\nr = 20\nr0 = 2\nn-values = 4\nformat = csv\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let from_file = call(&["plan", "--config", cfg]);
    assert_eq!(from_file.code, 0, "{}", from_file.stderr);
    assert!(from_file.stdout.starts_with("level,"));
    let explicit = call(&["plan", "--alpha", "2.5", "--r", "20", "--format", "csv"]);
    assert_eq!(from_file.stdout, explicit.stdout);

    // flag overrides the file
    let o = call(&["plan", "--config", cfg, "--format", "json"]);
    assert_eq!(json(&o.stdout)["root"]["m"], 10.0);

    // n-values belongs to bounds; the same file drives it
    let o = call(&["bounds", "--config", cfg]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.starts_with("alpha,d,n,t_star,lower,upper,gap"));

    for bad in ["alpha = two\n", "beta = 1\n", "no equals sign\n", "alpha=2.5\nalpha=3\n"] {
        std::fs::write(dir.path().join("bad.cfg"), bad).unwrap();
        let p = dir.path().join("bad.cfg");
        let o = call(&["plan", "--r", "4", "--config", p.to_str().unwrap()]);
        assert_eq!(o.code, 8, "{bad:?}: {}", o.stderr);
    }
}

#[test]
fn output_directory_for_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let o = call_in(
        Some(dir.path()),
        &["simulate", "--alpha", "2.5", "--r", "4", "--force-m", "2", "--coeff", "0.6,0.8", "--out", "sub/trace.json", "--dump", "amps.csv"],
    );
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.is_empty());
    let trace = std::fs::read_to_string(dir.path().join("sub/trace.json")).unwrap();
    assert!(json(&trace)["final_fidelity"].as_f64().unwrap() > 1.0 - 1e-9);
    let dump = std::fs::read_to_string(dir.path().join("amps.csv")).unwrap();
    let lines: Vec<&str> = dump.lines().collect();
    assert_eq!(lines[0], "basis,re,im");
    // 0.6|0000> + 0.8|1111>
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0000,6"));
    assert!(lines[2].starts_with("1111,8"));
}

#[test]
fn transfer_moves_the_state() {
    let o = call(&["transfer", "--alpha", "2.5", "--r", "8", "--force-m", "2,2", "--coeff", "random:3", "--c", "1", "--c-prime", "6"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let v = json(&o.stdout);
    assert!(v["final_fidelity"].as_f64().unwrap() >= 1.0 - 1e-9);
    let plan = json(&call(&["plan", "--alpha", "2.5", "--r", "8", "--force-m", "2,2"]).stdout);
    assert_eq!(v["total_time"].as_f64().unwrap(), 2.0 * plan["root"]["t_total"].as_f64().unwrap());
}

#[test]
fn sweep_and_bounds() {
    let o = call(&["sweep", "--alphas", "1.5,2.5", "--r-values", "2,20,50", "--format", "csv"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let lines: Vec<&str> = o.stdout.lines().collect();
    assert_eq!(lines[0], "alpha,d,r,regime,mode,t_protocol,t_bound,t_prev_best,t_lightcone,within_bound");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("1.5,1,2.0,polylog,"));

    let o = call(&["bounds", "--alpha", "2.5", "--n-values", "10000"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let v = json(&o.stdout);
    assert!((v[0]["t_star"].as_f64().unwrap() - 100.0).abs() < 1e-9);
    assert_eq!(v[0]["lower"], 1e4);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let args: &[&[&str]] = &[
        &["simulate", "--alpha", "2.5", "--r", "8", "--force-m", "2,2", "--coeff", "random:42"],
        &["simulate", "--alpha", "2.5", "--r", "9", "--r0", "1", "--q", "3", "--force-m", "3,3", "--coeff", "random:42", "--format", "csv"],
        &["sweep", "--alphas", "1.2,1.5,2.0,2.5", "--r-values", "2,8,64,1000,1e6"],
    ];
    for a in args {
        let first = call(a);
        assert_eq!(first.code, 0, "{a:?}: {}", first.stderr);
        assert_eq!(first.stdout, call(a).stdout, "{a:?}");
    }
    let other = call(&["simulate", "--alpha", "2.5", "--r", "8", "--force-m", "2,2", "--coeff", "random:43"]);
    assert_ne!(other.stdout, call(args[0]).stdout);
}

#[test]
fn fuzzed_flags_only_produce_documented_codes() {
    let mut rng = support::fuzz_rng();
    let mut seen = std::collections::BTreeSet::new();
    for case in 0..10_000 {
        let args = fuzz_case(&mut rng);
        let o = call(&args);
        assert!(matches!(o.code, 0 | 2..=8), "case {case} {args:?}: code {}", o.code);
        if o.code != 0 {
            assert_eq!(json(o.stderr.trim())["code"], o.code);
        }
        seen.insert(o.code);
    }
    for code in [0, 2, 3, 4, 5, 6] {
        assert!(seen.contains(&code), "{seen:?}");
    }
}
