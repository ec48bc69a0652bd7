#![allow(dead_code)]

use powerlaw_ghz_cli::run_with;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn call_in(dir: Option<&Path>, args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("plghz").chain(args.iter().copied());
    let code = run_with(argv, dir, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn call(args: &[&str]) -> Outcome {
    call_in(None, args)
}

const FLAGS: &[&str] = &[
    "plan", "simulate", "transfer", "sweep", "bounds", "--alpha", "--d", "--q", "--r", "--r0", "--force-m", "--mode",
    "--coeff", "--format", "--c", "--c-prime", "--step4", "--mem-cap", "--alphas", "--r-values", "--n-values",
    "--k-alpha", "--dump-threshold", "--config", "--help", "-x", "--", "=", "--alpha=2.5", "--r=4", "--force-m=2",
];

const VALUES: &[&str] = &[
    "", "0", "1", "2", "3", "4", "8", "16", "-1", "1.5", "2.0", "2.5", "3.0", "4.0", "4.5", "1e300", "-0", "nan",
    "inf", "1e-300", "18446744073709551615", "99999999999999999999", "2,2", "2,2,2", "0,0", "3,2", "1,2,3", ",,",
    "0.6,0.8", "1,0", "0,1i", "1+1i,0", "random:7", "random:", "random:x", "json", "csv", "xml", "integer-exact",
    "continuous-analytic", "auto", "dft", "hadamard", "1.2,2.5", "2,20,200", "1,10,100", "1e3,1e300", "\u{1F600}",
];

const BASES: &[&[&str]] = &[
    &["plan", "--alpha", "2.5", "--r", "20"],
    &["plan", "--alpha", "1.5", "--r", "1e9", "--mode", "continuous-analytic"],
    &["simulate", "--alpha", "2.5", "--r", "8", "--force-m", "2,2", "--coeff", "0.6,0.8"],
    &["transfer", "--alpha", "3.0", "--r", "4", "--force-m", "2", "--c-prime", "3"],
    &["sweep", "--alphas", "1.5,2.5", "--r-values", "2,20"],
    &["bounds", "--alpha", "2.5", "--n-values", "1,100"],
    &["simulate", "--alpha", "2.5", "--r", "16", "--force-m", "2,2,2", "--mem-cap", "1000"],
];

pub fn fuzz_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(2024)
}

/// A random flag string: half pure noise, half mutations of valid commands.
pub fn fuzz_case(rng: &mut ChaCha8Rng) -> Vec<&'static str> {
    let any = |rng: &mut ChaCha8Rng| *if rng.random_bool(0.5) { FLAGS } else { VALUES }.choose(rng).unwrap();
    let mut args: Vec<&str> = if rng.random_bool(0.3) {
        let len = rng.random_range(0..9);
        (0..len).map(|_| any(rng)).collect()
    } else {
        let mut a = BASES.choose(rng).unwrap().to_vec();
        for _ in 0..rng.random_range(1..4) {
            let i = rng.random_range(1..a.len());
            match rng.random_range(0..6) {
                // mostly swap a flag's value for a hostile one
                0..=3 => {
                    let v = if a[i - 1].starts_with("--") { i } else { (i + 1).min(a.len() - 1) };
                    a[v] = VALUES.choose(rng).unwrap();
                }
                4 => a.insert(i, any(rng)),
                _ => {
                    a.remove(i);
                    if a.len() < 2 {
                        break;
                    }
                }
            }
        }
        a
    };
    if rng.random_bool(0.1) && !args.is_empty() {
        args[0] = ["plan", "simulate", "transfer", "sweep", "bounds"].choose(rng).copied().unwrap();
    }
    args
}
