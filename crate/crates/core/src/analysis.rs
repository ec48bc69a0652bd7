//! Scaling tables, exponent fits and comparisons against earlier protocols
//! and known bounds. All comparison curves use unit prefactors and are
//! leading-order only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{encode_light_cone, gate_count_at_t_star, previous_best_encode, t_star};
use crate::error::{Error, Result};
use crate::scheduler::{continuous_level_sides, plan, plan_continuous, regime_of, PlanMode, Regime, RegimeParams, ScheduleOptions};

/// Which planner a sweep uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Integer-exact where the size is reachable, continuous otherwise.
    Auto,
    IntegerExact,
    ContinuousAnalytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub mode: SweepMode,
    pub r0: u64,
    pub schedule: ScheduleOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            mode: SweepMode::Auto,
            r0: 2,
            schedule: ScheduleOptions::default(),
        }
    }
}

/// Protocol time at one `(alpha, r)` grid point next to the reference curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub alpha: f64,
    pub d: u32,
    pub r: f64,
    pub regime: Regime,
    pub mode: PlanMode,
    pub t_protocol: f64,
    pub t_bound: f64,
    pub t_prev_best: Option<f64>,
    pub t_lightcone: Option<f64>,
    /// Every node of the plan satisfied its envelope.
    pub within_bound: bool,
}

fn row(alpha: f64, d: u32, r: f64, opts: &SweepOptions) -> Result<ScalingRow> {
    let integer_plan = || -> Result<_> {
        if r.fract() != 0.0 || r > u64::MAX as f64 {
            return Err(Error::InvalidArgument(format!("integer-exact mode needs an integer side, got {r}")));
        }
        plan(alpha, d, r as u64, opts.r0, &opts.schedule)
    };
    let p = match opts.mode {
        SweepMode::IntegerExact => integer_plan()?,
        SweepMode::ContinuousAnalytic => plan_continuous(alpha, d, r, opts.r0, &opts.schedule)?,
        SweepMode::Auto => match integer_plan() {
            Ok(p) => p,
            Err(Error::Unreachable { .. }) | Err(Error::Precondition(_)) | Err(Error::InvalidArgument(_)) => {
                plan_continuous(alpha, d, r, opts.r0, &opts.schedule)?
            }
            Err(e) => return Err(e),
        },
    };
    Ok(ScalingRow {
        alpha,
        d,
        r,
        regime: p.params.regime,
        mode: p.mode,
        t_protocol: p.t_total(),
        t_bound: p.params.envelope(r),
        t_prev_best: previous_best_encode(alpha, d, r).map(|(_, v)| v),
        t_lightcone: encode_light_cone(alpha, d, r).map(|(_, v)| v),
        within_bound: p.certified(),
    })
}

/// Protocol times over an `alphas x r_values` grid, alpha-major.
pub fn scaling_sweep(alphas: &[f64], d: u32, r_values: &[f64], opts: &SweepOptions) -> Result<Vec<ScalingRow>> {
    for &alpha in alphas {
        regime_of(alpha, d)?;
    }
    if let Some(&r) = r_values.iter().find(|&&r| !(r >= opts.r0 as f64)) {
        return Err(Error::InvalidArgument(format!("r = {r} is below r0 = {}", opts.r0)));
    }
    let grid: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| r_values.iter().map(move |&r| (a, r)))
        .collect();
    grid.par_iter().map(|&(a, r)| row(a, d, r, opts)).collect()
}

/// Least-squares line through `(x, y)`: `(slope, intercept)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "a line fit needs at least two paired points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("a line fit needs distinct x values".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

fn tail(rows: &[ScalingRow], r_min: f64) -> Vec<&ScalingRow> {
    rows.iter().filter(|r| r.r >= r_min && r.t_protocol > 0.0).collect()
}

/// Slope of `log t` against `log r` over rows with `r >= r_min`.
pub fn power_law_exponent(rows: &[ScalingRow], r_min: f64) -> Result<f64> {
    let t = tail(rows, r_min);
    let xs: Vec<f64> = t.iter().map(|r| r.r.ln()).collect();
    let ys: Vec<f64> = t.iter().map(|r| r.t_protocol.ln()).collect();
    Ok(fit_line(&xs, &ys)?.0)
}

/// Slope of `log t` against `sqrt(log r)` over rows with `r >= r_min`.
pub fn stretched_exponent(rows: &[ScalingRow], r_min: f64) -> Result<f64> {
    let t = tail(rows, r_min);
    let xs: Vec<f64> = t.iter().map(|r| r.r.ln().sqrt()).collect();
    let ys: Vec<f64> = t.iter().map(|r| r.t_protocol.ln()).collect();
    Ok(fit_line(&xs, &ys)?.0)
}

/// Log-spaced sizes `10^lo .. 10^hi` with `per_decade` points per decade.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let steps = ((hi - lo) * per_decade as f64).round().max(0.0) as usize;
    (0..=steps)
        .map(|k| 10f64.powf(lo + k as f64 / per_decade as f64))
        .collect()
}

/// Fitted power-law exponent over one window of sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowExponent {
    pub r_lo: f64,
    pub r_hi: f64,
    pub exponent: f64,
}

/// Power-law exponents of the continuous protocol time over consecutive
/// windows of `width` decades covering `10^lo .. 10^hi`.
pub fn window_exponents(
    alpha: f64,
    d: u32,
    lo: f64,
    hi: f64,
    width: f64,
    opts: &SweepOptions,
) -> Result<Vec<WindowExponent>> {
    if !(width > 0.0) || !(hi > lo) {
        return Err(Error::InvalidArgument("windows need width > 0 and hi > lo".into()));
    }
    let continuous = SweepOptions {
        mode: SweepMode::ContinuousAnalytic,
        ..opts.clone()
    };
    let count = ((hi - lo) / width).floor() as usize;
    (0..count)
        .into_par_iter()
        .map(|k| {
            let a = lo + k as f64 * width;
            let b = a + width;
            let rows = scaling_sweep(&[alpha], d, &log_grid(a, b, 20), &continuous)?;
            Ok(WindowExponent {
                r_lo: 10f64.powf(a),
                r_hi: 10f64.powf(b),
                exponent: power_law_exponent(&rows, 0.0)?,
            })
        })
        .collect()
}

/// Power-law exponents of the continuous protocol time with one window per
/// recursion level: window `k` runs from the `k`-th merged side to the next,
/// covering sizes up to `r_max`.
///
/// Fixed-width windows in `log r` alias with the recursion staircase once a
/// level spans more than the window; level windows average over whole levels.
pub fn level_exponents(alpha: f64, d: u32, r_max: f64, opts: &SweepOptions) -> Result<Vec<WindowExponent>> {
    let continuous = SweepOptions {
        mode: SweepMode::ContinuousAnalytic,
        ..opts.clone()
    };
    let sides = continuous_level_sides(alpha, d, opts.r0, &opts.schedule, r_max)?;
    let sides: Vec<f64> = sides.into_iter().filter(|&s| s <= r_max).collect();
    sides
        .par_windows(2)
        .map(|w| {
            let (a, b) = (w[0].log10(), w[1].log10());
            let steps = 20;
            let grid: Vec<f64> = (0..=steps)
                .map(|k| 10f64.powf(a + (b - a) * k as f64 / steps as f64).clamp(w[0], w[1]))
                .collect();
            let rows = scaling_sweep(&[alpha], d, &grid, &continuous)?;
            Ok(WindowExponent {
                r_lo: w[0],
                r_hi: w[1],
                exponent: power_law_exponent(&rows, 0.0)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeedupClass {
    Polynomial,
    Superpolynomial,
    /// The evidence shows no growing advantage.
    None,
}

/// Comparison with the best earlier protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub alpha: f64,
    pub d: u32,
    pub r: f64,
    /// `t_prev_best / t_protocol` at `r`.
    pub ratio: f64,
    pub previous_exponent: f64,
    /// Fitted protocol exponent per recursion level, left to right.
    pub protocol_exponents: Vec<WindowExponent>,
    pub classification: SpeedupClass,
    /// Smallest sampled size from which the ratio stays at or above one.
    pub crossover: Option<f64>,
    /// Sizes and ratios the crossover was read from.
    pub samples: Vec<(f64, f64)>,
}

/// Upper end (log10) of the size range used for speedup evidence.
pub const SPEEDUP_MAX_LOG10: f64 = 300.0;

/// Ratio of the best earlier protocol to this protocol at `r`, with a
/// classification of how the advantage grows.
///
/// Polynomial: the per-level protocol exponent is flat and below the earlier
/// exponent. Superpolynomial: the per-level exponent keeps falling and the
/// ratio keeps growing over the sampled range. This is numerical evidence,
/// not a proof.
pub fn speedup_report(alpha: f64, d: u32, r: f64, opts: &SweepOptions) -> Result<SpeedupReport> {
    let df = d as f64;
    if !(alpha > df && alpha < 2.0 * df + 1.0) {
        return Err(Error::UnsupportedRegime {
            alpha,
            d,
            reason: "earlier protocols are tabulated for d < alpha < 2d + 1".into(),
        });
    }
    if !(r >= 1.0) {
        return Err(Error::InvalidArgument(format!("r must be >= 1, got {r}")));
    }
    let continuous = SweepOptions {
        mode: SweepMode::ContinuousAnalytic,
        ..opts.clone()
    };
    let r0 = opts.r0 as f64;
    let ratio_at = |x: f64| -> Result<f64> {
        let prev = previous_best_encode(alpha, d, x).map(|(_, v)| v).unwrap_or(f64::NAN);
        let t = plan_continuous(alpha, d, x, opts.r0, &continuous.schedule)?.t_total();
        Ok(prev / t)
    };
    let ratio = if r == 1.0 || r < r0 { 1.0 } else { ratio_at(r)? };
    let previous_exponent = if alpha < df + 1.0 { alpha - df } else { 1.0 };

    let lo = r0.log10().ceil().max(1.0);
    let grid = log_grid(lo, SPEEDUP_MAX_LOG10, 4);
    let samples: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&x| Ok((x, ratio_at(x)?)))
        .collect::<Result<_>>()?;
    let crossover = match samples.iter().rposition(|&(_, q)| !(q >= 1.0)) {
        None => samples.first().map(|s| s.0),
        Some(i) if i + 1 < samples.len() => Some(samples[i + 1].0),
        Some(_) => None,
    };

    let protocol_exponents = level_exponents(alpha, d, 10f64.powf(SPEEDUP_MAX_LOG10), &continuous)?;
    let classification = classify(&protocol_exponents, &samples, previous_exponent);
    Ok(SpeedupReport {
        alpha,
        d,
        r,
        ratio,
        previous_exponent,
        protocol_exponents,
        classification,
        crossover,
        samples,
    })
}

fn classify(exps: &[WindowExponent], samples: &[(f64, f64)], previous: f64) -> SpeedupClass {
    let (Some(first), Some(last)) = (exps.first(), exps.last()) else {
        return SpeedupClass::None;
    };
    let half = &samples[samples.len() / 2..];
    let ratio_growing = half.windows(2).all(|w| w[1].1 >= w[0].1) && half.last().is_some_and(|s| s.1 > 1.0);
    let flat = (first.exponent - last.exponent).abs() <= 1e-3;
    let falling = exps.windows(2).all(|w| w[1].exponent <= w[0].exponent + 1e-9) && last.exponent < first.exponent;
    if flat && last.exponent < previous - 1e-3 {
        SpeedupClass::Polynomial
    } else if falling && ratio_growing {
        SpeedupClass::Superpolynomial
    } else {
        SpeedupClass::None
    }
}

/// Gate counts needed to simulate `n` sites up to the time `t*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateBoundRow {
    pub alpha: f64,
    pub d: u32,
    pub n: u64,
    pub t_star: f64,
    /// `Omega(n)` gates are needed beyond `t*`.
    pub lower: f64,
    /// Leading-order Trotter gate count at `t*`.
    pub upper: f64,
    /// `upper / lower`.
    pub gap: f64,
}

pub fn gate_bound_table(alpha: f64, d: u32, n_values: &[u64]) -> Result<Vec<GateBoundRow>> {
    regime_of(alpha, d)?;
    n_values
        .iter()
        .map(|&n| {
            let lower = n as f64;
            let upper = gate_count_at_t_star(alpha, d, n)?;
            Ok(GateBoundRow {
                alpha,
                d,
                n,
                t_star: t_star(alpha, d, n)?,
                lower,
                upper,
                gap: upper / lower,
            })
        })
        .collect()
}

/// Serialize rows as CSV with a header row.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn to_json<T: Serialize>(rows: &[T]) -> Result<String> {
    Ok(serde_json::to_string_pretty(rows)?)
}

/// Envelope parameters a sweep uses for `alpha`.
pub fn sweep_params(alpha: f64, d: u32, opts: &SweepOptions) -> Result<RegimeParams> {
    RegimeParams::new(alpha, d, opts.r0, &opts.schedule)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let (s, b) = fit_line(&xs, &ys).unwrap();
        assert!((s - 2.5).abs() < 1e-12 && (b + 1.0).abs() < 1e-12);
        assert!(fit_line(&[1.0], &[1.0]).is_err());
        assert!(fit_line(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn base_rows_take_base_time() {
        let opts = SweepOptions::default();
        let rows = scaling_sweep(&[1.5, 2.5, 3.0], 1, &[2.0], &opts).unwrap();
        for r in rows {
            let p = sweep_params(r.alpha, 1, &opts).unwrap();
            assert_eq!(r.t_protocol, p.t_base);
            assert_eq!(r.mode, PlanMode::IntegerExact);
        }
    }

    #[test]
    fn gate_table_rows() {
        let rows = gate_bound_table(2.5, 1, &[10_000]).unwrap();
        assert!((rows[0].t_star - 100.0).abs() < 1e-9);
        assert_eq!(rows[0].lower, 1e4);
        assert!((rows[0].upper / 1e10 - 1.0).abs() < 1e-12);
        let one = gate_bound_table(1.5, 1, &[1]).unwrap();
        assert_eq!((one[0].t_star, one[0].lower, one[0].upper), (0.0, 1.0, 1.0));
    }

    #[test]
    fn unsupported_alpha() {
        assert!(scaling_sweep(&[0.5], 1, &[4.0], &SweepOptions::default()).is_err());
        assert!(speedup_report(3.0, 1, 10.0, &SweepOptions::default()).is_err());
    }
}
