//! Leading-order comparison curves: known light cones, earlier protocols and
//! the recursive protocol, plus gate-count bounds for simulating power-law
//! systems. All prefactors are one and subpolynomial exponent corrections are
//! dropped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheduler::{gamma, kappa, regime_of, Regime};

/// A single evaluated curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCurve {
    pub task: String,
    pub column: String,
    pub expression: String,
    /// `None` when the table has no entry for this task/column at `(alpha, d)`.
    pub value: Option<f64>,
}

pub const TASK_ENCODE: &str = "encode-ghz";
pub const TASK_KNOWN_GHZ: &str = "prepare-known-ghz";
pub const TASK_TRANSFER: &str = "state-transfer";
pub const TASK_UNIVERSAL: &str = "universal-state-transfer";

pub const COL_LIGHT_CONE: &str = "light-cone";
pub const COL_PREVIOUS: &str = "previous-best";
pub const COL_PROTOCOL: &str = "protocol";

fn curve(task: &str, column: &str, expression: &str, value: Option<f64>) -> NamedCurve {
    NamedCurve {
        task: task.into(),
        column: column.into(),
        expression: expression.into(),
        value,
    }
}

fn open_range(alpha: f64, lo: f64, hi: f64) -> bool {
    alpha > lo && alpha < hi
}

/// Best earlier protocol for encoding and preparing GHZ-like states.
pub fn previous_best_encode(alpha: f64, d: u32, r: f64) -> Option<(&'static str, f64)> {
    let df = d as f64;
    if open_range(alpha, df, df + 1.0) {
        Some(("r^(alpha-d)", r.powf(alpha - df)))
    } else if alpha >= df + 1.0 && alpha < 2.0 * df + 1.0 {
        Some(("r", r))
    } else {
        None
    }
}

/// Known Lieb-Robinson light cone for encoding into a GHZ-like state.
pub fn encode_light_cone(alpha: f64, d: u32, r: f64) -> Option<(&'static str, f64)> {
    let df = d as f64;
    if alpha > df && alpha <= 2.0 * df {
        Some(("log r", r.ln()))
    } else if open_range(alpha, 2.0 * df, 2.0 * df + 1.0) {
        if d == 1 {
            Some(("r^(alpha-2)", r.powf(alpha - 2.0)))
        } else {
            Some(("r^((alpha-2d)/(alpha-d))", r.powf((alpha - 2.0 * df) / (alpha - df))))
        }
    } else {
        None
    }
}

/// Leading-order protocol curve: `log^kappa r`, `e^(gamma sqrt(log r))` or
/// `r^(alpha-2d)`.
pub fn protocol_curve(alpha: f64, d: u32, r: f64) -> Result<(&'static str, f64)> {
    Ok(match regime_of(alpha, d)? {
        Regime::Polylog => ("log^kappa r", r.ln().powf(kappa(alpha, d, 1.0))),
        Regime::StretchedExponential => ("e^(gamma sqrt(log r))", (gamma(d) * r.ln().sqrt()).exp()),
        Regime::PowerLaw => ("r^(alpha-2d)", r.powf(alpha - 2.0 * d as f64)),
    })
}

/// Evaluate every comparison curve applicable at `(alpha, d, r)`.
pub fn table1_curves(alpha: f64, d: u32, r: f64) -> Result<Vec<NamedCurve>> {
    let df = d as f64;
    if !(alpha > df && alpha < 2.0 * df + 1.0) || d == 0 {
        return Err(Error::UnsupportedRegime {
            alpha,
            d,
            reason: "comparison table covers d < alpha < 2d + 1".into(),
        });
    }
    if !(r >= 1.0) {
        return Err(Error::InvalidArgument(format!("r must be >= 1, got {r}")));
    }
    let mut out = Vec::new();
    let split = |o: Option<(&'static str, f64)>| match o {
        Some((e, v)) => (e, Some(v)),
        None => ("not listed", None),
    };

    let (e, v) = split(encode_light_cone(alpha, d, r));
    out.push(curve(TASK_ENCODE, COL_LIGHT_CONE, e, v));
    let (e, v) = split(previous_best_encode(alpha, d, r));
    out.push(curve(TASK_ENCODE, COL_PREVIOUS, e, v));
    let (pe, pv) = protocol_curve(alpha, d, r)?;
    out.push(curve(TASK_ENCODE, COL_PROTOCOL, pe, Some(pv)));

    let known = if alpha <= 2.0 * df {
        ("log r", Some(r.ln()))
    } else {
        ("r^((alpha-2d)/(alpha-d+1))", Some(r.powf((alpha - 2.0 * df) / (alpha - df + 1.0))))
    };
    out.push(curve(TASK_KNOWN_GHZ, COL_LIGHT_CONE, known.0, known.1));
    let (e, v) = split(previous_best_encode(alpha, d, r));
    out.push(curve(TASK_KNOWN_GHZ, COL_PREVIOUS, e, v));
    out.push(curve(TASK_KNOWN_GHZ, COL_PROTOCOL, pe, Some(pv)));

    let (e, v) = split(encode_light_cone(alpha, d, r));
    out.push(curve(TASK_TRANSFER, COL_LIGHT_CONE, e, v));
    let transfer_prev = if open_range(alpha, df, df + 1.0) {
        ("r^(alpha(alpha-d)/(alpha+d))", Some(r.powf(alpha * (alpha - df) / (alpha + df))))
    } else {
        ("r^(alpha/(2d+1))", Some(r.powf(alpha / (2.0 * df + 1.0))))
    };
    out.push(curve(TASK_TRANSFER, COL_PREVIOUS, transfer_prev.0, transfer_prev.1));
    out.push(curve(TASK_TRANSFER, COL_PROTOCOL, pe, Some(pv)));

    if alpha <= 2.0 * df {
        out.push(curve(
            TASK_UNIVERSAL,
            COL_LIGHT_CONE,
            "r^((2alpha-2d)/(2alpha-d+1))",
            Some(r.powf((2.0 * alpha - 2.0 * df) / (2.0 * alpha - df + 1.0))),
        ));
    } else {
        out.push(curve(
            TASK_UNIVERSAL,
            COL_LIGHT_CONE,
            "r^((alpha-2d)/(alpha-d))",
            Some(r.powf((alpha - 2.0 * df) / (alpha - df))),
        ));
        if d == 1 && alpha > 2.0 && alpha <= 2.5 {
            out.push(curve(TASK_UNIVERSAL, COL_LIGHT_CONE, "r^(alpha-3/2)", Some(r.powf(alpha - 1.5))));
        } else if d == 1 && alpha > 2.5 {
            out.push(curve(TASK_UNIVERSAL, COL_LIGHT_CONE, "r", Some(r)));
        }
    }
    out.push(curve(TASK_UNIVERSAL, COL_PREVIOUS, "r", Some(r)));
    out.push(curve(TASK_UNIVERSAL, COL_PROTOCOL, "not applicable", None));
    Ok(out)
}

/// Evolution time beyond which simulating `n` sites needs `Omega(n)` gates.
pub fn t_star(alpha: f64, d: u32, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let nf = n as f64;
    let df = d as f64;
    Ok(match regime_of(alpha, d)? {
        Regime::Polylog => nf.ln().powf(kappa(alpha, d, 1.0)),
        Regime::StretchedExponential => (gamma(d) * (nf.ln() / df).sqrt()).exp(),
        Regime::PowerLaw => nf.powf(alpha / df - 2.0),
    })
}

/// Leading-order Trotter gate count for simulating `n` sites for time `t`:
/// `n^2 t` for `d < alpha <= 2d`, `(n t)^(1 + d/(alpha-d))` for `alpha > 2d`.
pub fn gate_count_upper(alpha: f64, d: u32, n: u64, t: f64) -> Result<f64> {
    let df = d as f64;
    if d == 0 || !alpha.is_finite() || alpha <= df {
        return Err(Error::UnsupportedRegime {
            alpha,
            d,
            reason: "gate-count bound needs alpha > d".into(),
        });
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
    }
    let nf = n as f64;
    Ok(if alpha <= 2.0 * df {
        nf * nf * t
    } else {
        (nf * t).powf(1.0 + df / (alpha - df))
    })
}

/// [`gate_count_upper`] specialised to `t = t_star`: `n^2` or `n^(alpha/d)`.
pub fn gate_count_at_t_star(alpha: f64, d: u32, n: u64) -> Result<f64> {
    let nf = n as f64;
    Ok(match regime_of(alpha, d)? {
        Regime::Polylog | Regime::StretchedExponential => nf * nf,
        Regime::PowerLaw => nf.powf(alpha / d as f64),
    })
}
