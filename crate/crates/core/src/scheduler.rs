//! Analytic recursion scheduler.
//!
//! A plan is a chain of merge levels: starting from base cubes of side `r0`,
//! each level groups `m^d` cubes of side `r1` into one cube of side
//! `r = m * r1`, which costs `t = 3 t1 + t2` where `t1` is the child encode
//! time and `t2` the duration of the inter-cube phase evolution. All children
//! of a node share one schedule, so a node stores a single representative
//! child together with the multiplicity `m^d`.
//!
//! The three regimes of the exponent `alpha` relative to the dimension `d`
//! each come with their own merge-factor rule and time envelope:
//!
//! | regime            | `m`                                 | envelope               |
//! |-------------------|-------------------------------------|------------------------|
//! | `d < alpha < 2d`  | `r1^(lambda-1) < m <= 2 r1^(lambda-1)` | `K log^kappa r`     |
//! | `alpha = 2d`      | `e^(g/2d sqrt(log r1))` up to twice that | `K e^(g sqrt(log r))` |
//! | `2d < alpha <= 2d+1` | constant `m > 3^(1/(alpha-2d))`  | `K r^(alpha-2d)`       |

use std::f64::consts::{E, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::LatticeSpec;

/// Relative slack allowed when comparing a node time against its envelope.
pub const CERTIFICATE_RTOL: f64 = 1e-9;

const REGIME_EPS: f64 = 1e-12;
/// Largest merge factor accepted; beyond this `f64` arithmetic on sizes is inexact.
const MAX_MERGE_FACTOR: f64 = 9.0e15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `d < alpha < 2d`
    Polylog,
    /// `alpha = 2d`
    StretchedExponential,
    /// `2d < alpha <= 2d + 1`
    PowerLaw,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Polylog => "polylog",
            Regime::StretchedExponential => "stretched-exponential",
            Regime::PowerLaw => "power-law",
        })
    }
}

fn unsupported(alpha: f64, d: u32, reason: &str) -> Error {
    Error::UnsupportedRegime {
        alpha,
        d,
        reason: reason.to_string(),
    }
}

/// Classify `alpha` for dimension `d`. Only `alpha in (d, 2d+1]` is supported.
pub fn regime_of(alpha: f64, d: u32) -> Result<Regime> {
    if d == 0 {
        return Err(unsupported(alpha, d, "dimension must be at least 1"));
    }
    if !alpha.is_finite() {
        return Err(unsupported(alpha, d, "alpha must be finite"));
    }
    let d = d as f64;
    if alpha <= d {
        return Err(unsupported(alpha, d as u32, "alpha <= d is not covered"));
    }
    if alpha > 2.0 * d + 1.0 + REGIME_EPS {
        return Err(unsupported(alpha, d as u32, "alpha > 2d + 1 is not covered"));
    }
    if (alpha - 2.0 * d).abs() <= REGIME_EPS {
        Ok(Regime::StretchedExponential)
    } else if alpha < 2.0 * d {
        Ok(Regime::Polylog)
    } else {
        Ok(Regime::PowerLaw)
    }
}

/// `gamma = 3 sqrt(d)`.
pub fn gamma(d: u32) -> f64 {
    3.0 * (d as f64).sqrt()
}

/// `lambda = 2d / alpha`.
pub fn lambda(alpha: f64, d: u32) -> f64 {
    2.0 * d as f64 / alpha
}

/// `kappa = log(3 + slack) / log(lambda)`; slack 1 gives the `log 4` form.
pub fn kappa(alpha: f64, d: u32, slack: f64) -> f64 {
    (3.0 + slack).ln() / lambda(alpha, d).ln()
}

/// Smallest side for which the `alpha = 2d` recursion step is certified,
/// `ceil(e^(8/d))`.
pub fn stretched_min_r1(d: u32) -> u64 {
    (8.0 / d as f64).exp().ceil() as u64
}

/// Merge factor prescribed for a level whose children have side `r1`: the
/// smallest integer in the regime's interval.
pub fn choose_m(alpha: f64, d: u32, r1: u64) -> Result<u64> {
    if r1 == 0 {
        return Err(Error::Precondition("child side must be at least 1".into()));
    }
    let m = match regime_of(alpha, d)? {
        Regime::Polylog => {
            let lower = (r1 as f64).powf(lambda(alpha, d) - 1.0);
            let mut m = lower.floor() + 1.0;
            while m <= lower {
                m += 1.0;
            }
            m
        }
        Regime::StretchedExponential => {
            let min = stretched_min_r1(d);
            if r1 < min {
                return Err(Error::Precondition(format!(
                    "alpha = 2d needs r1 >= e^(8/d) = {min}, got {r1}; use continuous-analytic mode"
                )));
            }
            let lower = (gamma(d) / (2.0 * d as f64) * (r1 as f64).ln().sqrt()).exp();
            lower.ceil()
        }
        Regime::PowerLaw => power_law_m(alpha, d)? as f64,
    };
    if !m.is_finite() || m > MAX_MERGE_FACTOR {
        return Err(Error::Precondition(format!("merge factor {m} is too large to represent")));
    }
    Ok(m as u64)
}

/// The constant merge factor of the `2d < alpha <= 2d+1` regime,
/// `floor(3^(1/(alpha-2d))) + 1`.
pub fn power_law_m(alpha: f64, d: u32) -> Result<u64> {
    if regime_of(alpha, d)? != Regime::PowerLaw {
        return Err(unsupported(alpha, d, "constant merge factor only applies for alpha > 2d"));
    }
    let excess = alpha - 2.0 * d as f64;
    let threshold = 3f64.powf(1.0 / excess);
    if !threshold.is_finite() || threshold > MAX_MERGE_FACTOR {
        return Err(Error::Precondition(format!(
            "merge factor 3^(1/{excess}) is too large to represent"
        )));
    }
    let mut m = threshold.floor() + 1.0;
    while m.powf(excess) <= 3.0 {
        m += 1.0;
    }
    Ok(m as u64)
}

/// Duration of the merge evolution, `pi d^(alpha/2) (m r1)^alpha / V^2` with
/// `V = r1^d`. This is the qubit (`q = 2`) value, which imprints a phase of
/// `pi` between two all-ones subcubes.
pub fn step2_time(alpha: f64, d: u32, m: f64, r1: f64) -> f64 {
    let volume = r1.powi(d as i32);
    let direct = PI * (d as f64).powf(alpha / 2.0) * (m * r1).powf(alpha) / (volume * volume);
    if direct.is_finite() && direct > 0.0 {
        return direct;
    }
    let log = PI.ln() + alpha / 2.0 * (d as f64).ln() + alpha * (m.ln() + r1.ln()) - 2.0 * d as f64 * r1.ln();
    log.exp()
}

/// Smallest valid prefactor `K_alpha` for the regime.
///
/// `m` is only used for `alpha > 2d` and `r0` only for `alpha < 2d`.
pub fn k_alpha_min(alpha: f64, d: u32, m: u64, r0: u64) -> Result<f64> {
    k_alpha_min_with_slack(alpha, d, m, r0, 1.0)
}

/// [`k_alpha_min`] with a tunable slack in the polylog exponent. A smaller
/// slack lowers `kappa` towards `log 3 / log lambda` at the price of a larger
/// prefactor.
pub fn k_alpha_min_with_slack(alpha: f64, d: u32, m: u64, r0: u64, slack: f64) -> Result<f64> {
    let df = d as f64;
    match regime_of(alpha, d)? {
        Regime::PowerLaw => {
            let excess = alpha - 2.0 * df;
            let grown = (m as f64).powf(excess);
            if grown <= 3.0 {
                return Err(Error::Pole { value: grown });
            }
            Ok(PI * df.powf(alpha / 2.0) * (m as f64).powf(alpha) / (grown - 3.0))
        }
        Regime::StretchedExponential => Ok(2f64.powf(alpha) * PI * df.powf(alpha / 2.0) / (E * E - 3.0)),
        Regime::Polylog => {
            if !(slack > 0.0 && slack.is_finite()) {
                return Err(Error::InvalidArgument(format!("kappa slack must be positive, got {slack}")));
            }
            if r0 < 2 {
                return Err(Error::Precondition(
                    "polylog prefactor needs a base side r0 >= 2 (log r0 > 0)".into(),
                ));
            }
            let k = kappa(alpha, d, slack);
            Ok(PI * (2.0 * df.sqrt()).powf(alpha) / (slack * (r0 as f64).ln().powf(k)))
        }
    }
}

/// Regime-dependent growth kernel without the prefactor.
fn envelope_kernel(regime: Regime, alpha: f64, d: u32, kappa: f64, r: f64) -> f64 {
    match regime {
        Regime::Polylog => r.ln().powf(kappa),
        Regime::StretchedExponential => (gamma(d) * r.ln().sqrt()).exp(),
        Regime::PowerLaw => r.powf(alpha - 2.0 * d as f64),
    }
}

/// Constants shared by every node of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub alpha: f64,
    pub d: u32,
    pub regime: Regime,
    /// Only meaningful for `d < alpha < 2d`.
    pub kappa_alpha: Option<f64>,
    pub gamma: f64,
    pub lambda: f64,
    pub k_alpha: f64,
    pub r0: u64,
    pub t_base: f64,
    pub kappa_slack: f64,
    /// Constant merge factor used for `alpha > 2d`.
    pub power_m: Option<u64>,
}

impl RegimeParams {
    pub fn new(alpha: f64, d: u32, r0: u64, options: &ScheduleOptions) -> Result<Self> {
        let regime = regime_of(alpha, d)?;
        if r0 == 0 {
            return Err(Error::InvalidArgument("base side r0 must be at least 1".into()));
        }
        let power_m = match regime {
            Regime::PowerLaw => Some(match options.power_m {
                Some(m) => m,
                None => power_law_m(alpha, d)?,
            }),
            _ => None,
        };
        let k_alpha = match options.k_alpha {
            Some(k) if k.is_finite() && k > 0.0 => k,
            Some(k) => return Err(Error::InvalidArgument(format!("K_alpha must be positive, got {k}"))),
            None => k_alpha_min_with_slack(alpha, d, power_m.unwrap_or(0), r0, options.kappa_slack)?,
        };
        let kappa_alpha = (regime == Regime::Polylog).then(|| kappa(alpha, d, options.kappa_slack));
        let mut params = RegimeParams {
            alpha,
            d,
            regime,
            kappa_alpha,
            gamma: gamma(d),
            lambda: lambda(alpha, d),
            k_alpha,
            r0,
            t_base: 0.0,
            kappa_slack: options.kappa_slack,
            power_m,
        };
        params.t_base = match options.t_base {
            Some(t) if t.is_finite() && t >= 0.0 => t,
            Some(t) => return Err(Error::InvalidArgument(format!("base time must be >= 0, got {t}"))),
            None => params.envelope(r0 as f64),
        };
        Ok(params)
    }

    /// `K_alpha` times the regime kernel at side `r`.
    pub fn envelope(&self, r: f64) -> f64 {
        self.k_alpha * envelope_kernel(self.regime, self.alpha, self.d, self.kappa_alpha.unwrap_or(0.0), r)
    }

    /// Merge factor for children of side `r1`, honouring a configured constant
    /// for the power-law regime.
    pub fn merge_factor(&self, r1: u64) -> Result<u64> {
        match (self.regime, self.power_m) {
            (Regime::PowerLaw, Some(m)) => Ok(m),
            _ => choose_m(self.alpha, self.d, r1),
        }
    }
}

/// Envelope `t(r)` the protocol time is certified against.
pub fn bound_t(alpha: f64, d: u32, r: f64, params: &RegimeParams) -> Result<f64> {
    let regime = regime_of(alpha, d)?;
    if !(r >= 1.0) {
        return Err(Error::InvalidArgument(format!("bound_t needs r >= 1, got {r}")));
    }
    let kappa = params.kappa_alpha.unwrap_or_else(|| kappa(alpha, d, params.kappa_slack));
    Ok(params.k_alpha * envelope_kernel(regime, alpha, d, kappa, r))
}

/// Knobs that are not part of the regime definition itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOptions {
    /// Overrides `K_alpha`; defaults to the regime minimum.
    pub k_alpha: Option<f64>,
    /// Overrides the base time; defaults to the envelope at `r0`.
    pub t_base: Option<f64>,
    pub kappa_slack: f64,
    /// Constant merge factor for `alpha > 2d`.
    pub power_m: Option<u64>,
    /// Merge factors per level, bottom level first. Replaces `choose_m`.
    pub forced_m: Option<Vec<u64>>,
    /// Levels per site. The merge phase for `q > 2` only needs `2 pi / q`,
    /// which shortens `t2` by `2 / q`.
    pub q: usize,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        ScheduleOptions {
            k_alpha: None,
            t_base: None,
            kappa_slack: 1.0,
            power_m: None,
            forced_m: None,
            q: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMode {
    IntegerExact,
    ContinuousAnalytic,
}

impl fmt::Display for PlanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanMode::IntegerExact => "integer-exact",
            PlanMode::ContinuousAnalytic => "continuous-analytic",
        })
    }
}

/// One level of the recursion tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleNode {
    pub r: f64,
    /// `None` marks a base cube.
    pub r1: Option<f64>,
    pub m: Option<f64>,
    pub t1: f64,
    pub t2: f64,
    pub t_total: f64,
    /// Envelope value at `r`.
    pub bound: f64,
    pub within_bound: bool,
    /// The merge factor was supplied by the caller rather than chosen by rule.
    pub forced: bool,
    /// Number of children, `m^d`; every child follows `children[0]`.
    pub child_count: u64,
    pub children: Vec<ScheduleNode>,
}

impl ScheduleNode {
    fn base(params: &RegimeParams, r: f64, t: f64) -> Self {
        let bound = params.envelope(r);
        ScheduleNode {
            r,
            r1: None,
            m: None,
            t1: 0.0,
            t2: 0.0,
            t_total: t,
            bound,
            within_bound: certified(t, bound),
            forced: false,
            child_count: 0,
            children: Vec::new(),
        }
    }

    fn merge(params: &RegimeParams, q: usize, child: ScheduleNode, m: f64, forced: bool) -> Self {
        let r1 = child.r;
        let r = m * r1;
        let t1 = child.t_total;
        let t2 = step2_time(params.alpha, params.d, m, r1) * phase_scale(q);
        let t_total = 3.0 * t1 + t2;
        let bound = params.envelope(r);
        ScheduleNode {
            r,
            r1: Some(r1),
            m: Some(m),
            t1,
            t2,
            t_total,
            bound,
            within_bound: certified(t_total, bound),
            forced,
            child_count: m.powi(params.d as i32).round() as u64,
            children: vec![child],
        }
    }

    pub fn is_base(&self) -> bool {
        self.children.is_empty()
    }

    /// The representative child, if any.
    pub fn child(&self) -> Option<&ScheduleNode> {
        self.children.first()
    }

    /// Integer merge factor; `None` for a base node.
    pub fn merge_factor(&self) -> Option<usize> {
        self.m.map(|m| m.round() as usize)
    }

    /// Nodes from this one down to the base.
    pub fn chain(&self) -> Vec<&ScheduleNode> {
        let mut out = vec![self];
        let mut cur = self;
        while let Some(c) = cur.child() {
            out.push(c);
            cur = c;
        }
        out
    }
}

fn certified(t: f64, bound: f64) -> bool {
    t <= bound * (1.0 + CERTIFICATE_RTOL) + f64::MIN_POSITIVE
}

fn phase_scale(q: usize) -> f64 {
    if q <= 2 {
        1.0
    } else {
        2.0 / q as f64
    }
}

/// The whole recursion tree plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulePlan {
    pub mode: PlanMode,
    pub params: RegimeParams,
    /// Present in integer-exact mode when the side fits the lattice type.
    pub lattice: Option<LatticeSpec>,
    pub q: usize,
    /// Base side followed by the merge factor of each level, bottom first.
    pub levels: Vec<f64>,
    pub root: ScheduleNode,
    pub warnings: Vec<String>,
}

impl SchedulePlan {
    pub fn t_total(&self) -> f64 {
        self.root.t_total
    }

    pub fn side(&self) -> f64 {
        self.root.r
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// True when every node satisfies its envelope.
    pub fn certified(&self) -> bool {
        self.root.chain().iter().all(|n| n.within_bound)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn validate_q(q: usize) -> Result<()> {
    if q < 2 {
        return Err(Error::InvalidArgument(format!("q must be at least 2, got {q}")));
    }
    Ok(())
}

fn polylog_warning(params: &RegimeParams, r1: f64) -> Option<String> {
    let kappa = params.kappa_alpha?;
    let lhs = params.k_alpha * r1.ln().powf(kappa);
    let rhs = PI * (2.0 * (params.d as f64).sqrt()).powf(params.alpha);
    (lhs < rhs).then(|| {
        format!("K_alpha log^kappa r1 = {lhs:.6e} < pi (2 sqrt d)^alpha = {rhs:.6e} at r1 = {r1}; certificate not guaranteed")
    })
}

fn finish_integer(
    params: RegimeParams,
    options: &ScheduleOptions,
    factors: &[(u64, bool)],
    warnings: Vec<String>,
) -> Result<SchedulePlan> {
    let mut node = ScheduleNode::base(&params, params.r0 as f64, params.t_base);
    let mut warnings = warnings;
    for &(m, forced) in factors {
        if let Some(w) = polylog_warning(&params, node.r) {
            warnings.push(w);
        }
        node = ScheduleNode::merge(&params, options.q, node, m as f64, forced);
    }
    let mut levels = vec![params.r0 as f64];
    levels.extend(factors.iter().map(|&(m, _)| m as f64));
    let side = node.r as usize;
    let lattice = LatticeSpec::new(params.d, side, options.q).ok();
    Ok(SchedulePlan {
        mode: PlanMode::IntegerExact,
        params,
        lattice,
        q: options.q,
        levels,
        root: node,
        warnings,
    })
}

/// Integer-exact plan for a cube of side `target_r`.
///
/// Merge factors come from `options.forced_m` when given, otherwise from the
/// regime rule applied level by level. A target that the rule skips over is
/// reported together with the nearest reachable sides.
pub fn plan(alpha: f64, d: u32, target_r: u64, r0: u64, options: &ScheduleOptions) -> Result<SchedulePlan> {
    validate_q(options.q)?;
    let params = RegimeParams::new(alpha, d, r0, options)?;
    let mut factors = Vec::new();
    if let Some(forced) = &options.forced_m {
        let mut r = r0;
        for &m in forced {
            if m == 0 {
                return Err(Error::InvalidArgument("forced merge factor must be positive".into()));
            }
            r = r.checked_mul(m).ok_or(Error::Unreachable {
                target: target_r,
                below: None,
                above: None,
            })?;
            factors.push((m, true));
        }
        if r != target_r {
            let (below, above) = if r < target_r { (Some(r), None) } else { (None, Some(r)) };
            return Err(Error::Unreachable {
                target: target_r,
                below,
                above,
            });
        }
    } else {
        if target_r < r0 {
            return Err(Error::Unreachable {
                target: target_r,
                below: None,
                above: Some(r0),
            });
        }
        let mut r = r0;
        while r < target_r {
            let m = params.merge_factor(r)?;
            let next = r.checked_mul(m);
            match next {
                Some(next) if next <= target_r => {
                    factors.push((m, false));
                    r = next;
                }
                other => {
                    return Err(Error::Unreachable {
                        target: target_r,
                        below: Some(r),
                        above: other,
                    })
                }
            }
        }
    }
    finish_integer(params, options, &factors, Vec::new())
}

/// Integer-exact plan with exactly `depth` merge levels chosen by rule (or
/// forced factors when given).
pub fn plan_depth(alpha: f64, d: u32, depth: usize, r0: u64, options: &ScheduleOptions) -> Result<SchedulePlan> {
    validate_q(options.q)?;
    let params = RegimeParams::new(alpha, d, r0, options)?;
    let mut factors = Vec::with_capacity(depth);
    let mut r = r0;
    for level in 0..depth {
        let (m, forced) = match options.forced_m.as_ref().and_then(|f| f.get(level)) {
            Some(&m) => (m, true),
            None => (params.merge_factor(r)?, false),
        };
        r = r.checked_mul(m).ok_or(Error::Unreachable {
            target: u64::MAX,
            below: Some(r),
            above: None,
        })?;
        factors.push((m, forced));
    }
    finish_integer(params, options, &factors, Vec::new())
}

/// Inverse of `r = m(r1) * r1` with `m` at the lower end of the regime's
/// interval; returns `(r1, m)`.
fn continuous_split(params: &RegimeParams, r: f64) -> (f64, f64) {
    match params.regime {
        Regime::PowerLaw => {
            let m = params.power_m.unwrap_or(2) as f64;
            (r / m, m)
        }
        Regime::Polylog => {
            let r1 = r.powf(1.0 / params.lambda);
            (r1, r / r1)
        }
        Regime::StretchedExponential => {
            let c = params.gamma / (2.0 * params.d as f64);
            let s = (-c + (c * c + 4.0 * r.ln()).sqrt()) / 2.0;
            let r1 = (s * s).exp();
            (r1, (c * s).exp())
        }
    }
}

/// Real-valued merge factor for children of side `r1`, lower end of the interval.
fn continuous_factor(params: &RegimeParams, r1: f64) -> f64 {
    match params.regime {
        Regime::PowerLaw => params.power_m.unwrap_or(2) as f64,
        Regime::Polylog => r1.powf(params.lambda - 1.0),
        Regime::StretchedExponential => (params.gamma / (2.0 * params.d as f64) * r1.ln().sqrt()).exp(),
    }
}

/// Sides `r0, m(r0) r0, ...` produced by merging with real-valued factors,
/// up to and including the first side at or above `r_max`.
pub fn continuous_level_sides(
    alpha: f64,
    d: u32,
    r0: u64,
    options: &ScheduleOptions,
    r_max: f64,
) -> Result<Vec<f64>> {
    let params = RegimeParams::new(alpha, d, r0, options)?;
    if !(r_max.is_finite() && r_max >= 1.0) {
        return Err(Error::InvalidArgument(format!("r_max must be finite and >= 1, got {r_max}")));
    }
    let mut sides = vec![r0 as f64];
    while *sides.last().unwrap() < r_max {
        let r1 = *sides.last().unwrap();
        let next = continuous_factor(&params, r1) * r1;
        if !(next > r1) || !next.is_finite() {
            break;
        }
        sides.push(next);
    }
    Ok(sides)
}

/// Time of a leftover cube of side `s` between `r0` and the first merged
/// size: geometric interpolation between the base time and the one-level time,
/// so the total time stays continuous when the recursion depth changes.
fn leftover_time(params: &RegimeParams, q: usize, s: f64) -> f64 {
    let r0 = params.r0 as f64;
    let m = continuous_factor(params, r0);
    let top = m * r0;
    let t_one = 3.0 * params.t_base + step2_time(params.alpha, params.d, m, r0) * phase_scale(q);
    let u = ((s / r0).ln() / (top / r0).ln()).clamp(0.0, 1.0);
    if params.t_base > 0.0 {
        (params.t_base.ln() * (1.0 - u) + t_one.ln() * u).exp()
    } else {
        t_one * u
    }
}

/// Plan for a real side `r >= r0`, with real-valued merge factors.
///
/// Cubes whose split would fall below `r0` are base cubes whose time is
/// interpolated between `t_base` and the one-level time. Useful for sampling scaling curves at arbitrary sizes; such a
/// plan is not meant to be simulated.
pub fn plan_continuous(alpha: f64, d: u32, r: f64, r0: u64, options: &ScheduleOptions) -> Result<SchedulePlan> {
    validate_q(options.q)?;
    let params = RegimeParams::new(alpha, d, r0, options)?;
    let r0f = r0 as f64;
    if !(r.is_finite() && r >= r0f) {
        return Err(Error::InvalidArgument(format!("continuous plan needs finite r >= r0 = {r0}, got {r}")));
    }
    let mut chain = Vec::new();
    let mut side = r;
    loop {
        let (r1, m) = continuous_split(&params, side);
        if !(r1 >= r0f * (1.0 - 1e-12)) || !(m > 1.0) {
            break;
        }
        chain.push((side, m));
        side = r1;
    }
    // Sizes that are exact multiples of r0 land back on r0 up to round-off.
    if (side - r0f).abs() <= 1e-9 * r0f {
        side = r0f;
    }
    let t_base = if side == r0f { params.t_base } else { leftover_time(&params, options.q, side) };
    let mut node = ScheduleNode::base(&params, side, t_base);
    let mut levels = vec![side];
    let mut warnings = Vec::new();
    for &(_, m) in chain.iter().rev() {
        if let Some(w) = polylog_warning(&params, node.r) {
            warnings.push(w);
        }
        node = ScheduleNode::merge(&params, options.q, node, m, false);
        levels.push(m);
    }
    // Re-anchor the root to the requested size.
    node.r = r;
    Ok(SchedulePlan {
        mode: PlanMode::ContinuousAnalytic,
        params,
        lattice: None,
        q: options.q,
        levels,
        root: node,
        warnings,
    })
}
