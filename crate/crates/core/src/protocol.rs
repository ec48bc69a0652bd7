//! Recursive encoding of a site's state into a GHZ-like state over a cube,
//! its inverse, and state transfer built from the two.
//!
//! One level of the routine on a cube `C = C_1 ∪ ... ∪ C_M` (with `C_1`
//! holding the information site `c` and `c_j` the anchor of `C_j`):
//!
//! 1. encode `C_1` from `c`; prepare the symmetric GHZ state on every other
//!    `C_j` (Fourier gate on `c_j`, then encode from `c_j`);
//! 2. evolve under the diagonal merge coupling until a unit-weight phase of
//!    `2 pi / q` has built up between `C_1` and each `C_j`;
//! 3. decode every `C_j` onto `c_j`;
//! 4. apply the Fourier gate (Hadamard for qubits) on every `c_j`;
//! 5. encode every `C_j` again.
//!
//! Base cubes are entangled with a controlled-increment cascade from the
//! information site. Decoding runs the same steps inverted, in reverse order.
//!
//! Every step can be checked against its analytically expected state. The
//! expected states are built per input branch `l`: writing the live state at
//! the start of a routine as `sum_l |l>_c |0...0> ⊗ |phi_l>` (or
//! `sum_l |l...l>_C ⊗ |phi_l>` when decoding), the routine acts on each branch
//! independently, so the expected state after any step is
//! `sum_l E_step(l) ⊗ |phi_l>` even when `C` is entangled with the rest of the
//! lattice.

use std::collections::HashMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{site_mask, LatticeSpec, Region};
use crate::scheduler::{PlanMode, ScheduleNode, SchedulePlan};
use crate::simulator::{expected_ghz, fidelity, root_of_unity, Gate, PhaseCoupling, StateVector};

/// Tolerance on the precondition checks (weight outside the expected subspace).
pub const PRECONDITION_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Encode,
    Decode,
}

/// Single-site gate used to prepare symmetric states and in step 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FourierGate {
    /// Qubits only.
    Hadamard,
    Dft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolOptions {
    pub fourier: FourierGate,
    /// Compare each step against its expected state.
    pub verify_steps: bool,
    /// Record steps of nested routines only down to this call depth.
    pub max_record_depth: Option<usize>,
    /// Compare amplitudes across every merge step (the `pi` phase check).
    pub check_merge_phase: bool,
    pub memory_cap: usize,
}

impl Default for ProtocolOptions {
    fn default() -> Self {
        ProtocolOptions {
            fourier: FourierGate::Dft,
            verify_steps: true,
            max_record_depth: None,
            check_merge_phase: true,
            memory_cap: crate::simulator::DEFAULT_MEMORY_CAP,
        }
    }
}

/// What to encode, where.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeRequest {
    pub lattice: LatticeSpec,
    pub region: Region,
    /// Flat index of the information site.
    pub site: usize,
    /// Input coefficients `a_0..a_{q-1}`, when known. Used for an extra
    /// fidelity check against the ideal product form.
    pub coefficients: Option<Vec<Complex64>>,
}

impl EncodeRequest {
    pub fn new(lattice: LatticeSpec, region: Region, site: usize) -> Self {
        EncodeRequest {
            lattice,
            region,
            site,
            coefficients: None,
        }
    }

    pub fn with_coefficients(mut self, coefficients: Vec<Complex64>) -> Self {
        self.coefficients = Some(coefficients);
        self
    }

    fn validate(&self, plan: &SchedulePlan) -> Result<()> {
        self.region.check_within(&self.lattice)?;
        if !self.region.contains_site(&self.lattice, self.site) {
            return Err(Error::InvalidSite(format!(
                "information site {} is not inside region {:?}/{}",
                self.site, self.region.anchor, self.region.side
            )));
        }
        if let Some(c) = &self.coefficients {
            if c.len() != self.lattice.q {
                return Err(Error::ShapeMismatch(format!(
                    "expected {} coefficients, got {}",
                    self.lattice.q,
                    c.len()
                )));
            }
            let norm_sqr: f64 = c.iter().map(|a| a.norm_sqr()).sum();
            if !((norm_sqr - 1.0).abs() <= crate::simulator::NORM_TOL) {
                return Err(Error::Unnormalized { norm_sqr });
            }
        }
        check_plan(plan, &self.lattice, &self.region)
    }
}

fn check_plan(plan: &SchedulePlan, lattice: &LatticeSpec, region: &Region) -> Result<()> {
    if plan.mode != PlanMode::IntegerExact {
        return Err(Error::PlanMismatch("continuous-analytic plans cannot be simulated".into()));
    }
    if plan.params.d != lattice.d {
        return Err(Error::PlanMismatch(format!("plan is for d = {}, lattice has d = {}", plan.params.d, lattice.d)));
    }
    if plan.q != lattice.q {
        return Err(Error::PlanMismatch(format!("plan is for q = {}, lattice has q = {}", plan.q, lattice.q)));
    }
    if plan.root.r != region.side as f64 {
        return Err(Error::PlanMismatch(format!("plan side {} differs from region side {}", plan.root.r, region.side)));
    }
    Ok(())
}

/// One executed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub direction: Direction,
    /// 1-5 for the routine steps, 0 for a base-cube cascade. Decoding reports
    /// the number of the step it inverts.
    pub step: u8,
    /// Height of the schedule node; base cubes are level 0.
    pub level: usize,
    /// Call nesting; the outermost routine is depth 0.
    pub depth: usize,
    pub regions: Vec<Region>,
    pub start: f64,
    pub duration: f64,
    pub elapsed: f64,
    pub fidelity: Option<f64>,
}

/// Amplitude comparison across a merge step for the branch where the control
/// cube and target `target` are both uniformly in level 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeCheck {
    pub direction: Direction,
    pub level: usize,
    pub depth: usize,
    pub target: usize,
    pub region: Region,
    /// Expected ratio of amplitudes after/before (`-1` for qubits).
    pub expected_factor: (f64, f64),
    pub max_deviation: f64,
    pub amplitudes_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTrace {
    pub steps: Vec<StepRecord>,
    pub merge_checks: Vec<MergeCheck>,
    /// Fidelity of the final state with the expected output of the outermost
    /// routine(s).
    pub final_fidelity: f64,
    /// Fidelity against the ideal product form built from the request
    /// coefficients, when they were given.
    pub coefficient_fidelity: Option<f64>,
    /// Analytic protocol time: the plan's `t_total`, doubled for a transfer.
    pub total_time: f64,
    /// Some level used a caller-supplied merge factor.
    pub forced: bool,
}

impl ProtocolTrace {
    fn empty() -> Self {
        ProtocolTrace {
            steps: Vec::new(),
            merge_checks: Vec::new(),
            final_fidelity: 1.0,
            coefficient_fidelity: None,
            total_time: 0.0,
            forced: false,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per step: `direction,depth,level,step,start,duration,elapsed,fidelity`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["direction", "depth", "level", "step", "start", "duration", "elapsed", "fidelity"])?;
        for s in &self.steps {
            w.write_record([
                match s.direction {
                    Direction::Encode => "encode".to_string(),
                    Direction::Decode => "decode".to_string(),
                },
                s.depth.to_string(),
                s.level.to_string(),
                s.step.to_string(),
                s.start.to_string(),
                s.duration.to_string(),
                s.elapsed.to_string(),
                s.fidelity.map(|f| f.to_string()).unwrap_or_default(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn max_merge_deviation(&self) -> f64 {
        self.merge_checks.iter().map(|m| m.max_deviation).fold(0.0, f64::max)
    }
}

/// Shape of the expected region state for one input branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectedForm {
    /// `|l>_c |0...0>`: the routine input when encoding.
    Concentrated,
    /// After step 1.
    Children,
    /// After step 2.
    Merged,
    /// After step 3.
    TargetsConcentrated,
    /// After step 4.
    TargetsRotated,
    /// `|l...l>_C`: the routine output when encoding.
    Ghz,
}

impl ExpectedForm {
    fn after_encode_step(step: u8) -> Self {
        match step {
            1 => ExpectedForm::Children,
            2 => ExpectedForm::Merged,
            3 => ExpectedForm::TargetsConcentrated,
            4 => ExpectedForm::TargetsRotated,
            _ => ExpectedForm::Ghz,
        }
    }

    fn after_decode_step(step: u8) -> Self {
        match step {
            5 => ExpectedForm::TargetsRotated,
            4 => ExpectedForm::TargetsConcentrated,
            3 => ExpectedForm::Merged,
            2 => ExpectedForm::Children,
            _ => ExpectedForm::Concentrated,
        }
    }
}

/// Region decomposition plus the branch states `phi_l` captured at the start
/// of a routine; produces expected states for every step.
#[derive(Debug, Clone)]
pub struct StepContext {
    q: usize,
    n: usize,
    /// Stride sum over the whole region (offset of `|1...1>_C`).
    region_unit: usize,
    /// Stride of the information site.
    site_unit: usize,
    /// Per subcube, stride sum over its sites; `C_1` first.
    child_unit: Vec<usize>,
    /// Per subcube, stride of its designated site.
    child_site_unit: Vec<usize>,
    rest_offsets: Arc<Vec<usize>>,
    phi: Vec<Vec<Complex64>>,
    /// Weight of the live state inside the expected input subspace.
    pub captured_weight: f64,
}

impl StepContext {
    /// Capture the branch states of `state` for a routine on `region` with
    /// information site `site`, split into `parts` (empty for a base cube).
    pub fn capture(
        state: &StateVector,
        lattice: &LatticeSpec,
        region: &Region,
        site: usize,
        parts: &[Region],
        direction: Direction,
    ) -> Result<Self> {
        let inside = site_mask(region, lattice)?;
        let n = lattice.site_count()?;
        let outside: Vec<usize> = (0..n).filter(|s| inside.binary_search(s).is_err()).collect();
        let rest_offsets = Arc::new(state.offsets(&outside));
        Self::with_offsets(state, lattice, &inside, site, parts, direction, rest_offsets)
    }

    fn with_offsets(
        state: &StateVector,
        lattice: &LatticeSpec,
        inside: &[usize],
        site: usize,
        parts: &[Region],
        direction: Direction,
        rest_offsets: Arc<Vec<usize>>,
    ) -> Result<Self> {
        let unit = |sites: &[usize]| sites.iter().map(|&s| state.stride(s)).sum::<usize>();
        let mut child_unit = Vec::with_capacity(parts.len());
        let mut child_site_unit = Vec::with_capacity(parts.len());
        for (j, p) in parts.iter().enumerate() {
            child_unit.push(unit(&site_mask(p, lattice)?));
            let designated = if j == 0 { site } else { p.anchor_site(lattice)? };
            child_site_unit.push(state.stride(designated));
        }
        let mut ctx = StepContext {
            q: state.q(),
            n: state.n(),
            region_unit: unit(inside),
            site_unit: state.stride(site),
            child_unit,
            child_site_unit,
            rest_offsets,
            phi: Vec::new(),
            captured_weight: 0.0,
        };
        let form = match direction {
            Direction::Encode => ExpectedForm::Concentrated,
            Direction::Decode => ExpectedForm::Ghz,
        };
        let amps = state.amplitudes();
        let mut weight = 0.0;
        for level in 0..ctx.q {
            let base = ctx.branch_base(form, level);
            let phi: Vec<Complex64> = ctx.rest_offsets.iter().map(|&o| amps[base + o]).collect();
            weight += phi.iter().map(|a| a.norm_sqr()).sum::<f64>();
            ctx.phi.push(phi);
        }
        ctx.captured_weight = weight;
        Ok(ctx)
    }

    fn branch_base(&self, form: ExpectedForm, level: usize) -> usize {
        match form {
            ExpectedForm::Concentrated => level * self.site_unit,
            _ => level * self.region_unit,
        }
    }

    /// Sparse expected region state for branch `level`: `(offset, amplitude)`.
    fn terms(&self, form: ExpectedForm, level: usize) -> Result<Vec<(usize, Complex64)>> {
        let q = self.q;
        match form {
            ExpectedForm::Concentrated | ExpectedForm::Ghz => {
                return Ok(vec![(self.branch_base(form, level), Complex64::new(1.0, 0.0))])
            }
            _ => {}
        }
        if self.child_unit.is_empty() {
            return Err(Error::InvalidArgument("base cubes have no intermediate steps".into()));
        }
        let control = level * self.child_unit[0];
        let norm = if q == 2 { FRAC_1_SQRT_2 } else { 1.0 / (q as f64).sqrt() };
        // Per target: list of (offset, amplitude) alternatives.
        let per_target = |j: usize| -> Vec<(usize, Complex64)> {
            let uniform = self.child_unit[j];
            let single = self.child_site_unit[j];
            match form {
                ExpectedForm::Children => (0..q).map(|k| (k * uniform, Complex64::new(norm, 0.0))).collect(),
                ExpectedForm::Merged => (0..q)
                    .map(|k| (k * uniform, root_of_unity(q - (level * k) % q, q) * norm))
                    .collect(),
                ExpectedForm::TargetsConcentrated => (0..q)
                    .map(|k| (k * single, root_of_unity(q - (level * k) % q, q) * norm))
                    .collect(),
                ExpectedForm::TargetsRotated => vec![(level * single, Complex64::new(1.0, 0.0))],
                _ => unreachable!(),
            }
        };
        let mut terms = vec![(control, Complex64::new(1.0, 0.0))];
        for j in 1..self.child_unit.len() {
            let alts = per_target(j);
            let mut next = Vec::with_capacity(terms.len() * alts.len());
            for &(o, a) in &terms {
                for &(o2, a2) in &alts {
                    next.push((o + o2, a * a2));
                }
            }
            terms = next;
        }
        Ok(terms)
    }

    /// `<expected|live>` for the given form.
    pub fn overlap(&self, state: &StateVector, form: ExpectedForm) -> Result<Complex64> {
        if state.q() != self.q || state.n() != self.n {
            return Err(Error::ShapeMismatch("state does not match the captured context".into()));
        }
        let amps = state.amplitudes();
        let mut acc = ZERO;
        for level in 0..self.q {
            let phi = &self.phi[level];
            if phi.iter().all(|a| *a == ZERO) {
                continue;
            }
            for (off, amp) in self.terms(form, level)? {
                let mut inner = ZERO;
                for (p, &r) in phi.iter().zip(self.rest_offsets.iter()) {
                    inner += p.conj() * amps[off + r];
                }
                acc += amp.conj() * inner;
            }
        }
        Ok(acc)
    }

    /// Fidelity of the live state with the expected state of `form`.
    pub fn fidelity(&self, state: &StateVector, form: ExpectedForm) -> Result<f64> {
        Ok(self.overlap(state, form)?.norm_sqr().clamp(0.0, 1.0))
    }

    /// Dense expected state of `form`.
    pub fn expected_state(&self, form: ExpectedForm) -> Result<StateVector> {
        let mut amps = vec![ZERO; self.q.pow(self.n as u32)];
        for level in 0..self.q {
            for (off, amp) in self.terms(form, level)? {
                for (p, &r) in self.phi[level].iter().zip(self.rest_offsets.iter()) {
                    amps[off + r] += amp * p;
                }
            }
        }
        StateVector::from_amplitudes(self.q, self.n, amps)
    }

    /// Complement state `sum_l conj(a_l) phi_l`, normalised; `None` when it vanishes.
    fn background(&self, coefficients: &[Complex64]) -> Option<Vec<Complex64>> {
        let len = self.rest_offsets.len();
        let mut bg = vec![ZERO; len];
        for (a, phi) in coefficients.iter().zip(&self.phi) {
            for (b, p) in bg.iter_mut().zip(phi) {
                *b += a.conj() * p;
            }
        }
        let norm = bg.iter().map(|b| b.norm_sqr()).sum::<f64>().sqrt();
        (norm > 1e-300).then(|| bg.into_iter().map(|b| b / norm).collect())
    }
}

/// Fidelity of the live step with its expected state.
pub fn verify_step(ctx: &StepContext, state: &StateVector, direction: Direction, step: u8) -> Result<f64> {
    let form = match (direction, step) {
        (_, s) if s > 5 => return Err(Error::InvalidArgument(format!("unknown step id {s}"))),
        (Direction::Encode, 0) => ExpectedForm::Ghz,
        (Direction::Decode, 0) => ExpectedForm::Concentrated,
        (Direction::Encode, s) => ExpectedForm::after_encode_step(s),
        (Direction::Decode, s) => ExpectedForm::after_decode_step(s),
    };
    ctx.fidelity(state, form)
}

struct Run<'a> {
    lattice: &'a LatticeSpec,
    alpha: f64,
    opts: &'a ProtocolOptions,
    records: Vec<StepRecord>,
    merges: Vec<MergeCheck>,
    rest_cache: HashMap<Region, Arc<Vec<usize>>>,
    mask_cache: HashMap<Region, Arc<Vec<usize>>>,
}

impl<'a> Run<'a> {
    fn new(lattice: &'a LatticeSpec, alpha: f64, opts: &'a ProtocolOptions) -> Self {
        Run {
            lattice,
            alpha,
            opts,
            records: Vec::new(),
            merges: Vec::new(),
            rest_cache: HashMap::new(),
            mask_cache: HashMap::new(),
        }
    }

    fn records_at(&self, depth: usize) -> bool {
        self.opts.max_record_depth.is_none_or(|max| depth <= max)
    }

    fn mask(&mut self, region: &Region) -> Result<Arc<Vec<usize>>> {
        if let Some(m) = self.mask_cache.get(region) {
            return Ok(m.clone());
        }
        let m = Arc::new(site_mask(region, self.lattice)?);
        self.mask_cache.insert(region.clone(), m.clone());
        Ok(m)
    }

    fn rest_offsets(&mut self, state: &StateVector, region: &Region) -> Result<Arc<Vec<usize>>> {
        if let Some(r) = self.rest_cache.get(region) {
            return Ok(r.clone());
        }
        let inside = self.mask(region)?;
        let outside: Vec<usize> = (0..state.n()).filter(|s| inside.binary_search(s).is_err()).collect();
        let r = Arc::new(state.offsets(&outside));
        self.rest_cache.insert(region.clone(), r.clone());
        Ok(r)
    }

    fn context(
        &mut self,
        state: &StateVector,
        region: &Region,
        site: usize,
        parts: &[Region],
        direction: Direction,
    ) -> Result<StepContext> {
        let rest = self.rest_offsets(state, region)?;
        let inside = self.mask(region)?;
        StepContext::with_offsets(state, self.lattice, &inside, site, parts, direction, rest)
    }

    fn fourier(&self, q: usize, target: usize) -> Result<Gate> {
        match self.opts.fourier {
            FourierGate::Dft => Ok(Gate::dft(q, target)),
            FourierGate::Hadamard if q == 2 => Ok(Gate::hadamard(target)),
            FourierGate::Hadamard => Err(Error::InvalidArgument(format!(
                "the Hadamard gate needs qubits; use the DFT for q = {q}"
            ))),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        ctx: Option<&StepContext>,
        state: &StateVector,
        direction: Direction,
        step: u8,
        level: usize,
        depth: usize,
        regions: Vec<Region>,
        start: f64,
        duration: f64,
    ) -> Result<()> {
        let fidelity = match ctx {
            Some(ctx) if self.opts.verify_steps => Some(verify_step(ctx, state, direction, step)?),
            _ => None,
        };
        self.records.push(StepRecord {
            direction,
            step,
            level,
            depth,
            regions,
            start,
            duration,
            elapsed: start + duration,
            fidelity,
        });
        Ok(())
    }

    fn split(&self, region: &Region, site: usize, node: &ScheduleNode) -> Result<(usize, Vec<Region>, Vec<usize>)> {
        let m = node
            .merge_factor()
            .ok_or_else(|| Error::PlanMismatch("merge node without a merge factor".into()))?;
        if node.r != region.side as f64 {
            return Err(Error::PlanMismatch(format!("node side {} vs region side {}", node.r, region.side)));
        }
        let parts = region.partition_around(m, self.lattice, site)?;
        let mut sites = Vec::with_capacity(parts.len());
        sites.push(site);
        for p in &parts[1..] {
            sites.push(p.anchor_site(self.lattice)?);
        }
        Ok((m, parts, sites))
    }

    fn base_cascade(&mut self, state: &mut StateVector, region: &Region, site: usize, direction: Direction) -> Result<()> {
        let mask = self.mask(region)?;
        let others = mask.iter().copied().filter(|&s| s != site);
        match direction {
            Direction::Encode => {
                for t in others {
                    state.apply_controlled_increment(site, t)?;
                }
            }
            Direction::Decode => {
                let list: Vec<usize> = others.collect();
                for &t in list.iter().rev() {
                    state.apply_controlled_decrement(site, t)?;
                }
            }
        }
        Ok(())
    }

    fn merge(
        &mut self,
        state: &mut StateVector,
        coupling: &PhaseCoupling,
        duration: f64,
        backward: bool,
        check: Option<(&Region, &[Region], usize, usize)>,
    ) -> Result<()> {
        let before = check.is_some().then(|| state.clone());
        if backward {
            state.evolve_phase_backward(coupling, duration)?;
        } else {
            state.evolve_phase(coupling, duration)?;
        }
        if let (Some(before), Some((region, parts, level, depth))) = (before, check) {
            let q = state.q();
            let factor = root_of_unity(q - 1, q);
            let factor = if backward { factor.conj() } else { factor };
            let rest = self.rest_offsets(state, region)?;
            let control_unit: usize = self.mask(&parts[0])?.iter().map(|&s| state.stride(s)).sum();
            for (j, p) in parts.iter().enumerate().skip(1) {
                let unit: usize = self.mask(p)?.iter().map(|&s| state.stride(s)).sum();
                let base = control_unit + unit;
                let mut worst = 0.0f64;
                for &r in rest.iter() {
                    let dev = (state.amplitude(base + r) - factor * before.amplitude(base + r)).norm();
                    worst = worst.max(dev);
                }
                self.merges.push(MergeCheck {
                    direction: if backward { Direction::Decode } else { Direction::Encode },
                    level,
                    depth,
                    target: j,
                    region: region.clone(),
                    expected_factor: (factor.re, factor.im),
                    max_deviation: worst,
                    amplitudes_checked: rest.len(),
                });
            }
        }
        Ok(())
    }

    /// Encode routine. Returns the routine's end time.
    fn encode(
        &mut self,
        state: &mut StateVector,
        region: &Region,
        site: usize,
        node: &ScheduleNode,
        start: f64,
        depth: usize,
    ) -> Result<f64> {
        let recording = self.records_at(depth);
        let level = node.chain().len() - 1;
        let q = state.q();
        if node.is_base() {
            let ctx = if recording && self.opts.verify_steps {
                Some(self.context(state, region, site, &[], Direction::Encode)?)
            } else {
                None
            };
            self.base_cascade(state, region, site, Direction::Encode)?;
            if recording {
                self.record(ctx.as_ref(), state, Direction::Encode, 0, level, depth, vec![region.clone()], start, node.t_total)?;
            }
            return Ok(start + node.t_total);
        }
        let child = node.child().expect("merge node has a child");
        let (m, parts, sites) = self.split(region, site, node)?;
        let ctx = if recording && self.opts.verify_steps {
            Some(self.context(state, region, site, &parts, Direction::Encode)?)
        } else {
            None
        };
        let (t1, t2) = (node.t1, node.t2);

        // Step 1
        self.encode(state, &parts[0], sites[0], child, start, depth + 1)?;
        for j in 1..parts.len() {
            state.apply_gate(&self.fourier(q, sites[j])?)?;
            self.encode(state, &parts[j], sites[j], child, start, depth + 1)?;
        }
        let mut clock = start;
        if recording {
            self.record(ctx.as_ref(), state, Direction::Encode, 1, level, depth, parts.clone(), clock, t1)?;
        }
        clock += t1;

        // Step 2
        let coupling = PhaseCoupling::for_merge(self.lattice, &parts, m, self.alpha)?;
        let check = self.opts.check_merge_phase.then_some((region, parts.as_slice(), level, depth));
        self.merge(state, &coupling, t2, false, check)?;
        if recording {
            self.record(ctx.as_ref(), state, Direction::Encode, 2, level, depth, vec![region.clone()], clock, t2)?;
        }
        clock += t2;

        // Step 3
        for j in 1..parts.len() {
            self.decode(state, &parts[j], sites[j], child, clock, depth + 1)?;
        }
        if recording {
            self.record(ctx.as_ref(), state, Direction::Encode, 3, level, depth, parts[1..].to_vec(), clock, t1)?;
        }
        clock += t1;

        // Step 4
        for &s in &sites[1..] {
            state.apply_gate(&self.fourier(q, s)?)?;
        }
        if recording {
            self.record(ctx.as_ref(), state, Direction::Encode, 4, level, depth, parts[1..].to_vec(), clock, 0.0)?;
        }

        // Step 5
        for j in 1..parts.len() {
            self.encode(state, &parts[j], sites[j], child, clock, depth + 1)?;
        }
        if recording {
            self.record(ctx.as_ref(), state, Direction::Encode, 5, level, depth, parts[1..].to_vec(), clock, t1)?;
        }
        clock += t1;
        Ok(clock)
    }

    /// Inverse of [`Run::encode`].
    fn decode(
        &mut self,
        state: &mut StateVector,
        region: &Region,
        site: usize,
        node: &ScheduleNode,
        start: f64,
        depth: usize,
    ) -> Result<f64> {
        let recording = self.records_at(depth);
        let level = node.chain().len() - 1;
        let q = state.q();
        if node.is_base() {
            let ctx = if recording && self.opts.verify_steps {
                Some(self.context(state, region, site, &[], Direction::Decode)?)
            } else {
                None
            };
            self.base_cascade(state, region, site, Direction::Decode)?;
            if recording {
                self.record(ctx.as_ref(), state, Direction::Decode, 0, level, depth, vec![region.clone()], start, node.t_total)?;
            }
            return Ok(start + node.t_total);
        }
        let child = node.child().expect("merge node has a child");
        let (m, parts, sites) = self.split(region, site, node)?;
        let ctx = if recording && self.opts.verify_steps {
            Some(self.context(state, region, site, &parts, Direction::Decode)?)
        } else {
            None
        };
        let (t1, t2) = (node.t1, node.t2);
        let mut clock = start;

        // Undo step 5
        for j in 1..parts.len() {
            self.decode(state, &parts[j], sites[j], child, clock, depth + 1)?;
        }
        if recording {
            self.record(ctx.as_ref(), state, Direction::Decode, 5, level, depth, parts[1..].to_vec(), clock, t1)?;
        }
        clock += t1;

        // Undo step 4
        for &s in &sites[1..] {
            state.apply_gate(&self.fourier(q, s)?.adjoint())?;
        }
        if recording {
            self.record(ctx.as_ref(), state, Direction::Decode, 4, level, depth, parts[1..].to_vec(), clock, 0.0)?;
        }

        // Undo step 3
        for j in 1..parts.len() {
            self.encode(state, &parts[j], sites[j], child, clock, depth + 1)?;
        }
        if recording {
            self.record(ctx.as_ref(), state, Direction::Decode, 3, level, depth, parts[1..].to_vec(), clock, t1)?;
        }
        clock += t1;

        // Undo step 2
        let coupling = PhaseCoupling::for_merge(self.lattice, &parts, m, self.alpha)?;
        let check = self.opts.check_merge_phase.then_some((region, parts.as_slice(), level, depth));
        self.merge(state, &coupling, t2, true, check)?;
        if recording {
            self.record(ctx.as_ref(), state, Direction::Decode, 2, level, depth, vec![region.clone()], clock, t2)?;
        }
        clock += t2;

        // Undo step 1
        self.decode(state, &parts[0], sites[0], child, clock, depth + 1)?;
        for j in 1..parts.len() {
            self.decode(state, &parts[j], sites[j], child, clock, depth + 1)?;
            state.apply_gate(&self.fourier(q, sites[j])?.adjoint())?;
        }
        if recording {
            self.record(ctx.as_ref(), state, Direction::Decode, 1, level, depth, parts.clone(), clock, t1)?;
        }
        clock += t1;
        Ok(clock)
    }
}

fn any_forced(plan: &SchedulePlan) -> bool {
    plan.root.chain().iter().any(|n| n.forced)
}

fn check_state(state: &StateVector, lattice: &LatticeSpec) -> Result<()> {
    if state.q() != lattice.q || state.n() != lattice.site_count()? {
        return Err(Error::ShapeMismatch(format!(
            "state has {} sites of {} levels, lattice has {} of {}",
            state.n(),
            state.q(),
            lattice.site_count()?,
            lattice.q
        )));
    }
    Ok(())
}

fn run_root(
    state: &mut StateVector,
    req: &EncodeRequest,
    plan: &SchedulePlan,
    opts: &ProtocolOptions,
    direction: Direction,
) -> Result<ProtocolTrace> {
    req.validate(plan)?;
    check_state(state, &req.lattice)?;
    // Full-region context, independent of the recording options.
    let outer = StepContext::capture(state, &req.lattice, &req.region, req.site, &[], direction)?;
    if 1.0 - outer.captured_weight > PRECONDITION_TOL {
        return Err(Error::Precondition(match direction {
            Direction::Encode => format!(
                "region sites other than the information site must be |0>; weight outside is {:e}",
                1.0 - outer.captured_weight
            ),
            Direction::Decode => format!(
                "region must hold a GHZ-like state; weight outside is {:e}",
                1.0 - outer.captured_weight
            ),
        }));
    }
    let mut run = Run::new(&req.lattice, plan.params.alpha, opts);
    match direction {
        Direction::Encode => run.encode(state, &req.region, req.site, &plan.root, 0.0, 0)?,
        Direction::Decode => run.decode(state, &req.region, req.site, &plan.root, 0.0, 0)?,
    };
    let final_form = match direction {
        Direction::Encode => ExpectedForm::Ghz,
        Direction::Decode => ExpectedForm::Concentrated,
    };
    let final_fidelity = outer.fidelity(state, final_form)?;
    let coefficient_fidelity = match &req.coefficients {
        Some(coeffs) => Some(coefficient_fidelity(state, req, &outer, coeffs, direction)?),
        None => None,
    };
    // Analytic time of the plan; the recorded durations sum to it up to round-off.
    let total_time = plan.t_total();
    Ok(ProtocolTrace {
        steps: run.records,
        merge_checks: run.merges,
        final_fidelity,
        coefficient_fidelity,
        total_time,
        forced: any_forced(plan),
    })
}

fn coefficient_fidelity(
    state: &StateVector,
    req: &EncodeRequest,
    outer: &StepContext,
    coeffs: &[Complex64],
    direction: Direction,
) -> Result<f64> {
    let Some(bg) = outer.background(coeffs) else {
        return Ok(0.0);
    };
    let n_rest = state.n() - req.region.site_count();
    let background = StateVector::from_amplitudes(state.q(), n_rest, bg)?;
    let expected = match direction {
        Direction::Encode => expected_ghz(&req.region, &req.lattice, coeffs, Some(&background), usize::MAX)?,
        Direction::Decode => {
            let mut amps = vec![ZERO; state.amplitudes().len()];
            for (level, a) in coeffs.iter().enumerate() {
                for (b, &r) in background.amplitudes().iter().zip(outer.rest_offsets.iter()) {
                    amps[level * outer.site_unit + r] = a * b;
                }
            }
            StateVector::from_amplitudes(state.q(), state.n(), amps)?
        }
    };
    fidelity(state, &expected)
}

/// Encode the information site's state into a GHZ-like state over the region.
pub fn encode(
    state: &mut StateVector,
    req: &EncodeRequest,
    plan: &SchedulePlan,
    opts: &ProtocolOptions,
) -> Result<ProtocolTrace> {
    run_root(state, req, plan, opts, Direction::Encode)
}

/// Concentrate a GHZ-like state over the region onto the request's site.
pub fn decode(
    state: &mut StateVector,
    req: &EncodeRequest,
    plan: &SchedulePlan,
    opts: &ProtocolOptions,
) -> Result<ProtocolTrace> {
    run_root(state, req, plan, opts, Direction::Decode)
}

/// Move the state of `from` to `to` by encoding from `from` and decoding onto
/// `to`. Analytic time is twice the plan's total.
pub fn state_transfer(
    state: &mut StateVector,
    lattice: &LatticeSpec,
    region: &Region,
    from: usize,
    to: usize,
    plan: &SchedulePlan,
    opts: &ProtocolOptions,
) -> Result<ProtocolTrace> {
    let enc_req = EncodeRequest::new(*lattice, region.clone(), from);
    let dec_req = EncodeRequest::new(*lattice, region.clone(), to);
    enc_req.validate(plan)?;
    dec_req.validate(plan)?;
    check_state(state, lattice)?;
    if from == to {
        return Ok(ProtocolTrace::empty());
    }
    let input = StepContext::capture(state, lattice, region, from, &[], Direction::Encode)?;
    let first = encode(state, &enc_req, plan, opts)?;
    let mut second = decode(state, &dec_req, plan, opts)?;
    let offset = first.total_time;
    for s in &mut second.steps {
        s.start += offset;
        s.elapsed += offset;
    }
    let mut steps = first.steps;
    steps.append(&mut second.steps);
    let mut merge_checks = first.merge_checks;
    merge_checks.append(&mut second.merge_checks);

    // The state of `from` should now sit on `to`, with the rest of the region in |0>.
    let target = StepContext::capture(state, lattice, region, to, &[], Direction::Encode)?;
    let mut overlap = ZERO;
    for level in 0..state.q() {
        overlap += input.phi[level]
            .iter()
            .zip(&target.phi[level])
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>();
    }
    Ok(ProtocolTrace {
        steps,
        merge_checks,
        final_fidelity: overlap.norm_sqr().clamp(0.0, 1.0),
        coefficient_fidelity: None,
        total_time: first.total_time + second.total_time,
        forced: first.forced,
    })
}
