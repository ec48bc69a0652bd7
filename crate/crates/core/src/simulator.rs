//! Dense statevector engine over `q`-level sites.
//!
//! Basis index convention: base-`q` little-endian over flat site order, so
//! site 0 is the least significant digit.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{site_mask, LatticeSpec, Region};

/// Default ceiling on the number of stored amplitudes (`2^26`).
pub const DEFAULT_MEMORY_CAP: usize = 1 << 26;

pub const NORM_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-12;

const PAR_THRESHOLD: usize = 1 << 14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `e^(2 pi i k / q)`, exact at multiples of a quarter turn.
pub fn root_of_unity(k: usize, q: usize) -> Complex64 {
    let k = k % q;
    if k == 0 {
        ONE
    } else if 2 * k == q {
        Complex64::new(-1.0, 0.0)
    } else if 4 * k == q {
        Complex64::new(0.0, 1.0)
    } else if 4 * k == 3 * q {
        Complex64::new(0.0, -1.0)
    } else {
        Complex64::from_polar(1.0, 2.0 * PI * k as f64 / q as f64)
    }
}

/// Number of amplitudes for `n` sites of `q` levels, refusing anything above `cap`.
pub fn checked_dimension(q: usize, n: usize, cap: usize) -> Result<usize> {
    let mut dim: u128 = 1;
    for _ in 0..n {
        dim *= q as u128;
        if dim > cap as u128 {
            return Err(Error::MemoryCap {
                requested: q_pow_saturating(q, n),
                cap,
            });
        }
    }
    Ok(dim as usize)
}

fn q_pow_saturating(q: usize, n: usize) -> u128 {
    (q as u128).checked_pow(n.min(u32::MAX as usize) as u32).unwrap_or(u128::MAX)
}

/// A single-site gate.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    q: usize,
    /// Row-major `q x q`.
    matrix: Vec<Complex64>,
    pub target: usize,
}

impl Gate {
    /// Build a gate, rejecting matrices that are not unitary to `1e-12`.
    pub fn new(q: usize, matrix: Vec<Complex64>, target: usize) -> Result<Self> {
        if q < 2 || matrix.len() != q * q {
            return Err(Error::ShapeMismatch(format!(
                "gate needs a {q}x{q} matrix, got {} entries",
                matrix.len()
            )));
        }
        let deviation = unitarity_deviation(q, &matrix);
        if !(deviation <= UNITARY_TOL) {
            return Err(Error::NonUnitary { deviation });
        }
        Ok(Gate { q, matrix, target })
    }

    pub fn hadamard(target: usize) -> Self {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Gate {
            q: 2,
            matrix: vec![h, h, h, -h],
            target,
        }
    }

    /// `q`-point discrete Fourier transform, `F[j][k] = e^(2 pi i jk/q) / sqrt(q)`.
    ///
    /// `F` maps the phase ladder `sum_k e^(-2 pi i l k/q) |k> / sqrt(q)` to `|l>`.
    pub fn dft(q: usize, target: usize) -> Self {
        let norm = if q == 2 { FRAC_1_SQRT_2 } else { 1.0 / (q as f64).sqrt() };
        let matrix = (0..q * q)
            .map(|e| root_of_unity((e / q) * (e % q), q) * norm)
            .collect();
        Gate { q, matrix, target }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let q = self.q;
        let matrix = (0..q * q).map(|e| self.matrix[(e % q) * q + e / q].conj()).collect();
        Gate {
            q,
            matrix,
            target: self.target,
        }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[row * self.q + col]
    }

    pub fn on(mut self, target: usize) -> Self {
        self.target = target;
        self
    }
}

fn unitarity_deviation(q: usize, m: &[Complex64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..q {
        for j in 0..q {
            let dot: Complex64 = (0..q).map(|k| m[k * q + i].conj() * m[k * q + j]).sum();
            let target = if i == j { ONE } else { ZERO };
            let dev = (dot - target).norm();
            if dev.is_nan() {
                return f64::NAN;
            }
            worst = worst.max(dev);
        }
    }
    worst
}

/// Diagonal merge coupling between a control cube and a set of target cubes:
/// `J sum_j sum_{mu in control} sum_{nu in target j} n_mu n_nu` with
/// `n = sum_l l |l><l|`. For qubits this is the projector `|1><1|` on both sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCoupling {
    pub control: Vec<usize>,
    pub targets: Vec<Vec<usize>>,
    pub strength: f64,
}

impl PhaseCoupling {
    pub fn new(control: Vec<usize>, targets: Vec<Vec<usize>>, strength: f64) -> Result<Self> {
        if !(strength > 0.0 && strength.is_finite()) {
            return Err(Error::InvalidArgument(format!("coupling strength must be positive, got {strength}")));
        }
        let mut seen = std::collections::HashSet::new();
        for &s in control.iter().chain(targets.iter().flatten()) {
            if !seen.insert(s) {
                return Err(Error::InvalidArgument(format!("site {s} appears in more than one coupling mask")));
            }
        }
        Ok(PhaseCoupling {
            control,
            targets,
            strength,
        })
    }

    /// Coupling for one merge: the first subcube controls, the rest are targets,
    /// strength `1 / (m r1 sqrt(d))^alpha`.
    pub fn for_merge(lattice: &LatticeSpec, parts: &[Region], m: usize, alpha: f64) -> Result<Self> {
        let (first, rest) = parts
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("merge needs at least one subcube".into()))?;
        let diameter = (m * first.side) as f64 * (first.dim() as f64).sqrt();
        let control = site_mask(first, lattice)?;
        let targets = rest
            .iter()
            .map(|p| site_mask(p, lattice))
            .collect::<Result<Vec<_>>>()?;
        PhaseCoupling::new(control, targets, diameter.powf(-alpha))
    }

    /// Largest `J * dist^alpha` over all control/target pairs; a legal
    /// power-law coupling keeps this at or below one.
    pub fn max_pair_ratio(&self, lattice: &LatticeSpec, alpha: f64) -> Result<f64> {
        let mut worst = 0.0f64;
        for &mu in &self.control {
            for &nu in self.targets.iter().flatten() {
                let dist = lattice.distance(mu, nu)?;
                worst = worst.max(self.strength * dist.powf(alpha));
            }
        }
        Ok(worst)
    }

    pub fn is_legal(&self, lattice: &LatticeSpec, alpha: f64) -> Result<bool> {
        Ok(self.max_pair_ratio(lattice, alpha)? <= 1.0 + 1e-12)
    }
}

/// Dense amplitudes over `q^n` basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    q: usize,
    n: usize,
    amps: Vec<Complex64>,
    strides: Vec<usize>,
}

impl StateVector {
    /// `|0...0>` on `n` sites.
    pub fn zeros(q: usize, n: usize, cap: usize) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidArgument(format!("q must be at least 2, got {q}")));
        }
        let dim = checked_dimension(q, n, cap)?;
        let mut amps = vec![ZERO; dim];
        amps[0] = ONE;
        Ok(StateVector {
            q,
            n,
            amps,
            strides: strides(q, n),
        })
    }

    pub fn from_amplitudes(q: usize, n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidArgument(format!("q must be at least 2, got {q}")));
        }
        let dim = checked_dimension(q, n, usize::MAX)?;
        if amps.len() != dim {
            return Err(Error::ShapeMismatch(format!("expected {dim} amplitudes, got {}", amps.len())));
        }
        let s = StateVector {
            q,
            n,
            amps,
            strides: strides(q, n),
        };
        let norm_sqr = s.norm_sqr();
        if !((norm_sqr - 1.0).abs() <= NORM_TOL) {
            return Err(Error::Unnormalized { norm_sqr });
        }
        Ok(s)
    }

    /// Tensor product of per-site states, in flat site order.
    pub fn init_product(lattice: &LatticeSpec, site_states: &[Vec<Complex64>], cap: usize) -> Result<Self> {
        let n = lattice.site_count()?;
        if site_states.len() != n {
            return Err(Error::ShapeMismatch(format!("expected {n} site states, got {}", site_states.len())));
        }
        Self::product(lattice.q, site_states, cap)
    }

    /// Tensor product of arbitrary per-site states (site 0 first).
    pub fn product(q: usize, site_states: &[Vec<Complex64>], cap: usize) -> Result<Self> {
        for (i, s) in site_states.iter().enumerate() {
            if s.len() != q {
                return Err(Error::ShapeMismatch(format!("site {i} state has {} levels, expected {q}", s.len())));
            }
            check_normalized(s)?;
        }
        let mut state = Self::zeros(q, site_states.len(), cap)?;
        let dim = state.amps.len();
        for idx in 0..dim {
            let mut amp = ONE;
            let mut rest = idx;
            for s in site_states {
                amp *= s[rest % q];
                rest /= q;
            }
            state.amps[idx] = amp;
        }
        Ok(state)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    /// Level of `site` in basis state `index`.
    pub fn digit(&self, index: usize, site: usize) -> usize {
        (index / self.strides[site]) % self.q
    }

    pub fn stride(&self, site: usize) -> usize {
        self.strides[site]
    }

    /// Sum of squared magnitudes, accumulated in index order.
    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n {
            return Err(Error::InvalidSite(format!("site {site} outside state of {} sites", self.n)));
        }
        Ok(())
    }

    /// Offsets of every joint assignment of levels to `sites`; entry `k` is the
    /// offset of the assignment whose base-`q` digits (first site least
    /// significant) spell `k`.
    pub fn offsets(&self, sites: &[usize]) -> Vec<usize> {
        let mut out = vec![0usize];
        for &s in sites {
            let stride = self.strides[s];
            let prev = std::mem::take(&mut out);
            out = Vec::with_capacity(prev.len() * self.q);
            for level in 0..self.q {
                out.extend(prev.iter().map(|&o| o + level * stride));
            }
        }
        out
    }

    /// Apply a single-site gate.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        self.check_site(gate.target)?;
        if gate.q != self.q {
            return Err(Error::ShapeMismatch(format!("{}-level gate on {}-level state", gate.q, self.q)));
        }
        let q = self.q;
        let stride = self.strides[gate.target];
        let block = stride * q;
        let m = &gate.matrix;
        if q == 2 {
            let (m00, m01, m10, m11) = (m[0], m[1], m[2], m[3]);
            let kernel = |chunk: &mut [Complex64]| {
                let (lo, hi) = chunk.split_at_mut(stride);
                for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (x, y) = (*a, *b);
                    *a = m00 * x + m01 * y;
                    *b = m10 * x + m11 * y;
                }
            };
            if self.amps.len() >= PAR_THRESHOLD && block < self.amps.len() {
                self.amps.par_chunks_mut(block).for_each(kernel);
            } else {
                self.amps.chunks_mut(block).for_each(kernel);
            }
            return Ok(());
        }
        let kernel = |chunk: &mut [Complex64]| {
            let mut buf = [ZERO; 16];
            let mut heap;
            let local: &mut [Complex64] = if q <= 16 {
                &mut buf[..q]
            } else {
                heap = vec![ZERO; q];
                &mut heap[..]
            };
            for low in 0..stride {
                for (l, v) in local.iter_mut().enumerate() {
                    *v = chunk[low + l * stride];
                }
                for row in 0..q {
                    let mut acc = ZERO;
                    for (col, v) in local.iter().enumerate() {
                        acc += m[row * q + col] * v;
                    }
                    chunk[low + row * stride] = acc;
                }
            }
        };
        if self.amps.len() >= PAR_THRESHOLD && block < self.amps.len() {
            self.amps.par_chunks_mut(block).for_each(kernel);
        } else {
            self.amps.chunks_mut(block).for_each(kernel);
        }
        Ok(())
    }

    /// `|l>_control |x>_target -> |l> |x + l mod q>`; CNOT for qubits.
    pub fn apply_controlled_increment(&mut self, control: usize, target: usize) -> Result<()> {
        self.apply_controlled_shift(control, target, 1)
    }

    /// Inverse of [`StateVector::apply_controlled_increment`].
    pub fn apply_controlled_decrement(&mut self, control: usize, target: usize) -> Result<()> {
        let q = self.q;
        self.apply_controlled_shift(control, target, q - 1)
    }

    /// `|l>|x> -> |l>|x + shift * l mod q>`.
    pub fn apply_controlled_shift(&mut self, control: usize, target: usize, shift: usize) -> Result<()> {
        self.check_site(control)?;
        self.check_site(target)?;
        if control == target {
            return Err(Error::InvalidSite(format!("control and target are both site {control}")));
        }
        let q = self.q;
        let ts = self.strides[target];
        let cs = self.strides[control];
        let block = ts * q;
        let len = self.amps.len();
        if q == 2 {
            if shift.is_multiple_of(2) {
                return Ok(());
            }
            for base in (0..len).step_by(block) {
                for idx in base..base + ts {
                    if idx & cs != 0 {
                        self.amps.swap(idx, idx + ts);
                    }
                }
            }
            return Ok(());
        }
        let mut buf = [ZERO; 16];
        let mut heap;
        let local: &mut [Complex64] = if q <= 16 {
            &mut buf[..q]
        } else {
            heap = vec![ZERO; q];
            &mut heap[..]
        };
        for base in (0..len).step_by(block) {
            for idx in base..base + ts {
                let step = (shift * ((idx / cs) % q)) % q;
                if step == 0 {
                    continue;
                }
                for (x, b) in local.iter_mut().enumerate() {
                    *b = self.amps[idx + x * ts];
                }
                for (x, b) in local.iter().enumerate() {
                    self.amps[idx + ((x + step) % q) * ts] = *b;
                }
            }
        }
        Ok(())
    }

    /// Exact evolution under the diagonal merge coupling for `duration`:
    /// basis state `z` picks up `e^(-i duration J w_c(z) w_t(z))`, where `w_c`
    /// and `w_t` are level sums over the control and the union of target masks.
    pub fn evolve_phase(&mut self, coupling: &PhaseCoupling, duration: f64) -> Result<()> {
        self.evolve_signed(coupling, duration, 1.0)
    }

    /// Evolution under the negated coupling, undoing [`StateVector::evolve_phase`].
    pub fn evolve_phase_backward(&mut self, coupling: &PhaseCoupling, duration: f64) -> Result<()> {
        self.evolve_signed(coupling, duration, -1.0)
    }

    fn evolve_signed(&mut self, coupling: &PhaseCoupling, duration: f64, sign: f64) -> Result<()> {
        for &s in coupling.control.iter().chain(coupling.targets.iter().flatten()) {
            self.check_site(s)?;
        }
        if !(duration >= 0.0) {
            return Err(Error::InvalidArgument(format!("duration must be >= 0, got {duration}")));
        }
        let q = self.q;
        let max_c = coupling.control.len() * (q - 1);
        let target_sites: Vec<usize> = coupling.targets.iter().flatten().copied().collect();
        let max_t = target_sites.len() * (q - 1);
        let rate = sign * duration * coupling.strength;
        let table: Vec<Complex64> = (0..=max_c * max_t)
            .map(|p| Complex64::from_polar(1.0, -rate * p as f64))
            .collect();

        if q == 2 && self.n <= 64 {
            let cmask = coupling.control.iter().fold(0u64, |m, &s| m | (1u64 << s));
            let tmask = target_sites.iter().fold(0u64, |m, &s| m | (1u64 << s));
            let f = |(i, a): (usize, &mut Complex64)| {
                let i = i as u64;
                let wc = (i & cmask).count_ones() as usize;
                let wt = (i & tmask).count_ones() as usize;
                if wc != 0 && wt != 0 {
                    *a *= table[wc * wt];
                }
            };
            if self.amps.len() >= PAR_THRESHOLD {
                self.amps.par_iter_mut().enumerate().for_each(f);
            } else {
                self.amps.iter_mut().enumerate().for_each(f);
            }
        } else {
            let strides = &self.strides;
            let level_sum = |idx: usize, sites: &[usize]| -> usize {
                sites.iter().map(|&s| (idx / strides[s]) % q).sum()
            };
            let control = &coupling.control;
            let f = |(i, a): (usize, &mut Complex64)| {
                let wc = level_sum(i, control);
                if wc == 0 {
                    return;
                }
                let wt = level_sum(i, &target_sites);
                *a *= table[wc * wt];
            };
            if self.amps.len() >= PAR_THRESHOLD {
                self.amps.par_iter_mut().enumerate().for_each(f);
            } else {
                self.amps.iter_mut().enumerate().for_each(f);
            }
        }
        Ok(())
    }

    /// Rows `(basis, re, im)` for amplitudes with magnitude above `threshold`.
    /// The basis string lists site levels starting with site 0.
    pub fn dump_rows(&self, threshold: f64) -> Vec<(String, f64, f64)> {
        self.amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > threshold)
            .map(|(i, a)| (self.basis_label(i), a.re, a.im))
            .collect()
    }

    pub fn basis_label(&self, index: usize) -> String {
        (0..self.n)
            .map(|s| {
                let d = self.digit(index, s);
                std::char::from_digit(d as u32, 36).unwrap_or('?')
            })
            .collect()
    }

    /// CSV dump with header `basis,re,im`.
    pub fn dump_csv(&self, threshold: f64) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["basis", "re", "im"])?;
        for (basis, re, im) in self.dump_rows(threshold) {
            w.write_record([basis, format!("{re:e}"), format!("{im:e}")])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }
}

fn strides(q: usize, n: usize) -> Vec<usize> {
    let mut s = Vec::with_capacity(n);
    let mut acc = 1usize;
    for _ in 0..n {
        s.push(acc);
        acc = acc.saturating_mul(q);
    }
    s
}

fn check_normalized(v: &[Complex64]) -> Result<()> {
    let norm_sqr: f64 = v.iter().map(|a| a.norm_sqr()).sum();
    if !((norm_sqr - 1.0).abs() <= NORM_TOL) {
        return Err(Error::Unnormalized { norm_sqr });
    }
    Ok(())
}

/// Inner product `<x|y>`.
pub fn inner(x: &StateVector, y: &StateVector) -> Result<Complex64> {
    if x.q != y.q || x.n != y.n {
        return Err(Error::ShapeMismatch(format!(
            "comparing ({} levels, {} sites) with ({} levels, {} sites)",
            x.q, x.n, y.q, y.n
        )));
    }
    Ok(x.amps.iter().zip(&y.amps).map(|(a, b)| a.conj() * b).sum())
}

/// `|<x|y>|^2`, clamped to `[0, 1]` against round-off.
pub fn fidelity(x: &StateVector, y: &StateVector) -> Result<f64> {
    Ok(inner(x, y)?.norm_sqr().clamp(0.0, 1.0))
}

/// `sum_l a_l |l...l>` over `region`, tensored with `background` on the
/// remaining sites (ascending site order), or `|0...0>` there when `None`.
pub fn expected_ghz(
    region: &Region,
    lattice: &LatticeSpec,
    coefficients: &[Complex64],
    background: Option<&StateVector>,
    cap: usize,
) -> Result<StateVector> {
    let q = lattice.q;
    if coefficients.len() != q {
        return Err(Error::ShapeMismatch(format!("expected {q} coefficients, got {}", coefficients.len())));
    }
    check_normalized(coefficients)?;
    let n = lattice.site_count()?;
    let inside = site_mask(region, lattice)?;
    let outside: Vec<usize> = (0..n).filter(|s| inside.binary_search(s).is_err()).collect();
    let mut state = StateVector::zeros(q, n, cap)?;
    state.amps[0] = ZERO;
    let rest_offsets = state.offsets(&outside);
    let rest_amps: Vec<Complex64> = match background {
        Some(bg) => {
            if bg.q != q || bg.n != outside.len() {
                return Err(Error::ShapeMismatch(format!(
                    "background has {} sites, complement has {}",
                    bg.n,
                    outside.len()
                )));
            }
            bg.amps.clone()
        }
        None => {
            let mut v = vec![ZERO; rest_offsets.len()];
            v[0] = ONE;
            v
        }
    };
    for (level, &a) in coefficients.iter().enumerate() {
        let base: usize = inside.iter().map(|&s| level * state.strides[s]).sum();
        for (off, &b) in rest_offsets.iter().zip(&rest_amps) {
            state.amps[base + off] = a * b;
        }
    }
    Ok(state)
}
