use nalgebra::DMatrix;
use num_complex::Complex64;
use powerlaw_ghz::geometry::Region;
use powerlaw_ghz::scheduler::step2_time;
use powerlaw_ghz::simulator::{Gate, PhaseCoupling, StateVector, DEFAULT_MEMORY_CAP};
use powerlaw_ghz::LatticeSpec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_state(q: usize, n: usize, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = q.pow(n as u32);
    let raw: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
        .collect();
    let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(q, n, raw.into_iter().map(|a| a / norm).collect()).unwrap()
}

/// Dense `exp(-i H t)` for `H = J sum_{c, t} N_c N_t`, built from Kronecker
/// products and a scaled Taylor series.
fn brute_force(q: usize, n: usize, coupling: &PhaseCoupling, t: f64) -> DMatrix<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let number = DMatrix::from_fn(q, q, |i, j| if i == j { Complex64::new(i as f64, 0.0) } else { zero });
    let eye = DMatrix::<Complex64>::identity(q, q);
    // site 0 is the least significant digit, so it is the rightmost factor
    let on_site = |site: usize| {
        let mut m = DMatrix::<Complex64>::identity(1, 1);
        for s in (0..n).rev() {
            m = m.kronecker(if s == site { &number } else { &eye });
        }
        m
    };
    let dim = q.pow(n as u32);
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for &c in &coupling.control {
        for &tg in coupling.targets.iter().flatten() {
            h += on_site(c) * on_site(tg);
        }
    }
    let a = h * Complex64::new(0.0, -coupling.strength * t);
    let norm = a.iter().map(|x| x.norm()).fold(0.0, f64::max) * dim as f64;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let a = a / Complex64::new(2f64.powi(squarings as i32), 0.0);
    let mut term = DMatrix::<Complex64>::identity(dim, dim);
    let mut sum = term.clone();
    for k in 1..40 {
        term = &term * &a / Complex64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

fn max_deviation(state: &StateVector, u: &DMatrix<Complex64>, input: &StateVector) -> f64 {
    let v = nalgebra::DVector::from_column_slice(input.amplitudes());
    let out = u * v;
    state
        .amplitudes()
        .iter()
        .zip(out.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
}

#[test]
fn merge_evolution_matches_dense_exponential() {
    // (d, side, m) lattices a single merge level acts on, at most four sites
    let configs = [(1u32, 4usize, 2usize), (1, 2, 2), (2, 2, 2), (1, 3, 3)];
    for (d, side, m) in configs {
        for q in [2usize, 3] {
            for alpha in [1.5 * d as f64, 2.0 * d as f64, 2.0 * d as f64 + 0.5] {
                let lat = LatticeSpec::new(d, side, q).unwrap();
                let n = lat.site_count().unwrap();
                let parts = lat.full_region().partition(m).unwrap();
                let coupling = PhaseCoupling::for_merge(&lat, &parts, m, alpha).unwrap();
                let r1 = (side / m) as f64;
                let t2 = step2_time(alpha, d, m as f64, r1) * if q == 2 { 1.0 } else { 2.0 / q as f64 };
                for (k, t) in [t2, 0.37 * t2, 1.9].into_iter().enumerate() {
                    let input = random_state(q, n, 1000 * k as u64 + n as u64 + q as u64);
                    let mut s = input.clone();
                    s.evolve_phase(&coupling, t).unwrap();
                    let u = brute_force(q, n, &coupling, t);
                    let dev = max_deviation(&s, &u, &input);
                    assert!(dev <= 1e-10, "d={d} side={side} q={q} alpha={alpha}: {dev:e}");
                }
            }
        }
    }
}

#[test]
fn merge_couplings_are_legal() {
    for d in 1u32..=3 {
        for m in 2usize..=4 {
            for r1 in 1usize..=3 {
                let side = m * r1;
                if side.pow(d) > 4096 {
                    continue;
                }
                let lat = LatticeSpec::new(d, side, 2).unwrap();
                let parts = lat.full_region().partition(m).unwrap();
                for alpha in [d as f64 + 0.3, 2.0 * d as f64, 2.0 * d as f64 + 1.0] {
                    let c = PhaseCoupling::for_merge(&lat, &parts, m, alpha).unwrap();
                    assert!(c.is_legal(&lat, alpha).unwrap());
                    // the farthest pair sits just inside the bound
                    assert!(c.max_pair_ratio(&lat, alpha).unwrap() < 1.0);
                }
            }
        }
    }
}

#[test]
fn phase_at_merge_time_is_exactly_pi_for_all_ones() {
    let lat = LatticeSpec::new(1, 4, 2).unwrap();
    let parts = vec![Region::new(vec![0], 2).unwrap(), Region::new(vec![2], 2).unwrap()];
    let c = PhaseCoupling::for_merge(&lat, &parts, 2, 2.5).unwrap();
    let one = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    let mut s = StateVector::product(2, &vec![one; 4], DEFAULT_MEMORY_CAP).unwrap();
    s.evolve_phase(&c, step2_time(2.5, 1, 2.0, 2.0)).unwrap();
    assert!((s.amplitude(15) + Complex64::new(1.0, 0.0)).norm() < 1e-12);
}

fn gate_strategy(q: usize, n: usize) -> impl Strategy<Value = Gate> {
    (0..n, 0usize..3, -3.0f64..3.0).prop_map(move |(target, kind, theta)| match kind {
        0 => Gate::dft(q, target),
        1 => Gate::dft(q, target).adjoint(),
        _ => {
            let m = (0..q * q)
                .map(|k| {
                    if k % (q + 1) == 0 {
                        Complex64::from_polar(1.0, theta * (k / q) as f64)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            Gate::new(q, m, target).unwrap()
        }
    })
}

proptest! {
    #[test]
    fn gates_preserve_norm(seed in 0u64..1000, gates in proptest::collection::vec(gate_strategy(3, 4), 1..8)) {
        let mut s = random_state(3, 4, seed);
        for g in &gates {
            s.apply_gate(g).unwrap();
        }
        prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gate_then_adjoint_is_identity(seed in 0u64..1000, g in gate_strategy(3, 3)) {
        let input = random_state(3, 3, seed);
        let mut s = input.clone();
        s.apply_gate(&g).unwrap();
        s.apply_gate(&g.adjoint()).unwrap();
        for (a, b) in s.amplitudes().iter().zip(input.amplitudes()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn increment_has_order_q(q in 2usize..=4, seed in 0u64..1000, c in 0usize..3, t in 0usize..3) {
        prop_assume!(c != t);
        let input = random_state(q, 3, seed);
        let mut s = input.clone();
        for _ in 0..q {
            s.apply_controlled_increment(c, t).unwrap();
        }
        prop_assert_eq!(s.amplitudes(), input.amplitudes());
        s.apply_controlled_increment(c, t).unwrap();
        s.apply_controlled_decrement(c, t).unwrap();
        prop_assert_eq!(s.amplitudes(), input.amplitudes());
    }

    #[test]
    fn evolution_is_a_semigroup(q in 2usize..=3, seed in 0u64..1000, t1 in 0.0f64..5.0, t2 in 0.0f64..5.0) {
        let c = PhaseCoupling::new(vec![0, 1], vec![vec![2], vec![3]], 0.7).unwrap();
        let input = random_state(q, 4, seed);
        let mut a = input.clone();
        a.evolve_phase(&c, t1).unwrap();
        a.evolve_phase(&c, t2).unwrap();
        let mut b = input.clone();
        b.evolve_phase(&c, t1 + t2).unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
        prop_assert!((a.norm_sqr() - 1.0).abs() < 1e-12);
        a.evolve_phase_backward(&c, t1 + t2).unwrap();
        for (x, y) in a.amplitudes().iter().zip(input.amplitudes()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn diagonal_evolutions_commute(seed in 0u64..1000, t1 in 0.0f64..5.0, t2 in 0.0f64..5.0) {
        let c1 = PhaseCoupling::new(vec![0], vec![vec![1, 2]], 0.3).unwrap();
        let c2 = PhaseCoupling::new(vec![3, 1], vec![vec![0]], 1.1).unwrap();
        let input = random_state(2, 4, seed);
        let mut a = input.clone();
        a.evolve_phase(&c1, t1).unwrap();
        a.evolve_phase(&c2, t2).unwrap();
        let mut b = input;
        b.evolve_phase(&c2, t2).unwrap();
        b.evolve_phase(&c1, t1).unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }
}
