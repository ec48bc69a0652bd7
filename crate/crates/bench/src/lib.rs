//! Fixtures shared by the benchmarks.

use num_complex::Complex64;
use powerlaw_ghz::sampling::haar_state_seeded;
use powerlaw_ghz::scheduler::{plan, ScheduleOptions, SchedulePlan};
use powerlaw_ghz::simulator::DEFAULT_MEMORY_CAP;
use powerlaw_ghz::{LatticeSpec, StateVector};

/// A chain of `2^(levels+1)` sites built from forced `m = 2` merges.
pub struct Chain {
    pub lattice: LatticeSpec,
    pub plan: SchedulePlan,
    pub input: StateVector,
}

pub fn chain(levels: usize, q: usize, alpha: f64) -> Chain {
    let side = 2usize << levels;
    let opts = ScheduleOptions {
        forced_m: Some(vec![2; levels]),
        q,
        ..Default::default()
    };
    let plan = plan(alpha, 1, side as u64, 2, &opts).expect("forced chain plan");
    let lattice = LatticeSpec::new(1, side, q).expect("chain lattice");
    let mut zero = vec![Complex64::new(0.0, 0.0); q];
    zero[0] = Complex64::new(1.0, 0.0);
    let mut sites = vec![zero; side];
    sites[0] = haar_state_seeded(q, 1);
    let input = StateVector::init_product(&lattice, &sites, DEFAULT_MEMORY_CAP).expect("input state");
    Chain { lattice, plan, input }
}
