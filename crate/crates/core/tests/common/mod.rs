//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use discrepancy::engine::{run_from, StepRecord};
use discrepancy::generate::{generate, GeneratorKind, GeneratorSpec};
use discrepancy::rational::{int, ratio};
use discrepancy::state::init_state;
use discrepancy::{AlgorithmState, ConstantProfile, Result, RunOptions, RunResult, SetSystem};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Toy profiles used across the suites. All have `W = 2`, so every
/// cohort creation raises the potential.
pub fn toy_profiles() -> Vec<(&'static str, ConstantProfile)> {
    vec![
        ("delta2-tw2", ConstantProfile::toy(2, ratio(1, 4), &[2, 2], 2).unwrap()),
        ("delta2-tw8", ConstantProfile::toy(2, ratio(1, 4), &[8, 8], 2).unwrap()),
        ("delta3-tw6", ConstantProfile::toy(3, ratio(1, 2), &[6, 6, 6], 2).unwrap()),
    ]
}

pub fn default_toy() -> ConstantProfile {
    toy_profiles().swap_remove(0).1
}

/// The `i`-th instance of a deterministic corpus with `n` in `n_range`
/// and degree in `d_range`. Infeasible draws are retried with a shifted
/// seed.
pub fn corpus_instance(i: u64, n_range: (usize, usize), d_range: (usize, usize)) -> SetSystem {
    for attempt in 0u64.. {
        let seed = i * 1_000 + attempt;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kind = GeneratorKind::ALL[(i % 3) as usize];
        let n = rng.gen_range(n_range.0..=n_range.1);
        let d = rng.gen_range(d_range.0..=d_range.1).min(n);
        let num_sets = rng.gen_range(n.div_ceil(2)..=(n * d / 2).max(1));
        if let Ok(sys) = generate(&GeneratorSpec { kind, n, num_sets, d, seed }) {
            return sys;
        }
    }
    unreachable!()
}

/// A hand-built mid-run state in which the only applicable step is cohort
/// creation: a banner at `chi = 7/8` lies in two pool sets of size 3 with
/// two elements frozen at `-1`, and in one large balanced set that blocks
/// rounding. Six padding sets keep the row count at the number of floating
/// elements; each holds an element at exactly `1 - alpha`, which is nearly
/// frozen but not roundable. `seed` relabels elements and reorders sets.
pub fn cohort_scenario(seed: u64) -> AlgorithmState {
    let mut sets = vec![vec![0, 1, 2], vec![0, 3, 4], vec![0, 5, 6, 7, 8]];
    let mut frozen = Vec::new();
    let mut next = 9;
    for s in sets.iter_mut().take(2) {
        s.extend([next, next + 1]);
        frozen.extend([next, next + 1]);
        next += 2;
    }
    for (a, b) in [(1, 5), (2, 6), (3, 7), (4, 8), (1, 7), (2, 8)] {
        sets.push(vec![a, b, next, next + 1, next + 2]);
        frozen.extend([next, next + 1, next + 2]);
        next += 3;
    }
    let values = [(7, 8), (3, 4), (3, 4), (3, 4), (3, 4), (-1, 4), (-1, 4), (-1, 4), (-1, 8)];

    let n = next;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if seed != 0 {
        perm.shuffle(&mut rng);
        sets.shuffle(&mut rng);
    }
    let sets = sets.into_iter().map(|s| s.into_iter().map(|x| perm[x]).collect()).collect();
    let sys = SetSystem::new(n, sets).unwrap();
    let profile = ConstantProfile::toy(2, ratio(1, 4), &[8, 8], 2).unwrap();
    let mut st = init_state(Arc::new(sys), Arc::new(profile));
    for (x, (a, b)) in values.into_iter().enumerate() {
        st.chi.set(perm[x], ratio(a, b)).unwrap();
    }
    for x in frozen {
        st.chi.set(perm[x], int(-1)).unwrap();
    }
    st
}

pub type Transition = (AlgorithmState, StepRecord, AlgorithmState);

/// Runs from `st`, keeping every `(before, record, after)` triple.
pub fn observed_run(st: AlgorithmState, opts: &RunOptions) -> (Result<RunResult>, Vec<Transition>) {
    let mut steps = Vec::new();
    let mut obs =
        |a: &AlgorithmState, r: &StepRecord, b: &AlgorithmState| steps.push((a.clone(), r.clone(), b.clone()));
    let res = run_from(st, opts, Some(&mut obs));
    (res, steps)
}

pub fn fresh_state(sys: &SetSystem, profile: &ConstantProfile) -> AlgorithmState {
    init_state(Arc::new(sys.clone()), Arc::new(profile.clone()))
}
