//! Seeded instance generators. All randomness comes from ChaCha8 seeded
//! with `seed_from_u64`, so a spec reproduces the same system everywhere.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::SetSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// Sets of size about `d..3d` drawn from elements with spare degree.
    RandomBoundedDegree,
    /// Every element copied `d` times, shuffled and dealt round-robin.
    NearRegular,
    /// At least half of the sets have exactly `d` elements.
    TightSets,
}

impl GeneratorKind {
    pub const ALL: [Self; 3] = [Self::RandomBoundedDegree, Self::NearRegular, Self::TightSets];
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RandomBoundedDegree => "random-bounded-degree",
            Self::NearRegular => "near-regular",
            Self::TightSets => "tight-sets",
        })
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::Malformed(format!("unknown generator kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub num_sets: usize,
    pub d: usize,
    pub seed: u64,
}

fn infeasible(msg: impl Into<String>) -> Error {
    Error::InfeasibleGenerator(msg.into())
}

/// Picks `size` distinct elements with remaining capacity and charges them.
fn draw(rng: &mut ChaCha8Rng, capacity: &mut [usize], size: usize) -> Vec<usize> {
    let open: Vec<usize> = (0..capacity.len()).filter(|&x| capacity[x] > 0).collect();
    let mut set: Vec<usize> = open.choose_multiple(rng, size.min(open.len())).copied().collect();
    set.sort_unstable();
    for &x in &set {
        capacity[x] -= 1;
    }
    set
}

pub fn generate(spec: &GeneratorSpec) -> Result<SetSystem> {
    let GeneratorSpec { kind, n, num_sets, d, seed } = *spec;
    if n == 0 || num_sets == 0 || d == 0 {
        return Err(infeasible("n, num_sets and d must be positive"));
    }
    if num_sets > n.saturating_mul(d) {
        return Err(infeasible(format!("{num_sets} nonempty sets need more than n d = {} incidences", n * d)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut capacity = vec![d; n];
    let sets = match kind {
        GeneratorKind::RandomBoundedDegree => {
            let mut sets = Vec::with_capacity(num_sets);
            for i in 0..num_sets {
                // Keep one incidence per remaining set in reserve.
                let spare: usize = capacity.iter().sum::<usize>() - (num_sets - i - 1);
                let size = rng.gen_range(d..=3 * d).min(spare).max(1);
                sets.push(draw(&mut rng, &mut capacity, size));
            }
            sets
        }
        GeneratorKind::NearRegular => {
            let mut deck: Vec<usize> = (0..n).flat_map(|x| std::iter::repeat_n(x, d)).collect();
            deck.shuffle(&mut rng);
            let mut sets = vec![Vec::new(); num_sets];
            for (k, x) in deck.into_iter().enumerate() {
                let s = &mut sets[k % num_sets];
                if !s.contains(&x) {
                    s.push(x);
                }
            }
            for s in &mut sets {
                s.sort_unstable();
            }
            sets
        }
        GeneratorKind::TightSets => {
            let tight = num_sets.div_ceil(2);
            if tight.saturating_mul(d) > n.saturating_mul(d) || d > n {
                return Err(infeasible(format!("{tight} sets of size d = {d} do not fit in n = {n} elements")));
            }
            let mut sets = Vec::with_capacity(num_sets);
            for _ in 0..tight {
                let s = draw(&mut rng, &mut capacity, d);
                if s.len() < d {
                    return Err(infeasible(format!("ran out of degree capacity for a set of size d = {d}")));
                }
                sets.push(s);
            }
            for _ in tight..num_sets {
                let size = rng.gen_range(1..=2 * d);
                let s = draw(&mut rng, &mut capacity, size);
                if s.is_empty() {
                    return Err(infeasible("ran out of degree capacity"));
                }
                sets.push(s);
            }
            sets.shuffle(&mut rng);
            sets
        }
    };
    if sets.iter().any(Vec::is_empty) {
        return Err(infeasible("a generated set came out empty"));
    }
    SetSystem::new(n, sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(kind: GeneratorKind, n: usize, num_sets: usize, d: usize, seed: u64) -> GeneratorSpec {
        GeneratorSpec { kind, n, num_sets, d, seed }
    }

    #[test]
    fn bounded_degree_example() {
        let sys = generate(&spec(GeneratorKind::RandomBoundedDegree, 20, 10, 3, 1)).unwrap();
        assert!(sys.degree() <= 3);
        assert_eq!(sys.num_sets(), 10);
    }

    #[test]
    fn deterministic() {
        for kind in GeneratorKind::ALL {
            let s = spec(kind, 30, 12, 4, 99);
            assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        }
    }

    #[test]
    fn tight_sets_are_tight() {
        let sys = generate(&spec(GeneratorKind::TightSets, 40, 20, 4, 5)).unwrap();
        let tight = sys.sets().iter().filter(|s| s.len() == 4).count();
        assert!(tight * 2 >= sys.num_sets());
    }

    #[test]
    fn infeasible_specs() {
        assert!(generate(&spec(GeneratorKind::NearRegular, 2, 10, 1, 0)).is_err());
        assert!(generate(&spec(GeneratorKind::TightSets, 3, 2, 4, 0)).is_err());
        assert!(generate(&spec(GeneratorKind::RandomBoundedDegree, 0, 1, 1, 0)).is_err());
    }

    #[test]
    fn kind_round_trip() {
        for kind in GeneratorKind::ALL {
            assert_eq!(kind.to_string().parse::<GeneratorKind>().unwrap(), kind);
        }
        assert!("dense".parse::<GeneratorKind>().is_err());
    }

    proptest! {
        #[test]
        fn degree_bound_respected(
            kind in prop::sample::select(GeneratorKind::ALL.to_vec()),
            n in 4usize..60,
            d in 1usize..6,
            sets in 1usize..30,
            seed in any::<u64>(),
        ) {
            let s = spec(kind, n, sets.min(n * d / 2).max(1), d.min(n), seed);
            if let Ok(sys) = generate(&s) {
                prop_assert!(sys.degree() <= s.d);
                prop_assert_eq!(sys.num_sets(), s.num_sets);
            }
        }
    }
}
