//! Mutable state of the cohort algorithm.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constants::ConstantProfile;
use crate::error::{Error, Result};
use crate::rational::{self, int, Rational};
use crate::system::{all_stats, FloatingColoring, SetStats, SetSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Self {
        match self {
            Self::Plus => Self::Minus,
            Self::Minus => Self::Plus,
        }
    }

    pub fn as_i64(self) -> i64 {
        match self {
            Self::Plus => 1,
            Self::Minus => -1,
        }
    }

    pub fn as_rational(self) -> Rational {
        int(self.as_i64())
    }

    /// `[self, -self]`, the order in which sign choices are tried.
    pub fn both(self) -> [Self; 2] {
        [self, self.flip()]
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Plus => "+",
            Self::Minus => "-",
        })
    }
}

impl Serialize for Sign {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(self.as_i64() as i8)
    }
}

impl<'de> Deserialize<'de> for Sign {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match i8::deserialize(d)? {
            1 => Ok(Self::Plus),
            -1 => Ok(Self::Minus),
            other => Err(serde::de::Error::custom(format!("sign must be +1 or -1, got {other}"))),
        }
    }
}

/// Unordered pair of set indices, stored with `.0 < .1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge(pub usize, pub usize);

impl Edge {
    pub fn new(a: usize, b: usize) -> Self {
        if a <= b {
            Self(a, b)
        } else {
            Self(b, a)
        }
    }

    pub fn contains(&self, s: usize) -> bool {
        self.0 == s || self.1 == s
    }

    pub fn other(&self, s: usize) -> usize {
        if self.0 == s {
            self.1
        } else {
            self.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cohort {
    pub members: BTreeSet<usize>,
    pub banner: usize,
    pub sign: Sign,
    pub rank: u32,
    pub matching: BTreeSet<Edge>,
}

impl Cohort {
    pub fn is_matched(&self, s: usize) -> bool {
        self.matching.iter().any(|e| e.contains(s))
    }

    pub fn unmatched(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied().filter(move |&s| !self.is_matched(s))
    }
}

/// Partition `F = B u G u C_1 u ... u C_m`, the floating coloring and the
/// cohort bookkeeping. The system and profile are shared and never change
/// during a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlgorithmState {
    pub sys: Arc<SetSystem>,
    pub profile: Arc<ConstantProfile>,
    pub chi: FloatingColoring,
    pub benign: BTreeSet<usize>,
    pub pool: BTreeSet<usize>,
    pub cohorts: Vec<Cohort>,
    /// `D[S]`, defined exactly on cohort members.
    pub defeats: BTreeMap<usize, u32>,
}

/// `chi = 0`, every set in the pool, no cohorts.
pub fn init_state(sys: Arc<SetSystem>, profile: Arc<ConstantProfile>) -> AlgorithmState {
    let n = sys.n();
    let pool = (0..sys.num_sets()).collect();
    AlgorithmState {
        sys,
        profile,
        chi: FloatingColoring::zeros(n),
        benign: BTreeSet::new(),
        pool,
        cohorts: Vec::new(),
        defeats: BTreeMap::new(),
    }
}

impl AlgorithmState {
    pub fn d(&self) -> usize {
        self.sys.degree()
    }

    /// `2d - delta`: sets with `Th(S)` at most this are benign.
    pub fn benign_bound(&self) -> i64 {
        2 * self.d() as i64 - i64::from(self.profile.delta())
    }

    pub fn stats(&self) -> Vec<SetStats> {
        all_stats(&self.sys, &self.chi)
    }

    pub fn cohort_of(&self, s: usize) -> Option<usize> {
        self.cohorts.iter().position(|c| c.members.contains(&s))
    }

    pub fn defeats_of(&self, s: usize) -> u32 {
        self.defeats.get(&s).copied().unwrap_or(0)
    }

    pub fn floating_count(&self) -> usize {
        self.chi.floating().count()
    }

    /// `I = F + 4|B| - m + sum_i (|M_i| + |C_i|)` with `F` the number of
    /// frozen elements.
    pub fn potential(&self) -> i64 {
        let frozen = self.chi.frozen_count() as i64;
        let cohort_sum: i64 = self.cohorts.iter().map(|c| (c.matching.len() + c.members.len()) as i64).sum();
        frozen + 4 * self.benign.len() as i64 - self.cohorts.len() as i64 + cohort_sum
    }

    /// Every set lies in exactly one of `B`, `G`, `C_i`; `D` is defined on
    /// cohort members only; banners and ranks are in range.
    pub fn check_structure(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Internal(m));
        let mut seen = vec![0u8; self.sys.num_sets()];
        let members = self.cohorts.iter().flat_map(|c| c.members.iter());
        for &s in self.benign.iter().chain(self.pool.iter()).chain(members) {
            match seen.get_mut(s) {
                Some(count) => *count += 1,
                None => return bad(format!("set index {s} out of range")),
            }
        }
        if let Some(s) = seen.iter().position(|&c| c != 1) {
            return bad(format!("set {s} appears {} times in the partition", seen[s]));
        }
        let in_cohorts: BTreeSet<usize> = self.cohorts.iter().flat_map(|c| c.members.iter().copied()).collect();
        let with_defeats: BTreeSet<usize> = self.defeats.keys().copied().collect();
        if in_cohorts != with_defeats {
            return bad("defeat counts are not defined exactly on cohort members".into());
        }
        for (i, c) in self.cohorts.iter().enumerate() {
            if c.banner >= self.sys.n() {
                return bad(format!("cohort {i} banner {} out of range", c.banner));
            }
            if c.rank >= self.profile.delta() {
                return bad(format!("cohort {i} rank {} >= delta", c.rank));
            }
        }
        Ok(())
    }

    /// The image under `chi -> -chi`, `eps_i -> -eps_i`.
    pub fn mirrored(&self) -> Self {
        let mut m = self.clone();
        m.chi = self.chi.negated();
        for c in &mut m.cohorts {
            c.sign = c.sign.flip();
        }
        m
    }

    pub fn snapshot(&self) -> StateSnapshot {
        StateSnapshot {
            chi: self.chi.values().iter().map(rational::format).collect(),
            benign: self.benign.clone(),
            pool: self.pool.clone(),
            cohorts: self.cohorts.clone(),
            defeats: self.defeats.clone(),
            potential: self.potential(),
        }
    }
}

/// JSON snapshot for traces and debugging; colors are `"p/q"` strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub chi: Vec<String>,
    pub benign: BTreeSet<usize>,
    pub pool: BTreeSet<usize>,
    pub cohorts: Vec<Cohort>,
    pub defeats: BTreeMap<usize, u32>,
    pub potential: i64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn toy_state() -> AlgorithmState {
        let sys =
            SetSystem::new(6, vec![vec![0, 1, 2], vec![1, 2, 3], vec![2, 3, 4], vec![3, 4, 5], vec![0, 5]]).unwrap();
        let profile = ConstantProfile::toy(2, ratio(1, 4), &[2, 2], 2).unwrap();
        init_state(Arc::new(sys), Arc::new(profile))
    }

    #[test]
    fn initial_state() {
        let st = toy_state();
        assert!(st.chi.values().iter().all(|v| *v == int(0)));
        assert_eq!(st.pool.len(), 5);
        assert!(st.benign.is_empty() && st.cohorts.is_empty() && st.defeats.is_empty());
        assert_eq!(st.potential(), 0);
        st.check_structure().unwrap();
    }

    #[test]
    fn potential_example_with_four_members() {
        let sys = SetSystem::new(6, (0..6).map(|i| vec![i]).collect()).unwrap();
        let profile = ConstantProfile::toy(2, ratio(1, 4), &[2, 2], 4).unwrap();
        let mut st = init_state(Arc::new(sys), Arc::new(profile));
        for x in 0..3 {
            st.chi.set(x, int(-1)).unwrap();
        }
        st.pool.clear();
        st.benign = [4, 5].into_iter().collect();
        st.cohorts.push(Cohort {
            members: [0, 1, 2, 3].into_iter().collect(),
            banner: 0,
            sign: Sign::Minus,
            rank: 1,
            matching: [Edge::new(0, 1)].into_iter().collect(),
        });
        assert_eq!(st.potential(), 15);
    }

    #[test]
    fn structure_detects_double_membership() {
        let mut st = toy_state();
        st.benign.insert(0);
        assert!(st.check_structure().is_err());
        let mut st = toy_state();
        st.pool.remove(&4);
        st.cohorts.push(Cohort {
            members: [4].into_iter().collect(),
            banner: 0,
            sign: Sign::Plus,
            rank: 0,
            matching: BTreeSet::new(),
        });
        assert!(st.check_structure().is_err(), "missing defeat count");
        st.defeats.insert(4, 0);
        st.check_structure().unwrap();
    }

    #[test]
    fn sign_serde() {
        assert_eq!(serde_json::to_string(&Sign::Minus).unwrap(), "-1");
        assert_eq!(serde_json::from_str::<Sign>("1").unwrap(), Sign::Plus);
        assert!(serde_json::from_str::<Sign>("0").is_err());
    }

    #[test]
    fn edge_is_normalized() {
        assert_eq!(Edge::new(5, 2), Edge(2, 5));
        assert_eq!(Edge::new(5, 2).other(2), 5);
    }
}
