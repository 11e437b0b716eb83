//! Ground sets, set families and floating colorings.
//!
//! Elements are the dense indices `0..n`; each set is stored as a strictly
//! increasing index vector. Sets may repeat inside the family; they are
//! distinct members by position.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, int, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetSystem {
    n: usize,
    sets: Vec<Vec<usize>>,
    degree: usize,
    /// element -> indices of the sets containing it, ascending
    membership: Vec<Vec<usize>>,
}

/// JSON instance document: `{"n": 3, "sets": [[0, 1], [1, 2]]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub n: usize,
    pub sets: Vec<Vec<usize>>,
}

impl SetSystem {
    /// Builds a canonical system. Element order inside a set is irrelevant;
    /// repeated elements are rejected.
    pub fn new(n: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let mut canonical = Vec::with_capacity(sets.len());
        let mut membership = vec![Vec::new(); n];
        for (idx, mut set) in sets.into_iter().enumerate() {
            set.sort_unstable();
            for pair in set.windows(2) {
                if pair[0] == pair[1] {
                    return Err(Error::DuplicateElement { set: idx, element: pair[0] });
                }
            }
            if let Some(&last) = set.last() {
                if last >= n {
                    return Err(Error::ElementOutOfRange { set: idx, element: last, n });
                }
            }
            for &x in &set {
                membership[x].push(idx);
            }
            canonical.push(set);
        }
        let degree = membership.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Self { n, sets: canonical, degree, membership })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn set(&self, s: usize) -> &[usize] {
        &self.sets[s]
    }

    pub fn num_sets(&self) -> usize {
        self.sets.len()
    }

    /// Maximum number of sets containing a single element.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Sets containing `x`, ascending.
    pub fn sets_containing(&self, x: usize) -> &[usize] {
        &self.membership[x]
    }

    pub fn contains(&self, s: usize, x: usize) -> bool {
        self.sets[s].binary_search(&x).is_ok()
    }

    pub fn to_doc(&self) -> InstanceDoc {
        InstanceDoc { n: self.n, sets: self.sets.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("instance serializes")
    }

    /// Same family with elements renamed by `perm` (`x -> perm[x]`).
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let sets = self.sets.iter().map(|s| s.iter().map(|&x| perm[x]).collect()).collect();
        Self::new(self.n, sets)
    }
}

pub fn parse_set_system(text: &str) -> Result<SetSystem> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    SetSystem::new(doc.n, doc.sets)
}

/// A map `X -> [-1, 1]` with exact rational values. An element is frozen
/// exactly when its value is `+1` or `-1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FloatingColoring {
    #[serde(with = "rational::vec_as_string")]
    values: Vec<Rational>,
}

impl FloatingColoring {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![Rational::zero(); n] }
    }

    pub fn new(values: Vec<Rational>) -> Result<Self> {
        for (x, v) in values.iter().enumerate() {
            if v.abs() > Rational::one() {
                return Err(Error::ColorOutOfRange { element: x, value: rational::format(v) });
            }
        }
        Ok(Self { values })
    }

    /// A genuine two-coloring given as signs.
    pub fn from_signs(signs: &[i8]) -> Result<Self> {
        let values = signs
            .iter()
            .enumerate()
            .map(|(x, &c)| match c {
                1 | -1 => Ok(int(c.into())),
                _ => Err(Error::NotFrozen { element: x, value: c.to_string() }),
            })
            .collect::<Result<_>>()?;
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, x: usize) -> &Rational {
        &self.values[x]
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn set(&mut self, x: usize, v: Rational) -> Result<()> {
        if v.abs() > Rational::one() {
            return Err(Error::ColorOutOfRange { element: x, value: rational::format(&v) });
        }
        self.values[x] = v;
        Ok(())
    }

    pub fn is_frozen(&self, x: usize) -> bool {
        rational::is_unit(&self.values[x])
    }

    pub fn frozen_count(&self) -> usize {
        (0..self.values.len()).filter(|&x| self.is_frozen(x)).count()
    }

    pub fn floating(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.values.len()).filter(|&x| !self.is_frozen(x))
    }

    pub fn all_frozen(&self) -> bool {
        (0..self.values.len()).all(|x| self.is_frozen(x))
    }

    pub fn negated(&self) -> Self {
        Self { values: self.values.iter().map(|v| -v).collect() }
    }

    /// The `+1/-1` signs of an all-frozen coloring.
    pub fn signs(&self) -> Result<Vec<i8>> {
        self.values
            .iter()
            .enumerate()
            .map(|(x, v)| {
                if !rational::is_unit(v) {
                    Err(Error::NotFrozen { element: x, value: rational::format(v) })
                } else if v.is_positive() {
                    Ok(1)
                } else {
                    Ok(-1)
                }
            })
            .collect()
    }

    /// Sum of colors over `set`.
    pub fn sum(&self, set: &[usize]) -> Rational {
        set.iter().fold(Rational::zero(), |acc, &x| acc + &self.values[x])
    }
}

/// Per-set quantities: floating count, total color, frozen and floating
/// parts of the color, and the two one-sided threats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetStats {
    pub sz: usize,
    pub chi: Rational,
    pub fr: Rational,
    pub fl: Rational,
    pub th_neg: Rational,
    pub th_pos: Rational,
    pub th: Rational,
}

impl SetStats {
    pub fn compute(set: &[usize], chi: &FloatingColoring) -> Self {
        let mut sz = 0usize;
        let mut fr = Rational::zero();
        let mut fl = Rational::zero();
        for &x in set {
            if chi.is_frozen(x) {
                fr += chi.get(x);
            } else {
                sz += 1;
                fl += chi.get(x);
            }
        }
        let size = int(sz as i64);
        let th_neg = &size - &fr;
        let th_pos = &size + &fr;
        let th = th_neg.clone().max(th_pos.clone());
        Self { sz, chi: &fr + &fl, fr, fl, th_neg, th_pos, th }
    }

    /// Threat in direction `sign`: `Th+` for `+1`, `Th-` for `-1`.
    pub fn threat(&self, sign: crate::state::Sign) -> &Rational {
        match sign {
            crate::state::Sign::Plus => &self.th_pos,
            crate::state::Sign::Minus => &self.th_neg,
        }
    }
}

pub fn set_stats(sys: &SetSystem, chi: &FloatingColoring, s: usize) -> SetStats {
    SetStats::compute(sys.set(s), chi)
}

pub fn all_stats(sys: &SetSystem, chi: &FloatingColoring) -> Vec<SetStats> {
    sys.sets().iter().map(|s| SetStats::compute(s, chi)).collect()
}

/// `max_S |chi(S)|`.
pub fn discrepancy_of(sys: &SetSystem, chi: &FloatingColoring) -> Rational {
    sys.sets().iter().map(|s| chi.sum(s).abs()).max().unwrap_or_else(Rational::zero)
}

/// Output document for a genuine coloring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColoringDoc {
    pub colors: Vec<i8>,
    pub discrepancy: i64,
}

impl ColoringDoc {
    pub fn from_coloring(sys: &SetSystem, chi: &FloatingColoring) -> Result<Self> {
        let colors = chi.signs()?;
        let disc = discrepancy_of(sys, chi);
        Ok(Self { colors, discrepancy: disc.to_integer().try_into().expect("small discrepancy") })
    }
}

/// Per-set `|chi(S)|` of a genuine coloring, checked against the system.
pub fn verify_coloring(sys: &SetSystem, colors: &[i8]) -> Result<Vec<i64>> {
    if colors.len() != sys.n() {
        return Err(Error::LengthMismatch { expected: sys.n(), got: colors.len() });
    }
    FloatingColoring::from_signs(colors)?;
    Ok(sys.sets().iter().map(|s| s.iter().map(|&x| i64::from(colors[x])).sum::<i64>().abs()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn parse_examples() {
        let sys = parse_set_system(r#"{"n":2,"sets":[[0,1]]}"#).unwrap();
        assert_eq!((sys.n(), sys.num_sets(), sys.degree()), (2, 1, 1));
        let tri = parse_set_system(r#"{"n":3,"sets":[[0,1],[1,2],[0,2]]}"#).unwrap();
        assert_eq!(tri.degree(), 2);
        assert!(matches!(
            parse_set_system(r#"{"n":2,"sets":[[0,0]]}"#),
            Err(Error::DuplicateElement { set: 0, element: 0 })
        ));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_set_system(r#"{"n":2,"sets":[]}"#), Err(Error::EmptyFamily)));
        assert!(matches!(
            parse_set_system(r#"{"n":2,"sets":[[0,2]]}"#),
            Err(Error::ElementOutOfRange { set: 0, element: 2, n: 2 })
        ));
        assert!(matches!(parse_set_system(r#"{"n":2}"#), Err(Error::Malformed(_))));
        assert!(matches!(parse_set_system("not json"), Err(Error::Malformed(_))));
    }

    #[test]
    fn canonical_order_and_repeated_sets() {
        let sys = SetSystem::new(4, vec![vec![3, 1, 0], vec![0, 1, 3]]).unwrap();
        assert_eq!(sys.set(0), &[0, 1, 3]);
        assert_eq!(sys.set(1), &[0, 1, 3]);
        assert_eq!(sys.degree(), 2);
        assert_eq!(sys.sets_containing(2), &[] as &[usize]);
        assert_eq!(sys.sets_containing(1), &[0, 1]);
    }

    #[test]
    fn stats_all_floating_zero() {
        let sys = SetSystem::new(5, vec![vec![0, 1, 2, 3, 4]]).unwrap();
        let st = set_stats(&sys, &FloatingColoring::zeros(5), 0);
        assert_eq!(st.sz, 5);
        assert_eq!(st.chi, int(0));
        assert_eq!(st.th_neg, int(5));
        assert_eq!(st.th_pos, int(5));
    }

    #[test]
    fn stats_mixed() {
        let sys = SetSystem::new(2, vec![vec![0, 1]]).unwrap();
        let chi = FloatingColoring::new(vec![int(1), ratio(1, 2)]).unwrap();
        let st = set_stats(&sys, &chi, 0);
        assert_eq!(st.sz, 1);
        assert_eq!(st.fr, int(1));
        assert_eq!(st.fl, ratio(1, 2));
        assert_eq!(st.chi, ratio(3, 2));
        assert_eq!(st.th_neg, int(0));
        assert_eq!(st.th_pos, int(2));
    }

    #[test]
    fn stats_fully_frozen_positive() {
        let sys = SetSystem::new(3, vec![vec![0, 1, 2]]).unwrap();
        let chi = FloatingColoring::from_signs(&[1, 1, 1]).unwrap();
        let st = set_stats(&sys, &chi, 0);
        assert_eq!(st.sz, 0);
        assert_eq!(st.th_pos, int(3));
        assert_eq!(st.th_neg, int(-3));
        assert_eq!(st.th, int(3));
    }

    #[test]
    fn discrepancy_examples() {
        let sys = SetSystem::new(2, vec![vec![0], vec![1], vec![0, 1]]).unwrap();
        assert_eq!(discrepancy_of(&sys, &FloatingColoring::zeros(2)), int(0));
        let chi = FloatingColoring::from_signs(&[1, -1]).unwrap();
        assert_eq!(discrepancy_of(&sys, &chi), int(1));
        let pair = SetSystem::new(2, vec![vec![0, 1]]).unwrap();
        let plus = FloatingColoring::from_signs(&[1, 1]).unwrap();
        assert_eq!(discrepancy_of(&pair, &plus), int(2));
    }

    #[test]
    fn coloring_range_checked() {
        assert!(FloatingColoring::new(vec![ratio(3, 2)]).is_err());
        let mut chi = FloatingColoring::zeros(1);
        assert!(chi.set(0, int(-2)).is_err());
        assert!(FloatingColoring::from_signs(&[0]).is_err());
    }

    #[test]
    fn verify_examples() {
        let tri = SetSystem::new(3, vec![vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        assert_eq!(verify_coloring(&tri, &[1, -1, 1]).unwrap(), vec![0, 0, 2]);
        let pair = SetSystem::new(2, vec![vec![0, 1]]).unwrap();
        assert_eq!(verify_coloring(&pair, &[1, 1]).unwrap(), vec![2]);
        assert!(matches!(verify_coloring(&pair, &[1, 0]), Err(Error::NotFrozen { element: 1, .. })));
        assert!(matches!(verify_coloring(&pair, &[1]), Err(Error::LengthMismatch { .. })));
    }
}
