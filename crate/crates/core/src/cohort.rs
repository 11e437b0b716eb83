//! Seed search for new cohorts and the charge accounting that explains why
//! a seed exists.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::{self, big, int, Rational};
use crate::state::{AlgorithmState, Sign};
use crate::system::set_stats;

/// `B+` and `B-`: floating elements with `+-chi(x) >= 1 - alpha`.
pub fn nearly_frozen_sets(st: &AlgorithmState) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let edge = int(1) - st.profile.alpha();
    let mut plus = BTreeSet::new();
    let mut minus = BTreeSet::new();
    for x in st.chi.floating() {
        let v = st.chi.get(x);
        if *v >= edge {
            plus.insert(x);
        } else if -v >= edge {
            minus.insert(x);
        }
    }
    (plus, minus)
}

/// Strict test used by rounding and cohort creation: `sign chi(x) > 1 - alpha`.
pub fn beyond_threshold(st: &AlgorithmState, x: usize, sign: Sign) -> bool {
    sign.as_rational() * st.chi.get(x) > int(1) - st.profile.alpha()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSeed {
    pub banner: usize,
    pub sign: Sign,
    pub rank: u32,
    pub members: BTreeSet<usize>,
}

impl CohortSeed {
    /// Checks the seed against `st`; the error names the first violated
    /// condition.
    pub fn validate(&self, st: &AlgorithmState) -> Result<(), String> {
        if self.rank >= st.profile.delta() {
            return Err(format!("rank {} >= delta", self.rank));
        }
        if self.members.len() as u64 != st.profile.w() {
            return Err(format!("{} members, W = {}", self.members.len(), st.profile.w()));
        }
        if st.chi.is_frozen(self.banner) || !beyond_threshold(st, self.banner, self.sign) {
            return Err(format!("banner {} has chi = {}", self.banner, rational::format(st.chi.get(self.banner))));
        }
        let target = int(2 * st.d() as i64 - i64::from(self.rank));
        for &s in &self.members {
            if !st.pool.contains(&s) {
                return Err(format!("set {s} is not in the pool"));
            }
            if !st.sys.contains(s, self.banner) {
                return Err(format!("set {s} misses the banner"));
            }
            let stats = set_stats(&st.sys, &st.chi, s);
            if stats.sz > st.d() {
                return Err(format!("set {s} has Sz = {} > d", stats.sz));
            }
            if *stats.threat(self.sign.flip()) != target {
                return Err(format!(
                    "set {s} has Th{} = {}, expected {}",
                    self.sign.flip(),
                    rational::format(stats.threat(self.sign.flip())),
                    rational::format(&target)
                ));
            }
        }
        Ok(())
    }

    pub fn mirrored(&self) -> Self {
        Self { sign: self.sign.flip(), ..self.clone() }
    }
}

/// Direct search for a cohort seed: for `r = 0, 1, ...` and banners in
/// ascending order, collect the pool sets through the banner with
/// `Sz <= d` and opposite threat `2d - r`; the first group of at least `W`
/// sets yields the `W` lowest indices.
pub fn find_seed(st: &AlgorithmState) -> Option<CohortSeed> {
    let w = usize::try_from(st.profile.w()).ok()?;
    let d = st.d();
    let stats = st.stats();
    let candidates: Vec<(usize, Sign)> = st
        .chi
        .floating()
        .filter_map(|x| Sign::Plus.both().into_iter().find(|&s| beyond_threshold(st, x, s)).map(|s| (x, s)))
        .collect();
    for r in 0..st.profile.delta() {
        let target = int(2 * d as i64 - i64::from(r));
        for &(b, sign) in &candidates {
            let members: BTreeSet<usize> = st
                .sys
                .sets_containing(b)
                .iter()
                .copied()
                .filter(|s| st.pool.contains(s))
                .filter(|&s| stats[s].sz <= d && *stats[s].threat(sign.flip()) == target)
                .take(w)
                .collect();
            if members.len() == w {
                return Some(CohortSeed { banner: b, sign, rank: r, members });
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum ChargeCase {
    /// `x in S n B+`, `Sz <= d`, `Th- > 2d - delta`.
    NastyPlus = 1,
    /// `x in S n B-`, `Sz <= d`, `Th+ > 2d - delta`.
    NastyMinus = 2,
    /// `x in S n B+`, `Sz >= d + 1`.
    LargePlus = 3,
    /// `x in S n B-`, `Sz >= d + 1`.
    LargeMinus = 4,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChargeEntry {
    pub element: usize,
    pub set: usize,
    pub case: ChargeCase,
    #[serde(with = "rational::as_string")]
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChargeLedger {
    pub entries: Vec<ChargeEntry>,
    /// Sum of charges per pool set; every pool set is present.
    pub set_totals: BTreeMap<usize, Rational>,
    /// Sum of charges per element of `B+ u B-`.
    pub element_totals: BTreeMap<usize, Rational>,
    /// Pool sets that qualify for a nasty case but meet no nearly-frozen
    /// element of the matching sign.
    pub anomalies: Vec<usize>,
}

impl ChargeLedger {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("element,set,case,value\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{},{}", e.element, e.set, e.case as u8, rational::format(&e.value));
        }
        out
    }
}

/// Evaluates `Ch(x, S)` for every pool set `S` and `x in B+ u B-`.
pub fn charge_ledger(st: &AlgorithmState) -> ChargeLedger {
    let (plus, minus) = nearly_frozen_sets(st);
    let d = st.d();
    let bound = int(st.benign_bound());
    let stats = st.stats();
    let mut entries = Vec::new();
    let mut set_totals = BTreeMap::new();
    let mut element_totals: BTreeMap<usize, Rational> =
        plus.iter().chain(minus.iter()).map(|&x| (x, Rational::zero())).collect();
    let mut anomalies = Vec::new();

    for &s in &st.pool {
        let stat = &stats[s];
        let members = st.sys.set(s);
        let in_plus: Vec<usize> = members.iter().copied().filter(|x| plus.contains(x)).collect();
        let in_minus: Vec<usize> = members.iter().copied().filter(|x| minus.contains(x)).collect();
        let excess = stat.sz as i64 - d as i64;
        let mut total = Rational::zero();
        let mut charge = |xs: &[usize], case: ChargeCase, numer: Rational| {
            if xs.is_empty() {
                return;
            }
            let value = numer / int(xs.len() as i64);
            for &x in xs {
                entries.push(ChargeEntry { element: x, set: s, case, value: value.clone() });
                *element_totals.get_mut(&x).expect("nearly frozen") += &value;
                total += &value;
            }
        };
        if stat.sz <= d {
            let nasty_plus = stat.th_neg > bound;
            let nasty_minus = stat.th_pos > bound;
            if nasty_plus {
                charge(&in_plus, ChargeCase::NastyPlus, int(excess - 1));
            }
            if nasty_minus {
                charge(&in_minus, ChargeCase::NastyMinus, int(excess - 1));
            }
            let covered = (nasty_plus && !in_plus.is_empty()) || (nasty_minus && !in_minus.is_empty());
            if (nasty_plus || nasty_minus) && !covered {
                anomalies.push(s);
            }
        } else {
            charge(&in_plus, ChargeCase::LargePlus, int(excess) / int(4));
            charge(&in_minus, ChargeCase::LargeMinus, int(excess) / int(4));
        }
        set_totals.insert(s, total);
    }
    entries.sort_by_key(|e| (e.element, e.set));
    ChargeLedger { entries, set_totals, element_totals, anomalies }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub set: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChargeDiagnostics {
    /// Large or nasty pool sets whose total charge is not below `Sz(S) - d`.
    pub undercount_violations: Vec<Violation>,
    /// Elements with negative total charge, ascending.
    pub negative_elements: Vec<usize>,
    /// `sum_{S in G} (Sz(S) - d)`.
    #[serde(with = "rational::as_string")]
    pub pool_excess: Rational,
    /// Pool excess is at most zero, and zero only without cohorts.
    pub pool_excess_ok: bool,
    /// `Ch(b, S) >= -(delta + 2 Tw_{delta-1} + 2) / d` over `S in N_b`.
    pub neg_bound_violations: Vec<Violation>,
    /// `Ch(b, S) >= 1 / (8 + 4 delta)` over `S in P_b`.
    pub pos_bound_violations: Vec<Violation>,
    pub anomalies: Vec<usize>,
}

impl ChargeDiagnostics {
    pub fn undercount_holds(&self) -> bool {
        self.undercount_violations.is_empty() && self.anomalies.is_empty()
    }

    pub fn has_negative_element(&self) -> bool {
        !self.negative_elements.is_empty()
    }
}

/// Checks the charge inequalities on a concrete state. Intended for states
/// where only cohort creation can fire; report-only.
pub fn charge_diagnostics(st: &AlgorithmState) -> ChargeDiagnostics {
    let ledger = charge_ledger(st);
    let stats = st.stats();
    let d = st.d() as i64;
    let delta = i64::from(st.profile.delta());
    let bound = int(st.benign_bound());

    let undercount_violations = ledger
        .set_totals
        .iter()
        .filter(|(&s, _)| stats[s].sz as i64 > d || stats[s].th > bound)
        .filter(|(&s, total)| **total >= int(stats[s].sz as i64 - d))
        .map(|(&s, total)| Violation {
            set: s,
            element: None,
            detail: format!("total {} >= Sz - d = {}", rational::format(total), stats[s].sz as i64 - d),
        })
        .collect();
    let negative_elements = ledger.element_totals.iter().filter(|(_, t)| t.is_negative()).map(|(&x, _)| x).collect();
    let pool_excess: Rational = st.pool.iter().map(|&s| int(stats[s].sz as i64 - d)).sum();
    let pool_excess_ok = pool_excess.is_negative() || (pool_excess.is_zero() && st.cohorts.is_empty());

    let tw_top = big(st.profile.tw(st.profile.delta() - 1));
    let neg_floor = -(int(delta + 2) + tw_top * int(2)) / int(d);
    let pos_floor = Rational::new(1.into(), (8 + 4 * delta).into());
    let charge_of: BTreeMap<(usize, usize), &Rational> =
        ledger.entries.iter().map(|e| ((e.element, e.set), &e.value)).collect();
    let zero = Rational::zero();
    let (plus, minus) = nearly_frozen_sets(st);
    let mut neg_bound_violations = Vec::new();
    let mut pos_bound_violations = Vec::new();
    for (b, sign) in plus.iter().map(|&b| (b, Sign::Plus)).chain(minus.iter().map(|&b| (b, Sign::Minus))) {
        for &s in st.sys.sets_containing(b).iter().filter(|s| st.pool.contains(s)) {
            let stat = &stats[s];
            let ch = charge_of.get(&(b, s)).copied().unwrap_or(&zero);
            let in_n = stat.sz as i64 <= d && *stat.threat(sign.flip()) > bound;
            let in_p = stat.sz as i64 > d && *stat.threat(sign) > bound;
            if in_n && *ch < neg_floor {
                neg_bound_violations.push(Violation {
                    set: s,
                    element: Some(b),
                    detail: format!("Ch = {} < {}", rational::format(ch), rational::format(&neg_floor)),
                });
            }
            if in_p && *ch < pos_floor {
                pos_bound_violations.push(Violation {
                    set: s,
                    element: Some(b),
                    detail: format!("Ch = {} < {}", rational::format(ch), rational::format(&pos_floor)),
                });
            }
        }
    }

    ChargeDiagnostics {
        undercount_violations,
        negative_elements,
        pool_excess,
        pool_excess_ok,
        neg_bound_violations,
        pos_bound_violations,
        anomalies: ledger.anomalies,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ConstantProfile;
    use crate::rational::ratio;
    use crate::state::init_state;
    use crate::system::SetSystem;
    use std::sync::Arc;

    fn state(n: usize, sets: Vec<Vec<usize>>, delta: u32, w: u64) -> AlgorithmState {
        let sys = SetSystem::new(n, sets).unwrap();
        let tw: Vec<i64> = vec![i64::from(delta); delta as usize];
        let profile = ConstantProfile::toy(delta, ratio(1, 4), &tw, w).unwrap();
        init_state(Arc::new(sys), Arc::new(profile))
    }

    #[test]
    fn thresholds_differ_at_three_quarters() {
        let mut st = state(3, vec![vec![0, 1, 2]], 2, 1);
        st.chi.set(0, ratio(3, 4)).unwrap();
        st.chi.set(1, int(-1)).unwrap();
        let (plus, minus) = nearly_frozen_sets(&st);
        assert_eq!(plus, [0].into_iter().collect());
        assert!(minus.is_empty(), "frozen elements are excluded");
        assert!(!beyond_threshold(&st, 0, Sign::Plus));
        st.chi.set(1, int(0)).unwrap();
        st.chi.set(0, int(0)).unwrap();
        let (plus, minus) = nearly_frozen_sets(&st);
        assert!(plus.is_empty() && minus.is_empty());
    }

    /// Element 0 is the banner; sets 0 and 1 contain it with one frozen `-1`
    /// element each, so `Sz = 2 <= d` and `Th- = Sz - Fr = 3 = 2d - 1`.
    fn seed_state() -> AlgorithmState {
        let sets = vec![vec![0, 1, 4], vec![0, 2, 5], vec![6, 7]];
        let mut st = state(8, sets, 2, 2);
        st.chi.set(0, ratio(7, 8)).unwrap();
        for x in 4..6 {
            st.chi.set(x, int(-1)).unwrap();
        }
        st
    }

    #[test]
    fn finds_constructed_seed() {
        let st = seed_state();
        assert_eq!(st.d(), 2);
        let seed = find_seed(&st).unwrap();
        assert_eq!(seed, CohortSeed { banner: 0, sign: Sign::Plus, rank: 1, members: [0, 1].into_iter().collect() });
        seed.validate(&st).unwrap();

        let mirrored = st.mirrored();
        let seed_m = find_seed(&mirrored).unwrap();
        assert_eq!(seed_m, seed.mirrored());
    }

    #[test]
    fn lower_banner_wins() {
        let sets = vec![vec![0, 1, 4], vec![0, 1, 5], vec![2, 3]];
        let mut st = state(6, sets, 2, 2);
        st.chi.set(0, ratio(7, 8)).unwrap();
        st.chi.set(1, ratio(7, 8)).unwrap();
        st.chi.set(4, int(-1)).unwrap();
        st.chi.set(5, int(-1)).unwrap();
        let seed = find_seed(&st).unwrap();
        assert_eq!(seed.banner, 0);
    }

    #[test]
    fn no_candidate_no_seed() {
        assert!(find_seed(&state(2, vec![vec![0, 1]], 2, 1)).is_none());
    }

    #[test]
    fn validate_rejects_bad_seeds() {
        let st = seed_state();
        let mut seed = find_seed(&st).unwrap();
        seed.members.insert(3);
        assert!(seed.validate(&st).is_err());
        let seed = CohortSeed { banner: 0, sign: Sign::Minus, rank: 1, members: [0, 1].into_iter().collect() };
        assert!(seed.validate(&st).is_err());
    }

    #[test]
    fn large_set_charge() {
        // d = 1, Sz = 15 = d + 14; ten elements at 7/8.
        let sets = vec![(0..15).collect::<Vec<_>>()];
        let mut st = state(15, sets, 2, 1);
        for x in 0..10 {
            st.chi.set(x, ratio(7, 8)).unwrap();
        }
        let ledger = charge_ledger(&st);
        assert_eq!(ledger.entries.len(), 10);
        assert!(ledger.entries.iter().all(|e| e.case == ChargeCase::LargePlus && e.value == ratio(14, 40)));
        assert_eq!(ledger.set_totals[&0], ratio(14, 4));
        assert!(ledger.to_csv().starts_with("element,set,case,value\n0,0,3,7/20\n"));
    }

    #[test]
    fn nasty_set_charge_is_negative() {
        let st = seed_state();
        let ledger = charge_ledger(&st);
        let e = ledger.entries.iter().find(|e| e.set == 0).unwrap();
        assert_eq!(e.case, ChargeCase::NastyPlus);
        assert_eq!(e.value, int(2 - 2 - 1));
        assert!(ledger.entries.iter().all(|e| e.element == 0));
        let diag = charge_diagnostics(&st);
        assert_eq!(diag.negative_elements, vec![0]);
        assert!(diag.undercount_holds());
    }

    #[test]
    fn uncovered_nasty_set_is_an_anomaly() {
        let mut st = state(3, vec![vec![0, 1, 2]], 2, 1);
        st.chi.set(0, int(-1)).unwrap();
        st.chi.set(1, int(-1)).unwrap();
        // Sz = 1 <= d = 1, Th- = 1 + 2 = 3 > 2d - delta = 0, no element in B+.
        let ledger = charge_ledger(&st);
        assert_eq!(ledger.anomalies, vec![0]);
        assert!(!charge_diagnostics(&st).undercount_holds());
    }

    #[test]
    fn empty_pool_is_vacuous() {
        let mut st = state(2, vec![vec![0, 1]], 2, 1);
        st.pool.clear();
        st.benign.insert(0);
        let diag = charge_diagnostics(&st);
        assert!(diag.pool_excess.is_zero() && diag.pool_excess_ok);
        assert!(diag.negative_elements.is_empty());
    }
}
