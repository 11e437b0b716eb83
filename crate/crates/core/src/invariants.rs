//! Runtime predicates for the eighteen invariants and the derived lemmas.
//!
//! Everything here is report-only: nothing panics on a violation, the first
//! counterexample per predicate is recorded instead. All comparisons are
//! exact.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::constants::r_term;
use crate::rational::{self, big, int, Rational};
use crate::state::{AlgorithmState, Cohort, Edge, Sign};
use crate::system::SetStats;

pub const INVARIANT_COUNT: u8 = 18;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub set: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cohort: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element: Option<usize>,
    pub detail: String,
}

impl Witness {
    fn set(s: usize, detail: String) -> Self {
        Self { set: Some(s), detail, ..Self::default() }
    }

    fn cohort(i: usize, s: Option<usize>, detail: String) -> Self {
        Self { cohort: Some(i), set: s, detail, ..Self::default() }
    }

    fn element(x: usize, detail: String) -> Self {
        Self { element: Some(x), detail, ..Self::default() }
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(i) = self.cohort {
            parts.push(format!("cohort {i}"));
        }
        if let Some(s) = self.set {
            parts.push(format!("set {s}"));
        }
        if let Some(x) = self.element {
            parts.push(format!("element {x}"));
        }
        if parts.is_empty() {
            write!(f, "{}", self.detail)
        } else {
            write!(f, "{}: {}", parts.join(", "), self.detail)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

/// Verdicts for I1..I18, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InvariantReport {
    pub outcomes: Vec<Outcome>,
}

impl InvariantReport {
    pub fn all_hold(&self) -> bool {
        self.outcomes.iter().all(|o| o.holds)
    }

    pub fn first_failure(&self) -> Option<&Outcome> {
        self.outcomes.iter().find(|o| !o.holds)
    }

    pub fn get(&self, id: u8) -> &Outcome {
        &self.outcomes[usize::from(id) - 1]
    }

    pub fn failures(&self) -> impl Iterator<Item = &Outcome> {
        self.outcomes.iter().filter(|o| !o.holds)
    }
}

struct Collector {
    first: Vec<Option<Witness>>,
}

impl Collector {
    fn new(count: usize) -> Self {
        Self { first: vec![None; count] }
    }

    fn fail(&mut self, id: u8, witness: Witness) {
        let slot = &mut self.first[usize::from(id) - 1];
        if slot.is_none() {
            *slot = Some(witness);
        }
    }
}

fn to_i64(q: &Rational) -> i64 {
    debug_assert!(q.is_integer());
    q.to_integer().to_i64().expect("threat fits in i64")
}

fn pow2(exp: u32) -> Rational {
    big(&rational::pow2(exp))
}

/// Shared per-state constants for the cohort inequalities.
struct Ctx<'a> {
    st: &'a AlgorithmState,
    stats: Vec<SetStats>,
    d: i64,
    delta: i64,
    half_alpha: Rational,
}

impl<'a> Ctx<'a> {
    fn new(st: &'a AlgorithmState) -> Self {
        Self {
            stats: st.stats(),
            d: st.d() as i64,
            delta: i64::from(st.profile.delta()),
            half_alpha: st.profile.alpha() / int(2),
            st,
        }
    }

    fn bound(&self) -> i64 {
        2 * self.d - self.delta
    }

    fn tw(&self, r: u32) -> Rational {
        big(self.st.profile.tw(r))
    }

    fn beta(&self, r: u32) -> Rational {
        big(self.st.profile.beta(r))
    }

    /// `eps chi(b) - 1 + alpha`, the clamp term in sign-normalized form.
    fn clamp(&self, c: &Cohort) -> Rational {
        c.sign.as_rational() * self.st.chi.get(c.banner) - int(1) + self.st.profile.alpha()
    }

    /// I14/I15 for an unmatched set: `(lhs, rhs)` of the inequality.
    fn unmatched_bound(&self, c: &Cohort, s: usize) -> (Rational, Rational) {
        let dd = self.st.defeats_of(s);
        let eps = c.sign.as_rational();
        let st = &self.stats[s];
        let scale = pow2(dd);
        let lhs = -(&eps * &st.chi) - &scale * self.beta(c.rank) * self.clamp(c);
        let rhs = &scale * self.tw(c.rank) - &self.half_alpha * st.threat(c.sign) - big(&r_term(dd, self.delta as u32));
        (lhs, rhs)
    }

    /// I16/I17 for a matched pair.
    fn matched_bound(&self, c: &Cohort, e: Edge) -> (Rational, Rational) {
        let dd = self.st.defeats_of(e.0);
        let eps = c.sign.as_rational();
        let (a, b) = (&self.stats[e.0], &self.stats[e.1]);
        let scale = pow2(dd + 1);
        let lhs = -(&eps * (&a.chi + &b.chi)) - &scale * self.beta(c.rank) * self.clamp(c);
        let rhs = &scale * self.tw(c.rank)
            - &self.half_alpha * (a.threat(c.sign) + b.threat(c.sign))
            - big(&(r_term(dd, self.delta as u32) * 2));
        (lhs, rhs)
    }
}

/// Evaluates I1..I18 on `cur`. I1 is a transition predicate and is vacuous
/// without `prev`.
pub fn check_invariants(prev: Option<&AlgorithmState>, cur: &AlgorithmState) -> InvariantReport {
    let ctx = Ctx::new(cur);
    let mut out = Collector::new(usize::from(INVARIANT_COUNT));
    let chi = &cur.chi;
    let (d, delta, bound) = (ctx.d, ctx.delta, ctx.bound());

    // I1: frozen elements stay frozen at the same color.
    if let Some(prev) = prev {
        for x in 0..chi.len() {
            if prev.chi.is_frozen(x) && prev.chi.get(x) != chi.get(x) {
                out.fail(
                    1,
                    Witness::element(
                        x,
                        format!(
                            "was frozen at {}, now {}",
                            rational::format(prev.chi.get(x)),
                            rational::format(chi.get(x))
                        ),
                    ),
                );
            }
        }
    }

    for &s in &cur.benign {
        let th = to_i64(&ctx.stats[s].th);
        if th > bound {
            out.fail(2, Witness::set(s, format!("benign set has Th = {th} > 2d - delta = {bound}")));
        }
    }

    for (s, st) in ctx.stats.iter().enumerate() {
        let th = to_i64(&st.th);
        if st.sz as i64 <= d && th > 2 * d {
            out.fail(3, Witness::set(s, format!("Sz = {} <= d but Th = {th} > 2d = {}", st.sz, 2 * d)));
        }
    }

    for (i, c) in cur.cohorts.iter().enumerate() {
        for &s in &c.members {
            if !cur.sys.contains(s, c.banner) {
                out.fail(4, Witness::cohort(i, Some(s), format!("banner {} not in set", c.banner)));
            }
        }

        let mut used = std::collections::BTreeSet::new();
        for e in &c.matching {
            if e.0 == e.1 || !c.members.contains(&e.0) || !c.members.contains(&e.1) {
                out.fail(5, Witness::cohort(i, Some(e.0), format!("edge {{{}, {}}} not between members", e.0, e.1)));
            }
            for s in [e.0, e.1] {
                if !used.insert(s) {
                    out.fail(5, Witness::cohort(i, Some(s), "set is in two edges".into()));
                }
            }
            let (da, db) = (cur.defeats_of(e.0), cur.defeats_of(e.1));
            if da != db {
                out.fail(6, Witness::cohort(i, Some(e.0), format!("edge {{{}, {}}} has D = {da} vs {db}", e.0, e.1)));
            }
        }

        let tw = ctx.tw(c.rank);
        let mut weight = BigInt::zero();
        for &s in &c.members {
            let st = &ctx.stats[s];
            let dd = cur.defeats_of(s);
            weight += rational::pow2(dd);
            let cap = d + 1 - (1i64 << dd.min(62));
            if st.sz as i64 > cap {
                out.fail(7, Witness::cohort(i, Some(s), format!("Sz = {} > d + 1 - 2^D = {cap}", st.sz)));
            }
            let limit = delta + 2 - (1i64 << (dd + 1).min(62));
            let th = to_i64(st.threat(c.sign));
            if th > limit {
                let id = if c.sign == Sign::Plus { 8 } else { 9 };
                out.fail(
                    id,
                    Witness::cohort(i, Some(s), format!("Th{} = {th} > delta + 2 - 2^(D+1) = {limit}", c.sign)),
                );
            }
            if int(dd.into()) > &tw * int(4) {
                out.fail(18, Witness::cohort(i, Some(s), format!("D = {dd} > 4 Tw_{}", c.rank)));
            }
        }
        if weight > BigInt::from(cur.profile.w()) {
            out.fail(11, Witness::cohort(i, None, format!("sum 2^D = {weight} > W = {}", cur.profile.w())));
        }

        for s in c.unmatched() {
            let (lhs, rhs) = ctx.unmatched_bound(c, s);
            if lhs > rhs {
                let id = if c.sign == Sign::Minus { 14 } else { 15 };
                out.fail(
                    id,
                    Witness::cohort(i, Some(s), format!("{} > {}", rational::format(&lhs), rational::format(&rhs))),
                );
            }
        }
        for &e in &c.matching {
            if cur.defeats_of(e.0) != cur.defeats_of(e.1) {
                continue; // reported as I6
            }
            let (lhs, rhs) = ctx.matched_bound(c, e);
            if lhs > rhs {
                let id = if c.sign == Sign::Minus { 16 } else { 17 };
                out.fail(
                    id,
                    Witness::cohort(
                        i,
                        Some(e.0),
                        format!("edge {{{}, {}}}: {} > {}", e.0, e.1, rational::format(&lhs), rational::format(&rhs)),
                    ),
                );
            }
        }
    }

    // I10: a banner of k cohorts lies in at least sum (W - |C|) benign sets.
    let mut by_banner: std::collections::BTreeMap<usize, i64> = Default::default();
    for c in &cur.cohorts {
        *by_banner.entry(c.banner).or_default() += cur.profile.w() as i64 - c.members.len() as i64;
    }
    for (b, need) in by_banner {
        let have = cur.sys.sets_containing(b).iter().filter(|s| cur.benign.contains(s)).count() as i64;
        if have < need {
            out.fail(10, Witness::element(b, format!("banner in {have} benign sets, needs {need}")));
        }
    }

    // I12/I13 on the pool.
    for &s in &cur.pool {
        let st = &ctx.stats[s];
        for sign in [Sign::Plus, Sign::Minus] {
            let id = if sign == Sign::Plus { 12 } else { 13 };
            let th = to_i64(st.threat(sign));
            let r = 2 * d - th;
            if r >= delta {
                continue;
            }
            let signed_chi = sign.as_rational() * &st.chi;
            if st.sz as i64 >= d && signed_chi.is_positive() {
                out.fail(
                    id,
                    Witness::set(s, format!("r = {r}, Sz >= d, but {sign}chi = {}", rational::format(&signed_chi))),
                );
            }
            if st.sz as i64 <= d {
                if r < 0 {
                    out.fail(id, Witness::set(s, format!("Sz <= d with Th{sign} = {th} > 2d")));
                    continue;
                }
                let other = st.threat(sign.flip());
                let rhs = ctx.tw(r as u32) - &ctx.half_alpha * other;
                if signed_chi > rhs {
                    out.fail(
                        id,
                        Witness::set(
                            s,
                            format!(
                                "r = {r}: {sign}chi = {} > {}",
                                rational::format(&signed_chi),
                                rational::format(&rhs)
                            ),
                        ),
                    );
                }
            }
        }
    }

    InvariantReport {
        outcomes: out
            .first
            .into_iter()
            .enumerate()
            .map(|(i, w)| Outcome { id: i as u8 + 1, holds: w.is_none(), witness: w })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Lemma {
    /// `Th+` and `Th-` never increase.
    ThMonotone,
    /// `Sz <= d` and one threat above `2d - delta` forces the other below `delta`.
    GenOneSidedBenign,
    /// A cohort set is benign in the direction of its sign.
    OneSidedBenign,
    /// `eps chi(S) - gamma Th_eps(S) <= delta + 2 - 2^(D+1)`, at gamma = alpha/2 and 0.
    OtherChiBound,
    /// Nonempty cohorts have `sign chi(b) = eps`.
    BannerSign,
    /// Unmatched dangerous cohort sets satisfy `D <= 4 Tw_r`.
    DBound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LemmaOutcome {
    pub lemma: Lemma,
    pub holds: bool,
    /// Number of instances the lemma was evaluated on.
    pub checked: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LemmaReport {
    pub outcomes: Vec<LemmaOutcome>,
}

impl LemmaReport {
    pub fn all_hold(&self) -> bool {
        self.outcomes.iter().all(|o| o.holds)
    }

    pub fn get(&self, lemma: Lemma) -> &LemmaOutcome {
        self.outcomes.iter().find(|o| o.lemma == lemma).expect("all lemmas reported")
    }
}

struct LemmaTally {
    outcomes: Vec<LemmaOutcome>,
}

impl LemmaTally {
    fn new() -> Self {
        let all = [
            Lemma::ThMonotone,
            Lemma::GenOneSidedBenign,
            Lemma::OneSidedBenign,
            Lemma::OtherChiBound,
            Lemma::BannerSign,
            Lemma::DBound,
        ];
        Self {
            outcomes: all
                .into_iter()
                .map(|lemma| LemmaOutcome { lemma, holds: true, checked: 0, witness: None })
                .collect(),
        }
    }

    fn record(&mut self, lemma: Lemma, ok: bool, witness: impl FnOnce() -> Witness) {
        let o = self.outcomes.iter_mut().find(|o| o.lemma == lemma).expect("known lemma");
        o.checked += 1;
        if !ok && o.holds {
            o.holds = false;
            o.witness = Some(witness());
        }
    }
}

/// Evaluates the lemma-level consequences of the invariants on `cur`
/// (and the monotonicity lemma on `prev -> cur` when `prev` is given).
pub fn lemma_checks(prev: Option<&AlgorithmState>, cur: &AlgorithmState) -> LemmaReport {
    let ctx = Ctx::new(cur);
    let (d, delta, bound) = (ctx.d, ctx.delta, ctx.bound());
    let mut tally = LemmaTally::new();

    if let Some(prev) = prev {
        let before = prev.stats();
        for (s, (a, b)) in before.iter().zip(&ctx.stats).enumerate() {
            let ok = b.th_pos <= a.th_pos && b.th_neg <= a.th_neg;
            tally.record(Lemma::ThMonotone, ok, || {
                Witness::set(
                    s,
                    format!(
                        "Th+ {} -> {}, Th- {} -> {}",
                        rational::format(&a.th_pos),
                        rational::format(&b.th_pos),
                        rational::format(&a.th_neg),
                        rational::format(&b.th_neg)
                    ),
                )
            });
        }
    }

    for (s, st) in ctx.stats.iter().enumerate() {
        if st.sz as i64 > d {
            continue;
        }
        for sign in [Sign::Plus, Sign::Minus] {
            if to_i64(st.threat(sign)) > bound {
                let other = to_i64(st.threat(sign.flip()));
                tally.record(Lemma::GenOneSidedBenign, other < delta, || {
                    Witness::set(s, format!("Th{sign} > 2d - delta but Th{} = {other} >= delta", sign.flip()))
                });
            }
        }
    }

    for (i, c) in cur.cohorts.iter().enumerate() {
        if !c.members.is_empty() {
            let b = cur.chi.get(c.banner);
            let ok = match c.sign {
                Sign::Plus => b.is_positive(),
                Sign::Minus => b.is_negative(),
            };
            tally.record(Lemma::BannerSign, ok, || {
                Witness::cohort(i, None, format!("eps = {} but chi(b) = {}", c.sign, rational::format(b)))
            });
        }
        let eps = c.sign.as_rational();
        for &s in &c.members {
            let st = &ctx.stats[s];
            let th = to_i64(st.threat(c.sign));
            tally.record(Lemma::OneSidedBenign, th <= bound, || {
                Witness::cohort(i, Some(s), format!("Th{} = {th} > 2d - delta = {bound}", c.sign))
            });
            let dd = cur.defeats_of(s);
            let limit = int(delta + 2) - pow2(dd + 1);
            for gamma in [ctx.half_alpha.clone(), Rational::zero()] {
                let lhs = &eps * &st.chi - &gamma * st.threat(c.sign);
                tally.record(Lemma::OtherChiBound, lhs <= limit, || {
                    Witness::cohort(
                        i,
                        Some(s),
                        format!(
                            "gamma = {}: {} > {}",
                            rational::format(&gamma),
                            rational::format(&lhs),
                            rational::format(&limit)
                        ),
                    )
                });
            }
        }
        for s in c.unmatched() {
            if to_i64(&ctx.stats[s].th) > bound {
                let dd = cur.defeats_of(s);
                let ok = int(dd.into()) <= ctx.tw(c.rank) * int(4);
                tally.record(Lemma::DBound, ok, || Witness::cohort(i, Some(s), format!("D = {dd} > 4 Tw_{}", c.rank)));
            }
        }
    }

    LemmaReport { outcomes: tally.outcomes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ConstantProfile;
    use crate::rational::ratio;
    use crate::state::init_state;
    use crate::system::SetSystem;
    use std::sync::Arc;

    fn state(n: usize, sets: Vec<Vec<usize>>, w: u64) -> AlgorithmState {
        let sys = SetSystem::new(n, sets).unwrap();
        let profile = ConstantProfile::toy(2, ratio(1, 4), &[2, 2], w).unwrap();
        init_state(Arc::new(sys), Arc::new(profile))
    }

    #[test]
    fn initial_state_passes_everything() {
        let st = state(6, vec![vec![0, 1, 2, 3], vec![2, 3, 4, 5], vec![0, 5]], 2);
        let rep = check_invariants(None, &st);
        assert_eq!(rep.outcomes.len(), 18);
        assert!(rep.all_hold(), "{:?}", rep.first_failure());
        assert!(check_invariants(Some(&st), &st).all_hold());
        let lemmas = lemma_checks(Some(&st), &st);
        assert!(lemmas.all_hold());
        assert_eq!(lemmas.get(Lemma::BannerSign).checked, 0, "no cohorts, vacuous");
    }

    #[test]
    fn i3_reports_witness() {
        // d = 2; set 0 has Sz = 2 <= d and Fr = +3, so Th+ = 5 = 2d + 1.
        let mut st = state(5, vec![vec![0, 1, 2, 3, 4], vec![0, 1], vec![2, 3]], 2);
        for x in 0..3 {
            st.chi.set(x, int(1)).unwrap();
        }
        let rep = check_invariants(None, &st);
        let i3 = rep.get(3);
        assert!(!i3.holds);
        assert_eq!(i3.witness.as_ref().unwrap().set, Some(0));
    }

    #[test]
    fn i6_unequal_defeats() {
        let mut st = state(3, vec![vec![0, 1], vec![0, 2]], 4);
        st.pool.clear();
        st.cohorts.push(Cohort {
            members: [0, 1].into_iter().collect(),
            banner: 0,
            sign: Sign::Plus,
            rank: 0,
            matching: [Edge::new(0, 1)].into_iter().collect(),
        });
        st.defeats.insert(0, 0);
        st.defeats.insert(1, 1);
        let rep = check_invariants(None, &st);
        assert!(!rep.get(6).holds);
        assert_eq!(rep.get(6).witness.as_ref().unwrap().cohort, Some(0));
    }

    #[test]
    fn i1_detects_unfreezing() {
        let mut prev = state(2, vec![vec![0, 1]], 2);
        prev.chi.set(0, int(1)).unwrap();
        let mut cur = prev.clone();
        cur.chi.set(0, ratio(1, 2)).unwrap();
        let rep = check_invariants(Some(&prev), &cur);
        assert!(!rep.get(1).holds);
        assert_eq!(rep.get(1).witness.as_ref().unwrap().element, Some(0));
        assert!(check_invariants(None, &cur).get(1).holds);
    }

    #[test]
    fn i2_benign_set_must_be_below_bound() {
        // d = 1, delta = 2: bound is 0; a set of size 1 at chi = 0 has Th = 1.
        let mut st = state(1, vec![vec![0]], 2);
        st.pool.clear();
        st.benign.insert(0);
        assert!(!check_invariants(None, &st).get(2).holds);
    }

    #[test]
    fn i11_and_i10_cohort_weights() {
        let mut st = state(4, vec![vec![0, 1], vec![0, 2], vec![0, 3]], 2);
        st.chi.set(0, ratio(7, 8)).unwrap();
        st.pool.clear();
        st.cohorts.push(Cohort {
            members: [0, 1].into_iter().collect(),
            banner: 0,
            sign: Sign::Plus,
            rank: 0,
            matching: Default::default(),
        });
        st.defeats.insert(0, 1);
        st.defeats.insert(1, 0);
        st.benign.insert(2);
        let rep = check_invariants(None, &st);
        assert!(!rep.get(11).holds, "2^1 + 2^0 = 3 > W = 2");
        assert!(rep.get(10).holds, "W - |C| = 0 benign sets needed");
    }

    #[test]
    fn lemma_banner_sign_detects_mismatch() {
        let mut st = state(3, vec![vec![0, 1], vec![0, 2]], 2);
        st.chi.set(0, ratio(-1, 2)).unwrap();
        st.pool.clear();
        st.cohorts.push(Cohort {
            members: [0, 1].into_iter().collect(),
            banner: 0,
            sign: Sign::Plus,
            rank: 0,
            matching: Default::default(),
        });
        st.defeats.insert(0, 0);
        st.defeats.insert(1, 0);
        let rep = lemma_checks(None, &st);
        assert!(!rep.get(Lemma::BannerSign).holds);
        let mirrored = lemma_checks(None, &st.mirrored());
        assert!(!mirrored.get(Lemma::BannerSign).holds);
    }

    #[test]
    fn report_is_mirror_invariant() {
        let mut st = state(6, vec![vec![0, 1, 2, 3, 4], vec![1, 2, 3, 4, 5], vec![0, 5]], 2);
        st.chi.set(1, int(1)).unwrap();
        st.chi.set(2, ratio(-2, 3)).unwrap();
        st.chi.set(3, ratio(1, 3)).unwrap();
        let a = check_invariants(None, &st);
        let b = check_invariants(None, &st.mirrored());
        // Mirroring swaps each (+)/(-) pair of invariants.
        let partner = |id: u8| match id {
            8 | 12 | 14 | 16 => id + 1,
            9 | 13 | 15 | 17 => id - 1,
            _ => id,
        };
        assert!(!a.get(12).holds);
        for id in 1..=INVARIANT_COUNT {
            assert_eq!(a.get(id).holds, b.get(partner(id)).holds, "I{id}");
        }
    }
}
