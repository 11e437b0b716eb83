//! The constant system of the cohort algorithm.
//!
//! A [`ConstantProfile`] holds `delta`, `alpha`, the tower table `Tw_r`, the
//! clamping factors `beta_r` and the cohort size `W`. Profiles are either
//! derived from the degree `d` (where `delta = log* d`) or supplied by hand.
//! Derived profiles are numerically infeasible at every representable `d`
//! (`W` floors to zero), so toy runs use manual profiles and the inequality
//! report tells which guarantees apply.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, big, int, ratio, Rational};

/// Largest tower value, in bits, that is materialized.
pub const DEFAULT_BIT_CAP: u64 = 1 << 20;

/// `min { t : log2^(t) x <= 1 }`, with `log_star(1) = 0`.
///
/// Equivalently the least `t` with `x <= 2^^t` (tower of `t` twos).
pub fn log_star(x: u64) -> Result<u32> {
    if x == 0 {
        return Err(Error::LogStarOfZero);
    }
    // 2^^0 = 1, 2^^1 = 2, 2^^2 = 4, 2^^3 = 16, 2^^4 = 65536; 2^^5 exceeds u64.
    let towers: [u64; 5] = [1, 2, 4, 16, 65536];
    Ok(towers.iter().position(|&t| x <= t).unwrap_or(5) as u32)
}

/// `R_D = (D - 2) 2^D - (2^D - 1) delta + 2`.
pub fn r_term(defeats: u32, delta: u32) -> BigInt {
    let p = rational::pow2(defeats);
    (BigInt::from(defeats) - 2) * &p - (&p - 1) * BigInt::from(delta) + 2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileSource {
    PaperDerived,
    ManualOverride,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstantProfile {
    delta: u32,
    alpha: Rational,
    tw: Vec<BigInt>,
    beta: Vec<BigInt>,
    w: u64,
    source: ProfileSource,
    bit_cap: u64,
}

impl ConstantProfile {
    /// The derived constants at degree `d`, without requiring `W >= 1`.
    pub fn paper_constants(d: u64, bit_cap: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidProfile(format!("derived profiles need d >= 2, got {d}")));
        }
        let delta = log_star(d)?;
        let mut tw: Vec<BigInt> = Vec::with_capacity(delta as usize);
        for r in 0..delta as usize {
            let value = if r < 2 { BigInt::from(delta) } else { tower_step(&tw[r - 2], r, bit_cap)? };
            tw.push(value);
        }
        let beta = tw.iter().map(|t| t * 4).collect();
        let denom = BigInt::from(64) * BigInt::from(delta).pow(2) * &tw[delta as usize - 1];
        let w = (BigInt::from(d) / denom).to_u64().expect("W <= d");
        let profile = Self { delta, alpha: ratio(1, 4), tw, beta, w, source: ProfileSource::PaperDerived, bit_cap };
        assert!(profile.recurrence_holds(), "derived profile violates its own recurrence");
        Ok(profile)
    }

    /// A manually chosen profile; every entry must be positive and
    /// `0 < alpha < 1`.
    pub fn manual(delta: u32, alpha: Rational, tw: Vec<BigInt>, beta: Vec<BigInt>, w: u64) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidProfile(m));
        if delta == 0 {
            return bad("delta must be positive".into());
        }
        if tw.len() != delta as usize || beta.len() != delta as usize {
            return bad(format!(
                "tw and beta need exactly delta = {delta} entries (got {} and {})",
                tw.len(),
                beta.len()
            ));
        }
        if !(alpha.is_positive() && alpha < Rational::one()) {
            return bad(format!("alpha = {} is not in (0, 1)", rational::format(&alpha)));
        }
        if tw.iter().chain(&beta).any(|v| !v.is_positive()) {
            return bad("tw and beta entries must be positive".into());
        }
        if w == 0 {
            return bad("W must be at least 1".into());
        }
        Ok(Self { delta, alpha, tw, beta, w, source: ProfileSource::ManualOverride, bit_cap: DEFAULT_BIT_CAP })
    }

    /// Convenience for small manual profiles with `beta_r = 4 Tw_r`.
    pub fn toy(delta: u32, alpha: Rational, tw: &[i64], w: u64) -> Result<Self> {
        let tw: Vec<BigInt> = tw.iter().map(|&t| BigInt::from(t)).collect();
        let beta = tw.iter().map(|t| t * 4).collect();
        Self::manual(delta, alpha, tw, beta, w)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProfileDoc = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        doc.into_profile()
    }

    pub fn to_doc(&self) -> ProfileDoc {
        ProfileDoc {
            delta: self.delta,
            alpha: rational::format(&self.alpha),
            tw: self.tw.iter().map(IntRepr::from_big).collect(),
            beta: self.beta.iter().map(IntRepr::from_big).collect(),
            w: self.w,
        }
    }

    pub fn delta(&self) -> u32 {
        self.delta
    }

    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }

    pub fn tw(&self, r: u32) -> &BigInt {
        &self.tw[r as usize]
    }

    pub fn beta(&self, r: u32) -> &BigInt {
        &self.beta[r as usize]
    }

    pub fn tw_table(&self) -> &[BigInt] {
        &self.tw
    }

    pub fn beta_table(&self) -> &[BigInt] {
        &self.beta
    }

    pub fn w(&self) -> u64 {
        self.w
    }

    pub fn source(&self) -> ProfileSource {
        self.source
    }

    /// `Tw_r` for any `r >= 0`: the table entry, or for derived profiles the
    /// recurrence continued past the table. `None` if unavailable or too big.
    fn tw_extended(&self, r: u32) -> Option<BigInt> {
        if let Some(v) = self.tw.get(r as usize) {
            return Some(v.clone());
        }
        if self.source != ProfileSource::PaperDerived || r < 2 {
            return None;
        }
        let prev = self.tw_extended(r - 2)?;
        tower_step(&prev, r as usize, self.bit_cap).ok()
    }

    /// `Tw_0 = Tw_1 = delta`, `Tw_r = 2^(8 Tw_(r-2))` and `beta_r = 4 Tw_r`.
    pub fn recurrence_holds(&self) -> bool {
        self.tw.iter().enumerate().all(|(r, t)| {
            let expect = if r < 2 {
                BigInt::from(self.delta)
            } else {
                match (&self.tw[r - 2] * BigInt::from(8)).to_usize() {
                    Some(e) => BigInt::one() << e,
                    None => return false,
                }
            };
            *t == expect
        }) && self.tw.iter().zip(&self.beta).all(|(t, b)| *b == t * BigInt::from(4))
    }
}

fn tower_step(prev: &BigInt, r: usize, cap: u64) -> Result<BigInt> {
    let exp: BigInt = prev * BigInt::from(8);
    match exp.to_u64() {
        Some(e) if e < cap => Ok(BigInt::one() << e as usize),
        _ => Err(Error::TowerOverflow { r, cap }),
    }
}

/// The profile derived from `d`. Fails when `W < 1` or a tower value is
/// beyond the bit cap.
pub fn paper_profile(d: u64) -> Result<ConstantProfile> {
    let profile = ConstantProfile::paper_constants(d, DEFAULT_BIT_CAP)?;
    if profile.w < 1 {
        let denom = BigInt::from(64) * BigInt::from(profile.delta).pow(2) * &profile.tw[profile.delta as usize - 1];
        return Err(Error::InfeasibleW { d, w: format!("floor({d} / {denom}) = 0") });
    }
    Ok(profile)
}

/// Integer that serializes as a JSON number when it fits, else a string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IntRepr {
    Num(u64),
    Str(String),
}

impl IntRepr {
    fn from_big(v: &BigInt) -> Self {
        v.to_u64().map_or_else(|| Self::Str(v.to_string()), Self::Num)
    }

    fn to_big(&self) -> Result<BigInt> {
        match self {
            Self::Num(v) => Ok(BigInt::from(*v)),
            Self::Str(s) => s.trim().parse().map_err(|_| Error::Malformed(format!("not an integer: {s:?}"))),
        }
    }
}

/// Override file: `{"delta":2,"alpha":"1/4","tw":[2,2],"beta":[8,8],"w":2}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDoc {
    pub delta: u32,
    pub alpha: String,
    pub tw: Vec<IntRepr>,
    pub beta: Vec<IntRepr>,
    pub w: u64,
}

impl ProfileDoc {
    pub fn into_profile(self) -> Result<ConstantProfile> {
        let alpha = rational::parse(&self.alpha)?;
        let tw = self.tw.iter().map(IntRepr::to_big).collect::<Result<_>>()?;
        let beta = self.beta.iter().map(IntRepr::to_big).collect::<Result<_>>()?;
        ConstantProfile::manual(self.delta, alpha, tw, beta, self.w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Le => "<=",
            Self::Lt => "<",
            Self::Ge => ">=",
        })
    }
}

/// An evaluated side of an inequality; `None` marks a value beyond the cap.
pub type Quantity = Option<Rational>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InequalityCheck {
    pub label: char,
    pub r: Option<u32>,
    pub relation: Relation,
    pub lhs: Quantity,
    pub rhs: Quantity,
    /// `None` when a side is unrepresentable.
    pub holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InequalityReport {
    pub d: u64,
    pub checks: Vec<InequalityCheck>,
}

impl InequalityReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds == Some(true))
    }

    pub fn get(&self, label: char, r: Option<u32>) -> Option<&InequalityCheck> {
        self.checks.iter().find(|c| c.label == label && c.r == r)
    }

    /// Labels covered by the report, deduplicated.
    pub fn labels(&self) -> Vec<char> {
        let mut labels: Vec<char> = self.checks.iter().map(|c| c.label).collect();
        labels.dedup();
        labels
    }
}

impl fmt::Display for InequalityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<5} {:>3}  {:>24} {:>2} {:<24}  verdict", "ineq", "r", "lhs", "", "rhs")?;
        for c in &self.checks {
            let r = c.r.map_or_else(|| "-".to_string(), |r| r.to_string());
            let verdict = match c.holds {
                Some(true) => "holds",
                Some(false) => "FAILS",
                None => "unrepresentable",
            };
            writeln!(
                f,
                "({})   {:>3}  {:>24} {:>2} {:<24}  {verdict}",
                c.label,
                r,
                show(&c.lhs),
                c.relation,
                show(&c.rhs)
            )?;
        }
        Ok(())
    }
}

fn show(q: &Quantity) -> String {
    match q {
        None => "unrepresentable".into(),
        Some(v) => {
            let text = rational::format(v);
            if text.len() <= 24 {
                text
            } else {
                format!("~2^{}", v.to_integer().bits())
            }
        }
    }
}

struct Eval {
    cap: u64,
}

impl Eval {
    fn add(&self, a: &Quantity, b: &Quantity) -> Quantity {
        Some(a.as_ref()? + b.as_ref()?)
    }

    fn mul(&self, a: &Quantity, b: &Quantity) -> Quantity {
        Some(a.as_ref()? * b.as_ref()?)
    }

    fn pow2(&self, exp: &Quantity) -> Quantity {
        let exp = exp.as_ref()?;
        if !exp.is_integer() || exp.is_negative() {
            return None;
        }
        let e = exp.to_integer().to_u64()?;
        (e < self.cap).then(|| Rational::from_integer(BigInt::one() << e as usize))
    }
}

fn compare(label: char, r: Option<u32>, lhs: Quantity, relation: Relation, rhs: Quantity) -> InequalityCheck {
    let holds = match (&lhs, &rhs) {
        (Some(a), Some(b)) => Some(match relation {
            Relation::Le => a <= b,
            Relation::Lt => a < b,
            Relation::Ge => a >= b,
        }),
        _ => None,
    };
    InequalityCheck { label, r, relation, lhs, rhs, holds }
}

/// `floor(log2 log2 d)` as the largest `k` with `2^(2^k) <= d`; `None` for
/// `d < 2`.
fn floor_log_log(d: u64) -> Option<u64> {
    if d < 2 {
        return None;
    }
    let bits = 63 - d.leading_zeros() as u64; // floor(log2 d) >= 1
    Some(63 - bits.leading_zeros() as u64)
}

/// Evaluates inequalities (a)-(j) exactly for every applicable `r < delta`.
///
/// (d) needs `Tw_(r-2)` and applies for `r >= 2`; (j) needs `Tw_(r+2)`,
/// which manual profiles only provide when `r + 2 < delta`.
pub fn check_inequalities(profile: &ConstantProfile, d: u64) -> InequalityReport {
    let ev = Eval { cap: profile.bit_cap };
    let q = |v: i64| Some(int(v));
    let delta = q(profile.delta.into());
    let alpha = Some(profile.alpha.clone());
    let one_minus_alpha = Some(Rational::one() - &profile.alpha);
    let half_alpha_c = Some(Rational::one() - &profile.alpha / int(2));
    let dq = Some(Rational::from_integer(BigInt::from(d)));
    let w = Some(Rational::from_integer(BigInt::from(profile.w)));
    let top = Some(big(profile.tw(profile.delta - 1)));
    let mut checks = Vec::new();

    let tail = |tw: &Quantity, beta: &Quantity| {
        let p = ev.pow2(&ev.add(&ev.mul(&q(4), tw), &q(1)));
        let p0 = ev.pow2(&ev.mul(&q(4), tw));
        let a = ev.mul(&ev.mul(&p, beta), &alpha);
        let b = ev.mul(&p, tw);
        let c = ev.mul(&p0, &delta);
        ev.add(&ev.add(&a, &b), &c)
    };

    for r in 0..profile.delta {
        let tw = Some(big(profile.tw(r)));
        let beta = Some(big(profile.beta(r)));
        checks.push(compare('a', Some(r), delta.clone(), Relation::Le, tw.clone()));
        checks.push(compare('b', Some(r), ev.add(&tw, &delta), Relation::Lt, ev.mul(&beta, &one_minus_alpha)));
        let lhs_c = ev.add(&ev.add(&ev.mul(&ev.add(&beta, &q(1)), &alpha), &tw), &delta);
        checks.push(compare('c', Some(r), lhs_c, Relation::Le, ev.mul(&q(4), &tw)));
        if r >= 2 {
            let prev = Some(big(profile.tw(r - 2)));
            checks.push(compare('d', Some(r), ev.mul(&q(16), &tw), Relation::Le, ev.pow2(&ev.mul(&q(16), &prev))));
        }
    }
    let loglog = floor_log_log(d).map(|k| int(k as i64));
    checks.push(compare('e', None, top.clone(), Relation::Le, loglog));
    let lhs_f = ev.add(&ev.mul(&q(2), &top), &ev.mul(&ev.add(&q(2), &alpha.clone().map(|a| -a)), &delta));
    checks.push(compare('f', None, lhs_f, Relation::Le, ev.mul(&alpha, &dq)));
    let inner = ev.add(&ev.add(&delta, &ev.mul(&q(2), &top)), &q(2));
    let rhs_g = ev.mul(&ev.mul(&ev.mul(&w, &delta), &inner), &ev.add(&q(8), &ev.mul(&q(4), &delta)));
    checks.push(compare('g', None, dq.clone(), Relation::Ge, rhs_g));
    for r in 0..profile.delta {
        let tw = Some(big(profile.tw(r)));
        let lhs_h = ev.mul(&ev.pow2(&ev.add(&ev.mul(&q(8), &tw), &q(6))), &tw);
        checks.push(compare('h', Some(r), lhs_h, Relation::Lt, w.clone()));
    }
    for r in 0..profile.delta {
        let tw = Some(big(profile.tw(r)));
        let beta = Some(big(profile.beta(r)));
        let two_d_minus_delta = ev.add(&ev.mul(&q(2), &dq), &delta.clone().map(|x| -x));
        let lhs_i = ev.mul(&half_alpha_c, &two_d_minus_delta);
        let rhs_i = ev.add(&ev.mul(&half_alpha_c, &dq), &tail(&tw, &beta));
        checks.push(compare('i', Some(r), lhs_i, Relation::Ge, rhs_i));
    }
    for r in 0..profile.delta {
        let ahead = profile.tw_extended(r + 2);
        if ahead.is_none() && profile.source == ProfileSource::ManualOverride {
            continue;
        }
        let tw = Some(big(profile.tw(r)));
        let beta = Some(big(profile.beta(r)));
        checks.push(compare('j', Some(r), ahead.map(Rational::from_integer), Relation::Ge, tail(&tw, &beta)));
    }
    InequalityReport { d, checks }
}
