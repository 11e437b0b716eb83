//! Exact linear perturbation: the equation system of the perturbation
//! step, a deterministic kernel direction and the walk to the color box.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::rational::{self, big, Rational};
use crate::state::{AlgorithmState, Edge, Sign};
use crate::system::FloatingColoring;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowSource {
    Pool {
        set: usize,
    },
    Unmatched {
        cohort: usize,
        set: usize,
    },
    Matched {
        cohort: usize,
        edge: Edge,
    },
    /// A large set kept balanced by the classic algorithm.
    Active {
        set: usize,
    },
}

/// `sum_x coeffs[x] tau(x) = rhs` over the floating unknowns. Frozen
/// contributions are already folded into `rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub source: RowSource,
    pub coeffs: BTreeMap<usize, BigInt>,
    pub rhs: Rational,
}

impl Row {
    pub fn eval(&self, chi: &FloatingColoring) -> Rational {
        self.coeffs.iter().map(|(&x, a)| big(a) * chi.get(x)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearSystem {
    /// Floating elements in ascending order.
    pub unknowns: Vec<usize>,
    pub rows: Vec<Row>,
}

impl LinearSystem {
    /// Builds rows from `(source, [(element, coefficient)])` and the current
    /// coloring; frozen elements are dropped and the rhs is the current value
    /// of the floating part.
    fn assemble<I>(chi: &FloatingColoring, specs: I) -> Self
    where
        I: IntoIterator<Item = (RowSource, Vec<(usize, BigInt)>)>,
    {
        let rows = specs
            .into_iter()
            .map(|(source, terms)| {
                let mut coeffs: BTreeMap<usize, BigInt> = BTreeMap::new();
                for (x, a) in terms {
                    if !chi.is_frozen(x) {
                        *coeffs.entry(x).or_default() += a;
                    }
                }
                coeffs.retain(|_, a| !a.is_zero());
                let mut row = Row { source, coeffs, rhs: Rational::zero() };
                row.rhs = row.eval(chi);
                row
            })
            .collect();
        Self { unknowns: chi.floating().collect(), rows }
    }

    /// Rows for the classic algorithm: one per listed set, coefficient 1.
    pub fn balanced_sets(sys: &crate::system::SetSystem, chi: &FloatingColoring, sets: &[usize]) -> Self {
        let specs = sets
            .iter()
            .map(|&s| (RowSource::Active { set: s }, sys.set(s).iter().map(|&x| (x, BigInt::one())).collect()));
        Self::assemble(chi, specs)
    }

    pub fn residuals(&self, chi: &FloatingColoring) -> Vec<Rational> {
        self.rows.iter().map(|r| r.eval(chi) - &r.rhs).collect()
    }

    pub fn is_satisfied_by(&self, chi: &FloatingColoring) -> bool {
        self.residuals(chi).iter().all(Zero::is_zero)
    }

    /// Text dump, one `row column value` triple per line after a
    /// `rows columns entries` header. Columns are positions in `unknowns`.
    pub fn to_matrix_market(&self) -> String {
        let col: BTreeMap<usize, usize> = self.unknowns.iter().enumerate().map(|(j, &x)| (x, j + 1)).collect();
        let entries: usize = self.rows.iter().map(|r| r.coeffs.len()).sum();
        let mut out =
            format!("%%discrepancy perturbation system\n{} {} {}\n", self.rows.len(), self.unknowns.len(), entries);
        for (i, r) in self.rows.iter().enumerate() {
            for (x, a) in &r.coeffs {
                let _ = writeln!(out, "{} {} {}", i + 1, col[x], a);
            }
        }
        out
    }
}

/// The equations of the perturbation step: pool sets in ascending order,
/// then per cohort the unmatched sets in ascending order followed by the
/// matching edges.
pub fn build_equations(st: &AlgorithmState) -> LinearSystem {
    let sys = &st.sys;
    let ones = |s: usize| sys.set(s).iter().map(|&x| (x, BigInt::one())).collect::<Vec<_>>();
    let mut specs: Vec<(RowSource, Vec<(usize, BigInt)>)> =
        st.pool.iter().map(|&s| (RowSource::Pool { set: s }, ones(s))).collect();
    for (i, c) in st.cohorts.iter().enumerate() {
        let beta = st.profile.beta(c.rank);
        for s in c.unmatched() {
            let mut terms = ones(s);
            terms.push((c.banner, rational::pow2(st.defeats_of(s)) * beta));
            specs.push((RowSource::Unmatched { cohort: i, set: s }, terms));
        }
        for &e in &c.matching {
            let mut terms = ones(e.0);
            terms.extend(ones(e.1));
            terms.push((c.banner, rational::pow2(st.defeats_of(e.0) + 1) * beta));
            specs.push((RowSource::Matched { cohort: i, edge: e }, terms));
        }
    }
    LinearSystem::assemble(&st.chi, specs)
}

trait Ring: Clone + PartialEq {
    fn from_big(v: &BigInt) -> Option<Self>;
    fn is_nil(&self) -> bool;
    fn mul_sub(a: &Self, b: &Self, c: &Self, d: &Self) -> Option<Self>;
    fn div_exact(&self, by: &Self) -> Self;
    fn neg(&self) -> Option<Self>;
    fn to_big(&self) -> BigInt;
}

impl Ring for i128 {
    fn from_big(v: &BigInt) -> Option<Self> {
        num_traits::ToPrimitive::to_i128(v)
    }

    fn is_nil(&self) -> bool {
        *self == 0
    }

    fn mul_sub(a: &Self, b: &Self, c: &Self, d: &Self) -> Option<Self> {
        a.checked_mul(*b)?.checked_sub(c.checked_mul(*d)?)
    }

    fn div_exact(&self, by: &Self) -> Self {
        debug_assert_eq!(self % by, 0);
        self / by
    }

    fn neg(&self) -> Option<Self> {
        self.checked_neg()
    }

    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl Ring for BigInt {
    fn from_big(v: &BigInt) -> Option<Self> {
        Some(v.clone())
    }

    fn is_nil(&self) -> bool {
        Zero::is_zero(self)
    }

    fn mul_sub(a: &Self, b: &Self, c: &Self, d: &Self) -> Option<Self> {
        Some(a * b - c * d)
    }

    fn div_exact(&self, by: &Self) -> Self {
        debug_assert!(Zero::is_zero(&(self % by)));
        self / by
    }

    fn neg(&self) -> Option<Self> {
        Some(-self)
    }

    fn to_big(&self) -> BigInt {
        self.clone()
    }
}

/// Fraction-free Gauss-Jordan on a dense integer matrix, stopping at the
/// first column without a pivot. Returns the kernel vector on the processed
/// columns scaled to integers (`x_free = det`), or `None` on overflow.
/// `Some(None)` means every column has a pivot.
#[allow(clippy::needless_range_loop)]
fn bareiss_kernel<T: Ring>(matrix: &[Vec<BigInt>], cols: usize) -> Option<Option<(usize, Vec<BigInt>)>> {
    let mut m: Vec<Vec<T>> = Vec::with_capacity(matrix.len());
    for row in matrix {
        m.push(row.iter().map(T::from_big).collect::<Option<Vec<T>>>()?);
    }
    let rows = m.len();
    let mut prev = T::from_big(&BigInt::one())?;
    let mut pivots: Vec<usize> = Vec::new();
    for c in 0..cols {
        let p = pivots.len();
        let Some(r) = (p..rows).find(|&r| !m[r][c].is_nil()) else {
            let mut v = vec![BigInt::zero(); c + 1];
            v[c] = prev.to_big();
            for (k, &pc) in pivots.iter().enumerate() {
                v[pc] = m[k][c].neg()?.to_big();
            }
            return Some(Some((c, v)));
        };
        m.swap(p, r);
        let pivot = m[p][c].clone();
        for i in 0..rows {
            if i == p {
                continue;
            }
            let factor = m[i][c].clone();
            for j in c..cols {
                let v = T::mul_sub(&pivot, &m[i][j], &factor, &m[p][j])?;
                m[i][j] = v.div_exact(&prev);
            }
        }
        for (i, &pc) in pivots.iter().enumerate() {
            m[i][pc] = pivot.clone();
        }
        prev = pivot;
        pivots.push(c);
    }
    Some(None)
}

/// A nonzero `v` with `A v = 0`: the lowest-index free variable is set to 1
/// and every later variable to 0, which is the reduced-echelon kernel vector.
/// With no rows this is the unit vector on the lowest unknown.
pub fn kernel_direction(lin: &LinearSystem) -> Option<BTreeMap<usize, Rational>> {
    let k = lin.unknowns.len();
    if k == 0 {
        return None;
    }
    // A free column always lies among the first rows + 1 columns.
    let cols = k.min(lin.rows.len() + 1);
    let index: BTreeMap<usize, usize> = lin.unknowns.iter().enumerate().map(|(j, &x)| (x, j)).collect();
    let matrix: Vec<Vec<BigInt>> = lin
        .rows
        .iter()
        .map(|r| {
            let mut dense = vec![BigInt::zero(); cols];
            for (x, a) in &r.coeffs {
                if let Some(&j) = index.get(x).filter(|&&j| j < cols) {
                    dense[j] = a.clone();
                }
            }
            dense
        })
        .collect();
    let found = bareiss_kernel::<i128>(&matrix, cols)
        .unwrap_or_else(|| bareiss_kernel::<BigInt>(&matrix, cols).expect("big integers do not overflow"))?;
    let (free, scaled) = found;
    let det = big(&scaled[free]);
    Some(
        scaled
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.is_zero())
            .map(|(j, a)| (lin.unknowns[j], big(a) / &det))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    pub chi: FloatingColoring,
    /// Sign actually applied to the direction.
    pub sign: Sign,
    pub step: Rational,
    /// Elements that became frozen, ascending.
    pub frozen: Vec<usize>,
}

/// Moves `chi` along `sign * v` for the preferred sign first, as far as the
/// box `[-1, 1]` allows. `v` must be supported on floating elements.
pub fn walk_to_boundary(chi: &FloatingColoring, v: &BTreeMap<usize, Rational>, prefer: Sign) -> Option<Walk> {
    for sign in prefer.both() {
        let s = sign.as_rational();
        let limit = v
            .iter()
            .filter(|(_, a)| !a.is_zero())
            .map(|(&x, a)| {
                let dir = &s * a;
                let toward = if dir.is_positive() { Rational::one() } else { -Rational::one() };
                (toward - chi.get(x)) / dir
            })
            .min()?;
        if !limit.is_positive() {
            continue;
        }
        let mut next = chi.clone();
        let mut frozen = Vec::new();
        for (&x, a) in v {
            let value = chi.get(x) + &s * a * &limit;
            next.set(x, value).ok()?;
            if next.is_frozen(x) && !chi.is_frozen(x) {
                frozen.push(x);
            }
        }
        return Some(Walk { chi: next, sign, step: limit, frozen });
    }
    None
}
