//! The classic floating-color algorithm: every set with more than `d`
//! floating elements is kept at `chi(S) = 0` while the rest move. Smaller
//! sets that could still end above `2d - 2` are also kept balanced while
//! there is room.

use num_traits::{Signed, ToPrimitive};

use crate::engine::{Guarantee, RunResult};
use crate::error::{Error, Result};
use crate::perturb::{kernel_direction, walk_to_boundary, LinearSystem};
use crate::rational::Rational;
use crate::state::Sign;
use crate::system::{all_stats, discrepancy_of, FloatingColoring, SetSystem};

/// Sets with more than `d` floating elements.
pub fn active_sets(sys: &SetSystem, chi: &FloatingColoring) -> Vec<usize> {
    let d = sys.degree();
    all_stats(sys, chi).iter().enumerate().filter(|(_, s)| s.sz > d).map(|(i, _)| i).collect()
}

/// The active sets, followed by sets with at most `d` floating elements
/// whose threat still exceeds `2d - 2`, in ascending order while the rows
/// stay fewer than the floating elements.
pub fn balanced_rows(sys: &SetSystem, chi: &FloatingColoring) -> Vec<usize> {
    let d = sys.degree();
    let limit = Rational::from_integer((2 * d as i64 - 2).into());
    let floating = chi.floating().count();
    let stats = all_stats(sys, chi);
    let mut rows = active_sets(sys, chi);
    for (i, s) in stats.iter().enumerate() {
        if rows.len() + 1 >= floating {
            break;
        }
        if s.sz > 0 && s.sz <= d && s.th > limit {
            rows.push(i);
        }
    }
    rows.sort_unstable();
    rows
}

/// Runs the classic algorithm. Each perturbation is counted as one step
/// (histogram slot 8); no trace is kept.
pub fn classic_beck_fiala(sys: &SetSystem) -> Result<RunResult> {
    let mut chi = FloatingColoring::zeros(sys.n());
    let mut steps = 0u64;
    while !chi.all_frozen() {
        let rows = balanced_rows(sys, &chi);
        let lin = LinearSystem::balanced_sets(sys, &chi, &rows);
        if lin.unknowns.len() <= lin.rows.len() {
            return Err(Error::Internal(format!(
                "{} balanced sets but only {} floating elements",
                lin.rows.len(),
                lin.unknowns.len()
            )));
        }
        let v = kernel_direction(&lin).ok_or_else(|| Error::Internal("no kernel direction".into()))?;
        let walk =
            walk_to_boundary(&chi, &v, Sign::Plus).ok_or_else(|| Error::Internal("direction cannot move".into()))?;
        chi = walk.chi;
        steps += 1;
    }
    let d = sys.degree() as i64;
    let mut histogram = [0u64; 9];
    histogram[7] = steps;
    Ok(RunResult {
        discrepancy: discrepancy_of(sys, &chi).abs().to_integer().to_i64().expect("discrepancy fits in i64"),
        final_coloring: chi,
        bound: if d >= 2 { 2 * d - 2 } else { 2 * d - 1 },
        steps_executed: steps,
        step_histogram: histogram,
        trace: None,
        guarantee_claimed: if d >= 2 { Guarantee::Classic } else { Guarantee::None },
        invariant_checks: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle() {
        let sys = SetSystem::new(3, vec![vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        let res = classic_beck_fiala(&sys).unwrap();
        assert!(res.final_coloring.all_frozen());
        assert!(res.discrepancy <= 2);
        assert_eq!(res.bound, 2);
    }

    #[test]
    fn disjoint_sets() {
        let sys = SetSystem::new(7, vec![vec![0, 1, 2], vec![3, 4], vec![5, 6]]).unwrap();
        let res = classic_beck_fiala(&sys).unwrap();
        assert!(res.discrepancy <= 1);
        assert_eq!(res.guarantee_claimed, Guarantee::None);
    }

    #[test]
    fn dangerous_small_sets_join_the_rows() {
        // d = 2: {0, 1} has Th = 2 <= 2d - 2 and is never a row; {2, 3, 4}
        // with 4 frozen at -1 has Sz = 2 and Th- = 3 > 2.
        let sys = SetSystem::new(6, vec![vec![0, 1], vec![2, 3, 4], vec![0, 5], vec![1, 2]]).unwrap();
        let mut chi = FloatingColoring::zeros(6);
        chi.set(4, Rational::from_integer((-1).into())).unwrap();
        assert!(active_sets(&sys, &chi).is_empty());
        assert_eq!(balanced_rows(&sys, &chi), vec![1]);
        for x in [0, 1, 3] {
            chi.set(x, Rational::from_integer(1.into())).unwrap();
        }
        // Two floating elements leave room for one row only.
        assert!(balanced_rows(&sys, &chi).len() < 2);
    }

    #[test]
    fn large_sets_stay_balanced_while_active() {
        let sys = SetSystem::new(8, vec![(0..8).collect(), vec![0, 1, 2, 3]]).unwrap();
        let res = classic_beck_fiala(&sys).unwrap();
        assert!(res.discrepancy <= 2);
    }
}
