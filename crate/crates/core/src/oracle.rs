//! Exact minimum discrepancy by exhaustive enumeration.

use crate::error::{Error, Result};
use crate::system::SetSystem;

pub const DEFAULT_ORACLE_CAP: usize = 24;

/// `min over chi of max_S |chi(S)|`, enumerating colorings in Gray-code
/// order with element 0 fixed to `+1`.
pub fn brute_force_discrepancy(sys: &SetSystem) -> Result<i64> {
    brute_force_with_cap(sys, DEFAULT_ORACLE_CAP)
}

pub fn brute_force_with_cap(sys: &SetSystem, cap: usize) -> Result<i64> {
    let n = sys.n();
    if n > cap {
        return Err(Error::OracleCap { n, cap });
    }
    if n == 0 {
        return Ok(0);
    }
    let mut sums: Vec<i64> = sys.sets().iter().map(|s| s.len() as i64).collect();
    let mut colors = vec![1i8; n];
    let mut best = sums.iter().map(|s| s.abs()).max().unwrap_or(0);
    // Element i (1-based in the Gray sequence) flips at step k when bit i-1
    // is the lowest set bit of k.
    for k in 1u64..(1u64 << (n - 1)) {
        let x = k.trailing_zeros() as usize + 1;
        colors[x] = -colors[x];
        let delta = 2 * i64::from(colors[x]);
        for &s in sys.sets_containing(x) {
            sums[s] += delta;
        }
        let worst = sums.iter().map(|s| s.abs()).max().unwrap_or(0);
        best = best.min(worst);
        if best == 0 {
            break;
        }
    }
    Ok(best)
}
