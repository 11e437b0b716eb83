//! JSONL traces: one step record per line.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::engine::{StepRecord, Verdict};
use crate::error::{Error, Result};

pub fn to_jsonl(records: &[StepRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("step records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[StepRecord]) -> std::io::Result<()> {
    w.write_all(to_jsonl(records).as_bytes())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<StepRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Malformed(format!("line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Malformed(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn parse_jsonl(text: &str) -> Result<Vec<StepRecord>> {
    read_jsonl(text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceSummary {
    pub records: usize,
    pub step_histogram: [u64; 9],
    pub frozen_total: u64,
    /// Stages of non-disbanding steps whose potential did not increase.
    pub potential_stalls: Vec<u64>,
    /// Stages whose recorded invariant check failed.
    pub invariant_failures: Vec<u64>,
    /// Stages that are not consecutive from 0.
    pub stage_gaps: Vec<u64>,
}

impl TraceSummary {
    pub fn new(records: &[StepRecord]) -> Self {
        let mut step_histogram = [0u64; 9];
        let mut potential_stalls = Vec::new();
        let mut invariant_failures = Vec::new();
        let mut stage_gaps = Vec::new();
        for (i, r) in records.iter().enumerate() {
            if let Some(slot) = usize::from(r.step).checked_sub(1).and_then(|k| step_histogram.get_mut(k)) {
                *slot += 1;
            }
            if r.step != 5 && r.potential_after <= r.potential_before {
                potential_stalls.push(r.stage);
            }
            if r.invariants == Some(Verdict::Fail) {
                invariant_failures.push(r.stage);
            }
            if r.stage != i as u64 {
                stage_gaps.push(r.stage);
            }
        }
        Self {
            records: records.len(),
            step_histogram,
            frozen_total: records.iter().map(|r| r.frozen_delta).sum(),
            potential_stalls,
            invariant_failures,
            stage_gaps,
        }
    }

    pub fn is_clean(&self) -> bool {
        self.potential_stalls.is_empty() && self.invariant_failures.is_empty() && self.stage_gaps.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::StepWitness;
    use crate::state::Sign;

    fn rec(stage: u64, step: u8, before: i64, after: i64) -> StepRecord {
        StepRecord {
            stage,
            step,
            witnesses: StepWitness::Round { element: 0, sign: Sign::Minus },
            potential_before: before,
            potential_after: after,
            frozen_delta: u64::from(step == 3),
            invariants: Some(Verdict::Pass),
        }
    }

    #[test]
    fn round_trip() {
        let records = vec![rec(0, 3, 0, 1), rec(1, 5, 1, 0)];
        let text = to_jsonl(&records);
        assert_eq!(text.lines().count(), 2);
        assert_eq!(parse_jsonl(&text).unwrap(), records);
    }

    #[test]
    fn bad_line_is_reported() {
        let err = parse_jsonl("{\"stage\":0}\n").unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn summary_flags_stalls() {
        let s = TraceSummary::new(&[rec(0, 3, 0, 1), rec(1, 5, 1, 0), rec(2, 1, 0, 0)]);
        assert_eq!(s.step_histogram[2], 1);
        assert_eq!(s.potential_stalls, vec![2]);
        assert_eq!(s.frozen_total, 1);
        assert!(!s.is_clean());
    }
}
