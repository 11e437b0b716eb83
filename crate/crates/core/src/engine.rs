//! Greedy step dispatch and the run loop of the cohort algorithm.

use std::sync::Arc;

use num_traits::{Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::cohort::{beyond_threshold, charge_diagnostics, find_seed, nearly_frozen_sets};
use crate::constants::{check_inequalities, ConstantProfile};
use crate::error::{Error, Result};
use crate::invariants::check_invariants;
use crate::perturb::{build_equations, kernel_direction, walk_to_boundary};
use crate::rational::{self, Rational};
use crate::state::{init_state, AlgorithmState, Cohort, Edge, Sign};
use crate::system::{discrepancy_of, FloatingColoring, SetSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckMode {
    #[default]
    Off,
    PerStep,
    /// Check after every k-th step.
    Every(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub check: CheckMode,
    pub trace: bool,
    /// Defaults to ten times the termination bound.
    pub step_cap: Option<u64>,
    /// Sign tried first wherever the algorithm has a free sign choice.
    /// `Minus` produces the mirror image of a `Plus` run.
    pub polarity: Sign,
    /// Recorded for reproducibility; every choice in a run is deterministic.
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { check: CheckMode::Off, trace: false, step_cap: None, polarity: Sign::Plus, seed: 0 }
    }
}

/// What a fired guard selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    GenBenign(usize),
    EmptyCohort(usize),
    Round { element: usize, sign: Sign },
    CohortBenign { cohort: usize, set: usize },
    Disband(usize),
    Finish { cohort: usize, edge: Edge },
    Match { cohort: usize, edge: Edge },
    Perturb,
    NewCohort,
}

impl Action {
    pub fn step_id(&self) -> u8 {
        match self {
            Self::GenBenign(_) => 1,
            Self::EmptyCohort(_) => 2,
            Self::Round { .. } => 3,
            Self::CohortBenign { .. } => 4,
            Self::Disband(_) => 5,
            Self::Finish { .. } => 6,
            Self::Match { .. } => 7,
            Self::Perturb => 8,
            Self::NewCohort => 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepWitness {
    GenBenign { set: usize },
    EmptyCohort { cohort: usize },
    Round { element: usize, sign: Sign },
    CohortBenign { cohort: usize, set: usize },
    Disband { cohort: usize, banner: usize, sets: Vec<usize> },
    FinishMatch { cohort: usize, survivor: usize, loser: usize, survivor_benign: bool },
    Match { cohort: usize, edge: Edge },
    Perturb { rows: usize, floating: usize, sign: Sign, step: String, frozen: Vec<usize> },
    NewCohort { banner: usize, sign: Sign, rank: u32, members: Vec<usize> },
}

impl StepWitness {
    pub fn mirrored(&self) -> Self {
        let mut w = self.clone();
        match &mut w {
            Self::Round { sign, .. } | Self::Perturb { sign, .. } | Self::NewCohort { sign, .. } => *sign = sign.flip(),
            _ => {}
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub stage: u64,
    pub step: u8,
    pub witnesses: StepWitness,
    pub potential_before: i64,
    pub potential_after: i64,
    pub frozen_delta: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariants: Option<Verdict>,
}

impl StepRecord {
    pub fn mirrored(&self) -> Self {
        Self { witnesses: self.witnesses.mirrored(), ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Guarantee {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "classic-2d-2")]
    Classic,
    #[serde(rename = "cohort-2d-delta")]
    Cohort,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunResult {
    pub final_coloring: FloatingColoring,
    pub discrepancy: i64,
    /// Bound the algorithm certifies for this output: `2d - delta` for the
    /// cohort algorithm, `2d - 2` (`2d - 1` at `d = 1`) for the classic one.
    pub bound: i64,
    pub steps_executed: u64,
    pub step_histogram: [u64; 9],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<StepRecord>>,
    pub guarantee_claimed: Guarantee,
    pub invariant_checks: u64,
}

/// `d |X| (|X| + 4 |F|)`, saturating.
pub fn termination_bound(sys: &SetSystem) -> u64 {
    let (d, n, m) = (sys.degree() as u64, sys.n() as u64, sys.num_sets() as u64);
    d.saturating_mul(n).saturating_mul(n.saturating_add(m.saturating_mul(4)))
}

fn th_int(q: &Rational) -> i64 {
    q.to_integer().to_i64().expect("threat fits in i64")
}

/// Evaluates the condition of step `step_id` on `st`.
pub fn guard(step_id: u8, st: &AlgorithmState, polarity: Sign) -> Option<Action> {
    let bound = st.benign_bound();
    let d = st.d();
    match step_id {
        1 => {
            let stats = st.stats();
            st.pool.iter().copied().find(|&s| th_int(&stats[s].th) <= bound).map(Action::GenBenign)
        }
        2 => st.cohorts.iter().position(|c| c.members.is_empty()).map(Action::EmptyCohort),
        3 => {
            let stats = st.stats();
            st.chi.floating().find_map(|x| {
                polarity.both().into_iter().find_map(|sign| {
                    let blocked = st
                        .sys
                        .sets_containing(x)
                        .iter()
                        .any(|&s| st.pool.contains(&s) && stats[s].sz > d && th_int(stats[s].threat(sign)) > bound);
                    (beyond_threshold(st, x, sign) && !blocked).then_some(Action::Round { element: x, sign })
                })
            })
        }
        4 => {
            let stats = st.stats();
            st.cohorts
                .iter()
                .enumerate()
                .flat_map(|(i, c)| c.unmatched().map(move |s| (s, i)))
                .filter(|&(s, _)| th_int(&stats[s].th) <= bound)
                .min()
                .map(|(set, cohort)| Action::CohortBenign { cohort, set })
        }
        5 => st.cohorts.iter().position(|c| st.chi.is_frozen(c.banner)).map(Action::Disband),
        6 => {
            let stats = st.stats();
            st.cohorts
                .iter()
                .enumerate()
                .flat_map(|(i, c)| c.matching.iter().map(move |&e| (e, i)))
                .filter(|&(e, _)| {
                    let dd = st.defeats_of(e.0);
                    dd == st.defeats_of(e.1) && (stats[e.0].sz + stats[e.1].sz + (1usize << (dd + 1).min(62)) - 2) <= d
                })
                .min()
                .map(|(edge, cohort)| Action::Finish { cohort, edge })
        }
        7 => st
            .cohorts
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let free: Vec<usize> = c.unmatched().collect();
                free.iter()
                    .enumerate()
                    .find_map(|(k, &s)| {
                        free[k + 1..].iter().find(|&&t| st.defeats_of(t) == st.defeats_of(s)).map(|&t| Edge::new(s, t))
                    })
                    .map(|e| (e, i))
            })
            .min()
            .map(|(edge, cohort)| Action::Match { cohort, edge }),
        8 => {
            let rows = st.pool.len() + st.cohorts.iter().map(|c| c.members.len() - c.matching.len()).sum::<usize>();
            (st.floating_count() > rows).then_some(Action::Perturb)
        }
        9 => (st.benign.len() < st.sys.num_sets()).then_some(Action::NewCohort),
        _ => None,
    }
}

/// The first step whose condition holds, or `None` at termination.
pub fn dispatch(st: &AlgorithmState, polarity: Sign) -> Option<Action> {
    (1..=9).find_map(|k| guard(k, st, polarity))
}

fn remove_member(st: &mut AlgorithmState, cohort: usize, s: usize) {
    st.cohorts[cohort].members.remove(&s);
    st.defeats.remove(&s);
}

fn no_seed_diagnostic(st: &AlgorithmState) -> String {
    let (plus, minus) = nearly_frozen_sets(st);
    let diag = charge_diagnostics(st);
    format!(
        "no banner lies in W = {} pool sets of a common threat; |G| = {}, |B+| = {}, |B-| = {}, negative-charge elements = {:?}",
        st.profile.w(),
        st.pool.len(),
        plus.len(),
        minus.len(),
        diag.negative_elements
    )
}

/// Applies `action` to `st`. `stage` is only used for diagnostics.
pub fn apply(st: &mut AlgorithmState, action: Action, polarity: Sign, stage: u64) -> Result<StepWitness> {
    let bound = st.benign_bound();
    Ok(match action {
        Action::GenBenign(s) => {
            st.pool.remove(&s);
            st.benign.insert(s);
            StepWitness::GenBenign { set: s }
        }
        Action::EmptyCohort(i) => {
            st.cohorts.remove(i);
            StepWitness::EmptyCohort { cohort: i }
        }
        Action::Round { element, sign } => {
            st.chi.set(element, sign.as_rational())?;
            StepWitness::Round { element, sign }
        }
        Action::CohortBenign { cohort, set } => {
            remove_member(st, cohort, set);
            st.benign.insert(set);
            StepWitness::CohortBenign { cohort, set }
        }
        Action::Disband(i) => {
            let c = st.cohorts.remove(i);
            for &s in &c.members {
                st.defeats.remove(&s);
                st.pool.insert(s);
            }
            StepWitness::Disband { cohort: i, banner: c.banner, sets: c.members.into_iter().collect() }
        }
        Action::Finish { cohort, edge } => {
            let (sa, sb) = (st.sys.set(edge.0), st.sys.set(edge.1));
            let size = |set: &[usize]| set.iter().filter(|&&x| !st.chi.is_frozen(x)).count();
            let (survivor, loser) = if size(sa) >= size(sb) { (edge.0, edge.1) } else { (edge.1, edge.0) };
            st.cohorts[cohort].matching.remove(&edge);
            remove_member(st, cohort, loser);
            st.benign.insert(loser);
            let th = th_int(&crate::system::set_stats(&st.sys, &st.chi, survivor).th);
            let survivor_benign = th <= bound;
            if survivor_benign {
                remove_member(st, cohort, survivor);
                st.benign.insert(survivor);
            } else {
                *st.defeats.get_mut(&survivor).expect("cohort member has a defeat count") += 1;
            }
            StepWitness::FinishMatch { cohort, survivor, loser, survivor_benign }
        }
        Action::Match { cohort, edge } => {
            st.cohorts[cohort].matching.insert(edge);
            StepWitness::Match { cohort, edge }
        }
        Action::Perturb => {
            let lin = build_equations(st);
            let v = kernel_direction(&lin).ok_or_else(|| {
                Error::Internal(format!("stage {stage}: no kernel direction with more unknowns than rows"))
            })?;
            let walk = walk_to_boundary(&st.chi, &v, polarity)
                .ok_or_else(|| Error::Internal(format!("stage {stage}: kernel direction cannot move")))?;
            st.chi = walk.chi;
            StepWitness::Perturb {
                rows: lin.rows.len(),
                floating: lin.unknowns.len(),
                sign: walk.sign,
                step: rational::format(&walk.step),
                frozen: walk.frozen,
            }
        }
        Action::NewCohort => {
            let seed =
                find_seed(st).ok_or_else(|| Error::NoCohortSeed { stage, diagnostic: no_seed_diagnostic(st) })?;
            seed.validate(st).map_err(|e| Error::Internal(format!("stage {stage}: invalid cohort seed: {e}")))?;
            for &s in &seed.members {
                st.pool.remove(&s);
                st.defeats.insert(s, 0);
            }
            st.cohorts.push(Cohort {
                members: seed.members.clone(),
                banner: seed.banner,
                sign: seed.sign,
                rank: seed.rank,
                matching: Default::default(),
            });
            StepWitness::NewCohort {
                banner: seed.banner,
                sign: seed.sign,
                rank: seed.rank,
                members: seed.members.into_iter().collect(),
            }
        }
    })
}

/// Executes one step. `None` once no condition holds.
pub fn execute(st: &mut AlgorithmState, polarity: Sign, stage: u64) -> Result<Option<StepRecord>> {
    let Some(action) = dispatch(st, polarity) else {
        return Ok(None);
    };
    let potential_before = st.potential();
    let frozen_before = st.chi.frozen_count();
    let witnesses = apply(st, action, polarity, stage)?;
    Ok(Some(StepRecord {
        stage,
        step: action.step_id(),
        witnesses,
        potential_before,
        potential_after: st.potential(),
        frozen_delta: (st.chi.frozen_count() - frozen_before) as u64,
        invariants: None,
    }))
}

/// Sets every floating element to `polarity` (`+1` by default). Only valid
/// once every set is benign.
pub fn round_residual(st: &AlgorithmState, polarity: Sign) -> Result<FloatingColoring> {
    if st.benign.len() != st.sys.num_sets() {
        return Err(Error::NotTerminated);
    }
    let mut chi = st.chi.clone();
    for x in st.chi.floating() {
        chi.set(x, polarity.as_rational())?;
    }
    Ok(chi)
}

pub type Observer<'a> = &'a mut dyn FnMut(&AlgorithmState, &StepRecord, &AlgorithmState);

fn violation(stage: u64, step: u8, st: &AlgorithmState, prev: Option<&AlgorithmState>) -> Result<()> {
    st.check_structure().map_err(|e| Error::Internal(format!("stage {stage}: {e}")))?;
    let report = check_invariants(prev, st);
    match report.first_failure() {
        None => Ok(()),
        Some(o) => Err(Error::InvariantViolation {
            stage,
            step,
            invariant: o.id,
            witness: o.witness.as_ref().map(ToString::to_string).unwrap_or_default(),
        }),
    }
}

pub fn run(sys: &SetSystem, profile: &ConstantProfile, opts: &RunOptions) -> Result<RunResult> {
    run_observed(sys, profile, opts, None)
}

/// [`run`] with a callback receiving `(before, record, after)` for every
/// executed step, including a step whose invariant check fails.
pub fn run_observed(
    sys: &SetSystem,
    profile: &ConstantProfile,
    opts: &RunOptions,
    observer: Option<Observer<'_>>,
) -> Result<RunResult> {
    run_from(init_state(Arc::new(sys.clone()), Arc::new(profile.clone())), opts, observer)
}

/// Continues the algorithm from an arbitrary state, such as a hand-built
/// mid-run configuration. The step cap and termination bound are counted
/// from this state.
pub fn run_from(mut st: AlgorithmState, opts: &RunOptions, mut observer: Option<Observer<'_>>) -> Result<RunResult> {
    let sys = Arc::clone(&st.sys);
    let profile = Arc::clone(&st.profile);
    let (sys, profile) = (sys.as_ref(), profile.as_ref());
    let bound_steps = termination_bound(sys);
    let cap = opts.step_cap.unwrap_or(bound_steps.saturating_mul(10));
    let mut histogram = [0u64; 9];
    let mut trace = opts.trace.then(Vec::new);
    let mut checks = 0u64;

    let mut last_checked = None;
    if opts.check != CheckMode::Off {
        violation(0, 0, &st, None)?;
        checks += 1;
        last_checked = Some(st.clone());
    }

    let mut stage = 0u64;
    loop {
        let keep_prev = observer.is_some() || opts.check == CheckMode::PerStep;
        let prev = keep_prev.then(|| st.clone());
        let Some(mut record) = execute(&mut st, opts.polarity, stage)? else { break };
        stage += 1;
        histogram[usize::from(record.step) - 1] += 1;

        let due = match opts.check {
            CheckMode::Off => false,
            CheckMode::PerStep => true,
            CheckMode::Every(k) => stage.is_multiple_of(k.max(1)),
        };
        let mut outcome = Ok(());
        if due {
            let before = if opts.check == CheckMode::PerStep { prev.as_ref() } else { last_checked.as_ref() };
            outcome = violation(record.stage, record.step, &st, before);
            checks += 1;
            record.invariants = Some(if outcome.is_ok() { Verdict::Pass } else { Verdict::Fail });
            if opts.check != CheckMode::PerStep {
                last_checked = Some(st.clone());
            }
        }
        if let (Some(obs), Some(prev)) = (observer.as_mut(), prev.as_ref()) {
            obs(prev, &record, &st);
        }
        if let Some(t) = trace.as_mut() {
            t.push(record);
        }
        outcome?;
        if stage >= cap && dispatch(&st, opts.polarity).is_some() {
            return Err(Error::StepCapExceeded { cap });
        }
    }

    let guarantee_claimed =
        if check_inequalities(profile, sys.degree() as u64).all_hold() { Guarantee::Cohort } else { Guarantee::None };
    if guarantee_claimed == Guarantee::Cohort && stage > bound_steps {
        return Err(Error::Internal(format!("{stage} steps exceed the termination bound {bound_steps}")));
    }
    let bound = st.benign_bound();
    if let Some(s) = st.stats().iter().position(|s| th_int(&s.th) > bound) {
        return Err(Error::Internal(format!("set {s} is not benign at termination")));
    }
    let final_coloring = round_residual(&st, opts.polarity)?;
    let discrepancy = discrepancy_of(sys, &final_coloring);
    Ok(RunResult {
        discrepancy: discrepancy.abs().to_integer().to_i64().expect("discrepancy fits in i64"),
        final_coloring,
        bound,
        steps_executed: stage,
        step_histogram: histogram,
        trace,
        guarantee_claimed,
        invariant_checks: checks,
    })
}
