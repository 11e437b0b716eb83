//! Two-coloring of bounded-degree set systems with floating colors.
//!
//! Two algorithms are provided:
//!
//! * [`classic_beck_fiala`], the textbook floating-color procedure, which
//!   keeps every large set balanced while there is room to perturb;
//! * the cohort algorithm ([`engine::run`]), which additionally rounds
//!   nearly-frozen elements, groups troublesome sets into cohorts around a
//!   shared banner element and clamps the banner in the perturbation step.
//!   Its target bound is `2d - delta`.
//!
//! All colors are exact rationals so that freezing (`chi(x) = +-1`) is an
//! exact test. Every invariant of the cohort algorithm is available as a
//! runtime predicate in [`invariants`], and [`oracle`] provides an exact
//! brute-force discrepancy for small systems.

pub mod classic;
pub mod cohort;
pub mod constants;
pub mod engine;
pub mod error;
pub mod generate;
pub mod invariants;
pub mod oracle;
pub mod perturb;
pub mod rational;
pub mod state;
pub mod system;
pub mod trace;

pub use classic::classic_beck_fiala;
pub use constants::{check_inequalities, log_star, paper_profile, r_term, ConstantProfile};
pub use engine::{run, CheckMode, RunOptions, RunResult};
pub use error::{Error, Result};
pub use rational::Rational;
pub use state::{AlgorithmState, Cohort, Edge, Sign};
pub use system::{discrepancy_of, parse_set_system, set_stats, FloatingColoring, SetStats, SetSystem};
