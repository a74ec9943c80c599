//! Shared result plumbing: verdicts, resource caps and search statistics.

use serde::Serialize;

use crate::lts::{Lts, StateId};

/// Resource caps for the search-based procedures.  `None` means unlimited;
/// the defaults are unlimited.  Hitting a cap never produces a guessed
/// answer: the result is reported with `complete = false`.
#[derive(Debug, Clone, Default)]
pub struct Caps {
    /// Maximum number of search nodes expanded in a single query.
    pub max_nodes: Option<u64>,
    /// Maximum number of satisfiability checks in a single query.
    pub max_sat_calls: Option<u64>,
    /// Maximum number of subset choices enumerated per `A(sub)` site.
    pub max_sub_subsets: Option<u64>,
    /// Maximum number of `ConPro` scripts enumerated per formula.
    pub max_scripts: Option<u64>,
    /// Explore independent branches concurrently where supported.
    pub parallel: bool,
}

impl Caps {
    pub fn unlimited() -> Caps {
        Caps::default()
    }
}

/// Counters reported alongside every verdict.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct SearchStats {
    pub search_nodes: u64,
    pub sat_calls: u64,
    pub runtime_ms: u64,
}

/// Error raised internally when a cap from [`Caps`] is exhausted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CapExceeded(pub &'static str);

impl std::fmt::Display for CapExceeded {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "search cap exceeded: {}", self.0)
    }
}

impl std::error::Error for CapExceeded {}

/// Outcome of a decision query.
///
/// `value` is meaningful only when `complete` is true; an incomplete verdict
/// records that a cap was hit before the answer was established.  `witness`
/// and `counterexample` are rooted transition systems backing a positive or
/// negative answer when the procedure produces one.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub problem: String,
    pub value: bool,
    pub complete: bool,
    pub witness: Option<(Lts, StateId)>,
    pub counterexample: Option<((Lts, StateId), (Lts, StateId))>,
    pub detail: Option<String>,
    pub stats: SearchStats,
}

impl Verdict {
    pub fn new(problem: &str, value: bool) -> Verdict {
        Verdict {
            problem: problem.to_string(),
            value,
            complete: true,
            witness: None,
            counterexample: None,
            detail: None,
            stats: SearchStats::default(),
        }
    }

    /// An incomplete verdict after a cap was hit; `value` is set to `false`
    /// but carries no information.
    pub fn incomplete(problem: &str, cap: CapExceeded) -> Verdict {
        Verdict {
            problem: problem.to_string(),
            value: false,
            complete: false,
            witness: None,
            counterexample: None,
            detail: Some(cap.to_string()),
            stats: SearchStats::default(),
        }
    }

    pub fn with_witness(mut self, lts: Lts, root: StateId) -> Verdict {
        self.witness = Some((lts, root));
        self
    }

    pub fn with_counterexample(mut self, a: (Lts, StateId), b: (Lts, StateId)) -> Verdict {
        self.counterexample = Some((a, b));
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Verdict {
        self.detail = Some(detail.into());
        self
    }
}
