//! Tableau-based satisfiability with model extraction.
//!
//! A formula is satisfiable iff a tableau rooted at `{f}` exists: some
//! consistent propositional closure of each label whose diamond
//! requirements can all be discharged one level down, with box members
//! folded into every successor label.  The search memoizes closed label
//! sets, so repeated queries (the game engines fire many) are cheap.
//!
//! Models are read off the successful tableau: one state per tableau node,
//! one transition per discharged diamond.  The extracted model is a tree
//! whose depth never exceeds the modal depth of the formula.
//!
//! Formulae in the negation-free fragment are decided by a polynomial
//! shortcut: conjunctions of satisfiable negation-free formulae are
//! satisfiable (their witnesses can be summed), so satisfiability is a
//! simple structural fold.

use std::collections::HashMap;

use crate::closure::{Closures, LabelSet};
use crate::lts::{term_to_lts, Lts, StateId};
use crate::semantics;
use crate::syntax::{Action, Alphabet, Formula, ProcessTerm};
use crate::verdict::{CapExceeded, Caps, Verdict};

/// The consistent propositional closures of a label set, lazily.
pub fn propositional_closures(l: &LabelSet) -> Closures {
    l.closures()
}

/// Reusable satisfiability engine with a memo over label sets.
pub struct Satisfier {
    max_sat_calls: Option<u64>,
    calls: u64,
    memo: HashMap<LabelSet, bool>,
}

impl Satisfier {
    pub fn new(caps: &Caps) -> Satisfier {
        Satisfier {
            max_sat_calls: caps.max_sat_calls,
            calls: 0,
            memo: HashMap::new(),
        }
    }

    /// Number of satisfiability queries answered so far (memo hits included).
    pub fn sat_calls(&self) -> u64 {
        self.calls
    }

    /// Is the conjunction of `l` satisfiable?
    pub fn satisfiable_set(&mut self, l: &LabelSet) -> Result<bool, CapExceeded> {
        self.calls += 1;
        if let Some(cap) = self.max_sat_calls {
            if self.calls > cap {
                return Err(CapExceeded("max_sat_calls"));
            }
        }
        if let Some(&v) = self.memo.get(l) {
            return Ok(v);
        }
        let mut value = false;
        for closed in l.closures() {
            if self.closed_sat(&closed)? {
                value = true;
                break;
            }
        }
        self.memo.insert(l.clone(), value);
        Ok(value)
    }

    /// Satisfiability of an already closed, consistent label set: every
    /// diamond requirement must be dischargeable one level down.
    fn closed_sat(&mut self, c: &LabelSet) -> Result<bool, CapExceeded> {
        if let Some(&v) = self.memo.get(c) {
            return Ok(v);
        }
        let mut value = true;
        for (a, body) in c.diamond_members() {
            let mut child = c.box_content(&a);
            child.insert(body);
            if !self.satisfiable_set(&child)? {
                value = false;
                break;
            }
        }
        self.memo.insert(c.clone(), value);
        Ok(value)
    }

    /// Reads a model off the tableau for a satisfiable label set.
    /// Precondition: `satisfiable_set(l)` returned true.
    pub fn extract_model(
        &mut self,
        l: &LabelSet,
        alphabet: &Alphabet,
    ) -> Result<(Lts, StateId), CapExceeded> {
        let mut transitions: Vec<(StateId, Action, StateId)> = Vec::new();
        let mut count = 0usize;
        let root = self.build_state(l, alphabet, &mut transitions, &mut count)?;
        let lts = Lts::new(alphabet.clone(), count, transitions)
            .expect("extracted transitions are well-formed by construction");
        Ok((lts, root))
    }

    fn build_state(
        &mut self,
        l: &LabelSet,
        alphabet: &Alphabet,
        transitions: &mut Vec<(StateId, Action, StateId)>,
        count: &mut usize,
    ) -> Result<StateId, CapExceeded> {
        let closed = {
            let mut found = None;
            for c in l.closures() {
                if self.closed_sat(&c)? {
                    found = Some(c);
                    break;
                }
            }
            found.expect("extract_model called on an unsatisfiable label set")
        };
        let me = StateId(*count);
        *count += 1;
        for (a, body) in closed.diamond_members() {
            let mut child = closed.box_content(&a);
            child.insert(body);
            let sub = self.build_state(&child, alphabet, transitions, count)?;
            transitions.push((me, a, sub));
        }
        Ok(me)
    }
}

/// Satisfiability of a negation-free formula, with a witness term.
/// Returns `None` when the desugared formula still contains a negation or
/// a box.  The check is syntactic on purpose: the fragment tag identifies
/// logically negation-free formulae (it normalizes `!ff` to level one, for
/// instance), but the witness construction below walks the raw tree.
///
/// Correctness of the conjunction case rests on upward preservation:
/// negation-free formulae survive the addition of branches, so the sum of
/// two witnesses satisfies both conjuncts.
fn sat_negation_free(f: &Formula) -> Option<Result<ProcessTerm, ()>> {
    fn negation_free(f: &Formula) -> bool {
        match f {
            Formula::Tt | Formula::Ff => true,
            Formula::And(l, r) | Formula::Or(l, r) => negation_free(l) && negation_free(r),
            Formula::Diamond(_, body) => negation_free(body),
            Formula::Not(_) | Formula::Box_(_, _) => false,
        }
    }
    fn go(f: &Formula) -> Result<ProcessTerm, ()> {
        match f {
            Formula::Tt => Ok(ProcessTerm::Nil),
            Formula::Ff => Err(()),
            Formula::And(l, r) => {
                let (wl, wr) = (go(l)?, go(r)?);
                Ok(ProcessTerm::sum(wl, wr))
            }
            Formula::Or(l, r) => go(l).or_else(|_| go(r)),
            Formula::Diamond(a, body) => Ok(ProcessTerm::prefix(a.clone(), go(body)?)),
            Formula::Box_(_, _) | Formula::Not(_) => unreachable!("checked negation-free"),
        }
    }
    let d = f.desugar();
    if !negation_free(&d) {
        return None;
    }
    Some(go(&d))
}

/// Decides satisfiability of `f` over `alphabet` and extracts a model on
/// success.  The model is a tree of depth at most `md(f)` and is verified
/// against the formula before being returned.
pub fn sat(f: &Formula, alphabet: &Alphabet, caps: &Caps) -> Verdict {
    let start = std::time::Instant::now();
    let mut v = match sat_negation_free(f) {
        Some(result) => {
            let mut v = Verdict::new("sat", result.is_ok());
            if let Ok(term) = result {
                let (lts, root) = term_to_lts(&term, alphabet);
                v = v.with_witness(lts, root);
            }
            v.with_detail("decided by the negation-free shortcut")
        }
        None => sat_general(f, alphabet, caps),
    };
    if let Some((model, root)) = &v.witness {
        assert!(
            semantics::models(model, *root, f),
            "extracted model fails its formula: {f}"
        );
        let depth = crate::lts::depth(model, *root).expect("extracted models are loop-free");
        assert!(depth <= f.md(), "extracted model deeper than md({f})");
    }
    v.stats.runtime_ms = start.elapsed().as_millis() as u64;
    v
}

/// The general tableau search, bypassing the negation-free shortcut.
/// Exposed within the crate so tests can compare the two paths.
pub(crate) fn sat_general(f: &Formula, alphabet: &Alphabet, caps: &Caps) -> Verdict {
    let mut engine = Satisfier::new(caps);
    let root = LabelSet::singleton(f.clone());
    let outcome = engine.satisfiable_set(&root).and_then(|value| {
        if value {
            engine.extract_model(&root, alphabet).map(Some)
        } else {
            Ok(None)
        }
    });
    let mut v = match outcome {
        Ok(Some((lts, sroot))) => Verdict::new("sat", true).with_witness(lts, sroot),
        Ok(None) => Verdict::new("sat", false),
        Err(cap) => Verdict::incomplete("sat", cap),
    };
    v.stats.sat_calls = engine.sat_calls();
    v
}
