//! Label sets and their propositional closures.
//!
//! A label set is a finite set of formulae attached to a state of a
//! tableau or game tree.  Closure repeatedly replaces compound members by
//! their components: a conjunction by both conjuncts, a disjunction by a
//! chosen disjunct.  Negated compounds are reduced dually (a negated
//! disjunction by both negated disjuncts, a negated conjunction by a
//! chosen negated conjunct, double negations and negated constants by
//! their simplifications), so that closed sets consist of modal literals
//! (`<a>f`, `[a]f`, possibly negated) and constants only.  A closed set
//! clashes if it contains `ff` or a complementary pair.
//!
//! The replacement reading keeps closed sets small and makes the subset
//! tests used by pruning moves meaningful; it is satisfiability-preserving
//! because every replaced member is entailed by its replacements.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use crate::syntax::{Action, Formula};

/// A finite set of formulae labelling one state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LabelSet(BTreeSet<Formula>);

impl LabelSet {
    pub fn empty() -> LabelSet {
        LabelSet(BTreeSet::new())
    }

    pub fn singleton(f: Formula) -> LabelSet {
        LabelSet(BTreeSet::from([f]))
    }

    pub fn new<I: IntoIterator<Item = Formula>>(members: I) -> LabelSet {
        LabelSet(members.into_iter().collect())
    }

    pub fn insert(&mut self, f: Formula) -> bool {
        self.0.insert(f)
    }

    pub fn remove(&mut self, f: &Formula) -> bool {
        self.0.remove(f)
    }

    pub fn contains(&self, f: &Formula) -> bool {
        self.0.contains(f)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Formula> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn union(&self, other: &LabelSet) -> LabelSet {
        LabelSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn is_subset(&self, other: &LabelSet) -> bool {
        self.0.is_subset(&other.0)
    }

    /// Maximal modal depth over the members; 0 for the empty set.
    pub fn max_md(&self) -> u32 {
        self.0.iter().map(Formula::md).max().unwrap_or(0)
    }

    /// `ff` present, or a member together with its negation.
    pub fn has_clash(&self) -> bool {
        if self.0.contains(&Formula::Ff) {
            return true;
        }
        self.0.iter().any(|f| match f {
            Formula::Not(inner) => self.0.contains(inner),
            _ => false,
        })
    }

    /// No compound member awaits replacement.
    pub fn is_closed(&self) -> bool {
        self.0.iter().all(|f| reduction(f).is_none())
    }

    /// The diamond requirements of a closed set: `<a>f` contributes
    /// `(a, f)` and `![a]f` contributes `(a, !f)`.
    pub fn diamond_members(&self) -> Vec<(Action, Formula)> {
        let mut out = Vec::new();
        for f in &self.0 {
            match f {
                Formula::Diamond(a, body) => out.push((a.clone(), (**body).clone())),
                Formula::Not(inner) => {
                    if let Formula::Box_(a, body) = &**inner {
                        out.push((a.clone(), Formula::neg((**body).clone())));
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// What every `a`-successor must satisfy: `f` for each `[a]f` member
    /// and `!f` for each `!<a>f` member.
    pub fn box_content(&self, a: &Action) -> LabelSet {
        let mut out = LabelSet::empty();
        for f in &self.0 {
            match f {
                Formula::Box_(b, body) if b == a => {
                    out.insert((**body).clone());
                }
                Formula::Not(inner) => {
                    if let Formula::Diamond(b, body) = &**inner {
                        if b == a {
                            out.insert(Formula::neg((**body).clone()));
                        }
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Lazily enumerates the consistent closed sets reachable from this
    /// one, in a fixed deterministic order (left disjunct first).
    pub fn closures(&self) -> Closures {
        Closures {
            stack: vec![self.clone()],
            yielded: HashSet::new(),
        }
    }

    /// All consistent closures, deduplicated, in enumeration order.
    pub fn all_closures(&self) -> Vec<LabelSet> {
        self.closures().collect()
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, m) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{m}")?;
        }
        f.write_str("}")
    }
}

/// How one compound member is replaced.
pub(crate) enum Reduction {
    /// Replace the member by all listed formulae.
    All(Vec<Formula>),
    /// Replace the member by one of the listed formulae.
    Choice(Vec<Formula>),
}

/// The replacement rule for `f`, or `None` if `f` is a literal
/// (a constant or a possibly negated modality).
pub(crate) fn reduction(f: &Formula) -> Option<Reduction> {
    match f {
        Formula::And(l, r) => Some(Reduction::All(vec![(**l).clone(), (**r).clone()])),
        Formula::Or(l, r) => Some(Reduction::Choice(vec![(**l).clone(), (**r).clone()])),
        Formula::Not(inner) => match &**inner {
            Formula::And(l, r) => Some(Reduction::Choice(vec![
                Formula::neg((**l).clone()),
                Formula::neg((**r).clone()),
            ])),
            Formula::Or(l, r) => Some(Reduction::All(vec![
                Formula::neg((**l).clone()),
                Formula::neg((**r).clone()),
            ])),
            Formula::Not(g) => Some(Reduction::All(vec![(**g).clone()])),
            Formula::Tt => Some(Reduction::All(vec![Formula::Ff])),
            Formula::Ff => Some(Reduction::All(vec![Formula::Tt])),
            Formula::Diamond(_, _) | Formula::Box_(_, _) => None,
        },
        Formula::Tt | Formula::Ff | Formula::Diamond(_, _) | Formula::Box_(_, _) => None,
    }
}

/// Iterator over consistent closures; see [`LabelSet::closures`].
pub struct Closures {
    stack: Vec<LabelSet>,
    yielded: HashSet<LabelSet>,
}

impl Iterator for Closures {
    type Item = LabelSet;

    fn next(&mut self) -> Option<LabelSet> {
        while let Some(cur) = self.stack.pop() {
            // find the first member that still has a replacement rule
            let pick = cur.0.iter().find_map(|f| reduction(f).map(|r| (f.clone(), r)));
            match pick {
                None => {
                    if !cur.has_clash() && self.yielded.insert(cur.clone()) {
                        return Some(cur);
                    }
                }
                Some((member, Reduction::All(parts))) => {
                    let mut next = cur;
                    next.remove(&member);
                    for p in parts {
                        next.insert(p);
                    }
                    self.stack.push(next);
                }
                Some((member, Reduction::Choice(parts))) => {
                    // push in reverse so the first (left) choice pops first
                    for p in parts.into_iter().rev() {
                        let mut next = cur.clone();
                        next.remove(&member);
                        next.insert(p);
                        self.stack.push(next);
                    }
                }
            }
        }
        None
    }
}
