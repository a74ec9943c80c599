//! Finite labelled transition systems.
//!
//! States are dense indices; transitions carry actions from the system's
//! alphabet.  All semantic operations in this crate assume loop-free
//! systems (the transition graph is acyclic), which [`validate_loop_free`]
//! checks and the constructors from process terms guarantee.
//!
//! `.aut` I/O follows the Aldebaran convention: a header
//! `des (<root>,<transition-count>,<state-count>)` followed by one
//! `(<src>,"<label>",<dst>)` line per transition.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::syntax::{Action, Alphabet, ProcessTerm};

/// Index of a state within an [`Lts`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identity token distinguishing transition systems, so that relation
/// tables cannot be applied to a system they were not computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LtsId(u64);

static NEXT_LTS_ID: AtomicU64 = AtomicU64::new(0);

fn fresh_lts_id() -> LtsId {
    LtsId(NEXT_LTS_ID.fetch_add(1, Ordering::Relaxed))
}

#[derive(Debug, Error)]
pub enum LtsError {
    #[error("state index {state} out of range (state count {count})")]
    StateOutOfRange { state: usize, count: usize },
    #[error("transition label `{0}` not in the alphabet")]
    UnknownLabel(String),
    #[error("cycle detected through state {0}")]
    CycleDetected(usize),
    #[error("{path}:{line}: {msg}")]
    AutFormat {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// A finite labelled transition system.  Immutable after construction.
#[derive(Debug, Clone)]
pub struct Lts {
    id: LtsId,
    alphabet: Alphabet,
    n_states: usize,
    transitions: Vec<(StateId, Action, StateId)>,
    succs: Vec<Vec<(Action, StateId)>>,
}

impl Lts {
    /// Builds a system from a transition list, validating state indices and
    /// labels.  Duplicate transitions are collapsed.  Cyclic systems are
    /// accepted here; use [`validate_loop_free`] to check acyclicity.
    pub fn new(
        alphabet: Alphabet,
        n_states: usize,
        transitions: Vec<(StateId, Action, StateId)>,
    ) -> Result<Lts, LtsError> {
        let mut set: BTreeSet<(StateId, Action, StateId)> = BTreeSet::new();
        for (src, a, dst) in transitions {
            for s in [src, dst] {
                if s.0 >= n_states {
                    return Err(LtsError::StateOutOfRange {
                        state: s.0,
                        count: n_states,
                    });
                }
            }
            if !alphabet.contains(&a) {
                return Err(LtsError::UnknownLabel(a.name().to_string()));
            }
            set.insert((src, a, dst));
        }
        let transitions: Vec<_> = set.into_iter().collect();
        let mut succs = vec![Vec::new(); n_states];
        for (src, a, dst) in &transitions {
            succs[src.0].push((a.clone(), *dst));
        }
        Ok(Lts {
            id: fresh_lts_id(),
            alphabet,
            n_states,
            transitions,
            succs,
        })
    }

    pub fn id(&self) -> LtsId {
        self.id
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.n_states).map(StateId)
    }

    /// All transitions, sorted.
    pub fn transitions(&self) -> &[(StateId, Action, StateId)] {
        &self.transitions
    }

    /// Outgoing transitions of `p`.
    pub fn succs(&self, p: StateId) -> &[(Action, StateId)] {
        &self.succs[p.0]
    }

    /// Outgoing `a`-transitions of `p`.
    pub fn succs_via<'a>(&'a self, p: StateId, a: &'a Action) -> impl Iterator<Item = StateId> + 'a {
        self.succs[p.0]
            .iter()
            .filter_map(move |(b, q)| (b == a).then_some(*q))
    }

    /// Returns an equal system over a larger alphabet.
    pub fn with_alphabet(&self, alphabet: Alphabet) -> Result<Lts, LtsError> {
        Lts::new(
            self.alphabet.union(&alphabet),
            self.n_states,
            self.transitions.clone(),
        )
    }

    /// Disjoint union.  States of `self` keep their indices; states of
    /// `other` are shifted by `self.n_states()` (the returned offset).
    pub fn disjoint_union(&self, other: &Lts) -> (Lts, usize) {
        let offset = self.n_states;
        let mut transitions = self.transitions.clone();
        transitions.extend(
            other
                .transitions
                .iter()
                .map(|(s, a, t)| (StateId(s.0 + offset), a.clone(), StateId(t.0 + offset))),
        );
        let lts = Lts::new(
            self.alphabet.union(&other.alphabet),
            self.n_states + other.n_states,
            transitions,
        )
        .expect("shifted indices remain in range");
        (lts, offset)
    }
}

/// States reachable from `p`, including `p`.
pub fn reach(l: &Lts, p: StateId) -> BTreeSet<StateId> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![p];
    while let Some(s) = stack.pop() {
        if seen.insert(s) {
            for (_, t) in l.succs(s) {
                stack.push(*t);
            }
        }
    }
    seen
}

/// Checks that the transition graph is acyclic.
pub fn validate_loop_free(l: &Lts) -> Result<(), LtsError> {
    // iterative three-colour depth-first search
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let mut mark = vec![Mark::White; l.n_states()];
    for root in 0..l.n_states() {
        if mark[root] != Mark::White {
            continue;
        }
        let mut stack = vec![(StateId(root), 0usize)];
        mark[root] = Mark::Grey;
        while let Some(top) = stack.last_mut() {
            let (s, i) = (top.0, top.1);
            if i < l.succs(s).len() {
                top.1 += 1;
                let t = l.succs(s)[i].1;
                match mark[t.0] {
                    Mark::Grey => return Err(LtsError::CycleDetected(t.0)),
                    Mark::White => {
                        mark[t.0] = Mark::Grey;
                        stack.push((t, 0));
                    }
                    Mark::Black => {}
                }
            } else {
                mark[s.0] = Mark::Black;
                stack.pop();
            }
        }
    }
    Ok(())
}

/// Length of the longest transition path from `p`.  Errors on cycles.
pub fn depth(l: &Lts, p: StateId) -> Result<u32, LtsError> {
    validate_loop_free(l)?;
    fn go(l: &Lts, p: StateId, memo: &mut HashMap<StateId, u32>) -> u32 {
        if let Some(&d) = memo.get(&p) {
            return d;
        }
        let d = l
            .succs(p)
            .iter()
            .map(|(_, t)| 1 + go(l, *t, memo))
            .max()
            .unwrap_or(0);
        memo.insert(p, d);
        d
    }
    Ok(go(l, p, &mut HashMap::new()))
}

/// Number of states reachable from `p` plus the number of transitions
/// between them.
pub fn process_size(l: &Lts, p: StateId) -> usize {
    let r = reach(l, p);
    let trans = l
        .transitions()
        .iter()
        .filter(|(s, _, _)| r.contains(s))
        .count();
    r.len() + trans
}

/// Translates a process term into a transition system with syntactic
/// subterm sharing: structurally identical subterms become one state.
/// Returns the system and the root state.
pub fn term_to_lts(t: &ProcessTerm, alphabet: &Alphabet) -> (Lts, StateId) {
    fn moves(t: &ProcessTerm, out: &mut Vec<(Action, ProcessTerm)>) {
        match t {
            ProcessTerm::Nil => {}
            ProcessTerm::Prefix(a, p) => out.push((a.clone(), (**p).clone())),
            ProcessTerm::Sum(l, r) => {
                moves(l, out);
                moves(r, out);
            }
        }
    }

    let mut index: HashMap<ProcessTerm, StateId> = HashMap::new();
    let mut transitions = Vec::new();
    let mut queue = vec![t.clone()];
    index.insert(t.clone(), StateId(0));
    let mut next = 1usize;
    while let Some(term) = queue.pop() {
        let src = index[&term];
        let mut ms = Vec::new();
        moves(&term, &mut ms);
        for (a, target) in ms {
            let dst = match index.get(&target) {
                Some(&id) => id,
                None => {
                    let id = StateId(next);
                    next += 1;
                    index.insert(target.clone(), id);
                    queue.push(target);
                    id
                }
            };
            transitions.push((src, a, dst));
        }
    }
    let mut full = alphabet.clone();
    if let Ok(mentioned) = Alphabet::new(t.actions()) {
        full = full.union(&mentioned);
    }
    let lts = Lts::new(full, next, transitions).expect("constructed indices are in range");
    (lts, StateId(0))
}

/// A fresh root whose outgoing transitions are those of `p` and `q`
/// combined: the transition-system analogue of CCS summation.  Returns the
/// extended system and the new root.
pub fn sum(l: &Lts, p: StateId, q: StateId) -> (Lts, StateId) {
    let root = StateId(l.n_states());
    let mut transitions = l.transitions().to_vec();
    for s in [p, q] {
        for (a, t) in l.succs(s) {
            transitions.push((root, a.clone(), *t));
        }
    }
    let lts = Lts::new(l.alphabet().clone(), l.n_states() + 1, transitions)
        .expect("existing indices remain valid");
    (lts, root)
}

/// Reads an `.aut` file.  The alphabet is the set of labels mentioned.
/// Cyclic inputs are rejected.
pub fn read_aut(path: &Path) -> Result<(Lts, StateId), LtsError> {
    let text = std::fs::read_to_string(path).map_err(|source| LtsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_aut(&text, &path.display().to_string())
}

/// Parses `.aut` text; `origin` is used in error messages.
pub fn parse_aut(text: &str, origin: &str) -> Result<(Lts, StateId), LtsError> {
    let err = |line: usize, msg: String| LtsError::AutFormat {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (header_no, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty file".to_string()))?;
    let header = header.trim();
    let inner = header
        .strip_prefix("des")
        .map(str::trim)
        .and_then(|r| r.strip_prefix('('))
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| err(header_no + 1, format!("malformed header `{header}`")))?;
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(err(header_no + 1, format!("malformed header `{header}`")));
    }
    let parse_num = |s: &str, line: usize| {
        s.parse::<usize>()
            .map_err(|_| err(line, format!("expected number, found `{s}`")))
    };
    let root = parse_num(parts[0], header_no + 1)?;
    let n_trans = parse_num(parts[1], header_no + 1)?;
    let n_states = parse_num(parts[2], header_no + 1)?;

    let mut labels: BTreeSet<Action> = BTreeSet::new();
    let mut transitions = Vec::new();
    for (i, raw) in lines {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let inner = line
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| err(line_no, format!("malformed transition `{line}`")))?;
        // split on the quoted label to allow commas inside nothing: labels are
        // identifiers, so a simple three-way split suffices
        let mut fields = inner.splitn(3, ',').map(str::trim);
        let (src, label, dst) = match (fields.next(), fields.next(), fields.next()) {
            (Some(s), Some(l), Some(d)) => (s, l, d),
            _ => return Err(err(line_no, format!("malformed transition `{line}`"))),
        };
        let label = label
            .strip_prefix('"')
            .and_then(|r| r.strip_suffix('"'))
            .ok_or_else(|| err(line_no, format!("label must be quoted in `{line}`")))?;
        let action = Action::new(label)
            .map_err(|e| err(line_no, e.msg))?;
        labels.insert(action.clone());
        transitions.push((
            StateId(parse_num(src, line_no)?),
            action,
            StateId(parse_num(dst, line_no)?),
        ));
    }
    if transitions.len() != n_trans {
        return Err(err(
            1,
            format!(
                "header declares {n_trans} transitions, found {}",
                transitions.len()
            ),
        ));
    }
    if root >= n_states {
        return Err(err(1, format!("root {root} out of range")));
    }
    if labels.is_empty() {
        // a system without transitions still needs a non-empty alphabet
        labels.insert(Action::new("a").expect("valid"));
    }
    let lts = Lts::new(Alphabet::new(labels).expect("non-empty"), n_states, transitions)?;
    validate_loop_free(&lts)?;
    Ok((lts, StateId(root)))
}

/// Serializes to `.aut` text with `root` as the initial state.
pub fn write_aut(l: &Lts, root: StateId) -> String {
    let mut out = format!(
        "des ({},{},{})\n",
        root.0,
        l.transitions().len(),
        l.n_states()
    );
    for (src, a, dst) in l.transitions() {
        out.push_str(&format!("({},\"{}\",{})\n", src.0, a, dst.0));
    }
    out
}

/// Writes an `.aut` file.
pub fn write_aut_file(l: &Lts, root: StateId, path: &Path) -> Result<(), LtsError> {
    std::fs::write(path, write_aut(l, root)).map_err(|source| LtsError::Io {
        path: path.display().to_string(),
        source,
    })
}
