//! Decision procedures specific to the level-2 fragment.
//!
//! The core is a nondeterministic model construction over tableau labels:
//! starting from `{φ}`, each dequeued state is closed (conjunctions
//! saturated, disjunctions resolved by choice), spawns one successor per
//! diamond member, and may then be extended with extra successors
//! carrying only box content — the extensions are what distinguish, say,
//! a model that merely satisfies `⟨a⟩tt` from one that also performs `b`.
//! A run either stops on an inconsistent label or outputs a finite tree
//! model of φ; the number of extension successors over a whole run is
//! bounded by `|φ|`.  All choices are recorded in a [`ChoiceScript`], so
//! runs are deterministic replays ([`conpro_run`]) and the full run space
//! can be enumerated ([`conpro_enumerate`]).
//!
//! Primality of a satisfiable φ in the fragment reduces to a universal
//! check over pairs of construction outputs: every pair must share a
//! maximal lower bound with respect to the 2-nested simulation preorder
//! ([`mlb_2s`]) that still satisfies φ.  [`prime_2s`] realizes the
//! quantification over the output space quotiented by the 2-nested
//! simulation kernel: the pair test only depends on the equivalence
//! classes of its arguments (the kernel refines similarity, maximal lower
//! bounds are unique up to the kernel, and equivalent processes satisfy
//! the same fragment formulae), and prefixing and summation are
//! congruences for the kernel, so classes may be deduplicated while the
//! output trees are assembled.  The class computation tracks the minimal
//! number of extension successors needed for each class and discards
//! classes that cannot be realized within the `|φ|` bound, which makes it
//! agree exactly with script enumeration; the tests cross-check the two
//! on small formulae.
//!
//! Classes are streamed cheapest-first and pair-tested on arrival rather
//! than enumerated up front: one refuting pair settles primality
//! negatively, so the search stops long before the class space — which
//! is astronomically large for permissive formulae such as `[a]tt | ψ` —
//! would be exhausted.  Only affirmative verdicts need the full space,
//! and formulae that are actually prime constrain their models tightly
//! enough to keep it small.  [`characteristic_2s`] settles the two
//! characteristic-formula questions on top: within the fragment via
//! satisfiability and primality, modulo the kernel by streaming until a
//! second kernel class appears.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, VecDeque};
use std::ops::ControlFlow;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::closure::{reduction, LabelSet, Reduction};
use crate::lts::{self, Lts, StateId};
use crate::preorders::{kernel, nsim_holds, bisim_holds};
use crate::syntax::{Action, Alphabet, Formula};
use crate::tableau;
use crate::verdict::{CapExceeded, Caps, Verdict};

/// A rule violation in a scripted replay or a violated precondition.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TwoSimError {
    #[error("malformed script: {0}")]
    Script(String),
    #[error("fragment violation: {0}")]
    Fragment(String),
}

/// One resolved disjunction: keep the left or the right component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// The extension decision for one dequeued state: skip, or create one
/// extra successor per listed action index (indices into the alphabet in
/// its canonical order).  The number of entries is the `N` of the block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoxPhase {
    Skip,
    Extend(Vec<usize>),
}

/// A complete record of the nondeterministic choices of one construction
/// run: disjunct resolutions in resolution order, and one extension
/// decision per dequeued state in dequeue order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChoiceScript {
    pub disjunct_picks: Vec<Side>,
    pub box_phases: Vec<BoxPhase>,
}

/// A successfully completed construction output: a finite tree model of
/// the input formula.
#[derive(Debug, Clone)]
pub struct ConProOutput {
    pub lts: Lts,
    pub root: StateId,
    /// Depth of each state in creation order.
    pub depth: Vec<u32>,
    /// Total successors created by extension blocks (never exceeds `|φ|`).
    pub box_children: u32,
}

/// The outcome of one construction run.
#[derive(Debug, Clone)]
pub enum ConProRun {
    /// Some label became inconsistent; the run has no output.
    Stopped,
    Output(ConProOutput),
}

/// All runs of the construction on one formula, up to the script cap.
#[derive(Debug, Clone)]
pub struct ConProStream {
    pub runs: Vec<ConProRun>,
    /// True when `max_scripts` ended the enumeration early.
    pub truncated: bool,
}

/// The two characteristic-formula readings decided by
/// [`characteristic_2s`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharMode {
    Within,
    Modulo,
}

fn check_fragment(phi: &Formula) -> Result<(), TwoSimError> {
    match phi.fragment_level().level() {
        Some(k) if k <= 2 => Ok(()),
        Some(k) => Err(TwoSimError::Fragment(format!(
            "the formula has nesting level {k}, outside the level-2 fragment"
        ))),
        None => Err(TwoSimError::Fragment(
            "the formula lies outside the nested-simulation hierarchy".into(),
        )),
    }
}

/// Where a partial replay ran out of script.
enum Partial {
    Done(ConProRun),
    NeedDisjunct,
    NeedBoxPhase { budget: u32 },
}

struct Replay {
    partial: Partial,
    used_picks: usize,
    used_phases: usize,
}

/// Plays the construction under `script`, stopping at the first choice
/// point the script does not cover.
fn replay(phi: &Formula, alphabet: &Alphabet, script: &ChoiceScript) -> Result<Replay, TwoSimError> {
    let cutoff = phi.md() + 1;
    let size = phi.size() as u32;
    let actions: Vec<Action> = alphabet.iter().cloned().collect();
    let mut labels: Vec<LabelSet> = vec![LabelSet::singleton(phi.clone())];
    let mut depth: Vec<u32> = vec![0];
    let mut edges: Vec<(StateId, Action, StateId)> = Vec::new();
    let mut queue: VecDeque<usize> = VecDeque::from([0]);
    let mut box_count: u32 = 0;
    let mut di = 0usize;
    let mut pi = 0usize;
    fn wrap(partial: Partial, di: usize, pi: usize) -> Result<Replay, TwoSimError> {
        Ok(Replay { partial, used_picks: di, used_phases: pi })
    }

    while let Some(s) = queue.pop_front() {
        // close the label: saturate the forced replacements, then resolve
        // the first pending disjunction by script, and repeat
        loop {
            loop {
                let forced = labels[s].iter().find_map(|f| match reduction(f) {
                    Some(Reduction::All(parts)) => Some((f.clone(), parts)),
                    _ => None,
                });
                match forced {
                    None => break,
                    Some((member, parts)) => {
                        labels[s].remove(&member);
                        for p in parts {
                            labels[s].insert(p);
                        }
                    }
                }
            }
            let choice = labels[s].iter().find_map(|f| match reduction(f) {
                Some(Reduction::Choice(parts)) => Some((f.clone(), parts)),
                _ => None,
            });
            let Some((member, parts)) = choice else { break };
            let Some(side) = script.disjunct_picks.get(di) else {
                return wrap(Partial::NeedDisjunct, di, pi);
            };
            di += 1;
            let kept = match side {
                Side::Left => parts[0].clone(),
                Side::Right => parts[1].clone(),
            };
            labels[s].remove(&member);
            labels[s].insert(kept);
        }
        if labels[s].has_clash() {
            return wrap(Partial::Done(ConProRun::Stopped), di, pi);
        }
        // one successor per diamond member, inheriting the box content
        for (a, psi) in labels[s].diamond_members() {
            let mut child = labels[s].box_content(&a);
            child.insert(psi);
            let id = labels.len();
            let d = depth[s] + 1;
            labels.push(child);
            depth.push(d);
            edges.push((StateId(s), a, StateId(id)));
            if labels[id].has_clash() {
                return wrap(Partial::Done(ConProRun::Stopped), di, pi);
            }
            if d < cutoff {
                queue.push_back(id);
            }
        }
        // the extension block: skip, or add the scripted successors
        let Some(phase) = script.box_phases.get(pi) else {
            return wrap(Partial::NeedBoxPhase { budget: size.saturating_sub(box_count) }, di, pi);
        };
        pi += 1;
        if let BoxPhase::Extend(picks) = phase {
            let n = picks.len() as u32;
            if n == 0 {
                return Err(TwoSimError::Script(
                    "an extension block must create at least one successor".into(),
                ));
            }
            if n > size.saturating_sub(box_count) {
                return Err(TwoSimError::Script(format!(
                    "extension block of size {n} exceeds the remaining budget {}",
                    size.saturating_sub(box_count)
                )));
            }
            for &j in picks {
                let Some(a) = actions.get(j) else {
                    return Err(TwoSimError::Script(format!(
                        "action index {j} out of range for an alphabet of {} actions",
                        actions.len()
                    )));
                };
                let child = labels[s].box_content(a);
                let id = labels.len();
                let d = depth[s] + 1;
                labels.push(child);
                depth.push(d);
                edges.push((StateId(s), a.clone(), StateId(id)));
                box_count += 1;
                if labels[id].has_clash() {
                    return wrap(Partial::Done(ConProRun::Stopped), di, pi);
                }
                if d < cutoff {
                    queue.push_back(id);
                }
            }
        }
    }
    assert!(box_count <= size, "extension successors exceeded the |φ| bound");
    let lts = Lts::new(alphabet.clone(), labels.len(), edges)
        .expect("construction states and labels are valid by construction");
    let output = ConProRun::Output(ConProOutput {
        lts,
        root: StateId(0),
        depth,
        box_children: box_count,
    });
    wrap(Partial::Done(output), di, pi)
}

/// Deterministically replays one construction run under `script`.
///
/// The script must cover the choice points exactly: missing entries are
/// an underrun, and entries left unread by a completed output are an
/// overrun.  A run that stops on an inconsistent label may leave later
/// entries unread.
pub fn conpro_run(
    phi: &Formula,
    alphabet: &Alphabet,
    script: &ChoiceScript,
) -> Result<ConProRun, TwoSimError> {
    check_fragment(phi)?;
    let r = replay(phi, alphabet, script)?;
    match r.partial {
        Partial::Done(run) => {
            if matches!(run, ConProRun::Output(_))
                && (r.used_picks < script.disjunct_picks.len()
                    || r.used_phases < script.box_phases.len())
            {
                return Err(TwoSimError::Script(
                    "script overrun: entries left unread by a completed run".into(),
                ));
            }
            Ok(run)
        }
        Partial::NeedDisjunct => Err(TwoSimError::Script(
            "script underrun: a disjunction was left unresolved".into(),
        )),
        Partial::NeedBoxPhase { .. } => Err(TwoSimError::Script(
            "script underrun: a dequeued state has no extension decision".into(),
        )),
    }
}

/// All extension decisions available under `budget`, in enumeration
/// order: skip first, then blocks by length and action index.
fn phase_variants(budget: u32, n_actions: usize) -> Vec<BoxPhase> {
    let mut out = vec![BoxPhase::Skip];
    let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..budget {
        let mut next = Vec::new();
        for prefix in &layer {
            for j in 0..n_actions {
                let mut v = prefix.clone();
                v.push(j);
                out.push(BoxPhase::Extend(v.clone()));
                next.push(v);
            }
        }
        layer = next;
    }
    out
}

/// Enumerates every construction run on φ, depth-first over scripts with
/// disjunct picks resolved left-first and extension blocks smallest-first.
/// Outputs are deduplicated up to bisimilarity; `max_scripts` bounds the
/// number of scripts visited and sets the truncation flag when exceeded.
pub fn conpro_enumerate(
    phi: &Formula,
    alphabet: &Alphabet,
    caps: &Caps,
) -> Result<ConProStream, TwoSimError> {
    check_fragment(phi)?;
    let mut runs: Vec<ConProRun> = Vec::new();
    let mut truncated = false;
    let mut visited: u64 = 0;
    let mut stack: Vec<ChoiceScript> = vec![ChoiceScript::default()];
    while let Some(script) = stack.pop() {
        if let Some(max) = caps.max_scripts {
            if visited >= max {
                truncated = true;
                break;
            }
        }
        visited += 1;
        match replay(phi, alphabet, &script)?.partial {
            Partial::Done(run) => match run {
                ConProRun::Stopped => runs.push(ConProRun::Stopped),
                ConProRun::Output(o) => {
                    assert!(
                        crate::semantics::models(&o.lts, o.root, phi),
                        "a completed construction output must satisfy the input formula"
                    );
                    let fresh = !runs.iter().any(|r| match r {
                        ConProRun::Output(seen) => {
                            bisim_holds(&seen.lts, seen.root, &o.lts, o.root)
                        }
                        ConProRun::Stopped => false,
                    });
                    if fresh {
                        runs.push(ConProRun::Output(o));
                    }
                }
            },
            Partial::NeedDisjunct => {
                for side in [Side::Right, Side::Left] {
                    let mut s = script.clone();
                    s.disjunct_picks.push(side);
                    stack.push(s);
                }
            }
            Partial::NeedBoxPhase { budget } => {
                for phase in phase_variants(budget, alphabet.len()).into_iter().rev() {
                    let mut s = script.clone();
                    s.box_phases.push(phase);
                    stack.push(s);
                }
            }
        }
    }
    Ok(ConProStream { runs, truncated })
}

/// A tree process in canonical form: the set of its action-labelled
/// immediate subtrees.  Equal values are bisimilar by construction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Canon(BTreeSet<(Action, Canon)>);

impl Canon {
    fn leaf() -> Canon {
        Canon(BTreeSet::new())
    }

    fn with(&self, a: &Action, t: &Canon) -> Canon {
        let mut s = self.0.clone();
        s.insert((a.clone(), t.clone()));
        Canon(s)
    }

    fn to_lts(&self, alphabet: &Alphabet) -> (Lts, StateId) {
        fn build(
            c: &Canon,
            states: &mut usize,
            edges: &mut Vec<(StateId, Action, StateId)>,
        ) -> StateId {
            let me = StateId(*states);
            *states += 1;
            for (a, t) in &c.0 {
                let child = build(t, states, edges);
                edges.push((me, a.clone(), child));
            }
            me
        }
        let mut states = 0;
        let mut edges = Vec::new();
        let root = build(self, &mut states, &mut edges);
        let lts = Lts::new(alphabet.clone(), states, edges)
            .expect("canonical trees index their states consecutively");
        (lts, root)
    }

}

/// One construction-output class: its kernel-2 normal form (see
/// [`Builder::nf2`]) — so two values represent the same class exactly
/// when their `canon` fields are equal — the least number of extension
/// successors the class needs, and the normal form built as an LTS.
#[derive(Clone)]
struct ClassRep {
    canon: Canon,
    cost: u32,
    lts: Lts,
    root: StateId,
}

impl ClassRep {
    fn new(canon: Canon, cost: u32, alphabet: &Alphabet) -> ClassRep {
        let (lts, root) = canon.to_lts(alphabet);
        ClassRep { canon, cost, lts, root }
    }
}

struct Builder<'a> {
    alphabet: &'a Alphabet,
    actions: Vec<Action>,
    budget: u32,
    caps: &'a Caps,
    nodes: u64,
    memo: HashMap<(LabelSet, u32), Vec<(Canon, u32)>>,
    le1_memo: BTreeMap<(Canon, Canon), bool>,
    le2_memo: BTreeMap<(Canon, Canon), bool>,
    nf_memo: BTreeMap<Canon, Canon>,
}

impl<'a> Builder<'a> {
    fn bump(&mut self) -> Result<(), CapExceeded> {
        self.nodes += 1;
        match self.caps.max_nodes {
            Some(max) if self.nodes > max => Err(CapExceeded("max_nodes")),
            _ => Ok(()),
        }
    }

    /// The simulation preorder on canonical trees: every child of `p` is
    /// matched by an equally-labelled child of `q`.
    fn le1(&mut self, p: &Canon, q: &Canon) -> bool {
        if p == q {
            return true;
        }
        if let Some(&v) = self.le1_memo.get(&(p.clone(), q.clone())) {
            return v;
        }
        let v = p.0.iter().all(|(a, pi)| {
            q.0.iter().any(|(b, qj)| a == b && self.le1(pi, qj))
        });
        self.le1_memo.insert((p.clone(), q.clone()), v);
        v
    }

    /// The 2-nested simulation preorder on canonical trees: a simulation
    /// whose converse is again a simulation one level down.
    fn le2(&mut self, p: &Canon, q: &Canon) -> bool {
        if p == q {
            return true;
        }
        if let Some(&v) = self.le2_memo.get(&(p.clone(), q.clone())) {
            return v;
        }
        let v = self.le1(q, p)
            && p.0.iter().all(|(a, pi)| {
                q.0.iter().any(|(b, qj)| a == b && self.le2(pi, qj))
            });
        self.le2_memo.insert((p.clone(), q.clone()), v);
        v
    }

    /// The kernel-2 normal form of a canonical tree: children are
    /// normalized recursively, then every child strictly below a sibling
    /// in the 2-nested simulation preorder is dropped (removing such a
    /// child preserves the tree's kernel class, since summation is a
    /// congruence).  What remains per action is the antichain of maximal
    /// child classes, which is unique, so two trees are kernel-2
    /// equivalent exactly when their normal forms are equal — turning the
    /// quadratic pairwise equivalence checks of the class computation
    /// into set lookups.
    fn nf2(&mut self, c: &Canon) -> Canon {
        if let Some(v) = self.nf_memo.get(c) {
            return v.clone();
        }
        let kids: Vec<(Action, Canon)> =
            c.0.iter().map(|(a, t)| (a.clone(), self.nf2(t))).collect();
        let mut kept = BTreeSet::new();
        for (a, t) in &kids {
            let dominated = kids.iter().any(|(b, u)| {
                a == b && t != u && {
                    // normal forms of equivalent trees coincide, so a
                    // distinct dominating sibling dominates strictly
                    self.le2(t, u)
                }
            });
            if !dominated {
                kept.insert((a.clone(), t.clone()));
            }
        }
        let v = Canon(kept);
        self.nf_memo.insert(c.clone(), v.clone());
        v
    }

    /// All subtree classes rooted at a state with raw label `label` and
    /// `rem` expansion levels remaining, with minimal extension counts.
    fn subtree_set(&mut self, label: &LabelSet, rem: u32) -> Result<Vec<(Canon, u32)>, CapExceeded> {
        if let Some(v) = self.memo.get(&(label.clone(), rem)) {
            return Ok(v.clone());
        }
        let mut reps: Vec<ClassRep> = Vec::new();
        if rem == 0 {
            // the state is created but never dequeued: a leaf (its label
            // is provably empty at this depth, guarded regardless)
            if !label.has_clash() {
                reps.push(ClassRep::new(Canon::leaf(), 0, self.alphabet));
            }
        } else {
            let closures: Vec<LabelSet> = label.closures().collect();
            for c in closures {
                // subtree levels are option pools for the level above and
                // must be complete, so nothing can break the visit here
                let flow = self.per_closure(&c, rem, &mut reps, &mut |_| {
                    ControlFlow::Continue(())
                })?;
                debug_assert!(flow.is_continue());
            }
        }
        let out: Vec<(Canon, u32)> = reps.into_iter().map(|r| (r.canon, r.cost)).collect();
        self.memo.insert((label.clone(), rem), out.clone());
        Ok(out)
    }

    /// Streams to `visit` every class reachable from the closed label
    /// `c`: one mandatory subtree per diamond member, then any affordable
    /// set of extension successors.  Explored cheapest-first (Dijkstra
    /// over extension counts), so the first discovery of a class carries
    /// its minimal cost.  Classes already admitted in this closure are
    /// skipped: deduplication up to the level-2 kernel is sound as an
    /// exploration quotient because all canons of one closure draw on the
    /// same option pool and summation is a congruence for the kernel, so
    /// equivalent canons have equivalent extensions at equal cost.
    ///
    /// A `Break` from the visitor aborts the whole search at once; on
    /// `Continue` throughout, the admitted classes are merged into `reps`
    /// keeping the cheapest realization per class.
    fn per_closure(
        &mut self,
        c: &LabelSet,
        rem: u32,
        reps: &mut Vec<ClassRep>,
        visit: &mut dyn FnMut(&ClassRep) -> ControlFlow<()>,
    ) -> Result<ControlFlow<()>, CapExceeded> {
        let mut slots: Vec<Vec<(Action, Canon, u32)>> = Vec::new();
        for (a, psi) in c.diamond_members() {
            let mut base = c.box_content(&a);
            base.insert(psi);
            let ss = self.subtree_set(&base, rem - 1)?;
            if ss.is_empty() {
                // every run resolving this successor stops
                return Ok(ControlFlow::Continue(()));
            }
            slots.push(ss.into_iter().map(|(t, k)| (a.clone(), t, k)).collect());
        }
        let mut options: Vec<(Action, Canon, u32)> = Vec::new();
        let actions = self.actions.clone();
        for a in &actions {
            let content = c.box_content(a);
            for (t, k) in self.subtree_set(&content, rem - 1)? {
                options.push((a.clone(), t, k));
            }
        }
        // The frontier holds (cost, node, option) edges instead of built
        // trees: a node is a previously admitted canon — partial while
        // mandatory slots remain, complete afterwards — and popping an
        // edge materializes node-plus-option.  Keeping trees out of the
        // heap and charging the node cap per push bounds memory by the
        // cap even when the class space is far too large to exhaust.
        struct Search {
            slots: Vec<Vec<(Action, Canon, u32)>>,
            options: Vec<(Action, Canon, u32)>,
            nodes: Vec<(Canon, usize)>,
            heap: BinaryHeap<Reverse<(u32, usize, usize)>>,
            partials: BTreeSet<(usize, Canon)>,
            seen: BTreeSet<Canon>,
            local: Vec<ClassRep>,
        }
        /// Admits one materialized canon with `filled` slots at `cost`:
        /// deduplicates its normal form, shows complete ones to the
        /// visitor, and pushes its outgoing edges.
        fn admit(
            b: &mut Builder<'_>,
            s: &mut Search,
            cost: u32,
            canon: Canon,
            filled: usize,
            visit: &mut dyn FnMut(&ClassRep) -> ControlFlow<()>,
        ) -> Result<ControlFlow<()>, CapExceeded> {
            // normalizing up front dedups a whole kernel class at a time,
            // and growing the normal form instead of the raw tree keeps
            // the reachable classes unchanged, summation and prefixing
            // being kernel congruences
            let canon = b.nf2(&canon);
            if filled < s.slots.len() {
                if !s.partials.insert((filled, canon.clone())) {
                    return Ok(ControlFlow::Continue(()));
                }
                let idx = s.nodes.len();
                for (oi, (_, _, k)) in s.slots[filled].iter().enumerate() {
                    if cost + k <= b.budget {
                        b.bump()?;
                        s.heap.push(Reverse((cost + k, idx, oi)));
                    }
                }
                s.nodes.push((canon, filled));
                return Ok(ControlFlow::Continue(()));
            }
            if !s.seen.insert(canon.clone()) {
                return Ok(ControlFlow::Continue(()));
            }
            let rep = ClassRep::new(canon.clone(), cost, b.alphabet);
            if visit(&rep).is_break() {
                return Ok(ControlFlow::Break(()));
            }
            let idx = s.nodes.len();
            for (oi, (_, _, k)) in s.options.iter().enumerate() {
                if cost + 1 + k <= b.budget {
                    b.bump()?;
                    s.heap.push(Reverse((cost + 1 + k, idx, oi)));
                }
            }
            s.nodes.push((canon, filled));
            s.local.push(rep);
            Ok(ControlFlow::Continue(()))
        }
        let mut search = Search {
            slots,
            options,
            nodes: Vec::new(),
            heap: BinaryHeap::new(),
            partials: BTreeSet::new(),
            seen: BTreeSet::new(),
            local: Vec::new(),
        };
        // the seed is the empty tree with no mandatory slot filled yet
        self.bump()?;
        if admit(self, &mut search, 0, Canon::leaf(), 0, visit)?.is_break() {
            return Ok(ControlFlow::Break(()));
        }
        while let Some(Reverse((cost, ni, oi))) = search.heap.pop() {
            self.bump()?;
            let (canon, filled) = {
                let (base, filled) = &search.nodes[ni];
                let (a, t, _) = if *filled < search.slots.len() {
                    &search.slots[*filled][oi]
                } else {
                    &search.options[oi]
                };
                let next = if *filled < search.slots.len() { filled + 1 } else { *filled };
                (base.with(a, t), next)
            };
            if admit(self, &mut search, cost, canon, filled, visit)?.is_break() {
                return Ok(ControlFlow::Break(()));
            }
        }
        // merge into the classes of the earlier closures, keeping the
        // cheapest realization of each class
        for rep in search.local {
            match reps.iter_mut().find(|old| old.canon == rep.canon) {
                Some(old) if rep.cost < old.cost => *old = rep,
                Some(_) => {}
                None => reps.push(rep),
            }
        }
        Ok(ControlFlow::Continue(()))
    }
}

/// Streams the construction-output classes of φ to `visit`, cheapest
/// first within each closure of `{φ}` and quotiented by the level-2
/// kernel per closure.  The same class may be visited once per closure;
/// global deduplication is the visitor's business.  Every visited class
/// is a verified model of φ.  A `Break` from the visitor stops the
/// search immediately, so consumers refuted by a finite sample — a bad
/// pair, a second kernel class — terminate even when the full class
/// space is astronomically large.  Returns the number of search nodes
/// charged against `max_nodes`.
fn stream_root(
    phi: &Formula,
    alphabet: &Alphabet,
    caps: &Caps,
    visit: &mut dyn FnMut(&ClassRep) -> ControlFlow<()>,
) -> Result<u64, CapExceeded> {
    let mut b = Builder {
        alphabet,
        actions: alphabet.iter().cloned().collect(),
        budget: phi.size() as u32,
        caps,
        nodes: 0,
        memo: HashMap::new(),
        le1_memo: BTreeMap::new(),
        le2_memo: BTreeMap::new(),
        nf_memo: BTreeMap::new(),
    };
    let root = LabelSet::singleton(phi.clone());
    let rem = phi.md() + 1;
    // per_closure merges its classes into a caller-supplied set for the
    // subtree memo; at the root the visitor is the consumer, so the
    // merge target is scratch
    let mut scratch: Vec<ClassRep> = Vec::new();
    let mut checked = |rep: &ClassRep| {
        assert!(
            crate::semantics::models(&rep.lts, rep.root, phi),
            "a construction output must satisfy the input formula"
        );
        visit(rep)
    };
    for c in root.closures().collect::<Vec<_>>() {
        if b.per_closure(&c, rem, &mut scratch, &mut checked)?.is_break() {
            break;
        }
    }
    Ok(b.nodes)
}

/// The maximal lower bound of `p1` and `p2` (both in `l`) with respect to
/// the 2-nested simulation preorder, or `None` when the two are not
/// simulation equivalent (in which case no lower bound is maximal).
///
/// The bound is constructed as the similarity-kernel pair product:
/// states are reachable pairs `(x, y)` in the kernel, with a transition
/// for every pair of equally-labelled transitions that stays in the
/// kernel.  That the result sits below both inputs is verified on every
/// call; maximality is validated in the tests against brute enumeration.
pub fn mlb_2s(l: &Lts, p1: StateId, p2: StateId) -> Option<(Lts, StateId)> {
    debug_assert!(lts::validate_loop_free(l).is_ok(), "inputs must be loop-free");
    let k1 = kernel(l, 1);
    if !k1.holds_in(l, p1, p2) {
        return None;
    }
    let mut index: HashMap<(StateId, StateId), usize> = HashMap::new();
    let mut pairs: Vec<(StateId, StateId)> = vec![(p1, p2)];
    index.insert((p1, p2), 0);
    let mut edges: Vec<(StateId, Action, StateId)> = Vec::new();
    let mut i = 0;
    while i < pairs.len() {
        let (x, y) = pairs[i];
        for (a, xp) in l.succs(x).to_vec() {
            for yp in l.succs_via(y, &a).collect::<Vec<_>>() {
                if !k1.holds_in(l, xp, yp) {
                    continue;
                }
                let next = *index.entry((xp, yp)).or_insert_with(|| {
                    pairs.push((xp, yp));
                    pairs.len() - 1
                });
                edges.push((StateId(i), a.clone(), StateId(next)));
            }
        }
        i += 1;
    }
    let g = Lts::new(l.alphabet().clone(), pairs.len(), edges)
        .expect("product states index their pairs consecutively");
    let root = StateId(0);
    assert!(
        nsim_holds(2, &g, root, l, p1) && nsim_holds(2, &g, root, l, p2),
        "maximal-lower-bound verification failed: the product is not below both inputs"
    );
    Some((g, root))
}

/// Why a pair of outputs refutes primality.
enum Refute {
    NoLowerBound,
    BoundFailsFormula,
}

fn pair_refutes(
    phi: &Formula,
    l1: &Lts,
    r1: StateId,
    l2: &Lts,
    r2: StateId,
) -> Option<Refute> {
    let (u, off) = l1.disjoint_union(l2);
    match mlb_2s(&u, r1, StateId(r2.0 + off)) {
        None => Some(Refute::NoLowerBound),
        Some((g, root)) => {
            if crate::semantics::models(&g, root, phi) {
                None
            } else {
                Some(Refute::BoundFailsFormula)
            }
        }
    }
}

/// Decides whether φ (in the level-2 fragment) is prime: no two models
/// can jointly escape below it.  Every pair of construction outputs must
/// either share a maximal lower bound satisfying φ, or the formula is
/// unsatisfiable and trivially prime.  Outputs are pair-tested as they
/// stream in, so one refuting pair — returned as the counterexample —
/// settles the verdict without exhausting the output space.
pub fn prime_2s(phi: &Formula, alphabet: &Alphabet, caps: &Caps) -> Result<Verdict, TwoSimError> {
    check_fragment(phi)?;
    let start = Instant::now();
    let problem = "prime";
    let mut kept: Vec<ClassRep> = Vec::new();
    let mut pairs: u64 = 0;
    let mut refutation: Option<((Lts, StateId), (Lts, StateId), Refute)> = None;
    let parallel = caps.parallel;
    let stream = stream_root(phi, alphabet, caps, &mut |rep| {
        if kept.iter().any(|k| k.canon == rep.canon) {
            // the pair test only depends on kernel classes
            return ControlFlow::Continue(());
        }
        pairs += kept.len() as u64;
        let check = |k: &ClassRep| {
            pair_refutes(phi, &k.lts, k.root, &rep.lts, rep.root).map(|why| {
                (((k.lts.clone(), k.root), (rep.lts.clone(), rep.root)), why)
            })
        };
        let hit = if parallel {
            kept.par_iter().find_map_first(check)
        } else {
            kept.iter().find_map(check)
        };
        if let Some((pair, why)) = hit {
            refutation = Some((pair.0, pair.1, why));
            return ControlFlow::Break(());
        }
        kept.push(rep.clone());
        ControlFlow::Continue(())
    });
    let nodes = match stream {
        Ok(n) => n,
        Err(cap) => {
            let mut v = Verdict::incomplete(problem, cap);
            v.stats.runtime_ms = start.elapsed().as_millis() as u64;
            return Ok(v);
        }
    };
    let mut v = match refutation {
        Some((m1, m2, why)) => Verdict::new(problem, false)
            .with_counterexample(m1, m2)
            .with_detail(match why {
                Refute::NoLowerBound => {
                    "two models are not simulation equivalent, so they admit no maximal lower bound"
                }
                Refute::BoundFailsFormula => {
                    "the maximal lower bound of two models does not satisfy the formula"
                }
            }),
        None if kept.is_empty() => Verdict::new(problem, true)
            .with_detail("every construction run stops: the formula is unsatisfiable, hence trivially prime"),
        None => Verdict::new(problem, true).with_detail(
            "every pair of construction outputs shares a maximal lower bound satisfying the formula",
        ),
    };
    v.stats.search_nodes = nodes + pairs;
    v.stats.runtime_ms = start.elapsed().as_millis() as u64;
    Ok(v)
}

/// Decides whether φ (in the level-2 fragment) is characteristic for some
/// process, either within the fragment (satisfiable and prime) or modulo
/// the 2-nested simulation kernel (satisfiable with all models
/// equivalent, checked as: all construction outputs fall in one kernel
/// class).
pub fn characteristic_2s(
    phi: &Formula,
    mode: CharMode,
    alphabet: &Alphabet,
    caps: &Caps,
) -> Result<Verdict, TwoSimError> {
    check_fragment(phi)?;
    let start = Instant::now();
    let problem = match mode {
        CharMode::Within => "characteristic-within",
        CharMode::Modulo => "characteristic-modulo",
    };
    let sat_verdict = tableau::sat(phi, alphabet, caps);
    if !sat_verdict.complete {
        let mut v = Verdict::incomplete(problem, CapExceeded("max_sat_calls"));
        v.stats = sat_verdict.stats;
        v.stats.runtime_ms = start.elapsed().as_millis() as u64;
        return Ok(v);
    }
    if !sat_verdict.value {
        let mut v = Verdict::new(problem, false)
            .with_detail("the formula is unsatisfiable, so it characterizes no process");
        v.stats = sat_verdict.stats;
        v.stats.runtime_ms = start.elapsed().as_millis() as u64;
        return Ok(v);
    }
    let mut v = match mode {
        CharMode::Within => {
            let mut prime = prime_2s(phi, alphabet, caps)?;
            prime.problem = problem.to_string();
            if prime.value && prime.complete {
                if let Some((lts, root)) = sat_verdict.witness.clone() {
                    prime = prime.with_witness(lts, root).with_detail(
                        "the formula is satisfiable and prime: it is characteristic for the witness",
                    );
                }
            }
            prime
        }
        CharMode::Modulo => {
            // stream until a second kernel class shows up; only genuinely
            // characteristic formulae need their single class exhausted
            let mut first: Option<ClassRep> = None;
            let mut second: Option<ClassRep> = None;
            let stream = stream_root(phi, alphabet, caps, &mut |rep| {
                let Some(f0) = first.as_ref() else {
                    first = Some(rep.clone());
                    return ControlFlow::Continue(());
                };
                if f0.canon == rep.canon {
                    return ControlFlow::Continue(());
                }
                second = Some(rep.clone());
                ControlFlow::Break(())
            });
            match stream {
                Err(cap) => Verdict::incomplete(problem, cap),
                Ok(nodes) => {
                    let mut v = match (first, second) {
                        (Some(f0), Some(s0)) => Verdict::new(problem, false)
                            .with_counterexample((f0.lts, f0.root), (s0.lts, s0.root))
                            .with_detail("two models fall in different level-2 kernel classes"),
                        (Some(f0), None) => Verdict::new(problem, true)
                            .with_witness(f0.lts, f0.root)
                            .with_detail(
                                "all models are equivalent to the witness modulo the level-2 kernel",
                            ),
                        (None, _) => Verdict::new(problem, true).with_detail(
                            "all models are equivalent to the witness modulo the level-2 kernel",
                        ),
                    };
                    v.stats.search_nodes = nodes;
                    v
                }
            }
        }
    };
    v.stats.search_nodes += sat_verdict.stats.search_nodes;
    v.stats.sat_calls += sat_verdict.stats.sat_calls;
    v.stats.runtime_ms = start.elapsed().as_millis() as u64;
    Ok(v)
}
