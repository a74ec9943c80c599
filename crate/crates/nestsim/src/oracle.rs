//! Brute-force reference decisions over bounded process universes.
//!
//! A universe is one representative per bisimilarity class of loop-free
//! processes within a depth bound and a per-action branching (width)
//! bound.  Classes are enumerated bottom-up as move sets over previously
//! built classes, all sharing a single arena system, so preorder tables
//! are computed once per universe and reused across queries.
//!
//! Verdict completeness follows a fixed rule: a negative answer is
//! certified complete when the universe depth reaches `md(f) + 1`
//! (deeper behaviour is invisible to the formula, and witnesses found
//! are real); a positive answer is only ever "complete within bounds",
//! because a counterexample could in principle require more width than
//! enumerated.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use crate::lts::{reach, Lts, StateId};
use crate::preorders::{self, RelKind, RelationTable};
use crate::semantics;
use crate::syntax::{Action, Alphabet, Formula};
use crate::verdict::Verdict;

/// Enumeration bounds for a process universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniverseBounds {
    pub alphabet: Alphabet,
    /// Maximal process depth (longest trace).
    pub depth: u32,
    /// Maximal number of successors per state and action.
    pub width: usize,
}

/// Number of distinct modal subformulae, the default width heuristic.
fn modal_count(f: &Formula) -> usize {
    f.subformulae()
        .iter()
        .filter(|g| matches!(g, Formula::Diamond(_, _) | Formula::Box_(_, _)))
        .count()
}

impl UniverseBounds {
    pub fn new(alphabet: Alphabet, depth: u32, width: usize) -> UniverseBounds {
        UniverseBounds { alphabet, depth, width }
    }

    /// Default bounds for deciding questions about `f`: depth `md(f) + 1`
    /// (enough to certify negative answers) and width one more than the
    /// number of modal subformulae (enough branching for any tableau
    /// model of `f`).
    pub fn default_for(f: &Formula, alphabet: &Alphabet) -> UniverseBounds {
        UniverseBounds::new(alphabet.clone(), f.md() + 1, modal_count(f) + 1)
    }

    /// Like [`default_for`](Self::default_for) but with the width reduced
    /// until the projected class count stays at or below `class_limit`.
    /// Keeps the certification depth; width never drops below one.
    pub fn feasible_for(f: &Formula, alphabet: &Alphabet, class_limit: u64) -> UniverseBounds {
        let depth = f.md() + 1;
        let k = alphabet.len() as u32;
        let mut width = modal_count(f) + 1;
        while width > 1 && projected_classes(k, depth, width) > class_limit {
            width -= 1;
        }
        UniverseBounds::new(alphabet.clone(), depth, width)
    }

    /// Projected number of classes under these bounds.
    pub fn projected_classes(&self) -> u64 {
        projected_classes(self.alphabet.len() as u32, self.depth, self.width)
    }
}

/// Saturating binomial coefficient.
fn comb(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let mut acc: u64 = 1;
    for i in 0..k.min(n - k) {
        acc = acc.saturating_mul(n - i) / (i + 1);
        if acc == u64::MAX {
            return u64::MAX;
        }
    }
    acc
}

/// Classes of depth at most `depth`: each level chooses, per action, a
/// subset of at most `width` earlier classes.
fn projected_classes(k: u32, depth: u32, width: usize) -> u64 {
    let mut total: u64 = 1;
    for _ in 0..depth {
        let mut per_action: u64 = 0;
        for i in 0..=(width as u64) {
            per_action = per_action.saturating_add(comb(total, i));
        }
        let mut next: u64 = 1;
        for _ in 0..k {
            next = next.saturating_mul(per_action);
        }
        total = next;
    }
    total
}

/// A bounded process universe: one arena system whose states are the
/// class representatives, plus lazily computed preorder tables.
pub struct Universe {
    bounds: UniverseBounds,
    lts: Lts,
    depths: Vec<u32>,
    tables: RefCell<HashMap<RelKind, Rc<RelationTable>>>,
}

impl Universe {
    /// Enumerates all classes within `bounds`.  Guarded against runaway
    /// bounds; callers wanting large universes must raise the guard
    /// consciously by picking feasible bounds first.
    pub fn build(bounds: &UniverseBounds) -> Universe {
        let projected = bounds.projected_classes();
        assert!(
            projected <= 60_000,
            "universe bounds project to {projected} classes; pick feasible bounds"
        );
        let actions: Vec<Action> = bounds.alphabet.iter().cloned().collect();
        // movesets[i] lists (action index, child class) pairs of class i
        let mut movesets: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
        let mut depths: Vec<u32> = vec![0];
        for level in 1..=bounds.depth {
            let prior = movesets.len();
            let mut option_lists: Vec<Vec<Vec<usize>>> = Vec::with_capacity(actions.len());
            for _ in &actions {
                option_lists.push(subsets_up_to(prior, bounds.width));
            }
            let mut chosen = vec![0usize; actions.len()];
            loop {
                // assemble the moveset for the current choice vector
                let mut moves: Vec<(usize, usize)> = Vec::new();
                let mut max_child_depth: Option<u32> = None;
                for (ai, opts) in option_lists.iter().enumerate() {
                    for &cls in &opts[chosen[ai]] {
                        moves.push((ai, cls));
                        let d = depths[cls];
                        max_child_depth = Some(max_child_depth.map_or(d, |m| m.max(d)));
                    }
                }
                // only movesets reaching the previous level are new classes
                if max_child_depth == Some(level - 1) {
                    movesets.push(moves);
                    depths.push(level);
                }
                // advance the odometer over option lists
                let mut pos = actions.len();
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    chosen[pos] += 1;
                    if chosen[pos] < option_lists[pos].len() {
                        break;
                    }
                    chosen[pos] = 0;
                }
                if chosen.iter().all(|&c| c == 0) {
                    break;
                }
            }
        }
        let mut transitions = Vec::new();
        for (i, moves) in movesets.iter().enumerate() {
            for &(ai, cls) in moves {
                transitions.push((StateId(i), actions[ai].clone(), StateId(cls)));
            }
        }
        let lts = Lts::new(bounds.alphabet.clone(), movesets.len(), transitions)
            .expect("arena construction is well-formed");
        debug_assert!(crate::lts::validate_loop_free(&lts).is_ok());
        Universe {
            bounds: bounds.clone(),
            lts,
            depths,
            tables: RefCell::new(HashMap::new()),
        }
    }

    pub fn bounds(&self) -> &UniverseBounds {
        &self.bounds
    }

    /// The shared arena; every state is one class representative.
    pub fn lts(&self) -> &Lts {
        &self.lts
    }

    pub fn len(&self) -> usize {
        self.lts.n_states()
    }

    pub fn is_empty(&self) -> bool {
        false // the deadlock class is always present
    }

    pub fn class_depth(&self, p: StateId) -> u32 {
        self.depths[p.0]
    }

    /// The preorder/kernel table for `kind`, computed once and cached.
    pub fn table(&self, kind: RelKind) -> Rc<RelationTable> {
        if let Some(t) = self.tables.borrow().get(&kind) {
            return Rc::clone(t);
        }
        let t = Rc::new(preorders::relation(&self.lts, kind));
        self.tables.borrow_mut().insert(kind, Rc::clone(&t));
        t
    }

    /// Does `kind` relate classes `p` and `q`?
    pub fn related(&self, kind: RelKind, p: StateId, q: StateId) -> bool {
        self.table(kind).holds_in(&self.lts, p, q)
    }

    /// Extracts the class rooted at `root` as a standalone system.
    pub fn class_lts(&self, root: StateId) -> (Lts, StateId) {
        let members: Vec<StateId> = reach(&self.lts, root).into_iter().collect();
        let index: HashMap<StateId, usize> =
            members.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let mut transitions = Vec::new();
        for (i, s) in members.iter().enumerate() {
            for (a, t) in self.lts.succs(*s) {
                transitions.push((StateId(i), a.clone(), StateId(index[t])));
            }
        }
        let lts = Lts::new(self.bounds.alphabet.clone(), members.len(), transitions)
            .expect("class extraction is well-formed");
        (lts, StateId(index[&root]))
    }

    /// The classes satisfying `f`, in canonical enumeration order.
    pub fn models_of(&self, f: &Formula) -> Vec<StateId> {
        let table = semantics::satisfying_states(&self.lts, f);
        self.lts.states().filter(|s| table[s.0]).collect()
    }
}

/// One representative per bisimilarity class within the bounds, in
/// canonical order, as standalone systems.  Convenience listing for small
/// universes; heavier callers should work on [`Universe`] directly.
pub fn enum_processes(bounds: &UniverseBounds) -> Vec<(Lts, StateId)> {
    let u = Universe::build(bounds);
    u.lts.states().map(|s| u.class_lts(s)).collect()
}

fn subsets_up_to(n: usize, width: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut current: Vec<usize> = Vec::new();
    fn rec(start: usize, n: usize, left: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            return;
        }
        for i in start..n {
            current.push(i);
            out.push(current.clone());
            rec(i + 1, n, left - 1, current, out);
            current.pop();
        }
    }
    rec(0, n, width, &mut current, &mut out);
    out.sort();
    out
}

/// The models of `f` within `bounds`, as standalone systems.
pub fn brute_models(f: &Formula, bounds: &UniverseBounds) -> Vec<(Lts, StateId)> {
    let u = Universe::build(bounds);
    u.models_of(f).into_iter().map(|s| u.class_lts(s)).collect()
}

fn negative_completeness(u: &Universe, f: &Formula, v: Verdict) -> Verdict {
    if u.bounds().depth >= f.md() + 1 {
        v
    } else {
        let mut v = v;
        v.complete = false;
        v
    }
    .with_detail(format!(
        "universe depth {} width {} ({} classes)",
        u.bounds().depth,
        u.bounds().width,
        u.len()
    ))
}

fn positive_within_bounds(u: &Universe, v: Verdict) -> Verdict {
    let mut v = v;
    v.complete = false;
    v.with_detail(format!(
        "complete within bounds: depth {} width {} ({} classes)",
        u.bounds().depth,
        u.bounds().width,
        u.len()
    ))
}

/// Is `f` characteristic modulo `n`-nested similarity: satisfiable with
/// all models within the universe pairwise equivalent?
pub fn brute_characteristic_modulo(n: u32, f: &Formula, bounds: &UniverseBounds) -> Verdict {
    let start = std::time::Instant::now();
    let u = Universe::build(bounds);
    let models = u.models_of(f);
    let mut v = match models.split_first() {
        None => negative_completeness(&u, f, Verdict::new("characteristic-modulo", false))
            .with_detail("no models within bounds"),
        Some((rep, rest)) => {
            // kernels are transitive, so comparing against one
            // representative decides pairwise equivalence
            match rest.iter().find(|m| !u.related(RelKind::Kernel(n), *rep, **m)) {
                Some(bad) => {
                    let v = Verdict::new("characteristic-modulo", false)
                        .with_counterexample(u.class_lts(*rep), u.class_lts(*bad));
                    negative_completeness(&u, f, v)
                }
                None => positive_within_bounds(
                    &u,
                    Verdict::new("characteristic-modulo", true).with_witness(u.class_lts(*rep).0, u.class_lts(*rep).1),
                ),
            }
        }
    };
    v.stats.search_nodes = models.len() as u64;
    v.stats.runtime_ms = start.elapsed().as_millis() as u64;
    v
}

/// Is `f` characteristic within its fragment: some model lies below all
/// models in the `n`-nested simulation preorder?
pub fn brute_characteristic_within(n: u32, f: &Formula, bounds: &UniverseBounds) -> Verdict {
    let start = std::time::Instant::now();
    let u = Universe::build(bounds);
    let mut v = within_on(n, f, &u);
    v.problem = "characteristic-within".into();
    v.stats.runtime_ms = start.elapsed().as_millis() as u64;
    v
}

fn within_on(n: u32, f: &Formula, u: &Universe) -> Verdict {
    let models = u.models_of(f);
    if models.is_empty() {
        return negative_completeness(u, f, Verdict::new("characteristic-within", false))
            .with_detail("no models within bounds");
    }
    let table = u.table(RelKind::NSim(n));
    let below_all = models
        .iter()
        .find(|q| models.iter().all(|p| table.holds_in(u.lts(), **q, *p)));
    match below_all {
        Some(q) => {
            let (lts, root) = u.class_lts(*q);
            positive_within_bounds(u, Verdict::new("characteristic-within", true).with_witness(lts, root))
        }
        None => {
            // exhibit two models with no common lower bound when one exists
            let pair = find_unboundable_pair(&models, u, &table);
            let mut v = Verdict::new("characteristic-within", false);
            if let Some((p1, p2)) = pair {
                v = v.with_counterexample(u.class_lts(p1), u.class_lts(p2));
            }
            negative_completeness(u, f, v)
        }
    }
}

fn find_unboundable_pair(
    models: &[StateId],
    u: &Universe,
    table: &RelationTable,
) -> Option<(StateId, StateId)> {
    for (i, p1) in models.iter().enumerate() {
        for p2 in &models[i + 1..] {
            let bounded = models.iter().any(|q| {
                table.holds_in(u.lts(), *q, *p1) && table.holds_in(u.lts(), *q, *p2)
            });
            if !bounded {
                return Some((*p1, *p2));
            }
        }
    }
    None
}

/// Is `f` prime in the `n`-th fragment: unsatisfiable, or entailing a
/// disjunction only via one disjunct — equivalently, characteristic
/// within the fragment whenever satisfiable?
pub fn brute_prime(n: u32, f: &Formula, bounds: &UniverseBounds) -> Verdict {
    let start = std::time::Instant::now();
    let u = Universe::build(bounds);
    let models = u.models_of(f);
    let mut v = if models.is_empty() {
        positive_within_bounds(
            &u,
            Verdict::new("prime", true).with_detail("no models within bounds: vacuously prime"),
        )
    } else {
        let mut v = within_on(n, f, &u);
        v.problem = "prime".into();
        v
    };
    v.stats.runtime_ms = start.elapsed().as_millis() as u64;
    v
}

/// A formula of fragment level at most `n` holding at `p` but not at `q`,
/// for states with `(p, q)` outside the `n`-nested simulation preorder.
/// Recursion: either the simulation clause fails through some move of `p`,
/// or the reversed lower-level preorder fails and a negated lower-level
/// formula distinguishes.
pub fn distinguishing_formula(n: u32, l: &Lts, p: StateId, q: StateId) -> Option<Formula> {
    assert!(n >= 1);
    let tables: Vec<RelationTable> = (1..=n).map(|m| preorders::nsim(l, m)).collect();
    if tables[(n - 1) as usize].holds_in(l, p, q) {
        return None;
    }
    Some(dist(n, l, p, q, &tables))
}

fn dist(n: u32, l: &Lts, p: StateId, q: StateId, tables: &[RelationTable]) -> Formula {
    debug_assert!(!tables[(n - 1) as usize].holds_in(l, p, q));
    if n >= 2 && !tables[(n - 2) as usize].holds_in(l, q, p) {
        return Formula::neg(dist(n - 1, l, q, p, tables));
    }
    // the simulation clause must fail: some move of p cannot be matched
    for (a, p2) in l.succs(p) {
        let unmatched = l
            .succs_via(q, a)
            .all(|q2| !tables[(n - 1) as usize].holds_in(l, *p2, q2));
        if unmatched {
            let parts: Vec<Formula> = l
                .succs_via(q, a)
                .map(|q2| dist(n, l, *p2, q2, tables))
                .collect();
            return Formula::dia(a.clone(), Formula::conj(parts));
        }
    }
    unreachable!("no failing clause found for a pair outside the preorder");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::term_to_lts;
    use crate::syntax::{parse_formula, parse_process};

    fn ab() -> Alphabet {
        Alphabet::parse("a,b").unwrap()
    }

    fn f(s: &str) -> Formula {
        parse_formula(s, &ab()).unwrap()
    }

    fn b(depth: u32, width: usize) -> UniverseBounds {
        UniverseBounds::new(ab(), depth, width)
    }

    #[test]
    fn class_counts_match_the_combinatorics() {
        assert_eq!(Universe::build(&b(1, 1)).len(), 4);
        assert_eq!(Universe::build(&b(2, 2)).len(), 121);
        assert_eq!(Universe::build(&b(2, 4)).len(), 256);
        assert_eq!(Universe::build(&b(3, 1)).len(), 676);
        for (bounds, expect) in [(b(1, 1), 4), (b(2, 2), 121), (b(2, 4), 256), (b(3, 1), 676)] {
            assert_eq!(bounds.projected_classes(), expect);
        }
    }

    #[test]
    fn smallest_universe_has_the_four_expected_classes() {
        let procs = enum_processes(&b(1, 1));
        assert_eq!(procs.len(), 4);
        let expected = ["0", "a.0", "b.0", "a.0 + b.0"];
        for term in expected {
            let (t, tr) = term_to_lts(&parse_process(term, &ab()).unwrap(), &ab());
            let hits = procs
                .iter()
                .filter(|(l, r)| preorders::bisim_holds(l, *r, &t, tr))
                .count();
            assert_eq!(hits, 1, "exactly one class for {term}");
        }
    }

    #[test]
    fn universes_deduplicate_up_to_bisimilarity() {
        let u = Universe::build(&b(2, 2));
        let table = u.table(RelKind::Bisim);
        for p in u.lts().states() {
            for q in u.lts().states() {
                if p != q {
                    assert!(!table.holds_in(u.lts(), p, q), "{p} ~ {q}");
                }
            }
        }
    }

    #[test]
    fn brute_models_finds_the_right_classes() {
        let models = brute_models(&f("<a>tt"), &b(1, 1));
        assert_eq!(models.len(), 2); // a.0 and a.0 + b.0
        for (l, r) in &models {
            assert!(semantics::models(l, *r, &f("<a>tt")));
        }
        assert!(brute_models(&f("<a>ff"), &b(2, 2)).is_empty());
    }

    #[test]
    fn prime_examples() {
        let v = brute_prime(1, &f("<a>tt"), &b(2, 2));
        assert!(v.value);
        let (w, wr) = v.witness.expect("prime witness");
        let (a0, ar) = term_to_lts(&parse_process("a.0", &ab()).unwrap(), &ab());
        assert!(preorders::kernel_holds(1, &w, wr, &a0, ar));

        let v = brute_prime(1, &f("<a>tt | <b>tt"), &b(2, 2));
        assert!(!v.value && v.complete, "negative certified at depth md+1");
        let ((c1, r1), (c2, r2)) = v.counterexample.expect("unboundable pair");
        assert!(semantics::models(&c1, r1, &f("<a>tt | <b>tt")));
        assert!(semantics::models(&c2, r2, &f("<a>tt | <b>tt")));
    }

    #[test]
    fn characteristic_modulo_flags_and_certification() {
        // negative at insufficient depth is not certified
        let v = brute_characteristic_modulo(1, &f("<a>tt"), &b(1, 1));
        assert!(!v.value && !v.complete);
        // at depth md+1 the same negative is certified
        let v = brute_characteristic_modulo(1, &f("<a>tt"), &b(2, 2));
        assert!(!v.value && v.complete);
        assert!(v.counterexample.is_some());
        // positives are only complete within bounds
        let phi = "<a>([a]ff & [b]ff) & [a]([a]ff & [b]ff) & [b]ff";
        let v = brute_characteristic_modulo(2, &f(phi), &b(2, 4));
        assert!(v.value && !v.complete);
        assert!(v.detail.unwrap().contains("within bounds"));
    }

    #[test]
    fn characteristic_within_positive_case() {
        let phi = "<a>([a]ff & [b]ff) & [a]([a]ff & [b]ff) & [b]ff";
        let v = brute_characteristic_within(2, &f(phi), &b(3, 1));
        assert!(v.value);
        let (w, wr) = v.witness.expect("characteristic witness");
        let (a0, ar) = term_to_lts(&parse_process("a.0", &ab()).unwrap(), &ab());
        assert!(preorders::kernel_holds(2, &w, wr, &a0, ar));
    }

    #[test]
    fn feasible_bounds_shrink_width_only_when_needed() {
        let phi = f("<a><b>tt & <b><a>tt"); // md 2, four modal subformulae
        let full = UniverseBounds::default_for(&phi, &ab());
        assert_eq!((full.depth, full.width), (3, 5));
        let feas = UniverseBounds::feasible_for(&phi, &ab(), 2000);
        assert_eq!((feas.depth, feas.width), (3, 1));
        let shallow = UniverseBounds::feasible_for(&f("<a>tt"), &ab(), 2000);
        assert_eq!((shallow.depth, shallow.width), (2, 2));
    }

    #[test]
    fn distinguishing_formulae_on_the_strictness_family() {
        // q1 = a.0 + b.0 is not below p1 = a.0 in similarity
        let (l, root) = term_to_lts(&parse_process("a.0 + b.0", &ab()).unwrap(), &ab());
        let (pair, _off) = {
            let (p, pr) = term_to_lts(&parse_process("a.0", &ab()).unwrap(), &ab());
            let (u, off) = l.disjoint_union(&p);
            ((u, root, StateId(pr.0 + off)), off)
        };
        let (u, q, p) = pair;
        let phi = distinguishing_formula(1, &u, q, p).expect("distinguishes");
        assert!(semantics::models(&u, q, &phi));
        assert!(!semantics::models(&u, p, &phi));
        assert!(phi.fragment_level().level().unwrap() <= 1);

        // level 2: a.b.0 + a.0 is not 2-nested below a.b.0
        let (l1, p1) = term_to_lts(&parse_process("a.b.0 + a.0", &ab()).unwrap(), &ab());
        let (l2, p2) = term_to_lts(&parse_process("a.b.0", &ab()).unwrap(), &ab());
        let (u, off) = l1.disjoint_union(&l2);
        let (x, y) = (p1, StateId(p2.0 + off));
        let phi = distinguishing_formula(2, &u, x, y).expect("distinguishes");
        assert!(semantics::models(&u, x, &phi));
        assert!(!semantics::models(&u, y, &phi));
        assert!(phi.fragment_level().level().unwrap() <= 2);

        // related pairs admit no distinguishing formula
        assert!(distinguishing_formula(2, &u, y, x).is_none());
    }
}
