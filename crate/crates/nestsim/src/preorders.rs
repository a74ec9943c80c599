//! Behavioural preorders and equivalences on transition systems.
//!
//! Implements the simulation preorder, the n-nested simulation preorders,
//! their kernels, and bisimilarity, each as a greatest fixpoint computed by
//! pair deletion: start from the full relation (suitably constrained) and
//! remove pairs that violate the defining clause until stable.
//!
//! The n-nested simulation preorder is defined inductively: a 1-nested
//! simulation is a simulation, and an n-nested simulation (n ≥ 2) is a
//! simulation R with R ⊆ (≲_(n−1)S)⁻¹.  Bisimilarity is strictly finer
//! than every nesting level; on loop-free systems the levels collapse onto
//! it only in the limit.
//!
//! Relations computed here are tied to the [`LtsId`] of the system they
//! were computed over.  Comparisons across two systems go through a
//! disjoint union; see [`nsim_holds`] and friends.

use std::collections::BTreeSet;

use crate::lts::{Lts, LtsId, StateId};

/// Which relation a [`RelationTable`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RelKind {
    /// The simulation preorder `≲_S` (equal to `NSim(1)`).
    Sim,
    /// The n-nested simulation preorder `≲_nS`.
    NSim(u32),
    /// The kernel `≡_nS` of the n-nested simulation preorder.
    Kernel(u32),
    /// Bisimilarity `∼`.
    Bisim,
}

/// A computed relation over the states of one transition system.
#[derive(Debug, Clone)]
pub struct RelationTable {
    kind: RelKind,
    over: LtsId,
    pairs: BTreeSet<(StateId, StateId)>,
}

impl RelationTable {
    pub fn kind(&self) -> RelKind {
        self.kind
    }

    /// The system this table was computed over.
    pub fn over(&self) -> LtsId {
        self.over
    }

    /// Whether the pair `(p, q)` is in the relation.  Panics if the table
    /// is queried against a system it was not computed over.
    pub fn holds_in(&self, l: &Lts, p: StateId, q: StateId) -> bool {
        assert_eq!(
            self.over,
            l.id(),
            "relation table queried against a different transition system"
        );
        self.pairs.contains(&(p, q))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (StateId, StateId)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Largest simulation contained in `allowed`: deletes pairs whose left
/// component has a move the right component cannot answer inside the
/// current relation.
fn largest_simulation_within(
    l: &Lts,
    mut r: BTreeSet<(StateId, StateId)>,
) -> BTreeSet<(StateId, StateId)> {
    loop {
        let mut doomed = Vec::new();
        for &(p, q) in &r {
            let ok = l
                .succs(p)
                .iter()
                .all(|(a, p1)| l.succs_via(q, a).any(|q1| r.contains(&(*p1, q1))));
            if !ok {
                doomed.push((p, q));
            }
        }
        if doomed.is_empty() {
            return r;
        }
        for pair in doomed {
            r.remove(&pair);
        }
    }
}

fn all_pairs(l: &Lts) -> BTreeSet<(StateId, StateId)> {
    l.states()
        .flat_map(|p| l.states().map(move |q| (p, q)))
        .collect()
}

/// The simulation preorder `≲_S` over all states of `l`.
pub fn simulation(l: &Lts) -> RelationTable {
    RelationTable {
        kind: RelKind::Sim,
        over: l.id(),
        pairs: largest_simulation_within(l, all_pairs(l)),
    }
}

/// The n-nested simulation preorder `≲_nS` over all states of `l`.
/// Requires `n ≥ 1`; `nsim(l, 1)` coincides with [`simulation`].
pub fn nsim(l: &Lts, n: u32) -> RelationTable {
    assert!(n >= 1, "nesting level must be at least 1");
    let mut pairs = largest_simulation_within(l, all_pairs(l));
    for _ in 1..n {
        let inverse: BTreeSet<_> = pairs.iter().map(|&(p, q)| (q, p)).collect();
        pairs = largest_simulation_within(l, inverse);
    }
    RelationTable {
        kind: RelKind::NSim(n),
        over: l.id(),
        pairs,
    }
}

/// The kernel `≡_nS = ≲_nS ∩ (≲_nS)⁻¹` over all states of `l`.
pub fn kernel(l: &Lts, n: u32) -> RelationTable {
    let le = nsim(l, n);
    let pairs = le
        .pairs
        .iter()
        .filter(|&&(p, q)| le.pairs.contains(&(q, p)))
        .copied()
        .collect();
    RelationTable {
        kind: RelKind::Kernel(n),
        over: l.id(),
        pairs,
    }
}

/// Bisimilarity `∼` over all states of `l`.
pub fn bisimulation(l: &Lts) -> RelationTable {
    let mut r = all_pairs(l);
    loop {
        let mut doomed = Vec::new();
        for &(p, q) in &r {
            let forth = l
                .succs(p)
                .iter()
                .all(|(a, p1)| l.succs_via(q, a).any(|q1| r.contains(&(*p1, q1))));
            let back = l
                .succs(q)
                .iter()
                .all(|(a, q1)| l.succs_via(p, a).any(|p1| r.contains(&(p1, *q1))));
            if !(forth && back) {
                doomed.push((p, q));
            }
        }
        if doomed.is_empty() {
            break;
        }
        for pair in doomed {
            r.remove(&pair);
        }
    }
    RelationTable {
        kind: RelKind::Bisim,
        over: l.id(),
        pairs: r,
    }
}

/// Computes the table for `kind` over `l`.
pub fn relation(l: &Lts, kind: RelKind) -> RelationTable {
    match kind {
        RelKind::Sim => simulation(l),
        RelKind::NSim(n) => nsim(l, n),
        RelKind::Kernel(n) => kernel(l, n),
        RelKind::Bisim => bisimulation(l),
    }
}

/// Whether `p1` (in `l1`) is below `p2` (in `l2`) in `≲_nS`, comparing
/// through a disjoint union when the systems differ.
pub fn nsim_holds(n: u32, l1: &Lts, p1: StateId, l2: &Lts, p2: StateId) -> bool {
    if l1.id() == l2.id() {
        return nsim(l1, n).holds_in(l1, p1, p2);
    }
    let (u, off) = l1.disjoint_union(l2);
    nsim(&u, n).holds_in(&u, p1, StateId(p2.0 + off))
}

/// Whether `p1` and `p2` are `≡_nS`-equivalent, across systems.
pub fn kernel_holds(n: u32, l1: &Lts, p1: StateId, l2: &Lts, p2: StateId) -> bool {
    if l1.id() == l2.id() {
        return kernel(l1, n).holds_in(l1, p1, p2);
    }
    let (u, off) = l1.disjoint_union(l2);
    kernel(&u, n).holds_in(&u, p1, StateId(p2.0 + off))
}

/// Whether `p1` and `p2` are bisimilar, across systems.
pub fn bisim_holds(l1: &Lts, p1: StateId, l2: &Lts, p2: StateId) -> bool {
    if l1.id() == l2.id() {
        return bisimulation(l1).holds_in(l1, p1, p2);
    }
    let (u, off) = l1.disjoint_union(l2);
    bisimulation(&u).holds_in(&u, p1, StateId(p2.0 + off))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::term_to_lts;
    use crate::syntax::{Action, Alphabet, ProcessTerm, parse_process};
    use proptest::prelude::*;

    fn ab() -> Alphabet {
        Alphabet::parse("a,b").unwrap()
    }

    /// Translates both terms and places them side by side in one system.
    fn pair(s1: &str, s2: &str) -> (Lts, StateId, StateId) {
        let alphabet = ab();
        let p = parse_process(s1, &alphabet).unwrap();
        let q = parse_process(s2, &alphabet).unwrap();
        let (lp, rp) = term_to_lts(&p, &alphabet);
        let (lq, rq) = term_to_lts(&q, &alphabet);
        let (u, off) = lp.disjoint_union(&lq);
        (u, rp, StateId(rq.0 + off))
    }

    #[test]
    fn simulation_basics() {
        let (l, p, q) = pair("a.0", "a.0 + b.0");
        let s = simulation(&l);
        assert!(s.holds_in(&l, p, q));
        assert!(!s.holds_in(&l, q, p));
        // deadlock is below everything
        let (l, z, q) = pair("0", "a.b.0");
        assert!(simulation(&l).holds_in(&l, z, q));
    }

    #[test]
    fn sim_equivalent_but_not_bisimilar() {
        // a.b.0 + a.0 and a.b.0 are simulation equivalent; bisimilarity
        // separates them because the left can move to a deadlock under `a`.
        let (l, p, q) = pair("a.b.0 + a.0", "a.b.0");
        let s = simulation(&l);
        assert!(s.holds_in(&l, p, q));
        assert!(s.holds_in(&l, q, p));
        assert!(kernel(&l, 1).holds_in(&l, p, q));
        assert!(!bisimulation(&l).holds_in(&l, p, q));
        // ... and already the 2-nested level separates them
        assert!(!nsim(&l, 2).holds_in(&l, p, q));
        assert!(nsim(&l, 2).holds_in(&l, q, p));
    }

    #[test]
    fn bisim_collapses_duplicate_branches() {
        let (l, p, q) = pair("a.0 + a.0", "a.0");
        assert!(bisimulation(&l).holds_in(&l, p, q));
        assert!(kernel(&l, 3).holds_in(&l, p, q));
    }

    /// The canonical strictness witnesses: with p₁ = a.0, q₁ = a.0 + b.0
    /// and pₙ₊₁ = a.qₙ, qₙ₊₁ = a.qₙ + a.pₙ, the pair (pₙ, qₙ) is in ≲_nS
    /// but not in ≲_(n+1)S, so every level of the hierarchy is strict.
    #[test]
    fn hierarchy_is_strict_at_every_level() {
        let a = Action::new("a").unwrap();
        let b = Action::new("b").unwrap();
        let mut p = ProcessTerm::prefix(a.clone(), ProcessTerm::Nil);
        let mut q = ProcessTerm::sum(
            ProcessTerm::prefix(a.clone(), ProcessTerm::Nil),
            ProcessTerm::prefix(b.clone(), ProcessTerm::Nil),
        );
        for n in 1..=4u32 {
            let (lp, rp) = term_to_lts(&p, &ab());
            let (lq, rq) = term_to_lts(&q, &ab());
            let (u, off) = lp.disjoint_union(&lq);
            let rq = StateId(rq.0 + off);
            assert!(nsim(&u, n).holds_in(&u, rp, rq), "level {n} should hold");
            assert!(
                !nsim(&u, n + 1).holds_in(&u, rp, rq),
                "level {} should fail",
                n + 1
            );
            let next_p = ProcessTerm::prefix(a.clone(), q.clone());
            let next_q = ProcessTerm::sum(
                ProcessTerm::prefix(a.clone(), q.clone()),
                ProcessTerm::prefix(a.clone(), p.clone()),
            );
            p = next_p;
            q = next_q;
        }
    }

    #[test]
    fn cross_system_helpers_agree_with_tables() {
        let alphabet = ab();
        let (l1, r1) = term_to_lts(&parse_process("a.b.0", &alphabet).unwrap(), &alphabet);
        let (l2, r2) = term_to_lts(&parse_process("a.b.0 + a.0", &alphabet).unwrap(), &alphabet);
        assert!(nsim_holds(1, &l1, r1, &l2, r2));
        assert!(nsim_holds(2, &l1, r1, &l2, r2));
        assert!(!nsim_holds(2, &l2, r2, &l1, r1));
        assert!(kernel_holds(1, &l1, r1, &l2, r2));
        assert!(!kernel_holds(2, &l1, r1, &l2, r2));
        assert!(!bisim_holds(&l1, r1, &l2, r2));
        assert!(bisim_holds(&l1, r1, &l1, r1));
    }

    fn process_strategy() -> impl Strategy<Value = ProcessTerm> {
        let leaf = Just(ProcessTerm::Nil);
        leaf.prop_recursive(3, 16, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(l, r)| ProcessTerm::sum(l, r)),
                inner
                    .clone()
                    .prop_map(|x| ProcessTerm::prefix(Action::new("a").unwrap(), x)),
                inner.prop_map(|x| ProcessTerm::prefix(Action::new("b").unwrap(), x)),
            ]
        })
    }

    proptest! {
        /// ∼ ⊆ ≲_3S ⊆ ≲_2S ⊆ ≲_S, and every level is reflexive.
        #[test]
        fn hierarchy_is_a_chain(p in process_strategy(), q in process_strategy()) {
            let (lp, rp) = term_to_lts(&p, &ab());
            let (lq, rq) = term_to_lts(&q, &ab());
            let (u, off) = lp.disjoint_union(&lq);
            let rq = StateId(rq.0 + off);
            let bis = bisimulation(&u);
            let tables: Vec<_> = (1..=3).map(|n| nsim(&u, n)).collect();
            for s in u.states() {
                prop_assert!(tables.iter().all(|t| t.holds_in(&u, s, s)));
                prop_assert!(bis.holds_in(&u, s, s));
            }
            if bis.holds_in(&u, rp, rq) {
                prop_assert!(tables.iter().all(|t| t.holds_in(&u, rp, rq)));
            }
            for w in tables.windows(2) {
                if w[1].holds_in(&u, rp, rq) {
                    prop_assert!(w[0].holds_in(&u, rp, rq));
                }
            }
        }

        /// The defining clauses hold for the computed tables: a simulation
        /// step can always be answered, and ≲_nS pairs are inverse-below
        /// the previous level.
        #[test]
        fn tables_satisfy_their_clauses(p in process_strategy(), q in process_strategy()) {
            let (lp, _) = term_to_lts(&p, &ab());
            let (lq, _) = term_to_lts(&q, &ab());
            let (u, _) = lp.disjoint_union(&lq);
            for n in 1..=3u32 {
                let t = nsim(&u, n);
                let pairs: Vec<_> = t.pairs().collect();
                for (x, y) in pairs {
                    for (a, x1) in u.succs(x) {
                        prop_assert!(u.succs_via(y, a).any(|y1| t.holds_in(&u, *x1, y1)));
                    }
                    if n > 1 {
                        prop_assert!(nsim(&u, n - 1).holds_in(&u, y, x));
                    }
                }
            }
        }
    }
}
