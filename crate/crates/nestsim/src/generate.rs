//! Seeded random generation of formulae and processes.
//!
//! Everything here is deterministic given the caller's RNG, so test
//! suites pin a seed and stay reproducible.  Formula generation aims at a
//! requested fragment level and rejects the rare candidate that overshoots
//! it (box bodies are biased towards shapes that stay inside the level).

use rand::seq::SliceRandom;
use rand::Rng;

use crate::syntax::{Action, Alphabet, Formula, ProcessTerm};
use crate::tableau;
use crate::verdict::Caps;

/// Shape constraints for [`random_formula`].
#[derive(Debug, Clone)]
pub struct FormulaSpec {
    pub alphabet: Alphabet,
    /// Target fragment: generated formulae satisfy `fragment_level <= level`.
    pub level: u32,
    pub max_md: u32,
    /// Maximal number of AST nodes.
    pub max_size: usize,
    /// Restrict to diamonds, conjunction, disjunction and `tt`.
    pub pure_diamond: bool,
}

impl FormulaSpec {
    pub fn new(alphabet: Alphabet, level: u32, max_md: u32, max_size: usize) -> FormulaSpec {
        assert!(level >= 1);
        FormulaSpec { alphabet, level, max_md, max_size, pure_diamond: false }
    }

    pub fn pure_diamond(mut self) -> FormulaSpec {
        self.pure_diamond = true;
        self
    }
}

fn random_action<R: Rng>(rng: &mut R, alphabet: &Alphabet) -> Action {
    let all: Vec<&Action> = alphabet.iter().collect();
    (*all.choose(rng).expect("alphabet is non-empty")).clone()
}

/// A random formula within `spec`.
pub fn random_formula<R: Rng>(rng: &mut R, spec: &FormulaSpec) -> Formula {
    loop {
        let f = gen(rng, spec, spec.level, spec.max_md, spec.max_size);
        let level_ok = f
            .fragment_level()
            .level()
            .is_some_and(|l| l <= spec.level);
        if level_ok && f.size() <= spec.max_size && f.md() <= spec.max_md {
            return f;
        }
    }
}

/// A random satisfiable formula within `spec` (decided by the tableau).
pub fn random_satisfiable_formula<R: Rng>(rng: &mut R, spec: &FormulaSpec) -> Formula {
    loop {
        let f = random_formula(rng, spec);
        if tableau::sat(&f, &spec.alphabet, &Caps::unlimited()).value {
            return f;
        }
    }
}

fn gen<R: Rng>(rng: &mut R, spec: &FormulaSpec, level: u32, md: u32, size: usize) -> Formula {
    // not enough budget for anything but a constant
    if size <= 1 {
        return if spec.pure_diamond || rng.gen_bool(0.7) {
            Formula::Tt
        } else {
            Formula::Ff
        };
    }
    let mut arms: Vec<u32> = vec![0]; // leaf
    if size >= 3 {
        arms.push(1); // and
        arms.push(2); // or
    }
    if md > 0 {
        arms.push(3); // diamond
    }
    if level >= 2 && !spec.pure_diamond {
        arms.push(4); // negation
        if md > 0 {
            arms.push(5); // box
        }
    }
    // bias towards connectives when budget is plentiful
    let weighted: Vec<u32> = arms
        .iter()
        .flat_map(|&a| {
            let w = if a == 0 { 1 } else { 2 };
            std::iter::repeat_n(a, w)
        })
        .collect();
    match *weighted.choose(rng).unwrap() {
        0 => gen(rng, spec, level, md, 1),
        1 | 2 => {
            let left_budget = rng.gen_range(1..size - 1);
            let l = gen(rng, spec, level, md, left_budget);
            let r = gen(rng, spec, level, md, size - 1 - l.size());
            if rng.gen_bool(0.5) {
                Formula::and(l, r)
            } else {
                Formula::or(l, r)
            }
        }
        3 => Formula::dia(
            random_action(rng, &spec.alphabet),
            gen(rng, spec, level, md - 1, size - 1),
        ),
        4 => Formula::neg(gen(rng, spec, level - 1, md, size - 1)),
        5 => {
            // box bodies that keep the level: constants, or a negated
            // body one level down
            let body = if rng.gen_bool(0.4) || size <= 3 {
                if rng.gen_bool(0.5) { Formula::Tt } else { Formula::Ff }
            } else {
                Formula::neg(gen(rng, spec, level - 1, md - 1, size - 2))
            };
            Formula::bx(random_action(rng, &spec.alphabet), body)
        }
        _ => unreachable!(),
    }
}

/// A random loop-free process of depth at most `max_depth` with at most
/// `max_width` branches per node.
pub fn random_process<R: Rng>(
    rng: &mut R,
    alphabet: &Alphabet,
    max_depth: u32,
    max_width: usize,
) -> ProcessTerm {
    if max_depth == 0 {
        return ProcessTerm::Nil;
    }
    let branches = rng.gen_range(0..=max_width);
    let mut term = ProcessTerm::Nil;
    let mut first = true;
    for _ in 0..branches {
        let child = random_process(rng, alphabet, max_depth - 1, max_width);
        let branch = ProcessTerm::prefix(random_action(rng, alphabet), child);
        term = if first { branch } else { ProcessTerm::sum(term, branch) };
        first = false;
    }
    term
}

/// The branch list of a term, treating `0` as the empty sum.
fn branches(t: &ProcessTerm) -> Vec<(Action, ProcessTerm)> {
    match t {
        ProcessTerm::Nil => Vec::new(),
        ProcessTerm::Prefix(a, p) => vec![(a.clone(), (**p).clone())],
        ProcessTerm::Sum(l, r) => {
            let mut out = branches(l);
            out.extend(branches(r));
            out
        }
    }
}

fn rebuild(bs: Vec<(Action, ProcessTerm)>) -> ProcessTerm {
    let mut it = bs.into_iter().map(|(a, p)| ProcessTerm::prefix(a, p));
    match it.next() {
        None => ProcessTerm::Nil,
        Some(first) => it.fold(first, ProcessTerm::sum),
    }
}

/// Drops a random selection of branches (possibly none) at every level.
/// The result is always below the input in the simulation preorder.
fn prune<R: Rng>(rng: &mut R, t: &ProcessTerm) -> ProcessTerm {
    let mut kept: Vec<(Action, ProcessTerm)> = Vec::new();
    for (a, p) in branches(t) {
        if rng.gen_bool(0.6) {
            kept.push((a, prune(rng, &p)));
        }
    }
    rebuild(kept)
}

/// One similarity-preserving edit: duplicate a branch, or add a pruned
/// copy of a branch (which the original branch then dominates).
fn sim_preserving_edit<R: Rng>(rng: &mut R, t: &ProcessTerm) -> ProcessTerm {
    let bs = branches(t);
    if bs.is_empty() {
        return t.clone();
    }
    let mut out = bs.clone();
    let (a, sub) = bs.choose(rng).unwrap();
    if rng.gen_bool(0.5) {
        out.push((a.clone(), sub.clone()));
    } else {
        out.push((a.clone(), prune(rng, sub)));
    }
    rebuild(out)
}

/// A pair of sim-equivalent processes obtained by applying independent
/// similarity-preserving edits to a common ancestor.
pub fn random_sim_equivalent_pair<R: Rng>(
    rng: &mut R,
    alphabet: &Alphabet,
    max_depth: u32,
) -> (ProcessTerm, ProcessTerm) {
    let base = random_process(rng, alphabet, max_depth, 2);
    let mut left = base.clone();
    let mut right = base;
    for _ in 0..rng.gen_range(0..=2) {
        left = sim_preserving_edit(rng, &left);
    }
    for _ in 0..rng.gen_range(0..=2) {
        right = sim_preserving_edit(rng, &right);
    }
    (left, right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::term_to_lts;
    use crate::preorders;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ab() -> Alphabet {
        Alphabet::parse("a,b").unwrap()
    }

    #[test]
    fn formulae_respect_their_spec() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for level in 1..=3u32 {
            let spec = FormulaSpec::new(ab(), level, 2, 12);
            for _ in 0..50 {
                let f = random_formula(&mut rng, &spec);
                assert!(f.fragment_level().level().unwrap() <= level);
                assert!(f.md() <= 2);
                assert!(f.size() <= 12);
            }
        }
    }

    #[test]
    fn pure_diamond_formulae_avoid_negation_and_ff() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = FormulaSpec::new(ab(), 1, 3, 14).pure_diamond();
        for _ in 0..50 {
            let f = random_satisfiable_formula(&mut rng, &spec);
            for sub in f.subformulae() {
                assert!(!matches!(
                    sub,
                    Formula::Not(_) | Formula::Box_(_, _) | Formula::Ff
                ));
            }
        }
    }

    #[test]
    fn generation_is_deterministic_under_a_seed() {
        let spec = FormulaSpec::new(ab(), 2, 2, 10);
        let one: Vec<Formula> = {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            (0..10).map(|_| random_formula(&mut rng, &spec)).collect()
        };
        let two: Vec<Formula> = {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            (0..10).map(|_| random_formula(&mut rng, &spec)).collect()
        };
        assert_eq!(one, two);
    }

    #[test]
    fn processes_respect_depth() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let p = random_process(&mut rng, &ab(), 3, 2);
            assert!(p.depth() <= 3);
        }
    }

    #[test]
    fn equivalent_pairs_really_are_sim_equivalent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let (p, q) = random_sim_equivalent_pair(&mut rng, &ab(), 3);
            let (lp, rp) = term_to_lts(&p, &ab());
            let (lq, rq) = term_to_lts(&q, &ab());
            assert!(
                preorders::kernel_holds(1, &lp, rp, &lq, rq),
                "pair not equivalent: {p} vs {q}"
            );
        }
    }
}
