//! Model checking of formulae over loop-free transition systems, plus
//! entailment and logical equivalence decided through satisfiability.
//!
//! `models` follows the usual satisfaction clauses: `<a>f` asks for some
//! `a`-successor satisfying `f`, `[a]f` for all of them, and negation
//! complements.  Entailment `f1 |= f2` is reduced to unsatisfiability of
//! `f1 & !f2`; a model of that conjunction is returned as the countermodel.

use std::collections::HashMap;

use crate::closure::LabelSet;
use crate::lts::{Lts, StateId};
use crate::syntax::{Alphabet, Formula};
use crate::tableau;
use crate::verdict::{Caps, Verdict};

/// Does state `p` of `l` satisfy `f`?  Precondition: `l` is loop-free.
pub fn models(l: &Lts, p: StateId, f: &Formula) -> bool {
    debug_assert!(crate::lts::validate_loop_free(l).is_ok());
    models_rec(l, p, f)
}

fn models_rec(l: &Lts, p: StateId, f: &Formula) -> bool {
    match f {
        Formula::Tt => true,
        Formula::Ff => false,
        Formula::And(a, b) => models_rec(l, p, a) && models_rec(l, p, b),
        Formula::Or(a, b) => models_rec(l, p, a) || models_rec(l, p, b),
        Formula::Diamond(act, body) => l.succs_via(p, act).any(|q| models_rec(l, q, body)),
        Formula::Box_(act, body) => l.succs_via(p, act).all(|q| models_rec(l, q, body)),
        Formula::Not(body) => !models_rec(l, p, body),
    }
}

/// Does `p` satisfy every member of `set`?
pub fn models_label_set(l: &Lts, p: StateId, set: &LabelSet) -> bool {
    set.iter().all(|f| models(l, p, f))
}

/// One boolean per state of `l`: does the state satisfy `f`?  Computed
/// bottom-up over subformulae, so bulk queries over large systems stay
/// linear in `|l| * |f|`.
pub fn satisfying_states(l: &Lts, f: &Formula) -> Vec<bool> {
    debug_assert!(crate::lts::validate_loop_free(l).is_ok());
    let mut memo: HashMap<Formula, Vec<bool>> = HashMap::new();
    table(l, f, &mut memo);
    memo.remove(f).expect("table computed for the root formula")
}

fn table(l: &Lts, f: &Formula, memo: &mut HashMap<Formula, Vec<bool>>) {
    if memo.contains_key(f) {
        return;
    }
    let row: Vec<bool> = match f {
        Formula::Tt => vec![true; l.n_states()],
        Formula::Ff => vec![false; l.n_states()],
        Formula::And(a, b) => {
            table(l, a, memo);
            table(l, b, memo);
            let (ra, rb) = (&memo[&**a], &memo[&**b]);
            ra.iter().zip(rb).map(|(x, y)| *x && *y).collect()
        }
        Formula::Or(a, b) => {
            table(l, a, memo);
            table(l, b, memo);
            let (ra, rb) = (&memo[&**a], &memo[&**b]);
            ra.iter().zip(rb).map(|(x, y)| *x || *y).collect()
        }
        Formula::Diamond(act, body) => {
            table(l, body, memo);
            let rb = &memo[&**body];
            l.states()
                .map(|p| l.succs_via(p, act).any(|q| rb[q.0]))
                .collect()
        }
        Formula::Box_(act, body) => {
            table(l, body, memo);
            let rb = &memo[&**body];
            l.states()
                .map(|p| l.succs_via(p, act).all(|q| rb[q.0]))
                .collect()
        }
        Formula::Not(body) => {
            table(l, body, memo);
            memo[&**body].iter().map(|x| !x).collect()
        }
    };
    memo.insert(f.clone(), row);
}

/// Does `f1` entail `f2` over the given alphabet?  When the answer is
/// negative the verdict's witness is a countermodel: a process satisfying
/// `f1` but not `f2`.
pub fn entails(f1: &Formula, f2: &Formula, alphabet: &Alphabet, caps: &Caps) -> Verdict {
    let both = Formula::and(f1.clone(), Formula::neg(f2.clone()));
    let sat = tableau::sat(&both, alphabet, caps);
    let mut v = Verdict::new("entails", !sat.value);
    v.stats = sat.stats;
    if !sat.complete {
        v.complete = false;
        v.detail = sat.detail;
        return v;
    }
    if sat.value {
        if let Some((model, root)) = sat.witness {
            debug_assert!(models(&model, root, f1) && !models(&model, root, f2));
            v = v.with_witness(model, root).with_detail("countermodel satisfies the left formula and falsifies the right");
        }
    }
    v
}

/// Mutual entailment.  On failure the witness is a countermodel for the
/// failing direction, named in the detail field.
pub fn logically_equiv(f1: &Formula, f2: &Formula, alphabet: &Alphabet, caps: &Caps) -> Verdict {
    let fwd = entails(f1, f2, alphabet, caps);
    if !fwd.complete {
        return Verdict { problem: "equiv".into(), ..fwd };
    }
    if !fwd.value {
        let mut v = Verdict::new("equiv", false);
        v.stats = fwd.stats;
        v.witness = fwd.witness;
        return v.with_detail("left-to-right entailment fails; witness satisfies left only");
    }
    let bwd = entails(f2, f1, alphabet, caps);
    let mut v = Verdict::new("equiv", bwd.value);
    v.stats.sat_calls = fwd.stats.sat_calls + bwd.stats.sat_calls;
    v.stats.search_nodes = fwd.stats.search_nodes + bwd.stats.search_nodes;
    if !bwd.complete {
        v.complete = false;
        v.detail = bwd.detail;
        return v;
    }
    if !bwd.value {
        v.witness = bwd.witness;
        return v.with_detail("right-to-left entailment fails; witness satisfies right only");
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::term_to_lts;
    use crate::preorders;
    use crate::syntax::{parse_formula, parse_process, Alphabet};

    fn abc() -> Alphabet {
        Alphabet::parse("a,b,c").unwrap()
    }

    fn f(s: &str) -> Formula {
        parse_formula(s, &abc()).unwrap()
    }

    fn proc_(s: &str) -> (Lts, StateId) {
        term_to_lts(&parse_process(s, &abc()).unwrap(), &abc())
    }

    #[test]
    fn branching_time_distinguishes_processes() {
        // a.(b.0 + c.0) satisfies [a]<b>tt, a.b.0 + a.c.0 does not
        let (p, pr) = proc_("a.(b.0 + c.0)");
        let (q, qr) = proc_("a.b.0 + a.c.0");
        let phi = f("[a]<b>tt");
        assert!(models(&p, pr, &phi));
        assert!(!models(&q, qr, &phi));
        // both satisfy the weaker <a><b>tt
        let weak = f("<a><b>tt");
        assert!(models(&p, pr, &weak));
        assert!(models(&q, qr, &weak));
    }

    #[test]
    fn negation_and_constants() {
        let (p, pr) = proc_("a.0");
        assert!(models(&p, pr, &f("tt")));
        assert!(!models(&p, pr, &f("ff")));
        assert!(models(&p, pr, &f("!<b>tt")));
        assert!(!models(&p, pr, &f("!<a>tt")));
        // deadlock satisfies every box
        let (z, zr) = proc_("0");
        assert!(models(&z, zr, &f("[a]ff & [b]ff & [c]ff")));
    }

    #[test]
    fn satisfying_states_matches_pointwise_models(){
        let (l, _) = proc_("a.(b.0 + c.0) + b.a.0");
        for phi in ["<a>tt", "[a]<b>tt", "!<b><a>tt | <c>tt", "[b][a]ff"] {
            let phi = f(phi);
            let row = satisfying_states(&l, &phi);
            for s in l.states() {
                assert_eq!(row[s.0], models(&l, s, &phi), "formula {phi} state {s}");
            }
        }
    }

    #[test]
    fn models_label_set_is_conjunctive() {
        let (p, pr) = proc_("a.0 + b.0");
        let set = LabelSet::new([f("<a>tt"), f("<b>tt"), f("[c]ff")]);
        assert!(models_label_set(&p, pr, &set));
        let set = LabelSet::new([f("<a>tt"), f("<c>tt")]);
        assert!(!models_label_set(&p, pr, &set));
    }

    #[test]
    fn entailment_with_countermodel() {
        let caps = Caps::unlimited();
        // <a>tt |= <a>tt | <b>tt holds
        let v = entails(&f("<a>tt"), &f("<a>tt | <b>tt"), &abc(), &caps);
        assert!(v.value && v.complete);
        // the converse fails; the countermodel must satisfy the left side only
        let v = entails(&f("<a>tt | <b>tt"), &f("<a>tt"), &abc(), &caps);
        assert!(!v.value && v.complete);
        let (m, root) = v.witness.expect("countermodel");
        assert!(models(&m, root, &f("<a>tt | <b>tt")));
        assert!(!models(&m, root, &f("<a>tt")));
        // the countermodel is forced to be a b-branch, i.e. sim-equivalent to b.0
        let (b, br) = proc_("b.0");
        assert!(preorders::kernel_holds(1, &m, root, &b, br));
    }

    #[test]
    fn diamond_distributes_over_disjunction() {
        let caps = Caps::unlimited();
        let v = logically_equiv(&f("<a>(<b>tt | <c>tt)"), &f("<a><b>tt | <a><c>tt"), &abc(), &caps);
        assert!(v.value && v.complete);
        let v = logically_equiv(&f("[a](<b>tt & <c>tt)"), &f("[a]<b>tt & [a]<c>tt"), &abc(), &caps);
        assert!(v.value && v.complete);
        // boxes do not distribute over disjunction
        let v = logically_equiv(&f("[a](<b>tt | <c>tt)"), &f("[a]<b>tt | [a]<c>tt"), &abc(), &caps);
        assert!(!v.value && v.complete);
        let (m, root) = v.witness.expect("countermodel for the failing direction");
        assert!(models(&m, root, &f("[a](<b>tt | <c>tt)")) || models(&m, root, &f("[a]<b>tt | [a]<c>tt")));
    }

    #[test]
    fn satisfaction_transfers_along_nsim() {
        // (a.b.0, a.b.0 + a.0) lies in nsim(2); every L_2S formula true at
        // the left state must hold at the right state.
        let (l1, p) = proc_("a.b.0");
        let (l2, q) = proc_("a.b.0 + a.0");
        assert!(preorders::nsim_holds(2, &l1, p, &l2, q));
        for s in [
            "<a><b>tt",
            "<a>(<b>tt & !<a>tt)",
            "[a]!<b>tt | <a>tt",
            "[b]ff & <a>[a]ff",
        ] {
            let phi = f(s);
            assert!(phi.fragment_level().level().unwrap_or(u32::MAX) <= 2, "{s}");
            if models(&l1, p, &phi) {
                assert!(models(&l2, q, &phi), "transfer failed for {s}");
            }
        }
    }
}
