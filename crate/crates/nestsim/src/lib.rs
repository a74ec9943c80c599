//! Decision procedures for modal characterizations of nested-simulation
//! semantics over finite, loop-free labelled transition systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`syntax`] — Hennessy–Milner formulae, the negation-nesting fragments
//!   `L_nS`, and a small CCS-style process language.
//! * [`lts`] — finite loop-free labelled transition systems with Aldebaran
//!   (`.aut`) I/O.
//! * [`preorders`] — simulation, n-nested simulation and bisimulation,
//!   computed as greatest fixpoints.
//! * [`semantics`] — model checking and (via the tableau) entailment.
//! * [`closure`] — propositional saturation of formula label sets, shared by
//!   the tableau, the games and the two-nested algorithms.
//! * [`tableau`] — satisfiability with model extraction.
//! * [`games`] — the characterization and primality games, decided by
//!   memoized game-tree search.
//! * [`twosim`] — the `ConPro` construction, minimal lower bounds and the
//!   pair-based primality/characteristic checks for the two-nested fragment.
//! * [`oracle`] — a brute-force semantic oracle over bounded process
//!   universes, used for differential testing.
//! * [`generate`] — seeded random generators for formulae and processes.

pub mod closure;
pub mod games;
pub mod generate;
pub mod lts;
pub mod oracle;
pub mod preorders;
pub mod semantics;
pub mod syntax;
pub mod tableau;
pub mod twosim;
pub mod verdict;

pub use syntax::{Action, Alphabet, Formula, FragmentTag, ProcessTerm};
pub use verdict::{Caps, SearchStats, Verdict};
