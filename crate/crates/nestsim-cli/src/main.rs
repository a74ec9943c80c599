//! Command-line front end for the decision procedures.
//!
//! Each invocation answers one query — satisfiability, model checking, a
//! behavioural relation, primality, characteristic-formula status, a
//! game, or a brute-force oracle check — and prints a single-line JSON
//! verdict on standard output.  Witness and counterexample models are
//! written as Aldebaran `.aut` files next to the output (or under
//! `--out`), and the JSON refers to them by path.
//!
//! Queries about nesting depth `n` are routed by depth: `n = 2` goes to
//! the pair-based procedures of the two-nested fragment, `n ≥ 3` to the
//! games, and primality at `n = 1` is only served by the brute-force
//! oracle.  Exit codes: 0 verdict computed, 2 parse or format error,
//! 3 cap exceeded (the incomplete verdict is still printed),
//! 4 precondition violation.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nestsim::closure::LabelSet;
use nestsim::games;
use nestsim::lts::{read_aut, write_aut_file, Lts, StateId};
use nestsim::oracle::{self, UniverseBounds};
use nestsim::preorders::{bisim_holds, kernel_holds, nsim_holds};
use nestsim::semantics;
use nestsim::syntax::{parse_formula, Action, Alphabet, Formula};
use nestsim::tableau;
use nestsim::twosim::{self, CharMode};
use nestsim::{Caps, SearchStats, Verdict};

#[derive(Parser)]
#[command(
    name = "nestsim",
    version,
    about = "Satisfiability, primality and characteristic-formula checks \
             in the nested-simulation fragments of Hennessy-Milner logic"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Cap on expanded search nodes (0 = unlimited).
    #[arg(long, global = true, default_value_t = 1_000_000)]
    max_nodes: u64,

    /// Cap on satisfiability checks (0 = unlimited).
    #[arg(long, global = true, default_value_t = 1_000_000)]
    max_sat_calls: u64,

    /// Cap on subset choices enumerated per A(sub) site (0 = unlimited).
    #[arg(long, global = true, default_value_t = 4096)]
    max_sub_subsets: u64,

    /// Cap on enumerated construction scripts (0 = unlimited).
    #[arg(long, global = true, default_value_t = 200_000)]
    max_scripts: u64,

    /// Worker threads for concurrent branch exploration (1 = sequential).
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,

    /// Directory for witness/counterexample .aut files (default: current
    /// directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Print a move-by-move strategy trace to standard error (game
    /// subcommand).
    #[arg(long, global = true)]
    trace: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide satisfiability of a formula; a model is written as witness.
    Sat {
        /// Fragment the formula must lie in: S, 2S, nS:<k> or HML.
        #[arg(long, default_value = "HML")]
        logic: String,
        formula: String,
    },
    /// Model-check a formula at a state of an .aut transition system.
    Mc {
        file: PathBuf,
        state: usize,
        formula: String,
    },
    /// Decide a behavioural relation between the roots of two .aut files.
    Rel {
        /// Relation: sim, nsim:<k>, bisim or kernel:<k>.
        #[arg(long)]
        rel: String,
        left: PathBuf,
        right: PathBuf,
    },
    /// Decide whether a formula is prime in the level-n fragment.
    Prime {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        n: u32,
        formula: String,
    },
    /// Decide whether a formula is characteristic for some process.
    Characteristic {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        n: u32,
        /// within: characteristic inside the fragment; modulo: all models
        /// equivalent modulo the level-n kernel.
        #[arg(long, value_enum)]
        mode: Mode,
        formula: String,
    },
    /// Play a characterization game and report the winner.
    Game {
        #[arg(value_enum)]
        kind: GameKind,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        n: u32,
        formula: String,
        /// Right-hand formula for the similarity game (defaults to the
        /// left one).
        formula2: Option<String>,
    },
    /// Brute-force ground truth over a bounded process universe.
    Oracle {
        #[arg(value_enum)]
        sub: OracleSub,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..), default_value_t = 1)]
        n: u32,
        /// Required for `oracle characteristic`.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Universe depth bound (default: modal depth of the formula + 1).
        #[arg(long)]
        depth: Option<u32>,
        /// Successors per state and action (default: number of modal
        /// subformulae + 1).
        #[arg(long)]
        width: Option<usize>,
        formula: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Within,
    Modulo,
}

#[derive(Clone, Copy, ValueEnum)]
enum GameKind {
    Sim,
    Prime,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleSub {
    Prime,
    Characteristic,
    Models,
}

enum CliError {
    /// Malformed input — exit code 2.
    Parse(String),
    /// Violated precondition of the requested procedure — exit code 4.
    Precondition(String),
}

fn parse_err(e: impl std::fmt::Display) -> CliError {
    CliError::Parse(e.to_string())
}

/// The serialized verdict: field order is fixed and all fields are always
/// present, so the output shape is stable.
#[derive(Serialize)]
struct JsonVerdict<'a> {
    problem: &'a str,
    value: bool,
    complete: bool,
    witness: Option<String>,
    counterexample: Option<[String; 2]>,
    detail: Option<&'a str>,
    stats: SearchStats,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Parse(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Precondition(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(4)
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    if cli.parallel > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.parallel)
            .build_global()
            .ok();
    }
    let cap = |v: u64| if v == 0 { None } else { Some(v) };
    let caps = Caps {
        max_nodes: cap(cli.max_nodes),
        max_sat_calls: cap(cli.max_sat_calls),
        max_sub_subsets: cap(cli.max_sub_subsets),
        max_scripts: cap(cli.max_scripts),
        parallel: cli.parallel > 1,
    };
    let out = OutDir::new(cli.out.clone())?;
    let verdict = match &cli.cmd {
        Cmd::Sat { logic, formula } => cmd_sat(logic, formula, &caps)?,
        Cmd::Mc { file, state, formula } => cmd_mc(file, *state, formula)?,
        Cmd::Rel { rel, left, right } => cmd_rel(rel, left, right)?,
        Cmd::Prime { n, formula } => cmd_prime(*n, formula, &caps)?,
        Cmd::Characteristic { n, mode, formula } => cmd_characteristic(*n, *mode, formula, &caps)?,
        Cmd::Game { kind, n, formula, formula2 } => {
            cmd_game(*kind, *n, formula, formula2.as_deref(), &caps, cli.trace)?
        }
        Cmd::Oracle { sub, n, mode, depth, width, formula } => {
            cmd_oracle(*sub, *n, *mode, *depth, *width, formula)?
        }
    };
    emit(&verdict, &out)
}

// ---------------------------------------------------------------------------
// alphabet and flag parsing
// ---------------------------------------------------------------------------

/// Action identifiers mentioned in a raw formula or process term.
fn scan_actions(text: &str) -> BTreeSet<Action> {
    let bytes = text.as_bytes();
    let mut out = BTreeSet::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_lowercase() {
            let start = i;
            while i < bytes.len()
                && (bytes[i].is_ascii_lowercase() || bytes[i].is_ascii_digit() || bytes[i] == b'_')
            {
                i += 1;
            }
            let word = &text[start..i];
            if word != "tt" && word != "ff" {
                if let Ok(a) = Action::new(word) {
                    out.insert(a);
                }
            }
        } else {
            i += 1;
        }
    }
    out
}

/// The working alphabet: the actions mentioned in the inputs, or the
/// `NESTSIM_DEFAULT_ALPHABET` environment variable when they mention
/// none, or `{a, b}` as a last resort.
fn resolve_alphabet(texts: &[&str]) -> Result<Alphabet, CliError> {
    let mentioned: BTreeSet<Action> = texts.iter().flat_map(|t| scan_actions(t)).collect();
    if !mentioned.is_empty() {
        return Alphabet::new(mentioned).map_err(parse_err);
    }
    if let Ok(list) = std::env::var("NESTSIM_DEFAULT_ALPHABET") {
        return Alphabet::parse(&list).map_err(parse_err);
    }
    Alphabet::parse("a,b").map_err(parse_err)
}

/// Maximal nesting level admitted by a `--logic` flag; `None` = HML.
fn parse_logic(s: &str) -> Result<Option<u32>, CliError> {
    match s {
        "HML" => Ok(None),
        "S" => Ok(Some(1)),
        "2S" => Ok(Some(2)),
        _ => match s.strip_prefix("nS:").and_then(|k| k.parse::<u32>().ok()) {
            Some(k) if k >= 1 => Ok(Some(k)),
            _ => Err(CliError::Parse(format!(
                "unknown logic `{s}`; expected S, 2S, nS:<k> or HML"
            ))),
        },
    }
}

fn fragment_name(bound: u32) -> String {
    match bound {
        1 => "L_S".to_string(),
        k => format!("L_{k}S"),
    }
}

/// Enforces that `f` lies in the level-`bound` fragment.
fn check_fragment(f: &Formula, bound: Option<u32>) -> Result<(), CliError> {
    let Some(bound) = bound else { return Ok(()) };
    match f.fragment_level().level() {
        Some(k) if k <= bound => Ok(()),
        Some(k) => Err(CliError::Precondition(format!(
            "the formula has nesting level {k}, outside {}",
            fragment_name(bound)
        ))),
        None => Err(CliError::Precondition(format!(
            "the formula lies outside {}",
            fragment_name(bound)
        ))),
    }
}

enum RelSpec {
    Nsim(u32),
    Kernel(u32),
    Bisim,
}

fn parse_rel(s: &str) -> Result<RelSpec, CliError> {
    let depth = |prefix: &str| {
        s.strip_prefix(prefix)
            .and_then(|k| k.parse::<u32>().ok())
            .filter(|k| *k >= 1)
    };
    match s {
        "sim" => Ok(RelSpec::Nsim(1)),
        "bisim" => Ok(RelSpec::Bisim),
        _ => depth("nsim:")
            .map(RelSpec::Nsim)
            .or_else(|| depth("kernel:").map(RelSpec::Kernel))
            .ok_or_else(|| {
                CliError::Parse(format!(
                    "unknown relation `{s}`; expected sim, nsim:<k>, bisim or kernel:<k>"
                ))
            }),
    }
}

// ---------------------------------------------------------------------------
// subcommand handlers
// ---------------------------------------------------------------------------

fn cmd_sat(logic: &str, formula: &str, caps: &Caps) -> Result<Verdict, CliError> {
    let bound = parse_logic(logic)?;
    let al = resolve_alphabet(&[formula])?;
    let f = parse_formula(formula, &al).map_err(parse_err)?;
    check_fragment(&f, bound)?;
    Ok(tableau::sat(&f, &al, caps))
}

fn cmd_mc(file: &PathBuf, state: usize, formula: &str) -> Result<Verdict, CliError> {
    let start = Instant::now();
    let (lts, _) = read_aut(file).map_err(parse_err)?;
    if state >= lts.n_states() {
        return Err(CliError::Parse(format!(
            "state {state} out of range; the system has {} states",
            lts.n_states()
        )));
    }
    let mut actions: BTreeSet<Action> = lts.alphabet().iter().cloned().collect();
    actions.extend(scan_actions(formula));
    let al = match Alphabet::new(actions) {
        Ok(al) => al,
        Err(_) => resolve_alphabet(&[formula])?,
    };
    let f = parse_formula(formula, &al).map_err(parse_err)?;
    let value = semantics::models(&lts, StateId(state), &f);
    let mut v = Verdict::new("mc", value).with_detail(format!(
        "state {state} {} the formula",
        if value { "satisfies" } else { "violates" }
    ));
    v.stats.runtime_ms = start.elapsed().as_millis() as u64;
    Ok(v)
}

fn cmd_rel(rel: &str, left: &PathBuf, right: &PathBuf) -> Result<Verdict, CliError> {
    let spec = parse_rel(rel)?;
    let start = Instant::now();
    let (l1, r1) = read_aut(left).map_err(parse_err)?;
    let (l2, r2) = read_aut(right).map_err(parse_err)?;
    let (value, detail) = match spec {
        RelSpec::Nsim(k) => {
            let holds = nsim_holds(k, &l1, r1, &l2, r2);
            let name = if k == 1 {
                "the simulation preorder".to_string()
            } else {
                format!("the {k}-nested simulation preorder")
            };
            (
                holds,
                format!(
                    "the left root is {}below the right root in {name}",
                    if holds { "" } else { "not " }
                ),
            )
        }
        RelSpec::Kernel(k) => {
            let holds = kernel_holds(k, &l1, r1, &l2, r2);
            (
                holds,
                format!(
                    "the roots are {}equivalent in the {k}-nested simulation kernel",
                    if holds { "" } else { "not " }
                ),
            )
        }
        RelSpec::Bisim => {
            let holds = bisim_holds(&l1, r1, &l2, r2);
            (
                holds,
                format!("the roots are {}bisimilar", if holds { "" } else { "not " }),
            )
        }
    };
    let mut v = Verdict::new("rel", value).with_detail(detail);
    v.stats.runtime_ms = start.elapsed().as_millis() as u64;
    Ok(v)
}

/// Attaches a concrete refuting pair from the bounded oracle to a
/// negative game verdict that carries none.  The enrichment is skipped
/// unless the oracle answer is certified and agrees with the game.
fn enrich_counterexample(
    mut v: Verdict,
    oracle_verdict: impl FnOnce() -> Verdict,
) -> Verdict {
    if !v.value && v.complete && v.counterexample.is_none() {
        let o = oracle_verdict();
        if o.complete && !o.value {
            v.counterexample = o.counterexample;
        }
    }
    v
}

/// Bounds small enough for counterexample extraction.
fn enrichment_bounds(f: &Formula, al: &Alphabet) -> Option<UniverseBounds> {
    let b = UniverseBounds::feasible_for(f, al, 5_000);
    (b.projected_classes() <= 5_000).then_some(b)
}

fn cmd_prime(n: u32, formula: &str, caps: &Caps) -> Result<Verdict, CliError> {
    let al = resolve_alphabet(&[formula])?;
    let f = parse_formula(formula, &al).map_err(parse_err)?;
    check_fragment(&f, Some(n))?;
    match n {
        1 => Err(CliError::Precondition(
            "primality at n = 1 is not covered by the game or pair procedures; \
             run `nestsim oracle prime --n 1 <formula>` for a bounded brute-force verdict"
                .to_string(),
        )),
        2 => twosim::prime_2s(&f, &al, caps).map_err(twosim_err),
        _ => {
            let v = games::decide_prime(n, &f, &al, caps).map_err(game_err)?;
            Ok(enrich_counterexample(v, || match enrichment_bounds(&f, &al) {
                Some(b) => oracle::brute_prime(n, &f, &b),
                None => Verdict::new("prime", true),
            }))
        }
    }
}

fn cmd_characteristic(
    n: u32,
    mode: Mode,
    formula: &str,
    caps: &Caps,
) -> Result<Verdict, CliError> {
    let al = resolve_alphabet(&[formula])?;
    let f = parse_formula(formula, &al).map_err(parse_err)?;
    // the modulo question is meaningful for any formula, so only the
    // within reading is fragment-gated
    if matches!(mode, Mode::Within) {
        check_fragment(&f, Some(n))?;
    }
    let in_level_2 = matches!(f.fragment_level().level(), Some(k) if k <= 2);
    match (mode, n) {
        (Mode::Modulo, 2) if in_level_2 => {
            twosim::characteristic_2s(&f, CharMode::Modulo, &al, caps).map_err(twosim_err)
        }
        (Mode::Modulo, _) => {
            let v = games::decide_characteristic_modulo(n, &f, &al, caps);
            Ok(enrich_counterexample(v, || match enrichment_bounds(&f, &al) {
                Some(b) => oracle::brute_characteristic_modulo(n, &f, &b),
                None => Verdict::new("characteristic-modulo", true),
            }))
        }
        (Mode::Within, 1) => Err(CliError::Precondition(
            "the characteristic-within question at n = 1 is not covered by the game or \
             pair procedures; run `nestsim oracle characteristic --n 1 --mode within \
             <formula>` for a bounded brute-force verdict"
                .to_string(),
        )),
        (Mode::Within, 2) => {
            twosim::characteristic_2s(&f, CharMode::Within, &al, caps).map_err(twosim_err)
        }
        (Mode::Within, _) => {
            games::decide_characteristic_within(n, &f, &al, caps).map_err(game_err)
        }
    }
}

fn cmd_game(
    kind: GameKind,
    n: u32,
    formula: &str,
    formula2: Option<&str>,
    caps: &Caps,
    trace: bool,
) -> Result<Verdict, CliError> {
    let mut texts = vec![formula];
    texts.extend(formula2);
    let al = resolve_alphabet(&texts)?;
    let f1 = parse_formula(formula, &al).map_err(parse_err)?;
    match kind {
        GameKind::Sim => {
            let f2 = match formula2 {
                Some(t) => parse_formula(t, &al).map_err(parse_err)?,
                None => f1.clone(),
            };
            let u1 = LabelSet::singleton(f1);
            let u2 = LabelSet::singleton(f2);
            if trace {
                let (v, lines) = games::a_wins_sim_traced(n, &u1, &u2, &al, caps);
                for line in lines {
                    eprintln!("{line}");
                }
                Ok(v)
            } else {
                Ok(games::a_wins_sim(n, &u1, &u2, &al, caps))
            }
        }
        GameKind::Prime => {
            if formula2.is_some() {
                return Err(CliError::Parse(
                    "the prime game takes a single formula".to_string(),
                ));
            }
            if trace {
                let (v, lines) =
                    games::a_wins_primensp_traced(n, &f1, &al, caps).map_err(game_err)?;
                for line in lines {
                    eprintln!("{line}");
                }
                Ok(v)
            } else {
                games::a_wins_primensp(n, &f1, &al, caps).map_err(game_err)
            }
        }
    }
}

fn cmd_oracle(
    sub: OracleSub,
    n: u32,
    mode: Option<Mode>,
    depth: Option<u32>,
    width: Option<usize>,
    formula: &str,
) -> Result<Verdict, CliError> {
    let al = resolve_alphabet(&[formula])?;
    let f = parse_formula(formula, &al).map_err(parse_err)?;
    let mut bounds = UniverseBounds::default_for(&f, &al);
    if let Some(d) = depth {
        bounds.depth = d;
    }
    if let Some(w) = width {
        if w == 0 {
            return Err(CliError::Parse("--width must be at least 1".to_string()));
        }
        bounds.width = w;
    }
    match sub {
        OracleSub::Prime => Ok(oracle::brute_prime(n, &f, &bounds)),
        OracleSub::Characteristic => match mode {
            None => Err(CliError::Parse(
                "--mode is required for `oracle characteristic`".to_string(),
            )),
            Some(Mode::Within) => Ok(oracle::brute_characteristic_within(n, &f, &bounds)),
            Some(Mode::Modulo) => Ok(oracle::brute_characteristic_modulo(n, &f, &bounds)),
        },
        OracleSub::Models => {
            let start = Instant::now();
            let models = oracle::brute_models(&f, &bounds);
            let value = !models.is_empty();
            let mut v = Verdict::new("oracle-models", value).with_detail(format!(
                "{} model classes within depth {} and width {}",
                models.len(),
                bounds.depth,
                bounds.width
            ));
            // an empty result refutes satisfiability only when the
            // universe is deep enough to contain some model of f
            v.complete = value || bounds.depth >= f.md() + 1;
            if let Some((l, r)) = models.into_iter().next() {
                v = v.with_witness(l, r);
            }
            v.stats.runtime_ms = start.elapsed().as_millis() as u64;
            Ok(v)
        }
    }
}

fn game_err(e: games::GameError) -> CliError {
    match e {
        games::GameError::Precondition(msg) => CliError::Precondition(msg),
        other => CliError::Parse(other.to_string()),
    }
}

fn twosim_err(e: twosim::TwoSimError) -> CliError {
    match e {
        twosim::TwoSimError::Fragment(msg) => CliError::Precondition(msg),
        other => CliError::Parse(other.to_string()),
    }
}

// ---------------------------------------------------------------------------
// output
// ---------------------------------------------------------------------------

struct OutDir {
    dir: Option<PathBuf>,
}

impl OutDir {
    fn new(dir: Option<PathBuf>) -> Result<OutDir, CliError> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d).map_err(|e| {
                CliError::Parse(format!("cannot create output directory {}: {e}", d.display()))
            })?;
        }
        Ok(OutDir { dir })
    }

    fn write(&self, name: &str, l: &Lts, root: StateId) -> Result<String, CliError> {
        let path = match &self.dir {
            Some(d) => d.join(name),
            None => PathBuf::from(name),
        };
        write_aut_file(l, root, &path)
            .map_err(|e| CliError::Parse(format!("cannot write {}: {e}", path.display())))?;
        Ok(path.display().to_string())
    }
}

fn emit(v: &Verdict, out: &OutDir) -> Result<u8, CliError> {
    let witness = match &v.witness {
        Some((l, r)) => Some(out.write("witness.aut", l, *r)?),
        None => None,
    };
    let counterexample = match &v.counterexample {
        Some(((l1, r1), (l2, r2))) => Some([
            out.write("counterexample_1.aut", l1, *r1)?,
            out.write("counterexample_2.aut", l2, *r2)?,
        ]),
        None => None,
    };
    let line = serde_json::to_string(&JsonVerdict {
        problem: &v.problem,
        value: v.value,
        complete: v.complete,
        witness,
        counterexample,
        detail: v.detail.as_deref(),
        stats: v.stats,
    })
    .expect("verdict serialization cannot fail");
    println!("{line}");
    Ok(if v.complete { 0 } else { 3 })
}
