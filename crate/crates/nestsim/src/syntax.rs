//! Formula and process syntax.
//!
//! Formulae are Hennessy–Milner formulae over a finite action alphabet:
//! `tt`, `ff`, conjunction, disjunction, negation and the modalities
//! `<a>` (diamond) and `[a]` (box).  The negation-nesting fragments are
//! cumulative: `L_1S` (all operators except negation and box), and `L_nS`
//! which additionally allows negations of `L_(n-1)S` formulae.  Box is
//! treated as sugar: `[a]f` abbreviates `!<a>!f`.
//!
//! Processes are the sub-language `p ::= 0 | a.p | p + p` of CCS.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// An action name: lowercase ASCII identifier `[a-z][a-z0-9_]*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Action(String);

impl Action {
    /// Builds an action, validating the identifier shape.
    pub fn new(name: &str) -> Result<Self, ParseError> {
        let mut chars = name.chars();
        let ok = match chars.next() {
            Some(c) if c.is_ascii_lowercase() => {
                chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
            }
            _ => false,
        };
        if ok {
            Ok(Action(name.to_string()))
        } else {
            Err(ParseError {
                pos: 0,
                msg: format!("invalid action identifier `{name}`"),
            })
        }
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A finite, non-empty action alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet(BTreeSet<Action>);

impl Alphabet {
    /// Builds an alphabet from the given actions.  Errors if empty.
    pub fn new<I: IntoIterator<Item = Action>>(actions: I) -> Result<Self, ParseError> {
        let set: BTreeSet<Action> = actions.into_iter().collect();
        if set.is_empty() {
            return Err(ParseError {
                pos: 0,
                msg: "alphabet must be non-empty".to_string(),
            });
        }
        Ok(Alphabet(set))
    }

    /// Parses a comma-separated action list, e.g. `"a,b"`.
    pub fn parse(s: &str) -> Result<Self, ParseError> {
        let actions: Result<Vec<_>, _> = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(Action::new)
            .collect();
        Alphabet::new(actions?)
    }

    pub fn contains(&self, a: &Action) -> bool {
        self.0.contains(a)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Action> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Union of two alphabets.
    pub fn union(&self, other: &Alphabet) -> Alphabet {
        Alphabet(self.0.union(&other.0).cloned().collect())
    }
}

/// A Hennessy–Milner formula.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Tt,
    Ff,
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Diamond(Action, Box<Formula>),
    Box_(Action, Box<Formula>),
    Not(Box<Formula>),
}

impl Formula {
    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Formula {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn dia(a: Action, f: Formula) -> Formula {
        Formula::Diamond(a, Box::new(f))
    }

    pub fn bx(a: Action, f: Formula) -> Formula {
        Formula::Box_(a, Box::new(f))
    }

    /// Negation with on-the-fly simplification: `!tt = ff`, `!ff = tt` and
    /// `!!f = f`.  Keeps desugared formulae free of double negations.
    pub fn neg(f: Formula) -> Formula {
        match f {
            Formula::Tt => Formula::Ff,
            Formula::Ff => Formula::Tt,
            Formula::Not(inner) => *inner,
            other => Formula::Not(Box::new(other)),
        }
    }

    /// Conjunction of a list; `tt` for the empty list.
    pub fn conj<I: IntoIterator<Item = Formula>>(fs: I) -> Formula {
        let mut it = fs.into_iter();
        match it.next() {
            None => Formula::Tt,
            Some(first) => it.fold(first, Formula::and),
        }
    }

    /// Modal depth: nesting depth of `<a>`/`[a]`; negation contributes zero.
    pub fn md(&self) -> u32 {
        match self {
            Formula::Tt | Formula::Ff => 0,
            Formula::And(l, r) | Formula::Or(l, r) => l.md().max(r.md()),
            Formula::Diamond(_, f) | Formula::Box_(_, f) => 1 + f.md(),
            Formula::Not(f) => f.md(),
        }
    }

    /// Size: number of AST nodes.
    pub fn size(&self) -> usize {
        match self {
            Formula::Tt | Formula::Ff => 1,
            Formula::And(l, r) | Formula::Or(l, r) => 1 + l.size() + r.size(),
            Formula::Diamond(_, f) | Formula::Box_(_, f) | Formula::Not(f) => 1 + f.size(),
        }
    }

    /// The set of subformulae, including the formula itself.
    pub fn subformulae(&self) -> BTreeSet<Formula> {
        let mut out = BTreeSet::new();
        self.collect_sub(&mut out);
        out
    }

    fn collect_sub(&self, out: &mut BTreeSet<Formula>) {
        out.insert(self.clone());
        match self {
            Formula::Tt | Formula::Ff => {}
            Formula::And(l, r) | Formula::Or(l, r) => {
                l.collect_sub(out);
                r.collect_sub(out);
            }
            Formula::Diamond(_, f) | Formula::Box_(_, f) | Formula::Not(f) => f.collect_sub(out),
        }
    }

    /// Actions mentioned anywhere in the formula.
    pub fn actions(&self) -> BTreeSet<Action> {
        let mut out = BTreeSet::new();
        self.collect_actions(&mut out);
        out
    }

    fn collect_actions(&self, out: &mut BTreeSet<Action>) {
        match self {
            Formula::Tt | Formula::Ff => {}
            Formula::And(l, r) | Formula::Or(l, r) => {
                l.collect_actions(out);
                r.collect_actions(out);
            }
            Formula::Diamond(a, f) | Formula::Box_(a, f) => {
                out.insert(a.clone());
                f.collect_actions(out);
            }
            Formula::Not(f) => f.collect_actions(out),
        }
    }

    /// Rewrites every box `[a]f` to `!<a>!f`, simplifying `!tt`, `!ff` and
    /// double negations as they appear.  Preserves meaning and modal depth.
    pub fn desugar(&self) -> Formula {
        match self {
            Formula::Tt => Formula::Tt,
            Formula::Ff => Formula::Ff,
            Formula::And(l, r) => Formula::and(l.desugar(), r.desugar()),
            Formula::Or(l, r) => Formula::or(l.desugar(), r.desugar()),
            Formula::Diamond(a, f) => Formula::dia(a.clone(), f.desugar()),
            Formula::Box_(a, f) => Formula::neg(Formula::dia(a.clone(), Formula::neg(f.desugar()))),
            Formula::Not(f) => Formula::neg(f.desugar()),
        }
    }

    /// Least `n` such that the formula lies in `L_nS` once the box sugar
    /// and redundant Boolean negations are eliminated.  Negations are
    /// pushed through conjunction, disjunction, constants and double
    /// negation (De Morgan rewrites, which preserve meaning and the
    /// as-written modal structure), so only negations that come to stand
    /// directly over a diamond contribute a nesting level.  For example
    /// `!(<a>tt & !<b>tt)` counts as `!<a>tt | <b>tt`, hence level 2, and
    /// `[a]([a]ff & [b]ff)` counts as `!<a>(<a>tt | <b>tt)`, hence level 2,
    /// while `[a]<b>tt = !<a>!<b>tt` is genuinely level 3.
    pub fn fragment_level(&self) -> FragmentTag {
        // `negated` tracks whether an odd number of pending negations
        // surrounds `f`; Boolean operators let a pending negation pass
        // through, a diamond absorbs it as one level of nesting.
        fn level(f: &Formula, negated: bool) -> u32 {
            match f {
                Formula::Tt | Formula::Ff => 1,
                Formula::And(l, r) | Formula::Or(l, r) => {
                    level(l, negated).max(level(r, negated))
                }
                Formula::Not(g) => level(g, !negated),
                Formula::Diamond(_, g) => {
                    let inner = level(g, false);
                    if negated { inner + 1 } else { inner }
                }
                // [a]g abbreviates !<a>!g
                Formula::Box_(_, g) => {
                    let inner = level(g, true);
                    if negated { inner } else { inner + 1 }
                }
            }
        }
        FragmentTag::Ns(level(self, false))
    }
}

/// Fragment classification of a formula.  Box desugaring gives every
/// formula a finite level, so `BsOnly` is reserved for callers that need a
/// sentinel for "no finite level requested".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FragmentTag {
    Ns(u32),
    BsOnly,
}

impl FragmentTag {
    /// The level, if finite.
    pub fn level(self) -> Option<u32> {
        match self {
            FragmentTag::Ns(n) => Some(n),
            FragmentTag::BsOnly => None,
        }
    }
}

impl fmt::Display for FragmentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FragmentTag::Ns(n) => write!(f, "{n}S"),
            FragmentTag::BsOnly => f.write_str("BS"),
        }
    }
}

// Printing: `|` binds loosest, then `&`, then the unary operators.  Binary
// operators print left-associatively; parentheses are inserted exactly when
// re-parsing would otherwise change the tree.
const PREC_OR: u8 = 0;
const PREC_AND: u8 = 1;
const PREC_UNARY: u8 = 2;

impl Formula {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        match self {
            Formula::Tt => f.write_str("tt"),
            Formula::Ff => f.write_str("ff"),
            Formula::And(l, r) => {
                let paren = min > PREC_AND;
                if paren {
                    f.write_str("(")?;
                }
                l.fmt_prec(f, PREC_AND)?;
                f.write_str(" & ")?;
                r.fmt_prec(f, PREC_AND + 1)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Formula::Or(l, r) => {
                let paren = min > PREC_OR;
                if paren {
                    f.write_str("(")?;
                }
                l.fmt_prec(f, PREC_OR)?;
                f.write_str(" | ")?;
                r.fmt_prec(f, PREC_OR + 1)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Formula::Diamond(a, body) => {
                write!(f, "<{a}>")?;
                body.fmt_prec(f, PREC_UNARY)
            }
            Formula::Box_(a, body) => {
                write!(f, "[{a}]")?;
                body.fmt_prec(f, PREC_UNARY)
            }
            Formula::Not(body) => {
                f.write_str("!")?;
                body.fmt_prec(f, PREC_UNARY)
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// A process term: `0`, prefix `a.p`, or sum `p + p`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProcessTerm {
    Nil,
    Prefix(Action, Box<ProcessTerm>),
    Sum(Box<ProcessTerm>, Box<ProcessTerm>),
}

impl ProcessTerm {
    pub fn prefix(a: Action, p: ProcessTerm) -> ProcessTerm {
        ProcessTerm::Prefix(a, Box::new(p))
    }

    pub fn sum(l: ProcessTerm, r: ProcessTerm) -> ProcessTerm {
        ProcessTerm::Sum(Box::new(l), Box::new(r))
    }

    /// Syntactic depth: longest chain of prefixes.
    pub fn depth(&self) -> u32 {
        match self {
            ProcessTerm::Nil => 0,
            ProcessTerm::Prefix(_, p) => 1 + p.depth(),
            ProcessTerm::Sum(l, r) => l.depth().max(r.depth()),
        }
    }

    /// Actions mentioned in the term.
    pub fn actions(&self) -> BTreeSet<Action> {
        let mut out = BTreeSet::new();
        self.collect_actions(&mut out);
        out
    }

    fn collect_actions(&self, out: &mut BTreeSet<Action>) {
        match self {
            ProcessTerm::Nil => {}
            ProcessTerm::Prefix(a, p) => {
                out.insert(a.clone());
                p.collect_actions(out);
            }
            ProcessTerm::Sum(l, r) => {
                l.collect_actions(out);
                r.collect_actions(out);
            }
        }
    }
}

const PPREC_SUM: u8 = 0;
const PPREC_PREFIX: u8 = 1;

impl ProcessTerm {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        match self {
            ProcessTerm::Nil => f.write_str("0"),
            ProcessTerm::Prefix(a, p) => {
                write!(f, "{a}.")?;
                p.fmt_prec(f, PPREC_PREFIX)
            }
            ProcessTerm::Sum(l, r) => {
                let paren = min > PPREC_SUM;
                if paren {
                    f.write_str("(")?;
                }
                l.fmt_prec(f, PPREC_SUM)?;
                f.write_str(" + ")?;
                r.fmt_prec(f, PPREC_SUM + 1)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for ProcessTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// A parse failure, with a byte offset into the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at offset {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

struct Lexer<'a> {
    input: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(input: &'a str) -> Self {
        Lexer {
            input: input.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.input.len() && self.input[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.input.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        match self.peek() {
            Some(got) if got == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(format!("expected `{}`", c as char))),
        }
    }

    fn err(&self, msg: String) -> ParseError {
        ParseError { pos: self.pos, msg }
    }

    /// Reads an identifier `[a-z][a-z0-9_]*` at the current position.
    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.input.get(self.pos) {
            Some(c) if c.is_ascii_lowercase() => self.pos += 1,
            _ => return Err(self.err("expected identifier".to_string())),
        }
        while let Some(c) = self.input.get(self.pos) {
            if c.is_ascii_lowercase() || c.is_ascii_digit() || *c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(std::str::from_utf8(&self.input[start..self.pos])
            .expect("ascii")
            .to_string())
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }
}

/// Parses a formula.  Grammar, loosest first:
/// `f ::= g ('|' g)*`, `g ::= h ('&' h)*`,
/// `h ::= 'tt' | 'ff' | '(' f ')' | '<'act'>' h | '['act']' h | '!' h`.
/// Every action must belong to `alphabet`.
pub fn parse_formula(input: &str, alphabet: &Alphabet) -> Result<Formula, ParseError> {
    let mut lex = Lexer::new(input);
    let f = parse_or(&mut lex, alphabet)?;
    if !lex.at_end() {
        return Err(lex.err("unexpected trailing input".to_string()));
    }
    Ok(f)
}

fn parse_or(lex: &mut Lexer, alphabet: &Alphabet) -> Result<Formula, ParseError> {
    let mut f = parse_and(lex, alphabet)?;
    while lex.peek() == Some(b'|') {
        lex.bump();
        let r = parse_and(lex, alphabet)?;
        f = Formula::or(f, r);
    }
    Ok(f)
}

fn parse_and(lex: &mut Lexer, alphabet: &Alphabet) -> Result<Formula, ParseError> {
    let mut f = parse_unary(lex, alphabet)?;
    while lex.peek() == Some(b'&') {
        lex.bump();
        let r = parse_unary(lex, alphabet)?;
        f = Formula::and(f, r);
    }
    Ok(f)
}

fn parse_action(lex: &mut Lexer, alphabet: &Alphabet) -> Result<Action, ParseError> {
    let start = lex.pos;
    let name = lex.ident()?;
    let action = Action::new(&name).map_err(|e| ParseError {
        pos: start,
        msg: e.msg,
    })?;
    if !alphabet.contains(&action) {
        return Err(ParseError {
            pos: start,
            msg: format!("unknown action `{name}`"),
        });
    }
    Ok(action)
}

fn parse_unary(lex: &mut Lexer, alphabet: &Alphabet) -> Result<Formula, ParseError> {
    match lex.peek() {
        Some(b'(') => {
            lex.bump();
            let f = parse_or(lex, alphabet)?;
            lex.expect(b')')?;
            Ok(f)
        }
        Some(b'<') => {
            lex.bump();
            let a = parse_action(lex, alphabet)?;
            lex.expect(b'>')?;
            let body = parse_unary(lex, alphabet)?;
            Ok(Formula::dia(a, body))
        }
        Some(b'[') => {
            lex.bump();
            let a = parse_action(lex, alphabet)?;
            lex.expect(b']')?;
            let body = parse_unary(lex, alphabet)?;
            Ok(Formula::bx(a, body))
        }
        Some(b'!') => {
            lex.bump();
            let body = parse_unary(lex, alphabet)?;
            Ok(Formula::Not(Box::new(body)))
        }
        Some(c) if c == b't' || c == b'f' => {
            let start = lex.pos;
            let word = lex.ident()?;
            match word.as_str() {
                "tt" => Ok(Formula::Tt),
                "ff" => Ok(Formula::Ff),
                _ => Err(ParseError {
                    pos: start,
                    msg: format!("expected formula, found `{word}`"),
                }),
            }
        }
        _ => Err(lex.err("expected formula".to_string())),
    }
}

/// Parses a process term.  Grammar:
/// `p ::= q ('+' q)*`, `q ::= '0' | '(' p ')' | act '.' q`.
pub fn parse_process(input: &str, alphabet: &Alphabet) -> Result<ProcessTerm, ParseError> {
    let mut lex = Lexer::new(input);
    let p = parse_sum(&mut lex, alphabet)?;
    if !lex.at_end() {
        return Err(lex.err("unexpected trailing input".to_string()));
    }
    Ok(p)
}

fn parse_sum(lex: &mut Lexer, alphabet: &Alphabet) -> Result<ProcessTerm, ParseError> {
    let mut p = parse_prefix(lex, alphabet)?;
    while lex.peek() == Some(b'+') {
        lex.bump();
        let r = parse_prefix(lex, alphabet)?;
        p = ProcessTerm::sum(p, r);
    }
    Ok(p)
}

fn parse_prefix(lex: &mut Lexer, alphabet: &Alphabet) -> Result<ProcessTerm, ParseError> {
    match lex.peek() {
        Some(b'0') => {
            lex.bump();
            Ok(ProcessTerm::Nil)
        }
        Some(b'(') => {
            lex.bump();
            let p = parse_sum(lex, alphabet)?;
            lex.expect(b')')?;
            Ok(p)
        }
        Some(c) if c.is_ascii_lowercase() => {
            let a = parse_action(lex, alphabet)?;
            lex.expect(b'.')?;
            let body = parse_prefix(lex, alphabet)?;
            Ok(ProcessTerm::prefix(a, body))
        }
        _ => Err(lex.err("expected process".to_string())),
    }
}

/// Convenience: alphabet consisting of the actions mentioned in `inputs`,
/// merged with an optional base alphabet.  Errors if the result is empty.
pub fn inferred_alphabet(
    mentioned: impl IntoIterator<Item = Action>,
    base: Option<&Alphabet>,
) -> Result<Alphabet, ParseError> {
    let mut set: BTreeSet<Action> = mentioned.into_iter().collect();
    if let Some(b) = base {
        set.extend(b.iter().cloned());
    }
    Alphabet::new(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ab() -> Alphabet {
        Alphabet::parse("a, b").unwrap()
    }

    fn a12() -> Alphabet {
        Alphabet::parse("a1,a2").unwrap()
    }

    fn f(s: &str) -> Formula {
        parse_formula(s, &ab()).unwrap()
    }

    #[test]
    fn parse_box_conjunction() {
        let got = parse_formula("<a1>tt & [a2]ff", &a12()).unwrap();
        let want = Formula::and(
            Formula::dia(Action::new("a1").unwrap(), Formula::Tt),
            Formula::bx(Action::new("a2").unwrap(), Formula::Ff),
        );
        assert_eq!(got, want);
    }

    #[test]
    fn parse_precedence_unary_and_or() {
        // unary binds tighter than `&`, which binds tighter than `|`
        let got = f("!<a>tt & ff | tt");
        let want = Formula::or(
            Formula::and(
                Formula::Not(Box::new(Formula::dia(
                    Action::new("a").unwrap(),
                    Formula::Tt,
                ))),
                Formula::Ff,
            ),
            Formula::Tt,
        );
        assert_eq!(got, want);
    }

    #[test]
    fn parse_error_position() {
        let err = parse_formula("<a>(tt", &ab()).unwrap_err();
        assert_eq!(err.pos, 6);
    }

    #[test]
    fn parse_unknown_action() {
        let err = parse_formula("<c>tt", &ab()).unwrap_err();
        assert!(err.msg.contains("unknown action"));
    }

    #[test]
    fn fragment_levels() {
        assert_eq!(f("<a>tt").fragment_level(), FragmentTag::Ns(1));
        // [a]ff desugars to !<a>tt
        assert_eq!(f("[a]ff").fragment_level(), FragmentTag::Ns(2));
        // double negation eliminates
        assert_eq!(f("!!<a>tt").fragment_level(), FragmentTag::Ns(1));
        // !(<a>tt & !<b>tt) counts as !<a>tt | <b>tt
        assert_eq!(f("!(<a>tt & !<b>tt)").fragment_level(), FragmentTag::Ns(2));
        // negation over a diamond cannot be pushed further
        assert_eq!(f("[a]<b>tt").fragment_level(), FragmentTag::Ns(3));
        // the classic characteristic formula for a.0 sits in L_2S: the box
        // bodies are conjunctions of negations, so De Morgan absorbs the
        // extra negation from the box encoding
        let phi = parse_formula("<a>([a]ff & [b]ff) & [a]([a]ff & [b]ff) & [b]ff", &ab()).unwrap();
        assert_eq!(phi.fragment_level(), FragmentTag::Ns(2));
    }

    #[test]
    fn measures() {
        let phi = parse_formula("<a1>([a1]ff & [a2]ff)", &a12()).unwrap();
        assert_eq!(phi.md(), 2);
        assert_eq!(f("tt").md(), 0);
        assert_eq!(f("!<a>tt").md(), 1);
        assert_eq!(f("tt").size(), 1);
        assert_eq!(f("<a>tt").size(), 2);
        assert_eq!(f("<a>tt & ff").size(), 4);
        let subs = f("<a>tt").subformulae();
        assert_eq!(subs.len(), 2);
        assert!(subs.contains(&Formula::Tt));
    }

    #[test]
    fn desugar_box() {
        let got = f("[a]ff").desugar();
        let want = Formula::neg(Formula::dia(Action::new("a").unwrap(), Formula::Tt));
        assert_eq!(got, want);
        assert_eq!(f("[a]<b>tt").md(), f("[a]<b>tt").desugar().md());
    }

    #[test]
    fn print_inserts_minimal_parens() {
        let phi = Formula::or(f("tt"), Formula::or(f("ff"), f("tt")));
        assert_eq!(phi.to_string(), "tt | (ff | tt)");
        let psi = Formula::dia(Action::new("a").unwrap(), Formula::and(f("tt"), f("ff")));
        assert_eq!(psi.to_string(), "<a>(tt & ff)");
    }

    #[test]
    fn parse_process_examples() {
        let p = parse_process("a.b.0 + a.0", &ab()).unwrap();
        assert_eq!(p.depth(), 2);
        assert_eq!(p.to_string(), "a.b.0 + a.0");
        let q = parse_process("a.(b.0 + a.0)", &ab()).unwrap();
        assert_eq!(q.to_string(), "a.(b.0 + a.0)");
        assert!(parse_process("a.", &ab()).is_err());
    }

    // Strategy for random formulae over {a, b}, box and negation included.
    fn formula_strategy() -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![Just(Formula::Tt), Just(Formula::Ff)];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone())
                    .prop_map(|(l, r)| Formula::and(l, r)),
                (inner.clone(), inner.clone()).prop_map(|(l, r)| Formula::or(l, r)),
                inner
                    .clone()
                    .prop_map(|x| Formula::dia(Action::new("a").unwrap(), x)),
                inner
                    .clone()
                    .prop_map(|x| Formula::bx(Action::new("b").unwrap(), x)),
                inner.prop_map(|x| Formula::Not(Box::new(x))),
            ]
        })
    }

    fn process_strategy() -> impl Strategy<Value = ProcessTerm> {
        let leaf = Just(ProcessTerm::Nil);
        leaf.prop_recursive(4, 24, 2, |inner| {
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
        #[test]
        fn print_parse_roundtrip(phi in formula_strategy()) {
            let printed = phi.to_string();
            let reparsed = parse_formula(&printed, &ab()).unwrap();
            prop_assert_eq!(reparsed, phi);
        }

        #[test]
        fn process_print_parse_roundtrip(p in process_strategy()) {
            let printed = p.to_string();
            let reparsed = parse_process(&printed, &ab()).unwrap();
            prop_assert_eq!(reparsed, p);
        }

        #[test]
        fn negation_perturbs_level_boundedly(phi in formula_strategy()) {
            let FragmentTag::Ns(k) = phi.fragment_level() else { unreachable!() };
            let neg = Formula::Not(Box::new(phi.clone()));
            let FragmentTag::Ns(k_neg) = neg.fragment_level() else { unreachable!() };
            // one extra negation costs at most one level and never lowers
            // the level by more than one (it may cancel an outer negation)
            prop_assert!(k_neg <= k + 1);
            prop_assert!(k_neg + 1 >= k);
            // and double negation is free
            let dneg = Formula::Not(Box::new(neg));
            prop_assert_eq!(dneg.fragment_level(), FragmentTag::Ns(k));
        }

        #[test]
        fn fragments_are_cumulative(phi in formula_strategy()) {
            // rewrite to an equivalent formula where negation stands only
            // over diamonds, then check the defining grammar recursion on
            // it: the classified level admits the formula and no smaller
            // level does.
            fn push(f: &Formula, negated: bool) -> Formula {
                match (f, negated) {
                    (Formula::Tt, false) | (Formula::Ff, true) => Formula::Tt,
                    (Formula::Tt, true) | (Formula::Ff, false) => Formula::Ff,
                    (Formula::And(l, r), false) => Formula::and(push(l, false), push(r, false)),
                    (Formula::And(l, r), true) => Formula::or(push(l, true), push(r, true)),
                    (Formula::Or(l, r), false) => Formula::or(push(l, false), push(r, false)),
                    (Formula::Or(l, r), true) => Formula::and(push(l, true), push(r, true)),
                    (Formula::Not(g), _) => push(g, !negated),
                    (Formula::Diamond(a, g), false) => Formula::dia(a.clone(), push(g, false)),
                    (Formula::Diamond(a, g), true) => {
                        Formula::Not(Box::new(Formula::dia(a.clone(), push(g, false))))
                    }
                    (Formula::Box_(a, g), false) => {
                        Formula::Not(Box::new(Formula::dia(a.clone(), push(g, true))))
                    }
                    (Formula::Box_(a, g), true) => Formula::dia(a.clone(), push(g, true)),
                }
            }
            fn in_level(f: &Formula, n: u32) -> bool {
                match f {
                    Formula::Tt | Formula::Ff => true,
                    Formula::And(l, r) | Formula::Or(l, r) => in_level(l, n) && in_level(r, n),
                    Formula::Diamond(_, f) => in_level(f, n),
                    Formula::Not(f) => n >= 2 && in_level(f, n - 1),
                    Formula::Box_(_, _) => false,
                }
            }
            let pushed = push(&phi, false);
            let FragmentTag::Ns(k) = phi.fragment_level() else { unreachable!() };
            prop_assert!(in_level(&pushed, k));
            prop_assert!(in_level(&pushed, k + 1));
            if k > 1 {
                prop_assert!(!in_level(&pushed, k - 1));
            }
        }
    }
}
