//! Probabilistic instruction sequences: abstract syntax, concrete syntax and
//! the canonical prefix/period form.
//!
//! Concrete syntax, one primitive instruction per token group:
//!
//! ```text
//! a   f.m          basic instruction (focus `f`, method `m`)
//! +a  -a           positive / negative test
//! #3  #(1+2)       forward jump
//! !                termination
//! prb  prb(2/3)    probabilistic basic instruction (+prb, -prb for tests)
//! #H{k}            uniform jump over 1..k
//! #G{q}{k} #G{}{k} truncated geometric jump
//! #GU{q}{l} #GU{}{l} unbounded geometric jump over multiples of l
//! [a;#2]           unit instruction
//! X;Y  (X)*        concatenation, repetition
//! {P}+_(p){Q}      probabilistic choice (sugar)
//! ```

use std::fmt;

use crate::meadow::Rational;

mod normalize;
mod parser;
mod units;

pub use normalize::{expand, normalize};
pub use parser::{parse, parse_meadow_expr, parse_rational};
pub use units::{build_random_assignment, desugar_prchoice, eliminate_units};

pub(crate) use normalize::{canonicalize, stream_of};

/// `focus.method`, or a bare `method` when no focus is given.
///
/// Names are identifiers over `[A-Za-z0-9_]`, optionally carrying one
/// parenthesized rational argument (`random(2/3)`, `get(1/2)`), which is how
/// the random services of projected programs are spelled.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasicAction {
    focus: Option<String>,
    method: String,
}

impl BasicAction {
    pub fn new(method: &str) -> Result<Self, crate::Error> {
        check_name(method)?;
        Ok(BasicAction { focus: None, method: method.to_string() })
    }

    pub fn with_focus(focus: &str, method: &str) -> Result<Self, crate::Error> {
        check_name(focus)?;
        check_name(method)?;
        Ok(BasicAction { focus: Some(focus.to_string()), method: method.to_string() })
    }

    pub(crate) fn from_parts(focus: Option<String>, method: String) -> Self {
        BasicAction { focus, method }
    }

    pub fn focus(&self) -> Option<&str> {
        self.focus.as_deref()
    }

    pub fn method(&self) -> &str {
        &self.method
    }

    /// The name of the service that processes this instruction: the focus,
    /// or the method itself for focus-less instructions.
    pub fn service_key(&self) -> &str {
        self.focus.as_deref().unwrap_or(&self.method)
    }

    /// `random(q).get` with a per-q service.
    pub fn random_per_q(q: &Rational) -> Self {
        BasicAction {
            focus: Some(format!("random({})", q.to_fraction_string())),
            method: "get".to_string(),
        }
    }

    /// `random.get(q)` on the single random service.
    pub fn random_single(q: &Rational) -> Self {
        BasicAction {
            focus: Some("random".to_string()),
            method: format!("get({})", q.to_fraction_string()),
        }
    }

    /// Reply probability if this is a call to one of the random services.
    pub fn random_service_probability(&self) -> Option<Rational> {
        let focus = self.focus.as_deref()?;
        if self.method == "get" {
            name_argument(focus, "random")
        } else if focus == "random" {
            name_argument(&self.method, "get")
        } else {
            None
        }
        .map(|q| q.mkprob())
    }
}

/// `base(q)` → `q`.
pub(crate) fn name_argument(name: &str, base: &str) -> Option<Rational> {
    let rest = name.strip_prefix(base)?.strip_prefix('(')?.strip_suffix(')')?;
    parse_rational(rest).ok()
}

fn check_name(name: &str) -> Result<(), crate::Error> {
    let (ident, arg) = match name.find('(') {
        Some(i) => (&name[..i], Some(&name[i..])),
        None => (name, None),
    };
    let ident_ok = !ident.is_empty() && ident.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    let arg_ok = arg.is_none_or(|a| {
        a.strip_prefix('(').and_then(|a| a.strip_suffix(')')).is_some_and(|a| parse_rational(a).is_ok())
    });
    if ident_ok && arg_ok && ident != "prb" {
        Ok(())
    } else {
        Err(crate::Error::InvalidName(name.to_string()))
    }
}

impl fmt::Display for BasicAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.focus {
            Some(focus) => write!(f, "{}.{}", focus, self.method),
            None => f.write_str(&self.method),
        }
    }
}

/// Probability argument of a probabilistic instruction.
///
/// `Default` is the bare form (`prb`, `#G{}{k}`); it is printed as written but
/// means 1/2.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Prob {
    Default,
    Value(Rational),
}

impl Prob {
    /// The clamped probability `mkprob(q)`, 1/2 for the bare form.
    pub fn effective(&self) -> Rational {
        match self {
            Prob::Default => Rational::half(),
            Prob::Value(q) => q.mkprob(),
        }
    }

    fn write_arg(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prob::Default => Ok(()),
            Prob::Value(q) => write!(f, "{q}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Instruction {
    Basic(BasicAction),
    PosTest(BasicAction),
    NegTest(BasicAction),
    Jump(usize),
    Halt,
    Prb(Prob),
    PrbPos(Prob),
    PrbNeg(Prob),
    /// Uniform jump over `1..=k`.
    JumpH(usize),
    /// Geometric jump over `1..=k`; leftover mass is inaction.
    JumpG(Prob, usize),
    /// Geometric jump over `l, 2l, 3l, ...`.
    JumpGU(Prob, usize),
    Unit(Vec<Instruction>),
}

impl Instruction {
    pub fn basic(method: &str) -> Self {
        Instruction::Basic(BasicAction::new(method).expect("valid method name"))
    }

    pub fn is_probabilistic(&self) -> bool {
        matches!(
            self,
            Instruction::Prb(_)
                | Instruction::PrbPos(_)
                | Instruction::PrbNeg(_)
                | Instruction::JumpH(_)
                | Instruction::JumpG(..)
                | Instruction::JumpGU(..)
        ) || matches!(self, Instruction::Unit(body) if body.iter().any(Instruction::is_probabilistic))
    }

    pub fn is_probabilistic_jump(&self) -> bool {
        matches!(self, Instruction::JumpH(_) | Instruction::JumpG(..) | Instruction::JumpGU(..))
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, Instruction::Unit(_))
    }

    /// Number of primitive instructions once units are flattened.
    pub fn flat_len(&self) -> usize {
        match self {
            Instruction::Unit(body) => body.iter().map(Instruction::flat_len).sum(),
            _ => 1,
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Basic(a) => write!(f, "{a}"),
            Instruction::PosTest(a) => write!(f, "+{a}"),
            Instruction::NegTest(a) => write!(f, "-{a}"),
            Instruction::Jump(l) => write!(f, "#{l}"),
            Instruction::Halt => f.write_str("!"),
            Instruction::Prb(p) => write_prb(f, "", p),
            Instruction::PrbPos(p) => write_prb(f, "+", p),
            Instruction::PrbNeg(p) => write_prb(f, "-", p),
            Instruction::JumpH(k) => write!(f, "#H{{{k}}}"),
            Instruction::JumpG(q, k) => {
                f.write_str("#G{")?;
                q.write_arg(f)?;
                write!(f, "}}{{{k}}}")
            }
            Instruction::JumpGU(q, l) => {
                f.write_str("#GU{")?;
                q.write_arg(f)?;
                write!(f, "}}{{{l}}}")
            }
            Instruction::Unit(body) => {
                f.write_str("[")?;
                write_list(f, body)?;
                f.write_str("]")
            }
        }
    }
}

fn write_prb(f: &mut fmt::Formatter<'_>, sign: &str, p: &Prob) -> fmt::Result {
    match p {
        Prob::Default => write!(f, "{sign}prb"),
        Prob::Value(q) => write!(f, "{sign}prb({q})"),
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, list: &[Instruction]) -> fmt::Result {
    for (i, ins) in list.iter().enumerate() {
        if i > 0 {
            f.write_str(";")?;
        }
        write!(f, "{ins}")?;
    }
    Ok(())
}

/// Closed term over primitive instructions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Instr(Instruction),
    Concat(Box<Term>, Box<Term>),
    Rep(Box<Term>),
    /// `{left}+_(p){right}`: run `left` with probability `mkprob(p)`, else `right`.
    Choice { left: Box<Term>, p: Rational, right: Box<Term> },
}

impl Term {
    pub fn instr(i: Instruction) -> Self {
        Term::Instr(i)
    }

    pub fn concat(a: Term, b: Term) -> Self {
        Term::Concat(Box::new(a), Box::new(b))
    }

    pub fn rep(a: Term) -> Self {
        Term::Rep(Box::new(a))
    }

    /// Left-nested concatenation of a nonempty list.
    pub fn seq(items: impl IntoIterator<Item = Term>) -> Option<Term> {
        items.into_iter().reduce(Term::concat)
    }

    pub fn from_instructions(list: &[Instruction]) -> Option<Term> {
        Term::seq(list.iter().cloned().map(Term::Instr))
    }

    pub fn contains_units(&self) -> bool {
        match self {
            Term::Instr(i) => i.is_unit(),
            Term::Concat(a, b) => a.contains_units() || b.contains_units(),
            Term::Rep(a) => a.contains_units(),
            Term::Choice { left, right, .. } => left.contains_units() || right.contains_units(),
        }
    }

    pub fn contains_choice(&self) -> bool {
        match self {
            Term::Instr(_) => false,
            Term::Concat(a, b) => a.contains_choice() || b.contains_choice(),
            Term::Rep(a) => a.contains_choice(),
            Term::Choice { .. } => true,
        }
    }

    pub fn contains_rep(&self) -> bool {
        match self {
            Term::Instr(_) => false,
            Term::Concat(a, b) => a.contains_rep() || b.contains_rep(),
            Term::Rep(_) => true,
            Term::Choice { left, right, .. } => left.contains_rep() || right.contains_rep(),
        }
    }

    /// Instructions in order, for repetition-free terms.
    pub fn instructions(&self) -> Option<Vec<Instruction>> {
        fn go(t: &Term, out: &mut Vec<Instruction>) -> bool {
            match t {
                Term::Instr(i) => {
                    out.push(i.clone());
                    true
                }
                Term::Concat(a, b) => go(a, out) && go(b, out),
                Term::Rep(_) | Term::Choice { .. } => false,
            }
        }
        let mut out = Vec::new();
        go(self, &mut out).then_some(out)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Instr(i) => write!(f, "{i}"),
            Term::Concat(a, b) => {
                write!(f, "{a};")?;
                if matches!(**b, Term::Concat(..)) {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Term::Rep(a) => write!(f, "({a})*"),
            Term::Choice { left, p, right } => write!(f, "{{{left}}}+_({p}){{{right}}}"),
        }
    }
}

pub fn print(t: &Term) -> String {
    t.to_string()
}

/// Canonical first form `prefix` or `prefix;(period)*` of a unit-free sequence.
///
/// The period is primitive (not a power of a shorter word) and the prefix is
/// as short as possible, so two sequences denote the same instruction stream
/// iff they are equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct InstructionSequence {
    prefix: Vec<Instruction>,
    period: Vec<Instruction>,
}

impl InstructionSequence {
    /// Canonicalizes `prefix;(period)*` (or the finite `prefix` when `period` is empty).
    pub fn new(prefix: Vec<Instruction>, period: Vec<Instruction>) -> Result<Self, crate::Error> {
        if prefix.is_empty() && period.is_empty() {
            return Err(crate::Error::EmptySequence);
        }
        if prefix.iter().chain(&period).any(Instruction::is_unit) {
            return Err(crate::Error::UnexpectedUnit);
        }
        Ok(canonicalize(prefix, period))
    }

    pub fn finite(instructions: Vec<Instruction>) -> Result<Self, crate::Error> {
        InstructionSequence::new(instructions, Vec::new())
    }

    pub fn prefix(&self) -> &[Instruction] {
        &self.prefix
    }

    pub fn period(&self) -> &[Instruction] {
        &self.period
    }

    pub fn is_finite(&self) -> bool {
        self.period.is_empty()
    }

    /// Instruction count with the period counted once.
    pub fn len(&self) -> usize {
        self.prefix.len() + self.period.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Prefix followed by one copy of the period.
    pub fn instructions(&self) -> impl Iterator<Item = &Instruction> {
        self.prefix.iter().chain(&self.period)
    }

    /// Instruction at stream position `pos`, `None` past the end of a finite stream.
    pub fn at(&self, pos: usize) -> Option<&Instruction> {
        self.wrap(pos).map(|i| self.slot(i))
    }

    /// Maps a stream position onto `0..len()`, `None` past the end.
    pub fn wrap(&self, pos: usize) -> Option<usize> {
        let m = self.prefix.len();
        let n = self.period.len();
        if pos < m {
            Some(pos)
        } else if n == 0 {
            None
        } else {
            Some(m + (pos - m) % n)
        }
    }

    /// Instruction at slot `i < len()`.
    pub fn slot(&self, i: usize) -> &Instruction {
        if i < self.prefix.len() {
            &self.prefix[i]
        } else {
            &self.period[i - self.prefix.len()]
        }
    }

    pub fn to_term(&self) -> Term {
        let prefix = Term::from_instructions(&self.prefix);
        let period = Term::from_instructions(&self.period).map(Term::rep);
        match (prefix, period) {
            (Some(p), Some(q)) => Term::concat(p, q),
            (Some(p), None) => p,
            (None, Some(q)) => q,
            (None, None) => unreachable!("sequences are nonempty"),
        }
    }

    pub(crate) fn from_canonical_parts(prefix: Vec<Instruction>, period: Vec<Instruction>) -> Self {
        InstructionSequence { prefix, period }
    }
}

impl fmt::Display for InstructionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_list(f, &self.prefix)?;
        if !self.period.is_empty() {
            if !self.prefix.is_empty() {
                f.write_str(";")?;
            }
            f.write_str("(")?;
            write_list(f, &self.period)?;
            f.write_str(")*")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn print_forms() {
        assert_eq!(Instruction::Jump(3).to_string(), "#3");
        assert_eq!(Instruction::PrbPos(Prob::Default).to_string(), "+prb");
        assert_eq!(Instruction::JumpGU(Prob::Default, 2).to_string(), "#GU{}{2}");
        assert_eq!(Instruction::JumpG(Prob::Value(Rational::new(1, 3)), 4).to_string(), "#G{1/3}{4}");
        assert_eq!(Instruction::PrbNeg(Prob::Value(Rational::new(2, 3))).to_string(), "-prb(2/3)");
    }

    #[test]
    fn right_nested_concat_keeps_structure() {
        let a = Term::instr(Instruction::basic("a"));
        let b = Term::instr(Instruction::basic("b"));
        let c = Term::instr(Instruction::basic("c"));
        let t = Term::concat(a, Term::concat(b, c));
        assert_eq!(t.to_string(), "a;(b;c)");
        assert_eq!(parse(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn random_service_names() {
        let q = Rational::new(2, 3);
        let perq = BasicAction::random_per_q(&q);
        assert_eq!(perq.to_string(), "random(2/3).get");
        assert_eq!(perq.random_service_probability(), Some(q.clone()));
        let single = BasicAction::random_single(&q);
        assert_eq!(single.to_string(), "random.get(2/3)");
        assert_eq!(single.random_service_probability(), Some(q));
        assert_eq!(BasicAction::with_focus("f", "get").unwrap().random_service_probability(), None);
    }

    #[test]
    fn names_are_validated() {
        assert!(BasicAction::new("x_1").is_ok());
        assert!(BasicAction::new("").is_err());
        assert!(BasicAction::new("a.b").is_err());
        assert!(BasicAction::new("prb").is_err());
        assert!(BasicAction::with_focus("random(1/2)", "get").is_ok());
    }
}
