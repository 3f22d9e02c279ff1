//! Passes that compile probabilistic instructions away.
//!
//! The full pipeline is
//!
//! ```text
//! desugar -> units -> normalize -> jumps-unbounded -> jumps-bounded -> [fair-coin] -> services
//! ```
//!
//! Every pass that changes instruction counts describes its output as blocks of
//! relocatable items and lets the assembler lay them out, so jumps in the rest
//! of the program keep their targets.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::assemble::{assemble, blocks_of, lower_at, Dest, Item};
use crate::meadow::Rational;
use crate::syntax::{desugar_prchoice, eliminate_units, normalize, stream_of, BasicAction, Instruction, InstructionSequence, Prob, Term};
use crate::Error;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ServiceStyle {
    /// `random(q).get`: one service per probability.
    #[default]
    PerQ,
    /// `random.get(q)`: one service, the probability is part of the method.
    Single,
}

impl FromStr for ServiceStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "perq" => Ok(ServiceStyle::PerQ),
            "single" => Ok(ServiceStyle::Single),
            _ => Err(Error::Precondition(format!("unknown service style `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pass {
    Desugar,
    Units,
    Normalize,
    JumpsUnbounded,
    JumpsBounded,
    FairCoin,
    Services,
}

impl Pass {
    pub const ALL: [Pass; 7] = [
        Pass::Desugar,
        Pass::Units,
        Pass::Normalize,
        Pass::JumpsUnbounded,
        Pass::JumpsBounded,
        Pass::FairCoin,
        Pass::Services,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pass::Desugar => "desugar",
            Pass::Units => "units",
            Pass::Normalize => "normalize",
            Pass::JumpsUnbounded => "jumps-unbounded",
            Pass::JumpsBounded => "jumps-bounded",
            Pass::FairCoin => "fair-coin",
            Pass::Services => "services",
        }
    }
}

impl fmt::Display for Pass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Pass::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| Error::UnknownPass(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectionOptions {
    pub service_style: ServiceStyle,
    passes: Vec<Pass>,
}

impl Default for ProjectionOptions {
    /// Every pass except `fair-coin`, per-q services.
    fn default() -> Self {
        ProjectionOptions {
            service_style: ServiceStyle::PerQ,
            passes: Pass::ALL.into_iter().filter(|p| *p != Pass::FairCoin).collect(),
        }
    }
}

impl ProjectionOptions {
    /// Passes must appear in pipeline order, each at most once.
    pub fn new(service_style: ServiceStyle, passes: Vec<Pass>) -> Result<Self, Error> {
        if passes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Precondition("passes must be listed in pipeline order without repeats".into()));
        }
        Ok(ProjectionOptions { service_style, passes })
    }

    /// Parses a comma-separated pass list such as `units,normalize,services`.
    pub fn parse_passes(list: &str) -> Result<Vec<Pass>, Error> {
        list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect()
    }

    pub fn with_fair_coin(mut self) -> Self {
        if !self.passes.contains(&Pass::FairCoin) {
            self.passes.push(Pass::FairCoin);
            self.passes.sort();
        }
        self
    }

    pub fn passes(&self) -> &[Pass] {
        &self.passes
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PassReport {
    pub name: String,
    pub input_size: usize,
    pub output_size: usize,
    pub gadgets: usize,
}

impl fmt::Display for PassReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: in={} out={} gadgets={}", self.name, self.input_size, self.output_size, self.gadgets)
    }
}

/// Instruction count of a term, period counted once, unit payloads flattened
/// and choices counted at their desugared size.
pub fn term_size(t: &Term) -> usize {
    match t {
        Term::Instr(i) => i.flat_len(),
        Term::Concat(a, b) => match stream_of(a) {
            Ok((_, period)) if !period.is_empty() => term_size(a),
            _ => term_size(a) + term_size(b),
        },
        Term::Rep(a) => term_size(a),
        Term::Choice { left, right, .. } => 2 + term_size(left) + term_size(right),
    }
}

fn count_choices(t: &Term) -> usize {
    match t {
        Term::Instr(_) => 0,
        Term::Concat(a, b) => count_choices(a) + count_choices(b),
        Term::Rep(a) => count_choices(a),
        Term::Choice { left, right, .. } => 1 + count_choices(left) + count_choices(right),
    }
}

fn count_units(t: &Term) -> usize {
    fn in_instr(i: &Instruction) -> usize {
        match i {
            Instruction::Unit(body) => 1 + body.iter().map(in_instr).sum::<usize>(),
            _ => 0,
        }
    }
    match t {
        Term::Instr(i) => in_instr(i),
        Term::Concat(a, b) => count_units(a) + count_units(b),
        Term::Rep(a) => count_units(a),
        Term::Choice { left, right, .. } => count_units(left) + count_units(right),
    }
}

fn count(s: &InstructionSequence, pred: impl Fn(&Instruction) -> bool) -> usize {
    s.instructions().filter(|i| pred(i)).count()
}

fn require(s: &InstructionSequence, bad: impl Fn(&Instruction) -> bool, what: &str) -> Result<(), Error> {
    match s.instructions().find(|i| bad(i)) {
        Some(i) => Err(Error::Precondition(format!("{what} (found `{i}`)"))),
        None => Ok(()),
    }
}

/// Replaces every `#GU{q}{l}` with a ladder of `+prb(q)` tests.
///
/// Each landing site `p + l·j` gets, right after its own instruction, one ladder
/// rung that either lands on the next site or moves on to the rung there.
/// Jumps wrap through the period, so the period itself needs no unrolling; sites
/// in the prefix get their own rungs.
pub fn eliminate_unbounded_jumps(s: &InstructionSequence) -> Result<InstructionSequence, Error> {
    if count(s, |i| matches!(i, Instruction::JumpGU(..))) == 0 {
        return Ok(s.clone());
    }
    let m = s.prefix().len();
    let n = s.period().len();
    // Rungs per slot, keyed by (probability, stride).
    let mut rungs: BTreeMap<usize, Vec<(Prob, usize)>> = BTreeMap::new();
    for (p, instr) in s.instructions().enumerate() {
        let Instruction::JumpGU(q, l) = instr else { continue };
        if *l == 0 {
            return Err(Error::Precondition("unbounded geometric jump with stride 0".into()));
        }
        if q.effective().is_zero() {
            continue;
        }
        let key = (q.clone(), *l);
        let mut x = p + l;
        while let Some(slot) = s.wrap(x) {
            let at = rungs.entry(slot).or_default();
            if at.contains(&key) {
                break;
            }
            at.push(key.clone());
            x = slot + l;
        }
    }
    let rung_index = |slot: usize, key: &(Prob, usize)| -> usize {
        1 + rungs[&slot].iter().position(|k| k == key).expect("rung registered")
    };
    // Landing on `x`, or moving to the rung there: both past the end of a
    // finite program mean inaction.
    let next_rung = |from: usize, key: &(Prob, usize)| -> Dest {
        let x = from + key.1;
        match s.wrap(x) {
            Some(slot) => Dest::Orig { pos: x, sub: rung_index(slot, key) },
            None => Dest::Inaction,
        }
    };
    let rung = |from: usize, key: &(Prob, usize)| Item::Branch {
        instr: Instruction::PrbPos(key.0.clone()),
        next: Dest::at(from + key.1),
        skip: next_rung(from, key),
    };
    let blocks = blocks_of(s, false, |instr, p| {
        let mut items = vec![match instr {
            Instruction::JumpGU(q, _) if q.effective().is_zero() => Item::Goto(Dest::Inaction),
            Instruction::JumpGU(q, l) => rung(p, &(q.clone(), *l)),
            _ => lower_at(instr, p)?,
        }];
        for key in rungs.get(&p).into_iter().flatten() {
            items.push(rung(p, key));
        }
        Ok(items)
    })?;
    debug_assert!(m + n == blocks.blocks.len());
    assemble(&blocks)
}

/// Replaces `#H{k}` by a cascade of `+prb(1/k), +prb(1/(k-1)), ..., +prb(1/2)`
/// and `#G{q}{k}` by `k` tests `+prb(q)`; the geometric residue is inaction.
pub fn eliminate_bounded_jumps(s: &InstructionSequence) -> Result<InstructionSequence, Error> {
    if count(s, |i| matches!(i, Instruction::JumpH(_) | Instruction::JumpG(..))) == 0 {
        return Ok(s.clone());
    }
    let blocks = blocks_of(s, false, |instr, p| {
        Ok(match instr {
            Instruction::JumpH(0) | Instruction::JumpG(_, 0) => vec![Item::Goto(Dest::Inaction)],
            Instruction::JumpH(1) => vec![Item::Goto(Dest::at(p + 1))],
            Instruction::JumpH(k) => (0..k - 1)
                .map(|i| Item::Branch {
                    instr: Instruction::PrbPos(Prob::Value(Rational::new(1, (k - i) as i64))),
                    next: Dest::at(p + i + 1),
                    skip: if i + 2 < *k { Dest::Orig { pos: p, sub: i + 1 } } else { Dest::at(p + k) },
                })
                .collect(),
            Instruction::JumpG(q, k) => (0..*k)
                .map(|i| Item::Branch {
                    instr: Instruction::PrbPos(q.clone()),
                    next: Dest::at(p + i + 1),
                    skip: if i + 1 < *k { Dest::Orig { pos: p, sub: i + 1 } } else { Dest::Inaction },
                })
                .collect(),
            _ => vec![lower_at(instr, p)?],
        })
    })?;
    assemble(&blocks)
}

/// Binary digits of `q ∈ (0,1)`: the digits up to the end of the first period
/// and, for non-dyadic `q`, the index where the period starts.
pub fn binary_expansion(q: &Rational) -> (Vec<bool>, Option<usize>) {
    let d = q.denom().clone();
    let mut r = q.numer().clone();
    let mut seen: BTreeMap<BigInt, usize> = BTreeMap::new();
    let mut bits = Vec::new();
    while !r.is_zero() {
        if let Some(&start) = seen.get(&r) {
            return (bits, Some(start));
        }
        seen.insert(r.clone(), bits.len());
        r <<= 1;
        let bit = r >= d;
        if bit {
            r -= &d;
        }
        bits.push(bit);
    }
    (bits, None)
}

/// Replaces biased probabilistic instructions by fair coin flips.
///
/// The test `+prb(q)` compares a uniformly random binary fraction, one fair
/// flip per digit, with the binary expansion of `q`: stage `i` flips once and
/// stops with the answer of digit `i` on heads, or moves on to the next digit.
/// A periodic expansion loops back to the first stage of its period in the
/// next copy of the program period, so finite or prefixed programs with such
/// a gadget become fully periodic, overflow turned into inaction.
pub fn realize_prb_fair(s: &InstructionSequence) -> Result<InstructionSequence, Error> {
    require(s, Instruction::is_probabilistic_jump, "probabilistic jumps must be eliminated first")?;
    let needs_gadget = |p: &Prob| !matches!(p, Prob::Default);
    let biased = |i: &Instruction| matches!(i, Instruction::Prb(p) | Instruction::PrbPos(p) | Instruction::PrbNeg(p) if needs_gadget(p));
    if count(s, biased) == 0 {
        return Ok(s.clone());
    }
    let m = s.prefix().len();
    let loops_in = |i: &Instruction| match i {
        Instruction::PrbPos(p) | Instruction::PrbNeg(p) if needs_gadget(p) => {
            let q = p.effective();
            !q.is_zero() && !q.is_one() && binary_expansion(&q).1.is_some()
        }
        _ => false,
    };
    let periodize = s.instructions().enumerate().any(|(p, i)| (p < m || s.is_finite()) && loops_in(i));
    let blocks = blocks_of(s, periodize, |instr, p| {
        let (q, on_true, on_false) = match instr {
            Instruction::Prb(q) if needs_gadget(q) => {
                return Ok(vec![Item::Step { instr: Instruction::Prb(Prob::Default), next: Dest::at(p + 1) }]);
            }
            Instruction::PrbPos(q) if needs_gadget(q) => (q.effective(), Dest::at(p + 1), Dest::at(p + 2)),
            Instruction::PrbNeg(q) if needs_gadget(q) => (q.effective(), Dest::at(p + 2), Dest::at(p + 1)),
            _ => return Ok(vec![lower_at(instr, p)?]),
        };
        if q.is_zero() {
            return Ok(vec![Item::Goto(on_false)]);
        }
        if q.is_one() {
            return Ok(vec![Item::Goto(on_true)]);
        }
        if q == Rational::half() {
            let fair = match instr {
                Instruction::PrbPos(_) => Instruction::PrbPos(Prob::Default),
                _ => Instruction::PrbNeg(Prob::Default),
            };
            return Ok(vec![lower_at(&fair, p)?]);
        }
        let (bits, cycle) = binary_expansion(&q);
        let last = bits.len() - 1;
        Ok(bits
            .iter()
            .enumerate()
            .map(|(i, &bit)| Item::Branch {
                instr: Instruction::PrbPos(Prob::Default),
                next: if bit { on_true.clone() } else { on_false.clone() },
                skip: match (i == last, cycle) {
                    (false, _) => Dest::Orig { pos: p, sub: i + 1 },
                    (true, None) => on_false.clone(),
                    (true, Some(start)) => Dest::NextCopy { sub: start },
                },
            })
            .collect())
    })?;
    assemble(&blocks)
}

/// Rewrites probabilistic basic instructions to calls of the random services;
/// the probability is rendered as its clamped value `n/d`.
pub fn to_service_calls(s: &InstructionSequence, style: ServiceStyle) -> Result<InstructionSequence, Error> {
    require(s, Instruction::is_probabilistic_jump, "probabilistic jumps must be eliminated first")?;
    let call = |p: &Prob| {
        let q = p.effective();
        match style {
            ServiceStyle::PerQ => BasicAction::random_per_q(&q),
            ServiceStyle::Single => BasicAction::random_single(&q),
        }
    };
    let map = |i: &Instruction| match i {
        Instruction::Prb(p) => Instruction::Basic(call(p)),
        Instruction::PrbPos(p) => Instruction::PosTest(call(p)),
        Instruction::PrbNeg(p) => Instruction::NegTest(call(p)),
        other => other.clone(),
    };
    InstructionSequence::new(s.prefix().iter().map(map).collect(), s.period().iter().map(map).collect())
}

fn is_prb(i: &Instruction) -> bool {
    matches!(i, Instruction::Prb(_) | Instruction::PrbPos(_) | Instruction::PrbNeg(_))
}

/// Runs the selected passes in pipeline order. The term is always brought
/// into canonical form before the sequence-level passes, whether or not
/// `normalize` is listed (it is then just not reported).
pub fn project_full(t: &Term, opts: &ProjectionOptions) -> Result<(InstructionSequence, Vec<PassReport>), Error> {
    let mut reports = Vec::new();
    let selected = |p: Pass| opts.passes.contains(&p);
    let mut term = t.clone();
    if selected(Pass::Desugar) {
        let before = term_size(&term);
        let gadgets = count_choices(&term);
        term = desugar_prchoice(&term)?;
        reports.push(report(Pass::Desugar, before, term_size(&term), gadgets));
    }
    if selected(Pass::Units) {
        let before = term_size(&term);
        let gadgets = count_units(&term);
        term = eliminate_units(&term)?;
        reports.push(report(Pass::Units, before, term_size(&term), gadgets));
    }
    let before = term_size(&term);
    let mut seq = normalize(&term)?;
    if selected(Pass::Normalize) {
        reports.push(report(Pass::Normalize, before, seq.len(), 0));
    }
    type SeqPass = fn(&InstructionSequence) -> Result<InstructionSequence, Error>;
    let stages: [(Pass, SeqPass, fn(&Instruction) -> bool); 3] = [
        (Pass::JumpsUnbounded, eliminate_unbounded_jumps, |i| matches!(i, Instruction::JumpGU(..))),
        (Pass::JumpsBounded, eliminate_bounded_jumps, |i| matches!(i, Instruction::JumpH(_) | Instruction::JumpG(..))),
        (Pass::FairCoin, realize_prb_fair, |i| {
            matches!(i, Instruction::Prb(p) | Instruction::PrbPos(p) | Instruction::PrbNeg(p) if !matches!(p, Prob::Default))
        }),
    ];
    for (pass, run, gadget) in stages {
        if selected(pass) {
            let gadgets = count(&seq, gadget);
            let out = run(&seq)?;
            reports.push(report(pass, seq.len(), out.len(), gadgets));
            seq = out;
        }
    }
    if selected(Pass::Services) {
        let gadgets = count(&seq, is_prb);
        let out = to_service_calls(&seq, opts.service_style)?;
        reports.push(report(Pass::Services, seq.len(), out.len(), gadgets));
        seq = out;
    }
    Ok((seq, reports))
}

fn report(pass: Pass, input_size: usize, output_size: usize, gadgets: usize) -> PassReport {
    PassReport { name: pass.name().to_string(), input_size, output_size, gadgets }
}

/// Replaces every plain `prb`/`prb(q)` by `#1`.
pub fn replace_prb_plain(s: &InstructionSequence) -> InstructionSequence {
    let map = |i: &Instruction| match i {
        Instruction::Prb(_) => Instruction::Jump(1),
        other => other.clone(),
    };
    InstructionSequence::new(s.prefix().iter().map(map).collect(), s.period().iter().map(map).collect())
        .expect("same shape as a valid sequence")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn seq(text: &str) -> InstructionSequence {
        normalize(&parse(text).unwrap()).unwrap()
    }

    #[test]
    fn pass_names_round_trip() {
        for p in Pass::ALL {
            assert_eq!(p.name().parse::<Pass>().unwrap(), p);
        }
        assert!("inline".parse::<Pass>().is_err());
        assert!(ProjectionOptions::new(ServiceStyle::PerQ, vec![Pass::Services, Pass::Units]).is_err());
        assert!(ProjectionOptions::new(ServiceStyle::PerQ, vec![Pass::Units, Pass::Units]).is_err());
    }

    #[test]
    fn expansions() {
        assert_eq!(binary_expansion(&Rational::new(1, 2)), (vec![true], None));
        assert_eq!(binary_expansion(&Rational::new(3, 8)), (vec![false, true, true], None));
        assert_eq!(binary_expansion(&Rational::new(2, 3)), (vec![true, false], Some(0)));
        assert_eq!(binary_expansion(&Rational::new(1, 6)), (vec![false, false, true], Some(1)));
    }

    #[test]
    fn service_calls() {
        let s = seq("+prb(2/3);a;b");
        assert_eq!(to_service_calls(&s, ServiceStyle::PerQ).unwrap().to_string(), "+random(2/3).get;a;b");
        assert_eq!(to_service_calls(&s, ServiceStyle::Single).unwrap().to_string(), "+random.get(2/3);a;b");
        assert_eq!(to_service_calls(&seq("prb;-prb(7/2)"), ServiceStyle::PerQ).unwrap().to_string(), "random(1/2).get;-random(1/1).get");
        assert!(to_service_calls(&seq("#H{2};a"), ServiceStyle::PerQ).is_err());
    }

    #[test]
    fn fair_coin_gadgets() {
        assert_eq!(realize_prb_fair(&seq("+prb(1/2);a;b")).unwrap().to_string(), "+prb;a;b");
        assert_eq!(realize_prb_fair(&seq("+prb(1);a;b")).unwrap().to_string(), "#1;a;b");
        assert_eq!(realize_prb_fair(&seq("+prb(0);a;b")).unwrap().to_string(), "#2;a;b");
        // 3/4 = 0.11 in binary: either flip coming up true answers true.
        assert_eq!(realize_prb_fair(&seq("+prb(3/4);a;b")).unwrap().to_string(), "+prb;#3;#1;+prb;a;b");
        assert!(realize_prb_fair(&seq("#H{2};a;b")).is_err());
    }

    #[test]
    fn bounded_jump_cascades() {
        assert_eq!(eliminate_bounded_jumps(&seq("#H{1};a;!")).unwrap().to_string(), "#1;a;!");
        assert_eq!(eliminate_bounded_jumps(&seq("#H{2};a;!;b;!")).unwrap().to_string(), "+prb(1/2);a;!;b;!");
        assert_eq!(eliminate_bounded_jumps(&seq("#G{1/2}{0};a")).unwrap().to_string(), "#0;a");
    }

    #[test]
    fn unbounded_jump_ladder() {
        let out = eliminate_unbounded_jumps(&seq("+a;#GU{}{2};(+b;!;c)*")).unwrap();
        assert!(!out.instructions().any(|i| matches!(i, Instruction::JumpGU(..))));
        assert!(eliminate_unbounded_jumps(&seq("#GU{}{0};a")).is_err());
        assert_eq!(eliminate_unbounded_jumps(&seq("#GU{0}{2};a")).unwrap().to_string(), "#0;a");
    }

    #[test]
    fn reports() {
        let (out, reports) = project_full(&parse("a;!").unwrap(), &ProjectionOptions::default()).unwrap();
        assert_eq!(out.to_string(), "a;!");
        assert!(reports.iter().all(|r| r.input_size == 2 && r.output_size == 2 && r.gadgets == 0));
        assert_eq!(reports[0].to_string(), "desugar: in=2 out=2 gadgets=0");
        let (out, _) = project_full(&parse("{a}+_(1/3){b}").unwrap(), &ProjectionOptions::default()).unwrap();
        assert_eq!(out.to_string(), "+random(1/3).get;#2;#3;a;#2;b");
    }
}
