#![allow(dead_code)]

use probpga::semantics::{Environment, ReplyModel};
use probpga::syntax::{normalize, parse};
use probpga::{BasicAction, Instruction, InstructionSequence, Prob, Rational, Term};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PROBS: [(i64, i64); 5] = [(0, 1), (1, 3), (1, 2), (2, 3), (1, 1)];

/// Which instruction kinds a generated program may contain.
#[derive(Clone, Copy, Debug)]
pub struct Kinds {
    pub prb: bool,
    pub bounded: bool,
    pub unbounded: bool,
}

impl Kinds {
    pub const ALL: Kinds = Kinds { prb: true, bounded: true, unbounded: true };
    pub const NO_UNBOUNDED: Kinds = Kinds { prb: true, bounded: true, unbounded: false };
    pub const NO_JUMPS: Kinds = Kinds { prb: true, bounded: false, unbounded: false };
    pub const DETERMINISTIC: Kinds = Kinds { prb: false, bounded: false, unbounded: false };
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn prob(r: &mut impl Rng) -> Prob {
    if r.random_bool(0.2) {
        Prob::Default
    } else {
        let (n, d) = PROBS[r.random_range(0..PROBS.len())];
        Prob::Value(Rational::new(n, d))
    }
}

fn action(r: &mut impl Rng) -> BasicAction {
    BasicAction::new(["a", "b", "c"][r.random_range(0..3)]).unwrap()
}

pub fn instruction(r: &mut impl Rng, kinds: Kinds) -> Instruction {
    loop {
        let i = match r.random_range(0..12) {
            0..=1 => Instruction::Basic(action(r)),
            2 => Instruction::PosTest(action(r)),
            3 => Instruction::NegTest(action(r)),
            4..=5 => Instruction::Jump(r.random_range(0..5)),
            6 => Instruction::Halt,
            7 if kinds.prb => Instruction::Prb(prob(r)),
            8 if kinds.prb => {
                if r.random_bool(0.5) {
                    Instruction::PrbPos(prob(r))
                } else {
                    Instruction::PrbNeg(prob(r))
                }
            }
            9 if kinds.bounded => Instruction::JumpH(r.random_range(0..4)),
            10 if kinds.bounded => Instruction::JumpG(prob(r), r.random_range(0..4)),
            11 if kinds.unbounded => Instruction::JumpGU(prob(r), r.random_range(1..4)),
            _ => continue,
        };
        return i;
    }
}

/// A canonical program of at most 12 instructions with period at most 6.
pub fn program(r: &mut impl Rng, kinds: Kinds) -> InstructionSequence {
    let period = if r.random_bool(0.6) { r.random_range(1..=6) } else { 0 };
    let prefix = r.random_range(if period == 0 { 1 } else { 0 }..=12 - period);
    let prefix = (0..prefix).map(|_| instruction(r, kinds)).collect();
    let period = (0..period).map(|_| instruction(r, kinds)).collect();
    let t = InstructionSequence::new(prefix, period).unwrap().to_term();
    normalize(&t).unwrap()
}

/// A finite unit-free list of basic instructions, tests and jumps.
fn plain_list(r: &mut impl Rng, max: usize) -> Vec<Instruction> {
    let n = r.random_range(1..=max);
    (0..n)
        .map(|_| match r.random_range(0..5) {
            0 | 1 => Instruction::Basic(action(r)),
            2 => Instruction::PosTest(action(r)),
            3 => Instruction::Jump(r.random_range(1..3)),
            _ => Instruction::Halt,
        })
        .collect()
}

/// No instruction of the list can skip beyond the position just past its end.
fn closed(list: &[Instruction]) -> bool {
    list.iter().enumerate().all(|(i, instr)| {
        let reach = match instr {
            Instruction::PosTest(_) | Instruction::NegTest(_) => 2,
            Instruction::Jump(l) => *l,
            _ => 1,
        };
        i + reach <= list.len()
    })
}

/// A program text with probabilistic choices whose operands are short
/// deterministic lists that only leave by running off their end; choices may
/// nest.
pub fn choice_program(r: &mut impl Rng) -> String {
    fn operand(r: &mut impl Rng, depth: usize) -> String {
        if depth > 0 && r.random_bool(0.3) {
            return choice(r, depth - 1);
        }
        let list = loop {
            let list = plain_list(r, 3);
            if closed(&list) {
                break list;
            }
        };
        let items: Vec<String> = list.iter().map(|i| i.to_string()).collect();
        items.join(";")
    }
    fn choice(r: &mut impl Rng, depth: usize) -> String {
        let (n, d) = PROBS[r.random_range(0..PROBS.len())];
        format!("{{{}}}+_({n}/{d}){{{}}}", operand(r, depth), operand(r, depth))
    }
    let mut parts = Vec::new();
    for _ in 0..r.random_range(1..4) {
        parts.push(if r.random_bool(0.5) { choice(r, 1) } else { operand(r, 0) });
    }
    let body = parts.join(";");
    if r.random_bool(0.3) {
        format!("({body})*")
    } else {
        format!("{body};!")
    }
}

/// A program text with (possibly nested) unit instructions.
pub fn unit_program(r: &mut impl Rng) -> String {
    fn unit(r: &mut impl Rng, depth: usize) -> String {
        let mut items: Vec<String> = plain_list(r, 3).iter().map(|i| i.to_string()).collect();
        if depth > 0 && r.random_bool(0.4) {
            let at = r.random_range(0..=items.len());
            items.insert(at, unit(r, depth - 1));
        }
        format!("[{}]", items.join(";"))
    }
    let mut items: Vec<String> = Vec::new();
    for _ in 0..r.random_range(2..6) {
        items.push(if r.random_bool(0.5) {
            unit(r, 2)
        } else {
            match r.random_range(0..4) {
                0 => format!("#{}", r.random_range(1..4)),
                1 => "!".to_string(),
                2 => format!("+prb({}/3)", r.random_range(0..4)),
                _ => action(r).to_string(),
            }
        });
    }
    let body = items.join(";");
    if r.random_bool(0.4) {
        let split = r.random_range(0..items.len());
        let (pre, per) = items.split_at(split);
        if pre.is_empty() {
            format!("({})*", per.join(";"))
        } else {
            format!("{};({})*", pre.join(";"), per.join(";"))
        }
    } else {
        body
    }
}

/// A random unit-free term built from concatenation and repetition.
pub fn term(r: &mut impl Rng, depth: usize, kinds: Kinds) -> Term {
    if depth == 0 || r.random_bool(0.3) {
        let items: Vec<Term> = (0..r.random_range(1..4)).map(|_| Term::instr(instruction(r, kinds))).collect();
        return Term::seq(items).unwrap();
    }
    match r.random_range(0..3) {
        0 | 1 => Term::concat(term(r, depth - 1, kinds), term(r, depth - 1, kinds)),
        _ => Term::rep(term(r, depth - 1, kinds)),
    }
}

/// Replies used throughout the soundness checks: `a` is a biased coin, `b`
/// always fails, everything else succeeds.
pub fn environment() -> Environment {
    Environment::default()
        .with_override(BasicAction::new("a").unwrap(), ReplyModel::bernoulli(Rational::new(1, 3)).unwrap())
        .with_override(BasicAction::new("b").unwrap(), ReplyModel::AlwaysFalse)
}

pub fn seq(text: &str) -> InstructionSequence {
    normalize(&parse(text).unwrap()).unwrap()
}

pub fn data(name: &str) -> String {
    let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}
