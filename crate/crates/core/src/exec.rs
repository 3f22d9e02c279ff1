//! Seeded step-by-step execution.
//!
//! Probabilistic instructions draw from a SplitMix64 stream directly; calls to
//! the random services draw from the same stream through the registry, one draw
//! per call, so a program and its service-call projection consume randomness
//! identically. Random service calls are internal and do not appear in traces.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::meadow::Rational;
use crate::syntax::{BasicAction, Instruction, InstructionSequence, Prob};
use crate::Error;

/// SplitMix64 generator state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngState(pub u64);

impl RngState {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// True with probability `q ∈ [0,1]` up to 2^-64: the draw is compared
    /// with the exact threshold `floor(q · 2^64)`.
    pub fn bernoulli(&mut self, q: &Rational) -> bool {
        u128::from(self.next_u64()) < threshold(q)
    }
}

pub fn rng_next(r: RngState) -> (RngState, u64) {
    let mut r = r;
    let x = r.next_u64();
    (r, x)
}

pub fn bernoulli(r: RngState, q: &Rational) -> (RngState, bool) {
    let mut r = r;
    let b = r.bernoulli(q);
    (r, b)
}

/// `floor(mkprob(q) · 2^64)`.
pub fn threshold(q: &Rational) -> u128 {
    let q = q.mkprob();
    let scaled: BigInt = (q.numer() << 64u32) / q.denom();
    scaled.to_u128().expect("at most 2^64")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Exhausted {
    Inaction,
    Repeat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Service {
    /// `random(q).get`.
    RandomPerQ(Rational),
    /// `random.get(q)`.
    RandomSingle,
    Constant(bool),
    Scripted { replies: Vec<bool>, exhausted: Exhausted },
}

/// Services by focus (or by method name for focus-less instructions).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ServiceRegistry {
    services: BTreeMap<String, Service>,
}

impl ServiceRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, focus: &str, service: Service) -> &mut Self {
        self.services.insert(focus.to_string(), service);
        self
    }

    pub fn get(&self, focus: &str) -> Option<&Service> {
        self.services.get(focus)
    }

    /// Registers the random services that instructions of `s` call.
    pub fn with_random_services(mut self, s: &InstructionSequence) -> Self {
        for i in s.instructions() {
            let (Instruction::Basic(a) | Instruction::PosTest(a) | Instruction::NegTest(a)) = i else { continue };
            let Some(q) = a.random_service_probability() else { continue };
            let focus = a.service_key().to_string();
            let service = if a.method() == "get" { Service::RandomPerQ(q) } else { Service::RandomSingle };
            self.services.entry(focus).or_insert(service);
        }
        self
    }

    /// Reads lines `focus = constant true|false`, `focus = random N/D`,
    /// `random = single`, `focus = script T,F,... [repeat|inaction]`; `#`
    /// starts a comment.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut reg = ServiceRegistry::new();
        for (i, line) in text.lines().enumerate() {
            let err = |message: String| Error::Config { line: i + 1, message };
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (focus, spec) = line.split_once('=').ok_or_else(|| err("expected `focus = service`".into()))?;
            let focus = focus.trim();
            if focus.is_empty() {
                return Err(err("missing focus".into()));
            }
            let words: Vec<&str> = spec.split_whitespace().collect();
            let service = match words.as_slice() {
                ["constant", "true"] => Service::Constant(true),
                ["constant", "false"] => Service::Constant(false),
                ["single"] => Service::RandomSingle,
                ["random", q] => {
                    let q = crate::syntax::parse_rational(q).map_err(|e| err(e.to_string()))?;
                    if q < Rational::zero() || q > Rational::one() {
                        return Err(err(format!("probability {q} is not in [0,1]")));
                    }
                    Service::RandomPerQ(q)
                }
                ["script", replies, rest @ ..] => {
                    let replies = replies
                        .split(',')
                        .map(|r| match r.trim() {
                            "T" | "t" | "true" => Ok(true),
                            "F" | "f" | "false" => Ok(false),
                            other => Err(err(format!("bad reply `{other}`"))),
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    let exhausted = match rest {
                        [] | ["inaction"] => Exhausted::Inaction,
                        ["repeat"] => Exhausted::Repeat,
                        _ => return Err(err(format!("bad exhaustion policy `{}`", rest.join(" ")))),
                    };
                    Service::Scripted { replies, exhausted }
                }
                _ => return Err(err(format!("unknown service `{}`", spec.trim()))),
            };
            reg.services.insert(focus.to_string(), service);
        }
        Ok(reg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Terminated,
    Inaction,
    StepLimit,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Terminated => "!",
            Outcome::Inaction => "#0",
            Outcome::StepLimit => "...",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunResult {
    pub trace: Vec<(BasicAction, bool)>,
    pub outcome: Outcome,
    pub steps: usize,
    /// Why a run ended in inaction when a service could not answer.
    pub diagnostic: Option<String>,
}

struct Run<'a> {
    reg: &'a ServiceRegistry,
    rng: RngState,
    cursors: BTreeMap<String, usize>,
}

impl Run<'_> {
    fn draw(&mut self, q: &Prob) -> bool {
        self.rng.bernoulli(&q.effective())
    }

    /// Reply of the service, or a diagnostic when it cannot process `a`.
    fn call(&mut self, a: &BasicAction) -> Result<bool, String> {
        let key = a.service_key();
        match self.reg.get(key) {
            None => Err(format!("no service registered for `{key}` (instruction `{a}`)")),
            Some(Service::Constant(b)) => Ok(*b),
            Some(Service::RandomPerQ(q)) if a.method() == "get" => Ok(self.rng.bernoulli(q)),
            Some(Service::RandomSingle) => match a.random_service_probability() {
                Some(q) if a.focus().is_some() => Ok(self.rng.bernoulli(&q)),
                _ => Err(format!("random service cannot process `{a}`")),
            },
            Some(Service::RandomPerQ(_)) => Err(format!("random service cannot process `{a}`")),
            Some(Service::Scripted { replies, exhausted }) => {
                let at = self.cursors.entry(key.to_string()).or_insert(0);
                let i = *at;
                *at += 1;
                match (replies.get(i), exhausted) {
                    (Some(r), _) => Ok(*r),
                    (None, Exhausted::Repeat) if !replies.is_empty() => Ok(replies[i % replies.len()]),
                    _ => Err(format!("script for `{key}` is exhausted")),
                }
            }
        }
    }
}

/// Executes `s` for at most `max_steps` instructions.
pub fn run(s: &InstructionSequence, reg: &ServiceRegistry, seed: u64, max_steps: usize) -> RunResult {
    let mut r = Run { reg, rng: RngState(seed), cursors: BTreeMap::new() };
    let mut trace = Vec::new();
    let mut slot = 0;
    let mut steps = 0;
    let finish = |trace, outcome, steps, diagnostic| RunResult { trace, outcome, steps, diagnostic };
    loop {
        if steps == max_steps {
            return finish(trace, Outcome::StepLimit, steps, None);
        }
        steps += 1;
        let instr = s.slot(slot);
        let skip = match instr {
            Instruction::Basic(a) | Instruction::PosTest(a) | Instruction::NegTest(a) => {
                let reply = match r.call(a) {
                    Ok(b) => b,
                    Err(d) => return finish(trace, Outcome::Inaction, steps, Some(d)),
                };
                if a.random_service_probability().is_none() {
                    trace.push((a.clone(), reply));
                }
                match instr {
                    Instruction::Basic(_) => Some(1),
                    Instruction::PosTest(_) => Some(if reply { 1 } else { 2 }),
                    _ => Some(if reply { 2 } else { 1 }),
                }
            }
            Instruction::Jump(0) => None,
            Instruction::Jump(l) => Some(*l),
            Instruction::Halt => return finish(trace, Outcome::Terminated, steps, None),
            Instruction::Prb(q) => {
                r.draw(q);
                Some(1)
            }
            Instruction::PrbPos(q) => Some(if r.draw(q) { 1 } else { 2 }),
            Instruction::PrbNeg(q) => Some(if r.draw(q) { 2 } else { 1 }),
            Instruction::JumpH(0) => None,
            Instruction::JumpH(k) => {
                // Same cascade as the elimination pass: 1/k, 1/(k-1), ..., 1/2.
                let k = *k;
                Some((1..k).find(|&j| r.rng.bernoulli(&Rational::new(1, (k - j + 1) as i64))).unwrap_or(k))
            }
            Instruction::JumpG(q, k) => (1..=*k).find(|_| r.draw(q)),
            Instruction::JumpGU(q, l) => {
                let p = q.effective();
                if *l == 0 || threshold(&p) == 0 {
                    None
                } else {
                    let mut j = 1;
                    loop {
                        if s.wrap(slot + l * j).is_none() {
                            break None;
                        }
                        if r.rng.bernoulli(&p) {
                            break Some(l * j);
                        }
                        j += 1;
                    }
                }
            }
            Instruction::Unit(_) => unreachable!("canonical sequences are unit-free"),
        };
        match skip.and_then(|k| s.wrap(slot + k)) {
            Some(next) => slot = next,
            None => return finish(trace, Outcome::Inaction, steps, None),
        }
    }
}

/// Run counts by visible trace (labels only) and outcome.
pub type Frequencies = BTreeMap<(Vec<BasicAction>, Outcome), u64>;

/// `n` runs with seeds `seed, seed+1, ...` (wrapping), executed in parallel;
/// the table does not depend on scheduling.
pub fn sample_many(s: &InstructionSequence, reg: &ServiceRegistry, seed: u64, n: u64, max_steps: usize) -> Frequencies {
    (0..n)
        .into_par_iter()
        .fold(Frequencies::new, |mut acc, i| {
            let r = run(s, reg, seed.wrapping_add(i), max_steps);
            let labels = r.trace.into_iter().map(|(a, _)| a).collect();
            *acc.entry((labels, r.outcome)).or_default() += 1;
            acc
        })
        .reduce(Frequencies::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        })
}
