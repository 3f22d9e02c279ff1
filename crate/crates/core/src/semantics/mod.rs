//! Reactive probabilistic transition systems and their exact analysis.
//!
//! A canonical sequence becomes one state per slot (prefix, then one copy of
//! the period) plus a shared inaction state. Basic instructions are action
//! nodes that branch on the reply; probabilistic instructions and jumps are
//! chance nodes with exact rational masses. An [`Environment`] resolves the
//! replies, which leaves a Markov chain with labelled transitions.
//!
//! Unlabelled chance nodes are internal: traces and bisimilarity only look at
//! the labels, so those nodes are folded into the distributions of the visible
//! nodes around them before comparing (see [`closure`]).

use std::collections::BTreeMap;
use std::fmt;

use num_integer::gcd;

use crate::meadow::Rational;
use crate::syntax::{BasicAction, Instruction, InstructionSequence};
use crate::Error;

mod analysis;
mod bisim;
mod closure;
mod linear;
mod term;

pub use analysis::{
    absorption, equivalent_under, expected_coin_flips, expected_steps, trace_distribution, Absorption, Expectation,
    Marker, Trace, TraceDistribution,
};
pub use bisim::{bisimilar, Bisimulation, Evidence, MismatchKind};
pub use term::build_pts_term;

pub type StateId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Action { label: BasicAction, on_true: StateId, on_false: StateId },
    /// Masses are positive and sum to one. A label marks a resolved action.
    Chance { label: Option<BasicAction>, dist: Vec<(StateId, Rational)> },
    Terminated,
    Inaction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReactivePTS {
    nodes: Vec<Node>,
    /// Instruction each state was built from; `None` for synthetic states.
    source: Vec<Option<Instruction>>,
    initial: StateId,
}

impl ReactivePTS {
    pub(crate) fn from_parts(nodes: Vec<Node>, source: Vec<Option<Instruction>>, initial: StateId) -> Self {
        debug_assert_eq!(nodes.len(), source.len());
        ReactivePTS { nodes, source, initial }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, s: StateId) -> &Node {
        &self.nodes[s]
    }

    pub fn source(&self, s: StateId) -> Option<&Instruction> {
        self.source[s].as_ref()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// True when no action node still depends on its reply.
    pub fn is_resolved(&self) -> bool {
        self.nodes.iter().all(|n| !matches!(n, Node::Action { on_true, on_false, .. } if on_true != on_false))
    }
}

/// Accumulates masses per state, dropping zeros, in state order.
pub(crate) fn merge(entries: impl IntoIterator<Item = (StateId, Rational)>) -> Vec<(StateId, Rational)> {
    let mut acc: BTreeMap<StateId, Rational> = BTreeMap::new();
    for (s, m) in entries {
        if !m.is_zero() {
            let e = acc.entry(s).or_insert_with(Rational::zero);
            *e = &*e + &m;
        }
    }
    acc.into_iter().filter(|(_, m)| !m.is_zero()).collect()
}

/// Distribution of `#GU{q}{l}` at slot `p` over target slots, with
/// `ina` standing for inaction. `q` is the clamped probability.
pub(crate) fn unbounded_jump_masses(s: &InstructionSequence, p: usize, q: &Rational, l: usize, ina: StateId) -> Vec<(StateId, Rational)> {
    if l == 0 || q.is_zero() {
        return vec![(ina, Rational::one())];
    }
    let m = s.prefix().len();
    let n = s.period().len();
    let miss = Rational::one() - q.clone();
    let mut out = Vec::new();
    let mut j = 1usize;
    // Landing sites in the prefix, one by one.
    while p + l * j < m {
        out.push((p + l * j, q * &miss.pow(j as u32 - 1)));
        j += 1;
    }
    if n == 0 {
        out.push((ina, miss.pow(j as u32 - 1)));
        return merge(out);
    }
    // From here on the landing slot repeats with period t; sum each residue
    // class as a geometric series with ratio miss^t.
    let t = n / gcd(l, n);
    let denom = (Rational::one() - miss.pow(t as u32)).minv();
    for j in j..j + t {
        let slot = s.wrap(p + l * j).expect("periodic");
        out.push((slot, &(q * &miss.pow(j as u32 - 1)) * &denom));
    }
    merge(out)
}

/// Builds the reactive system of a canonical, unit-free sequence.
pub fn build_pts(s: &InstructionSequence) -> ReactivePTS {
    let len = s.len();
    let ina = len;
    let succ = |p: usize, k: usize| s.wrap(p + k).unwrap_or(ina);
    let one = Rational::one;
    let mut nodes = Vec::with_capacity(len + 1);
    for (p, instr) in s.instructions().enumerate() {
        let chance = |dist: Vec<(StateId, Rational)>| Node::Chance { label: None, dist: merge(dist) };
        let node = match instr {
            Instruction::Basic(a) => Node::Action { label: a.clone(), on_true: succ(p, 1), on_false: succ(p, 1) },
            Instruction::PosTest(a) => Node::Action { label: a.clone(), on_true: succ(p, 1), on_false: succ(p, 2) },
            Instruction::NegTest(a) => Node::Action { label: a.clone(), on_true: succ(p, 2), on_false: succ(p, 1) },
            Instruction::Jump(0) => chance(vec![(ina, one())]),
            Instruction::Jump(l) => chance(vec![(succ(p, *l), one())]),
            Instruction::Halt => Node::Terminated,
            Instruction::Prb(_) => chance(vec![(succ(p, 1), one())]),
            Instruction::PrbPos(q) | Instruction::PrbNeg(q) => {
                let q = q.effective();
                let (on_true, on_false) = match instr {
                    Instruction::PrbPos(_) => (succ(p, 1), succ(p, 2)),
                    _ => (succ(p, 2), succ(p, 1)),
                };
                chance(vec![(on_true, q.clone()), (on_false, Rational::one() - q)])
            }
            Instruction::JumpH(0) => chance(vec![(ina, one())]),
            Instruction::JumpH(k) => {
                let mass = Rational::new(1, *k as i64);
                chance((1..=*k).map(|j| (succ(p, j), mass.clone())).collect())
            }
            Instruction::JumpG(q, k) => {
                let q = q.effective();
                let miss = Rational::one() - q.clone();
                let mut dist: Vec<_> = (1..=*k).map(|j| (succ(p, j), &q * &miss.pow(j as u32 - 1))).collect();
                dist.push((ina, miss.pow(*k as u32)));
                chance(dist)
            }
            Instruction::JumpGU(q, l) => chance(unbounded_jump_masses(s, p, &q.effective(), *l, ina)),
            Instruction::Unit(_) => unreachable!("canonical sequences are unit-free"),
        };
        nodes.push(node);
    }
    nodes.push(Node::Inaction);
    let mut source: Vec<Option<Instruction>> = s.instructions().cloned().map(Some).collect();
    source.push(None);
    ReactivePTS::from_parts(nodes, source, 0)
}

/// How the environment answers one basic instruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReplyModel {
    AlwaysTrue,
    AlwaysFalse,
    Bernoulli(Rational),
}

impl ReplyModel {
    pub fn bernoulli(q: Rational) -> Result<Self, Error> {
        if q < Rational::zero() || q > Rational::one() {
            return Err(Error::Precondition(format!("reply probability {q} is not in [0,1]")));
        }
        Ok(ReplyModel::Bernoulli(q))
    }

    /// Probability of the reply true.
    pub fn probability(&self) -> Rational {
        match self {
            ReplyModel::AlwaysTrue => Rational::one(),
            ReplyModel::AlwaysFalse => Rational::zero(),
            ReplyModel::Bernoulli(q) => q.clone(),
        }
    }

    fn parse(text: &str) -> Result<Self, String> {
        let mut words = text.split_whitespace();
        let model = match words.next() {
            Some("true") => ReplyModel::AlwaysTrue,
            Some("false") => ReplyModel::AlwaysFalse,
            Some("bernoulli") => {
                let q = words.next().ok_or("bernoulli needs a probability")?;
                let q = crate::syntax::parse_rational(q).map_err(|e| e.to_string())?;
                ReplyModel::bernoulli(q).map_err(|e| e.to_string())?
            }
            Some(other) => return Err(format!("unknown reply model `{other}`")),
            None => return Err("missing reply model".into()),
        };
        match words.next() {
            Some(extra) => Err(format!("unexpected `{extra}`")),
            None => Ok(model),
        }
    }
}

impl fmt::Display for ReplyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplyModel::AlwaysTrue => f.write_str("true"),
            ReplyModel::AlwaysFalse => f.write_str("false"),
            ReplyModel::Bernoulli(q) => write!(f, "bernoulli {}", q.to_fraction_string()),
        }
    }
}

/// Memoryless replies for basic instructions.
///
/// Calls of the random services (`random(q).get`, `random.get(q)`) answer
/// true with probability `q` unless overridden; by default they are also
/// hidden from traces, so that a projected program can be compared with its
/// probabilistic source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Environment {
    pub default: ReplyModel,
    pub overrides: BTreeMap<BasicAction, ReplyModel>,
    pub hide_random_services: bool,
}

impl Default for Environment {
    fn default() -> Self {
        Environment::new(ReplyModel::AlwaysTrue)
    }
}

impl Environment {
    pub fn new(default: ReplyModel) -> Self {
        Environment { default, overrides: BTreeMap::new(), hide_random_services: true }
    }

    pub fn with_override(mut self, action: BasicAction, model: ReplyModel) -> Self {
        self.overrides.insert(action, model);
        self
    }

    pub fn resolve(&self, action: &BasicAction) -> ReplyModel {
        if let Some(m) = self.overrides.get(action) {
            return m.clone();
        }
        if let Some(q) = action.random_service_probability() {
            return ReplyModel::Bernoulli(q);
        }
        self.default.clone()
    }

    fn hides(&self, action: &BasicAction) -> bool {
        self.hide_random_services && action.random_service_probability().is_some()
    }

    /// Reads `default = true|false|bernoulli N/D` and `focus.method = ...` lines;
    /// `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut env = Environment::default();
        for (i, line) in text.lines().enumerate() {
            let err = |message: String| Error::Config { line: i + 1, message };
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected `name = model`".into()))?;
            let model = ReplyModel::parse(value).map_err(err)?;
            match key.trim() {
                "default" => env.default = model,
                name => {
                    let action = parse_action(name).map_err(|e| err(e.to_string()))?;
                    env.overrides.insert(action, model);
                }
            }
        }
        Ok(env)
    }
}

/// `f.m` or `m` with the same name rules as the program syntax.
pub fn parse_action(name: &str) -> Result<BasicAction, Error> {
    // Split at the first dot outside an argument, so `random(1/2).get` works.
    let mut depth = 0;
    for (i, c) in name.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            '.' if depth == 0 => return BasicAction::with_focus(&name[..i], &name[i + 1..]),
            _ => {}
        }
    }
    BasicAction::new(name)
}

/// Resolves every action node with the environment. Resolved nodes keep their
/// label, except hidden random-service calls.
pub fn apply_environment(p: &ReactivePTS, env: &Environment) -> ReactivePTS {
    let nodes = p
        .nodes
        .iter()
        .map(|node| match node {
            Node::Action { label, on_true, on_false } => {
                let q = env.resolve(label).probability();
                let dist = merge([(*on_true, q.clone()), (*on_false, Rational::one() - q)]);
                let label = (!env.hides(label)).then(|| label.clone());
                Node::Chance { label, dist }
            }
            other => other.clone(),
        })
        .collect();
    ReactivePTS::from_parts(nodes, p.source.clone(), p.initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{normalize, parse};

    fn pts(text: &str) -> ReactivePTS {
        build_pts(&normalize(&parse(text).unwrap()).unwrap())
    }

    fn chance(p: &ReactivePTS, s: StateId) -> Vec<(StateId, Rational)> {
        match p.node(s) {
            Node::Chance { dist, .. } => dist.clone(),
            other => panic!("not a chance node: {other:?}"),
        }
    }

    #[test]
    fn every_chance_node_sums_to_one() {
        for text in ["-prb(2/3);#3;a;!;b;!", "#G{1/3}{3};a;b;c", "#GU{1/3}{2};a;(b;c;d)*", "#H{4};a;b", "#0"] {
            let p = pts(text);
            for node in p.nodes() {
                if let Node::Chance { dist, .. } = node {
                    let total: Rational = dist.iter().map(|(_, m)| m.clone()).sum();
                    assert_eq!(total, Rational::one(), "{text}");
                    assert!(dist.iter().all(|(_, m)| *m > 0 && *m <= 1));
                }
            }
        }
    }

    #[test]
    fn biased_test_masses() {
        let p = pts("-prb(2/3);#3;a;!;b;!");
        assert_eq!(chance(&p, 0), vec![(1, Rational::new(1, 3)), (2, Rational::new(2, 3))]);
    }

    #[test]
    fn bounded_geometric_residue_is_inaction() {
        let p = pts("#G{1/2}{2};a;!;b;!");
        let ina = p.len() - 1;
        assert_eq!(chance(&p, 0), vec![(1, Rational::new(1, 2)), (2, Rational::new(1, 4)), (ina, Rational::new(1, 4))]);
    }

    #[test]
    fn unbounded_geometric_in_finite_program() {
        // Landings at 2 and 4; everything further is past the end.
        let p = pts("#GU{}{2};a;b;c;d");
        let ina = p.len() - 1;
        assert_eq!(chance(&p, 0), vec![(2, Rational::new(1, 2)), (4, Rational::new(1, 4)), (ina, Rational::new(1, 4))]);
    }

    #[test]
    fn environment_file() {
        let env = Environment::parse("# replies\ndefault = false\nf.m = bernoulli 1/3\nrandom(1/2).get = true\n").unwrap();
        assert_eq!(env.default, ReplyModel::AlwaysFalse);
        let fm = BasicAction::with_focus("f", "m").unwrap();
        assert_eq!(env.resolve(&fm), ReplyModel::Bernoulli(Rational::new(1, 3)));
        assert_eq!(env.resolve(&BasicAction::random_per_q(&Rational::half())), ReplyModel::AlwaysTrue);
        assert_eq!(env.resolve(&BasicAction::random_single(&Rational::new(1, 5))), ReplyModel::Bernoulli(Rational::new(1, 5)));
        assert!(matches!(Environment::parse("default = bernoulli 3/2"), Err(Error::Config { line: 1, .. })));
        assert!(matches!(Environment::parse("\nx = maybe"), Err(Error::Config { line: 2, .. })));
    }

    #[test]
    fn environment_resolves_actions() {
        let p = apply_environment(&pts("+a;b;c"), &Environment::new(ReplyModel::AlwaysFalse));
        assert!(p.is_resolved());
        assert_eq!(p.node(0), &Node::Chance { label: Some(BasicAction::new("a").unwrap()), dist: vec![(2, Rational::one())] });
    }
}
