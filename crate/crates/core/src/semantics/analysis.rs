use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::closure::{hitting, Closed, Vis};
use super::linear::{solve, Row};
use super::{apply_environment, build_pts, Environment, Node, ReactivePTS, StateId};
use crate::meadow::Rational;
use crate::syntax::{BasicAction, Instruction, InstructionSequence};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Absorption {
    pub terminated: Rational,
    pub inaction: Rational,
    pub divergence: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expectation {
    Finite(Rational),
    Infinite,
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expectation::Finite(x) => write!(f, "{} ({})", x.to_fraction_string(), x.to_decimal_string(6)),
            Expectation::Infinite => f.write_str("infinite"),
        }
    }
}

/// One-step distribution of a resolved node; `None` for terminal nodes.
fn markov_step(p: &ReactivePTS) -> Result<Vec<Option<Vec<(StateId, Rational)>>>, Error> {
    p.nodes()
        .iter()
        .map(|node| match node {
            Node::Chance { dist, .. } => Ok(Some(dist.clone())),
            Node::Action { on_true, on_false, .. } if on_true == on_false => Ok(Some(vec![(*on_true, Rational::one())])),
            Node::Action { label, .. } => {
                Err(Error::Precondition(format!("reply of `{label}` is not resolved; apply an environment first")))
            }
            Node::Terminated | Node::Inaction => Ok(None),
        })
        .collect()
}

/// Probabilities of eventually terminating, ending in inaction, or running
/// forever, by an exact linear solve over the chain.
pub fn absorption(p: &ReactivePTS) -> Result<Absorption, Error> {
    let step = markov_step(p)?;
    let hit = hitting(&step);
    let mut terminated = Rational::zero();
    let mut inaction = Rational::zero();
    for (s, m) in &hit[p.initial()] {
        match p.node(*s) {
            Node::Terminated => terminated = &terminated + m,
            _ => inaction = &inaction + m,
        }
    }
    let divergence = Rational::one() - terminated.clone() - inaction.clone();
    Ok(Absorption { terminated, inaction, divergence })
}

fn reachable(step: &[Option<Vec<(StateId, Rational)>>], from: StateId) -> BTreeSet<StateId> {
    let mut seen = BTreeSet::from([from]);
    let mut stack = vec![from];
    while let Some(s) = stack.pop() {
        for (t, _) in step[s].iter().flatten() {
            if seen.insert(*t) {
                stack.push(*t);
            }
        }
    }
    seen
}

/// Expected total cost until absorption, where entering state `s` costs `cost(s)`.
fn expected_cost(p: &ReactivePTS, cost: impl Fn(StateId) -> Rational) -> Result<Expectation, Error> {
    if !absorption(p)?.divergence.is_zero() {
        return Ok(Expectation::Infinite);
    }
    let step = markov_step(p)?;
    let states: Vec<StateId> = reachable(&step, p.initial()).into_iter().filter(|&s| step[s].is_some()).collect();
    if states.is_empty() {
        return Ok(Expectation::Finite(cost(p.initial())));
    }
    let index: BTreeMap<StateId, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut a = Vec::with_capacity(states.len());
    let mut b = Vec::with_capacity(states.len());
    for &s in &states {
        let mut row = Row::from([(index[&s], Rational::one())]);
        let mut c = cost(s);
        for (t, m) in step[s].as_ref().expect("transient") {
            match index.get(t) {
                Some(&j) => {
                    let e = row.entry(j).or_insert_with(Rational::zero);
                    *e = &*e - m;
                }
                None => c = &c + &(m * &cost(*t)),
            }
        }
        row.retain(|_, v| !v.is_zero());
        a.push(row);
        b.push(Row::from([(0, c)]));
    }
    let x = solve(a, b);
    Ok(Expectation::Finite(x[index[&p.initial()]].get(&0).cloned().unwrap_or_else(Rational::zero)))
}

/// Expected number of executed instructions, counting one per instruction
/// including jumps and the final `!`. Running off the end costs nothing.
pub fn expected_steps(p: &ReactivePTS) -> Result<Expectation, Error> {
    expected_cost(p, |s| if p.source(s).is_some() { Rational::one() } else { Rational::zero() })
}

/// Expected number of executed probabilistic basic instructions and random
/// service calls.
pub fn expected_coin_flips(p: &ReactivePTS) -> Result<Expectation, Error> {
    let is_flip = |i: &Instruction| match i {
        Instruction::Prb(_) | Instruction::PrbPos(_) | Instruction::PrbNeg(_) => true,
        Instruction::Basic(a) | Instruction::PosTest(a) | Instruction::NegTest(a) => a.random_service_probability().is_some(),
        _ => false,
    };
    expected_cost(p, |s| if p.source(s).is_some_and(is_flip) { Rational::one() } else { Rational::zero() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Marker {
    Terminated,
    Inaction,
    /// Runs forever without another visible action.
    Divergence,
    /// Cut off at the depth bound.
    Open,
}

impl fmt::Display for Marker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Marker::Terminated => "!",
            Marker::Inaction => "#0",
            Marker::Divergence => "(#1)*",
            Marker::Open => "...",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Trace {
    pub labels: Vec<BasicAction>,
    pub end: Marker,
}

impl fmt::Display for Trace {
    /// `a;b;!`: labels in order, then the end marker.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.labels {
            write!(f, "{l};")?;
        }
        write!(f, "{}", self.end)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TraceDistribution {
    entries: BTreeMap<Trace, Rational>,
}

impl TraceDistribution {
    pub fn entries(&self) -> &BTreeMap<Trace, Rational> {
        &self.entries
    }

    pub fn total(&self) -> Rational {
        self.entries.values().cloned().sum()
    }

    /// Mass of the trace rendered as `text` (for example `a;!`), zero if absent.
    pub fn mass(&self, text: &str) -> Rational {
        self.entries.iter().find(|(t, _)| t.to_string() == text).map(|(_, m)| m.clone()).unwrap_or_else(Rational::zero)
    }

    pub fn mass_where(&self, pred: impl Fn(&Trace) -> bool) -> Rational {
        self.entries.iter().filter(|(t, _)| pred(t)).map(|(_, m)| m.clone()).sum()
    }
}

impl fmt::Display for TraceDistribution {
    /// One line per trace: `a;! : 2/3 (0.666667)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, m) in &self.entries {
            writeln!(f, "{t} : {} ({})", m.to_fraction_string(), m.to_decimal_string(6))?;
        }
        Ok(())
    }
}

/// Exact distribution over traces of at most `depth` visible actions under
/// the environment. Runs that would show a further action are cut off as
/// [`Marker::Open`].
pub fn trace_distribution(p: &ReactivePTS, env: &Environment, depth: usize) -> TraceDistribution {
    let closed = Closed::of(&apply_environment(p, env));
    let mut entries: BTreeMap<Trace, Rational> = BTreeMap::new();
    let mut frontier: BTreeMap<(Vec<BasicAction>, usize), Rational> =
        closed.initial.iter().map(|(v, m)| ((Vec::new(), *v), m.clone())).collect();
    while !frontier.is_empty() {
        let mut next: BTreeMap<(Vec<BasicAction>, usize), Rational> = BTreeMap::new();
        for ((labels, v), m) in frontier {
            let end = match &closed.nodes[v] {
                Vis::Terminated => Marker::Terminated,
                Vis::Inaction => Marker::Inaction,
                Vis::Divergence => Marker::Divergence,
                Vis::Labeled { .. } | Vis::Action { .. } if labels.len() == depth => Marker::Open,
                Vis::Labeled { label, dist } => {
                    let mut labels = labels;
                    labels.push(label.clone());
                    for (w, mw) in dist {
                        let e = next.entry((labels.clone(), *w)).or_insert_with(Rational::zero);
                        *e = &*e + &(&m * mw);
                    }
                    continue;
                }
                Vis::Action { .. } => unreachable!("environment resolves every action"),
            };
            let e = entries.entry(Trace { labels, end }).or_insert_with(Rational::zero);
            *e = &*e + &m;
        }
        frontier = next;
    }
    TraceDistribution { entries }
}

/// Equal trace distributions up to `depth` under `env`.
pub fn equivalent_under(s1: &InstructionSequence, s2: &InstructionSequence, env: &Environment, depth: usize) -> bool {
    trace_distribution(&build_pts(s1), env, depth) == trace_distribution(&build_pts(s2), env, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::ReplyModel;
    use crate::syntax::{normalize, parse};

    fn seq(text: &str) -> InstructionSequence {
        normalize(&parse(text).unwrap()).unwrap()
    }

    fn resolved(text: &str) -> ReactivePTS {
        apply_environment(&build_pts(&seq(text)), &Environment::default())
    }

    #[test]
    fn absorption_cases() {
        let a = absorption(&resolved("(+prb;#3;a;!;+prb;#3;b;!)*")).unwrap();
        assert_eq!((a.terminated, a.inaction, a.divergence), (Rational::one(), Rational::zero(), Rational::zero()));
        assert_eq!(absorption(&resolved("(#1)*")).unwrap().divergence, Rational::one());
        assert_eq!(absorption(&resolved("#0")).unwrap().inaction, Rational::one());
        assert!(absorption(&build_pts(&seq("+a;!"))).is_err());
    }

    #[test]
    fn expected_step_counts() {
        assert_eq!(expected_steps(&resolved("a;!")).unwrap(), Expectation::Finite(2.into()));
        assert_eq!(expected_steps(&resolved("a")).unwrap(), Expectation::Finite(1.into()));
        assert_eq!(expected_steps(&resolved("(#1)*")).unwrap(), Expectation::Infinite);
        assert_eq!(expected_coin_flips(&resolved("(+prb;#3;a;!;+prb;#3;b;!)*")).unwrap(), Expectation::Finite(2.into()));
    }

    #[test]
    fn traces_of_biased_choice() {
        let d = trace_distribution(&build_pts(&seq("-prb(2/3);#3;a;!;b;!")), &Environment::default(), 2);
        assert_eq!(d.mass("a;!"), Rational::new(2, 3));
        assert_eq!(d.mass("b;!"), Rational::new(1, 3));
        assert_eq!(d.entries().len(), 2);
        assert_eq!(d.to_string(), "a;! : 2/3 (0.666667)\nb;! : 1/3 (0.333333)\n");
    }

    #[test]
    fn depth_cut_and_divergence() {
        let d = trace_distribution(&build_pts(&seq("(a)*")), &Environment::default(), 3);
        assert_eq!(d.mass("a;a;a;..."), Rational::one());
        let d = trace_distribution(&build_pts(&seq("a;(#1)*")), &Environment::default(), 3);
        assert_eq!(d.mass("a;(#1)*"), Rational::one());
        let d = trace_distribution(&build_pts(&seq("!")), &Environment::default(), 0);
        assert_eq!(d.mass("!"), Rational::one());
    }

    #[test]
    fn replies_steer_tests() {
        let env = Environment::new(ReplyModel::AlwaysFalse);
        let d = trace_distribution(&build_pts(&seq("+a;b;c")), &env, 4);
        assert_eq!(d.mass("a;c;#0"), Rational::one());
        let env = Environment::new(ReplyModel::Bernoulli(Rational::new(2, 3)));
        let d = trace_distribution(&build_pts(&seq("+random(2/3).get;a;b")), &env, 4);
        assert_eq!(d.mass("a;b;#0"), Rational::new(2, 3));
    }

    #[test]
    fn equivalence_wrapper() {
        let env = Environment::default();
        assert!(equivalent_under(&seq("prb;a;!"), &seq("#1;a;!"), &env, 4));
        assert!(!equivalent_under(&seq("a;!"), &seq("a;a;!"), &env, 4));
    }
}
