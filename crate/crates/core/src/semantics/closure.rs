//! Hitting distributions and the visible system.
//!
//! Traces and bisimilarity ignore unlabelled chance nodes: a jump, a coin flip
//! whose outcome only matters later, or a hidden service call. Each of them is
//! replaced by the exact distribution over the visible nodes it eventually
//! reaches; the mass that circulates among internal nodes forever goes to a
//! synthetic divergence node.

use std::collections::VecDeque;

use super::linear::{solve, Row};
use super::{Node, ReactivePTS, StateId};
use crate::meadow::Rational;
use crate::syntax::BasicAction;

/// For every state, the distribution over absorbing states (those where `step`
/// is `None`) of where a run from that state first gets absorbed. Missing mass
/// is the probability of never being absorbed.
pub(crate) fn hitting(step: &[Option<Vec<(StateId, Rational)>>]) -> Vec<Row> {
    let n = step.len();
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for (s, out) in step.iter().enumerate() {
        for (t, _) in out.iter().flatten() {
            preds[*t].push(s);
        }
    }
    let mut reaches = vec![false; n];
    let mut queue: VecDeque<StateId> = (0..n).filter(|&s| step[s].is_none()).collect();
    for &s in &queue {
        reaches[s] = true;
    }
    while let Some(s) = queue.pop_front() {
        for &p in &preds[s] {
            if !reaches[p] {
                reaches[p] = true;
                queue.push_back(p);
            }
        }
    }
    let transient: Vec<StateId> = (0..n).filter(|&s| reaches[s] && step[s].is_some()).collect();
    let mut index = vec![usize::MAX; n];
    for (i, &s) in transient.iter().enumerate() {
        index[s] = i;
    }
    let mut a = Vec::with_capacity(transient.len());
    let mut b = Vec::with_capacity(transient.len());
    for &s in &transient {
        let mut row = Row::new();
        let mut rhs = Row::new();
        row.insert(index[s], Rational::one());
        for (t, m) in step[s].as_ref().expect("transient") {
            if step[*t].is_none() {
                add(&mut rhs, *t, m);
            } else if reaches[*t] {
                let e = row.entry(index[*t]).or_insert_with(Rational::zero);
                *e = &*e - m;
            }
        }
        row.retain(|_, v| !v.is_zero());
        a.push(row);
        b.push(rhs);
    }
    let solved = if transient.is_empty() { Vec::new() } else { solve(a, b) };
    (0..n)
        .map(|s| match (&step[s], reaches[s]) {
            (None, _) => Row::from([(s, Rational::one())]),
            (Some(_), true) => solved[index[s]].clone(),
            (Some(_), false) => Row::new(),
        })
        .collect()
}

fn add(row: &mut Row, at: usize, m: &Rational) {
    let e = row.entry(at).or_insert_with(Rational::zero);
    *e = &*e + m;
}

pub(crate) type Dist = Vec<(usize, Rational)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Vis {
    Action { label: BasicAction, on_true: Dist, on_false: Dist },
    Labeled { label: BasicAction, dist: Dist },
    Terminated,
    Inaction,
    Divergence,
}

impl Vis {
    pub(crate) fn describe(&self) -> String {
        match self {
            Vis::Action { label, .. } => format!("action `{label}`"),
            Vis::Labeled { label, .. } => format!("step `{label}`"),
            Vis::Terminated => "termination".into(),
            Vis::Inaction => "inaction".into(),
            Vis::Divergence => "divergence".into(),
        }
    }
}

/// The visible system of a transition system.
pub(crate) struct Closed {
    pub nodes: Vec<Vis>,
    pub initial: Dist,
}

impl Closed {
    pub(crate) fn of(p: &ReactivePTS) -> Closed {
        let silent = |s: StateId| matches!(p.node(s), Node::Chance { label: None, .. });
        let step: Vec<Option<Vec<(StateId, Rational)>>> = (0..p.len())
            .map(|s| match p.node(s) {
                Node::Chance { label: None, dist } => Some(dist.clone()),
                _ => None,
            })
            .collect();
        let hit = hitting(&step);
        // Visible states get consecutive indices; divergence comes last.
        let mut vis_index = vec![usize::MAX; p.len()];
        let mut count = 0;
        for s in 0..p.len() {
            if !silent(s) {
                vis_index[s] = count;
                count += 1;
            }
        }
        let divergence = count;
        let close = |s: StateId| -> Dist {
            let row = &hit[s];
            let mut dist: Dist = row.iter().map(|(t, m)| (vis_index[*t], m.clone())).collect();
            let total: Rational = row.values().cloned().sum();
            if !total.is_one() {
                dist.push((divergence, Rational::one() - total));
            }
            dist
        };
        let mix = |dist: &[(StateId, Rational)]| -> Dist {
            let mut acc: std::collections::BTreeMap<usize, Rational> = Default::default();
            for (s, m) in dist {
                for (v, mv) in close(*s) {
                    add(&mut acc, v, &(m * &mv));
                }
            }
            acc.into_iter().collect()
        };
        let mut nodes = Vec::with_capacity(count + 1);
        for s in 0..p.len() {
            if silent(s) {
                continue;
            }
            nodes.push(match p.node(s) {
                Node::Action { label, on_true, on_false } => {
                    Vis::Action { label: label.clone(), on_true: close(*on_true), on_false: close(*on_false) }
                }
                Node::Chance { label: Some(label), dist } => Vis::Labeled { label: label.clone(), dist: mix(dist) },
                Node::Terminated => Vis::Terminated,
                Node::Inaction => Vis::Inaction,
                Node::Chance { label: None, .. } => unreachable!(),
            });
        }
        nodes.push(Vis::Divergence);
        Closed { nodes, initial: close(p.initial()) }
    }
}
