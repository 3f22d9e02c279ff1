use std::collections::BTreeMap;
use std::fmt;

use super::closure::{Closed, Dist, Vis};
use super::ReactivePTS;
use crate::meadow::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MismatchKind {
    /// The two sides start with different actions.
    Label,
    /// One side ends (or diverges) where the other does not.
    Kind,
    /// Same first steps, but probabilities into some class differ.
    Mass,
}

/// Why two systems are not bisimilar: the initial distributions put
/// different mass on one bisimulation class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evidence {
    pub kind: MismatchKind,
    /// Refinement round that separated the class (0: by node kind and label).
    pub round: usize,
    /// A member of the class.
    pub class: String,
    pub left_mass: Rational,
    pub right_mass: Rational,
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} mismatch: the class of {} (split in round {}) is reached with {} on the left and {} on the right",
            self.kind,
            self.class,
            self.round,
            self.left_mass.to_fraction_string(),
            self.right_mass.to_fraction_string()
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bisimulation {
    pub equivalent: bool,
    /// Number of classes of the coarsest bisimulation on the disjoint union.
    pub classes: usize,
    pub evidence: Option<Evidence>,
}

type Signature = (usize, Vec<Vec<(usize, Rational)>>);

fn lift(dist: &Dist, offset: usize, class: &[usize]) -> Vec<(usize, Rational)> {
    let mut acc: BTreeMap<usize, Rational> = BTreeMap::new();
    for (v, m) in dist {
        let e = acc.entry(class[v + offset]).or_insert_with(Rational::zero);
        *e = &*e + m;
    }
    acc.into_iter().filter(|(_, m)| !m.is_zero()).collect()
}

/// Probabilistic bisimilarity by partition refinement on the disjoint union of
/// the visible systems. Action nodes must agree on the label and on the class
/// masses of both reply successors; resolved steps on the label and on the
/// class masses of their distribution.
pub fn bisimilar(p1: &ReactivePTS, p2: &ReactivePTS) -> Bisimulation {
    let (left, right) = (Closed::of(p1), Closed::of(p2));
    let offset = left.nodes.len();
    let nodes: Vec<(&Vis, usize)> =
        left.nodes.iter().map(|v| (v, 0)).chain(right.nodes.iter().map(|v| (v, offset))).collect();

    let initial_key = |v: &Vis| match v {
        Vis::Action { label, .. } => (0, Some(label.clone())),
        Vis::Labeled { label, .. } => (1, Some(label.clone())),
        Vis::Terminated => (2, None),
        Vis::Inaction => (3, None),
        Vis::Divergence => (4, None),
    };
    let mut keys = BTreeMap::new();
    let mut class: Vec<usize> = nodes
        .iter()
        .map(|(v, _)| {
            let n = keys.len();
            *keys.entry(initial_key(v)).or_insert(n)
        })
        .collect();
    let mut born = vec![0usize; keys.len()];
    let mut round = 0;
    loop {
        round += 1;
        let mut sigs: BTreeMap<Signature, usize> = BTreeMap::new();
        let next: Vec<usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, (v, off))| {
                let parts = match v {
                    Vis::Action { on_true, on_false, .. } => vec![lift(on_true, *off, &class), lift(on_false, *off, &class)],
                    Vis::Labeled { dist, .. } => vec![lift(dist, *off, &class)],
                    _ => Vec::new(),
                };
                let n = sigs.len();
                *sigs.entry((class[i], parts)).or_insert(n)
            })
            .collect();
        if sigs.len() == born.len() {
            break;
        }
        // A class keeps its birth round unless it was split in this round.
        let mut pieces: BTreeMap<usize, usize> = BTreeMap::new();
        for (old, _) in sigs.keys() {
            *pieces.entry(*old).or_default() += 1;
        }
        let mut next_born = vec![0; sigs.len()];
        for ((old, _), new) in &sigs {
            next_born[*new] = if pieces[old] == 1 { born[*old] } else { round };
        }
        born = next_born;
        class = next;
    }

    let l = lift(&left.initial, 0, &class);
    let r = lift(&right.initial, offset, &class);
    let classes = born.len();
    if l == r {
        return Bisimulation { equivalent: true, classes, evidence: None };
    }
    let lm: BTreeMap<usize, Rational> = l.into_iter().collect();
    let rm: BTreeMap<usize, Rational> = r.into_iter().collect();
    let c = lm
        .keys()
        .chain(rm.keys())
        .copied()
        .find(|c| lm.get(c) != rm.get(c))
        .expect("distributions differ somewhere");
    let member = class.iter().position(|&k| k == c).expect("class is nonempty");
    let kind = if born[c] > 0 {
        MismatchKind::Mass
    } else if matches!(nodes[member].0, Vis::Action { .. } | Vis::Labeled { .. }) {
        MismatchKind::Label
    } else {
        MismatchKind::Kind
    };
    let mass = |m: &BTreeMap<usize, Rational>| m.get(&c).cloned().unwrap_or_else(Rational::zero);
    let evidence = Evidence {
        kind,
        round: born[c],
        class: nodes[member].0.describe(),
        left_mass: mass(&lm),
        right_mass: mass(&rm),
    };
    Bisimulation { equivalent: false, classes, evidence: Some(evidence) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::build_pts;
    use crate::syntax::{normalize, parse};

    fn pts(text: &str) -> ReactivePTS {
        build_pts(&normalize(&parse(text).unwrap()).unwrap())
    }

    #[test]
    fn biased_coin_and_fair_loop() {
        let b = bisimilar(&pts("-prb(2/3);#3;a;!;b;!"), &pts("(+prb;#3;a;!;+prb;#3;b;!)*"));
        assert!(b.equivalent, "{:?}", b.evidence);
    }

    #[test]
    fn label_mismatch() {
        let b = bisimilar(&pts("a;!"), &pts("b;!"));
        let e = b.evidence.unwrap();
        assert_eq!(e.kind, MismatchKind::Label);
        assert_eq!(e.round, 0);
        assert_eq!(e.class, "action `a`");
    }

    #[test]
    fn successor_mismatch_found_by_refinement() {
        let b = bisimilar(&pts("a;!"), &pts("a;#0"));
        assert!(!b.equivalent);
        assert_eq!(b.evidence.unwrap().kind, MismatchKind::Mass);
    }

    #[test]
    fn tests_compare_both_replies() {
        assert!(bisimilar(&pts("+a;b;c"), &pts("-a;#2;b;c")).equivalent);
        assert!(!bisimilar(&pts("+a;b;c"), &pts("-a;b;c")).equivalent);
        assert!(bisimilar(&pts("prb;a;!"), &pts("#1;a;!")).equivalent);
        assert!(bisimilar(&pts("(a)*"), &pts("a;a;(a)*")).equivalent);
    }
}
