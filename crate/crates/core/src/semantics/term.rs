//! Direct semantics of terms with unit instructions and probabilistic choice,
//! without translating them away first.
//!
//! Every element of the term, including each unit and each choice, is a state.
//! Entering a unit moves silently to its first element; a choice is a silent
//! coin. Counting past the end of a list continues in the enclosing list after
//! the element that holds it, carrying the overflow. Choice operands are
//! assumed not to jump out of themselves (other than by running off their end).

use super::{merge, Node, ReactivePTS, StateId};
use crate::meadow::Rational;
use crate::syntax::{Instruction, Term};
use crate::Error;

enum El {
    Leaf(Instruction),
    Unit(Vec<El>),
    Choice(Rational, Vec<El>, Vec<El>),
}

fn finite(t: &Term) -> Result<Vec<El>, Error> {
    match elements(t)? {
        (list, period) if period.is_empty() => Ok(list),
        _ => Err(Error::RepetitionInUnit),
    }
}

fn element(i: &Instruction) -> El {
    match i {
        Instruction::Unit(body) => El::Unit(body.iter().map(element).collect()),
        other => El::Leaf(other.clone()),
    }
}

/// Top-level elements as `(prefix, period)`.
fn elements(t: &Term) -> Result<(Vec<El>, Vec<El>), Error> {
    Ok(match t {
        Term::Instr(i) => (vec![element(i)], Vec::new()),
        Term::Choice { left, p, right } => (vec![El::Choice(p.mkprob(), finite(left)?, finite(right)?)], Vec::new()),
        Term::Concat(a, b) => {
            let (mut x, period) = elements(a)?;
            if !period.is_empty() {
                return Ok((x, period));
            }
            let (y, period) = elements(b)?;
            x.extend(y);
            (x, period)
        }
        Term::Rep(a) => match elements(a)? {
            (x, period) if period.is_empty() => (Vec::new(), x),
            other => other,
        },
    })
}

struct Builder<'a> {
    /// `lists[0]` is the top level; the others are unit bodies and choice operands.
    lists: Vec<Vec<StateId>>,
    /// Element state holding each list (none for the top level).
    holder: Vec<Option<StateId>>,
    /// List and index of every state.
    place: Vec<(usize, usize)>,
    els: Vec<&'a El>,
    prefix_len: usize,
    period_len: usize,
}

impl<'a> Builder<'a> {
    fn add_list(&mut self, items: &'a [El], holder: Option<StateId>) -> usize {
        let id = self.lists.len();
        self.lists.push(Vec::new());
        self.holder.push(holder);
        for (i, el) in items.iter().enumerate() {
            let s = self.els.len();
            self.els.push(el);
            self.place.push((id, i));
            self.lists[id].push(s);
        }
        id
    }

    /// State `j` elements after the start of `list`, `None` for inaction.
    fn resolve(&self, list: usize, j: usize) -> Option<StateId> {
        let items = &self.lists[list];
        match self.holder[list] {
            None => {
                let (m, n) = (self.prefix_len, self.period_len);
                if j < m {
                    Some(items[j])
                } else if n == 0 {
                    None
                } else {
                    Some(items[m + (j - m) % n])
                }
            }
            Some(_) if j < items.len() => Some(items[j]),
            Some(h) => {
                let (outer, at) = self.place[h];
                self.resolve(outer, at + 1 + (j - items.len()))
            }
        }
    }
}

/// Reactive system of a term that may contain unit instructions and
/// probabilistic choices (but no unbounded geometric jumps).
pub fn build_pts_term(t: &Term) -> Result<ReactivePTS, Error> {
    let (mut top, period) = elements(t)?;
    let (prefix_len, period_len) = (top.len(), period.len());
    top.extend(period);
    let mut b = Builder { lists: Vec::new(), holder: Vec::new(), place: Vec::new(), els: Vec::new(), prefix_len, period_len };
    b.add_list(&top, None);
    // Breadth-first: nested lists are appended as their holders are met.
    let mut sublists: Vec<Vec<usize>> = Vec::new();
    let mut s = 0;
    while s < b.els.len() {
        let el: &El = b.els[s];
        let ids = match el {
            El::Leaf(_) => Vec::new(),
            El::Unit(body) => vec![b.add_list(body, Some(s))],
            El::Choice(_, l, r) => vec![b.add_list(l, Some(s)), b.add_list(r, Some(s))],
        };
        sublists.push(ids);
        s += 1;
    }
    let ina = b.els.len();
    let to = |x: Option<StateId>| x.unwrap_or(ina);
    let mut nodes = Vec::with_capacity(ina + 1);
    let mut source = Vec::with_capacity(ina + 1);
    for s in 0..ina {
        let (list, at) = b.place[s];
        let succ = |k: usize| to(b.resolve(list, at + k));
        let chance = |dist: Vec<(StateId, Rational)>| Node::Chance { label: None, dist: merge(dist) };
        let one = Rational::one;
        let node = match b.els[s] {
            El::Unit(_) => chance(vec![(to(b.resolve(sublists[s][0], 0)), one())]),
            El::Choice(p, _, _) => chance(vec![
                (to(b.resolve(sublists[s][0], 0)), p.clone()),
                (to(b.resolve(sublists[s][1], 0)), Rational::one() - p.clone()),
            ]),
            El::Leaf(i) => match i {
                Instruction::Basic(a) => Node::Action { label: a.clone(), on_true: succ(1), on_false: succ(1) },
                Instruction::PosTest(a) => Node::Action { label: a.clone(), on_true: succ(1), on_false: succ(2) },
                Instruction::NegTest(a) => Node::Action { label: a.clone(), on_true: succ(2), on_false: succ(1) },
                Instruction::Jump(0) | Instruction::JumpH(0) => chance(vec![(ina, one())]),
                Instruction::Jump(l) => chance(vec![(succ(*l), one())]),
                Instruction::Halt => Node::Terminated,
                Instruction::Prb(_) => chance(vec![(succ(1), one())]),
                Instruction::PrbPos(q) => chance(vec![(succ(1), q.effective()), (succ(2), Rational::one() - q.effective())]),
                Instruction::PrbNeg(q) => chance(vec![(succ(2), q.effective()), (succ(1), Rational::one() - q.effective())]),
                Instruction::JumpH(k) => chance((1..=*k).map(|j| (succ(j), Rational::new(1, *k as i64))).collect()),
                Instruction::JumpG(q, k) => {
                    let q = q.effective();
                    let mut stay = Rational::one();
                    let mut dist = Vec::new();
                    for j in 1..=*k {
                        dist.push((succ(j), &stay * &q));
                        stay = &stay * &(Rational::one() - q.clone());
                    }
                    dist.push((ina, stay));
                    chance(dist)
                }
                Instruction::JumpGU(..) => {
                    return Err(Error::Precondition("unbounded geometric jumps are not supported here".into()))
                }
                Instruction::Unit(_) => unreachable!("units are split into elements"),
            },
        };
        nodes.push(node);
        source.push(match b.els[s] {
            El::Leaf(i) => Some(i.clone()),
            _ => None,
        });
    }
    nodes.push(Node::Inaction);
    source.push(None);
    Ok(ReactivePTS::from_parts(nodes, source, to(b.resolve(0, 0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::{trace_distribution, Environment};
    use crate::syntax::parse;

    fn dist(text: &str) -> crate::semantics::TraceDistribution {
        trace_distribution(&build_pts_term(&parse(text).unwrap()).unwrap(), &Environment::default(), 6)
    }

    #[test]
    fn nested_choice() {
        let d = dist("{{a}+_(1/2){b}}+_(1/2){c}");
        assert_eq!(d.mass("a;#0"), Rational::new(1, 4));
        assert_eq!(d.mass("b;#0"), Rational::new(1, 4));
        assert_eq!(d.mass("c;#0"), Rational::new(1, 2));
    }

    #[test]
    fn units_skip_as_one() {
        assert_eq!(dist("#2;[a;b];c;!").mass("c;!"), Rational::one());
        assert_eq!(dist("[a;#2];b;c;!").mass("a;c;!"), Rational::one());
        assert_eq!(dist("[a;#3];b;c;!").mass("a;!"), Rational::one());
        assert_eq!(dist("([a;#2];b)*").mass("a;a;a;a;a;a;..."), Rational::one());
    }
}
