use super::{Instruction, InstructionSequence, Term};
use crate::Error;

/// Flattens a term into the stream it denotes, `(prefix, period)` with an
/// empty period for finite streams. Unit instructions are kept as opaque
/// elements; choices must have been desugared.
pub(crate) fn stream_of(t: &Term) -> Result<(Vec<Instruction>, Vec<Instruction>), Error> {
    match t {
        Term::Instr(i) => Ok((vec![i.clone()], Vec::new())),
        Term::Concat(a, b) => {
            let (mut prefix, period) = stream_of(a)?;
            if !period.is_empty() {
                // X*;Y = X*
                return Ok((prefix, period));
            }
            let (tail, period) = stream_of(b)?;
            prefix.extend(tail);
            Ok((prefix, period))
        }
        Term::Rep(a) => {
            let (prefix, period) = stream_of(a)?;
            if period.is_empty() {
                Ok((Vec::new(), prefix))
            } else {
                Ok((prefix, period))
            }
        }
        Term::Choice { .. } => Err(Error::UnexpectedChoice),
    }
}

/// Reduces the period to its primitive root, then absorbs the prefix tail
/// into rotations of the period.
pub(crate) fn canonicalize(mut prefix: Vec<Instruction>, mut period: Vec<Instruction>) -> InstructionSequence {
    let n = period.len();
    if let Some(d) = (1..=n).find(|d| n.is_multiple_of(*d) && (*d..n).all(|i| period[i] == period[i % d])) {
        period.truncate(d);
    }
    while !period.is_empty() && prefix.last().is_some() && prefix.last() == period.last() {
        prefix.pop();
        period.rotate_right(1);
    }
    InstructionSequence::from_canonical_parts(prefix, period)
}

/// Canonical form of a unit-free, choice-free term.
pub fn normalize(t: &Term) -> Result<InstructionSequence, Error> {
    let (prefix, period) = stream_of(t)?;
    InstructionSequence::new(prefix, period)
}

/// The first `n` instructions of the stream (fewer if it is finite and shorter).
pub fn expand(s: &InstructionSequence, n: usize) -> Vec<Instruction> {
    (0..n).map_while(|pos| s.at(pos).cloned()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn norm(text: &str) -> InstructionSequence {
        normalize(&parse(text).unwrap()).unwrap()
    }

    fn names(list: &[Instruction]) -> Vec<String> {
        list.iter().map(ToString::to_string).collect()
    }

    #[test]
    fn prefix_and_period() {
        let s = norm("a;(b;c)*");
        assert_eq!(names(s.prefix()), ["a"]);
        assert_eq!(names(s.period()), ["b", "c"]);
    }

    #[test]
    fn period_reduced_to_root() {
        let s = norm("(a;a)*");
        assert!(s.prefix().is_empty());
        assert_eq!(names(s.period()), ["a"]);
    }

    #[test]
    fn prefix_absorbed() {
        let s = norm("a;(a)*");
        assert!(s.prefix().is_empty());
        assert_eq!(names(s.period()), ["a"]);
        let s = norm("x;b;c;(a;b;c)*");
        assert_eq!(names(s.prefix()), ["x"]);
        assert_eq!(names(s.period()), ["b", "c", "a"]);
    }

    #[test]
    fn after_repetition_dropped_and_nesting_flattened() {
        assert_eq!(norm("(a)*;b;c"), norm("(a)*"));
        assert_eq!(norm("((a;b)*)*"), norm("(a;b)*"));
        assert_eq!(norm("a;((b)*;c)*"), norm("a;(b)*"));
    }

    #[test]
    fn expansion() {
        let s = norm("a;(b;c)*");
        assert_eq!(names(&expand(&s, 5)), ["a", "b", "c", "b", "c"]);
        assert_eq!(names(&expand(&norm("a;!"), 5)), ["a", "!"]);
        assert_eq!(names(&expand(&norm("(a)*"), 3)), ["a", "a", "a"]);
    }

    #[test]
    fn units_and_choices_rejected() {
        assert_eq!(normalize(&parse("[a;b]").unwrap()), Err(Error::UnexpectedUnit));
        assert_eq!(normalize(&parse("{a}+_(1/2){b}").unwrap()), Err(Error::UnexpectedChoice));
    }
}
