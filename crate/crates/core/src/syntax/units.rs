use super::{normalize::stream_of, BasicAction, Instruction, Prob, Term};
use crate::assemble::{assemble, lower, Blocks, Dest, Item};
use crate::Error;

/// Inlines every unit instruction, relocating jumps so that a jump counting a
/// unit as one instruction now skips the whole payload.
///
/// A jump inside a payload that runs past the payload's end continues in the
/// enclosing list just after the unit, overflow preserved. The result is in
/// canonical form; unit-free input is returned unchanged.
pub fn eliminate_units(t: &Term) -> Result<Term, Error> {
    if !t.contains_units() {
        return Ok(t.clone());
    }
    let (prefix, period) = stream_of(t)?;
    let (m, n) = (prefix.len(), period.len());
    let mut blocks = Vec::with_capacity(m + n);
    for (p, instr) in prefix.iter().chain(&period).enumerate() {
        let mut items = Vec::new();
        flatten(instr, &mut Vec::new(), p, &mut items)?;
        blocks.push(items);
    }
    let out = assemble(&Blocks { blocks, prefix_len: m, period_len: n, periodize: false })?;
    Ok(out.to_term())
}

/// One enclosing unit body on the way down from a top-level element.
struct Frame<'a> {
    body: &'a [Instruction],
    /// Index of this body's unit in the enclosing list.
    index: usize,
    /// Block offset of the first leaf of each element of `body`.
    first_leaf: Vec<usize>,
}

fn flatten<'a>(instr: &'a Instruction, frames: &mut Vec<Frame<'a>>, pos: usize, out: &mut Vec<Item>) -> Result<(), Error> {
    match instr {
        Instruction::Unit(body) => {
            let mut first_leaf = Vec::with_capacity(body.len());
            let mut at = out.len();
            for i in body {
                first_leaf.push(at);
                at += i.flat_len();
            }
            let index = 0;
            frames.push(Frame { body, index, first_leaf });
            for (k, inner) in body.iter().enumerate() {
                frames.last_mut().expect("pushed").index = k;
                flatten(inner, frames, pos, out)?;
            }
            frames.pop();
            Ok(())
        }
        Instruction::JumpGU(..) if !frames.is_empty() => Err(Error::UnboundedJumpInUnit),
        _ => {
            let item = lower(instr, |k| resolve(frames, pos, k))?;
            out.push(item);
            Ok(())
        }
    }
}

/// Destination of "the k-th next instruction" seen from the innermost frame.
///
/// `frames[d].index` is the position of the current element in `frames[d].body`;
/// the unit holding `frames[d]` sits at `frames[d-1].index` (or at stream
/// position `pos` for the outermost one).
fn resolve(frames: &[Frame<'_>], pos: usize, k: usize) -> Dest {
    let mut target = k;
    for d in (0..frames.len()).rev() {
        let frame = &frames[d];
        let j = frame.index + target;
        if j < frame.body.len() {
            return Dest::Orig { pos, sub: frame.first_leaf[j] };
        }
        target = 1 + (j - frame.body.len());
    }
    Dest::at(pos + target)
}

/// Rewrites every `{P}+_(p){Q}` into `+prb(p);[P;#2];[Q]`.
///
/// Operands of a choice become unit payloads, so they may not contain
/// repetition. Choices nested in an operand are desugared first and spliced
/// into the payload.
pub fn desugar_prchoice(t: &Term) -> Result<Term, Error> {
    Ok(match t {
        Term::Instr(_) => t.clone(),
        Term::Concat(a, b) => Term::concat(desugar_prchoice(a)?, desugar_prchoice(b)?),
        Term::Rep(a) => Term::rep(desugar_prchoice(a)?),
        Term::Choice { left, p, right } => {
            let payload = |side: &Term| -> Result<Vec<Instruction>, Error> {
                desugar_prchoice(side)?.instructions().ok_or(Error::RepetitionInUnit)
            };
            let mut left = payload(left)?;
            left.push(Instruction::Jump(2));
            let right = payload(right)?;
            Term::seq([
                Term::Instr(Instruction::PrbPos(Prob::Value(p.clone()))),
                Term::Instr(Instruction::Unit(left)),
                Term::Instr(Instruction::Unit(right)),
            ])
            .expect("nonempty")
        }
    })
}

/// `#H{k};[x.set_1;#k];[x.set_2;#(k-1)];...;[x.set_k;#1]`: assigns one of
/// `1..=k` to `x`, uniformly.
pub fn build_random_assignment(x: &str, k: usize) -> Result<Term, Error> {
    if k == 0 {
        return Err(Error::Precondition("random assignment needs k >= 1".into()));
    }
    let mut items = vec![Term::Instr(Instruction::JumpH(k))];
    for i in 1..=k {
        let set = BasicAction::with_focus(x, &format!("set_{i}"))?;
        items.push(Term::Instr(Instruction::Unit(vec![Instruction::Basic(set), Instruction::Jump(k - i + 1)])));
    }
    Ok(Term::seq(items).expect("nonempty"))
}
