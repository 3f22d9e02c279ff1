//! Jump relocation for rewrite passes.
//!
//! A pass describes its output as one block of [`Item`]s per slot of the input
//! stream (prefix slots, then one copy of the period). Control transfers are
//! symbolic ([`Dest`]) and refer to input stream positions; the assembler lays
//! the blocks out, decides which items can stay compact (a test whose two
//! successors happen to be the next two instructions needs no trampolines) and
//! emits concrete forward jumps.
//!
//! Layout is a fixpoint: every item starts compact and is expanded once its
//! successors stop lining up. Expansion only grows blocks, so the loop ends.
//!
//! ```text
//!   +a        (next, skip)      +a ; #d1 ; #d2
//! ```
//!
//! A finite or prefixed program can be *periodized*: its whole slot list becomes
//! the period of the output, so that gadgets can loop by jumping to their own
//! copy one period ahead. Falling off the end of a periodized finite program is
//! turned into explicit inaction.

use num_integer::gcd;

use crate::syntax::{Instruction, InstructionSequence, Prob};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Dest {
    /// Item `sub` of the block for input stream position `pos`.
    Orig { pos: usize, sub: usize },
    /// Item `sub` of this same block in the next copy of the output period.
    NextCopy { sub: usize },
    Inaction,
}

impl Dest {
    pub(crate) fn at(pos: usize) -> Dest {
        Dest::Orig { pos, sub: 0 }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Item {
    Halt,
    /// Instruction that always continues with `next`.
    Step { instr: Instruction, next: Dest },
    /// Test instruction: reply routes to `next` or skips to `skip`.
    Branch { instr: Instruction, next: Dest, skip: Dest },
    Goto(Dest),
    /// `#H{k}` over the given targets.
    Uniform(Vec<Dest>),
    /// `#G{q}{k}` over the given targets.
    Geometric(Prob, Vec<Dest>),
    /// `#GU{q}{stride}` of the input, landing on positions `p + stride·j`.
    Unbounded { q: Prob, stride: usize },
}

pub(crate) struct Blocks {
    pub blocks: Vec<Vec<Item>>,
    pub prefix_len: usize,
    pub period_len: usize,
    pub periodize: bool,
}

/// Lowers an instruction at input position `pos` to an item. `resolve(k)` gives
/// the destination of "the k-th next instruction" for `k ≥ 1`.
pub(crate) fn lower(instr: &Instruction, resolve: impl Fn(usize) -> Dest) -> Result<Item, Error> {
    use Instruction as I;
    Ok(match instr {
        I::Basic(_) | I::Prb(_) => Item::Step { instr: instr.clone(), next: resolve(1) },
        I::PosTest(_) | I::NegTest(_) | I::PrbPos(_) | I::PrbNeg(_) => {
            Item::Branch { instr: instr.clone(), next: resolve(1), skip: resolve(2) }
        }
        I::Jump(0) => Item::Goto(Dest::Inaction),
        I::Jump(l) => Item::Goto(resolve(*l)),
        I::Halt => Item::Halt,
        I::JumpH(k) => Item::Uniform((1..=*k).map(&resolve).collect()),
        I::JumpG(q, k) => Item::Geometric(q.clone(), (1..=*k).map(&resolve).collect()),
        I::JumpGU(q, l) => Item::Unbounded { q: q.clone(), stride: *l },
        I::Unit(_) => return Err(Error::UnexpectedUnit),
    })
}

/// Lowers an instruction at top-level stream position `pos`.
pub(crate) fn lower_at(instr: &Instruction, pos: usize) -> Result<Item, Error> {
    lower(instr, |k| Dest::at(pos + k))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Out {
    At(usize),
    End,
    Inaction,
}

struct Layout {
    /// Output offset of every item, per block.
    offsets: Vec<Vec<usize>>,
    /// Output offset of every block; one extra entry holding the total size.
    starts: Vec<usize>,
}

impl Layout {
    fn total(&self) -> usize {
        *self.starts.last().expect("nonempty")
    }
}

struct Assembler<'a> {
    input: &'a Blocks,
    expanded: Vec<Vec<bool>>,
    out_prefix: usize,
    out_period: usize,
}

impl<'a> Assembler<'a> {
    fn new(input: &'a Blocks) -> Self {
        let (out_prefix, out_period) = if input.periodize {
            (0, input.prefix_len + input.period_len)
        } else {
            (input.prefix_len, input.period_len)
        };
        Assembler {
            input,
            expanded: input.blocks.iter().map(|b| vec![false; b.len()]).collect(),
            out_prefix,
            out_period,
        }
    }

    fn item_size(item: &Item, expanded: bool) -> usize {
        match (item, expanded) {
            (_, false) => 1,
            (Item::Step { .. }, true) => 2,
            (Item::Branch { .. }, true) => 3,
            (Item::Uniform(t) | Item::Geometric(_, t), true) => 1 + t.len(),
            (Item::Halt | Item::Goto(_) | Item::Unbounded { .. }, true) => 1,
        }
    }

    fn layout(&self) -> Layout {
        let mut starts = Vec::with_capacity(self.input.blocks.len() + 1);
        let mut offsets = Vec::with_capacity(self.input.blocks.len());
        let mut at = 0;
        for (block, flags) in self.input.blocks.iter().zip(&self.expanded) {
            starts.push(at);
            let mut offs = Vec::with_capacity(block.len());
            for (item, &e) in block.iter().zip(flags) {
                offs.push(at);
                at += Self::item_size(item, e);
            }
            offsets.push(offs);
        }
        starts.push(at);
        Layout { offsets, starts }
    }

    /// Input stream position to output-stream block position, `None` past the end.
    fn map_pos(&self, pos: usize) -> Option<usize> {
        let m = self.input.prefix_len;
        let n = self.input.period_len;
        if pos < m {
            Some(pos)
        } else if n == 0 {
            None
        } else if self.input.periodize {
            let (c, r) = ((pos - m) / n, (pos - m) % n);
            Some(c * (m + n) + m + r)
        } else {
            Some(pos)
        }
    }

    /// Output offset of item `sub` at output-stream block position `x`.
    fn offset(&self, layout: &Layout, x: usize, sub: usize) -> Result<usize, Error> {
        let slot = if x < self.out_prefix {
            x
        } else {
            self.out_prefix + (x - self.out_prefix) % self.out_period
        };
        let copies = if x < self.out_prefix { 0 } else { (x - self.out_prefix) / self.out_period };
        let period_size = layout.total() - layout.starts[self.out_prefix];
        let inner = layout.offsets[slot]
            .get(sub)
            .ok_or_else(|| Error::Relocation(format!("no item {sub} in block {slot}")))?;
        Ok(inner + copies * period_size)
    }

    fn resolve(&self, layout: &Layout, block: usize, dest: &Dest) -> Result<Out, Error> {
        match dest {
            Dest::Inaction => Ok(Out::Inaction),
            Dest::Orig { pos, sub } => match self.map_pos(*pos) {
                Some(x) => self.offset(layout, x, *sub).map(Out::At),
                None if self.input.periodize => Ok(Out::Inaction),
                None => Ok(Out::End),
            },
            Dest::NextCopy { sub } => {
                if block < self.out_prefix || self.out_period == 0 {
                    return Err(Error::Relocation("loop back outside the period".into()));
                }
                self.offset(layout, block + self.out_period, *sub).map(Out::At)
            }
        }
    }

    fn fits(out: Out, want: usize, total: usize) -> bool {
        match out {
            Out::At(x) => x == want,
            Out::End => want >= total,
            Out::Inaction => false,
        }
    }

    fn compact_ok(&self, layout: &Layout, block: usize, item: &Item, o: usize) -> Result<bool, Error> {
        let total = layout.total();
        let fits = |dest: &Dest, want: usize| -> Result<bool, Error> {
            Ok(Self::fits(self.resolve(layout, block, dest)?, want, total))
        };
        Ok(match item {
            Item::Step { next, .. } => fits(next, o + 1)?,
            Item::Branch { next, skip, .. } => fits(next, o + 1)? && fits(skip, o + 2)?,
            Item::Uniform(targets) | Item::Geometric(_, targets) => {
                let mut ok = true;
                for (i, t) in targets.iter().enumerate() {
                    ok &= fits(t, o + 1 + i)?;
                }
                ok
            }
            Item::Halt | Item::Goto(_) | Item::Unbounded { .. } => true,
        })
    }

    fn jump(&self, layout: &Layout, block: usize, from: usize, dest: &Dest) -> Result<Instruction, Error> {
        match self.resolve(layout, block, dest)? {
            Out::At(x) if x > from => Ok(Instruction::Jump(x - from)),
            Out::At(x) => Err(Error::Relocation(format!("backward jump from {from} to {x}"))),
            Out::End => Ok(Instruction::Jump(layout.total() - from)),
            Out::Inaction => Ok(Instruction::Jump(0)),
        }
    }

    /// Relocated `#GU{q}{l}` at output offset `o`; fails if the landing sites
    /// are not evenly spaced in the output.
    fn unbounded(&self, layout: &Layout, block: usize, o: usize, q: &Prob, stride: usize) -> Result<Instruction, Error> {
        if stride == 0 || q.effective().is_zero() {
            return Ok(Instruction::JumpGU(q.clone(), stride));
        }
        let m = self.input.prefix_len;
        let n = self.input.period_len;
        let target = |j: usize| self.resolve(layout, block, &Dest::at(block + stride * j));
        let step = match target(1)? {
            Out::At(x) => x - o,
            Out::End => layout.total() - o,
            Out::Inaction => return Ok(Instruction::JumpGU(q.clone(), 0)),
        };
        let last_j = if n == 0 {
            m.saturating_sub(block).div_ceil(stride) + 1
        } else {
            let first_in_period = if block >= m { 1 } else { (m - block).div_ceil(stride).max(1) };
            first_in_period + n / gcd(stride, n)
        };
        for j in 1..=last_j {
            if !Self::fits(target(j)?, o + step * j, layout.total()) {
                return Err(Error::Relocation(format!(
                    "landing sites of an unbounded jump are no longer evenly spaced (landing {j})"
                )));
            }
        }
        Ok(Instruction::JumpGU(q.clone(), step))
    }

    fn run(mut self) -> Result<InstructionSequence, Error> {
        loop {
            let layout = self.layout();
            let mut changed = false;
            for (b, block) in self.input.blocks.iter().enumerate() {
                for (i, item) in block.iter().enumerate() {
                    if !self.expanded[b][i] && !self.compact_ok(&layout, b, item, layout.offsets[b][i])? {
                        self.expanded[b][i] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                return self.emit(&layout);
            }
        }
    }

    fn emit(&self, layout: &Layout) -> Result<InstructionSequence, Error> {
        let mut out = Vec::with_capacity(layout.total());
        for (b, block) in self.input.blocks.iter().enumerate() {
            for (i, item) in block.iter().enumerate() {
                let o = layout.offsets[b][i];
                debug_assert_eq!(o, out.len());
                let expanded = self.expanded[b][i];
                match item {
                    Item::Halt => out.push(Instruction::Halt),
                    Item::Goto(d) => out.push(self.jump(layout, b, o, d)?),
                    Item::Step { instr, next } => {
                        out.push(instr.clone());
                        if expanded {
                            out.push(self.jump(layout, b, o + 1, next)?);
                        }
                    }
                    Item::Branch { instr, next, skip } => {
                        out.push(instr.clone());
                        if expanded {
                            out.push(self.jump(layout, b, o + 1, next)?);
                            out.push(self.jump(layout, b, o + 2, skip)?);
                        }
                    }
                    Item::Uniform(targets) | Item::Geometric(_, targets) => {
                        out.push(match item {
                            Item::Geometric(q, _) => Instruction::JumpG(q.clone(), targets.len()),
                            _ => Instruction::JumpH(targets.len()),
                        });
                        if expanded {
                            for (k, t) in targets.iter().enumerate() {
                                out.push(self.jump(layout, b, o + 1 + k, t)?);
                            }
                        }
                    }
                    Item::Unbounded { q, stride } => out.push(self.unbounded(layout, b, o, q, *stride)?),
                }
            }
        }
        let split = layout.starts[self.out_prefix];
        let period = out.split_off(split);
        InstructionSequence::new(out, period)
    }
}

pub(crate) fn assemble(input: &Blocks) -> Result<InstructionSequence, Error> {
    debug_assert_eq!(input.blocks.len(), input.prefix_len + input.period_len);
    Assembler::new(input).run()
}

/// Blocks for a canonical sequence where each instruction is mapped by `f`
/// (called with the instruction and its slot).
pub(crate) fn blocks_of(
    s: &InstructionSequence,
    periodize: bool,
    mut f: impl FnMut(&Instruction, usize) -> Result<Vec<Item>, Error>,
) -> Result<Blocks, Error> {
    let blocks = s.instructions().enumerate().map(|(p, i)| f(i, p)).collect::<Result<_, _>>()?;
    Ok(Blocks { blocks, prefix_len: s.prefix().len(), period_len: s.period().len(), periodize })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{normalize, parse};

    fn seq(text: &str) -> InstructionSequence {
        normalize(&parse(text).unwrap()).unwrap()
    }

    fn identity(s: &InstructionSequence, periodize: bool) -> InstructionSequence {
        let blocks = blocks_of(s, periodize, |i, p| Ok(vec![lower_at(i, p)?])).unwrap();
        assemble(&blocks).unwrap()
    }

    #[test]
    fn identity_layout_is_identity() {
        for text in ["a;+b;#2;c;!", "+a;#GU{}{2};(+b;!;c)*", "#H{3};a;b;(c;#G{1/3}{2};d)*", "a;(#1)*"] {
            let s = seq(text);
            assert_eq!(identity(&s, false), s, "{text}");
        }
    }

    #[test]
    fn periodized_finite_routes_overflow_to_inaction() {
        let out = identity(&seq("+a;b"), true);
        assert_eq!(out.to_string(), "(+a;#2;#0;b;#0)*");
    }

    #[test]
    fn inserted_instruction_relocates_jumps() {
        let s = seq("#2;x;!");
        let blocks = blocks_of(&s, false, |i, p| {
            let mut items = vec![lower_at(i, p)?];
            if p == 1 {
                items.push(Item::Step { instr: Instruction::basic("y"), next: Dest::at(2) });
            }
            Ok(items)
        })
        .unwrap();
        // `x` now needs a trampoline over `y`.
        assert_eq!(assemble(&blocks).unwrap().to_string(), "#4;x;#2;y;!");
    }
}
