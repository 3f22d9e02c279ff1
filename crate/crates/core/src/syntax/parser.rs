//! Recursive descent parser for `.pga` program text and meadow expressions.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use super::{BasicAction, Instruction, Prob, Term};
use crate::meadow::{MeadowExpr, Rational};
use crate::{Error, ParseError};

/// Exponents above this are rejected rather than evaluated.
const MAX_EXPONENT: u32 = 1 << 16;

/// Functions from extended meadow signatures that would leave the rationals.
const IRRATIONAL_FUNCTIONS: &[&str] = &["sqrt", "root", "exp", "log", "ln", "sin", "cos", "pi", "e"];

pub fn parse(text: &str) -> Result<Term, Error> {
    let mut p = Parser::new(text);
    let term = p.seq()?;
    p.skip_trivia();
    if let Some(c) = p.peek() {
        return Err(p.error(format!("unexpected `{c}`")));
    }
    Ok(term)
}

/// Parses a whole string as a meadow expression.
pub fn parse_meadow_expr(text: &str) -> Result<MeadowExpr, Error> {
    let mut p = Parser::new(text);
    let e = p.expr()?;
    p.skip_trivia();
    if let Some(c) = p.peek() {
        return Err(p.error(format!("unexpected `{c}` in expression")));
    }
    Ok(e)
}

/// Parses and evaluates a meadow expression such as `2/3` or `(1/2)^3`.
pub fn parse_rational(text: &str) -> Result<Rational, Error> {
    parse_meadow_expr(text).map(|e| e.eval())
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
}

impl Parser {
    fn new(text: &str) -> Self {
        Parser { chars: text.chars().collect(), pos: 0, line: 1, column: 1 }
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse(ParseError { line: self.line, column: self.column, message: message.into() })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek_at(1) == Some('/') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => return,
            }
        }
    }

    /// Next significant character.
    fn next_is(&mut self, c: char) -> bool {
        self.skip_trivia();
        self.peek() == Some(c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.next_is(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), Error> {
        if self.eat(c) {
            Ok(())
        } else {
            match self.peek() {
                Some(found) => Err(self.error(format!("expected `{c}`, found `{found}`"))),
                None => Err(self.error(format!("expected `{c}`, found end of input"))),
            }
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_trivia();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.bump();
        }
        (self.pos > start).then(|| self.chars[start..self.pos].iter().collect())
    }

    // seq := item (';' item)*
    fn seq(&mut self) -> Result<Term, Error> {
        let mut term = self.item()?;
        while self.eat(';') {
            term = Term::concat(term, self.item()?);
        }
        Ok(term)
    }

    // item := primary '*'*
    fn item(&mut self) -> Result<Term, Error> {
        let mut term = self.primary()?;
        while self.eat('*') {
            term = Term::rep(term);
        }
        Ok(term)
    }

    fn primary(&mut self) -> Result<Term, Error> {
        self.skip_trivia();
        match self.peek() {
            Some('(') => {
                self.bump();
                let t = self.seq()?;
                self.expect(')')?;
                Ok(t)
            }
            Some('[') => Ok(Term::Instr(self.unit()?)),
            Some('{') => self.choice(),
            Some(_) => Ok(Term::Instr(self.instruction()?)),
            None => Err(self.error("expected an instruction, found end of input")),
        }
    }

    fn unit(&mut self) -> Result<Instruction, Error> {
        self.expect('[')?;
        if self.next_is(']') {
            return Err(self.error("unit instruction must not be empty"));
        }
        let (line, column) = (self.line, self.column);
        let body = self.seq()?;
        self.expect(']')?;
        if body.contains_rep() {
            return Err(Error::Parse(ParseError {
                line,
                column,
                message: "repetition is not allowed inside a unit instruction".into(),
            }));
        }
        if body.contains_choice() {
            return Err(Error::Parse(ParseError {
                line,
                column,
                message: "probabilistic choice is not allowed inside a unit instruction".into(),
            }));
        }
        Ok(Instruction::Unit(body.instructions().expect("repetition-free body")))
    }

    // choice := '{' seq '}' '+_' '(' expr ')' '{' seq '}'
    fn choice(&mut self) -> Result<Term, Error> {
        self.expect('{')?;
        let left = self.seq()?;
        self.expect('}')?;
        self.expect('+')?;
        if self.peek() != Some('_') {
            return Err(self.error("expected `+_(p)` between choice operands"));
        }
        self.bump();
        self.expect('(')?;
        let p = self.expr()?.eval();
        self.expect(')')?;
        self.expect('{')?;
        let right = self.seq()?;
        self.expect('}')?;
        Ok(Term::Choice { left: Box::new(left), p, right: Box::new(right) })
    }

    fn instruction(&mut self) -> Result<Instruction, Error> {
        self.skip_trivia();
        match self.peek() {
            Some('!') => {
                self.bump();
                Ok(Instruction::Halt)
            }
            Some('#') => {
                self.bump();
                self.jump()
            }
            Some(sign @ ('+' | '-')) => {
                self.bump();
                if matches!(self.peek(), Some(c) if c.is_whitespace()) {
                    return Err(self.error(format!("expected an instruction directly after `{sign}`")));
                }
                match self.action_or_prb()? {
                    ActionOrPrb::Action(a) if sign == '+' => Ok(Instruction::PosTest(a)),
                    ActionOrPrb::Action(a) => Ok(Instruction::NegTest(a)),
                    ActionOrPrb::Prb(p) if sign == '+' => Ok(Instruction::PrbPos(p)),
                    ActionOrPrb::Prb(p) => Ok(Instruction::PrbNeg(p)),
                }
            }
            Some(c) if c.is_ascii_alphanumeric() || c == '_' => match self.action_or_prb()? {
                ActionOrPrb::Action(a) => Ok(Instruction::Basic(a)),
                ActionOrPrb::Prb(p) => Ok(Instruction::Prb(p)),
            },
            Some(c) => Err(self.error(format!("unexpected `{c}`"))),
            None => Err(self.error("expected an instruction, found end of input")),
        }
    }

    fn jump(&mut self) -> Result<Instruction, Error> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() => {
                let n = self.integer_literal()?;
                Ok(Instruction::Jump(self.to_usize(n)?))
            }
            Some('(') => {
                self.bump();
                let l = self.natural_expr()?;
                self.expect(')')?;
                Ok(Instruction::Jump(l))
            }
            Some('H') => {
                self.bump();
                let k = self.braced_natural()?;
                Ok(Instruction::JumpH(k))
            }
            Some('G') => {
                self.bump();
                let unbounded = if self.peek() == Some('U') {
                    self.bump();
                    true
                } else {
                    false
                };
                let q = self.braced_prob()?;
                let k = self.braced_natural()?;
                Ok(if unbounded { Instruction::JumpGU(q, k) } else { Instruction::JumpG(q, k) })
            }
            _ => Err(self.error("expected a jump distance, `H{k}`, `G{q}{k}` or `GU{q}{l}` after `#`")),
        }
    }

    fn braced_natural(&mut self) -> Result<usize, Error> {
        self.expect('{')?;
        let n = self.natural_expr()?;
        self.expect('}')?;
        Ok(n)
    }

    fn braced_prob(&mut self) -> Result<Prob, Error> {
        self.expect('{')?;
        if self.eat('}') {
            return Ok(Prob::Default);
        }
        let q = self.expr()?.eval();
        self.expect('}')?;
        Ok(Prob::Value(q))
    }

    fn natural_expr(&mut self) -> Result<usize, Error> {
        self.skip_trivia();
        let (line, column) = (self.line, self.column);
        let value = self.expr()?.eval();
        value.as_usize().ok_or_else(|| {
            Error::Parse(ParseError {
                line,
                column,
                message: format!("expected a natural number, found {value}"),
            })
        })
    }

    fn to_usize(&self, n: BigUint) -> Result<usize, Error> {
        n.to_usize().ok_or_else(|| self.error("natural number too large"))
    }

    fn action_or_prb(&mut self) -> Result<ActionOrPrb, Error> {
        let (first, first_arg) = self.name()?;
        if first == "prb" {
            if self.peek() == Some('.') {
                return Err(self.error("`prb` is reserved and cannot be used as a focus"));
            }
            return Ok(ActionOrPrb::Prb(match first_arg {
                Some(q) => Prob::Value(q),
                None => Prob::Default,
            }));
        }
        let first = render_name(first, first_arg);
        if self.peek() == Some('.') {
            self.bump();
            let (method, arg) = self.name()?;
            if method == "prb" {
                return Err(self.error("`prb` is reserved and cannot be used as a method"));
            }
            Ok(ActionOrPrb::Action(BasicAction::from_parts(Some(first), render_name(method, arg))))
        } else {
            Ok(ActionOrPrb::Action(BasicAction::from_parts(None, first)))
        }
    }

    /// identifier with an optional `(expr)` argument, no whitespace before `(`.
    fn name(&mut self) -> Result<(String, Option<Rational>), Error> {
        let ident = match self.ident() {
            Some(id) => id,
            None => {
                return Err(match self.peek() {
                    Some(c) => self.error(format!("expected an identifier, found `{c}`")),
                    None => self.error("expected an identifier, found end of input"),
                })
            }
        };
        if self.peek() == Some('(') {
            self.bump();
            let q = self.expr()?.eval();
            self.expect(')')?;
            Ok((ident, Some(q)))
        } else {
            Ok((ident, None))
        }
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<MeadowExpr, Error> {
        let mut e = self.term()?;
        loop {
            if self.eat('+') {
                e = MeadowExpr::Add(Box::new(e), Box::new(self.term()?));
            } else if self.eat('-') {
                e = MeadowExpr::Sub(Box::new(e), Box::new(self.term()?));
            } else {
                return Ok(e);
            }
        }
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> Result<MeadowExpr, Error> {
        let mut e = self.unary()?;
        loop {
            if self.eat('*') {
                e = MeadowExpr::Mul(Box::new(e), Box::new(self.unary()?));
            } else if self.next_is('/') && self.peek_at(1) != Some('/') {
                self.bump();
                e = MeadowExpr::Div(Box::new(e), Box::new(self.unary()?));
            } else {
                return Ok(e);
            }
        }
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<MeadowExpr, Error> {
        if self.eat('-') {
            Ok(MeadowExpr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    // power := atom ('^' unary)?
    fn power(&mut self) -> Result<MeadowExpr, Error> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        self.skip_trivia();
        let (line, column) = (self.line, self.column);
        let exponent = self.unary()?.eval();
        let n = exponent.as_natural().and_then(|n| n.to_u32()).filter(|n| *n <= MAX_EXPONENT);
        match n {
            Some(n) => Ok(MeadowExpr::PowNat(Box::new(base), n)),
            None => Err(Error::Parse(ParseError {
                line,
                column,
                message: format!("exponent must be a natural number up to {MAX_EXPONENT}, found {exponent}"),
            })),
        }
    }

    fn atom(&mut self) -> Result<MeadowExpr, Error> {
        self.skip_trivia();
        match self.peek() {
            Some(c) if c.is_ascii_digit() => {
                let n = self.integer_literal()?;
                if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
                    return Err(self.error("decimal literals are not supported; write a fraction"));
                }
                Ok(MeadowExpr::Numeral(n))
            }
            Some('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let (line, column) = (self.line, self.column);
                let name = self.ident().unwrap_or_default();
                let err = |message: String| Error::Parse(ParseError { line, column, message });
                match name.as_str() {
                    "sgn" => {
                        self.expect('(')?;
                        let e = self.expr()?;
                        self.expect(')')?;
                        Ok(MeadowExpr::Signum(Box::new(e)))
                    }
                    other if IRRATIONAL_FUNCTIONS.contains(&other) => Err(err(format!(
                        "`{other}` is not supported: probabilities must be exact rationals"
                    ))),
                    other => Err(err(format!("unknown function `{other}` in expression"))),
                }
            }
            Some(c) => Err(self.error(format!("expected a number, found `{c}`"))),
            None => Err(self.error("expected a number, found end of input")),
        }
    }

    fn integer_literal(&mut self) -> Result<BigUint, Error> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        let digits: String = self.chars[start..self.pos].iter().collect();
        digits.parse::<BigUint>().map_err(|_| self.error("expected a decimal literal"))
    }
}

enum ActionOrPrb {
    Action(BasicAction),
    Prb(Prob),
}

fn render_name(ident: String, arg: Option<Rational>) -> String {
    match arg {
        Some(q) => format!("{ident}({})", q.to_fraction_string()),
        None => ident,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::Instruction as I;

    fn instrs(text: &str) -> Vec<Instruction> {
        parse(text).unwrap().instructions().unwrap()
    }

    #[test]
    fn finite_program() {
        let list = instrs("-prb(2/3);#3;a;!;b;!");
        assert_eq!(list.len(), 6);
        assert_eq!(list[0], I::PrbNeg(Prob::Value(Rational::new(2, 3))));
        assert_eq!(list[1], I::Jump(3));
    }

    #[test]
    fn repetition_of_eight() {
        match parse("(+prb;#3;a;!;+prb;#3;b;!)*").unwrap() {
            Term::Rep(body) => assert_eq!(body.instructions().unwrap().len(), 8),
            other => panic!("expected repetition, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_jump() {
        assert_eq!(parse("#0").unwrap(), Term::Instr(I::Jump(0)));
    }

    #[test]
    fn jump_forms() {
        assert_eq!(instrs("#H{3}"), vec![I::JumpH(3)]);
        assert_eq!(instrs("#G{}{2}"), vec![I::JumpG(Prob::Default, 2)]);
        assert_eq!(instrs("#GU{1/3}{(1+1)}"), vec![I::JumpGU(Prob::Value(Rational::new(1, 3)), 2)]);
        assert_eq!(instrs("#(2*2)"), vec![I::Jump(4)]);
    }

    #[test]
    fn comments_and_whitespace() {
        let list = instrs("// header\n a ;\n  +f.m // trailing\n ; !");
        assert_eq!(list.len(), 3);
        assert_eq!(list[1].to_string(), "+f.m");
    }

    #[test]
    fn service_names_round_trip() {
        let list = instrs("+random(4/6).get;-random.get(1/2);random(1).get");
        assert_eq!(list[0].to_string(), "+random(2/3).get");
        assert_eq!(list[1].to_string(), "-random.get(1/2)");
        assert_eq!(list[2].to_string(), "random(1/1).get");
    }

    #[test]
    fn meadow_grammar() {
        assert_eq!(parse_rational("2/3").unwrap(), Rational::new(2, 3));
        assert_eq!(parse_rational("1/0").unwrap(), Rational::zero());
        assert_eq!(parse_rational("-2^2").unwrap(), Rational::from(-4i64));
        assert_eq!(parse_rational("(1/2)^3 + sgn(-7)").unwrap(), Rational::new(-7, 8));
        assert_eq!(parse_rational(" 1 - 1 / 3 ").unwrap(), Rational::new(2, 3));
    }

    #[test]
    fn errors_carry_positions() {
        match parse("a;\n  #;b") {
            Err(Error::Parse(e)) => assert_eq!((e.line, e.column), (2, 4)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_invalid_arguments() {
        assert!(parse("#H{2/3}").is_err());
        assert!(parse("#(-1)").is_err());
        assert!(parse("prb(sqrt(1+1))").is_err());
        assert!(parse("prb(0.5)").is_err());
        assert!(parse("[a;(b)*]").is_err());
        assert!(parse("[]").is_err());
        assert!(parse("a;").is_err());
        assert!(parse("prb.x").is_err());
        assert!(parse("2^2").is_err());
    }

    #[test]
    fn choice_and_units() {
        let t = parse("{a;b}+_(1/3){[c;#2]}").unwrap();
        match &t {
            Term::Choice { p, .. } => assert_eq!(*p, Rational::new(1, 3)),
            other => panic!("expected choice, got {other:?}"),
        }
        assert_eq!(t.to_string(), "{a;b}+_(1/3){[c;#2]}");
    }
}
