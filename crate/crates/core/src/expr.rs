//! Small closed expression grammar for initial and boundary data.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := ('-' | '+') unary | power
//! power  := atom ('^' unary)?
//! atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Variables are `x`, `y`, `t`; constants `pi`, `e`, `inf`. Functions:
//! `sin cos tan tanh exp ln sqrt abs sign min max step` and
//! `pwl(s, x0, y0, x1, y1, ...)`, a piecewise-linear table in `s` with
//! strictly increasing knots, held constant outside its range.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("expression error at byte {pos}: {message}")]
pub struct ExprError {
    pub pos: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    X,
    Y,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Tanh,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sign,
    Step,
    Min,
    Max,
    Pwl,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

/// A parsed expression that remembers its source text.
#[derive(Clone)]
pub struct Expr {
    source: String,
    root: Node,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Expr::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self, ExprError> {
        let mut p = Parser {
            src: source.as_bytes(),
            pos: 0,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Self {
            source: source.trim().to_string(),
            root,
        })
    }

    pub fn constant(value: f64) -> Self {
        let source = if value == f64::INFINITY {
            "inf".to_string()
        } else if value == f64::NEG_INFINITY {
            "-inf".to_string()
        } else {
            format!("{value:?}")
        };
        Self::parse(&source).expect("formatted constants always parse")
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Value if the expression does not depend on any variable.
    pub fn as_constant(&self) -> Option<f64> {
        fn uses_vars(n: &Node) -> bool {
            match n {
                Node::Num(_) => false,
                Node::Var(_) => true,
                Node::Neg(a) => uses_vars(a),
                Node::Bin(_, a, b) => uses_vars(a) || uses_vars(b),
                Node::Call(_, args) => args.iter().any(uses_vars),
            }
        }
        if uses_vars(&self.root) {
            None
        } else {
            Some(self.eval(0.0, 0.0, 0.0))
        }
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        eval(&self.root, x, y, t)
    }
}

fn eval(n: &Node, x: f64, y: f64, t: f64) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(Var::X) => x,
        Node::Var(Var::Y) => y,
        Node::Var(Var::T) => t,
        Node::Neg(a) => -eval(a, x, y, t),
        Node::Bin(op, a, b) => {
            let a = eval(a, x, y, t);
            let b = eval(b, x, y, t);
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                '^' => {
                    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
                        a.powi(b as i32)
                    } else {
                        a.powf(b)
                    }
                }
                _ => unreachable!("parser only emits known operators"),
            }
        }
        Node::Call(f, args) => {
            let arg = |k: usize| eval(&args[k], x, y, t);
            match f {
                Func::Sin => arg(0).sin(),
                Func::Cos => arg(0).cos(),
                Func::Tan => arg(0).tan(),
                Func::Tanh => arg(0).tanh(),
                Func::Exp => arg(0).exp(),
                Func::Ln => arg(0).ln(),
                Func::Sqrt => arg(0).sqrt(),
                Func::Abs => arg(0).abs(),
                Func::Sign => {
                    let v = arg(0);
                    if v > 0.0 {
                        1.0
                    } else if v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                }
                Func::Step => {
                    if arg(0) >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Func::Min => arg(0).min(arg(1)),
                Func::Max => arg(0).max(arg(1)),
                Func::Pwl => {
                    let s = arg(0);
                    let knots: Vec<(f64, f64)> =
                        (1..args.len()).step_by(2).map(|k| (arg(k), arg(k + 1))).collect();
                    piecewise_linear(&knots, s)
                }
            }
        }
    }
}

fn piecewise_linear(knots: &[(f64, f64)], s: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if s <= first.0 {
        return first.1;
    }
    if s >= last.0 {
        return last.1;
    }
    let j = knots.partition_point(|k| k.0 <= s) - 1;
    let (xa, ya) = knots[j];
    let (xb, yb) = knots[j + 1];
    ya + (yb - ya) * (s - xa) / (xb - xa)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, message: &str) -> ExprError {
        ExprError {
            pos: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => '+',
                Some(b'-') => '-',
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => '*',
                Some(b'/') => '/',
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(self.err("unexpected end of expression")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.name(),
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        text.parse::<f64>().map(Node::Num).map_err(|_| ExprError {
            pos: start,
            message: format!("invalid number '{text}'"),
        })
    }

    fn name(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii slice");
        let func = match name {
            "x" => return Ok(Node::Var(Var::X)),
            "y" => return Ok(Node::Var(Var::Y)),
            "t" => return Ok(Node::Var(Var::T)),
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            "inf" => return Ok(Node::Num(f64::INFINITY)),
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "tanh" => Func::Tanh,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            "step" => Func::Step,
            "min" => Func::Min,
            "max" => Func::Max,
            "pwl" => Func::Pwl,
            _ => {
                return Err(ExprError {
                    pos: start,
                    message: format!("unknown name '{name}'"),
                })
            }
        };
        if !self.eat(b'(') {
            return Err(self.err("expected '(' after function name"));
        }
        let mut args = vec![self.expr()?];
        while self.eat(b',') {
            args.push(self.expr()?);
        }
        if !self.eat(b')') {
            return Err(self.err("expected ')'"));
        }
        let arity_ok = match func {
            Func::Min | Func::Max => args.len() == 2,
            Func::Pwl => args.len() >= 3 && args.len() % 2 == 1,
            _ => args.len() == 1,
        };
        if !arity_ok {
            return Err(ExprError {
                pos: start,
                message: format!("wrong number of arguments for '{name}'"),
            });
        }
        if func == Func::Pwl {
            let knots: Vec<f64> = args[1..]
                .iter()
                .step_by(2)
                .map(|n| eval(n, 0.0, 0.0, 0.0))
                .collect();
            if knots.windows(2).any(|w| w[1] <= w[0]) {
                return Err(ExprError {
                    pos: start,
                    message: "pwl knots must be strictly increasing constants".to_string(),
                });
            }
        }
        Ok(Node::Call(func, args))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64, t: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x, 0.0, t)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("-2^2", 0.0, 0.0), -4.0);
        assert_eq!(ev("2^3^2", 0.0, 0.0), 512.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(ev("x*(1-x)/2", 0.5, 0.0), 0.125);
        assert_eq!(ev("1e-3 * 2", 0.0, 0.0), 2e-3);
        assert_eq!(ev("2.5E+1", 0.0, 0.0), 25.0);
    }

    #[test]
    fn functions() {
        assert!((ev("sin(pi*x)", 0.5, 0.0) - 1.0).abs() < 1e-15);
        assert!((ev("exp(-pi^2*t)", 0.0, 1.0) - (-std::f64::consts::PI.powi(2)).exp()).abs() < 1e-15);
        assert_eq!(ev("max(x, 0.2)", 0.1, 0.0), 0.2);
        assert_eq!(ev("step(x - 0.5)", 0.5, 0.0), 1.0);
        assert_eq!(ev("sign(x)", -3.0, 0.0), -1.0);
    }

    #[test]
    fn piecewise_linear_tables() {
        let e = Expr::parse("pwl(x, 0, 0, 1, 2, 2, 0)").unwrap();
        assert_eq!(e.eval(-1.0, 0.0, 0.0), 0.0);
        assert_eq!(e.eval(0.5, 0.0, 0.0), 1.0);
        assert_eq!(e.eval(1.5, 0.0, 0.0), 1.0);
        assert_eq!(e.eval(5.0, 0.0, 0.0), 0.0);
        assert!(Expr::parse("pwl(x, 1, 0, 0, 1)").is_err());
        assert!(Expr::parse("pwl(x, 1, 0, 2)").is_err());
    }

    #[test]
    fn errors_carry_positions() {
        let err = Expr::parse("1 + foo(x)").unwrap_err();
        assert_eq!(err.pos, 4);
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("sin(1, 2)").is_err());
    }

    #[test]
    fn constants() {
        assert_eq!(Expr::parse("2*pi").unwrap().as_constant(), Some(2.0 * std::f64::consts::PI));
        assert_eq!(Expr::parse("x").unwrap().as_constant(), None);
        assert_eq!(Expr::constant(0.1).as_constant(), Some(0.1));
        assert_eq!(Expr::constant(f64::NEG_INFINITY).as_constant(), Some(f64::NEG_INFINITY));
    }
}
