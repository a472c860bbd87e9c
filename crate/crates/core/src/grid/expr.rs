//! Closed-form boundary data: a tiny arithmetic expression language in `x`, `y`, `t`.
//!
//! ```text
//! expr    = term , { ( "+" | "-" ) , term } ;
//! term    = unary , { ( "*" | "/" ) , unary } ;
//! unary   = ( "-" | "+" ) , unary | power ;
//! power   = primary , [ "^" , unary ] ;
//! primary = number | name | call | "(" , expr , ")" ;
//! call    = func , "(" , expr , { "," , expr } , ")" ;
//! func    = "sin" | "cos" | "exp" | "abs" | "min" | "max" ;
//! name    = "x" | "y" | "t" | "pi" | "e" ;
//! number  = digit , { digit } , [ "." , { digit } ] , [ ( "e" | "E" ) , [ "+" | "-" ] , digit , { digit } ] ;
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)`. `min` and `max` take two or more arguments.

use std::sync::Arc;

use thiserror::Error;

use crate::equation::Field;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("unexpected character '{ch}' at offset {at}")]
    Char { ch: char, at: usize },
    #[error("unexpected {found} at offset {at}, expected {expected}")]
    Syntax { found: String, expected: &'static str, at: usize },
    #[error("unknown name '{0}'")]
    UnknownName(String),
    #[error("function {name} takes {expected} argument(s), got {got}")]
    Arity { name: String, expected: &'static str, got: usize },
    #[error("variable '{0}' is not available in {1} dimension(s)")]
    Dimension(String, usize),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Op(char),
    End,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (at, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|(_, d)| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            if i < chars.len() && matches!(chars[i].1, 'e' | 'E') {
                let mut j = i + 1;
                if j < chars.len() && matches!(chars[j].1, '+' | '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1.is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().map(|(_, c)| c).collect();
            let v = text.parse::<f64>().map_err(|_| ExprError::Char { ch: c, at })?;
            out.push((Tok::Num(v), at));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            out.push((Tok::Name(chars[start..i].iter().map(|(_, c)| c).collect()), at));
        } else if "+-*/^(),".contains(c) {
            out.push((Tok::Op(c), at));
            i += 1;
        } else if c == '·' {
            out.push((Tok::Op('*'), at));
            i += 1;
        } else {
            return Err(ExprError::Char { ch: c, at });
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Time,
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Min,
    Max,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn at(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &'static str) -> Result<T, ExprError> {
        let found = match self.peek() {
            Tok::Num(v) => format!("number {v}"),
            Tok::Name(s) => format!("'{s}'"),
            Tok::Op(c) => format!("'{c}'"),
            Tok::End => "end of input".into(),
        };
        Err(ExprError::Syntax { found, expected, at: self.at() })
    }

    fn expect(&mut self, c: char, expected: &'static str) -> Result<(), ExprError> {
        if *self.peek() == Tok::Op(c) {
            self.bump();
            Ok(())
        } else {
            self.fail(expected)
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            lhs = Node::Bin(c, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            lhs = Node::Bin(c, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match *self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            return Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Node::Num(v))
            }
            Tok::Op('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')', "')'")?;
                Ok(e)
            }
            Tok::Name(name) => {
                self.bump();
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "exp" => Some(Func::Exp),
                    "abs" => Some(Func::Abs),
                    "min" => Some(Func::Min),
                    "max" => Some(Func::Max),
                    _ => None,
                };
                if let Some(f) = func {
                    self.expect('(', "'(' after function name")?;
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Tok::Op(',') {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect(')', "')' or ','")?;
                    let ok = match f {
                        Func::Min | Func::Max => args.len() >= 2,
                        _ => args.len() == 1,
                    };
                    if !ok {
                        let expected = if matches!(f, Func::Min | Func::Max) { "at least 2" } else { "1" };
                        return Err(ExprError::Arity { name, expected, got: args.len() });
                    }
                    return Ok(Node::Call(f, args));
                }
                match name.as_str() {
                    "x" | "x1" => Ok(Node::Var(0)),
                    "y" | "x2" => Ok(Node::Var(1)),
                    "t" => Ok(Node::Time),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    _ => Err(ExprError::UnknownName(name)),
                }
            }
            _ => self.fail("a number, name or '('"),
        }
    }
}

impl Node {
    fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(i) => x[*i],
            Node::Time => t,
            Node::Neg(a) => -a.eval(x, t),
            Node::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, t), b.eval(x, t));
                match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    '/' => a / b,
                    _ => {
                        if b == 2.0 {
                            a * a
                        } else if b.fract() == 0.0 && b.abs() <= 64.0 {
                            a.powi(b as i32)
                        } else {
                            a.powf(b)
                        }
                    }
                }
            }
            Node::Call(f, args) => {
                let v = |i: usize| args[i].eval(x, t);
                match f {
                    Func::Sin => v(0).sin(),
                    Func::Cos => v(0).cos(),
                    Func::Exp => v(0).exp(),
                    Func::Abs => v(0).abs(),
                    Func::Min => args.iter().map(|a| a.eval(x, t)).fold(f64::INFINITY, f64::min),
                    Func::Max => args.iter().map(|a| a.eval(x, t)).fold(f64::NEG_INFINITY, f64::max),
                }
            }
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Node::Var(i) => Some(*i),
            Node::Neg(a) => a.max_var(),
            Node::Bin(_, a, b) => a.max_var().max(b.max_var()),
            Node::Call(_, args) => args.iter().filter_map(Node::max_var).max(),
            _ => None,
        }
    }
}

/// A parsed expression.
#[derive(Clone, Debug)]
pub struct Expr {
    source: String,
    root: Arc<Node>,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let mut p = Parser { toks: lex(src)?, pos: 0 };
        let root = p.expr()?;
        if *p.peek() != Tok::End {
            return p.fail("an operator or end of input");
        }
        Ok(Expr { source: src.to_string(), root: Arc::new(root) })
    }

    /// Checks that only variables of an `n`-dimensional space are used.
    pub fn check_dim(&self, n: usize) -> Result<(), ExprError> {
        match self.root.max_var() {
            Some(i) if i >= n => Err(ExprError::Dimension(if i == 0 { "x" } else { "y" }.into(), n)),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.root.eval(x, t)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn into_field(self) -> Field {
        let label = self.source.clone();
        Field::new(label, move |x, t| self.root.eval(x, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: &[f64], t: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x, t)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[0.0], 0.0), 7.0);
        assert_eq!(ev("-2^2", &[0.0], 0.0), -4.0);
        assert_eq!(ev("2^3^2", &[0.0], 0.0), 512.0);
        assert_eq!(ev("2^-1", &[0.0], 0.0), 0.5);
        assert_eq!(ev("8 / 4 / 2", &[0.0], 0.0), 1.0);
        assert_eq!(ev("10 - 4 - 3", &[0.0], 0.0), 3.0);
        assert_eq!(ev("(1 + 2) * 3", &[0.0], 0.0), 9.0);
        assert_eq!(ev("1.5e2 + .5", &[0.0], 0.0), 150.5);
        assert_eq!(ev("2·3", &[0.0], 0.0), 6.0);
    }

    #[test]
    fn variables_functions_constants() {
        assert_eq!(ev("x^2 - y^2 + t", &[3.0, 2.0], 1.0), 6.0);
        assert!((ev("sin(pi*(x+10)/20)", &[0.0], 0.0) - 1.0).abs() < 1e-15);
        assert_eq!(ev("max(x, 0, -1)", &[-3.0], 0.0), 0.0);
        assert_eq!(ev("min(abs(x), 2)", &[-3.0], 0.0), 2.0);
        assert_eq!(ev("exp(0) + cos(0)", &[0.0], 0.0), 2.0);
        assert_eq!(ev("e", &[0.0], 0.0), std::f64::consts::E);
        assert!(Expr::parse("2e").is_err());
    }

    #[test]
    fn errors_are_located() {
        assert!(matches!(Expr::parse("1 +"), Err(ExprError::Syntax { at: 3, .. })));
        assert!(matches!(Expr::parse("foo(1)"), Err(ExprError::UnknownName(_))));
        assert!(matches!(Expr::parse("sin(1, 2)"), Err(ExprError::Arity { .. })));
        assert!(matches!(Expr::parse("max(1)"), Err(ExprError::Arity { .. })));
        assert!(matches!(Expr::parse("1 $ 2"), Err(ExprError::Char { ch: '$', at: 2 })));
        assert!(matches!(Expr::parse("(1"), Err(ExprError::Syntax { .. })));
        assert!(Expr::parse("x + y").unwrap().check_dim(1).is_err());
        assert!(Expr::parse("x + t").unwrap().check_dim(1).is_ok());
    }
}
