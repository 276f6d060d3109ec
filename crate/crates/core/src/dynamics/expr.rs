//! Tiny arithmetic language for user potentials `U(x)`, differentiated
//! exactly with dual numbers.
//!
//! Grammar: numbers, the variable `x`, constants `pi` and `e`, `+ - * / ^`
//! (with `^` right-associative and binding tighter than unary minus), and
//! the functions `exp ln log sqrt sin cos tanh cosh sinh abs`.

use std::fmt;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dual {
    v: f64,
    d: f64,
}

impl Dual {
    fn constant(v: f64) -> Self {
        Self { v, d: 0.0 }
    }

    fn chain(self, v: f64, dv: f64) -> Self {
        Self { v, d: dv * self.d }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    X,
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Tanh,
    Cosh,
    Sinh,
    Abs,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "cosh" => Func::Cosh,
            "sinh" => Func::Sinh,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn apply(self, a: Dual) -> Dual {
        let x = a.v;
        match self {
            Func::Exp => a.chain(x.exp(), x.exp()),
            Func::Ln => a.chain(x.ln(), 1.0 / x),
            Func::Sqrt => a.chain(x.sqrt(), 0.5 / x.sqrt()),
            Func::Sin => a.chain(x.sin(), x.cos()),
            Func::Cos => a.chain(x.cos(), -x.sin()),
            Func::Tanh => a.chain(x.tanh(), 1.0 - x.tanh().powi(2)),
            Func::Cosh => a.chain(x.cosh(), x.sinh()),
            Func::Sinh => a.chain(x.sinh(), x.cosh()),
            Func::Abs => a.chain(x.abs(), if x >= 0.0 { 1.0 } else { -1.0 }),
        }
    }
}

/// A parsed potential.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut p = Parser { tokens, pos: 0 };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!("unexpected '{}' in expression '{source}'", p.tokens[p.pos])));
        }
        Ok(Self { source: source.to_string(), root })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval(&self.root, Dual { v: x, d: 1.0 }).v
    }

    /// `(U(x), U′(x))`.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let r = eval(&self.root, Dual { v: x, d: 1.0 });
        (r.v, r.d)
    }
}

fn eval(node: &Node, x: Dual) -> Dual {
    match node {
        Node::Num(v) => Dual::constant(*v),
        Node::X => x,
        Node::Neg(a) => {
            let a = eval(a, x);
            Dual { v: -a.v, d: -a.d }
        }
        Node::Call(f, a) => f.apply(eval(a, x)),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x), eval(b, x));
            match op {
                '+' => Dual { v: a.v + b.v, d: a.d + b.d },
                '-' => Dual { v: a.v - b.v, d: a.d - b.d },
                '*' => Dual { v: a.v * b.v, d: a.d * b.v + a.v * b.d },
                '/' => Dual { v: a.v / b.v, d: (a.d * b.v - a.v * b.d) / (b.v * b.v) },
                '^' => power(a, b),
                _ => unreachable!("parser only emits known operators"),
            }
        }
    }
}

fn power(a: Dual, b: Dual) -> Dual {
    if b.d == 0.0 && b.v.fract() == 0.0 && b.v.abs() < 1024.0 {
        let n = b.v as i32;
        let v = a.v.powi(n);
        let d = if n == 0 { 0.0 } else { b.v * a.v.powi(n - 1) * a.d };
        return Dual { v, d };
    }
    let v = a.v.powf(b.v);
    let log_term = if b.d == 0.0 { 0.0 } else { a.v.ln() * v * b.d };
    Dual { v, d: b.v * a.v.powf(b.v - 1.0) * a.d + log_term }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(v) => write!(f, "{v}"),
            Token::Ident(s) => f.write_str(s),
            Token::Op(c) => write!(f, "{c}"),
        }
    }
}

fn tokenize(s: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse().map_err(|_| Error::Parse(format!("bad number '{text}'")))?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character '{c}' at offset {i}")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Token::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                '+'
            } else if self.eat('-') {
                '-'
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                '*'
            } else if self.eat('/') {
                '/'
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self.tokens.get(self.pos).cloned().ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Node::Num(v)),
            Token::Op('(') => {
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(Error::Parse("missing ')'".into()));
                }
                Ok(e)
            }
            Token::Ident(name) => match name.as_str() {
                "x" => Ok(Node::X),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                "e" => Ok(Node::Num(std::f64::consts::E)),
                _ => {
                    let f = Func::lookup(&name).ok_or_else(|| Error::Parse(format!("unknown identifier '{name}'")))?;
                    if !self.eat('(') {
                        return Err(Error::Parse(format!("expected '(' after '{name}'")));
                    }
                    let arg = self.expr()?;
                    if !self.eat(')') {
                        return Err(Error::Parse("missing ')'".into()));
                    }
                    Ok(Node::Call(f, Box::new(arg)))
                }
            },
            Token::Op(c) => Err(Error::Parse(format!("unexpected '{c}'"))),
        }
    }
}
