//! Potential expressions over `q1..qn` and `|q|`.
//!
//! Grammar (whitespace-insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' factor)?
//! base   := number | 'q' index | '|q|' | func '(' expr ')' | '(' expr ')'
//! func   := exp | log | sin | cos | sqrt | abs
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-q1^2`
//! is `-(q1^2)` and `2^3^2` is `2^(3^2)`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Func {
    const ALL: [Func; 6] = [Func::Exp, Func::Log, Func::Sin, Func::Cos, Func::Sqrt, Func::Abs];

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Syntax tree of a potential expression. Variable indices are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Const(f64),
    Var(usize),
    Norm,
    Neg(Box<ExprAst>),
    Binary(BinOp, Box<ExprAst>, Box<ExprAst>),
    Call(Func, Box<ExprAst>),
}

impl fmt::Display for ExprAst {
    /// Fully parenthesised form that re-parses to an equivalent tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprAst::Const(c) => write!(f, "{c:?}"),
            ExprAst::Var(i) => write!(f, "q{}", i + 1),
            ExprAst::Norm => f.write_str("|q|"),
            ExprAst::Neg(e) => write!(f, "(-{e})"),
            ExprAst::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            ExprAst::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

/// First-order dual number `re + du * eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub re: f64,
    pub du: f64,
}

impl Dual {
    pub fn constant(re: f64) -> Self {
        Self { re, du: 0.0 }
    }
}

fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

impl ExprAst {
    /// Evaluates the expression and its directional derivative along `dir`.
    pub fn eval_dual(&self, q: &[f64], dir: &[f64]) -> Result<Dual> {
        let out = match self {
            ExprAst::Const(c) => Dual::constant(*c),
            ExprAst::Var(i) => Dual { re: q[*i], du: dir[*i] },
            ExprAst::Norm => {
                let r = q.iter().map(|x| x * x).sum::<f64>().sqrt();
                let du = if r > 0.0 { q.iter().zip(dir).map(|(x, d)| x * d).sum::<f64>() / r } else { 0.0 };
                Dual { re: r, du }
            }
            ExprAst::Neg(e) => {
                let a = e.eval_dual(q, dir)?;
                Dual { re: -a.re, du: -a.du }
            }
            ExprAst::Binary(op, l, r) => {
                let a = l.eval_dual(q, dir)?;
                let b = r.eval_dual(q, dir)?;
                binary(*op, a, b)?
            }
            ExprAst::Call(func, e) => call(*func, e.eval_dual(q, dir)?)?,
        };
        if !out.re.is_finite() || !out.du.is_finite() {
            return Err(domain(format!("non-finite value while evaluating {self}")));
        }
        Ok(out)
    }

    /// Evaluates the expression value only.
    pub fn eval(&self, q: &[f64]) -> Result<f64> {
        let zeros = vec![0.0; q.len()];
        self.eval_dual(q, &zeros).map(|d| d.re)
    }

    /// Largest variable index used, 0-based.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            ExprAst::Var(i) => Some(*i),
            ExprAst::Const(_) | ExprAst::Norm => None,
            ExprAst::Neg(e) | ExprAst::Call(_, e) => e.max_var(),
            ExprAst::Binary(_, a, b) => a.max_var().max(b.max_var()),
        }
    }
}

fn binary(op: BinOp, a: Dual, b: Dual) -> Result<Dual> {
    Ok(match op {
        BinOp::Add => Dual { re: a.re + b.re, du: a.du + b.du },
        BinOp::Sub => Dual { re: a.re - b.re, du: a.du - b.du },
        BinOp::Mul => Dual { re: a.re * b.re, du: a.du * b.re + a.re * b.du },
        BinOp::Div => {
            if b.re == 0.0 {
                return Err(domain("division by zero"));
            }
            Dual { re: a.re / b.re, du: (a.du * b.re - a.re * b.du) / (b.re * b.re) }
        }
        BinOp::Pow => pow(a, b)?,
    })
}

fn pow(a: Dual, b: Dual) -> Result<Dual> {
    if b.du == 0.0 {
        // Constant exponent along this direction: x^c, valid for negative x
        // when c is an integer.
        let c = b.re;
        if a.re < 0.0 && c.fract() != 0.0 {
            return Err(domain(format!("{} raised to non-integer power {c}", a.re)));
        }
        if a.re == 0.0 && c < 0.0 {
            return Err(domain("zero raised to a negative power"));
        }
        let re = a.re.powf(c);
        let du = if a.du == 0.0 || c == 0.0 {
            0.0
        } else if a.re == 0.0 && c < 1.0 {
            return Err(domain(format!("x^{c} is not differentiable at x = 0")));
        } else {
            c * a.re.powf(c - 1.0) * a.du
        };
        return Ok(Dual { re, du });
    }
    if a.re <= 0.0 {
        return Err(domain(format!("variable exponent needs a positive base, got {}", a.re)));
    }
    let re = a.re.powf(b.re);
    let du = re * (b.du * a.re.ln() + b.re * a.du / a.re);
    Ok(Dual { re, du })
}

fn call(func: Func, a: Dual) -> Result<Dual> {
    Ok(match func {
        Func::Exp => {
            let e = a.re.exp();
            Dual { re: e, du: a.du * e }
        }
        Func::Log => {
            if a.re <= 0.0 {
                return Err(domain(format!("log of non-positive value {}", a.re)));
            }
            Dual { re: a.re.ln(), du: a.du / a.re }
        }
        Func::Sin => Dual { re: a.re.sin(), du: a.du * a.re.cos() },
        Func::Cos => Dual { re: a.re.cos(), du: -a.du * a.re.sin() },
        Func::Sqrt => {
            if a.re < 0.0 {
                return Err(domain(format!("sqrt of negative value {}", a.re)));
            }
            let s = a.re.sqrt();
            let du = if a.du == 0.0 {
                0.0
            } else if s == 0.0 {
                return Err(domain("sqrt is not differentiable at 0"));
            } else {
                0.5 * a.du / s
            };
            Dual { re: s, du }
        }
        Func::Abs => Dual { re: a.re.abs(), du: if a.re == 0.0 { 0.0 } else { a.du * a.re.signum() } },
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Sym(c) => format!("'{c}'"),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
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
            let value = text.parse::<f64>().map_err(|_| Error::Parse {
                position: pos,
                expected: vec!["number".into()],
                found: format!("'{text}'"),
            })?;
            out.push((Tok::Num(value), pos));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
        } else if "+-*/^()|".contains(c) {
            out.push((Tok::Sym(c), pos));
            i += 1;
        } else {
            return Err(Error::Parse {
                position: pos,
                expected: vec!["operator, operand or parenthesis".into()],
                found: format!("'{c}'"),
            });
        }
    }
    out.push((Tok::End, chars.len() + 1));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    dim: usize,
}

const OPERAND: [&str; 5] = ["number", "variable q<i>", "|q|", "function", "'('"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> Error {
        Error::Parse {
            position: self.pos(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn expect_sym(&mut self, c: char, opened_at: Option<usize>) -> Result<()> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            return Ok(());
        }
        let quoted = format!("'{c}'");
        match opened_at {
            Some(open) if *self.peek() == Tok::End => Err(Error::Parse {
                position: open,
                expected: vec![quoted],
                found: "end of input (unclosed parenthesis)".into(),
            }),
            _ => Err(self.error(&[quoted.as_str()])),
        }
    }

    fn expr(&mut self) -> Result<ExprAst> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<ExprAst> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(self.factor()?));
        }
    }

    fn factor(&mut self) -> Result<ExprAst> {
        if *self.peek() == Tok::Sym('-') {
            self.bump();
            return Ok(ExprAst::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if *self.peek() == Tok::Sym('^') {
            self.bump();
            let exponent = self.factor()?;
            return Ok(ExprAst::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<ExprAst> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(ExprAst::Const(x))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(')', Some(pos))?;
                Ok(e)
            }
            Tok::Sym('|') => {
                self.bump();
                if *self.peek() != Tok::Ident("q".into()) {
                    return Err(self.error(&["'q'"]));
                }
                self.bump();
                self.expect_sym('|', None)?;
                Ok(ExprAst::Norm)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.bump();
                    let open = self.pos();
                    self.expect_sym('(', None)?;
                    let e = self.expr()?;
                    self.expect_sym(')', Some(open))?;
                    return Ok(ExprAst::Call(func, Box::new(e)));
                }
                let index = name
                    .strip_prefix('q')
                    .filter(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
                    .and_then(|rest| rest.parse::<usize>().ok());
                match index {
                    Some(i) if i >= 1 && i <= self.dim => {
                        self.bump();
                        Ok(ExprAst::Var(i - 1))
                    }
                    Some(i) => Err(Error::BadIndex { index: i, dim: self.dim }),
                    None => Err(self.error(&OPERAND)),
                }
            }
            _ => Err(self.error(&OPERAND)),
        }
    }
}

/// Parses a potential expression over `dim` variables.
pub fn parse_expr(src: &str, dim: usize) -> Result<ExprAst> {
    let toks = lex(src)?;
    let mut p = Parser { toks, at: 0, dim };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.error(&["operator", "end of input"]));
    }
    Ok(e)
}
