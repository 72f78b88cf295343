//! Small expression language for graph surfaces, evaluated in jet arithmetic.
//!
//! Variables `s` and `t` (aliases `u`, `v`), constants `pi` and `e`, the
//! operators `+ - * / ^` and the functions `sin cos tan exp ln log sqrt sinh
//! cosh tanh atan abs`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::{Jet, JetLayout};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
    Atan,
    Abs,
}

impl Func {
    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "tan" => Self::Tan,
            "exp" => Self::Exp,
            "ln" | "log" => Self::Ln,
            "sqrt" => Self::Sqrt,
            "sinh" => Self::Sinh,
            "cosh" => Self::Cosh,
            "tanh" => Self::Tanh,
            "atan" => Self::Atan,
            "abs" => Self::Abs,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let cs: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let st = i;
            while i < cs.len() && (cs[i].is_ascii_digit() || cs[i] == '.') {
                i += 1;
            }
            if i < cs.len() && (cs[i] == 'e' || cs[i] == 'E') {
                let mut j = i + 1;
                if j < cs.len() && (cs[j] == '+' || cs[j] == '-') {
                    j += 1;
                }
                if j < cs.len() && cs[j].is_ascii_digit() {
                    i = j;
                    while i < cs.len() && cs[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = cs[st..i].iter().collect();
            let v = s.parse().map_err(|_| Error::Expression(format!("bad number '{s}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let st = i;
            while i < cs.len() && (cs[i].is_ascii_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(cs[st..i].iter().collect()));
        } else if "+-*/^()".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.toks.get(self.pos) {
            Some(Tok::Op(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Expression(format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let tok = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Expression("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek_op() == Some('(') {
                    let f = Func::from_name(&name)
                        .ok_or_else(|| Error::Expression(format!("unknown function '{name}'")))?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "s" | "u" => Ok(Expr::Var(0)),
                    "t" | "v" => Ok(Expr::Var(1)),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    "e" => Ok(Expr::Num(std::f64::consts::E)),
                    _ => Err(Error::Expression(format!("unknown identifier '{name}'"))),
                }
            }
            Tok::Op(c) => Err(Error::Expression(format!("unexpected '{c}'"))),
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { toks: lex(src)?, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return Err(Error::Expression(format!("trailing input in '{src}'")));
        }
        Ok(e)
    }

    /// Evaluates with `vars[k]` bound to variable `k`.
    pub fn eval(&self, vars: &[Jet]) -> Jet {
        let l: &Arc<JetLayout> = vars[0].layout();
        let d = vars[0].deg();
        match self {
            Expr::Num(v) => Jet::constant(l, d, *v),
            Expr::Var(k) => vars[*k].clone(),
            Expr::Neg(a) => -a.eval(vars),
            Expr::Bin(op, a, b) => {
                let x = a.eval(vars);
                match op {
                    '+' => &x + &b.eval(vars),
                    '-' => &x - &b.eval(vars),
                    '*' => &x * &b.eval(vars),
                    '/' => &x / &b.eval(vars),
                    _ => match **b {
                        Expr::Num(p) if p.fract() == 0.0 && p.abs() < 64.0 => x.powi(p as i32),
                        Expr::Num(p) => x.powf(p),
                        _ => (&x.ln() * &b.eval(vars)).exp(),
                    },
                }
            }
            Expr::Call(f, a) => {
                let x = a.eval(vars);
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Tan => x.tan(),
                    Func::Exp => x.exp(),
                    Func::Ln => x.ln(),
                    Func::Sqrt => x.sqrt(),
                    Func::Sinh => x.sinh(),
                    Func::Cosh => x.cosh(),
                    Func::Tanh => x.tanh(),
                    Func::Atan => x.atan(),
                    Func::Abs => x.abs(),
                }
            }
        }
    }

    pub fn eval_f64(&self, s: f64, t: f64) -> f64 {
        let l = crate::jet::layout(2, 0);
        let v = [Jet::constant(&l, 0, s), Jet::constant(&l, 0, t)];
        self.eval(&v).value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet;

    #[test]
    fn precedence_and_functions() {
        let e = Expr::parse("1 + 2*s^2 - -t/4").unwrap();
        assert_eq!(e.eval_f64(3.0, 2.0), 1.0 + 18.0 + 0.5);
        let e = Expr::parse("2^3^2").unwrap();
        assert!((e.eval_f64(0.0, 0.0) - 512.0).abs() < 1e-12);
        let e = Expr::parse("sin(pi/2)*exp(0) + sqrt(4) + 1.5e1").unwrap();
        assert!((e.eval_f64(0.0, 0.0) - 18.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(Expr::parse("s +").is_err());
        assert!(Expr::parse("foo(s)").is_err());
        assert!(Expr::parse("(s").is_err());
        assert!(Expr::parse("s $ t").is_err());
        assert!(Expr::parse("x").is_err());
    }

    #[test]
    fn derivatives_through_jets() {
        let l = jet::layout(2, 3);
        let e = Expr::parse("s^2*t + sin(s*t)").unwrap();
        let v = [Jet::variable(&l, 3, 0, 0.5), Jet::variable(&l, 3, 1, 2.0)];
        let r = e.eval(&v);
        // ∂s∂t = 2s + cos(st) − st sin(st)
        let want = 1.0 + 1.0f64.cos() - 1.0f64.sin();
        assert!((r.derivative(&[1, 1]) - want).abs() < 1e-14);
    }
}
