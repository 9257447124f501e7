//! Expression syntax trees, the recursive-descent expression parser and the
//! canonical printer.

use std::fmt;

use crate::rational::Q;

use super::lexer::{Pos, Tok, Token};
use super::Diagnostic;

/// Derivative decoration on a name: `eta''` or `H[1,2]` (the bracket form
/// doubles as the multi-index of a jet coordinate `u[2,0,1]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Deriv {
    None,
    Primes(u8),
    Orders(Vec<u8>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AstKind {
    Num(Q),
    Ref { name: String, deriv: Deriv },
    Call { name: String, deriv: Deriv, args: Vec<Ast> },
    Neg(Box<Ast>),
    Bin(BinOp, Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, Box<Ast>),
}

/// Expression node. Equality ignores source positions.
#[derive(Debug, Clone)]
pub struct Ast {
    pub kind: AstKind,
    pub pos: Pos,
}

impl PartialEq for Ast {
    fn eq(&self, o: &Ast) -> bool {
        self.kind == o.kind
    }
}

impl Ast {
    pub fn new(kind: AstKind, pos: Pos) -> Ast {
        Ast { kind, pos }
    }

    pub fn ident(&self) -> Option<&str> {
        match &self.kind {
            AstKind::Ref { name, deriv: Deriv::None } => Some(name),
            _ => None,
        }
    }

    fn prec(&self) -> u8 {
        match &self.kind {
            AstKind::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            AstKind::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            AstKind::Num(q) if !q.is_integer() => 2,
            AstKind::Neg(_) => 3,
            AstKind::Pow(..) => 4,
            _ => 5,
        }
    }
}

fn write_deriv(f: &mut fmt::Formatter<'_>, d: &Deriv) -> fmt::Result {
    match d {
        Deriv::None => Ok(()),
        Deriv::Primes(k) => f.write_str(&"'".repeat(*k as usize)),
        Deriv::Orders(o) => {
            let s: Vec<String> = o.iter().map(|k| k.to_string()).collect();
            write!(f, "[{}]", s.join(","))
        }
    }
}

fn wrap(f: &mut fmt::Formatter<'_>, a: &Ast, min: u8) -> fmt::Result {
    if a.prec() < min {
        write!(f, "({a})")
    } else {
        write!(f, "{a}")
    }
}

impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            AstKind::Num(q) => write!(f, "{q}"),
            AstKind::Ref { name, deriv } => {
                f.write_str(name)?;
                write_deriv(f, deriv)
            }
            AstKind::Call { name, deriv, args } => {
                f.write_str(name)?;
                write_deriv(f, deriv)?;
                f.write_str("(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            AstKind::Neg(a) => {
                f.write_str("-")?;
                wrap(f, a, 3)
            }
            AstKind::Bin(op, a, b) => {
                let (p, s) = match op {
                    BinOp::Add => (1, " + "),
                    BinOp::Sub => (1, " - "),
                    BinOp::Mul => (2, "*"),
                    BinOp::Div => (2, "/"),
                };
                wrap(f, a, p)?;
                f.write_str(s)?;
                wrap(f, b, p + 1)
            }
            AstKind::Pow(a, b) => {
                wrap(f, a, 5)?;
                f.write_str("^")?;
                wrap(f, b, 3)
            }
        }
    }
}

/// Cursor over one statement's tokens.
pub struct Cursor<'a> {
    toks: &'a [Token],
    i: usize,
    end: Pos,
}

impl<'a> Cursor<'a> {
    pub fn new(toks: &'a [Token], end: Pos) -> Self {
        Cursor { toks, i: 0, end }
    }

    pub fn peek(&self) -> &Tok {
        self.toks.get(self.i).map(|t| &t.tok).unwrap_or(&Tok::End)
    }

    pub fn peek_at(&self, k: usize) -> &Tok {
        self.toks.get(self.i + k).map(|t| &t.tok).unwrap_or(&Tok::End)
    }

    pub fn pos(&self) -> Pos {
        self.toks.get(self.i).map(|t| t.pos).unwrap_or(self.end)
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.peek().clone();
        if self.i < self.toks.len() {
            self.i += 1;
        }
        t
    }

    pub fn at_end(&self) -> bool {
        self.i >= self.toks.len()
    }

    pub fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn unexpected(&self, expected: &[&str]) -> Diagnostic {
        Diagnostic::new(self.pos(), format!("unexpected {}", self.peek().describe()))
            .expecting(expected.iter().map(|s| s.to_string()).collect())
    }

    pub fn expect(&mut self, t: &Tok) -> Result<(), Diagnostic> {
        if self.eat(t) {
            Ok(())
        } else {
            let want = format!("'{}'", t.symbol());
            Err(self.unexpected(&[&want]))
        }
    }

    pub fn ident(&mut self) -> Result<(String, Pos), Diagnostic> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok((s, pos))
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    pub fn finish(&self) -> Result<(), Diagnostic> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.unexpected(&["operator", "end of statement"]))
        }
    }

    pub fn small_int(&mut self) -> Result<u8, Diagnostic> {
        let pos = self.pos();
        match self.bump() {
            Tok::Number(s) => {
                s.parse::<u8>().map_err(|_| Diagnostic::new(pos, format!("'{s}' is not a small non-negative integer")))
            }
            _ => Err(Diagnostic::new(pos, "expected an integer").expecting(vec!["integer".into()])),
        }
    }

    /// A bare name with an optional derivative decoration.
    pub fn expr_head(&mut self) -> Result<Ast, Diagnostic> {
        let (name, pos) = self.ident()?;
        let deriv = self.deriv()?;
        Ok(Ast::new(AstKind::Ref { name, deriv }, pos))
    }

    /// expr := term (('+' | '-') term)*
    pub fn expr(&mut self) -> Result<Ast, Diagnostic> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let pos = self.pos();
            self.bump();
            let rhs = self.term()?;
            lhs = Ast::new(AstKind::Bin(op, Box::new(lhs), Box::new(rhs)), pos);
        }
    }

    fn term(&mut self) -> Result<Ast, Diagnostic> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            let pos = self.pos();
            self.bump();
            let rhs = self.unary()?;
            lhs = Ast::new(AstKind::Bin(op, Box::new(lhs), Box::new(rhs)), pos);
        }
    }

    fn unary(&mut self) -> Result<Ast, Diagnostic> {
        if self.peek() == &Tok::Minus {
            let pos = self.pos();
            self.bump();
            let a = self.unary()?;
            return Ok(Ast::new(AstKind::Neg(Box::new(a)), pos));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast, Diagnostic> {
        let base = self.primary()?;
        if self.peek() == &Tok::Caret {
            let pos = self.pos();
            self.bump();
            let e = self.unary()?;
            return Ok(Ast::new(AstKind::Pow(Box::new(base), Box::new(e)), pos));
        }
        Ok(base)
    }

    fn deriv(&mut self) -> Result<Deriv, Diagnostic> {
        if self.peek() == &Tok::Prime {
            let mut k = 0u8;
            while self.eat(&Tok::Prime) {
                k = k.saturating_add(1);
            }
            return Ok(Deriv::Primes(k));
        }
        if self.peek() == &Tok::LBracket {
            self.bump();
            let mut o = vec![self.small_int()?];
            while self.eat(&Tok::Comma) {
                o.push(self.small_int()?);
            }
            self.expect(&Tok::RBracket)?;
            return Ok(Deriv::Orders(o));
        }
        Ok(Deriv::None)
    }

    fn primary(&mut self) -> Result<Ast, Diagnostic> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Number(s) => {
                self.bump();
                Ok(Ast::new(AstKind::Num(parse_decimal(&s)), pos))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                let deriv = self.deriv()?;
                if self.peek() == &Tok::LParen {
                    self.bump();
                    let mut args = Vec::new();
                    if self.peek() != &Tok::RParen {
                        args.push(self.expr()?);
                        while self.eat(&Tok::Comma) {
                            args.push(self.expr()?);
                        }
                    }
                    if self.peek() != &Tok::RParen {
                        return Err(self.unexpected(&["','", "')'"]));
                    }
                    self.bump();
                    return Ok(Ast::new(AstKind::Call { name, deriv, args }, pos));
                }
                Ok(Ast::new(AstKind::Ref { name, deriv }, pos))
            }
            _ => Err(self.unexpected(&["number", "identifier", "'('", "'-'"])),
        }
    }
}

/// Exact value of a decimal literal.
pub fn parse_decimal(s: &str) -> Q {
    match s.split_once('.') {
        None => Q::parse_int(s),
        Some((a, b)) => {
            let digits = format!("{a}{b}");
            let den = Q::parse_int(&format!("1{}", "0".repeat(b.len())));
            &Q::parse_int(&digits) / &den
        }
    }
}

/// Parses a complete expression from a token run.
pub fn parse_expr(toks: &[Token], end: Pos) -> Result<Ast, Diagnostic> {
    let mut c = Cursor::new(toks, end);
    let e = c.expr()?;
    c.finish()?;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::lexer::lex_line;

    fn parse(s: &str) -> Result<Ast, Diagnostic> {
        let toks = lex_line(s, 1, 1).unwrap();
        parse_expr(&toks, Pos { line: 1, col: s.len() + 1 })
    }

    #[test]
    fn precedence_and_printing() {
        let a = parse("u*u_xx + u_x^2 - -u_yy/(1 + x)").unwrap();
        assert_eq!(a.to_string(), "u*u_xx + u_x^2 - -u_yy/(1 + x)");
        let b = parse("(1/6)*eta(u_xx)*u_xt^2").unwrap();
        assert_eq!(b.to_string(), "1/6*eta(u_xx)*u_xt^2");
        let c = parse("a - (b - c)").unwrap();
        assert_eq!(c.to_string(), "a - (b - c)");
        let d = parse("2^-1 + x^y^z + (-x)^2").unwrap();
        assert_eq!(d.to_string(), "2^-1 + x^y^z + (-x)^2");
    }

    #[test]
    fn derivative_decorations() {
        let a = parse("eta'''(u_xx) + H[1,2](v, w) + u[2,0,1] + eta''").unwrap();
        assert_eq!(a.to_string(), "eta'''(u_xx) + H[1,2](v, w) + u[2,0,1] + eta''");
    }

    #[test]
    fn trailing_operator_is_located() {
        let e = parse("u_xx +").unwrap_err();
        assert_eq!((e.pos.line, e.pos.col), (1, 7));
        assert!(e.expected.iter().any(|s| s == "identifier"));
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse_decimal("0.25"), Q::new(1, 4));
        assert_eq!(parse_decimal("12"), Q::int(12));
    }
}
