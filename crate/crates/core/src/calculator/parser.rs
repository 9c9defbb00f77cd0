//! Tokenizer and recursive-descent parser for the calculator grammar.
//!
//! ```text
//! expr       := sum (cmp_op sum)*
//! sum        := term (("+" | "-") term)*
//! term       := unary (("*" | "/" | "//" | "%") unary)*
//! unary      := ("-" | "+") unary | power
//! power      := atom ("**" unary)?
//! atom       := NUMBER | "(" expr ")" | FUNC "(" [arg ("," arg)* [","]] ")"
//! arg        := "[" [expr ("," expr)* [","]] "]" | expr
//! FUNC       := "min" | "max" | "sum" | "abs" | "round"
//! ```
//!
//! Anything else (names, strings, attribute access, subscripts, assignment,
//! bitwise operators) is rejected before evaluation.

use super::{BinOp, CalcError, CmpOp, Expr, Func};

pub const MAX_DEPTH: usize = 32;
pub const MAX_NODES: usize = 512;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    StarStar,
    Slash,
    SlashSlash,
    Percent,
    Cmp(CmpOp),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
}

fn lex(src: &str) -> Result<Vec<Tok>, CalcError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let forbidden = |what: &str| Err(CalcError::Forbidden(what.to_string()));
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let (value, next) = lex_number(&chars, i)?;
            out.push(Tok::Num(value));
            i = next;
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, width) = match (c, next) {
            ('*', Some('*')) => (Tok::StarStar, 2),
            ('/', Some('/')) => (Tok::SlashSlash, 2),
            ('<', Some('=')) => (Tok::Cmp(CmpOp::Le), 2),
            ('>', Some('=')) => (Tok::Cmp(CmpOp::Ge), 2),
            ('=', Some('=')) => (Tok::Cmp(CmpOp::Eq), 2),
            ('!', Some('=')) => (Tok::Cmp(CmpOp::Ne), 2),
            ('<', Some('<')) | ('>', Some('>')) => return forbidden("shift operator"),
            ('<', _) => (Tok::Cmp(CmpOp::Lt), 1),
            ('>', _) => (Tok::Cmp(CmpOp::Gt), 1),
            ('+', _) => (Tok::Plus, 1),
            ('-', _) => (Tok::Minus, 1),
            ('*', _) => (Tok::Star, 1),
            ('/', _) => (Tok::Slash, 1),
            ('%', _) => (Tok::Percent, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('[', _) => (Tok::LBracket, 1),
            (']', _) => (Tok::RBracket, 1),
            (',', _) => (Tok::Comma, 1),
            ('"' | '\'' | '`', _) => return forbidden("string literal"),
            ('.', _) => return forbidden("attribute access"),
            ('=', _) | (':', _) => return forbidden("assignment"),
            ('&' | '|' | '^' | '~', _) => return forbidden("bitwise operator"),
            ('{' | '}', _) => return forbidden("dict or set literal"),
            ('@', _) => return forbidden("decorator or matrix operator"),
            (';' | '\\' | '#', _) => return forbidden("statement syntax"),
            _ => return Err(CalcError::Syntax(format!("unexpected character {c:?}"))),
        };
        out.push(tok);
        i += width;
    }
    Ok(out)
}

/// Decimal literal with optional fraction, exponent and digit-separating
/// underscores, as Python accepts them for floats.
fn lex_number(chars: &[char], start: usize) -> Result<(f64, usize), CalcError> {
    let mut i = start;
    let mut text = String::new();
    let digits = |i: &mut usize, text: &mut String| -> Result<usize, CalcError> {
        let mut n = 0;
        while *i < chars.len() && (chars[*i].is_ascii_digit() || chars[*i] == '_') {
            if chars[*i] == '_' {
                let ok = n > 0 && chars.get(*i + 1).is_some_and(|d| d.is_ascii_digit());
                if !ok {
                    return Err(CalcError::Syntax("misplaced underscore in number".into()));
                }
            } else {
                text.push(chars[*i]);
                n += 1;
            }
            *i += 1;
        }
        Ok(n)
    };
    digits(&mut i, &mut text)?;
    if i < chars.len() && chars[i] == '.' {
        text.push('.');
        i += 1;
        digits(&mut i, &mut text)?;
    }
    if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
        let mut j = i + 1;
        let mut exp = String::from("e");
        if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
            exp.push(chars[j]);
            j += 1;
        }
        if j < chars.len() && chars[j].is_ascii_digit() {
            let mut exp_digits = String::new();
            digits(&mut j, &mut exp_digits)?;
            exp.push_str(&exp_digits);
            text.push_str(&exp);
            i = j;
        }
    }
    if i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
        return Err(CalcError::Syntax(format!("invalid number literal near {:?}", chars[i])));
    }
    if i < chars.len() && chars[i] == '.' {
        return Err(CalcError::Forbidden("attribute access".into()));
    }
    let value: f64 = text
        .parse()
        .map_err(|_| CalcError::Syntax(format!("invalid number literal {text:?}")))?;
    if !value.is_finite() {
        return Err(CalcError::Arithmetic("number literal overflows".into()));
    }
    Ok((value, i))
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    depth: usize,
    nodes: usize,
}

const RESERVED: &[&str] = &[
    "lambda", "import", "__import__", "eval", "exec", "open", "and", "or", "not", "if", "else",
    "for", "in", "is", "True", "False", "None",
];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Tok, ctx: &str) -> Result<(), CalcError> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            Some(t) => Err(CalcError::Syntax(format!("expected {want:?} {ctx}, found {t:?}"))),
            None => Err(CalcError::Syntax(format!("expected {want:?} {ctx}, found end of input"))),
        }
    }

    fn node(&mut self, e: Expr) -> Result<Expr, CalcError> {
        self.nodes += 1;
        if self.nodes > MAX_NODES {
            return Err(CalcError::TooManyNodes(MAX_NODES));
        }
        Ok(e)
    }

    fn enter(&mut self) -> Result<(), CalcError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(CalcError::DepthExceeded(MAX_DEPTH));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn expr(&mut self) -> Result<Expr, CalcError> {
        self.enter()?;
        let first = self.sum()?;
        let mut rest = Vec::new();
        while let Some(Tok::Cmp(op)) = self.peek().cloned() {
            self.pos += 1;
            rest.push((op, self.sum()?));
        }
        self.leave();
        if rest.is_empty() {
            Ok(first)
        } else {
            self.node(Expr::Compare(Box::new(first), rest))
        }
    }

    fn sum(&mut self) -> Result<Expr, CalcError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = self.node(Expr::Bin(op, Box::new(lhs), Box::new(rhs)))?;
        }
    }

    fn term(&mut self) -> Result<Expr, CalcError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                Some(Tok::SlashSlash) => BinOp::FloorDiv,
                Some(Tok::Percent) => BinOp::Mod,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = self.node(Expr::Bin(op, Box::new(lhs), Box::new(rhs)))?;
        }
    }

    fn unary(&mut self) -> Result<Expr, CalcError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                self.enter()?;
                let inner = self.unary()?;
                self.leave();
                self.node(Expr::Neg(Box::new(inner)))
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.enter()?;
                let inner = self.unary()?;
                self.leave();
                Ok(inner)
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, CalcError> {
        let base = self.atom()?;
        if let Some(Tok::StarStar) = self.peek() {
            self.pos += 1;
            self.enter()?;
            let exp = self.unary()?;
            self.leave();
            return self.node(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, CalcError> {
        let atom = match self.next() {
            Some(Tok::Num(v)) => self.node(Expr::Num(v))?,
            Some(Tok::LParen) => {
                if let Some(Tok::RParen) = self.peek() {
                    return Err(CalcError::Forbidden("tuple".into()));
                }
                let inner = self.expr()?;
                if let Some(Tok::Comma) = self.peek() {
                    return Err(CalcError::Forbidden("tuple".into()));
                }
                self.expect(Tok::RParen, "to close parenthesis")?;
                inner
            }
            Some(Tok::Ident(name)) => {
                if RESERVED.contains(&name.as_str()) {
                    return Err(CalcError::Forbidden(format!("name {name:?}")));
                }
                let func = Func::from_name(&name)
                    .ok_or_else(|| CalcError::Forbidden(format!("name {name:?}")))?;
                if self.peek() != Some(&Tok::LParen) {
                    return Err(CalcError::Forbidden(format!("bare function reference {name:?}")));
                }
                self.pos += 1;
                self.enter()?;
                let args = self.args()?;
                self.leave();
                self.node(Expr::Call(func, args))?
            }
            Some(Tok::LBracket) => return Err(CalcError::Forbidden("list outside a function call".into())),
            Some(t) => return Err(CalcError::Syntax(format!("unexpected token {t:?}"))),
            None => return Err(CalcError::Syntax("unexpected end of input".into())),
        };
        match self.peek() {
            Some(Tok::LBracket) => Err(CalcError::Forbidden("subscript".into())),
            Some(Tok::LParen) => Err(CalcError::Forbidden("call of a non-whitelisted callee".into())),
            _ => Ok(atom),
        }
    }

    fn args(&mut self) -> Result<Vec<super::Arg>, CalcError> {
        let mut args = Vec::new();
        loop {
            if let Some(Tok::RParen) = self.peek() {
                self.pos += 1;
                return Ok(args);
            }
            if let Some(Tok::LBracket) = self.peek() {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    if let Some(Tok::RBracket) = self.peek() {
                        self.pos += 1;
                        break;
                    }
                    items.push(self.expr()?);
                    match self.next() {
                        Some(Tok::Comma) => {}
                        Some(Tok::RBracket) => break,
                        Some(t) => return Err(CalcError::Syntax(format!("unexpected {t:?} in list"))),
                        None => return Err(CalcError::Syntax("unterminated list".into())),
                    }
                }
                self.nodes += 1;
                if self.nodes > MAX_NODES {
                    return Err(CalcError::TooManyNodes(MAX_NODES));
                }
                if let Some(Tok::LBracket) = self.peek() {
                    return Err(CalcError::Forbidden("subscript".into()));
                }
                args.push(super::Arg::List(items));
            } else {
                args.push(super::Arg::Expr(self.expr()?));
            }
            match self.next() {
                Some(Tok::Comma) => {}
                Some(Tok::RParen) => return Ok(args),
                Some(t) => return Err(CalcError::Syntax(format!("unexpected {t:?} in arguments"))),
                None => return Err(CalcError::Syntax("unterminated call".into())),
            }
        }
    }
}

pub(super) fn parse(src: &str) -> Result<Expr, CalcError> {
    let toks = lex(src)?;
    if toks.is_empty() {
        return Err(CalcError::Empty);
    }
    let mut p = Parser { toks, pos: 0, depth: 0, nodes: 0 };
    let e = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(match t {
            Tok::Ident(name) => CalcError::Forbidden(format!("name {name:?}")),
            Tok::Comma => CalcError::Forbidden("tuple".into()),
            t => CalcError::Syntax(format!("trailing token {t:?}")),
        });
    }
    Ok(e)
}
