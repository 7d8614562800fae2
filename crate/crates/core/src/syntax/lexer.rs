//! Tokenizer shared by the process, assertion and polynomial parsers.
//!
//! Numeric literals are unsigned. `12/5` written without spaces is a single
//! rational literal; `12 / 5` is a division.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(BigRational),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

// Longest first.
const SYMBOLS: &[&str] = &[
    "||[", "]||", "-->", "->", ":=", "++", "|>", "[](", "||", "&&", "!=", "<=", ">=", "==", "(", ")", "[", "]", "{",
    "}", "<", ">", "=", "!", "?", ";", ",", "&", "+", "-", "*", "/", "^", ".", ":", "@",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for k in 0..n {
            if chars[*i + k] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *i += n;
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            out.push(Token { tok: Tok::Ident(s), line: l0, col: c0 });
            let n = j - i;
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        if c.is_ascii_digit() {
            let (q, n) = lex_number(&chars[i..]).ok_or_else(|| Error::Syntax {
                line: l0,
                col: c0,
                msg: "malformed number".to_string(),
            })?;
            out.push(Token { tok: Tok::Num(q), line: l0, col: c0 });
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                out.push(Token { tok: Tok::Sym(s), line: l0, col: c0 });
                advance(&mut i, &mut line, &mut col, s.chars().count());
            }
            None => {
                return Err(Error::Syntax { line: l0, col: c0, msg: alloc::format!("unexpected character `{c}`") })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

fn digits(cs: &[char]) -> usize {
    cs.iter().take_while(|c| c.is_ascii_digit()).count()
}

fn decimal(cs: &[char]) -> Option<(BigRational, usize)> {
    let n = digits(cs);
    if n == 0 {
        return None;
    }
    let mut q = BigRational::from_integer(parse_int(&cs[..n]));
    let mut len = n;
    if cs.get(n) == Some(&'.') {
        let m = digits(&cs[n + 1..]);
        if m > 0 {
            let frac = parse_int(&cs[n + 1..n + 1 + m]);
            let scale = num_traits::pow(BigInt::from(10), m);
            q += BigRational::new(frac, scale);
            len = n + 1 + m;
        }
    }
    Some((q, len))
}

fn lex_number(cs: &[char]) -> Option<(BigRational, usize)> {
    let (q, n) = decimal(cs)?;
    if cs.get(n) == Some(&'/') && cs.get(n + 1).is_some_and(|c| c.is_ascii_digit()) {
        let (d, m) = decimal(&cs[n + 1..])?;
        if d.is_zero() {
            return None;
        }
        return Some((q / d, n + 1 + m));
    }
    Some((q, n))
}

fn parse_int(cs: &[char]) -> BigInt {
    let mut v = BigInt::zero();
    let ten = BigInt::from(10);
    for c in cs {
        v = v * &ten + BigInt::from(c.to_digit(10).unwrap_or(0));
    }
    v
}

/// Cursor over a token stream with the common helpers.
pub struct Cursor {
    toks: Vec<Token>,
    pub pos: usize,
}

impl Cursor {
    pub fn new(src: &str) -> Result<Self> {
        Ok(Cursor { toks: tokenize(src)?, pos: 0 })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    pub fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(t) if t == k)
    }

    pub fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_kw(&mut self, k: &str) -> bool {
        if self.is_kw(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(&alloc::format!("expected `{s}`")))
        }
    }

    pub fn expect_kw(&mut self, k: &str) -> Result<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            Err(self.error(&alloc::format!("expected `{k}`")))
        }
    }

    pub fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn expect_eof(&mut self) -> Result<()> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing input"))
        }
    }

    pub fn error(&self, msg: &str) -> Error {
        let t = &self.toks[self.pos];
        let found = match &t.tok {
            Tok::Ident(s) => alloc::format!("`{s}`"),
            Tok::Num(q) => alloc::format!("number {q}"),
            Tok::Sym(s) => alloc::format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        };
        Error::Syntax { line: t.line, col: t.col, msg: alloc::format!("{msg}, found {found}") }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syms(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn longest_symbols_win() {
        assert_eq!(
            syms("a||[c]||b"),
            alloc::vec![
                Tok::Ident("a".into()),
                Tok::Sym("||["),
                Tok::Ident("c".into()),
                Tok::Sym("]||"),
                Tok::Ident("b".into()),
                Tok::Eof
            ]
        );
        assert_eq!(syms("x-->")[1], Tok::Sym("-->"));
        assert_eq!(syms("x != 1")[1], Tok::Sym("!="));
    }

    #[test]
    fn rational_literals_need_adjacent_slash() {
        let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        assert_eq!(syms("5670/1519")[0], Tok::Num(q(5670, 1519)));
        assert_eq!(syms("3.732")[0], Tok::Num(q(3732, 1000)));
        assert_eq!(syms("3 / 4").len(), 4);
    }

    #[test]
    fn comments_and_positions() {
        let t = tokenize("// hi\n  x").unwrap();
        assert_eq!((t[0].line, t[0].col), (2, 3));
        assert!(matches!(tokenize("x # y"), Err(Error::Syntax { line: 1, col: 3, .. })));
    }
}
