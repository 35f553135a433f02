//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := atom ('^' unary)?
//! atom    := number | ident | ident '(' expr ')' | '(' expr ')'
//! number  := digits ('.' digits)? (('e' | 'E') ('+' | '-')? digits)?
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)`. Columns in errors are 1-based.

use super::{Expr, ExprError, Func, Number, SymbolTable};

pub(crate) const FUNCTION_NAMES: [&str; 8] =
    ["sqrt", "atanh", "tanh", "sin", "cos", "exp", "ln", "abs"];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Number),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let mut scientific = false;
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                    scientific = true;
                }
            }
            let literal: String = chars[start..i].iter().collect();
            let number = parse_number(&literal, scientific).ok_or_else(|| ExprError::Syntax {
                column,
                message: format!("malformed number '{literal}'"),
            })?;
            out.push(Token { tok: Tok::Num(number), column });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                column,
            });
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    return Err(ExprError::Syntax {
                        column,
                        message: format!("unexpected character '{c}'"),
                    })
                }
            };
            out.push(Token { tok, column });
            i += 1;
        }
    }
    out.push(Token {
        tok: Tok::End,
        column: chars.len() + 1,
    });
    Ok(out)
}

/// Decimal literals become exact rationals when they fit; scientific
/// notation is read as a real.
fn parse_number(literal: &str, scientific: bool) -> Option<Number> {
    if scientific {
        return literal.parse::<f64>().ok().filter(|v| v.is_finite()).map(Number::Real);
    }
    let (int_part, frac_part) = match literal.split_once('.') {
        Some((a, b)) => (a, b),
        None => (literal, ""),
    };
    if frac_part.contains('.') {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    if digits.len() <= 18 {
        let n: i64 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
        let d = 10i64.checked_pow(frac_part.len() as u32)?;
        return Some(Number::ratio(n, d));
    }
    literal.parse::<f64>().ok().map(Number::Real)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    table: &'a SymbolTable,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, column: usize, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            column,
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek().tok {
                Tok::Op('+') => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Op('-') => {
                    self.bump();
                    terms.push(-self.term()?);
                }
                _ => break,
            }
        }
        Ok(Expr::sum(terms))
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut factors = vec![self.unary()?];
        loop {
            match self.peek().tok {
                Tok::Op('*') => {
                    self.bump();
                    factors.push(self.unary()?);
                }
                Tok::Op('/') => {
                    self.bump();
                    factors.push(self.unary()?.recip());
                }
                _ => break,
            }
        }
        Ok(Expr::product(factors))
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek().tok {
            Tok::Op('-') => {
                self.bump();
                Ok(-self.unary()?)
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(base.pow(exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let tok = self.bump();
        match tok.tok {
            Tok::Num(n) => Ok(Expr::num(n)),
            Tok::Ident(name) => {
                if self.peek().tok == Tok::LParen {
                    let open = self.peek().column;
                    let Some(func) = Func::from_name(&name) else {
                        return self.error(open, format!("'{name}' is not a known function"));
                    };
                    self.bump();
                    let arg = self.expr().map_err(|e| self.unclosed(e, open))?;
                    self.expect_close(open)?;
                    return Ok(Expr::apply(func, arg));
                }
                if Func::from_name(&name).is_some() {
                    return self.error(
                        self.peek().column,
                        format!("expected '(' after function '{name}'"),
                    );
                }
                match self.table.lookup(&name) {
                    Some(sym) => Ok(Expr::sym(sym)),
                    None => Err(ExprError::UnknownSymbol {
                        name,
                        column: tok.column,
                    }),
                }
            }
            Tok::LParen => {
                let inner = self.expr().map_err(|e| self.unclosed(e, tok.column))?;
                self.expect_close(tok.column)?;
                Ok(inner)
            }
            Tok::End => self.error(tok.column, "unexpected end of input"),
            Tok::RParen => self.error(tok.column, "unexpected ')'"),
            Tok::Op(c) => self.error(tok.column, format!("unexpected operator '{c}'")),
        }
    }

    /// Running off the end inside parentheses is reported at the '('.
    fn unclosed(&self, err: ExprError, open_column: usize) -> ExprError {
        if self.peek().tok == Tok::End && matches!(err, ExprError::Syntax { .. }) {
            ExprError::Syntax {
                column: open_column,
                message: "unclosed '('".into(),
            }
        } else {
            err
        }
    }

    fn expect_close(&mut self, open_column: usize) -> Result<(), ExprError> {
        match self.peek().tok {
            Tok::RParen => {
                self.bump();
                Ok(())
            }
            Tok::End => self.error(open_column, "unclosed '('"),
            _ => {
                let c = self.peek().column;
                self.error(c, "expected ')'")
            }
        }
    }
}

/// Parse `text` against `table`; the result is simplified.
pub fn parse(text: &str, table: &SymbolTable) -> Result<Expr, ExprError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0, table };
    let e = p.expr()?;
    let rest = p.peek().clone();
    if rest.tok != Tok::End {
        return p.error(rest.column, "unexpected trailing input");
    }
    Ok(e.simplify())
}
