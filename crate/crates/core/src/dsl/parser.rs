//! Hand-written recursive-descent parser with single-token lookahead.
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := '-' unary | power
//! power    := primary ('^' exponent)*
//! exponent := '-' primary | primary
//! primary  := NUMBER | 'i' | 'pi' | VAR | FUNC '(' expr ')' | '(' expr ')'
//! ```

use super::{BinOp, Expr, ExprKind, Func, Ty};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(String, f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut line, mut column) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        if ch == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if ch.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        let start = column;
        let simple = match ch {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            tokens.push(Token { tok, line, column: start });
            i += 1;
            column += 1;
            continue;
        }
        if ch.is_ascii_digit() || ch == '.' {
            let begin = i;
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
            let lit: String = chars[begin..i].iter().collect();
            let value: f64 = lit.parse().map_err(|_| Error::Syntax {
                line,
                column: start,
                expected: vec!["number".into()],
            })?;
            column += i - begin;
            tokens.push(Token { tok: Tok::Number(lit, value), line, column: start });
            continue;
        }
        if ch.is_ascii_alphabetic() || ch == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let ident: String = chars[begin..i].iter().collect();
            column += i - begin;
            tokens.push(Token { tok: Tok::Ident(ident), line, column: start });
            continue;
        }
        return Err(Error::Syntax {
            line,
            column,
            expected: operand_start(),
        });
    }
    tokens.push(Token { tok: Tok::Eof, line, column });
    Ok(tokens)
}

fn operand_start() -> Vec<String> {
    vec!["number".into(), "identifier".into(), "'('".into(), "'-'".into()]
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dim: Option<usize>,
}

impl Parser {
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

    fn fail<T>(&self, expected: Vec<String>) -> Result<T> {
        let t = self.peek();
        Err(Error::Syntax {
            line: t.line,
            column: t.column,
            expected,
        })
    }

    fn expect(&mut self, tok: Tok, label: &str) -> Result<Token> {
        if self.peek().tok == tok {
            Ok(self.bump())
        } else {
            self.fail(vec![label.into()])
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let column = self.bump().column;
            let rhs = self.term()?;
            lhs = Expr {
                kind: ExprKind::Bin(op, Box::new(lhs), Box::new(rhs)),
                column,
            };
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            let column = self.bump().column;
            let rhs = self.unary()?;
            lhs = Expr {
                kind: ExprKind::Bin(op, Box::new(lhs), Box::new(rhs)),
                column,
            };
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek().tok == Tok::Minus {
            let column = self.bump().column;
            let inner = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Neg(Box::new(inner)),
                column,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.primary()?;
        while self.peek().tok == Tok::Caret {
            let column = self.bump().column;
            let exponent = if self.peek().tok == Tok::Minus {
                let c = self.bump().column;
                let p = self.primary()?;
                Expr {
                    kind: ExprKind::Neg(Box::new(p)),
                    column: c,
                }
            } else {
                self.primary()?
            };
            base = Expr {
                kind: ExprKind::Pow(Box::new(base), Box::new(exponent)),
                column,
            };
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let token = self.peek().clone();
        match token.tok {
            Tok::Number(text, value) => {
                self.bump();
                Ok(Expr {
                    kind: ExprKind::Num { text, value },
                    column: token.column,
                })
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(Expr {
                    kind: ExprKind::Paren(Box::new(inner)),
                    column: token.column,
                })
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(f) = Func::from_name(&name) {
                    self.expect(Tok::LParen, "'('")?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "')'")?;
                    return Ok(Expr {
                        kind: ExprKind::Call(f, Box::new(arg)),
                        column: token.column,
                    });
                }
                let kind = match name.as_str() {
                    "i" => ExprKind::Imag,
                    "pi" => ExprKind::Pi,
                    _ => match variable_index(&name) {
                        Some(k) => {
                            if let Some(n) = self.dim {
                                if k >= n {
                                    return Err(Error::Type {
                                        column: token.column,
                                        message: format!("variable {name} exceeds dimension {n}"),
                                    });
                                }
                            }
                            ExprKind::Var(k)
                        }
                        None => {
                            return Err(Error::Syntax {
                                line: token.line,
                                column: token.column,
                                expected: vec!["variable z<k>".into(), "function".into(), "'i'".into(), "'pi'".into()],
                            })
                        }
                    },
                };
                Ok(Expr {
                    kind,
                    column: token.column,
                })
            }
            _ => self.fail(operand_start()),
        }
    }
}

fn variable_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('z')?;
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) || digits.starts_with('0') {
        return None;
    }
    digits.parse::<usize>().ok().map(|k| k - 1)
}

/// Parse an expression without a dimension bound on variable indices.
pub fn parse(text: &str) -> Result<Expr> {
    parse_inner(text, None)
}

/// Parse an expression whose variables must be among `z1 … zn`.
pub fn parse_with_dim(text: &str, n: usize) -> Result<Expr> {
    parse_inner(text, Some(n))
}

fn parse_inner(text: &str, dim: Option<usize>) -> Result<Expr> {
    let tokens = lex(text)?;
    if tokens.len() == 1 {
        return Err(Error::Syntax {
            line: tokens[0].line,
            column: tokens[0].column,
            expected: operand_start(),
        });
    }
    let mut parser = Parser { tokens, pos: 0, dim };
    let expr = parser.expr()?;
    if parser.peek().tok != Tok::Eof {
        return parser.fail(vec!["operator".into(), "end of input".into()]);
    }
    expr.ty()?;
    Ok(expr)
}

/// Parse a Kähler potential: the expression must type-check to a real value.
pub fn parse_potential(text: &str, n: usize) -> Result<Expr> {
    let expr = parse_with_dim(text, n)?;
    if expr.ty()? == Ty::Complex {
        return Err(Error::Type {
            column: expr.column,
            message: "potential must be real-valued (use abs2, re, im)".into(),
        });
    }
    Ok(expr)
}
