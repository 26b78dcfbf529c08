//! A small expression language for Kähler potentials and holomorphic test maps.
//!
//! Expressions are built from numeric literals, the constants `i` and `pi`,
//! complex variables `z1 … zn`, the binary operators `+ - * / ^`, unary
//! minus, parentheses and the functions `log exp abs2 re im conj`. See the
//! repository README for the exact grammar.

mod catalog;
mod eval;
mod parser;
mod print;

pub use catalog::{catalog, catalog_entries, CatalogEntry, CatalogItem, CatalogParams, EntryKind, HolomorphicMap};
pub use eval::{eval, eval_jet, eval_typed, ExprPotential, Scalar};
pub use parser::{parse, parse_potential, parse_with_dim};
pub use print::print;

use std::fmt;

/// Value category of a subexpression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Ty {
    NonNegative,
    Real,
    Complex,
}

impl Ty {
    pub fn is_real(self) -> bool {
        self != Ty::Complex
    }

    fn join(self, other: Ty) -> Ty {
        self.max(other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Log,
    Exp,
    Abs2,
    Re,
    Im,
    Conj,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Log, Func::Exp, Func::Abs2, Func::Re, Func::Im, Func::Conj];

    pub fn name(self) -> &'static str {
        match self {
            Func::Log => "log",
            Func::Exp => "exp",
            Func::Abs2 => "abs2",
            Func::Re => "re",
            Func::Im => "im",
            Func::Conj => "conj",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    /// Numeric literal; the source text is kept for printing.
    Num { text: String, value: f64 },
    Imag,
    Pi,
    /// Variable `z{k+1}`.
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    Paren(Box<Expr>),
}

/// Expression node with its source column (1-based, 0 for synthesized nodes).
/// Equality ignores columns.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub column: usize,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        use ExprKind::*;
        match (&self.kind, &other.kind) {
            (Num { value: a, .. }, Num { value: b, .. }) => a == b,
            (Imag, Imag) | (Pi, Pi) => true,
            (Var(a), Var(b)) => a == b,
            (Neg(a), Neg(b)) | (Paren(a), Paren(b)) => a == b,
            (Bin(o1, l1, r1), Bin(o2, l2, r2)) => o1 == o2 && l1 == l2 && r1 == r2,
            (Pow(b1, e1), Pow(b2, e2)) => b1 == b2 && e1 == e2,
            (Call(f1, a1), Call(f2, a2)) => f1 == f2 && a1 == a2,
            _ => false,
        }
    }
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Self { kind, column: 0 }
    }

    pub fn num(value: f64) -> Self {
        Self::new(ExprKind::Num {
            text: format!("{value}"),
            value,
        })
    }

    pub fn var(k: usize) -> Self {
        Self::new(ExprKind::Var(k))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(e: Expr) -> Self {
        Self::new(ExprKind::Neg(Box::new(e)))
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Self {
        Self::new(ExprKind::Bin(op, Box::new(l), Box::new(r)))
    }

    pub fn pow(base: Expr, exponent: Expr) -> Self {
        Self::new(ExprKind::Pow(Box::new(base), Box::new(exponent)))
    }

    pub fn call(f: Func, arg: Expr) -> Self {
        Self::new(ExprKind::Call(f, Box::new(arg)))
    }

    /// Largest variable index used, plus one.
    pub fn arity(&self) -> usize {
        use ExprKind::*;
        match &self.kind {
            Var(k) => k + 1,
            Num { .. } | Imag | Pi => 0,
            Neg(a) | Paren(a) | Call(_, a) => a.arity(),
            Bin(_, l, r) | Pow(l, r) => l.arity().max(r.arity()),
        }
    }

    /// The same tree with all explicit parenthesis nodes removed.
    pub fn strip_parens(&self) -> Expr {
        use ExprKind::*;
        let kind = match &self.kind {
            Paren(a) => return a.strip_parens(),
            Neg(a) => Neg(Box::new(a.strip_parens())),
            Call(f, a) => Call(*f, Box::new(a.strip_parens())),
            Bin(o, l, r) => Bin(*o, Box::new(l.strip_parens()), Box::new(r.strip_parens())),
            Pow(b, e) => Pow(Box::new(b.strip_parens()), Box::new(e.strip_parens())),
            other => other.clone(),
        };
        Expr { kind, column: self.column }
    }

    /// Static type of the expression; errors on ill-typed exponentiation.
    pub fn ty(&self) -> crate::Result<Ty> {
        eval::type_of(self)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}
