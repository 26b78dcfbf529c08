use super::{BinOp, Expr, ExprKind};

const ADD: u8 = 1;
const MUL: u8 = 2;
const UNARY: u8 = 3;
const POW: u8 = 4;
const ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Bin(BinOp::Add | BinOp::Sub, ..) => ADD,
        ExprKind::Bin(..) => MUL,
        ExprKind::Neg(_) => UNARY,
        ExprKind::Num { value, .. } if *value < 0.0 => UNARY,
        ExprKind::Pow(..) => POW,
        _ => ATOM,
    }
}

/// Render an expression in the concrete syntax accepted by the parser.
///
/// Explicit parenthesis nodes are kept; elsewhere the printer inserts the
/// fewest parentheses that make the text parse back to the same tree.
pub fn print(e: &Expr) -> String {
    let mut out = String::new();
    write(e, &mut out);
    out
}

fn wrapped(e: &Expr, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
        write(e, out);
        out.push(')');
    } else {
        write(e, out);
    }
}

fn write(e: &Expr, out: &mut String) {
    match &e.kind {
        ExprKind::Num { text, .. } => out.push_str(text),
        ExprKind::Imag => out.push('i'),
        ExprKind::Pi => out.push_str("pi"),
        ExprKind::Var(k) => {
            out.push('z');
            out.push_str(&(k + 1).to_string());
        }
        ExprKind::Paren(a) => wrapped(a, true, out),
        ExprKind::Neg(a) => {
            out.push('-');
            wrapped(a, precedence(a) < UNARY, out);
        }
        ExprKind::Bin(op, l, r) => {
            let p = precedence(e);
            wrapped(l, precedence(l) < p, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            wrapped(r, precedence(r) <= p, out);
        }
        ExprKind::Pow(b, x) => {
            wrapped(b, precedence(b) < POW, out);
            out.push('^');
            match &x.kind {
                ExprKind::Neg(inner) if precedence(inner) == ATOM => {
                    out.push('-');
                    write(inner, out);
                }
                _ => wrapped(x, precedence(x) < ATOM, out),
            }
        }
        ExprKind::Call(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write(a, out);
            out.push(')');
        }
    }
}
