//! Shared helpers for the integration tests: random expression trees and
//! seeded domain samples.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use spaceform::dsl::{BinOp, Expr, ExprKind, Func};
use spaceform::linalg::{c, CVec, C64};

fn literal(rng: &mut ChaCha8Rng) -> Expr {
    // Short decimal literals print exactly.
    let v = match rng.gen_range(0..3) {
        0 => rng.gen_range(0..10) as f64,
        1 => rng.gen_range(0..1000) as f64 / 100.0,
        _ => rng.gen_range(1..50) as f64 / 8.0,
    };
    Expr::num(v)
}

fn leaf(rng: &mut ChaCha8Rng, n: usize) -> Expr {
    match rng.gen_range(0..6) {
        0 | 1 => literal(rng),
        2 => Expr::new(ExprKind::Imag),
        3 => Expr::new(ExprKind::Pi),
        _ => Expr::var(rng.gen_range(0..n)),
    }
}

/// A well-typed tree over the full grammar (`z1 … zn`, all operators and
/// functions). Non-integer powers get an `abs2` base.
pub fn random_expr(rng: &mut ChaCha8Rng, n: usize, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.2) {
        return leaf(rng, n);
    }
    let d = depth - 1;
    match rng.gen_range(0..10) {
        0..=3 => {
            let op = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div][rng.gen_range(0..4)];
            Expr::bin(op, random_expr(rng, n, d), random_expr(rng, n, d))
        }
        4 => Expr::neg(random_expr(rng, n, d)),
        5 => {
            let k = rng.gen_range(1..5) as f64;
            let e = if rng.gen_bool(0.3) { Expr::neg(Expr::num(k)) } else { Expr::num(k) };
            Expr::pow(random_expr(rng, n, d), e)
        }
        6 => {
            let p = rng.gen_range(1..20) as f64 / 4.0;
            Expr::pow(Expr::call(Func::Abs2, random_expr(rng, n, d)), Expr::num(p))
        }
        _ => {
            let f = Func::ALL[rng.gen_range(0..Func::ALL.len())];
            Expr::call(f, random_expr(rng, n, d))
        }
    }
}

fn one_plus_abs2(e: Expr) -> Expr {
    Expr::bin(BinOp::Add, Expr::num(1.0), Expr::call(Func::Abs2, e))
}

/// A tree that is smooth and finite on `|z_j| ≤ 1`: logarithms, quotients
/// and fractional powers only see arguments `1 + |·|²`.
pub fn smooth_expr(rng: &mut ChaCha8Rng, n: usize, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.2) {
        return leaf(rng, n);
    }
    let d = depth - 1;
    match rng.gen_range(0..12) {
        0..=2 => {
            let op = [BinOp::Add, BinOp::Sub, BinOp::Mul][rng.gen_range(0..3)];
            Expr::bin(op, smooth_expr(rng, n, d), smooth_expr(rng, n, d))
        }
        3 => Expr::bin(BinOp::Div, smooth_expr(rng, n, d), one_plus_abs2(smooth_expr(rng, n, d))),
        4 => Expr::neg(smooth_expr(rng, n, d)),
        5 => Expr::pow(smooth_expr(rng, n, d), Expr::num(rng.gen_range(1..4) as f64)),
        6 => Expr::pow(one_plus_abs2(smooth_expr(rng, n, d)), Expr::num(rng.gen_range(-8..8) as f64 / 4.0 + 0.125)),
        7 => Expr::call(Func::Log, one_plus_abs2(smooth_expr(rng, n, d))),
        8 => {
            // Keep exponentials bounded.
            let inner = Expr::bin(BinOp::Div, smooth_expr(rng, n, d), one_plus_abs2(smooth_expr(rng, n, d)));
            Expr::call(Func::Exp, inner)
        }
        _ => {
            let f = [Func::Abs2, Func::Re, Func::Im, Func::Conj][rng.gen_range(0..4)];
            Expr::call(f, smooth_expr(rng, n, d))
        }
    }
}

/// Uniform sample in the ball `|z| ≤ r` (rejection from the cube).
pub fn ball_point(rng: &mut ChaCha8Rng, n: usize, r: f64) -> CVec {
    loop {
        let z = CVec::from_fn(n, |_, _| c(r * (2.0 * rng.gen::<f64>() - 1.0), r * (2.0 * rng.gen::<f64>() - 1.0)));
        if z.norm() <= r {
            return z;
        }
    }
}

/// Sample with `inner ≤ |z| ≤ outer`.
pub fn shell_point(rng: &mut ChaCha8Rng, n: usize, inner: f64, outer: f64) -> CVec {
    loop {
        let z = ball_point(rng, n, outer);
        if z.norm() >= inner {
            return z;
        }
    }
}

/// Unit complex vector in the Euclidean norm.
pub fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    let v = CVec::from_fn(n, |_, _| c(2.0 * rng.gen::<f64>() - 1.0, 2.0 * rng.gen::<f64>() - 1.0));
    &v / c(v.norm(), 0.0)
}

pub fn cabs(z: C64) -> f64 {
    z.norm()
}
