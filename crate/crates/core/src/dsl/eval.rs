use super::{BinOp, Expr, ExprKind, Func, Ty};
use crate::error::{pairs, Error, Result};
use crate::jet::Jet;
use crate::linalg::{CVec, C64};

/// Arithmetic needed to evaluate an expression tree. Implemented for plain
/// complex numbers and for jets (forward-mode derivatives).
pub trait Scalar: Clone {
    fn lift(&self, value: C64) -> Self;
    fn value(&self) -> C64;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn powi(&self, p: i32) -> Self;
    fn powf(&self, p: f64) -> Self;
    fn conj(&self) -> Self;
    fn re(&self) -> Self;
    fn im(&self) -> Self;
    fn abs2(&self) -> Self;
}

impl Scalar for C64 {
    fn lift(&self, value: C64) -> Self {
        value
    }
    fn value(&self) -> C64 {
        *self
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn exp(&self) -> Self {
        C64::exp(*self)
    }
    fn ln(&self) -> Self {
        C64::ln(*self)
    }
    fn powi(&self, p: i32) -> Self {
        C64::powi(self, p)
    }
    fn powf(&self, p: f64) -> Self {
        // Only reached for nonnegative real bases.
        C64::new(self.re.max(0.0).powf(p), 0.0)
    }
    fn conj(&self) -> Self {
        C64::conj(self)
    }
    fn re(&self) -> Self {
        C64::new(self.re, 0.0)
    }
    fn im(&self) -> Self {
        C64::new(self.im, 0.0)
    }
    fn abs2(&self) -> Self {
        C64::new(self.norm_sqr(), 0.0)
    }
}

impl Scalar for Jet {
    fn lift(&self, value: C64) -> Self {
        Jet::lift(self, value)
    }
    fn value(&self) -> C64 {
        Jet::value(self)
    }
    fn add(&self, other: &Self) -> Self {
        self.clone() + other.clone()
    }
    fn sub(&self, other: &Self) -> Self {
        self.clone() - other.clone()
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        Jet::div(self, other)
    }
    fn neg(&self) -> Self {
        -self.clone()
    }
    fn exp(&self) -> Self {
        Jet::exp(self)
    }
    fn ln(&self) -> Self {
        Jet::ln(self)
    }
    fn powi(&self, p: i32) -> Self {
        Jet::powi(self, p)
    }
    fn powf(&self, p: f64) -> Self {
        Jet::powf(self, p)
    }
    fn conj(&self) -> Self {
        Jet::conj(self)
    }
    fn re(&self) -> Self {
        Jet::re(self)
    }
    fn im(&self) -> Self {
        Jet::im(self)
    }
    fn abs2(&self) -> Self {
        Jet::abs2(self)
    }
}

/// Value of a variable-free subexpression (used for exponents).
fn constant_value(e: &Expr) -> Option<C64> {
    if e.arity() > 0 {
        return None;
    }
    eval(e, &[]).ok()
}

fn exponent_of(e: &Expr) -> Result<f64> {
    let value = constant_value(e).ok_or_else(|| Error::Type {
        column: e.column,
        message: "exponent must be a real constant".into(),
    })?;
    if value.im != 0.0 || !value.re.is_finite() {
        return Err(Error::Type {
            column: e.column,
            message: "exponent must be a real constant".into(),
        });
    }
    Ok(value.re)
}

fn as_integer(p: f64) -> Option<i32> {
    (p.fract() == 0.0 && p.abs() <= i32::MAX as f64).then_some(p as i32)
}

pub(super) fn type_of(e: &Expr) -> Result<Ty> {
    use ExprKind::*;
    Ok(match &e.kind {
        Num { value, .. } => {
            if *value >= 0.0 {
                Ty::NonNegative
            } else {
                Ty::Real
            }
        }
        Pi => Ty::NonNegative,
        Imag | Var(_) => Ty::Complex,
        Paren(a) => type_of(a)?,
        Neg(a) => type_of(a)?.join(Ty::Real),
        Bin(op, l, r) => {
            let (a, b) = (type_of(l)?, type_of(r)?);
            match op {
                BinOp::Add | BinOp::Mul | BinOp::Div => a.join(b),
                BinOp::Sub => a.join(b).join(Ty::Real),
            }
        }
        Pow(base, exponent) => {
            let bt = type_of(base)?;
            type_of(exponent)?;
            let p = exponent_of(exponent)?;
            match as_integer(p) {
                Some(k) if bt == Ty::Real && k % 2 == 0 => Ty::NonNegative,
                Some(_) => bt,
                None if bt == Ty::NonNegative => Ty::NonNegative,
                None => {
                    return Err(Error::Type {
                        column: e.column,
                        message: "non-integer powers need a nonnegative base such as abs2(..)".into(),
                    })
                }
            }
        }
        Call(f, a) => {
            let at = type_of(a)?;
            match f {
                Func::Log => at.join(Ty::Real),
                Func::Exp => {
                    if at.is_real() {
                        Ty::NonNegative
                    } else {
                        Ty::Complex
                    }
                }
                Func::Abs2 => Ty::NonNegative,
                Func::Re | Func::Im => Ty::Real,
                Func::Conj => at,
            }
        }
    })
}

/// Evaluate over any scalar type. `vars[k]` is the value of `z{k+1}`; `point`
/// is only used for error payloads.
pub fn eval_typed<S: Scalar>(e: &Expr, vars: &[S], point: &[C64]) -> Result<(S, Ty)> {
    use ExprKind::*;
    if vars.is_empty() {
        return Err(Error::Dimension { expected: 1, got: 0 });
    }
    let seed = |v: C64| -> S { vars[0].lift(v) };
    match &e.kind {
        Num { value, .. } => Ok((seed(C64::new(*value, 0.0)), type_of(e)?)),
        Pi => Ok((seed(C64::new(std::f64::consts::PI, 0.0)), Ty::NonNegative)),
        Imag => Ok((seed(C64::new(0.0, 1.0)), Ty::Complex)),
        Var(k) => match vars.get(*k) {
            Some(v) => Ok((v.clone(), Ty::Complex)),
            None => Err(Error::Dimension {
                expected: k + 1,
                got: vars.len(),
            }),
        },
        Paren(a) => eval_typed(a, vars, point),
        Neg(a) => {
            let (v, t) = eval_typed(a, vars, point)?;
            Ok((v.neg(), t.join(Ty::Real)))
        }
        Bin(op, l, r) => {
            let (a, ta) = eval_typed(l, vars, point)?;
            let (b, tb) = eval_typed(r, vars, point)?;
            let ty = match op {
                BinOp::Sub => ta.join(tb).join(Ty::Real),
                _ => ta.join(tb),
            };
            let v = match op {
                BinOp::Add => a.add(&b),
                BinOp::Sub => a.sub(&b),
                BinOp::Mul => a.mul(&b),
                BinOp::Div => {
                    if b.value() == C64::new(0.0, 0.0) {
                        return Err(Error::Eval {
                            point: pairs(point),
                            message: format!("division by zero at column {}", e.column),
                        });
                    }
                    a.div(&b)
                }
            };
            Ok((v, ty))
        }
        Pow(base, exponent) => {
            let (b, bt) = eval_typed(base, vars, point)?;
            let p = exponent_of(exponent)?;
            match as_integer(p) {
                Some(k) => {
                    if k < 0 && b.value() == C64::new(0.0, 0.0) {
                        return Err(Error::Eval {
                            point: pairs(point),
                            message: format!("negative power of zero at column {}", e.column),
                        });
                    }
                    let ty = if bt == Ty::Real && k % 2 == 0 { Ty::NonNegative } else { bt };
                    Ok((b.powi(k), ty))
                }
                None => {
                    if bt != Ty::NonNegative {
                        return Err(Error::Type {
                            column: e.column,
                            message: "non-integer powers need a nonnegative base such as abs2(..)".into(),
                        });
                    }
                    Ok((b.powf(p), Ty::NonNegative))
                }
            }
        }
        Call(f, a) => {
            let (v, t) = eval_typed(a, vars, point)?;
            Ok(match f {
                Func::Log => {
                    if t.is_real() && v.value().re <= 0.0 {
                        return Err(Error::Eval {
                            point: pairs(point),
                            message: format!(
                                "log of nonpositive value {:.6e} at column {}",
                                v.value().re,
                                e.column
                            ),
                        });
                    }
                    if !t.is_real() && v.value() == C64::new(0.0, 0.0) {
                        return Err(Error::Eval {
                            point: pairs(point),
                            message: format!("log of zero at column {}", e.column),
                        });
                    }
                    (v.ln(), t.join(Ty::Real))
                }
                Func::Exp => (v.exp(), if t.is_real() { Ty::NonNegative } else { Ty::Complex }),
                Func::Abs2 => (v.abs2(), Ty::NonNegative),
                Func::Re => (v.re(), Ty::Real),
                Func::Im => (v.im(), Ty::Real),
                Func::Conj => (v.conj(), t),
            })
        }
    }
}

/// Plain complex evaluation at `z`.
pub fn eval(e: &Expr, z: &[C64]) -> Result<C64> {
    if z.is_empty() {
        // Variable-free expressions still need a scalar seed.
        return eval_typed(e, &[C64::new(0.0, 0.0)], z).map(|(v, _)| v);
    }
    eval_typed(e, z, z).map(|(v, _)| v)
}

/// Forward-mode evaluation: derivatives up to `order` with respect to the
/// interleaved real coordinates `(x₁, y₁, …)` of `z`.
pub fn eval_jet(e: &Expr, z: &[C64], order: usize) -> Result<Jet> {
    let vars = Jet::complex_coordinates(z, order);
    let (v, _) = eval_typed(e, &vars, z)?;
    if !v.is_finite() {
        return Err(Error::NonFinite { point: pairs(z) });
    }
    Ok(v)
}

/// A parsed real-valued potential on `ℂⁿ`.
#[derive(Debug, Clone)]
pub struct ExprPotential {
    pub n: usize,
    pub expr: Expr,
}

impl ExprPotential {
    pub fn new(n: usize, expr: Expr) -> Self {
        Self { n, expr }
    }

    pub fn parse(text: &str, n: usize) -> Result<Self> {
        Ok(Self::new(n, super::parse_potential(text, n)?))
    }

    pub fn value(&self, z: &CVec) -> Result<f64> {
        eval(&self.expr, z.as_slice()).map(|v| v.re)
    }

    pub fn jet(&self, z: &CVec, order: usize) -> Result<Jet> {
        eval_jet(&self.expr, z.as_slice(), order)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn abs2_value() {
        let e = parse("abs2(z1)").unwrap();
        assert_eq!(eval(&e, &[c(3.0, 4.0), c(0.0, 0.0)]).unwrap(), c(25.0, 0.0));
    }

    #[test]
    fn bergman_potential_vanishes_at_origin() {
        let e = parse("-log(1-abs2(z1))").unwrap();
        assert_eq!(eval(&e, &[c(0.0, 0.0)]).unwrap().re, 0.0);
    }

    #[test]
    fn cone_potential_half_power() {
        let e = parse("abs2(z1)^0.5 + abs2(z2)").unwrap();
        let v = eval(&e, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((v.re - 1.0).abs() < 1e-15);
        let v = eval(&e, &[c(0.0, 3.0), c(0.0, 0.0)]).unwrap();
        assert!((v.re - 3.0).abs() < 1e-14);
    }

    #[test]
    fn log_of_nonpositive_real_reports_point() {
        let e = parse("log(1 - abs2(z1))").unwrap();
        match eval(&e, &[c(2.0, 0.0)]) {
            Err(Error::Eval { point, .. }) => assert_eq!(point, vec![[2.0, 0.0]]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn complex_log_is_principal() {
        let e = parse("log(z1)").unwrap();
        let v = eval(&e, &[c(-1.0, 0.0)]).unwrap();
        assert!((v - c(0.0, std::f64::consts::PI)).norm() < 1e-15);
    }

    #[test]
    fn constants_and_negative_powers() {
        let e = parse("2*pi*i + z1^-2").unwrap();
        let v = eval(&e, &[c(2.0, 0.0)]).unwrap();
        assert!((v - c(0.25, 2.0 * std::f64::consts::PI)).norm() < 1e-14);
        assert_eq!(eval(&parse("2^3").unwrap(), &[]).unwrap(), c(8.0, 0.0));
    }

    #[test]
    fn types() {
        assert_eq!(parse("abs2(z1)").unwrap().ty().unwrap(), Ty::NonNegative);
        assert_eq!(parse("re(z1) - 1").unwrap().ty().unwrap(), Ty::Real);
        assert_eq!(parse("re(z1)^2").unwrap().ty().unwrap(), Ty::NonNegative);
        assert_eq!(parse("conj(z1)").unwrap().ty().unwrap(), Ty::Complex);
        assert!(parse("abs2(z1)^re(z1)").is_err());
    }

    #[test]
    fn jet_value_matches_plain() {
        let e = parse("-log(1 - abs2(z1) - abs2(z2)) + re(z1*conj(z2))^2").unwrap();
        let z = [c(0.2, -0.1), c(0.3, 0.25)];
        let j = eval_jet(&e, &z, 2).unwrap();
        assert!((j.value() - eval(&e, &z).unwrap()).norm() < 1e-14);
    }
}
