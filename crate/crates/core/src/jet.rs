//! Truncated multivariate Taylor arithmetic ("jets") with complex coefficients.
//!
//! A jet over `m` real variables truncated at total degree `K` stores the
//! coefficients `∂^α f / α!` for every multi-index `|α| ≤ K`. Arithmetic on
//! jets is forward-mode automatic differentiation to order `K`; the engine uses
//! it over the `2n` real coordinates of `ℂⁿ` to get potential derivatives up
//! to order four.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Mutex, OnceLock};

use crate::linalg::C64;

/// Monomial bookkeeping for a fixed number of variables and truncation order.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    order: usize,
    exponents: Vec<Vec<u8>>,
    /// `(a, b, a+b)` for all monomial pairs whose product survives truncation.
    products: Vec<(u32, u32, u32)>,
    lookup: HashMap<Vec<u8>, usize>,
    factorial_weight: Vec<f64>,
}

impl JetSpace {
    fn build(nvars: usize, order: usize) -> Self {
        let mut exponents: Vec<Vec<u8>> = Vec::new();
        for d in 0..=order {
            let mut current = vec![0u8; nvars];
            enumerate_degree(nvars, d, 0, &mut current, &mut exponents);
        }
        let degree: Vec<usize> = exponents.iter().map(|e| e.iter().map(|&x| x as usize).sum()).collect();
        let lookup: HashMap<Vec<u8>, usize> =
            exponents.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let mut products = Vec::new();
        for (a, ea) in exponents.iter().enumerate() {
            for (b, eb) in exponents.iter().enumerate() {
                if degree[a] + degree[b] > order {
                    continue;
                }
                let sum: Vec<u8> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                products.push((a as u32, b as u32, lookup[&sum] as u32));
            }
        }
        let factorial_weight = exponents
            .iter()
            .map(|e| e.iter().map(|&k| factorial(k as usize)).product())
            .collect();
        Self {
            nvars,
            order,
            exponents,
            products,
            lookup,
            factorial_weight,
        }
    }

    /// Shared, lazily built space for `(nvars, order)`.
    pub fn get(nvars: usize, order: usize) -> &'static JetSpace {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), &'static JetSpace>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Box::leak(Box::new(JetSpace::build(nvars, order))))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn index_of(&self, exponent: &[u8]) -> Option<usize> {
        self.lookup.get(exponent).copied()
    }
}

fn enumerate_degree(nvars: usize, remaining: usize, pos: usize, current: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if pos + 1 == nvars {
        current[pos] = remaining as u8;
        out.push(current.clone());
        current[pos] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k as u8;
        enumerate_degree(nvars, remaining - k, pos + 1, current, out);
    }
    current[pos] = 0;
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

/// A truncated Taylor expansion with complex coefficients.
#[derive(Debug, Clone)]
pub struct Jet {
    space: &'static JetSpace,
    coeffs: Vec<C64>,
}

impl Jet {
    pub fn constant(space: &'static JetSpace, value: C64) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); space.len()];
        coeffs[0] = value;
        Self { space, coeffs }
    }

    /// The coordinate function `x_k` expanded at `value`.
    pub fn variable(space: &'static JetSpace, k: usize, value: f64) -> Self {
        let mut jet = Self::constant(space, C64::new(value, 0.0));
        if space.order >= 1 {
            let mut e = vec![0u8; space.nvars];
            e[k] = 1;
            jet.coeffs[space.lookup[&e]] = C64::new(1.0, 0.0);
        }
        jet
    }

    /// Complex coordinates `z_k = x_k + i y_k` expanded at `z`, over the
    /// interleaved real variables `(x₁, y₁, …)`.
    pub fn complex_coordinates(z: &[C64], order: usize) -> Vec<Jet> {
        let space = JetSpace::get(2 * z.len(), order);
        z.iter()
            .enumerate()
            .map(|(k, zk)| {
                let x = Jet::variable(space, 2 * k, zk.re);
                let mut y = Jet::variable(space, 2 * k + 1, zk.im);
                for v in y.coeffs.iter_mut() {
                    *v *= C64::new(0.0, 1.0);
                }
                x + y
            })
            .collect()
    }

    pub fn space(&self) -> &'static JetSpace {
        self.space
    }

    pub fn value(&self) -> C64 {
        self.coeffs[0]
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn lift(&self, value: C64) -> Self {
        Self::constant(self.space, value)
    }

    /// Partial derivative along a multiset of real variable indices, e.g.
    /// `&[0, 0, 3]` is `∂³/∂x₀²∂x₃`.
    pub fn partial(&self, vars: &[usize]) -> C64 {
        let mut e = vec![0u8; self.space.nvars];
        for &v in vars {
            e[v] += 1;
        }
        match self.space.lookup.get(&e) {
            Some(&idx) => self.coeffs[idx] * self.space.factorial_weight[idx],
            None => C64::new(0.0, 0.0),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            space: self.space,
            coeffs: self.coeffs.iter().map(|z| z * s).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            space: self.space,
            coeffs: self.coeffs.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn re(&self) -> Self {
        Self {
            space: self.space,
            coeffs: self.coeffs.iter().map(|z| C64::new(z.re, 0.0)).collect(),
        }
    }

    pub fn im(&self) -> Self {
        Self {
            space: self.space,
            coeffs: self.coeffs.iter().map(|z| C64::new(z.im, 0.0)).collect(),
        }
    }

    pub fn abs2(&self) -> Self {
        self * &self.conj()
    }

    /// Compose a univariate function with this jet given its derivatives
    /// `f(a), f'(a), …, f^{(K)}(a)` at the constant term `a`.
    pub fn compose(&self, derivs: &[C64]) -> Self {
        let order = self.space.order;
        let mut h = self.clone();
        h.coeffs[0] = C64::new(0.0, 0.0);
        let mut result = self.lift(derivs[order] / factorial(order));
        for k in (0..order).rev() {
            result = &result * &h;
            result.coeffs[0] += derivs[k] / factorial(k);
        }
        result
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&vec![e; self.space.order + 1])
    }

    /// Principal logarithm.
    pub fn ln(&self) -> Self {
        let a = self.value();
        let mut d = Vec::with_capacity(self.space.order + 1);
        d.push(a.ln());
        for k in 1..=self.space.order {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            d.push(C64::new(sign * factorial(k - 1), 0.0) / a.powu(k as u32));
        }
        self.compose(&d)
    }

    /// `x^p` for real `p` (callers restrict non-integer `p` to positive bases).
    pub fn powf(&self, p: f64) -> Self {
        let a = self.value();
        let mut d = Vec::with_capacity(self.space.order + 1);
        let mut falling = 1.0;
        for k in 0..=self.space.order {
            d.push(a.powf(p - k as f64) * falling);
            falling *= p - k as f64;
        }
        self.compose(&d)
    }

    pub fn recip(&self) -> Self {
        self.powi(-1)
    }

    pub fn powi(&self, p: i32) -> Self {
        if p < 0 {
            let a = self.value();
            let mut d = Vec::with_capacity(self.space.order + 1);
            let mut falling = 1.0;
            for k in 0..=self.space.order {
                d.push(a.powi(p - k as i32) * falling);
                falling *= (p - k as i32) as f64;
            }
            return self.compose(&d);
        }
        let mut result = self.lift(C64::new(1.0, 0.0));
        let mut base = self.clone();
        let mut e = p as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    pub fn div(&self, other: &Jet) -> Self {
        self * &other.recip()
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;

    fn mul(self, rhs: &'a Jet) -> Jet {
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len()];
        for &(a, b, p) in &self.space.products {
            out[p as usize] += self.coeffs[a as usize] * rhs.coeffs[b as usize];
        }
        Jet {
            space: self.space,
            coeffs: out,
        }
    }
}

impl Mul for Jet {
    type Output = Jet;

    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl Add for Jet {
    type Output = Jet;

    fn add(mut self, rhs: Jet) -> Jet {
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;

    fn sub(mut self, rhs: Jet) -> Jet {
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
        self
    }
}

impl Neg for Jet {
    type Output = Jet;

    fn neg(mut self) -> Jet {
        for a in self.coeffs.iter_mut() {
            *a = -*a;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn monomial_count_matches_binomial() {
        // C(m + K, K)
        assert_eq!(JetSpace::get(4, 4).len(), 70);
        assert_eq!(JetSpace::get(4, 3).len(), 35);
        assert_eq!(JetSpace::get(6, 4).len(), 210);
    }

    #[test]
    fn polynomial_derivatives_are_exact() {
        let space = JetSpace::get(2, 4);
        let x = Jet::variable(space, 0, 0.7);
        let y = Jet::variable(space, 1, -0.3);
        // f = x³ y
        let f = x.powi(3) * y;
        assert!((f.value() - c(0.343 * -0.3, 0.0)).norm() < 1e-14);
        assert!((f.partial(&[0]) - c(3.0 * 0.49 * -0.3, 0.0)).norm() < 1e-14);
        assert!((f.partial(&[0, 0, 1]) - c(6.0 * 0.7, 0.0)).norm() < 1e-14);
        assert!((f.partial(&[0, 0, 0, 1]) - c(6.0, 0.0)).norm() < 1e-14);
        assert!(f.partial(&[1, 1]).norm() < 1e-14);
    }

    #[test]
    fn log_and_exp_match_closed_form_derivatives() {
        let space = JetSpace::get(1, 4);
        let x = Jet::variable(space, 0, 0.4);
        let f = x.ln();
        // d⁴/dx⁴ log x = -6/x⁴
        assert!((f.partial(&[0, 0, 0, 0]).re + 6.0 / 0.4f64.powi(4)).abs() < 1e-9);
        let g = x.exp();
        assert!((g.partial(&[0, 0, 0]).re - 0.4f64.exp()).abs() < 1e-12);
        let h = x.powf(0.5);
        // d²/dx² √x = -1/4 x^{-3/2}
        assert!((h.partial(&[0, 0]).re + 0.25 * 0.4f64.powf(-1.5)).abs() < 1e-12);
        let r = x.recip();
        assert!((r.partial(&[0, 0, 0]).re + 6.0 / 0.4f64.powi(4)).abs() < 1e-9);
    }

    #[test]
    fn wirtinger_of_abs2_is_one() {
        let z = Jet::complex_coordinates(&[c(0.3, -0.2)], 2);
        let f = z[0].abs2();
        // ∂z∂z̄ |z|² = 1 = (φ_xx + φ_yy)/4
        let lap = (f.partial(&[0, 0]) + f.partial(&[1, 1])) / 4.0;
        assert!((lap - c(1.0, 0.0)).norm() < 1e-14);
        assert!((f.value() - c(0.13, 0.0)).norm() < 1e-14);
    }
}
