//! Truncated multivariate Taylor polynomials ("jets").
//!
//! A jet of degree `d` in `m` variables stores the Taylor coefficients of a
//! function at a point, indexed by monomials of total degree `<= d`. The
//! monomials are sorted by total degree, so a jet of lower degree is a prefix
//! of one of higher degree. Differentiation lowers the degree by one.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use smallvec::SmallVec;

/// Monomial tables for `m` variables up to `max_deg`.
#[derive(Debug)]
pub struct JetLayout {
    m: usize,
    max_deg: usize,
    exps: Vec<Vec<u8>>,
    ncoef: Vec<usize>,
    mul: Vec<(u32, u32, u32)>,
    nmul: Vec<usize>,
    deriv: Vec<Vec<(u32, f64)>>,
    index: HashMap<Vec<u8>, usize>,
}

fn binom(n: usize, k: usize) -> usize {
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

impl JetLayout {
    fn build(m: usize, max_deg: usize) -> Self {
        let mut exps: Vec<Vec<u8>> = Vec::new();
        let mut ncoef = Vec::with_capacity(max_deg + 1);
        for d in 0..=max_deg {
            let mut level = Vec::new();
            let mut cur = vec![0u8; m];
            gen_level(m, d, 0, &mut cur, &mut level);
            exps.extend(level);
            ncoef.push(exps.len());
            debug_assert_eq!(exps.len(), binom(m + d, d));
        }
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();

        let mut mul = Vec::new();
        let mut nmul = Vec::with_capacity(max_deg + 1);
        for d in 0..=max_deg {
            let lo = if d == 0 { 0 } else { ncoef[d - 1] };
            for c in lo..ncoef[d] {
                for a in 0..=c {
                    let ea = &exps[a];
                    if ea.iter().zip(&exps[c]).any(|(x, y)| x > y) {
                        continue;
                    }
                    let eb: Vec<u8> = exps[c].iter().zip(ea).map(|(y, x)| y - x).collect();
                    let b = index[&eb];
                    mul.push((a as u32, b as u32, c as u32));
                }
            }
            nmul.push(mul.len());
        }

        let mut deriv = Vec::with_capacity(m);
        for axis in 0..m {
            let mut table = Vec::new();
            if max_deg > 0 {
                for e in &exps[..ncoef[max_deg - 1]] {
                    let mut up = e.clone();
                    up[axis] += 1;
                    table.push((index[&up] as u32, (e[axis] + 1) as f64));
                }
            }
            deriv.push(table);
        }
        Self { m, max_deg, exps, ncoef, mul, nmul, deriv, index }
    }

    pub fn vars(&self) -> usize {
        self.m
    }

    pub fn max_deg(&self) -> usize {
        self.max_deg
    }

    /// Number of coefficients of a jet of degree `d`.
    #[inline]
    pub fn ncoef(&self, d: usize) -> usize {
        self.ncoef[d]
    }

    pub fn exponents(&self, k: usize) -> &[u8] {
        &self.exps[k]
    }

    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.index.get(exps).copied()
    }

    /// Index of the linear monomial in `axis`.
    pub fn linear(&self, axis: usize) -> usize {
        1 + axis
    }

    /// `out = a * b` truncated at degree `d`.
    #[inline]
    pub fn mul_into(&self, a: &[f64], b: &[f64], out: &mut [f64], d: usize) {
        let n = self.ncoef[d];
        out[..n].iter_mut().for_each(|x| *x = 0.0);
        for &(i, j, k) in &self.mul[..self.nmul[d]] {
            out[k as usize] += a[i as usize] * b[j as usize];
        }
    }

    /// `out += s * a * b` truncated at degree `d`.
    #[inline]
    pub fn fma_into(&self, s: f64, a: &[f64], b: &[f64], out: &mut [f64], d: usize) {
        for &(i, j, k) in &self.mul[..self.nmul[d]] {
            out[k as usize] += s * a[i as usize] * b[j as usize];
        }
    }

    /// `out = f(a)` where `taylor[k] = f^(k)(a_0) / k!`, truncated at degree `d`.
    pub fn compose_into(&self, a: &[f64], taylor: &[f64], out: &mut [f64], d: usize) {
        let n = self.ncoef[d];
        let mut x: SmallVec<[f64; 64]> = SmallVec::from_slice(&a[..n]);
        x[0] = 0.0;
        let mut acc: SmallVec<[f64; 64]> = SmallVec::from_elem(0.0, n);
        let mut tmp: SmallVec<[f64; 64]> = SmallVec::from_elem(0.0, n);
        acc[0] = taylor[d];
        for k in (0..d).rev() {
            self.mul_into(&acc, &x, &mut tmp, d);
            std::mem::swap(&mut acc, &mut tmp);
            acc[0] += taylor[k];
        }
        out[..n].copy_from_slice(&acc);
    }

    /// `out = d a / d x_axis`, degree `d - 1` from a jet of degree `d`.
    #[inline]
    pub fn deriv_into(&self, a: &[f64], axis: usize, out: &mut [f64], d: usize) {
        debug_assert!(d >= 1);
        let n = self.ncoef[d - 1];
        for (k, &(src, f)) in self.deriv[axis][..n].iter().enumerate() {
            out[k] = f * a[src as usize];
        }
    }
}

fn gen_level(m: usize, d: usize, pos: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if pos == m - 1 {
        cur[pos] = d as u8;
        out.push(cur.clone());
        return;
    }
    for k in (0..=d).rev() {
        cur[pos] = k as u8;
        gen_level(m, d - k, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

/// Shared layout for `m` variables up to `max_deg`.
pub fn layout(m: usize, max_deg: usize) -> Arc<JetLayout> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetLayout>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("layout cache poisoned");
    guard
        .entry((m, max_deg))
        .or_insert_with(|| Arc::new(JetLayout::build(m.max(1), max_deg)))
        .clone()
}

/// Taylor coefficients `f^(k)(x)/k!`, `k = 0..=d`, of elementary functions.
pub mod series {
    pub fn recip(x: f64, d: usize) -> Vec<f64> {
        let mut t = Vec::with_capacity(d + 1);
        let mut c = 1.0 / x;
        for _ in 0..=d {
            t.push(c);
            c *= -1.0 / x;
        }
        t
    }

    pub fn exp(x: f64, d: usize) -> Vec<f64> {
        let e = x.exp();
        let mut t = Vec::with_capacity(d + 1);
        let mut f = 1.0;
        for k in 0..=d {
            if k > 0 {
                f /= k as f64;
            }
            t.push(e * f);
        }
        t
    }

    pub fn ln(x: f64, d: usize) -> Vec<f64> {
        let mut t = vec![x.ln()];
        for k in 1..=d {
            let s = if k % 2 == 1 { 1.0 } else { -1.0 };
            t.push(s / (k as f64 * x.powi(k as i32)));
        }
        t
    }

    /// `x^p` for real `p`.
    pub fn powf(x: f64, p: f64, d: usize) -> Vec<f64> {
        let mut t = Vec::with_capacity(d + 1);
        let mut c = 1.0;
        for k in 0..=d {
            t.push(c * x.powf(p - k as f64));
            c *= (p - k as f64) / (k as f64 + 1.0);
        }
        t
    }

    fn cyclic(vals: [f64; 4], d: usize) -> Vec<f64> {
        let mut t = Vec::with_capacity(d + 1);
        let mut f = 1.0;
        for k in 0..=d {
            if k > 0 {
                f /= k as f64;
            }
            t.push(vals[k % 4] * f);
        }
        t
    }

    pub fn sin(x: f64, d: usize) -> Vec<f64> {
        let (s, c) = x.sin_cos();
        cyclic([s, c, -s, -c], d)
    }

    pub fn cos(x: f64, d: usize) -> Vec<f64> {
        let (s, c) = x.sin_cos();
        cyclic([c, -s, -c, s], d)
    }

    pub fn sinh(x: f64, d: usize) -> Vec<f64> {
        let (s, c) = (x.sinh(), x.cosh());
        cyclic([s, c, s, c], d)
    }

    pub fn cosh(x: f64, d: usize) -> Vec<f64> {
        let (s, c) = (x.sinh(), x.cosh());
        cyclic([c, s, c, s], d)
    }

    /// `atan` through the series of its derivative `1/(1+x^2)`.
    pub fn atan(x: f64, d: usize) -> Vec<f64> {
        // coefficients of 1/(1 + (x+h)^2) in h, then integrate
        let a = 1.0 + x * x;
        let mut q = vec![0.0; d + 1];
        if d >= 1 {
            // q(h) * (a + 2 x h + h^2) = 1
            q[0] = 1.0 / a;
            for k in 1..d {
                let mut s = 2.0 * x * q[k - 1];
                if k >= 2 {
                    s += q[k - 2];
                }
                q[k] = -s / a;
            }
        }
        let mut t = vec![x.atan()];
        for k in 1..=d {
            t.push(q[k - 1] / k as f64);
        }
        t
    }
}

/// A single jet with its own storage.
#[derive(Clone, Debug)]
pub struct Jet {
    layout: Arc<JetLayout>,
    deg: usize,
    c: SmallVec<[f64; 16]>,
}

impl Jet {
    pub fn constant(layout: &Arc<JetLayout>, deg: usize, v: f64) -> Self {
        let mut c = SmallVec::from_elem(0.0, layout.ncoef(deg));
        c[0] = v;
        Self { layout: layout.clone(), deg, c }
    }

    /// The coordinate function `x_axis` expanded at `x0`.
    pub fn variable(layout: &Arc<JetLayout>, deg: usize, axis: usize, x0: f64) -> Self {
        let mut j = Self::constant(layout, deg, x0);
        if deg >= 1 {
            j.c[layout.linear(axis)] = 1.0;
        }
        j
    }

    pub fn from_coeffs(layout: &Arc<JetLayout>, deg: usize, coeffs: &[f64]) -> Self {
        let n = layout.ncoef(deg);
        Self { layout: layout.clone(), deg, c: SmallVec::from_slice(&coeffs[..n]) }
    }

    pub fn layout(&self) -> &Arc<JetLayout> {
        &self.layout
    }

    pub fn deg(&self) -> usize {
        self.deg
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Partial derivative of multi-index `exps` at the expansion point.
    pub fn derivative(&self, exps: &[u8]) -> f64 {
        let total: usize = exps.iter().map(|&e| e as usize).sum();
        if total > self.deg {
            return f64::NAN;
        }
        let k = self.layout.index_of(exps).expect("multi-index in layout");
        let fact: f64 = exps.iter().map(|&e| (1..=e as u64).product::<u64>() as f64).product();
        self.c[k] * fact
    }

    pub fn truncate(&self, deg: usize) -> Self {
        let d = deg.min(self.deg);
        Self::from_coeffs(&self.layout, d, &self.c)
    }

    fn binary(&self, o: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let d = self.deg.min(o.deg);
        let n = self.layout.ncoef(d);
        let c = (0..n).map(|k| f(self.c[k], o.c[k])).collect();
        Self { layout: self.layout.clone(), deg: d, c }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { layout: self.layout.clone(), deg: self.deg, c: self.c.iter().map(|x| x * s).collect() }
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut r = self.clone();
        r.c[0] += s;
        r
    }

    pub fn compose(&self, taylor: impl Fn(f64, usize) -> Vec<f64>) -> Self {
        let t = taylor(self.c[0], self.deg);
        let mut c = SmallVec::from_elem(0.0, self.c.len());
        self.layout.compose_into(&self.c, &t, &mut c, self.deg);
        Self { layout: self.layout.clone(), deg: self.deg, c }
    }

    pub fn recip(&self) -> Self {
        self.compose(series::recip)
    }

    pub fn sqrt(&self) -> Self {
        self.compose(|x, d| series::powf(x, 0.5, d))
    }

    pub fn powf(&self, p: f64) -> Self {
        self.compose(|x, d| series::powf(x, p, d))
    }

    pub fn powi(&self, p: i32) -> Self {
        if p == 0 {
            return Self::constant(&self.layout, self.deg, 1.0);
        }
        let base = if p < 0 { self.recip() } else { self.clone() };
        let mut r = base.clone();
        for _ in 1..p.unsigned_abs() {
            r = &r * &base;
        }
        r
    }

    pub fn exp(&self) -> Self {
        self.compose(series::exp)
    }

    pub fn ln(&self) -> Self {
        self.compose(series::ln)
    }

    pub fn sin(&self) -> Self {
        self.compose(series::sin)
    }

    pub fn cos(&self) -> Self {
        self.compose(series::cos)
    }

    pub fn tan(&self) -> Self {
        &self.sin() / &self.cos()
    }

    pub fn sinh(&self) -> Self {
        self.compose(series::sinh)
    }

    pub fn cosh(&self) -> Self {
        self.compose(series::cosh)
    }

    pub fn tanh(&self) -> Self {
        &self.sinh() / &self.cosh()
    }

    pub fn atan(&self) -> Self {
        self.compose(series::atan)
    }

    /// `|x|` using the sign of the value.
    pub fn abs(&self) -> Self {
        if self.c[0] < 0.0 {
            self.scale(-1.0)
        } else {
            self.clone()
        }
    }

    pub fn partial(&self, axis: usize) -> Self {
        assert!(self.deg >= 1, "derivative of a degree-0 jet");
        let n = self.layout.ncoef(self.deg - 1);
        let mut c = SmallVec::from_elem(0.0, n);
        self.layout.deriv_into(&self.c, axis, &mut c, self.deg);
        Self { layout: self.layout.clone(), deg: self.deg - 1, c }
    }
}

macro_rules! jet_binop {
    ($tr:ident, $f:ident, $op:tt) => {
        impl std::ops::$tr<&Jet> for &Jet {
            type Output = Jet;
            fn $f(self, o: &Jet) -> Jet {
                self.binary(o, |a, b| a $op b)
            }
        }
        impl std::ops::$tr<Jet> for Jet {
            type Output = Jet;
            fn $f(self, o: Jet) -> Jet {
                (&self).$f(&o)
            }
        }
    };
}
jet_binop!(Add, add, +);
jet_binop!(Sub, sub, -);

impl std::ops::Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        let d = self.deg.min(o.deg);
        let mut c = SmallVec::from_elem(0.0, self.layout.ncoef(d));
        self.layout.mul_into(&self.c, &o.c, &mut c, d);
        Jet { layout: self.layout.clone(), deg: d, c }
    }
}

impl std::ops::Mul<Jet> for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        &self * &o
    }
}

impl std::ops::Div<&Jet> for &Jet {
    type Output = Jet;
    fn div(self, o: &Jet) -> Jet {
        self * &o.recip()
    }
}

impl std::ops::Div<Jet> for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        &self / &o
    }
}

impl std::ops::Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl std::ops::Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn var(l: &Arc<JetLayout>, d: usize, axis: usize, x: f64) -> Jet {
        Jet::variable(l, d, axis, x)
    }

    #[test]
    fn layout_sizes() {
        let l = layout(2, 4);
        assert_eq!(l.ncoef(4), 15);
        assert_eq!(l.ncoef(0), 1);
        let l3 = layout(3, 3);
        assert_eq!(l3.ncoef(3), 20);
        assert_eq!(l.exponents(1), &[1, 0]);
        assert_eq!(l.exponents(2), &[0, 1]);
    }

    #[test]
    fn product_rule_and_mixed_derivatives() {
        let l = layout(2, 5);
        let s = var(&l, 5, 0, 0.3);
        let t = var(&l, 5, 1, -0.7);
        // f = sin(s) * exp(s t)
        let f = &s.sin() * &(&s * &t).exp();
        let (s0, t0) = (0.3f64, -0.7f64);
        let e = (s0 * t0).exp();
        // d^2 f / ds dt computed by hand
        let fst = s0.cos() * s0 * e + s0.sin() * (e + s0 * t0 * e);
        assert!((f.derivative(&[1, 1]) - fst).abs() < 1e-13);
        let fs = s0.cos() * e + s0.sin() * t0 * e;
        assert!((f.derivative(&[1, 0]) - fs).abs() < 1e-13);
        assert!((f.partial(0).partial(1).value() - fst).abs() < 1e-13);
    }

    #[test]
    fn series_against_closed_forms() {
        let l = layout(1, 6);
        let x = var(&l, 6, 0, 0.4);
        let checks: Vec<(Jet, Box<dyn Fn(f64) -> f64>)> = vec![
            (x.recip(), Box::new(|x: f64| 1.0 / x)),
            (x.sqrt(), Box::new(|x: f64| x.sqrt())),
            (x.ln(), Box::new(|x: f64| x.ln())),
            (x.atan(), Box::new(|x: f64| x.atan())),
            (x.tan(), Box::new(|x: f64| x.tan())),
            (x.cosh(), Box::new(|x: f64| x.cosh())),
        ];
        // oracle: high-order central differences of the scalar function
        for (jet, f) in checks {
            let h = 1e-3;
            let d1 = (f(0.4 - 2.0 * h) - 8.0 * f(0.4 - h) + 8.0 * f(0.4 + h) - f(0.4 + 2.0 * h)) / (12.0 * h);
            let d2 = (-f(0.4 - 2.0 * h) + 16.0 * f(0.4 - h) - 30.0 * f(0.4) + 16.0 * f(0.4 + h)
                - f(0.4 + 2.0 * h))
                / (12.0 * h * h);
            assert!((jet.derivative(&[1]) - d1).abs() < 1e-9);
            assert!((jet.derivative(&[2]) - d2).abs() < 1e-6);
            assert!((jet.value() - f(0.4)).abs() < 1e-15);
        }
    }

    #[test]
    fn powi_and_division() {
        let l = layout(2, 4);
        let s = var(&l, 4, 0, 1.3);
        let t = var(&l, 4, 1, 0.2);
        let a = &s + &t;
        let q = &a.powi(3) / &a;
        let r = &a * &a;
        for (x, y) in q.coeffs().iter().zip(r.coeffs()) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn exp_ln_roundtrip(x in 0.1..5.0f64, y in -1.0..1.0f64) {
            let l = layout(2, 4);
            let a = &var(&l, 4, 0, x) + &var(&l, 4, 1, y).sin();
            prop_assume!(a.value() > 0.05);
            let b = a.ln().exp();
            for (p, q) in a.coeffs().iter().zip(b.coeffs()) {
                prop_assert!((p - q).abs() < 1e-9 * (1.0 + p.abs()) / a.value().powi(4));
            }
        }

        #[test]
        fn recip_is_inverse(x in 0.2..3.0f64, y in -2.0..2.0f64) {
            let l = layout(2, 5);
            let a = &var(&l, 5, 0, x).exp() + &var(&l, 5, 1, y).cos();
            let one = &a * &a.recip();
            prop_assert!((one.value() - 1.0).abs() < 1e-13);
            for &c in &one.coeffs()[1..] {
                prop_assert!(c.abs() < 1e-10);
            }
        }
    }
}
