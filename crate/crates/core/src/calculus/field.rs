//! Scalar fields on a grid. Each node carries a jet; the partial derivative of
//! a jet field of degree `d > 0` is exact and has degree `d - 1`, while degree 0
//! fields are differentiated with the chart's finite-difference stencils.
//! Masked nodes hold NaN.

use std::sync::Arc;

use rayon::prelude::*;

use super::grid::ParamGrid;
use super::stencil::{AxisStencil, StencilConfig};
use crate::error::Result;
use crate::jet::{self, series, Jet, JetLayout};

/// Grid, stencils and jet tables shared by all fields of one computation.
#[derive(Debug)]
pub struct Chart {
    grid: ParamGrid,
    stencil: StencilConfig,
    layout: Arc<JetLayout>,
    axes: Vec<AxisStencil>,
}

impl Chart {
    pub fn new(grid: ParamGrid, stencil: StencilConfig) -> Result<Arc<Self>> {
        grid.validate_for(stencil.order)?;
        let layout = jet::layout(grid.m(), stencil.field_degree());
        let axes = grid.axes().iter().map(|a| AxisStencil::new(a, stencil.order)).collect();
        Ok(Arc::new(Self { grid, stencil, layout, axes }))
    }

    pub fn grid(&self) -> &ParamGrid {
        &self.grid
    }

    pub fn stencil(&self) -> &StencilConfig {
        &self.stencil
    }

    pub fn layout(&self) -> &Arc<JetLayout> {
        &self.layout
    }

    pub fn m(&self) -> usize {
        self.grid.m()
    }

    pub fn nodes(&self) -> usize {
        self.grid.node_count()
    }

    pub fn max_deg(&self) -> usize {
        self.layout.max_deg()
    }
}

/// A scalar jet field.
#[derive(Clone, Debug)]
pub struct Field {
    chart: Arc<Chart>,
    deg: usize,
    data: Vec<f64>,
}

impl Field {
    fn alloc(chart: &Arc<Chart>, deg: usize) -> Self {
        let n = chart.nodes() * chart.layout.ncoef(deg);
        Self { chart: chart.clone(), deg, data: vec![0.0; n] }
    }

    /// Constant field, exact to the chart's full degree.
    pub fn constant(chart: &Arc<Chart>, v: f64) -> Self {
        let mut f = Self::alloc(chart, chart.max_deg());
        let s = f.stride();
        f.data.iter_mut().step_by(s).for_each(|x| *x = v);
        f
    }

    pub fn zeros(chart: &Arc<Chart>) -> Self {
        Self::constant(chart, 0.0)
    }

    /// Degree-0 field from node values.
    pub fn from_values(chart: &Arc<Chart>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), chart.nodes());
        Self { chart: chart.clone(), deg: 0, data: values }
    }

    /// Degree-0 field sampled from a function of the node coordinates.
    pub fn sample(chart: &Arc<Chart>, f: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let g = chart.grid();
        let v = (0..chart.nodes()).into_par_iter().map(|n| f(&g.coords(n))).collect();
        Self::from_values(chart, v)
    }

    /// The coordinate function of `axis`, exact at full degree.
    pub fn coordinate(chart: &Arc<Chart>, axis: usize) -> Self {
        let d = chart.max_deg();
        let mut f = Self::alloc(chart, d);
        let s = f.stride();
        let g = chart.grid().clone();
        f.data.par_chunks_mut(s).enumerate().for_each(|(n, c)| {
            c[0] = g.coords(n)[axis];
            if d >= 1 {
                c[1 + axis] = 1.0;
            }
        });
        f
    }

    /// Evaluates a jet function of the coordinates at every node, producing
    /// `ncomp` fields of degree `deg`.
    pub fn eval_jets(
        chart: &Arc<Chart>,
        deg: usize,
        ncomp: usize,
        f: &(dyn Fn(&[Jet]) -> Vec<Jet> + Sync),
    ) -> Vec<Field> {
        let layout = chart.layout.clone();
        let g = chart.grid().clone();
        let m = chart.m();
        let per_node: Vec<Vec<Jet>> = (0..chart.nodes())
            .into_par_iter()
            .map(|n| {
                let x = g.coords(n);
                let vars: Vec<Jet> = (0..m).map(|a| Jet::variable(&layout, deg, a, x[a])).collect();
                f(&vars)
            })
            .collect();
        Self::scatter(chart, deg, ncomp, &per_node)
    }

    fn scatter(chart: &Arc<Chart>, deg: usize, ncomp: usize, per_node: &[Vec<Jet>]) -> Vec<Field> {
        let mut out: Vec<Field> = (0..ncomp).map(|_| Self::alloc(chart, deg)).collect();
        let s = chart.layout.ncoef(deg);
        for (n, jets) in per_node.iter().enumerate() {
            for (k, j) in jets.iter().enumerate().take(ncomp) {
                let dst = &mut out[k].data[n * s..(n + 1) * s];
                let src = j.coeffs();
                if src.len() >= s {
                    dst.copy_from_slice(&src[..s]);
                } else {
                    // a lower degree result marks the whole node as unusable
                    dst.iter_mut().for_each(|x| *x = f64::NAN);
                }
            }
        }
        out
    }

    /// Per-node map over several input fields. Each input is handed over as a
    /// jet of the common minimum degree (capped at `deg`).
    pub fn node_map(
        inputs: &[&Field],
        nout: usize,
        f: &(dyn Fn(usize, &[Jet]) -> Vec<Jet> + Sync),
    ) -> Vec<Field> {
        let chart = inputs[0].chart.clone();
        let deg = inputs.iter().map(|x| x.deg).min().unwrap_or(0);
        let per_node: Vec<Vec<Jet>> = (0..chart.nodes())
            .into_par_iter()
            .map(|n| {
                let jets: Vec<Jet> = inputs.iter().map(|x| x.jet(n).truncate(deg)).collect();
                f(n, &jets)
            })
            .collect();
        Self::scatter(&chart, deg, nout, &per_node)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn deg(&self) -> usize {
        self.deg
    }

    #[inline]
    fn stride(&self) -> usize {
        self.chart.layout.ncoef(self.deg)
    }

    pub fn coeffs(&self, node: usize) -> &[f64] {
        let s = self.stride();
        &self.data[node * s..(node + 1) * s]
    }

    pub fn coeffs_mut(&mut self, node: usize) -> &mut [f64] {
        let s = self.stride();
        &mut self.data[node * s..(node + 1) * s]
    }

    pub fn value(&self, node: usize) -> f64 {
        self.data[node * self.stride()]
    }

    pub fn values(&self) -> Vec<f64> {
        self.data.iter().step_by(self.stride()).copied().collect()
    }

    pub fn jet(&self, node: usize) -> Jet {
        Jet::from_coeffs(&self.chart.layout, self.deg, self.coeffs(node))
    }

    pub fn is_masked(&self, node: usize) -> bool {
        self.value(node).is_nan()
    }

    pub fn truncate(&self, deg: usize) -> Field {
        if deg >= self.deg {
            return self.clone();
        }
        let mut out = Self::alloc(&self.chart, deg);
        let (si, so) = (self.stride(), out.stride());
        out.data
            .par_chunks_mut(so)
            .zip(self.data.par_chunks(si))
            .for_each(|(o, a)| o.copy_from_slice(&a[..so]));
        out
    }

    /// Sets every node where `mask` is true to NaN.
    pub fn masked(&self, mask: &[bool]) -> Field {
        let mut out = self.clone();
        let s = out.stride();
        out.data.par_chunks_mut(s).zip(mask.par_iter()).for_each(|(c, &m)| {
            if m {
                c.iter_mut().for_each(|x| *x = f64::NAN);
            }
        });
        out
    }

    fn unary(&self, f: impl Fn(&[f64], &mut [f64]) + Sync) -> Field {
        let mut out = Self::alloc(&self.chart, self.deg);
        let s = self.stride();
        out.data
            .par_chunks_mut(s)
            .zip(self.data.par_chunks(s))
            .for_each(|(o, a)| f(a, o));
        out
    }

    fn binary(&self, o: &Field, f: impl Fn(&[f64], &[f64], &mut [f64], usize) + Sync) -> Field {
        let d = self.deg.min(o.deg);
        let mut out = Self::alloc(&self.chart, d);
        let (sa, sb, so) = (self.stride(), o.stride(), out.stride());
        out.data
            .par_chunks_mut(so)
            .zip(self.data.par_chunks(sa).zip(o.data.par_chunks(sb)))
            .for_each(|(c, (a, b))| f(a, b, c, d));
        out
    }

    pub fn scale(&self, s: f64) -> Field {
        self.unary(|a, o| o.iter_mut().zip(a).for_each(|(x, y)| *x = s * y))
    }

    pub fn add_scalar(&self, s: f64) -> Field {
        self.unary(|a, o| {
            o.copy_from_slice(a);
            o[0] += s;
        })
    }

    /// `f(self)` through the Taylor coefficients produced by `taylor`.
    pub fn map_series(&self, taylor: impl Fn(f64, usize) -> Vec<f64> + Sync) -> Field {
        let l = self.chart.layout.clone();
        let d = self.deg;
        self.unary(|a, o| {
            let t = taylor(a[0], d);
            l.compose_into(a, &t, o, d);
        })
    }

    pub fn recip(&self) -> Field {
        self.map_series(series::recip)
    }

    pub fn sqrt(&self) -> Field {
        self.map_series(|x, d| series::powf(x, 0.5, d))
    }

    pub fn powf(&self, p: f64) -> Field {
        self.map_series(move |x, d| series::powf(x, p, d))
    }

    pub fn exp(&self) -> Field {
        self.map_series(series::exp)
    }

    pub fn ln(&self) -> Field {
        self.map_series(series::ln)
    }

    pub fn sin(&self) -> Field {
        self.map_series(series::sin)
    }

    pub fn cos(&self) -> Field {
        self.map_series(series::cos)
    }

    /// `|f|` using the sign of the node value.
    pub fn abs(&self) -> Field {
        self.unary(|a, o| {
            let s = if a[0] < 0.0 { -1.0 } else { 1.0 };
            o.iter_mut().zip(a).for_each(|(x, y)| *x = s * y);
        })
    }

    /// Node-wise sign of the value (`NaN` stays `NaN`), as an exact constant.
    pub fn signum(&self) -> Field {
        let v = self.values();
        let mut out = Self::alloc(&self.chart, self.chart.max_deg());
        let s = out.stride();
        out.data.par_chunks_mut(s).zip(v.par_iter()).for_each(|(c, &x)| {
            c[0] = if x.is_nan() { f64::NAN } else if x < 0.0 { -1.0 } else { 1.0 };
        });
        out
    }

    /// Partial derivative along `axis`.
    pub fn partial(&self, axis: usize) -> Field {
        if self.deg > 0 {
            let l = self.chart.layout.clone();
            let d = self.deg;
            let mut out = Self::alloc(&self.chart, d - 1);
            let (si, so) = (self.stride(), out.stride());
            out.data
                .par_chunks_mut(so)
                .zip(self.data.par_chunks(si))
                .for_each(|(o, a)| l.deriv_into(a, axis, o, d));
            return out;
        }
        let grid = self.chart.grid();
        let stride = grid.stride(axis);
        let count = grid.axis(axis).count;
        let st = &self.chart.axes[axis];
        let data = &self.data;
        let v: Vec<f64> = (0..self.chart.nodes())
            .into_par_iter()
            .map(|n| {
                let i = (n / stride) % count;
                let base = n - i * stride;
                st.apply(i, |j| data[base + j * stride])
            })
            .collect();
        Self::from_values(&self.chart, v)
    }

    /// `sum_k c_k a_k b_k` in one pass.
    pub fn sum_products(terms: &[(f64, &Field, &Field)]) -> Field {
        let chart = terms[0].1.chart.clone();
        let d = terms.iter().map(|t| t.1.deg.min(t.2.deg)).min().unwrap();
        let l = chart.layout.clone();
        let mut out = Self::alloc(&chart, d);
        let so = out.stride();
        let strides: Vec<(usize, usize)> = terms.iter().map(|t| (t.1.stride(), t.2.stride())).collect();
        out.data.par_chunks_mut(so).enumerate().for_each(|(n, o)| {
            for (t, &(sa, sb)) in terms.iter().zip(&strides) {
                if t.0 == 0.0 {
                    continue;
                }
                l.fma_into(t.0, &t.1.data[n * sa..], &t.2.data[n * sb..], o, d);
            }
        });
        out
    }

    /// `sum_k c_k a_k` in one pass.
    pub fn sum_scaled(terms: &[(f64, &Field)]) -> Field {
        let chart = terms[0].1.chart.clone();
        let d = terms.iter().map(|t| t.1.deg).min().unwrap();
        let mut out = Self::alloc(&chart, d);
        let so = out.stride();
        let strides: Vec<usize> = terms.iter().map(|t| t.1.stride()).collect();
        out.data.par_chunks_mut(so).enumerate().for_each(|(n, o)| {
            for (t, &sa) in terms.iter().zip(&strides) {
                let a = &t.1.data[n * sa..n * sa + so];
                o.iter_mut().zip(a).for_each(|(x, y)| *x += t.0 * y);
            }
        });
        out
    }

    /// Largest absolute node value over unmasked nodes.
    pub fn max_abs(&self) -> f64 {
        self.values()
            .iter()
            .filter(|x| !x.is_nan())
            .fold(0.0, |a, &b| a.max(b.abs()))
    }
}

macro_rules! field_binop {
    ($tr:ident, $f:ident, $body:expr) => {
        impl std::ops::$tr<&Field> for &Field {
            type Output = Field;
            fn $f(self, o: &Field) -> Field {
                let l = self.chart.layout.clone();
                self.binary(o, |a, b, c, d| ($body)(&l, a, b, c, d))
            }
        }
        impl std::ops::$tr<Field> for Field {
            type Output = Field;
            fn $f(self, o: Field) -> Field {
                (&self).$f(&o)
            }
        }
        impl std::ops::$tr<&Field> for Field {
            type Output = Field;
            fn $f(self, o: &Field) -> Field {
                (&self).$f(o)
            }
        }
        impl std::ops::$tr<Field> for &Field {
            type Output = Field;
            fn $f(self, o: Field) -> Field {
                self.$f(&o)
            }
        }
    };
}

field_binop!(Add, add, |l: &Arc<JetLayout>, a: &[f64], b: &[f64], c: &mut [f64], d: usize| {
    let n = l.ncoef(d);
    for k in 0..n {
        c[k] = a[k] + b[k];
    }
});
field_binop!(Sub, sub, |l: &Arc<JetLayout>, a: &[f64], b: &[f64], c: &mut [f64], d: usize| {
    let n = l.ncoef(d);
    for k in 0..n {
        c[k] = a[k] - b[k];
    }
});
field_binop!(Mul, mul, |l: &Arc<JetLayout>, a: &[f64], b: &[f64], c: &mut [f64], d: usize| {
    l.mul_into(a, b, c, d)
});

impl std::ops::Div<&Field> for &Field {
    type Output = Field;
    fn div(self, o: &Field) -> Field {
        self * &o.recip()
    }
}

impl std::ops::Div<Field> for Field {
    type Output = Field;
    fn div(self, o: Field) -> Field {
        &self * &o.recip()
    }
}

impl std::ops::Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, s: f64) -> Field {
        self.scale(s)
    }
}

impl std::ops::Mul<f64> for Field {
    type Output = Field;
    fn mul(self, s: f64) -> Field {
        self.scale(s)
    }
}

impl std::ops::Add<f64> for &Field {
    type Output = Field;
    fn add(self, s: f64) -> Field {
        self.add_scalar(s)
    }
}

impl std::ops::Add<f64> for Field {
    type Output = Field;
    fn add(self, s: f64) -> Field {
        self.add_scalar(s)
    }
}

impl std::ops::Sub<f64> for &Field {
    type Output = Field;
    fn sub(self, s: f64) -> Field {
        self.add_scalar(-s)
    }
}

impl std::ops::Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scale(-1.0)
    }
}

impl std::ops::Neg for Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::grid::Axis;

    fn chart_1d(n: usize, periodic: bool, order: usize) -> Arc<Chart> {
        let hi = if periodic { 2.0 * std::f64::consts::PI } else { 1.0 };
        let g = ParamGrid::new(vec![Axis::new(0.0, hi, n, periodic)]).unwrap();
        Chart::new(g, StencilConfig::finite_difference(order).unwrap()).unwrap()
    }

    #[test]
    fn constant_has_zero_derivative() {
        let c = chart_1d(20, false, 4);
        let f = Field::constant(&c, 3.5).truncate(0);
        assert!(f.partial(0).values().iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn linear_is_exact() {
        let c = chart_1d(20, false, 2);
        let f = Field::sample(&c, |x| x[0]);
        assert!(f.partial(0).values().iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn sine_converges_at_fourth_order() {
        let mut errs = Vec::new();
        for n in [32, 64, 128] {
            let c = chart_1d(n, true, 4);
            let df = Field::sample(&c, |x| x[0].sin()).partial(0);
            let e = (0..n)
                .map(|k| (df.value(k) - c.grid().coords(k)[0].cos()).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        let p1 = (errs[0] / errs[1]).log2();
        let p2 = (errs[1] / errs[2]).log2();
        assert!(p1 >= 3.7 && p2 >= 3.7, "{p1} {p2}");
    }

    #[test]
    fn jet_partials_are_exact() {
        let g = ParamGrid::new(vec![Axis::new(0.0, 1.0, 16, false), Axis::new(0.0, 1.0, 16, false)]).unwrap();
        let c = Chart::new(g, StencilConfig::analytic(6, 4).unwrap()).unwrap();
        let s = Field::coordinate(&c, 0);
        let t = Field::coordinate(&c, 1);
        let f = (&s * &t).exp();
        let fst = f.partial(0).partial(1);
        for n in 0..c.nodes() {
            let x = c.grid().coords(n);
            let want = (x[0] * x[1]).exp() * (1.0 + x[0] * x[1]);
            assert!((fst.value(n) - want).abs() < 1e-13);
        }
        assert_eq!(fst.deg(), 2);
        // beyond the jet degree derivatives fall back to finite differences
        let d5 = fst.partial(0).partial(0).partial(0);
        assert_eq!(d5.deg(), 0);
    }

    #[test]
    fn sum_products_matches_ops() {
        let c = chart_1d(20, true, 4);
        let a = Field::sample(&c, |x| x[0].sin());
        let b = Field::sample(&c, |x| x[0].cos());
        let s = Field::sum_products(&[(2.0, &a, &b), (-1.0, &a, &a)]);
        let r = &(&a * &b).scale(2.0) - &(&a * &a);
        for n in 0..20 {
            assert!((s.value(n) - r.value(n)).abs() < 1e-15);
        }
    }

    #[test]
    fn nan_spreads_to_stencil_halo() {
        let c = chart_1d(30, false, 4);
        let mut mask = vec![false; 30];
        mask[15] = true;
        let f = Field::sample(&c, |x| x[0]).masked(&mask);
        let d = f.partial(0);
        let bad: Vec<usize> = (0..30).filter(|&k| d.is_masked(k)).collect();
        assert_eq!(bad, vec![13, 14, 15, 16, 17]);
    }
}
