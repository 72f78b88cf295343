//! First-derivative finite-difference stencils.

use super::grid::Axis;
use crate::error::{Error, Result};

/// Which derivative source a chart uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// Successive finite differences of sampled values.
    FiniteDifference,
    /// Closed-form jets up to `jet_order`, finite differences beyond.
    AnalyticJets,
}

/// Stencil order and derivative backend. Boundary handling follows each
/// axis: periodic axes wrap, open axes switch to one-sided stencils.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StencilConfig {
    pub order: usize,
    pub backend: Backend,
    pub jet_order: usize,
}

impl StencilConfig {
    pub fn new(order: usize, backend: Backend, jet_order: usize) -> Result<Self> {
        if !matches!(order, 2 | 4 | 6) {
            return Err(Error::StencilOrderUnsupported { order });
        }
        Ok(Self { order, backend, jet_order })
    }

    pub fn finite_difference(order: usize) -> Result<Self> {
        Self::new(order, Backend::FiniteDifference, 0)
    }

    pub fn analytic(order: usize, jet_order: usize) -> Result<Self> {
        Self::new(order, Backend::AnalyticJets, jet_order)
    }

    /// Jet degree carried by sampled fields.
    pub fn field_degree(&self) -> usize {
        match self.backend {
            Backend::FiniteDifference => 0,
            Backend::AnalyticJets => self.jet_order,
        }
    }
}

impl Default for StencilConfig {
    fn default() -> Self {
        Self { order: 6, backend: Backend::AnalyticJets, jet_order: 4 }
    }
}

/// Fornberg weights for the `k`-th derivative at `x0` from nodes `xs`.
pub fn fornberg(x0: f64, xs: &[f64], k: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; k + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(k);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for s in (1..=mn).rev() {
                    c[i][s] = c1 * (s as f64 * c[i - 1][s - 1] - c5 * c[i - 1][s]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for s in (1..=mn).rev() {
                c[j][s] = (c4 * c[j][s] - s as f64 * c[j][s - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[k]).collect()
}

/// Precomputed first-derivative weights for every node of one axis.
#[derive(Clone, Debug)]
pub struct AxisStencil {
    count: usize,
    periodic: bool,
    inv_h: f64,
    central: Vec<f64>,
    half: usize,
    // open axes: (window start, weights) per boundary node
    boundary: Vec<(usize, Vec<f64>)>,
}

impl AxisStencil {
    pub fn new(axis: &Axis, order: usize) -> Self {
        let half = order / 2;
        let offsets: Vec<f64> = (0..=order).map(|k| k as f64 - half as f64).collect();
        let central = fornberg(0.0, &offsets, 1);
        let mut boundary = Vec::new();
        if !axis.periodic {
            let n = axis.count;
            for i in 0..n {
                if i >= half && i + half < n {
                    boundary.push((0, Vec::new()));
                    continue;
                }
                let width = (order + 1).min(n);
                let start = i.saturating_sub(half).min(n - width);
                let pts: Vec<f64> = (0..width).map(|k| (start + k) as f64).collect();
                boundary.push((start, fornberg(i as f64, &pts, 1)));
            }
        }
        Self {
            count: axis.count,
            periodic: axis.periodic,
            inv_h: 1.0 / axis.spacing(),
            central,
            half,
            boundary,
        }
    }

    /// Derivative at axis position `i` of the samples `f(j)`.
    #[inline]
    pub fn apply(&self, i: usize, f: impl Fn(usize) -> f64) -> f64 {
        let n = self.count;
        let mut acc = 0.0;
        if self.periodic {
            for (k, w) in self.central.iter().enumerate() {
                let j = (i + n + k - self.half) % n;
                acc += w * f(j);
            }
        } else if i >= self.half && i + self.half < n {
            for (k, w) in self.central.iter().enumerate() {
                acc += w * f(i + k - self.half);
            }
        } else {
            let (start, ref ws) = self.boundary[i];
            for (k, w) in ws.iter().enumerate() {
                acc += w * f(start + k);
            }
        }
        acc * self.inv_h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_matches_textbook_weights() {
        let w = fornberg(0.0, &[-1.0, 0.0, 1.0], 1);
        assert_eq!(w, vec![-0.5, 0.0, 0.5]);
        let w = fornberg(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        let want = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let w = fornberg(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w, vec![1.0, -2.0, 1.0]);
    }

    #[test]
    fn polynomial_exactness_everywhere() {
        for order in [2, 4, 6] {
            let axis = Axis::new(0.0, 1.0, 2 * order + 1, false);
            let st = AxisStencil::new(&axis, order);
            for i in 0..axis.count {
                let x = axis.coord(i);
                let d = st.apply(i, |j| axis.coord(j).powi(order as i32));
                let want = order as f64 * x.powi(order as i32 - 1);
                assert!((d - want).abs() < 1e-12, "order {order} node {i}: {d} vs {want}");
            }
        }
    }

    #[test]
    fn unsupported_order() {
        assert!(matches!(
            StencilConfig::finite_difference(3),
            Err(Error::StencilOrderUnsupported { order: 3 })
        ));
    }
}
