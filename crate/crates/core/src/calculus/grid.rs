//! Parameter grids.

use crate::error::{Error, Result};

/// One axis of a parameter grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub periodic: bool,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, count: usize, periodic: bool) -> Self {
        Self { lo, hi, count, periodic }
    }

    pub fn spacing(&self) -> f64 {
        if self.periodic {
            (self.hi - self.lo) / self.count as f64
        } else {
            (self.hi - self.lo) / (self.count as f64 - 1.0)
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.spacing()
    }
}

/// Tensor-product grid over an `m`-dimensional parameter box. Node indices run
/// with axis 0 fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrid {
    axes: Vec<Axis>,
}

impl ParamGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::GridIncompatible("grid needs at least one axis".into()));
        }
        for (k, a) in axes.iter().enumerate() {
            if !(a.hi > a.lo) || a.count < 2 {
                return Err(Error::GridIncompatible(format!(
                    "axis {k}: need hi > lo and at least 2 nodes"
                )));
            }
        }
        Ok(Self { axes })
    }

    /// Checks `count >= 2 * order + 1` on every axis.
    pub fn validate_for(&self, order: usize) -> Result<()> {
        for (axis, a) in self.axes.iter().enumerate() {
            let needed = 2 * order + 1;
            if a.count < needed {
                return Err(Error::GridTooCoarse { axis, count: a.count, needed });
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    pub fn node_count(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    /// Distance between neighbouring nodes along axis `k`.
    pub fn stride(&self, k: usize) -> usize {
        self.axes[..k].iter().map(|a| a.count).product()
    }

    pub fn multi_index(&self, mut node: usize) -> Vec<usize> {
        self.axes
            .iter()
            .map(|a| {
                let i = node % a.count;
                node /= a.count;
                i
            })
            .collect()
    }

    pub fn node_index(&self, idx: &[usize]) -> usize {
        let mut node = 0;
        for (k, a) in self.axes.iter().enumerate().rev() {
            node = node * a.count + idx[k];
        }
        node
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.coord(i))
            .collect()
    }

    /// Same box with `count` nodes per axis.
    pub fn with_count(&self, count: usize) -> Self {
        Self {
            axes: self.axes.iter().map(|a| Axis { count, ..*a }).collect(),
        }
    }

    /// Roughly half the nodes per axis: `count/2` periodic, `(count+1)/2` open.
    pub fn coarsened(&self) -> Self {
        Self {
            axes: self
                .axes
                .iter()
                .map(|a| Axis { count: if a.periodic { a.count / 2 } else { (a.count + 1) / 2 }, ..*a })
                .collect(),
        }
    }

    /// Largest spacing ratio `h_other / h_self` over the axes.
    pub fn spacing_ratio(&self, other: &Self) -> f64 {
        self.axes.iter().zip(&other.axes).map(|(a, b)| b.spacing() / a.spacing()).fold(0.0, f64::max)
    }

    /// Quadrature weight of a node: trapezoid on open axes, rectangle on periodic ones.
    pub fn quadrature_weight(&self, node: usize) -> f64 {
        self.multi_index(node)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| {
                let h = a.spacing();
                if !a.periodic && (i == 0 || i + 1 == a.count) {
                    0.5 * h
                } else {
                    h
                }
            })
            .product()
    }
}
