//! Tensor fields, metrics, Levi-Civita connections, curvature, covariant
//! derivatives, the Laplace-Beltrami operator and integration.

use std::sync::Arc;

use super::field::{Chart, Field};
use crate::error::{Error, Result};
use crate::indefinite::DEGENERACY_TOL;

/// Variance of one tensor slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    CovariantTangent,
    ContravariantTangent,
    /// Upper index of the normal bundle.
    Normal,
    /// Index of the ambient vector space (no connection).
    Ambient,
}

/// Components of a tensor field, stored row-major in slot order.
#[derive(Clone, Debug)]
pub struct TensorField {
    slots: Vec<Slot>,
    dims: Vec<usize>,
    comps: Vec<Field>,
}

impl TensorField {
    pub fn new(slots: Vec<Slot>, dims: Vec<usize>, comps: Vec<Field>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if slots.len() != dims.len() || comps.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: comps.len() });
        }
        Ok(Self { slots, dims, comps })
    }

    pub fn scalar(f: Field) -> Self {
        Self { slots: vec![], dims: vec![], comps: vec![f] }
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn comps(&self) -> &[Field] {
        &self.comps
    }

    pub fn into_comps(self) -> Vec<Field> {
        self.comps
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, idx: &[usize]) -> &Field {
        &self.comps[self.offset(idx)]
    }

    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for s in (0..self.dims.len()).rev() {
            idx[s] = k % self.dims[s];
            k /= self.dims[s];
        }
        idx
    }

    /// Largest absolute component value over unmasked nodes.
    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(Field::max_abs).fold(0.0, f64::max)
    }
}

/// Determinant of a small matrix of fields by cofactor expansion.
fn det_fields(g: &[&Field], n: usize) -> Field {
    match n {
        1 => g[0].clone(),
        2 => Field::sum_products(&[(1.0, g[0], g[3]), (-1.0, g[1], g[2])]),
        _ => {
            let mut terms = Vec::with_capacity(n);
            for j in 0..n {
                let minor: Vec<&Field> = (1..n)
                    .flat_map(|r| (0..n).filter(move |&c| c != j).map(move |c| (r, c)))
                    .map(|(r, c)| g[r * n + c])
                    .collect();
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                terms.push((s, g[j], det_fields(&minor, n - 1)));
            }
            let refs: Vec<(f64, &Field, &Field)> = terms.iter().map(|(s, a, b)| (*s, *a, b)).collect();
            Field::sum_products(&refs)
        }
    }
}

/// A symmetric metric field with inverse and determinant. Nodes where the
/// metric is degenerate are masked.
#[derive(Clone, Debug)]
pub struct MetricField {
    m: usize,
    g: Vec<Field>,
    inv: Vec<Field>,
    det: Field,
    degenerate: usize,
}

impl MetricField {
    /// Builds from row-major components `g[i*m + j]`.
    pub fn new(g: Vec<Field>) -> Self {
        let m = (g.len() as f64).sqrt().round() as usize;
        assert_eq!(m * m, g.len());
        let chart = g[0].chart().clone();
        let refs: Vec<&Field> = g.iter().collect();
        let det = det_fields(&refs, m);
        // scale-aware degeneracy mask
        let dv = det.values();
        let mut mask = vec![false; chart.nodes()];
        let mut degenerate = 0;
        for n in 0..chart.nodes() {
            let scale = (0..m)
                .map(|i| (0..m).map(|j| g[i * m + j].value(n).powi(2)).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            let bad = !(dv[n].abs() > DEGENERACY_TOL * scale.powi(m as i32));
            if bad && !dv[n].is_nan() {
                degenerate += 1;
            }
            mask[n] = bad;
        }
        let det = det.masked(&mask);
        let rdet = det.recip();
        let mut inv = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                // inverse(i, j) = cofactor(j, i) / det
                let cof = if m == 1 {
                    Field::constant(&chart, 1.0)
                } else {
                    let minor: Vec<&Field> = (0..m)
                        .filter(|&r| r != j)
                        .flat_map(|r| (0..m).filter(move |&c| c != i).map(move |c| (r, c)))
                        .map(|(r, c)| &g[r * m + c])
                        .collect();
                    det_fields(&minor, m - 1)
                };
                let s = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                inv.push((&cof * &rdet).scale(s));
            }
        }
        let g = g.iter().map(|x| x.masked(&mask)).collect();
        Self { m, g, inv, det, degenerate }
    }

    pub fn from_tensor(t: &TensorField) -> Self {
        Self::new(t.comps().to_vec())
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.g[0].chart()
    }

    pub fn g(&self, i: usize, j: usize) -> &Field {
        &self.g[i * self.m + j]
    }

    pub fn inv(&self, i: usize, j: usize) -> &Field {
        &self.inv[i * self.m + j]
    }

    pub fn det(&self) -> &Field {
        &self.det
    }

    pub fn comps(&self) -> &[Field] {
        &self.g
    }

    pub fn inverse_comps(&self) -> &[Field] {
        &self.inv
    }

    /// Number of nodes masked for degeneracy.
    pub fn degenerate_nodes(&self) -> usize {
        self.degenerate
    }

    pub fn as_tensor(&self) -> TensorField {
        TensorField::new(
            vec![Slot::CovariantTangent, Slot::CovariantTangent],
            vec![self.m, self.m],
            self.g.clone(),
        )
        .expect("shape")
    }

    /// `g^{ij} T_ij`.
    pub fn trace(&self, t: &[Field]) -> Field {
        let m = self.m;
        let terms: Vec<(f64, &Field, &Field)> = (0..m * m).map(|k| (1.0, &self.inv[k], &t[k])).collect();
        Field::sum_products(&terms)
    }

    /// `v^i = g^{ij} v_j`.
    pub fn raise(&self, v: &[Field]) -> Vec<Field> {
        let m = self.m;
        (0..m)
            .map(|i| {
                let terms: Vec<(f64, &Field, &Field)> = (0..m).map(|j| (1.0, self.inv(i, j), &v[j])).collect();
                Field::sum_products(&terms)
            })
            .collect()
    }
}

/// Connection coefficients: `gamma[(k*m + i)*m + j] = Γ^k_ij` and optionally
/// `normal[(b*r + a)*m + i] = ω_a^b(∂_i)` for a rank-`r` normal bundle.
#[derive(Clone, Debug)]
pub struct BundleConnection {
    pub m: usize,
    pub gamma: Vec<Field>,
    pub rank: usize,
    pub normal: Option<Vec<Field>>,
}

impl BundleConnection {
    pub fn tangent(&self, k: usize, i: usize, j: usize) -> &Field {
        &self.gamma[(k * self.m + i) * self.m + j]
    }

    pub fn normal(&self, a: usize, b: usize, i: usize) -> Option<&Field> {
        self.normal.as_ref().map(|w| &w[(b * self.rank + a) * self.m + i])
    }

    pub fn with_normal(mut self, rank: usize, normal: Vec<Field>) -> Self {
        assert_eq!(normal.len(), rank * rank * self.m);
        self.rank = rank;
        self.normal = Some(normal);
        self
    }
}

/// Christoffel symbols of the second kind.
pub fn levi_civita(metric: &MetricField) -> BundleConnection {
    let m = metric.dim();
    // dg[(l*m + i)*m + j] = ∂_l g_ij
    let mut dg: Vec<Field> = Vec::with_capacity(m * m * m);
    for l in 0..m {
        for i in 0..m {
            for j in 0..m {
                if j < i {
                    let f: Field = dg[(l * m + j) * m + i].clone();
                    dg.push(f);
                } else {
                    dg.push(metric.g(i, j).partial(l));
                }
            }
        }
    }
    let d = |l: usize, i: usize, j: usize| &dg[(l * m + i) * m + j];
    // first kind Γ_lij = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
    let mut first: Vec<Option<Field>> = vec![None; m * m * m];
    for l in 0..m {
        for i in 0..m {
            for j in i..m {
                let f = Field::sum_scaled(&[(0.5, d(i, j, l)), (0.5, d(j, i, l)), (-0.5, d(l, i, j))]);
                first[(l * m + i) * m + j] = Some(f);
            }
        }
    }
    let mut gamma: Vec<Option<Field>> = vec![None; m * m * m];
    for k in 0..m {
        for i in 0..m {
            for j in i..m {
                let terms: Vec<(f64, &Field, &Field)> = (0..m)
                    .map(|l| (1.0, metric.inv(k, l), first[(l * m + i) * m + j].as_ref().unwrap()))
                    .collect();
                let f = Field::sum_products(&terms);
                gamma[(k * m + j) * m + i] = Some(f.clone());
                gamma[(k * m + i) * m + j] = Some(f);
            }
        }
    }
    BundleConnection { m, gamma: gamma.into_iter().map(Option::unwrap).collect(), rank: 0, normal: None }
}

/// Riemann tensor `R_ijkl`, Ricci `R_jl`, scalar and normalized scalar curvature.
#[derive(Clone, Debug)]
pub struct Curvature {
    pub m: usize,
    pub riemann: Vec<Field>,
    pub ricci: Vec<Field>,
    pub scalar: Field,
    pub normalized: Field,
}

impl Curvature {
    pub fn r(&self, i: usize, j: usize, k: usize, l: usize) -> &Field {
        let m = self.m;
        &self.riemann[((i * m + j) * m + k) * m + l]
    }
}

/// Curvature with `R^i_jkl = ∂_kΓ^i_lj − ∂_lΓ^i_kj + Γ^i_kpΓ^p_lj − Γ^i_lpΓ^p_kj`,
/// so that the unit sphere has normalized scalar curvature `+1`.
pub fn curvature(metric: &MetricField, conn: &BundleConnection) -> Curvature {
    let m = metric.dim();
    let chart = metric.chart().clone();
    let zero = Field::zeros(&chart);
    // dgam[((a*m + i)*m + l)*m + j] = ∂_a Γ^i_lj
    let mut dgam: Vec<Field> = Vec::with_capacity(m.pow(4));
    for a in 0..m {
        for i in 0..m {
            for l in 0..m {
                for j in 0..m {
                    if j < l {
                        let f: Field = dgam[((a * m + i) * m + j) * m + l].clone();
                        dgam.push(f);
                    } else {
                        dgam.push(conn.tangent(i, l, j).partial(a));
                    }
                }
            }
        }
    }
    let dg = |a: usize, i: usize, l: usize, j: usize| &dgam[((a * m + i) * m + l) * m + j];
    // mixed R^i_jkl, antisymmetric in (k,l)
    let mut up: Vec<Field> = vec![zero.clone(); m.pow(4)];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in (k + 1)..m {
                    let lin = dg(k, i, l, j) - dg(l, i, k, j);
                    let mut terms = Vec::with_capacity(2 * m);
                    for p in 0..m {
                        terms.push((1.0, conn.tangent(i, k, p), conn.tangent(p, l, j)));
                        terms.push((-1.0, conn.tangent(i, l, p), conn.tangent(p, k, j)));
                    }
                    let f = &lin + &Field::sum_products(&terms);
                    up[((i * m + j) * m + l) * m + k] = -&f;
                    up[((i * m + j) * m + k) * m + l] = f;
                }
            }
        }
    }
    let mut riemann = Vec::with_capacity(m.pow(4));
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    if k == l {
                        riemann.push(zero.clone());
                        continue;
                    }
                    let terms: Vec<(f64, &Field, &Field)> = (0..m)
                        .map(|p| (1.0, metric.g(i, p), &up[((p * m + j) * m + k) * m + l]))
                        .collect();
                    riemann.push(Field::sum_products(&terms));
                }
            }
        }
    }
    let r = |i: usize, j: usize, k: usize, l: usize| &riemann[((i * m + j) * m + k) * m + l];
    let mut ricci = Vec::with_capacity(m * m);
    for j in 0..m {
        for l in 0..m {
            let mut terms = Vec::with_capacity(m * m);
            for i in 0..m {
                for k in 0..m {
                    terms.push((1.0, metric.inv(i, k), r(i, j, k, l)));
                }
            }
            ricci.push(Field::sum_products(&terms));
        }
    }
    let scalar = metric.trace(&ricci);
    let normalized = if m > 1 { scalar.scale(1.0 / (m * (m - 1)) as f64) } else { zero };
    Curvature { m, riemann, ricci, scalar, normalized }
}

/// Covariant derivative, appending one covariant slot for the direction.
pub fn covariant_derivative(t: &TensorField, conn: &BundleConnection) -> Result<TensorField> {
    let m = conn.m;
    for s in t.slots() {
        if *s == Slot::Normal && conn.normal.is_none() {
            return Err(Error::VarianceMismatch("normal slot without normal connection".into()));
        }
    }
    let ncomp = t.comps().len();
    let mut comps = Vec::with_capacity(ncomp * m);
    for c in 0..ncomp {
        let idx = t.multi_index(c);
        for k in 0..m {
            let mut scaled: Vec<(f64, Field)> = Vec::new();
            let mut prods: Vec<(f64, &Field, &Field)> = Vec::new();
            let base = t.comps()[c].partial(k);
            scaled.push((1.0, base));
            for (s, slot) in t.slots().iter().enumerate() {
                let mut j = idx.clone();
                match slot {
                    Slot::CovariantTangent => {
                        for p in 0..t.dims()[s] {
                            j[s] = p;
                            prods.push((-1.0, conn.tangent(p, idx[s], k), t.get(&j)));
                        }
                    }
                    Slot::ContravariantTangent => {
                        for p in 0..t.dims()[s] {
                            j[s] = p;
                            prods.push((1.0, conn.tangent(idx[s], p, k), t.get(&j)));
                        }
                    }
                    Slot::Normal => {
                        for b in 0..t.dims()[s] {
                            j[s] = b;
                            prods.push((1.0, conn.normal(b, idx[s], k).unwrap(), t.get(&j)));
                        }
                    }
                    Slot::Ambient => {}
                }
            }
            let f = if prods.is_empty() {
                scaled.pop().unwrap().1
            } else {
                &scaled[0].1 + &Field::sum_products(&prods)
            };
            comps.push(f);
        }
    }
    let mut slots = t.slots().to_vec();
    slots.push(Slot::CovariantTangent);
    let mut dims = t.dims().to_vec();
    dims.push(m);
    TensorField::new(slots, dims, comps)
}

/// `Δf = g^{ij}(∂_j∂_i f − Γ^k_ij ∂_k f)`.
pub fn laplace_beltrami(f: &Field, metric: &MetricField, conn: &BundleConnection) -> Field {
    let m = metric.dim();
    let df: Vec<Field> = (0..m).map(|k| f.partial(k)).collect();
    let mut hess: Vec<Field> = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            if j < i {
                let h: Field = hess[j * m + i].clone();
                hess.push(h);
                continue;
            }
            let terms: Vec<(f64, &Field, &Field)> = (0..m).map(|k| (-1.0, conn.tangent(k, i, j), &df[k])).collect();
            hess.push(&df[i].partial(j) + &Field::sum_products(&terms));
        }
    }
    metric.trace(&hess)
}

/// Pairwise sum in a fixed order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// `∫ density |det g|^{1/2}` with trapezoid / rectangle weights. Fails if a
/// node is masked.
pub fn integrate(density: &Field, metric: &MetricField) -> Result<f64> {
    let (v, masked) = integrate_unmasked(density, metric);
    if masked > 0 {
        return Err(Error::TaskFailed(format!("{masked} masked node(s) inside integration domain")));
    }
    Ok(v)
}

/// Like [`integrate`] but skips masked nodes, returning their count.
pub fn integrate_unmasked(density: &Field, metric: &MetricField) -> (f64, usize) {
    let grid = metric.chart().grid();
    let d = density.values();
    let det = metric.det().values();
    let mut masked = 0;
    let terms: Vec<f64> = (0..grid.node_count())
        .map(|n| {
            let x = d[n] * det[n].abs().sqrt() * grid.quadrature_weight(n);
            if x.is_nan() {
                masked += 1;
                0.0
            } else {
                x
            }
        })
        .collect();
    (pairwise_sum(&terms), masked)
}
