//! Indefinite inner products, Gram matrices, the pseudo-orthogonal group and
//! hyperbolic Gram-Schmidt.
//!
//! Signatures put the `+1` entries first. Group elements act on row vectors,
//! `x -> x T`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Relative threshold below which a Gram determinant counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Diagonal signature `diag(+1,...,+1,-1,...,-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Signature {
    plus: usize,
    minus: usize,
}

impl Signature {
    pub const fn new(plus: usize, minus: usize) -> Self {
        Self { plus, minus }
    }

    pub const fn euclidean(dim: usize) -> Self {
        Self::new(dim, 0)
    }

    pub fn plus(&self) -> usize {
        self.plus
    }

    pub fn minus(&self) -> usize {
        self.minus
    }

    pub fn dim(&self) -> usize {
        self.plus + self.minus
    }

    /// Diagonal entry `G_kk`.
    #[inline]
    pub fn sign(&self, k: usize) -> f64 {
        if k < self.plus {
            1.0
        } else {
            -1.0
        }
    }

    pub fn signs(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.sign(k)).collect()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.signs()))
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.plus, self.minus)
    }
}

/// `<x, y>` for the given signature.
pub fn inner(x: &[f64], y: &[f64], sig: Signature) -> Result<f64> {
    let n = sig.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    Ok(inner_unchecked(x, y, sig))
}

#[inline]
pub(crate) fn inner_unchecked(x: &[f64], y: &[f64], sig: Signature) -> f64 {
    let p = sig.plus.min(x.len());
    let pos: f64 = x[..p].iter().zip(&y[..p]).map(|(a, b)| a * b).sum();
    let neg: f64 = x[p..].iter().zip(&y[p..]).map(|(a, b)| a * b).sum();
    pos - neg
}

/// Symmetric matrix with cached inverse and determinant.
#[derive(Clone, Debug)]
pub struct MetricMatrix {
    entries: DMatrix<f64>,
    inverse: DMatrix<f64>,
    det: f64,
}

impl MetricMatrix {
    /// Factorizes `entries`, failing with `DegenerateMetric` when
    /// `|det| <= 1e-12 * (max row norm)^dim`.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let dim = entries.nrows();
        if entries.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: entries.ncols() });
        }
        let scale = entries
            .row_iter()
            .map(|r| r.norm())
            .fold(0.0_f64, f64::max);
        let lu = entries.clone().lu();
        let det = lu.determinant();
        let threshold = DEGENERACY_TOL * scale.powi(dim as i32);
        if !(det.abs() > threshold) {
            return Err(Error::DegenerateMetric { nodes: 1 });
        }
        let inverse = lu.try_inverse().ok_or(Error::DegenerateMetric { nodes: 1 })?;
        Ok(Self { entries, inverse, det })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    /// Raises the index of a covector: `v^a = g^{ab} v_b`.
    pub fn raise(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|a| (0..n).map(|b| self.inverse[(a, b)] * v[b]).sum())
            .collect()
    }

    /// Lowers the index of a vector: `v_a = g_{ab} v^b`.
    pub fn lower(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|a| (0..n).map(|b| self.entries[(a, b)] * v[b]).sum())
            .collect()
    }
}

/// Gram matrix `<b_a, b_b>` of a list of vectors.
pub fn gram(basis: &[Vec<f64>], sig: Signature) -> Result<MetricMatrix> {
    for b in basis {
        if b.len() != sig.dim() {
            return Err(Error::DimensionMismatch { expected: sig.dim(), got: b.len() });
        }
    }
    let k = basis.len();
    let m = DMatrix::from_fn(k, k, |a, b| inner_unchecked(&basis[a], &basis[b], sig));
    MetricMatrix::new(m)
}

/// Element of the pseudo-orthogonal group of a signature.
#[derive(Clone, Debug)]
pub struct PseudoOrthogonalMap {
    matrix: DMatrix<f64>,
    signature: Signature,
    orthogonality_residual: f64,
}

impl PseudoOrthogonalMap {
    pub fn identity(sig: Signature) -> Self {
        Self::from_generator(DMatrix::zeros(sig.dim(), sig.dim()), sig)
            .expect("zero generator is admissible")
    }

    /// `exp(M)` for a generator with `(G M)^T = -G M`.
    pub fn from_generator(m: DMatrix<f64>, sig: Signature) -> Result<Self> {
        let n = sig.dim();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: m.nrows() });
        }
        let g = sig.matrix();
        let gm = &g * &m;
        let skew = (&gm + gm.transpose()).amax();
        if skew > 1e-12 * (1.0 + m.amax()) {
            return Err(Error::InvalidSignature(format!(
                "generator is not G-antisymmetric (defect {skew:e})"
            )));
        }
        Ok(Self::from_matrix_unchecked(expm(&m), sig))
    }

    /// Wraps an explicit matrix, recording its orthogonality defect.
    pub fn from_matrix(matrix: DMatrix<f64>, sig: Signature) -> Result<Self> {
        let n = sig.dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: matrix.nrows() });
        }
        Ok(Self::from_matrix_unchecked(matrix, sig))
    }

    fn from_matrix_unchecked(matrix: DMatrix<f64>, signature: Signature) -> Self {
        let g = signature.matrix();
        let orthogonality_residual = (matrix.transpose() * &g * &matrix - &g).amax();
        Self { matrix, signature, orthogonality_residual }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn orthogonality_residual(&self) -> f64 {
        self.orthogonality_residual
    }

    /// Row-vector action `x T`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.signature.dim();
        (0..n)
            .map(|j| (0..n).map(|i| x[i] * self.matrix[(i, j)]).sum())
            .collect()
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self::from_matrix_unchecked(&self.matrix * &other.matrix, self.signature)
    }

    pub fn inverse(&self) -> Self {
        let g = self.signature.matrix();
        Self::from_matrix_unchecked(&g * self.matrix.transpose() * &g, self.signature)
    }
}

/// Matrix exponential by scaling and squaring with a Taylor series.
fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut s = 0;
    while norm / f64::powi(2.0, s) > 0.25 {
        s += 1;
    }
    let a = m / f64::powi(2.0, s);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &a / k as f64;
        sum += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Seeded random element of the identity component of `O(sig)`.
pub fn random_pseudo_orthogonal(sig: Signature, seed: u64) -> PseudoOrthogonalMap {
    let n = sig.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = rng.gen_range(-1.0..1.0);
            s[(i, j)] = v;
            s[(j, i)] = -v;
        }
    }
    // G S has (G (G S))^T = S^T = -S.
    let mut m = sig.matrix() * s;
    let radius = m.clone().svd(false, false).singular_values.max();
    if radius > 1.0 {
        m /= radius;
    }
    PseudoOrthogonalMap::from_generator(m, sig).expect("generator built G-antisymmetric")
}

/// Orthonormal frame from `vectors`, pivoting on the largest `|<v,v>|`.
///
/// Returns the frame together with the signs `<f_a, f_a>`.
pub fn indefinite_gram_schmidt(
    vectors: &[Vec<f64>],
    sig: Signature,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    const TOL: f64 = 1e-10;
    for v in vectors {
        if v.len() != sig.dim() {
            return Err(Error::DimensionMismatch { expected: sig.dim(), got: v.len() });
        }
    }
    let mut rest: Vec<Vec<f64>> = vectors.to_vec();
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    let mut signs = Vec::with_capacity(vectors.len());
    for step in 0..vectors.len() {
        let mut best = None;
        let mut best_val = 0.0;
        for (k, v) in rest.iter().enumerate() {
            let q = inner_unchecked(v, v, sig).abs();
            let e2: f64 = v.iter().map(|x| x * x).sum();
            if q > TOL * e2 && q > best_val {
                best_val = q;
                best = Some(k);
            }
        }
        let k = best.ok_or(Error::NullPivot { step })?;
        let v = rest.remove(k);
        let q = inner_unchecked(&v, &v, sig);
        let s = q.signum();
        let f: Vec<f64> = v.iter().map(|x| x / q.abs().sqrt()).collect();
        for w in rest.iter_mut() {
            let c = s * inner_unchecked(w, &f, sig);
            for (wi, fi) in w.iter_mut().zip(&f) {
                *wi -= c * fi;
            }
        }
        frame.push(f);
        signs.push(s);
    }
    Ok((frame, signs))
}
