//! Induced metric, adapted normal frame, second fundamental form, mean
//! curvature, normal connection and the Gauss check.

use std::sync::Arc;

use crate::calculus::{curvature, levi_civita, BundleConnection, Chart, Field, MetricField};
use crate::error::{Error, Result};
use crate::indefinite::Signature;
use crate::jet::Jet;
use crate::spaceform::{dot, metric_of, tangents, Immersion, SpaceForm, SpaceKind};

/// Tangent vectors `u_i`, the induced metric `I` and its Levi-Civita connection.
#[derive(Clone, Debug)]
pub struct TangentFrame {
    pub u_i: Vec<Vec<Field>>,
    pub metric: MetricField,
    pub conn: BundleConnection,
}

/// Orthonormal normal fields `e_α` with `<e_α, e_α> = signs[α]`.
#[derive(Clone, Debug)]
pub struct NormalFrame {
    pub e: Vec<Vec<Field>>,
    pub signs: Vec<f64>,
    /// Nodes masked because the aligned frame jumped or the normal space degenerated.
    pub seam_nodes: usize,
}

impl NormalFrame {
    pub fn rank(&self) -> usize {
        self.e.len()
    }
}

/// `h[(α*m + i)*m + j] = h^α_ij`, mean curvature `H^α`, and the norms.
#[derive(Clone, Debug)]
pub struct SecondFundamental {
    pub m: usize,
    pub h: Vec<Field>,
    pub mean: Vec<Field>,
    pub mean_lower: Vec<Field>,
    pub ii2: Field,
    pub h2: Field,
}

impl SecondFundamental {
    pub fn h(&self, a: usize, i: usize, j: usize) -> &Field {
        &self.h[(a * self.m + i) * self.m + j]
    }
}

/// Normal connection `θ_α^β(∂_i)` (in [`BundleConnection`] layout) and `H^α_{,i}`.
#[derive(Clone, Debug)]
pub struct NormalDerivatives {
    pub theta: Vec<Field>,
    /// `h_cov[α*m + i] = H^α_{,i}`
    pub h_cov: Vec<Field>,
}

/// Intrinsic and Gauss-formula normalized scalar curvature.
#[derive(Clone, Debug)]
pub struct GaussCheck {
    pub kappa_m: Field,
    pub kappa_gauss: Field,
    pub residual: f64,
}

pub fn tangent_frame(sig: Signature, u: &[Field]) -> TangentFrame {
    let m = u[0].chart().m();
    let u_i = tangents(u, m);
    let metric = metric_of(sig, &u_i);
    let conn = levi_civita(&metric);
    TangentFrame { u_i, metric, conn }
}

pub(crate) fn jdot(sig: Signature, a: &[Jet], b: &[Jet]) -> Jet {
    let mut acc = &a[0] * &b[0];
    for k in 1..a.len() {
        let p = &a[k] * &b[k];
        acc = if sig.sign(k) > 0.0 { &acc + &p } else { &acc - &p };
    }
    acc
}

/// Hyperbolic Gram-Schmidt on `candidates`, keeping `count` vectors, in jets.
pub(crate) fn jet_gram_schmidt(
    sig: Signature,
    mut rest: Vec<Vec<Jet>>,
    count: usize,
) -> Option<(Vec<Vec<Jet>>, Vec<f64>)> {
    const TOL: f64 = 1e-10;
    let mut out = Vec::with_capacity(count);
    let mut signs = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best = None;
        let mut best_val = 0.0;
        for (k, v) in rest.iter().enumerate() {
            let q = jdot(sig, v, v).value().abs();
            let e2: f64 = v.iter().map(|x| x.value() * x.value()).sum();
            if q > TOL * e2 && q > best_val {
                best_val = q;
                best = Some(k);
            }
        }
        let v = rest.remove(best?);
        let q = jdot(sig, &v, &v);
        let s = q.value().signum();
        let r = q.scale(s).sqrt().recip();
        let f: Vec<Jet> = v.iter().map(|x| x * &r).collect();
        for w in rest.iter_mut() {
            let c = jdot(sig, w, &f).scale(s);
            for (wi, fi) in w.iter_mut().zip(&f) {
                *wi = &*wi - &(&c * fi);
            }
        }
        out.push(f);
        signs.push(s);
    }
    Some((out, signs))
}

/// Normal frame from coordinate-axis seeds, then sign/order alignment.
pub fn normal_frame(sf: SpaceForm, u: &[Field], tf: &TangentFrame) -> Result<NormalFrame> {
    let chart = u[0].chart().clone();
    let m = chart.m();
    let sig = sf.ambient_signature();
    let n = sig.dim();
    let curved = sf.kind != SpaceKind::Flat;
    let rank = n - m - usize::from(curved);
    let eps = sf.epsilon();
    let mut inputs: Vec<&Field> = Vec::new();
    inputs.extend(u.iter());
    for i in 0..m {
        inputs.extend(tf.u_i[i].iter());
    }
    inputs.extend(tf.metric.inverse_comps().iter());
    let f = move |_node: usize, x: &[Jet]| -> Vec<Jet> {
        let uu = &x[..n];
        let ui: Vec<&[Jet]> = (0..m).map(|i| &x[n + i * n..n + (i + 1) * n]).collect();
        let inv = &x[n + m * n..];
        let l = x[0].layout();
        let d = x[0].deg();
        let candidates: Vec<Vec<Jet>> = (0..n)
            .map(|k| {
                let mut v: Vec<Jet> = (0..n).map(|c| Jet::constant(l, d, if c == k { 1.0 } else { 0.0 })).collect();
                // <v, u_j> = sign_k * u_j[k]
                let vu: Vec<Jet> = (0..m).map(|j| ui[j][k].scale(sig.sign(k))).collect();
                for i in 0..m {
                    let mut c = &inv[i * m] * &vu[0];
                    for j in 1..m {
                        c = &c + &(&inv[i * m + j] * &vu[j]);
                    }
                    for (vc, uc) in v.iter_mut().zip(ui[i]) {
                        *vc = &*vc - &(&c * uc);
                    }
                }
                if curved {
                    let c = uu[k].scale(sig.sign(k) * eps);
                    for (vc, uc) in v.iter_mut().zip(uu) {
                        *vc = &*vc - &(&c * uc);
                    }
                }
                v
            })
            .collect();
        match jet_gram_schmidt(sig, candidates, rank) {
            Some((frame, signs)) => {
                let mut out: Vec<Jet> = frame.into_iter().flatten().collect();
                out.extend(signs.iter().map(|&s| Jet::constant(l, d, s)));
                out
            }
            None => vec![Jet::constant(l, d, f64::NAN); rank * n + rank],
        }
    };
    let mut flat = Field::node_map(&inputs, rank * n + rank, &f);
    let sign_fields = flat.split_off(rank * n);
    let mut e: Vec<Vec<Field>> = Vec::with_capacity(rank);
    for a in 0..rank {
        e.push(flat[a * n..(a + 1) * n].to_vec());
    }
    let mut node_signs: Vec<Vec<f64>> = sign_fields.iter().map(Field::values).collect();
    let seam = align_frames(&chart, &mut e, &mut node_signs);
    let (e, signs, masked) = settle_signs(e, &node_signs);
    if masked == chart.nodes() {
        return Err(Error::NullPivot { step: 0 });
    }
    let seam_nodes = seam + masked;
    Ok(NormalFrame { e, signs, seam_nodes })
}

/// Majority sign per frame vector; nodes that disagree are masked. Returns the
/// masked frame, the signs and the number of masked nodes.
pub(crate) fn settle_signs(e: Vec<Vec<Field>>, node_signs: &[Vec<f64>]) -> (Vec<Vec<Field>>, Vec<f64>, usize) {
    let rank = e.len();
    if rank == 0 {
        return (e, Vec::new(), 0);
    }
    let nodes = node_signs[0].len();
    let mut signs = Vec::with_capacity(rank);
    let mut mask = vec![false; nodes];
    for ns in node_signs {
        let pos = ns.iter().filter(|&&s| s > 0.0).count();
        let neg = ns.iter().filter(|&&s| s < 0.0).count();
        let s = if pos >= neg { 1.0 } else { -1.0 };
        for (nd, &v) in ns.iter().enumerate() {
            if v != s {
                mask[nd] = true;
            }
        }
        signs.push(s);
    }
    let masked = mask.iter().filter(|&&b| b).count();
    let e = e
        .into_iter()
        .map(|v| v.into_iter().map(|c| c.masked(&mask)).collect())
        .collect();
    (e, signs, masked)
}

/// Greedy sweep from the grid origin choosing per node the permutation and
/// signs closest to an already aligned neighbour. Returns the number of seam nodes.
pub(crate) fn align_frames(chart: &Arc<Chart>, e: &mut [Vec<Field>], signs: &mut [Vec<f64>]) -> usize {
    let rank = e.len();
    if rank == 0 {
        return 0;
    }
    let n = e[0].len();
    let grid = chart.grid().clone();
    let nodes = chart.nodes();
    let vals: Vec<Vec<Vec<f64>>> = e.iter().map(|v| v.iter().map(Field::values).collect()).collect();
    let vec_at = |a: usize, node: usize, perm: &[(usize, f64)]| -> Vec<f64> {
        let (src, s) = perm[a];
        (0..n).map(|c| s * vals[src][c][node]).collect()
    };
    let mut perms: Vec<Vec<(usize, f64)>> = vec![(0..rank).map(|a| (a, 1.0)).collect(); nodes];
    let mut done = vec![false; nodes];
    let mut seam = 0;
    let mut seam_mask = vec![false; nodes];
    for node in 0..nodes {
        let idx = grid.multi_index(node);
        let neighbour = (0..grid.m())
            .filter(|&k| idx[k] > 0)
            .map(|k| node - grid.stride(k))
            .find(|&nb| done[nb] && !vals[perms[nb][0].0][0][nb].is_nan());
        done[node] = true;
        let Some(nb) = neighbour else { continue };
        if vals[0][0][node].is_nan() {
            continue;
        }
        let reference: Vec<Vec<f64>> = (0..rank).map(|b| vec_at(b, nb, &perms[nb])).collect();
        let mut used = vec![false; rank];
        let mut perm = Vec::with_capacity(rank);
        let mut worst: f64 = 1.0;
        for fb in &reference {
            let nb2: f64 = fb.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut best: Option<(usize, f64)> = None;
            for a in 0..rank {
                if used[a] {
                    continue;
                }
                let ea: Vec<f64> = (0..n).map(|c| vals[a][c][node]).collect();
                let na: f64 = ea.iter().map(|x| x * x).sum::<f64>().sqrt();
                let cos = ea.iter().zip(fb).map(|(x, y)| x * y).sum::<f64>() / (na * nb2);
                if best.map_or(true, |b| cos.abs() > b.1.abs()) {
                    best = Some((a, cos));
                }
            }
            let best = best.expect("rank > 0");
            used[best.0] = true;
            worst = worst.min(best.1.abs());
            perm.push((best.0, if best.1 < 0.0 { -1.0 } else { 1.0 }));
        }
        if worst < 0.5 {
            seam += 1;
            seam_mask[node] = true;
        }
        perms[node] = perm;
    }
    // apply permutations and signs
    let old: Vec<Vec<Field>> = e.to_vec();
    let old_signs: Vec<Vec<f64>> = signs.to_vec();
    for node in 0..nodes {
        for b in 0..rank {
            let (src, s) = perms[node][b];
            signs[b][node] = old_signs[src][node];
            for c in 0..n {
                let from = old[src][c].coeffs(node).to_vec();
                let dst = e[b][c].coeffs_mut(node);
                for (d, f) in dst.iter_mut().zip(&from) {
                    *d = if seam_mask[node] { f64::NAN } else { s * f };
                }
            }
        }
    }
    seam
}

pub fn second_fundamental(tf: &TangentFrame, nf: &NormalFrame, sig: Signature) -> SecondFundamental {
    let m = tf.u_i.len();
    let r = nf.rank();
    let chart = tf.u_i[0][0].chart().clone();
    let mut h = Vec::with_capacity(r * m * m);
    let uij: Vec<Vec<Vec<Field>>> = (0..m)
        .map(|i| (0..m).map(|j| if j < i { Vec::new() } else { tf.u_i[i].iter().map(|c| c.partial(j)).collect() }).collect())
        .collect();
    for a in 0..r {
        for i in 0..m {
            for j in 0..m {
                let (p, q) = if j < i { (j, i) } else { (i, j) };
                h.push(dot(sig, &uij[p][q], &nf.e[a]).scale(nf.signs[a]));
            }
        }
    }
    let hh = |a: usize, i: usize, j: usize| &h[(a * m + i) * m + j];
    let mean: Vec<Field> = (0..r)
        .map(|a| {
            let comps: Vec<Field> = (0..m * m).map(|k| hh(a, k / m, k % m).clone()).collect();
            tf.metric.trace(&comps).scale(1.0 / m as f64)
        })
        .collect();
    let mean_lower: Vec<Field> = mean.iter().zip(&nf.signs).map(|(f, &s)| f.scale(s)).collect();
    let h2 = if r == 0 {
        Field::zeros(&chart)
    } else {
        let terms: Vec<(f64, &Field, &Field)> = (0..r).map(|a| (nf.signs[a], &mean[a], &mean[a])).collect();
        Field::sum_products(&terms)
    };
    // |II|^2 = Σ ε_α I^{ik} I^{jl} h_ij h_kl
    let mut raised = Vec::with_capacity(r * m * m);
    for a in 0..r {
        for k in 0..m {
            for l in 0..m {
                // h^{a,kl} = I^{ki} I^{lj} h_ij
                let inner: Vec<Field> = (0..m)
                    .map(|i| {
                        let t: Vec<(f64, &Field, &Field)> = (0..m).map(|j| (1.0, tf.metric.inv(l, j), hh(a, i, j))).collect();
                        Field::sum_products(&t)
                    })
                    .collect();
                let t: Vec<(f64, &Field, &Field)> = (0..m).map(|i| (1.0, tf.metric.inv(k, i), &inner[i])).collect();
                raised.push(Field::sum_products(&t));
            }
        }
    }
    let ii2 = if r == 0 {
        Field::zeros(&chart)
    } else {
        let mut terms = Vec::new();
        for a in 0..r {
            for k in 0..m * m {
                terms.push((nf.signs[a], &raised[a * m * m + k], &h[a * m * m + k]));
            }
        }
        Field::sum_products(&terms)
    };
    SecondFundamental { m, h, mean, mean_lower, ii2, h2 }
}

/// `∂_j u_i − Γ^k_ij u_k + ε I_ij u`.
pub fn corrected_second_derivatives(sf: SpaceForm, u: &[Field], tf: &TangentFrame) -> Vec<Vec<Field>> {
    let m = tf.u_i.len();
    let n = u.len();
    let eps = sf.epsilon();
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let v: Vec<Field> = (0..n)
                .map(|c| {
                    let mut prods: Vec<(f64, &Field, &Field)> = (0..m).map(|k| (-1.0, tf.conn.tangent(k, i, j), &tf.u_i[k][c])).collect();
                    if eps != 0.0 {
                        prods.push((eps, tf.metric.g(i, j), &u[c]));
                    }
                    &tf.u_i[i][c].partial(j) + &Field::sum_products(&prods)
                })
                .collect();
            out.push(v);
        }
    }
    out
}

pub fn scalar_curvature_checked(tf: &TangentFrame, sff: &SecondFundamental, sf: SpaceForm) -> GaussCheck {
    let m = sff.m;
    let k = curvature(&tf.metric, &tf.conn);
    let mm = (m * m) as f64;
    let denom = (m * (m - 1)) as f64;
    let kappa_gauss = Field::sum_scaled(&[(mm / denom, &sff.h2), (-1.0 / denom, &sff.ii2)]).add_scalar(sf.epsilon());
    let residual = (&k.normalized - &kappa_gauss).max_abs();
    GaussCheck { kappa_m: k.normalized, kappa_gauss, residual }
}

pub fn normal_derivatives(nf: &NormalFrame, sff: &SecondFundamental, sig: Signature) -> NormalDerivatives {
    let m = sff.m;
    let r = nf.rank();
    let de: Vec<Vec<Vec<Field>>> = nf.e.iter().map(|e| tangents(e, m)).collect();
    // theta[(b*r + a)*m + i] = ε_b <∂_i e_a, e_b>
    let mut theta = Vec::with_capacity(r * r * m);
    for b in 0..r {
        for a in 0..r {
            for i in 0..m {
                theta.push(dot(sig, &de[a][i], &nf.e[b]).scale(nf.signs[b]));
            }
        }
    }
    let mut h_cov = Vec::with_capacity(r * m);
    for a in 0..r {
        for i in 0..m {
            let prods: Vec<(f64, &Field, &Field)> = (0..r).map(|b| (1.0, &sff.mean[b], &theta[(a * r + b) * m + i])).collect();
            h_cov.push(&sff.mean[a].partial(i) + &Field::sum_products(&prods));
        }
    }
    NormalDerivatives { theta, h_cov }
}

/// Everything the conformal stage needs from the isometric geometry.
#[derive(Clone, Debug)]
pub struct Isometric {
    pub spaceform: SpaceForm,
    pub u: Vec<Field>,
    pub tangent: TangentFrame,
    pub normal: NormalFrame,
    pub second: SecondFundamental,
    pub derivs: NormalDerivatives,
    pub gauss: GaussCheck,
}

impl Isometric {
    pub fn compute(imm: &Immersion, chart: &Arc<Chart>) -> Result<Self> {
        let u = imm.evaluate_checked(chart)?;
        Self::from_fields(imm.spaceform, u)
    }

    pub fn from_fields(spaceform: SpaceForm, u: Vec<Field>) -> Result<Self> {
        let sig = spaceform.ambient_signature();
        let tangent = tangent_frame(sig, &u);
        if tangent.metric.degenerate_nodes() == u[0].chart().nodes() {
            return Err(Error::DegenerateImmersion { nodes: tangent.metric.degenerate_nodes() });
        }
        let normal = normal_frame(spaceform, &u, &tangent)?;
        let second = second_fundamental(&tangent, &normal, sig);
        let derivs = normal_derivatives(&normal, &second, sig);
        let gauss = scalar_curvature_checked(&tangent, &second, spaceform);
        Ok(Self { spaceform, u, tangent, normal, second, derivs, gauss })
    }

    pub fn m(&self) -> usize {
        self.second.m
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.u[0].chart()
    }

    /// `Δ_M u − m H` (flat) or `Δ_M u − m H + m ε u` (curved), componentwise max.
    pub fn laplacian_residual(&self) -> f64 {
        let m = self.m() as f64;
        let eps = self.spaceform.epsilon();
        let mut worst: f64 = 0.0;
        for (c, uc) in self.u.iter().enumerate() {
            let lap = crate::calculus::laplace_beltrami(uc, &self.tangent.metric, &self.tangent.conn);
            let mut terms: Vec<(f64, &Field, &Field)> = Vec::new();
            for (a, e) in self.normal.e.iter().enumerate() {
                terms.push((-m, &self.second.mean[a], &e[c]));
            }
            let mut r = &lap + &Field::sum_products(&terms);
            if eps != 0.0 {
                r = &r + &uc.scale(m * eps);
            }
            worst = worst.max(r.max_abs());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::StencilConfig;
    use crate::catalog::{catalog, CatalogParams, NAMES};

    fn iso(name: &str, params: CatalogParams, n: usize) -> Isometric {
        let imm = catalog(name, &params).unwrap().with_count(n);
        let c = imm.chart(StencilConfig::analytic(6, 4).unwrap()).unwrap();
        Isometric::compute(&imm, &c).unwrap()
    }

    #[test]
    fn plane_is_totally_geodesic() {
        let p = iso("plane", CatalogParams::default(), 16);
        assert!((p.tangent.metric.g(0, 0) - 1.0).max_abs() < 1e-15);
        assert!(p.tangent.metric.g(0, 1).max_abs() < 1e-15);
        assert!(p.tangent.conn.gamma.iter().all(|g| g.max_abs() < 1e-15));
        assert!(p.second.h.iter().all(|h| h.max_abs() < 1e-15));
        assert!(p.gauss.kappa_m.max_abs() < 1e-15 && p.gauss.kappa_gauss.max_abs() < 1e-15);
    }

    #[test]
    fn clifford_torus() {
        let c = iso("clifford_torus", CatalogParams::default(), 24);
        assert!((c.tangent.metric.g(0, 0) - 0.5).max_abs() < 1e-14);
        assert!((c.tangent.metric.g(1, 1) - 0.5).max_abs() < 1e-14);
        assert!(c.second.mean[0].max_abs() < 1e-9);
        assert!((&c.second.ii2 - 2.0).max_abs() < 1e-9);
        assert!(c.gauss.kappa_m.max_abs() < 1e-9);
        assert!(c.gauss.kappa_gauss.max_abs() < 1e-9);
        let sig = c.spaceform.ambient_signature();
        assert!(dot(sig, &c.normal.e[0], &c.u).max_abs() < 1e-9);
        assert!(c.derivs.h_cov.iter().all(|f| f.max_abs() < 1e-9));
    }

    #[test]
    fn lorentz_cylinder_is_timelike() {
        let l = iso("lorentz_cylinder", CatalogParams::default(), 20);
        assert!(l.tangent.metric.det().values().iter().all(|&d| d < 0.0));
        assert_eq!(l.normal.signs, vec![1.0]);
    }

    #[test]
    fn normal_signs() {
        assert_eq!(iso("catenoid", CatalogParams::default(), 16).normal.signs, vec![1.0]);
        assert_eq!(iso("spacelike_catenoid", CatalogParams::default(), 16).normal.signs, vec![-1.0]);
    }

    #[test]
    fn frame_orthogonality_and_alignment() {
        for name in ["catenoid", "torus_product", "spacelike_catenoid", "enneper"] {
            let s = iso(name, CatalogParams::default(), 20);
            let sig = s.spaceform.ambient_signature();
            let e = &s.normal.e[0];
            for i in 0..2 {
                assert!(dot(sig, e, &s.tangent.u_i[i]).max_abs() < 1e-9);
            }
            assert!((&dot(sig, e, e) - s.normal.signs[0]).max_abs() < 1e-9);
            assert_eq!(s.normal.seam_nodes, 0);
            // aligned frames vary smoothly: neighbouring normals are close
            let g = s.chart().grid().clone();
            for node in 1..g.node_count() {
                if g.multi_index(node)[0] == 0 {
                    continue;
                }
                let d: f64 = e.iter().map(|c| c.value(node) * c.value(node - 1)).sum();
                assert!(d > 0.0, "{name} flip at {node}");
            }
        }
    }

    #[test]
    fn round_sphere_is_umbilic() {
        let r = 2.0;
        let s = iso("round_sphere", CatalogParams::default().with("r", r), 20);
        assert!((&s.second.mean[0].abs() - 1.0 / r).max_abs() < 1e-12);
        for i in 0..2 {
            for j in 0..2 {
                let dev = s.second.h(0, i, j) - &(s.tangent.metric.g(i, j) * &s.second.mean[0]);
                assert!(dev.max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn catenoid_is_minimal_with_negative_curvature() {
        let c = iso("catenoid", CatalogParams::default(), 24);
        assert!(c.laplacian_residual() < 1e-9);
        assert!(c.second.mean[0].max_abs() < 1e-12);
        assert!(c.gauss.kappa_m.values().iter().all(|&k| k < 0.0));
        let k_min = Field::sum_scaled(&[(1.0, &c.gauss.kappa_m), (0.5, &c.second.ii2)]);
        assert!(k_min.max_abs() < 1e-9);
    }

    #[test]
    fn gauss_and_laplacian_on_all_surfaces() {
        for name in NAMES {
            let s = iso(name, CatalogParams::default(), 24);
            assert!(s.gauss.residual <= 1e-5, "{name}: {}", s.gauss.residual);
            assert!(s.laplacian_residual() < 1e-8, "{name}: {}", s.laplacian_residual());
        }
    }

    #[test]
    fn corrected_second_derivatives_are_normal() {
        let s = iso("torus_product", CatalogParams::default(), 20);
        let sig = s.spaceform.ambient_signature();
        let uij = corrected_second_derivatives(s.spaceform, &s.u, &s.tangent);
        for v in &uij {
            assert!(dot(sig, v, &s.u).max_abs() < 1e-12);
            for ui in &s.tangent.u_i {
                assert!(dot(sig, v, ui).max_abs() < 1e-12);
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                let a = s.second.h(0, i, j);
                let b = s.second.h(0, j, i);
                assert!((a - b).max_abs() < 1e-14);
            }
        }
    }

    #[test]
    fn fd_gauss_residual_converges() {
        // periodic surface: whole grid; open axis: nodes away from the closures
        for (name, margin) in [("torus_product", 0), ("catenoid", 8)] {
            let mut r = Vec::new();
            for n in [32, 64, 128] {
                let imm = catalog(name, &CatalogParams::default()).unwrap().with_count(n);
                let c = imm.chart(StencilConfig::finite_difference(4).unwrap()).unwrap();
                let g = Isometric::compute(&imm, &c).unwrap().gauss;
                let d = (&g.kappa_m - &g.kappa_gauss).values();
                let e = (0..d.len())
                    .filter(|&k| {
                        let i = c.grid().multi_index(k)[0];
                        margin == 0 || (i >= margin && i + margin < n)
                    })
                    .map(|k| d[k].abs())
                    .fold(0.0, f64::max);
                r.push(e);
            }
            let p = (r[1] / r[2]).log2();
            assert!(p >= 3.5 || r[2] < 1e-12, "{name} {r:?} {p}");
        }
    }
}
