//! Conformal factor, canonical lift `Y`, the frame `{Y, N, Y_i, ξ_α}` and the
//! invariant tensors `A`, `B`, `C` with their identity and integrability checks.
//!
//! Two routes lead to the tensors: closed forms in the isometric data
//! ([`invariants_extrinsic`]) and read-offs from the moving frame
//! ([`invariants_frame`]). Both use the frame metric `ĝ = <dY, dY> = e^{2τ} I`;
//! the signed conformal metric is `g = σ ĝ`.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::calculus::{
    covariant_derivative, curvature, levi_civita, BundleConnection, Chart, Curvature, Field, MetricField, Slot,
    TensorField,
};
use crate::error::{Error, Result};
use crate::indefinite::Signature;
use crate::isometric::{align_frames, jdot, jet_gram_schmidt, settle_signs, Isometric};
use crate::jet::Jet;
use crate::spaceform::{dot, lift_fields, metric_of, tangents, LightConeLift, SpaceKind};

/// Relative cutoff on `|f|` below which a node is non-regular.
pub const REGULARITY_TOL: f64 = 1e-8;
/// Smallest fraction of regular nodes accepted for a surface.
pub const MIN_REGULAR_FRACTION: f64 = 0.1;
/// Reported when the projected `ξ_α` moves further than this from its seed.
pub const XI_WARN: f64 = 1e-6;

/// Connected set of regular nodes sharing one sign of `f`.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub sign: f64,
    pub nodes: usize,
}

/// `f = ±(<Δy,Δy> − m²κ)`, `e^{2τ} = |f|`, `σ = sign f`.
#[derive(Clone, Debug)]
pub struct ConformalFactor {
    pub f: Field,
    pub tau: Field,
    /// `σ` per node, `NaN` where non-regular.
    pub sign: Field,
    pub regular: Vec<bool>,
    pub regions: Vec<Region>,
}

impl ConformalFactor {
    /// Masks nodes where `|f| ≤ tol · scale` and splits the rest into regions.
    pub fn new(f: &Field, scale: &[f64]) -> Result<Self> {
        let chart = f.chart().clone();
        let fv = f.values();
        let regular: Vec<bool> = fv
            .iter()
            .zip(scale)
            .map(|(&x, &s)| x.abs() > REGULARITY_TOL * s.max(1.0))
            .collect();
        let count = regular.iter().filter(|&&r| r).count();
        let total = chart.nodes();
        if (count as f64) < MIN_REGULAR_FRACTION * total as f64 {
            return Err(Error::InsufficientRegularity { regular: count, total });
        }
        let mask: Vec<bool> = regular.iter().map(|r| !r).collect();
        let f = f.masked(&mask);
        let tau = f.abs().ln().scale(0.5);
        let sign = f.signum();
        let regions = regions(&chart, &fv, &regular);
        Ok(Self { f, tau, sign, regular, regions })
    }

    pub fn regular_count(&self) -> usize {
        self.regular.iter().filter(|&&r| r).count()
    }

    pub fn nonregular_fraction(&self) -> f64 {
        1.0 - self.regular_count() as f64 / self.regular.len() as f64
    }

    /// The common sign of all regular nodes, if there is one.
    pub fn sigma(&self) -> Option<f64> {
        let s = self.regions.first()?.sign;
        self.regions.iter().all(|r| r.sign == s).then_some(s)
    }

    /// `e^{2τ} = |f|`.
    pub fn e2tau(&self) -> Field {
        self.f.abs()
    }

    pub fn mask(&self) -> Vec<bool> {
        self.regular.iter().map(|r| !r).collect()
    }
}

fn regions(chart: &Arc<Chart>, fv: &[f64], regular: &[bool]) -> Vec<Region> {
    let grid = chart.grid();
    let n = chart.nodes();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] || !regular[start] {
            continue;
        }
        let sign = fv[start].signum();
        let mut q = VecDeque::from([start]);
        seen[start] = true;
        let mut size = 0;
        while let Some(node) = q.pop_front() {
            size += 1;
            let idx = grid.multi_index(node);
            for k in 0..grid.m() {
                let ax = grid.axis(k);
                let c = ax.count;
                let mut nbs = Vec::with_capacity(2);
                if idx[k] + 1 < c {
                    nbs.push(node + grid.stride(k));
                } else if ax.periodic {
                    nbs.push(node - idx[k] * grid.stride(k));
                }
                if idx[k] > 0 {
                    nbs.push(node - grid.stride(k));
                } else if ax.periodic {
                    nbs.push(node + (c - 1) * grid.stride(k));
                }
                for nb in nbs {
                    if !seen[nb] && regular[nb] && fv[nb].signum() == sign {
                        seen[nb] = true;
                        q.push_back(nb);
                    }
                }
            }
        }
        out.push(Region { sign, nodes: size });
    }
    out
}

/// `f = m/(m−1) (|II|² − m|H|²)` with the scale-aware regularity mask.
pub fn conformal_factor(iso: &Isometric) -> Result<ConformalFactor> {
    let m = iso.m();
    if m < 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: m });
    }
    let mf = m as f64;
    let s = &iso.second;
    let f = Field::sum_scaled(&[(mf / (mf - 1.0), &s.ii2), (-mf * mf / (mf - 1.0), &s.h2)]);
    let ii2 = s.ii2.values();
    let h2 = s.h2.values();
    let scale: Vec<f64> = ii2.iter().zip(&h2).map(|(a, b)| a.abs().max(mf * b.abs())).collect();
    ConformalFactor::new(&f, &scale)
}

/// Moving frame along the canonical lift.
#[derive(Clone, Debug)]
pub struct CanonicalLift {
    pub signature: Signature,
    /// `Y = e^τ y`
    pub y: Vec<Field>,
    /// `Y_i = ∂_i Y`
    pub y_i: Vec<Vec<Field>>,
    /// `y_ij[i*m + j] = ∂_j Y_i`
    pub y_ij: Vec<Vec<Field>>,
    /// `ΔY` with respect to `ĝ`
    pub lap: Vec<Field>,
    pub n: Vec<Field>,
    pub xi: Vec<Vec<Field>>,
    pub xi_signs: Vec<f64>,
    /// `ĝ_ij = <Y_i, Y_j>`
    pub metric: MetricField,
    pub conn: BundleConnection,
    /// Largest Euclidean distance between a projected `ξ_α` and its seed.
    pub xi_discrepancy: f64,
}

impl CanonicalLift {
    pub fn m(&self) -> usize {
        self.y_i.len()
    }

    pub fn rank(&self) -> usize {
        self.xi.len()
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.y[0].chart()
    }
}

struct Core {
    y: Vec<Field>,
    y_i: Vec<Vec<Field>>,
    y_ij: Vec<Vec<Field>>,
    lap: Vec<Field>,
    n: Vec<Field>,
    metric: MetricField,
    conn: BundleConnection,
}

fn frame_core(sig: Signature, y: &[Field], tau: &Field) -> Core {
    let m = y[0].chart().m();
    let et = tau.exp();
    let yy: Vec<Field> = y.iter().map(|c| c * &et).collect();
    let y_i = tangents(&yy, m);
    let metric = metric_of(sig, &y_i);
    let conn = levi_civita(&metric);
    let mut y_ij: Vec<Vec<Field>> = vec![Vec::new(); m * m];
    for i in 0..m {
        for j in i..m {
            let d: Vec<Field> = y_i[i].iter().map(|c| c.partial(j)).collect();
            y_ij[j * m + i] = d.clone();
            y_ij[i * m + j] = d;
        }
    }
    let lap: Vec<Field> = (0..yy.len())
        .map(|c| {
            let mut terms: Vec<(f64, &Field, &Field)> = Vec::new();
            let hess: Vec<Field> = (0..m * m)
                .map(|ij| {
                    let (i, j) = (ij / m, ij % m);
                    let t: Vec<(f64, &Field, &Field)> =
                        (0..m).map(|k| (-1.0, conn.tangent(k, i, j), &y_i[k][c])).collect();
                    &y_ij[ij][c] + &Field::sum_products(&t)
                })
                .collect();
            for (ij, h) in hess.iter().enumerate() {
                terms.push((1.0, &metric.inverse_comps()[ij], h));
            }
            Field::sum_products(&terms)
        })
        .collect();
    let mf = m as f64;
    let ll = dot(sig, &lap, &lap);
    let coef = ll.scale(-1.0 / (2.0 * mf * mf));
    let n: Vec<Field> = lap
        .iter()
        .zip(&yy)
        .map(|(l, yc)| Field::sum_products(&[(1.0, &coef, yc)]) - l.scale(1.0 / mf))
        .collect();
    Core { y: yy, y_i, y_ij, lap, n, metric, conn }
}

/// Removes the `span{Y, N, Y_i}` components of each seed, then orthonormalizes.
/// With `pivot` the seeds are an overcomplete set and the best conditioned ones
/// are kept; otherwise seeds are processed in order.
fn project_seeds(
    sig: Signature,
    core: &Core,
    seeds: &[Vec<Field>],
    rank: usize,
    pivot: bool,
) -> (Vec<Vec<Field>>, Vec<Vec<f64>>, f64) {
    let dim = sig.dim();
    let m = core.y_i.len();
    let ns = seeds.len();
    let mut inputs: Vec<&Field> = Vec::new();
    inputs.extend(core.y.iter());
    inputs.extend(core.n.iter());
    for yi in &core.y_i {
        inputs.extend(yi.iter());
    }
    inputs.extend(core.metric.inverse_comps().iter());
    for s in seeds {
        inputs.extend(s.iter());
    }
    let f = move |_node: usize, x: &[Jet]| -> Vec<Jet> {
        let l = x[0].layout();
        let d = x[0].deg();
        let yv = &x[..dim];
        let nv = &x[dim..2 * dim];
        let yi: Vec<&[Jet]> = (0..m).map(|i| &x[(2 + i) * dim..(3 + i) * dim]).collect();
        let inv = &x[(2 + m) * dim..(2 + m) * dim + m * m];
        let sd = &x[(2 + m) * dim + m * m..];
        let projected: Vec<Vec<Jet>> = (0..ns)
            .map(|a| {
                let v = &sd[a * dim..(a + 1) * dim];
                let cn = jdot(sig, v, nv);
                let cy = jdot(sig, v, yv);
                let vy: Vec<Jet> = (0..m).map(|j| jdot(sig, v, yi[j])).collect();
                let mut out: Vec<Jet> = (0..dim).map(|c| &(&v[c] - &(&cn * &yv[c])) - &(&cy * &nv[c])).collect();
                for i in 0..m {
                    let mut c = &inv[i * m] * &vy[0];
                    for j in 1..m {
                        c = &c + &(&inv[i * m + j] * &vy[j]);
                    }
                    for (o, u) in out.iter_mut().zip(yi[i]) {
                        *o = &*o - &(&c * u);
                    }
                }
                out
            })
            .collect();
        let nan = || vec![Jet::constant(l, d, f64::NAN); rank * dim + rank + 1];
        let (frame, signs) = if pivot {
            match jet_gram_schmidt(sig, projected, rank) {
                Some(r) => r,
                None => return nan(),
            }
        } else {
            match ordered_gram_schmidt(sig, projected) {
                Some(r) => r,
                None => return nan(),
            }
        };
        let mut drift: f64 = 0.0;
        if !pivot {
            for (a, e) in frame.iter().enumerate() {
                let d2: f64 = (0..dim).map(|c| (e[c].value() - sd[a * dim + c].value()).powi(2)).sum();
                drift = drift.max(d2.sqrt());
            }
        }
        let mut out: Vec<Jet> = frame.into_iter().flatten().collect();
        out.extend(signs.iter().map(|&s| Jet::constant(l, d, s)));
        out.push(Jet::constant(l, d, drift));
        out
    };
    let mut flat = Field::node_map(&inputs, rank * dim + rank + 1, &f);
    let drift = flat.pop().expect("drift").max_abs();
    let sign_fields = flat.split_off(rank * dim);
    let e: Vec<Vec<Field>> = (0..rank).map(|a| flat[a * dim..(a + 1) * dim].to_vec()).collect();
    let signs = sign_fields.iter().map(Field::values).collect();
    (e, signs, drift)
}

fn ordered_gram_schmidt(sig: Signature, vs: Vec<Vec<Jet>>) -> Option<(Vec<Vec<Jet>>, Vec<f64>)> {
    const TOL: f64 = 1e-10;
    let mut out: Vec<Vec<Jet>> = Vec::with_capacity(vs.len());
    let mut signs = Vec::with_capacity(vs.len());
    for mut v in vs {
        for (e, &s) in out.iter().zip(&signs) {
            let c = jdot(sig, &v, e).scale(s);
            for (vc, ec) in v.iter_mut().zip(e) {
                *vc = &*vc - &(&c * ec);
            }
        }
        let q = jdot(sig, &v, &v);
        let e2: f64 = v.iter().map(|x| x.value() * x.value()).sum();
        if !(q.value().abs() > TOL * e2) {
            return None;
        }
        let s = q.value().signum();
        let r = q.scale(s).sqrt().recip();
        out.push(v.iter().map(|x| x * &r).collect());
        signs.push(s);
    }
    Some((out, signs))
}

fn finish(sig: Signature, core: Core, xi: Vec<Vec<Field>>, xi_signs: Vec<f64>, drift: f64) -> CanonicalLift {
    CanonicalLift {
        signature: sig,
        y: core.y,
        y_i: core.y_i,
        y_ij: core.y_ij,
        lap: core.lap,
        n: core.n,
        xi,
        xi_signs,
        metric: core.metric,
        conn: core.conn,
        xi_discrepancy: drift,
    }
}

/// Frame from the isometric data: `ξ_α` seeded by `H_α y + ζ_α`.
pub fn canonical_frame(iso: &Isometric, cf: &ConformalFactor) -> Result<CanonicalLift> {
    let sf = iso.spaceform;
    let lift = lift_fields(sf, &iso.u);
    let sig = lift.signature;
    let y = &lift.values;
    let core = frame_core(sig, y, &cf.tau);
    let asig = sf.ambient_signature();
    let seeds: Vec<Vec<Field>> = iso
        .normal
        .e
        .iter()
        .zip(&iso.second.mean_lower)
        .map(|(e, hl)| {
            let mut zeta: Vec<Field> = Vec::with_capacity(sig.dim());
            let zero = Field::zeros(iso.chart());
            match sf.kind {
                SpaceKind::Flat => {
                    let ue = dot(asig, &iso.u, e);
                    zeta.push(ue.clone());
                    zeta.extend(e.iter().cloned());
                    zeta.push(ue);
                }
                SpaceKind::Sphere => {
                    zeta.extend(e.iter().cloned());
                    zeta.push(zero);
                }
                SpaceKind::Hyperbolic => {
                    zeta.push(zero);
                    zeta.extend(e.iter().cloned());
                }
            }
            zeta.iter().zip(y).map(|(z, yc)| Field::sum_products(&[(1.0, hl, yc)]) + z.clone()).collect()
        })
        .collect();
    let rank = seeds.len();
    let (xi, node_signs, drift) = project_seeds(sig, &core, &seeds, rank, false);
    let (xi, signs, masked) = settle_signs(xi, &node_signs);
    if rank > 0 && masked == iso.chart().nodes() {
        return Err(Error::NullPivot { step: 0 });
    }
    Ok(finish(sig, core, xi, signs, drift))
}

/// `f_y = <Δy, Δy> − m² κ_y` for the metric `<dy, dy>` of an arbitrary lift.
pub fn lift_factor(lift: &LightConeLift) -> Result<ConformalFactor> {
    let sig = lift.signature;
    let m = lift.chart().m();
    let mf = m as f64;
    let dy = tangents(&lift.values, m);
    let metric = metric_of(sig, &dy);
    let conn = levi_civita(&metric);
    let lap: Vec<Field> = lift
        .values
        .iter()
        .map(|c| crate::calculus::laplace_beltrami(c, &metric, &conn))
        .collect();
    let ll = dot(sig, &lap, &lap);
    let kappa = curvature(&metric, &conn).normalized;
    let f = Field::sum_scaled(&[(1.0, &ll), (-mf * mf, &kappa)]);
    let lv = ll.values();
    let kv = kappa.values();
    let scale: Vec<f64> = lv.iter().zip(&kv).map(|(a, b)| a.abs().max(mf * mf * b.abs())).collect();
    ConformalFactor::new(&f, &scale)
}

/// Signed conformal metric `g = f_y <dy, dy>` of a lift.
pub fn conformal_metric_of_lift(lift: &LightConeLift) -> Result<MetricField> {
    let cf = lift_factor(lift)?;
    let h = lift.induced_metric();
    Ok(MetricField::new(h.comps().iter().map(|c| c * &cf.f).collect()))
}

/// Frame built from a lift alone: `τ` from `f_y`, `ξ_α` from projected
/// coordinate axes, aligned along the grid.
pub fn canonical_frame_from_lift(lift: &LightConeLift, rank: usize) -> Result<(ConformalFactor, CanonicalLift)> {
    let cf = lift_factor(lift)?;
    let sig = lift.signature;
    let chart = lift.chart().clone();
    let core = frame_core(sig, &lift.values, &cf.tau);
    let dim = sig.dim();
    let seeds: Vec<Vec<Field>> = (0..dim)
        .map(|k| (0..dim).map(|c| Field::constant(&chart, if c == k { 1.0 } else { 0.0 })).collect())
        .collect();
    let (mut xi, mut node_signs, _) = project_seeds(sig, &core, &seeds, rank, true);
    align_frames(&chart, &mut xi, &mut node_signs);
    let (xi, signs, masked) = settle_signs(xi, &node_signs);
    if rank > 0 && masked == chart.nodes() {
        return Err(Error::NullPivot { step: 0 });
    }
    Ok((cf, finish(sig, core, xi, signs, 0.0)))
}

/// Invariant tensors in the coordinate basis, all relative to `ĝ`.
#[derive(Clone, Debug)]
pub struct ConformalTensors {
    pub m: usize,
    pub rank: usize,
    /// `σ` per node
    pub sign: Field,
    /// `ĝ = e^{2τ} I`
    pub frame_metric: MetricField,
    /// `g = σ ĝ`
    pub metric: MetricField,
    /// Levi-Civita connection of `ĝ` with the conformal normal connection `ω_α^β`.
    pub conn: BundleConnection,
    pub normal_signs: Vec<f64>,
    /// `A_ij`
    pub a: TensorField,
    /// `B^α_ij`
    pub b: TensorField,
    /// `C^α_i`
    pub c: TensorField,
    /// Curvature of `ĝ`; its Ricci tensor is that of `g`.
    pub curvature: Curvature,
    /// Normalized scalar curvature of `g`.
    pub kappa_conf: Field,
    /// Set when closed forms were evaluated on nodes with `σ = −1`.
    pub convention_mismatch: bool,
}

impl ConformalTensors {
    pub fn a(&self, i: usize, j: usize) -> &Field {
        self.a.get(&[i, j])
    }

    pub fn b(&self, al: usize, i: usize, j: usize) -> &Field {
        self.b.get(&[al, i, j])
    }

    pub fn c(&self, al: usize, i: usize) -> &Field {
        self.c.get(&[al, i])
    }

    /// `ω_α^β(∂_i)`
    pub fn omega(&self, al: usize, be: usize, i: usize) -> &Field {
        self.conn.normal(al, be, i).expect("normal connection")
    }

    pub fn chart(&self) -> &Arc<Chart> {
        self.frame_metric.chart()
    }

    /// `κ̂`, normalized scalar curvature of `ĝ`.
    pub fn kappa_frame(&self) -> &Field {
        &self.curvature.normalized
    }
}

fn assemble(
    sign: Field,
    frame_metric: MetricField,
    normal_conn: Vec<Field>,
    normal_signs: Vec<f64>,
    a: Vec<Field>,
    b: Vec<Field>,
    c: Vec<Field>,
    convention_mismatch: bool,
) -> Result<ConformalTensors> {
    let m = frame_metric.dim();
    let rank = normal_signs.len();
    let conn = levi_civita(&frame_metric).with_normal(rank, normal_conn);
    let metric = MetricField::new(frame_metric.comps().iter().map(|x| x * &sign).collect());
    let curvature = curvature(&frame_metric, &conn);
    let kappa_conf = &curvature.normalized * &sign;
    let cov = Slot::CovariantTangent;
    Ok(ConformalTensors {
        m,
        rank,
        sign,
        frame_metric,
        metric,
        conn,
        normal_signs,
        a: TensorField::new(vec![cov, cov], vec![m, m], a)?,
        b: TensorField::new(vec![Slot::Normal, cov, cov], vec![rank, m, m], b)?,
        c: TensorField::new(vec![Slot::Normal, cov], vec![rank, m], c)?,
        curvature,
        kappa_conf,
        convention_mismatch,
    })
}

/// Closed forms in `τ`, `h^α_ij`, `H^α` and the normal connection of `u`.
pub fn invariants_extrinsic(iso: &Isometric, cf: &ConformalFactor) -> Result<ConformalTensors> {
    let m = iso.m();
    let r = iso.normal.rank();
    let tf = &iso.tangent;
    let s = &iso.second;
    let eps = iso.spaceform.epsilon();
    let tau = &cf.tau;
    let t_i: Vec<Field> = (0..m).map(|i| tau.partial(i)).collect();
    let t_up = tf.metric.raise(&t_i);
    let grad2 = Field::sum_products(&(0..m).map(|i| (1.0, &t_i[i], &t_up[i])).collect::<Vec<_>>());
    let half = Field::sum_scaled(&[(0.5, &grad2), (0.5, &s.h2)]).add_scalar(-0.5 * eps);
    let mut a: Vec<Field> = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            if j < i {
                let x: Field = a[j * m + i].clone();
                a.push(x);
                continue;
            }
            let mut prods: Vec<(f64, &Field, &Field)> = vec![(1.0, &t_i[i], &t_i[j]), (-1.0, &half, tf.metric.g(i, j))];
            for k in 0..m {
                prods.push((1.0, tf.conn.tangent(k, i, j), &t_i[k]));
            }
            for al in 0..r {
                prods.push((1.0, s.h(al, i, j), &s.mean_lower[al]));
            }
            a.push(&Field::sum_products(&prods) - &t_i[i].partial(j));
        }
    }
    let et = tau.exp();
    let emt = tau.scale(-1.0).exp();
    let mut b = Vec::with_capacity(r * m * m);
    for al in 0..r {
        for i in 0..m {
            for j in 0..m {
                let x = Field::sum_products(&[(-1.0, &s.mean[al], tf.metric.g(i, j))]);
                b.push(&(s.h(al, i, j) + &x) * &et);
            }
        }
    }
    let mut c = Vec::with_capacity(r * m);
    for al in 0..r {
        for i in 0..m {
            let mut prods: Vec<(f64, &Field, &Field)> = vec![(1.0, &s.mean[al], &t_i[i])];
            for j in 0..m {
                prods.push((-1.0, s.h(al, i, j), &t_up[j]));
            }
            let x = &Field::sum_products(&prods) - &iso.derivs.h_cov[al * m + i];
            c.push(&x * &emt);
        }
    }
    let e2t = cf.e2tau();
    let frame_metric = MetricField::new(tf.metric.comps().iter().map(|x| x * &e2t).collect());
    let mismatch = cf.regions.iter().any(|g| g.sign < 0.0);
    assemble(cf.sign.clone(), frame_metric, iso.derivs.theta.clone(), iso.normal.signs.clone(), a, b, c, mismatch)
}

/// Read-offs from the frame: `A_ij = −<∂_j Y_i, N>`, `B^α_ij = ε_α <∂_j Y_i, ξ_α>`,
/// `C^α_i = ε_α <∂_i N, ξ_α>`, `ω_α^β(∂_i) = ε_β <∂_i ξ_α, ξ_β>`.
pub fn invariants_frame(frame: &CanonicalLift, cf: &ConformalFactor) -> Result<ConformalTensors> {
    let sig = frame.signature;
    let m = frame.m();
    let r = frame.rank();
    let mut a = Vec::with_capacity(m * m);
    for ij in 0..m * m {
        a.push(dot(sig, &frame.y_ij[ij], &frame.n).scale(-1.0));
    }
    let mut b = Vec::with_capacity(r * m * m);
    for al in 0..r {
        for ij in 0..m * m {
            b.push(dot(sig, &frame.y_ij[ij], &frame.xi[al]).scale(frame.xi_signs[al]));
        }
    }
    let dn = tangents(&frame.n, m);
    let mut c = Vec::with_capacity(r * m);
    for al in 0..r {
        for i in 0..m {
            c.push(dot(sig, &dn[i], &frame.xi[al]).scale(frame.xi_signs[al]));
        }
    }
    let dxi: Vec<Vec<Vec<Field>>> = frame.xi.iter().map(|x| tangents(x, m)).collect();
    let mut omega = Vec::with_capacity(r * r * m);
    for be in 0..r {
        for al in 0..r {
            for i in 0..m {
                omega.push(dot(sig, &dxi[al][i], &frame.xi[be]).scale(frame.xi_signs[be]));
            }
        }
    }
    assemble(cf.sign.clone(), frame.metric.clone(), omega, frame.xi_signs.clone(), a, b, c, false)
}

/// One named residual: sup norm and the node-wise largest component.
#[derive(Clone, Debug)]
pub struct Residual {
    pub name: &'static str,
    pub linf: f64,
    pub pointwise: Vec<f64>,
}

impl Residual {
    pub fn from_components(name: &'static str, comps: &[Field]) -> Self {
        let n = comps.first().map_or(0, |c| c.chart().nodes());
        let mut pointwise = vec![0.0f64; n];
        for c in comps {
            for (p, v) in pointwise.iter_mut().zip(c.values()) {
                *p = if v.is_nan() || p.is_nan() { f64::NAN } else { p.max(v.abs()) };
            }
        }
        let linf = pointwise.iter().filter(|x| !x.is_nan()).fold(0.0, |a: f64, &b| a.max(b));
        Self { name, linf, pointwise }
    }

    /// True when every node is masked.
    pub fn all_masked(&self) -> bool {
        self.pointwise.iter().all(|x| x.is_nan())
    }
}

/// Residuals of the algebraic identities plus the empirical sign in
/// `tr A = (m²κ ± 1)/(2m)`.
#[derive(Clone, Debug)]
pub struct IdentityReport {
    pub residuals: Vec<Residual>,
    pub empirical_sign: f64,
}

impl IdentityReport {
    pub fn get(&self, name: &str) -> Option<&Residual> {
        self.residuals.iter().find(|r| r.name == name)
    }
}

/// `g^{ij}g^{kl} T_ik S_jl`-type contraction `ĝ^{kl} X_ik Z_lj`.
fn contract_mid(ct: &ConformalTensors, x: impl Fn(usize, usize) -> Field, z: impl Fn(usize, usize) -> Field, i: usize, j: usize) -> Field {
    let m = ct.m;
    let xs: Vec<Field> = (0..m).map(|k| x(i, k)).collect();
    let zs: Vec<Field> = (0..m).map(|l| z(l, j)).collect();
    let terms: Vec<Field> = (0..m * m).map(|kl| &xs[kl / m] * &zs[kl % m]).collect();
    let prods: Vec<(f64, &Field, &Field)> =
        (0..m * m).map(|kl| (1.0, ct.frame_metric.inv(kl / m, kl % m), &terms[kl])).collect();
    Field::sum_products(&prods)
}

/// `Σ_α ε_α ĝ^{kl} B^α_ik B^α_lj`
fn bb(ct: &ConformalTensors, i: usize, j: usize) -> Field {
    let mut acc: Option<Field> = None;
    for al in 0..ct.rank {
        let t = contract_mid(ct, |p, q| ct.b(al, p, q).clone(), |p, q| ct.b(al, p, q).clone(), i, j)
            .scale(ct.normal_signs[al]);
        acc = Some(match acc {
            Some(x) => &x + &t,
            None => t,
        });
    }
    acc.unwrap_or_else(|| Field::zeros(ct.chart()))
}

/// Trace, Ricci, trace-free `B`, `|B|²` and `(1−m)C = div B`; with a frame also
/// the frame relations and `<ΔY,ΔY> = m²κ̂ + σ`.
pub fn identity_suite(ct: &ConformalTensors, frame: Option<&CanonicalLift>) -> Result<IdentityReport> {
    let m = ct.m;
    let mf = m as f64;
    let g = &ct.frame_metric;
    let tr_a = g.trace(ct.a.comps());
    let kap = ct.kappa_frame();
    let mut res = Vec::new();
    let rhs = Field::sum_scaled(&[(mf / 2.0, kap), (1.0 / (2.0 * mf), &ct.sign)]);
    res.push(Residual::from_components("trace", &[&tr_a - &rhs]));
    // empirical ± : median of 2m tr A − m²κ̂
    let mut probe: Vec<f64> = Field::sum_scaled(&[(2.0 * mf, &tr_a), (-mf * mf, kap)])
        .values()
        .into_iter()
        .filter(|x| !x.is_nan())
        .collect();
    probe.sort_by(|a, b| a.total_cmp(b));
    let empirical_sign = probe.get(probe.len() / 2).map_or(f64::NAN, |x| x.signum());
    let mut ricci = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let x = Field::sum_products(&[(1.0, &tr_a, g.g(i, j))]);
            let y = Field::sum_scaled(&[(1.0, &ct.curvature.ricci[i * m + j]), (-1.0, &x), (2.0 - mf, ct.a(i, j))]);
            ricci.push(&y + &bb(ct, i, j));
        }
    }
    res.push(Residual::from_components("ricci", &ricci));
    let mut trace_free = Vec::with_capacity(ct.rank);
    let mut norm: Option<Field> = None;
    for al in 0..ct.rank {
        let comps: Vec<Field> = (0..m * m).map(|ij| ct.b(al, ij / m, ij % m).clone()).collect();
        trace_free.push(g.trace(&comps));
        let mut t = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let x = contract_mid(ct, |p, q| ct.b(al, p, q).clone(), |p, q| ct.b(al, p, q).clone(), i, j);
                t.push(x);
            }
        }
        let s = g.trace(&t).scale(ct.normal_signs[al]);
        norm = Some(match norm {
            Some(x) => &x + &s,
            None => s,
        });
    }
    res.push(Residual::from_components("trace_free_b", &trace_free));
    let target = ct.sign.scale((mf - 1.0) / mf);
    let norm = norm.unwrap_or_else(|| Field::zeros(ct.chart()));
    res.push(Residual::from_components("b_norm", &[&norm - &target]));
    let db = covariant_derivative(&ct.b, &ct.conn)?;
    let mut div = Vec::with_capacity(ct.rank * m);
    for al in 0..ct.rank {
        for i in 0..m {
            let prods: Vec<(f64, &Field, &Field)> =
                (0..m * m).map(|jk| (1.0, g.inv(jk / m, jk % m), db.get(&[al, i, jk / m, jk % m]))).collect();
            div.push(&Field::sum_products(&prods) - &ct.c(al, i).scale(1.0 - mf));
        }
    }
    res.push(Residual::from_components("c_divergence", &div));
    if let Some(fr) = frame {
        let sig = fr.signature;
        let mut rel = vec![
            dot(sig, &fr.y, &fr.y),
            dot(sig, &fr.n, &fr.n),
            dot(sig, &fr.n, &fr.y).add_scalar(-1.0),
        ];
        for k in 0..m {
            rel.push(dot(sig, &fr.n, &fr.y_i[k]));
        }
        for (al, x) in fr.xi.iter().enumerate() {
            rel.push(dot(sig, x, &fr.y));
            rel.push(dot(sig, x, &fr.n));
            for k in 0..m {
                rel.push(dot(sig, x, &fr.y_i[k]));
            }
            for (be, z) in fr.xi.iter().enumerate() {
                let want = if al == be { fr.xi_signs[al] } else { 0.0 };
                rel.push(dot(sig, x, z).add_scalar(-want));
            }
        }
        res.push(Residual::from_components("frame_relations", &rel));
        let ll = dot(sig, &fr.lap, &fr.lap);
        let want = Field::sum_scaled(&[(mf * mf, kap), (1.0, &ct.sign)]);
        res.push(Residual::from_components("laplacian_norm", &[&ll - &want]));
        let mut dy = Vec::with_capacity(m * m);
        let mut om = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                dy.push(&dot(sig, &fr.y_i[i], &fr.y_i[j]) - g.g(i, j));
                om.push(&dot(sig, &fr.y_ij[i * m + j], &fr.y) + g.g(i, j));
            }
        }
        res.push(Residual::from_components("lift_metric", &dy));
        res.push(Residual::from_components("omega_readoff", &om));
    }
    Ok(IdentityReport { residuals: res, empirical_sign })
}

/// Codazzi for `A` and `B`, curl of `C`, normal curvature and Gauss.
pub fn integrability_suite(ct: &ConformalTensors) -> Result<Vec<Residual>> {
    let m = ct.m;
    let r = ct.rank;
    let g = &ct.frame_metric;
    let eps = &ct.normal_signs;
    let da = covariant_derivative(&ct.a, &ct.conn)?;
    let db = covariant_derivative(&ct.b, &ct.conn)?;
    let dc = covariant_derivative(&ct.c, &ct.conn)?;
    let mut out = Vec::new();
    let mut codazzi_a = Vec::new();
    let mut codazzi_b = Vec::new();
    for i in 0..m {
        for j in 0..m {
            for k in (j + 1)..m {
                let mut prods: Vec<(f64, &Field, &Field)> = Vec::new();
                for al in 0..r {
                    prods.push((eps[al], ct.b(al, i, j), ct.c(al, k)));
                    prods.push((-eps[al], ct.b(al, i, k), ct.c(al, j)));
                }
                let lhs = da.get(&[i, j, k]) - da.get(&[i, k, j]);
                codazzi_a.push(if prods.is_empty() { lhs } else { &lhs + &Field::sum_products(&prods) });
                for al in 0..r {
                    let lhs = db.get(&[al, i, j, k]) - db.get(&[al, i, k, j]);
                    let rhs = Field::sum_products(&[(1.0, g.g(i, j), ct.c(al, k)), (-1.0, g.g(i, k), ct.c(al, j))]);
                    codazzi_b.push(&lhs - &rhs);
                }
            }
        }
    }
    out.push(Residual::from_components("codazzi_a", &codazzi_a));
    out.push(Residual::from_components("codazzi_b", &codazzi_b));
    let mut curl = Vec::new();
    for al in 0..r {
        for i in 0..m {
            for j in (i + 1)..m {
                let lhs = dc.get(&[al, i, j]) - dc.get(&[al, j, i]);
                let x = contract_mid(ct, |p, q| ct.b(al, p, q).clone(), |p, q| ct.a(p, q).clone(), i, j);
                let y = contract_mid(ct, |p, q| ct.b(al, p, q).clone(), |p, q| ct.a(p, q).clone(), j, i);
                curl.push(&(&lhs - &x) + &y);
            }
        }
    }
    out.push(Residual::from_components("c_curl", &curl));
    let mut normal = Vec::new();
    for al in 0..r {
        for be in 0..r {
            for i in 0..m {
                for j in (i + 1)..m {
                    // R^α_βij
                    let w = |k: usize| ct.omega(be, al, k);
                    let mut prods: Vec<(f64, &Field, &Field)> = Vec::new();
                    for ga in 0..r {
                        prods.push((1.0, ct.omega(ga, al, i), ct.omega(be, ga, j)));
                        prods.push((-1.0, ct.omega(ga, al, j), ct.omega(be, ga, i)));
                    }
                    let mut lhs = &w(j).partial(i) - &w(i).partial(j);
                    if !prods.is_empty() {
                        lhs = &lhs + &Field::sum_products(&prods);
                    }
                    let lhs = lhs.scale(eps[al]);
                    let x = contract_mid(ct, |p, q| ct.b(al, p, q).clone(), |p, q| ct.b(be, p, q).clone(), i, j);
                    let y = contract_mid(ct, |p, q| ct.b(be, p, q).clone(), |p, q| ct.b(al, p, q).clone(), i, j);
                    normal.push(&lhs - &(&x - &y).scale(eps[al] * eps[be]));
                }
            }
        }
    }
    out.push(Residual::from_components("normal_curvature", &normal));
    let mut gauss = Vec::new();
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in (k + 1)..m {
                    let mut prods: Vec<(f64, &Field, &Field)> = vec![
                        (1.0, g.g(i, k), ct.a(j, l)),
                        (-1.0, g.g(i, l), ct.a(j, k)),
                        (1.0, ct.a(i, k), g.g(j, l)),
                        (-1.0, ct.a(i, l), g.g(j, k)),
                    ];
                    for al in 0..r {
                        prods.push((eps[al], ct.b(al, i, k), ct.b(al, j, l)));
                        prods.push((-eps[al], ct.b(al, i, l), ct.b(al, j, k)));
                    }
                    gauss.push(ct.curvature.r(i, j, k, l) - &Field::sum_products(&prods));
                }
            }
        }
    }
    out.push(Residual::from_components("gauss", &gauss));
    Ok(out)
}

/// Largest differences of `A`, `B`, `C` between two evaluations, relative to
/// the common scale `max(|A|, |B|, |C|)` of the first.
#[derive(Clone, Debug)]
pub struct PathComparison {
    pub scale: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl PathComparison {
    pub fn worst(&self) -> f64 {
        self.a.max(self.b).max(self.c)
    }
}

pub fn compare_paths(reference: &ConformalTensors, other: &ConformalTensors) -> PathComparison {
    let scale = reference.a.max_abs().max(reference.b.max_abs()).max(reference.c.max_abs()).max(f64::MIN_POSITIVE);
    let diff = |x: &TensorField, y: &TensorField| {
        x.comps().iter().zip(y.comps()).map(|(p, q)| (p - q).max_abs()).fold(0.0, f64::max) / scale
    };
    PathComparison {
        scale,
        a: diff(&reference.a, &other.a),
        b: diff(&reference.b, &other.b),
        c: diff(&reference.c, &other.c),
    }
}

/// Flips the sign of each `ξ_α` of `other` where that brings its `B^α` closer
/// to the one of `reference`.
pub fn match_normal_orientation(reference: &ConformalTensors, other: &ConformalTensors) -> ConformalTensors {
    let m = other.m;
    let r = other.rank;
    let flips: Vec<f64> = (0..r)
        .map(|al| {
            let (mut same, mut opp) = (0.0f64, 0.0f64);
            for ij in 0..m * m {
                let (x, y) = (reference.b(al, ij / m, ij % m), other.b(al, ij / m, ij % m));
                same = same.max((x - y).max_abs());
                opp = opp.max((x + y).max_abs());
            }
            if opp < same { -1.0 } else { 1.0 }
        })
        .collect();
    let mut out = other.clone();
    let flip = |t: &TensorField| -> TensorField {
        let comps = t.comps().iter().enumerate().map(|(k, c)| c.scale(flips[t.multi_index(k)[0]])).collect();
        TensorField::new(t.slots().to_vec(), t.dims().to_vec(), comps).expect("shape")
    };
    out.b = flip(&other.b);
    out.c = flip(&other.c);
    if let Some(w) = out.conn.normal.as_mut() {
        for be in 0..r {
            for al in 0..r {
                for i in 0..m {
                    let k = (be * r + al) * m + i;
                    w[k] = w[k].scale(flips[al] * flips[be]);
                }
            }
        }
    }
    out
}
