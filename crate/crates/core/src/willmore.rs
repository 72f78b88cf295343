//! Conformal volume, the Willmore residual and a numerical first-variation check.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{covariant_derivative, integrate_unmasked, Backend, Chart, Field, MetricField};
use crate::conformal::{canonical_frame, conformal_factor, invariants_extrinsic, ConformalTensors};
use crate::error::{Error, Result};
use crate::isometric::Isometric;
use crate::jet::Jet;
use crate::spaceform::{dot, lift_fields, Immersion, SpaceKind};

/// Which of the two equivalent Euler-Lagrange expressions to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WillmoreForm {
    /// `ĝ^{ij} C_{i,j} + ĝ^{ik}ĝ^{jl}(R_ij/(m−1) − A_ij) B_kl`
    Reduced,
    /// `ĝ^{ik}ĝ^{jl}(B_{ij,kl} + A_ij B_kl + ĝ^{rq} B_ir B_qj B_kl)`, equal to `(1−m)` times the reduced form.
    Hessian,
}

impl WillmoreForm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Reduced => "reduced",
            Self::Hessian => "hessian",
        }
    }
}

/// Per-node Willmore expression `E_α` (normal index lowered) and its norms.
#[derive(Clone, Debug)]
pub struct WillmoreResidual {
    pub form: WillmoreForm,
    pub e: Vec<Field>,
    pub l2: f64,
    pub linf: f64,
    /// Largest sup norm of the individual summands, for roundoff estimates.
    pub term_scale: f64,
}

impl WillmoreResidual {
    /// Node-wise `max_α |E_α|`.
    pub fn pointwise(&self) -> Vec<f64> {
        let n = self.e.first().map_or(0, |f| f.chart().nodes());
        let mut out = vec![0.0f64; n];
        for f in &self.e {
            for (o, v) in out.iter_mut().zip(f.values()) {
                *o = if v.is_nan() || o.is_nan() { f64::NAN } else { o.max(v.abs()) };
            }
        }
        out
    }
}

fn mat_mul(a: &[Field], b: &[Field], m: usize) -> Vec<Field> {
    (0..m * m)
        .map(|ij| {
            let (i, j) = (ij / m, ij % m);
            let t: Vec<(f64, &Field, &Field)> = (0..m).map(|k| (1.0, &a[i * m + k], &b[k * m + j])).collect();
            Field::sum_products(&t)
        })
        .collect()
}

fn trace(a: &[Field], m: usize) -> Field {
    let t: Vec<(f64, &Field)> = (0..m).map(|i| (1.0, &a[i * m + i])).collect();
    Field::sum_scaled(&t)
}

fn b_matrix(ct: &ConformalTensors, al: usize) -> Vec<Field> {
    let m = ct.m;
    (0..m * m).map(|ij| ct.b(al, ij / m, ij % m).clone()).collect()
}

/// `ĝ^{ik}ĝ^{jl} X_ij Y_kl = tr(G⁻¹ X G⁻¹ Y)` for symmetric `X`, `Y`.
fn pair(ginv: &[Field], x: &[Field], y: &[Field], m: usize) -> Field {
    let gx = mat_mul(ginv, x, m);
    let gy = mat_mul(ginv, y, m);
    trace(&mat_mul(&gx, &gy, m), m)
}

/// `Vol(ĝ)` over unmasked nodes, with the number of skipped nodes.
pub fn conformal_volume(ct: &ConformalTensors) -> (f64, usize) {
    conformal_volume_of(&ct.frame_metric)
}

pub fn conformal_volume_of(metric: &MetricField) -> (f64, usize) {
    let one = Field::constant(metric.chart(), 1.0);
    integrate_unmasked(&one, metric)
}

fn finish(ct: &ConformalTensors, form: WillmoreForm, e: Vec<Field>, term_scale: f64) -> WillmoreResidual {
    let sq: Vec<(f64, &Field, &Field)> = e.iter().map(|f| (1.0, f, f)).collect();
    let density = if sq.is_empty() { Field::zeros(ct.chart()) } else { Field::sum_products(&sq) };
    let (l2sq, _) = integrate_unmasked(&density, &ct.frame_metric);
    let linf = e.iter().map(Field::max_abs).fold(0.0, f64::max);
    WillmoreResidual { form, e, l2: l2sq.max(0.0).sqrt(), linf, term_scale }
}

pub fn willmore_residual(ct: &ConformalTensors, form: WillmoreForm) -> Result<WillmoreResidual> {
    let m = ct.m;
    let mf = m as f64;
    let ginv = ct.frame_metric.inverse_comps();
    let a = ct.a.comps();
    let mut e = Vec::with_capacity(ct.rank);
    let mut scale: f64 = 0.0;
    match form {
        WillmoreForm::Reduced => {
            let dc = covariant_derivative(&ct.c, &ct.conn)?;
            let ric = &ct.curvature.ricci;
            let mix: Vec<Field> = (0..m * m).map(|k| Field::sum_scaled(&[(1.0 / (mf - 1.0), &ric[k]), (-1.0, &a[k])])).collect();
            for al in 0..ct.rank {
                let dcs: Vec<Field> = (0..m * m).map(|ij| dc.get(&[al, ij / m, ij % m]).clone()).collect();
                let div = ct.frame_metric.trace(&dcs);
                let rb = pair(ginv, &mix, &b_matrix(ct, al), m);
                scale = scale.max(div.max_abs()).max(rb.max_abs());
                e.push((&div + &rb).scale(ct.normal_signs[al]));
            }
        }
        WillmoreForm::Hessian => {
            let chart = ct.chart();
            let st = chart.stencil();
            if st.backend == Backend::FiniteDifference && st.order < 6 {
                return Err(Error::TaskFailed(format!(
                    "hessian form needs stencil order 6 with finite differences, got {}",
                    st.order
                )));
            }
            let db = covariant_derivative(&ct.b, &ct.conn)?;
            let ddb = covariant_derivative(&db, &ct.conn)?;
            let bs: Vec<Vec<Field>> = (0..ct.rank).map(|g| b_matrix(ct, g)).collect();
            let gb: Vec<Vec<Field>> = bs.iter().map(|b| mat_mul(ginv, b, m)).collect();
            let mut gg: Vec<Field> = Vec::with_capacity(m.pow(4));
            for i in 0..m {
                for j in 0..m {
                    for k in 0..m {
                        for l in 0..m {
                            gg.push(ct.frame_metric.inv(i, k) * ct.frame_metric.inv(j, l));
                        }
                    }
                }
            }
            for al in 0..ct.rank {
                let terms: Vec<(f64, &Field, &Field)> = gg
                    .iter()
                    .enumerate()
                    .map(|(q, w)| {
                        let (i, j, k, l) = (q / (m * m * m), (q / (m * m)) % m, (q / m) % m, q % m);
                        (1.0, w, ddb.get(&[al, i, j, k, l]))
                    })
                    .collect();
                let hess = Field::sum_products(&terms);
                let ab = pair(ginv, a, &bs[al], m);
                let mut cubic: Option<Field> = None;
                for g in 0..ct.rank {
                    let t = trace(&mat_mul(&mat_mul(&gb[al], &gb[g], m), &gb[g], m), m).scale(ct.normal_signs[g]);
                    cubic = Some(match cubic {
                        Some(x) => &x + &t,
                        None => t,
                    });
                }
                let cubic = cubic.expect("rank > 0");
                scale = scale.max(hess.max_abs()).max(ab.max_abs()).max(cubic.max_abs());
                e.push(Field::sum_scaled(&[(1.0, &hess), (1.0, &ab), (1.0, &cubic)]).scale(ct.normal_signs[al]));
            }
        }
    }
    Ok(finish(ct, form, e, scale))
}

/// `max |E_hessian − (1−m) E_reduced|` over unmasked nodes.
pub fn residual_crosscheck(ct: &ConformalTensors) -> Result<f64> {
    let r = willmore_residual(ct, WillmoreForm::Reduced)?;
    let h = willmore_residual(ct, WillmoreForm::Hessian)?;
    let k = 1.0 - ct.m as f64;
    Ok(r.e.iter().zip(&h.e).map(|(a, b)| (b - &a.scale(k)).max_abs()).fold(0.0, f64::max))
}

/// Two-level refinement of a sup-norm residual.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub coarse: f64,
    pub fine: f64,
    /// `h_coarse / h_fine`
    pub ratio: f64,
    /// Stencil order assumed for the extrapolation.
    pub order: f64,
    /// `log(coarse / fine) / log(ratio)`, `None` when either sits at the roundoff floor.
    pub observed_order: Option<f64>,
    pub extrapolated: f64,
    pub noise_floor: f64,
}

impl Refinement {
    /// `roundoff` is the absolute floor below which values are treated as noise.
    pub fn new(coarse: f64, fine: f64, ratio: f64, order: f64, roundoff: f64) -> Self {
        let extrapolated = fine - (coarse - fine) / (ratio.powf(order) - 1.0);
        let noise_floor = (fine - extrapolated).abs() + roundoff;
        let observed_order = (fine > roundoff && coarse > roundoff).then(|| (coarse / fine).ln() / ratio.ln());
        Self { coarse, fine, ratio, order, observed_order, extrapolated, noise_floor }
    }

    /// The limit is indistinguishable from zero.
    pub fn vanishes(&self) -> bool {
        self.extrapolated.abs() <= 10.0 * self.noise_floor
    }

    /// The residual stays at least ten noise floors away from zero.
    pub fn bounded_away(&self) -> bool {
        self.fine >= 10.0 * self.noise_floor && self.extrapolated.abs() >= 10.0 * self.noise_floor
    }
}

/// Absolute roundoff floor for a residual built from terms of size `term_scale`.
pub fn roundoff_floor(term_scale: f64) -> f64 {
    1e-11 * term_scale.max(1.0)
}

/// Smooth compactly supported profile `exp(−1/(1−ρ²))` on an ellipse in
/// parameter space, times a direction.
#[derive(Clone, Debug, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: Vec<f64>,
    pub amplitude: f64,
    pub direction: BumpDirection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BumpDirection {
    /// Unit normal `e_α` of the immersion.
    Normal(usize),
    /// Coordinate tangent `u_i`.
    Tangent(usize),
}

/// Profile values below `exp(−1/CUTOFF)` are set to zero.
pub const BUMP_CUTOFF: f64 = 1e-3;

impl Bump {
    pub fn normal(center: Vec<f64>, radius: Vec<f64>, alpha: usize) -> Self {
        Self { center, radius, amplitude: 1.0, direction: BumpDirection::Normal(alpha) }
    }

    /// Seeded bump inside the grid, keeping `margin` nodes from open boundaries.
    pub fn random(imm: &Immersion, rank: usize, margin: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = &imm.grid;
        let mut center = Vec::with_capacity(g.m());
        let mut radius = Vec::with_capacity(g.m());
        for k in 0..g.m() {
            let ax = g.axis(k);
            let len = ax.hi - ax.lo;
            let r = len * rng.gen_range(0.15..0.3);
            let pad = if ax.periodic { 0.0 } else { r + (margin + 1) as f64 * ax.spacing() };
            center.push(rng.gen_range(ax.lo + pad..ax.hi - pad));
            radius.push(r);
        }
        let alpha = rng.gen_range(0..rank.max(1));
        Self { center, radius, amplitude: 1.0, direction: BumpDirection::Normal(alpha) }
    }

    pub fn describe(&self) -> String {
        let dir = match self.direction {
            BumpDirection::Normal(a) => format!("normal {a}"),
            BumpDirection::Tangent(i) => format!("tangent {i}"),
        };
        format!("center {:?} radius {:?} amplitude {} {dir}", self.center, self.radius, self.amplitude)
    }

    /// Profile as a jet field.
    pub fn profile(&self, chart: &Arc<Chart>) -> Field {
        let c = self.center.clone();
        let r = self.radius.clone();
        let g = chart.grid().clone();
        let amp = self.amplitude;
        let periods: Vec<Option<f64>> = (0..g.m()).map(|k| g.axis(k).periodic.then(|| g.axis(k).hi - g.axis(k).lo)).collect();
        let f = move |x: &[Jet]| -> Vec<Jet> {
            let l = x[0].layout();
            let d = x[0].deg();
            let mut rho2 = Jet::constant(l, d, 0.0);
            for k in 0..x.len() {
                let mut shift = -c[k];
                if let Some(p) = periods[k] {
                    // nearest periodic image of the centre
                    let v = x[k].value() - c[k];
                    shift -= p * (v / p).round();
                }
                let z = x[k].add_scalar(shift).scale(1.0 / r[k]);
                rho2 = &rho2 + &(&z * &z);
            }
            let gap = rho2.scale(-1.0).add_scalar(1.0);
            if gap.value() < BUMP_CUTOFF {
                return vec![Jet::constant(l, d, 0.0)];
            }
            vec![gap.recip().scale(-1.0).exp().scale(amp)]
        };
        Field::eval_jets(chart, chart.stencil().field_degree(), 1, &f).remove(0)
    }

    /// Errors if the support comes within `margin` nodes of an open boundary
    /// or overlaps itself across a periodic axis.
    pub fn check_support(&self, chart: &Arc<Chart>, margin: usize) -> Result<()> {
        let g = chart.grid();
        for k in 0..g.m() {
            let ax = g.axis(k);
            let (lo, hi) = (self.center[k] - self.radius[k], self.center[k] + self.radius[k]);
            if ax.periodic {
                if 2.0 * self.radius[k] >= ax.hi - ax.lo {
                    return Err(Error::TaskFailed(format!("bump wraps around periodic axis {k}")));
                }
            } else {
                let pad = margin as f64 * ax.spacing();
                if lo < ax.lo + pad || hi > ax.hi - pad {
                    return Err(Error::TaskFailed(format!("bump support touches boundary of axis {k}")));
                }
            }
        }
        Ok(())
    }
}

/// Centered difference of `W` against the first-variation integral.
#[derive(Clone, Debug)]
pub struct VariationReport {
    /// Richardson combination of the centered differences at `t` and `t/2`.
    pub fd_derivative: f64,
    /// Centered difference at `t` alone.
    pub fd_coarse: f64,
    pub formula_value: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    /// Quadrature uncertainty of both sides, from step-`2h` sublattice sums.
    pub noise_floor: f64,
    pub t_step: f64,
    pub bump: Bump,
    pub volume: f64,
}

impl VariationReport {
    /// Relative agreement within `rel_tol`, or both sides within the noise floor.
    pub fn agrees(&self, rel_tol: f64) -> bool {
        self.rel_error <= rel_tol || (self.fd_derivative.abs() <= self.noise_floor && self.formula_value.abs() <= self.noise_floor)
    }
}

/// Weighted per-node integrand `density |det g|^{1/2} w_n`, NaN where masked.
fn quadrature_terms(density: &Field, metric: &MetricField) -> Vec<f64> {
    let grid = metric.chart().grid();
    let d = density.values();
    let det = metric.det().values();
    (0..grid.node_count()).map(|n| d[n] * det[n].abs().sqrt() * grid.quadrature_weight(n)).collect()
}

fn total(terms: &[f64]) -> f64 {
    let t: Vec<f64> = terms.iter().map(|x| if x.is_nan() { 0.0 } else { *x }).collect();
    crate::calculus::tensor::pairwise_sum(&t)
}

/// Largest deviation of the `2^m` parity-sublattice sums from the full sum.
/// Valid for integrands vanishing near open boundaries.
fn sublattice_spread(terms: &[f64], chart: &Chart) -> f64 {
    let grid = chart.grid();
    let m = grid.m();
    let full = total(terms);
    let mut parts = vec![Vec::new(); 1 << m];
    for (n, &x) in terms.iter().enumerate() {
        let p = grid.multi_index(n).iter().enumerate().fold(0, |acc, (k, i)| acc | ((i & 1) << k));
        parts[p].push(x);
    }
    let scale = (1u64 << m) as f64;
    parts.iter().map(|p| (scale * total(p) - full).abs()).fold(0.0, f64::max)
}

struct Perturbed {
    terms: Vec<f64>,
    y: Vec<Field>,
}

fn perturbed(imm: &Immersion, u: &[Field], dir: &[Field], phi: &Field, t: f64) -> Result<Perturbed> {
    let sf = imm.spaceform;
    let sig = sf.ambient_signature();
    let mut ut: Vec<Field> = u.iter().zip(dir).map(|(a, d)| a + &(d * phi).scale(t)).collect();
    if sf.kind != SpaceKind::Flat {
        let eps = sf.epsilon();
        let q = dot(sig, &ut, &ut).scale(eps);
        let r = q.sqrt().recip();
        ut = ut.iter().map(|c| c * &r).collect();
    }
    let iso = Isometric::from_fields(sf, ut)?;
    let cf = conformal_factor(&iso)?;
    let e2t = cf.e2tau();
    let metric = MetricField::new(iso.tangent.metric.comps().iter().map(|c| c * &e2t).collect());
    let terms = quadrature_terms(&Field::constant(iso.chart(), 1.0), &metric);
    let masked = terms.iter().filter(|x| x.is_nan()).count();
    if masked > 0 {
        return Err(Error::TaskFailed(format!("{masked} non-regular node(s) in perturbed immersion")));
    }
    let et = cf.tau.exp();
    let y = lift_fields(sf, &iso.u).values.iter().map(|c| c * &et).collect();
    Ok(Perturbed { terms, y })
}

/// Compares `(W(t) − W(−t))/(2t)` (Richardson-refined) with
/// `m²/(m−1) ∫ v^α E_α dM` where `v^α = ε_α <∂_t Y, ξ_α>` and `E` is the
/// Hessian form.
pub fn first_variation_check(imm: &Immersion, chart: &Arc<Chart>, bump: &Bump, t_step: f64) -> Result<VariationReport> {
    let margin = chart.stencil().order / 2;
    bump.check_support(chart, margin)?;
    let iso = Isometric::compute(imm, chart)?;
    let m = iso.m();
    let mf = m as f64;
    let cf = conformal_factor(&iso)?;
    let phi = bump.profile(chart);
    let pv = phi.values();
    if cf.regular.iter().zip(&pv).any(|(&r, &p)| !r && p != 0.0) {
        return Err(Error::TaskFailed("non-regular nodes inside bump support".into()));
    }
    let dir: Vec<Field> = match bump.direction {
        BumpDirection::Normal(a) => iso
            .normal
            .e
            .get(a)
            .ok_or_else(|| Error::Config(format!("normal index {a} out of range")))?
            .clone(),
        BumpDirection::Tangent(i) => iso
            .tangent
            .u_i
            .get(i)
            .ok_or_else(|| Error::Config(format!("tangent index {i} out of range")))?
            .clone(),
    };
    let ct = invariants_extrinsic(&iso, &cf)?;
    let frame = canonical_frame(&iso, &cf)?;
    let (volume, _) = conformal_volume(&ct);
    let w = willmore_residual(&ct, WillmoreForm::Hessian)?;
    let diff = |t: f64| -> Result<(Vec<f64>, Vec<Field>)> {
        let p = perturbed(imm, &iso.u, &dir, &phi, t)?;
        let q = perturbed(imm, &iso.u, &dir, &phi, -t)?;
        let dy: Vec<Field> = p.y.iter().zip(&q.y).map(|(a, b)| (a - b).scale(0.5 / t)).collect();
        let dw: Vec<f64> = p.terms.iter().zip(&q.terms).map(|(a, b)| (a - b) / (2.0 * t)).collect();
        Ok((dw, dy))
    };
    let (d1, _) = diff(t_step)?;
    let (d2, dy) = diff(0.5 * t_step)?;
    let rich: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
    let fd = total(&rich);
    let sig = frame.signature;
    let mut terms: Vec<Field> = Vec::with_capacity(ct.rank);
    for al in 0..ct.rank {
        let v = dot(sig, &dy, &frame.xi[al]).scale(frame.xi_signs[al]);
        terms.push(&v * &w.e[al]);
    }
    let refs: Vec<(f64, &Field)> = terms.iter().map(|f| (1.0, f)).collect();
    let density = if refs.is_empty() { Field::zeros(chart) } else { Field::sum_scaled(&refs) };
    let k = mf * mf / (mf - 1.0);
    let fterms: Vec<f64> = quadrature_terms(&density.masked(&cf.mask()), &ct.frame_metric).iter().map(|x| k * x).collect();
    let formula = total(&fterms);
    let noise_floor = sublattice_spread(&rich, chart) + sublattice_spread(&fterms, chart) + 1e-12 * volume.abs();
    let abs_error = (fd - formula).abs();
    let rel_error = if fd != 0.0 { abs_error / fd.abs() } else if abs_error == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(VariationReport {
        fd_derivative: fd,
        fd_coarse: total(&d1),
        formula_value: formula,
        abs_error,
        rel_error,
        noise_floor,
        t_step,
        bump: bump.clone(),
        volume,
    })
}

/// Default step: `1e-3` times the largest Euclidean norm of the immersion.
pub fn default_t_step(u: &[Field]) -> f64 {
    let q = crate::spaceform::euclid_dot(u, u).max_abs().sqrt();
    1e-3 * q.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{Slot, StencilConfig, TensorField};
    use crate::catalog::{catalog, CatalogParams};
    use crate::conformal::{canonical_frame_from_lift, invariants_frame, match_normal_orientation, ConformalFactor};
    use crate::indefinite::random_pseudo_orthogonal;
    use crate::spaceform::{apply_conformal, lift};
    use proptest::prelude::*;

    fn tensors(name: &str, n: usize, stencil: StencilConfig) -> (Isometric, ConformalFactor, ConformalTensors) {
        let imm = catalog(name, &CatalogParams::default()).unwrap().with_count(n);
        let c = imm.chart(stencil).unwrap();
        let iso = Isometric::compute(&imm, &c).unwrap();
        let cf = conformal_factor(&iso).unwrap();
        let ct = invariants_extrinsic(&iso, &cf).unwrap();
        (iso, cf, ct)
    }

    #[test]
    fn stationary_surfaces_are_willmore() {
        for name in ["catenoid", "helicoid", "enneper", "clifford_torus", "spacelike_catenoid"] {
            let (_, _, ct) = tensors(name, 32, StencilConfig::default());
            let r = willmore_residual(&ct, WillmoreForm::Reduced).unwrap();
            assert!(r.linf < 1e-12, "{name}: {}", r.linf);
        }
    }

    #[test]
    fn torus_product_is_not_willmore() {
        let (_, _, ct) = tensors("torus_product", 32, StencilConfig::default());
        let r = willmore_residual(&ct, WillmoreForm::Reduced).unwrap();
        assert!(r.linf > 1e-2);
        let ref_ = Refinement::new(r.linf, r.linf, 2.0, 6.0, roundoff_floor(r.term_scale));
        assert!(ref_.bounded_away() && !ref_.vanishes());
    }

    #[test]
    fn hessian_form_is_one_minus_m_times_reduced() {
        for name in ["graph", "torus_product", "lorentz_cylinder"] {
            let (_, _, ct) = tensors(name, 32, StencilConfig::default());
            assert!(residual_crosscheck(&ct).unwrap() < 1e-12, "{name}");
        }
    }

    #[test]
    fn hessian_form_refuses_low_order_differences() {
        let (_, _, ct) = tensors("torus_product", 32, StencilConfig::finite_difference(4).unwrap());
        assert!(willmore_residual(&ct, WillmoreForm::Hessian).is_err());
        assert!(willmore_residual(&ct, WillmoreForm::Reduced).is_ok());
    }

    #[test]
    fn minimal_surface_terms() {
        // A·B and div C both reduce to e^{-3τ} h·(dτ dτ − ∇²τ), R·B vanishes
        for name in ["catenoid", "enneper"] {
            let (iso, cf, ct) = tensors(name, 32, StencilConfig::default());
            let m = 2;
            let grad: Vec<Field> = (0..m).map(|i| cf.tau.partial(i)).collect();
            let hess = covariant_derivative(
                &TensorField::new(vec![Slot::CovariantTangent], vec![m], grad.clone()).unwrap(),
                &iso.tangent.conn,
            )
            .unwrap();
            let q: Vec<Field> = (0..m * m).map(|ij| &(&grad[ij / m] * &grad[ij % m]) - hess.get(&[ij / m, ij % m])).collect();
            let h: Vec<Field> = (0..m * m).map(|ij| iso.second.h(0, ij / m, ij % m).clone()).collect();
            let closed = &pair(iso.tangent.metric.inverse_comps(), &h, &q, m) * &(&cf.tau * -3.0).exp();
            let ginv = ct.frame_metric.inverse_comps();
            let b = b_matrix(&ct, 0);
            let ab = pair(ginv, ct.a.comps(), &b, m);
            let rb = pair(ginv, &ct.curvature.ricci, &b, m);
            let dc = covariant_derivative(&ct.c, &ct.conn).unwrap();
            let dcs: Vec<Field> = (0..m * m).map(|ij| dc.get(&[0, ij / m, ij % m]).clone()).collect();
            let div = ct.frame_metric.trace(&dcs);
            let s = closed.max_abs();
            assert!(s > 1e-3);
            assert!((&ab - &closed).max_abs() < 1e-12 * s, "{name}");
            assert!((&div - &closed).max_abs() < 1e-12 * s, "{name}");
            assert!(rb.max_abs() < 1e-12 * s, "{name}");
        }
    }

    #[test]
    fn residual_is_moebius_invariant() {
        let imm = catalog("torus_product", &CatalogParams::default()).unwrap().with_count(24);
        let c = imm.chart(StencilConfig::analytic(6, 8).unwrap()).unwrap();
        let iso = Isometric::compute(&imm, &c).unwrap();
        let cf = conformal_factor(&iso).unwrap();
        let ext = invariants_extrinsic(&iso, &cf).unwrap();
        let e0 = willmore_residual(&ext, WillmoreForm::Reduced).unwrap();
        let y = lift(&imm, &c).unwrap();
        let t = random_pseudo_orthogonal(y.signature, 11);
        let yt = apply_conformal(&t, &y).unwrap().euclid_normalized();
        let (cft, fr) = canonical_frame_from_lift(&yt, 1).unwrap();
        let ct = match_normal_orientation(&ext, &invariants_frame(&fr, &cft).unwrap());
        let e1 = willmore_residual(&ct, WillmoreForm::Reduced).unwrap();
        let d = (&e0.e[0] - &e1.e[0]).max_abs();
        assert!(d < 1e-9 * e0.linf, "{d:e}");
        assert!((conformal_volume(&ext).0 - conformal_volume(&ct).0).abs() < 1e-9 * conformal_volume(&ext).0);
    }

    #[test]
    fn first_variation_matches_difference_quotient() {
        let imm = catalog("torus_product", &CatalogParams::default()).unwrap().with_count(64);
        let c = imm.chart(StencilConfig::analytic(6, 5).unwrap()).unwrap();
        for seed in 0..3 {
            let b = Bump::random(&imm, 1, 3, seed);
            let v = first_variation_check(&imm, &c, &b, 1e-3).unwrap();
            assert!(v.rel_error < 0.05, "seed {seed}: {v:?}");
        }
        let mut b = Bump::random(&imm, 1, 3, 0);
        let n = first_variation_check(&imm, &c, &b, 1e-3).unwrap();
        b.direction = BumpDirection::Tangent(0);
        let t = first_variation_check(&imm, &c, &b, 1e-3).unwrap();
        assert!(t.formula_value.abs() < 1e-12);
        assert!(t.fd_derivative.abs() < 0.01 * n.fd_derivative.abs());
    }

    #[test]
    fn stationary_surface_variation_is_noise() {
        let imm = catalog("catenoid", &CatalogParams::default()).unwrap().with_count(64);
        let c = imm.chart(StencilConfig::analytic(6, 5).unwrap()).unwrap();
        let v = first_variation_check(&imm, &c, &Bump::random(&imm, 1, 3, 2), 1e-3).unwrap();
        assert!(v.formula_value.abs() < 1e-12);
        assert!(v.fd_derivative.abs() <= v.noise_floor && v.agrees(0.05), "{v:?}");
    }

    #[test]
    fn bump_touching_boundary_is_rejected() {
        let imm = catalog("catenoid", &CatalogParams::default()).unwrap().with_count(32);
        let c = imm.chart(StencilConfig::analytic(6, 5).unwrap()).unwrap();
        let b = Bump::normal(vec![0.9, 0.0], vec![0.5, 1.0], 0);
        assert!(matches!(first_variation_check(&imm, &c, &b, 1e-3), Err(Error::TaskFailed(_))));
        let b = Bump::normal(vec![0.0, 0.0], vec![0.5, 3.5], 0);
        assert!(first_variation_check(&imm, &c, &b, 1e-3).is_err());
    }

    #[test]
    fn seeded_bumps_are_reproducible() {
        let imm = catalog("catenoid", &CatalogParams::default()).unwrap();
        assert_eq!(Bump::random(&imm, 1, 3, 5), Bump::random(&imm, 1, 3, 5));
        assert_ne!(Bump::random(&imm, 1, 3, 5), Bump::random(&imm, 1, 3, 6));
        let c = imm.chart(StencilConfig::default()).unwrap();
        for s in 0..20 {
            assert!(Bump::random(&imm, 1, 3, s).check_support(&c, 3).is_ok());
        }
    }

    proptest! {
        #[test]
        fn pure_power_law_extrapolates_to_zero(c in 1e-6f64..1e2, p in 2.0f64..7.0, h in 1e-3f64..0.1) {
            let r = Refinement::new(c * (2.0 * h).powf(p), c * h.powf(p), 2.0, p, 1e-300);
            prop_assert!(r.extrapolated.abs() <= 1e-9 * r.coarse);
            prop_assert!(r.vanishes());
            prop_assert!((r.observed_order.unwrap() - p).abs() < 1e-9);
        }

        #[test]
        fn offset_power_law_stays_away(e0 in 0.1f64..10.0, c in 1e-6f64..1e-2, h in 1e-3f64..0.05) {
            let r = Refinement::new(e0 + c * (2.0 * h).powi(6), e0 + c * h.powi(6), 2.0, 6.0, 1e-12);
            prop_assert!((r.extrapolated - e0).abs() < 1e-9 * e0);
            prop_assert!(r.bounded_away());
        }
    }
}
