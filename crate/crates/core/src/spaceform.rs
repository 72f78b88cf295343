//! Space forms, immersions, light-cone lifts and the conformal group action.

use std::sync::Arc;

use crate::calculus::{Chart, Field, MetricField, ParamGrid, StencilConfig};
use crate::error::{Error, Result};
use crate::indefinite::{PseudoOrthogonalMap, Signature};
use crate::jet::Jet;

/// Which model of constant curvature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    Flat,
    Sphere,
    Hyperbolic,
}

/// `R^n_p`, `S^n_p` or `H^n_p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpaceForm {
    pub kind: SpaceKind,
    pub n: usize,
    pub p: usize,
}

impl SpaceForm {
    pub fn new(kind: SpaceKind, n: usize, p: usize) -> Result<Self> {
        if p > n {
            return Err(Error::InvalidSignature(format!("index {p} exceeds dimension {n}")));
        }
        Ok(Self { kind, n, p })
    }

    pub fn flat(n: usize, p: usize) -> Self {
        Self { kind: SpaceKind::Flat, n, p }
    }

    pub fn sphere(n: usize, p: usize) -> Self {
        Self { kind: SpaceKind::Sphere, n, p }
    }

    pub fn hyperbolic(n: usize, p: usize) -> Self {
        Self { kind: SpaceKind::Hyperbolic, n, p }
    }

    /// Sectional curvature `ε`.
    pub fn epsilon(&self) -> f64 {
        match self.kind {
            SpaceKind::Flat => 0.0,
            SpaceKind::Sphere => 1.0,
            SpaceKind::Hyperbolic => -1.0,
        }
    }

    /// Signature of the coordinate space the points live in.
    pub fn ambient_signature(&self) -> Signature {
        let (n, p) = (self.n, self.p);
        match self.kind {
            SpaceKind::Flat => Signature::new(n - p, p),
            SpaceKind::Sphere => Signature::new(n - p + 1, p),
            SpaceKind::Hyperbolic => Signature::new(n - p, p + 1),
        }
    }

    /// Signature of the light-cone space `R^{n+2}_{p+1}`.
    pub fn lift_signature(&self) -> Signature {
        Signature::new(self.n - self.p + 1, self.p + 1)
    }
}

/// Closed-form evaluator in jet arithmetic: parameters to ambient coordinates.
pub type JetEvaluator = Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>;

/// Where the points of an immersion come from.
#[derive(Clone)]
pub enum Source {
    Closed(JetEvaluator),
    Sampled(Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>),
    Fields(Vec<Field>),
}

impl std::fmt::Debug for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::Closed(_) => write!(f, "Closed"),
            Source::Sampled(_) => write!(f, "Sampled"),
            Source::Fields(v) => write!(f, "Fields({})", v.len()),
        }
    }
}

/// A parametrized submanifold patch of a space form.
#[derive(Clone, Debug)]
pub struct Immersion {
    pub name: String,
    pub spaceform: SpaceForm,
    pub grid: ParamGrid,
    pub source: Source,
}

impl Immersion {
    pub fn closed(
        name: &str,
        spaceform: SpaceForm,
        grid: ParamGrid,
        f: impl Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), spaceform, grid, source: Source::Closed(Arc::new(f)) }
    }

    pub fn m(&self) -> usize {
        self.grid.m()
    }

    pub fn with_grid(mut self, grid: ParamGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_count(self, count: usize) -> Self {
        let g = self.grid.with_count(count);
        self.with_grid(g)
    }

    /// Chart for this immersion's grid.
    pub fn chart(&self, stencil: StencilConfig) -> Result<Arc<Chart>> {
        Chart::new(self.grid.clone(), stencil)
    }

    /// Ambient coordinate fields on `chart`.
    pub fn evaluate(&self, chart: &Arc<Chart>) -> Result<Vec<Field>> {
        if chart.grid() != &self.grid {
            return Err(Error::GridIncompatible("chart grid differs from immersion grid".into()));
        }
        let dim = self.spaceform.ambient_signature().dim();
        let u = match &self.source {
            Source::Closed(f) => {
                let d = chart.stencil().field_degree();
                Field::eval_jets(chart, d, dim, f.as_ref())
            }
            Source::Sampled(f) => {
                let g = chart.grid();
                let vals: Vec<Vec<f64>> = (0..chart.nodes()).map(|n| f(&g.coords(n))).collect();
                (0..dim)
                    .map(|k| Field::from_values(chart, vals.iter().map(|v| v[k]).collect()))
                    .collect()
            }
            Source::Fields(v) => v.clone(),
        };
        if u.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: u.len() });
        }
        Ok(u)
    }

    /// Evaluates, checks the space-form constraint and the induced metric.
    pub fn evaluate_checked(&self, chart: &Arc<Chart>) -> Result<Vec<Field>> {
        let u = self.evaluate(chart)?;
        let sig = self.spaceform.ambient_signature();
        if self.spaceform.kind != SpaceKind::Flat {
            let q = dot(sig, &u, &u);
            let r = (&q - self.spaceform.epsilon()).max_abs();
            if r > 1e-10 {
                return Err(Error::NotOnSpaceForm { residual: r });
            }
        }
        let metric = induced_metric(sig, &u);
        let bad = metric.degenerate_nodes();
        if bad == chart.nodes() {
            return Err(Error::DegenerateImmersion { nodes: bad });
        }
        Ok(u)
    }
}

/// `<a, b>` of two ambient vector fields.
pub fn dot(sig: Signature, a: &[Field], b: &[Field]) -> Field {
    let terms: Vec<(f64, &Field, &Field)> = (0..a.len()).map(|k| (sig.sign(k), &a[k], &b[k])).collect();
    Field::sum_products(&terms)
}

/// Euclidean `sum a_k b_k`.
pub fn euclid_dot(a: &[Field], b: &[Field]) -> Field {
    let terms: Vec<(f64, &Field, &Field)> = (0..a.len()).map(|k| (1.0, &a[k], &b[k])).collect();
    Field::sum_products(&terms)
}

/// Partial derivatives `∂_i x` of an ambient vector field.
pub fn tangents(x: &[Field], m: usize) -> Vec<Vec<Field>> {
    (0..m).map(|i| x.iter().map(|c| c.partial(i)).collect()).collect()
}

/// Metric `<∂_i x, ∂_j x>` of a vector field.
pub fn induced_metric(sig: Signature, x: &[Field]) -> MetricField {
    let m = x[0].chart().m();
    let dx = tangents(x, m);
    metric_of(sig, &dx)
}

pub(crate) fn metric_of(sig: Signature, dx: &[Vec<Field>]) -> MetricField {
    let m = dx.len();
    let mut g: Vec<Option<Field>> = vec![None; m * m];
    for i in 0..m {
        for j in i..m {
            let f = dot(sig, &dx[i], &dx[j]);
            g[j * m + i] = Some(f.clone());
            g[i * m + j] = Some(f);
        }
    }
    MetricField::new(g.into_iter().map(Option::unwrap).collect())
}

/// Null representative `y` of an immersion in the light cone.
#[derive(Clone, Debug)]
pub struct LightConeLift {
    pub signature: Signature,
    pub values: Vec<Field>,
}

impl LightConeLift {
    pub fn chart(&self) -> &Arc<Chart> {
        self.values[0].chart()
    }

    /// Largest `|<y,y>| / |y|^2` over unmasked nodes.
    pub fn null_residual(&self) -> f64 {
        let q = dot(self.signature, &self.values, &self.values).values();
        let e = euclid_dot(&self.values, &self.values).values();
        q.iter()
            .zip(&e)
            .filter(|(a, _)| !a.is_nan())
            .map(|(a, b)| a.abs() / b)
            .fold(0.0, f64::max)
    }

    /// `f y` for a positive (or signed) scalar field `f`.
    pub fn rescaled(&self, f: &Field) -> Self {
        Self { signature: self.signature, values: self.values.iter().map(|y| y * f).collect() }
    }

    /// `y / |y|_euclid`.
    pub fn euclid_normalized(&self) -> Self {
        let n = euclid_dot(&self.values, &self.values).sqrt().recip();
        self.rescaled(&n)
    }

    pub fn induced_metric(&self) -> MetricField {
        induced_metric(self.signature, &self.values)
    }
}

/// Light-cone lift of ambient coordinate fields.
pub fn lift_fields(sf: SpaceForm, u: &[Field]) -> LightConeLift {
    let chart = u[0].chart().clone();
    let one = Field::constant(&chart, 1.0);
    let values = match sf.kind {
        SpaceKind::Flat => {
            let q = dot(sf.ambient_signature(), u, u);
            let mut v = vec![(&q - 1.0).scale(0.5)];
            v.extend(u.iter().cloned());
            v.push((&q + 1.0).scale(0.5));
            v
        }
        SpaceKind::Sphere => {
            let mut v: Vec<Field> = u.to_vec();
            v.push(one);
            v
        }
        SpaceKind::Hyperbolic => {
            let mut v = vec![one];
            v.extend(u.iter().cloned());
            v
        }
    };
    LightConeLift { signature: sf.lift_signature(), values }
}

/// Evaluates an immersion and lifts it.
pub fn lift(imm: &Immersion, chart: &Arc<Chart>) -> Result<LightConeLift> {
    Ok(lift_fields(imm.spaceform, &imm.evaluate(chart)?))
}

/// Row-vector action `y T` at every node.
pub fn apply_conformal(t: &PseudoOrthogonalMap, lift: &LightConeLift) -> Result<LightConeLift> {
    if t.signature() != lift.signature {
        return Err(Error::InvalidSignature(format!(
            "map signature {} differs from lift signature {}",
            t.signature(),
            lift.signature
        )));
    }
    let n = lift.signature.dim();
    let m = t.matrix();
    let values = (0..n)
        .map(|j| {
            let terms: Vec<(f64, &Field)> = (0..n).map(|i| (m[(i, j)], &lift.values[i])).collect();
            Field::sum_scaled(&terms)
        })
        .collect();
    Ok(LightConeLift { signature: lift.signature, values })
}

/// Projects a lift into the chart of `target`, returning ambient coordinate fields.
pub fn dehomogenize(lift: &LightConeLift, target: SpaceForm) -> Result<Vec<Field>> {
    const TOL: f64 = 1e-12;
    if target.lift_signature() != lift.signature {
        return Err(Error::InvalidSignature(format!(
            "target lift signature {} differs from {}",
            target.lift_signature(),
            lift.signature
        )));
    }
    let y = &lift.values;
    let last = y.len() - 1;
    let denom = match target.kind {
        SpaceKind::Flat => &y[last] - &y[0],
        SpaceKind::Sphere => y[last].clone(),
        SpaceKind::Hyperbolic => y[0].clone(),
    };
    let norm = euclid_dot(y, y).sqrt();
    let dv = denom.values();
    let nv = norm.values();
    let bad: Vec<usize> = (0..dv.len()).filter(|&n| dv[n].abs() <= TOL * nv[n]).collect();
    if !bad.is_empty() {
        return Err(Error::PointAtInfinity { nodes: bad });
    }
    let r = denom.recip();
    let range = match target.kind {
        SpaceKind::Flat => 1..last,
        SpaceKind::Sphere => 0..last,
        SpaceKind::Hyperbolic => 1..last + 1,
    };
    Ok(range.map(|k| &y[k] * &r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::Axis;
    use crate::indefinite::random_pseudo_orthogonal;
    use crate::jet::Jet;

    fn grid() -> ParamGrid {
        ParamGrid::new(vec![Axis::new(-0.7, 0.8, 16, false), Axis::new(-0.5, 0.9, 16, false)]).unwrap()
    }

    fn blob() -> Immersion {
        Immersion::closed("blob", SpaceForm::flat(3, 0), grid(), |x: &[Jet]| {
            let (s, t) = (&x[0], &x[1]);
            vec![s + &(t * t).scale(0.2), t.clone(), (s * t).sin() + s.scale(0.3)]
        })
    }

    fn jets() -> StencilConfig {
        StencilConfig::analytic(6, 4).unwrap()
    }

    #[test]
    fn flat_origin_lift() {
        let c = Chart::new(ParamGrid::new(vec![Axis::new(0.0, 1.0, 13, false); 2]).unwrap(), jets()).unwrap();
        let z = Field::zeros(&c);
        let y = lift_fields(SpaceForm::flat(3, 0), &[z.clone(), z.clone(), z]);
        let v: Vec<f64> = y.values.iter().map(|f| f.value(0)).collect();
        assert_eq!(v, vec![-0.5, 0.0, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn sphere_lift_is_null() {
        let imm = Immersion::closed("s", SpaceForm::sphere(3, 0), grid(), |x: &[Jet]| {
            let (a, b) = (&x[0], &x[1]);
            vec![&a.cos() * &b.cos(), &a.cos() * &b.sin(), &a.sin() * &(b.scale(0.5)).cos(), &a.sin() * &(b.scale(0.5)).sin()]
        });
        let c = imm.chart(jets()).unwrap();
        let y = lift(&imm, &c).unwrap();
        assert!(y.null_residual() < 1e-10);
        assert_eq!(y.values[4].value(7), 1.0);
    }

    #[test]
    fn lift_is_isometric_and_null() {
        let imm = blob();
        let c = imm.chart(jets()).unwrap();
        let u = imm.evaluate_checked(&c).unwrap();
        let y = lift_fields(imm.spaceform, &u);
        assert!(y.null_residual() < 1e-10);
        let gu = induced_metric(imm.spaceform.ambient_signature(), &u);
        let gy = y.induced_metric();
        for k in 0..4 {
            assert!((&gu.comps()[k] - &gy.comps()[k]).max_abs() < 1e-10);
        }
    }

    #[test]
    fn conformal_action_keeps_cone_and_conformal_class() {
        let imm = blob();
        let c = imm.chart(jets()).unwrap();
        let y = lift(&imm, &c).unwrap();
        let t = random_pseudo_orthogonal(y.signature, 4);
        let yt = apply_conformal(&t, &y).unwrap();
        assert!(yt.null_residual() < 1e-10);
        let g0 = y.induced_metric();
        let g1 = yt.induced_metric();
        // pointwise proportionality: g1 = λ g0, rank-one residual of the ratio
        for n in 0..c.nodes() {
            let lam = g1.g(0, 0).value(n) / g0.g(0, 0).value(n);
            for k in 0..4 {
                let r = g1.comps()[k].value(n) - lam * g0.comps()[k].value(n);
                assert!(r.abs() <= 1e-8 * g1.comps()[0].value(n).abs(), "{r}");
            }
        }
        let id = apply_conformal(&PseudoOrthogonalMap::identity(y.signature), &y).unwrap();
        assert_eq!(id.values[2].values(), y.values[2].values());
        let wrong = random_pseudo_orthogonal(Signature::new(3, 3), 1);
        assert!(apply_conformal(&wrong, &y).is_err());
    }

    #[test]
    fn dehomogenize_round_trip_and_stereographic() {
        let imm = blob();
        let c = imm.chart(jets()).unwrap();
        let u = imm.evaluate(&c).unwrap();
        let y = lift_fields(imm.spaceform, &u);
        let back = dehomogenize(&y, imm.spaceform).unwrap();
        for k in 0..3 {
            assert!((&back[k] - &u[k]).max_abs() < 1e-10);
        }
        // plane z = 0 into S^3: inverse stereographic projection
        let plane = Immersion::closed("plane", SpaceForm::flat(3, 0), grid(), |x: &[Jet]| {
            vec![x[0].clone(), x[1].clone(), x[0].scale(0.0)]
        });
        let y = lift(&plane, &c).unwrap();
        let s = dehomogenize(&y, SpaceForm::sphere(3, 0)).unwrap();
        for n in 0..c.nodes() {
            let x = c.grid().coords(n);
            let q = x[0] * x[0] + x[1] * x[1];
            let want = [(q - 1.0) / (q + 1.0), 2.0 * x[0] / (q + 1.0), 2.0 * x[1] / (q + 1.0), 0.0];
            for k in 0..4 {
                assert!((s[k].value(n) - want[k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn point_at_infinity() {
        let c = Chart::new(grid(), jets()).unwrap();
        let one = Field::constant(&c, 1.0);
        let z = Field::zeros(&c);
        let y = LightConeLift {
            signature: Signature::new(4, 1),
            values: vec![one.clone(), z.clone(), z.clone(), z, one],
        };
        match dehomogenize(&y, SpaceForm::flat(3, 0)) {
            Err(Error::PointAtInfinity { nodes }) => assert_eq!(nodes.len(), c.nodes()),
            other => panic!("{other:?}"),
        }
    }
}
