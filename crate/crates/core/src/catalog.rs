//! Closed-form test immersions.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::calculus::{Axis, ParamGrid};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::Jet;
use crate::spaceform::{Immersion, SpaceForm};

/// Names accepted by [`catalog`].
pub const NAMES: &[&str] = &[
    "plane",
    "round_sphere",
    "catenoid",
    "helicoid",
    "enneper",
    "graph",
    "clifford_torus",
    "lorentz_cylinder",
    "spacelike_catenoid",
    "torus_product",
];

/// Numeric parameters plus the graph expression.
#[derive(Clone, Debug, Default)]
pub struct CatalogParams {
    pub values: BTreeMap<String, f64>,
    pub expr: Option<String>,
}

impl CatalogParams {
    pub fn with(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.into(), v);
        self
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        self.values.get(key).copied().unwrap_or(default)
    }
}

/// One-line description of a catalog entry.
pub fn describe(name: &str) -> &'static str {
    match name {
        "plane" => "plane z = 0 in R^3 (totally geodesic, non-regular)",
        "round_sphere" => "round sphere of radius r in R^3 (totally umbilic, non-regular)",
        "catenoid" => "catenoid of neck a in R^3 (minimal)",
        "helicoid" => "helicoid of pitch c in R^3 (minimal)",
        "enneper" => "Enneper surface in R^3 (minimal)",
        "graph" => "graph z = expr(s, t) in R^3 (or R^3_1 with p = 1)",
        "clifford_torus" => "Clifford torus in S^3 (minimal, flat)",
        "lorentz_cylinder" => "time-like cylinder of radius r in R^3_1",
        "spacelike_catenoid" => "space-like catenoid of neck a in R^3_1 (maximal)",
        "torus_product" => "product torus of radii r, sqrt(1 - r^2) in S^3 (not minimal)",
        _ => "",
    }
}

fn open(lo: f64, hi: f64) -> Axis {
    Axis::new(lo, hi, 64, false)
}

fn closed_loop() -> Axis {
    Axis::new(0.0, 2.0 * PI, 64, true)
}

fn grid2(a: Axis, b: Axis) -> ParamGrid {
    ParamGrid::new(vec![a, b]).expect("catalog grid")
}

/// Closed-form immersion by name, on its default domain with 64 nodes per axis.
pub fn catalog(name: &str, params: &CatalogParams) -> Result<Immersion> {
    let bad = |what: &str| Err(Error::Config(format!("{name}: {what}")));
    let imm = match name {
        "plane" => Immersion::closed(name, SpaceForm::flat(3, 0), grid2(open(-1.0, 1.0), open(-1.0, 1.0)), |x: &[Jet]| {
            vec![x[0].clone(), x[1].clone(), x[0].scale(0.0)]
        }),
        "round_sphere" => {
            let r = params.get("r", 1.0);
            if !(r > 0.0) {
                return bad("radius r must be positive");
            }
            Immersion::closed(name, SpaceForm::flat(3, 0), grid2(open(-1.2, 1.2), closed_loop()), move |x: &[Jet]| {
                let (cs, ss) = (x[0].cos(), x[0].sin());
                vec![(&cs * &x[1].cos()).scale(r), (&cs * &x[1].sin()).scale(r), ss.scale(r)]
            })
        }
        "catenoid" => {
            let a = params.get("a", 1.0);
            if !(a > 0.0) {
                return bad("neck a must be positive");
            }
            Immersion::closed(name, SpaceForm::flat(3, 0), grid2(open(-1.0, 1.0), closed_loop()), move |x: &[Jet]| {
                let ch = x[0].cosh();
                vec![(&ch * &x[1].cos()).scale(a), (&ch * &x[1].sin()).scale(a), x[0].scale(a)]
            })
        }
        "helicoid" => {
            let c = params.get("c", 1.0);
            if c == 0.0 {
                return bad("pitch c must be non-zero");
            }
            Immersion::closed(name, SpaceForm::flat(3, 0), grid2(open(-1.0, 1.0), open(-1.5, 1.5)), move |x: &[Jet]| {
                vec![&x[0] * &x[1].cos(), &x[0] * &x[1].sin(), x[1].scale(c)]
            })
        }
        "enneper" => Immersion::closed(name, SpaceForm::flat(3, 0), grid2(open(-1.0, 1.0), open(-1.0, 1.0)), |x: &[Jet]| {
            let (s, t) = (&x[0], &x[1]);
            let (s2, t2) = (s * s, t * t);
            vec![
                &(s - &(&s2 * s).scale(1.0 / 3.0)) + &(s * &t2),
                &(t - &(&t2 * t).scale(1.0 / 3.0)) + &(&s2 * t),
                &s2 - &t2,
            ]
        }),
        "graph" => {
            let src = params.expr.clone().unwrap_or_else(|| "s*t".to_string());
            let e = Expr::parse(&src)?;
            let p = params.get("p", 0.0) as usize;
            if p > 1 {
                return bad("graph index p must be 0 or 1");
            }
            Immersion::closed(name, SpaceForm::flat(3, p), grid2(open(-1.0, 1.0), open(-1.0, 1.0)), move |x: &[Jet]| {
                vec![x[0].clone(), x[1].clone(), e.eval(x)]
            })
        }
        "clifford_torus" => Immersion::closed(name, SpaceForm::sphere(3, 0), grid2(closed_loop(), closed_loop()), |x: &[Jet]| {
            let k = std::f64::consts::FRAC_1_SQRT_2;
            vec![x[0].cos().scale(k), x[0].sin().scale(k), x[1].cos().scale(k), x[1].sin().scale(k)]
        }),
        "lorentz_cylinder" => {
            let r = params.get("r", 1.0);
            if !(r > 0.0) {
                return bad("radius r must be positive");
            }
            Immersion::closed(name, SpaceForm::flat(3, 1), grid2(closed_loop(), open(-1.0, 1.0)), move |x: &[Jet]| {
                vec![x[0].cos().scale(r), x[0].sin().scale(r), x[1].clone()]
            })
        }
        "spacelike_catenoid" => {
            let a = params.get("a", 1.0);
            if !(a > 0.0) {
                return bad("neck a must be positive");
            }
            Immersion::closed(name, SpaceForm::flat(3, 1), grid2(open(0.5, 1.5), closed_loop()), move |x: &[Jet]| {
                let sh = x[0].sinh();
                vec![(&sh * &x[1].cos()).scale(a), (&sh * &x[1].sin()).scale(a), x[0].scale(a)]
            })
        }
        "torus_product" => {
            let r = params.get("r", 0.6);
            if !(r > 0.0 && r < 1.0) {
                return bad("radius r must lie in (0, 1)");
            }
            let big = (1.0 - r * r).sqrt();
            Immersion::closed(name, SpaceForm::sphere(3, 0), grid2(closed_loop(), closed_loop()), move |x: &[Jet]| {
                vec![x[0].cos().scale(r), x[0].sin().scale(r), x[1].cos().scale(big), x[1].sin().scale(big)]
            })
        }
        _ => return Err(Error::UnknownSurface(name.into())),
    };
    Ok(imm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::StencilConfig;

    #[test]
    fn unknown_and_invalid() {
        assert!(matches!(catalog("klein_bottle", &CatalogParams::default()), Err(Error::UnknownSurface(_))));
        let p = CatalogParams::default().with("r", 1.5);
        assert!(catalog("torus_product", &p).is_err());
    }

    #[test]
    fn every_entry_lives_on_its_space_form() {
        for name in NAMES {
            let imm = catalog(name, &CatalogParams::default()).unwrap().with_count(24);
            let c = imm.chart(StencilConfig::analytic(6, 4).unwrap()).unwrap();
            imm.evaluate_checked(&c).unwrap();
        }
    }

    /// Closed-form jets agree with finite differences of sampled values.
    #[test]
    fn jets_match_finite_differences() {
        for name in NAMES {
            let imm = catalog(name, &CatalogParams::default()).unwrap().with_count(64);
            let cj = imm.chart(StencilConfig::analytic(6, 4).unwrap()).unwrap();
            let cf = imm.chart(StencilConfig::finite_difference(6).unwrap()).unwrap();
            let uj = imm.evaluate(&cj).unwrap();
            let sampled = imm.evaluate(&cf).unwrap();
            for (j, s) in uj.iter().zip(&sampled) {
                for path in [vec![0], vec![1], vec![0, 1], vec![0, 0, 1], vec![1, 1, 0, 0]] {
                    let mut a = j.clone();
                    let mut b = s.clone();
                    for &ax in &path {
                        a = a.partial(ax);
                        b = b.partial(ax);
                    }
                    let scale = a.max_abs().max(1.0);
                    let err = (0..cf.nodes())
                        .map(|n| (a.value(n) - b.value(n)).abs())
                        .fold(0.0, f64::max);
                    assert!(err / scale <= 1e-6, "{name} {path:?}: {err:e}");
                }
            }
        }
    }
}
