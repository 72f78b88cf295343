//! The conformal metric survives pseudo-orthogonal maps of the lift and
//! pointwise rescalings of it.

use confsub::calculus::{Backend, Field, MetricField, StencilConfig};
use confsub::catalog::{catalog, CatalogParams};
use confsub::conformal::conformal_metric_of_lift;
use confsub::indefinite::random_pseudo_orthogonal;
use confsub::jet::Jet;
use confsub::spaceform::{apply_conformal, lift};

fn rel(a: &MetricField, b: &MetricField) -> f64 {
    let s = a.comps().iter().map(Field::max_abs).fold(0.0, f64::max);
    a.comps().iter().zip(b.comps()).map(|(x, y)| (x - y).max_abs()).fold(0.0, f64::max) / s
}

fn main() -> confsub::Result<()> {
    for (name, stencil) in [
        ("catenoid", StencilConfig::analytic(6, 4)?),
        ("clifford_torus", StencilConfig::analytic(6, 4)?),
        ("clifford_torus", StencilConfig::finite_difference(6)?),
    ] {
        let n = if stencil.backend == Backend::FiniteDifference { 128 } else { 64 };
        let imm = catalog(name, &CatalogParams::default())?.with_count(n);
        let chart = imm.chart(stencil)?;
        let y = lift(&imm, &chart)?;
        let g = conformal_metric_of_lift(&y)?;
        let mut worst: f64 = 0.0;
        for seed in 0..10 {
            let t = random_pseudo_orthogonal(y.signature, seed);
            let yt = apply_conformal(&t, &y)?.euclid_normalized();
            worst = worst.max(rel(&g, &conformal_metric_of_lift(&yt)?));
        }
        let lam = Field::eval_jets(&chart, chart.stencil().field_degree(), 1, &|x: &[Jet]| {
            vec![(&x[0].sin() + &x[1].cos()).scale(0.2).exp()]
        })
        .remove(0);
        let r = rel(&g, &conformal_metric_of_lift(&y.rescaled(&lam))?);
        println!("{name:<16} {:?}: 10 maps worst {worst:.3e}, rescale {r:.3e}", stencil.backend);
    }
    Ok(())
}
