//! Finite differences against analytic jets: Gauss residual and the
//! conformal metric error as the grid is refined.

use confsub::calculus::{Field, StencilConfig};
use confsub::catalog::{catalog, CatalogParams};
use confsub::conformal::{conformal_factor, invariants_extrinsic};
use confsub::isometric::Isometric;

fn main() -> confsub::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "clifford_torus".into());
    for order in [2, 4, 6] {
        let mut prev: Option<f64> = None;
        for n in [32, 64, 128] {
            let imm = catalog(&name, &CatalogParams::default())?.with_count(n);
            let exact = {
                let c = imm.chart(StencilConfig::analytic(6, 4)?)?;
                let iso = Isometric::compute(&imm, &c)?;
                invariants_extrinsic(&iso, &conformal_factor(&iso)?)?.metric
            };
            let c = imm.chart(StencilConfig::finite_difference(order)?)?;
            let iso = Isometric::compute(&imm, &c)?;
            let g = invariants_extrinsic(&iso, &conformal_factor(&iso)?)?.metric;
            let err = exact.comps().iter().zip(g.comps()).map(|(a, b)| (a - b).max_abs()).fold(0.0, f64::max)
                / exact.comps().iter().map(Field::max_abs).fold(0.0, f64::max);
            let rate = prev.map_or(String::new(), |p| format!(" rate {:.2}", (p / err).log2()));
            println!("order {order} N {n:>3}: gauss {:.3e} metric {:.3e}{rate}", iso.gauss.residual, err);
            prev = Some(err);
        }
    }
    Ok(())
}
