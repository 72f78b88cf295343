//! Every catalog surface: isometric quantities, Gauss check and regularity.

use confsub::calculus::StencilConfig;
use confsub::catalog::{catalog, describe, CatalogParams, NAMES};
use confsub::conformal::conformal_factor;
use confsub::isometric::Isometric;

fn main() -> confsub::Result<()> {
    let stencil = StencilConfig::analytic(6, 4)?;
    println!("{:<20} {:>5} {:>12} {:>10} {:>6}  description", "surface", "rank", "gauss", "regular", "sigma");
    for name in NAMES {
        let imm = catalog(name, &CatalogParams::default())?;
        let chart = imm.chart(stencil)?;
        let iso = Isometric::compute(&imm, &chart)?;
        let (regular, sigma) = match conformal_factor(&iso) {
            Ok(cf) => (
                format!("{}/{}", cf.regular_count(), chart.nodes()),
                cf.sigma().map_or("mixed".into(), |s| format!("{s:+}")),
            ),
            Err(_) => ("none".into(), "-".into()),
        };
        println!(
            "{:<20} {:>5} {:>12.3e} {:>10} {:>6}  {}",
            name,
            iso.normal.e.len(),
            iso.gauss.residual,
            regular,
            sigma,
            describe(name)
        );
    }
    Ok(())
}
