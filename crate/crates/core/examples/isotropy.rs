//! Conformal isotropy: fitted λ, deviations and the sign of ⟨c,c⟩.

use confsub::calculus::StencilConfig;
use confsub::catalog::{catalog, CatalogParams};
use confsub::conformal::{canonical_frame, conformal_factor, invariants_extrinsic};
use confsub::isometric::Isometric;
use confsub::isotropy::classify_isotropy;

fn main() -> confsub::Result<()> {
    for name in ["clifford_torus", "catenoid", "enneper", "torus_product"] {
        let imm = catalog(name, &CatalogParams::default())?;
        let chart = imm.chart(StencilConfig::analytic(6, 4)?)?;
        let iso = Isometric::compute(&imm, &chart)?;
        let cf = conformal_factor(&iso)?;
        let ct = invariants_extrinsic(&iso, &cf)?;
        let frame = canonical_frame(&iso, &cf)?;
        let r = classify_isotropy(&ct, &frame, None);
        print!("{name:<16} lambda {:+.6} dev_A {:.2e} dev_C {:.2e}", r.lambda_mean, r.dev_a, r.dev_c);
        if let Some(c2) = r.c_norm2 {
            print!(" <c,c> {c2:+.8}");
        }
        println!(" -> {}", r.verdict.name());
    }
    Ok(())
}
