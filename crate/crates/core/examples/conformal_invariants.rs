//! Conformal metric, A, B, C on a catenoid by both computational paths,
//! with the identity and integrability residuals.

use confsub::calculus::StencilConfig;
use confsub::catalog::{catalog, CatalogParams};
use confsub::conformal::{
    canonical_frame, compare_paths, conformal_factor, identity_suite, integrability_suite, invariants_extrinsic,
    invariants_frame,
};
use confsub::isometric::Isometric;
use confsub::willmore::conformal_volume;

fn main() -> confsub::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "catenoid".into());
    let imm = catalog(&name, &CatalogParams::default())?.with_count(96);
    let chart = imm.chart(StencilConfig::analytic(6, 4)?)?;
    let iso = Isometric::compute(&imm, &chart)?;
    let cf = conformal_factor(&iso)?;
    let ext = invariants_extrinsic(&iso, &cf)?;
    let frame = canonical_frame(&iso, &cf)?;
    let frm = invariants_frame(&frame, &cf)?;

    let (vol, _) = conformal_volume(&ext);
    println!("{name}: conformal volume {vol:.10}");
    println!("kappa_conf at node 0: {:.6}", ext.kappa_conf.values()[0]);
    println!("A_00, A_01, A_11 at node 0: {:.6} {:.6} {:.6}", ext.a(0, 0).values()[0], ext.a(0, 1).values()[0], ext.a(1, 1).values()[0]);

    println!("identities:");
    for r in identity_suite(&ext, Some(&frame))?.residuals {
        println!("  {:<24} {:.3e}", r.name, r.linf);
    }
    let cmp = compare_paths(&ext, &frm);
    println!("dual path: A {:.3e}  B {:.3e}  C {:.3e}", cmp.a, cmp.b, cmp.c);
    println!("integrability (frame path):");
    for r in integrability_suite(&frm)? {
        println!("  {:<24} {:.3e}", r.name, r.linf);
    }
    Ok(())
}
