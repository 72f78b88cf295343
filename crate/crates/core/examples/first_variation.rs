//! Difference quotient of the conformal volume under a compactly supported
//! normal bump against the first variation formula.

use confsub::calculus::StencilConfig;
use confsub::catalog::{catalog, CatalogParams};
use confsub::willmore::{default_t_step, first_variation_check, Bump};

fn main() -> confsub::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(96);
    for name in ["torus_product", "catenoid"] {
        let imm = catalog(name, &CatalogParams::default())?.with_count(n);
        let chart = imm.chart(StencilConfig::analytic(6, 5)?)?;
        let u = imm.evaluate(&chart)?;
        let t = default_t_step(&u);
        for seed in 0..3 {
            let bump = Bump::random(&imm, 1, 3, seed);
            let v = first_variation_check(&imm, &chart, &bump, t)?;
            println!(
                "{name:<14} seed {seed}: fd {:+.6e} formula {:+.6e} rel {:.2e} noise {:.2e} agrees(5%) {}",
                v.fd_derivative,
                v.formula_value,
                v.rel_error,
                v.noise_floor,
                v.agrees(0.05)
            );
        }
    }
    Ok(())
}
