//! Task orchestration: isometric → conformal → task sections.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{RunConfig, Task};
use super::report::{FieldExport, Report};
use crate::calculus::{Backend, Chart, Field, MetricField, StencilConfig};
use crate::conformal::{
    canonical_frame, compare_paths, conformal_factor, conformal_metric_of_lift, identity_suite, integrability_suite,
    invariants_extrinsic, invariants_frame, CanonicalLift, ConformalFactor, ConformalTensors,
};
use crate::error::{Error, Result};
use crate::indefinite::random_pseudo_orthogonal;
use crate::isometric::Isometric;
use crate::isotropy::{classify_isotropy, Thresholds, Verdict};
use crate::spaceform::{apply_conformal, lift, Immersion};
use crate::willmore::{
    conformal_volume, default_t_step, first_variation_check, residual_crosscheck, roundoff_floor, willmore_residual,
    Bump, BumpDirection, Refinement,
};

/// Process exit status of a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Exit {
    Ok,
    /// A task errored or an invariant failed; names the first one.
    TaskFailed(String),
    Config(String),
    Grid(String),
}

impl Exit {
    pub fn code(&self) -> i32 {
        match self {
            Exit::Ok => 0,
            Exit::TaskFailed(_) => 1,
            Exit::Config(_) => 2,
            Exit::Grid(_) => 3,
        }
    }

    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::Expression(_) | Error::UnknownSurface(_) | Error::StencilOrderUnsupported { .. } => {
                Exit::Config(e.to_string())
            }
            Error::GridTooCoarse { .. } | Error::GridIncompatible(_) | Error::DegenerateImmersion { .. } => {
                Exit::Grid(e.to_string())
            }
            _ => Exit::TaskFailed(e.to_string()),
        }
    }
}

pub struct RunOutcome {
    pub report: Report,
    pub chart: Option<Arc<Chart>>,
    pub fields: Vec<FieldExport>,
    pub exit: Exit,
}

impl RunOutcome {
    pub fn rendered(&self) -> String {
        self.report.render()
    }
}

/// Default tolerances for analytic jets.
fn base_tolerance(name: &str) -> f64 {
    match name {
        "identity.frame_relations" | "identity.lift_metric" | "identity.omega_readoff" => 1e-8,
        "identity.laplacian_norm" => 1e-4,
        n if n.starts_with("identity.") => 1e-6,
        "gauss" => 1e-5,
        "dual_path" => 1e-6,
        "integrability" => 1e-4,
        "integrability.order" => 2.0,
        "invariance.moebius" => 1e-8,
        "invariance.rescale" => 1e-6,
        "invariance.group" => 1e-12,
        "willmore.crosscheck" => 1e-6,
        "variation.rel_error" => 0.05,
        "isotropy.norm_identity" => 1e-5,
        "isotropy.yc" => 1e-6,
        _ => 1e-6,
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
}

impl Ctx<'_> {
    /// Configured override, else the default loosened to `10 h^{order−2}`
    /// for finite differences (Möbius invariance uses its own FD default).
    fn tol(&self, name: &str) -> f64 {
        if let Some(&t) = self.cfg.tolerances.get(name) {
            return t;
        }
        let base = base_tolerance(name);
        if self.cfg.stencil.backend == Backend::FiniteDifference && !matches!(name, "integrability.order" | "invariance.group" | "variation.rel_error") {
            if name == "invariance.moebius" || name == "invariance.rescale" {
                return 1e-4;
            }
            return base.max(fd_floor(self.cfg));
        }
        base
    }
}

fn fd_floor(cfg: &RunConfig) -> f64 {
    let h = cfg.grid.axes().iter().map(|a| a.spacing()).fold(0.0, f64::max);
    10.0 * h.powi(cfg.stencil.order as i32 - 2)
}

/// Residuals below this are treated as converged when measuring orders.
pub const ORDER_FLOOR: f64 = 1e-10;

struct Conformal {
    cf: ConformalFactor,
    ext: ConformalTensors,
    frame: CanonicalLift,
}

fn conformal_stage(iso: &Isometric) -> Result<Conformal> {
    let cf = conformal_factor(iso)?;
    let ext = invariants_extrinsic(iso, &cf)?;
    let frame = canonical_frame(iso, &cf)?;
    Ok(Conformal { cf, ext, frame })
}

fn coarse_stage(imm: &Immersion, stencil: StencilConfig) -> Result<(Arc<Chart>, Isometric, Conformal)> {
    let g = imm.grid.coarsened();
    g.validate_for(stencil.order)?;
    let imm = imm.clone().with_grid(g);
    let chart = imm.chart(stencil)?;
    let iso = Isometric::compute(&imm, &chart)?;
    let c = conformal_stage(&iso)?;
    Ok((chart, iso, c))
}

/// Runs every configured task.
pub fn run(cfg: &RunConfig) -> RunOutcome {
    let mut report = Report::new();
    report.text("confsub.version", env!("CARGO_PKG_VERSION"));
    for (k, v) in cfg.echo() {
        report.text(&format!("config.{k}"), v);
    }
    let mut out = RunOutcome { report: Report::new(), chart: None, fields: Vec::new(), exit: Exit::Ok };
    if cfg.tasks.is_empty() {
        out.exit = Exit::Config("no tasks requested".into());
        return finish(report, out);
    }
    let imm = match cfg.immersion() {
        Ok(i) => i,
        Err(e) => {
            out.exit = Exit::from_error(&e);
            return finish(report, out);
        }
    };
    let chart = match imm.chart(cfg.stencil) {
        Ok(c) => c,
        Err(e) => {
            out.exit = Exit::from_error(&e);
            return finish(report, out);
        }
    };
    out.chart = Some(chart.clone());
    let iso = match Isometric::compute(&imm, &chart) {
        Ok(i) => i,
        Err(e) => {
            report.text("error", e.to_string());
            out.exit = Exit::from_error(&e);
            return finish(report, out);
        }
    };
    let ctx = Ctx { cfg };
    let nodes = chart.nodes();
    report.int("mask.nodes", nodes);
    report.int("isometric.seam_nodes", iso.normal.seam_nodes);
    let conf = conformal_stage(&iso);
    match &conf {
        Ok(c) => {
            report.int("mask.regular", c.cf.regular_count());
            report.num("mask.nonregular_fraction", c.cf.nonregular_fraction());
            report.int("mask.regions", c.cf.regions.len());
            report.text("mask.sigma", c.cf.sigma().map_or("mixed".to_string(), |s| format!("{s:+}")));
            if c.cf.regular_count() < nodes {
                report.warn(format!("{} non-regular node(s) masked", nodes - c.cf.regular_count()));
            }
            out.fields.push(FieldExport::scalar("tau", c.cf.tau.masked(&c.cf.mask())));
            out.fields.push(FieldExport::scalar("conformal_factor", c.cf.f.clone()));
            out.fields.push(FieldExport::scalar("sigma", c.cf.sign.clone()));
            out.fields.push(FieldExport::scalar("kappa_conf", c.ext.kappa_conf.clone()));
            let m = c.ext.m;
            out.fields.push(FieldExport {
                name: "conformal_metric".into(),
                columns: (0..m * m)
                    .filter(|ij| ij / m <= ij % m)
                    .map(|ij| (format!("g{}{}", ij / m, ij % m), c.ext.metric.comps()[ij].clone()))
                    .collect(),
            });
        }
        Err(Error::InsufficientRegularity { regular, total }) => {
            report.int("mask.regular", *regular);
            report.num("mask.nonregular_fraction", 1.0 - *regular as f64 / *total as f64);
            report.warn(format!(
                "submanifold is not conformally regular: {:.1}% of nodes non-regular, no conformal invariants",
                100.0 * (1.0 - *regular as f64 / *total as f64)
            ));
        }
        Err(e) => {
            report.text("error", e.to_string());
            out.exit = Exit::from_error(e);
            return finish(report, out);
        }
    }
    let gres = pointwise_gauss(&iso);
    out.fields.push(FieldExport::scalar("gauss_residual", gres));
    for &task in &cfg.tasks {
        let mut sec = Report::new();
        let res = match (&conf, task) {
            (_, Task::Analyze) => analyze(&ctx, &imm, &iso, conf.as_ref().ok(), &mut sec),
            (Ok(c), Task::Invariance) => invariance(&ctx, &imm, &chart, c, &mut sec),
            (Ok(c), Task::Willmore) => willmore(&ctx, &imm, c, &mut sec, &mut out.fields),
            (Ok(_), Task::Variation) => variation(&ctx, &imm, &iso, &mut sec),
            (Ok(c), Task::Isotropy) => isotropy(&ctx, c, &mut sec, &mut out.fields),
            (Err(_), _) => {
                sec.text("status", "skipped (not conformally regular)");
                Ok(())
            }
        };
        if let Err(e) = res {
            sec.text("error", e.to_string());
            sec.fail("error");
        }
        report.section(task.name(), sec);
    }
    finish(report, out)
}

fn finish(mut report: Report, mut out: RunOutcome) -> RunOutcome {
    let warnings = report.warnings().to_vec();
    report.int("warnings.count", warnings.len());
    for (k, w) in warnings.iter().enumerate() {
        report.text(&format!("warnings.{k}"), w.clone());
    }
    if out.exit == Exit::Ok {
        if let Some(f) = report.failures().first() {
            out.exit = Exit::TaskFailed(f.clone());
        }
    }
    match &out.exit {
        Exit::Ok => report.text("status", "ok"),
        Exit::TaskFailed(f) => {
            report.text("status", "failed");
            report.text("failure", f.clone());
        }
        Exit::Config(m) => {
            report.text("status", "config_error");
            report.text("failure", m.clone());
        }
        Exit::Grid(m) => {
            report.text("status", "grid_incompatible");
            report.text("failure", m.clone());
        }
    }
    out.report = report;
    out
}

fn pointwise_gauss(iso: &Isometric) -> Field {
    &iso.gauss.kappa_m - &iso.gauss.kappa_gauss
}

fn analyze(ctx: &Ctx, imm: &Immersion, iso: &Isometric, conf: Option<&Conformal>, r: &mut Report) -> Result<()> {
    r.bound("gauss", iso.gauss.residual, ctx.tol("gauss"));
    let Some(c) = conf else {
        r.text("status", "partial (not conformally regular)");
        return Ok(());
    };
    let (vol, masked) = conformal_volume(&c.ext);
    r.num("conformal_volume", vol);
    r.int("conformal_volume.masked_nodes", masked);
    r.text("convention_mismatch", c.ext.convention_mismatch.to_string());
    let ids = identity_suite(&c.ext, Some(&c.frame))?;
    r.num("identity.empirical_sign", ids.empirical_sign);
    for res in &ids.residuals {
        let key = format!("identity.{}", res.name);
        r.bound(&key, res.linf, ctx.tol(&key));
    }
    let frm = invariants_frame(&c.frame, &c.cf)?;
    let cmp = compare_paths(&c.ext, &frm);
    r.num("dual_path.scale", cmp.scale);
    let tol = ctx.tol("dual_path");
    r.bound("dual_path.a", cmp.a, tol);
    r.bound("dual_path.b", cmp.b, tol);
    r.bound("dual_path.c", cmp.c, tol);
    // integrability on the frame path, where every term is differenced
    let fine = integrability_suite(&frm)?;
    let coarse = match coarse_stage(imm, ctx.cfg.stencil) {
        Ok((_, _, cc)) => Some(integrability_suite(&invariants_frame(&cc.frame, &cc.cf)?)?),
        Err(e) => {
            r.warn(format!("integrability refinement skipped: {e}"));
            None
        }
    };
    let ratio = imm.grid.spacing_ratio(&imm.grid.coarsened());
    let tol = ctx.tol("integrability");
    let min_order = ctx.tol("integrability.order");
    for (k, res) in fine.iter().enumerate() {
        let key = format!("integrability.{}", res.name);
        r.bound(&key, res.linf, tol);
        if let Some(cs) = &coarse {
            let cl = cs[k].linf;
            r.num(&format!("{key}.coarse"), cl);
            if res.linf <= ORDER_FLOOR {
                r.text(&format!("{key}.order"), "converged");
            } else {
                let p = (cl / res.linf).ln() / ratio.ln();
                r.check(&format!("{key}.order"), p, min_order, p >= min_order);
            }
        }
    }
    Ok(())
}

fn rel_metric_error(a: &MetricField, b: &MetricField) -> f64 {
    let s = a.comps().iter().map(Field::max_abs).fold(0.0, f64::max);
    a.comps().iter().zip(b.comps()).map(|(x, y)| (x - y).max_abs()).fold(0.0, f64::max) / s
}

/// `exp(a sin(k·x + φ))` with integer wave numbers on periodic axes.
fn random_rescaling(chart: &Arc<Chart>, seed: u64) -> (Field, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = rng.gen_range(0.1..0.3);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let ks: Vec<f64> = chart
        .grid()
        .axes()
        .iter()
        .map(|a| {
            if a.periodic {
                std::f64::consts::TAU / (a.hi - a.lo) * rng.gen_range(1..=2) as f64
            } else {
                rng.gen_range(0.5..1.5) / (a.hi - a.lo)
            }
        })
        .collect();
    let desc = format!("exp({amp:.6} sin({ks:?} . x + {phase:.6}))");
    let f = move |x: &[crate::jet::Jet]| {
        let mut arg = x[0].scale(ks[0]).add_scalar(phase);
        for k in 1..x.len() {
            arg = &arg + &x[k].scale(ks[k]);
        }
        vec![arg.sin().scale(amp).exp()]
    };
    (Field::eval_jets(chart, chart.stencil().field_degree(), 1, &f).remove(0), desc)
}

fn invariance(ctx: &Ctx, imm: &Immersion, chart: &Arc<Chart>, c: &Conformal, r: &mut Report) -> Result<()> {
    let y = lift(imm, chart)?;
    let g0 = conformal_metric_of_lift(&y)?;
    r.bound("lift_vs_extrinsic", rel_metric_error(&c.ext.metric, &g0), ctx.tol("invariance.moebius"));
    let seeds = ctx.cfg.derived_seeds(ctx.cfg.maps);
    let tol = ctx.tol("invariance.moebius");
    let gtol = ctx.tol("invariance.group");
    let mut worst: f64 = 0.0;
    for (k, &s) in seeds.iter().enumerate() {
        let t = random_pseudo_orthogonal(y.signature, s);
        let key = format!("map{k}");
        r.text(&format!("{key}.seed"), s.to_string());
        r.bound(&format!("{key}.group_residual"), t.orthogonality_residual(), gtol);
        let yt = apply_conformal(&t, &y)?.euclid_normalized();
        let e = rel_metric_error(&g0, &conformal_metric_of_lift(&yt)?);
        worst = worst.max(e);
        r.bound(&format!("{key}.metric_rel_error"), e, tol);
    }
    r.num("moebius.worst", worst);
    let rs = ctx.cfg.derived_seeds(1)[0];
    let (lam, desc) = random_rescaling(chart, rs);
    r.text("rescale.seed", rs.to_string());
    r.text("rescale.factor", desc);
    let e = rel_metric_error(&g0, &conformal_metric_of_lift(&y.rescaled(&lam))?);
    r.bound("rescale.metric_rel_error", e, ctx.tol("invariance.rescale"));
    Ok(())
}

fn willmore(ctx: &Ctx, imm: &Immersion, c: &Conformal, r: &mut Report, fields: &mut Vec<FieldExport>) -> Result<()> {
    let form = ctx.cfg.willmore_form;
    let w = willmore_residual(&c.ext, form)?;
    let (vol, _) = conformal_volume(&c.ext);
    r.text("form", form.name());
    r.num("conformal_volume", vol);
    r.num("residual.linf", w.linf);
    r.num("residual.l2", w.l2);
    r.num("residual.term_scale", w.term_scale);
    fields.push(FieldExport::scalar("willmore_residual", Field::from_values(c.ext.chart(), w.pointwise())));
    let verdict = match coarse_stage(imm, ctx.cfg.stencil) {
        Ok((_, _, cc)) => {
            let wc = willmore_residual(&cc.ext, form)?;
            let ratio = imm.grid.spacing_ratio(&imm.grid.coarsened());
            let rf = Refinement::new(wc.linf, w.linf, ratio, ctx.cfg.stencil.order as f64, roundoff_floor(w.term_scale));
            r.num("residual.coarse_linf", rf.coarse);
            r.num("refinement.ratio", rf.ratio);
            match rf.observed_order {
                Some(p) => r.num("refinement.observed_order", p),
                None => r.text("refinement.observed_order", "NA"),
            }
            r.num("refinement.extrapolated", rf.extrapolated);
            r.num("refinement.noise_floor", rf.noise_floor);
            if rf.vanishes() {
                "yes"
            } else if rf.bounded_away() {
                "no"
            } else {
                "inconclusive"
            }
        }
        Err(e) => {
            r.text("refinement", format!("skipped ({e})"));
            r.warn(format!("willmore refinement skipped: {e}"));
            "inconclusive"
        }
    };
    r.text("willmore", verdict);
    let st = ctx.cfg.stencil;
    if st.backend == Backend::FiniteDifference && st.order < 6 {
        r.text("crosscheck", "skipped (hessian form needs stencil order 6)");
    } else {
        r.bound("crosscheck", residual_crosscheck(&c.ext)?, ctx.tol("willmore.crosscheck"));
    }
    Ok(())
}

fn variation(ctx: &Ctx, imm: &Immersion, iso: &Isometric, r: &mut Report) -> Result<()> {
    let st = ctx.cfg.stencil;
    let vst = match st.backend {
        Backend::AnalyticJets => StencilConfig::analytic(st.order, st.jet_order + 1)?,
        Backend::FiniteDifference => st,
    };
    let chart = imm.chart(vst)?;
    let rank = iso.normal.e.len();
    let t = ctx.cfg.t_step.unwrap_or_else(|| default_t_step(&iso.u));
    r.num("t_step", t);
    if let Backend::AnalyticJets = st.backend {
        r.int("jet_order", vst.jet_order);
    }
    let margin = st.order / 2;
    let tol = ctx.tol("variation.rel_error");
    for (k, s) in ctx.cfg.derived_seeds(ctx.cfg.bumps).into_iter().enumerate() {
        let key = format!("bump{k}");
        let bump = Bump::random(imm, rank, margin, s);
        r.text(&format!("{key}.seed"), s.to_string());
        r.text(&format!("{key}.center"), list(&bump.center));
        r.text(&format!("{key}.radius"), list(&bump.radius));
        r.text(
            &format!("{key}.direction"),
            match bump.direction {
                BumpDirection::Normal(a) => format!("normal {a}"),
                BumpDirection::Tangent(i) => format!("tangent {i}"),
            },
        );
        match first_variation_check(imm, &chart, &bump, t) {
            Ok(v) => {
                r.num(&format!("{key}.fd_derivative"), v.fd_derivative);
                r.num(&format!("{key}.fd_coarse"), v.fd_coarse);
                r.num(&format!("{key}.formula_value"), v.formula_value);
                r.num(&format!("{key}.abs_error"), v.abs_error);
                r.num(&format!("{key}.noise_floor"), v.noise_floor);
                r.check(&format!("{key}.rel_error"), v.rel_error, tol, v.agrees(tol));
            }
            Err(e) => {
                r.text(&format!("{key}.error"), e.to_string());
                r.fail(&format!("{key}.error"));
            }
        }
    }
    Ok(())
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| super::report::num(*x)).collect::<Vec<_>>().join(" ")
}

fn isotropy(ctx: &Ctx, c: &Conformal, r: &mut Report, fields: &mut Vec<FieldExport>) -> Result<()> {
    let mut thr = Thresholds::for_chart(&c.ext);
    let t = &ctx.cfg.tolerances;
    thr.dev_a = t.get("isotropy.dev_a").copied().unwrap_or(thr.dev_a);
    thr.dev_c = t.get("isotropy.dev_c").copied().unwrap_or(thr.dev_c);
    thr.lambda_stddev = t.get("isotropy.lambda_stddev").copied().unwrap_or(thr.lambda_stddev);
    thr.c_variation = t.get("isotropy.c_variation").copied().unwrap_or(thr.c_variation);
    let rep = classify_isotropy(&c.ext, &c.frame, Some(thr));
    fields.push(FieldExport::scalar("lambda", rep.lambda.clone()));
    r.num("lambda_mean", rep.lambda_mean);
    r.num("lambda_stddev", rep.lambda_stddev);
    r.num("lambda_stddev.threshold", rep.thresholds.lambda_stddev * rep.scales.lambda_stddev);
    r.num("dev_a", rep.dev_a);
    r.num("dev_a.threshold", rep.thresholds.dev_a * rep.scales.dev_a);
    r.num("dev_c", rep.dev_c);
    r.num("dev_c.threshold", rep.thresholds.dev_c * rep.scales.dev_c);
    if let (Some(mean), Some(var), Some(n2)) = (&rep.c_mean, rep.c_variation, rep.c_norm2) {
        r.text("c_mean", list(mean));
        r.num("c_variation", var);
        r.num("c_variation.threshold", rep.thresholds.c_variation * rep.scales.c_variation);
        r.num("c_norm2", n2);
        r.num("tol_band", rep.tol_band.unwrap_or(f64::NAN));
    }
    r.text("verdict", rep.verdict.name());
    if let Some(f) = rep.failed {
        r.text("rejected_by", f);
    }
    if rep.band_limited {
        r.text("band_limited", "true");
    }
    if rep.verdict != Verdict::NotIsotropic {
        r.bound("norm_identity", rep.norm_residual.unwrap_or(f64::NAN), ctx.tol("isotropy.norm_identity"));
        r.bound("yc_identity", rep.yc_residual.unwrap_or(f64::NAN), ctx.tol("isotropy.yc"));
    }
    Ok(())
}

/// Names accepted by `export`.
pub const FIELDS: &[&str] =
    &["tau", "conformal_factor", "sigma", "kappa_conf", "conformal_metric", "gauss_residual", "willmore_residual", "lambda"];

/// Computes the fields of a run with the tasks that produce them.
pub fn export_field(cfg: &RunConfig, name: &str) -> Result<(Arc<Chart>, FieldExport)> {
    if !FIELDS.contains(&name) {
        return Err(Error::Config(format!("unknown field '{name}' (one of {})", FIELDS.join(", "))));
    }
    let mut c = cfg.clone();
    c.tasks = match name {
        "willmore_residual" => vec![Task::Willmore],
        "lambda" => vec![Task::Isotropy],
        _ => vec![Task::Analyze],
    };
    let out = run(&c);
    if let Exit::Config(m) | Exit::Grid(m) = &out.exit {
        return Err(match out.exit {
            Exit::Grid(_) => Error::GridIncompatible(m.clone()),
            _ => Error::Config(m.clone()),
        });
    }
    let chart = out.chart.clone().ok_or_else(|| Error::TaskFailed("no chart".into()))?;
    let f = out
        .fields
        .into_iter()
        .find(|f| f.name == name)
        .ok_or_else(|| Error::TaskFailed(format!("field '{name}' unavailable (surface not conformally regular?)")))?;
    Ok((chart, f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::parse(text).unwrap()
    }

    #[test]
    fn clifford_isotropy_end_to_end() {
        let out = run(&cfg("surface = clifford_torus\ngrid.count = 32\ntasks = isotropy"));
        assert_eq!(out.exit, Exit::Ok, "{}", out.rendered());
        assert_eq!(out.report.get("isotropy.verdict"), Some("SPHERE_CASE"));
    }

    #[test]
    fn round_sphere_warns_and_exits_zero() {
        let out = run(&cfg("surface = round_sphere\ngrid.count = 24\ntasks = analyze, willmore"));
        assert_eq!(out.exit, Exit::Ok, "{}", out.rendered());
        assert_eq!(out.report.get("mask.nonregular_fraction"), Some("1.0000000000000000e0"));
        assert_eq!(out.report.get("warnings.count"), Some("1"));
        assert!(out.report.get("willmore.status").unwrap().starts_with("skipped"));
        assert_eq!(out.report.get("analyze.gauss.pass"), Some("true"));
    }

    #[test]
    fn failures_and_exit_codes() {
        let out = run(&cfg("surface = catenoid\ngrid.count = 24\ntasks = analyze\ntolerance.gauss = -1"));
        assert_eq!(out.exit, Exit::TaskFailed("analyze.gauss".into()));
        assert_eq!(out.exit.code(), 1);
        assert_eq!(out.report.get("failure"), Some("analyze.gauss"));
        let out = run(&cfg("surface = catenoid\ngrid.count = 24"));
        assert_eq!(out.exit.code(), 2);
    }

    #[test]
    fn task_isolation() {
        let out = run(&cfg("surface = torus_product\ngrid.count = 32\ntasks = willmore, isotropy\ntolerance.willmore.crosscheck = -1"));
        assert_eq!(out.exit.code(), 1);
        assert_eq!(out.report.get("isotropy.verdict"), Some("NOT_ISOTROPIC"));
        assert_eq!(out.report.get("willmore.willmore"), Some("no"));
    }

    #[test]
    fn export_known_and_unknown_fields() {
        let c = cfg("surface = catenoid\ngrid.count = 20\n");
        let (_, f) = export_field(&c, "tau").unwrap();
        assert_eq!(f.columns.len(), 1);
        let (_, f) = export_field(&c, "conformal_metric").unwrap();
        assert_eq!(f.columns.len(), 3);
        assert!(matches!(export_field(&c, "nope"), Err(Error::Config(_))));
    }
}
