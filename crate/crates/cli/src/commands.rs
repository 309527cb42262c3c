// Copyright 2026 The lindloc Contributors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use lindloc::ct::{ct_verify_region, CtRow, Indexing};
use lindloc::disorder::{
    a_priori_bound, disordered_coherence_mc, fit_exponential_decay, fractional_moment_mc, localization_threshold,
    DisorderSpec,
};
use lindloc::dissipative::{box_exclusion_check, dissipative_resolvent_check, pseudospectrum_grid};
use lindloc::dynamics::{abel_average_raw, evolve_raw, trace_norm_bound_check, EvolveMethod};
use lindloc::kernel::coherence_bound_from_kernel;
use lindloc::linalg::{c, hermitian_eigenvalues, CMatrix};
use lindloc::{
    abel_average, build_dissipative, compute_kernel, spectral_envelope, steady_states, BoundaryClosure, CoherenceKernel,
    Geometry, Lattice, LindbladModel, Region,
};
use serde::Serialize;
use serde_json::json;

use crate::config::*;
use crate::output::{Output, PlotRow};

/// Outcome of a command that ran to completion.
pub enum Verdict {
    Pass,
    /// A checked inequality failed.
    Violation(String),
}

impl Verdict {
    fn from_checks(failures: Vec<String>) -> Self {
        if failures.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Violation(failures.join("; "))
        }
    }
}

pub struct Run<'a> {
    pub loaded: &'a Loaded,
    pub out: &'a mut Output,
    pub plot: bool,
}

type Ctx<'a, 'b> = &'a mut Run<'b>;

fn trace_and_min_eig(m: &CMatrix) -> (f64, f64) {
    let herm = (m + m.adjoint()) * c(0.5, 0.0);
    let min = hermitian_eigenvalues(&herm).first().copied().unwrap_or(0.0);
    (m.trace().re, min)
}

#[derive(Serialize)]
struct StateSummary {
    index: usize,
    parameter: f64,
    file: String,
    trace: f64,
    min_eigenvalue: f64,
}

pub fn model_validate(ctx: Ctx) -> Result<Verdict> {
    let p: ValidateParams = ctx.loaded.params()?;
    let model = ctx.loaded.model()?;
    let report = model.validate_locality();
    ctx.out.json("model.json", &model.to_json())?;
    let mut failures = Vec::new();
    if !report.pass {
        failures.push("measured locality exceeds the declared constants".to_string());
    }
    let mut summary = json!({ "locality": report });
    if p.trace_norm_samples > 0 {
        let seed = ctx.loaded.seed()?;
        let tn = trace_norm_bound_check(&model, p.trace_norm_samples, seed)?;
        if !tn.pass {
            failures.push(format!("trace-norm lower bound {} exceeds {}", tn.lower_bound, tn.bound));
        }
        summary["trace_norm"] = serde_json::to_value(&tn)?;
    }
    ctx.out.json("validation.json", &summary)?;
    Ok(Verdict::from_checks(failures))
}

pub fn evolve(ctx: Ctx) -> Result<Verdict> {
    let p: EvolveParams = ctx.loaded.params()?;
    let model = ctx.loaded.model()?;
    let rho0 = p.initial.build(ctx.loaded, model.dim())?;
    let mut summary = Vec::new();
    for (k, &t) in p.times.iter().enumerate() {
        let rt = evolve_raw(&model, rho0.matrix(), t, EvolveMethod::Auto)?;
        let file = format!("state_{k}.csv");
        ctx.out.matrix_csv(&file, &rt)?;
        let (trace, min_eigenvalue) = trace_and_min_eig(&rt);
        summary.push(StateSummary { index: k, parameter: t, file, trace, min_eigenvalue });
    }
    ctx.out.json("evolve.json", &json!({ "times": p.times, "states": summary }))?;
    Ok(Verdict::Pass)
}

pub fn steady(ctx: Ctx) -> Result<Verdict> {
    let p: SteadyParams = ctx.loaded.params()?;
    let model = ctx.loaded.model()?;
    let basis = steady_states(&model)?;
    for (k, s) in basis.states.iter().enumerate() {
        ctx.out.matrix_csv(&format!("steady_{k}.csv"), s.matrix())?;
    }
    ctx.out.json(
        "steady.json",
        &json!({ "dimension": basis.dimension(), "residuals": basis.residuals, "norm": basis.norm }),
    )?;
    let failures = basis
        .residuals
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > p.residual_tol)
        .map(|(k, r)| format!("state {k} has residual {r:e}"))
        .collect();
    Ok(Verdict::from_checks(failures))
}

pub fn abel(ctx: Ctx) -> Result<Verdict> {
    let p: AbelParams = ctx.loaded.params()?;
    let model = ctx.loaded.model()?;
    let rho0 = p.initial.build(ctx.loaded, model.dim())?;
    let mut summary = Vec::new();
    for (k, &eps) in p.eps.iter().enumerate() {
        let avg = abel_average_raw(&model, rho0.matrix(), eps)?;
        let file = format!("abel_{k}.csv");
        ctx.out.matrix_csv(&file, &avg)?;
        let (trace, min_eigenvalue) = trace_and_min_eig(&avg);
        summary.push(StateSummary { index: k, parameter: eps, file, trace, min_eigenvalue });
    }
    ctx.out.json("abel.json", &json!({ "eps": p.eps, "states": summary }))?;
    Ok(Verdict::Pass)
}

#[derive(Serialize)]
struct GridRow {
    re_z: f64,
    im_z: f64,
    sigma_min: f64,
}

fn dissipative_operator(
    model: &LindbladModel,
    sites: &Option<Vec<usize>>,
    closure: &lindloc::ClosureSpec,
) -> Result<(Region, lindloc::DissipativeHamiltonian)> {
    let region = region(model.lattice(), sites)?;
    let closure = BoundaryClosure::build(closure, model, &region)?;
    let d = build_dissipative(model, &region, &closure)?;
    Ok((region, d))
}

pub fn envelope(ctx: Ctx) -> Result<Verdict> {
    let p: EnvelopeParams = ctx.loaded.params()?;
    let model = ctx.loaded.model()?;
    let (_, d) = dissipative_operator(&model, &p.region, &p.closure)?;
    let env = spectral_envelope(&d)?;
    ctx.out.json("envelope.json", &env)?;
    ctx.out.csv("envelope.csv", env.eigenvalues.iter().map(|z| GridRow { re_z: z.re, im_z: z.im, sigma_min: 0.0 }))?;
    Ok(if env.contained {
        Verdict::Pass
    } else {
        Verdict::Violation("an eigenvalue lies outside the box [-F, 0] × i[-F, F]".into())
    })
}

pub fn pseudospec(ctx: Ctx) -> Result<Verdict> {
    let p: PseudospecParams = ctx.loaded.params()?;
    let model = ctx.loaded.model()?;
    let (_, d) = dissipative_operator(&model, &p.region, &p.closure)?;
    let points = p.grid.points();
    let grid = pseudospectrum_grid(&d.matrix, &points, 1.0);
    ctx.out.csv("pseudospectrum.csv", grid.iter().map(|g| GridRow { re_z: g.re_z, im_z: g.im_z, sigma_min: g.sigma_min }))?;
    let mut failures = Vec::new();
    let (axis, moved) = dissipative_resolvent_check(&d.matrix, &p.eps, &points)?;
    if !axis.holds() || !moved.holds() {
        failures.push("resolvent bound of a dissipative operator violated".to_string());
    }
    let mut per_eps = Vec::new();
    for &eps in &p.eps {
        let boxed = box_exclusion_check(&d.matrix, eps, &points);
        if !boxed.holds() {
            failures.push(format!("box exclusion violated at ε = {eps}"));
        }
        let members = grid.iter().filter(|g| g.sigma_min < eps).count();
        per_eps.push(json!({ "eps": eps, "members": members, "box_exclusion": boxed }));
    }
    ctx.out.json(
        "pseudospec.json",
        &json!({ "points": points.len(), "resolvent_on_axis": axis, "resolvent_moved": moved, "per_eps": per_eps }),
    )?;
    Ok(Verdict::from_checks(failures))
}

fn write_kernel(ctx: Ctx, lat: &Lattice, kernel: &CoherenceKernel) -> Result<()> {
    let entries = kernel.entries(lat);
    ctx.out.csv("kernel.csv", entries.iter())?;
    let fit = kernel.decay_fit(lat).ok();
    ctx.out.json(
        "kernel.json",
        &json!({
            "x": kernel.x,
            "y": kernel.y,
            "eps": kernel.eps,
            "geometry": kernel.geometry,
            "lambda_x": kernel.blocks.lambda_x.members(),
            "lambda_y": kernel.blocks.lambda_y.members(),
            "gap_x": kernel.d_x.gap(),
            "contour": kernel.contour,
            "quadrature": kernel.quadrature,
            "fit": fit,
        }),
    )?;
    if ctx.plot {
        let mut best: BTreeMap<usize, f64> = BTreeMap::new();
        for e in &entries {
            let slot = best.entry(e.d_xu + e.d_yv).or_insert(0.0);
            *slot = slot.max(e.abs_k);
        }
        let rows = best
            .into_iter()
            .filter(|&(_, m)| m > 0.0)
            .map(|(d, m)| PlotRow { series: "max_abs_k".into(), distance: d, log_magnitude: m.ln() });
        ctx.out.csv("kernel_plot.csv", rows)?;
    }
    Ok(())
}

pub fn kernel(ctx: Ctx) -> Result<Verdict> {
    let p: KernelParams = ctx.loaded.params()?;
    let model = ctx.loaded.model()?;
    let kernel = compute_kernel(&model, p.x, p.y, p.eps, &p.closure, p.geometry, &p.contour)?;
    write_kernel(ctx, model.lattice(), &kernel)?;
    Ok(if kernel.quadrature.converged {
        Verdict::Pass
    } else {
        Verdict::Violation(format!("contour quadrature unconverged (change {:e})", kernel.quadrature.rel_change))
    })
}

pub fn coherence_bound(ctx: Ctx) -> Result<Verdict> {
    let p: CoherenceBoundParams = ctx.loaded.params()?;
    let model = ctx.loaded.model()?;
    let rho0 = p.initial.build(ctx.loaded, model.dim())?;
    let kernel = compute_kernel(&model, p.x, p.y, p.eps, &p.closure, Geometry::ThreeBlock, &p.contour)?;
    let abel = abel_average(&model, &rho0, p.eps)?;
    let report = coherence_bound_from_kernel(&model, &kernel, rho0.matrix(), abel.matrix())?;
    write_kernel(ctx, model.lattice(), &kernel)?;
    ctx.out.json("coherence_bound.json", &report)?;
    Ok(if report.satisfied {
        Verdict::Pass
    } else {
        Verdict::Violation(format!("coherence bound violated: lhs {:e} > rhs {:e}", report.lhs, report.rhs))
    })
}

pub fn ct_verify(ctx: Ctx) -> Result<Verdict> {
    let p: CtParams = ctx.loaded.params()?;
    let model = ctx.loaded.model()?;
    let lat = model.lattice().clone();
    let (region, d) = dissipative_operator(&model, &p.region, &p.closure)?;
    let a = match p.operator {
        CtOperator::Dissipative => d.matrix,
        CtOperator::Hamiltonian => {
            let h = model.hamiltonian();
            let m = region.members();
            CMatrix::from_fn(m.len(), m.len(), |i, j| h[(m[i], m[j])])
        }
    };
    let idx = Indexing::region(&lat, &region);
    let report = ct_verify_region(&a, &idx, &p.grid.points(), p.eps_rule, p.alpha)?;
    // Report rows index the region; write lattice sites.
    let sites = region.members();
    ctx.out.csv("ct_violations.csv", report.rows.iter().map(|r| CtRow { x: sites[r.x], y: sites[r.y], ..*r }))?;
    ctx.out.json(
        "ct_verify.json",
        &json!({
            "alpha": report.alpha,
            "s_alpha": report.s_alpha,
            "points_checked": report.points_checked,
            "points_skipped": report.points_skipped,
            "violations": report.violations,
        }),
    )?;
    if ctx.plot {
        let mut measured: BTreeMap<usize, f64> = BTreeMap::new();
        let mut bound: BTreeMap<usize, f64> = BTreeMap::new();
        for r in &report.rows {
            let Some(dist) = idx.distance(r.x, r.y).finite() else { continue };
            let m = measured.entry(dist).or_insert(0.0);
            *m = m.max(r.measured);
            let b = bound.entry(dist).or_insert(0.0);
            *b = b.max(r.bound);
        }
        let rows = [("measured", measured), ("bound", bound)].into_iter().flat_map(|(name, map)| {
            map.into_iter().filter(|&(_, v)| v > 0.0).map(move |(d, v)| PlotRow {
                series: name.into(),
                distance: d,
                log_magnitude: v.ln(),
            })
        });
        ctx.out.csv("ct_plot.csv", rows)?;
    }
    Ok(if report.violations == 0 {
        Verdict::Pass
    } else {
        Verdict::Violation(format!("{} Combes-Thomas violations", report.violations))
    })
}

#[derive(Serialize)]
struct SweepRow {
    lambda: f64,
    s: f64,
    d_xy: usize,
    mean: f64,
    std_error: f64,
    n: usize,
}

pub fn disorder_sweep(ctx: Ctx) -> Result<Verdict> {
    let seed = ctx.loaded.seed()?;
    let p: DisorderParams = ctx.loaded.params()?;
    let model = ctx.loaded.model()?;
    let lat = model.lattice().clone();
    let mut rows = Vec::new();
    let mut thresholds = Vec::new();
    let mut failures = Vec::new();
    let distance = |x: usize, y: usize| -> Result<usize> {
        lat.graph_distance(x, y)?.finite().with_context(|| format!("sites {x} and {y} are not connected"))
    };
    for &lambda in &p.lambdas {
        let spec = DisorderSpec { distribution: p.distribution, lambda, master_seed: seed };
        match &p.observable {
            Observable::Moment { s, z, x, ys } => {
                let a0 = build_dissipative(&model, &Region::full(&lat), &BoundaryClosure::none())?.matrix;
                let pairs: Vec<(usize, usize)> = ys.iter().map(|&y| (*x, y)).collect();
                for &sv in s {
                    let est = fractional_moment_mc(&a0, &spec, sv, c(z[0], z[1]), &pairs, p.n_samples)?;
                    for e in est {
                        if e.x == e.y {
                            let bound = a_priori_bound(&spec, sv, true);
                            if e.mean > bound + 3.0 * e.std_error {
                                failures.push(format!(
                                    "λ = {lambda}, s = {sv}: diagonal moment {} above the a-priori bound {bound}",
                                    e.mean
                                ));
                            }
                        }
                        let d_xy = distance(e.x, e.y)?;
                        rows.push(SweepRow { lambda, s: sv, d_xy, mean: e.mean, std_error: e.std_error, n: e.n_samples });
                    }
                    if let Some(mu) = p.threshold_mu {
                        let t = localization_threshold(&a0, &lat, &spec, sv, mu)?;
                        thresholds.push(json!({
                            "lambda": lambda,
                            "s": t.s,
                            "mu": t.mu,
                            "C_s": t.c_s,
                            "lambda_s_mu": t.lambda_s_mu,
                            "lambda_min": t.lambda_min,
                            "prefactor": t.prefactor,
                        }));
                    }
                }
            }
            Observable::Coherence { kinetic, x0, x, ys, eps } => {
                if p.threshold_mu.is_some() {
                    bail!("schema error: threshold_mu only applies to the moment observable");
                }
                let est = disordered_coherence_mc(&model, *kinetic, &spec, *x0, *x, ys, *eps, p.n_samples)?;
                for e in est {
                    rows.push(SweepRow {
                        lambda,
                        s: 1.0,
                        d_xy: e.distance,
                        mean: e.mean,
                        std_error: e.std_error,
                        n: e.n_samples,
                    });
                }
            }
        }
    }
    if ctx.plot {
        let plot: Vec<PlotRow> = rows
            .iter()
            .filter(|r| r.mean > 0.0)
            .map(|r| PlotRow { series: format!("lambda={} s={}", r.lambda, r.s), distance: r.d_xy, log_magnitude: r.mean.ln() })
            .collect();
        ctx.out.csv("sweep_plot.csv", plot)?;
    }
    ctx.out.csv("sweep.csv", rows)?;
    if p.threshold_mu.is_some() {
        ctx.out.json("threshold.json", &thresholds)?;
    }
    Ok(Verdict::from_checks(failures))
}

pub fn fit_decay(ctx: Ctx) -> Result<Verdict> {
    let p: FitParams = ctx.loaded.params()?;
    let path = ctx.loaded.resolve(&p.input);
    let mut reader = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).with_context(|| format!("column {name} missing in {}", path.display()))
    };
    let (dc, vc) = (column(&p.distance_column)?, column(&p.value_column)?);
    let group_cols: Vec<usize> = p.group_by.iter().map(|g| column(g)).collect::<Result<_>>()?;
    let mut groups: BTreeMap<Vec<String>, Vec<(f64, f64)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let parse = |k: usize| -> Result<f64> {
            record[k].trim().parse().with_context(|| format!("not a number: {:?}", &record[k]))
        };
        let key = group_cols.iter().map(|&k| record[k].to_string()).collect();
        groups.entry(key).or_default().push((parse(dc)?, parse(vc)?));
    }
    let mut fits = Vec::new();
    for (key, points) in groups {
        let fit = fit_exponential_decay(&points)?;
        let group: BTreeMap<&str, &str> = p.group_by.iter().map(String::as_str).zip(key.iter().map(String::as_str)).collect();
        fits.push(json!({ "group": group, "C": fit.prefactor, "mu": fit.rate, "r_squared": fit.r_squared, "points": fit.points }));
    }
    ctx.out.json("fit.json", &fits)?;
    Ok(Verdict::Pass)
}
