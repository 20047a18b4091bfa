//! Running a validated plan into in-memory outputs, and writing them.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use skbm::bernstein::{check_density_bounds, check_laplace_identities, levy_density, potential_density, A1Convention, Strategy};
use skbm::domain::{dist, Domain};
use skbm::heat::HeatKernelEval;
use skbm::kernels::scan::{envelope_scan, half_space_pairs, EnvelopeKind, ScanRow};
use skbm::kernels::{scan::compensator_b_scan, KernelEngine};
use skbm::mc::{
    estimate_3G_gauge, laplace_test, lattice_cells, verify_bhp, verify_carleson, verify_exit_scaling,
    verify_green_comparability, verify_harnack, BhpMode,
};
use skbm::quad::logspace;
use skbm::report::{BoundCheckReport, Witness};

use crate::config::{EnvelopeChoice, ExperimentKind, Plan};
use crate::error::CliError;
use crate::table::{num, Table};

/// Everything a run produces, built before any file is written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub pass: bool,
    pub summary: Value,
    pub detail: Table,
    pub plots: Vec<Table>,
}

const SAMPLER_LAMBDAS: [f64; 4] = [0.5, 1.0, 2.0, 5.0];

#[derive(Serialize)]
struct Summary<'a> {
    experiment: ExperimentKind,
    check: &'static str,
    subordinator: &'a str,
    seed: u64,
    pass: bool,
    reports: &'a [BoundCheckReport],
    conditions: BoundCheckReport,
    config: &'a crate::config::ExperimentConfig,
    version: &'static str,
}

fn mean_of(v: &Value) -> (f64, f64) {
    (
        v["mean"].as_f64().unwrap_or(f64::NAN),
        v["se"].as_f64().unwrap_or(f64::NAN),
    )
}

fn point_of(v: &Value) -> Vec<f64> {
    v.as_array()
        .map(|a| a.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect())
        .unwrap_or_default()
}

fn rows_of<'a>(rep: &'a BoundCheckReport, key: &str) -> &'a [Value] {
    rep.grid.get(key).and_then(|v| v.as_array()).map_or(&[], |a| a.as_slice())
}

pub fn run_experiment(plan: &Plan) -> Result<RunOutput, CliError> {
    let cfg = &plan.config;
    let g = &cfg.grid;
    let f = &plan.f;
    let mc = &cfg.mc;
    let dom = plan.domain.as_ref();
    let d = dom.map_or(3, |x| x.d);
    let mut reports = Vec::new();
    let mut plots = Vec::new();
    let detail;
    match cfg.experiment {
        ExperimentKind::CatalogCheck => {
            let lambdas = g.lambdas.clone().unwrap();
            let checks = check_laplace_identities(f, &lambdas, cfg.quadrature.rel_tol.min(1e-9))?;
            let tol_mu = if f.levy_strategy() == Strategy::ClosedForm { 1e-5 } else { 1e-3 };
            let tol_u = if f.potential_strategy() == Strategy::ClosedForm { 1e-5 } else { 1e-3 };
            let mut lap = BoundCheckReport::new("laplace-identities");
            lap.constant("levy_tolerance", tol_mu).constant("potential_tolerance", tol_u);
            let mut t = Table::new("laplace", &["lambda", "levy_rel_error", "potential_rel_error"]);
            let (mut wl, mut wp) = (0.0f64, 0.0f64);
            for c in &checks {
                t.push_nums(&[c.lambda, c.levy_rel_error, c.potential_rel_error]);
                wl = wl.max(c.levy_rel_error);
                wp = wp.max(c.potential_rel_error);
                if !(c.levy_rel_error < tol_mu) || !(c.potential_rel_error < tol_u) {
                    lap.fail(Witness::new("identity", vec![c.lambda], c.levy_rel_error.max(c.potential_rel_error)));
                }
            }
            lap.constant("levy_max_error", wl).constant("potential_max_error", wp);
            reports.push(lap);
            detail = t;

            let (lo, hi, n) = (g.t_lo.unwrap(), g.t_hi.unwrap(), g.n_t.unwrap());
            let ts = logspace(lo, hi, n);
            reports.push(check_density_bounds(f, &ts, hi)?);
            let mut dens = Table::new("densities", &["t", "potential_density", "levy_density"]);
            for &s in &ts {
                dens.push_nums(&[s, potential_density(f, s)?, levy_density(f, s)?]);
            }
            plots.push(dens);

            let mut cond = plan.conditions.summary();
            if let Some(p) = plan.conditions.a3 {
                cond.constant("delta", p.exponent);
            }
            reports.push(cond);

            if f.supports_sampling() {
                for (i, &h) in g.sampler_h.as_ref().unwrap().iter().enumerate() {
                    let mut rep = laplace_test(
                        f,
                        h,
                        &SAMPLER_LAMBDAS,
                        mc.n_paths,
                        skbm::mc::rng::derive_seed(mc.seed, i as u64),
                        g.z_max.unwrap(),
                    )?;
                    rep.condition = format!("empirical-laplace@h={h}");
                    reports.push(rep);
                }
            }
        }
        ExperimentKind::KernelScan => {
            let domain = dom.unwrap();
            let e = KernelEngine::new(f, &cfg.quadrature)?;
            let h = HeatKernelEval::new(domain)?;
            let kind = match g.envelope.unwrap() {
                EnvelopeChoice::Green => EnvelopeKind::Green,
                EnvelopeChoice::Jump => EnvelopeKind::Jump,
                EnvelopeChoice::LargeScaleJump => EnvelopeKind::LargeScaleJump(A1Convention::Bounded),
            };
            let (r_lo, r_hi) = (g.r_lo.unwrap(), g.r_hi.unwrap());
            let (nr, na, nt) = (g.n_r.unwrap(), g.n_a.unwrap(), g.n_theta.unwrap());
            let pairs = half_space_pairs(d, r_lo, r_hi, nr, na, nt);
            let (rows, s) = envelope_scan(&e, &h, &pairs, kind)?;
            let mut rep = BoundCheckReport::new("envelope-scan");
            let c = s.c();
            rep.constant("C", c).constant("C_lower", s.C_lower).constant("C_upper", s.C_upper);
            rep.grid_entry("n_pairs", s.n_points).grid_entry("envelope", g.envelope);
            rep.witness(Witness::new("worst pair", [s.worst_pair.0.clone(), s.worst_pair.1.clone()].concat(), c));
            let c_max = g.c_max.unwrap();
            if !(c < c_max) {
                rep.fail(Witness::new("envelope constant", vec![c_max], c));
            }
            if g.refine.unwrap() {
                let fine = half_space_pairs(d, r_lo, r_hi, 2 * nr - 1, 2 * na - 1, 2 * nt - 1);
                let (_, s2) = envelope_scan(&e, &h, &fine, kind)?;
                let change = (s2.c() - c).abs() / c;
                rep.constant("C_refined", s2.c()).constant("refinement_change", change);
                rep.grid_entry("n_pairs_refined", s2.n_points);
                if !(change < g.refine_tol.unwrap()) {
                    rep.fail(Witness::new("refinement", vec![s2.c()], change));
                }
            }
            reports.push(rep);
            plots.push(ratio_table(&rows, domain));
            detail = scan_table(&rows, d);
        }
        ExperimentKind::Harnack => {
            let domain = dom.unwrap();
            let rep = verify_harnack(domain, f, g.x0.as_ref().unwrap(), g.r.unwrap(), mc)?;
            let mut t = Table::with_coords("detail", &["scale"], "x", d, &["near", "near_se", "right", "right_se", "left", "left_se"]);
            for row in rows_of(&rep, "estimates") {
                let mut v = vec![row["scale"].as_f64().unwrap_or(f64::NAN)];
                v.extend(point_of(&row["x"]));
                for e in row["values"].as_array().into_iter().flatten() {
                    let (m, s) = mean_of(e);
                    v.extend([m, s]);
                }
                t.push_nums(&v);
            }
            let mut p = Table::new("harnack_scales", &["scale", "C"]);
            let mut cs: Vec<(f64, f64)> = rep
                .constants
                .iter()
                .filter_map(|(k, v)| k.strip_prefix("C@").and_then(|s| s.parse().ok()).map(|s: f64| (s, *v)))
                .collect();
            cs.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (s, c) in cs {
                p.push_nums(&[s, c]);
            }
            plots.push(p);
            reports.push(rep);
            detail = t;
        }
        ExperimentKind::Carleson => {
            let rep = verify_carleson(dom.unwrap(), f, g.q.as_ref().unwrap(), g.r.unwrap(), mc)?;
            let t = estimate_table(&rep, d);
            plots.push(Table { name: "carleson".into(), ..t.clone() });
            reports.push(rep);
            detail = t;
        }
        ExperimentKind::ExitBounds => {
            let radii = g.radii.clone().unwrap();
            let (rep, per) = verify_exit_scaling(dom.unwrap(), f, g.q.as_ref().unwrap(), &radii, g.rel_deltas.as_ref().unwrap(), mc)?;
            let mut t = Table::new("detail", &["r", "delta", "lower", "lower_se", "upper", "upper_se"]);
            let mut p = Table::new("exit_scaling", &["r", "delta_over_r", "lower_normalized", "upper_normalized"]);
            for pr in &per {
                let r = pr.get("r").unwrap_or(f64::NAN);
                let s = pr.get("scale_factor").unwrap_or(f64::NAN);
                for row in rows_of(pr, "estimates") {
                    let delta = row["delta"].as_f64().unwrap_or(f64::NAN);
                    let (lo, lo_se) = mean_of(&row["lower"]);
                    let (up, up_se) = mean_of(&row["upper"]);
                    t.push_nums(&[r, delta, lo, lo_se, up, up_se]);
                    p.push_nums(&[r, delta / r, lo / s, up / s]);
                }
            }
            reports.push(rep);
            reports.extend(per);
            plots.push(p);
            detail = t;
        }
        ExperimentKind::BhpBoundary | ExperimentKind::BhpInterior => {
            let domain = dom.unwrap();
            let mode = if cfg.experiment == ExperimentKind::BhpBoundary {
                Some(BhpMode::Boundary)
            } else {
                let b = match g.b {
                    Some(b) => Some(b),
                    None => {
                        let e = KernelEngine::new(f, &cfg.quadrature)?;
                        let scan = compensator_b_scan(&e, d, &[0.05, 0.2, 1.0], g.b_lattice.as_ref().unwrap())?;
                        let b = scan.get("b");
                        reports.push(scan);
                        b
                    }
                };
                b.map(|b| BhpMode::Interior { b })
            };
            let mut t = Table::new("detail", &["delta", "value", "se", "rate", "usable"]);
            if let Some(mode) = mode {
                let (rep, pts) = verify_bhp(
                    domain,
                    f,
                    mode,
                    g.q.as_ref().unwrap(),
                    g.r.unwrap(),
                    g.rel_deltas.as_ref().unwrap(),
                    mc,
                    g.slope_tol.unwrap(),
                )?;
                let mut p = Table::new("ray", &["log10_delta", "log10_value", "log10_rate", "rel_ci", "usable"]);
                for q in &pts {
                    let u = if q.usable { "1" } else { "0" };
                    t.push(vec![num(q.delta), num(q.value.mean), num(q.value.se), num(q.rate), u.into()]);
                    p.push(vec![
                        num(q.delta.log10()),
                        num(q.value.mean.log10()),
                        num(q.rate.log10()),
                        num(q.value.rel_ci()),
                        u.into(),
                    ]);
                }
                plots.push(p);
                reports.push(rep);
            }
            detail = t;
        }
        ExperimentKind::Gauge => {
            let domain = dom.unwrap();
            let u = Domain::cuboid(g.u_lo.clone().unwrap(), g.u_hi.clone().unwrap())?;
            let e = KernelEngine::new(f, &cfg.quadrature)?;
            let (x, y) = (g.x0.as_ref().unwrap(), g.y.as_ref().unwrap());
            let ge = estimate_3G_gauge(domain, &u, &e, x, y, mc, &cfg.gauge)?;
            let mut rep = BoundCheckReport::new("conditional-gauge");
            rep.constant("C3", ge.value.value)
                .constant("C3_se", ge.value.est_error)
                .constant("gauge_lower", ge.gauge_lower)
                .constant("gauge_lower_rigorous", ge.gauge_lower_rigorous)
                .constant("green_xy", ge.green_xy.mean)
                .constant("green_xy_se", ge.green_xy.se);
            rep.grid_entry("gauge", &ge);
            if ge.inconclusive {
                rep.constant("inconclusive", 1.0);
                rep.fail(Witness::new("inconclusive", y.clone(), ge.value.value));
            }
            if !(ge.gauge_lower > 0.0 && ge.gauge_lower <= 1.0) {
                rep.fail(Witness::new("gauge bound out of (0, 1]", y.clone(), ge.gauge_lower));
            }
            let mut t = Table::with_coords("detail", &[], "y", d, &["C3", "C3_se", "numerator", "numerator_se", "green_xy", "green_xy_se"]);
            let mut row = y.clone();
            row.extend([ge.value.value, ge.value.est_error, ge.numerator.mean, ge.numerator.se, ge.green_xy.mean, ge.green_xy.se]);
            t.push_nums(&row);
            reports.push(rep);
            detail = t;
        }
        ExperimentKind::GreenCompare => {
            let domain = dom.unwrap();
            let u = Domain::cuboid(g.u_lo.clone().unwrap(), g.u_hi.clone().unwrap())?;
            let e = KernelEngine::new(f, &cfg.quadrature)?;
            let x0 = g.x0.as_ref().unwrap();
            let cells = lattice_cells(x0, g.spacing.unwrap(), g.cell_half_width.unwrap());
            let (rep, _) = verify_green_comparability(domain, &u, &e, x0, &cells, mc, &cfg.gauge, g.c_min.unwrap())?;
            let mut t = Table::with_coords(
                "detail",
                &[],
                "c",
                d,
                &["ratio", "ratio_se", "g_free", "g_free_se", "g_killed", "g_killed_se", "g_subordinate_killed"],
            );
            let mut p = Table::new("green_ratio", &["distance", "ratio", "ratio_se"]);
            for row in rows_of(&rep, "cells") {
                let c = point_of(&row["center"]);
                let (r, rs) = mean_of(&row["ratio"]);
                let (gf, gfs) = mean_of(&row["g_free"]);
                let (gk, gks) = mean_of(&row["g_killed"]);
                let mut v = c.clone();
                v.extend([r, rs, gf, gfs, gk, gks, row["g_subordinate_killed"].as_f64().unwrap_or(f64::NAN)]);
                t.push_nums(&v);
                p.push_nums(&[dist(&c, x0), r, rs]);
            }
            plots.push(p);
            reports.push(rep);
            detail = t;
        }
    }
    let pass = !reports.is_empty() && reports.iter().all(|r| r.pass);
    // where the files land is not part of what was computed
    let mut provenance = cfg.clone();
    provenance.output = Default::default();
    let summary = Summary {
        experiment: cfg.experiment,
        check: cfg.experiment.check_id(),
        subordinator: &f.name,
        seed: mc.seed,
        pass,
        reports: &reports,
        conditions: plan.conditions.summary(),
        config: &provenance,
        version: env!("CARGO_PKG_VERSION"),
    };
    Ok(RunOutput {
        pass,
        summary: serde_json::to_value(&summary).expect("summary serializes"),
        detail,
        plots,
    })
}

fn estimate_table(rep: &BoundCheckReport, d: usize) -> Table {
    let mut t = Table::with_coords("detail", &[], "x", d, &["mean", "se"]);
    for row in rows_of(rep, "estimates") {
        let mut v = point_of(&row["x"]);
        let (m, s) = mean_of(row);
        v.extend([m, s]);
        t.push_nums(&v);
    }
    t
}

fn scan_table(rows: &[ScanRow], d: usize) -> Table {
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    header.extend((0..d).map(|i| format!("y{i}")));
    header.extend(["value", "envelope", "ratio"].map(String::from));
    let mut t = Table {
        name: "detail".into(),
        header,
        rows: vec![],
    };
    for r in rows {
        t.push_nums(&[r.x.clone(), r.y.clone(), vec![r.value, r.envelope, r.ratio]].concat());
    }
    t
}

fn ratio_table(rows: &[ScanRow], domain: &Domain) -> Table {
    let mut t = Table::new("ratios", &["r", "delta_x_over_r", "delta_y_over_r", "ratio"]);
    for row in rows {
        let r = dist(&row.x, &row.y);
        t.push_nums(&[r, domain.signed_distance(&row.x) / r, domain.signed_distance(&row.y) / r, row.ratio]);
    }
    t
}

/// Serialize every output, then write them; nothing touches the disk if
/// serialization fails.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<(), CliError> {
    let summary = serde_json::to_string_pretty(&out.summary).expect("summary serializes") + "\n";
    let detail = out.detail.to_csv()?;
    let plots: Vec<(String, String)> = out
        .plots
        .iter()
        .map(|t| Ok((format!("{}.csv", t.name), t.to_csv()?)))
        .collect::<Result<_, CliError>>()?;
    std::fs::create_dir_all(dir.join("plotdata"))?;
    std::fs::write(dir.join("summary.json"), summary)?;
    std::fs::write(dir.join("detail.csv"), detail)?;
    for (name, body) in plots {
        std::fs::write(dir.join("plotdata").join(name), body)?;
    }
    Ok(())
}
