//! Empirical checks of Harnack, Carleson, exit and boundary Harnack estimates.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::BernsteinFunction;
use crate::domain::{boundary_box, dist, kappa, BoundaryBox, Domain, DomainKind, Point};
use crate::error::{domain_err, Error, Result};
use crate::heat::HeatKernelEval;
use crate::kernels::{KernelEngine, KernelKind, KernelValue};
use crate::report::{BoundCheckReport, Witness};

use super::estimate::{harmonic_values, paired_occupation, Cell, Payoff};
use super::rng::{derive_seed, path_rng};
use super::walk::{Outcome, PathConfig, PathEnd, Process, Region, Walker};
use super::{z_score, MeanEstimate};

fn alive_exit(o: &Outcome) -> f64 {
    if o.exit_point().is_some() {
        1.0
    } else {
        0.0
    }
}

fn est_row(x: &[f64], v: &MeanEstimate) -> serde_json::Value {
    serde_json::json!({ "x": x, "mean": v.mean, "se": v.se })
}

/// Harnack constant `sup f / inf f` over `B(x0, r/2)` for exit payoffs of
/// disjoint far sets, at the scales `r/2, r, 2r`.
pub fn verify_harnack(domain: &Domain, f: &BernsteinFunction, x0: &[f64], r: f64, cfg: &PathConfig) -> Result<BoundCheckReport> {
    let scales = [r / 2.0, r, 2.0 * r];
    for &s in &scales {
        if !(s > 0.0 && s <= 1.0) || domain.signed_distance(x0) < s {
            return domain_err(format!("need B(x0, {s}) ⊂ D with radius at most 1"));
        }
    }
    let d = domain.d;
    let mut rep = BoundCheckReport::new("harnack");
    let mut cs = Vec::new();
    let mut rows = Vec::new();
    let mut conclusive = true;
    for (si, &s) in scales.iter().enumerate() {
        let u = Region::Set(Domain::ball(x0.to_vec(), s)?);
        let w = Walker::new(domain, &u, f, cfg, Process::Killed)?;
        let c0 = x0[0];
        let (a, b, c) = (x0.to_vec(), x0.to_vec(), x0.to_vec());
        let near = move |o: &Outcome| o.exit_point().map_or(0.0, |z| f64::from(dist(z, &a) < 2.0 * s));
        let right = move |o: &Outcome| o.exit_point().map_or(0.0, |z| f64::from(dist(z, &b) >= 2.0 * s && z[0] > c0));
        let left = move |o: &Outcome| o.exit_point().map_or(0.0, |z| f64::from(dist(z, &c) >= 2.0 * s && z[0] <= c0));
        let payoffs: [&Payoff; 3] = [&near, &right, &left];
        let mut pts = vec![x0.to_vec()];
        for i in 0..d {
            for sg in [-1.0, 1.0] {
                let mut p = x0.to_vec();
                p[i] += sg * 0.45 * s;
                pts.push(p);
            }
        }
        let mut vals: Vec<Vec<MeanEstimate>> = Vec::new();
        for (pi, p) in pts.iter().enumerate() {
            let (v, _) = harmonic_values(&w, p, derive_seed(cfg.seed, (si * 100 + pi) as u64), &payoffs)?;
            rows.push(serde_json::json!({ "scale": s, "x": p, "values": v }));
            vals.push(v);
        }
        let mut c_scale: f64 = 1.0;
        for j in 0..payoffs.len() {
            let col: Vec<&MeanEstimate> = vals.iter().map(|v| &v[j]).collect();
            let lo = col.iter().map(|m| m.mean).fold(f64::INFINITY, f64::min);
            let hi = col.iter().map(|m| m.mean).fold(0.0, f64::max);
            if col.iter().any(|m| m.mean - m.ci95() <= 0.0) {
                conclusive = false;
            }
            c_scale = c_scale.max(hi / lo);
        }
        rep.constant(&format!("C@{s}"), c_scale);
        cs.push(c_scale);
    }
    let cmax = cs.iter().cloned().fold(0.0, f64::max);
    let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
    rep.constant("C_max", cmax);
    rep.constant("scale_spread", cmax / cmin);
    rep.grid_entry("estimates", rows);
    if !conclusive {
        rep.constant("inconclusive", 1.0);
        rep.fail(Witness::new("inconclusive", x0.to_vec(), 0.0));
    }
    if !cmax.is_finite() || cmax / cmin > 2.0 {
        rep.fail(Witness::new("scale-spread", scales.to_vec(), cmax / cmin));
    }
    Ok(rep)
}

/// Carleson constant `sup f(x)/f(x0)` over `D ∩ B(Q, r/2)` with `ρ_Q(x0) = r/2`,
/// for `f` the probability of leaving `D_Q(r, r)` alive.
pub fn verify_carleson(domain: &Domain, f: &BernsteinFunction, q: &[f64], r: f64, cfg: &PathConfig) -> Result<BoundCheckReport> {
    let b = boundary_box(domain, q, r, r)?;
    let w = Walker::new(domain, &Region::Cylinder(b.clone()), f, cfg, Process::Killed)?;
    let x0 = b.point_at_height(r / 2.0 * (1.0 - 1e-9));
    let mut xs: Vec<Point> = [0.05, 0.15, 0.3, 0.45].iter().map(|h| b.point_at_height(h * r)).collect();
    let side = (0..domain.d).find(|&i| i != b.axis).unwrap_or(0);
    for h in [0.05, 0.2, 0.35] {
        let mut p = b.point_at_height(h * r);
        p[side] += 0.3 * r;
        xs.push(p);
    }
    let payoff: &Payoff = &alive_exit;
    let (v0, _) = harmonic_values(&w, &x0, derive_seed(cfg.seed, 0), &[payoff])?;
    let v0 = v0[0];
    let mut rep = BoundCheckReport::new("carleson");
    let mut rows = vec![est_row(&x0, &v0)];
    let mut c: f64 = 0.0;
    let mut c_upper: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let (v, _) = harmonic_values(&w, x, derive_seed(cfg.seed, i as u64 + 1), &[payoff])?;
        let v = v[0];
        rows.push(est_row(x, &v));
        c = c.max(v.mean / v0.mean);
        c_upper = c_upper.max((v.mean + v.ci95()) / (v0.mean - v0.ci95()));
    }
    rep.constant("C", c);
    rep.constant("C_upper95", c_upper);
    rep.constant("f_x0", v0.mean);
    rep.grid_entry("estimates", rows);
    if !(v0.mean - v0.ci95() > 0.0) || !c_upper.is_finite() {
        rep.constant("inconclusive", 1.0);
        rep.fail(Witness::new("reference value not resolved", x0, v0.mean));
    }
    Ok(rep)
}

/// Least squares through the origin: `(K, se(K), R²)`.
fn fit_through_origin(xs: &[f64], ys: &[MeanEstimate]) -> (f64, f64, f64) {
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let k = xs.iter().zip(ys).map(|(x, y)| x * y.mean).sum::<f64>() / sxx;
    let se = xs.iter().zip(ys).map(|(x, y)| x * x * y.se * y.se).sum::<f64>().sqrt() / sxx;
    let mean = ys.iter().map(|y| y.mean).sum::<f64>() / ys.len() as f64;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y.mean - k * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y.mean - mean).powi(2)).sum();
    (k, se, 1.0 - ss_res / ss_tot)
}

/// `r^{-3} φ'(r^{-2}) / φ(r^{-2})`.
pub fn exit_scale_factor(f: &BernsteinFunction, r: f64) -> f64 {
    let l = r.powi(-2);
    f.phi_prime(l) / (r.powi(3) * f.phi(l))
}

/// Exit probabilities from `D_Q(r/2, r/2)` into the layer above it and into
/// `D_Q(2r, 2r)`, on points `Q + δ n` with `δ = rel·r`, `rel < 1/8`.
pub fn verify_exit_bounds(
    domain: &Domain,
    f: &BernsteinFunction,
    q: &[f64],
    r: f64,
    rel_deltas: &[f64],
    cfg: &PathConfig,
) -> Result<BoundCheckReport> {
    let c11 = domain
        .c11()
        .ok_or_else(|| Error::Unsupported("exit bounds need a C^{1,1} domain".into()))?;
    if r > c11.r / (2.0 * kappa(c11.lambda)) {
        return domain_err(format!("r = {r} exceeds R/(2κ)"));
    }
    if rel_deltas.len() < 3 || rel_deltas.iter().any(|&a| !(a > 0.0 && a < 0.125)) {
        return domain_err("need at least three relative heights in (0, 1/8)");
    }
    let u = boundary_box(domain, q, r / 2.0, r / 2.0)?;
    let layer = move |b: &BoundaryBox, z: &[f64]| {
        let rho = b.rho(z);
        (1.5 * r..2.0 * r).contains(&rho) && crate::domain::norm(&b.tangential(z)) < r
    };
    let big = boundary_box(domain, q, 2.0 * r, 2.0 * r)?;
    let w = Walker::new(domain, &Region::Cylinder(u.clone()), f, cfg, Process::Killed)?;
    let ul = u.clone();
    let lower = move |o: &Outcome| o.exit_point().map_or(0.0, |z| f64::from(layer(&ul, z)));
    let upper = move |o: &Outcome| o.exit_point().map_or(0.0, |z| f64::from(big.contains(z)));
    let payoffs: [&Payoff; 2] = [&lower, &upper];
    let mut deltas = Vec::new();
    let mut lo = Vec::new();
    let mut up = Vec::new();
    let mut rows = Vec::new();
    let mut rep = BoundCheckReport::new("exit-bounds");
    let mut min_events = f64::INFINITY;
    for (i, &a) in rel_deltas.iter().enumerate() {
        let x = u.point_at_height(a * r);
        let (v, _) = harmonic_values(&w, &x, derive_seed(cfg.seed, i as u64), &payoffs)?;
        min_events = min_events.min(v[0].mean * v[0].n as f64);
        if v[0].mean > v[1].mean {
            rep.fail(Witness::new("lower region exceeds upper", x.clone(), v[0].mean - v[1].mean));
        }
        rows.push(serde_json::json!({ "delta": a * r, "lower": v[0], "upper": v[1] }));
        deltas.push(a * r);
        lo.push(v[0]);
        up.push(v[1]);
    }
    let s = exit_scale_factor(f, r);
    let (kl, kl_se, r2l) = fit_through_origin(&deltas, &lo);
    let (ku, ku_se, r2u) = fit_through_origin(&deltas, &up);
    rep.constant("r", r);
    rep.constant("scale_factor", s);
    rep.constant("K_lower", kl);
    rep.constant("K_lower_se", kl_se);
    rep.constant("K_upper", ku);
    rep.constant("K_upper_se", ku_se);
    rep.constant("c_lower", kl / s);
    rep.constant("c_lower_se", kl_se / s);
    rep.constant("c_upper", ku / s);
    rep.constant("c_upper_se", ku_se / s);
    rep.constant("r2_lower", r2l);
    rep.constant("r2_upper", r2u);
    rep.constant("min_lower_events", min_events);
    rep.grid_entry("estimates", rows);
    if min_events < 10.0 {
        rep.constant("inconclusive", 1.0);
        rep.fail(Witness::new("insufficient exit events", q.to_vec(), min_events));
    }
    for (name, r2) in [("lower", r2l), ("upper", r2u)] {
        if !(r2 > 0.95) {
            rep.fail(Witness::new(format!("linearity {name}"), vec![r], r2));
        }
    }
    Ok(rep)
}

/// [`verify_exit_bounds`] at several radii; the normalized constants
/// `K/(r^{-3}φ'/φ)` must agree within three standard errors.
pub fn verify_exit_scaling(
    domain: &Domain,
    f: &BernsteinFunction,
    q: &[f64],
    radii: &[f64],
    rel_deltas: &[f64],
    cfg: &PathConfig,
) -> Result<(BoundCheckReport, Vec<BoundCheckReport>)> {
    let mut per = Vec::new();
    for (i, &r) in radii.iter().enumerate() {
        per.push(verify_exit_bounds(domain, f, q, r, rel_deltas, &cfg.with_seed(derive_seed(cfg.seed, 1000 + i as u64)))?);
    }
    let mut rep = BoundCheckReport::new("exit-scaling");
    rep.pass = per.iter().all(|p| p.pass);
    for which in ["lower", "upper"] {
        let est: Vec<MeanEstimate> = per
            .iter()
            .map(|p| MeanEstimate {
                mean: p.get(&format!("c_{which}")).unwrap_or(f64::NAN),
                se: p.get(&format!("c_{which}_se")).unwrap_or(f64::NAN),
                n: 0,
            })
            .collect();
        let mut zmax: f64 = 0.0;
        for i in 0..est.len() {
            for j in i + 1..est.len() {
                zmax = zmax.max(z_score(&est[i], &est[j]));
            }
        }
        rep.constant(&format!("z_{which}"), zmax);
        if !(zmax <= 3.0) {
            rep.fail(Witness::new(format!("scaling {which}"), radii.to_vec(), zmax));
        }
    }
    for p in &per {
        let r = p.get("r").unwrap_or(f64::NAN);
        for k in ["c_lower", "c_upper", "r2_lower", "r2_upper"] {
            rep.constant(&format!("{k}@{r}"), p.get(k).unwrap_or(f64::NAN));
        }
    }
    Ok((rep, per))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum BhpMode {
    /// Near `∂D`; the decay rate is `δ_D`.
    Boundary,
    /// Near `∂E` for the interior subset `E` of `D`; the rate is
    /// `φ(δ_E^{-2})^{-1/2}`. `b` is the scanned compensator constant.
    Interior { b: f64 },
}

/// One point of a BHP ray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayPoint {
    pub delta: f64,
    pub value: MeanEstimate,
    pub rate: f64,
    pub usable: bool,
}

/// Weighted fit of `ln y` on `ln x`, weights `1/var(ln y)`; the slope error
/// is inflated by the residual scatter when it exceeds the noise.
fn log_log_fit(xs: &[f64], ys: &[MeanEstimate]) -> (f64, f64) {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.mean.ln()).collect();
    let w: Vec<f64> = ys.iter().map(|y| (y.mean / y.se.max(1e-300)).powi(2)).collect();
    let sw: f64 = w.iter().sum();
    let mx = lx.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ly.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = lx.iter().zip(&w).map(|(x, w)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).zip(&w).map(|((x, y), w)| w * (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let chi2: f64 = lx
        .iter()
        .zip(&ly)
        .zip(&w)
        .map(|((x, y), w)| w * (y - my - slope * (x - mx)).powi(2))
        .sum();
    let dof = (xs.len() as f64 - 2.0).max(1.0);
    (slope, (chi2 / dof).max(1.0).sqrt() / sxx.sqrt())
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Decay exponent of a nonnegative harmonic function on a ray approaching
/// `∂D` (boundary mode) or `∂E` (interior mode). `rel_deltas` are distances
/// in units of `r`.
#[allow(clippy::too_many_arguments)]
pub fn verify_bhp(
    domain: &Domain,
    f: &BernsteinFunction,
    mode: BhpMode,
    q: &[f64],
    r: f64,
    rel_deltas: &[f64],
    cfg: &PathConfig,
    slope_tol: f64,
) -> Result<(BoundCheckReport, Vec<RayPoint>)> {
    let (region, ray, payoff, rate, cond): (Region, Box<dyn Fn(f64) -> Point>, Box<Payoff>, Box<dyn Fn(f64) -> f64>, &str) =
        match mode {
            BhpMode::Boundary => {
                if domain.c11().is_none() {
                    return Err(Error::Unsupported("boundary BHP needs a C^{1,1} domain".into()));
                }
                let b = boundary_box(domain, q, r, r)?;
                let bb = b.clone();
                (
                    Region::Cylinder(b),
                    Box::new(move |d| bb.point_at_height(d)),
                    Box::new(alive_exit),
                    Box::new(|d| d),
                    "bhp-boundary",
                )
            }
            BhpMode::Interior { b } => {
                let e = domain
                    .interior_subset
                    .as_deref()
                    .cloned()
                    .ok_or_else(|| Error::Invalid("interior BHP needs an interior subset E".into()))?;
                let (c, rad) = match &e.kind {
                    DomainKind::Ball { center, radius } => (center.clone(), *radius),
                    _ => return Err(Error::Unsupported("interior subset must be a ball".into())),
                };
                if (dist(q, &c) - rad).abs() > 1e-9 * rad.max(1.0) {
                    return domain_err("Q must lie on the boundary of E");
                }
                let rr = e.c11().map(|k| k.r).unwrap_or(rad);
                let limit = domain.signed_distance(q).min(rr) / (b + 2.0);
                if !(b > 2.0) || r > limit {
                    return domain_err(format!("need b > 2 and r ≤ (δ_D(Q) ∧ R)/(b+2) = {limit}"));
                }
                let n: Point = c.iter().zip(q).map(|(a, b)| (a - b) / rad).collect();
                let q0 = q.to_vec();
                let ball = Domain::ball(q.to_vec(), r)?;
                let e2 = e.clone();
                let g = f.clone();
                (
                    Region::Intersection(vec![Region::Set(e), Region::Set(ball)]),
                    Box::new(move |d| q0.iter().zip(&n).map(|(a, b)| a + d * b).collect()),
                    Box::new(move |o: &Outcome| o.exit_point().map_or(0.0, |z| f64::from(e2.contains(z)))),
                    Box::new(move |d: f64| g.phi(d.powi(-2)).powf(-0.5)),
                    "bhp-interior",
                )
            }
        };
    let w = Walker::new(domain, &region, f, cfg, Process::Killed)?;
    let mut pts = Vec::new();
    for (i, &a) in rel_deltas.iter().enumerate() {
        if !(a > 0.0 && a < 0.5) {
            return domain_err("ray distances must lie in (0, r/2)");
        }
        let x = ray(a * r);
        let (v, _) = harmonic_values(&w, &x, derive_seed(cfg.seed, i as u64), &[payoff.as_ref()])?;
        pts.push(RayPoint {
            delta: a * r,
            value: v[0],
            rate: rate(a * r),
            usable: v[0].mean > 0.0 && v[0].rel_ci() <= 0.10,
        });
    }
    let good: Vec<&RayPoint> = pts.iter().filter(|p| p.usable).collect();
    let mut rep = BoundCheckReport::new(cond);
    rep.constant("n_usable", good.len() as f64);
    rep.grid_entry("ray", &pts);
    let span = if good.is_empty() {
        0.0
    } else {
        let lo = good.iter().map(|p| p.delta).fold(f64::INFINITY, f64::min);
        let hi = good.iter().map(|p| p.delta).fold(0.0, f64::max);
        (hi / lo).log10()
    };
    rep.constant("decades", span);
    if good.len() < 5 || span < 1.0 {
        rep.constant("inconclusive", 1.0);
        rep.fail(Witness::new("too few usable ray points", vec![good.len() as f64], span));
        return Ok((rep, pts));
    }
    let xs: Vec<f64> = good.iter().map(|p| p.delta).collect();
    let ys: Vec<MeanEstimate> = good.iter().map(|p| p.value).collect();
    let (slope, se) = log_log_fit(&xs, &ys);
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let lr: Vec<f64> = good.iter().map(|p| p.rate.ln()).collect();
    let expected = ols_slope(&lx, &lr);
    let mut cmax: f64 = 1.0;
    for a in &good {
        for b in &good {
            cmax = cmax.max((a.value.mean / a.rate) / (b.value.mean / b.rate));
        }
    }
    rep.constant("slope", slope);
    rep.constant("slope_se", se);
    rep.constant("expected_slope", expected);
    rep.constant("bhp_constant", cmax);
    if !((slope - expected).abs() <= slope_tol) {
        rep.fail(Witness::new("slope", vec![expected], slope));
    }
    Ok((rep, pts))
}

/// The two decay exponents must differ by at least `z_min` standard errors.
pub fn compare_bhp_slopes(boundary: &BoundCheckReport, interior: &BoundCheckReport, z_min: f64) -> BoundCheckReport {
    let g = |r: &BoundCheckReport, k: &str| r.get(k).unwrap_or(f64::NAN);
    let a = MeanEstimate { mean: g(boundary, "slope"), se: g(boundary, "slope_se"), n: 0 };
    let b = MeanEstimate { mean: g(interior, "slope"), se: g(interior, "slope_se"), n: 0 };
    let z = z_score(&a, &b);
    let mut rep = BoundCheckReport::new("bhp-rate-contrast");
    rep.constant("slope_boundary", a.mean);
    rep.constant("slope_interior", b.mean);
    rep.constant("z", z);
    if !(z >= z_min) {
        rep.fail(Witness::new("slopes not separated", vec![a.mean, b.mean], z));
    }
    rep
}

/// `P_x(τ(x) = ζ)` for `τ(x)` the exit time of `B(x, δ_D(x)/2)`; reports
/// the smallest value as `delta_star`.
pub fn estimate_delta_star(domain: &Domain, f: &BernsteinFunction, xs: &[Point], cfg: &PathConfig) -> Result<BoundCheckReport> {
    let mut rep = BoundCheckReport::new("killing-inside-ball");
    let mut best: f64 = 1.0;
    let mut rows = Vec::new();
    let died: &Payoff = &|o: &Outcome| f64::from(matches!(o, Outcome::DiedInside { .. }));
    for (i, x) in xs.iter().enumerate() {
        let rho = domain.signed_distance(x);
        let u = Region::Set(Domain::ball(x.clone(), rho / 2.0)?);
        let w = Walker::new(domain, &u, f, cfg, Process::Killed)?;
        let (v, _) = harmonic_values(&w, x, derive_seed(cfg.seed, i as u64), &[died])?;
        rows.push(est_row(x, &v[0]));
        best = best.min(v[0].mean);
        if !(v[0].mean - v[0].ci95() > 0.0) {
            rep.fail(Witness::new("no deaths resolved", x.clone(), v[0].mean));
        }
    }
    rep.constant("delta_star", best);
    rep.grid_entry("estimates", rows);
    Ok(rep)
}

/// Result of the conditional gauge estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeEstimate {
    /// `Ĉ₃`, with its standard error as `est_error`.
    pub value: KernelValue,
    pub numerator: MeanEstimate,
    /// `Ĝ^X_U(x, y)` used as the normalizer.
    pub green_xy: MeanEstimate,
    /// `e^{-Ĉ₃}`.
    pub gauge_lower: f64,
    /// `e^{-2 ln 2 · Ĉ₃}`, valid wherever `|F| ≤ 1/2`.
    pub gauge_lower_rigorous: f64,
    pub inconclusive: bool,
}

/// Gauge estimate parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaugeConfig {
    /// Independent path pairs for the double occupation integral.
    pub n_pairs: usize,
    /// Half-width of the cell around `y` for `Ĝ^X_U(x, y)`.
    pub cell_half_width: f64,
    pub b: f64,
}

impl Default for GaugeConfig {
    fn default() -> Self {
        GaugeConfig {
            n_pairs: 2000,
            cell_half_width: 0.01,
            b: 2.5,
        }
    }
}

/// Draw one occupation point per path, with probability proportional to
/// the time spent there, plus the path's total time in `U`.
fn occupation_draws(w: &Walker, x: &[f64], seed: u64, n: usize) -> Vec<(Point, f64)> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut pick = path_rng(derive_seed(seed, 77), i);
            let mut total = 0.0;
            let mut chosen = x.to_vec();
            let _: PathEnd = w.walk(x, seed, i, |z, h, _| {
                total += h;
                if pick.random::<f64>() * total < h {
                    chosen.copy_from_slice(z);
                }
            });
            (chosen, total)
        })
        .collect()
}

fn check_gauge_region(domain: &Domain, u: &Domain, b: f64) -> Result<()> {
    let (lo, hi) = match &u.kind {
        DomainKind::Box { lo, hi } => (lo, hi),
        _ => return Err(Error::Unsupported("the gauge region must be a box".into())),
    };
    let d = lo.len();
    let gap = (0..1usize << d)
        .map(|m| {
            let c: Point = (0..d).map(|i| if m >> i & 1 == 1 { hi[i] } else { lo[i] }).collect();
            domain.signed_distance(&c)
        })
        .fold(f64::INFINITY, f64::min);
    if gap < (b + 2.0) * u.diameter() {
        return domain_err(format!(
            "dist(U, ∂D) = {gap} is below (b+2)·diam(U) = {}",
            (b + 2.0) * u.diameter()
        ));
    }
    Ok(())
}

/// `Ĉ₃ = ∬ G^X_U(x,z) G^X_U(w,y) / G^X_U(x,y) · |F(z,w)| J^X(z,w) dz dw`
/// with `deficit(z, w) = |F| J^X = J^X - J^{Y^D}`.
#[allow(clippy::too_many_arguments)]
pub fn gauge_with(
    domain: &Domain,
    u: &Domain,
    f: &BernsteinFunction,
    x: &[f64],
    y: &[f64],
    cfg: &PathConfig,
    gc: &GaugeConfig,
    deficit: &(dyn Fn(&[f64], &[f64]) -> Result<f64> + Sync),
) -> Result<GaugeEstimate> {
    check_gauge_region(domain, u, gc.b)?;
    let region = Region::Set(u.clone());
    let w = Walker::new(domain, &region, f, cfg, Process::Free)?;
    w.check_start(x)?;
    w.check_start(y)?;
    let from_x = occupation_draws(&w, x, derive_seed(cfg.seed, 1), gc.n_pairs);
    let from_y = occupation_draws(&w, y, derive_seed(cfg.seed, 2), gc.n_pairs);
    let terms: Vec<f64> = from_x
        .par_iter()
        .zip(&from_y)
        .map(|((z, tx), (v, ty))| Ok(tx * ty * deficit(z, v)?))
        .collect::<Result<_>>()?;
    let num = MeanEstimate::from_samples(&terms);
    let cell = Cell { center: y.to_vec(), half_width: gc.cell_half_width };
    let occ = paired_occupation(domain, &region, f, x, &[cell], &cfg.with_seed(derive_seed(cfg.seed, 3)))?;
    let g = occ.free.density[0];
    let c3 = if num.mean == 0.0 { 0.0 } else { num.mean / g.mean };
    let rel = if num.mean == 0.0 {
        0.0
    } else {
        ((num.se / num.mean).powi(2) + (g.se / g.mean).powi(2)).sqrt()
    };
    Ok(GaugeEstimate {
        value: KernelValue {
            value: c3,
            est_error: c3 * rel,
            kind: KernelKind::GU,
        },
        numerator: num,
        green_xy: g,
        gauge_lower: (-c3).exp(),
        gauge_lower_rigorous: (-2.0 * std::f64::consts::LN_2 * c3).exp(),
        inconclusive: !(rel <= 0.5) || !(g.mean > 0.0),
    })
}

/// [`gauge_with`] using the quadrature deficit `J^X - J^{Y^D}`.
#[allow(clippy::too_many_arguments)]
#[allow(non_snake_case)]
pub fn estimate_3G_gauge(
    domain: &Domain,
    u: &Domain,
    engine: &KernelEngine,
    x: &[f64],
    y: &[f64],
    cfg: &PathConfig,
    gc: &GaugeConfig,
) -> Result<GaugeEstimate> {
    let h = HeatKernelEval::new(domain)?;
    let def = |z: &[f64], w: &[f64]| engine.jump_deficit(&h, z, w).map(|v| v.value);
    gauge_with(domain, u, &engine.f, x, y, cfg, gc, &def)
}

/// Occupation ratios `Ĝ^{Y^D}_U / Ĝ^X_U` on the given cells, the quadrature
/// comparison `G^{Y^U} ≤ Ĝ^{Y^D}_U`, and the gauge lower bound at the
/// cell of smallest ratio.
#[allow(clippy::too_many_arguments)]
pub fn verify_green_comparability(
    domain: &Domain,
    u: &Domain,
    engine: &KernelEngine,
    x0: &[f64],
    cells: &[Cell],
    cfg: &PathConfig,
    gc: &GaugeConfig,
    c_min: f64,
) -> Result<(BoundCheckReport, GaugeEstimate)> {
    check_gauge_region(domain, u, gc.b)?;
    let region = Region::Set(u.clone());
    let occ = paired_occupation(domain, &region, &engine.f, x0, cells, cfg)?;
    let hu = HeatKernelEval::new(u)?;
    let mut rep = BoundCheckReport::new("green-comparability");
    let mut rows = Vec::new();
    let mut imin = 0;
    for (j, c) in cells.iter().enumerate() {
        let r = occ.ratio[j];
        let gk = occ.killed.density[j];
        let gyu = engine.green_yd(&hu, x0, &c.center)?;
        rows.push(serde_json::json!({
            "center": c.center, "ratio": r, "g_free": occ.free.density[j],
            "g_killed": gk, "g_subordinate_killed": gyu.value,
        }));
        if r.mean < occ.ratio[imin].mean {
            imin = j;
        }
        if r.mean > 1.0 + 3.0 * r.se {
            rep.fail(Witness::new("ratio above 1", c.center.clone(), r.mean));
        }
        if gyu.value > gk.mean + 3.0 * gk.se {
            rep.fail(Witness::new("G^{Y^U} exceeds occupation estimate", c.center.clone(), gyu.value - gk.mean));
        }
    }
    let rmin = occ.ratio[imin];
    rep.constant("C", rmin.mean);
    rep.constant("C_se", rmin.se);
    if !(rmin.mean > c_min) {
        rep.fail(Witness::new("ratio lower bound", cells[imin].center.clone(), rmin.mean));
    }
    let gauge = estimate_3G_gauge(domain, u, engine, x0, &cells[imin].center, cfg, gc)?;
    rep.constant("C3", gauge.value.value);
    rep.constant("gauge_lower", gauge.gauge_lower);
    rep.constant("gauge_lower_rigorous", gauge.gauge_lower_rigorous);
    if gauge.gauge_lower > rmin.mean + 3.0 * rmin.se {
        rep.fail(Witness::new("gauge bound above observed ratio", cells[imin].center.clone(), gauge.gauge_lower));
    }
    if gauge.inconclusive {
        rep.constant("inconclusive", 1.0);
    }
    rep.grid_entry("cells", rows);
    Ok((rep, gauge))
}

/// The 20 corner and edge points of a `3×3×3` lattice of spacing `a`
/// around `x0`, as cells of half-width `hw`.
pub fn lattice_cells(x0: &[f64], a: f64, hw: f64) -> Vec<Cell> {
    let mut out = Vec::new();
    let offs = [-1i32, 0, 1];
    for &i in &offs {
        for &j in &offs {
            for &k in &offs {
                let nz = [i, j, k].iter().filter(|v| **v != 0).count();
                if nz >= 2 {
                    let o = [i, j, k];
                    let c: Point = x0.iter().zip(o).map(|(x, s)| x + a * s as f64).collect();
                    out.push(Cell { center: c, half_width: hw });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::catalog;

    #[test]
    fn through_origin_fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0];
        let ys: Vec<MeanEstimate> = xs.iter().map(|x| MeanEstimate { mean: 2.0 * x, se: 0.1, n: 1 }).collect();
        let (k, _, r2) = fit_through_origin(&xs, &ys);
        assert!((k - 2.0).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn log_log_fit_recovers_power() {
        let xs = [0.01, 0.02, 0.05, 0.1, 0.2];
        let ys: Vec<MeanEstimate> = xs.iter().map(|x: &f64| MeanEstimate { mean: 3.0 * x.sqrt(), se: 0.01, n: 1 }).collect();
        let (s, _) = log_log_fit(&xs, &ys);
        assert!((s - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stable_scale_factor_is_alpha_over_r() {
        let f = catalog("stable:0.5").unwrap();
        for r in [0.1, 0.2, 0.4] {
            assert!((exit_scale_factor(&f, r) - 0.5 / r).abs() < 1e-12);
        }
    }

    #[test]
    fn lattice_has_twenty_cells() {
        let c = lattice_cells(&[0.0, 0.0, 2.0], 0.05, 0.01);
        assert_eq!(c.len(), 20);
        assert!(c.iter().all(|c| dist(&c.center, &[0.0, 0.0, 2.0]) > 0.06));
    }

    #[test]
    fn zero_deficit_gives_unit_gauge() {
        let d = Domain::half_space(3).unwrap();
        let u = Domain::cuboid(vec![-0.05, -0.05, 1.95], vec![0.05, 0.05, 2.05]).unwrap();
        let f = catalog("stable:0.5").unwrap();
        let cfg = PathConfig { n_paths: 500, h: 1e-3, ..Default::default() };
        let gc = GaugeConfig { n_pairs: 200, ..Default::default() };
        let zero = |_: &[f64], _: &[f64]| Ok(0.0);
        let g = gauge_with(&d, &u, &f, &[0.0, 0.0, 2.0], &[0.03, 0.0, 2.0], &cfg, &gc, &zero).unwrap();
        assert_eq!(g.value.value, 0.0);
        assert_eq!(g.gauge_lower, 1.0);
    }

    #[test]
    fn gauge_region_too_close_is_rejected() {
        let d = Domain::half_space(3).unwrap();
        let u = Domain::cuboid(vec![-0.05, -0.05, 0.2], vec![0.05, 0.05, 0.3]).unwrap();
        assert!(check_gauge_region(&d, &u, 2.5).is_err());
    }

    #[test]
    fn interior_bhp_checks_radius() {
        let e = Domain::ball(vec![0.0; 3], 0.5).unwrap();
        let d = Domain::cuboid(vec![-2.0; 3], vec![2.0; 3]).unwrap().with_interior_subset(e).unwrap();
        let f = catalog("stable:0.5").unwrap();
        let r = verify_bhp(&d, &f, BhpMode::Interior { b: 2.5 }, &[0.5, 0.0, 0.0], 0.2, &[0.01], &PathConfig::default(), 0.15);
        assert!(r.is_err());
    }
}
