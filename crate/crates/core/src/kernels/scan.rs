//! Grid scans of kernels against their two-sided envelopes and the
//! comparison bounds for `J^{Y^D}` and `F`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KernelEngine, KernelValue};
use crate::bernstein::{verify_conditions, ConditionGrid};
use crate::bernstein::{green_envelope, jump_envelope, A1Convention};
use crate::bernstein::BernsteinFunction;
use crate::domain::{dist, Domain, DomainKind, Point};
use crate::error::{Error, Result};
use crate::heat::HeatKernelEval;
use crate::quad::{linspace, logspace};
use crate::report::{BoundCheckReport, Witness};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub x: Point,
    pub y: Point,
    pub value: f64,
    pub envelope: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ScanSummary {
    pub C_lower: f64,
    pub C_upper: f64,
    pub n_points: usize,
    pub worst_pair: (Point, Point),
}

impl ScanSummary {
    /// Smallest `C` with all ratios in `[1/C, C]`.
    pub fn c(&self) -> f64 {
        self.C_upper.max(1.0 / self.C_lower)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeKind {
    /// `(δ_x/r∧1)(δ_y/r∧1) φ'(r^{-2})/(r^{d+2}φ(r^{-2})²)`
    Green,
    /// `(δ_x/r∧1)(δ_y/r∧1) φ'(r^{-2})/r^{d+2}`
    Jump,
    /// `(δ_x/r₁∧1)(δ_y/r₁∧1) μ(r²)/r^{d-2}`; graph domains use `r₁ = r`.
    LargeScaleJump(A1Convention),
}

pub fn envelope(f: &BernsteinFunction, d: usize, kind: EnvelopeKind, dx: f64, dy: f64, r: f64) -> f64 {
    let cut = |r1: f64| (dx / r1).min(1.0) * (dy / r1).min(1.0);
    match kind {
        EnvelopeKind::Green => cut(r) * green_envelope(f, d, r),
        EnvelopeKind::Jump => cut(r) * jump_envelope(f, d, r),
        EnvelopeKind::LargeScaleJump(c) => cut(c.apply(r)) * f.mu(r * r) / r.powi(d as i32 - 2),
    }
}

/// Half-space pairs `x = (0, …, a·r)`, `y = x + r(sin θ, 0, …, cos θ)` over
/// `r ∈ [r_lo, r_hi]`, `a ∈ [0.01, 10]` and `θ` from 0 up to the angle keeping
/// `δ_y ≥ 0.01 r`, all log or linearly spaced with `n_r, n_a, n_theta` points.
pub fn half_space_pairs(d: usize, r_lo: f64, r_hi: f64, n_r: usize, n_a: usize, n_theta: usize) -> Vec<(Point, Point)> {
    let mut out = vec![];
    for &r in &logspace(r_lo, r_hi, n_r) {
        for &a in &logspace(0.01, 10.0, n_a) {
            let th_max = (0.01 - a).max(-1.0).acos();
            for &th in &linspace(0.0, th_max, n_theta) {
                let mut x = vec![0.0; d];
                x[d - 1] = a * r;
                let mut y = x.clone();
                y[0] += r * th.sin();
                y[d - 1] += r * th.cos();
                y[d - 1] = y[d - 1].max(0.01 * r);
                out.push((x, y));
            }
        }
    }
    out
}

fn eval_kind(e: &KernelEngine, h: &HeatKernelEval, kind: EnvelopeKind, x: &[f64], y: &[f64]) -> Result<KernelValue> {
    match kind {
        EnvelopeKind::Green => e.green_yd(h, x, y),
        _ => e.jump_yd(h, x, y),
    }
}

/// Ratio of the quadrature kernel to its envelope on every pair.
pub fn envelope_scan(
    e: &KernelEngine,
    h: &HeatKernelEval,
    pairs: &[(Point, Point)],
    kind: EnvelopeKind,
) -> Result<(Vec<ScanRow>, ScanSummary)> {
    let d = h.d();
    let rows: Vec<ScanRow> = pairs
        .par_iter()
        .map(|(x, y)| {
            let v = eval_kind(e, h, kind, x, y)?;
            let env = envelope(
                &e.f,
                d,
                kind,
                h.domain.signed_distance(x),
                h.domain.signed_distance(y),
                dist(x, y),
            );
            Ok(ScanRow {
                x: x.clone(),
                y: y.clone(),
                value: v.value,
                envelope: env,
                ratio: v.value / env,
            })
        })
        .collect::<Result<_>>()?;
    Ok((rows.clone(), summarize(&rows)))
}

pub fn summarize(rows: &[ScanRow]) -> ScanSummary {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut worst = (vec![], vec![]);
    let mut worst_dev = 0.0;
    for r in rows {
        lo = lo.min(r.ratio);
        hi = hi.max(r.ratio);
        let dev = r.ratio.max(1.0 / r.ratio);
        if dev > worst_dev {
            worst_dev = dev;
            worst = (r.x.clone(), r.y.clone());
        }
    }
    ScanSummary {
        C_lower: lo,
        C_upper: hi,
        n_points: rows.len(),
        worst_pair: worst,
    }
}

/// Header `x, y, value, envelope, ratio` with points `;`-separated.
pub fn rows_to_csv(rows: &[ScanRow]) -> String {
    let pt = |p: &[f64]| p.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(";");
    let mut s = String::from("x,y,value,envelope,ratio\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{:e},{:e},{:e}\n",
            pt(&r.x),
            pt(&r.y),
            r.value,
            r.envelope,
            r.ratio
        ));
    }
    s
}

/// Center plus the points `x0 ± ρ e_i` for `ρ ∈ {r/2, 0.95 r}`.
pub fn ball_points(x0: &[f64], r: f64) -> Vec<Point> {
    let mut v = vec![x0.to_vec()];
    for i in 0..x0.len() {
        for &rho in &[0.5 * r, 0.95 * r] {
            for s in [-1.0, 1.0] {
                let mut p = x0.to_vec();
                p[i] += s * rho;
                v.push(p);
            }
        }
    }
    v
}

fn distinct_pairs(pts: &[Point]) -> Vec<(Point, Point)> {
    let mut out = vec![];
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            out.push((pts[i].clone(), pts[j].clone()));
        }
    }
    out
}

/// Largest `C ∈ (0,1]` with `C j^X ≤ J^{Y^D}` on `B(x0, r)`, given
/// `B(x0, (1+ε₀)r) ⊂ D` and `r ≤ 1/2`.
pub fn interior_jump_comparison(e: &KernelEngine, h: &HeatKernelEval, x0: &[f64], r: f64, eps0: f64) -> Result<BoundCheckReport> {
    if r > 0.5 {
        return Err(Error::Invalid("radius must be at most 1/2".into()));
    }
    if h.domain.signed_distance(x0) < (1.0 + eps0) * r {
        return Err(Error::Invalid("B(x0, (1+ε₀)r) is not inside the domain".into()));
    }
    let pairs = distinct_pairs(&ball_points(x0, r));
    let ratios: Vec<(f64, Point, Point)> = pairs
        .par_iter()
        .map(|(x, y)| {
            let jd = e.jump_yd(h, x, y)?.value;
            let jx = e.jump_x(h.d(), dist(x, y))?.value;
            Ok((jd / jx, x.clone(), y.clone()))
        })
        .collect::<Result<_>>()?;
    let (c, x, y) = ratios
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .cloned()
        .expect("ball has pairs");
    let mut rep = BoundCheckReport::new("interior-jump-comparison");
    rep.constant("C", c).constant("r", r).constant("eps0", eps0);
    rep.grid_entry("n_pairs", ratios.len());
    rep.witness(Witness::new("minimizer", [x, y].concat(), c));
    if !(c > 0.0 && c <= 1.0 + 1e-9) {
        rep.pass = false;
    }
    Ok(rep)
}

/// `j^X(|x-y|) - J^{Y^D}(x,y) ≤ j^X(δ_D(y))` on every pair.
pub fn jump_difference_scan(e: &KernelEngine, h: &HeatKernelEval, pairs: &[(Point, Point)]) -> Result<BoundCheckReport> {
    let d = h.d();
    let rows: Vec<(f64, f64, f64, Point, Point)> = pairs
        .par_iter()
        .map(|(x, y)| {
            let lhs = e.jump_deficit(h, x, y)?;
            let rhs = e.jump_x(d, h.domain.signed_distance(y))?;
            Ok((lhs.value, rhs.value, lhs.est_error + rhs.est_error, x.clone(), y.clone()))
        })
        .collect::<Result<_>>()?;
    let mut rep = BoundCheckReport::new("jump-difference");
    let mut worst = 0.0f64;
    for (l, r, err, x, y) in &rows {
        let q = l / r;
        if q > worst {
            worst = q;
        }
        if *l > r + err {
            rep.fail(Witness::new("violation", [x.clone(), y.clone()].concat(), q));
        }
    }
    rep.constant("max_ratio", worst);
    rep.grid_entry("n_pairs", rows.len());
    Ok(rep)
}

/// Smallest lattice `b > 2` such that `sup |F| ≤ 1/2` on `B(x0, r)²` for all
/// `r` in `radii` whenever `B(x0, (b+1)r)` touches `∂D` from inside, and for
/// every larger lattice value. The domain is the half-space in dimension `d`.
pub fn compensator_b_scan(e: &KernelEngine, d: usize, radii: &[f64], b_lattice: &[f64]) -> Result<BoundCheckReport> {
    let h = HeatKernelEval::new(&Domain::half_space(d)?)?;
    let mut sups = Vec::with_capacity(b_lattice.len());
    for &b in b_lattice {
        let mut sup = 0.0f64;
        for &r in radii {
            let mut x0 = vec![0.0; d];
            x0[d - 1] = (b + 1.0) * r;
            let pairs = distinct_pairs(&ball_points(&x0, r));
            let v: Vec<f64> = pairs
                .par_iter()
                .map(|(x, y)| Ok(e.compensator_f(&h, x, y)?.value.abs()))
                .collect::<Result<_>>()?;
            sup = v.into_iter().fold(sup, f64::max);
        }
        sups.push(sup);
    }
    let mut rep = BoundCheckReport::new("compensator-b");
    let mut found = None;
    for i in (0..b_lattice.len()).rev() {
        if sups[i] <= 0.5 && b_lattice[i] > 2.0 {
            found = Some(i);
        } else {
            break;
        }
    }
    rep.grid_entry("b_lattice", b_lattice).grid_entry("sup_F", &sups).grid_entry("radii", radii);
    match found {
        Some(i) => {
            rep.constant("b", b_lattice[i]).constant("sup_F_at_b", sups[i]);
        }
        None => {
            rep.fail(Witness::new("no admissible b", vec![], sups.last().copied().unwrap_or(f64::NAN)));
        }
    }
    Ok(rep)
}

/// `J^{Y^D}(z, x₁) ≤ C J^{Y^D}(z, x₂)` for `x₁, x₂ ∈ B(x0, r)` and `z` outside
/// `B(x0, (1+ε₀)r)`.
pub fn jump_harnack_scan(e: &KernelEngine, h: &HeatKernelEval, x0: &[f64], r: f64, eps0: f64) -> Result<BoundCheckReport> {
    if h.domain.signed_distance(x0) < (1.0 + eps0) * r {
        return Err(Error::Invalid("B(x0, (1+ε₀)r) is not inside the domain".into()));
    }
    let inner = ball_points(x0, r);
    let mut zs = vec![];
    for &m in &[1.0 + eps0, 2.0, 4.0] {
        for i in 0..x0.len() {
            for s in [-1.0, 1.0] {
                let mut z = x0.to_vec();
                z[i] += s * m * r;
                if h.domain.signed_distance(&z) > 1e-3 * r {
                    zs.push(z);
                }
            }
        }
    }
    let per_z: Vec<(f64, Point)> = zs
        .par_iter()
        .map(|z| {
            let v: Vec<f64> = inner.iter().map(|x| Ok(e.jump_yd(h, z, x)?.value)).collect::<Result<_>>()?;
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            Ok((hi / lo, z.clone()))
        })
        .collect::<Result<_>>()?;
    let (c, z) = per_z
        .iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .cloned()
        .expect("nonempty");
    let mut rep = BoundCheckReport::new("jump-harnack");
    rep.constant("C", c);
    rep.grid_entry("n_z", zs.len()).grid_entry("n_inner", inner.len());
    rep.witness(Witness::new("worst z", z, c));
    if !c.is_finite() {
        rep.pass = false;
    }
    Ok(rep)
}

/// Requirements of the global large-scale jump estimate: `d ≥ 3`, an
/// unbounded model domain, and the lower scaling condition on `μ`.
pub fn large_scale_gate(f: &BernsteinFunction, domain: &Domain) -> Result<()> {
    if domain.d < 3 {
        return Err(Error::Invalid("global jump estimates need d ≥ 3".into()));
    }
    if !matches!(domain.kind, DomainKind::HalfSpace) {
        return Err(Error::Invalid("global jump estimates are checked on the half-space".into()));
    }
    let rep = verify_conditions(f, domain.d, &ConditionGrid::default())?;
    if rep.a6.is_none() {
        return Err(Error::Invalid(format!(
            "{} fails (A6): no lower scaling of μ was found, so only bounded domains are covered",
            f.name
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::catalog;
    use crate::kernels::QuadratureConfig;

    #[test]
    fn pair_grid_shape() {
        let p = half_space_pairs(3, 0.01, 1.0, 5, 10, 10);
        assert_eq!(p.len(), 500);
        for (x, y) in &p {
            let r = dist(x, y);
            assert!(r <= 1.0 + 1e-12);
            assert!(x[2] > 0.0 && y[2] >= 0.01 * r * (1.0 - 1e-12));
        }
    }

    #[test]
    fn stable_envelope_is_exact_far_from_boundary() {
        // with δ ≥ r the envelope is α r^{-d-2+2α+...}; the ratio tends to the Riesz constant
        let f = catalog("stable:0.5").unwrap();
        let e = KernelEngine::new(&f, &QuadratureConfig::default()).unwrap();
        let h = HeatKernelEval::new(&Domain::half_space(3).unwrap()).unwrap();
        let pairs = vec![(vec![0.0, 0.0, 1000.0], vec![0.0, 0.0, 1001.0])];
        let (rows, _) = envelope_scan(&e, &h, &pairs, EnvelopeKind::Green).unwrap();
        let riesz = 1.0 / (2.0 * std::f64::consts::PI.powi(2));
        assert!((rows[0].ratio - riesz / 0.5).abs() < 1e-3 * riesz);
    }

    #[test]
    fn gamma_fails_large_scale_gate() {
        let f = catalog("gamma").unwrap();
        let err = large_scale_gate(&f, &Domain::half_space(3).unwrap()).unwrap_err();
        assert!(err.to_string().contains("A6"));
        assert!(large_scale_gate(&catalog("stable:0.5").unwrap(), &Domain::half_space(3).unwrap()).is_ok());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let rows = vec![ScanRow {
            x: vec![0.0, 1.0],
            y: vec![1.0, 1.0],
            value: 2.0,
            envelope: 1.0,
            ratio: 2.0,
        }];
        let s = rows_to_csv(&rows);
        assert!(s.starts_with("x,y,value,envelope,ratio\n"));
        assert_eq!(s.lines().count(), 2);
    }
}
