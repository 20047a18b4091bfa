//! Free and Dirichlet heat kernels for the generator `Δ`, so the free kernel
//! is `(4πt)^{-d/2} e^{-|x-y|²/4t}` and each coordinate has variance `2t`.

use serde::{Deserialize, Serialize};
use libm::{erf, erfc};

use crate::domain::{dist, Domain, DomainKind};
use crate::error::{domain_err, unsupported, Error, Result};
use crate::report::{BoundCheckReport, Extremum, Witness};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

pub fn free_kernel(d: usize, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return domain_err(format!("time must be positive, got {t}"));
    }
    let r = dist(x, y);
    Ok(ln_gauss(d, t, r * r).exp())
}

fn ln_gauss(d: usize, t: f64, r2: f64) -> f64 {
    -0.5 * d as f64 * (FOUR_PI * t).ln() - r2 / (4.0 * t)
}

/// One coordinate of a product domain.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Axis {
    Free,
    HalfLine,
    Interval(f64, f64),
}

/// Per-coordinate factor: the 1-d killed kernel is `g·r` and `e = 1 - r`,
/// both computed without cancellation where it matters.
#[derive(Debug, Clone, Copy)]
struct Factor {
    r: f64,
    e: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatKernelEval {
    pub domain: Domain,
    /// Image series below `t/L² = crossover`, eigenseries above.
    pub crossover: f64,
    /// Series stop once the next term is below `tail_target` of the sum.
    pub tail_target: f64,
    pub max_terms: usize,
}

impl HeatKernelEval {
    pub fn new(domain: &Domain) -> Result<Self> {
        if let DomainKind::Ball { .. } = domain.kind {
            return unsupported("ball heat kernels are only available by Monte Carlo");
        }
        Ok(HeatKernelEval {
            domain: domain.clone(),
            crossover: 0.1,
            tail_target: 1e-14,
            max_terms: 100_000,
        })
    }

    pub fn d(&self) -> usize {
        self.domain.d
    }

    fn axes(&self) -> Vec<Axis> {
        match &self.domain.kind {
            DomainKind::HalfSpace => {
                let mut v = vec![Axis::Free; self.d() - 1];
                v.push(Axis::HalfLine);
                v
            }
            DomainKind::Box { lo, hi } => lo.iter().zip(hi).map(|(&a, &b)| Axis::Interval(a, b)).collect(),
            DomainKind::Ball { .. } => unreachable!("rejected in new"),
        }
    }

    fn check(&self, t: f64, pts: &[&[f64]]) -> Result<()> {
        if !(t > 0.0 && t.is_finite()) {
            return domain_err(format!("time must be positive, got {t}"));
        }
        for p in pts {
            self.domain.check_point(p)?;
            if self.domain.signed_distance(p) < 0.0 {
                return domain_err(format!("point {p:?} lies outside the domain"));
            }
        }
        Ok(())
    }

    fn factors(&self, t: f64, x: &[f64], y: &[f64]) -> Result<Vec<Factor>> {
        self.axes()
            .iter()
            .enumerate()
            .map(|(i, ax)| match *ax {
                Axis::Free => Ok(Factor { r: 1.0, e: 0.0 }),
                Axis::HalfLine => {
                    let e = (-x[i] * y[i] / t).exp();
                    Ok(Factor {
                        r: -(-x[i] * y[i] / t).exp_m1(),
                        e,
                    })
                }
                Axis::Interval(a, b) => self.interval_factor(t, x[i] - a, y[i] - a, b - a),
            })
            .collect()
    }

    fn interval_factor(&self, t: f64, x: f64, y: f64, l: f64) -> Result<Factor> {
        // symmetric in (x, y) and under x -> L - x, so fix an order
        let (mut x, mut y) = (x.clamp(0.0, l), y.clamp(0.0, l));
        if x + y > l {
            x = l - x;
            y = l - y;
        }
        if x > y {
            std::mem::swap(&mut x, &mut y);
        }
        if t / (l * l) < self.crossover {
            self.interval_images(t, x, y, l)
        } else {
            let p = self.interval_eigen(t, x, y, l)?;
            let g = ln_gauss(1, t, (x - y) * (x - y)).exp();
            let r = (p / g).clamp(0.0, 1.0);
            Ok(Factor { r, e: 1.0 - r })
        }
    }

    /// `Σ_k [g(x-y-2kL) - g(x+y-2kL)] / g(x-y)`, each bracket as a product.
    fn interval_images(&self, t: f64, x: f64, y: f64, l: f64) -> Result<Factor> {
        let term = |k: f64| {
            let ck = 2.0 * k * l;
            // g(x-y-ck)/g(x-y)
            let ls = -(ck * ck - 2.0 * ck * (x - y)) / (4.0 * t);
            let w = -y * (x - ck) / t;
            if w > 0.0 {
                ls.exp() - (ls + w).exp()
            } else {
                -ls.exp() * w.exp_m1()
            }
        };
        let e0 = (-x * y / t).exp();
        let mut r = -(-x * y / t).exp_m1();
        let mut side = 0.0;
        let mut k = 1usize;
        loop {
            let a = term(k as f64);
            let b = term(-(k as f64));
            side += a + b;
            if (a.abs() + b.abs()) <= self.tail_target * (r + side).abs().max(f64::MIN_POSITIVE) {
                break;
            }
            k += 1;
            if k > self.max_terms {
                return Err(Error::Numeric("image series did not reach the tail target".into()));
            }
        }
        r += side;
        Ok(Factor {
            r: r.clamp(0.0, 1.0),
            e: (e0 - side).clamp(0.0, 1.0),
        })
    }

    fn interval_eigen(&self, t: f64, x: f64, y: f64, l: f64) -> Result<f64> {
        let w = std::f64::consts::PI / l;
        let mut s = 0.0;
        for n in 1..=self.max_terms {
            let nf = n as f64;
            let decay = (-(nf * w).powi(2) * t).exp();
            s += (nf * w * x).sin() * (nf * w * y).sin() * decay;
            let next = (-((nf + 1.0) * w).powi(2) * t).exp();
            if next <= self.tail_target * s.abs() || next == 0.0 {
                return Ok((2.0 / l * s).max(0.0));
            }
        }
        Err(Error::Numeric("eigenseries did not reach the tail target".into()))
    }

    /// `p^D(t, x, y)`.
    pub fn dirichlet_kernel(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.ln_dirichlet_kernel(t, x, y)?.exp())
    }

    /// `ln p^D(t, x, y)`, finite wherever `p^D` is positive even if it underflows.
    pub fn ln_dirichlet_kernel(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(t, &[x, y])?;
        let r = dist(x, y);
        let lg = ln_gauss(self.d(), t, r * r);
        let fs = self.factors(t, x, y)?;
        Ok(lg + fs.iter().map(|f| f.r.ln()).sum::<f64>())
    }

    /// `p(t,x,y) - p^D(t,x,y)` without cancellation in the interior.
    pub fn dirichlet_deficit(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(t, &[x, y])?;
        let r = dist(x, y);
        let g = ln_gauss(self.d(), t, r * r).exp();
        let fs = self.factors(t, x, y)?;
        let ln_keep: f64 = fs.iter().map(|f| (-f.e).ln_1p()).sum();
        Ok(g * -ln_keep.exp_m1())
    }

    /// `p^D/p`: probability that the Brownian bridge from `x` to `y` over
    /// time `t` stays in `D`.
    pub fn bridge_survival(&self, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(t, &[x, y])?;
        Ok(self.factors(t, x, y)?.iter().map(|f| f.r).product())
    }

    /// `P_x(t < τ_D)`.
    pub fn survival_probability(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check(t, &[x])?;
        let mut p = 1.0;
        for (i, ax) in self.axes().iter().enumerate() {
            p *= match *ax {
                Axis::Free => 1.0,
                Axis::HalfLine => erf(x[i] / (2.0 * t.sqrt())),
                Axis::Interval(a, b) => self.interval_survival(t, x[i] - a, b - a)?,
            };
        }
        Ok(p.clamp(0.0, 1.0))
    }

    /// `1 - P_x(t < τ_D)`, accurate when it is tiny.
    pub fn exit_probability(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check(t, &[x])?;
        let mut ln_keep = 0.0;
        for (i, ax) in self.axes().iter().enumerate() {
            let q = match *ax {
                Axis::Free => 0.0,
                Axis::HalfLine => erfc(x[i] / (2.0 * t.sqrt())),
                Axis::Interval(a, b) => self.interval_exit(t, x[i] - a, b - a)?,
            };
            ln_keep += (-q).ln_1p();
        }
        Ok((-ln_keep.exp_m1()).clamp(0.0, 1.0))
    }

    fn interval_exit(&self, t: f64, x: f64, l: f64) -> Result<f64> {
        let x = x.clamp(0.0, l);
        let x = x.min(l - x);
        if t / (l * l) >= self.crossover || x == 0.0 {
            return Ok(1.0 - self.interval_survival(t, x, l)?);
        }
        let a = 2.0 * t.sqrt();
        let mut q = erfc(x / a);
        for j in 1..=self.max_terms {
            let jl = j as f64 * l;
            let term = erfc((jl - x) / a) - erfc((jl + x) / a);
            q += if j % 2 == 1 { term } else { -term };
            if term.abs() <= self.tail_target * q.abs() {
                return Ok(q);
            }
        }
        Err(Error::Numeric("exit image series did not converge".into()))
    }

    fn interval_survival(&self, t: f64, x: f64, l: f64) -> Result<f64> {
        let x = x.clamp(0.0, l);
        let x = x.min(l - x);
        if x == 0.0 {
            return Ok(0.0);
        }
        if t / (l * l) < self.crossover {
            let a = 2.0 * t.sqrt();
            let mut p = erf(x / a);
            for j in 1..=self.max_terms {
                let jl = j as f64 * l;
                let term = erfc((jl - x) / a) - erfc((jl + x) / a);
                p += if j % 2 == 1 { -term } else { term };
                if term.abs() <= self.tail_target * p.abs() {
                    return Ok(p);
                }
            }
            Err(Error::Numeric("survival image series did not converge".into()))
        } else {
            let w = std::f64::consts::PI / l;
            let mut p = 0.0;
            for n in (1..=2 * self.max_terms).step_by(2) {
                let nf = n as f64;
                p += 4.0 / (nf * std::f64::consts::PI) * (nf * w * x).sin() * (-(nf * w).powi(2) * t).exp();
                let next = (-((nf + 2.0) * w).powi(2) * t).exp();
                if next <= self.tail_target * p.abs() || next == 0.0 {
                    return Ok(p.clamp(0.0, 1.0));
                }
            }
            Err(Error::Numeric("survival eigenseries did not converge".into()))
        }
    }

    /// Per-coordinate masses of an axis-aligned box `U = ∏[lo_i, hi_i] ⊂ D`:
    /// `(∫ g, ∫ (g - g^D))` for the free and killed one-dimensional kernels.
    pub fn box_masses(&self, t: f64, x: &[f64], lo: &[f64], hi: &[f64]) -> Result<Vec<(f64, f64)>> {
        self.check(t, &[x])?;
        let mut out = Vec::with_capacity(self.d());
        for (i, ax) in self.axes().iter().enumerate() {
            let (a, b) = (lo[i], hi[i]);
            let free = gauss_mass(t, x[i], a, b);
            let deficit = match *ax {
                Axis::Free => 0.0,
                Axis::HalfLine => gauss_mass(t, -x[i], a.max(0.0), b.max(0.0)),
                Axis::Interval(c, e) => self.interval_deficit_mass(t, x[i] - c, a - c, b - c, e - c)?,
            };
            out.push((free, deficit.clamp(0.0, free)));
        }
        Ok(out)
    }

    fn interval_deficit_mass(&self, t: f64, x: f64, a: f64, b: f64, l: f64) -> Result<f64> {
        let (a, b) = (a.max(0.0), b.min(l));
        if t / (l * l) >= self.crossover {
            let w = std::f64::consts::PI / l;
            let mut s = 0.0;
            for n in 1..=self.max_terms {
                let nf = n as f64;
                s += (nf * w * x).sin() * (-(nf * w).powi(2) * t).exp() * ((nf * w * a).cos() - (nf * w * b).cos()) / (nf * w);
                let next = (-((nf + 1.0) * w).powi(2) * t).exp() / (nf * w);
                if next <= self.tail_target * s.abs() || next == 0.0 {
                    return Ok(gauss_mass(t, x, a, b) - 2.0 / l * s);
                }
            }
            return Err(Error::Numeric("eigenseries did not reach the tail target".into()));
        }
        // images of x: +(x + 2kL) for k ≠ 0 and -(-x + 2kL) for all k
        let mut s = gauss_mass(t, -x, a, b);
        for k in 1..=self.max_terms {
            let c = 2.0 * k as f64 * l;
            let terms = gauss_mass(t, -x + c, a, b) + gauss_mass(t, -x - c, a, b)
                - gauss_mass(t, x + c, a, b)
                - gauss_mass(t, x - c, a, b);
            s += terms;
            if terms.abs() <= self.tail_target * s.abs() || c > (b.abs() + a.abs() + x.abs()) + 80.0 * t.sqrt() {
                return Ok(s);
            }
        }
        Err(Error::Numeric("image series did not reach the tail target".into()))
    }

    /// Principal Dirichlet eigenvalue for bounded product domains.
    pub fn principal_eigenvalue(&self) -> Option<f64> {
        match &self.domain.kind {
            DomainKind::Box { lo, hi } => Some(
                lo.iter()
                    .zip(hi)
                    .map(|(a, b)| (std::f64::consts::PI / (b - a)).powi(2))
                    .sum(),
            ),
            _ => None,
        }
    }
}

/// `∫_a^b (4πt)^{-1/2} e^{-(x-y)²/4t} dy` without cancellation in the tails.
pub fn gauss_mass(t: f64, x: f64, a: f64, b: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let s = 2.0 * t.sqrt();
    let (za, zb) = ((a - x) / s, (b - x) / s);
    if za >= 0.0 {
        0.5 * (erfc(za) - erfc(zb))
    } else if zb <= 0.0 {
        0.5 * (erfc(-zb) - erfc(-za))
    } else {
        0.5 * (erf(zb) - erf(za))
    }
}

/// A `(t, x, y)` sample point for the two-sided kernel scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// A deterministic grid of `nt · n · n` triples with `t ≤ 1`.
///
/// Points sit at distances from the boundary on a log scale, with small
/// tangential offsets, and the diagonal `x = y` is included.
pub fn default_triples(domain: &Domain, nt: usize, n: usize) -> Result<Vec<Triple>> {
    let ts = crate::quad::logspace(1e-3, 1.0, nt);
    let pts = interior_points(domain, n)?;
    let mut out = Vec::with_capacity(nt * n * n);
    for &t in &ts {
        for x in &pts {
            for y in &pts {
                out.push(Triple {
                    t,
                    x: x.clone(),
                    y: y.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// `n` points spread from near the boundary to well inside.
pub fn interior_points(domain: &Domain, n: usize) -> Result<Vec<Vec<f64>>> {
    let d = domain.d;
    match &domain.kind {
        DomainKind::HalfSpace => Ok(crate::quad::logspace(1e-3, 2.0, n)
            .into_iter()
            .enumerate()
            .map(|(i, h)| {
                let mut p = vec![0.0; d];
                p[0] = 0.05 * (i % 4) as f64;
                p[d - 1] = h;
                p
            })
            .collect()),
        DomainKind::Box { lo, hi } => {
            let half = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).fold(f64::INFINITY, f64::min);
            Ok(crate::quad::logspace(1e-3 * half, 0.999 * half, n)
                .into_iter()
                .enumerate()
                .map(|(i, h)| {
                    let mut p: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
                    p[d - 1] = lo[d - 1] + h;
                    p[0] += 0.05 * half * (i % 4) as f64;
                    p
                })
                .collect())
        }
        DomainKind::Ball { .. } => unsupported("no analytic heat kernel on the ball"),
    }
}

const M_LATTICE_STEP: f64 = 0.25;
const M_LATTICE_MAX: f64 = 16.0;

/// Scan `M ∈ [1, 16]` for the smallest `c` with
/// `c⁻¹ P_x P_y t^{-d/2} e^{-M|x-y|²/t} ≤ p^D ≤ c P_x P_y t^{-d/2} e^{-|x-y|²/(Mt)}`
/// on the grid, and compute the doubling constant of `t ↦ P_x(t < τ)`.
#[allow(non_snake_case)]
pub fn check_B1_B2(h: &HeatKernelEval, grid: &[Triple]) -> Result<BoundCheckReport> {
    let d = h.d() as f64;
    // (ln p^D - ln P_x P_y t^{-d/2}, |x-y|²/t)
    let mut rows = Vec::with_capacity(grid.len());
    for g in grid {
        if g.t > 1.0 {
            return Err(Error::Invalid("grid times must not exceed 1".into()));
        }
        let px = h.survival_probability(g.t, &g.x)?;
        let py = h.survival_probability(g.t, &g.y)?;
        if px == 0.0 || py == 0.0 {
            continue;
        }
        let lp = h.ln_dirichlet_kernel(g.t, &g.x, &g.y)?;
        let base = px.ln() + py.ln() - 0.5 * d * g.t.ln();
        let r = dist(&g.x, &g.y);
        rows.push((lp - base, r * r / g.t, g));
    }
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    let mut m = 1.0;
    while m <= M_LATTICE_MAX + 1e-12 {
        // ln c(M) = max over the grid of both log-ratios
        let mut lc = 0.0f64;
        let mut arg = vec![];
        for (q, s, g) in &rows {
            let lower = -(q + m * s);
            let upper = q + s / m;
            let v = lower.max(upper);
            if v > lc {
                lc = v;
                arg = [vec![g.t], g.x.clone(), g.y.clone()].concat();
            }
        }
        if best.as_ref().is_none_or(|b| lc < b.0 - 1e-12) {
            best = Some((lc, m, arg));
        }
        m += M_LATTICE_STEP;
    }
    let mut rep = BoundCheckReport::new("B1-B2");
    let (lc, m, arg) = best.expect("lattice is nonempty");
    rep.constant("c", lc.exp()).constant("M", m);
    rep.witness(Witness::new("tightest triple", arg, lc.exp()));
    if !lc.is_finite() {
        rep.pass = false;
    }

    let mut dbl = Extremum::new();
    let mut seen: Vec<&Vec<f64>> = vec![];
    let mut ts: Vec<f64> = grid.iter().map(|g| g.t).filter(|&t| t <= 0.5).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    for g in grid {
        if seen.contains(&&g.x) {
            continue;
        }
        seen.push(&g.x);
        for &t in &ts {
            let a = h.survival_probability(t, &g.x)?;
            let b = h.survival_probability(2.0 * t, &g.x)?;
            if a > 0.0 {
                dbl.push(a / b, &[[t].as_slice(), &g.x].concat());
            }
        }
    }
    rep.constant("b1_doubling", dbl.max);
    rep.witness(Witness::new("doubling max", dbl.argmax.clone(), dbl.max));
    if !dbl.max.is_finite() {
        rep.pass = false;
    }
    rep.grid_entry("n_triples", rows.len())
        .grid_entry("M_lattice", [1.0, M_LATTICE_MAX, M_LATTICE_STEP]);
    Ok(rep)
}

/// Largest `C` with `p^D ≥ C t^{-d/2} e^{-M|x-y|²/t}` over grid triples with
/// `√t ≤ b(δ_x ∧ δ_y) ∧ 1`.
pub fn check_interior_lower_bound(h: &HeatKernelEval, b: f64, m: f64, grid: &[Triple]) -> Result<BoundCheckReport> {
    let d = h.d() as f64;
    let mut ext = Extremum::new();
    let mut excluded = 0usize;
    for g in grid {
        let dx = h.domain.signed_distance(&g.x);
        let dy = h.domain.signed_distance(&g.y);
        if g.t.sqrt() > (b * dx.min(dy)).min(1.0) {
            excluded += 1;
            continue;
        }
        let lp = h.ln_dirichlet_kernel(g.t, &g.x, &g.y)?;
        let r = dist(&g.x, &g.y);
        let lb = -0.5 * d * g.t.ln() - m * r * r / g.t;
        ext.push((lp - lb).exp(), &[vec![g.t], g.x.clone(), g.y.clone()].concat());
    }
    let mut rep = BoundCheckReport::new("interior-heat-lower-bound");
    rep.constant("C", if ext.n > 0 { ext.min } else { f64::NAN })
        .constant("b", b)
        .constant("M", m);
    rep.grid_entry("n_admissible", ext.n).grid_entry("n_excluded", excluded);
    if ext.n == 0 || !(ext.min > 0.0) {
        rep.pass = false;
    } else {
        rep.witness(Witness::new("minimizer", ext.argmin.clone(), ext.min));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadOptions};

    fn interval(l: f64) -> HeatKernelEval {
        HeatKernelEval::new(&Domain::cuboid(vec![0.0], vec![l]).unwrap()).unwrap()
    }

    #[test]
    fn free_kernel_values() {
        let v = free_kernel(1, 1.0, &[0.0], &[0.0]).unwrap();
        assert!((v - 0.28209479177387814).abs() < 1e-15);
        let v = free_kernel(2, 1.0, &[0.0; 2], &[0.0; 2]).unwrap();
        assert!((v - 0.07957747154594767).abs() < 1e-15);
        assert!(free_kernel(1, 0.0, &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn half_line_reflection_example() {
        let h = HeatKernelEval::new(&Domain::half_space(1).unwrap()).unwrap();
        let v = h.dirichlet_kernel(1.0, &[1.0], &[1.0]).unwrap();
        let exact = FOUR_PI.powf(-0.5) * (1.0 - (-1.0f64).exp());
        assert!((v - exact).abs() < 1e-15);
        assert!((v - 0.17833).abs() < 5e-5);
    }

    #[test]
    fn interval_center_value() {
        let h = interval(1.0);
        let v = h.dirichlet_kernel(1.0, &[0.5], &[0.5]).unwrap();
        let lead = 2.0 * (-std::f64::consts::PI.powi(2)).exp();
        assert!((v - lead).abs() < 1e-9, "{v} vs {lead}");
    }

    #[test]
    fn image_and_eigen_agree_at_crossover() {
        let mut h = interval(1.0);
        let t = h.crossover;
        for &(x, y) in &[(0.5, 0.5), (0.1, 0.7), (0.01, 0.02), (0.3, 0.95)] {
            h.crossover = 1.0;
            let img = h.dirichlet_kernel(t, &[x], &[y]).unwrap();
            let si = h.survival_probability(t, &[x]).unwrap();
            h.crossover = 0.01;
            let eig = h.dirichlet_kernel(t, &[x], &[y]).unwrap();
            let se = h.survival_probability(t, &[x]).unwrap();
            assert!((img - eig).abs() < 1e-10 * img.max(1e-300) + 1e-15, "{x},{y}: {img} vs {eig}");
            assert!((si - se).abs() < 1e-10, "{x}: {si} vs {se}");
        }
    }

    #[test]
    fn symmetric_and_dominated() {
        let h = HeatKernelEval::new(&Domain::cuboid(vec![0.0; 2], vec![1.0, 2.0]).unwrap()).unwrap();
        for &t in &[1e-3, 0.05, 0.3, 2.0] {
            let x = [0.2, 1.7];
            let y = [0.9, 0.4];
            let a = h.dirichlet_kernel(t, &x, &y).unwrap();
            let b = h.dirichlet_kernel(t, &y, &x).unwrap();
            assert!((a - b).abs() <= 1e-12 * a, "{a} {b}");
            assert!(a <= free_kernel(2, t, &x, &y).unwrap());
        }
    }

    #[test]
    fn deficit_matches_difference() {
        let h = HeatKernelEval::new(&Domain::half_space(3).unwrap()).unwrap();
        let x = [0.0, 0.0, 0.3];
        let y = [0.1, 0.0, 0.5];
        let t = 0.2;
        let p = free_kernel(3, t, &x, &y).unwrap();
        let pd = h.dirichlet_kernel(t, &x, &y).unwrap();
        let def = h.dirichlet_deficit(t, &x, &y).unwrap();
        assert!((def - (p - pd)).abs() < 1e-14 * p);
    }

    #[test]
    fn survival_integrates_kernel() {
        let h = interval(1.0);
        let opts = QuadOptions::with_rel_tol(1e-12);
        for &t in &[0.002, 0.05, 0.5] {
            let x = 0.3;
            let q = integrate(|y| h.dirichlet_kernel(t, &[x], &[y]).unwrap(), 0.0, 1.0, &opts).unwrap();
            let s = h.survival_probability(t, &[x]).unwrap();
            assert!((q.value - s).abs() < 1e-8, "t={t}: {} vs {s}", q.value);
        }
        let hs = HeatKernelEval::new(&Domain::half_space(2).unwrap()).unwrap();
        let s = hs.survival_probability(1.0, &[0.0, 2.0]).unwrap();
        assert!((s - 0.8427007929497149).abs() < 1e-14, "{s}");
    }

    #[test]
    fn chapman_kolmogorov_interval() {
        let h = interval(1.0);
        let opts = QuadOptions::with_rel_tol(1e-10);
        for &(s, t, x, y) in &[(0.01, 0.02, 0.2, 0.3), (0.05, 0.1, 0.5, 0.9), (0.2, 0.07, 0.1, 0.6)] {
            let q = integrate(
                |z| h.dirichlet_kernel(s, &[x], &[z]).unwrap() * h.dirichlet_kernel(t, &[z], &[y]).unwrap(),
                0.0,
                1.0,
                &opts,
            )
            .unwrap();
            let direct = h.dirichlet_kernel(s + t, &[x], &[y]).unwrap();
            assert!((q.value / direct - 1.0).abs() < 1e-6, "{} vs {direct}", q.value);
        }
    }

    #[test]
    fn survival_monotone() {
        let h = HeatKernelEval::new(&Domain::cuboid(vec![0.0; 2], vec![1.0; 2]).unwrap()).unwrap();
        let ts = crate::quad::logspace(1e-4, 3.0, 60);
        let v: Vec<f64> = ts.iter().map(|&t| h.survival_probability(t, &[0.3, 0.4]).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        let heights = crate::quad::linspace(0.01, 0.5, 40);
        let v: Vec<f64> = heights.iter().map(|&z| h.survival_probability(0.05, &[0.5, z]).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        assert_eq!(h.survival_probability(0.1, &[0.0, 0.5]).unwrap(), 0.0);
        assert!(h.survival_probability(1e-8, &[0.5, 0.5]).unwrap() > 1.0 - 1e-15);
    }

    #[test]
    fn exit_probability_complements_survival() {
        let h = HeatKernelEval::new(&Domain::cuboid(vec![0.0; 2], vec![1.0, 3.0]).unwrap()).unwrap();
        for &t in &[1e-4, 0.01, 0.2, 2.0] {
            let x = [0.3, 1.1];
            let s = h.survival_probability(t, &x).unwrap();
            let q = h.exit_probability(t, &x).unwrap();
            assert!((s + q - 1.0).abs() < 1e-13);
        }
        let hs = HeatKernelEval::new(&Domain::half_space(3).unwrap()).unwrap();
        let q = hs.exit_probability(1e-3, &[0.0, 0.0, 1.0]).unwrap();
        assert!((q / erfc(1.0 / (2.0 * 1e-3f64.sqrt())) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn box_masses_match_quadrature() {
        let opts = QuadOptions::with_rel_tol(1e-12);
        let h = interval(1.0);
        for &t in &[0.003, 0.05, 0.4] {
            let x = 0.35;
            let (a, b) = (0.2, 0.6);
            let m = h.box_masses(t, &[x], &[a], &[b]).unwrap()[0];
            let k = integrate(|y| h.dirichlet_kernel(t, &[x], &[y]).unwrap(), a, b, &opts).unwrap().value;
            assert!((m.0 - m.1 - k).abs() < 1e-12, "t={t}: {} vs {k}", m.0 - m.1);
        }
        let hs = HeatKernelEval::new(&Domain::half_space(1).unwrap()).unwrap();
        let m = hs.box_masses(0.5, &[0.4], &[0.1], &[2.0]).unwrap()[0];
        let k = integrate(|y| hs.dirichlet_kernel(0.5, &[0.4], &[y]).unwrap(), 0.1, 2.0, &opts).unwrap().value;
        assert!((m.0 - m.1 - k).abs() < 1e-12);
    }

    #[test]
    fn ball_is_unsupported() {
        let b = Domain::ball(vec![0.0; 3], 1.0).unwrap();
        assert!(matches!(HeatKernelEval::new(&b), Err(Error::Unsupported(_))));
    }

    #[test]
    fn half_space_b1_b2() {
        let d = Domain::half_space(3).unwrap();
        let h = HeatKernelEval::new(&d).unwrap();
        let grid = default_triples(&d, 10, 10).unwrap();
        assert_eq!(grid.len(), 1000);
        let rep = check_B1_B2(&h, &grid).unwrap();
        assert!(rep.pass);
        let c = rep.get("c").unwrap();
        assert!(c.is_finite() && c >= 1.0);
        assert!(rep.get("b1_doubling").unwrap() < 10.0);
        let m = rep.get("M").unwrap();
        let a = check_interior_lower_bound(&h, 0.5, m, &grid).unwrap();
        let b = check_interior_lower_bound(&h, 1.0, m, &grid).unwrap();
        assert!(a.pass && b.pass);
        assert!(b.get("C").unwrap() <= a.get("C").unwrap());
    }
}
