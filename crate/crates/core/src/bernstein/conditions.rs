use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::BernsteinFunction;
use crate::error::{domain_err, Error, Result};
use crate::quad::{integrate, integrate_log_time, integrate_log_time_from, logspace, Estimate, QuadOptions};
use crate::report::{BoundCheckReport, Extremum, Witness};

/// `(1 - 2/e)^{-1}`, the constant in the upper density estimates.
pub fn upper_density_constant() -> f64 {
    1.0 / (1.0 - 2.0 * (-1.0f64).exp())
}

/// `∫₀^∞ (1 - e^{-λt}) μ(t) dt`, which must equal `φ(λ)` (zero drift).
pub fn levy_laplace(f: &BernsteinFunction, lambda: f64, rel_tol: f64) -> Result<Estimate> {
    if lambda <= 0.0 {
        return domain_err("lambda must be positive");
    }
    let g = |t: f64| -(-lambda * t).exp_m1() * f.mu(t);
    let tail = |t: f64| f.levy_tail(t);
    integrate_log_time(g, 1.0 / lambda, rel_tol, Some(tail))
}

/// `∫₀^∞ e^{-λt} u(t) dt`, which must equal `1/φ(λ)`.
///
/// The head `(0, t₀)` is taken from the potential measure `U(t₀)`, which is
/// what makes slowly vanishing densities such as `u(t) ~ 1/(t log² t)` usable.
pub fn potential_laplace(f: &BernsteinFunction, lambda: f64, rel_tol: f64) -> Result<Estimate> {
    if lambda <= 0.0 {
        return domain_err("lambda must be positive");
    }
    let t0 = 1e-9 / lambda;
    let head_u = f.potential_cdf(t0);
    let head = Estimate::new(head_u * (1.0 - 0.5 * lambda * t0), 0.5 * lambda * t0 * head_u);
    let g = |t: f64| (-lambda * t).exp() * f.u(t);
    let tail = |t: f64| f.u(t) * (-lambda * t).exp() / lambda;
    let body = integrate_log_time_from(g, t0, 1.0 / lambda, rel_tol, Some(tail))?;
    Ok(head + body)
}

/// Relative errors of both Laplace identities at one `λ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaplaceCheck {
    pub lambda: f64,
    pub levy_rel_error: f64,
    pub potential_rel_error: f64,
}

pub fn check_laplace_identities(f: &BernsteinFunction, lambdas: &[f64], rel_tol: f64) -> Result<Vec<LaplaceCheck>> {
    lambdas
        .iter()
        .map(|&l| {
            let phi = f.phi(l) + f.drift_b * l;
            let lv = levy_laplace(f, l, rel_tol)?;
            let pv = potential_laplace(f, l, rel_tol)?;
            Ok(LaplaceCheck {
                lambda: l,
                levy_rel_error: (lv.value - phi).abs() / phi,
                potential_rel_error: (pv.value - 1.0 / phi).abs() * phi,
            })
        })
        .collect()
}

/// Scan the density estimates on a grid of times in `(0, M]`.
///
/// Upper bounds hold for all `t` and are asserted. The lower constants
/// `c1(M)` (potential density), `c2(M)` (Lévy density) and the doubling
/// constant `c3(M)` for `μ(t) ≤ c3 μ(2t)` are reported.
pub fn check_density_bounds(f: &BernsteinFunction, grid: &[f64], m: f64) -> Result<BoundCheckReport> {
    if grid.is_empty() {
        return Err(Error::Invalid("empty time grid".into()));
    }
    if let Some(&t) = grid.iter().find(|&&t| !(t > 0.0 && t <= m)) {
        return domain_err(format!("grid point {t} outside (0, {m}]"));
    }
    let k = upper_density_constant();
    let slack = f.reduced_accuracy().unwrap_or(1e-9);
    let mut rep = BoundCheckReport::new("density-bounds");
    let mut ru = Extremum::new();
    let mut rm = Extremum::new();
    let mut dbl = Extremum::new();
    for &t in grid {
        let s = 1.0 / t;
        let (phi, dphi) = (f.phi(s), f.phi_prime(s));
        let u = super::potential_density(f, t)?;
        let mu = super::levy_density(f, t)?;
        let cu = u * t * t * phi * phi / dphi;
        let cm = mu * t * t / dphi;
        ru.push(cu, &[t]);
        rm.push(cm, &[t]);
        dbl.push(mu / super::levy_density(f, 2.0 * t)?, &[t]);
        if cu > k * (1.0 + slack) {
            rep.fail(Witness::new("potential upper bound violated", vec![t], cu));
        }
        if cm > k * (1.0 + slack) {
            rep.fail(Witness::new("levy upper bound violated", vec![t], cm));
        }
    }
    rep.constant("upper_constant", k)
        .constant("potential_ratio_max", ru.max)
        .constant("levy_ratio_max", rm.max)
        .constant("c1", ru.min)
        .constant("c2", rm.min)
        .constant("c3", dbl.max)
        .constant("M", m);
    rep.grid_entry("t_min", grid.iter().cloned().fold(f64::INFINITY, f64::min))
        .grid_entry("t_max", grid.iter().cloned().fold(0.0, f64::max))
        .grid_entry("n_points", grid.len());
    rep.witness(Witness::new("potential ratio max", ru.argmax.clone(), ru.max))
        .witness(Witness::new("levy ratio max", rm.argmax.clone(), rm.max));
    if !(ru.min > 0.0 && rm.min > 0.0 && dbl.max.is_finite()) {
        rep.fail(Witness::new("nonpositive lower constant", ru.argmin.clone(), ru.min));
    }
    Ok(rep)
}

/// Ranges scanned by [`verify_conditions`]. Ratios are evaluated at
/// `λ = λ_lo·10^{j/n}` and `t = 10^{k/n}`, so products land on the same
/// lattice and each function value is computed once.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionGrid {
    pub lambda_lo: f64,
    pub lambda_decades: u32,
    pub t_decades: u32,
    pub per_decade: u32,
    /// Lévy-density ratio scan for the unbounded-domain condition starts at this `λ`.
    pub mu_lambda_lo: f64,
    pub mu_lambda_decades: u32,
    pub a2_r_max: f64,
    pub a2_points: usize,
}

impl Default for ConditionGrid {
    fn default() -> Self {
        ConditionGrid {
            lambda_lo: 1.0,
            lambda_decades: 4,
            t_decades: 4,
            per_decade: 10,
            mu_lambda_lo: 1e-4,
            mu_lambda_decades: 8,
            a2_r_max: 100.0,
            a2_points: 400,
        }
    }
}

/// Exponent lattice used for constant inference.
pub const EXPONENT_STEP: f64 = 0.01;
/// Allowed growth of the inferred constant over the last decade of `t`.
const STABILITY: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPair {
    pub constant: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingConditionReport {
    pub name: String,
    /// `φ'(λt)/φ'(λ) ≤ σ t^{-δ}`: `(σ, δ)`.
    pub a3: Option<ScalingPair>,
    /// `φ'(λt)/φ'(λ) ≥ σ' t^{-δ'}` with `δ' < 2δ`: `(σ', δ')`.
    pub a4: Option<ScalingPair>,
    /// `μ(λt)/μ(λ) ≥ σ₁ t^{-β}`: constant `σ₁`, exponent `β`.
    pub a6: Option<ScalingPair>,
    /// `φ(λt)/φ(λ) ≥ σ₂ t^{1-γ}`, `γ ∈ [δ, 1)`: constant `σ₂`, exponent `γ`.
    pub a7: Option<ScalingPair>,
    /// `c` for `μ(r) ≤ c μ(r+1)`, `r ∈ (1, r_max]`.
    pub a2_constant: Option<f64>,
    pub mu_decreasing: bool,
    pub u_decreasing: bool,
    pub a5_transient: BTreeMap<usize, bool>,
    pub a5_integral: Option<f64>,
    pub dimension: usize,
    pub phi_ratio_bounds: bool,
    pub phi_prime_ratio_monotone: bool,
    pub grid: ConditionGrid,
}

impl ScalingConditionReport {
    pub fn transient(&self) -> bool {
        self.a5_transient.get(&self.dimension).copied().unwrap_or(false)
    }

    /// Conditions required by every result: decreasing densities, (A2) and (A3).
    pub fn basic_conditions(&self) -> bool {
        self.mu_decreasing && self.u_decreasing && self.a2_constant.is_some() && self.a3.is_some()
    }

    pub fn summary(&self) -> BoundCheckReport {
        let mut rep = BoundCheckReport::new("scaling-conditions");
        let pair = |rep: &mut BoundCheckReport, tag: &str, p: &Option<ScalingPair>| {
            if let Some(p) = p {
                rep.constant(&format!("{tag}_constant"), p.constant);
                rep.constant(&format!("{tag}_exponent"), p.exponent);
            }
        };
        pair(&mut rep, "a3", &self.a3);
        pair(&mut rep, "a4", &self.a4);
        pair(&mut rep, "a6", &self.a6);
        pair(&mut rep, "a7", &self.a7);
        if let Some(c) = self.a2_constant {
            rep.constant("a2_constant", c);
        }
        if let Some(v) = self.a5_integral {
            rep.constant("a5_integral", v);
        }
        rep.grid_entry("conditions", &self.grid);
        rep.pass = self.basic_conditions() && self.phi_ratio_bounds && self.phi_prime_ratio_monotone;
        rep
    }
}

fn lattice_values(f: impl Fn(f64) -> f64, lo: f64, n_per: u32, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| f(lo * 10f64.powf(i as f64 / n_per as f64)))
        .collect()
}

/// For each `k`, the extremum over `j` of `values[j+k]/values[j] · t_k^p`.
fn profile(values: &[f64], nj: usize, nk: usize, n_per: u32, p: f64, upper: bool) -> Vec<f64> {
    (0..nk)
        .map(|k| {
            let tk = 10f64.powf(k as f64 / n_per as f64).powf(p);
            let it = (0..nj).map(|j| {
                let r = values[j + k] / values[j];
                if r.is_finite() {
                    r * tk
                } else {
                    0.0
                }
            });
            if upper {
                it.fold(f64::NEG_INFINITY, f64::max)
            } else {
                it.fold(f64::INFINITY, f64::min)
            }
        })
        .collect()
}

/// Is the running constant bounded over the scanned range of `t`?
///
/// Bounded means the extremum moves by less than `10^{±0.005}` over the last
/// decade, or by at most half of what it moved over the decade before
/// (geometric convergence of a correction term).
fn stable(prof: &[f64], n_per: u32, upper: bool) -> Option<f64> {
    let n = n_per as usize;
    let len = prof.len();
    let ext = |s: &[f64]| {
        if upper {
            s.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        } else {
            s.iter().cloned().fold(f64::INFINITY, f64::min)
        }
    };
    let all = ext(prof);
    let head = ext(&prof[..len - n]);
    let head2 = ext(&prof[..len - 2 * n]);
    if !(all.is_finite() && all > 0.0 && head2 > 0.0) {
        return None;
    }
    // growth (upper) or decay (lower) per decade, in decades
    let sgn = if upper { 1.0 } else { -1.0 };
    let g_last = sgn * (all / head).log10();
    let g_prev = sgn * (head / head2).log10();
    (g_last <= STABILITY || g_last <= 0.5 * g_prev).then_some(all)
}

/// Exponents `p` on the lattice `{0.01, 0.02, ..., max}`.
fn exponent_lattice(max: f64) -> Vec<f64> {
    let n = (max / EXPONENT_STEP).round() as usize;
    (1..=n).map(|i| i as f64 / 100.0).collect()
}

/// Largest exponent with a stable upper constant; `values` sampled on the lattice.
fn infer_upper(values: &[f64], nj: usize, nk: usize, n_per: u32, max_p: f64) -> Option<ScalingPair> {
    exponent_lattice(max_p)
        .into_iter()
        .rev()
        .find_map(|p| {
            stable(&profile(values, nj, nk, n_per, p, true), n_per, true)
                .map(|c| ScalingPair { constant: c, exponent: p })
        })
}

/// Smallest exponent `p` with a stable lower constant for `ratio · t^p`.
fn infer_lower(values: &[f64], nj: usize, nk: usize, n_per: u32, max_p: f64) -> Option<ScalingPair> {
    exponent_lattice(max_p).into_iter().find_map(|p| {
        stable(&profile(values, nj, nk, n_per, p, false), n_per, false)
            .map(|c| ScalingPair { constant: c, exponent: p })
    })
}

/// Largest `q` with `φ(λt)/φ(λ) · t^{-q}` bounded below stably.
fn infer_growth(values: &[f64], nj: usize, nk: usize, n_per: u32) -> Option<ScalingPair> {
    exponent_lattice(0.99).into_iter().rev().find_map(|q| {
        stable(&profile(values, nj, nk, n_per, -q, false), n_per, false)
            .map(|c| ScalingPair { constant: c, exponent: q })
    })
}

fn is_decreasing(v: &[f64], rel: f64) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + rel))
}

/// Decide transience in dimension `d` and, if transient, integrate
/// `∫₀¹ λ^{d/2-1}/φ(λ) dλ`.
pub fn a5_check(f: &BernsteinFunction, d: usize) -> (bool, Option<f64>) {
    let h = |l: f64| l.powf(d as f64 / 2.0 - 1.0) / f.phi(l);
    let (l1, l2) = (1e-12, 1e-10);
    let slope = (h(l2).ln() - h(l1).ln()) / (l2.ln() - l1.ln());
    if slope <= -0.99 {
        return (false, None);
    }
    // in x = ln λ the integrand is λ·h(λ)
    let g = |x: f64| {
        let l = x.exp();
        l * h(l)
    };
    let x_lo = l1.ln();
    let body = integrate(g, x_lo, 0.0, &QuadOptions::with_rel_tol(1e-10));
    let head = l1 * h(l1) / (slope + 1.0);
    (true, body.ok().map(|b| b.value + head))
}

/// Check the scaling and regularity conditions on the grid.
pub fn verify_conditions(f: &BernsteinFunction, d: usize, grid: &ConditionGrid) -> Result<ScalingConditionReport> {
    if d == 0 {
        return domain_err("dimension must be at least 1");
    }
    if grid.t_decades < 2 || grid.per_decade == 0 {
        return Err(Error::Invalid("condition grid needs at least two decades of t".into()));
    }
    let n = grid.per_decade;
    let nj = (grid.lambda_decades * n + 1) as usize;
    let nk = (grid.t_decades * n + 1) as usize;
    let total = nj + nk - 1;

    let dphi = lattice_values(|l| f.phi_prime(l), grid.lambda_lo, n, total);
    let phi = lattice_values(|l| f.phi(l), grid.lambda_lo, n, total);

    let a3 = infer_upper(&dphi, nj, nk, n, 1.0);
    let a4 = a3.and_then(|p3| {
        infer_lower(&dphi, nj, nk, n, 2.0).filter(|p4| p4.exponent < 2.0 * p3.exponent)
    });

    let mj = (grid.mu_lambda_decades * n + 1) as usize;
    let mu_vals = lattice_values(|t| f.mu(t), grid.mu_lambda_lo, n, mj + nk - 1);
    let a6 = infer_lower(&mu_vals, mj, nk, n, 5.0);

    let a7 = match a3 {
        Some(p3) => infer_growth(&phi, nj, nk, n)
            .map(|p| ScalingPair {
                constant: p.constant,
                exponent: 1.0 - p.exponent,
            })
            .filter(|p| p.exponent >= p3.exponent - 1e-12 && p.exponent < 1.0),
        None => None,
    };

    // (A2) on a linear grid
    let rs: Vec<f64> = (1..=grid.a2_points)
        .map(|i| 1.0 + (grid.a2_r_max - 1.0) * i as f64 / grid.a2_points as f64)
        .collect();
    let a2 = rs
        .iter()
        .map(|&r| f.mu(r) / f.mu(r + 1.0))
        .try_fold(0.0f64, |acc, c| c.is_finite().then(|| acc.max(c)));

    let mono_grid = logspace(1e-4, 1e4, 81);
    let mu_dec = is_decreasing(&mono_grid.iter().map(|&t| f.mu(t)).collect::<Vec<_>>(), 1e-9);
    let u_dec = is_decreasing(&mono_grid.iter().map(|&t| f.u(t)).collect::<Vec<_>>(), 1e-9);

    let mut a5 = BTreeMap::new();
    for dd in 1..=4usize.max(d) {
        a5.insert(dd, a5_check(f, dd).0);
    }
    let a5_integral = a5_check(f, d).1;

    // min(1, λ) ≤ φ(λx)/φ(x) ≤ max(1, λ) over all pairs on the φ lattice
    let mut ratio_ok = true;
    for (i, &pi) in phi.iter().enumerate() {
        for (j, &pj) in phi.iter().enumerate() {
            let lam = 10f64.powf((i as f64 - j as f64) / n as f64);
            let r = pi / pj;
            let tol = 1e-12;
            if r < lam.min(1.0) * (1.0 - tol) || r > lam.max(1.0) * (1.0 + tol) {
                ratio_ok = false;
            }
        }
    }

    // λ²φ'(λ)/φ(λ)^a nondecreasing
    let lg = logspace(1e-4, 1e4, 161);
    let monotone_ok = [0.0, 1.0, 2.0].iter().all(|&a| {
        let v: Vec<f64> = lg.iter().map(|&l| l * l * f.phi_prime(l) / f.phi(l).powf(a)).collect();
        v.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-10))
    });

    Ok(ScalingConditionReport {
        name: f.name.clone(),
        a3,
        a4,
        a6,
        a7,
        a2_constant: a2,
        mu_decreasing: mu_dec,
        u_decreasing: u_dec,
        a5_transient: a5,
        a5_integral,
        dimension: d,
        phi_ratio_bounds: ratio_ok,
        phi_prime_ratio_monotone: monotone_ok,
        grid: grid.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::catalog;
    use super::*;

    #[test]
    fn upper_constant_value() {
        assert!((upper_density_constant() - 3.784).abs() < 1e-3);
    }

    #[test]
    fn stable_exponent_is_one_minus_alpha() {
        let f = catalog("stable:0.5").unwrap();
        let rep = verify_conditions(&f, 3, &ConditionGrid::default()).unwrap();
        let a3 = rep.a3.unwrap();
        assert_eq!(a3.exponent, 0.5);
        assert!((a3.constant - 1.0).abs() < 1e-9);
        assert_eq!(rep.a4.unwrap().exponent, 0.5);
        assert_eq!(rep.a7.unwrap().exponent, 0.5);
        assert_eq!(rep.a6.unwrap().exponent, 1.5);
        assert!(rep.transient());
        assert!((rep.a5_integral.unwrap() - 1.0).abs() < 1e-8);
        assert!(rep.phi_ratio_bounds && rep.phi_prime_ratio_monotone);
        assert!(!rep.a5_transient[&1]);
    }

    #[test]
    fn gamma_exponent_is_one_and_lacks_large_jump_condition() {
        let f = catalog("gamma").unwrap();
        let rep = verify_conditions(&f, 3, &ConditionGrid::default()).unwrap();
        assert_eq!(rep.a3.unwrap().exponent, 1.0);
        assert!(rep.a6.is_none());
        assert!(rep.a7.is_none());
        assert!(!rep.a5_transient[&2]);
        assert!(rep.a5_transient[&3]);
    }

    #[test]
    fn density_bound_example() {
        let f = catalog("stable:0.5").unwrap();
        let rep = check_density_bounds(&f, &[1.0], 1.0).unwrap();
        assert!(rep.pass);
        let r = rep.get("potential_ratio_max").unwrap();
        assert!((r - 1.0 / (0.5 * std::f64::consts::PI.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn grid_outside_range_is_rejected() {
        let f = catalog("stable:0.5").unwrap();
        assert!(check_density_bounds(&f, &[0.5, 2.0], 1.0).is_err());
    }
}
