//! Subordinated kernels as time integrals of heat kernels against the
//! potential density `u` or the Lévy density `μ`.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::a5_check;
use crate::bernstein::BernsteinFunction;
use crate::domain::{dist, dist_to_boundary, Domain, DomainKind};
use crate::error::{unsupported, Error, Result};
use crate::heat::HeatKernelEval;
use crate::quad::{Estimate, WG, WGK, XGK};

pub mod scan;

const T_LO: f64 = 1e-18;
const T_HI: f64 = 1e18;
/// `e^{-z}` underflows past this.
const UNDERFLOW: f64 = 745.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailPolicy {
    /// Eigenvalue decay on bounded domains, Gaussian bound otherwise.
    Auto,
    EigenvalueDecay,
    GaussianTail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    /// Lay the time panels out in `s = |x-y|²/t` around each pair instead of
    /// on a shared absolute lattice (slower: densities are not cached).
    pub near_diagonal_substitution: bool,
    /// Extra panel breakpoints on the time axis.
    pub split_points: Vec<f64>,
    pub tail_policy: TailPolicy,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-8,
            near_diagonal_substitution: false,
            split_points: vec![],
            tail_policy: TailPolicy::Auto,
        }
    }
}

impl QuadratureConfig {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        QuadratureConfig {
            rel_tol,
            ..Default::default()
        }
    }

    fn panels_per_decade(&self) -> usize {
        (-self.rel_tol.log10()).ceil().clamp(4.0, 16.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    GX,
    GYD,
    #[serde(rename = "jX")]
    JX,
    JYD,
    #[serde(rename = "kappaYD")]
    KappaYD,
    F,
    #[serde(rename = "qU")]
    QU,
    #[serde(rename = "gU")]
    GU,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: f64,
    pub est_error: f64,
    pub kind: KernelKind,
}

impl KernelValue {
    pub fn rel_error(&self) -> f64 {
        if self.value == 0.0 {
            if self.est_error == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.est_error / self.value.abs()
        }
    }
}

/// Gauss–Kronrod panels on `ln t`.
#[derive(Debug, Clone)]
struct Lattice {
    t: Vec<f64>,
    /// Kronrod and Gauss weights including the Jacobian `t`.
    wk: Vec<f64>,
    wg: Vec<f64>,
    /// `(first node, t_left, t_right)` per panel.
    panels: Vec<(usize, f64, f64)>,
}

impl Lattice {
    fn new(breaks: &[f64]) -> Self {
        let mut l = Lattice {
            t: vec![],
            wk: vec![],
            wg: vec![],
            panels: vec![],
        };
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let c = 0.5 * (a + b);
            let h = 0.5 * (b - a);
            l.panels.push((l.t.len(), a.exp(), b.exp()));
            let mut push = |x: f64, k: f64, g: f64| {
                let t = x.exp();
                l.t.push(t);
                l.wk.push(k * h * t);
                l.wg.push(g * h * t);
            };
            push(c, WGK[10], 0.0);
            for j in 0..10 {
                let g = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
                push(c - h * XGK[j], WGK[j], g);
                push(c + h * XGK[j], WGK[j], g);
            }
        }
        l
    }

    fn breakpoints(lo: f64, hi: f64, per_decade: usize, anchor: f64, splits: &[f64]) -> Vec<f64> {
        let step = std::f64::consts::LN_10 / per_decade as f64;
        let (xl, xh, xa) = (lo.ln(), hi.ln(), anchor.ln());
        let k0 = ((xl - xa) / step).floor() as i64;
        let k1 = ((xh - xa) / step).ceil() as i64;
        let mut v: Vec<f64> = (k0..=k1).map(|k| xa + k as f64 * step).collect();
        for &s in splits {
            if s > 0.0 && s.ln() > v[0] && s.ln() < v[v.len() - 1] {
                v.push(s.ln());
            }
        }
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        v
    }

    fn t_max(&self) -> f64 {
        self.panels.last().map_or(0.0, |p| p.2)
    }

    fn t_min(&self) -> f64 {
        self.panels.first().map_or(0.0, |p| p.1)
    }

    /// `Σ w·k·weight` with `|Kronrod - Gauss|` per panel as the error.
    fn integrate(&self, weight: &dyn Fn(usize, f64) -> f64, k: &dyn Fn(f64) -> f64, t_floor: f64) -> Estimate {
        let mut total = Estimate::new(0.0, 0.0);
        for &(start, _, right) in &self.panels {
            if right < t_floor {
                continue;
            }
            let (mut sk, mut sg) = (0.0, 0.0);
            for i in start..start + 21 {
                let kv = k(self.t[i]);
                if kv == 0.0 {
                    continue;
                }
                let v = kv * weight(i, self.t[i]);
                sk += self.wk[i] * v;
                sg += self.wg[i] * v;
            }
            total.value += sk;
            total.error += (sk - sg).abs();
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Weight {
    Potential,
    Levy,
}

/// Evaluator holding a Bernstein function, a quadrature configuration and
/// densities cached on a shared time lattice.
#[derive(Debug)]
pub struct KernelEngine {
    pub f: BernsteinFunction,
    pub cfg: QuadratureConfig,
    lattice: Lattice,
    u: OnceLock<Vec<f64>>,
    mu: OnceLock<Vec<f64>>,
}

impl KernelEngine {
    pub fn new(f: &BernsteinFunction, cfg: &QuadratureConfig) -> Result<Self> {
        if !(cfg.rel_tol > 0.0 && cfg.rel_tol < 1.0) {
            return Err(Error::Invalid(format!("rel_tol must lie in (0, 1), got {}", cfg.rel_tol)));
        }
        let breaks = Lattice::breakpoints(T_LO, T_HI, cfg.panels_per_decade(), 1.0, &cfg.split_points);
        Ok(KernelEngine {
            f: f.clone(),
            cfg: cfg.clone(),
            lattice: Lattice::new(&breaks),
            u: OnceLock::new(),
            mu: OnceLock::new(),
        })
    }

    fn table(&self, w: Weight) -> &[f64] {
        let (cell, g): (&OnceLock<Vec<f64>>, fn(&BernsteinFunction, f64) -> f64) = match w {
            Weight::Potential => (&self.u, |f, t| f.u(t)),
            Weight::Levy => (&self.mu, |f, t| f.mu(t)),
        };
        cell.get_or_init(|| self.lattice.t.par_iter().map(|&t| g(&self.f, t).max(0.0)).collect())
    }

    fn density(&self, w: Weight, t: f64) -> f64 {
        match w {
            Weight::Potential => self.f.u(t),
            Weight::Levy => self.f.mu(t),
        }
    }

    /// `∫ k(t) w(t) dt` where `k` vanishes below `t_floor` and `tail(T)`
    /// bounds the integral beyond the last panel.
    fn time_integral(
        &self,
        w: Weight,
        anchor: f64,
        t_floor: f64,
        k: &dyn Fn(f64) -> f64,
        tail: &dyn Fn(f64) -> Result<f64>,
    ) -> Result<Estimate> {
        let local;
        let (lat, weight): (&Lattice, Box<dyn Fn(usize, f64) -> f64 + Sync + '_>) = if self.cfg.near_diagonal_substitution {
            let breaks = Lattice::breakpoints(
                (anchor * 1e-30).max(T_LO),
                (anchor * 1e30).min(T_HI),
                self.cfg.panels_per_decade(),
                anchor,
                &self.cfg.split_points,
            );
            local = Lattice::new(&breaks);
            (&local, Box::new(move |_, t| self.density(w, t).max(0.0)))
        } else {
            let tab = self.table(w);
            (&self.lattice, Box::new(move |i, _| tab[i]))
        };
        if t_floor < lat.t_min() {
            return Err(Error::Numeric(format!(
                "length scale too small for the time lattice (t floor {t_floor:e})"
            )));
        }
        let mut est = lat.integrate(&*weight, k, t_floor);
        let tb = tail(lat.t_max())?;
        est.error += tb.abs();
        Ok(est)
    }

    fn finish(&self, est: Estimate, kind: KernelKind) -> Result<KernelValue> {
        let v = KernelValue {
            value: est.value,
            est_error: est.error,
            kind,
        };
        if !v.value.is_finite() || v.value < 0.0 {
            return Err(Error::Numeric(format!("{kind:?} evaluated to {}", v.value)));
        }
        if !(v.rel_error() <= self.cfg.rel_tol) {
            return Err(Error::Numeric(format!(
                "{kind:?} quadrature error {:e} exceeds tolerance (value {:e})",
                v.est_error, v.value
            )));
        }
        Ok(v)
    }

    fn gaussian_floor(r2: f64) -> f64 {
        r2 / (4.0 * UNDERFLOW)
    }

    /// `G^X` at separation `r`.
    pub fn green_x_r(&self, d: usize, r: f64) -> Result<KernelValue> {
        if !(r > 0.0) {
            return Err(Error::Domain("green_X needs x ≠ y".into()));
        }
        let (transient, _) = a5_check(&self.f, d);
        if !transient {
            return unsupported(format!("{} is recurrent in dimension {d}; G^X does not exist", self.f.name));
        }
        let r2 = r * r;
        let dd = d as f64;
        let k = |t: f64| (-0.5 * dd * (4.0 * std::f64::consts::PI * t).ln() - r2 / (4.0 * t)).exp();
        let f = &self.f;
        let tail = |t: f64| -> Result<f64> {
            let c = (4.0 * std::f64::consts::PI).powf(-0.5 * dd);
            if d >= 3 {
                Ok(f.u(t) * c * t.powf(1.0 - 0.5 * dd) / (0.5 * dd - 1.0))
            } else {
                // extrapolate the local power law of t^{-d/2} u(t)
                let s = (1.0 - 0.5 * dd) + (f.u(t) / f.u(t / 10.0)).ln() / std::f64::consts::LN_10;
                if s >= 0.0 {
                    return Err(Error::Numeric("potential tail does not decay".into()));
                }
                Ok(c * f.u(t) * t.powf(1.0 - 0.5 * dd) / -s)
            }
        };
        let est = self.time_integral(Weight::Potential, r2, Self::gaussian_floor(r2), &k, &tail)?;
        self.finish(est, KernelKind::GX)
    }

    pub fn green_x(&self, x: &[f64], y: &[f64]) -> Result<KernelValue> {
        self.green_x_r(x.len(), dist(x, y))
    }

    /// `j^X(r)`.
    pub fn jump_x(&self, d: usize, r: f64) -> Result<KernelValue> {
        if !(r > 0.0) {
            return Err(Error::Domain("jump_X needs r > 0".into()));
        }
        let r2 = r * r;
        let dd = d as f64;
        let k = |t: f64| (-0.5 * dd * (4.0 * std::f64::consts::PI * t).ln() - r2 / (4.0 * t)).exp();
        let tail = |t: f64| Ok(self.f.levy_tail(t).max(0.0) * (4.0 * std::f64::consts::PI * t).powf(-0.5 * d as f64));
        let est = self.time_integral(Weight::Levy, r2, Self::gaussian_floor(r2), &k, &tail)?;
        self.finish(est, KernelKind::JX)
    }

    fn check_pair(&self, h: &HeatKernelEval, x: &[f64], y: &[f64]) -> Result<f64> {
        let dx = dist_to_boundary(&h.domain, x)?;
        let dy = dist_to_boundary(&h.domain, y)?;
        let r = dist(x, y);
        if !(r > 0.0) {
            return Err(Error::Domain("kernel needs x ≠ y".into()));
        }
        if dx.min(dy) < 1e-4 * r {
            return Err(Error::Numeric(format!(
                "refused: boundary distance {:e} is below 1e-4·|x-y|",
                dx.min(dy)
            )));
        }
        Ok(r)
    }

    /// Bound on `∫_T^∞ p^D(t,x,y) w(t) dt`.
    fn killed_tail(&self, h: &HeatKernelEval, w: Weight, x: &[f64], y: &[f64], t: f64) -> Result<f64> {
        let d = h.d() as f64;
        let c = (4.0 * std::f64::consts::PI).powf(-0.5 * d);
        let bounded = matches!(h.domain.kind, DomainKind::Box { .. });
        let policy = match self.cfg.tail_policy {
            TailPolicy::Auto if bounded => TailPolicy::EigenvalueDecay,
            TailPolicy::Auto => TailPolicy::GaussianTail,
            p => p,
        };
        match (policy, &h.domain.kind) {
            (TailPolicy::EigenvalueDecay, DomainKind::Box { lo, hi }) => {
                // p^D ≤ ∏ (2/L) e^{-w²t}/(1 - e^{-3w²t})
                let mut k = 1.0;
                for (a, b) in lo.iter().zip(hi) {
                    let l = b - a;
                    let w2 = (std::f64::consts::PI / l).powi(2);
                    k *= 2.0 / l / -(-3.0 * w2 * t).exp_m1();
                }
                let l1 = h.principal_eigenvalue().expect("box");
                let decay = (-l1 * t).exp();
                Ok(match w {
                    Weight::Potential => k * self.f.u(t) * decay / l1,
                    Weight::Levy => k * self.f.levy_tail(t).max(0.0) * decay,
                })
            }
            (TailPolicy::EigenvalueDecay, _) => unsupported("eigenvalue tails need a bounded domain"),
            (_, DomainKind::HalfSpace) => {
                // p^D ≤ p · x_d y_d / t
                let n = x.len() - 1;
                let xy = x[n] * y[n];
                Ok(match w {
                    Weight::Potential => self.f.u(t) * c * xy * t.powf(-0.5 * d) / (0.5 * d),
                    Weight::Levy => self.f.levy_tail(t).max(0.0) * c * t.powf(-0.5 * d) * (xy / t).min(1.0),
                })
            }
            (_, _) => Ok(match w {
                Weight::Potential => {
                    if d < 3.0 {
                        return unsupported("Gaussian potential tails need d ≥ 3");
                    }
                    self.f.u(t) * c * t.powf(1.0 - 0.5 * d) / (0.5 * d - 1.0)
                }
                Weight::Levy => self.f.levy_tail(t).max(0.0) * c * t.powf(-0.5 * d),
            }),
        }
    }

    fn killed_integral(&self, h: &HeatKernelEval, w: Weight, x: &[f64], y: &[f64]) -> Result<Estimate> {
        let r = self.check_pair(h, x, y)?;
        let k = |t: f64| h.dirichlet_kernel(t, x, y).unwrap_or(0.0);
        let tail = |t: f64| self.killed_tail(h, w, x, y, t);
        self.time_integral(w, r * r, Self::gaussian_floor(r * r), &k, &tail)
    }

    /// `G^{Y^D}(x, y)`.
    pub fn green_yd(&self, h: &HeatKernelEval, x: &[f64], y: &[f64]) -> Result<KernelValue> {
        let est = self.killed_integral(h, Weight::Potential, x, y)?;
        self.finish(est, KernelKind::GYD)
    }

    /// `J^{Y^D}(x, y)`.
    pub fn jump_yd(&self, h: &HeatKernelEval, x: &[f64], y: &[f64]) -> Result<KernelValue> {
        let est = self.killed_integral(h, Weight::Levy, x, y)?;
        self.finish(est, KernelKind::JYD)
    }

    /// `j^X(|x-y|) - J^{Y^D}(x,y) = ∫ (p - p^D) μ dt`, computed directly.
    pub fn jump_deficit(&self, h: &HeatKernelEval, x: &[f64], y: &[f64]) -> Result<KernelValue> {
        let r = self.check_pair(h, x, y)?;
        let dx = h.domain.signed_distance(x);
        let dy = h.domain.signed_distance(y);
        // p - p^D carries e^{-δ_x δ_y / t} at least, and the free Gaussian
        let k = |t: f64| h.dirichlet_deficit(t, x, y).unwrap_or(0.0);
        let floor = Self::gaussian_floor(r * r + 4.0 * dx * dy);
        let d = h.d();
        let tail = |t: f64| Ok(self.f.levy_tail(t).max(0.0) * (4.0 * std::f64::consts::PI * t).powf(-0.5 * d as f64));
        let est = self.time_integral(Weight::Levy, r * r, floor, &k, &tail)?;
        let v = KernelValue {
            value: est.value,
            est_error: est.error,
            kind: KernelKind::JX,
        };
        if !v.value.is_finite() || v.value < 0.0 {
            return Err(Error::Numeric(format!("jump deficit evaluated to {}", v.value)));
        }
        Ok(v)
    }

    /// `F(x,y) = J^{Y^D}/J^X - 1`, with `F(x,x) = 0`.
    pub fn compensator_f(&self, h: &HeatKernelEval, x: &[f64], y: &[f64]) -> Result<KernelValue> {
        if dist(x, y) == 0.0 {
            dist_to_boundary(&h.domain, x)?;
            return Ok(KernelValue {
                value: 0.0,
                est_error: 0.0,
                kind: KernelKind::F,
            });
        }
        let def = self.jump_deficit(h, x, y)?;
        let j = self.jump_x(h.d(), dist(x, y))?;
        let value = -def.value / j.value;
        let est_error = def.est_error / j.value + def.value * j.est_error / (j.value * j.value);
        Ok(KernelValue {
            value: value.clamp(-1.0, 0.0),
            est_error,
            kind: KernelKind::F,
        })
    }

    /// `κ^{Y^D}(x) = ∫ (1 - P_x(t < τ_D)) μ(t) dt`.
    pub fn killing_density(&self, h: &HeatKernelEval, x: &[f64]) -> Result<KernelValue> {
        let delta = dist_to_boundary(&h.domain, x)?;
        if delta == 0.0 {
            return Err(Error::Domain("killing density is infinite on the boundary".into()));
        }
        let k = |t: f64| h.exit_probability(t, x).unwrap_or(0.0);
        let tail = |t: f64| Ok(self.f.levy_tail(t).max(0.0));
        let est = self.time_integral(Weight::Levy, delta * delta, Self::gaussian_floor(delta * delta), &k, &tail)?;
        self.finish(est, KernelKind::KappaYD)
    }

    /// `q_U(x) = ∫_U (J^X - J^{Y^D})(x, y) dy` for an axis-aligned box `U ⊂ D`.
    pub fn q_u(&self, h: &HeatKernelEval, u: &Domain, x: &[f64]) -> Result<KernelValue> {
        let (lo, hi) = match &u.kind {
            DomainKind::Box { lo, hi } => (lo, hi),
            _ => return unsupported("q_U is implemented for box regions"),
        };
        let delta = dist_to_boundary(&h.domain, x)?;
        if delta == 0.0 {
            return Err(Error::Domain("x lies on the boundary".into()));
        }
        // ∏F - ∏(F - D) = Σ_i (∏_{j<i} (F_j - D_j)) D_i (∏_{j>i} F_j)
        let k = |t: f64| {
            let m = match h.box_masses(t, x, lo, hi) {
                Ok(m) => m,
                Err(_) => return 0.0,
            };
            let mut s = 0.0;
            for i in 0..m.len() {
                let mut p = m[i].1;
                for (j, &(f, dm)) in m.iter().enumerate() {
                    if j < i {
                        p *= f - dm;
                    } else if j > i {
                        p *= f;
                    }
                }
                s += p;
            }
            s
        };
        // the integrand is at most the free mass of U
        let vol: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
        let d = h.d() as f64;
        let tail = |t: f64| Ok(self.f.levy_tail(t).max(0.0) * (vol * (4.0 * std::f64::consts::PI * t).powf(-0.5 * d)).min(1.0));
        let est = self.time_integral(Weight::Levy, delta * delta, Self::gaussian_floor(delta * delta), &k, &tail)?;
        self.finish(est, KernelKind::QU)
    }
}

#[allow(non_snake_case)]
pub fn green_X(f: &BernsteinFunction, d: usize, x: &[f64], y: &[f64], cfg: &QuadratureConfig) -> Result<KernelValue> {
    if x.len() != d || y.len() != d {
        return Err(Error::Invalid("point dimension does not match d".into()));
    }
    KernelEngine::new(f, cfg)?.green_x(x, y)
}

#[allow(non_snake_case)]
pub fn green_YD(f: &BernsteinFunction, d: &Domain, x: &[f64], y: &[f64], cfg: &QuadratureConfig) -> Result<KernelValue> {
    KernelEngine::new(f, cfg)?.green_yd(&HeatKernelEval::new(d)?, x, y)
}

#[allow(non_snake_case)]
pub fn jump_X(f: &BernsteinFunction, d: usize, r: f64, cfg: &QuadratureConfig) -> Result<KernelValue> {
    KernelEngine::new(f, cfg)?.jump_x(d, r)
}

#[allow(non_snake_case)]
pub fn jump_YD(f: &BernsteinFunction, d: &Domain, x: &[f64], y: &[f64], cfg: &QuadratureConfig) -> Result<KernelValue> {
    KernelEngine::new(f, cfg)?.jump_yd(&HeatKernelEval::new(d)?, x, y)
}

#[allow(non_snake_case)]
pub fn killing_density_YD(f: &BernsteinFunction, d: &Domain, x: &[f64], cfg: &QuadratureConfig) -> Result<KernelValue> {
    KernelEngine::new(f, cfg)?.killing_density(&HeatKernelEval::new(d)?, x)
}

#[allow(non_snake_case)]
pub fn compensator_F(f: &BernsteinFunction, d: &Domain, x: &[f64], y: &[f64], cfg: &QuadratureConfig) -> Result<KernelValue> {
    KernelEngine::new(f, cfg)?.compensator_f(&HeatKernelEval::new(d)?, x, y)
}

#[allow(non_snake_case)]
pub fn q_U(f: &BernsteinFunction, d: &Domain, u: &Domain, x: &[f64], cfg: &QuadratureConfig) -> Result<KernelValue> {
    KernelEngine::new(f, cfg)?.q_u(&HeatKernelEval::new(d)?, u, x)
}

/// `(1 ∧ φ(r^{-2})/√(φ(δ_x^{-2}) φ(δ_y^{-2}))) · φ'(r^{-2})/(r^{d+2} φ(r^{-2})²)`
/// with `δ = δ_U` and `r = |x-y|`.
#[allow(non_snake_case)]
pub fn g_profile_U(f: &BernsteinFunction, u: &Domain, x: &[f64], y: &[f64]) -> Result<f64> {
    let dx = dist_to_boundary(u, x)?;
    let dy = dist_to_boundary(u, y)?;
    let r = dist(x, y);
    if !(r > 0.0) {
        return Err(Error::Domain("profile needs x ≠ y".into()));
    }
    if dx == 0.0 || dy == 0.0 {
        return Ok(0.0);
    }
    let s = r.powi(-2);
    let trunc = (f.phi(s) / (f.phi(dx.powi(-2)) * f.phi(dy.powi(-2))).sqrt()).min(1.0);
    Ok(trunc * crate::bernstein::green_envelope(f, u.d, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::catalog;

    fn engine(key: &str) -> KernelEngine {
        KernelEngine::new(&catalog(key).unwrap(), &QuadratureConfig::default()).unwrap()
    }

    #[test]
    fn riesz_green_oracle() {
        let e = engine("stable:0.5");
        let v = e.green_x_r(3, 1.0).unwrap();
        let exact = 1.0 / (2.0 * std::f64::consts::PI.powi(2));
        assert!((v.value / exact - 1.0).abs() < 1e-8, "{}", v.value);
        assert!(v.rel_error() <= 1e-8);
        for &r in &[0.5, 2.0] {
            let w = e.green_x_r(3, r).unwrap().value * r * r;
            assert!((w / exact - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn cauchy_jump_oracle() {
        let e = engine("stable:0.5");
        let v = e.jump_x(1, 1.0).unwrap();
        assert!((v.value * std::f64::consts::PI - 1.0).abs() < 1e-8, "{}", v.value);
        let ratio = e.jump_x(3, 2.0).unwrap().value / e.jump_x(3, 1.0).unwrap().value;
        assert!((ratio / 2f64.powi(-4) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn recurrent_green_is_unsupported() {
        let e = engine("stable:0.5");
        assert!(matches!(e.green_x_r(1, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn substitution_mode_agrees() {
        let f = catalog("gamma").unwrap();
        let a = KernelEngine::new(&f, &QuadratureConfig::default()).unwrap();
        let cfg = QuadratureConfig {
            near_diagonal_substitution: true,
            ..Default::default()
        };
        let b = KernelEngine::new(&f, &cfg).unwrap();
        let va = a.green_x_r(3, 0.3).unwrap();
        let vb = b.green_x_r(3, 0.3).unwrap();
        assert!((va.value - vb.value).abs() <= va.est_error + vb.est_error);
    }

    #[test]
    fn killed_green_below_free_and_symmetric() {
        let e = engine("stable:0.5");
        let h = HeatKernelEval::new(&Domain::half_space(3).unwrap()).unwrap();
        let x = [0.0, 0.0, 0.4];
        let y = [0.3, 0.1, 0.9];
        let a = e.green_yd(&h, &x, &y).unwrap();
        let b = e.green_yd(&h, &y, &x).unwrap();
        assert!((a.value - b.value).abs() <= a.est_error + b.est_error + 1e-14 * a.value);
        assert!(a.value <= e.green_x(&x, &y).unwrap().value);
        let deep = e.green_yd(&h, &[0.0, 0.0, 100.0], &[0.0, 0.0, 101.0]).unwrap().value;
        let free = e.green_x_r(3, 1.0).unwrap().value;
        assert!(deep / free >= 0.99 && deep / free <= 1.0);
    }

    #[test]
    fn refuses_near_boundary_pairs() {
        let e = engine("stable:0.5");
        let h = HeatKernelEval::new(&Domain::half_space(3).unwrap()).unwrap();
        assert!(matches!(
            e.green_yd(&h, &[0.0, 0.0, 1e-6], &[0.0, 0.0, 1.0]),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn killing_density_oracle() {
        let e = engine("stable:0.5");
        let h = HeatKernelEval::new(&Domain::half_space(3).unwrap()).unwrap();
        let v = e.killing_density(&h, &[0.0, 0.0, 1.0]).unwrap();
        // 4∫erfc /(2π) = 2/π
        assert!((v.value * std::f64::consts::PI / 2.0 - 1.0).abs() < 1e-8, "{}", v.value);
    }

    #[test]
    fn compensator_range() {
        let e = engine("gamma");
        let h = HeatKernelEval::new(&Domain::half_space(3).unwrap()).unwrap();
        let x = [0.0, 0.0, 0.2];
        assert_eq!(e.compensator_f(&h, &x, &x).unwrap().value, 0.0);
        let f = e.compensator_f(&h, &x, &[0.5, 0.0, 0.3]).unwrap().value;
        assert!(f > -1.0 && f <= 0.0);
        let def = e.jump_deficit(&h, &x, &[0.5, 0.0, 0.3]).unwrap();
        let jx = e.jump_x(3, dist(&x, &[0.5, 0.0, 0.3])).unwrap().value;
        let jd = e.jump_yd(&h, &x, &[0.5, 0.0, 0.3]).unwrap().value;
        assert!((jx - jd - def.value).abs() < 1e-7 * jx);
    }

    #[test]
    fn box_domain_kernels() {
        let e = engine("stable:0.5");
        let d = Domain::cuboid(vec![0.0; 3], vec![1.0; 3]).unwrap();
        let h = HeatKernelEval::new(&d).unwrap();
        let x = [0.5, 0.5, 0.5];
        let y = [0.6, 0.4, 0.5];
        let g = e.green_yd(&h, &x, &y).unwrap();
        assert!(g.value < e.green_x(&x, &y).unwrap().value);
        let u = Domain::cuboid(vec![0.4; 3], vec![0.6; 3]).unwrap();
        let q = e.q_u(&h, &u, &x).unwrap();
        assert!(q.value > 0.0);
    }

    #[test]
    fn profile_truncation() {
        let f = catalog("stable:0.5").unwrap();
        let u = Domain::cuboid(vec![0.0; 3], vec![10.0; 3]).unwrap();
        let x = [5.0, 5.0, 5.0];
        let y = [5.01, 5.0, 5.0];
        let g = g_profile_U(&f, &u, &x, &y).unwrap();
        let env = crate::bernstein::green_envelope(&f, 3, 0.01);
        assert!((g / env - 1.0).abs() < 1e-12);
        let near = g_profile_U(&f, &u, &[1e-6, 5.0, 5.0], &[0.5, 5.0, 5.0]).unwrap();
        let far = g_profile_U(&f, &u, &[0.1, 5.0, 5.0], &[0.5, 5.0, 5.0]).unwrap();
        assert!(near < far);
    }
}
