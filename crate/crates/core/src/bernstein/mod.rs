//! Catalog of subordinators: Laplace exponents, Lévy and potential densities.
//!
//! Every entry is a complete Bernstein function with zero drift. Entries are
//! addressed by string keys such as `"stable:0.5"` or `"log-stable:0.5:0.2:+"`.

mod conditions;
mod profiles;

pub use conditions::*;
pub use profiles::*;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{domain_err, Error, Result};
use crate::quad::{integrate_pieces, QuadOptions};
use crate::special::{inverse_digamma, ln_1p_c, ln_mittag_leffler_pos, talbot, TALBOT_NODES};

/// Sign of the logarithmic correction exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LogSign {
    Plus,
    Minus,
}

impl LogSign {
    fn value(self) -> f64 {
        match self {
            LogSign::Plus => 1.0,
            LogSign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    /// `λ^α`
    Stable { alpha: f64 },
    /// `log(1+λ)`
    Gamma,
    /// `(λ + m^{1/α})^α − m`
    Relativistic { alpha: f64, m: f64 },
    /// `λ^β + λ^α` with `β < α`
    SumStable { beta: f64, alpha: f64 },
    /// `log(1 + λ^α)`
    GeometricStable { alpha: f64 },
    /// `λ^α log(1+λ)^{±β}`
    LogStable { alpha: f64, beta: f64, sign: LogSign },
}

/// How a density is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    ClosedForm,
    MarginalIntegral,
    NumericInversion,
}

/// A Bernstein function `λ ↦ c·φ₀(aλ)` where `φ₀` is a catalog family.
///
/// The scales are how normalization and [`rescale`] are represented; the
/// raw catalog entry has `a = c = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinFunction {
    pub name: String,
    pub family: Family,
    pub drift_b: f64,
    pub lambda_scale: f64,
    pub value_scale: f64,
}

impl fmt::Display for BernsteinFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

fn parse_param(s: &str, key: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Invalid(format!("bad parameter `{s}` in catalog key `{key}`")))
}

fn check_open_unit(v: f64, what: &str, key: &str) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{what} = {v} must lie in (0,1) in `{key}`")))
    }
}

impl FromStr for BernsteinFunction {
    type Err = Error;

    fn from_str(key: &str) -> Result<Self> {
        let parts: Vec<&str> = key.trim().split(':').collect();
        let arity = |n: usize| {
            if parts.len() == n + 1 {
                Ok(())
            } else {
                Err(Error::Invalid(format!("catalog key `{key}` expects {n} parameter(s)")))
            }
        };
        let family = match parts[0] {
            "stable" => {
                arity(1)?;
                let alpha = parse_param(parts[1], key)?;
                check_open_unit(alpha, "alpha", key)?;
                Family::Stable { alpha }
            }
            "gamma" => {
                arity(0)?;
                Family::Gamma
            }
            "relativistic" => {
                arity(2)?;
                let alpha = parse_param(parts[1], key)?;
                let m = parse_param(parts[2], key)?;
                check_open_unit(alpha, "alpha", key)?;
                if m <= 0.0 {
                    return Err(Error::Invalid(format!("m must be positive in `{key}`")));
                }
                Family::Relativistic { alpha, m }
            }
            "sum-stable" => {
                arity(2)?;
                let beta = parse_param(parts[1], key)?;
                let alpha = parse_param(parts[2], key)?;
                check_open_unit(beta, "beta", key)?;
                check_open_unit(alpha, "alpha", key)?;
                if beta >= alpha {
                    return Err(Error::Invalid(format!("need beta < alpha in `{key}`")));
                }
                Family::SumStable { beta, alpha }
            }
            "geometric-stable" => {
                arity(1)?;
                let alpha = parse_param(parts[1], key)?;
                check_open_unit(alpha, "alpha", key)?;
                Family::GeometricStable { alpha }
            }
            "log-stable" => {
                arity(3)?;
                let alpha = parse_param(parts[1], key)?;
                let beta = parse_param(parts[2], key)?;
                check_open_unit(alpha, "alpha", key)?;
                let sign = match parts[3] {
                    "+" => LogSign::Plus,
                    "-" => LogSign::Minus,
                    s => return Err(Error::Invalid(format!("sign `{s}` must be + or - in `{key}`"))),
                };
                let limit = match sign {
                    LogSign::Plus => 1.0 - alpha,
                    LogSign::Minus => alpha,
                };
                if !(beta > 0.0 && beta < limit) {
                    return Err(Error::Invalid(format!("beta must lie in (0, {limit}) in `{key}`")));
                }
                Family::LogStable { alpha, beta, sign }
            }
            other => return Err(Error::Invalid(format!("unknown catalog family `{other}`"))),
        };
        Ok(BernsteinFunction {
            name: key.trim().to_string(),
            family,
            drift_b: 0.0,
            lambda_scale: 1.0,
            value_scale: 1.0,
        })
    }
}

/// The keys shipped with the catalog.
pub const CATALOG_KEYS: [&str; 7] = [
    "stable:0.5",
    "gamma",
    "relativistic:0.5:1.0",
    "sum-stable:0.3:0.7",
    "geometric-stable:0.5",
    "log-stable:0.5:0.2:+",
    "log-stable:0.5:0.2:-",
];

/// Look up a catalog entry by key.
pub fn catalog(key: &str) -> Result<BernsteinFunction> {
    key.parse()
}

// ---- base family, a = c = 1 -------------------------------------------------

fn base_phi(fam: &Family, l: f64) -> f64 {
    match *fam {
        Family::Stable { alpha } => l.powf(alpha),
        Family::Gamma => l.ln_1p(),
        Family::Relativistic { alpha, m } => {
            let th = m.powf(1.0 / alpha);
            // (l+θ)^α − θ^α without cancellation for small l
            m * (alpha * (l / th).ln_1p()).exp_m1()
        }
        Family::SumStable { beta, alpha } => l.powf(beta) + l.powf(alpha),
        Family::GeometricStable { alpha } => l.powf(alpha).ln_1p(),
        Family::LogStable { alpha, beta, sign } => l.powf(alpha) * l.ln_1p().powf(sign.value() * beta),
    }
}

fn base_phi_prime(fam: &Family, l: f64) -> f64 {
    match *fam {
        Family::Stable { alpha } => alpha * l.powf(alpha - 1.0),
        Family::Gamma => 1.0 / (1.0 + l),
        Family::Relativistic { alpha, m } => {
            let th = m.powf(1.0 / alpha);
            alpha * (l + th).powf(alpha - 1.0)
        }
        Family::SumStable { beta, alpha } => beta * l.powf(beta - 1.0) + alpha * l.powf(alpha - 1.0),
        Family::GeometricStable { alpha } => {
            let la = l.powf(alpha);
            alpha * la / (l * (1.0 + la))
        }
        Family::LogStable { alpha, beta, sign } => {
            let sb = sign.value() * beta;
            let lg = l.ln_1p();
            l.powf(alpha) * lg.powf(sb) * (alpha / l + sb / (lg * (1.0 + l)))
        }
    }
}

fn base_phi_c(fam: &Family, z: Complex64) -> Complex64 {
    match *fam {
        Family::Stable { alpha } => z.powf(alpha),
        Family::Gamma => ln_1p_c(z),
        Family::Relativistic { alpha, m } => {
            let th = m.powf(1.0 / alpha);
            (z + th).powf(alpha) - m
        }
        Family::SumStable { beta, alpha } => z.powf(beta) + z.powf(alpha),
        Family::GeometricStable { alpha } => ln_1p_c(z.powf(alpha)),
        Family::LogStable { alpha, beta, sign } => z.powf(alpha) * ln_1p_c(z).powf(sign.value() * beta),
    }
}

fn base_phi_prime_c(fam: &Family, z: Complex64) -> Complex64 {
    match *fam {
        Family::Stable { alpha } => z.powf(alpha - 1.0) * alpha,
        Family::Gamma => (z + 1.0).inv(),
        Family::Relativistic { alpha, m } => {
            let th = m.powf(1.0 / alpha);
            (z + th).powf(alpha - 1.0) * alpha
        }
        Family::SumStable { beta, alpha } => z.powf(beta - 1.0) * beta + z.powf(alpha - 1.0) * alpha,
        Family::GeometricStable { alpha } => {
            let za = z.powf(alpha);
            za * alpha / (z * (za + 1.0))
        }
        Family::LogStable { alpha, beta, sign } => {
            let sb = sign.value() * beta;
            let lg = ln_1p_c(z);
            z.powf(alpha) * lg.powf(sb) * (alpha / z + sb / (lg * (z + 1.0)))
        }
    }
}

fn base_mu(fam: &Family, t: f64) -> f64 {
    match *fam {
        Family::Stable { alpha } => alpha / gamma(1.0 - alpha) * t.powf(-1.0 - alpha),
        Family::Gamma => (-t).exp() / t,
        Family::Relativistic { alpha, m } => {
            let th = m.powf(1.0 / alpha);
            alpha / gamma(1.0 - alpha) * t.powf(-1.0 - alpha) * (-th * t).exp()
        }
        Family::SumStable { beta, alpha } => {
            beta / gamma(1.0 - beta) * t.powf(-1.0 - beta) + alpha / gamma(1.0 - alpha) * t.powf(-1.0 - alpha)
        }
        Family::GeometricStable { .. } | Family::LogStable { .. } => {
            talbot(|z| base_phi_prime_c(fam, z), t, TALBOT_NODES) / t
        }
    }
}

/// Gamma potential density as `∫₀^∞ t^{s-1}e^{-t}/Γ(s) ds`.
fn gamma_potential(t: f64) -> f64 {
    let lt = t.ln();
    let g = |s: f64| {
        if s <= 0.0 {
            f64::NEG_INFINITY
        } else {
            (s - 1.0) * lt - t - ln_gamma(s)
        }
    };
    let s_star = inverse_digamma(lt);
    let peak = g(s_star);
    let w = if s_star < 1.0 { s_star } else { s_star.sqrt() };
    let cut = peak - 16.0 * std::f64::consts::LN_10;
    let mut pts = vec![s_star];
    let mut step = w;
    let mut s = s_star;
    while s > 0.0 {
        s = (s - step).max(0.0);
        pts.push(s);
        if g(s) < cut {
            break;
        }
        step *= 1.5;
    }
    pts.reverse();
    let mut step = w;
    let mut s = s_star;
    loop {
        s += step;
        pts.push(s);
        if g(s) < cut {
            break;
        }
        step *= 1.5;
    }
    let integrand = |s: f64| (g(s) - peak).exp();
    let opts = QuadOptions::with_rel_tol(1e-12);
    match integrate_pieces(integrand, &pts, &opts) {
        Ok(e) => e.value * peak.exp(),
        Err(_) => f64::NAN,
    }
}

fn base_u(fam: &Family, t: f64) -> f64 {
    match *fam {
        Family::Stable { alpha } => t.powf(alpha - 1.0) / gamma(alpha),
        // the marginal integral cancels catastrophically once s* ≍ t is large
        Family::Gamma if t > 20.0 => talbot(|z| base_phi_c(fam, z).inv(), t, TALBOT_NODES),
        Family::Gamma => gamma_potential(t),
        Family::Relativistic { alpha, m } => {
            let th = m.powf(1.0 / alpha);
            if th * t > 40.0 {
                th.powf(1.0 - alpha) / alpha
            } else {
                let x = m * t.powf(alpha);
                (ln_mittag_leffler_pos(alpha, alpha, x) - th * t + (alpha - 1.0) * t.ln()).exp()
            }
        }
        _ => talbot(|z| base_phi_c(fam, z).inv(), t, TALBOT_NODES),
    }
}

fn base_potential_cdf(fam: &Family, t: f64) -> f64 {
    match *fam {
        Family::Stable { alpha } => t.powf(alpha) / gamma(1.0 + alpha),
        _ => talbot(|z| (z * base_phi_c(fam, z)).inv(), t, TALBOT_NODES),
    }
}

impl BernsteinFunction {
    /// Raw Laplace exponent at `λ > 0` (no argument checks).
    pub fn phi(&self, l: f64) -> f64 {
        self.value_scale * base_phi(&self.family, self.lambda_scale * l)
    }

    pub fn phi_prime(&self, l: f64) -> f64 {
        self.value_scale * self.lambda_scale * base_phi_prime(&self.family, self.lambda_scale * l)
    }

    pub fn phi_c(&self, z: Complex64) -> Complex64 {
        base_phi_c(&self.family, z * self.lambda_scale) * self.value_scale
    }

    pub fn phi_prime_c(&self, z: Complex64) -> Complex64 {
        base_phi_prime_c(&self.family, z * self.lambda_scale) * (self.value_scale * self.lambda_scale)
    }

    /// Lévy density `μ(t)`.
    pub fn mu(&self, t: f64) -> f64 {
        self.value_scale / self.lambda_scale * base_mu(&self.family, t / self.lambda_scale)
    }

    /// Potential density `u(t)`.
    pub fn u(&self, t: f64) -> f64 {
        base_u(&self.family, t / self.lambda_scale) / (self.value_scale * self.lambda_scale)
    }

    /// Potential measure `U(0, t]`.
    pub fn potential_cdf(&self, t: f64) -> f64 {
        base_potential_cdf(&self.family, t / self.lambda_scale) / self.value_scale
    }

    /// Tail of the Lévy measure `μ(t, ∞)`, by inversion of `φ(z)/z`.
    pub fn levy_tail(&self, t: f64) -> f64 {
        match self.family {
            Family::Stable { alpha } => {
                let s = t / self.lambda_scale;
                self.value_scale * s.powf(-alpha) / gamma(1.0 - alpha)
            }
            _ => talbot(|z| self.phi_c(z) / z, t, TALBOT_NODES),
        }
    }

    pub fn potential_strategy(&self) -> Strategy {
        match self.family {
            Family::Stable { .. } | Family::Relativistic { .. } => Strategy::ClosedForm,
            Family::Gamma => Strategy::MarginalIntegral,
            _ => Strategy::NumericInversion,
        }
    }

    pub fn levy_strategy(&self) -> Strategy {
        match self.family {
            Family::GeometricStable { .. } | Family::LogStable { .. } => Strategy::NumericInversion,
            _ => Strategy::ClosedForm,
        }
    }

    /// Relative accuracy the densities are certified to, when below full precision.
    pub fn reduced_accuracy(&self) -> Option<f64> {
        match self.family {
            Family::LogStable { .. } => Some(1e-3),
            _ => None,
        }
    }

    /// Family parameters in key order.
    pub fn params(&self) -> Vec<f64> {
        match self.family {
            Family::Stable { alpha } | Family::GeometricStable { alpha } => vec![alpha],
            Family::Gamma => vec![],
            Family::Relativistic { alpha, m } => vec![alpha, m],
            Family::SumStable { beta, alpha } => vec![beta, alpha],
            Family::LogStable { alpha, beta, .. } => vec![alpha, beta],
        }
    }

    /// True if `φ` is a pure power, hence invariant under [`rescale`].
    pub fn is_pure_power(&self) -> bool {
        matches!(self.family, Family::Stable { .. })
    }

    /// Index of the power law `φ(λ) ~ λ^ρ` as `λ → 0`.
    pub fn small_lambda_index(&self) -> f64 {
        match self.family {
            Family::Stable { alpha } | Family::GeometricStable { alpha } => alpha,
            Family::Gamma | Family::Relativistic { .. } => 1.0,
            Family::SumStable { beta, .. } => beta,
            Family::LogStable { alpha, beta, sign } => alpha + sign.value() * beta,
        }
    }

    /// Normalizing constant `1/φ(1)` that makes `φ(1) = 1`.
    pub fn normalization(&self) -> f64 {
        1.0 / self.phi(1.0)
    }

    /// The same function scaled to satisfy `φ(1) = 1`.
    pub fn normalized(&self) -> BernsteinFunction {
        let mut g = self.clone();
        g.value_scale *= self.normalization();
        g
    }

    /// True if this is a raw catalog entry (no rescaling or normalization).
    pub fn is_raw(&self) -> bool {
        self.lambda_scale == 1.0 && self.value_scale == 1.0
    }

    /// Whether `φ(1) = 1` holds, up to rounding.
    pub fn is_normalized(&self) -> bool {
        (self.phi(1.0) - 1.0).abs() < 1e-12
    }

    /// Whether increments of this subordinator can be simulated.
    pub fn supports_sampling(&self) -> bool {
        !matches!(self.family, Family::LogStable { .. })
    }
}

fn check_positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        domain_err(format!("{what} must be positive and finite, got {x}"))
    }
}

/// `φ(λ)` for `λ > 0`.
pub fn eval_phi(f: &BernsteinFunction, lambda: f64) -> Result<f64> {
    check_positive(lambda, "lambda")?;
    Ok(f.phi(lambda))
}

/// `φ'(λ)` for `λ > 0`.
pub fn eval_phi_prime(f: &BernsteinFunction, lambda: f64) -> Result<f64> {
    check_positive(lambda, "lambda")?;
    Ok(f.phi_prime(lambda))
}

/// Lévy density `μ(t)` for `t > 0`.
pub fn levy_density(f: &BernsteinFunction, t: f64) -> Result<f64> {
    check_positive(t, "t")?;
    let v = f.mu(t);
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("{}: Lévy density inversion at t = {t:e} returned {v:e}", f.name)))
    }
}

/// Potential density `u(t)` for `t > 0`.
pub fn potential_density(f: &BernsteinFunction, t: f64) -> Result<f64> {
    check_positive(t, "t")?;
    let v = f.u(t);
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Numeric(format!(
            "{}: potential density ({:?}) at t = {t:e} returned {v:e}",
            f.name,
            f.potential_strategy()
        )))
    }
}

/// `φ^r(λ) = φ(λ r^{-2}) / φ(r^{-2})`, with densities rescaled to match.
pub fn rescale(f: &BernsteinFunction, r: f64) -> Result<BernsteinFunction> {
    if !(r > 0.0 && r <= 1.0) {
        return domain_err(format!("rescale radius must lie in (0,1], got {r}"));
    }
    let f = if f.is_normalized() { f.clone() } else { f.normalized() };
    let a = r.powi(-2);
    let mut g = f.clone();
    g.lambda_scale = f.lambda_scale * a;
    g.value_scale = f.value_scale / f.phi(a);
    if g.is_pure_power() {
        // φ(λ a)/φ(a) = φ(λ) exactly for a pure power
        g.lambda_scale = 1.0;
        g.value_scale = 1.0;
    }
    g.name = format!("{}@r={r}", f.name.split('@').next().unwrap_or(&f.name));
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn all() -> Vec<BernsteinFunction> {
        CATALOG_KEYS.iter().map(|k| catalog(k).unwrap()).collect()
    }

    #[test]
    fn phi_examples() {
        let st = catalog("stable:0.5").unwrap();
        assert!((eval_phi(&st, 4.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((eval_phi_prime(&st, 4.0).unwrap() - 0.25).abs() < 1e-15);
        let g = catalog("gamma").unwrap();
        assert!((eval_phi(&g, 1.0).unwrap() - LN_2).abs() < 1e-15);
        assert!((eval_phi_prime(&g, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let rel = catalog("relativistic:0.5:1.0").unwrap();
        assert!((eval_phi_prime(&rel, 3.0).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn nonpositive_argument_is_domain_error() {
        let st = catalog("stable:0.5").unwrap();
        assert!(matches!(eval_phi(&st, 0.0), Err(Error::Domain(_))));
        assert!(matches!(eval_phi_prime(&st, -1.0), Err(Error::Domain(_))));
        assert!(matches!(levy_density(&st, 0.0), Err(Error::Domain(_))));
        assert!(matches!(potential_density(&st, -2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn phi_vanishes_at_origin() {
        for f in all() {
            assert!(f.phi(1e-300) < 1e-50, "{}", f.name);
        }
    }

    #[test]
    fn stable_density_values() {
        let st = catalog("stable:0.5").unwrap();
        let pi = std::f64::consts::PI;
        assert!((st.mu(1.0) - 0.5 / pi.sqrt()).abs() < 1e-14);
        assert!((st.u(1.0) - 1.0 / pi.sqrt()).abs() < 1e-14);
        assert!((st.mu(2.0) / st.mu(1.0) - 2f64.powf(-1.5)).abs() < 1e-14);
        assert!((st.u(4.0) / st.u(1.0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gamma_potential_matches_inversion() {
        let g = catalog("gamma").unwrap();
        for &t in &[1e-4, 0.01, 0.3, 1.0, 4.0, 19.0] {
            let a = g.u(t);
            let b = talbot(|z| g.phi_c(z).inv(), t, TALBOT_NODES);
            assert!((a / b - 1.0).abs() < 1e-8, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn relativistic_potential_matches_inversion() {
        let f = catalog("relativistic:0.5:1.0").unwrap();
        for &t in &[1e-3, 0.5, 5.0, 39.0, 41.0, 100.0] {
            let a = f.u(t);
            let b = talbot(|z| f.phi_c(z).inv(), t, TALBOT_NODES);
            assert!((a / b - 1.0).abs() < 1e-9, "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn closed_form_mu_matches_inversion() {
        for key in ["stable:0.5", "gamma", "relativistic:0.5:1.0", "sum-stable:0.3:0.7"] {
            let f = catalog(key).unwrap();
            for &t in &[1e-3, 0.1, 1.0, 3.0] {
                let a = f.mu(t);
                let b = talbot(|z| f.phi_prime_c(z), t, TALBOT_NODES) / t;
                assert!((a / b - 1.0).abs() < 1e-8, "{key} t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn keys_parse_and_reject() {
        for f in all() {
            assert_eq!(f.drift_b, 0.0);
        }
        for bad in ["stable", "stable:1.5", "sum-stable:0.7:0.3", "log-stable:0.5:0.6:+", "foo:1", "relativistic:0.5:-1"] {
            assert!(catalog(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn rescale_normalizes_and_keeps_pure_power() {
        for f in all() {
            let g = rescale(&f, 0.3).unwrap();
            assert!((g.phi(1.0) - 1.0).abs() < 1e-12, "{}", f.name);
        }
        let st = catalog("stable:0.5").unwrap();
        let g = rescale(&st, 0.5).unwrap();
        for &l in &[0.1, 1.0, 7.0] {
            assert_eq!(g.phi(l), st.phi(l));
        }
        assert!(rescale(&st, 0.0).is_err());
        assert!(rescale(&st, 1.5).is_err());
    }

    #[test]
    fn rescaled_densities_follow_formulas() {
        let g0 = catalog("gamma").unwrap().normalized();
        let r = 0.2;
        let g = rescale(&g0, r).unwrap();
        let a = r.powi(-2);
        let pa = g0.phi(a);
        for &t in &[0.05, 1.0, 2.0] {
            let u_expect = r * r * pa * g0.u(r * r * t);
            let mu_expect = r * r / pa * g0.mu(r * r * t);
            assert!((g.u(t) / u_expect - 1.0).abs() < 1e-10);
            assert!((g.mu(t) / mu_expect - 1.0).abs() < 1e-12);
        }
    }
}
