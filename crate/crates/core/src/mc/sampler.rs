//! Increments `S_h` of the catalog subordinators.

use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::{BernsteinFunction, Family};
use crate::error::{unsupported, Error, Result};
use crate::report::{BoundCheckReport, Witness};

use super::rng::path_rng;
use super::MeanEstimate;

/// Proposal counts of the tilting rejection step (relativistic entries only).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub proposals: u64,
    pub accepted: u64,
}

impl Tally {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    pub fn add(&mut self, o: Tally) {
        self.proposals += o.proposals;
        self.accepted += o.accepted;
    }
}

/// Sampler for `S_h` with `E e^{-λ S_h} = e^{-h φ(λ)}`.
#[derive(Debug, Clone)]
pub struct SubordinatorSampler {
    f: BernsteinFunction,
}

impl SubordinatorSampler {
    pub fn new(f: &BernsteinFunction) -> Result<Self> {
        if !f.supports_sampling() {
            return unsupported(format!("no sampler for `{}`", f.name));
        }
        if f.drift_b != 0.0 {
            return unsupported("subordinators with drift are not sampled");
        }
        Ok(SubordinatorSampler { f: f.clone() })
    }

    pub fn function(&self) -> &BernsteinFunction {
        &self.f
    }

    pub fn sample<R: Rng + ?Sized>(&self, h: f64, rng: &mut R) -> f64 {
        self.sample_counted(h, rng, &mut Tally::default())
    }

    /// As [`sample`](Self::sample), recording rejection proposals in `tally`.
    pub fn sample_counted<R: Rng + ?Sized>(&self, h: f64, rng: &mut R, tally: &mut Tally) -> f64 {
        // c·φ₀(aλ) at time h is a·S⁰ at time c·h
        let th = h * self.f.value_scale;
        self.f.lambda_scale * base_sample(&self.f.family, th, rng, tally)
    }
}

/// `S_h` for `f`; errors for entries without a sampler.
pub fn sample_subordinator_increment<R: Rng + ?Sized>(f: &BernsteinFunction, h: f64, rng: &mut R) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("time step must be positive, got {h}")));
    }
    Ok(SubordinatorSampler::new(f)?.sample(h, rng))
}

fn base_sample<R: Rng + ?Sized>(fam: &Family, h: f64, rng: &mut R, tally: &mut Tally) -> f64 {
    match *fam {
        Family::Stable { alpha } => stable(alpha, h, rng),
        Family::Gamma => gamma(h, rng),
        Family::SumStable { beta, alpha } => stable(beta, h, rng) + stable(alpha, h, rng),
        Family::Relativistic { alpha, m } => tilted_stable(alpha, m, h, rng, tally),
        Family::GeometricStable { alpha } => {
            let g = gamma(h, rng);
            if g == 0.0 {
                0.0
            } else {
                (g.ln() / alpha + ln_stable_unit(alpha, rng)).exp()
            }
        }
        Family::LogStable { .. } => unreachable!("rejected in new"),
    }
}

/// `ln Z` for `E e^{-λZ} = e^{-λ^α}`, by the Kanter form of Chambers–Mallows–Stuck.
fn ln_stable_unit<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = PI * rng.sample::<f64, _>(Open01);
    let e = -rng.sample::<f64, _>(Open01).ln();
    (alpha * u).sin().ln() - u.sin().ln() / alpha
        + (1.0 - alpha) / alpha * (((1.0 - alpha) * u).sin().ln() - e.ln())
}

fn stable<R: Rng + ?Sized>(alpha: f64, h: f64, rng: &mut R) -> f64 {
    (h.ln() / alpha + ln_stable_unit(alpha, rng)).exp()
}

fn gamma<R: Rng + ?Sized>(h: f64, rng: &mut R) -> f64 {
    if h >= 1.0 {
        return Gamma::new(h, 1.0).expect("positive shape").sample(rng);
    }
    // G(h) = G(1+h)·U^{1/h}, in logs so tiny shapes underflow cleanly
    let g1: f64 = Gamma::new(1.0 + h, 1.0).expect("positive shape").sample(rng);
    let u: f64 = rng.sample(Open01);
    (g1.ln() + u.ln() / h).exp()
}

/// Stable `S_h` tilted by `e^{-θ s}`, `θ = m^{1/α}`. The step is split so each
/// piece is accepted with probability at least 1/2.
fn tilted_stable<R: Rng + ?Sized>(alpha: f64, m: f64, h: f64, rng: &mut R, tally: &mut Tally) -> f64 {
    let theta = m.powf(1.0 / alpha);
    let pieces = (h * m / LN_2).ceil().max(1.0);
    let hp = h / pieces;
    let mut s = 0.0;
    for _ in 0..pieces as u64 {
        loop {
            let z = stable(alpha, hp, rng);
            tally.proposals += 1;
            if rng.random::<f64>() < (-theta * z).exp() {
                tally.accepted += 1;
                s += z;
                break;
            }
        }
    }
    s
}

/// Draw `n` increments, one stream per draw.
pub fn draw_increments(f: &BernsteinFunction, h: f64, n: usize, seed: u64) -> Result<(Vec<f64>, Tally)> {
    let s = SubordinatorSampler::new(f)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("time step must be positive, got {h}")));
    }
    let out: Vec<(f64, Tally)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let mut t = Tally::default();
            (s.sample_counted(h, &mut rng, &mut t), t)
        })
        .collect();
    let mut tally = Tally::default();
    for (_, t) in &out {
        tally.add(*t);
    }
    Ok((out.into_iter().map(|(v, _)| v).collect(), tally))
}

/// Compare `Ê[e^{-λ S_h}]` with `e^{-hφ(λ)}` at each `λ`; passes when
/// every deviation is within `z_max` standard errors.
pub fn laplace_test(
    f: &BernsteinFunction,
    h: f64,
    lambdas: &[f64],
    n: usize,
    seed: u64,
    z_max: f64,
) -> Result<BoundCheckReport> {
    let (xs, tally) = draw_increments(f, h, n, seed)?;
    let mut rep = BoundCheckReport::new("empirical-laplace");
    let mut worst: f64 = 0.0;
    for &l in lambdas {
        let vals: Vec<f64> = xs.iter().map(|s| (-l * s).exp()).collect();
        let est = MeanEstimate::from_samples(&vals);
        let exact = (-h * f.phi(l)).exp();
        let z = (est.mean - exact) / est.se.max(f64::MIN_POSITIVE);
        worst = worst.max(z.abs());
        rep.constant(&format!("z@{l}"), z);
        let w = Witness::new(format!("laplace@{l}"), vec![l, est.mean, exact], z);
        if z.abs() > z_max {
            rep.fail(w);
        } else {
            rep.witness(w);
        }
    }
    rep.constant("z_max", worst);
    rep.constant("acceptance_rate", tally.acceptance_rate());
    rep.constant("n", n as f64);
    rep.constant("h", h);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::catalog;

    const LAMBDAS: [f64; 4] = [0.5, 1.0, 2.0, 5.0];

    #[test]
    fn catalog_samplers_pass_laplace() {
        for key in ["stable:0.5", "gamma", "sum-stable:0.3:0.7", "relativistic:0.5:1.0", "geometric-stable:0.5"] {
            let f = catalog(key).unwrap();
            for h in [0.3, 1.0] {
                let rep = laplace_test(&f, h, &LAMBDAS, 20_000, 11, 4.0).unwrap();
                assert!(rep.pass, "{key} h={h}: {:?}", rep.constants);
            }
        }
    }

    #[test]
    fn scaled_functions_sample_correctly() {
        let f = catalog("gamma").unwrap().normalized();
        let g = crate::bernstein::rescale(&catalog("sum-stable:0.3:0.7").unwrap(), 0.2).unwrap();
        for f in [f, g] {
            let rep = laplace_test(&f, 0.7, &LAMBDAS, 20_000, 5, 4.0).unwrap();
            assert!(rep.pass, "{}: {:?}", f.name, rep.constants);
        }
    }

    #[test]
    fn gamma_mean_is_h() {
        let f = catalog("gamma").unwrap();
        let (xs, _) = draw_increments(&f, 1.0, 20_000, 3).unwrap();
        let m = MeanEstimate::from_samples(&xs);
        assert!((m.mean - 1.0).abs() < 4.0 * m.se, "{m:?}");
    }

    #[test]
    fn relativistic_reports_acceptance() {
        let f = catalog("relativistic:0.5:1.0").unwrap();
        let rep = laplace_test(&f, 1.0, &LAMBDAS, 10_000, 2, 4.0).unwrap();
        let a = rep.get("acceptance_rate").unwrap();
        assert!(a > 0.5 && a < 1.0, "{a}");
    }

    #[test]
    fn log_stable_is_unsupported() {
        let f = catalog("log-stable:0.5:0.2:+").unwrap();
        let mut rng = path_rng(0, 0);
        assert!(matches!(sample_subordinator_increment(&f, 1.0, &mut rng), Err(Error::Unsupported(_))));
    }

    #[test]
    fn tiny_gamma_steps_underflow_to_zero() {
        let f = catalog("gamma").unwrap();
        let (xs, _) = draw_increments(&f, 1e-4, 100, 1).unwrap();
        assert!(xs.iter().all(|v| *v >= 0.0 && v.is_finite()));
    }
}
