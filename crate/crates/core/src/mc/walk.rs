//! Skeleton paths of `Y^D` and `X` at subordination times.
//!
//! Between two skeleton times the Brownian motion runs for the subordinator
//! increment `Δs`; killing in between is decided by the exact bridge
//! non-crossing probability `p^D/p` of the Gaussian step.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::BernsteinFunction;
use crate::domain::{norm, BoundaryBox, Domain, DomainKind, Point};
use crate::error::{domain_err, Error, Result};
use crate::heat::HeatKernelEval;

use super::rng::path_rng;
use super::sampler::{SubordinatorSampler, Tally};
use super::MeanEstimate;

/// Brownian time increments are capped here; beyond it every step is
/// resolved by a single classification anyway.
pub const MAX_INCREMENT: f64 = 1e24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KillingMode {
    BridgeCorrected,
    /// Kill only when the skeleton point leaves `D`.
    StepOnly,
}

/// How the subordinator step is chosen at each skeleton point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StepRule {
    /// Always `h`.
    Fixed,
    /// `min(h, 1/φ(2d/ℓ²))` with `ℓ = fraction·max(min_length, dist(x, exit boundary))`.
    Adaptive { fraction: f64, min_length: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub h: f64,
    pub max_steps: u64,
    pub killing_mode: KillingMode,
    pub step_rule: StepRule,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            seed: 1,
            n_paths: 10_000,
            h: 1e-3,
            max_steps: 1_000_000,
            killing_mode: KillingMode::BridgeCorrected,
            step_rule: StepRule::Fixed,
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Invalid(format!("h must be positive, got {}", self.h)));
        }
        if self.n_paths == 0 || self.max_steps == 0 {
            return Err(Error::Invalid("n_paths and max_steps must be positive".into()));
        }
        if let StepRule::Adaptive { fraction, min_length } = self.step_rule {
            if !(fraction > 0.0 && fraction <= 1.0 && min_length > 0.0) {
                return Err(Error::Invalid("adaptive step needs fraction in (0,1] and min_length > 0".into()));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        PathConfig { seed, ..self.clone() }
    }

    pub fn with_paths(&self, n_paths: usize) -> Self {
        PathConfig { n_paths, ..self.clone() }
    }
}

/// Subordinator step whose typical Brownian increment moves `ℓ` in RMS.
pub fn h_for_length(f: &BernsteinFunction, d: usize, ell: f64) -> f64 {
    1.0 / f.phi(2.0 * d as f64 / (ell * ell))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Process {
    /// `Y^D`.
    Killed,
    /// `X`, with no killing.
    Free,
}

/// An open set `U ⊂ D` that the path is stopped on leaving.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    /// `U = D`.
    Whole,
    Set(Domain),
    /// `D_Q(r1, r2)` sitting on a flat piece of `∂D`.
    Cylinder(BoundaryBox),
    Intersection(Vec<Region>),
}

impl Region {
    /// Positive inside `U`.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match self {
            Region::Whole => f64::INFINITY,
            Region::Set(d) => d.signed_distance(x),
            Region::Cylinder(b) => {
                let rho = b.rho(x);
                rho.min(b.r1 - rho).min(b.r2 - norm(&b.tangential(x)))
            }
            Region::Intersection(v) => v.iter().map(|r| r.signed_distance(x)).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.signed_distance(x) > 0.0
    }

    /// Distance to the part of `∂U` through which the path can leave alive;
    /// the base of a cylinder lies on `∂D` and is excluded.
    pub fn exit_distance(&self, x: &[f64]) -> f64 {
        match self {
            Region::Cylinder(b) => (b.r1 - b.rho(x)).min(b.r2 - norm(&b.tangential(x))),
            Region::Intersection(v) => v.iter().map(|r| r.exit_distance(x)).fold(f64::INFINITY, f64::min),
            _ => self.signed_distance(x),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Region::Whole => f64::INFINITY,
            Region::Set(d) => d.diameter(),
            Region::Cylinder(b) => (b.r1 * b.r1 + 4.0 * b.r2 * b.r2).sqrt(),
            Region::Intersection(v) => v.iter().map(|r| r.diameter()).fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone)]
enum KillKind {
    HalfSpace,
    Series(HeatKernelEval),
    Tangent,
}

/// Survival probability of one Gaussian step in `D`.
#[derive(Debug, Clone)]
pub struct KillingModel {
    domain: Domain,
    kind: KillKind,
    mode: KillingMode,
}

impl KillingModel {
    pub fn new(domain: &Domain, mode: KillingMode) -> Result<Self> {
        let kind = match domain.kind {
            DomainKind::HalfSpace => KillKind::HalfSpace,
            DomainKind::Box { .. } => KillKind::Series(HeatKernelEval::new(domain)?),
            DomainKind::Ball { .. } => KillKind::Tangent,
        };
        Ok(KillingModel {
            domain: domain.clone(),
            kind,
            mode,
        })
    }

    /// True when the bridge probability is only approximate (balls) or ignored.
    pub fn is_approximate(&self) -> bool {
        matches!(self.kind, KillKind::Tangent) || self.mode == KillingMode::StepOnly
    }

    /// Probability that Brownian motion from `x` to `y` over time `ds` is not killed.
    pub fn survival(&self, x: &[f64], y: &[f64], ds: f64) -> f64 {
        if !self.domain.contains(y) {
            return 0.0;
        }
        if self.mode == KillingMode::StepOnly || ds == 0.0 {
            return 1.0;
        }
        match &self.kind {
            KillKind::HalfSpace => {
                let d = self.domain.d - 1;
                -(-x[d] * y[d] / ds).exp_m1()
            }
            KillKind::Series(h) => {
                if let DomainKind::Box { lo, hi } = &self.domain.kind {
                    // union of single-face crossings bounds the loss
                    let mut q = 0.0;
                    for i in 0..x.len() {
                        q += (-(x[i] - lo[i]) * (y[i] - lo[i]) / ds).exp() + (-(hi[i] - x[i]) * (hi[i] - y[i]) / ds).exp();
                    }
                    if q < 1e-17 {
                        return 1.0;
                    }
                }
                h.bridge_survival(ds, x, y).unwrap_or(0.0)
            }
            KillKind::Tangent => {
                let a = self.domain.signed_distance(x);
                let b = self.domain.signed_distance(y);
                -(-a * b / ds).exp_m1()
            }
        }
    }
}

/// One killed-Brownian step from `x` over Brownian time `ds`; `None` if killed.
pub fn step_with_killing<R: Rng + ?Sized>(d: &Domain, x: &[f64], ds: f64, rng: &mut R) -> Result<Option<Point>> {
    if !d.contains(x) {
        return domain_err("starting point must lie in D");
    }
    if !(ds > 0.0) {
        return domain_err(format!("Brownian time must be positive, got {ds}"));
    }
    let k = KillingModel::new(d, KillingMode::BridgeCorrected)?;
    let sc = (2.0 * ds.min(MAX_INCREMENT)).sqrt();
    let y: Point = x.iter().map(|xi| xi + sc * rng.sample::<f64, _>(StandardNormal)).collect();
    let u: f64 = rng.random();
    Ok(if u < k.survival(x, &y, ds) { Some(y) } else { None })
}

/// `P_x(t < τ_D)` for killed Brownian motion by `n_steps` equal bridge-corrected steps.
pub fn killed_bm_survival(d: &Domain, x: &[f64], t: f64, n_steps: usize, n_paths: usize, seed: u64) -> Result<MeanEstimate> {
    if !d.contains(x) {
        return domain_err("starting point must lie in D");
    }
    if !(t > 0.0) || n_steps == 0 || n_paths == 0 {
        return domain_err("need t > 0 and positive step and path counts");
    }
    let k = KillingModel::new(d, KillingMode::BridgeCorrected)?;
    let ds = t / n_steps as f64;
    let sc = (2.0 * ds).sqrt();
    let alive: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let mut x = x.to_vec();
            let mut y = x.clone();
            for _ in 0..n_steps {
                for (yi, xi) in y.iter_mut().zip(&x) {
                    *yi = xi + sc * rng.sample::<f64, _>(StandardNormal);
                }
                if !(rng.random::<f64>() < k.survival(&x, &y, ds)) {
                    return 0.0;
                }
                std::mem::swap(&mut x, &mut y);
            }
            1.0
        })
        .collect();
    Ok(MeanEstimate::from_samples(&alive))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Outcome {
    /// First skeleton point outside `U`, in `D \ U` for `Y^D`.
    ExitedTo { z: Point },
    /// `Y^D` was killed; `at` is its last position, inside `U`.
    DiedInside { at: Point },
    Censored,
}

impl Outcome {
    pub fn exit_point(&self) -> Option<&[f64]> {
        match self {
            Outcome::ExitedTo { z } => Some(z),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Outcome::ExitedTo { .. } => "exited",
            Outcome::DiedInside { .. } => "died",
            Outcome::Censored => "censored",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub path_id: u64,
    pub outcome: Outcome,
    /// Number of skeleton steps taken.
    pub steps: u64,
    /// Subordinator time at the end of the path.
    pub time: f64,
    pub start: Point,
}

/// The end of one simulated path.
#[derive(Debug, Clone)]
pub(crate) struct PathEnd {
    pub outcome: Outcome,
    pub steps: u64,
    pub time: f64,
    pub tally: Tally,
}

/// Everything needed to run paths from a fixed `(D, U, φ, cfg)`.
#[derive(Debug, Clone)]
pub struct Walker {
    pub domain: Domain,
    pub region: Region,
    pub process: Process,
    pub cfg: PathConfig,
    sampler: SubordinatorSampler,
    killing: KillingModel,
}

impl Walker {
    pub fn new(domain: &Domain, region: &Region, f: &BernsteinFunction, cfg: &PathConfig, process: Process) -> Result<Self> {
        cfg.validate()?;
        Ok(Walker {
            domain: domain.clone(),
            region: region.clone(),
            process,
            cfg: cfg.clone(),
            sampler: SubordinatorSampler::new(f)?,
            killing: KillingModel::new(domain, cfg.killing_mode)?,
        })
    }

    pub fn function(&self) -> &BernsteinFunction {
        self.sampler.function()
    }

    pub fn approximate_killing(&self) -> bool {
        self.killing.is_approximate()
    }

    pub fn check_start(&self, x0: &[f64]) -> Result<()> {
        self.domain.check_point(x0)?;
        if !self.domain.contains(x0) || !self.region.contains(x0) {
            return domain_err(format!("start {x0:?} must lie in U ⊂ D"));
        }
        Ok(())
    }

    /// Step used at `x`.
    pub fn h_at(&self, x: &[f64]) -> f64 {
        match self.cfg.step_rule {
            StepRule::Fixed => self.cfg.h,
            StepRule::Adaptive { fraction, min_length } => {
                let mut dist = self.region.exit_distance(x).min(self.region.diameter());
                if self.killing.is_approximate() {
                    dist = dist.min(self.domain.signed_distance(x));
                }
                let ell = fraction * dist.max(min_length);
                self.cfg.h.min(h_for_length(self.function(), self.domain.d, ell))
            }
        }
    }

    /// Run path `id` from `x0`. `visit(x, h, alive)` is called at every
    /// skeleton point with the step about to be taken and whether `Y^D`
    /// (coupled to the same Brownian path) is still alive.
    pub(crate) fn walk<F: FnMut(&[f64], f64, bool)>(&self, x0: &[f64], seed: u64, id: u64, mut visit: F) -> PathEnd {
        let mut rng = path_rng(seed, id);
        let mut tally = Tally::default();
        let d = x0.len();
        let mut x = x0.to_vec();
        let mut y = vec![0.0; d];
        let mut time = 0.0;
        let mut alive = true;
        for k in 0..self.cfg.max_steps {
            let hk = self.h_at(&x);
            visit(&x, hk, alive);
            let ds = self.sampler.sample_counted(hk, &mut rng, &mut tally);
            let ds = if ds < MAX_INCREMENT { ds } else { MAX_INCREMENT };
            let sc = (2.0 * ds).sqrt();
            for i in 0..d {
                y[i] = x[i] + sc * rng.sample::<f64, _>(StandardNormal);
            }
            // always drawn, so X and Y^D paths stay coupled
            let u: f64 = rng.random();
            time += hk;
            if alive && !(u < self.killing.survival(&x, &y, ds)) {
                alive = false;
                if self.process == Process::Killed {
                    return PathEnd {
                        outcome: Outcome::DiedInside { at: x },
                        steps: k + 1,
                        time,
                        tally,
                    };
                }
            }
            let s = self.region.signed_distance(&y);
            if !(s > 0.0) {
                if s == 0.0 {
                    nudge_outward(&mut y, &x);
                }
                return PathEnd {
                    outcome: Outcome::ExitedTo { z: y },
                    steps: k + 1,
                    time,
                    tally,
                };
            }
            std::mem::swap(&mut x, &mut y);
        }
        PathEnd {
            outcome: Outcome::Censored,
            steps: self.cfg.max_steps,
            time,
            tally,
        }
    }
}

fn nudge_outward(y: &mut [f64], x: &[f64]) {
    let v: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let n = norm(&v);
    if n > 0.0 {
        for (yi, vi) in y.iter_mut().zip(&v) {
            *yi += 1e-12 * vi / n;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitEnsemble {
    pub process: Process,
    pub records: Vec<ExitRecord>,
    pub exited_fraction: f64,
    pub died_fraction: f64,
    pub censored_fraction: f64,
    pub acceptance_rate: f64,
    pub approximate_killing: bool,
    pub warnings: Vec<String>,
}

impl ExitEnsemble {
    pub fn exit_points(&self) -> impl Iterator<Item = &[f64]> {
        self.records.iter().filter_map(|r| r.outcome.exit_point())
    }

    /// Raw records as CSV: `path_id,outcome,z_1..z_d,steps`.
    pub fn to_csv(&self, d: usize) -> String {
        let mut s = String::from("path_id,outcome");
        for i in 0..d {
            s.push_str(&format!(",z{}", i + 1));
        }
        s.push_str(",steps\n");
        for r in &self.records {
            s.push_str(&format!("{},{}", r.path_id, r.outcome.label()));
            match &r.outcome {
                Outcome::ExitedTo { z } | Outcome::DiedInside { at: z } => {
                    for v in z {
                        s.push_str(&format!(",{v}"));
                    }
                }
                Outcome::Censored => s.push_str(&",".repeat(d)),
            }
            s.push_str(&format!(",{}\n", r.steps));
        }
        s
    }
}

pub(crate) fn censor_warning(frac: f64) -> Option<String> {
    (frac > 0.01).then(|| format!("censoring rate {:.3}% exceeds 1%", 100.0 * frac))
}

/// Run `cfg.n_paths` paths of `Y^D` (or `X`) from `x0` until they leave `U` or die.
pub fn simulate_exit(
    domain: &Domain,
    region: &Region,
    f: &BernsteinFunction,
    x0: &[f64],
    cfg: &PathConfig,
    process: Process,
) -> Result<ExitEnsemble> {
    let w = Walker::new(domain, region, f, cfg, process)?;
    w.check_start(x0)?;
    let ends: Vec<PathEnd> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| w.walk(x0, cfg.seed, i, |_, _, _| {}))
        .collect();
    let n = ends.len() as f64;
    let mut tally = Tally::default();
    let (mut ex, mut di, mut ce) = (0usize, 0usize, 0usize);
    let records = ends
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            tally.add(e.tally);
            match e.outcome {
                Outcome::ExitedTo { .. } => ex += 1,
                Outcome::DiedInside { .. } => di += 1,
                Outcome::Censored => ce += 1,
            }
            ExitRecord {
                path_id: i as u64,
                outcome: e.outcome,
                steps: e.steps,
                time: e.time,
                start: x0.to_vec(),
            }
        })
        .collect();
    let censored_fraction = ce as f64 / n;
    Ok(ExitEnsemble {
        process,
        records,
        exited_fraction: ex as f64 / n,
        died_fraction: di as f64 / n,
        censored_fraction,
        acceptance_rate: tally.acceptance_rate(),
        approximate_killing: w.approximate_killing(),
        warnings: censor_warning(censored_fraction).into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::catalog;
    use crate::domain::boundary_box;

    #[test]
    fn proposal_outside_is_killed() {
        let d = Domain::half_space(2).unwrap();
        let k = KillingModel::new(&d, KillingMode::BridgeCorrected).unwrap();
        assert_eq!(k.survival(&[0.0, 1.0], &[0.0, -0.1], 0.5), 0.0);
    }

    #[test]
    fn bridge_factor_half_at_ln2() {
        let d = Domain::half_space(3).unwrap();
        let k = KillingModel::new(&d, KillingMode::BridgeCorrected).unwrap();
        let (a, b) = (1.0, std::f64::consts::LN_2);
        let p = k.survival(&[0.0, 0.0, a], &[0.3, 0.0, b], 1.0);
        assert!((p - 0.5).abs() < 1e-15);
    }

    #[test]
    fn box_bridge_matches_half_space_near_one_face() {
        let bx = Domain::cuboid(vec![0.0; 2], vec![50.0; 2]).unwrap();
        let hs = Domain::half_space(2).unwrap();
        let kb = KillingModel::new(&bx, KillingMode::BridgeCorrected).unwrap();
        let kh = KillingModel::new(&hs, KillingMode::BridgeCorrected).unwrap();
        let (x, y) = ([25.0, 0.3], [25.2, 0.5]);
        assert!((kb.survival(&x, &y, 0.1) - kh.survival(&x, &y, 0.1)).abs() < 1e-12);
    }

    #[test]
    fn whole_region_never_exits() {
        let d = Domain::cuboid(vec![0.0; 2], vec![1.0; 2]).unwrap();
        let f = catalog("stable:0.5").unwrap();
        let cfg = PathConfig { n_paths: 500, h: 0.01, ..Default::default() };
        let e = simulate_exit(&d, &Region::Whole, &f, &[0.5, 0.5], &cfg, Process::Killed).unwrap();
        assert_eq!(e.exited_fraction, 0.0);
        assert_eq!(e.died_fraction + e.censored_fraction, 1.0);
        for r in &e.records {
            if let Outcome::DiedInside { at } = &r.outcome {
                assert!(d.contains(at));
            }
        }
    }

    #[test]
    fn exits_land_in_d_minus_u() {
        let d = Domain::half_space(3).unwrap();
        let b = boundary_box(&d, &[0.0; 3], 0.5, 0.5).unwrap();
        let u = Region::Cylinder(b);
        let f = catalog("stable:0.5").unwrap();
        let cfg = PathConfig {
            n_paths: 2000,
            h: 1.0,
            step_rule: StepRule::Adaptive { fraction: 0.05, min_length: 1e-3 },
            ..Default::default()
        };
        let e = simulate_exit(&d, &u, &f, &[0.0, 0.0, 0.2], &cfg, Process::Killed).unwrap();
        assert!(e.exited_fraction > 0.0 && e.died_fraction > 0.0);
        for z in e.exit_points() {
            assert!(d.contains(z) && !u.contains(z));
        }
        assert!(e.warnings.is_empty());
    }

    #[test]
    fn results_do_not_depend_on_workers() {
        let d = Domain::half_space(2).unwrap();
        let u = Region::Set(Domain::ball(vec![0.0, 1.0], 0.5).unwrap());
        let f = catalog("gamma").unwrap();
        let cfg = PathConfig { n_paths: 300, h: 0.05, ..Default::default() };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_exit(&d, &u, &f, &[0.1, 1.0], &cfg, Process::Killed).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn ball_killing_is_flagged() {
        let d = Domain::ball(vec![0.0; 2], 1.0).unwrap();
        let w = Walker::new(&d, &Region::Whole, &catalog("stable:0.5").unwrap(), &PathConfig::default(), Process::Killed).unwrap();
        assert!(w.approximate_killing());
    }

    #[test]
    fn survival_matches_erf_for_any_partition() {
        let d = Domain::half_space(2).unwrap();
        let exact = libm::erf(1.0);
        for n in [1, 4, 16] {
            let m = killed_bm_survival(&d, &[0.3, 2.0], 1.0, n, 20_000, n as u64).unwrap();
            assert!((m.mean - exact).abs() < 4.0 * m.se, "{n}: {m:?}");
        }
    }

    #[test]
    fn step_outside_start_is_rejected() {
        let d = Domain::half_space(2).unwrap();
        let mut rng = path_rng(0, 0);
        assert!(step_with_killing(&d, &[0.0, -1.0], 0.1, &mut rng).is_err());
    }
}
