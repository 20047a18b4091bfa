//! Experiment configuration: TOML in, a validated [`Plan`] out.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skbm::bernstein::{catalog, verify_conditions, BernsteinFunction, ConditionGrid, ScalingConditionReport};
use skbm::domain::{Domain, DomainKind};
use skbm::kernels::QuadratureConfig;
use skbm::mc::{GaugeConfig, PathConfig};
use skbm::quad::logspace;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CatalogCheck,
    KernelScan,
    Harnack,
    Carleson,
    ExitBounds,
    BhpBoundary,
    BhpInterior,
    Gauge,
    GreenCompare,
}

impl ExperimentKind {
    /// Stable identifier of the estimate a run checks.
    pub fn check_id(self) -> &'static str {
        match self {
            ExperimentKind::CatalogCheck => "catalog/laplace-density-scaling",
            ExperimentKind::KernelScan => "kernels/two-sided-envelope",
            ExperimentKind::Harnack => "harnack/scale-invariant",
            ExperimentKind::Carleson => "carleson/boundary",
            ExperimentKind::ExitBounds => "exit-probability/linear-decay",
            ExperimentKind::BhpBoundary => "boundary-harnack/boundary-decay",
            ExperimentKind::BhpInterior => "boundary-harnack/interior-decay",
            ExperimentKind::Gauge => "conditional-gauge/lower-bound",
            ExperimentKind::GreenCompare => "green/comparability",
        }
    }

    pub fn uses_paths(self) -> bool {
        !matches!(self, ExperimentKind::CatalogCheck | ExperimentKind::KernelScan)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    HalfSpace,
    Box,
    Ball,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interior: Option<Box<DomainSpec>>,
}

fn need<T: Clone>(v: &Option<T>, what: &str) -> Result<T, CliError> {
    v.clone().ok_or_else(|| CliError::Config(format!("domain: {what} is required")))
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain, CliError> {
        let extra = |names: &[(&str, bool)]| -> Result<(), CliError> {
            match names.iter().find(|(_, set)| *set) {
                Some((n, _)) => Err(CliError::Config(format!("domain: key `{n}` does not apply to {:?}", self.kind))),
                None => Ok(()),
            }
        };
        let dom = match self.kind {
            Shape::HalfSpace => {
                extra(&[("lo", self.lo.is_some()), ("hi", self.hi.is_some()), ("center", self.center.is_some()), ("radius", self.radius.is_some())])?;
                Domain::half_space(need(&self.d, "d")?)?
            }
            Shape::Box => {
                extra(&[("d", self.d.is_some()), ("center", self.center.is_some()), ("radius", self.radius.is_some())])?;
                Domain::cuboid(need(&self.lo, "lo")?, need(&self.hi, "hi")?)?
            }
            Shape::Ball => {
                extra(&[("d", self.d.is_some()), ("lo", self.lo.is_some()), ("hi", self.hi.is_some())])?;
                Domain::ball(need(&self.center, "center")?, need(&self.radius, "radius")?)?
            }
        };
        match &self.interior {
            None => Ok(dom),
            Some(e) => {
                if e.interior.is_some() {
                    return Err(CliError::Config("domain: nested interior subsets are not supported".into()));
                }
                Ok(dom.with_interior_subset(e.build()?)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeChoice {
    Green,
    Jump,
    LargeScaleJump,
}

/// Experiment parameters. Keys that do not apply to the chosen experiment
/// are rejected; missing keys take the defaults listed in the README.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler_h: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_a: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_theta: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_deltas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_lattice: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_lo: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_hi: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_min: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub subordinator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub mc: PathConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub gauge: GaugeConfig,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Command-line overrides applied before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
}

/// A fully validated experiment with every default filled in.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: ExperimentConfig,
    pub f: BernsteinFunction,
    pub domain: Option<Domain>,
    pub conditions: ScalingConditionReport,
    pub out_dir: PathBuf,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn gating(condition: &str, msg: impl Into<String>) -> CliError {
    CliError::Gating {
        condition: condition.into(),
        msg: msg.into(),
    }
}

fn set<T: Clone>(slot: &mut Option<T>, v: T) -> T {
    slot.get_or_insert(v).clone()
}

fn unit_height(d: usize, h: f64) -> Vec<f64> {
    let mut x = vec![0.0; d];
    x[d - 1] = h;
    x
}

fn check_len(v: &[f64], d: usize, what: &str) -> Result<(), CliError> {
    if v.len() != d {
        return Err(invalid(format!("grid: {what} has {} coordinates, the domain has {d}", v.len())));
    }
    if v.iter().any(|a| !a.is_finite()) {
        return Err(invalid(format!("grid: {what} is not finite")));
    }
    Ok(())
}

fn positive(v: f64, what: &str) -> Result<(), CliError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(format!("grid: {what} must be positive, got {v}")));
    }
    Ok(())
}

/// Keys of [`Grid`] read by each experiment.
fn grid_keys(kind: ExperimentKind) -> &'static [&'static str] {
    use ExperimentKind::*;
    match kind {
        CatalogCheck => &["lambdas", "t_lo", "t_hi", "n_t", "sampler_h", "z_max"],
        KernelScan => &["envelope", "r_lo", "r_hi", "n_r", "n_a", "n_theta", "refine", "c_max", "refine_tol"],
        Harnack => &["x0", "r"],
        Carleson => &["q", "r"],
        ExitBounds => &["q", "radii", "rel_deltas"],
        BhpBoundary => &["q", "r", "rel_deltas", "slope_tol"],
        BhpInterior => &["q", "r", "rel_deltas", "slope_tol", "b", "b_lattice"],
        Gauge => &["x0", "y", "u_lo", "u_hi"],
        GreenCompare => &["x0", "u_lo", "u_hi", "spacing", "cell_half_width", "c_min"],
    }
}

fn default_rel_deltas() -> Vec<f64> {
    (0..7).map(|i| 10f64.powf(-2.5 + 0.25 * i as f64)).collect()
}

/// Validate the configuration, apply overrides, enforce the assumptions each
/// experiment rests on, and fill in defaults. Nothing is computed beyond the
/// scaling-condition scan of the subordinator.
pub fn validate(mut cfg: ExperimentConfig, ov: &Overrides) -> Result<Plan, CliError> {
    use ExperimentKind::*;
    if let Some(s) = ov.seed {
        cfg.mc.seed = s;
    }
    if let Some(t) = ov.tol {
        if !(t > 0.0 && t < 1.0) {
            return Err(invalid(format!("--tol must lie in (0, 1), got {t}")));
        }
        cfg.quadrature.rel_tol = t;
    }
    if let Some(o) = &ov.out {
        cfg.output.dir = Some(o.clone());
    }
    let out_dir = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let kind = cfg.experiment;

    let used = serde_json::to_value(&cfg.grid).expect("grid serializes");
    let allowed = grid_keys(kind);
    if let Some(k) = used.as_object().and_then(|m| m.keys().find(|k| !allowed.contains(&k.as_str()))) {
        return Err(invalid(format!("grid: key `{k}` does not apply to {}", serde_json::to_value(kind).unwrap())));
    }
    if !(cfg.quadrature.rel_tol > 0.0 && cfg.quadrature.rel_tol < 1.0) {
        return Err(invalid("quadrature: rel_tol must lie in (0, 1)"));
    }
    cfg.mc.validate()?;

    let f = catalog(&cfg.subordinator)?;
    let domain = match &cfg.domain {
        Some(spec) => Some(spec.build()?),
        None if kind == CatalogCheck => None,
        None => return Err(invalid("a [domain] section is required")),
    };
    let d = domain.as_ref().map_or(3, |dm| dm.d);
    let conditions = verify_conditions(&f, d, &ConditionGrid::default())?;

    if kind != CatalogCheck {
        if !conditions.basic_conditions() {
            return Err(gating("A2/A3", format!("{} lacks the basic scaling conditions", f.name)));
        }
        let dm = domain.as_ref().expect("domain present");
        if d == 2 && (conditions.a4.is_none() || !conditions.transient()) {
            return Err(gating("A4/A5", format!("{} in d = 2 needs the lower scaling and transience conditions", f.name)));
        }
        if kind.uses_paths() {
            if d < 2 {
                return Err(invalid("path experiments need d ≥ 2"));
            }
            if !dm.is_bounded() {
                if d < 3 {
                    return Err(gating("A6", "unbounded domains are covered only in d ≥ 3"));
                }
                if conditions.a6.is_none() {
                    return Err(gating(
                        "A6",
                        format!("{} fails (A6), so only bounded domains are covered", f.name),
                    ));
                }
            }
            if !f.supports_sampling() {
                return Err(invalid(format!("{} has no exact increment sampler", f.name)));
            }
        }
        if matches!(kind, BhpBoundary | BhpInterior) {
            let delta = conditions.a3.map(|p| p.exponent).unwrap_or(1.0);
            if delta <= 0.5 && conditions.a7.is_none() {
                return Err(gating("A7", format!("{} has δ ≤ 1/2 but fails (A7)", f.name)));
            }
        }
    }

    let half = domain.as_ref().is_some_and(|dm| matches!(dm.kind, DomainKind::HalfSpace));
    let needs_half = |what: &str| -> Result<(), CliError> {
        if half {
            Ok(())
        } else {
            Err(invalid(format!("grid: {what} has a default only on the half-space; set it explicitly")))
        }
    };
    let g = &mut cfg.grid;
    match kind {
        CatalogCheck => {
            let l = set(&mut g.lambdas, logspace(0.01, 1000.0, 11));
            if l.is_empty() || l.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(invalid("grid: lambdas must be positive"));
            }
            let (lo, hi, n) = (set(&mut g.t_lo, 1e-4), set(&mut g.t_hi, 10.0), set(&mut g.n_t, 200));
            if !(lo > 0.0 && lo < hi) || n < 2 {
                return Err(invalid("grid: need 0 < t_lo < t_hi and n_t ≥ 2"));
            }
            for h in set(&mut g.sampler_h, vec![0.3, 1.0]) {
                positive(h, "sampler_h")?;
            }
            positive(set(&mut g.z_max, 4.0), "z_max")?;
        }
        KernelScan => {
            if !half {
                return Err(invalid("kernel-scan runs on the half-space grid; use kind = \"half-space\""));
            }
            let env = set(&mut g.envelope, EnvelopeChoice::Green);
            let (lo, hi) = (set(&mut g.r_lo, 0.01), set(&mut g.r_hi, 1.0));
            if !(lo > 0.0 && lo <= hi) {
                return Err(invalid("grid: need 0 < r_lo ≤ r_hi"));
            }
            for n in [set(&mut g.n_r, 5), set(&mut g.n_a, 10), set(&mut g.n_theta, 10)] {
                if n < 2 {
                    return Err(invalid("grid: n_r, n_a and n_theta must be at least 2"));
                }
            }
            set(&mut g.refine, true);
            positive(set(&mut g.c_max, 100.0), "c_max")?;
            positive(set(&mut g.refine_tol, 0.1), "refine_tol")?;
            if env == EnvelopeChoice::LargeScaleJump {
                skbm::kernels::scan::large_scale_gate(&f, domain.as_ref().expect("domain present"))
                    .map_err(|e| match e {
                        skbm::Error::Invalid(m) => gating("A6", m),
                        other => other.into(),
                    })?;
            }
        }
        Harnack => {
            if g.x0.is_none() {
                needs_half("x0")?;
            }
            check_len(&set(&mut g.x0, unit_height(d, 1.0)), d, "x0")?;
            positive(set(&mut g.r, 0.2), "r")?;
        }
        Carleson | ExitBounds | BhpBoundary => {
            if g.q.is_none() {
                needs_half("q")?;
            }
            check_len(&set(&mut g.q, vec![0.0; d]), d, "q")?;
            match kind {
                Carleson => positive(set(&mut g.r, 0.5), "r")?,
                ExitBounds => {
                    for r in set(&mut g.radii, vec![0.1, 0.2, 0.4]) {
                        positive(r, "radii")?;
                    }
                    set(&mut g.rel_deltas, vec![0.0125, 0.025, 0.05, 0.075, 0.1, 0.12]);
                }
                _ => {
                    positive(set(&mut g.r, 1.0), "r")?;
                    set(&mut g.rel_deltas, default_rel_deltas());
                    positive(set(&mut g.slope_tol, 0.15), "slope_tol")?;
                }
            }
        }
        BhpInterior => {
            let dm = domain.as_ref().expect("domain present");
            let e = dm
                .interior_subset
                .as_deref()
                .ok_or_else(|| invalid("bhp-interior needs [domain.interior]"))?;
            let (c, rad) = match &e.kind {
                DomainKind::Ball { center, radius } => (center.clone(), *radius),
                _ => return Err(invalid("domain.interior must be a ball")),
            };
            let mut q0 = c.clone();
            q0[0] += rad;
            let q = set(&mut g.q, q0);
            check_len(&q, d, "q")?;
            if let Some(b) = g.b {
                if !(b > 2.0) {
                    return Err(invalid("grid: b must exceed 2"));
                }
            }
            let lat = set(&mut g.b_lattice, vec![2.25, 2.5, 3.0, 4.0, 6.0]);
            if lat.is_empty() || lat.iter().any(|&b| !(b > 2.0)) {
                return Err(invalid("grid: b_lattice entries must exceed 2"));
            }
            let b_max = g.b.unwrap_or(lat.iter().cloned().fold(0.0, f64::max));
            let limit = dm.signed_distance(&q).min(rad) / (b_max + 2.0);
            let r = set(&mut g.r, limit / 2.0);
            positive(r, "r")?;
            set(&mut g.rel_deltas, default_rel_deltas());
            positive(set(&mut g.slope_tol, 0.15), "slope_tol")?;
        }
        Gauge | GreenCompare => {
            if g.x0.is_none() || g.u_lo.is_none() || g.u_hi.is_none() {
                needs_half("x0, u_lo and u_hi")?;
                if d != 3 {
                    return Err(invalid("grid: default gauge region is three-dimensional"));
                }
            }
            let x0 = set(&mut g.x0, vec![0.0, 0.0, 2.0]);
            let lo = set(&mut g.u_lo, x0.iter().map(|a| a - 0.1).collect());
            let hi = set(&mut g.u_hi, x0.iter().map(|a| a + 0.1).collect());
            for (v, n) in [(&x0, "x0"), (&lo, "u_lo"), (&hi, "u_hi")] {
                check_len(v, d, n)?;
            }
            if kind == Gauge {
                let y = set(&mut g.y, x0.iter().enumerate().map(|(i, a)| if i < 2 { a + 0.05 } else { *a }).collect());
                check_len(&y, d, "y")?;
            } else {
                if d != 3 {
                    return Err(invalid("green-compare uses the 20-cell lattice in d = 3"));
                }
                positive(set(&mut g.spacing, 0.05), "spacing")?;
                positive(set(&mut g.cell_half_width, 0.015), "cell_half_width")?;
                positive(set(&mut g.c_min, 0.1), "c_min")?;
            }
        }
    }
    Ok(Plan {
        config: cfg,
        f,
        domain,
        conditions,
        out_dir,
    })
}
