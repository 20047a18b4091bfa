//! Exit-payoff and occupation-time estimators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::BernsteinFunction;
use crate::domain::{Domain, Point};
use crate::error::{Error, Result};

use super::rng::derive_seed;
use super::walk::{censor_warning, Outcome, PathConfig, PathEnd, Process, Region, Walker};
use super::MeanEstimate;

/// Boundary payoff `g` evaluated on the end of a path; death pays what `g`
/// makes of [`Outcome::DiedInside`].
pub type Payoff = dyn Fn(&Outcome) -> f64 + Sync;

/// Ensemble statistics that accompany an estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub n_paths: usize,
    pub censored_fraction: f64,
    pub mean_steps: f64,
}

fn stats(ends: &[PathEnd]) -> PathStats {
    let n = ends.len();
    PathStats {
        n_paths: n,
        censored_fraction: ends.iter().filter(|e| e.outcome == Outcome::Censored).count() as f64 / n as f64,
        mean_steps: ends.iter().map(|e| e.steps as f64).sum::<f64>() / n as f64,
    }
}

/// `E_x g(Y_{τ_U})` for several payoffs from one ensemble at `x`.
pub fn harmonic_values(w: &Walker, x: &[f64], seed: u64, payoffs: &[&Payoff]) -> Result<(Vec<MeanEstimate>, PathStats)> {
    w.check_start(x)?;
    let ends: Vec<PathEnd> = (0..w.cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| w.walk(x, seed, i, |_, _, _| {}))
        .collect();
    let vals = payoffs
        .iter()
        .map(|g| {
            let v: Vec<f64> = ends.iter().map(|e| g(&e.outcome)).collect();
            MeanEstimate::from_samples(&v)
        })
        .collect();
    Ok((vals, stats(&ends)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicEstimate {
    pub x: Point,
    pub value: MeanEstimate,
    /// Set when the 95% half-width exceeds the requested precision.
    pub flagged: bool,
    pub stats: PathStats,
    pub warnings: Vec<String>,
}

/// `f(x) = E_x g(Y^D_{τ_U})` on a grid, one independent ensemble per point.
pub fn estimate_harmonic(
    domain: &Domain,
    region: &Region,
    f: &BernsteinFunction,
    g: &Payoff,
    xs: &[Point],
    cfg: &PathConfig,
    precision: Option<f64>,
) -> Result<Vec<HarmonicEstimate>> {
    let w = Walker::new(domain, region, f, cfg, Process::Killed)?;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let (v, st) = harmonic_values(&w, x, derive_seed(cfg.seed, i as u64), &[g])?;
            Ok(HarmonicEstimate {
                x: x.clone(),
                value: v[0],
                flagged: precision.is_some_and(|p| v[0].ci95() > p),
                stats: st,
                warnings: censor_warning(st.censored_fraction).into_iter().collect(),
            })
        })
        .collect()
}

/// An axis-aligned cube `center ± half_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub center: Point,
    pub half_width: f64,
}

impl Cell {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.center).all(|(a, c)| (a - c).abs() < self.half_width)
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.center.len() as i32)
    }
}

fn check_cells(region: &Region, x0: &[f64], cells: &[Cell]) -> Result<()> {
    for c in cells {
        let d = c.center.len();
        if !(c.half_width > 0.0 && c.half_width.is_finite()) || d != x0.len() {
            return Err(Error::Numeric(format!("degenerate bandwidth {} at {:?}", c.half_width, c.center)));
        }
        if region.signed_distance(&c.center) <= c.half_width * (d as f64).sqrt() {
            return Err(Error::Numeric(format!("cell at {:?} is not interior to U", c.center)));
        }
        let far = x0.iter().zip(&c.center).any(|(a, b)| (a - b).abs() > c.half_width);
        if !far {
            return Err(Error::Numeric(format!("cell at {:?} contains the start point", c.center)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationEstimate {
    pub cells: Vec<Cell>,
    /// Occupation density per cell, an estimate of `G_U(x0, center)`.
    pub density: Vec<MeanEstimate>,
    /// `E_{x0} τ_U`, the total mass of the occupation measure.
    pub lifetime: MeanEstimate,
    pub stats: PathStats,
}

/// Occupation density of the process killed on leaving `U`; `Process::Free`
/// gives `G^X_U`, `Process::Killed` gives `G^{Y^D}_U`.
pub fn estimate_green_occupation(
    domain: &Domain,
    region: &Region,
    f: &BernsteinFunction,
    x0: &[f64],
    cells: &[Cell],
    cfg: &PathConfig,
    process: Process,
) -> Result<OccupationEstimate> {
    let p = paired_occupation(domain, region, f, x0, cells, cfg)?;
    Ok(match process {
        Process::Free => p.free,
        Process::Killed => p.killed,
    })
}

/// Occupation of `X^U` and of `Y^{D,U}` on the same paths: `Y^D` follows
/// `X` until its bridge test first fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedOccupation {
    pub free: OccupationEstimate,
    pub killed: OccupationEstimate,
    /// `Ĝ^{Y^D}_U / Ĝ^X_U` per cell.
    pub ratio: Vec<MeanEstimate>,
}

pub fn paired_occupation(
    domain: &Domain,
    region: &Region,
    f: &BernsteinFunction,
    x0: &[f64],
    cells: &[Cell],
    cfg: &PathConfig,
) -> Result<PairedOccupation> {
    let w = Walker::new(domain, region, f, cfg, Process::Free)?;
    w.check_start(x0)?;
    check_cells(region, x0, cells)?;
    let k = cells.len();
    let per_path: Vec<(Vec<f64>, PathEnd)> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            // [free cells.., killed cells.., free τ, killed τ]
            let mut acc = vec![0.0; 2 * k + 2];
            let end = w.walk(x0, cfg.seed, i, |x, h, alive| {
                acc[2 * k] += h;
                if alive {
                    acc[2 * k + 1] += h;
                }
                for (j, c) in cells.iter().enumerate() {
                    if c.contains(x) {
                        acc[j] += h;
                        if alive {
                            acc[k + j] += h;
                        }
                    }
                }
            });
            (acc, end)
        })
        .collect();
    let ends: Vec<PathEnd> = per_path.iter().map(|(_, e)| e.clone()).collect();
    let st = stats(&ends);
    let col = |j: usize| -> Vec<f64> { per_path.iter().map(|(a, _)| a[j]).collect() };
    let mut free = Vec::with_capacity(k);
    let mut killed = Vec::with_capacity(k);
    let mut ratio = Vec::with_capacity(k);
    for (j, c) in cells.iter().enumerate() {
        let v = 1.0 / c.volume();
        let a = col(j);
        let b = col(k + j);
        let ea = MeanEstimate::from_samples(&a);
        let eb = MeanEstimate::from_samples(&b);
        free.push(ea.scaled(v));
        killed.push(eb.scaled(v));
        ratio.push(ratio_estimate(&b, &a, ea.mean, eb.mean));
    }
    let occ = |density, idx| OccupationEstimate {
        cells: cells.to_vec(),
        density,
        lifetime: MeanEstimate::from_samples(&col(idx)),
        stats: st,
    };
    Ok(PairedOccupation {
        free: occ(free, 2 * k),
        killed: occ(killed, 2 * k + 1),
        ratio,
    })
}

/// `Σb/Σa` with its delta-method standard error from paired samples.
fn ratio_estimate(b: &[f64], a: &[f64], ma: f64, mb: f64) -> MeanEstimate {
    let n = a.len();
    if ma == 0.0 {
        return MeanEstimate { mean: f64::NAN, se: f64::INFINITY, n };
    }
    let r = mb / ma;
    let resid: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - r * x).collect();
    let e = MeanEstimate::from_samples(&resid);
    MeanEstimate { mean: r, se: e.se / ma, n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::catalog;

    fn setup() -> (Domain, Region, BernsteinFunction, PathConfig) {
        let d = Domain::half_space(3).unwrap();
        let u = Region::Set(Domain::ball(vec![0.0, 0.0, 1.0], 0.4).unwrap());
        let cfg = PathConfig { n_paths: 4000, h: 1e-2, ..Default::default() };
        (d, u, catalog("stable:0.5").unwrap(), cfg)
    }

    #[test]
    fn total_probability_is_one() {
        let (d, u, f, cfg) = setup();
        let one: &Payoff = &|o: &Outcome| if *o == Outcome::Censored { 0.0 } else { 1.0 };
        let alive: &Payoff = &|o: &Outcome| if o.exit_point().is_some() { 1.0 } else { 0.0 };
        let w = Walker::new(&d, &u, &f, &cfg, Process::Killed).unwrap();
        let (v, _) = harmonic_values(&w, &[0.0, 0.0, 1.0], 3, &[one, alive]).unwrap();
        assert_eq!(v[0].mean, 1.0);
        assert!(v[1].mean > 0.0 && v[1].mean <= 1.0);
    }

    #[test]
    fn occupation_mass_is_lifetime() {
        let (d, u, f, cfg) = setup();
        // cells tiling the cube around the ball, except the one holding x0
        let cells: Vec<Cell> = [-0.15, 0.15]
            .iter()
            .flat_map(|&a| [-0.15, 0.15].map(move |b| (a, b)))
            .flat_map(|(a, b)| [0.85, 1.15].map(move |c| (a, b, c)))
            .map(|(a, b, c)| Cell { center: vec![a, b, c], half_width: 0.05 })
            .collect();
        let o = estimate_green_occupation(&d, &u, &f, &[0.0, 0.0, 1.0], &cells, &cfg, Process::Free).unwrap();
        let mass: f64 = o.density.iter().zip(&o.cells).map(|(m, c)| m.mean * c.volume()).sum();
        assert!(mass > 0.0 && mass < o.lifetime.mean);
    }

    #[test]
    fn degenerate_cells_are_numeric_errors() {
        let (d, u, f, cfg) = setup();
        let x0 = [0.0, 0.0, 1.0];
        for c in [
            Cell { center: vec![0.1, 0.0, 1.0], half_width: 0.0 },
            Cell { center: vec![0.02, 0.0, 1.0], half_width: 0.05 },
            Cell { center: vec![0.38, 0.0, 1.0], half_width: 0.05 },
        ] {
            let r = estimate_green_occupation(&d, &u, &f, &x0, &[c], &cfg, Process::Free);
            assert!(matches!(r, Err(Error::Numeric(_))), "{r:?}");
        }
    }

    #[test]
    fn killed_occupation_never_exceeds_free() {
        let d = Domain::half_space(3).unwrap();
        let u = Region::Set(Domain::ball(vec![0.0, 0.0, 0.5], 0.495).unwrap());
        let f = catalog("stable:0.5").unwrap();
        let cfg = PathConfig { n_paths: 2000, h: 1e-2, ..Default::default() };
        let cells = vec![Cell { center: vec![0.0, 0.0, 0.3], half_width: 0.05 }];
        let p = paired_occupation(&d, &u, &f, &[0.0, 0.0, 0.5], &cells, &cfg).unwrap();
        assert!(p.killed.density[0].mean <= p.free.density[0].mean);
        assert!(p.ratio[0].mean <= 1.0 && p.ratio[0].mean > 0.0);
        assert!(p.killed.lifetime.mean < p.free.lifetime.mean);
    }
}
