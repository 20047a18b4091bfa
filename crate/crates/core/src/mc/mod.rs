//! Monte Carlo for subordinators, `X` and `Y^D` in model domains.

mod estimate;
pub mod rng;
mod sampler;
mod verify;
mod walk;

pub use estimate::*;
pub use sampler::*;
pub use verify::*;
pub use walk::*;

use serde::{Deserialize, Serialize};

use rng::pairwise_sum;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(v: &[f64]) -> Self {
        let n = v.len();
        if n == 0 {
            return MeanEstimate { mean: f64::NAN, se: f64::NAN, n };
        }
        let mean = pairwise_sum(v) / n as f64;
        let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        MeanEstimate {
            mean,
            se: (var / n as f64).sqrt(),
            n,
        }
    }

    /// Half-width of the 95% interval.
    pub fn ci95(&self) -> f64 {
        1.96 * self.se
    }

    /// `ci95 / mean`; infinite at zero mean.
    pub fn rel_ci(&self) -> f64 {
        if self.mean == 0.0 {
            f64::INFINITY
        } else {
            (self.ci95() / self.mean).abs()
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        MeanEstimate {
            mean: self.mean * c,
            se: self.se * c.abs(),
            n: self.n,
        }
    }
}

/// `|a - b|` in units of the combined standard error.
pub fn z_score(a: &MeanEstimate, b: &MeanEstimate) -> f64 {
    let s = (a.se * a.se + b.se * b.se).sqrt();
    (a.mean - b.mean).abs() / s.max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se() {
        let m = MeanEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
