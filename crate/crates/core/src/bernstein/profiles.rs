use serde::{Deserialize, Serialize};

use super::BernsteinFunction;
use crate::quad::logspace;
use crate::report::{BoundCheckReport, Extremum, Witness};

/// Truncation rule `a ↦ a₁` for the domain type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum A1Convention {
    /// Bounded domains and domains above a bounded graph: `a₁ = a`.
    Bounded,
    /// Domains with compact complement: `a₁ = a ∧ 1`.
    CompactComplement,
}

impl A1Convention {
    pub fn apply(self, a: f64) -> f64 {
        match self {
            A1Convention::Bounded => a,
            A1Convention::CompactComplement => a.min(1.0),
        }
    }
}

/// Comparison profiles built from a Bernstein function in dimension `d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelProfiles {
    pub f: BernsteinFunction,
    pub d: usize,
    pub c2: f64,
    pub c3: f64,
    pub a1_convention: A1Convention,
}

impl KernelProfiles {
    pub fn new(f: &BernsteinFunction, d: usize) -> Self {
        KernelProfiles {
            f: f.clone(),
            d,
            c2: 1.0,
            c3: 1.0,
            a1_convention: A1Convention::Bounded,
        }
    }

    /// Green profile `c₂ r^{-d-2} φ'(r^{-2}) / φ(r^{-2})²`.
    pub fn g(&self, r: f64) -> f64 {
        self.c2 * green_envelope(&self.f, self.d, r)
    }

    /// Jump profile `c₃ r^{-d-2} φ'(r^{-2})`.
    pub fn j(&self, r: f64) -> f64 {
        self.c3 * jump_envelope(&self.f, self.d, r)
    }

    /// `k(s) = μ(s²)/s^{d-2}`.
    pub fn k(&self, s: f64) -> f64 {
        self.f.mu(s * s) / s.powi(self.d as i32 - 2)
    }

    /// Check positivity and monotonicity of `g, j, k` on `(0, 1]` and report
    /// the doubling constant of `k` on `(0, 3)`.
    pub fn check(&self) -> BoundCheckReport {
        let mut rep = BoundCheckReport::new("kernel-profiles");
        let rs = logspace(1e-3, 1.0, 121);
        for (name, h) in [
            ("g", &(|r| self.g(r)) as &dyn Fn(f64) -> f64),
            ("j", &|r| self.j(r)),
            ("k", &|r| self.k(r)),
        ] {
            let v: Vec<f64> = rs.iter().map(|&r| h(r)).collect();
            if let Some(i) = v.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
                rep.fail(Witness::new(format!("{name} not positive"), vec![rs[i]], v[i]));
            }
            if let Some(i) = v.windows(2).position(|w| w[1] > w[0] * (1.0 + 1e-9)) {
                rep.fail(Witness::new(format!("{name} not decreasing"), vec![rs[i], rs[i + 1]], v[i + 1]));
            }
        }
        let mut dbl = Extremum::new();
        for &s in &logspace(1e-3, 3.0 * (1.0 - 1e-9), 121) {
            dbl.push(self.k(s) / self.k(2.0 * s), &[s]);
        }
        rep.constant("k_doubling", dbl.max);
        rep.witness(Witness::new("k doubling max", dbl.argmax.clone(), dbl.max));
        if !dbl.max.is_finite() {
            rep.pass = false;
        }
        rep.grid_entry("r_range", [1e-3, 1.0]).grid_entry("s_range", [1e-3, 3.0]);
        rep
    }
}

/// `φ'(r^{-2}) / (r^{d+2} φ(r^{-2})²)`.
pub fn green_envelope(f: &BernsteinFunction, d: usize, r: f64) -> f64 {
    let s = r.powi(-2);
    let p = f.phi(s);
    f.phi_prime(s) / (r.powi(d as i32 + 2) * p * p)
}

/// `φ'(r^{-2}) / r^{d+2}`.
pub fn jump_envelope(f: &BernsteinFunction, d: usize, r: f64) -> f64 {
    f.phi_prime(r.powi(-2)) / r.powi(d as i32 + 2)
}

#[cfg(test)]
mod tests {
    use super::super::{catalog, CATALOG_KEYS};
    use super::*;

    #[test]
    fn profiles_are_positive_decreasing_with_finite_doubling() {
        for key in CATALOG_KEYS {
            let p = KernelProfiles::new(&catalog(key).unwrap(), 3);
            let rep = p.check();
            assert!(rep.pass, "{key}: {:?}", rep.witnesses);
        }
    }

    #[test]
    fn stable_green_envelope_is_power() {
        let f = catalog("stable:0.5").unwrap();
        // α r^{2-2α-d} for φ = λ^α
        let v = green_envelope(&f, 3, 2.0);
        assert!((v - 0.5 * 2f64.powf(-2.0)).abs() < 1e-14);
    }

    #[test]
    fn a1_truncation() {
        assert_eq!(A1Convention::Bounded.apply(3.0), 3.0);
        assert_eq!(A1Convention::CompactComplement.apply(3.0), 1.0);
    }
}
