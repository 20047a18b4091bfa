//! Model domains, boundary distance and boundary boxes.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain_err, unsupported, Error, Result};

pub type Point = Vec<f64>;

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// `κ(Λ) = (1 + (1+Λ)²)^{-1/2}`.
pub fn kappa(lambda: f64) -> f64 {
    (1.0 + (1.0 + lambda).powi(2)).powf(-0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainKind {
    /// `{x_d > 0}`
    HalfSpace,
    /// `∏ (lo_i, hi_i)`
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

/// `C^{1,1}` characteristics `(R, Λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C11 {
    pub r: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub kind: DomainKind,
    pub d: usize,
    pub interior_subset: Option<Box<Domain>>,
}

impl Domain {
    pub fn half_space(d: usize) -> Result<Self> {
        if d < 1 {
            return Err(Error::Invalid("dimension must be at least 1".into()));
        }
        Ok(Domain {
            kind: DomainKind::HalfSpace,
            d,
            interior_subset: None,
        })
    }

    pub fn cuboid(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Invalid("box extents must have equal, nonzero length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Invalid("box needs lo < hi in every coordinate".into()));
        }
        Ok(Domain {
            d: lo.len(),
            kind: DomainKind::Box { lo, hi },
            interior_subset: None,
        })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.len() < 2 {
            return Err(Error::Invalid("dimension must be at least 2".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Invalid("ball radius must be positive".into()));
        }
        Ok(Domain {
            d: center.len(),
            kind: DomainKind::Ball { center, radius },
            interior_subset: None,
        })
    }

    /// Attach an open subset `E ⊂ D`; `E` must lie inside `D`.
    pub fn with_interior_subset(mut self, e: Domain) -> Result<Self> {
        if e.d != self.d {
            return Err(Error::Invalid("interior subset has a different dimension".into()));
        }
        let inside = match &e.kind {
            DomainKind::Ball { center, radius } => self.signed_distance(center) >= *radius,
            DomainKind::Box { lo, hi } => corners(lo, hi).iter().all(|c| self.signed_distance(c) >= 0.0),
            DomainKind::HalfSpace => false,
        };
        if !inside {
            return Err(Error::Invalid("interior subset is not contained in the domain".into()));
        }
        self.interior_subset = Some(Box::new(e));
        Ok(self)
    }

    /// `C^{1,1}` characteristics, or `None` for merely Lipschitz boxes.
    pub fn c11(&self) -> Option<C11> {
        match &self.kind {
            DomainKind::HalfSpace => Some(C11 { r: 1.0, lambda: 0.0 }),
            DomainKind::Box { .. } => None,
            DomainKind::Ball { radius, .. } => Some(ball_c11(*radius)),
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self.kind, DomainKind::HalfSpace)
    }

    /// Distance to `∂D`, positive inside and negative outside.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::HalfSpace => x[self.d - 1],
            DomainKind::Box { lo, hi } => {
                let mut inside = f64::INFINITY;
                let mut outside = 0.0;
                for i in 0..self.d {
                    let a = x[i] - lo[i];
                    let b = hi[i] - x[i];
                    inside = inside.min(a.min(b));
                    let e = (-a).max(-b).max(0.0);
                    outside += e * e;
                }
                if inside >= 0.0 {
                    inside
                } else {
                    -outside.sqrt()
                }
            }
            DomainKind::Ball { center, radius } => radius - dist(x, center),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.d && self.signed_distance(x) > 0.0
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::Invalid(format!("point has dimension {}, domain has {}", x.len(), self.d)));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return domain_err("point has non-finite coordinates");
        }
        Ok(())
    }

    /// Wall-clock diameter; infinite for the half-space.
    pub fn diameter(&self) -> f64 {
        match &self.kind {
            DomainKind::HalfSpace => f64::INFINITY,
            DomainKind::Box { lo, hi } => dist(lo, hi),
            DomainKind::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Reflect across a boundary face; only meaningful for the half-space.
    pub fn reflect(&self, y: &[f64]) -> Point {
        let mut r = y.to_vec();
        r[self.d - 1] = -r[self.d - 1];
        r
    }
}

fn corners(lo: &[f64], hi: &[f64]) -> Vec<Point> {
    let d = lo.len();
    (0..1usize << d)
        .map(|m| (0..d).map(|i| if m >> i & 1 == 1 { hi[i] } else { lo[i] }).collect())
        .collect()
}

/// Characteristics of a ball of radius `rb`: the boundary is the graph
/// `rb - sqrt(rb² - |ỹ|²)` over `|ỹ| < rb/2`, whose gradient is bounded by
/// `1/√3` and Lipschitz with constant `(4/3)^{3/2}/rb`.
pub fn ball_c11(rb: f64) -> C11 {
    C11 {
        r: rb / 2.0,
        lambda: (1.0 / 3f64.sqrt()).max((4.0f64 / 3.0).powf(1.5) / rb),
    }
}

/// Exact distance `δ_D(x)` for `x` in the closure of `D`.
pub fn dist_to_boundary(d: &Domain, x: &[f64]) -> Result<f64> {
    d.check_point(x)?;
    let s = d.signed_distance(x);
    if s < 0.0 {
        return domain_err(format!("point {x:?} lies outside the domain closure"));
    }
    Ok(s)
}

/// The region `D_Q(r1, r2) = {y : 0 < ρ_Q(y) < r1, |ỹ| < r2}` at a flat
/// boundary point `Q`, in the coordinate system with inward normal `axis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryBox {
    pub q: Point,
    pub r1: f64,
    pub r2: f64,
    /// Index of the coordinate normal to the face.
    pub axis: usize,
    /// `+1` if the interior lies in the direction of increasing coordinate.
    pub orientation: f64,
}

impl BoundaryBox {
    /// `ρ_Q(y)`, the height above the tangent face.
    pub fn rho(&self, y: &[f64]) -> f64 {
        self.orientation * (y[self.axis] - self.q[self.axis])
    }

    /// Tangential offset `ỹ` from `Q`.
    pub fn tangential(&self, y: &[f64]) -> Point {
        y.iter()
            .zip(&self.q)
            .enumerate()
            .filter(|(i, _)| *i != self.axis)
            .map(|(_, (a, b))| a - b)
            .collect()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        let rho = self.rho(y);
        rho > 0.0 && rho < self.r1 && norm(&self.tangential(y)) < self.r2
    }

    /// Distance from an interior `y` to the boundary of the region (cylinder).
    pub fn dist_to_boundary(&self, y: &[f64]) -> f64 {
        let rho = self.rho(y);
        let t = norm(&self.tangential(y));
        rho.min(self.r1 - rho).min(self.r2 - t)
    }

    /// Point at height `rho` above `Q` on the normal through `Q`.
    pub fn point_at_height(&self, rho: f64) -> Point {
        let mut p = self.q.clone();
        p[self.axis] += self.orientation * rho;
        p
    }

    /// Uniform sample from the region.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let d = self.q.len();
        // uniform in the (d-1)-ball by normal direction and radius^(1/(d-1))
        let m = d - 1;
        let dir: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let nd = norm(&dir);
        let rad = self.r2 * rng.random::<f64>().powf(1.0 / m as f64);
        let rho = self.r1 * (1.0 - rng.random::<f64>());
        let mut p = self.q.clone();
        let mut k = 0;
        for (i, pi) in p.iter_mut().enumerate() {
            if i == self.axis {
                *pi += self.orientation * rho;
            } else {
                *pi += rad * dir[k] / nd;
                k += 1;
            }
        }
        p
    }
}

/// Build `D_Q(r1, r2)` at the boundary point `Q`.
pub fn boundary_box(d: &Domain, q: &[f64], r1: f64, r2: f64) -> Result<BoundaryBox> {
    d.check_point(q)?;
    if !(r1 > 0.0 && r2 > 0.0) {
        return domain_err("box lengths must be positive");
    }
    match &d.kind {
        DomainKind::HalfSpace => {
            if q[d.d - 1].abs() > 1e-12 {
                return domain_err("Q must lie on the boundary");
            }
            let mut q = q.to_vec();
            q[d.d - 1] = 0.0;
            Ok(BoundaryBox {
                q,
                r1,
                r2,
                axis: d.d - 1,
                orientation: 1.0,
            })
        }
        DomainKind::Box { lo, hi } => {
            let tol = 1e-12;
            let faces: Vec<(usize, f64)> = (0..d.d)
                .filter_map(|i| {
                    if (q[i] - lo[i]).abs() < tol {
                        Some((i, 1.0))
                    } else if (q[i] - hi[i]).abs() < tol {
                        Some((i, -1.0))
                    } else {
                        None
                    }
                })
                .collect();
            if faces.is_empty() || q.iter().zip(lo.iter().zip(hi)).any(|(v, (a, b))| *v < a - tol || *v > b + tol) {
                return domain_err("Q must lie on the boundary");
            }
            if faces.len() > 1 {
                return unsupported("Q lies on an edge or corner of the box");
            }
            let (axis, orientation) = faces[0];
            let reach = r1.max(r2);
            for i in (0..d.d).filter(|&i| i != axis) {
                if q[i] - lo[i] <= reach || hi[i] - q[i] <= reach {
                    return unsupported("Q is too close to an edge of the box");
                }
            }
            if r1 >= hi[axis] - lo[axis] {
                return unsupported("box height exceeds the domain width");
            }
            let mut q = q.to_vec();
            q[axis] = if orientation > 0.0 { lo[axis] } else { hi[axis] };
            Ok(BoundaryBox {
                q,
                r1,
                r2,
                axis,
                orientation,
            })
        }
        DomainKind::Ball { .. } => unsupported("boundary boxes are only available for flat boundaries"),
    }
}

/// A uniform sample from a bounding box of the domain enlarged by `pad`
/// (the half-space is probed in `[-pad, pad]^{d-1} × [-pad, pad]`).
pub fn sample_probe<R: Rng + ?Sized>(d: &Domain, pad: f64, rng: &mut R) -> Point {
    let (lo, hi): (Vec<f64>, Vec<f64>) = match &d.kind {
        DomainKind::HalfSpace => (vec![-pad; d.d], vec![pad; d.d]),
        DomainKind::Box { lo, hi } => (lo.iter().map(|a| a - pad).collect(), hi.iter().map(|b| b + pad).collect()),
        DomainKind::Ball { center, radius } => (
            center.iter().map(|c| c - radius - pad).collect(),
            center.iter().map(|c| c + radius + pad).collect(),
        ),
    };
    lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect()
}

/// Standard normal vector.
pub fn normal_vec<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Point {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}
