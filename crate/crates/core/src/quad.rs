//! Adaptive Gauss–Kronrod quadrature.
//!
//! Everything in this crate that is defined as a time integral of a heat
//! kernel against a subordinator density is evaluated through
//! [`integrate_log_time`], which works on the variable `x = ln t`. That
//! substitution is scale-free: the integrand peak sits near
//! `t ≍ |x-y|^2`, which becomes a fixed-width bump in `x` regardless of
//! how close the two points are.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// A value together with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn new(value: f64, error: f64) -> Self {
        Estimate { value, error }
    }

    pub fn rel_error(&self) -> f64 {
        if self.value == 0.0 {
            if self.error == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.error / self.value.abs()
        }
    }
}

impl std::ops::Add for Estimate {
    type Output = Estimate;
    fn add(self, rhs: Estimate) -> Estimate {
        Estimate::new(self.value + rhs.value, self.error + rhs.error)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_subdivisions: 2000,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        QuadOptions {
            rel_tol,
            ..Default::default()
        }
    }
}

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
pub(crate) const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

pub(crate) const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
pub(crate) const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// One application of the 21-point rule on `[a, b]`.
/// Returns `(kronrod value, error estimate)`.
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut res_k = f_center * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / res_asc).powf(1.5);
        err = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err)
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate::new(0.0, 0.0));
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("integration limits must be finite".into()));
    }
    let (v, e) = gk21(&f, a, b);
    if !v.is_finite() {
        return Err(Error::Numeric(format!("non-finite integrand on [{a}, {b}]")));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    let mut n = 1;
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= target {
            break;
        }
        if n >= opts.max_subdivisions {
            return Err(Error::Numeric(format!(
                "quadrature on [{a:e}, {b:e}] stalled: value {total:e}, error {total_err:e}"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in floating point
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk21(&f, worst.a, mid);
        let (v2, e2) = gk21(&f, mid, worst.b);
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(Error::Numeric("non-finite integrand".into()));
        }
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
        n += 1;
    }
    // re-sum to remove drift from incremental updates
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(s, e), p| (s + p.value, e + p.error));
    Ok(Estimate::new(value, error))
}

/// Integrate over consecutive subintervals delimited by `points`.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, points: &[f64], opts: &QuadOptions) -> Result<Estimate> {
    let mut acc = Estimate::new(0.0, 0.0);
    for w in points.windows(2) {
        acc = acc + integrate(&f, w[0], w[1], opts)?;
    }
    Ok(acc)
}

/// Width, in units of `ln t`, of one chunk of [`integrate_log_time`].
const CHUNK: f64 = 1.5;
const MAX_CHUNKS: usize = 480;

/// Integrate a nonnegative `f(t)` over `t ∈ (0, ∞)` on the log axis.
///
/// `anchor` is where the integrand is expected to be largest (for heat
/// kernel integrals, `|x-y|^2`). Chunks of the log axis are added outwards
/// from the anchor. The upward sweep stops once `tail(T)` (a rigorous bound
/// on `∫_T^∞ f`) is below the tolerance, or, without a bound, once several
/// consecutive chunks are negligible. The downward sweep always uses the
/// negligible-chunk rule. The returned error includes the tail bound.
pub fn integrate_log_time<F, T>(f: F, anchor: f64, rel_tol: f64, tail: Option<T>) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
    T: Fn(f64) -> f64,
{
    integrate_log_time_from(f, 0.0, anchor, rel_tol, tail)
}

/// As [`integrate_log_time`] but over `(lower, ∞)`.
pub fn integrate_log_time_from<F, T>(f: F, lower: f64, anchor: f64, rel_tol: f64, tail: Option<T>) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
    T: Fn(f64) -> f64,
{
    if !(anchor > 0.0 && anchor.is_finite()) {
        return Err(Error::Domain(format!("anchor must be positive, got {anchor}")));
    }
    let anchor = anchor.max(lower * CHUNK.exp());
    let x_floor = if lower > 0.0 { lower.ln() } else { -700.0 };
    let g = |x: f64| {
        let t = x.exp();
        if t == 0.0 || !t.is_finite() {
            0.0
        } else {
            f(t) * t
        }
    };
    let x0 = anchor.ln();
    let chunk_opts = |scale: f64| QuadOptions {
        rel_tol: rel_tol * 0.1,
        abs_tol: rel_tol * 1e-3 * scale,
        max_subdivisions: 400,
    };
    let mut total = Estimate::new(0.0, 0.0);
    // the two chunks around the anchor set the scale
    total = total + integrate(g, x0 - CHUNK, x0, &chunk_opts(0.0))?;
    total = total + integrate(g, x0, x0 + CHUNK, &chunk_opts(total.value.abs()))?;

    let negligible = |v: f64, tot: f64| v.abs() <= 1e-4 * rel_tol * tot.abs();

    // downward sweep
    let mut quiet = 0;
    let mut lo = x0 - CHUNK;
    for _ in 0..MAX_CHUNKS {
        if lo <= x_floor {
            break;
        }
        let next = (lo - CHUNK).max(x_floor);
        let c = integrate(g, next, lo, &chunk_opts(total.value.abs()))?;
        total = total + c;
        lo = next;
        if negligible(c.value, total.value) {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }

    // upward sweep
    let mut quiet = 0;
    let mut hi = x0 + CHUNK;
    let mut converged = false;
    for _ in 0..MAX_CHUNKS {
        if let Some(tb) = tail.as_ref() {
            let bound = tb(hi.exp());
            if bound.is_finite() && bound <= 0.1 * rel_tol * total.value.abs() {
                total.error += bound;
                converged = true;
                break;
            }
        }
        if hi > 700.0 {
            break;
        }
        let c = integrate(g, hi, hi + CHUNK, &chunk_opts(total.value.abs()))?;
        total = total + c;
        hi += CHUNK;
        if tail.is_none() {
            if negligible(c.value, total.value) {
                quiet += 1;
                if quiet >= 3 {
                    converged = true;
                    break;
                }
            } else {
                quiet = 0;
            }
        }
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "time integral did not converge (value {:e} at t = e^{hi:.0})",
            total.value
        )));
    }
    Ok(total)
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > 0.0 && n >= 1);
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}
