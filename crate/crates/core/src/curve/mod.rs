//! Discrete open curves in 3-space and their square-root velocity functions.
//!
//! Every curve quantity lives on a uniform grid `t_j = j / (T - 1)` over
//! `[0, 1]`. Integrals use the trapezoid rule on that grid, so the discrete
//! SRVF sphere is the unit sphere of a weighted Euclidean space and the usual
//! closed-form sphere geometry holds exactly.

mod align;
mod dp;
mod refine;
mod rotation;
mod warp;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use align::{align_pair, PairAlignment, DEFAULT_ALIGN_ITERS};
pub use dp::{optimal_gamma, segment_cost, WarpSolution, LATTICE_STEPS};
pub use refine::refine_gamma;
pub use rotation::{kabsch_rotation, rigid_fit, RigidTransform, Rotation3};
pub use warp::{apply_gamma, warp_field, Diffeo};
pub(crate) use warp::interp_scalar;

pub type Vec3 = Vector3<f64>;

/// Default number of samples per fiber.
pub const DEFAULT_SAMPLES: usize = 100;

/// Speeds below this are treated as a pause; the SRVF is zero there.
pub const ZERO_SPEED: f64 = 1e-12;

pub(crate) fn grid_step(n: usize) -> f64 {
    1.0 / (n - 1) as f64
}

/// Uniform grid `t_j = j / (n - 1)`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    let h = grid_step(n);
    (0..n).map(|j| j as f64 * h).collect()
}

/// Trapezoid quadrature weights on the uniform grid with `n` points.
pub fn trapezoid_weights(n: usize) -> Vec<f64> {
    let h = grid_step(n);
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// Trapezoid discretization of `∫ <a(t), b(t)> dt`.
pub fn l2_inner(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Ok(0.0);
    }
    let h = grid_step(a.len());
    let n = a.len();
    let mut acc = 0.5 * (a[0].dot(&b[0]) + a[n - 1].dot(&b[n - 1]));
    for j in 1..n - 1 {
        acc += a[j].dot(&b[j]);
    }
    Ok(acc * h)
}

pub(crate) fn l2_norm(a: &[Vec3]) -> f64 {
    l2_inner(a, a).map(f64::sqrt).unwrap_or(0.0)
}

/// Finite-difference derivative with respect to the grid parameter: central
/// differences inside, second-order one-sided differences at both ends.
pub fn derivative(values: &[Vec3]) -> Vec<Vec3> {
    let n = values.len();
    assert!(n >= 3, "derivative needs at least 3 samples");
    let inv2h = 0.5 / grid_step(n);
    let mut out = Vec::with_capacity(n);
    out.push((-3.0 * values[0] + 4.0 * values[1] - values[2]) * inv2h);
    for j in 1..n - 1 {
        out.push((values[j + 1] - values[j - 1]) * inv2h);
    }
    out.push((3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) * inv2h);
    out
}

/// Scalar version of [`derivative`].
pub fn derivative_scalar(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 3, "derivative needs at least 3 samples");
    let inv2h = 0.5 / grid_step(n);
    let mut out = Vec::with_capacity(n);
    out.push((-3.0 * values[0] + 4.0 * values[1] - values[2]) * inv2h);
    for j in 1..n - 1 {
        out.push((values[j + 1] - values[j - 1]) * inv2h);
    }
    out.push((3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) * inv2h);
    out
}

// Least-squares inverse of `derivative` with f(0) = 0, cached per grid size.
// The difference operator has only constants in its kernel, so velocities that
// came from `derivative` are integrated back exactly.
fn integration_operator(n: usize) -> Arc<DMatrix<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<DMatrix<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(op) = cache.lock().expect("integration cache poisoned").get(&n) {
        return Arc::clone(op);
    }
    let inv2h = 0.5 / grid_step(n);
    // Unknowns f_1..f_{n-1}; column c holds f_{c+1}.
    let mut d = DMatrix::<f64>::zeros(n, n - 1);
    let mut set = |row: usize, idx: usize, coef: f64| {
        if idx > 0 {
            d[(row, idx - 1)] += coef * inv2h;
        }
    };
    set(0, 1, 4.0);
    set(0, 2, -1.0);
    for j in 1..n - 1 {
        set(j, j + 1, 1.0);
        set(j, j - 1, -1.0);
    }
    set(n - 1, n - 1, 3.0);
    set(n - 1, n - 2, -4.0);
    set(n - 1, n - 3, 1.0);
    let pinv = d
        .pseudo_inverse(1e-12)
        .expect("pseudo-inverse of a difference operator");
    let op = Arc::new(pinv);
    cache
        .lock()
        .expect("integration cache poisoned")
        .insert(n, Arc::clone(&op));
    op
}

/// Integrate a velocity field back to positions starting at the origin.
pub fn integrate(velocity: &[Vec3]) -> Vec<Vec3> {
    let n = velocity.len();
    assert!(n >= 3, "integrate needs at least 3 samples");
    let op = integration_operator(n);
    let mut out = vec![Vec3::zeros(); n];
    for c in 0..3 {
        let rhs = nalgebra::DVector::from_iterator(n, velocity.iter().map(|v| v[c]));
        let sol = &*op * rhs;
        for j in 1..n {
            out[j][c] = sol[j - 1];
        }
    }
    out
}

/// A discretized open curve in 3-space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct Fiber {
    points: Vec<Vec3>,
}

impl Fiber {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::TooFewPoints {
                min: 2,
                got: points.len(),
            });
        }
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::BadSpec("fiber has non-finite coordinates".into()));
        }
        let f = Fiber { points };
        if f.arc_length() <= 0.0 {
            return Err(Error::DegenerateFiber);
        }
        Ok(f)
    }

    pub fn from_arrays(points: &[[f64; 3]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Vec3::from(*p)).collect())
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Polyline length.
    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    pub fn reversed(&self) -> Fiber {
        let mut points = self.points.clone();
        points.reverse();
        Fiber { points }
    }

    pub fn translated(&self, by: &Vec3) -> Fiber {
        Fiber {
            points: self.points.iter().map(|p| p + by).collect(),
        }
    }

    pub fn centroid(&self) -> Vec3 {
        self.points.iter().sum::<Vec3>() / self.points.len() as f64
    }

    /// Length as seen by the SRVF: the trapezoid integral of the
    /// finite-difference speed. `from_srvf(to_srvf(f), f[0], f.srvf_scale())`
    /// reproduces `f`.
    pub fn srvf_scale(&self) -> f64 {
        if self.points.len() < 3 {
            return self.arc_length();
        }
        let vel = derivative(&self.points);
        let speeds: Vec<Vec3> = vel.iter().map(|v| Vec3::new(v.norm().sqrt(), 0.0, 0.0)).collect();
        l2_inner(&speeds, &speeds).unwrap_or(0.0)
    }

    /// Flip the point order if that brings the endpoints closer to the
    /// reference fiber's endpoints.
    pub fn oriented_to(&self, reference: &Fiber) -> Fiber {
        let (a0, a1) = (self.points[0], self.points[self.points.len() - 1]);
        let (b0, b1) = (reference.points[0], reference.points[reference.points.len() - 1]);
        let keep = (a0 - b0).norm() + (a1 - b1).norm();
        let flip = (a1 - b0).norm() + (a0 - b1).norm();
        if flip < keep {
            self.reversed()
        } else {
            self.clone()
        }
    }
}

impl TryFrom<Vec<[f64; 3]>> for Fiber {
    type Error = Error;
    fn try_from(v: Vec<[f64; 3]>) -> Result<Self> {
        Fiber::from_arrays(&v)
    }
}

impl From<Fiber> for Vec<[f64; 3]> {
    fn from(f: Fiber) -> Self {
        f.points.iter().map(|p| [p.x, p.y, p.z]).collect()
    }
}

/// Resample a fiber to `samples` points spaced uniformly in arc length.
pub fn resample(fiber: &Fiber, samples: usize) -> Result<Fiber> {
    resample_polyline(fiber.points(), samples)
}

/// [`resample`] for a raw point list (at least two points, positive length).
pub fn resample_polyline(points: &[Vec3], samples: usize) -> Result<Fiber> {
    let at = arc_positions(points, samples)?;
    Fiber::new(
        at.iter()
            .map(|&(seg, frac)| match points.get(seg + 1) {
                Some(next) => points[seg] + (next - points[seg]) * frac,
                None => points[seg],
            })
            .collect(),
    )
}

/// Resample values attached to the points of a polyline (such as a scalar
/// profile) at the positions [`resample_polyline`] uses.
pub fn resample_values(points: &[Vec3], values: &[f64], samples: usize) -> Result<Vec<f64>> {
    if values.len() != points.len() {
        return Err(Error::GridMismatch {
            left: points.len(),
            right: values.len(),
        });
    }
    let at = arc_positions(points, samples)?;
    Ok(at
        .iter()
        .map(|&(seg, frac)| match values.get(seg + 1) {
            Some(next) => values[seg] + (next - values[seg]) * frac,
            None => values[seg],
        })
        .collect())
}

// Segment index and fraction of `samples` points equally spaced in arc length.
// The ends are returned exactly as (0, 0) and (last, 0).
fn arc_positions(points: &[Vec3], samples: usize) -> Result<Vec<(usize, f64)>> {
    if samples < 3 {
        return Err(Error::BadSpec(format!("resample count {samples} < 3")));
    }
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            min: 2,
            got: points.len(),
        });
    }
    let mut cum = Vec::with_capacity(points.len());
    cum.push(0.0);
    for w in points.windows(2) {
        let last = *cum.last().unwrap();
        cum.push(last + (w[1] - w[0]).norm());
    }
    let total = *cum.last().unwrap();
    if !(total > 0.0) {
        return Err(Error::DegenerateFiber);
    }
    let mut out = Vec::with_capacity(samples);
    out.push((0, 0.0));
    let mut seg = 0;
    for j in 1..samples - 1 {
        let s = total * j as f64 / (samples - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let frac = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
        out.push((seg, frac.clamp(0.0, 1.0)));
    }
    out.push((points.len() - 1, 0.0));
    Ok(out)
}

/// Square-root velocity function of a fiber, scaled to unit L² norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Srvf {
    values: Vec<Vec3>,
}

impl Srvf {
    /// Normalize an arbitrary field to unit norm.
    pub fn from_values(values: Vec<Vec3>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::TooFewPoints {
                min: 3,
                got: values.len(),
            });
        }
        let norm = l2_norm(&values);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateFiber);
        }
        Ok(Srvf {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    /// Take already-normalized values as they are, so stored means reload
    /// bit-for-bit. Fails unless the norm is within `1e-9` of one.
    pub(crate) fn from_unit_values(values: Vec<Vec3>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::TooFewPoints {
                min: 3,
                got: values.len(),
            });
        }
        if !((l2_norm(&values) - 1.0).abs() <= 1e-9) {
            return Err(Error::DegenerateFiber);
        }
        Ok(Srvf { values })
    }

    /// Constant SRVF `c / |c|`; the SRVF of a straight segment along `c`.
    pub fn constant(direction: Vec3, samples: usize) -> Result<Self> {
        Self::from_values(vec![direction; samples])
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn inner(&self, other: &Srvf) -> Result<f64> {
        inner(self, other)
    }

    /// L² (chordal) distance.
    pub fn distance(&self, other: &Srvf) -> Result<f64> {
        let diff = sub(&self.values, &other.values)?;
        Ok(l2_norm(&diff))
    }

    pub fn rotated(&self, r: &Rotation3) -> Srvf {
        Srvf {
            values: self.values.iter().map(|v| r.matrix() * v).collect(),
        }
    }

    /// Maximum pointwise Euclidean difference.
    pub fn sup_distance(&self, other: &Srvf) -> f64 {
        sup_distance(&self.values, &other.values)
    }
}

pub(crate) fn sub(a: &[Vec3], b: &[Vec3]) -> Result<Vec<Vec3>> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

pub fn sup_distance(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// SRVF `q = f' / sqrt(|f'|)`, rescaled to unit norm.
pub fn to_srvf(fiber: &Fiber) -> Result<Srvf> {
    if fiber.len() < 3 {
        return Err(Error::TooFewPoints {
            min: 3,
            got: fiber.len(),
        });
    }
    let vel = derivative(fiber.points());
    let q: Vec<Vec3> = vel
        .iter()
        .map(|v| {
            let speed = v.norm();
            if speed < ZERO_SPEED {
                Vec3::zeros()
            } else {
                v / speed.sqrt()
            }
        })
        .collect();
    Srvf::from_values(q)
}

/// Inverse SRVF map: `f(t) = origin + scale * ∫ q |q| ds`.
pub fn from_srvf(q: &Srvf, origin: Vec3, scale: f64) -> Result<Fiber> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::BadSpec(format!("scale must be positive, got {scale}")));
    }
    let vel: Vec<Vec3> = q.values.iter().map(|v| v * v.norm() * scale).collect();
    let rel = integrate(&vel);
    Fiber::new(rel.into_iter().map(|p| p + origin).collect())
}

/// L² inner product of two SRVFs on the shared grid.
pub fn inner(a: &Srvf, b: &Srvf) -> Result<f64> {
    l2_inner(&a.values, &b.values)
}

/// Linear interpolation of grid samples at parameter `s` in `[0, 1]`.
pub(crate) fn interpolate(values: &[Vec3], s: f64) -> Vec3 {
    interpolate_index(values, s * (values.len() - 1) as f64)
}

/// Linear interpolation at a fractional sample index.
pub(crate) fn interpolate_index(values: &[Vec3], x: f64) -> Vec3 {
    let last = values.len() - 1;
    if x <= 0.0 {
        return values[0];
    }
    if x >= last as f64 {
        return values[last];
    }
    let i = x.floor() as usize;
    let frac = x - i as f64;
    if frac == 0.0 {
        values[i]
    } else {
        values[i] * (1.0 - frac) + values[i + 1] * frac
    }
}
