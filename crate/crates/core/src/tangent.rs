//! Geometry of the SRVF sphere: exponential and logarithm maps, and the
//! projected Fourier basis that turns tangent vectors into coefficient rows.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::curve::{l2_inner, uniform_grid, Srvf, Vec3};
use crate::error::{Error, Result};

/// `|⟨v, base⟩|` above this is not considered tangent.
pub const TANGENCY_TOL: f64 = 1e-6;
/// Basis elements shorter than this after projection are dropped.
pub const DROP_TOL: f64 = 1e-8;
/// Inner products at or below `-1 + ANTIPODAL_TOL` have no unique geodesic.
pub const ANTIPODAL_TOL: f64 = 1e-9;
/// Default cap on the basis size.
pub const MAX_DEFAULT_BASIS: usize = 20;

/// A vector field tangent to the SRVF sphere at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    values: Vec<Vec3>,
    base: Arc<Srvf>,
}

fn same_base(a: &Arc<Srvf>, b: &Arc<Srvf>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

impl TangentVector {
    /// Checks the grid and `|⟨v, base⟩| < 1e-6`.
    pub fn new(base: Arc<Srvf>, values: Vec<Vec3>) -> Result<Self> {
        check_tangent(&base, &values)?;
        Ok(TangentVector { values, base })
    }

    pub fn zero(base: Arc<Srvf>) -> Self {
        TangentVector {
            values: vec![Vec3::zeros(); base.len()],
            base,
        }
    }

    pub(crate) fn new_unchecked(base: Arc<Srvf>, values: Vec<Vec3>) -> Self {
        TangentVector { values, base }
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn base(&self) -> &Arc<Srvf> {
        &self.base
    }

    pub fn into_values(self) -> Vec<Vec3> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        l2_inner(&self.values, &self.values).unwrap_or(0.0).sqrt()
    }

    /// Inner product of two vectors at the same base.
    pub fn inner(&self, other: &TangentVector) -> Result<f64> {
        if !same_base(&self.base, &other.base) {
            return Err(Error::BaseMismatch);
        }
        l2_inner(&self.values, &other.values)
    }

    /// `⟨v, base⟩`; zero up to rounding for a tangent vector.
    pub fn normal_component(&self) -> f64 {
        l2_inner(&self.values, self.base.values()).unwrap_or(f64::NAN)
    }
}

fn check_tangent(base: &Srvf, values: &[Vec3]) -> Result<()> {
    let inner = l2_inner(values, base.values())?;
    if !(inner.abs() < TANGENCY_TOL) {
        return Err(Error::TangencyViolation { inner });
    }
    Ok(())
}

/// Log map on the unit sphere: the initial velocity of the geodesic from
/// `base` to `q`, with length equal to the geodesic distance.
pub fn log_map(base: &Arc<Srvf>, q: &Srvf) -> Result<TangentVector> {
    let c = base.inner(q)?.clamp(-1.0, 1.0);
    if c <= -1.0 + ANTIPODAL_TOL {
        return Err(Error::AntipodalPoint { inner: c });
    }
    let u: Vec<Vec3> = q.values().iter().zip(base.values()).map(|(x, b)| x - b * c).collect();
    let un = l2_inner(&u, &u)?.sqrt();
    if un == 0.0 {
        return Ok(TangentVector::zero(Arc::clone(base)));
    }
    // atan2 keeps full accuracy for nearby points, where acos(c) does not.
    let alpha = un.atan2(c);
    let scale = alpha / un;
    Ok(TangentVector::new_unchecked(
        Arc::clone(base),
        u.into_iter().map(|x| x * scale).collect(),
    ))
}

/// Geodesic distance on the sphere, `arccos⟨a, b⟩`, computed from the chord
/// so that it stays accurate for nearby points.
pub fn geodesic_distance(a: &Srvf, b: &Srvf) -> Result<f64> {
    let chord = a.distance(b)?;
    Ok(2.0 * (0.5 * chord).clamp(0.0, 1.0).asin())
}

/// Exponential map: `base cos α + (v / α) sin α` with `α = ‖v‖`.
pub fn exp_map(base: &Srvf, v: &TangentVector) -> Result<Srvf> {
    if v.base.as_ref() != base {
        return Err(Error::BaseMismatch);
    }
    exp_values(base, v.values())
}

/// [`exp_map`] for a raw field; the tangency check is done here.
pub fn exp_values(base: &Srvf, v: &[Vec3]) -> Result<Srvf> {
    check_tangent(base, v)?;
    let alpha = l2_inner(v, v)?.sqrt();
    if alpha == 0.0 {
        return Ok(base.clone());
    }
    let (s, c) = alpha.sin_cos();
    let k = s / alpha;
    Srvf::from_values(base.values().iter().zip(v).map(|(b, x)| b * c + x * k).collect())
}

/// How the projected Fourier elements are turned into a basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisMode {
    /// Normalize, project onto the tangent space and orthonormalize.
    #[default]
    Orthonormal,
    /// Normalize and project only. Coefficients are then inner products with a
    /// non-orthogonal frame and `decode` is not an inverse of `encode`.
    RawProjected,
}

/// Tangent-space basis at a base SRVF.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    base: Arc<Srvf>,
    elements: Vec<TangentVector>,
    mode: BasisMode,
    requested: usize,
    dropped: Vec<usize>,
    id: String,
}

/// Raw Fourier element `index`: function `index / 3` of
/// `[1, sin 2πt, cos 2πt, sin 4πt, cos 4πt, …]` in coordinate `index % 3`.
pub fn fourier_element(index: usize, samples: usize) -> Vec<Vec3> {
    let (func, channel) = (index / 3, index % 3);
    let m = func.div_ceil(2) as f64;
    uniform_grid(samples)
        .into_iter()
        .map(|t| {
            let s = match func {
                0 => 1.0,
                f if f % 2 == 1 => (2.0 * PI * m * t).sin(),
                _ => (2.0 * PI * m * t).cos(),
            };
            let mut v = Vec3::zeros();
            v[channel] = s;
            v
        })
        .collect()
}

fn scaled(v: &[Vec3], k: f64) -> Vec<Vec3> {
    v.iter().map(|x| x * k).collect()
}

fn axpy(y: &mut [Vec3], a: f64, x: &[Vec3]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * a;
    }
}

fn basis_id(base: &Srvf, requested: usize, mode: BasisMode) -> String {
    let mut h = Sha256::new();
    h.update((base.len() as u64).to_le_bytes());
    h.update((requested as u64).to_le_bytes());
    h.update([mode as u8]);
    for v in base.values() {
        for c in v.iter() {
            h.update(c.to_le_bytes());
        }
    }
    h.finalize().iter().take(12).map(|b| format!("{b:02x}")).collect()
}

/// Basis from the first `k` raw Fourier elements at `base`. Elements that
/// vanish after projection (or, when orthonormalizing, after removing the
/// earlier elements) are skipped and listed in [`Basis::dropped`].
pub fn make_basis(base: Arc<Srvf>, k: usize, mode: BasisMode) -> Result<Basis> {
    if k == 0 {
        return Err(Error::BadSpec("basis size must be at least 1".into()));
    }
    let n = base.len();
    let mut elements: Vec<TangentVector> = Vec::with_capacity(k);
    let mut dropped = Vec::new();
    for index in 0..k {
        let raw = fourier_element(index, n);
        let mut g = scaled(&raw, 1.0 / l2_inner(&raw, &raw)?.sqrt());
        let c = l2_inner(&g, base.values())?;
        axpy(&mut g, -c, base.values());
        if l2_inner(&g, &g)?.sqrt() < DROP_TOL {
            dropped.push(index);
            continue;
        }
        if mode == BasisMode::Orthonormal {
            for e in &elements {
                let c = l2_inner(&g, e.values())?;
                axpy(&mut g, -c, e.values());
            }
            // Second pass against the base and earlier elements for accuracy.
            let c = l2_inner(&g, base.values())?;
            axpy(&mut g, -c, base.values());
            for e in &elements {
                let c = l2_inner(&g, e.values())?;
                axpy(&mut g, -c, e.values());
            }
            let norm = l2_inner(&g, &g)?.sqrt();
            if norm < DROP_TOL {
                dropped.push(index);
                continue;
            }
            g = scaled(&g, 1.0 / norm);
        }
        elements.push(TangentVector::new(Arc::clone(&base), g)?);
    }
    let id = basis_id(&base, k, mode);
    Ok(Basis {
        base,
        elements,
        mode,
        requested: k,
        dropped,
        id,
    })
}

/// Default basis size for a bundle of `n` fibers.
pub fn default_basis_size(n: usize) -> usize {
    n.clamp(1, MAX_DEFAULT_BASIS)
}

impl Basis {
    pub fn base(&self) -> &Arc<Srvf> {
        &self.base
    }

    pub fn elements(&self) -> &[TangentVector] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn mode(&self) -> BasisMode {
        self.mode
    }

    /// Number of raw elements asked for.
    pub fn requested(&self) -> usize {
        self.requested
    }

    /// Raw element indices dropped as degenerate.
    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn id(&self) -> &str {
        &self.id
    }
}

/// `N × K` coordinates of tangent vectors in a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffMatrix {
    pub entries: DMatrix<f64>,
    pub basis_id: String,
    /// Norm of the part of each encoded vector outside the basis span. Empty
    /// when the matrix was not produced by [`encode`].
    pub residuals: Vec<f64>,
}

impl CoeffMatrix {
    pub fn new(entries: DMatrix<f64>, basis_id: impl Into<String>) -> Self {
        CoeffMatrix {
            entries,
            basis_id: basis_id.into(),
            residuals: Vec::new(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.shape()
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }
}

/// `A[i][k] = ⟨v_i, e_k⟩`.
pub fn encode(vs: &[TangentVector], basis: &Basis) -> Result<CoeffMatrix> {
    let k = basis.len();
    let mut a = DMatrix::zeros(vs.len(), k);
    let mut residuals = Vec::with_capacity(vs.len());
    for (i, v) in vs.iter().enumerate() {
        if !same_base(v.base(), basis.base()) {
            return Err(Error::BaseMismatch);
        }
        let mut rest = v.values().to_vec();
        for (c, e) in basis.elements.iter().enumerate() {
            let coef = l2_inner(v.values(), e.values())?;
            a[(i, c)] = coef;
            axpy(&mut rest, -coef, e.values());
        }
        residuals.push(l2_inner(&rest, &rest)?.sqrt());
    }
    Ok(CoeffMatrix {
        entries: a,
        basis_id: basis.id.clone(),
        residuals,
    })
}

/// `v_i = Σ_k A[i][k] e_k`.
pub fn decode(a: &CoeffMatrix, basis: &Basis) -> Result<Vec<TangentVector>> {
    if a.basis_id != basis.id {
        return Err(Error::BaseMismatch);
    }
    if a.cols() != basis.len() {
        return Err(Error::ShapeMismatch {
            left: a.shape(),
            right: (a.rows(), basis.len()),
        });
    }
    let n = basis.base.len();
    Ok((0..a.rows())
        .map(|i| {
            let mut v = vec![Vec3::zeros(); n];
            for (c, e) in basis.elements.iter().enumerate() {
                axpy(&mut v, a.entries[(i, c)], e.values());
            }
            TangentVector::new_unchecked(Arc::clone(&basis.base), v)
        })
        .collect())
}
