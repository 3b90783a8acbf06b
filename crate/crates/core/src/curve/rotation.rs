use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{trapezoid_weights, Srvf, Vec3};
use crate::error::{Error, Result};

/// A proper rotation of 3-space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Rotation3(Matrix3<f64>);

impl Rotation3 {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let ortho = (m * m.transpose() - Matrix3::identity()).norm();
        let det = m.determinant();
        if ortho > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(Error::NotARotation(format!(
                "|RRᵀ - I| = {ortho:e}, det = {det}"
            )));
        }
        Ok(Rotation3(m))
    }

    pub fn identity() -> Self {
        Rotation3(Matrix3::identity())
    }

    /// Rotation by `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(*axis);
        Rotation3(*nalgebra::Rotation3::from_axis_angle(&axis, angle).matrix())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Rotation3 {
        Rotation3(self.0.transpose())
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Rotation angle in radians.
    pub fn angle(&self) -> f64 {
        ((self.0.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

impl TryFrom<[[f64; 3]; 3]> for Rotation3 {
    type Error = Error;
    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self> {
        Rotation3::new(Matrix3::from_fn(|i, j| rows[i][j]))
    }
}

impl From<Rotation3> for [[f64; 3]; 3] {
    fn from(r: Rotation3) -> Self {
        let m = r.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }
}

// argmax over SO(3) of tr(Oᵀ M): O = U Vᵀ with the axis of the smallest
// singular value flipped when that product is a reflection.
fn procrustes3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let mut u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    if (u * v_t).determinant() < 0.0 {
        let smallest = (0..3)
            .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
            .unwrap();
        for r in 0..3 {
            u[(r, smallest)] = -u[(r, smallest)];
        }
    }
    u * v_t
}

/// The rotation `O` minimizing `‖q_ref − O q‖`.
pub fn kabsch_rotation(q_ref: &Srvf, q: &Srvf) -> Result<Rotation3> {
    if q_ref.len() != q.len() {
        return Err(Error::GridMismatch {
            left: q_ref.len(),
            right: q.len(),
        });
    }
    let w = trapezoid_weights(q.len());
    let mut m = Matrix3::zeros();
    for ((a, b), wj) in q_ref.values().iter().zip(q.values()).zip(w) {
        m += a * b.transpose() * wj;
    }
    Ok(Rotation3(procrustes3(&m)))
}

/// `x ↦ R x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Rotation3,
    pub translation: [f64; 3],
}

impl RigidTransform {
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation.apply(p) + Vec3::from(self.translation)
    }
}

/// Least-squares rigid motion taking `moving[i]` onto `fixed[i]`.
pub fn rigid_fit(moving: &[Vec3], fixed: &[Vec3]) -> Result<RigidTransform> {
    if moving.len() != fixed.len() {
        return Err(Error::GridMismatch {
            left: moving.len(),
            right: fixed.len(),
        });
    }
    if moving.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = moving.len() as f64;
    let cm = moving.iter().sum::<Vec3>() / n;
    let cf = fixed.iter().sum::<Vec3>() / n;
    let mut m = Matrix3::zeros();
    for (a, b) in fixed.iter().zip(moving) {
        m += (a - cf) * (b - cm).transpose();
    }
    let r = procrustes3(&m);
    let t = cf - r * cm;
    Ok(RigidTransform {
        rotation: Rotation3(r),
        translation: [t.x, t.y, t.z],
    })
}
