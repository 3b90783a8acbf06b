//! Parallel transport of tangent vectors along great circles of the SRVF
//! sphere.
//!
//! [`transport_exact`] uses the closed form for the unit sphere and is the
//! default. [`transport_stepwise`] walks the geodesic in `k` steps,
//! re-projecting onto each intermediate tangent space and restoring the norm;
//! it converges to the exact result at rate `O(1/k)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curve::{l2_inner, Srvf, Vec3};
use crate::error::{Error, Result};
use crate::tangent::{exp_values, log_map, TangentVector, ANTIPODAL_TOL};

/// Default number of steps for [`transport_stepwise`].
pub const DEFAULT_STEPS: usize = 10;
/// Geodesics shorter than this are treated as a single point.
pub const MIN_PATH_LENGTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    /// Transported vectors, tangent at the destination.
    pub vectors: Vec<TangentVector>,
    pub steps: usize,
    /// Length of the geodesic from source to destination.
    pub path_length: f64,
}

/// Norm given to each vector after a stepwise re-projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rescale {
    /// Keep the vector's original norm (transport is an isometry).
    #[default]
    Original,
    /// Give every vector the geodesic length; reproduces the literal rule
    /// some descriptions of the algorithm use.
    PathLength,
}

/// Which transport implementation to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TransportMode {
    #[default]
    Exact,
    Stepwise { steps: usize, rescale: Rescale },
}

impl TransportMode {
    pub fn run(&self, src: &Arc<Srvf>, dst: &Arc<Srvf>, vs: &[TangentVector]) -> Result<TransportResult> {
        match *self {
            TransportMode::Exact => transport_exact(src, dst, vs),
            TransportMode::Stepwise { steps, rescale } => transport_stepwise(src, dst, vs, steps, rescale),
        }
    }
}

fn check_inputs(src: &Arc<Srvf>, dst: &Srvf, vs: &[TangentVector]) -> Result<f64> {
    if src.len() != dst.len() {
        return Err(Error::GridMismatch {
            left: src.len(),
            right: dst.len(),
        });
    }
    if vs.iter().any(|v| !(Arc::ptr_eq(v.base(), src) || v.base().as_ref() == src.as_ref())) {
        return Err(Error::BaseMismatch);
    }
    let c = src.inner(dst)?;
    if c <= -1.0 + ANTIPODAL_TOL {
        return Err(Error::AntipodalPoint { inner: c });
    }
    Ok(c)
}

/// Closed-form transport along the minimal great circle:
/// `ṽ = v − ⟨v, dst⟩ / (1 + ⟨src, dst⟩) (src + dst)`.
pub fn transport_exact(src: &Arc<Srvf>, dst: &Arc<Srvf>, vs: &[TangentVector]) -> Result<TransportResult> {
    let c = check_inputs(src, dst, vs)?;
    let path_length = log_map(src, dst)?.norm();
    let sum: Vec<Vec3> = src.values().iter().zip(dst.values()).map(|(a, b)| a + b).collect();
    let vectors = vs
        .iter()
        .map(|v| {
            let k = l2_inner(v.values(), dst.values())? / (1.0 + c);
            let out = v.values().iter().zip(&sum).map(|(x, s)| x - s * k).collect();
            Ok(TangentVector::new_unchecked(Arc::clone(dst), out))
        })
        .collect::<Result<_>>()?;
    Ok(TransportResult {
        vectors,
        steps: 1,
        path_length,
    })
}

/// Transport by walking `q_τ = exp_src(τ w / k)`, `τ = 1..k`, where
/// `w = log_src(dst)`. At each point the vectors are projected onto the
/// tangent space and rescaled per `rescale`.
pub fn transport_stepwise(
    src: &Arc<Srvf>,
    dst: &Arc<Srvf>,
    vs: &[TangentVector],
    k: usize,
    rescale: Rescale,
) -> Result<TransportResult> {
    if k < 2 {
        return Err(Error::BadSpec(format!("stepwise transport needs k >= 2, got {k}")));
    }
    check_inputs(src, dst, vs)?;
    let w = log_map(src, dst)?;
    let path_length = w.norm();
    if path_length < MIN_PATH_LENGTH {
        return Ok(TransportResult {
            vectors: vs
                .iter()
                .map(|v| TangentVector::new_unchecked(Arc::clone(dst), v.values().to_vec()))
                .collect(),
            steps: 0,
            path_length,
        });
    }
    let targets: Vec<f64> = match rescale {
        Rescale::Original => vs.iter().map(TangentVector::norm).collect(),
        Rescale::PathLength => vec![path_length; vs.len()],
    };
    let mut current: Vec<Vec<Vec3>> = vs.iter().map(|v| v.values().to_vec()).collect();
    for tau in 1..=k {
        let q_tau = if tau == k {
            dst.as_ref().clone()
        } else {
            let f = tau as f64 / k as f64;
            let step: Vec<Vec3> = w.values().iter().map(|x| x * f).collect();
            exp_values(src, &step)?
        };
        for (v, &target) in current.iter_mut().zip(&targets) {
            let c = l2_inner(v, q_tau.values())?;
            for (x, q) in v.iter_mut().zip(q_tau.values()) {
                *x -= q * c;
            }
            let norm = l2_inner(v, v)?.sqrt();
            if norm > 0.0 {
                let s = target / norm;
                for x in v.iter_mut() {
                    *x *= s;
                }
            }
        }
    }
    Ok(TransportResult {
        vectors: current
            .into_iter()
            .map(|v| TangentVector::new_unchecked(Arc::clone(dst), v))
            .collect(),
        steps: k,
        path_length,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{sup_distance, to_srvf, uniform_grid, Fiber};
    use crate::tangent::{make_basis, BasisMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn srvf(rng: &mut ChaCha8Rng, wobble: f64) -> Arc<Srvf> {
        let c: [f64; 4] = rng.gen();
        let pts = uniform_grid(100)
            .into_iter()
            .map(|t| {
                Vec3::new(
                    t,
                    0.3 * (3.0 * t).sin() + wobble * c[0] * (5.0 * t + c[1]).sin(),
                    0.2 * t * t + wobble * c[2] * (4.0 * t + c[3]).cos(),
                )
            })
            .collect();
        Arc::new(to_srvf(&Fiber::new(pts).unwrap()).unwrap())
    }

    fn vectors(rng: &mut ChaCha8Rng, base: &Arc<Srvf>, count: usize) -> Vec<TangentVector> {
        let basis = make_basis(Arc::clone(base), 12, BasisMode::Orthonormal).unwrap();
        (0..count)
            .map(|_| {
                let mut v = vec![Vec3::zeros(); base.len()];
                for e in basis.elements() {
                    let c: f64 = rng.gen_range(-0.2..0.2);
                    for (x, y) in v.iter_mut().zip(e.values()) {
                        *x += y * c;
                    }
                }
                TangentVector::new(Arc::clone(base), v).unwrap()
            })
            .collect()
    }

    // Oracle: split v into its part along the geodesic direction u and the
    // rest. The rest is unchanged; the u part becomes the geodesic velocity
    // at the end point, -sin(α) src + cos(α) u.
    fn rotate_in_plane(src: &Srvf, dst: &Srvf, v: &[Vec3]) -> Vec<Vec3> {
        let c = l2_inner(src.values(), dst.values()).unwrap();
        let mut u: Vec<Vec3> = dst.values().iter().zip(src.values()).map(|(d, s)| d - s * c).collect();
        let un = l2_inner(&u, &u).unwrap().sqrt();
        u.iter_mut().for_each(|x| *x /= un);
        let alpha = un.atan2(c);
        let a = l2_inner(v, &u).unwrap();
        v.iter()
            .zip(&u)
            .zip(src.values())
            .map(|((x, ui), s)| x - ui * a + (ui * alpha.cos() - s * alpha.sin()) * a)
            .collect()
    }

    #[test]
    fn same_point_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = srvf(&mut rng, 0.2);
        let vs = vectors(&mut rng, &b, 4);
        for r in [
            transport_exact(&b, &b, &vs).unwrap(),
            transport_stepwise(&b, &b, &vs, 10, Rescale::Original).unwrap(),
        ] {
            for (a, v) in r.vectors.iter().zip(&vs) {
                assert!(sup_distance(a.values(), v.values()) < 1e-12);
            }
        }
    }

    #[test]
    fn exact_matches_in_plane_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let s = srvf(&mut rng, 0.3);
            let d = srvf(&mut rng, 0.3);
            let vs = vectors(&mut rng, &s, 3);
            let r = transport_exact(&s, &d, &vs).unwrap();
            for (out, v) in r.vectors.iter().zip(&vs) {
                let want = rotate_in_plane(&s, &d, v.values());
                assert!(sup_distance(out.values(), &want) < 1e-9);
                assert!(out.normal_component().abs() < 1e-12);
                assert!((out.norm() - v.norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn geodesic_velocity_transports_to_reversed_log() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = srvf(&mut rng, 0.4);
        let d = srvf(&mut rng, 0.4);
        let w = log_map(&s, &d).unwrap();
        let r = transport_exact(&s, &d, &[w]).unwrap();
        let back = log_map(&d, &s).unwrap();
        let want: Vec<Vec3> = back.values().iter().map(|x| -x).collect();
        assert!(sup_distance(r.vectors[0].values(), &want) < 1e-9);
    }

    #[test]
    fn round_trip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = srvf(&mut rng, 0.4);
        let d = srvf(&mut rng, 0.4);
        let vs = vectors(&mut rng, &s, 5);
        let there = transport_exact(&s, &d, &vs).unwrap();
        let back = transport_exact(&d, &s, &there.vectors).unwrap();
        for (a, v) in back.vectors.iter().zip(&vs) {
            assert!(sup_distance(a.values(), v.values()) < 1e-9);
        }
    }

    #[test]
    fn stepwise_preserves_norm_and_lands_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = srvf(&mut rng, 0.4);
        let d = srvf(&mut rng, 0.4);
        let vs = vectors(&mut rng, &s, 5);
        let r = transport_stepwise(&s, &d, &vs, 10, Rescale::Original).unwrap();
        for (a, v) in r.vectors.iter().zip(&vs) {
            assert!((a.norm() - v.norm()).abs() < 1e-9);
            assert!(a.normal_component().abs() < 1e-6);
        }
    }

    #[test]
    fn path_length_rescale_sets_every_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = srvf(&mut rng, 0.4);
        let d = srvf(&mut rng, 0.4);
        let vs = vectors(&mut rng, &s, 3);
        let r = transport_stepwise(&s, &d, &vs, 10, Rescale::PathLength).unwrap();
        for a in &r.vectors {
            assert!((a.norm() - r.path_length).abs() < 1e-9);
        }
    }

    #[test]
    fn stepwise_converges_first_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = srvf(&mut rng, 0.4);
        let d = srvf(&mut rng, 0.4);
        let vs = vectors(&mut rng, &s, 3);
        let exact = transport_exact(&s, &d, &vs).unwrap();
        let gap = |k| {
            let r = transport_stepwise(&s, &d, &vs, k, Rescale::Original).unwrap();
            r.vectors
                .iter()
                .zip(&exact.vectors)
                .map(|(a, b)| sup_distance(a.values(), b.values()))
                .fold(0.0, f64::max)
        };
        let ratio = gap(50) / gap(100);
        assert!((1.5..=2.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn too_few_steps_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = srvf(&mut rng, 0.4);
        assert!(transport_stepwise(&s, &s, &[], 1, Rescale::Original).is_err());
    }
}
