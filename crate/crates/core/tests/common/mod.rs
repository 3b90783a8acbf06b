#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tractalign::curve::{to_srvf, Vec3};
use tractalign::{Diffeo, Fiber, Rotation3, Srvf};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller; keeps the helpers free of extra distributions.
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(gaussian(rng), gaussian(rng), gaussian(rng))
}

/// Smooth curve: a straight drift plus three random Fourier modes.
pub fn random_fiber(rng: &mut ChaCha8Rng, n: usize) -> Fiber {
    let drift = gaussian_vec(rng).normalize() * rng.gen_range(1.0..3.0);
    let modes: Vec<(Vec3, Vec3)> = (0..3).map(|_| (gaussian_vec(rng) * 0.3, gaussian_vec(rng) * 0.3)).collect();
    let offset = gaussian_vec(rng) * 5.0;
    let pts = (0..n)
        .map(|j| {
            let t = j as f64 / (n - 1) as f64;
            let mut p = offset + drift * t;
            for (m, (a, b)) in modes.iter().enumerate() {
                let w = (m + 1) as f64 * PI;
                p += a * (w * t).sin() + b * ((w * t).cos() - 1.0);
            }
            p
        })
        .collect();
    Fiber::new(pts).unwrap()
}

pub fn random_srvf(rng: &mut ChaCha8Rng, n: usize) -> Srvf {
    to_srvf(&random_fiber(rng, n)).unwrap()
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation3 {
    Rotation3::from_axis_angle(&gaussian_vec(rng), rng.gen_range(-PI..PI))
}

/// `t + a₁ sin(πt)/π + a₂ sin(2πt)/(2π)` with `|a₁| + |a₂| ≤ bound < 1`.
pub fn random_warp(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Diffeo {
    let a1 = rng.gen_range(-bound..bound);
    let rest = bound - a1.abs();
    let a2 = if rest > 0.0 { rng.gen_range(-rest..rest) } else { 0.0 };
    Diffeo::from_fn(n, |t| t + a1 * (PI * t).sin() / PI + a2 * (2.0 * PI * t).sin() / (2.0 * PI)).unwrap()
}

/// Haar-random element of SO(n): QR of a Gaussian matrix with the signs of
/// `R`'s diagonal moved into `Q`, then one column flipped if needed.
pub fn random_so_n(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| gaussian(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}
