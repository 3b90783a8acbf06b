//! Seeded synthetic bundles.
//!
//! Every fiber is the backbone, pushed sideways by a smooth normal offset,
//! turned by a small rotation about its own centroid and sampled at a warped
//! parameter `γ(t) = t + a₁ sin(πt)/π + a₂ sin(2πt)/(2π)`. Bundle-wide bend,
//! rotation and translation are applied last. Optional FA-like profiles are a
//! bump in the backbone parameter, so the per-fiber warp shows up as a shift
//! along the profile.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::bundle::{Bundle, Provenance};
use crate::curve::{Fiber, Rotation3, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backbone {
    #[default]
    Arc,
    Helix,
    CShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub name: String,
    pub backbone: Backbone,
    pub fibers: usize,
    pub samples: usize,
    /// Backbone length.
    pub length: f64,
    /// Scale of the smooth normal offset of each fiber.
    pub displacement: f64,
    /// Largest per-fiber rotation angle, radians.
    pub rotation: f64,
    /// Largest `|a₁| + |a₂|` of the per-fiber warp; below 1.
    pub warp: f64,
    /// Bundle rotation angle about a random axis, radians.
    pub global_rotation: f64,
    /// Length of the bundle translation, in a random direction.
    pub global_translation: f64,
    /// Bundle-wide quadratic bend, as a fraction of the length.
    pub bend: f64,
    pub profiles: bool,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            name: "synthetic".into(),
            backbone: Backbone::Arc,
            fibers: 50,
            samples: 100,
            length: 80.0,
            displacement: 2.0,
            rotation: 0.05,
            warp: 0.3,
            global_rotation: 0.0,
            global_translation: 0.0,
            bend: 0.0,
            profiles: false,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadSpec(m.into()));
        if self.fibers == 0 {
            return bad("fibers must be at least 1");
        }
        if self.samples < 3 {
            return bad("samples must be at least 3");
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return bad("length must be positive");
        }
        let mags = [
            self.displacement,
            self.rotation,
            self.warp,
            self.global_rotation,
            self.global_translation,
            self.bend,
        ];
        if mags.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return bad("perturbation magnitudes must be finite and non-negative");
        }
        if self.warp >= 1.0 {
            return bad("warp must be below 1");
        }
        Ok(())
    }
}

/// Backbone point at parameter `s ∈ [0, 1]`.
fn backbone(kind: Backbone, length: f64, s: f64) -> Vec3 {
    match kind {
        Backbone::Arc => {
            let theta = 2.0 * PI / 3.0;
            let r = length / theta;
            Vec3::new(r * (theta * s).sin(), r * (1.0 - (theta * s).cos()), 0.0)
        }
        Backbone::Helix => {
            // One turn; the radius and rise are chosen so the length is `length`.
            let r = length / 8.0;
            let rise = (length * length - (2.0 * PI * r).powi(2)).sqrt();
            let a = 2.0 * PI * s;
            Vec3::new(r * a.cos(), r * a.sin(), rise * s)
        }
        Backbone::CShape => {
            let theta = 1.4 * PI;
            let r = length / theta;
            let a = theta * s - 0.7 * PI;
            Vec3::new(r * a.cos(), r * a.sin(), 0.15 * length * (PI * s).sin())
        }
    }
}

fn tangent(kind: Backbone, length: f64, s: f64) -> Vec3 {
    let h = 1e-6;
    let (a, b) = ((s - h).max(0.0), (s + h).min(1.0));
    (backbone(kind, length, b) - backbone(kind, length, a)).normalize()
}

/// Per-fiber warp coefficients `(a₁, a₂)` with `|a₁| + |a₂| ≤ warp`.
pub fn warp_fn(a1: f64, a2: f64) -> impl Fn(f64) -> f64 {
    move |t| t + a1 * (PI * t).sin() / PI + a2 * (2.0 * PI * t).sin() / (2.0 * PI)
}

/// Bump profile in the backbone parameter.
pub fn bump_profile(s: f64) -> f64 {
    0.35 + 0.25 * (-(s - 0.5).powi(2) / (2.0 * 0.1f64.powi(2))).exp()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_vec(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(gaussian(rng), gaussian(rng), gaussian(rng))
}

fn random_axis(rng: &mut ChaCha8Rng) -> Vec3 {
    let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
    Vec3::new(x, y, z)
}

/// Generate a bundle; identical `(spec, seed)` give identical output.
pub fn synth_bundle(spec: &SynthSpec, seed: u64) -> Result<Bundle> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.samples;
    let grid: Vec<f64> = (0..n).map(|j| j as f64 / (n - 1) as f64).collect();

    // Bundle-wide draws come first so they do not depend on the fiber count.
    let global_axis = random_axis(&mut rng);
    let global_dir = random_axis(&mut rng);
    let bend_dir = random_axis(&mut rng);
    let global = Rotation3::from_axis_angle(&global_axis, spec.global_rotation);
    let shift = global_dir * spec.global_translation;

    let mut fibers = Vec::with_capacity(spec.fibers);
    let mut profiles = Vec::with_capacity(spec.fibers);
    for _ in 0..spec.fibers {
        let c: [Vec3; 3] = [random_vec(&mut rng), random_vec(&mut rng), random_vec(&mut rng)];
        let axis = random_axis(&mut rng);
        let angle = spec.rotation * rng.gen_range(-1.0..=1.0);
        let (u1, u2): (f64, f64) = (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
        let total = u1.abs() + u2.abs();
        let scale = if total > 1.0 { spec.warp / total } else { spec.warp };
        let gamma = warp_fn(u1 * scale, u2 * scale);

        let rot = Rotation3::from_axis_angle(&axis, angle);
        let mut raw = Vec::with_capacity(n);
        let mut prof = Vec::with_capacity(n);
        for &t in &grid {
            let s = gamma(t).clamp(0.0, 1.0);
            let tan = tangent(spec.backbone, spec.length, s);
            let off = c[0] + c[1] * (PI * s).sin() + c[2] * (0.5 * (2.0 * PI * s).sin());
            let off = (off - tan * tan.dot(&off)) * (spec.displacement / 3f64.sqrt());
            raw.push(backbone(spec.backbone, spec.length, s) + off);
            prof.push(bump_profile(s));
        }
        let centroid = raw.iter().sum::<Vec3>() / n as f64;
        let pts: Vec<Vec3> = grid
            .iter()
            .zip(raw)
            .map(|(&t, p)| {
                let bent = rot.apply(&(p - centroid)) + centroid + bend_dir * (spec.bend * spec.length * t * t);
                global.apply(&bent) + shift
            })
            .collect();
        fibers.push(Fiber::new(pts)?);
        profiles.push(prof);
    }
    let mut bundle = Bundle::new(spec.name.clone(), fibers)?;
    if spec.profiles {
        bundle = bundle.with_profiles(profiles)?;
    }
    bundle.provenance = Provenance {
        source: Some(format!("synth:{seed}")),
        samples: Some(n),
        original_count: spec.fibers,
        ..Provenance::default()
    };
    Ok(bundle)
}
