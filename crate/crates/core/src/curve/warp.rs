use serde::{Deserialize, Serialize};

use super::{derivative_scalar, grid_step, interpolate, l2_norm, uniform_grid, Srvf, Vec3};
use crate::error::{Error, Result};

/// A monotone reparameterization `γ: [0,1] → [0,1]` sampled on the uniform grid.
///
/// `γ(0) = 0`, `γ(1) = 1` and the samples never decrease. Flat stretches are
/// allowed and can be listed with [`Diffeo::flat_segments`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Diffeo {
    values: Vec<f64>,
}

impl Diffeo {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::TooFewPoints {
                min: 3,
                got: values.len(),
            });
        }
        let last = values.len() - 1;
        if values[0].abs() > 1e-12 {
            return Err(Error::NonMonotoneGamma {
                index: 0,
                reason: "γ(0) must be 0",
            });
        }
        if (values[last] - 1.0).abs() > 1e-12 {
            return Err(Error::NonMonotoneGamma {
                index: last,
                reason: "γ(1) must be 1",
            });
        }
        for j in 1..values.len() {
            if !values[j].is_finite() || values[j] < values[j - 1] {
                return Err(Error::NonMonotoneGamma {
                    index: j,
                    reason: "samples must be non-decreasing",
                });
            }
        }
        let mut values = values;
        values[0] = 0.0;
        values[last] = 1.0;
        Ok(Diffeo { values })
    }

    pub fn identity(samples: usize) -> Self {
        Diffeo {
            values: uniform_grid(samples),
        }
    }

    /// Sample a function of `t` on the grid.
    pub fn from_fn(samples: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(uniform_grid(samples).into_iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Piecewise-linear evaluation at `t` in `[0, 1]`.
    pub fn eval(&self, t: f64) -> f64 {
        interp_scalar(&self.values, t)
    }

    /// `self ∘ other`, i.e. `t ↦ self(other(t))`.
    pub fn compose(&self, other: &Diffeo) -> Result<Diffeo> {
        Diffeo::new(other.values.iter().map(|&s| self.eval(s)).collect())
    }

    /// Numerical inverse by monotone linear interpolation.
    pub fn inverse(&self) -> Result<Diffeo> {
        let grid = uniform_grid(self.values.len());
        let mut out = Vec::with_capacity(grid.len());
        let mut seg = 0;
        for &y in &grid {
            while seg + 2 < self.values.len() && self.values[seg + 1] < y {
                seg += 1;
            }
            let (y0, y1) = (self.values[seg], self.values[seg + 1]);
            let frac = if y1 > y0 { ((y - y0) / (y1 - y0)).clamp(0.0, 1.0) } else { 0.0 };
            out.push(grid[seg] + frac * (grid[seg + 1] - grid[seg]));
        }
        Diffeo::new(out)
    }

    /// `∫ (γ(t) - t)² dt`, a measure of how far the warp is from the identity.
    pub fn deviation_from_identity(&self) -> f64 {
        let n = self.values.len();
        let h = grid_step(n);
        let sq: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(j, g)| (g - j as f64 * h).powi(2))
            .collect();
        h * (0.5 * (sq[0] + sq[n - 1]) + sq[1..n - 1].iter().sum::<f64>())
    }

    /// Maximal runs `[start, end]` of equal consecutive samples.
    pub fn flat_segments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut j = 0;
        while j + 1 < self.values.len() {
            if self.values[j + 1] == self.values[j] {
                let start = j;
                while j + 1 < self.values.len() && self.values[j + 1] == self.values[start] {
                    j += 1;
                }
                out.push((start, j));
            } else {
                j += 1;
            }
        }
        out
    }

    /// Finite-difference slope, clamped at zero.
    pub fn derivative(&self) -> Vec<f64> {
        derivative_scalar(&self.values)
            .into_iter()
            .map(|d| d.max(0.0))
            .collect()
    }
}

impl TryFrom<Vec<f64>> for Diffeo {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Diffeo::new(v)
    }
}

impl From<Diffeo> for Vec<f64> {
    fn from(d: Diffeo) -> Self {
        d.values
    }
}

pub(crate) fn interp_scalar(values: &[f64], t: f64) -> f64 {
    let last = values.len() - 1;
    let x = t * last as f64;
    if x <= 0.0 {
        return values[0];
    }
    if x >= last as f64 {
        return values[last];
    }
    let i = x.floor() as usize;
    let frac = x - i as f64;
    values[i] * (1.0 - frac) + values[i + 1] * frac
}

/// Group action on an arbitrary field: `(γ·v)(t) = sqrt(γ'(t)) v(γ(t))`.
/// No renormalization; used for tangent vectors as well as SRVFs.
pub fn warp_field(values: &[Vec3], gamma: &Diffeo) -> Result<Vec<Vec3>> {
    if values.len() != gamma.len() {
        return Err(Error::GridMismatch {
            left: values.len(),
            right: gamma.len(),
        });
    }
    let slope = gamma.derivative();
    Ok(gamma
        .values
        .iter()
        .zip(slope)
        .map(|(&s, d)| interpolate(values, s) * d.sqrt())
        .collect())
}

/// `sqrt(γ') · (q ∘ γ)`, renormalized to unit norm. In the continuum the action
/// is an isometry; renormalizing only removes discretization drift.
pub fn apply_gamma(q: &Srvf, gamma: &Diffeo) -> Result<Srvf> {
    let warped = warp_field(q.values(), gamma)?;
    if !(l2_norm(&warped) > 0.0) {
        return Err(Error::NonMonotoneGamma {
            index: 0,
            reason: "warp collapses the curve",
        });
    }
    Srvf::from_values(warped)
}
