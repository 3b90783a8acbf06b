//! Smooth refinement of a lattice warp.
//!
//! The lattice only offers a handful of slopes, so a DP warp follows a smooth
//! `γ` by alternating slopes and `sqrt(γ')` oscillates around the right value.
//! This fits `γ(t) = t + Σ a_k sin(kπt) / (kπ)` to the DP solution and then
//! lowers `‖q_ref − sqrt(γ') q(γ)‖²` over the coefficients with damped
//! Gauss–Newton steps. The input warp is returned unchanged if nothing better
//! is found.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{derivative, interpolate, l2_inner, trapezoid_weights, uniform_grid, warp_field, Diffeo, Srvf, Vec3};
use crate::error::Result;

/// Number of sine modes in the smooth warp.
pub const REFINE_MODES: usize = 16;
const REFINE_ITERS: usize = 30;
const MIN_SLOPE: f64 = 1e-3;

fn objective(q_ref: &Srvf, q: &Srvf, gamma: &Diffeo) -> Result<f64> {
    let warped = warp_field(q.values(), gamma)?;
    let diff: Vec<Vec3> = q_ref.values().iter().zip(&warped).map(|(a, b)| a - b).collect();
    l2_inner(&diff, &diff)
}

struct Modes {
    grid: Vec<f64>,
    // sin(kπt)/(kπ) and its derivative cos(kπt), per mode.
    value: Vec<Vec<f64>>,
    slope: Vec<Vec<f64>>,
}

impl Modes {
    fn new(n: usize) -> Self {
        let grid = uniform_grid(n);
        let value = (1..=REFINE_MODES)
            .map(|k| {
                let w = k as f64 * PI;
                grid.iter().map(|t| (w * t).sin() / w).collect()
            })
            .collect();
        let slope = (1..=REFINE_MODES)
            .map(|k| grid.iter().map(|t| (k as f64 * PI * t).cos()).collect())
            .collect();
        Modes { grid, value, slope }
    }

    fn eval(&self, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.len();
        let mut g = self.grid.clone();
        let mut dg = vec![1.0; n];
        for (k, &ak) in a.iter().enumerate() {
            for j in 0..n {
                g[j] += ak * self.value[k][j];
                dg[j] += ak * self.slope[k][j];
            }
        }
        (g, dg)
    }

    fn diffeo(&self, a: &[f64]) -> Option<Diffeo> {
        let (mut g, dg) = self.eval(a);
        if dg.iter().any(|&d| d < 0.0) {
            return None;
        }
        let last = g.len() - 1;
        g[0] = 0.0;
        g[last] = 1.0;
        Diffeo::new(g).ok()
    }

    // Weighted least-squares fit of `gamma − t` by the modes.
    fn fit(&self, gamma: &Diffeo) -> Vec<f64> {
        let n = self.grid.len();
        let w = trapezoid_weights(n);
        let mut ata = DMatrix::<f64>::zeros(REFINE_MODES, REFINE_MODES);
        let mut atb = DVector::<f64>::zeros(REFINE_MODES);
        for j in 0..n {
            let r = gamma.values()[j] - self.grid[j];
            for k in 0..REFINE_MODES {
                atb[k] += w[j] * self.value[k][j] * r;
                for l in 0..REFINE_MODES {
                    ata[(k, l)] += w[j] * self.value[k][j] * self.value[l][j];
                }
            }
        }
        ata.cholesky()
            .map(|c| c.solve(&atb).iter().copied().collect())
            .unwrap_or_else(|| vec![0.0; REFINE_MODES])
    }
}

/// Lower `‖q_ref − sqrt(γ') q(γ)‖²` starting from `gamma`. Never returns a warp
/// with a larger objective than the input.
pub fn refine_gamma(q_ref: &Srvf, q: &Srvf, gamma: &Diffeo) -> Result<Diffeo> {
    let n = q.len();
    let start = objective(q_ref, q, gamma)?;
    if start == 0.0 || n < 3 {
        return Ok(gamma.clone());
    }
    let modes = Modes::new(n);
    let weights = trapezoid_weights(n);
    let dq = derivative(q.values());

    let mut a = modes.fit(gamma);
    let mut scale = 1.0;
    let mut current = loop {
        let scaled: Vec<f64> = a.iter().map(|v| v * scale).collect();
        if let Some(d) = modes.diffeo(&scaled) {
            a = scaled;
            break d;
        }
        scale *= 0.5;
    };
    let mut energy = objective(q_ref, q, &current)?;
    let mut damping = 1e-6;

    for _ in 0..REFINE_ITERS {
        let (g, dg) = modes.eval(&a);
        // Residual r = q_ref − sqrt(γ') q(γ) and its Jacobian in each coefficient.
        let mut jt_j = DMatrix::<f64>::zeros(REFINE_MODES, REFINE_MODES);
        let mut jt_r = DVector::<f64>::zeros(REFINE_MODES);
        let mut cols = vec![Vec3::zeros(); REFINE_MODES];
        for j in 0..n {
            let s = dg[j].max(MIN_SLOPE).sqrt();
            let qg = interpolate(q.values(), g[j].clamp(0.0, 1.0));
            let dqg = interpolate(&dq, g[j].clamp(0.0, 1.0));
            let r = q_ref.values()[j] - qg * s;
            for k in 0..REFINE_MODES {
                cols[k] = dqg * (s * modes.value[k][j]) + qg * (modes.slope[k][j] / (2.0 * s));
            }
            for k in 0..REFINE_MODES {
                jt_r[k] += weights[j] * cols[k].dot(&r);
                for l in k..REFINE_MODES {
                    jt_j[(k, l)] += weights[j] * cols[k].dot(&cols[l]);
                }
            }
        }
        for k in 0..REFINE_MODES {
            for l in 0..k {
                jt_j[(k, l)] = jt_j[(l, k)];
            }
        }

        let mut improved = None;
        for _ in 0..12 {
            let mut lhs = jt_j.clone();
            for k in 0..REFINE_MODES {
                lhs[(k, k)] += damping * (1.0 + jt_j[(k, k)]);
            }
            let Some(chol) = lhs.cholesky() else {
                damping *= 10.0;
                continue;
            };
            let step = chol.solve(&jt_r);
            let trial: Vec<f64> = a.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            if let Some(d) = modes.diffeo(&trial) {
                let e = objective(q_ref, q, &d)?;
                if e < energy {
                    improved = Some((trial, d, e));
                    damping = (damping * 0.3).max(1e-12);
                    break;
                }
            }
            damping *= 10.0;
        }
        let Some((trial, d, e)) = improved else { break };
        let gain = energy - e;
        a = trial;
        current = d;
        energy = e;
        if gain <= 1e-10 * energy {
            break;
        }
    }

    Ok(if energy < start { current } else { gamma.clone() })
}
