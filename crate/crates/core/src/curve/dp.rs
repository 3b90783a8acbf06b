//! Optimal reparameterization by dynamic programming on a monotone lattice.
//!
//! Lattice node `(i, j)` means `γ(t_i) = t_j`. A path moves from `(k, l)` to
//! `(i, j)` with steps drawn from [`LATTICE_STEPS`], so every segment of `γ`
//! has a slope in `[1/3, 3]`. Between nodes `γ` is linear.

use super::{grid_step, interpolate_index, Diffeo, Srvf, Vec3};
use crate::error::{Error, Result};

/// Coprime `(Δi, Δj)` steps with both components at most 3.
pub const LATTICE_STEPS: [(usize, usize); 7] = [(1, 1), (1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2)];

#[derive(Debug, Clone, PartialEq)]
pub struct WarpSolution {
    pub gamma: Diffeo,
    /// `sqrt` of the lattice objective.
    pub distance: f64,
    /// Lattice objective `∫ |q_ref − sqrt(γ') q(γ)|²` summed over path segments.
    pub cost: f64,
    pub path: Vec<(usize, usize)>,
}

/// Trapezoid approximation of `∫ |q_ref(t) − sqrt(γ') q(γ(t))|² dt` over the
/// reference interval `[t_k, t_i]` for the linear segment `(k, l) → (i, j)`.
pub fn segment_cost(q_ref: &[Vec3], q: &[Vec3], from: (usize, usize), to: (usize, usize)) -> f64 {
    let (k, l) = from;
    let (i, j) = to;
    let di = (i - k) as f64;
    let dj = (j - l) as f64;
    let root = (dj / di).sqrt();
    let mut acc = 0.5 * (q_ref[k] - q[l] * root).norm_squared() + 0.5 * (q_ref[i] - q[j] * root).norm_squared();
    for r in k + 1..i {
        let x = l as f64 + dj * (r - k) as f64 / di;
        acc += (q_ref[r] - interpolate_index(q, x) * root).norm_squared();
    }
    acc * grid_step(q_ref.len())
}

/// Warp `γ` minimizing `‖q_ref − sqrt(γ') q(γ)‖` over the lattice.
pub fn optimal_gamma(q_ref: &Srvf, q: &Srvf) -> Result<WarpSolution> {
    let n = q_ref.len();
    if n != q.len() {
        return Err(Error::GridMismatch { left: n, right: q.len() });
    }
    let (a, b) = (q_ref.values(), q.values());
    let idx = |i: usize, j: usize| i * n + j;
    let mut cost = vec![f64::INFINITY; n * n];
    let mut pred = vec![usize::MAX; n * n];
    cost[0] = 0.0;
    for i in 1..n {
        for j in 1..n {
            let mut best = f64::INFINITY;
            let mut from = usize::MAX;
            for &(di, dj) in &LATTICE_STEPS {
                if di > i || dj > j {
                    continue;
                }
                let (k, l) = (i - di, j - dj);
                let base = cost[idx(k, l)];
                if !base.is_finite() {
                    continue;
                }
                let c = base + segment_cost(a, b, (k, l), (i, j));
                if c < best {
                    best = c;
                    from = idx(k, l);
                }
            }
            cost[idx(i, j)] = best;
            pred[idx(i, j)] = from;
        }
    }

    let end = idx(n - 1, n - 1);
    let total = cost[end];
    let mut path = vec![(n - 1, n - 1)];
    let mut cur = end;
    while cur != 0 {
        cur = pred[cur];
        path.push((cur / n, cur % n));
    }
    path.reverse();

    let scale = 1.0 / (n - 1) as f64;
    let mut values = vec![0.0; n];
    for w in path.windows(2) {
        let ((k, l), (i, j)) = (w[0], w[1]);
        let (di, dj) = ((i - k) as f64, (j - l) as f64);
        for (r, slot) in values.iter_mut().enumerate().take(i + 1).skip(k) {
            *slot = (l as f64 + dj * (r - k) as f64 / di) * scale;
        }
    }
    Ok(WarpSolution {
        gamma: Diffeo::new(values)?,
        distance: total.max(0.0).sqrt(),
        cost: total,
        path,
    })
}
