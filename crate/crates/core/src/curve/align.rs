use super::{apply_gamma, kabsch_rotation, optimal_gamma, refine_gamma, Diffeo, Rotation3, Srvf};
use crate::error::{Error, Result};

pub const DEFAULT_ALIGN_ITERS: usize = 3;

/// Stop alternating once a round improves the objective by less than this.
const MIN_IMPROVEMENT: f64 = 1e-8;

/// Result of aligning `q` to `q_ref` over rotations and reparameterizations.
#[derive(Debug, Clone, PartialEq)]
pub struct PairAlignment {
    /// `sqrt(γ') O q(γ)`.
    pub aligned: Srvf,
    pub rotation: Rotation3,
    pub gamma: Diffeo,
    /// `‖q_ref − aligned‖²` after each accepted round; entry 0 is the unaligned value.
    pub objective: Vec<f64>,
}

impl PairAlignment {
    pub fn distance(&self) -> f64 {
        self.objective.last().copied().unwrap_or(0.0).sqrt()
    }
}

/// Coordinate descent on `‖q_ref − sqrt(γ') O q(γ)‖²`: a Kabsch step for `O`
/// followed by a DP step for `γ` (polished by [`refine_gamma`]), for at most
/// `iters` rounds. A round that does
/// not lower the objective is discarded, so the recorded sequence never increases.
pub fn align_pair(q_ref: &Srvf, q: &Srvf, iters: usize) -> Result<PairAlignment> {
    if iters == 0 {
        return Err(Error::BadSpec("align_pair needs at least one round".into()));
    }
    if q_ref.len() != q.len() {
        return Err(Error::GridMismatch {
            left: q_ref.len(),
            right: q.len(),
        });
    }
    let n = q.len();
    let start = q_ref.distance(q)?.powi(2);
    let mut best = PairAlignment {
        aligned: q.clone(),
        rotation: Rotation3::identity(),
        gamma: Diffeo::identity(n),
        objective: vec![start],
    };
    let mut best_obj = start;
    for _ in 0..iters {
        let current = if best.objective.len() == 1 {
            q.clone()
        } else {
            apply_gamma(q, &best.gamma)?
        };
        let rotation = kabsch_rotation(q_ref, &current)?;
        let rotated = q.rotated(&rotation);
        let lattice = optimal_gamma(q_ref, &rotated)?;
        let gamma = refine_gamma(q_ref, &rotated, &lattice.gamma)?;
        let aligned = apply_gamma(&rotated, &gamma)?;
        let obj = q_ref.distance(&aligned)?.powi(2);
        if obj >= best_obj {
            break;
        }
        let gain = best_obj - obj;
        best.aligned = aligned;
        best.rotation = rotation;
        best.gamma = gamma;
        best.objective.push(obj);
        best_obj = obj;
        if gain < MIN_IMPROVEMENT {
            break;
        }
    }
    Ok(best)
}
