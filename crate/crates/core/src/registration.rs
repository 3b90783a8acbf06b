//! Bundle-to-bundle distance and alignment.
//!
//! A bundle is coded as its Kärcher mean plus the coefficient rows of its
//! members' tangent vectors. Two codes are compared by
//!
//! 1. aligning the subject mean onto the template mean (rotation and warp),
//! 2. carrying the subject's tangent vectors along with that alignment,
//!    transporting them to the template mean and re-encoding them in the
//!    template basis,
//! 3. finding the rotation in SO(N) that best maps the subject rows onto the
//!    template rows.
//!
//! The distance is `sqrt(mean_term² + coefficient_term²)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bundle::Bundle;
use crate::curve::{
    align_pair, from_srvf, l2_inner, rigid_fit, to_srvf, warp_field, Diffeo, Fiber, RigidTransform, Rotation3, Srvf,
    Vec3, DEFAULT_ALIGN_ITERS,
};
use crate::error::{Error, Result};
use crate::mean::{karcher_mean, MeanOptions, MeanResult};
use crate::tangent::{
    decode, default_basis_size, encode, exp_map, log_map, make_basis, Basis, BasisMode, CoeffMatrix, TangentVector,
};
use crate::transport::TransportMode;

/// Singular values below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-10;

/// A proper rotation of `R^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationN(DMatrix<f64>);

impl RotationN {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotARotation(format!("{}x{} is not square", m.nrows(), m.ncols())));
        }
        let n = m.nrows();
        let ortho = (&m * m.transpose() - DMatrix::identity(n, n)).norm();
        let det = m.determinant();
        if ortho > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(Error::NotARotation(format!("|RRᵀ - I| = {ortho:e}, det = {det}")));
        }
        Ok(RotationN(m))
    }

    pub fn identity(n: usize) -> Self {
        RotationN(DMatrix::identity(n, n))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `self · a`, mixing rows.
    pub fn apply(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        &self.0 * a
    }
}

/// Rotation `𝒪 ∈ SO(N)` minimizing `‖A2 − 𝒪 A1‖_F`.
///
/// With `A1 A2ᵀ = R Σ Qᵀ` the minimizer is `Q Rᵀ`. When `A1 A2ᵀ` is rank
/// deficient the rotation on the null space is free; the one closest to the
/// identity is returned. If the result would be a reflection, an axis of the
/// null space (or, without one, the axis of the smallest singular value) is
/// flipped.
pub fn procrustes_rotation(a1: &CoeffMatrix, a2: &CoeffMatrix) -> Result<RotationN> {
    procrustes_matrices(&a1.entries, &a2.entries)
}

pub fn procrustes_matrices(a1: &DMatrix<f64>, a2: &DMatrix<f64>) -> Result<RotationN> {
    if a1.shape() != a2.shape() {
        return Err(Error::ShapeMismatch {
            left: a1.shape(),
            right: a2.shape(),
        });
    }
    let n = a1.nrows();
    if n == 0 {
        return Err(Error::EmptyBundle);
    }
    let m = a1 * a2.transpose();
    let svd = m.svd(true, true);
    let r = svd.u.expect("svd u");
    let q = svd.v_t.expect("svd v_t").transpose();
    let sigma = svd.singular_values;
    let smax = sigma.max();
    let (live, null): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| smax > 0.0 && sigma[i] > RANK_TOL * smax);

    let pick = |cols: &[usize], m: &DMatrix<f64>| DMatrix::from_fn(n, cols.len(), |i, j| m[(i, cols[j])]);
    let (r1, q1) = (pick(&live, &r), pick(&live, &q));
    let mut o = &q1 * r1.transpose();
    if null.is_empty() {
        if o.determinant() < 0.0 {
            let smallest = (0..n).min_by(|&a, &b| sigma[a].total_cmp(&sigma[b])).unwrap();
            let (rs, qs) = (r.column(smallest), q.column(smallest));
            o -= 2.0 * qs * rs.transpose();
        }
    } else {
        let (r0, q0) = (pick(&null, &r), pick(&null, &q));
        // Block map W: span(R0) -> span(Q0) maximizing tr(Q0 W R0ᵀ).
        let c = r0.transpose() * &q0;
        let csvd = c.svd(true, true);
        let cu = csvd.u.expect("svd u");
        let cv = csvd.v_t.expect("svd v_t").transpose();
        let mut flip = DVector::from_element(null.len(), 1.0);
        let mut w = &cv * cu.transpose();
        if (&o + &q0 * &w * r0.transpose()).determinant() < 0.0 {
            let smallest = (0..null.len())
                .min_by(|&a, &b| csvd.singular_values[a].total_cmp(&csvd.singular_values[b]))
                .unwrap();
            flip[smallest] = -1.0;
            w = &cv * DMatrix::from_diagonal(&flip) * cu.transpose();
        }
        o += &q0 * w * r0.transpose();
    }
    RotationN::new(o)
}

/// Where a coded fiber sits in space: `from_srvf(Oᵀ q, origin, scale)`
/// reproduces it from its aligned SRVF `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub origin: [f64; 3],
    pub scale: f64,
    pub rotation: Rotation3,
}

/// A bundle summarised as its mean SRVF and coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleCode {
    pub beta_mu: Arc<Srvf>,
    pub a: CoeffMatrix,
    pub basis: Basis,
    pub fiber_ids: Vec<usize>,
    /// One per fiber; empty if the code was built from SRVFs alone.
    pub placements: Vec<Placement>,
    /// Warp of each member onto the mean.
    pub gammas: Vec<Diffeo>,
}

impl BundleCode {
    pub fn len(&self) -> usize {
        self.a.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.a.rows() == 0
    }

    /// Aligned member SRVFs as seen through the basis.
    pub fn reconstruct_srvfs(&self) -> Result<Vec<Srvf>> {
        decode(&self.a, &self.basis)?
            .iter()
            .map(|v| exp_map(&self.beta_mu, v))
            .collect()
    }

    /// Fibers rebuilt from coefficient rows using this code's placements.
    pub fn reconstruct_rows(&self, rows: &DMatrix<f64>) -> Result<Vec<Fiber>> {
        if self.placements.len() != rows.nrows() {
            return Err(Error::FiberCountMismatch {
                expected: self.placements.len(),
                found: rows.nrows(),
            });
        }
        let a = CoeffMatrix::new(rows.clone(), self.basis.id());
        decode(&a, &self.basis)?
            .iter()
            .zip(&self.placements)
            .map(|(v, p)| place(&exp_map(&self.beta_mu, v)?, p))
            .collect()
    }
}

fn place(q: &Srvf, p: &Placement) -> Result<Fiber> {
    from_srvf(&q.rotated(&p.rotation.transpose()), Vec3::from(p.origin), p.scale)
}

/// Code a set of member SRVFs from their Kärcher mean.
pub fn encode_bundle(mean: &MeanResult, basis_size: usize, mode: BasisMode) -> Result<BundleCode> {
    let basis = make_basis(Arc::clone(&mean.beta_mu), basis_size, mode)?;
    let vs = mean
        .aligned
        .iter()
        .map(|q| log_map(&mean.beta_mu, q))
        .collect::<Result<Vec<_>>>()?;
    let a = encode(&vs, &basis)?;
    Ok(BundleCode {
        beta_mu: Arc::clone(&mean.beta_mu),
        a,
        basis,
        fiber_ids: (0..mean.len()).collect(),
        placements: Vec::new(),
        gammas: mean.gammas.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeOptions {
    /// Basis size; `None` means `min(N, 20)`.
    pub basis_size: Option<usize>,
    pub basis_mode: BasisMode,
    pub mean: MeanOptions,
}

impl Default for CodeOptions {
    fn default() -> Self {
        CodeOptions {
            basis_size: None,
            basis_mode: BasisMode::Orthonormal,
            mean: MeanOptions::default(),
        }
    }
}

/// Mean and code of a bundle whose fibers share one sample count.
pub fn code_bundle(bundle: &Bundle, opts: &CodeOptions) -> Result<(BundleCode, MeanResult)> {
    if bundle.is_empty() {
        return Err(Error::EmptyBundle);
    }
    let qs = bundle.srvfs()?;
    let mean = karcher_mean(&qs, &opts.mean)?;
    let k = opts.basis_size.unwrap_or_else(|| default_basis_size(bundle.len()));
    let mut code = encode_bundle(&mean, k, opts.basis_mode)?;
    code.fiber_ids = bundle.ids.clone();
    code.placements = bundle
        .fibers
        .iter()
        .zip(&mean.rotations)
        .map(|(f, r)| {
            let o = f.points()[0];
            Placement {
                origin: [o.x, o.y, o.z],
                scale: f.srvf_scale(),
                rotation: *r,
            }
        })
        .collect();
    Ok((code, mean))
}

/// Output of [`bundle_distance`] and [`soft_align`].
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAlignment {
    pub distance: f64,
    /// `‖β_template − sqrt(γ') O β_subject(γ)‖`.
    pub mean_term: f64,
    /// `‖A_template − 𝒪 A_transported‖_F`.
    pub coefficient_term: f64,
    pub mean_gamma: Diffeo,
    pub mean_rotation: Rotation3,
    pub rotation: RotationN,
    /// Subject rows after transport into the template basis, before `𝒪`.
    pub transported_a: CoeffMatrix,
    /// Row of `𝒪 A_transported` that subject fiber `i` contributes to most.
    pub correspondence: Vec<usize>,
    /// Subject fibers rebuilt in the template frame (filled by [`soft_align`]).
    pub reconstructed: Vec<Fiber>,
}

impl SoftAlignment {
    /// `𝒪 A_transported`.
    pub fn rotated_rows(&self) -> DMatrix<f64> {
        self.rotation.apply(&self.transported_a.entries)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DistanceOptions {
    pub transport: TransportMode,
    pub align_iters: Option<usize>,
}

/// Distance between a subject and a template code, with its alignment.
pub fn bundle_distance(subject: &BundleCode, template: &BundleCode, opts: &DistanceOptions) -> Result<SoftAlignment> {
    if subject.len() != template.len() {
        return Err(Error::FiberCountMismatch {
            expected: template.len(),
            found: subject.len(),
        });
    }
    if subject.beta_mu.len() != template.beta_mu.len() {
        return Err(Error::GridMismatch {
            left: subject.beta_mu.len(),
            right: template.beta_mu.len(),
        });
    }
    let iters = opts.align_iters.unwrap_or(DEFAULT_ALIGN_ITERS);
    let pair = align_pair(&template.beta_mu, &subject.beta_mu, iters)?;
    let mean_term = pair.distance();
    let moved = Arc::new(pair.aligned.clone());

    // The subject's tangent vectors follow its mean through the same rotation
    // and warp, then are made exactly tangent at the moved mean.
    let vs = decode(&subject.a, &subject.basis)?;
    let carried = vs
        .iter()
        .map(|v| {
            let rotated: Vec<Vec3> = v.values().iter().map(|x| pair.rotation.apply(x)).collect();
            let mut w = warp_field(&rotated, &pair.gamma)?;
            let c = l2_inner(&w, moved.values())?;
            for (x, b) in w.iter_mut().zip(moved.values()) {
                *x -= b * c;
            }
            TangentVector::new(Arc::clone(&moved), w)
        })
        .collect::<Result<Vec<_>>>()?;
    let transported = opts.transport.run(&moved, &template.beta_mu, &carried)?;
    let mut transported_a = encode(&transported.vectors, &template.basis)?;
    transported_a.residuals.clear();

    let rotation = procrustes_rotation(&transported_a, &template.a)?;
    let rotated = rotation.apply(&transported_a.entries);
    let coefficient_term = (&template.a.entries - &rotated).norm();
    let correspondence = (0..subject.len())
        .map(|i| {
            let col = rotation.matrix().column(i);
            (0..col.len()).fold(0, |best, r| if col[r] > col[best] { r } else { best })
        })
        .collect();
    Ok(SoftAlignment {
        distance: mean_term.hypot(coefficient_term),
        mean_term,
        coefficient_term,
        mean_gamma: pair.gamma,
        mean_rotation: pair.rotation,
        rotation,
        transported_a,
        correspondence,
        reconstructed: Vec::new(),
    })
}

/// [`bundle_distance`] plus the subject rebuilt in the template frame: row `r`
/// of `𝒪 A_transported` is decoded at the template mean and placed like
/// template fiber `r`.
pub fn soft_align(subject: &BundleCode, template: &BundleCode, opts: &DistanceOptions) -> Result<SoftAlignment> {
    let mut soft = bundle_distance(subject, template, opts)?;
    if template.placements.is_empty() {
        return Err(Error::BadSpec("template code has no fiber placements".into()));
    }
    soft.reconstructed = template.reconstruct_rows(&soft.rotated_rows())?;
    Ok(soft)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardAlignment {
    /// Subject fibers warped onto their paired template fibers.
    pub warped_fibers: Vec<Fiber>,
    /// Template fiber paired with each subject fiber.
    pub pairings: Vec<usize>,
    pub per_pair_gammas: Vec<Diffeo>,
    pub per_pair_rotations: Vec<Rotation3>,
    /// Elastic distance of each pair before and after alignment.
    pub pre_distances: Vec<f64>,
    pub post_distances: Vec<f64>,
}

/// Index of the row of `rows` nearest to `x`; ties go to the lower index.
pub fn nearest_row(rows: &DMatrix<f64>, x: &DVector<f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for j in 0..rows.nrows() {
        let d = (rows.row(j).transpose() - x).norm_squared();
        if d < best.1 {
            best = (j, d);
        }
    }
    best.0
}

/// Pair each subject fiber with the template fiber whose coefficient row is
/// nearest to the subject's rotated row, then elastically align each pair.
/// Warped fibers keep the subject fiber's length and start at the paired
/// template fiber's first point.
pub fn hard_align(soft: &SoftAlignment, subject: &Bundle, template: &Bundle, template_code: &BundleCode) -> Result<HardAlignment> {
    if subject.len() != soft.correspondence.len() {
        return Err(Error::FiberCountMismatch {
            expected: soft.correspondence.len(),
            found: subject.len(),
        });
    }
    if template.len() != template_code.len() {
        return Err(Error::FiberCountMismatch {
            expected: template_code.len(),
            found: template.len(),
        });
    }
    let rows = soft.rotated_rows();
    let subject_q = subject.srvfs()?;
    let template_q = template.srvfs()?;
    let mut out = HardAlignment {
        warped_fibers: Vec::with_capacity(subject.len()),
        pairings: Vec::with_capacity(subject.len()),
        per_pair_gammas: Vec::with_capacity(subject.len()),
        per_pair_rotations: Vec::with_capacity(subject.len()),
        pre_distances: Vec::with_capacity(subject.len()),
        post_distances: Vec::with_capacity(subject.len()),
    };
    for (i, &row) in soft.correspondence.iter().enumerate() {
        let x = rows.row(row).transpose();
        let j = nearest_row(&template_code.a.entries, &x);
        let pair = align_pair(&template_q[j], &subject_q[i], DEFAULT_ALIGN_ITERS)?;
        let origin = template.fibers[j].points()[0];
        out.warped_fibers
            .push(from_srvf(&pair.aligned, origin, subject.fibers[i].srvf_scale())?);
        out.pairings.push(j);
        out.pre_distances.push(pair.objective[0].sqrt());
        out.post_distances.push(pair.distance());
        out.per_pair_gammas.push(pair.gamma);
        out.per_pair_rotations.push(pair.rotation);
    }
    Ok(out)
}

/// Rigid baseline: the motion taking the subject's pointwise mean curve onto
/// the template's (trying the subject reversed as well), applied to every
/// subject fiber. Reversed fibers come back reversed.
pub fn rigid_align(subject: &Bundle, template: &Bundle) -> Result<(Bundle, RigidTransform)> {
    let s = subject.mean_curve()?;
    let t = template.mean_curve()?;
    if s.len() != t.len() {
        return Err(Error::GridMismatch {
            left: s.len(),
            right: t.len(),
        });
    }
    let residual = |fit: &RigidTransform, src: &[Vec3]| -> f64 {
        src.iter().zip(&t).map(|(p, q)| (fit.apply(p) - q).norm_squared()).sum()
    };
    let forward = rigid_fit(&s, &t)?;
    let rev: Vec<Vec3> = s.iter().rev().copied().collect();
    let backward = rigid_fit(&rev, &t)?;
    let flip = residual(&backward, &rev) < residual(&forward, &s);
    let fit = if flip { backward } else { forward };
    let mut moved = subject.map_fibers(|f| {
        let pts: Vec<Vec3> = f.points().iter().map(|p| fit.apply(p)).collect();
        let g = Fiber::new(pts).expect("rigid motion keeps fibers valid");
        if flip {
            g.reversed()
        } else {
            g
        }
    });
    if flip {
        if let Some(ps) = moved.profiles.as_mut() {
            ps.iter_mut().for_each(|p| p.reverse());
        }
    }
    Ok((moved, fit))
}

/// Elastic distance between two fibers after resampling to a common grid.
pub fn fiber_distance(a: &Fiber, b: &Fiber) -> Result<f64> {
    Ok(align_pair(&to_srvf(a)?, &to_srvf(b)?, DEFAULT_ALIGN_ITERS)?.distance())
}
