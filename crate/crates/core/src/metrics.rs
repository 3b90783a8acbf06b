//! Evaluation: Hausdorff distance between bundles, along-tract profile
//! warping and variability, and rigid-vs-soft comparison reports.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::Bundle;
use crate::curve::{interp_scalar, Diffeo, Vec3};
use crate::error::{Error, Result};

// Directed distance, squared. Scanning `b` in a shuffled order lets the inner
// loop stop as soon as some point is closer than the running maximum, which
// cannot change the result.
fn directed_sq(a: &[Vec3], b: &[Vec3]) -> f64 {
    let mut cmax = 0.0f64;
    for p in a {
        let mut cmin = f64::INFINITY;
        for q in b {
            let d = (p - q).norm_squared();
            if d < cmin {
                cmin = d;
                if cmin <= cmax {
                    break;
                }
            }
        }
        if cmin > cmax {
            cmax = cmin;
        }
    }
    cmax
}

fn shuffled(points: &[Vec3]) -> Vec<Vec3> {
    let mut v = points.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5eed));
    v
}

/// Directed Hausdorff distance `max_{a∈A} min_{b∈B} ‖a − b‖`.
pub fn directed_hausdorff(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(directed_sq(&shuffled(a), &shuffled(b)).sqrt())
}

/// Bidirectional Hausdorff distance between two point sets.
pub fn hausdorff(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let (sa, sb) = (shuffled(a), shuffled(b));
    Ok(directed_sq(&sa, &sb).max(directed_sq(&sb, &sa)).sqrt())
}

/// Hausdorff distance between the sample points of two bundles.
pub fn bundle_hausdorff(a: &Bundle, b: &Bundle) -> Result<f64> {
    hausdorff(&a.points(), &b.points())
}

/// Profile sampled at `γ(t_j)` by linear interpolation.
pub fn warp_profile(profile: &[f64], gamma: &Diffeo) -> Result<Vec<f64>> {
    if profile.len() != gamma.len() {
        return Err(Error::GridMismatch {
            left: profile.len(),
            right: gamma.len(),
        });
    }
    Ok(gamma.values().iter().map(|&g| interp_scalar(profile, g)).collect())
}

/// Mean over the grid of the across-fiber sample standard deviation.
pub fn profile_variability(profiles: &[Vec<f64>]) -> Result<f64> {
    if profiles.len() < 2 {
        return Err(Error::TooFewProfiles(profiles.len()));
    }
    let n = profiles[0].len();
    if let Some(p) = profiles.iter().find(|p| p.len() != n) {
        return Err(Error::GridMismatch { left: n, right: p.len() });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let k = profiles.len() as f64;
    let total: f64 = (0..n)
        .map(|j| {
            let mean = profiles.iter().map(|p| p[j]).sum::<f64>() / k;
            let var = profiles.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>() / (k - 1.0);
            var.sqrt()
        })
        .sum();
    Ok(total / n as f64)
}

/// One subject/template comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub pair_id: String,
    pub tract_name: String,
    pub rigid_hausdorff: f64,
    pub soft_hausdorff: f64,
    /// `soft − rigid`; negative when soft alignment is closer.
    pub difference: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let count = values.len();
        if count == 0 {
            return Summary {
                count,
                mean: f64::NAN,
                sd: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let sd = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Summary { count, mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractSummary {
    pub tract_name: String,
    pub rigid: Summary,
    pub soft: Summary,
    pub difference: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<PairRow>,
    pub tracts: Vec<TractSummary>,
}

/// A registered pair: the template and the subject after each method.
#[derive(Debug, Clone)]
pub struct AlignedPair {
    pub pair_id: String,
    pub template: Bundle,
    pub rigid: Bundle,
    pub soft: Bundle,
}

/// Hausdorff distance to the template for both methods, per pair, with
/// per-tract summaries in first-seen order.
pub fn compare_alignments(pairs: &[AlignedPair]) -> Result<EvalReport> {
    let mut rows = Vec::with_capacity(pairs.len());
    for p in pairs {
        if p.rigid.name != p.soft.name {
            return Err(Error::PairMismatch(format!(
                "{}: rigid tract {:?} vs soft tract {:?}",
                p.pair_id, p.rigid.name, p.soft.name
            )));
        }
        let template = p.template.points();
        let rigid = hausdorff(&p.rigid.points(), &template)?;
        let soft = hausdorff(&p.soft.points(), &template)?;
        rows.push(PairRow {
            pair_id: p.pair_id.clone(),
            tract_name: p.rigid.name.clone(),
            rigid_hausdorff: rigid,
            soft_hausdorff: soft,
            difference: soft - rigid,
        });
    }
    Ok(summarize(rows))
}

pub fn summarize(rows: Vec<PairRow>) -> EvalReport {
    let mut names: Vec<String> = Vec::new();
    for r in &rows {
        if !names.contains(&r.tract_name) {
            names.push(r.tract_name.clone());
        }
    }
    let tracts = names
        .into_iter()
        .map(|name| {
            let sel: Vec<&PairRow> = rows.iter().filter(|r| r.tract_name == name).collect();
            let col = |f: fn(&PairRow) -> f64| sel.iter().map(|r| f(r)).collect::<Vec<_>>();
            TractSummary {
                rigid: Summary::of(&col(|r| r.rigid_hausdorff)),
                soft: Summary::of(&col(|r| r.soft_hausdorff)),
                difference: Summary::of(&col(|r| r.difference)),
                tract_name: name,
            }
        })
        .collect();
    EvalReport { rows, tracts }
}

impl EvalReport {
    /// CSV with columns `pair_id, tract_name, rigid_hausdorff, soft_hausdorff, difference`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::Fiber;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn hand_computed_cases() {
        assert_eq!(hausdorff(&[v(0.0, 0.0, 0.0)], &[v(3.0, 4.0, 0.0)]).unwrap(), 5.0);
        let x = [v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0)];
        let y = [v(0.0, 0.0, 0.0)];
        assert_eq!(directed_hausdorff(&x, &y).unwrap(), 1.0);
        assert_eq!(directed_hausdorff(&y, &x).unwrap(), 0.0);
        assert_eq!(hausdorff(&x, &y).unwrap(), 1.0);
        assert_eq!(hausdorff(&x, &x).unwrap(), 0.0);
        assert!(matches!(hausdorff(&[], &y), Err(Error::EmptySet)));
    }

    #[test]
    fn warp_profile_cases() {
        let id = Diffeo::identity(100);
        let p: Vec<f64> = (0..100).map(|j| (j as f64 * 0.1).sin()).collect();
        let w = warp_profile(&p, &id).unwrap();
        assert!(p.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-12));
        let sq = Diffeo::from_fn(100, |t| t * t).unwrap();
        assert!(warp_profile(&[0.7; 100], &sq).unwrap().iter().all(|&x| (x - 0.7).abs() < 1e-15));
        let lin: Vec<f64> = crate::curve::uniform_grid(100);
        let got = warp_profile(&lin, &sq).unwrap();
        for (g, t) in got.iter().zip(crate::curve::uniform_grid(100)) {
            assert!((g - t * t).abs() < 1e-3);
        }
        assert!(warp_profile(&[0.0; 10], &id).is_err());
    }

    #[test]
    fn variability_cases() {
        assert_eq!(profile_variability(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap(), 0.0);
        let got = profile_variability(&[vec![3.0; 5], vec![1.0; 5]]).unwrap();
        assert!((got - 2.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(profile_variability(&[vec![1.0]]), Err(Error::TooFewProfiles(1))));
    }

    #[test]
    fn report_rows_and_mismatch() {
        let f = |dx: f64| Fiber::new(vec![v(dx, 0.0, 0.0), v(dx + 1.0, 0.0, 0.0), v(dx + 2.0, 0.0, 0.0)]).unwrap();
        let b = |name: &str, dx: f64| Bundle::new(name, vec![f(dx)]).unwrap();
        let pairs = vec![
            AlignedPair {
                pair_id: "p0".into(),
                template: b("t", 0.0),
                rigid: b("t", 1.0),
                soft: b("t", 1.0),
            },
            AlignedPair {
                pair_id: "p1".into(),
                template: b("t", 0.0),
                rigid: b("t", 2.0),
                soft: b("t", 0.5),
            },
        ];
        let r = compare_alignments(&pairs).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].difference, 0.0);
        assert_eq!(r.rows[1].difference, -1.5);
        assert_eq!(r.tracts.len(), 1);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("pair_id,tract_name,rigid_hausdorff,soft_hausdorff,difference\n"));
        let mut bad = pairs[0].clone();
        bad.soft.name = "other".into();
        assert!(matches!(compare_alignments(&[bad]), Err(Error::PairMismatch(_))));
    }
}
