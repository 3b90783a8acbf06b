use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{resample, resample_values, to_srvf, Fiber, Srvf, Vec3};
use crate::error::{Error, Result};

/// Where a bundle came from and how it was prepared.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub source: Option<String>,
    /// Samples per fiber after resampling.
    pub samples: Option<usize>,
    /// Seed of the deterministic subsample, if one was taken.
    pub subsample_seed: Option<u64>,
    /// Fiber count before subsampling.
    pub original_count: usize,
    /// Header entries and datatype of a source `.tck` file, kept so the
    /// bundle can be written back unchanged.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tck_header: Option<Vec<(String, String)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tck_datatype: Option<String>,
}

/// A named set of fibers with optional per-fiber scalar profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub name: String,
    pub fibers: Vec<Fiber>,
    /// Original index of each fiber in its source.
    pub ids: Vec<usize>,
    /// One profile per fiber, sampled on the fiber's points.
    pub profiles: Option<Vec<Vec<f64>>>,
    pub provenance: Provenance,
}

impl Bundle {
    pub fn new(name: impl Into<String>, fibers: Vec<Fiber>) -> Result<Self> {
        if fibers.is_empty() {
            return Err(Error::EmptyBundle);
        }
        let n = fibers.len();
        Ok(Bundle {
            name: name.into(),
            ids: (0..n).collect(),
            fibers,
            profiles: None,
            provenance: Provenance {
                original_count: n,
                ..Provenance::default()
            },
        })
    }

    pub fn with_profiles(mut self, profiles: Vec<Vec<f64>>) -> Result<Self> {
        if profiles.len() != self.fibers.len() {
            return Err(Error::FiberCountMismatch {
                expected: self.fibers.len(),
                found: profiles.len(),
            });
        }
        for (p, f) in profiles.iter().zip(&self.fibers) {
            if p.len() != f.len() {
                return Err(Error::GridMismatch {
                    left: f.len(),
                    right: p.len(),
                });
            }
        }
        self.profiles = Some(profiles);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.fibers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fibers.is_empty()
    }

    /// Common sample count, if all fibers share one.
    pub fn samples(&self) -> Option<usize> {
        let n = self.fibers.first()?.len();
        self.fibers.iter().all(|f| f.len() == n).then_some(n)
    }

    /// Resample every fiber to `samples` points equally spaced in arc length,
    /// interpolating profiles at the same positions.
    pub fn resampled(&self, samples: usize) -> Result<Bundle> {
        let fibers = self.fibers.iter().map(|f| resample(f, samples)).collect::<Result<_>>()?;
        let profiles = match &self.profiles {
            Some(ps) => Some(
                ps.iter()
                    .zip(&self.fibers)
                    .map(|(p, f)| resample_values(f.points(), p, samples))
                    .collect::<Result<_>>()?,
            ),
            None => None,
        };
        Ok(Bundle {
            fibers,
            profiles,
            provenance: Provenance {
                samples: Some(samples),
                ..self.provenance.clone()
            },
            ..self.clone()
        })
    }

    /// Keep `count` fibers chosen by a seeded draw, in their original order.
    /// Bundles with exactly `count` fibers are returned unchanged.
    pub fn subsample(&self, count: usize, seed: u64) -> Result<Bundle> {
        if self.len() < count {
            return Err(Error::FiberCountMismatch {
                expected: count,
                found: self.len(),
            });
        }
        if self.len() == count {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep = sample(&mut rng, self.len(), count).into_vec();
        keep.sort_unstable();
        Ok(Bundle {
            name: self.name.clone(),
            fibers: keep.iter().map(|&i| self.fibers[i].clone()).collect(),
            ids: keep.iter().map(|&i| self.ids[i]).collect(),
            profiles: self
                .profiles
                .as_ref()
                .map(|ps| keep.iter().map(|&i| ps[i].clone()).collect()),
            provenance: Provenance {
                subsample_seed: Some(seed),
                ..self.provenance.clone()
            },
        })
    }

    /// Flip fibers (and their profiles) whose reversal brings their endpoints
    /// closer to those of `reference`.
    pub fn oriented_to(&self, reference: &Fiber) -> Bundle {
        let mut out = self.clone();
        for (i, f) in self.fibers.iter().enumerate() {
            let o = f.oriented_to(reference);
            if o != *f {
                out.fibers[i] = o;
                if let Some(ps) = out.profiles.as_mut() {
                    ps[i].reverse();
                }
            }
        }
        out
    }

    /// Orient every fiber to the bundle's first fiber.
    pub fn self_oriented(&self) -> Bundle {
        match self.fibers.first() {
            Some(r) => self.oriented_to(&r.clone()),
            None => self.clone(),
        }
    }

    pub fn srvfs(&self) -> Result<Vec<Srvf>> {
        self.fibers.iter().map(to_srvf).collect()
    }

    /// All sample points of all fibers.
    pub fn points(&self) -> Vec<Vec3> {
        self.fibers.iter().flat_map(|f| f.points().iter().copied()).collect()
    }

    /// Pointwise average of the fibers; all must share a sample count.
    pub fn mean_curve(&self) -> Result<Vec<Vec3>> {
        let n = self.samples().ok_or(Error::BadSpec("fibers have different sample counts".into()))?;
        let mut acc = vec![Vec3::zeros(); n];
        for f in &self.fibers {
            for (a, p) in acc.iter_mut().zip(f.points()) {
                *a += p;
            }
        }
        let k = self.len() as f64;
        Ok(acc.into_iter().map(|p| p / k).collect())
    }

    pub fn map_fibers(&self, f: impl Fn(&Fiber) -> Fiber) -> Bundle {
        Bundle {
            fibers: self.fibers.iter().map(f).collect(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(offset: f64, n: usize) -> Fiber {
        Fiber::new((0..n).map(|i| Vec3::new(i as f64, offset, 0.0)).collect()).unwrap()
    }

    #[test]
    fn subsample_is_ordered_subset_and_deterministic() {
        let b = Bundle::new("t", (0..20).map(|i| line(i as f64, 5)).collect()).unwrap();
        let s1 = b.subsample(7, 42).unwrap();
        let s2 = b.subsample(7, 42).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), 7);
        assert!(s1.ids.windows(2).all(|w| w[0] < w[1]));
        for (f, &i) in s1.fibers.iter().zip(&s1.ids) {
            assert_eq!(*f, b.fibers[i]);
        }
        assert_eq!(s1.provenance.subsample_seed, Some(42));
        assert!(b.subsample(21, 0).is_err());
    }

    #[test]
    fn orientation_flips_profiles_too() {
        let fibers = vec![line(0.0, 4), line(1.0, 4).reversed()];
        let b = Bundle::new("t", fibers)
            .unwrap()
            .with_profiles(vec![vec![0.0, 1.0, 2.0, 3.0]; 2])
            .unwrap();
        let o = b.self_oriented();
        assert_eq!(o.fibers[1], line(1.0, 4));
        assert_eq!(o.profiles.unwrap()[1], vec![3.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn resampling_carries_profiles() {
        let f = Fiber::new(vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0)]).unwrap();
        let b = Bundle::new("t", vec![f]).unwrap().with_profiles(vec![vec![0.0, 1.0, 3.0]]).unwrap();
        let r = b.resampled(7).unwrap();
        let p = &r.profiles.unwrap()[0];
        // The profile equals arc length here, so it must stay linear.
        for (j, v) in p.iter().enumerate() {
            assert!((v - 0.5 * j as f64).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn empty_bundle_rejected() {
        assert!(matches!(Bundle::new("x", vec![]), Err(Error::EmptyBundle)));
    }
}
