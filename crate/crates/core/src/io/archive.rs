//! Versioned JSON archive for a bundle and, optionally, its code.
//!
//! Float arrays are stored as base64 of little-endian `f64`s: fiber points as
//! `x y z x y z …`, matrices row-major. The basis itself is not stored; it is
//! rebuilt from the mean, size and mode, and checked against the saved id.

use std::path::Path;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bundle::{Bundle, Provenance};
use crate::curve::{Diffeo, Fiber, Rotation3, Srvf, Vec3};
use crate::error::{Error, Result};
use crate::registration::{BundleCode, Placement};
use crate::tangent::{make_basis, BasisMode, CoeffMatrix};

pub const ARCHIVE_VERSION: u32 = 1;

/// A bundle with an optional code.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleArchive {
    pub bundle: Bundle,
    pub code: Option<BundleCode>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArchiveFile {
    version: u32,
    name: String,
    fibers: Vec<FiberRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profiles: Option<Vec<String>>,
    provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    code: Option<CodeRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FiberRecord {
    id: usize,
    points: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodeRecord {
    beta_mu: String,
    basis_size: usize,
    basis_mode: BasisMode,
    basis_id: String,
    coefficients: MatrixRecord,
    #[serde(default)]
    residuals: String,
    fiber_ids: Vec<usize>,
    placements: Vec<PlacementRecord>,
    gammas: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixRecord {
    rows: usize,
    cols: usize,
    data: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlacementRecord {
    origin: [f64; 3],
    scale: f64,
    rotation: Rotation3,
}

fn pack(values: impl IntoIterator<Item = f64>) -> String {
    let bytes: Vec<u8> = values.into_iter().flat_map(f64::to_le_bytes).collect();
    STANDARD.encode(bytes)
}

fn unpack(text: &str, what: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| Error::Archive(format!("{what}: bad base64: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Archive(format!("{what}: {} bytes is not a whole number of f64s", bytes.len())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn pack_points(points: &[Vec3]) -> String {
    pack(points.iter().flat_map(|p| [p.x, p.y, p.z]))
}

fn unpack_points(text: &str, what: &str) -> Result<Vec<Vec3>> {
    let flat = unpack(text, what)?;
    if flat.len() % 3 != 0 {
        return Err(Error::Archive(format!("{what}: {} values is not a whole number of points", flat.len())));
    }
    Ok(flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect())
}

fn code_record(code: &BundleCode) -> CodeRecord {
    let a = &code.a.entries;
    CodeRecord {
        beta_mu: pack_points(code.beta_mu.values()),
        basis_size: code.basis.requested(),
        basis_mode: code.basis.mode(),
        basis_id: code.basis.id().to_string(),
        coefficients: MatrixRecord {
            rows: a.nrows(),
            cols: a.ncols(),
            data: pack((0..a.nrows()).flat_map(|i| (0..a.ncols()).map(move |j| a[(i, j)]))),
        },
        residuals: pack(code.a.residuals.iter().copied()),
        fiber_ids: code.fiber_ids.clone(),
        placements: code
            .placements
            .iter()
            .map(|p| PlacementRecord {
                origin: p.origin,
                scale: p.scale,
                rotation: p.rotation,
            })
            .collect(),
        gammas: code.gammas.iter().map(|g| pack(g.values().iter().copied())).collect(),
    }
}

fn code_from_record(r: CodeRecord) -> Result<BundleCode> {
    let values = unpack_points(&r.beta_mu, "beta_mu")?;
    let beta_mu = Arc::new(Srvf::from_unit_values(values)?);
    let basis = make_basis(Arc::clone(&beta_mu), r.basis_size, r.basis_mode)?;
    if basis.id() != r.basis_id {
        return Err(Error::Archive(format!(
            "basis id {} does not match the rebuilt basis {}",
            r.basis_id,
            basis.id()
        )));
    }
    let data = unpack(&r.coefficients.data, "coefficients")?;
    let (rows, cols) = (r.coefficients.rows, r.coefficients.cols);
    if data.len() != rows * cols || cols != basis.len() {
        return Err(Error::Archive(format!(
            "coefficients: {rows}x{cols} with {} values for a basis of {}",
            data.len(),
            basis.len()
        )));
    }
    if r.fiber_ids.len() != rows || r.gammas.len() != rows || !(r.placements.is_empty() || r.placements.len() == rows) {
        return Err(Error::Archive("code: per-fiber lists do not match the coefficient rows".into()));
    }
    let placements = r
        .placements
        .into_iter()
        .map(|p| Placement {
            origin: p.origin,
            scale: p.scale,
            rotation: p.rotation,
        })
        .collect();
    let gammas = r
        .gammas
        .iter()
        .map(|g| Diffeo::new(unpack(g, "gamma")?))
        .collect::<Result<_>>()?;
    let mut a = CoeffMatrix::new(DMatrix::from_row_slice(rows, cols, &data), basis.id());
    a.residuals = unpack(&r.residuals, "residuals")?;
    Ok(BundleCode {
        a,
        beta_mu,
        basis,
        fiber_ids: r.fiber_ids,
        placements,
        gammas,
    })
}

pub fn to_json(archive: &BundleArchive) -> Result<String> {
    let b = &archive.bundle;
    let file = ArchiveFile {
        version: ARCHIVE_VERSION,
        name: b.name.clone(),
        fibers: b
            .fibers
            .iter()
            .zip(&b.ids)
            .map(|(f, &id)| FiberRecord {
                id,
                points: pack_points(f.points()),
            })
            .collect(),
        profiles: b
            .profiles
            .as_ref()
            .map(|ps| ps.iter().map(|p| pack(p.iter().copied())).collect()),
        provenance: b.provenance.clone(),
        code: archive.code.as_ref().map(code_record),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn from_json(text: &str) -> Result<BundleArchive> {
    // Check the version before the full schema so old or future files get a
    // clear message rather than a field error.
    let raw: serde_json::Value = serde_json::from_str(text)?;
    match raw.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == ARCHIVE_VERSION as u64 => {}
        Some(v) => return Err(Error::Archive(format!("unsupported archive version {v}"))),
        None => return Err(Error::Archive("missing version field".into())),
    }
    let file: ArchiveFile = serde_json::from_value(raw)?;
    let fibers = file
        .fibers
        .iter()
        .map(|r| Fiber::new(unpack_points(&r.points, "fiber")?))
        .collect::<Result<Vec<_>>>()?;
    let mut bundle = Bundle::new(file.name, fibers)?;
    bundle.ids = file.fibers.iter().map(|r| r.id).collect();
    bundle.provenance = file.provenance;
    if let Some(ps) = file.profiles {
        let ps = ps.iter().map(|p| unpack(p, "profile")).collect::<Result<Vec<_>>>()?;
        bundle = bundle.with_profiles(ps)?;
    }
    let code = file.code.map(code_from_record).transpose()?;
    if let Some(c) = &code {
        if c.len() != bundle.len() {
            return Err(Error::Archive(format!(
                "code has {} rows for {} fibers",
                c.len(),
                bundle.len()
            )));
        }
    }
    Ok(BundleArchive { bundle, code })
}

pub fn save_archive(archive: &BundleArchive, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json(archive)?).map_err(|e| Error::io(path, e))
}

pub fn load_archive(path: impl AsRef<Path>) -> Result<BundleArchive> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::synth::{synth_bundle, SynthSpec};
    use crate::registration::{code_bundle, CodeOptions};

    fn small() -> Bundle {
        let spec = SynthSpec {
            fibers: 4,
            samples: 30,
            profiles: true,
            ..SynthSpec::default()
        };
        synth_bundle(&spec, 5).unwrap()
    }

    #[test]
    fn bundle_roundtrip_is_exact() {
        let a = BundleArchive {
            bundle: small(),
            code: None,
        };
        let text = to_json(&a).unwrap();
        assert_eq!(from_json(&text).unwrap(), a);
        assert_eq!(to_json(&from_json(&text).unwrap()).unwrap(), text);
    }

    #[test]
    fn code_roundtrip_is_exact() {
        let b = small();
        let (code, _) = code_bundle(&b, &CodeOptions::default()).unwrap();
        let a = BundleArchive {
            bundle: b,
            code: Some(code),
        };
        let back = from_json(&to_json(&a).unwrap()).unwrap();
        assert_eq!(back.bundle, a.bundle);
        let (x, y) = (back.code.unwrap(), a.code.unwrap());
        assert_eq!(x.beta_mu, y.beta_mu);
        assert_eq!(x.basis, y.basis);
        assert_eq!(x.a, y.a);
        assert_eq!(x.placements, y.placements);
        assert_eq!(x.gammas, y.gammas);
        assert_eq!(x.fiber_ids, y.fiber_ids);
    }

    #[test]
    fn unknown_fields_and_versions_rejected() {
        let text = to_json(&BundleArchive {
            bundle: small(),
            code: None,
        })
        .unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["colour"] = "blue".into();
        let err = from_json(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
        v.as_object_mut().unwrap().remove("colour");
        v["version"] = 2.into();
        assert!(matches!(from_json(&v.to_string()), Err(Error::Archive(_))));
    }
}
