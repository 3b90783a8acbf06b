//! Reading and writing bundles.

pub mod archive;
pub mod profiles;
pub mod synth;
pub mod tck;

use std::path::Path;

use crate::bundle::Bundle;
use crate::error::{Error, Result};

pub use archive::{load_archive, save_archive, BundleArchive};
pub use synth::{synth_bundle, Backbone, SynthSpec};
pub use tck::{read_tck, write_tck, Datatype, TckFile};

/// Load a `.tck` file or a JSON archive and prepare it for coding.
///
/// TCK streamlines are always resampled to `samples` points; archives only
/// when their sample count differs. If `count` is given, that many fibers are
/// kept by a draw seeded with `seed`. Finally every fiber is oriented to the
/// first one.
pub fn load_bundle(path: impl AsRef<Path>, samples: usize, count: Option<usize>, seed: u64) -> Result<Bundle> {
    let path = path.as_ref();
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let mut bundle = match ext.as_str() {
        "tck" => {
            let tck = read_tck(path)?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("bundle");
            let mut b = Bundle::new(tck.get("name").unwrap_or(stem), tck.fibers())?;
            b.provenance.source = Some(path.display().to_string());
            b.resampled(samples)?
        }
        "json" => {
            let b = load_archive(path)?.bundle;
            if b.samples() == Some(samples) {
                b
            } else {
                b.resampled(samples)?
            }
        }
        _ => {
            return Err(Error::BadSpec(format!(
                "{}: expected a .tck or .json file",
                path.display()
            )))
        }
    };
    if let Some(m) = count {
        bundle = bundle.subsample(m, seed)?;
    }
    Ok(bundle.self_oriented())
}

/// Bundle holding a track file's streamlines as they are, remembering its
/// header and datatype so [`bundle_to_tck`] can write it back unchanged.
/// The header's `name` entry, if any, overrides `name`. Streamlines that
/// cannot form a fiber are skipped.
pub fn tck_to_bundle(tck: &TckFile, name: &str) -> Result<Bundle> {
    let mut b = Bundle::new(tck.get("name").unwrap_or(name), tck.fibers())?;
    b.provenance.tck_header = Some(tck.header.clone());
    b.provenance.tck_datatype = Some(tck.datatype.as_str().to_string());
    Ok(b)
}

/// Track file for a bundle, reusing a remembered header and datatype (with
/// `count` updated) or else a `Float32LE` file with `count` and `name`
/// entries.
pub fn bundle_to_tck(bundle: &Bundle) -> Result<TckFile> {
    let datatype = match &bundle.provenance.tck_datatype {
        Some(d) => Datatype::parse(d).ok_or_else(|| Error::BadSpec(format!("unknown datatype {d:?}")))?,
        None => Datatype::Float32Le,
    };
    let mut tck = TckFile::from_fibers(&bundle.fibers, datatype);
    tck.header.push(("name".into(), bundle.name.clone()));
    if let Some(header) = &bundle.provenance.tck_header {
        tck.header = header.clone();
        for (k, v) in tck.header.iter_mut() {
            if k == "count" {
                *v = bundle.len().to_string();
            }
        }
    }
    Ok(tck)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{Fiber, Vec3};

    #[test]
    fn tck_bundle_tck_is_byte_exact() {
        let line = |o: f32| vec![[o as f64, 0.0, 0.0], [o as f64, 1.5, 0.0], [o as f64, 2.5, 0.25]];
        let mut tck = TckFile::new(vec![line(0.0), line(1.0)], Datatype::Float32Be);
        tck.header.insert(0, ("timestamp".into(), "12345.6".into()));
        let bytes = tck::to_bytes(&tck).unwrap();
        let b = tck_to_bundle(&tck::from_bytes(&bytes).unwrap(), "x").unwrap();
        assert_eq!(tck::to_bytes(&bundle_to_tck(&b).unwrap()).unwrap(), bytes);
        let plain = Bundle::new("p", vec![Fiber::new(vec![Vec3::zeros(), Vec3::x()]).unwrap()]).unwrap();
        let t = bundle_to_tck(&plain).unwrap();
        assert_eq!(t.datatype, Datatype::Float32Le);
        assert_eq!(tck_to_bundle(&t, "other").unwrap().name, "p");
    }
}
