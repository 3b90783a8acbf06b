mod common;

use common::*;
use rand::Rng;
use tractalign::io::tck::{from_bytes, to_bytes};
use tractalign::io::{bundle_to_tck, load_bundle, read_tck, tck_to_bundle, write_tck, Datatype, TckFile};
use tractalign::Error;

const ALL: [Datatype; 4] = [Datatype::Float32Le, Datatype::Float32Be, Datatype::Float64Le, Datatype::Float64Be];

fn random_streamlines(seed: u64) -> Vec<Vec<[f64; 3]>> {
    let mut r = rng(seed);
    let count = r.gen_range(1..20);
    (0..count)
        .map(|_| {
            let n = r.gen_range(2..40);
            (0..n).map(|_| [r.gen_range(-100.0..100.0), r.gen_range(-100.0..100.0), r.gen_range(-100.0..100.0)]).collect()
        })
        .collect()
}

// Hand-assembled file, independent of the writer.
fn handmade(lines: &[&[[f32; 3]]]) -> Vec<u8> {
    let mut head = String::from("mrtrix tracks\ncount: 2\ndatatype: Float32LE\nfile: . 64\nEND\n");
    while head.len() < 64 {
        head.push(' ');
    }
    let mut out = head.into_bytes();
    let mut push = |p: [f32; 3]| p.iter().for_each(|c| out.extend_from_slice(&c.to_le_bytes()));
    for l in lines {
        l.iter().for_each(|&p| push(p));
        push([f32::NAN; 3]);
    }
    push([f32::INFINITY; 3]);
    out
}

#[test]
fn roundtrip_all_datatypes() {
    for seed in 0..30 {
        for dt in ALL {
            let mut tck = TckFile::new(random_streamlines(seed), dt);
            tck.header.push(("comment".into(), format!("seed {seed}")));
            let back = from_bytes(&to_bytes(&tck).unwrap()).unwrap();
            assert_eq!(back.header, tck.header);
            assert_eq!(back.datatype, dt);
            assert_eq!(back.streamlines.len(), tck.streamlines.len());
            for (a, b) in tck.streamlines.iter().zip(&back.streamlines) {
                for (p, q) in a.iter().zip(b) {
                    for k in 0..3 {
                        let want = match dt {
                            Datatype::Float32Le | Datatype::Float32Be => p[k] as f32 as f64,
                            _ => p[k],
                        };
                        assert_eq!(q[k], want);
                    }
                }
            }
            // Writing what was read reproduces the bytes.
            assert_eq!(to_bytes(&back).unwrap(), to_bytes(&tck).unwrap());
        }
    }
}

#[test]
fn reads_a_handmade_file() {
    let a: &[[f32; 3]] = &[[0.0, 0.0, 0.0], [1.0, 0.5, 0.0], [2.0, 1.0, 0.25]];
    let b: &[[f32; 3]] = &[[5.0, 5.0, 5.0], [6.0, 5.0, 5.0]];
    let tck = from_bytes(&handmade(&[a, b])).unwrap();
    assert_eq!(tck.datatype, Datatype::Float32Le);
    assert_eq!(tck.get("count"), Some("2"));
    assert_eq!(tck.streamlines.len(), 2);
    assert_eq!(tck.streamlines[0][2], [2.0, 1.0, 0.25]);
    assert_eq!(tck.streamlines[1], vec![[5.0, 5.0, 5.0], [6.0, 5.0, 5.0]]);
}

#[test]
fn errors_report_byte_positions() {
    assert!(matches!(from_bytes(b"not tracks\n"), Err(Error::BadMagic { pos: 0 })));

    let bytes = b"mrtrix tracks\ncount 3\nEND\n";
    match from_bytes(bytes) {
        Err(Error::MalformedHeader { pos, line }) => {
            assert_eq!(pos, 14);
            assert_eq!(line, "count 3");
        }
        other => panic!("{other:?}"),
    }

    let bytes = b"mrtrix tracks\ndatatype: Int16\nfile: . 40\nEND\n";
    assert!(matches!(from_bytes(bytes), Err(Error::UnknownDatatype { pos: 14, .. })));

    let bytes = b"mrtrix tracks\ndatatype: Float32LE\nfile: . 9999\nEND\n";
    assert!(matches!(from_bytes(bytes), Err(Error::MissingOffset { pos: 34 })));

    let mut good = handmade(&[&[[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]]);
    good.truncate(64 + 12 + 4);
    assert!(matches!(from_bytes(&good), Err(Error::TruncatedPayload { pos: 76 })));
}

#[test]
fn files_convert_to_bundles_and_back_byte_exact() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("tract.tck");
    let mut tck = TckFile::new(random_streamlines(4), Datatype::Float32Be);
    tck.header = vec![("name".into(), "cst_left".into()), ("count".into(), tck.streamlines.len().to_string())];
    write_tck(&tck, &src).unwrap();

    let bundle = tck_to_bundle(&read_tck(&src).unwrap(), "fallback").unwrap();
    let out = dir.path().join("again.tck");
    write_tck(&bundle_to_tck(&bundle).unwrap(), &out).unwrap();
    assert_eq!(std::fs::read(&src).unwrap(), std::fs::read(&out).unwrap());

    let loaded = load_bundle(&src, 30, None, 0).unwrap();
    assert_eq!(loaded.name, "cst_left");
    assert!(loaded.fibers.iter().all(|f| f.len() == 30));
}
