//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line to
//! stderr (visible even when output is captured) and then asserts.

use std::f64::consts::PI;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tractalign::curve::{apply_gamma, from_srvf, l2_inner, optimal_gamma, segment_cost, to_srvf, Vec3, LATTICE_STEPS};
use tractalign::io::tck::{from_bytes, to_bytes};
use tractalign::io::{synth_bundle, SynthSpec};
use tractalign::metrics::{hausdorff, profile_variability, warp_profile};
use tractalign::registration::{bundle_distance, code_bundle, procrustes_matrices, rigid_align, soft_align, CodeOptions, DistanceOptions};
use tractalign::tangent::{exp_map, log_map, make_basis, BasisMode};
use tractalign::transport::{transport_exact, transport_stepwise, Rescale};
use tractalign::{karcher_mean, BundleCode, CoeffMatrix, Diffeo, Error, Fiber, MeanOptions, Srvf, TangentVector};

fn report(n: usize, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[acceptance {n:>2}] {verdict} {name}: {detail}");
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(r: &mut ChaCha8Rng) -> f64 {
    let u: f64 = r.gen_range(f64::EPSILON..1.0);
    let v: f64 = r.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
}

fn gaussian_vec(r: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(gaussian(r), gaussian(r), gaussian(r))
}

fn random_fiber(r: &mut ChaCha8Rng, n: usize) -> Fiber {
    let drift = gaussian_vec(r).normalize() * r.gen_range(1.0..3.0);
    let modes: Vec<(Vec3, Vec3)> = (0..3).map(|_| (gaussian_vec(r) * 0.3, gaussian_vec(r) * 0.3)).collect();
    let offset = gaussian_vec(r) * 5.0;
    let pts = (0..n)
        .map(|j| {
            let t = j as f64 / (n - 1) as f64;
            let mut p = offset + drift * t;
            for (m, (a, b)) in modes.iter().enumerate() {
                let w = (m + 1) as f64 * PI;
                p += a * (w * t).sin() + b * ((w * t).cos() - 1.0);
            }
            p
        })
        .collect();
    Fiber::new(pts).unwrap()
}

fn random_srvf(r: &mut ChaCha8Rng, n: usize) -> Srvf {
    to_srvf(&random_fiber(r, n)).unwrap()
}

fn random_warp(r: &mut ChaCha8Rng, n: usize) -> Diffeo {
    let a1 = r.gen_range(-0.5..0.5);
    let rest = 0.5 - f64::abs(a1);
    let a2 = r.gen_range(-rest..rest);
    Diffeo::from_fn(n, |t| t + a1 * (PI * t).sin() / PI + a2 * (2.0 * PI * t).sin() / (2.0 * PI)).unwrap()
}

fn random_tangent(r: &mut ChaCha8Rng, base: &Arc<Srvf>) -> TangentVector {
    let raw: Vec<Vec3> = (0..base.len()).map(|_| gaussian_vec(r)).collect();
    let c = l2_inner(&raw, base.values()).unwrap();
    let v: Vec<Vec3> = raw.iter().zip(base.values()).map(|(x, b)| x - b * c).collect();
    let n = l2_inner(&v, &v).unwrap().sqrt();
    let len = r.gen_range(0.1..1.0);
    TangentVector::new(Arc::clone(base), v.into_iter().map(|x| x * (len / n)).collect()).unwrap()
}

fn random_so_n(r: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let qr = DMatrix::from_fn(n, n, |_, _| gaussian(r)).qr();
    let (mut q, rr) = (qr.q(), qr.r());
    for j in 0..n {
        if rr[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

fn sup(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn criterion_01_srvf_roundtrip() {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let f = random_fiber(&mut r, 100);
        let back = from_srvf(&to_srvf(&f).unwrap(), f.points()[0], f.srvf_scale()).unwrap();
        // Compare with translation and scale removed.
        let norm = |g: &Fiber| -> Vec<Vec3> {
            let (p0, s) = (g.points()[0], g.srvf_scale());
            g.points().iter().map(|p| (p - p0) / s).collect()
        };
        worst = worst.max(sup(&norm(&f), &norm(&back)));
    }
    let secs = start.elapsed().as_secs_f64();
    report(1, "SRVF roundtrip", worst < 1e-6 && secs < 5.0, &format!("max error {worst:.2e} (< 1e-6), {secs:.2} s (< 5 s)"));
}

#[test]
fn criterion_02_warp_isometry() {
    let mut r = rng(102);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (q1, q2) = (random_srvf(&mut r, 100), random_srvf(&mut r, 100));
        let g = random_warp(&mut r, 100);
        let d = q1.distance(&q2).unwrap();
        let dg = apply_gamma(&q1, &g).unwrap().distance(&apply_gamma(&q2, &g).unwrap()).unwrap();
        worst = worst.max((d - dg).abs());
    }
    report(2, "Fisher-Rao isometry", worst < 1e-3, &format!("max |d - d_gamma| {worst:.2e} (< 1e-3)"));
}

#[test]
fn criterion_03_dp_brute_force() {
    fn exhaustive(a: &[Vec3], b: &[Vec3]) -> f64 {
        let n = a.len();
        let mut best = f64::INFINITY;
        let mut stack = vec![((0usize, 0usize), 0.0f64)];
        while let Some(((i, j), acc)) = stack.pop() {
            if (i, j) == (n - 1, n - 1) {
                best = best.min(acc);
                continue;
            }
            for &(di, dj) in &LATTICE_STEPS {
                if i + di < n && j + dj < n {
                    stack.push(((i + di, j + dj), acc + segment_cost(a, b, (i, j), (i + di, j + dj))));
                }
            }
        }
        best
    }
    let mut r = rng(103);
    let mut mismatches = 0;
    for _ in 0..50 {
        let (q1, q2) = (random_srvf(&mut r, 12), random_srvf(&mut r, 12));
        if optimal_gamma(&q1, &q2).unwrap().cost != exhaustive(q1.values(), q2.values()) {
            mismatches += 1;
        }
    }
    report(3, "DP vs brute force", mismatches == 0, &format!("{mismatches}/50 instances differ (exact equality required)"));
}

#[test]
fn criterion_04_exp_log() {
    let mut r = rng(104);
    let (mut inv, mut len): (f64, f64) = (0.0, 0.0);
    for _ in 0..500 {
        let a = Arc::new(random_srvf(&mut r, 100));
        let b = random_srvf(&mut r, 100);
        let v = log_map(&a, &b).unwrap();
        inv = inv.max(exp_map(&a, &v).unwrap().sup_distance(&b));
        let geo = l2_inner(a.values(), b.values()).unwrap().clamp(-1.0, 1.0).acos();
        len = len.max((v.norm() - geo).abs());
    }
    report(
        4,
        "exp/log inversion",
        inv < 1e-9 && len < 1e-9,
        &format!("max |exp(log b) - b| {inv:.2e}, max | |log b| - arccos<a,b> | {len:.2e} (< 1e-9)"),
    );
}

#[test]
fn criterion_05_transport() {
    let mut r = rng(105);
    let (mut gap100, mut ratio_lo, mut ratio_hi, mut iso): (f64, f64, f64, f64) = (0.0, f64::INFINITY, 0.0, 0.0);
    let mut lengths = Vec::new();
    for _ in 0..100 {
        let src = Arc::new(random_srvf(&mut r, 100));
        let dst = Arc::new(random_srvf(&mut r, 100));
        lengths.push(log_map(&src, &dst).unwrap().norm());
        let vs: Vec<_> = (0..3).map(|_| random_tangent(&mut r, &src)).collect();
        let exact = transport_exact(&src, &dst, &vs).unwrap().vectors;
        let gap = |k: usize| -> f64 {
            let step = transport_stepwise(&src, &dst, &vs, k, Rescale::Original).unwrap().vectors;
            step.iter().zip(&exact).map(|(a, b)| sup(a.values(), b.values())).fold(0.0, f64::max)
        };
        let (g100, g200) = (gap(100), gap(200));
        gap100 = gap100.max(g100);
        ratio_lo = ratio_lo.min(g100 / g200);
        ratio_hi = ratio_hi.max(g100 / g200);
        for (i, a) in exact.iter().enumerate() {
            for (j, b) in exact.iter().enumerate() {
                iso = iso.max((a.inner(b).unwrap() - vs[i].inner(&vs[j]).unwrap()).abs());
            }
        }
    }
    lengths.sort_by(f64::total_cmp);
    let pass = gap100 < 1e-4 && ratio_lo >= 1.5 && ratio_hi <= 2.5 && iso < 1e-6;
    report(
        5,
        "transport oracle",
        pass,
        &format!(
            "max sup gap at k=100 {gap100:.2e} (< 1e-4), gap(100)/gap(200) in [{ratio_lo:.3}, {ratio_hi:.3}] (within [1.5, 2.5]), exact-path inner-product drift {iso:.2e} (< 1e-6); geodesic lengths {:.2}..{:.2}, median {:.2}",
            lengths[0],
            lengths[99],
            lengths[50]
        ),
    );
}

#[test]
fn criterion_06_procrustes() {
    let (n, k) = (50, 20);
    let mut r = rng(106);
    let (mut worst_recovery, mut worst_fit): (f64, f64) = (0.0, 0.0);
    let mut beaten = 0;
    for _ in 0..50 {
        let a1 = DMatrix::from_fn(n, k, |_, _| gaussian(&mut r));
        let planted = random_so_n(&mut r, n);
        let a2 = &planted * &a1;
        let o = procrustes_matrices(&a1, &a2).unwrap();
        let o = o.matrix();
        worst_recovery = worst_recovery.max((o - &planted).norm());
        let best = (&a2 - o * &a1).norm();
        worst_fit = worst_fit.max(best);
        for _ in 0..1000 {
            let s = random_so_n(&mut r, n);
            if (&a2 - s * &a1).norm() < best {
                beaten += 1;
            }
        }
    }
    report(
        6,
        "SO(N) Procrustes recovery",
        worst_recovery < 1e-6 && beaten == 0,
        &format!(
            "max ||O - O_planted||_F {worst_recovery:.2e} (< 1e-6); max ||A2 - O A1||_F {worst_fit:.2e}; random rotations better {beaten}/50000 (0 required)"
        ),
    );
}

// A code whose mean, basis and rows are given directly.
fn code_from(beta: Srvf, a: DMatrix<f64>, k: usize) -> BundleCode {
    let beta = Arc::new(beta);
    let basis = make_basis(Arc::clone(&beta), k, BasisMode::Orthonormal).unwrap();
    BundleCode {
        a: CoeffMatrix::new(a, basis.id()),
        beta_mu: beta,
        basis,
        fiber_ids: Vec::new(),
        placements: Vec::new(),
        gammas: Vec::new(),
    }
}

// Channels at frequencies the first nine basis directions do not contain, so
// those directions stay tangent when the channel weights change.
fn high_frequency_mean(n: usize, y_weight: f64) -> Srvf {
    let values = (0..n)
        .map(|j| {
            let t = j as f64 / (n - 1) as f64;
            Vec3::new((6.0 * PI * t).cos(), y_weight * (8.0 * PI * t).sin(), 0.7 * (10.0 * PI * t).cos())
        })
        .collect();
    Srvf::from_values(values).unwrap()
}

#[test]
fn criterion_07_self_distance_and_terms() {
    let opts = CodeOptions {
        mean: MeanOptions {
            max_iters: 10,
            ..MeanOptions::default()
        },
        ..CodeOptions::default()
    };
    let mut worst_self: f64 = 0.0;
    for seed in 0..20 {
        let spec = SynthSpec {
            fibers: 20,
            samples: 60,
            ..SynthSpec::default()
        };
        let (code, _) = code_bundle(&synth_bundle(&spec, 700 + seed).unwrap(), &opts).unwrap();
        worst_self = worst_self.max(bundle_distance(&code, &code, &DistanceOptions::default()).unwrap().distance);
    }

    let mut r = rng(107);
    let (rows, k, n) = (20, 9, 100);
    let a = DMatrix::from_fn(rows, k, |_, _| 0.05 * gaussian(&mut r));
    let e = DMatrix::from_fn(rows, k, |_, _| 0.01 * gaussian(&mut r));
    let beta = high_frequency_mean(n, 1.0);
    let coef_only = bundle_distance(&code_from(beta.clone(), &a + &e, k), &code_from(beta.clone(), a.clone(), k), &DistanceOptions::default()).unwrap();
    let mean_only = bundle_distance(
        &code_from(high_frequency_mean(n, 1.3), a.clone(), k),
        &code_from(beta, a, k),
        &DistanceOptions::default(),
    )
    .unwrap();
    let pass = worst_self < 1e-6
        && coef_only.mean_term < 1e-6
        && coef_only.coefficient_term > 1e-3
        && mean_only.coefficient_term < 1e-6
        && mean_only.mean_term > 1e-3;
    report(
        7,
        "self-distance and term decomposition",
        pass,
        &format!(
            "max D(B,B) {worst_self:.2e} (< 1e-6); coefficient perturbation: mean term {:.2e}, coefficient term {:.2e}; mean perturbation: mean term {:.2e}, coefficient term {:.2e}",
            coef_only.mean_term, coef_only.coefficient_term, mean_only.mean_term, mean_only.coefficient_term
        ),
    );
}

#[test]
fn criterion_08_soft_beats_rigid() {
    let opts = CodeOptions::default();
    let (mut wins, mut reductions, mut slowest) = (0, Vec::new(), 0.0f64);
    for seed in 0..100u64 {
        let template = synth_bundle(&SynthSpec::default(), 800 + seed).unwrap();
        let subject_spec = SynthSpec {
            global_rotation: 0.3,
            global_translation: 5.0,
            bend: 0.05,
            ..SynthSpec::default()
        };
        let subject = synth_bundle(&subject_spec, 1800 + seed).unwrap();
        let (template_code, _) = code_bundle(&template, &opts).unwrap();
        let start = Instant::now();
        let (subject_code, _) = code_bundle(&subject, &opts).unwrap();
        let soft = soft_align(&subject_code, &template_code, &DistanceOptions::default()).unwrap();
        let (rigid, _) = rigid_align(&subject, &template).unwrap();
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let target = template.points();
        let soft_pts: Vec<Vec3> = soft.reconstructed.iter().flat_map(|f| f.points().to_vec()).collect();
        let h_soft = hausdorff(&soft_pts, &target).unwrap();
        let h_rigid = hausdorff(&rigid.points(), &target).unwrap();
        if h_soft <= h_rigid {
            wins += 1;
        }
        reductions.push(1.0 - h_soft / h_rigid);
    }
    let mean_red = reductions.iter().sum::<f64>() / reductions.len() as f64;
    report(
        8,
        "soft beats rigid",
        wins >= 95 && mean_red > 0.10,
        &format!(
            "soft <= rigid in {wins}/100 (>= 95), mean Hausdorff reduction {:.1}% (> 10%); slowest subject registration {slowest:.1} s (target < 60 s)",
            100.0 * mean_red
        ),
    );
}

#[test]
fn criterion_09_profile_variability() {
    let mut wins = 0;
    let (mut before_sum, mut after_sum) = (0.0, 0.0);
    for seed in 0..100u64 {
        let spec = SynthSpec {
            fibers: 20,
            samples: 100,
            profiles: true,
            ..SynthSpec::default()
        };
        let bundle = synth_bundle(&spec, 900 + seed).unwrap();
        let mean = karcher_mean(&bundle.srvfs().unwrap(), &MeanOptions::default()).unwrap();
        let before = bundle.profiles.as_ref().unwrap();
        let after: Vec<Vec<f64>> = before.iter().zip(&mean.gammas).map(|(p, g)| warp_profile(p, g).unwrap()).collect();
        let (vb, va) = (profile_variability(before).unwrap(), profile_variability(&after).unwrap());
        before_sum += vb;
        after_sum += va;
        if va < vb {
            wins += 1;
        }
    }
    report(
        9,
        "profile variability drops after alignment",
        wins >= 95,
        &format!("lower after alignment in {wins}/100 (>= 95); mean variability {:.4} -> {:.4}", before_sum / 100.0, after_sum / 100.0),
    );
}

// Files laid out exactly as the writer lays them out, assembled by hand.
fn fixture(entries: &[(&str, &str)], datatype: &str, lines: &[Vec<[f32; 3]>], big_endian: bool) -> Vec<u8> {
    let body = |offset: usize| {
        let mut s = String::from("mrtrix tracks\n");
        for (k, v) in entries {
            s.push_str(&format!("{k}: {v}\n"));
        }
        s.push_str(&format!("datatype: {datatype}\nfile: . {offset}\nEND\n"));
        s
    };
    let mut offset = 0;
    while body(offset).len() != offset {
        offset = body(offset).len();
    }
    let mut out = body(offset).into_bytes();
    let mut push = |p: [f32; 3]| {
        for c in p {
            out.extend_from_slice(&if big_endian { c.to_be_bytes() } else { c.to_le_bytes() });
        }
    };
    for l in lines {
        l.iter().for_each(|&p| push(p));
        push([f32::NAN; 3]);
    }
    push([f32::INFINITY; 3]);
    out
}

#[test]
fn criterion_10_tck_roundtrip() {
    let mut r = rng(110);
    let mut random_lines = |count: usize| -> Vec<Vec<[f32; 3]>> {
        (0..count)
            .map(|_| (0..r.gen_range(2..50)).map(|_| [r.gen(), r.gen::<f32>() * 100.0, -r.gen::<f32>()]).collect())
            .collect()
    };
    let fixtures = vec![
        ("empty", fixture(&[("count", "0")], "Float32LE", &[], false)),
        ("single", fixture(&[("count", "1")], "Float32LE", &random_lines(1), false)),
        ("single-point-pair", fixture(&[], "Float32BE", &[vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]], true)),
        ("many", fixture(&[("count", "40"), ("name", "af_left"), ("step_size", "0.5")], "Float32LE", &random_lines(40), false)),
        ("many-be", fixture(&[("count", "25")], "Float32BE", &random_lines(25), true)),
    ];
    let dir = tempfile::tempdir().unwrap();
    let mut failures = Vec::new();
    for (name, bytes) in &fixtures {
        let path = dir.path().join(format!("{name}.tck"));
        std::fs::write(&path, bytes).unwrap();
        let ok = tractalign::io::read_tck(&path)
            .and_then(|t| {
                let out = dir.path().join(format!("{name}.out.tck"));
                tractalign::io::write_tck(&t, &out)?;
                Ok(std::fs::read(&out).unwrap() == *bytes && to_bytes(&t)? == *bytes)
            })
            .unwrap_or(false);
        if !ok {
            failures.push(name.to_string());
        }
    }

    let good = fixture(&[("count", "1")], "Float32LE", &random_lines(1), false);
    let header_len = good.windows(4).position(|w| w == b"END\n").unwrap() + 4;
    let malformed: Vec<(&str, Vec<u8>, Box<dyn Fn(&Error) -> bool>)> = vec![
        ("bad magic", b"mrtrix trax\nEND\n".to_vec(), Box::new(|e| matches!(e, Error::BadMagic { pos: 0 }))),
        (
            "line without colon",
            b"mrtrix tracks\ncount 1\nEND\n".to_vec(),
            Box::new(|e| matches!(e, Error::MalformedHeader { pos: 14, .. })),
        ),
        (
            "unknown datatype",
            b"mrtrix tracks\ncount: 1\ndatatype: Int8\nfile: . 60\nEND\n".to_vec(),
            Box::new(|e| matches!(e, Error::UnknownDatatype { pos: 23, .. })),
        ),
        (
            "offset past end",
            b"mrtrix tracks\ndatatype: Float32LE\nfile: . 4096\nEND\n".to_vec(),
            Box::new(|e| matches!(e, Error::MissingOffset { pos: 34 })),
        ),
        (
            "no END",
            b"mrtrix tracks\ndatatype: Float32LE\n".to_vec(),
            Box::new(|e| matches!(e, Error::BadMagic { pos: 34 })),
        ),
        (
            "truncated payload",
            good[..header_len + 14].to_vec(),
            Box::new(move |e| matches!(e, Error::TruncatedPayload { pos } if *pos == header_len as u64 + 12)),
        ),
    ];
    for (name, bytes, check) in &malformed {
        match from_bytes(bytes) {
            Err(e) if check(&e) => {}
            other => failures.push(format!("{name}: {other:?}")),
        }
    }
    report(
        10,
        "TCK roundtrip",
        failures.is_empty(),
        &format!(
            "{} byte-exact fixtures, {} malformed fixtures with positioned errors; failures: {failures:?}",
            fixtures.len(),
            malformed.len()
        ),
    );
}

fn run(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_tractalign")).args(args).arg("-q").output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                found.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    found.sort();
    found
}

#[test]
fn criterion_11_parallel_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    let common = ["--fibers", "20", "--samples", "60"];
    run(&[&["synth", "-o", &d("data"), "--count", "4", "--seed", "40"][..], &common].concat());
    run(&[&["mean", &d("data/synthetic_40.json"), "-o", &d("template")][..], &common].concat());
    let subjects = [d("data/synthetic_41.json"), d("data/synthetic_42.json"), d("data/synthetic_43.json")];
    for jobs in ["1", "4"] {
        let out = d(&format!("jobs{jobs}"));
        let mut args = vec!["register", "--template", "", "-o", &out, "--jobs", jobs];
        let template = d("template/synthetic_40_mean.json");
        args[2] = &template;
        args.extend(subjects.iter().map(String::as_str));
        args.extend(common);
        run(&args);
    }
    let (one, four) = (csv_files(&dir.path().join("jobs1")), csv_files(&dir.path().join("jobs4")));
    let names: Vec<&str> = one.iter().map(|(n, _)| n.as_str()).collect();
    let same = !one.is_empty() && one == four;
    report(11, "parallel determinism", same, &format!("CSV outputs {names:?} byte-identical for --jobs 1 and 4: {same}"));
}
