//! The five subcommands. Each reads a validated [`RunConfig`] and writes data
//! files into its output directory; logging goes to standard error.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::{error, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tractalign::io::archive::{load_archive, save_archive, BundleArchive};
use tractalign::io::profiles::{load_profiles, save_profiles};
use tractalign::io::{bundle_to_tck, load_bundle, read_tck, synth_bundle, tck_to_bundle, write_tck, SynthSpec};
use tractalign::mean::MeanOptions;
use tractalign::metrics::{compare_alignments, profile_variability, warp_profile, AlignedPair};
use tractalign::registration::{
    code_bundle, hard_align, rigid_align, soft_align, BundleCode, CodeOptions, DistanceOptions, HardAlignment,
    SoftAlignment,
};
use tractalign::{Bundle, Diffeo, Fiber};

use crate::config::{Command, RunConfig};
use crate::plot::{grouped_bars, heatmaps, warp_panels, Bar, WarpPanel};

/// Outcome of a command that ran to completion; per-subject failures make
/// it `PartialFailure`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    PartialFailure,
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
    write_json(&cfg.output.join("run_config.json"), cfg)?;
    match cfg.subcommand {
        Command::Synth => synth(cfg),
        Command::Convert => convert(cfg),
        Command::Mean => mean(cfg),
        Command::Register => register(cfg),
        Command::Eval => eval(cfg),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("bundle")
        .to_string()
}

fn is_tck(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("tck"))
}

fn synth(cfg: &RunConfig) -> Result<Outcome> {
    let spec = match cfg.inputs.first() {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<SynthSpec>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SynthSpec {
            fibers: cfg.fibers,
            samples: cfg.samples,
            profiles: true,
            ..SynthSpec::default()
        },
    };
    for i in 0..cfg.count as u64 {
        let seed = cfg.seed + i;
        let bundle = synth_bundle(&spec, seed)?;
        let name = format!("{}_{seed}", spec.name);
        save_archive(
            &BundleArchive {
                bundle: bundle.clone(),
                code: None,
            },
            cfg.output.join(format!("{name}.json")),
        )?;
        write_tck(&bundle_to_tck(&bundle)?, cfg.output.join(format!("{name}.tck")))?;
        if let Some(ps) = &bundle.profiles {
            save_profiles(ps, cfg.output.join(format!("{name}.csv")))?;
        }
        info!("wrote {name} ({} fibers)", bundle.len());
    }
    Ok(Outcome::Success)
}

fn convert(cfg: &RunConfig) -> Result<Outcome> {
    for input in &cfg.inputs {
        let name = stem(input);
        if is_tck(input) {
            let mut bundle = tck_to_bundle(&read_tck(input)?, &name)?;
            bundle.provenance.source = Some(input.display().to_string());
            if let Some(p) = &cfg.profiles {
                bundle = bundle.with_profiles(load_profiles(p)?)?;
            }
            let out = cfg.output.join(format!("{name}.json"));
            save_archive(&BundleArchive { bundle, code: None }, &out)?;
            info!("{} -> {}", input.display(), out.display());
        } else {
            let archive = load_archive(input)?;
            let out = cfg.output.join(format!("{name}.tck"));
            write_tck(&bundle_to_tck(&archive.bundle)?, &out)?;
            if let Some(ps) = &archive.bundle.profiles {
                save_profiles(ps, cfg.output.join(format!("{name}.csv")))?;
            }
            info!("{} -> {}", input.display(), out.display());
        }
    }
    Ok(Outcome::Success)
}

fn code_options(cfg: &RunConfig) -> CodeOptions {
    CodeOptions {
        basis_size: cfg.basis_size,
        basis_mode: cfg.basis_mode(),
        mean: MeanOptions::default(),
    }
}

#[derive(Serialize)]
struct MeanSummary<'a> {
    name: &'a str,
    fibers: usize,
    samples: usize,
    iterations: usize,
    converged: bool,
    final_gradient_norm: f64,
    objective: &'a [f64],
    basis_requested: usize,
    basis_size: usize,
    basis_dropped: &'a [usize],
    basis_id: &'a str,
    profile_variability_before: Option<f64>,
    profile_variability_after: Option<f64>,
}

/// Profiles re-sampled by each fiber's warp onto the mean.
fn aligned_profiles(profiles: &[Vec<f64>], gammas: &[Diffeo]) -> Result<Vec<Vec<f64>>> {
    profiles
        .iter()
        .zip(gammas)
        .map(|(p, g)| Ok(warp_profile(p, g)?))
        .collect()
}

fn mean(cfg: &RunConfig) -> Result<Outcome> {
    let input = &cfg.inputs[0];
    let bundle = load_bundle(input, cfg.samples, Some(cfg.fibers), cfg.seed)?;
    let name = stem(input);
    info!("{name}: {} fibers, computing mean", bundle.len());
    let (code, result) = code_bundle(&bundle, &code_options(cfg))?;
    if !result.converged {
        warn!(
            "{name}: mean stopped after {} iterations with gradient norm {:.3e}",
            result.iterations, result.final_gradient_norm
        );
    }
    let gammas: Vec<&[f64]> = result.gammas.iter().map(|g| g.values()).collect();
    write_text(
        &cfg.output.join(format!("{name}_gammas.svg")),
        &warp_panels(
            &format!("{name}: warps onto the mean"),
            &[WarpPanel {
                title: "γ per fiber",
                curves: gammas,
                emphasis: None,
            }],
        ),
    )?;

    let mut variability = (None, None);
    if let Some(ps) = &bundle.profiles {
        let after = aligned_profiles(ps, &result.gammas)?;
        if ps.len() > 1 {
            variability = (Some(profile_variability(ps)?), Some(profile_variability(&after)?));
        }
        save_profiles(&after, cfg.output.join(format!("{name}_profiles_aligned.csv")))?;
        write_text(
            &cfg.output.join(format!("{name}_profiles.svg")),
            &heatmaps(
                &format!("{name}: profiles"),
                &[("initial (rigid)", ps), ("re-parameterized", &after)],
            ),
        )?;
    }

    let summary = MeanSummary {
        name: &name,
        fibers: bundle.len(),
        samples: cfg.samples,
        iterations: result.iterations,
        converged: result.converged,
        final_gradient_norm: result.final_gradient_norm,
        objective: &result.objective,
        basis_requested: code.basis.requested(),
        basis_size: code.basis.len(),
        basis_dropped: code.basis.dropped(),
        basis_id: code.basis.id(),
        profile_variability_before: variability.0,
        profile_variability_after: variability.1,
    };
    write_json(&cfg.output.join(format!("{name}_mean_summary.json")), &summary)?;
    let out = cfg.output.join(format!("{name}_mean.json"));
    save_archive(
        &BundleArchive {
            bundle,
            code: Some(code),
        },
        &out,
    )?;
    info!("wrote {}", out.display());
    Ok(Outcome::Success)
}

/// Paths in a manifest are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub template: PathBuf,
    pub pairs: Vec<ManifestPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestPair {
    pub pair_id: String,
    pub tract_name: String,
    pub subject: PathBuf,
    pub rigid: PathBuf,
    pub soft: PathBuf,
    pub hard: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub pair_id: String,
    pub tract_name: String,
    pub distance: f64,
    pub mean_term: f64,
    pub coefficient_term: f64,
    pub hard_pre_mean: f64,
    pub hard_post_mean: f64,
}

#[derive(Serialize)]
struct AlignmentRecord<'a> {
    pair_id: &'a str,
    tract_name: &'a str,
    distance: f64,
    mean_term: f64,
    coefficient_term: f64,
    mean_gamma: &'a [f64],
    mean_rotation: [[f64; 3]; 3],
    correspondence: &'a [usize],
    pairings: &'a [usize],
    pre_distances: &'a [f64],
    post_distances: &'a [f64],
    rigid_rotation: [[f64; 3]; 3],
    rigid_translation: [f64; 3],
}

struct Template {
    bundle: Bundle,
    code: BundleCode,
}

fn mean_of(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn derived(subject: &Bundle, fibers: Vec<Fiber>) -> Result<Bundle> {
    let mut b = Bundle::new(subject.name.clone(), fibers)?;
    b.provenance = subject.provenance.clone();
    Ok(b)
}

fn register_one(cfg: &RunConfig, input: &Path, pair_id: &str, template: &Template) -> Result<(DistanceRow, ManifestPair)> {
    let subject = load_bundle(input, cfg.samples, Some(cfg.fibers), cfg.seed)?;
    let (code, _) = code_bundle(&subject, &code_options(cfg))?;
    let opts = DistanceOptions {
        transport: cfg.transport_mode(),
        align_iters: None,
    };
    let soft: SoftAlignment = soft_align(&code, &template.code, &opts)?;
    let hard: HardAlignment = hard_align(&soft, &subject, &template.bundle, &template.code)?;
    let (rigid, fit) = rigid_align(&subject, &template.bundle)?;

    let dir = cfg.output.join(pair_id);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let save = |file: &str, bundle: Bundle, code: Option<BundleCode>| -> Result<PathBuf> {
        save_archive(&BundleArchive { bundle, code }, dir.join(file))?;
        Ok(Path::new(pair_id).join(file))
    };
    let mut soft_bundle = derived(&subject, soft.reconstructed.clone())?;
    soft_bundle.ids = template.code.fiber_ids.clone();
    let entry = ManifestPair {
        pair_id: pair_id.to_string(),
        tract_name: subject.name.clone(),
        subject: save("subject.json", subject.clone(), Some(code))?,
        rigid: save("rigid.json", rigid, None)?,
        soft: save("soft.json", soft_bundle, None)?,
        hard: save("hard.json", derived(&subject, hard.warped_fibers.clone())?, None)?,
    };
    write_json(
        &dir.join("alignment.json"),
        &AlignmentRecord {
            pair_id,
            tract_name: &subject.name,
            distance: soft.distance,
            mean_term: soft.mean_term,
            coefficient_term: soft.coefficient_term,
            mean_gamma: soft.mean_gamma.values(),
            mean_rotation: soft.mean_rotation.into(),
            correspondence: &soft.correspondence,
            pairings: &hard.pairings,
            pre_distances: &hard.pre_distances,
            post_distances: &hard.post_distances,
            rigid_rotation: fit.rotation.into(),
            rigid_translation: fit.translation,
        },
    )?;
    let pair_gammas: Vec<&[f64]> = hard.per_pair_gammas.iter().map(|g| g.values()).collect();
    write_text(
        &dir.join("gammas.svg"),
        &warp_panels(
            &format!("{pair_id}: warping functions against rigid alignment"),
            &[
                WarpPanel {
                    title: "mean-to-mean γ",
                    curves: Vec::new(),
                    emphasis: Some(soft.mean_gamma.values()),
                },
                WarpPanel {
                    title: "per-pair γ (hard alignment)",
                    curves: pair_gammas,
                    emphasis: Some(soft.mean_gamma.values()),
                },
            ],
        ),
    )?;
    let row = DistanceRow {
        pair_id: pair_id.to_string(),
        tract_name: subject.name.clone(),
        distance: soft.distance,
        mean_term: soft.mean_term,
        coefficient_term: soft.coefficient_term,
        hard_pre_mean: mean_of(&hard.pre_distances),
        hard_post_mean: mean_of(&hard.post_distances),
    };
    Ok((row, entry))
}

/// Subject identifiers: file stems, made unique by a numeric suffix.
fn pair_ids(inputs: &[PathBuf]) -> Vec<String> {
    let mut seen = HashSet::new();
    inputs
        .iter()
        .map(|p| {
            let base = stem(p);
            let mut id = base.clone();
            let mut k = 1;
            while !seen.insert(id.clone()) {
                k += 1;
                id = format!("{base}-{k}");
            }
            id
        })
        .collect()
}

fn register(cfg: &RunConfig) -> Result<Outcome> {
    let template_path = cfg.template.as_ref().expect("validated");
    let archive = load_archive(template_path)?;
    let code = archive
        .code
        .ok_or_else(|| anyhow!("{} has no bundle code; run `mean` on it first", template_path.display()))?;
    let template = Template {
        bundle: archive.bundle,
        code,
    };
    let ids = pair_ids(&cfg.inputs);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .context("starting worker threads")?;
    let results: Vec<Result<(DistanceRow, ManifestPair)>> = pool.install(|| {
        cfg.inputs
            .par_iter()
            .zip(&ids)
            .map(|(input, id)| {
                info!("registering {id}");
                register_one(cfg, input, id, &template).with_context(|| format!("subject {}", input.display()))
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    let mut failed = 0;
    for r in results {
        match r {
            Ok((row, pair)) => {
                rows.push(row);
                pairs.push(pair);
            }
            Err(e) => {
                failed += 1;
                error!("{e:#}");
            }
        }
    }
    let mut w = csv::Writer::from_path(cfg.output.join("distances.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let template_abs = fs::canonicalize(template_path).unwrap_or_else(|_| template_path.clone());
    write_json(
        &cfg.output.join("registrations.json"),
        &Manifest {
            template: template_abs,
            pairs,
        },
    )?;
    if failed > 0 {
        error!("{failed} of {} subjects failed", cfg.inputs.len());
        return Ok(Outcome::PartialFailure);
    }
    Ok(Outcome::Success)
}

fn load_bundle_file(path: &Path) -> Result<Bundle> {
    if !path.is_file() {
        bail!("missing file {}", path.display());
    }
    Ok(load_archive(path)?.bundle)
}

fn eval(cfg: &RunConfig) -> Result<Outcome> {
    let mut pairs = Vec::new();
    for manifest_path in &cfg.inputs {
        let text = fs::read_to_string(manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?;
        let manifest: Manifest =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", manifest_path.display()))?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let template = load_bundle_file(&base.join(&manifest.template))?;
        if manifest.pairs.is_empty() {
            bail!("{} lists no registered pairs", manifest_path.display());
        }
        for p in &manifest.pairs {
            pairs.push(AlignedPair {
                pair_id: p.pair_id.clone(),
                template: template.clone(),
                rigid: load_bundle_file(&base.join(&p.rigid)).with_context(|| format!("pair {}", p.pair_id))?,
                soft: load_bundle_file(&base.join(&p.soft)).with_context(|| format!("pair {}", p.pair_id))?,
            });
        }
    }
    let report = compare_alignments(&pairs)?;
    report.save_csv(cfg.output.join("eval.csv"))?;
    write_json(&cfg.output.join("eval_summary.json"), &report.tracts)?;
    let groups: Vec<(String, Vec<Bar>)> = report
        .tracts
        .iter()
        .map(|t| {
            (
                t.tract_name.clone(),
                vec![
                    Bar {
                        label: "rigid".into(),
                        mean: t.rigid.mean,
                        sd: t.rigid.sd,
                    },
                    Bar {
                        label: "soft".into(),
                        mean: t.soft.mean,
                        sd: t.soft.sd,
                    },
                ],
            )
        })
        .collect();
    write_text(
        &cfg.output.join("hausdorff.svg"),
        &grouped_bars("Hausdorff distance to template", "distance", &groups),
    )?;
    for t in &report.tracts {
        info!(
            "{}: rigid {:.3} ± {:.3}, soft {:.3} ± {:.3} over {} pairs",
            t.tract_name, t.rigid.mean, t.rigid.sd, t.soft.mean, t.soft.sd, t.rigid.count
        );
    }
    Ok(Outcome::Success)
}
