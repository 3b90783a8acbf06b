//! Resolved run configuration, shared by the flag parser and `--config` files.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use tractalign::tangent::BasisMode;
use tractalign::transport::{Rescale, TransportMode, DEFAULT_STEPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Synth,
    Convert,
    Mean,
    Register,
    Eval,
}

/// `exact` or `stepwise:k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportSpec {
    Exact,
    Stepwise(usize),
}

impl fmt::Display for TransportSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransportSpec::Exact => write!(f, "exact"),
            TransportSpec::Stepwise(k) => write!(f, "stepwise:{k}"),
        }
    }
}

impl FromStr for TransportSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(TransportSpec::Exact),
            "stepwise" => Ok(TransportSpec::Stepwise(DEFAULT_STEPS)),
            _ => {
                let k = s
                    .strip_prefix("stepwise:")
                    .ok_or_else(|| format!("unknown transport {s:?}; expected exact or stepwise:K"))?;
                k.parse()
                    .map(TransportSpec::Stepwise)
                    .map_err(|_| format!("bad step count in {s:?}"))
            }
        }
    }
}

impl Serialize for TransportSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TransportSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Command,
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    #[serde(default)]
    pub template: Option<PathBuf>,
    pub output: PathBuf,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_fibers")]
    pub fibers: usize,
    /// `None` means `min(fibers, 20)`.
    #[serde(default)]
    pub basis_size: Option<usize>,
    #[serde(default = "default_transport")]
    pub transport: TransportSpec,
    /// Stepwise transport rescales to the geodesic length instead of each
    /// vector's own norm.
    #[serde(default)]
    pub literal_rescale: bool,
    /// Use the projected Fourier elements without orthonormalizing them.
    #[serde(default)]
    pub raw_basis: bool,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for independent subjects.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    /// Bundles to generate (`synth`).
    #[serde(default = "default_count")]
    pub count: usize,
    /// Per-streamline profile CSV attached on `convert`.
    #[serde(default)]
    pub profiles: Option<PathBuf>,
}

fn default_samples() -> usize {
    100
}
fn default_fibers() -> usize {
    50
}
fn default_transport() -> TransportSpec {
    TransportSpec::Exact
}
fn default_jobs() -> usize {
    1
}
fn default_count() -> usize {
    1
}

impl RunConfig {
    pub fn new(subcommand: Command, output: PathBuf) -> Self {
        RunConfig {
            subcommand,
            inputs: Vec::new(),
            template: None,
            output,
            samples: default_samples(),
            fibers: default_fibers(),
            basis_size: None,
            transport: default_transport(),
            literal_rescale: false,
            raw_basis: false,
            seed: 0,
            jobs: default_jobs(),
            count: default_count(),
            profiles: None,
        }
    }

    /// Usage-level checks, done before any work.
    pub fn validate(&self) -> Result<(), String> {
        if self.samples < 3 {
            return Err("samples must be at least 3".into());
        }
        if self.fibers == 0 {
            return Err("fibers must be at least 1".into());
        }
        if self.basis_size == Some(0) {
            return Err("basis size must be at least 1".into());
        }
        if self.jobs == 0 {
            return Err("jobs must be at least 1".into());
        }
        if self.count == 0 {
            return Err("count must be at least 1".into());
        }
        match self.transport {
            TransportSpec::Stepwise(k) if k < 2 => return Err("stepwise transport needs at least 2 steps".into()),
            TransportSpec::Exact if self.literal_rescale => {
                return Err("literal rescale only applies to stepwise transport".into())
            }
            _ => {}
        }
        let needs_inputs = match self.subcommand {
            Command::Synth => false,
            Command::Mean => {
                if self.inputs.len() != 1 {
                    return Err("mean takes exactly one input bundle".into());
                }
                true
            }
            Command::Convert | Command::Register | Command::Eval => true,
        };
        if needs_inputs && self.inputs.is_empty() {
            return Err(format!("{:?} needs at least one input", self.subcommand).to_lowercase());
        }
        if self.subcommand == Command::Synth && self.inputs.len() > 1 {
            return Err("synth takes at most one spec file".into());
        }
        if self.profiles.is_some() && !(self.subcommand == Command::Convert && self.inputs.len() == 1) {
            return Err("profiles apply only to convert with a single input".into());
        }
        if matches!(self.subcommand, Command::Convert | Command::Mean | Command::Register) {
            for p in &self.inputs {
                let ext = p.extension().and_then(|e| e.to_str()).unwrap_or("");
                if !ext.eq_ignore_ascii_case("tck") && !ext.eq_ignore_ascii_case("json") {
                    return Err(format!("input {} is neither .tck nor .json", p.display()));
                }
            }
        }
        if self.subcommand == Command::Register && self.template.is_none() {
            return Err("register needs a template".into());
        }
        let mut paths: Vec<&PathBuf> = self.inputs.iter().collect();
        paths.extend(&self.template);
        paths.extend(&self.profiles);
        for p in paths {
            if !p.is_file() {
                return Err(format!("input {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    pub fn transport_mode(&self) -> TransportMode {
        match self.transport {
            TransportSpec::Exact => TransportMode::Exact,
            TransportSpec::Stepwise(steps) => TransportMode::Stepwise {
                steps,
                rescale: if self.literal_rescale {
                    Rescale::PathLength
                } else {
                    Rescale::Original
                },
            },
        }
    }

    pub fn basis_mode(&self) -> BasisMode {
        if self.raw_basis {
            BasisMode::RawProjected
        } else {
            BasisMode::Orthonormal
        }
    }
}
