//! Experiment configuration (JSON).
//!
//! Relative paths are resolved against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use invkit::fidelity::{DataFidelity, NoiseModel};
use invkit::losses::{DEFAULT_R2R_ALPHA, DEFAULT_SPLIT_RATIO};
use invkit::metrics::{Metric, MetricConfig};
use invkit::optim::{AlgoConfig, Backprojection, Regularizer};
use invkit::physics::{self, generators, Physics};
use invkit::priors::{Denoiser, Prior};
use invkit::sampling::ChainConfig;
use invkit::transforms::TransformKind;
use invkit::RngState;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};
use crate::phantoms::PhantomKind;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Master seed; every random stream of a run derives from it.
    pub seed: u64,
    /// Output directory (reconstructions and `results.csv`).
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub dataset: DatasetConfig,
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub method: Option<MethodConfig>,
    #[serde(default)]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub metric_options: MetricConfig,
    #[serde(default)]
    pub losses: Vec<LossConfig>,
    /// Adds measured wall time to `results.csv`; off by default because it
    /// makes the file differ between otherwise identical runs.
    #[serde(default)]
    pub record_wall_time: bool,
    /// Directory of the config file; relative paths hang off it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Phantom(PhantomKind),
    /// Every `.pgm` / `.pfm` file in the directory, in name order.
    Directory(PathBuf),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: Source,
    /// Number of samples; all files of a directory source by default.
    #[serde(default)]
    pub count: Option<usize>,
    /// Phantom size `[H, W]`.
    #[serde(default = "default_shape")]
    pub shape: [usize; 2],
    /// Dataset location; `<output>/dataset` by default.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

fn default_shape() -> [usize; 2] {
    [64, 64]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Gaussian { sigma: f64, side: usize },
    Motion { length: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnglesConfig {
    /// Evenly spaced over `[0°, 180°)`.
    Count(usize),
    Degrees(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "descriptor", rename_all = "snake_case")]
pub enum OperatorConfig {
    Denoising,
    Inpainting { density: f64 },
    Blur { kernel: KernelConfig },
    Downsampling {
        factor: usize,
        #[serde(default)]
        antialias: f64,
    },
    Mri { acceleration: f64, center_fraction: f64 },
    Tomography { angles: AnglesConfig },
    CompressedSensing { m: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConfig {
    #[serde(flatten)]
    pub operator: OperatorConfig,
    #[serde(default)]
    pub noise: NoiseModel,
    /// Draw fresh operator parameters for every sample instead of sharing
    /// those of sample 0.
    #[serde(default)]
    pub per_sample: bool,
}

impl PhysicsConfig {
    pub fn descriptor(&self) -> &'static str {
        match self.operator {
            OperatorConfig::Denoising => "denoising",
            OperatorConfig::Inpainting { .. } => "inpainting",
            OperatorConfig::Blur { .. } => "blur",
            OperatorConfig::Downsampling { .. } => "downsampling",
            OperatorConfig::Mri { .. } => "mri",
            OperatorConfig::Tomography { .. } => "tomography",
            OperatorConfig::CompressedSensing { .. } => "compressed_sensing",
        }
    }

    /// Builds the operator for an image of `shape`, drawing generated
    /// parameters from `rng`.
    pub fn build(&self, shape: &[usize], rng: &mut RngState) -> invkit::Result<Physics> {
        let p = match &self.operator {
            OperatorConfig::Denoising => physics::make_denoising(shape),
            OperatorConfig::Inpainting { density } => {
                physics::make_inpainting(generators::bernoulli_mask(shape, *density, rng)?)?
            }
            OperatorConfig::Blur { kernel } => {
                let k = match kernel {
                    KernelConfig::Gaussian { sigma, side } => generators::gaussian_kernel(*sigma, *side)?,
                    KernelConfig::Motion { length } => generators::motion_kernel(*length, rng)?,
                };
                physics::make_blur(k, shape)?
            }
            OperatorConfig::Downsampling { factor, antialias } => physics::make_downsampling(*factor, *antialias, shape)?,
            OperatorConfig::Mri {
                acceleration,
                center_fraction,
            } => physics::make_mri(generators::cartesian_mri_mask(shape, *acceleration, *center_fraction, rng)?)?,
            OperatorConfig::Tomography { angles } => {
                let angles = match angles {
                    AnglesConfig::Count(n) => physics::uniform_angles(*n),
                    AnglesConfig::Degrees(a) => a.clone(),
                };
                physics::make_tomography(angles, shape)?
            }
            OperatorConfig::CompressedSensing { m } => physics::make_compressed_sensing_with_shape(*m, shape, rng)?,
        };
        p.with_noise(self.noise.clone())
    }
}

fn default_fidelity() -> DataFidelity {
    DataFidelity::l2()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodConfig {
    /// Iterative solution of `min f(y, Ax) + g(x)`.
    Variational {
        #[serde(default = "default_fidelity")]
        fidelity: DataFidelity,
        #[serde(default)]
        regularizer: Regularizer,
        algorithm: AlgoConfig,
    },
    /// `D_σ(Aᵀy)` or `D_σ(A⁺y)`.
    ArtifactRemoval {
        #[serde(default)]
        denoiser: Denoiser,
        #[serde(default)]
        sigma: f64,
        #[serde(default)]
        mode: Backprojection,
    },
    /// Posterior mean of an unadjusted Langevin chain.
    Ula {
        #[serde(default = "default_fidelity")]
        fidelity: DataFidelity,
        prior: Prior,
        chain: ChainConfig,
    },
}

impl MethodConfig {
    /// Value of the `method` column.
    pub fn label(&self) -> String {
        match self {
            MethodConfig::Variational { algorithm, .. } => {
                format!("variational:{}", serde_name(&algorithm.algorithm))
            }
            MethodConfig::ArtifactRemoval { mode, .. } => format!("artifact_removal:{}", serde_name(mode)),
            MethodConfig::Ula { .. } => "ula".into(),
        }
    }
}

fn serde_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => "?".into(),
    }
}

fn default_alpha() -> f64 {
    DEFAULT_R2R_ALPHA
}

fn default_draws() -> usize {
    1
}

fn default_split() -> f64 {
    DEFAULT_SPLIT_RATIO
}

fn default_probes() -> usize {
    1
}

fn all_transforms() -> Vec<TransformKind> {
    vec![TransformKind::Rot90, TransformKind::Flip, TransformKind::Shift]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossConfig {
    SupMse,
    /// Noise level defaults to the physics' Gaussian σ.
    Sure {
        #[serde(default)]
        sigma: Option<f64>,
        #[serde(default = "default_probes")]
        probes: usize,
        #[serde(default)]
        probe_step: Option<f64>,
    },
    R2r {
        #[serde(default)]
        sigma: Option<f64>,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_draws")]
        draws: usize,
    },
    Splitting {
        #[serde(default = "default_split")]
        split_ratio: f64,
    },
    Ei {
        #[serde(default = "all_transforms")]
        transforms: Vec<TransformKind>,
    },
}

impl LossConfig {
    pub fn name(&self) -> &'static str {
        match self {
            LossConfig::SupMse => "sup_mse",
            LossConfig::Sure { .. } => "sure",
            LossConfig::R2r { .. } => "r2r",
            LossConfig::Splitting { .. } => "splitting",
            LossConfig::Ei { .. } => "ei",
        }
    }
}

/// Parses JSON, reporting syntax errors with line and column and schema
/// errors with the offending field path.
pub fn parse_json<T: DeserializeOwned>(text: &str, file: &Path) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        match inner.classify() {
            serde_json::error::Category::Data => CliError::config(
                path,
                format!("{} ({}:{}:{})", strip_position(&inner), file.display(), inner.line(), inner.column()),
            ),
            _ => CliError::Json {
                file: file.to_path_buf(),
                line: inner.line(),
                column: inner.column(),
                message: strip_position(&inner),
            },
        }
    })?;
    de.end().map_err(|inner| CliError::Json {
        file: file.to_path_buf(),
        line: inner.line(),
        column: inner.column(),
        message: strip_position(&inner),
    })?;
    Ok(value)
}

/// serde_json appends " at line L column C"; we report those separately.
fn strip_position(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(i) => s[..i].to_string(),
        None => s,
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_json(&text, path)
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| CliError::Config {
            path: path.display().to_string(),
            message: format!("cannot read config: {source}"),
        })?;
        let mut cfg: ExperimentConfig = parse_json(&text, path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output)
    }

    pub fn dataset_dir(&self) -> PathBuf {
        match &self.dataset.dir {
            Some(d) => self.resolve(d),
            None => self.output_dir().join("dataset"),
        }
    }

    /// Checks that do not need the data: counts, shapes, and whether the
    /// physics can be built at all.
    pub fn validate(&self) -> Result<()> {
        if let Source::Phantom(_) = self.dataset.source {
            match self.dataset.count {
                None => return Err(CliError::config("dataset.count", "phantom datasets need a sample count")),
                Some(0) => return Err(CliError::config("dataset.count", "must be at least 1")),
                _ => {}
            }
            let [h, w] = self.dataset.shape;
            if h == 0 || w == 0 {
                return Err(CliError::config("dataset.shape", "dimensions must be positive"));
            }
            let mut rng = RngState::new(self.seed);
            self.physics
                .build(&self.dataset.shape, &mut rng)
                .map_err(|e| CliError::config("physics", e.to_string()))?;
        }
        if self.metrics.is_empty() && self.losses.is_empty() && self.method.is_some() {
            return Err(CliError::config("metrics", "nothing to report: no metrics and no losses"));
        }
        if !(self.metric_options.data_range > 0.0) {
            return Err(CliError::config("metric_options.data_range", "must be positive"));
        }
        Ok(())
    }
}
