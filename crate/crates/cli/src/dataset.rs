//! Simulated paired datasets: `(x_i, y_i = N(A_ξᵢ(x_i)), ξ_i)` on disk.
//!
//! Random streams for sample `i` of `N` under the master seed:
//! `i` for the operator parameters, `N + i` for the noise, `2N + i` for
//! random phantoms. Reconstruction and losses use `3N + i` and `4N + i`.

use std::fs;
use std::path::{Path, PathBuf};

use invkit::imageio::{read_image, write_image};
use invkit::physics::{Physics, PhysicsSpec};
use invkit::{RngState, Tensor};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{read_json, ExperimentConfig, Source};
use crate::error::{io_err, CliError, Result};
use crate::phantoms;

pub const MANIFEST: &str = "manifest.json";
const FIXED_PHYSICS: &str = "physics.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Params = 0,
    Noise = 1,
    Phantom = 2,
    Method = 3,
    Loss = 4,
}

/// Child stream of `kind` for sample `i` of `n`.
pub fn stream(seed: u64, kind: Stream, n: usize, i: usize) -> RngState {
    RngState::derive_child(seed, (kind as usize * n + i) as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamsPolicy {
    /// One operator, drawn from the stream of sample 0, for every sample.
    Fixed,
    PerSample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: usize,
    pub x: String,
    /// Complex measurements live in `_re` / `_im` files next to this name.
    pub y: String,
    /// Operator description; `None` under the fixed policy.
    pub params: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub descriptor: String,
    pub params_policy: ParamsPolicy,
    /// Operator description shared by all samples under the fixed policy.
    pub physics: Option<String>,
    pub seed: u64,
    pub count: usize,
    pub samples: Vec<SampleEntry>,
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::config("dataset.source.directory", format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(io_err(dir))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("pgm" | "pfm")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Ground-truth images, rounded to the `f32` precision they are stored in.
fn load_sources(cfg: &ExperimentConfig) -> Result<Vec<Tensor>> {
    let images = match &cfg.dataset.source {
        Source::Phantom(kind) => {
            let n = cfg.dataset.count.unwrap_or(0);
            let [h, w] = cfg.dataset.shape;
            (0..n)
                .map(|i| phantoms::generate(*kind, h, w, &mut stream(cfg.seed, Stream::Phantom, n, i)))
                .collect::<invkit::Result<Vec<_>>>()?
        }
        Source::Directory(dir) => {
            let files = image_files(&cfg.resolve(dir))?;
            let n = cfg.dataset.count.unwrap_or(files.len());
            if n == 0 || files.len() < n {
                return Err(CliError::config(
                    "dataset.count",
                    format!("{} holds {} images, {n} requested", dir.display(), files.len()),
                ));
            }
            let mut out = Vec::with_capacity(n);
            for f in &files[..n] {
                let x = read_image(f)?;
                if x.shape().len() != 2 {
                    return Err(CliError::config(
                        "dataset.source.directory",
                        format!("{}: expected a grayscale image, got shape {:?}", f.display(), x.shape()),
                    ));
                }
                out.push(x);
            }
            out
        }
    };
    Ok(images.into_iter().map(|x| x.map_real(|v| v as f32 as f64)).collect())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Simulates the dataset described by `cfg` into its dataset directory.
pub fn generate(cfg: &ExperimentConfig) -> Result<DatasetManifest> {
    let dir = cfg.dataset_dir();
    let samples_dir = dir.join("samples");
    fs::create_dir_all(&samples_dir).map_err(io_err(&samples_dir))?;
    let images = load_sources(cfg)?;
    let n = images.len();
    let policy = if cfg.physics.per_sample {
        ParamsPolicy::PerSample
    } else {
        ParamsPolicy::Fixed
    };
    let build = |i: usize, x: &Tensor| -> Result<Physics> {
        cfg.physics
            .build(x.shape(), &mut stream(cfg.seed, Stream::Params, n, i))
            .map_err(|e| CliError::config("physics", e.to_string()))
    };
    let fixed = match policy {
        ParamsPolicy::Fixed => {
            let p = build(0, &images[0])?;
            write_json(&p.spec(), &dir.join(FIXED_PHYSICS))?;
            Some(p)
        }
        ParamsPolicy::PerSample => None,
    };
    let samples = images
        .par_iter()
        .enumerate()
        .map(|(i, x)| -> Result<SampleEntry> {
            let own;
            let physics = match &fixed {
                Some(p) => p,
                None => {
                    own = build(i, x)?;
                    &own
                }
            };
            let input = x.to_dtype(physics.domain().dtype);
            let y = physics.forward(&input, &mut stream(cfg.seed, Stream::Noise, n, i))?;
            let entry = SampleEntry {
                id: i,
                x: format!("samples/{i}_x.pfm"),
                y: format!("samples/{i}_y.pfm"),
                params: fixed.is_none().then(|| format!("samples/{i}_params.json")),
            };
            write_image(x, dir.join(&entry.x))?;
            // Vector measurements are stored as a single-row image.
            let y = match y.shape() {
                [m] => y.clone().reshape(vec![1, *m])?,
                _ => y,
            };
            write_image(&y, dir.join(&entry.y))?;
            if let Some(p) = &entry.params {
                write_json(&physics.spec(), &dir.join(p))?;
            }
            Ok(entry)
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        name: cfg.name.clone(),
        descriptor: cfg.physics.descriptor().to_string(),
        params_policy: policy,
        physics: fixed.is_some().then(|| FIXED_PHYSICS.to_string()),
        seed: cfg.seed,
        count: n,
        samples,
    };
    write_json(&manifest, &dir.join(MANIFEST))?;
    Ok(manifest)
}

/// A dataset read back from disk.
#[derive(Debug)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
    fixed: Option<Physics>,
}

pub struct Sample {
    pub id: usize,
    pub x: Tensor,
    pub y: Tensor,
    pub physics: Physics,
}

fn load_physics(path: &Path) -> Result<Physics> {
    let spec: PhysicsSpec = read_json(path)?;
    Ok(Physics::from_spec(spec)?)
}

impl Dataset {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        let manifest: DatasetManifest = read_json(&dir.join(MANIFEST))?;
        let fixed = match &manifest.physics {
            Some(p) => Some(load_physics(&dir.join(p))?),
            None => None,
        };
        Ok(Dataset { dir, manifest, fixed })
    }

    pub fn physics(&self, entry: &SampleEntry) -> Result<Physics> {
        match (&self.fixed, &entry.params) {
            (_, Some(p)) => load_physics(&self.dir.join(p)),
            (Some(p), None) => Ok(p.clone()),
            (None, None) => Err(CliError::config(
                format!("samples[{}].params", entry.id),
                "sample has no operator description and the dataset no shared one",
            )),
        }
    }

    pub fn load(&self, entry: &SampleEntry) -> Result<Sample> {
        let physics = self.physics(entry)?;
        let mut y = read_image(self.dir.join(&entry.y))?;
        let range = &physics.range().shape;
        if y.shape() != range.as_slice() && y.len() == range.iter().product::<usize>() {
            y = y.reshape(range.clone())?;
        }
        Ok(Sample {
            id: entry.id,
            x: read_image(self.dir.join(&entry.x))?,
            y,
            physics,
        })
    }
}
