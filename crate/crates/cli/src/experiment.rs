//! Running a reconstruction method over a dataset and tabulating metrics
//! and losses.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use invkit::imageio::write_image;
use invkit::losses::{self, SureOptions};
use invkit::metrics::{format_value, MetricConfig};
use invkit::optim::{self, artifact_removal, Reconstructor};
use invkit::physics::Physics;
use invkit::sampling::ula_sample;
use invkit::transforms::random_element;
use invkit::{RngState, Tensor};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, LossConfig, MethodConfig};
use crate::dataset::{self, stream, Dataset, Stream, MANIFEST};
use crate::error::{io_err, CliError, Result};

pub const RESULTS: &str = "results.csv";

/// A configured method as a [`Reconstructor`]. Sampling methods restart
/// their chain from `seed` on every call, so repeated calls agree.
pub struct Method<'a> {
    pub config: &'a MethodConfig,
    pub seed: u64,
}

impl Method<'_> {
    /// Reconstruction plus, for samplers, the per-pixel posterior variance.
    pub fn run(&self, y: &Tensor, physics: &Physics) -> invkit::Result<(Tensor, Option<Tensor>)> {
        match self.config {
            MethodConfig::Variational {
                fidelity,
                regularizer,
                algorithm,
            } => Ok((optim::reconstruct(y, physics, fidelity, regularizer, algorithm)?.0, None)),
            MethodConfig::ArtifactRemoval { denoiser, sigma, mode } => {
                Ok((artifact_removal(denoiser, y, physics, *sigma, *mode)?, None))
            }
            MethodConfig::Ula { fidelity, prior, chain } => {
                let stats = ula_sample(y, physics, fidelity, prior, chain, &mut RngState::new(self.seed))?;
                Ok((stats.mean, Some(stats.variance)))
            }
        }
    }
}

impl Reconstructor for Method<'_> {
    fn reconstruct(&self, y: &Tensor, physics: &Physics) -> invkit::Result<Tensor> {
        Ok(self.run(y, physics)?.0)
    }
}

/// One row of `results.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleResult {
    pub id: usize,
    /// Metric values followed by loss values, in column order.
    pub values: Vec<Option<f64>>,
    pub wall_time_ms: Option<f64>,
    pub error: Option<String>,
}

fn noise_sigma(explicit: Option<f64>, physics: &Physics, loss: &str) -> invkit::Result<f64> {
    explicit.or_else(|| physics.noise().gaussian_sigma()).ok_or_else(|| {
        invkit::Error::Validation(format!("{loss} needs a noise level: set sigma or use Gaussian noise"))
    })
}

fn eval_loss(
    loss: &LossConfig,
    model: &Method,
    xhat: &Tensor,
    sample: &dataset::Sample,
    rng: &mut RngState,
) -> invkit::Result<f64> {
    let (y, p) = (&sample.y, &sample.physics);
    let value = match loss {
        LossConfig::SupMse => losses::sup_mse(xhat, &sample.x.to_dtype(xhat.dtype()))?,
        LossConfig::Sure {
            sigma,
            probes,
            probe_step,
        } => {
            let opts = SureOptions {
                probes: *probes,
                probe_step: *probe_step,
            };
            losses::sure_gaussian(model, y, p, noise_sigma(*sigma, p, "sure")?, &opts, rng)?
        }
        LossConfig::R2r { sigma, alpha, draws } => {
            losses::r2r_gaussian(model, y, p, noise_sigma(*sigma, p, "r2r")?, *alpha, *draws, rng)?
        }
        LossConfig::Splitting { split_ratio } => losses::splitting_loss(model, y, p, *split_ratio, rng)?,
        LossConfig::Ei { transforms } => {
            let (h, w) = {
                let s = p.domain().shape.as_slice();
                (s[s.len() - 2], s[s.len() - 1])
            };
            losses::ei_loss(model, y, p, |r| random_element(r, transforms, h, w), rng)?
        }
    };
    Ok(value.value)
}

fn recon_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir().join("recon")
}

fn process(cfg: &ExperimentConfig, method: &MethodConfig, data: &Dataset, index: usize) -> Result<SampleResult> {
    let n = data.manifest.count;
    let entry = &data.manifest.samples[index];
    let sample = data.load(entry)?;
    let model = Method {
        config: method,
        seed: stream(cfg.seed, Stream::Method, n, index).seed(),
    };
    let start = Instant::now();
    let (xhat, variance) = model.run(&sample.y, &sample.physics)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;

    let dir = recon_dir(cfg);
    write_image(&xhat, dir.join(format!("{}_xhat.pfm", sample.id)))?;
    write_image(&xhat.abs(), dir.join(format!("{}_xhat.pgm", sample.id)))?;
    if let Some(v) = &variance {
        write_image(v, dir.join(format!("{}_variance.pfm", sample.id)))?;
    }

    // Complex reconstructions of real images are scored on magnitude.
    let mcfg = MetricConfig {
        complex_magnitude: cfg.metric_options.complex_magnitude || xhat.is_complex(),
        ..cfg.metric_options
    };
    let mut values = Vec::new();
    for m in &cfg.metrics {
        values.push(Some(m.eval(&xhat, &sample.x, &mcfg)?));
    }
    // A loss that does not apply to this problem leaves its cell empty and
    // is reported in the error column; the remaining columns are still filled.
    let mut rng = stream(cfg.seed, Stream::Loss, n, index);
    let mut errors = Vec::new();
    for loss in &cfg.losses {
        match eval_loss(loss, &model, &xhat, &sample, &mut rng) {
            Ok(v) => values.push(Some(v)),
            Err(e) => {
                values.push(None);
                errors.push(format!("{}: {e}", loss.name()));
            }
        }
    }
    Ok(SampleResult {
        id: sample.id,
        values,
        wall_time_ms: cfg.record_wall_time.then_some(elapsed),
        error: (!errors.is_empty()).then(|| errors.join("; ")),
    })
}

pub fn columns(cfg: &ExperimentConfig) -> Vec<String> {
    cfg.metrics
        .iter()
        .map(|m| m.name().to_string())
        .chain(cfg.losses.iter().map(|l| l.name().to_string()))
        .collect()
}

/// Mean of the present values of each column; `None` when a column has none.
pub fn column_means(rows: &[SampleResult], width: usize) -> Vec<Option<f64>> {
    (0..width)
        .map(|c| {
            let vals: Vec<f64> = rows.iter().filter_map(|r| r.values.get(c).copied().flatten()).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_default()
}

fn write_results(path: &Path, cfg: &ExperimentConfig, label: &str, rows: &[SampleResult]) -> Result<()> {
    let cols = columns(cfg);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["sample_id".to_string(), "method".to_string()];
    header.extend(cols.iter().cloned());
    header.push("wall_time_ms".into());
    header.push("error".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.id.to_string(), label.to_string()];
        rec.extend(r.values.iter().map(|v| cell(*v)));
        rec.push(cell(r.wall_time_ms));
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    let mut rec = vec!["mean".to_string(), label.to_string()];
    rec.extend(column_means(rows, cols.len()).into_iter().map(cell));
    let times: Vec<f64> = rows.iter().filter_map(|r| r.wall_time_ms).collect();
    rec.push(cell((!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64)));
    rec.push(String::new());
    w.write_record(&rec)?;
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Runs the configured method on every sample (generating the dataset first
/// when it does not exist) and writes `results.csv` and reconstructions.
///
/// Failures of individual samples are recorded in the `error` column.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<SampleResult>> {
    let method = cfg
        .method
        .as_ref()
        .ok_or_else(|| CliError::config("method", "run needs a method section"))?;
    let data_dir = cfg.dataset_dir();
    if !data_dir.join(MANIFEST).exists() {
        dataset::generate(cfg)?;
    }
    let data = Dataset::open(&data_dir)?;
    let out = cfg.output_dir();
    let recon = recon_dir(cfg);
    fs::create_dir_all(&recon).map_err(io_err(&recon))?;
    let width = columns(cfg).len();
    let rows: Vec<SampleResult> = (0..data.manifest.count)
        .into_par_iter()
        .map(|i| {
            process(cfg, method, &data, i).unwrap_or_else(|e| SampleResult {
                id: data.manifest.samples[i].id,
                values: vec![None; width],
                wall_time_ms: None,
                error: Some(e.to_string()),
            })
        })
        .collect();
    write_results(&out.join(RESULTS), cfg, &method.label(), &rows)?;
    Ok(rows)
}
