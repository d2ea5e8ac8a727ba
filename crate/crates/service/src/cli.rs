//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lodsdf::geometry::{format_obj, SdfOracle, SdfSampleSet};
use lodsdf::meshing::NetworkField;
use lodsdf::metrics::{depth_sweep_report, field_spectrum, level_cutoff, line_spacing, random_axis_lines, LINE_SAMPLES};
use lodsdf::training::{fit_latent, fit_latent_masked, train, FitConfig, HalfSpaceMask};
use serde_json::json;

use crate::query::{mesh_query, LatentSource, MeshRequest};
use crate::server::{serve, AppState, DEFAULT_MAX_RESOLUTION};
use crate::{atomic_write, Checkpoint, RunConfig, ServiceError};

#[derive(Debug, Parser)]
#[command(name = "lodsdf", version, about = "Train, fit, mesh and serve multi-level signed distance networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a network and codebook on the dataset described by a config.
    Train {
        config: PathBuf,
        /// Checkpoint to write; the loss history goes next to it as CSV.
        #[arg(short, long, default_value = "model.lods")]
        out: PathBuf,
    },
    /// Fit a latent code for new samples with the network frozen.
    Fit {
        checkpoint: PathBuf,
        /// Sample file written by `sample`.
        samples: PathBuf,
        /// Restrict supervision to a half space, e.g. `halfspace:x<0`.
        #[arg(long)]
        mask: Option<String>,
        #[arg(long, default_value_t = FitConfig::default().steps)]
        steps: usize,
        /// Latent code output (JSON array).
        #[arg(short, long, default_value = "latent.json")]
        out: PathBuf,
    },
    /// Extract a mesh at one level of detail.
    Mesh(MeshArgs),
    /// Per-level CD/ED/SR sweep against the config's ground-truth shapes.
    Metrics {
        checkpoint: PathBuf,
        config: PathBuf,
        /// CSV report; a JSON report with trend flags is written next to it.
        #[arg(short, long, default_value = "metrics.csv")]
        out: PathBuf,
    },
    /// Out-of-band spectral energy of one head along random lines.
    Spectrum {
        checkpoint: PathBuf,
        #[arg(long, value_parser = parse_level)]
        level: usize,
        #[arg(long, default_value_t = 0)]
        shape_id: usize,
        #[arg(long, default_value_t = 20)]
        lines: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve the HTTP API.
    Serve {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = DEFAULT_MAX_RESOLUTION)]
        max_resolution: usize,
    },
    /// Write ground-truth sample files for every shape of a config.
    Sample {
        config: PathBuf,
        #[arg(short, long, default_value = "samples")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    pub checkpoint: PathBuf,
    #[arg(long, conflicts_with = "latent_file", required_unless_present = "latent_file")]
    pub shape_id: Option<usize>,
    /// JSON array holding a latent code.
    #[arg(long)]
    pub latent_file: Option<PathBuf>,
    #[arg(long, value_parser = parse_level)]
    pub level: usize,
    /// Reuse grid values of this coarser level far from the surface.
    #[arg(long, value_parser = parse_level)]
    pub refine_from: Option<usize>,
    #[arg(long, requires = "refine_from")]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = 128)]
    pub res: usize,
    /// OBJ output; extraction statistics go next to it as JSON.
    #[arg(short, long)]
    pub out: PathBuf,
}

fn parse_level(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("levels start at 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn write_text(path: &Path, text: &str) -> Result<(), ServiceError> {
    atomic_write(path, |f| f.write_all(text.as_bytes()))
}

fn read_latent(path: &Path) -> Result<Vec<f64>, ServiceError> {
    serde_json::from_str(&std::fs::read_to_string(path)?)
        .map_err(|e| ServiceError::Invalid(format!("{}: expected a JSON array of numbers ({e})", path.display())))
}

pub fn run(cli: Cli) -> Result<(), ServiceError> {
    match cli.command {
        Command::Train { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let shapes = cfg.dataset.shapes(&config_dir(&config))?;
            let data = cfg.dataset.sample(&shapes)?;
            let every = (cfg.training.steps / 20).max(1);
            let mut result = train(&data, &cfg.training, &cfg.network, |row| {
                if row.step % every == 0 {
                    eprintln!(
                        "step {:>6}  lr {:.2e}  fine mse (deepest) {:.3e}  coarse mse {:.3e}",
                        row.step,
                        row.lr,
                        row.fine_mse.last().copied().unwrap_or(f64::NAN),
                        row.coarse_mse
                    );
                }
            })?;
            result.params.round_to_f32();
            result.codebook.round_to_f32();
            let names = shapes.into_iter().map(|s| s.name).collect();
            Checkpoint::new(result.params, result.codebook, names)?.save(&out)?;
            write_text(&out.with_extension("csv"), &result.history.to_csv())?;
            eprintln!("wrote {}", out.display());
        }
        Command::Fit {
            checkpoint,
            samples,
            mask,
            steps,
            out,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let set = SdfSampleSet::read_from(std::io::BufReader::new(std::fs::File::open(&samples)?), 0)?;
            let cfg = FitConfig {
                steps,
                ..FitConfig::default()
            };
            let latent = match mask {
                Some(spec) => {
                    let mask: HalfSpaceMask = spec.parse()?;
                    fit_latent_masked(&ckpt.params, &set, &mask, &cfg)?
                }
                None => fit_latent(&ckpt.params, &set, &cfg)?,
            };
            write_text(&out, &serde_json::to_string(&latent.0).expect("numbers serialize"))?;
            eprintln!("wrote {}", out.display());
        }
        Command::Mesh(args) => {
            let ckpt = Checkpoint::load(&args.checkpoint)?;
            let source = match (args.shape_id, &args.latent_file) {
                (Some(id), _) => LatentSource::ShapeId(id),
                (None, Some(path)) => LatentSource::Latent(read_latent(path)?),
                (None, None) => unreachable!("clap requires one source"),
            };
            let req = MeshRequest {
                source,
                level: args.level,
                resolution: args.res,
                refine_from: args.refine_from,
                tau: args.tau,
            };
            let result = mesh_query(&ckpt, &req, usize::MAX)?;
            write_text(&args.out, &format_obj(&result.mesh))?;
            let stats = json!({
                "evals": result.stats.network_evaluations,
                "cells_per_level": result.stats.cells_per_level,
                "coarse_evals": result.coarse_stats.map(|s| s.network_evaluations),
                "vertices": result.mesh.vertices.len(),
                "triangles": result.mesh.triangles.len(),
            });
            let text = serde_json::to_string_pretty(&stats).expect("json");
            write_text(&args.out.with_extension("json"), &text)?;
            println!("{text}");
        }
        Command::Metrics { checkpoint, config, out } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let cfg = RunConfig::load(&config)?;
            let shapes = cfg.dataset.shapes(&config_dir(&config))?;
            if shapes.len() != ckpt.codebook.len() {
                return Err(ServiceError::Invalid(format!(
                    "config lists {} shapes, checkpoint codebook has {}",
                    shapes.len(),
                    ckpt.codebook.len()
                )));
            }
            let latents: Vec<&[f64]> = ckpt.codebook.rows.iter().map(Vec::as_slice).collect();
            let oracles: Vec<&dyn SdfOracle> = shapes.iter().map(|s| s.oracle.as_ref()).collect();
            let report = depth_sweep_report(&ckpt.params, &latents, &oracles, &cfg.metrics)?;
            write_text(&out, &report.to_csv())?;
            write_text(&out.with_extension("json"), &serde_json::to_string_pretty(&report).expect("json"))?;
            print!("{}", report.to_csv());
            println!(
                "ed_non_increasing={} sr_non_decreasing={} failures={}",
                report.ed_non_increasing,
                report.sr_non_decreasing,
                report.failures.len()
            );
        }
        Command::Spectrum {
            checkpoint,
            level,
            shape_id,
            lines,
            seed,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let cutoff = level_cutoff(&ckpt.params, level)?;
            let field = NetworkField::new(&ckpt.params, ckpt.latent(shape_id)?, level)?;
            let lines = random_axis_lines(lines, LINE_SAMPLES, line_spacing(cutoff), seed);
            let fractions = field_spectrum(&field, &lines, cutoff)?;
            let max = fractions.iter().copied().fold(0.0, f64::max);
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "level": level,
                    "cutoff": cutoff,
                    "fractions": fractions,
                    "max_fraction": max,
                }))
                .expect("json")
            );
        }
        Command::Serve {
            checkpoint,
            port,
            max_resolution,
        } => {
            let state = AppState {
                checkpoint: Checkpoint::load(&checkpoint)?,
                max_resolution,
            };
            tokio::runtime::Runtime::new()?.block_on(serve(state, port))?;
        }
        Command::Sample { config, out_dir } => {
            let cfg = RunConfig::load(&config)?;
            let shapes = cfg.dataset.shapes(&config_dir(&config))?;
            let sets = cfg.dataset.sample(&shapes)?;
            std::fs::create_dir_all(&out_dir)?;
            for (shape, set) in shapes.iter().zip(&sets) {
                let file = Path::new(&shape.name)
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("shape{}", set.shape_id));
                let path = out_dir.join(format!("{file}.sdfs"));
                atomic_write(&path, |f| {
                    let mut w = std::io::BufWriter::new(f);
                    set.write_to(&mut w)?;
                    w.flush()
                })?;
                eprintln!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}
