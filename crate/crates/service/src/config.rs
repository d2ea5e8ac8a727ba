//! Declarative run configuration, read from TOML. Unknown keys are errors.

use std::path::{Path, PathBuf};

use lodsdf::geometry::{desk_shapes, load_obj, sample_training_set, MeshSdf, SdfOracle, SdfSampleSet};
use lodsdf::metrics::SweepConfig;
use lodsdf::network::NetworkConfig;
use lodsdf::training::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    /// Names from the built-in analytic catalogue.
    pub analytic: Vec<String>,
    /// Watertight OBJ meshes, resolved relative to the config file.
    pub obj: Vec<PathBuf>,
    pub samples_per_shape: usize,
    /// Share of samples kept as the fine (closest to the surface) subset.
    pub fine_fraction: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            analytic: desk_shapes().into_iter().map(|(n, _)| n.to_string()).collect(),
            obj: Vec::new(),
            samples_per_shape: 100_000,
            fine_fraction: 0.05,
            seed: 0,
        }
    }
}

/// A named ground-truth shape.
pub struct Shape {
    pub name: String,
    pub oracle: Box<dyn SdfOracle>,
}

impl DatasetSpec {
    pub fn shapes(&self, base_dir: &Path) -> Result<Vec<Shape>, ServiceError> {
        let catalogue = desk_shapes();
        let mut shapes = Vec::new();
        for name in &self.analytic {
            let (_, shape) = catalogue
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| {
                    let known: Vec<&str> = catalogue.iter().map(|(n, _)| *n).collect();
                    ServiceError::Invalid(format!("unknown analytic shape `{name}` (known: {})", known.join(", ")))
                })?;
            shapes.push(Shape {
                name: name.clone(),
                oracle: Box::new(shape.clone()),
            });
        }
        for path in &self.obj {
            let full = base_dir.join(path);
            let mesh = load_obj(&full)?;
            shapes.push(Shape {
                name: path.display().to_string(),
                oracle: Box::new(MeshSdf::new(mesh)?),
            });
        }
        if shapes.is_empty() {
            return Err(ServiceError::Invalid("dataset lists no shapes".into()));
        }
        Ok(shapes)
    }

    pub fn sample(&self, shapes: &[Shape]) -> Result<Vec<SdfSampleSet>, ServiceError> {
        shapes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut set = sample_training_set(
                    s.oracle.as_ref(),
                    self.samples_per_shape,
                    self.fine_fraction,
                    self.seed.wrapping_add(i as u64),
                )?;
                set.shape_id = i;
                Ok(set)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub training: TrainConfig,
    pub dataset: DatasetSpec,
    /// Depth sweep settings, including the extraction config.
    pub metrics: SweepConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}
