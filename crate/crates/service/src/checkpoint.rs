//! Binary checkpoint: `LODS`, a little-endian `u32` header length, a JSON
//! header, then every tensor as little-endian `f32` in declared order.

use std::io::Write;
use std::path::Path;

use lodsdf::network::{BandwidthSchedule, Conditioning, NetworkConfig, NetworkParams};
use lodsdf::training::Codebook;
use serde::{Deserialize, Serialize};

use crate::atomic_write;
use crate::ServiceError;

pub const MAGIC: &[u8; 4] = b"LODS";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format_version: u32,
    #[serde(rename = "N")]
    pub layers: usize,
    #[serde(rename = "d_h")]
    pub hidden: usize,
    #[serde(rename = "d_l")]
    pub latent: usize,
    #[serde(rename = "B")]
    pub max_bandwidth: f64,
    pub schedule: BandwidthSchedule,
    pub conditioning: Conditioning,
    pub shape_names: Vec<String>,
    pub tensors: Vec<TensorEntry>,
}

impl CheckpointHeader {
    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            layers: self.layers,
            hidden: self.hidden,
            latent: self.latent,
            max_bandwidth: self.max_bandwidth,
            schedule: self.schedule.clone(),
            conditioning: self.conditioning,
        }
    }
}

/// A trained model with its codebook and the names of the training shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParams,
    pub codebook: Codebook,
    pub shape_names: Vec<String>,
}

fn tensor_table(params: &NetworkParams, rows: usize) -> Vec<TensorEntry> {
    params
        .tensor_specs()
        .into_iter()
        .map(|(name, shape)| TensorEntry { name, shape })
        .chain(std::iter::once(TensorEntry {
            name: "codebook".into(),
            shape: vec![rows, params.latent_dim()],
        }))
        .collect()
}

impl Checkpoint {
    pub fn new(params: NetworkParams, codebook: Codebook, shape_names: Vec<String>) -> Result<Self, ServiceError> {
        if codebook.len() != shape_names.len() {
            return Err(ServiceError::Invalid(format!(
                "codebook has {} rows but {} shape names were given",
                codebook.len(),
                shape_names.len()
            )));
        }
        if codebook.dim != params.latent_dim() {
            return Err(ServiceError::Invalid(format!(
                "codebook dimension {} does not match latent size {}",
                codebook.dim,
                params.latent_dim()
            )));
        }
        Ok(Self {
            params,
            codebook,
            shape_names,
        })
    }

    pub fn header(&self) -> CheckpointHeader {
        let cfg = &self.params.config;
        CheckpointHeader {
            format_version: FORMAT_VERSION,
            layers: cfg.layers,
            hidden: cfg.hidden,
            latent: cfg.latent,
            max_bandwidth: cfg.max_bandwidth,
            schedule: cfg.schedule.clone(),
            conditioning: cfg.conditioning,
            shape_names: self.shape_names.clone(),
            tensors: tensor_table(&self.params, self.codebook.len()),
        }
    }

    /// Values are stored as `f32`; parameters already passed through
    /// `round_to_f32` survive a round trip bit for bit.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header()).expect("header serializes");
        let mut out = Vec::with_capacity(8 + header.len() + 4 * self.params.parameter_count());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        let tensors = self.params.tensors();
        let values = tensors.iter().flat_map(|t| t.iter()).chain(self.codebook.rows.iter().flatten());
        for v in values {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ServiceError> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(ServiceError::Checkpoint("bad magic bytes, not a checkpoint".into()));
        }
        let header_len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let header_bytes = bytes
            .get(8..8 + header_len)
            .ok_or_else(|| ServiceError::Checkpoint("truncated header".into()))?;
        let header: CheckpointHeader = serde_json::from_slice(header_bytes)
            .map_err(|e| ServiceError::Checkpoint(format!("unreadable header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(ServiceError::Checkpoint(format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                header.format_version
            )));
        }
        let mut params = NetworkParams::init(&header.network_config(), 0).map_err(|e| {
            ServiceError::Checkpoint(format!("header describes an invalid network: {e}"))
        })?;
        check_tensor_table(&header, &tensor_table(&params, header.shape_names.len()))?;

        let payload = &bytes[8 + header_len..];
        let expected = 4 * (params.parameter_count() + header.shape_names.len() * header.latent);
        if payload.len() != expected {
            return Err(ServiceError::Checkpoint(format!(
                "payload is {} bytes, header declares {expected}",
                payload.len()
            )));
        }
        let mut values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64);
        for tensor in params.tensors_mut() {
            for (slot, v) in tensor.iter_mut().zip(&mut values) {
                *slot = v;
            }
        }
        let rows = header
            .shape_names
            .iter()
            .map(|_| (&mut values).take(header.latent).collect())
            .collect();
        let codebook = Codebook {
            dim: header.latent,
            rows,
        };
        Checkpoint::new(params, codebook, header.shape_names)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ServiceError> {
        atomic_write(path.as_ref(), |f| f.write_all(&self.to_bytes()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Latent code of training shape `id`.
    pub fn latent(&self, id: usize) -> Result<&[f64], ServiceError> {
        if id >= self.codebook.len() {
            return Err(ServiceError::Invalid(format!(
                "shape id {id} out of range (codebook has {} rows)",
                self.codebook.len()
            )));
        }
        Ok(self.codebook.row(id))
    }
}

/// Compares the declared tensor table with the one implied by the header's
/// scalar fields, naming the field that most likely disagrees.
fn check_tensor_table(header: &CheckpointHeader, expected: &[TensorEntry]) -> Result<(), ServiceError> {
    let field_error = |field: &str, detail: String| {
        Err(ServiceError::Checkpoint(format!("header field `{field}` is inconsistent: {detail}")))
    };
    if header.tensors.len() != expected.len() {
        return field_error(
            "N",
            format!(
                "N = {} implies {} tensors, the table declares {}",
                header.layers,
                expected.len(),
                header.tensors.len()
            ),
        );
    }
    for (got, want) in header.tensors.iter().zip(expected) {
        if got.name != want.name {
            return field_error("N", format!("expected tensor `{}`, found `{}`", want.name, got.name));
        }
        if got.shape == want.shape {
            continue;
        }
        let detail = format!("tensor `{}` declared {:?}, expected {:?}", got.name, got.shape, want.shape);
        let field = if got.name == "codebook" {
            if got.shape.first() != want.shape.first() {
                "shape_names"
            } else {
                "d_l"
            }
        } else if got.name.ends_with("omega_raw") && got.shape.first() != want.shape.first() {
            "d_h"
        } else if got.name.ends_with("omega_raw") && (got.shape.get(1) == Some(&3) || want.shape.get(1) == Some(&3)) {
            "conditioning"
        } else {
            "d_l"
        };
        return field_error(field, detail);
    }
    Ok(())
}
