//! Checkpoint container.
//!
//! A checkpoint is a safetensors file. Tensors are stored as `f32` under
//! `generator.<name>` and `discriminator.<name>`; the string metadata holds
//!
//! * `format`   = `"tilesynth-checkpoint"`
//! * `version`  = `"1"`
//! * `manifest` = JSON [`CheckpointManifest`] (both network configs, the
//!   training iteration and the non-adversarial score, if measured).

use std::collections::HashMap;
use std::path::Path;

use candle_core::safetensors::Load;
use candle_core::{DType, Tensor};
use safetensors::SafeTensors;
use serde::{Deserialize, Serialize};

use super::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use crate::error::{Error, Result};

pub const FORMAT: &str = "tilesynth-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub version: u32,
    pub generator: GeneratorConfig,
    pub discriminator: DiscriminatorConfig,
    pub iteration: usize,
    pub non_adversarial_score: Option<f64>,
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    generator: &Generator,
    discriminator: &Discriminator,
    iteration: usize,
    non_adversarial_score: f64,
) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let manifest = CheckpointManifest {
        version: VERSION,
        generator: generator.config().clone(),
        discriminator: discriminator.config().clone(),
        iteration,
        non_adversarial_score: non_adversarial_score.is_finite().then_some(non_adversarial_score),
    };
    let mut tensors: Vec<(String, Tensor)> = Vec::new();
    for (prefix, vars) in [
        ("generator", generator.named_vars()),
        ("discriminator", discriminator.named_vars()),
    ] {
        for (name, var) in vars {
            tensors.push((format!("{prefix}.{name}"), var.as_tensor().to_dtype(DType::F32)?));
        }
    }
    let metadata = HashMap::from([
        ("format".to_string(), FORMAT.to_string()),
        ("version".to_string(), VERSION.to_string()),
        ("manifest".to_string(), serde_json::to_string(&manifest)?),
    ]);
    let bytes = safetensors::serialize(tensors, Some(metadata)).map_err(|e| Error::InvalidCheckpoint {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    std::fs::write(path, canonical_header(&bytes)?)?;
    Ok(())
}

/// Rewrites the JSON header with sorted keys. The metadata map is a
/// `HashMap`, so without this identical checkpoints could differ byte-wise.
fn canonical_header(bytes: &[u8]) -> Result<Vec<u8>> {
    let len = u64::from_le_bytes(bytes[..8].try_into().expect("8-byte prefix")) as usize;
    let header: serde_json::Value = serde_json::from_slice(&bytes[8..8 + len])?;
    let mut text = serde_json::to_string(&sort_keys(header))?.into_bytes();
    // Keep the data section 8-byte aligned, as the writer does.
    while text.len() % 8 != 0 {
        text.push(b' ');
    }
    let mut out = Vec::with_capacity(8 + text.len() + bytes.len() - 8 - len);
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(&text);
    out.extend_from_slice(&bytes[8 + len..]);
    Ok(out)
}

fn sort_keys(value: serde_json::Value) -> serde_json::Value {
    match value {
        serde_json::Value::Object(map) => {
            let sorted: std::collections::BTreeMap<String, serde_json::Value> =
                map.into_iter().map(|(k, v)| (k, sort_keys(v))).collect();
            serde_json::Value::Object(sorted.into_iter().collect())
        }
        other => other,
    }
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Generator, Discriminator, CheckpointManifest)> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileMissing(path.to_path_buf()));
    }
    let invalid = |reason: String| Error::InvalidCheckpoint {
        path: path.to_path_buf(),
        reason,
    };
    let bytes = std::fs::read(path)?;
    let st = SafeTensors::deserialize(&bytes).map_err(|e| invalid(e.to_string()))?;
    let (_, header) = SafeTensors::read_metadata(&bytes).map_err(|e| invalid(e.to_string()))?;
    let meta = header.metadata().clone().unwrap_or_default();
    if meta.get("format").map(String::as_str) != Some(FORMAT) {
        return Err(invalid("missing or foreign format tag".into()));
    }
    let version: u32 = meta
        .get("version")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| invalid("missing version".into()))?;
    if version != VERSION {
        return Err(invalid(format!("unsupported version {version}")));
    }
    let manifest: CheckpointManifest = serde_json::from_str(
        meta.get("manifest").ok_or_else(|| invalid("missing manifest".into()))?,
    )?;

    let generator = Generator::build(manifest.generator.clone(), 0)?;
    let discriminator = Discriminator::build(manifest.discriminator.clone(), 0)?;
    for (prefix, vars) in [
        ("generator", generator.named_vars()),
        ("discriminator", discriminator.named_vars()),
    ] {
        for (name, var) in vars {
            let key = format!("{prefix}.{name}");
            let view = st.tensor(&key).map_err(|_| invalid(format!("missing tensor {key}")))?;
            let t = view.load(var.device())?;
            if t.dims() != var.dims() {
                return Err(invalid(format!(
                    "tensor {key} has shape {:?}, expected {:?}",
                    t.dims(),
                    var.dims()
                )));
            }
            var.set(&t.to_dtype(var.dtype())?)?;
        }
    }
    Ok((generator, discriminator, manifest))
}
