//! Binary model checkpoints: magic, `u64` LE header length, JSON header,
//! then every parameter as a little-endian `f64`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::kernel::CompositeKernel;
use super::model::{GpConfig, GpModel, Variational};
use crate::error::{Error, Result};
use crate::hodgelet::FilterBank;

const MAGIC: &[u8; 8] = b"HGPCKPT1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: GpConfig,
    bank: FilterBank,
    kernel: CompositeKernel,
    /// `(training size, latent count)` of the variational state.
    variational: Option<(usize, usize)>,
    param_names: Vec<String>,
}

pub fn checkpoint_bytes(model: &GpModel) -> Result<Vec<u8>> {
    let header = Header {
        config: model.config.clone(),
        bank: model.bank.clone(),
        kernel: model.kernel.clone(),
        variational: model.variational.as_ref().map(|v| (v.n, v.means.len())),
        param_names: model.param_names(),
    };
    let json = serde_json::to_vec(&header)?;
    let params = model.params();
    let mut out = Vec::with_capacity(16 + json.len() + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

/// Restores an unconditioned model; call [`GpModel::condition`] with the
/// training data before predicting.
pub fn model_from_bytes(bytes: &[u8]) -> Result<GpModel> {
    let bad = |m: &str| Error::Format(format!("checkpoint: {m}"));
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("bad magic"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..16 + len).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(body)?;
    header.bank.validate()?;
    let blob = &bytes[16 + len..];
    if !blob.len().is_multiple_of(8) {
        return Err(bad("parameter blob is not a whole number of f64"));
    }
    let params: Vec<f64> = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let variational = header.variational.map(|(n, c)| Variational::prior(n, c));
    let mut model = GpModel::from_parts(header.config, header.bank, header.kernel, 0.0, variational);
    if model.param_names() != header.param_names || params.len() != header.param_names.len() {
        return Err(bad("parameter layout does not match header"));
    }
    model.set_params(&params);
    Ok(model)
}

pub fn save_checkpoint(model: &GpModel, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&checkpoint_bytes(model)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<GpModel> {
    model_from_bytes(&fs::read(path)?)
}
