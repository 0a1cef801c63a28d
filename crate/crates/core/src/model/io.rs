use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::network::Model;
use super::params::Parameters;
use super::ModelConfig;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GZAM";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Layout: magic, u32 version, u32 header length, JSON `ModelConfig`, u64
/// value count, then every parameter as little-endian f64 in tensor order.
pub fn write_model(model: &Model, mut out: impl Write) -> Result<()> {
    let header = serde_json::to_vec(&model.config)?;
    let io = |e| Error::io("<model>", e);
    out.write_all(MAGIC).map_err(io)?;
    out.write_all(&MODEL_FORMAT_VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&(header.len() as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&header).map_err(io)?;
    out.write_all(&(model.params.len() as u64).to_le_bytes()).map_err(io)?;
    for (_, tensor) in model.params.tensors() {
        for x in tensor {
            out.write_all(&x.to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

pub fn read_model(mut input: impl Read) -> Result<Model> {
    let io = |e| Error::io("<model>", e);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Invalid("not a model file".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word).map_err(io)?;
    let version = u32::from_le_bytes(word);
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::Invalid(format!("unsupported model format version {version}")));
    }
    input.read_exact(&mut word).map_err(io)?;
    let mut header = vec![0u8; u32::from_le_bytes(word) as usize];
    input.read_exact(&mut header).map_err(io)?;
    let config: ModelConfig = serde_json::from_slice(&header)?;
    config.validate()?;
    let mut params = Parameters::zeros(&config);
    let mut count = [0u8; 8];
    input.read_exact(&mut count).map_err(io)?;
    if u64::from_le_bytes(count) != params.len() as u64 {
        return Err(Error::Shape("parameter count does not match header".into()));
    }
    let mut value = [0u8; 8];
    for tensor in params.tensors_mut() {
        for x in tensor.iter_mut() {
            input.read_exact(&mut value).map_err(io)?;
            *x = f64::from_le_bytes(value);
        }
    }
    Model::with_params(config, params)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_model(model, BufWriter::new(file))
}

pub fn load_model(path: &Path) -> Result<Model> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(BufReader::new(file))
}
