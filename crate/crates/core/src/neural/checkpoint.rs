//! Binary checkpoints: magic, format version, JSON config echo, then every
//! weight array in declaration order as a length-prefixed run of
//! little-endian `f64` values.

use std::io::{Read, Write};
use std::path::Path;

use super::{AfcConfig, AfcModel, NeuralError};

const MAGIC: &[u8; 8] = b"AFCLABCK";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(model: &AfcModel, mut w: W) -> Result<(), NeuralError> {
    let cfg = serde_json::to_vec(&model.config).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(cfg.len() as u64).to_le_bytes())?;
    w.write_all(&cfg)?;
    w.write_all(&(model.params.len() as u64).to_le_bytes())?;
    for m in &model.params.values {
        w.write_all(&(m.len() as u64).to_le_bytes())?;
        for v in &m.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, NeuralError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<AfcModel, NeuralError> {
    let bad = |m: String| NeuralError::Checkpoint(m);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let n = read_u64(&mut r)? as usize;
    if n > 1 << 20 {
        return Err(bad(format!("config block of {n} bytes is implausible")));
    }
    let mut cfg = vec![0u8; n];
    r.read_exact(&mut cfg)?;
    let config: AfcConfig = serde_json::from_slice(&cfg).map_err(|e| bad(format!("config: {e}")))?;
    let mut model = AfcModel::new(config)?;
    let count = read_u64(&mut r)? as usize;
    if count != model.params.len() {
        return Err(bad(format!("{count} arrays stored, config declares {}", model.params.len())));
    }
    for (name, m) in model.params.names.iter().zip(model.params.values.iter_mut()) {
        let len = read_u64(&mut r)? as usize;
        if len != m.len() {
            return Err(bad(format!("{name}: {len} values stored, expected {}", m.len())));
        }
        for x in m.data.iter_mut() {
            *x = f64::from_le_bytes(read_u64(&mut r)?.to_le_bytes());
        }
    }
    Ok(model)
}

pub fn save_checkpoint(model: &AfcModel, path: &Path) -> Result<(), NeuralError> {
    let mut buf = Vec::new();
    write_checkpoint(model, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<AfcModel, NeuralError> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}
