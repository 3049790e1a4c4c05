use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::model::{Model, ModelWeights};
use super::tensor::Matrix;
use super::ModelConfig;

const MAGIC: &[u8; 4] = b"SFWT";
const VERSION: u32 = 1;

fn format_err(msg: impl Into<String>) -> Error {
    Error::WeightFormat(msg.into())
}

/// Layout: magic, version, config text, its SHA-256, then each tensor as
/// name, rows, cols and little-endian `f32` data.
pub fn write_weights(model: &Model, mut w: impl Write) -> std::io::Result<()> {
    let config = model.config().to_kv();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(config.len() as u32).to_le_bytes())?;
    w.write_all(config.as_bytes())?;
    w.write_all(&model.config().digest())?;
    w.write_all(&(model.weights().len() as u32).to_le_bytes())?;
    for (name, m) in model.weights().iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(m.rows as u32).to_le_bytes())?;
        w.write_all(&(m.cols as u32).to_le_bytes())?;
        for &x in &m.data {
            w.write_all(&(x as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| format_err("unexpected end of file"))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.bytes(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn read_weights(r: impl Read) -> Result<Model> {
    let mut r = Reader { inner: r };
    if r.bytes(4)?.as_slice() != MAGIC {
        return Err(format_err("bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let len = r.u32()? as usize;
    let text = String::from_utf8(r.bytes(len)?).map_err(|_| format_err("config is not utf-8"))?;
    let digest = r.bytes(32)?;
    if Sha256::digest(text.as_bytes()).as_slice() != digest.as_slice() {
        return Err(format_err("config digest mismatch"));
    }
    let config = ModelConfig::from_kv(&text)?;
    let count = r.u32()? as usize;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let n = r.u32()? as usize;
        let name = String::from_utf8(r.bytes(n)?).map_err(|_| format_err("tensor name is not utf-8"))?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let raw = r.bytes(rows * cols * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        tensors.insert(name, Matrix::from_vec(rows, cols, data));
    }
    let mut rest = Vec::new();
    r.inner
        .read_to_end(&mut rest)
        .map_err(|_| format_err("read error"))?;
    if !rest.is_empty() {
        return Err(format_err(format!("{} trailing bytes", rest.len())));
    }
    let weights = ModelWeights::from_tensors(&config, tensors)?;
    Model::from_weights(config, weights)
}

pub fn save_weights(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_weights(model, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_weights(std::io::BufReader::new(file))
}

/// `epoch,loss` rows, epochs counted from 1.
pub fn loss_csv(losses: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in losses.iter().enumerate() {
        let _ = writeln!(s, "{},{}", i + 1, l);
    }
    s
}
