//! Parameter checkpoint file: little-endian binary with named f32 tensors,
//! f64 metadata entries (config and training state) and a version field.
//! The byte stream round-trips exactly through load/save.

use std::collections::BTreeMap;
use std::path::Path;

use crate::diffcore::{Mat, Real};
use crate::error::{CoreError, Result};

use super::{NetConfig, NetworkParams};

const MAGIC: &[u8; 8] = b"LPCKPT\x01\x00";
const FORMAT_VERSION: u32 = 1;

/// A loaded checkpoint: parameters (cast to the requested precision),
/// metadata scalars and any extra tensors (optimizer state).
pub struct Checkpoint<F: Real> {
    pub params: NetworkParams<F>,
    pub meta: BTreeMap<String, f64>,
    pub extra: Vec<(String, Mat<f32>)>,
}

fn push_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn push_tensor(out: &mut Vec<u8>, name: &str, mat: &Mat<f32>) {
    push_str(out, name);
    out.extend_from_slice(&(mat.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(mat.cols() as u32).to_le_bytes());
    for &v in mat.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn config_meta(cfg: &NetConfig) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    m.insert("cfg.d_f".into(), cfg.d_f as f64);
    m.insert("cfg.d_e".into(), cfg.d_e as f64);
    m.insert("cfg.n_heads".into(), cfg.n_heads as f64);
    m.insert("cfg.n_blocks".into(), cfg.n_blocks as f64);
    m.insert("cfg.n_cycles".into(), cfg.n_cycles as f64);
    m.insert("cfg.n_ens".into(), cfg.n_ens as f64);
    m.insert("cfg.d_r".into(), cfg.d_r as f64);
    m.insert("cfg.rbf_max".into(), cfg.rbf_max);
    m.insert("cfg.leaky_slope".into(), cfg.leaky_slope);
    m.insert("cfg.max_nodes".into(), cfg.max_nodes as f64);
    m
}

fn config_from_meta(meta: &BTreeMap<String, f64>) -> Result<NetConfig> {
    let get = |k: &str| -> Result<f64> {
        meta.get(k)
            .copied()
            .ok_or_else(|| CoreError::Checkpoint(format!("missing meta key {k:?}")))
    };
    Ok(NetConfig {
        d_f: get("cfg.d_f")? as usize,
        d_e: get("cfg.d_e")? as usize,
        n_heads: get("cfg.n_heads")? as usize,
        n_blocks: get("cfg.n_blocks")? as usize,
        n_cycles: get("cfg.n_cycles")? as usize,
        n_ens: get("cfg.n_ens")? as usize,
        d_r: get("cfg.d_r")? as usize,
        rbf_max: get("cfg.rbf_max")?,
        leaky_slope: get("cfg.leaky_slope")?,
        max_nodes: get("cfg.max_nodes")? as usize,
    })
}

/// Serializes parameters (as f32), metadata and extra tensors.
pub fn checkpoint_to_bytes<F: Real>(
    params: &NetworkParams<F>,
    meta: &BTreeMap<String, f64>,
    extra: &[(String, Mat<f32>)],
) -> Vec<u8> {
    let mut merged = config_meta(&params.cfg);
    for (k, v) in meta {
        merged.insert(k.clone(), *v);
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(merged.len() as u32).to_le_bytes());
    for (k, v) in &merged {
        push_str(&mut out, k);
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(params.n_tensors() as u32).to_le_bytes());
    for (name, mat) in params.iter() {
        push_tensor(&mut out, name, &mat.cast::<f32>());
    }
    out.extend_from_slice(&(extra.len() as u32).to_le_bytes());
    for (name, mat) in extra {
        push_tensor(&mut out, name, mat);
    }
    out
}

pub fn save_checkpoint<F: Real>(
    path: &Path,
    params: &NetworkParams<F>,
    meta: &BTreeMap<String, f64>,
    extra: &[(String, Mat<f32>)],
) -> Result<()> {
    std::fs::write(path, checkpoint_to_bytes(params, meta, extra))?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(CoreError::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| CoreError::Checkpoint("non-UTF8 tensor name".into()))
    }
    fn tensor(&mut self) -> Result<(String, Mat<f32>)> {
        let name = self.string()?;
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.f32()?);
        }
        Ok((name, Mat::from_vec(rows, cols, data)))
    }
}

pub fn checkpoint_from_bytes<F: Real>(bytes: &[u8]) -> Result<Checkpoint<F>> {
    let mut cur = Cursor { data: bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(CoreError::Checkpoint("bad magic: not a checkpoint".into()));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(CoreError::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let n_meta = cur.u32()? as usize;
    let mut meta = BTreeMap::new();
    for _ in 0..n_meta {
        let key = cur.string()?;
        let value = cur.f64()?;
        meta.insert(key, value);
    }
    let cfg = config_from_meta(&meta)?;
    cfg.validate()?;
    let n_tensors = cur.u32()? as usize;
    let mut entries = Vec::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        let (name, mat) = cur.tensor()?;
        entries.push((name, mat.cast::<F>()));
    }
    let n_extra = cur.u32()? as usize;
    let mut extra = Vec::with_capacity(n_extra);
    for _ in 0..n_extra {
        extra.push(cur.tensor()?);
    }
    Ok(Checkpoint {
        params: NetworkParams::from_named(cfg, entries),
        meta,
        extra,
    })
}

pub fn load_checkpoint<F: Real>(path: &Path) -> Result<Checkpoint<F>> {
    let bytes = std::fs::read(path)?;
    checkpoint_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetConfig;

    #[test]
    fn checkpoint_bytes_roundtrip_exactly() {
        let cfg = NetConfig::tiny();
        let params: NetworkParams<f32> = NetworkParams::init(&cfg, 3).unwrap();
        let mut meta = BTreeMap::new();
        meta.insert("train.step".to_string(), 17.0);
        meta.insert("train.lr".to_string(), 1e-3);
        let extra = vec![("adam.m.input.lig.w".to_string(), Mat::<f32>::zeros(45, 16))];
        let bytes = checkpoint_to_bytes(&params, &meta, &extra);

        let loaded: Checkpoint<f32> = checkpoint_from_bytes(&bytes).unwrap();
        assert_eq!(loaded.params.cfg, cfg);
        assert_eq!(loaded.meta.get("train.step"), Some(&17.0));
        assert_eq!(loaded.extra.len(), 1);

        // Byte-exact round trip through load -> save.
        let meta2: BTreeMap<String, f64> = loaded
            .meta
            .iter()
            .filter(|(k, _)| !k.starts_with("cfg."))
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        let bytes2 = checkpoint_to_bytes(&loaded.params, &meta2, &loaded.extra);
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn f64_params_survive_via_f32_storage() {
        let cfg = NetConfig::tiny();
        let params: NetworkParams<f64> = NetworkParams::init(&cfg, 9).unwrap();
        let bytes = checkpoint_to_bytes(&params, &BTreeMap::new(), &[]);
        let loaded: Checkpoint<f64> = checkpoint_from_bytes(&bytes).unwrap();
        // Values match to f32 precision; a second save is byte-identical.
        for ((na, ma), (nb, mb)) in params.iter().zip(loaded.params.iter()) {
            assert_eq!(na, nb);
            for (x, y) in ma.as_slice().iter().zip(mb.as_slice()) {
                assert!((*x as f32 - *y as f32).abs() == 0.0);
            }
        }
        let bytes2 = checkpoint_to_bytes(&loaded.params, &BTreeMap::new(), &[]);
        assert_eq!(bytes, bytes2);
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let cfg = NetConfig::tiny();
        let params: NetworkParams<f32> = NetworkParams::init(&cfg, 3).unwrap();
        let mut bytes = checkpoint_to_bytes(&params, &BTreeMap::new(), &[]);
        bytes[0] = b'X';
        assert!(checkpoint_from_bytes::<f32>(&bytes).is_err());
    }
}
