//! SGFW1 parameter container.
//!
//! Layout (little-endian):
//! ```text
//! "SGFW1"            5 bytes magic
//! header_len: u32    followed by a UTF-8 JSON architecture/metadata header
//! count: u32         followed by `count` tensors:
//!   name_len: u16, name (UTF-8), rank: u8, dims: rank × u32, values: f32 × Π dims
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, ParamStore};
use crate::tensor::{Element, Tensor};

pub const MAGIC: &[u8; 5] = b"SGFW1";

/// Serialized position of a ChaCha RNG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: String,
    pub stream: u64,
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &rand_chacha::ChaCha8Rng) -> Self {
        RngState {
            seed: rng.get_seed().iter().map(|b| format!("{b:02x}")).collect(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<rand_chacha::ChaCha8Rng, ModelError> {
        use rand::SeedableRng;
        let bad = || ModelError::Format("malformed rng state".into());
        if self.seed.len() != 64 {
            return Err(bad());
        }
        let mut seed = [0u8; 32];
        for (i, b) in seed.iter_mut().enumerate() {
            *b = u8::from_str_radix(&self.seed[2 * i..2 * i + 2], 16).map_err(|_| bad())?;
        }
        let mut rng = rand_chacha::ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos.parse().map_err(|_| bad())?);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub kind: String,
    pub step: u64,
    pub model: Option<ModelConfig>,
    pub rng: Option<RngState>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl SnapshotHeader {
    pub fn new(kind: &str) -> Self {
        SnapshotHeader {
            kind: kind.to_string(),
            step: 0,
            model: None,
            rng: None,
            meta: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    pub header: SnapshotHeader,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

impl SnapshotFile {
    pub fn new(header: SnapshotHeader) -> Self {
        SnapshotFile {
            header,
            tensors: Vec::new(),
        }
    }

    /// Appends every parameter of `store` with names prefixed by `prefix`.
    pub fn push_params<T: Element>(&mut self, prefix: &str, store: &ParamStore<T>) {
        for (name, t) in store.iter() {
            self.tensors.push((format!("{prefix}{name}"), t.cast()));
        }
    }

    /// Parameters whose names start with `prefix`, with the prefix stripped.
    pub fn params_with_prefix<T: Element>(&self, prefix: &str) -> Vec<(String, Tensor<T>)> {
        self.tensors
            .iter()
            .filter_map(|(n, t)| n.strip_prefix(prefix).map(|s| (s.to_string(), t.cast())))
            .collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, ModelError> {
        let header = serde_json::to_vec(&self.header)
            .map_err(|e| ModelError::Format(format!("header encode: {e}")))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            let nb = name.as_bytes();
            if nb.len() > u16::MAX as usize || t.rank() > u8::MAX as usize {
                return Err(ModelError::Format(format!("tensor `{name}` cannot be encoded")));
            }
            out.extend_from_slice(&(nb.len() as u16).to_le_bytes());
            out.extend_from_slice(nb);
            out.push(t.rank() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut r = bytes;
        let mut magic = [0u8; 5];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(ModelError::Format("magic mismatch (expected SGFW1)".into()));
        }
        let hlen = read_u32(&mut r)? as usize;
        if hlen > r.len() {
            return Err(ModelError::Format("truncated header".into()));
        }
        let header: SnapshotHeader = serde_json::from_slice(&r[..hlen])
            .map_err(|e| ModelError::Format(format!("header decode: {e}")))?;
        r = &r[hlen..];
        let count = read_u32(&mut r)? as usize;
        let mut tensors = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let nlen = read_u16(&mut r)? as usize;
            let mut name = vec![0u8; nlen];
            read_exact(&mut r, &mut name)?;
            let name = String::from_utf8(name)
                .map_err(|_| ModelError::Format("tensor name is not UTF-8".into()))?;
            let mut rank = [0u8; 1];
            read_exact(&mut r, &mut rank)?;
            let mut shape = Vec::with_capacity(rank[0] as usize);
            for _ in 0..rank[0] {
                shape.push(read_u32(&mut r)? as usize);
            }
            let numel: usize = shape.iter().product();
            if numel * 4 > r.len() {
                return Err(ModelError::Format(format!("tensor `{name}` truncated")));
            }
            let data = r[..numel * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            r = &r[numel * 4..];
            tensors.push((name, Tensor::new(&shape, data)?));
        }
        if !r.is_empty() {
            return Err(ModelError::Format(format!("{} trailing bytes", r.len())));
        }
        Ok(SnapshotFile { header, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<(), ModelError> {
    r.read_exact(buf)
        .map_err(|_| ModelError::Format("unexpected end of snapshot".into()))
}

fn read_u32(r: &mut &[u8]) -> Result<u32, ModelError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u16(r: &mut &[u8]) -> Result<u16, ModelError> {
    let mut b = [0u8; 2];
    read_exact(r, &mut b)?;
    Ok(u16::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Generator;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn generator_roundtrip_is_bit_exact() {
        let cfg = ModelConfig {
            resolution: 8,
            z_dim: 4,
            base_channels: 4,
            min_channels: 2,
            ..Default::default()
        };
        let g = Generator::<f32>::new(&cfg, 11).unwrap();
        let mut header = SnapshotHeader::new("gan");
        header.model = Some(cfg.clone());
        header.step = 42;
        let mut file = SnapshotFile::new(header);
        file.push_params("g.", g.params());
        let bytes = file.to_bytes().unwrap();
        let back = SnapshotFile::from_bytes(&bytes).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_bytes().unwrap(), bytes);

        let mut g2 = Generator::<f32>::new(&cfg, 99).unwrap();
        g2.params_mut().load_from(&back.params_with_prefix("g.")).unwrap();
        assert_eq!(g2.params(), g.params());
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut file = SnapshotFile::new(SnapshotHeader::new("x"));
        file.tensors.push(("a".into(), Tensor::ones(&[2, 2])));
        let bytes = file.to_bytes().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(SnapshotFile::from_bytes(&bad), Err(ModelError::Format(_))));
        assert!(SnapshotFile::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn rng_state_roundtrip() {
        use rand::RngCore;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        rng.set_stream(3);
        rng.next_u64();
        let st = RngState::capture(&rng);
        let mut back = st.restore().unwrap();
        assert_eq!(back.next_u64(), rng.next_u64());
    }

    proptest! {
        #[test]
        fn arbitrary_tensors_roundtrip(values in proptest::collection::vec(any::<f32>(), 1..64), step in any::<u64>()) {
            let mut header = SnapshotHeader::new("p");
            header.step = step;
            let mut file = SnapshotFile::new(header);
            let n = values.len();
            file.tensors.push(("t".into(), Tensor::new(&[n], values).unwrap()));
            let bytes = file.to_bytes().unwrap();
            let back = SnapshotFile::from_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        }
    }
}
