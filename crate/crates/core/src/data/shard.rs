use std::path::{Path, PathBuf};

use image::RgbImage;

use super::DataError;

pub const SHARD_MAGIC: &[u8; 8] = b"SGSHARD1";
pub const SHARD_VERSION: u16 = 1;
pub const SHARD_HEADER_LEN: usize = 23;
const SHARD_EXT: &str = "sgs";

/// Fixed 23-byte little-endian header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShardHeader {
    pub version: u16,
    pub width: u16,
    pub height: u16,
    pub channels: u8,
    pub count: u64,
}

impl ShardHeader {
    pub fn new(width: u16, height: u16, channels: u8, count: u64) -> Self {
        ShardHeader {
            version: SHARD_VERSION,
            width,
            height,
            channels,
            count,
        }
    }

    pub fn record_len(&self) -> usize {
        self.width as usize * self.height as usize * self.channels as usize
    }

    pub fn to_bytes(&self) -> [u8; SHARD_HEADER_LEN] {
        let mut b = [0u8; SHARD_HEADER_LEN];
        b[..8].copy_from_slice(SHARD_MAGIC);
        b[8..10].copy_from_slice(&self.version.to_le_bytes());
        b[10..12].copy_from_slice(&self.width.to_le_bytes());
        b[12..14].copy_from_slice(&self.height.to_le_bytes());
        b[14] = self.channels;
        b[15..23].copy_from_slice(&self.count.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self, DataError> {
        if b.len() < 8 || &b[..8] != SHARD_MAGIC {
            return Err(DataError::Format("missing SGSHARD1 magic".into()));
        }
        if b.len() < SHARD_HEADER_LEN {
            return Err(DataError::Corruption(format!(
                "header is {} bytes, expected {SHARD_HEADER_LEN}",
                b.len()
            )));
        }
        let u16_at = |i: usize| u16::from_le_bytes([b[i], b[i + 1]]);
        let mut count = [0u8; 8];
        count.copy_from_slice(&b[15..23]);
        let h = ShardHeader {
            version: u16_at(8),
            width: u16_at(10),
            height: u16_at(12),
            channels: b[14],
            count: u64::from_le_bytes(count),
        };
        if h.version != SHARD_VERSION {
            return Err(DataError::Format(format!("unsupported shard version {}", h.version)));
        }
        Ok(h)
    }
}

/// One shard held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct ShardFile {
    pub header: ShardHeader,
    data: Vec<u8>,
}

impl ShardFile {
    pub fn new(width: u16, height: u16, channels: u8) -> Self {
        ShardFile {
            header: ShardHeader::new(width, height, channels, 0),
            data: Vec::new(),
        }
    }

    pub fn push(&mut self, record: &[u8]) -> Result<(), DataError> {
        if record.len() != self.header.record_len() {
            return Err(DataError::Shape(format!(
                "record of {} bytes in a shard of {}-byte records",
                record.len(),
                self.header.record_len()
            )));
        }
        self.data.extend_from_slice(record);
        self.header.count += 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.header.count as usize
    }

    pub fn is_empty(&self) -> bool {
        self.header.count == 0
    }

    pub fn record(&self, i: usize) -> &[u8] {
        let n = self.header.record_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SHARD_HEADER_LEN + self.data.len());
        out.extend_from_slice(&self.header.to_bytes());
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DataError> {
        let header = ShardHeader::from_bytes(bytes)?;
        let expected = (header.count as u128) * header.record_len() as u128 + SHARD_HEADER_LEN as u128;
        if bytes.len() as u128 != expected {
            return Err(DataError::Corruption(format!(
                "file is {} bytes but header promises {expected}",
                bytes.len()
            )));
        }
        Ok(ShardFile {
            header,
            data: bytes[SHARD_HEADER_LEN..].to_vec(),
        })
    }

    pub fn open(path: &Path) -> Result<Self, DataError> {
        let bytes = std::fs::read(path).map_err(|e| DataError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            DataError::Format(m) => DataError::Format(format!("{}: {m}", path.display())),
            DataError::Corruption(m) => DataError::Corruption(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Writes records into `dir` as `shard-00000.sgs`, `shard-00001.sgs`, … holding at
/// most `capacity` records each. An empty input still produces one empty shard.
pub fn write_shards<'a>(
    dir: &Path,
    width: u16,
    height: u16,
    channels: u8,
    records: impl IntoIterator<Item = &'a [u8]>,
    capacity: usize,
) -> Result<Vec<PathBuf>, DataError> {
    if capacity == 0 {
        return Err(DataError::Shape("shard capacity must be positive".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    let mut paths = Vec::new();
    let mut current = ShardFile::new(width, height, channels);
    let flush = |shard: &ShardFile, paths: &mut Vec<PathBuf>| -> Result<(), DataError> {
        let p = dir.join(format!("shard-{:05}.{SHARD_EXT}", paths.len()));
        std::fs::write(&p, shard.to_bytes()).map_err(|e| DataError::io(&p, e))?;
        paths.push(p);
        Ok(())
    };
    for r in records {
        current.push(r)?;
        if current.len() == capacity {
            flush(&current, &mut paths)?;
            current = ShardFile::new(width, height, channels);
        }
    }
    if !current.is_empty() || paths.is_empty() {
        flush(&current, &mut paths)?;
    }
    Ok(paths)
}

/// Opens a single shard file, or every `*.sgs` file of a directory in name order.
pub fn read_shards(path: &Path) -> Result<ShardSet, DataError> {
    let files = if path.is_dir() {
        let mut v: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| DataError::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == SHARD_EXT))
            .collect();
        v.sort();
        if v.is_empty() {
            return Err(DataError::Format(format!("{}: no shard files", path.display())));
        }
        v
    } else {
        vec![path.to_path_buf()]
    };
    let shards = files
        .iter()
        .map(|p| ShardFile::open(p))
        .collect::<Result<Vec<_>, _>>()?;
    ShardSet::new(shards)
}

/// Ordered concatenation of shards with identical record shapes.
#[derive(Debug, Clone)]
pub struct ShardSet {
    shards: Vec<ShardFile>,
    offsets: Vec<usize>,
}

impl ShardSet {
    pub fn new(shards: Vec<ShardFile>) -> Result<Self, DataError> {
        let first = shards
            .first()
            .ok_or_else(|| DataError::Format("empty shard set".into()))?
            .header;
        let mut offsets = Vec::with_capacity(shards.len() + 1);
        let mut total = 0;
        for s in &shards {
            let h = s.header;
            if (h.width, h.height, h.channels) != (first.width, first.height, first.channels) {
                return Err(DataError::Shape(format!(
                    "shards mix {}×{}×{} and {}×{}×{} records",
                    first.width, first.height, first.channels, h.width, h.height, h.channels
                )));
            }
            offsets.push(total);
            total += s.len();
        }
        offsets.push(total);
        Ok(ShardSet { shards, offsets })
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(width, height, channels)` of every record.
    pub fn record_shape(&self) -> (usize, usize, usize) {
        let h = self.shards[0].header;
        (h.width as usize, h.height as usize, h.channels as usize)
    }

    pub fn record(&self, i: usize) -> &[u8] {
        let s = self.offsets.partition_point(|&o| o <= i) - 1;
        self.shards[s].record(i - self.offsets[s])
    }

    pub fn image(&self, i: usize) -> Result<RgbImage, DataError> {
        let (w, h, c) = self.record_shape();
        if c != 3 {
            return Err(DataError::Shape(format!("{c}-channel records are not RGB")));
        }
        Ok(RgbImage::from_raw(w as u32, h as u32, self.record(i).to_vec()).expect("record length"))
    }

    pub fn cursor(&self) -> ShardCursor<'_> {
        self.cursor_range(0, self.len())
    }

    /// Independent cursor over records `start..end`.
    pub fn cursor_range(&self, start: usize, end: usize) -> ShardCursor<'_> {
        ShardCursor {
            set: self,
            next: start.min(self.len()),
            end: end.min(self.len()),
        }
    }

    /// `k` disjoint contiguous cursors that together cover every record once.
    pub fn partition(&self, k: usize) -> Vec<ShardCursor<'_>> {
        let k = k.max(1);
        let n = self.len();
        (0..k)
            .map(|j| self.cursor_range(j * n / k, (j + 1) * n / k))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ShardCursor<'a> {
    set: &'a ShardSet,
    next: usize,
    end: usize,
}

impl<'a> Iterator for ShardCursor<'a> {
    type Item = &'a [u8];

    fn next(&mut self) -> Option<&'a [u8]> {
        if self.next >= self.end {
            return None;
        }
        let r = self.set.record(self.next);
        self.next += 1;
        Some(r)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.end - self.next;
        (n, Some(n))
    }
}

impl ExactSizeIterator for ShardCursor<'_> {}
