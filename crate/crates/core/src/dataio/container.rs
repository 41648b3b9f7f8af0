//! Bit-exact weight container.
//!
//! Layout, all integers little-endian:
//!   magic "HDNW" · u16 version=1 · u32 entry count
//!   per entry: u32 name length · UTF-8 name · u8 dtype (0 = f32) ·
//!              u8 rank · rank × u64 dims · u64 payload byte offset
//!   payload (f32 little-endian, entries back to back)
//!   u32 CRC32 (IEEE) of the payload bytes

use std::path::Path;

use crate::error::{Error, Result};
use crate::net::weights::{Provenance, WeightStore};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"HDNW";
const VERSION: u16 = 1;

/// Standard reflected CRC32 (polynomial 0xEDB88320).
pub fn crc32(bytes: &[u8]) -> u32 {
    let mut table = [0u32; 256];
    for (i, slot) in table.iter_mut().enumerate() {
        let mut c = i as u32;
        for _ in 0..8 {
            c = if c & 1 != 0 { 0xEDB8_8320 ^ (c >> 1) } else { c >> 1 };
        }
        *slot = c;
    }
    let mut crc = 0xFFFF_FFFFu32;
    for &b in bytes {
        crc = table[((crc ^ b as u32) & 0xFF) as usize] ^ (crc >> 8);
    }
    crc ^ 0xFFFF_FFFF
}

/// Serializes a weight store; entries are written in name order.
pub fn save_weights(store: &WeightStore, path: &Path) -> Result<()> {
    let mut header: Vec<u8> = Vec::new();
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.extend_from_slice(&(store.len() as u32).to_le_bytes());

    let mut payload: Vec<u8> = Vec::new();
    for (name, tensor) in store.iter() {
        header.extend_from_slice(&(name.len() as u32).to_le_bytes());
        header.extend_from_slice(name.as_bytes());
        header.push(0); // dtype f32
        header.push(tensor.rank() as u8);
        for &d in tensor.shape() {
            header.extend_from_slice(&(d as u64).to_le_bytes());
        }
        header.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        for &v in tensor.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32(&payload);
    let mut bytes = header;
    bytes.extend_from_slice(&payload);
    bytes.extend_from_slice(&crc.to_le_bytes());

    let tmp = path.with_extension("tmp-write");
    std::fs::write(&tmp, &bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Container(format!(
                "truncated while reading {what} at byte {}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Loads a weight container, verifying the payload CRC.
pub fn load_weights(path: &Path) -> Result<WeightStore> {
    let bytes = std::fs::read(path)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Container("bad magic, expected HDNW".into()));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::Container(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let count = r.u32("entry count")? as usize;
    struct Entry {
        name: String,
        shape: Vec<usize>,
        offset: usize,
    }
    let mut entries = Vec::with_capacity(count);
    for i in 0..count {
        let name_len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| Error::Container(format!("entry {i}: name is not UTF-8")))?
            .to_string();
        let dtype = r.take(1, "dtype")?[0];
        if dtype != 0 {
            return Err(Error::Container(format!("entry {name}: unsupported dtype {dtype}")));
        }
        let rank = r.take(1, "rank")?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64("dim")? as usize);
        }
        let offset = r.u64("offset")? as usize;
        entries.push(Entry { name, shape, offset });
    }
    let payload_start = r.pos;
    if bytes.len() < payload_start + 4 {
        return Err(Error::Container("missing payload CRC".into()));
    }
    let payload = &bytes[payload_start..bytes.len() - 4];
    let stored_crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let actual_crc = crc32(payload);
    if stored_crc != actual_crc {
        return Err(Error::Container(format!(
            "payload CRC mismatch over bytes {payload_start}..{}: stored {stored_crc:#010x}, computed {actual_crc:#010x}",
            bytes.len() - 4
        )));
    }
    let mut store = WeightStore::empty(Provenance::File(path.to_path_buf()));
    for e in entries {
        let numel: usize = e.shape.iter().product();
        let end = e.offset + numel * 4;
        if end > payload.len() {
            return Err(Error::Container(format!(
                "entry {} spans {}..{end}, payload has {} bytes",
                e.name, e.offset, payload.len()
            )));
        }
        let mut data = Vec::with_capacity(numel);
        for chunk in payload[e.offset..end].chunks_exact(4) {
            data.push(f32::from_le_bytes(chunk.try_into().unwrap()));
        }
        store.insert(&e.name, Tensor::new(e.shape, data)?)?;
    }
    Ok(store)
}
