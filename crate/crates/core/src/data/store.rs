//! Packed binary store for extracted patch samples.
//!
//! Layout: magic "LFPD", u16 version, u64 sample count, u16 patch side,
//! u16 frames per sample, then raw sample bytes. All integers little
//! endian.

use super::patches::{PatchSample, FRAMES_PER_SAMPLE, PATCH_SIZE};
use crate::error::{Error, Result};
use crate::util::ByteReader;
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 4] = b"LFPD";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 8 + 2 + 2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetStore {
    samples: Vec<PatchSample>,
}

impl DatasetStore {
    pub fn new(samples: Vec<PatchSample>) -> Self {
        DatasetStore { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, i: usize) -> &PatchSample {
        &self.samples[i]
    }

    pub fn samples(&self) -> &[PatchSample] {
        &self.samples
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let sample_len = FRAMES_PER_SAMPLE * PATCH_SIZE * PATCH_SIZE;
        let mut out = Vec::with_capacity(HEADER_LEN + self.samples.len() * sample_len);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.samples.len() as u64).to_le_bytes());
        out.extend_from_slice(&(PATCH_SIZE as u16).to_le_bytes());
        out.extend_from_slice(&(FRAMES_PER_SAMPLE as u16).to_le_bytes());
        for s in &self.samples {
            out.extend_from_slice(s.bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let magic = r.take(4, "magic").map_err(integrity)?;
        if magic != MAGIC {
            return Err(Error::Integrity("not a dataset file (bad magic)".into()));
        }
        let version = r.u16("version").map_err(integrity)?;
        if version != VERSION {
            return Err(Error::Integrity(format!("unsupported dataset version {version}")));
        }
        let count = r.u64("count").map_err(integrity)? as usize;
        let patch = r.u16("patch side").map_err(integrity)? as usize;
        let fps = r.u16("frames per sample").map_err(integrity)? as usize;
        if patch != PATCH_SIZE || fps != FRAMES_PER_SAMPLE {
            return Err(Error::Integrity(format!(
                "dataset geometry {patch}px x{fps} frames is not {PATCH_SIZE}px x{FRAMES_PER_SAMPLE}"
            )));
        }
        let sample_len = fps * patch * patch;
        let expect = count
            .checked_mul(sample_len)
            .ok_or_else(|| Error::Integrity("dataset count overflows".into()))?;
        if r.remaining() != expect {
            return Err(Error::Integrity(format!(
                "dataset payload is {} bytes, header implies {expect}",
                r.remaining()
            )));
        }
        let mut samples = Vec::with_capacity(count);
        for _ in 0..count {
            let raw = r.take(sample_len, "sample").map_err(integrity)?;
            samples.push(PatchSample::from_bytes(raw.to_vec())?);
        }
        Ok(DatasetStore { samples })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())
            .map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)
            .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

fn integrity(e: Error) -> Error {
    Error::Integrity(format!("dataset header unreadable: {e}"))
}
