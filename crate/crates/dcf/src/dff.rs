//! `DFF1` precomputed feature files.
//!
//! Layout: magic `DFF1`, then little-endian `u32` frame count, H, W, D, then
//! `frames * H * W * D` little-endian `f32`, frame-major, row-major,
//! channel-last.

use std::path::Path;

use deform_dcf_core::features::{raster_channels, FeatureMap, Image};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"DFF1";
pub const HEADER_LEN: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureFile {
    frames: usize,
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

/// Parse failure inside a byte buffer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormatError {
    pub offset: u64,
    pub message: String,
}

impl FeatureFile {
    pub fn new(frames: usize, height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Config(format!("feature frames must be nonempty, got {height}x{width}x{channels}")));
        }
        let want = frames * height * width * channels;
        if data.len() != want {
            return Err(deform_dcf_core::Error::Dimension(format!("{} values for {want} slots", data.len())).into());
        }
        Ok(Self { frames, height, width, channels, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    /// (H, W, D).
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// One frame as a channel-last raster.
    pub fn raster(&self, index: usize) -> Result<Image> {
        if index >= self.frames {
            return Err(Error::Range { index, count: self.frames });
        }
        let n = self.height * self.width * self.channels;
        let slice = self.data[index * n..(index + 1) * n].to_vec();
        Ok(Image::new(self.width, self.height, self.channels, slice)?)
    }

    pub fn frame(&self, index: usize) -> Result<FeatureMap> {
        Ok(raster_channels(&self.raster(index)?)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(&MAGIC);
        for v in [self.frames, self.height, self.width, self.channels] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let fail = |offset: usize, message: String| FormatError { offset: offset as u64, message };
        if bytes.len() < 4 || bytes[..4] != MAGIC {
            return Err(fail(0, "missing DFF1 magic".into()));
        }
        if bytes.len() < HEADER_LEN {
            return Err(fail(bytes.len(), format!("header needs {HEADER_LEN} bytes, found {}", bytes.len())));
        }
        let field = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let (frames, height, width, channels) = (field(0), field(1), field(2), field(3));
        if height == 0 || width == 0 || channels == 0 {
            return Err(fail(8, format!("zero frame dimension {height}x{width}x{channels}")));
        }
        let expected = [frames, height, width, channels, 4]
            .iter()
            .try_fold(1usize, |a, b| a.checked_mul(*b))
            .ok_or_else(|| fail(4, "payload size overflows".into()))?;
        let actual = bytes.len() - HEADER_LEN;
        if actual != expected {
            return Err(fail(HEADER_LEN, format!("payload needs {expected} bytes, found {actual}")));
        }
        let data = bytes[HEADER_LEN..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { frames, height, width, channels, data })
    }
}

pub fn load(path: impl AsRef<Path>) -> Result<FeatureFile> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    FeatureFile::from_bytes(&bytes).map_err(|e| Error::Format { path: path.into(), offset: e.offset, message: e.message })
}

pub fn save(path: impl AsRef<Path>, file: &FeatureFile) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, file.to_bytes()).map_err(Error::io(path))
}

/// Feature map of one frame of a `DFF1` file.
pub fn load_precomputed(path: impl AsRef<Path>, frame_index: usize) -> Result<FeatureMap> {
    load(path)?.frame(frame_index)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Vec<u8> {
        let mut b = b"DFF1".to_vec();
        for v in [1u32, 2, 2, 1] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        for v in [1.0f32, 2.0, 3.0, 4.0] {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn hand_written_file() {
        let bytes = fixture();
        assert_eq!(bytes.len(), 36);
        let f = FeatureFile::from_bytes(&bytes).unwrap();
        let map = f.frame(0).unwrap();
        assert_eq!(map.len(), 1);
        let g = &map.channels[0];
        assert_eq!((g.width(), g.height()), (2, 2));
        assert_eq!([g.get(0, 0), g.get(1, 0), g.get(0, 1), g.get(1, 1)], [1.0, 2.0, 3.0, 4.0]);
        assert_eq!(f.to_bytes(), bytes);
    }

    #[test]
    fn channel_last_order() {
        let f = FeatureFile::new(2, 1, 2, 3, (0..12).map(|v| v as f32).collect()).unwrap();
        let map = f.frame(1).unwrap();
        assert_eq!(map.channels[0].data(), &[6.0, 9.0]);
        assert_eq!(map.channels[2].data(), &[8.0, 11.0]);
        assert!(matches!(f.frame(2), Err(Error::Range { index: 2, count: 2 })));
    }

    #[test]
    fn malformed_files() {
        let mut bytes = fixture();
        bytes[0] = b'X';
        assert_eq!(FeatureFile::from_bytes(&bytes).unwrap_err().offset, 0);
        let err = FeatureFile::from_bytes(&fixture()[..30]).unwrap_err();
        assert_eq!(err.offset, 20);
        assert!(err.message.contains("16") && err.message.contains("10"), "{}", err.message);
        let err = FeatureFile::from_bytes(&fixture()[..12]).unwrap_err();
        assert_eq!(err.offset, 12);
        let mut long = fixture();
        long.push(0);
        assert!(FeatureFile::from_bytes(&long).is_err());
    }
}
