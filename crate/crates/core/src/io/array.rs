//! `.bska` array files: a 16-byte header (magic `BSKA`, version u16, dtype
//! u16, height u32, width u32, all little-endian) followed by row-major
//! little-endian f32 values.

use std::fs;
use std::path::Path;

use crate::error::BundleError;
use crate::grid::Grid;

pub const MAGIC: &[u8; 4] = b"BSKA";
pub const FORMAT_VERSION: u16 = 1;
pub const DTYPE_F32: u16 = 1;
const HEADER_LEN: usize = 16;

/// Row-major `f32` array as stored on disk.
#[derive(Clone, Debug)]
pub struct Array2 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

/// Bit-level equality, so NaN entries compare equal to themselves.
impl PartialEq for Array2 {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.data.len() == other.data.len()
            && self.data.iter().zip(&other.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl Array2 {
    pub fn from_grid(g: &Grid) -> Self {
        Self { width: g.width(), height: g.height(), data: g.data().iter().map(|x| *x as f32).collect() }
    }

    pub fn to_grid(&self) -> Grid {
        Grid::new(self.width, self.height, self.data.iter().map(|x| *x as f64).collect())
            .expect("array shape checked on construction")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&DTYPE_F32.to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), BundleError> {
        fs::write(path, self.to_bytes()).map_err(|source| BundleError::Io { path: path.to_owned(), source })
    }

    /// Reads and validates one array; `expect` is the `(width, height)` the
    /// manifest declares.
    pub fn read(path: &Path, expect: (usize, usize)) -> Result<Self, BundleError> {
        let bytes = fs::read(path).map_err(|source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                BundleError::MissingFile(path.to_owned())
            } else {
                BundleError::Io { path: path.to_owned(), source }
            }
        })?;
        let shape_err = |detail: String| BundleError::ShapeMismatch { path: path.to_owned(), detail };
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(BundleError::BadMagic(path.to_owned()));
        }
        if bytes.len() < HEADER_LEN {
            return Err(shape_err(format!("header truncated to {} bytes", bytes.len())));
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let u32_at = |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
        let version = u16_at(4);
        if version != FORMAT_VERSION {
            return Err(BundleError::VersionMismatch {
                path: path.to_owned(),
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let dtype = u16_at(6);
        if dtype != DTYPE_F32 {
            return Err(BundleError::UnsupportedDtype { path: path.to_owned(), found: dtype });
        }
        let (height, width) = (u32_at(8) as usize, u32_at(12) as usize);
        if (width, height) != expect {
            return Err(shape_err(format!(
                "header declares {width}x{height}, manifest expects {}x{}",
                expect.0, expect.1
            )));
        }
        let body = &bytes[HEADER_LEN..];
        if body.len() != 4 * width * height {
            return Err(shape_err(format!(
                "{} payload bytes for a {width}x{height} f32 array ({} expected)",
                body.len(),
                4 * width * height
            )));
        }
        let data = body.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Ok(Self { width, height, data })
    }
}
