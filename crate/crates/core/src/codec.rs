//! The `.l0ne` container: a sparse half-precision SIREN plus the image size
//! it was fitted to.
//!
//! Layout, all integers little-endian:
//!
//! | bytes | field |
//! |-------|-------|
//! | 4 | magic `L0NE` |
//! | 1 | version (1) |
//! | 1 | precision tag (16) |
//! | 4 | ω0 as binary32 |
//! | 4 | image height (u32) |
//! | 4 | image width (u32) |
//! | 1 | number of layer widths `n` |
//! | 2·n | layer widths (u16): input, hidden…, output |
//! | ⌈P/8⌉ | mask, one bit per parameter in flat order, LSB first |
//! | 2·popcount | binary16 values of the masked-in parameters |
//!
//! A mask bit is set exactly when the parameter's binary16 cast is nonzero,
//! so each model has a single encoding. Decoding rejects anything that would
//! not re-encode to the same bytes.

use std::fs;
use std::path::Path;

use half::f16;

use crate::bpp::{self, HALF_BITS};
use crate::error::{DecodeError, Error, Result};
use crate::imageio::make_coord_grid;
use crate::siren::SirenConfig;
use crate::trainer::{reconstruct_rgb8, TrainedModel};

pub const MAGIC: [u8; 4] = *b"L0NE";
pub const VERSION: u8 = 1;
pub const PRECISION_HALF: u8 = 16;
/// Magic, version, precision, ω0, height, width and the width count.
pub const FIXED_HEADER_BYTES: usize = 4 + 1 + 1 + 4 + 4 + 4 + 1;

/// Byte budget of an encoded model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeReport {
    pub active_params: usize,
    pub header_bytes: usize,
    pub mask_bytes: usize,
    pub payload_bytes: usize,
    pub total_bytes: usize,
    /// Payload bits per pixel, the figure BPP targets refer to.
    pub payload_bpp: f64,
    /// Whole-file bits per pixel including header and mask.
    pub file_bpp: f64,
}

impl SizeReport {
    pub fn new(arch: &SirenConfig, active_params: usize, height: usize, width: usize) -> Self {
        let pixels = height * width;
        let header_bytes = header_len(arch);
        let mask_bytes = arch.param_count().div_ceil(8);
        let payload_bytes = 2 * active_params;
        let total_bytes = header_bytes + mask_bytes + payload_bytes;
        Self {
            active_params,
            header_bytes,
            mask_bytes,
            payload_bytes,
            total_bytes,
            payload_bpp: bpp::bits_per_pixel(active_params, HALF_BITS, pixels),
            file_bpp: bpp::bits_per_pixel(total_bytes, 8, pixels),
        }
    }
}

fn header_len(arch: &SirenConfig) -> usize {
    FIXED_HEADER_BYTES + 2 * (arch.hidden_layers + 2)
}

fn layer_widths(arch: &SirenConfig) -> Vec<usize> {
    let mut widths = vec![arch.input_dim];
    widths.extend(std::iter::repeat_n(arch.hidden_width, arch.hidden_layers));
    widths.push(arch.output_dim);
    widths
}

/// Serializes the model's effective parameters at half precision.
pub fn encode(model: &TrainedModel, height: usize, width: usize) -> Result<Vec<u8>> {
    model.validate()?;
    let arch = model.arch;
    let widths = layer_widths(&arch);
    if widths.len() > usize::from(u8::MAX) {
        return Err(Error::HeaderRange(format!(
            "{} layer widths exceed the 255 the header can hold",
            widths.len()
        )));
    }
    if let Some(&w) = widths.iter().find(|&&w| w > usize::from(u16::MAX)) {
        return Err(Error::HeaderRange(format!("layer width {w} exceeds 65535")));
    }
    let dim = |name: &str, v: usize| {
        u32::try_from(v).map_err(|_| Error::HeaderRange(format!("image {name} {v} exceeds u32")))
    };
    let (h32, w32) = (dim("height", height)?, dim("width", width)?);
    if height == 0 || width == 0 {
        return Err(Error::EmptyImage { height, width });
    }

    let values: Vec<f16> = model
        .effective()
        .flat
        .iter()
        .map(|&v| bpp::cast_f16(v))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(
            "model has parameters that are not finite at half precision".into(),
        ));
    }

    let mut out =
        Vec::with_capacity(SizeReport::new(&arch, values.len(), height, width).total_bytes);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(PRECISION_HALF);
    out.extend_from_slice(&arch.omega0.to_le_bytes());
    out.extend_from_slice(&h32.to_le_bytes());
    out.extend_from_slice(&w32.to_le_bytes());
    out.push(widths.len() as u8);
    for w in widths {
        out.extend_from_slice(&(w as u16).to_le_bytes());
    }

    let mut mask = vec![0u8; values.len().div_ceil(8)];
    for (i, v) in values.iter().enumerate() {
        if !is_zero(*v) {
            mask[i / 8] |= 1 << (i % 8);
        }
    }
    out.extend_from_slice(&mask);
    for v in values.iter().filter(|v| !is_zero(**v)) {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    Ok(out)
}

fn is_zero(v: f16) -> bool {
    v.to_bits() & 0x7fff == 0
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let needed = self.pos + n;
        if needed > self.bytes.len() {
            return Err(DecodeError::Truncated {
                needed,
                available: self.bytes.len(),
            });
        }
        let slice = &self.bytes[self.pos..needed];
        self.pos = needed;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.array()?))
    }
}

/// Parses a `.l0ne` stream into a masked model (gates all one) and the
/// stored `(height, width)`.
pub fn decode(bytes: &[u8]) -> Result<(TrainedModel, (usize, usize))> {
    Ok(decode_inner(bytes)?)
}

fn decode_inner(bytes: &[u8]) -> Result<(TrainedModel, (usize, usize)), DecodeError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.array()?;
    if magic != MAGIC {
        return Err(DecodeError::BadMagic(magic));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(DecodeError::UnsupportedVersion(version));
    }
    let precision = r.u8()?;
    if precision != PRECISION_HALF {
        return Err(DecodeError::UnsupportedPrecision(precision));
    }
    let omega0 = f32::from_le_bytes(r.array()?);
    let height = r.u32()? as usize;
    let width = r.u32()? as usize;
    let count = usize::from(r.u8()?);
    let widths = (0..count)
        .map(|_| r.u16().map(usize::from))
        .collect::<Result<Vec<_>, _>>()?;

    let arch_err = |msg: String| DecodeError::Architecture(msg);
    if height == 0 || width == 0 {
        return Err(arch_err(format!("image size {height}x{width}")));
    }
    if count < 3 {
        return Err(arch_err(format!("{count} layer widths, need at least 3")));
    }
    let hidden = &widths[1..count - 1];
    if hidden.iter().any(|&w| w != hidden[0]) {
        return Err(arch_err(format!("non-uniform hidden widths {hidden:?}")));
    }
    let arch = SirenConfig {
        input_dim: widths[0],
        output_dim: widths[count - 1],
        hidden_layers: hidden.len(),
        hidden_width: hidden[0],
        omega0,
    };
    arch.validate().map_err(|e| arch_err(e.to_string()))?;

    let n = arch.param_count();
    let mask_bytes = r.take(n.div_ceil(8))?;
    if !n.is_multiple_of(8) && mask_bytes[n / 8] >> (n % 8) != 0 {
        return Err(DecodeError::NonCanonical("mask padding bits are set"));
    }
    let mask: Vec<bool> = (0..n)
        .map(|i| mask_bytes[i / 8] & (1 << (i % 8)) != 0)
        .collect();
    let active = mask.iter().filter(|&&m| m).count();
    let remaining = bytes.len() - r.pos;
    if remaining > 2 * active {
        return Err(DecodeError::CountMismatch {
            mask: active,
            payload_bytes: remaining,
        });
    }

    let mut magnitudes = vec![0.0f32; n];
    for (slot, _) in magnitudes.iter_mut().zip(&mask).filter(|(_, &m)| m) {
        let v = f16::from_bits(r.u16()?);
        if is_zero(v) {
            return Err(DecodeError::NonCanonical("payload holds a zero value"));
        }
        if !v.is_finite() {
            return Err(DecodeError::NonCanonical(
                "payload holds a non-finite value",
            ));
        }
        *slot = v.to_f32();
    }
    let model = TrainedModel {
        arch,
        magnitudes,
        gates: vec![1.0; n],
        mask: Some(mask),
    };
    Ok((model, (height, width)))
}

/// Renders the model at `height × width` as interleaved 8-bit RGB, using
/// the binary16-rounded parameters.
pub fn decompress_to_image(model: &TrainedModel, height: usize, width: usize) -> Result<Vec<u8>> {
    if height == 0 || width == 0 {
        return Err(Error::EmptyImage { height, width });
    }
    reconstruct_rgb8(&model.decoded(), &make_coord_grid(height, width))
}

/// Size breakdown of the encoding of `model`.
pub fn size_report(model: &TrainedModel, height: usize, width: usize) -> SizeReport {
    let active = bpp::active_count(&model.effective().flat);
    SizeReport::new(&model.arch, active, height, width)
}

pub fn save_model(
    model: &TrainedModel,
    height: usize,
    width: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(model, height, width)?;
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<(TrainedModel, (usize, usize))> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}
