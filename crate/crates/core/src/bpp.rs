//! Bit accounting for stored models.
//!
//! BPP here is parameter payload bits per pixel: every parameter whose
//! binary16 cast is nonzero costs 16 bits. Mask and header overhead are
//! reported separately by the codec.

use half::f16;

use crate::hardconcrete::GateParams;
use crate::real::Real;
use crate::siren::SirenConfig;

pub const HALF_BITS: u32 = 16;
pub const SINGLE_BITS: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BppReport {
    pub active_params: usize,
    pub bits_per_param: u32,
    pub pixel_count: usize,
    pub bpp: f64,
}

impl BppReport {
    pub fn new(active_params: usize, bits_per_param: u32, pixel_count: usize) -> Self {
        assert!(pixel_count > 0, "pixel count must be positive");
        Self {
            active_params,
            bits_per_param,
            pixel_count,
            bpp: bits_per_pixel(active_params, bits_per_param, pixel_count),
        }
    }
}

/// `count · bits / pixels`, the single formula every BPP figure goes through.
pub fn bits_per_pixel(count: usize, bits: u32, pixel_count: usize) -> f64 {
    (count as f64 * f64::from(bits)) / pixel_count as f64
}

/// IEEE 754 binary16 with round-to-nearest-even.
pub fn cast_f16(x: f32) -> f16 {
    f16::from_f32(x)
}

pub fn f16_bits(x: f32) -> u16 {
    cast_f16(x).to_bits()
}

/// Casts through binary16 and back, the values a decoder computes with.
/// Signed zeros come back as `+0`.
pub fn half_roundtrip<T: Real>(params: &[T]) -> Vec<f32> {
    params
        .iter()
        .map(|&v| {
            let h = v.to_f16();
            if h.to_bits() & 0x7fff == 0 {
                0.0
            } else {
                h.to_f32()
            }
        })
        .collect()
}

/// Number of parameters whose binary16 cast is nonzero.
pub fn active_count<T: Real>(params: &[T]) -> usize {
    params
        .iter()
        .filter(|&&v| v.to_f16().to_bits() & 0x7fff != 0)
        .count()
}

/// Exact BPP of a model stored at half precision.
pub fn casted_bpp<T: Real>(effective_params: &[T], pixel_count: usize) -> BppReport {
    BppReport::new(active_count(effective_params), HALF_BITS, pixel_count)
}

/// Differentiable surrogate `16 · E[L0] / pixels` and its gradient with
/// respect to each ψ. Magnitudes do not enter.
pub fn expected_bpp<T: Real>(gates: &GateParams<T>, pixel_count: usize) -> (T, Vec<T>) {
    assert!(pixel_count > 0, "pixel count must be positive");
    let scale = T::from_f64(f64::from(HALF_BITS) / pixel_count as f64);
    let value = scale * gates.expected_l0();
    let grad = gates
        .expected_l0_grad()
        .into_iter()
        .map(|g| scale * g)
        .collect();
    (value, grad)
}

/// BPP of the dense architecture.
pub fn arch_bpp(config: &SirenConfig, bits_per_param: u32, pixel_count: usize) -> f64 {
    bits_per_pixel(config.param_count(), bits_per_param, pixel_count)
}
