//! 8x8 block-DCT color enhancement.
//!
//! The image is converted to YCbCr, each plane is padded to multiples of 8
//! by edge replication and split into blocks, and the luminance DC
//! coefficient of every block is remapped through a monotone brightening
//! curve. Depending on the mode the AC coefficients follow the same gain
//! (preserving the within-block AC/DC ratio) and the co-located chroma
//! blocks are rescaled about the neutral point.
//!
//! The transform is the orthonormal 2-D DCT-II, so Parseval's identity
//! holds and the DC of a block of samples in `[0, 255]` lies in
//! `[0, 2040]` (eight times the block mean).

use crate::pixelbuf::{rgb_to_ycbcr, ycbcr_to_rgb, RgbImage, YccPlanes};
use std::sync::LazyLock;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Side of a coefficient block.
pub const BLOCK_SIZE: usize = 8;
/// Default exponent of the eta mapping.
pub const DEFAULT_ETA: f64 = 0.75;

/// Orthonormal DC of an all-white block: `8 * 255`.
const DC_WHITE: f64 = 2040.0;
/// Orthonormal DC of a neutral chroma block: `8 * 128`.
const DC_NEUTRAL_CHROMA: f64 = 1024.0;
/// Blocks with DC at or below this are treated as black and left alone.
const DC_BLACK_EPS: f64 = 1e-6;
/// Chroma gain is clamped to this range to bound saturation distortion.
const CHROMA_GAIN: (f64, f64) = (0.5, 2.0);

/// An 8x8 square of spatial samples.
pub type SampleBlock = [[f64; BLOCK_SIZE]; BLOCK_SIZE];

/// An 8x8 block of DCT coefficients; `coeffs[0][0]` is the DC term, all
/// other positions are AC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoeffBlock {
    pub coeffs: [[f64; BLOCK_SIZE]; BLOCK_SIZE],
}

impl CoeffBlock {
    pub fn dc(&self) -> f64 {
        self.coeffs[0][0]
    }
}

/// Row-wise orthonormal DCT-II basis: `BASIS[u][x] = c(u) cos((2x+1)u pi / 16)`
/// with `c(0) = sqrt(1/8)` and `c(u>0) = 1/2`.
static BASIS: LazyLock<[[f64; BLOCK_SIZE]; BLOCK_SIZE]> = LazyLock::new(|| {
    let mut m = [[0.0; BLOCK_SIZE]; BLOCK_SIZE];
    for (u, row) in m.iter_mut().enumerate() {
        let c = if u == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
        for (x, v) in row.iter_mut().enumerate() {
            *v = c * (std::f64::consts::PI * (2 * x + 1) as f64 * u as f64 / 16.0).cos();
        }
    }
    m
});

/// Forward orthonormal 2-D DCT-II (rows then columns).
pub fn dct8_forward(samples: &SampleBlock) -> CoeffBlock {
    let basis = &*BASIS;
    let mut rows = [[0.0; BLOCK_SIZE]; BLOCK_SIZE];
    for y in 0..BLOCK_SIZE {
        for v in 0..BLOCK_SIZE {
            let mut acc = 0.0;
            for x in 0..BLOCK_SIZE {
                acc += basis[v][x] * samples[y][x];
            }
            rows[y][v] = acc;
        }
    }
    let mut coeffs = [[0.0; BLOCK_SIZE]; BLOCK_SIZE];
    for u in 0..BLOCK_SIZE {
        for v in 0..BLOCK_SIZE {
            let mut acc = 0.0;
            for y in 0..BLOCK_SIZE {
                acc += basis[u][y] * rows[y][v];
            }
            coeffs[u][v] = acc;
        }
    }
    CoeffBlock { coeffs }
}

/// Inverse of [`dct8_forward`] (orthonormal 2-D DCT-III).
pub fn dct8_inverse(block: &CoeffBlock) -> SampleBlock {
    let basis = &*BASIS;
    let mut rows = [[0.0; BLOCK_SIZE]; BLOCK_SIZE];
    for y in 0..BLOCK_SIZE {
        for v in 0..BLOCK_SIZE {
            let mut acc = 0.0;
            for u in 0..BLOCK_SIZE {
                acc += basis[u][y] * block.coeffs[u][v];
            }
            rows[y][v] = acc;
        }
    }
    let mut samples = [[0.0; BLOCK_SIZE]; BLOCK_SIZE];
    for y in 0..BLOCK_SIZE {
        for x in 0..BLOCK_SIZE {
            let mut acc = 0.0;
            for v in 0..BLOCK_SIZE {
                acc += basis[v][x] * rows[y][v];
            }
            samples[y][x] = acc;
        }
    }
    samples
}

/// Standard JPEG zigzag traversal of an 8x8 block: 64 `(row, col)` pairs
/// starting at the DC position `(0, 0)`.
pub fn zigzag_order() -> [(usize, usize); 64] {
    let mut order = [(0usize, 0usize); 64];
    let (mut r, mut c) = (0isize, 0isize);
    for slot in order.iter_mut() {
        *slot = (r as usize, c as usize);
        if (r + c) % 2 == 0 {
            // moving up-right
            if c == 7 {
                r += 1;
            } else if r == 0 {
                c += 1;
            } else {
                r -= 1;
                c += 1;
            }
        } else {
            // moving down-left
            if r == 7 {
                c += 1;
            } else if c == 0 {
                r += 1;
            } else {
                r += 1;
                c -= 1;
            }
        }
    }
    order
}

/// Brightening curve applied to the normalized DC value. Each variant maps
/// `[0, 1]` onto `[0, 1]`, is monotone nondecreasing, and fixes 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MappingFunction {
    /// `x (2 - x)`
    Twisting,
    /// `x^eta`; the exponent must be positive. `Eta(1.0)` is the identity.
    Eta(f64),
    /// `3x^2 - 2x^3`
    SCurve,
}

impl MappingFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            MappingFunction::Twisting => x * (2.0 - x),
            MappingFunction::Eta(eta) => x.powf(eta),
            MappingFunction::SCurve => x * x * (3.0 - 2.0 * x),
        }
    }
}

/// Which coefficients the color pipeline rewrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnhanceMode {
    /// Remap the luminance DC only.
    Dc,
    /// Remap the DC and scale all 63 AC coefficients by the DC gain.
    DcAc,
    /// Additionally rescale the co-located chroma blocks about the neutral
    /// point with the (clamped) luminance gain.
    DcAcChroma,
}

/// Remaps a luminance DC value, returning the new DC and the gain
/// `lambda = dc_new / dc`.
///
/// The DC is normalized by 2040 (the all-white DC) before the curve is
/// applied. Blocks with `dc <= 1e-6` are left untouched with `lambda = 1`,
/// which keeps black blocks black and avoids a 0/0 gain.
pub fn map_dc(dc: f64, mapping: MappingFunction) -> (f64, f64) {
    if dc <= DC_BLACK_EPS {
        return (dc, 1.0);
    }
    let x = (dc / DC_WHITE).clamp(0.0, 1.0);
    let dc_new = DC_WHITE * mapping.eval(x);
    (dc_new, dc_new / dc)
}

/// A plane split into 8x8 sample blocks, padded to multiples of 8 by edge
/// replication.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPartition {
    orig_w: u32,
    orig_h: u32,
    padded_w: u32,
    padded_h: u32,
    cols: u32,
    rows: u32,
    blocks: Vec<SampleBlock>,
}

impl BlockPartition {
    pub fn orig_size(&self) -> (u32, u32) {
        (self.orig_w, self.orig_h)
    }

    pub fn padded_size(&self) -> (u32, u32) {
        (self.padded_w, self.padded_h)
    }

    /// Row-major sample blocks.
    pub fn blocks(&self) -> &[SampleBlock] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [SampleBlock] {
        &mut self.blocks
    }

    /// Reassembles the plane and crops the padding away.
    pub fn merge(&self) -> Vec<f64> {
        let w = self.orig_w as usize;
        let h = self.orig_h as usize;
        let mut out = vec![0.0f64; w * h];
        let fill = |y: usize, row: &mut [f64]| {
            let by = y / BLOCK_SIZE;
            for (x, v) in row.iter_mut().enumerate() {
                let bx = x / BLOCK_SIZE;
                let block = &self.blocks[by * self.cols as usize + bx];
                *v = block[y % BLOCK_SIZE][x % BLOCK_SIZE];
            }
        };
        #[cfg(feature = "parallel")]
        out.par_chunks_mut(w).enumerate().for_each(|(y, row)| fill(y, row));
        #[cfg(not(feature = "parallel"))]
        out.chunks_mut(w).enumerate().for_each(|(y, row)| fill(y, row));
        out
    }
}

/// Splits a row-major plane into 8x8 blocks, replicating the last row and
/// column into the padding.
pub fn partition_plane(plane: &[f64], width: u32, height: u32) -> BlockPartition {
    assert_eq!(plane.len(), width as usize * height as usize);
    assert!(width > 0 && height > 0);
    let padded_w = width.div_ceil(BLOCK_SIZE as u32) * BLOCK_SIZE as u32;
    let padded_h = height.div_ceil(BLOCK_SIZE as u32) * BLOCK_SIZE as u32;
    let cols = padded_w / BLOCK_SIZE as u32;
    let rows = padded_h / BLOCK_SIZE as u32;

    let build = |i: usize| -> SampleBlock {
        let bx = (i % cols as usize) * BLOCK_SIZE;
        let by = (i / cols as usize) * BLOCK_SIZE;
        let mut block = [[0.0; BLOCK_SIZE]; BLOCK_SIZE];
        for (dy, row) in block.iter_mut().enumerate() {
            let sy = (by + dy).min(height as usize - 1);
            for (dx, v) in row.iter_mut().enumerate() {
                let sx = (bx + dx).min(width as usize - 1);
                *v = plane[sy * width as usize + sx];
            }
        }
        block
    };

    let index_range = 0..(cols as usize * rows as usize);
    #[cfg(feature = "parallel")]
    let blocks: Vec<SampleBlock> = index_range.into_par_iter().map(build).collect();
    #[cfg(not(feature = "parallel"))]
    let blocks: Vec<SampleBlock> = index_range.map(build).collect();

    BlockPartition { orig_w: width, orig_h: height, padded_w, padded_h, cols, rows, blocks }
}

/// Rewrites one luminance block in place and returns its gain.
fn process_luma_block(samples: &mut SampleBlock, mapping: MappingFunction, mode: EnhanceMode) -> f64 {
    let mut f = dct8_forward(samples);
    let (dc_new, lambda) = map_dc(f.dc(), mapping);
    f.coeffs[0][0] = dc_new;
    if matches!(mode, EnhanceMode::DcAc | EnhanceMode::DcAcChroma) {
        for u in 0..BLOCK_SIZE {
            for v in 0..BLOCK_SIZE {
                if u != 0 || v != 0 {
                    f.coeffs[u][v] *= lambda;
                }
            }
        }
    }
    *samples = dct8_inverse(&f);
    lambda
}

/// Rescales one chroma block about the neutral DC with gain `gain`.
fn process_chroma_block(samples: &mut SampleBlock, gain: f64) {
    let mut f = dct8_forward(samples);
    f.coeffs[0][0] = DC_NEUTRAL_CHROMA + gain * (f.coeffs[0][0] - DC_NEUTRAL_CHROMA);
    for u in 0..BLOCK_SIZE {
        for v in 0..BLOCK_SIZE {
            if u != 0 || v != 0 {
                f.coeffs[u][v] *= gain;
            }
        }
    }
    *samples = dct8_inverse(&f);
}

/// Full color-enhancement pipeline: YCbCr conversion, per-block DCT
/// coefficient remapping, inverse transform, and conversion back to RGB.
///
/// Output dimensions always equal the input dimensions; the result is
/// independent of block scheduling.
pub fn enhance_color(img: &RgbImage, mapping: MappingFunction, mode: EnhanceMode) -> RgbImage {
    let planes = rgb_to_ycbcr(img);
    let (w, h) = (planes.width, planes.height);

    let mut luma = partition_plane(&planes.y, w, h);
    #[cfg(feature = "parallel")]
    let lambdas: Vec<f64> = luma
        .blocks_mut()
        .par_iter_mut()
        .map(|b| process_luma_block(b, mapping, mode))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let lambdas: Vec<f64> = luma
        .blocks_mut()
        .iter_mut()
        .map(|b| process_luma_block(b, mapping, mode))
        .collect();
    let y_out = luma.merge();

    let (cb_out, cr_out) = if mode == EnhanceMode::DcAcChroma {
        let scale_plane = |plane: &[f64]| {
            let mut part = partition_plane(plane, w, h);
            let apply = |(i, b): (usize, &mut SampleBlock)| {
                let gain = lambdas[i].clamp(CHROMA_GAIN.0, CHROMA_GAIN.1);
                process_chroma_block(b, gain);
            };
            #[cfg(feature = "parallel")]
            part.blocks_mut().par_iter_mut().enumerate().for_each(apply);
            #[cfg(not(feature = "parallel"))]
            part.blocks_mut().iter_mut().enumerate().for_each(apply);
            part.merge()
        };
        (scale_plane(&planes.cb), scale_plane(&planes.cr))
    } else {
        (planes.cb, planes.cr)
    };

    ycbcr_to_rgb(&YccPlanes::new(w, h, y_out, cb_out, cr_out))
}
