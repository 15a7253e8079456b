//! Grayscale mathematical morphology: erosion, dilation, opening, closing,
//! geodesic reconstruction by dilation, and opening by reconstruction.
//!
//! All operators use a square structuring element of side `2*mu + 1`. The
//! border policy is window-intersect-domain: the min/max is taken over the
//! part of the window that lies inside the image, which is equivalent to
//! padding with +inf/-inf and never invents border values.

use crate::pixelbuf::GrayImage;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Errors from the reconstruction operators.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MorphError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    /// Geodesic reconstruction requires `marker <= mask` pointwise.
    #[error("marker exceeds mask at ({x}, {y})")]
    MarkerExceedsMask { x: u32, y: u32 },
}

/// Square structuring element of side `2*mu + 1` centered at the origin.
///
/// Scale 0 is the 1x1 identity window; scale 1 is the 3x3 square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuringElement {
    mu: u32,
}

impl StructuringElement {
    pub fn square(mu: u32) -> Self {
        Self { mu }
    }

    pub fn scale(self) -> u32 {
        self.mu
    }

    pub fn side(self) -> u32 {
        2 * self.mu + 1
    }
}

/// Separable sliding-window extremum: a horizontal pass followed by a
/// vertical pass, both restricted to the image domain. For a square window
/// this equals the full 2-D window scan.
fn window_scan(f: &GrayImage, se: StructuringElement, pick: fn(u8, u8) -> u8) -> GrayImage {
    if se.scale() == 0 {
        return f.clone();
    }
    let w = f.width() as usize;
    let h = f.height() as usize;
    let r = se.scale() as usize;
    let src = f.as_raw();

    let mut tmp = vec![0u8; w * h];
    let fill_h = |y: usize, row_out: &mut [u8]| {
        let row_in = &src[y * w..(y + 1) * w];
        for (x, out) in row_out.iter_mut().enumerate() {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            *out = row_in[lo..=hi].iter().copied().reduce(pick).unwrap();
        }
    };
    #[cfg(feature = "parallel")]
    tmp.par_chunks_mut(w).enumerate().for_each(|(y, row)| fill_h(y, row));
    #[cfg(not(feature = "parallel"))]
    tmp.chunks_mut(w).enumerate().for_each(|(y, row)| fill_h(y, row));

    let mut out = vec![0u8; w * h];
    let fill_v = |y: usize, row_out: &mut [u8]| {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        row_out.copy_from_slice(&tmp[lo * w..(lo + 1) * w]);
        for yy in lo + 1..=hi {
            let row = &tmp[yy * w..(yy + 1) * w];
            for (out, &v) in row_out.iter_mut().zip(row) {
                *out = pick(*out, v);
            }
        }
    };
    #[cfg(feature = "parallel")]
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| fill_v(y, row));
    #[cfg(not(feature = "parallel"))]
    out.chunks_mut(w).enumerate().for_each(|(y, row)| fill_v(y, row));

    GrayImage::from_raw(f.width(), f.height(), out)
}

/// Window minimum over the structuring element.
pub fn erode(f: &GrayImage, se: StructuringElement) -> GrayImage {
    window_scan(f, se, std::cmp::min)
}

/// Window maximum over the structuring element.
pub fn dilate(f: &GrayImage, se: StructuringElement) -> GrayImage {
    window_scan(f, se, std::cmp::max)
}

/// Morphological opening: erosion followed by dilation.
pub fn open(f: &GrayImage, se: StructuringElement) -> GrayImage {
    dilate(&erode(f, se), se)
}

/// Morphological closing: dilation followed by erosion.
pub fn close(f: &GrayImage, se: StructuringElement) -> GrayImage {
    erode(&dilate(f, se), se)
}

/// Geodesic reconstruction by dilation of `marker` under `mask`.
///
/// The result is the fixpoint of iterating `g <- min(dilate(g, 1), mask)`
/// from `g = marker` with the 3x3 (8-connected) unit element. The
/// implementation uses alternating raster/anti-raster sweeps, which
/// converge to the same unique fixpoint as the unit-step iteration.
pub fn reconstruct_by_dilation(
    marker: &GrayImage,
    mask: &GrayImage,
) -> Result<GrayImage, MorphError> {
    if marker.width() != mask.width() || marker.height() != mask.height() {
        return Err(MorphError::DimensionMismatch(
            marker.width(),
            marker.height(),
            mask.width(),
            mask.height(),
        ));
    }
    let w = mask.width() as usize;
    let h = mask.height() as usize;
    let m = mask.as_raw();
    for (i, (&a, &b)) in marker.as_raw().iter().zip(m).enumerate() {
        if a > b {
            return Err(MorphError::MarkerExceedsMask {
                x: (i % w) as u32,
                y: (i / w) as u32,
            });
        }
    }

    let mut g = marker.as_raw().to_vec();
    loop {
        let mut changed = false;
        // forward raster: propagate from the already-visited half-neighborhood
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let mut v = g[i];
                if x > 0 {
                    v = v.max(g[i - 1]);
                }
                if y > 0 {
                    let up = i - w;
                    v = v.max(g[up]);
                    if x > 0 {
                        v = v.max(g[up - 1]);
                    }
                    if x + 1 < w {
                        v = v.max(g[up + 1]);
                    }
                }
                v = v.min(m[i]);
                if v != g[i] {
                    g[i] = v;
                    changed = true;
                }
            }
        }
        // backward anti-raster: the mirrored half-neighborhood
        for y in (0..h).rev() {
            for x in (0..w).rev() {
                let i = y * w + x;
                let mut v = g[i];
                if x + 1 < w {
                    v = v.max(g[i + 1]);
                }
                if y + 1 < h {
                    let down = i + w;
                    v = v.max(g[down]);
                    if x > 0 {
                        v = v.max(g[down - 1]);
                    }
                    if x + 1 < w {
                        v = v.max(g[down + 1]);
                    }
                }
                v = v.min(m[i]);
                if v != g[i] {
                    g[i] = v;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(GrayImage::from_raw(mask.width(), mask.height(), g))
}

/// Opening by reconstruction: reconstruct the erosion of `f` under `f`.
///
/// Removes bright structures smaller than the element while restoring the
/// surviving ones at their original height.
pub fn opening_by_reconstruction(f: &GrayImage, se: StructuringElement) -> GrayImage {
    let marker = erode(f, se);
    // marker <= f by construction, so this cannot fail
    reconstruct_by_dilation(&marker, f).expect("erosion is anti-extensive")
}
