//! Background detection and logarithmic (Weber-law) contrast enhancement
//! for grayscale images.
//!
//! A background estimate `tau` assigns every pixel (or block) an
//! illumination level. Enhancement then remaps each input value `v`
//! through `g = b + k * ln(v + 1)` with `k = (255 - b) / ln 256`, the
//! affine-log curve that fixes `g(0) = b` and `g(255) = 255`. Three
//! background estimators are provided: per-block min/max statistics, the
//! erosion/dilation midpoint, and opening by reconstruction.

use crate::metrics::{self, MetricsReport};
use crate::morphology::{self, StructuringElement};
use crate::pixelbuf::{quantize_u8, GrayImage};
use std::fmt;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Errors from block tiling, background application, and sweeps.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum WeberError {
    #[error("block size {l1}x{l2} invalid for {width}x{height} image")]
    BadBlockSize { l1: u32, l2: u32, width: u32, height: u32 },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("structuring element scale must be at least 1")]
    BadScale,
    #[error("parameter kind does not match the background method")]
    ParamKindMismatch,
    #[error("empty parameter list")]
    EmptyParams,
    #[error("{param}: {source}")]
    SweepParamFailed {
        param: SweepParam,
        source: Box<WeberError>,
    },
}

/// How a background estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackgroundMethod {
    Blocks,
    ErosionDilation,
    Reconstruction,
}

impl fmt::Display for BackgroundMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackgroundMethod::Blocks => "blocks",
            BackgroundMethod::ErosionDilation => "eroded",
            BackgroundMethod::Reconstruction => "reconstruction",
        })
    }
}

/// Per-block statistics of one tile of the block grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockStats {
    /// Top-left corner of the block.
    pub x: u32,
    pub y: u32,
    /// Actual block extent; edge blocks may be smaller than the nominal size.
    pub w: u32,
    pub h: u32,
    /// Minimum and maximum intensity inside the block.
    pub min: u8,
    pub max: u8,
    /// Background criterion `(min + max) / 2`, the dark/clear division line.
    pub tau: f64,
    /// Weber gain `(255 - min) / ln 256`.
    pub k: f64,
}

/// Block tiling of an image with per-block min/max/criterion statistics.
///
/// Tiles run left-to-right, top-to-bottom; the last column and row keep the
/// remainder when the image dimensions are not multiples of the block size.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrid {
    width: u32,
    height: u32,
    block_w: u32,
    block_h: u32,
    cols: u32,
    rows: u32,
    blocks: Vec<BlockStats>,
}

impl BlockGrid {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Nominal block size `(l1, l2)`.
    pub fn block_size(&self) -> (u32, u32) {
        (self.block_w, self.block_h)
    }

    /// Grid extent in blocks `(cols, rows)`.
    pub fn grid_size(&self) -> (u32, u32) {
        (self.cols, self.rows)
    }

    /// Row-major block statistics.
    pub fn blocks(&self) -> &[BlockStats] {
        &self.blocks
    }

    /// Statistics of the block containing pixel `(x, y)`.
    pub fn block_at(&self, x: u32, y: u32) -> &BlockStats {
        let bx = x / self.block_w;
        let by = y / self.block_h;
        &self.blocks[(by * self.cols + bx) as usize]
    }
}

/// Per-pixel background estimate `tau` in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundMap {
    width: u32,
    height: u32,
    tau: Vec<f64>,
    method: BackgroundMethod,
}

impl BackgroundMap {
    /// Panics if the map length does not match the dimensions or any value
    /// leaves `[0, 255]`.
    pub fn new(width: u32, height: u32, tau: Vec<f64>, method: BackgroundMethod) -> Self {
        assert_eq!(tau.len(), width as usize * height as usize);
        assert!(
            tau.iter().all(|&t| (0.0..=255.0).contains(&t)),
            "background values must lie in [0, 255]"
        );
        Self { width, height, tau, method }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn method(&self) -> BackgroundMethod {
        self.method
    }

    /// Row-major background values.
    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Re-quantized view for writing the estimate out as an image.
    pub fn to_gray(&self) -> GrayImage {
        let data = self.tau.iter().map(|&t| quantize_u8(t)).collect();
        GrayImage::from_raw(self.width, self.height, data)
    }
}

fn ln_256() -> f64 {
    256.0f64.ln()
}

/// Weber gain for a background level `m`: `(255 - m) / ln 256`.
pub fn weber_k(m: f64) -> f64 {
    (255.0 - m) / ln_256()
}

/// Affine-log gray-level map `g = base + k * ln(v + 1)`.
///
/// With `k = weber_k(base)` this fixes `g(0) = base` and `g(255) = 255`,
/// so outputs stay in `[base, 255]`.
pub fn weber_log_map(v: f64, base: f64, k: f64) -> f64 {
    base + k * (v + 1.0).ln()
}

/// Tiles the image into `l1 x l2` blocks and computes per-block statistics.
pub fn block_stats(f: &GrayImage, l1: u32, l2: u32) -> Result<BlockGrid, WeberError> {
    let (width, height) = (f.width(), f.height());
    if l1 == 0 || l2 == 0 || l1 > width || l2 > height {
        return Err(WeberError::BadBlockSize { l1, l2, width, height });
    }
    let cols = width.div_ceil(l1);
    let rows = height.div_ceil(l2);

    let stats_for = |bx: u32, by: u32| {
        let x = bx * l1;
        let y = by * l2;
        let w = l1.min(width - x);
        let h = l2.min(height - y);
        let mut min = u8::MAX;
        let mut max = u8::MIN;
        for yy in y..y + h {
            let row = &f.as_raw()[(yy * width + x) as usize..(yy * width + x + w) as usize];
            for &v in row {
                min = min.min(v);
                max = max.max(v);
            }
        }
        BlockStats {
            x,
            y,
            w,
            h,
            min,
            max,
            tau: 0.5 * (f64::from(min) + f64::from(max)),
            k: weber_k(f64::from(min)),
        }
    };

    let index_range = 0..(cols * rows);
    #[cfg(feature = "parallel")]
    let blocks: Vec<BlockStats> = index_range
        .into_par_iter()
        .map(|i| stats_for(i % cols, i / cols))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let blocks: Vec<BlockStats> = index_range.map(|i| stats_for(i % cols, i / cols)).collect();

    Ok(BlockGrid { width, height, block_w: l1, block_h: l2, cols, rows, blocks })
}

/// Per-pixel background built from the block criterion `tau_i`.
pub fn block_background_map(grid: &BlockGrid) -> BackgroundMap {
    let w = grid.width;
    let mut tau = vec![0.0f64; w as usize * grid.height as usize];
    let fill = |y: usize, row: &mut [f64]| {
        for (x, out) in row.iter_mut().enumerate() {
            *out = grid.block_at(x as u32, y as u32).tau;
        }
    };
    #[cfg(feature = "parallel")]
    tau.par_chunks_mut(w as usize).enumerate().for_each(|(y, row)| fill(y, row));
    #[cfg(not(feature = "parallel"))]
    tau.chunks_mut(w as usize).enumerate().for_each(|(y, row)| fill(y, row));
    BackgroundMap::new(grid.width, grid.height, tau, BackgroundMethod::Blocks)
}

/// Enhances each block independently through the Weber log map anchored at
/// the block minimum.
pub fn enhance_blocks(f: &GrayImage, l1: u32, l2: u32) -> Result<GrayImage, WeberError> {
    let grid = block_stats(f, l1, l2)?;
    let w = f.width() as usize;
    let src = f.as_raw();
    let mut out = vec![0u8; src.len()];
    let fill = |y: usize, row: &mut [u8]| {
        for (x, o) in row.iter_mut().enumerate() {
            let stats = grid.block_at(x as u32, y as u32);
            let v = f64::from(src[y * w + x]);
            *o = quantize_u8(weber_log_map(v, f64::from(stats.min), stats.k));
        }
    };
    #[cfg(feature = "parallel")]
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| fill(y, row));
    #[cfg(not(feature = "parallel"))]
    out.chunks_mut(w).enumerate().for_each(|(y, row)| fill(y, row));
    Ok(GrayImage::from_raw(f.width(), f.height(), out))
}

/// Background as the midpoint of the erosion and the dilation, the
/// morphological analog of the block min/max criterion.
///
/// Requires `mu >= 1`.
pub fn background_erosion_dilation(f: &GrayImage, mu: u32) -> BackgroundMap {
    assert!(mu >= 1, "background estimation needs a non-trivial element");
    let se = StructuringElement::square(mu);
    let eroded = morphology::erode(f, se);
    let dilated = morphology::dilate(f, se);
    let tau = eroded
        .as_raw()
        .iter()
        .zip(dilated.as_raw())
        .map(|(&e, &d)| 0.5 * (f64::from(e) + f64::from(d)))
        .collect();
    BackgroundMap::new(f.width(), f.height(), tau, BackgroundMethod::ErosionDilation)
}

/// Background from the opening by reconstruction; anti-extensive, so
/// `tau <= f` pointwise.
///
/// Requires `mu >= 1`.
pub fn background_reconstruction(f: &GrayImage, mu: u32) -> BackgroundMap {
    assert!(mu >= 1, "background estimation needs a non-trivial element");
    let opened = morphology::opening_by_reconstruction(f, StructuringElement::square(mu));
    let tau = opened.as_raw().iter().map(|&v| f64::from(v)).collect();
    BackgroundMap::new(f.width(), f.height(), tau, BackgroundMethod::Reconstruction)
}

/// Applies the Weber log map pixelwise with the local background as base:
/// `g(x) = tau(x) + k(tau(x)) * ln(f(x) + 1)`, rounded and clamped.
pub fn enhance_with_background(
    f: &GrayImage,
    bg: &BackgroundMap,
) -> Result<GrayImage, WeberError> {
    if f.width() != bg.width || f.height() != bg.height {
        return Err(WeberError::DimensionMismatch(
            f.width(),
            f.height(),
            bg.width,
            bg.height,
        ));
    }
    let w = f.width() as usize;
    let src = f.as_raw();
    let mut out = vec![0u8; src.len()];
    let fill = |y: usize, row: &mut [u8]| {
        for (x, o) in row.iter_mut().enumerate() {
            let i = y * w + x;
            let base = bg.tau[i];
            *o = quantize_u8(weber_log_map(f64::from(src[i]), base, weber_k(base)));
        }
    };
    #[cfg(feature = "parallel")]
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| fill(y, row));
    #[cfg(not(feature = "parallel"))]
    out.chunks_mut(w).enumerate().for_each(|(y, row)| fill(y, row));
    Ok(GrayImage::from_raw(f.width(), f.height(), out))
}

/// One point of a parameter sweep: a structuring-element scale for the
/// morphological methods, or a block size for the block method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Scale(u32),
    Blocks { l1: u32, l2: u32 },
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepParam::Scale(mu) => write!(f, "mu={mu}"),
            SweepParam::Blocks { l1, l2 } => write!(f, "block={l1}x{l2}"),
        }
    }
}

/// One sweep result: the enhanced image plus its scores against the input.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub param: SweepParam,
    pub image: GrayImage,
    /// SSIM and normalized entropy versus the input. A score is `None`
    /// when its guard fails (image below the SSIM window size, or constant
    /// input with zero reference entropy).
    pub report: MetricsReport,
}

fn run_method(
    f: &GrayImage,
    method: BackgroundMethod,
    param: SweepParam,
) -> Result<GrayImage, WeberError> {
    match (method, param) {
        (BackgroundMethod::Blocks, SweepParam::Blocks { l1, l2 }) => enhance_blocks(f, l1, l2),
        (BackgroundMethod::ErosionDilation, SweepParam::Scale(mu)) => {
            if mu == 0 {
                return Err(WeberError::BadScale);
            }
            enhance_with_background(f, &background_erosion_dilation(f, mu))
        }
        (BackgroundMethod::Reconstruction, SweepParam::Scale(mu)) => {
            if mu == 0 {
                return Err(WeberError::BadScale);
            }
            enhance_with_background(f, &background_reconstruction(f, mu))
        }
        _ => Err(WeberError::ParamKindMismatch),
    }
}

/// Runs one background method at every parameter and scores each output
/// against the input with SSIM and normalized entropy.
///
/// Entries come back in parameter order regardless of scheduling; duplicate
/// parameters yield identical entries.
pub fn enhance_sweep(
    f: &GrayImage,
    method: BackgroundMethod,
    params: &[SweepParam],
) -> Result<Vec<SweepEntry>, WeberError> {
    if params.is_empty() {
        return Err(WeberError::EmptyParams);
    }
    let run = |&param: &SweepParam| -> Result<SweepEntry, WeberError> {
        let image = run_method(f, method, param).map_err(|e| WeberError::SweepParamFailed {
            param,
            source: Box::new(e),
        })?;
        let report = MetricsReport {
            ssim: metrics::ssim(f, &image).ok(),
            normalized_entropy: metrics::normalized_entropy(f, &image).ok(),
            ..Default::default()
        };
        Ok(SweepEntry { param, image, report })
    };
    #[cfg(feature = "parallel")]
    let entries = params.par_iter().map(run).collect::<Result<Vec<_>, _>>()?;
    #[cfg(not(feature = "parallel"))]
    let entries = params.iter().map(run).collect::<Result<Vec<_>, _>>()?;
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weber_k_endpoints_and_monotonicity() {
        assert_eq!(weber_k(255.0), 0.0);
        assert!((weber_k(0.0) - 45.9857).abs() < 1e-4);
        assert!((weber_k(0.0) - 255.0 / 256.0f64.ln()).abs() < 1e-12);
        let mut prev = weber_k(0.0);
        for m in 1..=255 {
            let k = weber_k(f64::from(m));
            assert!(k < prev);
            prev = k;
        }
    }

    #[test]
    fn log_map_boundaries() {
        for b in [0.0, 31.5, 100.0, 255.0] {
            let k = weber_k(b);
            assert_eq!(weber_log_map(0.0, b, k), b);
            assert!((weber_log_map(255.0, b, k) - 255.0).abs() < 1e-10);
        }
        let g = weber_log_map(100.0, 100.0, weber_k(100.0));
        assert!((g - 229.0).abs() < 0.05, "got {g}");
    }

    #[test]
    fn block_stats_tiling_and_values() {
        let img = GrayImage::from_fn(17, 17, |x, y| (x * 3 + y) as u8);
        let grid = block_stats(&img, 16, 16).unwrap();
        assert_eq!(grid.grid_size(), (2, 2));
        let blocks = grid.blocks();
        assert_eq!((blocks[0].w, blocks[0].h), (16, 16));
        assert_eq!((blocks[1].w, blocks[1].h), (1, 16)); // remainder column
        assert_eq!((blocks[3].w, blocks[3].h), (1, 1));
        for b in blocks {
            assert!(b.min <= b.max);
            assert_eq!(b.tau, 0.5 * (f64::from(b.min) + f64::from(b.max)));
            assert_eq!(b.k, weber_k(f64::from(b.min)));
        }
        // block with min 10, max 200 has criterion 105
        let two = GrayImage::from_raw(2, 1, vec![10, 200]);
        let g = block_stats(&two, 2, 1).unwrap();
        assert_eq!(g.blocks()[0].tau, 105.0);
    }

    #[test]
    fn block_stats_rejects_bad_sizes() {
        let img = GrayImage::filled(8, 8, 5);
        assert!(matches!(block_stats(&img, 0, 4), Err(WeberError::BadBlockSize { .. })));
        assert!(matches!(block_stats(&img, 9, 4), Err(WeberError::BadBlockSize { .. })));
    }

    #[test]
    fn constant_image_blocks() {
        let img = GrayImage::filled(12, 10, 77);
        let grid = block_stats(&img, 5, 5).unwrap();
        for b in grid.blocks() {
            assert_eq!((b.min, b.max), (77, 77));
            assert_eq!(b.tau, 77.0);
        }
    }

    #[test]
    fn enhance_blocks_fixed_points() {
        let black = GrayImage::filled(9, 9, 0);
        assert_eq!(enhance_blocks(&black, 4, 4).unwrap(), black);
        let white = GrayImage::filled(9, 9, 255);
        assert_eq!(enhance_blocks(&white, 4, 4).unwrap(), white);
    }

    #[test]
    fn enhance_blocks_constant_hundred() {
        let img = GrayImage::filled(6, 4, 100);
        let out = enhance_blocks(&img, 6, 4).unwrap();
        assert_eq!(out, GrayImage::filled(6, 4, 229));
    }

    #[test]
    fn single_block_equals_global_min_map() {
        let img = GrayImage::from_fn(10, 7, |x, y| (20 + x * 9 + y * 11) as u8);
        let out = enhance_blocks(&img, 10, 7).unwrap();
        let m = f64::from(*img.as_raw().iter().min().unwrap());
        let k = weber_k(m);
        for (o, &v) in out.as_raw().iter().zip(img.as_raw()) {
            assert_eq!(*o, quantize_u8(weber_log_map(f64::from(v), m, k)));
        }
    }

    #[test]
    fn erosion_dilation_background_values() {
        let flat = GrayImage::filled(6, 6, 42);
        let bg = background_erosion_dilation(&flat, 1);
        assert!(bg.tau().iter().all(|&t| t == 42.0));
        assert_eq!(bg.method(), BackgroundMethod::ErosionDilation);

        // interior of a 0/255 checkerboard has local min 0 and max 255
        let checker = GrayImage::from_fn(8, 8, |x, y| if (x + y) % 2 == 0 { 0 } else { 255 });
        let bg = background_erosion_dilation(&checker, 1);
        for y in 1..7u32 {
            for x in 1..7u32 {
                assert_eq!(bg.tau()[(y * 8 + x) as usize], 127.5);
            }
        }
    }

    #[test]
    fn reconstruction_background_is_anti_extensive() {
        let img = GrayImage::from_fn(16, 16, |x, y| ((x * 37 + y * 101 + 3) % 256) as u8);
        let bg = background_reconstruction(&img, 2);
        for (t, &v) in bg.tau().iter().zip(img.as_raw()) {
            assert!(*t <= f64::from(v));
        }
    }

    #[test]
    fn enhance_with_background_pure_log_stretch() {
        // tau = 0 specializes to g = 255 ln(v+1) / ln 256
        let img = GrayImage::from_fn(4, 4, |x, y| (x * 60 + y * 3) as u8);
        let zero = BackgroundMap::new(4, 4, vec![0.0; 16], BackgroundMethod::Blocks);
        let out = enhance_with_background(&img, &zero).unwrap();
        for (o, &v) in out.as_raw().iter().zip(img.as_raw()) {
            let expect = 255.0 * (f64::from(v) + 1.0).ln() / 256.0f64.ln();
            assert_eq!(*o, quantize_u8(expect));
        }
    }

    #[test]
    fn enhance_with_background_white_fixed_point() {
        let white = GrayImage::filled(8, 5, 255);
        for mu in 1..=2 {
            let ed = background_erosion_dilation(&white, mu);
            assert_eq!(enhance_with_background(&white, &ed).unwrap(), white);
            let re = background_reconstruction(&white, mu);
            assert_eq!(enhance_with_background(&white, &re).unwrap(), white);
        }
    }

    #[test]
    fn enhance_with_background_checks_dimensions() {
        let img = GrayImage::filled(4, 4, 9);
        let bg = BackgroundMap::new(5, 4, vec![0.0; 20], BackgroundMethod::Blocks);
        assert_eq!(
            enhance_with_background(&img, &bg),
            Err(WeberError::DimensionMismatch(4, 4, 5, 4))
        );
    }

    #[test]
    fn monotone_within_constant_background() {
        let bg = BackgroundMap::new(256, 1, vec![60.0; 256], BackgroundMethod::Blocks);
        let ramp = GrayImage::from_fn(256, 1, |x, _| x as u8);
        let out = enhance_with_background(&ramp, &bg).unwrap();
        for pair in out.as_raw().windows(2) {
            assert!(pair[0] <= pair[1]);
        }
    }

    #[test]
    fn sweep_singleton_matches_direct_call() {
        let img = GrayImage::from_fn(16, 16, |x, y| ((x * 5 + y * 23) % 197) as u8);
        let entries =
            enhance_sweep(&img, BackgroundMethod::Reconstruction, &[SweepParam::Scale(2)])
                .unwrap();
        assert_eq!(entries.len(), 1);
        let direct =
            enhance_with_background(&img, &background_reconstruction(&img, 2)).unwrap();
        assert_eq!(entries[0].image, direct);
        assert!(entries[0].report.ssim.is_some());
        assert!(entries[0].report.normalized_entropy.is_some());
    }

    #[test]
    fn sweep_duplicates_are_identical() {
        let img = GrayImage::from_fn(12, 12, |x, y| ((x * 31 + y * 7) % 256) as u8);
        let entries = enhance_sweep(
            &img,
            BackgroundMethod::ErosionDilation,
            &[SweepParam::Scale(2), SweepParam::Scale(2)],
        )
        .unwrap();
        assert_eq!(entries[0], entries[1]);
    }

    #[test]
    fn sweep_guards() {
        let img = GrayImage::filled(8, 8, 1);
        assert_eq!(
            enhance_sweep(&img, BackgroundMethod::Blocks, &[]),
            Err(WeberError::EmptyParams)
        );
        let err = enhance_sweep(&img, BackgroundMethod::Blocks, &[SweepParam::Scale(1)])
            .unwrap_err();
        assert!(matches!(
            err,
            WeberError::SweepParamFailed { param: SweepParam::Scale(1), .. }
        ));
        let err =
            enhance_sweep(&img, BackgroundMethod::Reconstruction, &[SweepParam::Scale(0)])
                .unwrap_err();
        match err {
            WeberError::SweepParamFailed { source, .. } => {
                assert_eq!(*source, WeberError::BadScale)
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn block_background_map_matches_block_tau() {
        let img = GrayImage::from_fn(10, 6, |x, y| (x * 20 + y * 5) as u8);
        let grid = block_stats(&img, 4, 3).unwrap();
        let map = block_background_map(&grid);
        for y in 0..6u32 {
            for x in 0..10u32 {
                assert_eq!(
                    map.tau()[(y * 10 + x) as usize],
                    grid.block_at(x, y).tau
                );
            }
        }
    }
}
