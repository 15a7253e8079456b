//! Image quality metrics: SSIM, Shannon/normalized entropy, Weber contrast,
//! opponent-channel colorfulness with its enhancement factor, and a
//! no-reference JPEG quality score built from blockiness, activity, and
//! zero-crossing statistics.

use crate::pixelbuf::{GrayImage, RgbImage};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Errors from metric preconditions.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("image too small: need at least {min}x{min}")]
    TooSmall { min: u32 },
    /// Normalized entropy is undefined for a constant reference image.
    #[error("reference entropy is zero (constant image)")]
    ZeroReferenceEntropy,
    /// Weber contrast is undefined when the minimum luminance is zero.
    #[error("minimum luminance is zero")]
    ZeroMinimum,
    /// CEF is undefined for a grayscale reference image.
    #[error("reference image is achromatic")]
    AchromaticReference,
}

/// Named scalar quality scores for one image (or image pair). Only the
/// requested metrics are present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub ssim: Option<f64>,
    pub entropy_bits: Option<f64>,
    pub normalized_entropy: Option<f64>,
    pub jpqm: Option<f64>,
    pub cef: Option<f64>,
    pub weber_c: Option<f64>,
}

const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);
const SSIM_WIN: usize = 8;

/// Structural similarity index, averaged over all 8x8 windows at stride 1.
///
/// Window statistics are population moments (divide by 64). Symmetric in
/// its arguments; `ssim(x, x) == 1.0` exactly.
pub fn ssim(x: &GrayImage, y: &GrayImage) -> Result<f64, MetricsError> {
    if x.width() != y.width() || x.height() != y.height() {
        return Err(MetricsError::DimensionMismatch(
            x.width(),
            x.height(),
            y.width(),
            y.height(),
        ));
    }
    let w = x.width() as usize;
    let h = x.height() as usize;
    if w < SSIM_WIN || h < SSIM_WIN {
        return Err(MetricsError::TooSmall { min: SSIM_WIN as u32 });
    }
    let xs = x.as_raw();
    let ys = y.as_raw();
    let n = (SSIM_WIN * SSIM_WIN) as f64;

    let window_row_sum = |y0: usize| -> f64 {
        let mut acc = 0.0;
        for x0 in 0..=(w - SSIM_WIN) {
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..SSIM_WIN {
                let off = (y0 + dy) * w + x0;
                for dx in 0..SSIM_WIN {
                    let a = f64::from(xs[off + dx]);
                    let b = f64::from(ys[off + dx]);
                    sx += a;
                    sy += b;
                    sxx += a * a;
                    syy += b * b;
                    sxy += a * b;
                }
            }
            let mx = sx / n;
            let my = sy / n;
            let vx = sxx / n - mx * mx;
            let vy = syy / n - my * my;
            let cov = sxy / n - mx * my;
            acc += ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
        }
        acc
    };

    let row_range = 0..=(h - SSIM_WIN);
    #[cfg(feature = "parallel")]
    let row_sums: Vec<f64> = row_range.into_par_iter().map(window_row_sum).collect();
    #[cfg(not(feature = "parallel"))]
    let row_sums: Vec<f64> = row_range.map(window_row_sum).collect();

    let windows = ((w - SSIM_WIN + 1) * (h - SSIM_WIN + 1)) as f64;
    Ok(row_sums.iter().sum::<f64>() / windows)
}

/// Shannon entropy of the 256-bin gray-level histogram, in bits.
pub fn entropy(f: &GrayImage) -> f64 {
    let mut hist = [0u64; 256];
    for &v in f.as_raw() {
        hist[v as usize] += 1;
    }
    let total = f.as_raw().len() as f64;
    let mut h = 0.0;
    for &count in &hist {
        if count > 0 {
            let p = count as f64 / total;
            h -= p * p.log2();
        }
    }
    h
}

/// Entropy of the treated image divided by the entropy of the original.
pub fn normalized_entropy(original: &GrayImage, treated: &GrayImage) -> Result<f64, MetricsError> {
    let reference = entropy(original);
    if reference == 0.0 {
        return Err(MetricsError::ZeroReferenceEntropy);
    }
    Ok(entropy(treated) / reference)
}

/// Weber contrast `(L_max - L_min) / L_min` over the whole image.
pub fn weber_contrast(f: &GrayImage) -> Result<f64, MetricsError> {
    let min = *f.as_raw().iter().min().unwrap();
    let max = *f.as_raw().iter().max().unwrap();
    if min == 0 {
        return Err(MetricsError::ZeroMinimum);
    }
    Ok(f64::from(max - min) / f64::from(min))
}

/// Opponent-channel colorfulness: with `rg = R - G` and
/// `yb = (R + G)/2 - B` per pixel,
/// `sqrt(var(rg) + var(yb)) + 0.3 * sqrt(mean(rg)^2 + mean(yb)^2)`
/// using population variances.
pub fn colorfulness(img: &RgbImage) -> f64 {
    let n = img.width() as f64 * img.height() as f64;
    let (mut s_rg, mut s_yb, mut ss_rg, mut ss_yb) = (0.0, 0.0, 0.0, 0.0);
    for px in img.as_raw().chunks_exact(3) {
        let r = f64::from(px[0]);
        let g = f64::from(px[1]);
        let b = f64::from(px[2]);
        let rg = r - g;
        let yb = 0.5 * (r + g) - b;
        s_rg += rg;
        s_yb += yb;
        ss_rg += rg * rg;
        ss_yb += yb * yb;
    }
    let m_rg = s_rg / n;
    let m_yb = s_yb / n;
    let v_rg = ss_rg / n - m_rg * m_rg;
    let v_yb = ss_yb / n - m_yb * m_yb;
    // population variances can round to tiny negatives for constant channels
    (v_rg.max(0.0) + v_yb.max(0.0)).sqrt() + 0.3 * (m_rg * m_rg + m_yb * m_yb).sqrt()
}

/// Colorfulness enhancement factor: `colorfulness(enhanced) / colorfulness(original)`.
pub fn cef(original: &RgbImage, enhanced: &RgbImage) -> Result<f64, MetricsError> {
    let reference = colorfulness(original);
    if reference == 0.0 {
        return Err(MetricsError::AchromaticReference);
    }
    Ok(colorfulness(enhanced) / reference)
}

const JPQM_MIN_SIDE: u32 = 17;
const JPQM_ALPHA: f64 = -245.9;
const JPQM_BETA: f64 = 261.9;
const JPQM_GAMMA1: f64 = -0.0240;
const JPQM_GAMMA2: f64 = 0.0160;
const JPQM_GAMMA3: f64 = 0.0064;
const JPQM_FLOOR: f64 = 1e-8;

/// Blockiness, activity, and zero-crossing rate of the difference signal
/// along one orientation. `get(m, n)` addresses `lines` signals of `len`
/// samples each; differences are `d(m, n) = get(m, n+1) - get(m, n)`.
fn jpqm_orientation(
    get: &dyn Fn(usize, usize) -> f64,
    lines: usize,
    len: usize,
) -> (f64, f64, f64) {
    let boundaries = len / 8 - 1;
    let mut abs_sum = 0.0;
    let mut boundary_sum = 0.0;
    let mut crossings = 0u64;
    for m in 0..lines {
        let mut prev_d = 0.0;
        for n in 0..len - 1 {
            let d = get(m, n + 1) - get(m, n);
            abs_sum += d.abs();
            // block boundary between samples n and n+1 when n+1 is a multiple
            // of 8, excluding any partial block at the right edge
            let j = (n + 1) / 8;
            if (n + 1) % 8 == 0 && j <= boundaries {
                boundary_sum += d.abs();
            }
            if n > 0 && prev_d * d < 0.0 {
                crossings += 1;
            }
            prev_d = d;
        }
    }
    let blockiness = boundary_sum / (lines * boundaries) as f64;
    let mean_abs = abs_sum / (lines * (len - 1)) as f64;
    let activity = (8.0 * mean_abs - blockiness) / 7.0;
    let zero_rate = crossings as f64 / (lines * (len - 2)) as f64;
    (blockiness, activity, zero_rate)
}

/// No-reference JPEG quality score. Higher is better; typical natural
/// images score in the 6-10 range.
///
/// Horizontal and vertical blockiness (B), activity (A), and zero-crossing
/// rate (Z) are averaged and combined as
/// `S = alpha + beta * B^g1 * A^g2 * Z^g3`.
pub fn jpqm(f: &GrayImage) -> Result<f64, MetricsError> {
    if f.width() < JPQM_MIN_SIDE || f.height() < JPQM_MIN_SIDE {
        return Err(MetricsError::TooSmall { min: JPQM_MIN_SIDE });
    }
    let w = f.width() as usize;
    let h = f.height() as usize;
    let data = f.as_raw();

    let horizontal = |m: usize, n: usize| f64::from(data[m * w + n]);
    let vertical = |m: usize, n: usize| f64::from(data[n * w + m]);
    let (bh, ah, zh) = jpqm_orientation(&horizontal, h, w);
    let (bv, av, zv) = jpqm_orientation(&vertical, w, h);

    let b = (0.5 * (bh + bv)).max(JPQM_FLOOR);
    let a = (0.5 * (ah + av)).max(JPQM_FLOOR);
    let z = (0.5 * (zh + zv)).max(JPQM_FLOOR);
    Ok(JPQM_ALPHA + JPQM_BETA * b.powf(JPQM_GAMMA1) * a.powf(JPQM_GAMMA2) * z.powf(JPQM_GAMMA3))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ssim_of_identical_images_is_one() {
        let img = GrayImage::from_fn(16, 16, |x, y| ((x * 37 + y * 111) % 256) as u8);
        assert_eq!(ssim(&img, &img).unwrap(), 1.0);
    }

    #[test]
    fn ssim_is_symmetric() {
        let a = GrayImage::from_fn(12, 9, |x, y| ((x * 19 + y * 73) % 256) as u8);
        let b = GrayImage::from_fn(12, 9, |x, y| ((x * 91 + y * 5 + 40) % 256) as u8);
        assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
    }

    #[test]
    fn ssim_guards() {
        let a = GrayImage::filled(8, 8, 1);
        let b = GrayImage::filled(9, 8, 1);
        assert_eq!(
            ssim(&a, &b),
            Err(MetricsError::DimensionMismatch(8, 8, 9, 8))
        );
        let small = GrayImage::filled(7, 8, 1);
        assert_eq!(ssim(&small, &small), Err(MetricsError::TooSmall { min: 8 }));
    }

    #[test]
    fn entropy_of_constant_is_zero() {
        assert_eq!(entropy(&GrayImage::filled(10, 10, 77)), 0.0);
    }

    #[test]
    fn entropy_of_uniform_histogram_is_eight() {
        let img = GrayImage::from_fn(256, 1, |x, _| x as u8);
        assert_eq!(entropy(&img), 8.0);
    }

    #[test]
    fn entropy_two_levels() {
        let img = GrayImage::from_raw(4, 1, vec![9, 9, 9, 200]);
        let expected = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert!((entropy(&img) - expected).abs() < 1e-12);
        assert!((entropy(&img) - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn entropy_is_permutation_invariant() {
        let img = GrayImage::from_fn(9, 5, |x, y| ((x * 53 + y * 17) % 256) as u8);
        let mut shuffled = img.as_raw().to_vec();
        shuffled.reverse();
        shuffled.swap(0, 21);
        let shuffled = GrayImage::from_raw(9, 5, shuffled);
        assert_eq!(entropy(&img), entropy(&shuffled));
    }

    #[test]
    fn normalized_entropy_basics() {
        let img = GrayImage::from_fn(8, 8, |x, y| ((x + 8 * y) * 4) as u8);
        assert_eq!(normalized_entropy(&img, &img).unwrap(), 1.0);
        let flat = GrayImage::filled(8, 8, 3);
        assert_eq!(
            normalized_entropy(&flat, &img),
            Err(MetricsError::ZeroReferenceEntropy)
        );
    }

    #[test]
    fn weber_contrast_cases() {
        let img = GrayImage::from_raw(2, 1, vec![50, 100]);
        assert_eq!(weber_contrast(&img).unwrap(), 1.0);
        assert_eq!(weber_contrast(&GrayImage::filled(3, 3, 90)).unwrap(), 0.0);
        let with_zero = GrayImage::from_raw(2, 1, vec![0, 100]);
        assert_eq!(weber_contrast(&with_zero), Err(MetricsError::ZeroMinimum));
    }

    #[test]
    fn colorfulness_of_grayscale_is_zero() {
        let img = RgbImage::from_fn(5, 4, |x, y| {
            let v = (x * 31 + y * 47) as u8;
            [v, v, v]
        });
        assert_eq!(colorfulness(&img), 0.0);
    }

    #[test]
    fn colorfulness_is_layout_invariant() {
        let a = RgbImage::from_raw(2, 1, vec![255, 0, 0, 0, 0, 255]);
        let b = RgbImage::from_raw(1, 2, vec![0, 0, 255, 255, 0, 0]);
        assert_eq!(colorfulness(&a), colorfulness(&b));
    }

    #[test]
    fn colorfulness_red_blue_pair() {
        // rg = [255, 0], yb = [127.5, -255]
        let img = RgbImage::from_raw(2, 1, vec![255, 0, 0, 0, 0, 255]);
        let v_rg = 127.5f64 * 127.5;
        let v_yb = 191.25f64 * 191.25;
        let m = (127.5f64 * 127.5 + 63.75 * 63.75).sqrt();
        let expected = (v_rg + v_yb).sqrt() + 0.3 * m;
        assert!((colorfulness(&img) - expected).abs() < 1e-9);
    }

    #[test]
    fn cef_basics() {
        let img = RgbImage::from_raw(2, 1, vec![255, 0, 0, 0, 0, 255]);
        assert_eq!(cef(&img, &img).unwrap(), 1.0);
        let gray = RgbImage::filled(2, 2, [10, 10, 10]);
        assert_eq!(cef(&gray, &img), Err(MetricsError::AchromaticReference));
    }

    #[test]
    fn jpqm_is_deterministic_and_guards_size() {
        let img = GrayImage::from_fn(24, 24, |x, y| ((x * 7 + y * 13 + x * y) % 256) as u8);
        assert_eq!(jpqm(&img).unwrap(), jpqm(&img).unwrap());
        let small = GrayImage::filled(16, 24, 0);
        assert_eq!(jpqm(&small), Err(MetricsError::TooSmall { min: 17 }));
    }

    #[test]
    fn jpqm_scores_in_plausible_range() {
        let img = GrayImage::from_fn(64, 64, |x, y| {
            let fx = x as f64 / 9.0;
            let fy = y as f64 / 7.0;
            (120.0 + 60.0 * (fx.sin() + fy.cos())) as u8
        });
        let score = jpqm(&img).unwrap();
        assert!(score.is_finite());
        assert!((0.0..20.0).contains(&score), "score {score}");
    }
}
