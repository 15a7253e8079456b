//! Raster image buffers, binary PNM (P5/P6) I/O, and JFIF YCbCr conversion.
//!
//! Only the binary netpbm variants with maxval 255 are supported; that is
//! enough for bit-exact, dependency-free fixtures. Color conversion keeps
//! full `f64` precision until the final re-quantization to 8-bit RGB.

use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Errors from decoding a PNM byte stream.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PnmError {
    /// Magic number is neither `P5` nor `P6`.
    #[error("not a binary PGM/PPM stream (magic must be P5 or P6)")]
    BadMagic,
    /// Header is malformed (non-numeric or nonpositive fields).
    #[error("bad PNM header: {0}")]
    BadHeader(&'static str),
    /// Only maxval 255 is supported.
    #[error("unsupported maxval {0} (only 255 is supported)")]
    UnsupportedMaxval(u32),
    /// Fewer payload bytes than the header promises.
    #[error("truncated pixel data: need {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

/// 8-bit grayscale image. Samples are row-major with the origin at the
/// top-left corner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    /// Wraps raw row-major samples.
    ///
    /// Panics if either dimension is zero or `data.len() != width * height`.
    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        assert_eq!(
            data.len(),
            width as usize * height as usize,
            "sample count does not match dimensions"
        );
        Self { width, height, data }
    }

    /// Constant image of the given value.
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self::from_raw(width, height, vec![value; width as usize * height as usize])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_raw(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Row-major samples.
    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    /// Iterator over rows as slices.
    pub fn rows(&self) -> std::slice::ChunksExact<'_, u8> {
        self.data.chunks_exact(self.width as usize)
    }
}

/// 8-bit RGB image with interleaved `(R, G, B)` triples, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    /// Wraps raw interleaved samples.
    ///
    /// Panics if either dimension is zero or `data.len() != 3 * width * height`.
    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        assert_eq!(
            data.len(),
            3 * width as usize * height as usize,
            "sample count does not match dimensions"
        );
        Self { width, height, data }
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(3 * width as usize * height as usize);
        for _ in 0..width as usize * height as usize {
            data.extend_from_slice(&rgb);
        }
        Self::from_raw(width, height, data)
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(3 * width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::from_raw(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    /// JFIF luminance plane, re-quantized to 8 bits.
    pub fn to_luma(&self) -> GrayImage {
        let planes = rgb_to_ycbcr(self);
        let data = planes.y.iter().map(|&v| quantize_u8(v)).collect();
        GrayImage::from_raw(self.width, self.height, data)
    }
}

/// Real-valued Y, Cb, Cr planes produced by the JFIF forward transform.
///
/// Planes are unclamped: nominal ranges are Y in `[0, 255]` and Cb/Cr in
/// `[0, 255]` centered at 128, but intermediate processing may leave them.
#[derive(Debug, Clone, PartialEq)]
pub struct YccPlanes {
    pub width: u32,
    pub height: u32,
    pub y: Vec<f64>,
    pub cb: Vec<f64>,
    pub cr: Vec<f64>,
}

impl YccPlanes {
    /// Panics if the planes do not all hold `width * height` entries.
    pub fn new(width: u32, height: u32, y: Vec<f64>, cb: Vec<f64>, cr: Vec<f64>) -> Self {
        let n = width as usize * height as usize;
        assert!(width > 0 && height > 0, "plane dimensions must be positive");
        assert!(
            y.len() == n && cb.len() == n && cr.len() == n,
            "plane length does not match dimensions"
        );
        Self { width, height, y, cb, cr }
    }
}

/// A decoded PNM image: P5 grayscale or P6 color.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PnmImage {
    Gray(GrayImage),
    Rgb(RgbImage),
}

/// Rounds half away from zero, then clamps to `[0, 255]`.
///
/// This is the single re-quantization rule used across the crate.
pub(crate) fn quantize_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn is_pnm_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

/// Reads the next unsigned decimal field, skipping whitespace and
/// `#`-to-end-of-line comments.
fn next_uint(bytes: &[u8], pos: &mut usize) -> Result<u32, PnmError> {
    loop {
        while *pos < bytes.len() && is_pnm_space(bytes[*pos]) {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    let mut value: u64 = 0;
    while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
        value = value * 10 + u64::from(bytes[*pos] - b'0');
        if value > u64::from(u32::MAX) {
            return Err(PnmError::BadHeader("field out of range"));
        }
        *pos += 1;
    }
    if *pos == start {
        return Err(PnmError::BadHeader("expected a decimal field"));
    }
    Ok(value as u32)
}

/// Decodes a binary PGM (P5) or PPM (P6) stream with maxval 255.
///
/// The header tolerates arbitrary whitespace and `#` comments; exactly one
/// whitespace byte separates the maxval from the sample payload. Trailing
/// bytes after the payload are ignored.
pub fn read_pnm(bytes: &[u8]) -> Result<PnmImage, PnmError> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(PnmError::BadMagic);
    }
    let color = match bytes[1] {
        b'5' => false,
        b'6' => true,
        _ => return Err(PnmError::BadMagic),
    };
    let mut pos = 2;
    if pos >= bytes.len() || !(is_pnm_space(bytes[pos]) || bytes[pos] == b'#') {
        return Err(PnmError::BadHeader("expected whitespace after magic"));
    }
    let width = next_uint(bytes, &mut pos)?;
    let height = next_uint(bytes, &mut pos)?;
    let maxval = next_uint(bytes, &mut pos)?;
    if width == 0 || height == 0 {
        return Err(PnmError::BadHeader("zero dimension"));
    }
    if maxval != 255 {
        return Err(PnmError::UnsupportedMaxval(maxval));
    }
    if pos >= bytes.len() || !is_pnm_space(bytes[pos]) {
        return Err(PnmError::BadHeader("expected whitespace before pixel data"));
    }
    pos += 1;

    let channels = if color { 3 } else { 1 };
    let expected = channels * width as usize * height as usize;
    let found = bytes.len() - pos;
    if found < expected {
        return Err(PnmError::Truncated { expected, found });
    }
    let data = bytes[pos..pos + expected].to_vec();
    Ok(if color {
        PnmImage::Rgb(RgbImage::from_raw(width, height, data))
    } else {
        PnmImage::Gray(GrayImage::from_raw(width, height, data))
    })
}

fn write_header(magic: &str, width: u32, height: u32, cap: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(cap + 32);
    out.extend_from_slice(magic.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(format!("{} {}", width, height).as_bytes());
    out.push(b'\n');
    out.extend_from_slice(b"255");
    out.push(b'\n');
    out
}

/// Encodes to the canonical binary PGM form: `P5\n<w> <h>\n255\n` + samples.
pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = write_header("P5", img.width, img.height, img.data.len());
    out.extend_from_slice(&img.data);
    out
}

/// Encodes to the canonical binary PPM form: `P6\n<w> <h>\n255\n` + samples.
pub fn write_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = write_header("P6", img.width, img.height, img.data.len());
    out.extend_from_slice(&img.data);
    out
}

/// Encodes either image kind to its canonical PNM form.
pub fn write_pnm(img: &PnmImage) -> Vec<u8> {
    match img {
        PnmImage::Gray(g) => write_pgm(g),
        PnmImage::Rgb(c) => write_ppm(c),
    }
}

/// JFIF forward transform (full range, no rounding, no clamping):
///
/// ```text
/// Y  =  0.299 R + 0.587 G + 0.114 B
/// Cb = -0.168736 R - 0.331264 G + 0.5 B + 128
/// Cr =  0.5 R - 0.418688 G - 0.081312 B + 128
/// ```
pub fn rgb_to_ycbcr(img: &RgbImage) -> YccPlanes {
    let w = img.width as usize;
    let h = img.height as usize;
    let mut y = vec![0.0f64; w * h];
    let mut cb = vec![0.0f64; w * h];
    let mut cr = vec![0.0f64; w * h];

    let fill = |row: usize, y_row: &mut [f64], cb_row: &mut [f64], cr_row: &mut [f64]| {
        let src = &img.data[3 * row * w..3 * (row + 1) * w];
        for (x, px) in src.chunks_exact(3).enumerate() {
            let r = f64::from(px[0]);
            let g = f64::from(px[1]);
            let b = f64::from(px[2]);
            // evaluated as offsets from G so achromatic pixels land on
            // Y = v, Cb = Cr = 128 exactly
            y_row[x] = g + 0.299 * (r - g) + 0.114 * (b - g);
            cb_row[x] = 0.5 * (b - g) - 0.168736 * (r - g) + 128.0;
            cr_row[x] = 0.5 * (r - g) - 0.081312 * (b - g) + 128.0;
        }
    };

    #[cfg(feature = "parallel")]
    y.par_chunks_mut(w)
        .zip(cb.par_chunks_mut(w))
        .zip(cr.par_chunks_mut(w))
        .enumerate()
        .for_each(|(row, ((yr, cbr), crr))| fill(row, yr, cbr, crr));
    #[cfg(not(feature = "parallel"))]
    y.chunks_mut(w)
        .zip(cb.chunks_mut(w))
        .zip(cr.chunks_mut(w))
        .enumerate()
        .for_each(|(row, ((yr, cbr), crr))| fill(row, yr, cbr, crr));

    YccPlanes { width: img.width, height: img.height, y, cb, cr }
}

/// Inverse JFIF transform, rounded half away from zero and clamped to
/// `[0, 255]` per channel:
///
/// ```text
/// R = Y + 1.402 (Cr - 128)
/// G = Y - 0.344136 (Cb - 128) - 0.714136 (Cr - 128)
/// B = Y + 1.772 (Cb - 128)
/// ```
pub fn ycbcr_to_rgb(planes: &YccPlanes) -> RgbImage {
    let w = planes.width as usize;
    let h = planes.height as usize;
    let mut data = vec![0u8; 3 * w * h];

    let fill = |row: usize, out: &mut [u8]| {
        for x in 0..w {
            let i = row * w + x;
            let y = planes.y[i];
            let cb = planes.cb[i] - 128.0;
            let cr = planes.cr[i] - 128.0;
            out[3 * x] = quantize_u8(y + 1.402 * cr);
            out[3 * x + 1] = quantize_u8(y - 0.344136 * cb - 0.714136 * cr);
            out[3 * x + 2] = quantize_u8(y + 1.772 * cb);
        }
    };

    #[cfg(feature = "parallel")]
    data.par_chunks_mut(3 * w).enumerate().for_each(|(row, out)| fill(row, out));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(3 * w).enumerate().for_each(|(row, out)| fill(row, out));

    RgbImage::from_raw(planes.width, planes.height, data)
}
