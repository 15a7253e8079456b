//! Low-light image enhancement kernels and the quality metrics used to
//! compare them.
//!
//! Two enhancement families are provided:
//!
//! * grayscale enhancement driven by a morphological background estimate
//!   and a logarithmic (Weber-law) gray-level mapping ([`weber`]), built on
//!   the grayscale morphology kernels in [`morphology`];
//! * color enhancement that rescales 8x8 block-DCT coefficients of the
//!   luminance (and optionally chrominance) planes ([`dct`]).
//!
//! [`metrics`] scores results with SSIM, Shannon/normalized entropy, a
//! no-reference JPEG quality score, Weber contrast, and a colorfulness
//! ratio. [`pixelbuf`] holds the raster types plus binary PNM I/O and the
//! JFIF YCbCr conversion shared by both pipelines.
//!
//! With the default `parallel` feature the per-row and per-block loops run
//! on rayon; disabling it yields a dependency-free sequential build. Both
//! modes produce bit-identical results.

pub mod dct;
pub mod metrics;
pub mod morphology;
pub mod pixelbuf;
pub mod weber;

pub use pixelbuf::{GrayImage, RgbImage, YccPlanes};
