//! Compares the data-parallel kernels against sequential execution.
//!
//! With the default `parallel` feature each kernel is measured twice: once
//! on the global rayon pool and once inside a single-thread pool, which
//! runs the same code in sequential order. Building with
//! `--no-default-features` measures the plain sequential fallback instead.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use lumen_core::dct::{enhance_color, EnhanceMode, MappingFunction};
use lumen_core::metrics::ssim;
use lumen_core::morphology::{erode, opening_by_reconstruction, StructuringElement};
use lumen_core::weber::{background_reconstruction, enhance_with_background};
use lumen_core::{GrayImage, RgbImage};

fn test_gray(side: u32) -> GrayImage {
    GrayImage::from_fn(side, side, |x, y| {
        let fx = x as f64 / 17.0;
        let fy = y as f64 / 23.0;
        let v = 90.0 + 70.0 * (fx.sin() * fy.cos()) + 40.0 * ((fx + fy).sin());
        v.clamp(0.0, 255.0) as u8
    })
}

fn test_rgb(side: u32) -> RgbImage {
    RgbImage::from_fn(side, side, |x, y| {
        let fx = x as f64 / 13.0;
        let fy = y as f64 / 19.0;
        [
            (80.0 + 60.0 * fx.sin()).clamp(0.0, 255.0) as u8,
            (70.0 + 50.0 * fy.cos()).clamp(0.0, 255.0) as u8,
            (60.0 + 55.0 * (fx + fy).sin()).clamp(0.0, 255.0) as u8,
        ]
    })
}

/// Benches `f` in both execution modes when the parallel feature is on.
fn bench_both<R>(c: &mut Criterion, name: &str, mut f: impl FnMut() -> R) {
    let mut group = c.benchmark_group(name);
    #[cfg(feature = "parallel")]
    {
        group.bench_function("parallel", |b| b.iter(&mut f));
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("single-thread pool");
        group.bench_function("sequential", |b| pool.install(|| b.iter(&mut f)));
    }
    #[cfg(not(feature = "parallel"))]
    group.bench_function("sequential", |b| b.iter(&mut f));
    group.finish();
}

fn bench_erode(c: &mut Criterion) {
    let img = test_gray(512);
    let se = StructuringElement::square(3);
    bench_both(c, "erode_512_mu3", || black_box(erode(black_box(&img), se)));
}

fn bench_opening_by_reconstruction(c: &mut Criterion) {
    let img = test_gray(256);
    let se = StructuringElement::square(2);
    bench_both(c, "opening_by_reconstruction_256_mu2", || {
        black_box(opening_by_reconstruction(black_box(&img), se))
    });
}

fn bench_weber_enhance(c: &mut Criterion) {
    let img = test_gray(256);
    bench_both(c, "weber_reconstruction_enhance_256_mu2", || {
        let bg = background_reconstruction(black_box(&img), 2);
        black_box(enhance_with_background(&img, &bg).unwrap())
    });
}

fn bench_enhance_color(c: &mut Criterion) {
    let img = test_rgb(512);
    bench_both(c, "enhance_color_512_chroma", || {
        black_box(enhance_color(
            black_box(&img),
            MappingFunction::Twisting,
            EnhanceMode::DcAcChroma,
        ))
    });
}

fn bench_ssim(c: &mut Criterion) {
    let a = test_gray(256);
    let b = erode(&a, StructuringElement::square(1));
    bench_both(c, "ssim_256", || black_box(ssim(black_box(&a), black_box(&b)).unwrap()));
}

criterion_group!(
    benches,
    bench_erode,
    bench_opening_by_reconstruction,
    bench_weber_enhance,
    bench_enhance_color,
    bench_ssim
);
criterion_main!(benches);
