//! Noisy-digit views: additive white Gaussian noise, horizontal motion blur,
//! and reduced contrast followed by noise, applied to unit-scaled images.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use dmcca_core::dmcca::rng_stream;
use dmcca_core::linalg::Matrix;
use dmcca_core::{Error, Result};

pub const SIDE: usize = 28;

const STREAM_GLYPHS: u64 = 200;
const STREAM_VIEWS: u64 = 201;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmnistParams {
    /// Noise standard deviation on the [0, 1] pixel scale.
    pub awgn_sigma: f64,
    /// Horizontal box-kernel length in pixels; 1 disables the blur.
    pub blur_length: usize,
    /// Contrast factor around mid-grey; 1 leaves images unchanged.
    pub contrast: f64,
    /// Noise standard deviation added after the contrast reduction.
    pub contrast_awgn_sigma: f64,
    /// Number of built-in glyphs when no IDX source is given.
    pub n_images: usize,
}

impl Default for NmnistParams {
    fn default() -> Self {
        Self { awgn_sigma: 25.0 / 255.0, blur_length: 5, contrast: 0.5, contrast_awgn_sigma: 25.0 / 255.0, n_images: 2000 }
    }
}

impl NmnistParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.awgn_sigma >= 0.0 && self.contrast_awgn_sigma >= 0.0) {
            return Err(Error::InvalidInput("noise levels must be >= 0".into()));
        }
        if self.blur_length == 0 {
            return Err(Error::InvalidInput("blur length must be >= 1".into()));
        }
        if !(self.contrast.is_finite() && self.contrast >= 0.0) {
            return Err(Error::InvalidInput("contrast must be finite and >= 0".into()));
        }
        Ok(())
    }
}

const SEGMENTS: [((f64, f64), (f64, f64)); 7] = [
    ((0.0, 0.0), (1.0, 0.0)),
    ((1.0, 0.0), (1.0, 0.5)),
    ((1.0, 0.5), (1.0, 1.0)),
    ((0.0, 1.0), (1.0, 1.0)),
    ((0.0, 0.5), (0.0, 1.0)),
    ((0.0, 0.0), (0.0, 0.5)),
    ((0.0, 0.5), (1.0, 0.5)),
];

/// Seven-segment masks, bit `i` selecting `SEGMENTS[i]`.
const DIGIT_SEGMENTS: [u8; 10] = [0x3F, 0x06, 0x5B, 0x4F, 0x66, 0x6D, 0x7D, 0x07, 0x7F, 0x6F];

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
}

/// One anti-aliased seven-segment digit with random placement, size, slant
/// and stroke width, as `SIDE * SIDE` row-major values in [0, 1].
pub fn render_glyph<R: Rng + ?Sized>(digit: usize, rng: &mut R) -> Vec<f64> {
    let scale = rng.random_range(0.85..1.1);
    let (w, h) = (11.0 * scale, 17.0 * scale);
    let cx = 14.0 + rng.random_range(-2.0..2.0);
    let cy = 14.0 + rng.random_range(-1.5..1.5);
    let slant = rng.random_range(-0.25..0.25);
    let radius = rng.random_range(1.0..1.8);
    let to_px = |(x, y): (f64, f64)| (cx + (x - 0.5) * w + slant * (0.5 - y) * h, cy + (y - 0.5) * h);
    let strokes: Vec<_> = SEGMENTS
        .iter()
        .enumerate()
        .filter(|(i, _)| DIGIT_SEGMENTS[digit % 10] >> i & 1 == 1)
        .map(|(_, &(a, b))| (to_px(a), to_px(b)))
        .collect();
    let mut img = vec![0.0; SIDE * SIDE];
    for r in 0..SIDE {
        for c in 0..SIDE {
            let p = (c as f64 + 0.5, r as f64 + 0.5);
            let d = strokes.iter().map(|&(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min);
            img[r * SIDE + c] = (radius + 0.5 - d).clamp(0.0, 1.0);
        }
    }
    img
}

/// `n` glyphs with uniformly drawn digit labels.
pub fn glyph_images(n: usize, seed: u64) -> (Matrix<f64>, Vec<u64>) {
    let mut rng = rng_stream(seed, STREAM_GLYPHS);
    let mut data = Vec::with_capacity(n * SIDE * SIDE);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let digit = rng.random_range(0..10usize);
        data.extend(render_glyph(digit, &mut rng));
        labels.push(digit as u64);
    }
    (Matrix::new(n, SIDE * SIDE, data).expect("glyph buffer sized by construction"), labels)
}

fn add_noise<R: Rng + ?Sized>(img: &mut [f64], sigma: f64, rng: &mut R) {
    if sigma > 0.0 {
        for v in img.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v += sigma * z;
        }
    }
}

fn clamp_unit(img: &mut [f64]) {
    for v in img.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Centered horizontal box blur of `length` taps with clamp-to-edge borders.
pub fn motion_blur(img: &[f64], width: usize, length: usize) -> Vec<f64> {
    if length <= 1 {
        return img.to_vec();
    }
    let half = (length / 2) as isize;
    let lo = -half;
    let hi = length as isize - 1 - half;
    let norm = 1.0 / length as f64;
    let mut out = vec![0.0; img.len()];
    for (row_in, row_out) in img.chunks_exact(width).zip(out.chunks_exact_mut(width)) {
        for (c, dst) in row_out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in lo..=hi {
                let j = (c as isize + k).clamp(0, width as isize - 1) as usize;
                acc += row_in[j];
            }
            *dst = acc * norm;
        }
    }
    out
}

pub fn reduce_contrast(img: &mut [f64], factor: f64) {
    for v in img.iter_mut() {
        *v = 0.5 + factor * (*v - 0.5);
    }
}

/// The three corrupted views of `clean` (rows are `width`-wide images).
pub fn corrupt_views(clean: &Matrix<f64>, width: usize, params: &NmnistParams, seed: u64) -> Result<[Matrix<f64>; 3]> {
    params.validate()?;
    if width == 0 || !clean.cols().is_multiple_of(width) {
        return Err(Error::InvalidInput(format!("image width {width} does not divide {} pixels", clean.cols())));
    }
    let mut noisy = clean.clone();
    let mut rng = rng_stream(seed, STREAM_VIEWS);
    for r in 0..noisy.rows() {
        let row = noisy.row_mut(r);
        add_noise(row, params.awgn_sigma, &mut rng);
        clamp_unit(row);
    }
    let mut blurred = clean.clone();
    for r in 0..blurred.rows() {
        let b = motion_blur(clean.row(r), width, params.blur_length);
        let row = blurred.row_mut(r);
        row.copy_from_slice(&b);
        clamp_unit(row);
    }
    let mut faded = clean.clone();
    let mut rng = rng_stream(seed, STREAM_VIEWS + 1);
    for r in 0..faded.rows() {
        let row = faded.row_mut(r);
        reduce_contrast(row, params.contrast);
        add_noise(row, params.contrast_awgn_sigma, &mut rng);
        clamp_unit(row);
    }
    Ok([noisy, blurred, faded])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_op_corruption_returns_source() {
        let (clean, _) = glyph_images(12, 3);
        let params = NmnistParams { awgn_sigma: 0.0, blur_length: 1, contrast: 1.0, contrast_awgn_sigma: 0.0, n_images: 12 };
        for view in corrupt_views(&clean, SIDE, &params, 9).unwrap() {
            assert_eq!(view, clean);
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let (a, la) = glyph_images(20, 5);
        let (b, lb) = glyph_images(20, 5);
        assert_eq!((&a, &la), (&b, &lb));
        let p = NmnistParams::default();
        let va = corrupt_views(&a, SIDE, &p, 1).unwrap();
        let vb = corrupt_views(&b, SIDE, &p, 1).unwrap();
        for (x, y) in va.iter().zip(&vb) {
            let bx: Vec<u64> = x.as_slice().iter().map(|v| v.to_bits()).collect();
            let by: Vec<u64> = y.as_slice().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bx, by);
        }
        assert_ne!(corrupt_views(&a, SIDE, &p, 2).unwrap()[0], va[0]);
    }

    #[test]
    fn blur_preserves_mean_intensity() {
        let (clean, _) = glyph_images(50, 7);
        for r in 0..clean.rows() {
            let src = clean.row(r);
            let out = motion_blur(src, SIDE, 5);
            let (m0, m1) = (src.iter().sum::<f64>(), out.iter().sum::<f64>());
            assert!((m1 - m0).abs() <= 0.01 * m0, "{m0} vs {m1}");
        }
        let kernel_sum: f64 = motion_blur(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], 7, 5).iter().sum();
        assert!((kernel_sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn glyphs_are_distinct_per_digit() {
        let mut rng = rng_stream(0, 0);
        let one = render_glyph(1, &mut rng);
        let eight = render_glyph(8, &mut rng);
        assert!(one.iter().sum::<f64>() < eight.iter().sum::<f64>());
        assert!(one.iter().chain(&eight).all(|v| (0.0..=1.0).contains(v)));
    }
}
