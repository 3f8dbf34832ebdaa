//! Seeded synthetic test images with known ground truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::{Image, LabelMap};

/// Disk of `high` on a `low` background plus clamped Gaussian noise. The
/// disk center moves by up to two pixels with the seed. Ground truth labels
/// the background 0 and the disk 1.
pub fn two_region(
    size: usize,
    low: f64,
    high: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<(Image, LabelMap)> {
    if size < 8 {
        return Err(Error::InvalidArgument(format!(
            "two-region images need size >= 8 (got {size})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cx = size as f64 / 2.0 + rng.random_range(-2.0..=2.0);
    let cy = size as f64 / 2.0 + rng.random_range(-2.0..=2.0);
    let radius = 0.3 * size as f64;
    let inside = |x: usize, y: usize| {
        let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        dx * dx + dy * dy <= radius * radius
    };
    let noise = Normal::new(0.0, noise_sigma.max(0.0))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let img = Image::from_fn(size, size, |x, y| {
        let base = if inside(x, y) { high } else { low };
        let n = if noise_sigma > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        (base + n).clamp(0.0, 1.0)
    })?;
    let truth: Vec<usize> = (0..size * size)
        .map(|i| usize::from(inside(i % size, i / size)))
        .collect();
    Ok((img, LabelMap::from_raw(size, size, &truth)?))
}

/// Central square of period-2 checkerboard (`mean +- amplitude`) on a flat
/// `mean` background; both regions have the same mean intensity. The square
/// covers about half the image. Ground truth: background 0, texture 1.
pub fn texture_pair(size: usize, mean: f64, amplitude: f64) -> Result<(Image, LabelMap)> {
    let side = ((size * size) as f64 / 2.0).sqrt().round() as usize;
    let lo = (size - side) / 2;
    let inside = |x: usize, y: usize| (lo..lo + side).contains(&x) && (lo..lo + side).contains(&y);
    let img = Image::from_fn(size, size, |x, y| {
        if inside(x, y) {
            if (x + y) % 2 == 0 {
                mean + amplitude
            } else {
                mean - amplitude
            }
        } else {
            mean
        }
    })?;
    let truth: Vec<usize> = (0..size * size)
        .map(|i| usize::from(inside(i % size, i / size)))
        .collect();
    Ok((img, LabelMap::from_raw(size, size, &truth)?))
}

/// Uniform random grayscale image.
pub fn uniform_noise(width: usize, height: usize, seed: u64) -> Result<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(width, height, |_, _| rng.random::<f64>())
}

/// Uniform random RGB image.
pub fn uniform_noise_rgb(width: usize, height: usize, seed: u64) -> Result<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height * 3)
        .map(|_| rng.random::<f64>())
        .collect();
    Image::rgb(width, height, data)
}
