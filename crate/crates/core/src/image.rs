//! In-memory image and label-map types.
//!
//! Pixel values are `f64` in `[0, 1]`, stored row-major with interleaved
//! channels. Quantization to 8 bits only happens at file boundaries (see
//! [`crate::io`]).

use crate::error::{Error, Result};

/// Row-major scalar or RGB field with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::SizeMismatch {
                expected,
                actual: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "pixel value {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    pub fn rgb(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(width, height, 3, data)
    }

    /// Builds a grayscale image by evaluating `f(x, y)` at every pixel, clamping to `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self::gray(width, height, data)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::gray(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    /// Channel values of the pixel at flat index `i`.
    #[inline]
    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// `(x, y)` pixel coordinates of flat index `i`.
    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i % self.width, i / self.width)
    }

    /// Luma conversion with BT.601 weights. Grayscale input is returned unchanged.
    pub fn to_grayscale(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).clamp(0.0, 1.0))
            .collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Nearest-neighbor resampling: source index `floor(dst * src_len / dst_len)`.
    pub fn resize_nearest(&self, new_w: usize, new_h: usize) -> Result<Image> {
        if new_w == 0 || new_h == 0 {
            return Err(Error::InvalidArgument(format!(
                "resize target must be positive, got {new_w}x{new_h}"
            )));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(new_w * new_h * c);
        for y in 0..new_h {
            let sy = (y * self.height / new_h).min(self.height - 1);
            for x in 0..new_w {
                let sx = (x * self.width / new_w).min(self.width - 1);
                let base = (sy * self.width + sx) * c;
                data.extend_from_slice(&self.data[base..base + c]);
            }
        }
        Ok(Image {
            width: new_w,
            height: new_h,
            channels: c,
            data,
        })
    }

    /// Values rounded to the nearest 8-bit level, as they would be after a save/load cycle.
    pub fn quantized(&self) -> Image {
        let data = self
            .data
            .iter()
            .map(|&v| f64::from(quantize(v)) / 255.0)
            .collect();
        Image {
            data,
            ..self.clone()
        }
    }

    pub(crate) fn from_parts_unchecked(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        Self {
            width,
            height,
            channels,
            data,
        }
    }
}

#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Per-pixel segment ids, contiguous from 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<usize>,
    count: usize,
}

impl LabelMap {
    /// Validates that ids are exactly `0..k` with every id present.
    pub fn new(width: usize, height: usize, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::SizeMismatch {
                expected: width * height,
                actual: labels.len(),
            });
        }
        let count = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; count];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!(
                "label ids must be contiguous; id {missing} is unused"
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
            count,
        })
    }

    /// Renumbers arbitrary ids to `0..k` in order of first appearance (row-major).
    pub fn from_raw(width: usize, height: usize, raw: &[usize]) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|&r| {
                let next = map.len();
                *map.entry(r).or_insert(next)
            })
            .collect();
        Self::new(width, height, labels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn segment_count(&self) -> usize {
        self.count
    }

    pub fn segment_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.count];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Indicator vector of segment `id`.
    pub fn indicator(&self, id: usize) -> Vec<f64> {
        self.labels
            .iter()
            .map(|&l| if l == id { 1.0 } else { 0.0 })
            .collect()
    }

    /// Fraction of pixels on which `self` and `other` agree after the best
    /// one-to-one matching of segment ids (exhaustive for up to 8 segments,
    /// greedy beyond).
    pub fn agreement(&self, other: &LabelMap) -> f64 {
        assert_eq!(
            self.labels.len(),
            other.labels.len(),
            "label maps differ in size"
        );
        let (a, b) = (self.count, other.count);
        let mut confusion = vec![vec![0usize; b]; a];
        for (&x, &y) in self.labels.iter().zip(&other.labels) {
            confusion[x][y] += 1;
        }
        let matched = best_matching(&confusion);
        matched as f64 / self.labels.len() as f64
    }
}

fn best_matching(confusion: &[Vec<usize>]) -> usize {
    let a = confusion.len();
    let b = confusion.first().map_or(0, Vec::len);
    if a.max(b) <= 8 {
        let mut used = vec![false; b];
        fn go(row: usize, confusion: &[Vec<usize>], used: &mut [bool]) -> usize {
            if row == confusion.len() {
                return 0;
            }
            // leaving a row unmatched is allowed when a > b
            let mut best = go(row + 1, confusion, used);
            for col in 0..used.len() {
                if !used[col] {
                    used[col] = true;
                    best = best.max(confusion[row][col] + go(row + 1, confusion, used));
                    used[col] = false;
                }
            }
            best
        }
        return go(0, confusion, &mut used);
    }
    let mut cells: Vec<(usize, usize, usize)> = confusion
        .iter()
        .enumerate()
        .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, &v)| (v, r, c)))
        .collect();
    cells.sort_unstable_by(|x, y| y.cmp(x));
    let (mut rows, mut cols) = (vec![false; a], vec![false; b]);
    let mut total = 0;
    for (v, r, c) in cells {
        if !rows[r] && !cols[c] {
            rows[r] = true;
            cols[c] = true;
            total += v;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_weights() {
        let white = Image::rgb(1, 1, vec![1.0, 1.0, 1.0]).unwrap();
        assert!((white.to_grayscale().data()[0] - 1.0).abs() < 1e-15);
        let red = Image::rgb(1, 1, vec![1.0, 0.0, 0.0]).unwrap();
        assert!((red.to_grayscale().data()[0] - 0.299).abs() < 1e-15);
        let g = Image::gray(2, 1, vec![0.1, 0.7]).unwrap();
        assert_eq!(g.to_grayscale(), g);
    }

    #[test]
    fn resize_cases() {
        let img = Image::gray(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(img.resize_nearest(2, 2).unwrap(), img);
        assert_eq!(img.resize_nearest(1, 1).unwrap().data(), &[0.1]);
        let one = Image::gray(1, 1, vec![0.6]).unwrap();
        assert_eq!(one.resize_nearest(2, 2).unwrap().data(), &[0.6; 4]);
        assert!(img.resize_nearest(0, 3).is_err());
    }

    #[test]
    fn rejects_out_of_range_and_bad_sizes() {
        assert!(Image::gray(1, 1, vec![1.5]).is_err());
        assert!(Image::gray(2, 1, vec![0.5]).is_err());
        assert!(Image::new(1, 1, 2, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn label_map_contiguity() {
        assert!(LabelMap::new(2, 1, vec![0, 2]).is_err());
        let lm = LabelMap::from_raw(3, 1, &[7, 3, 7]).unwrap();
        assert_eq!(lm.labels(), &[0, 1, 0]);
        assert_eq!(lm.segment_sizes(), vec![2, 1]);
    }

    #[test]
    fn agreement_is_label_permutation_invariant() {
        let a = LabelMap::new(4, 1, vec![0, 0, 1, 1]).unwrap();
        let b = LabelMap::new(4, 1, vec![1, 1, 0, 0]).unwrap();
        assert_eq!(a.agreement(&b), 1.0);
        let c = LabelMap::new(4, 1, vec![0, 1, 0, 1]).unwrap();
        assert_eq!(a.agreement(&c), 0.5);
    }

    #[test]
    fn quantize_rounds_half_up() {
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
    }

    proptest::proptest! {
        #[test]
        fn grayscale_within_channel_bounds(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let img = Image::rgb(1, 1, vec![r, g, b]).unwrap();
            let y = img.to_grayscale().data()[0];
            proptest::prop_assert!(y >= r.min(g).min(b) - 1e-15 && y <= r.max(g).max(b) + 1e-15);
        }

        #[test]
        fn resize_preserves_value_bounds(w in 1usize..6, h in 1usize..6, nw in 1usize..9, nh in 1usize..9, seed in 0u64..1000) {
            let data: Vec<f64> = (0..w * h).map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 999.0).collect();
            let img = Image::gray(w, h, data.clone()).unwrap();
            let out = img.resize_nearest(nw, nh).unwrap();
            let lo = data.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            proptest::prop_assert!(out.data().iter().all(|&v| v >= lo && v <= hi));
        }
    }
}
