//! Shared fixtures for the criterion benches.

use sfc_core::synth::two_region;
use sfc_core::Image;

/// Seeded two-region test image with the bench noise level.
pub fn fixture(size: usize) -> Image {
    two_region(size, 0.2, 0.8, 0.02, 0)
        .expect("valid fixture")
        .0
}

/// Spatial sigma at 1/32 of the image height.
pub fn sigma_x(size: usize) -> f64 {
    size as f64 / 32.0
}

/// Deterministic probe vector in [0, 1].
pub fn probe(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| ((i * 2654435761) % 1000) as f64 / 1000.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_stable() {
        assert_eq!(fixture(16).data(), fixture(16).data());
        assert!(probe(100).iter().all(|v| (0.0..1.0).contains(v)));
        assert_eq!(sigma_x(128), 4.0);
    }
}
