use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfc_core::synth::{uniform_noise, uniform_noise_rgb};
use sfc_core::{
    brute_bilateral, brute_nlm, build_dense_affinity, dense_apply, AffinityConfig, CutOperator,
    PatchConfig, Radius, Weighting,
};

fn probe(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn brute_bilateral_matches_truncated_dense() {
    for seed in 0..20 {
        let img = uniform_noise(8, 8, seed).unwrap();
        for radius in [1, 2, 3] {
            let cfg = AffinityConfig::new(1.5, 0.2, Radius::Bounded(radius));
            let dense = build_dense_affinity(&img, Weighting::Pixel(cfg)).unwrap();
            let v = probe(64, seed);
            let (num, den) = brute_bilateral(&img, &v, &cfg).unwrap();
            assert!(
                max_abs(&num, &dense_apply(&dense, &v).unwrap()) <= 1e-12,
                "seed {seed} radius {radius}"
            );
            assert!(max_abs(&den, dense.degrees()) <= 1e-12);
        }
    }
}

#[test]
fn brute_nlm_matches_patch_dense() {
    for seed in 0..20 {
        for (img, weighting) in [
            (uniform_noise(6, 6, seed).unwrap(), true),
            (uniform_noise_rgb(6, 6, seed).unwrap(), false),
        ] {
            let cfg = PatchConfig {
                patch_radius: 1,
                sigma_n: 0.5,
                sigma_x: 2.0,
                search_radius: 2,
                gaussian_patch_weighting: weighting,
            };
            let dense = build_dense_affinity(&img, Weighting::Patch(cfg)).unwrap();
            let v = probe(36, seed);
            let (num, den) = brute_nlm(&img, &v, &cfg).unwrap();
            assert!(max_abs(&num, &dense.apply_w(&v)) <= 1e-12, "seed {seed}");
            assert!(max_abs(&den, dense.degrees()) <= 1e-12);
        }
    }
}

#[test]
fn window_covering_the_image_equals_unbounded() {
    let img = uniform_noise(7, 5, 3).unwrap();
    let bounded = build_dense_affinity(
        &img,
        Weighting::Pixel(AffinityConfig::new(2.0, 0.1, Radius::Bounded(7))),
    )
    .unwrap();
    let unbounded = build_dense_affinity(
        &img,
        Weighting::Pixel(AffinityConfig::new(2.0, 0.1, Radius::Unbounded)),
    )
    .unwrap();
    assert_eq!(bounded.matrix(), unbounded.matrix());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dense_affinity_invariants(seed in any::<u64>(), sx in 0.5f64..4.0, si in 0.02f64..1.0, r in 1usize..5) {
        let img = uniform_noise(6, 5, seed).unwrap();
        let a = build_dense_affinity(&img, Weighting::Pixel(AffinityConfig::new(sx, si, Radius::Bounded(r)))).unwrap();
        let n = a.n();
        for i in 0..n {
            prop_assert_eq!(a.weight(i, i), 1.0);
            let mut row = 0.0;
            for j in 0..n {
                let w = a.weight(i, j);
                prop_assert_eq!(w, a.weight(j, i));
                prop_assert!((0.0..=1.0).contains(&w));
                row += w;
            }
            prop_assert!(a.degrees()[i] >= 1.0);
            prop_assert!((a.degrees()[i] - row).abs() <= 1e-12 * row);
        }
    }

    #[test]
    fn brute_bilateral_is_linear(seed in any::<u64>(), alpha in -3.0f64..3.0) {
        let img = uniform_noise(6, 6, seed).unwrap();
        let cfg = AffinityConfig::new(1.0, 0.3, Radius::Bounded(2));
        let (u, v) = (probe(36, seed), probe(36, seed.wrapping_add(1)));
        let mix: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + b).collect();
        let (wu, _) = brute_bilateral(&img, &u, &cfg).unwrap();
        let (wv, _) = brute_bilateral(&img, &v, &cfg).unwrap();
        let (wm, _) = brute_bilateral(&img, &mix, &cfg).unwrap();
        for i in 0..36 {
            prop_assert!((wm[i] - (alpha * wu[i] + wv[i])).abs() <= 1e-12);
        }
    }
}
