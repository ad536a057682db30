//! Samplers for secrets, errors, masks and uniform ring elements.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::modarith::Modulus;
use super::poly::RnsPoly;

/// Ternary vector with exactly `weight` non-zero entries, each ±1.
pub fn ternary_hw<R: Rng + ?Sized>(n: usize, weight: usize, rng: &mut R) -> Vec<i64> {
    let mut out = vec![0i64; n];
    for i in sample(rng, n, weight.min(n)) {
        out[i] = if rng.random::<bool>() { 1 } else { -1 };
    }
    out
}

/// Ternary vector with P(0) = 1/2, P(±1) = 1/4.
pub fn ternary_zo<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<i64> {
    (0..n)
        .map(|_| match rng.random_range(0..4u8) {
            0 => 1,
            1 => -1,
            _ => 0,
        })
        .collect()
}

/// Rounded Gaussian, truncated at six standard deviations.
pub fn gaussian<R: Rng + ?Sized>(n: usize, sigma: f64, rng: &mut R) -> Vec<i64> {
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let bound = (6.0 * sigma).ceil();
    (0..n)
        .map(|_| loop {
            let x: f64 = normal.sample(rng);
            if x.abs() <= bound {
                break x.round() as i64;
            }
        })
        .collect()
}

/// Uniform integers in `[-bound, bound]`.
pub fn uniform_centered<R: Rng + ?Sized>(n: usize, bound: i128, rng: &mut R) -> Vec<i128> {
    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
}

/// Uniform element of the ring, sampled directly per limb. Uniform in the
/// coefficient domain is uniform in the NTT domain, so the result may be
/// read in either.
pub fn uniform_poly<R: Rng + ?Sized>(n: usize, moduli: &[Modulus], rng: &mut R) -> RnsPoly {
    RnsPoly::from_limbs(
        moduli
            .iter()
            .map(|q| (0..n).map(|_| rng.random_range(0..q.value())).collect())
            .collect(),
    )
}
