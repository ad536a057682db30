//! Canonical-embedding encoder.
//!
//! A vector of `N/2` slots is mapped to an integer polynomial whose evaluations
//! at the primitive `2N`-th roots `ζ^{5^j}` equal the slots scaled by Δ. The
//! transform is the "special" FFT over the rotation group generated by 5.

use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct SlotEncoder {
    ring_dim: usize,
    rot_group: Vec<usize>,
    ksi_pows: Vec<Complex64>,
}

impl SlotEncoder {
    pub fn new(ring_dim: usize) -> Self {
        assert!(ring_dim.is_power_of_two() && ring_dim >= 4);
        let m = 2 * ring_dim;
        let slots = ring_dim / 2;
        let mut rot_group = Vec::with_capacity(slots);
        let mut five = 1usize;
        for _ in 0..slots {
            rot_group.push(five);
            five = five * 5 % m;
        }
        let ksi_pows = (0..=m)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64))
            .collect();
        Self {
            ring_dim,
            rot_group,
            ksi_pows,
        }
    }

    pub fn slots(&self) -> usize {
        self.ring_dim / 2
    }

    fn bit_reverse_permute(vals: &mut [Complex64]) {
        let n = vals.len();
        let mut j = 0;
        for i in 1..n {
            let mut bit = n >> 1;
            while j & bit != 0 {
                j ^= bit;
                bit >>= 1;
            }
            j ^= bit;
            if i < j {
                vals.swap(i, j);
            }
        }
    }

    /// Slot evaluation: coefficient-side vector to slot values.
    fn fft_special(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let m = 2 * self.ring_dim;
        Self::bit_reverse_permute(vals);
        let mut len = 2;
        while len <= size {
            let lenh = len >> 1;
            let lenq = len << 2;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (self.rot_group[j] % lenq) * m / lenq;
                    let u = vals[i + j];
                    let v = vals[i + j + lenh] * self.ksi_pows[idx];
                    vals[i + j] = u + v;
                    vals[i + j + lenh] = u - v;
                }
            }
            len <<= 1;
        }
    }

    fn fft_special_inv(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let m = 2 * self.ring_dim;
        let mut len = size;
        while len >= 2 {
            let lenh = len >> 1;
            let lenq = len << 2;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (lenq - (self.rot_group[j] % lenq)) * m / lenq;
                    let u = vals[i + j] + vals[i + j + lenh];
                    let v = (vals[i + j] - vals[i + j + lenh]) * self.ksi_pows[idx];
                    vals[i + j] = u;
                    vals[i + j + lenh] = v;
                }
            }
            len >>= 1;
        }
        Self::bit_reverse_permute(vals);
        let inv = 1.0 / size as f64;
        for v in vals.iter_mut() {
            *v *= inv;
        }
    }

    /// Real-valued slots to real polynomial coefficients scaled by `scale`
    /// (not yet rounded). Missing slots are zero.
    pub fn embed(&self, values: &[f64], scale: f64) -> Vec<f64> {
        let slots = self.slots();
        assert!(values.len() <= slots);
        let mut vals = vec![Complex64::new(0.0, 0.0); slots];
        for (v, &x) in vals.iter_mut().zip(values) {
            v.re = x;
        }
        self.fft_special_inv(&mut vals);
        let mut coeffs = vec![0.0; self.ring_dim];
        for (i, v) in vals.iter().enumerate() {
            coeffs[i] = v.re * scale;
            coeffs[i + slots] = v.im * scale;
        }
        coeffs
    }

    /// Inverse of [`embed`](Self::embed); returns the real parts of all slots.
    pub fn project(&self, coeffs: &[f64], scale: f64) -> Vec<f64> {
        let slots = self.slots();
        assert_eq!(coeffs.len(), self.ring_dim);
        let mut vals: Vec<Complex64> = (0..slots)
            .map(|i| Complex64::new(coeffs[i] / scale, coeffs[i + slots] / scale))
            .collect();
        self.fft_special(&mut vals);
        vals.into_iter().map(|c| c.re).collect()
    }
}
