//! Precomputed tables shared by every operation under one parameter set.

use std::sync::Arc;

use super::ciphertext::Plaintext;
use super::encoding::SlotEncoder;
use super::modarith::Modulus;
use super::ntt::NttTable;
use super::params::CkksParams;
use super::poly::RnsPoly;
use super::CkksError;

#[derive(Debug)]
pub struct CkksContext {
    params: CkksParams,
    /// q_0 .. q_L followed by the special prime P.
    moduli: Vec<Modulus>,
    ntt: Vec<NttTable>,
    encoder: SlotEncoder,
    level_scales: Vec<f64>,
    /// rescale_inv[l][j] = q_l^{-1} mod q_j for j < l.
    rescale_inv: Vec<Vec<u64>>,
    p_inv_mod_q: Vec<u64>,
    p_mod_q: Vec<u64>,
    q0_inv_mod_q1: u64,
}

/// Combines two independent error bounds given as log2 magnitudes:
/// log2(sqrt(2^2a + 2^2b)).
pub fn noise_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + 0.5 * (1.0 + (2.0 * (lo - hi)).exp2()).log2()
}

impl CkksContext {
    pub fn new(params: CkksParams) -> Result<Arc<Self>, CkksError> {
        params.validate()?;
        let n = params.ring_dim;
        let mut moduli: Vec<Modulus> = params.moduli_chain.iter().map(|&q| Modulus::new(q)).collect();
        moduli.push(Modulus::new(params.special_prime));
        let ntt = moduli.iter().map(|&q| NttTable::new(q, n)).collect();
        let top = params.max_level();

        let rescale_inv = (0..=top)
            .map(|l| (0..l).map(|j| moduli[j].inv(moduli[l].value())).collect())
            .collect();
        let p = params.special_prime;
        let p_inv_mod_q = (0..=top).map(|j| moduli[j].inv(p)).collect();
        let p_mod_q = (0..=top).map(|j| moduli[j].reduce(p)).collect();
        let q0_inv_mod_q1 = if top >= 1 {
            moduli[1].inv(moduli[0].value())
        } else {
            0
        };

        Ok(Arc::new(Self {
            level_scales: params.level_scales(),
            encoder: SlotEncoder::new(n),
            params,
            moduli,
            ntt,
            rescale_inv,
            p_inv_mod_q,
            p_mod_q,
            q0_inv_mod_q1,
        }))
    }

    pub fn params(&self) -> &CkksParams {
        &self.params
    }

    pub fn ring_dim(&self) -> usize {
        self.params.ring_dim
    }

    pub fn slots(&self) -> usize {
        self.params.ring_dim / 2
    }

    pub fn max_level(&self) -> usize {
        self.params.max_level()
    }

    /// Canonical scale Δ_l of a ciphertext at level `l`.
    pub fn level_scale(&self, level: usize) -> f64 {
        self.level_scales[level]
    }

    /// Moduli q_0 .. q_level.
    pub fn q_moduli(&self, level: usize) -> &[Modulus] {
        &self.moduli[..=level]
    }

    /// q_0 .. q_L and P.
    pub fn key_moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    pub fn special_index(&self) -> usize {
        self.moduli.len() - 1
    }

    pub(crate) fn modulus(&self, idx: usize) -> &Modulus {
        &self.moduli[idx]
    }

    pub(crate) fn rescale_inv(&self, level: usize, j: usize) -> u64 {
        self.rescale_inv[level][j]
    }

    pub(crate) fn p_inv_mod_q(&self, j: usize) -> u64 {
        self.p_inv_mod_q[j]
    }

    pub(crate) fn p_mod_q(&self, j: usize) -> u64 {
        self.p_mod_q[j]
    }

    /// log2(q_0 ⋯ q_level).
    pub fn log_q(&self, level: usize) -> f64 {
        self.moduli[..=level].iter().map(Modulus::bits).sum()
    }

    /// Limb indices of a key polynomial restricted to level `l`: 0..=l and P.
    pub fn key_limbs(&self, level: usize) -> Vec<usize> {
        (0..=level).chain(std::iter::once(self.special_index())).collect()
    }

    pub fn moduli_at(&self, idx: &[usize]) -> Vec<Modulus> {
        idx.iter().map(|&i| self.moduli[i]).collect()
    }

    pub fn ntt_forward(&self, idx: usize, a: &mut [u64]) {
        self.ntt[idx].forward(a);
    }

    pub fn ntt_inverse(&self, idx: usize, a: &mut [u64]) {
        self.ntt[idx].inverse(a);
    }

    /// Small signed coefficients to an NTT-domain polynomial over `idx`.
    pub fn poly_from_signed(&self, coeffs: &[i64], idx: &[usize]) -> RnsPoly {
        RnsPoly::from_limbs(
            idx.iter()
                .map(|&i| {
                    let q = &self.moduli[i];
                    let mut limb: Vec<u64> = coeffs.iter().map(|&c| q.reduce_i64(c)).collect();
                    self.ntt[i].forward(&mut limb);
                    limb
                })
                .collect(),
        )
    }

    pub fn poly_from_i128(&self, coeffs: &[i128], idx: &[usize]) -> RnsPoly {
        RnsPoly::from_limbs(
            idx.iter()
                .map(|&i| {
                    let q = &self.moduli[i];
                    let mut limb: Vec<u64> = coeffs.iter().map(|&c| q.reduce_i128(c)).collect();
                    self.ntt[i].forward(&mut limb);
                    limb
                })
                .collect(),
        )
    }

    /// Centered integer coefficients of an NTT-domain polynomial at `level`,
    /// recovered by CRT from at most the two lowest limbs. Exact whenever the
    /// true coefficients are below q_0·q_1/2 in magnitude (q_0/2 at level 0).
    pub fn reconstruct_centered(&self, poly: &RnsPoly, level: usize) -> Vec<i128> {
        let n = self.ring_dim();
        let mut l0 = poly.limbs[0].clone();
        self.ntt[0].inverse(&mut l0);
        let q0 = &self.moduli[0];
        if level == 0 {
            return l0.iter().map(|&x| q0.center(x) as i128).collect();
        }
        let mut l1 = poly.limbs[1].clone();
        self.ntt[1].inverse(&mut l1);
        let q1 = &self.moduli[1];
        let big = q0.value() as u128 * q1.value() as u128;
        (0..n)
            .map(|i| {
                let a0 = l0[i];
                let diff = q1.sub(l1[i], q1.reduce(a0));
                let k = q1.mul(diff, self.q0_inv_mod_q1);
                let x = a0 as u128 + q0.value() as u128 * k as u128;
                if x > big / 2 {
                    x as i128 - big as i128
                } else {
                    x as i128
                }
            })
            .collect()
    }

    /// Rounds real coefficients to integers, refusing values that would not
    /// fit the modulus at `level`.
    pub(crate) fn round_coeffs(&self, coeffs: &[f64], level: usize) -> Result<Vec<i128>, CkksError> {
        let limit = (self.log_q(level) - 1.0).min(120.0).exp2();
        coeffs
            .iter()
            .map(|&c| {
                if !c.is_finite() || c.abs() >= limit {
                    Err(CkksError::Overflow(format!(
                        "encoded coefficient {c:e} exceeds the modulus at level {level}"
                    )))
                } else {
                    Ok(c.round() as i128)
                }
            })
            .collect()
    }

    pub fn encode(&self, values: &[f64], level: usize, scale: f64) -> Result<Plaintext, CkksError> {
        if values.len() > self.slots() {
            return Err(CkksError::TooManySlots {
                got: values.len(),
                max: self.slots(),
            });
        }
        if level > self.max_level() {
            return Err(CkksError::InvalidLevel(level));
        }
        let coeffs = self.encoder.embed(values, scale);
        let ints = self.round_coeffs(&coeffs, level)?;
        let idx: Vec<usize> = (0..=level).collect();
        Ok(Plaintext {
            poly: self.poly_from_i128(&ints, &idx),
            level,
            scale,
        })
    }

    /// Encodes at the canonical scale of `level`.
    pub fn encode_at(&self, values: &[f64], level: usize) -> Result<Plaintext, CkksError> {
        self.encode(values, level, self.level_scale(level))
    }

    pub fn decode(&self, pt: &Plaintext) -> Vec<f64> {
        let ints = self.reconstruct_centered(&pt.poly, pt.level);
        let coeffs: Vec<f64> = ints.iter().map(|&x| x as f64).collect();
        self.encoder.project(&coeffs, pt.scale)
    }

    // Noise model. Bounds are log2 of a high-probability bound on the infinity
    // norm of the coefficient-domain error, at the ciphertext's own scale.

    /// Fresh public-key encryption for a key shared by `parties` parties.
    pub fn fresh_noise_bits(&self, parties: usize) -> f64 {
        let n = self.ring_dim() as f64;
        let s2 = self.params.sigma * self.params.sigma;
        let h = self.params.hamming_weight as f64 / n;
        let k = parties.max(1) as f64;
        // v·e_pk + e_0 + e_1·s with v ∈ ZO(1/2)
        let var = s2 * (1.0 + n * 0.5 * k + n * h * k);
        (6.0 * var.sqrt()).log2()
    }

    /// Rounding error introduced by dividing by a prime.
    pub fn rescale_noise_bits(&self) -> f64 {
        let n = self.ring_dim() as f64;
        let h = self.params.hamming_weight as f64 / n;
        let var = (1.0 + n * h) / 12.0;
        (6.0 * var.sqrt()).log2()
    }

    /// Key-switching error before the final division by the level prime.
    pub fn keyswitch_noise_bits(&self, level: usize, parties: usize) -> f64 {
        let n = self.ring_dim() as f64;
        let k = parties.max(1) as f64;
        let qmax = self.moduli[..=level]
            .iter()
            .map(|q| q.value() as f64)
            .fold(0.0, f64::max);
        let p = self.params.special_prime as f64;
        let var = (level + 1) as f64 * n * qmax * qmax / 12.0 * self.params.sigma.powi(2) * k * k;
        let ks = (6.0 * var.sqrt() / p).log2();
        noise_add(ks, self.rescale_noise_bits())
    }
}
