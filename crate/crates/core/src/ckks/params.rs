use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::modarith::{closest_ntt_prime, is_prime};
use super::CkksError;

/// Largest log2(QP) that reaches 128-bit classical security for a ternary
/// secret, indexed by log2(N). Values from the homomorphic encryption
/// standard tables.
const HE_STANDARD_128: [(u32, f64); 6] = [
    (10, 27.0),
    (11, 54.0),
    (12, 109.0),
    (13, 218.0),
    (14, 438.0),
    (15, 881.0),
];

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Desk-scale: N = 2^13 with eleven ciphertext primes (ten levels).
    /// Not 128-bit secure; meant for tests.
    Test,
    /// N = 2^14, ten levels, log QP ≤ 438.
    N14,
    /// N = 2^15, eighteen levels, log QP ≤ 881.
    N15,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Test => "test",
            Preset::N14 => "n14",
            Preset::N15 => "n15",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = CkksError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "test" => Ok(Preset::Test),
            "n14" => Ok(Preset::N14),
            "n15" => Ok(Preset::N15),
            other => Err(CkksError::InvalidParams(format!("unknown preset `{other}`"))),
        }
    }
}

/// Parameters of the leveled scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CkksParams {
    pub ring_dim: usize,
    /// q_0 .. q_L. Level `l` ciphertexts live modulo q_0 ⋯ q_l.
    pub moduli_chain: Vec<u64>,
    /// Auxiliary prime used only during key switching.
    pub special_prime: u64,
    /// Δ at the top level.
    pub scale: f64,
    /// 128 when the chain fits the standard's bound for this ring, else 0.
    pub security_lambda: u32,
    pub sigma: f64,
    pub hamming_weight: usize,
    /// Decryption shares are smudged with uniform noise of
    /// `noise_bits + smudging_margin_bits` bits.
    pub smudging_margin_bits: f64,
}

/// Recipe from which [`CkksParams`] are generated deterministically.
#[derive(Debug, Clone, Copy)]
pub struct ChainSpec {
    pub log_n: u32,
    pub base_bits: u32,
    pub scale_bits: u32,
    pub levels: usize,
    pub special_bits: u32,
    pub smudging_margin_bits: f64,
}

impl CkksParams {
    pub fn preset(p: Preset) -> Self {
        let spec = match p {
            Preset::Test => ChainSpec {
                log_n: 13,
                base_bits: 61,
                scale_bits: 55,
                levels: 10,
                special_bits: 61,
                smudging_margin_bits: 8.0,
            },
            Preset::N14 => ChainSpec {
                log_n: 14,
                base_bits: 45,
                scale_bits: 34,
                levels: 10,
                special_bits: 49,
                smudging_margin_bits: 2.0,
            },
            Preset::N15 => ChainSpec {
                log_n: 15,
                base_bits: 55,
                scale_bits: 42,
                levels: 18,
                special_bits: 60,
                smudging_margin_bits: 4.0,
            },
        };
        Self::generate(spec).expect("preset chains are valid")
    }

    /// Builds a chain whose per-level scales stay within a prime spacing of
    /// Δ: each q_l is the NTT prime closest to Δ_l² / Δ, so that
    /// Δ_{l-1} = Δ_l² / q_l ≈ Δ.
    pub fn generate(spec: ChainSpec) -> Result<Self, CkksError> {
        if !(2..=17).contains(&spec.log_n) {
            return Err(CkksError::InvalidParams(format!("log_n {} out of range", spec.log_n)));
        }
        if spec.base_bits > 61 || spec.scale_bits > 61 || spec.special_bits > 61 {
            return Err(CkksError::InvalidParams("primes must be below 2^62".into()));
        }
        if spec.special_bits < spec.base_bits || spec.special_bits < spec.scale_bits {
            return Err(CkksError::InvalidParams(
                "special prime must be at least as large as every chain prime".into(),
            ));
        }
        let n = 1usize << spec.log_n;
        let scale = 2f64.powi(spec.scale_bits as i32);
        let mut used = Vec::new();

        let q0 = closest_ntt_prime(2f64.powi(spec.base_bits as i32), n, &used)
            .ok_or_else(|| CkksError::InvalidParams("no base prime".into()))?;
        used.push(q0);

        let mut upper = Vec::with_capacity(spec.levels);
        let mut level_scale = scale;
        for _ in 0..spec.levels {
            let target = level_scale * level_scale / scale;
            let q = closest_ntt_prime(target, n, &used)
                .ok_or_else(|| CkksError::InvalidParams("no level prime".into()))?;
            used.push(q);
            upper.push(q);
            level_scale = level_scale * level_scale / q as f64;
        }
        // upper[0] is q_L, the first prime consumed by rescaling.
        upper.reverse();
        let mut chain = vec![q0];
        chain.extend(upper);

        let special = closest_ntt_prime(2f64.powi(spec.special_bits as i32), n, &used)
            .ok_or_else(|| CkksError::InvalidParams("no special prime".into()))?;

        let mut params = Self {
            ring_dim: n,
            moduli_chain: chain,
            special_prime: special,
            scale,
            security_lambda: 0,
            sigma: 3.2,
            hamming_weight: n / 2,
            smudging_margin_bits: spec.smudging_margin_bits,
        };
        params.security_lambda = params.estimate_security();
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), CkksError> {
        let n = self.ring_dim;
        if !n.is_power_of_two() || n < 4 {
            return Err(CkksError::InvalidParams("ring dimension must be a power of two ≥ 4".into()));
        }
        if self.moduli_chain.is_empty() {
            return Err(CkksError::InvalidParams("empty moduli chain".into()));
        }
        let mut all = self.moduli_chain.clone();
        all.push(self.special_prime);
        for &q in &all {
            if q >= (1 << 62) || !is_prime(q) || (q - 1) % (2 * n as u64) != 0 {
                return Err(CkksError::InvalidParams(format!("{q} is not an NTT-friendly prime")));
            }
        }
        let mut sorted = all.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != all.len() {
            return Err(CkksError::InvalidParams("moduli must be distinct".into()));
        }
        if self.hamming_weight == 0 || self.hamming_weight > n {
            return Err(CkksError::InvalidParams("bad secret hamming weight".into()));
        }
        if !(self.scale > 1.0) {
            return Err(CkksError::InvalidParams("scale must exceed 1".into()));
        }
        Ok(())
    }

    pub fn max_level(&self) -> usize {
        self.moduli_chain.len() - 1
    }

    pub fn slots(&self) -> usize {
        self.ring_dim / 2
    }

    pub fn log_qp(&self) -> f64 {
        self.moduli_chain
            .iter()
            .chain(std::iter::once(&self.special_prime))
            .map(|&q| (q as f64).log2())
            .sum()
    }

    fn estimate_security(&self) -> u32 {
        let log_n = self.ring_dim.trailing_zeros();
        match HE_STANDARD_128.iter().find(|(l, _)| *l == log_n) {
            Some((_, bound)) if self.log_qp() <= *bound => 128,
            _ => 0,
        }
    }

    /// Canonical scale of a ciphertext at each level, index = level.
    pub fn level_scales(&self) -> Vec<f64> {
        let top = self.max_level();
        let mut scales = vec![0.0; top + 1];
        scales[top] = self.scale;
        for l in (1..=top).rev() {
            scales[l - 1] = scales[l] * scales[l] / self.moduli_chain[l] as f64;
        }
        scales
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_have_expected_shape() {
        let t = CkksParams::preset(Preset::Test);
        assert_eq!(t.ring_dim, 1 << 13);
        assert_eq!(t.max_level(), 10);
        assert_eq!(t.slots(), 4096);

        let p14 = CkksParams::preset(Preset::N14);
        assert_eq!(p14.ring_dim, 1 << 14);
        assert_eq!(p14.max_level(), 10);
        assert!(p14.log_qp() <= 438.0);
        assert_eq!(p14.security_lambda, 128);

        let p15 = CkksParams::preset(Preset::N15);
        assert_eq!(p15.ring_dim, 1 << 15);
        assert_eq!(p15.max_level(), 18);
        assert!(p15.log_qp() <= 881.0);
        assert_eq!(p15.security_lambda, 128);
    }

    #[test]
    fn level_scales_stay_near_delta() {
        for p in [Preset::Test, Preset::N14, Preset::N15] {
            let params = CkksParams::preset(p);
            for s in params.level_scales() {
                assert!((s / params.scale - 1.0).abs() < 1e-3, "{p}: {s}");
            }
        }
    }

    #[test]
    fn rejects_bad_chain() {
        let mut p = CkksParams::preset(Preset::Test);
        p.moduli_chain.push(p.moduli_chain[1]);
        assert!(p.validate().is_err());
        let mut p = CkksParams::preset(Preset::Test);
        p.moduli_chain[2] += 2;
        assert!(p.validate().is_err());
    }

    #[test]
    fn preset_names_parse() {
        assert_eq!("N14".parse::<Preset>().unwrap(), Preset::N14);
        assert!("n16".parse::<Preset>().is_err());
    }
}
