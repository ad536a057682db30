use rand::Rng;

use super::ciphertext::{Ciphertext, Plaintext};
use super::context::CkksContext;
use super::keys::{PublicKey, SecretKey};
use super::poly::RnsPoly;
use super::sampling::{gaussian, ternary_zo};
use super::CkksError;

impl CkksContext {
    /// Public-key encryption at the plaintext's level:
    /// (v·b + e_0 + m, v·a + e_1).
    pub fn encrypt<R: Rng + ?Sized>(
        &self,
        pk: &PublicKey,
        pt: &Plaintext,
        rng: &mut R,
    ) -> Result<Ciphertext, CkksError> {
        let level = pt.level;
        if level > self.max_level() {
            return Err(CkksError::InvalidLevel(level));
        }
        let n = self.ring_dim();
        let idx: Vec<usize> = (0..=level).collect();
        let moduli = self.q_moduli(level);
        let sigma = self.params().sigma;

        let v = self.poly_from_signed(&ternary_zo(n, rng), &idx);
        let e0 = self.poly_from_signed(&gaussian(n, sigma, rng), &idx);
        let e1 = self.poly_from_signed(&gaussian(n, sigma, rng), &idx);

        let mut b = pk.b.clone();
        b.truncate(level + 1);
        let mut a = pk.a.clone();
        a.truncate(level + 1);

        let mut c0 = v.mul(&b, moduli);
        c0.add_assign(&e0, moduli);
        c0.add_assign(&pt.poly, moduli);
        let mut c1 = v.mul(&a, moduli);
        c1.add_assign(&e1, moduli);

        Ok(Ciphertext {
            c0,
            c1,
            level,
            scale: pt.scale,
            noise_bits: self.fresh_noise_bits(pk.parties),
        })
    }

    /// Encodes at the top level and canonical scale, then encrypts.
    pub fn encrypt_values<R: Rng + ?Sized>(
        &self,
        pk: &PublicKey,
        values: &[f64],
        rng: &mut R,
    ) -> Result<Ciphertext, CkksError> {
        let pt = self.encode_at(values, self.max_level())?;
        self.encrypt(pk, &pt, rng)
    }

    /// Noiseless ciphertext (m, 0); decrypts to m under any key.
    pub fn trivial(&self, pt: &Plaintext) -> Ciphertext {
        Ciphertext {
            c0: pt.poly.clone(),
            c1: RnsPoly::zero(self.ring_dim(), pt.level + 1),
            level: pt.level,
            scale: pt.scale,
            noise_bits: f64::NEG_INFINITY,
        }
    }

    pub fn decrypt(&self, sk: &SecretKey, ct: &Ciphertext) -> Plaintext {
        let idx: Vec<usize> = (0..=ct.level).collect();
        let moduli = self.q_moduli(ct.level);
        let mut m = ct.c1.mul(&sk.poly_at(&idx), moduli);
        m.add_assign(&ct.c0, moduli);
        Plaintext {
            poly: m,
            level: ct.level,
            scale: ct.scale,
        }
    }

    pub fn decrypt_values(&self, sk: &SecretKey, ct: &Ciphertext) -> Vec<f64> {
        self.decode(&self.decrypt(sk, ct))
    }
}
