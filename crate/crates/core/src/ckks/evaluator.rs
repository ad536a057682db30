//! Homomorphic arithmetic. Every ciphertext is kept at the canonical scale of
//! its level, so operands at equal levels always have equal scales.

use super::ciphertext::{Ciphertext, Plaintext};
use super::context::{noise_add, CkksContext};
use super::keys::RelinKey;
use super::modarith::Modulus;
use super::poly::RnsPoly;
use super::CkksError;

const SCALE_TOLERANCE: f64 = 1e-9;

/// Centered lift of a residue mod `from` into `to`.
#[inline]
fn lift(x: u64, from: &Modulus, to: &Modulus, from_mod_to: u64) -> u64 {
    let r = to.reduce(x);
    let neg = ((x > from.value() / 2) as u64).wrapping_neg();
    (to.sub(r, from_mod_to) & neg) | (r & !neg)
}

/// Levels consumed by [`CkksContext::poly_eval`] for a polynomial of the
/// given degree.
pub fn poly_depth(degree: usize) -> usize {
    if degree == 0 {
        0
    } else {
        (usize::BITS - degree.leading_zeros()) as usize
    }
}

impl CkksContext {
    fn check_pair(&self, a: &Ciphertext, b: &Ciphertext) -> Result<(), CkksError> {
        if a.level != b.level {
            return Err(CkksError::LevelMismatch {
                left: a.level,
                right: b.level,
            });
        }
        if ((a.scale - b.scale) / a.scale).abs() > SCALE_TOLERANCE {
            return Err(CkksError::ScaleMismatch {
                left: a.scale,
                right: b.scale,
            });
        }
        Ok(())
    }

    fn check_plain(&self, ct: &Ciphertext, pt: &Plaintext) -> Result<(), CkksError> {
        if pt.level < ct.level {
            return Err(CkksError::LevelMismatch {
                left: ct.level,
                right: pt.level,
            });
        }
        Ok(())
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, CkksError> {
        self.check_pair(a, b)?;
        let moduli = self.q_moduli(a.level);
        let mut out = a.clone();
        out.c0.add_assign(&b.c0, moduli);
        out.c1.add_assign(&b.c1, moduli);
        out.noise_bits = noise_add(a.noise_bits, b.noise_bits);
        Ok(out)
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, CkksError> {
        self.check_pair(a, b)?;
        let moduli = self.q_moduli(a.level);
        let mut out = a.clone();
        out.c0.sub_assign(&b.c0, moduli);
        out.c1.sub_assign(&b.c1, moduli);
        out.noise_bits = noise_add(a.noise_bits, b.noise_bits);
        Ok(out)
    }

    pub fn neg(&self, a: &Ciphertext) -> Ciphertext {
        let moduli = self.q_moduli(a.level);
        let mut out = a.clone();
        out.c0.neg_assign(moduli);
        out.c1.neg_assign(moduli);
        out
    }

    pub fn add_plain(&self, ct: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext, CkksError> {
        self.check_plain(ct, pt)?;
        if ((ct.scale - pt.scale) / ct.scale).abs() > SCALE_TOLERANCE {
            return Err(CkksError::ScaleMismatch {
                left: ct.scale,
                right: pt.scale,
            });
        }
        let moduli = self.q_moduli(ct.level);
        let mut out = ct.clone();
        let mut p = pt.poly.clone();
        p.truncate(ct.level + 1);
        out.c0.add_assign(&p, moduli);
        out.noise_bits = noise_add(ct.noise_bits, -1.0);
        Ok(out)
    }

    pub fn sub_plain(&self, ct: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext, CkksError> {
        let mut neg = pt.clone();
        neg.poly.neg_assign(self.q_moduli(pt.level));
        self.add_plain(ct, &neg)
    }

    /// Adds the real constant `c` to every slot. Consumes no level.
    pub fn add_const(&self, ct: &Ciphertext, c: f64) -> Result<Ciphertext, CkksError> {
        let k = self.round_coeffs(&[c * ct.scale], ct.level)?[0];
        let moduli = self.q_moduli(ct.level);
        let scalars: Vec<u64> = moduli.iter().map(|q| q.reduce_i128(k)).collect();
        let mut out = ct.clone();
        out.c0.add_scalar_assign(&scalars, moduli);
        out.noise_bits = noise_add(ct.noise_bits, -1.0);
        Ok(out)
    }

    /// Multiplies every slot by `c` and rescales, landing at the canonical
    /// scale one level down.
    pub fn mul_const(&self, ct: &Ciphertext, c: f64) -> Result<Ciphertext, CkksError> {
        let l = ct.level;
        if l == 0 {
            return Err(CkksError::LevelExhausted("mul_const"));
        }
        let q_l = self.modulus(l).value() as f64;
        let target = self.level_scale(l - 1);
        let t = target * q_l / ct.scale;
        let k = self.round_coeffs(&[c * t], l)?[0];
        let moduli = self.q_moduli(l);
        let scalars: Vec<u64> = moduli.iter().map(|q| q.reduce_i128(k)).collect();
        let mut out = ct.clone();
        out.c0.mul_scalar_assign(&scalars, moduli);
        out.c1.mul_scalar_assign(&scalars, moduli);
        let kb = if k == 0 { f64::NEG_INFINITY } else { (k.unsigned_abs() as f64).log2() };
        out.noise_bits = ct.noise_bits + kb;
        let mut out = self.rescale(&out)?;
        out.scale = target;
        Ok(out)
    }

    /// Plaintext whose product with a ciphertext at (`level`, `scale`) lands,
    /// after the built-in rescale, at the canonical scale of `level - 1`.
    pub fn encode_multiplier(
        &self,
        values: &[f64],
        level: usize,
        scale: f64,
    ) -> Result<Plaintext, CkksError> {
        if level == 0 {
            return Err(CkksError::LevelExhausted("encode_multiplier"));
        }
        let t = self.level_scale(level - 1) * self.modulus(level).value() as f64 / scale;
        self.encode(values, level, t)
    }

    /// Slot-wise product with a plaintext, followed by a rescale.
    pub fn mul_plain(&self, ct: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext, CkksError> {
        self.check_plain(ct, pt)?;
        if ct.level == 0 {
            return Err(CkksError::LevelExhausted("mul_plain"));
        }
        let moduli = self.q_moduli(ct.level);
        let mut p = pt.poly.clone();
        p.truncate(ct.level + 1);
        let mut out = ct.clone();
        out.c0.mul_assign(&p, moduli);
        out.c1.mul_assign(&p, moduli);
        out.scale = ct.scale * pt.scale;
        out.noise_bits = ct.noise_bits + pt.scale.log2();
        let mut out = self.rescale(&out)?;
        let canonical = self.level_scale(out.level);
        if ((out.scale - canonical) / canonical).abs() <= SCALE_TOLERANCE {
            out.scale = canonical;
        }
        Ok(out)
    }

    /// Divides by the last prime of the current level, rounding.
    pub fn rescale(&self, ct: &Ciphertext) -> Result<Ciphertext, CkksError> {
        let l = ct.level;
        if l == 0 {
            return Err(CkksError::LevelExhausted("rescale"));
        }
        let q_l = self.modulus(l).value() as f64;
        let c0 = self.drop_last_limb(&ct.c0, l);
        let c1 = self.drop_last_limb(&ct.c1, l);
        Ok(Ciphertext {
            c0,
            c1,
            level: l - 1,
            scale: ct.scale / q_l,
            noise_bits: noise_add(ct.noise_bits - q_l.log2(), self.rescale_noise_bits()),
        })
    }

    fn drop_last_limb(&self, p: &RnsPoly, l: usize) -> RnsPoly {
        let ql = *self.modulus(l);
        let mut last = p.limbs[l].clone();
        self.ntt_inverse(l, &mut last);
        let mut out = Vec::with_capacity(l);
        for j in 0..l {
            let qj = *self.modulus(j);
            let ql_mod = qj.reduce(ql.value());
            let mut t: Vec<u64> = last.iter().map(|&x| lift(x, &ql, &qj, ql_mod)).collect();
            self.ntt_forward(j, &mut t);
            let inv = self.rescale_inv(l, j);
            let inv_s = qj.shoup(inv);
            let limb: Vec<u64> = p.limbs[j]
                .iter()
                .zip(&t)
                .map(|(&c, &d)| qj.mul_shoup(qj.sub(c, d), inv, inv_s))
                .collect();
            out.push(limb);
        }
        RnsPoly::from_limbs(out)
    }

    /// Applies the key-switching key to `c2` at level `l`; returns the pair
    /// to be added to (c0, c1).
    fn key_switch(&self, c2: &RnsPoly, l: usize, rlk: &RelinKey) -> Result<(RnsPoly, RnsPoly), CkksError> {
        if rlk.digits() < l + 1 {
            return Err(CkksError::InvalidParams("relinearization key has too few digits".into()));
        }
        let n = self.ring_dim();
        let key_idx = self.key_limbs(l);
        let key_mod = self.moduli_at(&key_idx);
        // Products are below 2^124, so 15 of them fit a u128 before a
        // reduction is needed.
        let mut acc_b = vec![vec![0u128; n]; key_idx.len()];
        let mut acc_a = vec![vec![0u128; n]; key_idx.len()];
        let mut buf = vec![0u64; n];

        for j in 0..=l {
            let qj = *self.modulus(j);
            let mut digit = c2.limbs[j].clone();
            self.ntt_inverse(j, &mut digit);
            let flush = (j + 1) % 15 == 0;
            for (t, &i) in key_idx.iter().enumerate() {
                let qi = key_mod[t];
                let d: &[u64] = if i == j {
                    &c2.limbs[j]
                } else {
                    let qj_mod = qi.reduce(qj.value());
                    for (o, &x) in buf.iter_mut().zip(&digit) {
                        *o = lift(x, &qj, &qi, qj_mod);
                    }
                    self.ntt_forward(i, &mut buf);
                    &buf
                };
                let kb = &rlk.b[j].limbs[i];
                let ka = &rlk.a[j].limbs[i];
                let (ab, aa) = (&mut acc_b[t], &mut acc_a[t]);
                for k in 0..n {
                    let x = d[k] as u128;
                    ab[k] += x * kb[k] as u128;
                    aa[k] += x * ka[k] as u128;
                }
                if flush {
                    for k in 0..n {
                        ab[k] = qi.reduce_u128(ab[k]) as u128;
                        aa[k] = qi.reduce_u128(aa[k]) as u128;
                    }
                }
            }
        }
        let reduce = |acc: Vec<Vec<u128>>| {
            RnsPoly::from_limbs(
                acc.into_iter()
                    .zip(&key_mod)
                    .map(|(v, q)| v.into_iter().map(|x| q.reduce_u128(x)).collect())
                    .collect(),
            )
        };
        let (acc_b, acc_a) = (reduce(acc_b), reduce(acc_a));
        Ok((self.mod_down(&acc_b, l), self.mod_down(&acc_a, l)))
    }

    /// Divides a polynomial over q_0..q_l, P by P, rounding.
    fn mod_down(&self, p: &RnsPoly, l: usize) -> RnsPoly {
        let sp = self.special_index();
        let pm = *self.modulus(sp);
        let mut last = p.limbs[l + 1].clone();
        self.ntt_inverse(sp, &mut last);
        let mut out = Vec::with_capacity(l + 1);
        for j in 0..=l {
            let qj = *self.modulus(j);
            let p_mod = qj.reduce(pm.value());
            let mut t: Vec<u64> = last.iter().map(|&x| lift(x, &pm, &qj, p_mod)).collect();
            self.ntt_forward(j, &mut t);
            let inv = self.p_inv_mod_q(j);
            let inv_s = qj.shoup(inv);
            out.push(
                p.limbs[j]
                    .iter()
                    .zip(&t)
                    .map(|(&c, &d)| qj.mul_shoup(qj.sub(c, d), inv, inv_s))
                    .collect(),
            );
        }
        RnsPoly::from_limbs(out)
    }

    /// Tensor product and relinearization, without rescaling.
    pub fn mul_relin(&self, a: &Ciphertext, b: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext, CkksError> {
        self.check_pair(a, b)?;
        let l = a.level;
        let moduli = self.q_moduli(l);
        let mut d0 = a.c0.mul(&b.c0, moduli);
        let mut d1 = a.c0.mul(&b.c1, moduli);
        d1.fma_assign(&a.c1, &b.c0, moduli);
        let d2 = a.c1.mul(&b.c1, moduli);
        let (kb, ka) = self.key_switch(&d2, l, rlk)?;
        d0.add_assign(&kb, moduli);
        d1.add_assign(&ka, moduli);
        let cross = noise_add(a.noise_bits + b.scale.log2(), b.noise_bits + a.scale.log2());
        let noise = noise_add(
            noise_add(cross, a.noise_bits + b.noise_bits),
            self.keyswitch_noise_bits(l, rlk.parties),
        );
        Ok(Ciphertext {
            c0: d0,
            c1: d1,
            level: l,
            scale: a.scale * b.scale,
            noise_bits: noise,
        })
    }

    /// Product followed by a rescale; consumes one level.
    pub fn mul(&self, a: &Ciphertext, b: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext, CkksError> {
        if a.level == 0 || b.level == 0 {
            return Err(CkksError::LevelExhausted("mul"));
        }
        self.rescale(&self.mul_relin(a, b, rlk)?)
    }

    pub fn square(&self, a: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext, CkksError> {
        self.mul(a, a, rlk)
    }

    /// Brings a ciphertext down to `target` at that level's canonical scale.
    pub fn level_down(&self, ct: &Ciphertext, target: usize) -> Result<Ciphertext, CkksError> {
        if target > ct.level {
            return Err(CkksError::InvalidLevel(target));
        }
        if target == ct.level {
            return Ok(ct.clone());
        }
        let mut c = ct.clone();
        c.c0.truncate(target + 2);
        c.c1.truncate(target + 2);
        c.level = target + 1;
        self.mul_const(&c, 1.0)
    }

    /// Evaluates Σ coeffs[k]·x^k slot-wise. Each monomial is a product of
    /// repeated squares of x with its coefficient folded into the lowest
    /// factor, so a degree-d polynomial costs ceil(log2(d+1)) levels.
    pub fn poly_eval(&self, ct: &Ciphertext, coeffs: &[f64], rlk: &RelinKey) -> Result<Ciphertext, CkksError> {
        let degree = coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0);
        let depth = poly_depth(degree);
        if ct.level < depth {
            return Err(CkksError::InsufficientLevels {
                needed: depth,
                available: ct.level,
            });
        }
        let c0 = coeffs.first().copied().unwrap_or(0.0);
        if degree == 0 {
            let zero = self.sub(ct, ct)?;
            return self.add_const(&zero, c0);
        }
        let l = ct.level;
        let final_level = l - depth;
        let top_bit = depth - 1;

        let mut powers = vec![ct.clone()];
        for i in 1..=top_bit {
            let sq = self.square(&powers[i - 1], rlk)?;
            powers.push(sq);
        }

        let mut acc: Option<Ciphertext> = None;
        for (k, &c) in coeffs.iter().enumerate().skip(1).take(degree) {
            if c == 0.0 {
                continue;
            }
            let bits: Vec<usize> = (0..=top_bit).filter(|&i| k >> i & 1 == 1).collect();
            let mut term = self.mul_const(&powers[bits[0]], c)?;
            for &i in &bits[1..] {
                term = self.level_down(&term, l - i)?;
                term = self.mul(&term, &powers[i], rlk)?;
            }
            term = self.level_down(&term, final_level)?;
            acc = Some(match acc {
                None => term,
                Some(a) => self.add(&a, &term)?,
            });
        }
        let acc = acc.expect("degree ≥ 1 has a non-zero term");
        if c0 != 0.0 {
            self.add_const(&acc, c0)
        } else {
            Ok(acc)
        }
    }
}
