use rand::Rng;

use super::context::CkksContext;
use super::poly::RnsPoly;
use super::sampling::{gaussian, ternary_hw, uniform_poly};

/// Secret polynomial, held both as signed coefficients and in the NTT domain
/// over every prime of the chain plus P.
#[derive(Debug, Clone, PartialEq)]
pub struct SecretKey {
    pub(crate) coeffs: Vec<i64>,
    pub(crate) poly: RnsPoly,
}

impl SecretKey {
    pub fn generate<R: Rng + ?Sized>(ctx: &CkksContext, rng: &mut R) -> Self {
        let p = ctx.params();
        let coeffs = ternary_hw(p.ring_dim, p.hamming_weight, rng);
        Self::from_coeffs(ctx, coeffs)
    }

    pub fn from_coeffs(ctx: &CkksContext, coeffs: Vec<i64>) -> Self {
        let idx: Vec<usize> = (0..ctx.key_moduli().len()).collect();
        let poly = ctx.poly_from_signed(&coeffs, &idx);
        Self { coeffs, poly }
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    /// NTT-domain form restricted to the given limb indices.
    pub fn poly_at(&self, idx: &[usize]) -> RnsPoly {
        self.poly.select(idx)
    }
}

/// RLWE encryption of zero: b = -a·s + e over q_0 .. q_L.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicKey {
    pub(crate) b: RnsPoly,
    pub(crate) a: RnsPoly,
    /// Number of secret shares summed into the key; drives noise estimates.
    pub(crate) parties: usize,
}

impl PublicKey {
    pub fn generate<R: Rng + ?Sized>(ctx: &CkksContext, sk: &SecretKey, rng: &mut R) -> Self {
        let top = ctx.max_level();
        let moduli = ctx.q_moduli(top);
        let idx: Vec<usize> = (0..=top).collect();
        let a = uniform_poly(ctx.ring_dim(), moduli, rng);
        let e = ctx.poly_from_signed(&gaussian(ctx.ring_dim(), ctx.params().sigma, rng), &idx);
        let mut b = a.mul(&sk.poly_at(&idx), moduli);
        b.neg_assign(moduli);
        b.add_assign(&e, moduli);
        Self { b, a, parties: 1 }
    }

    pub fn from_parts(b: RnsPoly, a: RnsPoly, parties: usize) -> Self {
        Self { b, a, parties }
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn b(&self) -> &RnsPoly {
        &self.b
    }

    pub fn a(&self) -> &RnsPoly {
        &self.a
    }
}

/// Key-switching key from s² to s with one digit per chain prime. Digit `j`
/// is (b_j, a_j) over q_0 .. q_L and P with b_j + a_j·s = P·g_j·s² + e_j,
/// where g_j is 1 modulo q_j and 0 modulo every other chain prime.
#[derive(Debug, Clone, PartialEq)]
pub struct RelinKey {
    pub(crate) b: Vec<RnsPoly>,
    pub(crate) a: Vec<RnsPoly>,
    pub(crate) parties: usize,
}

impl RelinKey {
    pub fn generate<R: Rng + ?Sized>(ctx: &CkksContext, sk: &SecretKey, rng: &mut R) -> Self {
        let moduli = ctx.key_moduli();
        let n = ctx.ring_dim();
        let idx: Vec<usize> = (0..moduli.len()).collect();
        let s2 = sk.poly.mul(&sk.poly, moduli);
        let mut bs = Vec::new();
        let mut as_ = Vec::new();
        for j in 0..=ctx.max_level() {
            let a = uniform_poly(n, moduli, rng);
            let e = ctx.poly_from_signed(&gaussian(n, ctx.params().sigma, rng), &idx);
            let mut b = a.mul(&sk.poly, moduli);
            b.neg_assign(moduli);
            b.add_assign(&e, moduli);
            b.add_assign(&gadget_times(ctx, j, &s2), moduli);
            bs.push(b);
            as_.push(a);
        }
        Self {
            b: bs,
            a: as_,
            parties: 1,
        }
    }

    pub fn from_parts(b: Vec<RnsPoly>, a: Vec<RnsPoly>, parties: usize) -> Self {
        Self { b, a, parties }
    }

    pub fn digits(&self) -> usize {
        self.b.len()
    }

    pub fn parties(&self) -> usize {
        self.parties
    }
}

/// P·g_j·x for a key polynomial x: only limb j survives, scaled by P mod q_j.
pub fn gadget_times(ctx: &CkksContext, digit: usize, x: &RnsPoly) -> RnsPoly {
    let n = ctx.ring_dim();
    let mut out = RnsPoly::zero(n, x.num_limbs());
    let q = ctx.modulus(digit);
    let k = ctx.p_mod_q(digit);
    let ks = q.shoup(k);
    for (o, &v) in out.limbs[digit].iter_mut().zip(&x.limbs[digit]) {
        *o = q.mul_shoup(v, k, ks);
    }
    out
}
