//! Ring elements in RNS form: one residue vector per prime.

use super::modarith::Modulus;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RnsPoly {
    pub(crate) limbs: Vec<Vec<u64>>,
}

impl RnsPoly {
    pub fn zero(ring_dim: usize, num_limbs: usize) -> Self {
        Self {
            limbs: vec![vec![0u64; ring_dim]; num_limbs],
        }
    }

    pub fn from_limbs(limbs: Vec<Vec<u64>>) -> Self {
        Self { limbs }
    }

    pub fn num_limbs(&self) -> usize {
        self.limbs.len()
    }

    pub fn ring_dim(&self) -> usize {
        self.limbs.first().map_or(0, Vec::len)
    }

    pub fn limb(&self, i: usize) -> &[u64] {
        &self.limbs[i]
    }

    pub fn limbs(&self) -> &[Vec<u64>] {
        &self.limbs
    }

    pub fn truncate(&mut self, num_limbs: usize) {
        self.limbs.truncate(num_limbs);
    }

    /// Copy restricted to the given limb indices.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            limbs: idx.iter().map(|&i| self.limbs[i].clone()).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self, moduli: &[Modulus]) {
        for ((a, b), q) in self.limbs.iter_mut().zip(&other.limbs).zip(moduli) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = q.add(*x, y);
            }
        }
    }

    pub fn sub_assign(&mut self, other: &Self, moduli: &[Modulus]) {
        for ((a, b), q) in self.limbs.iter_mut().zip(&other.limbs).zip(moduli) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = q.sub(*x, y);
            }
        }
    }

    pub fn neg_assign(&mut self, moduli: &[Modulus]) {
        for (a, q) in self.limbs.iter_mut().zip(moduli) {
            for x in a.iter_mut() {
                *x = q.neg(*x);
            }
        }
    }

    /// Pointwise product; both operands in the NTT domain.
    pub fn mul_assign(&mut self, other: &Self, moduli: &[Modulus]) {
        for ((a, b), q) in self.limbs.iter_mut().zip(&other.limbs).zip(moduli) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = q.mul(*x, y);
            }
        }
    }

    pub fn mul(&self, other: &Self, moduli: &[Modulus]) -> Self {
        let mut out = self.clone();
        out.mul_assign(other, moduli);
        out
    }

    /// `self += a * b` pointwise.
    pub fn fma_assign(&mut self, a: &Self, b: &Self, moduli: &[Modulus]) {
        for (((acc, x), y), q) in self.limbs.iter_mut().zip(&a.limbs).zip(&b.limbs).zip(moduli) {
            for ((r, &u), &v) in acc.iter_mut().zip(x).zip(y) {
                *r = q.reduce_u128(u as u128 * v as u128 + *r as u128);
            }
        }
    }

    /// Multiplies limb `i` by the residue `scalars[i]`.
    pub fn mul_scalar_assign(&mut self, scalars: &[u64], moduli: &[Modulus]) {
        for ((a, &k), q) in self.limbs.iter_mut().zip(scalars).zip(moduli) {
            let ks = q.shoup(k);
            for x in a.iter_mut() {
                *x = q.mul_shoup(*x, k, ks);
            }
        }
    }

    /// Adds the residue `scalars[i]` to every entry of limb `i`. In the NTT
    /// domain this adds a constant polynomial.
    pub fn add_scalar_assign(&mut self, scalars: &[u64], moduli: &[Modulus]) {
        for ((a, &k), q) in self.limbs.iter_mut().zip(scalars).zip(moduli) {
            for x in a.iter_mut() {
                *x = q.add(*x, k);
            }
        }
    }
}
