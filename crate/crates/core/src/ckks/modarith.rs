//! Word-sized modular arithmetic for the RNS limbs.
//!
//! Every modulus is an odd prime below 2^62, so sums of two residues never
//! overflow a `u64` and Barrett reduction of a 128-bit product needs a single
//! correction step.

/// An NTT-friendly prime together with its Barrett constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Modulus {
    value: u64,
    /// floor(2^128 / value), stored as (low word, high word).
    ratio: [u64; 2],
}

impl Modulus {
    pub fn new(value: u64) -> Self {
        assert!(value > 2 && value < (1u64 << 62), "modulus out of range: {value}");
        // floor(2^128 / q) = floor((2^128 - 1) / q) unless q divides 2^128,
        // which an odd q > 1 never does.
        let r = u128::MAX / value as u128;
        Self {
            value,
            ratio: [r as u64, (r >> 64) as u64],
        }
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    #[inline]
    pub fn bits(&self) -> f64 {
        (self.value as f64).log2()
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        // Branch-free: when s < q the subtraction wraps above s.
        let s = a + b;
        s.min(s.wrapping_sub(self.value))
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        let d = a.wrapping_sub(b);
        d.min(d.wrapping_add(self.value))
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    /// Barrett reduction of a full 128-bit value.
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let lo = x as u64;
        let hi = (x >> 64) as u64;
        let [r0, r1] = self.ratio;

        let carry = ((lo as u128 * r0 as u128) >> 64) as u64;
        let t = lo as u128 * r1 as u128;
        let (tmp1, c1) = (t as u64).overflowing_add(carry);
        let tmp3 = ((t >> 64) as u64).wrapping_add(c1 as u64);

        let t = hi as u128 * r0 as u128;
        let (_, c2) = tmp1.overflowing_add(t as u64);
        let carry = ((t >> 64) as u64).wrapping_add(c2 as u64);

        let q = hi.wrapping_mul(r1).wrapping_add(tmp3).wrapping_add(carry);
        let r = lo.wrapping_sub(q.wrapping_mul(self.value));
        r.min(r.wrapping_sub(self.value))
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        // Barrett on the low word alone: q_hat = floor(x · ratio / 2^128).
        let q = ((x as u128 * self.ratio[1] as u128) + ((x as u128 * self.ratio[0] as u128) >> 64)) >> 64;
        let r = x.wrapping_sub((q as u64).wrapping_mul(self.value));
        r.min(r.wrapping_sub(self.value))
    }

    /// Reduces a signed integer into `[0, q)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        if x >= 0 {
            self.reduce(x as u64)
        } else {
            self.neg(self.reduce(x.unsigned_abs()))
        }
    }

    #[inline]
    pub fn reduce_i128(&self, x: i128) -> u64 {
        if x >= 0 {
            self.reduce_u128(x as u128)
        } else {
            self.neg(self.reduce_u128(x.unsigned_abs()))
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    /// Precomputes floor(w * 2^64 / q) for repeated multiplication by `w`.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.value as u128) as u64
    }

    /// `a * w mod q` given `w_shoup = self.shoup(w)`.
    #[inline]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let q = ((a as u128 * w_shoup as u128) >> 64) as u64;
        let r = a.wrapping_mul(w).wrapping_sub(q.wrapping_mul(self.value));
        r.min(r.wrapping_sub(self.value))
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64;
        base = self.reduce(base);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse by Fermat's little theorem; `a` must be non-zero mod q.
    pub fn inv(&self, a: u64) -> u64 {
        let a = self.reduce(a);
        assert!(a != 0, "zero has no inverse");
        self.pow(a, self.value - 2)
    }

    /// Maps a residue to its centered representative in `(-q/2, q/2]`.
    #[inline]
    pub fn center(&self, a: u64) -> i64 {
        if a > self.value / 2 {
            a as i64 - self.value as i64
        } else {
            a as i64
        }
    }
}

fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

fn pow_mod_u64(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_u64(acc, base, m);
        }
        base = mul_mod_u64(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in SMALL {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in SMALL {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Finds the prime `p ≡ 1 (mod 2n)` closest to `target`, skipping any in
/// `exclude`. Searches outward in steps of `2n`.
pub fn closest_ntt_prime(target: f64, ring_dim: usize, exclude: &[u64]) -> Option<u64> {
    let step = 2 * ring_dim as u64;
    let base = ((target / step as f64).round() as u64).max(1);
    for k in 0..(1u64 << 24) {
        let mut candidates = [None, None];
        candidates[0] = base.checked_add(k).map(|m| m * step + 1);
        if k > 0 && k < base {
            candidates[1] = Some((base - k) * step + 1);
        }
        // Order the two candidates by distance to the target.
        let mut found: Vec<u64> = candidates
            .into_iter()
            .flatten()
            .filter(|&p| p < (1u64 << 62) && !exclude.contains(&p) && is_prime(p))
            .collect();
        found.sort_by(|a, b| {
            let da = (*a as f64 - target).abs();
            let db = (*b as f64 - target).abs();
            da.partial_cmp(&db).unwrap()
        });
        if let Some(&p) = found.first() {
            return Some(p);
        }
    }
    None
}

/// Finds a primitive `2n`-th root of unity modulo the prime `q`.
pub fn primitive_root_2n(q: &Modulus, ring_dim: usize) -> u64 {
    let order = 2 * ring_dim as u64;
    assert_eq!((q.value() - 1) % order, 0, "modulus is not NTT-friendly");
    let cofactor = (q.value() - 1) / order;
    for g in 2u64.. {
        let psi = q.pow(g, cofactor);
        // psi has order dividing 2n; it is primitive iff psi^n = -1.
        if q.pow(psi, ring_dim as u64) == q.value() - 1 {
            return psi;
        }
    }
    unreachable!()
}
