//! Homomorphic division and comparison by polynomial approximation, with a
//! plaintext shadow of each circuit evaluated in `f64`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ckks::{poly_depth, Ciphertext, CkksContext, CkksError, RelinKey};
use crate::mhe::MheError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("level budget exhausted and no refresh available")]
    LevelExhausted,
    #[error(transparent)]
    Ckks(#[from] CkksError),
    #[error(transparent)]
    Mhe(#[from] MheError),
}

/// Hook to restore a ciphertext to the top level when a sub-step would
/// otherwise run out of levels.
pub trait Refresh {
    fn refresh(&mut self, ct: &Ciphertext) -> Result<Ciphertext, ApproxError>;
}

pub struct NoRefresh;

impl Refresh for NoRefresh {
    fn refresh(&mut self, _ct: &Ciphertext) -> Result<Ciphertext, ApproxError> {
        Err(ApproxError::LevelExhausted)
    }
}

fn ensure<F: Refresh + ?Sized>(ct: Ciphertext, depth: usize, refresh: &mut F) -> Result<Ciphertext, ApproxError> {
    if ct.level() >= depth {
        Ok(ct)
    } else {
        let fresh = refresh.refresh(&ct)?;
        if fresh.level() < depth {
            return Err(ApproxError::LevelExhausted);
        }
        Ok(fresh)
    }
}

// Division.

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivideConfig {
    pub iterations: usize,
    /// Public bounds on every divisor slot.
    pub input_range: (f64, f64),
}

impl Default for DivideConfig {
    fn default() -> Self {
        Self {
            iterations: 6,
            input_range: (1.0, 50.0),
        }
    }
}

impl DivideConfig {
    pub fn validate(&self) -> Result<(), ApproxError> {
        let (lo, hi) = self.input_range;
        if self.iterations == 0 {
            return Err(ApproxError::InvalidConfig("divide needs at least one iteration".into()));
        }
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(ApproxError::InvalidConfig(format!("bad divisor range [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// Linear minimax seed y0 = a - b·x for 1/x on the input range:
    /// equioscillation of 1 - x·y0 at both ends and at the vertex.
    pub fn seed(&self) -> (f64, f64) {
        let (m, big) = self.input_range;
        let b = 8.0 / (4.0 * m * big + (m + big).powi(2));
        (b * (m + big), b)
    }

    /// max |1 - x·y0| over the range.
    pub fn seed_error(&self) -> f64 {
        let (m, big) = self.input_range;
        (big - m).powi(2) / ((big + m).powi(2) + 4.0 * m * big)
    }

    pub fn depth(&self) -> usize {
        2 + self.iterations
    }

    /// Bound on the relative error of the shadow.
    pub fn error_bound(&self) -> f64 {
        self.seed_error().powi(1 << self.iterations.min(30))
    }

    /// Fewest iterations whose error bound on `range` is at most `tol`.
    pub fn for_range(range: (f64, f64), tol: f64) -> Self {
        let mut cfg = Self {
            iterations: 1,
            input_range: range,
        };
        while cfg.error_bound() > tol && cfg.iterations < 30 {
            cfg.iterations += 1;
        }
        cfg
    }
}

/// Plaintext shadow of [`divide`].
pub fn shadow_divide(num: f64, den: f64, cfg: &DivideConfig) -> f64 {
    let (a, b) = cfg.seed();
    let y0 = a - b * den;
    let mut x = num * y0;
    let mut r = 1.0 - den * y0;
    for i in 0..cfg.iterations {
        x *= 1.0 + r;
        if i + 1 < cfg.iterations {
            r *= r;
        }
    }
    x
}

/// Slot-wise num/den by Goldschmidt iteration. Consumes
/// [`DivideConfig::depth`] levels, calling `refresh` whenever a sub-step
/// would not fit.
pub fn divide<F: Refresh + ?Sized>(
    ctx: &CkksContext,
    num: &Ciphertext,
    den: &Ciphertext,
    cfg: &DivideConfig,
    rlk: &RelinKey,
    refresh: &mut F,
) -> Result<Ciphertext, ApproxError> {
    cfg.validate()?;
    let (a, b) = cfg.seed();
    let mut num = ensure(num.clone(), 2, refresh)?;
    let mut den = ensure(den.clone(), 2, refresh)?;
    let l = num.level().min(den.level());
    num = ctx.level_down(&num, l)?;
    den = ctx.level_down(&den, l)?;

    let y0 = ctx.add_const(&ctx.mul_const(&den, -b)?, a)?;
    let den1 = ctx.level_down(&den, l - 1)?;
    let num1 = ctx.level_down(&num, l - 1)?;
    let w = ctx.mul(&den1, &y0, rlk)?;
    let mut x = ctx.mul(&num1, &y0, rlk)?;
    let mut r = ctx.add_const(&ctx.neg(&w), 1.0)?;

    for i in 0..cfg.iterations {
        let last = i + 1 == cfg.iterations;
        if x.level() == 0 {
            x = ensure(x, 1, refresh)?;
            r = ensure(r, 1, refresh)?;
            let lv = x.level().min(r.level());
            x = ctx.level_down(&x, lv)?;
            r = ctx.level_down(&r, lv)?;
        }
        let one_plus_r = ctx.add_const(&r, 1.0)?;
        let next_x = ctx.mul(&x, &one_plus_r, rlk)?;
        if !last {
            r = ctx.square(&r, rlk)?;
        }
        x = next_x;
    }
    Ok(x)
}

// Comparison.

/// g(x) = (2126x - 1359x³)/1024: pushes values away from zero quickly.
pub const G3: [f64; 4] = [0.0, 2126.0 / 1024.0, 0.0, -1359.0 / 1024.0];
/// f_1(x) = (3x - x³)/2.
pub const F3: [f64; 4] = [0.0, 1.5, 0.0, -0.5];
/// f_2(x) = (15x - 10x³ + 3x⁵)/8.
pub const F5: [f64; 6] = [0.0, 15.0 / 8.0, 0.0, -10.0 / 8.0, 0.0, 3.0 / 8.0];
/// f_3(x) = (35x - 35x³ + 21x⁵ - 5x⁷)/16.
pub const F7: [f64; 8] = [0.0, 35.0 / 16.0, 0.0, -35.0 / 16.0, 0.0, 21.0 / 16.0, 0.0, -5.0 / 16.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub df: usize,
    pub dg: usize,
    pub f_degree: usize,
    pub g_degree: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            df: 3,
            dg: 3,
            f_degree: 7,
            g_degree: 3,
        }
    }
}

impl CompareConfig {
    pub fn validate(&self) -> Result<(), ApproxError> {
        if self.df == 0 || self.dg == 0 {
            return Err(ApproxError::InvalidConfig("df and dg must be at least 1".into()));
        }
        self.f_coeffs()?;
        self.g_coeffs()?;
        Ok(())
    }

    pub fn f_coeffs(&self) -> Result<&'static [f64], ApproxError> {
        match self.f_degree {
            3 => Ok(&F3),
            5 => Ok(&F5),
            7 => Ok(&F7),
            d => Err(ApproxError::InvalidConfig(format!("no f polynomial of degree {d}"))),
        }
    }

    pub fn g_coeffs(&self) -> Result<&'static [f64], ApproxError> {
        match self.g_degree {
            3 => Ok(&G3),
            d => Err(ApproxError::InvalidConfig(format!("no g polynomial of degree {d}"))),
        }
    }

    pub fn depth(&self) -> usize {
        self.dg * poly_depth(self.g_degree) + self.df * poly_depth(self.f_degree)
    }

    /// The sequence of polynomials applied, in order.
    fn stages(&self) -> Result<Vec<&'static [f64]>, ApproxError> {
        let g = self.g_coeffs()?;
        let f = self.f_coeffs()?;
        Ok(std::iter::repeat_n(g, self.dg)
            .chain(std::iter::repeat_n(f, self.df))
            .collect())
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Plaintext shadow of [`compare`] on a difference `x = a - b`.
pub fn shadow_sign(x: f64, cfg: &CompareConfig) -> f64 {
    cfg.stages()
        .expect("validated config")
        .into_iter()
        .fold(x, |v, p| horner(p, v))
}

pub fn shadow_compare(a: f64, b: f64, cfg: &CompareConfig) -> f64 {
    shadow_sign(a - b, cfg)
}

/// Right-hand side of a comparison.
#[derive(Debug, Clone, Copy)]
pub enum Threshold<'a> {
    Const(f64),
    Cipher(&'a Ciphertext),
}

/// Slot-wise approximation of sign(a - b) in [-1, 1] for a, b in [0, 1].
pub fn compare<F: Refresh + ?Sized>(
    ctx: &CkksContext,
    a: &Ciphertext,
    b: Threshold<'_>,
    cfg: &CompareConfig,
    rlk: &RelinKey,
    refresh: &mut F,
) -> Result<Ciphertext, ApproxError> {
    cfg.validate()?;
    let mut x = match b {
        Threshold::Const(t) => ctx.add_const(a, -t)?,
        Threshold::Cipher(c) => {
            let l = a.level().min(c.level());
            ctx.sub(&ctx.level_down(a, l)?, &ctx.level_down(c, l)?)?
        }
    };
    for p in cfg.stages()? {
        let degree = p.len() - 1;
        x = ensure(x, poly_depth(degree), refresh)?;
        x = ctx.poly_eval(&x, p, rlk)?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_family_is_odd_and_fixes_plus_minus_one() {
        for p in [&F3[..], &F5[..], &F7[..]] {
            assert!((horner(p, 1.0) - 1.0).abs() < 1e-15);
            assert!((horner(p, -1.0) + 1.0).abs() < 1e-15);
            assert_eq!(horner(p, 0.3), -horner(p, -0.3));
        }
    }

    #[test]
    fn seed_error_is_equioscillating() {
        let cfg = DivideConfig::default();
        let (a, b) = cfg.seed();
        let e = |x: f64| 1.0 - x * (a - b * x);
        let (m, big) = cfg.input_range;
        let vertex = a / (2.0 * b);
        assert!((e(m) - cfg.seed_error()).abs() < 1e-12);
        assert!((e(big) - cfg.seed_error()).abs() < 1e-12);
        assert!((e(vertex) + cfg.seed_error()).abs() < 1e-12);
    }

    #[test]
    fn depths() {
        assert_eq!(DivideConfig::default().depth(), 8);
        assert_eq!(CompareConfig::default().depth(), 15);
    }
}
