//! N-of-N multiparty extension: additive secret shares, collective key
//! generation from a common reference string, distributed decryption with
//! smudging noise, and distributed refresh of exhausted ciphertexts.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::ckks::sampling::{gaussian, uniform_centered, uniform_poly};
use crate::ckks::{
    gadget_times, put_poly, put_u32, Ciphertext, CkksContext, CkksError, Plaintext, PublicKey,
    Reader, RelinKey, RnsPoly, SecretKey, FORMAT_VERSION,
};

pub const POLY_MSG_MAGIC: &[u8; 4] = b"HPPM";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MheError {
    #[error("missing contributions: expected {expected} parties, got {got}")]
    MissingShare { expected: usize, got: usize },
    #[error("duplicate contribution from party {0}")]
    DuplicateShare(usize),
    #[error("contribution from unknown party {0}")]
    UnknownParty(usize),
    #[error("share was computed for a different ciphertext level")]
    LevelMismatch,
    #[error(transparent)]
    Ckks(#[from] CkksError),
}

/// Checks that `ids` is exactly {0, .., parties-1}.
fn check_parties(ids: impl IntoIterator<Item = usize>, parties: usize) -> Result<(), MheError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if id >= parties {
            return Err(MheError::UnknownParty(id));
        }
        if !seen.insert(id) {
            return Err(MheError::DuplicateShare(id));
        }
    }
    if seen.len() != parties {
        return Err(MheError::MissingShare {
            expected: parties,
            got: seen.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecretKeyShare {
    pub party_id: usize,
    pub(crate) sk: SecretKey,
}

impl SecretKeyShare {
    pub fn key(&self) -> &SecretKey {
        &self.sk
    }
}

pub fn sec_key_gen<R: Rng + ?Sized>(ctx: &CkksContext, party_id: usize, rng: &mut R) -> SecretKeyShare {
    SecretKeyShare {
        party_id,
        sk: SecretKey::generate(ctx, rng),
    }
}

/// Sum of all shares. Only for tests and oracles: no party ever holds this.
pub fn reconstruct_secret(ctx: &CkksContext, shares: &[SecretKeyShare]) -> SecretKey {
    let mut coeffs = vec![0i64; ctx.ring_dim()];
    for s in shares {
        for (c, &x) in coeffs.iter_mut().zip(s.sk.coeffs()) {
            *c += x;
        }
    }
    SecretKey::from_coeffs(ctx, coeffs)
}

/// Public randomness expanded from a session seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommonReference {
    pub seed: u64,
}

impl CommonReference {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn stream(&self, id: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }

    pub fn pk_a(&self, ctx: &CkksContext) -> RnsPoly {
        uniform_poly(ctx.ring_dim(), ctx.q_moduli(ctx.max_level()), &mut self.stream(0))
    }

    pub fn rlk_a(&self, ctx: &CkksContext, digit: usize) -> RnsPoly {
        uniform_poly(ctx.ring_dim(), ctx.key_moduli(), &mut self.stream(1 + digit as u64))
    }
}

/// A party's message: one or more ring elements.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMessage {
    pub party_id: usize,
    pub polys: Vec<RnsPoly>,
}

impl PolyMessage {
    /// magic, version, ring_dim, count, then per polynomial its limb count
    /// followed by the little-endian residues.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(POLY_MSG_MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        put_u32(&mut out, self.polys.first().map_or(0, RnsPoly::ring_dim) as u32);
        put_u32(&mut out, self.polys.len() as u32);
        for p in &self.polys {
            put_u32(&mut out, p.num_limbs() as u32);
            put_poly(&mut out, p);
        }
        out
    }

    pub fn serialized_len(&self) -> usize {
        16 + self
            .polys
            .iter()
            .map(|p| 4 + p.num_limbs() * p.ring_dim() * 8)
            .sum::<usize>()
    }

    /// Parses a message whose polynomials live over the ciphertext primes
    /// q_0 .. q_{limbs-1}.
    pub fn from_bytes(ctx: &CkksContext, party_id: usize, bytes: &[u8]) -> Result<Self, CkksError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != POLY_MSG_MAGIC {
            return Err(CkksError::Serialization("bad magic".into()));
        }
        if r.u32()? != FORMAT_VERSION {
            return Err(CkksError::Serialization("unsupported version".into()));
        }
        if r.u32()? as usize != ctx.ring_dim() {
            return Err(CkksError::Serialization("ring dimension mismatch".into()));
        }
        let count = r.u32()? as usize;
        let mut polys = Vec::with_capacity(count);
        for _ in 0..count {
            let limbs = r.u32()? as usize;
            if limbs == 0 || limbs > ctx.max_level() + 1 {
                return Err(CkksError::Serialization("bad limb count".into()));
            }
            polys.push(r.poly(ctx, limbs - 1)?);
        }
        r.finish()?;
        Ok(Self { party_id, polys })
    }
}

// Collective public key: pk = (Σ(-a·s_i + e_i), a).

pub fn pk_share<R: Rng + ?Sized>(
    ctx: &CkksContext,
    share: &SecretKeyShare,
    crs: &CommonReference,
    rng: &mut R,
) -> PolyMessage {
    let top = ctx.max_level();
    let idx: Vec<usize> = (0..=top).collect();
    let moduli = ctx.q_moduli(top);
    let a = crs.pk_a(ctx);
    let mut h = a.mul(&share.sk.poly_at(&idx), moduli);
    h.neg_assign(moduli);
    h.add_assign(
        &ctx.poly_from_signed(&gaussian(ctx.ring_dim(), ctx.params().sigma, rng), &idx),
        moduli,
    );
    PolyMessage {
        party_id: share.party_id,
        polys: vec![h],
    }
}

pub fn aggregate_pk(
    ctx: &CkksContext,
    crs: &CommonReference,
    shares: &[PolyMessage],
    parties: usize,
) -> Result<PublicKey, MheError> {
    check_parties(shares.iter().map(|s| s.party_id), parties)?;
    let moduli = ctx.q_moduli(ctx.max_level());
    let mut b = RnsPoly::zero(ctx.ring_dim(), moduli.len());
    for s in shares {
        b.add_assign(&s.polys[0], moduli);
    }
    Ok(PublicKey::from_parts(b, crs.pk_a(ctx), parties))
}

// Collective relinearization key, two rounds. Each party holds an ephemeral
// ternary u_i. With a_j from the CRS and w_j = P·g_j:
//   round 1: h0_ij = -u_i·a_j + s_i·w_j + e,  h1_ij = s_i·a_j + e
//   round 2: h0'_ij = s_i·h0_j + e,           h1'_ij = (u_i - s_i)·h1_j + e
// and rlk_j = (Σ h0'_ij + Σ h1'_ij, h1_j), where h0_j, h1_j are round-1 sums.
// Round-1 messages carry digits interleaved as [h0_0, h1_0, h0_1, h1_1, ..].

#[derive(Debug, Clone)]
pub struct RlkEphemeral {
    party_id: usize,
    u: SecretKey,
}

fn key_error<R: Rng + ?Sized>(ctx: &CkksContext, rng: &mut R) -> RnsPoly {
    let idx: Vec<usize> = (0..ctx.key_moduli().len()).collect();
    ctx.poly_from_signed(&gaussian(ctx.ring_dim(), ctx.params().sigma, rng), &idx)
}

/// Wire form for key-level polynomials (over q_0 .. q_L and P).
#[derive(Debug, Clone, PartialEq)]
pub struct KeyMessage {
    pub party_id: usize,
    pub polys: Vec<RnsPoly>,
}

impl KeyMessage {
    pub fn serialized_len(&self) -> usize {
        PolyMessage {
            party_id: self.party_id,
            polys: self.polys.clone(),
        }
        .serialized_len()
    }
}

pub fn rlk_round1<R: Rng + ?Sized>(
    ctx: &CkksContext,
    share: &SecretKeyShare,
    crs: &CommonReference,
    rng: &mut R,
) -> (RlkEphemeral, KeyMessage) {
    let moduli = ctx.key_moduli();
    let u = SecretKey::generate(ctx, rng);
    let s = &share.sk.poly;
    let mut polys = Vec::with_capacity(2 * (ctx.max_level() + 1));
    for j in 0..=ctx.max_level() {
        let a = crs.rlk_a(ctx, j);
        let mut h0 = a.mul(&u.poly, moduli);
        h0.neg_assign(moduli);
        h0.add_assign(&gadget_times(ctx, j, s), moduli);
        h0.add_assign(&key_error(ctx, rng), moduli);
        let mut h1 = a.mul(s, moduli);
        h1.add_assign(&key_error(ctx, rng), moduli);
        polys.push(h0);
        polys.push(h1);
    }
    (
        RlkEphemeral {
            party_id: share.party_id,
            u,
        },
        KeyMessage {
            party_id: share.party_id,
            polys,
        },
    )
}

/// Sum of round-1 contributions, interleaved like the messages.
pub fn aggregate_key_messages(
    ctx: &CkksContext,
    msgs: &[KeyMessage],
    parties: usize,
) -> Result<Vec<RnsPoly>, MheError> {
    check_parties(msgs.iter().map(|m| m.party_id), parties)?;
    let moduli = ctx.key_moduli();
    let mut acc = msgs[0].polys.clone();
    for m in &msgs[1..] {
        for (a, p) in acc.iter_mut().zip(&m.polys) {
            a.add_assign(p, moduli);
        }
    }
    Ok(acc)
}

pub fn rlk_round2<R: Rng + ?Sized>(
    ctx: &CkksContext,
    share: &SecretKeyShare,
    eph: &RlkEphemeral,
    round1: &[RnsPoly],
    rng: &mut R,
) -> KeyMessage {
    debug_assert_eq!(eph.party_id, share.party_id);
    let moduli = ctx.key_moduli();
    let s = &share.sk.poly;
    let mut u_minus_s = eph.u.poly.clone();
    u_minus_s.sub_assign(s, moduli);
    let mut polys = Vec::with_capacity(round1.len() / 2);
    for pair in round1.chunks(2) {
        let mut h = pair[0].mul(s, moduli);
        h.fma_assign(&pair[1], &u_minus_s, moduli);
        h.add_assign(&key_error(ctx, rng), moduli);
        h.add_assign(&key_error(ctx, rng), moduli);
        polys.push(h);
    }
    KeyMessage {
        party_id: share.party_id,
        polys,
    }
}

pub fn aggregate_rlk(
    ctx: &CkksContext,
    round1: &[RnsPoly],
    round2: &[KeyMessage],
    parties: usize,
) -> Result<RelinKey, MheError> {
    let b = aggregate_key_messages(ctx, round2, parties)?;
    let a = round1.chunks(2).map(|pair| pair[1].clone()).collect();
    Ok(RelinKey::from_parts(b, a, parties))
}

/// Runs the whole key generation in-process.
pub fn d_key_gen<R: Rng + ?Sized>(
    ctx: &CkksContext,
    shares: &[SecretKeyShare],
    crs: &CommonReference,
    rng: &mut R,
) -> Result<(PublicKey, RelinKey), MheError> {
    let parties = shares.len();
    let pk_msgs: Vec<PolyMessage> = shares.iter().map(|s| pk_share(ctx, s, crs, rng)).collect();
    let pk = aggregate_pk(ctx, crs, &pk_msgs, parties)?;
    let (ephs, r1): (Vec<_>, Vec<_>) = shares.iter().map(|s| rlk_round1(ctx, s, crs, rng)).unzip();
    let agg1 = aggregate_key_messages(ctx, &r1, parties)?;
    let r2: Vec<KeyMessage> = shares
        .iter()
        .zip(&ephs)
        .map(|(s, e)| rlk_round2(ctx, s, e, &agg1, rng))
        .collect();
    let rlk = aggregate_rlk(ctx, &agg1, &r2, parties)?;
    Ok((pk, rlk))
}

// Distributed decryption.

/// Smudging bits for a decryption share of `ct`.
pub fn smudging_bits(ctx: &CkksContext, ct: &Ciphertext) -> f64 {
    ct.noise_bits().max(0.0) + ctx.params().smudging_margin_bits
}

/// h_i = c1·s_i + e_smudge over the ciphertext's primes.
pub fn partial_decrypt<R: Rng + ?Sized>(
    ctx: &CkksContext,
    share: &SecretKeyShare,
    ct: &Ciphertext,
    rng: &mut R,
) -> PolyMessage {
    let level = ct.level();
    let idx: Vec<usize> = (0..=level).collect();
    let moduli = ctx.q_moduli(level);
    let mut h = ct.c1().mul(&share.sk.poly_at(&idx), moduli);
    let bound = smudging_bits(ctx, ct).min(100.0).exp2() as i128;
    let e = uniform_centered(ctx.ring_dim(), bound, rng);
    h.add_assign(&ctx.poly_from_i128(&e, &idx), moduli);
    PolyMessage {
        party_id: share.party_id,
        polys: vec![h],
    }
}

/// c0 + Σ h_i, requiring exactly one share from each of the parties.
pub fn combine_decryption(
    ctx: &CkksContext,
    ct: &Ciphertext,
    shares: &[PolyMessage],
    parties: usize,
) -> Result<Plaintext, MheError> {
    check_parties(shares.iter().map(|s| s.party_id), parties)?;
    let level = ct.level();
    let moduli = ctx.q_moduli(level);
    let mut m = ct.c0().clone();
    for s in shares {
        if s.polys.len() != 1 || s.polys[0].num_limbs() != level + 1 {
            return Err(MheError::LevelMismatch);
        }
        m.add_assign(&s.polys[0], moduli);
    }
    Ok(Plaintext::from_parts(m, level, ct.scale()))
}

/// Collective decryption with every party's share; fails unless all
/// `parties` shares are present.
pub fn d_decrypt<R: Rng + ?Sized>(
    ctx: &CkksContext,
    ct: &Ciphertext,
    shares: &[SecretKeyShare],
    parties: usize,
    rng: &mut R,
) -> Result<Vec<f64>, MheError> {
    check_parties(shares.iter().map(|s| s.party_id), parties)?;
    let msgs: Vec<PolyMessage> = shares.iter().map(|s| partial_decrypt(ctx, s, ct, rng)).collect();
    let pt = combine_decryption(ctx, ct, &msgs, parties)?;
    Ok(ctx.decode(&pt))
}

// Distributed refresh. Each party encrypts a uniform integer mask M_i at the
// ciphertext's level and the mask scaled by Δ_L/Δ_l at the top level. The
// server adds the low masks, the parties jointly open the masked
// polynomial, the server rescales it to the top-level scale, loads it as a
// noiseless ciphertext and subtracts the top-level masks.

const RATIO_SHIFT: u32 = 62;

/// Δ_L / Δ_l as a fixed-point integer with 62 fractional bits.
pub fn refresh_ratio(ctx: &CkksContext, level: usize) -> u64 {
    let r = ctx.level_scale(ctx.max_level()) / ctx.level_scale(level);
    (r * (1u64 << RATIO_SHIFT) as f64).round() as u64
}

/// round(x · r / 2^62), exact for |x| < 2^120.
pub fn mul_ratio(x: i128, r: u64) -> i128 {
    let mag = x.unsigned_abs();
    let hi = (mag >> 64) as u64 as u128;
    let lo = mag as u64 as u128;
    let low = (lo * r as u128 + (1u128 << (RATIO_SHIFT - 1))) >> RATIO_SHIFT;
    let out = ((hi * r as u128) << (64 - RATIO_SHIFT)) + low;
    if x < 0 {
        -(out as i128)
    } else {
        out as i128
    }
}

/// log2 of the per-party mask bound at `level`. The masked polynomial must
/// stay recoverable from the two lowest primes.
pub fn mask_bits(ctx: &CkksContext, level: usize, parties: usize) -> f64 {
    let cap = ctx.log_q(level.min(1));
    cap - 3.0 - (parties.max(1) as f64).log2().ceil()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefreshMasks {
    pub party_id: usize,
    pub low: Ciphertext,
    pub high: Ciphertext,
}

pub fn refresh_masks<R: Rng + ?Sized>(
    ctx: &CkksContext,
    pk: &PublicKey,
    party_id: usize,
    level: usize,
    rng: &mut R,
) -> Result<RefreshMasks, MheError> {
    let top = ctx.max_level();
    let bound = mask_bits(ctx, level, pk.parties()).floor().exp2() as i128;
    let mask = uniform_centered(ctx.ring_dim(), bound, rng);
    let r = refresh_ratio(ctx, level);
    let scaled: Vec<i128> = mask.iter().map(|&m| mul_ratio(m, r)).collect();
    let low_pt = Plaintext::from_parts(
        ctx.poly_from_i128(&mask, &(0..=level).collect::<Vec<_>>()),
        level,
        ctx.level_scale(level),
    );
    let high_pt = Plaintext::from_parts(
        ctx.poly_from_i128(&scaled, &(0..=top).collect::<Vec<_>>()),
        top,
        ctx.level_scale(top),
    );
    Ok(RefreshMasks {
        party_id,
        low: ctx.encrypt(pk, &low_pt, rng)?,
        high: ctx.encrypt(pk, &high_pt, rng)?,
    })
}

/// ct + Σ Enc_l(M_i), the ciphertext the parties jointly open.
pub fn apply_masks(
    ctx: &CkksContext,
    ct: &Ciphertext,
    masks: &[RefreshMasks],
    parties: usize,
) -> Result<Ciphertext, MheError> {
    check_parties(masks.iter().map(|m| m.party_id), parties)?;
    let moduli = ctx.q_moduli(ct.level());
    let mut c0 = ct.c0().clone();
    let mut c1 = ct.c1().clone();
    for m in masks {
        if m.low.level() != ct.level() {
            return Err(MheError::LevelMismatch);
        }
        c0.add_assign(m.low.c0(), moduli);
        c1.add_assign(m.low.c1(), moduli);
    }
    let noise = masks
        .iter()
        .fold(ct.noise_bits(), |acc, m| crate::ckks::noise_add(acc, m.low.noise_bits()));
    Ok(Ciphertext::from_parts(c0, c1, ct.level(), ct.scale(), noise))
}

/// Completes the refresh from the opened masked plaintext.
pub fn finish_refresh(
    ctx: &CkksContext,
    opened: &Plaintext,
    masks: &[RefreshMasks],
    parties: usize,
) -> Result<Ciphertext, MheError> {
    check_parties(masks.iter().map(|m| m.party_id), parties)?;
    let top = ctx.max_level();
    let r = refresh_ratio(ctx, opened.level());
    let coeffs: Vec<i128> = ctx
        .reconstruct_centered(opened.poly(), opened.level())
        .into_iter()
        .map(|x| mul_ratio(x, r))
        .collect();
    let idx: Vec<usize> = (0..=top).collect();
    let moduli = ctx.q_moduli(top);
    let mut c0 = ctx.poly_from_i128(&coeffs, &idx);
    let mut c1 = RnsPoly::zero(ctx.ring_dim(), top + 1);
    for m in masks {
        c0.sub_assign(m.high.c0(), moduli);
        c1.sub_assign(m.high.c1(), moduli);
    }
    Ok(Ciphertext::from_parts(
        c0,
        c1,
        top,
        ctx.level_scale(top),
        ctx.fresh_noise_bits(parties),
    ))
}

/// Distributed bootstrapping run in-process: returns an encryption of the
/// same slots at the top level.
pub fn d_bootstrap<R: Rng + ?Sized>(
    ctx: &CkksContext,
    pk: &PublicKey,
    ct: &Ciphertext,
    shares: &[SecretKeyShare],
    rng: &mut R,
) -> Result<Ciphertext, MheError> {
    let parties = pk.parties();
    check_parties(shares.iter().map(|s| s.party_id), parties)?;
    let masks = shares
        .iter()
        .map(|s| refresh_masks(ctx, pk, s.party_id, ct.level(), rng))
        .collect::<Result<Vec<_>, _>>()?;
    let masked = apply_masks(ctx, ct, &masks, parties)?;
    let dec: Vec<PolyMessage> = shares
        .iter()
        .map(|s| partial_decrypt(ctx, s, &masked, rng))
        .collect();
    let opened = combine_decryption(ctx, &masked, &dec, parties)?;
    finish_refresh(ctx, &opened, &masks, parties)
}
