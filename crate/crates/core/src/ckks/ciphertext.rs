use super::context::CkksContext;
use super::poly::RnsPoly;
use super::CkksError;

pub const CT_MAGIC: &[u8; 4] = b"HPCT";
pub const FORMAT_VERSION: u32 = 1;
/// magic, version, ring_dim, level (u32 each), scale, noise_bits (f64 each).
pub const CT_HEADER_LEN: usize = 32;

/// Encoded message at some level, in the NTT domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Plaintext {
    pub(crate) poly: RnsPoly,
    pub(crate) level: usize,
    pub(crate) scale: f64,
}

impl Plaintext {
    pub fn from_parts(poly: RnsPoly, level: usize, scale: f64) -> Self {
        Self { poly, level, scale }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn poly(&self) -> &RnsPoly {
        &self.poly
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ciphertext {
    pub(crate) c0: RnsPoly,
    pub(crate) c1: RnsPoly,
    pub(crate) level: usize,
    pub(crate) scale: f64,
    pub(crate) noise_bits: f64,
}

/// Exact byte length of a serialized ciphertext.
pub fn ciphertext_size(ring_dim: usize, level: usize) -> usize {
    CT_HEADER_LEN + 2 * (level + 1) * ring_dim * 8
}

pub(crate) fn put_u32(out: &mut Vec<u8>, x: u32) {
    out.extend_from_slice(&x.to_le_bytes());
}

pub(crate) fn put_poly(out: &mut Vec<u8>, p: &RnsPoly) {
    for limb in p.limbs() {
        for &x in limb {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], CkksError> {
        if self.pos + n > self.buf.len() {
            return Err(CkksError::Serialization("truncated input".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32, CkksError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64, CkksError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn poly(&mut self, ctx: &CkksContext, level: usize) -> Result<RnsPoly, CkksError> {
        let n = ctx.ring_dim();
        let mut limbs = Vec::with_capacity(level + 1);
        for q in ctx.q_moduli(level) {
            let raw = self.take(n * 8)?;
            let limb: Vec<u64> = raw
                .chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if limb.iter().any(|&x| x >= q.value()) {
                return Err(CkksError::Serialization("residue out of range".into()));
            }
            limbs.push(limb);
        }
        Ok(RnsPoly::from_limbs(limbs))
    }

    pub(crate) fn finish(&self) -> Result<(), CkksError> {
        if self.pos != self.buf.len() {
            return Err(CkksError::Serialization("trailing bytes".into()));
        }
        Ok(())
    }
}

impl Ciphertext {
    pub fn from_parts(c0: RnsPoly, c1: RnsPoly, level: usize, scale: f64, noise_bits: f64) -> Self {
        Self {
            c0,
            c1,
            level,
            scale,
            noise_bits,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn noise_bits(&self) -> f64 {
        self.noise_bits
    }

    pub fn ring_dim(&self) -> usize {
        self.c0.ring_dim()
    }

    pub fn c0(&self) -> &RnsPoly {
        &self.c0
    }

    pub fn c1(&self) -> &RnsPoly {
        &self.c1
    }

    pub fn serialized_len(&self) -> usize {
        ciphertext_size(self.ring_dim(), self.level)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(CT_MAGIC);
        put_u32(&mut out, FORMAT_VERSION);
        put_u32(&mut out, self.ring_dim() as u32);
        put_u32(&mut out, self.level as u32);
        out.extend_from_slice(&self.scale.to_le_bytes());
        out.extend_from_slice(&self.noise_bits.to_le_bytes());
        put_poly(&mut out, &self.c0);
        put_poly(&mut out, &self.c1);
        out
    }

    pub fn from_bytes(ctx: &CkksContext, bytes: &[u8]) -> Result<Self, CkksError> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != CT_MAGIC {
            return Err(CkksError::Serialization("bad magic".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CkksError::Serialization(format!("unsupported version {version}")));
        }
        let n = r.u32()? as usize;
        if n != ctx.ring_dim() {
            return Err(CkksError::Serialization(format!(
                "ring dimension {n} does not match context {}",
                ctx.ring_dim()
            )));
        }
        let level = r.u32()? as usize;
        if level > ctx.max_level() {
            return Err(CkksError::InvalidLevel(level));
        }
        let scale = r.f64()?;
        let noise_bits = r.f64()?;
        let c0 = r.poly(ctx, level)?;
        let c1 = r.poly(ctx, level)?;
        r.finish()?;
        Ok(Self {
            c0,
            c1,
            level,
            scale,
            noise_bits,
        })
    }
}
