//! s-Partition and Sign encoding of gradient vectors.
//!
//! Canonical byte layout of a message (all integers little-endian):
//!
//! ```text
//! [u32 s][u32 d][f64 inf_norm][packed coordinates]
//! ```
//!
//! Each coordinate takes `z + 1` bits with `z = ⌈log₂(s + 1)⌉`: first a
//! sign bit (1 = negative), then the level in `z` bits, least significant
//! bit first. Bits are packed LSB-first into bytes and the final byte is
//! zero-padded. The bit ledger charges `32 + d(z + 1)`: `s` and `d` are
//! known to both ends and the norm is charged as a 32-bit float.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::Vector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizedMessage {
    signs: Vec<i8>,
    levels: Vec<u32>,
    inf_norm: f64,
    s: u32,
}

/// `z = ⌈log₂(s + 1)⌉`, the level width in bits.
pub fn level_bits(s: u32) -> u32 {
    32 - s.leading_zeros()
}

/// `32 + d(z + 1)`
pub fn bits_for(d: usize, s: u32) -> u64 {
    32 + d as u64 * (level_bits(s) as u64 + 1)
}

fn check_s(s: u32) -> Result<()> {
    if s == 0 {
        Err(Error::InvalidParameter("the number of levels s must be ≥ 1".into()))
    } else {
        Ok(())
    }
}

/// Lower level `l` and rounding-up probability `q` for `|g_i|/‖g‖∞ = ratio`.
fn split(ratio: f64, s: u32) -> (u32, f64) {
    let scaled = ratio * s as f64;
    let l = (scaled.floor() as u32).min(s - 1);
    let q = (scaled - l as f64).clamp(0.0, 1.0);
    (l, q)
}

/// Randomized s-level encoding; `s = 1` is the Sign encoding.
pub fn encode_partition(g: &Vector, s: u32, rng: &mut RngStream) -> Result<QuantizedMessage> {
    check_s(s)?;
    if !g.is_finite() {
        return Err(Error::NonFinite("vector to encode".into()));
    }
    let inf_norm = g.norm_linf();
    let d = g.dim();
    let mut signs = vec![0i8; d];
    let mut levels = vec![0u32; d];
    if inf_norm > 0.0 {
        for i in 0..d {
            let gi = g[i];
            signs[i] = if gi > 0.0 {
                1
            } else if gi < 0.0 {
                -1
            } else {
                0
            };
            let (l, q) = split(gi.abs() / inf_norm, s);
            levels[i] = if q > 0.0 && rng.bernoulli(q) { l + 1 } else { l };
        }
    }
    Ok(QuantizedMessage { signs, levels, inf_norm, s })
}

impl QuantizedMessage {
    /// Builds a message from its parts, checking the invariants.
    pub fn new(signs: Vec<i8>, levels: Vec<u32>, inf_norm: f64, s: u32) -> Result<Self> {
        check_s(s)?;
        if signs.len() != levels.len() {
            return Err(Error::DimensionMismatch { expected: signs.len(), got: levels.len() });
        }
        if !(inf_norm.is_finite() && inf_norm >= 0.0) {
            return Err(Error::InvalidParameter(format!("norm must be finite and ≥ 0, got {inf_norm}")));
        }
        if signs.iter().any(|&b| !(-1..=1).contains(&b)) || levels.iter().any(|&l| l > s) {
            return Err(Error::InvalidParameter("sign or level out of range".into()));
        }
        if inf_norm == 0.0 && levels.iter().any(|&l| l != 0) {
            return Err(Error::InvalidParameter("zero norm with a nonzero level".into()));
        }
        Ok(Self { signs, levels, inf_norm, s })
    }

    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn inf_norm(&self) -> f64 {
        self.inf_norm
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    /// `32 + d(z + 1)`
    pub fn bits(&self) -> u64 {
        bits_for(self.dim(), self.s)
    }

    /// Canonical serialization; see the module docs for the layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let z = level_bits(self.s) as usize;
        let d = self.dim();
        let mut out = Vec::with_capacity(16 + (d * (z + 1)).div_ceil(8));
        out.extend_from_slice(&self.s.to_le_bytes());
        out.extend_from_slice(&(d as u32).to_le_bytes());
        out.extend_from_slice(&self.inf_norm.to_le_bytes());
        let mut packed = vec![0u8; (d * (z + 1)).div_ceil(8)];
        let mut pos = 0usize;
        let mut push = |bit: bool| {
            if bit {
                packed[pos / 8] |= 1 << (pos % 8);
            }
            pos += 1;
        };
        for i in 0..d {
            push(self.signs[i] < 0);
            for b in 0..z {
                push((self.levels[i] >> b) & 1 == 1);
            }
        }
        out.extend_from_slice(&packed);
        out
    }

    /// Inverse of [`to_bytes`](Self::to_bytes). Signs of zero-level
    /// coordinates do not survive the round trip; they are read back as 0
    /// when the sign bit is clear and −1 otherwise, which decodes identically.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Data("message shorter than its header".into()));
        }
        let s = u32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes"));
        let d = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let inf_norm = f64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        check_s(s)?;
        let z = level_bits(s) as usize;
        let body = &bytes[16..];
        if body.len() != (d * (z + 1)).div_ceil(8) {
            return Err(Error::Data(format!("expected {} payload bytes, got {}", (d * (z + 1)).div_ceil(8), body.len())));
        }
        let bit = |pos: usize| (body[pos / 8] >> (pos % 8)) & 1 == 1;
        let mut signs = Vec::with_capacity(d);
        let mut levels = Vec::with_capacity(d);
        let mut pos = 0;
        for _ in 0..d {
            let neg = bit(pos);
            pos += 1;
            let mut level = 0u32;
            for b in 0..z {
                if bit(pos) {
                    level |= 1 << b;
                }
                pos += 1;
            }
            levels.push(level);
            signs.push(if neg {
                -1
            } else if level > 0 {
                1
            } else {
                0
            });
        }
        Self::new(signs, levels, inf_norm, s)
    }
}

/// `sign_i · (level_i / s) · ‖g‖∞`
pub fn decode(msg: &QuantizedMessage) -> Vector {
    let s = msg.s as f64;
    Vector::from_fn(msg.dim(), |i| msg.signs[i] as f64 * (msg.levels[i] as f64 / s) * msg.inf_norm)
}

/// `E[decode(encode(g))]` computed by enumerating both outcomes of every
/// coordinate's Bernoulli draw.
pub fn exact_expectation(g: &Vector, s: u32) -> Result<Vector> {
    check_s(s)?;
    let m = g.norm_linf();
    if m == 0.0 {
        return Ok(Vector::zeros(g.dim()));
    }
    let sf = s as f64;
    Ok(Vector::from_fn(g.dim(), |i| {
        let (l, q) = split(g[i].abs() / m, s);
        let mag = (1.0 - q) * (l as f64 / sf) * m + q * ((l + 1) as f64 / sf) * m;
        g[i].signum() * if g[i] == 0.0 { 0.0 } else { mag }
    }))
}

/// `Σ_i ‖g‖∞² q_i(1 − q_i) / s²`, the conditional variance of the decoded vector.
pub fn exact_variance(g: &Vector, s: u32) -> Result<f64> {
    check_s(s)?;
    let m = g.norm_linf();
    if m == 0.0 {
        return Ok(0.0);
    }
    let sf = s as f64;
    Ok(g.iter().map(|&gi| {
        let (_, q) = split(gi.abs() / m, s);
        m * m * q * (1.0 - q) / (sf * sf)
    })
    .sum())
}

/// `(d/s²)‖g‖∞²`
pub fn variance_bound(g: &Vector, s: u32) -> f64 {
    let m = g.norm_linf();
    g.dim() as f64 * m * m / (s as f64 * s as f64)
}
