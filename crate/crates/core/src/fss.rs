//! Function secret sharing: distributed point functions (DPF) and distributed
//! comparison functions (DCF), plus the masked-comparison gate built from a
//! DCF pair.
//!
//! Keys follow the GGM-tree construction: a root seed and one correction word
//! per level. The length-doubling PRG is AES-128 with fixed keys in a
//! Davies-Meyer arrangement, which keeps evaluation fast and deterministic.

use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;
use rand::RngCore;
use std::sync::OnceLock;

pub const LAMBDA_BITS: u32 = 128;

type Seed = [u8; 16];

struct Prg {
    ciphers: [Aes128; 4],
}

static PRG: OnceLock<Prg> = OnceLock::new();

fn prg() -> &'static Prg {
    PRG.get_or_init(|| {
        let keys: [[u8; 16]; 4] = [
            *b"fss-prg-expand-0",
            *b"fss-prg-expand-1",
            *b"fss-prg-ctrlbits",
            *b"fss-prg-convert!",
        ];
        Prg {
            ciphers: keys.map(|k| Aes128::new(&k.into())),
        }
    })
}

fn dm(cipher: &Aes128, seed: &Seed) -> Seed {
    let mut block = (*seed).into();
    cipher.encrypt_block(&mut block);
    let mut out: Seed = block.into();
    for (o, s) in out.iter_mut().zip(seed.iter()) {
        *o ^= s;
    }
    out
}

/// One level of tree expansion: child seeds, control bits, and value blocks.
struct Expanded {
    s: [Seed; 2],
    t: [bool; 2],
    v: [Seed; 2],
}

fn expand(seed: &Seed) -> Expanded {
    let p = prg();
    let s_l = dm(&p.ciphers[0], seed);
    let s_r = dm(&p.ciphers[1], seed);
    let bits = dm(&p.ciphers[2], seed);
    let conv = dm(&p.ciphers[3], seed);
    let mut v_l = conv;
    let mut v_r = conv;
    v_l[15] = 0;
    v_r[15] = 1;
    // distinct value blocks per direction, derived from the conversion block
    v_l = dm(&p.ciphers[3], &v_l);
    v_r = dm(&p.ciphers[3], &v_r);
    Expanded {
        s: [s_l, s_r],
        t: [bits[0] & 1 == 1, bits[1] & 1 == 1],
        v: [v_l, v_r],
    }
}

fn convert_u32(seed: &Seed) -> u32 {
    let block = dm(&prg().ciphers[3], seed);
    u32::from_le_bytes(block[0..4].try_into().unwrap())
}

fn convert_bit(seed: &Seed) -> bool {
    let block = dm(&prg().ciphers[3], seed);
    block[0] & 1 == 1
}

fn bit_of(alpha: u64, n: u32, level: u32) -> bool {
    // MSB-first within an n-bit domain
    (alpha >> (n - 1 - level)) & 1 == 1
}

fn random_seed(rng: &mut impl RngCore) -> Seed {
    let mut s = [0u8; 16];
    rng.fill_bytes(&mut s);
    s
}

// ---------------------------------------------------------------------------
// DPF
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
struct DpfCw {
    s: Seed,
    t_l: bool,
    t_r: bool,
}

/// One party's key for the point function `f(x) = beta * 1{x = alpha}` with
/// outputs in `Z_{2^32}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DpfKey {
    pub party: u8,
    pub n: u32,
    seed: Seed,
    cws: Vec<DpfCw>,
    out_cw: u32,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FssError {
    #[error("alpha {0} outside the {1}-bit domain")]
    Domain(u64, u32),
    #[error("malformed key: {0}")]
    Malformed(&'static str),
}

/// Generates a DPF key pair for `f_{alpha,beta}` over an `n`-bit domain.
pub fn dpf_gen(
    alpha: u64,
    beta: u32,
    n: u32,
    rng: &mut impl RngCore,
) -> Result<(DpfKey, DpfKey), FssError> {
    if n == 0 || n > 63 || alpha >> n != 0 {
        return Err(FssError::Domain(alpha, n));
    }
    let roots = [random_seed(rng), random_seed(rng)];
    let mut s = roots;
    let mut t = [false, true];
    let mut cws = Vec::with_capacity(n as usize);
    for level in 0..n {
        let a = bit_of(alpha, n, level) as usize;
        let e0 = expand(&s[0]);
        let e1 = expand(&s[1]);
        let lose = 1 - a;
        let mut s_cw = e0.s[lose];
        for (c, b) in s_cw.iter_mut().zip(e1.s[lose].iter()) {
            *c ^= b;
        }
        let t_cw_l = e0.t[0] ^ e1.t[0] ^ (a == 1) ^ true;
        let t_cw_r = e0.t[1] ^ e1.t[1] ^ (a == 1);
        let t_cw = [t_cw_l, t_cw_r];
        for b in 0..2 {
            let e = if b == 0 { &e0 } else { &e1 };
            let mut ns = e.s[a];
            if t[b] {
                for (c, w) in ns.iter_mut().zip(s_cw.iter()) {
                    *c ^= w;
                }
            }
            let nt = e.t[a] ^ (t[b] & t_cw[a]);
            s[b] = ns;
            t[b] = nt;
        }
        cws.push(DpfCw {
            s: s_cw,
            t_l: t_cw_l,
            t_r: t_cw_r,
        });
    }
    let c0 = convert_u32(&s[0]);
    let c1 = convert_u32(&s[1]);
    let mut out_cw = beta.wrapping_sub(c0).wrapping_add(c1);
    if t[1] {
        out_cw = out_cw.wrapping_neg();
    }
    let k = |party: u8, seed: Seed| DpfKey {
        party,
        n,
        seed,
        cws: cws.clone(),
        out_cw,
    };
    Ok((k(1, roots[0]), k(2, roots[1])))
}

/// Evaluates one DPF key at `x`; the two parties' outputs sum to
/// `beta * 1{x = alpha}` in `Z_{2^32}`.
pub fn dpf_eval(key: &DpfKey, x: u64) -> u32 {
    debug_assert!(x >> key.n == 0);
    let mut s = key.seed;
    let mut t = key.party == 2;
    for level in 0..key.n {
        let cw = &key.cws[level as usize];
        let e = expand(&s);
        let dir = bit_of(x, key.n, level) as usize;
        let mut ns = e.s[dir];
        let mut nt = e.t[dir];
        if t {
            for (c, w) in ns.iter_mut().zip(cw.s.iter()) {
                *c ^= w;
            }
            nt ^= if dir == 0 { cw.t_l } else { cw.t_r };
        }
        s = ns;
        t = nt;
    }
    let mut out = convert_u32(&s);
    if t {
        out = out.wrapping_add(key.out_cw);
    }
    if key.party == 2 {
        out = out.wrapping_neg();
    }
    out
}

/// Serialized size in bytes of a key for an `n`-bit domain.
pub fn dpf_key_bytes(n: u32) -> usize {
    // header (version, party, n, lambda/8) + seed + per-level (seed + flags) + out cw
    4 + 16 + n as usize * 17 + 4
}

impl DpfKey {
    /// Length-prefixed little-endian layout: version byte, party, n, lambda/8,
    /// root seed, correction words in level order, output correction.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(dpf_key_bytes(self.n));
        out.push(1u8);
        out.push(self.party);
        out.push(self.n as u8);
        out.push((LAMBDA_BITS / 8) as u8);
        out.extend_from_slice(&self.seed);
        for cw in &self.cws {
            out.extend_from_slice(&cw.s);
            out.push(cw.t_l as u8 | ((cw.t_r as u8) << 1));
        }
        out.extend_from_slice(&self.out_cw.to_le_bytes());
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, FssError> {
        if data.len() < 4 || data[0] != 1 {
            return Err(FssError::Malformed("bad header"));
        }
        let party = data[1];
        let n = data[2] as u32;
        if data[3] != (LAMBDA_BITS / 8) as u8 || !(1..=63).contains(&n) || !(1..=2).contains(&party)
        {
            return Err(FssError::Malformed("bad parameters"));
        }
        if data.len() != dpf_key_bytes(n) {
            return Err(FssError::Malformed("bad length"));
        }
        let mut seed = [0u8; 16];
        seed.copy_from_slice(&data[4..20]);
        let mut cws = Vec::with_capacity(n as usize);
        let mut off = 20;
        for _ in 0..n {
            let mut s = [0u8; 16];
            s.copy_from_slice(&data[off..off + 16]);
            let flags = data[off + 16];
            if flags & !3 != 0 {
                return Err(FssError::Malformed("bad flag bits"));
            }
            cws.push(DpfCw {
                s,
                t_l: flags & 1 == 1,
                t_r: flags & 2 == 2,
            });
            off += 17;
        }
        let out_cw = u32::from_le_bytes(data[off..off + 4].try_into().unwrap());
        Ok(DpfKey {
            party,
            n,
            seed,
            cws,
            out_cw,
        })
    }
}

// ---------------------------------------------------------------------------
// DCF with outputs in Z_2
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
struct DcfCw {
    s: Seed,
    v: bool,
    t_l: bool,
    t_r: bool,
}

/// One party's key for `g(x) = 1{x < alpha}` over an `n`-bit domain with
/// outputs in `Z_2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DcfKey {
    pub party: u8,
    pub n: u32,
    seed: Seed,
    cws: Vec<DcfCw>,
    out_cw: bool,
}

pub fn dcf_gen(alpha: u64, n: u32, rng: &mut impl RngCore) -> Result<(DcfKey, DcfKey), FssError> {
    if n == 0 || n > 63 || alpha >> n != 0 {
        return Err(FssError::Domain(alpha, n));
    }
    let beta = true;
    let roots = [random_seed(rng), random_seed(rng)];
    let mut s = roots;
    let mut t = [false, true];
    let mut v_alpha = false;
    let mut cws = Vec::with_capacity(n as usize);
    for level in 0..n {
        let a = bit_of(alpha, n, level) as usize;
        let e0 = expand(&s[0]);
        let e1 = expand(&s[1]);
        let lose = 1 - a;
        let mut s_cw = e0.s[lose];
        for (c, b) in s_cw.iter_mut().zip(e1.s[lose].iter()) {
            *c ^= b;
        }
        // when the evaluation point peels off to the left of the path, the
        // whole subtree is below alpha iff alpha's bit is 1 at this level
        let mut v_cw = convert_bit(&e0.v[lose]) ^ convert_bit(&e1.v[lose]) ^ v_alpha;
        if lose == 0 {
            v_cw ^= beta;
        }
        v_alpha ^= convert_bit(&e0.v[a]) ^ convert_bit(&e1.v[a]) ^ v_cw;
        let t_cw_l = e0.t[0] ^ e1.t[0] ^ (a == 1) ^ true;
        let t_cw_r = e0.t[1] ^ e1.t[1] ^ (a == 1);
        let t_cw = [t_cw_l, t_cw_r];
        for b in 0..2 {
            let e = if b == 0 { &e0 } else { &e1 };
            let mut ns = e.s[a];
            if t[b] {
                for (c, w) in ns.iter_mut().zip(s_cw.iter()) {
                    *c ^= w;
                }
            }
            let nt = e.t[a] ^ (t[b] & t_cw[a]);
            s[b] = ns;
            t[b] = nt;
        }
        cws.push(DcfCw {
            s: s_cw,
            v: v_cw,
            t_l: t_cw_l,
            t_r: t_cw_r,
        });
    }
    let out_cw = convert_bit(&s[0]) ^ convert_bit(&s[1]) ^ v_alpha;
    let k = |party: u8, seed: Seed| DcfKey {
        party,
        n,
        seed,
        cws: cws.clone(),
        out_cw,
    };
    Ok((k(1, roots[0]), k(2, roots[1])))
}

pub fn dcf_eval(key: &DcfKey, x: u64) -> bool {
    debug_assert!(x >> key.n == 0);
    let mut s = key.seed;
    let mut t = key.party == 2;
    let mut acc = false;
    for level in 0..key.n {
        let cw = &key.cws[level as usize];
        let e = expand(&s);
        let dir = bit_of(x, key.n, level) as usize;
        acc ^= convert_bit(&e.v[dir]) ^ (t & cw.v);
        let mut ns = e.s[dir];
        let mut nt = e.t[dir];
        if t {
            for (c, w) in ns.iter_mut().zip(cw.s.iter()) {
                *c ^= w;
            }
            nt ^= if dir == 0 { cw.t_l } else { cw.t_r };
        }
        s = ns;
        t = nt;
    }
    acc ^ convert_bit(&s) ^ (t & key.out_cw)
}

// ---------------------------------------------------------------------------
// Masked comparison gate
// ---------------------------------------------------------------------------

/// One party's half of a masked-comparison gate for `1{x < threshold}` on an
/// `l`-bit additively shared input.
///
/// The gate holds two DCF keys covering the (possibly wrapping) interval
/// `[r, r + threshold)` that the masked input `x + r` lands in exactly when
/// `x < threshold`.
#[derive(Debug, Clone)]
pub struct CmpGateShare {
    pub l: u32,
    pub mask_share: u64,
    key_low: DcfKey,
    key_high: DcfKey,
    wrap_share: bool,
}

/// Generates both parties' gate halves for threshold `alpha < 2^{l-1}`.
pub fn cmp_gen(
    alpha: u64,
    l: u32,
    rng: &mut impl RngCore,
) -> Result<(CmpGateShare, CmpGateShare), FssError> {
    if l == 0 || l > 63 || alpha > 1u64 << (l - 1) {
        return Err(FssError::Domain(alpha, l));
    }
    let modulus_mask = if l == 63 { (1u64 << 63) - 1 } else { (1u64 << l) - 1 };
    let r = rng.next_u64() & modulus_mask;
    let r1 = rng.next_u64() & modulus_mask;
    let r2 = r.wrapping_sub(r1) & modulus_mask;
    let low = r;
    let high = (r + alpha) & modulus_mask;
    let wrap = high < low;
    let (ka1, ka2) = dcf_gen(low, l, rng)?;
    let (kb1, kb2) = dcf_gen(high, l, rng)?;
    let w1 = rng.next_u64() & 1 == 1;
    let w2 = w1 ^ wrap;
    Ok((
        CmpGateShare {
            l,
            mask_share: r1,
            key_low: ka1,
            key_high: kb1,
            wrap_share: w1,
        },
        CmpGateShare {
            l,
            mask_share: r2,
            key_low: ka2,
            key_high: kb2,
            wrap_share: w2,
        },
    ))
}

/// Local evaluation on the opened masked input `y = x + r mod 2^l`; the two
/// parties' bits XOR to `1{x < threshold}`.
pub fn cmp_eval(gate: &CmpGateShare, masked_x: u64) -> bool {
    let y = masked_x & ((1u64 << gate.l) - 1);
    dcf_eval(&gate.key_high, y) ^ dcf_eval(&gate.key_low, y) ^ gate.wrap_share
}
