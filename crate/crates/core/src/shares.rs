//! Two-party additive and binary secret sharing and the interactive
//! primitives built on dealer material: Beaver multiplication (scalar,
//! vectorized matrix, fixed-point with truncation), correlated products,
//! binary AND, and binary-by-arithmetic multiplexing.

use crate::dealer::{mat_mul, CorrBatch, CorrShape, MaskSide, MatTriple, PartyCtx};
use crate::ring::Ring;
use crate::sim::Party;
use rand::RngCore;

/// One party's additive share of a ring element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArithShare<R: Ring> {
    pub party: Party,
    pub value: R,
}

/// One party's XOR share of a bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinShare {
    pub party: Party,
    pub bit: bool,
}

/// Splits a secret into two additive shares, each marginally uniform.
pub fn share<R: Ring>(secret: R, rng: &mut impl RngCore) -> (ArithShare<R>, ArithShare<R>) {
    let lo = rng.next_u64();
    let s1 = if R::BITS > 64 {
        R::from_u128(((rng.next_u64() as u128) << 64) | lo as u128)
    } else {
        R::from_u64(lo)
    };
    (
        ArithShare { party: Party::P1, value: s1 },
        ArithShare { party: Party::P2, value: secret.wrapping_sub(s1) },
    )
}

pub fn reconstruct<R: Ring>(a: ArithShare<R>, b: ArithShare<R>) -> R {
    assert_ne!(a.party, b.party, "need one share from each party");
    a.value.wrapping_add(b.value)
}

pub fn share_bin(secret: bool, rng: &mut impl RngCore) -> (BinShare, BinShare) {
    let b1 = rng.next_u32() & 1 == 1;
    (
        BinShare { party: Party::P1, bit: b1 },
        BinShare { party: Party::P2, bit: b1 ^ secret },
    )
}

pub fn reconstruct_bin(a: BinShare, b: BinShare) -> bool {
    assert_ne!(a.party, b.party);
    a.bit ^ b.bit
}

// ---------------------------------------------------------------------------
// wire helpers
// ---------------------------------------------------------------------------

pub fn ring_to_bytes<R: Ring>(v: &[R]) -> Vec<u8> {
    let mut out = Vec::with_capacity(v.len() * R::byte_len());
    for x in v {
        x.to_le_bytes(&mut out);
    }
    out
}

pub fn ring_from_bytes<R: Ring>(b: &[u8]) -> Vec<R> {
    assert_eq!(b.len() % R::byte_len(), 0);
    b.chunks_exact(R::byte_len()).map(R::from_le_slice).collect()
}

pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

pub fn unpack_bits(bytes: &[u8], n: usize) -> Vec<bool> {
    (0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect()
}

/// Opens a vector of shared values: one symmetric exchange, then local sum.
pub fn open_vec<R: Ring>(ctx: &PartyCtx, label: &'static str, shares: &[R]) -> Vec<R> {
    let peer = ctx.chan.exchange(
        ctx.party,
        label,
        shares.len() as u64,
        ring_to_bytes(shares),
    );
    let peer = ring_from_bytes::<R>(&peer);
    assert_eq!(peer.len(), shares.len());
    shares
        .iter()
        .zip(peer)
        .map(|(a, b)| a.wrapping_add(b))
        .collect()
}

/// Opens shared bits (packed on the wire; element count = bit count).
pub fn open_bits(ctx: &PartyCtx, label: &'static str, bits: &[bool]) -> Vec<bool> {
    let peer = ctx
        .chan
        .exchange(ctx.party, label, bits.len() as u64, pack_bits(bits));
    let peer = unpack_bits(&peer, bits.len());
    bits.iter().zip(peer).map(|(a, b)| a ^ b).collect()
}

// ---------------------------------------------------------------------------
// Beaver multiplication
// ---------------------------------------------------------------------------

/// Rings for which the dealer stocks Beaver matrix triples.
pub trait BeaverRing: Ring {
    fn triple(ctx: &PartyCtx, n: usize, m: usize, k: usize) -> MatTriple<Self>;
}

impl BeaverRing for u64 {
    fn triple(ctx: &PartyCtx, n: usize, m: usize, k: usize) -> MatTriple<Self> {
        ctx.dealer.lock().unwrap().beaver64(ctx.party, n, m, k)
    }
}

impl BeaverRing for u128 {
    fn triple(ctx: &PartyCtx, n: usize, m: usize, k: usize) -> MatTriple<Self> {
        ctx.dealer.lock().unwrap().beaver128(ctx.party, n, m, k)
    }
}

fn add_assign<R: Ring>(acc: &mut [R], v: &[R]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a = a.wrapping_add(*b);
    }
}

fn sub_vec<R: Ring>(a: &[R], b: &[R]) -> Vec<R> {
    a.iter().zip(b).map(|(x, y)| x.wrapping_sub(*y)).collect()
}

/// Secret-shared matrix product `a (n×m) · b (m×k)`, exact in the ring.
///
/// The vectorized Beaver protocol opens `A−X` and `B−Y` in a single round,
/// sending `n·m + m·k` ring elements per direction (`2M²` for square inputs).
pub fn mul_mat<R: BeaverRing>(
    ctx: &PartyCtx,
    label: &'static str,
    a: &[R],
    b: &[R],
    n: usize,
    m: usize,
    k: usize,
) -> Vec<R> {
    assert_eq!(a.len(), n * m, "left operand dimension mismatch");
    assert_eq!(b.len(), m * k, "right operand dimension mismatch");
    let t = R::triple(ctx, n, m, k);
    let mut masked = sub_vec(a, &t.x);
    masked.extend(sub_vec(b, &t.y));
    let opened = open_vec(ctx, label, &masked);
    let (d, e) = opened.split_at(n * m);
    let mut z = t.z;
    add_assign(&mut z, &mat_mul(d, &t.y, n, m, k));
    add_assign(&mut z, &mat_mul(&t.x, e, n, m, k));
    if ctx.is_p1() {
        add_assign(&mut z, &mat_mul(d, e, n, m, k));
    }
    z
}

/// Scalar convenience wrapper over [`mul_mat`].
pub fn mul_scalar<R: BeaverRing>(ctx: &PartyCtx, label: &'static str, a: R, b: R) -> R {
    mul_mat(ctx, label, &[a], &[b], 1, 1, 1)[0]
}

/// Elementwise product of two shared vectors: `a.len()` independent Beaver
/// products opened in one round (`2n` elements per direction).
pub fn mul_elem(ctx: &PartyCtx, label: &'static str, a: &[u128], b: &[u128]) -> Vec<u128> {
    assert_eq!(a.len(), b.len());
    let t = ctx.dealer.lock().unwrap().elem128(ctx.party, a.len());
    let mut masked = sub_vec(a, &t.x);
    masked.extend(sub_vec(b, &t.y));
    let opened = open_vec(ctx, label, &masked);
    let (d, e) = opened.split_at(a.len());
    (0..a.len())
        .map(|i| {
            let mut z = t.z[i]
                .wrapping_add(d[i].wrapping_mul(t.y[i]))
                .wrapping_add(t.x[i].wrapping_mul(e[i]));
            if ctx.is_p1() {
                z = z.wrapping_add(d[i].wrapping_mul(e[i]));
            }
            z
        })
        .collect()
}

/// Lifts shares of small non-negative values from `Z_{2^64}` into
/// `Z_{2^128}`: opens `x + r` for a dealer pair `r < 2^63` shared in both
/// rings (no wraparound for `x < 2^63`), then re-shares in the wide ring.
pub fn lift_shares(ctx: &PartyCtx, label: &'static str, x: &[u64]) -> Vec<u128> {
    let pairs = ctx.dealer.lock().unwrap().lift_pairs(ctx.party, x.len());
    let masked: Vec<u64> = x
        .iter()
        .zip(&pairs.r64)
        .map(|(v, r)| v.wrapping_add(*r))
        .collect();
    let opened = open_vec(ctx, label, &masked);
    opened
        .iter()
        .zip(&pairs.r128)
        .map(|(&c, &r)| {
            if ctx.is_p1() {
                (c as u128).wrapping_sub(r)
            } else {
                r.wrapping_neg()
            }
        })
        .collect()
}

/// Truncation strategy after fixed-point products.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TruncMode {
    /// Dealer pairs; deterministic error in {0, +1} ulp.
    #[default]
    Dealer,
    /// Local share shifting; probabilistic ±1 ulp plus a rare large error.
    Local,
}

/// Power-of-two offset that keeps the masked truncation opening positive.
/// Signed intermediates must stay below 2^{OFFSET_BITS-1} in magnitude.
const OFFSET_BITS: u32 = 110;

/// Truncates shared 128-bit values by `2^t` using dealer pairs.
///
/// Opens `z + 2^OFFSET_BITS + r` (one element per value per direction); the
/// offset keeps the sum positive and `r < 2^127` prevents wraparound, so the
/// result is `floor(z/2^t)` plus at most one ulp.
pub fn trunc_dealer(ctx: &PartyCtx, label: &'static str, z: &[u128], t: u32) -> Vec<u128> {
    let pairs = ctx.dealer.lock().unwrap().trunc_pairs(ctx.party, z.len(), t);
    let mut masked: Vec<u128> = z
        .iter()
        .zip(&pairs.r)
        .map(|(v, r)| v.wrapping_add(*r))
        .collect();
    if ctx.is_p1() {
        for v in masked.iter_mut() {
            *v = v.wrapping_add(1u128 << OFFSET_BITS);
        }
    }
    let opened = open_vec(ctx, label, &masked);
    opened
        .iter()
        .zip(&pairs.r_shifted)
        .map(|(c, rs)| {
            let mut out = 0u128.wrapping_sub(*rs);
            if ctx.is_p1() {
                out = out
                    .wrapping_add(c >> t)
                    .wrapping_sub(1u128 << (OFFSET_BITS - t));
            }
            out
        })
        .collect()
}

/// Local probabilistic truncation (no communication): party 1 shifts its
/// share down, party 2 shifts the negation of its share.
pub fn trunc_local(party: Party, z: &[u128], t: u32) -> Vec<u128> {
    z.iter()
        .map(|&v| {
            if party.is_p1() {
                v >> t
            } else {
                (v.wrapping_neg() >> t).wrapping_neg()
            }
        })
        .collect()
}

pub fn trunc(ctx: &PartyCtx, label: &'static str, z: &[u128], t: u32, mode: TruncMode) -> Vec<u128> {
    match mode {
        TruncMode::Dealer => trunc_dealer(ctx, label, z, t),
        TruncMode::Local => trunc_local(ctx.party, z, t),
    }
}

/// Fixed-point matrix product: ring product followed by truncation by `2^t`.
pub fn fixed_mul_mat(
    ctx: &PartyCtx,
    mul_label: &'static str,
    trunc_label: &'static str,
    a: &[u128],
    b: &[u128],
    n: usize,
    m: usize,
    k: usize,
    t: u32,
    mode: TruncMode,
) -> Vec<u128> {
    let z = mul_mat::<u128>(ctx, mul_label, a, b, n, m, k);
    trunc(ctx, trunc_label, &z, t, mode)
}

// ---------------------------------------------------------------------------
// correlated products: one mask, many multiplicands
// ---------------------------------------------------------------------------

/// An in-progress correlated batch: the shared mask difference `U−X` has been
/// opened once and is reused across all products in the batch.
pub struct CorrSession {
    shape: CorrShape,
    batch: CorrBatch,
    d: Vec<u128>,
    next: usize,
}

/// Opens `U−X` (one exchange of `p·q` elements) and prepares `k` products
/// against the shared `p×q` matrix `u`.
pub fn corr_begin(
    ctx: &PartyCtx,
    label: &'static str,
    u: &[u128],
    shape: CorrShape,
) -> CorrSession {
    assert_eq!(u.len(), shape.p * shape.q);
    let batch = ctx.dealer.lock().unwrap().correlated128(ctx.party, shape.clone());
    let d = open_vec(ctx, label, &sub_vec(u, &batch.x));
    CorrSession { shape, batch, d, next: 0 }
}

/// One product from the batch: opens `V_j − Y_j` and returns shares of
/// `U·V_j` (mask on the left) or `V_j·U` (mask on the right).
pub fn corr_next(ctx: &PartyCtx, label: &'static str, sess: &mut CorrSession, v: &[u128]) -> Vec<u128> {
    let j = sess.next;
    assert!(j < sess.shape.ys.len(), "correlated batch exhausted");
    sess.next += 1;
    let (side, rows, cols) = sess.shape.ys[j];
    assert_eq!(v.len(), rows * cols);
    let e = open_vec(ctx, label, &sub_vec(v, &sess.batch.ys[j]));
    let (p, q) = (sess.shape.p, sess.shape.q);
    let mut z = sess.batch.zs[j].clone();
    match side {
        MaskSide::Left => {
            add_assign(&mut z, &mat_mul(&sess.d, &sess.batch.ys[j], p, q, cols));
            add_assign(&mut z, &mat_mul(&sess.batch.x, &e, p, q, cols));
            if ctx.is_p1() {
                add_assign(&mut z, &mat_mul(&sess.d, &e, p, q, cols));
            }
        }
        MaskSide::Right => {
            add_assign(&mut z, &mat_mul(&sess.batch.ys[j], &sess.d, rows, p, q));
            add_assign(&mut z, &mat_mul(&e, &sess.batch.x, rows, p, q));
            if ctx.is_p1() {
                add_assign(&mut z, &mat_mul(&e, &sess.d, rows, p, q));
            }
        }
    }
    z
}

// ---------------------------------------------------------------------------
// binary sharing ops
// ---------------------------------------------------------------------------

/// XOR of binary shares: local.
pub fn xor_bits(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

/// NOT of a binary share: party 1 flips, party 2 keeps.
pub fn flip_bits(party: Party, a: &[bool]) -> Vec<bool> {
    a.iter().map(|&x| x ^ party.is_p1()).collect()
}

/// AND of binary share vectors via binary Beaver triples; one round.
pub fn and_bits(ctx: &PartyCtx, label: &'static str, a: &[bool], b: &[bool]) -> Vec<bool> {
    assert_eq!(a.len(), b.len());
    let t = ctx.dealer.lock().unwrap().bin_and(ctx.party, a.len());
    let mut masked = xor_bits(a, &t.a);
    masked.extend(xor_bits(b, &t.b));
    let opened = open_bits(ctx, label, &masked);
    let (d, e) = opened.split_at(a.len());
    (0..a.len())
        .map(|i| {
            let mut z = t.c[i] ^ (d[i] & t.b[i]) ^ (t.a[i] & e[i]);
            if ctx.is_p1() {
                z ^= d[i] & e[i];
            }
            z
        })
        .collect()
}

/// Product of a binary-shared bit and an arithmetically shared `Z_{2^32}`
/// value, via precomputed-OT message choice; two rounds for any batch size.
///
/// `b·x = b·x₁ + b·x₂`; each party plays sender for the term holding its own
/// arithmetic share and receiver for the peer's, with its binary share as the
/// choice bit.
pub fn mul_bin_arith(ctx: &PartyCtx, label: &'static str, b: &[bool], x: &[u32]) -> Vec<u32> {
    assert_eq!(b.len(), x.len());
    let n = b.len();
    let ot = ctx.dealer.lock().unwrap().ot_batch(ctx.party, n);
    // round 1: as receiver, derandomize the OT choice with my binary share
    let d_mine: Vec<bool> = (0..n).map(|i| b[i] ^ ot.recv_choice[i]).collect();
    let d_peer = unpack_bits(
        &ctx.chan
            .exchange(ctx.party, label, n as u64, pack_bits(&d_mine)),
        n,
    );
    // round 2: as sender, pad both candidate messages m_j = (j ⊕ b_me)·x_me − r
    let mut wire = Vec::with_capacity(n * 8);
    for i in 0..n {
        for j in 0..2u32 {
            let sel = (j == 1) ^ b[i];
            let m = if sel { x[i] } else { 0 }.wrapping_sub(ot.send_mask[i]);
            wire.extend_from_slice(
                &m.wrapping_add(ot.send_pads[i][(j as usize) ^ (d_peer[i] as usize)])
                    .to_le_bytes(),
            );
        }
    }
    let peer_wire = ctx
        .chan
        .exchange(ctx.party, label, 2 * n as u64, wire);
    (0..n)
        .map(|i| {
            let j = b[i] as usize;
            let y = u32::from_le_bytes(peer_wire[i * 8 + j * 4..i * 8 + j * 4 + 4].try_into().unwrap());
            // my output: the mask from my sender role plus the unpadded
            // message from my receiver role
            ot.send_mask[i].wrapping_add(y.wrapping_sub(ot.recv_pad[i]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dealer::PartyCtx;
    use crate::ring::{decode128, encode128, FRAC_BITS};
    use crate::sim::{run_pair, Channel, SimMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn with_parties<T: Send + 'static>(
        f: impl Fn(PartyCtx) -> T + Send + Sync + 'static,
    ) -> (T, T, std::sync::Arc<Channel>) {
        let chan = Channel::new(SimMode::Threaded, 0.0);
        chan.set_phase(Party::P1, "test");
        chan.set_phase(Party::P2, "test");
        let (c1, c2) = PartyCtx::pair(&chan, 42);
        let f = std::sync::Arc::new(f);
        let f2 = f.clone();
        let (a, b) = run_pair(&chan, move || f(c1), move || f2(c2));
        (a, b, chan)
    }

    #[test]
    fn share_round_trip_and_forced_zero() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let (a, b) = share(42u64, &mut rng);
        assert_eq!(reconstruct(a, b), 42);
        let (a, b) = share(0u64, &mut rng);
        assert_eq!(b.value, a.value.wrapping_neg());
    }

    #[test]
    fn share_marginal_uniformity_chi_square() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut buckets = [0u64; 256];
        let n = 100_000;
        for _ in 0..n {
            let (s1, _) = share(rng.gen::<u64>(), &mut rng);
            buckets[(s1.value & 0xff) as usize] += 1;
        }
        let expected = n as f64 / 256.0;
        let stat: f64 = buckets
            .iter()
            .map(|&o| (o as f64 - expected).powi(2) / expected)
            .sum();
        let crit = ChiSquared::new(255.0).unwrap().inverse_cdf(0.99);
        assert!(stat < crit, "chi-square {stat} >= {crit}");
    }

    #[test]
    fn beaver_scalar_annihilator_and_random() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let cases: Vec<(u64, u64)> = (0..100)
            .map(|i| (if i == 0 { 0 } else { rng.gen() }, rng.gen()))
            .collect();
        let shares: Vec<((u64, u64), (u64, u64))> = cases
            .iter()
            .map(|&(x, y)| {
                let (x1, x2) = share(x, &mut rng);
                let (y1, y2) = share(y, &mut rng);
                ((x1.value, y1.value), (x2.value, y2.value))
            })
            .collect();
        let s1: Vec<_> = shares.iter().map(|s| s.0).collect();
        let s2: Vec<_> = shares.iter().map(|s| s.1).collect();
        let run = move |ctx: PartyCtx| {
            let mine = if ctx.is_p1() { &s1 } else { &s2 };
            mine.iter()
                .map(|&(x, y)| mul_scalar::<u64>(&ctx, "mul", x, y))
                .collect::<Vec<u64>>()
        };
        let (z1, z2, _) = with_parties(run);
        for (i, (&(x, y), (a, b))) in cases.iter().zip(z1.iter().zip(&z2)).enumerate() {
            assert_eq!(a.wrapping_add(*b), x.wrapping_mul(y), "case {i}");
        }
    }

    #[test]
    fn matrix_mul_bytes_per_direction() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let m = 15usize;
        let a: Vec<u64> = (0..m * m).map(|_| rng.gen()).collect();
        let b: Vec<u64> = (0..m * m).map(|_| rng.gen()).collect();
        let mut a1 = Vec::new();
        let mut a2 = Vec::new();
        let mut b1 = Vec::new();
        let mut b2 = Vec::new();
        for &v in &a {
            let (x, y) = share(v, &mut rng);
            a1.push(x.value);
            a2.push(y.value);
        }
        for &v in &b {
            let (x, y) = share(v, &mut rng);
            b1.push(x.value);
            b2.push(y.value);
        }
        let (z1, z2, chan) = with_parties(move |ctx| {
            if ctx.is_p1() {
                mul_mat::<u64>(&ctx, "matmul", &a1, &b1, 15, 15, 15)
            } else {
                mul_mat::<u64>(&ctx, "matmul", &a2, &b2, 15, 15, 15)
            }
        });
        let z: Vec<u64> = z1.iter().zip(&z2).map(|(x, y)| x.wrapping_add(*y)).collect();
        assert_eq!(z, mat_mul(&a, &b, m, m, m));
        let stats = chan.phase_stats("test");
        // vectorized Beaver: 2·15² ring elements = 3600 bytes per direction
        assert_eq!(stats.bytes, [3600, 3600]);
        assert_eq!(stats.elems["matmul"], [450, 450]);
        assert_eq!(stats.rounds, 1);
    }

    #[test]
    fn fixed_point_mul_dealer_truncation() {
        let a = encode128(1.5, FRAC_BITS).unwrap();
        let b = encode128(2.0, FRAC_BITS).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let (a1, a2) = share(a, &mut rng);
        let (b1, b2) = share(b, &mut rng);
        let (z1, z2, _) = with_parties(move |ctx| {
            let (x, y) = if ctx.is_p1() { (a1.value, b1.value) } else { (a2.value, b2.value) };
            fixed_mul_mat(&ctx, "mul", "trunc", &[x], &[y], 1, 1, 1, FRAC_BITS, TruncMode::Dealer)[0]
        });
        let got = decode128(z1.wrapping_add(z2), FRAC_BITS);
        assert!((got - 3.0).abs() <= 2f64.powi(-31), "got {got}");
    }

    #[test]
    fn fixed_point_error_bound_randomized() {
        // dealer truncation error is deterministic: in {0, +1} ulp of the
        // exact arithmetic shift of the double-width product
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let cases: Vec<(u128, u128)> = (0..500)
            .map(|_| {
                let x = encode128(rng.gen_range(-1024.0..1024.0), FRAC_BITS).unwrap();
                let y = encode128(rng.gen_range(-1024.0..1024.0), FRAC_BITS).unwrap();
                (x, y)
            })
            .collect();
        let mut s1 = Vec::new();
        let mut s2 = Vec::new();
        for &(x, y) in &cases {
            let (x1, x2) = share(x, &mut rng);
            let (y1, y2) = share(y, &mut rng);
            s1.push((x1.value, y1.value));
            s2.push((x2.value, y2.value));
        }
        let (z1, z2, _) = with_parties(move |ctx| {
            let mine = if ctx.is_p1() { &s1 } else { &s2 };
            mine.iter()
                .map(|&(x, y)| {
                    fixed_mul_mat(
                        &ctx, "mul", "trunc", &[x], &[y], 1, 1, 1, FRAC_BITS, TruncMode::Dealer,
                    )[0]
                })
                .collect::<Vec<u128>>()
        });
        for (&(x, y), (a, b)) in cases.iter().zip(z1.iter().zip(&z2)) {
            let got = a.wrapping_add(*b) as i128;
            let want = ((x as i128).wrapping_mul(y as i128)) >> FRAC_BITS;
            let diff = got.wrapping_sub(want);
            assert!(diff == 0 || diff == 1, "x={x} y={y} diff={diff}");
        }
    }

    #[test]
    fn elementwise_product_single_round() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let xs: Vec<u128> = (0..200).map(|_| rng.gen::<u64>() as u128).collect();
        let ys: Vec<u128> = (0..200).map(|_| rng.gen::<u64>() as u128).collect();
        let mut s1 = (Vec::new(), Vec::new());
        let mut s2 = (Vec::new(), Vec::new());
        for i in 0..200 {
            let (a, b) = share(xs[i], &mut rng);
            s1.0.push(a.value);
            s2.0.push(b.value);
            let (a, b) = share(ys[i], &mut rng);
            s1.1.push(a.value);
            s2.1.push(b.value);
        }
        let (z1, z2, chan) = with_parties(move |ctx| {
            let s = if ctx.is_p1() { &s1 } else { &s2 };
            mul_elem(&ctx, "elem", &s.0, &s.1)
        });
        for i in 0..200 {
            assert_eq!(z1[i].wrapping_add(z2[i]), xs[i].wrapping_mul(ys[i]));
        }
        assert_eq!(chan.phase_stats("test").rounds, 1);
        assert_eq!(chan.phase_stats("test").elems["elem"], [400, 400]);
    }

    #[test]
    fn lift_preserves_small_values() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let vals: Vec<u64> = (0..500).map(|_| rng.gen_range(0..1u64 << 40)).collect();
        let mut s1 = Vec::new();
        let mut s2 = Vec::new();
        for &v in &vals {
            let (a, b) = share(v, &mut rng);
            s1.push(a.value);
            s2.push(b.value);
        }
        let (l1, l2, _) = with_parties(move |ctx| {
            let s = if ctx.is_p1() { &s1 } else { &s2 };
            lift_shares(&ctx, "lift", s)
        });
        for (i, &v) in vals.iter().enumerate() {
            assert_eq!(l1[i].wrapping_add(l2[i]), v as u128, "case {i}");
        }
    }

    #[test]
    fn correlated_batch_counts_mask_once() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let u: Vec<u128> = (0..4).map(|_| rng.gen::<u64>() as u128).collect();
        let vs: Vec<Vec<u128>> = (0..5)
            .map(|_| (0..4).map(|_| rng.gen::<u64>() as u128).collect())
            .collect();
        let mut u_sh = (Vec::new(), Vec::new());
        for &x in &u {
            let (a, b) = share(x, &mut rng);
            u_sh.0.push(a.value);
            u_sh.1.push(b.value);
        }
        let mut v_sh: Vec<(Vec<u128>, Vec<u128>)> = Vec::new();
        for v in &vs {
            let mut p = (Vec::new(), Vec::new());
            for &x in v {
                let (a, b) = share(x, &mut rng);
                p.0.push(a.value);
                p.1.push(b.value);
            }
            v_sh.push(p);
        }
        let shape = CorrShape {
            p: 2,
            q: 2,
            ys: vec![(MaskSide::Left, 2, 2); 5],
        };
        let (z1, z2, chan) = with_parties(move |ctx| {
            let us = if ctx.is_p1() { &u_sh.0 } else { &u_sh.1 };
            let mut sess = corr_begin(&ctx, "corr.mask", us, shape.clone());
            v_sh.iter()
                .map(|p| {
                    let v = if ctx.is_p1() { &p.0 } else { &p.1 };
                    corr_next(&ctx, "corr.mul", &mut sess, v)
                })
                .collect::<Vec<_>>()
        });
        for (j, v) in vs.iter().enumerate() {
            let got: Vec<u128> = z1[j]
                .iter()
                .zip(&z2[j])
                .map(|(a, b)| a.wrapping_add(*b))
                .collect();
            assert_eq!(got, mat_mul(&u, v, 2, 2, 2), "product {j}");
        }
        let stats = chan.phase_stats("test");
        // the 2×2 mask opening is counted once (4 elements = 64 bytes of
        // u128 per direction), not once per product
        assert_eq!(stats.elems["corr.mask"], [4, 4]);
        assert_eq!(stats.elems["corr.mul"], [20, 20]);
    }

    #[test]
    fn binary_ops_truth_tables() {
        for a in [false, true] {
            for b in [false, true] {
                let mut rng = ChaCha12Rng::seed_from_u64((a as u64) * 2 + b as u64);
                let (a1, a2) = share_bin(a, &mut rng);
                let (b1, b2) = share_bin(b, &mut rng);
                assert_eq!(reconstruct_bin(a1, a2) ^ reconstruct_bin(b1, b2), a ^ b);
                let (z1, z2, _) = with_parties(move |ctx| {
                    let (x, y) = if ctx.is_p1() { (a1.bit, b1.bit) } else { (a2.bit, b2.bit) };
                    and_bits(&ctx, "and", &[x], &[y])[0]
                });
                assert_eq!(z1 ^ z2, a & b, "AND({a},{b})");
                // local flip on shares
                let f1 = flip_bits(Party::P1, &[a1.bit])[0];
                let f2 = flip_bits(Party::P2, &[a2.bit])[0];
                assert_eq!(f1 ^ f2, !a);
                let g1 = flip_bits(Party::P1, &[f1])[0];
                assert_eq!(g1 ^ f2, a, "double flip is identity");
            }
        }
    }

    #[test]
    fn bin_arith_multiplex() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let n = 10_000usize;
        let bs: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        let xs: Vec<u32> = (0..n).map(|_| rng.gen()).collect();
        let mut b1 = Vec::new();
        let mut b2 = Vec::new();
        let mut x1 = Vec::new();
        let mut x2 = Vec::new();
        for i in 0..n {
            let (p, q) = share_bin(bs[i], &mut rng);
            b1.push(p.bit);
            b2.push(q.bit);
            let (p, q) = share(xs[i], &mut rng);
            x1.push(p.value);
            x2.push(q.value);
        }
        let (z1, z2, chan) = with_parties(move |ctx| {
            let (b, x) = if ctx.is_p1() { (&b1, &x1) } else { (&b2, &x2) };
            mul_bin_arith(&ctx, "mux", b, x)
        });
        for i in 0..n {
            let got = z1[i].wrapping_add(z2[i]);
            let want = if bs[i] { xs[i] } else { 0 };
            assert_eq!(got, want, "case {i}");
        }
        assert_eq!(chan.phase_stats("test").rounds, 2);
    }

    #[test]
    fn local_truncation_mode() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-1000.0..1000.0);
            // a 2t-scaled value, as it would appear before post-product truncation
            let v = encode128(x, FRAC_BITS).unwrap().wrapping_shl(FRAC_BITS);
            let (s1, s2) = share(v, &mut rng);
            let t1 = trunc_local(Party::P1, &[s1.value], FRAC_BITS)[0];
            let t2 = trunc_local(Party::P2, &[s2.value], FRAC_BITS)[0];
            let got = decode128(t1.wrapping_add(t2), FRAC_BITS);
            // probabilistic: allow the occasional one-ulp slip
            assert!((got - x).abs() <= 2f64.powi(-30), "{x} -> {got}");
        }
    }
}
