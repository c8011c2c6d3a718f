//! Pluggable secure comparison: binary shares of `1{x >= c}` for an
//! additively shared `x` and public `c`.
//!
//! Two interchangeable backends: FSS (one masked-opening round, heavier local
//! evaluation) and ASS with a Kogge-Stone parallel prefix adder
//! (`1 + ceil(log2 k)` rounds of cheap AND gates).

use crate::dealer::PartyCtx;
use crate::ring::Ring;
use crate::shares::{and_bits, flip_bits, open_vec, xor_bits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CompareBackend {
    #[default]
    Fss,
    AssPpa,
}

/// Binary shares of the most significant bit of a shared `k`-bit value.
///
/// Each party bit-decomposes its own arithmetic share locally; the carry into
/// the top bit of the share sum is computed with a Kogge-Stone prefix network
/// over the low `k-1` bits, batched so the round count is `1 + ceil(log2 k)`
/// regardless of batch size.
pub fn msb_extract<R: Ring>(ctx: &PartyCtx, x: &[R]) -> Vec<bool> {
    let k = R::BITS as usize;
    let w = k - 1; // carry network width
    let n = x.len();
    // my share's bits; the peer's bits are the other addend of the adder
    let my_bits: Vec<Vec<bool>> = x
        .iter()
        .map(|v| (0..k as u32).map(|i| v.bit(i)).collect())
        .collect();
    // shares of a_i (P1's addend) and b_i (P2's addend): each party holds its
    // own bits, the peer's share of them is zero
    let mut a_sh = vec![false; n * w];
    let mut b_sh = vec![false; n * w];
    for (j, bits) in my_bits.iter().enumerate() {
        for i in 0..w {
            if ctx.is_p1() {
                a_sh[j * w + i] = bits[i];
            } else {
                b_sh[j * w + i] = bits[i];
            }
        }
    }
    // generate / propagate, round 1 of ANDs
    let mut g = and_bits(ctx, "ppa.and", &a_sh, &b_sh);
    let mut p = xor_bits(&a_sh, &b_sh);
    let mut d = 1usize;
    while d < w {
        // one batched AND round per prefix-combine level:
        //   G'_i = G_i ^ (P_i & G_{i-d});  P'_i = P_i & P_{i-d}
        let mut lhs = Vec::with_capacity(2 * n * (w - d));
        let mut rhs = Vec::with_capacity(2 * n * (w - d));
        for j in 0..n {
            for i in d..w {
                lhs.push(p[j * w + i]);
                rhs.push(g[j * w + i - d]);
                lhs.push(p[j * w + i]);
                rhs.push(p[j * w + i - d]);
            }
        }
        let prod = and_bits(ctx, "ppa.and", &lhs, &rhs);
        let mut idx = 0;
        for j in 0..n {
            for i in d..w {
                g[j * w + i] ^= prod[idx];
                p[j * w + i] = prod[idx + 1];
                idx += 2;
            }
        }
        d *= 2;
    }
    // msb = a_{k-1} ^ b_{k-1} ^ carry, carry = G_{k-2} after full combine
    (0..n)
        .map(|j| my_bits[j][k - 1] ^ g[j * w + w - 1])
        .collect()
}

/// Binary shares of `1{x >= c}` for shared `x` and public `c`, both in
/// `[0, 2^31)` so the sign of `x - c` is meaningful.
pub fn ge_const(ctx: &PartyCtx, x: &[u32], c: u32, backend: CompareBackend) -> Vec<bool> {
    debug_assert!(c < 1 << 31);
    match backend {
        CompareBackend::Fss => {
            let gates: Vec<_> = {
                let mut d = ctx.dealer.lock().unwrap();
                x.iter().map(|_| d.cmp_gate(ctx.party, 32, c as u64)).collect()
            };
            // single round: open the masked inputs, then evaluate locally
            let masked: Vec<u32> = x
                .iter()
                .zip(&gates)
                .map(|(v, gate)| v.wrapping_add(gate.mask_share as u32))
                .collect();
            let opened = open_vec(ctx, "cmp.mask", &masked);
            ctx.chan.add_local_ops(ctx.party, 2 * x.len() as u64);
            let lt: Vec<bool> = opened
                .iter()
                .zip(&gates)
                .map(|(y, gate)| crate::fss::cmp_eval(gate, *y as u64))
                .collect();
            // x >= c is the flipped comparison bit
            flip_bits(ctx.party, &lt)
        }
        CompareBackend::AssPpa => {
            let diff: Vec<u32> = x
                .iter()
                .map(|v| if ctx.is_p1() { v.wrapping_sub(c) } else { *v })
                .collect();
            let msb = msb_extract(ctx, &diff);
            flip_bits(ctx.party, &msb)
        }
    }
}
