//! Shared fixtures for the criterion benchmarks.

use eigenshare_core::shares::share;
use eigenshare_core::sim::{run_pair, Channel, Party, SimMode};
use eigenshare_core::{encode128, PartyCtx, FRAC_BITS};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::sync::Arc;

/// Runs the same closure as both parties over a fresh zero-latency channel.
pub fn run_both<T: Send + 'static>(
    seed: u64,
    f: impl Fn(PartyCtx) -> T + Send + Sync + 'static,
) -> (T, T) {
    let chan = Channel::new(SimMode::Threaded, 0.0);
    chan.set_phase(Party::P1, "bench");
    chan.set_phase(Party::P2, "bench");
    let (c1, c2) = PartyCtx::pair(&chan, seed);
    let f = Arc::new(f);
    let g = f.clone();
    run_pair(&chan, move || f(c1), move || g(c2))
}

/// Random fixed-point upper-Hessenberg share pair with a dominant diagonal.
pub fn hessenberg_shares(m: usize, seed: u64) -> (Vec<u128>, Vec<u128>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut s1 = vec![0u128; m * m];
    let mut s2 = vec![0u128; m * m];
    for i in 0..m {
        for j in 0..m {
            let v = if j + 1 >= i {
                rng.gen_range(-0.1..0.1) + if i == j { 0.3 } else { 0.0 }
            } else {
                0.0
            };
            let (a, b) = share(encode128(v, FRAC_BITS).unwrap(), &mut rng);
            s1[i * m + j] = a.value;
            s2[i * m + j] = b.value;
        }
    }
    (s1, s2)
}

/// Random 32-bit operand shares for comparison benchmarks.
pub fn u32_shares(n: usize, seed: u64) -> (Vec<u32>, Vec<u32>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (a, b) = share(rng.next_u32() >> 1, &mut rng);
            (a.value, b.value)
        })
        .unzip()
}
