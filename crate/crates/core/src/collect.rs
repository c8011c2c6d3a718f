//! Server-side collection phase: DPF-based degree histogram estimation,
//! secure binning-map generation, and assembly of the shared sparse
//! adjacency matrix from per-user share files.

use crate::compare::{ge_const, CompareBackend};
use crate::dealer::PartyCtx;
use crate::fss::{dpf_eval, dpf_gen, DpfKey};
use crate::shares::{flip_bits, mul_bin_arith};
use rand::RngCore;

/// Domain bit-width covering degrees `1..=d_max` (degree d maps to point
/// d-1).
pub fn histogram_domain_bits(d_max: u32) -> u32 {
    assert!(d_max >= 1);
    (32 - (d_max - 1).leading_zeros()).max(1)
}

/// Client-side contribution: one serialized DPF key per server encoding a
/// one-hot at the user's degree. Degrees outside `[1, d_max]` are clamped
/// into range before key generation.
pub fn gen_degree_keys(degree: u32, d_max: u32, rng: &mut impl RngCore) -> (Vec<u8>, Vec<u8>) {
    let d = degree.clamp(1, d_max);
    let n = histogram_domain_bits(d_max);
    let (k1, k2) = dpf_gen((d - 1) as u64, 1, n, rng).expect("domain covers clamped degree");
    (k1.to_bytes(), k2.to_bytes())
}

/// One party's additive shares of the degree histogram; `counts[i]` is the
/// share of the number of sampled users with degree `i + 1`.
#[derive(Debug, Clone)]
pub struct SharedHistogram {
    pub d_max: u32,
    pub counts: Vec<u32>,
    /// Users whose keys were malformed and skipped.
    pub rejected: usize,
}

/// Tallies the sampled users' DPF keys into a shared histogram. Purely
/// local: the servers exchange nothing in this step. Malformed keys (or
/// keys for the wrong domain or party) drop that user's contribution.
pub fn estimate_histogram(ctx: &PartyCtx, keys: &[Vec<u8>], d_max: u32) -> SharedHistogram {
    let n_bits = histogram_domain_bits(d_max);
    let mut counts = vec![0u32; d_max as usize];
    let mut rejected = 0usize;
    for raw in keys {
        let key = match DpfKey::from_bytes(raw) {
            Ok(k) if k.n == n_bits && k.party as usize == ctx.party.idx() + 1 => k,
            _ => {
                rejected += 1;
                continue;
            }
        };
        for (i, c) in counts.iter_mut().enumerate() {
            *c = c.wrapping_add(dpf_eval(&key, i as u64));
        }
    }
    ctx.chan
        .add_local_ops(ctx.party, keys.len() as u64 * d_max as u64);
    SharedHistogram {
        d_max,
        counts,
        rejected,
    }
}

/// Bin budget per bin: floor(S/B), floored at 1 so boundaries can fire even
/// for tiny samples.
pub fn bin_size(s: u32, b: u32) -> u32 {
    (s / b).max(1)
}

/// Plaintext reference of the binning loop: accumulate counts degree by
/// degree, mark a boundary when the accumulator reaches the bin budget, and
/// reset it at each boundary.
pub fn plain_binning(hist: &[u32], s: u32, b: u32) -> Vec<bool> {
    let size_b = bin_size(s, b);
    let mut accu = 0u32;
    hist.iter()
        .map(|&d| {
            accu = accu.wrapping_add(d);
            let boundary = accu >= size_b;
            if boundary {
                accu = 0;
            }
            boundary
        })
        .collect()
}

/// Secure binning-map generation: per degree, one secure comparison of the
/// shared accumulator against the public bin budget, then an oblivious
/// accumulator reset by multiplying with the flipped boundary bit. Returns
/// binary shares of the `d_max` boundary bits.
pub fn generate_binning_map(
    ctx: &PartyCtx,
    hist: &SharedHistogram,
    b: u32,
    s: u32,
    backend: CompareBackend,
) -> Vec<bool> {
    assert!(b >= 1 && s >= b, "need B >= 1 and S >= B");
    let size_b = bin_size(s, b);
    let mut accu = 0u32;
    let mut inter = Vec::with_capacity(hist.counts.len());
    for &d in &hist.counts {
        accu = accu.wrapping_add(d);
        let bit = ge_const(ctx, &[accu], size_b, backend)[0];
        let keep = flip_bits(ctx.party, &[bit]);
        accu = mul_bin_arith(ctx, "bin.reset", &keep, &[accu])[0];
        inter.push(bit);
    }
    inter
}

/// One party's half of the collected sparse adjacency: COO triples carrying
/// 64-bit arithmetic weight shares. Rows that violated per-row column
/// uniqueness were dropped wholesale (both parties see identical positions,
/// so they agree on the drops).
#[derive(Debug, Clone)]
pub struct SharedSparseAdjacency {
    pub n: u32,
    pub triples: Vec<(u32, u32, u64)>,
    pub rejected_rows: Vec<u32>,
}

/// Concatenates per-user share records into the shared adjacency,
/// preserving arrival order within rows (clients already shuffled their
/// entries). A row with a repeated column or an out-of-range index is
/// rejected in full.
pub fn assemble_adjacency(records: &[(u32, u32, u64)], n: u32) -> SharedSparseAdjacency {
    let mut seen: std::collections::HashMap<u32, std::collections::HashSet<u32>> =
        std::collections::HashMap::new();
    let mut bad: std::collections::BTreeSet<u32> = std::collections::BTreeSet::new();
    for &(i, j, _) in records {
        if i >= n || j >= n {
            bad.insert(i);
            continue;
        }
        if !seen.entry(i).or_default().insert(j) {
            bad.insert(i);
        }
    }
    let triples = records
        .iter()
        .filter(|(i, _, _)| !bad.contains(i))
        .copied()
        .collect();
    SharedSparseAdjacency {
        n,
        triples,
        rejected_rows: bad.into_iter().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shares::reconstruct;
    use crate::shares::ArithShare;
    use crate::sim::{run_pair, Channel, Party, SimMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn run_both<T: Send + 'static>(
        f: impl Fn(PartyCtx) -> T + Send + Sync + 'static,
    ) -> (T, T, std::sync::Arc<Channel>) {
        let chan = Channel::new(SimMode::Threaded, 0.0);
        chan.set_phase(Party::P1, "collect");
        chan.set_phase(Party::P2, "collect");
        let (c1, c2) = PartyCtx::pair(&chan, 77);
        let f = std::sync::Arc::new(f);
        let g = f.clone();
        let (a, b) = run_pair(&chan, move || f(c1), move || g(c2));
        (a, b, chan)
    }

    fn keys_for(degrees: &[u32], d_max: u32, seed: u64) -> (Vec<Vec<u8>>, Vec<Vec<u8>>) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut k1 = Vec::new();
        let mut k2 = Vec::new();
        for &d in degrees {
            let (a, b) = gen_degree_keys(d, d_max, &mut rng);
            k1.push(a);
            k2.push(b);
        }
        (k1, k2)
    }

    fn open_hist(h1: &SharedHistogram, h2: &SharedHistogram) -> Vec<u32> {
        h1.counts
            .iter()
            .zip(&h2.counts)
            .map(|(&a, &b)| a.wrapping_add(b))
            .collect()
    }

    #[test]
    fn domain_bits() {
        assert_eq!(histogram_domain_bits(1), 1);
        assert_eq!(histogram_domain_bits(2), 1);
        assert_eq!(histogram_domain_bits(3), 2);
        assert_eq!(histogram_domain_bits(8), 3);
        assert_eq!(histogram_domain_bits(9), 4);
        assert_eq!(histogram_domain_bits(2048), 11);
    }

    #[test]
    fn single_user_one_hot() {
        let (k1, k2) = keys_for(&[3], 8, 1);
        let (h1, h2, chan) = run_both(move |ctx| {
            let keys = if ctx.is_p1() { &k1 } else { &k2 };
            estimate_histogram(&ctx, keys, 8)
        });
        assert_eq!(open_hist(&h1, &h2), vec![0, 0, 1, 0, 0, 0, 0, 0]);
        // Algorithm 3 exchanges nothing
        let st = chan.phase_stats("collect");
        assert_eq!(st.bytes, [0, 0]);
        assert_eq!(st.rounds, 0);
        assert!(st.local_ops[0] > 0);
    }

    #[test]
    fn histogram_matches_plaintext_tally() {
        let d_max = 40u32;
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let degrees: Vec<u32> = (0..100).map(|_| rng.gen_range(1..=d_max)).collect();
        let mut want = vec![0u32; d_max as usize];
        for &d in &degrees {
            want[(d - 1) as usize] += 1;
        }
        let (k1, k2) = keys_for(&degrees, d_max, 10);
        let (h1, h2, _) = run_both(move |ctx| {
            let keys = if ctx.is_p1() { &k1 } else { &k2 };
            estimate_histogram(&ctx, keys, d_max)
        });
        let opened = open_hist(&h1, &h2);
        assert_eq!(opened, want);
        assert_eq!(opened.iter().sum::<u32>(), 100); // mass conservation
    }

    #[test]
    fn degrees_above_dmax_clamp() {
        let (k1, k2) = keys_for(&[500, 1], 4, 2);
        let (h1, h2, _) = run_both(move |ctx| {
            let keys = if ctx.is_p1() { &k1 } else { &k2 };
            estimate_histogram(&ctx, keys, 4)
        });
        assert_eq!(open_hist(&h1, &h2), vec![1, 0, 0, 1]);
    }

    #[test]
    fn malformed_keys_rejected_not_fatal() {
        let (mut k1, mut k2) = keys_for(&[2, 5], 8, 3);
        // garbage bytes, a truncated key, and a key for the wrong domain
        k1.push(vec![0xAB; 10]);
        k2.push(vec![0xAB; 10]);
        let mut trunc = k1[0].clone();
        trunc.truncate(trunc.len() - 3);
        k1.push(trunc.clone());
        k2.push(trunc);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let (w1, w2) = gen_degree_keys(1, 128, &mut rng);
        k1.push(w1);
        k2.push(w2);
        let (h1, h2, _) = run_both(move |ctx| {
            let keys = if ctx.is_p1() { &k1 } else { &k2 };
            estimate_histogram(&ctx, keys, 8)
        });
        assert_eq!(h1.rejected, 3);
        assert_eq!(h2.rejected, 3);
        assert_eq!(open_hist(&h1, &h2), vec![0, 1, 0, 0, 1, 0, 0, 0]);
    }

    fn shared_hist(hist: &[u32], seed: u64) -> (SharedHistogram, SharedHistogram) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut c1 = Vec::new();
        let mut c2 = Vec::new();
        for &v in hist {
            let (a, b): (ArithShare<u32>, _) = crate::shares::share(v, &mut rng);
            c1.push(a.value);
            c2.push(b.value);
        }
        let mk = |counts| SharedHistogram {
            d_max: hist.len() as u32,
            counts,
            rejected: 0,
        };
        (mk(c1), mk(c2))
    }

    fn run_binning(
        hist: &[u32],
        s: u32,
        b: u32,
        backend: CompareBackend,
        seed: u64,
    ) -> Vec<bool> {
        let (h1, h2) = shared_hist(hist, seed);
        let (b1, b2, _) = run_both(move |ctx| {
            let h = if ctx.is_p1() { &h1 } else { &h2 };
            generate_binning_map(&ctx, h, b, s, backend)
        });
        b1.iter().zip(&b2).map(|(x, y)| x ^ y).collect()
    }

    #[test]
    fn uniform_histogram_regular_boundaries() {
        // D_i = S/d_max with B dividing evenly: boundary every d_max/B degrees
        let d_max = 12;
        let s = 48u32;
        let b = 4u32;
        let hist = vec![s / d_max as u32; d_max];
        let plain = plain_binning(&hist, s, b);
        for (i, &bit) in plain.iter().enumerate() {
            assert_eq!(bit, (i + 1) % (d_max / b as usize) == 0, "degree {}", i + 1);
        }
        assert_eq!(run_binning(&hist, s, b, CompareBackend::Fss, 5), plain);
    }

    #[test]
    fn single_bin_boundary_at_cumulative_s() {
        let hist = [3u32, 4, 2, 1, 0, 0];
        let s = 10u32;
        let plain = plain_binning(&hist, s, 1);
        // first index where the cumulative count reaches S
        assert_eq!(plain, vec![false, false, false, true, false, false]);
        assert_eq!(run_binning(&hist, s, 1, CompareBackend::AssPpa, 6), plain);
    }

    #[test]
    fn binning_oracle_equivalence_both_backends() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        for trial in 0..20 {
            let d_max = rng.gen_range(4..=24);
            let hist: Vec<u32> = (0..d_max).map(|_| rng.gen_range(0..12)).collect();
            let s: u32 = hist.iter().sum::<u32>().max(2);
            let b = rng.gen_range(1..=s.min(6));
            let plain = plain_binning(&hist, s, b);
            for backend in [CompareBackend::Fss, CompareBackend::AssPpa] {
                let got = run_binning(&hist, s, b, backend, 100 + trial);
                assert_eq!(got, plain, "trial {trial} backend {backend:?}");
            }
        }
    }

    #[test]
    fn binning_round_counts_favor_fss() {
        let hist = vec![1u32; 8];
        let rounds = |backend| {
            let (h1, h2) = shared_hist(&hist, 50);
            let (_, _, chan) = run_both(move |ctx| {
                let h = if ctx.is_p1() { &h1 } else { &h2 };
                generate_binning_map(&ctx, h, 2, 8, backend)
            });
            chan.phase_stats("collect").rounds
        };
        let fss = rounds(CompareBackend::Fss);
        let ass = rounds(CompareBackend::AssPpa);
        // per degree: 1 vs 6 comparison rounds plus the 2-round reset mux
        assert_eq!(fss, 8 * 3);
        assert_eq!(ass, 8 * 8);
    }

    #[test]
    fn assemble_toy_graph_reconstructs() {
        let mut rng = ChaCha12Rng::seed_from_u64(20);
        // true edges (0,1)=1 and (1,0)=1, plus a dummy (0,2)=0
        let plain = [(0u32, 1u32, 1u64), (0, 2, 0), (1, 0, 1)];
        let mut r1 = Vec::new();
        let mut r2 = Vec::new();
        for &(i, j, w) in &plain {
            let (a, b) = crate::shares::share(w, &mut rng);
            r1.push((i, j, a.value));
            r2.push((i, j, b.value));
        }
        let a1 = assemble_adjacency(&r1, 3);
        let a2 = assemble_adjacency(&r2, 3);
        assert!(a1.rejected_rows.is_empty());
        assert_eq!(a1.triples.len(), 3); // conservation
        let mut dense = vec![0u64; 9];
        for (t1, t2) in a1.triples.iter().zip(&a2.triples) {
            assert_eq!((t1.0, t1.1), (t2.0, t2.1));
            dense[(t1.0 * 3 + t1.1) as usize] = reconstruct(
                ArithShare { party: Party::P1, value: t1.2 },
                ArithShare { party: Party::P2, value: t2.2 },
            );
        }
        assert_eq!(dense, vec![0, 1, 0, 1, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn assemble_rejects_duplicate_and_out_of_range_rows() {
        let recs = [
            (0u32, 1u32, 5u64),
            (1, 0, 7),
            (1, 0, 9), // duplicate column in row 1
            (2, 99, 1), // column out of range
        ];
        let a = assemble_adjacency(&recs, 3);
        assert_eq!(a.rejected_rows, vec![1, 2]);
        assert_eq!(a.triples, vec![(0, 1, 5)]);
        let empty = assemble_adjacency(&[], 5);
        assert_eq!(empty.n, 5);
        assert!(empty.triples.is_empty());
    }
}
