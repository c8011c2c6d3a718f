//! Trusted offline dealer: Beaver triples, correlated triple batches,
//! truncation and lifting pairs, OT correlations, and comparison gates.
//!
//! Material is generated deterministically from a seed, in request order, and
//! every item is issued to each party exactly once. Both parties must request
//! the same item kinds with the same parameters in the same order; a mismatch
//! is a protocol bug and panics.

use crate::fss::{cmp_gen, CmpGateShare};
use crate::ring::Ring;
use crate::sim::{Channel, Party};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::fmt::Debug;
use std::sync::{Arc, Mutex};

/// One party's half of a matrix Beaver triple with `Z = X·Y`.
#[derive(Debug, Clone)]
pub struct MatTriple<R> {
    pub x: Vec<R>,
    pub y: Vec<R>,
    pub z: Vec<R>,
}

/// One party's half of a batch of binary AND triples, `c = a & b`.
#[derive(Debug, Clone)]
pub struct BitTriples {
    pub a: Vec<bool>,
    pub b: Vec<bool>,
    pub c: Vec<bool>,
}

/// Shares of a random `r` together with shares of `floor(r / 2^t)`.
#[derive(Debug, Clone)]
pub struct TruncPairs {
    pub r: Vec<u128>,
    pub r_shifted: Vec<u128>,
}

/// Shares of the same random `r < 2^63` in both the 64- and 128-bit rings.
#[derive(Debug, Clone)]
pub struct LiftPairs {
    pub r64: Vec<u64>,
    pub r128: Vec<u128>,
}

/// Random-OT correlations for a batch of binary-by-arithmetic products.
///
/// For each instance the party holds sender material for the term it owns
/// (two pads and an output mask) and receiver material for the peer's term
/// (a random choice bit and the pad matching it).
#[derive(Debug, Clone)]
pub struct OtBatch {
    pub send_pads: Vec<[u32; 2]>,
    pub send_mask: Vec<u32>,
    pub recv_choice: Vec<bool>,
    pub recv_pad: Vec<u32>,
}

/// Which side of each product the shared mask `X` sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskSide {
    /// `Z_j = X · Y_j`
    Left,
    /// `Z_j = Y_j · X`
    Right,
}

/// Shape request for a correlated batch: one `p×q` mask reused across
/// products against `Y_j` matrices of the given dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrShape {
    pub p: usize,
    pub q: usize,
    /// (side, rows, cols) of each Y_j.
    pub ys: Vec<(MaskSide, usize, usize)>,
}

/// One party's half of a correlated triple batch sharing the mask `X`.
#[derive(Debug, Clone)]
pub struct CorrBatch {
    pub x: Vec<u128>,
    pub ys: Vec<Vec<u128>>,
    pub zs: Vec<Vec<u128>>,
}

struct Inventory<P: PartialEq + Debug, T> {
    rng: ChaCha12Rng,
    items: Vec<(P, [Option<T>; 2])>,
    cursor: [usize; 2],
}

impl<P: PartialEq + Debug, T> Inventory<P, T> {
    fn new(master_seed: u64, kind: &str) -> Self {
        // independent deterministic stream per item kind
        let mut h = 0xcbf29ce484222325u64;
        for b in kind.bytes() {
            h = (h ^ b as u64).wrapping_mul(0x100000001b3);
        }
        Inventory {
            rng: ChaCha12Rng::seed_from_u64(master_seed ^ h),
            items: Vec::new(),
            cursor: [0, 0],
        }
    }

    fn take(
        &mut self,
        party: Party,
        params: P,
        gen: impl FnOnce(&mut ChaCha12Rng, &P) -> (T, T),
    ) -> T {
        let idx = self.cursor[party.idx()];
        if idx == self.items.len() {
            let pair = gen(&mut self.rng, &params);
            self.items.push((params, [Some(pair.0), Some(pair.1)]));
        } else {
            assert_eq!(
                self.items[idx].0, params,
                "parties disagree on dealer request parameters at index {idx}"
            );
        }
        self.cursor[party.idx()] += 1;
        self.items[idx].1[party.idx()]
            .take()
            .expect("dealer item issued twice to the same party")
    }
}

fn split<R: Ring>(secret: R, rng: &mut ChaCha12Rng) -> (R, R) {
    let s1 = random_el::<R>(rng);
    (s1, secret.wrapping_sub(s1))
}

fn random_el<R: Ring>(rng: &mut ChaCha12Rng) -> R {
    let lo = rng.next_u64();
    if R::BITS > 64 {
        let hi = rng.next_u64();
        R::from_u128(((hi as u128) << 64) | lo as u128)
    } else {
        R::from_u64(lo)
    }
}

fn split_vec<R: Ring>(secret: &[R], rng: &mut ChaCha12Rng) -> (Vec<R>, Vec<R>) {
    let mut a = Vec::with_capacity(secret.len());
    let mut b = Vec::with_capacity(secret.len());
    for &s in secret {
        let (x, y) = split(s, rng);
        a.push(x);
        b.push(y);
    }
    (a, b)
}

fn random_vec<R: Ring>(n: usize, rng: &mut ChaCha12Rng) -> Vec<R> {
    (0..n).map(|_| random_el::<R>(rng)).collect()
}

/// Row-major matrix product in the ring, `a` is `n×m`, `b` is `m×k`.
pub fn mat_mul<R: Ring>(a: &[R], b: &[R], n: usize, m: usize, k: usize) -> Vec<R> {
    assert_eq!(a.len(), n * m);
    assert_eq!(b.len(), m * k);
    let mut out = vec![R::ZERO; n * k];
    for i in 0..n {
        for l in 0..m {
            let av = a[i * m + l];
            if av == R::ZERO {
                continue;
            }
            for j in 0..k {
                out[i * k + j] = out[i * k + j].wrapping_add(av.wrapping_mul(b[l * k + j]));
            }
        }
    }
    out
}

fn gen_triple<R: Ring>(
    rng: &mut ChaCha12Rng,
    n: usize,
    m: usize,
    k: usize,
) -> (MatTriple<R>, MatTriple<R>) {
    let x = random_vec::<R>(n * m, rng);
    let y = random_vec::<R>(m * k, rng);
    let z = mat_mul(&x, &y, n, m, k);
    let (x1, x2) = split_vec(&x, rng);
    let (y1, y2) = split_vec(&y, rng);
    let (z1, z2) = split_vec(&z, rng);
    (
        MatTriple { x: x1, y: y1, z: z1 },
        MatTriple { x: x2, y: y2, z: z2 },
    )
}

pub struct DealerCore {
    beaver64: Inventory<(usize, usize, usize), MatTriple<u64>>,
    beaver128: Inventory<(usize, usize, usize), MatTriple<u128>>,
    elem128: Inventory<usize, MatTriple<u128>>,
    corr128: Inventory<CorrShape, CorrBatch>,
    bin_and: Inventory<usize, BitTriples>,
    trunc: Inventory<(usize, u32), TruncPairs>,
    lift: Inventory<usize, LiftPairs>,
    ot: Inventory<usize, OtBatch>,
    cmp: Inventory<(u32, u64), CmpGateShare>,
}

impl DealerCore {
    pub fn new(seed: u64) -> Self {
        DealerCore {
            beaver64: Inventory::new(seed, "beaver64"),
            beaver128: Inventory::new(seed, "beaver128"),
            elem128: Inventory::new(seed, "elem128"),
            corr128: Inventory::new(seed, "corr128"),
            bin_and: Inventory::new(seed, "bin-and"),
            trunc: Inventory::new(seed, "trunc"),
            lift: Inventory::new(seed, "lift"),
            ot: Inventory::new(seed, "ot"),
            cmp: Inventory::new(seed, "cmp"),
        }
    }

    pub fn beaver64(&mut self, party: Party, n: usize, m: usize, k: usize) -> MatTriple<u64> {
        self.beaver64
            .take(party, (n, m, k), |rng, &(n, m, k)| gen_triple(rng, n, m, k))
    }

    pub fn beaver128(&mut self, party: Party, n: usize, m: usize, k: usize) -> MatTriple<u128> {
        self.beaver128
            .take(party, (n, m, k), |rng, &(n, m, k)| gen_triple(rng, n, m, k))
    }

    /// Triples for a batch of independent elementwise products, `z = x ∘ y`.
    pub fn elem128(&mut self, party: Party, n: usize) -> MatTriple<u128> {
        self.elem128.take(party, n, |rng, &n| {
            let x = random_vec::<u128>(n, rng);
            let y = random_vec::<u128>(n, rng);
            let z: Vec<u128> = x
                .iter()
                .zip(&y)
                .map(|(a, b)| a.wrapping_mul(*b))
                .collect();
            let (x1, x2) = split_vec(&x, rng);
            let (y1, y2) = split_vec(&y, rng);
            let (z1, z2) = split_vec(&z, rng);
            (
                MatTriple { x: x1, y: y1, z: z1 },
                MatTriple { x: x2, y: y2, z: z2 },
            )
        })
    }

    pub fn correlated128(&mut self, party: Party, shape: CorrShape) -> CorrBatch {
        self.corr128.take(party, shape, |rng, shape| {
            let x = random_vec::<u128>(shape.p * shape.q, rng);
            let mut ys = Vec::new();
            let mut zs = Vec::new();
            for &(side, rows, cols) in &shape.ys {
                let y = random_vec::<u128>(rows * cols, rng);
                let z = match side {
                    MaskSide::Left => {
                        assert_eq!(shape.q, rows);
                        mat_mul(&x, &y, shape.p, shape.q, cols)
                    }
                    MaskSide::Right => {
                        assert_eq!(cols, shape.p);
                        mat_mul(&y, &x, rows, shape.p, shape.q)
                    }
                };
                ys.push(y);
                zs.push(z);
            }
            let (x1, x2) = split_vec(&x, rng);
            let mut b1 = CorrBatch { x: x1, ys: Vec::new(), zs: Vec::new() };
            let mut b2 = CorrBatch { x: x2, ys: Vec::new(), zs: Vec::new() };
            for (y, z) in ys.iter().zip(zs.iter()) {
                let (y1, y2) = split_vec(y, rng);
                let (z1, z2) = split_vec(z, rng);
                b1.ys.push(y1);
                b1.zs.push(z1);
                b2.ys.push(y2);
                b2.zs.push(z2);
            }
            (b1, b2)
        })
    }

    pub fn bin_and(&mut self, party: Party, n: usize) -> BitTriples {
        self.bin_and.take(party, n, |rng, &n| {
            let mut t1 = BitTriples { a: vec![], b: vec![], c: vec![] };
            let mut t2 = BitTriples { a: vec![], b: vec![], c: vec![] };
            for _ in 0..n {
                let a1 = rng.gen::<bool>();
                let a2 = rng.gen::<bool>();
                let b1 = rng.gen::<bool>();
                let b2 = rng.gen::<bool>();
                let c1 = rng.gen::<bool>();
                let c2 = c1 ^ ((a1 ^ a2) & (b1 ^ b2));
                t1.a.push(a1);
                t1.b.push(b1);
                t1.c.push(c1);
                t2.a.push(a2);
                t2.b.push(b2);
                t2.c.push(c2);
            }
            (t1, t2)
        })
    }

    pub fn trunc_pairs(&mut self, party: Party, n: usize, t: u32) -> TruncPairs {
        self.trunc.take(party, (n, t), |rng, &(n, t)| {
            let mut p1 = TruncPairs { r: vec![], r_shifted: vec![] };
            let mut p2 = TruncPairs { r: vec![], r_shifted: vec![] };
            for _ in 0..n {
                // r stays below 2^127 so the masked opening cannot wrap
                let r = random_el::<u128>(rng) >> 1;
                let (r1, r2) = split(r, rng);
                let (s1, s2) = split(r >> t, rng);
                p1.r.push(r1);
                p1.r_shifted.push(s1);
                p2.r.push(r2);
                p2.r_shifted.push(s2);
            }
            (p1, p2)
        })
    }

    pub fn lift_pairs(&mut self, party: Party, n: usize) -> LiftPairs {
        self.lift.take(party, n, |rng, &n| {
            let mut p1 = LiftPairs { r64: vec![], r128: vec![] };
            let mut p2 = LiftPairs { r64: vec![], r128: vec![] };
            for _ in 0..n {
                let r = rng.next_u64() >> 1;
                let (a1, a2) = split::<u64>(r, rng);
                let (b1, b2) = split::<u128>(r as u128, rng);
                p1.r64.push(a1);
                p1.r128.push(b1);
                p2.r64.push(a2);
                p2.r128.push(b2);
            }
            (p1, p2)
        })
    }

    pub fn ot_batch(&mut self, party: Party, n: usize) -> OtBatch {
        self.ot.take(party, n, |rng, &n| {
            let empty = || OtBatch {
                send_pads: vec![],
                send_mask: vec![],
                recv_choice: vec![],
                recv_pad: vec![],
            };
            let mut b1 = empty();
            let mut b2 = empty();
            // two independent OT instances per product, one per direction
            let fill = |s: &mut OtBatch, r: &mut OtBatch, rng: &mut ChaCha12Rng| {
                for _ in 0..n {
                    let pads = [rng.next_u32(), rng.next_u32()];
                    let mask = rng.next_u32();
                    let c = rng.gen::<bool>();
                    s.send_pads.push(pads);
                    s.send_mask.push(mask);
                    r.recv_choice.push(c);
                    r.recv_pad.push(pads[c as usize]);
                }
            };
            fill(&mut b1, &mut b2, rng);
            fill(&mut b2, &mut b1, rng);
            (b1, b2)
        })
    }

    pub fn cmp_gate(&mut self, party: Party, l: u32, threshold: u64) -> CmpGateShare {
        self.cmp
            .take(party, (l, threshold), |rng, &(l, threshold)| {
                cmp_gen(threshold, l, rng).expect("valid comparison parameters")
            })
    }
}

/// Everything one party needs to participate in the protocol.
#[derive(Clone)]
pub struct PartyCtx {
    pub party: Party,
    pub chan: Arc<Channel>,
    pub dealer: Arc<Mutex<DealerCore>>,
}

impl PartyCtx {
    pub fn pair(chan: &Arc<Channel>, dealer_seed: u64) -> (PartyCtx, PartyCtx) {
        let dealer = Arc::new(Mutex::new(DealerCore::new(dealer_seed)));
        (
            PartyCtx {
                party: Party::P1,
                chan: chan.clone(),
                dealer: dealer.clone(),
            },
            PartyCtx {
                party: Party::P2,
                chan: chan.clone(),
                dealer,
            },
        )
    }

    pub fn is_p1(&self) -> bool {
        self.party.is_p1()
    }
}
