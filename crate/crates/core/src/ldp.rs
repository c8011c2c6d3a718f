//! User-side local differential privacy: the truncated discrete Laplace
//! mechanism over degrees, bin resolution, dummy-edge insertion, and local
//! view encryption.

use crate::shares::share;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use std::collections::HashSet;
use std::io::{Read, Write};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LdpError {
    #[error("degree {0} outside [1, {1}]")]
    DegreeOutOfRange(u32, u32),
    #[error("binning map must be a nonempty string over {{0,1}}")]
    BadMapString,
    #[error("invalid privacy parameters: {0}")]
    BadParams(&'static str),
    #[error("share file i/o: {0}")]
    Io(String),
    #[error("share file malformed: {0}")]
    Malformed(&'static str),
}

/// Mean of the truncated discrete Laplace noise for budget `(epsilon,
/// delta)` and sensitivity `sens`, clamped at zero when the formula goes
/// negative (large delta means no offset is needed).
pub fn lap_mu(epsilon: f64, delta: f64, sens: u32) -> Result<f64, LdpError> {
    if !(epsilon > 0.0) {
        return Err(LdpError::BadParams("epsilon must be positive"));
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(LdpError::BadParams("delta must be in (0,1)"));
    }
    if sens == 0 {
        return Ok(0.0);
    }
    let d = sens as f64;
    let inner = ((epsilon / d).exp() + 1.0) * (1.0 - (1.0 - delta).powf(1.0 / d));
    Ok((-d * inner.ln() / epsilon).max(0.0))
}

/// Parameters of one user's noise distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LapParams {
    pub epsilon: f64,
    pub delta: f64,
    pub sens: u32,
    /// Mean from the closed-form formula.
    pub mu: f64,
    /// Integer sampling mean `ceil(mu)`. Rounding the mean up adds noise
    /// (never weakens privacy) and makes the truncation-probability bound
    /// exact for fractional means, where the exact pmf centered at `mu`
    /// would exceed it slightly.
    pub mu_int: i64,
}

impl LapParams {
    pub fn new(epsilon: f64, delta: f64, sens: u32) -> Result<Self, LdpError> {
        let mu = lap_mu(epsilon, delta, sens)?;
        Ok(LapParams {
            epsilon,
            delta,
            sens,
            mu,
            mu_int: mu.ceil() as i64,
        })
    }

    /// `e^{-epsilon/sens}`, the geometric decay rate of the pmf.
    pub fn decay(&self) -> f64 {
        if self.sens == 0 {
            0.0
        } else {
            (-self.epsilon / self.sens as f64).exp()
        }
    }

    /// Analytic pmf of the sampler at integer `x` (before truncation).
    pub fn pmf(&self, x: i64) -> f64 {
        if self.sens == 0 {
            return if x == self.mu_int { 1.0 } else { 0.0 };
        }
        let a = self.decay();
        let z = (1.0 + a) / (1.0 - a);
        a.powi((x - self.mu_int).unsigned_abs() as i32) / z
    }

    /// Analytic probability that a draw is negative (and hence truncated).
    pub fn truncation_probability(&self) -> f64 {
        if self.sens == 0 {
            return 0.0;
        }
        let a = self.decay();
        a.powi(self.mu_int as i32 + 1) / (1.0 + a)
    }
}

/// One draw from the discrete Laplace pmf `Pr[x] ∝ a^{|x−mu_int|}`.
///
/// Exact two-branch sampling: pick the side of the center by its total mass,
/// then a geometric offset. A width-0 sensitivity degenerates to no noise.
pub fn sample_discrete_laplace(params: &LapParams, rng: &mut impl RngCore) -> i64 {
    if params.sens == 0 {
        return params.mu_int;
    }
    let a = params.decay();
    let geo = |rng: &mut dyn RngCore| -> i64 {
        // floor(ln U / ln a) is geometric with success probability 1-a
        let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        (u.ln() / a.ln()).floor() as i64
    };
    // upper side {m, m+1, ...} has mass 1/(1-a); lower side {m-1, m-2, ...}
    // has mass a/(1-a)
    if rng.gen_range(0.0..1.0) < 1.0 / (1.0 + a) {
        params.mu_int + geo(rng)
    } else {
        params.mu_int - 1 - geo(rng)
    }
}

// ---------------------------------------------------------------------------
// binning map
// ---------------------------------------------------------------------------

/// A bit-string over degrees `[1, d_max]` whose 1-bits mark bin upper
/// boundaries; the final bin always ends at `d_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinningMap {
    bits: Vec<bool>,
}

impl BinningMap {
    pub fn from_bits(bits: Vec<bool>) -> Result<Self, LdpError> {
        if bits.is_empty() {
            return Err(LdpError::BadMapString);
        }
        Ok(BinningMap { bits })
    }

    pub fn from_bit_string(s: &str) -> Result<Self, LdpError> {
        let s = s.trim();
        if s.is_empty() || !s.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(LdpError::BadMapString);
        }
        Ok(BinningMap {
            bits: s.bytes().map(|b| b == b'1').collect(),
        })
    }

    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn d_max(&self) -> u32 {
        self.bits.len() as u32
    }

    /// Bin intervals `[L, U]`, in order, partitioning `[1, d_max]`.
    pub fn intervals(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        let mut lo = 1u32;
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                out.push((lo, i as u32 + 1));
                lo = i as u32 + 2;
            }
        }
        if lo <= self.d_max() {
            out.push((lo, self.d_max()));
        }
        out
    }

    /// The interval containing degree `d` and its width (the sensitivity).
    pub fn resolve_bin(&self, d: u32) -> Result<(u32, u32, u32), LdpError> {
        if d == 0 || d > self.d_max() {
            return Err(LdpError::DegreeOutOfRange(d, self.d_max()));
        }
        for (lo, hi) in self.intervals() {
            if (lo..=hi).contains(&d) {
                return Ok((lo, hi, hi - lo));
            }
        }
        unreachable!("intervals partition the domain")
    }
}

// ---------------------------------------------------------------------------
// local view encryption
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LocalViewEntry {
    pub col: u32,
    pub share1: u64,
    pub share2: u64,
    /// Test-only provenance; never serialized or sent.
    pub is_dummy: bool,
}

#[derive(Debug, Clone)]
pub struct LocalView {
    pub row: u32,
    pub true_degree: u32,
    pub noisy_count: u32,
    /// True when the noise draw exceeded the empty columns available.
    pub capped: bool,
    pub entries: Vec<LocalViewEntry>,
}

/// Algorithm: draw truncated noise for the user's bin, blend that many
/// zero-weight dummy edges at random empty columns, additively share every
/// weight, and shuffle so dummies are positionally indistinguishable.
pub fn encrypt_local_view(
    row: u32,
    true_edges: &[(u32, u64)],
    n_nodes: u32,
    map: &BinningMap,
    epsilon: f64,
    delta: f64,
    rng: &mut impl RngCore,
) -> Result<LocalView, LdpError> {
    let d = true_edges.len() as u32;
    debug_assert!(true_edges.iter().all(|&(j, _)| j != row && j < n_nodes));
    let (_, _, sens) = map.resolve_bin(d.clamp(1, map.d_max()))?;
    let params = LapParams::new(epsilon, delta, sens)?;
    let n_i = sample_discrete_laplace(&params, rng);
    let wanted = n_i.max(0) as u32;
    let available = n_nodes.saturating_sub(1 + d);
    let n_dummies = wanted.min(available);
    let mut used: HashSet<u32> = true_edges.iter().map(|&(j, _)| j).collect();
    used.insert(row);
    let mut entries: Vec<LocalViewEntry> = Vec::with_capacity((d + n_dummies) as usize);
    for &(j, w) in true_edges {
        let (s1, s2) = share(w, rng);
        entries.push(LocalViewEntry {
            col: j,
            share1: s1.value,
            share2: s2.value,
            is_dummy: false,
        });
    }
    for _ in 0..n_dummies {
        let col = loop {
            let c = rng.gen_range(0..n_nodes);
            if !used.contains(&c) {
                break c;
            }
        };
        used.insert(col);
        let (s1, s2) = share(0u64, rng);
        entries.push(LocalViewEntry {
            col,
            share1: s1.value,
            share2: s2.value,
            is_dummy: true,
        });
    }
    entries.shuffle(rng);
    Ok(LocalView {
        row,
        true_degree: d,
        noisy_count: entries.len() as u32,
        capped: wanted > available,
        entries,
    })
}

// ---------------------------------------------------------------------------
// share file format: count header, then (i: u32, j: u32, share: u64) records,
// all little-endian
// ---------------------------------------------------------------------------

pub fn write_share_records(
    mut w: impl Write,
    records: &[(u32, u32, u64)],
) -> Result<(), LdpError> {
    let io = |e: std::io::Error| LdpError::Io(e.to_string());
    w.write_all(&(records.len() as u64).to_le_bytes()).map_err(io)?;
    for &(i, j, s) in records {
        w.write_all(&i.to_le_bytes()).map_err(io)?;
        w.write_all(&j.to_le_bytes()).map_err(io)?;
        w.write_all(&s.to_le_bytes()).map_err(io)?;
    }
    Ok(())
}

pub fn read_share_records(mut r: impl Read) -> Result<Vec<(u32, u32, u64)>, LdpError> {
    let io = |e: std::io::Error| LdpError::Io(e.to_string());
    let mut hdr = [0u8; 8];
    r.read_exact(&mut hdr).map_err(io)?;
    let count = u64::from_le_bytes(hdr) as usize;
    let mut out = Vec::with_capacity(count.min(1 << 24));
    let mut rec = [0u8; 16];
    for _ in 0..count {
        r.read_exact(&mut rec).map_err(|_| LdpError::Malformed("truncated record"))?;
        out.push((
            u32::from_le_bytes(rec[0..4].try_into().unwrap()),
            u32::from_le_bytes(rec[4..8].try_into().unwrap()),
            u64::from_le_bytes(rec[8..16].try_into().unwrap()),
        ));
    }
    let mut tail = [0u8; 1];
    if r.read(&mut tail).map_err(io)? != 0 {
        return Err(LdpError::Malformed("trailing bytes"));
    }
    Ok(out)
}

/// One party's records for a batch of views.
pub fn view_records(views: &[LocalView], party1: bool) -> Vec<(u32, u32, u64)> {
    views
        .iter()
        .flat_map(|v| {
            v.entries.iter().map(move |e| {
                (v.row, e.col, if party1 { e.share1 } else { e.share2 })
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn mu_formula_values() {
        // independent high-precision evaluation: -ln((e+1)*0.05) = 1.68239...
        let mu = lap_mu(1.0, 0.05, 1).unwrap();
        assert!((mu - 1.682_39).abs() < 1e-4, "mu={mu}");
        // large delta drives the formula negative; clamped at zero
        assert_eq!(lap_mu(1.0, 0.9999, 1).unwrap(), 0.0);
        assert!(lap_mu(0.0, 0.05, 1).is_err());
        assert!(lap_mu(1.0, 1.5, 1).is_err());
    }

    #[test]
    fn truncation_bound_holds_analytically() {
        for delta in [0.05, 0.01, 1e-6] {
            for sens in [1u32, 10, 50] {
                let p = LapParams::new(1.0, delta, sens).unwrap();
                let bound = 1.0 - (1.0 - delta).powf(1.0 / sens as f64);
                assert!(
                    p.truncation_probability() <= bound * (1.0 + 1e-12),
                    "delta={delta} sens={sens}: {} > {bound}",
                    p.truncation_probability()
                );
                assert!(bound <= delta * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn sampler_matches_pmf_chi_square() {
        let params = LapParams::new(1.0, 0.05, 10).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let n = 200_000usize;
        let m = params.mu_int;
        let half_width = 40i64;
        let lo = m - half_width;
        let hi = m + half_width;
        let mut counts = vec![0u64; (hi - lo + 1) as usize + 2];
        for _ in 0..n {
            let x = sample_discrete_laplace(&params, &mut rng);
            let idx = if x < lo {
                0
            } else if x > hi {
                counts.len() - 1
            } else {
                (x - lo + 1) as usize
            };
            counts[idx] += 1;
        }
        let a = params.decay();
        let mut expected = vec![0.0f64; counts.len()];
        for x in lo..=hi {
            expected[(x - lo + 1) as usize] = params.pmf(x);
        }
        // pooled geometric tails
        let tail = a.powi(half_width as i32 + 1) / (1.0 + a);
        expected[0] = tail;
        *expected.last_mut().unwrap() = tail;
        let stat: f64 = counts
            .iter()
            .zip(&expected)
            .map(|(&o, &p)| {
                let e = p * n as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        let dof = counts.len() as f64 - 1.0;
        let crit = ChiSquared::new(dof).unwrap().inverse_cdf(0.99);
        assert!(stat < crit, "chi2 {stat} >= {crit}");
    }

    #[test]
    fn empirical_truncation_rate_below_delta() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for delta in [0.05, 0.01] {
            for sens in [1u32, 10, 50] {
                let params = LapParams::new(1.0, delta, sens).unwrap();
                let n = 100_000;
                let neg = (0..n)
                    .filter(|_| sample_discrete_laplace(&params, &mut rng) < 0)
                    .count();
                let rate = neg as f64 / n as f64;
                let sigma = (delta * (1.0 - delta) / n as f64).sqrt();
                assert!(
                    rate <= delta + 3.0 * sigma,
                    "delta={delta} sens={sens} rate={rate}"
                );
            }
        }
    }

    #[test]
    fn high_epsilon_concentrates_at_mean() {
        let params = LapParams::new(50.0, 0.05, 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(sample_discrete_laplace(&params, &mut rng), params.mu_int);
        }
    }

    #[test]
    fn binning_map_worked_example() {
        let map = BinningMap::from_bit_string("0001000001").unwrap();
        assert_eq!(map.intervals(), vec![(1, 4), (5, 10)]);
        assert_eq!(map.resolve_bin(2).unwrap(), (1, 4, 3));
        assert_eq!(map.resolve_bin(4).unwrap(), (1, 4, 3));
        assert_eq!(map.resolve_bin(10).unwrap(), (5, 10, 5));
        assert!(map.resolve_bin(0).is_err());
        assert!(map.resolve_bin(11).is_err());
        assert_eq!(map.to_bit_string(), "0001000001");
    }

    #[test]
    fn binning_map_trailing_bin_implicit() {
        let map = BinningMap::from_bit_string("001000").unwrap();
        assert_eq!(map.intervals(), vec![(1, 3), (4, 6)]);
        assert!(BinningMap::from_bit_string("01x0").is_err());
        assert!(BinningMap::from_bit_string("").is_err());
    }

    #[test]
    fn local_view_reconstruction() {
        let map = BinningMap::from_bit_string("0000100000").unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let true_edges = vec![(2u32, 1u64), (7, 1), (9, 3)];
        for _ in 0..50 {
            let v = encrypt_local_view(4, &true_edges, 200, &map, 1.0, 0.05, &mut rng).unwrap();
            assert_eq!(v.true_degree, 3);
            assert_eq!(v.noisy_count as usize, v.entries.len());
            let mut seen = HashSet::new();
            for e in &v.entries {
                assert!(seen.insert(e.col), "duplicate column");
                assert_ne!(e.col, 4, "self-loop dummy");
                let w = e.share1.wrapping_add(e.share2);
                match true_edges.iter().find(|&&(j, _)| j == e.col) {
                    Some(&(_, tw)) => {
                        assert_eq!(w, tw);
                        assert!(!e.is_dummy);
                    }
                    None => {
                        assert_eq!(w, 0);
                        assert!(e.is_dummy);
                    }
                }
            }
            // every true edge survives
            for &(j, _) in &true_edges {
                assert!(v.entries.iter().any(|e| e.col == j));
            }
        }
    }

    #[test]
    fn negative_draw_truncates_to_no_dummies() {
        let map = BinningMap::from_bit_string("1").unwrap(); // sens 0
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let v = encrypt_local_view(0, &[(1, 1)], 10, &map, 1.0, 0.05, &mut rng).unwrap();
        // width-0 bin: noise forced to mu_int = 0, exactly the true edges
        assert_eq!(v.entries.len(), 1);
    }

    #[test]
    fn dummy_cap_when_row_is_dense() {
        let map = BinningMap::from_bit_string("0000000001").unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let true_edges: Vec<(u32, u64)> = (1..=4).map(|j| (j, 1)).collect();
        let v = encrypt_local_view(0, &true_edges, 6, &map, 0.1, 0.0001, &mut rng).unwrap();
        assert!(v.entries.len() <= 5); // 4 true + at most 1 empty slot
        assert!(v.capped || v.entries.len() < 6);
    }

    #[test]
    fn share_marginal_uniform_for_zero_and_one_weights() {
        // single-party shares of weight 0 and weight 1 should look alike
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let n = 100_000;
        let mut buckets = [[0u64; 16]; 2];
        for i in 0..n {
            let w = (i % 2) as u64;
            let (s1, _) = share(w, &mut rng);
            buckets[w as usize][(s1.value & 0xf) as usize] += 1;
        }
        let expected = n as f64 / 2.0 / 16.0;
        for b in &buckets {
            let stat: f64 = b.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
            let crit = ChiSquared::new(15.0).unwrap().inverse_cdf(0.99);
            assert!(stat < crit, "chi2 {stat}");
        }
    }

    #[test]
    fn share_file_round_trip() {
        let recs = vec![(1u32, 2u32, 99u64), (3, 4, u64::MAX), (0, 0, 0)];
        let mut buf = Vec::new();
        write_share_records(&mut buf, &recs).unwrap();
        assert_eq!(buf.len(), 8 + 16 * recs.len());
        assert_eq!(read_share_records(buf.as_slice()).unwrap(), recs);
        assert!(read_share_records(&buf[..buf.len() - 1]).is_err());
        buf.push(0);
        assert!(read_share_records(buf.as_slice()).is_err());
    }
}
