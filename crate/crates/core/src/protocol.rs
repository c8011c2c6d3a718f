//! End-to-end protocol runner: wires the client-side LDP encryption, the
//! two-server collection phases, and the secret-shared eigendecomposition
//! into one seeded, fully accounted run, plus the plaintext mirror pipeline
//! and the conformance checks the CLI turns into an exit code.
//!
//! Clients are replayed deterministically inside both party threads from
//! per-user seeded RNG streams: each party recomputes the same local views
//! and keeps only its own shares, so client work costs no channel traffic
//! and the harness still has no hidden inter-party path.

use crate::collect::{
    assemble_adjacency, estimate_histogram, gen_degree_keys, generate_binning_map, plain_binning,
};
use crate::compare::CompareBackend;
use crate::dealer::PartyCtx;
use crate::eigen::{
    extract_eigenpairs, lift_adjacency, public_scale, secure_arnoldi, secure_lanczos,
    secure_qr_basic, secure_qr_optimized, shift_diagonal, EigenOpts, EigenResult,
};
use crate::graph::{sample_nodes, GraphDataset};
use crate::ldp::{encrypt_local_view, BinningMap, LdpError};
use crate::plain::{self, PlainError, SparseCoo};
use crate::shares::open_bits;
use crate::sim::{run_pair, Channel, SimMode, Transcript};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::sync::Arc;

/// Public spectral shift added to the diagonal of the reduced matrix before
/// QR and removed at extraction. Unshifted QR cannot separate eigenvalues of
/// equal magnitude, and bipartite-ish graphs always carry exact +-pairs; any
/// c > 0 splits |x+c| from |x-c|. The shift is kept small because QR's
/// convergence ratio for a neighboring pair is |(mu2+c)/(mu1+c)|, which a
/// large c drags toward 1 (the pre-scale sigma is a conservative Gershgorin
/// bound, so scaled eigenvalues sit well inside [-1, 1]). Exact, public, and
/// eigenvector-preserving.
pub const SPECTRAL_SHIFT: f64 = 0.005;

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("bad config: {0}")]
    Config(String),
    #[error("non-convergent spectrum: {0}")]
    NonConvergent(String),
    #[error(transparent)]
    Plain(#[from] PlainError),
    #[error(transparent)]
    Ldp(#[from] LdpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackendChoice {
    Fss,
    Ass,
    /// FSS when the configured latency exceeds 2 ms (rounds dominate),
    /// otherwise the cheap-local PPA backend.
    #[default]
    Auto,
}

impl BackendChoice {
    pub fn resolve(self, latency_ms: f64) -> CompareBackend {
        match self {
            BackendChoice::Fss => CompareBackend::Fss,
            BackendChoice::Ass => CompareBackend::AssPpa,
            BackendChoice::Auto => {
                if latency_ms > 2.0 {
                    CompareBackend::Fss
                } else {
                    CompareBackend::AssPpa
                }
            }
        }
    }
}

impl std::str::FromStr for BackendChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fss" => Ok(BackendChoice::Fss),
            "ass" => Ok(BackendChoice::Ass),
            "auto" => Ok(BackendChoice::Auto),
            _ => Err(format!("unknown backend {s:?} (want fss|ass|auto)")),
        }
    }
}

impl std::fmt::Display for BackendChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackendChoice::Fss => "fss",
            BackendChoice::Ass => "ass",
            BackendChoice::Auto => "auto",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QrVariant {
    Basic,
    #[default]
    Optimized,
}

impl std::str::FromStr for QrVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "basic" => Ok(QrVariant::Basic),
            "optimized" => Ok(QrVariant::Optimized),
            _ => Err(format!("unknown qr variant {s:?} (want basic|optimized)")),
        }
    }
}

impl std::fmt::Display for QrVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QrVariant::Basic => "basic",
            QrVariant::Optimized => "optimized",
        })
    }
}

/// Run parameters. Defaults are the reference instantiation: epsilon 1,
/// delta 1e-6, 10 bins, 10% histogram sample, d_max = N/20, M = 15, top-3,
/// 25 Newton iterations, 100 QR sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub bins: u32,
    pub sample_rate: f64,
    /// None = derive from the graph as N/20.
    pub d_max: Option<u32>,
    /// Krylov basis dimension M.
    pub m: usize,
    pub top_k: usize,
    /// Newton iterations inside inv_sqrt.
    pub omega: u32,
    /// QR sweeps K.
    pub sweeps: usize,
    pub compare_backend: BackendChoice,
    pub qr_variant: QrVariant,
    pub latency_ms: f64,
    pub seed: u64,
    pub mode: SimMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            epsilon: 1.0,
            delta: 1e-6,
            bins: 10,
            sample_rate: 0.10,
            d_max: None,
            m: 15,
            top_k: 3,
            omega: 25,
            sweeps: 100,
            compare_backend: BackendChoice::Auto,
            qr_variant: QrVariant::Optimized,
            latency_ms: 0.0,
            seed: 0,
            mode: SimMode::Threaded,
        }
    }
}

impl RunConfig {
    pub fn effective_d_max(&self, n: u32) -> u32 {
        self.d_max.unwrap_or(n / 20).clamp(2, n.max(2))
    }

    pub fn validate(&self, n: u32) -> Result<(), ProtocolError> {
        let bad = |m: String| Err(ProtocolError::Config(m));
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive".into());
        }
        if !(0.0 < self.delta && self.delta < 1.0) {
            return bad("delta must be in (0,1)".into());
        }
        if self.bins == 0 {
            return bad("bins must be >= 1".into());
        }
        if !(0.0 < self.sample_rate && self.sample_rate <= 1.0) {
            return bad("sample_rate must be in (0,1]".into());
        }
        if self.m < 2 || self.m as u32 > n {
            return bad(format!("M={} needs 2 <= M <= N={n}", self.m));
        }
        if self.top_k == 0 || self.top_k > self.m {
            return bad(format!("top_k={} needs 1 <= top_k <= M", self.top_k));
        }
        if self.sweeps == 0 {
            return bad("sweeps must be >= 1".into());
        }
        if self.omega == 0 {
            return bad("omega must be >= 1".into());
        }
        Ok(())
    }
}

// Deterministic client-side randomness: one ChaCha stream per (purpose,
// user). Both party threads replay the same streams and keep only their own
// shares, standing in for real clients without hidden channel traffic.
const STREAM_SAMPLE: u64 = 1;
const STREAM_KEYS: u64 = 2;
const STREAM_VIEWS: u64 = 3;

fn client_rng(seed: u64, purpose: u64, user: u32) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream((purpose << 32) | user as u64);
    rng
}

/// One named pass/fail conformance check derived from a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub phase: String,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    pub graph_nodes: u32,
    pub graph_arcs: usize,
    pub graph_directed: bool,
    pub provenance: String,
    pub d_max: u32,
    pub backend: CompareBackend,
    pub binning_map: String,
    pub sampled_users: usize,
    /// Views whose noise draw exceeded the empty columns available.
    pub capped_views: usize,
    pub rejected_rows: usize,
    pub sigma: f64,
    pub result: EigenResult,
    /// Same algorithm in f64 under identical M, K, omega, start, shift.
    pub plain_eigenvalues: Vec<f64>,
    pub oracle_eigenvalues: Vec<f64>,
    pub rmse_secure_vs_oracle: f64,
    pub rmse_plain_vs_oracle: f64,
    /// Pure fixed-point divergence: secure vs the identical f64 algorithm.
    pub rmse_secure_vs_plain: f64,
    pub transcripts: Vec<Transcript>,
    pub checks: Vec<Check>,
}

impl RunOutput {
    pub fn conformance_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn transcript(&self, phase: &str) -> Option<&Transcript> {
        self.transcripts.iter().find(|t| t.phase == phase)
    }
}

struct PartyRun {
    result: EigenResult,
    sigma: f64,
    map: String,
    sampled: usize,
    capped: usize,
    rejected: usize,
}

fn party_run(ctx: PartyCtx, g: &GraphDataset, cfg: &RunConfig) -> PartyRun {
    let n = g.n;
    let d_max = cfg.effective_d_max(n);
    let backend = cfg.compare_backend.resolve(cfg.latency_ms);
    let rows = g.rows();
    let degrees = g.out_degrees();
    let p1 = ctx.is_p1();

    // -- histogram: DPF keys from a sampled user cohort, tallied locally
    ctx.chan.set_phase(ctx.party, "histogram");
    let sampled = sample_nodes(n, cfg.sample_rate, &mut client_rng(cfg.seed, STREAM_SAMPLE, 0));
    let keys: Vec<Vec<u8>> = sampled
        .iter()
        .map(|&u| {
            let (k1, k2) = gen_degree_keys(
                degrees[u as usize].max(1),
                d_max,
                &mut client_rng(cfg.seed, STREAM_KEYS, u),
            );
            if p1 {
                k1
            } else {
                k2
            }
        })
        .collect();
    let hist = estimate_histogram(&ctx, &keys, d_max);

    // -- binning: secure boundary bits, opened into the public map
    ctx.chan.set_phase(ctx.party, "binning");
    let s = sampled.len() as u32;
    let b = cfg.bins.min(s);
    let bits = generate_binning_map(&ctx, &hist, b, s, backend);
    let map_bits = open_bits(&ctx, "bin.open", &bits);
    let map = BinningMap::from_bits(map_bits).expect("d_max >= 1");

    // -- assembly: clients encrypt under the map; servers concatenate
    ctx.chan.set_phase(ctx.party, "assembly");
    let mut records = Vec::new();
    let mut capped = 0usize;
    for u in 0..n {
        let view = encrypt_local_view(
            u,
            &rows[u as usize],
            n,
            &map,
            cfg.epsilon,
            cfg.delta,
            &mut client_rng(cfg.seed, STREAM_VIEWS, u),
        )
        .expect("validated params");
        capped += view.capped as usize;
        for e in &view.entries {
            records.push((u, e.col, if p1 { e.share1 } else { e.share2 }));
        }
    }
    ctx.chan.add_local_ops(ctx.party, records.len() as u64);
    let adj = assemble_adjacency(&records, n);
    let sigma = public_scale(&adj, g.max_weight());

    // -- krylov reduction
    ctx.chan.set_phase(ctx.party, "krylov");
    let opts = EigenOpts {
        omega: cfg.omega,
        ..EigenOpts::default()
    };
    let fixed = lift_adjacency(&ctx, &adj, sigma);
    let krylov = if g.directed {
        secure_arnoldi(&ctx, &fixed, cfg.m, &opts)
    } else {
        secure_lanczos(&ctx, &fixed, cfg.m, &opts)
    };

    // -- qr iteration on the shifted reduced matrix
    ctx.chan.set_phase(ctx.party, "qr");
    let mut a_bar = krylov.a_bar.clone();
    shift_diagonal(&ctx, &mut a_bar, cfg.m, SPECTRAL_SHIFT);
    let qr = match cfg.qr_variant {
        QrVariant::Basic => secure_qr_basic(&ctx, &a_bar, cfg.m, cfg.sweeps, &opts),
        QrVariant::Optimized => secure_qr_optimized(&ctx, &a_bar, cfg.m, cfg.sweeps, &opts),
    };

    // -- extraction to the analyst
    ctx.chan.set_phase(ctx.party, "extraction");
    let result = extract_eigenpairs(&ctx, &qr, &krylov, cfg.top_k, sigma, SPECTRAL_SHIFT, &opts);

    PartyRun {
        result,
        sigma,
        map: map.to_bit_string(),
        sampled: sampled.len(),
        capped,
        rejected: adj.rejected_rows.len(),
    }
}

/// The same pipeline in f64: scale, Krylov-reduce, shift, QR, unshift. Used
/// both as the accuracy yardstick and as the convergence detector (a secure
/// run cannot peek at its own residuals).
pub fn plain_pipeline(
    g: &GraphDataset,
    sigma: f64,
    m: usize,
    sweeps: usize,
    top_k: usize,
) -> Result<Vec<f64>, ProtocolError> {
    let a = SparseCoo::from_graph(g, sigma);
    let (mut h, _, _) = if g.directed {
        plain::arnoldi(&a, m)?
    } else {
        plain::lanczos(&a, m)?
    };
    for i in 0..m {
        h[i * m + i] += SPECTRAL_SHIFT;
    }
    let (t, _) = plain::qr_givens(&h, m, sweeps);
    let vals: Vec<f64> = (0..m)
        .map(|i| (t[i * m + i] - SPECTRAL_SHIFT) / sigma)
        .collect();
    let order = plain::sort_by_magnitude(&vals);
    // each reported eigenvalue must be isolated: its adjacent subdiagonal
    // entries of T_K must have decayed. Scaled entries are O(1), so a stuck
    // 2x2 block (complex pair or an exact magnitude tie) shows up as a
    // subdiagonal that never leaves the 0.1 range; genuinely converged
    // positions sit orders of magnitude below the gate.
    for &idx in order.iter().take(top_k) {
        let mut worst = 0.0f64;
        if idx + 1 < m {
            worst = worst.max(t[(idx + 1) * m + idx].abs());
        }
        if idx > 0 {
            worst = worst.max(t[idx * m + idx - 1].abs());
        }
        if worst > 2e-2 {
            return Err(ProtocolError::NonConvergent(format!(
                "subdiagonal next to eigenvalue {idx} still {worst:.3e} after {sweeps} sweeps \
                 (clustered or complex top spectrum)"
            )));
        }
    }
    Ok(order.iter().take(top_k).map(|&i| vals[i]).collect())
}

fn fmt_u64s(v: [u64; 2]) -> String {
    format!("[{}, {}]", v[0], v[1])
}

/// Closed-form conformance: exact per-label element counts where the design
/// states an exact formula, plus the accuracy gate.
fn conformance_checks(
    cfg: &RunConfig,
    backend: CompareBackend,
    d_max: u32,
    n: usize,
    transcripts: &[Transcript],
    rmse_secure: f64,
    rmse_plain: f64,
    sigma: f64,
) -> Vec<Check> {
    let mut checks = Vec::new();
    let find = |phase: &str| transcripts.iter().find(|t| t.phase == phase);

    if let Some(t) = find("histogram") {
        let pass = t.bytes_p1_to_p2 == 0 && t.bytes_p2_to_p1 == 0;
        checks.push(Check {
            phase: "histogram".into(),
            name: "local-only".into(),
            pass,
            detail: format!("bytes [{}, {}], want [0, 0]", t.bytes_p1_to_p2, t.bytes_p2_to_p1),
        });
    }

    if let Some(t) = find("binning") {
        // per degree: one comparison + a 2-round oblivious reset, plus one
        // round opening the map
        let per_cmp = match backend {
            CompareBackend::Fss => 1,
            CompareBackend::AssPpa => 6,
        };
        let want = d_max as u64 * (per_cmp + 2) + 1;
        checks.push(Check {
            phase: "binning".into(),
            name: "rounds".into(),
            pass: t.rounds == want,
            detail: format!("rounds {}, want {want}", t.rounds),
        });
    }

    if let Some(t) = find("qr") {
        let (m, k) = (cfg.m as u64, cfg.sweeps as u64);
        let (label, want) = match cfg.qr_variant {
            QrVariant::Basic => ("qr.mul", 6 * k * (m - 1) * m * m),
            QrVariant::Optimized => ("qr.corr", k * (m - 1) * (6 * m + 4)),
        };
        let got = t.elems.get(label).copied().unwrap_or([0, 0]);
        checks.push(Check {
            phase: "qr".into(),
            name: format!("{label}-elems"),
            pass: got == [want, want],
            detail: format!("{} elems {}, want [{want}, {want}]", label, fmt_u64s(got)),
        });
    }

    if let Some(t) = find("extraction") {
        let want = (n * cfg.m + cfg.m) as u64;
        let got = t.elems.get("extract.open").copied().unwrap_or([0, 0]);
        checks.push(Check {
            phase: "extraction".into(),
            name: "open-elems".into(),
            pass: got == [want, want],
            detail: format!("opened {}, want [{want}, {want}]", fmt_u64s(got)),
        });
    }

    // secure accuracy may exceed the plaintext pipeline's only by fixed-point
    // noise: 5% relative on the plain RMSE plus the 1e-3-per-eigenvalue
    // fixed-point allowance mapped back through the public rescale
    let budget = 1.05 * rmse_plain + 1e-3 / sigma;
    checks.push(Check {
        phase: "extraction".into(),
        name: "accuracy".into(),
        pass: rmse_secure <= budget,
        detail: format!(
            "rmse secure {rmse_secure:.6e}, plain {rmse_plain:.6e}, budget {budget:.6e}"
        ),
    });

    checks
}

/// Runs the full two-server protocol over `g` and returns the analyst's
/// result, one transcript per phase, the plaintext/oracle yardsticks, and
/// the conformance verdicts.
pub fn run_protocol(cfg: &RunConfig, g: &GraphDataset) -> Result<RunOutput, ProtocolError> {
    cfg.validate(g.n)?;

    let chan = Channel::new(cfg.mode, cfg.latency_ms);
    let (ctx1, ctx2) = PartyCtx::pair(&chan, cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let shared_g = Arc::new(g.clone());
    let (g1, g2) = (shared_g.clone(), shared_g.clone());
    let (c1, c2) = (cfg.clone(), cfg.clone());
    let (out1, out2) = run_pair(
        &chan,
        move || party_run(ctx1, &g1, &c1),
        move || party_run(ctx2, &g2, &c2),
    );
    assert_eq!(
        out1.result.eigenvalues, out2.result.eigenvalues,
        "parties opened different results"
    );
    assert_eq!(out1.map, out2.map, "parties opened different binning maps");

    // yardsticks: identical-algorithm f64 mirror, then the ground-truth oracle
    let plain_vals = plain_pipeline(g, out1.sigma, cfg.m, cfg.sweeps, cfg.top_k)?;
    let unscaled = SparseCoo::from_graph(g, 1.0);
    let basis = (2 * cfg.m).max(40);
    let (oracle_vals, _) = match plain::oracle_graph_topk(&unscaled, cfg.top_k, basis) {
        Ok(v) => v,
        Err(PlainError::NonConvergent) => {
            return Err(ProtocolError::NonConvergent(
                "ground-truth oracle failed to separate the top spectrum".into(),
            ))
        }
        Err(e) => return Err(e.into()),
    };
    let rmse_secure =
        plain::rmse_eigenvalues(&out1.result.eigenvalues, &oracle_vals, cfg.top_k)?;
    let rmse_plain = plain::rmse_eigenvalues(&plain_vals, &oracle_vals, cfg.top_k)?;
    let rmse_secure_vs_plain =
        plain::rmse_eigenvalues(&out1.result.eigenvalues, &plain_vals, cfg.top_k)?;

    let transcripts = chan.transcripts();
    let d_max = cfg.effective_d_max(g.n);
    let backend = cfg.compare_backend.resolve(cfg.latency_ms);
    let checks = conformance_checks(
        cfg,
        backend,
        d_max,
        g.n as usize,
        &transcripts,
        rmse_secure,
        rmse_plain,
        out1.sigma,
    );

    Ok(RunOutput {
        config: cfg.clone(),
        graph_nodes: g.n,
        graph_arcs: g.edges.len(),
        graph_directed: g.directed,
        provenance: g.provenance.clone(),
        d_max,
        backend,
        binning_map: out1.map,
        sampled_users: out1.sampled,
        capped_views: out1.capped,
        rejected_rows: out1.rejected,
        sigma: out1.sigma,
        result: out1.result,
        plain_eigenvalues: plain_vals,
        oracle_eigenvalues: oracle_vals,
        rmse_secure_vs_oracle: rmse_secure,
        rmse_plain_vs_oracle: rmse_plain,
        rmse_secure_vs_plain,
        transcripts,
        checks,
    })
}

// ---------------------------------------------------------------------------
// ciphertext storage accounting
// ---------------------------------------------------------------------------

/// Per-party encrypted-view sizes under three encodings: dense (every cell
/// shared), sparse single-bin LDP (one global sensitivity d_max), and sparse
/// B-bin LDP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageFigures {
    pub nodes: u32,
    pub bins: u32,
    pub d_max: u32,
    pub dense_bytes_per_party: u64,
    pub one_bin_bytes_per_party: u64,
    pub binned_bytes_per_party: u64,
}

impl StorageFigures {
    pub fn saving_vs_dense(&self) -> f64 {
        1.0 - self.binned_bytes_per_party as f64 / self.dense_bytes_per_party as f64
    }
    pub fn saving_vs_one_bin(&self) -> f64 {
        1.0 - self.binned_bytes_per_party as f64 / self.one_bin_bytes_per_party as f64
    }
}

fn view_file_bytes(
    g: &GraphDataset,
    rows: &[Vec<(u32, u64)>],
    map: &BinningMap,
    cfg: &RunConfig,
) -> Result<u64, ProtocolError> {
    let mut entries = 0u64;
    for u in 0..g.n {
        let v = encrypt_local_view(
            u,
            &rows[u as usize],
            g.n,
            map,
            cfg.epsilon,
            cfg.delta,
            &mut client_rng(cfg.seed, STREAM_VIEWS, u),
        )?;
        entries += v.entries.len() as u64;
    }
    // count header + 16-byte (row, col, share) records
    Ok(8 + 16 * entries)
}

/// Measures the three encodings on `g` under `cfg`'s privacy parameters.
/// The B-bin map comes from the plaintext binning oracle over the same
/// sampled cohort the protocol would use; dense is N^2 8-byte shares.
pub fn storage_figures(g: &GraphDataset, cfg: &RunConfig) -> Result<StorageFigures, ProtocolError> {
    if g.n == 0 {
        return Err(ProtocolError::Config("empty graph".into()));
    }
    let d_max = cfg.effective_d_max(g.n);
    let rows = g.rows();
    let degrees = g.out_degrees();
    let sampled = sample_nodes(g.n, cfg.sample_rate, &mut client_rng(cfg.seed, STREAM_SAMPLE, 0));
    let mut hist = vec![0u32; d_max as usize];
    for &u in &sampled {
        hist[(degrees[u as usize].clamp(1, d_max) - 1) as usize] += 1;
    }
    let s = sampled.len() as u32;
    let b = cfg.bins.min(s);
    let binned_map = BinningMap::from_bits(plain_binning(&hist, s, b)).expect("d_max >= 1");
    let mut one = vec![false; d_max as usize];
    *one.last_mut().unwrap() = true;
    let one_bin_map = BinningMap::from_bits(one).unwrap();

    Ok(StorageFigures {
        nodes: g.n,
        bins: b,
        d_max,
        dense_bytes_per_party: (g.n as u64) * (g.n as u64) * 8,
        one_bin_bytes_per_party: view_file_bytes(g, &rows, &one_bin_map, cfg)?,
        binned_bytes_per_party: view_file_bytes(g, &rows, &binned_map, cfg)?,
    })
}
