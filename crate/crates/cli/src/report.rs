//! Line-delimited report format: one `key=value` pair per line, first line
//! `schema=<name>`, keys in a fixed emission order so identical runs produce
//! byte-identical files. Floats are printed with Rust's shortest round-trip
//! formatting, so every figure can be parsed back exactly.
//!
//! Schemas:
//! - `eigenshare.e2e.v1`: config echo, graph summary, run facts, eigenvalues
//!   (secure / plaintext mirror / oracle), RMSE figures, storage figures,
//!   per-phase transcripts, conformance checks.
//! - `eigenshare.benchqr.v1`: per-M traffic of both QR variants plus the
//!   closed-form expectations and the saving percentage.
//! - `eigenshare.storage.v1`: ciphertext sizes for dense, single-bin, and
//!   B-bin encodings.

use crate::config::mode_str;
use eigenshare_core::protocol::{RunConfig, RunOutput, StorageFigures};
use eigenshare_core::CompareBackend;

pub const SCHEMA_E2E: &str = "eigenshare.e2e.v1";
pub const SCHEMA_BENCH_QR: &str = "eigenshare.benchqr.v1";
pub const SCHEMA_STORAGE: &str = "eigenshare.storage.v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn new(schema: &str) -> Self {
        Report {
            lines: vec![("schema".into(), schema.into())],
        }
    }

    pub fn push(&mut self, key: &str, value: impl std::fmt::Display) {
        let v = value.to_string();
        debug_assert!(!key.contains('=') && !key.contains('\n'));
        debug_assert!(!v.contains('\n'));
        self.lines.push((key.to_string(), v));
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, format!("{value:?}"));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn schema(&self) -> Option<&str> {
        self.get("schema")
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.lines {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Report, String> {
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let (k, v) = raw
                .split_once('=')
                .ok_or_else(|| format!("report line {}: no '='", i + 1))?;
            lines.push((k.to_string(), v.to_string()));
        }
        if lines.first().map(|(k, _)| k.as_str()) != Some("schema") {
            return Err("report must start with a schema line".into());
        }
        Ok(Report { lines })
    }
}

fn push_config(r: &mut Report, cfg: &RunConfig) {
    r.push_f64("config.epsilon", cfg.epsilon);
    r.push_f64("config.delta", cfg.delta);
    r.push("config.bins", cfg.bins);
    r.push_f64("config.sample_rate", cfg.sample_rate);
    match cfg.d_max {
        Some(d) => r.push("config.d_max", d),
        None => r.push("config.d_max", "auto"),
    }
    r.push("config.m", cfg.m);
    r.push("config.top_k", cfg.top_k);
    r.push("config.omega", cfg.omega);
    r.push("config.sweeps", cfg.sweeps);
    r.push("config.compare_backend", cfg.compare_backend);
    r.push("config.qr_variant", cfg.qr_variant);
    r.push_f64("config.latency_ms", cfg.latency_ms);
    r.push("config.seed", cfg.seed);
    r.push("config.mode", mode_str(cfg.mode));
}

fn push_storage(r: &mut Report, st: &StorageFigures) {
    r.push("storage.bins", st.bins);
    r.push("storage.d_max", st.d_max);
    r.push("storage.dense_bytes_per_party", st.dense_bytes_per_party);
    r.push("storage.one_bin_bytes_per_party", st.one_bin_bytes_per_party);
    r.push("storage.binned_bytes_per_party", st.binned_bytes_per_party);
    r.push_f64("storage.saving_vs_dense", st.saving_vs_dense());
    r.push_f64("storage.saving_vs_one_bin", st.saving_vs_one_bin());
}

pub fn e2e_report(source: &str, out: &RunOutput, storage: &StorageFigures) -> Report {
    let mut r = Report::new(SCHEMA_E2E);
    r.push("command", "e2e");
    push_config(&mut r, &out.config);
    r.push("graph.source", source);
    r.push("graph.provenance", &out.provenance);
    r.push("graph.nodes", out.graph_nodes);
    r.push("graph.arcs", out.graph_arcs);
    r.push("graph.directed", out.graph_directed);
    r.push("run.d_max", out.d_max);
    r.push(
        "run.backend",
        match out.backend {
            CompareBackend::Fss => "fss",
            CompareBackend::AssPpa => "ass",
        },
    );
    r.push("run.binning_map", &out.binning_map);
    r.push("run.sampled_users", out.sampled_users);
    r.push("run.capped_views", out.capped_views);
    r.push("run.rejected_rows", out.rejected_rows);
    r.push_f64("run.sigma", out.sigma);
    for (i, v) in out.result.eigenvalues.iter().enumerate() {
        r.push_f64(&format!("eigenvalue.{i}"), *v);
    }
    for (i, v) in out.plain_eigenvalues.iter().enumerate() {
        r.push_f64(&format!("plain.eigenvalue.{i}"), *v);
    }
    for (i, v) in out.oracle_eigenvalues.iter().enumerate() {
        r.push_f64(&format!("oracle.eigenvalue.{i}"), *v);
    }
    r.push_f64("rmse.secure_vs_oracle", out.rmse_secure_vs_oracle);
    r.push_f64("rmse.plain_vs_oracle", out.rmse_plain_vs_oracle);
    r.push_f64("rmse.secure_vs_plain", out.rmse_secure_vs_plain);
    push_storage(&mut r, storage);
    for t in &out.transcripts {
        let p = format!("transcript.{}", t.phase);
        r.push(&format!("{p}.bytes_p1_to_p2"), t.bytes_p1_to_p2);
        r.push(&format!("{p}.bytes_p2_to_p1"), t.bytes_p2_to_p1);
        r.push(&format!("{p}.rounds"), t.rounds);
        r.push_f64(&format!("{p}.simulated_ms"), t.simulated_ms);
        r.push(&format!("{p}.local_ops_p1"), t.local_ops[0]);
        r.push(&format!("{p}.local_ops_p2"), t.local_ops[1]);
        for (label, counts) in &t.elems {
            r.push(&format!("{p}.elems.{label}.p1"), counts[0]);
            r.push(&format!("{p}.elems.{label}.p2"), counts[1]);
        }
    }
    for c in &out.checks {
        let key = format!("check.{}.{}", c.phase, c.name);
        r.push(&key, if c.pass { "pass" } else { "fail" });
        r.push(&format!("{key}.detail"), &c.detail);
    }
    r.push(
        "conformance",
        if out.conformance_pass() { "pass" } else { "fail" },
    );
    r
}

pub fn storage_report(source: &str, st: &StorageFigures) -> Report {
    let mut r = Report::new(SCHEMA_STORAGE);
    r.push("command", "storage");
    r.push("graph.source", source);
    r.push("graph.nodes", st.nodes);
    push_storage(&mut r, st);
    r
}

/// One bench-qr measurement row.
#[derive(Debug, Clone)]
pub struct QrBenchRow {
    pub m: usize,
    pub sweeps: usize,
    pub basic_elems: u64,
    pub optimized_elems: u64,
    pub basic_bytes: u64,
    pub optimized_bytes: u64,
}

impl QrBenchRow {
    pub fn formula_basic(&self) -> u64 {
        let (m, k) = (self.m as u64, self.sweeps as u64);
        6 * k * (m - 1) * m * m
    }
    pub fn formula_optimized(&self) -> u64 {
        let (m, k) = (self.m as u64, self.sweeps as u64);
        k * (m - 1) * (6 * m + 4)
    }
    /// Saving on the matrix-multiplication traffic the formulas cover.
    pub fn saving(&self) -> f64 {
        1.0 - self.optimized_elems as f64 / self.basic_elems as f64
    }
}

pub fn bench_qr_report(rows: &[QrBenchRow], seed: u64) -> Report {
    let mut r = Report::new(SCHEMA_BENCH_QR);
    r.push("command", "bench-qr");
    r.push("seed", seed);
    for row in rows {
        let p = format!("bench.m{}", row.m);
        r.push(&format!("{p}.sweeps"), row.sweeps);
        r.push(&format!("{p}.basic_elems"), row.basic_elems);
        r.push(&format!("{p}.optimized_elems"), row.optimized_elems);
        r.push(&format!("{p}.formula_basic"), row.formula_basic());
        r.push(&format!("{p}.formula_optimized"), row.formula_optimized());
        r.push(&format!("{p}.basic_bytes"), row.basic_bytes);
        r.push(&format!("{p}.optimized_bytes"), row.optimized_bytes);
        r.push_f64(&format!("{p}.saving"), row.saving());
    }
    r
}

const E2E_REQUIRED: &[&str] = &[
    "command",
    "config.epsilon",
    "config.delta",
    "config.bins",
    "config.sample_rate",
    "config.d_max",
    "config.m",
    "config.top_k",
    "config.omega",
    "config.sweeps",
    "config.compare_backend",
    "config.qr_variant",
    "config.latency_ms",
    "config.seed",
    "config.mode",
    "graph.source",
    "graph.nodes",
    "graph.arcs",
    "graph.directed",
    "run.d_max",
    "run.backend",
    "run.binning_map",
    "run.sampled_users",
    "run.sigma",
    "eigenvalue.0",
    "plain.eigenvalue.0",
    "oracle.eigenvalue.0",
    "rmse.secure_vs_oracle",
    "rmse.plain_vs_oracle",
    "rmse.secure_vs_plain",
    "storage.dense_bytes_per_party",
    "storage.one_bin_bytes_per_party",
    "storage.binned_bytes_per_party",
    "conformance",
];

const E2E_PHASES: &[&str] = &[
    "histogram",
    "binning",
    "assembly",
    "krylov",
    "qr",
    "extraction",
];

/// Schema validation: every figure the schema promises must be present.
pub fn validate(report: &Report) -> Result<(), String> {
    let schema = report.schema().ok_or("missing schema line")?;
    let need = |r: &Report, key: &str| -> Result<(), String> {
        if r.get(key).is_none() {
            return Err(format!("schema {schema}: missing required key {key}"));
        }
        Ok(())
    };
    match schema {
        SCHEMA_E2E => {
            for key in E2E_REQUIRED {
                need(report, key)?;
            }
            for phase in E2E_PHASES {
                for field in ["bytes_p1_to_p2", "bytes_p2_to_p1", "rounds", "simulated_ms"] {
                    need(report, &format!("transcript.{phase}.{field}"))?;
                }
            }
            Ok(())
        }
        SCHEMA_STORAGE => {
            for key in [
                "command",
                "graph.source",
                "graph.nodes",
                "storage.bins",
                "storage.dense_bytes_per_party",
                "storage.one_bin_bytes_per_party",
                "storage.binned_bytes_per_party",
                "storage.saving_vs_dense",
                "storage.saving_vs_one_bin",
            ] {
                need(report, key)?;
            }
            Ok(())
        }
        SCHEMA_BENCH_QR => {
            for key in ["command", "seed"] {
                need(report, key)?;
            }
            if !report
                .lines
                .iter()
                .any(|(k, _)| k.starts_with("bench.m") && k.ends_with(".saving"))
            {
                return Err("bench-qr report has no measurement rows".into());
            }
            Ok(())
        }
        other => Err(format!("unknown schema {other:?}")),
    }
}
