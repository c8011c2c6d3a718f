use clap::{Args, Parser, Subcommand};
use eigenshare_cli::commands::{cmd_bench_qr, cmd_e2e, cmd_storage, CliError};
use eigenshare_cli::config;
use eigenshare_cli::report::Report;
use eigenshare_core::protocol::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "eigenshare", version, about = "Secret-shared eigendecomposition simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full pipeline: LDP collection, secure reduction + QR, conformance checks.
    E2e {
        /// Graph: a file path, or synthetic:er,N,p | synthetic:pa,N,m |
        /// synthetic:planted,N,blocks,drop.
        #[arg(long)]
        graph: String,
        /// Treat an edge-list file as directed (synthetic specs ignore this).
        #[arg(long)]
        directed: bool,
        #[arg(long, help = "Write the report here as well as to stdout")]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Traffic of both secure QR variants against their closed forms.
    BenchQr {
        /// Basis sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "15")]
        m: Vec<usize>,
        /// QR sweeps per measurement.
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-party storage of dense, one-bin and binned share encodings.
    Storage {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        directed: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// One flag per config key; values go through the same parser as config
/// files and `EIGENSHARE_*` variables, so spellings match everywhere.
#[derive(Args, Default)]
struct Overrides {
    /// Flat key=value file, applied before env vars and flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    bins: Option<String>,
    #[arg(long)]
    sample_rate: Option<String>,
    #[arg(long, help = "Degree cap, or `auto`")]
    d_max: Option<String>,
    #[arg(long, help = "Krylov basis size")]
    m: Option<String>,
    #[arg(long)]
    top_k: Option<String>,
    #[arg(long, help = "Newton iterations in inv_sqrt")]
    omega: Option<String>,
    #[arg(long, help = "QR sweeps")]
    sweeps: Option<String>,
    #[arg(long, help = "fss | ass | auto")]
    compare_backend: Option<String>,
    #[arg(long, help = "basic | optimized")]
    qr_variant: Option<String>,
    #[arg(long)]
    latency_ms: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, help = "threaded | lockstep")]
    mode: Option<String>,
}

impl Overrides {
    fn build(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("reading {}: {e}", path.display())))?;
            config::apply_config_file(&mut cfg, &text).map_err(CliError::Usage)?;
        }
        config::apply_env(&mut cfg, std::env::vars()).map_err(CliError::Usage)?;
        let flags: [(&str, &Option<String>); 14] = [
            ("epsilon", &self.epsilon),
            ("delta", &self.delta),
            ("bins", &self.bins),
            ("sample_rate", &self.sample_rate),
            ("d_max", &self.d_max),
            ("m", &self.m),
            ("top_k", &self.top_k),
            ("omega", &self.omega),
            ("sweeps", &self.sweeps),
            ("compare_backend", &self.compare_backend),
            ("qr_variant", &self.qr_variant),
            ("latency_ms", &self.latency_ms),
            ("seed", &self.seed),
            ("mode", &self.mode),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config::apply_kv(&mut cfg, key, v).map_err(CliError::Usage)?;
            }
        }
        Ok(cfg)
    }
}

fn emit(report: &Report, out: Option<&PathBuf>) -> Result<(), CliError> {
    let text = report.render();
    print!("{text}");
    if let Some(path) = out {
        std::fs::write(path, &text)
            .map_err(|e| CliError::Run(format!("writing {}: {e}", path.display())))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.cmd {
        Cmd::E2e {
            graph,
            directed,
            out,
            overrides,
        } => {
            let cfg = overrides.build()?;
            let (report, pass) = cmd_e2e(&cfg, &graph, directed)?;
            emit(&report, out.as_ref())?;
            Ok(pass)
        }
        Cmd::BenchQr { m, k, seed, out } => {
            let report = cmd_bench_qr(&m, k, seed)?;
            emit(&report, out.as_ref())?;
            Ok(true)
        }
        Cmd::Storage {
            graph,
            directed,
            out,
            overrides,
        } => {
            let cfg = overrides.build()?;
            let report = cmd_storage(&cfg, &graph, directed)?;
            emit(&report, out.as_ref())?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: conformance checks failed (see check.* lines)");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
