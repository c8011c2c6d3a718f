//! Layered run configuration: built-in defaults, then a flat key-value
//! config file, then `EIGENSHARE_*` environment variables, then CLI flags.
//! Every key uses the same spelling in all three places.

use eigenshare_core::protocol::RunConfig;
use eigenshare_core::SimMode;

/// Environment variables `EIGENSHARE_<KEY>` (key upper-cased) override the
/// config file; e.g. `EIGENSHARE_SEED=9` or `EIGENSHARE_QR_VARIANT=basic`.
pub const ENV_PREFIX: &str = "EIGENSHARE_";

pub const KEYS: &[&str] = &[
    "epsilon",
    "delta",
    "bins",
    "sample_rate",
    "d_max",
    "m",
    "top_k",
    "omega",
    "sweeps",
    "compare_backend",
    "qr_variant",
    "latency_ms",
    "seed",
    "mode",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("config key {key}: bad value {value:?}: {e}"))
}

/// Applies a single `key=value` pair onto `cfg`.
pub fn apply_kv(cfg: &mut RunConfig, key: &str, value: &str) -> Result<(), String> {
    let value = value.trim();
    match key {
        "epsilon" => cfg.epsilon = parse(key, value)?,
        "delta" => cfg.delta = parse(key, value)?,
        "bins" => cfg.bins = parse(key, value)?,
        "sample_rate" => cfg.sample_rate = parse(key, value)?,
        "d_max" => {
            cfg.d_max = if value == "auto" {
                None
            } else {
                Some(parse(key, value)?)
            }
        }
        "m" => cfg.m = parse(key, value)?,
        "top_k" => cfg.top_k = parse(key, value)?,
        "omega" => cfg.omega = parse(key, value)?,
        "sweeps" => cfg.sweeps = parse(key, value)?,
        "compare_backend" => cfg.compare_backend = parse(key, value)?,
        "qr_variant" => cfg.qr_variant = parse(key, value)?,
        "latency_ms" => cfg.latency_ms = parse(key, value)?,
        "seed" => cfg.seed = parse(key, value)?,
        "mode" => {
            cfg.mode = match value {
                "threaded" => SimMode::Threaded,
                "lockstep" => SimMode::Lockstep,
                _ => return Err(format!("config key mode: want threaded|lockstep, got {value:?}")),
            }
        }
        _ => return Err(format!("unknown config key {key:?}")),
    }
    Ok(())
}

/// Flat `key = value` lines, `#` comments, blank lines ignored.
pub fn apply_config_file(cfg: &mut RunConfig, text: &str) -> Result<(), String> {
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value, got {raw:?}", lineno + 1))?;
        apply_kv(cfg, key.trim(), value)?;
    }
    Ok(())
}

/// Applies any `EIGENSHARE_*` variables present in `vars`.
pub fn apply_env(
    cfg: &mut RunConfig,
    vars: impl Iterator<Item = (String, String)>,
) -> Result<(), String> {
    for (name, value) in vars {
        if let Some(suffix) = name.strip_prefix(ENV_PREFIX) {
            let key = suffix.to_ascii_lowercase();
            if KEYS.contains(&key.as_str()) {
                apply_kv(cfg, &key, &value)?;
            }
        }
    }
    Ok(())
}

pub fn mode_str(mode: SimMode) -> &'static str {
    match mode {
        SimMode::Threaded => "threaded",
        SimMode::Lockstep => "lockstep",
    }
}
