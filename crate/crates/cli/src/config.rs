//! Run configuration: an optional TOML file, then command-line flags on top.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use lifespan_core::experiments::DEFAULT_EPS;
use lifespan_core::fd::MAX_CFL;
use lifespan_core::suite::{Check, DEFAULT_SEED};
use lifespan_core::DataFamily;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Verify,
    Certify,
    Simulate,
    Sweep,
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML file with any of the keys below (underscores for dashes)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Nonlinearity exponent, 1 < p < 2
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Support radius of the data, k ≥ 1
    #[arg(long, global = true)]
    pub k: Option<f64>,
    /// Data amplitude
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Comma-separated amplitudes, strictly decreasing
    #[arg(long, global = true, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    /// bump_positive_g, bump_meanzero_g or f_only
    #[arg(long, global = true)]
    pub data: Option<String>,
    #[arg(long, global = true)]
    pub grid_dr: Option<f64>,
    /// Time step; at most half of the radial step
    #[arg(long, global = true)]
    pub grid_dt: Option<f64>,
    #[arg(long, global = true)]
    pub t_max: Option<f64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Checks run by `verify`, comma-separated (default: all)
    #[arg(long, global = true, value_delimiter = ',')]
    pub checks: Option<Vec<String>>,
    /// A priori ladder horizons in units of k, comma-separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub ladder: Option<Vec<f64>>,
    /// Spacing of the exported field written by `simulate`
    #[arg(long, global = true)]
    pub output_step: Option<f64>,
    /// Blow-up threshold on sup |u|
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Number of refinement levels for blow-up detection
    #[arg(long, global = true)]
    pub levels: Option<usize>,
    /// Attach certified lower bounds to sweep records
    #[arg(long, global = true)]
    pub certified: bool,
}

/// Contents of a config file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub p: Option<f64>,
    pub k: Option<f64>,
    pub eps: Option<f64>,
    pub eps_list: Option<Vec<f64>>,
    pub data: Option<String>,
    pub grid_dr: Option<f64>,
    pub grid_dt: Option<f64>,
    pub t_max: Option<f64>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub checks: Option<Vec<String>>,
    pub ladder: Option<Vec<f64>>,
    pub output_step: Option<f64>,
    pub threshold: Option<f64>,
    pub levels: Option<usize>,
    pub certified: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("config: cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("config: {}: {e}", path.display()))
    }
}

/// Fully resolved settings. Everything serialized here determines the
/// results; the output directory and worker count do not, so they are
/// left out of the serialized form and of the hash.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub p: f64,
    pub k: f64,
    pub data: DataFamily,
    pub eps: Option<f64>,
    pub eps_list: Option<Vec<f64>>,
    pub grid_dr: f64,
    pub grid_dt: f64,
    pub t_max: f64,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub ladder: Vec<f64>,
    pub output_step: f64,
    pub threshold: f64,
    pub levels: usize,
    pub certified: bool,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub workers: usize,
}

impl RunConfig {
    /// Merges defaults, the config file and the flags, in increasing
    /// priority, and validates the result. Errors name the offending key.
    pub fn resolve(command: Command, flags: &Flags) -> Result<Self, String> {
        let file = match &flags.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let data_id = flags.data.clone().or(file.data).unwrap_or_else(|| DataFamily::BumpPositiveG.id().into());
        let data = data_id.parse::<DataFamily>().map_err(|_| {
            let ids: Vec<&str> = DataFamily::ALL.iter().map(|d| d.id()).collect();
            format!("data: unknown family `{data_id}` (expected one of {})", ids.join(", "))
        })?;
        let checks = match flags.checks.clone().or(file.checks) {
            None => Check::ALL.to_vec(),
            Some(ids) => ids
                .iter()
                .map(|s| s.trim().parse::<Check>().map_err(|_| format!("checks: unknown check `{s}`")))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let grid_dr = flags.grid_dr.or(file.grid_dr).unwrap_or(0.02);
        let grid_dt = flags.grid_dt.or(file.grid_dt).unwrap_or(MAX_CFL * grid_dr);
        let t_max = flags.t_max.or(file.t_max).unwrap_or(match command {
            Command::Sweep => 200.0,
            _ => 30.0,
        });
        let cfg = Self {
            command,
            p: flags.p.or(file.p).unwrap_or(1.5),
            k: flags.k.or(file.k).unwrap_or(1.0),
            data,
            eps: flags.eps.or(file.eps),
            eps_list: flags.eps_list.clone().or(file.eps_list),
            grid_dr,
            grid_dt,
            t_max,
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            checks,
            ladder: flags.ladder.clone().or(file.ladder).unwrap_or_else(|| vec![8.0, 16.0, 32.0, 64.0]),
            output_step: flags.output_step.or(file.output_step).unwrap_or(10.0 * grid_dt),
            threshold: flags.threshold.or(file.threshold).unwrap_or(1e6),
            levels: flags.levels.or(file.levels).unwrap_or(2),
            certified: flags.certified || file.certified.unwrap_or(false),
            out: flags.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from(".")),
            workers: flags.workers.or(file.workers).unwrap_or(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.p > 1.0 && self.p < 2.0) {
            return Err(format!("p: must satisfy 1 < p < 2, got {}", self.p));
        }
        if !(self.k >= 1.0 && self.k.is_finite()) {
            return Err(format!("k: must satisfy k ≥ 1, got {}", self.k));
        }
        if let Some(e) = self.eps {
            if !(e > 0.0 && e.is_finite()) {
                return Err(format!("eps: must be positive, got {e}"));
            }
        }
        if let Some(list) = &self.eps_list {
            if list.is_empty() {
                return Err("eps_list: must not be empty".into());
            }
            if let Some(e) = list.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
                return Err(format!("eps_list: entries must be positive, got {e}"));
            }
            if list.windows(2).any(|w| w[1] >= w[0]) {
                return Err("eps_list: must be strictly decreasing (no duplicates)".into());
            }
        }
        if !(self.grid_dr > 0.0 && self.grid_dr.is_finite()) {
            return Err(format!("grid_dr: must be positive, got {}", self.grid_dr));
        }
        if !(self.grid_dt > 0.0 && self.grid_dt <= MAX_CFL * self.grid_dr * (1.0 + 1e-12)) {
            return Err(format!("grid_dt: must lie in (0, {MAX_CFL}·grid_dr], got {}", self.grid_dt));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(format!("t_max: must be positive, got {}", self.t_max));
        }
        if self.ladder.len() < 2 || self.ladder.iter().any(|h| !(*h > 0.0)) || self.ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err("ladder: need at least two positive horizons in increasing order".into());
        }
        if !(self.output_step > 0.0) {
            return Err(format!("output_step: must be positive, got {}", self.output_step));
        }
        if !(self.threshold > 0.0) {
            return Err(format!("threshold: must be positive, got {}", self.threshold));
        }
        if self.levels < 2 {
            return Err(format!("levels: need at least 2, got {}", self.levels));
        }
        if self.workers == 0 {
            return Err("workers: need at least 1".into());
        }
        Ok(())
    }

    pub fn cfl(&self) -> f64 {
        self.grid_dt / self.grid_dr
    }

    /// Eps ladder for sweeps: the explicit list, else the default ladder.
    pub fn sweep_eps(&self) -> Vec<f64> {
        self.eps_list.clone().unwrap_or_else(|| DEFAULT_EPS.to_vec())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let dir = std::env::temp_dir().join(format!("lifespan-cfg-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        fs::write(&path, "p = 1.3\nk = 2.0\ndata = \"f_only\"\n").unwrap();
        let flags = Flags { config: Some(path), p: Some(1.7), ..Default::default() };
        let cfg = RunConfig::resolve(Command::Simulate, &flags).unwrap();
        assert_eq!(cfg.p, 1.7);
        assert_eq!(cfg.k, 2.0);
        assert_eq!(cfg.data, DataFamily::FOnly);
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn invalid_values_name_their_key() {
        let bad = |flags: Flags| RunConfig::resolve(Command::Sweep, &flags).unwrap_err();
        assert!(bad(Flags { p: Some(2.5), ..Default::default() }).starts_with("p:"));
        assert!(bad(Flags { k: Some(0.5), ..Default::default() }).starts_with("k:"));
        assert!(bad(Flags { eps_list: Some(vec![0.5, 0.5]), ..Default::default() }).starts_with("eps_list:"));
        assert!(bad(Flags { grid_dt: Some(0.02), ..Default::default() }).starts_with("grid_dt:"));
        assert!(bad(Flags { data: Some("plateau".into()), ..Default::default() }).starts_with("data:"));
    }

    #[test]
    fn hash_ignores_output_directory_and_workers() {
        let a = RunConfig::resolve(Command::Sweep, &Flags::default()).unwrap();
        let b = RunConfig::resolve(
            Command::Sweep,
            &Flags { out: Some("elsewhere".into()), workers: Some(4), ..Default::default() },
        )
        .unwrap();
        let c = RunConfig::resolve(Command::Sweep, &Flags { p: Some(1.4), ..Default::default() }).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
