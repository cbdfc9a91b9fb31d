//! Run configuration: built-in defaults, an optional JSON config file, and
//! command-line flags, resolved in that order (flags win).

use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use spdc_core::{default_l_cut, default_n_cut, EIGEN_BUDGET};

/// Report format. JSON carries the full envelope; CSV is the sweep point
/// table with the envelope folded into comment lines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to defaults.
#[derive(Args, Debug)]
pub struct Flags {
    /// Optional JSON config file; explicit flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Coherent pump amplitude, in [0, 8].
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Dimensionless coupling, in [0, 0.5].
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Largest pump block solved; derived from alpha when omitted.
    #[arg(long, global = true)]
    pub l_cut: Option<u32>,
    /// Largest retained pair number; derived from alpha eta when omitted.
    #[arg(long, global = true)]
    pub n_cut: Option<u32>,
    /// Largest displaced pump occupation in overlap tables.
    #[arg(long, global = true)]
    pub m_max: Option<u32>,
    /// Dense dimension budget for the entanglement metrics.
    #[arg(long, global = true)]
    pub fock_cut: Option<u32>,
    /// Fixed integrator step count; chosen per block when omitted.
    #[arg(long, global = true)]
    pub steps: Option<u32>,
    /// Sweep couplings, comma separated.
    #[arg(long, global = true, value_delimiter = ',', value_name = "ETA,ETA,...")]
    pub sweep_eta: Option<Vec<f64>>,
    /// Product alpha eta held fixed across sweep points.
    #[arg(long, global = true, value_name = "X")]
    pub fixed_alpha_eta: Option<f64>,
    /// Report file path; stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Report format; csv applies to the sweep table only.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

/// Optional config file contents; every field may be omitted.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    alpha: Option<f64>,
    eta: Option<f64>,
    l_cut: Option<u32>,
    n_cut: Option<u32>,
    m_max: Option<u32>,
    fock_cut: Option<u32>,
    steps: Option<u32>,
    sweep_eta: Option<Vec<f64>>,
    fixed_alpha_eta: Option<f64>,
    format: Option<Format>,
}

/// Fully resolved run configuration, embedded verbatim in every report.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub alpha: f64,
    pub eta: f64,
    pub l_cut: u32,
    pub n_cut: u32,
    pub m_max: u32,
    pub fock_cut: u32,
    /// `None` means each pump block picks its own step count.
    pub steps: Option<u32>,
    pub sweep_eta: Vec<f64>,
    pub fixed_alpha_eta: f64,
    pub format: Format,
}

impl RunConfig {
    /// Resolve defaults, config file, and flags into a validated config.
    ///
    /// # Errors
    /// Any violated range (alpha in [0, 8], eta in [0, 0.5], cutoffs and
    /// steps positive, sweep couplings in (0, 0.5]) or an unreadable or
    /// malformed config file.
    pub fn resolve(flags: &Flags) -> Result<RunConfig> {
        let file: FileConfig = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config file {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config file {}", path.display()))?
            }
            None => FileConfig::default(),
        };

        let alpha = flags.alpha.or(file.alpha).unwrap_or(2.0);
        let eta = flags.eta.or(file.eta).unwrap_or(0.02);
        ensure!(
            alpha.is_finite() && (0.0..=8.0).contains(&alpha),
            "alpha {alpha} outside [0, 8]"
        );
        ensure!(eta.is_finite() && (0.0..=0.5).contains(&eta), "eta {eta} outside [0, 0.5]");

        let config = RunConfig {
            alpha,
            eta,
            l_cut: flags.l_cut.or(file.l_cut).unwrap_or_else(|| default_l_cut(alpha)),
            n_cut: flags.n_cut.or(file.n_cut).unwrap_or_else(|| default_n_cut(alpha * eta)),
            m_max: flags.m_max.or(file.m_max).unwrap_or(3),
            fock_cut: flags.fock_cut.or(file.fock_cut).unwrap_or(EIGEN_BUDGET as u32),
            steps: flags.steps.or(file.steps),
            sweep_eta: flags
                .sweep_eta
                .clone()
                .or(file.sweep_eta)
                .unwrap_or_else(|| vec![0.005, 0.01, 0.02, 0.04]),
            fixed_alpha_eta: flags.fixed_alpha_eta.or(file.fixed_alpha_eta).unwrap_or(0.06),
            format: flags.format.or(file.format).unwrap_or(Format::Json),
        };

        for (name, value) in [
            ("l-cut", config.l_cut),
            ("n-cut", config.n_cut),
            ("m-max", config.m_max),
            ("fock-cut", config.fock_cut),
        ] {
            ensure!(value >= 1, "{name} must be positive");
        }
        if let Some(steps) = config.steps {
            ensure!(steps >= 1, "steps must be positive");
        }
        for &e in &config.sweep_eta {
            ensure!(
                e.is_finite() && e > 0.0 && e <= 0.5,
                "sweep coupling {e} outside (0, 0.5]"
            );
        }
        ensure!(
            config.fixed_alpha_eta.is_finite() && config.fixed_alpha_eta > 0.0,
            "fixed-alpha-eta must be positive"
        );
        Ok(config)
    }
}
