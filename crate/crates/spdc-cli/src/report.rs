//! Report envelope shared by every subcommand: schema version, the resolved
//! configuration, and the truncation error budgets the cutoffs imply.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::RunConfig;

pub const SCHEMA: u32 = 1;

#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub schema: u32,
    pub command: &'static str,
    pub config: &'a RunConfig,
    pub tail_bounds: TailBounds,
    #[serde(flatten)]
    pub body: T,
}

/// Squared-norm weight the resolved cutoffs leave out.
#[derive(Clone, Copy, Serialize)]
pub struct TailBounds {
    /// Pair numbers beyond n_cut: 2 |alpha eta|^(2 (n_cut + 1)).
    pub pair_truncation: f64,
    /// Poisson weight of pump blocks beyond l_cut + n_cut.
    pub pump_truncation: f64,
}

impl TailBounds {
    pub fn from_config(config: &RunConfig) -> Self {
        let s2 = (config.alpha * config.eta).powi(2);
        TailBounds {
            pair_truncation: 2.0 * s2.powi(config.n_cut as i32 + 1),
            pump_truncation: poisson_tail(config.alpha * config.alpha, config.l_cut + config.n_cut),
        }
    }
}

/// Poisson mass above k_max, summed forward from the first excluded term so
/// tiny tails are not drowned by the rounding of the retained mass.
pub fn poisson_tail(lambda: f64, k_max: u32) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let mut term = (-lambda).exp();
    for k in 1..=k_max + 1 {
        term *= lambda / f64::from(k);
    }
    let mut tail = term;
    let mut k = k_max + 2;
    while term > tail * 1e-18 && term > 0.0 {
        term *= lambda / f64::from(k);
        tail += term;
        k += 1;
    }
    tail
}

/// Serialize the report as pretty JSON to the path, or to stdout.
pub fn emit<T: Serialize>(report: &Report<'_, T>, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report).context("serializing report")?;
    text.push('\n');
    write_text(&text, out)
}

pub fn write_text(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing report to {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}
