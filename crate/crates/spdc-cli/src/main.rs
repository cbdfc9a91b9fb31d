//! Batch front door for the depleted-pump SPDC model: solve the pump flow,
//! tabulate overlap matrices, assemble and condition output states, fit
//! coupling sweeps, and run the verification suite, emitting deterministic
//! machine-readable reports.
//!
//! Exit codes: 0 success, 1 invalid configuration or runtime failure,
//! 2 tolerance breach in `verify`.

mod config;
mod report;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, ensure, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use spdc_core::{
    assemble_output, correlation_j, gmatrix_numeric, gmatrix_series, herald_three_source,
    herald_two_source, hybrid_witness, negativity, probability_scaling, recommended_steps,
    retained_weight, rho12_from_j, run_verify, solve_f, undepleted_fidelity, Bipartition,
    CheckStatus, ComponentWeights, DensityOperator, FidelityReport, GMatrix, HeraldResult, Mode,
    Outcome, ScalingReport, C64, EIGEN_BUDGET,
};

use config::{Flags, Format, RunConfig};
use report::{emit, write_text, Report, TailBounds, SCHEMA};

#[derive(Parser)]
#[command(name = "spdc", version, about = "Depleted-pump SPDC simulator")]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the pump amplitude flow block by block and report the retained
    /// Poisson weight.
    PumpSolve,
    /// Tabulate pump overlaps numerically and as the weak-coupling series,
    /// with entrywise deltas.
    Gmatrix,
    /// Assemble the joint output state; report its correlation matrix,
    /// reduced pair state, and entanglement metrics.
    OutputState,
    /// Interfere two pump ports and condition on a click.
    Herald2,
    /// Interfere three pump ports and condition on each single-click
    /// pattern.
    Herald3,
    /// Fit success probabilities and sector ratios against the coupling.
    Sweep,
    /// Run the consistency suite; exit 2 on any tolerance breach.
    Verify,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version print to stdout and succeed; anything else is
            // an invalid invocation.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config = RunConfig::resolve(&cli.flags)?;
    let out = cli.flags.out.as_deref();
    if config.format == Format::Csv && !matches!(cli.command, Command::Sweep) {
        bail!("csv format applies only to sweep tables; structured reports are JSON");
    }
    match cli.command {
        Command::PumpSolve => pump_solve(&config, out)?,
        Command::Gmatrix => gmatrix(&config, out)?,
        Command::OutputState => output_state(&config, out)?,
        Command::Herald2 => herald2(&config, out)?,
        Command::Herald3 => herald3(&config, out)?,
        Command::Sweep => sweep(&config, out)?,
        Command::Verify => return verify(&config, out),
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct BlockRow {
    l: u32,
    steps: u32,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct PumpSolveBody {
    /// Poisson-weighted squared norm retained by the cutoffs; 1 up to the
    /// reported tails.
    retained_weight: f64,
    max_block_norm_defect: f64,
    blocks: Vec<BlockRow>,
}

fn pump_solve(config: &RunConfig, out: Option<&Path>) -> Result<()> {
    let mut blocks = Vec::new();
    let mut max_defect: f64 = 0.0;
    for l in 0..=config.l_cut {
        let steps = config.steps.unwrap_or_else(|| recommended_steps(l, config.eta));
        let f = solve_f(l, config.eta, steps);
        let norm: f64 = f.values.iter().map(|v| v * v).sum();
        max_defect = max_defect.max((norm - 1.0).abs());
        blocks.push(BlockRow { l, steps, values: f.values });
    }
    // At zero coupling every block keeps its full weight on the first rung
    // and the weighted sum telescopes to the retained Poisson mass, so it
    // can be reported exactly (1 - tail) instead of through the rounding of
    // a long direct sum.
    let retained = if config.eta == 0.0 {
        1.0 - report::poisson_tail(config.alpha * config.alpha, config.l_cut)
    } else {
        retained_weight(C64::new(config.alpha, 0.0), config.eta, config.n_cut, config.l_cut)
    };
    emit(
        &Report {
            schema: SCHEMA,
            command: "pump-solve",
            config,
            tail_bounds: TailBounds::from_config(config),
            body: PumpSolveBody {
                retained_weight: retained,
                max_block_norm_defect: max_defect,
                blocks,
            },
        },
        out,
    )
}

#[derive(Serialize)]
struct DeltaRow {
    n: u32,
    m: u32,
    numeric: C64,
    series: C64,
    delta: f64,
}

#[derive(Serialize)]
struct GmatrixBody {
    numeric: GMatrix,
    series: GMatrix,
    /// Entrywise |numeric - series| where both tables have the entry.
    deltas: Vec<DeltaRow>,
}

fn gmatrix(config: &RunConfig, out: Option<&Path>) -> Result<()> {
    ensure!(
        config.alpha * config.eta > 0.0,
        "gmatrix needs alpha and eta positive: row n of the table is rescaled by (alpha eta)^-n"
    );
    let numeric =
        gmatrix_numeric(C64::new(config.alpha, 0.0), config.eta, 2, config.m_max, config.l_cut)?;
    let series = gmatrix_series(config.alpha, config.eta);
    let mut deltas = Vec::new();
    for n in 0..=2 {
        for m in 0..=config.m_max {
            if let (Some(nv), Some(sv)) = (numeric.entry(n, m), series.entry(n, m)) {
                deltas.push(DeltaRow { n, m, numeric: nv, series: sv, delta: (nv - sv).norm() });
            }
        }
    }
    emit(
        &Report {
            schema: SCHEMA,
            command: "gmatrix",
            config,
            tail_bounds: TailBounds::from_config(config),
            body: GmatrixBody { numeric, series, deltas },
        },
        out,
    )
}

#[derive(Serialize)]
struct OutputStateBody {
    norm_defect: f64,
    /// Gram matrix of the rescaled conditional pump states, row major.
    correlation: Vec<Vec<C64>>,
    /// Diagonal of the reduced pair state: probability of n pairs.
    pair_probabilities: Vec<f64>,
    purity: f64,
    undepleted_fidelity: f64,
    negativity: f64,
    hybrid_witness: f64,
}

fn output_state(config: &RunConfig, out: Option<&Path>) -> Result<()> {
    let output =
        assemble_output(C64::new(config.alpha, 0.0), config.eta, config.n_cut, config.l_cut)?;
    let norm_defect = (output.state.norm_sqr() - 1.0).abs();
    let j = correlation_j(&output);
    let correlation = (0..j.dim())
        .map(|n| (0..j.dim()).map(|m| j.entry(n, m)).collect())
        .collect();
    let s = C64::new(config.alpha * config.eta, 0.0);
    let rho12 = rho12_from_j(&j, s);
    let pair_probabilities = (0..j.dim() as u32)
        .map(|n| rho12.entry(&[n, n], &[n, n]).re)
        .collect();

    let joint = DensityOperator::from_pure(&output.state.normalized());
    let dim = joint.entries().map(|((ket, _), _)| ket).collect::<BTreeSet<_>>().len();
    let budget = (config.fock_cut as usize).min(EIGEN_BUDGET);
    ensure!(dim <= budget, "dense metric dimension {dim} exceeds the budget {budget}");
    let split = Bipartition::split(joint.modes(), &[Mode::Micro(1), Mode::Micro(2)])?;

    emit(
        &Report {
            schema: SCHEMA,
            command: "output-state",
            config,
            tail_bounds: TailBounds::from_config(config),
            body: OutputStateBody {
                norm_defect,
                correlation,
                pair_probabilities,
                purity: rho12.purity(),
                undepleted_fidelity: undepleted_fidelity(&j, config.alpha * config.eta),
                negativity: negativity(&joint, &split)?,
                hybrid_witness: hybrid_witness(&j),
            },
        },
        out,
    )
}

#[derive(Serialize)]
struct PatternRow {
    clicks: Vec<(String, Outcome)>,
    probability: f64,
    /// Purity of the conditional pair state; absent when the pattern has no
    /// support.
    conditional_purity: Option<f64>,
    fidelities: Vec<FidelityReport>,
    weights: ComponentWeights,
}

impl PatternRow {
    fn from_result(r: &HeraldResult) -> Self {
        PatternRow {
            clicks: r.click_pattern.clone(),
            probability: r.probability,
            conditional_purity: (r.probability > 0.0).then(|| r.conditional.purity()),
            fidelities: r.fidelities.clone(),
            weights: r.weights,
        }
    }
}

#[derive(Serialize)]
struct HeraldBody {
    patterns: Vec<PatternRow>,
}

fn ensure_herald_regime(config: &RunConfig) -> Result<()> {
    ensure!(
        config.alpha * config.eta <= 0.3,
        "heralding needs alpha eta <= 0.3; the sector split is meaningless deeper in depletion"
    );
    Ok(())
}

fn herald2(config: &RunConfig, out: Option<&Path>) -> Result<()> {
    ensure_herald_regime(config)?;
    let r = herald_two_source(C64::new(config.alpha, 0.0), config.eta)?;
    emit(
        &Report {
            schema: SCHEMA,
            command: "herald2",
            config,
            tail_bounds: TailBounds::from_config(config),
            body: HeraldBody { patterns: vec![PatternRow::from_result(&r)] },
        },
        out,
    )
}

fn herald3(config: &RunConfig, out: Option<&Path>) -> Result<()> {
    ensure_herald_regime(config)?;
    let (a, b) = herald_three_source(C64::new(config.alpha, 0.0), config.eta)?;
    emit(
        &Report {
            schema: SCHEMA,
            command: "herald3",
            config,
            tail_bounds: TailBounds::from_config(config),
            body: HeraldBody {
                patterns: vec![PatternRow::from_result(&a), PatternRow::from_result(&b)],
            },
        },
        out,
    )
}

#[derive(Serialize)]
struct SweepBody {
    #[serde(flatten)]
    fit: ScalingReport,
}

fn sweep(config: &RunConfig, out: Option<&Path>) -> Result<()> {
    ensure!(config.sweep_eta.len() >= 3, "sweep needs at least three couplings to fit slopes");
    let lo = config.sweep_eta.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = config.sweep_eta.iter().copied().fold(0.0f64, f64::max);
    ensure!(hi / lo >= 7.5, "sweep couplings should span close to a decade (largest / smallest >= 7.5)");
    ensure!(
        config.fixed_alpha_eta <= 0.3,
        "sweep needs fixed-alpha-eta <= 0.3; the sector formulas hold in weak depletion"
    );
    let fit = probability_scaling(config.fixed_alpha_eta, &config.sweep_eta)?;
    match config.format {
        Format::Json => emit(
            &Report {
                schema: SCHEMA,
                command: "sweep",
                config,
                tail_bounds: TailBounds::from_config(config),
                body: SweepBody { fit },
            },
            out,
        ),
        Format::Csv => write_text(&sweep_csv(config, &fit)?, out),
    }
}

/// Sweep table as CSV. The envelope (config, tails, fitted slopes) rides in
/// leading comment lines so the table stays self-describing.
fn sweep_csv(config: &RunConfig, fit: &ScalingReport) -> Result<String> {
    let tails = TailBounds::from_config(config);
    let mut text = String::new();
    text.push_str(&format!("# schema {SCHEMA}\n# command sweep\n"));
    text.push_str(&format!("# config {}\n", serde_json::to_string(config)?));
    text.push_str(&format!(
        "# tail_bounds pair_truncation={:e} pump_truncation={:e}\n",
        tails.pair_truncation, tails.pump_truncation
    ));
    text.push_str(&format!(
        "# fits slope_p_two={} slope_p_three={} slope_sector_ratio={} slope_neighbor={}\n",
        fit.slope_p_two, fit.slope_p_three, fit.slope_sector_ratio, fit.slope_neighbor
    ));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "eta",
        "alpha",
        "p_two",
        "p_three",
        "p1_two",
        "p2_two",
        "neighbor",
        "ratio_three_to_two",
    ])?;
    for (p, r) in fit.points.iter().zip(&fit.ratio_three_to_two) {
        w.write_record(
            [p.eta, p.alpha, p.p_two, p.p_three, p.p1_two, p.p2_two, p.neighbor, *r]
                .map(|v| v.to_string()),
        )?;
    }
    text.push_str(&String::from_utf8(w.into_inner()?)?);
    Ok(text)
}

#[derive(Serialize)]
struct VerifyBody<'a> {
    pass: usize,
    flagged: usize,
    fail: usize,
    checks: &'a [spdc_core::Check],
}

fn verify(config: &RunConfig, out: Option<&Path>) -> Result<ExitCode> {
    let report = run_verify(config.alpha, config.eta)?;
    for check in &report.checks {
        let status = match check.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Flagged => "flagged",
            CheckStatus::Fail => "FAIL",
        };
        println!(
            "{status:7} {:32} worst {:.3e} tol {:.3e}  {}",
            check.name, check.worst, check.tolerance, check.detail
        );
    }
    let (pass, flagged, fail) = report.counts();
    println!("verify: {pass} pass, {flagged} flagged, {fail} fail");
    if out.is_some() {
        emit(
            &Report {
                schema: SCHEMA,
                command: "verify",
                config,
                tail_bounds: TailBounds::from_config(config),
                body: VerifyBody { pass, flagged, fail, checks: &report.checks },
            },
            out,
        )?;
    }
    Ok(ExitCode::from(u8::try_from(report.exit_code()).unwrap_or(1)))
}
