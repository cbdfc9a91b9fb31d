//! Consistency-check suite behind the CLI `verify` subcommand.
//!
//! Every check reruns one pillar of the model against an independent
//! route: the pump flow against a dense matrix exponential, the series
//! table against the numeric pipeline, the coupler identities against
//! their closed forms, the block decompositions and heralded sector
//! weights against brute-force projections, the entanglement measures
//! against their qualitative trend. Three outcomes are possible:
//!
//! - `Pass`: agreement within the stated tolerance;
//! - `Flagged`: a known tabulation defect reproduced its expected
//!   signature, with both conflicting values printed so the defect stays
//!   visible instead of being silently corrected;
//! - `Fail`: a genuine breach, which maps to exit code 2.

use serde::Serialize;

use crate::conditioning::{herald_three_source, herald_two_source};
use crate::error::Result;
use crate::fock::{DensityOperator, Mode, StateVector};
use crate::gmatrix::{gmatrix_numeric, gmatrix_series};
use crate::metrics::{hybrid_witness, negativity, Bipartition};
use crate::multisource::{build_basis, pump_modes, verify_block_decomposition, PHI3};
use crate::pump::{default_l_cut, expm_oracle, recommended_steps, retained_weight, solve_f};
use crate::spdc::{assemble_output, correlation_j, default_n_cut};
use crate::transforms::{apply_mode_unitary, bs2, dft3, ModeUnitary};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Flagged,
    Fail,
}

/// One named consistency check with its worst observed deviation.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    /// Worst observed deviation of the quantity under test.
    pub worst: f64,
    /// Tolerance the deviation is judged against.
    pub tolerance: f64,
    /// Evaluation points, per-item values, and for flagged checks both
    /// conflicting values.
    pub detail: String,
}

impl Check {
    fn graded(name: &str, worst: f64, tolerance: f64, detail: String) -> Self {
        let status = if worst <= tolerance { CheckStatus::Pass } else { CheckStatus::Fail };
        Check { name: name.to_string(), status, worst, tolerance, detail }
    }

    fn flagged(name: &str, signature_ok: bool, worst: f64, tolerance: f64, detail: String) -> Self {
        let status = if signature_ok { CheckStatus::Flagged } else { CheckStatus::Fail };
        Check { name: name.to_string(), status, worst, tolerance, detail }
    }
}

/// Outcome of the full suite at one configuration point.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub alpha: f64,
    pub eta: f64,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    /// (passed, flagged, failed) counts.
    pub fn counts(&self) -> (usize, usize, usize) {
        let count = |s: CheckStatus| self.checks.iter().filter(|c| c.status == s).count();
        (count(CheckStatus::Pass), count(CheckStatus::Flagged), count(CheckStatus::Fail))
    }

    /// Zero when nothing failed; flagged defects are expected and do not
    /// breach. Two on any failure.
    pub fn exit_code(&self) -> i32 {
        if self.counts().2 == 0 {
            0
        } else {
            2
        }
    }
}

/// Run every check at the given configuration point.
///
/// Checks whose regime is narrower than the configuration (the series
/// comparison and the heralding pipelines) clamp their evaluation point
/// and say so in their detail string.
///
/// # Errors
/// Propagates cutoff errors from the underlying pipelines; tolerance
/// breaches are reported in the result, not as errors.
pub fn run_verify(alpha: f64, eta: f64) -> Result<VerifyReport> {
    let a = C64::new(alpha, 0.0);
    let mut checks = vec![
        flow_vs_exponential(),
        pump_block_norms(eta),
        retained_weight_check(a, eta),
        output_normalization(a, eta)?,
        gram_hermiticity(a, eta)?,
    ];
    checks.extend(series_checks(alpha, eta)?);
    checks.extend(coupler_identity_checks()?);
    checks.push(block_decomposition_check(a, eta, 2)?);
    checks.push(block_decomposition_check(a, eta, 3)?);
    checks.extend(herald_checks(alpha, eta)?);
    checks.push(entanglement_positivity(a, eta)?);
    Ok(VerifyReport { alpha, eta, checks })
}

fn flow_vs_exponential() -> Check {
    let mut worst: f64 = 0.0;
    for l in [1u32, 5, 20, 50, 100] {
        for eta in [0.01, 0.05, 0.1, 0.2] {
            let numeric = solve_f(l, eta, recommended_steps(l, eta));
            let exact = expm_oracle(l, eta);
            for (x, y) in numeric.values.iter().zip(&exact) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    Check::graded(
        "flow-vs-exponential",
        worst,
        1e-9,
        "fixed-step integration vs dense exponential, l in {1,5,20,50,100}, \
         coupling in {0.01,0.05,0.1,0.2}"
            .to_string(),
    )
}

fn pump_block_norms(eta: f64) -> Check {
    let mut worst: f64 = 0.0;
    for l in 0..=60u32 {
        let f = solve_f(l, eta, recommended_steps(l, eta));
        let norm: f64 = f.values.iter().map(|v| v * v).sum();
        worst = worst.max((norm - 1.0).abs());
    }
    Check::graded(
        "pump-block-norms",
        worst,
        1e-10,
        format!("per-block norm drift over l <= 60 at coupling {eta}"),
    )
}

fn retained_weight_check(a: C64, eta: f64) -> Check {
    let l_cut = default_l_cut(a.norm());
    let total = retained_weight(a, eta, 8, l_cut);
    Check::graded(
        "retained-weight",
        (total - 1.0).abs(),
        1e-8,
        format!("Poisson-weighted retained weight with 8 pair rungs, l_cut {l_cut}"),
    )
}

fn output_normalization(a: C64, eta: f64) -> Result<Check> {
    let s = (a * eta).norm();
    let n_cut = default_n_cut(s);
    let out = assemble_output(a, eta, n_cut, default_l_cut(a.norm()))?;
    let tail = if s > 0.0 { 2.0 * s.powi(2 * (n_cut as i32 + 1)) } else { 0.0 };
    let tol = tail + 1e-8;
    Ok(Check::graded(
        "output-normalization",
        (out.state.norm_sqr() - 1.0).abs(),
        tol,
        format!("assembled squared norm vs 1 with {n_cut} pair rungs; truncation tail {tail:.3e}"),
    ))
}

fn gram_hermiticity(a: C64, eta: f64) -> Result<Check> {
    let out = assemble_output(a, eta, default_n_cut((a * eta).norm()), default_l_cut(a.norm()))?;
    let j = correlation_j(&out);
    Ok(Check::graded(
        "gram-hermiticity",
        j.max_hermiticity_defect(),
        1e-12,
        format!("largest |J_nm - conj(J_mn)| over {dim} pair rungs", dim = j.dim()),
    ))
}

/// Series-vs-numeric comparison. The expansion is sixth order in the
/// coupling, so the evaluation point is clamped into its regime.
fn series_checks(alpha: f64, eta: f64) -> Result<Vec<Check>> {
    let sa = if alpha > 0.0 { alpha.min(4.0) } else { 2.0 };
    let se = if eta > 0.0 { eta.min(0.02) } else { 0.01 };
    let point = format!("evaluated at alpha {sa}, coupling {se}");
    let tol = 50.0 * se.powi(6) * sa.powi(6).max(1.0);
    let numeric = gmatrix_numeric(C64::new(sa, 0.0), se, 2, 3, default_l_cut(sa))?;
    let series = gmatrix_series(sa, se);

    // Entries where the tabulation is self-consistent.
    let mut worst: f64 = 0.0;
    for (n, m) in [(0u32, 0u32), (0, 2), (0, 3), (1, 0), (1, 1)] {
        worst = worst.max((numeric.require(n, m)? - series.require(n, m)?).norm());
    }
    let consistent = Check::graded(
        "series-vs-numeric",
        worst,
        tol,
        format!("five consistent entries (rows 0-1 except the defective columns); {point}"),
    );

    // Known defect: the row-0 single-photon fourth-order coefficient is
    // printed without its intensity-free piece (10 alpha^3 / 24 where
    // propagation gives (10 alpha^2 + 1) alpha / 24), so the printed entry
    // trails the numeric overlap by exactly alpha eta^4 / 24.
    let residue = 100.0 * se.powi(6) * sa.powi(6).max(1.0);
    let nv = numeric.require(0, 1)?;
    let sv = series.require(0, 1)?;
    let dropped = sa * se.powi(4) / 24.0;
    let row_zero_ok = ((nv - sv).re - dropped).abs() < residue;
    let row_zero = Check::flagged(
        "series-row-zero-fourth-order",
        row_zero_ok,
        (nv - sv).norm(),
        tol,
        format!(
            "series {:+.6e} vs numeric {:+.6e}; gap {:+.3e} matches the dropped term {:+.3e}; {point}",
            sv.re,
            nv.re,
            (nv - sv).re,
            dropped
        ),
    );

    // Known defect: the row-1 pair-column entry is tabulated with the
    // opposite sign. The numeric pipeline adjudicates; both values are
    // printed and the magnitudes must still agree.
    let nv = numeric.require(1, 2)?;
    let sv = series.require(1, 2)?;
    let sign_ok = nv.re > 0.0 && sv.re < 0.0 && (nv + sv).norm() <= tol;
    let sign = Check::flagged(
        "series-pair-column-sign",
        sign_ok,
        (nv - sv).norm(),
        tol,
        format!(
            "series {:+.6e}{:+.6e}i vs numeric {:+.6e}{:+.6e}i; magnitudes agree to {:.2e}; {point}",
            sv.re,
            sv.im,
            nv.re,
            nv.im,
            (nv + sv).norm()
        ),
    );

    // Known defect: row 2 skips its fourth-order terms and prints them one
    // order high, each inflated by exactly (alpha eta)^2. Undoing the bump
    // must account for the full gap.
    let q = sa * sa;
    let e4 = se.powi(4);
    let r2 = 2f64.sqrt();
    let missing = [
        (331.0 * q * q + 337.0 * q + 36.0) * e4 / 360.0,
        (662.0 * sa * q + 337.0 * sa) * e4 / 360.0,
        331.0 * r2 * q * e4 / 360.0,
    ];
    let mut row_worst: f64 = 0.0;
    let mut row_ok = true;
    let mut lines = Vec::new();
    for (m, miss) in missing.iter().enumerate() {
        let nv = numeric.require(2, m as u32)?;
        let sv = series.require(2, m as u32)?;
        let gap = (nv - sv).re;
        row_worst = row_worst.max((nv - sv).norm());
        row_ok &= (gap - miss).abs() < residue;
        lines.push(format!(
            "m={m}: series {:+.6e}, numeric {:+.6e}, gap {:+.3e} vs de-bumped term {:+.3e}",
            sv.re, nv.re, gap, miss
        ));
    }
    let row = Check::flagged(
        "series-row-two-order",
        row_ok,
        row_worst,
        tol,
        format!("{}; {point}", lines.join("; ")),
    );

    Ok(vec![consistent, row_zero, sign, row])
}

struct CouplerIdentity {
    name: &'static str,
    arity: u8,
    input: &'static str,
    /// Printed outcome in the mixed-frame basis, bright port first for
    /// three ports, second for two.
    target: Vec<(Vec<u32>, C64)>,
    /// Report the engine-vs-target global phase instead of requiring it
    /// to be 1.
    phase_reported: bool,
}

fn coupler_identities() -> Vec<CouplerIdentity> {
    let one = C64::new(1.0, 0.0);
    let h = C64::new(0.5f64.sqrt(), 0.0);
    let t = C64::new((1.0f64 / 3.0).sqrt(), 0.0);
    let t2 = C64::new((2.0f64 / 3.0).sqrt(), 0.0);
    let ph = |k: f64| C64::from_polar(1.0, k * PHI3);
    let id = |name, arity, input, target, phase_reported| CouplerIdentity {
        name,
        arity,
        input,
        target,
        phase_reported,
    };
    vec![
        id("B1", 2, "vac_p", vec![(vec![0, 0], one)], false),
        id("B2", 2, "11", vec![(vec![2, 0], -h), (vec![0, 2], h)], false),
        id("B3", 2, "varphi+", vec![(vec![0, 1], one)], false),
        id("B4", 2, "varphi-", vec![(vec![1, 0], -one)], false),
        id("B5", 2, "sigma+", vec![(vec![2, 0], h), (vec![0, 2], h)], false),
        id("B6", 2, "sigma-", vec![(vec![1, 1], -one)], false),
        id("B7", 3, "vac_p", vec![(vec![0, 0, 0], one)], false),
        id("B8", 3, "varphi_0", vec![(vec![1, 0, 0], one)], false),
        // B9 and B10 are tabulated with the bright port excited; the
        // engine and photon-number conservation in the dark ports give the
        // bright port vacuum. Corrected forms here; the misprint is
        // reported separately.
        id("B9", 3, "varphi_-phi", vec![(vec![0, 1, 0], one)], false),
        id("B10", 3, "varphi_-2phi", vec![(vec![0, 0, 1], one)], false),
        id("B11", 3, "sigma_0", vec![(vec![2, 0, 0], t), (vec![0, 1, 1], t2)], false),
        id("B12", 3, "sigma_-phi", vec![(vec![0, 0, 2], t), (vec![1, 1, 0], t2)], false),
        id("B13", 3, "sigma_-2phi", vec![(vec![0, 2, 0], t), (vec![1, 0, 1], t2)], false),
        id("B14", 3, "zeta_0", vec![(vec![2, 0, 0], t2), (vec![0, 1, 1], -t)], true),
        id(
            "B15",
            3,
            "zeta_-phi",
            vec![(vec![0, 0, 2], ph(2.0) * t2), (vec![1, 1, 0], -ph(2.0) * t)],
            true,
        ),
        id(
            "B16",
            3,
            "zeta_-2phi",
            vec![(vec![0, 2, 0], ph(1.0) * t2), (vec![1, 0, 1], -ph(1.0) * t)],
            true,
        ),
    ]
}

fn coupler_target(arity: u8, terms: &[(Vec<u32>, C64)]) -> StateVector {
    let root = f64::from(arity).sqrt();
    let mut frames = vec![C64::new(0.0, 0.0); arity as usize];
    // Two-port mixing sends the background to the second port, the
    // three-port mixer to the first.
    let bright = if arity == 2 { 1 } else { 0 };
    frames[bright] = C64::new(root, 0.0);
    let mut s = StateVector::new(pump_modes(arity), frames);
    for (occ, amp) in terms {
        s.add_term(occ.clone(), *amp);
    }
    s
}

fn coupler_for(arity: u8) -> ModeUnitary {
    if arity == 2 {
        bs2()
    } else {
        dft3(PHI3)
    }
}

fn coupler_identity_checks() -> Result<Vec<Check>> {
    let alpha = C64::new(1.0, 0.0);
    let mut worst: f64 = 0.0;
    let mut phases = Vec::new();
    for ident in coupler_identities() {
        let input = build_basis(ident.input, ident.arity, alpha)?;
        let ports = pump_modes(ident.arity);
        let out = apply_mode_unitary(&input, &coupler_for(ident.arity), &ports)?;
        let target = coupler_target(ident.arity, &ident.target);
        if ident.phase_reported {
            let lam = target.inner(&out)?;
            let rotated = target.scaled(lam / lam.norm());
            worst = worst.max((lam.norm() - 1.0).abs());
            worst = worst.max(out.max_amplitude_diff(&rotated)?);
            phases.push(format!("{}: global phase {:+.3e} rad", ident.name, lam.arg()));
        } else {
            worst = worst.max(out.max_amplitude_diff(&target)?);
        }
    }
    let identities = Check::graded(
        "coupler-identities",
        worst,
        1e-10,
        format!(
            "all sixteen mixed-frame identities at alpha = 1; phase-reported entries: {}",
            phases.join(", ")
        ),
    );

    // The two tabulated single-excitation entries with a bright-port
    // excitation; the engine puts that excitation in a dark port.
    let mut lines = Vec::new();
    let mut gap: f64 = 0.0;
    let mut signature_ok = true;
    for (name, input, printed, corrected) in [
        ("B9", "varphi_-phi", vec![1u32, 1, 0], vec![0u32, 1, 0]),
        ("B10", "varphi_-2phi", vec![1, 0, 1], vec![0, 0, 1]),
    ] {
        let out =
            apply_mode_unitary(&build_basis(input, 3, alpha)?, &dft3(PHI3), &pump_modes(3))?;
        let on_printed = out.amplitude(&printed).norm();
        let on_corrected = out.amplitude(&corrected).norm();
        signature_ok &= on_printed <= 1e-10 && (on_corrected - 1.0).abs() <= 1e-10;
        gap = gap.max((on_printed - 1.0).abs());
        lines.push(format!(
            "{name}: tabulated label {printed:?} carries {on_printed:.3e}, \
             corrected label {corrected:?} carries {on_corrected:.6}"
        ));
    }
    let misprints =
        Check::flagged("coupler-identity-misprints", signature_ok, gap, 1e-10, lines.join("; "));

    Ok(vec![identities, misprints])
}

fn block_decomposition_check(a: C64, eta: f64, arity: u8) -> Result<Check> {
    // The rescaled member projections need a nonzero pair amplitude.
    let (ba, be) = clamp_herald_point(a.re, eta);
    let report = verify_block_decomposition(C64::new(ba, 0.0), be, arity, default_l_cut(ba))?;
    let sums_ok = report.block_sum_residuals.iter().all(|r| *r <= 1e-10);
    let norm_ok = report.normalization_defect <= report.normalization_tail_bound;
    let worst = report.max_member_residual;
    let name =
        if arity == 2 { "block-decomposition-two" } else { "block-decomposition-three" };
    let mut detail = format!(
        "{} members at alpha {ba}, coupling {be}; block-sum residuals {:?} (tol 1e-10); \
         normalization defect {:.3e} vs tail bound {:.3e}",
        report.members.len(),
        report.block_sum_residuals,
        report.normalization_defect,
        report.normalization_tail_bound,
    );
    if arity == 3 {
        detail.push_str(
            "; the repeated mixed term in the first-block pair amplitude is kept exactly \
             as tabulated (its two phase factors sum to -1)",
        );
    }
    let status_ok = sums_ok && norm_ok;
    let mut check = Check::graded(name, worst, 1e-9, detail);
    if !status_ok {
        check.status = CheckStatus::Fail;
    }
    Ok(check)
}

/// Pull the evaluation point into the weak-squeezing regime the heralding
/// pipelines and rescaled projections require.
fn clamp_herald_point(alpha: f64, eta: f64) -> (f64, f64) {
    let a = if alpha > 0.0 { alpha } else { 2.0 };
    let e = if eta > 0.0 { eta } else { 0.02 };
    if a * e <= 0.24 {
        (a, e)
    } else {
        (a, 0.24 / a)
    }
}

fn herald_checks(alpha: f64, eta: f64) -> Result<Vec<Check>> {
    let (ha, he) = clamp_herald_point(alpha, eta);
    let a = C64::new(ha, 0.0);

    let two = herald_two_source(a, he)?;
    let w = &two.weights;
    let worst2 = (w.p1_engine - w.p1_formula)
        .abs()
        .max((w.p2_engine.unwrap_or(0.0) - w.p2_formula.unwrap_or(0.0)).abs());
    let two_check = Check::graded(
        "herald-two-dual-route",
        worst2,
        1e-9,
        format!(
            "sector weights engine vs table at alpha {ha}, coupling {he}: \
             leading {:.6e} vs {:.6e}, secondary {:.6e} vs {:.6e}; discarded {:.3e}",
            w.p1_engine,
            w.p1_formula,
            w.p2_engine.unwrap_or(0.0),
            w.p2_formula.unwrap_or(0.0),
            w.discarded
        ),
    );

    let (first, second) = herald_three_source(a, he)?;
    let worst3 = (first.weights.p1_engine - first.weights.p1_formula)
        .abs()
        .max((second.weights.p1_engine - second.weights.p1_formula).abs());
    let overlap = build_basis("psi_phi", 3, a)?.inner(&build_basis("psi_2phi", 3, a)?)?.norm();
    let mut three_check = Check::graded(
        "herald-three-dual-route",
        worst3,
        1e-9,
        format!(
            "sector weights engine vs table at alpha {ha}, coupling {he}: \
             first pattern {:.6e} vs {:.6e}, second {:.6e} vs {:.6e}; \
             target overlap {overlap:.3e} (tol 1e-6)",
            first.weights.p1_engine,
            first.weights.p1_formula,
            second.weights.p1_engine,
            second.weights.p1_formula,
        ),
    );
    if overlap > 1e-6 {
        three_check.status = CheckStatus::Fail;
    }

    Ok(vec![two_check, three_check])
}

fn entanglement_positivity(a: C64, eta: f64) -> Result<Check> {
    if (a * eta).norm() == 0.0 {
        return Ok(Check::graded(
            "entanglement-positivity",
            0.0,
            0.0,
            "zero coupling or zero pump: no entanglement expected, nothing to check".to_string(),
        ));
    }
    let out = assemble_output(a, eta, default_n_cut((a * eta).norm()), default_l_cut(a.norm()))?;
    let rho = DensityOperator::from_pure(&out.state.normalized());
    let split = Bipartition::split(rho.modes(), &[Mode::Micro(1), Mode::Micro(2)])?;
    let neg = negativity(&rho, &split)?;
    let wit = hybrid_witness(&correlation_j(&out));
    let mut check = Check::graded(
        "entanglement-positivity",
        0.0,
        0.0,
        format!("negativity {neg:.6e}, Gram witness {wit:.6e}; both must be positive"),
    );
    if neg <= 0.0 || wit <= 0.0 {
        check.status = CheckStatus::Fail;
        check.worst = neg.min(wit);
    }
    Ok(check)
}
