//! Click conditioning on the interfered pump ports and the heralded
//! entangled states it leaves behind.
//!
//! With two sources the pump legs meet on the balanced two-port mixer,
//! which routes the shared coherent background entirely into the second
//! port and leaves the first port displacement-free. A bare avalanche
//! photodiode on that dark port then witnesses pump depletion directly,
//! and its click heralds an entangled pair state over the four microscopic
//! modes. Three sources use the three-port Fourier mixer instead: the
//! background exits through the first port and photodiodes sit on the two
//! dark ports, heralding one of two orthogonal two-qutrit states.
//!
//! Every heralded quantity is computed twice where the tabulated block
//! decomposition covers it: once from the conditioned state itself (the
//! engine route) and once from the block-amplitude table (the formula
//! route). The engine keeps the full mixture, including the sectors the
//! tabulated decomposition drops, and reports their mass as `discarded`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{DensityOperator, Mode, StateVector, FRAME_TOL};
use crate::gmatrix::gmatrix_numeric;
use crate::multisource::{
    block_amplitudes, build_basis, joint_output, micro_modes, BlockAmplitudes, PHI3,
};
use crate::pump::default_l_cut;
use crate::transforms::{apply_mode_unitary, bs2, dft3};
use crate::C64;

/// Binary photodiode reading: the detector fires or stays silent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Click,
    NoClick,
}

/// Project one detector outcome onto a mode of a density operator.
///
/// The measurement is the photon-presence POVM {|0><0|, 1 - |0><0|} in the
/// bare Fock basis, so the measured mode must sit in the zero-displacement
/// frame; a displaced mode would make "vacuum" frame-dependent. The mode is
/// traced out of the returned operator, whose trace is the outcome
/// probability when `rho` has unit trace.
///
/// # Errors
/// [`Error::NonZeroFrame`] when the measured mode carries a displacement;
/// [`Error::FrameMismatch`] when `rho` does not carry the mode at all.
pub fn apd_project(
    rho: &DensityOperator,
    mode: Mode,
    outcome: Outcome,
) -> Result<(DensityOperator, f64)> {
    let pos = rho
        .modes()
        .iter()
        .position(|&m| m == mode)
        .ok_or_else(|| Error::FrameMismatch(format!("detection: no mode {mode}")))?;
    let frame = rho.frames()[pos].norm();
    if frame > FRAME_TOL {
        return Err(Error::NonZeroFrame { mode: mode.to_string(), frame });
    }
    let mut filtered = DensityOperator::new(rho.modes().to_vec(), rho.frames().to_vec());
    for ((ket, bra), v) in rho.entries() {
        let hit = match outcome {
            Outcome::Click => ket[pos] >= 1 && bra[pos] >= 1,
            Outcome::NoClick => ket[pos] == 0 && bra[pos] == 0,
        };
        if hit {
            filtered.add_entry(ket.clone(), bra.clone(), *v);
        }
    }
    let keep: Vec<Mode> = rho.modes().iter().copied().filter(|&m| m != mode).collect();
    let reduced = filtered.partial_trace(&keep);
    let weight = reduced.trace();
    Ok((reduced, weight))
}

/// Weight of a heralded click pattern split over pump sectors, through
/// both computation routes.
///
/// Engine values are genuine probabilities on the normalized joint state;
/// formula values follow the unnormalized tabulation convention. In the
/// weak-squeezing regime the difference sits far below either value.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ComponentWeights {
    /// Leading tabulated sector, read off the conditioned engine state.
    pub p1_engine: f64,
    /// The same sector weight assembled from the block-amplitude table.
    pub p1_formula: f64,
    /// Secondary tabulated sector (two photons in the dark port), when the
    /// scheme has one.
    pub p2_engine: Option<f64>,
    pub p2_formula: Option<f64>,
    /// Click mass outside the tabulated sectors. The conditional state
    /// keeps it; the tabulated decomposition drops it.
    pub discarded: f64,
}

/// Named overlap of a conditional state with a pure target.
#[derive(Clone, Debug, Serialize)]
pub struct FidelityReport {
    pub target: String,
    pub fidelity: f64,
}

/// Conditional state and bookkeeping for one heralding pattern.
#[derive(Clone, Debug)]
pub struct HeraldResult {
    /// Per-detector readings, labeled by pump port.
    pub click_pattern: Vec<(String, Outcome)>,
    /// Probability of the pattern on the normalized joint state.
    pub probability: f64,
    /// Unit-trace conditional state over the microscopic modes. When the
    /// pattern has no support (for example at zero coupling) this is the
    /// zero operator and `fidelities` is empty.
    pub conditional: DensityOperator,
    /// Overlaps of the conditional state with its target states.
    pub fidelities: Vec<FidelityReport>,
    /// Sector decomposition of the click mass.
    pub weights: ComponentWeights,
}

/// Drop joint terms beyond `n_max` photon pairs in total and renormalize,
/// mirroring the block range the amplitude table covers.
fn retain_pair_blocks(joint: &StateVector, arity: u8, n_max: u32) -> StateVector {
    let micro = 2 * arity as usize;
    let mut out = StateVector::new(joint.modes().to_vec(), joint.frames().to_vec());
    for (occ, amp) in joint.terms() {
        if occ[..micro].iter().sum::<u32>() <= 2 * n_max {
            out.add_term(occ.clone(), *amp);
        }
    }
    out.normalized()
}

/// Sum of |psi><psi| over the sectors passing `pass`, with the total mass.
fn mixture_over(
    sectors: &BTreeMap<Vec<u32>, StateVector>,
    modes: Vec<Mode>,
    frames: Vec<C64>,
    mut pass: impl FnMut(&[u32]) -> bool,
) -> (DensityOperator, f64) {
    let mut rho = DensityOperator::new(modes, frames);
    let mut mass = 0.0;
    for (occ, psi) in sectors {
        if !pass(occ) {
            continue;
        }
        mass += psi.norm_sqr();
        for (a, va) in psi.terms() {
            for (b, vb) in psi.terms() {
                rho.add_entry(a.clone(), b.clone(), va * vb.conj());
            }
        }
    }
    (rho, mass)
}

fn require_bare(state: &StateVector, mode: Mode) -> Result<()> {
    let frame = state.frames()[state.mode_position(mode).expect("port present")].norm();
    if frame > FRAME_TOL {
        return Err(Error::NonZeroFrame { mode: mode.to_string(), frame });
    }
    Ok(())
}

/// Secondary-sector weight of the two-source click in the tabulation
/// convention: the two-photon dark-port amplitude squared, summed over its
/// four interfering member pairs.
fn two_photon_sector_formula(p: &BlockAmplitudes, s2: f64) -> f64 {
    0.5 * ((p.entry(0, 2) - p.entry(0, 3)).norm_sqr()
        + s2 * (p.entry(1, 3) - p.entry(1, 5)).norm_sqr()
        + s2 * s2 * (p.entry(2, 3) - p.entry(2, 5)).norm_sqr()
        + s2 * s2 * (p.entry(2, 8) - p.entry(2, 9)).norm_sqr())
}

/// Herald an entangled pair state from two interfered sources.
///
/// Pipeline: joint output truncated to two photon pairs overall, two-port
/// pump mixing, then a click on the dark first pump port; the second
/// (bright) port is traced out in its displaced basis. The conditional
/// state spans the four microscopic modes. Fidelities are reported against
/// the maximally entangled single-pair target (`psi-`) and against the
/// dominant pure component of the click sector (`dominant`), which adds
/// the double-pair correction.
///
/// # Errors
/// Propagates cutoff errors; [`Error::NonZeroFrame`] if the mixer failed
/// to darken the measured port (identical sources never trigger this).
///
/// # Panics
/// When |alpha eta| > 0.3: the tabulated decomposition the formula route
/// rests on holds for weak squeezing only.
pub fn herald_two_source(alpha: C64, eta: f64) -> Result<HeraldResult> {
    let s = alpha * eta;
    assert!(s.norm() <= 0.3, "tabulated decomposition needs weak squeezing");
    // Zero coupling leaves every pump leg in its coherent background, the
    // mixer empties the measured port exactly and the detector stays
    // silent. Short-circuit instead of pushing frame-change roundoff
    // through the sector split.
    if s.norm_sqr() == 0.0 {
        let micro = micro_modes(2);
        let zeros = vec![C64::new(0.0, 0.0); micro.len()];
        return Ok(HeraldResult {
            click_pattern: vec![(Mode::Pump(1).to_string(), Outcome::Click)],
            probability: 0.0,
            conditional: DensityOperator::new(micro, zeros),
            fidelities: Vec::new(),
            weights: ComponentWeights {
                p1_engine: 0.0,
                p1_formula: 0.0,
                p2_engine: Some(0.0),
                p2_formula: Some(0.0),
                discarded: 0.0,
            },
        });
    }
    let l_cut = default_l_cut(alpha.norm());
    let joint = retain_pair_blocks(&joint_output(alpha, eta, 2, 2, l_cut)?, 2, 2);
    let mixed = apply_mode_unitary(&joint, &bs2(), &[Mode::Pump(1), Mode::Pump(2)])?;
    require_bare(&mixed, Mode::Pump(1))?;
    let sectors = mixed.sectors_over(&[Mode::Pump(1), Mode::Pump(2)])?;

    let micro = micro_modes(2);
    let zeros = vec![C64::new(0.0, 0.0); micro.len()];
    let (raw, probability) = mixture_over(&sectors, micro, zeros, |occ| occ[0] >= 1);
    let p1_engine = sectors.get([1u32, 0].as_slice()).map_or(0.0, StateVector::norm_sqr);
    let p2_engine = sectors.get([2u32, 0].as_slice()).map_or(0.0, StateVector::norm_sqr);

    let g = gmatrix_numeric(alpha, eta, 2, 2, l_cut)?;
    let p = block_amplitudes(&g, 2)?;
    let s2 = s.norm_sqr();
    let p1_formula = s2 * (p.entry(1, 2).norm_sqr() + s2 * p.entry(2, 2).norm_sqr());
    let p2_formula = two_photon_sector_formula(&p, s2);

    let mut fidelities = Vec::new();
    let conditional = if probability > 0.0 {
        let conditional = raw.normalized();
        let single = build_basis("psi-", 2, alpha)?;
        fidelities.push(FidelityReport {
            target: "psi-".into(),
            fidelity: conditional.expectation_pure(&single)?,
        });
        let dominant = single
            .scaled(p.entry(1, 2))
            .add(&build_basis("phi-", 2, alpha)?.scaled(s * p.entry(2, 2)))?
            .normalized();
        fidelities.push(FidelityReport {
            target: "dominant".into(),
            fidelity: conditional.expectation_pure(&dominant)?,
        });
        conditional
    } else {
        raw
    };

    Ok(HeraldResult {
        click_pattern: vec![(Mode::Pump(1).to_string(), Outcome::Click)],
        probability,
        conditional,
        fidelities,
        weights: ComponentWeights {
            p1_engine,
            p1_formula,
            p2_engine: Some(p2_engine),
            p2_formula: Some(p2_formula),
            discarded: probability - p1_engine - p2_engine,
        },
    })
}

/// Herald one of the two entangled qutrit states from three interfered
/// sources.
///
/// Pipeline: joint output truncated to two photon pairs overall, the
/// three-port Fourier mixer on the pumps, then the two click patterns
/// (fire, silent) and (silent, fire) on the dark second and third ports;
/// the bright first port is traced out in its displaced basis. Returned in
/// that order. Fidelities are reported against the single-pair qutrit
/// targets (`psi_phi` respectively `psi_2phi`) and against the dominant
/// pure component of each click sector (`dominant`).
///
/// # Errors
/// As for [`herald_two_source`].
///
/// # Panics
/// When |alpha eta| > 0.3, as for [`herald_two_source`].
pub fn herald_three_source(alpha: C64, eta: f64) -> Result<(HeraldResult, HeraldResult)> {
    let s = alpha * eta;
    assert!(s.norm() <= 0.3, "tabulated decomposition needs weak squeezing");
    // As in the two-source scheme, zero coupling leaves both dark ports in
    // exact vacuum.
    if s.norm_sqr() == 0.0 {
        let empty = |fired: u8| HeraldResult {
            click_pattern: vec![
                (Mode::Pump(2).to_string(), if fired == 2 { Outcome::Click } else { Outcome::NoClick }),
                (Mode::Pump(3).to_string(), if fired == 3 { Outcome::Click } else { Outcome::NoClick }),
            ],
            probability: 0.0,
            conditional: DensityOperator::new(
                micro_modes(3),
                vec![C64::new(0.0, 0.0); micro_modes(3).len()],
            ),
            fidelities: Vec::new(),
            weights: ComponentWeights {
                p1_engine: 0.0,
                p1_formula: 0.0,
                p2_engine: None,
                p2_formula: None,
                discarded: 0.0,
            },
        };
        return Ok((empty(2), empty(3)));
    }
    let l_cut = default_l_cut(alpha.norm());
    let joint = retain_pair_blocks(&joint_output(alpha, eta, 3, 2, l_cut)?, 3, 2);
    let ports = [Mode::Pump(1), Mode::Pump(2), Mode::Pump(3)];
    let mixed = apply_mode_unitary(&joint, &dft3(PHI3), &ports)?;
    require_bare(&mixed, Mode::Pump(2))?;
    require_bare(&mixed, Mode::Pump(3))?;
    let sectors = mixed.sectors_over(&ports)?;

    let g = gmatrix_numeric(alpha, eta, 2, 2, l_cut)?;
    let p = block_amplitudes(&g, 3)?;
    let first = herald_three_pattern(&sectors, &p, alpha, s, true)?;
    let second = herald_three_pattern(&sectors, &p, alpha, s, false)?;
    Ok((first, second))
}

fn herald_three_pattern(
    sectors: &BTreeMap<Vec<u32>, StateVector>,
    p: &BlockAmplitudes,
    alpha: C64,
    s: C64,
    second_port: bool,
) -> Result<HeraldResult> {
    // Sector keys are (bright port, port 2, port 3) occupations.
    let (click_idx, quiet_idx) = if second_port { (1, 2) } else { (2, 1) };
    let (psi, phi, delta, delta_idx) = if second_port {
        ("psi_phi", "phi_phi", "delta_phi", 10)
    } else {
        ("psi_2phi", "phi_2phi", "delta_2phi", 11)
    };

    let micro = micro_modes(3);
    let zeros = vec![C64::new(0.0, 0.0); micro.len()];
    let (raw, probability) = mixture_over(sectors, micro, zeros, |occ| {
        occ[click_idx] >= 1 && occ[quiet_idx] == 0
    });
    let mut dominant_key = vec![0u32; 3];
    dominant_key[click_idx] = 1;
    let p1_engine = sectors.get(&dominant_key).map_or(0.0, StateVector::norm_sqr);

    // The single-photon dark-port sector carries the pair state plus both
    // double-pair corrections, so its tabulated weight needs all three.
    let s2 = s.norm_sqr();
    let p1_formula = s2
        * (p.entry(1, 2).norm_sqr()
            + s2 * (p.entry(2, 2).norm_sqr() + p.entry(2, delta_idx).norm_sqr()));

    let mut fidelities = Vec::new();
    let conditional = if probability > 0.0 {
        let conditional = raw.normalized();
        let single = build_basis(psi, 3, alpha)?;
        fidelities.push(FidelityReport {
            target: psi.into(),
            fidelity: conditional.expectation_pure(&single)?,
        });
        let dominant = single
            .scaled(p.entry(1, 2))
            .add(&build_basis(phi, 3, alpha)?.scaled(s * p.entry(2, 2)))?
            .add(&build_basis(delta, 3, alpha)?.scaled(s * p.entry(2, delta_idx)))?
            .normalized();
        fidelities.push(FidelityReport {
            target: "dominant".into(),
            fidelity: conditional.expectation_pure(&dominant)?,
        });
        conditional
    } else {
        raw
    };

    let fired = |port| if port == click_idx { Outcome::Click } else { Outcome::NoClick };
    Ok(HeraldResult {
        click_pattern: vec![
            (Mode::Pump(2).to_string(), fired(1)),
            (Mode::Pump(3).to_string(), fired(2)),
        ],
        probability,
        conditional,
        fidelities,
        weights: ComponentWeights {
            p1_engine,
            p1_formula,
            p2_engine: None,
            p2_formula: None,
            discarded: probability - p1_engine,
        },
    })
}

/// One row of a success-probability sweep at fixed squeezing alpha eta.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScalingPoint {
    pub eta: f64,
    pub alpha: f64,
    /// Two-source herald success scale |p_12|^2.
    pub p_two: f64,
    /// Three-source herald success scale 2 |p_12|^2, counting both
    /// patterns.
    pub p_three: f64,
    /// Leading and secondary sector weights of the two-source click.
    pub p1_two: f64,
    pub p2_two: f64,
    /// Displaced-ladder neighbor ratio |g_00 / g_01|.
    pub neighbor: f64,
}

/// Log-log slopes fitted over a coupling sweep at fixed alpha eta.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub alpha_eta: f64,
    pub points: Vec<ScalingPoint>,
    /// d ln(p_two) / d ln(eta); the success probabilities shrink with the
    /// square of the coupling.
    pub slope_p_two: f64,
    pub slope_p_three: f64,
    /// Slope of the sector ratio p1_two / p2_two, which grows as 1/eta^2.
    pub slope_sector_ratio: f64,
    /// Slope of the neighbor ratio, which grows as 1/eta at fixed
    /// alpha eta.
    pub slope_neighbor: f64,
    /// Per-point p_three / p_two; approaches 2 for weak coupling.
    pub ratio_three_to_two: Vec<f64>,
}

fn log_slope<'a>(points: impl Iterator<Item = (&'a ScalingPoint, f64)>) -> f64 {
    let xy: Vec<(f64, f64)> = points.map(|(p, y)| (p.eta.ln(), y.ln())).collect();
    let n = xy.len() as f64;
    let mx: f64 = xy.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my: f64 = xy.iter().map(|(_, y)| y).sum::<f64>() / n;
    let cov: f64 = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xy.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    cov / var
}

/// Sweep the herald success scales in the coupling at fixed squeezing and
/// fit their power laws.
///
/// # Errors
/// Propagates cutoff errors from the tables.
///
/// # Panics
/// With fewer than three couplings or a sweep narrower than most of a
/// decade, where the fitted slopes would not mean much.
pub fn probability_scaling(alpha_eta: f64, etas: &[f64]) -> Result<ScalingReport> {
    assert!(etas.len() >= 3, "need at least three couplings to fit");
    let lo = etas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = etas.iter().copied().fold(0.0f64, f64::max);
    assert!(lo > 0.0 && hi / lo >= 7.5, "couplings should span close to a decade");

    let points: Vec<ScalingPoint> = etas
        .par_iter()
        .map(|&eta| {
            let alpha = alpha_eta / eta;
            let l_cut = default_l_cut(alpha);
            let g = gmatrix_numeric(C64::new(alpha, 0.0), eta, 2, 2, l_cut)?;
            let two = block_amplitudes(&g, 2)?;
            let three = block_amplitudes(&g, 3)?;
            let s2 = alpha_eta * alpha_eta;
            Ok(ScalingPoint {
                eta,
                alpha,
                p_two: two.entry(1, 2).norm_sqr(),
                p_three: 2.0 * three.entry(1, 2).norm_sqr(),
                p1_two: s2 * (two.entry(1, 2).norm_sqr() + s2 * two.entry(2, 2).norm_sqr()),
                p2_two: two_photon_sector_formula(&two, s2),
                neighbor: g.neighbor_ratio(0)?[0],
            })
        })
        .collect::<Result<_>>()?;

    Ok(ScalingReport {
        alpha_eta,
        slope_p_two: log_slope(points.iter().map(|p| (p, p.p_two))),
        slope_p_three: log_slope(points.iter().map(|p| (p, p.p_three))),
        slope_sector_ratio: log_slope(points.iter().map(|p| (p, p.p1_two / p.p2_two))),
        slope_neighbor: log_slope(points.iter().map(|p| (p, p.neighbor))),
        ratio_three_to_two: points.iter().map(|p| p.p_three / p.p_two).collect(),
        points,
    })
}
