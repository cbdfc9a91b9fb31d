//! The full signal/idler/pump output state of one source, its undepleted
//! limit, and the reduced pair density matrix.
//!
//! The output of a single source is a sum over emitted pair numbers n of
//! |nn> on the signal/idler pair times the conditional pump state. In the
//! displaced frame the conditional states are nearly parallel for small
//! coupling, so the reduced pair state is nearly the two-mode squeezed
//! vacuum; their residual distinguishability is exactly what degrades the
//! pair purity, and the Gram matrix J of the conditional states captures it.

use rayon::prelude::*;

use crate::error::Result;
use crate::fock::{ln_factorial, DensityOperator, Mode, StateVector, PRUNE_REL_TOL};
use crate::pump::{phi_family, poisson_amp, recommended_steps, solve_f, solve_f_banded};
use crate::C64;

/// Displaced-occupation budget for the pump leg of an assembled output.
const PUMP_FRAME_BUDGET: u32 = 64;

/// Extra rungs retained above the requested pair number in the bright-pump
/// windowed evaluation; truncation error decays factorially in the margin.
const WINDOW_RUNG_MARGIN: u32 = 40;

/// Assembled output state of one source.
#[derive(Debug, Clone)]
pub struct HybridOutput {
    /// Joint state over [signal, idler, pump], pump leg in frame alpha.
    pub state: StateVector,
    /// Pump coherent amplitude.
    pub alpha: C64,
    /// Dimensionless coupling.
    pub eta: f64,
    /// Largest retained pair number.
    pub n_cut: u32,
}

/// Gram matrix J_nm of the rescaled conditional pump states.
#[derive(Debug, Clone)]
pub struct CorrelationJ {
    entries: Vec<Vec<C64>>,
}

impl CorrelationJ {
    pub(crate) fn from_entries(entries: Vec<Vec<C64>>) -> Self {
        CorrelationJ { entries }
    }

    /// Number of tabulated pair numbers.
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Entry J_nm.
    ///
    /// # Panics
    /// If an index is out of range.
    pub fn entry(&self, n: usize, m: usize) -> C64 {
        self.entries[n][m]
    }

    /// Largest |J_nm - conj(J_mn)|.
    pub fn max_hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for n in 0..d {
            for m in 0..d {
                worst = worst.max((self.entries[n][m] - self.entries[m][n].conj()).norm());
            }
        }
        worst
    }
}

/// Pair-number cutoff whose discarded weight is below 1e-10 for the given
/// coupling product, standing in for the formally infinite sum.
pub fn default_n_cut(alpha_eta_mag: f64) -> u32 {
    if alpha_eta_mag <= 0.0 {
        return 1;
    }
    debug_assert!(alpha_eta_mag < 1.0);
    let n = (1e-10f64.ln() / (2.0 * alpha_eta_mag.ln())).ceil() as u32;
    n.max(1)
}

/// Assemble the output state over [signal, idler, pump] with the pump leg
/// expressed in the displaced frame alpha.
///
/// # Errors
/// [`Error::CutoffTooSmall`](crate::Error::CutoffTooSmall) if a conditional
/// pump state does not fit the displaced-frame budget.
///
/// # Panics
/// If `l_cut` is below the safe Poisson tail bound.
pub fn assemble_output(alpha: C64, eta: f64, n_cut: u32, l_cut: u32) -> Result<HybridOutput> {
    // Raw conditional states carry their own (alpha eta)^n factors, so no
    // explicit prefactor appears here and eta = 0 needs no special casing.
    let family = phi_family(alpha, eta, n_cut, l_cut, false)?;
    let modes = vec![Mode::Micro(1), Mode::Micro(2), Mode::Pump(1)];
    let frames = vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0), alpha];
    let mut state = StateVector::new(modes, frames);
    for phi in &family {
        let displaced = phi
            .to_state(Mode::Pump(1))
            .change_frame(&[alpha], PUMP_FRAME_BUDGET)?;
        for (occ, amp) in displaced.terms() {
            state.add_term(vec![phi.n, phi.n, occ[0]], *amp);
        }
    }
    state.prune(PRUNE_REL_TOL);
    Ok(HybridOutput { state, alpha, eta, n_cut })
}

/// Reference propagation in the bare Fock basis: expand the initial
/// coherent pump over number states, propagate each conserved block, and
/// collect the joint amplitudes. No displaced frames, no rescaling; serves
/// as the independent oracle for [`assemble_output`].
///
/// # Panics
/// If `|alpha| > 3`; the bare expansion needs hundreds of terms beyond that.
pub fn propagate_oracle(alpha: C64, eta: f64, l_cut: u32) -> StateVector {
    assert!(alpha.norm() <= 3.0, "bare-basis oracle is for dim pumps only");
    let modes = vec![Mode::Micro(1), Mode::Micro(2), Mode::Pump(1)];
    let mut state = StateVector::zero_frames(modes);
    let blocks: Vec<Vec<f64>> = (0..=l_cut)
        .into_par_iter()
        .map(|bl| solve_f(bl, eta, recommended_steps(bl, eta)).values)
        .collect();
    for (bl, block) in blocks.iter().enumerate() {
        let w = poisson_amp(alpha, bl as u32);
        for (n, f) in block.iter().enumerate() {
            let amp = w * f;
            if amp.norm_sqr() > 0.0 {
                state.add_term(vec![n as u32, n as u32, (bl - n) as u32], amp);
            }
        }
    }
    state
}

/// Two-mode squeezed vacuum over [signal, idler], truncated at `n_cut`
/// pairs and renormalized.
///
/// # Panics
/// If `r` is outside [0, 1.5].
pub fn tmsv_reference(r: f64, n_cut: u32) -> StateVector {
    assert!((0.0..=1.5).contains(&r), "squeezing parameter out of range");
    let modes = vec![Mode::Micro(1), Mode::Micro(2)];
    let mut s = StateVector::zero_frames(modes);
    let t = r.tanh();
    for n in 0..=n_cut {
        let amp = t.powi(n as i32) / r.cosh();
        if amp != 0.0 {
            s.add_term(vec![n, n], C64::new(amp, 0.0));
        }
    }
    s.normalized()
}

/// Gram matrix of the conditional pump states of an assembled output,
/// rescaled by (alpha eta)^n per row.
///
/// At alpha eta = 0 only the pair-number-zero state exists and the matrix
/// is 1 x 1.
pub fn correlation_j(out: &HybridOutput) -> CorrelationJ {
    let scale = out.alpha * out.eta;
    let dim = if scale.norm() == 0.0 { 1 } else { out.n_cut as usize + 1 };
    // Collect per-n displaced pump rows from the joint amplitudes.
    let mut rows: Vec<Vec<(u32, C64)>> = vec![Vec::new(); dim];
    for (occ, amp) in out.state.terms() {
        let n = occ[0] as usize;
        if n < dim {
            rows[n].push((occ[2], *amp));
        }
    }
    let mut entries = vec![vec![C64::new(0.0, 0.0); dim]; dim];
    for n in 0..dim {
        for m in 0..dim {
            let mut acc = C64::new(0.0, 0.0);
            let (short, long, conj_short) = if rows[n].len() <= rows[m].len() {
                (&rows[n], &rows[m], false)
            } else {
                (&rows[m], &rows[n], true)
            };
            for &(k, a) in short {
                if let Some(&(_, b)) = long.iter().find(|&&(kk, _)| kk == k) {
                    acc += if conj_short { a.conj() * b } else { b.conj() * a };
                }
            }
            // <Phi~_m | Phi~_n> = sum_k conj(raw_m) raw_n / (s^n conj(s)^m)
            let denom = scale.powu(n as u32) * scale.conj().powu(m as u32);
            entries[n][m] = if denom.norm() == 0.0 { acc } else { acc / denom };
        }
    }
    CorrelationJ::from_entries(entries)
}

fn ln_poisson_amp(alpha_mag: f64, k: u32) -> f64 {
    f64::from(k) * alpha_mag.ln() - alpha_mag * alpha_mag / 2.0 - 0.5 * ln_factorial(k)
}

/// Gram matrix of the conditional pump states for a bright real pump,
/// evaluated without materializing any state: the coherent envelope is
/// restricted to its Poisson window and each conserved block keeps only
/// the rungs that can be reached at this coupling.
///
/// # Panics
/// If `alpha <= 0` or the coupling can climb out of the retained rungs
/// (eta sqrt(l_hi) must stay below 1).
pub fn correlation_j_windowed(alpha: f64, eta: f64, n_max: u32) -> CorrelationJ {
    assert!(alpha > 0.0, "windowed evaluation needs a bright pump");
    let k_lo = (alpha * alpha - 10.0 * alpha).max(0.0).floor() as u32;
    let k_hi = (alpha * alpha + 10.0 * alpha + 20.0).ceil() as u32;
    let rungs = (n_max + 1 + WINDOW_RUNG_MARGIN) as usize;
    assert!(
        eta * f64::from(k_hi + n_max).sqrt() < 1.0,
        "coupling too strong for the truncated rung window"
    );
    let blocks: Vec<Vec<f64>> = (k_lo..=k_hi + n_max)
        .into_par_iter()
        .map(|bl| {
            let c_top = (rungs as f64) * f64::from(bl).sqrt();
            let omega = 2.0 * eta * c_top;
            let steps = ((100.0 * omega.powf(1.25)).ceil() as u32).max(2000);
            solve_f_banded(bl, eta, rungs, steps)
        })
        .collect();
    let dim = n_max as usize + 1;
    let s = alpha * eta;
    let mut entries = vec![vec![C64::new(0.0, 0.0); dim]; dim];
    for n in 0..dim {
        for m in 0..dim {
            let mut acc = 0.0;
            // Common bare pump occupation k pairs block k+n with block k+m.
            for k in k_lo..=k_hi {
                let wn = ln_poisson_amp(alpha, k + n as u32);
                let wm = ln_poisson_amp(alpha, k + m as u32);
                let fn_ = blocks[(k + n as u32 - k_lo) as usize][n];
                let fm = blocks[(k + m as u32 - k_lo) as usize][m];
                acc += (wn + wm).exp() * fn_ * fm;
            }
            entries[n][m] = C64::new(acc / s.powi((n + m) as i32), 0.0);
        }
    }
    CorrelationJ::from_entries(entries)
}

/// Reduced pair density matrix implied by a Gram matrix: unit-trace
/// operator over [signal, idler] with entries proportional to
/// s^n conj(s)^m J_nm on |nn><mm|, s = alpha eta.
pub fn rho12_from_j(j: &CorrelationJ, alpha_eta: C64) -> DensityOperator {
    let dim = j.dim();
    let weights: Vec<C64> = (0..dim).map(|n| alpha_eta.powu(n as u32)).collect();
    let norm: f64 = (0..dim)
        .map(|n| weights[n].norm_sqr() * j.entry(n, n).re)
        .sum();
    let modes = vec![Mode::Micro(1), Mode::Micro(2)];
    let frames = vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
    let mut rho = DensityOperator::new(modes, frames);
    for n in 0..dim {
        for m in 0..dim {
            let v = weights[n] * weights[m].conj() * j.entry(n, m) / norm;
            if v.norm_sqr() > 0.0 {
                rho.add_entry(vec![n as u32, n as u32], vec![m as u32, m as u32], v);
            }
        }
    }
    rho
}

/// Reduced pair density matrix of an assembled output (unit trace), plus
/// the Gram matrix of its conditional pump states.
pub fn reduced_rho12(out: &HybridOutput) -> (DensityOperator, CorrelationJ) {
    let j = correlation_j(out);
    let rho = DensityOperator::from_pure(&out.state.normalized())
        .partial_trace(&[Mode::Micro(1), Mode::Micro(2)]);
    (rho, j)
}

/// Overlap fidelity of the reduced pair state implied by `j` with the
/// truncated two-mode squeezed vacuum at tanh r = |alpha eta|.
pub fn undepleted_fidelity(j: &CorrelationJ, alpha_eta: f64) -> f64 {
    let rho = rho12_from_j(j, C64::new(alpha_eta, 0.0));
    let reference = tmsv_reference(alpha_eta.atanh(), j.dim() as u32 - 1);
    rho.expectation_pure(&reference)
        .expect("mode layouts are fixed by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pump::default_l_cut;
    use approx::assert_relative_eq;

    #[test]
    fn oracle_state_is_normalized_up_to_the_poisson_tail() {
        let s = propagate_oracle(C64::new(2.0, 0.0), 0.05, default_l_cut(2.0));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn assembled_state_matches_the_bare_basis_oracle() {
        // The oracle keeps every pair number, so the assembly cutoff must
        // leave the dropped tail below the comparison tolerance:
        // (alpha eta)^(n_cut + 1) = 0.1^11 = 1e-11.
        let alpha = C64::new(2.0, 0.0);
        let eta = 0.05;
        let l_cut = default_l_cut(2.0);
        let out = assemble_output(alpha, eta, 10, l_cut).unwrap();
        let oracle = propagate_oracle(alpha, eta, l_cut)
            .change_frame(&[C64::new(0.0, 0.0), C64::new(0.0, 0.0), alpha], 64)
            .unwrap();
        let diff = out.state.max_amplitude_diff(&oracle).unwrap();
        assert!(diff < 1e-9, "worst amplitude deviation {diff:.3e}");
    }

    #[test]
    fn assembled_state_with_complex_pump_matches_the_oracle() {
        // |alpha eta| = 0.06, so pair numbers above 8 sit below 1e-11.
        let alpha = C64::new(1.2, -0.9);
        let eta = 0.04;
        let l_cut = default_l_cut(alpha.norm());
        let out = assemble_output(alpha, eta, 8, l_cut).unwrap();
        let oracle = propagate_oracle(alpha, eta, l_cut)
            .change_frame(&[C64::new(0.0, 0.0), C64::new(0.0, 0.0), alpha], 64)
            .unwrap();
        let diff = out.state.max_amplitude_diff(&oracle).unwrap();
        assert!(diff < 1e-9, "worst amplitude deviation {diff:.3e}");
    }

    #[test]
    fn pair_numbers_always_match_between_signal_and_idler() {
        let out = assemble_output(C64::new(1.5, 0.0), 0.08, 6, default_l_cut(1.5)).unwrap();
        for (occ, _) in out.state.terms() {
            assert_eq!(occ[0], occ[1]);
        }
    }

    #[test]
    fn zero_coupling_leaves_a_displaced_vacuum() {
        let out = assemble_output(C64::new(2.0, 0.0), 0.0, 3, default_l_cut(2.0)).unwrap();
        let amp = out.state.amplitude(&[0, 0, 0]);
        assert_relative_eq!(amp.re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(out.state.norm_sqr(), 1.0, epsilon = 1e-12);
        let (rho, j) = reduced_rho12(&out);
        assert_eq!(j.dim(), 1);
        assert_relative_eq!(rho.purity(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tmsv_weights_follow_a_geometric_law() {
        let s = tmsv_reference(0.5, 12);
        let t = 0.5f64.tanh();
        let r01 = s.amplitude(&[1, 1]).re / s.amplitude(&[0, 0]).re;
        assert_relative_eq!(r01, t, epsilon = 1e-12);
        assert_relative_eq!(s.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gram_matrix_is_hermitian_and_matches_the_series_norm() {
        let alpha = 2.0f64;
        let eta = 0.05f64;
        let out = assemble_output(C64::new(alpha, 0.0), eta, 6, default_l_cut(alpha)).unwrap();
        let j = correlation_j(&out);
        assert!(j.max_hermiticity_defect() < 1e-12);
        // J_00 = <Phi~_0|Phi~_0> = 1 - |alpha eta|^2 + O(eta^4): depletion
        // bleeds weight out of the zero-pair branch. The weak-coupling
        // series gives an independent value for the same norm.
        let ser = crate::gmatrix::gmatrix_series(alpha, eta);
        let want: f64 = (0..=3u32).map(|m| ser.require(0, m).unwrap().norm_sqr()).sum();
        let tol = 50.0 * eta.powi(6) * alpha.powi(6).max(1.0);
        assert_relative_eq!(j.entry(0, 0).re, want, epsilon = tol);
        // Slightly non-parallel conditional states: |J_01| < sqrt(J00 J11).
        let gram = j.entry(0, 1).norm_sqr() / (j.entry(0, 0).re * j.entry(1, 1).re);
        assert!(gram < 1.0);
        assert!(gram > 0.99, "conditional states are nearly parallel, got {gram}");
    }

    #[test]
    fn reduced_pair_state_is_slightly_mixed() {
        let out = assemble_output(C64::new(2.0, 0.0), 0.05, 8, default_l_cut(2.0)).unwrap();
        let (rho, j) = reduced_rho12(&out);
        assert_relative_eq!(rho.trace(), 1.0, epsilon = 1e-12);
        let purity = rho.purity();
        assert!(purity < 1.0 - 1e-8, "depletion must leave a mark, purity {purity}");
        assert!(purity > 0.99, "but only a small one, purity {purity}");
        // The same physics through the Gram route.
        let rho_j = rho12_from_j(&j, out.alpha * out.eta);
        let d = (rho.purity() - rho_j.purity()).abs();
        assert!(d < 1e-9, "purity routes disagree by {d:.3e}");
    }

    #[test]
    fn windowed_gram_matrix_matches_the_assembled_route() {
        let alpha = 2.0;
        let eta = 0.05;
        let out = assemble_output(C64::new(alpha, 0.0), eta, 4, default_l_cut(alpha)).unwrap();
        let exact = correlation_j(&out);
        let windowed = correlation_j_windowed(alpha, eta, 4);
        for n in 0..=4 {
            for m in 0..=4 {
                let d = (exact.entry(n, m) - windowed.entry(n, m)).norm();
                assert!(d < 1e-9, "J[{n}][{m}] routes differ by {d:.3e}");
            }
        }
    }

    #[test]
    fn undepleted_limit_approaches_the_two_mode_squeezed_vacuum() {
        // Same alpha eta, decreasing eta: fidelity climbs toward 1.
        let f1 = undepleted_fidelity(&correlation_j_windowed(2.0, 0.05, 6), 0.1);
        let f2 = undepleted_fidelity(&correlation_j_windowed(10.0, 0.01, 6), 0.1);
        assert!(f2 > f1, "depletion hurts: {f1} vs {f2}");
        assert!(f2 > 0.999);
    }
}
