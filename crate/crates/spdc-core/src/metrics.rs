//! Quantitative measures of the micro-macro entanglement.
//!
//! Negativity is the standard mixed-state monotone built from the partial
//! transpose; it applies directly to the truncated output state and to the
//! heralded conditionals, which are mixed, where entanglement entropy
//! would not. The Gram witness reads the same physics off the pump-state
//! Gram matrix: tracing out the photon pairs leaves the pump mixed exactly
//! when the conditional pump states for zero and one pair fail to be
//! parallel. Both measures are this crate's own choices and are labeled
//! as such in reports.

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::fock::{DensityOperator, Mode};
use crate::spdc::CorrelationJ;

/// Largest dense dimension the negativity eigensolver accepts.
pub const EIGEN_BUDGET: usize = 4096;

/// Bipartition of a state's modes into two disjoint covering sides.
#[derive(Clone, Debug)]
pub struct Bipartition {
    side_a: Vec<Mode>,
    side_b: Vec<Mode>,
}

impl Bipartition {
    /// Split `modes` into `side_a` and its complement.
    ///
    /// # Errors
    /// [`Error::FrameMismatch`] when `side_a` repeats a mode or names one
    /// missing from `modes`.
    pub fn split(modes: &[Mode], side_a: &[Mode]) -> Result<Self> {
        let mut a = Vec::with_capacity(side_a.len());
        for m in side_a {
            if !modes.contains(m) {
                return Err(Error::FrameMismatch(format!("bipartition: no mode {m}")));
            }
            if a.contains(m) {
                return Err(Error::FrameMismatch(format!("bipartition: repeated mode {m}")));
            }
            a.push(*m);
        }
        let side_b = modes.iter().copied().filter(|m| !a.contains(m)).collect();
        Ok(Bipartition { side_a: a, side_b })
    }

    pub fn side_a(&self) -> &[Mode] {
        &self.side_a
    }

    pub fn side_b(&self) -> &[Mode] {
        &self.side_b
    }
}

/// Negativity of a unit-trace state across a bipartition: half the total
/// weight of the negative eigenvalues of the partial transpose, so half
/// of (trace norm minus one).
///
/// Zero for product states, 1/2 for a Bell pair. Tiny negative roundoff
/// is clamped away.
///
/// # Errors
/// [`Error::DimensionTooLarge`] when the state's label count exceeds
/// [`EIGEN_BUDGET`].
pub fn negativity(rho: &DensityOperator, split: &Bipartition) -> Result<f64> {
    let (_, dense) = rho.partial_transpose(split.side_a()).to_dense(EIGEN_BUDGET)?;
    let eigen = SymmetricEigen::new(dense);
    let sum_abs: f64 = eigen.eigenvalues.iter().map(|l| l.abs()).sum();
    let sum: f64 = eigen.eigenvalues.iter().sum();
    Ok(((sum_abs - sum) / 2.0).max(0.0))
}

/// Gram-matrix witness of hybrid entanglement at leading pair order.
///
/// One minus the Cauchy-Schwarz ratio |J_01|^2 / (J_00 J_11), clamped to
/// [0, 1]. Zero exactly when the zero- and one-pair conditional pump
/// states are parallel, which is when tracing out the pairs leaves the
/// pump pure at this order; any distortion of the depleted pump makes it
/// strictly positive.
///
/// # Panics
/// If `j` covers fewer than two pair numbers.
pub fn hybrid_witness(j: &CorrelationJ) -> f64 {
    assert!(j.dim() >= 2, "witness needs the zero- and one-pair entries");
    let ratio = j.entry(0, 1).norm_sqr() / (j.entry(0, 0).re * j.entry(1, 1).re);
    (1.0 - ratio).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::StateVector;
    use crate::spdc::{assemble_output, correlation_j, default_n_cut};
    use crate::pump::default_l_cut;
    use crate::C64;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn two_micro() -> Vec<Mode> {
        vec![Mode::Micro(1), Mode::Micro(2)]
    }

    #[test]
    fn bipartition_rejects_stray_or_repeated_modes() {
        let modes = two_micro();
        let ok = Bipartition::split(&modes, &[Mode::Micro(1)]).unwrap();
        assert_eq!(ok.side_a(), &[Mode::Micro(1)]);
        assert_eq!(ok.side_b(), &[Mode::Micro(2)]);
        assert!(Bipartition::split(&modes, &[Mode::Pump(1)]).is_err());
        assert!(Bipartition::split(&modes, &[Mode::Micro(1), Mode::Micro(1)]).is_err());
    }

    #[test]
    fn product_states_carry_no_negativity() {
        // ((|0> + |1>)/sqrt 2) tensor |1>.
        let mut psi = StateVector::zero_frames(two_micro());
        let r = 0.5f64.sqrt();
        psi.add_term(vec![0, 1], c(r, 0.0));
        psi.add_term(vec![1, 1], c(r, 0.0));
        let rho = DensityOperator::from_pure(&psi);
        let split = Bipartition::split(rho.modes(), &[Mode::Micro(1)]).unwrap();
        assert!(negativity(&rho, &split).unwrap() < 1e-10);
    }

    #[test]
    fn bell_pair_negativity_is_one_half() {
        let mut psi = StateVector::zero_frames(two_micro());
        let r = 0.5f64.sqrt();
        psi.add_term(vec![0, 1], c(r, 0.0));
        psi.add_term(vec![1, 0], c(r, 0.0));
        let rho = DensityOperator::from_pure(&psi);
        let split = Bipartition::split(rho.modes(), &[Mode::Micro(1)]).unwrap();
        assert_relative_eq!(negativity(&rho, &split).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn negativity_ignores_local_fock_preserving_phases() {
        // Mixture of a Bell-like state and a product state, before and
        // after diagonal phase unitaries on both sides.
        let build = |tha: f64, thb: f64| {
            let ph = |n: u32, th: f64| c(0.0, th * n as f64).exp();
            let mut one = StateVector::zero_frames(two_micro());
            one.add_term(vec![0, 1], c(0.6, 0.0) * ph(0, tha) * ph(1, thb));
            one.add_term(vec![1, 0], c(0.0, 0.8) * ph(1, tha) * ph(0, thb));
            let mut two = StateVector::zero_frames(two_micro());
            two.add_term(vec![1, 1], ph(1, tha) * ph(1, thb));
            let mut rho = DensityOperator::from_pure(&one.scaled(c(0.7f64.sqrt(), 0.0)));
            for ((k, b), v) in DensityOperator::from_pure(&two.scaled(c(0.3f64.sqrt(), 0.0))).entries()
            {
                rho.add_entry(k.clone(), b.clone(), *v);
            }
            rho
        };
        let split = Bipartition::split(&two_micro(), &[Mode::Micro(1)]).unwrap();
        let plain = negativity(&build(0.0, 0.0), &split).unwrap();
        let phased = negativity(&build(0.734, 2.113), &split).unwrap();
        assert!(plain > 0.1);
        assert_relative_eq!(plain, phased, epsilon = 1e-12);
    }

    #[test]
    fn dimension_budget_is_enforced() {
        let labels = EIGEN_BUDGET as u32 + 5;
        let mut rho = DensityOperator::new(vec![Mode::Micro(1)], vec![c(0.0, 0.0)]);
        for n in 0..labels {
            rho.add_entry(vec![n], vec![n], c(1.0 / f64::from(labels), 0.0));
        }
        let split = Bipartition::split(rho.modes(), &[Mode::Micro(1)]).unwrap();
        assert!(matches!(
            negativity(&rho, &split).unwrap_err(),
            Error::DimensionTooLarge { .. }
        ));
    }

    #[test]
    fn pump_entanglement_grows_with_coupling_at_fixed_squeezing() {
        // At fixed alpha eta the pair content is frozen; only the
        // depletion-induced distortion of the pump varies, and it grows
        // with the coupling.
        let alpha_eta = 0.1;
        let mut neg = Vec::new();
        let mut wit = Vec::new();
        for eta in [0.025, 0.05, 0.1] {
            let alpha = alpha_eta / eta;
            let out = assemble_output(
                c(alpha, 0.0),
                eta,
                default_n_cut(alpha_eta),
                default_l_cut(alpha),
            )
            .unwrap();
            let rho = DensityOperator::from_pure(&out.state.normalized());
            let split =
                Bipartition::split(rho.modes(), &[Mode::Micro(1), Mode::Micro(2)]).unwrap();
            neg.push(negativity(&rho, &split).unwrap());
            wit.push(hybrid_witness(&correlation_j(&out)));
        }
        for (n, w) in neg.iter().zip(&wit) {
            assert!(*n > 0.0, "negativity {n} not positive");
            assert!(*w > 0.0, "witness {w} not positive");
        }
        assert!(neg[0] < neg[1] && neg[1] < neg[2], "negativity not increasing: {neg:?}");
        assert!(wit[0] < wit[1] && wit[1] < wit[2], "witness not increasing: {wit:?}");
    }

    #[test]
    fn witness_vanishes_for_parallel_pump_rows() {
        // Proportional rows saturate Cauchy-Schwarz.
        let j = CorrelationJ::from_entries(vec![
            vec![c(1.0, 0.0), c(0.6, 0.2)],
            vec![c(0.6, -0.2), c(0.4, 0.0)],
        ]);
        assert_relative_eq!(hybrid_witness(&j), 0.0, epsilon = 1e-15);

        // Zero coupling: every conditional pump state is the same
        // coherent state, so the Gram matrix is all ones.
        let ones = CorrelationJ::from_entries(vec![
            vec![c(1.0, 0.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(1.0, 0.0)],
        ]);
        assert_relative_eq!(hybrid_witness(&ones), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn witness_is_positive_and_small_in_the_weak_regime() {
        let out = assemble_output(c(3.0, 0.0), 0.02, 4, default_l_cut(3.0)).unwrap();
        let w = hybrid_witness(&correlation_j(&out));
        assert!(w > 0.0);
        // Leading order: w ~ (alpha eta^2 / 3)^2.
        let lead = (3.0 * 0.02f64.powi(2) / 3.0).powi(2);
        assert!((w - lead).abs() < 0.3 * lead, "witness {w} vs leading {lead}");
    }
}
