//! Overlaps g_nm of the rescaled pair-number-n pump states with displaced
//! number states |m, alpha>, numerically and as weak-coupling series.
//!
//! The g table is the bridge between the exact pump dynamics and the
//! entangled-basis bookkeeping of the multi-source setups: every printed
//! block amplitude is a polynomial in these overlaps. Columns scale as
//! g_nm = O(eta^m) at fixed alpha eta, so each extra displaced excitation of
//! the pump costs one more power of the coupling.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::Mode;
use crate::pump::phi_family;
use crate::C64;

/// How a [`GMatrix`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GMethod {
    /// Exact pump flow re-expanded over the displaced frame.
    Numeric,
    /// Sixth-order weak-coupling series, available for n <= 2, m <= 3.
    Series,
}

/// Table of overlaps g_nm = <m, alpha | Phi~_n>, n indexing the emitted
/// pair number and m the displaced pump occupation.
///
/// Entries a construction method does not provide are `None`; the series
/// table is ragged while the numeric table is full.
#[derive(Debug, Clone, Serialize)]
pub struct GMatrix {
    /// Pump coherent amplitude.
    pub alpha: C64,
    /// Dimensionless coupling.
    pub eta: f64,
    /// Largest pair number tabulated.
    pub n_max: u32,
    /// Largest displaced occupation tabulated.
    pub m_max: u32,
    entries: Vec<Vec<Option<C64>>>,
    /// Provenance of the entries.
    pub method: GMethod,
}

impl GMatrix {
    /// Entry g_nm, `None` outside the table or where the method has no
    /// expression.
    pub fn entry(&self, n: u32, m: u32) -> Option<C64> {
        self.entries
            .get(n as usize)
            .and_then(|row| row.get(m as usize))
            .copied()
            .flatten()
    }

    /// Entry g_nm or [`Error::MissingGEntry`].
    pub fn require(&self, n: u32, m: u32) -> Result<C64> {
        self.entry(n, m).ok_or(Error::MissingGEntry { n: n as usize, m: m as usize })
    }

    /// Magnitude ratios |g_nm| / |g_n,m+1| along row n.
    ///
    /// # Errors
    /// [`Error::DivisionByZeroEntry`] when a denominator entry is exactly
    /// zero, [`Error::MissingGEntry`] when the row is not tabulated that far.
    pub fn neighbor_ratio(&self, n: u32) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        let mut m = 0;
        while self.entry(n, m + 1).is_some() {
            let num = self.require(n, m)?;
            let den = self.require(n, m + 1)?;
            if den.norm() == 0.0 {
                return Err(Error::DivisionByZeroEntry {
                    n: n as usize,
                    m: m as usize + 1,
                });
            }
            out.push(num.norm() / den.norm());
            m += 1;
        }
        if out.is_empty() {
            return Err(Error::MissingGEntry { n: n as usize, m: 1 });
        }
        Ok(out)
    }

    /// sum_n |alpha eta|^(2n) sum_m |g_nm|^2 over the tabulated entries;
    /// approaches 1 as the table grows, since the rescaled expansion of the
    /// full output state is normalized.
    pub fn gram_normalization(&self) -> f64 {
        let s = (self.alpha * self.eta).norm_sqr();
        self.entries
            .iter()
            .enumerate()
            .map(|(n, row)| {
                s.powi(n as i32)
                    * row
                        .iter()
                        .flatten()
                        .map(|g| g.norm_sqr())
                        .sum::<f64>()
            })
            .sum()
    }
}

/// Occupation budget used internally when re-expanding a pump state over
/// the displaced frame; generous against every m_max the crate uses.
fn frame_budget(m_max: u32) -> u32 {
    (m_max + 48).max(64)
}

/// g table from the exact pump flow: each rescaled pair-number state is
/// re-expanded over the displaced frame alpha and read off at occupations
/// m <= m_max.
///
/// # Errors
/// Propagates [`Error::RescaleUndefined`] at alpha eta = 0 with n_max >= 1
/// and [`Error::CutoffTooSmall`] from the re-expansion.
///
/// # Panics
/// If `l_cut` is below the safe Poisson tail bound (see
/// [`crate::pump::default_l_cut`]).
pub fn gmatrix_numeric(
    alpha: C64,
    eta: f64,
    n_max: u32,
    m_max: u32,
    l_cut: u32,
) -> Result<GMatrix> {
    let family = phi_family(alpha, eta, n_max, l_cut, true)?;
    let budget = frame_budget(m_max);
    let mut entries = Vec::with_capacity(n_max as usize + 1);
    for phi in &family {
        let displaced = phi
            .to_state(Mode::Pump(1))
            .change_frame(&[alpha], budget)?;
        let row: Vec<Option<C64>> = (0..=m_max)
            .map(|m| Some(displaced.amplitude(&[m])))
            .collect();
        entries.push(row);
    }
    Ok(GMatrix { alpha, eta, n_max, m_max, entries, method: GMethod::Numeric })
}

/// Sixth-order weak-coupling series for the g table, exactly as tabulated
/// in the source analysis: rows n = 0, 1, 2 up to m = 3, 2, 2.
///
/// Three tabulation defects are reproduced verbatim rather than patched,
/// because the numeric pipeline is the adjudicating route and the
/// verification suite reports both values side by side:
/// - the n = 0, m = 1 fourth-order coefficient is printed as 10 alpha^3 / 24
///   and drops its intensity-free piece; propagation gives
///   (10 alpha^2 + 1) alpha / 24, so the printed entry trails the true
///   overlap by exactly alpha eta^4 / 24;
/// - the n = 1, m = 2 entry carries a minus sign while brute-force
///   propagation gives a positive overlap of the same magnitude;
/// - the n = 2 row skips its fourth-order terms, printing them one order
///   higher (each inflated by exactly alpha^2 eta^2).
/// Real pump amplitudes only, matching the printed expressions.
pub fn gmatrix_series(alpha: f64, eta: f64) -> GMatrix {
    let a = alpha;
    let q = a * a; // |alpha|^2 for real alpha
    let e2 = eta * eta;
    let e4 = e2 * e2;
    let e6 = e4 * e2;
    let r2 = 2.0f64.sqrt();
    let r6 = 6.0f64.sqrt();

    let g00 = 1.0 - q * e2 / 2.0 + (5.0 * q * q + q) * e4 / 24.0
        - (61.0 * q * q * q + 35.0 * q * q + q) * e6 / 720.0;
    let g01 = -a * e2 / 2.0 + 10.0 * a * q * e4 / 24.0
        - (183.0 * a * q * q + 70.0 * a * q + a) * e6 / 720.0;
    let g02 = 5.0 * r2 * a * a * e4 / 24.0 - (183.0 * r2 * a * a * q + 35.0 * r2 * a * a) * e6 / 720.0;
    let g03 = -61.0 * r6 * a * a * a * e6 / 720.0;

    let g10 = 1.0 - (5.0 * q + 1.0) * e2 / 6.0 + (61.0 * q * q + 35.0 * q + 1.0) * e4 / 120.0;
    let g11 = -5.0 * a * e2 / 6.0 + (122.0 * a * q + 35.0 * a) * e4 / 120.0;
    let g12 = -61.0 * r2 * a * a * e4 / 120.0;

    let g20 = 1.0 - (7.0 * q + 3.0) * e2 / 6.0
        + (331.0 * q * q * q + 337.0 * q * q + 36.0 * q) * e6 / 360.0;
    let g21 = -7.0 * a * e2 / 6.0 + (662.0 * a * a * a * q + 337.0 * a * a * a) * e6 / 360.0;
    let g22 = 331.0 * r2 * q * q * e6 / 360.0;

    let re = |v: f64| Some(C64::new(v, 0.0));
    let entries = vec![
        vec![re(g00), re(g01), re(g02), re(g03)],
        vec![re(g10), re(g11), re(g12), None],
        vec![re(g20), re(g21), re(g22), None],
    ];
    GMatrix {
        alpha: C64::new(alpha, 0.0),
        eta,
        n_max: 2,
        m_max: 3,
        entries,
        method: GMethod::Series,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::displacement_matrix_element;
    use crate::pump::default_l_cut;
    use approx::assert_relative_eq;

    #[test]
    fn leading_overlap_matches_the_reference_value() {
        let alpha = C64::new(3.0, 0.0);
        let g = gmatrix_numeric(alpha, 0.01, 2, 3, default_l_cut(3.0)).unwrap();
        let g00 = g.require(0, 0).unwrap();
        assert_relative_eq!(g00.re, 0.99955017, epsilon = 1e-7);
        assert!(g00.im.abs() < 1e-12);
    }

    #[test]
    fn numeric_table_matches_a_direct_overlap_sum() {
        // Independent route: g_nm = sum_k c_k conj(<k|D(alpha)|m>), summing
        // bare coefficients against displacement matrix elements directly.
        let alpha = C64::new(1.5, 0.8);
        let eta = 0.04;
        let l_cut = default_l_cut(alpha.norm());
        let g = gmatrix_numeric(alpha, eta, 2, 4, l_cut).unwrap();
        let family = crate::pump::phi_family(alpha, eta, 2, l_cut, true).unwrap();
        for n in 0..=2u32 {
            for m in 0..=4u32 {
                let mut want = C64::new(0.0, 0.0);
                for (k, c) in family[n as usize].coeffs.iter().enumerate() {
                    want += c * displacement_matrix_element(k as u32, m, alpha).conj();
                }
                let got = g.require(n, m).unwrap();
                assert_relative_eq!(got.re, want.re, epsilon = 1e-12);
                assert_relative_eq!(got.im, want.im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn series_and_numeric_agree_where_the_tabulation_is_consistent() {
        let alpha = 2.0f64;
        let eta = 0.01f64;
        let tol = 50.0 * eta.powi(6) * alpha.powi(6).max(1.0);
        let num = gmatrix_numeric(C64::new(alpha, 0.0), eta, 1, 3, default_l_cut(alpha)).unwrap();
        let ser = gmatrix_series(alpha, eta);
        for (n, m) in [(0u32, 0u32), (0, 2), (0, 3), (1, 0), (1, 1)] {
            let d = (num.require(n, m).unwrap() - ser.require(n, m).unwrap()).norm();
            assert!(d <= tol, "g[{n}][{m}] off by {d:.3e} > {tol:.3e}");
        }
    }

    #[test]
    fn series_row_zero_drops_an_intensity_free_fourth_order_term() {
        // The printed n = 0, m = 1 fourth-order coefficient reads
        // 10 alpha^3 / 24 where propagation gives (10 alpha^2 + 1) alpha / 24.
        // The gap to the numeric table must therefore equal alpha eta^4 / 24
        // down to genuine sixth-order residue, independent of eta.
        for (alpha, eta) in [(1.0f64, 0.01f64), (1.0, 0.02), (3.0, 0.01)] {
            let residue = 100.0 * eta.powi(6) * alpha.powi(6).max(1.0);
            let num =
                gmatrix_numeric(C64::new(alpha, 0.0), eta, 0, 1, default_l_cut(alpha)).unwrap();
            let ser = gmatrix_series(alpha, eta);
            let d = (num.require(0, 1).unwrap() - ser.require(0, 1).unwrap()).re;
            let want = alpha * eta.powi(4) / 24.0;
            assert!(
                (d - want).abs() < residue,
                "g[0][1] gap {d:.6e} should match the dropped term {want:.6e}"
            );
        }
    }

    #[test]
    fn tabulated_pair_column_sign_is_flipped_in_row_one() {
        // The printed n = 1, m = 2 entry carries a minus sign; brute-force
        // propagation gives the same magnitude with a plus. Pin both the
        // magnitude agreement and the sign disagreement so a regression in
        // either pipeline shows up here.
        let alpha = 2.0f64;
        let eta = 0.01f64;
        let tol = 50.0 * eta.powi(6) * alpha.powi(6).max(1.0);
        let num = gmatrix_numeric(C64::new(alpha, 0.0), eta, 1, 2, default_l_cut(alpha)).unwrap();
        let ser = gmatrix_series(alpha, eta);
        let nv = num.require(1, 2).unwrap();
        let sv = ser.require(1, 2).unwrap();
        assert!(nv.re > 0.0 && sv.re < 0.0, "expected opposite signs, got {nv} vs {sv}");
        let d = (nv + sv).norm();
        assert!(d <= tol, "magnitudes should still agree, off by {d:.3e} > {tol:.3e}");
    }

    #[test]
    fn series_row_two_prints_its_fourth_order_terms_one_order_high() {
        // The tabulated n = 2 expressions skip their eta^4 terms and carry
        // them at eta^6 instead, each inflated by exactly alpha^2 eta^2.
        // Dividing the bump back out must therefore reproduce the gap to
        // the numeric table down to genuine sixth-order residue.
        let alpha = 2.0f64;
        let eta = 0.02f64;
        let q = alpha * alpha;
        let e4 = eta.powi(4);
        let r2 = 2.0f64.sqrt();
        let residue = 100.0 * eta.powi(6) * alpha.powi(6).max(1.0);
        let num = gmatrix_numeric(C64::new(alpha, 0.0), eta, 2, 2, default_l_cut(alpha)).unwrap();
        let ser = gmatrix_series(alpha, eta);
        let missing = [
            (0u32, (331.0 * q * q + 337.0 * q + 36.0) * e4 / 360.0),
            (1, (662.0 * alpha * q + 337.0 * alpha) * e4 / 360.0),
            (2, 331.0 * r2 * q * e4 / 360.0),
        ];
        for (m, want) in missing {
            let d = (num.require(2, m).unwrap() - ser.require(2, m).unwrap()).re;
            assert!(
                (d - want).abs() < residue,
                "g[2][{m}] gap {d:.6e} should match the de-bumped term {want:.6e}"
            );
        }
    }

    #[test]
    fn column_magnitudes_drop_one_power_of_eta_at_fixed_alpha_eta() {
        let alpha_eta = 0.06;
        let ratio_at = |eta: f64| {
            let alpha = alpha_eta / eta;
            let g = gmatrix_numeric(
                C64::new(alpha, 0.0),
                eta,
                0,
                2,
                default_l_cut(alpha),
            )
            .unwrap();
            g.neighbor_ratio(0).unwrap()
        };
        let r1 = ratio_at(0.02);
        let r2 = ratio_at(0.01);
        // Halving eta doubles both |g00|/|g01| and |g01|/|g02|.
        assert_relative_eq!(r2[0] / r1[0], 2.0, max_relative = 0.05);
        assert_relative_eq!(r2[1] / r1[1], 2.0, max_relative = 0.1);
    }

    #[test]
    fn gram_normalization_approaches_unity() {
        let g = gmatrix_numeric(C64::new(3.0, 0.0), 0.05, 4, 8, default_l_cut(3.0)).unwrap();
        assert!((g.gram_normalization() - 1.0).abs() < 2e-6);
    }

    #[test]
    fn missing_entries_are_reported_not_zeroed() {
        let ser = gmatrix_series(1.0, 0.01);
        assert!(ser.entry(1, 3).is_none());
        assert!(matches!(
            ser.require(2, 3),
            Err(Error::MissingGEntry { n: 2, m: 3 })
        ));
        assert!(matches!(
            ser.require(5, 0),
            Err(Error::MissingGEntry { n: 5, m: 0 })
        ));
    }

    #[test]
    fn neighbor_ratio_rejects_zero_denominators() {
        // eta = 0 makes every m >= 1 entry vanish exactly.
        let g = gmatrix_series(1.0, 0.0);
        assert!(matches!(
            g.neighbor_ratio(0),
            Err(Error::DivisionByZeroEntry { n: 0, m: 1 })
        ));
    }
}
