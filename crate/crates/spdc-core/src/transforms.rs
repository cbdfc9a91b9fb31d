//! Passive linear mixing of modes: balanced two-port and three-port
//! couplers acting on sparse Fock states and on their displacement frames.
//!
//! A passive unitary u sends creation operators to linear combinations,
//! a_k+ -> sum_j u_kj a_j+, and therefore sends the displacement vector b
//! to u^T b: a product of coherent states transforms with no residual
//! phase. The Fock-layer action on an occupation tuple follows from the
//! multinomial expansion of the transformed creation-operator powers.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::{ln_factorial, Mode, StateVector, PRUNE_REL_TOL};
use crate::C64;

/// Total occupation (per term, across the mixed modes) beyond which the
/// multinomial expansion is refused rather than allowed to explode.
pub const MIXING_PHOTON_BUDGET: u32 = 64;

/// Unitary acting on a set of modes.
#[derive(Debug, Clone)]
pub struct ModeUnitary {
    matrix: DMatrix<C64>,
}

impl ModeUnitary {
    /// Wrap a unitary matrix.
    ///
    /// # Panics
    /// If the matrix is not square or departs from unitarity by more than
    /// 1e-12 in max norm.
    pub fn new(matrix: DMatrix<C64>) -> Self {
        assert_eq!(matrix.nrows(), matrix.ncols(), "unitary must be square");
        let n = matrix.nrows();
        let gram = matrix.adjoint() * &matrix;
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                assert!(
                    (gram[(i, j)] - want).norm() < 1e-12,
                    "matrix is not unitary at ({i}, {j})"
                );
            }
        }
        ModeUnitary { matrix }
    }

    /// Number of modes the unitary mixes.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Matrix entry u_kj.
    pub fn entry(&self, k: usize, j: usize) -> C64 {
        self.matrix[(k, j)]
    }

    /// Image of a displacement vector: b -> u^T b.
    pub fn transform_frames(&self, frames: &[C64]) -> Vec<C64> {
        let d = self.dim();
        assert_eq!(frames.len(), d, "one frame per mixed mode");
        (0..d)
            .map(|j| (0..d).map(|k| self.matrix[(k, j)] * frames[k]).sum())
            .collect()
    }
}

/// Balanced two-port coupler: a_1+ -> (b_1+ + b_2+)/sqrt2,
/// a_2+ -> (-b_1+ + b_2+)/sqrt2.
pub fn bs2() -> ModeUnitary {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(r, 0.0),
            C64::new(r, 0.0),
            C64::new(-r, 0.0),
            C64::new(r, 0.0),
        ],
    );
    ModeUnitary::new(m)
}

/// Balanced three-port coupler (discrete Fourier mixer) with phase step
/// `phi`: u_kj = exp(i (k-1)(j-1) phi) / sqrt3. Unitary at phi = 2 pi / 3.
pub fn dft3(phi: f64) -> ModeUnitary {
    let r = 1.0 / 3.0f64.sqrt();
    let mut m = DMatrix::from_element(3, 3, C64::new(0.0, 0.0));
    for k in 0..3 {
        for j in 0..3 {
            let arg = phi * (k as f64) * (j as f64);
            m[(k, j)] = r * C64::new(arg.cos(), arg.sin());
        }
    }
    ModeUnitary::new(m)
}

/// Ordered decompositions of `total` into `parts` non-negative integers.
fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            let mut v = Vec::with_capacity(parts);
            v.push(first);
            v.append(&mut rest);
            out.push(v);
        }
    }
    out
}

/// Apply a passive unitary to the listed modes of a state, leaving the
/// remaining modes untouched. Displacement frames of the mixed modes
/// transform alongside the Fock content, so coherent products stay
/// coherent products.
///
/// # Errors
/// [`Error::FrameMismatch`] when the mode list does not match the unitary
/// size, repeats a mode, or names a mode the state does not have;
/// [`Error::CutoffTooSmall`](crate::Error::CutoffTooSmall) when a term
/// carries more than [`MIXING_PHOTON_BUDGET`] photons across the mixed
/// modes.
pub fn apply_mode_unitary(
    state: &StateVector,
    u: &ModeUnitary,
    modes: &[Mode],
) -> Result<StateVector> {
    let d = u.dim();
    if modes.len() != d {
        return Err(Error::FrameMismatch(format!(
            "unitary mixes {d} modes but {} were selected",
            modes.len()
        )));
    }
    let mut positions = Vec::with_capacity(d);
    for m in modes {
        match state.mode_position(*m) {
            Some(p) if !positions.contains(&p) => positions.push(p),
            Some(_) => {
                return Err(Error::FrameMismatch(format!("mode {m} selected twice")));
            }
            None => {
                return Err(Error::FrameMismatch(format!("state has no mode {m}")));
            }
        }
    }

    let mut new_frames = state.frames().to_vec();
    let picked: Vec<C64> = positions.iter().map(|&p| new_frames[p]).collect();
    for (slot, v) in positions.iter().zip(u.transform_frames(&picked)) {
        new_frames[*slot] = v;
    }

    let mut out = StateVector::new(state.modes().to_vec(), new_frames);
    // Per-mode expansion columns are cached by occupation: the image of
    // a_k+^n is a sum over compositions of n across the output modes.
    let mut cache: BTreeMap<(usize, u32), Vec<(Vec<u32>, C64)>> = BTreeMap::new();
    let norm_before = state.norm();
    for (occ, amp) in state.terms() {
        let total: u32 = positions.iter().map(|&p| occ[p]).sum();
        if total > MIXING_PHOTON_BUDGET {
            return Err(Error::CutoffTooSmall {
                context: "mode mixing photon budget",
                lost: f64::from(total),
                tolerance: f64::from(MIXING_PHOTON_BUDGET),
            });
        }
        // Combined expansion across the mixed modes: start from the scalar
        // term and fold in one mode at a time.
        let mut partial: Vec<(Vec<u32>, C64)> = vec![(vec![0; d], *amp)];
        for (slot, &p) in positions.iter().enumerate() {
            let n_k = occ[p];
            let column = cache.entry((slot, n_k)).or_insert_with(|| {
                compositions(n_k, d)
                    .into_iter()
                    .filter_map(|c| {
                        let mut ln_multinom = ln_factorial(n_k);
                        let mut factor = C64::new(1.0, 0.0);
                        for (j, &cj) in c.iter().enumerate() {
                            ln_multinom -= ln_factorial(cj);
                            if cj > 0 {
                                factor *= u.entry(slot, j).powu(cj);
                            }
                        }
                        let w = factor * ln_multinom.exp();
                        (w.norm_sqr() > 0.0).then_some((c, w))
                    })
                    .collect()
            });
            let mut next = Vec::with_capacity(partial.len() * column.len());
            for (m_acc, w_acc) in &partial {
                for (c, w) in column.iter() {
                    let mut m = m_acc.clone();
                    for j in 0..d {
                        m[j] += c[j];
                    }
                    next.push((m, w_acc * w));
                }
            }
            partial = next;
        }
        // Normalization: amplitude onto |m> carries sqrt(prod m_j!) and the
        // source term contributed 1/sqrt(prod n_k!).
        let ln_src: f64 = positions.iter().map(|&p| ln_factorial(occ[p])).sum();
        for (m, w) in partial {
            let ln_dst: f64 = m.iter().map(|&mj| ln_factorial(mj)).sum();
            let coeff = w * (0.5 * (ln_dst - ln_src)).exp();
            let mut new_occ = occ.clone();
            for (slot, &p) in positions.iter().enumerate() {
                new_occ[p] = m[slot];
            }
            out.add_term(new_occ, coeff);
        }
    }
    out.prune(PRUNE_REL_TOL * norm_before);
    Ok(out)
}
