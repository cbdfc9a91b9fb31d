//! Sparse density operators over displaced number-state labels.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fock::state::{Mode, StateVector, FRAME_TOL};
use crate::C64;

/// Sparse density operator: complex entries indexed by (ket, bra) occupation
/// tuples, with the same per-mode displacement frames as [`StateVector`].
///
/// Entries are matrix elements <ket| rho |bra> in the displaced number basis
/// fixed by `frames`. Hermiticity is a property of how operators are built
/// here (pure projectors, partial traces, click/no-click projections), not an
/// enforced invariant; [`DensityOperator::max_hermiticity_defect`] measures it.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    modes: Vec<Mode>,
    frames: Vec<C64>,
    entries: BTreeMap<(Vec<u32>, Vec<u32>), C64>,
}

impl DensityOperator {
    /// Zero operator over the given modes and frames.
    pub fn new(modes: Vec<Mode>, frames: Vec<C64>) -> Self {
        assert_eq!(modes.len(), frames.len(), "one frame per mode");
        DensityOperator { modes, frames, entries: BTreeMap::new() }
    }

    /// Projector |psi><psi| onto a pure state.
    pub fn from_pure(psi: &StateVector) -> Self {
        let mut rho = DensityOperator::new(psi.modes().to_vec(), psi.frames().to_vec());
        for (ket, a) in psi.terms() {
            for (bra, b) in psi.terms() {
                rho.entries.insert((ket.clone(), bra.clone()), a * b.conj());
            }
        }
        rho
    }

    /// Modes in storage order.
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Displacement frames, index-aligned with [`DensityOperator::modes`].
    pub fn frames(&self) -> &[C64] {
        &self.frames
    }

    /// Number of stored entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// True when no entries are stored.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry <ket| rho |bra> (zero when absent).
    pub fn entry(&self, ket: &[u32], bra: &[u32]) -> C64 {
        self.entries
            .get(&(ket.to_vec(), bra.to_vec()))
            .copied()
            .unwrap_or_else(|| C64::new(0.0, 0.0))
    }

    /// Iterate stored entries in lexicographic (ket, bra) order.
    pub fn entries(&self) -> impl Iterator<Item = (&(Vec<u32>, Vec<u32>), &C64)> {
        self.entries.iter()
    }

    /// Accumulate a value onto one (ket, bra) entry.
    pub fn add_entry(&mut self, ket: Vec<u32>, bra: Vec<u32>, value: C64) {
        assert_eq!(ket.len(), self.modes.len(), "ket length");
        assert_eq!(bra.len(), self.modes.len(), "bra length");
        *self.entries.entry((ket, bra)).or_insert_with(|| C64::new(0.0, 0.0)) += value;
    }

    /// Trace. The imaginary part of the stored diagonal is discarded; for
    /// the Hermitian operators built by this crate it is exactly zero.
    pub fn trace(&self) -> f64 {
        self.entries
            .iter()
            .filter(|((k, b), _)| k == b)
            .map(|(_, v)| v.re)
            .sum()
    }

    /// Copy scaled to unit trace.
    ///
    /// # Panics
    /// If the trace is numerically zero or negative.
    pub fn normalized(&self) -> Self {
        let t = self.trace();
        assert!(t > 0.0, "cannot normalize with trace {t}");
        let mut out = self.clone();
        for v in out.entries.values_mut() {
            *v /= t;
        }
        out
    }

    /// Tr[rho^2] / Tr[rho]^2, i.e. purity of the unit-trace version.
    ///
    /// Uses Tr[rho^2] = sum |rho_ab|^2, valid for Hermitian rho.
    pub fn purity(&self) -> f64 {
        let t = self.trace();
        let sq: f64 = self.entries.values().map(|v| v.norm_sqr()).sum();
        sq / (t * t)
    }

    /// Largest |rho_ab - conj(rho_ba)| over stored entries.
    pub fn max_hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for ((k, b), v) in &self.entries {
            let mirror = self.entry(b, k);
            worst = worst.max((v - mirror.conj()).norm());
        }
        worst
    }

    /// <psi| rho |psi> for a pure state over the same modes and frames.
    ///
    /// # Errors
    /// [`Error::FrameMismatch`] when modes or frames disagree.
    pub fn expectation_pure(&self, psi: &StateVector) -> Result<f64> {
        if self.modes != psi.modes() {
            return Err(Error::FrameMismatch(
                "expectation value: mode lists differ".into(),
            ));
        }
        for (i, (a, b)) in self.frames.iter().zip(psi.frames()).enumerate() {
            if (a - b).norm() > FRAME_TOL {
                return Err(Error::FrameMismatch(format!(
                    "expectation value: mode {} frames differ by {:.3e}",
                    self.modes[i],
                    (a - b).norm()
                )));
            }
        }
        let mut acc = C64::new(0.0, 0.0);
        for ((ket, bra), v) in &self.entries {
            let a = psi.amplitude(ket);
            if a.norm_sqr() == 0.0 {
                continue;
            }
            let b = psi.amplitude(bra);
            if b.norm_sqr() == 0.0 {
                continue;
            }
            acc += a.conj() * v * b;
        }
        Ok(acc.re)
    }

    /// Trace out every mode not listed in `keep`; kept modes stay in their
    /// current storage order.
    ///
    /// # Panics
    /// If `keep` names a mode the operator does not have.
    pub fn partial_trace(&self, keep: &[Mode]) -> Self {
        let keep_idx: Vec<usize> = self
            .modes
            .iter()
            .enumerate()
            .filter(|(_, m)| keep.contains(m))
            .map(|(i, _)| i)
            .collect();
        for m in keep {
            assert!(self.modes.contains(m), "mode {m} not present");
        }
        let drop_idx: Vec<usize> =
            (0..self.modes.len()).filter(|i| !keep_idx.contains(i)).collect();
        let modes = keep_idx.iter().map(|&i| self.modes[i]).collect();
        let frames = keep_idx.iter().map(|&i| self.frames[i]).collect();
        let mut out = DensityOperator::new(modes, frames);
        for ((ket, bra), v) in &self.entries {
            // Off-diagonal elements of traced modes vanish under same-frame
            // orthonormality, so only matching dropped occupations survive.
            if drop_idx.iter().any(|&i| ket[i] != bra[i]) {
                continue;
            }
            let k: Vec<u32> = keep_idx.iter().map(|&i| ket[i]).collect();
            let b: Vec<u32> = keep_idx.iter().map(|&i| bra[i]).collect();
            out.add_entry(k, b, *v);
        }
        out
    }

    /// Transpose the entries of the modes listed in `side`, leaving the rest
    /// untouched (partial transposition).
    ///
    /// # Panics
    /// If `side` names a mode the operator does not have.
    pub fn partial_transpose(&self, side: &[Mode]) -> Self {
        for m in side {
            assert!(self.modes.contains(m), "mode {m} not present");
        }
        let flip: Vec<bool> = self.modes.iter().map(|m| side.contains(m)).collect();
        let mut out = DensityOperator::new(self.modes.clone(), self.frames.clone());
        for ((ket, bra), v) in &self.entries {
            let mut k = ket.clone();
            let mut b = bra.clone();
            for i in 0..flip.len() {
                if flip[i] {
                    std::mem::swap(&mut k[i], &mut b[i]);
                }
            }
            out.add_entry(k, b, *v);
        }
        out
    }

    /// Dense matrix over the union of stored ket and bra labels, plus the
    /// label list indexing its rows and columns.
    ///
    /// # Errors
    /// [`Error::DimensionTooLarge`] when the label count exceeds `max_dim`.
    pub fn to_dense(&self, max_dim: usize) -> Result<(Vec<Vec<u32>>, DMatrix<C64>)> {
        let mut labels: BTreeSet<Vec<u32>> = BTreeSet::new();
        for (k, b) in self.entries.keys() {
            labels.insert(k.clone());
            labels.insert(b.clone());
        }
        let labels: Vec<Vec<u32>> = labels.into_iter().collect();
        if labels.len() > max_dim {
            return Err(Error::DimensionTooLarge { dim: labels.len(), max: max_dim });
        }
        let index: BTreeMap<&Vec<u32>, usize> =
            labels.iter().enumerate().map(|(i, l)| (l, i)).collect();
        let n = labels.len();
        let mut m = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        for ((k, b), v) in &self.entries {
            m[(index[k], index[b])] = *v;
        }
        Ok((labels, m))
    }
}
