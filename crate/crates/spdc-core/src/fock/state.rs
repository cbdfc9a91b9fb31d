//! Sparse multimode state vectors over displaced number-state labels.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::displacement::displacement_matrix_element;
use crate::C64;

/// Tolerance for treating two displacement frames as equal.
pub const FRAME_TOL: f64 = 1e-9;

/// Relative norm-squared loss a frame re-expansion tolerates before erroring.
pub const FRAME_CHANGE_NORM_TOL: f64 = 1e-9;

/// Amplitudes below this fraction of the state norm are dropped after
/// re-expansions to keep the sparse maps sparse. The threshold sits far
/// below every tolerance used elsewhere in the crate.
pub(crate) const PRUNE_REL_TOL: f64 = 1e-16;

/// Physical mode identity: numbered signal/idler modes and pump modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Mode {
    /// Signal/idler (microscopic) mode, numbered from 1.
    Micro(u8),
    /// Pump (macroscopic) mode, numbered from 1.
    Pump(u8),
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Micro(k) => write!(f, "{k}"),
            Mode::Pump(k) => write!(f, "p{k}"),
        }
    }
}

/// Sparse multimode state: complex amplitudes over occupation tuples, with a
/// displacement frame attached to every mode.
///
/// An occupation tuple (n_1, .., n_k) with frames (b_1, .., b_k) stands for
/// the product of displaced number states |n_1, b_1> .. |n_k, b_k>, where
/// |n, b> = D(b)|n>. Displaced number states sharing one frame are
/// orthonormal, so inner products and norms read directly off the amplitude
/// table whenever the frames agree; [`StateVector::change_frame`] re-expands
/// a state over a different set of frames when they do not.
#[derive(Debug, Clone)]
pub struct StateVector {
    modes: Vec<Mode>,
    frames: Vec<C64>,
    amps: BTreeMap<Vec<u32>, C64>,
}

impl StateVector {
    /// Empty state (no terms) over the given modes and frames.
    ///
    /// # Panics
    /// If `modes` and `frames` disagree in length or a mode repeats.
    pub fn new(modes: Vec<Mode>, frames: Vec<C64>) -> Self {
        assert_eq!(modes.len(), frames.len(), "one frame per mode");
        let mut seen = modes.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), modes.len(), "modes must be distinct");
        StateVector { modes, frames, amps: BTreeMap::new() }
    }

    /// Empty state over undisplaced (frame zero) modes.
    pub fn zero_frames(modes: Vec<Mode>) -> Self {
        let frames = vec![C64::new(0.0, 0.0); modes.len()];
        StateVector::new(modes, frames)
    }

    /// Single basis term |occ> with unit amplitude.
    pub fn basis(modes: Vec<Mode>, frames: Vec<C64>, occ: Vec<u32>) -> Self {
        let mut s = StateVector::new(modes, frames);
        assert_eq!(occ.len(), s.modes.len(), "one occupation per mode");
        s.amps.insert(occ, C64::new(1.0, 0.0));
        s
    }

    /// Modes in storage order.
    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// Displacement frames, index-aligned with [`StateVector::modes`].
    pub fn frames(&self) -> &[C64] {
        &self.frames
    }

    /// Position of `mode` in storage order, if present.
    pub fn mode_position(&self, mode: Mode) -> Option<usize> {
        self.modes.iter().position(|&m| m == mode)
    }

    /// Number of stored terms.
    pub fn len(&self) -> usize {
        self.amps.len()
    }

    /// True when no terms are stored.
    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    /// Amplitude of one occupation tuple (zero when absent).
    pub fn amplitude(&self, occ: &[u32]) -> C64 {
        self.amps.get(occ).copied().unwrap_or_else(|| C64::new(0.0, 0.0))
    }

    /// Iterate stored terms in lexicographic occupation order.
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &C64)> {
        self.amps.iter()
    }

    /// Accumulate `amp` onto one occupation tuple.
    ///
    /// # Panics
    /// If the tuple length does not match the mode count.
    pub fn add_term(&mut self, occ: Vec<u32>, amp: C64) {
        assert_eq!(occ.len(), self.modes.len(), "one occupation per mode");
        *self.amps.entry(occ).or_insert_with(|| C64::new(0.0, 0.0)) += amp;
    }

    /// Squared Euclidean norm of the amplitude table.
    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Same state scaled by `c`.
    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        for a in out.amps.values_mut() {
            *a *= c;
        }
        out
    }

    /// Unit-norm copy.
    ///
    /// # Panics
    /// If the state is numerically zero.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize a zero state");
        self.scaled(C64::new(1.0 / n, 0.0))
    }

    /// Drop terms with |amplitude| <= `floor`.
    pub fn prune(&mut self, floor: f64) {
        self.amps.retain(|_, a| a.norm() > floor);
    }

    fn same_layout(&self, other: &Self, what: &str) -> Result<()> {
        if self.modes != other.modes {
            return Err(Error::FrameMismatch(format!("{what}: mode lists differ")));
        }
        for (i, (a, b)) in self.frames.iter().zip(&other.frames).enumerate() {
            if (a - b).norm() > FRAME_TOL {
                return Err(Error::FrameMismatch(format!(
                    "{what}: mode {} frames differ by {:.3e}",
                    self.modes[i],
                    (a - b).norm()
                )));
            }
        }
        Ok(())
    }

    /// Sum of two states over identical modes and frames.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_layout(other, "state addition")?;
        let mut out = self.clone();
        for (occ, amp) in &other.amps {
            out.add_term(occ.clone(), *amp);
        }
        Ok(out)
    }

    /// Inner product <self|other> over identical modes and frames.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.same_layout(other, "inner product")?;
        let (small, big, conj_small) = if self.amps.len() <= other.amps.len() {
            (&self.amps, &other.amps, true)
        } else {
            (&other.amps, &self.amps, false)
        };
        let mut acc = C64::new(0.0, 0.0);
        for (occ, amp) in small {
            if let Some(b) = big.get(occ) {
                acc += if conj_small { amp.conj() * b } else { b.conj() * amp };
            }
        }
        Ok(acc)
    }

    /// Largest |amplitude difference| over the union of both supports.
    pub fn max_amplitude_diff(&self, other: &Self) -> Result<f64> {
        self.same_layout(other, "amplitude comparison")?;
        let mut worst: f64 = 0.0;
        for (occ, amp) in &self.amps {
            worst = worst.max((amp - other.amplitude(occ)).norm());
        }
        for (occ, amp) in &other.amps {
            if !self.amps.contains_key(occ) {
                worst = worst.max(amp.norm());
            }
        }
        Ok(worst)
    }

    /// Copy with the modes permuted into `order`, which must be a
    /// permutation of the current mode set.
    ///
    /// # Errors
    /// [`Error::FrameMismatch`] when `order` is not such a permutation.
    pub fn with_mode_order(&self, order: &[Mode]) -> Result<Self> {
        if order.len() != self.modes.len() {
            return Err(Error::FrameMismatch("mode reorder: wrong mode count".into()));
        }
        let mut perm = Vec::with_capacity(order.len());
        for m in order {
            match self.mode_position(*m) {
                Some(p) => perm.push(p),
                None => {
                    return Err(Error::FrameMismatch(format!("mode reorder: no mode {m}")));
                }
            }
        }
        let frames = perm.iter().map(|&i| self.frames[i]).collect();
        let mut out = StateVector::new(order.to_vec(), frames);
        for (occ, amp) in &self.amps {
            out.amps.insert(perm.iter().map(|&i| occ[i]).collect(), *amp);
        }
        Ok(out)
    }

    /// Split the state by the joint occupation of `selected` modes.
    ///
    /// Returns, per occupation tuple of the selected modes, the vector they
    /// multiply over the remaining modes (original order, original frames).
    /// Squared norms of the sectors sum to the squared norm of the state,
    /// so the map is a partial trace in waiting: tracing out the selected
    /// modes leaves the mixture of the sector vectors.
    ///
    /// # Errors
    /// [`Error::FrameMismatch`] when `selected` repeats a mode or names one
    /// the state does not carry.
    pub fn sectors_over(&self, selected: &[Mode]) -> Result<BTreeMap<Vec<u32>, Self>> {
        let mut picked = Vec::with_capacity(selected.len());
        for m in selected {
            match self.mode_position(*m) {
                Some(p) if !picked.contains(&p) => picked.push(p),
                Some(_) => {
                    return Err(Error::FrameMismatch(format!("sector split: repeated mode {m}")));
                }
                None => return Err(Error::FrameMismatch(format!("sector split: no mode {m}"))),
            }
        }
        let kept: Vec<usize> =
            (0..self.modes.len()).filter(|p| !picked.contains(p)).collect();
        let modes: Vec<Mode> = kept.iter().map(|&p| self.modes[p]).collect();
        let frames: Vec<C64> = kept.iter().map(|&p| self.frames[p]).collect();
        let mut sectors: BTreeMap<Vec<u32>, Self> = BTreeMap::new();
        for (occ, amp) in &self.amps {
            let key: Vec<u32> = picked.iter().map(|&p| occ[p]).collect();
            let rest: Vec<u32> = kept.iter().map(|&p| occ[p]).collect();
            sectors
                .entry(key)
                .or_insert_with(|| StateVector::new(modes.clone(), frames.clone()))
                .add_term(rest, *amp);
        }
        Ok(sectors)
    }

    /// Tensor product; mode order is self's modes followed by other's.
    ///
    /// # Panics
    /// If the two states share a mode.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut modes = self.modes.clone();
        modes.extend_from_slice(&other.modes);
        let mut frames = self.frames.clone();
        frames.extend_from_slice(&other.frames);
        let mut out = StateVector::new(modes, frames);
        for (o1, a1) in &self.amps {
            for (o2, a2) in &other.amps {
                let mut occ = o1.clone();
                occ.extend_from_slice(o2);
                out.amps.insert(occ, a1 * a2);
            }
        }
        out
    }

    /// Re-express the state over new displacement frames.
    ///
    /// Each mode whose frame moves from b to v is re-expanded through
    ///
    /// ```text
    /// <m, v | n, b> = exp(i Im(conj(v) b)) <m| D(b - v) |n>
    /// ```
    ///
    /// keeping displaced occupations up to `cutoff` per mode. The phase
    /// factor is the Weyl composition phase of D(-v) D(b).
    ///
    /// # Errors
    /// [`Error::CutoffTooSmall`] when the retained expansion loses more than
    /// [`FRAME_CHANGE_NORM_TOL`] of the squared norm, relative.
    pub fn change_frame(&self, new_frames: &[C64], cutoff: u32) -> Result<Self> {
        assert_eq!(new_frames.len(), self.modes.len(), "one frame per mode");
        let before = self.norm_sqr();
        let mut cur = self.clone();
        for i in 0..self.modes.len() {
            let old = cur.frames[i];
            let new = new_frames[i];
            if (old - new).norm() == 0.0 {
                continue;
            }
            let shift = old - new;
            let phase_arg = (new.conj() * old).im;
            let phase = C64::new(phase_arg.cos(), phase_arg.sin());
            // Cache the transfer column for each source occupation seen.
            let mut columns: BTreeMap<u32, Vec<C64>> = BTreeMap::new();
            let mut next = StateVector::new(cur.modes.clone(), cur.frames.clone());
            next.frames[i] = new;
            for (occ, amp) in &cur.amps {
                let col = columns.entry(occ[i]).or_insert_with(|| {
                    (0..=cutoff)
                        .map(|m| phase * displacement_matrix_element(m, occ[i], shift))
                        .collect()
                });
                for (m, t) in col.iter().enumerate() {
                    if t.norm_sqr() > 0.0 {
                        let mut new_occ = occ.clone();
                        new_occ[i] = m as u32;
                        next.add_term(new_occ, amp * t);
                    }
                }
            }
            cur = next;
        }
        let after = cur.norm_sqr();
        if before > 0.0 {
            let lost = (before - after) / before;
            if lost > FRAME_CHANGE_NORM_TOL {
                return Err(Error::CutoffTooSmall {
                    context: "frame change",
                    lost,
                    tolerance: FRAME_CHANGE_NORM_TOL,
                });
            }
            cur.prune(PRUNE_REL_TOL * before.sqrt());
        }
        Ok(cur)
    }
}
