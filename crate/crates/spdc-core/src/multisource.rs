//! Joint states of two or three independent sources sharing one pump laser,
//! and their expansion over entangled micro and pump bases.
//!
//! Sorting the joint state by total emitted pair number n produces blocks:
//! within each block every product of conditional pump states pairs with a
//! definite (anti)symmetrized combination of the micro modes, and the
//! weights are polynomials in the single-source overlaps g_nm. The tables
//! here carry those polynomials together with the basis states they
//! multiply, and the verifier below projects the brute-force joint state
//! onto every tabulated member.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{Mode, StateVector};
use crate::gmatrix::GMatrix;
use crate::pump::phi_family;
use crate::C64;

/// Phase step of the three-port entangled families.
pub const PHI3: f64 = 2.0 * std::f64::consts::PI / 3.0;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

/// Signal/idler modes of an `arity`-source setup: Micro(1) .. Micro(2 arity).
pub fn micro_modes(arity: u8) -> Vec<Mode> {
    assert!(arity == 2 || arity == 3, "two- and three-source setups only");
    (1..=2 * arity).map(Mode::Micro).collect()
}

/// Pump modes of an `arity`-source setup: Pump(1) .. Pump(arity).
pub fn pump_modes(arity: u8) -> Vec<Mode> {
    assert!(arity == 2 || arity == 3, "two- and three-source setups only");
    (1..=arity).map(Mode::Pump).collect()
}

fn superposition(
    modes: Vec<Mode>,
    frames: Vec<C64>,
    terms: &[(Vec<u32>, C64)],
) -> StateVector {
    let norm = (terms.len() as f64).sqrt();
    let mut s = StateVector::new(modes, frames);
    for (occ, w) in terms {
        s.add_term(occ.clone(), w / norm);
    }
    s
}

fn phased_triple(base: [Vec<u32>; 3], k: i32, conjugate: bool) -> Vec<(Vec<u32>, C64)> {
    let sign = if conjugate { -1.0 } else { 1.0 };
    base.into_iter()
        .enumerate()
        .map(|(j, occ)| {
            (occ, C64::from_polar(1.0, sign * f64::from(k) * (j as f64) * PHI3))
        })
        .collect()
}

/// Build one entangled (or product) basis state by label.
///
/// Micro-family labels produce states over the signal/idler modes in frame
/// zero; pump-family labels produce states over the pump modes, every leg
/// displaced by `alpha`.
///
/// Two-source labels: `vac`, `psi+`, `psi-`, `phi+`, `phi-`, `1111` on the
/// micro side; `vac_p`, `varphi+`, `varphi-`, `sigma+`, `sigma-`, `11` on
/// the pump side. Three-source labels: `vac`, `psi_0`, `psi_phi`,
/// `psi_2phi`, `phi_0`, `phi_phi`, `phi_2phi`, `delta_0`, `delta_phi`,
/// `delta_2phi` on the micro side; `vac_p`, `varphi_0`, `varphi_-phi`,
/// `varphi_-2phi`, `sigma_0`, `sigma_-phi`, `sigma_-2phi`, `zeta_0`,
/// `zeta_-phi`, `zeta_-2phi` on the pump side.
///
/// # Errors
/// [`Error::UnknownLabel`] for anything else.
pub fn build_basis(label: &str, arity: u8, alpha: C64) -> Result<StateVector> {
    assert!(arity == 2 || arity == 3, "two- and three-source setups only");
    let key = label.trim().to_ascii_lowercase();
    let micro = micro_modes(arity);
    let micro_frames = vec![zero(); micro.len()];
    let pump = pump_modes(arity);
    let pump_frames = vec![alpha; pump.len()];

    let micro_pairs = |occ_per_source: &[u32]| -> Vec<u32> {
        occ_per_source.iter().flat_map(|&n| [n, n]).collect()
    };

    if arity == 2 {
        let state = match key.as_str() {
            "vac" => superposition(micro, micro_frames, &[(vec![0; 4], one())]),
            "1111" => superposition(micro, micro_frames, &[(vec![1; 4], one())]),
            "psi+" | "psi-" | "phi+" | "phi-" => {
                let n = if key.starts_with("psi") { 1 } else { 2 };
                let sign = if key.ends_with('+') { one() } else { -one() };
                superposition(
                    micro,
                    micro_frames,
                    &[
                        (micro_pairs(&[n, 0]), one()),
                        (micro_pairs(&[0, n]), sign),
                    ],
                )
            }
            "vac_p" => superposition(pump, pump_frames, &[(vec![0; 2], one())]),
            "11" => superposition(pump, pump_frames, &[(vec![1, 1], one())]),
            "varphi+" | "varphi-" | "sigma+" | "sigma-" => {
                let n = if key.starts_with("varphi") { 1 } else { 2 };
                let sign = if key.ends_with('+') { one() } else { -one() };
                superposition(
                    pump,
                    pump_frames,
                    &[(vec![0, n], one()), (vec![n, 0], sign)],
                )
            }
            _ => return Err(Error::UnknownLabel(label.to_string())),
        };
        return Ok(state);
    }

    let k_of = |suffix: &str| -> Option<i32> {
        match suffix {
            "0" => Some(0),
            "phi" => Some(1),
            "2phi" => Some(2),
            "-phi" => Some(-1),
            "-2phi" => Some(-2),
            _ => None,
        }
    };

    let state = match key.as_str() {
        "vac" => superposition(micro, micro_frames, &[(vec![0; 6], one())]),
        "vac_p" => superposition(pump, pump_frames, &[(vec![0; 3], one())]),
        _ => {
            let (family, suffix) = key
                .split_once('_')
                .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
            let k = k_of(suffix).ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
            match family {
                // Micro families carry phases e^{+ik phi}; k >= 0 labels.
                "psi" | "phi" if k >= 0 => {
                    let n = if family == "psi" { 1 } else { 2 };
                    let base = [
                        micro_pairs(&[n, 0, 0]),
                        micro_pairs(&[0, n, 0]),
                        micro_pairs(&[0, 0, n]),
                    ];
                    superposition(micro, micro_frames, &phased_triple(base, k, false))
                }
                "delta" if k >= 0 => {
                    let base = [
                        micro_pairs(&[1, 1, 0]),
                        micro_pairs(&[0, 1, 1]),
                        micro_pairs(&[1, 0, 1]),
                    ];
                    superposition(micro, micro_frames, &phased_triple(base, k, false))
                }
                // Pump families carry phases e^{-ik phi}; k <= 0 labels.
                "varphi" | "sigma" if k <= 0 => {
                    let n = if family == "varphi" { 1 } else { 2 };
                    let base = [vec![n, 0, 0], vec![0, n, 0], vec![0, 0, n]];
                    superposition(pump, pump_frames, &phased_triple(base, -k, true))
                }
                "zeta" if k <= 0 => {
                    let base = [vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]];
                    superposition(pump, pump_frames, &phased_triple(base, -k, true))
                }
                _ => return Err(Error::UnknownLabel(label.to_string())),
            }
        }
    };
    Ok(state)
}

/// Joint output state of `arity` identical sources, over the micro modes
/// followed by the pump modes, each pump leg in the displaced frame alpha.
///
/// # Errors
/// Propagates cutoff errors from the per-source assembly.
pub fn joint_output(
    alpha: C64,
    eta: f64,
    arity: u8,
    n_cut: u32,
    l_cut: u32,
) -> Result<StateVector> {
    assert!(arity == 2 || arity == 3, "two- and three-source setups only");
    let family = phi_family(alpha, eta, n_cut, l_cut, false)?;
    // Displaced pump rows are identical for every source; compute once.
    let mut rows: Vec<Vec<(u32, C64)>> = Vec::with_capacity(family.len());
    for phi in &family {
        let displaced = phi.to_state(Mode::Pump(1)).change_frame(&[alpha], 48)?;
        rows.push(displaced.terms().map(|(occ, amp)| (occ[0], *amp)).collect());
    }
    let mut joint: Option<StateVector> = None;
    for s in 1..=arity {
        let modes = vec![Mode::Micro(2 * s - 1), Mode::Micro(2 * s), Mode::Pump(s)];
        let frames = vec![zero(), zero(), alpha];
        let mut src = StateVector::new(modes, frames);
        for (n, row) in rows.iter().enumerate() {
            for &(m, amp) in row {
                src.add_term(vec![n as u32, n as u32, m], amp);
            }
        }
        joint = Some(match joint {
            None => src,
            Some(j) => j.tensor(&src),
        });
    }
    let mut order = micro_modes(arity);
    order.extend(pump_modes(arity));
    let mut out = joint.expect("arity >= 2").with_mode_order(&order)?;
    out.prune(1e-16 * out.norm());
    Ok(out)
}

/// Block-amplitude table of an `arity`-source joint state: rows[n][m] is
/// the weight multiplying the m-th tabulated member of the total-pair-
/// number-n block, with the overall (alpha eta)^n factor divided out.
#[derive(Debug, Clone)]
pub struct BlockAmplitudes {
    /// Number of sources.
    pub arity: u8,
    /// Pump coherent amplitude of the underlying g table.
    pub alpha: C64,
    /// Dimensionless coupling of the underlying g table.
    pub eta: f64,
    rows: Vec<Vec<C64>>,
}

impl BlockAmplitudes {
    /// Number of tabulated blocks.
    pub fn blocks(&self) -> usize {
        self.rows.len()
    }

    /// Number of tabulated members of block n.
    pub fn row_len(&self, n: usize) -> usize {
        self.rows[n].len()
    }

    /// Amplitude p_nm.
    ///
    /// # Panics
    /// If an index is out of range.
    pub fn entry(&self, n: usize, m: usize) -> C64 {
        self.rows[n][m]
    }

    /// Sum of |p_nm|^2 over one block's tabulated members.
    pub fn block_weight(&self, n: usize) -> f64 {
        self.rows[n].iter().map(|p| p.norm_sqr()).sum()
    }
}

/// Evaluate the tabulated block-amplitude polynomials from a g table.
///
/// # Errors
/// [`Error::MissingGEntry`] when the table does not reach n = 2, m = 2.
pub fn block_amplitudes(g: &GMatrix, arity: u8) -> Result<BlockAmplitudes> {
    assert!(arity == 2 || arity == 3, "two- and three-source setups only");
    let g00 = g.require(0, 0)?;
    let g01 = g.require(0, 1)?;
    let g02 = g.require(0, 2)?;
    let g10 = g.require(1, 0)?;
    let g11 = g.require(1, 1)?;
    let g12 = g.require(1, 2)?;
    let g20 = g.require(2, 0)?;
    let g21 = g.require(2, 1)?;
    let g22 = g.require(2, 2)?;
    let r2: C64 = 2.0f64.sqrt().into();
    let r3: C64 = 3.0f64.sqrt().into();

    let rows = if arity == 2 {
        vec![
            vec![g00 * g00, r2 * g00 * g01, r2 * g00 * g02, g01 * g01],
            vec![
                r2 * g00 * g10,
                g10 * g01 + g00 * g11,
                g10 * g01 - g00 * g11,
                g10 * g02 + g00 * g12,
                g10 * g02 - g00 * g12,
                r2 * g01 * g11,
            ],
            vec![
                r2 * g00 * g20,
                g20 * g01 + g00 * g21,
                g20 * g01 - g00 * g21,
                g20 * g02 + g00 * g22,
                g20 * g02 - g00 * g22,
                r2 * g01 * g21,
                g10 * g10,
                r2 * g10 * g11,
                r2 * g10 * g12,
                g11 * g11,
            ],
        ]
    } else {
        let w1 = C64::from_polar(1.0, -PHI3);
        let w2 = C64::from_polar(1.0, -2.0 * PHI3);
        let two: C64 = 2.0.into();
        vec![
            vec![
                g00 * g00 * g00,
                r3 * g00 * g00 * g01,
                r3 * g00 * g00 * g02,
                r3 * g00 * g01 * g01,
            ],
            vec![
                r3 * g00 * g00 * g10,
                g00 * g00 * g11 + two * g00 * g01 * g10,
                g00 * g00 * g11 + (w1 + w2) * g00 * g01 * g10,
                g00 * g00 * g12 + two * g00 * g10 * g02,
                g00 * g00 * g12 + (w1 + w2) * g00 * g10 * g02,
                g01 * g01 * g10 + two * g00 * g01 * g11,
                (one() + w1) * g00 * g01 * g11 + w2 * g01 * g01 * g10,
                (one() + w2) * g00 * g01 * g11 + w1 * g01 * g01 * g10,
            ],
            vec![
                r3 * g00 * g00 * g20,
                g00 * g00 * g21 + two * g00 * g01 * g20,
                g00 * g00 * g21 + (w1 + w2) * g00 * g01 * g20,
                g00 * g00 * g22 + two * g00 * g02 * g20,
                g00 * g00 * g22 + (w1 + w2) * g00 * g02 * g20,
                g01 * g01 * g20 + two * g00 * g01 * g21,
                (one() + w1) * g00 * g01 * g21 + w2 * g01 * g01 * g20,
                (one() + w2) * g00 * g01 * g21 + w1 * g01 * g01 * g20,
                r3 * g00 * g10 * g10,
                g10 * g10 * g01 + two * g00 * g10 * g11,
                (one() + w2) * g00 * g10 * g11 + w1 * g10 * g10 * g01,
                (one() + w1) * g00 * g10 * g11 + w2 * g10 * g10 * g01,
                g10 * g10 * g02 + two * g00 * g10 * g12,
                (one() + w2) * g00 * g10 * g12 + w1 * g10 * g10 * g02,
                (one() + w1) * g00 * g10 * g12 + w2 * g10 * g10 * g02,
                g00 * g11 * g11 + two * g01 * g10 * g11,
                g00 * g11 * g11 + (w1 + w2) * g01 * g10 * g11,
            ],
        ]
    };
    Ok(BlockAmplitudes { arity, alpha: g.alpha, eta: g.eta, rows })
}

/// One tabulated block member: the micro and pump basis labels attached to
/// the block-amplitude entry `p_index` of block `block`. Distinct members
/// may share a `p_index` when the tabulated polynomials coincide.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlockMember {
    pub block: u32,
    pub p_index: usize,
    pub micro: &'static str,
    pub pump: &'static str,
}

const fn member(block: u32, p_index: usize, micro: &'static str, pump: &'static str) -> BlockMember {
    BlockMember { block, p_index, micro, pump }
}

static MEMBERS_TWO: &[BlockMember] = &[
    member(0, 0, "vac", "vac_p"),
    member(0, 1, "vac", "varphi+"),
    member(0, 2, "vac", "sigma+"),
    member(0, 3, "vac", "11"),
    member(1, 0, "psi+", "vac_p"),
    member(1, 1, "psi+", "varphi+"),
    member(1, 2, "psi-", "varphi-"),
    member(1, 3, "psi+", "sigma+"),
    member(1, 4, "psi-", "sigma-"),
    member(1, 5, "psi+", "11"),
    member(2, 0, "phi+", "vac_p"),
    member(2, 1, "phi+", "varphi+"),
    member(2, 2, "phi-", "varphi-"),
    member(2, 3, "phi+", "sigma+"),
    member(2, 4, "phi-", "sigma-"),
    member(2, 5, "phi+", "11"),
    member(2, 6, "1111", "vac_p"),
    member(2, 7, "1111", "varphi+"),
    member(2, 8, "1111", "sigma+"),
    member(2, 9, "1111", "11"),
];

static MEMBERS_THREE: &[BlockMember] = &[
    member(0, 0, "vac", "vac_p"),
    member(0, 1, "vac", "varphi_0"),
    member(0, 2, "vac", "sigma_0"),
    member(0, 3, "vac", "zeta_0"),
    member(1, 0, "psi_0", "vac_p"),
    member(1, 1, "psi_0", "varphi_0"),
    member(1, 2, "psi_phi", "varphi_-phi"),
    member(1, 2, "psi_2phi", "varphi_-2phi"),
    member(1, 3, "psi_0", "sigma_0"),
    member(1, 4, "psi_phi", "sigma_-phi"),
    member(1, 4, "psi_2phi", "sigma_-2phi"),
    member(1, 5, "psi_0", "zeta_0"),
    member(1, 6, "psi_phi", "zeta_-phi"),
    member(1, 7, "psi_2phi", "zeta_-2phi"),
    member(2, 0, "phi_0", "vac_p"),
    member(2, 1, "phi_0", "varphi_0"),
    member(2, 2, "phi_phi", "varphi_-phi"),
    member(2, 2, "phi_2phi", "varphi_-2phi"),
    member(2, 3, "phi_0", "sigma_0"),
    member(2, 4, "phi_phi", "sigma_-phi"),
    member(2, 4, "phi_2phi", "sigma_-2phi"),
    member(2, 5, "phi_0", "zeta_0"),
    member(2, 6, "phi_phi", "zeta_-phi"),
    member(2, 7, "phi_2phi", "zeta_-2phi"),
    member(2, 8, "delta_0", "vac_p"),
    member(2, 9, "delta_0", "varphi_0"),
    member(2, 10, "delta_phi", "varphi_-phi"),
    member(2, 11, "delta_2phi", "varphi_-2phi"),
    member(2, 12, "delta_0", "sigma_0"),
    member(2, 13, "delta_phi", "sigma_-phi"),
    member(2, 14, "delta_2phi", "sigma_-2phi"),
    member(2, 15, "delta_0", "zeta_0"),
    member(2, 16, "delta_phi", "zeta_-phi"),
    member(2, 16, "delta_2phi", "zeta_-2phi"),
];

/// Tabulated members of every block of an `arity`-source joint state.
pub fn block_members(arity: u8) -> &'static [BlockMember] {
    match arity {
        2 => MEMBERS_TWO,
        3 => MEMBERS_THREE,
        _ => panic!("two- and three-source setups only"),
    }
}

/// One member comparison of [`verify_block_decomposition`].
#[derive(Debug, Clone, Serialize)]
pub struct MemberCheck {
    pub block: u32,
    pub p_index: usize,
    pub micro: String,
    pub pump: String,
    /// Projection of the joint state, rescaled by (alpha eta)^-block.
    pub projection: [f64; 2],
    /// Tabulated polynomial value.
    pub formula: [f64; 2],
    /// |projection - formula|.
    pub residual: f64,
}

/// Outcome of projecting a brute-force joint state onto every tabulated
/// block member.
#[derive(Debug, Clone, Serialize)]
pub struct BlockDecompositionReport {
    pub arity: u8,
    pub alpha: [f64; 2],
    pub eta: f64,
    pub members: Vec<MemberCheck>,
    /// Largest member residual.
    pub max_member_residual: f64,
    /// Per block: |sum_m |p_nm|^2 (over members) - same sum from raw
    /// product projections|.
    pub block_sum_residuals: Vec<f64>,
    /// |1 - sum_n (alpha eta)^2n sum_m |p_nm|^2| over the tabulated blocks.
    pub normalization_defect: f64,
    /// Declared bound on the weight outside the tabulated blocks.
    pub normalization_tail_bound: f64,
}

/// Project a brute-force joint state onto every tabulated block member and
/// compare against the block-amplitude polynomials evaluated from the
/// numeric g table.
///
/// # Errors
/// Propagates assembly and g-table errors; alpha eta = 0 has no rescaled
/// expansion and is rejected upstream.
pub fn verify_block_decomposition(
    alpha: C64,
    eta: f64,
    arity: u8,
    l_cut: u32,
) -> Result<BlockDecompositionReport> {
    assert!(arity == 2 || arity == 3, "two- and three-source setups only");
    let g = crate::gmatrix::gmatrix_numeric(alpha, eta, 2, 2, l_cut)?;
    let p = block_amplitudes(&g, arity)?;
    let joint = joint_output(alpha, eta, arity, 2, l_cut)?;
    let s = alpha * eta;

    let mut members = Vec::new();
    let mut worst: f64 = 0.0;
    for m in block_members(arity) {
        let micro = build_basis(m.micro, arity, alpha)?;
        let pump = build_basis(m.pump, arity, alpha)?;
        let target = micro.tensor(&pump);
        let proj = target.inner(&joint)? / s.powu(m.block);
        let formula = p.entry(m.block as usize, m.p_index);
        let residual = (proj - formula).norm();
        worst = worst.max(residual);
        members.push(MemberCheck {
            block: m.block,
            p_index: m.p_index,
            micro: m.micro.to_string(),
            pump: m.pump.to_string(),
            projection: [proj.re, proj.im],
            formula: [formula.re, formula.im],
            residual,
        });
    }

    // Within each block, the member weights must reproduce the raw product
    // weights over the same span: every pump product with at most two
    // displaced excitations.
    let micro_count = 2 * arity as usize;
    let mut block_sum_residuals = Vec::new();
    for n in 0..=2u32 {
        let member_sum: f64 = members
            .iter()
            .filter(|m| m.block == n)
            .map(|m| {
                let p = C64::new(m.projection[0], m.projection[1]);
                p.norm_sqr()
            })
            .sum();
        let mut raw_sum = 0.0;
        for (occ, amp) in joint.terms() {
            let pairs: u32 = (0..arity as usize).map(|k| occ[micro_count + k]).sum::<u32>();
            let micro_total: u32 = occ[..micro_count].iter().sum();
            if micro_total == 2 * n && pairs <= 2 {
                raw_sum += amp.norm_sqr();
            }
        }
        raw_sum /= s.norm_sqr().powi(n as i32);
        block_sum_residuals.push((member_sum - raw_sum).abs());
    }

    // Tabulated weight against unity; blocks n >= 3 carry at most
    // C(n + arity - 1, arity - 1) members of near-unit polynomial weight.
    let s2 = s.norm_sqr();
    let mut formula_total = 0.0;
    for n in 0..=2u32 {
        let w: f64 = members
            .iter()
            .filter(|m| m.block == n)
            .map(|m| C64::new(m.formula[0], m.formula[1]).norm_sqr())
            .sum();
        formula_total += s2.powi(n as i32) * w;
    }
    let tail = if arity == 2 { 6.0 } else { 12.0 } * s2.powi(3)
        + 100.0 * (alpha.norm() * eta * eta).powi(6).max(eta.powi(12));
    let normalization_defect = (1.0 - formula_total).abs();

    Ok(BlockDecompositionReport {
        arity,
        alpha: [alpha.re, alpha.im],
        eta,
        members,
        max_member_residual: worst,
        block_sum_residuals,
        normalization_defect,
        normalization_tail_bound: tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pump::default_l_cut;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn entangled_families_are_orthonormal() {
        let alpha = c(1.3, 0.4);
        for arity in [2u8, 3] {
            let labels: Vec<String> = block_members(arity)
                .iter()
                .flat_map(|m| [m.micro.to_string(), m.pump.to_string()])
                .collect();
            let mut micro_states = Vec::new();
            let mut pump_states = Vec::new();
            for l in &labels {
                let s = build_basis(l, arity, alpha).unwrap();
                assert_relative_eq!(s.norm_sqr(), 1.0, epsilon = 1e-12);
                if s.modes()[0] == Mode::Micro(1) {
                    micro_states.push((l.clone(), s));
                } else {
                    pump_states.push((l.clone(), s));
                }
            }
            for group in [micro_states, pump_states] {
                for (la, a) in &group {
                    for (lb, b) in &group {
                        let want = if la == lb { 1.0 } else { 0.0 };
                        let got = a.inner(b).unwrap().norm();
                        assert!(
                            (got - want).abs() < 1e-12,
                            "arity {arity}: <{la}|{lb}> = {got}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn unknown_labels_are_rejected() {
        assert!(matches!(
            build_basis("psi_3phi", 3, c(1.0, 0.0)),
            Err(Error::UnknownLabel(_))
        ));
        assert!(matches!(
            build_basis("xi+", 2, c(1.0, 0.0)),
            Err(Error::UnknownLabel(_))
        ));
        // Pump-family phase labels are negative, micro-family non-negative.
        assert!(build_basis("zeta_phi", 3, c(1.0, 0.0)).is_err());
        assert!(build_basis("psi_-phi", 3, c(1.0, 0.0)).is_err());
    }

    #[test]
    fn joint_output_factorizes_source_by_source() {
        let alpha = c(1.5, 0.0);
        let eta = 0.05;
        let l_cut = default_l_cut(1.5);
        let joint = joint_output(alpha, eta, 2, 2, l_cut).unwrap();
        // The (0,0|0,0) amplitude is the square of the single-source one.
        let single = crate::spdc::assemble_output(alpha, eta, 2, l_cut).unwrap();
        let a00 = single.state.amplitude(&[0, 0, 0]);
        let got = joint.amplitude(&[0, 0, 0, 0, 0, 0]);
        assert_relative_eq!(got.re, (a00 * a00).re, epsilon = 1e-13);
        // Mixed term: source 1 with one pair, source 2 in vacuum.
        let a11 = single.state.amplitude(&[1, 1, 0]);
        let got2 = joint.amplitude(&[1, 1, 0, 0, 0, 0]);
        assert_relative_eq!(got2.re, (a11 * a00).re, epsilon = 1e-13);
        assert_relative_eq!(got2.im, (a11 * a00).im, epsilon = 1e-13);
    }

    #[test]
    fn leading_block_amplitudes_reduce_to_overlap_powers() {
        let g = crate::gmatrix::gmatrix_numeric(c(2.0, 0.0), 0.02, 2, 2, default_l_cut(2.0))
            .unwrap();
        let g00 = g.require(0, 0).unwrap();
        let p2 = block_amplitudes(&g, 2).unwrap();
        assert!((p2.entry(0, 0) - g00 * g00).norm() < 1e-15);
        let p3 = block_amplitudes(&g, 3).unwrap();
        assert!((p3.entry(0, 0) - g00 * g00 * g00).norm() < 1e-15);
        // Leading one-pair weights: sqrt(arity) g00^(arity-1) g10.
        let g10 = g.require(1, 0).unwrap();
        assert!((p2.entry(1, 0) - 2.0f64.sqrt() * g00 * g10).norm() < 1e-15);
        assert!((p3.entry(1, 0) - 3.0f64.sqrt() * g00 * g00 * g10).norm() < 1e-15);
    }

    #[test]
    fn series_g_table_cannot_feed_the_block_polynomials_without_row_two() {
        // The ragged series table stops at m = 2 for n = 2, which is enough;
        // but a table truncated below that must error, not zero-fill.
        let g = crate::gmatrix::gmatrix_numeric(c(1.0, 0.0), 0.02, 2, 1, default_l_cut(1.0))
            .unwrap();
        assert!(matches!(
            block_amplitudes(&g, 2),
            Err(Error::MissingGEntry { n: 0, m: 2 })
        ));
    }

    #[test]
    fn two_source_members_match_brute_force_projections() {
        let report =
            verify_block_decomposition(c(2.0, 0.0), 0.02, 2, default_l_cut(2.0)).unwrap();
        assert!(
            report.max_member_residual < 1e-9,
            "worst member residual {:.3e}",
            report.max_member_residual
        );
        for (n, r) in report.block_sum_residuals.iter().enumerate() {
            assert!(*r < 1e-10, "block {n} sum residual {r:.3e}");
        }
        assert!(
            report.normalization_defect <= report.normalization_tail_bound,
            "normalization defect {:.3e} above declared tail {:.3e}",
            report.normalization_defect,
            report.normalization_tail_bound
        );
    }

    #[test]
    fn three_source_members_match_brute_force_projections() {
        let report =
            verify_block_decomposition(c(1.5, 0.0), 0.03, 3, default_l_cut(1.5)).unwrap();
        assert!(
            report.max_member_residual < 1e-9,
            "worst member residual {:.3e}",
            report.max_member_residual
        );
        for (n, r) in report.block_sum_residuals.iter().enumerate() {
            assert!(*r < 1e-10, "block {n} sum residual {r:.3e}");
        }
        assert!(report.normalization_defect <= report.normalization_tail_bound);
    }

    #[test]
    fn degenerate_members_share_one_polynomial_by_symmetry() {
        // Members listed with the same p_index must both project onto it.
        let report =
            verify_block_decomposition(c(1.2, 0.0), 0.04, 3, default_l_cut(1.2)).unwrap();
        let mut seen: std::collections::BTreeMap<(u32, usize), [f64; 2]> =
            std::collections::BTreeMap::new();
        let mut degenerate = 0;
        for m in &report.members {
            if let Some(prev) = seen.insert((m.block, m.p_index), m.projection) {
                degenerate += 1;
                let d = (C64::new(prev[0], prev[1])
                    - C64::new(m.projection[0], m.projection[1]))
                .norm();
                assert!(d < 1e-10, "degenerate pair ({}, {}) differs by {d:.3e}", m.block, m.p_index);
            }
        }
        assert_eq!(degenerate, 5, "three-source table has five degenerate pairs");
    }
}
