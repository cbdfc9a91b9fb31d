//! Matrix elements of the displacement operator D(b) = exp(b a+ - b* a).

use std::sync::OnceLock;

use crate::C64;

const LN_FACTORIAL_TABLE_LEN: usize = 16_384;

/// Natural log of n!, table-backed for small n, Stirling series beyond.
pub fn ln_factorial(n: u32) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_TABLE_LEN);
        t.push(0.0);
        for k in 1..LN_FACTORIAL_TABLE_LEN as u64 {
            t.push(t[k as usize - 1] + (k as f64).ln());
        }
        t
    });
    if let Some(&v) = table.get(n as usize) {
        return v;
    }
    // Stirling series; relative error < 1e-14 for n above the table.
    let x = n as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// Generalized Laguerre polynomial L_k^(a)(x) by upward recurrence in k.
///
/// Stable for the moderate degrees used here; degree is bounded by the
/// smaller of the two occupation numbers in a displacement matrix element.
fn laguerre(degree: u32, order: u32, x: f64) -> f64 {
    let a = order as f64;
    if degree == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = 1.0 + a - x;
    for k in 1..degree {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * cur - (kf + a) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// <m| D(beta) |n> in the number basis.
///
/// Closed form for m >= n:
///
/// ```text
/// <m|D(b)|n> = sqrt(n!/m!) b^(m-n) exp(-|b|^2/2) L_n^(m-n)(|b|^2)
/// ```
///
/// and the m < n case follows from <m|D(b)|n> = conj(<n|D(-b)|m>).
/// The factorial ratio, the power of b, and the Gaussian are combined in the
/// log domain, so the function is total: occupation gaps or displacements
/// whose intermediate factors would overflow an f64 underflow to zero
/// instead, which is the correct limit of the product.
pub fn displacement_matrix_element(m: u32, n: u32, beta: C64) -> C64 {
    let x = beta.norm_sqr();
    if x == 0.0 {
        return if m == n { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
    }
    let (lo, hi, base) = if m >= n { (n, m, beta) } else { (m, n, -beta.conj()) };
    let gap = hi - lo;
    let lag = laguerre(lo, gap, x);
    if lag == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let ln_mag = 0.5 * (ln_factorial(lo) - ln_factorial(hi)) + f64::from(gap) * base.norm().ln()
        - 0.5 * x
        + lag.abs().ln();
    let phase = f64::from(gap) * base.arg();
    let sign = if lag < 0.0 { -1.0 } else { 1.0 };
    sign * ln_mag.exp() * C64::new(phase.cos(), phase.sin())
}
