//! Laguerre and Hermite recurrences used by the coupling and distribution code.

use crate::linalg::C64;

/// Generalised Laguerre polynomial `L_n^{(α)}(x)` by three-term recurrence.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `L_n^{(α)}(x)` for every `n < len`.
pub fn laguerre_table(len: usize, alpha: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    out.push(1.0);
    if len == 1 {
        return out;
    }
    out.push(1.0 + alpha - x);
    for k in 1..len - 1 {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * out[k] - (kf + alpha) * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Normalised Hermite values `H_n(z)/√(2ⁿ n!)` for `n < len`, returned as
/// `(mantissa, log_scale)` pairs so that the true value is
/// `mantissa · exp(log_scale)`. The recurrence is rescaled whenever the
/// magnitude drifts far from one.
pub fn scaled_hermite(len: usize, z: C64) -> Vec<(C64, f64)> {
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    let s2 = std::f64::consts::SQRT_2;
    let mut prev = C64::new(0.0, 0.0);
    let mut cur = C64::new(1.0, 0.0);
    let mut log_scale = 0.0;
    out.push((cur, log_scale));
    for n in 0..len - 1 {
        let nf = n as f64;
        let next = (cur * z * s2 - prev * nf.sqrt()) / (nf + 1.0).sqrt();
        prev = cur;
        cur = next;
        let mag = cur.norm().max(prev.norm());
        if mag > 1e100 || (mag < 1e-100 && mag > 0.0) {
            let ln = mag.ln();
            cur /= mag;
            prev /= mag;
            log_scale += ln;
        }
        out.push((cur, log_scale));
    }
    out
}

pub fn ln_factorial(n: usize) -> f64 {
    statrs::function::factorial::ln_factorial(n as u64)
}
