//! Fock-population distributions of coherent, squeezed and
//! displaced-squeezed states.

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::special::{ln_factorial, scaled_hermite};

/// Below this squeezing the displaced-squeezed form is numerically singular.
pub const MIN_SQUEEZE: f64 = 1e-6;

/// Poisson weight `e^{−|α|²}|α|^{2n}/n!`.
pub fn dist_coherent(n: usize, alpha_mag: f64) -> f64 {
    if alpha_mag == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let x = alpha_mag * alpha_mag;
    (-x + n as f64 * x.ln() - ln_factorial(n)).exp()
}

/// Squeezed-vacuum weight `(tanh r/2)ⁿ n!/(((n/2)!)² cosh r)` for even n, 0 for odd.
pub fn dist_squeezed(n: usize, r: f64) -> f64 {
    if n % 2 == 1 {
        return 0.0;
    }
    if r == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    let ln = nf * (0.5 * r.tanh()).ln() + ln_factorial(n) - 2.0 * ln_factorial(n / 2) - r.cosh().ln();
    ln.exp()
}

/// Displaced-squeezed weights for `n < len`, as a function of `|α|`, `r`
/// and `θ = arg α − φ_s/2`.
pub fn dist_displaced_squeezed_table(len: usize, r: f64, alpha_mag: f64, theta: f64) -> Result<Vec<f64>> {
    if !(r >= MIN_SQUEEZE) || !r.is_finite() {
        return Err(Error::param(format!(
            "displaced-squeezed distribution needs r ≥ {MIN_SQUEEZE:e} (got {r}); use dist_coherent"
        )));
    }
    if !(alpha_mag >= 0.0) || !alpha_mag.is_finite() || !theta.is_finite() {
        return Err(Error::param("displaced-squeezed distribution needs finite |α| ≥ 0 and phase"));
    }
    let t = r.tanh();
    let a2 = alpha_mag * alpha_mag;
    let expo = -a2 + a2 * t * (2.0 * theta).cos();
    let z = C64::from_polar(alpha_mag / (2.0 * r).sinh().sqrt(), theta);
    let base = expo - r.cosh().ln();
    let lt = t.ln();
    Ok(scaled_hermite(len, z)
        .into_iter()
        .enumerate()
        .map(|(n, (m, ls))| {
            let mag2 = m.norm_sqr();
            if mag2 == 0.0 {
                0.0
            } else {
                (base + n as f64 * lt + mag2.ln() + 2.0 * ls).exp()
            }
        })
        .collect())
}

/// Displaced-squeezed weight of level `n`; `arg α` and `φ_s` enter only
/// through `arg α − φ_s/2`.
pub fn dist_displaced_squeezed(n: usize, r: f64, phi_s: f64, alpha: C64) -> Result<f64> {
    let table = dist_displaced_squeezed_table(n + 1, r, alpha.norm(), alpha.arg() - 0.5 * phi_s)?;
    Ok(table[n])
}

pub fn coherent_table(len: usize, alpha_mag: f64) -> Vec<f64> {
    (0..len).map(|n| dist_coherent(n, alpha_mag)).collect()
}

pub fn squeezed_table(len: usize, r: f64) -> Vec<f64> {
    (0..len).map(|n| dist_squeezed(n, r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock;
    use approx::assert_relative_eq;

    #[test]
    fn coherent_examples() {
        assert_eq!(dist_coherent(0, 0.0), 1.0);
        assert_relative_eq!(dist_coherent(2, 2.0), 8.0 * (-4.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(dist_coherent(2, 2.0), 0.146525, epsilon = 1e-6);
        let s: f64 = coherent_table(61, 2.0).iter().sum();
        assert_relative_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn squeezed_examples() {
        assert_eq!(dist_squeezed(1, 0.7), 0.0);
        assert_relative_eq!(dist_squeezed(0, 1.45), 0.4446732235547504, epsilon = 1e-14);
        let amps = fock::squeezed_vacuum_amplitudes(1.45, 0.3, 80);
        for n in 0..80 {
            assert_relative_eq!(dist_squeezed(n, 1.45), amps[n].norm_sqr(), epsilon = 1e-13);
        }
    }

    #[test]
    fn displaced_squeezed_reduces_to_squeezed() {
        for r in [0.3, 0.63, 1.45] {
            let t = dist_displaced_squeezed_table(31, r, 0.0, 0.0).unwrap();
            for n in 0..31 {
                assert_relative_eq!(t[n], dist_squeezed(n, r), epsilon = 1e-10);
            }
        }
        assert!(dist_displaced_squeezed(3, 1e-8, 0.0, C64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn displaced_squeezed_matches_operator_state() {
        // S(ξ)D(α)|0⟩ in the Fock basis.
        let (r, phi_s) = (0.63, 0.5);
        let alpha = C64::from_polar(2.2, 0.42 + 0.5 * phi_s);
        let s = fock::FockSpace::motion(120).unwrap();
        let sq = fock::squeeze(r, phi_s, s).unwrap();
        let v = sq.apply(&fock::coherent_amplitudes(alpha, 120));
        let t = dist_displaced_squeezed_table(40, r, 2.2, 0.42).unwrap();
        for n in 0..40 {
            assert_relative_eq!(t[n], v[n].norm_sqr(), epsilon = 1e-10);
        }
        let total: f64 = t.iter().sum();
        assert!(total <= 1.0 + 1e-12 && total > 1.0 - 1e-6);
    }
}
