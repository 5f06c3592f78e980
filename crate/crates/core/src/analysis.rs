//! Derived analyses: Lamb-Dicke dark-state limits, noise budget, squeezing
//! metrology, coherent-generation and probe-contrast benchmarks.

use std::f64::consts::LOG10_E;

use crate::dynamics::{evolve_master, EvolveOptions, KeepStates, NoiseModel};
use crate::engineered::{self, EngineeredBasisSpec, LambDickeParams};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::fock::{self, FockSpace, Operator, QuantumState, Truncation};
use crate::linalg::{self, I};

/// Variance reduction in dB for squeezing parameter `r`: `10 log₁₀ e^{2r}`.
pub fn squeezing_db(r: f64) -> f64 {
    20.0 * LOG10_E * r
}

/// Variance reduction of the tightest quadrature relative to vacuum (1/2).
pub fn state_squeezing_db(state: &QuantumState) -> Result<f64> {
    let v = fock::min_quadrature_variance(state)?;
    if !(v > 0.0) {
        return Err(Error::InvalidState(format!("minimum quadrature variance {v} is not positive")));
    }
    Ok(10.0 * (0.5 / v).log10())
}

/// Decoherence rate of a squeezed state under heating: `Γ₀→₁ cosh(2r)/2`.
pub fn heating_decoherence_rate(gamma_01: f64, r: f64) -> f64 {
    0.5 * gamma_01 * (2.0 * r).cosh()
}

/// Pure dephasing left over once heating is subtracted from the measured
/// motional coherence time: `1/T − 2Γ₀→₁`, floored at zero.
pub fn dephasing_rate_estimate(coherence_time: f64, gamma_01: f64) -> Result<f64> {
    if !(coherence_time > 0.0) {
        return Err(Error::param(format!("coherence time must be positive, got {coherence_time}")));
    }
    let raw = 1.0 / coherence_time - 2.0 * gamma_01;
    if raw < 0.0 {
        log::warn!("heating alone exceeds the coherence decay ({raw:.3} 1/s); dephasing floored at 0");
        return Ok(0.0);
    }
    Ok(raw)
}

/// Second-sideband strength relative to the first: `Ω₂ = η Ω_bsb`.
pub fn second_sideband_rate(eta: f64, omega_bsb: f64) -> f64 {
    eta * omega_bsb
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBudget {
    /// Squeezed-state decoherence from heating, quanta/s.
    pub gamma_sq: f64,
    /// Motional dephasing, 1/s.
    pub gamma_dephase: f64,
    /// Effective pumping rate `Γ_m = 2Ω²/Γ` with `Ω = Ω_anchor / cosh r`, 1/s.
    pub pump_rate: f64,
}

pub fn noise_budget(gamma_01: f64, r: f64, coherence_time: f64, omega_anchor: f64, gamma_spin: f64) -> Result<NoiseBudget> {
    if !(gamma_01 >= 0.0) || !(r >= 0.0) || !(gamma_spin > 0.0) || !omega_anchor.is_finite() {
        return Err(Error::param("noise budget needs Γ₀→₁ ≥ 0, r ≥ 0, Γ > 0 and a finite drive"));
    }
    let omega = omega_anchor.abs() / r.cosh();
    Ok(NoiseBudget {
        gamma_sq: heating_decoherence_rate(gamma_01, r),
        gamma_dephase: dephasing_rate_estimate(coherence_time, gamma_01)?,
        pump_rate: 2.0 * omega * omega / gamma_spin,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DarkStateReport {
    pub r_target: f64,
    pub eta: f64,
    pub dim: usize,
    /// Overlap of the lab-frame dark state with the ideal squeezed vacuum.
    pub fidelity: f64,
    pub min_singular_value: f64,
    /// Variance reduction of the dark state's tightest quadrature, dB.
    pub squeezed_variance_db: f64,
    /// Smallest n with 99 % of the dark-state population at or below it.
    pub support_cutoff: usize,
}

/// Dark state of the Lamb-Dicke-corrected pump operator compared with the
/// ideal squeezed vacuum on `n` Fock levels.
pub fn dark_state_fidelity(r: f64, phi_s: f64, ld: &LambDickeParams, n: usize) -> Result<DarkStateReport> {
    let spec = EngineeredBasisSpec::squeezed(r, phi_s)?;
    let (sv, v) = engineered::lab_dark_state(&spec, ld, n)?;
    let target = fock::squeezed_vacuum_amplitudes(r, phi_s, n);
    let fidelity = target.dotc(&v).norm_sqr().min(1.0);
    let cutoff = |x: &crate::linalg::CVector| {
        let mut cum = 0.0;
        x.iter()
            .position(|z| {
                cum += z.norm_sqr();
                cum >= 0.99
            })
            .unwrap_or(n)
    };
    let support_cutoff = cutoff(&v);
    let needed = support_cutoff.max(cutoff(&target));
    if needed + 10 >= n {
        return Err(Error::Truncation {
            what: format!("dark state at r={r}, η={}", ld.eta),
            required: needed + 11,
            actual: n,
        });
    }
    let state = QuantumState::ket_unchecked(FockSpace::motion(n)?, v);
    Ok(DarkStateReport {
        r_target: r,
        eta: ld.eta,
        dim: n,
        fidelity,
        min_singular_value: sv,
        squeezed_variance_db: state_squeezing_db(&state)?,
        support_cutoff,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DarkStateSweep {
    pub points: Vec<DarkStateReport>,
    pub threshold: f64,
    /// First r where the fidelity falls through `threshold`, refined by bisection.
    pub crossing: Option<f64>,
    pub max_db: f64,
    pub r_at_max_db: f64,
}

/// Dark-state fidelity over `r_grid`, with the threshold crossing bisected
/// to `1e-4` in r and the variance reduction maximised by golden section
/// around the best grid point.
pub fn dark_state_sweep(
    r_grid: &[f64],
    phi_s: f64,
    ld: &LambDickeParams,
    n: usize,
    threshold: f64,
    exec: Execution,
) -> Result<DarkStateSweep> {
    if r_grid.len() < 2 || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("r grid needs at least two increasing points"));
    }
    let points: Vec<DarkStateReport> = exec::map_slice(exec, r_grid, |&r| dark_state_fidelity(r, phi_s, ld, n))
        .into_iter()
        .collect::<Result<_>>()?;
    let fid = |r: f64| dark_state_fidelity(r, phi_s, ld, n).map(|d| d.fidelity);
    let mut crossing = None;
    for w in points.windows(2) {
        if w[0].fidelity >= threshold && w[1].fidelity < threshold {
            let (mut lo, mut hi) = (w[0].r_target, w[1].r_target);
            while hi - lo > 1e-4 {
                let mid = 0.5 * (lo + hi);
                if fid(mid)? >= threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossing = Some(0.5 * (lo + hi));
            break;
        }
    }
    let best = (0..points.len())
        .max_by(|&a, &b| points[a].squeezed_variance_db.total_cmp(&points[b].squeezed_variance_db))
        .expect("nonempty grid");
    let db = |r: f64| dark_state_fidelity(r, phi_s, ld, n).map(|d| d.squeezed_variance_db);
    let mut lo = points[best.saturating_sub(1)].r_target;
    let mut hi = points[(best + 1).min(points.len() - 1)].r_target;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (db(x1)?, db(x2)?);
    while hi - lo > 1e-4 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = db(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = db(x2)?;
        }
    }
    let (r_at_max_db, mut max_db) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    let (mut r_best, grid_best) = (r_at_max_db, points[best].squeezed_variance_db);
    if grid_best > max_db {
        max_db = grid_best;
        r_best = points[best].r_target;
    }
    Ok(DarkStateSweep {
        points,
        threshold,
        crossing,
        max_db,
        r_at_max_db: r_best,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentGeneration {
    /// `t_r = r/Ω`.
    pub duration: f64,
    pub ideal_fidelity: f64,
    pub noisy_fidelity: f64,
}

/// Squeezing by direct two-phonon driving `H = (Ω/2)(a†² + a²)` from the
/// vacuum for `t_r = r/Ω`. The drive phase yields `φ_s = π/2`; the noisy
/// run adds the motional jumps of `noise` over the same duration.
pub fn coherent_generation_benchmark(r: f64, omega_2sb: f64, noise: &NoiseModel, n: usize) -> Result<CoherentGeneration> {
    if !(omega_2sb > 0.0) || !omega_2sb.is_finite() {
        return Err(Error::param(format!("two-phonon drive must be positive, got {omega_2sb}")));
    }
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::param(format!("r must be finite and ≥ 0, got {r}")));
    }
    let space = FockSpace::motion(n)?;
    let required = fock::squeeze_bound(r);
    if n < required {
        return Err(Error::Truncation {
            what: format!("two-phonon squeezing to r={r}"),
            required,
            actual: n,
        });
    }
    let a = fock::destroy(space)?;
    let a2 = &a * &a;
    let h = (&a2 + &a2.adjoint()).scaled_re(0.5 * omega_2sb);
    let duration = r / omega_2sb;
    let target = fock::squeezed_vacuum_amplitudes(r, std::f64::consts::FRAC_PI_2, n);
    let u = linalg::expm(&(h.matrix() * (-I * duration)));
    let psi = u.column(0).into_owned();
    let ideal_fidelity = target.dotc(&psi).norm_sqr();
    let jumps = noise.motional_jumps(space)?;
    let noisy_fidelity = if jumps.is_empty() {
        ideal_fidelity
    } else {
        let opts = EvolveOptions {
            target: Some(target),
            keep: KeepStates::None,
            ..EvolveOptions::default()
        };
        let res = evolve_master(&QuantumState::fock(space, 0)?, &h, &jumps, &[0.0, duration], &opts)?;
        *res.target_fidelity.last().expect("two grid points")
    };
    Ok(CoherentGeneration {
        duration,
        ideal_fidelity,
        noisy_fidelity,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeContrast {
    pub times: Vec<f64>,
    pub p_down: Vec<f64>,
    /// Peak-to-peak swing of `P↓` over the first oscillation period.
    pub contrast: f64,
    /// Swing over the last period divided by the first.
    pub amplitude_ratio: f64,
}

/// Simulates the H₊ probe on `state` (spin prepared in ↓) with the motional
/// noise of `noise` for `duration`, sampling 40 points per ground-state
/// oscillation period.
pub fn probe_contrast_bound(
    state: &QuantumState,
    spec: &EngineeredBasisSpec,
    omega_bsb: f64,
    duration: f64,
    noise: &NoiseModel,
) -> Result<ProbeContrast> {
    if !(duration > 0.0) || !(omega_bsb > 0.0) {
        return Err(Error::param("probe needs positive duration and drive"));
    }
    let motion = state.space().motional();
    let space = FockSpace::spin_motion(motion.dim())?;
    let rho = if state.space().has_spin() {
        state.to_density()
    } else {
        state.with_spin_down()?.to_density()
    };
    let calib = engineered::probe_calibration(spec, omega_bsb, 0.0)?;
    let rate = calib.probe_rate()?.norm();
    let h = engineered::build_probe_hamiltonian(&calib, space)?;
    let jumps: Vec<Operator> = NoiseModel {
        gamma_spin: 0.0,
        ..*noise
    }
    .jumps(space)?;
    let period = std::f64::consts::PI / rate;
    let per = 40usize;
    let n_pts = ((duration / period) * per as f64).ceil() as usize + 1;
    let times: Vec<f64> = (0..n_pts).map(|k| duration * k as f64 / (n_pts - 1) as f64).collect();
    let opts = EvolveOptions {
        keep: KeepStates::None,
        ..EvolveOptions::default()
    };
    let res = evolve_master(&rho, &h, &jumps, &times, &opts)?;
    let p = res.spin_down_prob;
    let swing = |lo_t: f64, hi_t: f64| {
        let vals = times.iter().zip(&p).filter(|(t, _)| **t >= lo_t && **t <= hi_t).map(|(_, v)| *v);
        let (mut mx, mut mn) = (f64::MIN, f64::MAX);
        for v in vals {
            mx = mx.max(v);
            mn = mn.min(v);
        }
        mx - mn
    };
    let first = swing(0.0, period.min(duration));
    let last = swing((duration - period).max(0.0), duration);
    Ok(ProbeContrast {
        contrast: first,
        amplitude_ratio: if first > 0.0 { last / first } else { 0.0 },
        times,
        p_down: p,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportCoverage {
    /// Cumulative population of `S|k⟩` up to each n, one row per column.
    pub cumulative: Vec<Vec<f64>>,
    /// First n at which every column has reached `threshold`.
    pub combined_level: Option<usize>,
    pub threshold: f64,
}

/// Cumulative Fock support of the squeezed-basis states `S(ξ)|k⟩`,
/// `k < columns`, computed from the squeeze operator on `n` levels.
pub fn fock_support_coverage(r: f64, phi_s: f64, columns: usize, threshold: f64, n: usize) -> Result<SupportCoverage> {
    let spec = EngineeredBasisSpec::squeezed(r, phi_s)?;
    let space = FockSpace::motion(n)?;
    let s = engineered::engineered_unitary(&spec, space, engineered::OperatorOrder::SqueezeDisplace, Truncation::Enforce)?;
    let cumulative: Vec<Vec<f64>> = (0..columns)
        .map(|c| {
            let mut acc = 0.0;
            s.matrix()
                .column(c)
                .iter()
                .map(|z| {
                    acc += z.norm_sqr();
                    acc
                })
                .collect()
        })
        .collect();
    let combined_level = (0..n).find(|&k| cumulative.iter().all(|col| col[k] >= threshold));
    Ok(SupportCoverage {
        cumulative,
        combined_level,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use crate::linalg::C64;
    use std::f64::consts::TAU;

    #[test]
    fn squeezing_db_values() {
        assert_eq!(squeezing_db(0.0), 0.0);
        assert_relative_eq!(squeezing_db(1.45), 12.59, epsilon = 0.005);
        assert_relative_eq!(squeezing_db(0.63), 8.685889638 * 0.63, epsilon = 1e-8);
        assert_relative_eq!(squeezing_db(0.63), 5.47, epsilon = 0.005);
    }

    #[test]
    fn state_db_matches_parameter() {
        for (r, n) in [(0.3, 200), (1.0, 200), (1.45, 200), (2.0, 600)] {
            let space = FockSpace::motion(n).unwrap();
            let sq = QuantumState::ket(space, fock::squeezed_vacuum_amplitudes(r, 0.4, n)).unwrap();
            assert!((state_squeezing_db(&sq).unwrap() - squeezing_db(r)).abs() < 0.01, "r={r}");
        }
        let space = FockSpace::motion(200).unwrap();
        let sq = fock::squeeze(1.45, 0.0, space).unwrap().apply(&fock::coherent_amplitudes(C64::new(0.0, 0.0), 200));
        let st = QuantumState::ket(space, sq).unwrap();
        assert!((state_squeezing_db(&st).unwrap() - squeezing_db(1.45)).abs() < 0.01);
    }

    #[test]
    fn noise_formulas() {
        assert_relative_eq!(heating_decoherence_rate(10.0, 0.0), 5.0);
        assert_relative_eq!(heating_decoherence_rate(10.0, 1.45), 45.57, epsilon = 0.01);
        let grid: Vec<f64> = (0..30).map(|k| k as f64 * 0.1).collect();
        assert!(grid.windows(2).all(|w| heating_decoherence_rate(3.0, w[1]) > heating_decoherence_rate(3.0, w[0])));
        assert_relative_eq!(dephasing_rate_estimate(32e-3, 10.0).unwrap(), 11.25, epsilon = 1e-12);
        assert_eq!(dephasing_rate_estimate(1e6, 0.0).unwrap(), 1e-6);
        assert_eq!(dephasing_rate_estimate(1e-3, 1e4).unwrap(), 0.0);
        assert!(dephasing_rate_estimate(0.0, 1.0).is_err());
        let b = noise_budget(10.0, 1.45, 32e-3, TAU * 20e3, TAU * 100e3).unwrap();
        assert_relative_eq!(b.gamma_sq, 45.57, epsilon = 0.01);
        assert_relative_eq!(b.gamma_dephase, 11.25, epsilon = 1e-12);
    }

    #[test]
    fn two_phonon_benchmark() {
        assert_relative_eq!(second_sideband_rate(0.05, TAU * 20e3), TAU * 1e3, epsilon = 1e-9);
        let r = coherent_generation_benchmark(1.45, TAU * 1e3, &NoiseModel::default(), 200).unwrap();
        assert_relative_eq!(r.duration, 230.77e-6, epsilon = 1e-8);
        assert!(r.ideal_fidelity > 0.999);
        assert_eq!(r.noisy_fidelity, r.ideal_fidelity);
        assert!(coherent_generation_benchmark(1.45, 0.0, &NoiseModel::default(), 120).is_err());
    }

    #[test]
    fn support_coverage_levels() {
        let c = fock_support_coverage(1.45, 0.0, 2, 0.88, 200).unwrap();
        assert_eq!(c.combined_level, Some(25));
        assert!(c.cumulative[0][26] > 0.98);
    }

    #[test]
    fn dark_state_near_ideal_at_moderate_squeezing() {
        let ld = LambDickeParams::new(0.05, 1.0).unwrap();
        let d = dark_state_fidelity(1.45, 0.0, &ld, 4000).unwrap();
        assert!(d.fidelity >= 0.99);
        assert!(d.support_cutoff < 200);
        assert!(dark_state_fidelity(3.0, 0.0, &ld, 60).is_err());
    }

    #[test]
    fn perfect_probe_has_full_contrast() {
        let spec = EngineeredBasisSpec::squeezed(0.5, 0.0).unwrap();
        let motion = FockSpace::motion(40).unwrap();
        let st = engineered::target_state(&spec, motion).unwrap();
        let pc = probe_contrast_bound(&st, &spec, TAU * 20e3, 100e-6, &NoiseModel::default()).unwrap();
        assert!((pc.contrast - 1.0).abs() < 1e-3, "{}", pc.contrast);
        assert!((pc.amplitude_ratio - 1.0).abs() < 1e-2);
    }
}
