use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::{BasisTag, PopulationEstimate, RabiTrace};
use crate::engineered::{self, EngineeredBasisSpec, LambDickeParams, OperatorOrder};
use crate::error::{Error, Result};
use crate::fock::{QuantumState, Truncation};

/// Blue-sideband (and H₊) flop model
/// `P↓(t) = bt + ½ Σ p(n) (1 + e^{−γ√(n+1)t} cos(Ω_R f(n,η) t))`.
///
/// Only `ld.eta` enters; the overall scale is `estimate.omega_r`.
pub fn rabi_signal(t: f64, estimate: &PopulationEstimate, ld: &LambDickeParams) -> f64 {
    rabi_signal_for(BasisTag::BlueSideband, t, estimate, ld)
}

/// Flop model for any probe. Under H₋ the engineered ground state is dark
/// and level `n ≥ 1` flops with level `n − 1`.
pub fn rabi_signal_for(tag: BasisTag, t: f64, estimate: &PopulationEstimate, ld: &LambDickeParams) -> f64 {
    let f = engineered::sideband_couplings(estimate.p.len() + 1, ld);
    let flop = |p: f64, s: f64, w: f64| 0.5 * p * (1.0 + (-estimate.gamma * s * t).exp() * (w * t).cos());
    let sum: f64 = match tag {
        BasisTag::BlueSideband | BasisTag::HPlus => estimate
            .p
            .iter()
            .enumerate()
            .map(|(n, &p)| flop(p, ((n + 1) as f64).sqrt(), estimate.omega_r * f[n]))
            .sum(),
        BasisTag::HMinus => {
            estimate.p[0]
                + estimate
                    .p
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(n, &p)| flop(p, (n as f64).sqrt(), estimate.omega_r * f[n - 1]))
                    .sum::<f64>()
        }
    };
    estimate.b * t + sum
}

/// Level populations seen by a probe: Fock populations for the blue
/// sideband, engineered-basis populations `⟨n|U†ρU|n⟩` for H±.
pub fn populations_for_probe(state: &QuantumState, tag: BasisTag, spec: &EngineeredBasisSpec) -> Result<Vec<f64>> {
    match tag {
        BasisTag::BlueSideband => Ok(state.fock_populations()),
        BasisTag::HPlus | BasisTag::HMinus => {
            let motion = state.space().motional();
            let u = engineered::engineered_unitary(spec, motion, OperatorOrder::SqueezeDisplace, Truncation::Override)?;
            state.populations_in_basis(u.matrix())
        }
    }
}

/// Ground truth for [`synthesize_trace`].
#[derive(Debug, Clone)]
pub enum Truth {
    Populations(PopulationEstimate),
    /// A motional (or spin-motion) state read out in the basis selected by
    /// the trace's tag, flopping with the given decay, scale and drift.
    State {
        state: QuantumState,
        spec: EngineeredBasisSpec,
        gamma: f64,
        omega_r: f64,
        b: f64,
    },
}

impl Truth {
    fn estimate(&self, tag: BasisTag) -> Result<PopulationEstimate> {
        match self {
            Truth::Populations(p) => Ok(p.clone()),
            Truth::State {
                state,
                spec,
                gamma,
                omega_r,
                b,
            } => {
                let mut p = populations_for_probe(state, tag, spec)?;
                for v in &mut p {
                    *v = v.max(0.0);
                }
                let total: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= total);
                PopulationEstimate::exact(p, *gamma, *omega_r, *b)
            }
        }
    }
}

/// Shot-sampled trace: each point is `Binomial(shots, clamp(P↓(t)))/shots`
/// drawn from a ChaCha stream seeded with `seed`.
pub fn synthesize_trace(
    truth: &Truth,
    times: &[f64],
    shots: u32,
    seed: u64,
    basis_tag: BasisTag,
    ld: &LambDickeParams,
) -> Result<RabiTrace> {
    if shots == 0 {
        return Err(Error::param("shots must be ≥ 1"));
    }
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::param("probe times must be finite and ≥ 0"));
    }
    let est = truth.estimate(basis_tag)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_down = times
        .iter()
        .map(|&t| {
            let p = rabi_signal_for(basis_tag, t, &est, ld).clamp(0.0, 1.0);
            let k = Binomial::new(shots as u64, p)
                .map_err(|e| Error::param(format!("binomial sampling: {e}")))?
                .sample(&mut rng);
            Ok(k as f64 / shots as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    RabiTrace::new(times.to_vec(), p_down, shots, basis_tag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockSpace;
    use crate::spectro::coherent_table;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn ld() -> LambDickeParams {
        LambDickeParams::new(0.05, 1.0).unwrap()
    }

    #[test]
    fn two_level_limit() {
        let est = PopulationEstimate::exact(vec![1.0], 0.0, TAU * 128.5e3, 0.0).unwrap();
        let w = TAU * 128.5e3 * engineered::sideband_coupling(0, &ld());
        assert_eq!(rabi_signal(0.0, &est, &ld()), 1.0);
        for t in [1e-5, 7e-5, 3e-4] {
            assert_relative_eq!(rabi_signal(t, &est, &ld()), 0.5 * (1.0 + (w * t).cos()), epsilon = 1e-14);
        }
        assert_relative_eq!(rabi_signal(TAU / w, &est, &ld()), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coherent_trace_collapses() {
        let mut p = coherent_table(40, 2.0);
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        let est = PopulationEstimate::exact(p, 370.0, TAU * 128.5e3, 0.0).unwrap();
        let period = TAU / (TAU * 128.5e3 * engineered::sideband_coupling(0, &ld()));
        let ts: Vec<f64> = (0..400).map(|k| 9.0 * period + k as f64 * period / 200.0).collect();
        let vals: Vec<f64> = ts.iter().map(|&t| rabi_signal(t, &est, &ld())).collect();
        let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
        let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!(hi - lo < 0.2, "contrast {}", hi - lo);
    }

    #[test]
    fn h_minus_target_is_dark() {
        let est = PopulationEstimate::exact(vec![1.0, 0.0, 0.0], 0.0, 1e6, 0.0).unwrap();
        for t in [0.0, 1e-4, 1e-3] {
            assert_eq!(rabi_signal_for(BasisTag::HMinus, t, &est, &ld()), 1.0);
        }
    }

    #[test]
    fn large_shot_mean_and_binomial_spread() {
        let est = PopulationEstimate::exact(vec![0.6, 0.4], 0.0, TAU * 128.5e3, 0.0).unwrap();
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 4e-6).collect();
        let truth = Truth::Populations(est.clone());
        let tr = synthesize_trace(&truth, &times, 10_000_000, 5, BasisTag::BlueSideband, &ld()).unwrap();
        for (t, y) in times.iter().zip(&tr.p_down) {
            assert!((y - rabi_signal(*t, &est, &ld())).abs() < 1e-3);
        }
        let again = synthesize_trace(&truth, &times, 10_000_000, 5, BasisTag::BlueSideband, &ld()).unwrap();
        assert_eq!(tr, again);

        // many draws at one fixed point
        let t0 = [2.5e-5; 4000];
        let tr = synthesize_trace(&truth, &t0, 300, 9, BasisTag::BlueSideband, &ld()).unwrap();
        let p = rabi_signal(2.5e-5, &est, &ld());
        let m = tr.p_down.iter().sum::<f64>() / 4000.0;
        let sd = (tr.p_down.iter().map(|y| (y - m).powi(2)).sum::<f64>() / 3999.0).sqrt();
        assert_relative_eq!(sd, (p * (1.0 - p) / 300.0).sqrt(), max_relative = 0.05);
    }

    #[test]
    fn engineered_target_gives_single_frequency() {
        let spec = EngineeredBasisSpec::squeezed(1.45, 0.0).unwrap();
        let space = FockSpace::motion(200).unwrap();
        let state = engineered::target_state(&spec, space).unwrap();
        let p = populations_for_probe(&state, BasisTag::HPlus, &spec).unwrap();
        assert!(p[0] > 1.0 - 1e-9);
        let truth = Truth::State {
            state,
            spec,
            gamma: 0.0,
            omega_r: TAU * 100e3,
            b: 0.0,
        };
        let times: Vec<f64> = (0..20).map(|k| k as f64 * 1e-5).collect();
        let tr = synthesize_trace(&truth, &times, 1_000_000_000, 1, BasisTag::HPlus, &ld()).unwrap();
        let w = TAU * 100e3 * engineered::sideband_coupling(0, &ld());
        for (t, y) in times.iter().zip(&tr.p_down) {
            assert!((y - 0.5 * (1.0 + (w * t).cos())).abs() < 1e-4);
        }
    }
}
