use super::lindblad::{evolve_with, Liouvillian};
use super::{observe, EvolutionResult, EvolveOptions, KeepStates, NoiseModel, Recoil, Tolerances};
use crate::engineered::{self, DriveCalibration, EngineeredBasisSpec, OperatorOrder};
use crate::error::{Error, Result};
use crate::fock::{FockSpace, Operator, QuantumState, StateRepr, Truncation};
use crate::linalg::{self, CMatrix, I};
#[cfg(test)]
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProtocolMode {
    /// `n_cycles` of H₋ for `pulse_duration` followed by an instantaneous repump.
    Pulsed { pulse_duration: f64, n_cycles: usize },
    /// H₋ and spin relaxation together for `total_time`, sampled `n_samples` times.
    Continuous { total_time: f64, n_samples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Thermal(f64),
    Explicit(QuantumState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub mode: ProtocolMode,
    pub calibration: DriveCalibration,
    pub noise: NoiseModel,
    pub initial: InitialState,
    pub tol: Tolerances,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        self.calibration.validate()?;
        self.noise.validate()?;
        match self.mode {
            ProtocolMode::Pulsed { pulse_duration, .. } => {
                if !(pulse_duration > 0.0) || !pulse_duration.is_finite() {
                    return Err(Error::param("pulsed protocol needs a positive pulse duration"));
                }
            }
            ProtocolMode::Continuous { total_time, n_samples } => {
                if !(total_time > 0.0) || !total_time.is_finite() || n_samples == 0 {
                    return Err(Error::param("continuous protocol needs a positive duration and ≥ 1 sample"));
                }
                if self.noise.gamma_spin <= 0.0 {
                    return Err(Error::param("continuous pumping needs gamma_spin > 0"));
                }
            }
        }
        if let InitialState::Thermal(nbar) = self.initial {
            if !(nbar >= 0.0) || !nbar.is_finite() {
                return Err(Error::param(format!("thermal n̄ must be ≥ 0, got {nbar}")));
            }
        }
        Ok(())
    }
}

/// Motion-only jump `√Γ_m K` obtained by eliminating the excited spin, with
/// `Γ_m = 2Ω²/Γ` and `Ω = |Ω_rsb|/cosh r`.
pub fn adiabatic_jump(
    calib: &DriveCalibration,
    spec: &EngineeredBasisSpec,
    gamma_spin: f64,
    motion: FockSpace,
) -> Result<(Operator, f64)> {
    if !(gamma_spin > 0.0) || !gamma_spin.is_finite() {
        return Err(Error::param("adiabatic elimination needs gamma_spin > 0"));
    }
    calib.validate()?;
    let omega = calib.omega_rsb.norm() / spec.r.cosh();
    if gamma_spin < 10.0 * omega {
        log::warn!("adiabatic elimination with Γ/Ω = {:.2} < 10", gamma_spin / omega);
    }
    let gamma_m = 2.0 * omega * omega / gamma_spin;
    let k = engineered::engineered_annihilator_with(spec, motion, Truncation::Override)?;
    Ok((k.scaled_re(gamma_m.sqrt()), gamma_m))
}

/// Instantaneous optical repump: `|↓⟩⟨↓| ⊗ (ρ_↓↓ + R ρ_↑↑ R†)` with `R`
/// the recoil kick or the identity. Spin coherences are discarded.
pub fn repump_map(rho: &QuantumState, recoil: Option<&Recoil>) -> Result<QuantumState> {
    let space = rho.space();
    space.require_spin("repump_map")?;
    let n = space.dim();
    let m = rho.density_matrix();
    let down = m.view((0, 0), (n, n)).into_owned();
    let up = m.view((n, n), (n, n)).into_owned();
    let moved = match recoil {
        Some(r) => {
            let k = r.operator(space.motional())?;
            k.matrix() * up * k.matrix().adjoint()
        }
        None => up,
    };
    let mut out = CMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(&(down + moved));
    Ok(QuantumState::density_unchecked(space, out))
}

fn push_obs(res: &mut EvolutionResult, state: &QuantumState, target: &crate::linalg::CVector, t: f64, keep: bool) -> Result<()> {
    let obs = observe(state, Some(target))?;
    res.times.push(t);
    res.spin_down_prob.push(obs.spin_down.unwrap_or(f64::NAN));
    res.target_fidelity.push(obs.fidelity.unwrap_or(f64::NAN));
    res.mean_n.push(obs.mean_n);
    if keep {
        res.states.push(state.clone());
        res.state_times.push(t);
    }
    Ok(())
}

/// Runs the pulsed or continuous pumping protocol towards the engineered
/// ground state of `spec`, recording the target fidelity every cycle or
/// sample. Only the final state is kept; zero pulsed cycles keep the
/// initial state.
pub fn run_protocol(config: &ProtocolConfig, spec: &EngineeredBasisSpec, space: FockSpace) -> Result<EvolutionResult> {
    config.validate()?;
    space.require_spin("run_protocol")?;
    let motion = space.motional();
    let target = engineered::target_ket_with(spec, motion, OperatorOrder::SqueezeDisplace, Truncation::Override)?;
    let mut state = match &config.initial {
        InitialState::Thermal(nbar) => QuantumState::thermal(space, *nbar)?,
        InitialState::Explicit(s) if s.space() == motion => s.with_spin_down()?,
        InitialState::Explicit(s) => {
            space.require_same(&s.space())?;
            s.clone()
        }
    };
    let h = engineered::build_pump_hamiltonian(&config.calibration, space)?;
    let mut res = EvolutionResult::default();
    match config.mode {
        ProtocolMode::Pulsed { pulse_duration, n_cycles } => {
            let motional: Vec<Operator> = config
                .noise
                .jumps(space)?
                .into_iter()
                .skip(usize::from(config.noise.gamma_spin > 0.0))
                .collect();
            push_obs(&mut res, &state, &target, 0.0, n_cycles == 0)?;
            let unitary = if motional.is_empty() {
                Some(linalg::expm(&(h.matrix() * (-I * pulse_duration))))
            } else {
                None
            };
            let liou = if motional.is_empty() { None } else { Some(Liouvillian::new(&h, &motional)?) };
            let eo = EvolveOptions {
                keep: KeepStates::Final,
                tol: config.tol,
                ..EvolveOptions::default()
            };
            for cycle in 1..=n_cycles {
                let evolved = match (&unitary, &liou) {
                    (Some(u), _) => {
                        let m = state.density_matrix();
                        QuantumState::density_unchecked(space, u * m * u.adjoint())
                    }
                    (None, Some(l)) => {
                        let r = evolve_with(l, &state, &[0.0, pulse_duration], &eo)?;
                        r.states.into_iter().next_back().expect("final state kept")
                    }
                    (None, None) => unreachable!(),
                };
                state = repump_map(&evolved, config.noise.recoil.as_ref())?;
                push_obs(&mut res, &state, &target, cycle as f64 * pulse_duration, cycle == n_cycles)?;
            }
        }
        ProtocolMode::Continuous { total_time, n_samples } => {
            let jumps = config.noise.jumps(space)?;
            let grid: Vec<f64> = (0..=n_samples).map(|k| total_time * k as f64 / n_samples as f64).collect();
            let eo = EvolveOptions {
                target: Some(target),
                keep: KeepStates::Final,
                tol: config.tol,
                ..EvolveOptions::default()
            };
            if let StateRepr::Ket(_) = state.repr() {
                state = state.to_density();
            }
            let liou = Liouvillian::new(&h, &jumps)?;
            res = evolve_with(&liou, &state, &grid, &eo)?;
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engineered::pump_calibration;
    use crate::fock::{self, Spin};
    use crate::linalg::CVector;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    #[test]
    fn adiabatic_rate_arithmetic() {
        let spec = EngineeredBasisSpec::fock();
        let calib = pump_calibration(&spec, TAU * 5e3, 0.0).unwrap();
        let m = FockSpace::motion(10).unwrap();
        let (jump, gm) = adiabatic_jump(&calib, &spec, TAU * 50e3, m).unwrap();
        assert_relative_eq!(gm, TAU * 1e3, epsilon = 1e-9);
        let a = fock::destroy(m).unwrap().scaled_re(gm.sqrt());
        assert!(jump.max_abs_diff(&a) < 1e-9);
        assert!(adiabatic_jump(&calib, &spec, 0.0, m).is_err());

        let spec = EngineeredBasisSpec::displaced(C64::new(1.5, 0.0)).unwrap();
        let calib = pump_calibration(&spec, TAU * 5e3, 0.0).unwrap();
        let (jump, gm) = adiabatic_jump(&calib, &spec, TAU * 50e3, FockSpace::motion(30).unwrap()).unwrap();
        let d = jump.matrix()[(3, 3)] / gm.sqrt();
        assert_relative_eq!(d.re, -1.5, epsilon = 1e-12);
    }

    #[test]
    fn repump_examples() {
        let s = FockSpace::spin_motion(30).unwrap();
        let th = QuantumState::thermal(s, 1.0).unwrap();
        let out = repump_map(&th, None).unwrap();
        assert!(linalg::max_abs_diff(&out.density_matrix(), &th.density_matrix()) < 1e-15);

        let mut v = CVector::zeros(60);
        v[s.index(Spin::Up, 5)] = C64::new(1.0, 0.0);
        let up5 = QuantumState::ket(s, v).unwrap();
        let out = repump_map(&up5, None).unwrap();
        assert_relative_eq!(out.density_matrix()[(5, 5)].re, 1.0);
        assert!(repump_map(&QuantumState::fock(s.motional(), 0).unwrap(), None).is_err());

        let mut v = CVector::zeros(60);
        v[s.index(Spin::Up, 0)] = C64::new(1.0, 0.0);
        let up0 = QuantumState::ket(s, v).unwrap();
        let recoil = Recoil { chi: 3.0, eta_393: 0.1 };
        let out = repump_map(&up0, Some(&recoil)).unwrap();
        let mot = out.motional();
        let coh = fock::coherent_amplitudes(C64::new(0.0, 0.3), 30);
        assert!(fock::motional_fidelity(&mot, &coh).unwrap() > 1.0 - 1e-10);
        let n: f64 = mot.fock_populations().iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        assert_relative_eq!(n, 0.09, epsilon = 1e-10);
    }

    #[test]
    fn pulsed_sideband_cooling_reaches_ground() {
        let spec = EngineeredBasisSpec::fock();
        let cfg = ProtocolConfig {
            mode: ProtocolMode::Pulsed {
                pulse_duration: 25e-6,
                n_cycles: 120,
            },
            calibration: pump_calibration(&spec, TAU * 2e3, 0.0).unwrap(),
            noise: NoiseModel::default(),
            initial: InitialState::Thermal(2.0),
            tol: Tolerances::default(),
        };
        let r = run_protocol(&cfg, &spec, FockSpace::spin_motion(40).unwrap()).unwrap();
        assert!(*r.target_fidelity.last().unwrap() >= 0.99);
        assert_eq!(r.times.len(), 121);
    }
}
