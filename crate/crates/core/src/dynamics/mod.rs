//! Open-system time evolution: master equation, quantum trajectories,
//! steady states and the pulsed/continuous pumping protocols.

mod lindblad;
mod mcwf;
pub mod ode;
mod protocol;
mod steady;

pub use lindblad::{evolve_master, Liouvillian};
pub use mcwf::mcwf_evolve;
pub use ode::Tolerances;
pub use protocol::{adiabatic_jump, repump_map, run_protocol, InitialState, ProtocolConfig, ProtocolMode};
pub use steady::{steady_state, steady_state_with, SteadyStateOptions};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fock::{self, FockSpace, Operator, QuantumState, StateRepr};
use crate::linalg::{CVector, C64};

/// Recoil kick during spin relaxation: the jump acquires
/// `exp(iχη₃₉₃(a + a†))` on the motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recoil {
    pub chi: f64,
    pub eta_393: f64,
}

impl Recoil {
    pub fn kick(&self) -> f64 {
        self.chi * self.eta_393
    }

    /// `exp(iκ(a + a†)) = D(iκ)` on the motional space.
    pub fn operator(&self, motion: FockSpace) -> Result<Operator> {
        fock::displacement_with(C64::new(0.0, self.kick()), motion, fock::Truncation::Override)
    }
}

/// Dissipation rates. `gamma_spin` is in rad/s, the motional rates in 1/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseModel {
    pub gamma_spin: f64,
    pub gamma_heat: f64,
    pub gamma_dephase: f64,
    pub recoil: Option<Recoil>,
}

impl NoiseModel {
    pub fn noiseless(gamma_spin: f64) -> Self {
        Self {
            gamma_spin,
            ..Self::default()
        }
    }

    /// Measured trap noise: 10 quanta/s heating and the dephasing that makes
    /// up a 32 ms motional coherence time together with heating.
    pub fn paper_motional(gamma_spin: f64) -> Self {
        let gamma_heat = 10.0;
        Self {
            gamma_spin,
            gamma_heat,
            gamma_dephase: 1.0 / 32e-3 - 2.0 * gamma_heat,
            recoil: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_spin", self.gamma_spin),
            ("gamma_heat", self.gamma_heat),
            ("gamma_dephase", self.gamma_dephase),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{name} must be finite and ≥ 0, got {v}")));
            }
        }
        if let Some(r) = self.recoil {
            if !(r.chi >= 0.0) || !r.eta_393.is_finite() {
                return Err(Error::param("recoil needs χ ≥ 0 and finite η₃₉₃"));
            }
        }
        Ok(())
    }

    pub fn has_motional_noise(&self) -> bool {
        self.gamma_heat > 0.0 || self.gamma_dephase > 0.0
    }

    /// Heating `√Γ a`, `√Γ a†` and dephasing `√(2Γ_d) a†a` on the motion.
    ///
    /// The factor 2 makes the `|0⟩,|1⟩` coherence decay at `Γ_d`, so that
    /// `Γ_d + 2Γ₀→₁` is the total motional coherence decay rate.
    pub fn motional_jumps(&self, motion: FockSpace) -> Result<Vec<Operator>> {
        self.validate()?;
        motion.require_motion("motional_jumps")?;
        let mut out = Vec::new();
        if self.gamma_heat > 0.0 {
            let a = fock::destroy(motion)?;
            let s = self.gamma_heat.sqrt();
            out.push(a.scaled_re(s));
            out.push(a.adjoint().scaled_re(s));
        }
        if self.gamma_dephase > 0.0 {
            out.push(fock::number(motion)?.scaled_re((2.0 * self.gamma_dephase).sqrt()));
        }
        Ok(out)
    }

    /// Spin relaxation `√Γ σ₋ ⊗ R` with `R` the recoil kick (or identity).
    pub fn spin_jump(&self, space: FockSpace) -> Result<Option<Operator>> {
        self.validate()?;
        space.require_spin("spin_jump")?;
        if self.gamma_spin == 0.0 {
            return Ok(None);
        }
        let m = space.motional();
        let kick = match self.recoil {
            Some(r) => r.operator(m)?,
            None => Operator::identity(m),
        };
        Ok(Some(fock::tensor_spin_motion(&fock::sigma_minus(), &kick)?.scaled_re(self.gamma_spin.sqrt())))
    }

    /// Every jump operator of the model on `space`; motional noise is lifted
    /// to the spinful space when needed.
    pub fn jumps(&self, space: FockSpace) -> Result<Vec<Operator>> {
        let mut out = Vec::new();
        if space.has_spin() {
            if let Some(j) = self.spin_jump(space)? {
                out.push(j);
            }
            for l in self.motional_jumps(space.motional())? {
                out.push(fock::tensor_spin_motion(&fock::spin_identity(), &l)?);
            }
        } else {
            out = self.motional_jumps(space)?;
        }
        Ok(out)
    }
}

/// Which states an evolution keeps besides the scalar observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KeepStates {
    None,
    #[default]
    Final,
    All,
    Every(usize),
}

impl KeepStates {
    fn wants(&self, idx: usize, len: usize) -> bool {
        match *self {
            KeepStates::None => false,
            KeepStates::Final => idx + 1 == len,
            KeepStates::All => true,
            KeepStates::Every(k) => idx % k.max(1) == 0 || idx + 1 == len,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvolveOptions {
    /// Motional ket against which `target_fidelity` is recorded.
    pub target: Option<CVector>,
    pub keep: KeepStates,
    pub tol: Tolerances,
    pub exec: Execution,
}

impl EvolveOptions {
    pub fn with_target(target: CVector) -> Self {
        Self {
            target: Some(target),
            ..Self::default()
        }
    }
}

/// Monte-Carlo standard errors of the recorded observables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StdErrors {
    pub spin_down_prob: Vec<f64>,
    pub target_fidelity: Vec<f64>,
    pub mean_n: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    /// Kept states and their times (see [`KeepStates`]).
    pub states: Vec<QuantumState>,
    pub state_times: Vec<f64>,
    /// Empty for motion-only spaces.
    pub spin_down_prob: Vec<f64>,
    /// Empty when no target was given.
    pub target_fidelity: Vec<f64>,
    pub mean_n: Vec<f64>,
    pub stderr: Option<StdErrors>,
}

impl EvolutionResult {
    pub fn final_state(&self) -> Option<&QuantumState> {
        self.states.last()
    }
}

/// Scalar observables of one state.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Observables {
    pub spin_down: Option<f64>,
    pub fidelity: Option<f64>,
    pub mean_n: f64,
}

pub(crate) fn observe(state: &QuantumState, target: Option<&CVector>) -> Result<Observables> {
    let space = state.space();
    let n = space.dim();
    let spin_down = if space.has_spin() { Some(state.spin_down_probability()?) } else { None };
    let fidelity = match target {
        Some(t) => Some(fock::motional_fidelity(state, t)?),
        None => None,
    };
    let weight = |i: usize| (i % n) as f64;
    let mean_n = match state.repr() {
        StateRepr::Ket(v) => v.iter().enumerate().map(|(i, z)| weight(i) * z.norm_sqr()).sum(),
        StateRepr::Density(m) => (0..m.nrows()).map(|i| weight(i) * m[(i, i)].re).sum(),
    };
    Ok(Observables {
        spin_down,
        fidelity,
        mean_n,
    })
}

pub(crate) fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::param("time grid is empty"));
    }
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("time grid must be finite and nondecreasing"));
    }
    Ok(())
}

pub(crate) fn check_operators(space: FockSpace, h: &Operator, jumps: &[Operator]) -> Result<()> {
    space.require_same(&h.space())?;
    for j in jumps {
        space.require_same(&j.space())?;
    }
    if !h.is_hermitian(1e-9 * crate::linalg::max_abs(h.matrix()).max(1.0)) {
        return Err(Error::param("Hamiltonian is not Hermitian"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_noise_rates() {
        let n = NoiseModel::paper_motional(0.0);
        assert_eq!(n.gamma_heat, 10.0);
        assert!((n.gamma_dephase - 11.25).abs() < 1e-12);
    }

    #[test]
    fn jump_counts() {
        let n = NoiseModel::paper_motional(1.0);
        assert_eq!(n.jumps(FockSpace::spin_motion(5).unwrap()).unwrap().len(), 4);
        assert_eq!(n.jumps(FockSpace::motion(5).unwrap()).unwrap().len(), 3);
        let bad = NoiseModel {
            gamma_heat: -1.0,
            ..NoiseModel::default()
        };
        assert!(bad.validate().is_err());
    }
}
