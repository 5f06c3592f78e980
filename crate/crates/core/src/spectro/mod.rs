//! Rabi-flop signal model, synthetic traces and the two-stage fit
//! (trace → populations → state parameters).

mod dist;
mod family;
mod fit;
mod signal;

pub use dist::{
    coherent_table, dist_coherent, dist_displaced_squeezed, dist_displaced_squeezed_table, dist_squeezed, squeezed_table,
    MIN_SQUEEZE,
};
pub use family::{fit_state_family, StateFamily, StateFamilyFit};
pub use fit::{fit_engineered_ground, fit_populations, BMode, FitOptions, MAX_N_MAX};
pub use signal::{populations_for_probe, rabi_signal, rabi_signal_for, synthesize_trace, Truth};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Which probe Hamiltonian produced a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisTag {
    BlueSideband,
    HPlus,
    HMinus,
}

impl BasisTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            BasisTag::BlueSideband => "blue_sideband",
            BasisTag::HPlus => "H_plus",
            BasisTag::HMinus => "H_minus",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "blue_sideband" | "blue-sideband" | "bsb" => Ok(BasisTag::BlueSideband),
            "H_plus" | "h_plus" | "H+" => Ok(BasisTag::HPlus),
            "H_minus" | "h_minus" | "H-" => Ok(BasisTag::HMinus),
            other => Err(Error::param(format!("unknown basis tag `{other}`"))),
        }
    }

    /// Probes on the engineered ladder rather than Fock states.
    pub fn is_engineered(&self) -> bool {
        !matches!(self, BasisTag::BlueSideband)
    }
}

impl std::fmt::Display for BasisTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Measured (or synthetic) spin-down probability versus probe time.
#[derive(Debug, Clone, PartialEq)]
pub struct RabiTrace {
    pub times: Vec<f64>,
    pub p_down: Vec<f64>,
    pub shots: u32,
    pub basis_tag: BasisTag,
}

impl RabiTrace {
    pub fn new(times: Vec<f64>, p_down: Vec<f64>, shots: u32, basis_tag: BasisTag) -> Result<Self> {
        let t = Self {
            times,
            p_down,
            shots,
            basis_tag,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.p_down.len() {
            return Err(Error::param("trace times and probabilities differ in length"));
        }
        if self.times.is_empty() {
            return Err(Error::param("trace is empty"));
        }
        if self.shots == 0 {
            return Err(Error::param("shots must be ≥ 1"));
        }
        if self.times.iter().chain(self.p_down.iter()).any(|v| !v.is_finite()) {
            return Err(Error::param("trace contains non-finite values"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Projection-noise standard error of each point. The binomial variance
    /// uses the add-half estimate so that points at exactly 0 or 1 keep a
    /// finite weight.
    pub fn stderr(&self) -> Vec<f64> {
        let n = self.shots as f64;
        self.p_down
            .iter()
            .map(|p| {
                let q = (p.clamp(0.0, 1.0) * n + 0.5) / (n + 1.0);
                (q * (1.0 - q) / n).sqrt()
            })
            .collect()
    }
}

/// Populations and flop parameters from [`fit_populations`].
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationEstimate {
    pub p: Vec<f64>,
    pub gamma: f64,
    pub omega_r: f64,
    pub b: f64,
    /// Covariance over `(p_0 … p_{n_max}, γ, Ω_R, b)`.
    pub covariance: DMatrix<f64>,
    pub n_max: usize,
    /// Weighted sum of squared residuals at the optimum.
    pub cost: f64,
}

impl PopulationEstimate {
    /// Noise-free estimate with zero covariance (for synthesis and tests).
    pub fn exact(p: Vec<f64>, gamma: f64, omega_r: f64, b: f64) -> Result<Self> {
        if p.is_empty() || p.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::param("populations must be nonnegative and nonempty"));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::param(format!("populations sum to {total}, expected 1")));
        }
        let n_max = p.len() - 1;
        let k = p.len() + 3;
        Ok(Self {
            p,
            gamma,
            omega_r,
            b,
            covariance: DMatrix::zeros(k, k),
            n_max,
            cost: 0.0,
        })
    }

    pub fn p_errors(&self) -> Vec<f64> {
        (0..=self.n_max).map(|i| self.covariance[(i, i)].max(0.0).sqrt()).collect()
    }

    pub fn param_errors(&self) -> (f64, f64, f64) {
        let k = self.n_max + 1;
        let e = |i: usize| self.covariance[(i, i)].max(0.0).sqrt();
        (e(k), e(k + 1), e(k + 2))
    }

    /// Covariance block of the populations.
    pub fn p_covariance(&self) -> DMatrix<f64> {
        let k = self.n_max + 1;
        self.covariance.view((0, 0), (k, k)).into_owned()
    }
}
