//! Engineered annihilator `K`, sideband drive calibrations and the pump,
//! probe and Lamb-Dicke-corrected Hamiltonians built from them.
//!
//! With `U = S(ξ) D(α)` the engineered ladder is `K = U a U†`, so the pump
//! drives population into `U|0⟩` and the probe couples `U|n⟩ ↔ U|n±1⟩`
//! exactly like ordinary sidebands couple Fock states.

use crate::error::{Error, Result};
use crate::fock::{self, FockSpace, Operator, QuantumState, Truncation};
use crate::linalg::{self, CMatrix, CVector, C64, ZERO};
use crate::special;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineeredBasisSpec {
    pub alpha: C64,
    pub r: f64,
    pub phi_s: f64,
}

impl EngineeredBasisSpec {
    pub fn new(alpha: C64, r: f64, phi_s: f64) -> Result<Self> {
        let s = Self { alpha, r, phi_s };
        s.validate()?;
        Ok(s)
    }

    pub fn squeezed(r: f64, phi_s: f64) -> Result<Self> {
        Self::new(ZERO, r, phi_s)
    }

    pub fn displaced(alpha: C64) -> Result<Self> {
        Self::new(alpha, 0.0, 0.0)
    }

    pub fn fock() -> Self {
        Self {
            alpha: ZERO,
            r: 0.0,
            phi_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(Error::param(format!("squeezing amplitude must be finite and ≥ 0, got {}", self.r)));
        }
        if !self.phi_s.is_finite() || !self.alpha.re.is_finite() || !self.alpha.im.is_finite() {
            return Err(Error::param("engineered basis parameters must be finite"));
        }
        Ok(())
    }

    pub fn is_fock(&self) -> bool {
        self.alpha == ZERO && self.r == 0.0
    }

    /// Truncation needed to represent `U|n⟩` for small n.
    pub fn truncation_bound(&self) -> usize {
        let a = self.alpha.norm();
        match (a == 0.0, self.r == 0.0) {
            (true, _) => fock::squeeze_bound(self.r),
            (false, true) => fock::displacement_bound(a),
            (false, false) => fock::squeeze_bound(self.r) + fock::displacement_bound(a * self.r.exp()),
        }
    }

    fn check_truncation(&self, space: FockSpace, policy: Truncation) -> Result<()> {
        let required = self.truncation_bound();
        if policy == Truncation::Enforce && space.dim() < required {
            return Err(Error::Truncation {
                what: "engineered basis".into(),
                required,
                actual: space.dim(),
            });
        }
        Ok(())
    }
}

/// Which product of unitaries generates the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OperatorOrder {
    /// `S(ξ) D(α)`: the basis in which `K` is the lowering operator.
    #[default]
    SqueezeDisplace,
    /// `D(α) S(ξ)`: the displaced-squeezed (Yuen) convention.
    DisplaceSqueeze,
}

/// Complex sideband drive amplitudes in rad/s; argument is the optical phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveCalibration {
    pub omega_c: C64,
    pub omega_rsb: C64,
    pub omega_bsb: C64,
}

impl DriveCalibration {
    pub fn new(omega_c: C64, omega_rsb: C64, omega_bsb: C64) -> Result<Self> {
        let c = Self {
            omega_c,
            omega_rsb,
            omega_bsb,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.omega_c, self.omega_rsb, self.omega_bsb];
        if all.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::param("drive amplitudes must be finite"));
        }
        if all.iter().all(|z| *z == ZERO) {
            return Err(Error::param("at least one drive amplitude must be nonzero"));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            omega_c: self.omega_c * s,
            omega_rsb: self.omega_rsb * s,
            omega_bsb: self.omega_bsb * s,
        }
    }

    /// Basis realised when these drives are used as a pump (`H₋`).
    pub fn implied_pump_spec(&self) -> Result<EngineeredBasisSpec> {
        implied_spec(self.omega_rsb, self.omega_bsb, self.omega_c, false)
    }

    /// Basis realised when these drives are used as a probe (`H₊`).
    pub fn implied_probe_spec(&self) -> Result<EngineeredBasisSpec> {
        implied_spec(self.omega_bsb, self.omega_rsb, self.omega_c, true)
    }

    /// Effective coupling Ω of the pump form `Ω(Kσ₊ + h.c.)`.
    pub fn pump_rate(&self) -> Result<C64> {
        let spec = self.implied_pump_spec()?;
        Ok(self.omega_rsb / spec.r.cosh())
    }

    pub fn probe_rate(&self) -> Result<C64> {
        let spec = self.implied_probe_spec()?;
        Ok(self.omega_bsb / spec.r.cosh())
    }
}

fn implied_spec(anchor: C64, partner: C64, carrier: C64, conjugate: bool) -> Result<EngineeredBasisSpec> {
    if anchor == ZERO {
        return Err(Error::param("anchor sideband amplitude is zero"));
    }
    let ratio = partner / anchor;
    let t = ratio.norm();
    if t >= 1.0 {
        return Err(Error::param(format!("sideband ratio {t} ≥ 1 has no finite squeezing")));
    }
    let r = t.atanh();
    let phi_s = if t == 0.0 {
        0.0
    } else if conjugate {
        -ratio.arg()
    } else {
        ratio.arg()
    };
    let a = -carrier * r.cosh() / anchor;
    let alpha = if conjugate { a.conj() } else { a };
    EngineeredBasisSpec::new(alpha, r, phi_s)
}

fn check_anchor(mag: f64, phase: f64) -> Result<()> {
    if !(mag > 0.0) || !mag.is_finite() || !phase.is_finite() {
        return Err(Error::param(format!("anchor magnitude must be finite and > 0, got {mag}")));
    }
    Ok(())
}

/// Drives for `H₋ = Ω(Kσ₊ + K†σ₋)` anchored at the red-sideband amplitude.
pub fn pump_calibration(spec: &EngineeredBasisSpec, omega_rsb_mag: f64, phi_rsb: f64) -> Result<DriveCalibration> {
    spec.validate()?;
    check_anchor(omega_rsb_mag, phi_rsb)?;
    let red = C64::from_polar(omega_rsb_mag, phi_rsb);
    let (c, s) = (spec.r.cosh(), spec.r.tanh());
    Ok(DriveCalibration {
        omega_c: -red * spec.alpha / c,
        omega_rsb: red,
        omega_bsb: red * C64::from_polar(s, spec.phi_s),
    })
}

/// Drives for `H₊ = Ω(K†σ₊ + Kσ₋)` anchored at the blue-sideband amplitude.
pub fn probe_calibration(spec: &EngineeredBasisSpec, omega_bsb_mag: f64, phi_bsb: f64) -> Result<DriveCalibration> {
    spec.validate()?;
    check_anchor(omega_bsb_mag, phi_bsb)?;
    let blue = C64::from_polar(omega_bsb_mag, phi_bsb);
    let (c, s) = (spec.r.cosh(), spec.r.tanh());
    Ok(DriveCalibration {
        omega_c: -blue * spec.alpha.conj() / c,
        omega_rsb: blue * C64::from_polar(s, -spec.phi_s),
        omega_bsb: blue,
    })
}

/// `K = cosh r·a + e^{iφ_s} sinh r·a† − α`.
pub fn engineered_annihilator(spec: &EngineeredBasisSpec, space: FockSpace) -> Result<Operator> {
    engineered_annihilator_with(spec, space, Truncation::Enforce)
}

pub fn engineered_annihilator_with(spec: &EngineeredBasisSpec, space: FockSpace, policy: Truncation) -> Result<Operator> {
    space.require_motion("engineered_annihilator")?;
    spec.validate()?;
    spec.check_truncation(space, policy)?;
    let a = fock::destroy(space)?;
    let k = &(&a.scaled_re(spec.r.cosh()) + &a.adjoint().scaled(C64::from_polar(spec.r.sinh(), spec.phi_s)))
        - &Operator::identity(space).scaled(spec.alpha);
    Ok(k)
}

/// Unitary whose columns are the engineered basis kets `U|n⟩`.
pub fn engineered_unitary(spec: &EngineeredBasisSpec, space: FockSpace, order: OperatorOrder, policy: Truncation) -> Result<Operator> {
    space.require_motion("engineered_unitary")?;
    spec.validate()?;
    spec.check_truncation(space, policy)?;
    let s = fock::squeeze_with(spec.r, spec.phi_s, space, Truncation::Override)?;
    let d = fock::displacement_with(spec.alpha, space, Truncation::Override)?;
    Ok(match order {
        OperatorOrder::SqueezeDisplace => &s * &d,
        OperatorOrder::DisplaceSqueeze => &d * &s,
    })
}

/// Target ket `S(ξ)D(α)|0⟩`, the dark state of `K`.
pub fn target_ket(spec: &EngineeredBasisSpec, space: FockSpace) -> Result<CVector> {
    target_ket_with(spec, space, OperatorOrder::SqueezeDisplace, Truncation::Enforce)
}

pub fn target_ket_with(spec: &EngineeredBasisSpec, space: FockSpace, order: OperatorOrder, policy: Truncation) -> Result<CVector> {
    space.require_motion("target_ket")?;
    spec.validate()?;
    spec.check_truncation(space, policy)?;
    let n = space.dim();
    if spec.alpha == ZERO {
        return Ok(fock::squeezed_vacuum_amplitudes(spec.r, spec.phi_s, n));
    }
    if spec.r == 0.0 {
        return Ok(fock::coherent_amplitudes(spec.alpha, n));
    }
    let s = fock::squeeze_with(spec.r, spec.phi_s, space, Truncation::Override)?;
    let v = match order {
        OperatorOrder::SqueezeDisplace => s.apply(&fock::coherent_amplitudes(spec.alpha, n)),
        OperatorOrder::DisplaceSqueeze => {
            let d = fock::displacement_with(spec.alpha, space, Truncation::Override)?;
            d.apply(&fock::squeezed_vacuum_amplitudes(spec.r, spec.phi_s, n))
        }
    };
    let norm = v.norm();
    Ok(v / C64::new(norm, 0.0))
}

pub fn target_state(spec: &EngineeredBasisSpec, space: FockSpace) -> Result<QuantumState> {
    QuantumState::ket_normalized(space, target_ket(spec, space)?)
}

fn hamiltonian_from_drives(calib: &DriveCalibration, space: FockSpace) -> Result<Operator> {
    space.require_spin("sideband Hamiltonian")?;
    calib.validate()?;
    let m = space.motional();
    let a = fock::destroy(m)?;
    let motion = &(&Operator::identity(m).scaled(calib.omega_c) + &a.scaled(calib.omega_rsb))
        + &a.adjoint().scaled(calib.omega_bsb);
    let up = fock::tensor_spin_motion(&fock::sigma_plus(), &motion)?;
    Ok(&up + &up.adjoint())
}

/// `Ω_c σ₊ + Ω_rsb σ₊a + Ω_bsb σ₊a† + h.c.` (rad/s, ħ = 1).
pub fn build_pump_hamiltonian(calib: &DriveCalibration, space: FockSpace) -> Result<Operator> {
    hamiltonian_from_drives(calib, space)
}

/// Same drive structure as the pump; the probe calibration places the
/// cosh-weighted leg on the blue sideband so the motional factor is `K†`.
pub fn build_probe_hamiltonian(calib: &DriveCalibration, space: FockSpace) -> Result<Operator> {
    hamiltonian_from_drives(calib, space)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambDickeParams {
    pub eta: f64,
    pub omega_00: f64,
}

impl LambDickeParams {
    pub fn new(eta: f64, omega_00: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eta) || !omega_00.is_finite() {
            return Err(Error::param(format!("need 0 ≤ η < 1 and finite Ω₀₀, got η={eta}, Ω₀₀={omega_00}")));
        }
        Ok(Self { eta, omega_00 })
    }
}

/// `f(n, η) = e^{−η²/2} η L_n^1(η²)/√(n+1)`, the relative `n ↔ n+1`
/// sideband Rabi frequency.
pub fn sideband_coupling(n: usize, ld: &LambDickeParams) -> f64 {
    let x = ld.eta * ld.eta;
    (-0.5 * x).exp() * ld.eta * special::laguerre(n, 1.0, x) / ((n + 1) as f64).sqrt()
}

/// `f(n, η)` for all `n < len`.
pub fn sideband_couplings(len: usize, ld: &LambDickeParams) -> Vec<f64> {
    let x = ld.eta * ld.eta;
    let pre = (-0.5 * x).exp() * ld.eta;
    special::laguerre_table(len, 1.0, x)
        .into_iter()
        .enumerate()
        .map(|(n, l)| pre * l / ((n + 1) as f64).sqrt())
        .collect()
}

/// Carrier Rabi frequency of level n relative to Ω₀₀: `e^{−η²/2} L_n(η²)`.
pub fn carrier_coupling(n: usize, ld: &LambDickeParams) -> f64 {
    let x = ld.eta * ld.eta;
    (-0.5 * x).exp() * special::laguerre(n, 0.0, x)
}

/// Smallest n at which `L_n^1(η²)` has the opposite sign to `L_{n−1}^1(η²)`,
/// scanning up to `n_max`.
pub fn first_coupling_zero(ld: &LambDickeParams, n_max: usize) -> Option<usize> {
    let x = ld.eta * ld.eta;
    let mut prev = 1.0_f64;
    let mut cur = 2.0 - x;
    if cur.signum() != prev.signum() {
        return Some(1);
    }
    for k in 1..n_max {
        let kf = k as f64;
        let next = ((2.0 * kf + 2.0 - x) * cur - (kf + 1.0) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        if cur == 0.0 || cur.signum() != prev.signum() {
            return Some(k + 1);
        }
    }
    None
}

/// Lab-frame lowering operator `K_lab` with Lamb-Dicke corrected couplings:
/// `⟨n|K|n+1⟩ = cosh r·g(n)`, `⟨n+1|K|n⟩ = e^{iφ_s} sinh r·g(n)` with
/// `g(n) = Ω₀₀ f(n, η)`, plus the carrier leg `−α η Ω₀₀ e^{−η²/2} L_n(η²)`.
///
/// The lab-achievable dark state is its smallest right-singular vector; in
/// the limit η → 0 this is `Ω₀₀ η K`.
pub fn build_lab_hamiltonian(spec: &EngineeredBasisSpec, ld: &LambDickeParams, space: FockSpace) -> Result<Operator> {
    space.require_motion("build_lab_hamiltonian")?;
    spec.validate()?;
    let n = space.dim();
    let g = sideband_couplings(n, ld);
    let (c, s) = (spec.r.cosh(), C64::from_polar(spec.r.sinh(), spec.phi_s));
    let mut m = CMatrix::zeros(n, n);
    for k in 0..n - 1 {
        let gk = ld.omega_00 * g[k];
        m[(k, k + 1)] = C64::new(c * gk, 0.0);
        m[(k + 1, k)] = s * gk;
    }
    if spec.alpha != ZERO {
        let x = ld.eta * ld.eta;
        let pre = -spec.alpha * ld.eta * ld.omega_00 * (-0.5 * x).exp();
        for (k, l) in special::laguerre_table(n, 0.0, x).into_iter().enumerate() {
            m[(k, k)] = pre * l;
        }
    }
    Operator::new(space, m)
}

/// Smallest singular value and right-singular vector of `K_lab`.
///
/// For α = 0, `K_lab† K_lab` splits into even and odd tridiagonal blocks,
/// which are made real by a diagonal phase transform and solved by Sturm
/// bisection, so N of several thousand is cheap. Otherwise a dense
/// eigen-decomposition is used.
pub fn lab_dark_state(spec: &EngineeredBasisSpec, ld: &LambDickeParams, dim: usize) -> Result<(f64, CVector)> {
    spec.validate()?;
    let space = FockSpace::motion(dim)?;
    if spec.alpha != ZERO {
        let k = build_lab_hamiltonian(spec, ld, space)?;
        let kk = k.matrix().adjoint() * k.matrix();
        let (vals, vecs) = linalg::eigh(&kk);
        return Ok((vals[0].max(0.0).sqrt(), vecs.column(0).into_owned()));
    }
    let g: Vec<f64> = sideband_couplings(dim, ld).into_iter().map(|f| f * ld.omega_00).collect();
    let (c, s) = (spec.r.cosh(), spec.r.sinh());
    let mut best: Option<(f64, CVector)> = None;
    for parity in 0..2 {
        let idx: Vec<usize> = (parity..dim).step_by(2).collect();
        let diag: Vec<f64> = idx
            .iter()
            .map(|&j| {
                let below = if j >= 1 { c * c * g[j - 1] * g[j - 1] } else { 0.0 };
                let above = if j + 1 < dim { s * s * g[j] * g[j] } else { 0.0 };
                below + above
            })
            .collect();
        let off: Vec<f64> = idx.windows(2).map(|w| c * s * g[w[0]] * g[w[0] + 1]).collect();
        let (lambda, w) = linalg::tridiagonal_smallest(&diag, &off);
        let mut v = CVector::zeros(dim);
        for (k, &j) in idx.iter().enumerate() {
            v[j] = C64::from_polar(w[k], k as f64 * spec.phi_s);
        }
        if best.as_ref().is_none_or(|(l, _)| lambda < *l) {
            best = Some((lambda, v));
        }
    }
    let (lambda, mut v) = best.expect("two parity sectors");
    // Fix the global phase so ⟨0|v⟩ or the first nonzero entry is real positive.
    if let Some(p) = v.iter().find(|z| z.norm() > 1e-300).map(|z| z.conj() / z.norm()) {
        v *= p;
    }
    Ok((lambda.max(0.0).sqrt(), v))
}

/// Pump Hamiltonian `K_lab σ₊ + h.c.` on a spinful space.
pub fn build_lab_pump_hamiltonian(spec: &EngineeredBasisSpec, ld: &LambDickeParams, space: FockSpace) -> Result<Operator> {
    space.require_spin("build_lab_pump_hamiltonian")?;
    let k = build_lab_hamiltonian(spec, ld, space.motional())?;
    let up = fock::tensor_spin_motion(&fock::sigma_plus(), &k)?;
    Ok(&up + &up.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{PI, TAU};

    fn motion(n: usize) -> FockSpace {
        FockSpace::motion(n).unwrap()
    }

    #[test]
    fn annihilator_reduces_to_a() {
        let s = motion(30);
        let k = engineered_annihilator(&EngineeredBasisSpec::fock(), s).unwrap();
        assert_eq!(k, fock::destroy(s).unwrap());
    }

    #[test]
    fn annihilator_kills_target_states() {
        let spec = EngineeredBasisSpec::displaced(C64::new(2.0, 0.0)).unwrap();
        let s = motion(60);
        let k = engineered_annihilator(&spec, s).unwrap();
        let d = fock::displacement(spec.alpha, s).unwrap();
        let v = k.apply(&d.matrix().column(0).into_owned());
        assert!(v.norm() < 1e-7);

        let spec = EngineeredBasisSpec::squeezed(1.45, 0.0).unwrap();
        let s = motion(200);
        let k = engineered_annihilator(&spec, s).unwrap();
        let sq = fock::squeeze(1.45, 0.0, s).unwrap();
        let v = k.apply(&sq.matrix().column(0).into_owned());
        // Full residual is dominated by the truncation edge (scipy oracle: 3.2528e-4).
        assert_relative_eq!(v.norm(), 3.2527769654911457e-4, max_relative = 1e-6);
        assert!(v.rows(0, 150).norm() < 1e-5);
        let closed = fock::squeezed_vacuum_amplitudes(1.45, 0.0, 200);
        assert!(k.apply(&closed).rows(0, 199).norm() < 1e-12);
    }

    #[test]
    fn target_ket_is_dark_for_displaced_squeezed_spec() {
        let spec = EngineeredBasisSpec::new(C64::from_polar(1.2, 0.4), 0.6, 0.9).unwrap();
        let s = motion(spec.truncation_bound());
        let k = engineered_annihilator(&spec, s).unwrap();
        let t = target_ket(&spec, s).unwrap();
        // the boundary row of the truncated K sees the small tail only
        assert!(k.apply(&t).rows(0, s.dim() - 1).norm() < 1e-6);
        let u = engineered_unitary(&spec, s, OperatorOrder::SqueezeDisplace, Truncation::Enforce).unwrap();
        let col = u.matrix().column(0).into_owned();
        assert!((col.dotc(&t).norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn pump_calibration_examples() {
        let tau20 = TAU * 20e3;
        let c = pump_calibration(&EngineeredBasisSpec::displaced(C64::new(2.0, 0.0)).unwrap(), tau20, 0.0).unwrap();
        assert_relative_eq!(c.omega_c.norm(), TAU * 40e3, epsilon = 1e-9);
        assert_relative_eq!((c.omega_c.arg() - c.omega_rsb.arg()).abs(), PI, epsilon = 1e-12);
        let c = pump_calibration(&EngineeredBasisSpec::squeezed(1.45, 0.0).unwrap(), tau20, 0.0).unwrap();
        assert_relative_eq!((c.omega_bsb / c.omega_rsb).norm(), 0.8956928738431645, epsilon = 1e-12);
        assert_eq!(c.omega_c, ZERO);
        let c = pump_calibration(&EngineeredBasisSpec::fock(), tau20, 0.3).unwrap();
        assert_eq!(c.omega_c, ZERO);
        assert_eq!(c.omega_bsb, ZERO);
        assert!(pump_calibration(&EngineeredBasisSpec::fock(), -1.0, 0.0).is_err());
    }

    #[test]
    fn probe_calibration_examples() {
        let m = TAU * 10e3;
        let c = probe_calibration(&EngineeredBasisSpec::squeezed(1.45, 0.0).unwrap(), m, 0.0).unwrap();
        assert_relative_eq!((c.omega_rsb / c.omega_bsb).norm(), 1.45f64.tanh(), epsilon = 1e-12);
        assert_eq!(c.omega_c, ZERO);
        let alpha = C64::from_polar(2.0, 0.7);
        let c = probe_calibration(&EngineeredBasisSpec::displaced(alpha).unwrap(), m, 0.2).unwrap();
        assert_relative_eq!((c.omega_c / c.omega_bsb).norm(), 2.0, epsilon = 1e-12);
        let rel = C64::from_polar(1.0, c.omega_c.arg() - c.omega_bsb.arg() + PI);
        assert!((rel - C64::from_polar(1.0, -alpha.arg())).norm() < 1e-12);
        let c = probe_calibration(&EngineeredBasisSpec::fock(), m, 0.0).unwrap();
        assert_eq!((c.omega_c, c.omega_rsb), (ZERO, ZERO));
    }

    #[test]
    fn pump_hamiltonian_matches_k_form() {
        let spec = EngineeredBasisSpec::squeezed(0.8, 0.5).unwrap();
        let m = TAU * 20e3;
        let calib = pump_calibration(&spec, m, 0.0).unwrap();
        let sp = FockSpace::spin_motion(30).unwrap();
        let h = build_pump_hamiltonian(&calib, sp).unwrap();
        let k = engineered_annihilator_with(&spec, sp.motional(), Truncation::Override).unwrap();
        let up = fock::tensor_spin_motion(&fock::sigma_plus(), &k.scaled_re(m / spec.r.cosh())).unwrap();
        let expected = &up + &up.adjoint();
        assert!(h.max_abs_diff(&expected) < 1e-12 * m);
        let zero = DriveCalibration {
            omega_c: ZERO,
            omega_rsb: ZERO,
            omega_bsb: ZERO,
        };
        assert!(build_pump_hamiltonian(&zero, sp).is_err());
        assert!(build_pump_hamiltonian(&calib, sp.motional()).is_err());
    }

    #[test]
    fn sideband_coupling_examples() {
        let ld = LambDickeParams::new(0.05, 1.0).unwrap();
        assert_relative_eq!(sideband_coupling(0, &ld), 0.05 * (-0.00125f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(sideband_coupling(0, &ld), 0.0499375, epsilon = 1e-7);
        let tiny = LambDickeParams::new(0.001, 1.0).unwrap();
        assert_relative_eq!(sideband_coupling(3, &tiny) / 0.001, 2.0, epsilon = 1e-5);
        let table = sideband_couplings(50, &ld);
        assert_relative_eq!(table[37], sideband_coupling(37, &ld), epsilon = 1e-15);
    }

    #[test]
    fn first_zero_of_coupling_at_eta_005() {
        // Independent sign scan of scipy.special.eval_genlaguerre(n, 1, 0.0025).
        let ld = LambDickeParams::new(0.05, 1.0).unwrap();
        assert_eq!(first_coupling_zero(&ld, 10_000), Some(FIRST_ZERO_ETA_005));
        assert!(sideband_coupling(FIRST_ZERO_ETA_005 - 1, &ld) > 0.0);
        assert!(sideband_coupling(FIRST_ZERO_ETA_005, &ld) < 0.0);
    }

    const FIRST_ZERO_ETA_005: usize = 1468;

    #[test]
    fn lab_dark_state_limits() {
        let ld = LambDickeParams::new(0.05, 1.0).unwrap();
        let (sv, v) = lab_dark_state(&EngineeredBasisSpec::fock(), &ld, 100).unwrap();
        assert!(sv < 1e-12);
        assert_relative_eq!(v[0].norm(), 1.0, epsilon = 1e-12);

        let tiny = LambDickeParams::new(1e-6, 1.0).unwrap();
        let spec = EngineeredBasisSpec::squeezed(1.0, 0.0).unwrap();
        let (_, v) = lab_dark_state(&spec, &tiny, 150).unwrap();
        let t = fock::squeezed_vacuum_amplitudes(1.0, 0.0, 150);
        assert!(1.0 - t.dotc(&v).norm_sqr() < 1e-6);
    }

    #[test]
    fn banded_dark_state_matches_dense_svd() {
        let ld = LambDickeParams::new(0.05, 1.0).unwrap();
        let spec = EngineeredBasisSpec::squeezed(1.3, 0.8).unwrap();
        let (sv, v) = lab_dark_state(&spec, &ld, 120).unwrap();
        let k = build_lab_hamiltonian(&spec, &ld, motion(120)).unwrap();
        let svd = k.matrix().clone().svd(false, true);
        let (imin, smin) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, s)| if *s < acc.1 { (i, *s) } else { acc });
        assert_relative_eq!(sv, smin, epsilon = 1e-9);
        let vt = svd.v_t.unwrap();
        let w = vt.row(imin).adjoint();
        assert!((w.dotc(&v).norm() - 1.0).abs() < 1e-8);
    }
}
