//! Property checks shared by the property suite and the acceptance run.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use reseng::dynamics::{evolve_master, mcwf_evolve, EvolveOptions, KeepStates, NoiseModel};
use reseng::engineered::{
    self, build_lab_pump_hamiltonian, build_probe_hamiltonian, build_pump_hamiltonian, engineered_annihilator_with,
    engineered_unitary, sideband_coupling, EngineeredBasisSpec, LambDickeParams, OperatorOrder,
};
use reseng::exec::Execution;
use reseng::fock::{self, FockSpace, Operator, QuantumState, Truncation};
use reseng::linalg::{max_abs_diff, CMatrix, C64};
use reseng::spectro::{
    coherent_table, dist_displaced_squeezed_table, fit_populations, fit_state_family, rabi_signal, squeezed_table,
    BasisTag, FitOptions, PopulationEstimate, RabiTrace, StateFamily,
};

pub type Check = Result<(), TestCaseError>;

const TAU: f64 = std::f64::consts::TAU;

fn ld() -> LambDickeParams {
    LambDickeParams::new(0.05, 1.0).unwrap()
}

/// Runs `check` over `cases` draws from a fixed-seed generator.
pub fn run_fixed<S, F>(cases: u32, strategy: S, check: F) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
    F: Fn(S::Value) -> Check,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, check).map_err(|e| e.to_string())
}

pub fn spec(max_alpha: f64, max_r: f64) -> impl Strategy<Value = EngineeredBasisSpec> {
    (0.0..max_alpha, 0.0..TAU, 0.0..max_r, 0.0..TAU)
        .prop_map(|(a, th, r, phi)| EngineeredBasisSpec::new(C64::from_polar(a, th), r, phi).unwrap())
}

pub fn unitarity_args() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.0f64..2.5, 0.0..TAU, 0.0f64..1.2, 0.0..TAU)
}

pub fn unitarity((a, th, r, phi): (f64, f64, f64, f64)) -> Check {
    let space = FockSpace::motion(60).unwrap();
    let d = fock::displacement_with(C64::from_polar(a, th), space, Truncation::Override).unwrap();
    let s = fock::squeeze_with(r, phi, space, Truncation::Override).unwrap();
    prop_assert!(d.unitarity_error() < 1e-10);
    prop_assert!(s.unitarity_error() < 1e-10);
    let spec = EngineeredBasisSpec::new(C64::from_polar(a, th), r, phi).unwrap();
    let u = engineered_unitary(&spec, space, OperatorOrder::SqueezeDisplace, Truncation::Override).unwrap();
    prop_assert!(u.unitarity_error() < 1e-10);
    Ok(())
}

fn block_identity_error(m: &CMatrix, k: usize) -> f64 {
    let mut e = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let want = if i == j { 1.0 } else { 0.0 };
            e = e.max((m[(i, j)] - want).norm());
        }
    }
    e
}

/// `K` and `K†` step along the basis `U|m⟩`, `[K, K†] = 1` away from the
/// truncation edge, and the target is dark.
pub fn ladder(spec: EngineeredBasisSpec) -> Check {
    let n = 220;
    let space = FockSpace::motion(n).unwrap();
    let k = engineered_annihilator_with(&spec, space, Truncation::Override).unwrap();
    let u = engineered_unitary(&spec, space, OperatorOrder::SqueezeDisplace, Truncation::Override).unwrap();
    let col = |m: usize| u.matrix().column(m).into_owned();
    let sc = |x: f64| C64::new(x, 0.0);
    for m in 0..4 {
        let want = if m == 0 { col(0) * sc(0.0) } else { col(m - 1) * sc((m as f64).sqrt()) };
        let err = (k.apply(&col(m)) - want).norm();
        prop_assert!(err < 1e-6, "lowering at m = {}: {:e}", m, err);
        let err = (k.adjoint().apply(&col(m)) - col(m + 1) * sc(((m + 1) as f64).sqrt())).norm();
        prop_assert!(err < 1e-6, "raising at m = {}: {:e}", m, err);
    }
    let c = k.commutator(&k.adjoint()).unwrap();
    prop_assert!(block_identity_error(c.matrix(), n - 1) < 1e-10);
    let psi = engineered::target_ket_with(&spec, space, OperatorOrder::SqueezeDisplace, Truncation::Override).unwrap();
    prop_assert!(k.apply(&psi).norm() < 1e-6);
    Ok(())
}

pub fn round_trip_args() -> impl Strategy<Value = (EngineeredBasisSpec, usize)> {
    (spec(1.5, 0.8), 0usize..4)
}

pub fn round_trip((spec, m): (EngineeredBasisSpec, usize)) -> Check {
    let space = FockSpace::motion(90).unwrap();
    let u = engineered_unitary(&spec, space, OperatorOrder::SqueezeDisplace, Truncation::Override).unwrap();
    let ket = QuantumState::fock(space, m).unwrap();
    let rotated = QuantumState::ket(space, u.apply(ket.as_ket().unwrap())).unwrap();
    let p = rotated.populations_in_basis(u.matrix()).unwrap();
    prop_assert!((p[m] - 1.0).abs() < 1e-10);
    Ok(())
}

pub fn hermitian_args() -> impl Strategy<Value = (EngineeredBasisSpec, f64, f64)> {
    (spec(1.5, 1.2), 1e3f64..1e5, 0.0..TAU)
}

pub fn hamiltonians_hermitian((spec, mag, ph): (EngineeredBasisSpec, f64, f64)) -> Check {
    let space = FockSpace::spin_motion(40).unwrap();
    let pump = engineered::pump_calibration(&spec, mag, ph).unwrap();
    let probe = engineered::probe_calibration(&spec, mag, ph).unwrap();
    let scale = 10.0 * mag * (1.0 + spec.r.cosh() + spec.alpha.norm());
    prop_assert!(build_pump_hamiltonian(&pump, space).unwrap().is_hermitian(1e-12 * scale));
    prop_assert!(build_probe_hamiltonian(&probe, space).unwrap().is_hermitian(1e-12 * scale));
    prop_assert!(build_lab_pump_hamiltonian(&spec, &ld(), space).unwrap().is_hermitian(1e-12));
    Ok(())
}

pub fn coupling_positive(eta: f64) -> Check {
    let ld = LambDickeParams::new(eta, 1.0).unwrap();
    let mut n = 0;
    while (n as f64) < 0.5 / (eta * eta) {
        prop_assert!(sideband_coupling(n, &ld) > 0.0, "n = {}", n);
        n += 1;
    }
    Ok(())
}

pub fn distribution_args() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0f64..3.0, 0.05f64..1.2, 0.0..TAU)
}

pub fn distributions((a, r, th): (f64, f64, f64)) -> Check {
    let len = 400;
    let c = coherent_table(len, a);
    prop_assert!(c.iter().all(|p| *p >= 0.0));
    prop_assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    let s = squeezed_table(len, r);
    prop_assert!(s.iter().all(|p| *p >= 0.0));
    prop_assert!(s.iter().skip(1).step_by(2).all(|p| *p == 0.0));
    prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    let ds = dist_displaced_squeezed_table(len, r, a, th).unwrap();
    prop_assert!(ds.iter().all(|p| *p >= 0.0));
    prop_assert!((ds.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    Ok(())
}

pub fn dynamics_args() -> impl Strategy<Value = (Vec<f64>, f64, f64, f64)> {
    (prop::collection::vec(-1.0f64..1.0, 40), 0.0f64..0.5, 0.0f64..0.5, 0.0f64..2.0)
}

fn random_hermitian(n: usize, vals: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    let mut it = vals.iter().cycle();
    for i in 0..n {
        for j in i..n {
            let re = *it.next().unwrap();
            let im = if i == j { 0.0 } else { *it.next().unwrap() };
            m[(i, j)] = C64::new(re, im);
            m[(j, i)] = C64::new(re, -im);
        }
    }
    m
}

/// Trace, Hermiticity and positivity of every state along a random
/// spin-motion evolution.
pub fn trace_and_positivity((vals, g_heat, g_deph, g_spin): (Vec<f64>, f64, f64, f64)) -> Check {
    let space = FockSpace::spin_motion(5).unwrap();
    let h = Operator::new(space, random_hermitian(10, &vals)).unwrap();
    let noise = NoiseModel {
        gamma_spin: g_spin,
        gamma_heat: g_heat,
        gamma_dephase: g_deph,
        recoil: None,
    };
    let jumps = noise.jumps(space).unwrap();
    let rho0 = QuantumState::thermal(FockSpace::motion(5).unwrap(), 0.4).unwrap().with_spin_down().unwrap();
    let grid: Vec<f64> = (0..9).map(|k| 0.5 * k as f64).collect();
    let opts = EvolveOptions {
        keep: KeepStates::All,
        ..EvolveOptions::default()
    };
    let res = evolve_master(&rho0, &h, &jumps, &grid, &opts).unwrap();
    for s in &res.states {
        prop_assert!((s.trace() - 1.0).abs() < 1e-8);
        prop_assert!(s.min_eigenvalue() > -1e-8);
        let m = s.density_matrix();
        prop_assert!(max_abs_diff(&m, &m.adjoint()) < 1e-12);
    }
    Ok(())
}

pub fn trajectory_args() -> impl Strategy<Value = (f64, f64, u64)> {
    (0.05f64..0.4, 0.2f64..1.0, 0u64..1000)
}

/// Trajectory averages agree with the master equation within 4.5 standard
/// errors and do not depend on the execution mode.
pub fn trajectories_match((g_heat, drive, seed): (f64, f64, u64)) -> Check {
    let motion = FockSpace::motion(8).unwrap();
    let a = fock::destroy(motion).unwrap();
    let h = (&a + &a.adjoint()).scaled_re(drive);
    let jumps = vec![a.scaled_re(g_heat.sqrt()), a.adjoint().scaled_re(g_heat.sqrt())];
    let psi0 = QuantumState::fock(motion, 1).unwrap();
    let grid: Vec<f64> = (0..6).map(|k| 0.4 * k as f64).collect();
    let opts = EvolveOptions {
        keep: KeepStates::None,
        ..EvolveOptions::default()
    };
    let me = evolve_master(&psi0.to_density(), &h, &jumps, &grid, &opts).unwrap();
    let mc = mcwf_evolve(&psi0, &h, &jumps, &grid, 600, seed, &opts).unwrap();
    let se = mc.stderr.as_ref().unwrap();
    for i in 0..grid.len() {
        let d = (me.mean_n[i] - mc.mean_n[i]).abs();
        prop_assert!(d < 4.5 * se.mean_n[i] + 1e-6, "t = {}: {} vs {} ± {}", grid[i], me.mean_n[i], mc.mean_n[i], se.mean_n[i]);
    }
    let seq = EvolveOptions {
        exec: Execution::Sequential,
        ..opts
    };
    let mc2 = mcwf_evolve(&psi0, &h, &jumps, &grid, 600, seed, &seq).unwrap();
    prop_assert_eq!(&mc.mean_n, &mc2.mean_n);
    Ok(())
}

fn noiseless_trace(p: Vec<f64>) -> (PopulationEstimate, RabiTrace) {
    let s: f64 = p.iter().sum();
    let p = p.into_iter().map(|v| v / s).collect();
    let truth = PopulationEstimate::exact(p, 370.0, TAU * 128.5e3, 0.0).unwrap();
    let times: Vec<f64> = (0..120).map(|k| 1e-3 * k as f64 / 119.0).collect();
    let y = times.iter().map(|&t| rabi_signal(t, &truth, &ld())).collect();
    let trace = RabiTrace::new(times, y, 300, BasisTag::BlueSideband).unwrap();
    (truth, trace)
}

/// A noiseless coherent trace is fitted exactly, identically in both
/// execution modes.
pub fn noiseless_fit(a: f64) -> Check {
    let (truth, trace) = noiseless_trace(coherent_table(21, a));
    let opts = FitOptions::default();
    let fit = fit_populations(&trace, 20, &opts).unwrap();
    let seq = fit_populations(
        &trace,
        20,
        &FitOptions {
            exec: Execution::Sequential,
            ..opts
        },
    )
    .unwrap();
    prop_assert_eq!(&fit, &seq);
    for (x, t) in fit.p.iter().zip(&truth.p) {
        prop_assert!((x - t).abs() < 1e-8, "{} vs {}", x, t);
    }
    prop_assert!((fit.omega_r / truth.omega_r - 1.0).abs() < 1e-8);
    prop_assert!((fit.gamma - truth.gamma).abs() < 1e-6);
    let fam = fit_state_family(&fit, StateFamily::Coherent).unwrap();
    prop_assert!((fam.alpha_mag().unwrap() - a).abs() < 1e-6);
    Ok(())
}

/// Unconstrained population fits of squeezed vacuum put almost no weight on
/// odd levels.
pub fn odd_levels_vanish(r: f64) -> Check {
    let (_, trace) = noiseless_trace(squeezed_table(21, r));
    let fit = fit_populations(&trace, 20, &FitOptions::default()).unwrap();
    let odd: f64 = fit.p.iter().skip(1).step_by(2).sum();
    prop_assert!(odd < 0.02, "odd mass {}", odd);
    Ok(())
}
