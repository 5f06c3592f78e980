use nalgebra::{DMatrix, DVector};

use super::{BasisTag, PopulationEstimate, RabiTrace};
use crate::engineered::{self, LambDickeParams};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};

/// Largest population cutoff the dense fit accepts.
pub const MAX_N_MAX: usize = 40;

const SCAN_LEVELS: usize = 8;

/// Treatment of the linear drift term `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BMode {
    /// 0 for blue-sideband traces, free for H± traces.
    Auto,
    Fixed(f64),
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub ld: LambDickeParams,
    pub b: BMode,
    /// Calibrated `Ω_R` held fixed; a single flopping frequency cannot
    /// separate the level index from the overall scale.
    pub omega_r: Option<f64>,
    pub max_iter: usize,
    /// Relative cost change below which a start is converged.
    pub tol: f64,
    pub exec: Execution,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ld: LambDickeParams { eta: 0.05, omega_00: 1.0 },
            b: BMode::Auto,
            omega_r: None,
            max_iter: 400,
            tol: 1e-13,
            exec: Execution::default(),
        }
    }
}

/// Model evaluation with analytic derivatives for a fixed trace.
struct Model<'a> {
    times: &'a [f64],
    y: &'a [f64],
    w: Vec<f64>,
    /// `(level coupling f, decay factor s)` per population index.
    levels: Vec<(f64, f64)>,
    /// Population index that does not flop (H₋ ground state).
    dark: Option<usize>,
    b_free: bool,
    b_fixed: f64,
}

#[derive(Clone)]
struct Params {
    p: Vec<f64>,
    gamma: f64,
    omega: f64,
    b: f64,
}

impl Model<'_> {
    fn n_params(&self) -> usize {
        self.levels.len() + 3
    }

    fn b(&self, x: &Params) -> f64 {
        if self.b_free {
            x.b
        } else {
            self.b_fixed
        }
    }

    /// Weighted residuals and, optionally, their Jacobian over
    /// `(p…, γ, Ω, b)`.
    fn eval(&self, x: &Params, jac: Option<&mut DMatrix<f64>>) -> DVector<f64> {
        let m = self.times.len();
        let k = self.levels.len();
        let mut r = DVector::zeros(m);
        let mut jac = jac;
        for (i, &t) in self.times.iter().enumerate() {
            let mut val = self.b(x) * t;
            let (mut dg, mut dw) = (0.0, 0.0);
            for (n, &(f, s)) in self.levels.iter().enumerate() {
                let basis = if self.dark == Some(n) {
                    1.0
                } else {
                    let e = (-x.gamma * s * t).exp();
                    let arg = x.omega * f * t;
                    let (sn, cs) = arg.sin_cos();
                    dg += -0.5 * x.p[n] * s * t * e * cs;
                    dw += -0.5 * x.p[n] * e * sn * f * t;
                    0.5 * (1.0 + e * cs)
                };
                val += x.p[n] * basis;
                if let Some(j) = jac.as_deref_mut() {
                    j[(i, n)] = self.w[i] * basis;
                }
            }
            r[i] = self.w[i] * (val - self.y[i]);
            if let Some(j) = jac.as_deref_mut() {
                j[(i, k)] = self.w[i] * dg;
                j[(i, k + 1)] = self.w[i] * dw;
                j[(i, k + 2)] = if self.b_free { self.w[i] * t } else { 0.0 };
            }
        }
        r
    }

    fn cost(&self, x: &Params) -> f64 {
        self.eval(x, None).norm_squared()
    }
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

#[derive(Clone, Copy)]
struct Free {
    gamma: bool,
    omega: bool,
}

struct StartResult {
    x: Params,
    cost: f64,
    iterations: usize,
}

/// Levenberg-Marquardt with the populations kept on the simplex. Each step
/// is solved with `Σδp = 0` over the populations that are free to move and
/// is then projected, so every accepted iterate is feasible.
fn solve_start(model: &Model, mut x: Params, free: Free, max_iter: usize, tol: f64) -> StartResult {
    let k = model.levels.len();
    let np = model.n_params();
    let m = model.times.len();
    let mut jac = DMatrix::zeros(m, np);
    let mut r = model.eval(&x, Some(&mut jac));
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut stall = 0;
    while iterations < max_iter {
        iterations += 1;
        let g = jac.transpose() * &r;
        let free_p: Vec<usize> = {
            let moving: Vec<usize> = (0..k).filter(|&n| x.p[n] > 0.0).collect();
            let gbar = moving.iter().map(|&n| g[n]).sum::<f64>() / moving.len().max(1) as f64;
            (0..k).filter(|&n| x.p[n] > 0.0 || g[n] < gbar).collect()
        };
        let mut vars: Vec<usize> = free_p.clone();
        if free.gamma {
            vars.push(k);
        }
        if free.omega {
            vars.push(k + 1);
        }
        if model.b_free {
            vars.push(k + 2);
        }
        let nv = vars.len();
        let nf = free_p.len();
        let jtj = jac.transpose() * &jac;
        let mut accepted = false;
        for _ in 0..30 {
            // KKT system [H + λD, c; cᵀ, 0] with c the population-sum row.
            let mut a = DMatrix::zeros(nv + 1, nv + 1);
            let mut rhs = DVector::zeros(nv + 1);
            for (i, &vi) in vars.iter().enumerate() {
                for (j, &vj) in vars.iter().enumerate() {
                    a[(i, j)] = jtj[(vi, vj)];
                }
                a[(i, i)] += lambda * jtj[(vi, vi)].max(1e-12);
                rhs[i] = -g[vi];
            }
            for i in 0..nf {
                a[(i, nv)] = 1.0;
                a[(nv, i)] = 1.0;
            }
            if nf == 0 {
                a[(nv, nv)] = 1.0;
            }
            let Some(step) = a.lu().solve(&rhs) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = x.clone();
            for (i, &vi) in vars.iter().enumerate() {
                let d = step[i];
                match vi {
                    v if v < k => trial.p[v] += d,
                    v if v == k => trial.gamma = (trial.gamma + d).max(0.0),
                    v if v == k + 1 => trial.omega = (trial.omega + d).max(1e-9 * x.omega.max(1.0)),
                    _ => trial.b += d,
                }
            }
            project_simplex(&mut trial.p);
            let c = model.cost(&trial);
            if c.is_finite() && c <= cost {
                let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
                x = trial;
                r = model.eval(&x, Some(&mut jac));
                cost = c;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                stall = if rel < tol { stall + 1 } else { 0 };
                break;
            }
            lambda *= 10.0;
        }
        if !accepted || stall >= 3 || cost == 0.0 {
            break;
        }
    }
    StartResult { x, cost, iterations }
}

/// Dominant angular frequency of the mean-subtracted trace from a direct
/// periodogram, so unevenly spaced times are handled.
fn dominant_frequency(times: &[f64], y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let t0 = times.iter().cloned().fold(f64::MAX, f64::min);
    let t1 = times.iter().cloned().fold(f64::MIN, f64::max);
    let span = (t1 - t0).max(f64::MIN_POSITIVE);
    let mut dts: Vec<f64> = times.windows(2).map(|w| (w[1] - w[0]).abs()).filter(|d| *d > 0.0).collect();
    dts.sort_by(f64::total_cmp);
    let dt = dts.get(dts.len() / 2).copied().unwrap_or(span);
    let w_min = std::f64::consts::PI / span;
    let w_max = std::f64::consts::PI / dt;
    let dw = std::f64::consts::TAU / (16.0 * span);
    let mut best = (w_min, f64::MIN);
    let mut w = w_min;
    while w <= w_max {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in times.iter().zip(y) {
            let (s, c) = (w * (t - t0)).sin_cos();
            re += (v - mean) * c;
            im += (v - mean) * s;
        }
        let pow = re * re + im * im;
        if pow > best.1 {
            best = (w, pow);
        }
        w += dw;
    }
    best.0
}

/// Decay rate of the oscillation envelope from a log-linear fit of the
/// half peak-to-peak amplitude in four consecutive windows.
fn envelope_decay(times: &[f64], y: &[f64]) -> f64 {
    let m = times.len();
    let seg = (m / 4).max(2);
    let pts: Vec<(f64, f64)> = (0..m)
        .step_by(seg)
        .filter_map(|s| {
            let e = (s + seg).min(m);
            if e - s < 2 {
                return None;
            }
            let hi = y[s..e].iter().cloned().fold(f64::MIN, f64::max);
            let lo = y[s..e].iter().cloned().fold(f64::MAX, f64::min);
            let tm = times[s..e].iter().sum::<f64>() / (e - s) as f64;
            let amp = 0.5 * (hi - lo);
            (amp > 0.0).then(|| (tm, amp.ln()))
        })
        .collect();
    let span = times.last().unwrap() - times[0];
    let fallback = 0.1 / span.max(f64::MIN_POSITIVE);
    if pts.len() < 2 {
        return fallback;
    }
    let n = pts.len() as f64;
    let tb = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let lb = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - tb) * (p.1 - lb)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - tb).powi(2)).sum();
    let slope = if den > 0.0 { num / den } else { 0.0 };
    if -slope > 0.0 {
        -slope
    } else {
        fallback
    }
}

/// Profiles the cost over `Ω_R` on a 1 % geometric grid spanning the
/// level-assignment guesses, solving only for the populations at each
/// point, and returns the three deepest local minima.
fn profile_scan(model: &Model, guesses: &[f64], gamma: f64, uniform: &[f64], opts: &FitOptions) -> Vec<f64> {
    let lo = guesses.iter().cloned().fold(f64::MAX, f64::min) * 0.85;
    let hi = guesses.iter().cloned().fold(f64::MIN, f64::max) * 1.15;
    let n = ((hi / lo).ln() / 1.01f64.ln()).ceil() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|i| lo * 1.01f64.powi(i as i32)).collect();
    let costs = exec::map_slice(opts.exec, &grid, |&w| {
        let x = Params {
            p: uniform.to_vec(),
            gamma,
            omega: w,
            b: model.b_fixed,
        };
        solve_start(model, x, Free { gamma: false, omega: false }, 60, opts.tol).cost
    });
    let mut minima: Vec<(f64, f64)> = (0..n)
        .filter(|&i| (i == 0 || costs[i] <= costs[i - 1]) && (i + 1 == n || costs[i] <= costs[i + 1]))
        .map(|i| (costs[i], grid[i]))
        .collect();
    minima.sort_by(|a, b| a.0.total_cmp(&b.0));
    minima.into_iter().take(3).map(|m| m.1).collect()
}

/// Constrained fit of the flop model to a trace: populations `p(0…n_max)`
/// on the simplex, `γ ≥ 0`, `Ω_R > 0` and the drift `b`.
///
/// Starts are the periodogram peak assigned to each of the four lowest
/// levels plus the best points of a profiled `Ω_R` scan spanning the
/// lowest eight, crossed with three envelope-decay guesses, from uniform
/// populations. They run under `opts.exec` and the lowest cost wins, ties
/// going to the earliest start, so the result does not depend on the
/// execution mode. The covariance is the Gauss-Newton inverse on the
/// tangent space of the active simplex face, scaled by the reduced χ².
pub fn fit_populations(trace: &RabiTrace, n_max: usize, opts: &FitOptions) -> Result<PopulationEstimate> {
    trace.validate()?;
    if n_max > MAX_N_MAX {
        return Err(Error::param(format!(
            "n_max = {n_max} exceeds {MAX_N_MAX}; the dense population fit is not meaningful there"
        )));
    }
    let k = n_max + 1;
    if trace.len() < 4 * k {
        log::warn!("fit with {} points for {} populations; ≥ {} recommended", trace.len(), k, 4 * k);
    }
    let (b_free, b_fixed) = match (opts.b, trace.basis_tag) {
        (BMode::Fixed(v), _) => (false, v),
        (BMode::Free, _) => (true, 0.0),
        (BMode::Auto, BasisTag::BlueSideband) => (false, 0.0),
        (BMode::Auto, _) => (true, 0.0),
    };
    let f = engineered::sideband_couplings(k + 1, &opts.ld);
    let (levels, dark) = match trace.basis_tag {
        BasisTag::HMinus => {
            let lv = (0..k)
                .map(|n| if n == 0 { (0.0, 0.0) } else { (f[n - 1], (n as f64).sqrt()) })
                .collect();
            (lv, Some(0))
        }
        _ => ((0..k).map(|n| (f[n], ((n + 1) as f64).sqrt())).collect(), None),
    };
    let model = Model {
        times: &trace.times,
        y: &trace.p_down,
        w: trace.stderr().iter().map(|s| 1.0 / s).collect(),
        levels,
        dark,
        b_free,
        b_fixed,
    };

    let w_peak = dominant_frequency(&trace.times, &trace.p_down);
    let g0 = envelope_decay(&trace.times, &trace.p_down);
    let first_flopping = usize::from(dark.is_some());
    let uniform = vec![1.0 / k as f64; k];
    let free = Free {
        gamma: true,
        omega: opts.omega_r.is_none(),
    };
    let peak_guess = |levels: usize| -> Vec<f64> {
        (first_flopping..(first_flopping + levels).min(k))
            .map(|lvl| model.levels[lvl].0)
            .filter(|f| *f > 0.0)
            .map(|f| w_peak / f)
            .collect()
    };
    let mut omegas: Vec<f64> = match opts.omega_r {
        Some(w) => {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::param(format!("fixed Ω_R must be positive, got {w}")));
            }
            vec![w]
        }
        None => peak_guess(4),
    };
    if omegas.is_empty() {
        return Err(Error::param("no flopping level available for the initial guess"));
    }
    if opts.omega_r.is_none() {
        omegas.extend(profile_scan(&model, &peak_guess(SCAN_LEVELS), g0, &uniform, opts));
    }
    let mut starts = Vec::new();
    for &w in &omegas {
        for g in [g0, g0 / 3.0, 3.0 * g0] {
            starts.push(Params {
                p: uniform.clone(),
                gamma: g,
                omega: w,
                b: b_fixed,
            });
        }
    }
    let results = exec::map_slice(opts.exec, &starts, |x0| {
        // Populations first at the guessed rates, then everything.
        let pre = solve_start(&model, x0.clone(), Free { gamma: false, omega: false }, 60, opts.tol);
        solve_start(&model, pre.x, free, opts.max_iter, opts.tol)
    });
    let mut best_idx = None;
    for (i, res) in results.iter().enumerate() {
        if !res.cost.is_finite() {
            continue;
        }
        if best_idx.is_none_or(|j: usize| res.cost < results[j].cost) {
            best_idx = Some(i);
        }
    }
    let Some(bi) = best_idx else {
        return Err(Error::FitConvergence {
            restarts: starts.len(),
            best_cost: f64::NAN,
            detail: "every start produced a non-finite cost".into(),
        });
    };
    let best = &results[bi];
    log::debug!(
        "population fit: start {bi} of {} won with cost {:.6e} after {} iterations",
        starts.len(),
        best.cost,
        best.iterations
    );
    let x = best.x.clone();
    let covariance = covariance(&model, &x, best.cost, free);
    Ok(PopulationEstimate {
        b: model.b(&x),
        p: x.p,
        gamma: x.gamma,
        omega_r: x.omega,
        covariance,
        n_max,
        cost: best.cost,
    })
}

fn covariance(model: &Model, x: &Params, cost: f64, free: Free) -> DMatrix<f64> {
    let k = model.levels.len();
    let np = model.n_params();
    let m = model.times.len();
    let mut jac = DMatrix::zeros(m, np);
    model.eval(x, Some(&mut jac));
    // Tangent basis: e_i − e_last over nonzero populations, then γ, Ω, (b).
    let nz: Vec<usize> = (0..k).filter(|&n| x.p[n] > 0.0).collect();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    if let Some((&last, rest)) = nz.split_last() {
        for &i in rest {
            let mut v = DVector::zeros(np);
            v[i] = 1.0;
            v[last] = -1.0;
            cols.push(v);
        }
    }
    for (j, on) in [free.gamma, free.omega, model.b_free].into_iter().enumerate() {
        if on {
            let mut v = DVector::zeros(np);
            v[k + j] = 1.0;
            cols.push(v);
        }
    }
    let t = DMatrix::from_columns(&cols);
    let jt = &jac * &t;
    let dof = m as f64 - cols.len() as f64;
    let s2 = if dof > 0.0 { cost / dof } else { 1.0 };
    let h = jt.transpose() * &jt;
    let inv = h
        .clone()
        .pseudo_inverse(1e-12 * h.amax().max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DMatrix::zeros(cols.len(), cols.len()));
    let cov = &t * inv * t.transpose() * s2;
    (&cov + cov.transpose()) * 0.5
}

/// Population fit of an H₊ trace, read as populations of the engineered
/// basis; `b` is free unless fixed in `opts`.
pub fn fit_engineered_ground(trace: &RabiTrace, n_max: usize, opts: &FitOptions) -> Result<PopulationEstimate> {
    if trace.basis_tag != BasisTag::HPlus {
        return Err(Error::param(format!(
            "engineered-ground fit needs an H_plus trace, got {}",
            trace.basis_tag
        )));
    }
    fit_populations(trace, n_max, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectro::{coherent_table, rabi_signal_for, squeezed_table, synthesize_trace, Truth};
    use std::f64::consts::TAU;

    fn normalized(mut p: Vec<f64>) -> Vec<f64> {
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= s);
        p
    }

    fn noiseless(est: &PopulationEstimate, times: &[f64], tag: BasisTag) -> RabiTrace {
        let ld = FitOptions::default().ld;
        let y = times.iter().map(|&t| rabi_signal_for(tag, t, est, &ld)).collect();
        RabiTrace::new(times.to_vec(), y, 300, tag).unwrap()
    }

    fn grid(n: usize, t_end: f64) -> Vec<f64> {
        (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn simplex_projection() {
        let mut v = vec![0.5, 0.7, -0.1];
        project_simplex(&mut v);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(v.iter().all(|x| *x >= 0.0));
        assert!((v[0] - 0.4).abs() < 1e-12 && (v[1] - 0.6).abs() < 1e-12 && v[2] == 0.0);
    }

    #[test]
    fn single_fock_is_identified() {
        let mut p = vec![0.0; 6];
        p[3] = 1.0;
        let truth = PopulationEstimate::exact(p, 300.0, TAU * 128.5e3, 0.0).unwrap();
        let tr = noiseless(&truth, &grid(60, 1e-3), BasisTag::BlueSideband);
        let opts = FitOptions {
            omega_r: Some(truth.omega_r),
            ..FitOptions::default()
        };
        let est = fit_populations(&tr, 5, &opts).unwrap();
        assert!(est.p[3] >= 0.999, "{:?}", est.p);
        assert!((est.p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_noiseless_round_trip_and_determinism() {
        let truth = PopulationEstimate::exact(normalized(coherent_table(13, 2.0)), 370.0, TAU * 128.5e3, 0.0).unwrap();
        let tr = noiseless(&truth, &grid(80, 1e-3), BasisTag::BlueSideband);
        let seq = FitOptions {
            exec: Execution::Sequential,
            ..FitOptions::default()
        };
        let a = fit_populations(&tr, 12, &seq).unwrap();
        let b = fit_populations(&tr, 12, &FitOptions::default()).unwrap();
        assert_eq!(a.p, b.p);
        assert_eq!(a.omega_r, b.omega_r);
        for n in 0..13 {
            assert!((a.p[n] - truth.p[n]).abs() < 1e-4, "n={n}: {} vs {}", a.p[n], truth.p[n]);
        }
        assert!((a.omega_r / truth.omega_r - 1.0).abs() < 1e-5);
        let tcost = {
            let m = Model {
                times: &tr.times,
                y: &tr.p_down,
                w: tr.stderr().iter().map(|s| 1.0 / s).collect(),
                levels: (0..13)
                    .map(|n| (engineered::sideband_coupling(n, &seq.ld), ((n + 1) as f64).sqrt()))
                    .collect(),
                dark: None,
                b_free: false,
                b_fixed: 0.0,
            };
            m.cost(&Params {
                p: truth.p.clone(),
                gamma: truth.gamma,
                omega: truth.omega_r,
                b: 0.0,
            })
        };
        assert!(a.cost <= tcost + 1e-12);
    }

    #[test]
    fn squeezed_odd_levels_stay_small() {
        let truth = PopulationEstimate::exact(normalized(squeezed_table(21, 1.45)), 370.0, TAU * 128.5e3, 0.0).unwrap();
        let ld = FitOptions::default().ld;
        let tr = synthesize_trace(&Truth::Populations(truth), &grid(120, 1.5e-3), 300, 17, BasisTag::BlueSideband, &ld).unwrap();
        let est = fit_populations(&tr, 20, &FitOptions::default()).unwrap();
        for n in (1..21).step_by(2) {
            assert!(est.p[n] < 0.02, "p({n}) = {}", est.p[n]);
        }
    }

    #[test]
    fn drift_is_recovered() {
        let truth = PopulationEstimate::exact(vec![0.9, 0.08, 0.02], 200.0, TAU * 100e3, -49.0).unwrap();
        let ld = FitOptions::default().ld;
        let tr = synthesize_trace(&Truth::Populations(truth), &grid(100, 2e-3), 300, 3, BasisTag::HPlus, &ld).unwrap();
        let est = fit_engineered_ground(&tr, 5, &FitOptions::default()).unwrap();
        let (_, _, sb) = est.param_errors();
        assert!((est.b + 49.0).abs() < 3.0 * sb, "b = {} ± {sb}", est.b);
        assert!(fit_engineered_ground(&RabiTrace { basis_tag: BasisTag::BlueSideband, ..tr.clone() }, 5, &FitOptions::default()).is_err());
        assert!(fit_populations(&tr, 41, &FitOptions::default()).is_err());
    }

    #[test]
    fn perfect_engineered_ground() {
        let truth = PopulationEstimate::exact(vec![1.0, 0.0, 0.0], 0.0, TAU * 100e3, 0.0).unwrap();
        let tr = noiseless(&truth, &grid(60, 1e-3), BasisTag::HPlus);
        let est = fit_engineered_ground(&tr, 5, &FitOptions::default()).unwrap();
        assert!((est.p[0] - 1.0).abs() < 1e-6, "{:?}", est.p);
    }

    #[test]
    fn h_minus_fit() {
        let truth = PopulationEstimate::exact(vec![0.7, 0.2, 0.1], 100.0, TAU * 100e3, 0.0).unwrap();
        let tr = noiseless(&truth, &grid(60, 1e-3), BasisTag::HMinus);
        let est = fit_populations(&tr, 2, &FitOptions { b: BMode::Fixed(0.0), ..FitOptions::default() }).unwrap();
        for n in 0..3 {
            assert!((est.p[n] - truth.p[n]).abs() < 1e-5, "{:?}", est.p);
        }
    }
}
