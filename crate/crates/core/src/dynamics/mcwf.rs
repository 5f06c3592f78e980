use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ode::DormandPrince;
use super::{check_grid, check_operators, observe, EvolutionResult, EvolveOptions, StdErrors};
use crate::error::{Error, Result};
use crate::exec;
use crate::fock::{FockSpace, Operator, QuantumState};
use crate::linalg::{CMatrix, CVector, SparseMatrix, C64, I};

/// Relative width to which jump times are bisected inside a step.
const JUMP_TIME_RESOLUTION: f64 = 1e-3;

struct Compiled {
    space: FockSpace,
    a: SparseMatrix,
    jumps: Vec<SparseMatrix>,
}

/// Per-trajectory record of the observables at every grid time.
struct Trajectory {
    spin_down: Vec<f64>,
    fidelity: Vec<f64>,
    mean_n: Vec<f64>,
    kept: Vec<CMatrix>,
    jumps: usize,
}

/// Monte-Carlo wavefunction unravelling of the master equation.
///
/// Each trajectory integrates `dψ/dt = (−iH − ½ΣL†L)ψ` and jumps when
/// `‖ψ‖²` falls below a uniform draw; the jump time is bisected to a
/// thousandth of the step and the channel is chosen with weights
/// `‖L_jψ‖²`. Trajectory `k` uses its own ChaCha stream `k` of `seed`,
/// and results are reduced in trajectory order, so the output does not
/// depend on the execution mode or thread count.
pub fn mcwf_evolve(
    psi0: &QuantumState,
    h: &Operator,
    jumps: &[Operator],
    t_grid: &[f64],
    n_traj: usize,
    seed: u64,
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    check_grid(t_grid)?;
    let space = psi0.space();
    check_operators(space, h, jumps)?;
    let ket = psi0
        .as_ket()
        .ok_or_else(|| Error::InvalidState("trajectories need a pure initial state".into()))?;
    if n_traj == 0 {
        return Err(Error::param("need at least one trajectory"));
    }
    let mut a = h.matrix() * (-I);
    for l in jumps {
        a -= l.matrix().adjoint() * l.matrix() * C64::new(0.5, 0.0);
    }
    let compiled = Compiled {
        space,
        a: SparseMatrix::from_dense(&a),
        jumps: jumps.iter().map(|l| SparseMatrix::from_dense(l.matrix())).collect(),
    };
    let psi0 = CMatrix::from_column_slice(ket.len(), 1, ket.as_slice());
    let runs: Vec<Result<Trajectory>> = exec::map_indexed(opts.exec, n_traj, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        run_trajectory(&compiled, &psi0, t_grid, opts, &mut rng)
    });
    let runs: Vec<Trajectory> = runs.into_iter().collect::<Result<_>>()?;
    reduce(space, t_grid, &runs, opts)
}

fn run_trajectory(
    c: &Compiled,
    psi0: &CMatrix,
    t_grid: &[f64],
    opts: &EvolveOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory> {
    let d = psi0.nrows();
    let f = |y: &CMatrix, out: &mut CMatrix| c.a.mul_slice(y.as_slice(), out.as_mut_slice());
    let mut dp = DormandPrince::new(&f, (d, 1), opts.tol);
    let mut psi = psi0.clone();
    let mut saved = psi.clone();
    let mut trial = psi.clone();
    let mut t = t_grid[0];
    let mut threshold: f64 = rng.random();
    let mut out = Trajectory {
        spin_down: Vec::with_capacity(t_grid.len()),
        fidelity: Vec::with_capacity(t_grid.len()),
        mean_n: Vec::with_capacity(t_grid.len()),
        kept: Vec::new(),
        jumps: 0,
    };
    let mut scratch = vec![C64::new(0.0, 0.0); d];
    for (idx, &t_out) in t_grid.iter().enumerate() {
        while t < t_out {
            saved.copy_from(&psi);
            let t_prev = t;
            dp.step(&mut psi, &mut t, t_out)?;
            if psi.norm_squared() >= threshold {
                continue;
            }
            // Bisect the crossing of ‖ψ‖² = threshold inside (t_prev, t].
            let h = t - t_prev;
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > JUMP_TIME_RESOLUTION * h {
                let mid = 0.5 * (lo + hi);
                dp.fixed_step(&saved, mid, &mut trial);
                if trial.norm_squared() < threshold {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            dp.fixed_step(&saved, hi, &mut psi);
            t = t_prev + hi;
            apply_jump(c, &mut psi, &mut scratch, rng);
            out.jumps += 1;
            threshold = rng.random();
            dp.invalidate();
        }
        let norm = psi.norm();
        let v = CVector::from_iterator(d, psi.iter().map(|z| z / norm));
        let state = QuantumState::ket_unchecked(c.space, v);
        let obs = observe(&state, opts.target.as_ref())?;
        if let Some(p) = obs.spin_down {
            out.spin_down.push(p);
        }
        if let Some(fid) = obs.fidelity {
            out.fidelity.push(fid);
        }
        out.mean_n.push(obs.mean_n);
        if opts.keep.wants(idx, t_grid.len()) {
            let v = state.as_ket().expect("ket");
            out.kept.push(v * v.adjoint());
        }
    }
    Ok(out)
}

fn apply_jump(c: &Compiled, psi: &mut CMatrix, scratch: &mut [C64], rng: &mut ChaCha8Rng) {
    if c.jumps.is_empty() {
        return;
    }
    let weights: Vec<f64> = c
        .jumps
        .iter()
        .map(|l| {
            l.mul_slice(psi.as_slice(), scratch);
            scratch.iter().map(|z| z.norm_sqr()).sum()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return;
    }
    let mut u = rng.random::<f64>() * total;
    let mut pick = weights.len() - 1;
    for (j, w) in weights.iter().enumerate() {
        if u < *w {
            pick = j;
            break;
        }
        u -= w;
    }
    c.jumps[pick].mul_slice(psi.as_slice(), scratch);
    let norm = scratch.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for (p, s) in psi.iter_mut().zip(scratch.iter()) {
        *p = s / norm;
    }
}

fn mean_and_stderr(samples: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = samples.clone().sum::<f64>() / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = samples.map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

fn reduce(space: FockSpace, t_grid: &[f64], runs: &[Trajectory], opts: &EvolveOptions) -> Result<EvolutionResult> {
    let n = runs.len();
    let mut res = EvolutionResult {
        times: t_grid.to_vec(),
        ..EvolutionResult::default()
    };
    let mut se = StdErrors::default();
    let series = |pick: fn(&Trajectory) -> &Vec<f64>, out: &mut Vec<f64>, err: &mut Vec<f64>| {
        if pick(&runs[0]).is_empty() {
            return;
        }
        for i in 0..t_grid.len() {
            let (m, s) = mean_and_stderr(runs.iter().map(|r| pick(r)[i]), n);
            out.push(m);
            err.push(s);
        }
    };
    series(|r| &r.spin_down, &mut res.spin_down_prob, &mut se.spin_down_prob);
    series(|r| &r.fidelity, &mut res.target_fidelity, &mut se.target_fidelity);
    series(|r| &r.mean_n, &mut res.mean_n, &mut se.mean_n);
    let kept_idx: Vec<usize> = (0..t_grid.len()).filter(|&i| opts.keep.wants(i, t_grid.len())).collect();
    for (slot, &i) in kept_idx.iter().enumerate() {
        let mut acc = CMatrix::zeros(space.full_dim(), space.full_dim());
        for r in runs {
            acc += &r.kept[slot];
        }
        acc /= C64::new(n as f64, 0.0);
        res.states.push(QuantumState::density_unchecked(space, acc));
        res.state_times.push(t_grid[i]);
    }
    let total_jumps: usize = runs.iter().map(|r| r.jumps).sum();
    log::debug!("mcwf: {n} trajectories, {total_jumps} jumps");
    res.stderr = Some(se);
    Ok(res)
}
