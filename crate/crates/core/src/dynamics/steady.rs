use nalgebra::DMatrix;

use super::lindblad::{evolve_with, Liouvillian};
use super::{EvolveOptions, KeepStates, Tolerances};
use crate::error::{Error, Result};
use crate::fock::{Operator, QuantumState};
use crate::linalg::{self, CMatrix, CVector, SylvesterSolver, C64, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateOptions {
    /// Largest Hilbert-space dimension solved through the dense vectorised
    /// Liouvillian (its size is the square of this, squared again in memory).
    pub dense_cap: usize,
    /// Required `max|L(ρ)|`, relative to the largest rate of the generator.
    pub tol: f64,
    pub max_iter: usize,
    pub anderson_depth: usize,
    /// Run a second, independent start and compare (iterative path only).
    pub check_degeneracy: bool,
    /// Integrate the master equation for up to this long if the iteration
    /// stalls.
    pub fallback_time: Option<f64>,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            dense_cap: 30,
            tol: 1e-9,
            max_iter: 2000,
            anderson_depth: 10,
            check_degeneracy: false,
            fallback_time: None,
        }
    }
}

/// Steady state of the Lindblad equation with Hamiltonian `h` and `jumps`.
pub fn steady_state(h: &Operator, jumps: &[Operator]) -> Result<QuantumState> {
    steady_state_with(h, jumps, &SteadyStateOptions::default())
}

pub fn steady_state_with(h: &Operator, jumps: &[Operator], opts: &SteadyStateOptions) -> Result<QuantumState> {
    if jumps.is_empty() {
        return Err(Error::param("steady state needs at least one jump operator"));
    }
    let space = h.space();
    let liou = Liouvillian::new(h, jumps)?;
    let rho = if space.full_dim() <= opts.dense_cap {
        dense_null_vector(&liou)?
    } else {
        match iterate(&liou, opts, Start::SlowestMode) {
            Ok(rho) => {
                if opts.check_degeneracy {
                    let other = iterate(&liou, opts, Start::Mixed)?;
                    let diff = linalg::max_abs_diff(&rho, &other);
                    if diff > 1e-6 {
                        return Err(Error::DegenerateSteadyState { dimension: 2 });
                    }
                }
                rho
            }
            Err(e) => match opts.fallback_time {
                Some(t) => integrate(&liou, space, t, opts)?,
                None => return Err(e),
            },
        }
    };
    Ok(QuantumState::density_unchecked(space, rho))
}

/// Dense null vector of the vectorised Liouvillian with the trace fixed.
fn dense_null_vector(liou: &Liouvillian) -> Result<CMatrix> {
    let d = liou.dim();
    let a = liou.effective();
    let id = CMatrix::identity(d, d);
    let mut sup = id.kronecker(a) + a.map(|z| z.conj()).kronecker(&id);
    for l in liou.jump_matrices() {
        sup += l.map(|z| z.conj()).kronecker(l);
    }
    let scale = linalg::max_abs(&sup);
    let mut m = sup.clone();
    for j in 0..d * d {
        m[(0, j)] = ZERO;
    }
    for i in 0..d {
        m[(0, i * d + i)] = C64::new(scale, 0.0);
    }
    let mut rhs = CVector::zeros(d * d);
    rhs[0] = C64::new(scale, 0.0);
    let solved = m.clone().lu().solve(&rhs);
    let ok = solved.as_ref().map(|x| {
        let rho = CMatrix::from_column_slice(d, d, x.as_slice());
        let herm = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
        (herm, (&m * x - &rhs).camax() / scale)
    });
    match ok {
        Some((rho, res)) if res < 1e-9 && liou.relative_residual(&rho) < 1e-8 => {
            let dim = null_dimension(&sup);
            if dim > 1 {
                return Err(Error::DegenerateSteadyState { dimension: dim });
            }
            Ok(rho)
        }
        _ => {
            let dim = null_dimension(&sup);
            if dim > 1 {
                Err(Error::DegenerateSteadyState { dimension: dim })
            } else {
                Err(Error::SteadyState("dense Liouvillian solve failed".into()))
            }
        }
    }
}

fn null_dimension(sup: &CMatrix) -> usize {
    let sv = sup.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|s| **s <= 1e-10 * max * sup.nrows() as f64).count()
}

#[derive(Clone, Copy)]
enum Start {
    SlowestMode,
    Mixed,
}

/// Fixed point of the jump-chain map `Φ(σ) = (J + μ)(−S_μ⁻¹ σ)` with
/// `S_μ X = AX + XA† − μX`, accelerated by Anderson mixing. The steady
/// state is `−S_μ⁻¹ σ*` normalised.
fn iterate(liou: &Liouvillian, opts: &SteadyStateOptions, start: Start) -> Result<CMatrix> {
    let d = liou.dim();
    let a = liou.effective();
    let probe = SylvesterSolver::new(a, 0.0);
    let slowest = probe
        .eigenvalues()
        .iter()
        .map(|l| -l.re)
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let fastest = probe.eigenvalues().iter().map(|l| -l.re).fold(0.0, f64::max);
    let mu = (0.5 * slowest).max(1e-6 * fastest).max(f64::MIN_POSITIVE);
    let solver = SylvesterSolver::new(a, mu);
    let mut buf = CMatrix::zeros(d, d);

    let to_rho = |sigma: &CMatrix| -> CMatrix {
        let mut x = solver.solve(sigma);
        x.neg_mut();
        let x = (&x + x.adjoint()) * C64::new(0.5, 0.0);
        let tr = x.trace().re;
        x / C64::new(tr, 0.0)
    };
    let mut phi = |rho: &CMatrix| -> CMatrix {
        liou.apply_jumps(rho, &mut buf);
        let s = &buf + rho * C64::new(mu, 0.0);
        let tr = s.trace().re;
        s / C64::new(tr, 0.0)
    };

    let rho0 = match start {
        Start::SlowestMode => {
            let v = probe.slowest_mode();
            &v * v.adjoint()
        }
        Start::Mixed => CMatrix::identity(d, d) / C64::new(d as f64, 0.0),
    };
    let mut x = phi(&rho0);
    let mut hist_x: Vec<CMatrix> = Vec::new();
    let mut hist_f: Vec<CMatrix> = Vec::new();
    let mut best = (f64::INFINITY, rho0.clone());
    for it in 0..opts.max_iter {
        let rho = to_rho(&x);
        let res = liou.relative_residual(&rho);
        if res < best.0 {
            best = (res, rho.clone());
        }
        if res <= opts.tol {
            log::debug!("steady state: {it} iterations, μ = {mu:e}, residual {res:e}");
            return Ok(rho);
        }
        let gx = phi(&rho);
        let fx = &gx - &x;
        hist_x.push(x.clone());
        hist_f.push(fx.clone());
        if hist_x.len() > opts.anderson_depth + 1 {
            hist_x.remove(0);
            hist_f.remove(0);
        }
        x = anderson(&hist_x, &hist_f).unwrap_or(gx);
        x = (&x + x.adjoint()) * C64::new(0.5, 0.0);
        let tr = x.trace().re;
        x /= C64::new(tr, 0.0);
    }
    Err(Error::SteadyState(format!(
        "jump-chain iteration stalled at relative residual {:e} after {} iterations",
        best.0, opts.max_iter
    )))
}

/// Type-II Anderson update from the iterate and residual histories.
fn anderson(xs: &[CMatrix], fs: &[CMatrix]) -> Option<CMatrix> {
    let m = xs.len();
    if m < 2 {
        return None;
    }
    let n = xs[0].len();
    let cols = m - 1;
    let mut df = DMatrix::<C64>::zeros(n, cols);
    for k in 0..cols {
        let col = (&fs[k + 1] - &fs[k]).as_slice().to_vec();
        df.column_mut(k).copy_from_slice(&col);
    }
    let f_last = CVector::from_column_slice(fs[m - 1].as_slice());
    // Regularised normal equations keep the small solve well posed.
    let mut g = df.adjoint() * &df;
    let reg = 1e-12 * (0..cols).map(|i| g[(i, i)].re).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for i in 0..cols {
        g[(i, i)] += C64::new(reg, 0.0);
    }
    let rhs = df.adjoint() * &f_last;
    let gamma = g.lu().solve(&rhs)?;
    let mut out = &xs[m - 1] + &fs[m - 1];
    for k in 0..cols {
        let dx = &xs[k + 1] - &xs[k];
        let dfk = &fs[k + 1] - &fs[k];
        out -= (dx + dfk) * gamma[k];
    }
    if out.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some(out)
    } else {
        None
    }
}

fn integrate(liou: &Liouvillian, space: crate::fock::FockSpace, total: f64, opts: &SteadyStateOptions) -> Result<CMatrix> {
    let d = liou.dim();
    let mut state = QuantumState::density_unchecked(space, CMatrix::identity(d, d) / C64::new(d as f64, 0.0));
    let chunks = 20;
    let eo = EvolveOptions {
        keep: KeepStates::Final,
        tol: Tolerances::default(),
        ..EvolveOptions::default()
    };
    for _ in 0..chunks {
        let r = evolve_with(liou, &state, &[0.0, total / chunks as f64], &eo)?;
        state = r.states.into_iter().next_back().expect("final state kept");
        let res = liou.relative_residual(&state.density_matrix());
        if res <= opts.tol {
            return Ok(state.density_matrix());
        }
    }
    Err(Error::SteadyState(format!("no convergence after integrating for {total} s")))
}
