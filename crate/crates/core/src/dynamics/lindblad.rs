use std::cell::RefCell;

use super::ode::DormandPrince;
use super::{check_grid, check_operators, observe, EvolutionResult, EvolveOptions};
use crate::error::Result;
use crate::fock::{Operator, QuantumState};
use crate::linalg::{CMatrix, SparseMatrix, C64, I};

/// Compiled Lindblad generator
/// `L(ρ) = Aρ + ρA† + Σ_j L_j ρ L_j†` with `A = −iH − ½ Σ_j L_j†L_j`.
pub struct Liouvillian {
    dim: usize,
    a_dense: CMatrix,
    a: SparseMatrix,
    jumps: Vec<SparseMatrix>,
    jumps_dense: Vec<CMatrix>,
    scratch: RefCell<(CMatrix, CMatrix)>,
}

impl Liouvillian {
    pub fn new(h: &Operator, jumps: &[Operator]) -> Result<Self> {
        let space = h.space();
        check_operators(space, h, jumps)?;
        let dim = space.full_dim();
        let mut a = h.matrix() * (-I);
        for l in jumps {
            a -= l.matrix().adjoint() * l.matrix() * C64::new(0.5, 0.0);
        }
        Ok(Self {
            dim,
            a: SparseMatrix::from_dense(&a),
            a_dense: a,
            jumps: jumps.iter().map(|l| SparseMatrix::from_dense(l.matrix())).collect(),
            jumps_dense: jumps.iter().map(|l| l.matrix().clone()).collect(),
            scratch: RefCell::new((CMatrix::zeros(dim, dim), CMatrix::zeros(dim, dim))),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Effective non-Hermitian generator `A`.
    pub fn effective(&self) -> &CMatrix {
        &self.a_dense
    }

    pub fn jump_matrices(&self) -> &[CMatrix] {
        &self.jumps_dense
    }

    /// Largest rate in the problem, used to make residuals dimensionless.
    pub fn rate_scale(&self) -> f64 {
        crate::linalg::max_abs(&self.a_dense).max(f64::MIN_POSITIVE)
    }

    /// `out = Σ_j L_j X L_j†`.
    pub fn apply_jumps(&self, x: &CMatrix, out: &mut CMatrix) {
        out.fill(C64::new(0.0, 0.0));
        let mut s = self.scratch.borrow_mut();
        let (m1, m2) = &mut *s;
        for l in &self.jumps {
            l.mul_dense_into(x, m1);
            adjoint_into(m1, m2);
            l.mul_dense_into(m2, m1);
            // m1 = L (L X)† = L X† L†; X Hermitian in every caller.
            *out += &*m1;
        }
    }

    /// `out = L(ρ)` for Hermitian `ρ`.
    pub fn apply(&self, rho: &CMatrix, out: &mut CMatrix) {
        self.apply_jumps(rho, out);
        let mut s = self.scratch.borrow_mut();
        let (m1, _) = &mut *s;
        self.a.mul_dense_into(rho, m1);
        let n = self.dim;
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] += m1[(i, j)] + m1[(j, i)].conj();
            }
        }
    }

    /// `max |L(ρ)|` relative to [`Self::rate_scale`].
    pub fn relative_residual(&self, rho: &CMatrix) -> f64 {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        self.apply(rho, &mut out);
        crate::linalg::max_abs(&out) / self.rate_scale()
    }
}

pub(crate) fn adjoint_into(m: &CMatrix, out: &mut CMatrix) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..n {
            out[(i, j)] = m[(j, i)].conj();
        }
    }
}

/// Integrates the Lindblad master equation from `t_grid[0]`, recording
/// observables at every grid time.
pub fn evolve_master(
    rho0: &QuantumState,
    h: &Operator,
    jumps: &[Operator],
    t_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    rho0.space().require_same(&h.space())?;
    let liou = Liouvillian::new(h, jumps)?;
    evolve_with(&liou, rho0, t_grid, opts)
}

pub(crate) fn evolve_with(
    liou: &Liouvillian,
    rho0: &QuantumState,
    t_grid: &[f64],
    opts: &EvolveOptions,
) -> Result<EvolutionResult> {
    check_grid(t_grid)?;
    let space = rho0.space();
    if space.full_dim() != liou.dim() {
        return Err(crate::error::Error::SpaceMismatch("state and generator dimensions differ".into()));
    }
    let f = |y: &CMatrix, out: &mut CMatrix| liou.apply(y, out);
    let d = liou.dim();
    let mut dp = DormandPrince::new(&f, (d, d), opts.tol);
    let mut rho = rho0.density_matrix();
    let mut t = t_grid[0];
    let mut res = EvolutionResult {
        times: t_grid.to_vec(),
        ..EvolutionResult::default()
    };
    for (idx, &t_out) in t_grid.iter().enumerate() {
        dp.advance(&mut rho, &mut t, t_out)?;
        let herm = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
        let state = QuantumState::density_unchecked(space, herm);
        let obs = observe(&state, opts.target.as_ref())?;
        if let Some(p) = obs.spin_down {
            res.spin_down_prob.push(p);
        }
        if let Some(fid) = obs.fidelity {
            res.target_fidelity.push(fid);
        }
        res.mean_n.push(obs.mean_n);
        if opts.keep.wants(idx, t_grid.len()) {
            res.states.push(state);
            res.state_times.push(t_out);
        }
    }
    log::debug!("master equation: {} steps, {} rejected", dp.steps, dp.rejected);
    Ok(res)
}
