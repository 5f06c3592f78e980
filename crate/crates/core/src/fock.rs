//! Truncated Fock-space states and operators.
//!
//! A [`FockSpace`] is either motion-only (`|0⟩ … |N−1⟩`) or spin ⊗ motion with
//! the spin index slow: basis index `k = s·N + n` with `s = 0` for `|↓⟩` and
//! `s = 1` for `|↑⟩`. Every operator and state in the crate uses this layout.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64, I, ONE, ZERO};

/// Tolerances used by state validation.
pub const KET_NORM_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-9;
pub const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Down = 0,
    Up = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockSpace {
    dim: usize,
    has_spin: bool,
}

impl FockSpace {
    pub fn motion(dim: usize) -> Result<Self> {
        Self::new(dim, false)
    }

    pub fn spin_motion(dim: usize) -> Result<Self> {
        Self::new(dim, true)
    }

    pub fn new(dim: usize, has_spin: bool) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Layout(format!("Fock truncation must be ≥ 2, got {dim}")));
        }
        Ok(Self { dim, has_spin })
    }

    /// Motional truncation N.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_spin(&self) -> bool {
        self.has_spin
    }

    /// Dimension of the full Hilbert space (N or 2N).
    pub fn full_dim(&self) -> usize {
        if self.has_spin {
            2 * self.dim
        } else {
            self.dim
        }
    }

    pub fn index(&self, spin: Spin, n: usize) -> usize {
        debug_assert!(n < self.dim);
        if self.has_spin {
            spin as usize * self.dim + n
        } else {
            n
        }
    }

    pub fn motional(&self) -> FockSpace {
        FockSpace {
            dim: self.dim,
            has_spin: false,
        }
    }

    pub fn with_spin(&self) -> FockSpace {
        FockSpace {
            dim: self.dim,
            has_spin: true,
        }
    }

    pub(crate) fn require_motion(&self, what: &str) -> Result<()> {
        if self.has_spin {
            Err(Error::Layout(format!("{what} needs a motion-only space")))
        } else {
            Ok(())
        }
    }

    pub(crate) fn require_spin(&self, what: &str) -> Result<()> {
        if self.has_spin {
            Ok(())
        } else {
            Err(Error::Layout(format!("{what} needs a spin ⊗ motion space")))
        }
    }

    pub(crate) fn require_same(&self, other: &FockSpace) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::SpaceMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Whether a constructor enforces its truncation safety bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Truncation {
    #[default]
    Enforce,
    /// Accept any N; used when probing truncation effects on purpose.
    Override,
}

/// Smallest N for which the displaced vacuum has negligible tail mass.
pub fn displacement_bound(alpha_abs: f64) -> usize {
    (alpha_abs * alpha_abs + 7.0 * alpha_abs + 10.0).ceil() as usize
}

/// Recommended N for squeezing with amplitude `r`.
pub fn squeeze_bound(r: f64) -> usize {
    (20.0 * (2.0 * r).cosh()).ceil() as usize
}

fn check_bound(policy: Truncation, what: &str, required: usize, actual: usize) -> Result<()> {
    if policy == Truncation::Enforce && actual < required {
        return Err(Error::Truncation {
            what: what.to_string(),
            required,
            actual,
        });
    }
    Ok(())
}

/// Complex square matrix over a [`FockSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: FockSpace,
    matrix: CMatrix,
}

impl Operator {
    pub fn new(space: FockSpace, matrix: CMatrix) -> Result<Self> {
        let d = space.full_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::SpaceMismatch(format!(
                "matrix is {}x{}, space needs {d}x{d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { space, matrix })
    }

    pub fn zeros(space: FockSpace) -> Self {
        let d = space.full_dim();
        Self {
            space,
            matrix: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(space: FockSpace) -> Self {
        let d = space.full_dim();
        Self {
            space,
            matrix: CMatrix::identity(d, d),
        }
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            space: self.space,
            matrix: &self.matrix * c,
        }
    }

    pub fn scaled_re(&self, c: f64) -> Self {
        self.scaled(C64::new(c, 0.0))
    }

    /// `self · other`.
    pub fn compose(&self, other: &Operator) -> Result<Self> {
        self.space.require_same(&other.space)?;
        Ok(Self {
            space: self.space,
            matrix: &self.matrix * &other.matrix,
        })
    }

    pub fn commutator(&self, other: &Operator) -> Result<Self> {
        Ok(&self.compose(other)? - &other.compose(self)?)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::max_abs_diff(&self.matrix, &self.matrix.adjoint()) <= tol
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        linalg::max_abs_diff(&self.matrix, &other.matrix)
    }

    pub fn nnz(&self) -> usize {
        self.matrix.iter().filter(|z| **z != ZERO).count()
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    /// `exp(c · self)` by scaling-and-squaring.
    pub fn exp_scaled(&self, c: C64) -> Self {
        Self {
            space: self.space,
            matrix: linalg::expm(&(&self.matrix * c)),
        }
    }

    /// Deviation of `U^† U` from the identity (max entry).
    pub fn unitarity_error(&self) -> f64 {
        let d = self.space.full_dim();
        linalg::max_abs_diff(&(self.matrix.adjoint() * &self.matrix), &CMatrix::identity(d, d))
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator {
            space: self.space,
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator {
            space: self.space,
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.space, rhs.space, "operator spaces differ");
        Operator {
            space: self.space,
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateRepr {
    Ket(CVector),
    Density(CMatrix),
}

/// Pure ket or density operator tagged with its space.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    space: FockSpace,
    repr: StateRepr,
}

impl QuantumState {
    pub fn ket(space: FockSpace, v: CVector) -> Result<Self> {
        if v.len() != space.full_dim() {
            return Err(Error::SpaceMismatch(format!(
                "ket has length {}, space needs {}",
                v.len(),
                space.full_dim()
            )));
        }
        let n2 = v.norm_squared();
        if (n2 - 1.0).abs() > KET_NORM_TOL {
            return Err(Error::InvalidState(format!("ket norm² = {n2}")));
        }
        Ok(Self {
            space,
            repr: StateRepr::Ket(v),
        })
    }

    /// Normalises `v` before wrapping it.
    pub fn ket_normalized(space: FockSpace, v: CVector) -> Result<Self> {
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("cannot normalise a zero ket".into()));
        }
        Self::ket(space, v / C64::new(n, 0.0))
    }

    pub fn density(space: FockSpace, m: CMatrix) -> Result<Self> {
        let d = space.full_dim();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::SpaceMismatch(format!(
                "density is {}x{}, space needs {d}x{d}",
                m.nrows(),
                m.ncols()
            )));
        }
        let herm = linalg::max_abs_diff(&m, &m.adjoint());
        if herm > 1e-9 {
            return Err(Error::InvalidState(format!("density not Hermitian (dev {herm:e})")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace = {tr}")));
        }
        let min_eig = linalg::min_hermitian_eigenvalue(&m);
        if min_eig < -PSD_TOL {
            return Err(Error::InvalidState(format!("min eigenvalue {min_eig:e}")));
        }
        Ok(Self {
            space,
            repr: StateRepr::Density(m),
        })
    }

    /// Wraps a density matrix produced by a trace-preserving map without
    /// re-running the eigenvalue check.
    pub(crate) fn density_unchecked(space: FockSpace, m: CMatrix) -> Self {
        debug_assert_eq!(m.nrows(), space.full_dim());
        Self {
            space,
            repr: StateRepr::Density(m),
        }
    }

    pub(crate) fn ket_unchecked(space: FockSpace, v: CVector) -> Self {
        Self {
            space,
            repr: StateRepr::Ket(v),
        }
    }

    /// Fock state `|n⟩` (spin ↓ for spinful spaces).
    pub fn fock(space: FockSpace, n: usize) -> Result<Self> {
        if n >= space.dim() {
            return Err(Error::param(format!("Fock index {n} outside truncation {}", space.dim())));
        }
        let mut v = CVector::zeros(space.full_dim());
        v[space.index(Spin::Down, n)] = ONE;
        Ok(Self::ket_unchecked(space, v))
    }

    /// Thermal motional state with mean occupation `nbar`, renormalised on
    /// the truncated space (spin ↓ for spinful spaces).
    pub fn thermal(space: FockSpace, nbar: f64) -> Result<Self> {
        if !(nbar >= 0.0) || !nbar.is_finite() {
            return Err(Error::param(format!("thermal n̄ must be ≥ 0, got {nbar}")));
        }
        let n = space.dim();
        let ratio = nbar / (nbar + 1.0);
        let mut weights: Vec<f64> = (0..n).map(|k| ratio.powi(k as i32)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mut m = CMatrix::zeros(space.full_dim(), space.full_dim());
        for (k, w) in weights.iter().enumerate() {
            let i = space.index(Spin::Down, k);
            m[(i, i)] = C64::new(*w, 0.0);
        }
        Ok(Self::density_unchecked(space, m))
    }

    /// Motional state `ρ_m` embedded with the spin in `|↓⟩`.
    pub fn with_spin_down(&self) -> Result<Self> {
        self.space.require_motion("with_spin_down")?;
        let space = self.space.with_spin();
        let n = self.space.dim();
        Ok(match &self.repr {
            StateRepr::Ket(v) => {
                let mut w = CVector::zeros(2 * n);
                w.rows_mut(0, n).copy_from(v);
                Self::ket_unchecked(space, w)
            }
            StateRepr::Density(m) => {
                let mut w = CMatrix::zeros(2 * n, 2 * n);
                w.view_mut((0, 0), (n, n)).copy_from(m);
                Self::density_unchecked(space, w)
            }
        })
    }

    pub fn space(&self) -> FockSpace {
        self.space
    }

    pub fn repr(&self) -> &StateRepr {
        &self.repr
    }

    pub fn is_pure_ket(&self) -> bool {
        matches!(self.repr, StateRepr::Ket(_))
    }

    pub fn as_ket(&self) -> Option<&CVector> {
        match &self.repr {
            StateRepr::Ket(v) => Some(v),
            StateRepr::Density(_) => None,
        }
    }

    pub fn density_matrix(&self) -> CMatrix {
        match &self.repr {
            StateRepr::Ket(v) => v * v.adjoint(),
            StateRepr::Density(m) => m.clone(),
        }
    }

    pub fn to_density(&self) -> Self {
        Self::density_unchecked(self.space, self.density_matrix())
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            StateRepr::Ket(v) => v.norm_squared(),
            StateRepr::Density(m) => m.trace().re,
        }
    }

    /// Smallest eigenvalue of the density operator (0 for kets).
    pub fn min_eigenvalue(&self) -> f64 {
        match &self.repr {
            StateRepr::Ket(_) => 0.0,
            StateRepr::Density(m) => linalg::min_hermitian_eigenvalue(m),
        }
    }

    pub fn expect(&self, op: &Operator) -> Result<C64> {
        self.space.require_same(&op.space)?;
        Ok(match &self.repr {
            StateRepr::Ket(v) => v.dotc(&(&op.matrix * v)),
            StateRepr::Density(m) => (&op.matrix * m).trace(),
        })
    }

    /// Reduced motional state (spin traced out); identity for motion-only.
    pub fn motional(&self) -> Self {
        if !self.space.has_spin() {
            return self.clone();
        }
        let n = self.space.dim();
        let m = self.density_matrix();
        let red = m.view((0, 0), (n, n)) + m.view((n, n), (n, n));
        Self::density_unchecked(self.space.motional(), red)
    }

    /// Probability of finding the spin in `|↓⟩`.
    pub fn spin_down_probability(&self) -> Result<f64> {
        self.space.require_spin("spin_down_probability")?;
        let n = self.space.dim();
        Ok(match &self.repr {
            StateRepr::Ket(v) => v.rows(0, n).norm_squared(),
            StateRepr::Density(m) => (0..n).map(|i| m[(i, i)].re).sum(),
        })
    }

    /// Diagonal of the motional density in the Fock basis.
    pub fn fock_populations(&self) -> Vec<f64> {
        let m = self.motional();
        match &m.repr {
            StateRepr::Ket(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            StateRepr::Density(d) => (0..d.nrows()).map(|i| d[(i, i)].re).collect(),
        }
    }

    /// Populations of the motional state in the basis whose kets are the
    /// columns of `basis` (e.g. an engineered ladder `U|n⟩`).
    pub fn populations_in_basis(&self, basis: &CMatrix) -> Result<Vec<f64>> {
        let m = self.motional();
        if basis.nrows() != m.space.dim() {
            return Err(Error::SpaceMismatch("basis rows differ from motional truncation".into()));
        }
        let rho = m.density_matrix();
        Ok((0..basis.ncols())
            .map(|k| {
                let col = basis.column(k);
                col.dotc(&(&rho * col)).re.max(0.0)
            })
            .collect())
    }
}

/// Motional annihilation operator, `⟨n−1|a|n⟩ = √n`.
pub fn destroy(space: FockSpace) -> Result<Operator> {
    space.require_motion("destroy")?;
    let n = space.dim();
    let mut m = CMatrix::zeros(n, n);
    for k in 1..n {
        m[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    Ok(Operator { space, matrix: m })
}

pub fn create(space: FockSpace) -> Result<Operator> {
    Ok(destroy(space)?.adjoint())
}

pub fn number(space: FockSpace) -> Result<Operator> {
    space.require_motion("number")?;
    let n = space.dim();
    let mut m = CMatrix::zeros(n, n);
    for k in 0..n {
        m[(k, k)] = C64::new(k as f64, 0.0);
    }
    Ok(Operator { space, matrix: m })
}

/// `D(α) = exp(α a† − α* a)`.
pub fn displacement(alpha: C64, space: FockSpace) -> Result<Operator> {
    displacement_with(alpha, space, Truncation::Enforce)
}

pub fn displacement_with(alpha: C64, space: FockSpace, policy: Truncation) -> Result<Operator> {
    space.require_motion("displacement")?;
    check_bound(policy, "displacement", displacement_bound(alpha.norm()), space.dim())?;
    if alpha == ZERO {
        return Ok(Operator::identity(space));
    }
    let a = destroy(space)?;
    let gen = a.adjoint().matrix * alpha - &a.matrix * alpha.conj();
    Ok(Operator {
        space,
        matrix: linalg::expm(&gen),
    })
}

/// `S(ξ) = exp((ξ* a² − ξ a†²)/2)` with `ξ = r e^{iφ_s}`.
///
/// The generator only couples Fock states of equal parity, so the even and
/// odd blocks are exponentiated separately and the cross-parity entries are
/// exact zeros.
pub fn squeeze(r: f64, phi_s: f64, space: FockSpace) -> Result<Operator> {
    squeeze_with(r, phi_s, space, Truncation::Enforce)
}

pub fn squeeze_with(r: f64, phi_s: f64, space: FockSpace, policy: Truncation) -> Result<Operator> {
    space.require_motion("squeeze")?;
    if !(r >= 0.0) || !r.is_finite() || !phi_s.is_finite() {
        return Err(Error::param(format!("squeeze needs finite r ≥ 0, got r={r}, φ={phi_s}")));
    }
    check_bound(policy, "squeeze", squeeze_bound(r), space.dim())?;
    let n = space.dim();
    if r == 0.0 {
        return Ok(Operator::identity(space));
    }
    let xi = C64::from_polar(r, phi_s);
    let mut out = CMatrix::zeros(n, n);
    for parity in 0..2 {
        let idx: Vec<usize> = (parity..n).step_by(2).collect();
        let m = idx.len();
        let mut g = CMatrix::zeros(m, m);
        for k in 0..m.saturating_sub(1) {
            let nn = idx[k] as f64;
            let amp = ((nn + 1.0) * (nn + 2.0)).sqrt() * 0.5;
            g[(k, k + 1)] = xi.conj() * amp;
            g[(k + 1, k)] = -xi * amp;
        }
        let e = linalg::expm(&g);
        for (bi, &i) in idx.iter().enumerate() {
            for (bj, &j) in idx.iter().enumerate() {
                out[(i, j)] = e[(bi, bj)];
            }
        }
    }
    Ok(Operator { space, matrix: out })
}

/// Closed-form coherent-state amplitudes `e^{−|α|²/2} αⁿ/√n!`, `n < len`.
pub fn coherent_amplitudes(alpha: C64, len: usize) -> CVector {
    let mut v = CVector::zeros(len);
    if len == 0 {
        return v;
    }
    v[0] = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for k in 1..len {
        v[k] = v[k - 1] * alpha / (k as f64).sqrt();
    }
    v
}

/// Closed-form squeezed-vacuum amplitudes `⟨n|S(ξ)|0⟩`, `n < len`.
pub fn squeezed_vacuum_amplitudes(r: f64, phi_s: f64, len: usize) -> CVector {
    let mut v = CVector::zeros(len);
    if len == 0 {
        return v;
    }
    let ratio = -C64::from_polar(r.tanh(), phi_s);
    v[0] = C64::new(1.0 / r.cosh().sqrt(), 0.0);
    let mut k = 0;
    while 2 * k + 2 < len {
        let f = ((2 * k + 1) as f64 / (2 * k + 2) as f64).sqrt();
        v[2 * k + 2] = v[2 * k] * ratio * f;
        k += 1;
    }
    v
}

/// Fidelity: `|⟨a|b⟩|²` for kets, `⟨a|ρ|a⟩` for ket vs density, and the
/// Uhlmann fidelity `(tr √(√ρ σ √ρ))²` for two densities.
pub fn fidelity(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    a.space.require_same(&b.space)?;
    let f = match (&a.repr, &b.repr) {
        (StateRepr::Ket(x), StateRepr::Ket(y)) => x.dotc(y).norm_sqr(),
        (StateRepr::Ket(x), StateRepr::Density(r)) | (StateRepr::Density(r), StateRepr::Ket(x)) => {
            x.dotc(&(r * x)).re
        }
        (StateRepr::Density(r), StateRepr::Density(s)) => {
            let sr = linalg::sqrtm_psd(r);
            let m = &sr * s * &sr;
            let (vals, _) = linalg::eigh(&m);
            let t: f64 = vals.iter().map(|v| v.max(0.0).sqrt()).sum();
            t * t
        }
    };
    Ok(f.clamp(0.0, 1.0))
}

/// Fidelity of a (possibly spinful) state's motional part with a motional ket.
pub fn motional_fidelity(state: &QuantumState, target: &CVector) -> Result<f64> {
    let n = state.space.dim();
    if target.len() != n {
        return Err(Error::SpaceMismatch("target ket length differs from truncation".into()));
    }
    let f = match &state.repr {
        StateRepr::Ket(v) if !state.space.has_spin() => target.dotc(v).norm_sqr(),
        StateRepr::Ket(v) => {
            target.dotc(&v.rows(0, n).into_owned()).norm_sqr()
                + target.dotc(&v.rows(n, n).into_owned()).norm_sqr()
        }
        StateRepr::Density(m) if !state.space.has_spin() => target.dotc(&(m * target)).re,
        StateRepr::Density(m) => {
            let down = m.view((0, 0), (n, n)) * target;
            let up = m.view((n, n), (n, n)) * target;
            target.dotc(&down).re + target.dotc(&up).re
        }
    };
    Ok(f.clamp(0.0, 1.0))
}

/// Moments `⟨a⟩`, `⟨a²⟩`, `⟨a†a⟩`, `⟨a a†⟩` of a motional state, using the
/// truncated matrices.
fn ladder_moments(state: &QuantumState) -> Result<(C64, C64, f64, f64)> {
    state.space.require_motion("quadrature variance")?;
    let n = state.space.dim();
    let sq = |k: usize| (k as f64).sqrt();
    // Truncated a a† has no weight on the top level.
    let an_weight = |k: usize| if k + 1 < n { (k + 1) as f64 } else { 0.0 };
    let mut out = (ZERO, ZERO, 0.0, 0.0);
    match &state.repr {
        StateRepr::Ket(v) => {
            for k in 0..n {
                let p = v[k].norm_sqr();
                out.2 += k as f64 * p;
                out.3 += an_weight(k) * p;
                if k + 1 < n {
                    out.0 += v[k].conj() * v[k + 1] * sq(k + 1);
                }
                if k + 2 < n {
                    out.1 += v[k].conj() * v[k + 2] * sq(k + 1) * sq(k + 2);
                }
            }
        }
        StateRepr::Density(m) => {
            for k in 0..n {
                let p = m[(k, k)].re;
                out.2 += k as f64 * p;
                out.3 += an_weight(k) * p;
                if k + 1 < n {
                    out.0 += m[(k + 1, k)] * sq(k + 1);
                }
                if k + 2 < n {
                    out.1 += m[(k + 2, k)] * sq(k + 1) * sq(k + 2);
                }
            }
        }
    }
    Ok(out)
}

/// `Var(x_θ)` for `x_θ = (a e^{−iθ} + a† e^{iθ})/√2`; vacuum gives 1/2.
pub fn quadrature_variance(state: &QuantumState, theta: f64) -> Result<f64> {
    let (ea, ea2, en, ean) = ladder_moments(state)?;
    let ph = C64::from_polar(1.0, -theta);
    let mean = (ea * ph).re * 2.0_f64.sqrt();
    let second = 0.5 * (2.0 * (ea2 * ph * ph).re + en + ean);
    Ok(second - mean * mean)
}

/// Minimum of [`quadrature_variance`] over θ, in closed form.
pub fn min_quadrature_variance(state: &QuantumState) -> Result<f64> {
    let (ea, ea2, en, ean) = ladder_moments(state)?;
    let centred_n = en - ea.norm_sqr();
    let centred_an = ean - ea.norm_sqr();
    let centred_a2 = ea2 - ea * ea;
    Ok(0.5 * (centred_n + centred_an) - centred_a2.norm())
}

pub type SpinOp = Matrix2<C64>;

/// `σ₊ = |↑⟩⟨↓|` in the (↓, ↑) ordering.
pub fn sigma_plus() -> SpinOp {
    Matrix2::new(ZERO, ZERO, ONE, ZERO)
}

/// `σ₋ = |↓⟩⟨↑|`.
pub fn sigma_minus() -> SpinOp {
    Matrix2::new(ZERO, ONE, ZERO, ZERO)
}

pub fn sigma_z() -> SpinOp {
    Matrix2::new(-ONE, ZERO, ZERO, ONE)
}

pub fn sigma_y() -> SpinOp {
    Matrix2::new(ZERO, I, -I, ZERO)
}

pub fn spin_identity() -> SpinOp {
    Matrix2::identity()
}

/// Kronecker product `spin ⊗ motion` in the spin-slow layout.
pub fn tensor_spin_motion(spin_op: &SpinOp, motion_op: &Operator) -> Result<Operator> {
    motion_op.space.require_motion("tensor_spin_motion")?;
    let spin = DMatrix::from_fn(2, 2, |i, j| spin_op[(i, j)]);
    Ok(Operator {
        space: motion_op.space.with_spin(),
        matrix: spin.kronecker(&motion_op.matrix),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn motion(n: usize) -> FockSpace {
        FockSpace::motion(n).unwrap()
    }

    #[test]
    fn destroy_small_cases() {
        let a = destroy(motion(2)).unwrap();
        assert_eq!(a.matrix()[(0, 1)], ONE);
        assert_eq!(a.nnz(), 1);
        let a4 = destroy(motion(4)).unwrap();
        assert_relative_eq!(a4.matrix()[(2, 3)].re, 1.7320508075688772, epsilon = 1e-15);
        assert!(destroy(FockSpace::spin_motion(4).unwrap()).is_err());
    }

    #[test]
    fn commutator_shows_truncation_artifact() {
        let s = motion(8);
        let a = destroy(s).unwrap();
        let c = a.commutator(&a.adjoint()).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let expected = match (i == j, i) {
                    (true, 7) => -7.0,
                    (true, _) => 1.0,
                    _ => 0.0,
                };
                assert_relative_eq!(c.matrix()[(i, j)].re, expected, epsilon = 1e-12);
                assert_relative_eq!(c.matrix()[(i, j)].im, 0.0);
            }
        }
    }

    #[test]
    fn displacement_examples() {
        let s = motion(40);
        let id = displacement(ZERO, s).unwrap();
        assert_eq!(id, Operator::identity(s));
        let d = displacement(C64::new(2.0, 0.0), s).unwrap();
        // Poisson p(2; |α|=2) = 8 e^{-4}.
        assert_relative_eq!(d.matrix()[(2, 0)].norm_sqr(), 8.0 * (-4.0f64).exp(), epsilon = 1e-10);
        let dm = displacement(C64::new(-2.0, 0.0), s).unwrap();
        let prod = &d * &dm;
        assert!(prod.max_abs_diff(&Operator::identity(s)) < 1e-8);
        assert!(d.unitarity_error() < 1e-8);
        let coh = coherent_amplitudes(C64::new(2.0, 0.0), 40);
        let col = d.matrix().column(0).into_owned();
        assert!((col - coh).camax() < 1e-8);
    }

    #[test]
    fn displacement_rejects_small_truncation_unless_overridden() {
        let s = motion(20);
        let err = displacement(C64::new(2.0, 0.0), s).unwrap_err();
        assert!(matches!(err, Error::Truncation { required: 28, .. }));
        assert!(displacement_with(C64::new(2.0, 0.0), s, Truncation::Override).is_ok());
    }

    #[test]
    fn squeeze_examples() {
        let s = motion(200);
        let sq = squeeze(1.45, 0.0, s).unwrap();
        assert_relative_eq!(sq.matrix()[(0, 0)].norm_sqr(), 1.0 / 1.45f64.cosh(), epsilon = 1e-9);
        assert_relative_eq!(1.0 / 1.45f64.cosh(), 0.4446732235547504, epsilon = 1e-14);
        for n in (1..200).step_by(2) {
            assert_eq!(sq.matrix()[(n, 0)], ZERO);
        }
        assert!(sq.unitarity_error() < 1e-8);
        // the truncated generator only perturbs amplitudes near the cut
        let closed = squeezed_vacuum_amplitudes(1.45, 0.0, 200);
        assert!((sq.matrix().column(0).rows(0, 100).into_owned() - closed.rows(0, 100)).camax() < 1e-9);
        assert_eq!(squeeze(0.0, 0.3, motion(20)).unwrap(), Operator::identity(motion(20)));
        let sq2 = squeeze(0.8, 1.1, motion(120)).unwrap();
        assert_eq!(sq2.matrix()[(1, 0)], ZERO);
        let closed = squeezed_vacuum_amplitudes(0.8, 1.1, 120);
        assert!((sq2.matrix().column(0).into_owned() - closed).camax() < 1e-10);
    }

    #[test]
    fn fidelity_cases() {
        let s = motion(40);
        let zero = QuantumState::fock(s, 0).unwrap();
        let one = QuantumState::fock(s, 1).unwrap();
        assert_relative_eq!(fidelity(&zero, &zero).unwrap(), 1.0);
        assert_relative_eq!(fidelity(&zero, &one).unwrap(), 0.0);
        let coh = QuantumState::ket_normalized(s, coherent_amplitudes(C64::new(2.0, 0.0), 40)).unwrap();
        assert_relative_eq!(fidelity(&coh, &zero).unwrap(), (-4.0f64).exp(), epsilon = 1e-10);
        // density vs ket and Uhlmann reduce to the same number for pure states
        assert_relative_eq!(fidelity(&coh.to_density(), &zero).unwrap(), (-4.0f64).exp(), epsilon = 1e-10);
        assert_relative_eq!(
            fidelity(&coh.to_density(), &zero.to_density()).unwrap(),
            (-4.0f64).exp(),
            epsilon = 1e-7
        );
        let other = QuantumState::fock(motion(41), 0).unwrap();
        assert!(fidelity(&zero, &other).is_err());
    }

    #[test]
    fn quadrature_variance_examples() {
        let s = motion(200);
        let vac = QuantumState::fock(s, 0).unwrap();
        assert_relative_eq!(quadrature_variance(&vac, 0.3).unwrap(), 0.5, epsilon = 1e-12);
        let sq = QuantumState::ket(s, squeezed_vacuum_amplitudes(1.45, 0.0, 200)).unwrap();
        let vmin = min_quadrature_variance(&sq).unwrap();
        assert_relative_eq!(vmin, 0.5 * (-2.9f64).exp(), epsilon = 1e-8);
        assert_relative_eq!(vmin, 0.02751, epsilon = 1e-5);
        // the minimising angle for φ_s = 0 is θ = 0 (x quadrature squeezed)
        assert_relative_eq!(quadrature_variance(&sq, 0.0).unwrap(), vmin, epsilon = 1e-10);
        let coh = QuantumState::ket_normalized(motion(60), coherent_amplitudes(C64::new(2.0, 0.0), 60)).unwrap();
        for theta in [0.0, 0.7, 2.0] {
            assert_relative_eq!(quadrature_variance(&coh, theta).unwrap(), 0.5, epsilon = 1e-8);
        }
    }

    #[test]
    fn tensor_examples() {
        let s = motion(5);
        let id = tensor_spin_motion(&spin_identity(), &Operator::identity(s)).unwrap();
        assert_eq!(id, Operator::identity(s.with_spin()));
        let sp = s.with_spin();
        let lower = tensor_spin_motion(&sigma_minus(), &Operator::identity(s)).unwrap();
        let mut up3 = CVector::zeros(10);
        up3[sp.index(Spin::Up, 3)] = ONE;
        let out = lower.apply(&up3);
        assert_eq!(out[sp.index(Spin::Down, 3)], ONE);
        assert_relative_eq!(out.norm(), 1.0);
        let red = tensor_spin_motion(&sigma_plus(), &destroy(s).unwrap()).unwrap();
        let mut down1 = CVector::zeros(10);
        down1[sp.index(Spin::Down, 1)] = ONE;
        let out = red.apply(&down1);
        assert_eq!(out[sp.index(Spin::Up, 0)], ONE);
        assert_relative_eq!(out.norm(), 1.0);
    }

    #[test]
    fn thermal_state_is_normalised() {
        let th = QuantumState::thermal(FockSpace::spin_motion(60).unwrap(), 3.0).unwrap();
        assert_relative_eq!(th.trace(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(th.spin_down_probability().unwrap(), 1.0, epsilon = 1e-12);
    }
}
