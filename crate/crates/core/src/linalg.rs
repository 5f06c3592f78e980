//! Dense and banded linear-algebra kernels shared by the simulator.
//!
//! Everything here works on `DMatrix<Complex64>` in nalgebra's column-major
//! storage. The sparse type is only an apply-kernel for operators that are
//! known to be banded (ladder operators, sideband Hamiltonians); operators
//! themselves stay dense.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::exec;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Columns above this size are split across threads in sparse products.
const PAR_MIN_DIM: usize = 96;

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

fn one_norm(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [f64; 4] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068e0,
];
const THETA13: f64 = 5.371920351148152;

fn scale(m: &CMatrix, c: f64) -> CMatrix {
    m.map(|z| z * c)
}

/// Matrix exponential by scaling and squaring with Padé approximants.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let ident = CMatrix::identity(n, n);
    let norm = one_norm(a);
    if norm == 0.0 {
        return ident;
    }

    let low: [(&[f64], f64); 4] = [
        (&PADE3, THETA[0]),
        (&PADE5, THETA[1]),
        (&PADE7, THETA[2]),
        (&PADE9, THETA[3]),
    ];
    for (coeffs, theta) in low {
        if norm <= theta {
            let a2 = a * a;
            let mut u = scale(&ident, coeffs[1]);
            let mut v = scale(&ident, coeffs[0]);
            let mut pow = ident.clone();
            for k in 1..coeffs.len() / 2 {
                pow = &pow * &a2;
                u += scale(&pow, coeffs[2 * k + 1]);
                v += scale(&pow, coeffs[2 * k]);
            }
            let u = a * u;
            return pade_solve(&u, &v);
        }
    }

    let s = ((norm / THETA13).log2().ceil()).max(0.0) as i32;
    let a = scale(a, 0.5_f64.powi(s));
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = scale(&a6, b[13]) + scale(&a4, b[11]) + scale(&a2, b[9]);
    let u = &a
        * (&a6 * inner_u
            + scale(&a6, b[7])
            + scale(&a4, b[5])
            + scale(&a2, b[3])
            + scale(&ident, b[1]));
    let inner_v = scale(&a6, b[12]) + scale(&a4, b[10]) + scale(&a2, b[8]);
    let v = &a6 * inner_v + scale(&a6, b[6]) + scale(&a4, b[4]) + scale(&a2, b[2]) + scale(&ident, b[0]);
    let mut r = pade_solve(&u, &v);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn pade_solve(u: &CMatrix, v: &CMatrix) -> CMatrix {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .expect("Padé denominator is singular; generator norm out of range")
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let herm = hermitian_part(m);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let n = m.nrows();
    let mut vecs = CMatrix::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[src]);
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    let eig = SymmetricEigen::new(hermitian_part(m));
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Square root of a positive semidefinite Hermitian matrix; negative
/// eigenvalues from rounding are clipped to zero.
pub fn sqrtm_psd(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = eigh(m);
    let d = DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| C64::new(l.max(0.0).sqrt(), 0.0)),
    );
    let scaled = CMatrix::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] * d[j]);
    &scaled * vecs.adjoint()
}

/// Compressed-row apply kernel for banded operators.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    pub fn from_dense(m: &CMatrix) -> Self {
        let dim = m.nrows();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..dim {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != ZERO {
                    col_idx.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            dim,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `y = A x`.
    pub fn mul_slice(&self, x: &[C64], y: &mut [C64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &CVector) -> CVector {
        let mut y = CVector::zeros(self.dim);
        self.mul_slice(x.as_slice(), y.as_mut_slice());
        y
    }

    /// `out = A X` for a dense square `X`, column by column.
    pub fn mul_dense_into(&self, x: &CMatrix, out: &mut CMatrix) {
        let n = self.dim;
        debug_assert_eq!(x.nrows(), n);
        let xs = x.as_slice();
        let body = |(j, col): (usize, &mut [C64])| {
            self.mul_slice(&xs[j * n..(j + 1) * n], col);
        };
        if n >= PAR_MIN_DIM {
            exec::par_chunks_mut(out.as_mut_slice(), n, body);
        } else {
            out.as_mut_slice().chunks_mut(n).enumerate().for_each(body);
        }
    }

    pub fn mul_dense(&self, x: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, x.ncols());
        self.mul_dense_into(x, &mut out);
        out
    }
}

/// Solves `A X + X A^† - mu X = C` for `X`, given the Schur form
/// `A = Q T Q^†` (T upper triangular).
pub struct SylvesterSolver {
    q: CMatrix,
    t: CMatrix,
    mu: f64,
}

impl SylvesterSolver {
    pub fn new(a: &CMatrix, mu: f64) -> Self {
        let (q, t) = nalgebra::Schur::new(a.clone()).unpack();
        Self { q, t, mu }
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Right eigenvector of `A` belonging to the eigenvalue with the largest
    /// real part (the slowest-decaying no-jump mode).
    pub fn slowest_mode(&self) -> CVector {
        let n = self.t.nrows();
        let k = (0..n)
            .max_by(|&i, &j| self.t[(i, i)].re.total_cmp(&self.t[(j, j)].re))
            .unwrap_or(0);
        let lambda = self.t[(k, k)];
        let mut y = CVector::zeros(n);
        y[k] = ONE;
        for i in (0..k).rev() {
            let mut acc = ZERO;
            for m in i + 1..=k {
                acc += self.t[(i, m)] * y[m];
            }
            let mut denom = self.t[(i, i)] - lambda;
            if denom.norm() < 1e-14 {
                denom = C64::new(1e-14, 0.0);
            }
            y[i] = -acc / denom;
        }
        let v = &self.q * y;
        let norm = v.norm();
        v / C64::new(norm, 0.0)
    }

    pub fn solve(&self, c: &CMatrix) -> CMatrix {
        let n = self.t.nrows();
        let qh = self.q.adjoint();
        let cp = &qh * c * &self.q;
        let t = &self.t;
        let mut y = CMatrix::zeros(n, n);
        let mut rhs = vec![ZERO; n];
        // Column j of Y couples to columns k > j through conj(T[j, k]); each
        // column is then an upper-triangular solve with T + conj(T[j, j]) − μ.
        for j in (0..n).rev() {
            rhs.copy_from_slice(cp.column(j).as_slice());
            for k in j + 1..n {
                let w = t[(j, k)].conj();
                if w != ZERO {
                    let yk = y.column(k);
                    for (r, v) in rhs.iter_mut().zip(yk.iter()) {
                        *r -= w * v;
                    }
                }
            }
            let shift = t[(j, j)].conj() - C64::new(self.mu, 0.0);
            let mut col = y.column_mut(j);
            for i in (0..n).rev() {
                let xi = rhs[i] / (t[(i, i)] + shift);
                col[i] = xi;
                let tcol = t.column(i);
                for k in 0..i {
                    rhs[k] -= tcol[k] * xi;
                }
            }
        }
        &self.q * y * qh
    }
}

/// Smallest eigenpair of a real symmetric tridiagonal matrix with diagonal
/// `d` and off-diagonal `e` (`e.len() == d.len() - 1`).
///
/// Sturm-sequence bisection for the eigenvalue, then inverse iteration with
/// a partially pivoted tridiagonal factorisation for the vector.
pub fn tridiagonal_smallest(d: &[f64], e: &[f64]) -> (f64, Vec<f64>) {
    let n = d.len();
    assert!(n >= 1 && e.len() + 1 == n);
    if n == 1 {
        return (d[0], vec![1.0]);
    }
    // Gershgorin bounds.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 }
            + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut q = d[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..n {
            let qq = if q == 0.0 { f64::EPSILON * scale } else { q };
            q = d[i] - x - e[i - 1] * e[i - 1] / qq;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * scale {
            break;
        }
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);

    // Inverse iteration on (T - lambda - delta).
    let shift = lambda - 4.0 * f64::EPSILON * scale;
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i * 7919) % 13) as f64).collect();
    let factor = TridiagLu::new(d, e, shift, scale);
    for _ in 0..4 {
        let mut y = factor.solve(&x);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        y.iter_mut().for_each(|v| *v /= norm);
        x = y;
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    // Rayleigh quotient for the reported eigenvalue.
    let mut rq = 0.0;
    for i in 0..n {
        let mut tx = d[i] * x[i];
        if i > 0 {
            tx += e[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            tx += e[i] * x[i + 1];
        }
        rq += x[i] * tx;
    }
    (rq, x)
}

/// LU with partial pivoting of `T - shift` for tridiagonal `T`.
struct TridiagLu {
    // Upper factor has up to two super-diagonals after pivoting.
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    l: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn new(d: &[f64], e: &[f64], shift: f64, scale: f64) -> Self {
        let n = d.len();
        let tiny = f64::EPSILON * scale;
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut l = vec![0.0; n];
        let mut swapped = vec![false; n];
        // Working rows: current row (a, b, c) for columns i, i+1, i+2.
        let mut a = d[0] - shift;
        let mut b = if n > 1 { e[0] } else { 0.0 };
        let mut c = 0.0;
        for i in 0..n {
            if i + 1 == n {
                u0[i] = if a.abs() < tiny { tiny } else { a };
                break;
            }
            // Next row entries at columns i, i+1, i+2.
            let na = e[i];
            let nb = d[i + 1] - shift;
            let nc = if i + 2 < n { e[i + 1] } else { 0.0 };
            if na.abs() > a.abs() {
                swapped[i] = true;
                u0[i] = na;
                u1[i] = nb;
                u2[i] = nc;
                let m = a / na;
                l[i] = m;
                a = b - m * nb;
                b = c - m * nc;
            } else {
                let piv = if a.abs() < tiny { tiny } else { a };
                u0[i] = piv;
                u1[i] = b;
                u2[i] = c;
                let m = na / piv;
                l[i] = m;
                a = nb - m * b;
                b = nc - m * c;
            }
            c = 0.0;
        }
        Self {
            u0,
            u1,
            u2,
            l,
            swapped,
        }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut y = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                y.swap(i, i + 1);
            }
            y[i + 1] -= self.l[i] * y[i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = y[i];
            if i + 1 < n {
                acc -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                acc -= self.u2[i] * x[i + 2];
            }
            x[i] = acc / self.u0[i];
        }
        x
    }
}
