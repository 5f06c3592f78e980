//! Dormand–Prince 5(4) integrator over dense complex matrices.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-8,
            max_steps: 5_000_000,
        }
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Autonomous linear-or-not right-hand side `dy/dt = f(y)`.
pub trait Rhs {
    fn eval(&self, y: &CMatrix, out: &mut CMatrix);
}

impl<F: Fn(&CMatrix, &mut CMatrix)> Rhs for F {
    fn eval(&self, y: &CMatrix, out: &mut CMatrix) {
        self(y, out)
    }
}

fn lin(out: &mut CMatrix, y: &CMatrix, h: f64, terms: &[(f64, &CMatrix)]) {
    let o = out.as_mut_slice();
    o.copy_from_slice(y.as_slice());
    for &(c, k) in terms {
        if c == 0.0 {
            continue;
        }
        let hc = h * c;
        for (oi, ki) in o.iter_mut().zip(k.as_slice()) {
            *oi += ki * hc;
        }
    }
}

/// Adaptive integrator with first-same-as-last reuse and workspace buffers.
pub struct DormandPrince<'a, F: Rhs> {
    f: &'a F,
    tol: Tolerances,
    k: [CMatrix; 7],
    tmp: CMatrix,
    next: CMatrix,
    fsal_valid: bool,
    h: f64,
    last_h: f64,
    pub steps: usize,
    pub rejected: usize,
}

impl<'a, F: Rhs> DormandPrince<'a, F> {
    pub fn new(f: &'a F, shape: (usize, usize), tol: Tolerances) -> Self {
        let z = || CMatrix::zeros(shape.0, shape.1);
        Self {
            f,
            tol,
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
            next: z(),
            fsal_valid: false,
            h: 0.0,
            last_h: 0.0,
            steps: 0,
            rejected: 0,
        }
    }

    /// Forget the cached derivative (after the state was modified externally).
    pub fn invalidate(&mut self) {
        self.fsal_valid = false;
    }

    fn initial_step(&mut self, y: &CMatrix, span: f64) -> f64 {
        let scale = |v: &C64| self.tol.atol + self.tol.rtol * v.norm();
        let n = y.len() as f64;
        let d0 = (y.iter().map(|v| (v.norm() / scale(v)).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (self.k[0]
            .iter()
            .zip(y.iter())
            .map(|(k, v)| (k.norm() / scale(v)).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
        h.min(span)
    }

    /// One attempted step of size `h` from `y`; writes the candidate into
    /// `self.next` and returns the scaled error norm.
    fn attempt(&mut self, y: &CMatrix, h: f64) -> f64 {
        let f = self.f;
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        lin(&mut self.tmp, y, h, &[(A21, k1)]);
        f.eval(&self.tmp, k2);
        lin(&mut self.tmp, y, h, &[(A31, k1), (A32, k2)]);
        f.eval(&self.tmp, k3);
        lin(&mut self.tmp, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
        f.eval(&self.tmp, k4);
        lin(&mut self.tmp, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
        f.eval(&self.tmp, k5);
        lin(&mut self.tmp, y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
        f.eval(&self.tmp, k6);
        lin(&mut self.next, y, h, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
        f.eval(&self.next, k7);
        let (atol, rtol) = (self.tol.atol, self.tol.rtol);
        let mut acc = 0.0;
        let slices = (
            k1.as_slice(),
            k3.as_slice(),
            k4.as_slice(),
            k5.as_slice(),
            k6.as_slice(),
            k7.as_slice(),
        );
        for i in 0..y.len() {
            let e = (slices.0[i] * E1
                + slices.1[i] * E3
                + slices.2[i] * E4
                + slices.3[i] * E5
                + slices.4[i] * E6
                + slices.5[i] * E7)
                * h;
            let sc = atol + rtol * y.as_slice()[i].norm().max(self.next.as_slice()[i].norm());
            acc += (e.norm() / sc).powi(2);
        }
        (acc / y.len() as f64).sqrt()
    }

    /// Advances `y` from `t` to exactly `t_end`.
    pub fn advance(&mut self, y: &mut CMatrix, t: &mut f64, t_end: f64) -> Result<()> {
        while *t < t_end {
            self.step(y, t, t_end)?;
        }
        Ok(())
    }

    /// Takes one accepted step towards `t_end` (never past it).
    pub fn step(&mut self, y: &mut CMatrix, t: &mut f64, t_end: f64) -> Result<()> {
        let span = t_end - *t;
        if span <= 0.0 {
            return Ok(());
        }
        if !self.fsal_valid {
            let (f, k0) = (self.f, &mut self.k[0]);
            f.eval(y, k0);
            self.fsal_valid = true;
        }
        if self.h <= 0.0 {
            self.h = self.initial_step(y, span);
        }
        loop {
            if self.steps >= self.tol.max_steps {
                return Err(Error::StepSize {
                    t: *t,
                    reason: format!("exceeded {} steps", self.tol.max_steps),
                });
            }
            let remaining = t_end - *t;
            let last = self.h >= remaining * (1.0 - 1e-12);
            let h = if last { remaining } else { self.h };
            if h <= 1e-15 * t.abs().max(span) {
                return Err(Error::StepSize {
                    t: *t,
                    reason: format!("step size underflow (h={h:e})"),
                });
            }
            let err = self.attempt(y, h);
            self.steps += 1;
            if !err.is_finite() {
                self.h = 0.25 * h;
                self.rejected += 1;
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                std::mem::swap(y, &mut self.next);
                self.k.swap(0, 6);
                *t = if last { t_end } else { *t + h };
                if !last || factor < 1.0 {
                    self.h = h * factor;
                }
                self.last_h = h;
                return Ok(());
            }
            self.rejected += 1;
            self.h = h * factor.min(1.0);
        }
    }

    /// Size of the most recently accepted step.
    pub fn last_step(&self) -> f64 {
        self.last_h
    }

    /// Takes exactly one step of size `h` without error control (used to
    /// locate jump times inside an accepted step).
    pub fn fixed_step(&mut self, y: &CMatrix, h: f64, out: &mut CMatrix) {
        let (f, k0) = (self.f, &mut self.k[0]);
        f.eval(y, k0);
        self.fsal_valid = false;
        self.attempt(y, h);
        out.copy_from(&self.next);
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_decay_and_rotation() {
        let rate = C64::new(-0.7, 3.0);
        let f = move |y: &CMatrix, out: &mut CMatrix| {
            out.copy_from(&(y * rate));
        };
        let mut y = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        let mut dp = DormandPrince::new(&f, (1, 1), Tolerances::default());
        let mut t = 0.0;
        for t_end in [0.5, 1.0, 2.0] {
            dp.advance(&mut y, &mut t, t_end).unwrap();
            let exact = (rate * t_end).exp();
            assert_relative_eq!((y[(0, 0)] - exact).norm(), 0.0, epsilon = 1e-8);
        }
        assert_eq!(t, 2.0);
    }
}
