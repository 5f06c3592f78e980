use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};

use super::dist::{coherent_table, dist_displaced_squeezed_table, squeezed_table};
use super::PopulationEstimate;
use crate::error::{Error, Result};

/// Floor added to population variances before weighting.
const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateFamily {
    Coherent,
    Squeezed,
    DisplacedSqueezed,
}

impl StateFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "coherent" => Ok(StateFamily::Coherent),
            "squeezed" => Ok(StateFamily::Squeezed),
            "displaced-squeezed" | "displaced_squeezed" => Ok(StateFamily::DisplacedSqueezed),
            other => Err(Error::param(format!("unknown state family `{other}`"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            StateFamily::Coherent => "coherent",
            StateFamily::Squeezed => "squeezed",
            StateFamily::DisplacedSqueezed => "displaced-squeezed",
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            StateFamily::Coherent => &["alpha_mag"],
            StateFamily::Squeezed => &["r"],
            StateFamily::DisplacedSqueezed => &["alpha_mag", "r", "theta"],
        }
    }

    /// Family weights over `0..len`, renormalized to the window like the
    /// fitted populations.
    fn table(&self, len: usize, x: &[f64]) -> Result<Vec<f64>> {
        let mut t = match self {
            StateFamily::Coherent => coherent_table(len, x[0]),
            StateFamily::Squeezed => squeezed_table(len, x[0]),
            StateFamily::DisplacedSqueezed => dist_displaced_squeezed_table(len, x[1].max(1e-6), x[0], x[2])?,
        };
        let total: f64 = t.iter().sum();
        if total > 0.0 {
            t.iter_mut().for_each(|v| *v /= total);
        }
        Ok(t)
    }

    fn clamp(&self, x: &mut [f64]) {
        match self {
            StateFamily::Coherent | StateFamily::Squeezed => x[0] = x[0].max(0.0),
            StateFamily::DisplacedSqueezed => {
                x[0] = x[0].max(0.0);
                x[1] = x[1].max(1e-6);
            }
        }
    }
}

/// Parameters follow [`StateFamily::param_names`]: `|α|`, `r` and
/// `θ = arg α − φ_s/2` reduced to `[0, π/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFamilyFit {
    pub family: StateFamily,
    pub params: Vec<f64>,
    /// Weighted sum of squared residuals.
    pub residual: f64,
    pub param_errors: Vec<f64>,
}

impl StateFamilyFit {
    pub fn alpha_mag(&self) -> Option<f64> {
        match self.family {
            StateFamily::Coherent | StateFamily::DisplacedSqueezed => Some(self.params[0]),
            StateFamily::Squeezed => None,
        }
    }

    pub fn r(&self) -> Option<f64> {
        match self.family {
            StateFamily::Squeezed => Some(self.params[0]),
            StateFamily::DisplacedSqueezed => Some(self.params[1]),
            StateFamily::Coherent => None,
        }
    }

    pub fn theta(&self) -> Option<f64> {
        (self.family == StateFamily::DisplacedSqueezed).then(|| self.params[2])
    }
}

/// The displaced-squeezed weights are π-periodic and even in θ.
fn canonical_theta(theta: f64) -> f64 {
    let t = theta.rem_euclid(std::f64::consts::PI);
    if t > FRAC_PI_2 {
        std::f64::consts::PI - t
    } else {
        t
    }
}

struct Problem<'a> {
    family: StateFamily,
    p: &'a [f64],
    w: Vec<f64>,
}

impl Problem<'_> {
    fn residuals(&self, x: &[f64]) -> Result<DVector<f64>> {
        let model = self.family.table(self.p.len(), x)?;
        Ok(DVector::from_iterator(
            self.p.len(),
            model.iter().zip(self.p).zip(&self.w).map(|((m, p), w)| w.sqrt() * (m - p)),
        ))
    }

    /// Central-difference Jacobian of the unweighted model.
    fn model_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.p.len();
        let mut j = DMatrix::zeros(n, x.len());
        for k in 0..x.len() {
            let h = 1e-6 * x[k].abs().max(1e-3);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += h;
            xm[k] -= h;
            let mut lo = xm[k];
            if self.family == StateFamily::DisplacedSqueezed && k == 1 {
                lo = lo.max(1e-6);
            }
            if k < 2 {
                lo = lo.max(0.0);
                xm[k] = lo;
            }
            let fp = self.family.table(n, &xp)?;
            let fm = self.family.table(n, &xm)?;
            for i in 0..n {
                j[(i, k)] = (fp[i] - fm[i]) / (xp[k] - xm[k]);
            }
        }
        Ok(j)
    }

    fn lm(&self, mut x: Vec<f64>) -> Result<(Vec<f64>, f64)> {
        let mut r = self.residuals(&x)?;
        let mut cost = r.norm_squared();
        let mut lambda = 1e-3;
        for _ in 0..300 {
            let j = self.model_jacobian(&x)?;
            let jw = DMatrix::from_fn(j.nrows(), j.ncols(), |i, k| self.w[i].sqrt() * j[(i, k)]);
            let jtj = jw.transpose() * &jw;
            let g = jw.transpose() * &r;
            let mut improved = false;
            for _ in 0..30 {
                let mut a = jtj.clone();
                for d in 0..x.len() {
                    a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
                }
                let Some(step) = a.lu().solve(&(-&g)) else {
                    lambda *= 10.0;
                    continue;
                };
                let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                self.family.clamp(&mut trial);
                let rt = self.residuals(&trial)?;
                let c = rt.norm_squared();
                if c <= cost {
                    let done = cost - c <= 1e-15 * cost.max(1e-300) || step.amax() < 1e-14;
                    x = trial;
                    r = rt;
                    cost = c;
                    lambda = (lambda * 0.3).max(1e-15);
                    improved = !done;
                    break;
                }
                lambda *= 10.0;
            }
            if !improved || cost == 0.0 {
                break;
            }
        }
        Ok((x, cost))
    }
}

/// Population covariance with every variance floored. Populations pinned
/// at zero by the simplex carry no variance from the fit, so they take the
/// median variance of the free ones.
fn effective_covariance(est: &PopulationEstimate) -> DMatrix<f64> {
    let mut cov = est.p_covariance();
    let k = cov.nrows();
    let mut free: Vec<f64> = (0..k).map(|i| cov[(i, i)]).filter(|v| *v > 0.0).collect();
    free.sort_by(f64::total_cmp);
    let pinned = free.get(free.len() / 2).copied().unwrap_or(0.0);
    for i in 0..k {
        let v = cov[(i, i)];
        cov[(i, i)] = if v > 0.0 { v } else { pinned } + VARIANCE_FLOOR;
    }
    cov
}

/// Weighted least-squares fit of fitted populations to one state family.
///
/// Weights are the inverse floored population variances.
/// Parameter errors propagate the full population covariance through the
/// weighted normal equations (sandwich form). A displaced-squeezed fit
/// whose squeezing collapses below 10⁻³ returns [`Error::Advisory`].
pub fn fit_state_family(est: &PopulationEstimate, family: StateFamily) -> Result<StateFamilyFit> {
    let p = &est.p;
    if p.is_empty() {
        return Err(Error::param("no populations to fit"));
    }
    let cov = effective_covariance(est);
    let w: Vec<f64> = (0..p.len()).map(|i| 1.0 / cov[(i, i)]).collect();
    let nbar: f64 = p.iter().enumerate().map(|(n, v)| n as f64 * v).sum();
    let prob = Problem { family, p, w };
    let starts: Vec<Vec<f64>> = match family {
        StateFamily::Coherent => vec![vec![nbar.sqrt()]],
        StateFamily::Squeezed => vec![vec![nbar.sqrt().asinh().max(1e-3)]],
        StateFamily::DisplacedSqueezed => {
            let mut s = Vec::new();
            for frac in [0.1, 0.3, 0.6] {
                let r = (frac * nbar).sqrt().asinh().max(0.05);
                let a = (nbar - r.sinh().powi(2)).max(0.0).sqrt();
                for th in [0.0, 0.4, 0.8, 1.2, FRAC_PI_2] {
                    s.push(vec![a, r, th]);
                }
            }
            s
        }
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for x0 in starts {
        let (x, c) = prob.lm(x0)?;
        if best.as_ref().is_none_or(|b| c < b.1) {
            best = Some((x, c));
        }
    }
    let (mut x, residual) = best.expect("at least one start");
    if family == StateFamily::DisplacedSqueezed {
        x[2] = canonical_theta(x[2]);
        if x[1] < 1e-3 {
            return Err(Error::Advisory(format!(
                "displaced-squeezed fit gives r = {:.2e}; use the coherent family",
                x[1]
            )));
        }
    }

    let j = prob.model_jacobian(&x)?;
    let wm = DMatrix::from_diagonal(&DVector::from_vec(prob.w.clone()));
    let bread = j.transpose() * &wm * &j;
    let bread_inv = bread
        .clone()
        .pseudo_inverse(1e-14 * bread.amax().max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DMatrix::zeros(x.len(), x.len()));
    let meat = j.transpose() * &wm * &cov * &wm * &j;
    let sandwich = &bread_inv * meat * &bread_inv;
    let param_errors = (0..x.len()).map(|i| sandwich[(i, i)].max(0.0).sqrt()).collect();
    Ok(StateFamilyFit {
        family,
        params: x,
        residual,
        param_errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exact(p: Vec<f64>) -> PopulationEstimate {
        let s: f64 = p.iter().sum();
        PopulationEstimate::exact(p.iter().map(|v| v / s).collect(), 0.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn coherent_self_consistency() {
        let f = fit_state_family(&exact(coherent_table(41, 2.0)), StateFamily::Coherent).unwrap();
        assert_relative_eq!(f.params[0], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn squeezed_self_consistency() {
        let f = fit_state_family(&exact(squeezed_table(41, 1.45)), StateFamily::Squeezed).unwrap();
        assert_relative_eq!(f.params[0], 1.45, epsilon = 1e-8);
        assert_relative_eq!(20.0 * std::f64::consts::LOG10_E * f.params[0], 12.59, epsilon = 0.005);
    }

    #[test]
    fn displaced_squeezed_self_consistency() {
        let p = dist_displaced_squeezed_table(41, 0.63, 2.2, 0.42).unwrap();
        let f = fit_state_family(&exact(p), StateFamily::DisplacedSqueezed).unwrap();
        assert_relative_eq!(f.params[0], 2.2, epsilon = 1e-6);
        assert_relative_eq!(f.params[1], 0.63, epsilon = 1e-6);
        assert_relative_eq!(f.params[2], 0.42, epsilon = 1e-6);
    }

    #[test]
    fn coherent_data_in_displaced_squeezed_family_is_advisory() {
        let r = fit_state_family(&exact(coherent_table(30, 1.5)), StateFamily::DisplacedSqueezed);
        assert!(matches!(r, Err(Error::Advisory(_))), "{r:?}");
    }

    #[test]
    fn theta_canonicalization() {
        assert_relative_eq!(canonical_theta(-0.42), 0.42, epsilon = 1e-15);
        assert_relative_eq!(canonical_theta(std::f64::consts::PI - 0.42), 0.42, epsilon = 1e-14);
        assert_relative_eq!(canonical_theta(std::f64::consts::PI + 0.42), 0.42, epsilon = 1e-14);
    }
}
