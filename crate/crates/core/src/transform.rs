//! Change of variables `v = h(u)` with `h'(u) = sqrt(1 + u^2)`, its inverse
//! `u = f(v)`, the Young function `L(v) = f(v)^2` and the Orlicz norm built
//! on it.
//!
//! Everything else in the crate treats these evaluators as exact, so the
//! inverse is computed by a Newton iteration that is certified against the
//! forward map rather than by interpolation.

use crate::discretize::{DiscreteField, NeumaierSum};
use crate::error::{Error, Result};
use crate::problem::Potential;

/// Below this magnitude `f(v) = v` to within one ulp.
const LINEAR_REGIME: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformCalculus {
    pub newton_tol: f64,
    pub max_newton_iters: usize,
}

impl Default for TransformCalculus {
    fn default() -> Self {
        Self {
            newton_tol: 1e-14,
            max_newton_iters: 60,
        }
    }
}

/// Result of the Orlicz-norm minimization over the scaling parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrliczNorm {
    pub value: f64,
    /// Minimizing scale. `None` when the infimum is approached as the scale
    /// goes to zero (the weighted integral vanishes identically).
    pub zeta: Option<f64>,
}

fn check_finite(x: f64, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what}: non-finite argument {x}")))
    }
}

/// `1 / sqrt(1 + u^2)` without overflow for large `u`.
fn inv_sqrt1p_sq(u: f64) -> f64 {
    1.0 / u.hypot(1.0)
}

impl TransformCalculus {
    pub fn new(newton_tol: f64, max_newton_iters: usize) -> Self {
        Self {
            newton_tol,
            max_newton_iters,
        }
    }

    /// `h(u) = u sqrt(1+u^2)/2 + asinh(u)/2`, odd in `u`.
    pub fn h_forward(&self, u: f64) -> Result<f64> {
        check_finite(u, "h_forward")?;
        let s = u.abs();
        let value = 0.5 * s * s.hypot(1.0) + 0.5 * s.asinh();
        if !value.is_finite() {
            return Err(Error::Numerical(format!("h_forward({u}) overflows")));
        }
        Ok(value.copysign(u))
    }

    /// `h'(u) = sqrt(1 + u^2)`.
    pub fn h_prime(&self, u: f64) -> Result<f64> {
        check_finite(u, "h_prime")?;
        Ok(u.hypot(1.0))
    }

    /// Inverse of [`h_forward`](Self::h_forward).
    pub fn f_inverse(&self, v: f64) -> Result<f64> {
        check_finite(v, "f_inverse")?;
        let s = v.abs();
        if s < LINEAR_REGIME {
            return Ok(v);
        }
        // Both seeds lie above the root and h is convex on [0, inf), so the
        // iterates decrease monotonically.
        let mut u = if s < 1.0 {
            s
        } else {
            std::f64::consts::SQRT_2 * s.sqrt()
        };
        let allowed = self.newton_tol * (1.0 + s) / s;
        for _ in 0..self.max_newton_iters {
            // h(u)/s - 1, arranged so that no intermediate overflows.
            let rel = (0.5 * u / s) * u.hypot(1.0) + 0.5 * u.asinh() / s - 1.0;
            if rel.abs() <= allowed {
                return Ok(u.copysign(v));
            }
            let next = u - rel * (s * inv_sqrt1p_sq(u));
            if !(next < u) || next <= 0.0 {
                // No further progress is representable; accept if close.
                if rel.abs() <= 4.0 * allowed {
                    return Ok(u.copysign(v));
                }
                break;
            }
            u = next;
        }
        Err(Error::Numerical(format!(
            "f_inverse({v}) did not converge in {} Newton steps",
            self.max_newton_iters
        )))
    }

    /// `f'(v) = 1 / sqrt(1 + f(v)^2)`.
    pub fn f_prime(&self, v: f64) -> Result<f64> {
        Ok(inv_sqrt1p_sq(self.f_inverse(v)?))
    }

    /// `L(v) = f(v)^2`.
    pub fn l_value(&self, v: f64) -> Result<f64> {
        let u = self.f_inverse(v)?;
        Ok(u * u)
    }

    /// `L'(v) = 2 f(v) f'(v)`.
    pub fn l_prime(&self, v: f64) -> Result<f64> {
        let u = self.f_inverse(v)?;
        Ok(2.0 * u * inv_sqrt1p_sq(u))
    }

    /// `L''(v) = 2 / (1 + f(v)^2)^2`.
    pub fn l_second(&self, v: f64) -> Result<f64> {
        let fp = self.f_prime(v)?;
        Ok(2.0 * fp.powi(4))
    }

    /// `(f(v), f'(v))` in one inversion.
    pub fn f_and_prime(&self, v: f64) -> Result<(f64, f64)> {
        let u = self.f_inverse(v)?;
        Ok((u, inv_sqrt1p_sq(u)))
    }

    /// `inf_{z>0} z (1 + int V L(v/z))` on the grid carried by `field`.
    pub fn orlicz_norm(&self, field: &DiscreteField, potential: &Potential) -> Result<OrliczNorm> {
        let grid = field.grid();
        let active: Vec<(f64, f64)> = grid
            .nodes()
            .iter()
            .zip(grid.weights())
            .zip(field.values())
            .filter_map(|((&r, &w), &v)| {
                let weight = w * potential.value(r);
                (weight > 0.0 && v != 0.0).then_some((weight, v))
            })
            .collect();
        if active.is_empty() {
            return Ok(OrliczNorm {
                value: 0.0,
                zeta: None,
            });
        }

        let objective = |log_zeta: f64| -> Result<f64> {
            let zeta = log_zeta.exp();
            let mut acc = NeumaierSum::default();
            for &(weight, v) in &active {
                acc.add(weight * self.l_value(v / zeta)?);
            }
            Ok(zeta * (1.0 + acc.total()))
        };

        let mut lo = 1e-8f64.ln();
        let mut hi = 1e8f64.ln();
        for attempt in 0..2 {
            let (x, fx) = golden_section(&objective, lo, hi, 1e-10)?;
            let margin = 1e-6 * (hi - lo);
            if x - lo > margin && hi - x > margin {
                return Ok(OrliczNorm {
                    value: fx,
                    zeta: Some(x.exp()),
                });
            }
            if attempt == 0 {
                lo -= 4.0 * std::f64::consts::LN_10;
                hi += 4.0 * std::f64::consts::LN_10;
            }
        }
        Err(Error::Numerical(
            "orlicz_norm: no interior minimum on the widened scale bracket".into(),
        ))
    }
}

/// Golden-section search for the minimum of a unimodal function on
/// `[lo, hi]`, stopping when the bracket is below `rel_tol` in the
/// exponentiated variable (the argument is a logarithm).
fn golden_section<F>(f: &F, mut lo: f64, mut hi: f64, rel_tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    // In log space a width of rel_tol is a relative width of rel_tol.
    while hi - lo > rel_tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2)?;
        }
    }
    let candidates = [(x1, f1), (x2, f2), (lo, f(lo)?), (hi, f(hi)?)];
    let best = candidates
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tc() -> TransformCalculus {
        TransformCalculus::default()
    }

    #[test]
    fn forward_values() {
        assert_eq!(tc().h_forward(0.0).unwrap(), 0.0);
        // sqrt(2)/2 + ln(1 + sqrt(2))/2
        let expected = 0.5 * 2f64.sqrt() + 0.5 * (1.0 + 2f64.sqrt()).ln();
        assert_relative_eq!(expected, 1.147793574696319, max_relative = 1e-15);
        assert_relative_eq!(tc().h_forward(1.0).unwrap(), expected, max_relative = 1e-15);
        assert_relative_eq!(
            tc().h_forward(-1.0).unwrap(),
            -expected,
            max_relative = 1e-15
        );
    }

    #[test]
    fn inverse_values() {
        assert_eq!(tc().f_inverse(0.0).unwrap(), 0.0);
        assert!((tc().f_inverse(1.147793574696319).unwrap() - 1.0).abs() < 1e-12);
        let u = tc().f_inverse(1e6).unwrap();
        assert!((u / (2e6f64).sqrt() - 1.0).abs() < 1e-4);
        let back = tc().h_forward(u).unwrap();
        assert!((back - 1e6).abs() <= 1e-14 * (1.0 + 1e6));
    }

    #[test]
    fn derivative_values() {
        assert_eq!(tc().f_prime(0.0).unwrap(), 1.0);
        assert_eq!(tc().l_second(0.0).unwrap(), 2.0);
        assert!((tc().l_value(1.147793574696319).unwrap() - 1.0).abs() < 1e-12);
        let v = 3.7;
        let (u, fp) = tc().f_and_prime(v).unwrap();
        assert_relative_eq!(tc().l_prime(v).unwrap(), 2.0 * u * fp, max_relative = 1e-15);
    }

    #[test]
    fn non_finite_is_domain_error() {
        assert!(matches!(tc().h_forward(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(
            tc().f_inverse(f64::INFINITY),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            tc().l_value(f64::NEG_INFINITY),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn inverse_converges_across_magnitudes() {
        for &v in &[1e-300, 1e-9, 1e-7, 0.3, 7.0, 1e20, 1e150, 1e300, f64::MAX] {
            for s in [v, -v] {
                let u = tc().f_inverse(s).unwrap();
                assert!(u.is_finite());
                assert_eq!(u.signum(), s.signum());
                if let Ok(back) = tc().h_forward(u) {
                    assert!((back - s).abs() <= 1e-14 * (1.0 + s.abs()) * 4.0, "v={s}");
                }
            }
        }
    }

    #[test]
    fn derivative_identity() {
        for i in 0..200 {
            let v = -50.0 + 0.5 * i as f64;
            let (u, fp) = tc().f_and_prime(v).unwrap();
            assert!((fp * (1.0 + u * u).sqrt() - 1.0).abs() < 1e-12);
        }
    }
}
