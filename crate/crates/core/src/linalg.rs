//! Tridiagonal systems. The Hessian of the radial energy couples only
//! neighbouring nodes, so everything the solver factors is tridiagonal.

#[derive(Clone, Debug, PartialEq)]
pub struct Tridiagonal {
    /// Sub-diagonal, `lower[i]` couples rows `i + 1` and `i`.
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    /// Super-diagonal, `upper[i]` couples rows `i` and `i + 1`.
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n.saturating_sub(1)],
            diag: vec![0.0; n],
            upper: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.upper[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Gaussian elimination with partial pivoting (the `gtsv` scheme).
    /// Returns `None` for an exactly or numerically singular matrix.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        if n == 0 {
            return Some(Vec::new());
        }
        let scale = self
            .diag
            .iter()
            .chain(&self.lower)
            .chain(&self.upper)
            .fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            return None;
        }
        let tiny = scale * f64::EPSILON * n as f64 * 1e-3;

        let mut d = self.diag.clone();
        let mut du = self.upper.clone();
        let mut dl = self.lower.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut b = rhs.to_vec();

        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i].abs() <= tiny {
                    return None;
                }
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                b[i + 1] -= fact * b[i];
                dl[i] = 0.0;
            } else {
                // swap rows i and i+1
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let tmp = d[i + 1];
                d[i + 1] = du[i] - fact * tmp;
                if i + 1 < n - 1 {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du2[i];
                }
                du[i] = tmp;
                b.swap(i, i + 1);
                b[i + 1] -= fact * b[i];
            }
        }
        if d[n - 1].abs() <= tiny {
            return None;
        }

        let mut x = b;
        x[n - 1] /= d[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_system(n: usize, seed: u64) -> Tridiagonal {
        // small LCG keeps the test free of extra dependencies
        let mut state = seed;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut t = Tridiagonal::zeros(n);
        for i in 0..n {
            t.diag[i] = next();
        }
        for i in 0..n - 1 {
            t.lower[i] = next();
            t.upper[i] = next();
        }
        t
    }

    #[test]
    fn solves_indefinite_systems() {
        for seed in 0..20 {
            let t = random_system(50, seed);
            let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
            let b = t.matvec(&x);
            let y = t.solve(&b).unwrap();
            let err = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-8, "seed {seed}: {err}");
        }
    }

    #[test]
    fn zero_pivot_needs_swap() {
        let t = Tridiagonal {
            lower: vec![1.0],
            diag: vec![0.0, 1.0],
            upper: vec![1.0],
        };
        let y = t.solve(&[2.0, 3.0]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-15 && (y[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_is_none() {
        let t = Tridiagonal {
            lower: vec![1.0],
            diag: vec![1.0, 1.0],
            upper: vec![1.0],
        };
        assert!(t.solve(&[1.0, 1.0]).is_none());
    }
}
