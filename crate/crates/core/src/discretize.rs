//! Radial grids carrying the N-dimensional measure, nodal fields, the
//! discrete functionals and their weak-form derivatives.
//!
//! Fields are continuous piecewise-linear in `r` (nodal hat basis). The
//! Dirichlet integral is integrated exactly element by element; every
//! other term uses the lumped weights `int phi_i dmu`, so the discrete
//! gradient is the exact derivative of the discrete energy.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Tridiagonal;
use crate::problem::{Potential, ProblemSpec};
use crate::transform::TransformCalculus;

/// Compensated (Neumaier) summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Surface area of the unit sphere in `R^N`, `2 pi^(N/2) / Gamma(N/2)`.
pub fn unit_sphere_area(dimension: usize) -> f64 {
    // Gamma(N/2) by the half-integer recursion
    let (mut gamma, mut x) = if dimension.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (std::f64::consts::PI.sqrt(), 0.5)
    };
    let target = dimension as f64 / 2.0;
    while x < target {
        gamma *= x;
        x += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(target) / gamma
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// 4-point Gauss-Legendre rule on `[0, 1]`.
const GAUSS_NODES: [f64; 4] = [
    0.069_431_844_202_973_71,
    0.330_009_478_207_571_9,
    0.669_990_521_792_428_1,
    0.930_568_155_797_026_3,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.173_927_422_568_726_93,
    0.326_072_577_431_273_07,
    0.326_072_577_431_273_07,
    0.173_927_422_568_726_93,
];

#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    dimension: usize,
    r_max: f64,
    nodes: Vec<f64>,
    /// `int phi_i dmu`, `dmu = sigma r^(N-1) dr`.
    weights: Vec<f64>,
    /// `mu([r_e, r_(e+1)])`.
    element_measure: Vec<f64>,
    sphere_area: f64,
}

/// Builds `M + 1` nodes `r_i = R_max (i/M)^grading` on `[0, R_max]`.
pub fn build_grid(
    dimension: usize,
    r_max: f64,
    intervals: usize,
    grading: f64,
) -> Result<RadialGrid> {
    if dimension < 2 {
        return Err(Error::Validation(format!(
            "dimension must be at least 2, got {dimension}"
        )));
    }
    if intervals < 64 {
        return Err(Error::Validation(format!(
            "grid needs at least 64 intervals, got {intervals}"
        )));
    }
    if !(grading > 0.0 && grading.is_finite()) {
        return Err(Error::Validation(format!(
            "grading exponent must be positive, got {grading}"
        )));
    }
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::Validation(format!(
            "R_max must be positive, got {r_max}"
        )));
    }
    let nodes: Vec<f64> = (0..=intervals)
        .map(|i| {
            if i == intervals {
                r_max
            } else {
                r_max * (i as f64 / intervals as f64).powf(grading)
            }
        })
        .collect();
    Ok(RadialGrid::from_nodes(dimension, nodes))
}

impl RadialGrid {
    fn from_nodes(dimension: usize, nodes: Vec<f64>) -> Self {
        let sphere_area = unit_sphere_area(dimension);
        let m = nodes.len() - 1;
        let mut weights = vec![0.0; m + 1];
        let mut element_measure = vec![0.0; m];
        let power = dimension - 1;
        for e in 0..m {
            let a = nodes[e];
            let h = nodes[e + 1] - a;
            // (a + s h)^(N-1) expanded in s; every term is nonnegative so
            // nothing cancels even when h << a.
            let (mut whole, mut left, mut right) = (0.0, 0.0, 0.0);
            for j in 0..=power {
                let term = binomial(power, j) * a.powi((power - j) as i32) * h.powi(j as i32);
                let j = j as f64;
                whole += term / (j + 1.0);
                left += term / ((j + 1.0) * (j + 2.0));
                right += term / (j + 2.0);
            }
            element_measure[e] = sphere_area * h * whole;
            weights[e] += sphere_area * h * left;
            weights[e + 1] += sphere_area * h * right;
        }
        Self {
            dimension,
            r_max: *nodes.last().expect("non-empty grid"),
            nodes,
            weights,
            element_measure,
            sphere_area,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn element_measure(&self) -> &[f64] {
        &self.element_measure
    }

    /// Number of intervals `M`; there are `M + 1` nodes.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn sphere_area(&self) -> f64 {
        self.sphere_area
    }

    /// Element width.
    pub fn h(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    /// Stiffness `mu(e) / h_e^2`, so that `int |v'|^2 = sum s_e (dv_e)^2`.
    pub fn stiffness(&self, e: usize) -> f64 {
        let h = self.h(e);
        self.element_measure[e] / (h * h)
    }

    /// Lumped quadrature `sum_i w_i f_i`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.nodes.len());
        self.weights
            .iter()
            .zip(values)
            .map(|(w, f)| w * f)
            .collect::<NeumaierSum>()
            .total()
    }

    /// Lumped quadrature of `f(r)` sampled at the nodes.
    pub fn integrate_fn<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&r, w)| w * f(r))
            .collect::<NeumaierSum>()
            .total()
    }

    /// Volume of the ball of radius `R_max`.
    pub fn ball_volume(&self) -> f64 {
        self.sphere_area * self.r_max.powi(self.dimension as i32) / self.dimension as f64
    }

    /// `int_e g(r) dmu` by 4-point Gauss-Legendre, `g` given on `s in [0,1]`.
    fn element_gauss<F: Fn(f64, f64) -> f64>(&self, e: usize, g: F) -> f64 {
        let a = self.nodes[e];
        let h = self.h(e);
        GAUSS_NODES
            .iter()
            .zip(GAUSS_WEIGHTS)
            .map(|(&s, wq)| {
                let r = a + s * h;
                wq * g(s, r) * self.sphere_area * r.powi(self.dimension as i32 - 1) * h
            })
            .sum()
    }
}

/// Nodal values on a [`RadialGrid`] with `v(R_max) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nodes().len() {
            return Err(Error::Validation(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.nodes().len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite field value at node {i}"
            )));
        }
        if *values.last().expect("grid has nodes") != 0.0 {
            return Err(Error::Validation("field must vanish at R_max".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.nodes().len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Samples `f` at the nodes and sets the edge value to zero.
    pub fn from_fn<F: Fn(f64) -> f64>(grid: Arc<RadialGrid>, f: F) -> Result<Self> {
        let mut values: Vec<f64> = grid.nodes().iter().map(|&r| f(r)).collect();
        *values.last_mut().expect("grid has nodes") = 0.0;
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Self::new(self.grid.clone(), values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `u = f(v)` nodewise.
    pub fn to_physical(&self, transform: &TransformCalculus) -> Result<Self> {
        let values = self
            .values
            .iter()
            .map(|&v| transform.f_inverse(v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.grid.clone(), values)
    }

    /// `v = h(u)` nodewise.
    pub fn to_dual(&self, transform: &TransformCalculus) -> Result<Self> {
        let values = self
            .values
            .iter()
            .map(|&u| transform.h_forward(u))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.grid.clone(), values)
    }
}

// ---------------------------------------------------------------------------
// Functionals

/// Which nonlinearity enters the functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Functional {
    /// `H_eps`: truncated `w(x, s)` and its primitive `W`.
    Truncated,
    /// `J_eps`: the original `g` and `G`.
    Original,
}

/// The three integrals the energy is built from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyParts {
    /// `int |v'|^2`
    pub dirichlet: f64,
    /// `int V f(v)^2`
    pub potential: f64,
    /// `int W(x, f(v))` (or `int G(f(v))`)
    pub nonlinear: f64,
}

/// Discrete `eps^2/2 int |v'|^2 + 1/2 int V f(v)^2 - int W(x, f(v))`.
///
/// `eps` enters squared.
#[derive(Clone, Debug)]
pub struct EnergyModel<'a> {
    spec: &'a ProblemSpec,
    grid: &'a RadialGrid,
    eps2: f64,
    functional: Functional,
    transform: TransformCalculus,
    potential: Vec<f64>,
}

impl<'a> EnergyModel<'a> {
    pub fn new(
        spec: &'a ProblemSpec,
        grid: &'a RadialGrid,
        eps: f64,
        functional: Functional,
    ) -> Self {
        let potential = grid
            .nodes()
            .iter()
            .map(|&r| spec.potential().value(r))
            .collect();
        Self {
            spec,
            grid,
            eps2: eps * eps,
            functional,
            transform: TransformCalculus::default(),
            potential,
        }
    }

    pub fn truncated(spec: &'a ProblemSpec, grid: &'a RadialGrid, eps: f64) -> Self {
        Self::new(spec, grid, eps, Functional::Truncated)
    }

    pub fn original(spec: &'a ProblemSpec, grid: &'a RadialGrid, eps: f64) -> Self {
        Self::new(spec, grid, eps, Functional::Original)
    }

    pub fn eps2(&self) -> f64 {
        self.eps2
    }

    pub fn grid(&self) -> &RadialGrid {
        self.grid
    }

    pub fn spec(&self) -> &ProblemSpec {
        self.spec
    }

    pub fn transform(&self) -> &TransformCalculus {
        &self.transform
    }

    pub fn potential_at_nodes(&self) -> &[f64] {
        &self.potential
    }

    fn check_len(&self, v: &[f64]) {
        assert_eq!(v.len(), self.grid.nodes().len(), "field/grid mismatch");
    }

    fn nonlinearity(&self, r: f64, u: f64) -> f64 {
        match self.functional {
            Functional::Truncated => self.spec.truncation().w(r, u),
            Functional::Original => self.spec.nonlinearity().g(u.abs()).copysign(u),
        }
    }

    fn nonlinearity_slope(&self, r: f64, u: f64) -> f64 {
        match self.functional {
            Functional::Truncated => self.spec.truncation().dw(r, u),
            Functional::Original => self.spec.nonlinearity().dg(u.abs()),
        }
    }

    fn primitive(&self, r: f64, u: f64) -> f64 {
        match self.functional {
            Functional::Truncated => self.spec.truncation().primitive(r, u),
            Functional::Original => self.spec.nonlinearity().antiderivative(u.abs()),
        }
    }

    fn finite(x: f64, node: usize, what: &str) -> Result<f64> {
        if x.is_finite() {
            Ok(x)
        } else {
            Err(Error::Numerical(format!(
                "non-finite {what} at node {node}"
            )))
        }
    }

    pub fn dirichlet(&self, v: &[f64]) -> f64 {
        self.check_len(v);
        (0..self.grid.intervals())
            .map(|e| {
                let dv = v[e + 1] - v[e];
                self.grid.stiffness(e) * dv * dv
            })
            .collect::<NeumaierSum>()
            .total()
    }

    pub fn parts(&self, v: &[f64]) -> Result<EnergyParts> {
        self.check_len(v);
        let nodes = self.grid.nodes();
        let weights = self.grid.weights();
        let mut potential = NeumaierSum::default();
        let mut nonlinear = NeumaierSum::default();
        for i in 0..nodes.len() {
            let u = self.transform.f_inverse(v[i])?;
            potential.add(weights[i] * self.potential[i] * u * u);
            nonlinear.add(Self::finite(
                weights[i] * self.primitive(nodes[i], u),
                i,
                "primitive",
            )?);
        }
        Ok(EnergyParts {
            dirichlet: self.dirichlet(v),
            potential: potential.total(),
            nonlinear: nonlinear.total(),
        })
    }

    pub fn energy(&self, v: &[f64]) -> Result<f64> {
        let p = self.parts(v)?;
        let e = 0.5 * self.eps2 * p.dirichlet + 0.5 * p.potential - p.nonlinear;
        if e.is_finite() {
            Ok(e)
        } else {
            Err(Error::Numerical("non-finite energy".into()))
        }
    }

    /// `<E'(v), phi_i>` for every hat function; the Dirichlet node gets 0.
    pub fn gradient(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v);
        let nodes = self.grid.nodes();
        let weights = self.grid.weights();
        let m = self.grid.intervals();
        let mut grad = vec![0.0; m + 1];
        for e in 0..m {
            let flux = self.eps2 * self.grid.stiffness(e) * (v[e + 1] - v[e]);
            grad[e] -= flux;
            grad[e + 1] += flux;
        }
        for i in 0..m {
            let (u, fp) = self.transform.f_and_prime(v[i])?;
            let local = (self.potential[i] * u - self.nonlinearity(nodes[i], u)) * fp;
            grad[i] += Self::finite(weights[i] * local, i, "gradient")?;
        }
        grad[m] = 0.0;
        Ok(grad)
    }

    /// Hessian restricted to the `M` free nodes.
    pub fn hessian(&self, v: &[f64]) -> Result<Tridiagonal> {
        self.check_len(v);
        let nodes = self.grid.nodes();
        let weights = self.grid.weights();
        let m = self.grid.intervals();
        let mut hess = Tridiagonal::zeros(m);
        for e in 0..m {
            let s = self.eps2 * self.grid.stiffness(e);
            hess.diag[e] += s;
            if e + 1 < m {
                hess.diag[e + 1] += s;
                hess.upper[e] = -s;
                hess.lower[e] = -s;
            }
        }
        for i in 0..m {
            let (u, fp) = self.transform.f_and_prime(v[i])?;
            let fp2 = fp * fp;
            let fp4 = fp2 * fp2;
            // d/dv [V f f'] = V f'^4 and d/dv [w(f) f'] = w_s f'^2 - w f f'^4
            let nl = self.nonlinearity(nodes[i], u);
            let local = self.potential[i] * fp4
                - (self.nonlinearity_slope(nodes[i], u) * fp2 - nl * u * fp4);
            hess.diag[i] += Self::finite(weights[i] * local, i, "hessian")?;
        }
        Ok(hess)
    }

    /// `eps^2 K + diag(w (V + eps^2))`: the Hessian at zero plus a mass
    /// shift. Symmetric positive definite; used as the Sobolev metric.
    pub fn preconditioner(&self) -> Tridiagonal {
        let m = self.grid.intervals();
        let weights = self.grid.weights();
        let mut a = Tridiagonal::zeros(m);
        for e in 0..m {
            let s = self.eps2 * self.grid.stiffness(e);
            a.diag[e] += s;
            if e + 1 < m {
                a.diag[e + 1] += s;
                a.upper[e] = -s;
                a.lower[e] = -s;
            }
        }
        for ((d, w), v) in a.diag.iter_mut().zip(weights).zip(&self.potential) {
            *d += w * (v + self.eps2);
        }
        a
    }

    /// `sqrt(sum_i r_i^2 / w_i)` over the free nodes: the lumped `L^2` norm
    /// of the residual density.
    pub fn residual_norm(&self, residual: &[f64]) -> f64 {
        let weights = self.grid.weights();
        let m = self.grid.intervals();
        (0..m)
            .filter(|&i| weights[i] > 0.0)
            .map(|i| residual[i] * residual[i] / weights[i])
            .collect::<NeumaierSum>()
            .total()
            .sqrt()
    }

    /// `<E'(v), phi>` for an arbitrary nodal test function.
    pub fn pairing(&self, v: &[f64], phi: &[f64]) -> Result<f64> {
        let grad = self.gradient(v)?;
        Ok(grad
            .iter()
            .zip(phi)
            .map(|(g, p)| g * p)
            .collect::<NeumaierSum>()
            .total())
    }

    /// `int w(x, f(v)) f(v)` with the lumped weights.
    pub fn nonlinear_pairing(&self, v: &[f64]) -> Result<f64> {
        let nodes = self.grid.nodes();
        let weights = self.grid.weights();
        let mut acc = NeumaierSum::default();
        for i in 0..nodes.len() {
            let u = self.transform.f_inverse(v[i])?;
            acc.add(weights[i] * self.nonlinearity(nodes[i], u) * u);
        }
        Ok(acc.total())
    }
}

pub fn energy_h(v: &DiscreteField, eps: f64, spec: &ProblemSpec) -> Result<f64> {
    EnergyModel::truncated(spec, v.grid(), eps).energy(v.values())
}

pub fn energy_j(v: &DiscreteField, eps: f64, spec: &ProblemSpec) -> Result<f64> {
    EnergyModel::original(spec, v.grid(), eps).energy(v.values())
}

pub fn gradient_h(v: &DiscreteField, eps: f64, spec: &ProblemSpec) -> Result<DiscreteField> {
    let g = EnergyModel::truncated(spec, v.grid(), eps).gradient(v.values())?;
    DiscreteField::new(v.grid().clone(), g)
}

pub fn gradient_j(v: &DiscreteField, eps: f64, spec: &ProblemSpec) -> Result<DiscreteField> {
    let g = EnergyModel::original(spec, v.grid(), eps).gradient(v.values())?;
    DiscreteField::new(v.grid().clone(), g)
}

/// `int |u'|^2` of the piecewise-linear interpolant (exact).
pub fn dirichlet_integral(u: &DiscreteField) -> f64 {
    let grid = u.grid();
    let vals = u.values();
    (0..grid.intervals())
        .map(|e| {
            let du = vals[e + 1] - vals[e];
            grid.stiffness(e) * du * du
        })
        .collect::<NeumaierSum>()
        .total()
}

/// `int rho(r) u(r)^2` of the piecewise-linear interpolant, Gauss rule per
/// element.
fn weighted_l2_sq<F: Fn(f64) -> f64>(u: &DiscreteField, rho: F) -> f64 {
    let grid = u.grid();
    let vals = u.values();
    (0..grid.intervals())
        .map(|e| {
            let (ua, ub) = (vals[e], vals[e + 1]);
            if ua == 0.0 && ub == 0.0 {
                return 0.0;
            }
            grid.element_gauss(e, |s, r| {
                let x = ua + s * (ub - ua);
                rho(r) * x * x
            })
        })
        .collect::<NeumaierSum>()
        .total()
}

/// `||u||_X = (int |u'|^2 + int V u^2)^(1/2)`.
pub fn x_norm(u: &DiscreteField, potential: &Potential) -> f64 {
    (dirichlet_integral(u) + weighted_l2_sq(u, |r| potential.value(r))).sqrt()
}

/// `||u||_{H^1} = (int |u'|^2 + int u^2)^(1/2)`.
pub fn h1_norm(u: &DiscreteField) -> f64 {
    (dirichlet_integral(u) + l2_norm_sq(u)).sqrt()
}

pub fn l2_norm_sq(u: &DiscreteField) -> f64 {
    weighted_l2_sq(u, |_| 1.0)
}

/// Fraction of `int |u'|^2 + u^2` carried by `r > r_cut`.
pub fn tail_fraction(u: &DiscreteField, r_cut: f64) -> f64 {
    let grid = u.grid();
    let vals = u.values();
    let mut tail = NeumaierSum::default();
    let mut total = NeumaierSum::default();
    for e in 0..grid.intervals() {
        let (ua, ub) = (vals[e], vals[e + 1]);
        let du = ub - ua;
        let local = grid.stiffness(e) * du * du
            + grid.element_gauss(e, |s, _| {
                let x = ua + s * du;
                x * x
            });
        total.add(local);
        if grid.nodes()[e] >= r_cut {
            tail.add(local);
        }
    }
    let total = total.total();
    if total == 0.0 {
        0.0
    } else {
        tail.total() / total
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrausReport {
    pub passed: bool,
    /// `max_r |u(r)| r^(1/2) / (2 pi ||u||_X)` over interior nodes.
    pub max_ratio: f64,
    pub worst_r: Option<f64>,
    pub norm: f64,
}

/// Pointwise `|u(r)| <= 2 pi r^(-1/2) ||u||_X` at every interior node.
pub fn straus_check(u: &DiscreteField, potential: &Potential) -> StrausReport {
    straus_bound_check(u, x_norm(u, potential))
}

/// As [`straus_check`] with an externally supplied norm value.
pub fn straus_bound_check(u: &DiscreteField, norm: f64) -> StrausReport {
    let nodes = u.grid().nodes();
    let vals = u.values();
    let mut max_ratio = 0.0;
    let mut worst_r = None;
    for i in 1..nodes.len() - 1 {
        let lhs = vals[i].abs() * nodes[i].sqrt();
        if lhs == 0.0 {
            continue;
        }
        let ratio = if norm > 0.0 {
            lhs / (2.0 * std::f64::consts::PI * norm)
        } else {
            f64::INFINITY
        };
        if ratio > max_ratio {
            max_ratio = ratio;
            worst_r = Some(nodes[i]);
        }
    }
    StrausReport {
        passed: max_ratio <= 1.0,
        max_ratio,
        worst_r,
        norm,
    }
}

// ---------------------------------------------------------------------------
// Profile CSV

/// One row of a stored profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileRow {
    pub r: f64,
    pub v: f64,
    pub u: f64,
    pub potential: f64,
}

/// Values are written with 12 significant digits.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        // normalise -0.0
        return "0.00000000000e0".to_string();
    }
    format!("{x:.11e}")
}

/// `x` rounded to the precision stored in profile files.
pub fn round_sig12(x: f64) -> f64 {
    format_sig12(x).parse().expect("formatted float parses")
}

pub fn profile_rows(
    v: &DiscreteField,
    potential: &Potential,
    transform: &TransformCalculus,
) -> Result<Vec<ProfileRow>> {
    v.grid()
        .nodes()
        .iter()
        .zip(v.values())
        .map(|(&r, &vi)| {
            Ok(ProfileRow {
                r,
                v: vi,
                u: transform.f_inverse(vi)?,
                potential: potential.value(r),
            })
        })
        .collect()
}

pub fn write_profile_csv(path: &Path, rows: &[ProfileRow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(out, "r,v,u,V")?;
        for row in rows {
            writeln!(
                out,
                "{},{},{},{}",
                format_sig12(row.r),
                format_sig12(row.v),
                format_sig12(row.u),
                format_sig12(row.potential)
            )?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

pub fn read_profile_csv(path: &Path) -> Result<Vec<ProfileRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::format(path, e))?
        .clone();
    let expected = ["r", "v", "u", "V"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::format(
            path,
            format!("expected header r,v,u,V, found {headers:?}"),
        ));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e))?;
        let parse = |i: usize| -> Result<f64> {
            record
                .get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::format(
                        path,
                        format!("row {}: bad value in column {}", line + 2, expected[i]),
                    )
                })
        };
        rows.push(ProfileRow {
            r: parse(0)?,
            v: parse(1)?,
            u: parse(2)?,
            potential: parse(3)?,
        });
    }
    if rows.len() < 2 {
        return Err(Error::format(path, "profile needs at least two rows"));
    }
    Ok(rows)
}

/// Rebuilds a grid from stored node positions.
pub fn grid_from_nodes(dimension: usize, nodes: Vec<f64>) -> Result<RadialGrid> {
    if dimension < 2 {
        return Err(Error::Validation(format!(
            "dimension must be at least 2, got {dimension}"
        )));
    }
    if nodes.len() < 2 || nodes[0] != 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Validation(
            "stored nodes must start at 0 and increase strictly".into(),
        ));
    }
    Ok(RadialGrid::from_nodes(dimension, nodes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ProblemSpec;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid(n: usize, r: f64, m: usize) -> Arc<RadialGrid> {
        Arc::new(build_grid(n, r, m, 1.0).unwrap())
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(unit_sphere_area(2), 2.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area(3), 4.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area(4), 2.0 * PI * PI, max_relative = 1e-15);
        assert_relative_eq!(
            unit_sphere_area(5),
            8.0 * PI * PI / 3.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn grid_volumes() {
        let g3 = grid(3, 1.0, 64);
        assert!((g3.integrate_fn(|_| 1.0) - 4.0 * PI / 3.0).abs() < 1e-5);
        let g2 = grid(2, 1.0, 64);
        assert!((g2.integrate_fn(|_| 1.0) - PI).abs() < 1e-5);
        assert_relative_eq!(g3.integrate_fn(|r| r), PI, max_relative = 1e-12);
        let graded = build_grid(3, 16.0, 300, 1.7).unwrap();
        assert_relative_eq!(
            graded.integrate_fn(|_| 1.0),
            graded.ball_volume(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn grid_validation() {
        assert!(build_grid(3, 1.0, 63, 1.0).is_err());
        assert!(build_grid(3, 1.0, 64, 0.0).is_err());
        assert!(build_grid(1, 1.0, 64, 1.0).is_err());
        assert!(build_grid(3, -1.0, 64, 1.0).is_err());
    }

    #[test]
    fn field_edge_condition() {
        let g = grid(3, 1.0, 64);
        let mut vals = vec![1.0; 65];
        assert!(DiscreteField::new(g.clone(), vals.clone()).is_err());
        vals[64] = 0.0;
        assert!(DiscreteField::new(g.clone(), vals.clone()).is_ok());
        vals[3] = f64::NAN;
        assert!(DiscreteField::new(g.clone(), vals).is_err());
        let f = DiscreteField::from_fn(g, |_| 2.0).unwrap();
        assert_eq!(*f.values().last().unwrap(), 0.0);
    }

    #[test]
    fn zero_field_energies() {
        let spec = ProblemSpec::canonical(13.0).unwrap();
        let g = grid(3, 16.0, 256);
        let zero = DiscreteField::zeros(g);
        assert_eq!(energy_h(&zero, 1.0, &spec).unwrap(), 0.0);
        assert_eq!(energy_j(&zero, 1.0, &spec).unwrap(), 0.0);
        assert!(gradient_h(&zero, 1.0, &spec)
            .unwrap()
            .values()
            .iter()
            .all(|&x| x == 0.0));
        assert_eq!(x_norm(&zero, spec.potential()), 0.0);
        assert_eq!(h1_norm(&zero), 0.0);
    }

    #[test]
    fn energy_of_bump_in_omega() {
        let spec = ProblemSpec::canonical(3.0).unwrap();
        let g = grid(3, 16.0, 512);
        let bump = DiscreteField::from_fn(g.clone(), |r| {
            let s = (r - 2.5) / 0.5;
            if s.abs() < 1.0 {
                0.8 * (1.0 - s * s).powi(3)
            } else {
                0.0
            }
        })
        .unwrap();
        let model = EnergyModel::truncated(&spec, &g, 0.3);
        let tc = TransformCalculus::default();
        let primitive: f64 = g
            .nodes()
            .iter()
            .zip(g.weights())
            .zip(bump.values())
            .map(|((_, w), &v)| w * spec.nonlinearity().antiderivative(tc.f_inverse(v).unwrap()))
            .sum();
        let expected = 0.5 * 0.09 * model.dirichlet(bump.values()) - primitive;
        assert_relative_eq!(
            energy_h(&bump, 0.3, &spec).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn hat_norms_match_closed_form() {
        let spec = ProblemSpec::canonical(3.0).unwrap();
        let g = grid(3, 16.0, 1024);
        // height 1, support [2.25, 2.75], inside Omega where V = 0
        let hat =
            DiscreteField::from_fn(g.clone(), |r| (1.0 - (r - 2.5).abs() / 0.25).max(0.0)).unwrap();
        let grad_sq = 16.0 * 4.0 * PI * (2.75f64.powi(3) - 2.25f64.powi(3)) / 3.0;
        assert_relative_eq!(
            x_norm(&hat, spec.potential()),
            grad_sq.sqrt(),
            max_relative = 1e-6
        );
        // int_{2.25}^{2.75} (1 - |r-2.5|/0.25)^2 4 pi r^2 dr, by hand:
        // sum over both halves of 4 pi int_0^1 s^2 (c -+ 0.25(1-s))^2 0.25 ds
        let half = |c: f64, sign: f64| {
            // r = c + sign*0.25*(1 - s), s from 0 to 1 maps to hat value s
            let a0 = c + sign * 0.25;
            let a1 = -sign * 0.25;
            // int_0^1 s^2 (a0 + a1 s)^2 ds
            0.25 * (a0 * a0 / 3.0 + 2.0 * a0 * a1 / 4.0 + a1 * a1 / 5.0)
        };
        let mass = 4.0 * PI * (half(2.5, -1.0) + half(2.5, 1.0));
        assert_relative_eq!(h1_norm(&hat), (grad_sq + mass).sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn straus_flags_underreported_norm() {
        let g = grid(3, 16.0, 256);
        let spike = DiscreteField::from_fn(g.clone(), |r| {
            if (r - g.nodes()[1]).abs() < 1e-12 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let spec = ProblemSpec::canonical(3.0).unwrap();
        assert!(straus_check(&spike, spec.potential()).passed);
        let coarse = straus_bound_check(&spike, 1e-3);
        assert!(!coarse.passed);
        assert_eq!(coarse.worst_r, Some(g.nodes()[1]));
        assert!(straus_check(&DiscreteField::zeros(g), spec.potential()).passed);
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(format_sig12(1.0), "1.00000000000e0");
        assert_eq!(format_sig12(-0.0), "0.00000000000e0");
        assert_eq!(format_sig12(0.1234567890123456), "1.23456789012e-1");
        let parsed: f64 = format_sig12(PI).parse().unwrap();
        assert!((parsed - PI).abs() < 1e-11);
    }
}
