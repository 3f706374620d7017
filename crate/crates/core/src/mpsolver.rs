//! Mountain-pass pipeline on the truncated functional: endpoint search,
//! path minimax, Newton refinement of the peak, coincidence certificate and
//! the continuation sweep in `eps`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{
    h1_norm, round_sig12, tail_fraction, x_norm, DiscreteField, EnergyModel, RadialGrid,
};
use crate::error::{Error, Result};
use crate::linalg::Tridiagonal;
use crate::problem::ProblemSpec;
use crate::transform::TransformCalculus;

/// Largest admissible `|v|` anywhere during a solve.
pub const BLOWUP_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MountainPassConfig {
    /// Number of fields on the discrete path, endpoints included.
    pub path_points: usize,
    /// Step reduction factor in backtracking.
    pub backtrack_factor: f64,
    /// Armijo constant.
    pub sufficient_decrease: f64,
    /// Cap on path relaxation rounds.
    pub path_iters: usize,
    /// Cap on descent steps over ray maxima.
    pub max_outer_iters: usize,
    /// Cap on Newton / fallback steps in refinement.
    pub max_refine_iters: usize,
    /// Residual norm at which a field counts as critical.
    pub residual_tol: f64,
    /// Peak residual at which path deformation hands over to Newton.
    pub handoff_tol: f64,
    /// Rounds without a 1% improvement of the peak residual before the
    /// path is declared stalled.
    pub stall_window: usize,
    /// Sphere radius for the geometry probe.
    pub sphere_radius: f64,
    /// Number of random fields on the probe sphere.
    pub geometry_probes: usize,
    /// Upper bound on the endpoint scaling.
    pub t_max: f64,
    /// Relative size of the seeded perturbation of the initial path.
    pub perturbation: f64,
    /// Start each sweep entry from the previous solution.
    pub warm_start: bool,
    /// Set from the run configuration.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for MountainPassConfig {
    fn default() -> Self {
        Self {
            path_points: 41,
            backtrack_factor: 0.5,
            sufficient_decrease: 1e-4,
            path_iters: 300,
            max_outer_iters: 2000,
            max_refine_iters: 200,
            residual_tol: 1e-8,
            handoff_tol: 1e-4,
            stall_window: 200,
            sphere_radius: 1e-2,
            geometry_probes: 100,
            t_max: 1e6,
            perturbation: 0.0,
            warm_start: true,
            seed: 0,
        }
    }
}

impl MountainPassConfig {
    pub fn validate(&self) -> Result<()> {
        if self.path_points < 3 {
            return Err(Error::Validation(format!(
                "path needs at least 3 points, got {}",
                self.path_points
            )));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::Validation(format!(
                "residual_tol must be positive, got {}",
                self.residual_tol
            )));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::Validation(format!(
                "backtrack_factor must lie in (0, 1), got {}",
                self.backtrack_factor
            )));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 0.5) {
            return Err(Error::Validation(format!(
                "sufficient_decrease must lie in (0, 0.5), got {}",
                self.sufficient_decrease
            )));
        }
        if !(self.t_max > 1.0) {
            return Err(Error::Validation(format!(
                "t_max must exceed 1, got {}",
                self.t_max
            )));
        }
        if !(self.sphere_radius > 0.0) {
            return Err(Error::Validation(format!(
                "sphere_radius must be positive, got {}",
                self.sphere_radius
            )));
        }
        if !(self.perturbation >= 0.0) {
            return Err(Error::Validation(format!(
                "perturbation must be nonnegative, got {}",
                self.perturbation
            )));
        }
        if self.path_iters == 0
            || self.max_outer_iters == 0
            || self.max_refine_iters == 0
            || self.stall_window == 0
        {
            return Err(Error::Validation("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Metric helpers. Vectors carry all M+1 nodes; the last entry stays zero.

struct Metric {
    a: Tridiagonal,
}

impl Metric {
    fn new(model: &EnergyModel<'_>) -> Self {
        Self {
            a: model.preconditioner(),
        }
    }

    /// `A^{-1} g` on the free nodes.
    fn precondition(&self, g: &[f64]) -> Result<Vec<f64>> {
        let m = self.a.len();
        let mut x = self
            .a
            .solve(&g[..m])
            .ok_or_else(|| Error::Numerical("preconditioner is singular".into()))?;
        x.push(0.0);
        Ok(x)
    }

    fn norm_sq(&self, x: &[f64]) -> f64 {
        let m = self.a.len();
        let ax = self.a.matvec(&x[..m]);
        ax.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn axpy(x: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

fn abs_field(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = x.abs();
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

// ---------------------------------------------------------------------------
// Endpoint

/// Far end of the mountain-pass path, `v1 = h(t e)`.
#[derive(Clone, Debug)]
pub struct Endpoint {
    pub field: DiscreteField,
    /// Direction `e` in the physical variable.
    pub direction: DiscreteField,
    pub scale: f64,
    pub energy: f64,
}

/// Smooth bump centred in `Omega`, supported strictly inside it, height 1.
pub fn omega_bump(spec: &ProblemSpec, grid: &Arc<RadialGrid>) -> Result<DiscreteField> {
    let annuli = spec.annuli();
    let centre = 0.5 * (annuli.omega_inner + annuli.omega_outer);
    let half = 0.5 * (annuli.omega_outer - annuli.omega_inner);
    let bump = DiscreteField::from_fn(grid.clone(), |r| {
        let s = (r - centre) / half;
        if s.abs() < 1.0 {
            (1.0 - 1.0 / (1.0 - s * s)).exp()
        } else {
            0.0
        }
    })?;
    if bump.max_abs() == 0.0 {
        return Err(Error::Validation("Omega contains no grid node".into()));
    }
    Ok(bump)
}

fn ray_point(direction: &DiscreteField, t: f64, transform: &TransformCalculus) -> Result<Vec<f64>> {
    direction
        .values()
        .iter()
        .map(|&e| transform.h_forward(t * e))
        .collect()
}

/// Scales a bump in `Omega` until the truncated energy is nonpositive.
pub fn make_endpoint(
    spec: &ProblemSpec,
    eps: f64,
    grid: &Arc<RadialGrid>,
    config: &MountainPassConfig,
) -> Result<Endpoint> {
    let bump = omega_bump(spec, grid)?;
    endpoint_along(spec, eps, &bump, config.t_max)
}

/// Smallest (to bisection accuracy) `t` on the ray `h(t e)` with
/// nonpositive energy.
pub fn endpoint_along(
    spec: &ProblemSpec,
    eps: f64,
    direction: &DiscreteField,
    t_max: f64,
) -> Result<Endpoint> {
    let grid = direction.grid().clone();
    let model = EnergyModel::truncated(spec, &grid, eps);
    let tc = *model.transform();
    let energy_at = |t: f64| -> Result<f64> { model.energy(&ray_point(direction, t, &tc)?) };

    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        let e = match energy_at(hi) {
            Ok(e) => e,
            Err(Error::Numerical(_)) | Err(Error::Domain(_)) => {
                return Err(Error::EndpointSearchFailed { t_max })
            }
            Err(other) => return Err(other),
        };
        if e <= 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > t_max {
            return Err(Error::EndpointSearchFailed { t_max });
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if energy_at(mid)? <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let values = ray_point(direction, hi, &tc)?;
    let energy = model.energy(&values)?;
    Ok(Endpoint {
        field: DiscreteField::new(grid, values)?,
        direction: direction.clone(),
        scale: hi,
        energy,
    })
}

/// Armijo backtracking along `-dir`, starting one growth step above the
/// previous accepted length. `slope` is `<E'(x), dir>`. Steps that would
/// take the energy below `floor` are rejected.
#[allow(clippy::too_many_arguments)]
fn descend(
    model: &EnergyModel<'_>,
    x: &[f64],
    energy: f64,
    dir: &[f64],
    slope: f64,
    previous: f64,
    floor: f64,
    config: &MountainPassConfig,
) -> Option<(Vec<f64>, f64, f64)> {
    let mut t = (previous / config.backtrack_factor).min(1.0);
    for _ in 0..40 {
        let mut trial = axpy(x, -t, dir);
        *trial.last_mut().unwrap() = 0.0;
        abs_field(&mut trial);
        if let Ok(e) = model.energy(&trial) {
            if e <= energy - config.sufficient_decrease * t * slope && e >= floor {
                return Some((trial, e, t));
            }
        }
        t *= config.backtrack_factor;
    }
    None
}

// ---------------------------------------------------------------------------
// Minimax

#[derive(Clone, Debug)]
pub struct MinimaxOutcome {
    /// Maximum of the energy along the final ray through the peak.
    pub c0_estimate: f64,
    /// Highest node of the relaxed path, before the ray stage.
    pub path_peak_energy: f64,
    pub peak: DiscreteField,
    pub peak_residual: f64,
    /// Relaxed path; its ends are the inputs, untouched.
    pub path: Vec<DiscreteField>,
    pub path_iterations: usize,
    pub ray_iterations: usize,
    /// An iteration cap was hit before the peak residual reached the
    /// hand-off tolerance or stalled.
    pub capped: bool,
}

/// Equal arclength redistribution of `nodes[lo..=hi]` in the `A` metric,
/// ends fixed.
fn redistribute(nodes: &mut [Vec<f64>], lo: usize, hi: usize, metric: &Metric) {
    if hi <= lo + 1 {
        return;
    }
    let mut cumulative = vec![0.0];
    for j in lo..hi {
        let diff: Vec<f64> = nodes[j + 1]
            .iter()
            .zip(&nodes[j])
            .map(|(a, b)| a - b)
            .collect();
        let len = metric.norm_sq(&diff).max(0.0).sqrt();
        cumulative.push(cumulative.last().unwrap() + len);
    }
    let total = *cumulative.last().unwrap();
    if !(total > 0.0) {
        return;
    }
    let old: Vec<Vec<f64>> = nodes[lo..=hi].to_vec();
    let count = hi - lo;
    let mut seg = 0;
    for i in 1..count {
        let target = total * i as f64 / count as f64;
        while seg + 1 < count && cumulative[seg + 1] < target {
            seg += 1;
        }
        let span = cumulative[seg + 1] - cumulative[seg];
        let s = if span > 0.0 {
            (target - cumulative[seg]) / span
        } else {
            0.0
        };
        nodes[lo + i] = old[seg]
            .iter()
            .zip(&old[seg + 1])
            .map(|(a, b)| a + s * (b - a))
            .collect();
    }
}

/// Relaxes the initial path `h(s t e)` by preconditioned descent with
/// arclength redistribution, then lowers its peak by descent over rays:
/// each iterate is the maximum of the energy on a ray `h(t psi)`.
pub fn minimax_path(
    endpoint: &Endpoint,
    config: &MountainPassConfig,
    eps: f64,
    spec: &ProblemSpec,
) -> Result<MinimaxOutcome> {
    config.validate()?;
    let grid = endpoint.field.grid().clone();
    let model = EnergyModel::truncated(spec, &grid, eps);
    let metric = Metric::new(&model);
    let tc = *model.transform();
    let p = config.path_points;
    let n = grid.nodes().len();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut path: Vec<Vec<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let s = j as f64 / (p - 1) as f64;
        let mut v = if j == 0 {
            vec![0.0; n]
        } else if j == p - 1 {
            endpoint.field.values().to_vec()
        } else {
            ray_point(&endpoint.direction, s * endpoint.scale, &tc)?
        };
        if config.perturbation > 0.0 && j > 0 && j < p - 1 {
            let amp = config.perturbation * s * (1.0 - s) * sup_norm(&v);
            let wiggle: f64 = rng.random_range(-1.0..1.0);
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let r_max = grid.r_max();
            for (x, &r) in v.iter_mut().zip(grid.nodes()) {
                *x += amp * wiggle * (phase + 6.0 * r / r_max).sin() * (1.0 - r / r_max);
            }
            *v.last_mut().unwrap() = 0.0;
            abs_field(&mut v);
        }
        path.push(v);
    }

    let mut energies = vec![0.0; p];
    energies[p - 1] = endpoint.energy;
    for j in 1..p - 1 {
        energies[j] = model.energy(&path[j])?;
    }
    let peak_of = |energies: &[f64]| -> usize {
        (1..p - 1)
            .max_by(|&a, &b| energies[a].total_cmp(&energies[b]))
            .expect("interior node")
    };

    // stage 1: string relaxation
    let mut steps = vec![1.0f64; p];
    let mut path_iterations = 0;
    let mut capped = true;
    while path_iterations < config.path_iters {
        path_iterations += 1;
        let before = energies[peak_of(&energies)];
        for j in 1..p - 1 {
            let g = model.gradient(&path[j])?;
            let d = metric.precondition(&g)?;
            let slope = dot(&g, &d);
            if !(slope > 0.0) {
                continue;
            }
            // nodes stay in {E >= 0} so the path keeps its mountain-pass shape
            if let Some((x, e, t)) = descend(
                &model,
                &path[j],
                energies[j],
                &d,
                slope,
                steps[j],
                0.0,
                config,
            ) {
                path[j] = x;
                energies[j] = e;
                steps[j] = t;
            } else {
                steps[j] = (steps[j] * config.backtrack_factor).max(1e-8);
            }
        }
        redistribute(&mut path, 0, p - 1, &metric);
        for j in 1..p - 1 {
            energies[j] = model.energy(&path[j])?;
        }
        let peak = energies[peak_of(&energies)];
        if !(peak > 0.0) {
            return Err(Error::GeometryLost { peak });
        }
        if (before - peak).abs() <= 1e-9 * (1.0 + peak.abs()) {
            capped = false;
            break;
        }
    }
    let ci = peak_of(&energies);
    let path_peak_energy = energies[ci];

    // stage 2: descent over ray maxima, starting from the path peak
    let mut ray = ray_maximum(&model, &path[ci], config.t_max)?;
    let mut step = 1.0f64;
    let mut best_residual = f64::INFINITY;
    let mut best_at = 0;
    let mut ray_iterations = 0;
    let mut ray_capped = true;
    let mut g = model.gradient(&ray.v)?;
    while ray_iterations < config.max_outer_iters {
        let residual = model.residual_norm(&g);
        if residual < config.handoff_tol {
            ray_capped = false;
            break;
        }
        if residual < 0.99 * best_residual {
            best_residual = residual;
            best_at = ray_iterations;
        } else if ray_iterations - best_at > config.stall_window {
            ray_capped = false;
            break;
        }
        ray_iterations += 1;
        let d = metric.precondition(&g)?;
        let slope = dot(&g, &d);
        let mut t = (step / config.backtrack_factor).min(1.0);
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial = axpy(&ray.v, -t, &d);
            *trial.last_mut().unwrap() = 0.0;
            abs_field(&mut trial);
            if let Ok(next) = ray_maximum(&model, &trial, config.t_max) {
                if next.energy <= ray.energy - config.sufficient_decrease * t * slope {
                    accepted = Some(next);
                    break;
                }
            }
            t *= config.backtrack_factor;
        }
        let Some(next) = accepted else {
            ray_capped = false;
            break;
        };
        step = t;
        ray = next;
        if !(ray.energy > 0.0) {
            return Err(Error::GeometryLost { peak: ray.energy });
        }
        if sup_norm(&ray.v) > BLOWUP_LIMIT {
            return Err(Error::Diverged {
                iterations: ray_iterations,
                reason: "ray maximum left the admissible range".into(),
            });
        }
        g = model.gradient(&ray.v)?;
    }

    let peak_residual = model.residual_norm(&g);
    let fields = path
        .into_iter()
        .map(|v| DiscreteField::new(grid.clone(), v))
        .collect::<Result<Vec<_>>>()?;
    Ok(MinimaxOutcome {
        c0_estimate: ray.energy,
        path_peak_energy,
        peak: DiscreteField::new(grid.clone(), ray.v)?,
        peak_residual,
        path: fields,
        path_iterations,
        ray_iterations,
        capped: capped && ray_capped,
    })
}

struct RayMaximum {
    v: Vec<f64>,
    energy: f64,
}

/// Maximises `t -> E(h(t psi))` with `psi = f(v)`, starting the bracket at
/// `t = 1` (the input field itself).
fn ray_maximum(model: &EnergyModel<'_>, v: &[f64], t_max: f64) -> Result<RayMaximum> {
    let tc = *model.transform();
    let psi = v
        .iter()
        .map(|&x| tc.f_inverse(x))
        .collect::<Result<Vec<f64>>>()?;
    if psi.iter().all(|&x| x == 0.0) {
        return Err(Error::GeometryLost { peak: 0.0 });
    }
    let point = |t: f64| -> Result<Vec<f64>> { psi.iter().map(|&u| tc.h_forward(t * u)).collect() };
    // d/dt E(h(t psi)) = <E'(h(t psi)), h'(t psi) psi>
    let slope = |t: f64| -> Result<f64> {
        let x = point(t)?;
        let g = model.gradient(&x)?;
        Ok(g.iter()
            .zip(&psi)
            .map(|(gi, &u)| gi * u * (t * u).hypot(1.0))
            .sum())
    };

    let (mut lo, mut hi) = (1.0, 1.0);
    let mut s_lo;
    let mut s_hi;
    let s1 = slope(1.0)?;
    if s1 > 0.0 {
        s_lo = s1;
        loop {
            hi *= 2.0;
            if hi > t_max {
                return Err(Error::EndpointSearchFailed { t_max });
            }
            s_hi = slope(hi)?;
            if s_hi <= 0.0 {
                break;
            }
            lo = hi;
            s_lo = s_hi;
        }
    } else {
        s_hi = s1;
        loop {
            lo *= 0.5;
            if lo < 1e-12 {
                return Err(Error::GeometryLost { peak: 0.0 });
            }
            s_lo = slope(lo)?;
            if s_lo > 0.0 {
                break;
            }
            hi = lo;
            s_hi = s_lo;
        }
    }
    // Illinois regula falsi on the slope
    let mut side = 0i8;
    for _ in 0..200 {
        if hi - lo <= 1e-14 * hi {
            break;
        }
        let mut t = (lo * s_hi - hi * s_lo) / (s_hi - s_lo);
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        let st = slope(t)?;
        if st == 0.0 {
            lo = t;
            hi = t;
            break;
        }
        if st > 0.0 {
            lo = t;
            s_lo = st;
            if side == 1 {
                s_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = t;
            s_hi = st;
            if side == -1 {
                s_lo *= 0.5;
            }
            side = -1;
        }
    }
    let t = 0.5 * (lo + hi);
    let v = point(t)?;
    let energy = model.energy(&v)?;
    Ok(RayMaximum { v, energy })
}

// ---------------------------------------------------------------------------
// Refinement

#[derive(Clone, Debug)]
pub struct Refinement {
    pub field: DiscreteField,
    pub residual_norm: f64,
    pub energy: f64,
    pub newton_steps: usize,
    pub fallback_steps: usize,
}

/// Damped Newton on the weak-form residual with a gradient-flow fallback on
/// the merit `1/2 |g|_{A^{-1}}^2`.
pub fn refine_critical_point(
    v_init: &DiscreteField,
    eps: f64,
    spec: &ProblemSpec,
    config: &MountainPassConfig,
) -> Result<Refinement> {
    config.validate()?;
    let grid = v_init.grid().clone();
    let model = EnergyModel::truncated(spec, &grid, eps);
    let metric = Metric::new(&model);
    let m = grid.intervals();

    let mut v = v_init.values().to_vec();
    abs_field(&mut v);
    let mut g = model.gradient(&v)?;
    let mut residual = model.residual_norm(&g);
    let merit_of = |g: &[f64]| -> Result<f64> { Ok(0.5 * dot(g, &metric.precondition(g)?)) };
    let mut merit = merit_of(&g)?;
    let mut newton_steps = 0;
    let mut fallback_steps = 0;
    let mut rising = 0;
    let mut iterations = 0;

    while residual >= config.residual_tol {
        if iterations >= config.max_refine_iters {
            return Err(Error::Diverged {
                iterations,
                reason: format!("residual {residual:.3e} above tolerance at the iteration cap"),
            });
        }
        iterations += 1;

        let hess = model.hessian(&v)?;
        let newton = hess.solve(&g[..m]).map(|mut d| {
            for x in d.iter_mut() {
                *x = -*x;
            }
            d.push(0.0);
            d
        });

        let mut accepted = None;
        if let Some(dir) = &newton {
            // the merit decreases at rate 2*merit along an exact Newton step
            let mut t = 1.0;
            while t > 1e-10 {
                let mut trial = axpy(&v, t, dir);
                abs_field(&mut trial);
                if let Ok(gt) = model.gradient(&trial) {
                    let mt = merit_of(&gt)?;
                    if mt <= (1.0 - 2.0 * config.sufficient_decrease * t) * merit
                        || model.residual_norm(&gt) < config.residual_tol
                    {
                        accepted = Some((trial, gt, mt));
                        break;
                    }
                }
                t *= config.backtrack_factor;
            }
            if accepted.is_some() {
                newton_steps += 1;
            }
        }
        if accepted.is_none() {
            // steepest descent on the merit: grad = H A^{-1} g
            let ag = metric.precondition(&g)?;
            let mut grad_merit = hess.matvec(&ag[..m]);
            grad_merit.push(0.0);
            let dir = metric.precondition(&grad_merit)?;
            let slope = dot(&grad_merit, &dir);
            let mut t = 1.0;
            while t > 1e-12 {
                let mut trial = axpy(&v, -t, &dir);
                abs_field(&mut trial);
                if let Ok(gt) = model.gradient(&trial) {
                    let mt = merit_of(&gt)?;
                    if mt <= merit - config.sufficient_decrease * t * slope {
                        accepted = Some((trial, gt, mt));
                        break;
                    }
                }
                t *= config.backtrack_factor;
            }
            if accepted.is_some() {
                fallback_steps += 1;
            }
        }

        let Some((next, gn, mn)) = accepted else {
            return Err(Error::Diverged {
                iterations,
                reason: format!("no step reduces the residual (residual {residual:.3e})"),
            });
        };
        rising = if mn > merit { rising + 1 } else { 0 };
        if rising >= 10 {
            return Err(Error::Diverged {
                iterations,
                reason: "merit increased for 10 consecutive steps".into(),
            });
        }
        if sup_norm(&next) > BLOWUP_LIMIT {
            return Err(Error::Diverged {
                iterations,
                reason: format!("sup norm exceeded {BLOWUP_LIMIT:e}"),
            });
        }
        v = next;
        g = gn;
        merit = mn;
        residual = model.residual_norm(&g);
    }

    let energy = model.energy(&v)?;
    Ok(Refinement {
        field: DiscreteField::new(grid, v)?,
        residual_norm: residual,
        energy,
        newton_steps,
        fallback_steps,
    })
}

// ---------------------------------------------------------------------------
// Certificate

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    /// `max f(v)` over nodes in the closed annulus `Lambda`.
    pub max_f_on_lambda_bar: f64,
    /// `max f(v)` over the remaining nodes.
    pub max_f_off_lambda_bar: f64,
    pub a: f64,
    pub coincide: bool,
    /// Residual of the untruncated functional at the same field.
    pub j_residual_norm: f64,
}

/// Checks whether the truncation is inactive at `v`.
pub fn certify_coincidence(
    v_star: &DiscreteField,
    spec: &ProblemSpec,
    eps: f64,
) -> Result<Certificate> {
    let grid = v_star.grid().clone();
    let tc = TransformCalculus::default();
    let annuli = spec.annuli();
    let mut on = 0.0f64;
    let mut off = 0.0f64;
    for (&r, &v) in grid.nodes().iter().zip(v_star.values()) {
        let u = tc.f_inverse(v)?;
        if annuli.in_lambda_closure(r) {
            on = on.max(u);
        } else {
            off = off.max(u);
        }
    }
    let a = spec.level();
    let coincide = off <= a * (1.0 + 1e-10) && on < a;
    let j_model = EnergyModel::original(spec, &grid, eps);
    let j_residual_norm = j_model.residual_norm(&j_model.gradient(v_star.values())?);
    Ok(Certificate {
        max_f_on_lambda_bar: on,
        max_f_off_lambda_bar: off,
        a,
        coincide,
        j_residual_norm,
    })
}

// ---------------------------------------------------------------------------
// Full pipeline

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub epsilon: f64,
    pub seed: u64,
    pub c0_estimate: f64,
    /// Residual of the stored (12-digit) profile.
    pub residual_norm: f64,
    /// Residual of the refined field before rounding.
    pub solver_residual_norm: f64,
    /// `solver_residual_norm < residual_tol`.
    pub converged: bool,
    pub max_f_on_lambda_bar: f64,
    pub max_f_off_lambda_bar: f64,
    pub a: f64,
    pub coincide: bool,
    pub j_residual_norm: f64,
    /// `converged`, `coincide` and the untruncated residual below
    /// `10 * residual_tol`.
    pub certified: bool,
    pub h1_norm_u: f64,
    pub x_norm_u: f64,
    /// `sup u` over `R1 <= r <= R2`.
    pub sup_u_lambda: f64,
    /// Share of `|u|_{H^1}^2` carried by `r > R_max / 2`.
    pub tail_fraction: f64,
    pub energy_h: f64,
    pub energy_j: f64,
    pub endpoint_scale: f64,
    pub warm_started: bool,
    pub path_iterations: usize,
    pub ray_iterations: usize,
    pub newton_steps: usize,
    pub fallback_steps: usize,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub report: RunReport,
    pub field: DiscreteField,
}

/// Endpoint, minimax, refinement and certificate for one `eps`. With a
/// warm start the initial path follows the ray through `warm`.
pub fn solve(
    spec: &ProblemSpec,
    grid: &Arc<RadialGrid>,
    eps: f64,
    config: &MountainPassConfig,
    warm: Option<&DiscreteField>,
) -> Result<Solution> {
    config.validate()?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Validation(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let tc = TransformCalculus::default();
    let mut warnings = Vec::new();
    let endpoint = match warm {
        Some(previous) => {
            let direction = previous.to_physical(&tc)?;
            let unit = direction.max_abs();
            if unit == 0.0 {
                return Err(Error::Validation("warm start field is zero".into()));
            }
            let direction = direction.map(|u| u / unit)?;
            endpoint_along(spec, eps, &direction, config.t_max)?
        }
        None => make_endpoint(spec, eps, grid, config)?,
    };
    let minimax = minimax_path(&endpoint, config, eps, spec)?;
    if minimax.capped {
        warnings.push(format!(
            "minimax hit an iteration cap (peak residual {:.3e})",
            minimax.peak_residual
        ));
    }
    let refined = refine_critical_point(&minimax.peak, eps, spec, config)?;
    // report on exactly the field that is written to disk
    let v = refined.field.map(round_sig12)?;
    let model = EnergyModel::truncated(spec, grid, eps);
    let residual_norm = model.residual_norm(&model.gradient(v.values())?);
    if residual_norm >= config.residual_tol {
        warnings.push(format!(
            "rounding to 12 digits raised the residual to {residual_norm:.3e}"
        ));
    }
    if v.max_abs() == 0.0 || !(refined.energy > 0.0) {
        return Err(Error::Numerical(format!(
            "refinement collapsed to a trivial critical point (energy {:.3e})",
            refined.energy
        )));
    }
    if refined.energy > minimax.c0_estimate * (1.0 + 1e-6) {
        warnings.push(format!(
            "critical energy {:.9e} exceeds the path peak {:.9e}",
            refined.energy, minimax.c0_estimate
        ));
    }
    let cert = certify_coincidence(&v, spec, eps)?;
    let u = v.to_physical(&tc)?;
    let annuli = spec.annuli();
    let sup_u_lambda = grid
        .nodes()
        .iter()
        .zip(u.values())
        .filter(|(&r, _)| annuli.in_lambda_closure(r))
        .fold(0.0f64, |m, (_, &x)| m.max(x));
    let report = RunReport {
        epsilon: eps,
        seed: config.seed,
        c0_estimate: minimax.c0_estimate,
        residual_norm,
        solver_residual_norm: refined.residual_norm,
        converged: refined.residual_norm < config.residual_tol,
        max_f_on_lambda_bar: cert.max_f_on_lambda_bar,
        max_f_off_lambda_bar: cert.max_f_off_lambda_bar,
        a: cert.a,
        coincide: cert.coincide,
        j_residual_norm: cert.j_residual_norm,
        certified: refined.residual_norm < config.residual_tol
            && cert.coincide
            && cert.j_residual_norm < 10.0 * config.residual_tol,
        h1_norm_u: h1_norm(&u),
        x_norm_u: x_norm(&u, spec.potential()),
        sup_u_lambda,
        tail_fraction: tail_fraction(&u, 0.5 * grid.r_max()),
        energy_h: model.energy(v.values())?,
        energy_j: EnergyModel::original(spec, grid, eps).energy(v.values())?,
        endpoint_scale: endpoint.scale,
        warm_started: warm.is_some(),
        path_iterations: minimax.path_iterations,
        ray_iterations: minimax.ray_iterations,
        newton_steps: refined.newton_steps,
        fallback_steps: refined.fallback_steps,
        iterations: minimax.path_iterations
            + minimax.ray_iterations
            + refined.newton_steps
            + refined.fallback_steps,
        warnings,
    };
    Ok(Solution { report, field: v })
}

/// One entry of a sweep; failures are kept rather than aborting the sweep.
#[derive(Clone, Debug)]
pub struct SweepEntry {
    pub epsilon: f64,
    pub outcome: std::result::Result<Solution, String>,
}

impl SweepEntry {
    pub fn report(&self) -> Option<&RunReport> {
        self.outcome.as_ref().ok().map(|s| &s.report)
    }
}

/// Solves for each `eps` in a strictly decreasing list. Sequential runs
/// warm-start from the previous success when the config allows it;
/// `parallel` runs every entry cold.
pub fn epsilon_sweep(
    eps_list: &[f64],
    spec: &ProblemSpec,
    grid: &Arc<RadialGrid>,
    config: &MountainPassConfig,
    parallel: bool,
) -> Result<Vec<SweepEntry>> {
    config.validate()?;
    if eps_list.is_empty() {
        return Err(Error::Validation("epsilon list is empty".into()));
    }
    if eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::Validation(format!(
            "epsilons must be positive, got {eps_list:?}"
        )));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Validation(format!(
            "epsilons must be strictly decreasing, got {eps_list:?}"
        )));
    }
    if parallel {
        return Ok(eps_list
            .par_iter()
            .map(|&eps| SweepEntry {
                epsilon: eps,
                outcome: solve(spec, grid, eps, config, None).map_err(|e| e.to_string()),
            })
            .collect());
    }
    let mut entries: Vec<SweepEntry> = Vec::with_capacity(eps_list.len());
    let mut previous: Option<DiscreteField> = None;
    for &eps in eps_list {
        let cold = solve(spec, grid, eps, config, None);
        let warm = match (&previous, config.warm_start) {
            (Some(prev), true) => Some(solve(spec, grid, eps, config, Some(prev))),
            _ => None,
        };
        // The continuation branch need not be the mountain-pass one; the
        // lower critical level is the better estimate of C0.
        let outcome = match (cold, warm) {
            (Ok(c), Some(Ok(w))) => Ok(if w.report.energy_h < c.report.energy_h * (1.0 - 1e-9) {
                w
            } else {
                c
            }),
            (Ok(c), _) => Ok(c),
            (Err(_), Some(Ok(w))) => Ok(w),
            (Err(e), _) => Err(e),
        };
        if let Ok(s) = &outcome {
            previous = Some(s.field.clone());
        }
        entries.push(SweepEntry {
            epsilon: eps,
            outcome: outcome.map_err(|e| e.to_string()),
        });
    }
    Ok(entries)
}
