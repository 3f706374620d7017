//! Diagnostics on stored profiles and sweeps. Everything is recomputed from
//! the nodal data; nothing is taken from a run report.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretize::{
    grid_from_nodes, straus_bound_check, tail_fraction, x_norm, DiscreteField, EnergyModel,
    NeumaierSum, ProfileRow, RadialGrid,
};
use crate::error::{Error, Result};
use crate::mpsolver::{certify_coincidence, make_endpoint, MountainPassConfig, RunReport};
use crate::problem::ProblemSpec;
use crate::transform::TransformCalculus;

/// Every tolerance used by the diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Fraction of `(k-1)/(4k) rho^2` the sphere minimum must reach.
    pub geometry_fraction: f64,
    /// Allowed negative slack in the boundedness inequality.
    pub boundedness_slack: f64,
    /// Largest admissible tail share of the `H^1` mass.
    pub tail_fraction: f64,
    /// Relative tolerance on `|J - H|` when the truncation is inactive.
    pub energy_agreement: f64,
    /// Tolerance on nodal gradient differences, relative to the largest
    /// gradient component.
    pub gradient_agreement: f64,
    /// `|u - f(v)|` allowed in a stored profile, relative to `1 + |u|`.
    pub profile_consistency: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            geometry_fraction: 0.5,
            boundedness_slack: 1e-8,
            tail_fraction: 1e-3,
            energy_agreement: 1e-10,
            gradient_agreement: 1e-10,
            profile_consistency: 1e-10,
        }
    }
}

/// Worst offending (or, on success, closest) sample of a check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Radius, or `eps` for sweep-level checks.
    pub location: Option<f64>,
    pub values: BTreeMap<String, f64>,
}

impl Sample {
    fn at(location: Option<f64>, values: &[(&str, f64)]) -> Self {
        Self {
            location,
            values: values.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub check: String,
    pub passed: bool,
    pub tolerance: f64,
    pub worst: Option<Sample>,
    pub notes: Vec<String>,
}

impl DiagnosticReport {
    fn new(check: &str, passed: bool, tolerance: f64, worst: Option<Sample>) -> Self {
        Self {
            check: check.to_string(),
            passed,
            tolerance,
            worst,
            notes: Vec::new(),
        }
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

// ---------------------------------------------------------------------------
// Profiles

/// Nodal data of a stored solution.
#[derive(Clone, Debug)]
pub struct Profile {
    pub grid: Arc<RadialGrid>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub potential: Vec<f64>,
}

impl Profile {
    pub fn from_rows(dimension: usize, rows: &[ProfileRow]) -> Result<Self> {
        let nodes = rows.iter().map(|r| r.r).collect();
        let grid = Arc::new(grid_from_nodes(dimension, nodes)?);
        Ok(Self {
            grid,
            v: rows.iter().map(|r| r.v).collect(),
            u: rows.iter().map(|r| r.u).collect(),
            potential: rows.iter().map(|r| r.potential).collect(),
        })
    }

    pub fn from_field(v: &DiscreteField, spec: &ProblemSpec) -> Result<Self> {
        let tc = TransformCalculus::default();
        let grid = v.grid().clone();
        let u = v
            .values()
            .iter()
            .map(|&x| tc.f_inverse(x))
            .collect::<Result<Vec<_>>>()?;
        let potential = grid
            .nodes()
            .iter()
            .map(|&r| spec.potential().value(r))
            .collect();
        Ok(Self {
            grid,
            v: v.values().to_vec(),
            u,
            potential,
        })
    }

    /// The dual field; fails when the stored edge value is not zero.
    pub fn v_field(&self) -> Result<DiscreteField> {
        DiscreteField::new(self.grid.clone(), self.v.clone())
    }

    /// `u` with the edge value forced to zero, for norms.
    fn u_field_clamped(&self) -> Result<DiscreteField> {
        let mut u = self.u.clone();
        *u.last_mut().expect("non-empty") = 0.0;
        DiscreteField::new(self.grid.clone(), u)
    }
}

/// `u = f(v)` and `V` columns agree with the recomputed values.
pub fn check_profile_consistency(
    profile: &Profile,
    spec: &ProblemSpec,
    tol: &Tolerances,
) -> DiagnosticReport {
    let tc = TransformCalculus::default();
    let mut worst = (0.0f64, None);
    let mut notes = Vec::new();
    for (i, &r) in profile.grid.nodes().iter().enumerate() {
        let u_expected = match tc.f_inverse(profile.v[i]) {
            Ok(u) => u,
            Err(e) => {
                notes.push(format!("node {i}: {e}"));
                worst = (f64::INFINITY, Some(r));
                continue;
            }
        };
        let du = (profile.u[i] - u_expected).abs() / (1.0 + profile.u[i].abs());
        let dv = (profile.potential[i] - spec.potential().value(r)).abs()
            / (1.0 + profile.potential[i].abs());
        let err = du.max(dv);
        if err > worst.0 || worst.1.is_none() {
            worst = (err, Some(r));
        }
    }
    let passed = worst.0 <= tol.profile_consistency;
    let mut report = DiagnosticReport::new(
        "profile_consistency",
        passed,
        tol.profile_consistency,
        Some(Sample::at(worst.1, &[("relative_error", worst.0)])),
    );
    report.notes = notes;
    report
}

// ---------------------------------------------------------------------------
// Geometry

/// Seeded smooth nonnegative field: a few bumps spread over `[0, R2]`.
fn random_probe(
    grid: &Arc<RadialGrid>,
    spec: &ProblemSpec,
    rng: &mut ChaCha8Rng,
) -> Result<DiscreteField> {
    let r_top = spec.annuli().lambda_outer * 1.5;
    let bumps: Vec<(f64, f64, f64)> = (0..rng.random_range(1..=4))
        .map(|_| {
            (
                rng.random_range(0.0..r_top),
                rng.random_range(0.1..1.0),
                rng.random_range(0.2..1.0),
            )
        })
        .collect();
    DiscreteField::from_fn(grid.clone(), |r| {
        bumps
            .iter()
            .map(|&(c, w, a)| a * (-((r - c) / w).powi(2)).exp())
            .sum::<f64>()
    })
}

/// `eps^2 int |v'|^2 + int V f(v)^2`.
fn sphere_norm_sq(model: &EnergyModel<'_>, v: &[f64]) -> Result<f64> {
    let p = model.parts(v)?;
    Ok(model.eps2() * p.dirichlet + p.potential)
}

/// Scales `v` onto the sphere `eps^2 int |v'|^2 + int V f(v)^2 = rho^2`.
fn project_to_sphere(model: &EnergyModel<'_>, v: &[f64], rho: f64) -> Result<Vec<f64>> {
    let target = rho * rho;
    let at = |s: f64| -> Result<f64> {
        sphere_norm_sq(model, &v.iter().map(|x| s * x).collect::<Vec<_>>())
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while at(hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numerical("probe cannot reach the sphere".into()));
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    Ok(v.iter().map(|x| s * x).collect())
}

/// Endpoint existence plus the lower bound on a small sphere, sampled by
/// `n_probes` seeded smooth fields.
pub fn check_geometry(
    spec: &ProblemSpec,
    eps: f64,
    grid: &Arc<RadialGrid>,
    rho: f64,
    n_probes: usize,
    seed: u64,
    tol: &Tolerances,
) -> DiagnosticReport {
    let k = spec.k();
    let bound = (k - 1.0) / (4.0 * k) * rho * rho;
    let required = bound * tol.geometry_fraction;
    let mut notes = Vec::new();

    let config = MountainPassConfig::default();
    let endpoint = match make_endpoint(spec, eps, grid, &config) {
        Ok(e) => {
            notes.push(format!(
                "endpoint scale {:.6e}, energy {:.6e}",
                e.scale, e.energy
            ));
            Some(e.energy)
        }
        Err(e) => {
            notes.push(format!("endpoint: {e}"));
            None
        }
    };

    let model = EnergyModel::truncated(spec, grid, eps);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut minimum = f64::INFINITY;
    let mut failures = 0;
    for _ in 0..n_probes {
        let probe = random_probe(grid, spec, &mut rng)
            .and_then(|p| project_to_sphere(&model, p.values(), rho))
            .and_then(|v| model.energy(&v));
        match probe {
            Ok(e) => minimum = minimum.min(e),
            Err(_) => failures += 1,
        }
    }
    if failures > 0 {
        notes.push(format!("{failures} probes could not be evaluated"));
    }
    let endpoint_ok = endpoint.is_some_and(|e| e <= 0.0);
    let sphere_ok = failures == 0 && minimum > 0.0 && minimum >= required;
    let mut report = DiagnosticReport::new(
        "geometry",
        endpoint_ok && sphere_ok,
        tol.geometry_fraction,
        Some(Sample::at(
            Some(rho),
            &[
                ("sphere_minimum", minimum),
                ("lower_bound", bound),
                ("required", required),
                ("endpoint_energy", endpoint.unwrap_or(f64::NAN)),
            ],
        )),
    );
    report.notes = notes;
    report
}

// ---------------------------------------------------------------------------
// Decay

/// Pointwise Straus bound, exact zero at `R_max` and a nonincreasing tail
/// over the last tenth of the nodes.
pub fn check_decay(profile: &Profile, spec: &ProblemSpec) -> DiagnosticReport {
    let n = profile.u.len();
    let mut notes = Vec::new();
    let edge = profile.u[n - 1];
    let edge_ok = edge == 0.0 && profile.v[n - 1] == 0.0;
    if !edge_ok {
        notes.push(format!(
            "u(R_max) = {edge:e}, v(R_max) = {:e}",
            profile.v[n - 1]
        ));
    }
    let nonnegative = profile.u.iter().all(|&x| x >= 0.0);
    if !nonnegative {
        notes.push("profile has negative values".into());
    }

    let (straus_ok, ratio, worst_r) = match profile.u_field_clamped() {
        Ok(u) => {
            let s = straus_bound_check(&u, x_norm(&u, spec.potential()));
            (s.passed, s.max_ratio, s.worst_r)
        }
        Err(e) => {
            notes.push(format!("norm: {e}"));
            (false, f64::NAN, None)
        }
    };

    let start = n - n / 10;
    let peak = profile.u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tail_ok = profile.u[start..]
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-12 * peak);
    if !tail_ok {
        notes.push("tail is not nonincreasing over the last tenth of the grid".into());
    }

    let mut report = DiagnosticReport::new(
        "decay",
        edge_ok && nonnegative && straus_ok && tail_ok,
        1.0,
        Some(Sample::at(
            worst_r,
            &[("straus_ratio", ratio), ("edge_value", edge)],
        )),
    );
    report.notes = notes;
    report
}

// ---------------------------------------------------------------------------
// Boundedness and tails

/// `H(v) - <H'(v), f/f'>/theta - [(1/2 - 2/theta) eps^2 int |v'|^2 +
/// (1/2 - 1/theta)(1 - 1/k) int V f^2]`, nonnegative for every field.
pub fn boundedness_slack(v: &DiscreteField, spec: &ProblemSpec, eps: f64) -> Result<f64> {
    let grid = v.grid().clone();
    let model = EnergyModel::truncated(spec, &grid, eps);
    let tc = model.transform();
    let theta = spec.theta();
    let k = spec.k();
    let parts = model.parts(v.values())?;
    let energy = 0.5 * model.eps2() * parts.dirichlet + 0.5 * parts.potential - parts.nonlinear;
    let phi = v
        .values()
        .iter()
        .map(|&x| {
            let u = tc.f_inverse(x)?;
            Ok(u * u.hypot(1.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    let pairing = model.pairing(v.values(), &phi)?;
    let lhs = energy - pairing / theta;
    let rhs = (0.5 - 2.0 / theta) * model.eps2() * parts.dirichlet
        + (0.5 - 1.0 / theta) * (1.0 - 1.0 / k) * parts.potential;
    Ok(lhs - rhs)
}

/// A profile tagged with the `eps` it was computed at.
#[derive(Clone, Debug)]
pub struct SweepProfile {
    pub epsilon: f64,
    pub profile: Profile,
}

/// Boundedness inequality on every profile and tail mass below tolerance
/// beyond `4 R2` and beyond `R_max / 2`.
pub fn check_ps_diagnostics(
    profiles: &[SweepProfile],
    spec: &ProblemSpec,
    tol: &Tolerances,
) -> DiagnosticReport {
    let mut notes = Vec::new();
    if profiles.len() < 2 {
        notes.push(format!(
            "needs at least two profiles, got {}",
            profiles.len()
        ));
    }
    let theta = spec.theta();
    if theta <= 4.0 {
        notes.push(format!(
            "marginal theta = {theta}: gradient coefficient 1/2 - 2/theta = {}",
            0.5 - 2.0 / theta
        ));
    }
    let mut worst_slack = f64::INFINITY;
    let mut worst_tail = 0.0f64;
    let mut worst_eps = None;
    let mut worst_tail_eps = None;
    let mut ok = profiles.len() >= 2;
    let far = 4.0 * spec.annuli().lambda_outer;
    for entry in profiles {
        match entry
            .profile
            .v_field()
            .and_then(|v| boundedness_slack(&v, spec, entry.epsilon))
        {
            Ok(s) => {
                if s < worst_slack {
                    worst_slack = s;
                    worst_eps = Some(entry.epsilon);
                }
            }
            Err(e) => {
                ok = false;
                notes.push(format!("eps {}: {e}", entry.epsilon));
            }
        }
        if let Ok(u) = entry.profile.u_field_clamped() {
            let tail = tail_fraction(&u, far).max(tail_fraction(&u, 0.5 * u.grid().r_max()));
            if tail > worst_tail || worst_tail_eps.is_none() {
                worst_tail = tail;
                worst_tail_eps = Some(entry.epsilon);
            }
        }
    }
    let slack_ok = worst_slack >= -tol.boundedness_slack;
    let tail_ok = worst_tail < tol.tail_fraction;
    let mut report = DiagnosticReport::new(
        "ps_boundedness",
        ok && slack_ok && tail_ok,
        tol.boundedness_slack,
        Some(Sample::at(
            worst_eps.or(worst_tail_eps),
            &[
                ("min_slack", worst_slack),
                ("max_tail_fraction", worst_tail),
            ],
        )),
    );
    report.notes = notes;
    report
}

/// Boundedness inequality and tail mass for a single profile.
pub fn check_boundedness(
    entry: &SweepProfile,
    spec: &ProblemSpec,
    tol: &Tolerances,
) -> DiagnosticReport {
    let slack = match entry
        .profile
        .v_field()
        .and_then(|v| boundedness_slack(&v, spec, entry.epsilon))
    {
        Ok(s) => s,
        Err(e) => {
            return DiagnosticReport::new("boundedness", false, tol.boundedness_slack, None)
                .note(e.to_string())
        }
    };
    let far = 4.0 * spec.annuli().lambda_outer;
    let tail = match entry.profile.u_field_clamped() {
        Ok(u) => tail_fraction(&u, far).max(tail_fraction(&u, 0.5 * u.grid().r_max())),
        Err(e) => {
            return DiagnosticReport::new("boundedness", false, tol.boundedness_slack, None)
                .note(e.to_string())
        }
    };
    DiagnosticReport::new(
        "boundedness",
        slack >= -tol.boundedness_slack && tail < tol.tail_fraction,
        tol.boundedness_slack,
        Some(Sample::at(
            Some(entry.epsilon),
            &[("slack", slack), ("tail_fraction", tail)],
        )),
    )
}

// ---------------------------------------------------------------------------
// Sweep trends

/// What the trend summary needs from one sweep entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrendPoint {
    pub epsilon: f64,
    pub h1_norm_u: f64,
    pub sup_u_lambda: f64,
    pub coincide: bool,
    pub j_residual_norm: f64,
}

impl From<&RunReport> for TrendPoint {
    fn from(r: &RunReport) -> Self {
        Self {
            epsilon: r.epsilon,
            h1_norm_u: r.h1_norm_u,
            sup_u_lambda: r.sup_u_lambda,
            coincide: r.coincide,
            j_residual_norm: r.j_residual_norm,
        }
    }
}

/// Trend summary of a sweep, ordered by decreasing `eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTrends {
    /// Every step satisfies `h1[i+1] <= 1.1 h1[i]`.
    pub h1_nonincreasing: bool,
    /// Last over first `|u|_{H^1}`.
    pub h1_final_ratio: f64,
    /// `h1_nonincreasing` and `h1_final_ratio < 0.5`.
    pub h1_decreasing: bool,
    /// Every step satisfies `sup[i+1] <= 1.1 sup[i]` for `sup u` on `Lambda`.
    pub sup_nonincreasing: bool,
    /// Largest `eps` from which every smaller entry coincides with an
    /// untruncated residual below `1e-7`.
    pub coincidence_threshold: Option<f64>,
    /// Once an entry coincides, every later one does too.
    pub coincidence_monotone: bool,
}

/// Allowed relative rise between consecutive sweep entries.
pub const TREND_SLACK: f64 = 0.1;
/// Untruncated residual required for a coincidence to count.
pub const COINCIDENCE_RESIDUAL: f64 = 1e-7;

impl SweepTrends {
    /// `entries` in sweep order; `None` marks a failed solve.
    pub fn from_entries(entries: &[Option<TrendPoint>]) -> Self {
        let ok: Vec<_> = entries.iter().flatten().collect();
        let all_ok = ok.len() == entries.len() && !ok.is_empty();
        let steps_ok = |pick: fn(&TrendPoint) -> f64| {
            all_ok
                && ok
                    .windows(2)
                    .all(|w| pick(w[1]) <= (1.0 + TREND_SLACK) * pick(w[0]))
        };
        let h1_nonincreasing = steps_ok(|e| e.h1_norm_u);
        let sup_nonincreasing = steps_ok(|e| e.sup_u_lambda);
        let h1_final_ratio = match (ok.first(), ok.last()) {
            (Some(a), Some(b)) if all_ok => b.h1_norm_u / a.h1_norm_u,
            _ => f64::NAN,
        };
        let good: Vec<bool> = entries
            .iter()
            .map(|e| e.is_some_and(|e| e.coincide && e.j_residual_norm < COINCIDENCE_RESIDUAL))
            .collect();
        let first_good = good.iter().position(|&g| g);
        let coincidence_monotone = match first_good {
            Some(i) => good[i..].iter().all(|&g| g),
            None => true,
        };
        let mut coincidence_threshold = None;
        for (entry, &g) in entries.iter().zip(&good).rev() {
            if !g {
                break;
            }
            coincidence_threshold = entry.map(|e| e.epsilon);
        }
        Self {
            h1_nonincreasing,
            h1_final_ratio,
            h1_decreasing: h1_nonincreasing && h1_final_ratio < 0.5,
            sup_nonincreasing,
            coincidence_threshold,
            coincidence_monotone,
        }
    }
}

// ---------------------------------------------------------------------------
// J versus H

/// When the truncation is inactive at `v`, both functionals and their
/// gradients must agree; otherwise the gap `int |W - G|` is reported.
pub fn compare_j_h(
    profile: &Profile,
    spec: &ProblemSpec,
    eps: f64,
    tol: &Tolerances,
) -> DiagnosticReport {
    let v = match profile.v_field() {
        Ok(v) => v,
        Err(e) => {
            return DiagnosticReport::new("compare_J_H", false, tol.energy_agreement, None)
                .note(e.to_string())
        }
    };
    let grid = v.grid().clone();
    let h_model = EnergyModel::truncated(spec, &grid, eps);
    let j_model = EnergyModel::original(spec, &grid, eps);
    let evaluated = (|| -> Result<_> {
        let cert = certify_coincidence(&v, spec, eps)?;
        let eh = h_model.energy(v.values())?;
        let ej = j_model.energy(v.values())?;
        let gh = h_model.gradient(v.values())?;
        let gj = j_model.gradient(v.values())?;
        let ph = h_model.parts(v.values())?;
        let pj = j_model.parts(v.values())?;
        Ok((cert, eh, ej, gh, gj, (ph.nonlinear - pj.nonlinear).abs()))
    })();
    let (cert, eh, ej, gh, gj, _) = match evaluated {
        Ok(x) => x,
        Err(e) => {
            return DiagnosticReport::new("compare_J_H", false, tol.energy_agreement, None)
                .note(e.to_string())
        }
    };
    let scale = gh.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (mut gap, mut gap_at) = (0.0f64, None);
    for (i, (a, b)) in gh.iter().zip(&gj).enumerate() {
        let d = (a - b).abs();
        if d > gap {
            gap = d;
            gap_at = Some(grid.nodes()[i]);
        }
    }
    let w_minus_g = truncation_gap(&v, spec).unwrap_or(f64::NAN);
    let energy_gap = (ej - eh).abs();
    let sample = Sample::at(
        gap_at,
        &[
            ("energy_h", eh),
            ("energy_j", ej),
            ("energy_gap", energy_gap),
            ("gradient_gap", gap),
            ("int_abs_w_minus_g", w_minus_g),
            ("max_f_on_lambda_bar", cert.max_f_on_lambda_bar),
            ("max_f_off_lambda_bar", cert.max_f_off_lambda_bar),
        ],
    );
    if cert.coincide {
        let passed = energy_gap <= tol.energy_agreement * (1.0 + eh.abs())
            && gap <= tol.gradient_agreement * (1.0 + scale);
        DiagnosticReport::new("compare_J_H", passed, tol.energy_agreement, Some(sample))
            .note("truncation inactive")
    } else {
        DiagnosticReport::new("compare_J_H", true, tol.energy_agreement, Some(sample))
            .note("truncation active: functionals differ by the reported gap")
    }
}

/// `int |W(x, f(v)) - G(f(v))|` with the lumped weights.
pub fn truncation_gap(v: &DiscreteField, spec: &ProblemSpec) -> Result<f64> {
    let tc = TransformCalculus::default();
    let grid = v.grid();
    let mut acc = NeumaierSum::default();
    for ((&r, &w), &x) in grid.nodes().iter().zip(grid.weights()).zip(v.values()) {
        let u = tc.f_inverse(x)?.abs();
        acc.add(
            w * (spec.truncation().W_eval(r, u)? - spec.nonlinearity().antiderivative(u)).abs(),
        );
    }
    Ok(acc.total())
}
