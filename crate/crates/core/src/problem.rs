//! Potentials, nonlinearities, hypothesis validators and the truncated
//! nonlinearity `w(x, s)` that replaces `g` outside the annulus `Lambda`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Radii `0 < R1 < r1 < r2 < R2` of the two nested annuli.
///
/// `Omega = {r1 < r < r2}` is where the potential vanishes and
/// `Lambda = {R1 < r < R2}` is where the nonlinearity is left untouched.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annuli {
    pub lambda_inner: f64,
    pub omega_inner: f64,
    pub omega_outer: f64,
    pub lambda_outer: f64,
}

impl Annuli {
    pub fn new(
        lambda_inner: f64,
        omega_inner: f64,
        omega_outer: f64,
        lambda_outer: f64,
    ) -> Result<Self> {
        let radii = [lambda_inner, omega_inner, omega_outer, lambda_outer];
        if radii.iter().any(|r| !r.is_finite()) {
            return Err(Error::Validation(format!(
                "radii must be finite, got {radii:?}"
            )));
        }
        if !(0.0 < lambda_inner
            && lambda_inner < omega_inner
            && omega_inner < omega_outer
            && omega_outer < lambda_outer)
        {
            return Err(Error::Validation(format!(
                "radii must satisfy 0 < R1 < r1 < r2 < R2, got {radii:?}"
            )));
        }
        Ok(Self {
            lambda_inner,
            omega_inner,
            omega_outer,
            lambda_outer,
        })
    }

    /// Open annulus `Lambda`.
    pub fn in_lambda(&self, r: f64) -> bool {
        self.lambda_inner < r && r < self.lambda_outer
    }

    pub fn in_lambda_closure(&self, r: f64) -> bool {
        self.lambda_inner <= r && r <= self.lambda_outer
    }

    pub fn in_omega(&self, r: f64) -> bool {
        self.omega_inner < r && r < self.omega_outer
    }
}

/// Radial potential `V(|x|) >= 0`.
#[derive(Clone)]
pub struct Potential {
    annuli: Annuli,
    alpha: f64,
    profile: RadialFn,
    label: String,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("annuli", &self.annuli)
            .field("alpha", &self.alpha)
            .field("label", &self.label)
            .finish()
    }
}

impl Potential {
    /// Wraps an arbitrary radial profile. Conditions A1/A2 are not checked
    /// here; see [`verify_hypotheses`].
    pub fn from_fn<F>(
        annuli: Annuli,
        alpha: f64,
        label: impl Into<String>,
        profile: F,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Validation(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        Ok(Self {
            annuli,
            alpha,
            profile: Arc::new(profile),
            label: label.into(),
        })
    }

    pub fn annuli(&self) -> &Annuli {
        &self.annuli
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self, r: f64) -> f64 {
        (self.profile)(r)
    }
}

/// Piecewise-linear tent: `alpha` on `[0, R1]`, down to zero at `r1`, zero on
/// `[r1, r2]`, back up to `alpha` at `R2` and constant beyond.
pub fn build_tent_potential(
    lambda_inner: f64,
    omega_inner: f64,
    omega_outer: f64,
    lambda_outer: f64,
    alpha: f64,
) -> Result<Potential> {
    let annuli = Annuli::new(lambda_inner, omega_inner, omega_outer, lambda_outer)?;
    Potential::from_fn(annuli, alpha, "tent", move |r| {
        if r <= lambda_inner {
            alpha
        } else if r < omega_inner {
            alpha * (omega_inner - r) / (omega_inner - lambda_inner)
        } else if r <= omega_outer {
            0.0
        } else if r < lambda_outer {
            alpha * (r - omega_outer) / (lambda_outer - omega_outer)
        } else {
            alpha
        }
    })
}

#[derive(Clone)]
pub enum NonlinearityKind {
    /// `g(t) = t^p`.
    Power { p: f64 },
    /// `g(t) = t`. Violates H1 and H4; kept for validator and failure paths.
    Linear,
    /// User supplied `g` and `g'`; the antiderivative is computed by
    /// adaptive quadrature.
    Custom {
        g: RadialFn,
        dg: RadialFn,
        label: String,
    },
}

impl fmt::Debug for NonlinearityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NonlinearityKind::Power { p } => write!(f, "Power {{ p: {p} }}"),
            NonlinearityKind::Linear => write!(f, "Linear"),
            NonlinearityKind::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

/// Nonlinearity `g` on `[0, inf)` with its antiderivative and the
/// Ambrosetti-Rabinowitz exponent `theta`.
#[derive(Clone, Debug)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    theta: f64,
}

/// `g(t) = t^p`, `G(t) = t^(p+1)/(p+1)`, `theta = p + 1`.
pub fn power_nonlinearity(p: f64) -> Result<Nonlinearity> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Validation(format!(
            "power nonlinearity needs p > 1 (g(t)/t must vanish at 0), got p = {p}"
        )));
    }
    Ok(Nonlinearity {
        kind: NonlinearityKind::Power { p },
        theta: p + 1.0,
    })
}

impl Nonlinearity {
    pub fn linear() -> Self {
        Nonlinearity {
            kind: NonlinearityKind::Linear,
            theta: 2.0,
        }
    }

    pub fn custom<G, D>(label: impl Into<String>, theta: f64, g: G, dg: D) -> Self
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Nonlinearity {
            kind: NonlinearityKind::Custom {
                g: Arc::new(g),
                dg: Arc::new(dg),
                label: label.into(),
            },
            theta,
        }
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn has_closed_form_antiderivative(&self) -> bool {
        !matches!(self.kind, NonlinearityKind::Custom { .. })
    }

    pub fn g(&self, t: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Power { p } => t.powf(*p),
            NonlinearityKind::Linear => t,
            NonlinearityKind::Custom { g, .. } => g(t),
        }
    }

    pub fn dg(&self, t: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Power { p } => {
                if t == 0.0 {
                    0.0
                } else {
                    p * t.powf(p - 1.0)
                }
            }
            NonlinearityKind::Linear => 1.0,
            NonlinearityKind::Custom { dg, .. } => dg(t),
        }
    }

    /// `G(t) = int_0^t g`.
    pub fn antiderivative(&self, t: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Power { p } => t.powf(p + 1.0) / (p + 1.0),
            NonlinearityKind::Linear => 0.5 * t * t,
            NonlinearityKind::Custom { g, .. } => adaptive_simpson(|s| g(s), 0.0, t, 1e-10),
        }
    }

    /// `ln g(t)`, evaluated without forming `g(t)` for power laws.
    pub fn ln_g(&self, t: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Power { p } => p * t.ln(),
            NonlinearityKind::Linear => t.ln(),
            NonlinearityKind::Custom { g, .. } => g(t).ln(),
        }
    }
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let scale = 1.0 + whole.abs();
    step(&f, a, b, fa, fm, fb, whole, tol * scale, 48)
}

/// Smallest `a > 0` with `g(a)/a = alpha/k`.
///
/// `g(t)/t` is nondecreasing under H3, so bisection on the predicate
/// `g(t)/t >= alpha/k` converges to the left end of any plateau.
pub fn solve_truncation_level(g: &Nonlinearity, alpha: f64, k: f64) -> Result<f64> {
    check_k(g.theta(), k)?;
    let target = alpha / k;
    let ratio = |t: f64| g.g(t) / t;
    const LIMIT: f64 = 1e12;

    let mut hi = 1.0;
    while !(ratio(hi) >= target) {
        hi *= 2.0;
        if hi > LIMIT {
            return Err(Error::TruncationUnreachable {
                target,
                limit: LIMIT,
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..400 {
        if hi - lo <= 1e-14 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if ratio(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `k > max{theta/(theta-2), 2}` with `theta > 2`.
pub fn check_k(theta: f64, k: f64) -> Result<()> {
    if !(theta > 2.0) {
        return Err(Error::Validation(format!(
            "Ambrosetti-Rabinowitz exponent must exceed 2, got theta = {theta}"
        )));
    }
    let bound = (theta / (theta - 2.0)).max(2.0);
    if !(k > bound) {
        return Err(Error::Validation(format!(
            "truncation constant must satisfy k > max(theta/(theta-2), 2) = {bound}, got k = {k}"
        )));
    }
    Ok(())
}

/// `w(x, s) = chi_Lambda g(s) + (1 - chi_Lambda) gbar(s)` and its primitive.
#[derive(Clone, Debug)]
pub struct TruncatedNonlinearity {
    parent: Nonlinearity,
    potential: Potential,
    k: f64,
    a: f64,
    slope: f64,
    primitive_at_a: f64,
}

impl TruncatedNonlinearity {
    pub fn new(parent: Nonlinearity, potential: Potential, k: f64) -> Result<Self> {
        let a = solve_truncation_level(&parent, potential.alpha(), k)?;
        let slope = potential.alpha() / k;
        let primitive_at_a = parent.antiderivative(a);
        Ok(Self {
            parent,
            potential,
            k,
            a,
            slope,
            primitive_at_a,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Truncation level `a`.
    pub fn level(&self) -> f64 {
        self.a
    }

    pub fn parent(&self) -> &Nonlinearity {
        &self.parent
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// `gbar(s)`: `g` up to `a`, then the line `(alpha/k) s`.
    pub fn g_bar(&self, s: f64) -> f64 {
        if s <= self.a {
            self.parent.g(s)
        } else {
            self.slope * s
        }
    }

    pub fn w_eval(&self, r: f64, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::Domain(format!("w_eval needs s >= 0, got {s}")));
        }
        Ok(self.w(r, s))
    }

    #[allow(non_snake_case)]
    pub fn W_eval(&self, r: f64, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("W_eval needs t >= 0, got {t}")));
        }
        Ok(self.primitive(r, t))
    }

    /// Odd extension of `w(r, .)` to negative arguments.
    pub(crate) fn w(&self, r: f64, s: f64) -> f64 {
        let m = s.abs();
        let value = if self.potential.annuli().in_lambda(r) {
            self.parent.g(m)
        } else {
            self.g_bar(m)
        };
        value.copysign(s)
    }

    /// `d/ds w(r, s)`, even in `s`; the left derivative is used at `s = a`.
    pub(crate) fn dw(&self, r: f64, s: f64) -> f64 {
        let m = s.abs();
        if self.potential.annuli().in_lambda(r) || m <= self.a {
            self.parent.dg(m)
        } else {
            self.slope
        }
    }

    /// `W(r, t) = int_0^t w(r, s) ds`, even in `t`.
    pub(crate) fn primitive(&self, r: f64, t: f64) -> f64 {
        let m = t.abs();
        if self.potential.annuli().in_lambda(r) || m <= self.a {
            self.parent.antiderivative(m)
        } else {
            self.primitive_at_a + 0.5 * self.slope * (m * m - self.a * self.a)
        }
    }
}

/// Fully assembled problem: dimension, potential, nonlinearity and the
/// truncation built from them.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    dimension: usize,
    truncation: TruncatedNonlinearity,
}

impl ProblemSpec {
    pub fn new(
        dimension: usize,
        potential: Potential,
        nonlinearity: Nonlinearity,
        k: f64,
    ) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::Validation(format!(
                "dimension must be at least 2, got {dimension}"
            )));
        }
        let truncation = TruncatedNonlinearity::new(nonlinearity, potential, k)?;
        Ok(Self {
            dimension,
            truncation,
        })
    }

    /// N = 3, tent potential on (1, 2, 3, 4) with alpha = 1, `g = t^p`, k = 4.
    pub fn canonical(p: f64) -> Result<Self> {
        let potential = build_tent_potential(1.0, 2.0, 3.0, 4.0, 1.0)?;
        Self::new(3, potential, power_nonlinearity(p)?, 4.0)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn potential(&self) -> &Potential {
        self.truncation.potential()
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        self.truncation.parent()
    }

    pub fn truncation(&self) -> &TruncatedNonlinearity {
        &self.truncation
    }

    pub fn annuli(&self) -> &Annuli {
        self.potential().annuli()
    }

    pub fn theta(&self) -> f64 {
        self.nonlinearity().theta()
    }

    pub fn k(&self) -> f64 {
        self.truncation.k()
    }

    /// Truncation level `a`.
    pub fn level(&self) -> f64 {
        self.truncation.level()
    }

    pub fn verify(&self, samples: &HypothesisSamples) -> HypothesisReport {
        verify_hypotheses(
            self.dimension,
            self.potential(),
            self.nonlinearity(),
            self.k(),
            samples,
        )
    }
}

// ---------------------------------------------------------------------------
// Growth classification

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthClass {
    Subcritical,
    Critical,
    Supercritical,
}

impl fmt::Display for GrowthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GrowthClass::Subcritical => "subcritical",
            GrowthClass::Critical => "critical",
            GrowthClass::Supercritical => "supercritical",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    pub class: GrowthClass,
    /// `22* = 4N/(N-2)` for `N >= 3`; `None` for `N = 2`.
    pub critical_exponent: Option<f64>,
    pub probes: Vec<f64>,
    /// Logarithm of the probe ratio at each probe point.
    pub log_ratios: Vec<f64>,
}

/// `4N/(N-2)`, the exponent at which `t^(p+1)` becomes critical.
pub fn doubled_critical_exponent(dimension: usize) -> Option<f64> {
    (dimension >= 3).then(|| 4.0 * dimension as f64 / (dimension as f64 - 2.0))
}

const GROWTH_PROBES: [f64; 3] = [1e2, 1e3, 1e4];
/// Change in the log-ratio across all probes below which the ratio is
/// considered bounded away from zero and infinity.
const CRITICAL_BAND: f64 = 0.1;

/// Probes `g(t) / t^(22*-1)` (N >= 3) or `ln g(t) / t^4` (N = 2) at large
/// `t` and reads off the limit behaviour.
pub fn classify_growth(g: &Nonlinearity, dimension: usize) -> Result<GrowthReport> {
    if dimension < 2 {
        return Err(Error::Validation(format!(
            "dimension must be at least 2, got {dimension}"
        )));
    }
    let critical_exponent = doubled_critical_exponent(dimension);
    let log_ratios: Vec<f64> = match critical_exponent {
        Some(q) => GROWTH_PROBES
            .iter()
            .map(|&t| g.ln_g(t) - (q - 1.0) * t.ln())
            .collect(),
        // Effective exponential rate beta(t) = ln g(t) / t^4, compared on a log scale.
        None => GROWTH_PROBES
            .iter()
            .map(|&t| {
                let beta = g.ln_g(t) / t.powi(4);
                if beta > 0.0 {
                    beta.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect(),
    };
    let class = trend(&log_ratios).ok_or_else(|| {
        Error::Numerical(format!(
            "growth classification inconclusive: log-ratios {log_ratios:?}"
        ))
    })?;
    Ok(GrowthReport {
        class,
        critical_exponent,
        probes: GROWTH_PROBES.to_vec(),
        log_ratios,
    })
}

fn trend(log_ratios: &[f64]) -> Option<GrowthClass> {
    if log_ratios.iter().any(|x| x.is_nan()) {
        return None;
    }
    if log_ratios.iter().all(|&x| x == f64::NEG_INFINITY) {
        return Some(GrowthClass::Subcritical);
    }
    if log_ratios.iter().all(|&x| x == f64::INFINITY) {
        return Some(GrowthClass::Supercritical);
    }
    let first = log_ratios[0];
    let last = *log_ratios.last()?;
    if (last - first).abs() <= CRITICAL_BAND {
        return Some(GrowthClass::Critical);
    }
    let increasing = log_ratios.windows(2).all(|w| w[1] > w[0]);
    let decreasing = log_ratios.windows(2).all(|w| w[1] < w[0]);
    match (increasing, decreasing) {
        (true, _) => Some(GrowthClass::Supercritical),
        (_, true) => Some(GrowthClass::Subcritical),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Hypothesis validation

#[derive(Clone, Debug)]
pub struct HypothesisSamples {
    /// Amplitudes at which conditions on `g` are sampled.
    pub t_grid: Vec<f64>,
    /// Radii at which conditions on `V` and `w` are sampled.
    pub r_grid: Vec<f64>,
    /// Bound on `g(t)/t` at `t = 1e-6` for H4.
    pub h4_tol: f64,
    /// Relative slack for inequalities that can hold with equality.
    pub slack: f64,
}

impl HypothesisSamples {
    /// Log-spaced amplitudes on `[1e-4, 1e2]` and uniform radii on
    /// `[0, 4 R2]`, plus the annulus radii themselves.
    pub fn standard(annuli: &Annuli) -> Self {
        let t_grid = (0..=240)
            .map(|i| 10f64.powf(-4.0 + 6.0 * i as f64 / 240.0))
            .collect();
        let r_top = 4.0 * annuli.lambda_outer;
        let mut r_grid: Vec<f64> = (0..=800).map(|i| r_top * i as f64 / 800.0).collect();
        r_grid.extend([
            annuli.lambda_inner,
            annuli.omega_inner,
            annuli.omega_outer,
            annuli.lambda_outer,
        ]);
        r_grid.sort_by(f64::total_cmp);
        r_grid.dedup();
        Self {
            t_grid,
            r_grid,
            h4_tol: 1e-2,
            slack: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    /// Radius of the offending sample, when the condition depends on `x`.
    pub r: Option<f64>,
    /// Amplitude of the offending sample, when the condition depends on `t`.
    pub t: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    pub violation: Option<Violation>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn outcome(name: &str, violation: Option<Violation>) -> HypothesisCheck {
    HypothesisCheck {
        name: name.to_string(),
        passed: violation.is_none(),
        violation,
    }
}

fn le(lhs: f64, rhs: f64, slack: f64) -> bool {
    lhs <= rhs + slack * (1.0 + lhs.abs().max(rhs.abs()))
}

/// Checks A1, A2, H1-H4, the bound on `k` and G1-G2 on the sample grids.
/// Never fails; violations are listed in the report.
pub fn verify_hypotheses(
    dimension: usize,
    potential: &Potential,
    g: &Nonlinearity,
    k: f64,
    samples: &HypothesisSamples,
) -> HypothesisReport {
    let annuli = potential.annuli();
    let alpha = potential.alpha();
    let slack = samples.slack;
    let mut checks = Vec::new();

    checks.push(outcome(
        "dimension",
        (dimension < 2).then(|| Violation {
            r: None,
            t: None,
            detail: format!("N = {dimension} < 2"),
        }),
    ));

    let nonneg = samples.r_grid.iter().find_map(|&r| {
        let v = potential.value(r);
        (!(v >= 0.0) || !v.is_finite()).then(|| Violation {
            r: Some(r),
            t: None,
            detail: format!("V = {v}"),
        })
    });
    checks.push(outcome("V_nonnegative", nonneg));

    let a1 = samples
        .r_grid
        .iter()
        .filter(|&&r| annuli.in_omega(r))
        .find_map(|&r| {
            let v = potential.value(r);
            (v != 0.0).then(|| Violation {
                r: Some(r),
                t: None,
                detail: format!("V = {v} inside Omega"),
            })
        });
    checks.push(outcome("A1", a1));

    let a2 = samples
        .r_grid
        .iter()
        .filter(|&&r| !annuli.in_lambda(r))
        .find_map(|&r| {
            let v = potential.value(r);
            (v < alpha).then(|| Violation {
                r: Some(r),
                t: None,
                detail: format!("V = {v} < alpha = {alpha} outside Lambda"),
            })
        });
    checks.push(outcome("A2", a2));

    // H1: g(t)/t grows without bound; probed over twelve decades.
    let h1_probes: Vec<f64> = (0..=12).map(|i| 10f64.powi(i)).collect();
    let h1_ratios: Vec<f64> = h1_probes.iter().map(|&t| g.g(t) / t).collect();
    let h1_monotone = h1_ratios.windows(2).all(|w| w[1] >= w[0]);
    let h1_growth = h1_ratios[12] >= 10.0 * h1_ratios[0];
    checks.push(outcome(
        "H1",
        (!(h1_monotone && h1_growth)).then(|| Violation {
            r: None,
            t: Some(1e12),
            detail: format!(
                "g(t)/t from {} at t=1 to {} at t=1e12",
                h1_ratios[0], h1_ratios[12]
            ),
        }),
    ));

    let theta = g.theta();
    let h2 = samples.t_grid.iter().find_map(|&t| {
        let big_g = g.antiderivative(t);
        let lhs = theta * big_g;
        let rhs = t * g.g(t);
        (!(big_g >= 0.0 && le(lhs, rhs, slack) && theta > 2.0)).then(|| Violation {
            r: None,
            t: Some(t),
            detail: format!("theta G(t) = {lhs}, t g(t) = {rhs}, theta = {theta}"),
        })
    });
    checks.push(outcome("H2", h2));

    let h3 = samples.t_grid.windows(2).find_map(|w| {
        let q0 = g.g(w[0]) / w[0];
        let q1 = g.g(w[1]) / w[1];
        (!le(q0, q1, slack)).then(|| Violation {
            r: None,
            t: Some(w[1]),
            detail: format!("g(t)/t decreases from {q0} to {q1}"),
        })
    });
    checks.push(outcome("H3", h3));

    let q_small = g.g(1e-6) / 1e-6;
    checks.push(outcome(
        "H4",
        (!(q_small <= samples.h4_tol)).then(|| Violation {
            r: None,
            t: Some(1e-6),
            detail: format!("g(t)/t = {q_small} at t = 1e-6 exceeds {}", samples.h4_tol),
        }),
    ));

    match check_k(theta, k) {
        Ok(()) => checks.push(outcome("k_bound", None)),
        Err(e) => checks.push(outcome(
            "k_bound",
            Some(Violation {
                r: None,
                t: None,
                detail: e.to_string(),
            }),
        )),
    }

    match TruncatedNonlinearity::new(g.clone(), potential.clone(), k) {
        Ok(trunc) => {
            let a = trunc.level();
            let ga = g.g(a);
            let continuity = (ga - (alpha / k) * a).abs() <= 1e-10 * (1.0 + ga);
            checks.push(outcome(
                "gbar_continuity",
                (!continuity).then(|| Violation {
                    r: None,
                    t: Some(a),
                    detail: format!("g(a) = {ga}, (alpha/k) a = {}", alpha / k * a),
                }),
            ));

            let mut g1 = None;
            let mut g2 = None;
            'outer: for &r in &samples.r_grid {
                for &t in &samples.t_grid {
                    let w = trunc.w(r, t);
                    let big_w = trunc.primitive(r, t);
                    if annuli.in_lambda(r) {
                        if g1.is_none() && !(big_w >= 0.0 && le(theta * big_w, w * t, slack)) {
                            g1 = Some(Violation {
                                r: Some(r),
                                t: Some(t),
                                detail: format!("theta W = {}, w t = {}", theta * big_w, w * t),
                            });
                        }
                    } else {
                        let bound = potential.value(r) * t * t / k;
                        if g2.is_none()
                            && !(big_w >= 0.0
                                && le(2.0 * big_w, w * t, slack)
                                && le(w * t, bound, slack))
                        {
                            g2 = Some(Violation {
                                r: Some(r),
                                t: Some(t),
                                detail: format!(
                                    "2W = {}, w t = {}, V t^2/k = {bound}",
                                    2.0 * big_w,
                                    w * t
                                ),
                            });
                        }
                    }
                    if g1.is_some() && g2.is_some() {
                        break 'outer;
                    }
                }
            }
            checks.push(outcome("G1", g1));
            checks.push(outcome("G2", g2));
        }
        Err(e) => {
            for name in ["gbar_continuity", "G1", "G2"] {
                checks.push(outcome(
                    name,
                    Some(Violation {
                        r: None,
                        t: None,
                        detail: format!("truncation unavailable: {e}"),
                    }),
                ));
            }
        }
    }

    HypothesisReport { checks }
}
