//! Interpolation bootstrap: turns a Green lower bound and a kernel upper bound
//! `U` into a pointwise lower bound `δ*·U(t,x)` for the heat kernel diagonal.
//!
//! With `δ = k(t,x,x)/U(t,x)` and `p(s) = s(1−α)/(1−αs)`,
//!
//! ```text
//! G_t(x,x) / U(t,x) ≤ ∫₀¹ U(αts,x)/U(t,x) δ^{p(s)} ds + δ/e =: RHS(δ)
//! ```
//!
//! so any `δ*` with `RHS(δ*) = G/U` (or smaller) is a lower bound for `δ`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::bounds::BoundParams;
use crate::error::{invalid, Error, Result};
use crate::kernel::{green_solve, KernelEvaluator};
use crate::operator::DiscreteOperator;
use crate::quadrature::GaussLegendre;
use crate::test_functions::TestFunctionFamily;

/// A time profile `t ↦ U(t)` at a fixed point.
pub trait TimeTemplate {
    fn at(&self, t: f64) -> f64;
    /// Time where the profile switches formula, if any.
    fn seam(&self) -> Option<f64> {
        None
    }
    /// `κ` of a `t^{−κ}` blow-up at `t → 0`.
    fn singularity(&self) -> f64 {
        0.0
    }
}

/// Time-independent template.
#[derive(Debug, Clone, Copy)]
pub struct ConstantTemplate(pub f64);

impl TimeTemplate for ConstantTemplate {
    fn at(&self, _t: f64) -> f64 {
        self.0
    }
}

/// The calibrated upper bound `U(·, x)` at boundary distance `d`.
#[derive(Debug, Clone, Copy)]
pub struct UpperAt<'a> {
    params: &'a BoundParams,
    d: f64,
}

impl<'a> UpperAt<'a> {
    pub fn new(params: &'a BoundParams, d: f64) -> Result<Self> {
        params.upper_bound_u(1.0, d)?;
        params.upper_bound_u(params.seam(), d)?;
        Ok(UpperAt { params, d })
    }
}

impl TimeTemplate for UpperAt<'_> {
    fn at(&self, t: f64) -> f64 {
        self.params.upper_bound_u(t, self.d).expect("validated on construction")
    }
    fn seam(&self) -> Option<f64> {
        Some(self.params.seam())
    }
    fn singularity(&self) -> f64 {
        self.params.kappa()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub alpha: f64,
    /// Gauss–Legendre nodes per quadrature piece.
    pub nodes: usize,
    pub delta_tol: f64,
    /// Maximize `δ*` over `α ∈ {0.1, …, 0.9}` instead of using `alpha` alone.
    pub sweep_alpha: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            alpha: 0.5,
            nodes: 256,
            delta_tol: 1e-12,
            sweep_alpha: false,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        if self.nodes < 64 {
            return Err(invalid(format!("need at least 64 quadrature nodes, got {}", self.nodes)));
        }
        if !(self.delta_tol > 0.0 && self.delta_tol <= 1e-10) {
            return Err(invalid(format!("delta_tol must lie in (0, 1e-10], got {}", self.delta_tol)));
        }
        Ok(())
    }

    fn alphas(&self) -> Vec<f64> {
        if self.sweep_alpha {
            (1..=9).map(|i| i as f64 / 10.0).collect()
        } else {
            vec![self.alpha]
        }
    }
}

/// `p = s(1−α)/(1−αs)`, the solution of `p + (1−p)αs = s`.
pub fn p_of(alpha: f64, s: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0 && s > 0.0 && s < 1.0) {
        return Err(invalid(format!("p_of needs alpha, s in (0,1), got {alpha}, {s}")));
    }
    Ok(p_raw(alpha, s))
}

#[inline]
fn p_raw(alpha: f64, s: f64) -> f64 {
    s * (1.0 - alpha) / (1.0 - alpha * s)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Compares `k(ts)` against `U(αts)^{1−p} U(t)^p δ^p` with actual kernel values.
pub fn interpolation_check(
    ke: &KernelEvaluator,
    u: &dyn TimeTemplate,
    t: f64,
    x: usize,
    alpha: f64,
    s: f64,
) -> Result<InterpolationCheck> {
    let p = p_of(alpha, s)?;
    let kt = ke.diagonal(t, x)?;
    let ut = u.at(t);
    let delta = kt / ut;
    if delta > 1.0 {
        return Err(Error::CalibrationViolated { t, delta });
    }
    let lhs = ke.diagonal(t * s, x)?;
    let rhs = u.at(alpha * t * s).powf(1.0 - p) * ut.powf(p) * delta.powf(p);
    Ok(InterpolationCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-10),
    })
}

/// `∫₀¹ U(αts)/U(t) δ^{p(s)} ds + δ/e`.
pub fn green_heat_rhs(u: &dyn TimeTemplate, t: f64, delta: f64, cfg: &BootstrapConfig) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta must lie in (0,1], got {delta}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("t must be positive, got {t}")));
    }
    cfg.validate()?;
    let gl = GaussLegendre::new(cfg.nodes);
    Ok(rhs_with(u, t, delta, cfg.alpha, &gl))
}

fn rhs_with(u: &dyn TimeTemplate, t: f64, delta: f64, alpha: f64, gl: &GaussLegendre) -> f64 {
    let ut = u.at(t);
    let kappa = u.singularity();
    // s = v^q removes the s^{-κ} endpoint singularity
    let q = 1.0 / (1.0 - kappa);
    let ln_delta = delta.ln();
    let mut breaks = vec![0.0, 1.0];
    if let Some(seam) = u.seam() {
        let s = seam / (alpha * t);
        if s > 0.0 && s < 1.0 {
            breaks.push(s);
        }
    }
    // δ^p decays like exp(−(1−α) s |ln δ|); resolve that scale separately
    if ln_delta < -1.0 {
        for c in [1.0, 30.0] {
            let s = c / ((1.0 - alpha) * -ln_delta);
            if s < 1.0 {
                breaks.push(s);
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let integrand = |v: f64| -> f64 {
        let s = v.powf(q);
        if s <= 0.0 {
            return 0.0;
        }
        let ds = q * v.powf(q - 1.0);
        let p = p_raw(alpha, s);
        u.at(alpha * t * s) / ut * (p * ln_delta).exp() * ds
    };
    let mut integral = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0].powf(1.0 / q), w[1].powf(1.0 / q));
        integral += gl.integrate(a, b, integrand);
    }
    integral + delta / std::f64::consts::E
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapStatus {
    /// `δ*` found in `(0, 1]`.
    Bound,
    /// `δ*` below the smallest representable scale; reported as 0.
    Underflow,
    /// `G/U` exceeds `RHS(1)`: no information at this point.
    Vacuous,
}

impl BootstrapStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            BootstrapStatus::Bound => "bound",
            BootstrapStatus::Underflow => "underflow",
            BootstrapStatus::Vacuous => "vacuous",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaStar {
    pub delta: f64,
    pub status: BootstrapStatus,
}

const DELTA_FLOOR: f64 = 1e-300;

/// Root of `RHS(δ) = g_ratio` by bisection; returns the lower end of the final
/// bracket so the result never exceeds the true root.
pub fn solve_delta_star(
    g_ratio: f64,
    u: &dyn TimeTemplate,
    t: f64,
    cfg: &BootstrapConfig,
) -> Result<DeltaStar> {
    cfg.validate()?;
    if !(g_ratio > 0.0 && g_ratio.is_finite()) {
        return Err(invalid(format!("G ratio must be positive, got {g_ratio}")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid(format!("t must be positive, got {t}")));
    }
    let gl = GaussLegendre::new(cfg.nodes);
    let rhs = |d: f64| rhs_with(u, t, d, cfg.alpha, &gl);

    // monotonicity spot check
    let mut prev = f64::NEG_INFINITY;
    for k in (0..=40).rev() {
        let v = rhs(0.5f64.powi(k));
        if !(v > prev) {
            return Err(Error::Numerical(format!(
                "green-heat right-hand side not increasing near delta = 2^-{k}"
            )));
        }
        prev = v;
    }

    if g_ratio > rhs(1.0) {
        return Ok(DeltaStar {
            delta: 0.0,
            status: BootstrapStatus::Vacuous,
        });
    }
    if rhs(DELTA_FLOOR) >= g_ratio {
        return Ok(DeltaStar {
            delta: 0.0,
            status: BootstrapStatus::Underflow,
        });
    }
    let (mut lo, mut hi) = (DELTA_FLOOR, 1.0);
    let mut iterations = 0;
    while hi - lo > cfg.delta_tol * hi {
        iterations += 1;
        if iterations > 5000 {
            return Err(Error::NoConvergence {
                what: "delta bisection",
                iterations,
            });
        }
        let mid = if hi > 4.0 * lo {
            (0.5 * (lo.ln() + hi.ln())).exp()
        } else {
            0.5 * (lo + hi)
        };
        if rhs(mid) < g_ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DeltaStar {
        delta: lo,
        status: BootstrapStatus::Bound,
    })
}

/// Where the Green value fed into the bootstrap comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenSource {
    /// Resolvent computed by a banded solve.
    Measured,
    /// Test-function lower bound; independent of any kernel value.
    Certified,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOutcome {
    pub lower: f64,
    pub delta_star: f64,
    pub status: BootstrapStatus,
    pub alpha: f64,
    pub green: f64,
    pub upper: f64,
}

/// Bootstrap from an already computed Green value.
pub fn bootstrap_from_green(
    green: f64,
    params: &BoundParams,
    d: f64,
    t: f64,
    cfg: &BootstrapConfig,
) -> Result<BootstrapOutcome> {
    let u = UpperAt::new(params, d)?;
    let ut = u.at(t);
    if !(ut > 0.0) {
        return Err(invalid(format!("upper bound vanishes at t={t}, d={d}")));
    }
    let mut best: Option<BootstrapOutcome> = None;
    for alpha in cfg.alphas() {
        let c = BootstrapConfig {
            alpha,
            ..cfg.clone()
        };
        let ds = solve_delta_star(green / ut, &u, t, &c)?;
        let outcome = BootstrapOutcome {
            lower: ds.delta * ut,
            delta_star: ds.delta,
            status: ds.status,
            alpha,
            green,
            upper: ut,
        };
        best = match best {
            Some(b) if b.status == BootstrapStatus::Bound && b.delta_star >= ds.delta => Some(b),
            Some(b) if ds.status == BootstrapStatus::Vacuous => Some(b),
            _ => Some(outcome),
        };
    }
    Ok(best.expect("at least one alpha"))
}

/// Lower bound `δ*·U(t,x)` at grid node `x`.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_lower_bound(
    op: &DiscreteOperator,
    params: &BoundParams,
    family: &TestFunctionFamily,
    t: f64,
    x: usize,
    cfg: &BootstrapConfig,
    source: GreenSource,
) -> Result<BootstrapOutcome> {
    if x >= op.len() {
        return Err(invalid(format!("node {x} outside grid")));
    }
    let green = match source {
        GreenSource::Measured => green_solve(op, t, &[x])?[0],
        GreenSource::Certified => family.green_lower_bound_discrete(op, t, x, true)?.value,
    };
    bootstrap_from_green(green, params, op.grid.node_distance(x), t, cfg)
}

/// Closed-form estimate of the integral term and the `κ` term:
/// `([ln 1/κ]^{θ−1} Γ(1 − θ/2), κ/e)` with `κ = δ / e^{μt(1−θ/2)}`.
pub fn gamma_term_estimate(theta: f64, t: f64, mu: f64, delta: f64, _alpha: f64) -> Result<(f64, f64)> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("theta must lie in (0,1), got {theta}")));
    }
    let kappa = delta / (mu * t * (1.0 - 0.5 * theta)).exp();
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(invalid(format!("kappa must lie in (0,1), got {kappa}")));
    }
    let l = (1.0 / kappa).ln();
    Ok((l.powf(theta - 1.0) * gamma(1.0 - 0.5 * theta), kappa / std::f64::consts::E))
}

/// `∫₀^∞ s^{−θ} e^{−Ls} ds = Γ(1−θ) L^{θ−1}`, the integral the closed form stands in for.
pub fn laplace_integral(theta: f64, l: f64) -> f64 {
    gamma(1.0 - theta) * l.powf(theta - 1.0)
}
