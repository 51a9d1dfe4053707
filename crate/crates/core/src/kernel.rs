//! Heat kernel `k(t,x,y) = Σ e^{-λ_n t} ψ_n(x) ψ_n(y)` and the resolvent
//! Green function `G_t(x) = (tH + 1)^{-1}` evaluated on the diagonal.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::linalg::{axpy, dot, BandCholesky};
use crate::operator::DiscreteOperator;
use crate::spectral::{eigendecompose_with, ModeCount, SolverOptions, SpectralDecomposition};

/// Modes with `e^{-λ t} < RELATIVE_WEIGHT e^{-λ₀ t}` may be dropped.
pub const RELATIVE_WEIGHT: f64 = 1e-16;
/// Largest allowed truncation remainder relative to the returned value.
pub const TRUNCATION_TOLERANCE: f64 = 1e-12;

/// Evaluates the heat kernel from a (possibly partial) spectral decomposition.
#[derive(Debug, Clone)]
pub struct KernelEvaluator {
    sd: Arc<SpectralDecomposition>,
}

impl KernelEvaluator {
    pub fn new(sd: Arc<SpectralDecomposition>) -> Self {
        KernelEvaluator { sd }
    }

    /// Decomposition holding enough modes for every `t >= t_min`.
    pub fn for_min_time(op: &DiscreteOperator, t_min: f64) -> Result<Self> {
        if !(t_min > 0.0 && t_min.is_finite()) {
            return Err(invalid(format!("t_min must be positive, got {t_min}")));
        }
        let ground = eigendecompose_with(op, ModeCount::Lowest(1), &SolverOptions::default())?;
        // the remainder bound carries the nodal mass 1/h^N and must stay small
        // relative to kernel values that vanish like d^{2m} near the boundary
        let margin = (1.0 / RELATIVE_WEIGHT).ln() + (1.0 / op.mass_weight()).ln() + 30.0;
        let cutoff = ground.spectral_gap() + margin / t_min;
        let sd = eigendecompose_with(op, ModeCount::Below(cutoff), &SolverOptions::default())?;
        Ok(Self::new(Arc::new(sd)))
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.sd
    }

    fn check_node(&self, x: usize) -> Result<()> {
        let n = self.sd.op().len();
        if x >= n {
            return Err(invalid(format!("node {x} outside grid of {n} nodes")));
        }
        Ok(())
    }

    /// Bound on `e^{-λ t}` over every mode not in the decomposition.
    fn missing_weight(&self, t: f64) -> f64 {
        if self.sd.is_complete() {
            0.0
        } else {
            (-self.sd.missing_floor() * t).exp()
        }
    }

    /// `k(t, x, y)` at grid nodes.
    pub fn heat_kernel(&self, t: f64, x: usize, y: usize) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid(format!("heat kernel needs t > 0, got {t}")));
        }
        self.check_node(x)?;
        self.check_node(y)?;
        let sd = &*self.sd;
        let mut terms: Vec<f64> = (0..sd.len())
            .map(|k| (-sd.eigenvalues[k] * t).exp() * sd.value(k, x) * sd.value(k, y))
            .collect();
        // smallest magnitudes first
        terms.reverse();
        let value: f64 = terms.iter().sum();
        let tail = self.missing_weight(t);
        if tail > 0.0 {
            let remainder = tail * (sd.residual_mass(x) * sd.residual_mass(y)).sqrt();
            let diag = |z: usize| -> f64 {
                (0..sd.len())
                    .map(|k| (-sd.eigenvalues[k] * t).exp() * sd.value(k, z).powi(2))
                    .sum()
            };
            let scale = if x == y { value } else { (diag(x) * diag(y)).sqrt() };
            if remainder > TRUNCATION_TOLERANCE * scale {
                return Err(Error::Truncation {
                    t,
                    remainder,
                    value,
                    tolerance: TRUNCATION_TOLERANCE,
                });
            }
        }
        Ok(value)
    }

    pub fn diagonal(&self, t: f64, x: usize) -> Result<f64> {
        self.heat_kernel(t, x, x)
    }

    /// `G_t(x) = Σ ψ_n(x)² / (tλ_n + 1)`; needs (essentially) all modes.
    pub fn green_spectral(&self, t: f64, x: usize) -> Result<f64> {
        check_time(t)?;
        self.check_node(x)?;
        let sd = &*self.sd;
        let mut terms: Vec<f64> = (0..sd.len())
            .map(|k| sd.value(k, x).powi(2) / (t * sd.eigenvalues[k] + 1.0))
            .collect();
        terms.reverse();
        let value: f64 = terms.iter().sum();
        if !sd.is_complete() {
            let remainder = sd.residual_mass(x) / (t * sd.missing_floor() + 1.0);
            if remainder > TRUNCATION_TOLERANCE * value {
                return Err(Error::Truncation {
                    t,
                    remainder,
                    value,
                    tolerance: TRUNCATION_TOLERANCE,
                });
            }
        }
        Ok(value)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("resolvent needs t >= 0, got {t}")));
    }
    Ok(())
}

/// How to evaluate the resolvent diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreenRoute {
    /// Eigen-expansion (complete decomposition computed on the fly).
    Spectral,
    /// Banded Cholesky solve of `(tS + M) u = e_x`.
    Solve,
    /// Direct maximization of `g(x)² / (t Q(g) + |g|²)` via the forms only.
    Variational,
}

#[derive(Debug, Clone)]
pub struct VariationalOptions {
    /// Stop once the value improves by less than this (relative) over `window` iterations.
    pub tol: f64,
    pub window: usize,
    pub max_iter: usize,
}

impl Default for VariationalOptions {
    fn default() -> Self {
        VariationalOptions {
            tol: 1e-10,
            window: 50,
            max_iter: 200_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VariationalResult {
    pub value: f64,
    /// Maximizer normalized to `g(x) = 1`.
    pub maximizer: Vec<f64>,
    pub iterations: usize,
}

/// `G_t(x)` at node `x`.
pub fn green_resolvent(op: &DiscreteOperator, t: f64, x: usize, route: GreenRoute) -> Result<f64> {
    check_time(t)?;
    if x >= op.len() {
        return Err(invalid(format!("node {x} outside grid of {} nodes", op.len())));
    }
    if t == 0.0 {
        return Ok(1.0 / op.mass_weight());
    }
    match route {
        GreenRoute::Spectral => {
            let sd = eigendecompose_with(op, ModeCount::All, &SolverOptions::default())?;
            KernelEvaluator::new(Arc::new(sd)).green_spectral(t, x)
        }
        GreenRoute::Solve => green_solve(op, t, &[x]).map(|v| v[0]),
        GreenRoute::Variational => {
            green_variational(op, t, x, &VariationalOptions::default()).map(|r| r.value)
        }
    }
}

/// Resolvent diagonal at several nodes sharing one factorization.
pub fn green_solve(op: &DiscreteOperator, t: f64, nodes: &[usize]) -> Result<Vec<f64>> {
    check_time(t)?;
    let w = op.mass_weight();
    let a = op.stiffness_matrix().scaled_shift(t, w);
    let chol = BandCholesky::factor(&a)?;
    nodes
        .iter()
        .map(|&x| {
            if x >= op.len() {
                return Err(invalid(format!("node {x} outside grid")));
            }
            let mut e = vec![0.0; op.len()];
            e[x] = 1.0;
            Ok(chol.solve(&e)[x])
        })
        .collect()
}

/// Maximizes `g(x)² / (t Q(g) + M(g,g))` by conjugate gradients on the
/// constraint plane `g(x) = 1`, using only the quadratic forms.
pub fn green_variational(
    op: &DiscreteOperator,
    t: f64,
    x: usize,
    opts: &VariationalOptions,
) -> Result<VariationalResult> {
    check_time(t)?;
    let n = op.len();
    if x >= n {
        return Err(invalid(format!("node {x} outside grid of {n} nodes")));
    }
    let w = op.mass_weight();
    // energy E(g) = t Q(g) + w |g|² and its half-gradient r = (tS + w) g
    let apply = |v: &[f64]| -> Vec<f64> {
        let mut s = op.apply_stiffness(v).expect("sized");
        s.iter_mut().zip(v).for_each(|(s, v)| *s = t * *s + w * v);
        s
    };
    let energy = |v: &[f64]| -> f64 { t * op.quadratic_form(v).expect("sized") + w * dot(v, v) };

    let mut g = vec![0.0; n];
    g[x] = 1.0;
    let mut r = apply(&g);
    r[x] = 0.0;
    let mut p: Vec<f64> = r.iter().map(|v| -v).collect();
    let mut rr_old = dot(&r, &r);
    let mut history = vec![1.0 / energy(&g)];
    let mut iterations = 0;
    while iterations < opts.max_iter && rr_old > 0.0 {
        iterations += 1;
        let curvature = energy(&p);
        if !(curvature > 0.0) {
            break;
        }
        let alpha = -dot(&r, &p) / curvature;
        axpy(alpha, &p, &mut g);
        g[x] = 1.0;
        let r_old = r.clone();
        if iterations % 64 == 0 {
            // resync the recurrence against drift
            r = apply(&g);
        } else {
            let ap = apply(&p);
            axpy(alpha, &ap, &mut r);
        }
        r[x] = 0.0;
        let rr = dot(&r, &r);
        // Polak–Ribière, clipped at zero (automatic restart)
        let beta = ((rr - dot(&r, &r_old)) / rr_old).max(0.0);
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = -ri + beta * *pi;
        }
        rr_old = rr;
        let value = 1.0 / energy(&g);
        history.push(value);
        if history.len() > opts.window {
            let old = history[history.len() - 1 - opts.window];
            if value - old < opts.tol * value {
                break;
            }
        }
    }
    if iterations >= opts.max_iter {
        return Err(Error::NoConvergence {
            what: "variational resolvent maximizer",
            iterations,
        });
    }
    let value = 1.0 / energy(&g);
    Ok(VariationalResult {
        value,
        maximizer: g,
        iterations,
    })
}
