//! Closed-form bound templates for the heat kernel diagonal and their
//! empirical constants.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `g(t) = μ e^{−2μt}` for `t > 1/μ`, `t^{−1} e^{−μt−1}` otherwise.
pub fn g_of_t(mu: f64, t: f64) -> Result<f64> {
    if !(mu > 0.0 && t > 0.0 && mu.is_finite() && t.is_finite()) {
        return Err(invalid(format!("g(t) needs mu > 0 and t > 0, got mu={mu}, t={t}")));
    }
    Ok(if t > 1.0 / mu {
        mu * (-2.0 * mu * t).exp()
    } else {
        (-mu * t - 1.0).exp() / t
    })
}

/// `γ = m(1 − ε) − N/2`, so that `(N + 2γ)/2m = 1 − ε`.
pub fn gamma_from_eps(dim: usize, m: usize, eps: f64) -> Result<f64> {
    let max = 1.0 - dim as f64 / (2.0 * m as f64);
    if !(eps > 0.0 && eps <= max) {
        return Err(invalid(format!("eps must lie in (0, {max}], got {eps}")));
    }
    Ok(m as f64 * (1.0 - eps) - dim as f64 / 2.0)
}

/// Short / mid / long time zones of the `(t, d)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Short,
    Mid,
    Long,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Short => "short",
            Regime::Mid => "mid",
            Regime::Long => "long",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Upper,
    Lower,
}

/// Exponents, spectral gap and calibrated constants of the bound templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub dim: usize,
    pub m: usize,
    pub eps: f64,
    pub gamma: f64,
    pub theta: f64,
    pub mu: f64,
    /// Long-time seam sits at `seam_factor / μ` (2 by default).
    pub seam_factor: f64,
    pub c_upper: Option<f64>,
    /// Constant of the `e^{−μt}` branch; falls back to `c_upper` when unset.
    pub c_upper_long: Option<f64>,
    pub c_short: Option<f64>,
    pub c_mid: Option<f64>,
    pub c_long: Option<f64>,
}

impl BoundParams {
    pub fn new(dim: usize, m: usize, eps: f64, mu: f64) -> Result<Self> {
        if 2 * m <= dim {
            return Err(Error::OrderTooLow { order: m, dim });
        }
        let gamma = gamma_from_eps(dim, m, eps)?;
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid(format!("spectral gap must be positive, got {mu}")));
        }
        let ratio = dim as f64 / (2.0 * m as f64);
        Ok(BoundParams {
            dim,
            m,
            eps,
            gamma,
            theta: 0.5 * (ratio + 1.0),
            mu,
            seam_factor: 2.0,
            c_upper: None,
            c_upper_long: None,
            c_short: None,
            c_mid: None,
            c_long: None,
        })
    }

    /// Largest admissible `ε` minus a small margin.
    pub fn default_eps(dim: usize, m: usize) -> f64 {
        1.0 - dim as f64 / (2.0 * m as f64) - 1e-3
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        let ratio = self.dim as f64 / (2.0 * self.m as f64);
        if !(theta >= ratio && theta < 1.0) {
            return Err(invalid(format!("theta must lie in [{ratio}, 1), got {theta}")));
        }
        self.theta = theta;
        Ok(self)
    }

    pub fn with_seam_factor(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(invalid(format!("seam factor must be positive, got {factor}")));
        }
        self.seam_factor = factor;
        Ok(self)
    }

    /// `(N + 2γ) / 2m`.
    pub fn kappa(&self) -> f64 {
        (self.dim as f64 + 2.0 * self.gamma) / (2.0 * self.m as f64)
    }

    pub fn seam(&self) -> f64 {
        self.seam_factor / self.mu
    }

    /// Long if `t ≥ seam`; otherwise short if `t < d^{2m}`, else mid.
    pub fn classify_regime(&self, t: f64, d: f64) -> Regime {
        if t >= self.seam() {
            Regime::Long
        } else if t < d.powi(2 * self.m as i32) {
            Regime::Short
        } else {
            Regime::Mid
        }
    }

    /// Upper template without its constant (branch chosen by the seam).
    pub fn upper_template(&self, t: f64, d: f64) -> f64 {
        let dpow = if self.gamma == 0.0 { 1.0 } else { d.powf(2.0 * self.gamma) };
        let time = if t < self.seam() {
            t.powf(-self.kappa())
        } else {
            (-self.mu * t).exp()
        };
        time * dpow / self.eps
    }

    pub fn upper_bound_u(&self, t: f64, d: f64) -> Result<f64> {
        check_td(t, d)?;
        let c = if t < self.seam() {
            self.c_upper.ok_or(Error::Uncalibrated("c_upper"))?
        } else {
            self.c_upper_long
                .or(self.c_upper)
                .ok_or(Error::Uncalibrated("c_upper"))?
        };
        Ok(c * self.upper_template(t, d))
    }

    /// Both branches of the upper bound at the seam, `(short, long)`.
    pub fn seam_jump(&self, d: f64) -> Result<(f64, f64)> {
        let t = self.seam();
        let cs = self.c_upper.ok_or(Error::Uncalibrated("c_upper"))?;
        let cl = self.c_upper_long.unwrap_or(cs);
        let dpow = d.powf(2.0 * self.gamma) / self.eps;
        Ok((cs * t.powf(-self.kappa()) * dpow, cl * (-self.mu * t).exp() * dpow))
    }

    /// Lower template of `regime` without its constant.
    pub fn lower_template(&self, regime: Regime, t: f64, d: f64) -> f64 {
        let n = self.dim as f64;
        let two_m = 2.0 * self.m as f64;
        match regime {
            Regime::Short => t.powf(-n / two_m),
            Regime::Mid => {
                let scale = d.powf(two_m);
                d.powf(two_m * self.theta - n) / t * (-t / scale).exp()
            }
            Regime::Long => {
                let scale = d.powf(two_m);
                d.powf(two_m - n)
                    * (-self.mu * t).exp()
                    * (-(t / scale).powf(1.0 / (1.0 - self.theta))).exp()
            }
        }
    }

    pub fn lower_bound(&self, regime: Regime, t: f64, d: f64) -> Result<f64> {
        check_td(t, d)?;
        let actual = self.classify_regime(t, d);
        if actual != regime {
            return Err(Error::RegimeMismatch {
                requested: regime.as_str(),
                actual: actual.as_str(),
            });
        }
        if regime != Regime::Short && d <= 0.0 {
            return Err(invalid("mid and long templates need d > 0"));
        }
        let c = match regime {
            Regime::Short => self.c_short.ok_or(Error::Uncalibrated("c_short"))?,
            Regime::Mid => self.c_mid.ok_or(Error::Uncalibrated("c_mid"))?,
            Regime::Long => self.c_long.ok_or(Error::Uncalibrated("c_long"))?,
        };
        Ok(c * self.lower_template(regime, t, d))
    }

    /// Fits `c_upper` on samples before the seam and `c_upper_long` on those after.
    /// Without long-time samples the long branch is joined continuously at the
    /// seam, which stays valid since `k(t) ≤ k(s) e^{−μ(t−s)}`.
    pub fn calibrate_upper(&mut self, samples: &[CalibrationSample]) -> Result<()> {
        let seam = self.seam();
        let (short, long): (Vec<_>, Vec<_>) = samples.iter().partition(|s| s.t < seam);
        if short.is_empty() {
            return Err(invalid("upper calibration needs samples before the seam"));
        }
        let c = calibrate_constant(&short, |t, d| self.upper_template(t, d), Direction::Upper)?;
        self.c_upper = Some(c);
        self.c_upper_long = Some(if long.is_empty() {
            c * seam.powf(-self.kappa()) * (self.mu * seam).exp()
        } else {
            calibrate_constant(&long, |t, d| self.upper_template(t, d), Direction::Upper)?
        });
        Ok(())
    }

    /// Fits one lower constant per regime that has samples.
    pub fn calibrate_lower(&mut self, samples: &[CalibrationSample]) -> Result<()> {
        for regime in [Regime::Short, Regime::Mid, Regime::Long] {
            let chosen: Vec<CalibrationSample> = samples
                .iter()
                .copied()
                .filter(|s| self.classify_regime(s.t, s.d) == regime)
                .collect();
            if chosen.is_empty() {
                continue;
            }
            let c = calibrate_constant(&chosen, |t, d| self.lower_template(regime, t, d), Direction::Lower)?;
            self.set_lower_constant(regime, c);
        }
        Ok(())
    }

    pub fn set_lower_constant(&mut self, regime: Regime, c: f64) {
        match regime {
            Regime::Short => self.c_short = Some(c),
            Regime::Mid => self.c_mid = Some(c),
            Regime::Long => self.c_long = Some(c),
        }
    }
}

/// Calibration `(t, node)` pairs: every time (plus the seam when it falls
/// inside the time range) crossed with `base_nodes`, plus for each time the two
/// nodes whose boundary distance brackets `t^{1/2m}`. The template ratios reach
/// their extremes along these regime boundaries.
pub fn calibration_points(
    params: &BoundParams,
    distances: &[f64],
    times: &[f64],
    base_nodes: &[usize],
) -> Vec<(f64, usize)> {
    let mut ts = times.to_vec();
    let seam = params.seam();
    let (lo, hi) = times
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    if seam >= lo && seam <= hi && !ts.contains(&seam) {
        ts.push(seam);
    }
    ts.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for &t in &ts {
        let mut nodes = base_nodes.to_vec();
        let r = t.powf(1.0 / (2.0 * params.m as f64));
        let below = (0..distances.len())
            .filter(|&i| distances[i] <= r)
            .max_by(|&a, &b| distances[a].total_cmp(&distances[b]));
        let above = (0..distances.len())
            .filter(|&i| distances[i] > r)
            .min_by(|&a, &b| distances[a].total_cmp(&distances[b]));
        nodes.extend(below.into_iter().chain(above));
        nodes.sort_unstable();
        nodes.dedup();
        out.extend(nodes.into_iter().map(|x| (t, x)));
    }
    out
}

fn check_td(t: f64, d: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite() && d >= 0.0 && d.is_finite()) {
        return Err(invalid(format!("need t > 0 and d >= 0, got t={t}, d={d}")));
    }
    Ok(())
}

/// One calibration point: template value and measured kernel value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSample {
    pub t: f64,
    pub d: f64,
    pub k: f64,
}

/// Smallest (upper) or largest (lower) constant `C` with `C·template` on the
/// correct side of every sample.
pub fn calibrate_constant(
    samples: &[CalibrationSample],
    template: impl Fn(f64, f64) -> f64,
    direction: Direction,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("calibration needs at least one sample"));
    }
    let mut best: Option<f64> = None;
    for (index, s) in samples.iter().enumerate() {
        let tv = template(s.t, s.d);
        if !tv.is_finite() || tv < 0.0 {
            return Err(Error::InfiniteConstant { index, value: tv });
        }
        if tv == 0.0 {
            if direction == Direction::Upper && s.k > 0.0 {
                return Err(Error::InfiniteConstant { index, value: tv });
            }
            continue;
        }
        let ratio = s.k / tv;
        best = Some(match (best, direction) {
            (None, _) => ratio,
            (Some(b), Direction::Upper) => b.max(ratio),
            (Some(b), Direction::Lower) => b.min(ratio),
        });
    }
    match best {
        Some(c) if c.is_finite() && c > 0.0 => Ok(c),
        Some(c) => Err(Error::InfiniteConstant {
            index: 0,
            value: c,
        }),
        None => Err(invalid("every template value vanished")),
    }
}
