//! Bump test functions `g(y) = ψ((y − x)/r)` and the Green lower bounds they certify.

use crate::error::{invalid, Error, Result};
use crate::operator::DiscreteOperator;
use crate::quadrature::{adaptive_gk, tanh_sinh, GaussLegendre};

/// Standard mollifier `ψ(u) = exp(1 − 1/(1 − u²))` on `(−1, 1)`, zero outside.
#[derive(Debug, Clone)]
pub struct BumpProfile {
    /// `P_k` with `ψ^{(k)} = P_k(u) ψ(u) / (1 − u²)^{2k}`, coefficients in ascending powers.
    polys: Vec<Vec<f64>>,
    pub sq_norm_const: f64,
    /// `∫ |ψ^{(k)}|²` for `k = 0..=max_order`.
    pub energy_consts: Vec<f64>,
}

impl BumpProfile {
    pub fn new(max_order: usize) -> Result<Self> {
        let mut polys = vec![vec![1.0]];
        for k in 0..max_order {
            polys.push(next_poly(&polys[k], k));
        }
        let mut profile = BumpProfile {
            polys,
            sq_norm_const: 0.0,
            energy_consts: Vec::new(),
        };
        for k in 0..=max_order {
            let f = |u: f64| profile.derivative(k, u).powi(2);
            let rough = GaussLegendre::new(64).integrate(-1.0, 1.0, f);
            let c = adaptive_gk(f, -1.0, 1.0, 1e-12 * rough.max(1.0))?;
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Numerical(format!("profile energy {k} = {c}")));
            }
            profile.energy_consts.push(c);
        }
        profile.sq_norm_const = profile.energy_consts[0];
        Ok(profile)
    }

    pub fn max_order(&self) -> usize {
        self.polys.len() - 1
    }

    pub fn value(&self, u: f64) -> f64 {
        bump(u)
    }

    /// `ψ^{(k)}(u)`.
    pub fn derivative(&self, k: usize, u: f64) -> f64 {
        let q = 1.0 - u * u;
        // ψ < e^{-999} below this
        if q <= 1e-3 {
            return 0.0;
        }
        let p = self.polys[k].iter().rev().fold(0.0, |acc, c| acc * u + c);
        p * bump(u) / q.powi(2 * k as i32)
    }

    /// `∫|ψ^{(k)}|²` by tanh–sinh, independent of the stored adaptive value.
    pub fn energy_crosscheck(&self, k: usize) -> f64 {
        tanh_sinh(|u| self.derivative(k, u).powi(2), -1.0, 1.0, 8)
    }

    pub fn energy(&self, k: usize) -> Result<f64> {
        self.energy_consts.get(k).copied().ok_or_else(|| {
            invalid(format!(
                "derivative order {k} exceeds profile maximum {}",
                self.max_order()
            ))
        })
    }
}

/// `P_{k+1} = (P_k' q + 4k u P_k) q − 2u P_k` with `q = 1 − u²`.
fn next_poly(p: &[f64], k: usize) -> Vec<f64> {
    let deg = p.len() + 3;
    let mut out = vec![0.0; deg + 1];
    let mut inner = vec![0.0; p.len() + 2];
    // P' q
    for (i, &c) in p.iter().enumerate().skip(1) {
        let d = c * i as f64;
        inner[i - 1] += d;
        inner[i + 1] -= d;
    }
    // + 4k u P
    for (i, &c) in p.iter().enumerate() {
        inner[i + 1] += 4.0 * k as f64 * c;
    }
    // (...) q
    for (i, &c) in inner.iter().enumerate() {
        out[i] += c;
        out[i + 2] -= c;
    }
    // − 2u P
    for (i, &c) in p.iter().enumerate() {
        out[i + 1] -= 2.0 * c;
    }
    while out.len() > 1 && *out.last().unwrap() == 0.0 {
        out.pop();
    }
    out
}

/// The mollifier profile.
pub fn bump(u: f64) -> f64 {
    let q = 1.0 - u * u;
    if q <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / q).exp()
    }
}

/// Which substitution produced a certified bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFnRegime {
    /// `r = t^{1/2m}`
    Short,
    /// `r = d(x)`
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedGreen {
    pub value: f64,
    pub r_used: f64,
    pub regime: TestFnRegime,
}

/// Bumps `ψ((y − x)/r)` (tensor products in 2D) paired with an operator of order `2m`.
#[derive(Debug, Clone)]
pub struct TestFunctionFamily {
    pub profile: BumpProfile,
    pub m: usize,
    pub dim: usize,
    /// Upper bound of the coefficient; scales the energy.
    pub a_max: f64,
}

impl TestFunctionFamily {
    pub fn new(profile: BumpProfile, m: usize, dim: usize, a_max: f64) -> Result<Self> {
        profile.energy(m)?;
        if !(1..=2).contains(&dim) {
            return Err(invalid(format!("dimension {dim} not supported")));
        }
        if !(a_max > 0.0 && a_max.is_finite()) {
            return Err(invalid(format!("coefficient bound must be positive, got {a_max}")));
        }
        Ok(TestFunctionFamily {
            profile,
            m,
            dim,
            a_max,
        })
    }

    /// Family matched to a discrete operator.
    pub fn for_operator(op: &DiscreteOperator) -> Result<Self> {
        let profile = BumpProfile::new(op.spec.m.max(1))?;
        Self::new(profile, op.spec.m, op.spec.dim, op.coeff_range().1)
    }

    /// `(‖g‖², Q(g))` for radius `r`, by exact scaling of the profile constants.
    pub fn norms(&self, r: f64) -> Result<(f64, f64)> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid(format!("radius must be positive, got {r}")));
        }
        let s = self.profile.sq_norm_const;
        let e = self.profile.energy(self.m)?;
        let two_m = 2 * self.m as i32;
        Ok(match self.dim {
            1 => (s * r, self.a_max * e * r.powi(1 - two_m)),
            _ => (s * s * r * r, self.a_max * 2.0 * e * s * r.powi(2 - two_m)),
        })
    }

    /// `1 / (t Q(g) + ‖g‖²)` for the bump of radius `r`, admissible iff `r ≤ d`.
    pub fn green_from_testfn(&self, t: f64, d: f64, r: f64) -> Result<f64> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid(format!("t must be nonnegative, got {t}")));
        }
        if r > d {
            return Err(Error::NotAdmissible { r, d });
        }
        let (sq, energy) = self.norms(r)?;
        Ok(1.0 / (t * energy + sq))
    }

    fn radius(&self, t: f64, d: f64) -> (f64, TestFnRegime) {
        let r = t.powf(1.0 / (2.0 * self.m as f64));
        if r < d {
            (r, TestFnRegime::Short)
        } else {
            (d, TestFnRegime::Long)
        }
    }

    /// Closed-form certified bound with `r = min(t^{1/2m}, d)`.
    pub fn green_lower_bound(&self, t: f64, d: f64) -> Result<CertifiedGreen> {
        if !(t > 0.0 && d > 0.0) {
            return Err(invalid(format!("need t > 0 and d > 0, got t={t}, d={d}")));
        }
        let (r, regime) = self.radius(t, d);
        Ok(CertifiedGreen {
            value: self.green_from_testfn(t, d, r)?,
            r_used: r,
            regime,
        })
    }

    /// Grid samples of the bump centred at `node`.
    pub fn sample(&self, op: &DiscreteOperator, node: usize, r: f64) -> Vec<f64> {
        let x = op.grid.node_point(node);
        op.sample(|y| {
            y.iter()
                .zip(&x)
                .map(|(yi, xi)| bump((yi - xi) / r))
                .product()
        })
    }

    /// Rayleigh value `g(x)² / (t Q_h(g) + M_h(g,g))` of the sampled bump.
    pub fn discrete_value(&self, op: &DiscreteOperator, t: f64, node: usize, r: f64) -> Result<f64> {
        let g = self.sample(op, node, r);
        let q = op.quadratic_form(&g)?;
        let m = op.mass(&g, &g)?;
        Ok(g[node].powi(2) / (t * q + m))
    }

    /// Certified bound for the discrete resolvent: the sampled bump paired with the
    /// discrete forms. With `scan`, also tries radii `d·2^{-k/4}` and keeps the best.
    pub fn green_lower_bound_discrete(
        &self,
        op: &DiscreteOperator,
        t: f64,
        node: usize,
        scan: bool,
    ) -> Result<CertifiedGreen> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid(format!("t must be nonnegative, got {t}")));
        }
        if node >= op.len() {
            return Err(invalid(format!("node {node} outside grid")));
        }
        let d = op.grid.node_distance(node);
        let (r, regime) = if t == 0.0 { (d, TestFnRegime::Long) } else { self.radius(t, d) };
        let mut best = CertifiedGreen {
            value: self.discrete_value(op, t, node, r)?,
            r_used: r,
            regime,
        };
        if scan {
            let hmin = op.grid.h.iter().copied().fold(f64::INFINITY, f64::min);
            for k in 0..64 {
                let rk = d * 2f64.powf(-(k as f64) / 4.0);
                if rk < 0.5 * hmin {
                    break;
                }
                let v = self.discrete_value(op, t, node, rk)?;
                if v > best.value {
                    best = CertifiedGreen {
                        value: v,
                        r_used: rk,
                        regime,
                    };
                }
            }
        }
        Ok(best)
    }
}
