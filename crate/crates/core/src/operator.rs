//! Discrete quadratic form `Q(f) = ∫ a(x) |D^m f|^2` with Dirichlet (clamped)
//! conditions, assembled "form first": m-fold forward differences of the
//! zero-extended grid function, weighted by the coefficient at the stencil
//! centre, then the adjoint product. In 2D the form is tensorized per axis,
//! `∫ a (|∂₁^m f|² + |∂₂^m f|²)`.
//!
//! Quadratic forms are evaluated from the difference representation rather
//! than the assembled band matrix: for large `m` and fine grids the band
//! entries are of size `h^{-2m}` and summing them loses digits that the
//! factored form keeps.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::linalg::SymBand;

/// Scalar coefficient `a(x)` multiplying the top-order form.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    /// `mean + amplitude * Π_axis sin(2π · frequency · x_axis)`.
    Oscillatory {
        mean: f64,
        amplitude: f64,
        frequency: f64,
    },
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Constant(c) => write!(f, "Constant({c})"),
            Coefficient::Oscillatory {
                mean,
                amplitude,
                frequency,
            } => write!(f, "Oscillatory({mean} ± {amplitude}, freq {frequency})"),
            Coefficient::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Coefficient {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Oscillatory {
                mean,
                amplitude,
                frequency,
            } => {
                let s: f64 = x
                    .iter()
                    .map(|xi| (2.0 * std::f64::consts::PI * frequency * xi).sin())
                    .product();
                mean + amplitude * s
            }
            Coefficient::Custom(f) => f(x),
        }
    }

    pub fn scaled(&self, kappa: f64) -> Coefficient {
        match self {
            Coefficient::Constant(c) => Coefficient::Constant(kappa * c),
            Coefficient::Oscillatory {
                mean,
                amplitude,
                frequency,
            } => Coefficient::Oscillatory {
                mean: kappa * mean,
                amplitude: kappa * amplitude,
                frequency: *frequency,
            },
            Coefficient::Custom(f) => {
                let f = Arc::clone(f);
                Coefficient::Custom(Arc::new(move |x| kappa * f(x)))
            }
        }
    }
}

/// Order, dimension and coefficient of the operator `H`.
#[derive(Debug, Clone)]
pub struct OperatorSpec {
    /// Half-order: the operator has order `2m`.
    pub m: usize,
    pub dim: usize,
    pub coeff: Coefficient,
}

impl OperatorSpec {
    pub fn new(m: usize, dim: usize, coeff: Coefficient) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("half-order m must be positive".into()));
        }
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidArgument(format!("dimension {dim} not supported (1 or 2)")));
        }
        if 2 * m <= dim {
            return Err(Error::OrderTooLow { order: 2 * m, dim });
        }
        Ok(OperatorSpec { m, dim, coeff })
    }

    /// Same order and dimension, coefficient `a ≡ 1`.
    pub fn reference(&self) -> OperatorSpec {
        OperatorSpec {
            m: self.m,
            dim: self.dim,
            coeff: Coefficient::Constant(1.0),
        }
    }

    /// `N / 2m`, the short-time diagonal exponent.
    pub fn dim_ratio(&self) -> f64 {
        self.dim as f64 / (2.0 * self.m as f64)
    }
}

/// Coefficients of the m-th forward difference, `(-1)^{m-q} C(m,q)`.
pub fn difference_stencil(m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m + 1];
    let mut binom = 1.0;
    for q in 0..=m {
        let sign = if (m - q) % 2 == 0 { 1.0 } else { -1.0 };
        c[q] = sign * binom;
        binom = binom * (m - q) as f64 / (q + 1) as f64;
    }
    c
}

/// One weighted difference row along an axis: the coefficient sample at the
/// stencil centre and the (node, weight) pairs of the interior nodes it touches.
#[derive(Debug, Clone)]
struct DiffRow {
    a: f64,
    taps: Vec<(usize, f64)>,
}

/// Stiffness and mass forms of `Q` on a grid.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: Grid,
    pub spec: OperatorSpec,
    rows: Vec<DiffRow>,
    stiffness: SymBand,
    weight: f64,
    coeff_range: (f64, f64),
}

impl DiscreteOperator {
    pub fn build(spec: OperatorSpec, grid: Grid) -> Result<Self> {
        if spec.dim != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim,
                got: grid.dim(),
            });
        }
        if 2 * spec.m <= spec.dim {
            return Err(Error::OrderTooLow {
                order: 2 * spec.m,
                dim: spec.dim,
            });
        }
        let m = spec.m;
        let n = grid.n_per_axis;
        if n < 2 * m + 1 {
            return Err(Error::StencilTooWide { n, width: 2 * m + 1 });
        }
        let stencil = difference_stencil(m);
        let weight = grid.cell_volume();
        let dim = grid.dim();
        let lines = n.pow(dim as u32 - 1);
        let mut rows = Vec::with_capacity(dim * lines * (n + m));
        let mut amin = f64::INFINITY;
        let mut amax = f64::NEG_INFINITY;

        for axis in 0..dim {
            let (lo, hi) = grid.domain.axes()[axis];
            let h = grid.h[axis];
            let scale = h.powi(-(m as i32));
            for line in 0..lines {
                for j in 0..n + m {
                    // extended index e <-> node e - m; row j spans e = j..=j+m
                    let centre = (lo + (j as f64 + 1.0 - 0.5 * m as f64) * h).clamp(lo, hi);
                    let mut point = vec![0.0; dim];
                    point[axis] = centre;
                    let mut base = vec![0usize; dim];
                    if dim == 2 {
                        let other = 1 - axis;
                        base[other] = line;
                        point[other] = grid.axis_coord(other, line);
                    }
                    let a = spec.coeff.eval(&point);
                    if !(a > 0.0 && a.is_finite()) {
                        return Err(Error::NonPositiveCoefficient { value: a, point });
                    }
                    amin = amin.min(a);
                    amax = amax.max(a);
                    let mut taps = Vec::with_capacity(m + 1);
                    for (q, &c) in stencil.iter().enumerate() {
                        let e = j + q;
                        if e < m || e - m >= n {
                            continue;
                        }
                        let mut idx = base.clone();
                        idx[axis] = e - m;
                        taps.push((grid.flat_index(&idx), c * scale));
                    }
                    rows.push(DiffRow { a, taps });
                }
            }
        }

        let bw = if dim == 1 { m } else { m * n };
        let mut stiffness = SymBand::zeros(grid.len(), bw);
        for row in &rows {
            let wa = weight * row.a;
            for &(p, cp) in &row.taps {
                for &(q, cq) in &row.taps {
                    if p >= q {
                        stiffness.add(p, q, wa * cp * cq);
                    }
                }
            }
        }

        Ok(DiscreteOperator {
            grid,
            spec,
            rows,
            stiffness,
            weight,
            coeff_range: (amin, amax),
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mass weight `h^N`: `mass(f, g) = h^N Σ f g`.
    pub fn mass_weight(&self) -> f64 {
        self.weight
    }

    /// Smallest and largest coefficient sample used in the assembly.
    pub fn coeff_range(&self) -> (f64, f64) {
        self.coeff_range
    }

    /// Assembled stiffness matrix (band storage).
    pub fn stiffness_matrix(&self) -> &SymBand {
        &self.stiffness
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: f.len(),
            });
        }
        Ok(())
    }

    /// `stiffness(f, g)`, the bilinear form of `Q`.
    pub fn stiffness(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        self.check_len(g)?;
        let mut s = 0.0;
        for row in &self.rows {
            let (mut df, mut dg) = (0.0, 0.0);
            for &(p, c) in &row.taps {
                df += c * f[p];
                dg += c * g[p];
            }
            s += row.a * df * dg;
        }
        Ok(self.weight * s)
    }

    /// `Q(f) = stiffness(f, f)`.
    pub fn quadratic_form(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        let mut s = 0.0;
        for row in &self.rows {
            let df: f64 = row.taps.iter().map(|&(p, c)| c * f[p]).sum();
            s += row.a * df * df;
        }
        Ok(self.weight * s)
    }

    pub fn mass(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        self.check_len(g)?;
        Ok(self.weight * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>())
    }

    /// `S f` (stiffness matrix applied to nodal values).
    pub fn apply_stiffness(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        let mut out = vec![0.0; self.len()];
        for row in &self.rows {
            let df: f64 = row.taps.iter().map(|&(p, c)| c * f[p]).sum();
            let wdf = self.weight * row.a * df;
            for &(p, c) in &row.taps {
                out[p] += c * wdf;
            }
        }
        Ok(out)
    }

    /// Weighted differences `sqrt(h^N a) D^m f`, one entry per difference row,
    /// so that `Q(f) = |W f|^2` and `stiffness(f, g) = (W f)·(W g)`.
    pub fn weighted_differences(&self, f: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| {
                let df: f64 = row.taps.iter().map(|&(p, c)| c * f[p]).sum();
                (self.weight * row.a).sqrt() * df
            })
            .collect()
    }

    /// Nodal samples of `f` at the interior nodes.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.grid.node_point(i))).collect()
    }
}

/// Extreme ratios `Q(f) / Q_ref(f)` over all grid functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipticity {
    pub c_low: f64,
    pub c_high: f64,
}

impl Ellipticity {
    /// Single constant `c` with `c⁻¹ Q_ref ≤ Q ≤ c Q_ref`.
    pub fn constant(&self) -> f64 {
        self.c_high.max(1.0 / self.c_low)
    }
}

/// Extreme generalized eigenvalues of `(stiffness, reference.stiffness)`.
/// Dense; meant for desk-scale grids.
pub fn ellipticity_constants(
    op: &DiscreteOperator,
    reference: &DiscreteOperator,
) -> Result<Ellipticity> {
    if op.grid != reference.grid || op.spec.m != reference.spec.m {
        return Err(Error::GridMismatch);
    }
    let a = op.stiffness_matrix().to_dense();
    let b = reference.stiffness_matrix().to_dense();
    let chol = nalgebra::Cholesky::new(b)
        .ok_or_else(|| Error::Numerical("reference stiffness is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular reference factor".into()))?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let ev = c.symmetric_eigenvalues();
    let c_low = ev.iter().copied().fold(f64::INFINITY, f64::min);
    let c_high = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Ellipticity { c_low, c_high })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn op1d(m: usize, n: usize, coeff: Coefficient) -> DiscreteOperator {
        let spec = OperatorSpec::new(m, 1, coeff).unwrap();
        DiscreteOperator::build(spec, Grid::new(Domain::unit_interval(), n).unwrap()).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn stencils_are_signed_binomials() {
        assert_eq!(difference_stencil(1), vec![-1.0, 1.0]);
        assert_eq!(difference_stencil(2), vec![1.0, -2.0, 1.0]);
        assert_eq!(difference_stencil(3), vec![-1.0, 3.0, -3.0, 1.0]);
    }

    #[test]
    fn hand_assembled_second_difference() {
        // forward differences of e2 = (0,1,0) with zero extension: 0, 1/h, -1/h, 0
        // times h gives 2/h = 8 at h = 1/4
        let op = op1d(1, 3, Coefficient::Constant(1.0));
        let e2 = [0.0, 1.0, 0.0];
        assert!((op.quadratic_form(&e2).unwrap() - 8.0).abs() < 1e-12);
        let s = op.stiffness_matrix();
        assert!((s.get(0, 0) - 8.0).abs() < 1e-12);
        assert!((s.get(1, 0) + 4.0).abs() < 1e-12);
        assert_eq!(s.get(2, 0), 0.0);
    }

    #[test]
    fn sine_energy_matches_continuum() {
        let op = op1d(1, 2000, Coefficient::Constant(1.0));
        let f = op.sample(|x| (PI * x[0]).sin());
        let q = op.quadratic_form(&f).unwrap();
        assert!((q / (PI * PI / 2.0) - 1.0).abs() < 1e-3, "{q}");

        // m = 2 needs a function vanishing to first order at the boundary
        let op2 = op1d(2, 2000, Coefficient::Constant(1.0));
        let g = op2.sample(|x| (PI * x[0]).sin().powi(2));
        let q2 = op2.quadratic_form(&g).unwrap();
        assert!((q2 / (2.0 * PI.powi(4)) - 1.0).abs() < 5e-3, "{q2}");
    }

    #[test]
    fn forms_are_symmetric_and_agree_with_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let coeff = Coefficient::Oscillatory {
            mean: 1.5,
            amplitude: 0.5,
            frequency: 3.0,
        };
        for (m, dim, n) in [(1, 1, 20), (2, 1, 20), (3, 1, 20), (2, 2, 9)] {
            let domain = if dim == 1 { Domain::unit_interval() } else { Domain::unit_square() };
            let spec = OperatorSpec::new(m, dim, coeff.clone()).unwrap();
            let op = DiscreteOperator::build(spec, Grid::new(domain, n).unwrap()).unwrap();
            for _ in 0..100 {
                let f = random_vec(&mut rng, op.len());
                let g = random_vec(&mut rng, op.len());
                let fg = op.stiffness(&f, &g).unwrap();
                let gf = op.stiffness(&g, &f).unwrap();
                assert!((fg - gf).abs() <= 1e-12 * fg.abs().max(1.0));
                let via_matrix: f64 =
                    op.stiffness_matrix().matvec(&g).iter().zip(&f).map(|(a, b)| a * b).sum();
                assert!((fg - via_matrix).abs() <= 1e-9 * op.quadratic_form(&f).unwrap().max(1.0));
                assert!(op.quadratic_form(&f).unwrap() > 0.0);
                assert!(op.mass(&f, &f).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn zero_function_has_zero_energy() {
        let op = op1d(2, 10, Coefficient::Constant(1.0));
        assert_eq!(op.quadratic_form(&[0.0; 10]).unwrap(), 0.0);
    }

    #[test]
    fn coefficient_scaling_scales_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = Coefficient::Oscillatory {
            mean: 1.5,
            amplitude: 0.5,
            frequency: 2.0,
        };
        let op = op1d(2, 30, base.clone());
        for kappa in [2.0, 4.0, 0.5] {
            let scaled = op1d(2, 30, base.scaled(kappa));
            let f = random_vec(&mut rng, 30);
            // power-of-two scalings are exact in binary floating point
            assert_eq!(scaled.quadratic_form(&f).unwrap(), kappa * op.quadratic_form(&f).unwrap());
        }
        let scaled = op1d(2, 30, base.scaled(3.7));
        let f = random_vec(&mut rng, 30);
        let r = scaled.quadratic_form(&f).unwrap() / op.quadratic_form(&f).unwrap();
        assert!((r - 3.7).abs() < 1e-13);
    }

    #[test]
    fn dirichlet_consistency_under_refinement() {
        // f = sin²(πx) vanishes to second order at the ends; Q for m = 2 is
        // ∫ (f'')² = ∫ 4π⁴ cos²(2πx) = 2π⁴
        let exact = 2.0 * PI.powi(4);
        let errs: Vec<f64> = [50, 101, 203]
            .iter()
            .map(|&n| {
                let op = op1d(2, n, Coefficient::Constant(1.0));
                let f = op.sample(|x| (PI * x[0]).sin().powi(2));
                (op.quadratic_form(&f).unwrap() - exact).abs()
            })
            .collect();
        assert!(errs[1] < 0.6 * errs[0] && errs[2] < 0.6 * errs[1], "{errs:?}");
    }

    #[test]
    fn assembly_rejects_bad_inputs() {
        let spec = OperatorSpec::new(2, 1, Coefficient::Constant(1.0)).unwrap();
        let g = Grid::new(Domain::unit_interval(), 4).unwrap();
        assert!(matches!(
            DiscreteOperator::build(spec.clone(), g),
            Err(Error::StencilTooWide { n: 4, width: 5 })
        ));
        let neg = OperatorSpec::new(1, 1, Coefficient::Constant(-1.0)).unwrap();
        let g = Grid::new(Domain::unit_interval(), 10).unwrap();
        assert!(matches!(
            DiscreteOperator::build(neg, g),
            Err(Error::NonPositiveCoefficient { .. })
        ));
        assert!(matches!(
            OperatorSpec::new(1, 2, Coefficient::Constant(1.0)),
            Err(Error::OrderTooLow { .. })
        ));
        let op = op1d(1, 10, Coefficient::Constant(1.0));
        assert!(matches!(
            op.quadratic_form(&[1.0; 9]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ellipticity_examples() {
        let reference = op1d(1, 40, Coefficient::Constant(1.0));
        let e = ellipticity_constants(&reference, &reference).unwrap();
        assert!((e.c_low - 1.0).abs() < 1e-10 && (e.c_high - 1.0).abs() < 1e-10);

        let two = op1d(1, 40, Coefficient::Constant(2.0));
        let e = ellipticity_constants(&two, &reference).unwrap();
        assert!((e.c_low - 2.0).abs() < 1e-10 && (e.c_high - 2.0).abs() < 1e-10);
        assert!((e.constant() - 2.0).abs() < 1e-10);

        let osc = op1d(
            1,
            40,
            Coefficient::Oscillatory {
                mean: 1.5,
                amplitude: 0.5,
                frequency: 3.0,
            },
        );
        let e = ellipticity_constants(&osc, &reference).unwrap();
        assert!(e.c_low >= 1.0 - 1e-10 && e.c_high <= 2.0 + 1e-10, "{e:?}");

        let other = op1d(1, 41, Coefficient::Constant(1.0));
        assert_eq!(ellipticity_constants(&osc, &other), Err(Error::GridMismatch));
    }
}
