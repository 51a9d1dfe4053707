//! Generalized eigenproblem `S ψ = λ M ψ` for the discrete operator.
//!
//! The mass form is `M = h^N I`, so the problem reduces to the standard band
//! problem `(S / h^N) v = λ v` with `ψ = v / sqrt(h^N)`. Two routes:
//!
//! * dense: Householder tridiagonalization + implicit QR (nalgebra) for
//!   full decompositions and small grids;
//! * band: Sturm-count bisection for the wanted eigenvalues, shift-invert
//!   inverse iteration for the vectors, then a Rayleigh–Ritz pass on the
//!   computed subspace. Used for partial spectra on large grids.
//!
//! Eigenvalues are finally taken as Rayleigh quotients evaluated through the
//! factored difference form, which stays accurate when `|S| ~ h^{-2m}`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{axpy, dot, norm2, ShiftedBandLu, SymBand};
use crate::operator::DiscreteOperator;

/// How many eigenpairs to compute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeCount {
    All,
    Lowest(usize),
    /// Every eigenvalue below the given threshold (at least the ground state).
    Below(f64),
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Problems up to this size are solved densely.
    pub dense_limit: usize,
    /// Inverse-iteration cap per eigenvector.
    pub max_inverse_iterations: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            dense_limit: 700,
            max_inverse_iterations: 8,
            seed: 0x5eed,
        }
    }
}

/// Ascending eigenvalues and mass-orthonormal eigenvectors of a [`DiscreteOperator`].
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column-major, one mass-normalized vector per eigenvalue.
    vectors: Vec<f64>,
    op: DiscreteOperator,
    /// Known lower bound for every eigenvalue not in the decomposition.
    missing_floor: f64,
}

impl SpectralDecomposition {
    pub fn op(&self) -> &DiscreteOperator {
        &self.op
    }

    /// Number of computed modes.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Whether every eigenpair of the discrete operator is present.
    pub fn is_complete(&self) -> bool {
        self.len() == self.op.len()
    }

    pub fn eigenvector(&self, k: usize) -> &[f64] {
        let n = self.op.len();
        &self.vectors[k * n..(k + 1) * n]
    }

    #[inline]
    pub fn value(&self, k: usize, node: usize) -> f64 {
        self.vectors[k * self.op.len() + node]
    }

    /// `μ = λ₀`.
    pub fn spectral_gap(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Largest computed eigenvalue.
    pub fn largest(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty decomposition")
    }

    /// Lower bound for every eigenvalue that was not computed.
    pub fn missing_floor(&self) -> f64 {
        self.missing_floor.max(self.largest())
    }

    /// `1/h^N − Σ_k ψ_k(x)²` over computed modes: the nodal mass carried by
    /// the missing modes (zero for a complete decomposition, up to rounding).
    pub fn residual_mass(&self, node: usize) -> f64 {
        let total = 1.0 / self.op.mass_weight();
        let have: f64 = (0..self.len()).map(|k| self.value(k, node).powi(2)).sum();
        if self.is_complete() {
            0.0
        } else {
            (total - have).max(0.0)
        }
    }

    /// Eigenvector rescaled to unit Euclidean norm (`sqrt(h^N) ψ`).
    pub fn euclidean_eigenvector(&self, k: usize) -> Vec<f64> {
        let s = self.op.mass_weight().sqrt();
        self.eigenvector(k).iter().map(|v| v * s).collect()
    }

    /// Inverse of [`Self::euclidean_eigenvector`]: back to the mass (continuum) normalization.
    pub fn from_euclidean(&self, v: &[f64]) -> Vec<f64> {
        let s = self.op.mass_weight().sqrt();
        v.iter().map(|x| x / s).collect()
    }

    /// `|S ψ_k − λ_k M ψ_k|₂`.
    pub fn residual_norm(&self, k: usize) -> f64 {
        let psi = self.eigenvector(k);
        let mut r = self.op.apply_stiffness(psi).expect("sized");
        axpy(-self.eigenvalues[k] * self.op.mass_weight(), psi, &mut r);
        norm2(&r)
    }
}

/// Lowest eigenpairs of `op` per `count`.
pub fn eigendecompose(op: &DiscreteOperator, count: ModeCount) -> Result<SpectralDecomposition> {
    eigendecompose_with(op, count, &SolverOptions::default())
}

pub fn eigendecompose_with(
    op: &DiscreteOperator,
    count: ModeCount,
    opts: &SolverOptions,
) -> Result<SpectralDecomposition> {
    let n = op.len();
    let w = op.mass_weight();
    let a = op.stiffness_matrix().scaled_shift(1.0 / w, 0.0);
    let k = match count {
        ModeCount::All => n,
        ModeCount::Lowest(k) => {
            if k == 0 || k > n {
                return Err(invalid(format!("mode count {k} outside 1..={n}")));
            }
            k
        }
        ModeCount::Below(lambda) => {
            if !lambda.is_finite() {
                n
            } else {
                a.count_below(lambda).clamp(1, n)
            }
        }
    };

    let (values, mut vecs) = if n <= opts.dense_limit || k == n {
        dense_lowest(&a, k)
    } else {
        band_lowest(op, &a, k, opts)?
    };

    // mass normalization and Rayleigh quotients through the factored form
    let scale = 1.0 / w.sqrt();
    vecs.iter_mut().for_each(|v| *v *= scale);
    let mut pairs: Vec<(f64, usize)> = (0..k)
        .map(|j| {
            let psi = &vecs[j * n..(j + 1) * n];
            let q = op.quadratic_form(psi).expect("sized");
            let m = op.mass(psi, psi).expect("sized");
            (q / m, j)
        })
        .collect();
    let _ = values;
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut eigenvalues = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k * n);
    for (lambda, j) in pairs {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::Numerical(format!("invalid eigenvalue {lambda}")));
        }
        eigenvalues.push(lambda);
        let psi = &vecs[j * n..(j + 1) * n];
        // deterministic sign: first significant entry positive
        let pivot = psi.iter().copied().find(|v| v.abs() > 1e-8 * scale).unwrap_or(1.0);
        let s = if pivot < 0.0 { -1.0 } else { 1.0 };
        vectors.extend(psi.iter().map(|v| s * v));
    }
    let missing_floor = match count {
        ModeCount::Below(lambda) if lambda.is_finite() => lambda,
        _ => f64::NEG_INFINITY,
    };
    Ok(SpectralDecomposition {
        eigenvalues,
        vectors,
        op: op.clone(),
        missing_floor,
    })
}

/// `μ = λ₀` of a decomposition.
pub fn spectral_gap(sd: &SpectralDecomposition) -> f64 {
    sd.spectral_gap()
}

fn dense_lowest(a: &SymBand, k: usize) -> (Vec<f64>, Vec<f64>) {
    let n = a.size();
    let eig = SymmetricEigen::new(a.to_dense());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut values = Vec::with_capacity(k);
    let mut vecs = Vec::with_capacity(k * n);
    for &i in order.iter().take(k) {
        values.push(eig.eigenvalues[i]);
        vecs.extend(eig.eigenvectors.column(i).iter());
    }
    (values, vecs)
}

/// Lowest `k` eigenvalues of a symmetric band matrix by Sturm-count bisection.
pub fn band_bisection(a: &SymBand, k: usize) -> Vec<f64> {
    let (glo, ghi) = a.gershgorin();
    let norm = glo.abs().max(ghi.abs()).max(f64::MIN_POSITIVE);
    let lo = glo.min(0.0) - f64::EPSILON * norm;
    let hi = ghi + 4.0 * f64::EPSILON * norm;
    let n = a.size();
    let mut out = vec![f64::NAN; k];
    let c_hi = a.count_below(hi).max(k).min(n);
    let mut stack = vec![(lo, hi, 0usize, c_hi, 0usize)];
    while let Some((lo, hi, clo, chi, depth)) = stack.pop() {
        if clo >= k || clo >= chi {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let tol = 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + f64::EPSILON * norm * 1e-3;
        if hi - lo <= tol || depth >= 200 {
            for slot in out.iter_mut().take(chi.min(k)).skip(clo) {
                *slot = mid;
            }
            continue;
        }
        let c = a.count_below(mid).clamp(clo, chi);
        stack.push((mid, hi, c, chi, depth + 1));
        stack.push((lo, mid, clo, c, depth + 1));
    }
    out
}

fn band_lowest(
    op: &DiscreteOperator,
    a: &SymBand,
    k: usize,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.size();
    let approx = band_bisection(a, k);
    let norm = a.norm_inf();
    let mut vecs: Vec<f64> = Vec::with_capacity(k * n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut prev_sigma = f64::NEG_INFINITY;
    for (j, &lambda) in approx.iter().enumerate() {
        // separate coincident shifts so degenerate pairs get distinct factorizations
        let mut sigma = lambda;
        if sigma <= prev_sigma {
            sigma = prev_sigma + 10.0 * f64::EPSILON * norm.max(1.0);
        }
        prev_sigma = sigma;
        let lu = ShiftedBandLu::factor(a, sigma);
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cluster: Vec<usize> = (0..j)
            .filter(|&i| (approx[i] - lambda).abs() <= 1e-2 * lambda.abs() + 1e3 * f64::EPSILON * norm)
            .collect();
        let mut converged = false;
        for _ in 0..opts.max_inverse_iterations {
            x = lu.solve(&x);
            for &i in &cluster {
                let v = &vecs[i * n..(i + 1) * n];
                let c = dot(v, &x);
                axpy(-c, v, &mut x);
            }
            let nx = norm2(&x);
            if !(nx.is_finite() && nx > 0.0) {
                return Err(Error::Numerical("inverse iteration produced a null vector".into()));
            }
            x.iter_mut().for_each(|v| *v /= nx);
            let mut r = a.matvec(&x);
            axpy(-lambda, &x, &mut r);
            if norm2(&r) <= 1e-11 * norm {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                what: "shift-invert inverse iteration",
                iterations: opts.max_inverse_iterations,
            });
        }
        vecs.extend_from_slice(&x);
    }

    // orthonormalize (Cholesky QR, twice) and rotate to Ritz vectors
    let mut v = DMatrix::from_column_slice(n, k, &vecs);
    for _ in 0..2 {
        let g = v.transpose() * &v;
        let chol = nalgebra::Cholesky::new(g)
            .ok_or_else(|| Error::Numerical("computed eigenvectors are linearly dependent".into()))?;
        let r_inv = chol
            .l()
            .transpose()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("singular Gram factor".into()))?;
        v *= r_inv;
    }
    let w = op.mass_weight();
    let rows = op.weighted_differences(v.column(0).as_slice()).len();
    let mut y = DMatrix::zeros(rows, k);
    for j in 0..k {
        let d = op.weighted_differences(v.column(j).as_slice());
        y.column_mut(j).copy_from_slice(&d);
    }
    let b = (y.transpose() * &y) / w;
    let b = (&b + b.transpose()) * 0.5;
    let eig = SymmetricEigen::new(b);
    let v = v * &eig.eigenvectors;
    Ok((eig.eigenvalues.iter().copied().collect(), v.as_slice().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, Grid};
    use crate::operator::{Coefficient, OperatorSpec};
    use std::f64::consts::PI;

    fn op1d(m: usize, n: usize, domain: Domain) -> DiscreteOperator {
        let spec = OperatorSpec::new(m, 1, Coefficient::Constant(1.0)).unwrap();
        DiscreteOperator::build(spec, Grid::new(domain, n).unwrap()).unwrap()
    }

    #[test]
    fn band_route_matches_dense_route() {
        let coeff = Coefficient::Oscillatory {
            mean: 1.5,
            amplitude: 0.5,
            frequency: 3.0,
        };
        for (m, dim, n, k) in [(1, 1, 120, 30), (2, 1, 120, 20), (3, 1, 90, 10), (2, 2, 14, 25)] {
            let domain = if dim == 1 { Domain::unit_interval() } else { Domain::unit_square() };
            let spec = OperatorSpec::new(m, dim, coeff.clone()).unwrap();
            let op = DiscreteOperator::build(spec, Grid::new(domain, n).unwrap()).unwrap();
            let dense = eigendecompose(&op, ModeCount::Lowest(k)).unwrap();
            let band = eigendecompose_with(
                &op,
                ModeCount::Lowest(k),
                &SolverOptions {
                    dense_limit: 0,
                    ..Default::default()
                },
            )
            .unwrap();
            for j in 0..k {
                let (a, b) = (dense.eigenvalues[j], band.eigenvalues[j]);
                assert!((a - b).abs() <= 1e-9 * a, "m={m} dim={dim} j={j}: {a} vs {b}");
            }
            check_orthonormal(&band, 1e-10);
        }
    }

    fn check_orthonormal(sd: &SpectralDecomposition, tol: f64) {
        let op = sd.op();
        for i in 0..sd.len() {
            for j in 0..=i {
                let m = op.mass(sd.eigenvector(i), sd.eigenvector(j)).unwrap();
                let s = op.stiffness(sd.eigenvector(i), sd.eigenvector(j)).unwrap();
                let delta = if i == j { 1.0 } else { 0.0 };
                assert!((m - delta).abs() < tol, "mass({i},{j}) = {m}");
                assert!(
                    (s - delta * sd.eigenvalues[i]).abs() < 1e-8 * sd.eigenvalues[i],
                    "stiffness({i},{j}) = {s}"
                );
            }
        }
    }

    #[test]
    fn laplacian_spectrum_small_grid() {
        let op = op1d(1, 200, Domain::unit_interval());
        let sd = eigendecompose(&op, ModeCount::Lowest(10)).unwrap();
        for (k, lambda) in sd.eigenvalues.iter().enumerate() {
            let exact = ((k + 1) as f64 * PI).powi(2);
            assert!((lambda / exact - 1.0).abs() < 1e-2, "{k}: {lambda}");
        }
        assert!(sd.eigenvalues.windows(2).all(|p| p[0] < p[1]));
        check_orthonormal(&sd, 1e-10);
        assert!(sd.residual_norm(0) / sd.eigenvalues[0] < 1e-8);
    }

    #[test]
    fn mode_count_below_threshold() {
        let op = op1d(1, 300, Domain::unit_interval());
        let sd = eigendecompose_with(
            &op,
            ModeCount::Below(400.0),
            &SolverOptions {
                dense_limit: 0,
                ..Default::default()
            },
        )
        .unwrap();
        // n²π² < 400 for n = 1..6
        assert_eq!(sd.len(), 6);
        assert!(eigendecompose(&op, ModeCount::Lowest(0)).is_err());
        assert!(eigendecompose(&op, ModeCount::Lowest(301)).is_err());
    }

    #[test]
    fn completeness_reproduces_identity() {
        let spec = OperatorSpec::new(2, 2, Coefficient::Constant(1.0)).unwrap();
        let op = DiscreteOperator::build(spec, Grid::new(Domain::unit_square(), 8).unwrap()).unwrap();
        let sd = eigendecompose(&op, ModeCount::All).unwrap();
        assert!(sd.is_complete());
        let w = op.mass_weight();
        for x in 0..op.len() {
            for y in 0..op.len() {
                let s: f64 = (0..sd.len()).map(|k| sd.value(k, x) * sd.value(k, y)).sum::<f64>() * w;
                let delta = if x == y { 1.0 } else { 0.0 };
                assert!((s - delta).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn euclidean_round_trip() {
        let op = op1d(1, 50, Domain::unit_interval());
        let sd = eigendecompose(&op, ModeCount::Lowest(3)).unwrap();
        for k in 0..3 {
            let e = sd.euclidean_eigenvector(k);
            assert!((norm2(&e) - 1.0).abs() < 1e-12);
            let back = sd.from_euclidean(&e);
            for (a, b) in back.iter().zip(sd.eigenvector(k)) {
                assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
            }
        }
        // continuum normalization: ψ₀ ≈ √2 sin(πx)
        let mid = op.grid.center_node();
        let x = op.grid.node_point(mid)[0];
        assert!((sd.value(0, mid) - 2f64.sqrt() * (PI * x).sin()).abs() < 1e-3);
    }

    #[test]
    fn domain_monotonicity() {
        for m in [1, 2] {
            let big = eigendecompose(&op1d(m, 99, Domain::unit_interval()), ModeCount::Lowest(1)).unwrap();
            let small =
                eigendecompose(&op1d(m, 99, Domain::interval(0.0, 0.5).unwrap()), ModeCount::Lowest(1))
                    .unwrap();
            assert!(small.spectral_gap() > big.spectral_gap());
        }
    }

    #[test]
    fn gap_scales_with_coefficient() {
        let grid = Grid::new(Domain::unit_interval(), 80).unwrap();
        let one = DiscreteOperator::build(
            OperatorSpec::new(2, 1, Coefficient::Constant(1.0)).unwrap(),
            grid.clone(),
        )
        .unwrap();
        let four = DiscreteOperator::build(
            OperatorSpec::new(2, 1, Coefficient::Constant(4.0)).unwrap(),
            grid,
        )
        .unwrap();
        let mu1 = spectral_gap(&eigendecompose(&one, ModeCount::Lowest(1)).unwrap());
        let mu4 = spectral_gap(&eigendecompose(&four, ModeCount::Lowest(1)).unwrap());
        assert!((mu4 / mu1 - 4.0).abs() < 1e-12);
    }
}
