//! Quadrature rules: fixed Gauss–Legendre, adaptive Gauss–Kronrod (7/15) and
//! tanh–sinh (double exponential).

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(a: f64, b: f64, f: &impl Fn(f64) -> f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut k = GK_WK[7] * fc;
    let mut g = GK_WG[3] * fc;
    for i in 0..7 {
        let dx = half * GK_NODES[i];
        let s = f(mid - dx) + f(mid + dx);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * half, ((k - g) * half).abs())
}

/// Adaptive Gauss–Kronrod quadrature to absolute tolerance `tol`.
pub fn adaptive_gk(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    const MAX_INTERVALS: usize = 20_000;
    let (v, e) = gk15(a, b, &f);
    let mut pieces = vec![(a, b, v, e)];
    let mut total_err = e;
    let mut iterations = 0;
    while total_err > tol {
        iterations += 1;
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::NoConvergence {
                what: "adaptive Gauss-Kronrod quadrature",
                iterations,
            });
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, err) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(lo, mid, &f);
        let (v2, e2) = gk15(mid, hi, &f);
        total_err += e1 + e2 - err;
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
        if iterations % 64 == 0 {
            total_err = pieces.iter().map(|p| p.3).sum();
        }
    }
    let mut parts: Vec<f64> = pieces.iter().map(|p| p.2).collect();
    parts.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    Ok(parts.iter().sum())
}

/// Tanh–sinh quadrature on `[a, b]` with step `h` and `levels` halvings.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64, levels: usize) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let pi2 = std::f64::consts::FRAC_PI_2;
    let tmax = 4.5;
    let mut h = 0.5;
    let eval = |t: f64| -> f64 {
        let u = pi2 * t.sinh();
        let w = pi2 * t.cosh() / u.cosh().powi(2);
        // distance to the nearer endpoint, computed without cancellation
        let gap = half * 2.0 / ((2.0 * u.abs()).exp() + 1.0);
        let xx = if t == 0.0 {
            mid
        } else if t < 0.0 {
            a + gap
        } else {
            b - gap
        };
        if gap == 0.0 || xx <= a || xx >= b {
            0.0
        } else {
            w * f(xx)
        }
    };
    let mut sum = eval(0.0);
    let mut k = 1;
    while k as f64 * h <= tmax {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = sum * h;
    for _ in 0..levels {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= tmax {
            let t = k as f64 * h;
            sum += eval(t) + eval(-t);
            k += 2;
        }
        estimate = sum * h;
    }
    half * estimate
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let gl = GaussLegendre::new(8);
        // exact up to degree 15
        let v = gl.integrate(0.0, 2.0, |x| x.powi(15) - 3.0 * x.powi(4) + 1.0);
        let exact = 2f64.powi(16) / 16.0 - 3.0 * 2f64.powi(5) / 5.0 + 2.0;
        assert!((v - exact).abs() < 1e-9 * exact.abs());
        let w: f64 = GaussLegendre::new(256).weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_and_tanh_sinh_agree_on_smooth_bump() {
        let f = |x: f64| if x.abs() < 1.0 { (1.0 - 1.0 / (1.0 - x * x)).exp() } else { 0.0 };
        let a = adaptive_gk(f, -1.0, 1.0, 1e-13).unwrap();
        let b = tanh_sinh(f, -1.0, 1.0, 8);
        assert!((a - b).abs() < 1e-11, "{a} {b}");
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let v = adaptive_gk(|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-10).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
        let w = tanh_sinh(|x: f64| x.powf(-0.5), 0.0, 1.0, 8);
        assert!((w - 2.0).abs() < 1e-10);
    }
}
