//! Least-squares power-law fits.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub points: usize,
}

/// Fits `log y = intercept + slope · log x`. Needs at least 5 points, all positive.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerFit> {
    if xs.len() != ys.len() {
        return Err(invalid("fit needs equally many predictors and values"));
    }
    let n = xs.len();
    if n < 5 {
        return Err(invalid(format!("fit needs at least 5 points, got {n}")));
    }
    if let Some((x, y)) = xs.iter().zip(ys).find(|(x, y)| !(**x > 0.0 && **y > 0.0)) {
        return Err(invalid(format!("nonpositive sample ({x}, {y}) in fit window")));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let nf = n as f64;
    let mx = lx.iter().sum::<f64>() / nf;
    let my = ly.iter().sum::<f64>() / nf;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("fit predictor is constant"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (rss / (nf - 2.0) / sxx).sqrt();
    Ok(PowerFit {
        slope,
        intercept,
        stderr,
        points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let ts: Vec<f64> = (0..10).map(|i| 1e-4 * 10f64.powf(i as f64 / 4.5)).collect();
        let ks: Vec<f64> = ts.iter().map(|t| 3.0 * t.powf(-0.5)).collect();
        let fit = fit_power_law(&ts, &ks).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!(fit.stderr < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(fit_power_law(&ts[..4], &ks[..4]).is_err());
        let mut bad = ks.clone();
        bad[3] = 0.0;
        assert!(fit_power_law(&ts, &bad).is_err());
    }
}
