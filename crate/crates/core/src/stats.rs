//! Sample statistics and log-log power-law fits.

use crate::error::{invalid, Result};

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// `sqrt(mean((v − reference)²))`
pub fn l2_error(v: &[f64], reference: f64) -> f64 {
    (v.iter().map(|x| (x - reference).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Sorted copy; the empirical CDF at `sorted[k]` is `(k+1)/n`.
pub fn ecdf(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Empirical CDF `F(x) = #{v ≤ x}/n` of a sorted sample.
pub fn ecdf_eval(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|v| *v <= x) as f64 / sorted.len() as f64
}

/// Two-sided 97.5% Student-t quantiles for 1..=30 degrees of freedom.
const T975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

fn t_quantile(df: usize) -> f64 {
    match df {
        0 => f64::INFINITY,
        d if d <= 30 => T975[d - 1],
        _ => 1.96,
    }
}

/// `y ≈ a·x^t`, fitted by least squares on `(ln x, ln y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// `exp(intercept)`
    pub prefactor: f64,
    pub slope_stderr: f64,
    /// Half-width of the 95% confidence interval of the slope.
    pub slope_ci: f64,
    pub residuals: Vec<f64>,
    /// Indices of points dropped because `x` or `y` was not positive.
    pub excluded: Vec<usize>,
}

impl LogLogFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.prefactor * x.powf(self.slope)
    }
}

pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<LogLogFit> {
    if x.len() != y.len() {
        return Err(invalid("fit inputs differ in length"));
    }
    let mut excluded = Vec::new();
    let mut pts = Vec::new();
    for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
        if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
            pts.push((a.ln(), b.ln()));
        } else {
            excluded.push(i);
        }
    }
    if pts.len() < 2 {
        return Err(invalid(format!(
            "need two positive points for a log-log fit, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(invalid("log-log fit needs at least two distinct abscissae"));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = pts.iter().map(|p| p.1 - intercept - slope * p.0).collect();
    let df = pts.len().saturating_sub(2);
    let slope_stderr = if df > 0 {
        (residuals.iter().map(|r| r * r).sum::<f64>() / df as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LogLogFit {
        slope,
        intercept,
        prefactor: intercept.exp(),
        slope_stderr,
        slope_ci: if df > 0 {
            t_quantile(df) * slope_stderr
        } else {
            f64::INFINITY
        },
        residuals,
        excluded,
    })
}
