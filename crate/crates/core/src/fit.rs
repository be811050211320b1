//! Least-squares power-law fits in log-log coordinates.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{LabError, Result};

/// `log y ≈ intercept + slope · log x`, with the 95% half-width of the slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci95: f64,
    pub points: usize,
}

impl PowerFit {
    pub fn interval(&self) -> (f64, f64) {
        (self.slope - self.ci95, self.slope + self.ci95)
    }
}

pub fn fit_exponent(xs: &[f64], ys: &[f64]) -> Result<PowerFit> {
    if xs.len() != ys.len() {
        return Err(LabError::Shape { expected: format!("{} ys", xs.len()), found: ys.len().to_string() });
    }
    let n = xs.len();
    if n < 3 {
        return Err(LabError::Domain(format!("exponent fit needs at least 3 points, got {n}")));
    }
    if let Some(bad) = xs.iter().chain(ys).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(LabError::Domain(format!("exponent fit needs positive finite data, got {bad}")));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let nf = n as f64;
    let mx = lx.iter().sum::<f64>() / nf;
    let my = ly.iter().sum::<f64>() / nf;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(LabError::Domain("exponent fit needs at least two distinct xs".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = nf - 2.0;
    let se = (rss / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| LabError::Domain(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(PowerFit { slope, intercept, ci95: t * se, points: n })
}
