use serde::Serialize;

use super::LogReal;
use crate::error::{Error, Result};

/// Least-squares fit of `ln|error| = intercept - slope · N`.
///
/// `slope` is the empirical exponential decay rate.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// (N, ln|error|) pairs that entered the fit.
    pub points: Vec<(f64, f64)>,
}

impl DecayFit {
    pub fn predict(&self, n: f64) -> f64 {
        self.intercept - self.slope * n
    }
}

/// Points with zero error carry no rate information and are skipped.
pub fn fit_log_linear(points: &[(f64, LogReal)]) -> Result<DecayFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, e)| !e.is_zero())
        .map(|(n, e)| (*n, e.ln_abs_f64()))
        .filter(|(n, l)| n.is_finite() && l.is_finite())
        .collect();
    fit_log_values(&usable)
}

/// Same fit on pre-computed log-errors.
pub fn fit_log_values(points: &[(f64, f64)]) -> Result<DecayFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData {
            usable: points.len(),
        });
    }
    let m = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData { usable: 1 });
    }
    let beta = sxy / sxx;
    let intercept = mean_y - beta * mean_x;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (intercept + beta * p.0)).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(DecayFit {
        slope: -beta,
        intercept,
        r_squared,
        points: points.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::Float;

    fn log_point(n: f64, l: f64) -> (f64, LogReal) {
        (n, LogReal::from_log(Float::with_val(64, l)))
    }

    #[test]
    fn exact_line() {
        let pts = vec![
            log_point(10.0, -10.0),
            log_point(20.0, -20.0),
            log_point(30.0, -30.0),
        ];
        let fit = fit_log_linear(&pts).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-10);
    }

    #[test]
    fn exact_exponential_samples() {
        let pts: Vec<_> = (1..=8)
            .map(|k| {
                let n = 10.0 * k as f64;
                // e^{-2N} as an actual tiny value, not a log
                let v = Float::with_val(256, -2.0 * n).exp();
                (n, LogReal::from_float(&v))
            })
            .collect();
        let fit = fit_log_linear(&pts).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![
            log_point(1.0, -1.0),
            log_point(2.0, -2.0),
            (3.0, LogReal::zero(64)),
        ];
        assert_eq!(
            fit_log_linear(&pts).unwrap_err(),
            Error::InsufficientData { usable: 2 }
        );
    }

    #[test]
    fn r_squared_in_unit_interval() {
        let pts = vec![
            log_point(1.0, 3.0),
            log_point(2.0, -1.0),
            log_point(3.0, 2.0),
            log_point(4.0, -4.0),
        ];
        let fit = fit_log_linear(&pts).unwrap();
        assert!((0.0..=1.0).contains(&fit.r_squared));
    }
}
