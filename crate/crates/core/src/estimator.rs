//! Pixel-area to grams regression.
//!
//! A single ordinary-least-squares line is fitted on total tray area against total tray
//! weight. Sums are accumulated around the means so large pixel counts do not lose
//! precision.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::EstimatorError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSample {
    pub area_px: u64,
    pub weight_g: f64,
}

impl WeightSample {
    pub fn new(area_px: u64, weight_g: f64) -> Result<Self, EstimatorError> {
        if !(weight_g.is_finite() && weight_g >= 0.0) {
            return Err(EstimatorError::InvalidSample(format!("weight_g {weight_g} must be a non-negative number")));
        }
        Ok(Self { area_px, weight_g })
    }
}

/// Fitted line `grams = slope * area_px + intercept`.
///
/// `n_samples` is 0 for models built directly from configured coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_samples: usize,
}

impl LinearModel {
    /// A model taken from configuration rather than a fit.
    pub fn from_coefficients(slope: f64, intercept: f64) -> Self {
        Self { slope, intercept, r_squared: 1.0, n_samples: 0 }
    }

    pub fn is_fitted(&self) -> bool {
        self.n_samples >= 2
    }

    pub fn predict(&self, area_px: u64) -> f64 {
        predict(self, area_px)
    }
}

pub fn fit(samples: &[WeightSample]) -> Result<LinearModel, EstimatorError> {
    let n = samples.len();
    if n < 2 {
        return Err(EstimatorError::InsufficientSamples(n));
    }
    let nf = n as f64;
    let mean_x = samples.iter().map(|s| s.area_px as f64).sum::<f64>() / nf;
    let mean_y = samples.iter().map(|s| s.weight_g).sum::<f64>() / nf;

    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for s in samples {
        let dx = s.area_px as f64 - mean_x;
        let dy = s.weight_g - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let first = samples[0].area_px;
    if samples.iter().all(|s| s.area_px == first) {
        return Err(EstimatorError::DegenerateX);
    }

    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;

    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = samples
            .iter()
            .map(|s| {
                let r = s.weight_g - (slope * s.area_px as f64 + intercept);
                r * r
            })
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };

    Ok(LinearModel { slope, intercept, r_squared, n_samples: n })
}

/// Predicted grams, clamped at zero.
pub fn predict(model: &LinearModel, area_px: u64) -> f64 {
    (model.slope * area_px as f64 + model.intercept).max(0.0)
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    area_px: u64,
    weight_g: f64,
}

/// Reads calibration samples from CSV with header `area_px,weight_g`.
pub fn read_samples_csv<R: Read>(reader: R) -> Result<Vec<WeightSample>, EstimatorError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| EstimatorError::Csv(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["area_px", "weight_g"] {
        return Err(EstimatorError::Csv(format!("expected header area_px,weight_g, got {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    rdr.deserialize::<CsvRow>()
        .map(|row| {
            let row = row.map_err(|e| EstimatorError::Csv(e.to_string()))?;
            WeightSample::new(row.area_px, row.weight_g)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(points: &[(u64, f64)]) -> Vec<WeightSample> {
        points.iter().map(|&(x, y)| WeightSample::new(x, y).unwrap()).collect()
    }

    #[test]
    fn exact_line() {
        let m = fit(&samples(&[(0, 0.0), (1, 2.0), (2, 4.0)])).unwrap();
        assert!((m.slope - 2.0).abs() < 1e-12);
        assert!(m.intercept.abs() < 1e-12);
        assert!((m.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(m.n_samples, 3);
    }

    #[test]
    fn five_point_fit_matches_pinned_values() {
        // Pinned from the 2x2 normal equations on raw sums:
        // n=5, Σx=25, Σy=33, Σx²=165, Σxy=219 → slope 54/40, intercept (33 - 1.35·25)/5;
        // SSres 4.3, SStot 77.2.
        let m = fit(&samples(&[(1, 2.0), (3, 3.0), (5, 7.0), (7, 8.0), (9, 13.0)])).unwrap();
        assert!((m.slope - 1.35).abs() < 1e-12);
        assert!((m.intercept - (-0.15)).abs() < 1e-12);
        assert!((m.r_squared - (1.0 - 4.3 / 77.2)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_insufficient() {
        assert_eq!(fit(&samples(&[(5, 10.0), (5, 12.0)])), Err(EstimatorError::DegenerateX));
        assert_eq!(fit(&samples(&[(5, 10.0)])), Err(EstimatorError::InsufficientSamples(1)));
        assert_eq!(fit(&[]), Err(EstimatorError::InsufficientSamples(0)));
    }

    #[test]
    fn constant_y_has_unit_r_squared() {
        let m = fit(&samples(&[(1, 7.0), (2, 7.0), (9, 7.0)])).unwrap();
        assert_eq!(m.slope, 0.0);
        assert_eq!(m.r_squared, 1.0);
    }

    #[test]
    fn predict_clamps() {
        let m = LinearModel::from_coefficients(2.0, 0.0);
        assert_eq!(predict(&m, 500), 1000.0);
        assert_eq!(predict(&LinearModel::from_coefficients(2.0, -5.0), 1), 0.0);
        let constant = LinearModel::from_coefficients(0.0, 7.0);
        assert_eq!(predict(&constant, 0), 7.0);
        assert_eq!(predict(&constant, 123_456), 7.0);
    }

    #[test]
    fn negative_weight_rejected() {
        assert!(WeightSample::new(3, -1.0).is_err());
        assert!(WeightSample::new(3, f64::NAN).is_err());
    }

    #[test]
    fn csv_loading() {
        let data = "area_px,weight_g\n100,10.5\n200, 21\n";
        let s = read_samples_csv(data.as_bytes()).unwrap();
        assert_eq!(s, samples(&[(100, 10.5), (200, 21.0)]));
        assert!(read_samples_csv("x,y\n1,2\n".as_bytes()).is_err());
        assert!(read_samples_csv("area_px,weight_g\n-1,2\n".as_bytes()).is_err());
    }

    proptest::proptest! {
        #[test]
        fn shifting_y_shifts_intercept(
            pts in proptest::collection::vec((0u64..100_000, 0.0f64..10_000.0), 3..40),
            c in 0.0f64..1_000.0,
        ) {
            proptest::prop_assume!(pts.iter().any(|p| p.0 != pts[0].0));
            let base = fit(&samples(&pts)).unwrap();
            let shifted: Vec<_> = pts.iter().map(|&(x, y)| (x, y + c)).collect();
            let moved = fit(&samples(&shifted)).unwrap();
            let tol = 1e-9 * (1.0 + base.slope.abs());
            proptest::prop_assert!((moved.slope - base.slope).abs() <= tol);
            proptest::prop_assert!((moved.intercept - (base.intercept + c)).abs() <= 1e-9 * (1.0 + base.intercept.abs() + c));
        }

        #[test]
        fn predict_monotone_for_nonnegative_slope(slope in 0.0f64..10.0, intercept in -1e4f64..1e4, a in 0u64..1_000_000, b in 0u64..1_000_000) {
            let m = LinearModel::from_coefficients(slope, intercept);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(predict(&m, lo) <= predict(&m, hi));
        }
    }
}
