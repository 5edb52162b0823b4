use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A mean phonon number measured after a heating delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingPoint {
    /// Delay, seconds.
    pub delay: f64,
    pub nbar: f64,
    /// One-standard-deviation uncertainty of `nbar`; zero means unknown.
    pub uncertainty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingFit {
    /// Heating rate, quanta per second.
    pub rate: f64,
    pub rate_uncertainty: f64,
    pub intercept: f64,
    pub intercept_uncertainty: f64,
    pub chi_squared: f64,
}

/// Straight-line fit of n̄ against delay.
///
/// With positive uncertainties on every point the fit is weighted by 1/σ² and
/// the standard errors follow from the weights. Otherwise an unweighted fit is
/// made and the errors are scaled by the residual variance.
pub fn heating_rate_fit(points: &[HeatingPoint]) -> Result<HeatingFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 delay points, got {}", points.len())));
    }
    if points.iter().any(|p| !(p.delay.is_finite() && p.nbar.is_finite() && p.uncertainty.is_finite())) {
        return Err(Error::invalid("heating points", "must be finite"));
    }
    let weighted = points.iter().all(|p| p.uncertainty > 0.0);
    let w: Vec<f64> = points.iter().map(|p| if weighted { p.uncertainty.powi(-2) } else { 1.0 }).collect();
    let s: f64 = w.iter().sum();
    let sx: f64 = points.iter().zip(&w).map(|(p, w)| w * p.delay).sum();
    let sy: f64 = points.iter().zip(&w).map(|(p, w)| w * p.nbar).sum();
    let sxx: f64 = points.iter().zip(&w).map(|(p, w)| w * p.delay * p.delay).sum();
    let sxy: f64 = points.iter().zip(&w).map(|(p, w)| w * p.delay * p.nbar).sum();
    let det = s * sxx - sx * sx;
    if det <= 0.0 || det.abs() < 1e-300 {
        return Err(Error::InsufficientData("delays must not all be equal".into()));
    }
    let rate = (s * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let chi2: f64 = points.iter().zip(&w).map(|(p, w)| w * (p.nbar - intercept - rate * p.delay).powi(2)).sum();
    let scale = if weighted { 1.0 } else { chi2 / (points.len() - 2) as f64 };
    Ok(HeatingFit {
        rate,
        rate_uncertainty: (scale * s / det).sqrt(),
        intercept,
        intercept_uncertainty: (scale * sxx / det).sqrt(),
        chi_squared: chi2,
    })
}

#[derive(Serialize, Deserialize)]
struct HeatingRow {
    delay_s: f64,
    nbar: f64,
    uncertainty: f64,
}

/// Writes `delay_s,nbar,uncertainty` rows.
pub fn write_heating_csv<W: Write>(points: &[HeatingPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in points {
        w.serialize(HeatingRow { delay_s: p.delay, nbar: p.nbar, uncertainty: p.uncertainty })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_heating_csv<R: Read>(reader: R) -> Result<Vec<HeatingPoint>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize::<HeatingRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row?;
            if !(row.delay_s.is_finite() && row.delay_s >= 0.0 && row.uncertainty >= 0.0) {
                return Err(Error::parse(i + 2, "delay and uncertainty must be non-negative"));
            }
            Ok(HeatingPoint { delay: row.delay_s, nbar: row.nbar, uncertainty: row.uncertainty })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_line() {
        let pts: Vec<_> =
            (0..6).map(|k| HeatingPoint { delay: k as f64 * 0.02, nbar: 0.3 + 11.0 * k as f64 * 0.02, uncertainty: 0.0 }).collect();
        let f = heating_rate_fit(&pts).unwrap();
        assert_relative_eq!(f.rate, 11.0, max_relative = 1e-12);
        assert_relative_eq!(f.intercept, 0.3, max_relative = 1e-12);
        assert!(f.chi_squared < 1e-20);
        assert!(f.rate_uncertainty < 1e-8);
    }

    #[test]
    fn weighted_errors_follow_textbook_formula() {
        // two-parameter fit, σ = 0.1 everywhere, x = 0, 1, 2: var(slope) = σ²/Σ(x − x̄)² = 0.01/2
        let pts: Vec<_> = [0.0, 1.0, 2.0].iter().map(|&x| HeatingPoint { delay: x, nbar: 1.0 + x, uncertainty: 0.1 }).collect();
        let f = heating_rate_fit(&pts).unwrap();
        assert_relative_eq!(f.rate_uncertainty, (0.01f64 / 2.0).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let pts = vec![
            HeatingPoint { delay: 0.0, nbar: 0.3, uncertainty: 0.015 },
            HeatingPoint { delay: 0.05, nbar: 0.1 + 0.2, uncertainty: 0.0 },
        ];
        let mut buf = Vec::new();
        write_heating_csv(&pts, &mut buf).unwrap();
        assert!(buf.starts_with(b"delay_s,nbar,uncertainty\n"));
        assert_eq!(read_heating_csv(buf.as_slice()).unwrap(), pts);
        assert!(read_heating_csv("delay_s,nbar,uncertainty\n-1,0,0\n".as_bytes()).is_err());
    }

    #[test]
    fn too_few_points() {
        let p = HeatingPoint { delay: 0.0, nbar: 0.3, uncertainty: 0.1 };
        assert!(matches!(heating_rate_fit(&[p, p]), Err(Error::InsufficientData(_))));
        assert!(heating_rate_fit(&[p, p, p]).is_err());
    }
}
