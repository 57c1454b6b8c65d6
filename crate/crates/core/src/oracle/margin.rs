//! Empirical small-ball profile `t -> P(0 < |eta| <= t)` of a hinge argument.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginProfile {
    pub points: Vec<(f64, f64)>,
    /// Least-squares slope of `log P` on `log t` over grid points with
    /// `P > 0`; a rough sharpness estimate. `None` with fewer than two such points.
    pub slope: Option<f64>,
}

pub fn margin_profile(eta_values: &[f64], t_grid: &[f64]) -> Result<MarginProfile> {
    if eta_values.is_empty() {
        return Err(Error::InvalidInput("margin profile needs at least one value".into()));
    }
    let mut abs: Vec<f64> = eta_values.iter().map(|v| v.abs()).filter(|&v| v > 0.0).collect();
    abs.sort_by(f64::total_cmp);
    let n = eta_values.len() as f64;
    let points: Vec<(f64, f64)> = t_grid
        .iter()
        .map(|&t| (t, abs.partition_point(|&v| v <= t) as f64 / n))
        .collect();

    let logs: Vec<(f64, f64)> = points.iter().filter(|(t, p)| *t > 0.0 && *p > 0.0).map(|(t, p)| (t.ln(), p.ln())).collect();
    let slope = (logs.len() >= 2).then(|| {
        let m = logs.len() as f64;
        let (mx, my) = (logs.iter().map(|l| l.0).sum::<f64>() / m, logs.iter().map(|l| l.1).sum::<f64>() / m);
        let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        sxy / sxx
    });
    Ok(MarginProfile { points, slope: slope.filter(|s| s.is_finite()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_masses_away_from_zero() {
        let values = [0.5, -0.5, 0.5, -0.5];
        let p = margin_profile(&values, &[0.1, 0.2, 0.49, 0.5]).unwrap();
        assert!(p.points[..3].iter().all(|&(_, q)| q == 0.0));
        assert_eq!(p.points[3].1, 1.0);
        assert_eq!(p.slope, None);
    }

    #[test]
    fn zeros_are_excluded() {
        let p = margin_profile(&[0.0, 0.0, 0.1, -0.3], &[0.2]).unwrap();
        assert_eq!(p.points[0].1, 0.25);
    }

    #[test]
    fn uniform_has_unit_slope() {
        let values: Vec<f64> = (0..20_000).map(|i| -1.0 + (i as f64 + 0.5) / 10_000.0).collect();
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let p = margin_profile(&values, &grid).unwrap();
        for &(t, q) in &p.points {
            assert!((q - t).abs() < 1e-3);
        }
        assert!((p.slope.unwrap() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn empty_is_error() {
        assert!(margin_profile(&[], &[0.1]).is_err());
    }
}
