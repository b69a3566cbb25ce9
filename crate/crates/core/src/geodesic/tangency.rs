use serde::Serialize;

use super::{burgers_flow, check_div_free, pressure_field, EulerSolver, GridMap};
use crate::calculus;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::report::FLAT_TOLERANCE;
use crate::surface::ChartKind;

/// Taylor cross-check: `d(t) = ½ ‖∇p‖ t² + O(t³)`, so `d''(0)` and `‖∇p‖`
/// must agree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaylorCheck {
    /// `d''(0)`, extrapolated from the fit window.
    pub second_derivative: f64,
    /// `‖∇p(X0)‖_{L²}`.
    pub grad_pressure_l2: f64,
    /// `|d''(0)² − ‖∇p‖²| / ‖∇p‖²`.
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangencyFit {
    pub t_samples: Vec<f64>,
    pub distances: Vec<f64>,
    /// Slope of `log d` against `log t`; `None` on exact coincidence.
    pub fitted_exponent: Option<f64>,
    /// RMS residual of the log-log fit.
    pub fit_residual: Option<f64>,
    /// Sample indices `[first, last]` used by the fit.
    pub fit_window: Option<[usize; 2]>,
    /// All distances at round-off: the two geodesics coincide.
    pub exact_coincidence: bool,
    pub round_off_floor: f64,
    pub taylor: Option<TaylorCheck>,
}

/// Order of tangency between the Euler geodesic (volumorphisms) and the
/// Burgers geodesic (all diffeomorphisms) issued from `X0` on the flat
/// torus. Samples `n_samples` log-spaced times over two decades ending at
/// `t_max` and fits `d(t) ~ t^k` over the first decade whose distances are
/// above round-off.
pub fn tangency_order(x0: &VectorField, t_max: f64, n_samples: usize) -> Result<TangencyFit> {
    let c = x0.chart();
    if c.kind != ChartKind::FlatTorus {
        return Err(Error::UnsupportedChart("the flat torus for tangency fits".into()));
    }
    if n_samples < 3 || !(t_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need n_samples >= 3 and t_max > 0, got {n_samples}, {t_max}"
        )));
    }
    check_div_free(x0, FLAT_TOLERANCE)?;
    let times: Vec<f64> = (0..n_samples)
        .map(|k| t_max * 10f64.powf(-2.0 * (1.0 - k as f64 / (n_samples - 1) as f64)))
        .collect();
    // Both geodesics must exist up to t_max.
    burgers_flow(x0, t_max, 1)?;
    let id = GridMap::identity(c);
    let mut euler = EulerSolver::new(x0, true)?;
    // Fixed step resolution across the window: the smallest gap sets the scale.
    let max_dt = t_max / 1024.0;
    let mut distances = Vec::with_capacity(n_samples);
    for &t in &times {
        euler.advance_to(t, max_dt)?;
        let b = GridMap {
            u: &id.u + &(t * &x0.x1),
            v: &id.v + &(t * &x0.x2),
        };
        distances.push(euler.map().expect("particles tracked").l2_distance(&b, c));
    }
    let scale = x0.sup_norm().max(1.0) * t_max.max(1.0);
    let round_off_floor = 1e-11 * c.area().sqrt() * scale;
    let above: Vec<usize> = (0..n_samples).filter(|&k| distances[k] > round_off_floor).collect();
    if above.len() < 2 {
        return Ok(TangencyFit {
            t_samples: times,
            distances,
            fitted_exponent: None,
            fit_residual: None,
            fit_window: None,
            exact_coincidence: true,
            round_off_floor,
            taylor: None,
        });
    }
    let first = above[0];
    let t_end = 10.0 * times[first] * (1.0 + 1e-12);
    let window: Vec<usize> = above.iter().copied().filter(|&k| times[k] <= t_end).collect();
    let window = if window.len() >= 2 { window } else { above.clone() };
    let xs: Vec<f64> = window.iter().map(|&k| times[k].ln()).collect();
    let ys: Vec<f64> = window.iter().map(|&k| distances[k].ln()).collect();
    let (slope, intercept) = least_squares(&xs, &ys);
    let rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();

    // d(t)/t² = a + b t near 0, so d''(0) = 2a.
    let ts: Vec<f64> = window.iter().map(|&k| times[k]).collect();
    let ratio: Vec<f64> = window.iter().map(|&k| distances[k] / times[k].powi(2)).collect();
    let (_, a) = least_squares(&ts, &ratio);
    let gp = calculus::grad(&pressure_field(x0, FLAT_TOLERANCE)?).l2_norm();
    let taylor = (gp > 0.0).then(|| TaylorCheck {
        second_derivative: 2.0 * a,
        grad_pressure_l2: gp,
        relative_gap: ((2.0 * a).powi(2) - gp * gp).abs() / (gp * gp),
    });
    Ok(TangencyFit {
        t_samples: times,
        distances,
        fitted_exponent: Some(slope),
        fit_residual: Some(rms),
        fit_window: Some([window[0], *window.last().unwrap()]),
        exact_coincidence: false,
        round_off_floor,
        taylor,
    })
}

/// `(slope, intercept)` of the least-squares line through `(x, y)`.
fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::SurfaceChart;
    use std::f64::consts::PI;

    #[test]
    fn least_squares_recovers_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|t| 2.0 * t - 1.0).collect();
        let (s, i) = least_squares(&x, &y);
        assert!((s - 2.0).abs() < 1e-14 && (i + 1.0).abs() < 1e-14);
    }

    #[test]
    fn cellular_flow_has_first_order_tangency() {
        let c = SurfaceChart::flat_torus(2.0 * PI, 2.0 * PI, 32, 32).unwrap();
        let x = VectorField::from_fn(&c, |u, v| (v.sin(), u.sin()));
        let f = tangency_order(&x, 0.1, 9).unwrap();
        let k = f.fitted_exponent.unwrap();
        assert!((k - 2.0).abs() < 0.15, "{k}");
        let t = f.taylor.unwrap();
        assert!(t.relative_gap < 0.05, "{t:?}");
    }

    #[test]
    fn shear_flow_coincides_exactly() {
        let c = SurfaceChart::flat_torus(2.0 * PI, 2.0 * PI, 32, 32).unwrap();
        let x = VectorField::from_fn(&c, |_, v| (v.sin(), 0.0));
        let f = tangency_order(&x, 0.5, 7).unwrap();
        assert!(f.exact_coincidence);
        assert!(f.distances.iter().all(|d| *d < 1e-9));
        let z = tangency_order(&VectorField::zero(&c), 0.5, 5).unwrap();
        assert!(z.distances.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn times_are_log_spaced_over_two_decades() {
        let c = SurfaceChart::flat_torus(2.0 * PI, 2.0 * PI, 16, 16).unwrap();
        let f = tangency_order(&VectorField::zero(&c), 1.0, 5).unwrap();
        assert!((f.t_samples[0] - 0.01).abs() < 1e-15);
        assert!((f.t_samples[2] - 0.1).abs() < 1e-15);
        assert_eq!(f.t_samples[4], 1.0);
    }
}
