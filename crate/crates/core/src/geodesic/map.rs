use ndarray::Array2;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::calculus;
use crate::interp::{self, InterpKind};
use crate::surface::Chart;

/// Images `η(x)` of the grid nodes, in unwrapped chart coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
}

impl GridMap {
    pub fn identity(chart: &Chart) -> Self {
        let g = chart.grid;
        let shape = g.shape();
        Self {
            u: Array2::from_shape_fn(shape, |(i, _)| g.u.coord(i)),
            v: Array2::from_shape_fn(shape, |(_, j)| g.v.coord(j)),
        }
    }

    /// `η(x) − x`; periodic in `x` on closed charts.
    pub fn displacement(&self, chart: &Chart) -> (Array2<f64>, Array2<f64>) {
        let id = Self::identity(chart);
        (&self.u - &id.u, &self.v - &id.v)
    }

    /// `det Dη` at the grid nodes, differentiating the displacement with the
    /// chart's derivative operators.
    pub fn jacobian_det(&self, chart: &Chart) -> Array2<f64> {
        let [a, b, c, d] = self.jacobian(chart);
        &a * &d - &b * &c
    }

    /// Entries `[∂_u η^u, ∂_v η^u, ∂_u η^v, ∂_v η^v]`.
    pub fn jacobian(&self, chart: &Chart) -> [Array2<f64>; 4] {
        let (du, dv) = self.displacement(chart);
        let [a, b] = calculus::partials(&ScalarField::wrap(chart, du));
        let [c, d] = calculus::partials(&ScalarField::wrap(chart, dv));
        [a + 1.0, b, c, d + 1.0]
    }

    /// L² distance `(∫ |η(x) − ζ(x)|² dV(x))^{1/2}` with the metric at
    /// `η(x)`; on the flat torus the plain Euclidean distance of unwrapped
    /// images.
    pub fn l2_distance(&self, other: &GridMap, chart: &Chart) -> f64 {
        let mut sq = Array2::zeros(chart.shape());
        for ((i, j), s) in sq.indexed_iter_mut() {
            let du = self.u[[i, j]] - other.u[[i, j]];
            let dv = self.v[[i, j]] - other.v[[i, j]];
            let (g11, g22) = chart.metric_at(self.u[[i, j]]);
            *s = g11 * du * du + g22 * dv * dv;
        }
        chart.integrate(&sq).sqrt()
    }

    /// Points `x` with `η(x) = y` for every grid node `y` (closed charts).
    /// Newton on `x + d(x) = y` with the displacement `d` interpolated
    /// spectrally.
    pub fn preimages(&self, chart: &Chart) -> Result<(Array2<f64>, Array2<f64>)> {
        if !chart.is_closed() {
            return Err(Error::UnsupportedChart("a boundaryless chart for map inversion".into()));
        }
        let g = chart.grid;
        let (du, dv) = self.displacement(chart);
        let [a, b, c, d] = self.jacobian(chart);
        let kind = InterpKind::Spectral;
        let mut pu = Array2::zeros(chart.shape());
        let mut pv = Array2::zeros(chart.shape());
        let scale = g.u.spacing().min(g.v.spacing());
        for i in 0..g.nu() {
            for j in 0..g.nv() {
                let (yu, yv) = g.point(i, j);
                let (mut xu, mut xv) = (yu - du[[i, j]], yv - dv[[i, j]]);
                let mut converged = false;
                for _ in 0..50 {
                    let wu = interp::axis_weights(&g.u, xu, kind);
                    let wv = interp::axis_weights(&g.v, xv, kind);
                    let at = |f: &Array2<f64>| interp::apply(f, &wu, &wv);
                    let ru = xu + at(&du) - yu;
                    let rv = xv + at(&dv) - yv;
                    let (ja, jb, jc, jd) = (at(&a), at(&b), at(&c), at(&d));
                    let det = ja * jd - jb * jc;
                    if !(det > 0.0) {
                        return Err(Error::FoldingMap { min_det: det });
                    }
                    let su = (jd * ru - jb * rv) / det;
                    let sv = (-jc * ru + ja * rv) / det;
                    xu -= su;
                    xv -= sv;
                    if su.abs().max(sv.abs()) < 1e-12 * scale {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(Error::NewtonFailed {
                        iterations: 50,
                        residual: f64::NAN,
                        reason: format!("map inversion at node ({i}, {j})"),
                    });
                }
                pu[[i, j]] = xu;
                pv[[i, j]] = xv;
            }
        }
        Ok((pu, pv))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::SurfaceChart;
    use std::f64::consts::PI;

    #[test]
    fn identity_has_unit_jacobian_and_zero_distance() {
        let c = SurfaceChart::flat_torus(2.0 * PI, 2.0 * PI, 16, 16).unwrap();
        let id = GridMap::identity(&c);
        assert!(id.jacobian_det(&c).iter().all(|d| (d - 1.0).abs() < 1e-14));
        assert_eq!(id.l2_distance(&id, &c), 0.0);
    }

    #[test]
    fn shift_distance_is_shift_times_root_area() {
        let c = SurfaceChart::flat_torus(2.0 * PI, 2.0 * PI, 16, 16).unwrap();
        let id = GridMap::identity(&c);
        let s = GridMap {
            u: &id.u + 0.3,
            v: &id.v - 0.4,
        };
        assert!((s.l2_distance(&id, &c) - 0.5 * 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn preimages_invert_a_smooth_map() {
        let c = SurfaceChart::flat_torus(2.0 * PI, 2.0 * PI, 32, 32).unwrap();
        let id = GridMap::identity(&c);
        let m = GridMap {
            u: &id.u + &id.v.mapv(|v| 0.3 * v.sin()),
            v: &id.v + &id.u.mapv(|u| 0.2 * (u + 0.4).cos()),
        };
        let (pu, pv) = m.preimages(&c).unwrap();
        for ((i, j), x) in pu.indexed_iter() {
            let y = pv[[i, j]];
            let (gu, gv) = c.grid.point(i, j);
            assert!((x + 0.3 * y.sin() - gu).abs() < 1e-12);
            assert!((y + 0.2 * (x + 0.4).cos() - gv).abs() < 1e-12);
        }
    }
}
