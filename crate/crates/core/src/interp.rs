//! Off-grid evaluation of grid functions.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::grid::{Axis, ParameterGrid};

/// How samples are blended to evaluate between nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpKind {
    /// Trigonometric interpolation on periodic axes (exact for resolved
    /// band-limited data), local Lagrange of degree 9 on bounded axes.
    Spectral,
    /// Local Lagrange interpolation with the given number of nodes per axis.
    Local(usize),
}

impl Default for InterpKind {
    fn default() -> Self {
        InterpKind::Local(8)
    }
}

/// Sparse interpolation weights along one axis.
pub type Weights = Vec<(usize, f64)>;

fn trig_weights(axis: &Axis, x: f64) -> Weights {
    let n = axis.n;
    let l = axis.range.length();
    (0..n)
        .map(|k| {
            let mut theta = 2.0 * PI * (x - axis.coord(k)) / l;
            theta = theta.rem_euclid(2.0 * PI);
            if theta > PI {
                theta -= 2.0 * PI;
            }
            let w = if theta.abs() < 1e-13 {
                1.0
            } else {
                (0.5 * n as f64 * theta).sin() / (n as f64 * (0.5 * theta).tan())
            };
            (k, w)
        })
        .collect()
}

fn lagrange_weights(axis: &Axis, x: f64, npts: usize) -> Weights {
    let n = axis.n;
    let npts = npts.min(n);
    let h = axis.spacing();
    let s = (x - axis.range.start) / h;
    // Stencil start (in unwrapped node index space).
    let first = (s.floor() as i64) - (npts as i64 - 1) / 2;
    let first = if axis.periodic {
        first
    } else {
        first.clamp(0, n as i64 - npts as i64)
    };
    let nodes: Vec<i64> = (0..npts as i64).map(|k| first + k).collect();
    let mut out = Vec::with_capacity(npts);
    for (a, &na) in nodes.iter().enumerate() {
        let mut w = 1.0;
        for (b, &nb) in nodes.iter().enumerate() {
            if a != b {
                w *= (s - nb as f64) / (na - nb) as f64;
            }
        }
        let idx = if axis.periodic {
            na.rem_euclid(n as i64) as usize
        } else {
            na as usize
        };
        out.push((idx, w));
    }
    out
}

/// Interpolation weights at coordinate `x` along `axis`.
pub fn axis_weights(axis: &Axis, x: f64, kind: InterpKind) -> Weights {
    match kind {
        InterpKind::Spectral if axis.periodic => trig_weights(axis, x),
        InterpKind::Spectral => lagrange_weights(axis, x, 10),
        InterpKind::Local(p) => lagrange_weights(axis, x, p),
    }
}

/// Tensor-product evaluation of `a` with precomputed weights.
pub fn apply(a: &Array2<f64>, wu: &Weights, wv: &Weights) -> f64 {
    let mut acc = 0.0;
    for &(i, a_i) in wu {
        let mut row = 0.0;
        for &(j, b_j) in wv {
            row += b_j * a[[i, j]];
        }
        acc += a_i * row;
    }
    acc
}

/// Evaluate a grid function at `(u, v)`.
pub fn eval(grid: &ParameterGrid, a: &Array2<f64>, u: f64, v: f64, kind: InterpKind) -> f64 {
    let wu = axis_weights(&grid.u, u, kind);
    let wv = axis_weights(&grid.v, v, kind);
    apply(a, &wu, &wv)
}

/// Evaluate a 1D sample array at `x`.
pub fn eval_line(axis: &Axis, samples: &[f64], x: f64, kind: InterpKind) -> f64 {
    axis_weights(axis, x, kind)
        .into_iter()
        .map(|(i, w)| w * samples[i])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Interval;

    #[test]
    fn trig_interpolation_is_exact_for_band_limited_data() {
        let g = ParameterGrid::new(
            16,
            16,
            true,
            true,
            Interval::new(0.0, 2.0 * PI),
            Interval::new(0.0, 2.0 * PI),
        )
        .unwrap();
        let f = |u: f64, v: f64| (3.0 * u).sin() * (2.0 * v).cos() + (5.0 * v).sin();
        let a = Array2::from_shape_fn(g.shape(), |(i, j)| {
            let (u, v) = g.point(i, j);
            f(u, v)
        });
        for &(u, v) in &[(0.123, 4.5), (6.1, 0.77), (-1.0, 9.0)] {
            let e = eval(&g, &a, u, v, InterpKind::Spectral);
            assert!((e - f(u, v)).abs() < 1e-12);
        }
    }

    #[test]
    fn lagrange_reproduces_polynomials_near_edges() {
        let axis = Axis::new(20, false, Interval::new(1.0, 2.0));
        let samples: Vec<f64> = axis.coords().iter().map(|x| x.powi(5) - x).collect();
        for &x in &[1.0, 1.013, 1.5, 1.99, 2.0] {
            let e = eval_line(&axis, &samples, x, InterpKind::Local(6));
            assert!((e - (x.powi(5) - x)).abs() < 1e-12);
        }
    }
}
