//! Fixtures shared by the criterion targets.

use std::f64::consts::PI;

use mongeflow::calculus::symplectic_gradient;
use mongeflow::{Chart, ScalarField, SurfaceChart, VectorField};

pub fn torus(n: usize) -> Chart {
    SurfaceChart::flat_torus(2.0 * PI, 2.0 * PI, n, n).expect("valid grid")
}

pub fn band(n: usize) -> Chart {
    SurfaceChart::sphere_band(0.6, 2.2, n, n).expect("valid grid")
}

/// A smooth stream function with energy in several modes.
pub fn stream(chart: &Chart) -> ScalarField {
    ScalarField::from_fn(chart, |u, v| u.sin() * (2.0 * v).cos() + 0.3 * (u + v).cos())
}

/// The cellular flow, a steady Euler solution on the torus.
pub fn cellular(chart: &Chart) -> VectorField {
    symplectic_gradient(&ScalarField::from_fn(chart, |u, v| v.cos() - u.cos()))
}
