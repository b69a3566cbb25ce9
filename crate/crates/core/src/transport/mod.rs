//! Quadratic-cost mass transport on the flat torus by gradient maps
//! `η = x + ∇u`, the Jacobian equation, displacement interpolation and the
//! projection of Burgers flows onto densities.

mod newton;
mod spectral;
mod submersion;

pub use newton::{solve_transport, NewtonStats, TransportSolution, TransportSolver};
pub use submersion::{submersion_check, vertical_departure_rate};

use ndarray::{Array2, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::geodesic::GridMap;
use crate::interp::{self, InterpKind};
use crate::surface::{Chart, ChartKind};
use spectral::Derivs;

/// Mass drift above which a resampled density is rejected.
pub const MASS_DRIFT_LIMIT: f64 = 1e-8;

fn require_torus(chart: &Chart) -> Result<()> {
    if chart.kind != ChartKind::FlatTorus {
        return Err(Error::UnsupportedChart("the flat torus for transport".into()));
    }
    Ok(())
}

/// A positive probability density with respect to the area form.
#[derive(Debug, Clone)]
pub struct Density {
    chart: Chart,
    pub samples: Array2<f64>,
}

impl Density {
    /// Normalizes `samples` to unit mass. Samples must be positive.
    pub fn new(chart: &Chart, samples: Array2<f64>) -> Result<Self> {
        require_torus(chart)?;
        let f = ScalarField::new(chart, samples)?;
        if let Some(bad) = f.samples.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "density samples must be positive, found {bad}"
            )));
        }
        let mass = f.integral();
        Ok(Self {
            chart: chart.clone(),
            samples: f.samples / mass,
        })
    }

    pub fn from_fn(chart: &Chart, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::new(chart, ScalarField::from_fn(chart, f).samples)
    }

    pub fn uniform(chart: &Chart) -> Result<Self> {
        Self::new(chart, Array2::ones(chart.shape()))
    }

    /// `∝ 1 + ε cos u`, or the product `(1 + ε cos u)(1 + ε cos v)`.
    pub fn cosine(chart: &Chart, epsilon: f64, product: bool) -> Result<Self> {
        Self::from_fn(chart, |u, v| {
            (1.0 + epsilon * u.cos()) * if product { 1.0 + epsilon * v.cos() } else { 1.0 }
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn mass(&self) -> f64 {
        self.chart.integrate(&self.samples)
    }

    pub fn field(&self) -> ScalarField {
        ScalarField::new(&self.chart, self.samples.clone()).expect("shape checked")
    }

    pub fn sup_diff(&self, other: &Density) -> f64 {
        Zip::from(&self.samples)
            .and(&other.samples)
            .fold(0.0f64, |m, a, b| m.max((a - b).abs()))
    }
}

/// Zero-mean periodic `u`; the transport map is `η = x + ∇u`, the gradient
/// of the convex potential `½|x|² + u`.
#[derive(Debug, Clone)]
pub struct TransportPotential {
    pub u: ScalarField,
}

impl TransportPotential {
    pub fn new(u: ScalarField) -> Result<Self> {
        require_torus(u.chart())?;
        let mean = u.mean();
        Ok(Self {
            u: ScalarField::new(u.chart(), u.samples.mapv(|x| x - mean))?,
        })
    }

    pub fn zero(chart: &Chart) -> Result<Self> {
        Self::new(ScalarField::constant(chart, 0.0))
    }

    pub fn chart(&self) -> &Chart {
        self.u.chart()
    }

    /// `∇u`, the initial velocity of the displacement path.
    pub fn gradient(&self) -> Result<VectorField> {
        let d = Derivs::of(self.chart(), &self.u.samples)?;
        VectorField::new(self.chart(), d.du, d.dv)
    }

    /// `x + t∇u` at the grid nodes.
    pub fn map_at(&self, t: f64) -> Result<GridMap> {
        let d = Derivs::of(self.chart(), &self.u.samples)?;
        let id = GridMap::identity(self.chart());
        Ok(GridMap {
            u: id.u + t * d.du,
            v: id.v + t * d.dv,
        })
    }

    /// `min det(I + t D²u)`; errors when the guard fails at `t`.
    pub fn guard(&self, t: f64) -> Result<f64> {
        let d = Derivs::of(self.chart(), &self.u.samples)?;
        d.guard(t)
    }
}

/// Evaluates each of `fields` at the points `(pu, pv)` by trigonometric
/// interpolation.
pub(crate) fn eval_at(
    chart: &Chart,
    fields: &[&Array2<f64>],
    pu: &Array2<f64>,
    pv: &Array2<f64>,
) -> Vec<Array2<f64>> {
    let g = chart.grid;
    let (nu, nv) = g.shape();
    let rows: Vec<Vec<Vec<f64>>> = (0..nu)
        .into_par_iter()
        .map(|i| {
            (0..nv)
                .map(|j| {
                    let wu = interp::axis_weights(&g.u, pu[[i, j]], InterpKind::Spectral);
                    let wv = interp::axis_weights(&g.v, pv[[i, j]], InterpKind::Spectral);
                    fields.iter().map(|f| interp::apply(f, &wu, &wv)).collect()
                })
                .collect()
        })
        .collect();
    (0..fields.len())
        .map(|k| Array2::from_shape_fn((nu, nv), |(i, j)| rows[i][j][k]))
        .collect()
}

/// `η_* μ`: the density `n` with `n(η(x)) det Dη(x) = m(x)`.
///
/// The map is inverted at every grid node and `m / det Dη` is evaluated at
/// the preimages by trigonometric interpolation; the result is rescaled to
/// unit mass, and a rescaling larger than [`MASS_DRIFT_LIMIT`] is an error.
pub fn pushforward(eta: &GridMap, mu: &Density) -> Result<Density> {
    let c = mu.chart();
    let det = eta.jacobian_det(c);
    let min_det = det.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_det > 0.0) {
        return Err(Error::FoldingMap { min_det });
    }
    let q = &mu.samples / &det;
    let (pu, pv) = eta.preimages(c)?;
    let n = eval_at(c, &[&q], &pu, &pv).remove(0);
    let mass = c.integrate(&n);
    let drift = (mass - 1.0).abs();
    if drift > MASS_DRIFT_LIMIT {
        return Err(Error::MassDrift(drift));
    }
    Density::new(c, n)
}

/// `det(I + D²u) − m(x) / n(x + ∇u(x))` at the grid nodes.
pub fn transport_residual(phi: &TransportPotential, m: &Density, n: &Density) -> Result<ScalarField> {
    let c = phi.chart();
    let d = Derivs::of(c, &phi.u.samples)?;
    d.guard(1.0)?;
    let id = GridMap::identity(c);
    let nn = eval_at(c, &[&n.samples], &(&id.u + &d.du), &(&id.v + &d.dv)).remove(0);
    let r = d.det(1.0) - &m.samples / &nn;
    ScalarField::new(c, r)
}

/// `η_t = x + t∇u` and `ρ_t = (η_t)_* m`, the Wasserstein geodesic from `m`
/// to `(η_1)_* m`.
pub fn displacement_interpolation(
    phi: &TransportPotential,
    m: &Density,
    t: f64,
) -> Result<(GridMap, Density)> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t must lie in [0, 1], got {t}")));
    }
    phi.guard(1.0)?;
    // Eigenvalues of I + tD²u interpolate those at t = 0 and t = 1.
    let g = phi.guard(t)?;
    assert!(g > 0.0);
    let eta = phi.map_at(t)?;
    let rho = pushforward(&eta, m)?;
    Ok((eta, rho))
}
