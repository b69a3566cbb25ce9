//! Grid-sampled scalar and contravariant vector fields on a chart.

use std::fmt::Write as _;
use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, RngExt};

use crate::error::{Error, Result};
use crate::surface::Chart;

fn check_shape(chart: &Chart, a: &Array2<f64>) -> Result<()> {
    let got = a.dim();
    if got != chart.shape() {
        return Err(Error::ShapeMismatch {
            expected: chart.shape(),
            got,
        });
    }
    Ok(())
}

pub(crate) fn assert_same_chart(a: &Chart, b: &Chart) {
    assert!(Arc::ptr_eq(a, b), "fields live on different charts");
}

fn sup(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Real samples on the chart grid.
#[derive(Debug, Clone)]
pub struct ScalarField {
    chart: Chart,
    pub samples: Array2<f64>,
}

impl ScalarField {
    pub fn new(chart: &Chart, samples: Array2<f64>) -> Result<Self> {
        check_shape(chart, &samples)?;
        Ok(Self {
            chart: chart.clone(),
            samples,
        })
    }

    pub(crate) fn wrap(chart: &Chart, samples: Array2<f64>) -> Self {
        debug_assert_eq!(samples.dim(), chart.shape());
        Self {
            chart: chart.clone(),
            samples,
        }
    }

    pub fn from_fn(chart: &Chart, f: impl Fn(f64, f64) -> f64) -> Self {
        let g = chart.grid;
        let samples = Array2::from_shape_fn(g.shape(), |(i, j)| {
            let (u, v) = g.point(i, j);
            f(u, v)
        });
        Self::wrap(chart, samples)
    }

    pub fn constant(chart: &Chart, c: f64) -> Self {
        Self::wrap(chart, Array2::from_elem(chart.shape(), c))
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn sup_norm(&self) -> f64 {
        sup(&self.samples)
    }

    pub fn l2_norm(&self) -> f64 {
        self.chart.integrate(&self.samples.mapv(|x| x * x)).sqrt()
    }

    pub fn integral(&self) -> f64 {
        self.chart.integrate(&self.samples)
    }

    /// Area-weighted mean.
    pub fn mean(&self) -> f64 {
        self.integral() / self.chart.area()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::wrap(&self.chart, &self.samples * c)
    }

    pub fn plus(&self, other: &ScalarField) -> Self {
        assert_same_chart(&self.chart, &other.chart);
        Self::wrap(&self.chart, &self.samples + &other.samples)
    }

    pub fn minus(&self, other: &ScalarField) -> Self {
        assert_same_chart(&self.chart, &other.chart);
        Self::wrap(&self.chart, &self.samples - &other.samples)
    }

    /// One row per grid point: `u,v,value`.
    pub fn to_csv(&self, name: &str) -> String {
        let g = self.chart.grid;
        let mut out = format!("u,v,{name}\n");
        for i in 0..g.nu() {
            for j in 0..g.nv() {
                let (u, v) = g.point(i, j);
                let _ = writeln!(out, "{u:.17e},{v:.17e},{:.17e}", self.samples[[i, j]]);
            }
        }
        out
    }

    /// Inverse of [`ScalarField::to_csv`]; rows must follow grid order.
    pub fn from_csv(chart: &Chart, text: &str) -> Result<Self> {
        let (nu, nv) = chart.shape();
        let mut values = Vec::with_capacity(nu * nv);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('u') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() < 3 {
                return Err(Error::InvalidArgument(format!(
                    "line {}: expected u,v,value",
                    lineno + 1
                )));
            }
            let x: f64 = cols[2].trim().parse().map_err(|e| {
                Error::InvalidArgument(format!("line {}: {e}", lineno + 1))
            })?;
            values.push(x);
        }
        let samples = Array2::from_shape_vec((nu, nv), values.clone()).map_err(|_| {
            Error::ShapeMismatch {
                expected: (nu, nv),
                got: (values.len(), 1),
            }
        })?;
        Self::new(chart, samples)
    }
}

/// Contravariant components `(X^1, X^2)` on the chart grid.
#[derive(Debug, Clone)]
pub struct VectorField {
    chart: Chart,
    pub x1: Array2<f64>,
    pub x2: Array2<f64>,
}

impl VectorField {
    pub fn new(chart: &Chart, x1: Array2<f64>, x2: Array2<f64>) -> Result<Self> {
        check_shape(chart, &x1)?;
        check_shape(chart, &x2)?;
        Ok(Self {
            chart: chart.clone(),
            x1,
            x2,
        })
    }

    pub(crate) fn wrap(chart: &Chart, x1: Array2<f64>, x2: Array2<f64>) -> Self {
        Self {
            chart: chart.clone(),
            x1,
            x2,
        }
    }

    pub fn from_fn(chart: &Chart, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let g = chart.grid;
        let mut x1 = Array2::zeros(g.shape());
        let mut x2 = Array2::zeros(g.shape());
        for i in 0..g.nu() {
            for j in 0..g.nv() {
                let (u, v) = g.point(i, j);
                let (a, b) = f(u, v);
                x1[[i, j]] = a;
                x2[[i, j]] = b;
            }
        }
        Self::wrap(chart, x1, x2)
    }

    pub fn zero(chart: &Chart) -> Self {
        Self::wrap(chart, Array2::zeros(chart.shape()), Array2::zeros(chart.shape()))
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// Pointwise `g(X, Y)`.
    pub fn dot(&self, other: &VectorField) -> ScalarField {
        assert_same_chart(&self.chart, &other.chart);
        let c = &self.chart;
        let s = &c.g11 * &self.x1 * &other.x1
            + &c.g12 * &(&self.x1 * &other.x2 + &self.x2 * &other.x1)
            + &c.g22 * &self.x2 * &other.x2;
        ScalarField::wrap(c, s)
    }

    /// Pointwise `g(X, X)`.
    pub fn norm_sq(&self) -> ScalarField {
        self.dot(self)
    }

    /// Largest pointwise metric length.
    pub fn sup_norm(&self) -> f64 {
        self.norm_sq().samples.iter().fold(0.0f64, |m, x| m.max(x.sqrt()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sq().integral().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::wrap(&self.chart, &self.x1 * c, &self.x2 * c)
    }

    pub fn plus(&self, other: &VectorField) -> Self {
        assert_same_chart(&self.chart, &other.chart);
        Self::wrap(&self.chart, &self.x1 + &other.x1, &self.x2 + &other.x2)
    }

    pub fn minus(&self, other: &VectorField) -> Self {
        assert_same_chart(&self.chart, &other.chart);
        Self::wrap(&self.chart, &self.x1 - &other.x1, &self.x2 - &other.x2)
    }

    /// Largest coordinate-component difference to another field.
    pub fn max_component_diff(&self, other: &VectorField) -> f64 {
        assert_same_chart(&self.chart, &other.chart);
        sup(&(&self.x1 - &other.x1)).max(sup(&(&self.x2 - &other.x2)))
    }

    pub fn to_csv(&self, name: &str) -> String {
        let g = self.chart.grid;
        let mut out = format!("u,v,{name}_1,{name}_2\n");
        for i in 0..g.nu() {
            for j in 0..g.nv() {
                let (u, v) = g.point(i, j);
                let _ = writeln!(
                    out,
                    "{u:.17e},{v:.17e},{:.17e},{:.17e}",
                    self.x1[[i, j]],
                    self.x2[[i, j]]
                );
            }
        }
        out
    }
}

/// Random fields for experiments and property tests.
pub mod random {
    use super::*;
    use std::f64::consts::PI;

    /// Trigonometric polynomial with integer wavenumbers up to `band` in each
    /// periodic direction (no constant term). Bounded directions use
    /// `cos(k π s)` in the normalized coordinate `s ∈ [0, 1]`.
    pub fn trig_scalar<R: Rng>(chart: &Chart, band: usize, rng: &mut R) -> ScalarField {
        let g = chart.grid;
        let mut terms = Vec::new();
        for k in 0..=band as i64 {
            for m in -(band as i64)..=band as i64 {
                if k == 0 && m <= 0 {
                    continue;
                }
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                terms.push((k as f64, m as f64, a, b));
            }
        }
        let lu = g.u.range.length();
        let lv = g.v.range.length();
        let (u0, v0) = (g.u.range.start, g.v.range.start);
        let u_scale = if g.u.periodic { 2.0 * PI / lu } else { PI / lu };
        let norm = 1.0 / (terms.len() as f64).sqrt();
        ScalarField::from_fn(chart, |u, v| {
            let x = u_scale * (u - u0);
            let y = 2.0 * PI * (v - v0) / lv;
            terms
                .iter()
                .map(|&(k, m, a, b)| {
                    if g.u.periodic {
                        a * (k * x + m * y).cos() + b * (k * x + m * y).sin()
                    } else {
                        (k * x).cos() * (a * (m * y).cos() + b * (m * y).sin())
                    }
                })
                .sum::<f64>()
                * norm
        })
    }

    /// Random stream function supported strictly inside a band chart: a
    /// trigonometric polynomial times the cutoff `(4 s (1 - s))^8`, with `s`
    /// the normalized coordinate across the support `[margin, 1 - margin]`.
    pub fn interior_scalar<R: Rng>(
        chart: &Chart,
        band: usize,
        margin: f64,
        rng: &mut R,
    ) -> ScalarField {
        let g = chart.grid;
        let base = trig_scalar_periodic_v(chart, band, rng);
        let (a, b) = (g.u.range.start, g.u.range.end);
        let lo = a + margin * (b - a);
        let hi = b - margin * (b - a);
        ScalarField::from_fn(chart, |u, v| base(u, v) * cutoff((u - lo) / (hi - lo)))
    }

    fn trig_scalar_periodic_v<R: Rng>(
        chart: &Chart,
        band: usize,
        rng: &mut R,
    ) -> impl Fn(f64, f64) -> f64 {
        let g = chart.grid;
        let lu = g.u.range.length();
        let u0 = g.u.range.start;
        let mut terms = Vec::new();
        for k in 0..=band {
            for m in 0..=band {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                let c: f64 = rng.random_range(0.0..2.0 * PI);
                terms.push((k as f64, m as f64, a, b, c));
            }
        }
        move |u: f64, v: f64| {
            let s = (u - u0) / lu;
            terms
                .iter()
                .map(|&(k, m, a, b, c)| (PI * k * s + c).cos() * (a * (m * v).cos() + b * (m * v).sin()))
                .sum()
        }
    }

    /// `(4 s (1 - s))^8` on `[0, 1]`, zero outside. Seven continuous derivatives.
    pub fn cutoff(s: f64) -> f64 {
        if s <= 0.0 || s >= 1.0 {
            0.0
        } else {
            (4.0 * s * (1.0 - s)).powi(8)
        }
    }
}
