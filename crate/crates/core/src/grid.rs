//! Uniform tensor-product parameter grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed interval `[start, end]` in one chart coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }
}

/// Sampling of one coordinate direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub n: usize,
    pub periodic: bool,
    pub range: Interval,
}

impl Axis {
    pub fn new(n: usize, periodic: bool, range: Interval) -> Self {
        Self { n, periodic, range }
    }

    /// Sample spacing. Periodic axes drop the duplicated endpoint.
    pub fn spacing(&self) -> f64 {
        if self.periodic {
            self.range.length() / self.n as f64
        } else {
            self.range.length() / (self.n - 1) as f64
        }
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.range.start + i as f64 * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }

    /// Quadrature weights. Periodic axes use the trapezoid rule (spectrally
    /// accurate); bounded axes use the sixth-order Gregory end correction.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n];
        if !self.periodic {
            let ends = [
                95.0 / 288.0,
                317.0 / 240.0,
                23.0 / 30.0,
                793.0 / 720.0,
                157.0 / 160.0,
            ];
            for (k, c) in ends.iter().enumerate() {
                w[k] = c * h;
                w[self.n - 1 - k] = c * h;
            }
        }
        w
    }
}

/// Uniform grid over the chart's `(u, v)` parameter rectangle.
///
/// Arrays on the grid are shaped `(nu, nv)`, with axis 0 along `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterGrid {
    pub u: Axis,
    pub v: Axis,
}

impl ParameterGrid {
    pub fn new(
        nu: usize,
        nv: usize,
        u_periodic: bool,
        v_periodic: bool,
        u_range: Interval,
        v_range: Interval,
    ) -> Result<Self> {
        for (name, n) in [("nu", nu), ("nv", nv)] {
            if n < 8 {
                return Err(Error::InvalidGrid(format!("{name} = {n} is below the minimum of 8")));
            }
            if n % 2 != 0 {
                return Err(Error::InvalidGrid(format!("{name} = {n} must be even")));
            }
        }
        for (name, r) in [("u", u_range), ("v", v_range)] {
            if !(r.length() > 0.0) || !r.start.is_finite() || !r.end.is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "{name} range [{}, {}] is empty",
                    r.start, r.end
                )));
            }
        }
        Ok(Self {
            u: Axis::new(nu, u_periodic, u_range),
            v: Axis::new(nv, v_periodic, v_range),
        })
    }

    pub fn nu(&self) -> usize {
        self.u.n
    }

    pub fn nv(&self) -> usize {
        self.v.n
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.u.n, self.v.n)
    }

    pub fn len(&self) -> usize {
        self.u.n * self.v.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_closed(&self) -> bool {
        self.u.periodic && self.v.periodic
    }

    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        (self.u.coord(i), self.v.coord(j))
    }
}
