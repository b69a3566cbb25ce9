//! Two-dimensional FFTs on doubly periodic grids.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::deriv::wave_index;
use crate::error::{Error, Result};
use crate::grid::ParameterGrid;

/// In-place 1D transforms of every lane of `a` along `axis` (unnormalized).
pub(crate) fn fft_lanes(a: &mut Array2<Complex64>, axis: usize, plan: &dyn Fft<f64>) {
    let n = a.len_of(Axis(axis));
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for mut lane in a.lanes_mut(Axis(axis)) {
        for (b, x) in buf.iter_mut().zip(lane.iter()) {
            *b = *x;
        }
        plan.process(&mut buf);
        for (x, b) in lane.iter_mut().zip(&buf) {
            *x = *b;
        }
    }
}

/// Angular wavenumber of slot `m`; the Nyquist slot is zeroed when
/// `odd` (first-derivative symbols).
pub(crate) fn wavenumber(m: usize, n: usize, length: f64, odd: bool) -> f64 {
    if odd && m == n / 2 {
        0.0
    } else {
        2.0 * PI * wave_index(m, n) as f64 / length
    }
}

/// Cached forward/inverse plans and wavenumbers for one periodic grid.
pub struct Fft2 {
    shape: (usize, usize),
    plans: [Arc<dyn Fft<f64>>; 4],
    /// First-derivative wavenumbers (Nyquist zeroed).
    pub ku: Vec<f64>,
    pub kv: Vec<f64>,
    /// Integer wave indices, for masks.
    pub mu: Vec<i64>,
    pub mv: Vec<i64>,
}

impl Fft2 {
    pub fn new(grid: &ParameterGrid) -> Result<Self> {
        if !grid.is_closed() {
            return Err(Error::UnsupportedChart("a doubly periodic grid".into()));
        }
        let (nu, nv) = grid.shape();
        let mut p = FftPlanner::new();
        let lu = grid.u.range.length();
        let lv = grid.v.range.length();
        Ok(Self {
            shape: (nu, nv),
            plans: [
                p.plan_fft_forward(nu),
                p.plan_fft_inverse(nu),
                p.plan_fft_forward(nv),
                p.plan_fft_inverse(nv),
            ],
            ku: (0..nu).map(|m| wavenumber(m, nu, lu, true)).collect(),
            kv: (0..nv).map(|m| wavenumber(m, nv, lv, true)).collect(),
            mu: (0..nu).map(|m| wave_index(m, nu)).collect(),
            mv: (0..nv).map(|m| wave_index(m, nv)).collect(),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn forward(&self, a: &Array2<f64>) -> Array2<Complex64> {
        let mut c = a.mapv(|x| Complex64::new(x, 0.0));
        fft_lanes(&mut c, 0, &*self.plans[0]);
        fft_lanes(&mut c, 1, &*self.plans[2]);
        c
    }

    /// Normalized inverse transform; returns the real part.
    pub fn inverse(&self, a: &Array2<Complex64>) -> Array2<f64> {
        let mut c = a.clone();
        fft_lanes(&mut c, 1, &*self.plans[3]);
        fft_lanes(&mut c, 0, &*self.plans[1]);
        let norm = (self.shape.0 * self.shape.1) as f64;
        c.mapv(|z| z.re / norm)
    }
}
