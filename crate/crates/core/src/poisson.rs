//! Inversion of the discrete Laplace-Beltrami operator `div ∘ grad`.
//!
//! The discrete operator is assembled from the same derivative operators
//! used by [`crate::calculus`], so `div(grad(solve(f))) = f` holds to
//! round-off on the solvable subspace. The flat torus is solved by FFT;
//! charts with `u`-dependent metric are Fourier-transformed along the
//! periodic `v` axis and solved mode by mode with dense matrices in `u`.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::spectral::{fft_lanes, wavenumber};
use crate::surface::{Chart, ChartKind};

/// Relative size of `mean(f)` tolerated for a closed-chart Poisson problem.
pub const SOLVABILITY_TOL: f64 = 1e-8;

fn fft_rows(a: &mut Array2<Complex64>, axis: usize, inverse: bool) {
    let n = a.len_of(ndarray::Axis(axis));
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    fft_lanes(a, axis, &*plan);
}

fn k_eff(m: usize, n: usize, length: f64) -> f64 {
    wavenumber(m, n, length, true)
}

/// Solve `Δφ = f` with zero mean on a closed chart.
pub fn solve_closed(chart: &Chart, f: &Array2<f64>) -> Result<Array2<f64>> {
    if !chart.is_closed() {
        return Err(Error::UnsupportedChart("a boundaryless chart".into()));
    }
    let mean = chart.integrate(f) / chart.area();
    let scale = f.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if mean.abs() > SOLVABILITY_TOL * scale {
        return Err(Error::Inconsistent(format!(
            "Poisson right-hand side has nonzero mean {mean:.3e}"
        )));
    }
    let f0 = f.mapv(|x| x - mean);
    let phi = if chart.kind == ChartKind::FlatTorus {
        solve_flat(chart, &f0)
    } else {
        solve_modal(chart, &f0, None)?
    };
    let m = chart.integrate(&phi) / chart.area();
    Ok(phi.mapv(|x| x - m))
}

/// Solve `Δφ = f` on a band with Neumann data `g^{1j} ∂_j φ = flux` on the
/// two boundary rows (`flux` indexed `[edge][j]`, edge 0 = `u` min).
/// Returns the zero-mean least-squares solution.
pub fn solve_neumann(chart: &Chart, f: &Array2<f64>, flux: [&[f64]; 2]) -> Result<Array2<f64>> {
    if chart.is_closed() {
        return Err(Error::UnsupportedChart("a chart with boundary".into()));
    }
    let phi = solve_modal(chart, f, Some(flux))?;
    let m = chart.integrate(&phi) / chart.area();
    Ok(phi.mapv(|x| x - m))
}

fn solve_flat(chart: &Chart, f: &Array2<f64>) -> Array2<f64> {
    let g = chart.grid;
    let (nu, nv) = g.shape();
    let mut a = f.mapv(|x| Complex64::new(x, 0.0));
    fft_rows(&mut a, 0, false);
    fft_rows(&mut a, 1, false);
    let lu = g.u.range.length();
    let lv = g.v.range.length();
    for i in 0..nu {
        let ku = k_eff(i, nu, lu);
        for j in 0..nv {
            let kv = k_eff(j, nv, lv);
            let sym = -(ku * ku + kv * kv);
            a[[i, j]] = if sym.abs() < 1e-300 {
                Complex64::new(0.0, 0.0)
            } else {
                a[[i, j]] / sym
            };
        }
    }
    fft_rows(&mut a, 1, true);
    fft_rows(&mut a, 0, true);
    let norm = (nu * nv) as f64;
    a.mapv(|c| c.re / norm)
}

fn solve_modal(chart: &Chart, f: &Array2<f64>, flux: Option<[&[f64]; 2]>) -> Result<Array2<f64>> {
    let g = chart.grid;
    let (nu, nv) = g.shape();
    let d = chart.diff().u.d1_matrix();
    let sqrt_g: Vec<f64> = (0..nu).map(|i| chart.sqrt_det_g[[i, 0]]).collect();
    let ginv11: Vec<f64> = (0..nu).map(|i| chart.ginv11[[i, 0]]).collect();
    let ginv22: Vec<f64> = (0..nu).map(|i| chart.ginv22[[i, 0]]).collect();
    // L0 = diag(1/√g) D diag(√g g^11) D
    let inner = DMatrix::from_fn(nu, nu, |i, j| sqrt_g[i] * ginv11[i] * d[(i, j)]);
    let l0 = DMatrix::from_fn(nu, nu, |i, _| 1.0 / sqrt_g[i]).component_mul(&(&d * inner));
    let flux_rows = DMatrix::from_fn(2, nu, |r, j| {
        let i = if r == 0 { 0 } else { nu - 1 };
        ginv11[i] * d[(i, j)]
    });

    let mut rhs = f.mapv(|x| Complex64::new(x, 0.0));
    fft_rows(&mut rhs, 1, false);
    let mut bc: Option<[Vec<Complex64>; 2]> = None;
    if let Some(flux) = flux {
        let mut planner = FftPlanner::new();
        let plan = planner.plan_fft_forward(nv);
        let mut out = [Vec::new(), Vec::new()];
        for (e, data) in flux.iter().enumerate() {
            let mut buf: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            plan.process(&mut buf);
            out[e] = buf;
        }
        bc = Some(out);
    }

    let lv = g.v.range.length();
    let mut sol = Array2::<Complex64>::zeros((nu, nv));
    for m in 0..nv {
        let k = k_eff(m, nv, lv);
        let mut l = l0.clone();
        for i in 0..nu {
            l[(i, i)] -= k * k * ginv22[i];
        }
        let mut b_re = DVector::from_fn(nu, |i, _| rhs[[i, m]].re);
        let mut b_im = DVector::from_fn(nu, |i, _| rhs[[i, m]].im);
        if let Some(bc) = &bc {
            for (r, i) in [(0usize, 0usize), (1, nu - 1)] {
                for j in 0..nu {
                    l[(i, j)] = flux_rows[(r, j)];
                }
                b_re[i] = bc[r][m].re;
                b_im[i] = bc[r][m].im;
            }
        }
        let singular = k == 0.0;
        let (x_re, x_im) = if singular {
            let svd = l.svd(true, true);
            let eps = 1e-10 * svd.singular_values.max();
            let s = |b: &DVector<f64>| {
                svd.solve(b, eps)
                    .map_err(|e| Error::Inconsistent(format!("Poisson mode solve: {e}")))
            };
            (s(&b_re)?, s(&b_im)?)
        } else {
            let lu = l.lu();
            let s = |b: &DVector<f64>| {
                lu.solve(b)
                    .ok_or_else(|| Error::Inconsistent(format!("singular Poisson operator for mode {m}")))
            };
            (s(&b_re)?, s(&b_im)?)
        };
        for i in 0..nu {
            sol[[i, m]] = Complex64::new(x_re[i], x_im[i]);
        }
    }
    fft_rows(&mut sol, 1, true);
    Ok(sol.mapv(|c| c.re / nv as f64))
}
