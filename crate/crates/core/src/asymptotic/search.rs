//! Multi-start minimization of the scale-free Monge-Ampère functional
//! `J(ψ) = ‖ma_residual(ψ)‖²_{L²} / ‖∇ψ‖⁴_{L²}` over a finite basis.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ma_residual;
use crate::calculus::{self, HessianConvention};
use crate::error::{Error, Result};
use crate::field::{random::cutoff, ScalarField};
use crate::surface::Chart;

/// `J(ψ)` evaluated with the chart's discrete operators.
pub fn normalized_residual(psi: &ScalarField, convention: HessianConvention) -> Result<f64> {
    let n = calculus::grad_norm_sq(psi).integral();
    // Round-off gradients of a constant are not a direction.
    if !(n.sqrt() > 1e-9 * psi.l2_norm()) {
        return Err(Error::DegenerateStart);
    }
    let r = ma_residual(psi, convention);
    Ok(r.l2_norm().powi(2) / (n * n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    /// Modes per direction.
    pub band_limit: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Fraction of the band width excluded at each edge.
    pub margin: f64,
    pub max_iters: usize,
    /// Stop when `|c| |∇J(c)|` falls below this.
    pub grad_tol: f64,
    pub convention: HessianConvention,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            band_limit: 8,
            restarts: 20,
            seed: 1,
            margin: 0.1,
            max_iters: 400,
            grad_tol: 1e-13,
            convention: HessianConvention::Covariant,
        }
    }
}

impl SearchOptions {
    pub fn new(band_limit: usize, restarts: usize, seed: u64) -> Self {
        Self {
            band_limit,
            restarts,
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub index: usize,
    pub initial_value: f64,
    pub final_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the restart produced no usable value.
    pub failure: Option<String>,
    #[serde(skip)]
    pub coefficients: Vec<f64>,
    #[serde(skip)]
    pub history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best_psi: ScalarField,
    pub best_coefficients: Vec<f64>,
    pub normalized_residual: f64,
    pub restarts: usize,
    pub outcomes: Vec<RestartOutcome>,
    /// `J` per iteration of the best restart.
    pub residual_history: Vec<f64>,
}

impl SearchResult {
    pub fn iterations(&self) -> Vec<usize> {
        self.outcomes.iter().map(|o| o.iterations).collect()
    }

    pub fn history_csv(&self) -> String {
        let mut s = String::from("iteration,normalized_residual\n");
        for (k, v) in self.residual_history.iter().enumerate() {
            s.push_str(&format!("{k},{v:.17e}\n"));
        }
        s
    }
}

/// Basis of stream functions with the derivative data `J` needs.
///
/// Bounded directions use `χ(s) cos(kπs)` with the smooth cutoff `χ` across
/// the interior support; periodic directions use `1, cos, sin, cos 2·, ...`.
/// The constant function is excluded on closed charts.
#[allow(clippy::len_without_is_empty)]
pub struct SearchBasis {
    chart: Chart,
    /// Rows: basis functions; columns: flattened grid samples.
    values: Array2<f64>,
    pu: Array2<f64>,
    pv: Array2<f64>,
    h11: Array2<f64>,
    h12: Array2<f64>,
    h22: Array2<f64>,
    w: Array1<f64>,
    gi11: Array1<f64>,
    gi12: Array1<f64>,
    gi22: Array1<f64>,
    gk2: Array1<f64>,
}

fn periodic_modes(count: usize) -> Vec<(f64, bool)> {
    // (wavenumber, is_sine)
    let mut out = vec![(0.0, false)];
    let mut k = 1.0;
    while out.len() < count {
        out.push((k, false));
        if out.len() < count {
            out.push((k, true));
        }
        k += 1.0;
    }
    out.truncate(count);
    out
}

fn periodic_eval((k, sine): (f64, bool), x: f64) -> f64 {
    if sine {
        (k * x).sin()
    } else {
        (k * x).cos()
    }
}

impl SearchBasis {
    pub fn new(chart: &Chart, band_limit: usize, margin: f64, convention: HessianConvention) -> Result<Self> {
        if band_limit == 0 {
            return Err(Error::InvalidArgument("band_limit must be positive".into()));
        }
        if !(0.0..0.5).contains(&margin) {
            return Err(Error::InvalidArgument(format!("margin {margin} outside [0, 0.5)")));
        }
        let g = chart.grid;
        let (u0, lu) = (g.u.range.start, g.u.range.length());
        let (v0, lv) = (g.v.range.start, g.v.range.length());
        let vmodes = periodic_modes(band_limit);
        let mut funcs: Vec<Box<dyn Fn(f64, f64) -> f64>> = Vec::new();
        if g.u.periodic {
            let umodes = periodic_modes(band_limit);
            for &a in &umodes {
                for &b in &vmodes {
                    if a.0 == 0.0 && b.0 == 0.0 {
                        continue;
                    }
                    funcs.push(Box::new(move |u, v| {
                        periodic_eval(a, 2.0 * PI * (u - u0) / lu)
                            * periodic_eval(b, 2.0 * PI * (v - v0) / lv)
                    }));
                }
            }
        } else {
            let lo = u0 + margin * lu;
            let w = lu * (1.0 - 2.0 * margin);
            for k in 0..band_limit {
                for &b in &vmodes {
                    let k = k as f64;
                    funcs.push(Box::new(move |u, v| {
                        let s = (u - lo) / w;
                        cutoff(s) * (k * PI * s).cos() * periodic_eval(b, 2.0 * PI * (v - v0) / lv)
                    }));
                }
            }
        }
        let npts = g.len();
        let p = funcs.len();
        let mut m = [(); 6].map(|_| Array2::<f64>::zeros((p, npts)));
        for (a, f) in funcs.iter().enumerate() {
            let psi = ScalarField::from_fn(chart, f);
            let [pu, pv] = calculus::partials(&psi);
            let h = calculus::hessian(&psi, convention);
            let rows = [&psi.samples, &pu, &pv, &h[0][0], &h[0][1], &h[1][1]];
            for (dst, src) in m.iter_mut().zip(rows) {
                dst.row_mut(a).assign(&Array1::from_iter(src.iter().copied()));
            }
        }
        let [values, pu, pv, h11, h12, h22] = m;
        let flat = |a: &Array2<f64>| Array1::from_iter(a.iter().copied());
        let w = flat(&(chart.weights() * &chart.sqrt_det_g));
        let gk2 = flat(&(0.5 * &chart.det_g * &chart.curvature));
        Ok(Self {
            chart: chart.clone(),
            values,
            pu,
            pv,
            h11,
            h12,
            h22,
            w,
            gi11: flat(&chart.ginv11),
            gi12: flat(&chart.ginv12),
            gi22: flat(&chart.ginv22),
            gk2,
        })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn field(&self, c: &[f64]) -> ScalarField {
        let (nu, nv) = self.chart.shape();
        let s = Array1::from(c.to_vec()).dot(&self.values);
        ScalarField::wrap(&self.chart, s.into_shape_with_order((nu, nv)).expect("grid shape"))
    }

    /// `J(c)` and its gradient in coefficient space.
    pub fn objective(&self, c: &[f64]) -> Result<(f64, Vec<f64>)> {
        let c = Array1::from(c.to_vec());
        let pu = c.dot(&self.pu);
        let pv = c.dot(&self.pv);
        let h11 = c.dot(&self.h11);
        let h12 = c.dot(&self.h12);
        let h22 = c.dot(&self.h22);
        let gu = &self.gi11 * &pu + &self.gi12 * &pv;
        let gv = &self.gi12 * &pu + &self.gi22 * &pv;
        let q = &pu * &gu + &pv * &gv;
        let r = &h11 * &h22 - &h12 * &h12 - &self.gk2 * &q;
        let wr = &self.w * &r;
        let a = wr.dot(&r);
        let n = self.w.dot(&q);
        if !(n > 0.0) {
            return Err(Error::DegenerateStart);
        }
        let j = a / (n * n);
        let da = 2.0
            * (self.h22.dot(&(&wr * &h11)) + self.h11.dot(&(&wr * &h22))
                - 2.0 * self.h12.dot(&(&wr * &h12))
                - 2.0 * self.pu.dot(&(&wr * &self.gk2 * &gu))
                - 2.0 * self.pv.dot(&(&wr * &self.gk2 * &gv)));
        let dn = 2.0 * (self.pu.dot(&(&self.w * &gu)) + self.pv.dot(&(&self.w * &gv)));
        let grad = (da / (n * n) - dn * (2.0 * a / (n * n * n))).to_vec();
        Ok((j, grad))
    }

    /// Quasi-Newton descent from `c0`.
    pub fn descend(&self, c0: &[f64], max_iters: usize, grad_tol: f64) -> Result<RestartOutcome> {
        let p = self.len();
        let mut c = DVector::from_column_slice(c0);
        let (mut j, g) = self.objective(c.as_slice())?;
        let mut g = DVector::from_vec(g);
        let initial_value = j;
        let mut h = DMatrix::<f64>::identity(p, p);
        let mut fresh = true;
        let mut history = vec![j];
        let mut converged = false;
        let mut iterations = 0;
        let mut stalls = 0;
        while iterations < max_iters {
            if j < 1e-28 || g.norm() * c.norm() < grad_tol {
                converged = true;
                break;
            }
            iterations += 1;
            let mut d = -(&h * &g);
            let mut slope = g.dot(&d);
            if !(slope < 0.0) {
                h = DMatrix::identity(p, p);
                fresh = true;
                d = -g.clone();
                slope = g.dot(&d);
            }
            // Armijo backtracking.
            let mut alpha = if fresh { 0.1 * c.norm() / d.norm().max(1e-300) } else { 1.0 };
            let mut accepted = None;
            for _ in 0..60 {
                let trial = &c + alpha * &d;
                if let Ok((jt, gt)) = self.objective(trial.as_slice()) {
                    if jt.is_finite() && jt <= j + 1e-4 * alpha * slope {
                        accepted = Some((trial, jt, DVector::from_vec(gt)));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some((cn, jn, gn)) = accepted else {
                if fresh {
                    // No descent along the gradient: stationary to round-off.
                    converged = true;
                    break;
                }
                h = DMatrix::identity(p, p);
                fresh = true;
                continue;
            };
            let s = &cn - &c;
            let y = &gn - &g;
            let sy = s.dot(&y);
            if sy > 1e-14 * s.norm() * y.norm() {
                if fresh {
                    h *= sy / y.dot(&y);
                }
                let rho = 1.0 / sy;
                let hy = &h * &y;
                let yhy = y.dot(&hy);
                h += (rho * rho * yhy + rho) * &s * s.transpose()
                    - rho * (&hy * s.transpose() + &s * hy.transpose());
                fresh = false;
            }
            if (j - jn) <= 1e-15 * j {
                stalls += 1;
            } else {
                stalls = 0;
            }
            c = cn;
            j = jn;
            g = gn;
            history.push(j);
            if stalls >= 10 {
                converged = true;
                break;
            }
            // J is homogeneous of degree 0; keep |c| near 1.
            let nc = c.norm();
            if !(0.5..=2.0).contains(&nc) {
                c /= nc;
                g *= nc;
                h = DMatrix::identity(p, p);
                fresh = true;
            }
        }
        Ok(RestartOutcome {
            index: 0,
            initial_value,
            final_value: j,
            iterations,
            converged,
            failure: None,
            coefficients: (&c / c.norm()).as_slice().to_vec(),
            history,
        })
    }
}

/// Multi-start search for non-constant stream functions solving the
/// Monge-Ampère equation. On charts with boundary the basis is supported in
/// the interior; a positive floor across restarts is evidence that only
/// constant solutions exist.
pub fn nonexistence_search(chart: &Chart, opts: &SearchOptions) -> Result<SearchResult> {
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be positive".into()));
    }
    let basis = SearchBasis::new(chart, opts.band_limit, opts.margin, opts.convention)?;
    let outcomes: Vec<RestartOutcome> = (0..opts.restarts)
        .into_par_iter()
        .map(|index| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(index as u64);
            let mut c0: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let nrm = c0.iter().map(|x| x * x).sum::<f64>().sqrt();
            c0.iter_mut().for_each(|x| *x /= nrm);
            match basis.descend(&c0, opts.max_iters, opts.grad_tol) {
                Ok(mut o) => {
                    o.index = index;
                    o
                }
                Err(e) => RestartOutcome {
                    index,
                    initial_value: f64::NAN,
                    final_value: f64::NAN,
                    iterations: 0,
                    converged: false,
                    failure: Some(e.to_string()),
                    coefficients: Vec::new(),
                    history: Vec::new(),
                },
            }
        })
        .collect();
    let best = outcomes
        .iter()
        .filter(|o| o.failure.is_none() && o.final_value.is_finite())
        .min_by(|a, b| a.final_value.total_cmp(&b.final_value))
        .ok_or(Error::SearchFailed(opts.restarts))?;
    Ok(SearchResult {
        best_psi: basis.field(&best.coefficients),
        best_coefficients: best.coefficients.clone(),
        normalized_residual: best.final_value,
        restarts: opts.restarts,
        residual_history: best.history.clone(),
        outcomes: outcomes.clone(),
    })
}
