use ndarray::{Array2, Zip};
use serde::Serialize;

use super::spectral::{Derivs, Ops};
use super::{eval_at, require_torus, Density, TransportPotential};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geodesic::GridMap;
use crate::surface::Chart;

/// Halvings of the Newton step before giving up.
const MAX_HALVINGS: usize = 30;
const KRYLOV_DIM: usize = 60;

/// Result of [`solve_transport`].
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub potential: TransportPotential,
    pub iterations: usize,
    /// Sup-norm residual before the first and after every Newton step.
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonStats {
    pub iterations: usize,
    pub residual_sup: f64,
    pub residual_history: Vec<f64>,
}

impl TransportSolution {
    pub fn residual_sup(&self) -> f64 {
        *self.residual_history.last().expect("history starts with the initial residual")
    }

    pub fn stats(&self) -> NewtonStats {
        NewtonStats {
            iterations: self.iterations,
            residual_sup: self.residual_sup(),
            residual_history: self.residual_history.clone(),
        }
    }
}

/// State at one iterate: derivatives of `u`, and `n`, `∇n` at `x + ∇u`.
struct Iterate {
    u: Array2<f64>,
    d: Derivs,
    n: Array2<f64>,
    nu: Array2<f64>,
    nv: Array2<f64>,
    residual: Array2<f64>,
    sup: f64,
}

struct Problem<'a> {
    chart: &'a Chart,
    ops: Ops,
    id: GridMap,
    m: &'a Array2<f64>,
    n: &'a Array2<f64>,
    grad_n: [Array2<f64>; 2],
}

impl<'a> Problem<'a> {
    fn new(m: &'a Density, n: &'a Density) -> Result<Self> {
        let chart = m.chart();
        let ops = Ops::new(chart)?;
        let dn = ops.derivs(&n.samples);
        Ok(Self {
            chart,
            id: GridMap::identity(chart),
            m: &m.samples,
            n: &n.samples,
            grad_n: [dn.du, dn.dv],
            ops,
        })
    }

    /// `None` when the convexity guard fails at `u`.
    fn iterate(&self, u: Array2<f64>) -> Option<Iterate> {
        let d = self.ops.derivs(&u);
        d.guard(1.0).ok()?;
        let pu = &self.id.u + &d.du;
        let pv = &self.id.v + &d.dv;
        let mut at = eval_at(self.chart, &[self.n, &self.grad_n[0], &self.grad_n[1]], &pu, &pv);
        let nv = at.pop().unwrap();
        let nu = at.pop().unwrap();
        let n = at.pop().unwrap();
        let residual = d.det(1.0) - self.m / &n;
        let sup = residual.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        Some(Iterate {
            u,
            d,
            n,
            nu,
            nv,
            residual,
            sup,
        })
    }

    /// Linearized residual applied to `w = Δ⁻¹z`, projected to zero mean.
    fn apply(&self, it: &Iterate, z: &Array2<f64>) -> Array2<f64> {
        let w = self.ops.derivs(&self.ops.inverse_laplacian(z));
        let d = &it.d;
        let mut out = Array2::from_shape_fn(z.dim(), |ix| {
            // Cofactor of I + D²u contracted with D²w.
            (1.0 + d.dvv[ix]) * w.duu[ix] - 2.0 * d.duv[ix] * w.duv[ix] + (1.0 + d.duu[ix]) * w.dvv[ix]
                + self.m[ix] / (it.n[ix] * it.n[ix]) * (it.nu[ix] * w.du[ix] + it.nv[ix] * w.dv[ix])
        });
        let mean = self.chart.integrate(&out) / self.chart.area();
        out.mapv_inplace(|x| x - mean);
        out
    }
}

/// Damped Newton for `det(I + D²u) = m / n(x + ∇u)` on the flat torus.
///
/// Each step solves the linearized equation by GMRES, right-preconditioned
/// with the inverse Laplacian, then halves the step until the convexity
/// guard holds and the sup-norm residual decreases. Fails with
/// [`Error::NewtonFailed`] when the iteration cap is reached or no damped
/// step is admissible; use [`TransportSolver`] to keep the last iterate.
pub fn solve_transport(m: &Density, n: &Density, tol: f64, max_iters: usize) -> Result<TransportSolution> {
    let mut s = TransportSolver::new(m, n)?;
    while s.residual_sup() > tol {
        if s.iterations() >= max_iters {
            return Err(Error::NewtonFailed {
                iterations: s.iterations(),
                residual: s.residual_sup(),
                reason: "iteration cap reached".into(),
            });
        }
        s.step()?;
    }
    s.finish()
}

/// Step-by-step access to the Newton iteration of [`solve_transport`].
pub struct TransportSolver<'a> {
    problem: Problem<'a>,
    current: Iterate,
    history: Vec<f64>,
}

impl<'a> TransportSolver<'a> {
    pub fn new(m: &'a Density, n: &'a Density) -> Result<Self> {
        require_torus(m.chart())?;
        crate::field::assert_same_chart(m.chart(), n.chart());
        let problem = Problem::new(m, n)?;
        let current = problem
            .iterate(Array2::zeros(m.chart().shape()))
            .expect("u = 0 satisfies the guard");
        let history = vec![current.sup];
        Ok(Self {
            problem,
            current,
            history,
        })
    }

    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }

    pub fn residual_sup(&self) -> f64 {
        self.current.sup
    }

    pub fn potential(&self) -> Result<TransportPotential> {
        TransportPotential::new(ScalarField::new(self.problem.chart, self.current.u.clone())?)
    }

    /// One damped Newton step.
    pub fn step(&mut self) -> Result<()> {
        let p = &self.problem;
        let it = &self.current;
        let rhs = {
            let mut r = -&it.residual;
            let mean = p.chart.integrate(&r) / p.chart.area();
            r.mapv_inplace(|x| x - mean);
            r
        };
        let rel = it.sup.clamp(1e-13, 1e-2);
        let z = gmres(|z| p.apply(it, z), &rhs, rel, KRYLOV_DIM, 4);
        let w = p.ops.inverse_laplacian(&z);
        let mut lambda = 1.0;
        for _ in 0..=MAX_HALVINGS {
            if let Some(next) = p.iterate(&it.u + &(lambda * &w)) {
                if next.sup < it.sup {
                    self.history.push(next.sup);
                    self.current = next;
                    return Ok(());
                }
            }
            lambda *= 0.5;
        }
        Err(Error::NewtonFailed {
            iterations: self.iterations(),
            residual: it.sup,
            reason: format!("no admissible step after {MAX_HALVINGS} halvings"),
        })
    }

    pub fn finish(self) -> Result<TransportSolution> {
        Ok(TransportSolution {
            potential: self.potential()?,
            iterations: self.iterations(),
            residual_history: self.history,
        })
    }
}

fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |s, x, y| s + x * y)
}

/// Restarted GMRES with modified Gram-Schmidt and Givens rotations, from a
/// zero initial guess, to relative residual `rel_tol`.
fn gmres(
    apply: impl Fn(&Array2<f64>) -> Array2<f64>,
    b: &Array2<f64>,
    rel_tol: f64,
    dim: usize,
    restarts: usize,
) -> Array2<f64> {
    let mut x = Array2::zeros(b.dim());
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return x;
    }
    for _ in 0..restarts {
        let r = b - &apply(&x);
        let beta = dot(&r, &r).sqrt();
        if beta <= rel_tol * b_norm {
            break;
        }
        let mut basis = vec![r / beta];
        let mut h = vec![vec![0.0; dim]; dim + 1];
        let (mut cs, mut sn) = (vec![0.0; dim], vec![0.0; dim]);
        let mut g = vec![0.0; dim + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..dim {
            let mut w = apply(&basis[k]);
            for (j, q) in basis.iter().enumerate() {
                h[j][k] = dot(&w, q);
                w.scaled_add(-h[j][k], q);
            }
            let w_norm = dot(&w, &w).sqrt();
            h[k + 1][k] = w_norm;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let rho = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / rho;
            sn[k] = h[k + 1][k] / rho;
            h[k][k] = rho;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= rel_tol * b_norm || w_norm == 0.0 {
                break;
            }
            basis.push(w / w_norm);
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (q, yi) in basis.iter().zip(&y) {
            x.scaled_add(*yi, q);
        }
    }
    x
}
