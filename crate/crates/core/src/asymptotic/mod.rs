//! Asymptotic-direction checks for volume-preserving fields.
//!
//! A divergence-free `X` is an asymptotic direction of the volumorphism group
//! at the identity when `div ∇_X X = 0` as well. For `X = J∇ψ` this becomes
//! the Monge-Ampère equation `det ∇²ψ = (g K / 2) |∇ψ|²`; the two residuals are
//! related pointwise by `div ∇_X X = −(2/g) · ma_residual(ψ)`.

mod maxpoint;
mod search;

pub use maxpoint::maxpoint_diagnostic;
pub use search::{nonexistence_search, normalized_residual, RestartOutcome, SearchOptions, SearchResult};

use ndarray::{Array2, Zip};

use crate::calculus::{self, HessianConvention};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::report::{NormKind, ResidualReport};
use crate::surface::{BoundaryCurve, SurfaceChart};

fn sup(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `‖div X‖` and `‖div ∇_X X‖` in sup and L² norms. `X` is asymptotic when
/// all four pass.
pub fn asymptotic_residuals(x: &VectorField, tol: f64) -> ResidualReport {
    let d = calculus::div(x);
    let dd = calculus::div(&calculus::covariant_advection(x, x));
    let mut r = ResidualReport::new();
    r.push("div_x.sup", NormKind::Sup, d.sup_norm(), tol, "sup |div X|")
        .push("div_x.l2", NormKind::L2, d.l2_norm(), tol, "||div X||_L2")
        .push(
            "div_adv.sup",
            NormKind::Sup,
            dd.sup_norm(),
            tol,
            "sup |div nabla_X X|",
        )
        .push(
            "div_adv.l2",
            NormKind::L2,
            dd.l2_norm(),
            tol,
            "||div nabla_X X||_L2",
        );
    r
}

/// Pointwise `det[D²ψ] − (g K / 2) |∇ψ|²`, `g = det(g_ij)`.
pub fn ma_residual(psi: &ScalarField, convention: HessianConvention) -> ScalarField {
    let c = psi.chart();
    let det = calculus::hessian_det(psi, convention);
    let grad2 = calculus::grad_norm_sq(psi);
    let mut r = det.samples;
    Zip::from(&mut r)
        .and(&c.det_g)
        .and(&c.curvature)
        .and(&grad2.samples)
        .for_each(|r, &g, &k, &q| *r -= 0.5 * g * k * q);
    ScalarField::wrap(c, r)
}

/// Both formulations for `X = J∇ψ`, plus the sup of
/// `div ∇_X X + (2/g) ma_residual(ψ)`, which vanishes identically.
pub fn equivalence_check(psi: &ScalarField, tol: f64) -> ResidualReport {
    let c = psi.chart();
    let x = calculus::symplectic_gradient(psi);
    let dd = calculus::div(&calculus::covariant_advection(&x, &x));
    let ma = ma_residual(psi, HessianConvention::Covariant);
    let mut gap = dd.samples.clone();
    Zip::from(&mut gap)
        .and(&ma.samples)
        .and(&c.det_g)
        .for_each(|d, &m, &g| *d += 2.0 * m / g);
    let mut r = ResidualReport::new();
    r.push(
        "div_adv.sup",
        NormKind::Sup,
        dd.sup_norm(),
        tol,
        "sup |div nabla_X X|, X = J grad psi",
    )
    .push(
        "ma.sup",
        NormKind::Sup,
        ma.sup_norm(),
        tol,
        "sup |det Hess psi - (g K / 2) |grad psi|^2|",
    )
    .push(
        "consistency.sup",
        NormKind::Sup,
        sup(&gap),
        tol,
        "sup |div nabla_X X + (2/g) ma_residual|",
    );
    r
}

fn boundary_curves(c: &SurfaceChart) -> Result<&[BoundaryCurve; 2]> {
    c.boundary
        .as_ref()
        .ok_or_else(|| Error::UnsupportedChart("a chart with boundary".into()))
}

fn metric_dot(c: &SurfaceChart, i: usize, j: usize, a: [f64; 2], b: [f64; 2]) -> f64 {
    c.g11[[i, j]] * a[0] * b[0]
        + c.g12[[i, j]] * (a[0] * b[1] + a[1] * b[0])
        + c.g22[[i, j]] * a[1] * b[1]
}

/// Per boundary sample: `(g(X, n), g(∇_X X, n), k_g g(X, X))` with `n` the
/// inward unit normal.
fn boundary_samples(x: &VectorField) -> Result<Vec<[f64; 3]>> {
    let c = x.chart();
    let curves = boundary_curves(c)?;
    let adv = calculus::covariant_advection(x, x);
    let mut out = Vec::new();
    for b in curves {
        let i = b.row;
        for j in 0..c.grid.nv() {
            let n = b.inward_normal(j);
            let xv = [x.x1[[i, j]], x.x2[[i, j]]];
            let av = [adv.x1[[i, j]], adv.x2[[i, j]]];
            out.push([
                metric_dot(c, i, j, xv, n),
                metric_dot(c, i, j, av, n),
                b.kg[j] * metric_dot(c, i, j, xv, xv),
            ]);
        }
    }
    Ok(out)
}

/// Boundary conditions for asymptotic directions on a surface with
/// boundary: `g(X, n) = g(∇_X X, n) = 0`.
pub fn boundary_residuals(x: &VectorField, tol: f64) -> Result<ResidualReport> {
    let s = boundary_samples(x)?;
    let m = |k: usize| s.iter().fold(0.0f64, |m, v| m.max(v[k].abs()));
    let mut r = ResidualReport::new();
    r.push("tangency.sup", NormKind::Sup, m(0), tol, "sup_boundary |g(X, n)|")
        .push(
            "normal_acceleration.sup",
            NormKind::Sup,
            m(1),
            tol,
            "sup_boundary |g(nabla_X X, n)|",
        );
    Ok(r)
}

/// `sup |g(∇_X X, n) − k_g g(X, X)|` over the boundary, for `X` tangent to it.
pub fn kg_identity_residual(x: &VectorField, tol: f64) -> Result<ResidualReport> {
    let s = boundary_samples(x)?;
    let tangency = s.iter().fold(0.0f64, |m, v| m.max(v[0].abs()));
    let scale = x.sup_norm().max(1.0);
    if tangency > tol * scale {
        return Err(Error::Precondition(format!(
            "X is not tangent to the boundary: sup |g(X, n)| = {tangency:.3e}"
        )));
    }
    let res = s.iter().fold(0.0f64, |m, v| m.max((v[1] - v[2]).abs()));
    let kg_term = s.iter().fold(0.0f64, |m, v| m.max(v[2].abs()));
    let mut r = ResidualReport::new();
    r.push(
        "kg_identity.sup",
        NormKind::Sup,
        res,
        tol,
        "sup_boundary |g(nabla_X X, n) - k_g g(X, X)|",
    )
    .note("tangency.sup", tangency)
    .note("kg_term.sup", kg_term);
    Ok(r)
}
