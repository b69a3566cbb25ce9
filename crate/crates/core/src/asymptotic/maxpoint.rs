use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use ndarray::{Array2, Zip};

use crate::calculus;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::interp::{self, InterpKind};
use crate::report::{NormKind, ResidualReport};

/// Diagnostics at the maximum point `x0` of `f = g(X, X)` for a
/// divergence-free `X`: `|det DX|`, `|tr(DX)²|` and `|div ∇_X X − K f|`.
/// All three vanish at a true maximum, where `DX` is degenerate.
///
/// The grid argmax is refined by Newton's method on `∇f = 0` using
/// interpolated derivatives of `f`; the main entries are evaluated at the
/// refined point and the raw grid-sample values go to `info`.
pub fn maxpoint_diagnostic(x: &VectorField, tol: f64) -> Result<ResidualReport> {
    let c = x.chart();
    let scale = x.sup_norm();
    if scale == 0.0 {
        return Err(Error::Precondition("X vanishes identically".into()));
    }
    let div_sup = calculus::div(x).sup_norm();
    if div_sup > tol * scale.max(1.0) {
        return Err(Error::Precondition(format!(
            "X is not divergence-free: sup |div X| = {div_sup:.3e}"
        )));
    }

    let f = x.norm_sq();
    let d = c.diff();
    let [fu, fv] = calculus::partials(&f);
    let (fuu, fuv, fvv) = (d.du(&fu), d.du(&fv), d.dv(&fv));

    let dx = calculus::covariant_differential(x);
    let det = calculus::det2(&dx);
    let tr2 = calculus::trace_sq(&dx);
    let mut ident = calculus::div(&calculus::covariant_advection(x, x)).samples;
    Zip::from(&mut ident)
        .and(&c.curvature)
        .and(&f.samples)
        .for_each(|r, &k, &q| *r -= k * q);

    let (i0, j0) = argmax(&f.samples);
    let (us, vs) = c.grid.point(i0, j0);
    let kind = InterpKind::Spectral;
    let at = |a: &Array2<f64>, u: f64, v: f64| interp::eval(&c.grid, a, u, v, kind);

    let (hu, hv) = (c.grid.u.spacing(), c.grid.v.spacing());
    let (mut u, mut v) = (us, vs);
    let mut iterations = 0;
    for _ in 0..50 {
        iterations += 1;
        let g = Vector2::new(at(&fu, u, v), at(&fv, u, v));
        let h = Matrix2::new(
            at(&fuu, u, v),
            at(&fuv, u, v),
            at(&fuv, u, v),
            at(&fvv, u, v),
        );
        let step = pseudo_inverse_step(h, g);
        let su = step[0].clamp(-hu, hu);
        let sv = step[1].clamp(-hv, hv);
        u += su;
        v += sv;
        if !c.grid.u.periodic {
            u = u.clamp(c.grid.u.range.start, c.grid.u.range.end);
        }
        if su.abs() < 1e-14 * hu && sv.abs() < 1e-14 * hv {
            break;
        }
    }
    // A Newton iterate that lands on a lower critical point is discarded.
    let f_sample = f.samples[[i0, j0]];
    if !(at(&f.samples, u, v) >= f_sample * (1.0 - 1e-9)) {
        u = us;
        v = vs;
    }

    let mut r = ResidualReport::new();
    r.push(
        "det_dx",
        NormKind::Sup,
        at(&det, u, v).abs(),
        tol,
        "|det DX(x0)|",
    )
    .push(
        "trace_sq_dx",
        NormKind::Sup,
        at(&tr2, u, v).abs(),
        tol,
        "|tr (DX)^2 (x0)|",
    )
    .push(
        "max_point_identity",
        NormKind::Sup,
        at(&ident, u, v).abs(),
        tol,
        "|div nabla_X X(x0) - K(x0) g(X,X)(x0)|",
    )
    .note("u0", u)
    .note("v0", v)
    .note("f_max", at(&f.samples, u, v))
    .note("newton_iterations", iterations as f64)
    .note("sample.u", us)
    .note("sample.v", vs)
    .note("sample.det_dx", det[[i0, j0]].abs())
    .note("sample.trace_sq_dx", tr2[[i0, j0]].abs())
    .note("sample.max_point_identity", ident[[i0, j0]].abs());
    Ok(r)
}

fn argmax(a: &Array2<f64>) -> (usize, usize) {
    let mut best = (0, 0);
    let mut m = f64::NEG_INFINITY;
    for ((i, j), &x) in a.indexed_iter() {
        if x > m {
            m = x;
            best = (i, j);
        }
    }
    best
}

/// `−H⁺ g`, ignoring near-null eigendirections of the symmetric `H`
/// (ridges of maxima, as for plane-parallel fields).
fn pseudo_inverse_step(h: Matrix2<f64>, g: Vector2<f64>) -> Vector2<f64> {
    let e = SymmetricEigen::new(h);
    let lmax = e.eigenvalues.amax();
    let mut step = Vector2::zeros();
    if lmax == 0.0 {
        return step;
    }
    for k in 0..2 {
        let lam = e.eigenvalues[k];
        if lam.abs() > 1e-8 * lmax {
            let q = e.eigenvectors.column(k);
            step -= q * (q.dot(&g) / lam);
        }
    }
    step
}
