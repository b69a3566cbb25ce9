//! Covariant differential operators on a [`SurfaceChart`](crate::surface::SurfaceChart).
//!
//! Index conventions: `X^i` are contravariant components, `Γ^i_{jk}` the
//! Christoffel symbols, and `(DX)^i_j = ∂_j X^i + Γ^i_{jk} X^k` the covariant
//! differential. Second derivatives are compositions of the first-derivative
//! operators, so mixed partials commute exactly on the grid.

use ndarray::{Array2, Zip};

use crate::error::Result;
use crate::field::{assert_same_chart, ScalarField, VectorField};
use crate::poisson;

/// A 2×2 matrix of grid functions, indexed `[row][col]`.
pub type TensorField = [[Array2<f64>; 2]; 2];

/// Which Hessian enters the Monge-Ampère determinant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianConvention {
    /// `∂_i∂_j ψ − Γ^k_{ij} ∂_k ψ`.
    #[default]
    Covariant,
    /// Raw coordinate second derivatives.
    Coordinate,
}

/// Coordinate partials `(∂_u f, ∂_v f)`.
pub fn partials(f: &ScalarField) -> [Array2<f64>; 2] {
    let d = f.chart().diff();
    [d.du(&f.samples), d.dv(&f.samples)]
}

/// Contravariant gradient `g^{ij} ∂_j f`.
pub fn grad(f: &ScalarField) -> VectorField {
    let c = f.chart();
    let [fu, fv] = partials(f);
    let x1 = &c.ginv11 * &fu + &c.ginv12 * &fv;
    let x2 = &c.ginv12 * &fu + &c.ginv22 * &fv;
    VectorField::wrap(c, x1, x2)
}

/// Riemannian divergence `(1/√g) ∂_i(√g X^i)`.
pub fn div(x: &VectorField) -> ScalarField {
    let c = x.chart();
    let d = c.diff();
    let s = &c.sqrt_det_g;
    let flux = d.du(&(s * &x.x1)) + d.dv(&(s * &x.x2));
    ScalarField::wrap(c, flux / s)
}

/// Laplace-Beltrami operator `div grad f`.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    div(&grad(f))
}

/// Hamiltonian field of `psi` for the area form: `(−∂_v ψ/√g, ∂_u ψ/√g)`.
pub fn symplectic_gradient(psi: &ScalarField) -> VectorField {
    let c = psi.chart();
    let [pu, pv] = partials(psi);
    let s = &c.sqrt_det_g;
    VectorField::wrap(c, -(pv / s), pu / s)
}

/// Directional derivative `X(f) = X^j ∂_j f`.
pub fn directional(x: &VectorField, f: &ScalarField) -> ScalarField {
    assert_same_chart(x.chart(), f.chart());
    let [fu, fv] = partials(f);
    ScalarField::wrap(x.chart(), &x.x1 * &fu + &x.x2 * &fv)
}

/// Covariant differential `(DX)^i_j = ∂_j X^i + Γ^i_{jk} X^k`.
pub fn covariant_differential(x: &VectorField) -> TensorField {
    let c = x.chart();
    let d = c.diff();
    let comps = [&x.x1, &x.x2];
    let mut out: TensorField = Default::default();
    for (i, xi) in comps.iter().enumerate() {
        let partial = [d.du(xi), d.dv(xi)];
        for (j, p) in partial.into_iter().enumerate() {
            let mut a = p;
            for (k, xk) in comps.iter().enumerate() {
                a = a + c.gamma(i, j, k) * *xk;
            }
            out[i][j] = a;
        }
    }
    out
}

/// `(∇_X Y)^i = X^j ∂_j Y^i + Γ^i_{jk} X^j Y^k`.
pub fn covariant_advection(x: &VectorField, y: &VectorField) -> VectorField {
    assert_same_chart(x.chart(), y.chart());
    let dy = covariant_differential(y);
    let xs = [&x.x1, &x.x2];
    let comp = |i: usize| &dy[i][0] * xs[0] + &dy[i][1] * xs[1];
    VectorField::wrap(x.chart(), comp(0), comp(1))
}

pub fn det2(m: &TensorField) -> Array2<f64> {
    &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0]
}

/// `tr(A²) = A^i_j A^j_i`.
pub fn trace_sq(m: &TensorField) -> Array2<f64> {
    &m[0][0] * &m[0][0] + &m[1][1] * &m[1][1] + 2.0 * &m[0][1] * &m[1][0]
}

/// Hessian of `psi` as a (0,2) tensor.
pub fn hessian(psi: &ScalarField, convention: HessianConvention) -> TensorField {
    let c = psi.chart();
    let d = c.diff();
    let [pu, pv] = partials(psi);
    let huu = d.du(&pu);
    let hvv = d.dv(&pv);
    let huv = d.du(&pv);
    let mut h: TensorField = [[huu, huv.clone()], [huv, hvv]];
    if convention == HessianConvention::Covariant {
        for (i, row) in h.iter_mut().enumerate() {
            for (j, hij) in row.iter_mut().enumerate() {
                *hij = &*hij - &(c.gamma(0, i, j) * &pu) - &(c.gamma(1, i, j) * &pv);
            }
        }
    }
    h
}

/// Determinant of the covariant Hessian `∇²ψ`.
pub fn covariant_hessian_det(psi: &ScalarField) -> ScalarField {
    hessian_det(psi, HessianConvention::Covariant)
}

pub fn hessian_det(psi: &ScalarField, convention: HessianConvention) -> ScalarField {
    ScalarField::wrap(psi.chart(), det2(&hessian(psi, convention)))
}

/// `|∇ψ|² = g^{ij} ∂_i ψ ∂_j ψ`.
pub fn grad_norm_sq(psi: &ScalarField) -> ScalarField {
    let c = psi.chart();
    let [pu, pv] = partials(psi);
    let s = &c.ginv11 * &pu * &pu + 2.0 * &c.ginv12 * &pu * &pv + &c.ginv22 * &pv * &pv;
    ScalarField::wrap(c, s)
}

/// Flat L² inner product `∫ g(X, Y) dV`.
pub fn l2_inner(x: &VectorField, y: &VectorField) -> f64 {
    x.dot(y).integral()
}

/// Solve `Δφ = f` with zero mean on a boundaryless chart.
pub fn inverse_laplacian(f: &ScalarField) -> Result<ScalarField> {
    let phi = poisson::solve_closed(f.chart(), &f.samples)?;
    Ok(ScalarField::wrap(f.chart(), phi))
}

/// Split `X = P(X) + X^∇` into divergence-free and gradient parts, with
/// `X^∇ = ∇Δ⁻¹ div X`. On charts with boundary the potential solves the
/// Neumann problem with normal data taken from `X`, so `P(X)` is tangent to
/// the boundary.
pub fn helmholtz_decompose(x: &VectorField) -> Result<(VectorField, VectorField)> {
    let c = x.chart();
    let d = div(x);
    let phi = match &c.boundary {
        None => poisson::solve_closed(c, &d.samples)?,
        Some(curves) => {
            // Flux data: g^{1j} (X^∇)_j = X^1 on the edge rows.
            let rows: Vec<Vec<f64>> = curves
                .iter()
                .map(|b| x.x1.row(b.row).to_vec())
                .collect();
            poisson::solve_neumann(c, &d.samples, [&rows[0], &rows[1]])?
        }
    };
    let gradient_part = grad(&ScalarField::wrap(c, phi));
    let divergence_free = x.minus(&gradient_part);
    Ok((divergence_free, gradient_part))
}

/// Pointwise `div ∇_X X − [K g(X,X) + tr(DX)² + X(div X)]`.
pub fn divergence_identity_residual(x: &VectorField) -> ScalarField {
    let c = x.chart();
    let lhs = div(&covariant_advection(x, x));
    let dx = covariant_differential(x);
    let k_term = &c.curvature * &x.norm_sq().samples;
    let lie = directional(x, &div(x));
    let mut r = lhs.samples;
    Zip::from(&mut r)
        .and(&k_term)
        .and(&trace_sq(&dx))
        .and(&lie.samples)
        .for_each(|r, &k, &t, &l| *r -= k + t + l);
    ScalarField::wrap(c, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{Chart, SurfaceChart};
    use std::f64::consts::PI;

    fn torus(n: usize) -> Chart {
        SurfaceChart::flat_torus(2.0 * PI, 2.0 * PI, n, n).unwrap()
    }

    fn sup_vs(a: &Array2<f64>, chart: &Chart, f: impl Fn(f64, f64) -> f64) -> f64 {
        let exact = ScalarField::from_fn(chart, f);
        (a - &exact.samples).iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn grad_of_constant_vanishes() {
        for c in [torus(16), SurfaceChart::sphere_band(0.5, 2.5, 32, 16).unwrap()] {
            let g = grad(&ScalarField::constant(&c, 3.7));
            assert!(g.x1.iter().chain(g.x2.iter()).all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn grad_on_torus_and_sphere_band() {
        let c = torus(64);
        let g = grad(&ScalarField::from_fn(&c, |u, _| u.sin()));
        assert!(sup_vs(&g.x1, &c, |u, _| u.cos()) < 1e-12);
        assert!(g.x2.iter().all(|x| x.abs() < 1e-12));

        let b = SurfaceChart::sphere_band(PI / 6.0, 5.0 * PI / 6.0, 64, 32).unwrap();
        let g = grad(&ScalarField::from_fn(&b, |t, _| t.cos()));
        assert!(sup_vs(&g.x1, &b, |t, _| -t.sin()) < 1e-6);
        assert!(g.x2.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn div_examples() {
        let c = torus(64);
        let d = div(&VectorField::from_fn(&c, |u, _| (u.sin(), 0.0)));
        assert!(sup_vs(&d.samples, &c, |u, _| u.cos()) < 1e-12);

        let b = SurfaceChart::sphere_band(PI / 6.0, 5.0 * PI / 6.0, 64, 32).unwrap();
        let lap = laplacian(&ScalarField::from_fn(&b, |t, _| t.cos()));
        let err = sup_vs(&lap.samples, &b, |t, _| -2.0 * t.cos());
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn symplectic_gradient_of_plane_parallel_stream() {
        let c = torus(32);
        let x = symplectic_gradient(&ScalarField::from_fn(&c, |u, _| (2.0 * u).sin()));
        assert!(x.x1.iter().all(|a| a.abs() < 1e-12));
        assert!(sup_vs(&x.x2, &c, |u, _| 2.0 * (2.0 * u).cos()) < 1e-11);
        let z = symplectic_gradient(&ScalarField::constant(&c, 1.0));
        assert!(z.sup_norm() < 1e-12);
    }

    #[test]
    fn advection_examples_on_torus() {
        let c = torus(64);
        let x = VectorField::from_fn(&c, |_, v| (v.sin(), 0.0));
        assert!(covariant_advection(&x, &x).sup_norm() < 1e-12);
        let y = VectorField::from_fn(&c, |u, v| (v.sin(), u.sin()));
        let a = covariant_advection(&y, &y);
        assert!(sup_vs(&a.x1, &c, |u, v| u.sin() * v.cos()) < 1e-12);
        assert!(sup_vs(&a.x2, &c, |u, v| v.sin() * u.cos()) < 1e-12);
    }

    #[test]
    fn zonal_advection_on_revolution_chart() {
        // X = (a(t), 0): ∇_X X = (a a', 0) since Γ^1_11 = Γ^2_11 = 0.
        let b = SurfaceChart::sphere_band(0.4, 2.6, 64, 16).unwrap();
        let x = VectorField::from_fn(&b, |t, _| ((2.0 * t).sin(), 0.0));
        let a = covariant_advection(&x, &x);
        let err = sup_vs(&a.x1, &b, |t, _| 2.0 * (2.0 * t).sin() * (2.0 * t).cos());
        assert!(err < 1e-6, "{err}");
        assert!(a.x2.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn hessian_det_examples() {
        let c = torus(64);
        let h = covariant_hessian_det(&ScalarField::from_fn(&c, |u, v| u.sin() * v.sin()));
        let err = sup_vs(&h.samples, &c, |u, v| {
            (u.sin() * v.sin()).powi(2) - (u.cos() * v.cos()).powi(2)
        });
        assert!(err < 1e-12);
        assert!((h.samples[[0, 0]] + 1.0).abs() < 1e-12);
        let pp = covariant_hessian_det(&ScalarField::from_fn(&c, |u, _| (3.0 * u).cos()));
        assert!(pp.sup_norm() < 1e-10);
    }

    #[test]
    fn linear_function_has_vanishing_hessian_on_bounded_axis() {
        // Locally linear: a bounded FD axis differentiates a u + b v exactly.
        let b = SurfaceChart::revolution(
            &crate::surface::Profile::analytic(|_| 1.0, |_| 0.0, |_| 0.0),
            crate::grid::Interval::new(0.0, 3.0),
            false,
            16,
            16,
        )
        .unwrap();
        let h = covariant_hessian_det(&ScalarField::from_fn(&b, |u, _| 0.7 * u - 2.0));
        assert!(h.sup_norm() < 1e-10);
    }

    #[test]
    fn helmholtz_examples() {
        let c = torus(32);
        let g = grad(&ScalarField::from_fn(&c, |u, _| u.cos()));
        let (p, q) = helmholtz_decompose(&g).unwrap();
        assert!(p.sup_norm() < 1e-12);
        assert!(q.max_component_diff(&g) < 1e-12);

        let x = VectorField::from_fn(&c, |u, v| (v.sin(), u.sin()));
        let (p, q) = helmholtz_decompose(&x).unwrap();
        assert!(q.sup_norm() < 1e-12);
        assert!(p.max_component_diff(&x) < 1e-12);

        let g = grad(&ScalarField::from_fn(&c, |u, _| 0.3 * u.cos()));
        let sum = x.plus(&g);
        let (p, q) = helmholtz_decompose(&sum).unwrap();
        assert!(p.max_component_diff(&x) < 1e-8);
        assert!(q.max_component_diff(&g) < 1e-8);
    }

    #[test]
    fn helmholtz_on_sphere_band_leaves_tangent_divergence_free_part() {
        let b = SurfaceChart::sphere_band(0.6, 2.5, 48, 16).unwrap();
        let x = VectorField::from_fn(&b, |t, v| (0.3 * t.cos() + 0.1 * v.sin(), 0.2 * (2.0 * v).cos()));
        let (p, q) = helmholtz_decompose(&x).unwrap();
        let d = div(&p);
        let interior = d
            .samples
            .slice(ndarray::s![2..46, ..])
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(interior < 1e-3, "{interior}");
        let tangency = p.x1.row(0).iter().chain(p.x1.row(47).iter()).fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(tangency < 1e-10);
        assert!(l2_inner(&p, &q).abs() < 1e-3 * x.l2_norm().powi(2));
    }

    #[test]
    fn helmholtz_on_torus_of_revolution() {
        let spec = crate::surface::Profile::analytic(
            |t: f64| 2.0 + t.cos(),
            |t: f64| -t.sin(),
            |t: f64| -t.cos(),
        );
        let c = SurfaceChart::revolution(&spec, crate::grid::Interval::new(0.0, 2.0 * PI), true, 32, 16)
            .unwrap();
        let x = VectorField::from_fn(&c, |t, v| (t.sin() + 0.2 * v.cos(), 0.1 * (t + v).sin()));
        let (p, q) = helmholtz_decompose(&x).unwrap();
        assert!(div(&p).sup_norm() < 1e-9);
        assert!(l2_inner(&p, &q).abs() < 1e-9);
    }

    #[test]
    fn inconsistent_poisson_data_is_rejected() {
        let c = torus(16);
        assert!(matches!(
            inverse_laplacian(&ScalarField::constant(&c, 1.0)),
            Err(crate::Error::Inconsistent(_))
        ));
    }

    #[test]
    fn divergence_identity_examples() {
        let c = torus(64);
        let x = VectorField::from_fn(&c, |u, v| (v.sin(), u.sin()));
        let lhs = div(&covariant_advection(&x, &x));
        assert!(sup_vs(&lhs.samples, &c, |u, v| 2.0 * u.cos() * v.cos()) < 1e-11);
        assert!(divergence_identity_residual(&x).sup_norm() < 1e-10);
        let pp = VectorField::from_fn(&c, |_, v| (v.sin(), 0.0));
        assert!(divergence_identity_residual(&pp).sup_norm() < 1e-12);
    }

    #[test]
    fn divergence_identity_on_sphere_band() {
        let b = SurfaceChart::sphere_band(PI / 6.0, 5.0 * PI / 6.0, 64, 128).unwrap();
        let x = VectorField::from_fn(&b, |t, v| {
            (
                0.3 * t.cos() * v.sin() + 0.2 * (2.0 * v).cos(),
                0.4 * t.sin() + 0.1 * (t).cos() * v.cos(),
            )
        });
        let r = divergence_identity_residual(&x).sup_norm();
        assert!(r < 1e-6, "{r}");
    }

    #[test]
    fn l2_inner_examples() {
        let c = torus(32);
        let e1 = VectorField::from_fn(&c, |_, _| (1.0, 0.0));
        assert!((l2_inner(&e1, &e1) - 4.0 * PI * PI).abs() < 1e-12);
        let s = VectorField::from_fn(&c, |_, v| (v.sin(), 0.0));
        assert!((l2_inner(&s, &s) - 2.0 * PI * PI).abs() < 1e-12);
    }
}
