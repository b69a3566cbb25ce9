use std::f64::consts::PI;

use mongeflow::asymptotic::{ma_residual, normalized_residual};
use mongeflow::calculus::{self, HessianConvention};
use mongeflow::field::random::trig_scalar;
use mongeflow::geodesic::GridMap;
use mongeflow::transport::{pushforward, Density, TransportPotential};
use mongeflow::{Chart, ScalarField, SurfaceChart};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn torus(n: usize) -> Chart {
    SurfaceChart::flat_torus(2.0 * PI, 2.0 * PI, n, n).unwrap()
}

fn random_psi(chart: &Chart, band: usize, seed: u64) -> ScalarField {
    trig_scalar(chart, band, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn symplectic_gradients_are_divergence_free(seed in any::<u64>(), band in 1usize..5) {
        for c in [torus(32), SurfaceChart::sphere_band(0.6, 2.2, 48, 32).unwrap()] {
            let psi = random_psi(&c, band, seed);
            let x = calculus::symplectic_gradient(&psi);
            let d = calculus::div(&x).sup_norm();
            prop_assert!(d < 1e-9 * x.sup_norm().max(1.0), "{d}");
        }
    }

    #[test]
    fn helmholtz_parts_are_orthogonal_and_sum_to_the_field(seed in any::<u64>()) {
        let c = torus(32);
        let a = random_psi(&c, 4, seed);
        let b = random_psi(&c, 4, seed.wrapping_add(1));
        let x = calculus::grad(&a).plus(&calculus::symplectic_gradient(&b));
        let (p, g) = calculus::helmholtz_decompose(&x).unwrap();
        prop_assert!(p.plus(&g).max_component_diff(&x) < 1e-13);
        prop_assert!(calculus::div(&p).sup_norm() < 1e-10);
        prop_assert!(calculus::l2_inner(&p, &g).abs() < 1e-10 * x.l2_norm().powi(2));
    }

    #[test]
    fn normalized_residual_ignores_scale_and_offset(
        seed in any::<u64>(),
        scale in prop_oneof![-50.0f64..-0.02, 0.02f64..50.0],
        offset in -10.0f64..10.0,
    ) {
        let c = SurfaceChart::sphere_band(0.7, 2.0, 32, 32).unwrap();
        let psi = random_psi(&c, 3, seed);
        let conv = HessianConvention::default();
        let j = normalized_residual(&psi, conv).unwrap();
        let moved = ScalarField::new(&c, psi.samples.mapv(|p| scale * p + offset)).unwrap();
        let k = normalized_residual(&moved, conv).unwrap();
        prop_assert!((j - k).abs() <= 1e-9 * j, "{j} vs {k}");
    }

    #[test]
    fn advection_divergence_is_the_monge_ampere_residual_on_the_torus(seed in any::<u64>()) {
        let c = torus(32);
        let psi = random_psi(&c, 4, seed);
        let x = calculus::symplectic_gradient(&psi);
        let lhs = calculus::div(&calculus::covariant_advection(&x, &x));
        let ma = ma_residual(&psi, HessianConvention::default());
        let gap = lhs.plus(&ma.scaled(2.0)).sup_norm();
        prop_assert!(gap < 1e-10 * lhs.sup_norm().max(1.0), "{gap}");
    }

    #[test]
    fn pushforward_conserves_mass(seed in any::<u64>(), amp in 0.0f64..0.3, su in -3.0f64..3.0, sv in -3.0f64..3.0) {
        let c = torus(32);
        let m = Density::cosine(&c, 0.3, true).unwrap();
        let w = random_psi(&c, 2, seed);
        let g = calculus::grad(&w);
        let s = amp / g.sup_norm().max(1e-12) / 4.0;
        let id = GridMap::identity(&c);
        let eta = GridMap { u: &id.u + su + s * &g.x1, v: &id.v + sv + s * &g.x2 };
        let n = pushforward(&eta, &m).unwrap();
        prop_assert!((n.mass() - 1.0).abs() < 1e-10);
        prop_assert!(n.samples.iter().all(|x| *x > 0.0));
    }

    #[test]
    fn displacement_keeps_convexity(seed in any::<u64>(), t in 0.0f64..=1.0) {
        let c = torus(32);
        let w = random_psi(&c, 3, seed);
        let h = calculus::hessian(&w, HessianConvention::default());
        let top = h.iter().flatten().fold(0.0f64, |m, a| m.max(a.iter().fold(0.0f64, |m, x| m.max(x.abs()))));
        // Scale so that |D²u| < 0.9 and the guard holds at t = 1.
        let phi = TransportPotential::new(w.scaled(0.45 / top)).unwrap();
        prop_assert!(phi.guard(1.0).unwrap() > 0.0);
        let g = phi.guard(t).unwrap();
        prop_assert!(g > 0.0);
    }

    #[test]
    fn preimages_invert_smooth_maps(seed in any::<u64>(), amp in 0.0f64..0.5) {
        let c = torus(32);
        let g = calculus::grad(&random_psi(&c, 2, seed));
        let s = amp / g.sup_norm().max(1e-12) / 4.0;
        let id = GridMap::identity(&c);
        let eta = GridMap { u: &id.u + s * &g.x1, v: &id.v + s * &g.x2 };
        let (pu, pv) = eta.preimages(&c).unwrap();
        let back = GridMap { u: pu, v: pv };
        // η(η⁻¹(y)) = y, checked by interpolating the displacement.
        for ((i, j), &x) in back.u.indexed_iter() {
            let y = back.v[[i, j]];
            let du = mongeflow::interp::eval(&c.grid, &(s * &g.x1), x, y, mongeflow::interp::InterpKind::Spectral);
            let dv = mongeflow::interp::eval(&c.grid, &(s * &g.x2), x, y, mongeflow::interp::InterpKind::Spectral);
            let (gu, gv) = c.grid.point(i, j);
            prop_assert!((x + du - gu).abs() < 1e-11 && (y + dv - gv).abs() < 1e-11);
        }
    }
}
