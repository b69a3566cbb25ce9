//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::f64::consts::PI;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use mongeflow::asymptotic::{
    asymptotic_residuals, kg_identity_residual, ma_residual, maxpoint_diagnostic, nonexistence_search,
    SearchOptions,
};
use mongeflow::calculus::{self, HessianConvention};
use mongeflow::field::random;
use mongeflow::geodesic::{tangency_order, EulerSolver};
use mongeflow::grid::Interval;
use mongeflow::surface::Profile;
use mongeflow::transport::{
    solve_transport, submersion_check, transport_residual, vertical_departure_rate, Density,
};
use mongeflow::{Chart, ScalarField, SurfaceChart, VectorField};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = (bool, String);

fn torus(n: usize) -> Chart {
    SurfaceChart::flat_torus(2.0 * PI, 2.0 * PI, n, n).unwrap()
}

fn sup_diff(a: &ScalarField, f: impl Fn(f64, f64) -> f64) -> f64 {
    a.minus(&ScalarField::from_fn(a.chart(), f)).sup_norm()
}

fn vec_diff(x: &VectorField, f: impl Fn(f64, f64) -> (f64, f64)) -> f64 {
    x.max_component_diff(&VectorField::from_fn(x.chart(), f))
}

fn calculus_exactness() -> Verdict {
    let c = torus(64);
    let f = ScalarField::from_fn(&c, |u, v| (2.0 * u).sin() * (3.0 * v).cos() + 0.5 * (u + 2.0 * v).cos());
    let grad = vec_diff(&calculus::grad(&f), |u, v| {
        (
            2.0 * (2.0 * u).cos() * (3.0 * v).cos() - 0.5 * (u + 2.0 * v).sin(),
            -3.0 * (2.0 * u).sin() * (3.0 * v).sin() - (u + 2.0 * v).sin(),
        )
    });
    let x = VectorField::from_fn(&c, |u, v| ((3.0 * v).sin() + u.cos(), (2.0 * u).cos() - v.sin()));
    let y = VectorField::from_fn(&c, |u, v| ((u + v).cos(), (2.0 * u - v).sin()));
    let div = sup_diff(&calculus::div(&x), |u, v| -u.sin() - v.cos());
    let adv = vec_diff(&calculus::covariant_advection(&x, &y), |u, v| {
        let (x1, x2) = ((3.0 * v).sin() + u.cos(), (2.0 * u).cos() - v.sin());
        (-(x1 + x2) * (u + v).sin(), (2.0 * x1 - x2) * (2.0 * u - v).cos())
    });
    let exact = grad.max(div).max(adv);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let identity = (0..20)
        .map(|_| {
            let psi = random::trig_scalar(&c, 4, &mut rng);
            calculus::divergence_identity_residual(&calculus::symplectic_gradient(&psi)).sup_norm()
        })
        .fold(0.0f64, f64::max);
    (
        exact < 1e-10 && identity < 1e-8,
        format!("grad {grad:.1e}, div {div:.1e}, advection {adv:.1e} (< 1e-10); divergence identity max over 20 fields {identity:.1e} (< 1e-8)"),
    )
}

fn asymptotic_characterization() -> Verdict {
    let c = torus(64);
    let g = |s: f64| s.sin() + 0.2 * (3.0 * s).cos();
    let parallel = [
        VectorField::from_fn(&c, |_, v| (v.sin() + 0.3 * (2.0 * v).cos(), 0.0)),
        VectorField::from_fn(&c, |u, _| (0.0, u.cos())),
        VectorField::from_fn(&c, |u, v| (g(u - v), g(u - v))),
    ];
    let worst = parallel
        .iter()
        .flat_map(|x| asymptotic_residuals(x, 1e-10).entries)
        .map(|e| e.value)
        .fold(0.0f64, f64::max);
    let cell = VectorField::from_fn(&c, |u, v| (v.sin(), u.sin()));
    let r = asymptotic_residuals(&cell, 1e-10);
    let div_adv = r.value("div_adv.sup");
    (
        worst < 1e-10 && !r.passed() && (div_adv - 2.0).abs() < 1e-8,
        format!("plane-parallel worst residual {worst:.1e} (< 1e-10); (sin v, sin u) sup div adv = {div_adv:.12} (2 ± 1e-8)"),
    )
}

fn monge_ampere_equivalence() -> Verdict {
    let c = torus(64);
    let tol = 1e-8;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dirs = [(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (1.0, -1.0), (2.0, 1.0)];
    let (mut agree, mut family_max) = (0, 0.0f64);
    for k in 0..20 {
        let psi = if k % 2 == 0 {
            random::trig_scalar(&c, 4, &mut rng)
        } else {
            let (a, b) = dirs[rng.random_range(0..dirs.len())];
            let w: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            ScalarField::from_fn(&c, |u, v| {
                let s = a * u + b * v;
                (1..=3).map(|m| w[2 * m - 2] * (m as f64 * s).sin() + w[2 * m - 1] * (m as f64 * s).cos()).sum()
            })
        };
        let ma = ma_residual(&psi, HessianConvention::default()).sup_norm();
        if k % 2 == 1 {
            family_max = family_max.max(ma);
        }
        let asym = asymptotic_residuals(&calculus::symplectic_gradient(&psi), tol).passed();
        if asym == (ma <= tol) {
            agree += 1;
        }
    }
    (
        agree == 20 && family_max < 1e-10,
        format!("pass/fail agreement {agree}/20 at tol 1e-8; psi = f(a u + b v) max MA residual {family_max:.1e}"),
    )
}

fn search_floor() -> Verdict {
    let band = SurfaceChart::sphere_band(0.6, 2.2, 48, 48).unwrap();
    let floors: Vec<f64> = (1..=3)
        .map(|seed| {
            let opts = SearchOptions::new(8, 20, seed);
            nonexistence_search(&band, &opts).unwrap().normalized_residual
        })
        .collect();
    let control = nonexistence_search(&torus(48), &SearchOptions::new(8, 20, 1))
        .unwrap()
        .normalized_residual;
    let lo = floors.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = floors.iter().copied().fold(0.0f64, f64::max);
    (
        lo > 0.0 && hi <= 2.0 * lo && control < 1e-8 && lo >= 1e3 * control,
        format!(
            "band floors {} (spread {:.2}, <= 2); torus control {control:.1e} (< 1e-8)",
            floors.iter().map(|f| format!("{f:.3e}")).collect::<Vec<_>>().join(", "),
            hi / lo
        ),
    )
}

fn maxpoint_refinement() -> Verdict {
    let mut worst = f64::INFINITY;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let vals: Vec<f64> = [32usize, 64, 128]
            .iter()
            .map(|&n| {
                let b = SurfaceChart::sphere_band(PI / 6.0, 5.0 * PI / 6.0, n, n).unwrap();
                let psi = random::interior_scalar(&b, 2, 0.1, &mut ChaCha8Rng::seed_from_u64(seed));
                let x = calculus::symplectic_gradient(&psi);
                maxpoint_diagnostic(&x, 1.0).unwrap().value("max_point_identity")
            })
            .collect();
        let orders = [(vals[0] / vals[1]).log2(), (vals[1] / vals[2]).log2()];
        worst = worst.min(orders[0]).min(orders[1]);
        lines.push(format!("{:.1}/{:.1}", orders[0], orders[1]));
    }
    (
        worst >= 3.5,
        format!("observed orders 32->64/64->128: {} (min {worst:.2}, >= 3.5)", lines.join(", ")),
    )
}

fn kg_identity() -> Verdict {
    let annulus = SurfaceChart::revolution(
        &Profile::analytic(|t| t, |_| 1.0, |_| 0.0),
        Interval::new(1.0, 2.0),
        false,
        64,
        128,
    )
    .unwrap();
    let band = SurfaceChart::sphere_band(PI / 6.0, 5.0 * PI / 6.0, 64, 128).unwrap();
    let mut worst = 0.0f64;
    for c in [&annulus, &band] {
        for a in [|_: f64| 1.0, |t: f64| 1.0 + 0.5 * t * t] {
            let x = VectorField::from_fn(c, |t, _| (0.0, a(t)));
            worst = worst.max(kg_identity_residual(&x, 1e-4).unwrap().value("kg_identity.sup"));
        }
    }
    (worst < 1e-4, format!("max kg identity residual {worst:.1e} over annulus and band (< 1e-4)"))
}

fn tangency() -> Verdict {
    let c = torus(32);
    let cell = VectorField::from_fn(&c, |u, v| (v.sin(), u.sin()));
    let f = tangency_order(&cell, 0.1, 9).unwrap();
    let k = f.fitted_exponent.unwrap_or(f64::NAN);
    let gap = f.taylor.as_ref().map_or(f64::NAN, |t| t.relative_gap);
    let shear = VectorField::from_fn(&c, |_, v| (v.sin() + 0.3 * (2.0 * v).cos(), 0.0));
    let s = tangency_order(&shear, 0.5, 7).unwrap();
    let dmax = s.distances.iter().copied().fold(0.0f64, f64::max);
    (
        (k - 2.0).abs() <= 0.15 && gap < 0.05 && s.exact_coincidence && dmax < 1e-9,
        format!("exponent {k:.4} (2 ± 0.15); Taylor gap {:.2}% (< 5%); plane-parallel max distance {dmax:.1e} (< 1e-9)", 100.0 * gap),
    )
}

fn euler_conservation() -> Verdict {
    let c = torus(64);
    let psi = random::trig_scalar(&c, 4, &mut ChaCha8Rng::seed_from_u64(3));
    let x = calculus::symplectic_gradient(&psi);
    let mut s = EulerSolver::new(&x, false).unwrap();
    let (e0, z0) = (s.energy(), s.enstrophy());
    for k in 1..=512 {
        s.advance_to(k as f64 / 512.0, 1.0 / 512.0).unwrap();
    }
    let de = ((s.energy() - e0) / e0).abs();
    let dz = ((s.enstrophy() - z0) / z0).abs();
    (
        de < 1e-6 && dz < 1e-5,
        format!("energy drift {de:.1e} (< 1e-6), enstrophy drift {dz:.1e} (< 1e-5)"),
    )
}

/// `F(y) = (y + ε sin y) / 2π` for the density `(1 + ε cos y) / 2π` on
/// `[0, 2π)`, integrated by composite Simpson and inverted by bisection.
fn cdf_inverse(target: f64, eps: f64) -> f64 {
    let cdf = |y: f64| {
        let n = 2000;
        let h = y / n as f64;
        let f = |s: f64| (1.0 + eps * s.cos()) / (2.0 * PI);
        let mut acc = f(0.0) + f(y);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        acc * h / 3.0
    };
    let (mut lo, mut hi) = (-0.5, 2.0 * PI + 0.5);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn transport() -> Verdict {
    let c = torus(64);
    let m = Density::uniform(&c).unwrap();
    let one = Density::cosine(&c, 0.2, false).unwrap();
    let other = Density::from_fn(&c, |_, v| 1.0 + 0.2 * v.cos()).unwrap();
    let prod = Density::cosine(&c, 0.2, true).unwrap();
    let solve = |n: &Density| solve_transport(&m, n, 1e-10, 30).unwrap();
    let (s1, s2, sp) = (solve(&one), solve(&other), solve(&prod));
    let iters = s1.iterations.max(sp.iterations);
    let residual = [(&s1, &one), (&sp, &prod)]
        .iter()
        .map(|(s, n)| transport_residual(&s.potential, &m, n).unwrap().sup_norm())
        .fold(0.0f64, f64::max);
    let g = s1.potential.gradient().unwrap();
    let oracle = g
        .x1
        .indexed_iter()
        .map(|((i, _), du)| {
            let x = c.grid.u.coord(i);
            (x + du - cdf_inverse(x / (2.0 * PI), 0.2)).abs()
        })
        .fold(0.0f64, f64::max);
    let split = (&sp.potential.u.samples - &s1.potential.u.samples - &s2.potential.u.samples)
        .iter()
        .fold(0.0f64, |a, x| a.max(x.abs()));
    (
        iters <= 12 && residual < 1e-6 && oracle < 1e-8 && split < 1e-6,
        format!("Newton iterations {iters} (<= 12), residual {residual:.1e} (< 1e-6); CDF oracle {oracle:.1e} (< 1e-8); separation {split:.1e} (< 1e-6)"),
    )
}

fn submersion() -> Verdict {
    let c = torus(64);
    let m = Density::uniform(&c).unwrap();
    let n = Density::cosine(&c, 0.2, false).unwrap();
    let phi = solve_transport(&m, &n, 1e-10, 30).unwrap().potential;
    let r = submersion_check(&phi, &m, 5).unwrap();
    let [h, b, p] = ["horizontality.sup", "burgers_coincidence.sup", "projection.sup"].map(|k| r.value(k));
    let shear = vertical_departure_rate(&VectorField::from_fn(&c, |_, v| (v.sin(), 0.0)), 1e-4).unwrap();
    let cell = vertical_departure_rate(&VectorField::from_fn(&c, |u, v| (v.sin(), u.sin())), 1e-4).unwrap();
    let (s1, s2) = (shear.value("first_derivative.l2"), shear.value("second_derivative.l2"));
    let (c1, c2) = (cell.value("first_derivative.l2"), cell.value("second_derivative.l2"));
    (
        h.max(b).max(p) < 1e-6 && s1.max(s2) < 1e-6 && c1 < 1e-6 && c2 > 0.1,
        format!("horizontality {h:.1e}, coincidence {b:.1e}, projection {p:.1e} (< 1e-6); departure shear {s1:.1e}/{s2:.1e} (< 1e-6), cellular {c1:.1e}/{c2:.3} (second > 0.1)"),
    )
}

fn determinism() -> Verdict {
    let exe = env!("CARGO_BIN_EXE_mongeflow");
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let out = tempfile::tempdir().unwrap();
    let runs = [
        ("verify", "shear.toml"),
        ("verify", "cellular.toml"),
        ("verify", "annulus-kg.toml"),
        ("search", "search-band.toml"),
        ("search", "search-torus.toml"),
        ("tangency", "tangency.toml"),
        ("transport", "transport.toml"),
        ("submersion", "submersion.toml"),
        ("surface-info", "sphere-band.toml"),
    ];
    let mut identical = 0;
    for (cmd, cfg) in runs {
        let mut reports = Vec::new();
        for _ in 0..2 {
            let status = Command::new(exe)
                .args([cmd, configs.join(cfg).to_str().unwrap(), "--restarts", "3", "--output-dir"])
                .arg(out.path())
                .output()
                .unwrap();
            let name = fs::read_dir(out.path())
                .unwrap()
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .find(|p| {
                    let s = p.file_name().unwrap().to_string_lossy().into_owned();
                    s.ends_with(&format!("-{cmd}.json")) && s.starts_with(cfg.trim_end_matches(".toml"))
                });
            reports.push((status.status.code(), name.map(|p| fs::read(p).unwrap())));
        }
        if reports[0] == reports[1] && reports[0].1.is_some() {
            identical += 1;
        }
    }
    (
        identical == runs.len(),
        format!("{identical}/{} experiments byte-identical across reruns", runs.len()),
    )
}

type Criterion = fn() -> Verdict;

fn main() {
    let criteria: [(&str, Criterion); 11] = [
        ("calculus exactness", calculus_exactness),
        ("asymptotic characterization", asymptotic_characterization),
        ("Monge-Ampere equivalence", monge_ampere_equivalence),
        ("non-existence search floor", search_floor),
        ("max-point diagnostic refinement", maxpoint_refinement),
        ("geodesic curvature identity", kg_identity),
        ("tangency order", tangency),
        ("Euler conservation", euler_conservation),
        ("transport", transport),
        ("submersion", submersion),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            });
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {detail} [{:.1} s]",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
