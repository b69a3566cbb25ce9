use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;

use super::{check_div_free, DiffeoPath, GridMap};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::interp::{self, InterpKind};
use crate::report::FLAT_TOLERANCE;
use crate::spectral::Fft2;
use crate::surface::{Chart, ChartKind};

/// Nodes per axis for particle velocity interpolation.
const PARTICLE_STENCIL: usize = 8;
/// Courant factor for the default step.
pub const DEFAULT_CFL: f64 = 0.5;

/// Pseudo-spectral vorticity/stream-function solver for incompressible
/// Euler on the flat torus, `∂_t ω + X·∇ω = 0`, `X = X̄ + (−∂_v ψ, ∂_u ψ)`,
/// `Δψ = ω`, with 2/3-rule dealiasing and classical RK4. The mean flow `X̄`
/// is conserved. Optionally carries the particles that started at the grid
/// nodes.
pub struct EulerSolver {
    chart: Chart,
    fft: Fft2,
    omega: Array2<Complex64>,
    mean: [f64; 2],
    mask: Array2<f64>,
    /// `1/Δ` symbol with the zero mode removed.
    inv_lap: Array2<f64>,
    particles: Option<(Array2<f64>, Array2<f64>)>,
    time: f64,
    pub cfl: f64,
}

struct Fields {
    x1: Array2<f64>,
    x2: Array2<f64>,
}

impl EulerSolver {
    pub fn new(x0: &VectorField, track_particles: bool) -> Result<Self> {
        let c = x0.chart();
        if c.kind != ChartKind::FlatTorus {
            return Err(Error::UnsupportedChart("the flat torus for Euler integration".into()));
        }
        check_div_free(x0, FLAT_TOLERANCE)?;
        let fft = Fft2::new(&c.grid)?;
        let (nu, nv) = c.shape();
        let mask = Array2::from_shape_fn((nu, nv), |(i, j)| {
            let keep = 3 * fft.mu[i].unsigned_abs() as usize <= nu
                && 3 * fft.mv[j].unsigned_abs() as usize <= nv
                && 2 * fft.mu[i].unsigned_abs() as usize != nu
                && 2 * fft.mv[j].unsigned_abs() as usize != nv;
            if keep {
                1.0
            } else {
                0.0
            }
        });
        let inv_lap = Array2::from_shape_fn((nu, nv), |(i, j)| {
            let k2 = fft.ku[i].powi(2) + fft.kv[j].powi(2);
            if k2 == 0.0 {
                0.0
            } else {
                -1.0 / k2
            }
        });
        let a1 = fft.forward(&x0.x1);
        let a2 = fft.forward(&x0.x2);
        let mut omega = Array2::zeros((nu, nv));
        Zip::indexed(&mut omega).for_each(|(i, j), w| {
            let ik_u = Complex64::new(0.0, fft.ku[i]);
            let ik_v = Complex64::new(0.0, fft.kv[j]);
            *w = (ik_u * a2[[i, j]] - ik_v * a1[[i, j]]) * mask[[i, j]];
        });
        let n = (nu * nv) as f64;
        let mean = [a1[[0, 0]].re / n, a2[[0, 0]].re / n];
        let particles = track_particles.then(|| {
            let id = GridMap::identity(c);
            (id.u, id.v)
        });
        Ok(Self {
            chart: c.clone(),
            fft,
            omega,
            mean,
            mask,
            inv_lap,
            particles,
            time: 0.0,
            cfl: DEFAULT_CFL,
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    fn fields(&self, omega: &Array2<Complex64>) -> Fields {
        let mut d1 = omega.clone();
        let mut d2 = omega.clone();
        Zip::indexed(&mut d1).and(&mut d2).for_each(|(i, j), a, b| {
            let psi = *a * self.inv_lap[[i, j]];
            *a = -Complex64::new(0.0, self.fft.kv[j]) * psi;
            *b = Complex64::new(0.0, self.fft.ku[i]) * psi;
        });
        Fields {
            x1: self.fft.inverse(&d1) + self.mean[0],
            x2: self.fft.inverse(&d2) + self.mean[1],
        }
    }

    fn omega_rhs(&self, omega: &Array2<Complex64>, f: &Fields) -> Array2<Complex64> {
        let mut gu = omega.clone();
        let mut gv = omega.clone();
        Zip::indexed(&mut gu).and(&mut gv).for_each(|(i, j), a, b| {
            *a *= Complex64::new(0.0, self.fft.ku[i]);
            *b *= Complex64::new(0.0, self.fft.kv[j]);
        });
        let adv = &f.x1 * &self.fft.inverse(&gu) + &f.x2 * &self.fft.inverse(&gv);
        let mut out = self.fft.forward(&adv);
        Zip::from(&mut out).and(&self.mask).for_each(|o, &m| *o *= -m);
        out
    }

    fn particle_velocity(&self, f: &Fields, pu: &Array2<f64>, pv: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let g = &self.chart.grid;
        let kind = InterpKind::Local(PARTICLE_STENCIL);
        let mut a = Array2::zeros(pu.dim());
        let mut b = Array2::zeros(pu.dim());
        Zip::from(&mut a)
            .and(&mut b)
            .and(pu)
            .and(pv)
            .for_each(|a, b, &u, &v| {
                let wu = interp::axis_weights(&g.u, u, kind);
                let wv = interp::axis_weights(&g.v, v, kind);
                *a = interp::apply(&f.x1, &wu, &wv);
                *b = interp::apply(&f.x2, &wu, &wv);
            });
        (a, b)
    }

    /// One RK4 step of size `dt`.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        type Particles = Option<(Array2<f64>, Array2<f64>)>;
        let eval = |w: &Array2<Complex64>, p: &Particles| {
            let f = self.fields(w);
            let dw = self.omega_rhs(w, &f);
            let dp = p.as_ref().map(|(u, v)| self.particle_velocity(&f, u, v));
            (dw, dp)
        };
        let shift = |w: &Array2<Complex64>, p: &Particles, k: &(Array2<Complex64>, Particles), h: f64| {
            let w2 = w + &k.0.mapv(|z| z * h);
            let p2 = p.as_ref().map(|(u, v)| {
                let (du, dv) = k.1.as_ref().unwrap();
                (u + &(du * h), v + &(dv * h))
            });
            (w2, p2)
        };
        let w0 = self.omega.clone();
        let p0 = self.particles.clone();
        let k1 = eval(&w0, &p0);
        let s = shift(&w0, &p0, &k1, 0.5 * dt);
        let k2 = eval(&s.0, &s.1);
        let s = shift(&w0, &p0, &k2, 0.5 * dt);
        let k3 = eval(&s.0, &s.1);
        let s = shift(&w0, &p0, &k3, dt);
        let k4 = eval(&s.0, &s.1);
        let h = dt / 6.0;
        let mut w = w0;
        Zip::from(&mut w)
            .and(&k1.0)
            .and(&k2.0)
            .and(&k3.0)
            .and(&k4.0)
            .for_each(|w, a, b, c, d| *w += (a + b * 2.0 + c * 2.0 + d) * h);
        if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Unstable(format!("non-finite vorticity at t = {}", self.time + dt)));
        }
        self.omega = w;
        if let Some((mut u, mut v)) = p0 {
            let ks = [&k1.1, &k2.1, &k3.1, &k4.1].map(|k| k.as_ref().unwrap());
            let wts = [1.0, 2.0, 2.0, 1.0];
            for (k, c) in ks.iter().zip(wts) {
                u += &(&k.0 * (c * h));
                v += &(&k.1 * (c * h));
            }
            self.particles = Some((u, v));
        }
        self.time += dt;
        Ok(())
    }

    /// Largest step allowed by the Courant factor.
    pub fn cfl_step(&self) -> f64 {
        let f = self.fields(&self.omega);
        let g = &self.chart.grid;
        let (hu, hv) = (g.u.spacing(), g.v.spacing());
        let rate = f
            .x1
            .iter()
            .zip(f.x2.iter())
            .fold(0.0f64, |m, (a, b)| m.max(a.abs() / hu + b.abs() / hv));
        if rate == 0.0 {
            f64::INFINITY
        } else {
            self.cfl / rate
        }
    }

    /// Integrate to `t` with equal steps no larger than `max_dt` or the
    /// Courant limit.
    pub fn advance_to(&mut self, t: f64, max_dt: f64) -> Result<()> {
        let span = t - self.time;
        if span < 0.0 {
            return Err(Error::InvalidArgument(format!("cannot integrate backwards to {t}")));
        }
        if span == 0.0 {
            return Ok(());
        }
        let dt = max_dt.min(self.cfl_step());
        let n = (span / dt).ceil();
        if !(n.is_finite() && n < 1e7) {
            return Err(Error::Unstable(format!(
                "Courant limit forces {n} steps to reach t = {t}"
            )));
        }
        let n = (n as usize).max(1);
        let h = span / n as f64;
        for _ in 0..n {
            self.step(h)?;
        }
        self.time = t;
        Ok(())
    }

    pub fn velocity(&self) -> VectorField {
        let f = self.fields(&self.omega);
        VectorField::wrap(&self.chart, f.x1, f.x2)
    }

    pub fn vorticity(&self) -> Array2<f64> {
        self.fft.inverse(&self.omega)
    }

    /// `½ ∫ |X|² dV`.
    pub fn energy(&self) -> f64 {
        0.5 * self.velocity().norm_sq().integral()
    }

    /// `½ ∫ ω² dV`.
    pub fn enstrophy(&self) -> f64 {
        0.5 * self.chart.integrate(&self.vorticity().mapv(|w| w * w))
    }

    pub fn map(&self) -> Option<GridMap> {
        self.particles.as_ref().map(|(u, v)| GridMap {
            u: u.clone(),
            v: v.clone(),
        })
    }

    /// Velocity at the tracked particles.
    pub fn material_velocity(&self) -> Option<VectorField> {
        self.particles.as_ref().map(|(u, v)| {
            let f = self.fields(&self.omega);
            let (a, b) = self.particle_velocity(&f, u, v);
            VectorField::wrap(&self.chart, a, b)
        })
    }
}

/// Euler geodesic of the volumorphism group from `X0`, sampled at
/// `steps + 1` equally spaced times (integration substeps respect the
/// Courant limit).
pub fn euler_flow(x0: &VectorField, t_final: f64, steps: usize) -> Result<DiffeoPath> {
    if steps == 0 || !(t_final >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need steps > 0 and t_final >= 0, got {steps}, {t_final}"
        )));
    }
    let mut s = EulerSolver::new(x0, true)?;
    let mut path = DiffeoPath::new(x0.chart());
    let record = |s: &EulerSolver, path: &mut DiffeoPath| {
        path.push(
            s.time(),
            s.map().expect("particles tracked"),
            s.material_velocity().expect("particles tracked"),
            Some(s.velocity()),
        );
    };
    record(&s, &mut path);
    let dt = t_final / steps as f64;
    for k in 1..=steps {
        s.advance_to(dt * k as f64, dt)?;
        record(&s, &mut path);
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus;
    use crate::field::random;
    use crate::surface::SurfaceChart;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn torus(n: usize) -> Chart {
        SurfaceChart::flat_torus(2.0 * PI, 2.0 * PI, n, n).unwrap()
    }

    #[test]
    fn shear_flow_is_steady() {
        let c = torus(32);
        let x = VectorField::from_fn(&c, |_, v| (v.sin(), 0.0));
        let p = euler_flow(&x, 1.0, 16).unwrap();
        for k in 0..p.len() {
            assert!(p.spatial_velocity(k).unwrap().max_component_diff(&x) < 1e-12);
        }
        // Particles move on straight lines.
        let b = super::super::burgers_flow(&x, 1.0, 16).unwrap();
        assert!(p.last_map().l2_distance(b.last_map(), &c) < 1e-12);
    }

    #[test]
    fn zero_field_gives_identity_path() {
        let c = torus(16);
        let p = euler_flow(&VectorField::zero(&c), 1.0, 4).unwrap();
        for m in &p.maps {
            assert_eq!(m, &GridMap::identity(&c));
        }
    }

    #[test]
    fn mean_flow_is_carried() {
        let c = torus(16);
        let x = VectorField::from_fn(&c, |_, _| (0.5, -0.25));
        let p = euler_flow(&x, 2.0, 4).unwrap();
        let (du, dv) = p.last_map().displacement(&c);
        assert!(du.iter().all(|d| (d - 1.0).abs() < 1e-13));
        assert!(dv.iter().all(|d| (d + 0.5).abs() < 1e-13));
    }

    #[test]
    fn cellular_flow_is_a_steady_euler_flow() {
        // ω = −ψ makes the Jacobian term vanish.
        let c = torus(32);
        let x = VectorField::from_fn(&c, |u, v| (v.sin(), u.sin()));
        let p = euler_flow(&x, 1.0, 64).unwrap();
        assert!(p.spatial_velocity(64).unwrap().max_component_diff(&x) < 1e-12);
        // Particles stay on level sets of the stream function cos v − cos u.
        let m = p.last_map();
        for ((i, j), eu) in m.u.indexed_iter() {
            let (u, v) = c.grid.point(i, j);
            let ev = m.v[[i, j]];
            let drift = ((ev.cos() - eu.cos()) - (v.cos() - u.cos())).abs();
            assert!(drift < 1e-7, "{drift}");
        }
    }

    #[test]
    fn energy_and_enstrophy_are_conserved() {
        let c = torus(64);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = random::trig_scalar(&c, 4, &mut rng);
        let x = calculus::symplectic_gradient(&psi);
        let mut s = EulerSolver::new(&x, false).unwrap();
        let (e0, z0) = (s.energy(), s.enstrophy());
        for k in 1..=512 {
            s.advance_to(k as f64 / 512.0, 1.0 / 512.0).unwrap();
        }
        assert!(s.velocity().max_component_diff(&x) > 1e-3, "flow should evolve");
        assert!(((s.energy() - e0) / e0).abs() < 1e-6);
        assert!(((s.enstrophy() - z0) / z0).abs() < 1e-5);
    }

    #[test]
    fn rejects_compressible_fields_and_curved_charts() {
        let c = torus(16);
        let x = VectorField::from_fn(&c, |u, _| (u.sin(), 0.0));
        assert!(matches!(euler_flow(&x, 1.0, 2), Err(Error::Precondition(_))));
        let b = SurfaceChart::sphere_band(1.0, 2.0, 16, 16).unwrap();
        assert!(matches!(
            euler_flow(&VectorField::zero(&b), 1.0, 2),
            Err(Error::UnsupportedChart(_))
        ));
    }
}
