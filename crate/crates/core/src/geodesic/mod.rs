//! Geodesics of the flat L² metric on all diffeomorphisms (dispersionless
//! Burgers: every particle follows a geodesic of the surface) and of the
//! volumorphism subgroup (incompressible Euler), plus the second
//! fundamental form of the subgroup and the tangency order of the two.

mod euler;
mod map;
mod tangency;

pub use euler::{euler_flow, EulerSolver};
pub use map::GridMap;
pub use tangency::{tangency_order, TangencyFit, TaylorCheck};

use ndarray::Array2;
use serde::Serialize;

use crate::calculus;
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::interp::{self, InterpKind};
use crate::poisson;
use crate::surface::{Chart, ChartKind};

/// A sampled curve `t ↦ η_t` of maps, with particle velocities.
///
/// `material[k]` holds `η̇_t(x)` at the particle that started at grid node
/// `x` (components in the chart basis at `η_t(x)`). The spatial field
/// `X_t = η̇_t ∘ η_t⁻¹` is available through [`DiffeoPath::spatial_velocity`].
#[derive(Debug, Clone)]
pub struct DiffeoPath {
    pub chart: Chart,
    pub times: Vec<f64>,
    pub maps: Vec<GridMap>,
    pub material: Vec<VectorField>,
    spatial: Vec<Option<VectorField>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathSummary {
    pub times: Vec<f64>,
    pub min_jacobian: Vec<f64>,
    pub max_displacement: Vec<f64>,
}

impl DiffeoPath {
    pub(crate) fn new(chart: &Chart) -> Self {
        Self {
            chart: chart.clone(),
            times: Vec::new(),
            maps: Vec::new(),
            material: Vec::new(),
            spatial: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, t: f64, map: GridMap, material: VectorField, spatial: Option<VectorField>) {
        self.times.push(t);
        self.maps.push(map);
        self.material.push(material);
        self.spatial.push(spatial);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_map(&self) -> &GridMap {
        self.maps.last().expect("paths start with the identity")
    }

    /// Eulerian velocity at sample `k`. Computed by inverting `η_t` when the
    /// integrator did not produce it directly; needs a closed chart.
    pub fn spatial_velocity(&self, k: usize) -> Result<VectorField> {
        if let Some(x) = &self.spatial[k] {
            return Ok(x.clone());
        }
        let c = &self.chart;
        let (pu, pv) = self.maps[k].preimages(c)?;
        let m = &self.material[k];
        let kind = InterpKind::Spectral;
        let mut x1 = Array2::zeros(c.shape());
        let mut x2 = Array2::zeros(c.shape());
        for ((i, j), p) in pu.indexed_iter() {
            let q = pv[[i, j]];
            x1[[i, j]] = interp::eval(&c.grid, &m.x1, *p, q, kind);
            x2[[i, j]] = interp::eval(&c.grid, &m.x2, *p, q, kind);
        }
        VectorField::new(c, x1, x2)
    }

    pub fn summary(&self) -> PathSummary {
        PathSummary {
            times: self.times.clone(),
            min_jacobian: self
                .maps
                .iter()
                .map(|m| m.jacobian_det(&self.chart).iter().fold(f64::INFINITY, |a, &b| a.min(b)))
                .collect(),
            max_displacement: self
                .maps
                .iter()
                .map(|m| {
                    let (du, dv) = m.displacement(&self.chart);
                    du.iter()
                        .zip(dv.iter())
                        .fold(0.0f64, |a, (x, y)| a.max(x.hypot(*y)))
                })
                .collect(),
        }
    }

    /// CSV snapshot at sample `k`: `u,v,eta_u,eta_v,xdot_u,xdot_v`.
    pub fn snapshot_csv(&self, k: usize) -> String {
        let c = &self.chart;
        let mut s = String::from("u,v,eta_u,eta_v,xdot_u,xdot_v\n");
        let m = &self.maps[k];
        let x = &self.material[k];
        for ((i, j), eu) in m.u.indexed_iter() {
            let (u, v) = c.grid.point(i, j);
            s.push_str(&format!(
                "{u:.17e},{v:.17e},{eu:.17e},{:.17e},{:.17e},{:.17e}\n",
                m.v[[i, j]],
                x.x1[[i, j]],
                x.x2[[i, j]]
            ));
        }
        s
    }
}

pub(crate) fn check_div_free(x: &VectorField, tol: f64) -> Result<()> {
    let d = calculus::div(x).sup_norm();
    if d > tol * x.sup_norm().max(1.0) {
        return Err(Error::Precondition(format!(
            "field is not divergence-free: sup |div X| = {d:.3e}"
        )));
    }
    Ok(())
}

/// Geodesics of the flat L² metric: `∂_t X + ∇_X X = 0`, every particle on a
/// geodesic of the chart. Closed form `x + t X0` on the flat torus,
/// RK4 on the geodesic equation elsewhere. Aborts with
/// [`Error::Caustic`] when trajectories cross.
pub fn burgers_flow(x0: &VectorField, t_final: f64, steps: usize) -> Result<DiffeoPath> {
    if steps == 0 || !(t_final >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need steps > 0 and t_final >= 0, got {steps}, {t_final}"
        )));
    }
    let c = x0.chart();
    if c.kind == ChartKind::FlatTorus {
        let tc = flat_caustic_time(x0);
        if t_final >= tc {
            return Err(Error::Caustic { time: tc });
        }
        let id = GridMap::identity(c);
        let mut path = DiffeoPath::new(c);
        for k in 0..=steps {
            let t = t_final * k as f64 / steps as f64;
            let map = GridMap {
                u: &id.u + &(t * &x0.x1),
                v: &id.v + &(t * &x0.x2),
            };
            path.push(t, map, x0.clone(), None);
        }
        return Ok(path);
    }
    geodesic_ode_flow(x0, t_final, steps)
}

/// First time `det(I + t DX0)` vanishes at a grid sample.
fn flat_caustic_time(x0: &VectorField) -> f64 {
    let [a, b] = calculus::partials(&ScalarField::wrap(x0.chart(), x0.x1.clone()));
    let [cc, d] = calculus::partials(&ScalarField::wrap(x0.chart(), x0.x2.clone()));
    let mut tmin = f64::INFINITY;
    for i in 0..a.len() {
        let (a, b, cc, d) = (a.as_slice().unwrap()[i], b.as_slice().unwrap()[i], cc.as_slice().unwrap()[i], d.as_slice().unwrap()[i]);
        // det(I + tA) = 1 + t tr A + t² det A
        let tr = a + d;
        let det = a * d - b * cc;
        let root = smallest_positive_root(det, tr, 1.0);
        tmin = tmin.min(root);
    }
    tmin
}

fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    let scale = b.abs().max(c.abs());
    if a.abs() <= 1e-14 * scale {
        return if b < 0.0 { -c / b } else { f64::INFINITY };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    [q / a, c / q]
        .into_iter()
        .filter(|r| *r > 0.0)
        .fold(f64::INFINITY, f64::min)
}

fn geodesic_ode_flow(x0: &VectorField, t_final: f64, steps: usize) -> Result<DiffeoPath> {
    let c = x0.chart();
    let id = GridMap::identity(c);
    let n = c.grid.len();
    let mut st: Vec<[f64; 4]> = (0..n)
        .map(|k| {
            let i = k / c.grid.nv();
            let j = k % c.grid.nv();
            [id.u[[i, j]], id.v[[i, j]], x0.x1[[i, j]], x0.x2[[i, j]]]
        })
        .collect();
    let rhs = |s: &[f64; 4]| {
        let (g122, g212) = c.christoffel_at(s[0]);
        [s[2], s[3], -g122 * s[3] * s[3], -2.0 * g212 * s[2] * s[3]]
    };
    let dt = t_final / steps as f64;
    let mut path = DiffeoPath::new(c);
    path.push(0.0, id, x0.clone(), Some(x0.clone()));
    let mut prev_min = 1.0;
    let range = c.grid.u.range;
    for k in 1..=steps {
        for s in st.iter_mut() {
            let add = |a: &[f64; 4], b: &[f64; 4], h: f64| {
                [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2], a[3] + h * b[3]]
            };
            let k1 = rhs(s);
            let k2 = rhs(&add(s, &k1, 0.5 * dt));
            let k3 = rhs(&add(s, &k2, 0.5 * dt));
            let k4 = rhs(&add(s, &k3, dt));
            for q in 0..4 {
                s[q] += dt / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
            }
        }
        let t = dt * k as f64;
        if !c.grid.u.periodic && st.iter().any(|s| s[0] < range.start || s[0] > range.end) {
            return Err(Error::LeftChart { time: t });
        }
        let shape = c.shape();
        let pick = |q: usize| Array2::from_shape_vec(shape, st.iter().map(|s| s[q]).collect()).unwrap();
        let map = GridMap { u: pick(0), v: pick(1) };
        let min_det = map.jacobian_det(c).iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if min_det <= 0.0 {
            // Secant estimate of the crossing time.
            let frac = prev_min / (prev_min - min_det);
            return Err(Error::Caustic {
                time: t - dt + frac * dt,
            });
        }
        prev_min = min_det;
        let vel = VectorField::new(c, pick(2), pick(3))?;
        path.push(t, map, vel, None);
    }
    Ok(path)
}

/// Zero-mean pressure of the Euler equation at velocity `X`:
/// `Δp = −div ∇_X X`.
pub fn pressure_field(x: &VectorField, tol: f64) -> Result<ScalarField> {
    check_div_free(x, tol)?;
    let c = x.chart();
    let rhs = calculus::div(&calculus::covariant_advection(x, x)).samples.mapv(|v| -v);
    let p = poisson::solve_closed(c, &rhs)?;
    ScalarField::new(c, p)
}

/// Second fundamental form of the volumorphism subgroup at the identity:
/// the gradient part of `∇_X Y`.
pub fn second_fundamental_form(x: &VectorField, y: &VectorField, tol: f64) -> Result<VectorField> {
    check_div_free(x, tol)?;
    check_div_free(y, tol)?;
    let (_, grad) = calculus::helmholtz_decompose(&calculus::covariant_advection(x, y))?;
    Ok(grad)
}
