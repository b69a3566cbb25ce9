//! Discretized 2D Riemannian surfaces.
//!
//! Every chart has metric coefficients that depend on `u` alone: the flat
//! torus trivially, and surfaces of revolution `dt² + ρ(t)² dφ²` with
//! `u = t` (arc length along the meridian) and `v = φ`. The angular
//! coordinate `v` is always periodic.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::sync::Arc;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::deriv::{AxisDiff, GridDiff};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{Interval, ParameterGrid};
use crate::interp::{self, InterpKind};

/// Shared handle to an immutable chart.
pub type Chart = Arc<SurfaceChart>;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    FlatTorus,
    SphereBand,
    Revolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Edge {
    UMin,
    UMax,
}

/// One boundary circle `u = const` of a band.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    pub which_edge: Edge,
    /// Grid row index of the edge.
    pub row: usize,
    /// Geodesic curvature, signed with the domain on the left of the
    /// positively oriented boundary (Gauss-Bonnet convention).
    pub kg: Vec<f64>,
    /// Outward unit normal, contravariant components, per boundary sample.
    pub normal: Vec<[f64; 2]>,
}

impl BoundaryCurve {
    /// Inward unit normal at sample `j`.
    pub fn inward_normal(&self, j: usize) -> [f64; 2] {
        let n = self.normal[j];
        [-n[0], -n[1]]
    }
}

/// Meridian profile of a surface of revolution.
#[derive(Clone)]
pub enum Profile {
    /// ρ with exact first and second derivatives.
    Analytic {
        rho: ScalarFn,
        drho: ScalarFn,
        ddrho: ScalarFn,
    },
    /// ρ only; derivatives are taken numerically on the grid.
    Function(ScalarFn),
    /// ρ sampled at the `u` grid nodes.
    Samples(Vec<f64>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Analytic { .. } => f.write_str("Profile::Analytic"),
            Profile::Function(_) => f.write_str("Profile::Function"),
            Profile::Samples(s) => write!(f, "Profile::Samples({} values)", s.len()),
        }
    }
}

impl Profile {
    pub fn analytic(
        rho: impl Fn(f64) -> f64 + Send + Sync + 'static,
        drho: impl Fn(f64) -> f64 + Send + Sync + 'static,
        ddrho: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Profile::Analytic {
            rho: Arc::new(rho),
            drho: Arc::new(drho),
            ddrho: Arc::new(ddrho),
        }
    }

    pub fn function(rho: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Profile::Function(Arc::new(rho))
    }
}

/// Profile samples along the `u` axis.
#[derive(Debug, Clone)]
pub struct ProfileSamples {
    pub rho: Vec<f64>,
    pub drho: Vec<f64>,
    pub ddrho: Vec<f64>,
    /// Exact profile, when given, for off-grid evaluation.
    pub exact: Option<Profile>,
}

/// A discretized surface with metric, connection and curvature samples.
#[derive(Debug)]
pub struct SurfaceChart {
    pub grid: ParameterGrid,
    pub kind: ChartKind,
    pub g11: Array2<f64>,
    pub g12: Array2<f64>,
    pub g22: Array2<f64>,
    /// Inverse metric `g^{ij}`.
    pub ginv11: Array2<f64>,
    pub ginv12: Array2<f64>,
    pub ginv22: Array2<f64>,
    /// `det(g_ij)`.
    pub det_g: Array2<f64>,
    pub sqrt_det_g: Array2<f64>,
    /// `christoffel[i][j][k]` = Γ^i_{jk}, symmetric in `j, k`.
    pub christoffel: [[[Array2<f64>; 2]; 2]; 2],
    pub curvature: Array2<f64>,
    pub boundary: Option<[BoundaryCurve; 2]>,
    pub profile: Option<ProfileSamples>,
    diff: GridDiff,
    /// Product quadrature weights (coordinate measure, without √g).
    weights: Array2<f64>,
}

fn broadcast(grid: &ParameterGrid, col: &[f64]) -> Array2<f64> {
    Array2::from_shape_fn(grid.shape(), |(i, _)| col[i])
}

fn constant(grid: &ParameterGrid, c: f64) -> Array2<f64> {
    Array2::from_elem(grid.shape(), c)
}

impl SurfaceChart {
    fn assemble(
        grid: ParameterGrid,
        kind: ChartKind,
        g11: Vec<f64>,
        g22: Vec<f64>,
        dg22: Vec<f64>,
        curvature: Vec<f64>,
        profile: Option<ProfileSamples>,
    ) -> Result<Chart> {
        let nu = grid.nu();
        for i in 0..nu {
            if !(g11[i] > 0.0 && g22[i] > 0.0) || !g11[i].is_finite() || !g22[i].is_finite() {
                return Err(Error::InvalidProfile(format!(
                    "metric not positive-definite at u = {}",
                    grid.u.coord(i)
                )));
            }
        }
        // Orthogonal metric depending on u only: g = diag(a(u), b(u)).
        // Γ^1_11 = a'/2a, Γ^1_22 = -b'/2a, Γ^2_12 = b'/2b; a is constant here.
        let zero = constant(&grid, 0.0);
        let gam122: Vec<f64> = (0..nu).map(|i| -dg22[i] / (2.0 * g11[i])).collect();
        let gam212: Vec<f64> = (0..nu).map(|i| dg22[i] / (2.0 * g22[i])).collect();
        let g212 = broadcast(&grid, &gam212);
        let christoffel = [
            [
                [zero.clone(), zero.clone()],
                [zero.clone(), broadcast(&grid, &gam122)],
            ],
            [[zero.clone(), g212.clone()], [g212, zero.clone()]],
        ];
        let det: Vec<f64> = (0..nu).map(|i| g11[i] * g22[i]).collect();
        let sqrt_det: Vec<f64> = det.iter().map(|d| d.sqrt()).collect();
        let wu = grid.u.weights();
        let wv = grid.v.weights();
        let weights = Array2::from_shape_fn(grid.shape(), |(i, j)| wu[i] * wv[j]);

        let boundary = if grid.u.periodic {
            None
        } else {
            let nv = grid.nv();
            let make = |edge: Edge| {
                let row = if edge == Edge::UMin { 0 } else { nu - 1 };
                let sign = if edge == Edge::UMin { -1.0 } else { 1.0 };
                // Outward conormal: n_i = sign δ_i^1 / sqrt(g^11); raise with g^{ij}.
                let ginv11 = 1.0 / g11[row];
                let n_up = [sign * ginv11 / ginv11.sqrt(), 0.0];
                // k_g = g(∇_T T, n_in) with T = ∂_v / sqrt(g22).
                let kg = -sign * gam122[row] / (g22[row] * ginv11.sqrt());
                BoundaryCurve {
                    which_edge: edge,
                    row,
                    kg: vec![kg; nv],
                    normal: vec![n_up; nv],
                }
            };
            Some([make(Edge::UMin), make(Edge::UMax)])
        };

        Ok(Arc::new(SurfaceChart {
            diff: GridDiff::new(&grid),
            g11: broadcast(&grid, &g11),
            g12: zero.clone(),
            g22: broadcast(&grid, &g22),
            ginv11: broadcast(&grid, &g11.iter().map(|a| 1.0 / a).collect::<Vec<_>>()),
            ginv12: zero.clone(),
            ginv22: broadcast(&grid, &g22.iter().map(|b| 1.0 / b).collect::<Vec<_>>()),
            det_g: broadcast(&grid, &det),
            sqrt_det_g: broadcast(&grid, &sqrt_det),
            christoffel,
            curvature: broadcast(&grid, &curvature),
            boundary,
            profile,
            weights,
            grid,
            kind,
        }))
    }

    /// Flat torus `[0, lx) × [0, ly)` with the identity metric.
    pub fn flat_torus(lx: f64, ly: f64, nu: usize, nv: usize) -> Result<Chart> {
        if !(lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidGrid(format!("torus sides must be positive, got {lx} x {ly}")));
        }
        let grid = ParameterGrid::new(
            nu,
            nv,
            true,
            true,
            Interval::new(0.0, lx),
            Interval::new(0.0, ly),
        )?;
        let ones = vec![1.0; nu];
        let zeros = vec![0.0; nu];
        Self::assemble(grid, ChartKind::FlatTorus, ones.clone(), ones, zeros.clone(), zeros, None)
    }

    /// Surface of revolution `dt² + ρ(t)² dφ²` over `t ∈ t_range`.
    ///
    /// With `periodic_t` the profile is taken as periodic over `t_range`
    /// (a torus of revolution); otherwise the chart is a band with two
    /// boundary circles.
    pub fn revolution(
        profile: &Profile,
        t_range: Interval,
        periodic_t: bool,
        nu: usize,
        nv: usize,
    ) -> Result<Chart> {
        Self::revolution_of_kind(profile, t_range, periodic_t, nu, nv, ChartKind::Revolution)
    }

    fn revolution_of_kind(
        profile: &Profile,
        t_range: Interval,
        periodic_t: bool,
        nu: usize,
        nv: usize,
        kind: ChartKind,
    ) -> Result<Chart> {
        let grid = ParameterGrid::new(
            nu,
            nv,
            periodic_t,
            true,
            t_range,
            Interval::new(0.0, 2.0 * PI),
        )?;
        let ts = grid.u.coords();
        let samples = match profile {
            Profile::Analytic { rho, drho, ddrho } => ProfileSamples {
                rho: ts.iter().map(|&t| rho(t)).collect(),
                drho: ts.iter().map(|&t| drho(t)).collect(),
                ddrho: ts.iter().map(|&t| ddrho(t)).collect(),
                exact: Some(profile.clone()),
            },
            Profile::Function(rho) => {
                numeric_profile(&grid, ts.iter().map(|&t| rho(t)).collect())?
            }
            Profile::Samples(s) => {
                if s.len() != nu {
                    return Err(Error::InvalidProfile(format!(
                        "expected {nu} profile samples, got {}",
                        s.len()
                    )));
                }
                numeric_profile(&grid, s.clone())?
            }
        };
        if let Some((i, r)) = samples
            .rho
            .iter()
            .enumerate()
            .find(|(_, r)| !(**r > 0.0) || !r.is_finite())
        {
            return Err(Error::InvalidProfile(format!(
                "profile must be positive, got rho({}) = {r}",
                ts[i]
            )));
        }
        let g11 = vec![1.0; nu];
        let g22: Vec<f64> = samples.rho.iter().map(|r| r * r).collect();
        let dg22: Vec<f64> = (0..nu).map(|i| 2.0 * samples.rho[i] * samples.drho[i]).collect();
        let curvature: Vec<f64> = (0..nu).map(|i| -samples.ddrho[i] / samples.rho[i]).collect();
        Self::assemble(grid, kind, g11, g22, dg22, curvature, Some(samples))
    }

    /// Zone of the unit sphere between polar angles `theta_min` and `theta_max`.
    pub fn sphere_band(theta_min: f64, theta_max: f64, nu: usize, nv: usize) -> Result<Chart> {
        if !(0.0 < theta_min && theta_min < theta_max && theta_max < PI) {
            return Err(Error::InvalidGrid(format!(
                "sphere band needs 0 < theta_min < theta_max < pi, got [{theta_min}, {theta_max}]"
            )));
        }
        let profile = Profile::analytic(f64::sin, f64::cos, |t: f64| -t.sin());
        Self::revolution_of_kind(
            &profile,
            Interval::new(theta_min, theta_max),
            false,
            nu,
            nv,
            ChartKind::SphereBand,
        )
    }

    pub fn diff(&self) -> &GridDiff {
        &self.diff
    }

    /// Coordinate quadrature weights; multiply by `sqrt_det_g` for area.
    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn shape(&self) -> (usize, usize) {
        self.grid.shape()
    }

    pub fn is_closed(&self) -> bool {
        self.boundary.is_none()
    }

    /// Γ^i_{jk} samples.
    pub fn gamma(&self, i: usize, j: usize, k: usize) -> &Array2<f64> {
        &self.christoffel[i][j][k]
    }

    /// Total area `∫ dV`.
    pub fn area(&self) -> f64 {
        (&self.weights * &self.sqrt_det_g).sum()
    }

    /// Integral of a grid function against the Riemannian area form.
    pub fn integrate(&self, f: &Array2<f64>) -> f64 {
        let mut acc = 0.0;
        for ((w, s), x) in self.weights.iter().zip(self.sqrt_det_g.iter()).zip(f.iter()) {
            acc += w * s * x;
        }
        acc
    }

    /// `(∫ K dV, ∮ k_g ds)` over the chart.
    pub fn gauss_bonnet_terms(&self) -> (f64, f64) {
        let interior = self.integrate(&self.curvature);
        let edge = match &self.boundary {
            None => 0.0,
            Some(curves) => {
                let wv = self.grid.v.weights();
                curves
                    .iter()
                    .map(|c| {
                        (0..self.grid.nv())
                            .map(|j| c.kg[j] * self.g22[[c.row, j]].sqrt() * wv[j])
                            .sum::<f64>()
                    })
                    .sum()
            }
        };
        (interior, edge)
    }

    /// Christoffel symbols at an arbitrary `u` (metric depends on `u` only).
    /// Returns `(Γ^1_22, Γ^2_12)`, the only nonzero symbols on these charts.
    pub fn christoffel_at(&self, u: f64) -> (f64, f64) {
        match &self.profile {
            None => (0.0, 0.0),
            Some(p) => {
                let (rho, drho) = match &p.exact {
                    Some(Profile::Analytic { rho, drho, .. }) => (rho(u), drho(u)),
                    _ => (
                        interp::eval_line(&self.grid.u, &p.rho, u, InterpKind::Spectral),
                        interp::eval_line(&self.grid.u, &p.drho, u, InterpKind::Spectral),
                    ),
                };
                (-rho * drho, drho / rho)
            }
        }
    }

    /// Metric at an arbitrary `u`: `(g11, g22)`.
    pub fn metric_at(&self, u: f64) -> (f64, f64) {
        match &self.profile {
            None => (1.0, 1.0),
            Some(p) => {
                let rho = match &p.exact {
                    Some(Profile::Analytic { rho, .. }) => rho(u),
                    _ => interp::eval_line(&self.grid.u, &p.rho, u, InterpKind::Spectral),
                };
                (1.0, rho * rho)
            }
        }
    }

    /// Text dump: one CSV block per field, each headed by `# name`.
    pub fn to_csv_blocks(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# chart kind={:?} nu={} nv={} u=[{}, {}] v=[{}, {}] u_periodic={} v_periodic={}",
            self.kind,
            self.grid.nu(),
            self.grid.nv(),
            self.grid.u.range.start,
            self.grid.u.range.end,
            self.grid.v.range.start,
            self.grid.v.range.end,
            self.grid.u.periodic,
            self.grid.v.periodic
        );
        let fields: [(&str, &Array2<f64>); 7] = [
            ("g11", &self.g11),
            ("g12", &self.g12),
            ("g22", &self.g22),
            ("sqrt_det_g", &self.sqrt_det_g),
            ("curvature", &self.curvature),
            ("gamma_1_22", &self.christoffel[0][1][1]),
            ("gamma_2_12", &self.christoffel[1][0][1]),
        ];
        for (name, a) in fields {
            let _ = writeln!(out, "# {name}");
            let _ = writeln!(out, "u,v,{name}");
            for i in 0..self.grid.nu() {
                for j in 0..self.grid.nv() {
                    let (u, v) = self.grid.point(i, j);
                    let _ = writeln!(out, "{u:.17e},{v:.17e},{:.17e}", a[[i, j]]);
                }
            }
        }
        if let Some(curves) = &self.boundary {
            for c in curves {
                let _ = writeln!(out, "# boundary {:?}", c.which_edge);
                let _ = writeln!(out, "v,kg,n1,n2");
                for j in 0..self.grid.nv() {
                    let _ = writeln!(
                        out,
                        "{:.17e},{:.17e},{:.17e},{:.17e}",
                        self.grid.v.coord(j),
                        c.kg[j],
                        c.normal[j][0],
                        c.normal[j][1]
                    );
                }
            }
        }
        out
    }
}

fn numeric_profile(grid: &ParameterGrid, rho: Vec<f64>) -> Result<ProfileSamples> {
    let n = rho.len();
    let d = AxisDiff::new(&grid.u);
    let r = Array1::from(rho.clone());
    let mut d1 = Array1::zeros(n);
    let mut d2 = Array1::zeros(n);
    d.d1_line(r.view(), d1.view_mut());
    d.d2_line(r.view(), d2.view_mut());

    let scale = rho.iter().fold(0.0f64, |m, x| m.max(x.abs()))
        + d2.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if grid.u.periodic {
        // Resolved when the upper third of the spectrum carries no weight.
        let mut planner = rustfft::FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let mut buf: Vec<_> = rho.iter().map(|&x| rustfft::num_complex::Complex64::new(x, 0.0)).collect();
        fft.process(&mut buf);
        let tail = (n / 3..=n / 2)
            .map(|m| {
                let k = 2.0 * PI * m as f64 / grid.u.range.length();
                buf[m].norm() / n as f64 * k * k
            })
            .fold(0.0f64, f64::max);
        if tail > 1e-6 * scale {
            return Err(Error::InvalidProfile(format!(
                "profile second derivative unresolved on {n} samples (spectral tail {tail:.2e})"
            )));
        }
    } else {
        // Compare against the second-order three-point estimate.
        let h = grid.u.spacing();
        let mut worst = 0.0f64;
        for i in 1..n - 1 {
            let low = (rho[i - 1] - 2.0 * rho[i] + rho[i + 1]) / (h * h);
            worst = worst.max((low - d2[i]).abs());
        }
        if worst > 1e-2 * scale {
            return Err(Error::InvalidProfile(format!(
                "profile second derivative unresolved on {n} samples (stencil disagreement {worst:.2e})"
            )));
        }
    }
    Ok(ProfileSamples {
        rho,
        drho: d1.to_vec(),
        ddrho: d2.to_vec(),
        exact: None,
    })
}

fn two_pi() -> f64 {
    2.0 * PI
}

/// Meridian profile in a chart config: an expression in `t` or a sample table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Expression(String),
    Samples(Vec<f64>),
}

/// Chart description as read from a config file.
///
/// ```toml
/// kind = "revolution"
/// profile = "2 + cos(t)"
/// t0 = 0.0
/// t1 = 6.283185307179586
/// periodic = true
/// nu = 32
/// nv = 32
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChartSpec {
    FlatTorus {
        #[serde(default = "two_pi")]
        lx: f64,
        #[serde(default = "two_pi")]
        ly: f64,
        nu: usize,
        nv: usize,
    },
    SphereBand {
        theta_min: f64,
        theta_max: f64,
        nu: usize,
        nv: usize,
    },
    Revolution {
        profile: ProfileSpec,
        t0: f64,
        t1: f64,
        #[serde(default)]
        periodic: bool,
        nu: usize,
        nv: usize,
    },
}

impl ChartSpec {
    pub fn build(&self) -> Result<Chart> {
        match self {
            ChartSpec::FlatTorus { lx, ly, nu, nv } => SurfaceChart::flat_torus(*lx, *ly, *nu, *nv),
            ChartSpec::SphereBand {
                theta_min,
                theta_max,
                nu,
                nv,
            } => SurfaceChart::sphere_band(*theta_min, *theta_max, *nu, *nv),
            ChartSpec::Revolution {
                profile,
                t0,
                t1,
                periodic,
                nu,
                nv,
            } => {
                let profile = match profile {
                    ProfileSpec::Expression(src) => {
                        let e = Expr::parse(src, &["t"])?;
                        // Evaluate eagerly so expression errors surface here.
                        let grid = ParameterGrid::new(
                            *nu,
                            *nv,
                            *periodic,
                            true,
                            Interval::new(*t0, *t1),
                            Interval::new(0.0, 2.0 * PI),
                        )?;
                        let samples = grid
                            .u
                            .coords()
                            .into_iter()
                            .map(|t| e.eval(&[t]))
                            .collect::<Result<Vec<f64>>>()?;
                        Profile::Samples(samples)
                    }
                    ProfileSpec::Samples(s) => Profile::Samples(s.clone()),
                };
                SurfaceChart::revolution(&profile, Interval::new(*t0, *t1), *periodic, *nu, *nv)
            }
        }
    }
}
