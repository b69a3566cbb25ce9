//! One-dimensional differentiation along grid axes.
//!
//! Periodic axes are differentiated spectrally (Nyquist mode dropped for odd
//! derivatives); bounded axes use eighth-order centred differences with
//! one-sided closures in the four rows nearest each edge.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array2, ArrayView1, ArrayViewMut1, Axis as NdAxis};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{Axis, ParameterGrid};

#[derive(Clone)]
enum Scheme {
    Spectral {
        fwd: Arc<dyn Fft<f64>>,
        inv: Arc<dyn Fft<f64>>,
        /// Wavenumbers with the Nyquist entry zeroed.
        k: Vec<f64>,
        /// Wavenumbers keeping the Nyquist entry (for second derivatives).
        k_full: Vec<f64>,
    },
    FiniteDifference(Box<Stencils>),
}

/// Half-width of the centred stencils (order `2 * HALF`).
const HALF: usize = 4;

/// Centred stencils in the interior, one-sided closures in the `HALF` rows
/// nearest each edge. Weights are already divided by the spacing power.
#[derive(Clone, Debug)]
struct Stencils {
    half: usize,
    d1_mid: Vec<f64>,
    d2_mid: Vec<f64>,
    d1_edge: Vec<Vec<f64>>,
    d2_edge: Vec<Vec<f64>>,
}

impl Stencils {
    fn new(h: f64, n: usize) -> Self {
        let half = HALF.min(n / 2);
        let mid: Vec<f64> = (-(half as isize)..=half as isize).map(|k| k as f64).collect();
        let w = fornberg(0.0, &mid, 2);
        let d1_mid = w[1].iter().map(|c| c / h).collect();
        let d2_mid = w[2].iter().map(|c| c / (h * h)).collect();
        let e1: Vec<f64> = (0..(2 * half + 2).min(n)).map(|k| k as f64).collect();
        let e2: Vec<f64> = (0..(2 * half + 3).min(n)).map(|k| k as f64).collect();
        let mut d1_edge = Vec::with_capacity(half);
        let mut d2_edge = Vec::with_capacity(half);
        for r in 0..half {
            let a = fornberg(r as f64, &e1, 1);
            let b = fornberg(r as f64, &e2, 2);
            d1_edge.push(a[1].iter().map(|c| c / h).collect());
            d2_edge.push(b[2].iter().map(|c| c / (h * h)).collect());
        }
        Self {
            half,
            d1_mid,
            d2_mid,
            d1_edge,
            d2_edge,
        }
    }

    /// Applies a stencil family; `odd` flips the sign of the mirrored closure.
    fn apply(&self, mid: &[f64], edge: &[Vec<f64>], odd: bool, f: ArrayView1<f64>, out: &mut ArrayViewMut1<f64>) {
        let n = f.len();
        let p = self.half;
        let sign = if odd { -1.0 } else { 1.0 };
        for (r, w) in edge.iter().enumerate() {
            let (mut lo, mut hi) = (0.0, 0.0);
            for (k, c) in w.iter().enumerate() {
                lo += c * f[k];
                hi += c * f[n - 1 - k];
            }
            out[r] = lo;
            out[n - 1 - r] = sign * hi;
        }
        for i in p..n - p {
            let mut acc = 0.0;
            for (k, c) in mid.iter().enumerate() {
                acc += c * f[i + k - p];
            }
            out[i] = acc;
        }
    }
}

/// Finite-difference weights at `x0` on arbitrary `nodes` for derivative
/// orders `0..=m` (Fornberg 1988). Returns `w[order][node]`.
pub fn fornberg(x0: f64, nodes: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Differentiation operator for one axis.
#[derive(Clone)]
pub struct AxisDiff {
    n: usize,
    scheme: Scheme,
}

impl fmt::Debug for AxisDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.scheme {
            Scheme::Spectral { .. } => "spectral",
            Scheme::FiniteDifference(_) => "fd6",
        };
        write!(f, "AxisDiff({kind}, n = {})", self.n)
    }
}

/// Signed integer wavenumber index for FFT slot `m` of an `n`-point transform.
pub fn wave_index(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

impl AxisDiff {
    pub fn new(axis: &Axis) -> Self {
        let n = axis.n;
        let scheme = if axis.periodic {
            let mut planner = FftPlanner::new();
            let fwd = planner.plan_fft_forward(n);
            let inv = planner.plan_fft_inverse(n);
            let scale = 2.0 * PI / axis.range.length();
            let k_full: Vec<f64> = (0..n).map(|m| scale * wave_index(m, n) as f64).collect();
            let mut k = k_full.clone();
            k[n / 2] = 0.0;
            Scheme::Spectral { fwd, inv, k, k_full }
        } else {
            Scheme::FiniteDifference(Box::new(Stencils::new(axis.spacing(), axis.n)))
        };
        Self { n, scheme }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.scheme, Scheme::Spectral { .. })
    }

    /// First derivative of one line of samples.
    pub fn d1_line(&self, f: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        let n = self.n;
        match &self.scheme {
            Scheme::Spectral { fwd, inv, k, .. } => {
                let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                fwd.process(&mut buf);
                for (c, &km) in buf.iter_mut().zip(k) {
                    *c *= Complex64::new(0.0, km / n as f64);
                }
                inv.process(&mut buf);
                for (o, c) in out.iter_mut().zip(&buf) {
                    *o = c.re;
                }
            }
            Scheme::FiniteDifference(st) => {
                st.apply(&st.d1_mid, &st.d1_edge, true, f, &mut out);
            }
        }
    }

    /// Second derivative with a dedicated stencil (keeps the Nyquist mode on
    /// periodic axes).
    pub fn d2_line(&self, f: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
        let n = self.n;
        match &self.scheme {
            Scheme::Spectral { fwd, inv, k_full, .. } => {
                let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                fwd.process(&mut buf);
                for (c, &km) in buf.iter_mut().zip(k_full) {
                    *c *= -km * km / n as f64;
                }
                inv.process(&mut buf);
                for (o, c) in out.iter_mut().zip(&buf) {
                    *o = c.re;
                }
            }
            Scheme::FiniteDifference(st) => {
                st.apply(&st.d2_mid, &st.d2_edge, false, f, &mut out);
            }
        }
    }

    /// Dense first-derivative matrix (row `i` maps samples to `f'(x_i)`).
    pub fn d1_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n;
        let mut m = nalgebra::DMatrix::zeros(n, n);
        let mut e = ndarray::Array1::zeros(n);
        let mut col = ndarray::Array1::zeros(n);
        for j in 0..n {
            e.fill(0.0);
            e[j] = 1.0;
            self.d1_line(e.view(), col.view_mut());
            for i in 0..n {
                m[(i, j)] = col[i];
            }
        }
        m
    }
}

/// Partial derivatives on a [`ParameterGrid`].
#[derive(Clone, Debug)]
pub struct GridDiff {
    pub u: AxisDiff,
    pub v: AxisDiff,
}

impl GridDiff {
    pub fn new(grid: &ParameterGrid) -> Self {
        Self {
            u: AxisDiff::new(&grid.u),
            v: AxisDiff::new(&grid.v),
        }
    }

    fn along(op: &AxisDiff, a: &Array2<f64>, axis: usize, second: bool) -> Array2<f64> {
        let mut out = Array2::zeros(a.raw_dim());
        for (src, dst) in a
            .lanes(NdAxis(axis))
            .into_iter()
            .zip(out.lanes_mut(NdAxis(axis)))
        {
            if second {
                op.d2_line(src, dst);
            } else {
                op.d1_line(src, dst);
            }
        }
        out
    }

    pub fn du(&self, a: &Array2<f64>) -> Array2<f64> {
        Self::along(&self.u, a, 0, false)
    }

    pub fn dv(&self, a: &Array2<f64>) -> Array2<f64> {
        Self::along(&self.v, a, 1, false)
    }

    pub fn duu(&self, a: &Array2<f64>) -> Array2<f64> {
        Self::along(&self.u, a, 0, true)
    }

    pub fn dvv(&self, a: &Array2<f64>) -> Array2<f64> {
        Self::along(&self.v, a, 1, true)
    }
}
