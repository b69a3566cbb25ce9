use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::Fft2;
use crate::surface::Chart;

/// Fourier differentiation with the Nyquist mode dropped throughout, so
/// first and second derivatives and the inverse Laplacian share one symbol.
pub(crate) struct Ops {
    fft: Fft2,
}

impl Ops {
    pub fn new(chart: &Chart) -> Result<Self> {
        Ok(Self {
            fft: Fft2::new(&chart.grid)?,
        })
    }

    fn apply(&self, hat: &Array2<Complex64>, sym: impl Fn(f64, f64) -> Complex64) -> Array2<f64> {
        let mut out = hat.clone();
        for ((i, j), z) in out.indexed_iter_mut() {
            *z *= sym(self.fft.ku[i], self.fft.kv[j]);
        }
        self.fft.inverse(&out)
    }

    pub fn derivs(&self, a: &Array2<f64>) -> Derivs {
        let hat = self.fft.forward(a);
        let i = Complex64::new(0.0, 1.0);
        Derivs {
            du: self.apply(&hat, |ku, _| i * ku),
            dv: self.apply(&hat, |_, kv| i * kv),
            duu: self.apply(&hat, |ku, _| (-ku * ku).into()),
            duv: self.apply(&hat, |ku, kv| (-ku * kv).into()),
            dvv: self.apply(&hat, |_, kv| (-kv * kv).into()),
        }
    }

    /// Zero-mean solution of `Δw = z` (the mean and Nyquist modes of `z`
    /// are discarded).
    pub fn inverse_laplacian(&self, z: &Array2<f64>) -> Array2<f64> {
        let hat = self.fft.forward(z);
        self.apply(&hat, |ku, kv| {
            let k2 = ku * ku + kv * kv;
            if k2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                (-1.0 / k2).into()
            }
        })
    }
}

/// First and second partials of a periodic grid function.
pub(crate) struct Derivs {
    pub du: Array2<f64>,
    pub dv: Array2<f64>,
    pub duu: Array2<f64>,
    pub duv: Array2<f64>,
    pub dvv: Array2<f64>,
}

impl Derivs {
    pub fn of(chart: &Chart, a: &Array2<f64>) -> Result<Self> {
        Ok(Ops::new(chart)?.derivs(a))
    }

    /// `det(I + t D²)`.
    pub fn det(&self, t: f64) -> Array2<f64> {
        let mut out = Array2::zeros(self.du.dim());
        Zip::from(&mut out)
            .and(&self.duu)
            .and(&self.duv)
            .and(&self.dvv)
            .for_each(|o, &a, &b, &d| *o = (1.0 + t * a) * (1.0 + t * d) - t * t * b * b);
        out
    }

    /// `min det(I + tD²)`, requiring positive determinant and trace.
    pub fn guard(&self, t: f64) -> Result<f64> {
        let det = self.det(t);
        let min_det = det.iter().copied().fold(f64::INFINITY, f64::min);
        let min_tr = Zip::from(&self.duu)
            .and(&self.dvv)
            .fold(f64::INFINITY, |m, &a, &d| m.min(2.0 + t * (a + d)));
        if !(min_det > 0.0 && min_tr > 0.0) {
            return Err(Error::ConvexityGuard { min_det });
        }
        Ok(min_det)
    }
}
