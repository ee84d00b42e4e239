//! Mode-by-mode solver for `M^{-1} + tau kappa Delta^2` with the metric
//! coefficients averaged in azimuth. On axisymmetric geometry this is the
//! exact discrete operator; otherwise it serves as a GMRES preconditioner.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, LU};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::graphgeom::GeometryState;
use crate::scalar::{lit, to_f64, Real};
use crate::spectral::{AxisKind, Parity};

use super::{MobilityKind, MobilitySpec};

pub(crate) struct ModeSolver {
    n_u: usize,
    n_v: usize,
    lus: Vec<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    forward: Option<Arc<dyn Fft<f64>>>,
    inverse: Option<Arc<dyn Fft<f64>>>,
}

/// Azimuthal averages of the Laplacian coefficients:
/// `Delta f ~ c_uu f_uu - c_u f_u + c_vv f_vv`.
fn profiles<T: Real>(geom: &GeometryState<'_, T>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (n_u, n_v) = (geom.grid().n_u(), geom.grid().n_v());
    let mut cuu = vec![0.0; n_u];
    let mut cu = vec![0.0; n_u];
    let mut cvv = vec![0.0; n_u];
    for i in 0..n_u {
        for j in 0..n_v {
            let idx = i * n_v + j;
            let gi = geom.g_inv[idx];
            cuu[i] += to_f64(gi.xx);
            cvv[i] += to_f64(gi.yy);
            cu[i] += to_f64(gi.trace_with(&geom.christoffel[idx][0]));
        }
        cuu[i] /= n_v as f64;
        cvv[i] /= n_v as f64;
        cu[i] /= n_v as f64;
    }
    (cuu, cu, cvv)
}

impl ModeSolver {
    pub(crate) fn new<T: Real>(
        geom: &GeometryState<'_, T>,
        mobility: &MobilitySpec<T>,
        tau_kappa: f64,
    ) -> Result<Self> {
        let grid = geom.grid();
        let (n_u, n_v) = (grid.n_u(), grid.n_v());
        let sp = grid.spectral();
        let polar = sp.u_kind() == AxisKind::Polar;
        let (cuu, cu, cvv) = profiles(geom);
        let ell2 = match mobility.kind {
            MobilityKind::L2 => 0.0,
            MobilityKind::Proxy => {
                let l = to_f64(mobility.length);
                l * l
            }
        };
        let n_modes = if sp.v_kind() == AxisKind::Collapsed { 1 } else { n_v / 2 + 1 };
        let mut lus = Vec::with_capacity(n_modes);
        let mut cache: [Option<(DMatrix<f64>, DMatrix<f64>)>; 2] = [None, None];
        for m in 0..n_modes {
            let parity = if polar && m % 2 == 1 { Parity::Odd } else { Parity::Even };
            let slot = usize::from(parity == Parity::Odd);
            if cache[slot].is_none() {
                let d1 = sp.u_derivative_matrix(parity, 1);
                let d2 = sp.u_derivative_matrix(parity, 2);
                cache[slot] = Some((
                    DMatrix::from_row_slice(n_u, n_u, &d1),
                    DMatrix::from_row_slice(n_u, n_u, &d2),
                ));
            }
            let (d1, d2) = cache[slot].as_ref().unwrap();
            let mf = (m * m) as f64;
            let lap = DMatrix::from_fn(n_u, n_u, |r, c| {
                let diag = if r == c { -mf * cvv[r] } else { 0.0 };
                cuu[r] * d2[(r, c)] - cu[r] * d1[(r, c)] + diag
            });
            let ident = DMatrix::<f64>::identity(n_u, n_u);
            let minv = &ident - &lap * ell2;
            let a = minv + (&lap * &lap) * tau_kappa;
            let lu = a.lu();
            if !lu.is_invertible() {
                return Err(Error::LinearSolve(format!("singular mode operator at m = {m}")));
            }
            lus.push(lu);
        }
        let (forward, inverse) = if n_v > 1 {
            let mut planner = FftPlanner::<f64>::new();
            (Some(planner.plan_fft_forward(n_v)), Some(planner.plan_fft_inverse(n_v)))
        } else {
            (None, None)
        };
        Ok(Self {
            n_u,
            n_v,
            lus,
            forward,
            inverse,
        })
    }

    pub(crate) fn solve<T: Real>(&self, r: &[T]) -> Vec<T> {
        let (n_u, n_v) = (self.n_u, self.n_v);
        if n_v == 1 {
            let b = DVector::from_iterator(n_u, r.iter().map(|&x| to_f64(x)));
            let x = self.lus[0].solve(&b).expect("invertible mode operator");
            return x.iter().map(|&v| lit(v)).collect();
        }
        let mut spec: Vec<Complex<f64>> = r.iter().map(|&x| Complex::new(to_f64(x), 0.0)).collect();
        self.forward.as_ref().unwrap().process(&mut spec);
        let mut out = vec![Complex::new(0.0, 0.0); n_u * n_v];
        for (m, lu) in self.lus.iter().enumerate() {
            let re = DVector::from_fn(n_u, |i, _| spec[i * n_v + m].re);
            let im = DVector::from_fn(n_u, |i, _| spec[i * n_v + m].im);
            let xr = lu.solve(&re).expect("invertible mode operator");
            let xi = lu.solve(&im).expect("invertible mode operator");
            for i in 0..n_u {
                let c = Complex::new(xr[i], xi[i]);
                out[i * n_v + m] = c;
                if m != 0 && 2 * m != n_v {
                    out[i * n_v + (n_v - m)] = c.conj();
                }
            }
        }
        self.inverse.as_ref().unwrap().process(&mut out);
        let scale = 1.0 / n_v as f64;
        out.iter().map(|c| lit(c.re * scale)).collect()
    }
}
