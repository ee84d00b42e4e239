//! Fourier differentiation on structured parametric grids.
//!
//! Periodic axes use plain FFT differentiation. The polar axis of the sphere
//! is handled by the double-Fourier-sphere extension: a column at azimuth
//! `phi` is continued through the poles with the column at `phi + pi`, which
//! yields a smooth `2 pi`-periodic line of length `2 n_u`. Tensor components
//! change sign under that glide reflection once per polar index, which is
//! what [`Parity`] encodes.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    /// Uniform nodes on `[0, 2 pi)`.
    Periodic,
    /// Offset nodes `(i + 1/2) pi / n` on `(0, pi)`, closed through the poles.
    Polar,
    /// Symmetry direction with a single node; all derivatives vanish.
    Collapsed,
}

/// Behaviour of a field under the polar glide reflection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    /// Parity of a coordinate tensor component with `polar_indices` polar slots.
    pub fn of_component(polar_indices: usize) -> Parity {
        if polar_indices % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

struct Axis<T: Real> {
    kind: AxisKind,
    n: usize,
    len: usize,
    forward: Option<Arc<dyn Fft<T::Fft>>>,
    inverse: Option<Arc<dyn Fft<T::Fft>>>,
}

impl<T: Real> Clone for Axis<T> {
    fn clone(&self) -> Self {
        Self {
            kind: self.kind,
            n: self.n,
            len: self.len,
            forward: self.forward.clone(),
            inverse: self.inverse.clone(),
        }
    }
}

impl<T: Real> Axis<T> {
    fn new(kind: AxisKind, n: usize, planner: &mut FftPlanner<T::Fft>) -> Self {
        let len = match kind {
            AxisKind::Periodic => n,
            AxisKind::Polar => 2 * n,
            AxisKind::Collapsed => 0,
        };
        let (forward, inverse) = if len > 0 {
            (
                Some(planner.plan_fft_forward(len)),
                Some(planner.plan_fft_inverse(len)),
            )
        } else {
            (None, None)
        };
        Self {
            kind,
            n,
            len,
            forward,
            inverse,
        }
    }

    /// Multiplier `(i k)^order` for FFT bin `q`.
    fn multiplier(&self, q: usize, order: u32) -> Complex<T::Fft> {
        let len = self.len;
        let half = len / 2;
        let k: f64 = if q < half {
            q as f64
        } else if q == half && len % 2 == 0 {
            if order % 2 == 1 {
                return Complex::new(fft_lit::<T>(0.0), fft_lit::<T>(0.0));
            }
            half as f64
        } else {
            q as f64 - len as f64
        };
        let mag = k.powi(order as i32);
        let (re, im) = match order % 4 {
            0 => (mag, 0.0),
            1 => (0.0, mag),
            2 => (-mag, 0.0),
            _ => (0.0, -mag),
        };
        Complex::new(fft_lit::<T>(re), fft_lit::<T>(im))
    }

    /// Differentiates every contiguous line of `buf` (each `len` long).
    fn differentiate_lines(
        &self,
        buf: Vec<Complex<T::Fft>>,
        orders: &[u32],
    ) -> Vec<Vec<Complex<T::Fft>>> {
        let forward = self.forward.as_ref().expect("non-collapsed axis");
        let inverse = self.inverse.as_ref().expect("non-collapsed axis");
        let mut spec = buf;
        forward.process(&mut spec);
        let scale = fft_lit::<T>(1.0 / self.len as f64);
        let mults: Vec<Vec<Complex<T::Fft>>> = orders
            .iter()
            .map(|&o| (0..self.len).map(|q| self.multiplier(q, o)).collect())
            .collect();
        mults
            .iter()
            .map(|mult| {
                let mut out = spec.clone();
                for line in out.chunks_mut(self.len) {
                    for (c, m) in line.iter_mut().zip(mult.iter()) {
                        *c = *c * *m;
                    }
                }
                inverse.process(&mut out);
                for c in out.iter_mut() {
                    *c = *c * scale;
                }
                out
            })
            .collect()
    }
}

#[inline]
fn fft_lit<T: Real>(x: f64) -> T::Fft {
    lit::<T>(x).to_fft()
}

use crate::scalar::lit;

/// First and second partial derivatives of a scalar field.
#[derive(Debug, Clone)]
pub struct ScalarJet<T> {
    pub du: Vec<T>,
    pub dv: Vec<T>,
    pub duu: Vec<T>,
    pub duv: Vec<T>,
    pub dvv: Vec<T>,
}

impl<T: Real> ScalarJet<T> {
    #[inline]
    pub fn gradient(&self, i: usize) -> [T; 2] {
        [self.du[i], self.dv[i]]
    }

    #[inline]
    pub fn hessian(&self, i: usize) -> crate::scalar::Sym2<T> {
        crate::scalar::Sym2::new(self.duu[i], self.duv[i], self.dvv[i])
    }
}

/// Spectral differentiation engine for an `n_u x n_v` node array stored
/// row-major (`index = i * n_v + j`, `i` along `u`).
pub struct Spectral<T: Real> {
    n_u: usize,
    n_v: usize,
    u: Axis<T>,
    v: Axis<T>,
}

impl<T: Real> Clone for Spectral<T> {
    fn clone(&self) -> Self {
        Self {
            n_u: self.n_u,
            n_v: self.n_v,
            u: self.u.clone(),
            v: self.v.clone(),
        }
    }
}

impl<T: Real> fmt::Debug for Spectral<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral")
            .field("n_u", &self.n_u)
            .field("n_v", &self.n_v)
            .field("u", &self.u.kind)
            .field("v", &self.v.kind)
            .finish()
    }
}

impl<T: Real> Spectral<T> {
    pub fn new(u_kind: AxisKind, n_u: usize, v_kind: AxisKind, n_v: usize) -> Self {
        let mut planner = FftPlanner::<T::Fft>::new();
        Self {
            n_u,
            n_v,
            u: Axis::new(u_kind, n_u, &mut planner),
            v: Axis::new(v_kind, n_v, &mut planner),
        }
    }

    pub fn len(&self) -> usize {
        self.n_u * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn u_kind(&self) -> AxisKind {
        self.u.kind
    }

    pub fn v_kind(&self) -> AxisKind {
        self.v.kind
    }

    /// Derivatives along `v` (rows) of the requested orders.
    pub fn deriv_v(&self, f: &[T], orders: &[u32]) -> Vec<Vec<T>> {
        debug_assert_eq!(f.len(), self.len());
        if self.v.kind == AxisKind::Collapsed {
            return orders
                .iter()
                .map(|&o| {
                    if o == 0 {
                        f.to_vec()
                    } else {
                        vec![T::zero(); f.len()]
                    }
                })
                .collect();
        }
        let buf: Vec<Complex<T::Fft>> = f
            .iter()
            .map(|&x| Complex::new(x.to_fft(), fft_lit::<T>(0.0)))
            .collect();
        self.v
            .differentiate_lines(buf, orders)
            .into_iter()
            .map(|line| line.into_iter().map(|c| T::from_fft(c.re)).collect())
            .collect()
    }

    /// Derivatives along `u` (columns); `parity` only matters on a polar axis.
    pub fn deriv_u(&self, f: &[T], parity: Parity, orders: &[u32]) -> Vec<Vec<T>> {
        debug_assert_eq!(f.len(), self.len());
        let (n_u, n_v) = (self.n_u, self.n_v);
        match self.u.kind {
            AxisKind::Collapsed => orders
                .iter()
                .map(|&o| {
                    if o == 0 {
                        f.to_vec()
                    } else {
                        vec![T::zero(); f.len()]
                    }
                })
                .collect(),
            AxisKind::Periodic => {
                let mut buf = Vec::with_capacity(n_u * n_v);
                for j in 0..n_v {
                    for i in 0..n_u {
                        buf.push(Complex::new(f[i * n_v + j].to_fft(), fft_lit::<T>(0.0)));
                    }
                }
                self.u
                    .differentiate_lines(buf, orders)
                    .into_iter()
                    .map(|lines| {
                        let mut out = vec![T::zero(); n_u * n_v];
                        for j in 0..n_v {
                            for i in 0..n_u {
                                out[i * n_v + j] = T::from_fft(lines[j * n_u + i].re);
                            }
                        }
                        out
                    })
                    .collect()
            }
            AxisKind::Polar => {
                let half = n_v / 2;
                let ncols = if n_v == 1 { 1 } else { half };
                let ps = lit::<T>(parity.sign());
                let mut buf = Vec::with_capacity(ncols * 2 * n_u);
                for j in 0..ncols {
                    let jp = (j + half) % n_v;
                    for i in 0..n_u {
                        buf.push(Complex::new(f[i * n_v + j].to_fft(), fft_lit::<T>(0.0)));
                    }
                    for q in n_u..2 * n_u {
                        let i = 2 * n_u - 1 - q;
                        buf.push(Complex::new((ps * f[i * n_v + jp]).to_fft(), fft_lit::<T>(0.0)));
                    }
                }
                let len = 2 * n_u;
                self.u
                    .differentiate_lines(buf, orders)
                    .into_iter()
                    .zip(orders.iter())
                    .map(|(lines, &o)| {
                        let sgn = ps * if o % 2 == 1 { -T::one() } else { T::one() };
                        let mut out = vec![T::zero(); n_u * n_v];
                        for j in 0..ncols {
                            let jp = (j + half) % n_v;
                            let line = &lines[j * len..(j + 1) * len];
                            for i in 0..n_u {
                                out[i * n_v + j] = T::from_fft(line[i].re);
                            }
                            if jp != j {
                                for q in n_u..len {
                                    let i = len - 1 - q;
                                    out[i * n_v + jp] = sgn * T::from_fft(line[q].re);
                                }
                            }
                        }
                        out
                    })
                    .collect()
            }
        }
    }

    pub fn du(&self, f: &[T], parity: Parity) -> Vec<T> {
        self.deriv_u(f, parity, &[1]).pop().unwrap()
    }

    pub fn dv(&self, f: &[T]) -> Vec<T> {
        self.deriv_v(f, &[1]).pop().unwrap()
    }

    /// All first and second partials of an even (scalar) field.
    pub fn jet(&self, f: &[T]) -> ScalarJet<T> {
        let mut dvs = self.deriv_v(f, &[1, 2]);
        let dvv = dvs.pop().unwrap();
        let dv = dvs.pop().unwrap();
        let mut dus = self.deriv_u(f, Parity::Even, &[1, 2]);
        let duu = dus.pop().unwrap();
        let du = dus.pop().unwrap();
        let duv = self.du(&dv, Parity::Even);
        ScalarJet {
            du,
            dv,
            duu,
            duv,
            dvv,
        }
    }

    /// Dense matrix (row-major `n_u x n_u`, in `f64`) of the `order`-th
    /// derivative along `u` acting on a single column of the given parity.
    pub fn u_derivative_matrix(&self, parity: Parity, order: u32) -> Vec<f64> {
        let n = self.n_u;
        let mut m = vec![0.0; n * n];
        if self.u.kind == AxisKind::Collapsed {
            if order == 0 {
                m[0] = 1.0;
            }
            return m;
        }
        let len = self.u.len;
        let ps = parity.sign();
        for col in 0..n {
            let mut buf = vec![Complex::new(fft_lit::<T>(0.0), fft_lit::<T>(0.0)); len];
            buf[col] = Complex::new(fft_lit::<T>(1.0), fft_lit::<T>(0.0));
            if self.u.kind == AxisKind::Polar {
                buf[len - 1 - col] = Complex::new(fft_lit::<T>(ps), fft_lit::<T>(0.0));
            }
            let line = self.u.differentiate_lines(buf, &[order]).pop().unwrap();
            for row in 0..n {
                m[row * n + col] = crate::scalar::to_f64(T::from_fft(line[row].re));
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn periodic_grid(n_u: usize, n_v: usize) -> (Vec<f64>, Vec<f64>) {
        let u = (0..n_u).map(|i| 2.0 * PI * i as f64 / n_u as f64).collect();
        let v = (0..n_v).map(|j| 2.0 * PI * j as f64 / n_v as f64).collect();
        (u, v)
    }

    #[test]
    fn periodic_jet_is_exact_for_trig_polynomials() {
        let (n_u, n_v) = (16, 12);
        let (u, v) = periodic_grid(n_u, n_v);
        let sp = Spectral::<f64>::new(AxisKind::Periodic, n_u, AxisKind::Periodic, n_v);
        let f: Vec<f64> = (0..n_u * n_v)
            .map(|k| {
                let (x, y) = (u[k / n_v], v[k % n_v]);
                (3.0 * x).sin() * (2.0 * y).cos() + x.cos()
            })
            .collect();
        let jet = sp.jet(&f);
        for k in 0..n_u * n_v {
            let (x, y) = (u[k / n_v], v[k % n_v]);
            let fu = 3.0 * (3.0 * x).cos() * (2.0 * y).cos() - x.sin();
            let fv = -2.0 * (3.0 * x).sin() * (2.0 * y).sin();
            let fuu = -9.0 * (3.0 * x).sin() * (2.0 * y).cos() - x.cos();
            let fuv = -6.0 * (3.0 * x).cos() * (2.0 * y).sin();
            let fvv = -4.0 * (3.0 * x).sin() * (2.0 * y).cos();
            assert!((jet.du[k] - fu).abs() < 1e-12);
            assert!((jet.dv[k] - fv).abs() < 1e-12);
            assert!((jet.duu[k] - fuu).abs() < 1e-11);
            assert!((jet.duv[k] - fuv).abs() < 1e-11);
            assert!((jet.dvv[k] - fvv).abs() < 1e-11);
        }
    }

    #[test]
    fn polar_axis_differentiates_smooth_sphere_functions() {
        // f = z + x y restricted to the unit sphere.
        let (n_u, n_v) = (16, 32);
        let th: Vec<f64> = (0..n_u).map(|i| (i as f64 + 0.5) * PI / n_u as f64).collect();
        let ph: Vec<f64> = (0..n_v).map(|j| 2.0 * PI * j as f64 / n_v as f64).collect();
        let sp = Spectral::<f64>::new(AxisKind::Polar, n_u, AxisKind::Periodic, n_v);
        let f_of = |t: f64, p: f64| t.cos() + t.sin().powi(2) * p.cos() * p.sin();
        let f: Vec<f64> = (0..n_u * n_v).map(|k| f_of(th[k / n_v], ph[k % n_v])).collect();
        let jet = sp.jet(&f);
        let h = 1e-4;
        for k in 0..n_u * n_v {
            let (t, p) = (th[k / n_v], ph[k % n_v]);
            let fu = (f_of(t + h, p) - f_of(t - h, p)) / (2.0 * h);
            let fuu = (f_of(t + h, p) - 2.0 * f_of(t, p) + f_of(t - h, p)) / (h * h);
            assert!((jet.du[k] - fu).abs() < 1e-7, "du at {k}");
            assert!((jet.duu[k] - fuu).abs() < 1e-5, "duu at {k}");
        }
    }

    #[test]
    fn odd_parity_component_is_continued_with_sign_flip() {
        // f_theta of a smooth function is an odd component.
        let (n_u, n_v) = (12, 24);
        let th: Vec<f64> = (0..n_u).map(|i| (i as f64 + 0.5) * PI / n_u as f64).collect();
        let ph: Vec<f64> = (0..n_v).map(|j| 2.0 * PI * j as f64 / n_v as f64).collect();
        let sp = Spectral::<f64>::new(AxisKind::Polar, n_u, AxisKind::Periodic, n_v);
        // f = sin(t) cos(p) (the x coordinate); f_t = cos t cos p, f_tt = -sin t cos p
        let ft: Vec<f64> = (0..n_u * n_v)
            .map(|k| th[k / n_v].cos() * ph[k % n_v].cos())
            .collect();
        let d = sp.du(&ft, Parity::Odd);
        for k in 0..n_u * n_v {
            let expect = -th[k / n_v].sin() * ph[k % n_v].cos();
            assert!((d[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn collapsed_axis_has_vanishing_derivatives() {
        let sp = Spectral::<f64>::new(AxisKind::Polar, 8, AxisKind::Collapsed, 1);
        let th: Vec<f64> = (0..8).map(|i| (i as f64 + 0.5) * PI / 8.0).collect();
        let f: Vec<f64> = th.iter().map(|t| t.cos()).collect();
        let jet = sp.jet(&f);
        assert!(jet.dv.iter().all(|&x| x == 0.0));
        for (i, t) in th.iter().enumerate() {
            assert!((jet.du[i] + t.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_matrix_matches_line_transform() {
        let sp = Spectral::<f64>::new(AxisKind::Polar, 10, AxisKind::Periodic, 4);
        let m = sp.u_derivative_matrix(Parity::Even, 2);
        let th: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) * PI / 10.0).collect();
        let f: Vec<f64> = th.iter().map(|t| (2.0 * t).cos()).collect();
        for r in 0..10 {
            let acc: f64 = (0..10).map(|c| m[r * 10 + c] * f[c]).sum();
            assert!((acc + 4.0 * (2.0 * th[r]).cos()).abs() < 1e-11);
        }
    }
}
