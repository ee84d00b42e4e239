//! Scalar abstraction shared by every numerical module.
//!
//! All geometry, energy and flow code is written against [`Real`]. Dense
//! linear algebra (per-mode preconditioner factorizations, symmetric
//! eigensolves) is delegated to `nalgebra` in `f64` regardless of `T`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + FromStr
    + Display
    + Debug
    + Default
    + Send
    + Sync
    + 'static
{
    /// Element type handed to the FFT backend. Identical to `Self`; kept
    /// separate so that `rustfft`'s `Signed` bound does not leak into the
    /// method namespace of generic numerical code.
    type Fft: rustfft::FftNum;

    fn to_fft(self) -> Self::Fft;
    fn from_fft(x: Self::Fft) -> Self;
}

impl Real for f32 {
    type Fft = f32;
    #[inline]
    fn to_fft(self) -> f32 {
        self
    }
    #[inline]
    fn from_fft(x: f32) -> f32 {
        x
    }
}

impl Real for f64 {
    type Fft = f64;
    #[inline]
    fn to_fft(self) -> f64 {
        self
    }
    #[inline]
    fn from_fft(x: f64) -> f64 {
        x
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().expect("finite scalar converts to f64")
}

/// Symmetric 2x2 tensor stored by its three independent components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2<T> {
    pub xx: T,
    pub xy: T,
    pub yy: T,
}

impl<T: Real> Sym2<T> {
    pub fn new(xx: T, xy: T, yy: T) -> Self {
        Self { xx, xy, yy }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> T {
        match (a, b) {
            (0, 0) => self.xx,
            (1, 1) => self.yy,
            _ => self.xy,
        }
    }

    #[inline]
    pub fn det(&self) -> T {
        self.xx * self.yy - self.xy * self.xy
    }

    #[inline]
    pub fn trace_with(&self, other: &Sym2<T>) -> T {
        // full contraction A^{ab} B_{ab}
        self.xx * other.xx + lit::<T>(2.0) * self.xy * other.xy + self.yy * other.yy
    }

    /// Inverse of a nonsingular symmetric matrix.
    #[inline]
    pub fn inverse(&self) -> Sym2<T> {
        let d = self.det();
        Sym2::new(self.yy / d, -self.xy / d, self.xx / d)
    }

    /// Bilinear form `x^a S_{ab} y^b`; bitwise symmetric in `x` and `y`.
    #[inline]
    pub fn apply(&self, x: [T; 2], y: [T; 2]) -> T {
        self.xx * (x[0] * y[0]) + self.xy * (x[0] * y[1] + x[1] * y[0]) + self.yy * (x[1] * y[1])
    }

    /// `S x` as a vector.
    #[inline]
    pub fn mul_vec(&self, x: [T; 2]) -> [T; 2] {
        [self.xx * x[0] + self.xy * x[1], self.xy * x[0] + self.yy * x[1]]
    }

    /// `A S A` for symmetric `A` (index raising with `A = g^{-1}`).
    pub fn congruence(&self, a: &Sym2<T>) -> Sym2<T> {
        let m = |i: usize, j: usize| -> T {
            let mut acc = T::zero();
            for p in 0..2 {
                for q in 0..2 {
                    acc += a.get(i, p) * self.get(p, q) * a.get(q, j);
                }
            }
            acc
        };
        Sym2::new(m(0, 0), m(0, 1), m(1, 1))
    }

    /// `S A S` for symmetric `A` (e.g. `k_{ag} g^{gd} k_{db}`).
    pub fn sandwich(&self, a: &Sym2<T>) -> Sym2<T> {
        a.congruence(self)
    }

    pub fn scale(&self, c: T) -> Sym2<T> {
        Sym2::new(self.xx * c, self.xy * c, self.yy * c)
    }

    pub fn add(&self, o: &Sym2<T>) -> Sym2<T> {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    pub fn sub(&self, o: &Sym2<T>) -> Sym2<T> {
        Sym2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }

    pub fn max_abs(&self) -> T {
        self.xx.abs().max(self.xy.abs()).max(self.yy.abs())
    }
}

#[inline]
pub fn dot3<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn axpy3<T: Real>(a: T, x: [T; 3], y: [T; 3]) -> [T; 3] {
    [a * x[0] + y[0], a * x[1] + y[1], a * x[2] + y[2]]
}

#[inline]
pub fn scale3<T: Real>(a: T, x: [T; 3]) -> [T; 3] {
    [a * x[0], a * x[1], a * x[2]]
}

#[inline]
pub fn add3<T: Real>(x: [T; 3], y: [T; 3]) -> [T; 3] {
    [x[0] + y[0], x[1] + y[1], x[2] + y[2]]
}

#[inline]
pub fn norm3<T: Real>(x: [T; 3]) -> T {
    dot3(x, x).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym2_inverse_and_congruence() {
        let g = Sym2::new(2.0_f64, 0.5, 3.0);
        let gi = g.inverse();
        // g^{-1} g g^{-1} = g^{-1}
        let r = g.congruence(&gi);
        assert!((r.xx - gi.xx).abs() < 1e-15);
        assert!((r.xy - gi.xy).abs() < 1e-15);
        assert!((r.yy - gi.yy).abs() < 1e-15);
        assert!((g.trace_with(&gi) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sandwich_matches_explicit_product() {
        let k = Sym2::new(1.0_f64, -0.3, 0.7);
        let gi = Sym2::new(0.9, 0.1, 1.4);
        let s = k.sandwich(&gi);
        let explicit = |a: usize, b: usize| {
            let mut acc = 0.0;
            for p in 0..2 {
                for q in 0..2 {
                    acc += k.get(a, p) * gi.get(p, q) * k.get(q, b);
                }
            }
            acc
        };
        assert!((s.xx - explicit(0, 0)).abs() < 1e-15);
        assert!((s.xy - explicit(0, 1)).abs() < 1e-15);
        assert!((s.yy - explicit(1, 1)).abs() < 1e-15);
    }
}
