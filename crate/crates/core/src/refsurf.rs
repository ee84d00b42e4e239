//! Analytic reference surfaces and quadrature-equipped parametric grids.
//!
//! Parametrizations:
//! * sphere: `u` = polar angle in `(0, pi)`, `v` = azimuth,
//!   `X = c + R (sin u cos v, sin u sin v, cos u)`;
//! * torus: `u` = poloidal angle, `v` = azimuth about `e_z`,
//!   `X = c + (a + r cos u)(cos v, sin v, 0) + r sin u e_z`.
//!
//! The unit normal always points out of the enclosed region. With that
//! normal the second fundamental form is `k_ab = X_ab . nu`, so the sphere
//! has `H = -2/R`; this sign is relied on throughout the crate.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scalar::{add3, cross3, dot3, lit, scale3, Real, Sym2};
use crate::spectral::{AxisKind, Spectral};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceKind {
    Sphere,
    Torus,
}

impl SurfaceKind {
    /// Euler characteristic.
    pub fn euler_characteristic(self) -> i32 {
        match self {
            SurfaceKind::Sphere => 2,
            SurfaceKind::Torus => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape<T> {
    Sphere { radius: T },
    Torus { major: T, minor: T },
}

/// Analytic closed surface with an outward unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSurface<T> {
    shape: Shape<T>,
    center: [T; 3],
}

/// Embedding, normal and their parameter derivatives at one point.
///
/// Derivative slots are ordered `[d_u, d_v]` and `[d_uu, d_uv, d_vv]`.
#[derive(Debug, Clone, Copy)]
pub struct RefFrame<T> {
    pub x: [T; 3],
    pub dx: [[T; 3]; 2],
    pub ddx: [[T; 3]; 3],
    pub nu: [T; 3],
    pub dnu: [[T; 3]; 2],
    pub ddnu: [[T; 3]; 3],
    pub g: Sym2<T>,
    pub k: Sym2<T>,
    pub mean: T,
    pub gauss: T,
    /// `sqrt(det g)`.
    pub sqrt_g: T,
}

impl<T: Real> ReferenceSurface<T> {
    pub fn sphere(radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::InvalidSurface(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            shape: Shape::Sphere { radius },
            center: [T::zero(); 3],
        })
    }

    pub fn torus(major: T, minor: T) -> Result<Self> {
        if !(minor > T::zero()) || !major.is_finite() || !minor.is_finite() {
            return Err(Error::InvalidSurface(format!(
                "torus radii must be positive, got a = {major}, r = {minor}"
            )));
        }
        if !(major > minor) {
            return Err(Error::InvalidSurface(format!(
                "torus with a = {major} <= r = {minor} self-intersects"
            )));
        }
        Ok(Self {
            shape: Shape::Torus { major, minor },
            center: [T::zero(); 3],
        })
    }

    /// Rigidly translated copy.
    pub fn with_center(mut self, center: [T; 3]) -> Self {
        self.center = center;
        self
    }

    pub fn shape(&self) -> Shape<T> {
        self.shape
    }

    pub fn center(&self) -> [T; 3] {
        self.center
    }

    pub fn kind(&self) -> SurfaceKind {
        match self.shape {
            Shape::Sphere { .. } => SurfaceKind::Sphere,
            Shape::Torus { .. } => SurfaceKind::Torus,
        }
    }

    /// Half-width of the largest tubular neighbourhood.
    pub fn reach(&self) -> T {
        match self.shape {
            Shape::Sphere { radius } => radius,
            Shape::Torus { minor, .. } => minor,
        }
    }

    pub fn area(&self) -> T {
        let pi = T::PI();
        match self.shape {
            Shape::Sphere { radius } => lit::<T>(4.0) * pi * radius * radius,
            Shape::Torus { major, minor } => lit::<T>(4.0) * pi * pi * major * minor,
        }
    }

    pub fn volume(&self) -> T {
        let pi = T::PI();
        match self.shape {
            Shape::Sphere { radius } => lit::<T>(4.0 / 3.0) * pi * radius.powi(3),
            Shape::Torus { major, minor } => lit::<T>(2.0) * pi * pi * major * minor * minor,
        }
    }

    /// Sign `s` with `nu = s (X_u x X_v) / |X_u x X_v|`.
    pub fn orientation(&self) -> T {
        match self.shape {
            Shape::Sphere { .. } => T::one(),
            Shape::Torus { .. } => -T::one(),
        }
    }

    pub fn frame(&self, u: T, v: T) -> RefFrame<T> {
        let z = T::zero();
        let (su, cu) = (u.sin(), u.cos());
        let (sv, cv) = (v.sin(), v.cos());
        let (x, dx, ddx, nu, dnu, ddnu) = match self.shape {
            Shape::Sphere { radius: r } => {
                let n = [su * cv, su * sv, cu];
                let n_u = [cu * cv, cu * sv, -su];
                let n_v = [-su * sv, su * cv, z];
                let n_uu = [-su * cv, -su * sv, -cu];
                let n_uv = [-cu * sv, cu * cv, z];
                let n_vv = [-su * cv, -su * sv, z];
                (
                    add3(self.center, scale3(r, n)),
                    [scale3(r, n_u), scale3(r, n_v)],
                    [scale3(r, n_uu), scale3(r, n_uv), scale3(r, n_vv)],
                    n,
                    [n_u, n_v],
                    [n_uu, n_uv, n_vv],
                )
            }
            Shape::Torus { major: a, minor: r } => {
                let e = [cv, sv, z];
                let ep = [-sv, cv, z];
                let ez = [z, z, T::one()];
                let rho = a + r * cu;
                let n = add3(scale3(cu, e), scale3(su, ez));
                let n_u = add3(scale3(-su, e), scale3(cu, ez));
                let n_v = scale3(cu, ep);
                let n_uu = scale3(-T::one(), n);
                let n_uv = scale3(-su, ep);
                let n_vv = scale3(-cu, e);
                (
                    add3(self.center, add3(scale3(a, e), scale3(r, n))),
                    [scale3(r, n_u), scale3(rho, ep)],
                    [scale3(r, n_uu), scale3(-r * su, ep), scale3(-rho, e)],
                    n,
                    [n_u, n_v],
                    [n_uu, n_uv, n_vv],
                )
            }
        };
        let g = Sym2::new(
            dot3(dx[0], dx[0]),
            dot3(dx[0], dx[1]),
            dot3(dx[1], dx[1]),
        );
        let k = Sym2::new(dot3(ddx[0], nu), dot3(ddx[1], nu), dot3(ddx[2], nu));
        let gi = g.inverse();
        let det = g.det();
        RefFrame {
            x,
            dx,
            ddx,
            nu,
            dnu,
            ddnu,
            g,
            k,
            mean: gi.trace_with(&k),
            gauss: k.det() / det,
            sqrt_g: det.sqrt(),
        }
    }

    /// Normal consistency check used by tests: `s (X_u x X_v)` is parallel to `nu`.
    pub fn cross_normal(&self, f: &RefFrame<T>) -> [T; 3] {
        scale3(self.orientation(), cross3(f.dx[0], f.dx[1]))
    }
}

/// Parametric grid with quadrature weights and a differentiation engine.
///
/// Node `(i, j)` is stored at `i * n_v + j`. Weights are in parameter
/// measure: multiplying by `sqrt(det g)` gives area weights.
#[derive(Debug, Clone)]
pub struct Grid<T: Real> {
    surface: ReferenceSurface<T>,
    n_u: usize,
    n_v: usize,
    u: Vec<T>,
    v: Vec<T>,
    weights: Vec<T>,
    frames: Vec<RefFrame<T>>,
    spectral: Spectral<T>,
}

const MIN_NODES: usize = 8;

/// Fejer first-rule weights for `int_{-1}^{1} f(x) dx` at `x_i = cos(theta_i)`,
/// `theta_i = (i + 1/2) pi / n`.
pub fn fejer_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let th = (i as f64 + 0.5) * PI / n as f64;
            let s: f64 = (1..=n / 2)
                .map(|k| {
                    let kf = k as f64;
                    (2.0 * kf * th).cos() / (4.0 * kf * kf - 1.0)
                })
                .sum();
            2.0 / n as f64 * (1.0 - 2.0 * s)
        })
        .collect()
}

impl<T: Real> Grid<T> {
    /// Builds an `n_u x n_v` grid. `n_v == 1` selects the axisymmetric mode
    /// in which fields depend on `u` only.
    pub fn new(surface: &ReferenceSurface<T>, n_u: usize, n_v: usize) -> Result<Self> {
        let reject = |reason: &str| Error::Resolution {
            n_u,
            n_v,
            reason: reason.to_string(),
        };
        if n_u < MIN_NODES {
            return Err(reject("at least 8 nodes are required along u"));
        }
        if n_v != 1 && n_v < MIN_NODES {
            return Err(reject("at least 8 nodes are required along v (or 1 for axisymmetric)"));
        }
        if n_v != 1 && n_v % 2 != 0 {
            return Err(reject("n_v must be even"));
        }
        let kind = surface.kind();
        if kind == SurfaceKind::Torus && n_u % 2 != 0 {
            return Err(reject("n_u must be even on a periodic axis"));
        }
        let u_kind = match kind {
            SurfaceKind::Sphere => AxisKind::Polar,
            SurfaceKind::Torus => AxisKind::Periodic,
        };
        let v_kind = if n_v == 1 {
            AxisKind::Collapsed
        } else {
            AxisKind::Periodic
        };
        let u: Vec<T> = match kind {
            SurfaceKind::Sphere => (0..n_u)
                .map(|i| lit((i as f64 + 0.5) * PI / n_u as f64))
                .collect(),
            SurfaceKind::Torus => (0..n_u)
                .map(|i| lit(2.0 * PI * i as f64 / n_u as f64))
                .collect(),
        };
        let v: Vec<T> = (0..n_v)
            .map(|j| lit(2.0 * PI * j as f64 / n_v as f64))
            .collect();
        let wu: Vec<f64> = match kind {
            SurfaceKind::Sphere => {
                let fw = fejer_weights(n_u);
                (0..n_u)
                    .map(|i| fw[i] / ((i as f64 + 0.5) * PI / n_u as f64).sin())
                    .collect()
            }
            SurfaceKind::Torus => vec![2.0 * PI / n_u as f64; n_u],
        };
        let wv = 2.0 * PI / n_v as f64;
        let mut weights = Vec::with_capacity(n_u * n_v);
        let mut frames = Vec::with_capacity(n_u * n_v);
        for i in 0..n_u {
            for j in 0..n_v {
                weights.push(lit(wu[i] * wv));
                frames.push(surface.frame(u[i], v[j]));
            }
        }
        if weights.iter().any(|w: &T| !(*w > T::zero())) {
            return Err(reject("quadrature weights are not strictly positive"));
        }
        Ok(Self {
            surface: surface.clone(),
            n_u,
            n_v,
            u,
            v,
            weights,
            frames,
            spectral: Spectral::new(u_kind, n_u, v_kind, n_v),
        })
    }

    pub fn surface(&self) -> &ReferenceSurface<T> {
        &self.surface
    }

    pub fn n_u(&self) -> usize {
        self.n_u
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn len(&self) -> usize {
        self.n_u * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_axisymmetric(&self) -> bool {
        self.n_v == 1
    }

    pub fn u_nodes(&self) -> &[T] {
        &self.u
    }

    pub fn v_nodes(&self) -> &[T] {
        &self.v
    }

    /// Parameter coordinates of node `idx`.
    pub fn node(&self, idx: usize) -> (T, T) {
        (self.u[idx / self.n_v], self.v[idx % self.n_v])
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn frames(&self) -> &[RefFrame<T>] {
        &self.frames
    }

    pub fn spectral(&self) -> &Spectral<T> {
        &self.spectral
    }

    pub fn periodic_u(&self) -> bool {
        self.spectral.u_kind() == AxisKind::Periodic
    }

    /// Samples `f(u, v)` at every node.
    pub fn sample(&self, f: impl Fn(T, T) -> T) -> Vec<T> {
        (0..self.len())
            .map(|idx| {
                let (u, v) = self.node(idx);
                f(u, v)
            })
            .collect()
    }

    /// Quadrature against the reference area element.
    pub fn integrate_reference(&self, f: &[T]) -> T {
        f.iter()
            .zip(self.weights.iter().zip(self.frames.iter()))
            .map(|(&fi, (&w, fr))| fi * w * fr.sqrt_g)
            .sum()
    }

    pub fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::GridMismatch {
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }
}

/// Grid over `surface` with the requested resolution.
pub fn sample_grid<T: Real>(
    surface: &ReferenceSurface<T>,
    n_u: usize,
    n_v: usize,
) -> Result<Grid<T>> {
    Grid::new(surface, n_u, n_v)
}

/// One-dimensional grid for fields invariant under rotation about `e_z`.
pub fn sample_axisymmetric<T: Real>(surface: &ReferenceSurface<T>, n_u: usize) -> Result<Grid<T>> {
    Grid::new(surface, n_u, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::norm3;

    #[test]
    fn rejects_bad_parameters() {
        assert!(ReferenceSurface::<f64>::sphere(0.0).is_err());
        assert!(ReferenceSurface::<f64>::sphere(-1.0).is_err());
        assert!(ReferenceSurface::<f64>::torus(1.0, 1.0).is_err());
        assert!(ReferenceSurface::<f64>::torus(0.5, 1.0).is_err());
        assert!(ReferenceSurface::<f64>::torus(2.0, 0.0).is_err());
    }

    #[test]
    fn analytic_areas_and_volumes() {
        let s = ReferenceSurface::<f64>::sphere(1.0).unwrap();
        assert!((s.area() - 12.566371).abs() < 1e-6);
        let t = ReferenceSurface::<f64>::torus(2.0, 0.5).unwrap();
        assert!((t.area() - 39.478418).abs() < 1e-6);
        assert!((t.volume() - PI * PI).abs() < 1e-12);
        assert_eq!(s.reach(), 1.0);
        assert_eq!(t.reach(), 0.5);
    }

    #[test]
    fn frames_are_internally_consistent() {
        let surfaces = [
            ReferenceSurface::<f64>::sphere(1.3).unwrap(),
            ReferenceSurface::<f64>::torus(2.0, 0.5).unwrap(),
        ];
        for s in &surfaces {
            for &(u, v) in &[(0.3, 0.1), (1.7, 2.9), (2.9, 5.0)] {
                let f = s.frame(u, v);
                assert!((norm3(f.nu) - 1.0).abs() < 1e-14);
                let c = s.cross_normal(&f);
                let c = scale3(1.0 / norm3(c), c);
                assert!((dot3(c, f.nu) - 1.0).abs() < 1e-13);
                // Weingarten: nu_a = -k_a^b X_b
                let gi = f.g.inverse();
                for a in 0..2 {
                    for comp in 0..3 {
                        let mut acc = 0.0;
                        for b in 0..2 {
                            for c in 0..2 {
                                acc += f.k.get(a, b) * gi.get(b, c) * f.dx[c][comp];
                            }
                        }
                        assert!((acc + f.dnu[a][comp]).abs() < 1e-13);
                    }
                }
                assert!(f.g.det() > 0.0);
            }
        }
        let f = surfaces[0].frame(0.8, 0.4);
        assert!((f.mean + 2.0 / 1.3).abs() < 1e-14);
        assert!((f.gauss - 1.0 / 1.69).abs() < 1e-14);
        let f = surfaces[1].frame(0.8, 0.4);
        let rho = 2.0 + 0.5 * 0.8f64.cos();
        assert!((f.mean + 2.0 + 0.8f64.cos() / rho).abs() < 1e-14);
        assert!((f.gauss - 0.8f64.cos() / (0.5 * rho)).abs() < 1e-14);
    }

    #[test]
    fn sphere_quadrature_reproduces_area() {
        let s = ReferenceSurface::<f64>::sphere(1.0).unwrap();
        let g = sample_grid(&s, 64, 128).unwrap();
        let one = vec![1.0; g.len()];
        let a = g.integrate_reference(&one);
        assert!(((a - 4.0 * PI) / (4.0 * PI)).abs() < 1e-8);
        let k: Vec<f64> = g.frames().iter().map(|f| f.gauss).collect();
        assert!((g.integrate_reference(&k) - 4.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn torus_gauss_bonnet() {
        let t = ReferenceSurface::<f64>::torus(2.0, 0.5).unwrap();
        let g = sample_grid(&t, 64, 64).unwrap();
        let k: Vec<f64> = g.frames().iter().map(|f| f.gauss).collect();
        assert!(g.integrate_reference(&k).abs() < 1e-8);
        let one = vec![1.0; g.len()];
        assert!((g.integrate_reference(&one) - t.area()).abs() < 1e-10);
    }

    #[test]
    fn axisymmetric_grid_integrates_exactly() {
        let s = ReferenceSurface::<f64>::sphere(2.0).unwrap();
        let g = sample_axisymmetric(&s, 16).unwrap();
        let one = vec![1.0; g.len()];
        assert!((g.integrate_reference(&one) - s.area()).abs() < 1e-12);
    }

    #[test]
    fn rejects_coarse_grids() {
        let s = ReferenceSurface::<f64>::sphere(1.0).unwrap();
        assert!(sample_grid(&s, 4, 4).is_err());
        assert!(sample_grid(&s, 8, 9).is_err());
        let t = ReferenceSurface::<f64>::torus(2.0, 0.5).unwrap();
        assert!(sample_grid(&t, 9, 8).is_err());
    }

    #[test]
    fn weights_positive() {
        for n in 8..40 {
            assert!(fejer_weights(n).iter().all(|&w| w > 0.0));
        }
    }
}
