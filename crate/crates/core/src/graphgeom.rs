//! Pulled-back geometry of the normal graph `x + h(x) nu(x)` over a
//! reference surface.
//!
//! All tensors are expressed in the reference chart `(u, v)`. Curvature
//! follows the reference convention `k_ab = d_ab phi . nu_h` with the outward
//! normal, so `D/Dt dA = -w H dA` for outward normal speed `w`.

use crate::error::{Error, Result};
use crate::refsurf::{Grid, SurfaceKind};
use crate::scalar::{add3, axpy3, cross3, dot3, lit, norm3, scale3, Real, Sym2};
use crate::spectral::{Parity, ScalarJet};

/// Height values on a grid, tagged with the component they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField<T> {
    pub values: Vec<T>,
    pub component: usize,
}

impl<T: Real> HeightField<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self {
            values,
            component: 0,
        }
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self::new(vec![T::zero(); grid.len()])
    }

    pub fn sup_norm(&self) -> T {
        sup_norm(&self.values)
    }
}

pub fn sup_norm<T: Real>(f: &[T]) -> T {
    f.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Rejects `h` unless `|h| <= reach / 2` everywhere.
pub fn check_admissible<T: Real>(grid: &Grid<T>, h: &[T]) -> Result<()> {
    grid.check_len(h.len())?;
    let bound = grid.surface().reach() * lit(0.5);
    for (node, &x) in h.iter().enumerate() {
        if !(x.abs() <= bound) {
            return Err(Error::ReachViolation {
                value: crate::scalar::to_f64(x.abs()),
                bound: crate::scalar::to_f64(bound),
                node,
            });
        }
    }
    Ok(())
}

/// Embedded positions `x + h nu`.
pub fn embed<T: Real>(grid: &Grid<T>, h: &[T]) -> Result<Vec<[T; 3]>> {
    check_admissible(grid, h)?;
    Ok(grid
        .frames()
        .iter()
        .zip(h)
        .map(|(f, &hi)| axpy3(hi, f.nu, f.x))
        .collect())
}

/// Embedding and its first and second parameter derivatives at every node.
#[derive(Debug, Clone)]
pub struct EmbeddingJet<T> {
    pub p: Vec<[T; 3]>,
    pub dp: Vec<[[T; 3]; 2]>,
    pub ddp: Vec<[[T; 3]; 3]>,
}

impl<T: Real> EmbeddingJet<T> {
    /// Jet of `x + h nu`, exact in the reference fields and spectral in `h`.
    pub fn graph(grid: &Grid<T>, h: &[T], hj: &ScalarJet<T>) -> Self {
        let n = grid.len();
        let mut p = Vec::with_capacity(n);
        let mut dp = Vec::with_capacity(n);
        let mut ddp = Vec::with_capacity(n);
        for (i, f) in grid.frames().iter().enumerate() {
            let hv = h[i];
            let d = [hj.du[i], hj.dv[i]];
            let dd = [hj.duu[i], hj.duv[i], hj.dvv[i]];
            p.push(axpy3(hv, f.nu, f.x));
            let first = |a: usize| axpy3(d[a], f.nu, axpy3(hv, f.dnu[a], f.dx[a]));
            dp.push([first(0), first(1)]);
            let second = |s: usize, a: usize, b: usize| {
                let mut out = axpy3(hv, f.ddnu[s], f.ddx[s]);
                out = axpy3(d[a], f.dnu[b], out);
                out = axpy3(d[b], f.dnu[a], out);
                axpy3(dd[s], f.nu, out)
            };
            ddp.push([second(0, 0, 0), second(1, 0, 1), second(2, 1, 1)]);
        }
        Self { p, dp, ddp }
    }

    /// Jet obtained by spectral differentiation of each Cartesian coordinate.
    /// On an axisymmetric grid `p` must be a surface of revolution about the
    /// reference axis; its `v` derivatives are then rotations of `p`.
    pub fn spectral(grid: &Grid<T>, p: Vec<[T; 3]>) -> Self {
        if grid.is_axisymmetric() {
            return Self::revolved(grid, p);
        }
        let n = grid.len();
        let mut dp = vec![[[T::zero(); 3]; 2]; n];
        let mut ddp = vec![[[T::zero(); 3]; 3]; n];
        for c in 0..3 {
            let comp: Vec<T> = p.iter().map(|x| x[c]).collect();
            let j = grid.spectral().jet(&comp);
            for i in 0..n {
                dp[i][0][c] = j.du[i];
                dp[i][1][c] = j.dv[i];
                ddp[i][0][c] = j.duu[i];
                ddp[i][1][c] = j.duv[i];
                ddp[i][2][c] = j.dvv[i];
            }
        }
        Self { p, dp, ddp }
    }

    fn revolved(grid: &Grid<T>, p: Vec<[T; 3]>) -> Self {
        let n = grid.len();
        let c = grid.surface().center();
        let sphere = matches!(grid.surface().kind(), SurfaceKind::Sphere);
        let mut dp = vec![[[T::zero(); 3]; 2]; n];
        let mut ddp = vec![[[T::zero(); 3]; 3]; n];
        for k in 0..3 {
            // horizontal components flip sign through the poles
            let parity = if sphere && k < 2 { Parity::Odd } else { Parity::Even };
            let comp: Vec<T> = p.iter().map(|x| x[k]).collect();
            let d = grid.spectral().deriv_u(&comp, parity, &[1, 2]);
            for i in 0..n {
                dp[i][0][k] = d[0][i];
                ddp[i][0][k] = d[1][i];
            }
        }
        // d/dv is the infinitesimal rotation e_z x (.) about the axis
        let rot = |a: [T; 3]| [-a[1], a[0], T::zero()];
        for i in 0..n {
            let r = [p[i][0] - c[0], p[i][1] - c[1], p[i][2] - c[2]];
            dp[i][1] = rot(r);
            ddp[i][1] = rot(dp[i][0]);
            ddp[i][2] = rot(rot(r));
        }
        Self { p, dp, ddp }
    }

    /// Jet of `p + eps * q`.
    pub fn offset(&self, eps: T, q: &EmbeddingJet<T>) -> Self {
        let n = self.p.len();
        let mut out = self.clone();
        for i in 0..n {
            out.p[i] = axpy3(eps, q.p[i], self.p[i]);
            for a in 0..2 {
                out.dp[i][a] = axpy3(eps, q.dp[i][a], self.dp[i][a]);
            }
            for s in 0..3 {
                out.ddp[i][s] = axpy3(eps, q.ddp[i][s], self.ddp[i][s]);
            }
        }
        out
    }
}

/// Cached geometry of one graph component.
#[derive(Debug, Clone)]
pub struct GeometryState<'g, T: Real> {
    grid: &'g Grid<T>,
    pub h: Vec<T>,
    pub position: Vec<[T; 3]>,
    pub tangents: Vec<[[T; 3]; 2]>,
    /// Second parameter derivatives of the embedding (`uu`, `uv`, `vv`).
    pub second: Vec<[[T; 3]; 3]>,
    pub normal: Vec<[T; 3]>,
    pub g: Vec<Sym2<T>>,
    pub g_inv: Vec<Sym2<T>>,
    pub sqrt_g: Vec<T>,
    pub k: Vec<Sym2<T>>,
    /// `k^{ab} = g^{ac} k_cd g^{db}`.
    pub k_up: Vec<Sym2<T>>,
    pub mean: Vec<T>,
    pub gauss: Vec<T>,
    /// `christoffel[i][c]` holds `Gamma^c_{ab}` as a symmetric matrix in `(a, b)`.
    pub christoffel: Vec<[Sym2<T>; 2]>,
    /// `nu_h . nu` (cosine between graph and reference normals).
    pub tilt: Vec<T>,
    /// Quadrature weight times `sqrt(det g)`.
    pub area_weights: Vec<T>,
}

/// Geometry of `x + h nu` on `grid`.
pub fn pullback_geometry<'g, T: Real>(grid: &'g Grid<T>, h: &[T]) -> Result<GeometryState<'g, T>> {
    check_admissible(grid, h)?;
    let hj = grid.spectral().jet(h);
    let jet = EmbeddingJet::graph(grid, h, &hj);
    GeometryState::from_jet(grid, h.to_vec(), &jet)
}

impl<'g, T: Real> GeometryState<'g, T> {
    /// Geometry of an arbitrary embedding given by its jet. `h` is recorded
    /// as the chart coordinate but is not used to compute any field.
    pub fn from_jet(grid: &'g Grid<T>, h: Vec<T>, jet: &EmbeddingJet<T>) -> Result<Self> {
        let n = grid.len();
        grid.check_len(jet.p.len())?;
        let orient = grid.surface().orientation();
        let mut s = Self {
            grid,
            h,
            position: jet.p.clone(),
            tangents: jet.dp.clone(),
            second: jet.ddp.clone(),
            normal: Vec::with_capacity(n),
            g: Vec::with_capacity(n),
            g_inv: Vec::with_capacity(n),
            sqrt_g: Vec::with_capacity(n),
            k: Vec::with_capacity(n),
            k_up: Vec::with_capacity(n),
            mean: Vec::with_capacity(n),
            gauss: Vec::with_capacity(n),
            christoffel: Vec::with_capacity(n),
            tilt: Vec::with_capacity(n),
            area_weights: Vec::with_capacity(n),
        };
        for i in 0..n {
            let [pu, pv] = jet.dp[i];
            let g = Sym2::new(dot3(pu, pu), dot3(pu, pv), dot3(pv, pv));
            let det = g.det();
            if !(det > T::zero()) || !det.is_finite() {
                return Err(Error::DegenerateGeometry {
                    node: i,
                    det: crate::scalar::to_f64(det),
                });
            }
            let c = cross3(pu, pv);
            let nu = scale3(orient / norm3(c), c);
            let dd = jet.ddp[i];
            let k = Sym2::new(dot3(dd[0], nu), dot3(dd[1], nu), dot3(dd[2], nu));
            let gi = g.inverse();
            // Gamma_{ab,d} = P_ab . P_d, then raise d.
            let lower = |d: [T; 3]| Sym2::new(dot3(dd[0], d), dot3(dd[1], d), dot3(dd[2], d));
            let (l0, l1) = (lower(pu), lower(pv));
            let chr = [
                l0.scale(gi.xx).add(&l1.scale(gi.xy)),
                l0.scale(gi.xy).add(&l1.scale(gi.yy)),
            ];
            let sg = det.sqrt();
            s.tilt.push(dot3(nu, grid.frames()[i].nu));
            s.normal.push(nu);
            s.mean.push(gi.trace_with(&k));
            s.gauss.push(k.det() / det);
            s.k_up.push(k.congruence(&gi));
            s.k.push(k);
            s.g.push(g);
            s.g_inv.push(gi);
            s.sqrt_g.push(sg);
            s.christoffel.push(chr);
            s.area_weights.push(grid.weights()[i] * sg);
        }
        Ok(s)
    }

    /// Embedding jet this state was built from.
    pub fn embedding_jet(&self) -> EmbeddingJet<T> {
        EmbeddingJet {
            p: self.position.clone(),
            dp: self.tangents.clone(),
            ddp: self.second.clone(),
        }
    }

    pub fn grid(&self) -> &'g Grid<T> {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `int f dA` over this component.
    pub fn integrate(&self, f: &[T]) -> Result<T> {
        self.grid.check_len(f.len())?;
        Ok(self.integrate_unchecked(f))
    }

    pub(crate) fn integrate_unchecked(&self, f: &[T]) -> T {
        f.iter().zip(&self.area_weights).map(|(&a, &w)| a * w).sum()
    }

    /// `int f g dA`.
    pub fn inner(&self, f: &[T], g: &[T]) -> T {
        f.iter()
            .zip(g)
            .zip(&self.area_weights)
            .map(|((&a, &b), &w)| a * b * w)
            .sum()
    }

    pub fn norm(&self, f: &[T]) -> T {
        self.inner(f, f).sqrt()
    }

    pub fn area(&self) -> T {
        self.area_weights.iter().copied().sum()
    }

    /// Enclosed volume `(1/3) int x . nu_h dA`.
    pub fn volume(&self) -> T {
        let third = lit::<T>(1.0 / 3.0);
        self.position
            .iter()
            .zip(&self.normal)
            .zip(&self.area_weights)
            .map(|((x, n), &w)| dot3(*x, *n) * w)
            .sum::<T>()
            * third
    }

    /// Spectral jet of a scalar field.
    pub fn jet(&self, f: &[T]) -> ScalarJet<T> {
        self.grid.spectral().jet(f)
    }

    /// Covariant Hessian `f_{;ab} = f_{,ab} - Gamma^c_ab f_{,c}` from a jet.
    pub fn covariant_hessian(&self, j: &ScalarJet<T>) -> Vec<Sym2<T>> {
        (0..self.len())
            .map(|i| {
                let c = &self.christoffel[i];
                j.hessian(i)
                    .sub(&c[0].scale(j.du[i]))
                    .sub(&c[1].scale(j.dv[i]))
            })
            .collect()
    }

    /// `Delta_g f` from a jet.
    pub fn laplacian_from_jet(&self, j: &ScalarJet<T>) -> Vec<T> {
        self.covariant_hessian(j)
            .iter()
            .zip(&self.g_inv)
            .map(|(hs, gi)| gi.trace_with(hs))
            .collect()
    }

    /// Laplace-Beltrami operator of the graph metric.
    pub fn laplace_beltrami(&self, f: &[T]) -> Result<Vec<T>> {
        self.grid.check_len(f.len())?;
        Ok(self.laplacian_from_jet(&self.jet(f)))
    }

    /// `g^{ab} f_a k_b` for two jets.
    pub fn gradient_dot(&self, a: &ScalarJet<T>, b: &ScalarJet<T>) -> Vec<T> {
        (0..self.len())
            .map(|i| self.g_inv[i].apply(a.gradient(i), b.gradient(i)))
            .collect()
    }

    /// Tangent basis of the parallel surface `x + h nu` (without the `h_a nu` part).
    pub fn parallel_tangents(&self, i: usize) -> [[T; 3]; 2] {
        let f = &self.grid.frames()[i];
        let h = self.h[i];
        [axpy3(h, f.dnu[0], f.dx[0]), axpy3(h, f.dnu[1], f.dx[1])]
    }

    /// Metric of the parallel surface, `g - 2 h k + h^2 k g^{-1} k`.
    pub fn parallel_metric(&self, i: usize) -> Sym2<T> {
        let f = &self.grid.frames()[i];
        let h = self.h[i];
        let gi = f.g.inverse();
        f.g.sub(&f.k.scale(lit::<T>(2.0) * h))
            .add(&f.k.sandwich(&gi).scale(h * h))
    }

    /// Graph normal from the quotient `(nu - grad h) / sqrt(1 + |grad h|^2)`
    /// where the gradient and its norm both use the parallel-surface metric.
    pub fn quotient_normal(&self, i: usize, hu: T, hv: T) -> [T; 3] {
        let f = &self.grid.frames()[i];
        let gb = self.parallel_metric(i);
        let gbi = gb.inverse();
        let a = self.parallel_tangents(i);
        let up = gbi.mul_vec([hu, hv]);
        let grad = add3(scale3(up[0], a[0]), scale3(up[1], a[1]));
        let norm2 = gbi.apply([hu, hv], [hu, hv]);
        let num = add3(f.nu, scale3(-T::one(), grad));
        scale3(T::one() / (T::one() + norm2).sqrt(), num)
    }
}

/// Geometry of every component of a multi-component configuration.
pub fn pullback_components<'g, T: Real>(
    grids: &'g [Grid<T>],
    heights: &[Vec<T>],
) -> Result<Vec<GeometryState<'g, T>>> {
    if grids.len() != heights.len() {
        return Err(Error::GridMismatch {
            expected: grids.len(),
            got: heights.len(),
        });
    }
    grids
        .iter()
        .zip(heights)
        .map(|(g, h)| pullback_geometry(g, h))
        .collect()
}

/// Per-component integrals of `fields[i]` over `geoms[i]`.
pub fn integrate_components<T: Real>(geoms: &[GeometryState<'_, T>], fields: &[Vec<T>]) -> Result<Vec<T>> {
    geoms
        .iter()
        .zip(fields)
        .map(|(g, f)| g.integrate(f))
        .collect()
}
