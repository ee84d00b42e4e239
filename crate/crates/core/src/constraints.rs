//! Projection onto the linearized area/volume constraints and Newton
//! restoration of exact constraint values after a step.

use crate::energy::ComponentTarget;
use crate::error::{Error, Result};
use crate::graphgeom::{pullback_geometry, GeometryState};
use crate::refsurf::Grid;
use crate::scalar::{lit, to_f64, Real};

/// Rank tolerance of constraint-normal Gram systems (unit-diagonal scaling).
pub const PROJECTION_RANK_TOL: f64 = 1e-10;

/// Which constraints act on a component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintSet {
    /// Area and volume are both fixed.
    AreaVolume,
    /// Only area is fixed; used for round-sphere targets where area and
    /// volume cannot be prescribed independently.
    AreaOnly,
}

impl ConstraintSet {
    pub fn for_target<T: Real>(t: &ComponentTarget<T>) -> Self {
        if t.round_sphere {
            ConstraintSet::AreaOnly
        } else {
            ConstraintSet::AreaVolume
        }
    }
}

/// L2 densities of the active constraint differentials.
pub fn constraint_normals<T: Real>(geom: &GeometryState<'_, T>, set: ConstraintSet) -> Vec<Vec<T>> {
    let h = geom.mean.clone();
    match set {
        ConstraintSet::AreaVolume => vec![vec![T::one(); geom.len()], h],
        ConstraintSet::AreaOnly => vec![h],
    }
}

/// L2(dA)-orthogonal projector onto the complement of a family of fields.
/// The family is orthonormalized once (Gram-Schmidt, applied twice), which
/// stays accurate when `1` and `H` are nearly parallel.
#[derive(Debug, Clone)]
pub struct Projector<T> {
    normals: Vec<Vec<T>>,
    basis: Vec<Vec<T>>,
}

impl<T: Real> Projector<T> {
    pub fn new(geom: &GeometryState<'_, T>, normals: Vec<Vec<T>>) -> Self {
        // a direction is dependent when its Gram eigenvalue share is below the tolerance
        let keep = PROJECTION_RANK_TOL.sqrt();
        let mut basis: Vec<Vec<T>> = Vec::new();
        for n in &normals {
            let n0 = to_f64(geom.norm(n));
            let mut v = n.clone();
            for _ in 0..2 {
                for q in &basis {
                    let c = geom.inner(q, &v);
                    v.iter_mut().zip(q).for_each(|(a, &b)| *a -= c * b);
                }
            }
            let nv = to_f64(geom.norm(&v));
            if n0 > 0.0 && nv > keep * n0 {
                let s = lit::<T>(1.0 / nv);
                basis.push(v.into_iter().map(|x| x * s).collect());
            }
        }
        Self { normals, basis }
    }

    pub fn for_set(geom: &GeometryState<'_, T>, set: ConstraintSet) -> Self {
        Self::new(geom, constraint_normals(geom, set))
    }

    pub fn apply(&self, geom: &GeometryState<'_, T>, w: &[T]) -> Vec<T> {
        let mut out = w.to_vec();
        for _ in 0..2 {
            for q in &self.basis {
                let c = geom.inner(q, &out);
                out.iter_mut().zip(q).for_each(|(a, &b)| *a -= c * b);
            }
        }
        out
    }

    pub fn normals(&self) -> &[Vec<T>] {
        &self.normals
    }

    /// Numerical rank of the normal family.
    pub fn rank(&self) -> usize {
        self.basis.len()
    }
}

/// Projection of `w` onto `{int w dA = 0, int w H dA = 0}`.
pub fn project_tangent<T: Real>(geom: &GeometryState<'_, T>, w: &[T]) -> Result<Vec<T>> {
    geom.grid().check_len(w.len())?;
    Ok(Projector::for_set(geom, ConstraintSet::AreaVolume).apply(geom, w))
}

/// Newton options for [`restore_constraints`].
#[derive(Debug, Clone, Copy)]
pub struct RestoreOptions {
    /// Relative tolerance on area and volume.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl RestoreOptions {
    pub fn for_scalar<T: Real>() -> Self {
        Self {
            rel_tol: (100.0 * to_f64(T::epsilon())).max(1e-13),
            max_iter: 30,
        }
    }
}

/// Relative deviation of area (and volume, when constrained) from the targets.
pub fn constraint_residual<T: Real>(
    geom: &GeometryState<'_, T>,
    target: &ComponentTarget<T>,
    set: ConstraintSet,
) -> Vec<f64> {
    let ra = to_f64((geom.area() - target.area) / target.area);
    match set {
        ConstraintSet::AreaVolume => vec![ra, to_f64((geom.volume() - target.volume) / target.volume)],
        ConstraintSet::AreaOnly => vec![ra],
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Returns `h + sum c_j b_j` with `b = {1, H(h)}` (or `{1}` for area-only
/// components) such that area and volume match `target`.
pub fn restore_constraints<T: Real>(
    grid: &Grid<T>,
    h: &[T],
    target: &ComponentTarget<T>,
) -> Result<Vec<T>> {
    restore_with(grid, h, target, ConstraintSet::for_target(target), RestoreOptions::for_scalar::<T>())
}

pub fn restore_with<T: Real>(
    grid: &Grid<T>,
    h: &[T],
    target: &ComponentTarget<T>,
    set: ConstraintSet,
    opts: RestoreOptions,
) -> Result<Vec<T>> {
    let geom0 = pullback_geometry(grid, h)?;
    let mut res = constraint_residual(&geom0, target, set);
    if max_abs(&res) <= opts.rel_tol {
        return Ok(h.to_vec());
    }
    let basis: Vec<Vec<T>> = match set {
        ConstraintSet::AreaVolume => vec![vec![T::one(); h.len()], geom0.mean.clone()],
        ConstraintSet::AreaOnly => vec![vec![T::one(); h.len()]],
    };
    let k = basis.len();
    let mut coeff = vec![0.0f64; k];
    let mut geom = geom0;
    for _ in 0..opts.max_iter {
        // Jacobian rows: d(area)/dc_j = -int b_j tilt H dA, d(vol)/dc_j = int b_j tilt dA
        let mut jac = vec![0.0; k * k];
        for (j, b) in basis.iter().enumerate() {
            let speed: Vec<T> = b.iter().zip(&geom.tilt).map(|(&x, &t)| x * t).collect();
            let da = -to_f64(geom.inner(&speed, &geom.mean)) / to_f64(target.area);
            jac[j] = da;
            if k == 2 {
                jac[k + j] = to_f64(geom.integrate_unchecked(&speed)) / to_f64(target.volume);
            }
        }
        let step = solve_small(&jac, k, &res)?;
        for (c, s) in coeff.iter_mut().zip(&step) {
            *c -= s;
        }
        let mut cur = h.to_vec();
        for (c, b) in coeff.iter().zip(&basis) {
            let c = lit::<T>(*c);
            for (x, &bx) in cur.iter_mut().zip(b) {
                *x += c * bx;
            }
        }
        geom = pullback_geometry(grid, &cur)?;
        res = constraint_residual(&geom, target, set);
        if max_abs(&res) <= opts.rel_tol {
            return Ok(cur);
        }
    }
    Err(Error::NewtonNonConvergence {
        iterations: opts.max_iter,
        residual: max_abs(&res),
    })
}

fn solve_small(a: &[f64], k: usize, b: &[f64]) -> Result<Vec<f64>> {
    match k {
        1 => {
            if a[0] == 0.0 {
                return Err(Error::LinearSolve("singular constraint Jacobian".into()));
            }
            Ok(vec![b[0] / a[0]])
        }
        2 => {
            let det = a[0] * a[3] - a[1] * a[2];
            let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if det.abs() <= 1e-14 * scale * scale {
                return Err(Error::LinearSolve("singular constraint Jacobian".into()));
            }
            Ok(vec![(a[3] * b[0] - a[1] * b[1]) / det, (a[0] * b[1] - a[2] * b[0]) / det])
        }
        _ => unreachable!("at most two constraints per component"),
    }
}

/// Restores every component independently.
pub fn restore_components<T: Real>(
    grids: &[Grid<T>],
    heights: &[Vec<T>],
    targets: &[ComponentTarget<T>],
) -> Result<Vec<Vec<T>>> {
    grids
        .iter()
        .zip(heights)
        .zip(targets)
        .map(|((g, h), t)| restore_constraints(g, h, t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refsurf::{sample_grid, ReferenceSurface};
    use std::f64::consts::PI;

    #[test]
    fn sphere_projection_examples() {
        let grid = sample_grid(&ReferenceSurface::<f64>::sphere(1.0).unwrap(), 16, 32).unwrap();
        let geom = pullback_geometry(&grid, &vec![0.0; grid.len()]).unwrap();
        let p = project_tangent(&geom, &vec![1.0; grid.len()]).unwrap();
        assert!(p.iter().all(|x| x.abs() < 1e-12));
        let c = grid.sample(|u, _| u.cos());
        let p = project_tangent(&geom, &c).unwrap();
        assert!(p.iter().zip(&c).all(|(a, b)| (a - b).abs() < 1e-12));
        assert_eq!(Projector::for_set(&geom, ConstraintSet::AreaVolume).rank(), 1);
    }

    #[test]
    fn torus_projection_is_idempotent_and_feasible() {
        let grid = sample_grid(&ReferenceSurface::<f64>::torus(2.0, 0.5).unwrap(), 24, 24).unwrap();
        let h = grid.sample(|u, v| 0.03 * (u + v).sin());
        let geom = pullback_geometry(&grid, &h).unwrap();
        let w = grid.sample(|u, v| 1.0 + u.cos() * (2.0 * v).sin() + (3.0 * u).cos());
        let p = project_tangent(&geom, &w).unwrap();
        let wn = geom.norm(&w);
        assert!(geom.integrate(&p).unwrap().abs() < 1e-10 * wn);
        assert!(geom.inner(&p, &geom.mean).abs() < 1e-10 * wn);
        let pp = project_tangent(&geom, &p).unwrap();
        let d: Vec<f64> = pp.iter().zip(&p).map(|(a, b)| a - b).collect();
        assert!(geom.norm(&d) < 1e-12 * wn);
    }

    #[test]
    fn offset_sphere_restores_to_unit_sphere() {
        let s = ReferenceSurface::<f64>::sphere(1.0).unwrap();
        let grid = sample_grid(&s, 16, 32).unwrap();
        let target = ComponentTarget::new(s.area(), s.volume()).unwrap();
        assert!(target.round_sphere);
        let out = restore_constraints(&grid, &vec![0.1; grid.len()], &target).unwrap();
        assert!(out.iter().all(|x| x.abs() < 1e-10));
        // closed form: A(c) = 4 pi (1 + c)^2
        let a = 4.0 * PI * (1.0 + out[0]).powi(2);
        assert!((a - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn feasible_input_is_a_fixed_point() {
        let t = ReferenceSurface::<f64>::torus(2.0, 0.5).unwrap();
        let grid = sample_grid(&t, 24, 24).unwrap();
        let h = vec![0.0; grid.len()];
        let geom = pullback_geometry(&grid, &h).unwrap();
        let target = ComponentTarget::new(geom.area(), geom.volume()).unwrap();
        assert_eq!(restore_constraints(&grid, &h, &target).unwrap(), h);
    }

    #[test]
    fn torus_restoration() {
        let t = ReferenceSurface::<f64>::torus(2.0, 0.5).unwrap();
        let grid = sample_grid(&t, 32, 32).unwrap();
        let geom0 = pullback_geometry(&grid, &vec![0.0; grid.len()]).unwrap();
        let target = ComponentTarget::new(geom0.area(), geom0.volume()).unwrap();
        let h = grid.sample(|_, v| 0.05 * (2.0 * v).cos());
        let before = constraint_residual(&pullback_geometry(&grid, &h).unwrap(), &target, ConstraintSet::AreaVolume);
        let out = restore_constraints(&grid, &h, &target).unwrap();
        let geom = pullback_geometry(&grid, &out).unwrap();
        assert!(((geom.area() - target.area) / target.area).abs() < 1e-10);
        assert!(((geom.volume() - target.volume) / target.volume).abs() < 1e-10);
        let diff = out.iter().zip(&h).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 10.0 * max_abs(&before));
    }
}
