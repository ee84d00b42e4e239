//! Canham-Helfrich energy, its L2 gradient, area/volume constraints and
//! the least-squares Helfrich multiplier fit.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphgeom::{pullback_geometry, GeometryState};
use crate::linalg::gram_solve;
use crate::refsurf::Grid;
use crate::scalar::{lit, to_f64, Real};

/// Bending rigidity and spontaneous curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsParams<T> {
    pub kappa: T,
    pub c0: T,
}

impl<T: Real> PhysicsParams<T> {
    pub fn new(kappa: T, c0: T) -> Result<Self> {
        if !(kappa > T::zero()) || !kappa.is_finite() || !c0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bending rigidity must be positive and finite, got {kappa}"
            )));
        }
        Ok(Self { kappa, c0 })
    }
}

/// Relative tolerance of the isoperimetric equality used to flag round spheres.
pub const ROUND_SPHERE_TOL: f64 = 1e-8;

/// Target area and volume of one component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentTarget<T> {
    pub area: T,
    pub volume: T,
    pub round_sphere: bool,
}

impl<T: Real> ComponentTarget<T> {
    pub fn new(area: T, volume: T) -> Result<Self> {
        if !(area > T::zero()) || !(volume > T::zero()) {
            return Err(Error::InfeasibleTargets(format!(
                "area and volume must be positive, got A = {area}, V = {volume}"
            )));
        }
        let (a, v) = (to_f64(area), to_f64(volume));
        let lhs = a.powi(3);
        let rhs = 36.0 * PI * v * v;
        let round_sphere = ((lhs - rhs) / lhs).abs() <= ROUND_SPHERE_TOL;
        if !round_sphere && lhs < rhs {
            return Err(Error::InfeasibleTargets(format!(
                "A^3 = {lhs:e} < 36 pi V^2 = {rhs:e} violates the isoperimetric inequality"
            )));
        }
        Ok(Self {
            area,
            volume,
            round_sphere,
        })
    }
}

/// Per-component constraint targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintTargets<T> {
    pub components: Vec<ComponentTarget<T>>,
}

impl<T: Real> ConstraintTargets<T> {
    pub fn single(area: T, volume: T) -> Result<Self> {
        Ok(Self {
            components: vec![ComponentTarget::new(area, volume)?],
        })
    }

    /// Targets equal to the current area and volume of each geometry.
    pub fn from_geometry(geoms: &[GeometryState<'_, T>]) -> Result<Self> {
        Ok(Self {
            components: geoms
                .iter()
                .map(|g| ComponentTarget::new(g.area(), g.volume()))
                .collect::<Result<_>>()?,
        })
    }
}

/// `(kappa / 2) int (H - C0)^2 dA` for one component.
pub fn energy<T: Real>(geom: &GeometryState<'_, T>, params: &PhysicsParams<T>) -> T {
    let half = lit::<T>(0.5);
    let dens: Vec<T> = geom
        .mean
        .iter()
        .map(|&h| {
            let d = h - params.c0;
            d * d
        })
        .collect();
    half * params.kappa * geom.integrate_unchecked(&dens)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport<T> {
    pub components: Vec<T>,
    pub total: T,
}

pub fn energy_components<T: Real>(
    geoms: &[GeometryState<'_, T>],
    params: &PhysicsParams<T>,
) -> EnergyReport<T> {
    let components: Vec<T> = geoms.iter().map(|g| energy(g, params)).collect();
    let total = components.iter().copied().sum();
    EnergyReport { components, total }
}

/// `kappa (Delta H + H (H^2/2 - 2K) + C0 (2K - H C0 / 2))`.
pub fn l2_gradient<T: Real>(geom: &GeometryState<'_, T>, params: &PhysicsParams<T>) -> Vec<T> {
    let lap_h = geom.laplacian_from_jet(&geom.jet(&geom.mean));
    let (half, two) = (lit::<T>(0.5), lit::<T>(2.0));
    let c0 = params.c0;
    (0..geom.len())
        .map(|i| {
            let (h, k) = (geom.mean[i], geom.gauss[i]);
            params.kappa
                * (lap_h[i] + h * (half * h * h - two * k) + c0 * (two * k - half * h * c0))
        })
        .collect()
}

/// Density `grad * tilt * sqrt(g)` such that the derivative of the energy
/// along the chart direction `h + eps w` is `sum density * w * weight`.
pub fn chart_differential_density<T: Real>(
    geom: &GeometryState<'_, T>,
    grad: &[T],
) -> Vec<T> {
    (0..geom.len())
        .map(|i| grad[i] * geom.tilt[i] * geom.sqrt_g[i])
        .collect()
}

/// Derivative of the energy along the chart direction `w`.
pub fn chart_differential<T: Real>(geom: &GeometryState<'_, T>, grad: &[T], w: &[T]) -> T {
    let dens = chart_differential_density(geom, grad);
    dens.iter()
        .zip(w)
        .zip(geom.grid().weights())
        .map(|((&d, &wi), &q)| d * wi * q)
        .sum()
}

/// Area and enclosed volume of the graph over `grid`.
pub fn area_volume<T: Real>(grid: &Grid<T>, h: &[T]) -> Result<(T, T)> {
    let geom = pullback_geometry(grid, h)?;
    Ok((geom.area(), geom.volume()))
}

/// Densities of the constraint differentials with respect to outward
/// normal speed: `dA(w) = int w * area dA`, `dV(w) = int w * volume dA`.
#[derive(Debug, Clone)]
pub struct ConstraintDifferentials<T> {
    pub area: Vec<T>,
    pub volume: Vec<T>,
}

pub fn constraint_differentials<T: Real>(geom: &GeometryState<'_, T>) -> ConstraintDifferentials<T> {
    ConstraintDifferentials {
        area: geom.mean.iter().map(|&h| -h).collect(),
        volume: vec![T::one(); geom.len()],
    }
}

impl<T: Real> ConstraintDifferentials<T> {
    pub fn d_area(&self, geom: &GeometryState<'_, T>, w: &[T]) -> T {
        geom.inner(&self.area, w)
    }

    pub fn d_volume(&self, geom: &GeometryState<'_, T>, w: &[T]) -> T {
        geom.inner(&self.volume, w)
    }
}

/// Least-squares Lagrange multipliers of the Helfrich equation
/// `grad F + pressure + tension * H = 0`.
#[derive(Debug, Clone)]
pub struct MultiplierFit<T> {
    pub pressure: T,
    pub tension: T,
    pub residual: Vec<T>,
    pub residual_norm: T,
    /// Rank of the `{1, H}` Gram system (1 on round spheres).
    pub rank: usize,
}

/// Rank tolerance (unit-diagonal scaling) of the `{1, H}` Gram system.
pub const MULTIPLIER_RANK_TOL: f64 = 1e-10;

pub fn helfrich_residual<T: Real>(
    geom: &GeometryState<'_, T>,
    params: &PhysicsParams<T>,
) -> MultiplierFit<T> {
    let grad = l2_gradient(geom, params);
    fit_multipliers(geom, &grad)
}

/// Fits `(pressure, tension)` to an already computed gradient.
pub fn fit_multipliers<T: Real>(geom: &GeometryState<'_, T>, grad: &[T]) -> MultiplierFit<T> {
    let one = vec![T::one(); geom.len()];
    let h = &geom.mean;
    let gram = [
        to_f64(geom.inner(&one, &one)),
        to_f64(geom.inner(&one, h)),
        to_f64(geom.inner(h, &one)),
        to_f64(geom.inner(h, h)),
    ];
    let rhs = [-to_f64(geom.inner(&one, grad)), -to_f64(geom.inner(h, grad))];
    let (x, rank) = gram_solve(&gram, 2, &rhs, MULTIPLIER_RANK_TOL);
    let (p, q) = (lit::<T>(x[0]), lit::<T>(x[1]));
    let residual: Vec<T> = (0..geom.len()).map(|i| grad[i] + p + q * h[i]).collect();
    let residual_norm = geom.norm(&residual);
    MultiplierFit {
        pressure: p,
        tension: q,
        residual,
        residual_norm,
        rank,
    }
}


#[cfg(test)]
mod fd_tests {
    use super::*;
    use crate::refsurf::{sample_grid, ReferenceSurface};

    fn fd_check(grid: &Grid<f64>, h: &[f64], w: &[f64], p: &PhysicsParams<f64>) -> (f64, f64) {
        let geom = pullback_geometry(grid, h).unwrap();
        let grad = l2_gradient(&geom, p);
        let exact = chart_differential(&geom, &grad, w);
        let f = |eps: f64| {
            let hh: Vec<f64> = h.iter().zip(w).map(|(a, b)| a + eps * b).collect();
            energy(&pullback_geometry(grid, &hh).unwrap(), p)
        };
        let eps = 1e-4;
        let fd = (f(eps) - f(-eps)) / (2.0 * eps);
        (exact, fd)
    }

    #[test]
    fn gradient_matches_central_difference() {
        let t = ReferenceSurface::<f64>::torus(2.0, 0.5).unwrap();
        let grid = sample_grid(&t, 48, 48).unwrap();
        let h = grid.sample(|u, v| 0.04 * (u + 0.2).sin() * (v).cos() + 0.02 * (2.0 * v).sin());
        let w = grid.sample(|u, v| (u).cos() * (2.0 * v + 0.3).sin() + 0.5 * (u - v).sin());
        let p = PhysicsParams::new(1.3, 0.4).unwrap();
        let (e, fd) = fd_check(&grid, &h, &w, &p);
        assert!(((e - fd) / fd).abs() < 1e-6, "{e} {fd}");

        let s = ReferenceSurface::<f64>::sphere(1.0).unwrap();
        let grid = sample_grid(&s, 32, 64).unwrap();
        let h = grid.sample(|u, v| 0.05 * u.cos() + 0.04 * u.sin().powi(2) * (2.0 * v).cos());
        let w = grid.sample(|u, v| u.sin() * v.sin() + 0.3 * (2.0 * u).cos());
        let (e, fd) = fd_check(&grid, &h, &w, &p);
        assert!(((e - fd) / fd).abs() < 1e-6, "{e} {fd}");
    }
}
