//! Central-difference sweep harness shared by the integration tests.
#![allow(dead_code)]

use helfrich::graphgeom::{pullback_geometry, GeometryState};
use helfrich::refsurf::{sample_grid, Grid, ReferenceSurface};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative error below which a difference quotient counts as exact.
pub const EXACT_TOL: f64 = 1e-10;

/// Outcome of an epsilon sweep.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub eps: Vec<f64>,
    /// Relative error of each central difference against the implementation.
    pub rel_err: Vec<f64>,
    /// Order observed from successive differences of the three largest eps.
    pub order: f64,
    /// Largest relative change between successive difference quotients.
    pub spread: f64,
}

impl Sweep {
    pub fn best(&self) -> f64 {
        self.rel_err.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// True when the difference quotients do not depend on eps beyond
    /// roundoff: the quantity is quadratic in eps along the path and there
    /// is no truncation error to measure an order from.
    pub fn exact(&self) -> bool {
        self.spread <= EXACT_TOL
    }

    pub fn passes(&self, min_order: f64, tol: f64) -> bool {
        self.best() <= tol && (self.order >= min_order || self.exact())
    }

    pub fn describe(&self) -> String {
        if self.exact() {
            format!("no truncation error (spread {:.1e}), rel err {:.2e}", self.spread, self.best())
        } else {
            format!("order {:.3}, best rel err {:.2e}", self.order, self.best())
        }
    }
}

/// Weighted L2 norm of `a - b`.
pub fn wdist(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(w)
        .map(|((x, y), q)| (x - y) * (x - y) * q)
        .sum::<f64>()
        .sqrt()
}

pub fn wnorm(a: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(w).map(|(x, q)| x * x * q).sum::<f64>().sqrt()
}

/// Sweeps `eps0 / 2^k`, `k = 0..levels`, comparing the vector-valued
/// difference quotient `fd(eps)` against `exact` in the weighted norm.
pub fn sweep_field(
    exact: &[f64],
    weights: &[f64],
    eps0: f64,
    levels: usize,
    fd: impl Fn(f64) -> Vec<f64>,
) -> Sweep {
    sweep_with_scale(exact, weights, wnorm(exact, weights), eps0, levels, fd)
}

fn sweep_with_scale(
    exact: &[f64],
    weights: &[f64],
    scale: f64,
    eps0: f64,
    levels: usize,
    fd: impl Fn(f64) -> Vec<f64>,
) -> Sweep {
    let eps: Vec<f64> = (0..levels).map(|k| eps0 / 2f64.powi(k as i32)).collect();
    let quotients: Vec<Vec<f64>> = eps.iter().map(|&e| fd(e)).collect();
    let scale = scale.max(f64::MIN_POSITIVE);
    let rel_err = quotients
        .iter()
        .map(|q| wdist(q, exact, weights) / scale)
        .collect();
    let d1 = wdist(&quotients[0], &quotients[1], weights);
    let d2 = wdist(&quotients[1], &quotients[2], weights);
    let spread = quotients
        .windows(2)
        .map(|p| wdist(&p[0], &p[1], weights) / scale)
        .fold(0.0, f64::max);
    Sweep {
        eps,
        rel_err,
        order: (d1 / d2).log2(),
        spread,
    }
}

pub fn sweep_scalar(exact: f64, eps0: f64, levels: usize, fd: impl Fn(f64) -> f64) -> Sweep {
    sweep_field(&[exact], &[1.0], eps0, levels, |e| vec![fd(e)])
}

/// Scalar sweep with errors measured relative to `max(|exact|, scale)`.
/// Linear functionals use the Cauchy-Schwarz bound `|density| |w|` as
/// scale so that directions with a vanishing derivative stay meaningful.
pub fn sweep_scalar_scaled(
    exact: f64,
    scale: f64,
    eps0: f64,
    levels: usize,
    fd: impl Fn(f64) -> f64,
) -> Sweep {
    sweep_with_scale(&[exact], &[1.0], scale.max(exact.abs()), eps0, levels, |e| vec![fd(e)])
}

pub fn unit_sphere() -> ReferenceSurface<f64> {
    ReferenceSurface::sphere(1.0).unwrap()
}

pub fn torus(a: f64, r: f64) -> ReferenceSurface<f64> {
    ReferenceSurface::torus(a, r).unwrap()
}

pub fn grid(s: &ReferenceSurface<f64>, n_u: usize, n_v: usize) -> Grid<f64> {
    sample_grid(s, n_u, n_v).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random smooth field: a handful of low Fourier modes in both parameters.
/// On the sphere the modes are built from Cartesian monomials so that the
/// field is smooth through the poles.
pub fn random_smooth(grid: &Grid<f64>, rng: &mut ChaCha8Rng, amplitude: f64) -> Vec<f64> {
    let sphere = matches!(grid.surface().kind(), helfrich::refsurf::SurfaceKind::Sphere);
    let axi = grid.is_axisymmetric();
    let mut terms = Vec::new();
    for _ in 0..6 {
        let c: f64 = rng.gen_range(-1.0..1.0);
        let mu = rng.gen_range(0..3usize);
        let mv = if axi { 0 } else { rng.gen_range(0..3usize) };
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        terms.push((c, mu, mv, phase));
    }
    let f: Vec<f64> = grid.sample(|u, v| {
        terms
            .iter()
            .map(|&(c, mu, mv, ph)| {
                if sphere {
                    // sin^m(theta) e^{i m phi} times a polynomial in cos(theta)
                    c * u.sin().powi(mv as i32) * (mv as f64 * v + ph).cos() * u.cos().powi(mu as i32)
                } else {
                    c * (mu as f64 * u + ph).cos() * (mv as f64 * v + 0.7 * ph).sin()
                }
            })
            .sum()
    });
    let m = f.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
    f.iter().map(|x| x * amplitude / m).collect()
}

pub fn geometry<'g>(grid: &'g Grid<f64>, h: &[f64]) -> GeometryState<'g, f64> {
    pullback_geometry(grid, h).unwrap()
}

/// Prints a pass/fail line and returns the verdict.
pub fn report(label: &str, ok: bool, detail: &str) -> bool {
    println!("[{}] {label}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}
