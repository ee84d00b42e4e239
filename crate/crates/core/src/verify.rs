//! Runtime self-checks behind the `verify` subcommand: closed-surface
//! identities and central-difference checks of every variational formula.

use crate::config::smooth_random_field;
use crate::constraints::{project_tangent, restore_constraints};
use crate::energy::{
    area_volume, chart_differential, constraint_differentials, energy, l2_gradient, ComponentTarget, PhysicsParams,
};
use crate::error::Result;
use crate::graphgeom::{pullback_geometry, GeometryState};
use crate::hessian::{
    displaced_geometry, linearized_gradient, material_derivatives, normal_displacement_jet, second_variation,
    MaterialDerivatives,
};
use crate::refsurf::Grid;
use crate::scalar::Sym2;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: String, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

/// Relative errors of central differences at `eps0 / 2^k`.
struct Sweep {
    errors: Vec<f64>,
    order: f64,
    /// Largest relative change between successive quotients; tiny when the
    /// quotient carries no truncation error.
    spread: f64,
}

const MIN_ORDER: f64 = 1.9;
const EXACT_SPREAD: f64 = 1e-10;

impl Sweep {
    fn run(exact: &[f64], weights: &[f64], scale: f64, eps0: f64, fd: impl Fn(f64) -> Vec<f64>) -> Self {
        let dist = |a: &[f64], b: &[f64]| {
            a.iter().zip(b).zip(weights).map(|((x, y), w)| (x - y) * (x - y) * w).sum::<f64>().sqrt()
        };
        let q: Vec<Vec<f64>> = (0..6).map(|k| fd(eps0 / 2f64.powi(k))).collect();
        let scale = scale.max(f64::MIN_POSITIVE);
        let errors = q.iter().map(|x| dist(x, exact) / scale).collect();
        let order = (dist(&q[0], &q[1]) / dist(&q[1], &q[2])).log2();
        let spread = q.windows(2).map(|p| dist(&p[0], &p[1]) / scale).fold(0.0, f64::max);
        Self { errors, order, spread }
    }

    fn best(&self) -> f64 {
        self.errors.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn verdict(&self, tol: f64) -> (bool, String) {
        let exact = self.spread <= EXACT_SPREAD;
        let ok = self.best() <= tol && (exact || self.order >= MIN_ORDER);
        let detail = if exact {
            format!("exact quotient, rel err {:.2e} (tol {tol:.0e})", self.best())
        } else {
            format!("order {:.2}, rel err {:.2e} (tol {tol:.0e})", self.order, self.best())
        };
        (ok, detail)
    }
}

fn sym_parts(s: &[Sym2<f64>]) -> Vec<f64> {
    s.iter().flat_map(|t| [t.xx, t.xy, t.yy]).collect()
}

fn geometric_fields(geom: &GeometryState<'_, f64>) -> Result<Vec<Vec<f64>>> {
    let chr: Vec<Sym2<f64>> = geom.christoffel.iter().flat_map(|c| [c[0], c[1]]).collect();
    Ok(vec![
        sym_parts(&geom.g),
        sym_parts(&geom.g_inv),
        sym_parts(&geom.k),
        sym_parts(&geom.k_up),
        geom.sqrt_g.clone(),
        geom.mean.clone(),
        geom.gauss.clone(),
        sym_parts(&chr),
        geom.laplace_beltrami(&geom.mean)?,
    ])
}

fn rates(md: &MaterialDerivatives<f64>) -> Vec<Vec<f64>> {
    let chr: Vec<Sym2<f64>> = md.christoffel.iter().flat_map(|c| [c[0], c[1]]).collect();
    vec![
        sym_parts(&md.g),
        sym_parts(&md.g_inv),
        sym_parts(&md.k),
        sym_parts(&md.k_up),
        md.area_density.clone(),
        md.mean.clone(),
        md.gauss.clone(),
        sym_parts(&chr),
        md.lap_mean.clone(),
    ]
}

const IDENTITY_NAMES: [&str; 9] = ["g", "g_inv", "k", "k_up", "dA", "H", "K", "christoffel", "lap_H"];

fn norm(a: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(w).map(|(x, q)| x * x * q).sum::<f64>().sqrt()
}

/// Runs every suite on `grid` at `h = 0` and at a seeded random graph.
pub fn run_suites(grid: &Grid<f64>, params: &PhysicsParams<f64>, seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let reach = grid.surface().reach();
    let chi = grid.surface().kind().euler_characteristic() as f64;

    // large amplitudes need more nodes than the difference checks
    let fine_v = if grid.is_axisymmetric() { 1 } else { 2 * grid.n_v() };
    let fine = Grid::new(grid.surface(), 2 * grid.n_u(), fine_v)?;
    for k in 0..5 {
        let h = smooth_random_field(&fine, seed.wrapping_add(100 + k), 0.2 * reach);
        let geom = pullback_geometry(&fine, &h)?;
        let gb = geom.integrate(&geom.gauss)?;
        let err = (gb - 2.0 * std::f64::consts::PI * chi).abs();
        out.push(check(format!("gauss-bonnet #{k}"), err <= 1e-7, format!("|int K - 2 pi chi| = {err:.2e}")));
    }

    let cases = [
        ("h=0", vec![0.0; grid.len()]),
        ("h!=0", smooth_random_field(grid, seed.wrapping_add(1), 0.05 * reach)),
    ];
    for (label, h) in &cases {
        let geom = pullback_geometry(grid, h)?;
        let wts = geom.area_weights.clone();
        let w = smooth_random_field(grid, seed.wrapping_add(2), 1.0);
        let v = smooth_random_field(grid, seed.wrapping_add(3), 1.0);

        let lap1 = geom.laplace_beltrami(&vec![1.0; grid.len()])?;
        let lw = geom.laplace_beltrami(&w)?;
        let e1 = norm(&lap1, &wts);
        let e2 = geom.integrate(&lw)?.abs() / norm(&lw, &wts).max(1.0);
        out.push(check(
            format!("laplacian [{label}]"),
            e1 <= 1e-9 && e2 <= 1e-9,
            format!("|lap 1| = {e1:.1e}, |int lap w| = {e2:.1e}"),
        ));

        let grad = l2_gradient(&geom, params);
        let exact = chart_differential(&geom, &grad, &w);
        // at critical points the gradient vanishes by cancellation; its
        // leading term sets the scale there
        let cubic: Vec<f64> = geom.mean.iter().map(|h| params.kappa * h.powi(3)).collect();
        let scale = (geom.norm(&grad).max(geom.norm(&cubic)) * geom.norm(&w)).max(exact.abs());
        let s = Sweep::run(&[exact], &[1.0], scale, 1e-2, |e| {
            let f = |s: f64| -> f64 {
                let hh: Vec<f64> = h.iter().zip(&w).map(|(a, b)| a + s * b).collect();
                pullback_geometry(grid, &hh).map(|g| energy(&g, params)).unwrap_or(f64::NAN)
            };
            vec![(f(e) - f(-e)) / (2.0 * e)]
        });
        let (ok, d) = s.verdict(1e-4);
        out.push(check(format!("gradient [{label}]"), ok, d));

        let cd = constraint_differentials(&geom);
        let chart: Vec<f64> = w.iter().zip(&geom.tilt).map(|(a, t)| a / t).collect();
        let av = |e: f64| {
            let hh: Vec<f64> = h.iter().zip(&chart).map(|(a, b)| a + e * b).collect();
            area_volume(grid, &hh).unwrap_or((f64::NAN, f64::NAN))
        };
        let wn = geom.norm(&w);
        for (name, exact, dens, pick) in [
            ("area differential", cd.d_area(&geom, &w), &cd.area, 0usize),
            ("volume differential", cd.d_volume(&geom, &w), &cd.volume, 1usize),
        ] {
            let scale = (geom.norm(dens) * wn).max(exact.abs());
            let s = Sweep::run(&[exact], &[1.0], scale, 1e-2, |e| {
                let (p, m) = (av(e), av(-e));
                let (p, m) = if pick == 0 { (p.0, m.0) } else { (p.1, m.1) };
                vec![(p - m) / (2.0 * e)]
            });
            let (ok, d) = s.verdict(1e-4);
            out.push(check(format!("{name} [{label}]"), ok, d));
        }

        let disp = normal_displacement_jet(&geom, &w);
        let moved = |e: f64| displaced_geometry(&geom, &disp, e);
        let lin = linearized_gradient(&geom, params, &w)?;
        let s = Sweep::run(&lin, &wts, norm(&lin, &wts), 1e-2, |e| match (moved(e), moved(-e)) {
            (Ok(p), Ok(m)) => {
                let (gp, gm) = (l2_gradient(&p, params), l2_gradient(&m, params));
                gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * e)).collect()
            }
            _ => vec![f64::NAN; lin.len()],
        });
        let (ok, d) = s.verdict(1e-4);
        out.push(check(format!("linearized gradient [{label}]"), ok, d));

        let d2 = second_variation(&geom, params, &w, &w)?;
        let f0 = energy(&geom, params);
        let s = Sweep::run(&[d2], &[1.0], d2.abs(), 4e-2, |e| match (moved(e), moved(-e)) {
            (Ok(p), Ok(m)) => vec![(energy(&p, params) - 2.0 * f0 + energy(&m, params)) / (e * e)],
            _ => vec![f64::NAN],
        });
        let (ok, d) = s.verdict(1e-3);
        out.push(check(format!("second variation [{label}]"), ok, d));

        let (a, b) = (second_variation(&geom, params, &w, &v)?, second_variation(&geom, params, &v, &w)?);
        let asym = (a - b).abs() / a.abs().max(b.abs()).max(1.0);
        out.push(check(
            format!("second variation symmetry [{label}]"),
            asym <= 1e-12,
            format!("relative asymmetry {asym:.1e}"),
        ));

        let md = material_derivatives(&geom, &w)?;
        let exact = rates(&md);
        for (idx, name) in IDENTITY_NAMES.iter().enumerate() {
            let width = exact[idx].len() / grid.len();
            let ww: Vec<f64> = wts.iter().flat_map(|&q| std::iter::repeat(q).take(width)).collect();
            let s = Sweep::run(&exact[idx], &ww, norm(&exact[idx], &ww), 1e-2, |e| {
                match (moved(e).and_then(|g| geometric_fields(&g)), moved(-e).and_then(|g| geometric_fields(&g))) {
                    (Ok(p), Ok(m)) => p[idx].iter().zip(&m[idx]).map(|(a, b)| (a - b) / (2.0 * e)).collect(),
                    _ => vec![f64::NAN; exact[idx].len()],
                }
            });
            let (ok, d) = s.verdict(1e-5);
            out.push(check(format!("material derivative of {name} [{label}]"), ok, d));
        }

        let p = project_tangent(&geom, &w)?;
        let pp = project_tangent(&geom, &p)?;
        let idem = pp.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / wn;
        let orth = geom.integrate(&p)?.abs().max(geom.inner(&p, &geom.mean).abs()) / (wn * geom.norm(&geom.mean).max(1.0));
        out.push(check(
            format!("tangent projection [{label}]"),
            idem <= 1e-12 && orth <= 1e-12,
            format!("idempotence {idem:.1e}, orthogonality {orth:.1e}"),
        ));

        let target = ComponentTarget::new(geom.area(), geom.volume())?;
        let pushed: Vec<f64> = h.iter().zip(&w).map(|(a, b)| a + 0.01 * reach * b).collect();
        let restored = restore_constraints(grid, &pushed, &target)?;
        let (ra, rv) = area_volume(grid, &restored)?;
        let dev = ((ra - target.area) / target.area).abs().max(((rv - target.volume) / target.volume).abs());
        let tol = if target.round_sphere { 1e-9 } else { 1e-10 };
        out.push(check(
            format!("constraint restoration [{label}]"),
            ((ra - target.area) / target.area).abs() <= tol && (target.round_sphere || dev <= tol),
            format!("relative deviation {dev:.1e}"),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refsurf::{sample_grid, ReferenceSurface};

    #[test]
    fn suites_pass_on_a_small_torus() {
        let grid = sample_grid(&ReferenceSurface::<f64>::torus(2.0, 0.6).unwrap(), 32, 32).unwrap();
        let res = run_suites(&grid, &PhysicsParams::new(1.0, 0.2).unwrap(), 5).unwrap();
        let failed: Vec<_> = res.iter().filter(|r| !r.passed).collect();
        assert!(failed.is_empty(), "{failed:#?}");
        assert!(res.len() > 30);
    }
}
