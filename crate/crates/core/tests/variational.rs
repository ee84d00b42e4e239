mod common;

use common::*;
use helfrich::energy::{
    area_volume, chart_differential, constraint_differentials, energy, l2_gradient, PhysicsParams,
};
use helfrich::hessian::{
    displaced_geometry, linearized_gradient, normal_displacement_jet, second_variation,
    HessianCoefficients, VariationField,
};
use helfrich::refsurf::Grid;

struct Case {
    grid: Grid<f64>,
    h: Vec<f64>,
    label: &'static str,
}

fn cases() -> Vec<Case> {
    let mut r = rng(7);
    let t = grid(&torus(2.0, 0.5), 32, 32);
    let s = grid(&unit_sphere(), 24, 48);
    let ht = random_smooth(&t, &mut r, 0.04);
    let hs = random_smooth(&s, &mut r, 0.08);
    vec![
        Case { h: vec![0.0; t.len()], grid: t.clone(), label: "torus h=0" },
        Case { h: ht, grid: t, label: "torus h!=0" },
        Case { h: vec![0.0; s.len()], grid: s.clone(), label: "sphere h=0" },
        Case { h: hs, grid: s, label: "sphere h!=0" },
    ]
}

fn params() -> PhysicsParams<f64> {
    PhysicsParams::new(1.0, 0.35).unwrap()
}

#[test]
fn gradient_matches_energy_differences() {
    let p = params();
    for c in cases() {
        let geom = geometry(&c.grid, &c.h);
        let grad = l2_gradient(&geom, &p);
        let mut r = rng(100);
        for trial in 0..3 {
            let w = random_smooth(&c.grid, &mut r, 1.0);
            let exact = chart_differential(&geom, &grad, &w);
            let scale = geom.norm(&grad) * geom.norm(&w);
            let s = sweep_scalar_scaled(exact, scale, 1e-2, 5, |e| {
                let hp: Vec<f64> = c.h.iter().zip(&w).map(|(a, b)| a + e * b).collect();
                let hm: Vec<f64> = c.h.iter().zip(&w).map(|(a, b)| a - e * b).collect();
                (energy(&geometry(&c.grid, &hp), &p) - energy(&geometry(&c.grid, &hm), &p)) / (2.0 * e)
            });
            assert!(s.passes(1.9, 1e-4), "{} trial {trial}: {} exact {exact} scale {scale} {:?}", c.label, s.describe(), s.rel_err);
        }
    }
}

#[test]
fn constraint_differentials_match_area_volume_differences() {
    for c in cases() {
        let geom = geometry(&c.grid, &c.h);
        let d = constraint_differentials(&geom);
        let mut r = rng(200);
        let w = random_smooth(&c.grid, &mut r, 1.0);
        // chart direction with normal speed w
        let chart: Vec<f64> = w.iter().zip(&geom.tilt).map(|(a, t)| a / t).collect();
        let av = |e: f64| {
            let hh: Vec<f64> = c.h.iter().zip(&chart).map(|(a, b)| a + e * b).collect();
            area_volume(&c.grid, &hh).unwrap()
        };
        let wn = geom.norm(&w);
        let sa = sweep_scalar_scaled(d.d_area(&geom, &w), geom.norm(&d.area) * wn, 1e-2, 5, |e| {
            (av(e).0 - av(-e).0) / (2.0 * e)
        });
        let sv = sweep_scalar_scaled(d.d_volume(&geom, &w), geom.norm(&d.volume) * wn, 1e-2, 5, |e| {
            (av(e).1 - av(-e).1) / (2.0 * e)
        });
        assert!(sa.passes(1.9, 1e-4), "{} area: {}", c.label, sa.describe());
        assert!(sv.passes(1.9, 1e-4), "{} volume: {}", c.label, sv.describe());
    }
}

#[test]
fn linearized_gradient_matches_gradient_differences() {
    let p = params();
    for c in cases() {
        let geom = geometry(&c.grid, &c.h);
        let mut r = rng(300);
        let w = random_smooth(&c.grid, &mut r, 1.0);
        let exact = linearized_gradient(&geom, &p, &w).unwrap();
        let disp = normal_displacement_jet(&geom, &w);
        let s = sweep_field(&exact, &geom.area_weights, 1e-2, 6, |e| {
            let gp = l2_gradient(&displaced_geometry(&geom, &disp, e).unwrap(), &p);
            let gm = l2_gradient(&displaced_geometry(&geom, &disp, -e).unwrap(), &p);
            gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * e)).collect()
        });
        assert!(s.passes(1.9, 1e-4), "{}: {}", c.label, s.describe());
    }
}

fn second_difference(geom: &helfrich::graphgeom::GeometryState<'_, f64>, w: &[f64], p: &PhysicsParams<f64>, e: f64) -> f64 {
    let disp = normal_displacement_jet(geom, w);
    let f = |s: f64| energy(&displaced_geometry(geom, &disp, s).unwrap(), p);
    (f(e) - 2.0 * f(0.0) + f(-e)) / (e * e)
}

#[test]
fn second_variation_matches_energy_second_differences() {
    let p = params();
    for c in cases() {
        let geom = geometry(&c.grid, &c.h);
        let mut r = rng(400);
        let w = random_smooth(&c.grid, &mut r, 1.0);
        let exact = second_variation(&geom, &p, &w, &w).unwrap();
        let s = sweep_scalar(exact, 4e-2, 5, |e| second_difference(&geom, &w, &p, e));
        assert!(s.passes(1.9, 1e-3), "{}: {}", c.label, s.describe());
    }
}

/// The divergence term of the zeroth-order coefficient and the sign of the
/// first-order term are both load-bearing: dropping or flipping either
/// breaks agreement with the energy on a torus, where curvature varies.
#[test]
fn second_variation_terms_are_load_bearing() {
    let p = PhysicsParams::new(1.0, 0.0).unwrap();
    let g = grid(&torus(2f64.sqrt(), 1.0), 32, 32);
    let geom = geometry(&g, &vec![0.0; g.len()]);
    let mut r = rng(500);
    let w = random_smooth(&g, &mut r, 1.0);
    let coeffs = HessianCoefficients::new(&geom, &p);
    let fw = VariationField::new(&geom, &w);
    let oracle = second_difference(&geom, &w, &p, 2.5e-3);
    let full = helfrich::hessian::second_variation_with(&geom, &p, &coeffs, &fw, &fw);
    assert!(((full - oracle) / oracle).abs() < 1e-3);

    let mut dropped = coeffs.clone();
    for (b, d) in dropped.b.iter_mut().zip(&coeffs.divergence_term) {
        *b -= d;
    }
    let without = helfrich::hessian::second_variation_with(&geom, &p, &dropped, &fw, &fw);
    assert!(((without - oracle) / oracle).abs() > 1e-2, "divergence term had no effect");
    assert!(geom.norm(&coeffs.divergence_term) > 1e-2);

    let mut flipped = coeffs.clone();
    for a in flipped.a_up.iter_mut() {
        *a = a.scale(-1.0);
    }
    let plus_a = helfrich::hessian::second_variation_with(&geom, &p, &flipped, &fw, &fw);
    assert!(((plus_a - oracle) / oracle).abs() > 1e-2);
}

#[test]
fn divergence_term_matches_direct_divergence() {
    // ((2 k^{ab} - H g^{ab}) H_a)_{;b} computed as a coordinate divergence
    // (1/sqrt g) d_b (sqrt g V^b) on a torus.
    let g = grid(&torus(2.0, 0.5), 48, 48);
    let mut r = rng(600);
    let h = random_smooth(&g, &mut r, 0.05);
    let geom = geometry(&g, &h);
    let coeffs = HessianCoefficients::new(&geom, &PhysicsParams::new(1.0, 0.0).unwrap());
    let hj = geom.jet(&geom.mean);
    let n = g.len();
    let mut vu = vec![0.0; n];
    let mut vv = vec![0.0; n];
    for i in 0..n {
        let m = geom.k_up[i].scale(2.0).sub(&geom.g_inv[i].scale(geom.mean[i]));
        let v = m.mul_vec(hj.gradient(i));
        vu[i] = geom.sqrt_g[i] * v[0];
        vv[i] = geom.sqrt_g[i] * v[1];
    }
    let sp = g.spectral();
    let du = sp.du(&vu, helfrich::spectral::Parity::Even);
    let dv = sp.dv(&vv);
    let direct: Vec<f64> = (0..n).map(|i| (du[i] + dv[i]) / geom.sqrt_g[i]).collect();
    let err = wdist(&direct, &coeffs.divergence_term, &geom.area_weights)
        / wnorm(&direct, &geom.area_weights);
    assert!(err < 1e-6, "{err}");
}

#[test]
fn adjoint_identity_holds() {
    let p = params();
    let g = grid(&torus(2.0, 0.5), 32, 32);
    let mut r = rng(700);
    let h = random_smooth(&g, &mut r, 0.04);
    let geom = geometry(&g, &h);
    let w = random_smooth(&g, &mut r, 1.0);
    let v = random_smooth(&g, &mut r, 1.0);
    let lw = linearized_gradient(&geom, &p, &w).unwrap();
    let lhs = geom.inner(&lw, &v);
    let rhs = second_variation(&geom, &p, &w, &v).unwrap()
        + helfrich::hessian::adjoint_correction(&geom, &p, &w, &v);
    assert!(((lhs - rhs) / lhs.abs().max(1.0)).abs() < 1e-9, "{lhs} {rhs}");
}
