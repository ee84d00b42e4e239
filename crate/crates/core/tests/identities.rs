mod common;

use common::*;
use helfrich::graphgeom::GeometryState;
use helfrich::hessian::{displaced_geometry, material_derivatives, normal_displacement_jet, MaterialDerivatives};
use helfrich::refsurf::Grid;
use helfrich::Sym2;

fn sym_parts(s: &[Sym2<f64>]) -> Vec<f64> {
    s.iter().flat_map(|t| [t.xx, t.xy, t.yy]).collect()
}

/// Named field extractors, applied to geometry states and to identity outputs.
fn fields(geom: &GeometryState<'_, f64>) -> Vec<(&'static str, Vec<f64>)> {
    let chr: Vec<Sym2<f64>> = geom.christoffel.iter().flat_map(|c| [c[0], c[1]]).collect();
    vec![
        ("g", sym_parts(&geom.g)),
        ("g_inv", sym_parts(&geom.g_inv)),
        ("k", sym_parts(&geom.k)),
        ("k_up", sym_parts(&geom.k_up)),
        ("dA", geom.sqrt_g.clone()),
        ("H", geom.mean.clone()),
        ("K", geom.gauss.clone()),
        ("christoffel", sym_parts(&chr)),
        ("lap_H", geom.laplace_beltrami(&geom.mean).unwrap()),
    ]
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

fn check(grid: &Grid<f64>, h: &[f64], w: &[f64], label: &str) {
    let geom = geometry(grid, h);
    let md = material_derivatives(&geom, w).unwrap();
    let disp = normal_displacement_jet(&geom, w);
    let exact = rates(&md);
    let base_w = geom.area_weights.clone();
    for (idx, (name, _)) in fields(&geom).iter().enumerate() {
        let width = exact[idx].len() / grid.len();
        let wts: Vec<f64> = base_w.iter().flat_map(|&q| std::iter::repeat(q).take(width)).collect();
        let s = sweep_field(&exact[idx], &wts, 1e-2, 6, |e| {
            let p = fields(&displaced_geometry(&geom, &disp, e).unwrap());
            let m = fields(&displaced_geometry(&geom, &disp, -e).unwrap());
            p[idx].1.iter().zip(&m[idx].1).map(|(a, b)| (a - b) / (2.0 * e)).collect()
        });
        assert!(
            s.passes(1.9, 1e-5),
            "{label}/{name}: {}, errors {:?}",
            s.describe(),
            s.rel_err
        );
    }
}

#[test]
fn identities_on_torus() {
    let t = torus(2.0, 0.5);
    let g = grid(&t, 32, 32);
    let mut r = rng(11);
    let w = random_smooth(&g, &mut r, 1.0);
    check(&g, &vec![0.0; g.len()], &w, "torus h=0");
    let h = random_smooth(&g, &mut r, 0.05);
    check(&g, &h, &w, "torus h!=0");
}

#[test]
fn identities_on_sphere() {
    let s = unit_sphere();
    let g = grid(&s, 24, 48);
    let mut r = rng(12);
    let w = random_smooth(&g, &mut r, 1.0);
    check(&g, &vec![0.0; g.len()], &w, "sphere h=0");
    let h = random_smooth(&g, &mut r, 0.1);
    check(&g, &h, &w, "sphere h!=0");
}
