use super::*;
use crate::energy::ConstraintTargets;
use crate::refsurf::{sample_axisymmetric, sample_grid, ReferenceSurface};
use std::f64::consts::PI;

fn problem_for<'g>(grids: &'g [Grid<f64>], heights: &[Vec<f64>], mobility: MobilitySpec<f64>) -> FlowProblem<'g, f64> {
    let geoms: Vec<_> = grids.iter().zip(heights).map(|(g, h)| pullback_geometry(g, h).unwrap()).collect();
    let targets = ConstraintTargets::from_geometry(&geoms).unwrap().components;
    FlowProblem::new(grids, targets, PhysicsParams::new(1.0, 0.0).unwrap(), mobility).unwrap()
}

#[test]
fn preconditioner_is_exact_on_axisymmetric_grids() {
    let grid = sample_axisymmetric(&ReferenceSurface::<f64>::sphere(1.0).unwrap(), 24).unwrap();
    let h = grid.sample(|u, _| 0.05 * (1.5 * u.cos().powi(2) - 0.5));
    let geom = pullback_geometry(&grid, &h).unwrap();
    for mob in [MobilitySpec::l2(), MobilitySpec::proxy(0.3).unwrap()] {
        let pre = ModeSolver::new(&geom, &mob, 0.01).unwrap();
        let x = grid.sample(|u, _| u.cos() + 0.3 * (3.0 * u).cos());
        let l1 = geom.laplacian_from_jet(&geom.jet(&x));
        let l2 = geom.laplacian_from_jet(&geom.jet(&l1));
        let mut ax = mob.apply_inverse(&geom, &x);
        for (a, b) in ax.iter_mut().zip(&l2) {
            *a += 0.01 * b;
        }
        let back = pre.solve(&ax);
        let err = back.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-9, "{err}");
    }
}

#[test]
fn sphere_is_a_fixed_point_and_zero_step_is_identity() {
    let grids = vec![sample_grid(&ReferenceSurface::<f64>::sphere(1.0).unwrap(), 16, 32).unwrap()];
    let h = vec![vec![0.0; grids[0].len()]];
    let problem = problem_for(&grids, &h, MobilitySpec::l2());
    let eval = problem.evaluate(&h).unwrap();
    for tau in [1e-3, 0.1, 1.0] {
        let out = problem.step(&h, &eval, tau).unwrap();
        let moved = out.heights[0].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(moved < 1e-10, "tau {tau}: {moved}");
    }
    let torus = vec![sample_grid(&ReferenceSurface::<f64>::torus(2f64.sqrt(), 1.0).unwrap(), 16, 16).unwrap()];
    let ht = vec![torus[0].sample(|_, v| 0.02 * (2.0 * v).cos())];
    let problem = problem_for(&torus, &ht, MobilitySpec::l2());
    let eval = problem.evaluate(&ht).unwrap();
    let out = problem.step(&ht, &eval, 0.0).unwrap();
    assert_eq!(out.heights, ht);
}

#[test]
fn torus_step_decreases_energy_and_restores_constraints() {
    let grids = vec![sample_grid(&ReferenceSurface::<f64>::torus(2f64.sqrt(), 1.0).unwrap(), 24, 24).unwrap()];
    let h0 = vec![grids[0].sample(|_, v| 0.02 * (2.0 * v).cos())];
    for mob in [MobilitySpec::l2(), MobilitySpec::proxy(0.2).unwrap()] {
        let problem = problem_for(&grids, &h0, mob);
        let eval = problem.evaluate(&h0).unwrap();
        let out = problem.step(&h0, &eval, 1e-2).unwrap();
        assert!(out.energy_after < out.energy_before);
        let (a, v) = area_volume(&grids[0], &out.heights[0]).unwrap();
        let t = problem.targets[0];
        assert!(((a - t.area) / t.area).abs() < 1e-10);
        assert!(((v - t.volume) / t.volume).abs() < 1e-10);
        // discrete dissipation identity, consistent to first order in tau
        let gap = |tau: f64| {
            let out = problem.step(&h0, &eval, tau).unwrap();
            let drop = out.energy_before - out.energy_after;
            let pred = out.dt * out.dissipation;
            ((drop - pred) / pred).abs()
        };
        let (g1, g2) = (gap(1e-4), gap(1e-5));
        assert!(g2 < 0.05 && g2 < 0.2 * g1, "{g1} {g2}");
    }
}

#[test]
fn velocity_is_tangent_to_constraints() {
    let grids = vec![sample_grid(&ReferenceSurface::<f64>::torus(2.0, 0.7).unwrap(), 16, 16).unwrap()];
    let h = vec![grids[0].sample(|u, v| 0.03 * (u + 2.0 * v).sin())];
    let problem = problem_for(&grids, &h, MobilitySpec::proxy(0.3).unwrap());
    let eval = problem.evaluate(&h).unwrap();
    let vel = problem.velocity(&eval, 0.05).unwrap();
    let geom = &eval.geoms[0];
    let w = &vel.fields[0];
    let scale = geom.norm(w) * geom.norm(&geom.mean);
    assert!(geom.integrate(w).unwrap().abs() < 1e-9 * scale);
    assert!(geom.inner(w, &geom.mean).abs() < 1e-9 * scale);
    // descent direction
    assert!(geom.inner(w, &eval.grads[0]) < 0.0);
}

#[test]
fn stationary_sphere_gives_single_record() {
    let grids = vec![sample_axisymmetric(&ReferenceSurface::<f64>::sphere(1.0).unwrap(), 16).unwrap()];
    let h = vec![vec![0.0; grids[0].len()]];
    let problem = problem_for(&grids, &h, MobilitySpec::l2());
    let opts = FlowOptions {
        dt0: 0.01,
        t_end: 1.0,
        grad_tol: 1e-8,
        max_steps: 10,
        snapshot_every: 1,
    };
    let run = run_flow(&problem, FlowState::new(h, 0.01), &opts, |_, _| Ok(())).unwrap();
    assert_eq!(run.stop, StopReason::Stationary);
    assert_eq!(run.trajectory.records.len(), 1);
    assert!((run.trajectory.records[0].diagnostics.energy - 8.0 * PI).abs() < 1e-10);
}
