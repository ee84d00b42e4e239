//! Constrained gradient flow of the bending energy with a semi-implicit
//! stepper, energy-monotone step control and a decay-law fitter.

mod decay;
mod precond;

pub use decay::{fit_decay, DecayFit, DecayKind, DecayOptions, DecaySeries};

use crate::constraints::{constraint_normals, restore_components, ConstraintSet, Projector};
use crate::energy::{area_volume, energy, l2_gradient, ComponentTarget, PhysicsParams};
use crate::error::{Error, Result};
use crate::graphgeom::{check_admissible, pullback_geometry, GeometryState};
use crate::linalg::{gram_solve, Gmres};
use crate::refsurf::Grid;
use crate::scalar::{lit, to_f64, Real};

use precond::ModeSolver;

/// Which metric turns the energy gradient into a normal velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobilityKind {
    /// `w = -grad F`.
    L2,
    /// `(I - l^2 Delta) w = -grad F`.
    Proxy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilitySpec<T> {
    pub kind: MobilityKind,
    /// Screening length `l` (unused for `L2`).
    pub length: T,
}

impl<T: Real> MobilitySpec<T> {
    pub fn l2() -> Self {
        Self {
            kind: MobilityKind::L2,
            length: T::zero(),
        }
    }

    pub fn proxy(length: T) -> Result<Self> {
        if !(length > T::zero()) {
            return Err(Error::InvalidParameter(format!("proxy length must be positive, got {length}")));
        }
        Ok(Self {
            kind: MobilityKind::Proxy,
            length,
        })
    }

    /// Applies the inverse mobility `M^{-1}`.
    pub fn apply_inverse(&self, geom: &GeometryState<'_, T>, x: &[T]) -> Vec<T> {
        match self.kind {
            MobilityKind::L2 => x.to_vec(),
            MobilityKind::Proxy => {
                let l2 = self.length * self.length;
                let lap = geom.laplacian_from_jet(&geom.jet(x));
                x.iter().zip(&lap).map(|(&a, &b)| a - l2 * b).collect()
            }
        }
    }
}

/// Mutable part of a run: everything a checkpoint has to carry.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState<T> {
    pub t: T,
    /// Number of accepted steps so far.
    pub step: usize,
    /// Current nominal step size; halvings shrink it, clean steps regrow it.
    pub tau: T,
    pub heights: Vec<Vec<T>>,
}

/// Energy, geometry and gradient of every component at one state.
pub struct Evaluation<'g, T: Real> {
    pub geoms: Vec<GeometryState<'g, T>>,
    pub grads: Vec<Vec<T>>,
    pub energy: T,
}

/// Velocity of one step and its dissipation `<w, M^{-1} w>`.
#[derive(Debug, Clone)]
pub struct Velocity<T> {
    pub fields: Vec<Vec<T>>,
    pub dissipation: T,
}

#[derive(Debug, Clone)]
pub struct StepOutcome<T> {
    pub heights: Vec<Vec<T>>,
    pub dt: T,
    pub halvings: usize,
    pub dissipation: T,
    pub energy_before: T,
    pub energy_after: T,
}

/// Geometry, physics and mobility shared by all steps of a run.
pub struct FlowProblem<'g, T: Real> {
    pub grids: &'g [Grid<T>],
    pub targets: Vec<ComponentTarget<T>>,
    pub params: PhysicsParams<T>,
    pub mobility: MobilitySpec<T>,
    /// Screening length of the dual norm logged as `grad_proxy`.
    pub proxy_length: T,
    /// Relative energy slack for accepting a step.
    pub energy_tol: f64,
    pub max_halvings: usize,
}

impl<'g, T: Real> FlowProblem<'g, T> {
    pub fn new(
        grids: &'g [Grid<T>],
        targets: Vec<ComponentTarget<T>>,
        params: PhysicsParams<T>,
        mobility: MobilitySpec<T>,
    ) -> Result<Self> {
        if grids.len() != targets.len() || grids.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "{} grids but {} constraint targets",
                grids.len(),
                targets.len()
            )));
        }
        let reach = grids
            .iter()
            .map(|g| g.surface().reach())
            .fold(T::infinity(), |a, b| a.min(b));
        Ok(Self {
            grids,
            targets,
            params,
            mobility,
            proxy_length: reach * lit(0.25),
            energy_tol: 1e-12,
            max_halvings: 30,
        })
    }

    fn sets(&self) -> impl Iterator<Item = ConstraintSet> + '_ {
        self.targets.iter().map(ConstraintSet::for_target)
    }

    fn gmres(&self) -> Gmres {
        Gmres {
            max_iter: 200,
            rel_tol: (10.0 * to_f64(T::epsilon())).max(1e-12),
        }
    }

    pub fn evaluate(&self, heights: &[Vec<T>]) -> Result<Evaluation<'g, T>> {
        if heights.len() != self.grids.len() {
            return Err(Error::InvalidParameter(format!(
                "{} height fields for {} components",
                heights.len(),
                self.grids.len()
            )));
        }
        let mut geoms = Vec::with_capacity(heights.len());
        let mut grads = Vec::with_capacity(heights.len());
        let mut total = T::zero();
        for (grid, h) in self.grids.iter().zip(heights) {
            check_admissible(grid, h)?;
            let geom = pullback_geometry(grid, h)?;
            total += energy(&geom, &self.params);
            grads.push(l2_gradient(&geom, &self.params));
            geoms.push(geom);
        }
        Ok(Evaluation {
            geoms,
            grads,
            energy: total,
        })
    }

    /// Solves `(M^{-1} + tau kappa Delta^2) w = -grad F - sum lambda_j c_j`
    /// with `w` orthogonal to the constraint normals `c_j`.
    pub fn velocity(&self, eval: &Evaluation<'_, T>, tau: T) -> Result<Velocity<T>> {
        let tk = tau * self.params.kappa;
        let mut fields = Vec::with_capacity(eval.geoms.len());
        let mut dissipation = T::zero();
        for ((geom, grad), set) in eval.geoms.iter().zip(&eval.grads).zip(self.sets()) {
            let pre = ModeSolver::new(geom, &self.mobility, to_f64(tk))?;
            let apply = |x: &[T]| -> Vec<T> {
                let mut y = self.mobility.apply_inverse(geom, x);
                if tk != T::zero() {
                    let l1 = geom.laplacian_from_jet(&geom.jet(x));
                    let l2 = geom.laplacian_from_jet(&geom.jet(&l1));
                    for (a, b) in y.iter_mut().zip(&l2) {
                        *a += tk * *b;
                    }
                }
                y
            };
            let solver = self.gmres();
            let dot = |a: &[T], b: &[T]| geom.inner(a, b);
            let neg: Vec<T> = grad.iter().map(|&g| -g).collect();
            let x0 = solver.solve(&neg, apply, |r| pre.solve(r), dot)?;
            let normals = constraint_normals(geom, set);
            let xs = normals
                .iter()
                .map(|c| solver.solve(c, apply, |r| pre.solve(r), dot))
                .collect::<Result<Vec<_>>>()?;
            let k = normals.len();
            let mut s = vec![0.0; k * k];
            let mut r = vec![0.0; k];
            for i in 0..k {
                r[i] = to_f64(geom.inner(&normals[i], &x0));
                for j in 0..k {
                    s[i * k + j] = to_f64(geom.inner(&normals[i], &xs[j]));
                }
            }
            for i in 0..k {
                for j in 0..i {
                    let m = 0.5 * (s[i * k + j] + s[j * k + i]);
                    s[i * k + j] = m;
                    s[j * k + i] = m;
                }
            }
            let (lambda, _) = gram_solve(&s, k, &r, crate::constraints::PROJECTION_RANK_TOL);
            let mut w = x0;
            for (l, x) in lambda.iter().zip(&xs) {
                let l = lit::<T>(*l);
                for (a, &b) in w.iter_mut().zip(x) {
                    *a -= l * b;
                }
            }
            let mw = self.mobility.apply_inverse(geom, &w);
            dissipation += geom.inner(&w, &mw);
            fields.push(w);
        }
        Ok(Velocity {
            fields,
            dissipation,
        })
    }

    /// One accepted step starting at `tau`, halving on energy increase,
    /// reach violation or restoration failure. `tau = 0` is the identity.
    pub fn step(&self, heights: &[Vec<T>], eval: &Evaluation<'_, T>, tau: T) -> Result<StepOutcome<T>> {
        if tau < T::zero() {
            return Err(Error::StepFailure {
                halvings: 0,
                reason: format!("negative step size {tau}"),
            });
        }
        if tau == T::zero() {
            return Ok(StepOutcome {
                heights: heights.to_vec(),
                dt: T::zero(),
                halvings: 0,
                dissipation: T::zero(),
                energy_before: eval.energy,
                energy_after: eval.energy,
            });
        }
        let slack = lit::<T>(self.energy_tol) * eval.energy.abs();
        let mut tau = tau;
        let mut reason = String::new();
        for halvings in 0..=self.max_halvings {
            let vel = self.velocity(eval, tau)?;
            let trial: Vec<Vec<T>> = heights
                .iter()
                .zip(&vel.fields)
                .zip(&eval.geoms)
                .map(|((h, w), g)| {
                    h.iter()
                        .zip(w)
                        .zip(&g.tilt)
                        .map(|((&hi, &wi), &ti)| hi + tau * wi / ti)
                        .collect()
                })
                .collect();
            let attempt = self.grids.iter().zip(&trial).try_for_each(|(g, h)| check_admissible(g, h))
                .and_then(|_| restore_components(self.grids, &trial, &self.targets))
                .and_then(|restored| self.evaluate(&restored).map(|e| (restored, e.energy)));
            match attempt {
                Ok((restored, f_new)) if f_new <= eval.energy + slack => {
                    return Ok(StepOutcome {
                        heights: restored,
                        dt: tau,
                        halvings,
                        dissipation: vel.dissipation,
                        energy_before: eval.energy,
                        energy_after: f_new,
                    });
                }
                Ok((_, f_new)) => {
                    reason = format!("energy increased from {} to {}", eval.energy, f_new);
                }
                Err(e) => reason = e.to_string(),
            }
            tau = tau * lit(0.5);
        }
        Err(Error::StepFailure {
            halvings: self.max_halvings,
            reason,
        })
    }

    /// Gradient norms and conserved quantities at an evaluated state.
    pub fn diagnostics(&self, eval: &Evaluation<'_, T>) -> Result<Diagnostics<T>> {
        let mut raw = T::zero();
        let mut projected = T::zero();
        let mut proxy = T::zero();
        let mut areas = Vec::new();
        let mut volumes = Vec::new();
        let screen = MobilitySpec {
            kind: MobilityKind::Proxy,
            length: self.proxy_length,
        };
        for ((geom, grad), set) in eval.geoms.iter().zip(&eval.grads).zip(self.sets()) {
            raw += geom.inner(grad, grad);
            let pg = Projector::for_set(geom, set).apply(geom, grad);
            projected += geom.inner(&pg, &pg);
            let pre = ModeSolver::new(geom, &screen, 0.0)?;
            let x = self.gmres().solve(
                &pg,
                |x| screen.apply_inverse(geom, x),
                |r| pre.solve(r),
                |a, b| geom.inner(a, b),
            )?;
            proxy += geom.inner(&pg, &x);
            areas.push(geom.area());
            volumes.push(geom.volume());
        }
        Ok(Diagnostics {
            energy: eval.energy,
            grad_l2: raw.sqrt(),
            grad_projected: projected.sqrt(),
            grad_proxy: proxy.max(T::zero()).sqrt(),
            areas,
            volumes,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics<T> {
    pub energy: T,
    /// `||grad F||` in `L2(dA)`, summed over components.
    pub grad_l2: T,
    /// `||P grad F||` after removing the constraint normals.
    pub grad_projected: T,
    /// `<P grad F, (I - l^2 Delta)^{-1} P grad F>^{1/2}`.
    pub grad_proxy: T,
    pub areas: Vec<T>,
    pub volumes: Vec<T>,
}

/// One row of the ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct Record<T> {
    pub t: T,
    pub step: usize,
    pub diagnostics: Diagnostics<T>,
    /// Dissipation of the step that produced this record.
    pub dissipation: T,
    /// Accepted step size leading to this record (0 for the first).
    pub dt: T,
    pub snapshot: Option<Vec<Vec<T>>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory<T> {
    pub records: Vec<Record<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    Stationary,
    TimeLimit,
    StepLimit,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions<T> {
    pub dt0: T,
    pub t_end: T,
    /// Stop once `||P grad F||` drops to this value.
    pub grad_tol: T,
    pub max_steps: usize,
    /// Keep a height snapshot every this many records (0 disables).
    pub snapshot_every: usize,
}

pub struct FlowRun<T> {
    pub trajectory: Trajectory<T>,
    pub state: FlowState<T>,
    pub stop: StopReason,
    /// The step error that ended the run, if any.
    pub error: Option<Error>,
}

impl<T: Real> FlowState<T> {
    pub fn new(heights: Vec<Vec<T>>, tau: T) -> Self {
        Self {
            t: T::zero(),
            step: 0,
            tau,
            heights,
        }
    }
}

/// Integrates until stationarity, `t_end`, `max_steps` or a failed step.
/// `observer` sees every record together with the state it describes.
pub fn run_flow<T: Real>(
    problem: &FlowProblem<'_, T>,
    start: FlowState<T>,
    opts: &FlowOptions<T>,
    mut observer: impl FnMut(&Record<T>, &FlowState<T>) -> Result<()>,
) -> Result<FlowRun<T>> {
    let mut state = start;
    state.heights = restore_components(problem.grids, &state.heights, &problem.targets)?;
    let mut eval = problem.evaluate(&state.heights)?;
    let mut trajectory = Trajectory::default();
    let snap = |k: usize, h: &Vec<Vec<T>>| {
        (opts.snapshot_every > 0 && k % opts.snapshot_every == 0).then(|| h.clone())
    };
    let first = Record {
        t: state.t,
        step: state.step,
        diagnostics: problem.diagnostics(&eval)?,
        dissipation: T::zero(),
        dt: T::zero(),
        snapshot: snap(0, &state.heights),
    };
    observer(&first, &state)?;
    trajectory.records.push(first);
    let time_slack = opts.t_end * lit(1e-12);
    let (stop, error) = loop {
        let last = trajectory.records.last().unwrap();
        if last.diagnostics.grad_projected <= opts.grad_tol {
            break (StopReason::Stationary, None);
        }
        if state.t >= opts.t_end - time_slack {
            break (StopReason::TimeLimit, None);
        }
        if state.step >= opts.max_steps {
            break (StopReason::StepLimit, None);
        }
        let tau = state.tau.min(opts.t_end - state.t);
        let out = match problem.step(&state.heights, &eval, tau) {
            Ok(out) => out,
            Err(e) => break (StopReason::Failure, Some(e)),
        };
        eval = match problem.evaluate(&out.heights) {
            Ok(e) => e,
            Err(e) => break (StopReason::Failure, Some(e)),
        };
        state.heights = out.heights;
        state.t += out.dt;
        state.step += 1;
        if out.halvings > 0 {
            state.tau = out.dt;
        } else if tau == state.tau {
            state.tau = (state.tau * lit(2.0)).min(opts.dt0);
        }
        let diagnostics = match problem.diagnostics(&eval) {
            Ok(d) => d,
            Err(e) => break (StopReason::Failure, Some(e)),
        };
        let rec = Record {
            t: state.t,
            step: state.step,
            diagnostics,
            dissipation: out.dissipation,
            dt: out.dt,
            snapshot: snap(trajectory.records.len(), &state.heights),
        };
        observer(&rec, &state)?;
        trajectory.records.push(rec);
    };
    Ok(FlowRun {
        trajectory,
        state,
        stop,
        error,
    })
}

/// Area and volume of every component, for drift checks.
pub fn component_measures<T: Real>(grids: &[Grid<T>], heights: &[Vec<T>]) -> Result<Vec<(T, T)>> {
    grids.iter().zip(heights).map(|(g, h)| area_volume(g, h)).collect()
}

#[cfg(test)]
mod tests;
