//! Decay-law fits on a converged trajectory tail: the gradient-vs-energy
//! exponent `theta`, exponential vs algebraic model selection and the
//! convergence exponent of the height field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Real};

use super::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayKind {
    Exponential,
    Algebraic,
}

/// Plain time series consumed by [`fit_decay`].
#[derive(Debug, Clone, Default)]
pub struct DecaySeries {
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
    pub grad: Vec<f64>,
    /// `(t, flattened heights)` pairs.
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

impl DecaySeries {
    /// Uses the projected gradient norm.
    pub fn from_trajectory<T: Real>(traj: &Trajectory<T>) -> Self {
        let mut s = DecaySeries::default();
        for r in &traj.records {
            s.t.push(to_f64(r.t));
            s.energy.push(to_f64(r.diagnostics.energy));
            s.grad.push(to_f64(r.diagnostics.grad_projected));
            if let Some(h) = &r.snapshot {
                let flat = h.iter().flatten().map(|&x| to_f64(x)).collect();
                s.snapshots.push((to_f64(r.t), flat));
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DecayOptions {
    /// Known limit energy; estimated from the tail when `None`.
    pub f_inf: Option<f64>,
    pub min_records: usize,
    /// Fraction of the usable records, counted from the end, that forms the window.
    pub tail_fraction: f64,
    /// `|theta - 1/2|` below which decay counts as exponential.
    pub theta_tol: f64,
    /// Energy gaps below `noise_floor * max(1, |F|)` are treated as converged.
    pub noise_floor: f64,
}

impl Default for DecayOptions {
    fn default() -> Self {
        Self {
            f_inf: None,
            min_records: 20,
            tail_fraction: 0.5,
            theta_tol: 0.05,
            noise_floor: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    pub theta: f64,
    /// Slope-derived value before clamping to `(0, 1/2]`.
    pub theta_raw: f64,
    #[serde(rename = "type")]
    pub kind: DecayKind,
    /// `1 / (1 - 2 theta)`; absent when `theta = 1/2`.
    pub algebraic_exponent: Option<f64>,
    /// Rate of `F - F_inf ~ exp(-c0 t)` from the log-linear fit.
    pub c0: f64,
    /// Exponent of `F - F_inf ~ t^-p` from the log-log fit.
    pub power: Option<f64>,
    /// Rate (exponential) or exponent (algebraic) of `||h(t) - h_inf||`.
    pub beta: Option<f64>,
    pub f_inf: f64,
    pub f_inf_estimated: bool,
    pub residual_theta: f64,
    pub residual_exponential: f64,
    pub residual_algebraic: f64,
    pub window_start: f64,
    pub window_end: f64,
    pub window_records: usize,
    /// Model choice agrees with the fitted `theta`.
    pub consistent: bool,
}

/// Least-squares line; returns `(slope, intercept, rms residual)`.
fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    (slope, icpt, (rss / n).sqrt())
}

struct ModelFits {
    exp: (f64, f64),
    alg: Option<(f64, f64)>,
}

impl ModelFits {
    fn best(&self) -> f64 {
        self.alg.map_or(self.exp.1, |a| a.1.min(self.exp.1))
    }
}

fn model_fits(s: &DecaySeries, win: &[usize], f_inf: f64) -> Option<ModelFits> {
    let mut logs = Vec::with_capacity(win.len());
    for &i in win {
        let gap = s.energy[i] - f_inf;
        if gap <= 0.0 {
            return None;
        }
        logs.push(gap.ln());
    }
    let t: Vec<f64> = win.iter().map(|&i| s.t[i]).collect();
    let (se, _, re) = line_fit(&t, &logs);
    let alg = t.iter().all(|&x| x > 0.0).then(|| {
        let lt: Vec<f64> = t.iter().map(|x| x.ln()).collect();
        let (sa, _, ra) = line_fit(&lt, &logs);
        (-sa, ra)
    });
    Some(ModelFits { exp: (-se, re), alg })
}

/// Limit energy minimizing the better of the two decay-model residuals,
/// searched as `F_min - s` over a log-spaced scan followed by golden section.
fn estimate_f_inf(s: &DecaySeries, win: &[usize], f_min: f64, floor: f64) -> f64 {
    let span = s.energy[win[0]] - f_min;
    let lo = (floor * 1e-4).max(f64::MIN_POSITIVE).ln();
    let hi = span.max(floor).ln();
    let cost = |ls: f64| model_fits(s, win, f_min - ls.exp()).map_or(f64::INFINITY, |m| m.best());
    let n = 80;
    let grid: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let (kbest, _) = grid
        .iter()
        .map(|&g| cost(g))
        .enumerate()
        .fold((0, f64::INFINITY), |b, (k, c)| if c < b.1 { (k, c) } else { b });
    let ls = golden(cost, grid[kbest.saturating_sub(1)], grid[(kbest + 1).min(n)]);
    f_min - ls.exp()
}

pub fn fit_decay(s: &DecaySeries, opts: &DecayOptions) -> Result<DecayFit> {
    let n = s.t.len();
    if s.energy.len() != n || s.grad.len() != n {
        return Err(Error::DecayFit("series columns have different lengths".into()));
    }
    if n < opts.min_records {
        return Err(Error::DecayFit(format!("{n} records, need at least {}", opts.min_records)));
    }
    let f_min = s.energy.iter().cloned().fold(f64::INFINITY, f64::min);
    let f_ref = opts.f_inf.unwrap_or(f_min);
    let floor = opts.noise_floor * f_ref.abs().max(1.0);
    let usable: Vec<usize> = (0..n)
        .filter(|&i| s.energy[i] - f_ref > floor && s.grad[i] > 0.0)
        .collect();
    let take = ((usable.len() as f64) * opts.tail_fraction).ceil() as usize;
    if take < opts.min_records {
        return Err(Error::DecayFit(format!(
            "window too short: {take} usable tail records, need {}",
            opts.min_records
        )));
    }
    let win = &usable[usable.len() - take..];
    for pair in win.windows(2) {
        let (a, b) = (s.energy[pair[0]], s.energy[pair[1]]);
        if b > a + 1e-12 * a.abs().max(1.0) {
            return Err(Error::DecayFit(format!(
                "non-monotone tail: F rises from {a} to {b} at t = {}",
                s.t[pair[1]]
            )));
        }
    }
    let (f_inf, estimated) = match opts.f_inf {
        Some(f) => (f, false),
        None => (estimate_f_inf(s, win, f_min, floor), true),
    };
    let fits = model_fits(s, win, f_inf)
        .ok_or_else(|| Error::DecayFit(format!("limit energy {f_inf} not below the tail")))?;
    let x: Vec<f64> = win.iter().map(|&i| (s.energy[i] - f_inf).ln()).collect();
    let y: Vec<f64> = win.iter().map(|&i| s.grad[i].ln()).collect();
    let (slope, _, residual_theta) = line_fit(&x, &y);
    let theta_raw = 1.0 - slope;
    let theta = theta_raw.clamp(f64::EPSILON, 0.5);
    let (c0, res_exp) = fits.exp;
    let (power, res_alg) = match fits.alg {
        Some((p, r)) => (Some(p), r),
        None => (None, f64::INFINITY),
    };
    let kind = if res_exp <= res_alg { DecayKind::Exponential } else { DecayKind::Algebraic };
    let near_half = (theta - 0.5).abs() <= opts.theta_tol;
    let algebraic_exponent = (theta < 0.5).then(|| 1.0 / (1.0 - 2.0 * theta));
    let (t0, t1) = (s.t[win[0]], s.t[*win.last().unwrap()]);
    Ok(DecayFit {
        theta,
        theta_raw,
        kind,
        algebraic_exponent,
        c0,
        power,
        beta: fit_beta(s, kind, t0, t1),
        f_inf,
        f_inf_estimated: estimated,
        residual_theta,
        residual_exponential: res_exp,
        residual_algebraic: res_alg,
        window_start: t0,
        window_end: t1,
        window_records: win.len(),
        consistent: near_half == (kind == DecayKind::Exponential),
    })
}

/// Convergence exponent of the snapshots inside `[t0, t1]`. The last
/// snapshot stands in for the limit, so distances are modelled as
/// `C (g(t) - g(T))` with `g = exp(-beta t)` or `t^-beta`.
fn fit_beta(s: &DecaySeries, kind: DecayKind, t0: f64, t1: f64) -> Option<f64> {
    let (t_last, last) = s.snapshots.last()?;
    let pts: Vec<(f64, f64)> = s
        .snapshots
        .iter()
        .filter(|(t, _)| *t >= t0 && *t <= t1 && *t < *t_last)
        .map(|(t, h)| {
            let d: f64 = h.iter().zip(last).map(|(a, b)| (a - b) * (a - b)).sum();
            (*t, (d / h.len().max(1) as f64).sqrt())
        })
        .filter(|p| p.1 > 0.0)
        .collect();
    if pts.len() < 3 || (kind == DecayKind::Algebraic && pts[0].0 <= 0.0) {
        return None;
    }
    let g = |beta: f64, t: f64| match kind {
        DecayKind::Exponential => (-beta * (t - t_last)).exp() - 1.0,
        DecayKind::Algebraic => (t / t_last).powf(-beta) - 1.0,
    };
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    // residual of log d - log g after removing the best constant
    let cost = |lb: f64| {
        let beta = lb.exp();
        let r: Vec<f64> = pts.iter().zip(&ly).map(|(p, y)| y - g(beta, p.0).ln()).collect();
        let m = r.iter().sum::<f64>() / r.len() as f64;
        r.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
    };
    let x: Vec<f64> = match kind {
        DecayKind::Exponential => pts.iter().map(|p| p.0).collect(),
        DecayKind::Algebraic => pts.iter().map(|p| p.0.ln()).collect(),
    };
    let b0 = (-line_fit(&x, &ly).0).max(1e-6);
    let (lo, hi) = ((b0 / 20.0).ln(), (b0 * 20.0).ln());
    let n = 200;
    let kbest = (0..=n)
        .map(|k| lo + (hi - lo) * k as f64 / n as f64)
        .map(cost)
        .enumerate()
        .fold((0, f64::INFINITY), |b, (k, c)| if c < b.1 { (k, c) } else { b })
        .0;
    let at = |k: usize| lo + (hi - lo) * k.min(n) as f64 / n as f64;
    Some(golden(cost, at(kbest.saturating_sub(1)), at(kbest + 1)).exp())
}

/// Golden-section minimizer on `[a, b]`.
fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
