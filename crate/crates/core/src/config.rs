//! Run configuration: a flat TOML file of dotted keys, all optional.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `surface.kind` | `"sphere"` | `"sphere"` or `"torus"` |
//! | `surface.radius` | `1.0` | sphere radius |
//! | `surface.major`, `surface.minor` | `sqrt 2`, `1.0` | torus radii |
//! | `grid.n_u`, `grid.n_v` | `32`, `64` | nodes; `n_v = 1` is axisymmetric |
//! | `physics.kappa`, `physics.c0` | `1.0`, `0.0` | rigidity, spontaneous curvature |
//! | `constraints.targets` | `"reference"` | `"reference"` or `"initial"` surface |
//! | `flow.mobility` | `"l2"` | `"l2"` or `"proxy"` |
//! | `flow.proxy_length` | `0.25` | screening length of the proxy mobility |
//! | `flow.dt0` | `0.005` | initial and maximal step size |
//! | `flow.t_end` | `10.0` | final time |
//! | `flow.grad_tol` | `1e-8` | stationarity tolerance on the projected gradient |
//! | `flow.max_steps` | `100000` | step limit |
//! | `flow.checkpoint_every` | `100` | checkpoint period in steps (0 = final only) |
//! | `flow.snapshot_every` | `0` | OBJ snapshot period in steps (0 = final only) |
//! | `perturbation.mode` | `"none"` | `none`, `zonal2`, `cos2u`, `cos2v`, `random` |
//! | `perturbation.amplitude` | `0.05` | sup norm of the perturbation |
//! | `perturbation.seed` | `0` | seed of the `random` mode |
//! | `spectrum.max_degree` | `4` | harmonic degree of the Hessian basis |
//! | `spectrum.tol` | `1e-6` | relative near-kernel threshold |
//! | `decay.f_inf` | unset | known limit energy for decay fits |
//! | `verify.n_u`, `verify.n_v` | per surface | grid of the verification suite |
//! | `output.dir` | `$HELFRICH_OUTPUT_DIR` or `helfrich-out` | output directory |
//! | `output.vtk` | `false` | also write legacy VTK meshes |

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::energy::{ComponentTarget, PhysicsParams};
use crate::flow::{FlowOptions, MobilitySpec};
use crate::refsurf::{Grid, ReferenceSurface, SurfaceKind};
use crate::spectra::{raw_basis, BasisSpec};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "HELFRICH_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "helfrich-out";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("bad override '{0}': expected key=value")]
    Override(String),
    #[error("invalid config value {key}: {message}")]
    Invalid { key: &'static str, message: String },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceChoice {
    Sphere,
    Torus,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceSection {
    pub kind: SurfaceChoice,
    pub radius: f64,
    pub major: f64,
    pub minor: f64,
}

impl Default for SurfaceSection {
    fn default() -> Self {
        Self {
            kind: SurfaceChoice::Sphere,
            radius: 1.0,
            major: std::f64::consts::SQRT_2,
            minor: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n_u: usize,
    pub n_v: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n_u: 32, n_v: 64 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub kappa: f64,
    pub c0: f64,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self { kappa: 1.0, c0: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TargetChoice {
    /// Area and volume of the unperturbed reference surface.
    #[default]
    Reference,
    /// Area and volume of the perturbed initial surface.
    Initial,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstraintsSection {
    pub targets: TargetChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MobilityChoice {
    L2,
    Proxy,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub mobility: MobilityChoice,
    pub proxy_length: f64,
    pub dt0: f64,
    pub t_end: f64,
    pub grad_tol: f64,
    pub max_steps: usize,
    pub checkpoint_every: usize,
    pub snapshot_every: usize,
}

impl Default for FlowSection {
    fn default() -> Self {
        Self {
            mobility: MobilityChoice::L2,
            proxy_length: 0.25,
            dt0: 0.005,
            t_end: 10.0,
            grad_tol: 1e-8,
            max_steps: 100_000,
            checkpoint_every: 100,
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbationMode {
    None,
    /// Degree-2 zonal harmonic `(3 cos^2 u - 1) / 2` (on tori: `cos 2u`).
    Zonal2,
    Cos2u,
    Cos2v,
    /// Seeded combination of low harmonics or Fourier modes.
    Random,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationSection {
    pub mode: PerturbationMode,
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for PerturbationSection {
    fn default() -> Self {
        Self {
            mode: PerturbationMode::None,
            amplitude: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub max_degree: usize,
    pub tol: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { max_degree: 4, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecaySection {
    pub f_inf: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub n_u: Option<usize>,
    pub n_v: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub vtk: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub surface: SurfaceSection,
    pub grid: GridSection,
    pub physics: PhysicsSection,
    pub constraints: ConstraintsSection,
    pub flow: FlowSection,
    pub perturbation: PerturbationSection,
    pub spectrum: SpectrumSection,
    pub decay: DecaySection,
    pub verify: VerifySection,
    pub output: OutputSection,
}

/// Inserts `a.b.c = value` into a TOML table; the value is parsed as TOML
/// and falls back to a bare string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::Override(spec.into()))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(spec.into()));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| ConfigError::Override(spec.into()))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl Config {
    /// Parses TOML text, then applies `key=value` overrides.
    pub fn from_toml(text: &str, origin: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.into(),
            message: e.to_string(),
        })?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Config = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse {
            path: origin.into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (defaults only when `None`).
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::Read {
                    path: p.display().to_string(),
                    source: e,
                })?;
                Self::from_toml(&text, &p.display().to_string(), overrides)
            }
            None => Self::from_toml("", "<defaults>", overrides),
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let pos = |key: &'static str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(invalid(key, format!("must be positive and finite, got {x}")))
            }
        };
        match self.surface.kind {
            SurfaceChoice::Sphere => pos("surface.radius", self.surface.radius)?,
            SurfaceChoice::Torus => {
                pos("surface.major", self.surface.major)?;
                pos("surface.minor", self.surface.minor)?;
                if self.surface.minor >= self.surface.major {
                    return Err(invalid("surface.minor", "must be smaller than surface.major"));
                }
            }
        }
        pos("physics.kappa", self.physics.kappa)?;
        if !self.physics.c0.is_finite() {
            return Err(invalid("physics.c0", "must be finite"));
        }
        pos("flow.dt0", self.flow.dt0)?;
        pos("flow.t_end", self.flow.t_end)?;
        pos("flow.grad_tol", self.flow.grad_tol)?;
        pos("flow.proxy_length", self.flow.proxy_length)?;
        pos("spectrum.tol", self.spectrum.tol)?;
        if !(self.perturbation.amplitude >= 0.0 && self.perturbation.amplitude.is_finite()) {
            return Err(invalid("perturbation.amplitude", "must be nonnegative and finite"));
        }
        self.grid()?;
        Ok(())
    }

    pub fn surface(&self) -> Result<ReferenceSurface<f64>, ConfigError> {
        let s = match self.surface.kind {
            SurfaceChoice::Sphere => ReferenceSurface::sphere(self.surface.radius),
            SurfaceChoice::Torus => ReferenceSurface::torus(self.surface.major, self.surface.minor),
        };
        s.map_err(|e| invalid("surface", e.to_string()))
    }

    pub fn grid(&self) -> Result<Grid<f64>, ConfigError> {
        Grid::new(&self.surface()?, self.grid.n_u, self.grid.n_v).map_err(|e| invalid("grid", e.to_string()))
    }

    /// Grid for the verification suite: small enough that polar roundoff
    /// stays below the suite tolerances.
    pub fn verify_grid(&self) -> Result<Grid<f64>, ConfigError> {
        let (du, dv) = match self.surface.kind {
            SurfaceChoice::Sphere => (24, 48),
            SurfaceChoice::Torus => (48, 48),
        };
        let (n_u, n_v) = (self.verify.n_u.unwrap_or(du), self.verify.n_v.unwrap_or(dv));
        Grid::new(&self.surface()?, n_u, n_v).map_err(|e| invalid("verify", e.to_string()))
    }

    pub fn physics(&self) -> Result<PhysicsParams<f64>, ConfigError> {
        PhysicsParams::new(self.physics.kappa, self.physics.c0).map_err(|e| invalid("physics", e.to_string()))
    }

    pub fn mobility(&self) -> Result<MobilitySpec<f64>, ConfigError> {
        match self.flow.mobility {
            MobilityChoice::L2 => Ok(MobilitySpec::l2()),
            MobilityChoice::Proxy => {
                MobilitySpec::proxy(self.flow.proxy_length).map_err(|e| invalid("flow.proxy_length", e.to_string()))
            }
        }
    }

    pub fn flow_options(&self) -> FlowOptions<f64> {
        FlowOptions {
            dt0: self.flow.dt0,
            t_end: self.flow.t_end,
            grad_tol: self.flow.grad_tol,
            max_steps: self.flow.max_steps,
            snapshot_every: 0,
        }
    }

    pub fn basis(&self) -> BasisSpec {
        BasisSpec {
            max_degree: self.spectrum.max_degree,
        }
    }

    /// Initial height field on `grid`.
    pub fn initial_height(&self, grid: &Grid<f64>) -> Vec<f64> {
        let a = self.perturbation.amplitude;
        match self.perturbation.mode {
            PerturbationMode::None => vec![0.0; grid.len()],
            PerturbationMode::Zonal2 => match grid.surface().kind() {
                SurfaceKind::Sphere => grid.sample(|u, _| a * (1.5 * u.cos().powi(2) - 0.5)),
                SurfaceKind::Torus => grid.sample(|u, _| a * (2.0 * u).cos()),
            },
            PerturbationMode::Cos2u => grid.sample(|u, _| a * (2.0 * u).cos()),
            PerturbationMode::Cos2v => grid.sample(|_, v| a * (2.0 * v).cos()),
            PerturbationMode::Random => smooth_random_field(grid, self.perturbation.seed, a),
        }
    }

    /// Constraint target of the run.
    pub fn target(&self, grid: &Grid<f64>, h: &[f64]) -> crate::Result<ComponentTarget<f64>> {
        match self.constraints.targets {
            TargetChoice::Reference => {
                let s = grid.surface();
                ComponentTarget::new(s.area(), s.volume())
            }
            TargetChoice::Initial => {
                let (a, v) = crate::energy::area_volume(grid, h)?;
                ComponentTarget::new(a, v)
            }
        }
    }

    /// `--output-dir`, then `output.dir`, then the environment, then the default.
    pub fn output_dir(&self, cli: Option<&Path>) -> PathBuf {
        if let Some(p) = cli {
            return p.to_path_buf();
        }
        if let Some(p) = &self.output.dir {
            return p.clone();
        }
        std::env::var_os(OUTPUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }
}

/// Seeded combination of the non-constant basis functions of degree `<= 3`,
/// scaled to sup norm `amplitude`.
pub fn smooth_random_field(grid: &Grid<f64>, seed: u64, amplitude: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = vec![0.0; grid.len()];
    for (_, b) in raw_basis(grid, BasisSpec { max_degree: 3 }).into_iter().skip(1) {
        let c: f64 = rng.gen_range(-1.0..1.0);
        let m = b.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(1e-300);
        f.iter_mut().zip(&b).for_each(|(x, y)| *x += c * y / m);
    }
    let m = f.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m == 0.0 {
        return f;
    }
    f.iter().map(|x| x * amplitude / m).collect()
}
