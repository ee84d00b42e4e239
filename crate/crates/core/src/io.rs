//! File outputs: CSV ledger, OBJ and legacy VTK surface meshes, JSON
//! reports and versioned checkpoints.
//!
//! # Checkpoint format, version 1
//!
//! Plain UTF-8 text, one item per line. Floats use the shortest decimal
//! representation that parses back to the same bits, so a write/read cycle
//! is exact for both `f32` and `f64`.
//!
//! ```text
//! helfrich-checkpoint 1
//! scalar f64
//! step <accepted steps>
//! t <time>
//! tau <current step size>
//! components <k>
//! component <index> <n_u> <n_v> <target area> <target volume>
//! <n_u * n_v height values, row-major, one per line>
//! ... repeated for every component
//! end
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::energy::ComponentTarget;
use crate::error::{Error, Result};
use crate::flow::{DecaySeries, FlowState, Record};
use crate::graphgeom::{check_admissible, embed};
use crate::refsurf::{Grid, SurfaceKind};
use crate::scalar::{axpy3, lit, to_f64, Real};

pub const CHECKPOINT_MAGIC: &str = "helfrich-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Header row for `k` components.
pub fn ledger_header(k: usize) -> String {
    let mut s = String::from("t,F,grad_l2,grad_proxy");
    for i in 0..k {
        let _ = write!(s, ",area_{i},vol_{i}");
    }
    s.push_str(",dissipation,dt");
    s
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One data row; `grad_l2` is the projected gradient norm.
pub fn ledger_row<T: Real>(r: &Record<T>) -> String {
    let d = &r.diagnostics;
    let mut cols = vec![num(to_f64(r.t)), num(to_f64(d.energy)), num(to_f64(d.grad_projected)), num(to_f64(d.grad_proxy))];
    for (a, v) in d.areas.iter().zip(&d.volumes) {
        cols.push(num(to_f64(*a)));
        cols.push(num(to_f64(*v)));
    }
    cols.push(num(to_f64(r.dissipation)));
    cols.push(num(to_f64(r.dt)));
    cols.join(",")
}

/// Streaming ledger writer; every row is flushed so a failed run leaves a
/// complete prefix on disk.
pub struct LedgerWriter {
    out: BufWriter<fs::File>,
    path: String,
}

impl LedgerWriter {
    pub fn create(path: &Path, components: usize) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        }
        let f = fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        let mut w = Self {
            out: BufWriter::new(f),
            path: path.display().to_string(),
        };
        w.line(&ledger_header(components))?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(format!("writing {}", self.path), e))
    }

    pub fn push<T: Real>(&mut self, r: &Record<T>) -> Result<()> {
        self.line(&ledger_row(r))
    }
}

/// Reads `t`, `F` and `grad_l2` from a ledger for decay fitting.
pub fn read_ledger(path: &Path) -> Result<DecaySeries> {
    let ctx = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {ctx}"), e))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::parse(&ctx, "empty ledger"))?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::parse(&ctx, format!("missing column {name}")))
    };
    let (ct, cf, cg) = (col("t")?, col("F")?, col("grad_l2")?);
    let mut s = DecaySeries::default();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        let get = |c: usize| -> Result<f64> {
            cells
                .get(c)
                .and_then(|x| x.trim().parse().ok())
                .ok_or_else(|| Error::parse(&ctx, format!("bad value in row {}", k + 2)))
        };
        s.t.push(get(ct)?);
        s.energy.push(get(cf)?);
        s.grad.push(get(cg)?);
    }
    Ok(s)
}

/// Triangulated closed mesh of the embedded surface.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    /// Per-vertex scalar (height), poles get their ring average.
    pub heights: Vec<f64>,
}

/// Azimuthal copies used when exporting axisymmetric grids.
pub const REVOLVE_SEGMENTS: usize = 64;

/// Meshes `x + h nu`. Spheres get one vertex per pole at the ring-averaged
/// height; triangles are wound so that normals point outward.
pub fn surface_mesh<T: Real>(grid: &Grid<T>, h: &[T]) -> Result<Mesh> {
    grid.check_len(h.len())?;
    check_admissible(grid, h)?;
    if grid.is_axisymmetric() {
        let full = Grid::new(grid.surface(), grid.n_u(), REVOLVE_SEGMENTS)?;
        let hh: Vec<T> = (0..grid.n_u()).flat_map(|i| std::iter::repeat(h[i]).take(REVOLVE_SEGMENTS)).collect();
        return surface_mesh(&full, &hh);
    }
    let (n_u, n_v) = (grid.n_u(), grid.n_v());
    let pos = embed(grid, h)?;
    let mut vertices: Vec<[f64; 3]> = pos.iter().map(|p| p.map(to_f64)).collect();
    let mut heights: Vec<f64> = h.iter().map(|&x| to_f64(x)).collect();
    let id = |i: usize, j: usize| (i % n_u) * n_v + (j % n_v);
    let mut tris = Vec::with_capacity(2 * n_u * n_v);
    let rows = match grid.surface().kind() {
        SurfaceKind::Sphere => n_u - 1,
        SurfaceKind::Torus => n_u,
    };
    for i in 0..rows {
        for j in 0..n_v {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    if grid.surface().kind() == SurfaceKind::Sphere {
        let center = grid.surface().center();
        for (ring, pole_u) in [(0usize, 0.0f64), (n_u - 1, std::f64::consts::PI)] {
            let hp: T = (0..n_v).map(|j| h[id(ring, j)]).fold(T::zero(), |a, b| a + b) / lit(n_v as f64);
            let x = grid.surface().frame(lit(pole_u), T::zero()).x;
            let r = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
            let rn = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            let nu = r.map(|c| c / rn);
            let p = axpy3(hp, nu, x);
            let k = vertices.len();
            vertices.push(p.map(to_f64));
            heights.push(to_f64(hp));
            for j in 0..n_v {
                if ring == 0 {
                    tris.push([k, id(0, j), id(0, j + 1)]);
                } else {
                    tris.push([k, id(ring, j + 1), id(ring, j)]);
                }
            }
        }
    }
    if to_f64(grid.surface().orientation()) < 0.0 {
        for t in &mut tris {
            t.swap(1, 2);
        }
    }
    Ok(Mesh {
        vertices,
        triangles: tris,
        heights,
    })
}

impl Mesh {
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }

    /// Every undirected edge is used exactly twice, once in each direction.
    pub fn is_watertight(&self) -> bool {
        let mut directed: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .collect();
        directed.sort_unstable();
        if directed.windows(2).any(|w| w[0] == w[1]) {
            return false;
        }
        directed.iter().all(|&(a, b)| directed.binary_search(&(b, a)).is_ok())
    }

    /// Volume by the divergence theorem; positive for outward winding.
    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|k| self.vertices[k]);
                a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
            })
            .sum::<f64>()
            / 6.0
    }

    pub fn to_obj(&self) -> String {
        let mut s = String::with_capacity(64 * self.vertices.len());
        s.push_str("# helfrich surface\n");
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }

    pub fn to_vtk(&self) -> String {
        let mut s = String::new();
        s.push_str("# vtk DataFile Version 3.0\nhelfrich surface\nASCII\nDATASET POLYDATA\n");
        let _ = writeln!(s, "POINTS {} double", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{} {} {}", v[0], v[1], v[2]);
        }
        let _ = writeln!(s, "POLYGONS {} {}", self.triangles.len(), 4 * self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "POINT_DATA {}\nSCALARS height double 1\nLOOKUP_TABLE default", self.vertices.len());
        for h in &self.heights {
            let _ = writeln!(s, "{h}");
        }
        s
    }
}

pub fn write_obj(path: &Path, mesh: &Mesh) -> Result<()> {
    write_file(path, mesh.to_obj().as_bytes())
}

pub fn write_vtk(path: &Path, mesh: &Mesh) -> Result<()> {
    write_file(path, mesh.to_vtk().as_bytes())
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    write_file(path, format!("{text}\n").as_bytes())
}

/// Everything needed to resume a run on the same grids.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub state: FlowState<T>,
    pub shapes: Vec<(usize, usize)>,
    pub targets: Vec<ComponentTarget<T>>,
}

fn scalar_name<T: Real>() -> &'static str {
    if std::mem::size_of::<T>() == 4 {
        "f32"
    } else {
        "f64"
    }
}

impl<T: Real> Checkpoint<T> {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
        let _ = writeln!(s, "scalar {}", scalar_name::<T>());
        let _ = writeln!(s, "step {}", self.state.step);
        let _ = writeln!(s, "t {:?}", self.state.t);
        let _ = writeln!(s, "tau {:?}", self.state.tau);
        let _ = writeln!(s, "components {}", self.state.heights.len());
        for (k, ((h, shape), tg)) in self.state.heights.iter().zip(&self.shapes).zip(&self.targets).enumerate() {
            let _ = writeln!(s, "component {k} {} {} {:?} {:?}", shape.0, shape.1, tg.area, tg.volume);
            for x in h {
                let _ = writeln!(s, "{x:?}");
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let bad = |m: String| Error::parse(context, m);
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| {
            lines
                .next()
                .map(|(n, l)| (n + 1, l.trim()))
                .ok_or_else(|| bad(format!("unexpected end of file, expected {what}")))
        };
        fn field<'a>(line: (usize, &'a str), key: &str, ctx: &str) -> Result<Vec<&'a str>> {
            let mut parts = line.1.split_whitespace();
            if parts.next() != Some(key) {
                return Err(Error::parse(ctx, format!("line {}: expected '{key}'", line.0)));
            }
            Ok(parts.collect())
        }
        fn value<V: FromStr>(s: Option<&&str>, line: usize, ctx: &str) -> Result<V> {
            s.and_then(|x| x.parse().ok())
                .ok_or_else(|| Error::parse(ctx, format!("line {line}: malformed value")))
        }
        let l = next("header")?;
        let head = field(l, CHECKPOINT_MAGIC, context)?;
        let version: u32 = value(head.first(), l.0, context)?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        let l = next("scalar")?;
        let sc = field(l, "scalar", context)?;
        if sc.first().copied() != Some(scalar_name::<T>()) {
            return Err(bad(format!("checkpoint holds {:?}, expected {}", sc.first(), scalar_name::<T>())));
        }
        let l = next("step")?;
        let step = value(field(l, "step", context)?.first(), l.0, context)?;
        let l = next("t")?;
        let t = value(field(l, "t", context)?.first(), l.0, context)?;
        let l = next("tau")?;
        let tau = value(field(l, "tau", context)?.first(), l.0, context)?;
        let l = next("components")?;
        let k: usize = value(field(l, "components", context)?.first(), l.0, context)?;
        let mut heights = Vec::with_capacity(k);
        let mut shapes = Vec::with_capacity(k);
        let mut targets = Vec::with_capacity(k);
        for c in 0..k {
            let l = next("component")?;
            let f = field(l, "component", context)?;
            let idx: usize = value(f.first(), l.0, context)?;
            if idx != c {
                return Err(bad(format!("line {}: component {idx} out of order", l.0)));
            }
            let n_u: usize = value(f.get(1), l.0, context)?;
            let n_v: usize = value(f.get(2), l.0, context)?;
            let area: T = value(f.get(3), l.0, context)?;
            let volume: T = value(f.get(4), l.0, context)?;
            let mut h = Vec::with_capacity(n_u * n_v);
            for _ in 0..n_u * n_v {
                let l = next("height value")?;
                h.push(value(Some(&l.1), l.0, context)?);
            }
            heights.push(h);
            shapes.push((n_u, n_v));
            targets.push(ComponentTarget::new(area, volume)?);
        }
        let l = next("end")?;
        field(l, "end", context)?;
        Ok(Self {
            state: FlowState { t, step, tau, heights },
            shapes,
            targets,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_text().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Checks that the stored shapes match the grids of a run.
    pub fn check_grids(&self, grids: &[Grid<T>]) -> Result<()> {
        if grids.len() != self.shapes.len() {
            return Err(Error::InvalidParameter(format!(
                "checkpoint has {} components, run has {}",
                self.shapes.len(),
                grids.len()
            )));
        }
        for (g, s) in grids.iter().zip(&self.shapes) {
            if (g.n_u(), g.n_v()) != *s {
                return Err(Error::InvalidParameter(format!(
                    "checkpoint grid {}x{} does not match run grid {}x{}",
                    s.0,
                    s.1,
                    g.n_u(),
                    g.n_v()
                )));
            }
        }
        Ok(())
    }
}
