//! Finite-dimensional constrained Hessian: assembly on a projected
//! harmonic basis, eigenvalues, and comparison of the near-kernel with the
//! normal components of rigid motions.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::constraints::project_tangent;
use crate::energy::{fit_multipliers, l2_gradient, PhysicsParams};
use crate::error::{Error, Result};
use crate::graphgeom::GeometryState;
use crate::hessian::{second_variation_with, HessianCoefficients, VariationField};
use crate::refsurf::{Grid, SurfaceKind};
use crate::scalar::{cross3, dot3, lit, to_f64, Real};

/// Low-order test functions in reference coordinates: spherical harmonics
/// of degree `<= max_degree` on spheres, Fourier modes `|j|, |k| <=
/// max_degree` on tori. Axisymmetric grids keep the azimuthally constant ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    pub max_degree: usize,
}

/// `P_l^m(x)` without Condon-Shortley phase or normalization.
pub fn assoc_legendre(l: usize, m: usize, x: f64) -> f64 {
    if m > l {
        return 0.0;
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0;
    for k in 0..m {
        pmm *= (2 * k + 1) as f64 * s;
    }
    if l == m {
        return pmm;
    }
    let mut p1 = x * (2 * m + 1) as f64 * pmm;
    let mut p0 = pmm;
    for ll in m + 2..=l {
        let p2 = ((2 * ll - 1) as f64 * x * p1 - (ll + m - 1) as f64 * p0) / (ll - m) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Named raw basis functions sampled on the grid.
pub fn raw_basis<T: Real>(grid: &Grid<T>, spec: BasisSpec) -> Vec<(String, Vec<T>)> {
    let l_max = spec.max_degree;
    let axi = grid.is_axisymmetric();
    let mut out = Vec::new();
    match grid.surface().kind() {
        SurfaceKind::Sphere => {
            for l in 0..=l_max {
                let m_max = if axi { 0 } else { l };
                for m in 0..=m_max {
                    let f = |u: T, v: T, s: bool| {
                        let p = assoc_legendre(l, m, to_f64(u).cos());
                        let ang = m as f64 * to_f64(v);
                        lit::<T>(p * if s { ang.sin() } else { ang.cos() })
                    };
                    out.push((format!("Y{l},{m}c"), grid.sample(|u, v| f(u, v, false))));
                    if m > 0 {
                        out.push((format!("Y{l},{m}s"), grid.sample(|u, v| f(u, v, true))));
                    }
                }
            }
        }
        SurfaceKind::Torus => {
            let k_max = if axi { 0 } else { l_max };
            for j in 0..=l_max {
                for k in 0..=k_max {
                    for (su, sv) in [(false, false), (true, false), (false, true), (true, true)] {
                        if (su && j == 0) || (sv && k == 0) {
                            continue;
                        }
                        let trig = |s: bool, x: f64| if s { x.sin() } else { x.cos() };
                        let name = format!("F{j}{}{k}{}", if su { "s" } else { "c" }, if sv { "s" } else { "c" });
                        out.push((
                            name,
                            grid.sample(|u, v| lit(trig(su, j as f64 * to_f64(u)) * trig(sv, k as f64 * to_f64(v)))),
                        ));
                    }
                }
            }
        }
    }
    out
}

/// L2(dA)-orthonormal constrained basis.
#[derive(Debug, Clone)]
pub struct ProjectedBasis<T> {
    pub names: Vec<String>,
    pub fields: Vec<Vec<T>>,
    /// Raw functions dropped as (numerically) dependent after projection.
    pub dropped: Vec<String>,
}

/// Relative norm below which a projected basis function counts as dependent.
pub const BASIS_DROP_TOL: f64 = 1e-8;

pub fn projected_basis<T: Real>(geom: &GeometryState<'_, T>, spec: BasisSpec) -> Result<ProjectedBasis<T>> {
    let mut names = Vec::new();
    let mut fields: Vec<Vec<T>> = Vec::new();
    let mut dropped = Vec::new();
    for (name, raw) in raw_basis(geom.grid(), spec) {
        let n0 = geom.norm(&raw);
        let mut w = project_tangent(geom, &raw)?;
        for _ in 0..2 {
            for e in &fields {
                let c = geom.inner(&w, e);
                for (a, &b) in w.iter_mut().zip(e) {
                    *a -= c * b;
                }
            }
        }
        let n = geom.norm(&w);
        if to_f64(n) <= BASIS_DROP_TOL * to_f64(n0) || n == T::zero() {
            dropped.push(name);
            continue;
        }
        fields.push(w.iter().map(|&x| x / n).collect());
        names.push(name);
    }
    if fields.is_empty() {
        return Err(Error::Eigen("basis is empty after projection".into()));
    }
    Ok(ProjectedBasis { names, fields, dropped })
}

/// Symmetric matrix of the constrained second variation on a basis.
#[derive(Debug, Clone)]
pub struct AssembledHessian {
    pub matrix: DMatrix<f64>,
    /// `max |M_pq - M_qp|` before symmetrization.
    pub asymmetry: f64,
    pub pressure: f64,
    pub tension: f64,
    /// `||grad F + p + q H||`; large values mean the geometry is not stationary.
    pub helfrich_residual: f64,
}

/// `M_pq = d2F(e_p, e_q) + p d2V(e_p, e_q) - q d2A(e_p, e_q)` with the
/// multipliers of the least-squares Helfrich fit, `d2V = -int H w v` and
/// `d2A = int (grad w . grad v + 2 K w v)`.
pub fn assemble_hessian<T: Real>(
    geom: &GeometryState<'_, T>,
    params: &PhysicsParams<T>,
    basis: &[Vec<T>],
) -> AssembledHessian {
    let grad = l2_gradient(geom, params);
    let fit = fit_multipliers(geom, &grad);
    let (p, q) = (fit.pressure, fit.tension);
    let coeffs = HessianCoefficients::new(geom, params);
    let vf: Vec<VariationField<T>> = basis.iter().map(|e| VariationField::new(geom, e)).collect();
    let n = basis.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let (x, y) = (&vf[a], &vf[b]);
            let mut lower = T::zero();
            for i in 0..geom.len() {
                let ww = x.values[i] * y.values[i];
                let d2v = -geom.mean[i] * ww;
                let d2a = geom.g_inv[i].apply(x.grad[i], y.grad[i]) + lit::<T>(2.0) * geom.gauss[i] * ww;
                lower += (p * d2v - q * d2a) * geom.area_weights[i];
            }
            m[(a, b)] = to_f64(second_variation_with(geom, params, &coeffs, x, y) + lower);
        }
    }
    let mut asym = 0.0f64;
    for a in 0..n {
        for b in 0..a {
            asym = asym.max((m[(a, b)] - m[(b, a)]).abs());
            let s = 0.5 * (m[(a, b)] + m[(b, a)]);
            m[(a, b)] = s;
            m[(b, a)] = s;
        }
    }
    AssembledHessian {
        matrix: m,
        asymmetry: asym,
        pressure: to_f64(p),
        tension: to_f64(q),
        helfrich_residual: to_f64(fit.residual_norm),
    }
}

/// Normal component of a rigid motion on the current surface.
#[derive(Debug, Clone)]
pub struct SymmetryField<T> {
    pub name: String,
    pub values: Vec<T>,
    /// `||w|| <= VANISHING_TOL * sqrt(area) * extent`.
    pub vanishing: bool,
}

pub const VANISHING_TOL: f64 = 1e-8;

/// `nu . e_c` for the three translations and `nu . (e_c x X)` for the
/// three rotations about the origin.
pub fn symmetry_fields<T: Real>(geom: &GeometryState<'_, T>) -> Vec<SymmetryField<T>> {
    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]].map(|a| a.map(lit::<T>));
    let extent = geom.position.iter().map(|x| to_f64(dot3(*x, *x)).sqrt()).fold(1.0f64, f64::max);
    let scale = to_f64(geom.area()).sqrt();
    let mut out = Vec::new();
    for (kind, rot) in [("translation", false), ("rotation", true)] {
        for (c, e) in axes.iter().enumerate() {
            let values: Vec<T> = geom
                .normal
                .iter()
                .zip(&geom.position)
                .map(|(n, x)| if rot { dot3(*n, cross3(*e, *x)) } else { dot3(*n, *e) })
                .collect();
            let norm = to_f64(geom.norm(&values));
            let bound = VANISHING_TOL * scale * if rot { extent } else { 1.0 };
            out.push(SymmetryField {
                name: format!("{kind}-{}", ['x', 'y', 'z'][c]),
                values,
                vanishing: norm <= bound,
            });
        }
    }
    out
}

/// Coefficients of projected symmetry fields in an orthonormal basis,
/// with the relative part of each field the basis misses.
pub fn symmetry_coefficients<T: Real>(
    geom: &GeometryState<'_, T>,
    basis: &[Vec<T>],
    fields: &[SymmetryField<T>],
) -> Result<Vec<(String, Vec<f64>, f64)>> {
    let mut out = Vec::new();
    for f in fields.iter().filter(|f| !f.vanishing) {
        let w = project_tangent(geom, &f.values)?;
        let nw = to_f64(geom.norm(&w));
        if nw == 0.0 {
            continue;
        }
        let c: Vec<f64> = basis.iter().map(|e| to_f64(geom.inner(e, &w))).collect();
        let captured: f64 = c.iter().map(|x| x * x).sum();
        let miss = (nw * nw - captured).max(0.0).sqrt() / nw;
        out.push((f.name.clone(), c, miss));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetryEntry {
    pub name: String,
    pub vanishing: bool,
    /// Relative norm of the part outside the basis span.
    pub projection_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub max_abs_eigenvalue: f64,
    pub tol: f64,
    pub near_kernel_dim: usize,
    /// Angles (radians, ascending) between the symmetry span and the near-kernel.
    pub principal_angles: Vec<f64>,
    /// Smallest eigenvalue outside the near-kernel.
    pub smallest_transverse: Option<f64>,
    pub basis_size: usize,
    pub basis_dropped: Vec<String>,
    pub asymmetry: f64,
    pub helfrich_residual: f64,
    pub symmetry: Vec<SymmetryEntry>,
    pub warnings: Vec<String>,
}

/// Eigen-analysis of a symmetric matrix against symmetry directions given
/// as coefficient vectors in the same orthonormal basis.
pub fn spectrum_report(matrix: &DMatrix<f64>, symmetry: &[Vec<f64>], tol: f64) -> Result<SpectrumReport> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() != n {
        return Err(Error::Eigen(format!("matrix is {}x{}", n, matrix.ncols())));
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(matrix.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let max_abs = eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let kernel: Vec<usize> = order.iter().copied().filter(|&k| eig.eigenvalues[k].abs() <= tol * max_abs).collect();
    let smallest_transverse = order
        .iter()
        .filter(|k| !kernel.contains(k))
        .map(|&k| eig.eigenvalues[k])
        .next();
    let principal_angles = principal_angles(&eig.eigenvectors, &kernel, symmetry, n);
    Ok(SpectrumReport {
        eigenvalues,
        max_abs_eigenvalue: max_abs,
        tol,
        near_kernel_dim: kernel.len(),
        principal_angles,
        smallest_transverse,
        basis_size: n,
        basis_dropped: Vec::new(),
        asymmetry: 0.0,
        helfrich_residual: 0.0,
        symmetry: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Angles from the sines: singular values of the symmetry span with its
/// near-kernel component removed. Accurate for small angles.
fn principal_angles(vecs: &DMatrix<f64>, kernel: &[usize], symmetry: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    for s in symmetry {
        let mut v = s.clone();
        for _ in 0..2 {
            for e in &q {
                let c: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(e).for_each(|(a, b)| *a -= c * b);
            }
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let n0 = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv > 1e-10 * n0 && nv > 0.0 {
            q.push(v.iter().map(|x| x / nv).collect());
        }
    }
    if q.is_empty() {
        return Vec::new();
    }
    let mut r = DMatrix::<f64>::zeros(n, q.len());
    for (j, v) in q.iter().enumerate() {
        let mut res = v.clone();
        for &k in kernel {
            let e = vecs.column(k);
            let c: f64 = res.iter().zip(e.iter()).map(|(a, b)| a * b).sum();
            res.iter_mut().zip(e.iter()).for_each(|(a, b)| *a -= c * b);
        }
        r.set_column(j, &nalgebra::DVector::from_vec(res));
    }
    let mut angles: Vec<f64> = r.svd(false, false).singular_values.iter().map(|s| s.clamp(0.0, 1.0).asin()).collect();
    angles.sort_by(f64::total_cmp);
    angles
}

/// Full pipeline at one geometry.
pub fn analyze<T: Real>(
    geom: &GeometryState<'_, T>,
    params: &PhysicsParams<T>,
    spec: BasisSpec,
    tol: f64,
    stationary_tol: f64,
) -> Result<SpectrumReport> {
    let basis = projected_basis(geom, spec)?;
    let hess = assemble_hessian(geom, params, &basis.fields);
    let sym = symmetry_fields(geom);
    let coeffs = symmetry_coefficients(geom, &basis.fields, &sym)?;
    let vecs: Vec<Vec<f64>> = coeffs.iter().map(|c| c.1.clone()).collect();
    let mut report = spectrum_report(&hess.matrix, &vecs, tol)?;
    report.basis_dropped = basis.dropped;
    report.asymmetry = hess.asymmetry;
    report.helfrich_residual = hess.helfrich_residual;
    report.symmetry = sym
        .iter()
        .map(|f| SymmetryEntry {
            name: f.name.clone(),
            vanishing: f.vanishing,
            projection_error: coeffs.iter().find(|c| c.0 == f.name).map_or(0.0, |c| c.2),
        })
        .collect();
    let scale = to_f64(geom.norm(&l2_gradient(geom, params))).max(1.0);
    if hess.helfrich_residual > stationary_tol * scale {
        report.warnings.push(format!(
            "geometry is not stationary: Helfrich residual {:e}",
            hess.helfrich_residual
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphgeom::pullback_geometry;
    use crate::hessian::{displaced_geometry, normal_displacement_jet};
    use crate::energy::energy;
    use crate::refsurf::{sample_grid, ReferenceSurface};

    #[test]
    fn legendre_values() {
        let x: f64 = 0.3;
        assert!((assoc_legendre(2, 0, x) - 0.5 * (3.0 * x * x - 1.0)).abs() < 1e-15);
        assert!((assoc_legendre(2, 1, x) - 3.0 * x * (1.0 - x * x).sqrt()).abs() < 1e-15);
        assert!((assoc_legendre(3, 3, x) - 15.0 * (1.0 - x * x).powf(1.5)).abs() < 1e-13);
    }

    #[test]
    fn identity_matrix_report() {
        let r = spectrum_report(&DMatrix::identity(4, 4), &[], 1e-6).unwrap();
        assert_eq!(r.near_kernel_dim, 0);
        assert_eq!(r.smallest_transverse, Some(1.0));
    }

    #[test]
    fn unit_sphere_kernel_is_translations() {
        let grid = sample_grid(&ReferenceSurface::<f64>::sphere(1.0).unwrap(), 24, 48).unwrap();
        let geom = pullback_geometry(&grid, &vec![0.0; grid.len()]).unwrap();
        let params = PhysicsParams::new(1.0, 0.0).unwrap();
        let rep = analyze(&geom, &params, BasisSpec { max_degree: 4 }, 1e-6, 1e-8).unwrap();
        assert_eq!(rep.basis_size, 24);
        assert_eq!(rep.near_kernel_dim, 3, "{:?}", rep.eigenvalues);
        assert_eq!(rep.principal_angles.len(), 3);
        assert!(rep.principal_angles.iter().all(|&a| a <= 1e-3));
        assert!(rep.symmetry.iter().filter(|s| s.vanishing).count() == 3);
        assert!(rep.asymmetry <= 1e-12 * rep.max_abs_eigenvalue);
        // degree 2 eigenvalue (l-1) l (l+1) (l+2) = 24
        assert!((rep.smallest_transverse.unwrap() - 24.0).abs() < 1e-6, "{:?}", rep.eigenvalues);
        assert!(rep.warnings.is_empty());
    }

    #[test]
    fn diagonal_matches_second_differences() {
        let grid = sample_grid(&ReferenceSurface::<f64>::sphere(1.0).unwrap(), 24, 48).unwrap();
        let geom = pullback_geometry(&grid, &vec![0.0; grid.len()]).unwrap();
        let params = PhysicsParams::new(1.0, 0.0).unwrap();
        let basis = projected_basis(&geom, BasisSpec { max_degree: 3 }).unwrap();
        let hess = assemble_hessian(&geom, &params, &basis.fields);
        let f0 = energy(&geom, &params);
        let eps = 1e-3;
        for (p, e) in basis.fields.iter().enumerate() {
            let disp = normal_displacement_jet(&geom, e);
            let fp = energy(&displaced_geometry(&geom, &disp, eps).unwrap(), &params);
            let fm = energy(&displaced_geometry(&geom, &disp, -eps).unwrap(), &params);
            let fd = (fp - 2.0 * f0 + fm) / (eps * eps);
            let exact = hess.matrix[(p, p)];
            let scale = exact.abs().max(1.0);
            assert!((fd - exact).abs() <= 1e-3 * scale, "{}: {fd} vs {exact}", basis.names[p]);
        }
    }

    #[test]
    fn torus_symmetry_fields() {
        let grid = sample_grid(&ReferenceSurface::<f64>::torus(2.0, 0.6).unwrap(), 24, 24).unwrap();
        let geom = pullback_geometry(&grid, &grid.sample(|u, v| 0.04 * (u + 2.0 * v).cos())).unwrap();
        let fields = symmetry_fields(&geom);
        let scale = geom.norm(&geom.mean) * geom.area().sqrt();
        for f in fields.iter().filter(|f| f.name.starts_with("translation")) {
            assert!(geom.integrate(&f.values).unwrap().abs() < 1e-8 * geom.area());
            assert!(geom.inner(&f.values, &geom.mean).abs() < 1e-8 * scale);
        }
        let flat = sample_grid(&ReferenceSurface::<f64>::torus(2.0, 0.6).unwrap(), 24, 24).unwrap();
        let g0 = pullback_geometry(&flat, &vec![0.0; flat.len()]).unwrap();
        let f0 = symmetry_fields(&g0);
        let vanish: Vec<&str> = f0.iter().filter(|f| f.vanishing).map(|f| f.name.as_str()).collect();
        assert_eq!(vanish, vec!["rotation-z"]);
    }
}
