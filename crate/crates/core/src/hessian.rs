//! Material derivatives of the surface geometry under a normal velocity,
//! the linearized L2 gradient and the second variation of the energy.
//!
//! Sign note: integrating the linearization by parts gives the first-order
//! term of the second variation as `-a^{ab} w_a v_b`. The minus sign is
//! required for the translation fields of a round sphere to lie in the
//! kernel and is what every finite-difference check confirms.

use crate::energy::{l2_gradient, PhysicsParams};
use crate::error::Result;
use crate::graphgeom::{EmbeddingJet, GeometryState};
use crate::scalar::{lit, Real, Sym2};
use crate::spectral::{Parity, ScalarJet};

/// Derivatives of the mean and Gauss curvature fields.
#[derive(Debug, Clone)]
pub struct CurvatureDerivatives<T> {
    pub mean_jet: ScalarJet<T>,
    pub gauss_jet: ScalarJet<T>,
    /// `H_{;ab}`.
    pub mean_hessian: Vec<Sym2<T>>,
    pub lap_mean: Vec<T>,
    /// `H_a H^a`.
    pub grad_mean_sq: Vec<T>,
    /// `Delta (H^2 - 2K)`.
    pub lap_willmore_density: Vec<T>,
    /// `k^{ab} H_{;ab}`.
    pub shape_mean_hessian: Vec<T>,
}

impl<T: Real> CurvatureDerivatives<T> {
    pub fn new(geom: &GeometryState<'_, T>) -> Self {
        let mean_jet = geom.jet(&geom.mean);
        let gauss_jet = geom.jet(&geom.gauss);
        let mean_hessian = geom.covariant_hessian(&mean_jet);
        let lap_mean: Vec<T> = mean_hessian
            .iter()
            .zip(&geom.g_inv)
            .map(|(m, gi)| gi.trace_with(m))
            .collect();
        let grad_mean_sq = geom.gradient_dot(&mean_jet, &mean_jet);
        let two = lit::<T>(2.0);
        let wd: Vec<T> = (0..geom.len())
            .map(|i| geom.mean[i] * geom.mean[i] - two * geom.gauss[i])
            .collect();
        let lap_willmore_density = geom.laplacian_from_jet(&geom.jet(&wd));
        let shape_mean_hessian = mean_hessian
            .iter()
            .zip(&geom.k_up)
            .map(|(m, k)| k.trace_with(m))
            .collect();
        Self {
            mean_jet,
            gauss_jet,
            mean_hessian,
            lap_mean,
            grad_mean_sq,
            lap_willmore_density,
            shape_mean_hessian,
        }
    }
}

/// Coefficient fields of the linearized gradient and the second variation.
#[derive(Debug, Clone)]
pub struct HessianCoefficients<T> {
    /// `a^{ab} = (H^2/2 - 4K + 2 H C0 - C0^2/2) g^{ab} + 2 (H - C0) k^{ab}`.
    pub a_up: Vec<Sym2<T>>,
    /// Divergence of `a^{ab}` (upper index), equal by Codazzi to
    /// `2 k^{ab} H_b + 3 H H^a - 4 K^a`.
    pub a_div: Vec<[T; 2]>,
    /// Zeroth-order coefficient of the linearized gradient.
    pub b_tilde: Vec<T>,
    /// `((2 k^{ab} - H g^{ab}) H_a)_{;b}`, expanded with Codazzi as
    /// `2 k^{ab} H_{;ab} + H_a H^a - H Delta H`.
    pub divergence_term: Vec<T>,
    /// Zeroth-order coefficient of the second variation.
    pub b: Vec<T>,
}

impl<T: Real> HessianCoefficients<T> {
    pub fn new(geom: &GeometryState<'_, T>, params: &PhysicsParams<T>) -> Self {
        Self::with_derivatives(geom, params, &CurvatureDerivatives::new(geom))
    }

    pub fn with_derivatives(
        geom: &GeometryState<'_, T>,
        params: &PhysicsParams<T>,
        cd: &CurvatureDerivatives<T>,
    ) -> Self {
        let n = geom.len();
        let c0 = params.c0;
        let (half, two, three, four, five, seven) = (
            lit::<T>(0.5),
            lit::<T>(2.0),
            lit::<T>(3.0),
            lit::<T>(4.0),
            lit::<T>(5.0),
            lit::<T>(7.0),
        );
        let mut a_up = Vec::with_capacity(n);
        let mut a_div = Vec::with_capacity(n);
        let mut b_tilde = Vec::with_capacity(n);
        let mut divergence_term = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for i in 0..n {
            let (h, k) = (geom.mean[i], geom.gauss[i]);
            let gi = geom.g_inv[i];
            let ku = geom.k_up[i];
            let iso = half * h * h - four * k + two * h * c0 - half * c0 * c0;
            a_up.push(gi.scale(iso).add(&ku.scale(two * (h - c0))));
            let dh = cd.mean_jet.gradient(i);
            let dk = cd.gauss_jet.gradient(i);
            let kdh = ku.mul_vec(dh);
            let gdh = gi.mul_vec(dh);
            let gdk = gi.mul_vec(dk);
            a_div.push([
                two * kdh[0] + three * h * gdh[0] - four * gdk[0],
                two * kdh[1] + three * h * gdh[1] - four * gdk[1],
            ]);
            let (h2, h4) = (h * h, h * h * h * h);
            b_tilde.push(
                two * cd.shape_mean_hessian[i]
                    + cd.lap_willmore_density[i]
                    + cd.grad_mean_sq[i]
                    + three * half * h4
                    - seven * k * h2
                    + four * k * k
                    + two * c0 * k * h
                    - half * c0 * c0 * h2
                    + c0 * c0 * k,
            );
            let div = two * cd.shape_mean_hessian[i] + cd.grad_mean_sq[i] - h * cd.lap_mean[i];
            divergence_term.push(div);
            b.push(
                div + cd.lap_willmore_density[i] + h4 - five * k * h2 + four * k * k
                    + c0 * c0 * k,
            );
        }
        Self {
            a_up,
            a_div,
            b_tilde,
            divergence_term,
            b,
        }
    }
}

/// Right-hand sides of the material-derivative identities for normal speed `w`.
#[derive(Debug, Clone)]
pub struct MaterialDerivatives<T> {
    pub g: Vec<Sym2<T>>,
    pub g_inv: Vec<Sym2<T>>,
    pub k: Vec<Sym2<T>>,
    pub k_up: Vec<Sym2<T>>,
    /// Rate of the area density `sqrt(det g)`.
    pub area_density: Vec<T>,
    pub mean: Vec<T>,
    pub gauss: Vec<T>,
    /// `christoffel[i][c]` is the rate of `Gamma^c_{ab}`.
    pub christoffel: Vec<[Sym2<T>; 2]>,
    pub lap_mean: Vec<T>,
}

/// Covariant derivative `k_{da;b}` of the second fundamental form, as
/// `out[i][b]` = symmetric matrix in `(d, a)`.
pub fn shape_derivative<T: Real>(geom: &GeometryState<'_, T>) -> Vec<[Sym2<T>; 2]> {
    let sp = geom.grid().spectral();
    let comp = |f: fn(&Sym2<T>) -> T| -> Vec<T> { geom.k.iter().map(f).collect() };
    let (kuu, kuv, kvv) = (comp(|s| s.xx), comp(|s| s.xy), comp(|s| s.yy));
    let du = [
        sp.du(&kuu, Parity::Even),
        sp.du(&kuv, Parity::Odd),
        sp.du(&kvv, Parity::Even),
    ];
    let dv = [sp.dv(&kuu), sp.dv(&kuv), sp.dv(&kvv)];
    (0..geom.len())
        .map(|i| {
            let k = geom.k[i];
            let chr = &geom.christoffel[i];
            let mut out = [Sym2::zero(); 2];
            for (bb, slot) in out.iter_mut().enumerate() {
                let d = if bb == 0 { &du } else { &dv };
                let partial = Sym2::new(d[0][i], d[1][i], d[2][i]);
                let entry = |dd: usize, a: usize| {
                    let mut v = partial.get(dd, a);
                    for m in 0..2 {
                        v -= chr[m].get(bb, dd) * k.get(m, a) + chr[m].get(bb, a) * k.get(dd, m);
                    }
                    v
                };
                *slot = Sym2::new(entry(0, 0), entry(0, 1), entry(1, 1));
            }
            out
        })
        .collect()
}

pub fn material_derivatives<T: Real>(
    geom: &GeometryState<'_, T>,
    w: &[T],
) -> Result<MaterialDerivatives<T>> {
    geom.grid().check_len(w.len())?;
    let n = geom.len();
    let two = lit::<T>(2.0);
    let three = lit::<T>(3.0);
    let four = lit::<T>(4.0);
    let cd = CurvatureDerivatives::new(geom);
    let wj = geom.jet(w);
    let w_hess = geom.covariant_hessian(&wj);
    let lap_w: Vec<T> = w_hess
        .iter()
        .zip(&geom.g_inv)
        .map(|(m, gi)| gi.trace_with(m))
        .collect();
    let bilap_w = geom.laplacian_from_jet(&geom.jet(&lap_w));
    let dk = shape_derivative(geom);

    let mut md = MaterialDerivatives {
        g: Vec::with_capacity(n),
        g_inv: Vec::with_capacity(n),
        k: Vec::with_capacity(n),
        k_up: Vec::with_capacity(n),
        area_density: Vec::with_capacity(n),
        mean: Vec::with_capacity(n),
        gauss: Vec::with_capacity(n),
        christoffel: Vec::with_capacity(n),
        lap_mean: Vec::with_capacity(n),
    };
    for i in 0..n {
        let wi = w[i];
        let (g, gi, k, ku) = (geom.g[i], geom.g_inv[i], geom.k[i], geom.k_up[i]);
        let (h, kg) = (geom.mean[i], geom.gauss[i]);
        md.g.push(k.scale(-two * wi));
        md.g_inv.push(ku.scale(two * wi));
        md.k.push(w_hess[i].sub(&k.sandwich(&gi).scale(wi)));
        md.k_up
            .push(w_hess[i].congruence(&gi).add(&ku.sandwich(&g).scale(three * wi)));
        md.area_density.push(-wi * h * geom.sqrt_g[i]);
        md.mean.push(lap_w[i] + wi * (h * h - two * kg));
        md.gauss
            .push(wi * kg * h + h * lap_w[i] - ku.trace_with(&w_hess[i]));

        // rate of Gamma^c_ab = -k^c_a w_b - k^c_b w_a + k_ab w^c - w k^c_{a;b}
        let dw = wj.gradient(i);
        let w_up = gi.mul_vec(dw);
        let mixed = |c: usize, a: usize| gi.get(c, 0) * k.get(0, a) + gi.get(c, 1) * k.get(1, a);
        let dk_up = |c: usize, a: usize, b: usize| {
            gi.get(c, 0) * dk[i][b].get(0, a) + gi.get(c, 1) * dk[i][b].get(1, a)
        };
        let entry = |c: usize, a: usize, b: usize| {
            -mixed(c, a) * dw[b] - mixed(c, b) * dw[a] + k.get(a, b) * w_up[c]
                - wi * dk_up(c, a, b)
        };
        md.christoffel.push([
            Sym2::new(entry(0, 0, 0), entry(0, 0, 1), entry(0, 1, 1)),
            Sym2::new(entry(1, 0, 0), entry(1, 0, 1), entry(1, 1, 1)),
        ]);

        let dh = cd.mean_jet.gradient(i);
        let dkg = cd.gauss_jet.gradient(i);
        let first = two * ku.apply(dw, dh) + three * h * gi.apply(dw, dh) - four * gi.apply(dw, dkg);
        md.lap_mean.push(
            bilap_w[i]
                + lap_w[i] * (h * h - two * kg)
                + first
                + wi * (two * cd.shape_mean_hessian[i]
                    + cd.grad_mean_sq[i]
                    + cd.lap_willmore_density[i]),
        );
    }
    Ok(md)
}

/// `Delta w`, its jet and `Delta^2 w`.
struct LaplaceData<T> {
    jet: ScalarJet<T>,
    hess: Vec<Sym2<T>>,
    lap: Vec<T>,
}

fn laplace_data<T: Real>(geom: &GeometryState<'_, T>, w: &[T]) -> LaplaceData<T> {
    let jet = geom.jet(w);
    let hess = geom.covariant_hessian(&jet);
    let lap = hess
        .iter()
        .zip(&geom.g_inv)
        .map(|(m, gi)| gi.trace_with(m))
        .collect();
    LaplaceData { jet, hess, lap }
}

/// `kappa (Delta^2 w + (a^{ab} w_a)_{;b} + b_tilde w)`.
pub fn linearized_gradient<T: Real>(
    geom: &GeometryState<'_, T>,
    params: &PhysicsParams<T>,
    w: &[T],
) -> Result<Vec<T>> {
    geom.grid().check_len(w.len())?;
    let coeffs = HessianCoefficients::new(geom, params);
    Ok(linearized_gradient_with(geom, params, &coeffs, w))
}

pub fn linearized_gradient_with<T: Real>(
    geom: &GeometryState<'_, T>,
    params: &PhysicsParams<T>,
    coeffs: &HessianCoefficients<T>,
    w: &[T],
) -> Vec<T> {
    let ld = laplace_data(geom, w);
    let bilap = geom.laplacian_from_jet(&geom.jet(&ld.lap));
    (0..geom.len())
        .map(|i| {
            let dw = ld.jet.gradient(i);
            params.kappa
                * (bilap[i]
                    + coeffs.a_up[i].trace_with(&ld.hess[i])
                    + coeffs.a_div[i][0] * dw[0]
                    + coeffs.a_div[i][1] * dw[1]
                    + coeffs.b_tilde[i] * w[i])
        })
        .collect()
}

/// Precomputed first and second derivative data of a test field, so that
/// many second-variation entries can share it.
#[derive(Debug, Clone)]
pub struct VariationField<T> {
    pub values: Vec<T>,
    pub grad: Vec<[T; 2]>,
    pub lap: Vec<T>,
}

impl<T: Real> VariationField<T> {
    pub fn new(geom: &GeometryState<'_, T>, w: &[T]) -> Self {
        let ld = laplace_data(geom, w);
        Self {
            values: w.to_vec(),
            grad: (0..geom.len()).map(|i| ld.jet.gradient(i)).collect(),
            lap: ld.lap,
        }
    }
}

/// `kappa int (Delta w Delta v - a^{ab} w_a v_b + b w v) dA` from
/// precomputed fields. Symmetric in its arguments bit for bit.
pub fn second_variation_with<T: Real>(
    geom: &GeometryState<'_, T>,
    params: &PhysicsParams<T>,
    coeffs: &HessianCoefficients<T>,
    w: &VariationField<T>,
    v: &VariationField<T>,
) -> T {
    let s: T = (0..geom.len())
        .map(|i| {
            (w.lap[i] * v.lap[i] - coeffs.a_up[i].apply(w.grad[i], v.grad[i])
                + coeffs.b[i] * (w.values[i] * v.values[i]))
                * geom.area_weights[i]
        })
        .sum();
    params.kappa * s
}

pub fn second_variation<T: Real>(
    geom: &GeometryState<'_, T>,
    params: &PhysicsParams<T>,
    w: &[T],
    v: &[T],
) -> Result<T> {
    geom.grid().check_len(w.len())?;
    geom.grid().check_len(v.len())?;
    let coeffs = HessianCoefficients::new(geom, params);
    let (fw, fv) = (VariationField::new(geom, w), VariationField::new(geom, v));
    Ok(second_variation_with(geom, params, &coeffs, &fw, &fv))
}

/// Jet of the displacement `w nu_h`. Adding `eps` times it to the geometry's
/// own embedding jet moves every chart point along the graph normal with
/// speed `w`, which is the path the material derivatives refer to.
pub fn normal_displacement_jet<T: Real>(geom: &GeometryState<'_, T>, w: &[T]) -> EmbeddingJet<T> {
    let q: Vec<[T; 3]> = w
        .iter()
        .zip(&geom.normal)
        .map(|(&wi, n)| [wi * n[0], wi * n[1], wi * n[2]])
        .collect();
    EmbeddingJet::spectral(geom.grid(), q)
}

/// Geometry of `phi_h + eps w nu_h`.
pub fn displaced_geometry<'g, T: Real>(
    geom: &GeometryState<'g, T>,
    displacement: &EmbeddingJet<T>,
    eps: T,
) -> Result<GeometryState<'g, T>> {
    let jet = geom.embedding_jet().offset(eps, displacement);
    GeometryState::from_jet(geom.grid(), geom.h.clone(), &jet)
}

/// `int grad F * H * w * v dA`: the difference between the symmetrized
/// linearization and the second variation.
pub fn adjoint_correction<T: Real>(
    geom: &GeometryState<'_, T>,
    params: &PhysicsParams<T>,
    w: &[T],
    v: &[T],
) -> T {
    let grad = l2_gradient(geom, params);
    (0..geom.len())
        .map(|i| grad[i] * geom.mean[i] * w[i] * v[i] * geom.area_weights[i])
        .sum()
}
