//! Convolution of two squared extensions from transverse curves in the
//! plane, and the linear algebra that reduces it to the plane identity for
//! the product manifold.

use nalgebra::{DMatrix, DVector};

use super::relative_spread;
use crate::error::{Error, Result};
use crate::geometry::{wedge_abs, Subspace};
use crate::manifold::{ParametrizedManifold, SurfaceDensity};
use crate::quadrature::compensated_sum;
use crate::transform::{integrate_box, parameter_nodes, ExtensionKernel, QuadratureRule};

/// Minimum admissible `|v_1 ∧ v_2|` of unit normals.
pub const NORMAL_WEDGE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionReport {
    /// `(|E_1 g_1|^2 * |E_2 g_2|^2)(x)` per sample.
    pub lhs: Vec<f64>,
    /// `∫∫ |g_1|^2 |g_2|^2 / |v_1 ∧ v_2| dσ_1 dσ_2`.
    pub rhs: f64,
    pub rel_errors: Vec<f64>,
    pub max_rel_error: f64,
    /// Relative spread of `lhs` across samples.
    pub spread: f64,
    pub min_normal_wedge: f64,
    pub tail_bound: f64,
    pub budget_ok: bool,
}

struct NormalNode {
    mass: f64,
    normal: [f64; 2],
}

fn normal_nodes(m: &ParametrizedManifold, f: &SurfaceDensity, q: &QuadratureRule) -> Result<Vec<NormalNode>> {
    parameter_nodes(m, q.order, q.panels)
        .into_iter()
        .map(|(p, w)| {
            let v = m.normal_frame(&p)?.basis_vector(0);
            Ok(NormalNode { mass: w * f.eval(&p).norm_sqr() / m.surface_jacobian(&p)?, normal: [v[0], v[1]] })
        })
        .collect()
}

fn grid_normals(m: &ParametrizedManifold) -> Result<Vec<[f64; 2]>> {
    m.param_grid(65)
        .iter()
        .map(|p| {
            let v = m.normal_frame(p)?.basis_vector(0);
            Ok([v[0], v[1]])
        })
        .collect()
}

fn cross(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] * b[1] - a[1] * b[0]).abs()
}

/// Checks that `x ↦ (|E_1 g_1|^2 * |E_2 g_2|^2)(x)` is the constant
/// `∫∫ |g_1|^2 |g_2|^2 / |v_1 ∧ v_2|` for two curves in `R^2`.
///
/// The convolution at `x` is integrated as
/// `∫ |E_1 g_1(x/2 + c)|^2 |E_2 g_2(x/2 - c)|^2 dc` over `c ∈ [-R, R]^2`,
/// which centers the truncation box on the bulk of the integrand.
pub fn convolution_identity_check(
    manifolds: &[ParametrizedManifold],
    densities: &[SurfaceDensity],
    x_samples: &[DVector<f64>],
    q: &QuadratureRule,
) -> Result<ConvolutionReport> {
    if manifolds.len() != 2 || densities.len() != 2 {
        return Err(Error::DimensionMismatch("the convolution check takes exactly two curves in R^2".into()));
    }
    if manifolds.iter().any(|m| m.ambient_dim() != 2 || m.dim() != 1) {
        return Err(Error::DimensionMismatch("the convolution check takes curves in R^2".into()));
    }
    if x_samples.is_empty() || x_samples.iter().any(|x| x.len() != 2) {
        return Err(Error::DimensionMismatch("sample points must lie in R^2".into()));
    }
    q.validate()?;

    let a = normal_nodes(&manifolds[0], &densities[0], q)?;
    let b = normal_nodes(&manifolds[1], &densities[1], q)?;
    let ga = grid_normals(&manifolds[0])?;
    let gb = grid_normals(&manifolds[1])?;
    let mut min_wedge = f64::INFINITY;
    for u in a.iter().map(|n| &n.normal).chain(&ga) {
        for v in b.iter().map(|n| &n.normal).chain(&gb) {
            min_wedge = min_wedge.min(cross(u, v));
        }
    }
    if min_wedge < NORMAL_WEDGE_FLOOR {
        return Err(Error::NormalWedgeDegenerate { min: min_wedge });
    }
    let rhs = compensated_sum(
        a.iter().flat_map(|u| b.iter().map(move |v| u.mass * v.mass / cross(&u.normal, &v.normal))),
    );

    let reach = x_samples.iter().map(|x| x.norm()).fold(0.0, f64::max) / 2.0;
    let x_max = q.plane_trunc_radius * 2f64.sqrt() + reach;
    let e1 = ExtensionKernel::new(&manifolds[0], &densities[0], q, x_max);
    let e2 = ExtensionKernel::new(&manifolds[1], &densities[1], q, x_max);
    let mut lhs = Vec::with_capacity(x_samples.len());
    let mut tail_bound: f64 = 0.0;
    for x in x_samples {
        let (h0, h1) = (x[0] / 2.0, x[1] / 2.0);
        let (value, outer) = integrate_box(2, q, |c| {
            e1.eval(&[h0 + c[0], h1 + c[1]]).norm_sqr() * e2.eval(&[h0 - c[0], h1 - c[1]]).norm_sqr()
        });
        tail_bound = tail_bound.max(3.0 * outer);
        lhs.push(value);
    }
    let rel_errors: Vec<f64> = lhs
        .iter()
        .map(|l| if rhs > 0.0 { (l - rhs).abs() / rhs } else if *l == 0.0 { 0.0 } else { f64::INFINITY })
        .collect();
    Ok(ConvolutionReport {
        max_rel_error: rel_errors.iter().copied().fold(0.0, f64::max),
        spread: relative_spread(&lhs),
        lhs,
        rhs,
        rel_errors,
        min_normal_wedge: min_wedge,
        tail_bound,
        budget_ok: e1.budget_ok() && e2.budget_ok(),
    })
}

/// For unit normals `v_1, ..., v_n` of hypersurfaces in `R^n`, returns
/// `(|N ∧ π|, n^{-n/2} |det[v_1 ... v_n]|)` where `N ⊂ R^{n^2}` is the normal
/// space of the product manifold and `π = {Σ_j x_j = 0}`.
pub fn product_wedge_factor(normals: &[DVector<f64>]) -> Result<(f64, f64)> {
    let n = normals.len();
    if n == 0 || normals.iter().any(|v| v.len() != n) {
        return Err(Error::DimensionMismatch(format!("need {n} normals in R^{n}")));
    }
    if let Some(v) = normals.iter().find(|v| (v.norm() - 1.0).abs() > 1e-12) {
        return Err(Error::InvalidInput(format!("normal of length {} is not a unit vector", v.norm())));
    }
    let big = n * n;
    let mut normal_space = DMatrix::zeros(big, n);
    for (j, v) in normals.iter().enumerate() {
        normal_space.view_mut((j * n, j), (n, 1)).copy_from(v);
    }
    let mut diagonal = DMatrix::zeros(big, n);
    let s = 1.0 / (n as f64).sqrt();
    for i in 0..n {
        for j in 0..n {
            diagonal[(j * n + i, i)] = s;
        }
    }
    // the normal blocks are disjoint, so the columns are already orthonormal
    let normal_space = Subspace::from_columns(&normal_space)?;
    let zero_sum = Subspace::from_columns(&diagonal)?.complement();
    let direct = wedge_abs(&normal_space, &zero_sum)?;
    let det = DMatrix::from_fn(n, n, |i, j| normals[j][i]).determinant().abs();
    Ok((direct, (n as f64).powf(-(n as f64) / 2.0) * det))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;
    use std::f64::consts::PI;

    fn segment_at(angle: f64) -> ParametrizedManifold {
        ParametrizedManifold::segment(&[0.0, 0.0], &[angle.cos(), angle.sin()], -0.5, 0.5).unwrap()
    }

    fn fast() -> QuadratureRule {
        QuadratureRule::preset(2)
    }

    #[test]
    fn orthogonal_segments_factor() {
        let m = [segment_at(0.0), segment_at(PI / 2.0)];
        let f = [SurfaceDensity::smooth_bump(m[0].domain()), SurfaceDensity::smooth_bump(m[1].domain())];
        let norm = f[0].l2_norm_sq(1, 64, 4);
        let xs = [dvector![0.0, 0.0], dvector![0.7, -1.3]];
        let r = convolution_identity_check(&m, &f, &xs, &fast()).unwrap();
        assert_abs_diff_eq!(r.rhs, norm * norm, epsilon = 1e-12);
        assert!(r.max_rel_error < 1e-6, "{r:?}");
        assert_eq!(r.min_normal_wedge, 1.0);
    }

    #[test]
    fn constant_wedge_segments() {
        let m = [segment_at(0.0), segment_at(PI / 3.0)];
        let f = [SurfaceDensity::smooth_bump(m[0].domain()), SurfaceDensity::smooth_bump(m[1].domain())];
        let norm = f[0].l2_norm_sq(1, 64, 4);
        let r = convolution_identity_check(&m, &f, &[dvector![0.3, 0.2]], &fast()).unwrap();
        assert_abs_diff_eq!(r.rhs, norm * norm / (PI / 3.0).sin(), epsilon = 1e-12);
        assert!(r.max_rel_error < 0.02, "{r:?}");
    }

    #[test]
    fn parallel_normals_are_rejected() {
        let m = [segment_at(0.0), segment_at(1e-8)];
        let f = [SurfaceDensity::smooth_bump(m[0].domain()), SurfaceDensity::smooth_bump(m[1].domain())];
        assert!(matches!(
            convolution_identity_check(&m, &f, &[dvector![0.0, 0.0]], &fast()),
            Err(Error::NormalWedgeDegenerate { .. })
        ));
    }

    #[test]
    fn product_wedge_examples() {
        let (a, b) = product_wedge_factor(&[dvector![0.0, 1.0], dvector![1.0, 0.0]]).unwrap();
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(b, 0.5, epsilon = 1e-14);
        let (a, b) = product_wedge_factor(&[dvector![0.6, 0.8], dvector![0.6, 0.8]]).unwrap();
        assert_abs_diff_eq!(a, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b, 0.0, epsilon = 1e-14);
        let e = |i: usize| DVector::from_fn(3, |r, _| if r == i { 1.0 } else { 0.0 });
        let (a, b) = product_wedge_factor(&[e(1), e(2), e(0)]).unwrap();
        assert_abs_diff_eq!(a, 3f64.powf(-1.5), epsilon = 1e-14);
        assert_abs_diff_eq!(b, 0.19245008972987526, epsilon = 1e-14);
        assert!(product_wedge_factor(&[dvector![1.0, 0.0]]).is_err());
        assert!(product_wedge_factor(&[dvector![2.0, 0.0], dvector![0.0, 1.0]]).is_err());
    }
}
