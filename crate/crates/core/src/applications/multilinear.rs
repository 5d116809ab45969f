use nalgebra::DMatrix;

use super::NORMAL_WEDGE_FLOOR;
use crate::error::{Error, Result};
use crate::manifold::{Param, ParametrizedManifold, SurfaceDensity};
use crate::quadrature::compensated_sum;
use crate::transform::{integrate_box, parameter_nodes, ExtensionKernel, QuadratureRule};

#[derive(Debug, Clone, PartialEq)]
pub struct MultilinearReport {
    /// `‖Π_j E_j g_j‖_2 / Π_j ‖g_j‖_2`.
    pub ratio: f64,
    /// `∫ Π_j |E_j g_j|^2` over the truncation box.
    pub numerator_sq: f64,
    /// `‖g_j‖_2^2` in surface measure.
    pub norms_sq: Vec<f64>,
    pub tail_bound: f64,
    /// `|det[v_1 ... v_n]|` of unit tangents at the domain centers.
    pub tangent_det: f64,
    pub budget_ok: bool,
}

/// The multilinear quantity for `n` curves in `R^n` whose tangents at the
/// centers of their domains form a basis.
pub fn multilinear_l2_ratio(
    manifolds: &[ParametrizedManifold],
    densities: &[SurfaceDensity],
    q: &QuadratureRule,
) -> Result<MultilinearReport> {
    let n = manifolds.len();
    if n == 0 || densities.len() != n {
        return Err(Error::DimensionMismatch("one density per curve is required".into()));
    }
    if manifolds.iter().any(|m| m.ambient_dim() != n || m.dim() != 1) {
        return Err(Error::DimensionMismatch(format!("need {n} curves in R^{n}")));
    }
    q.validate()?;
    let mut tangents = DMatrix::zeros(n, n);
    for (j, m) in manifolds.iter().enumerate() {
        let t = m.tangent_space(&Param::new(m.domain().center()))?;
        tangents.set_column(j, &t.basis_vector(0));
    }
    let tangent_det = tangents.determinant().abs();
    if tangent_det < NORMAL_WEDGE_FLOOR {
        return Err(Error::NormalWedgeDegenerate { min: tangent_det });
    }
    let norms_sq = manifolds
        .iter()
        .zip(densities)
        .map(|(m, f)| {
            let terms = parameter_nodes(m, q.order, q.panels)
                .into_iter()
                .map(|(p, w)| Ok(w * f.eval(&p).norm_sqr() / m.surface_jacobian(&p)?))
                .collect::<Result<Vec<f64>>>()?;
            Ok(compensated_sum(terms))
        })
        .collect::<Result<Vec<f64>>>()?;

    let x_max = q.plane_trunc_radius * (n as f64).sqrt();
    let kernels: Vec<ExtensionKernel> =
        manifolds.iter().zip(densities).map(|(m, f)| ExtensionKernel::new(m, f, q, x_max)).collect();
    let (numerator_sq, outer) = integrate_box(n, q, |x| kernels.iter().map(|k| k.eval(x).norm_sqr()).product());
    let denom: f64 = norms_sq.iter().product();
    let ratio = if denom > 0.0 {
        (numerator_sq / denom).sqrt()
    } else {
        return Err(Error::InvalidInput("a density has zero norm".into()));
    };
    Ok(MultilinearReport {
        ratio,
        numerator_sq,
        norms_sq,
        tail_bound: 3.0 * outer,
        tangent_det,
        budget_ok: kernels.iter().all(ExtensionKernel::budget_ok),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn axes() -> Vec<ParametrizedManifold> {
        vec![
            ParametrizedManifold::segment(&[0.0, 0.0], &[1.0, 0.0], -0.5, 0.5).unwrap(),
            ParametrizedManifold::segment(&[0.0, 0.0], &[0.0, 1.0], -0.5, 0.5).unwrap(),
        ]
    }

    #[test]
    fn orthogonal_segments_give_one() {
        let m = axes();
        let f: Vec<_> = m.iter().map(|m| SurfaceDensity::smooth_bump(m.domain())).collect();
        let r = multilinear_l2_ratio(&m, &f, &QuadratureRule::preset(2)).unwrap();
        assert_abs_diff_eq!(r.ratio, 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(r.tangent_det, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn homogeneous_of_degree_zero() {
        let m = vec![
            ParametrizedManifold::parabola(0.5, 0.0, -0.5, 0.5).unwrap(),
            ParametrizedManifold::parabola(0.5, -std::f64::consts::FRAC_PI_2, -0.5, 0.5).unwrap(),
        ];
        let f: Vec<_> = m.iter().map(|m| SurfaceDensity::smooth_bump(m.domain())).collect();
        let q = QuadratureRule::preset(2);
        let a = multilinear_l2_ratio(&m, &f, &q).unwrap();
        let scaled = vec![f[0].clone().scaled(3.0), f[1].clone()];
        let b = multilinear_l2_ratio(&m, &scaled, &q).unwrap();
        assert_abs_diff_eq!(a.ratio, b.ratio, epsilon = 1e-12 * a.ratio);
        assert!(a.ratio.is_finite() && a.ratio > 0.0);
    }

    #[test]
    fn parallel_tangents_are_rejected() {
        let seg = ParametrizedManifold::segment(&[0.0, 0.0], &[1.0, 0.0], -0.5, 0.5).unwrap();
        let m = vec![seg.clone(), seg];
        let f: Vec<_> = m.iter().map(|m| SurfaceDensity::smooth_bump(m.domain())).collect();
        assert!(matches!(
            multilinear_l2_ratio(&m, &f, &QuadratureRule::preset(2)),
            Err(Error::NormalWedgeDegenerate { .. })
        ));
    }
}
