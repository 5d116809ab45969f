//! Without (GT) the plane integrals depend on the offset: for two caps
//! stacked along `π^⊥`, `|Ef|^2` carries the interference factor
//! `|1 + exp(-2πi x·(ξ_0 - η_0))|^2`.

use nalgebra::DVector;

use super::relative_spread;
use crate::error::{Error, Result};
use crate::geometry::{AffinePlane, Subspace};
use crate::manifold::{
    check_transversality_gt, check_transversality_t, ParametrizedManifold, SurfaceDensity, TransversalityOptions,
};
use crate::transform::{plane_integral_squared, QuadratureRule};

pub const DEFAULT_VARIATION_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct GtViolationReport {
    /// Unit vector along the (GT) witness chord, projected to `π^⊥`.
    pub direction: DVector<f64>,
    pub offsets: Vec<f64>,
    pub values: Vec<f64>,
    /// `(max - min) / mean` of `values`.
    pub variation: f64,
    pub variation_floor: f64,
    pub pass: bool,
    pub gt_margin: f64,
    pub tail_bound: f64,
}

/// Evaluates `T(|Ef|^2)(π, s d)` for `s` in `offsets`, with `d` the witness
/// direction of the failed (GT) check.
pub fn gt_violation_scan(
    manifold: &ParametrizedManifold,
    f: &SurfaceDensity,
    plane: &Subspace,
    offsets: &[f64],
    q: &QuadratureRule,
    opts: &TransversalityOptions,
    variation_floor: f64,
) -> Result<GtViolationReport> {
    let gt = check_transversality_gt(manifold, plane, opts)?;
    if gt.pass {
        return Err(Error::WrongScenario(format!("(GT) holds with margin {:.3e}; nothing to scan", gt.margin)));
    }
    let t = check_transversality_t(manifold, plane, opts)?;
    if !t.pass {
        return Err(Error::TransversalityViolation(format!("(T) fails with margin {:.3e}", t.margin)));
    }
    if offsets.is_empty() {
        return Err(Error::InvalidInput("no offsets given".into()));
    }
    let normal = plane.complement();
    let along = normal.embed(normal.coords(&gt.chord).as_slice());
    let direction = &along / along.norm();
    let mut values = Vec::with_capacity(offsets.len());
    let mut tail_bound: f64 = 0.0;
    for &s in offsets {
        let v = plane_integral_squared(manifold, f, &AffinePlane::through(plane.clone(), &(&direction * s))?, q)?;
        tail_bound = tail_bound.max(v.tail_bound);
        values.push(v.value);
    }
    let variation = relative_spread(&values);
    Ok(GtViolationReport {
        direction,
        offsets: offsets.to_vec(),
        values,
        variation,
        variation_floor,
        pass: variation > variation_floor,
        gt_margin: gt.margin,
        tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn offsets() -> Vec<f64> {
        (0..=5).map(|i| i as f64 / 10.0).collect()
    }

    #[test]
    fn stacked_segments_follow_the_interference_factor() {
        let caps = ParametrizedManifold::two_caps(0.5, [0.0, 1.0], 0.0).unwrap();
        let f = SurfaceDensity::smooth_bump(caps.domain());
        let x = Subspace::line_at_angle(0.0);
        let q = QuadratureRule::default();
        let r = gt_violation_scan(&caps, &f, &x, &offsets(), &q, &TransversalityOptions::default(), 0.1).unwrap();
        assert!(r.pass);
        assert_abs_diff_eq!(r.direction[1].abs(), 1.0, epsilon = 1e-15);
        // |Ef|^2 = |ĥ(x_1)|^2 (2 + 2 cos 2πx_2), and mean over the six offsets is 2
        assert_abs_diff_eq!(r.variation, 2.0, epsilon = 1e-6);
        let norm = f.l2_norm_sq(1, 64, 4);
        for (s, v) in r.offsets.iter().zip(&r.values) {
            assert_abs_diff_eq!(v / norm, 2.0 + 2.0 * (2.0 * PI * s).cos(), epsilon = 1e-6);
        }
    }

    #[test]
    fn refuses_when_gt_holds() {
        let seg = ParametrizedManifold::segment(&[0.0, 0.0], &[1.0, 0.0], -0.5, 0.5).unwrap();
        let f = SurfaceDensity::smooth_bump(seg.domain());
        assert!(matches!(
            gt_violation_scan(
                &seg,
                &f,
                &Subspace::line_at_angle(0.0),
                &offsets(),
                &QuadratureRule::default(),
                &TransversalityOptions::default(),
                0.1
            ),
            Err(Error::WrongScenario(_))
        ));
    }
}
