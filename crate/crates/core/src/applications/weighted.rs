use crate::error::{Error, Result};
use crate::geometry::AffinePlane;
use crate::manifold::{
    check_transversality_gt, check_transversality_t, ParametrizedManifold, SurfaceDensity, TransversalityOptions,
};
use crate::quadrature::compensated_sum;
use crate::transform::{parameter_nodes, plane_integral_squared, plane_pair_weight, QuadratureRule};

/// `u = Σ_i u_i δ_{π_i}`; the singular weight `w = T* u` lives on the
/// union of the planes.
#[derive(Debug, Clone, PartialEq)]
pub struct KPlaneWeight {
    atoms: Vec<(AffinePlane, f64)>,
}

impl KPlaneWeight {
    pub fn new(atoms: Vec<(AffinePlane, f64)>) -> Result<Self> {
        if atoms.iter().any(|(_, u)| !(*u >= 0.0)) {
            return Err(Error::InvalidInput("plane weights must be nonnegative".into()));
        }
        if let Some((first, _)) = atoms.first() {
            if atoms.iter().any(|(p, _)| p.dim() != first.dim()) {
                return Err(Error::DimensionMismatch("weight atoms of different dimensions".into()));
            }
        }
        Ok(KPlaneWeight { atoms })
    }

    pub fn atoms(&self) -> &[(AffinePlane, f64)] {
        &self.atoms
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedReport {
    /// `∫ |Ef|^2 w = Σ_i u_i T(|Ef|^2)(π_i)`.
    pub lhs: f64,
    /// `∫_S |g|^2 Σ_i u_i / |π_i ∧ (T_ξ S)^⊥| dσ`.
    pub rhs: f64,
    pub rel_error: f64,
    pub tail_bound: f64,
    pub budget_ok: bool,
    /// Smallest (T) and (GT) margins over the atoms.
    pub margin: f64,
}

pub fn weighted_identity_check(
    manifold: &ParametrizedManifold,
    f: &SurfaceDensity,
    u: &KPlaneWeight,
    q: &QuadratureRule,
    opts: &TransversalityOptions,
) -> Result<WeightedReport> {
    let mut margin = f64::INFINITY;
    for (i, (plane, _)) in u.atoms.iter().enumerate() {
        let t = check_transversality_t(manifold, plane.direction(), opts)?;
        let gt = check_transversality_gt(manifold, plane.direction(), opts)?;
        if !t.pass || !gt.pass {
            return Err(Error::TransversalityViolation(format!(
                "atom {i}: (T) margin {:.3e}, (GT) margin {:.3e}",
                t.margin, gt.margin
            )));
        }
        margin = margin.min(t.margin).min(gt.margin);
    }
    let mut lhs_terms = Vec::new();
    let mut tail_bound = 0.0;
    let mut budget_ok = true;
    for (plane, weight) in &u.atoms {
        if *weight == 0.0 {
            continue;
        }
        let v = plane_integral_squared(manifold, f, plane, q)?;
        lhs_terms.push(weight * v.value);
        tail_bound += weight * v.tail_bound;
        budget_ok &= v.budget_ok;
    }
    let lhs = compensated_sum(lhs_terms);

    let mut rhs_terms = Vec::new();
    for (p, w) in parameter_nodes(manifold, q.order, q.panels) {
        let mass = w * f.eval(&p).norm_sqr() / manifold.surface_jacobian(&p)?;
        if mass == 0.0 {
            continue;
        }
        let normal = manifold.normal_frame(&p)?;
        let mut pairing = 0.0;
        for (plane, weight) in &u.atoms {
            if *weight != 0.0 {
                pairing += weight * plane_pair_weight(&normal, plane.direction())?;
            }
        }
        rhs_terms.push(mass * pairing);
    }
    let rhs = compensated_sum(rhs_terms);
    let rel_error = if rhs > 0.0 {
        (lhs - rhs).abs() / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(WeightedReport { lhs, rhs, rel_error, tail_bound, budget_ok, margin })
}
