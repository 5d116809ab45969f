use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{AffinePlane, Subspace};
use crate::manifold::{Family, ParametrizedManifold, SurfaceDensity};
use crate::transform::{plane_integral_squared, QuadratureRule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    pub t: f64,
    /// `∫ |Ef(x, t)|^2 dx` over the truncation box.
    pub energy: f64,
    pub tail_bound: f64,
    pub budget_ok: bool,
}

/// For `Σ(ξ) = (ξ, c|ξ|^2)`, `Ef(x, t)` solves a free Schrödinger equation
/// and the energy at time `t` is the plane integral over `{x_n = t}`.
pub fn schrodinger_energy_scan(
    manifold: &ParametrizedManifold,
    f: &SurfaceDensity,
    t_samples: &[f64],
    q: &QuadratureRule,
) -> Result<Vec<EnergySample>> {
    if manifold.family() != Family::Paraboloid {
        return Err(Error::WrongScenario(format!("energy scan needs a paraboloid, got {}", manifold.family())));
    }
    if let Some(t) = t_samples.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidInput(format!("time sample {t} is not finite")));
    }
    let n = manifold.ambient_dim();
    let horizontal = Subspace::coordinate(n, &(0..n - 1).collect::<Vec<_>>())?;
    t_samples
        .iter()
        .map(|&t| {
            let mut offset = DVector::zeros(n);
            offset[n - 1] = t;
            let plane = AffinePlane::through(horizontal.clone(), &offset)?;
            let v = plane_integral_squared(manifold, f, &plane, q)?;
            Ok(EnergySample { t, energy: v.value, tail_bound: v.tail_bound, budget_ok: v.budget_ok })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::applications::relative_spread;

    #[test]
    fn energy_is_conserved_on_the_parabola() {
        let m = ParametrizedManifold::paraboloid(1, -1.0, 1.0, 1.0).unwrap();
        let f = SurfaceDensity::smooth_bump(m.domain());
        let q = QuadratureRule::default();
        let scan = schrodinger_energy_scan(&m, &f, &[0.0, 0.25, 0.5, 1.0], &q).unwrap();
        let energies: Vec<f64> = scan.iter().map(|s| s.energy).collect();
        assert!(relative_spread(&energies) <= 1e-3, "{energies:?}");
        let norm = f.l2_norm_sq(1, 64, 4);
        assert!((energies[0] - norm).abs() <= 1e-3 * norm);
    }

    #[test]
    fn zero_density_and_wrong_family() {
        let m = ParametrizedManifold::paraboloid(1, -1.0, 1.0, 1.0).unwrap();
        let f = SurfaceDensity::smooth_bump(m.domain()).scaled(0.0);
        let scan = schrodinger_energy_scan(&m, &f, &[0.0, 1.0], &QuadratureRule::default()).unwrap();
        assert!(scan.iter().all(|s| s.energy == 0.0));
        let par = ParametrizedManifold::parabola(1.0, 0.0, -1.0, 1.0).unwrap();
        assert!(matches!(
            schrodinger_energy_scan(&par, &f, &[0.0], &QuadratureRule::default()),
            Err(Error::WrongScenario(_))
        ));
        assert!(schrodinger_energy_scan(&m, &f, &[f64::NAN], &QuadratureRule::default()).is_err());
    }
}
