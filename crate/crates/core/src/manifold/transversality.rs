//! Grid certificates for the local condition `T_ξ S ∩ π^⊥ = {0}` and the
//! global chord condition `<ξ - η> ∩ π^⊥ = {0}`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Param, ParametrizedManifold};
use crate::error::{Error, Result};
use crate::geometry::{wedge_abs, Subspace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransversalityOptions {
    /// Grid points per parameter axis.
    pub grid_res: usize,
    pub tol_t: f64,
    pub tol_gt: f64,
    /// Chords shorter than this are skipped.
    pub h_merge: f64,
    /// Cap on the number of points entering the O(N^2) chord scan.
    pub max_pair_points: usize,
}

impl Default for TransversalityOptions {
    fn default() -> Self {
        TransversalityOptions { grid_res: 201, tol_t: 1e-6, tol_gt: 1e-6, h_merge: 1e-8, max_pair_points: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TCheck {
    pub pass: bool,
    /// `min_ξ |T_ξ S ∧ π^⊥|` over the grid.
    pub margin: f64,
    pub witness: Param,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtCheck {
    pub pass: bool,
    /// `min |P_π(Σ(ξ) - Σ(η))| / |Σ(ξ) - Σ(η)|` over grid pairs.
    pub margin: f64,
    pub witness: (Param, Param),
    /// `Σ(ξ_0) - Σ(η_0)` for the witness pair.
    pub chord: DVector<f64>,
}

fn check_plane(manifold: &ParametrizedManifold, plane: &Subspace) -> Result<()> {
    if plane.ambient_dim() != manifold.ambient_dim() || plane.dim() != manifold.dim() {
        return Err(Error::DimensionMismatch(format!(
            "plane of dimension {} in R^{} against a {}-dimensional manifold in R^{}",
            plane.dim(),
            plane.ambient_dim(),
            manifold.dim(),
            manifold.ambient_dim()
        )));
    }
    Ok(())
}

/// Coordinate-wise golden-section descent of `f` inside the box
/// `[x0 - radius, x0 + radius] ∩ [lo, hi]`. Used to sharpen grid minima, so
/// a zero between grid points is not reported as a small positive margin.
fn refine_min(f: impl Fn(&[f64]) -> f64, x0: &[f64], radius: &[f64], lo: &[f64], hi: &[f64]) -> (f64, Vec<f64>) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x = x0.to_vec();
    let mut best = f(&x);
    for _ in 0..4 {
        for d in 0..x.len() {
            let (mut a, mut b) = ((x[d] - radius[d]).max(lo[d]), (x[d] + radius[d]).min(hi[d]));
            let mut probe = x.clone();
            let mut eval = |t: f64| {
                probe[d] = t;
                f(&probe)
            };
            let mut c = b - INV_PHI * (b - a);
            let mut e = a + INV_PHI * (b - a);
            let (mut fc, mut fe) = (eval(c), eval(e));
            for _ in 0..60 {
                if fc < fe {
                    b = e;
                    e = c;
                    fe = fc;
                    c = b - INV_PHI * (b - a);
                    fc = eval(c);
                } else {
                    a = c;
                    c = e;
                    fc = fe;
                    e = a + INV_PHI * (b - a);
                    fe = eval(e);
                }
            }
            let (t, ft) = if fc < fe { (c, fc) } else { (e, fe) };
            if ft < best {
                best = ft;
                x[d] = t;
            }
        }
    }
    (best, x)
}

fn cell_radius(manifold: &ParametrizedManifold, res: usize) -> Vec<f64> {
    let dom = manifold.domain();
    (0..dom.dim()).map(|d| dom.width(d) / (res.max(2) - 1) as f64).collect()
}

/// `argmin` keeping the first index on ties, so results do not depend on
/// the thread schedule.
fn first_min<T: Clone>(items: Vec<(f64, T)>) -> Option<(f64, T)> {
    let mut best: Option<(f64, T)> = None;
    for (v, t) in items {
        match &best {
            Some((b, _)) if !(v < *b) => {}
            _ => best = Some((v, t)),
        }
    }
    best
}

pub fn check_transversality_t(
    manifold: &ParametrizedManifold,
    plane: &Subspace,
    opts: &TransversalityOptions,
) -> Result<TCheck> {
    check_plane(manifold, plane)?;
    let normal = plane.complement();
    let grid = manifold.param_grid(opts.grid_res);
    let margins: Vec<(f64, Param)> = grid
        .into_par_iter()
        .map(|p| {
            let margin = match manifold.tangent_space(&p) {
                Ok(t) => wedge_abs(&t, &normal)?,
                Err(Error::RankDeficient { .. }) => 0.0,
                Err(e) => return Err(e),
            };
            Ok((margin, p))
        })
        .collect::<Result<_>>()?;
    let (grid_margin, grid_witness) = first_min(margins).expect("grid is never empty");
    let dom = manifold.domain();
    let branch = grid_witness.branch;
    let local = |xi: &[f64]| match manifold.tangent_space(&Param::on_branch(branch, xi.to_vec())) {
        Ok(t) => wedge_abs(&t, &normal).unwrap_or(f64::INFINITY),
        Err(_) => 0.0,
    };
    let radius = cell_radius(manifold, opts.grid_res);
    let (margin, xi) = refine_min(local, &grid_witness.xi, &radius, dom.lo(), dom.hi());
    let (margin, witness) =
        if margin < grid_margin { (margin, Param::on_branch(branch, xi)) } else { (grid_margin, grid_witness) };
    Ok(TCheck { pass: margin > opts.tol_t, margin, witness })
}

pub fn check_transversality_gt(
    manifold: &ParametrizedManifold,
    plane: &Subspace,
    opts: &TransversalityOptions,
) -> Result<GtCheck> {
    check_plane(manifold, plane)?;
    let k = manifold.dim() as u32;
    let per_branch_cap = (opts.max_pair_points / manifold.branches()).max(2);
    let mut res = opts.grid_res.max(2);
    while res > 2 && res.pow(k) > per_branch_cap {
        res -= 1;
    }
    let pts = manifold.param_grid(res);
    let images: Vec<DVector<f64>> = pts.iter().map(|p| manifold.eval(p)).collect();
    let projected: Vec<DVector<f64>> = images.iter().map(|x| plane.coords(x)).collect();
    let mins: Vec<(f64, (usize, usize))> = (0..pts.len())
        .into_par_iter()
        .filter_map(|i| {
            let mut best: Option<(f64, (usize, usize))> = None;
            for j in i + 1..pts.len() {
                let chord = (&images[i] - &images[j]).norm();
                if chord < opts.h_merge {
                    continue;
                }
                let ratio = (&projected[i] - &projected[j]).norm() / chord;
                if best.is_none_or(|(b, _)| ratio < b) {
                    best = Some((ratio, (i, j)));
                }
            }
            best
        })
        .collect();
    let (grid_margin, (i, j)) = first_min(mins)
        .ok_or_else(|| Error::InvalidInput("manifold image has no distinct grid points".into()))?;

    // refine the pair jointly in (ξ, η)
    let k = k as usize;
    let (bi, bj) = (pts[i].branch, pts[j].branch);
    let split = |z: &[f64]| (Param::on_branch(bi, z[..k].to_vec()), Param::on_branch(bj, z[k..].to_vec()));
    // near-diagonal pairs only reproduce (T); keep refined pairs apart
    let cell = cell_radius(manifold, res);
    let ratio = |z: &[f64]| {
        if bi == bj && (0..k).all(|d| (z[d] - z[k + d]).abs() < 0.5 * cell[d]) {
            return f64::INFINITY;
        }
        let (a, b) = split(z);
        let chord = manifold.eval(&a) - manifold.eval(&b);
        let len = chord.norm();
        if len < opts.h_merge {
            f64::INFINITY
        } else {
            plane.coords(&chord).norm() / len
        }
    };
    let dom = manifold.domain();
    let z0: Vec<f64> = pts[i].xi.iter().chain(&pts[j].xi).copied().collect();
    let radius: Vec<f64> = cell.repeat(2);
    let (lo, hi) = (dom.lo().repeat(2), dom.hi().repeat(2));
    let (margin, z) = refine_min(ratio, &z0, &radius, &lo, &hi);
    let witness = if margin < grid_margin { split(&z) } else { (pts[i].clone(), pts[j].clone()) };
    let margin = margin.min(grid_margin);
    let chord = manifold.eval(&witness.0) - manifold.eval(&witness.1);
    Ok(GtCheck { pass: margin > opts.tol_gt, margin, witness, chord })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ParametrizedManifold as M;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn x_axis() -> Subspace {
        Subspace::line_at_angle(0.0)
    }

    #[test]
    fn parabola_margins() {
        let par = M::parabola(1.0, 0.0, -1.0, 1.0).unwrap();
        let opts = TransversalityOptions::default();
        let t = check_transversality_t(&par, &x_axis(), &opts).unwrap();
        assert!(t.pass);
        assert_abs_diff_eq!(t.margin, 1.0 / 5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(t.witness.xi[0].abs(), 1.0, epsilon = 1e-15);
        // chord ratio 1/sqrt(1 + (ξ+η)^2) decreases toward 1/sqrt(5) as ξ, η -> ±1
        let gt = check_transversality_gt(&par, &x_axis(), &opts).unwrap();
        assert!(gt.pass);
        let h: f64 = 2.0 / 200.0;
        let on_grid = 1.0 / (1.0 + (2.0 - h).powi(2)).sqrt();
        assert!(gt.margin <= on_grid);
        assert!(gt.margin >= 1.0 / 5f64.sqrt());
        assert!(on_grid - gt.margin > 1e-4);
    }

    #[test]
    fn full_circle_fails_t() {
        let circle = M::full_circle().unwrap();
        let t = check_transversality_t(&circle, &x_axis(), &TransversalityOptions::default()).unwrap();
        assert!(!t.pass);
        assert!(t.margin < 1e-6);
        // tangent is vertical at θ = 0, π, 2π
        let th = t.witness.xi[0];
        assert!((th - PI).abs() < 1e-9 || th.abs() < 1e-9 || (th - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn segment_in_plane_has_unit_margin() {
        let seg = M::segment(&[0.0, 0.0], &[1.0, 0.0], -0.5, 0.5).unwrap();
        let opts = TransversalityOptions::default();
        let t = check_transversality_t(&seg, &x_axis(), &opts).unwrap();
        assert!(t.pass);
        assert_abs_diff_eq!(t.margin, 1.0, epsilon = 1e-15);
        let gt = check_transversality_gt(&seg, &x_axis(), &opts).unwrap();
        assert_abs_diff_eq!(gt.margin, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn two_caps_fail_gt_with_vertical_witness() {
        let caps = M::two_caps(0.5, [0.0, 1.0], 0.0).unwrap();
        let opts = TransversalityOptions::default();
        assert!(check_transversality_t(&caps, &x_axis(), &opts).unwrap().pass);
        let gt = check_transversality_gt(&caps, &x_axis(), &opts).unwrap();
        assert!(!gt.pass);
        assert_eq!(gt.margin, 0.0);
        assert_abs_diff_eq!(gt.chord[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gt.chord[1].abs(), 1.0, epsilon = 1e-15);
        assert_ne!(gt.witness.0.branch, gt.witness.1.branch);
    }

    #[test]
    fn helix_curve_satisfies_both_conditions_along_its_axis() {
        // for a connected curve, (T) implies (GT)
        let helix = M::helix(1.0 / (2.0 * PI), 0.0, 4.0 * PI, None).unwrap();
        let axis = Subspace::coordinate(3, &[2]).unwrap();
        let opts = TransversalityOptions::default();
        assert!(check_transversality_t(&helix, &axis, &opts).unwrap().pass);
        assert!(check_transversality_gt(&helix, &axis, &opts).unwrap().pass);
    }

    #[test]
    fn helicoid_satisfies_t_but_not_gt() {
        let helicoid = M::helix(1.0 / (2.0 * PI), 0.0, 4.0 * PI, Some((1.0, 2.0))).unwrap();
        let horizontal = Subspace::coordinate(3, &[0, 1]).unwrap();
        let opts = TransversalityOptions { grid_res: 41, ..Default::default() };
        assert!(check_transversality_t(&helicoid, &horizontal, &opts).unwrap().pass);
        let gt = check_transversality_gt(&helicoid, &horizontal, &opts).unwrap();
        assert!(!gt.pass);
        // points one turn apart differ by pitch * 2π = 1 along e_3
        assert_abs_diff_eq!(gt.chord[2].abs(), 1.0, epsilon = 1e-12);
        assert!(gt.chord.rows(0, 2).norm() < 1e-12);
    }

    #[test]
    fn inflection_satisfies_gt_but_not_t() {
        let cubic = M::graph(&[0.0, 0.0, 0.0, 1.0], -1.0, 1.0).unwrap();
        let vertical = Subspace::line_at_angle(PI / 2.0);
        let opts = TransversalityOptions::default();
        assert!(!check_transversality_t(&cubic, &vertical, &opts).unwrap().pass);
        assert!(check_transversality_gt(&cubic, &vertical, &opts).unwrap().pass);
    }

    #[test]
    fn degeneracy_between_grid_points_is_found() {
        // π^⊥ has slope tan(1.3 + π/2), matched by the tangent 2ξ near ξ = -0.1386
        let par = M::parabola(1.0, 0.0, -1.0, 1.0).unwrap();
        let steep = Subspace::line_at_angle(1.3);
        let opts = TransversalityOptions { grid_res: 101, ..Default::default() };
        let t = check_transversality_t(&par, &steep, &opts).unwrap();
        assert!(!t.pass, "{t:?}");
        let slope = (1.3 + PI / 2.0).tan();
        assert_abs_diff_eq!(t.witness.xi[0], slope / 2.0, epsilon = 1e-6);
        assert!(!check_transversality_gt(&par, &steep, &opts).unwrap().pass);
    }

    #[test]
    fn dimension_mismatch() {
        let par = M::parabola(1.0, 0.0, -1.0, 1.0).unwrap();
        let plane = Subspace::coordinate(3, &[0]).unwrap();
        assert!(check_transversality_t(&par, &plane, &TransversalityOptions::default()).is_err());
    }
}
