//! Reparametrization of `S` as a graph `u ↦ u + φ(u)` over a plane `π`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{
    check_transversality_gt, check_transversality_t, Family, Param, ParamBox, ParametrizedManifold,
    TransversalityOptions,
};
use crate::error::{Error, Result};
use crate::geometry::{wedge_abs, Subspace};

const MAX_NEWTON_STEPS: usize = 50;
const ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    /// Coordinates of the base point in the orthonormal basis of `π`.
    pub u: Vec<f64>,
    pub param: Param,
    /// `φ(u) ∈ π^⊥`.
    pub phi: DVector<f64>,
    /// `J(u) = 1 / |T_{Σ(u)} S ∧ π^⊥|`.
    pub jacobian: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
struct Seeds {
    coords: Vec<DVector<f64>>,
    params: Vec<Param>,
}

/// `S = {u + φ(u) : u ∈ U_π}` sampled on a grid of `U_π`.
#[derive(Debug, Clone)]
pub struct GraphChart {
    manifold: ParametrizedManifold,
    plane: Subspace,
    normal: Subspace,
    proj_box: ParamBox,
    seeds: Arc<Seeds>,
    points: Vec<ChartPoint>,
}

impl GraphChart {
    pub fn plane(&self) -> &Subspace {
        &self.plane
    }

    /// Bounding box of the projected image `P_π S` in plane coordinates.
    pub fn proj_box(&self) -> &ParamBox {
        &self.proj_box
    }

    pub fn points(&self) -> &[ChartPoint] {
        &self.points
    }

    /// Solves `P_π Σ(ξ) = u` and returns the chart data at `u`.
    pub fn solve(&self, u: &[f64]) -> Result<ChartPoint> {
        let target = DVector::from_column_slice(u);
        let xi = solve_projection(&self.manifold, &self.plane, &self.seeds, &target, None)?;
        self.chart_point(u.to_vec(), xi.0, xi.1)
    }

    fn chart_point(&self, u: Vec<f64>, param: Param, residual: f64) -> Result<ChartPoint> {
        let x = self.manifold.eval(&param);
        let phi = &x - self.plane.basis() * self.plane.coords(&x);
        let tangent = self.manifold.tangent_space(&param)?;
        let wedge = wedge_abs(&tangent, &self.normal)?;
        if wedge <= 1e-10 {
            return Err(Error::TransversalityViolation(format!("tangent meets π^⊥ at {param}")));
        }
        Ok(ChartPoint { u, param, phi, jacobian: 1.0 / wedge, residual })
    }

    /// Surface Jacobian of `u ↦ B u + φ(u)` by the implicit function theorem,
    /// `D(Bu + φ) = DΣ (Bᵀ DΣ)^{-1}`. Independent of `ChartPoint::jacobian`.
    pub fn implicit_jacobian(&self, point: &ChartPoint) -> Result<f64> {
        let d = self.manifold.tangent_frame(&point.param)?;
        let inv = self
            .plane
            .basis()
            .tr_mul(&d)
            .try_inverse()
            .ok_or_else(|| Error::TransversalityViolation(format!("projection is singular at {}", point.param)))?;
        let g = &d * inv;
        Ok(g.tr_mul(&g).determinant().sqrt())
    }

    /// The graph map `u ↦ B u + φ(u)` over `box` (plane coordinates) as a
    /// manifold without analytic derivative. Points whose projection cannot
    /// be solved evaluate to NaN.
    pub fn induced_manifold(&self, domain: ParamBox) -> ParametrizedManifold {
        let manifold = self.manifold.clone();
        let plane = self.plane.clone();
        let seeds = self.seeds.clone();
        let n = manifold.ambient_dim();
        ParametrizedManifold::new(n, domain, Family::Custom, move |_, u| {
            let target = DVector::from_column_slice(u);
            match solve_projection(&manifold, &plane, &seeds, &target, None) {
                Ok((p, _)) => manifold.eval(&p),
                Err(_) => DVector::from_element(n, f64::NAN),
            }
        })
    }
}

/// Builds the chart after certifying (T) and (GT) on the grid.
pub fn graph_reparametrize(
    manifold: &ParametrizedManifold,
    plane: &Subspace,
    opts: &TransversalityOptions,
) -> Result<GraphChart> {
    let t = check_transversality_t(manifold, plane, opts)?;
    if !t.pass {
        return Err(Error::TransversalityViolation(format!(
            "(T) fails: margin {:.3e} at {}",
            t.margin, t.witness
        )));
    }
    let gt = check_transversality_gt(manifold, plane, opts)?;
    if !gt.pass {
        return Err(Error::TransversalityViolation(format!(
            "(GT) fails: margin {:.3e} for {} / {}",
            gt.margin, gt.witness.0, gt.witness.1
        )));
    }
    let k = manifold.dim();
    let params = manifold.param_grid(opts.grid_res);
    let coords: Vec<DVector<f64>> = params.iter().map(|p| plane.coords(&manifold.eval(p))).collect();
    let lo: Vec<f64> = (0..k).map(|d| coords.iter().map(|c| c[d]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..k).map(|d| coords.iter().map(|c| c[d]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let proj_box = ParamBox::new(lo, hi)?;
    let seeds = Arc::new(Seeds { coords, params });
    let mut chart = GraphChart {
        manifold: manifold.clone(),
        plane: plane.clone(),
        normal: plane.complement(),
        proj_box: proj_box.clone(),
        seeds: seeds.clone(),
        points: Vec::new(),
    };
    let mut previous: Option<Param> = None;
    for u in proj_box.grid(opts.grid_res) {
        let target = DVector::from_column_slice(&u);
        match solve_projection(manifold, plane, &seeds, &target, previous.as_ref()) {
            Ok((p, res)) => {
                previous = Some(p.clone());
                let point = chart.chart_point(u, p, res)?;
                chart.points.push(point);
            }
            // a curve's projection is an interval, so every sample must solve
            Err(e) if k == 1 => return Err(e),
            Err(_) => previous = None,
        }
    }
    Ok(chart)
}

fn residual_at(
    manifold: &ParametrizedManifold,
    plane: &Subspace,
    p: &Param,
    target: &DVector<f64>,
) -> DVector<f64> {
    plane.coords(&manifold.eval(p)) - target
}

/// Jacobian of `ξ ↦ P_π Σ(ξ)` in plane coordinates by central differences.
fn projected_jacobian(manifold: &ParametrizedManifold, plane: &Subspace, p: &Param) -> DMatrix<f64> {
    let k = manifold.dim();
    let mut jac = DMatrix::zeros(k, k);
    for i in 0..k {
        let h = 1e-7 * manifold.domain().width(i);
        let mut plus = p.clone();
        let mut minus = p.clone();
        plus.xi[i] += h;
        minus.xi[i] -= h;
        let col = (plane.coords(&manifold.eval(&plus)) - plane.coords(&manifold.eval(&minus))) / (2.0 * h);
        jac.set_column(i, &col);
    }
    jac
}

fn newton(
    manifold: &ParametrizedManifold,
    plane: &Subspace,
    seed: &Param,
    target: &DVector<f64>,
) -> Option<(Param, f64)> {
    let mut p = seed.clone();
    let mut r = residual_at(manifold, plane, &p, target);
    let mut rnorm = r.norm();
    let scale = 1.0 + target.norm();
    for _ in 0..MAX_NEWTON_STEPS {
        if rnorm <= 1e-15 * scale {
            break;
        }
        let jac = projected_jacobian(manifold, plane, &p);
        let step = jac.lu().solve(&(-&r))?;
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let mut trial = p.clone();
            for (x, s) in trial.xi.iter_mut().zip(step.iter()) {
                *x += lambda * s;
            }
            manifold.domain().clamp(&mut trial.xi);
            let tr = residual_at(manifold, plane, &trial, target);
            let tn = tr.norm();
            if tn < rnorm {
                p = trial;
                r = tr;
                rnorm = tn;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (rnorm < ROOT_TOL).then_some((p, rnorm))
}

/// Bisection on the seed grid of a curve, used when Newton stalls.
fn bisect_curve(
    manifold: &ParametrizedManifold,
    plane: &Subspace,
    seeds: &Seeds,
    target: &DVector<f64>,
) -> Option<(Param, f64)> {
    let f = |p: &Param| residual_at(manifold, plane, p, target)[0];
    for w in seeds.params.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.branch != b.branch {
            continue;
        }
        let (fa, fb) = (f(a), f(b));
        if fa == 0.0 {
            return Some((a.clone(), 0.0));
        }
        if fa * fb > 0.0 {
            continue;
        }
        let (mut lo, mut hi) = (a.xi[0], b.xi[0]);
        let mut flo = fa;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = f(&Param::on_branch(a.branch, vec![mid]));
            if (fm < 0.0) == (flo < 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let p = Param::on_branch(a.branch, vec![0.5 * (lo + hi)]);
        let polished = newton(manifold, plane, &p, target);
        return polished.or_else(|| {
            let r = f(&p).abs();
            (r < ROOT_TOL).then_some((p, r))
        });
    }
    None
}

fn solve_projection(
    manifold: &ParametrizedManifold,
    plane: &Subspace,
    seeds: &Seeds,
    target: &DVector<f64>,
    warm: Option<&Param>,
) -> Result<(Param, f64)> {
    let nearest = seeds
        .coords
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - target).norm().total_cmp(&(b.1 - target).norm()))
        .map(|(i, _)| &seeds.params[i]);
    for seed in warm.into_iter().chain(nearest) {
        if let Some(found) = newton(manifold, plane, seed, target) {
            return Ok(found);
        }
    }
    if manifold.dim() == 1 {
        if let Some(found) = bisect_curve(manifold, plane, seeds, target) {
            return Ok(found);
        }
    }
    Err(Error::RootFindFailure(format!("no parameter projects onto {:?}", target.as_slice())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn x_axis() -> Subspace {
        Subspace::line_at_angle(0.0)
    }

    #[test]
    fn parabola_is_already_a_graph() {
        let par = ParametrizedManifold::parabola(1.0, 0.0, -1.0, 1.0).unwrap();
        let opts = TransversalityOptions { grid_res: 51, ..Default::default() };
        let chart = graph_reparametrize(&par, &x_axis(), &opts).unwrap();
        assert_eq!(chart.points().len(), 51);
        for pt in chart.points() {
            let u = pt.u[0];
            assert_abs_diff_eq!(pt.phi[0], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(pt.phi[1], u * u, epsilon = 1e-10);
            assert_abs_diff_eq!(pt.jacobian, (1.0 + 4.0 * u * u).sqrt(), epsilon = 1e-10);
        }
    }

    #[test]
    fn upper_circle_arc_matches_closed_form() {
        let arc = ParametrizedManifold::circle_arc(1.0, [0.0, 0.0], PI / 4.0, 3.0 * PI / 4.0).unwrap();
        let opts = TransversalityOptions { grid_res: 41, ..Default::default() };
        let chart = graph_reparametrize(&arc, &x_axis(), &opts).unwrap();
        let p = chart.solve(&[0.0]).unwrap();
        assert_abs_diff_eq!(p.phi[1], 1.0, epsilon = 1e-10);
        for pt in chart.points() {
            let u = pt.u[0];
            assert_abs_diff_eq!(pt.phi[1], (1.0 - u * u).sqrt(), epsilon = 1e-10);
            assert!(pt.residual < 1e-10);
        }
    }

    #[test]
    fn segment_in_plane_is_flat() {
        let seg = ParametrizedManifold::segment(&[0.0, 0.0], &[1.0, 0.0], -0.5, 0.5).unwrap();
        let chart = graph_reparametrize(&seg, &x_axis(), &TransversalityOptions::default()).unwrap();
        for pt in chart.points() {
            assert!(pt.phi.norm() < 1e-14);
            assert_abs_diff_eq!(pt.jacobian, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn points_outside_projection_fail() {
        let par = ParametrizedManifold::parabola(1.0, 0.0, -1.0, 1.0).unwrap();
        let opts = TransversalityOptions { grid_res: 21, ..Default::default() };
        let chart = graph_reparametrize(&par, &x_axis(), &opts).unwrap();
        assert!(matches!(chart.solve(&[1.5]), Err(Error::RootFindFailure(_))));
    }

    #[test]
    fn refuses_without_transversality() {
        let caps = ParametrizedManifold::two_caps(0.5, [0.0, 1.0], 0.0).unwrap();
        let opts = TransversalityOptions { grid_res: 21, ..Default::default() };
        assert!(matches!(graph_reparametrize(&caps, &x_axis(), &opts), Err(Error::TransversalityViolation(_))));
        let circle = ParametrizedManifold::full_circle().unwrap();
        assert!(matches!(graph_reparametrize(&circle, &x_axis(), &opts), Err(Error::TransversalityViolation(_))));
    }

    #[test]
    fn tilted_plane_chart_over_paraboloid() {
        let bowl = ParametrizedManifold::paraboloid(2, -0.5, 0.5, 1.0).unwrap();
        let plane = Subspace::new(&[
            nalgebra::dvector![1.0, 0.0, 0.2],
            nalgebra::dvector![0.0, 1.0, -0.1],
        ])
        .unwrap();
        let opts = TransversalityOptions { grid_res: 15, ..Default::default() };
        let chart = graph_reparametrize(&bowl, &plane, &opts).unwrap();
        assert!(!chart.points().is_empty());
        for pt in chart.points() {
            assert!(plane.basis().tr_mul(&pt.phi).norm() < 1e-12);
            let x = bowl.eval(&pt.param);
            let rebuilt = plane.embed(&pt.u) + &pt.phi;
            assert!((x - rebuilt).norm() < 1e-9);
            assert_abs_diff_eq!(chart.implicit_jacobian(pt).unwrap(), pt.jacobian, epsilon = 1e-10 * pt.jacobian);
        }
    }
}
