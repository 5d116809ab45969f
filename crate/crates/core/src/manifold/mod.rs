//! Parametrized submanifolds `Σ: U -> R^n`, their frames and surface measure.

mod chart;
mod density;
mod family;
mod transversality;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{Subspace, DEGENERACY_RATIO};

pub use chart::{graph_reparametrize, ChartPoint, GraphChart};
pub use density::{DensityKind, SurfaceDensity};
pub use family::Family;
pub use transversality::{
    check_transversality_gt, check_transversality_t, GtCheck, TCheck, TransversalityOptions,
};

/// Relative finite-difference step (times the domain width).
pub const FD_RELATIVE_STEP: f64 = 1e-5;

/// Axis-aligned parameter box `U = [lo_1, hi_1] x ... x [lo_k, hi_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::DimensionMismatch("box bounds have different lengths".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidInput(format!("empty or unbounded box {lo:?} .. {hi:?}")));
        }
        Ok(ParamBox { lo, hi })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        ParamBox::new(vec![a], vec![b])
    }

    pub fn cube(k: usize, a: f64, b: f64) -> Result<Self> {
        ParamBox::new(vec![a; k], vec![b; k])
    }

    pub fn product(boxes: &[ParamBox]) -> ParamBox {
        ParamBox {
            lo: boxes.iter().flat_map(|b| b.lo.iter().copied()).collect(),
            hi: boxes.iter().flat_map(|b| b.hi.iter().copied()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, xi: &[f64], tol: f64) -> bool {
        xi.len() == self.dim()
            && xi.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| *x >= a - tol && *x <= b + tol)
    }

    pub fn clamp(&self, xi: &mut [f64]) {
        for (x, (a, b)) in xi.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *x = x.clamp(*a, *b);
        }
    }

    /// Equispaced tensor grid with `res` points per axis (endpoints included).
    pub fn grid(&self, res: usize) -> Vec<Vec<f64>> {
        let res = res.max(2);
        let k = self.dim();
        let total = res.pow(k as u32);
        let mut idx = vec![0usize; k];
        (0..total)
            .map(|flat| {
                crate::quadrature::unravel(flat, res, k, &mut idx);
                (0..k)
                    .map(|d| self.lo[d] + self.width(d) * idx[d] as f64 / (res - 1) as f64)
                    .collect()
            })
            .collect()
    }

    /// Shrinks each side by `frac` of its width.
    pub fn shrink(&self, frac: f64) -> ParamBox {
        ParamBox {
            lo: (0..self.dim()).map(|d| self.lo[d] + frac * self.width(d)).collect(),
            hi: (0..self.dim()).map(|d| self.hi[d] - frac * self.width(d)).collect(),
        }
    }
}

/// A parameter value: branch index and point of the parameter box.
///
/// Every built-in family has a single branch except `two_caps`, which is a
/// disjoint union of two pieces over the same box.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub branch: usize,
    pub xi: Vec<f64>,
}

impl Param {
    pub fn new(xi: Vec<f64>) -> Self {
        Param { branch: 0, xi }
    }

    pub fn on_branch(branch: usize, xi: Vec<f64>) -> Self {
        Param { branch, xi }
    }
}

impl From<f64> for Param {
    fn from(x: f64) -> Self {
        Param::new(vec![x])
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "branch {} at {:?}", self.branch, self.xi)
    }
}

pub type SigmaFn = Arc<dyn Fn(usize, &[f64]) -> DVector<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(usize, &[f64]) -> DMatrix<f64> + Send + Sync>;

/// A `k`-dimensional submanifold of `R^n` given by `Σ: U -> R^n`.
#[derive(Clone)]
pub struct ParametrizedManifold {
    ambient: usize,
    domain: ParamBox,
    branches: usize,
    family: Family,
    sigma: SigmaFn,
    dsigma: Option<JacobianFn>,
}

impl fmt::Debug for ParametrizedManifold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametrizedManifold")
            .field("family", &self.family)
            .field("n", &self.ambient)
            .field("k", &self.domain.dim())
            .field("domain", &self.domain)
            .field("branches", &self.branches)
            .field("analytic_derivative", &self.dsigma.is_some())
            .finish()
    }
}

impl ParametrizedManifold {
    pub fn new(
        ambient: usize,
        domain: ParamBox,
        family: Family,
        sigma: impl Fn(usize, &[f64]) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        ParametrizedManifold {
            ambient,
            domain,
            branches: 1,
            family,
            sigma: Arc::new(sigma),
            dsigma: None,
        }
    }

    pub fn with_derivative(
        mut self,
        dsigma: impl Fn(usize, &[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.dsigma = Some(Arc::new(dsigma));
        self
    }

    pub fn with_branches(mut self, branches: usize) -> Self {
        self.branches = branches.max(1);
        self
    }

    /// Drops the analytic derivative so frames come from finite differences.
    pub fn without_derivative(mut self) -> Self {
        self.dsigma = None;
        self
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &ParamBox {
        &self.domain
    }

    pub fn branches(&self) -> usize {
        self.branches
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.dsigma.is_some()
    }

    pub fn eval(&self, p: &Param) -> DVector<f64> {
        (self.sigma)(p.branch, &p.xi)
    }

    /// Grid points of every branch (`res` per axis).
    pub fn param_grid(&self, res: usize) -> Vec<Param> {
        let grid = self.domain.grid(res);
        (0..self.branches)
            .flat_map(|b| grid.iter().map(move |xi| Param::on_branch(b, xi.clone())))
            .collect()
    }

    /// `DΣ(ξ)` by central differences with step `1e-5 x` domain width; the
    /// stencil turns one-sided at the box faces.
    pub fn tangent_frame_fd(&self, p: &Param) -> DMatrix<f64> {
        let k = self.dim();
        let mut frame = DMatrix::zeros(self.ambient, k);
        let mut xi = p.xi.clone();
        for i in 0..k {
            let h = FD_RELATIVE_STEP * self.domain.width(i);
            let x0 = p.xi[i];
            let mut at = |t: f64| {
                xi[i] = t;
                (self.sigma)(p.branch, &xi)
            };
            let col = if x0 + h > self.domain.hi[i] + 1e-15 {
                (at(x0) * 3.0 - at(x0 - h) * 4.0 + at(x0 - 2.0 * h)) / (2.0 * h)
            } else if x0 - h < self.domain.lo[i] - 1e-15 {
                (at(x0) * -3.0 + at(x0 + h) * 4.0 - at(x0 + 2.0 * h)) / (2.0 * h)
            } else {
                (at(x0 + h) - at(x0 - h)) / (2.0 * h)
            };
            xi[i] = x0;
            frame.set_column(i, &col);
        }
        frame
    }

    /// Columns of `DΣ(ξ)`: analytic when supplied, else finite differences.
    pub fn tangent_frame(&self, p: &Param) -> Result<DMatrix<f64>> {
        let frame = match &self.dsigma {
            Some(d) => d(p.branch, &p.xi),
            None => self.tangent_frame_fd(p),
        };
        let sv = frame.clone().singular_values();
        let smax = sv.max();
        if !(smax > 0.0) || sv.min() <= DEGENERACY_RATIO * smax || frame.iter().any(|v| !v.is_finite()) {
            return Err(Error::RankDeficient { at: p.to_string() });
        }
        Ok(frame)
    }

    /// `T_ξ S` as an orthonormalized subspace.
    pub fn tangent_space(&self, p: &Param) -> Result<Subspace> {
        let frame = self.tangent_frame(p)?;
        Subspace::from_columns(&frame).map_err(|_| Error::RankDeficient { at: p.to_string() })
    }

    /// `sqrt(det(DΣ^T DΣ))`, the k-volume of the tangent parallelepiped.
    pub fn surface_jacobian(&self, p: &Param) -> Result<f64> {
        let frame = self.tangent_frame(p)?;
        let det = frame.tr_mul(&frame).determinant();
        if !(det > 0.0) {
            return Err(Error::RankDeficient { at: p.to_string() });
        }
        Ok(det.sqrt())
    }

    /// `(T_ξ S)^⊥`.
    pub fn normal_frame(&self, p: &Param) -> Result<Subspace> {
        Ok(self.tangent_space(p)?.complement())
    }

    /// Checks rank on the grid and injectivity across distinct grid points.
    pub fn validate(&self, grid_res: usize) -> Result<()> {
        let pts = self.param_grid(grid_res);
        let images: Vec<DVector<f64>> = pts.iter().map(|p| self.eval(p)).collect();
        for (p, x) in pts.iter().zip(&images) {
            if x.len() != self.ambient || x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("Σ is not finite at {p}")));
            }
            self.tangent_frame(p)?;
        }
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let scale = 1.0 + images[i].norm();
                if (&images[i] - &images[j]).norm() <= 1e-12 * scale {
                    return Err(Error::InvalidInput(format!(
                        "Σ is not injective: {} and {} have the same image",
                        pts[i], pts[j]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Diameter of the bounding box of `Σ(U)` sampled on a coarse grid.
    pub fn image_diameter(&self) -> f64 {
        let res = if self.dim() == 1 { 129 } else { 33 };
        let mut lo = vec![f64::INFINITY; self.ambient];
        let mut hi = vec![f64::NEG_INFINITY; self.ambient];
        for p in self.param_grid(res) {
            let x = self.eval(&p);
            for i in 0..self.ambient {
                lo[i] = lo[i].min(x[i]);
                hi[i] = hi[i].max(x[i]);
            }
        }
        lo.iter().zip(&hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    #[test]
    fn tangent_examples() {
        let seg = ParametrizedManifold::segment(&[0.0, 0.0], &[1.0, 0.0], -0.5, 0.5).unwrap();
        assert_eq!(seg.tangent_frame(&0.2.into()).unwrap().column(0), dvector![1.0, 0.0]);
        let par = ParametrizedManifold::parabola(1.0, 0.0, -1.0, 1.0).unwrap();
        assert_eq!(par.tangent_frame(&1.0.into()).unwrap().column(0), dvector![1.0, 2.0]);
        let c = 0.3;
        let helix = ParametrizedManifold::helix(c, 0.0, 4.0 * std::f64::consts::PI, None).unwrap();
        assert_abs_diff_eq!(
            helix.tangent_frame(&0.0.into()).unwrap().column(0).into_owned(),
            dvector![0.0, 1.0, c],
            epsilon = 1e-15
        );
    }

    #[test]
    fn surface_jacobian_examples() {
        let arc = ParametrizedManifold::circle_arc(1.0, [0.0, 0.0], 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(arc.surface_jacobian(&0.4.into()).unwrap(), 1.0, epsilon = 1e-15);
        let par = ParametrizedManifold::parabola(1.0, 0.0, -1.0, 1.0).unwrap();
        assert_abs_diff_eq!(par.surface_jacobian(&1.0.into()).unwrap(), 5f64.sqrt(), epsilon = 1e-14);
        let fd = par.clone().without_derivative();
        assert_abs_diff_eq!(fd.surface_jacobian(&1.0.into()).unwrap(), 5f64.sqrt(), epsilon = 1e-8);
        let bowl = ParametrizedManifold::paraboloid(2, -1.0, 1.0, 1.0).unwrap();
        let p = Param::new(vec![1.0, 0.0]);
        assert_abs_diff_eq!(bowl.surface_jacobian(&p).unwrap(), 5f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn normal_examples() {
        let seg = ParametrizedManifold::segment(&[0.0, 0.0], &[1.0, 0.0], -0.5, 0.5).unwrap();
        let nf = seg.normal_frame(&0.0.into()).unwrap();
        assert_abs_diff_eq!(nf.basis_vector(0)[1].abs(), 1.0, epsilon = 1e-15);
        let par = ParametrizedManifold::parabola(1.0, 0.0, -1.0, 1.0).unwrap();
        let n0 = par.normal_frame(&0.0.into()).unwrap().basis_vector(0);
        assert_abs_diff_eq!(n0[1].abs(), 1.0, epsilon = 1e-15);
        let n1 = par.normal_frame(&1.0.into()).unwrap().basis_vector(0);
        let expected = dvector![-2.0, 1.0] / 5f64.sqrt();
        assert_abs_diff_eq!(n1.dot(&expected).abs(), 1.0, epsilon = 1e-14);
        assert!(n1.dot(&dvector![1.0, 2.0]).abs() < 1e-12);
    }

    #[test]
    fn rank_deficiency_is_reported() {
        // (ξ^3, ξ^3) has zero derivative at the origin
        let m = ParametrizedManifold::new(2, ParamBox::interval(-1.0, 1.0).unwrap(), Family::Custom, |_, x| {
            dvector![x[0].powi(3), x[0].powi(3)]
        })
        .with_derivative(|_, x| DMatrix::from_column_slice(2, 1, &[3.0 * x[0] * x[0], 3.0 * x[0] * x[0]]));
        assert!(matches!(m.tangent_frame(&0.0.into()), Err(Error::RankDeficient { .. })));
        assert!(m.validate(11).is_err());
    }

    #[test]
    fn non_injective_map_fails_validation() {
        let full_turns = ParametrizedManifold::circle_arc(1.0, [0.0, 0.0], 0.0, 4.0 * std::f64::consts::PI).unwrap();
        assert!(full_turns.validate(9).is_err());
    }

    #[test]
    fn one_sided_stencil_at_faces() {
        let par = ParametrizedManifold::parabola(1.0, 0.0, -1.0, 1.0).unwrap().without_derivative();
        let d = par.tangent_frame_fd(&1.0.into());
        assert_abs_diff_eq!(d[(1, 0)], 2.0, epsilon = 1e-8);
        let d = par.tangent_frame_fd(&(-1.0).into());
        assert_abs_diff_eq!(d[(1, 0)], -2.0, epsilon = 1e-8);
    }
}
