//! Extension operator, truncated k-plane integrals of `|Ef|^2`, the
//! tangent-wedge integral and the composed adjoint transform
//! `T_{k,n} T*_{n-k,n} μ`.
//!
//! The plane integral is a brute-force tensor quadrature of the oscillatory
//! integral; it never goes through the graph reparametrization, so
//! comparing it with [`rhs_tangent_integral`] is a genuine check.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wedge_abs, AffinePlane, Subspace};
use crate::manifold::{
    check_transversality_gt, check_transversality_t, Param, ParametrizedManifold, SurfaceDensity,
    TransversalityOptions,
};
use crate::quadrature::{composite_gauss_legendre, compensated_sum, trapezoid, unravel, Rule1d};

/// Wedge values at or below this are treated as a transversality failure.
pub const WEDGE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    None,
    /// Raised-cosine taper over the outer 10% of the truncation box.
    /// Diagnostics only; identities are asserted with `None`.
    RaisedCosine,
}

/// Quadrature settings shared by every oscillatory and parameter integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureRule {
    /// Gauss–Legendre points per panel and parameter axis.
    pub order: usize,
    /// Minimum number of panels per parameter axis.
    pub panels: usize,
    /// Upper bound on the panel count chosen from the oscillation budget.
    pub max_panels: usize,
    /// Truncation half-width `R` of plane integrals.
    pub plane_trunc_radius: f64,
    pub plane_points_per_axis: usize,
    pub window: Window,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule {
            order: 64,
            panels: 4,
            max_panels: 256,
            plane_trunc_radius: 30.0,
            plane_points_per_axis: 512,
            window: Window::None,
        }
    }
}

impl QuadratureRule {
    /// Defaults scaled to the integration dimension: `R = 30`, 512 points per
    /// axis for line integrals, `R = 15`, 128 points per axis otherwise.
    pub fn preset(plane_dim: usize) -> Self {
        if plane_dim <= 1 {
            QuadratureRule::default()
        } else {
            QuadratureRule { plane_trunc_radius: 15.0, plane_points_per_axis: 128, ..Default::default() }
        }
    }

    /// Doubled Gauss–Legendre order and plane resolution.
    pub fn refined(&self) -> Self {
        QuadratureRule {
            order: self.order * 2,
            plane_points_per_axis: self.plane_points_per_axis * 2,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 8 {
            return Err(Error::InvalidInput(format!("quadrature order {} < 8", self.order)));
        }
        if !(self.plane_trunc_radius > 0.0) {
            return Err(Error::InvalidInput("plane truncation radius must be positive".into()));
        }
        if self.plane_points_per_axis < 2 || self.panels == 0 || self.max_panels < self.panels {
            return Err(Error::InvalidInput("degenerate quadrature resolution".into()));
        }
        Ok(())
    }

    fn plane_rule(&self) -> Rule1d {
        trapezoid(self.plane_trunc_radius, self.plane_points_per_axis)
    }
}

/// Tensor Gauss–Legendre nodes over every branch of the parameter box.
pub fn parameter_nodes(manifold: &ParametrizedManifold, order: usize, panels: usize) -> Vec<(Param, f64)> {
    let dom = manifold.domain();
    let k = dom.dim();
    let rules: Vec<Rule1d> =
        (0..k).map(|d| composite_gauss_legendre(dom.lo()[d], dom.hi()[d], order, panels)).collect();
    let len = rules[0].len();
    let mut idx = vec![0usize; k];
    let mut out = Vec::with_capacity(manifold.branches() * len.pow(k as u32));
    for b in 0..manifold.branches() {
        for flat in 0..len.pow(k as u32) {
            unravel(flat, len, k, &mut idx);
            let xi = (0..k).map(|d| rules[d].nodes[idx[d]]).collect();
            let w = (0..k).map(|d| rules[d].weights[idx[d]]).product();
            out.push((Param::on_branch(b, xi), w));
        }
    }
    out
}

/// Precomputed nodes `Σ(ξ_i)` and amplitudes `w_i f(ξ_i)` for evaluating
/// `Ef(x) = ∫_U exp(-2πi x·Σ(ξ)) f(ξ) dξ` with `|x| ≤ x_max`.
#[derive(Debug, Clone)]
pub struct ExtensionKernel {
    ambient: usize,
    points: Vec<f64>,
    amplitudes: Vec<Complex64>,
    budget_ok: bool,
}

impl ExtensionKernel {
    /// Panel counts follow the budget `order x panels ≥ 4 x_max diam Σ(U)`;
    /// the kernel is flagged when `max_panels` caps it.
    pub fn new(manifold: &ParametrizedManifold, f: &SurfaceDensity, q: &QuadratureRule, x_max: f64) -> Self {
        let needed = 4.0 * x_max * manifold.image_diameter();
        let want = (needed / q.order as f64).ceil() as usize;
        let panels = want.clamp(q.panels, q.max_panels);
        let budget_ok = (q.order * panels) as f64 >= needed;
        let n = manifold.ambient_dim();
        let mut points = Vec::new();
        let mut amplitudes = Vec::new();
        for (p, w) in parameter_nodes(manifold, q.order, panels) {
            let amp = f.eval(&p) * w;
            if amp.norm() == 0.0 {
                continue;
            }
            points.extend(manifold.eval(&p).iter());
            amplitudes.push(amp);
        }
        debug_assert_eq!(points.len(), n * amplitudes.len());
        ExtensionKernel { ambient: n, points, amplitudes, budget_ok }
    }

    pub fn budget_ok(&self) -> bool {
        self.budget_ok
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let n = self.ambient;
        let mut re = 0.0;
        let mut im = 0.0;
        for (s, a) in self.points.chunks_exact(n).zip(&self.amplitudes) {
            let dot: f64 = s.iter().zip(x).map(|(s, x)| s * x).sum();
            let (sin, cos) = (-2.0 * PI * dot).sin_cos();
            re += a.re * cos - a.im * sin;
            im += a.re * sin + a.im * cos;
        }
        Complex64::new(re, im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionValue {
    pub value: Complex64,
    /// False when the oscillation budget could not be met.
    pub budget_ok: bool,
}

pub fn extension_eval(
    manifold: &ParametrizedManifold,
    f: &SurfaceDensity,
    x: &DVector<f64>,
    q: &QuadratureRule,
) -> Result<ExtensionValue> {
    if x.len() != manifold.ambient_dim() {
        return Err(Error::DimensionMismatch(format!("x has length {}, expected {}", x.len(), manifold.ambient_dim())));
    }
    q.validate()?;
    let kernel = ExtensionKernel::new(manifold, f, q, x.norm());
    Ok(ExtensionValue { value: kernel.eval(x.as_slice()), budget_ok: kernel.budget_ok() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneIntegral {
    pub value: f64,
    /// Three times the contribution of the outer 10% shell of the box.
    pub tail_bound: f64,
    pub budget_ok: bool,
}

/// Integrates `weight(x) · h(x)` over the tensor trapezoid grid
/// `[-R, R]^d` and returns `(total, outer-shell part)`. Values are computed
/// in parallel and summed in index order, so results do not depend on the
/// number of threads.
pub(crate) fn integrate_box(d: usize, q: &QuadratureRule, h: impl Fn(&[f64]) -> f64 + Sync) -> (f64, f64) {
    let rule = q.plane_rule();
    let len = rule.len();
    let r = q.plane_trunc_radius;
    let shell = 0.9 * r;
    let total = len.pow(d as u32);
    let terms: Vec<(f64, bool)> = (0..total)
        .into_par_iter()
        .map_init(
            || (vec![0usize; d], vec![0.0; d]),
            |(idx, c), flat| {
                unravel(flat, len, d, idx);
                let mut w = 1.0;
                let mut edge: f64 = 0.0;
                for a in 0..d {
                    c[a] = rule.nodes[idx[a]];
                    w *= rule.weights[idx[a]];
                    edge = edge.max(c[a].abs());
                }
                if q.window == Window::RaisedCosine && edge > shell {
                    w *= 0.5 * (1.0 + (PI * (edge - shell) / (r - shell)).cos());
                }
                (w * h(c), edge > shell)
            },
        )
        .collect();
    let value = compensated_sum(terms.iter().map(|t| t.0));
    let outer = compensated_sum(terms.iter().filter(|t| t.1).map(|t| t.0));
    (value, outer)
}

/// `T_{k,n}(|Ef|^2)(π, y) = ∫_π |Ef(x + y)|^2 dλ_π(x)`, truncated to the box
/// `|x_i| ≤ R` in plane coordinates.
pub fn plane_integral_squared(
    manifold: &ParametrizedManifold,
    f: &SurfaceDensity,
    plane: &AffinePlane,
    q: &QuadratureRule,
) -> Result<PlaneIntegral> {
    let k = plane.dim();
    if k != manifold.dim() || plane.direction().ambient_dim() != manifold.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "plane of dimension {k} in R^{} for a {}-dimensional manifold in R^{}",
            plane.direction().ambient_dim(),
            manifold.dim(),
            manifold.ambient_dim()
        )));
    }
    q.validate()?;
    if f.is_zero() {
        return Ok(PlaneIntegral { value: 0.0, tail_bound: 0.0, budget_ok: true });
    }
    let x_max = q.plane_trunc_radius * (k as f64).sqrt() + plane.offset().norm();
    let kernel = ExtensionKernel::new(manifold, f, q, x_max);
    let basis = plane.direction().basis();
    let offset = plane.offset();
    let n = manifold.ambient_dim();
    let (value, outer) = integrate_box(k, q, |c| {
        let mut x = [0.0f64; 16];
        let x = if n <= 16 { &mut x[..n] } else { unreachable!("ambient dimension above 16") };
        for i in 0..n {
            x[i] = offset[i] + (0..k).map(|a| basis[(i, a)] * c[a]).sum::<f64>();
        }
        kernel.eval(x).norm_sqr()
    });
    Ok(PlaneIntegral { value, tail_bound: 3.0 * outer, budget_ok: kernel.budget_ok() })
}

/// `|DΣ(ξ) ∧ π^⊥|` with the non-normalized frame, together with the unit
/// tangent wedge `|T_ξ S ∧ π^⊥|`.
pub(crate) fn frame_wedge(
    manifold: &ParametrizedManifold,
    p: &Param,
    normal_of_plane: &Subspace,
) -> Result<(f64, f64)> {
    let frame = manifold.tangent_frame(p)?;
    let n = manifold.ambient_dim();
    let k = manifold.dim();
    let mut m = DMatrix::zeros(n, n);
    m.columns_mut(0, k).copy_from(&frame);
    m.columns_mut(k, n - k).copy_from(normal_of_plane.basis());
    let raw = m.determinant().abs();
    let unit = raw / manifold.surface_jacobian(p)?;
    Ok((raw, unit))
}

/// `∫_U |f(ξ)|^2 / |∂_1Σ ∧ ... ∧ ∂_kΣ ∧ π^⊥| dξ`.
pub fn rhs_tangent_integral(
    manifold: &ParametrizedManifold,
    f: &SurfaceDensity,
    plane: &Subspace,
    q: &QuadratureRule,
) -> Result<f64> {
    if plane.dim() != manifold.dim() || plane.ambient_dim() != manifold.ambient_dim() {
        return Err(Error::DimensionMismatch("plane and manifold dimensions differ".into()));
    }
    q.validate()?;
    let normal = plane.complement();
    let mut terms = Vec::new();
    for (p, w) in parameter_nodes(manifold, q.order, q.panels) {
        let (raw, unit) = frame_wedge(manifold, &p, &normal)?;
        if unit <= WEDGE_FLOOR {
            return Err(Error::TransversalityViolation(format!("|T_ξS ∧ π^⊥| = {unit:.3e} at {p}")));
        }
        terms.push(w * f.eval(&p).norm_sqr() / raw);
    }
    Ok(compensated_sum(terms))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    /// Plane integrals, one per offset.
    pub lhs: Vec<f64>,
    pub rhs: f64,
    /// `max_j |L_j - rhs| / rhs`.
    pub identity_error: f64,
    /// `(max_j L_j - min_j L_j) / rhs`.
    pub y_spread: f64,
    pub tail_bound: f64,
    pub budget_ok: bool,
    pub t_margin: f64,
    pub gt_margin: f64,
}

fn relative(diff: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        diff / scale
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Checks `T_{k,n}(|Ef|^2)(π, y_j) = rhs` for each offset `y_j ∈ π^⊥`.
/// Refuses to run unless both (T) and (GT) hold on the grid.
pub fn verify_identity(
    manifold: &ParametrizedManifold,
    f: &SurfaceDensity,
    plane: &Subspace,
    y_samples: &[DVector<f64>],
    q: &QuadratureRule,
    opts: &TransversalityOptions,
) -> Result<IdentityReport> {
    let t = check_transversality_t(manifold, plane, opts)?;
    let gt = check_transversality_gt(manifold, plane, opts)?;
    if !t.pass || !gt.pass {
        return Err(Error::TransversalityViolation(format!(
            "identity needs (T) and (GT): margins {:.3e} and {:.3e}",
            t.margin, gt.margin
        )));
    }
    if y_samples.is_empty() {
        return Err(Error::InvalidInput("no offsets given".into()));
    }
    let mut lhs = Vec::with_capacity(y_samples.len());
    let mut tail_bound: f64 = 0.0;
    let mut budget_ok = true;
    for y in y_samples {
        if y.len() != plane.ambient_dim() {
            return Err(Error::DimensionMismatch("offset has the wrong length".into()));
        }
        if plane.coords(y).norm() > 1e-12 * y.norm().max(1.0) {
            return Err(Error::InvalidInput(format!("offset {:?} is not orthogonal to π", y.as_slice())));
        }
        let pi = plane_integral_squared(manifold, f, &AffinePlane::through(plane.clone(), y)?, q)?;
        tail_bound = tail_bound.max(pi.tail_bound);
        budget_ok &= pi.budget_ok;
        lhs.push(pi.value);
    }
    let rhs = rhs_tangent_integral(manifold, f, plane, q)?;
    let identity_error = lhs.iter().map(|l| relative((l - rhs).abs(), rhs)).fold(0.0, f64::max);
    let max = lhs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = lhs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(IdentityReport {
        lhs,
        rhs,
        identity_error,
        y_spread: relative(max - min, rhs),
        tail_bound,
        budget_ok,
        t_margin: t.margin,
        gt_margin: gt.margin,
    })
}

/// `∫ δ_{π+y}(x) δ_{θ+z}(x) dx = 1 / |θ ∧ π|` for transverse complementary
/// subspaces.
pub fn plane_pair_weight(theta: &Subspace, plane: &Subspace) -> Result<f64> {
    let w = wedge_abs(theta, plane)?;
    if w <= WEDGE_FLOOR {
        return Err(Error::TransversalityViolation(format!("|θ ∧ π| = {w:.3e}")));
    }
    Ok(1.0 / w)
}

/// An atom `w δ_{(ξ, y)}` of a tangent-bundle measure `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentAtom {
    pub param: Param,
    /// `y ∈ T_ξ S`.
    pub offset: DVector<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneAtom {
    pub plane: AffinePlane,
    pub weight: f64,
}

/// Finite weighted family of affine `(n-k)`-planes; when built by
/// [`pushforward_measure`] it remembers the tangent-bundle atoms it came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscretePlaneMeasure {
    atoms: Vec<PlaneAtom>,
    provenance: Vec<TangentAtom>,
}

impl DiscretePlaneMeasure {
    pub fn new(atoms: Vec<PlaneAtom>) -> Result<Self> {
        if atoms.iter().any(|a| !(a.weight >= 0.0)) {
            return Err(Error::InvalidInput("plane measure weights must be nonnegative".into()));
        }
        if let Some(first) = atoms.first() {
            if atoms.iter().any(|a| a.plane.dim() != first.plane.dim()) {
                return Err(Error::DimensionMismatch("atoms of different dimensions".into()));
            }
        }
        Ok(DiscretePlaneMeasure { atoms, provenance: Vec::new() })
    }

    pub fn atoms(&self) -> &[PlaneAtom] {
        &self.atoms
    }

    pub fn provenance(&self) -> &[TangentAtom] {
        &self.provenance
    }

    pub fn total_mass(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.weight))
    }

    /// `ν_S`: mass of the tangent-bundle atoms grouped by base point.
    pub fn marginal(&self) -> Vec<(Param, f64)> {
        let mut out: Vec<(Param, f64)> = Vec::new();
        for t in &self.provenance {
            match out.iter_mut().find(|(p, _)| *p == t.param) {
                Some(entry) => entry.1 += t.weight,
                None => out.push((t.param.clone(), t.weight)),
            }
        }
        out
    }
}

/// Where the atoms of `ν` sit inside each tangent space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OffsetRule {
    /// `ν = δ_0(y) |g|^2 dσ`.
    #[default]
    Zero,
    /// `y = s τ_1(ξ)` with `τ_1` the first unit tangent.
    TangentShift(f64),
}

/// Discretizes `dν = |g|^2 dσ` at the Gauss–Legendre nodes (weights
/// `|f|^2 w_i / J`) and pushes every atom to the normal plane
/// `(T_ξ S)^⊥ + Σ(ξ) + y`.
pub fn pushforward_measure(
    manifold: &ParametrizedManifold,
    f: &SurfaceDensity,
    q: &QuadratureRule,
    rule: OffsetRule,
) -> Result<DiscretePlaneMeasure> {
    q.validate()?;
    let mut atoms = Vec::new();
    let mut provenance = Vec::new();
    for (p, w) in parameter_nodes(manifold, q.order, q.panels) {
        let mass = w * f.eval(&p).norm_sqr() / manifold.surface_jacobian(&p)?;
        if mass == 0.0 {
            continue;
        }
        let tangent = manifold.tangent_space(&p)?;
        let offset = match rule {
            OffsetRule::Zero => DVector::zeros(manifold.ambient_dim()),
            OffsetRule::TangentShift(s) => tangent.basis_vector(0) * s,
        };
        let normal = tangent.complement();
        let plane = AffinePlane::through(normal, &(manifold.eval(&p) + &offset))?;
        atoms.push(PlaneAtom { plane, weight: mass });
        provenance.push(TangentAtom { param: p, offset, weight: mass });
    }
    Ok(DiscretePlaneMeasure { atoms, provenance })
}

/// `T_{k,n} T*_{n-k,n} μ (π, y) = Σ_i w_i / |θ_i ∧ π|`. The value does not
/// depend on `y`, which is only checked for shape.
pub fn composed_adjoint_transform(
    measure: &DiscretePlaneMeasure,
    plane: &Subspace,
    y: &DVector<f64>,
) -> Result<f64> {
    if y.len() != plane.ambient_dim() {
        return Err(Error::DimensionMismatch("offset has the wrong length".into()));
    }
    let terms = measure
        .atoms
        .iter()
        .map(|a| Ok(a.weight * plane_pair_weight(a.plane.direction(), plane)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(compensated_sum(terms))
}
