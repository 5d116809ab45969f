//! Built-in families of parametrized submanifolds.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use super::{ParamBox, ParametrizedManifold};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Segment,
    Parabola,
    CircleArc,
    Helix,
    Paraboloid,
    Graph,
    Product,
    TwoCaps,
    Custom,
}

impl Family {
    pub const BUILT_IN: [Family; 8] = [
        Family::Segment,
        Family::Parabola,
        Family::CircleArc,
        Family::Helix,
        Family::Paraboloid,
        Family::Graph,
        Family::Product,
        Family::TwoCaps,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Segment => "segment",
            Family::Parabola => "parabola",
            Family::CircleArc => "circle_arc",
            Family::Helix => "helix",
            Family::Paraboloid => "paraboloid",
            Family::Graph => "graph",
            Family::Product => "product",
            Family::TwoCaps => "two_caps",
            Family::Custom => "custom",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            Family::Segment => "straight segment origin + ξ·direction in R^n (k = 1)",
            Family::Parabola => "rotated parabola R(ξ, c ξ²) in R^2 (k = 1)",
            Family::CircleArc => "circle arc center + r(cos θ, sin θ) in R^2 (k = 1)",
            Family::Helix => "helix (cos ξ, sin ξ, pitch ξ) in R^3, or helicoid (r cos θ, r sin θ, pitch θ) when radial bounds are given",
            Family::Paraboloid => "paraboloid (ξ, c|ξ|²) in R^{k+1}",
            Family::Graph => "polynomial graph (ξ, Σ c_i ξ^i) in R^2 (k = 1)",
            Family::Product => "cartesian product of single-branch factors",
            Family::TwoCaps => "two disjoint arcs (ξ, h_b + c ξ²), b = 0, 1, in R^2",
            Family::Custom => "user supplied map",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn column(n: usize, v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, 1, v)
}

impl ParametrizedManifold {
    /// `Σ(ξ) = origin + ξ·u` with `u` the normalized direction.
    pub fn segment(origin: &[f64], direction: &[f64], a: f64, b: f64) -> Result<Self> {
        if origin.len() != direction.len() || origin.is_empty() {
            return Err(Error::DimensionMismatch("segment origin and direction differ in length".into()));
        }
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidInput("segment direction is zero".into()));
        }
        let n = origin.len();
        let o = DVector::from_column_slice(origin);
        let u = DVector::from_column_slice(direction) / norm;
        let u2 = u.clone();
        Ok(ParametrizedManifold::new(n, ParamBox::interval(a, b)?, Family::Segment, move |_, x| &o + &u * x[0])
            .with_derivative(move |_, _| column(n, u2.as_slice())))
    }

    /// `Σ(ξ) = R_rotation (ξ, c ξ²)`.
    pub fn parabola(curvature: f64, rotation: f64, a: f64, b: f64) -> Result<Self> {
        let (s, c) = rotation.sin_cos();
        Ok(ParametrizedManifold::new(2, ParamBox::interval(a, b)?, Family::Parabola, move |_, x| {
            let (p, q) = (x[0], curvature * x[0] * x[0]);
            DVector::from_column_slice(&[c * p - s * q, s * p + c * q])
        })
        .with_derivative(move |_, x| {
            let (p, q) = (1.0, 2.0 * curvature * x[0]);
            column(2, &[c * p - s * q, s * p + c * q])
        }))
    }

    /// `Σ(θ) = center + r(cos θ, sin θ)`.
    pub fn circle_arc(radius: f64, center: [f64; 2], theta0: f64, theta1: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidInput("circle radius must be positive".into()));
        }
        Ok(ParametrizedManifold::new(2, ParamBox::interval(theta0, theta1)?, Family::CircleArc, move |_, t| {
            DVector::from_column_slice(&[center[0] + radius * t[0].cos(), center[1] + radius * t[0].sin()])
        })
        .with_derivative(move |_, t| column(2, &[-radius * t[0].sin(), radius * t[0].cos()])))
    }

    /// The helix `(cos ξ, sin ξ, pitch ξ)` for `ξ ∈ [a, b]`, or, with
    /// `radial = Some((r0, r1))`, the helicoid `(r cos θ, r sin θ, pitch θ)`
    /// over `[r0, r1] x [a, b]`.
    pub fn helix(pitch: f64, a: f64, b: f64, radial: Option<(f64, f64)>) -> Result<Self> {
        match radial {
            None => Ok(ParametrizedManifold::new(3, ParamBox::interval(a, b)?, Family::Helix, move |_, x| {
                DVector::from_column_slice(&[x[0].cos(), x[0].sin(), pitch * x[0]])
            })
            .with_derivative(move |_, x| column(3, &[-x[0].sin(), x[0].cos(), pitch]))),
            Some((r0, r1)) => {
                if !(r0 > 0.0) {
                    return Err(Error::InvalidInput("helicoid inner radius must be positive".into()));
                }
                let domain = ParamBox::new(vec![r0, a], vec![r1, b])?;
                Ok(ParametrizedManifold::new(3, domain, Family::Helix, move |_, x| {
                    let (r, t) = (x[0], x[1]);
                    DVector::from_column_slice(&[r * t.cos(), r * t.sin(), pitch * t])
                })
                .with_derivative(move |_, x| {
                    let (r, t) = (x[0], x[1]);
                    DMatrix::from_column_slice(3, 2, &[t.cos(), t.sin(), 0.0, -r * t.sin(), r * t.cos(), pitch])
                }))
            }
        }
    }

    /// `Σ(ξ) = (ξ, c|ξ|²)` over the cube `[a, b]^k` in `R^{k+1}`.
    pub fn paraboloid(k: usize, a: f64, b: f64, curvature: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("paraboloid dimension must be positive".into()));
        }
        Ok(ParametrizedManifold::new(k + 1, ParamBox::cube(k, a, b)?, Family::Paraboloid, move |_, x| {
            let mut v = DVector::zeros(k + 1);
            v.rows_mut(0, k).copy_from_slice(x);
            v[k] = curvature * x.iter().map(|t| t * t).sum::<f64>();
            v
        })
        .with_derivative(move |_, x| {
            let mut d = DMatrix::zeros(k + 1, k);
            for i in 0..k {
                d[(i, i)] = 1.0;
                d[(k, i)] = 2.0 * curvature * x[i];
            }
            d
        }))
    }

    /// `Σ(ξ) = (ξ, Σ_i c_i ξ^i)`.
    pub fn graph(coefficients: &[f64], a: f64, b: f64) -> Result<Self> {
        let c = coefficients.to_vec();
        let c2 = c.clone();
        Ok(ParametrizedManifold::new(2, ParamBox::interval(a, b)?, Family::Graph, move |_, x| {
            let h = c.iter().rev().fold(0.0, |acc, ci| acc * x[0] + ci);
            DVector::from_column_slice(&[x[0], h])
        })
        .with_derivative(move |_, x| {
            let dh = c2.iter().enumerate().skip(1).rev().fold(0.0, |acc, (i, ci)| acc * x[0] + i as f64 * ci);
            column(2, &[1.0, dh])
        }))
    }

    /// `Σ(ξ_1, ..., ξ_m) = (Σ_1(ξ_1), ..., Σ_m(ξ_m))`.
    pub fn product(factors: &[ParametrizedManifold]) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(|f| f.branches() != 1) {
            return Err(Error::InvalidInput("product needs one or more single-branch factors".into()));
        }
        let domain = ParamBox::product(&factors.iter().map(|f| f.domain().clone()).collect::<Vec<_>>());
        let n: usize = factors.iter().map(|f| f.ambient_dim()).sum();
        let k: usize = factors.iter().map(|f| f.dim()).sum();
        let parts: Vec<ParametrizedManifold> = factors.to_vec();
        let parts2 = parts.clone();
        let blocks: Vec<(usize, usize)> = factors.iter().map(|f| (f.ambient_dim(), f.dim())).collect();
        let blocks2 = blocks.clone();
        let m = ParametrizedManifold::new(n, domain, Family::Product, move |_, x| {
            let mut out = DVector::zeros(n);
            let (mut row, mut col) = (0, 0);
            for (f, (fn_, fk)) in parts.iter().zip(&blocks) {
                let y = f.eval(&super::Param::new(x[col..col + fk].to_vec()));
                out.rows_mut(row, *fn_).copy_from(&y);
                row += fn_;
                col += fk;
            }
            out
        });
        if parts2.iter().all(|f| f.has_analytic_derivative()) {
            Ok(m.with_derivative(move |_, x| {
                let mut d = DMatrix::zeros(n, k);
                let (mut row, mut col) = (0, 0);
                for (f, (fn_, fk)) in parts2.iter().zip(&blocks2) {
                    let p = super::Param::new(x[col..col + fk].to_vec());
                    let block = match &f.dsigma {
                        Some(ds) => ds(0, &p.xi),
                        None => f.tangent_frame_fd(&p),
                    };
                    d.view_mut((row, col), (*fn_, *fk)).copy_from(&block);
                    row += fn_;
                    col += fk;
                }
                d
            }))
        } else {
            Ok(m)
        }
    }

    /// Two disjoint arcs `(ξ, h_b + c ξ²)`, `ξ ∈ [-w, w]`, one per height.
    pub fn two_caps(half_width: f64, heights: [f64; 2], curvature: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::InvalidInput("cap half width must be positive".into()));
        }
        if heights[0] == heights[1] {
            return Err(Error::InvalidInput("caps at equal heights overlap".into()));
        }
        Ok(ParametrizedManifold::new(2, ParamBox::interval(-half_width, half_width)?, Family::TwoCaps, move |b, x| {
            DVector::from_column_slice(&[x[0], heights[b] + curvature * x[0] * x[0]])
        })
        .with_derivative(move |_, x| column(2, &[1.0, 2.0 * curvature * x[0]]))
        .with_branches(2))
    }

    /// Full turn `[0, 2π]` of the unit circle, convenient for (T) failures.
    pub fn full_circle() -> Result<Self> {
        ParametrizedManifold::circle_arc(1.0, [0.0, 0.0], 0.0, 2.0 * PI)
    }
}

#[cfg(test)]
mod tests {
    use super::super::Param;
    use super::*;

    fn fd_matches_analytic(m: &ParametrizedManifold) {
        for p in m.param_grid(7) {
            let exact = m.tangent_frame(&p).unwrap();
            let fd = m.tangent_frame_fd(&p);
            let scale = exact.norm().max(1.0);
            assert!(
                (&exact - &fd).norm() <= 1e-6 * scale,
                "{}: {} vs {} at {p}",
                m.family(),
                exact,
                fd
            );
        }
    }

    #[test]
    fn finite_differences_agree_with_analytic_derivatives() {
        let seg = ParametrizedManifold::segment(&[0.0, 1.0, 0.0], &[1.0, 1.0, 1.0], -0.5, 0.5).unwrap();
        let par = ParametrizedManifold::parabola(0.5, 0.7, -1.0, 1.0).unwrap();
        let arc = ParametrizedManifold::circle_arc(2.0, [1.0, -1.0], 0.2, 2.0).unwrap();
        let helix = ParametrizedManifold::helix(0.2, 0.0, 4.0 * PI, None).unwrap();
        let helicoid = ParametrizedManifold::helix(0.2, 0.0, 4.0 * PI, Some((1.0, 2.0))).unwrap();
        let bowl = ParametrizedManifold::paraboloid(2, -0.5, 0.5, 1.0).unwrap();
        let cubic = ParametrizedManifold::graph(&[0.1, 0.0, -1.0, 1.0], -1.0, 1.0).unwrap();
        let prod = ParametrizedManifold::product(&[par.clone(), arc.clone()]).unwrap();
        let caps = ParametrizedManifold::two_caps(0.5, [0.0, 1.0], 0.3).unwrap();
        for m in [seg, par, arc, helix, helicoid, bowl, cubic, prod, caps] {
            fd_matches_analytic(&m);
        }
    }

    #[test]
    fn product_dimensions_and_blocks() {
        let a = ParametrizedManifold::segment(&[0.0, 0.0], &[1.0, 0.0], -0.5, 0.5).unwrap();
        let b = ParametrizedManifold::parabola(1.0, 0.0, -1.0, 1.0).unwrap();
        let p = ParametrizedManifold::product(&[a, b]).unwrap();
        assert_eq!((p.ambient_dim(), p.dim()), (4, 2));
        let x = p.eval(&Param::new(vec![0.25, 0.5]));
        assert_eq!(x.as_slice(), &[0.25, 0.0, 0.5, 0.25]);
        let d = p.tangent_frame(&Param::new(vec![0.25, 0.5])).unwrap();
        assert_eq!(d.column(1).as_slice(), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn two_caps_has_two_disjoint_branches() {
        let caps = ParametrizedManifold::two_caps(0.5, [0.0, 1.0], 0.0).unwrap();
        assert_eq!(caps.branches(), 2);
        let top = caps.eval(&Param::on_branch(1, vec![0.2]));
        assert_eq!(top.as_slice(), &[0.2, 1.0]);
        caps.validate(21).unwrap();
    }
}
