use std::f64::consts::PI;

use num_complex::Complex64;

use super::{Param, ParamBox, ParametrizedManifold};
use crate::error::{Error, Result};
use crate::quadrature::{composite_gauss_legendre, unravel, CompensatedSum};

#[derive(Debug, Clone, PartialEq)]
pub enum DensityKind {
    /// `Π_i exp(1 - 1/(1 - t_i^2))` in box-normalized coordinates `t ∈ (-1, 1)^k`.
    SmoothBump,
    /// Constant on the box.
    Indicator,
    /// `exp(-|ξ - center|^2 / (2 width^2))` restricted to the box.
    GaussianTruncated { width: f64 },
}

impl DensityKind {
    pub fn tag(&self) -> &'static str {
        match self {
            DensityKind::SmoothBump => "smooth_bump",
            DensityKind::Indicator => "indicator",
            DensityKind::GaussianTruncated { .. } => "gaussian_truncated",
        }
    }
}

/// Parametrized density `f: U -> C`. The surface density is recovered as
/// `g(Σ(ξ)) = f(ξ) / J(ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceDensity {
    kind: DensityKind,
    amplitude: f64,
    /// Optional frequency `m`; `f` is multiplied by `exp(2πi m·ξ)`.
    modulation: Vec<f64>,
    domain: ParamBox,
}

fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

impl SurfaceDensity {
    pub fn new(kind: DensityKind, domain: &ParamBox) -> Result<Self> {
        if let DensityKind::GaussianTruncated { width } = kind {
            if !(width > 0.0) {
                return Err(Error::InvalidInput("gaussian width must be positive".into()));
            }
        }
        Ok(SurfaceDensity { kind, amplitude: 1.0, modulation: Vec::new(), domain: domain.clone() })
    }

    pub fn smooth_bump(domain: &ParamBox) -> Self {
        SurfaceDensity::new(DensityKind::SmoothBump, domain).expect("bump is always valid")
    }

    pub fn indicator(domain: &ParamBox) -> Self {
        SurfaceDensity::new(DensityKind::Indicator, domain).expect("indicator is always valid")
    }

    pub fn scaled(mut self, amplitude: f64) -> Self {
        self.amplitude *= amplitude;
        self
    }

    pub fn modulated(mut self, frequency: Vec<f64>) -> Result<Self> {
        if frequency.len() != self.domain.dim() {
            return Err(Error::DimensionMismatch("modulation frequency has wrong length".into()));
        }
        self.modulation = frequency;
        Ok(self)
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn domain(&self) -> &ParamBox {
        &self.domain
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }

    /// `f(ξ)`; zero outside the box. All branches share the same profile.
    pub fn eval(&self, p: &Param) -> Complex64 {
        let xi = &p.xi;
        if !self.domain.contains(xi, 0.0) {
            return Complex64::new(0.0, 0.0);
        }
        let real = match &self.kind {
            DensityKind::SmoothBump => (0..xi.len())
                .map(|d| {
                    let t = (2.0 * xi[d] - self.domain.lo()[d] - self.domain.hi()[d]) / self.domain.width(d);
                    bump(t)
                })
                .product::<f64>(),
            DensityKind::Indicator => 1.0,
            DensityKind::GaussianTruncated { width } => {
                let c = self.domain.center();
                let r2: f64 = xi.iter().zip(&c).map(|(x, c)| (x - c).powi(2)).sum();
                (-r2 / (2.0 * width * width)).exp()
            }
        } * self.amplitude;
        if self.modulation.is_empty() {
            Complex64::new(real, 0.0)
        } else {
            let phase: f64 = 2.0 * PI * self.modulation.iter().zip(xi).map(|(m, x)| m * x).sum::<f64>();
            Complex64::from_polar(real, phase)
        }
    }

    /// `g(Σ(ξ)) = f(ξ) / J(ξ)`.
    pub fn surface_value(&self, manifold: &ParametrizedManifold, p: &Param) -> Result<Complex64> {
        Ok(self.eval(p) / manifold.surface_jacobian(p)?)
    }

    /// `∫_U |f|^2 dξ` summed over `branches`, by tensor Gauss–Legendre.
    pub fn l2_norm_sq(&self, branches: usize, order: usize, panels: usize) -> f64 {
        let k = self.domain.dim();
        let rules: Vec<_> = (0..k)
            .map(|d| composite_gauss_legendre(self.domain.lo()[d], self.domain.hi()[d], order, panels))
            .collect();
        let len = rules[0].len();
        let mut idx = vec![0usize; k];
        let mut acc = CompensatedSum::default();
        for b in 0..branches {
            for flat in 0..len.pow(k as u32) {
                unravel(flat, len, k, &mut idx);
                let xi: Vec<f64> = (0..k).map(|d| rules[d].nodes[idx[d]]).collect();
                let w: f64 = (0..k).map(|d| rules[d].weights[idx[d]]).product();
                acc.add(w * self.eval(&Param::on_branch(b, xi)).norm_sqr());
            }
        }
        acc.total()
    }

    /// Largest `|f|` and one-sided difference quotient over boundary grid
    /// points. Smooth bumps must return at most `1e-10`.
    pub fn boundary_defect(&self, grid_res: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for xi in self.domain.grid(grid_res) {
            for d in 0..xi.len() {
                let on_lo = xi[d] == self.domain.lo()[d];
                let on_hi = xi[d] == self.domain.hi()[d];
                if !(on_lo || on_hi) {
                    continue;
                }
                let h = 1e-3 * self.domain.width(d);
                let mut inner = xi.clone();
                inner[d] += if on_lo { h } else { -h };
                let f0 = self.eval(&Param::new(xi.clone()));
                let f1 = self.eval(&Param::new(inner));
                worst = worst.max(f0.norm()).max((f1 - f0).norm() / h);
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bump_vanishes_to_high_order_at_faces() {
        let dom = ParamBox::new(vec![-1.0, 0.0], vec![1.0, 2.0]).unwrap();
        let f = SurfaceDensity::smooth_bump(&dom);
        assert!(f.boundary_defect(11) <= 1e-10);
        assert_abs_diff_eq!(f.eval(&Param::new(vec![0.0, 1.0])).re, 1.0, epsilon = 1e-15);
        let g = SurfaceDensity::indicator(&dom);
        assert!(g.boundary_defect(11) >= 1.0);
    }

    #[test]
    fn norm_matches_independent_simpson_rule() {
        let dom = ParamBox::interval(-1.0, 1.0).unwrap();
        let f = SurfaceDensity::smooth_bump(&dom).scaled(2.0);
        // composite Simpson on a fine grid as an independent check
        let n = 20000;
        let h = 2.0 / n as f64;
        let simpson: f64 = (0..=n)
            .map(|i| {
                let x = -1.0 + i as f64 * h;
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * f.eval(&x.into()).norm_sqr()
            })
            .sum::<f64>()
            * h
            / 3.0;
        assert_abs_diff_eq!(f.l2_norm_sq(1, 64, 4), simpson, epsilon = 1e-11);
    }

    #[test]
    fn modulation_keeps_modulus() {
        let dom = ParamBox::interval(-1.0, 1.0).unwrap();
        let f = SurfaceDensity::smooth_bump(&dom).modulated(vec![3.0]).unwrap();
        let plain = SurfaceDensity::smooth_bump(&dom);
        let p: Param = 0.3.into();
        assert_abs_diff_eq!(f.eval(&p).norm(), plain.eval(&p).norm(), epsilon = 1e-15);
        assert!(f.eval(&p).im.abs() > 0.0);
        assert_eq!(f.eval(&2.0.into()), Complex64::new(0.0, 0.0));
    }
}
