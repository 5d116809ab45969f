//! Linear and affine subspaces with orthonormal frames, and the wedge
//! quantity `|V ∧ W|` for complementary subspaces.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, unravel};

/// Truncation radius of the Gaussian oracle in units of `1/sqrt(λ)`.
const GAUSSIAN_TRUNCATION: f64 = 3.5;

/// Singular-value ratio below which a frame is treated as rank deficient.
pub const DEGENERACY_RATIO: f64 = 1e-10;

/// A `d`-dimensional linear subspace of `R^n` stored through an orthonormal
/// basis (the columns of `basis`).
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Orthonormalizes `vectors` and returns their span.
    pub fn new(vectors: &[DVector<f64>]) -> Result<Self> {
        orthonormalize(vectors)
    }

    /// Span of the columns of `frame`.
    pub fn from_columns(frame: &DMatrix<f64>) -> Result<Self> {
        let cols: Vec<DVector<f64>> = frame.column_iter().map(|c| c.into_owned()).collect();
        orthonormalize(&cols)
    }

    /// Span of the standard basis vectors `e_i`, `i ∈ axes`, of `R^n` (zero-based).
    pub fn coordinate(n: usize, axes: &[usize]) -> Result<Self> {
        let cols: Vec<DVector<f64>> = axes
            .iter()
            .map(|&i| {
                if i >= n {
                    return Err(Error::DimensionMismatch(format!("axis {i} outside R^{n}")));
                }
                let mut v = DVector::zeros(n);
                v[i] = 1.0;
                Ok(v)
            })
            .collect::<Result<_>>()?;
        orthonormalize(&cols)
    }

    /// The line spanned by `(cos angle, sin angle)` in `R^2`.
    pub fn line_at_angle(angle: f64) -> Self {
        let basis = DMatrix::from_column_slice(2, 1, &[angle.cos(), angle.sin()]);
        Subspace { basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `n x d` matrix with orthonormal columns.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn basis_vector(&self, i: usize) -> DVector<f64> {
        self.basis.column(i).into_owned()
    }

    /// Coordinates of `x` with respect to the orthonormal basis.
    pub fn coords(&self, x: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(x)
    }

    /// The point of `R^n` with the given basis coordinates.
    pub fn embed(&self, coords: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.ambient_dim());
        for (j, c) in coords.iter().enumerate() {
            out.axpy(*c, &self.basis.column(j), 1.0);
        }
        out
    }

    /// Orthogonal complement in `R^n`.
    pub fn complement(&self) -> Subspace {
        let n = self.ambient_dim();
        let d = self.dim();
        let mut cols: Vec<DVector<f64>> = self.basis.column_iter().map(|c| c.into_owned()).collect();
        let mut out = Vec::with_capacity(n - d);
        let mut used = vec![false; n];
        for _ in d..n {
            // the standard vector with the largest residual keeps the step well conditioned
            let mut best = (0usize, -1.0f64, DVector::zeros(n));
            for (i, taken) in used.iter().enumerate() {
                if *taken {
                    continue;
                }
                let mut e = DVector::zeros(n);
                e[i] = 1.0;
                let r = residual(&e, &cols);
                let norm = r.norm();
                if norm > best.1 {
                    best = (i, norm, r);
                }
            }
            used[best.0] = true;
            let mut v = best.2 / best.1;
            v = residual(&v, &cols);
            v /= v.norm();
            cols.push(v.clone());
            out.push(v);
        }
        let mut basis = DMatrix::zeros(n, n - d);
        for (j, v) in out.iter().enumerate() {
            basis.set_column(j, v);
        }
        Subspace { basis }
    }

    /// Orthogonal projector `B B^T`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        (x - &self.basis * self.coords(x)).norm() <= tol
    }
}

/// Subtracts the projection onto each (orthonormal) vector in `basis`.
fn residual(v: &DVector<f64>, basis: &[DVector<f64>]) -> DVector<f64> {
    let mut r = v.clone();
    for b in basis {
        let c = b.dot(&r);
        r.axpy(-c, b, 1.0);
    }
    r
}

/// An affine plane `direction + offset` with `offset` in the orthogonal
/// complement of `direction`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePlane {
    direction: Subspace,
    offset: DVector<f64>,
}

impl AffinePlane {
    /// The plane `direction + point`; the stored offset is the component of
    /// `point` orthogonal to `direction`.
    pub fn through(direction: Subspace, point: &DVector<f64>) -> Result<Self> {
        if point.len() != direction.ambient_dim() {
            return Err(Error::DimensionMismatch(format!(
                "offset has length {}, plane lives in R^{}",
                point.len(),
                direction.ambient_dim()
            )));
        }
        let offset = point - direction.basis() * direction.coords(point);
        Ok(AffinePlane { direction, offset })
    }

    pub fn linear(direction: Subspace) -> Self {
        let n = direction.ambient_dim();
        AffinePlane { direction, offset: DVector::zeros(n) }
    }

    pub fn direction(&self) -> &Subspace {
        &self.direction
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn dim(&self) -> usize {
        self.direction.dim()
    }
}

/// Modified Gram–Schmidt (applied twice) on a linearly independent family.
pub fn orthonormalize(vectors: &[DVector<f64>]) -> Result<Subspace> {
    let d = vectors.len();
    if d == 0 {
        return Err(Error::InvalidInput("cannot span a subspace from zero vectors".into()));
    }
    let n = vectors[0].len();
    if n == 0 || vectors.iter().any(|v| v.len() != n) {
        return Err(Error::DimensionMismatch("vectors have inconsistent lengths".into()));
    }
    if d > n {
        return Err(Error::DimensionMismatch(format!("{d} vectors cannot be independent in R^{n}")));
    }
    let mut frame = DMatrix::zeros(n, d);
    for (j, v) in vectors.iter().enumerate() {
        frame.set_column(j, v);
    }
    let sv = frame.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smax > 0.0) || smin <= DEGENERACY_RATIO * smax {
        let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
        return Err(Error::DegenerateSpan { ratio });
    }
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(d);
    for v in vectors {
        let mut w = residual(v, &out);
        w = residual(&w, &out);
        let norm = w.norm();
        out.push(w / norm);
    }
    let mut basis = DMatrix::zeros(n, d);
    for (j, v) in out.iter().enumerate() {
        basis.set_column(j, v);
    }
    Ok(Subspace { basis })
}

fn check_complementary(v: &Subspace, w: &Subspace) -> Result<usize> {
    let n = v.ambient_dim();
    if w.ambient_dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "subspaces live in R^{} and R^{}",
            n,
            w.ambient_dim()
        )));
    }
    if v.dim() + w.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "dimensions {} + {} are not complementary in R^{}",
            v.dim(),
            w.dim(),
            n
        )));
    }
    Ok(n)
}

/// `|V ∧ W|`: absolute determinant of the `n x n` matrix whose columns are
/// orthonormal bases of `V` and `W`.
pub fn wedge_abs(v: &Subspace, w: &Subspace) -> Result<f64> {
    let n = check_complementary(v, w)?;
    let mut m = DMatrix::zeros(n, n);
    m.columns_mut(0, v.dim()).copy_from(v.basis());
    m.columns_mut(v.dim(), w.dim()).copy_from(w.basis());
    Ok(m.determinant().abs().min(1.0))
}

/// The Gaussian double integral `∫_V ∫_W exp(-π |u + v|^2) du dv` evaluated by
/// tensor Gauss–Legendre quadrature. Its exact value is `1 / |V ∧ W|`.
///
/// Coordinates are rotated onto the principal axes of the quadratic form
/// `|Va + Wb|^2` and axis `i` is truncated at `3.5 / sqrt(λ_i)`, where the
/// integrand has fallen below `1e-16`. A fixed box loses mass for
/// near-parallel pairs.
pub fn wedge_gaussian_oracle(v: &Subspace, w: &Subspace, quad_order: usize) -> Result<f64> {
    let n = check_complementary(v, w)?;
    if quad_order < 8 {
        return Err(Error::InvalidInput(format!("quad_order {quad_order} < 8")));
    }
    let mut frame = DMatrix::zeros(n, n);
    frame.columns_mut(0, v.dim()).copy_from(v.basis());
    frame.columns_mut(v.dim(), w.dim()).copy_from(w.basis());
    let gram = frame.tr_mul(&frame);
    let eig = SymmetricEigen::new(gram);
    if eig.eigenvalues.min() <= 1e-300 {
        return Ok(f64::INFINITY);
    }
    let half_widths: Vec<f64> = eig.eigenvalues.iter().map(|&l| GAUSSIAN_TRUNCATION / l.sqrt()).collect();
    // map principal coordinates s to (a, b) and then to R^n in one matrix
    let to_space = &frame * &eig.eigenvectors;
    let rule = gauss_legendre(quad_order);
    let total_points = quad_order.pow(n as u32);
    let mut idx = vec![0usize; n];
    let mut acc = crate::quadrature::CompensatedSum::default();
    let mut s = DVector::zeros(n);
    for flat in 0..total_points {
        unravel(flat, quad_order, n, &mut idx);
        let mut weight = 1.0;
        for d in 0..n {
            s[d] = half_widths[d] * rule.nodes[idx[d]];
            weight *= half_widths[d] * rule.weights[idx[d]];
        }
        let x = &to_space * &s;
        acc.add(weight * (-std::f64::consts::PI * x.norm_squared()).exp());
    }
    Ok(acc.total())
}

/// Orthogonal projection of `x` onto `v`.
pub fn project_onto(x: &DVector<f64>, v: &Subspace) -> Result<DVector<f64>> {
    if x.len() != v.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} projected onto a subspace of R^{}",
            x.len(),
            v.ambient_dim()
        )));
    }
    Ok(v.basis() * v.coords(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

    fn gram_is_identity(s: &Subspace) -> bool {
        let g = s.basis().tr_mul(s.basis());
        (g - DMatrix::identity(s.dim(), s.dim())).abs().max() <= 1e-12
    }

    #[test]
    fn orthonormal_input_is_kept() {
        let s = orthonormalize(&[dvector![1.0, 0.0, 0.0], dvector![0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(s.basis_vector(0), dvector![1.0, 0.0, 0.0]);
        assert_eq!(s.basis_vector(1), dvector![0.0, 1.0, 0.0]);
    }

    #[test]
    fn one_projection_step() {
        let s = orthonormalize(&[dvector![1.0, 0.0], dvector![1.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(s.basis_vector(0), dvector![1.0, 0.0], epsilon = 1e-15);
        assert_abs_diff_eq!(s.basis_vector(1), dvector![0.0, 1.0], epsilon = 1e-15);
    }

    #[test]
    fn span_is_orthogonal_to_cross_product() {
        let a = dvector![1.0, 1.0, 0.0] * FRAC_1_SQRT_2;
        let b = dvector![0.0, 1.0, 1.0] * FRAC_1_SQRT_2;
        let s = orthonormalize(&[a.clone(), b.clone()]).unwrap();
        assert!(gram_is_identity(&s));
        // cross product a x b is parallel to (1, -1, 1)
        let normal = dvector![1.0, -1.0, 1.0] / 3f64.sqrt();
        let cross = dvector![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        assert_abs_diff_eq!(cross.normalize(), normal, epsilon = 1e-15);
        for i in 0..2 {
            assert!(s.basis_vector(i).dot(&normal).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_deficient_frame_is_rejected() {
        let err = orthonormalize(&[dvector![1.0, 2.0], dvector![2.0, 4.0]]).unwrap_err();
        assert!(matches!(err, Error::DegenerateSpan { .. }));
        let err = orthonormalize(&[dvector![0.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::DegenerateSpan { .. }));
    }

    #[test]
    fn wedge_examples() {
        let e1 = Subspace::line_at_angle(0.0);
        let e2 = Subspace::line_at_angle(std::f64::consts::FRAC_PI_2);
        assert_abs_diff_eq!(wedge_abs(&e1, &e2).unwrap(), 1.0, epsilon = 1e-15);
        let diag = Subspace::line_at_angle(FRAC_PI_4);
        assert_abs_diff_eq!(wedge_abs(&e1, &diag).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(wedge_abs(&e1, &e1).unwrap(), 0.0);
        let plane = Subspace::coordinate(3, &[0, 1]).unwrap();
        assert!(matches!(wedge_abs(&plane, &plane), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn gaussian_oracle_examples() {
        let e1 = Subspace::line_at_angle(0.0);
        let e2 = Subspace::line_at_angle(std::f64::consts::FRAC_PI_2);
        assert_abs_diff_eq!(wedge_gaussian_oracle(&e1, &e2, 32).unwrap(), 1.0, epsilon = 1e-9);
        let diag = Subspace::line_at_angle(FRAC_PI_4);
        assert_abs_diff_eq!(wedge_gaussian_oracle(&e1, &diag, 32).unwrap(), 2f64.sqrt(), epsilon = 1e-9);
        assert!(wedge_gaussian_oracle(&e1, &diag, 4).is_err());
    }

    #[test]
    fn gaussian_oracle_near_parallel() {
        let e1 = Subspace::line_at_angle(0.0);
        let l = Subspace::line_at_angle(0.05f64.asin());
        let oracle = wedge_gaussian_oracle(&e1, &l, 32).unwrap();
        assert_abs_diff_eq!(oracle * 0.05, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn complement_spans_the_rest() {
        let v = orthonormalize(&[dvector![1.0, 2.0, 3.0, 4.0], dvector![0.0, 1.0, -1.0, 2.0]]).unwrap();
        let c = v.complement();
        assert_eq!(c.dim(), 2);
        assert!(gram_is_identity(&c));
        assert!(v.basis().tr_mul(c.basis()).abs().max() < 1e-12);
        assert_abs_diff_eq!(wedge_abs(&v, &c).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_examples() {
        let v = orthonormalize(&[dvector![1.0, 1.0]]).unwrap();
        let p = project_onto(&dvector![1.0, 2.0], &v).unwrap();
        assert_abs_diff_eq!(p, dvector![1.5, 1.5], epsilon = 1e-15);
        let inside = dvector![3.0, 3.0];
        assert_abs_diff_eq!(project_onto(&inside, &v).unwrap(), inside, epsilon = 1e-14);
        assert_abs_diff_eq!(project_onto(&dvector![1.0, -1.0], &v).unwrap().norm(), 0.0, epsilon = 1e-15);
        assert!(project_onto(&dvector![1.0, 2.0, 3.0], &v).is_err());
    }

    #[test]
    fn affine_plane_offset_lies_in_complement() {
        let dir = Subspace::line_at_angle(0.3);
        let p = AffinePlane::through(dir.clone(), &dvector![2.0, -1.0]).unwrap();
        assert!(project_onto(p.offset(), &dir).unwrap().norm() <= 1e-12);
        assert!(dir.complement().contains(p.offset(), 1e-12));
    }
}
