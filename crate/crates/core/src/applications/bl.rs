//! Rank-one Brascamp–Lieb data and Barthe's feasibility criterion:
//! `p` must lie in the convex hull of the indicator vectors `p^J` of the
//! index sets `J` for which `{v_j}_{j∈J}` is a basis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::simplex::{phase_one, PhaseOne};
use crate::error::{Error, Result};

/// Largest `m` accepted; basis enumeration is `C(m, n)`.
pub const MAX_MAPS: usize = 12;
/// Index sets with `|det| ≤ BASIS_DET_FLOOR` are not bases.
pub const BASIS_DET_FLOOR: f64 = 1e-10;

/// Maps `L_j x = <x, v_j>` with exponents `p_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BLInstance {
    pub vectors: Vec<Vec<f64>>,
    pub p: Vec<f64>,
}

impl BLInstance {
    pub fn new(vectors: Vec<Vec<f64>>, p: Vec<f64>) -> Result<Self> {
        let inst = BLInstance { vectors, p };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || self.vectors.iter().any(|v| v.len() != n) {
            return Err(Error::DimensionMismatch("BL vectors must share a positive dimension".into()));
        }
        if self.p.len() != self.m() {
            return Err(Error::DimensionMismatch(format!("{} exponents for {} maps", self.p.len(), self.m())));
        }
        for (j, v) in self.vectors.iter().enumerate() {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("v_{j} has norm {norm}, expected 1")));
            }
        }
        if self.p.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidInput("exponents must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn m(&self) -> usize {
        self.vectors.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BLFeasibility {
    pub feasible: bool,
    /// `(J, λ_J)` with `λ_J > 0`, `J` sorted ascending.
    pub lambdas: Vec<(Vec<usize>, f64)>,
    /// Index sets `J` for which `{v_j}_{j∈J}` is a basis.
    pub bases: Vec<Vec<usize>>,
    /// When infeasible: `y ∈ R^{m+1}` with `y·(p^J, 1) ≤ 0` for every basis
    /// `J` and `y·(p, 1) > 0`.
    pub certificate: Option<Vec<f64>>,
}

impl BLFeasibility {
    /// `max |Σ λ_J p^J - p|` and `|Σ λ_J - 1|` combined.
    pub fn residual(&self, p: &[f64]) -> f64 {
        let mut acc = vec![0.0; p.len()];
        let mut total = 0.0;
        for (set, lambda) in &self.lambdas {
            for &j in set {
                acc[j] += lambda;
            }
            total += lambda;
        }
        acc.iter().zip(p).map(|(a, p)| (a - p).abs()).fold((total - 1.0f64).abs(), f64::max)
    }

    /// Checks whichever certificate is present against `p`: the convex
    /// combination to within `tol` with `λ_J ≥ -1e-12`, or the Farkas vector.
    pub fn certificate_valid(&self, p: &[f64], tol: f64) -> bool {
        if self.feasible {
            return self.residual(p) <= tol && self.lambdas.iter().all(|(_, l)| *l >= -1e-12);
        }
        let Some(y) = &self.certificate else { return false };
        let m = p.len();
        if y.len() != m + 1 {
            return false;
        }
        let separates = self.bases.iter().all(|set| set.iter().map(|&j| y[j]).sum::<f64>() + y[m] <= 1e-12);
        separates && p.iter().zip(y).map(|(p, y)| p * y).sum::<f64>() + y[m] > 1e-12
    }
}

fn subsets(m: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for j in start..m {
            cur.push(j);
            rec(j + 1, m, n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, n, &mut Vec::new(), &mut out);
    out
}

pub fn bl_feasibility(inst: &BLInstance) -> Result<BLFeasibility> {
    inst.validate()?;
    let (n, m) = (inst.n(), inst.m());
    if m > MAX_MAPS {
        return Err(Error::TooManyMaps { m, cap: MAX_MAPS });
    }
    let bases: Vec<Vec<usize>> = subsets(m, n)
        .into_iter()
        .filter(|set| {
            let d = DMatrix::from_fn(n, n, |i, c| inst.vectors[set[c]][i]).determinant();
            d.abs() > BASIS_DET_FLOOR
        })
        .collect();
    let mut a = DMatrix::zeros(m + 1, bases.len());
    for (c, set) in bases.iter().enumerate() {
        for &j in set {
            a[(j, c)] = 1.0;
        }
        a[(m, c)] = 1.0;
    }
    let b = DVector::from_column_slice(&inst.p).push(1.0);
    Ok(match phase_one(&a, &b) {
        PhaseOne::Feasible(x) => BLFeasibility {
            feasible: true,
            lambdas: bases.iter().zip(x.iter()).filter(|(_, l)| **l > 0.0).map(|(s, l)| (s.clone(), *l)).collect(),
            bases,
            certificate: None,
        },
        PhaseOne::Infeasible(y) => BLFeasibility {
            feasible: false,
            lambdas: Vec::new(),
            bases,
            certificate: Some(y.iter().copied().collect()),
        },
    })
}
