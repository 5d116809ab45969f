//! Scenario files: a strict JSON schema, loading with path-annotated
//! errors, and resolution into library objects.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::applications::{BLInstance, KPlaneWeight, DEFAULT_VARIATION_FLOOR};
use crate::geometry::{AffinePlane, Subspace};
use crate::manifold::{
    DensityKind, Family, ParamBox, ParametrizedManifold, SurfaceDensity, TransversalityOptions,
};
use crate::transform::{QuadratureRule, Window};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl fmt::Display) -> ScenarioError {
    ScenarioError::Validation { path: path.into(), message: message.to_string() }
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn unit_heights() -> [f64; 2] {
    [0.0, 1.0]
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldSpec {
    Segment {
        origin: Vec<f64>,
        direction: Vec<f64>,
        domain: [f64; 2],
    },
    Parabola {
        #[serde(default = "one")]
        curvature: f64,
        #[serde(default, skip_serializing_if = "is_zero")]
        rotation: f64,
        domain: [f64; 2],
    },
    CircleArc {
        #[serde(default = "one")]
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
        domain: [f64; 2],
    },
    Helix {
        pitch: f64,
        domain: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radial: Option<[f64; 2]>,
    },
    Paraboloid {
        dim: usize,
        domain: [f64; 2],
        #[serde(default = "one")]
        curvature: f64,
    },
    Graph {
        coefficients: Vec<f64>,
        domain: [f64; 2],
    },
    Product {
        factors: Vec<ManifoldSpec>,
    },
    TwoCaps {
        #[serde(default = "half")]
        half_width: f64,
        #[serde(default = "unit_heights")]
        heights: [f64; 2],
        #[serde(default)]
        curvature: f64,
    },
}

impl ManifoldSpec {
    pub fn build(&self) -> crate::Result<ParametrizedManifold> {
        match self {
            ManifoldSpec::Segment { origin, direction, domain } => {
                ParametrizedManifold::segment(origin, direction, domain[0], domain[1])
            }
            ManifoldSpec::Parabola { curvature, rotation, domain } => {
                ParametrizedManifold::parabola(*curvature, *rotation, domain[0], domain[1])
            }
            ManifoldSpec::CircleArc { radius, center, domain } => {
                ParametrizedManifold::circle_arc(*radius, *center, domain[0], domain[1])
            }
            ManifoldSpec::Helix { pitch, domain, radial } => {
                ParametrizedManifold::helix(*pitch, domain[0], domain[1], radial.map(|r| (r[0], r[1])))
            }
            ManifoldSpec::Paraboloid { dim, domain, curvature } => {
                ParametrizedManifold::paraboloid(*dim, domain[0], domain[1], *curvature)
            }
            ManifoldSpec::Graph { coefficients, domain } => {
                ParametrizedManifold::graph(coefficients, domain[0], domain[1])
            }
            ManifoldSpec::Product { factors } => {
                let parts = factors.iter().map(ManifoldSpec::build).collect::<crate::Result<Vec<_>>>()?;
                ParametrizedManifold::product(&parts)
            }
            ManifoldSpec::TwoCaps { half_width, heights, curvature } => {
                ParametrizedManifold::two_caps(*half_width, *heights, *curvature)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DensityTag {
    #[default]
    SmoothBump,
    Indicator,
    GaussianTruncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub kind: DensityTag,
    /// Required for `gaussian_truncated`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub modulation: Vec<f64>,
}

impl Default for DensitySpec {
    fn default() -> Self {
        DensitySpec { kind: DensityTag::SmoothBump, width: None, amplitude: 1.0, modulation: Vec::new() }
    }
}

impl DensitySpec {
    pub fn build(&self, domain: &ParamBox) -> crate::Result<SurfaceDensity> {
        let kind = match (self.kind, self.width) {
            (DensityTag::SmoothBump, None) => DensityKind::SmoothBump,
            (DensityTag::Indicator, None) => DensityKind::Indicator,
            (DensityTag::GaussianTruncated, Some(width)) => DensityKind::GaussianTruncated { width },
            (DensityTag::GaussianTruncated, None) => {
                return Err(crate::Error::InvalidInput("gaussian_truncated needs a width".into()))
            }
            (_, Some(_)) => return Err(crate::Error::InvalidInput("width applies to gaussian_truncated only".into())),
        };
        let f = SurfaceDensity::new(kind, domain)?.scaled(self.amplitude);
        if self.modulation.is_empty() {
            Ok(f)
        } else {
            f.modulated(self.modulation.clone())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanePreset {
    /// `span{e_1}`.
    XAxis,
    /// `span{e_2}`.
    YAxis,
    /// `span{e_3}`.
    ZAxis,
    /// `span{(1, 1)/√2}` in `R^2`.
    Diagonal,
    /// `span{e_1, ..., e_{n-1}}`.
    Horizontal,
    /// `span{e_n}`.
    Vertical,
}

/// Exactly one of `preset`, `angle` (lines in `R^2`) or `basis`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PlaneSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<PlanePreset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<f64>>>,
}

impl PlaneSpec {
    pub fn preset(p: PlanePreset) -> Self {
        PlaneSpec { preset: Some(p), ..Default::default() }
    }

    pub fn angle(a: f64) -> Self {
        PlaneSpec { angle: Some(a), ..Default::default() }
    }

    pub fn resolve(&self, n: usize, path: &str) -> Result<Subspace, ScenarioError> {
        let axis = |i: usize| {
            Subspace::coordinate(n, &[i]).map_err(|_| invalid(path, format!("axis {} does not exist in R^{n}", i + 1)))
        };
        match (self.preset, self.angle, &self.basis) {
            (Some(p), None, None) => match p {
                PlanePreset::XAxis => axis(0),
                PlanePreset::YAxis => axis(1),
                PlanePreset::ZAxis => axis(2),
                PlanePreset::Diagonal if n == 2 => Ok(Subspace::line_at_angle(PI / 4.0)),
                PlanePreset::Diagonal => Err(invalid(path, "the diagonal preset is defined in R^2 only")),
                PlanePreset::Horizontal if n >= 2 => Ok(Subspace::coordinate(n, &(0..n - 1).collect::<Vec<_>>())
                    .expect("coordinate axes are valid")),
                PlanePreset::Vertical if n >= 2 => axis(n - 1),
                _ => Err(invalid(path, format!("preset needs n ≥ 2, got {n}"))),
            },
            (None, Some(a), None) if n == 2 => Ok(Subspace::line_at_angle(a)),
            (None, Some(_), None) => Err(invalid(path, "angle planes are lines in R^2")),
            (None, None, Some(vectors)) => {
                if vectors.is_empty() || vectors.iter().any(|v| v.len() != n) {
                    return Err(invalid(format!("{path}.basis"), format!("basis vectors must lie in R^{n}")));
                }
                let vs: Vec<DVector<f64>> = vectors.iter().map(|v| DVector::from_column_slice(v)).collect();
                Subspace::new(&vs).map_err(|e| invalid(format!("{path}.basis"), e))
            }
            _ => Err(invalid(path, "give exactly one of preset, angle, basis")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub manifold: ManifoldSpec,
    #[serde(default)]
    pub density: DensitySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightAtomSpec {
    pub plane: PlaneSpec,
    /// Point of the affine plane; defaults to the origin.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub offset: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlCase {
    pub vectors: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_feasible: Option<bool>,
}

/// Random configurations for the wedge and product-wedge checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSpec {
    pub count: usize,
    pub dims: Vec<usize>,
    pub min_wedge: f64,
    pub seed: u64,
    pub oracle_order: usize,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec { count: 200, dims: vec![2, 3], min_wedge: 0.05, seed: 0, oracle_order: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct QuadratureOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_panels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane_trunc_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane_points_per_axis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
}

impl QuadratureOverrides {
    fn is_empty(&self) -> bool {
        *self == QuadratureOverrides::default()
    }

    fn apply(&self, mut q: QuadratureRule) -> QuadratureRule {
        if let Some(v) = self.order {
            q.order = v;
        }
        if let Some(v) = self.panels {
            q.panels = v;
        }
        if let Some(v) = self.max_panels {
            q.max_panels = v;
        }
        if let Some(v) = self.plane_trunc_radius {
            q.plane_trunc_radius = v;
        }
        if let Some(v) = self.plane_points_per_axis {
            q.plane_points_per_axis = v;
        }
        if let Some(v) = self.window {
            q.window = v;
        }
        q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TransversalityOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_res: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_gt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_merge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_pair_points: Option<usize>,
}

impl TransversalityOverrides {
    fn is_empty(&self) -> bool {
        *self == TransversalityOverrides::default()
    }

    fn apply(&self, mut o: TransversalityOptions) -> TransversalityOptions {
        if let Some(v) = self.grid_res {
            o.grid_res = v;
        }
        if let Some(v) = self.tol_t {
            o.tol_t = v;
        }
        if let Some(v) = self.tol_gt {
            o.tol_gt = v;
        }
        if let Some(v) = self.h_merge {
            o.h_merge = v;
        }
        if let Some(v) = self.max_pair_points {
            o.max_pair_points = v;
        }
        o
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    TransversalityT,
    TransversalityGt,
    Identity,
    YInvariance,
    Adjoint,
    EnergyConservation,
    Convolution,
    MultilinearRatio,
    BlFeasibility,
    WeightedIdentity,
    GtViolation,
    InterferenceModel,
    WedgeReconciliation,
    JacobianLemma,
    ProductWedge,
}

impl CheckName {
    pub const ALL: [CheckName; 15] = [
        CheckName::TransversalityT,
        CheckName::TransversalityGt,
        CheckName::Identity,
        CheckName::YInvariance,
        CheckName::Adjoint,
        CheckName::EnergyConservation,
        CheckName::Convolution,
        CheckName::MultilinearRatio,
        CheckName::BlFeasibility,
        CheckName::WeightedIdentity,
        CheckName::GtViolation,
        CheckName::InterferenceModel,
        CheckName::WedgeReconciliation,
        CheckName::JacobianLemma,
        CheckName::ProductWedge,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            CheckName::TransversalityT => "transversality_t",
            CheckName::TransversalityGt => "transversality_gt",
            CheckName::Identity => "identity",
            CheckName::YInvariance => "y_invariance",
            CheckName::Adjoint => "adjoint",
            CheckName::EnergyConservation => "energy_conservation",
            CheckName::Convolution => "convolution",
            CheckName::MultilinearRatio => "multilinear_ratio",
            CheckName::BlFeasibility => "bl_feasibility",
            CheckName::WeightedIdentity => "weighted_identity",
            CheckName::GtViolation => "gt_violation",
            CheckName::InterferenceModel => "interference_model",
            CheckName::WedgeReconciliation => "wedge_reconciliation",
            CheckName::JacobianLemma => "jacobian_lemma",
            CheckName::ProductWedge => "product_wedge",
        }
    }

    fn needs_manifold(&self) -> bool {
        matches!(
            self,
            CheckName::TransversalityT
                | CheckName::TransversalityGt
                | CheckName::Identity
                | CheckName::YInvariance
                | CheckName::Adjoint
                | CheckName::EnergyConservation
                | CheckName::WeightedIdentity
                | CheckName::GtViolation
                | CheckName::InterferenceModel
                | CheckName::JacobianLemma
        )
    }

    fn needs_plane(&self) -> bool {
        self.needs_manifold() && !matches!(self, CheckName::EnergyConservation | CheckName::WeightedIdentity)
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Named tolerances; unknown names are rejected by the schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceKey {
    Identity,
    YInvariance,
    Adjoint,
    EnergyConservation,
    Convolution,
    MultilinearRatio,
    MultilinearStability,
    BlFeasibility,
    WeightedIdentity,
    GtViolation,
    InterferenceModel,
    WedgeReconciliation,
    JacobianLemma,
    JacobianFd,
    ProductWedge,
}

impl ToleranceKey {
    pub const ALL: [ToleranceKey; 15] = [
        ToleranceKey::Identity,
        ToleranceKey::YInvariance,
        ToleranceKey::Adjoint,
        ToleranceKey::EnergyConservation,
        ToleranceKey::Convolution,
        ToleranceKey::MultilinearRatio,
        ToleranceKey::MultilinearStability,
        ToleranceKey::BlFeasibility,
        ToleranceKey::WeightedIdentity,
        ToleranceKey::GtViolation,
        ToleranceKey::InterferenceModel,
        ToleranceKey::WedgeReconciliation,
        ToleranceKey::JacobianLemma,
        ToleranceKey::JacobianFd,
        ToleranceKey::ProductWedge,
    ];

    pub fn default_value(&self) -> f64 {
        match self {
            ToleranceKey::Identity
            | ToleranceKey::YInvariance
            | ToleranceKey::Adjoint
            | ToleranceKey::EnergyConservation
            | ToleranceKey::MultilinearRatio
            | ToleranceKey::WeightedIdentity => 1e-3,
            ToleranceKey::Convolution => 0.02,
            ToleranceKey::MultilinearStability => 0.01,
            ToleranceKey::BlFeasibility => 1e-9,
            ToleranceKey::GtViolation => DEFAULT_VARIATION_FLOOR,
            ToleranceKey::InterferenceModel => 0.05,
            ToleranceKey::WedgeReconciliation => 1e-4,
            ToleranceKey::JacobianLemma => 1e-8,
            ToleranceKey::JacobianFd => 1e-6,
            ToleranceKey::ProductWedge => 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifold: Option<ManifoldSpec>,
    #[serde(default)]
    pub density: DensitySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane: Option<PlaneSpec>,
    #[serde(default, skip_serializing_if = "QuadratureOverrides::is_empty")]
    pub quadrature: QuadratureOverrides,
    #[serde(default, skip_serializing_if = "TransversalityOverrides::is_empty")]
    pub transversality: TransversalityOverrides,
    #[serde(default)]
    pub checks: Vec<CheckName>,
    /// Checks whose condition is expected not to hold.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expect_fail: Vec<CheckName>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<ToleranceKey, f64>,
    /// Offsets `y ∈ π^⊥`; the origin when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub y_samples: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub t_samples: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub x_samples: Vec<Vec<f64>>,
    /// Offsets along the (GT) witness direction.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scan_offsets: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub factors: Vec<FactorSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weight_atoms: Vec<WeightAtomSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bl_instances: Vec<BlCase>,
    #[serde(default)]
    pub sampling: SamplingSpec,
    #[serde(default = "default_chart_points")]
    pub chart_points: usize,
    /// Reference value for `multilinear_ratio`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_ratio: Option<f64>,
}

fn default_chart_points() -> usize {
    100
}

/// Library objects built from a validated scenario.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub manifold: Option<ParametrizedManifold>,
    pub density: Option<SurfaceDensity>,
    pub plane: Option<Subspace>,
    pub quadrature: QuadratureRule,
    pub transversality: TransversalityOptions,
    pub y_samples: Vec<DVector<f64>>,
    pub t_samples: Vec<f64>,
    pub x_samples: Vec<DVector<f64>>,
    pub scan_offsets: Vec<f64>,
    pub factors: Vec<(ParametrizedManifold, SurfaceDensity)>,
    pub weight: Option<KPlaneWeight>,
    pub bl_instances: Vec<(BLInstance, Option<bool>)>,
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        match inner.classify() {
            serde_json::error::Category::Data => ScenarioError::Schema { path, message: inner.to_string() },
            _ => ScenarioError::Parse { line: inner.line(), column: inner.column(), message: inner.to_string() },
        }
    })?;
    scenario.resolve()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}

impl Scenario {
    pub fn new(name: &str) -> Self {
        Scenario {
            schema_version: SCHEMA_VERSION,
            name: name.to_string(),
            description: String::new(),
            manifold: None,
            density: DensitySpec::default(),
            plane: None,
            quadrature: QuadratureOverrides::default(),
            transversality: TransversalityOverrides::default(),
            checks: Vec::new(),
            expect_fail: Vec::new(),
            tolerances: BTreeMap::new(),
            y_samples: Vec::new(),
            t_samples: Vec::new(),
            x_samples: Vec::new(),
            scan_offsets: Vec::new(),
            factors: Vec::new(),
            weight_atoms: Vec::new(),
            bl_instances: Vec::new(),
            sampling: SamplingSpec::default(),
            chart_points: default_chart_points(),
            expected_ratio: None,
        }
    }

    /// Pretty JSON that [`parse_scenario`] maps back to `self`.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn tolerance(&self, key: ToleranceKey) -> f64 {
        self.tolerances.get(&key).copied().unwrap_or_else(|| key.default_value())
    }

    pub fn expects_failure(&self, check: CheckName) -> bool {
        self.expect_fail.contains(&check)
    }

    /// Command-line overrides of the quadrature order, truncation radius and
    /// transversality grid.
    pub fn apply_overrides(&mut self, order: Option<usize>, radius: Option<f64>, grid_res: Option<usize>) {
        if order.is_some() {
            self.quadrature.order = order;
        }
        if radius.is_some() {
            self.quadrature.plane_trunc_radius = radius;
        }
        if grid_res.is_some() {
            self.transversality.grid_res = grid_res;
        }
    }

    /// Dimension of the plane integrals the scenario performs, which picks
    /// the quadrature preset.
    fn integration_dim(&self, manifold: Option<&ParametrizedManifold>) -> usize {
        let uses_factors = self.checks.iter().any(|c| matches!(c, CheckName::Convolution | CheckName::MultilinearRatio));
        if uses_factors && !self.factors.is_empty() {
            self.factors.len()
        } else {
            manifold.map_or(1, ParametrizedManifold::dim)
        }
    }

    pub fn resolve(&self) -> Result<Resolved, ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid("schema_version", format!("unsupported version {}", self.schema_version)));
        }
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        for c in &self.expect_fail {
            if !self.checks.contains(c) {
                return Err(invalid("expect_fail", format!("`{c}` is not in checks")));
            }
        }
        for (key, v) in &self.tolerances {
            if !(v.is_finite() && *v > 0.0) {
                return Err(invalid(format!("tolerances.{}", serde_json::to_value(key).unwrap().as_str().unwrap()), "must be positive"));
            }
        }
        let manifold = match &self.manifold {
            Some(spec) => {
                let m = spec.build().map_err(|e| invalid("manifold", e))?;
                m.validate(33).map_err(|e| invalid("manifold", e))?;
                Some(m)
            }
            None => None,
        };
        if let Some(c) = self.checks.iter().find(|c| c.needs_manifold()) {
            if manifold.is_none() {
                return Err(invalid("manifold", format!("check `{c}` needs a manifold")));
            }
        }
        let density = match &manifold {
            Some(m) => Some(self.density.build(m.domain()).map_err(|e| invalid("density", e))?),
            None => None,
        };
        let n = manifold.as_ref().map(ParametrizedManifold::ambient_dim);
        let plane = match (&self.plane, n) {
            (Some(spec), Some(n)) => {
                let p = spec.resolve(n, "plane")?;
                let k = manifold.as_ref().unwrap().dim();
                if p.dim() != k {
                    return Err(invalid("plane", format!("plane has dimension {}, the manifold {k}", p.dim())));
                }
                Some(p)
            }
            (Some(_), None) => return Err(invalid("plane", "a plane needs a manifold")),
            (None, _) => None,
        };
        if let Some(c) = self.checks.iter().find(|c| c.needs_plane()) {
            if plane.is_none() {
                return Err(invalid("plane", format!("check `{c}` needs a plane")));
            }
        }

        let base = QuadratureRule::preset(self.integration_dim(manifold.as_ref()));
        let quadrature = self.quadrature.apply(base);
        quadrature.validate().map_err(|e| invalid("quadrature", e))?;
        let transversality = self.transversality.apply(TransversalityOptions::default());
        if transversality.grid_res < 2 {
            return Err(invalid("transversality.grid_res", "needs at least 2 points"));
        }

        let mut y_samples = Vec::new();
        for (i, y) in self.y_samples.iter().enumerate() {
            let path = format!("y_samples[{i}]");
            let (Some(n), Some(p)) = (n, &plane) else {
                return Err(invalid(path, "offsets need a manifold and a plane"));
            };
            if y.len() != n {
                return Err(invalid(path, format!("expected {n} coordinates")));
            }
            let y = DVector::from_column_slice(y);
            if p.coords(&y).norm() > 1e-12 * y.norm().max(1.0) {
                return Err(invalid(path, "offset is not orthogonal to the plane"));
            }
            y_samples.push(y);
        }
        if y_samples.is_empty() {
            if let Some(n) = n {
                y_samples.push(DVector::zeros(n));
            }
        }

        let t_samples = if self.t_samples.is_empty() { vec![0.0, 0.25, 0.5, 1.0] } else { self.t_samples.clone() };
        if t_samples.iter().any(|t| !t.is_finite()) {
            return Err(invalid("t_samples", "samples must be finite"));
        }
        let scan_offsets = if self.scan_offsets.is_empty() {
            (0..=5).map(|i| i as f64 / 10.0).collect()
        } else {
            self.scan_offsets.clone()
        };

        let mut factors = Vec::new();
        for (i, spec) in self.factors.iter().enumerate() {
            let m = spec.manifold.build().map_err(|e| invalid(format!("factors[{i}].manifold"), e))?;
            let f = spec.density.build(m.domain()).map_err(|e| invalid(format!("factors[{i}].density"), e))?;
            factors.push((m, f));
        }
        let factor_dim = factors.first().map(|(m, _)| m.ambient_dim());
        for c in &self.checks {
            match c {
                CheckName::Convolution if factors.len() != 2 => {
                    return Err(invalid("factors", "the convolution check takes two curves"))
                }
                CheckName::MultilinearRatio if factors.is_empty() => {
                    return Err(invalid("factors", "the multilinear check needs curves"))
                }
                _ => {}
            }
        }
        let mut x_samples = Vec::new();
        for (i, x) in self.x_samples.iter().enumerate() {
            if Some(x.len()) != factor_dim {
                return Err(invalid(format!("x_samples[{i}]"), "sample points must match the factors' ambient space"));
            }
            x_samples.push(DVector::from_column_slice(x));
        }
        if x_samples.is_empty() {
            if let Some(d) = factor_dim {
                x_samples.push(DVector::zeros(d));
            }
        }

        let weight = if self.weight_atoms.is_empty() {
            if self.checks.contains(&CheckName::WeightedIdentity) {
                return Err(invalid("weight_atoms", "the weighted identity needs plane atoms"));
            }
            None
        } else {
            let (Some(n), Some(m)) = (n, &manifold) else {
                return Err(invalid("weight_atoms", "plane atoms need a manifold"));
            };
            let mut atoms = Vec::new();
            for (i, a) in self.weight_atoms.iter().enumerate() {
                let path = format!("weight_atoms[{i}]");
                let dir = a.plane.resolve(n, &format!("{path}.plane"))?;
                if dir.dim() != m.dim() {
                    return Err(invalid(format!("{path}.plane"), "atom planes must have the manifold's dimension"));
                }
                let offset = if a.offset.is_empty() { DVector::zeros(n) } else { DVector::from_column_slice(&a.offset) };
                if offset.len() != n {
                    return Err(invalid(format!("{path}.offset"), format!("expected {n} coordinates")));
                }
                let plane = AffinePlane::through(dir, &offset).map_err(|e| invalid(path.clone(), e))?;
                atoms.push((plane, a.weight));
            }
            Some(KPlaneWeight::new(atoms).map_err(|e| invalid("weight_atoms", e))?)
        };

        let mut bl_instances = Vec::new();
        for (i, case) in self.bl_instances.iter().enumerate() {
            let inst = BLInstance::new(case.vectors.clone(), case.p.clone())
                .map_err(|e| invalid(format!("bl_instances[{i}]"), e))?;
            bl_instances.push((inst, case.expect_feasible));
        }
        if self.checks.contains(&CheckName::BlFeasibility) && bl_instances.is_empty() {
            return Err(invalid("bl_instances", "the feasibility check needs instances"));
        }
        if self.sampling.dims.iter().any(|d| *d < 2) || self.sampling.dims.is_empty() {
            return Err(invalid("sampling.dims", "dimensions must be at least 2"));
        }
        if self.sampling.oracle_order < 8 {
            return Err(invalid("sampling.oracle_order", "needs at least 8 nodes"));
        }
        if !(self.sampling.min_wedge > 0.0 && self.sampling.min_wedge < 1.0) {
            return Err(invalid("sampling.min_wedge", "must lie in (0, 1)"));
        }

        Ok(Resolved {
            manifold,
            density,
            plane,
            quadrature,
            transversality,
            y_samples,
            t_samples,
            x_samples,
            scan_offsets,
            factors,
            weight,
            bl_instances,
        })
    }

    /// A ready-to-run scenario for a built-in family.
    pub fn example(family: Family) -> Option<Scenario> {
        use CheckName::*;
        let mut s = Scenario::new(&format!("{}_example", family.as_str()));
        let x_axis = PlaneSpec::preset(PlanePreset::XAxis);
        match family {
            Family::Segment => {
                s.manifold = Some(ManifoldSpec::Segment { origin: vec![0.0, 0.0], direction: vec![1.0, 0.0], domain: [-0.5, 0.5] });
                s.plane = Some(x_axis);
                s.checks = vec![TransversalityT, TransversalityGt, Identity, YInvariance];
                s.y_samples = vec![vec![0.0, 0.0], vec![0.0, 1.0]];
            }
            Family::Parabola => {
                s.manifold = Some(ManifoldSpec::Parabola { curvature: 1.0, rotation: 0.0, domain: [-1.0, 1.0] });
                s.plane = Some(x_axis);
                s.checks = vec![TransversalityT, TransversalityGt, Identity, YInvariance, Adjoint];
                s.y_samples = vec![vec![0.0, 0.0], vec![0.0, 0.5], vec![0.0, -1.0]];
            }
            Family::CircleArc => {
                s.manifold =
                    Some(ManifoldSpec::CircleArc { radius: 1.0, center: [0.0, 0.0], domain: [PI / 4.0, 3.0 * PI / 4.0] });
                s.plane = Some(x_axis);
                s.checks = vec![TransversalityT, TransversalityGt, Identity, JacobianLemma];
            }
            Family::Helix => {
                s.manifold = Some(ManifoldSpec::Helix { pitch: 1.0 / (2.0 * PI), domain: [0.0, 4.0 * PI], radial: None });
                s.plane = Some(PlaneSpec::preset(PlanePreset::ZAxis));
                s.checks = vec![TransversalityT, TransversalityGt, Identity];
            }
            Family::Paraboloid => {
                s.manifold = Some(ManifoldSpec::Paraboloid { dim: 1, domain: [-1.0, 1.0], curvature: 1.0 });
                s.checks = vec![EnergyConservation];
                s.t_samples = vec![0.0, 0.25, 0.5, 1.0];
            }
            Family::Graph => {
                s.manifold = Some(ManifoldSpec::Graph { coefficients: vec![0.0, 0.0, 0.5, 0.2], domain: [-1.0, 1.0] });
                s.plane = Some(x_axis);
                s.checks = vec![TransversalityT, TransversalityGt, Identity];
            }
            Family::Product => {
                let arc = ManifoldSpec::Parabola { curvature: 0.5, rotation: 0.0, domain: [-0.5, 0.5] };
                s.manifold = Some(ManifoldSpec::Product { factors: vec![arc.clone(), arc] });
                s.plane = Some(PlaneSpec { basis: Some(vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]]), ..Default::default() });
                s.checks = vec![TransversalityT, TransversalityGt];
                s.transversality.grid_res = Some(41);
            }
            Family::TwoCaps => {
                s.manifold = Some(ManifoldSpec::TwoCaps { half_width: 0.5, heights: [0.0, 1.0], curvature: 0.0 });
                s.plane = Some(x_axis);
                s.checks = vec![TransversalityT, TransversalityGt, Identity, GtViolation, InterferenceModel];
                s.expect_fail = vec![TransversalityGt, Identity];
            }
            Family::Custom => return None,
        }
        s.description = family.description().to_string();
        Some(s)
    }
}

/// Every tolerance the scenario uses, defaults filled in.
pub fn all_tolerances(scenario: &Scenario) -> BTreeMap<ToleranceKey, f64> {
    ToleranceKey::ALL.iter().map(|k| (*k, scenario.tolerance(*k))).collect()
}

pub fn family_by_name(name: &str) -> Option<Family> {
    Family::BUILT_IN.into_iter().find(|f| f.as_str() == name)
}
