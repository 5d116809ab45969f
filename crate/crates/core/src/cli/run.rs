//! Executes the checks of a scenario in order. Every check produces a
//! record; errors are captured in the record and never abort the run.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{CheckName, ManifoldSpec, Resolved, Scenario, ToleranceKey};
use crate::applications::{
    bl_feasibility, convolution_identity_check, gt_violation_scan, multilinear_l2_ratio, product_wedge_factor,
    relative_spread, schrodinger_energy_scan, weighted_identity_check, GtViolationReport,
};
use crate::error::{Error, Result};
use crate::geometry::{wedge_abs, wedge_gaussian_oracle, Subspace};
use crate::manifold::{
    check_transversality_gt, check_transversality_t, graph_reparametrize, Param, ParametrizedManifold,
    SurfaceDensity, TransversalityOptions,
};
use crate::transform::{
    composed_adjoint_transform, pushforward_measure, verify_identity, IdentityReport, OffsetRule, QuadratureRule,
};

pub const TOOL_NAME: &str = "kplane";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: CheckName,
    /// The scenario expects the condition not to hold.
    pub expect_fail: bool,
    /// Whether the checked condition holds.
    pub outcome: bool,
    /// `outcome != expect_fail`.
    pub pass: bool,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub rel_error: Option<f64>,
    pub tolerance: Option<f64>,
    pub margin: Option<f64>,
    pub tail_bound: Option<f64>,
    pub runtime_ms: f64,
    pub error: Option<String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub scenario: String,
    pub overall_pass: bool,
    pub quadrature: QuadratureRule,
    pub transversality: TransversalityOptions,
    pub tolerances: BTreeMap<ToleranceKey, f64>,
    pub checks: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn record(&self, check: CheckName) -> Option<&CheckRecord> {
        self.checks.iter().find(|r| r.check == check)
    }
}

/// What a check measured, before the expectation is applied.
#[derive(Debug, Default)]
struct Measured {
    outcome: bool,
    lhs: Option<f64>,
    rhs: Option<f64>,
    rel_error: Option<f64>,
    tolerance: Option<f64>,
    margin: Option<f64>,
    tail_bound: Option<f64>,
    detail: String,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn rel(a: f64, b: f64) -> f64 {
    if b != 0.0 {
        (a - b).abs() / b.abs()
    } else if a == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn budget_note(ok: bool) -> &'static str {
    if ok {
        ""
    } else {
        "; extension panel budget exhausted"
    }
}

struct Runner<'a> {
    scenario: &'a Scenario,
    r: &'a Resolved,
    identity: Option<Result<IdentityReport>>,
    scan: Option<Result<GtViolationReport>>,
}

impl<'a> Runner<'a> {
    fn manifold(&self) -> Result<(&'a ParametrizedManifold, &'a SurfaceDensity)> {
        match (&self.r.manifold, &self.r.density) {
            (Some(m), Some(f)) => Ok((m, f)),
            _ => Err(Error::WrongScenario("no manifold".into())),
        }
    }

    fn plane(&self) -> Result<&'a Subspace> {
        self.r.plane.as_ref().ok_or_else(|| Error::WrongScenario("no plane".into()))
    }

    fn tol(&self, key: ToleranceKey) -> f64 {
        self.scenario.tolerance(key)
    }

    fn identity(&mut self) -> Result<IdentityReport> {
        if self.identity.is_none() {
            let run = || {
                let (m, f) = self.manifold()?;
                verify_identity(m, f, self.plane()?, &self.r.y_samples, &self.r.quadrature, &self.r.transversality)
            };
            self.identity = Some(run());
        }
        self.identity.clone().expect("just computed")
    }

    fn scan(&mut self) -> Result<GtViolationReport> {
        if self.scan.is_none() {
            let run = || {
                let (m, f) = self.manifold()?;
                gt_violation_scan(
                    m,
                    f,
                    self.plane()?,
                    &self.r.scan_offsets,
                    &self.r.quadrature,
                    &self.r.transversality,
                    self.tol(ToleranceKey::GtViolation),
                )
            };
            self.scan = Some(run());
        }
        self.scan.clone().expect("just computed")
    }

    fn run(&mut self, check: CheckName) -> Result<Measured> {
        match check {
            CheckName::TransversalityT => {
                let (m, _) = self.manifold()?;
                let t = check_transversality_t(m, self.plane()?, &self.r.transversality)?;
                Ok(Measured {
                    outcome: t.pass,
                    tolerance: Some(self.r.transversality.tol_t),
                    margin: finite(t.margin),
                    detail: format!("min |T ∧ π^⊥| at {}", t.witness),
                    ..Default::default()
                })
            }
            CheckName::TransversalityGt => {
                let (m, _) = self.manifold()?;
                let gt = check_transversality_gt(m, self.plane()?, &self.r.transversality)?;
                let dir = &gt.chord / gt.chord.norm();
                Ok(Measured {
                    outcome: gt.pass,
                    tolerance: Some(self.r.transversality.tol_gt),
                    margin: finite(gt.margin),
                    detail: format!(
                        "worst chord {} / {}, direction {}",
                        gt.witness.0,
                        gt.witness.1,
                        fmt_vec(dir.as_slice())
                    ),
                    ..Default::default()
                })
            }
            CheckName::Identity => {
                let id = self.identity()?;
                let tol = self.tol(ToleranceKey::Identity);
                Ok(Measured {
                    outcome: id.identity_error <= tol,
                    lhs: id.lhs.first().copied().and_then(finite),
                    rhs: finite(id.rhs),
                    rel_error: finite(id.identity_error),
                    tolerance: Some(tol),
                    margin: finite(id.t_margin.min(id.gt_margin)),
                    tail_bound: finite(id.tail_bound),
                    detail: format!("worst of {} offsets{}", id.lhs.len(), budget_note(id.budget_ok)),
                })
            }
            CheckName::YInvariance => {
                let id = self.identity()?;
                let tol = self.tol(ToleranceKey::YInvariance);
                let max = id.lhs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = id.lhs.iter().copied().fold(f64::INFINITY, f64::min);
                Ok(Measured {
                    outcome: id.y_spread <= tol,
                    lhs: finite(max),
                    rhs: finite(min),
                    rel_error: finite(id.y_spread),
                    tolerance: Some(tol),
                    margin: finite(id.t_margin.min(id.gt_margin)),
                    tail_bound: finite(id.tail_bound),
                    detail: format!("(max - min) / rhs over {} offsets", id.lhs.len()),
                })
            }
            CheckName::Adjoint => {
                let id = self.identity()?;
                let (m, f) = self.manifold()?;
                let plane = self.plane()?;
                let mu = pushforward_measure(m, f, &self.r.quadrature, OffsetRule::Zero)?;
                let tol = self.tol(ToleranceKey::Adjoint);
                let adjoint = composed_adjoint_transform(&mu, plane, &self.r.y_samples[0])?;
                let mut worst = rel(adjoint, id.rhs);
                for (y, l) in self.r.y_samples.iter().zip(&id.lhs) {
                    let a = composed_adjoint_transform(&mu, plane, y)?;
                    worst = worst.max(rel(*l, a)).max(rel(a, adjoint));
                }
                Ok(Measured {
                    outcome: worst <= tol,
                    lhs: finite(adjoint),
                    rhs: finite(id.rhs),
                    rel_error: finite(worst),
                    tolerance: Some(tol),
                    margin: finite(id.t_margin.min(id.gt_margin)),
                    tail_bound: finite(id.tail_bound),
                    detail: format!("{} plane atoms; compared with every plane integral and the tangent integral", mu.atoms().len()),
                })
            }
            CheckName::EnergyConservation => {
                let (m, f) = self.manifold()?;
                let samples = schrodinger_energy_scan(m, f, &self.r.t_samples, &self.r.quadrature)?;
                let q = &self.r.quadrature;
                let norm = f.l2_norm_sq(m.branches(), q.order.max(32), q.panels.max(4));
                let energies: Vec<f64> = samples.iter().map(|s| s.energy).collect();
                let spread = relative_spread(&energies);
                let at_zero = samples.iter().find(|s| s.t == 0.0).map_or(energies[0], |s| s.energy);
                let err = spread.max(rel(at_zero, norm));
                let tol = self.tol(ToleranceKey::EnergyConservation);
                Ok(Measured {
                    outcome: err <= tol,
                    lhs: finite(at_zero),
                    rhs: finite(norm),
                    rel_error: finite(err),
                    tolerance: Some(tol),
                    tail_bound: finite(samples.iter().map(|s| s.tail_bound).fold(0.0, f64::max)),
                    detail: format!(
                        "{} times, spread {:.3e}, |E(0) - ‖f‖²| / ‖f‖² {:.3e}{}",
                        samples.len(),
                        spread,
                        rel(at_zero, norm),
                        budget_note(samples.iter().all(|s| s.budget_ok))
                    ),
                    ..Default::default()
                })
            }
            CheckName::Convolution => {
                let (ms, fs): (Vec<_>, Vec<_>) = self.r.factors.iter().cloned().unzip();
                let c = convolution_identity_check(&ms, &fs, &self.r.x_samples, &self.r.quadrature)?;
                let tol = self.tol(ToleranceKey::Convolution);
                let err = c.max_rel_error.max(c.spread);
                Ok(Measured {
                    outcome: err <= tol,
                    lhs: c.lhs.first().copied().and_then(finite),
                    rhs: finite(c.rhs),
                    rel_error: finite(err),
                    tolerance: Some(tol),
                    margin: finite(c.min_normal_wedge),
                    tail_bound: finite(c.tail_bound),
                    detail: format!(
                        "{} samples, max error {:.3e}, spread {:.3e}{}",
                        c.lhs.len(),
                        c.max_rel_error,
                        c.spread,
                        budget_note(c.budget_ok)
                    ),
                })
            }
            CheckName::MultilinearRatio => {
                let (ms, fs): (Vec<_>, Vec<_>) = self.r.factors.iter().cloned().unzip();
                let q = &self.r.quadrature;
                let base = multilinear_l2_ratio(&ms, &fs, q)?;
                let wider = QuadratureRule {
                    plane_trunc_radius: 2.0 * q.plane_trunc_radius,
                    plane_points_per_axis: 2 * q.plane_points_per_axis,
                    ..q.clone()
                };
                let wide = multilinear_l2_ratio(&ms, &fs, &wider)?;
                let stability = rel(wide.ratio, base.ratio);
                let stab_tol = self.tol(ToleranceKey::MultilinearStability);
                let mut outcome = stability <= stab_tol;
                let mut detail = format!("ratio {:.6}, change under doubled radius {:.3e}", base.ratio, stability);
                let mut rel_error = stability;
                let mut tolerance = stab_tol;
                if let Some(expected) = self.scenario.expected_ratio {
                    let tol = self.tol(ToleranceKey::MultilinearRatio);
                    rel_error = rel(base.ratio, expected);
                    tolerance = tol;
                    outcome &= rel_error <= tol;
                    detail.push_str(&format!(", expected {expected}"));
                }
                detail.push_str(budget_note(base.budget_ok && wide.budget_ok));
                Ok(Measured {
                    outcome,
                    lhs: finite(base.ratio),
                    rhs: self.scenario.expected_ratio.and_then(finite),
                    rel_error: finite(rel_error),
                    tolerance: Some(tolerance),
                    margin: finite(base.tangent_det),
                    tail_bound: finite(base.tail_bound),
                    detail,
                })
            }
            CheckName::BlFeasibility => {
                let tol = self.tol(ToleranceKey::BlFeasibility);
                let mut outcome = true;
                let mut worst: f64 = 0.0;
                let mut parts = Vec::new();
                for (i, (inst, expect)) in self.r.bl_instances.iter().enumerate() {
                    let res = bl_feasibility(inst)?;
                    let valid = res.certificate_valid(&inst.p, tol);
                    let agrees = expect.is_none_or(|e| e == res.feasible);
                    outcome &= valid && agrees;
                    if res.feasible {
                        worst = worst.max(res.residual(&inst.p));
                    }
                    parts.push(format!(
                        "#{i}: {}{}{}",
                        if res.feasible { "feasible" } else { "infeasible" },
                        if valid { "" } else { " (invalid certificate)" },
                        if agrees { "" } else { " (unexpected)" }
                    ));
                }
                Ok(Measured {
                    outcome,
                    rel_error: Some(worst),
                    tolerance: Some(tol),
                    detail: parts.join(", "),
                    ..Default::default()
                })
            }
            CheckName::WeightedIdentity => {
                let (m, f) = self.manifold()?;
                let u = self.r.weight.as_ref().ok_or_else(|| Error::WrongScenario("no plane weight".into()))?;
                let w = weighted_identity_check(m, f, u, &self.r.quadrature, &self.r.transversality)?;
                let tol = self.tol(ToleranceKey::WeightedIdentity);
                Ok(Measured {
                    outcome: w.rel_error <= tol,
                    lhs: finite(w.lhs),
                    rhs: finite(w.rhs),
                    rel_error: finite(w.rel_error),
                    tolerance: Some(tol),
                    margin: finite(w.margin),
                    tail_bound: finite(w.tail_bound),
                    detail: format!("{} atoms{}", u.atoms().len(), budget_note(w.budget_ok)),
                })
            }
            CheckName::GtViolation => {
                let s = self.scan()?;
                let max = s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = s.values.iter().copied().fold(f64::INFINITY, f64::min);
                Ok(Measured {
                    outcome: s.pass,
                    lhs: finite(max),
                    rhs: finite(min),
                    rel_error: finite(s.variation),
                    tolerance: Some(s.variation_floor),
                    margin: finite(s.gt_margin),
                    tail_bound: finite(s.tail_bound),
                    detail: format!(
                        "variation (max - min) / mean must exceed the tolerance; direction {}",
                        fmt_vec(s.direction.as_slice())
                    ),
                })
            }
            CheckName::InterferenceModel => {
                let gap = match &self.scenario.manifold {
                    Some(ManifoldSpec::TwoCaps { heights, curvature, .. }) if *curvature == 0.0 => heights[1] - heights[0],
                    _ => return Err(Error::WrongScenario("the interference model needs flat two_caps".into())),
                };
                let s = self.scan()?;
                let (_, f) = self.manifold()?;
                let norm = f.l2_norm_sq(1, self.r.quadrature.order.max(32), self.r.quadrature.panels.max(4));
                let mut worst: f64 = 0.0;
                // the model is even in the offset, so the sign of the direction is irrelevant
                for (t, v) in s.offsets.iter().zip(&s.values) {
                    let model = 2.0 + 2.0 * (2.0 * PI * t * gap).cos();
                    worst = worst.max((v / norm - model).abs() / 4.0);
                }
                let tol = self.tol(ToleranceKey::InterferenceModel);
                Ok(Measured {
                    outcome: worst <= tol,
                    lhs: s.values.first().map(|v| v / norm).and_then(finite),
                    rhs: Some(4.0),
                    rel_error: finite(worst),
                    tolerance: Some(tol),
                    margin: finite(s.gt_margin),
                    tail_bound: finite(s.tail_bound),
                    detail: format!("values / ‖f‖² against 2 + 2cos(2π s h), h = {gap}; error relative to the peak 4"),
                })
            }
            CheckName::WedgeReconciliation => self.wedge_reconciliation(),
            CheckName::JacobianLemma => self.jacobian_lemma(),
            CheckName::ProductWedge => self.product_wedge(),
        }
    }

    fn random_subspace(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Result<Subspace> {
        let vs: Vec<DVector<f64>> = (0..k).map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))).collect();
        Subspace::new(&vs)
    }

    fn wedge_reconciliation(&self) -> Result<Measured> {
        let s = &self.scenario.sampling;
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let mut worst: f64 = 0.0;
        let mut worst_pair = (f64::NAN, f64::NAN);
        let mut min_wedge = f64::INFINITY;
        let mut rejected = 0usize;
        let mut accepted = 0usize;
        while accepted < s.count {
            if rejected > 100 * s.count.max(1) {
                return Err(Error::InvalidInput(format!("too few pairs with wedge above {}", s.min_wedge)));
            }
            let n = s.dims[accepted % s.dims.len()];
            let k = rng.gen_range(1..n);
            let (v, w) = match (Self::random_subspace(&mut rng, n, k), Self::random_subspace(&mut rng, n, n - k)) {
                (Ok(v), Ok(w)) => (v, w),
                _ => {
                    rejected += 1;
                    continue;
                }
            };
            let wedge = wedge_abs(&v, &w)?;
            if wedge <= s.min_wedge {
                rejected += 1;
                continue;
            }
            let oracle = wedge_gaussian_oracle(&v, &w, s.oracle_order)?;
            let err = (wedge * oracle - 1.0).abs();
            if err > worst || worst_pair.0.is_nan() {
                worst = worst.max(err);
                worst_pair = (wedge, 1.0 / oracle);
            }
            min_wedge = min_wedge.min(wedge);
            accepted += 1;
        }
        let tol = self.tol(ToleranceKey::WedgeReconciliation);
        Ok(Measured {
            outcome: worst <= tol,
            lhs: finite(worst_pair.0),
            rhs: finite(worst_pair.1),
            rel_error: finite(worst),
            tolerance: Some(tol),
            margin: finite(min_wedge),
            detail: format!(
                "{accepted} pairs in dimensions {:?}, {rejected} rejected; worst |wedge × oracle - 1|",
                s.dims
            ),
            ..Default::default()
        })
    }

    fn product_wedge(&self) -> Result<Measured> {
        let s = &self.scenario.sampling;
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed.wrapping_add(1));
        let mut worst: f64 = 0.0;
        let mut worst_pair = (f64::NAN, f64::NAN);
        let mut accepted = 0usize;
        let mut rejected = 0usize;
        while accepted < s.count {
            if rejected > 100 * s.count.max(1) {
                return Err(Error::InvalidInput(format!("too few normal sets with determinant above {}", s.min_wedge)));
            }
            let n = s.dims[accepted % s.dims.len()];
            let normals: Vec<DVector<f64>> = (0..n)
                .map(|_| {
                    let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
                    let len = v.norm();
                    if len > 1e-3 {
                        v / len
                    } else {
                        DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 })
                    }
                })
                .collect();
            let det = nalgebra::DMatrix::from_fn(n, n, |i, j| normals[j][i]).determinant().abs();
            if det <= s.min_wedge {
                rejected += 1;
                continue;
            }
            let (direct, formula) = product_wedge_factor(&normals)?;
            let err = rel(direct, formula);
            if err >= worst {
                worst = err;
                worst_pair = (direct, formula);
            }
            accepted += 1;
        }
        let tol = self.tol(ToleranceKey::ProductWedge);
        Ok(Measured {
            outcome: worst <= tol,
            lhs: finite(worst_pair.0),
            rhs: finite(worst_pair.1),
            rel_error: finite(worst),
            tolerance: Some(tol),
            detail: format!("{accepted} normal sets in dimensions {:?}; |N ∧ π| against n^(-n/2) |det|", s.dims),
            ..Default::default()
        })
    }

    fn jacobian_lemma(&self) -> Result<Measured> {
        let (m, _) = self.manifold()?;
        let plane = self.plane()?;
        let chart = graph_reparametrize(m, plane, &self.r.transversality)?;
        let k = m.dim();
        let inner = chart.proj_box().shrink(0.02);
        let per_axis = (self.scenario.chart_points as f64).powf(1.0 / k as f64).ceil().max(2.0) as usize;
        let graph = chart.induced_manifold(chart.proj_box().clone());
        let tol = self.tol(ToleranceKey::JacobianLemma);
        let fd_tol = self.tol(ToleranceKey::JacobianFd);
        let (mut worst_lemma, mut worst_fd): (f64, f64) = (0.0, 0.0);
        let mut worst_pair = (f64::NAN, f64::NAN);
        let mut count = 0usize;
        for u in inner.grid(per_axis).into_iter().take(self.scenario.chart_points) {
            let point = chart.solve(&u)?;
            let implicit = chart.implicit_jacobian(&point)?;
            let fd = graph.surface_jacobian(&Param::new(u))?;
            let lemma = rel(implicit, point.jacobian);
            if lemma >= worst_lemma {
                worst_lemma = lemma;
                worst_pair = (point.jacobian, implicit);
            }
            worst_fd = worst_fd.max(rel(fd, point.jacobian));
            count += 1;
        }
        Ok(Measured {
            outcome: worst_lemma <= tol && worst_fd <= fd_tol,
            lhs: finite(worst_pair.0),
            rhs: finite(worst_pair.1),
            rel_error: finite(worst_lemma),
            tolerance: Some(tol),
            detail: format!(
                "{count} chart points; 1/|T ∧ π^⊥| against the implicit jacobian, finite differences within {worst_fd:.3e} (tolerance {fd_tol:.0e})"
            ),
            ..Default::default()
        })
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v
        .iter()
        .map(|x| {
            let s = format!("{x:.6}");
            if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
                "0.000000".to_string()
            } else {
                s
            }
        })
        .collect();
    format!("({})", parts.join(", "))
}

/// Runs every check of `scenario` in order.
pub fn run_scenario(scenario: &Scenario) -> std::result::Result<VerificationReport, super::ScenarioError> {
    let resolved = scenario.resolve()?;
    Ok(run_resolved(scenario, &resolved))
}

pub(crate) fn run_resolved(scenario: &Scenario, resolved: &Resolved) -> VerificationReport {
    let mut runner = Runner { scenario, r: resolved, identity: None, scan: None };
    let mut checks = Vec::with_capacity(scenario.checks.len());
    for &check in &scenario.checks {
        let start = Instant::now();
        let result = runner.run(check);
        let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        let expect_fail = scenario.expects_failure(check);
        let record = match result {
            Ok(m) => CheckRecord {
                check,
                expect_fail,
                outcome: m.outcome,
                pass: m.outcome != expect_fail,
                lhs: m.lhs,
                rhs: m.rhs,
                rel_error: m.rel_error,
                tolerance: m.tolerance,
                margin: m.margin,
                tail_bound: m.tail_bound,
                runtime_ms,
                error: None,
                detail: m.detail,
            },
            Err(e) => CheckRecord {
                check,
                expect_fail,
                outcome: false,
                pass: expect_fail,
                lhs: None,
                rhs: None,
                rel_error: None,
                tolerance: None,
                margin: None,
                tail_bound: None,
                runtime_ms,
                error: Some(e.to_string()),
                detail: String::new(),
            },
        };
        checks.push(record);
    }
    let tolerances = super::scenario::all_tolerances(scenario);
    VerificationReport {
        tool: TOOL_NAME.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        schema_version: scenario.schema_version,
        scenario: scenario.name.clone(),
        overall_pass: checks.iter().all(|c| c.pass),
        quadrature: resolved.quadrature.clone(),
        transversality: resolved.transversality.clone(),
        tolerances,
        checks,
    }
}
