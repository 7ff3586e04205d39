//! Projected gradient descent onto a bounded sparsity model.
//!
//! Starting from `θ⁽⁰⁾ = 0`, each iteration takes a gradient step and
//! projects the result back onto `M(C) ∩ {‖θ‖ ≤ r}`:
//!
//! ```text
//! χ⁽ⁱ⁾   = θ⁽ⁱ⁾ - η⁽ⁱ⁾ ∇f(θ⁽ⁱ⁾)
//! θ⁽ⁱ⁺¹⁾ = P_{C,r}[χ⁽ⁱ⁾]
//! ```
//!
//! With restricted Hessian constants `(α, β)` over `C³` and a feasible
//! reference `θ̄`, every step satisfies
//! `‖θ⁽ⁱ⁺¹⁾ - θ̄‖ ≤ 2γ⁽ⁱ⁾ ‖θ⁽ⁱ⁾ - θ̄‖ + 2η⁽ⁱ⁾ ‖∇_Ī f(θ̄)‖`;
//! [`verify_contraction`] checks a recorded trace against it.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::glm::{self, Dataset, GlmFamily};
use crate::model::{SparsityModel, Support};
use crate::projection::{norm, project_bounded, project_unbounded};
use crate::smrh::{contraction_gamma, step_size_optimal};

pub const DEFAULT_MAX_ITERS: usize = 500;
pub const DEFAULT_REL_TOL: f64 = 1e-8;
/// Slack absorbing floating-point accumulation in contraction checks.
pub const CONTRACTION_TOL: f64 = 1e-9;
const FLAT_CURVATURE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum StepPolicy {
    /// `η = 2 / (α + β)` from known curvature constants.
    FixedOptimal { alpha: f64, beta: f64 },
    Fixed { eta: f64 },
    /// `η⁽ⁱ⁾ = ‖Δ‖² / ⟨Δ, ∇²f(θ⁽ⁱ⁾) Δ⟩` along a model-feasible direction.
    Adaptive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub step: StepPolicy,
    pub radius: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Reference point whose distance is recorded at every iterate.
    pub reference: Option<DVector<f64>>,
}

impl SolverConfig {
    pub fn new(step: StepPolicy, radius: f64) -> Self {
        SolverConfig {
            step,
            radius,
            max_iters: DEFAULT_MAX_ITERS,
            rel_tol: DEFAULT_REL_TOL,
            reference: None,
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_reference(mut self, reference: DVector<f64>) -> Self {
        self.reference = Some(reference);
        self
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("rel_tol must be nonnegative, got {}", self.rel_tol)));
        }
        match self.step {
            StepPolicy::Fixed { eta } if !(eta > 0.0 && eta.is_finite()) => {
                return Err(Error::InvalidArgument(format!("step size must be positive, got {eta}")));
            }
            StepPolicy::FixedOptimal { alpha, beta } => {
                step_size_optimal(alpha, beta)?;
            }
            _ => {}
        }
        if let Some(r) = &self.reference {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
        }
        Ok(())
    }
}

/// State at iterate `i` and the step taken from it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub eta: f64,
    /// `f(θ⁽ⁱ⁾)`
    pub objective: f64,
    pub support: Support,
    pub theta_norm: f64,
    /// `‖θ⁽ⁱ⁺¹⁾ - θ⁽ⁱ⁾‖`
    pub step_norm: f64,
    /// `‖θ⁽ⁱ⁾ - θ̄‖` when a reference was configured.
    pub dist_to_ref: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverTrace {
    pub records: Vec<IterationRecord>,
    /// `f` at the returned iterate.
    pub final_objective: f64,
    pub final_support: Support,
    pub final_dist_to_ref: Option<f64>,
    /// Halted on the relative-change rule rather than the iteration cap.
    pub converged: bool,
}

impl SolverTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// `‖θ⁽ⁱ⁾ - θ̄‖` for `i = 0..=iterations()`, if recorded.
    pub fn reference_distances(&self) -> Option<Vec<f64>> {
        let mut out: Vec<f64> = self.records.iter().map(|r| r.dist_to_ref).collect::<Option<_>>()?;
        out.push(self.final_dist_to_ref?);
        Some(out)
    }
}

/// `‖Δ‖² / ⟨Δ, ∇²f(θ) Δ⟩`
pub fn adaptive_step(
    family: &GlmFamily,
    data: &Dataset,
    theta: &DVector<f64>,
    delta: &DVector<f64>,
) -> Result<f64> {
    let dd = delta.dot(delta);
    if !(dd > 0.0) {
        return Err(Error::InvalidArgument("adaptive step direction must be nonzero".into()));
    }
    let q = glm::hessian_bilinear(family, data, theta, delta, delta)? / dd;
    if q <= FLAT_CURVATURE {
        return Err(Error::FlatCurvature(q));
    }
    Ok(1.0 / q)
}

/// Runs the projected gradient iteration from zero.
pub fn fit(
    model: &SparsityModel,
    family: &GlmFamily,
    data: &Dataset,
    config: &SolverConfig,
) -> Result<(DVector<f64>, SolverTrace)> {
    let p = model.ambient_dim();
    if data.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: data.p(),
        });
    }
    config.validate(p)?;
    data.validate_for(family)?;

    let fixed_eta = match config.step {
        StepPolicy::Fixed { eta } => Some(eta),
        StepPolicy::FixedOptimal { alpha, beta } => Some(step_size_optimal(alpha, beta)?),
        StepPolicy::Adaptive => None,
    };
    let dist = |theta: &DVector<f64>| config.reference.as_ref().map(|r| norm(&(theta - r)));

    let mut theta = DVector::zeros(p);
    let mut previous: Option<DVector<f64>> = None;
    let mut last_eta = 1.0;
    let mut records = Vec::new();
    let mut converged = false;

    for iter in 0..config.max_iters {
        let grad = glm::gradient(family, data, &theta)?;
        let eta = match fixed_eta {
            Some(eta) => eta,
            None => {
                let delta = match &previous {
                    Some(prev) if prev != &theta => &theta - prev,
                    _ => project_unbounded(model, &grad)?.vector,
                };
                if delta.iter().all(|v| *v == 0.0) {
                    // zero gradient: the step length is irrelevant
                    last_eta
                } else {
                    adaptive_step(family, data, &theta, &delta)?
                }
            }
        };
        last_eta = eta;

        let chi = &theta - &grad * eta;
        let next = project_bounded(model, config.radius, &chi)?.vector;
        let step_norm = norm(&(&next - &theta));
        let theta_norm = norm(&theta);
        records.push(IterationRecord {
            iter,
            eta,
            objective: glm::loss(family, data, &theta)?,
            support: Support::of_vector(&theta),
            theta_norm,
            step_norm,
            dist_to_ref: dist(&theta),
        });
        previous = Some(std::mem::replace(&mut theta, next));
        if step_norm <= config.rel_tol * theta_norm.max(1.0) {
            converged = true;
            break;
        }
    }

    let trace = SolverTrace {
        final_objective: glm::loss(family, data, &theta)?,
        final_support: Support::of_vector(&theta),
        final_dist_to_ref: dist(&theta),
        records,
        converged,
    };
    Ok((theta, trace))
}

/// `(Ī, ‖∇_Ī f(θ̄)‖)` where `Ī` is the support of the `C²` projection of
/// `∇f(θ̄)`. Support selection does not depend on the radius.
pub fn reference_gradient_term(
    model: &SparsityModel,
    radius: f64,
    family: &GlmFamily,
    data: &Dataset,
    theta_bar: &DVector<f64>,
) -> Result<(Support, f64)> {
    if theta_bar.len() != model.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.ambient_dim(),
            got: theta_bar.len(),
        });
    }
    let s = Support::of_vector(theta_bar);
    if !model.contains(&s) {
        return Err(Error::InfeasibleReference(format!("support {s} is outside the model")));
    }
    let n = norm(theta_bar);
    if n > radius * (1.0 + 1e-12) {
        return Err(Error::InfeasibleReference(format!("norm {n} exceeds radius {radius}")));
    }
    let g = glm::gradient(family, data, theta_bar)?;
    let proj = project_unbounded(&model.expand(2)?, &g)?;
    Ok((proj.support, norm(&proj.vector)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub iter: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionReport {
    pub steps_checked: usize,
    /// Steps breaking the one-step inequality.
    pub violations: Vec<Violation>,
    /// Iterates escaping the cumulative fixed-step envelope.
    pub envelope_violations: Vec<Violation>,
    /// Smallest `rhs - lhs` over all one-step checks, before tolerance.
    pub min_slack: f64,
}

impl ContractionReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty() && self.envelope_violations.is_empty()
    }
}

/// Fixed-step audit: for every step
/// `‖θ⁽ⁱ⁺¹⁾ - θ̄‖ ≤ 2γ‖θ⁽ⁱ⁾ - θ̄‖ + 2η·grad_term`, and for every iterate the
/// unrolled envelope `(2γ)ⁱ‖θ̄‖ + 2η·grad_term·Σ_{j<i} (2γ)ʲ`, each with
/// slack `1e-9`.
pub fn verify_contraction(
    trace: &SolverTrace,
    theta_bar: &DVector<f64>,
    gamma: f64,
    eta: f64,
    grad_term: f64,
) -> Result<ContractionReport> {
    let d = trace.reference_distances().ok_or(Error::MissingReference)?;
    let rate = 2.0 * gamma;
    let offset = 2.0 * eta * grad_term;
    let mut report = one_step_checks(&d, |_| (rate, offset));

    // θ⁽⁰⁾ = 0, so the envelope starts at ‖θ̄‖.
    let mut power = 1.0;
    let mut geometric = 0.0;
    let start = norm(theta_bar);
    for (i, &di) in d.iter().enumerate() {
        let envelope = power * start + offset * geometric;
        if di > envelope + CONTRACTION_TOL {
            report.envelope_violations.push(Violation {
                iter: i,
                lhs: di,
                rhs: envelope,
            });
        }
        geometric += power;
        power *= rate;
    }
    Ok(report)
}

/// Variable-step audit using each recorded `η⁽ⁱ⁾` and its own `γ⁽ⁱ⁾`.
pub fn verify_contraction_per_step(
    trace: &SolverTrace,
    eta_star: f64,
    mu: f64,
    grad_term: f64,
) -> Result<ContractionReport> {
    let d = trace.reference_distances().ok_or(Error::MissingReference)?;
    let etas: Vec<f64> = trace.records.iter().map(|r| r.eta).collect();
    Ok(one_step_checks(&d, |i| {
        (2.0 * contraction_gamma(etas[i], eta_star, mu), 2.0 * etas[i] * grad_term)
    }))
}

fn one_step_checks(d: &[f64], coeffs: impl Fn(usize) -> (f64, f64)) -> ContractionReport {
    let mut violations = Vec::new();
    let mut min_slack = f64::INFINITY;
    for i in 0..d.len() - 1 {
        let (rate, offset) = coeffs(i);
        let rhs = rate * d[i] + offset;
        min_slack = min_slack.min(rhs - d[i + 1]);
        if d[i + 1] > rhs + CONTRACTION_TOL {
            violations.push(Violation {
                iter: i,
                lhs: d[i + 1],
                rhs,
            });
        }
    }
    ContractionReport {
        steps_checked: d.len() - 1,
        violations,
        envelope_violations: Vec::new(),
        min_slack,
    }
}
