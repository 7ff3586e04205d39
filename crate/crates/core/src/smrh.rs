//! Restricted Hessian constants over `M(C³)`, step sizes and contraction
//! factors.
//!
//! The analytic route sandwiches every restricted Hessian between curvature
//! envelope weighted Gram matrices and takes extreme eigenvalues over the
//! maximal supports of `C³`. Submatrices of a maximal support have spectra
//! inside the parent's (Cauchy interlacing), so maximal supports suffice.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::glm::{self, Dataset, GlmFamily};
use crate::model::{SparsityModel, Support};
use crate::projection::{norm, rescale_to_ball};
use crate::rng;

const JACOBI_MAX_DIM: usize = 256;
const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-12;
/// Lower curvature bounds at or below this are treated as zero.
pub const IDENTIFIABILITY_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "analytic")]
    Analytic,
    #[serde(rename = "empirical (non-certified)")]
    Empirical,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmrhEstimate {
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub radius: f64,
    pub method: Method,
    pub supports_examined: usize,
}

impl SmrhEstimate {
    pub fn eta_star(&self) -> f64 {
        2.0 / (self.alpha + self.beta)
    }

    /// `γ` at the optimal step, `(μ - 1)/(μ + 1)`.
    pub fn gamma_at_eta_star(&self) -> f64 {
        contraction_gamma(self.eta_star(), self.eta_star(), self.mu)
    }
}

/// All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi
/// rotations until the off-diagonal Frobenius norm drops to `1e-12` times
/// the matrix norm.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::InvalidArgument(format!("matrix is {}x{}, not square", n, m.ncols())));
    }
    if n == 0 || n > JACOBI_MAX_DIM {
        return Err(Error::InvalidArgument(format!(
            "eigensolver supports dimensions 1..={JACOBI_MAX_DIM}, got {n}"
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix entry".into()));
    }
    let scale = m.amax().max(1.0);
    for i in 0..n {
        for j in 0..i {
            let gap = (m[(i, j)] - m[(j, i)]).abs();
            if gap > SYMMETRY_TOL * scale {
                return Err(Error::NotSymmetric { i, j, gap });
            }
        }
    }

    // Work on the symmetrised copy.
    let mut a = (m + m.transpose()) * 0.5;
    let total = a.norm();
    let target = JACOBI_TOL * total;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = off_diagonal_norm(&a);
        if off <= target || off == 0.0 {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, p, q);
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// One symmetric Schur rotation zeroing `a[(p, q)]`.
fn rotate(a: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
}

/// `(λ_min, λ_max)` of a symmetric matrix.
pub fn extreme_eigenvalues(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    let eig = symmetric_eigenvalues(m)?;
    Ok((eig[0], eig[eig.len() - 1]))
}

fn check_setup(model: &SparsityModel, data: &Dataset, family: &GlmFamily, radius: f64) -> Result<()> {
    if model.ambient_dim() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: model.ambient_dim(),
            got: data.p(),
        });
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    data.validate_for(family)
}

/// Certified `(α, β)` over the maximal supports of `C³`.
///
/// For each support `S`, `β_S` is the smallest eigenvalue of the
/// `d_{ψ,r}(‖xᵢ|_S‖)`-weighted Gram matrix and `α_S` the largest of the
/// `D_{ψ,r}`-weighted one. Fails with [`Error::EnumerationBudget`] when `C³`
/// has more than `cap` generators; use [`empirical_smrh_probe`] then.
pub fn analytic_smrh_bounds(
    model: &SparsityModel,
    data: &Dataset,
    family: &GlmFamily,
    radius: f64,
    cap: usize,
) -> Result<SmrhEstimate> {
    check_setup(model, data, family, radius)?;
    let supports = model.expand(3)?.enumerate_supports(cap)?;
    let mut alpha = f64::NEG_INFINITY;
    let mut beta = f64::INFINITY;
    let mut lower_w = vec![0.0; data.n()];
    let mut upper_w = vec![0.0; data.n()];
    for s in &supports {
        for i in 0..data.n() {
            let (d, dd) = family.curvature_bounds(radius, data.restricted_row_norm(i, s))?;
            lower_w[i] = d;
            upper_w[i] = dd;
        }
        let (lo, _) = extreme_eigenvalues(&data.weighted_gram(s, &lower_w))?;
        let (_, hi) = extreme_eigenvalues(&data.weighted_gram(s, &upper_w))?;
        beta = beta.min(lo);
        alpha = alpha.max(hi);
    }
    if beta <= IDENTIFIABILITY_FLOOR {
        return Err(Error::NotIdentifiable { beta });
    }
    Ok(SmrhEstimate {
        alpha,
        beta,
        mu: alpha / beta,
        radius,
        method: Method::Analytic,
        supports_examined: supports.len(),
    })
}

/// Rayleigh quotients `⟨Δ, ∇²f(θ) Δ⟩ / ‖Δ‖²` at random `(θ, Δ)` sharing a
/// random generator of `C³`, with `θ` uniform in the radius-`r` ball on
/// that generator and `Δ` Gaussian on it.
pub fn probe_quotients(
    model: &SparsityModel,
    data: &Dataset,
    family: &GlmFamily,
    radius: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_setup(model, data, family, radius)?;
    let c3 = model.expand(3)?;
    let mut rng = rng::stream(seed, rng::STREAM_PROBE);
    let p = data.p();
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let s = c3.sample_generator(&mut rng);
        let theta = uniform_in_ball(&s, p, radius, &mut rng);
        let delta = gaussian_on(&s, p, &mut rng);
        let q = glm::hessian_bilinear(family, data, &theta, &delta, &delta)?;
        out.push(q / delta.dot(&delta));
    }
    Ok(out)
}

/// Minimum and maximum of [`probe_quotients`]. These are sampled extremes,
/// not certified bounds.
pub fn empirical_smrh_probe(
    model: &SparsityModel,
    data: &Dataset,
    family: &GlmFamily,
    radius: f64,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::InvalidArgument("probe needs at least one trial".into()));
    }
    let q = probe_quotients(model, data, family, radius, trials, seed)?;
    let lo = q.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

impl SmrhEstimate {
    /// Labels sampled extremes as an empirical estimate.
    pub fn from_probe(q_min: f64, q_max: f64, radius: f64, trials: usize) -> Result<Self> {
        if q_min <= IDENTIFIABILITY_FLOOR {
            return Err(Error::NotIdentifiable { beta: q_min });
        }
        Ok(SmrhEstimate {
            alpha: q_max,
            beta: q_min,
            mu: q_max / q_min,
            radius,
            method: Method::Empirical,
            supports_examined: trials,
        })
    }
}

pub(crate) fn gaussian_on<R: Rng + ?Sized>(s: &Support, p: usize, rng: &mut R) -> DVector<f64> {
    let mut v = DVector::zeros(p);
    for &i in s.indices() {
        v[i] = rng.sample(StandardNormal);
    }
    v
}

pub(crate) fn uniform_in_ball<R: Rng + ?Sized>(
    s: &Support,
    p: usize,
    radius: f64,
    rng: &mut R,
) -> DVector<f64> {
    let dir = gaussian_on(s, p, rng);
    let n = norm(&dir);
    if n == 0.0 {
        return dir;
    }
    let u: f64 = rng.random();
    let len = radius * u.powf(1.0 / s.len() as f64);
    rescale_to_ball(dir * (len / n), radius).0
}

/// `η* = 2 / (α + β)`
pub fn step_size_optimal(alpha: f64, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= alpha && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "optimal step needs 0 < beta <= alpha, got alpha={alpha}, beta={beta}"
        )));
    }
    Ok(2.0 / (alpha + beta))
}

/// `γ = (η/η*)(μ-1)/(μ+1) + |η/η* - 1|`; the iteration contracts by `2γ`.
pub fn contraction_gamma(eta: f64, eta_star: f64, mu: f64) -> f64 {
    let ratio = eta / eta_star;
    ratio * (mu - 1.0) / (mu + 1.0) + (ratio - 1.0).abs()
}

/// Right-hand side factor of the bilinear perturbation inequality
/// `|⟨u,v⟩ - η⟨u,∇²f(θ)v⟩| ≤ (η(α-β)/2 + |η(α+β)/2 - 1|)‖u‖‖v‖`.
pub fn basic_inequality_bound(eta: f64, alpha: f64, beta: f64) -> f64 {
    eta * (alpha - beta) / 2.0 + (eta * (alpha + beta) / 2.0 - 1.0).abs()
}
