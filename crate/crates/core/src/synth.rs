//! Synthetic ground truth, datasets, and the empirical decomposition of the
//! estimation error into statistical and bias terms.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Poisson, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::glm::{Dataset, GlmFamily};
use crate::model::{ModelKind, SparsityModel, Support};
use crate::projection::{norm, project_bounded, rescale_to_ball, serialize_dvector};
use crate::rng;
use crate::smrh::extreme_eigenvalues;
use crate::solver::reference_gradient_term;

/// Largest linear predictor accepted when drawing Poisson responses.
pub const POISSON_RATE_GUARD: f64 = 20.0;
const GENERATOR_ATTEMPTS: usize = 10_000;

/// A model-sparse parameter: `k_active` coordinates of a random generator
/// set to `±magnitude`, then pulled into the radius-`r` ball.
pub fn gen_parameter(
    model: &SparsityModel,
    radius: f64,
    k_active: usize,
    seed: u64,
    magnitude: f64,
) -> Result<DVector<f64>> {
    if !(magnitude > 0.0 && magnitude.is_finite()) {
        return Err(Error::InvalidArgument(format!("magnitude must be positive, got {magnitude}")));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    if k_active == 0 || k_active > model.order() {
        return Err(Error::InvalidArgument(format!(
            "k_active {k_active} must lie in [1, {}]",
            model.order()
        )));
    }
    let mut rng = rng::stream(seed, rng::STREAM_PARAMETER);
    let generator = match model.kind() {
        ModelKind::Explicit { generators } => {
            let eligible: Vec<&Support> = generators.iter().filter(|g| g.len() >= k_active).collect();
            eligible[rng.random_range(0..eligible.len())].clone()
        }
        _ => (0..GENERATOR_ATTEMPTS)
            .map(|_| model.sample_generator(&mut rng))
            .find(|g| g.len() >= k_active)
            .ok_or_else(|| Error::InvalidArgument(format!("no generator with {k_active} coordinates found")))?,
    };
    let mut theta = DVector::zeros(model.ambient_dim());
    let mut picked = sample(&mut rng, generator.len(), k_active).into_vec();
    picked.sort_unstable();
    for pos in picked {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        theta[generator.indices()[pos]] = sign * magnitude;
    }
    Ok(rescale_to_ball(theta, radius).0)
}

/// `n × p` standard Gaussian covariates, each row shrunk onto the ball of
/// radius `covariate_scale` when it falls outside. `f64::INFINITY` leaves
/// rows untouched.
pub fn gen_design(n: usize, p: usize, covariate_scale: f64, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidArgument("design needs n >= 1 and p >= 1".into()));
    }
    if !(covariate_scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "covariate scale must be positive, got {covariate_scale}"
        )));
    }
    let mut rng = rng::stream(seed, rng::STREAM_COVARIATES);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let row = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (row, _) = rescale_to_ball(row, covariate_scale);
        for j in 0..p {
            x[(i, j)] = row[j];
        }
    }
    Ok(x)
}

/// Design with `(1/n) XᵀX ≈ I`: orthonormal columns scaled by `√n`, plus
/// `perturbation` times a Gaussian matrix.
pub fn near_orthogonal_design(n: usize, p: usize, perturbation: f64, seed: u64) -> Result<DMatrix<f64>> {
    if p == 0 || n < p {
        return Err(Error::InvalidArgument(format!("need n >= p >= 1, got n={n}, p={p}")));
    }
    let g = gen_design(n, p, f64::INFINITY, seed)?;
    let q = g.clone().qr().q();
    let noise = gen_design(n, p, f64::INFINITY, seed.wrapping_add(1))?;
    Ok(q * (n as f64).sqrt() + noise * perturbation)
}

/// Responses drawn from the family's conditional distribution at `theta`.
pub fn gen_responses(
    family: &GlmFamily,
    x: &DMatrix<f64>,
    theta_star: &DVector<f64>,
    seed: u64,
) -> Result<DVector<f64>> {
    if theta_star.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: theta_star.len(),
        });
    }
    let mut rng = rng::stream(seed, rng::STREAM_RESPONSES);
    let mut y = DVector::zeros(x.nrows());
    for i in 0..x.nrows() {
        let eta: f64 = (0..x.ncols()).map(|j| x[(i, j)] * theta_star[j]).sum();
        y[i] = match *family {
            GlmFamily::Linear { sigma } => eta + sigma * rng.sample::<f64, _>(StandardNormal),
            GlmFamily::Logistic => {
                let mean = family.psi_prime(eta)?;
                let coin = Bernoulli::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                f64::from(u8::from(coin.sample(&mut rng)))
            }
            GlmFamily::Poisson => {
                if eta.abs() > POISSON_RATE_GUARD {
                    return Err(Error::Overflow {
                        value: eta,
                        limit: POISSON_RATE_GUARD,
                    });
                }
                let counts = Poisson::new(eta.exp()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                counts.sample(&mut rng)
            }
        };
    }
    Ok(y)
}

pub fn gen_dataset(
    family: &GlmFamily,
    theta_star: &DVector<f64>,
    n: usize,
    covariate_scale: f64,
    seed: u64,
) -> Result<Dataset> {
    let x = gen_design(n, theta_star.len(), covariate_scale, seed)?;
    let y = gen_responses(family, &x, theta_star, seed)?;
    Dataset::new(x, y)
}

/// Linear responses with no noise at all, `y = Xθ*`.
pub fn noiseless_linear_dataset(x: DMatrix<f64>, theta_star: &DVector<f64>) -> Result<Dataset> {
    if theta_star.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: theta_star.len(),
        });
    }
    let y = DVector::from_fn(x.nrows(), |i, _| {
        (0..x.ncols()).map(|j| x[(i, j)] * theta_star[j]).sum()
    });
    Dataset::new(x, y)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorDecomposition {
    /// `θ⊥ = P_{C,r}[θ*]`
    #[serde(serialize_with = "serialize_dvector")]
    pub theta_perp: DVector<f64>,
    /// `‖θ⊥ - θ*‖`
    pub delta2: f64,
    /// `(1/n) Σ (ψ'(⟨xᵢ,θ*⟩) - yᵢ)²`
    pub sigma_stat_hat: f64,
    /// `(1/n) Σ (ψ'(⟨xᵢ,θ⊥⟩) - ψ'(⟨xᵢ,θ*⟩))²`
    pub delta1_hat: f64,
    /// Largest `‖X_S‖_op` over the examined supports of `C²`, with
    /// `X = [x₁ … xₙ]/√n`.
    pub w_hat: f64,
    /// False when `C²` was too large to enumerate and `w_hat` comes from
    /// sampled supports.
    pub w_hat_certified: bool,
    /// `T`, the support of the `C²` projection of `∇f(θ⊥)`.
    pub grad_support: Support,
    /// `‖∇_T f(θ⊥)‖`
    pub grad_term: f64,
    /// `‖z‖` with `zᵢ = (ψ'(⟨xᵢ,θ⊥⟩) - yᵢ)/√n`
    pub z_norm: f64,
    /// `grad_term ≤ w_hat·‖z‖ + 1e-10`
    pub operator_bound_holds: bool,
}

impl ErrorDecomposition {
    /// Error envelope after `iter` fixed steps with contraction `2γ < 1`:
    /// `(2γ)ⁱ‖θ⊥‖ + 2ηW/(1-2γ)·(σ̂² + δ̂₁) + δ₂`. Built from empirical
    /// quantities, so it is reported rather than guaranteed.
    pub fn error_bound(&self, gamma: f64, eta: f64, iter: i32) -> f64 {
        let rate = 2.0 * gamma;
        rate.powi(iter) * norm(&self.theta_perp)
            + 2.0 * eta * self.w_hat / (1.0 - rate) * (self.sigma_stat_hat + self.delta1_hat)
            + self.delta2
    }
}

fn operator_norm(data: &Dataset, s: &Support) -> Result<f64> {
    if s.is_empty() {
        return Ok(0.0);
    }
    let gram = data.weighted_gram(s, &vec![1.0; data.n()]);
    Ok(extreme_eigenvalues(&gram)?.1.max(0.0).sqrt())
}

/// Empirical error decomposition at the truth `theta_star`. `W` is maximised
/// over every generator of `C²` when there are at most `cap` of them,
/// otherwise over `cap` sampled generators plus `T`.
pub fn error_decomposition(
    model: &SparsityModel,
    radius: f64,
    family: &GlmFamily,
    data: &Dataset,
    theta_star: &DVector<f64>,
    cap: usize,
) -> Result<ErrorDecomposition> {
    if theta_star.len() != model.ambient_dim() || data.p() != model.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.ambient_dim(),
            got: if theta_star.len() != model.ambient_dim() { theta_star.len() } else { data.p() },
        });
    }
    data.validate_for(family)?;
    let theta_perp = project_bounded(model, radius, theta_star)?.vector;
    let delta2 = norm(&(&theta_perp - theta_star));

    let eta_star = data.predictors(theta_star)?;
    let eta_perp = data.predictors(&theta_perp)?;
    let n = data.n() as f64;
    let (mut stat, mut bias, mut z2) = (0.0, 0.0, 0.0);
    for i in 0..data.n() {
        let mean_star = family.psi_prime(eta_star[i])?;
        let mean_perp = family.psi_prime(eta_perp[i])?;
        let y = data.y()[i];
        stat += (mean_star - y) * (mean_star - y);
        bias += (mean_perp - mean_star) * (mean_perp - mean_star);
        z2 += (mean_perp - y) * (mean_perp - y);
    }
    let (sigma_stat_hat, delta1_hat, z_norm) = (stat / n, bias / n, (z2 / n).sqrt());

    let (grad_support, grad_term) = reference_gradient_term(model, radius, family, data, &theta_perp)?;

    let c2 = model.expand(2)?;
    let (supports, certified) = match c2.enumerate_supports(cap) {
        Ok(all) => (all, true),
        Err(Error::EnumerationBudget { .. }) => {
            let mut rng = rng::stream(0, rng::STREAM_PROBE);
            let mut sampled: Vec<Support> = (0..cap).map(|_| c2.sample_generator(&mut rng)).collect();
            sampled.push(grad_support.clone());
            (sampled, false)
        }
        Err(e) => return Err(e),
    };
    let mut w_hat: f64 = 0.0;
    for s in &supports {
        w_hat = w_hat.max(operator_norm(data, s)?);
    }

    Ok(ErrorDecomposition {
        theta_perp,
        delta2,
        sigma_stat_hat,
        delta1_hat,
        w_hat,
        w_hat_certified: certified,
        operator_bound_holds: grad_term <= w_hat * z_norm + 1e-10,
        grad_support,
        grad_term,
        z_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_construction() {
        let m = SparsityModel::plain_k(8, 3).unwrap();
        let t = gen_parameter(&m, 10.0, 3, 4, 1.0).unwrap();
        assert!(m.contains(&Support::of_vector(&t)));
        assert_eq!(Support::of_vector(&t).len(), 3);
        assert!((norm(&t) - 3f64.sqrt()).abs() < 1e-15);
        assert!(t.iter().all(|v| *v == 0.0 || v.abs() == 1.0));

        let t1 = gen_parameter(&m, 1.0, 3, 4, 1.0).unwrap();
        assert!((norm(&t1) - 1.0).abs() <= 1e-15 && norm(&t1) <= 1.0);
        assert_eq!(gen_parameter(&m, 1.0, 3, 4, 1.0).unwrap(), t1);
        assert_ne!(gen_parameter(&m, 1.0, 3, 5, 1.0).unwrap(), t1);

        assert!(gen_parameter(&m, 1.0, 4, 4, 1.0).is_err());
        assert!(gen_parameter(&m, 1.0, 0, 4, 1.0).is_err());
        assert!(gen_parameter(&m, 1.0, 2, 4, 0.0).is_err());
    }

    #[test]
    fn parameter_on_structured_models() {
        let e = SparsityModel::canonicalize_family(6, vec![vec![0], vec![1, 2, 3], vec![4, 5]]).unwrap();
        for seed in 0..20 {
            let t = gen_parameter(&e, 5.0, 3, seed, 0.5).unwrap();
            assert_eq!(Support::of_vector(&t).indices(), &[1, 2, 3]);
        }
        let g = SparsityModel::disjoint_groups(6, vec![vec![0, 1], vec![2, 3, 4], vec![5]], 1).unwrap();
        for seed in 0..20 {
            let t = gen_parameter(&g, 5.0, 2, seed, 0.5).unwrap();
            assert!(g.contains(&Support::of_vector(&t)));
        }
    }

    #[test]
    fn design_rows_respect_scale() {
        let x = gen_design(200, 7, 1.0, 3).unwrap();
        for i in 0..200 {
            assert!(norm(&x.row(i).transpose()) <= 1.0);
        }
        assert_eq!(x, gen_design(200, 7, 1.0, 3).unwrap());
        assert!(gen_design(2, 2, 0.0, 1).is_err());
    }

    #[test]
    fn logistic_coin_flips_at_zero() {
        let d = gen_dataset(&GlmFamily::Logistic, &DVector::zeros(4), 10_000, 1.0, 8).unwrap();
        let mean = d.y().mean();
        // 5 binomial standard deviations
        assert!((mean - 0.5).abs() <= 5.0 * (0.25f64 / 10_000.0).sqrt(), "mean {mean}");
    }

    #[test]
    fn linear_noise_vanishes_with_sigma() {
        let theta = DVector::from_vec(vec![1.0, -2.0, 0.0]);
        let d = gen_dataset(&GlmFamily::Linear { sigma: 1e-300 }, &theta, 50, 1.0, 2).unwrap();
        let clean = d.x() * &theta;
        assert!((d.y() - clean).amax() < 1e-290);
        let exact = noiseless_linear_dataset(d.x().clone(), &theta).unwrap();
        for i in 0..50 {
            assert_eq!(exact.y()[i], exact.row_dot(i, &theta));
        }
    }

    #[test]
    fn poisson_responses() {
        let theta = DVector::from_vec(vec![0.5, -0.3]);
        let d = gen_dataset(&GlmFamily::Poisson, &theta, 300, 1.0, 1).unwrap();
        d.validate_for(&GlmFamily::Poisson).unwrap();
        let big = DVector::from_vec(vec![30.0, 0.0]);
        assert!(matches!(
            gen_dataset(&GlmFamily::Poisson, &big, 300, f64::INFINITY, 1),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn near_orthogonal_gram() {
        let x = near_orthogonal_design(80, 8, 0.0, 5).unwrap();
        let gram = x.transpose() * &x / 80.0;
        assert!((gram - DMatrix::identity(8, 8)).amax() < 1e-12);
        assert!(near_orthogonal_design(4, 8, 0.1, 5).is_err());
    }

    #[test]
    fn feasible_truth_has_no_bias() {
        let m = SparsityModel::plain_k(6, 2).unwrap();
        let theta = gen_parameter(&m, 1.0, 2, 3, 0.6).unwrap();
        let d = gen_dataset(&GlmFamily::Logistic, &theta, 150, 1.0, 3).unwrap();
        let dec = error_decomposition(&m, 1.0, &GlmFamily::Logistic, &d, &theta, 1000).unwrap();
        assert_eq!(dec.theta_perp, theta);
        assert_eq!(dec.delta1_hat, 0.0);
        assert_eq!(dec.delta2, 0.0);
        assert!(dec.w_hat_certified);
        assert!(dec.operator_bound_holds);

        let x = gen_design(40, 6, 1.0, 9).unwrap();
        let lin = noiseless_linear_dataset(x, &theta).unwrap();
        let dec = error_decomposition(&m, 1.0, &GlmFamily::Linear { sigma: 1.0 }, &lin, &theta, 1000).unwrap();
        assert_eq!(dec.sigma_stat_hat, 0.0);
        assert!(dec.grad_term < 1e-15);
    }

    #[test]
    fn infeasible_truth_is_projected() {
        let m = SparsityModel::plain_k(5, 1).unwrap();
        let theta = DVector::from_vec(vec![0.0, 2.0, 0.0, -0.5, 0.0]);
        let d = gen_dataset(&GlmFamily::Logistic, &theta, 100, 1.0, 4).unwrap();
        let dec = error_decomposition(&m, 1.0, &GlmFamily::Logistic, &d, &theta, 1000).unwrap();
        assert_eq!(dec.theta_perp, project_bounded(&m, 1.0, &theta).unwrap().vector);
        assert_eq!(dec.theta_perp, DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0, 0.0]));
        assert!((dec.delta2 - (1.0f64 + 0.25).sqrt()).abs() < 1e-15);
        assert!(dec.delta1_hat > 0.0);
        assert!(dec.operator_bound_holds);
        assert!(dec.error_bound(0.25, 1.0, 3) >= dec.delta2);
    }

    #[test]
    fn sampled_operator_norm_when_enumeration_is_too_large() {
        let m = SparsityModel::plain_k(12, 2).unwrap();
        let theta = gen_parameter(&m, 1.0, 2, 3, 0.6).unwrap();
        let d = gen_dataset(&GlmFamily::Logistic, &theta, 100, 1.0, 3).unwrap();
        let dec = error_decomposition(&m, 1.0, &GlmFamily::Logistic, &d, &theta, 10).unwrap();
        assert!(!dec.w_hat_certified);
        assert!(dec.operator_bound_holds);
    }
}
