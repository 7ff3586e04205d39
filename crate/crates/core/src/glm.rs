//! Canonical GLM losses: log-partition functions, the averaged negative
//! log-likelihood, its gradient and restricted Hessians.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Support;

/// Linear predictors beyond this magnitude make `exp` overflow.
pub const POISSON_GUARD: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GlmFamily {
    /// `ψ(t) = t² / 2σ²`
    Linear { sigma: f64 },
    /// `ψ(t) = log(1 + eᵗ)`, responses in {0, 1}
    Logistic,
    /// `ψ(t) = eᵗ`, responses in ℕ
    Poisson,
}

impl GlmFamily {
    pub fn linear(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        Ok(GlmFamily::Linear { sigma })
    }

    pub fn name(&self) -> &'static str {
        match self {
            GlmFamily::Linear { .. } => "linear",
            GlmFamily::Logistic => "logistic",
            GlmFamily::Poisson => "poisson",
        }
    }

    fn check(&self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::NonFinite(format!("linear predictor {t}")));
        }
        if matches!(self, GlmFamily::Poisson) && t.abs() > POISSON_GUARD {
            return Err(Error::Overflow {
                value: t,
                limit: POISSON_GUARD,
            });
        }
        Ok(())
    }

    pub fn psi(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(match *self {
            GlmFamily::Linear { sigma } => t * t / (2.0 * sigma * sigma),
            GlmFamily::Logistic => t.max(0.0) + (-t.abs()).exp().ln_1p(),
            GlmFamily::Poisson => t.exp(),
        })
    }

    pub fn psi_prime(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(match *self {
            GlmFamily::Linear { sigma } => t / (sigma * sigma),
            GlmFamily::Logistic => {
                if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                }
            }
            GlmFamily::Poisson => t.exp(),
        })
    }

    pub fn psi_second(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(match *self {
            GlmFamily::Linear { sigma } => 1.0 / (sigma * sigma),
            GlmFamily::Logistic => {
                let e = (-t.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            GlmFamily::Poisson => t.exp(),
        })
    }

    /// `(d, D)`: the minimum and maximum of `ψ''(tu)` over `t ∈ [-r, r]`.
    pub fn curvature_bounds(&self, r: f64, u: f64) -> Result<(f64, f64)> {
        if !(r > 0.0) || !(u >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "curvature bounds need r > 0 and u >= 0, got r={r}, u={u}"
            )));
        }
        Ok(match *self {
            GlmFamily::Linear { sigma } => {
                let c = 1.0 / (sigma * sigma);
                (c, c)
            }
            GlmFamily::Logistic => {
                let sech = 1.0 / (r * u / 2.0).cosh();
                (0.25 * sech * sech, 0.25)
            }
            GlmFamily::Poisson => ((-r * u).exp(), (r * u).exp()),
        })
    }

    fn response_ok(&self, y: f64) -> bool {
        match self {
            GlmFamily::Linear { .. } => y.is_finite(),
            GlmFamily::Logistic => y == 0.0 || y == 1.0,
            GlmFamily::Poisson => y >= 0.0 && y.is_finite() && y.fract() == 0.0,
        }
    }
}

/// `n` covariate rows `xᵢ ∈ ℝᵖ` with responses `yᵢ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidArgument("dataset needs n >= 1 rows and p >= 1 columns".into()));
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset entry".into()));
        }
        Ok(Dataset { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn validate_for(&self, family: &GlmFamily) -> Result<()> {
        match self.y.iter().position(|&v| !family.response_ok(v)) {
            Some(row) => Err(Error::InvalidResponse {
                row,
                value: self.y[row],
                family: family.name(),
            }),
            None => Ok(()),
        }
    }

    /// `⟨xᵢ, v⟩`, accumulated in column order.
    pub fn row_dot(&self, i: usize, v: &DVector<f64>) -> f64 {
        (0..self.p()).map(|j| self.x[(i, j)] * v[j]).sum()
    }

    /// Linear predictors `⟨xᵢ, θ⟩` for every row.
    pub fn predictors(&self, theta: &DVector<f64>) -> Result<Vec<f64>> {
        if theta.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                got: theta.len(),
            });
        }
        Ok((0..self.n()).map(|i| self.row_dot(i, theta)).collect())
    }

    /// Euclidean norm of row `i` restricted to `s`.
    pub fn restricted_row_norm(&self, i: usize, s: &Support) -> f64 {
        s.indices()
            .iter()
            .map(|&j| self.x[(i, j)] * self.x[(i, j)])
            .sum::<f64>()
            .sqrt()
    }

    /// `(1/n) Σᵢ wᵢ xᵢ|_S xᵢ|_Sᵀ`
    pub fn weighted_gram(&self, s: &Support, weights: &[f64]) -> DMatrix<f64> {
        let idx = s.indices();
        let m = idx.len();
        let mut g = DMatrix::zeros(m, m);
        for (i, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for a in 0..m {
                let xa = w * self.x[(i, idx[a])];
                for b in 0..=a {
                    g[(a, b)] += xa * self.x[(i, idx[b])];
                }
            }
        }
        let inv_n = 1.0 / self.n() as f64;
        for a in 0..m {
            for b in 0..=a {
                g[(a, b)] *= inv_n;
                g[(b, a)] = g[(a, b)];
            }
        }
        g
    }
}

fn prepare(family: &GlmFamily, data: &Dataset, theta: &DVector<f64>) -> Result<Vec<f64>> {
    data.validate_for(family)?;
    data.predictors(theta)
}

/// `f(θ) = (1/n) Σᵢ ψ(⟨xᵢ,θ⟩) - yᵢ⟨xᵢ,θ⟩`
pub fn loss(family: &GlmFamily, data: &Dataset, theta: &DVector<f64>) -> Result<f64> {
    let eta = prepare(family, data, theta)?;
    let mut acc = 0.0;
    for (i, &t) in eta.iter().enumerate() {
        acc += family.psi(t)? - data.y[i] * t;
    }
    Ok(acc / data.n() as f64)
}

/// `∇f(θ) = (1/n) Σᵢ (ψ'(⟨xᵢ,θ⟩) - yᵢ) xᵢ`
pub fn gradient(family: &GlmFamily, data: &Dataset, theta: &DVector<f64>) -> Result<DVector<f64>> {
    let eta = prepare(family, data, theta)?;
    let mut g = DVector::zeros(data.p());
    for (i, &t) in eta.iter().enumerate() {
        let residual = family.psi_prime(t)? - data.y[i];
        if residual == 0.0 {
            continue;
        }
        for j in 0..data.p() {
            g[j] += residual * data.x[(i, j)];
        }
    }
    Ok(g / data.n() as f64)
}

/// Curvature weights `ψ''(⟨xᵢ,θ⟩)`.
pub fn curvature_weights(family: &GlmFamily, data: &Dataset, theta: &DVector<f64>) -> Result<Vec<f64>> {
    prepare(family, data, theta)?
        .into_iter()
        .map(|t| family.psi_second(t))
        .collect()
}

/// `∇²_S f(θ) = (1/n) Σᵢ ψ''(⟨xᵢ,θ⟩) xᵢ|_S xᵢ|_Sᵀ`
pub fn restricted_hessian(
    family: &GlmFamily,
    data: &Dataset,
    theta: &DVector<f64>,
    s: &Support,
) -> Result<DMatrix<f64>> {
    if let Some(&index) = s.indices().iter().find(|&&j| j >= data.p()) {
        return Err(Error::IndexOutOfRange { index, dim: data.p() });
    }
    let w = curvature_weights(family, data, theta)?;
    Ok(data.weighted_gram(s, &w))
}

/// `⟨u, ∇²f(θ) v⟩` without forming the Hessian.
pub fn hessian_bilinear(
    family: &GlmFamily,
    data: &Dataset,
    theta: &DVector<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<f64> {
    for w in [u, v] {
        if w.len() != data.p() {
            return Err(Error::DimensionMismatch {
                expected: data.p(),
                got: w.len(),
            });
        }
    }
    let weights = curvature_weights(family, data, theta)?;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w * data.row_dot(i, u) * data.row_dot(i, v);
    }
    Ok(acc / data.n() as f64)
}
