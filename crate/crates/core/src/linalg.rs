//! Incrementally maintained weighted ridge regression state.
//!
//! [`WeightedDesignState`] tracks the weighted design matrix
//!
//! ```text
//! Σ = λ·I + Σᵢ wᵢ·xᵢxᵢᵀ
//! ```
//!
//! together with its inverse, the response vector b = Σᵢ wᵢ·xᵢ·rᵢ, the ridge
//! estimate θ̂ = Σ⁻¹b, and log det Σ. Each rank-1 update costs O(d²): the
//! inverse is advanced with the Sherman–Morrison identity and the
//! log-determinant with log(1 + w·xᵀΣ⁻¹x). A full dense re-inversion runs
//! every `refresh_interval` updates to bound floating-point drift.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Updates between dense re-inversions of the covariance matrix.
pub const DEFAULT_REFRESH_INTERVAL: usize = 512;

/// Weighted ridge-regression sufficient statistics with a maintained inverse.
#[derive(Debug, Clone)]
pub struct WeightedDesignState {
    dim: usize,
    lambda: f64,
    cov: DMatrix<f64>,
    cov_inv: DMatrix<f64>,
    response: DVector<f64>,
    theta_hat: DVector<f64>,
    num_updates: usize,
    logdet: f64,
    refresh_interval: usize,
}

impl WeightedDesignState {
    /// Fresh state: Σ = λI, b = 0, θ̂ = 0, log det Σ = d·log λ.
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        Self::with_refresh_interval(dim, lambda, DEFAULT_REFRESH_INTERVAL)
    }

    /// As [`new`](Self::new) with an explicit dense-refresh interval.
    pub fn with_refresh_interval(dim: usize, lambda: f64, refresh_interval: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::Config(format!(
                "lambda must be a positive finite real, got {lambda}"
            )));
        }
        if refresh_interval == 0 {
            return Err(Error::Config("refresh_interval must be at least 1".into()));
        }
        Ok(Self {
            dim,
            lambda,
            cov: DMatrix::identity(dim, dim) * lambda,
            cov_inv: DMatrix::identity(dim, dim) / lambda,
            response: DVector::zeros(dim),
            theta_hat: DVector::zeros(dim),
            num_updates: 0,
            logdet: dim as f64 * lambda.ln(),
            refresh_interval,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Σ = λI + Σᵢ wᵢ·xᵢxᵢᵀ.
    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Maintained Σ⁻¹.
    pub fn cov_inv(&self) -> &DMatrix<f64> {
        &self.cov_inv
    }

    /// b = Σᵢ wᵢ·xᵢ·rᵢ.
    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    /// θ̂ = Σ⁻¹b.
    pub fn theta_hat(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    pub fn num_updates(&self) -> usize {
        self.num_updates
    }

    /// log det Σ, maintained incrementally.
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    fn check_vector(&self, x: &DVector<f64>, what: &'static str) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what));
        }
        Ok(())
    }

    /// Fold one weighted observation (x, r, w) into the state:
    /// Σ ← Σ + w·xxᵀ, b ← b + w·x·r, with Σ⁻¹, θ̂ and log det Σ kept
    /// consistent. A zero x is a legal no-op on Σ and b.
    pub fn rank_one_update(&mut self, x: &DVector<f64>, r: f64, w: f64) -> Result<()> {
        self.check_vector(x, "action vector")?;
        if !r.is_finite() {
            return Err(Error::NonFinite("reward"));
        }
        if !w.is_finite() || w <= 0.0 || w > 1.0 {
            return Err(Error::InvalidWeight(w));
        }

        // Sherman–Morrison: (Σ + w·xxᵀ)⁻¹ = Σ⁻¹ − w·(Σ⁻¹x)(Σ⁻¹x)ᵀ / (1 + w·xᵀΣ⁻¹x)
        let s = &self.cov_inv * x;
        let quad = x.dot(&s).max(0.0);
        let denom = 1.0 + w * quad;

        for j in 0..self.dim {
            for i in 0..self.dim {
                self.cov[(i, j)] += w * x[i] * x[j];
                self.cov_inv[(i, j)] -= w * s[i] * s[j] / denom;
            }
        }
        symmetrize(&mut self.cov);
        symmetrize(&mut self.cov_inv);

        self.response.axpy(w * r, x, 1.0);
        self.logdet += (w * quad).ln_1p();
        self.num_updates += 1;

        if self.num_updates % self.refresh_interval == 0 {
            self.refresh()?;
        }
        self.theta_hat = &self.cov_inv * &self.response;
        Ok(())
    }

    /// Exploration bonus ‖x‖_{Σ⁻¹} = √(xᵀΣ⁻¹x); lies in [0, ‖x‖₂/√λ].
    pub fn mahalanobis_bonus(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_vector(x, "probe vector")?;
        let quad = x.dot(&(&self.cov_inv * x));
        Ok(quad.max(0.0).sqrt())
    }

    /// Estimation error ‖θ̂ − θ*‖_Σ = √((θ̂−θ*)ᵀΣ(θ̂−θ*)).
    pub fn estimation_error_norm(&self, theta_star: &DVector<f64>) -> Result<f64> {
        self.check_vector(theta_star, "theta_star")?;
        let diff = &self.theta_hat - theta_star;
        let quad = diff.dot(&(&self.cov * &diff));
        Ok(quad.max(0.0).sqrt())
    }

    /// Dense re-inversion and log-determinant recomputation from Σ.
    pub fn refresh(&mut self) -> Result<()> {
        let chol = self
            .cov
            .clone()
            .cholesky()
            .ok_or(Error::Numerical("covariance lost positive definiteness"))?;
        self.logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        self.cov_inv = chol.inverse();
        symmetrize(&mut self.cov_inv);
        self.theta_hat = &self.cov_inv * &self.response;
        Ok(())
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}
