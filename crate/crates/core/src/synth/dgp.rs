use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of the benchmark model; a `d`-dimensional model uses the first `d`.
pub const REFERENCE_BETA: [f64; 8] = [1.0, 2.0, -1.0, 3.0, -0.5, -1.0, 0.3, 1.7];

/// `X ~ N(mu, phi 11' + (1 - phi) I)`, `Y = beta'X + eps`, `eps ~ N(0, noise_sd^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    pub d: usize,
    pub beta: Vec<f64>,
    pub mu: Vec<f64>,
    pub phi: f64,
    pub noise_sd: f64,
}

impl DgpConfig {
    /// Benchmark defaults: all-ones mean, `phi = 0.8`, unit noise, and the
    /// leading `d` reference coefficients (zero-padded past eight).
    pub fn benchmark(d: usize) -> Self {
        let beta = (0..d).map(|j| REFERENCE_BETA.get(j).copied().unwrap_or(0.0)).collect();
        DgpConfig {
            d,
            beta,
            mu: vec![1.0; d],
            phi: 0.8,
            noise_sd: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        if self.beta.len() != self.d || self.mu.len() != self.d {
            return Err(Error::Config(format!(
                "beta ({}) and mu ({}) must both have length d = {}",
                self.beta.len(),
                self.mu.len(),
                self.d
            )));
        }
        if !(0.0..1.0).contains(&self.phi) {
            return Err(Error::Config(format!("phi must lie in [0, 1), got {}", self.phi)));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config(format!("noise_sd must be positive, got {}", self.noise_sd)));
        }
        Ok(())
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.d, self.d, |i, j| if i == j { 1.0 } else { self.phi })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompleteData {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl CompleteData {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Sampler with the covariance factor precomputed.
#[derive(Debug, Clone)]
pub struct GaussianLinear {
    cfg: DgpConfig,
    chol: DMatrix<f64>,
}

impl GaussianLinear {
    pub fn new(cfg: DgpConfig) -> Result<Self> {
        cfg.validate()?;
        let chol = nalgebra::Cholesky::new(cfg.covariance())
            .ok_or_else(|| Error::Config("covariance is not positive definite".into()))?
            .l();
        Ok(GaussianLinear { cfg, chol })
    }

    pub fn config(&self) -> &DgpConfig {
        &self.cfg
    }

    /// One `(x, y)` draw: `d` normals for the covariates, then one for the noise.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, f64) {
        let d = self.cfg.d;
        let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let lz = &self.chol * z;
        let x: Vec<f64> = (0..d).map(|j| self.cfg.mu[j] + lz[j]).collect();
        let eps: f64 = rng.sample(StandardNormal);
        let y = x.iter().zip(&self.cfg.beta).map(|(a, b)| a * b).sum::<f64>() + self.cfg.noise_sd * eps;
        (x, y)
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> CompleteData {
        let mut out = CompleteData {
            x: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
        };
        for _ in 0..n {
            let (x, y) = self.draw(rng);
            out.x.push(x);
            out.y.push(y);
        }
        out
    }
}

pub fn gen_gaussian_linear<R: Rng + ?Sized>(cfg: &DgpConfig, n: usize, rng: &mut R) -> Result<CompleteData> {
    if n == 0 {
        return Err(Error::Config("sample size must be at least 1".into()));
    }
    Ok(GaussianLinear::new(cfg.clone())?.sample(n, rng))
}
