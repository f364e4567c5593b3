//! Quadratic forms of the selection loss.
//!
//! With feature rows `x_i` and relevance scores `s_i`:
//!
//! ```text
//! P = diag(‖x_i‖²)      Q = X Xᵀ      R = diag(s_i²)
//! L(Z) = λ1·ZᵀPZ − Zᵀ(λ1·Q + λ2·R)Z
//!      = λ1·Zᵀ(P − Q)Z − λ2·ZᵀRZ
//! ```
//!
//! Both `ZᵀPZ` and `Zᵀ(λ1·Q + λ2·R)Z` are convex, which is what the CCCP
//! solver relies on.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;
use crate::query::DistanceVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
        }
    }
}

impl LossParams {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        let p = Self { lambda1, lambda2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.lambda1) || !ok(self.lambda2) {
            return Err(Error::Config(format!(
                "lambdas must be finite and nonnegative, got λ1={} λ2={}",
                self.lambda1, self.lambda2
            )));
        }
        if self.lambda1 == 0.0 && self.lambda2 == 0.0 {
            return Err(Error::Config("λ1 and λ2 cannot both be zero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveMatrices {
    p: Vec<f64>,
    q: DMatrix<f64>,
    r: Vec<f64>,
}

impl ObjectiveMatrices {
    /// Assembles the matrices directly, e.g. from a raw feature matrix that
    /// did not come out of the ingest pipeline.
    pub fn from_features(x: &DMatrix<f64>, s: &[f64]) -> Result<Self> {
        if x.nrows() != s.len() {
            return Err(Error::Input(format!(
                "{} feature rows but {} relevance scores",
                x.nrows(),
                s.len()
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::Input("empty feature matrix".into()));
        }
        if x.iter().chain(s).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite feature or score".into()));
        }
        let mut q = x * x.transpose();
        // Mirror the upper triangle so Q is exactly symmetric.
        for i in 0..q.nrows() {
            for j in 0..i {
                q[(i, j)] = q[(j, i)];
            }
        }
        let p = q.diagonal().iter().copied().collect();
        let r = s.iter().map(|v| v * v).collect();
        Ok(Self { p, q, r })
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn p_diag(&self) -> &[f64] {
        &self.p
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r_diag(&self) -> &[f64] {
        &self.r
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.n() {
            return Err(Error::Dimension(format!(
                "selection vector has {} entries, expected {}",
                z.len(),
                self.n()
            )));
        }
        Ok(())
    }

    /// `ZᵀPZ`
    pub fn p_form(&self, z: &[f64]) -> Result<f64> {
        self.check(z)?;
        Ok(self.p.iter().zip(z).map(|(p, z)| p * z * z).sum())
    }

    /// `ZᵀQZ`
    pub fn q_form(&self, z: &[f64]) -> Result<f64> {
        self.check(z)?;
        let zv = DVector::from_column_slice(z);
        Ok(zv.dot(&(&self.q * &zv)))
    }

    /// `Q·Z`
    pub fn q_apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        let zv = DVector::from_column_slice(z);
        Ok((&self.q * &zv).as_slice().to_vec())
    }
}

pub fn build_matrices(x: &FeatureMatrix, dv: &DistanceVector) -> Result<ObjectiveMatrices> {
    if x.n() != dv.len() {
        return Err(Error::Input(format!(
            "{} shots in the feature matrix but {} distances",
            x.n(),
            dv.len()
        )));
    }
    ObjectiveMatrices::from_features(&x.to_dmatrix(), &dv.s)
}

/// `Zᵀ(P − Q)Z`
pub fn summary_variance_trace(m: &ObjectiveMatrices, z: &[f64]) -> Result<f64> {
    Ok(m.p_form(z)? - m.q_form(z)?)
}

/// `ZᵀRZ = Σ z_i² s_i²`
pub fn query_trace(m: &ObjectiveMatrices, z: &[f64]) -> Result<f64> {
    m.check(z)?;
    Ok(m.r.iter().zip(z).map(|(r, z)| r * z * z).sum())
}

pub fn loss(m: &ObjectiveMatrices, params: LossParams, z: &[f64]) -> Result<f64> {
    let p = m.p_form(z)?;
    let q = m.q_form(z)?;
    let r = query_trace(m, z)?;
    Ok(params.lambda1 * p - (params.lambda1 * q + params.lambda2 * r))
}
