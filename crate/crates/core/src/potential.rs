//! The cotangent force function on the sphere, its gradient, the
//! stationarity multipliers and the residual test for special central
//! configurations.

use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Configuration, PairTable, SINGULAR_TOL};

/// Default bound on the largest gradient norm below which a configuration
/// counts as stationary.
pub const DEFAULT_SCC_TOL: f64 = 1e-9;

/// Positive body masses.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct MassVector(Vec<f64>);

impl MassVector {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidInput("mass vector is empty".into()));
        }
        for (index, &value) in masses.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositiveMass { index, value });
            }
        }
        Ok(Self(masses))
    }

    /// N equal masses of the given value.
    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Rescaled copy with unit total mass.
    pub fn normalized(&self) -> Self {
        let total = self.sum();
        Self(self.0.iter().map(|m| m / total).collect())
    }

    pub fn is_normalized(&self) -> bool {
        (self.sum() - 1.0).abs() <= 1e-12
    }
}

impl std::ops::Index<usize> for MassVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<'de> Deserialize<'de> for MassVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(deserializer)?;
        MassVector::new(raw).map_err(serde::de::Error::custom)
    }
}

/// Stationarity diagnostics for a configuration with masses.
///
/// `gradient_norms` holds ‖F_i‖ per body and drives the verdict;
/// `multiplier_residuals` holds the norms of the equivalent multiplier-form
/// rows Σ_{j≠i} m_i m_j S_ij q_j − θ_i q_i for cross-validation.
#[derive(Debug, Clone, Serialize)]
pub struct SccResidualReport {
    pub gradient_norms: Vec<f64>,
    pub max_norm: f64,
    pub theta: Vec<f64>,
    pub verdict: bool,
    pub tol: f64,
    /// In-memory diagnostic only; the JSON document carries the gradient
    /// fields above.
    #[serde(skip)]
    pub multiplier_residuals: Vec<f64>,
}

fn check_masses(c: &Configuration, m: &MassVector) -> Result<()> {
    if m.len() != c.n_bodies() {
        return Err(Error::InvalidInput(format!(
            "{} masses for {} bodies",
            m.len(),
            c.n_bodies()
        )));
    }
    Ok(())
}

/// Total cotangent interaction U = Σ_{i<j} m_i m_j cot d_ij.
pub fn force_function(c: &Configuration, m: &MassVector) -> Result<f64> {
    check_masses(c, m)?;
    let t = PairTable::build(c)?;
    let n = c.n_bodies();
    let mut u = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            u += m[i] * m[j] * t.cosd[(i, j)] / t.sind[(i, j)];
        }
    }
    Ok(u)
}

/// Pair contribution F_ij = m_i m_j (q_j − cos d_ij q_i) / sin³ d_ij to the
/// gradient at body i. Tangent to the sphere at q_i.
pub fn gradient_term(c: &Configuration, m: &MassVector, i: usize, j: usize) -> Result<DVector<f64>> {
    check_masses(c, m)?;
    if i == j {
        return Err(Error::InvalidInput(format!(
            "gradient term needs two distinct bodies, got i = j = {i}"
        )));
    }
    let (qi, qj) = (c.point(i), c.point(j));
    let dot = qi.dot(qj).clamp(-1.0, 1.0);
    if dot.abs() >= 1.0 - SINGULAR_TOL {
        return Err(Error::SingularPair { i, j, dot });
    }
    let s = (1.0 - dot * dot).sqrt().powi(3).recip();
    Ok((qj - qi * dot) * (m[i] * m[j] * s))
}

/// Gradient rows F_i = Σ_{j≠i} F_ij of the force function.
pub fn gradient(c: &Configuration, m: &MassVector) -> Result<Vec<DVector<f64>>> {
    check_masses(c, m)?;
    let t = PairTable::build(c)?;
    let n = c.n_bodies();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut f = DVector::zeros(c.ambient_dim());
        for j in 0..n {
            if j == i {
                continue;
            }
            let w = m[i] * m[j] * t.s[(i, j)];
            f += (c.point(j) - c.point(i) * t.cosd[(i, j)]) * w;
        }
        out.push(f);
    }
    Ok(out)
}

/// Stationarity multiplier θ_i = Σ_{j≠i} m_i m_j cos d_ij / sin³ d_ij.
pub fn theta(c: &Configuration, m: &MassVector, i: usize) -> Result<f64> {
    Ok(thetas(c, m)?[i])
}

/// All multipliers θ_1, ..., θ_N.
pub fn thetas(c: &Configuration, m: &MassVector) -> Result<Vec<f64>> {
    check_masses(c, m)?;
    let t = PairTable::build(c)?;
    let n = c.n_bodies();
    Ok((0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| m[i] * m[j] * t.cosd[(i, j)] * t.s[(i, j)])
                .sum()
        })
        .collect())
}

/// Evaluates both stationarity residuals and renders a verdict on the
/// gradient form: max_i ‖F_i‖ ≤ tol.
pub fn scc_residual(c: &Configuration, m: &MassVector, tol: f64) -> Result<SccResidualReport> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    check_masses(c, m)?;
    let t = PairTable::build(c)?;
    let n = c.n_bodies();
    let theta: Vec<f64> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| m[i] * m[j] * t.cosd[(i, j)] * t.s[(i, j)])
                .sum()
        })
        .collect();
    let grad = gradient(c, m)?;
    let gradient_norms: Vec<f64> = grad.iter().map(|f| f.norm()).collect();
    let multiplier_residuals: Vec<f64> = (0..n)
        .map(|i| {
            let mut row = DVector::zeros(c.ambient_dim());
            for j in 0..n {
                if j == i {
                    continue;
                }
                row += c.point(j) * (m[i] * m[j] * t.s[(i, j)]);
            }
            row -= c.point(i) * theta[i];
            row.norm()
        })
        .collect();
    let max_norm = gradient_norms.iter().fold(0.0f64, |a, &x| a.max(x));
    Ok(SccResidualReport {
        verdict: max_norm <= tol,
        gradient_norms,
        max_norm,
        theta,
        tol,
        multiplier_residuals,
    })
}
