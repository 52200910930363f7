//! The stationarity criterion specific to Dziobek configurations (N bodies
//! spanning R^{N-1}): the pairwise ratio test m_i m_j S_ij / (Δ_i Δ_j),
//! the shape-only and mass-consistency equation systems it splits into,
//! mass recovery from a shape, and the regular-simplex special case.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{delta_vector, Configuration, DeltaVector, PairTable, MINOR_TOL};
use crate::potential::{scc_residual, MassVector, DEFAULT_SCC_TOL};

/// Default relative-spread tolerance for the ratio criterion.
pub const DEFAULT_CRITERION_TOL: f64 = 1e-8;

/// Diagnostics of the Dziobek ratio criterion.
///
/// `k_estimates` holds m_i m_j S_ij / (Δ_i Δ_j) for the pairs (i, j), i < j,
/// in lexicographic order; a configuration with masses is stationary exactly
/// when these share a common nonzero value, estimated by their mean `k`.
/// `s_residuals` are the N(N−3)/2 mass-free shape constraints and
/// `m_residuals` the N−1 mass-consistency constraints; both are relative
/// residuals in [0, ~1].
#[derive(Debug, Clone, Serialize)]
pub struct DziobekReport {
    pub delta: DeltaVector,
    pub k_estimates: Vec<f64>,
    pub k: f64,
    pub criterion_residual: f64,
    pub s_residuals: Vec<f64>,
    pub m_residuals: Vec<f64>,
    pub verdict: bool,
}

/// Anchor choice for mass recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorStrategy {
    /// Anchor the ratio chain on the first and last bodies.
    FirstLast,
    /// Anchor on the pair with the largest |Δ_a Δ_b| for conditioning.
    LargestMinors,
}

fn ensure_dziobek_shape(c: &Configuration) -> Result<()> {
    if c.ambient_dim() != c.n_bodies() - 1 {
        return Err(Error::WrongCodimension {
            n_bodies: c.n_bodies(),
            dim: c.dim(),
            expected: c.n_bodies() - 2,
        });
    }
    Ok(())
}

/// Signed minors with the zero-minor guard applied.
fn validated_delta(c: &Configuration) -> Result<DeltaVector> {
    let delta = delta_vector(c)?;
    let scale = delta.max_abs();
    for (index, d) in delta.entries.iter().enumerate() {
        if d.abs() <= MINOR_TOL * scale {
            return Err(Error::DegenerateMinor { index });
        }
    }
    Ok(delta)
}

/// Relative disagreement between two quantities expected to be equal.
fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn s_residuals_of(t: &PairTable, n: usize) -> Vec<f64> {
    // 1-based body labels to mirror the ratio chains below.
    let s = |a: usize, b: usize| t.s[(a - 1, b - 1)];
    let mut out = Vec::with_capacity(n * (n - 3) / 2);
    for k in 3..n {
        out.push(relative_gap(
            s(k - 1, k - 2) * s(k + 1, k),
            s(k + 1, k - 2) * s(k - 1, k),
        ));
    }
    for k in 2..=(n - 2) {
        for j in 1..=(n - k - 1) {
            out.push(relative_gap(
                s(k - 1, k + j) * s(k, k + j + 1),
                s(k, k + j) * s(k - 1, k + j + 1),
            ));
        }
    }
    out
}

fn m_residuals_of(t: &PairTable, delta: &DeltaVector, m: &MassVector, n: usize) -> Vec<f64> {
    let s = |a: usize, b: usize| t.s[(a - 1, b - 1)];
    let d = |a: usize| delta.entries[a - 1];
    let mass = |a: usize| m[a - 1];
    let mut out = Vec::with_capacity(n - 1);
    for i in 2..n {
        out.push(relative_gap(
            mass(i) * s(1, i) * d(n),
            mass(n) * s(1, n) * d(i),
        ));
    }
    out.push(relative_gap(
        mass(1) * s(1, 2) * d(n),
        mass(n) * s(2, n) * d(1),
    ));
    out
}

/// Runs the pairwise ratio criterion on a Dziobek configuration.
///
/// The verdict is true exactly when the relative spread of the ratio
/// estimates, (max − min)/|mean|, is at most `tol` and every product
/// Δ_i Δ_j is strictly positive.
pub fn criterion_check(c: &Configuration, m: &MassVector, tol: f64) -> Result<DziobekReport> {
    ensure_dziobek_shape(c)?;
    if m.len() != c.n_bodies() {
        return Err(Error::InvalidInput(format!(
            "{} masses for {} bodies",
            m.len(),
            c.n_bodies()
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let delta = validated_delta(c)?;
    let t = PairTable::build(c)?;
    let n = c.n_bodies();
    let mut k_estimates = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            k_estimates.push(m[i] * m[j] * t.s[(i, j)] / (delta.entries[i] * delta.entries[j]));
        }
    }
    let k = k_estimates.iter().sum::<f64>() / k_estimates.len() as f64;
    let max = k_estimates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = k_estimates.iter().cloned().fold(f64::INFINITY, f64::min);
    let criterion_residual = (max - min) / k.abs();
    let verdict = delta.same_sign() && criterion_residual <= tol;
    Ok(DziobekReport {
        s_residuals: s_residuals_of(&t, n),
        m_residuals: m_residuals_of(&t, &delta, m, n),
        delta,
        k_estimates,
        k,
        criterion_residual,
        verdict,
    })
}

/// Mass-free shape constraints a Dziobek stationary configuration must
/// satisfy: N(N−3)/2 relative residuals of products of the S_ab, ordered
/// as the ratio chain along consecutive bodies followed by the chains that
/// compare each body pair against increasing partners.
pub fn s_equation_residuals(c: &Configuration) -> Result<Vec<f64>> {
    ensure_dziobek_shape(c)?;
    let t = PairTable::build(c)?;
    Ok(s_residuals_of(&t, c.n_bodies()))
}

/// Recovers the unique (up to scale) positive masses from a Dziobek shape,
/// anchored on the first and last bodies. Returns the masses normalized to
/// unit total together with the stationarity residual max_i ‖F_i‖ they
/// produce.
pub fn recover_masses(c: &Configuration) -> Result<(MassVector, f64)> {
    recover_masses_with(c, AnchorStrategy::FirstLast)
}

/// Mass recovery with an explicit anchor strategy.
pub fn recover_masses_with(
    c: &Configuration,
    strategy: AnchorStrategy,
) -> Result<(MassVector, f64)> {
    ensure_dziobek_shape(c)?;
    let delta = validated_delta(c)?;
    if !delta.same_sign() {
        return Err(Error::MixedMinorSigns);
    }
    let t = PairTable::build(c)?;
    let n = c.n_bodies();

    let (a, b) = match strategy {
        AnchorStrategy::FirstLast => (0, n - 1),
        AnchorStrategy::LargestMinors => {
            let mut best = (0, 1);
            let mut best_val = f64::NEG_INFINITY;
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = (delta.entries[i] * delta.entries[j]).abs();
                    if v > best_val {
                        best_val = v;
                        best = (i, j);
                    }
                }
            }
            best
        }
    };
    let middle: Vec<usize> = (0..n).filter(|&x| x != a && x != b).collect();

    let mut masses = vec![0.0; n];
    masses[b] = 1.0;
    for &x in &middle {
        masses[x] = t.s[(a, b)] * delta.entries[x] / (t.s[(a, x)] * delta.entries[b]);
    }
    masses[a] =
        t.s[(middle[0], b)] * delta.entries[a] / (t.s[(a, middle[0])] * delta.entries[b]);

    if masses.iter().any(|&m| !(m.is_finite() && m > 0.0)) {
        return Err(Error::Inconsistent(
            "mass recovery produced a non-positive mass".into(),
        ));
    }
    let total: f64 = masses.iter().sum();
    let m = MassVector::new(masses.iter().map(|x| x / total).collect())?;
    let residual = scc_residual(c, &m, DEFAULT_SCC_TOL)?.max_norm;
    Ok((m, residual))
}

/// Numerically probes the equivalence between the full ratio criterion and
/// the split into shape equations plus mass-consistency equations: both
/// verdicts are evaluated at tolerance 1e-8 and compared.
pub fn equivalence_probe(c: &Configuration, m: &MassVector) -> Result<bool> {
    let report = criterion_check(c, m, DEFAULT_CRITERION_TOL)?;
    let split_verdict = report.delta.same_sign()
        && report
            .s_residuals
            .iter()
            .chain(&report.m_residuals)
            .all(|&r| r <= DEFAULT_CRITERION_TOL);
    Ok(report.verdict == split_verdict)
}

/// Detects the equal-mass regular-simplex case: true exactly when the
/// mass-weighted barycenter Σ m_i q_i vanishes (masses taken normalized).
/// In that case the shape must be a regular simplex with equal masses;
/// the uniformity checks run as internal consistency guards.
pub fn regular_simplex_check(c: &Configuration, m: &MassVector) -> Result<bool> {
    ensure_dziobek_shape(c)?;
    if m.len() != c.n_bodies() {
        return Err(Error::InvalidInput(format!(
            "{} masses for {} bodies",
            m.len(),
            c.n_bodies()
        )));
    }
    let normalized = m.normalized();
    let mut moment = nalgebra::DVector::zeros(c.ambient_dim());
    for (i, q) in c.points().iter().enumerate() {
        moment += q * normalized[i];
    }
    if moment.norm() > 1e-10 {
        return Ok(false);
    }
    let t = PairTable::build(c)?;
    let n = c.n_bodies();
    let mut s_min = f64::INFINITY;
    let mut s_max = f64::NEG_INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            s_min = s_min.min(t.s[(i, j)]);
            s_max = s_max.max(t.s[(i, j)]);
        }
    }
    if (s_max - s_min) / s_max > 1e-10 {
        return Err(Error::Inconsistent(
            "vanishing barycenter with unequal pair interactions".into(),
        ));
    }
    let m_max = normalized.as_slice().iter().cloned().fold(0.0, f64::max);
    let m_min = normalized
        .as_slice()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if (m_max - m_min) / m_max > 1e-10 {
        return Err(Error::Inconsistent(
            "vanishing barycenter with unequal masses".into(),
        ));
    }
    Ok(true)
}
