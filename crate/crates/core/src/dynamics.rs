//! Equations of motion on the sphere and a fixed-step RK4 integrator with
//! constraint renormalization, used to certify that stationary
//! configurations are fixed points and to expose drift when they are not.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Configuration;
use crate::potential::MassVector;

/// Pairs with |q_i·q_j| at or beyond this bound during integration count as
/// a singular encounter.
const ENCOUNTER_TOL: f64 = 1e-9;

/// Positions on the sphere together with tangent velocities.
#[derive(Debug, Clone)]
pub struct PhaseState {
    pub positions: Configuration,
    pub velocities: Vec<DVector<f64>>,
}

impl PhaseState {
    /// Validates velocity shape and tangency (|q_i·v_i| ≤ 1e-10).
    pub fn new(positions: Configuration, velocities: Vec<DVector<f64>>) -> Result<Self> {
        if velocities.len() != positions.n_bodies() {
            return Err(Error::InvalidInput(format!(
                "{} velocities for {} bodies",
                velocities.len(),
                positions.n_bodies()
            )));
        }
        for (i, v) in velocities.iter().enumerate() {
            if v.len() != positions.ambient_dim() {
                return Err(Error::InvalidInput(format!(
                    "velocity {i} has {} coordinates, expected {}",
                    v.len(),
                    positions.ambient_dim()
                )));
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "velocity {i} has non-finite coordinates"
                )));
            }
            let along = positions.point(i).dot(v);
            if along.abs() > 1e-10 {
                return Err(Error::InvalidInput(format!(
                    "velocity {i} is not tangent: q·v = {along}"
                )));
            }
        }
        Ok(Self {
            positions,
            velocities,
        })
    }

    /// The state at rest over the given configuration.
    pub fn rest(positions: Configuration) -> Self {
        let d = positions.ambient_dim();
        let velocities = vec![DVector::zeros(d); positions.n_bodies()];
        Self {
            positions,
            velocities,
        }
    }
}

/// Integration diagnostics. `max_position_drift` is the largest geodesic
/// distance any body attains from its initial position over the whole run;
/// `energy_drift` is the largest deviation of T − U from its initial value.
#[derive(Debug, Clone, Serialize)]
pub struct DriftReport {
    pub t_final: f64,
    pub max_position_drift: f64,
    pub max_speed: f64,
    pub energy_drift: f64,
}

/// Raw force rows, valid also slightly off the sphere (inner products are
/// not clamped). None when a pair is within ENCOUNTER_TOL of singular.
fn raw_forces(points: &[DVector<f64>], m: &MassVector) -> Option<Vec<DVector<f64>>> {
    let n = points.len();
    let d = points[0].len();
    let mut forces = vec![DVector::zeros(d); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let u = points[i].dot(&points[j]);
            if u.abs() >= 1.0 - ENCOUNTER_TOL {
                return None;
            }
            let s = (1.0 - u * u).powf(-1.5) * m[i] * m[j];
            forces[i] += (&points[j] - &points[i] * u) * s;
            forces[j] += (&points[i] - &points[j] * u) * s;
        }
    }
    Some(forces)
}

fn raw_accelerations(
    points: &[DVector<f64>],
    velocities: &[DVector<f64>],
    m: &MassVector,
) -> Option<Vec<DVector<f64>>> {
    let forces = raw_forces(points, m)?;
    Some(
        forces
            .into_iter()
            .enumerate()
            .map(|(i, f)| f / m[i] - &points[i] * velocities[i].norm_squared())
            .collect(),
    )
}

/// Constrained accelerations q̈_i = F_i/m_i − (q̇_i·q̇_i) q_i. The normal
/// term enforces d²(q·q)/dt² = 0, so trajectories stay on the sphere.
pub fn acceleration(state: &PhaseState, m: &MassVector) -> Result<Vec<DVector<f64>>> {
    if m.len() != state.positions.n_bodies() {
        return Err(Error::InvalidInput(format!(
            "{} masses for {} bodies",
            m.len(),
            state.positions.n_bodies()
        )));
    }
    raw_accelerations(state.positions.points(), &state.velocities, m)
        .ok_or(Error::SingularEncounter { t: 0.0 })
}

fn total_energy(points: &[DVector<f64>], velocities: &[DVector<f64>], m: &MassVector) -> f64 {
    let n = points.len();
    let kinetic: f64 = (0..n)
        .map(|i| 0.5 * m[i] * velocities[i].norm_squared())
        .sum();
    let mut cotangent = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let u = points[i].dot(&points[j]).clamp(-1.0, 1.0);
            cotangent += m[i] * m[j] * u / (1.0 - u * u).sqrt();
        }
    }
    kinetic - cotangent
}

/// Fixed-step RK4 over t_final/dt steps (rounded), re-normalizing positions
/// and re-projecting velocities to the tangent space after every step.
pub fn integrate(
    state0: &PhaseState,
    m: &MassVector,
    dt: f64,
    t_final: f64,
) -> Result<(PhaseState, DriftReport)> {
    integrate_with(state0, m, dt, t_final, |_, _, _| {})
}

/// As [`integrate`], invoking the observer with (t, positions, velocities)
/// at t = 0 and after every accepted step.
pub fn integrate_with<F>(
    state0: &PhaseState,
    m: &MassVector,
    dt: f64,
    t_final: f64,
    mut observe: F,
) -> Result<(PhaseState, DriftReport)>
where
    F: FnMut(f64, &[DVector<f64>], &[DVector<f64>]),
{
    if m.len() != state0.positions.n_bodies() {
        return Err(Error::InvalidInput(format!(
            "{} masses for {} bodies",
            m.len(),
            state0.positions.n_bodies()
        )));
    }
    if dt.is_nan() || dt <= 0.0 || !dt.is_finite() {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    if t_final.is_nan() || t_final < dt || !t_final.is_finite() {
        return Err(Error::InvalidInput(format!(
            "t_final must be at least dt, got {t_final}"
        )));
    }
    let steps = (t_final / dt).round().max(1.0) as usize;

    let initial: Vec<DVector<f64>> = state0.positions.points().to_vec();
    let mut q = initial.clone();
    let mut v = state0.velocities.clone();
    let e0 = total_energy(&q, &v, m);

    let mut max_drift = 0.0f64;
    let mut max_speed = v.iter().map(|w| w.norm()).fold(0.0, f64::max);
    let mut energy_drift = 0.0f64;
    observe(0.0, &q, &v);

    let axpy = |base: &[DVector<f64>], dir: &[DVector<f64>], h: f64| -> Vec<DVector<f64>> {
        base.iter().zip(dir).map(|(b, d)| b + d * h).collect()
    };

    for step in 0..steps {
        let t = step as f64 * dt;
        let stage = |qs: &[DVector<f64>], vs: &[DVector<f64>]| {
            raw_accelerations(qs, vs, m).map(|a| (vs.to_vec(), a))
        };
        let encounter = Error::SingularEncounter { t };

        let (k1q, k1v) = stage(&q, &v).ok_or(encounter.clone())?;
        let (k2q, k2v) = stage(&axpy(&q, &k1q, dt / 2.0), &axpy(&v, &k1v, dt / 2.0))
            .ok_or(encounter.clone())?;
        let (k3q, k3v) = stage(&axpy(&q, &k2q, dt / 2.0), &axpy(&v, &k2v, dt / 2.0))
            .ok_or(encounter.clone())?;
        let (k4q, k4v) =
            stage(&axpy(&q, &k3q, dt), &axpy(&v, &k3v, dt)).ok_or(encounter.clone())?;

        for i in 0..q.len() {
            q[i] += (&k1q[i] + &k2q[i] * 2.0 + &k3q[i] * 2.0 + &k4q[i]) * (dt / 6.0);
            v[i] += (&k1v[i] + &k2v[i] * 2.0 + &k3v[i] * 2.0 + &k4v[i]) * (dt / 6.0);
            let norm = q[i].norm();
            if norm.is_nan() || norm <= 0.5 {
                return Err(Error::SingularEncounter { t: t + dt });
            }
            q[i] /= norm;
            let along = q[i].dot(&v[i]);
            v[i] -= &q[i] * along;
        }

        for i in 0..q.len() {
            max_drift = max_drift.max(crate::geometry::stable_angle(&q[i], &initial[i]));
            max_speed = max_speed.max(v[i].norm());
        }
        energy_drift = energy_drift.max((total_energy(&q, &v, m) - e0).abs());
        observe((step + 1) as f64 * dt, &q, &v);
    }

    let t_end = steps as f64 * dt;
    let positions = Configuration::from_points(state0.positions.dim(), q)
        .map_err(|_| Error::SingularEncounter { t: t_end })?;
    let state = PhaseState {
        positions,
        velocities: v,
    };
    let report = DriftReport {
        t_final: t_end,
        max_position_drift: max_drift,
        max_speed,
        energy_drift,
    };
    Ok((state, report))
}
