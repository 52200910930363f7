//! Numerical search for stationary configurations with given masses:
//! damped-Newton refinement of the stationarity system with explicit
//! multipliers, randomized multistart, rotation gauge fixing, and
//! deduplication of solutions into equivalence classes.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Configuration;
use crate::potential::{scc_residual, MassVector};

/// Pairs closer to collision or antipodality than this abort a refinement.
const APPROACH_TOL: f64 = 1e-9;
/// Gram-Schmidt pivot threshold when building the canonical frame.
const GAUGE_TIE_TOL: f64 = 1e-8;
/// Grid used to coarsen fingerprint entries.
const FINGERPRINT_GRID: f64 = 1e-6;

/// Multistart search parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSettings {
    /// Sphere dimension n (bodies live on S^n in R^{n+1}).
    pub n: usize,
    /// Number of random starts.
    pub trials: usize,
    /// Master seed; fixed seed gives identical results, serial or parallel.
    pub seed: u64,
    /// Convergence bound on max_i ‖F_i‖.
    pub tol: f64,
    /// Newton iteration cap per trial.
    pub max_iters: usize,
    /// Fingerprint distance below which two solutions merge into a class.
    pub merge_tol: f64,
}

impl SearchSettings {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            trials: 100,
            seed: 0,
            tol: 1e-10,
            max_iters: 200,
            merge_tol: 1e-5,
        }
    }
}

/// Why a single refinement trial produced no solution.
#[derive(Debug, Clone, thiserror::Error)]
pub enum RefineError {
    #[error("iterate approached the singular set (collision or antipodal pair)")]
    SingularApproach,
    #[error("no convergence: residual {residual} after the iteration cap")]
    NoConvergence { residual: f64 },
    #[error(transparent)]
    Invalid(#[from] Error),
}

/// Rotation-invariant label of a solution: the sorted multiset of
/// (m_lo, m_hi, d_ij) triples over all pairs, coarsened to a 1e-6 grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fingerprint(Vec<(f64, f64, f64)>);

impl Fingerprint {
    pub fn of(c: &Configuration, m: &MassVector) -> Self {
        let coarsen = |x: f64| (x / FINGERPRINT_GRID).round() * FINGERPRINT_GRID;
        let n = c.n_bodies();
        let mut triples = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                let d = c.point(i).dot(c.point(j)).clamp(-1.0, 1.0).acos();
                triples.push((
                    coarsen(m[i].min(m[j])),
                    coarsen(m[i].max(m[j])),
                    coarsen(d),
                ));
            }
        }
        triples.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
        });
        Self(triples)
    }

    /// Max componentwise gap; infinite when the multisets have different
    /// sizes.
    pub fn distance(&self, other: &Self) -> f64 {
        if self.0.len() != other.0.len() {
            return f64::INFINITY;
        }
        self.0
            .iter()
            .zip(&other.0)
            .flat_map(|(a, b)| [(a.0 - b.0).abs(), (a.1 - b.1).abs(), (a.2 - b.2).abs()])
            .fold(0.0, f64::max)
    }

    fn cmp_lex(&self, other: &Self) -> std::cmp::Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| {
            for (a, b) in self.0.iter().zip(&other.0) {
                let ord = a
                    .0
                    .total_cmp(&b.0)
                    .then(a.1.total_cmp(&b.1))
                    .then(a.2.total_cmp(&b.2));
                if ord != std::cmp::Ordering::Equal {
                    return ord;
                }
            }
            std::cmp::Ordering::Equal
        })
    }
}

/// An equivalence class of solutions found by the search.
#[derive(Debug, Clone, Serialize)]
pub struct SccClass {
    pub representative: Configuration,
    pub masses: MassVector,
    pub fingerprint: Fingerprint,
    pub residual: f64,
    pub count: usize,
}

/// Pairwise inner products u, interaction strengths S = (1-u²)^{-3/2} and
/// their derivatives w = dS/du, for raw (possibly mid-iteration) points.
struct RawTable {
    u: DMatrix<f64>,
    s: DMatrix<f64>,
    w: DMatrix<f64>,
}

impl RawTable {
    /// None when some pair is within APPROACH_TOL of the singular set.
    fn build(points: &[DVector<f64>]) -> Option<Self> {
        let n = points.len();
        let mut u = DMatrix::zeros(n, n);
        let mut s = DMatrix::zeros(n, n);
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let dot = points[i].dot(&points[j]);
                if dot.abs() >= 1.0 - APPROACH_TOL {
                    return None;
                }
                let one_mu = 1.0 - dot * dot;
                let sij = one_mu.powf(-1.5);
                let wij = 3.0 * dot * one_mu.powf(-2.5);
                u[(i, j)] = dot;
                u[(j, i)] = dot;
                s[(i, j)] = sij;
                s[(j, i)] = sij;
                w[(i, j)] = wij;
                w[(j, i)] = wij;
            }
        }
        Some(Self { u, s, w })
    }
}

fn raw_potential(m: &MassVector, t: &RawTable) -> f64 {
    let n = m.len();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let u = t.u[(i, j)];
            total += m[i] * m[j] * u / (1.0 - u * u).sqrt();
        }
    }
    total
}

fn raw_gradient(points: &[DVector<f64>], m: &MassVector, t: &RawTable) -> Vec<DVector<f64>> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let mut f = DVector::zeros(points[i].len());
            for j in 0..n {
                if j == i {
                    continue;
                }
                f += (&points[j] - &points[i] * t.u[(i, j)]) * (m[i] * m[j] * t.s[(i, j)]);
            }
            f
        })
        .collect()
}

fn raw_thetas(m: &MassVector, t: &RawTable) -> DVector<f64> {
    let n = m.len();
    DVector::from_fn(n, |i, _| {
        (0..n)
            .filter(|&j| j != i)
            .map(|j| m[i] * m[j] * t.u[(i, j)] * t.s[(i, j)])
            .sum()
    })
}

/// Stationarity rows Σ_{j≠i} m_i m_j S_ij q_j − θ_i q_i followed by the
/// unit-norm constraint rows (q_i·q_i − 1)/2.
fn assemble_residual(
    points: &[DVector<f64>],
    theta: &DVector<f64>,
    m: &MassVector,
    t: &RawTable,
) -> DVector<f64> {
    let n = points.len();
    let d = points[0].len();
    let mut r = DVector::zeros(n * d + n);
    for i in 0..n {
        let mut e = &points[i] * (-theta[i]);
        for j in 0..n {
            if j == i {
                continue;
            }
            e += &points[j] * (m[i] * m[j] * t.s[(i, j)]);
        }
        r.rows_mut(i * d, d).copy_from(&e);
        r[n * d + i] = 0.5 * (points[i].norm_squared() - 1.0);
    }
    r
}

fn assemble_jacobian(
    points: &[DVector<f64>],
    theta: &DVector<f64>,
    m: &MassVector,
    t: &RawTable,
) -> DMatrix<f64> {
    let n = points.len();
    let d = points[0].len();
    let size = n * d + n;
    let mut jac = DMatrix::zeros(size, size);
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            let ms = m[i] * m[j] * t.s[(i, j)];
            let mw = m[i] * m[j] * t.w[(i, j)];
            for a in 0..d {
                jac[(i * d + a, j * d + a)] += ms;
                for b in 0..d {
                    jac[(i * d + a, j * d + b)] += mw * points[j][a] * points[i][b];
                    jac[(i * d + a, i * d + b)] += mw * points[j][a] * points[j][b];
                }
            }
        }
        for a in 0..d {
            jac[(i * d + a, i * d + a)] -= theta[i];
            jac[(i * d + a, n * d + i)] = -points[i][a];
            jac[(n * d + i, i * d + a)] = points[i][a];
        }
    }
    jac
}

fn renormalized(points: Vec<DVector<f64>>) -> Option<Vec<DVector<f64>>> {
    points
        .into_iter()
        .map(|p| {
            let norm = p.norm();
            (norm > 1e-6).then(|| p / norm)
        })
        .collect()
}

/// One uphill move along the gradient, used when the Newton step stalls.
fn ascent_step(points: &[DVector<f64>], m: &MassVector) -> Option<Vec<DVector<f64>>> {
    let t = RawTable::build(points)?;
    let grad = raw_gradient(points, m, &t);
    let fmax = grad.iter().map(|g| g.norm()).fold(0.0, f64::max);
    if fmax <= 0.0 {
        return None;
    }
    let base = raw_potential(m, &t);
    for h in [0.1, 0.01, 1e-3, 1e-4] {
        let step = h / fmax;
        let cand = renormalized(
            points
                .iter()
                .zip(&grad)
                .map(|(p, g)| p + g * step)
                .collect(),
        );
        let Some(cand) = cand else { continue };
        if let Some(tc) = RawTable::build(&cand) {
            if raw_potential(m, &tc) > base {
                return Some(cand);
            }
        }
    }
    None
}

/// Drives max_i ‖F_i‖ below `settings.tol` by damped Newton iteration on
/// the coupled system in the points and multipliers, re-normalizing the
/// points after every accepted step. Trials that drift toward collision or
/// antipodality are abandoned rather than repaired.
pub fn refine(
    c0: &Configuration,
    m: &MassVector,
    settings: &SearchSettings,
) -> std::result::Result<Configuration, RefineError> {
    if m.len() != c0.n_bodies() {
        return Err(RefineError::Invalid(Error::InvalidInput(format!(
            "{} masses for {} bodies",
            m.len(),
            c0.n_bodies()
        ))));
    }
    let n = c0.n_bodies();
    let d = c0.ambient_dim();
    let mut points: Vec<DVector<f64>> = c0.points().to_vec();
    let mut theta = {
        let t = RawTable::build(&points).ok_or(RefineError::SingularApproach)?;
        raw_thetas(m, &t)
    };
    let mut residual_now = f64::INFINITY;

    for _ in 0..settings.max_iters {
        let t = RawTable::build(&points).ok_or(RefineError::SingularApproach)?;
        let grad = raw_gradient(&points, m, &t);
        let fmax = grad.iter().map(|g| g.norm()).fold(0.0, f64::max);
        residual_now = fmax;
        if fmax <= settings.tol {
            return Configuration::from_points(c0.dim(), points)
                .map_err(|_| RefineError::SingularApproach);
        }

        let r = assemble_residual(&points, &theta, m, &t);
        let phi0 = r.norm();
        let jac = assemble_jacobian(&points, &theta, m, &t);
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let Ok(delta) = svd.solve(&(-r), 1e-12 * smax.max(f64::MIN_POSITIVE)) else {
            return Err(RefineError::NoConvergence { residual: fmax });
        };

        let mut advanced = false;
        let mut alpha = 1.0;
        for _ in 0..12 {
            let stepped: Vec<DVector<f64>> = (0..n)
                .map(|i| {
                    DVector::from_fn(d, |a, _| points[i][a] + alpha * delta[i * d + a])
                })
                .collect();
            let Some(candidate) = renormalized(stepped) else {
                alpha *= 0.5;
                continue;
            };
            let theta_new = DVector::from_fn(n, |i, _| theta[i] + alpha * delta[n * d + i]);
            if let Some(tc) = RawTable::build(&candidate) {
                let phi = assemble_residual(&candidate, &theta_new, m, &tc).norm();
                if phi <= (1.0 - 1e-4 * alpha) * phi0 {
                    points = candidate;
                    theta = theta_new;
                    advanced = true;
                    break;
                }
            }
            alpha *= 0.5;
        }

        if !advanced {
            match ascent_step(&points, m) {
                Some(next) => {
                    let tn = RawTable::build(&next).ok_or(RefineError::SingularApproach)?;
                    theta = raw_thetas(m, &tn);
                    points = next;
                }
                None => return Err(RefineError::NoConvergence { residual: fmax }),
            }
        }
    }
    Err(RefineError::NoConvergence {
        residual: residual_now,
    })
}

/// Rotates a configuration to a canonical frame adapted to the points in
/// order: the first body maps to e_1, the second into the upper half of
/// span{e_1, e_2}, and so on. Rotated copies of one configuration map to
/// the same output, and the map is idempotent.
pub fn canonical_gauge(c: &Configuration) -> Configuration {
    let d = c.ambient_dim();
    let mut frame: Vec<DVector<f64>> = Vec::with_capacity(d);
    for q in c.points() {
        if frame.len() == d {
            break;
        }
        let mut r = q.clone();
        for f in &frame {
            let proj = f.dot(&r);
            r -= f * proj;
        }
        let norm = r.norm();
        if norm > GAUGE_TIE_TOL {
            frame.push(r / norm);
        }
    }
    let mut basis_idx = 0;
    while frame.len() < d {
        let mut r = DVector::zeros(d);
        r[basis_idx] = 1.0;
        basis_idx += 1;
        for f in &frame {
            let proj = f.dot(&r);
            r -= f * proj;
        }
        let norm = r.norm();
        if norm > 1e-6 {
            frame.push(r / norm);
        }
    }
    let points = c
        .points()
        .iter()
        .map(|q| {
            let mut x = DVector::from_fn(d, |k, _| frame[k].dot(q));
            let norm = x.norm();
            x /= norm;
            x
        })
        .collect();
    Configuration::from_points(c.dim(), points).expect("gauge change preserves validity")
}

/// Uniform random configuration on S^n via normalized Gaussian points,
/// resampled until no pair is near-singular.
pub fn random_configuration<R: Rng>(n: usize, n_bodies: usize, rng: &mut R) -> Configuration {
    let d = n + 1;
    for _ in 0..1000 {
        let points: Vec<DVector<f64>> = (0..n_bodies)
            .map(|_| {
                let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let norm = v.norm();
                v / norm
            })
            .collect();
        if let Ok(c) = Configuration::from_points(n, points) {
            return c;
        }
    }
    unreachable!("random unit points collided 1000 times in a row")
}

/// Multistart search for stationary configurations with the given masses.
///
/// Starts are drawn deterministically from the seed, refined independently
/// (in parallel), gauge-fixed and merged into classes by fingerprint
/// proximity. Classes are ordered by descending hit count, ties broken by
/// fingerprint order; an empty list means no trial converged.
pub fn search(m: &MassVector, settings: &SearchSettings) -> Result<Vec<SccClass>> {
    if settings.n < 1 {
        return Err(Error::InvalidInput("sphere dimension must be >= 1".into()));
    }
    if settings.trials < 1 {
        return Err(Error::InvalidInput("need at least one trial".into()));
    }
    if settings.tol.is_nan() || settings.tol <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {}",
            settings.tol
        )));
    }
    if m.len() < 2 {
        return Err(Error::InvalidInput(
            "search needs at least two bodies".into(),
        ));
    }
    let n_bodies = m.len();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let starts: Vec<Configuration> = (0..settings.trials)
        .map(|_| random_configuration(settings.n, n_bodies, &mut rng))
        .collect();

    let refined: Vec<std::result::Result<Configuration, RefineError>> = starts
        .par_iter()
        .map(|c0| refine(c0, m, settings))
        .collect();

    let mut classes: Vec<SccClass> = Vec::new();
    for outcome in refined {
        let Ok(cfg) = outcome else { continue };
        let canon = canonical_gauge(&cfg);
        let residual = scc_residual(&canon, m, settings.tol)?.max_norm;
        let fingerprint = Fingerprint::of(&canon, m);
        match classes
            .iter_mut()
            .find(|cl| cl.fingerprint.distance(&fingerprint) <= settings.merge_tol)
        {
            Some(class) => {
                class.count += 1;
                if residual < class.residual {
                    class.representative = canon;
                    class.residual = residual;
                    class.fingerprint = fingerprint;
                }
            }
            None => classes.push(SccClass {
                representative: canon,
                masses: m.clone(),
                fingerprint,
                residual,
                count: 1,
            }),
        }
    }
    classes.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.fingerprint.cmp_lex(&b.fingerprint))
    });
    Ok(classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{build, FamilySpec};
    use approx::assert_relative_eq;

    fn random_rotation<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
        let raw = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut q = raw.qr().q();
        if q.determinant() < 0.0 {
            let flipped = -q.column(0).into_owned();
            q.set_column(0, &flipped);
        }
        q
    }

    fn rotated(c: &Configuration, rot: &DMatrix<f64>) -> Configuration {
        let points = c
            .points()
            .iter()
            .map(|p| {
                let v = rot * p;
                let n = v.norm();
                v / n
            })
            .collect();
        Configuration::from_points(c.dim(), points).unwrap()
    }

    fn tangent_perturbed<R: Rng>(c: &Configuration, eps: f64, rng: &mut R) -> Configuration {
        let points = c
            .points()
            .iter()
            .map(|p| {
                let mut v =
                    DVector::from_fn(p.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
                let along = p.dot(&v);
                v -= p * along;
                let q = p + v * eps;
                let n = q.norm();
                q / n
            })
            .collect();
        Configuration::from_points(c.dim(), points).unwrap()
    }

    #[test]
    fn gauge_is_idempotent_and_rotation_invariant() {
        let (tetra, _) = build(FamilySpec::TetraFamily { c: 0.47 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let canon = canonical_gauge(&tetra);
        let twice = canonical_gauge(&canon);
        for i in 0..4 {
            assert!((canon.point(i) - twice.point(i)).norm() <= 1e-12);
        }
        for _ in 0..5 {
            let rot = random_rotation(3, &mut rng);
            let other = canonical_gauge(&rotated(&tetra, &rot));
            for i in 0..4 {
                assert!((canon.point(i) - other.point(i)).norm() <= 1e-10);
            }
        }
        // First body lands on e_1, second into the upper e_1-e_2 plane.
        assert_relative_eq!(canon.point(0)[0], 1.0, epsilon = 1e-12);
        assert!(canon.point(1)[1] >= 0.0);
        assert!(canon.point(1)[2].abs() <= 1e-12);
    }

    #[test]
    fn fingerprints_are_rotation_invariant_and_separate_shapes() {
        let (tetra, m) = build(FamilySpec::RegularSimplex { n_bodies: 4 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fp = Fingerprint::of(&tetra, &m);
        let rot = random_rotation(3, &mut rng);
        let fp_rot = Fingerprint::of(&rotated(&tetra, &rot), &m);
        assert!(fp.distance(&fp_rot) <= 1e-12);

        let (other, _) = build(FamilySpec::TetraFamily { c: 0.6 }).unwrap();
        assert!(fp.distance(&Fingerprint::of(&other, &m)) > 1e-3);

        let (triangle, m3) = build(FamilySpec::RegularSimplex { n_bodies: 3 }).unwrap();
        assert_eq!(
            Fingerprint::of(&triangle, &m3).distance(&fp),
            f64::INFINITY
        );
    }

    #[test]
    fn refine_recovers_perturbed_families() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let settings = SearchSettings::new(2);

        let (tetra, m) = build(FamilySpec::RegularSimplex { n_bodies: 4 }).unwrap();
        let start = tangent_perturbed(&tetra, 1e-3, &mut rng);
        let refined = refine(&start, &m, &settings).unwrap();
        let report = scc_residual(&refined, &m, settings.tol).unwrap();
        assert!(report.verdict, "residual {}", report.max_norm);
        let fp = Fingerprint::of(&canonical_gauge(&refined), &m);
        let fp_exact = Fingerprint::of(&canonical_gauge(&tetra), &m);
        assert!(fp.distance(&fp_exact) <= 1e-5);

        let (triangle, m3) = build(FamilySpec::AcuteTriangle { alpha: 2.1, beta: 1.7 }).unwrap();
        let settings1 = SearchSettings::new(1);
        let start = tangent_perturbed(&triangle, 1e-3, &mut rng);
        let refined = refine(&start, &m3, &settings1).unwrap();
        assert!(scc_residual(&refined, &m3, 1e-10).unwrap().verdict);
    }

    #[test]
    fn refine_fails_for_two_bodies() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = MassVector::uniform(2, 0.5).unwrap();
        let settings = SearchSettings::new(1);
        for _ in 0..5 {
            let start = random_configuration(1, 2, &mut rng);
            assert!(refine(&start, &m, &settings).is_err());
        }
    }

    #[test]
    fn search_finds_the_equilateral_class() {
        let m = MassVector::uniform(3, 1.0 / 3.0).unwrap();
        let mut settings = SearchSettings::new(1);
        settings.trials = 40;
        settings.seed = 42;
        let classes = search(&m, &settings).unwrap();
        assert!(!classes.is_empty());
        let (exact, _) = build(FamilySpec::RegularSimplex { n_bodies: 3 }).unwrap();
        let fp = Fingerprint::of(&exact, &m);
        assert!(
            classes.iter().any(|cl| cl.fingerprint.distance(&fp) <= 1e-4),
            "equilateral class missing"
        );
        for class in &classes {
            assert!(class.residual <= settings.tol);
            assert!(crate::geometry::in_closed_hemisphere(&class.representative).is_none());
        }
    }

    #[test]
    fn search_is_deterministic() {
        let m = MassVector::uniform(3, 1.0 / 3.0).unwrap();
        let mut settings = SearchSettings::new(1);
        settings.trials = 25;
        settings.seed = 7;
        let a = search(&m, &settings).unwrap();
        let b = search(&m, &settings).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn search_rejects_bad_settings() {
        let m = MassVector::uniform(3, 1.0).unwrap();
        let mut s = SearchSettings::new(1);
        s.trials = 0;
        assert!(search(&m, &s).is_err());
        let mut s = SearchSettings::new(0);
        s.trials = 1;
        assert!(search(&m, &s).is_err());
        let one = MassVector::uniform(1, 1.0).unwrap();
        assert!(search(&one, &SearchSettings::new(1)).is_err());
    }
}
