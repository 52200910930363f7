//! Randomized structural properties: invariances of the gradient, the
//! signed minors, the hemisphere test, and the ratio criterion.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sphere_scc::dziobek::{criterion_check, equivalence_probe, recover_masses};
use sphere_scc::families::{build, FamilySpec};
use sphere_scc::geometry::{delta_vector, in_closed_hemisphere, Configuration};
use sphere_scc::potential::{force_function, gradient, scc_residual, MassVector};
use sphere_scc::solver::random_configuration;

fn random_masses<R: Rng>(n: usize, rng: &mut R) -> MassVector {
    MassVector::new((0..n).map(|_| rng.random_range(0.2..2.0)).collect())
        .unwrap()
        .normalized()
}

/// Random configuration with pair separations bounded away from the
/// singular set, so interaction strengths stay O(1).
fn separated_configuration<R: Rng>(
    n: usize,
    n_bodies: usize,
    min_gap: f64,
    rng: &mut R,
) -> Configuration {
    loop {
        let c = random_configuration(n, n_bodies, rng);
        let ok = (0..n_bodies).all(|i| {
            ((i + 1)..n_bodies).all(|j| {
                let dot = c.point(i).dot(c.point(j)).abs();
                dot < (min_gap).cos()
            })
        });
        if ok {
            return c;
        }
    }
}

/// Random Dziobek configuration (N bodies spanning R^{N-1}) whose minors
/// are all comfortably nonzero.
fn dziobek_configuration<R: Rng>(n_bodies: usize, rng: &mut R) -> Configuration {
    loop {
        let c = separated_configuration(n_bodies - 2, n_bodies, 0.1, rng);
        if !c.is_dziobek() {
            continue;
        }
        let delta = delta_vector(&c).unwrap();
        let max = delta.max_abs();
        if delta.entries.iter().all(|d| d.abs() > 1e-6 * max) {
            return c;
        }
    }
}

fn random_rotation<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let raw = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut q = raw.qr().q();
    if q.determinant() < 0.0 {
        let flipped = -q.column(0).into_owned();
        q.set_column(0, &flipped);
    }
    q
}

#[test]
fn gradient_rows_are_tangent() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..50 {
        let n = rng.random_range(1..=4usize);
        let n_bodies = rng.random_range(2..=7usize);
        let c = separated_configuration(n, n_bodies, 0.05, &mut rng);
        let m = random_masses(n_bodies, &mut rng);
        for (i, f) in gradient(&c, &m).unwrap().iter().enumerate() {
            let along = f.dot(c.point(i)).abs();
            assert!(
                along <= 1e-12 * f.norm().max(1.0),
                "tangency violated: {along}"
            );
        }
    }
}

#[test]
fn finite_differences_match_the_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let h = 1e-6;
    for _ in 0..30 {
        let n = rng.random_range(1..=3usize);
        let n_bodies = rng.random_range(3..=5usize);
        let c = separated_configuration(n, n_bodies, 0.3, &mut rng);
        let m = random_masses(n_bodies, &mut rng);
        let grad = gradient(&c, &m).unwrap();
        let i = rng.random_range(0..n_bodies);
        let mut v = DVector::from_fn(n + 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let along = c.point(i).dot(&v);
        v -= c.point(i) * along;
        v /= v.norm();

        let shifted = |sign: f64| -> f64 {
            let mut pts: Vec<DVector<f64>> = c.points().to_vec();
            let p = &pts[i] + &v * (sign * h);
            let norm = p.norm();
            pts[i] = p / norm;
            let cfg = Configuration::from_points(n, pts).unwrap();
            force_function(&cfg, &m).unwrap()
        };
        let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
        let analytic = grad[i].dot(&v);
        let scale = analytic.abs().max(1e-3);
        assert!(
            (fd - analytic).abs() <= 1e-5 * scale,
            "fd {fd} vs analytic {analytic}"
        );
    }
}

#[test]
fn gradient_is_rotation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for _ in 0..30 {
        let n = rng.random_range(1..=3usize);
        let n_bodies = rng.random_range(3..=6usize);
        let c = separated_configuration(n, n_bodies, 0.2, &mut rng);
        let m = random_masses(n_bodies, &mut rng);
        let rot = random_rotation(n + 1, &mut rng);
        let rotated = Configuration::from_points(
            n,
            c.points()
                .iter()
                .map(|p| {
                    let v = &rot * p;
                    let norm = v.norm();
                    v / norm
                })
                .collect(),
        )
        .unwrap();
        let g = gradient(&c, &m).unwrap();
        let g_rot = gradient(&rotated, &m).unwrap();
        for i in 0..n_bodies {
            let expected = &rot * &g[i];
            assert!((&g_rot[i] - expected).norm() <= 1e-10);
        }
    }
}

#[test]
fn minors_satisfy_kernel_identity_and_permutation_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for n_bodies in 3..=6usize {
        for _ in 0..25 {
            let c = dziobek_configuration(n_bodies, &mut rng);
            let delta = delta_vector(&c).unwrap();
            assert!(delta.kernel_residual(&c) <= 1e-10 * delta.max_abs());

            let mut perm: Vec<usize> = (0..n_bodies).collect();
            for i in (1..n_bodies).rev() {
                let j = rng.random_range(0..=i);
                perm.swap(i, j);
            }
            let permuted = Configuration::from_points(
                c.dim(),
                perm.iter().map(|&i| c.point(i).clone()).collect(),
            )
            .unwrap();
            let pdelta = delta_vector(&permuted).unwrap();
            let ratio = pdelta.entries[0] / delta.entries[perm[0]];
            assert!((ratio.abs() - 1.0).abs() <= 1e-9);
            for (k, entry) in pdelta.entries.iter().enumerate() {
                let expected = ratio * delta.entries[perm[k]];
                assert!(
                    (entry - expected).abs() <= 1e-9 * delta.max_abs(),
                    "permutation equivariance broke at {k}"
                );
            }
        }
    }
}

#[test]
fn hemisphere_witness_agrees_with_minor_signs() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut checked = 0;
    while checked < 100 {
        let n_bodies = rng.random_range(3..=6usize);
        let c = dziobek_configuration(n_bodies, &mut rng);
        let delta = delta_vector(&c).unwrap();
        let witness = in_closed_hemisphere(&c);
        assert_eq!(
            witness.is_none(),
            delta.same_sign(),
            "hemisphere test disagrees with minor signs for N={n_bodies}"
        );
        if let Some(u) = witness {
            for p in c.points() {
                assert!(p.dot(&u) >= -1e-9);
            }
        }
        checked += 1;
    }
}

#[test]
fn gradient_and_multiplier_routes_render_identical_verdicts() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut samples: Vec<(Configuration, MassVector)> = Vec::new();
    for _ in 0..100 {
        let n = rng.random_range(1..=3usize);
        let n_bodies = rng.random_range(3..=6usize);
        let c = separated_configuration(n, n_bodies, 0.1, &mut rng);
        let m = random_masses(n_bodies, &mut rng);
        samples.push((c, m));
    }
    for spec in [
        FamilySpec::OddPolygon { k: 2 },
        FamilySpec::TetraFamily { c: 0.37 },
        FamilySpec::PentatopeFamily { c: 0.61 },
    ] {
        samples.push(build(spec).unwrap());
    }
    for (c, m) in &samples {
        let report = scc_residual(c, m, 1e-9).unwrap();
        let multiplier_max = report
            .multiplier_residuals
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        assert_eq!(report.verdict, multiplier_max <= 1e-9);
    }
}

#[test]
fn criterion_report_lengths_follow_the_counting_formulas() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for n_bodies in 3..=6usize {
        let c = dziobek_configuration(n_bodies, &mut rng);
        let m = random_masses(n_bodies, &mut rng);
        let report = criterion_check(&c, &m, 1e-8).unwrap();
        assert_eq!(report.k_estimates.len(), n_bodies * (n_bodies - 1) / 2);
        assert_eq!(report.s_residuals.len(), n_bodies * (n_bodies - 3) / 2);
        assert_eq!(report.m_residuals.len(), n_bodies - 1);
        assert!(equivalence_probe(&c, &m).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stationary_triangles_recover_their_masses(
        alpha in 0.4f64..3.0,
        beta in 0.4f64..3.0,
    ) {
        let sum = alpha + beta;
        prop_assume!(sum > std::f64::consts::PI + 0.05);
        prop_assume!(sum < 2.0 * std::f64::consts::PI - 0.05);
        prop_assume!(alpha < std::f64::consts::PI - 0.05);
        prop_assume!(beta < std::f64::consts::PI - 0.05);
        let (c, m) = build(FamilySpec::AcuteTriangle { alpha, beta }).unwrap();
        prop_assert!(scc_residual(&c, &m, 1e-9).unwrap().verdict);
        let (recovered, residual) = recover_masses(&c).unwrap();
        for i in 0..3 {
            prop_assert!((recovered[i] - m[i]).abs() <= 1e-9 * m[i]);
        }
        prop_assert!(residual <= 1e-9);
    }

    #[test]
    fn tetra_family_satisfies_the_criterion(c in 0.02f64..0.98) {
        let (cfg, m) = build(FamilySpec::TetraFamily { c }).unwrap();
        let report = criterion_check(&cfg, &m, 1e-8).unwrap();
        prop_assert!(report.verdict, "spread {}", report.criterion_residual);
        let (recovered, _) = recover_masses(&cfg).unwrap();
        for i in 0..4 {
            prop_assert!((recovered[i] - m[i]).abs() <= 1e-9 * m[i]);
        }
    }

    #[test]
    fn criterion_verdict_ignores_mass_scale(
        c in 0.1f64..0.9,
        scale in 0.1f64..10.0,
    ) {
        let (cfg, m) = build(FamilySpec::PentatopeFamily { c }).unwrap();
        let scaled = MassVector::new(m.as_slice().iter().map(|x| scale * x).collect()).unwrap();
        let r1 = criterion_check(&cfg, &m, 1e-8).unwrap();
        let r2 = criterion_check(&cfg, &scaled, 1e-8).unwrap();
        prop_assert_eq!(r1.verdict, r2.verdict);
        prop_assert!(r1.verdict);
        let expected = scale * scale * r1.k;
        prop_assert!((r2.k - expected).abs() <= 1e-9 * expected.abs());
    }
}
