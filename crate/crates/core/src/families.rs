//! Constructors for the known explicit stationary families: odd regular
//! polygons on a great circle, two complementary odd polygons in S³, the
//! stationary triangle on S¹, the one-parameter tetrahedral family on S²
//! and pentatopal family on S³, and the regular simplices they contain.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Configuration;
use crate::potential::MassVector;

/// One-parameter simplex-like family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimplexFamilyKind {
    /// Four bodies on S²: an apex and an isosceles triangle on the circle
    /// x = −c.
    Tetra,
    /// Five bodies on S³: an apex and a regular tetrahedron on the sphere
    /// x = −c.
    Pentatope,
}

/// A family instance request with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilySpec {
    /// 2k+1 equal masses at the vertices of a regular odd polygon on S¹.
    OddPolygon { k: usize },
    /// Regular odd polygons of 2k1+1 and 2k2+1 equal masses on the two
    /// complementary great circles of S³ (xy-plane and zw-plane).
    ComplementaryCircles { k1: usize, k2: usize },
    /// Three bodies on S¹ at angles 0, alpha, alpha + beta with the unique
    /// positive masses that make the configuration stationary.
    AcuteTriangle { alpha: f64, beta: f64 },
    /// Tetrahedral family with apex mass ratio determined by c.
    TetraFamily { c: f64 },
    /// Pentatopal family with apex mass ratio determined by c.
    PentatopeFamily { c: f64 },
    /// Regular simplex of N equal masses on S^{N-2}, N in {3, 4, 5}.
    RegularSimplex { n_bodies: usize },
}

fn odd_polygon_points(k: usize) -> Vec<Vec<f64>> {
    let n = 2 * k + 1;
    (0..n)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / n as f64;
            vec![a.cos(), a.sin()]
        })
        .collect()
}

fn tetra_points(c: f64) -> Vec<Vec<f64>> {
    let r = (1.0 - c * c).sqrt();
    vec![
        vec![1.0, 0.0, 0.0],
        vec![-c, r, 0.0],
        vec![-c, -r / 2.0, 3f64.sqrt() * r / 2.0],
        vec![-c, -r / 2.0, -(3f64.sqrt()) * r / 2.0],
    ]
}

fn pentatope_points(c: f64) -> Vec<Vec<f64>> {
    let r = (1.0 - c * c).sqrt();
    // The four lower bodies form a regular tetrahedron on the 2-sphere of
    // radius r at x = -c, so s² = (8/9) r².
    let s = (8.0f64 / 9.0).sqrt() * r;
    vec![
        vec![1.0, 0.0, 0.0, 0.0],
        vec![-c, r, 0.0, 0.0],
        vec![-c, -r / 3.0, s, 0.0],
        vec![-c, -r / 3.0, -s / 2.0, 3f64.sqrt() * s / 2.0],
        vec![-c, -r / 3.0, -s / 2.0, -(3f64.sqrt()) * s / 2.0],
    ]
}

/// Builds the configuration and its stationary masses (normalized to unit
/// total mass).
pub fn build(spec: FamilySpec) -> Result<(Configuration, MassVector)> {
    match spec {
        FamilySpec::OddPolygon { k } => {
            if k < 1 {
                return Err(Error::Domain {
                    name: "k",
                    value: k as f64,
                    constraint: "k >= 1",
                });
            }
            let n = 2 * k + 1;
            let c = Configuration::new(1, odd_polygon_points(k))?;
            Ok((c, MassVector::uniform(n, 1.0 / n as f64)?))
        }
        FamilySpec::ComplementaryCircles { k1, k2 } => {
            for (name, k) in [("k1", k1), ("k2", k2)] {
                if k < 1 {
                    return Err(Error::Domain {
                        name,
                        value: k as f64,
                        constraint: "k >= 1",
                    });
                }
            }
            let mut points = Vec::new();
            for p in odd_polygon_points(k1) {
                points.push(vec![p[0], p[1], 0.0, 0.0]);
            }
            for p in odd_polygon_points(k2) {
                points.push(vec![0.0, 0.0, p[0], p[1]]);
            }
            let n = points.len();
            let c = Configuration::new(3, points)?;
            Ok((c, MassVector::uniform(n, 1.0 / n as f64)?))
        }
        FamilySpec::AcuteTriangle { alpha, beta } => {
            if !(alpha > 0.0 && alpha < PI) {
                return Err(Error::Domain {
                    name: "alpha",
                    value: alpha,
                    constraint: "0 < alpha < pi",
                });
            }
            if !(beta > 0.0 && beta < PI) {
                return Err(Error::Domain {
                    name: "beta",
                    value: beta,
                    constraint: "0 < beta < pi",
                });
            }
            let sum = alpha + beta;
            if !(sum > PI && sum < 2.0 * PI) {
                return Err(Error::Domain {
                    name: "alpha + beta",
                    value: sum,
                    constraint: "pi < alpha + beta < 2 pi",
                });
            }
            let c = Configuration::new(
                1,
                [0.0, alpha, sum]
                    .iter()
                    .map(|a| vec![a.cos(), a.sin()])
                    .collect(),
            )?;
            let (sa, sb, sab) = (alpha.sin(), beta.sin(), sum.sin());
            let m = MassVector::new(vec![
                sa * sa * sab * sab,
                sa * sa * sb * sb,
                sb * sb * sab * sab,
            ])?
            .normalized();
            Ok((c, m))
        }
        FamilySpec::TetraFamily { c } => {
            let f = mass_ratio(SimplexFamilyKind::Tetra, c)?;
            let cfg = Configuration::new(2, tetra_points(c))?;
            let m = MassVector::new(vec![f, 1.0, 1.0, 1.0])?.normalized();
            Ok((cfg, m))
        }
        FamilySpec::PentatopeFamily { c } => {
            let f = mass_ratio(SimplexFamilyKind::Pentatope, c)?;
            let cfg = Configuration::new(3, pentatope_points(c))?;
            let m = MassVector::new(vec![f, 1.0, 1.0, 1.0, 1.0])?.normalized();
            Ok((cfg, m))
        }
        FamilySpec::RegularSimplex { n_bodies } => {
            let cfg = match n_bodies {
                3 => Configuration::new(1, odd_polygon_points(1))?,
                4 => Configuration::new(2, tetra_points(1.0 / 3.0))?,
                5 => Configuration::new(3, pentatope_points(0.25))?,
                _ => {
                    return Err(Error::Domain {
                        name: "n_bodies",
                        value: n_bodies as f64,
                        constraint: "n_bodies in {3, 4, 5}",
                    })
                }
            };
            Ok((cfg, MassVector::uniform(n_bodies, 1.0 / n_bodies as f64)?))
        }
    }
}

/// Apex-to-base mass ratio of the one-parameter families:
/// 8√3 c / (3 (1+3c²)^{3/2}) for the tetrahedral family and
/// 27 c / (4√2 (1+2c²)^{3/2}) for the pentatopal one.
pub fn mass_ratio(kind: SimplexFamilyKind, c: f64) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::Domain {
            name: "c",
            value: c,
            constraint: "0 < c < 1",
        });
    }
    Ok(match kind {
        SimplexFamilyKind::Tetra => {
            8.0 * 3f64.sqrt() * c / (3.0 * (1.0 + 3.0 * c * c).powf(1.5))
        }
        SimplexFamilyKind::Pentatope => {
            27.0 * c / (4.0 * 2f64.sqrt() * (1.0 + 2.0 * c * c).powf(1.5))
        }
    })
}

/// Samples the mass-ratio curve on a uniform grid strictly inside (0, 1).
pub fn mass_ratio_curve(kind: SimplexFamilyKind, samples: usize) -> Result<Vec<(f64, f64)>> {
    if samples < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    (1..=samples)
        .map(|i| {
            let c = i as f64 / (samples + 1) as f64;
            Ok((c, mass_ratio(kind, c)?))
        })
        .collect()
}

/// The unique interior maximum of the mass-ratio curve, as (c, f(c)).
/// The derivative vanishes at 6c² = 1 (tetra) and 4c² = 1 (pentatope).
pub fn mass_ratio_max(kind: SimplexFamilyKind) -> (f64, f64) {
    match kind {
        SimplexFamilyKind::Tetra => (6f64.sqrt() / 6.0, 16.0 / (9.0 * 3f64.sqrt())),
        SimplexFamilyKind::Pentatope => (0.5, 3.0 * 3f64.sqrt() / 4.0),
    }
}

/// The second parameter (beyond the regular simplex) at which the family
/// carries equal masses: the root of f(c) = 1 past the maximum, found by
/// bisection to |f(c*) − 1| ≤ 1e-12.
pub fn second_equal_mass_root(kind: SimplexFamilyKind) -> f64 {
    let (c_max, _) = mass_ratio_max(kind);
    let f = |c: f64| mass_ratio(kind, c).expect("interior parameter") - 1.0;
    let mut lo = c_max;
    let mut hi = 1.0 - 1e-15;
    debug_assert!(f(lo) > 0.0 && f(hi) < 0.0);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
