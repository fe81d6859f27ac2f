//! Independent finite-difference and closed-form oracles for the geometry
//! module, plus invariants checked on many random points.

use std::f64::consts::TAU;

use msde_core::geometry::{klein_drift, reduce_fundamental_domain, sphere_drift};
use msde_core::simulate::rng_from_seed;
use msde_core::{IntrinsicPoint, KleinEmbedding, ManifoldSpec, Matrix, Vector};
use rand::Rng;

const FD_STEP: f64 = 1e-4;

fn klein_point(m: &ManifoldSpec, u: f64, v: f64) -> Vector {
    m.embed(&IntrinsicPoint::angles(u, v)).unwrap()
}

/// Central differences of the embedding: first and pure second derivatives.
fn klein_fd(m: &ManifoldSpec, u: f64, v: f64) -> (Vector, Vector, Vector, Vector) {
    let h = FD_STEP;
    let c = klein_point(m, u, v);
    let up = klein_point(m, u + h, v);
    let um = klein_point(m, u - h, v);
    let vp = klein_point(m, u, v + h);
    let vm = klein_point(m, u, v - h);
    (
        (&up - &um) / (2.0 * h),
        (&vp - &vm) / (2.0 * h),
        (&up - 2.0 * &c + &um) / (h * h),
        (&vp - 2.0 * &c + &vm) / (h * h),
    )
}

/// Orthogonal projector onto the column span via nalgebra's SVD.
/// Orthogonal projector onto the column span, from the eigenvectors of `AAᵀ`
/// with non-negligible eigenvalues. (nalgebra's special-cased 3×3 SVD loses
/// accuracy on rank-deficient input, so it is not used here.)
fn span_projector(cols: &[Vector]) -> Matrix {
    let a = Matrix::from_columns(cols);
    let rows = a.nrows();
    let eig = (&a * a.transpose()).symmetric_eigen();
    let top = eig.eigenvalues.max();
    let mut p = Matrix::zeros(rows, rows);
    for (j, l) in eig.eigenvalues.iter().enumerate() {
        if *l > 1e-10 * top {
            let c = eig.eigenvectors.column(j);
            p += c * c.transpose();
        }
    }
    p
}

fn random_angles<R: Rng>(rng: &mut R) -> (f64, f64) {
    (rng.random::<f64>() * TAU, rng.random::<f64>() * TAU)
}

fn random_unit<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let y: [f64; 3] = [
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        ];
        let n = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        if n > 0.1 && n <= 1.0 {
            return [y[0] / n, y[1] / n, y[2] / n];
        }
    }
}

#[test]
fn klein_jacobian_matches_central_differences() {
    for embedding in [KleinEmbedding::Standard, KleinEmbedding::SineRadial] {
        let m = ManifoldSpec::klein_bottle_with(2.0, 1.0, embedding).unwrap();
        let mut rng = rng_from_seed(11);
        for _ in 0..200 {
            let (u, v) = random_angles(&mut rng);
            let j = m.klein_jacobian(&IntrinsicPoint::angles(u, v)).unwrap();
            let (du, dv, _, _) = klein_fd(&m, u, v);
            assert!((j.column(0) - du).norm() < 1e-6, "du at ({u}, {v})");
            assert!((j.column(1) - dv).norm() < 1e-6, "dv at ({u}, {v})");
        }
    }
}

#[test]
fn klein_truth_fields_match_finite_difference_construction() {
    let m = ManifoldSpec::klein_bottle(2.0, 1.0).unwrap();
    let mut rng = rng_from_seed(12);
    for rate in [1.0, 4.0] {
        for _ in 0..200 {
            let (u, v) = random_angles(&mut rng);
            let q = IntrinsicPoint::angles(u, v);
            let (du, dv, duu, dvv) = klein_fd(&m, u, v);
            let p = span_projector(&[du.clone(), dv.clone()]);
            let mu = klein_drift(u, v);
            let want_drift = &du * mu[0] + &dv * mu[1] + 0.5 * rate * (&p * (duu + dvv));
            let want_diff = (&du * du.transpose() + &dv * dv.transpose()) * rate;
            let got_drift = m.true_drift_with_rate(&q, rate).unwrap();
            let got_diff = m.true_diffusion_with_rate(&q, rate).unwrap();
            assert!((got_drift - want_drift).norm() < 1e-5 * rate.max(1.0));
            assert!((got_diff - want_diff).norm() < 1e-6 * rate.max(1.0));
            let x = m.embed(&q).unwrap();
            assert!((m.tangent_projector(x.as_slice()).unwrap() - p).norm() < 1e-7);
        }
    }
}

#[test]
fn ellipsoid_fields_match_pushforward_construction() {
    let m = ManifoldSpec::ellipsoid(1.0, 2.0, 3.0).unwrap();
    let s = m.semi_axes().unwrap();
    let sm = Matrix::from_diagonal(&Vector::from_column_slice(&s));
    let mut rng = rng_from_seed(13);
    for rate in [1.0, 4.0] {
        for _ in 0..200 {
            let y = random_unit(&mut rng);
            let yv = Vector::from_column_slice(&y);
            let q = IntrinsicPoint::sphere(y);
            let x = m.embed(&q).unwrap();
            // tangent plane of the sphere pushed forward by S
            let p_sphere = Matrix::identity(3, 3) - &yv * yv.transpose();
            let e1 = p_sphere.column(0).into_owned();
            let e2 = p_sphere.column(1).into_owned();
            let e3 = p_sphere.column(2).into_owned();
            let p = span_projector(&[&sm * e1, &sm * e2, &sm * e3]);
            assert!((m.tangent_projector(x.as_slice()).unwrap() - &p).norm() < 1e-10);

            // Itô drift of S·Y with dY = μ_l dt + noise, E dY includes −rate·Y
            let ambient_drift = &sm * Vector::from_column_slice(&sphere_drift(&y)) - rate * &x;
            let want_drift = &p * ambient_drift;
            let want_diff = &sm * p_sphere * &sm * rate;
            assert!((m.true_drift_with_rate(&q, rate).unwrap() - want_drift).norm() < 1e-10);
            assert!((m.true_diffusion_with_rate(&q, rate).unwrap() - want_diff).norm() < 1e-10);
        }
    }
}

#[test]
fn invariants_on_random_points() {
    let manifolds = [
        ManifoldSpec::sphere(),
        ManifoldSpec::ellipsoid(1.0, 2.0, 3.0).unwrap(),
        ManifoldSpec::ellipsoid(0.5, 1.0, 4.0).unwrap(),
        ManifoldSpec::klein_bottle(2.0, 1.0).unwrap(),
        ManifoldSpec::klein_bottle(3.0, 0.5).unwrap(),
    ];
    let mut rng = rng_from_seed(14);
    for m in &manifolds {
        let d = m.intrinsic_dim();
        for _ in 0..1000 {
            let q = match m {
                ManifoldSpec::Ellipsoid { .. } => IntrinsicPoint::sphere(random_unit(&mut rng)),
                ManifoldSpec::KleinBottle { .. } => {
                    let (u, v) = random_angles(&mut rng);
                    IntrinsicPoint::angles(u, v)
                }
            };
            let x = m.embed(&q).unwrap();
            assert!(m.residual(x.as_slice()) < 1e-12);
            let back = m.intrinsic_of(x.as_slice()).unwrap();
            assert!((m.embed(&back).unwrap() - &x).norm() < 1e-10);

            let p = m.tangent_projector(x.as_slice()).unwrap();
            assert!((&p * &p - &p).norm() < 1e-10);
            assert!((&p - p.transpose()).norm() < 1e-12);
            assert!((p.trace() - d as f64).abs() < 1e-10);

            let mu = m.true_drift(&q).unwrap();
            assert!((&p * &mu - &mu).norm() < 1e-10 * mu.norm().max(1.0));
            let pi = m.true_diffusion(&q).unwrap();
            assert!((&p * &pi - &pi).norm() < 1e-10 * pi.norm().max(1.0));
            assert!((&pi - pi.transpose()).norm() < 1e-12 * pi.norm().max(1.0));
            let eig = pi.clone().symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|l| *l > -1e-10));
        }
    }
}

#[test]
fn reduction_preserves_the_standard_embedding() {
    let m = ManifoldSpec::klein_bottle(2.0, 1.0).unwrap();
    let mut rng = rng_from_seed(15);
    for _ in 0..1000 {
        let u = rng.random::<f64>() * 40.0 - 20.0;
        let v = rng.random::<f64>() * 40.0 - 20.0;
        let (ur, vr) = reduce_fundamental_domain(u, v);
        assert!((0.0..TAU).contains(&ur) && (0.0..TAU).contains(&vr));
        let a = klein_point(&m, u, v);
        let b = klein_point(&m, ur, vr);
        assert!((a - b).norm() < 1e-11, "({u}, {v}) -> ({ur}, {vr})");
    }
}

#[test]
fn deck_transformations_fix_the_standard_embedding() {
    let m = ManifoldSpec::klein_bottle(2.0, 1.0).unwrap();
    let mut rng = rng_from_seed(16);
    for _ in 0..1000 {
        let (u, v) = random_angles(&mut rng);
        let x = klein_point(&m, u, v);
        assert!((klein_point(&m, u, v + TAU) - &x).norm() < 1e-12);
        assert!((klein_point(&m, u + TAU, -v) - &x).norm() < 1e-12);
    }
}

#[test]
fn sine_radial_map_is_not_deck_invariant() {
    let m = ManifoldSpec::klein_bottle_with(2.0, 1.0, KleinEmbedding::SineRadial).unwrap();
    let x = klein_point(&m, 0.3, 0.7);
    assert!((klein_point(&m, 0.3 + TAU, -0.7) - x).norm() > 0.5);
}
