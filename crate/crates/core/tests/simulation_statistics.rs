//! Moment checks on single steps of both schemes, and statistical behaviour
//! of the estimators on simulated trajectories.

use msde_core::estimators::batch_estimate;
use msde_core::geometry::sphere_drift;
use msde_core::metrics::{diffusion_errors, drift_errors, median};
use msde_core::simulate::{
    rng_from_seed, simulate, DriftMode, PlaneIntegrator, RngPlaneNoise, RngSphereNoise, SphereIntegrator,
};
use msde_core::{EstimatorConfig, IntrinsicPoint, ManifoldSpec, Matrix, RadiusLaw, SimConfig, Trajectory, Vector};

fn sq(v: &[f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn unit(y: [f64; 3]) -> [f64; 3] {
    let n = sq(&y).sqrt();
    [y[0] / n, y[1] / n, y[2] / n]
}

#[test]
fn sphere_step_second_moment_matches_radius_law() {
    for (law, want) in [(RadiusLaw::Chi, 2.0), (RadiusLaw::Chi2, 8.0)] {
        let delta = 1e-4;
        let noise = RngSphereNoise::new(rng_from_seed(41), law);
        let mut integ = SphereIntegrator::new(unit([0.3, -0.5, 0.8]), delta, DriftMode::Model, noise);
        let steps = 40_000;
        let mut acc = 0.0;
        for _ in 0..steps {
            let y = integ.state();
            let mu = sphere_drift(&y);
            let next = integ.step().unwrap();
            let r = [
                next[0] - y[0] - delta * mu[0],
                next[1] - y[1] - delta * mu[1],
                next[2] - y[2] - delta * mu[2],
            ];
            acc += sq(&r) / delta;
        }
        let got = acc / steps as f64;
        assert!((got - want).abs() < 0.05 * want, "{law:?}: {got}");
        assert!((law.second_moment() - want).abs() < 1e-15);
    }
}

#[test]
fn drift_free_sphere_step_mean_is_the_retraction_correction() {
    // Normalization after a tangent step of length r√Δ pulls the point inward
    // by r²Δ/2 on average: E δY / Δ ≈ −(E r² / 2) Y.
    let start = unit([0.2, 0.6, -0.4]);
    let delta = 0.01;
    let mut rng = rng_from_seed(42);
    let trials = 400_000;
    let mut mean = [0.0; 3];
    for _ in 0..trials {
        let noise = RngSphereNoise::new(&mut rng, RadiusLaw::Chi);
        let mut integ = SphereIntegrator::new(start, delta, DriftMode::Zero, noise);
        let next = integ.step().unwrap();
        for i in 0..3 {
            mean[i] += (next[i] - start[i]) / delta / trials as f64;
        }
    }
    let rate = RadiusLaw::Chi.noise_rate();
    for i in 0..3 {
        assert!((mean[i] + rate * start[i]).abs() < 0.1, "{mean:?}");
    }
}

#[test]
fn plane_step_has_unit_covariance_rate() {
    let delta = 0.01;
    let mut rng = rng_from_seed(43);
    let trials = 100_000;
    let (mut m, mut c) = ([0.0; 2], [[0.0; 2]; 2]);
    for _ in 0..trials {
        let mut integ = PlaneIntegrator::new((3.0, 3.0), delta, DriftMode::Zero, RngPlaneNoise::new(&mut rng));
        let (u, v) = integ.step();
        let d = [u - 3.0, v - 3.0];
        for i in 0..2 {
            m[i] += d[i] / trials as f64;
            for j in 0..2 {
                c[i][j] += d[i] * d[j] / delta / trials as f64;
            }
        }
    }
    assert!(m[0].abs() < 0.003 && m[1].abs() < 0.003);
    assert!((c[0][0] - 1.0).abs() < 0.05 && (c[1][1] - 1.0).abs() < 0.05 && c[0][1].abs() < 0.05);
}

#[test]
fn ellipsoid_step_covariance_matches_true_diffusion() {
    let m = ManifoldSpec::ellipsoid(1.0, 2.0, 3.0).unwrap();
    let s = m.semi_axes().unwrap();
    let y0 = unit([0.5, -0.3, 0.7]);
    let q = IntrinsicPoint::sphere(y0);
    let x0 = m.embed(&q).unwrap();
    let delta = 1e-3;
    let mut rng = rng_from_seed(44);
    let trials = 200_000;
    let mut cov = Matrix::zeros(3, 3);
    for _ in 0..trials {
        let noise = RngSphereNoise::new(&mut rng, RadiusLaw::Chi);
        let next = SphereIntegrator::new(y0, delta, DriftMode::Model, noise)
            .step()
            .unwrap();
        let dx = Vector::from_iterator(3, (0..3).map(|i| s[i] * next[i] - x0[i]));
        cov += &dx * dx.transpose() / (delta * trials as f64);
    }
    let want = m.true_diffusion_with_rate(&q, RadiusLaw::Chi.noise_rate()).unwrap();
    assert!((&cov - &want).norm() < 0.05 * want.norm(), "{cov} vs {want}");
}

#[test]
fn klein_step_mean_matches_true_drift() {
    let m = ManifoldSpec::klein_bottle(2.0, 1.0).unwrap();
    let (u0, v0) = (1.1, 2.3);
    let q = IntrinsicPoint::angles(u0, v0);
    let x0 = m.embed(&q).unwrap();
    let delta = 0.01;
    let mut rng = rng_from_seed(45);
    let trials = 400_000;
    let mut mean = Vector::zeros(4);
    for _ in 0..trials {
        let mut integ = PlaneIntegrator::new((u0, v0), delta, DriftMode::Model, RngPlaneNoise::new(&mut rng));
        let (u, v) = integ.step();
        mean += (m.embed(&IntrinsicPoint::angles(u, v)).unwrap() - &x0) / (delta * trials as f64);
    }
    let p = m.tangent_projector(x0.as_slice()).unwrap();
    let want = m.true_drift(&q).unwrap();
    assert!((&p * &mean - &want).norm() < 0.25, "{} vs {want}", &p * &mean);
}

fn base_points(m: &ManifoldSpec, count: usize) -> Vec<(IntrinsicPoint, Vector)> {
    match m {
        ManifoldSpec::Ellipsoid { .. } => {
            // Fibonacci sphere
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    let q = IntrinsicPoint::sphere(unit([r * th.cos(), r * th.sin(), z]));
                    let x = m.embed(&q).unwrap();
                    (q, x)
                })
                .collect()
        }
        ManifoldSpec::KleinBottle { .. } => {
            let side = (count as f64).sqrt().ceil() as usize;
            msde_core::geometry::angle_grid(side, side, true)
                .into_iter()
                .map(|q| (q, m.embed(&q).unwrap()))
                .collect()
        }
    }
}

#[test]
fn projected_drift_beats_euclidean_drift_on_the_ellipsoid() {
    let m = ManifoldSpec::ellipsoid(1.0, 2.0, 3.0).unwrap();
    let rate = RadiusLaw::Chi.noise_rate();
    let pts = base_points(&m, 20);
    let xs: Vec<Vector> = pts.iter().map(|(_, x)| x.clone()).collect();
    let truth: Vec<Vector> = pts
        .iter()
        .map(|(q, _)| m.true_drift_with_rate(q, rate).unwrap())
        .collect();
    let sup = truth.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let (mut wins, mut seeds) = (0, 0);
    for seed in 0..50 {
        let t = simulate(&SimConfig::new(m, 20_000, 0.01, 1000 + seed)).unwrap();
        let est = batch_estimate(&t, &xs, &EstimatorConfig::new(0.25, 2)).unwrap();
        let (mut eo, mut ee) = (Vec::new(), Vec::new());
        for (e, mu) in est.iter().zip(&truth) {
            let Ok(e) = e else { continue };
            if let (Some(a), Some(b)) = (
                drift_errors(&e.mu_o, mu, sup, 0.05).unwrap().nrmse,
                drift_errors(&e.mu_e, mu, sup, 0.05).unwrap().nrmse,
            ) {
                eo.push(a);
                ee.push(b);
            }
        }
        seeds += 1;
        if median(&eo) < median(&ee) {
            wins += 1;
        }
    }
    assert!(wins >= 45, "projected drift won on {wins}/{seeds} seeds");
}

#[test]
fn diffusion_error_shrinks_with_trajectory_length() {
    let m = ManifoldSpec::sphere();
    let rate = RadiusLaw::Chi.noise_rate();
    let pts = base_points(&m, 20);
    let xs: Vec<Vector> = pts.iter().map(|(_, x)| x.clone()).collect();
    let truth: Vec<Matrix> = pts
        .iter()
        .map(|(q, _)| m.true_diffusion_with_rate(q, rate).unwrap())
        .collect();
    let mut medians = Vec::new();
    for (n, h) in [(1_000, 0.4), (10_000, 0.25), (100_000, 0.15)] {
        let mut errs = Vec::new();
        for seed in 0..20 {
            let t: Trajectory = simulate(&SimConfig::new(m, n, 0.01, 2000 + seed)).unwrap();
            let est = batch_estimate(&t, &xs, &EstimatorConfig::new(h, 2)).unwrap();
            for (e, pi) in est.iter().zip(&truth) {
                if let Ok(e) = e {
                    errs.push(diffusion_errors(&e.pi_hat, pi, 2).unwrap().frob_rel_err);
                }
            }
        }
        medians.push(median(&errs));
    }
    assert!(medians[0] > medians[1] && medians[1] > medians[2], "{medians:?}");
}

#[test]
fn simulation_is_reproducible_from_its_seed() {
    for m in [
        ManifoldSpec::ellipsoid(1.0, 2.0, 3.0).unwrap(),
        ManifoldSpec::klein_bottle(2.0, 1.0).unwrap(),
    ] {
        let a = simulate(&SimConfig::new(m, 2000, 0.01, 9)).unwrap();
        let b = simulate(&SimConfig::new(m, 2000, 0.01, 9)).unwrap();
        let c = simulate(&SimConfig::new(m, 2000, 0.01, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.as_slice(), c.as_slice());
        assert!(a.max_residual() < 1e-10);
    }
}
