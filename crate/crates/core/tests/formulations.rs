use std::f64::consts::PI;

use mfdoa::eig::hermitian_eig;
use mfdoa::extraction::{extract_doas, ExtractOptions};
use mfdoa::formulations::*;
use mfdoa::lifting::{toep, LiftingPlan};
use mfdoa::linalg::{CMatrix, C64};
use mfdoa::model::*;
use mfdoa::solver::{SolveOptions, SolveStatus};
use mfdoa::DoaError;

fn tight() -> SolveOptions {
    SolveOptions { tol: 1e-8, max_iter: 200_000, ..Default::default() }
}

fn zero_measurement(g: &GeometryConfig, n_l: usize) -> MeasurementTensor {
    MeasurementTensor::new(vec![CMatrix::zeros(g.n_sensors(), n_l); g.n_freqs()], g.clone()).unwrap()
}

fn instance(g: &GeometryConfig, thetas: Vec<f64>, n_l: usize, seed: u64) -> MeasurementTensor {
    let k = thetas.len();
    let s = SourceSet::with_gaussian_amplitudes(thetas, vec![1.0; k], g.n_freqs(), n_l, seed).unwrap();
    synthesize(g, &s, n_l, None, 0).unwrap()
}

#[test]
fn zero_measurement_gives_zero_optimum() {
    let g = GeometryConfig::uniform(4, 2).unwrap();
    let plan = LiftingPlan::new(&g);
    let y = zero_measurement(&g, 1);
    for est in [Estimator::FastPrimal, Estimator::FullPrimal] {
        let r = solve_primal(&y, &plan, est, &SolveOptions::default()).unwrap();
        assert!(r.objective.abs() < 1e-9, "{est}: {}", r.objective);
        assert!(r.u.values.iter().all(|v| v.norm() < 1e-9));
        assert!(r.w.frobenius_norm() < 1e-9);
        let d = solve_dual(&y, &plan, est, &SolveOptions::default()).unwrap();
        assert!(d.objective.abs() < 1e-9);
    }
    assert_eq!(rank_of_solution(&y, &plan, &SolveOptions::default()).unwrap(), 0);
}

#[test]
fn program_dimensions() {
    let g = GeometryConfig::uniform(4, 2).unwrap();
    let plan = LiftingPlan::new(&g);
    let y = zero_measurement(&g, 1);
    assert_eq!(build_fast_primal(&y, &plan).unwrap().blocks, vec![6 + 2]);
    assert_eq!(build_full_primal(&y, &plan).unwrap().blocks, vec![7 + 2]);

    let g = GeometryConfig::new(vec![0, 1, 3, 4], vec![1, 3, 4], 100.0, 343.0).unwrap();
    let plan = LiftingPlan::new(&g);
    let y = zero_measurement(&g, 1);
    let r = solve_primal(&y, &plan, Estimator::FastPrimal, &SolveOptions::default()).unwrap();
    assert_eq!(r.y_tilde.shape(), (plan.n_u(), g.n_freqs()));
    assert_eq!(r.w.shape(), (g.n_freqs(), g.n_freqs()));
    assert!(matches!(build_full_primal(&y, &plan), Err(DoaError::Unsupported(_))));
    assert!(matches!(build_dual_uniform(&y, &plan), Err(DoaError::Unsupported(_))));

    let g = GeometryConfig::uniform(4, 5).unwrap();
    let plan = LiftingPlan::new(&g);
    assert_eq!(build_full_primal(&zero_measurement(&g, 1), &plan).unwrap().blocks, vec![16 + 5]);
}

#[test]
fn mismatched_geometry_is_rejected() {
    let plan = LiftingPlan::new(&GeometryConfig::uniform(4, 2).unwrap());
    let y = zero_measurement(&GeometryConfig::uniform(5, 2).unwrap(), 1);
    assert!(build_fast_primal(&y, &plan).is_err());
}

#[test]
fn dual_constraint_count() {
    let g = GeometryConfig::uniform(3, 2).unwrap();
    let plan = LiftingPlan::new(&g);
    let n_l = 1;
    let y = zero_measurement(&g, n_l);
    let p = build_dual_uniform(&y, &plan).unwrap();
    let n = plan.n();
    let n_c = n_l * g.n_freqs();
    let trace_pattern = 1 + 2 * (n - 1);
    let identity = n_c + n_c * (n_c - 1);
    let pinned: usize = (0..g.n_freqs()).map(|fi| 2 * n_l * (n - plan.rows_r(fi).len())).sum();
    assert_eq!((n, trace_pattern, identity, pinned), (5, 9, 4, 8));
    assert_eq!(p.n_constraints(), trace_pattern + identity + pinned);
}

#[test]
fn fast_and_full_agree_when_product_set_is_complete() {
    // N_M = 2, ℱ = {1,2,3}: 𝒰 = {0,1,2,3}
    let g = GeometryConfig::uniform(2, 3).unwrap();
    let plan = LiftingPlan::new(&g);
    assert_eq!(plan.n_u(), plan.n());
    let y = instance(&g, vec![70.0, 125.0], 1, 4);
    let fast = solve_primal(&y, &plan, Estimator::FastPrimal, &tight()).unwrap();
    let full = solve_primal(&y, &plan, Estimator::FullPrimal, &tight()).unwrap();
    assert_eq!(fast.info.status, SolveStatus::Optimal);
    assert_eq!(full.info.status, SolveStatus::Optimal);
    assert!((fast.objective - full.objective).abs() <= 1e-5 * full.objective.abs());
}

#[test]
fn solved_primal_invariants() {
    let g = GeometryConfig::new(vec![0, 1, 3, 4], vec![1, 3, 4], 100.0, 343.0).unwrap();
    let plan = LiftingPlan::new(&g);
    let y = instance(&g, vec![60.0, 100.0], 2, 9);
    let opts = SolveOptions::default();
    let r = solve_primal(&y, &plan, Estimator::FastPrimal, &opts).unwrap();
    assert_eq!(r.info.status, SolveStatus::Optimal);
    let scale = r.info.data_scale;
    assert!(r.recovery_defect(&y, &plan).unwrap() <= 10.0 * opts.tol * scale);
    assert!(r.tying_defect(&plan).unwrap() <= 10.0 * opts.tol * scale);
    assert!(r.min_block_eig >= -10.0 * opts.tol * scale);
    assert!(r.u.values[0].im == 0.0);
    for k in plan.free_indices() {
        assert_eq!(r.u.values[k], C64::new(0.0, 0.0));
    }
    assert_eq!(r.gamma, plan.u_set());
}

#[test]
fn single_source_closed_form() {
    let g = GeometryConfig::new(vec![0, 1, 2], vec![1], 100.0, 343.0).unwrap();
    let plan = LiftingPlan::new(&g);
    let theta = 72.5;
    let y = instance(&g, vec![theta], 1, 1);
    let r = solve_primal(&y, &plan, Estimator::FastPrimal, &tight()).unwrap();
    let t = r.t_matrix(&plan).unwrap();
    let eig = hermitian_eig(&t.scale(1.0 / r.info.data_scale)).unwrap();
    assert_eq!(numerical_rank(&eig.values), 1, "{:?}", eig.values);
    let est = extract_doas(&t, &r.gamma, 1, &ExtractOptions::default()).unwrap();
    assert!((est.z_hat[0] - theta_to_z(theta).unwrap()).norm() < 1e-5);
    // one atom c·a·xᵀ with ‖x‖ = 1 and ‖a‖² = N_m: Tr(T) + Tr(W) = 2·√N_u·c
    let c = y.hs_norm() / (g.n_sensors() as f64).sqrt();
    let expect = 2.0 * (plan.n_u() as f64).sqrt() * c;
    assert!((r.objective - expect).abs() < 1e-5 * expect, "{} vs {}", r.objective, expect);
}

#[test]
fn strong_duality_single_source() {
    let g = GeometryConfig::uniform(3, 2).unwrap();
    let plan = LiftingPlan::new(&g);
    let y = instance(&g, vec![50.0], 1, 2);
    for est in [Estimator::FastPrimal, Estimator::FullPrimal] {
        let rep = verify_duality_gap(&y, &plan, est, &tight()).unwrap();
        assert_eq!(rep.primal_status, SolveStatus::Optimal);
        assert_eq!(rep.dual_status, SolveStatus::Optimal);
        assert!(rep.relative_gap <= 1e-4, "{est}: {rep:?}");
    }
}

#[test]
fn dual_polynomial_paths_agree() {
    let g = GeometryConfig::new(vec![0, 2, 3, 7], vec![1, 2, 5], 100.0, 343.0).unwrap();
    let plan = LiftingPlan::new(&g);
    let mut rng = rng_from_seed(6);
    let q: Vec<CMatrix> = (0..3).map(|_| CMatrix::from_fn(4, 2, |_, _| complex_gaussian(&mut rng))).collect();
    for i in 0..50 {
        let w = -0.5 + i as f64 / 50.0;
        let p = dual_polynomial(&q, w, &plan).unwrap();
        assert!(p.path_defect < 1e-12);
        // direct oracle for one entry
        let f = g.freq_indices()[1];
        let direct: C64 = g
            .sensor_indices()
            .iter()
            .enumerate()
            .map(|(mi, &m)| q[1][(mi, 0)].conj() * C64::from_polar(1.0, -2.0 * PI * w * (f * m) as f64))
            .sum();
        assert!((p.psi[(1, 0)] - direct).norm() < 1e-12);
    }
    let zero: Vec<CMatrix> = (0..3).map(|_| CMatrix::zeros(4, 2)).collect();
    let p = dual_polynomial(&zero, 0.2, &plan).unwrap();
    assert_eq!(p.frob_norm, 0.0);
    assert_eq!(p.r_w, 1.0);
    assert!(dual_polynomial(&zero[..2], 0.2, &plan).is_err());
}

#[test]
fn dual_certificate_is_bounded_and_peaks_at_sources() {
    let g = GeometryConfig::uniform(6, 2).unwrap();
    let plan = LiftingPlan::new(&g);
    let thetas = vec![60.0, 120.0];
    let y = instance(&g, thetas.clone(), 1, 3);
    for est in [Estimator::FastPrimal, Estimator::FullPrimal] {
        let d = solve_dual(&y, &plan, est, &tight()).unwrap();
        assert_eq!(d.info.status, SolveStatus::Optimal);
        assert!(d.trace_pattern_defect(&plan) < 1e-6);
        assert!((dual_objective(&d.q, &y) - d.objective).abs() < 1e-6 * d.objective.abs());
        for i in 0..10_000 {
            let w = -0.5 + i as f64 / 10_000.0;
            assert!(dual_polynomial(&d.q, w, &plan).unwrap().r_w >= -1e-6, "{est} w = {w}");
        }
        for &t in &thetas {
            let p = dual_polynomial(&d.q, theta_to_w(t).unwrap(), &plan).unwrap();
            assert!((p.frob_norm - 1.0).abs() < 1e-3, "{est} θ = {t}: {}", p.frob_norm);
        }
    }
}

#[test]
fn rank_matches_source_count() {
    let g = GeometryConfig::uniform(8, 2).unwrap();
    let plan = LiftingPlan::new(&g);
    let opts = SolveOptions { tol: 1e-8, max_iter: 200_000, ..Default::default() };
    for (k, thetas) in [(1, vec![75.0]), (2, vec![60.0, 100.0])] {
        let s = SourceSet::with_gaussian_amplitudes(thetas, vec![1.0; k], 2, 1, 10 + k as u64).unwrap();
        let (rank, kk) = atomic_l0_ranktest(&s, &plan, &opts).unwrap();
        assert_eq!((rank, kk), (k, k));
    }
    assert_eq!(numerical_rank(&[1e-7, 0.5, 2.0]), 2);
    assert_eq!(rank_threshold(1e3), 1e-5);
    assert_eq!(rank_threshold(1.0), 1e-6);
}

#[test]
fn toep_of_full_solution_is_psd() {
    let g = GeometryConfig::uniform(4, 3).unwrap();
    let plan = LiftingPlan::new(&g);
    let y = instance(&g, vec![40.0, 95.0, 140.0], 3, 5);
    let r = solve_primal(&y, &plan, Estimator::FullPrimal, &SolveOptions::default()).unwrap();
    let eig = hermitian_eig(&toep(&r.u.values)).unwrap();
    assert!(eig.values[0] >= -1e-5 * r.info.data_scale);
}

mod invariants {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn fast_primal_solutions_are_feasible(
            sensors in prop::collection::btree_set(0usize..7, 2..5),
            freqs in prop::collection::btree_set(1usize..4, 1..3),
            theta in 20.0f64..160.0,
            n_l in 1usize..3,
            seed in any::<u64>(),
        ) {
            let g = GeometryConfig::new(sensors.into_iter().collect(), freqs.into_iter().collect(), 100.0, 343.0).unwrap();
            let plan = LiftingPlan::new(&g);
            let y = instance(&g, vec![theta], n_l, seed);
            let opts = SolveOptions::default();
            let r = solve_primal(&y, &plan, Estimator::FastPrimal, &opts).unwrap();
            prop_assert_eq!(r.info.status, SolveStatus::Optimal);
            let scale = r.info.data_scale;
            prop_assert!(r.recovery_defect(&y, &plan).unwrap() <= 10.0 * opts.tol * scale);
            prop_assert!(r.tying_defect(&plan).unwrap() <= 10.0 * opts.tol * scale);
            prop_assert!(r.min_block_eig >= -10.0 * opts.tol * scale);
        }
    }
}
