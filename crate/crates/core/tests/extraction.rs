use std::f64::consts::PI;

use mfdoa::extraction::*;
use mfdoa::lifting::{toep, LiftingPlan, ToeplitzVector};
use mfdoa::linalg::{CMatrix, C64};
use mfdoa::model::{complex_gaussian, rng_from_seed, theta_to_w, w_to_theta, GeometryConfig};
use mfdoa::DoaError;
use proptest::prelude::*;
use rand::Rng;

fn node(w: f64) -> C64 {
    C64::from_polar(1.0, -2.0 * PI * w)
}

/// `Σ_k d_k w(γ, z_k) w(γ, z_k)ᴴ` with `w(γ, z)_i = z^{γ_i}`.
fn forward_t(gamma: &[usize], ws: &[f64], d: &[f64]) -> CMatrix {
    let n = gamma.len();
    let mut t = CMatrix::zeros(n, n);
    for (&w, &p) in ws.iter().zip(d) {
        let v: Vec<C64> = gamma.iter().map(|&g| node(w * g as f64)).collect();
        for i in 0..n {
            for j in 0..n {
                t[(i, j)] += v[i] * v[j].conj() * p;
            }
        }
    }
    t
}

/// Generator `u_k = Σ d z^{−k}` on `0..n`.
fn forward_u(n: usize, ws: &[f64], d: &[f64]) -> Vec<C64> {
    (0..n).map(|k| ws.iter().zip(d).map(|(&w, &p)| node(-w * k as f64) * p).sum()).collect()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Smallest circular distance between two directional cosines.
fn w_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

#[test]
fn eigen_split_cases() {
    let split = eigen_split(&CMatrix::identity(3), 1).unwrap();
    let ortho = split.u_s.adjoint().matmul(&split.u_n);
    assert!(ortho.frobenius_norm() < 1e-12);
    assert!(split.g.matmul(&split.g).max_abs_diff(&split.g) < 1e-12);

    let z: Vec<C64> = vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0)];
    let t = CMatrix::from_fn(3, 3, |i, j| z[i] * z[j].conj());
    let split = eigen_split(&t, 1).unwrap();
    let proj: C64 = (0..3).map(|i| split.u_s[(i, 0)].conj() * z[i]).sum();
    assert!((proj.norm() - 3f64.sqrt()).abs() < 1e-12);

    let mut rng = rng_from_seed(2);
    let f = CMatrix::from_fn(6, 2, |_, _| complex_gaussian(&mut rng));
    let t = f.matmul(&f.adjoint());
    let split = eigen_split(&t, 2).unwrap();
    assert!(split.g.matmul(&f).frobenius_norm() <= 1e-8);

    assert!(matches!(eigen_split(&t, 0), Err(DoaError::SubspaceDimension { .. })));
    assert!(matches!(eigen_split(&t, 6), Err(DoaError::SubspaceDimension { .. })));
}

#[test]
fn null_spectrum_vanishes_at_nodes_and_is_bounded() {
    let gamma = [0usize, 1, 3, 4, 9, 12, 16];
    let ws = [0.02, -0.03, -0.45];
    let t = forward_t(&gamma, &ws, &[1.0, 0.5, 2.0]);
    let split = eigen_split(&t, 3).unwrap();
    for &w in &ws {
        assert!(null_spectrum(&split, &gamma, node(w)) <= 1e-12);
    }
    for i in 0..500 {
        let z = C64::from_polar(1.0, -PI + 2.0 * PI * i as f64 / 500.0);
        let d = null_spectrum(&split, &gamma, z);
        assert!(d >= -1e-12 && d <= gamma.len() as f64 + 1e-9);
    }
    // K = N_u − 1: D̃ = |⟨u_N, w⟩|²
    let mut rng = rng_from_seed(8);
    let f = CMatrix::from_fn(7, 7, |_, _| complex_gaussian(&mut rng));
    let split = eigen_split(&f.matmul(&f.adjoint()), 6).unwrap();
    let z = node(0.123);
    let inner: C64 = gamma.iter().enumerate().map(|(i, &g)| split.u_n[(i, 0)].conj() * z.powi(g as i32)).sum();
    assert!((null_spectrum(&split, &gamma, z) - inner.norm_sqr()).abs() < 1e-12);
}

#[test]
fn extract_three_sources_on_sixteen() {
    let gamma: Vec<usize> = (0..16).collect();
    let truth = [88.0, 93.0, 155.0];
    let ws: Vec<f64> = truth.iter().map(|&t| theta_to_w(t).unwrap()).collect();
    let t = forward_t(&gamma, &ws, &[1.0, 1.0, 1.0]);
    let est = extract_doas(&t, &gamma, 3, &ExtractOptions::default()).unwrap();
    for (a, b) in est.thetas_deg.iter().zip(truth) {
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
    for p in &est.powers {
        assert!((p - 1.0).abs() < 1e-6);
    }
}

#[test]
fn extract_single_atom_exactly() {
    let gamma = [0usize, 2, 3, 7, 8];
    let w = theta_to_w(61.3).unwrap();
    let t = forward_t(&gamma, &[w], &[2.5]);
    let est = extract_doas(&t, &gamma, 1, &ExtractOptions::default()).unwrap();
    assert!((est.thetas_deg[0] - 61.3).abs() < 1e-8, "{}", est.thetas_deg[0] - 61.3);
    assert!((est.powers[0] - 2.5).abs() < 1e-8);
}

#[test]
fn extraction_fields_are_consistent() {
    let gamma: Vec<usize> = (0..10).collect();
    let ws = [-0.31, 0.05, 0.4];
    let est = extract_doas(&forward_t(&gamma, &ws, &[1.0, 2.0, 3.0]), &gamma, 3, &ExtractOptions::default()).unwrap();
    for i in 0..3 {
        assert!((est.z_hat[i] - node(est.w_hat[i])).norm() < 1e-10);
        assert!((w_to_theta(est.w_hat[i]).unwrap() - est.thetas_deg[i]).abs() < 1e-10);
        assert!(est.powers[i] >= 0.0);
    }
    assert!(est.thetas_deg.windows(2).all(|p| p[0] <= p[1]));
}

#[test]
fn overestimated_k_truncates_to_best_minima() {
    let gamma: Vec<usize> = (0..12).collect();
    let ws = [-0.2, 0.25];
    let t = forward_t(&gamma, &ws, &[1.0, 1.0]);
    let est = extract_doas(&t, &gamma, 4, &ExtractOptions::default()).unwrap();
    assert_eq!(est.k, 4);
    let kept = est.truncated(2);
    let expect = sorted(ws.iter().map(|&w| w_to_theta(w).unwrap()).collect());
    for (a, b) in kept.thetas_deg.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn flat_spectrum_is_degenerate() {
    // rank-one T = e_0 e_0ᴴ: D̃ ≡ N_u − 1, no isolated minimum
    let gamma: Vec<usize> = (0..6).collect();
    let mut t = CMatrix::zeros(6, 6);
    t[(0, 0)] = C64::new(1.0, 0.0);
    match extract_doas(&t, &gamma, 1, &ExtractOptions { grid_points: 256, refine_iters: 30 }) {
        Err(DoaError::DegenerateSpectrum { wanted: 1, .. }) => {}
        other => panic!("expected a degenerate spectrum, got {other:?}"),
    }
}

#[test]
fn null_spectrum_csv_is_nonnegative() {
    let gamma: Vec<usize> = vec![0, 1, 3, 4, 9, 12, 16];
    let t = forward_t(&gamma, &[0.02, -0.03, -0.45], &[1.0; 3]);
    let csv = null_spectrum_csv(&t, &gamma, 3, 1024).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("phi_rad,w,d_value"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 1024);
    assert!(rows.iter().all(|r| r.len() == 3 && r[2] >= 0.0));
}

#[test]
fn vandermonde_cases() {
    assert!(matches!(vandermonde_decompose(&CMatrix::identity(5), &ExtractOptions::default()), Err(DoaError::FullRank)));
    let ws = [0.1, -0.27];
    let t = toep(&forward_u(8, &ws, &[1.0, 2.0]));
    let dec = vandermonde_decompose(&t, &ExtractOptions::default()).unwrap();
    assert_eq!(dec.k, 2);
    // nodes come back ordered by θ, i.e. ascending φ = −2πw
    assert!((dec.nodes[0] - node(0.1)).norm() < 1e-8);
    assert!((dec.nodes[1] - node(-0.27)).norm() < 1e-8);
    assert!((dec.powers[0] - 1.0).abs() < 1e-8 && (dec.powers[1] - 2.0).abs() < 1e-8);
    assert!(dec.residual < 1e-8);

    let mut bad = CMatrix::identity(4);
    bad[(3, 3)] = C64::new(-1.0, 0.0);
    assert!(matches!(vandermonde_decompose(&bad, &ExtractOptions::default()), Err(DoaError::Indefinite { .. })));
}

#[test]
fn ivd_on_worked_geometry() {
    let plan = LiftingPlan::new(&GeometryConfig::new(vec![0, 1, 3, 4], vec![1, 3, 4], 100.0, 343.0).unwrap());
    let u = ToeplitzVector::full(forward_u(plan.n(), &[0.13, -0.31], &[1.0, 0.4]));
    let dec = ivd_reconstruct(&u, &plan, 2, &ExtractOptions::default()).unwrap();
    assert!(dec.residual <= 1e-6);
    assert_eq!(dec.w.shape(), (7, 2));

    let mut rng = rng_from_seed(12);
    let ws: Vec<f64> = vec![rng.random_range(-0.5..-0.2), rng.random_range(-0.1..0.1), rng.random_range(0.2..0.5)];
    let u = ToeplitzVector::full(forward_u(plan.n(), &ws, &[1.0, 2.0, 0.5]));
    assert!(ivd_reconstruct(&u, &plan, 3, &ExtractOptions::default()).unwrap().residual <= 1e-6);

    let mut e0 = vec![C64::new(0.0, 0.0); plan.n()];
    e0[0] = C64::new(3.0, 0.0);
    assert!(ivd_reconstruct(&ToeplitzVector::full(e0), &plan, 1, &ExtractOptions::default()).is_err());
}

#[test]
fn nnls_matches_unconstrained_when_interior() {
    // overdetermined, exact positive solution
    let a = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
    let x = nnls(&a, 3, 2, &[2.0, 3.0, 5.0]);
    assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
}

fn min_separated_ws(k: usize, sep: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    loop {
        let ws: Vec<f64> = (0..k).map(|_| rng.random_range(-0.499..0.499)).collect();
        let ok = (0..k).all(|i| (i + 1..k).all(|j| w_dist(ws[i], ws[j]) >= sep));
        if ok {
            return ws;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Any PSD Toeplitz generator of rank K below N_u gives an irregular
    /// Toeplitz matrix with an exact IVD on γ = 𝒰.
    #[test]
    fn ivd_exists_for_psd_generators(
        sensors in prop::collection::btree_set(0usize..8, 2..6),
        freqs in prop::collection::btree_set(1usize..5, 1..4),
        k_frac in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let g = GeometryConfig::new(sensors.into_iter().collect(), freqs.into_iter().collect(), 100.0, 343.0).unwrap();
        let plan = LiftingPlan::new(&g);
        prop_assume!(plan.n_u() >= 2);
        let k = 1 + ((plan.n_u() - 1) as f64 * k_frac) as usize % (plan.n_u() - 1);
        let ws = min_separated_ws(k, 1.5 / plan.n() as f64, seed);
        let mut rng = rng_from_seed(seed ^ 0xabc);
        let d: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
        let u = ToeplitzVector::full(forward_u(plan.n(), &ws, &d));
        let dec = ivd_reconstruct(&u, &plan, k, &ExtractOptions::default()).unwrap();
        prop_assert!(dec.residual <= 1e-6, "residual {} (N_u {}, K {})", dec.residual, plan.n_u(), k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn nodes_invariant_to_positive_scaling(alpha in 0.01f64..100.0, seed in any::<u64>()) {
        let gamma = [0usize, 1, 3, 4, 9, 12, 16];
        let ws = min_separated_ws(2, 0.1, seed);
        let t = forward_t(&gamma, &ws, &[1.0, 1.5]);
        let opts = ExtractOptions::default();
        let a = extract_doas(&t, &gamma, 2, &opts).unwrap();
        let b = extract_doas(&t.scale(alpha), &gamma, 2, &opts).unwrap();
        for (x, y) in a.w_hat.iter().zip(&b.w_hat) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    /// A real `T` has a spectrum symmetric in w, so each recovered node
    /// comes with its conjugate.
    #[test]
    fn real_t_gives_conjugate_closed_nodes(w in 0.05f64..0.45, p in 0.5f64..2.0) {
        let gamma: Vec<usize> = (0..9).collect();
        let t = forward_t(&gamma, &[w, -w], &[p, p]);
        prop_assert!(t.as_slice().iter().all(|c| c.im.abs() < 1e-12));
        let est = extract_doas(&t, &gamma, 2, &ExtractOptions::default()).unwrap();
        prop_assert!((est.z_hat[0] - est.z_hat[1].conj()).norm() < 1e-7);
    }
}
