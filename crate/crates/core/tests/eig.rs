use mfdoa::eig::{hermitian_eig, jacobi_symmetric_eig, real_embed, real_extract};
use mfdoa::{CMatrix, DoaError, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).hermitian_part()
}

#[test]
fn diagonal_sorted() {
    let e = hermitian_eig(&CMatrix::from_diag(&[3.0, 1.0, 2.0])).unwrap();
    assert_eq!(e.values.len(), 3);
    for (v, t) in e.values.iter().zip([1.0, 2.0, 3.0]) {
        assert!((v - t).abs() < 1e-14);
    }
}

#[test]
fn reconstruction_and_orthonormality() {
    for (seed, n) in [(1, 8), (2, 1), (3, 2), (4, 30), (5, 64)] {
        let m = random_hermitian(n, seed);
        let e = hermitian_eig(&m).unwrap();
        let scale = m.frobenius_norm();
        assert!(e.reconstruct().max_abs_diff(&m) <= 1e-10 * scale, "n = {n}");
        let g = e.vectors.adjoint().matmul(&e.vectors);
        assert!(g.max_abs_diff(&CMatrix::identity(n)) <= 1e-12, "n = {n}");
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn degenerate_and_low_rank() {
    // rank one with repeated zero eigenvalue
    let v: Vec<C64> = (0..6).map(|k| C64::from_polar(1.0, 0.3 * k as f64)).collect();
    let m = mfdoa::linalg::outer(&v, &v);
    let e = hermitian_eig(&m).unwrap();
    assert!((e.values[5] - 6.0).abs() < 1e-12);
    assert!(e.values[..5].iter().all(|x| x.abs() < 1e-12));
    assert!(e.reconstruct().max_abs_diff(&m) < 1e-12);
}

#[test]
fn jacobi_agrees_with_householder() {
    let m = random_hermitian(6, 11);
    let e = hermitian_eig(&m).unwrap();
    let (vals, _) = jacobi_symmetric_eig(&real_embed(&m)).unwrap();
    // every eigenvalue appears twice in the embedding
    let mut expect: Vec<f64> = e.values.iter().flat_map(|&v| [v, v]).collect();
    expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut got = vals.clone();
    got.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (a, b) in got.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-11);
    }
}

#[test]
fn embedding_properties() {
    let a = random_hermitian(5, 21);
    let b = random_hermitian(5, 22);
    assert_eq!(real_extract(&real_embed(&a)).unwrap(), a);
    let ea = real_embed(&a);
    let eb = real_embed(&b);
    assert!((a.inner_real(&b) - 0.5 * ea.inner(&eb)).abs() < 1e-12);
    let id = real_embed(&CMatrix::identity(3));
    for i in 0..6 {
        for j in 0..6 {
            assert_eq!(id[(i, j)], if i == j { 1.0 } else { 0.0 });
        }
    }
    // j·I embeds as [[0, −I], [I, 0]]
    let j = CMatrix::identity(2).scale(1.0);
    let jm = CMatrix::from_fn(2, 2, |r, c| if r == c { C64::new(0.0, 1.0) } else { j[(r, c)] });
    let ej = real_embed(&jm);
    assert_eq!(ej[(0, 2)], -1.0);
    assert_eq!(ej[(2, 0)], 1.0);
}

#[test]
fn rejects_bad_input() {
    let mut m = CMatrix::identity(3);
    m[(0, 1)] = C64::new(1.0, 0.0);
    assert!(matches!(hermitian_eig(&m), Err(DoaError::Domain { .. })));
    m[(0, 1)] = C64::new(f64::NAN, 0.0);
    assert!(matches!(hermitian_eig(&m), Err(DoaError::NonFinite(_))));
}
