use nlhelm_sparse::{factorize, Complex64, Factorizer, Method, SparseError, SparseMatrixC};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn rel_residual(m: &SparseMatrixC, x: &[Complex64], b: &[Complex64]) -> f64 {
    let ax = m.matvec(x).unwrap();
    let r: Vec<_> = ax.iter().zip(b).map(|(a, b)| a - b).collect();
    norm(&r) / norm(b)
}

/// Random sparse complex symmetric matrix with a dominant complex diagonal
/// shift, roughly like a damped Helmholtz operator.
fn random_symmetric(n: usize, per_row: usize, seed: u64) -> SparseMatrixC {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, c(rng.gen_range(-2.0..2.0), rng.gen_range(0.1..1.0))));
        for _ in 0..per_row {
            let j = rng.gen_range(0..n);
            if j != i {
                let v = c(rng.gen_range(-1.0..1.0), rng.gen_range(-0.2..0.2));
                t.push((i, j, v));
                t.push((j, i, v));
            }
        }
    }
    SparseMatrixC::from_triplets(n, &t).unwrap()
}

fn random_vec(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

/// 2D grid Helmholtz-like operator: 9-point Laplacian minus a shift plus an
/// absorbing diagonal on the border.
fn grid_helmholtz(m: usize, shift: f64) -> SparseMatrixC {
    let idx = |i: usize, j: usize| i * m + j;
    let mut t = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let border = i == 0 || j == 0 || i + 1 == m || j + 1 == m;
            let diag = c(8.0 / 3.0 - shift, if border { 0.5 } else { 0.0 });
            t.push((idx(i, j), idx(i, j), diag));
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a < 0 || b < 0 || a >= m as i64 || b >= m as i64 {
                        continue;
                    }
                    t.push((idx(i, j), idx(a as usize, b as usize), c(-1.0 / 3.0, 0.0)));
                }
            }
        }
    }
    SparseMatrixC::from_triplets(m * m, &t).unwrap()
}

#[test]
fn identity_solve_returns_rhs() {
    let m = SparseMatrixC::identity(7);
    let f = factorize(&m).unwrap();
    let b = random_vec(7, 1);
    let x = f.solve(&b).unwrap();
    for (xi, bi) in x.iter().zip(&b) {
        assert!((xi - bi).norm() < 1e-15);
    }
}

#[test]
fn two_by_two_complex_symmetric_hand_inverse() {
    // det = 2*1 - i*i = 3, inverse = (1/3) [[1, -i], [-i, 2]].
    let m = SparseMatrixC::from_dense(&[vec![c(2.0, 0.0), c(0.0, 1.0)], vec![c(0.0, 1.0), c(1.0, 0.0)]]).unwrap();
    let f = factorize(&m).unwrap();
    assert_eq!(f.method(), Method::Ldlt);
    let x = f.solve(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
    assert!((x[0] - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
    assert!((x[1] - c(0.0, -1.0 / 3.0)).norm() < 1e-15);
    // Substitution check.
    let back = m.matvec(&x).unwrap();
    assert!((back[0] - c(1.0, 0.0)).norm() < 1e-15 && back[1].norm() < 1e-15);
}

#[test]
fn random_50_complex_symmetric_residual() {
    let m = random_symmetric(50, 3, 7);
    let f = factorize(&m).unwrap();
    assert_eq!(f.method(), Method::Ldlt);
    let b = random_vec(50, 8);
    let x = f.solve(&b).unwrap();
    assert!(rel_residual(&m, &x, &b) <= 1e-10);
}

#[test]
fn zero_rhs_gives_zero_solution() {
    let m = random_symmetric(30, 2, 3);
    let f = factorize(&m).unwrap();
    let x = f.solve(&vec![c(0.0, 0.0); 30]).unwrap();
    assert!(x.iter().all(|v| *v == c(0.0, 0.0)));
}

#[test]
fn solve_rejects_wrong_rhs_length() {
    let f = factorize(&SparseMatrixC::identity(3)).unwrap();
    assert!(matches!(f.solve(&[c(1.0, 0.0)]), Err(SparseError::DimensionMismatch { .. })));
}

#[test]
fn matvec_matches_dense_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 20;
    let dense: Vec<Vec<Complex64>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    if rng.gen_bool(0.3) {
                        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    } else {
                        c(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect();
    let m = SparseMatrixC::from_dense(&dense).unwrap();
    let x = random_vec(n, 12);
    let y = m.matvec(&x).unwrap();
    for i in 0..n {
        let yi: Complex64 = (0..n).map(|j| dense[i][j] * x[j]).sum();
        assert!((yi - y[i]).norm() <= 1e-13);
    }
}

#[test]
fn factors_reconstruct_permuted_matrix() {
    let m = random_symmetric(40, 3, 21);
    let f = factorize(&m).unwrap();
    let ldlt = f.ldlt().expect("symmetric path");
    let (p, l, d) = ldlt.dense_factors();
    let n = m.dim();
    let a = m.to_dense();
    let scale = m.max_abs();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let rec: Complex64 = (0..n).map(|k| l[i][k] * d[k] * l[j][k]).sum();
            worst = worst.max((rec - a[p[i]][p[j]]).norm());
        }
    }
    assert!(worst <= 1e-10 * scale, "reconstruction error {worst:e}");
}

#[test]
fn grid_operator_with_many_fronts() {
    // 60x60 grid has several dissection levels and an indefinite real part.
    let m = grid_helmholtz(60, 0.35);
    let mut fz = Factorizer::new();
    let f = fz.factorize(&m).unwrap();
    assert_eq!(f.method(), Method::Ldlt);
    let sym = f.ldlt().unwrap().symbolic();
    assert!(sym.n_fronts() > 20);
    let b = random_vec(m.dim(), 5);
    let (x, rel) = f.solve_with_residual(&b).unwrap();
    assert!(rel <= 1e-10 && rel_residual(&m, &x, &b) <= 1e-10);

    // Second factorization with the same pattern reuses the analysis.
    let m2 = grid_helmholtz(60, 0.5);
    let f2 = fz.factorize(&m2).unwrap();
    assert!(std::sync::Arc::ptr_eq(f2.ldlt().unwrap().symbolic(), sym));
    let x2 = f2.solve(&b).unwrap();
    assert!(rel_residual(&m2, &x2, &b) <= 1e-10);
}

#[test]
fn factorization_is_deterministic() {
    let m = grid_helmholtz(30, 0.4);
    let b = random_vec(m.dim(), 9);
    let x1 = factorize(&m).unwrap().solve(&b).unwrap();
    let x2 = factorize(&m).unwrap().solve(&b).unwrap();
    assert!(x1.iter().zip(&x2).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn symmetric_bilinear_form_is_transpose_invariant(seed in 0u64..1000) {
        let m = random_symmetric(25, 3, seed);
        let x = random_vec(25, seed + 1);
        let y = random_vec(25, seed + 2);
        let mx = m.matvec(&x).unwrap();
        let my = m.matvec(&y).unwrap();
        let xmy: Complex64 = x.iter().zip(&my).map(|(a, b)| a * b).sum();
        let ymx: Complex64 = y.iter().zip(&mx).map(|(a, b)| a * b).sum();
        prop_assert!((xmy - ymx).norm() <= 1e-12 * xmy.norm().max(1.0));
    }

    #[test]
    fn random_symmetric_systems_solve_accurately(seed in 0u64..1000, n in 5usize..120) {
        let m = random_symmetric(n, 4, seed);
        let b = random_vec(n, seed ^ 0xabcd);
        let f = factorize(&m).unwrap();
        let x = f.solve(&b).unwrap();
        prop_assert!(rel_residual(&m, &x, &b) <= 1e-10);
    }
}
