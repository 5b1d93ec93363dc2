use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use splinekit::constraints::{BlockLabel, ConstraintBlock};
use splinekit::lsq::{LsqConfig, LsqError, ObjectiveTerm, QuadraticProgram};
use splinekit::sparse::SparseMatrix;

type Dense = Vec<Vec<f64>>;

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn gauss_solve(mut a: Dense, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let m = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= m * a[k][j];
            }
            b[i] -= m * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

/// KKT system `[A^T A, C^T; C, 0] [c; y] = [A^T f; g]`.
fn kkt_oracle(a: &Dense, f: &[f64], c: &Dense, g: &[f64]) -> Vec<f64> {
    let n = a[0].len();
    let m = c.len();
    let mut k = vec![vec![0.0; n + m]; n + m];
    let mut rhs = vec![0.0; n + m];
    for i in 0..n {
        for j in 0..n {
            k[i][j] = a.iter().map(|row| row[i] * row[j]).sum();
        }
        rhs[i] = a.iter().zip(f).map(|(row, fi)| row[i] * fi).sum();
    }
    for (r, row) in c.iter().enumerate() {
        for j in 0..n {
            k[n + r][j] = row[j];
            k[j][n + r] = row[j];
        }
        rhs[n + r] = g[r];
    }
    gauss_solve(k, rhs)[..n].to_vec()
}

fn sparse(a: &Dense) -> SparseMatrix {
    let t: Vec<(usize, usize, f64)> = a
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(j, &v)| (i, j, v)))
        .collect();
    SparseMatrix::from_triplets(a.len(), a[0].len(), &t).unwrap()
}

fn random_dense(rows: usize, cols: usize, density: f64, rng: &mut impl Rng) -> Dense {
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| if rng.random::<f64>() < density { rng.random_range(-1.0..1.0) } else { 0.0 })
                .collect()
        })
        .collect()
}

fn program(a: &Dense, f: &[f64], c: &Dense, g: &[f64]) -> QuadraticProgram {
    let mut qp = QuadraticProgram::new(a[0].len());
    qp.terms.push(ObjectiveTerm {
        matrix: sparse(a),
        rhs: f.to_vec(),
        weight: 1.0,
    });
    if !c.is_empty() {
        qp.equalities.push(ConstraintBlock {
            matrix: sparse(c),
            rhs: g.to_vec(),
            label: BlockLabel::Interp,
        });
    }
    qp
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unconstrained_matches_normal_equations(seed in 0u64..10_000, n in 2usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_dense(2 * n + 5, n, 0.6, &mut rng);
        let f: Vec<f64> = (0..a.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let want = kkt_oracle(&a, &f, &Vec::new(), &[]);
        let got = program(&a, &f, &Vec::new(), &[]).solve(&LsqConfig::default()).unwrap();
        prop_assert!(max_diff(&got.c, &want) < 1e-9, "{}", max_diff(&got.c, &want));
    }

    #[test]
    fn constrained_matches_kkt(seed in 0u64..10_000, n in 4usize..40, mfrac in 0.1..0.6f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = ((n as f64 * mfrac) as usize).max(1);
        let a = random_dense(2 * n, n, 0.7, &mut rng);
        let f: Vec<f64> = (0..a.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = random_dense(m, n, 0.8, &mut rng);
        let g: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let want = kkt_oracle(&a, &f, &c, &g);
        let qp = program(&a, &f, &c, &g);
        let cfg = LsqConfig::default();
        let al = qp.solve(&cfg).unwrap();
        let direct = qp.solve_direct(&cfg).unwrap();
        prop_assert!(al.iterations <= 3);
        prop_assert!(al.constraint_violation <= 1e-8);
        prop_assert!(max_diff(&al.c, &want) < 1e-7, "al {}", max_diff(&al.c, &want));
        prop_assert!(max_diff(&direct.c, &want) < 1e-8, "direct {}", max_diff(&direct.c, &want));
    }

    #[test]
    fn matrix_market_round_trip(seed in 0u64..10_000, r in 1usize..20, c in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = sparse(&random_dense(r, c, 0.3, &mut rng));
        let back = SparseMatrix::parse_matrix_market(&a.to_matrix_market()).unwrap();
        prop_assert_eq!(back.nrows(), r);
        prop_assert_eq!(back.ncols(), c);
        let x: Vec<f64> = (0..c).map(|i| i as f64 - 3.5).collect();
        prop_assert_eq!(a.mul_vec(&x), back.mul_vec(&x));
    }
}

/// Projection onto `null(C)` by the normal equations of `C C^T`.
fn project_null(c: &Dense, v: &[f64]) -> Vec<f64> {
    let m = c.len();
    let cct: Dense = (0..m)
        .map(|i| (0..m).map(|j| c[i].iter().zip(&c[j]).map(|(x, y)| x * y).sum()).collect())
        .collect();
    let cv: Vec<f64> = c.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect();
    let y = gauss_solve(cct, cv);
    let mut out = v.to_vec();
    for (yi, row) in y.iter().zip(c) {
        for (o, r) in out.iter_mut().zip(row) {
            *o -= yi * r;
        }
    }
    out
}

#[test]
fn minimizer_survives_feasible_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = 30;
    let a = random_dense(70, n, 0.5, &mut rng);
    let f: Vec<f64> = (0..70).map(|_| rng.random_range(-1.0..1.0)).collect();
    let c = random_dense(8, n, 0.8, &mut rng);
    let g: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let qp = program(&a, &f, &c, &g);
    let rep = qp.solve(&LsqConfig::default()).unwrap();
    let base = qp.objective(&rep.c);
    for _ in 0..50 {
        let dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dir = project_null(&c, &dir);
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let moved: Vec<f64> = rep.c.iter().zip(&dir).map(|(x, d)| x + 1e-3 * d / norm).collect();
        assert!(qp.objective(&moved) >= base - 1e-10);
    }
}

#[test]
fn multiplier_start_does_not_change_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 25;
    let a = random_dense(60, n, 0.5, &mut rng);
    let f: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
    let c = random_dense(6, n, 0.8, &mut rng);
    let g: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let qp = program(&a, &f, &c, &g);
    let cfg = LsqConfig::default();
    let from_zero = qp.solve(&cfg).unwrap();
    let shift: Vec<f64> = (0..6).map(|_| rng.random_range(-0.01..0.01)).collect();
    let shifted = qp.solve_shifted(&cfg, Some(&shift)).unwrap();
    assert!(max_diff(&from_zero.c, &shifted.c) < 1e-8);
}

#[test]
fn inconsistent_constraints_are_infeasible() {
    let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let c = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
    let err = program(&a, &[0.0, 0.0], &c, &[0.0, 1.0])
        .solve(&LsqConfig::default())
        .unwrap_err();
    assert!(matches!(err, LsqError::Infeasible { .. }));
}

#[test]
fn energy_term_shrinks_toward_its_null_space() {
    // min |c - f|^2 + lambda |c_1 - c_0|^2 pulls the two entries together
    let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let mut qp = program(&a, &[0.0, 1.0], &Vec::new(), &[]);
    qp.terms.push(ObjectiveTerm {
        matrix: sparse(&vec![vec![-1.0, 1.0]]),
        rhs: vec![0.0],
        weight: 100.0,
    });
    let rep = qp.solve(&LsqConfig::default()).unwrap();
    // exact: c0 = 100/201, c1 = 101/201
    assert!((rep.c[0] - 100.0 / 201.0).abs() < 1e-12);
    assert!((rep.c[1] - 101.0 / 201.0).abs() < 1e-12);
}
