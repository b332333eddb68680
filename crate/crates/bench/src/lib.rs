//! Deterministic inputs shared by the benchmarks.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spillnet::fevd::build_table;
use spillnet::ConnectednessTable;

/// `t × n` sample of a stable VAR(1) with one spillover per firm.
pub fn var_sample(n: usize, t: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::<f64>::zeros((t + 100, n));
    for r in 1..t + 100 {
        for i in 0..n {
            let prev = 0.5 * x[[r - 1, i]] + 0.2 * x[[r - 1, (i + 1) % n]];
            x[[r, i]] = prev + rng.random_range(-1.0..1.0);
        }
    }
    x.slice(ndarray::s![100.., ..]).to_owned()
}

/// Random design and response with a handful of true effects.
pub fn regression(rows: usize, cols: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0));
    let y = Array1::from_shape_fn(rows, |r| {
        x[[r, 0]] - 0.5 * x[[r, 1]] + 0.25 * x[[r, 2]] + 0.3 * rng.random_range(-1.0..1.0)
    });
    (x, y)
}

/// Lag matrices of a stable VAR(`lags`) on `n` firms.
pub fn lag_matrices(n: usize, lags: usize, seed: u64) -> Vec<Array2<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..lags)
        .map(|_| Array2::from_shape_fn((n, n), |_| rng.random_range(-0.3..0.3) / n as f64))
        .collect()
}

pub fn covariance(n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0));
    b.t().dot(&b) + Array2::<f64>::eye(n)
}

/// Percent-normalized random connectedness table.
pub fn random_table(n: usize, seed: u64) -> ConnectednessTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..1.0));
    for mut row in d.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| 100.0 * v / s);
    }
    let firms = (0..n).map(|i| format!("F{i:03}")).collect();
    build_table(d, firms, 10)
}
