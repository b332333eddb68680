#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use spillnet::{Date, VolatilityPanel};

pub fn day(i: usize) -> Date {
    Date::from_ymd_opt(2019, 1, 1).unwrap() + chrono::Days::new(i as u64)
}

pub fn firms(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("F{i:02}")).collect()
}

/// Simulates `x_t = c + Σ phi_ℓ x_{t−ℓ} + e_t` with independent normal
/// shocks, discarding a burn-in.
pub fn simulate_var(phi: &[Array2<f64>], c: &Array1<f64>, sd: f64, t: usize, seed: u64) -> Array2<f64> {
    let n = c.len();
    let p = phi.len();
    let burn = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    let mut x = Array2::<f64>::zeros((t + burn, n));
    for r in p..t + burn {
        let mut row = c.clone();
        for (l, m) in phi.iter().enumerate() {
            row = row + m.dot(&x.row(r - l - 1));
        }
        for j in 0..n {
            row[j] += noise.sample(&mut rng);
        }
        x.row_mut(r).assign(&row);
    }
    x.slice(ndarray::s![burn.., ..]).to_owned()
}

/// Stable sparse VAR(1) for log variances with a chain of spillovers.
pub fn synthetic_panel(n: usize, t: usize, seed: u64) -> VolatilityPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let u = Uniform::new(0.1, 0.3).unwrap();
    let mut phi = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        phi[[i, i]] = 0.4;
        phi[[i, (i + 1) % n]] = u.sample(&mut rng);
    }
    let c = Array1::from_elem(n, -8.0 * (1.0 - 0.4 - 0.2));
    let values = simulate_var(&[phi], &c, 0.5, t, seed);
    VolatilityPanel::new((0..t).map(day).collect(), firms(n), values).unwrap()
}
