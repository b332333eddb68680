#![allow(dead_code)]

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use spillnet::fevd::build_table;
use spillnet::layout::{positions_fingerprint, Point};
use spillnet::rolling::{ModelSummary, NetworkSnapshot, SnapshotMeta, STORE_VERSION};
use spillnet::{Date, VolatilityPanel};

pub fn day(i: usize) -> Date {
    let mut d = Date::from_ymd_opt(2019, 1, 1).unwrap();
    for _ in 0..i {
        d = d.succ_opt().unwrap();
    }
    d
}

pub fn firms(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("F{i:02}")).collect()
}

/// `x_t = c + Σ phi_ℓ x_{t−ℓ} + e_t` with independent normal shocks, after a
/// burn-in of 200 steps.
pub fn simulate_var(phi: &[Array2<f64>], c: &Array1<f64>, sd: f64, t: usize, seed: u64) -> Array2<f64> {
    let n = c.len();
    let burn = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    let mut x = Array2::<f64>::zeros((t + burn, n));
    for r in phi.len()..t + burn {
        let mut row = c.clone();
        for (l, m) in phi.iter().enumerate() {
            row = row + m.dot(&x.row(r - l - 1));
        }
        for v in row.iter_mut() {
            *v += noise.sample(&mut rng);
        }
        x.row_mut(r).assign(&row);
    }
    x.slice(ndarray::s![burn.., ..]).to_owned()
}

/// Log-variance panel from a stable sparse VAR(1) with a ring of spillovers.
pub fn synthetic_panel(n: usize, t: usize, seed: u64) -> VolatilityPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut phi = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        phi[[i, i]] = 0.4;
        phi[[i, (i + 1) % n]] = rng.random_range(0.1..0.3);
    }
    let c = Array1::from_elem(n, -8.0 * 0.4);
    let values = simulate_var(&[phi], &c, 0.5, t, seed);
    VolatilityPanel::new((0..t).map(day).collect(), firms(n), values).unwrap()
}

/// Random row-normalized decomposition in percent.
pub fn random_d(n: usize, rng: &mut impl Rng) -> Array2<f64> {
    let mut d = Array2::from_shape_fn((n, n), |_| rng.random_range(0.05..1.0));
    for mut row in d.rows_mut() {
        let s = row.sum();
        row.mapv_inplace(|v| v / s * 100.0);
    }
    d
}

/// A snapshot built directly from a decomposition matrix and positions.
pub fn snapshot(date: Date, d: Array2<f64>, names: Vec<String>, positions: Vec<Point>) -> NetworkSnapshot {
    let fp = positions_fingerprint(&positions);
    NetworkSnapshot {
        date,
        table: build_table(d, names, 10),
        positions,
        model_summary: ModelSummary {
            lambda: vec![],
            nonzero: vec![],
            median_nonzero_per_lag: vec![],
            converged: vec![],
        },
        meta: SnapshotMeta {
            version: STORE_VERSION,
            date,
            config_hash: "fixture".into(),
            window_start: date,
            window_end: date,
            degraded: false,
            failure: None,
            seed: None,
            seeded_from: None,
            initial_fingerprint: fp.clone(),
            final_fingerprint: fp,
            layout_converged_at: None,
        },
    }
}

pub fn write_meta_csv(path: &Path, rows: &[(&str, &str, &str, bool, &str, &str)]) {
    let mut s = String::from("ticker,name,region,state_owned,parent_ticker,share_class\n");
    for (t, n, r, so, p, c) in rows {
        s.push_str(&format!("{t},{n},{r},{so},{p},{c}\n"));
    }
    std::fs::write(path, s).unwrap();
}
