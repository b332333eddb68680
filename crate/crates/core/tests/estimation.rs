mod common;

use ndarray::array;
use spillnet::fevd::{connectedness, gfevd, impulse_responses, normalize_rows};
use spillnet::varnet::{fit_var, PenaltyChoice, VarOptions};

#[test]
fn recovers_sparse_chain_and_yields_valid_table() {
    let panel = common::synthetic_panel(5, 400, 11);
    let opts = VarOptions {
        lags: 1,
        folds: 5,
        ..Default::default()
    };
    let model = fit_var(panel.values().view(), &opts).unwrap();
    assert!(model.converged.iter().all(|&c| c));
    // Own lags and the chain links are strong enough to survive.
    for i in 0..5 {
        assert!(
            model.phi[0][[i, i]] > 0.2,
            "own lag {i}: {}",
            model.phi[0][[i, i]]
        );
        assert!(model.phi[0][[i, (i + 1) % 5]] > 0.03);
    }

    let table = connectedness(&model, panel.firms(), 10).unwrap();
    for row in table.d.rows() {
        assert!((row.sum() - 100.0).abs() < 1e-9);
        assert!(row.iter().all(|&v| v >= 0.0));
    }
    assert!((table.to_others.sum() - table.from_others.sum()).abs() < 1e-9);
    assert!(table.net.sum().abs() < 1e-9);
    assert!(table.total > 0.0 && table.total < 100.0);
}

#[test]
fn fixed_penalty_is_reproducible() {
    let panel = common::synthetic_panel(4, 150, 3);
    let opts = VarOptions {
        lags: 2,
        penalty: PenaltyChoice::Fixed(0.01),
        ..Default::default()
    };
    let a = fit_var(panel.values().view(), &opts).unwrap();
    let b = fit_var(panel.values().view(), &opts).unwrap();
    assert_eq!(a, b);
    assert!(a.lambda_selected.iter().all(|&l| l == 0.01));
}

#[test]
fn diagonal_system_has_no_spillover() {
    let phi = vec![array![[0.5, 0.0], [0.0, -0.3]]];
    let sigma = array![[1.0, 0.0], [0.0, 2.0]];
    let irf = impulse_responses(&phi, 8).unwrap();
    let d = normalize_rows(&gfevd(&irf, &sigma).unwrap()).unwrap();
    assert_eq!(d, array![[100.0, 0.0], [0.0, 100.0]]);
}

#[test]
fn single_lag_irf_is_matrix_power() {
    let m = array![[0.3, 0.1, 0.0], [0.0, 0.2, 0.4], [0.1, 0.0, 0.5]];
    let irf = impulse_responses(std::slice::from_ref(&m), 6).unwrap();
    let mut power = ndarray::Array2::<f64>::eye(3);
    for h in 0..6 {
        let diff = (&irf.matrices()[h] - &power).mapv(f64::abs).sum();
        assert!(diff < 1e-14, "h={h}: {diff}");
        power = power.dot(&m);
    }
}
