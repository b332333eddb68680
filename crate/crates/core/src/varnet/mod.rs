//! VAR(d) estimation by per-equation elastic net.
//!
//! Each firm's log-volatility is regressed on `d` lags of every firm. The
//! regressors are standardized, the penalty is chosen per equation by
//! contiguous-block cross-validation, and the coefficients are mapped back to
//! the original scale to form the lag matrices `phi[ℓ]`.

mod design;
mod elastic_net;

use std::io::Write;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use design::{build_lag_design, LagDesign};
pub use elastic_net::{
    cross_validate_lambda, elastic_net_fit, elastic_net_fit_warm, fit_along_path, fold_bounds, kkt_violation,
    lambda_grid, lambda_max, objective, CvResult, ElasticNetFit, SolverSettings,
};

/// How the penalty of each equation is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PenaltyChoice {
    CrossValidated,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarOptions {
    pub lags: usize,
    pub alpha: f64,
    pub folds: usize,
    pub lambda_count: usize,
    pub lambda_min_ratio: f64,
    pub penalty: PenaltyChoice,
    pub solver: SolverSettings,
}

impl Default for VarOptions {
    fn default() -> Self {
        Self {
            lags: 3,
            alpha: 0.5,
            folds: 10,
            lambda_count: 100,
            lambda_min_ratio: 1e-4,
            penalty: PenaltyChoice::CrossValidated,
            solver: SolverSettings::default(),
        }
    }
}

/// Fitted VAR for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    /// `phi[ℓ − 1][[i, j]]`: effect of firm `j` lagged `ℓ` on firm `i`.
    pub phi: Vec<Array2<f64>>,
    pub intercepts: Array1<f64>,
    /// Maximum-likelihood residual covariance `ε̂ᵀε̂ / T_eff`.
    pub sigma: Array2<f64>,
    pub lambda_selected: Vec<f64>,
    pub alpha: f64,
    pub converged: Vec<bool>,
    pub residuals: Array2<f64>,
}

impl VarModel {
    pub fn n_firms(&self) -> usize {
        self.intercepts.len()
    }

    pub fn lags(&self) -> usize {
        self.phi.len()
    }

    /// Non-zero coefficients in each lag matrix.
    pub fn nonzero_per_lag(&self) -> Vec<usize> {
        self.phi
            .iter()
            .map(|m| m.iter().filter(|&&v| v != 0.0).count())
            .collect()
    }

    /// `[[i, ℓ − 1]]`: non-zero coefficients of equation `i` at lag `ℓ`.
    pub fn nonzero_per_equation(&self) -> Array2<usize> {
        Array2::from_shape_fn((self.n_firms(), self.lags()), |(i, l)| {
            self.phi[l].row(i).iter().filter(|&&v| v != 0.0).count()
        })
    }

    /// Writes the non-zero coefficients as `lag,response_firm,regressor_firm,value`.
    pub fn write_coefficients_csv<W: Write>(&self, firms: &[String], writer: W) -> Result<()> {
        if firms.len() != self.n_firms() {
            return Err(Error::InvalidInput("firm list does not match model".into()));
        }
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["lag", "response_firm", "regressor_firm", "value"])?;
        for (l, m) in self.phi.iter().enumerate() {
            for ((i, j), &v) in m.indexed_iter() {
                if v != 0.0 {
                    csv.write_record([
                        (l + 1).to_string(),
                        firms[i].clone(),
                        firms[j].clone(),
                        v.to_string(),
                    ])?;
                }
            }
        }
        csv.flush().map_err(|e| Error::io("<coefficients>", e))?;
        Ok(())
    }
}

struct EquationFit {
    coefficients: Array1<f64>,
    intercept: f64,
    lambda: f64,
    converged: bool,
}

/// Fits the VAR on a `T × N` window of log variances.
pub fn fit_var(window: ArrayView2<f64>, options: &VarOptions) -> Result<VarModel> {
    // The CV grid is anchored at lambda_max, which needs a lasso component.
    if options.penalty == PenaltyChoice::CrossValidated && options.alpha <= 0.0 {
        return Err(Error::InvalidInput("cross-validated fits need alpha > 0".into()));
    }
    let design = build_lag_design(window, options.lags)?;
    let n = design.n_firms;

    let fits: Vec<EquationFit> = (0..n)
        .into_par_iter()
        .map(|i| fit_equation(&design, i, options))
        .collect::<Result<_>>()?;

    let mut phi = vec![Array2::zeros((n, n)); options.lags];
    let mut intercepts = Array1::zeros(n);
    let mut residuals = Array2::zeros(design.response.dim());
    for (i, fit) in fits.iter().enumerate() {
        // Back to the original scale.
        let beta = &fit.coefficients / &design.column_scales;
        intercepts[i] = fit.intercept - beta.dot(&design.column_means);
        for lag in 1..=options.lags {
            for j in 0..n {
                phi[lag - 1][[i, j]] = beta[design.column_index(lag, j)];
            }
        }
        let fitted = design.regressors.dot(&beta) + intercepts[i];
        residuals
            .column_mut(i)
            .assign(&(&design.response.column(i) - &fitted));
    }

    let rows = design.n_rows() as f64;
    let mut sigma = residuals.t().dot(&residuals) / rows;
    for i in 0..n {
        for j in 0..i {
            sigma[[i, j]] = sigma[[j, i]];
        }
    }

    Ok(VarModel {
        phi,
        intercepts,
        sigma,
        lambda_selected: fits.iter().map(|f| f.lambda).collect(),
        alpha: options.alpha,
        converged: fits.iter().map(|f| f.converged).collect(),
        residuals,
    })
}

fn fit_equation(design: &LagDesign, i: usize, options: &VarOptions) -> Result<EquationFit> {
    let x = design.standardized.view();
    let y = design.response.column(i);
    let fit = match options.penalty {
        PenaltyChoice::Fixed(lambda) => elastic_net_fit(x, y, options.alpha, lambda, &options.solver)?,
        PenaltyChoice::CrossValidated => {
            let lmax = lambda_max(x, y, options.alpha);
            if lmax <= 0.0 || !lmax.is_finite() {
                // Constant response or no usable regressor: intercept-only model.
                let mean = y.mean().expect("non-empty");
                return Ok(EquationFit {
                    coefficients: Array1::zeros(x.ncols()),
                    intercept: mean,
                    lambda: 0.0,
                    converged: true,
                });
            }
            let grid = lambda_grid(lmax, options.lambda_count, options.lambda_min_ratio);
            let cv = cross_validate_lambda(x, y, options.alpha, options.folds, &grid, &options.solver)?;
            fit_along_path(x, y, options.alpha, &grid, cv.index, &options.solver)?
        }
    };
    Ok(EquationFit {
        coefficients: fit.coefficients,
        intercept: fit.intercept,
        lambda: fit.lambda,
        converged: fit.converged,
    })
}

/// Sample covariance of the window's columns with `1/T` scaling.
pub fn ml_covariance(data: ArrayView2<f64>) -> Array2<f64> {
    let mean = data.mean_axis(Axis(0)).expect("non-empty");
    let c = &data - &mean;
    c.t().dot(&c) / data.nrows() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::s;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn simulate_var1(phi: &Array2<f64>, t: usize, seed: u64) -> Array2<f64> {
        let n = phi.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Array2::zeros((t, n));
        for r in 1..t {
            let prev = out.row(r - 1).to_owned();
            let shock = Array1::from_shape_fn(n, |_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            });
            out.row_mut(r).assign(&(phi.dot(&prev) + shock));
        }
        out
    }

    #[test]
    fn standardized_and_original_predictions_agree() {
        let phi = ndarray::array![[0.5, 0.2], [0.0, 0.3]];
        let data = simulate_var1(&phi, 120, 7) + 4.0;
        let opts = VarOptions {
            lags: 2,
            folds: 5,
            ..Default::default()
        };
        let design = build_lag_design(data.view(), 2).unwrap();
        let model = fit_var(data.view(), &opts).unwrap();
        for i in 0..2 {
            let f = fit_equation(&design, i, &opts).unwrap();
            let std_pred = design.standardized.dot(&f.coefficients) + f.intercept;
            let mut orig_pred = Array1::from_elem(design.n_rows(), model.intercepts[i]);
            for lag in 1..=2 {
                let block = design.regressors.slice(s![.., (lag - 1) * 2..lag * 2]);
                orig_pred = orig_pred + block.dot(&model.phi[lag - 1].row(i));
            }
            let diff = (&std_pred - &orig_pred)
                .mapv(f64::abs)
                .fold(0.0f64, |a, &b| a.max(b));
            assert!(diff < 1e-10, "{diff}");
        }
    }

    #[test]
    fn strong_penalty_gives_null_var() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = Array2::from_shape_fn((80, 3), |_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let opts = VarOptions {
            lags: 1,
            penalty: PenaltyChoice::Fixed(1e6),
            ..Default::default()
        };
        let model = fit_var(data.view(), &opts).unwrap();
        assert!(model.phi[0].iter().all(|&v| v == 0.0));
        let expected = ml_covariance(data.slice(s![1.., ..]));
        let diff = (&model.sigma - &expected).mapv(f64::abs).sum();
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn zero_penalty_matches_ols() {
        let phi = ndarray::array![[0.6, 0.2], [-0.3, 0.4]];
        let data = simulate_var1(&phi, 400, 11);
        let opts = VarOptions {
            lags: 1,
            penalty: PenaltyChoice::Fixed(0.0),
            ..Default::default()
        };
        let model = fit_var(data.view(), &opts).unwrap();
        // Normal equations with an intercept column, solved by Cramer's rule.
        let y = data.slice(s![1.., ..]);
        let x = data.slice(s![..-1, ..]);
        let rows = x.nrows();
        let mut z = Array2::ones((rows, 3));
        z.slice_mut(s![.., 1..]).assign(&x);
        let g = z.t().dot(&z);
        let ga = nalgebra::Matrix3::from_fn(|r, c| g[[r, c]]);
        let inv = ga.try_inverse().unwrap();
        for i in 0..2 {
            let b = z.t().dot(&y.column(i));
            let coef = inv * nalgebra::Vector3::new(b[0], b[1], b[2]);
            assert!((model.intercepts[i] - coef[0]).abs() < 1e-8);
            for j in 0..2 {
                assert!(
                    (model.phi[0][[i, j]] - coef[j + 1]).abs() < 1e-8,
                    "{} vs {}",
                    model.phi[0][[i, j]],
                    coef[j + 1]
                );
            }
        }
    }

    #[test]
    fn sigma_is_symmetric() {
        let phi = ndarray::array![[0.3, 0.1, 0.0], [0.0, 0.2, 0.1], [0.1, 0.0, 0.4]];
        let data = simulate_var1(&phi, 150, 2);
        let model = fit_var(data.view(), &VarOptions::default()).unwrap();
        assert_eq!(model.sigma, model.sigma.t());
        assert_eq!(model.lambda_selected.len(), 3);
        assert!(model.converged.iter().all(|&c| c));
    }

    #[test]
    fn coefficient_dump_lists_nonzeros() {
        let model = VarModel {
            phi: vec![ndarray::array![[0.5, 0.0], [0.0, -0.25]]],
            intercepts: Array1::zeros(2),
            sigma: Array2::<f64>::eye(2),
            lambda_selected: vec![0.1, 0.1],
            alpha: 0.5,
            converged: vec![true, true],
            residuals: Array2::zeros((0, 2)),
        };
        let mut buf = Vec::new();
        model
            .write_coefficients_csv(&["A".into(), "B".into()], &mut buf)
            .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "lag,response_firm,regressor_firm,value\n1,A,A,0.5\n1,B,B,-0.25\n"
        );
        assert_eq!(model.nonzero_per_lag(), vec![2]);
    }
}
