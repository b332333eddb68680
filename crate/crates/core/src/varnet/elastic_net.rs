//! Elastic-net regression by cyclic coordinate descent, with K-fold
//! cross-validation over a descending penalty grid.
//!
//! The objective is
//!
//! ```text
//! (1 / 2n)·‖y − ȳ − Xβ‖² + λ·(α‖β‖₁ + (1 − α)/2·‖β‖²)
//! ```
//!
//! with an unpenalized intercept equal to the mean of `y`. `X` is expected to
//! be standardized already; the solver uses the actual column norms, so it
//! stays exact for any scaling.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Convergence threshold on the largest coefficient change in a full sweep.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Keep the objective value after every sweep in [`ElasticNetFit::objective_trace`].
    pub record_objective: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            max_sweeps: 100_000,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticNetFit {
    pub coefficients: Array1<f64>,
    pub intercept: f64,
    pub lambda: f64,
    pub alpha: f64,
    /// Number of coordinate sweeps performed (full and active-set).
    pub n_iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

fn check_penalty(alpha: f64, lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 1]")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "lambda {lambda} must be finite and >= 0"
        )));
    }
    Ok(())
}

/// Elastic-net objective at `beta` for an already centered response.
pub fn objective(
    x: ArrayView2<f64>,
    y_centered: ArrayView1<f64>,
    beta: ArrayView1<f64>,
    alpha: f64,
    lambda: f64,
) -> f64 {
    let n = x.nrows() as f64;
    let resid = &y_centered - &x.dot(&beta);
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2: f64 = beta.dot(&beta);
    resid.dot(&resid) / (2.0 * n) + lambda * (alpha * l1 + 0.5 * (1.0 - alpha) * l2)
}

/// Smallest penalty at which every coefficient is zero. Ridge (`alpha = 0`)
/// has no such point; the lasso-weighted value at `alpha = 0.001` is used.
pub fn lambda_max(x: ArrayView2<f64>, y: ArrayView1<f64>, alpha: f64) -> f64 {
    let n = x.nrows() as f64;
    let mean = y.mean().unwrap_or(0.0);
    let yc = y.mapv(|v| v - mean);
    let max_corr = x.t().dot(&yc).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    max_corr / (n * alpha.max(1e-3))
}

/// `count` log-spaced penalties from `lambda_max` down to
/// `min_ratio · lambda_max`, descending.
pub fn lambda_grid(lambda_max: f64, count: usize, min_ratio: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lambda_max],
        _ => {
            let (hi, lo) = (lambda_max.ln(), (lambda_max * min_ratio).ln());
            (0..count)
                .map(|k| {
                    if k == 0 {
                        lambda_max
                    } else {
                        (hi + (lo - hi) * k as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Coordinate-descent workspace for one design, reused along a penalty path.
///
/// When the design has no more columns than rows, coordinates are updated
/// through the Gram matrix (`O(p)` per change) instead of the residual
/// (`O(n)` per change).
struct Solver {
    /// `X` transposed so that each column is a contiguous row.
    xt: Array2<f64>,
    /// `XᵀX / n`, when used.
    gram: Option<Array2<f64>>,
    /// `‖x_j‖² / n`.
    col_sq: Vec<f64>,
    n: f64,
}

/// What coordinate descent keeps in step with `β`.
enum Tracker<'a> {
    Residual(&'a mut Array1<f64>),
    /// `Xᵀr / n`, plus the starting point to rebuild the residual from.
    Gradient {
        grad: Array1<f64>,
        gram: &'a Array2<f64>,
    },
}

impl Tracker<'_> {
    /// `x_jᵀr / n`.
    fn correlation(&self, solver: &Solver, j: usize) -> f64 {
        match self {
            Tracker::Residual(r) => solver.xt.row(j).dot(&**r) / solver.n,
            Tracker::Gradient { grad, .. } => grad[j],
        }
    }

    fn shift(&mut self, solver: &Solver, j: usize, change: f64) {
        match self {
            Tracker::Residual(r) => r.scaled_add(-change, &solver.xt.row(j)),
            Tracker::Gradient { grad, gram } => grad.scaled_add(-change, &gram.row(j)),
        }
    }
}

impl Solver {
    fn new(x: ArrayView2<f64>) -> Self {
        let xt = x.t().as_standard_layout().into_owned();
        let n = x.nrows() as f64;
        let col_sq = xt.rows().into_iter().map(|c| c.dot(&c) / n).collect();
        let gram = (x.ncols() <= x.nrows()).then(|| xt.dot(&x) / n);
        Self { xt, gram, col_sq, n }
    }

    /// Minimizes in place starting from `beta`; `resid` must equal `y_c − Xβ`
    /// and is kept in step with `beta`.
    fn solve(
        &self,
        beta: &mut Array1<f64>,
        resid: &mut Array1<f64>,
        alpha: f64,
        lambda: f64,
        settings: &SolverSettings,
    ) -> (usize, bool, Vec<f64>) {
        let Some(gram) = &self.gram else {
            return self.descend(beta, Tracker::Residual(resid), alpha, lambda, settings, |_, r| {
                r.dot(r)
            });
        };
        let start = beta.clone();
        let base = resid.clone();
        let rss = |beta: &Array1<f64>, _: &Array1<f64>| {
            let r = &base - &self.xt.t().dot(&(beta - &start));
            r.dot(&r)
        };
        let tracker = Tracker::Gradient {
            grad: self.xt.dot(&*resid) / self.n,
            gram,
        };
        let out = self.descend(beta, tracker, alpha, lambda, settings, rss);
        *resid -= &self.xt.t().dot(&(&*beta - &start));
        out
    }

    /// Cyclic coordinate descent alternating full and active-set sweeps.
    /// `rss(β, r)` is only evaluated when the objective is recorded.
    fn descend(
        &self,
        beta: &mut Array1<f64>,
        mut tracker: Tracker<'_>,
        alpha: f64,
        lambda: f64,
        settings: &SolverSettings,
        rss: impl Fn(&Array1<f64>, &Array1<f64>) -> f64,
    ) -> (usize, bool, Vec<f64>) {
        let p = self.col_sq.len();
        let l1 = lambda * alpha;
        let l2 = lambda * (1.0 - alpha);
        let mut trace = Vec::new();
        let mut sweeps = 0;
        let mut full_sweep = true;
        let record = |beta: &Array1<f64>, tracker: &Tracker<'_>, trace: &mut Vec<f64>| {
            if settings.record_objective {
                let empty = Array1::zeros(0);
                let r = match tracker {
                    Tracker::Residual(r) => &**r,
                    Tracker::Gradient { .. } => &empty,
                };
                let pen: f64 = beta.iter().map(|b| l1 * b.abs() + 0.5 * l2 * b * b).sum();
                trace.push(rss(beta, r) / (2.0 * self.n) + pen);
            }
        };
        record(beta, &tracker, &mut trace);

        while sweeps < settings.max_sweeps {
            sweeps += 1;
            let mut max_change = 0.0f64;
            for j in 0..p {
                if !full_sweep && beta[j] == 0.0 {
                    continue;
                }
                let denom = self.col_sq[j] + l2;
                let old = beta[j];
                let new = if denom > 0.0 {
                    let rho = tracker.correlation(self, j) + self.col_sq[j] * old;
                    soft_threshold(rho, l1) / denom
                } else {
                    0.0
                };
                if new != old {
                    tracker.shift(self, j, new - old);
                    beta[j] = new;
                    max_change = max_change.max((new - old).abs());
                }
            }
            record(beta, &tracker, &mut trace);
            let settled = max_change < settings.tolerance;
            match (full_sweep, settled) {
                (true, true) => return (sweeps, true, trace),
                (true, false) => full_sweep = false,
                // Active set settled: confirm with a sweep over every coordinate.
                (false, true) => full_sweep = true,
                (false, false) => {}
            }
        }
        (sweeps, false, trace)
    }
}

/// Fits the elastic net at a single penalty, starting from zero.
pub fn elastic_net_fit(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    alpha: f64,
    lambda: f64,
    settings: &SolverSettings,
) -> Result<ElasticNetFit> {
    elastic_net_fit_warm(x, y, alpha, lambda, None, settings)
}

/// As [`elastic_net_fit`], starting coordinate descent from `warm`.
pub fn elastic_net_fit_warm(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    alpha: f64,
    lambda: f64,
    warm: Option<ArrayView1<f64>>,
    settings: &SolverSettings,
) -> Result<ElasticNetFit> {
    check_penalty(alpha, lambda)?;
    if x.nrows() != y.len() || x.nrows() == 0 {
        return Err(Error::InvalidInput(format!(
            "design has {} rows but response has {}",
            x.nrows(),
            y.len()
        )));
    }
    let solver = Solver::new(x);
    let intercept = y.mean().expect("non-empty");
    let yc = y.mapv(|v| v - intercept);
    let mut beta = match warm {
        Some(w) if w.len() == x.ncols() => w.to_owned(),
        Some(w) => {
            return Err(Error::InvalidInput(format!(
                "warm start has {} coefficients, design has {}",
                w.len(),
                x.ncols()
            )))
        }
        None => Array1::zeros(x.ncols()),
    };
    let mut resid = &yc - &x.dot(&beta);
    let (n_iterations, converged, objective_trace) =
        solver.solve(&mut beta, &mut resid, alpha, lambda, settings);
    Ok(ElasticNetFit {
        coefficients: beta,
        intercept,
        lambda,
        alpha,
        n_iterations,
        converged,
        objective_trace,
    })
}

/// Largest violation of the elastic-net optimality conditions at `fit`.
///
/// For zero coefficients the gradient magnitude `|x_jᵀr/n|` may not exceed
/// `λα`; for active ones `x_jᵀr/n − λ(1−α)β_j` must equal `λα·sign(β_j)`.
pub fn kkt_violation(x: ArrayView2<f64>, y: ArrayView1<f64>, fit: &ElasticNetFit) -> f64 {
    let n = x.nrows() as f64;
    let resid = y.mapv(|v| v - fit.intercept) - x.dot(&fit.coefficients);
    let grad = x.t().dot(&resid) / n;
    let l1 = fit.lambda * fit.alpha;
    let l2 = fit.lambda * (1.0 - fit.alpha);
    grad.iter()
        .zip(fit.coefficients.iter())
        .map(|(&g, &b)| {
            if b == 0.0 {
                (g.abs() - l1).max(0.0)
            } else {
                (g - l2 * b - l1 * b.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub lambda: f64,
    pub index: usize,
    pub grid: Vec<f64>,
    /// Mean squared out-of-fold prediction error per grid point.
    pub errors: Vec<f64>,
}

/// Row range `[start, end)` of contiguous fold `k` out of `folds`.
pub fn fold_bounds(rows: usize, folds: usize, k: usize) -> (usize, usize) {
    (k * rows / folds, (k + 1) * rows / folds)
}

/// Picks the penalty with the smallest out-of-fold squared error.
///
/// Folds are contiguous row blocks. Each fold centres its training rows,
/// walks the grid with warm starts and scores the held-out block. Ties go to
/// the larger penalty.
pub fn cross_validate_lambda(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    alpha: f64,
    folds: usize,
    grid: &[f64],
    settings: &SolverSettings,
) -> Result<CvResult> {
    let rows = x.nrows();
    if folds < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {folds}")));
    }
    if rows < folds || rows != y.len() {
        return Err(Error::InvalidInput(format!(
            "{rows} rows cannot be split into {folds} folds"
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty penalty grid".into()));
    }
    if grid.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidInput("penalty grid must be descending".into()));
    }
    for &l in grid {
        check_penalty(alpha, l)?;
    }

    let mean = y.mean().expect("non-empty");
    if y.iter().all(|&v| v == mean) {
        return Ok(CvResult {
            lambda: grid[0],
            index: 0,
            grid: grid.to_vec(),
            errors: vec![0.0; grid.len()],
        });
    }

    let fold_errors: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|k| fold_path_errors(x, y, alpha, grid, fold_bounds(rows, folds, k), settings))
        .collect();

    let mut errors = vec![0.0; grid.len()];
    for fe in &fold_errors {
        for (e, v) in errors.iter_mut().zip(fe) {
            *e += v;
        }
    }
    for e in errors.iter_mut() {
        *e /= rows as f64;
    }
    let mut index = 0;
    for (g, &e) in errors.iter().enumerate() {
        if e < errors[index] {
            index = g;
        }
    }
    Ok(CvResult {
        lambda: grid[index],
        index,
        grid: grid.to_vec(),
        errors,
    })
}

/// Sum of squared held-out errors along the grid for one fold.
fn fold_path_errors(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    alpha: f64,
    grid: &[f64],
    (start, end): (usize, usize),
    settings: &SolverSettings,
) -> Vec<f64> {
    let rows = x.nrows();
    let train: Vec<usize> = (0..start).chain(end..rows).collect();
    let x_train = x.select(Axis(0), &train);
    let y_train = y.select(Axis(0), &train);
    let x_means = x_train.mean_axis(Axis(0)).expect("non-empty training fold");
    let y_mean = y_train.mean().expect("non-empty training fold");
    let xc = &x_train - &x_means;
    let yc = y_train.mapv(|v| v - y_mean);
    let x_test = x.slice(ndarray::s![start..end, ..]);
    let x_test_c = &x_test - &x_means;
    let y_test = y.slice(ndarray::s![start..end]);

    let solver = Solver::new(xc.view());
    let mut beta = Array1::zeros(x.ncols());
    let mut resid = yc.clone();
    grid.iter()
        .map(|&lambda| {
            solver.solve(&mut beta, &mut resid, alpha, lambda, settings);
            let pred = x_test_c.dot(&beta);
            y_test
                .iter()
                .zip(pred.iter())
                .map(|(&yt, &p)| (yt - y_mean - p).powi(2))
                .sum()
        })
        .collect()
}

/// Fits the full path down to `grid[upto]` with warm starts and returns the
/// final fit. Equivalent to a cold fit at that penalty, only faster.
pub fn fit_along_path(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    alpha: f64,
    grid: &[f64],
    upto: usize,
    settings: &SolverSettings,
) -> Result<ElasticNetFit> {
    if upto >= grid.len() {
        return Err(Error::InvalidInput(format!(
            "path index {upto} outside grid of {}",
            grid.len()
        )));
    }
    for &l in &grid[..=upto] {
        check_penalty(alpha, l)?;
    }
    if x.nrows() != y.len() || x.nrows() == 0 {
        return Err(Error::InvalidInput("design and response lengths differ".into()));
    }
    let solver = Solver::new(x);
    let intercept = y.mean().expect("non-empty");
    let yc = y.mapv(|v| v - intercept);
    let mut beta = Array1::zeros(x.ncols());
    let mut resid = yc;
    let mut n_iterations = 0;
    let mut last = (true, Vec::new());
    for &lambda in &grid[..=upto] {
        let (sweeps, converged, trace) = solver.solve(&mut beta, &mut resid, alpha, lambda, settings);
        n_iterations += sweeps;
        last = (converged, trace);
    }
    Ok(ElasticNetFit {
        coefficients: beta,
        intercept,
        lambda: grid[upto],
        alpha,
        n_iterations,
        converged: last.0,
        objective_trace: last.1,
    })
}
