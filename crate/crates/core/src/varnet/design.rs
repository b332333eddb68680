use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::{Error, Result};

/// Response and lagged-regressor matrices for one estimation window.
///
/// Row `r` corresponds to window row `t = r + lags`. Regressor columns are
/// grouped by lag: column `(ℓ − 1)·N + j` holds firm `j` lagged `ℓ` days.
#[derive(Debug, Clone)]
pub struct LagDesign {
    pub lags: usize,
    pub n_firms: usize,
    pub response: Array2<f64>,
    pub regressors: Array2<f64>,
    /// `(regressors − mean) / scale`, column-wise.
    pub standardized: Array2<f64>,
    pub column_means: Array1<f64>,
    pub column_scales: Array1<f64>,
    /// Columns with zero sample deviation; their scale is forced to 1.
    pub constant_columns: Vec<usize>,
}

impl LagDesign {
    pub fn n_rows(&self) -> usize {
        self.response.nrows()
    }

    pub fn column_index(&self, lag: usize, firm: usize) -> usize {
        debug_assert!(lag >= 1 && lag <= self.lags && firm < self.n_firms);
        (lag - 1) * self.n_firms + firm
    }
}

pub fn build_lag_design(window: ArrayView2<f64>, lags: usize) -> Result<LagDesign> {
    let (t, n) = window.dim();
    if lags == 0 {
        return Err(Error::Design("lag order must be at least 1".into()));
    }
    if t <= lags {
        return Err(Error::Design(format!(
            "window of {t} rows leaves no observations for {lags} lags"
        )));
    }
    let rows = t - lags;
    let response = window.slice(s![lags.., ..]).to_owned();
    let mut regressors = Array2::zeros((rows, n * lags));
    for lag in 1..=lags {
        regressors
            .slice_mut(s![.., (lag - 1) * n..lag * n])
            .assign(&window.slice(s![lags - lag..t - lag, ..]));
    }

    let column_means = regressors.mean_axis(Axis(0)).expect("non-empty design");
    let mut column_scales = Array1::ones(n * lags);
    let mut constant_columns = Vec::new();
    for (k, col) in regressors.columns().into_iter().enumerate() {
        let sd = if rows > 1 { col.std(1.0) } else { 0.0 };
        // Relative threshold: a column equal up to rounding is constant.
        if sd > 1e-12 * column_means[k].abs().max(1.0) {
            column_scales[k] = sd;
        } else {
            constant_columns.push(k);
        }
    }
    let mut standardized = &regressors - &column_means;
    standardized /= &column_scales;
    for &k in &constant_columns {
        standardized.column_mut(k).fill(0.0);
    }

    Ok(LagDesign {
        lags,
        n_firms: n,
        response,
        regressors,
        standardized,
        column_means,
        column_scales,
        constant_columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn shift_identity_t5_n2_d1() {
        let w = array![[1.0, 10.0], [2.0, 20.0], [3.0, 30.0], [4.0, 40.0], [5.0, 50.0]];
        let d = build_lag_design(w.view(), 1).unwrap();
        assert_eq!(d.response.dim(), (4, 2));
        assert_eq!(d.regressors.dim(), (4, 2));
        for r in 0..4 {
            assert_eq!(d.regressors.row(r), w.row(r));
            assert_eq!(d.response.row(r), w.row(r + 1));
        }
    }

    #[test]
    fn lag_blocks_are_shifted_responses() {
        let w = Array2::from_shape_fn((12, 3), |(t, j)| (t * 7 + j * 3) as f64 + (t * j) as f64 * 0.1);
        let d = build_lag_design(w.view(), 3).unwrap();
        for lag in 1..=3 {
            for j in 0..3 {
                let k = d.column_index(lag, j);
                for r in 0..d.n_rows() {
                    assert_eq!(d.regressors[[r, k]], w[[r + 3 - lag, j]]);
                }
            }
        }
    }

    #[test]
    fn dimensions_for_ninety_seven_firms() {
        let w = Array2::from_shape_fn((103, 97), |(t, j)| ((t * 31 + j * 17) % 101) as f64);
        let d = build_lag_design(w.view(), 3).unwrap();
        assert_eq!(d.n_rows(), 100);
        assert_eq!(d.regressors.ncols(), 291);
    }

    #[test]
    fn lag_equal_to_window_is_an_error() {
        let w = Array2::<f64>::zeros((3, 2));
        assert!(build_lag_design(w.view(), 3).is_err());
        assert!(build_lag_design(w.view(), 0).is_err());
    }

    #[test]
    fn constant_column_is_flagged_with_unit_scale() {
        let w = array![[1.0, 5.0], [2.0, 5.0], [4.0, 5.0], [3.0, 5.0]];
        let d = build_lag_design(w.view(), 1).unwrap();
        assert_eq!(d.constant_columns, vec![1]);
        assert_eq!(d.column_scales[1], 1.0);
        assert!(d.standardized.column(1).iter().all(|&v| v == 0.0));
        let z = d.standardized.column(0);
        assert!(z.sum().abs() < 1e-12);
        assert!((z.std(1.0) - 1.0).abs() < 1e-12);
    }
}
