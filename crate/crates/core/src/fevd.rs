//! Impulse responses, generalized forecast-error variance decomposition and
//! the Diebold-Yilmaz connectedness table.
//!
//! Decomposition shares are stored in percent: every row of `D` sums to 100.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use crate::varnet::VarModel;
use crate::{Error, Result};

/// Moving-average coefficient matrices `A_0 = I, A_1, …, A_{H−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponseSet {
    matrices: Vec<Array2<f64>>,
}

impl ImpulseResponseSet {
    pub fn horizon(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrices(&self) -> &[Array2<f64>] {
        &self.matrices
    }

    pub fn n_firms(&self) -> usize {
        self.matrices[0].nrows()
    }
}

/// `A_h = Σ_{ℓ=1..min(h,d)} φ_ℓ·A_{h−ℓ}` for `h < horizon`.
pub fn impulse_responses(phi: &[Array2<f64>], horizon: usize) -> Result<ImpulseResponseSet> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let n = phi.first().map_or(0, |m| m.nrows());
    if n == 0 || phi.iter().any(|m| m.dim() != (n, n)) {
        return Err(Error::InvalidInput(
            "lag matrices must be non-empty and square".into(),
        ));
    }
    let mut matrices: Vec<Array2<f64>> = Vec::with_capacity(horizon);
    matrices.push(Array2::eye(n));
    for h in 1..horizon {
        let mut a = Array2::zeros((n, n));
        for (l, phi_l) in phi.iter().enumerate().take(h) {
            a += &phi_l.dot(&matrices[h - l - 1]);
        }
        matrices.push(a);
    }
    Ok(ImpulseResponseSet { matrices })
}

/// Generalized variance decomposition:
///
/// ```text
/// θ_ij = σ_jj⁻¹ Σ_h (e_iᵀ A_h Σ e_j)²  /  Σ_h e_iᵀ A_h Σ A_hᵀ e_i
/// ```
///
/// summed over every horizon in `irf`. Rows are not normalized.
pub fn gfevd(irf: &ImpulseResponseSet, sigma: &Array2<f64>) -> Result<Array2<f64>> {
    let n = irf.n_firms();
    if sigma.dim() != (n, n) {
        return Err(Error::InvalidInput(format!(
            "covariance is {:?}, impulse responses are {n}x{n}",
            sigma.dim()
        )));
    }
    for j in 0..n {
        if !(sigma[[j, j]] > 0.0) {
            return Err(Error::DegenerateFirm {
                index: j,
                reason: format!("shock variance {} is not positive", sigma[[j, j]]),
            });
        }
    }
    let mut numerator = Array2::<f64>::zeros((n, n));
    let mut denominator = Array1::<f64>::zeros(n);
    for a in irf.matrices() {
        let a_sigma = a.dot(sigma);
        numerator += &a_sigma.mapv(|v| v * v);
        for i in 0..n {
            denominator[i] += a_sigma.row(i).dot(&a.row(i));
        }
    }
    for i in 0..n {
        if !(denominator[i] > 0.0) {
            return Err(Error::DegenerateFirm {
                index: i,
                reason: "total forecast error variance is zero".into(),
            });
        }
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| {
        numerator[[i, j]] / sigma[[j, j]] / denominator[i]
    }))
}

/// Scales every row to sum to 100.
pub fn normalize_rows(theta: &Array2<f64>) -> Result<Array2<f64>> {
    let mut d = theta.clone();
    for (i, mut row) in d.rows_mut().into_iter().enumerate() {
        let sum = row.sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::DegenerateFirm {
                index: i,
                reason: format!("decomposition row sum {sum} is not positive"),
            });
        }
        row.mapv_inplace(|v| 100.0 * v / sum);
    }
    Ok(d)
}

/// Row-normalized decomposition with its directional aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectednessTable {
    pub firms: Vec<String>,
    pub horizon: usize,
    /// `d[[i, j]]`: share of firm `i`'s forecast variance due to firm `j` (percent).
    pub d: Array2<f64>,
    /// Row sums without the diagonal.
    pub from_others: Array1<f64>,
    /// Column sums without the diagonal.
    pub to_others: Array1<f64>,
    pub net: Array1<f64>,
    /// `net_pairwise[[i, j]] = d[[j, i]] − d[[i, j]]`.
    pub net_pairwise: Array2<f64>,
    /// Average off-diagonal mass per firm.
    pub total: f64,
}

impl ConnectednessTable {
    pub fn n_firms(&self) -> usize {
        self.firms.len()
    }

    /// Writes the table in connectedness-table layout: one row per firm with
    /// a trailing `from_others` column, then a `to_others` row whose last
    /// cell is the total.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        let mut header = vec![String::new()];
        header.extend(self.firms.iter().cloned());
        header.push("from_others".into());
        csv.write_record(&header)?;
        for (i, firm) in self.firms.iter().enumerate() {
            let mut row = vec![firm.clone()];
            row.extend(self.d.row(i).iter().map(|v| v.to_string()));
            row.push(self.from_others[i].to_string());
            csv.write_record(&row)?;
        }
        let mut last = vec!["to_others".to_string()];
        last.extend(self.to_others.iter().map(|v| v.to_string()));
        last.push(self.total.to_string());
        csv.write_record(&last)?;
        csv.flush().map_err(|e| Error::io("<table>", e))?;
        Ok(())
    }

    /// Reads a table written by [`write_csv`](Self::write_csv); aggregates are
    /// recomputed from the matrix.
    pub fn read_csv<R: Read>(reader: R, horizon: usize) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().from_reader(reader);
        let headers = csv.headers()?.clone();
        let n = headers.len().saturating_sub(2);
        if headers.len() < 3 || &headers[n + 1] != "from_others" {
            return Err(Error::MissingColumn("from_others".into()));
        }
        let firms: Vec<String> = headers.iter().skip(1).take(n).map(str::to_string).collect();
        let mut d = Array2::zeros((n, n));
        let mut rows = 0;
        for (i, record) in csv.records().enumerate() {
            let record = record?;
            let line = i as u64 + 2;
            if &record[0] == "to_others" {
                break;
            }
            if i >= n || record[0] != firms[i] || record.len() != n + 2 {
                return Err(Error::Parse {
                    line,
                    message: "row does not match header firm order".into(),
                });
            }
            for j in 0..n {
                d[[i, j]] = record[j + 1].parse().map_err(|e| Error::Parse {
                    line,
                    message: format!("bad value `{}`: {e}", &record[j + 1]),
                })?;
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::Parse {
                line: rows as u64 + 2,
                message: format!("expected {n} firm rows, found {rows}"),
            });
        }
        Ok(build_table(d, firms, horizon))
    }
}

/// Adds the from/to/net aggregates to a row-normalized matrix.
pub fn build_table(d: Array2<f64>, firms: Vec<String>, horizon: usize) -> ConnectednessTable {
    let n = d.nrows();
    assert_eq!(d.dim(), (n, firms.len()), "matrix and firm list disagree");
    let from_others = Array1::from_shape_fn(n, |j| (0..n).filter(|&i| i != j).map(|i| d[[j, i]]).sum());
    let to_others = Array1::from_shape_fn(n, |j| (0..n).filter(|&i| i != j).map(|i| d[[i, j]]).sum());
    let net = &to_others - &from_others;
    let net_pairwise = Array2::from_shape_fn((n, n), |(i, j)| d[[j, i]] - d[[i, j]]);
    let total = if n == 0 { 0.0 } else { from_others.sum() / n as f64 };
    ConnectednessTable {
        firms,
        horizon,
        d,
        from_others,
        to_others,
        net,
        net_pairwise,
        total,
    }
}

/// Full chain from a fitted model to its connectedness table.
pub fn connectedness(model: &VarModel, firms: &[String], horizon: usize) -> Result<ConnectednessTable> {
    if firms.len() != model.n_firms() {
        return Err(Error::InvalidInput(format!(
            "{} firm names for a {}-firm model",
            firms.len(),
            model.n_firms()
        )));
    }
    let irf = impulse_responses(&model.phi, horizon)?;
    let theta = gfevd(&irf, &model.sigma)?;
    let d = normalize_rows(&theta)?;
    Ok(build_table(d, firms.to_vec(), horizon))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    To,
    From,
    Net,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::To, Measure::From, Measure::Net];

    pub fn as_str(self) -> &'static str {
        match self {
            Measure::To => "to",
            Measure::From => "from",
            Measure::Net => "net",
        }
    }

    pub fn of(self, table: &ConnectednessTable) -> &Array1<f64> {
        match self {
            Measure::To => &table.to_others,
            Measure::From => &table.from_others,
            Measure::Net => &table.net,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MoveCounts {
    pub up: usize,
    pub down: usize,
    pub unchanged: usize,
}

impl MoveCounts {
    pub fn tally<'a>(deltas: impl IntoIterator<Item = &'a f64>) -> Self {
        let mut c = MoveCounts::default();
        for &d in deltas {
            if d > 0.0 {
                c.up += 1;
            } else if d < 0.0 {
                c.down += 1;
            } else {
                c.unchanged += 1;
            }
        }
        c
    }
}

/// Per-firm change from table `a` to table `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct TableDiff {
    pub firms: Vec<String>,
    pub delta_to: Array1<f64>,
    pub delta_from: Array1<f64>,
    pub delta_net: Array1<f64>,
    pub delta_total: f64,
}

impl TableDiff {
    pub fn deltas(&self, measure: Measure) -> &Array1<f64> {
        match measure {
            Measure::To => &self.delta_to,
            Measure::From => &self.delta_from,
            Measure::Net => &self.delta_net,
        }
    }

    pub fn counts(&self, measure: Measure) -> MoveCounts {
        MoveCounts::tally(self.deltas(measure))
    }

    /// Firms with a non-zero change, largest absolute change first.
    pub fn top_movers(&self, measure: Measure, k: usize) -> Vec<(String, f64)> {
        let deltas = self.deltas(measure);
        let mut idx: Vec<usize> = (0..self.firms.len()).filter(|&i| deltas[i] != 0.0).collect();
        idx.sort_by(|&a, &b| deltas[b].abs().total_cmp(&deltas[a].abs()).then(a.cmp(&b)));
        idx.into_iter()
            .take(k)
            .map(|i| (self.firms[i].clone(), deltas[i]))
            .collect()
    }
}

pub fn table_diff(a: &ConnectednessTable, b: &ConnectednessTable) -> Result<TableDiff> {
    if a.firms != b.firms {
        return Err(Error::FirmOrderMismatch);
    }
    Ok(TableDiff {
        firms: a.firms.clone(),
        delta_to: &b.to_others - &a.to_others,
        delta_from: &b.from_others - &a.from_others,
        delta_net: &b.net - &a.net,
        delta_total: b.total - a.total,
    })
}
