//! Dense count and binary incidence matrices for bipartite networks.
//!
//! Rows are one set of species, columns the other. `CountMatrix` holds the
//! observed interaction counts; `BinaryMatrix` holds supports (observed,
//! latent or imputed).

use crate::error::{Error, Result};

/// Observed weighted bipartite network: non-negative interaction counts with
/// row and column names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountMatrix {
    n_rows: usize,
    n_cols: usize,
    counts: Vec<u64>, // row-major
    row_names: Vec<String>,
    col_names: Vec<String>,
}

impl CountMatrix {
    /// Build from a row-major grid. Names default to `r1..`/`c1..` when empty.
    pub fn new(
        counts: Vec<Vec<u64>>,
        row_names: Vec<String>,
        col_names: Vec<String>,
    ) -> Result<Self> {
        let n_rows = counts.len();
        if n_rows == 0 {
            return Err(Error::Dimension("count matrix needs at least one row".into()));
        }
        let n_cols = counts[0].len();
        if n_cols == 0 {
            return Err(Error::Dimension("count matrix needs at least one column".into()));
        }
        for (i, row) in counts.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Dimension(format!(
                    "row {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    n_cols
                )));
            }
        }
        let row_names = if row_names.is_empty() {
            default_names("r", n_rows)
        } else {
            row_names
        };
        let col_names = if col_names.is_empty() {
            default_names("c", n_cols)
        } else {
            col_names
        };
        if row_names.len() != n_rows {
            return Err(Error::Dimension(format!(
                "{} row names for {} rows",
                row_names.len(),
                n_rows
            )));
        }
        if col_names.len() != n_cols {
            return Err(Error::Dimension(format!(
                "{} column names for {} columns",
                col_names.len(),
                n_cols
            )));
        }
        Ok(Self {
            n_rows,
            n_cols,
            counts: counts.into_iter().flatten().collect(),
            row_names,
            col_names,
        })
    }

    /// Grid constructor with generated names.
    pub fn from_rows(counts: Vec<Vec<u64>>) -> Result<Self> {
        Self::new(counts, Vec::new(), Vec::new())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.n_cols + j]
    }

    pub fn row_names(&self) -> &[String] {
        &self.row_names
    }

    pub fn col_names(&self) -> &[String] {
        &self.col_names
    }

    /// Sum of all counts.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Row sums, length `n_rows`.
    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.n_rows)
            .map(|i| (0..self.n_cols).map(|j| self.get(i, j)).sum())
            .collect()
    }

    /// Column sums, length `n_cols`.
    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.n_cols)
            .map(|j| (0..self.n_rows).map(|i| self.get(i, j)).sum())
            .collect()
    }

    pub fn iter_cells(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        (0..self.n_rows)
            .flat_map(move |i| (0..self.n_cols).map(move |j| (i, j, self.get(i, j))))
    }
}

fn default_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

/// Binary support matrix: observed support V, latent support M or imputed
/// support during inference.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMatrix {
    n_rows: usize,
    n_cols: usize,
    cells: Vec<u8>, // row-major, 0 or 1
}

impl BinaryMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            cells: vec![0; n_rows * n_cols],
        }
    }

    /// Build from a row-major grid of 0/1 cells.
    pub fn from_rows(rows: Vec<Vec<u8>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut cells = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Dimension(format!(
                    "row {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    n_cols
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(Error::Parse {
                        row: i + 1,
                        col: j + 1,
                        msg: format!("binary cell must be 0 or 1, got {v}"),
                    });
                }
                cells.push(v);
            }
        }
        Ok(Self { n_rows, n_cols, cells })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.cells[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u8) {
        debug_assert!(v <= 1);
        self.cells[i * self.n_cols + j] = v;
    }

    /// Number of ones.
    pub fn count_ones(&self) -> u64 {
        self.cells.iter().map(|&c| u64::from(c)).sum()
    }

    /// Fraction of ones over all cells.
    pub fn density(&self) -> f64 {
        self.count_ones() as f64 / (self.n_rows * self.n_cols) as f64
    }

    /// Ones per row.
    pub fn row_fills(&self) -> Vec<usize> {
        (0..self.n_rows)
            .map(|i| (0..self.n_cols).filter(|&j| self.get(i, j) == 1).count())
            .collect()
    }

    /// Ones per column.
    pub fn col_fills(&self) -> Vec<usize> {
        (0..self.n_cols)
            .map(|j| (0..self.n_rows).filter(|&i| self.get(i, j) == 1).count())
            .collect()
    }

    /// Cellwise `self[i][j] >= other[i][j]`.
    pub fn dominates(&self, other: &BinaryMatrix) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.cells.iter().zip(&other.cells).all(|(&a, &b)| a >= b)
    }
}

/// Observed support: `V[i][j] = 1` iff the count is positive.
pub fn observed_support(r: &CountMatrix) -> BinaryMatrix {
    let mut v = BinaryMatrix::zeros(r.n_rows(), r.n_cols());
    for (i, j, c) in r.iter_cells() {
        if c > 0 {
            v.set(i, j, 1);
        }
    }
    v
}

/// Remove rows and columns whose entries are all zero.
///
/// Returns the reduced matrix together with the original indices of the kept
/// rows and columns (0-based). Errors when nothing is left.
pub fn drop_empty(r: &CountMatrix) -> Result<(CountMatrix, Vec<usize>, Vec<usize>)> {
    let row_sums = r.row_sums();
    let col_sums = r.col_sums();
    let kept_rows: Vec<usize> = (0..r.n_rows()).filter(|&i| row_sums[i] > 0).collect();
    let kept_cols: Vec<usize> = (0..r.n_cols()).filter(|&j| col_sums[j] > 0).collect();
    if kept_rows.is_empty() || kept_cols.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let counts = kept_rows
        .iter()
        .map(|&i| kept_cols.iter().map(|&j| r.get(i, j)).collect())
        .collect();
    let row_names = kept_rows.iter().map(|&i| r.row_names()[i].clone()).collect();
    let col_names = kept_cols.iter().map(|&j| r.col_names()[j].clone()).collect();
    Ok((CountMatrix::new(counts, row_names, col_names)?, kept_rows, kept_cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observed_support_is_indicator() {
        let r = CountMatrix::from_rows(vec![vec![0, 3], vec![1, 0]]).unwrap();
        let v = observed_support(&r);
        assert_eq!(v, BinaryMatrix::from_rows(vec![vec![0, 1], vec![1, 0]]).unwrap());
    }

    #[test]
    fn observed_support_all_zero() {
        let r = CountMatrix::from_rows(vec![vec![0, 0], vec![0, 0]]).unwrap();
        assert_eq!(observed_support(&r).count_ones(), 0);
    }

    #[test]
    fn observed_support_single_cell() {
        let r = CountMatrix::from_rows(vec![vec![5]]).unwrap();
        assert_eq!(observed_support(&r).get(0, 0), 1);
    }

    #[test]
    fn drop_empty_removes_zero_lines() {
        let r = CountMatrix::from_rows(vec![vec![0, 3], vec![0, 0]]).unwrap();
        let (reduced, rows, cols) = drop_empty(&r).unwrap();
        assert_eq!(reduced.n_rows(), 1);
        assert_eq!(reduced.n_cols(), 1);
        assert_eq!(reduced.get(0, 0), 3);
        // second column and first row survive (0-based indices)
        assert_eq!(rows, vec![0]);
        assert_eq!(cols, vec![1]);
        assert_eq!(reduced.row_names(), &["r1".to_string()]);
        assert_eq!(reduced.col_names(), &["c2".to_string()]);
    }

    #[test]
    fn drop_empty_identity_when_full() {
        let r = CountMatrix::from_rows(vec![vec![1, 2], vec![3, 4]]).unwrap();
        let (reduced, rows, cols) = drop_empty(&r).unwrap();
        assert_eq!(reduced, r);
        assert_eq!(rows, vec![0, 1]);
        assert_eq!(cols, vec![0, 1]);
    }

    #[test]
    fn drop_empty_all_zero_errors() {
        let r = CountMatrix::from_rows(vec![vec![0; 3]; 3]).unwrap();
        assert!(matches!(drop_empty(&r), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(CountMatrix::from_rows(vec![vec![1, 2], vec![3]]).is_err());
    }
}
