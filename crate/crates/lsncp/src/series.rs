use crate::error::{LsnError, Result};

/// An ordered sample of real observations `x_1, ..., x_n`.
///
/// Construction checks that every entry is finite; all downstream statistics
/// assume this. Observation indices in the public API are 1-based to match
/// the usual change-point notation; storage is 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    values: Vec<f64>,
}

impl Series {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(LsnError::TooShort { min: 1, got: 0 });
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(LsnError::NonFinite { index: i + 1 });
            }
        }
        Ok(Series { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Observation `x_i` for 1-based `i`.
    pub fn at(&self, i: usize) -> f64 {
        self.values[i - 1]
    }

    /// The subsample `x_s, ..., x_e` (1-based, inclusive) as a new series.
    pub fn slice(&self, start: usize, end: usize) -> Result<Series> {
        if start < 1 || start > end || end > self.len() {
            return Err(LsnError::invalid_parameter(
                "range",
                format!("[{start}, {end}] out of bounds for n={}", self.len()),
            ));
        }
        Ok(Series {
            values: self.values[start - 1..end].to_vec(),
        })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }
}

/// An `n x q` multivariate sample stored by column.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSeries {
    columns: Vec<Vec<f64>>,
    n: usize,
}

impl MultiSeries {
    /// Build from columns of equal length; every entry must be finite.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.is_empty() {
            return Err(LsnError::invalid_parameter("columns", "no columns given"));
        }
        let n = columns[0].len();
        if n == 0 {
            return Err(LsnError::TooShort { min: 1, got: 0 });
        }
        for col in &columns {
            if col.len() != n {
                return Err(LsnError::DimensionMismatch {
                    expected: n,
                    got: col.len(),
                });
            }
            for (i, v) in col.iter().enumerate() {
                if !v.is_finite() {
                    return Err(LsnError::NonFinite { index: i + 1 });
                }
            }
        }
        Ok(MultiSeries { columns, n })
    }

    /// Build from rows (`n` rows of `q` entries each).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(LsnError::TooShort { min: 1, got: 0 });
        }
        let q = rows[0].len();
        let mut columns = vec![Vec::with_capacity(rows.len()); q];
        for row in rows {
            if row.len() != q {
                return Err(LsnError::DimensionMismatch {
                    expected: q,
                    got: row.len(),
                });
            }
            for (j, v) in row.iter().enumerate() {
                columns[j].push(*v);
            }
        }
        MultiSeries::from_columns(columns)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    /// Component `j` (0-based) as a univariate series.
    pub fn component(&self, j: usize) -> Series {
        Series {
            values: self.columns[j].clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(matches!(
            Series::new(vec![]),
            Err(LsnError::TooShort { .. })
        ));
        assert!(matches!(
            Series::new(vec![1.0, f64::NAN]),
            Err(LsnError::NonFinite { index: 2 })
        ));
        assert!(matches!(
            Series::new(vec![f64::INFINITY]),
            Err(LsnError::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn one_based_accessor() {
        let s = Series::new(vec![10.0, 20.0, 30.0]).unwrap();
        assert_eq!(s.at(1), 10.0);
        assert_eq!(s.at(3), 30.0);
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn slice_bounds() {
        let s = Series::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let sub = s.slice(2, 3).unwrap();
        assert_eq!(sub.values(), &[2.0, 3.0]);
        assert!(s.slice(0, 2).is_err());
        assert!(s.slice(3, 5).is_err());
    }

    #[test]
    fn multi_series_shape_checks() {
        let m = MultiSeries::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.dim(), 2);
        assert_eq!(m.column(1), &[2.0, 4.0]);
        assert!(MultiSeries::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
