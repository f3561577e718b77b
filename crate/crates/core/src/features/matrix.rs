use super::FeatureError;

/// Dense row-major matrix with named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    column_names: Vec<String>,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(column_names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, FeatureError> {
        let n_cols = column_names.len();
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(FeatureError::Shape {
                    expected: n_cols,
                    got: r.len(),
                });
            }
            data.extend(r);
        }
        Self::from_flat(column_names, data)
    }

    pub fn from_flat(column_names: Vec<String>, data: Vec<f64>) -> Result<Self, FeatureError> {
        let n_cols = column_names.len();
        if n_cols == 0 || !data.len().is_multiple_of(n_cols) {
            return Err(FeatureError::Shape {
                expected: n_cols,
                got: data.len(),
            });
        }
        Ok(Self { column_names, data })
    }

    /// Single-column matrix; handy for one-dimensional regressions.
    pub fn from_column(name: &str, values: &[f64]) -> Self {
        Self {
            column_names: vec![name.to_string()],
            data: values.to_vec(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.column_names.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.n_cols())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols() + j]
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            column_names: self.column_names.clone(),
            data,
        }
    }

    /// Drops the named columns, keeping the rest in order.
    pub fn without_columns(&self, names: &[&str]) -> Self {
        let keep: Vec<usize> = (0..self.n_cols())
            .filter(|&j| !names.contains(&self.column_names[j].as_str()))
            .collect();
        let cols = keep.iter().map(|&j| self.column_names[j].clone()).collect();
        self.map_rows(cols, |r| keep.iter().map(|&j| r[j]).collect())
    }

    pub(crate) fn map_rows<F: Fn(&[f64]) -> Vec<f64>>(&self, column_names: Vec<String>, f: F) -> Self {
        let mut data = Vec::with_capacity(self.n_rows() * column_names.len());
        for r in self.rows() {
            data.extend(f(r));
        }
        Self { column_names, data }
    }
}
