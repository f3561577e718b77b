use nalgebra::{DMatrix, SymmetricEigen};

use super::{FeatureError, FeatureMatrix};

/// Principal components of standardized columns.
///
/// Columns are centred and divided by their population standard deviation;
/// a constant column is only centred. Components are ordered by decreasing
/// eigenvalue and signed so that each one's largest-magnitude loading is
/// positive.
#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    means: Vec<f64>,
    scales: Vec<f64>,
    /// `k` rows of length `p`.
    components: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
}

impl Pca {
    pub fn fit(x: &FeatureMatrix, k: usize) -> Result<Self, FeatureError> {
        let (n, p) = (x.n_rows(), x.n_cols());
        if k == 0 || k > p {
            return Err(FeatureError::ComponentCount { k, cols: p });
        }
        if n <= p {
            return Err(FeatureError::InsufficientRows { rows: n, cols: p });
        }
        let nf = n as f64;
        let means: Vec<f64> = (0..p).map(|j| x.rows().map(|r| r[j]).sum::<f64>() / nf).collect();
        let scales: Vec<f64> = (0..p)
            .map(|j| {
                let var = x.rows().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / nf;
                let sd = var.sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        let mut cov = DMatrix::<f64>::zeros(p, p);
        for r in x.rows() {
            let z: Vec<f64> = (0..p).map(|j| (r[j] - means[j]) / scales[j]).collect();
            for a in 0..p {
                for b in a..p {
                    cov[(a, b)] += z[a] * z[b];
                }
            }
        }
        for a in 0..p {
            for b in a..p {
                cov[(a, b)] /= nf;
                cov[(b, a)] = cov[(a, b)];
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
        let all_eigen: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let components = order[..k]
            .iter()
            .map(|&i| {
                let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
                let lead = v.iter().copied().fold(0.0f64, |m, c| if c.abs() > m.abs() { c } else { m });
                if lead < 0.0 {
                    v.iter_mut().for_each(|c| *c = -*c);
                }
                v
            })
            .collect();
        Ok(Self {
            means,
            scales,
            components,
            eigenvalues: all_eigen,
        })
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    /// Share of total standardized variance carried by each kept component.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues[..self.n_components()]
            .iter()
            .map(|e| if total > 0.0 { e / total } else { 0.0 })
            .collect()
    }

    pub fn transform(&self, x: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
        let p = self.means.len();
        if x.n_cols() != p {
            return Err(FeatureError::Shape {
                expected: p,
                got: x.n_cols(),
            });
        }
        let names = (1..=self.n_components()).map(|i| format!("pc{i}")).collect();
        Ok(x.map_rows(names, |r| {
            let z: Vec<f64> = (0..p).map(|j| (r[j] - self.means[j]) / self.scales[j]).collect();
            self.components
                .iter()
                .map(|c| c.iter().zip(&z).map(|(w, v)| w * v).sum())
                .collect()
        }))
    }

    /// Maps component scores back to the original columns.
    pub fn inverse_transform(&self, scores: &FeatureMatrix, column_names: Vec<String>) -> Result<FeatureMatrix, FeatureError> {
        let k = self.n_components();
        if scores.n_cols() != k {
            return Err(FeatureError::Shape {
                expected: k,
                got: scores.n_cols(),
            });
        }
        let p = self.means.len();
        if column_names.len() != p {
            return Err(FeatureError::Shape {
                expected: p,
                got: column_names.len(),
            });
        }
        Ok(scores.map_rows(column_names, |s| {
            (0..p)
                .map(|j| {
                    let z: f64 = (0..k).map(|c| s[c] * self.components[c][j]).sum();
                    self.means[j] + z * self.scales[j]
                })
                .collect()
        }))
    }
}
