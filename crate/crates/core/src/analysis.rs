//! Downstream operators: k-means clustering, ridge regression, and train/test
//! splitting. All deterministic under a seed.

use thiserror::Error;

use crate::embed::EmbeddingMatrix;
use crate::nn::{Matrix, Rng};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("k = {k} invalid for {n} rows")]
    BadK { k: usize, n: usize },
    #[error("singular system: columns are linearly dependent and lambda is 0")]
    SingularSystem,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("need at least 2 ids to split, got {0}")]
    TooFew(usize),
}

/// K-means result: labels per region, centroids, and total inertia.
#[derive(Debug, Clone)]
pub struct ClusterAssignment {
    pub region_ids: Vec<String>,
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
}

impl ClusterAssignment {
    /// CSV with header `region_id,cluster`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("region_id,cluster\n");
        for (id, label) in self.region_ids.iter().zip(&self.labels) {
            out.push_str(&format!("{id},{label}\n"));
        }
        out
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest_centroid(row: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = dist2(row, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd iterations from k-means++ style D^2-weighted seeding, stopping at a
/// label fixpoint or `max_iter`. Empty clusters are re-seeded with the point
/// farthest from its own centroid.
pub fn kmeans(x: &EmbeddingMatrix, k: usize, seed: u64, max_iter: usize) -> Result<ClusterAssignment, AnalysisError> {
    let values = x.values();
    let n = values.rows();
    let dims = values.cols();
    if k < 1 || k > n {
        return Err(AnalysisError::BadK { k, n });
    }
    let mut rng = Rng::new(seed);

    // D^2-weighted seeding.
    let mut centroids = Matrix::zeros(k, dims);
    let first = rng.next_index(n);
    centroids.row_mut(0).copy_from_slice(values.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| dist2(values.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut target = rng.next_f64() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.next_index(n)
        };
        centroids.row_mut(c).copy_from_slice(values.row(chosen));
        for i in 0..n {
            d2[i] = d2[i].min(dist2(values.row(i), centroids.row(c)));
        }
    }

    let mut labels: Vec<usize> = (0..n).map(|i| nearest_centroid(values.row(i), &centroids).0).collect();
    for _ in 0..max_iter {
        // Update step.
        let mut counts = vec![0usize; k];
        let mut sums = Matrix::zeros(k, dims);
        for (i, &label) in labels.iter().enumerate() {
            counts[label] += 1;
            for (s, v) in sums.row_mut(label).iter_mut().zip(values.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, src) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = src * inv;
                }
            } else {
                // Re-seed to the point farthest from its current centroid.
                let farthest = (0..n)
                    .max_by(|&a, &b| {
                        let da = dist2(values.row(a), centroids.row(labels[a]));
                        let db = dist2(values.row(b), centroids.row(labels[b]));
                        da.partial_cmp(&db).expect("finite distances")
                    })
                    .expect("n >= 1");
                centroids.row_mut(c).copy_from_slice(values.row(farthest));
            }
        }
        // Assign step.
        let new_labels: Vec<usize> =
            (0..n).map(|i| nearest_centroid(values.row(i), &centroids).0).collect();
        let converged = new_labels == labels;
        labels = new_labels;
        if converged {
            break;
        }
    }

    let inertia = (0..n).map(|i| dist2(values.row(i), centroids.row(labels[i]))).sum();
    Ok(ClusterAssignment { region_ids: x.region_ids().to_vec(), labels, centroids, inertia })
}

/// Ridge regression model over embedding columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

/// Closed-form ridge fit on centered data: (X'X + lambda I) beta = X'y,
/// solved by Gaussian elimination with partial pivoting. The intercept is the
/// mean adjustment and is not penalized.
pub fn ridge_fit(x: &EmbeddingMatrix, y: &[f64], lambda: f64) -> Result<RidgeModel, AnalysisError> {
    let values = x.values();
    let n = values.rows();
    let dims = values.cols();
    if y.len() != n {
        return Err(AnalysisError::ShapeMismatch(format!("{n} rows vs {} targets", y.len())));
    }
    if n == 0 || dims == 0 {
        return Err(AnalysisError::ShapeMismatch("empty design matrix".into()));
    }
    if !(lambda >= 0.0) {
        return Err(AnalysisError::ShapeMismatch(format!("lambda {lambda} must be >= 0")));
    }

    let mut col_means = vec![0.0; dims];
    for i in 0..n {
        for (m, v) in col_means.iter_mut().zip(values.row(i)) {
            *m += v;
        }
    }
    for m in &mut col_means {
        *m /= n as f64;
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;

    // Normal equations on centered data.
    let mut gram = vec![vec![0.0; dims]; dims];
    let mut rhs = vec![0.0; dims];
    for i in 0..n {
        let row = values.row(i);
        let yc = y[i] - y_mean;
        for a in 0..dims {
            let xa = row[a] - col_means[a];
            rhs[a] += xa * yc;
            for b in a..dims {
                gram[a][b] += xa * (row[b] - col_means[b]);
            }
        }
    }
    for a in 0..dims {
        for b in 0..a {
            gram[a][b] = gram[b][a];
        }
        gram[a][a] += lambda;
    }

    let coefficients = solve_linear(gram, rhs)?;
    let intercept = y_mean - col_means.iter().zip(&coefficients).map(|(m, c)| m * c).sum::<f64>();
    Ok(RidgeModel { coefficients, intercept, lambda })
}

/// Gaussian elimination with partial pivoting.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, AnalysisError> {
    let n = b.len();
    let scale: f64 = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite"))
            .expect("nonempty");
        if a[pivot_row][col].abs() < 1e-12 * scale {
            return Err(AnalysisError::SingularSystem);
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in (col + 1)..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}

pub fn ridge_predict(model: &RidgeModel, x: &EmbeddingMatrix) -> Result<Vec<f64>, AnalysisError> {
    let values = x.values();
    if values.cols() != model.coefficients.len() {
        return Err(AnalysisError::ShapeMismatch(format!(
            "{} columns vs {} coefficients",
            values.cols(),
            model.coefficients.len()
        )));
    }
    Ok((0..values.rows())
        .map(|i| {
            model.intercept
                + values.row(i).iter().zip(&model.coefficients).map(|(v, c)| v * c).sum::<f64>()
        })
        .collect())
}

/// Deterministic shuffled split. Test size is round(fraction * n), clamped so
/// both sides keep at least one id.
pub fn train_test_split(
    ids: &[String],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>), AnalysisError> {
    let n = ids.len();
    if n < 2 {
        return Err(AnalysisError::TooFew(n));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(AnalysisError::ShapeMismatch(format!(
            "test fraction {test_fraction} must be in (0, 1)"
        )));
    }
    let mut shuffled = ids.to_vec();
    Rng::new(seed).shuffle(&mut shuffled);
    let test_size = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let train = shuffled[test_size..].to_vec();
    let test = shuffled[..test_size].to_vec();
    Ok((train, test))
}
