//! PCA + k-means over resampled segment coordinates, and the adjusted Rand
//! index for comparing two clusterings.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::community::{CommunityTree, DetectParams, TreeNodeJson};
use crate::curve_model::Dataset;
use crate::geom::Vec3;

pub const DEFAULT_RESAMPLE: usize = 8;
pub const DEFAULT_MAX_ITER: usize = 300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("dataset has not been decomposed into segments")]
    NotDecomposed,
    #[error("resample count must be at least 2, got {0}")]
    InvalidResample(usize),
    #[error("dim must be in 1..={max}, got {dim}")]
    DimTooLarge { dim: usize, max: usize },
    #[error("k must be in 1..={rows}, got {k}")]
    KTooLarge { k: usize, rows: usize },
    #[error("assignments cover {0} and {1} items")]
    UniverseMismatch(usize, usize),
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self { rows: rows.len(), cols, data: rows.concat() }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

/// Standardized features, one row per segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub matrix: Matrix,
    /// Column means and population standard deviations before standardization.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub resample: usize,
}

/// `count` points at equal arc-length spacing along the polyline.
pub fn resample_polyline(points: &[Vec3], count: usize) -> Vec<Vec3> {
    let mut cumulative = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in points.windows(2) {
        acc += w[0].dist(w[1]);
        cumulative.push(acc);
    }
    let total = acc;
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for i in 0..count {
        if i + 1 == count {
            out.push(*points.last().expect("non-empty polyline"));
            break;
        }
        let target = total * i as f64 / (count - 1) as f64;
        while seg + 2 < points.len() && cumulative[seg + 1] < target {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let t = if len > 0.0 { ((target - cumulative[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(points[seg].lerp(points[seg + 1], t));
    }
    out
}

/// Resampled coordinates of every segment, before standardization.
pub fn raw_features(ds: &Dataset, resample: usize) -> Result<Matrix, BaselineError> {
    if !ds.is_decomposed() {
        return Err(BaselineError::NotDecomposed);
    }
    if resample < 2 {
        return Err(BaselineError::InvalidResample(resample));
    }
    let cols = 3 * resample;
    let mut m = Matrix::zeros(ds.segments.len(), cols);
    for (i, s) in ds.segments.iter().enumerate() {
        let row = m.row_mut(i);
        for (j, p) in resample_polyline(&s.points, resample).into_iter().enumerate() {
            row[3 * j..3 * j + 3].copy_from_slice(&[p.x, p.y, p.z]);
        }
    }
    Ok(m)
}

pub fn featurize(ds: &Dataset, resample: usize) -> Result<FeatureMatrix, BaselineError> {
    let mut m = raw_features(ds, resample)?;
    let n = m.rows as f64;
    let mut mean = vec![0.0; m.cols];
    let mut std = vec![0.0; m.cols];
    for j in 0..m.cols {
        let mu = (0..m.rows).map(|i| m.get(i, j)).sum::<f64>() / n;
        let var = (0..m.rows).map(|i| (m.get(i, j) - mu).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        // spread at rounding level means the column is constant
        let sd = if sd <= 1e-12 * mu.abs().max(1.0) { 0.0 } else { sd };
        for i in 0..m.rows {
            let v = &mut m.data[i * m.cols + j];
            *v = if sd > 0.0 { (*v - mu) / sd } else { 0.0 };
        }
        mean[j] = mu;
        std[j] = sd;
    }
    Ok(FeatureMatrix { matrix: m, mean, std, resample })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    /// Rows projected onto the components.
    pub projected: Matrix,
    /// Orthonormal components, one per row, by decreasing variance.
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
    /// Trace of the covariance matrix.
    pub total_variance: f64,
    pub mean: Vec<f64>,
}

impl Pca {
    /// Maps projected rows back to feature space.
    pub fn reconstruct(&self) -> Matrix {
        let mut out = Matrix::zeros(self.projected.rows, self.components.cols);
        for i in 0..out.rows {
            let z = self.projected.row(i);
            let row = out.row_mut(i);
            row.copy_from_slice(&self.mean);
            for (c, &zc) in z.iter().enumerate() {
                for (r, &w) in row.iter_mut().zip(self.components.row(c)) {
                    *r += zc * w;
                }
            }
        }
        out
    }
}

/// Principal components via eigendecomposition of the `1/n` covariance.
pub fn pca(x: &Matrix, dim: usize) -> Result<Pca, BaselineError> {
    let max = x.rows.min(x.cols);
    if dim == 0 || dim > max {
        return Err(BaselineError::DimTooLarge { dim, max });
    }
    let n = x.rows as f64;
    let mean: Vec<f64> = (0..x.cols).map(|j| (0..x.rows).map(|i| x.get(i, j)).sum::<f64>() / n).collect();
    let mut centered = x.to_nalgebra();
    for (j, mu) in mean.iter().enumerate() {
        centered.column_mut(j).add_scalar_mut(-mu);
    }
    let cov = (centered.transpose() * &centered) / n;
    let total_variance = cov.trace();
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..x.cols).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut components = Matrix::zeros(dim, x.cols);
    let mut explained_variance = Vec::with_capacity(dim);
    for (c, &idx) in order.iter().take(dim).enumerate() {
        let v = eig.eigenvectors.column(idx);
        // sign convention: largest-magnitude entry positive
        let pivot = v.iter().copied().fold(0.0, |a: f64, b| if b.abs() > a.abs() { b } else { a });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (dst, &src) in components.row_mut(c).iter_mut().zip(v.iter()) {
            *dst = sign * src;
        }
        explained_variance.push(eig.eigenvalues[idx].max(0.0));
    }
    let mut projected = Matrix::zeros(x.rows, dim);
    for i in 0..x.rows {
        for c in 0..dim {
            let row = centered.row(i);
            projected.data[i * dim + c] = row.iter().zip(components.row(c)).map(|(a, b)| a * b).sum();
        }
    }
    Ok(Pca { projected, components, explained_variance, total_variance, mean })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KMeansInit {
    #[default]
    PlusPlus,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub max_iter: usize,
    pub init: KMeansInit,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self { max_iter: DEFAULT_MAX_ITER, init: KMeansInit::PlusPlus }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
    /// Inertia after initialization, then after each Lloyd iteration.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn inertia(x: &Matrix, c: &Matrix, assignment: &[usize]) -> f64 {
    assignment.iter().enumerate().map(|(i, &a)| sq_dist(x.row(i), c.row(a))).sum()
}

fn init_centroids(x: &Matrix, k: usize, init: KMeansInit, rng: &mut ChaCha8Rng) -> Matrix {
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    match init {
        KMeansInit::Random => {
            chosen = rand::seq::index::sample(rng, x.rows, k).into_vec();
        }
        KMeansInit::PlusPlus => {
            chosen.push(rng.random_range(0..x.rows));
            let mut d2: Vec<f64> = (0..x.rows).map(|i| sq_dist(x.row(i), x.row(chosen[0]))).collect();
            while chosen.len() < k {
                let total: f64 = d2.iter().sum();
                let next = if total > 0.0 {
                    let mut t = rng.random::<f64>() * total;
                    let mut pick = None;
                    for (i, &d) in d2.iter().enumerate() {
                        if d > 0.0 {
                            pick = Some(i);
                            if t < d {
                                break;
                            }
                            t -= d;
                        }
                    }
                    pick.expect("positive total has a positive entry")
                } else {
                    // every remaining point duplicates a centroid
                    let free: Vec<usize> = (0..x.rows).filter(|i| !chosen.contains(i)).collect();
                    free[rng.random_range(0..free.len())]
                };
                chosen.push(next);
                for (i, d) in d2.iter_mut().enumerate() {
                    *d = d.min(sq_dist(x.row(i), x.row(next)));
                }
                d2[next] = 0.0;
            }
        }
    }
    let mut c = Matrix::zeros(k, x.cols);
    for (r, &i) in chosen.iter().enumerate() {
        c.row_mut(r).copy_from_slice(x.row(i));
    }
    c
}

/// Lloyd's algorithm. A point changes cluster only if another centroid is
/// strictly closer, and a centroid update that would raise the inertia is
/// discarded, so the recorded inertia never increases.
pub fn kmeans(x: &Matrix, k: usize, seed: u64, opts: KMeansOptions) -> Result<KMeansResult, BaselineError> {
    if k == 0 || k > x.rows {
        return Err(BaselineError::KTooLarge { k, rows: x.rows });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = init_centroids(x, k, opts.init, &mut rng);
    let nearest = |c: &Matrix, current: Option<usize>, i: usize| -> usize {
        let row = x.row(i);
        let mut best = current.unwrap_or(0);
        let mut best_d = sq_dist(row, c.row(best));
        for j in 0..k {
            let d = sq_dist(row, c.row(j));
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        best
    };
    let mut assignment: Vec<usize> = (0..x.rows).into_par_iter().map(|i| nearest(&centroids, None, i)).collect();
    let mut current = inertia(x, &centroids, &assignment);
    let mut history = vec![current];
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut sums = Matrix::zeros(k, x.cols);
        let mut counts = vec![0usize; k];
        for (i, &a) in assignment.iter().enumerate() {
            counts[a] += 1;
            for (s, v) in sums.row_mut(a).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let mut updated = centroids.clone();
        for c in 0..k {
            if counts[c] > 0 {
                for (u, s) in updated.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *u = s / counts[c] as f64;
                }
            }
        }
        let after_update = inertia(x, &updated, &assignment);
        if after_update <= current {
            centroids = updated;
            current = after_update;
        }
        let next: Vec<usize> = (0..x.rows)
            .into_par_iter()
            .map(|i| nearest(&centroids, Some(assignment[i]), i))
            .collect();
        let stable = next == assignment;
        assignment = next;
        current = current.min(inertia(x, &centroids, &assignment));
        history.push(current);
        if stable {
            break;
        }
    }
    Ok(KMeansResult { assignment, centroids, inertia: current, inertia_history: history, iterations })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contingency {
    /// Distinct labels of the first and second assignment, ascending.
    pub labels_a: Vec<usize>,
    pub labels_b: Vec<usize>,
    /// `counts[i][j]` = items labelled `labels_a[i]` and `labels_b[j]`.
    pub counts: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub ari: f64,
    pub contingency: Contingency,
}

fn pairs(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

pub fn compare(a: &[usize], b: &[usize]) -> Result<Comparison, BaselineError> {
    if a.len() != b.len() {
        return Err(BaselineError::UniverseMismatch(a.len(), b.len()));
    }
    let dense = |xs: &[usize]| -> (Vec<usize>, Vec<usize>) {
        let mut labels = xs.to_vec();
        labels.sort_unstable();
        labels.dedup();
        let idx = xs.iter().map(|x| labels.binary_search(x).expect("label present")).collect();
        (labels, idx)
    };
    let (labels_a, ia) = dense(a);
    let (labels_b, ib) = dense(b);
    let mut counts = vec![vec![0usize; labels_b.len()]; labels_a.len()];
    for (&i, &j) in ia.iter().zip(&ib) {
        counts[i][j] += 1;
    }
    let index: f64 = counts.iter().flatten().map(|&c| pairs(c)).sum();
    let sum_a: f64 = counts.iter().map(|r| pairs(r.iter().sum())).sum();
    let sum_b: f64 = (0..labels_b.len()).map(|j| pairs(counts.iter().map(|r| r[j]).sum())).sum();
    let total = pairs(a.len());
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max = (sum_a + sum_b) / 2.0;
    let ari = if max == expected { 1.0 } else { (index - expected) / (max - expected) };
    Ok(Comparison { ari, contingency: Contingency { labels_a, labels_b, counts } })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub dim: usize,
    pub k: usize,
    pub seed: u64,
    pub resample: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub params: BaselineParams,
    pub assignment: Vec<usize>,
    pub inertia: f64,
    pub explained_variance: Vec<f64>,
}

/// featurize → PCA → k-means.
pub fn run_baseline(ds: &Dataset, params: BaselineParams) -> Result<BaselineResult, BaselineError> {
    let features = featurize(ds, params.resample)?;
    let p = pca(&features.matrix, params.dim)?;
    let km = kmeans(&p.projected, params.k, params.seed, KMeansOptions::default())?;
    Ok(BaselineResult { params, assignment: km.assignment, inertia: km.inertia, explained_variance: p.explained_variance })
}

/// Flat one-level tree in the communities JSON layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClustersJson {
    pub tree: Vec<TreeNodeJson>,
    pub params: BaselineParams,
    pub generation: u64,
    pub inertia: f64,
}

impl BaselineResult {
    pub fn to_clusters_json(&self) -> ClustersJson {
        let groups = crate::community::Partition::from_labels(&self.assignment).communities();
        let tree = CommunityTree::from_communities(
            self.assignment.len(),
            groups,
            DetectParams { resolution: 0.0, seed: self.params.seed },
        );
        ClustersJson { tree: tree.to_json().tree, params: self.params, generation: 0, inertia: self.inertia }
    }
}
