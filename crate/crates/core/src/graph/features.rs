//! Label augmentation and per-graph PCA feature-space alignment.

use super::AttributedGraph;
use crate::error::{CoreError, Result};
use crate::linalg::symmetric_eigh;
use ndarray::{Array1, Array2};

/// Number of label classes inferred from the labels present (max + 1).
pub fn inferred_label_classes(g: &AttributedGraph) -> usize {
    g.task_labels
        .as_ref()
        .map(|y| y.iter().copied().max().map_or(0, |m| m + 1))
        .unwrap_or(0)
}

/// Augment non-sensitive features with a one-hot task-label block.
///
/// Label-free graphs get a zero block of the same width so their feature
/// space matches a label-bearing counterpart.
pub fn augment_features(g: &AttributedGraph, label_classes: usize) -> Result<Array2<f64>> {
    let n = g.node_count;
    let d = g.features.ncols();
    let mut out = Array2::<f64>::zeros((n, d + label_classes));
    for v in 0..n {
        for j in 0..d {
            out[[v, j]] = g.features[[v, j]];
        }
    }
    if let Some(y) = &g.task_labels {
        for v in 0..n {
            if y[v] >= label_classes {
                return Err(CoreError::Data(format!(
                    "label {} at node {v} exceeds class count {label_classes}",
                    y[v]
                )));
            }
            out[[v, d + y[v]]] = 1.0;
        }
    }
    Ok(out)
}

/// Principal components fitted on one matrix: mean-centered columns,
/// eigendecomposition of the covariance, deterministic sign convention
/// (largest-magnitude loading positive).
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `d x k`, columns are components.
    pub components: Array2<f64>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn fit(x: &Array2<f64>, k: usize) -> Result<Self> {
        let (n, d) = (x.nrows(), x.ncols());
        if k > d {
            return Err(CoreError::Dim(format!("k={k} exceeds feature width {d}")));
        }
        if n == 0 {
            return Err(CoreError::Data("cannot fit PCA on an empty matrix".into()));
        }
        let mean = x.mean_axis(ndarray::Axis(0)).expect("n > 0");
        let centered = x - &mean.clone().insert_axis(ndarray::Axis(0));
        let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
        let cov = centered.t().dot(&centered) / denom;
        let (eigenvalues, eigenvectors) = symmetric_eigh(&cov);
        let total: f64 = eigenvalues.iter().map(|&v| v.max(0.0)).sum();
        let mut components = Array2::<f64>::zeros((d, k));
        for c in 0..k {
            // Sign convention: the largest-magnitude loading is positive.
            let mut best = 0usize;
            for r in 1..d {
                if eigenvectors[[r, c]].abs() > eigenvectors[[best, c]].abs() {
                    best = r;
                }
            }
            let flip = if eigenvectors[[best, c]] < 0.0 { -1.0 } else { 1.0 };
            for r in 0..d {
                components[[r, c]] = flip * eigenvectors[[r, c]];
            }
        }
        let explained_variance: Vec<f64> = eigenvalues[..k].iter().map(|&v| v.max(0.0)).collect();
        let explained_variance_ratio = explained_variance
            .iter()
            .map(|&v| if total > 0.0 { v / total } else { 0.0 })
            .collect();
        Ok(PcaModel { mean, components, explained_variance, explained_variance_ratio })
    }

    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        let centered = x - &self.mean.clone().insert_axis(ndarray::Axis(0));
        centered.dot(&self.components)
    }
}

/// Project two feature matrices into a unified `k`-dimensional space, each
/// via its own principal components.
pub fn pca_align(
    x_aux: &Array2<f64>,
    x_target: &Array2<f64>,
    k: usize,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if k > x_aux.ncols() || k > x_target.ncols() {
        return Err(CoreError::Dim(format!(
            "k={k} exceeds a feature width ({} or {})",
            x_aux.ncols(),
            x_target.ncols()
        )));
    }
    let pa = PcaModel::fit(x_aux, k)?;
    let pt = PcaModel::fit(x_target, k)?;
    Ok((pa.transform(x_aux), pt.transform(x_target)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SplitMasks;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn graph_with_labels(labels: Option<Vec<usize>>) -> AttributedGraph {
        let feats = array![
            [0.1, 0.2, 0.3, 0.4],
            [0.5, 0.6, 0.7, 0.8],
            [0.9, 1.0, 1.1, 1.2]
        ];
        AttributedGraph::new(3, &[(0, 1)], feats, None, labels, vec![], SplitMasks::all_train(3))
            .unwrap()
    }

    #[test]
    fn width_is_features_plus_label_classes() {
        let g = graph_with_labels(Some(vec![0, 1, 0]));
        let x = augment_features(&g, 2).unwrap();
        assert_eq!(x.ncols(), 6);
        assert_eq!(x[[1, 5]], 1.0);
        assert_eq!(x[[1, 4]], 0.0);
    }

    #[test]
    fn label_free_graph_gets_zero_block() {
        let g = graph_with_labels(None);
        let x = augment_features(&g, 2).unwrap();
        assert_eq!(x.ncols(), 6);
        for v in 0..3 {
            assert_eq!(x[[v, 4]], 0.0);
            assert_eq!(x[[v, 5]], 0.0);
        }
    }

    #[test]
    fn single_class_labels_give_constant_one_column() {
        let g = graph_with_labels(Some(vec![1, 1, 1]));
        let classes = inferred_label_classes(&g);
        assert_eq!(classes, 2);
        let x = augment_features(&g, classes).unwrap();
        for v in 0..3 {
            assert_eq!(x[[v, 5]], 1.0);
            assert_eq!(x[[v, 4]], 0.0);
        }
    }

    fn random_matrix(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn aligned_widths_match() {
        let a = random_matrix(20, 8, 1);
        let t = random_matrix(15, 5, 2);
        let (pa, pt) = pca_align(&a, &t, 5).unwrap();
        assert_eq!(pa.ncols(), 5);
        assert_eq!(pt.ncols(), 5);
        assert!(pca_align(&a, &t, 6).is_err());
    }

    #[test]
    fn full_width_projection_preserves_pairwise_distances() {
        let x = random_matrix(12, 6, 3);
        let p = PcaModel::fit(&x, 6).unwrap();
        let y = p.transform(&x);
        for i in 0..12 {
            for j in (i + 1)..12 {
                let dx: f64 = (0..6).map(|c| (x[[i, c]] - x[[j, c]]).powi(2)).sum::<f64>().sqrt();
                let dy: f64 = (0..6).map(|c| (y[[i, c]] - y[[j, c]]).powi(2)).sum::<f64>().sqrt();
                assert!((dx - dy).abs() < 1e-6, "distance {dx} became {dy}");
            }
        }
    }

    #[test]
    fn rank_one_matrix_has_unit_explained_variance() {
        let base = random_matrix(1, 4, 4);
        let x = Array2::from_shape_fn((10, 4), |(i, j)| (i as f64 + 1.0) * base[[0, j]]);
        let p = PcaModel::fit(&x, 1).unwrap();
        assert!((p.explained_variance_ratio[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn projected_columns_have_zero_mean() {
        let x = random_matrix(30, 5, 5);
        let p = PcaModel::fit(&x, 3).unwrap();
        let y = p.transform(&x);
        for c in 0..3 {
            let mean: f64 = (0..30).map(|r| y[[r, c]]).sum::<f64>() / 30.0;
            assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_sign_convention() {
        let x = random_matrix(25, 4, 6);
        let p1 = PcaModel::fit(&x, 4).unwrap();
        let p2 = PcaModel::fit(&x, 4).unwrap();
        assert_eq!(p1.components, p2.components);
        for c in 0..4 {
            let mut best = 0usize;
            for r in 1..4 {
                if p1.components[[r, c]].abs() > p1.components[[best, c]].abs() {
                    best = r;
                }
            }
            assert!(p1.components[[best, c]] > 0.0);
        }
    }
}
