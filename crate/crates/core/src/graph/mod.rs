//! Graph data model: attributed graphs with multiple sensitive attributes,
//! dataset ingestion, splitting, synthetic generation, and feature plumbing.

mod features;
mod io;
mod split;
mod synthetic;

pub use features::{augment_features, inferred_label_classes, pca_align, PcaModel};
pub use io::{load_graph, LoadSchema};
pub use split::{split_train_val_test, split_victim_auxiliary};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use crate::error::{CoreError, Result};
use crate::sparse::Csr;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Train/validation/test node masks. Pairwise disjoint, union covers all nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitMasks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl SplitMasks {
    pub fn all_train(n: usize) -> Self {
        SplitMasks { train: vec![true; n], val: vec![false; n], test: vec![false; n] }
    }

    pub fn train_indices(&self) -> Vec<usize> {
        mask_indices(&self.train)
    }

    pub fn val_indices(&self) -> Vec<usize> {
        mask_indices(&self.val)
    }

    pub fn test_indices(&self) -> Vec<usize> {
        mask_indices(&self.test)
    }
}

pub fn mask_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
}

/// Undirected attributed graph with non-sensitive features, optional sensitive
/// attribute labels, optional task labels, and split masks.
///
/// Values are immutable after construction; all pipeline stages take shared
/// references and return new graphs.
#[derive(Debug, Clone)]
pub struct AttributedGraph {
    pub node_count: usize,
    /// Undirected edges as `(u, v)` with `u < v`, deduplicated and sorted.
    pub edges: Vec<(usize, usize)>,
    /// Sorted adjacency lists derived from `edges`.
    neighbors: Vec<Vec<usize>>,
    /// Non-sensitive node features, `|V| x (d - s)`.
    pub features: Array2<f64>,
    /// Sensitive attributes as class indices, `|V| x s`. Absent on targets
    /// whose sensitive columns were masked before release.
    pub sensitive: Option<Array2<usize>>,
    /// Task labels as class indices. Absent on label-free targets.
    pub task_labels: Option<Vec<usize>>,
    /// Number of classes per sensitive attribute.
    pub sensitive_cardinalities: Vec<usize>,
    pub masks: SplitMasks,
}

impl AttributedGraph {
    /// Validate and build a graph. Edges may arrive in any orientation and
    /// with duplicates; they are normalized to deduplicated `u < v` pairs and
    /// self-loops are stripped.
    pub fn new(
        node_count: usize,
        raw_edges: &[(usize, usize)],
        features: Array2<f64>,
        sensitive: Option<Array2<usize>>,
        task_labels: Option<Vec<usize>>,
        sensitive_cardinalities: Vec<usize>,
        masks: SplitMasks,
    ) -> Result<Self> {
        if features.nrows() != node_count {
            return Err(CoreError::Dim(format!(
                "feature rows {} != node count {}",
                features.nrows(),
                node_count
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Data("feature matrix contains non-finite values".into()));
        }
        if let Some(s) = &sensitive {
            if s.nrows() != node_count {
                return Err(CoreError::Dim(format!(
                    "sensitive rows {} != node count {}",
                    s.nrows(),
                    node_count
                )));
            }
            if s.ncols() != sensitive_cardinalities.len() {
                return Err(CoreError::Dim(format!(
                    "sensitive columns {} != cardinality list length {}",
                    s.ncols(),
                    sensitive_cardinalities.len()
                )));
            }
            for (i, &card) in sensitive_cardinalities.iter().enumerate() {
                if card < 2 {
                    return Err(CoreError::Data(format!(
                        "sensitive attribute {i} has cardinality {card}, need >= 2"
                    )));
                }
                for v in 0..node_count {
                    if s[[v, i]] >= card {
                        return Err(CoreError::Data(format!(
                            "sensitive value {} at node {v}, attribute {i} exceeds cardinality {card}",
                            s[[v, i]]
                        )));
                    }
                }
            }
        }
        if let Some(y) = &task_labels {
            if y.len() != node_count {
                return Err(CoreError::Dim(format!(
                    "label length {} != node count {}",
                    y.len(),
                    node_count
                )));
            }
        }
        for (name, mask) in [("train", &masks.train), ("val", &masks.val), ("test", &masks.test)] {
            if mask.len() != node_count {
                return Err(CoreError::Dim(format!(
                    "{name} mask length {} != node count {}",
                    mask.len(),
                    node_count
                )));
            }
        }
        for v in 0..node_count {
            let hits = masks.train[v] as u8 + masks.val[v] as u8 + masks.test[v] as u8;
            if hits != 1 {
                return Err(CoreError::Data(format!(
                    "node {v} belongs to {hits} split masks, expected exactly 1"
                )));
            }
        }

        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(raw_edges.len());
        for &(u, v) in raw_edges {
            if u >= node_count || v >= node_count {
                return Err(CoreError::Data(format!(
                    "edge ({u},{v}) references a node >= {node_count}"
                )));
            }
            if u == v {
                continue; // self-loops stripped on construction
            }
            edges.push((u.min(v), u.max(v)));
        }
        edges.sort_unstable();
        edges.dedup();

        let mut neighbors = vec![Vec::new(); node_count];
        for &(u, v) in &edges {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }

        Ok(AttributedGraph {
            node_count,
            edges,
            neighbors,
            features,
            sensitive,
            task_labels,
            sensitive_cardinalities,
            masks,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    /// Symmetric 0/1 adjacency with zero diagonal, materialized sparse.
    pub fn adjacency(&self) -> Csr {
        let mut triplets = Vec::with_capacity(2 * self.edges.len());
        for &(u, v) in &self.edges {
            triplets.push((u, v, 1.0));
            triplets.push((v, u, 1.0));
        }
        Csr::from_triplets(self.node_count, self.node_count, &triplets)
    }

    /// Node degrees (row sums of the adjacency matrix).
    pub fn node_degree(&self) -> Vec<usize> {
        self.neighbors.iter().map(|n| n.len()).collect()
    }

    /// Per-node attribute homophily: the mean over sensitive attributes of
    /// the fraction of neighbors sharing the node's value. Isolated nodes
    /// get 0 by convention.
    pub fn node_homophily(&self) -> Result<Vec<f64>> {
        let s = self
            .sensitive
            .as_ref()
            .ok_or_else(|| CoreError::Data("homophily requires sensitive attributes".into()))?;
        let n_attr = s.ncols();
        let mut out = vec![0.0; self.node_count];
        for v in 0..self.node_count {
            let neigh = &self.neighbors[v];
            if neigh.is_empty() || n_attr == 0 {
                continue;
            }
            let mut acc = 0.0;
            for i in 0..n_attr {
                let same = neigh.iter().filter(|&&u| s[[u, i]] == s[[v, i]]).count();
                acc += same as f64 / neigh.len() as f64;
            }
            out[v] = acc / n_attr as f64;
        }
        Ok(out)
    }

    /// Mean over edges and attributes of endpoint agreement.
    pub fn edge_homophily(&self) -> Result<f64> {
        let s = self
            .sensitive
            .as_ref()
            .ok_or_else(|| CoreError::Data("homophily requires sensitive attributes".into()))?;
        if self.edges.is_empty() || s.ncols() == 0 {
            return Ok(0.0);
        }
        let mut agree = 0usize;
        for &(u, v) in &self.edges {
            for i in 0..s.ncols() {
                agree += (s[[u, i]] == s[[v, i]]) as usize;
            }
        }
        Ok(agree as f64 / (self.edges.len() * s.ncols()) as f64)
    }

    /// Empirical class priors per sensitive attribute.
    pub fn sensitive_priors(&self) -> Result<Vec<Vec<f64>>> {
        let s = self
            .sensitive
            .as_ref()
            .ok_or_else(|| CoreError::Data("priors require sensitive attributes".into()))?;
        let mut priors = Vec::with_capacity(self.sensitive_cardinalities.len());
        for (i, &card) in self.sensitive_cardinalities.iter().enumerate() {
            let mut counts = vec![0usize; card];
            for v in 0..self.node_count {
                counts[s[[v, i]]] += 1;
            }
            let total = self.node_count.max(1) as f64;
            priors.push(counts.into_iter().map(|c| c as f64 / total).collect());
        }
        Ok(priors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn simple_graph(edges: &[(usize, usize)], n: usize, s: Array2<usize>) -> AttributedGraph {
        let feats = Array2::zeros((n, 2));
        let cards = vec![2; s.ncols()];
        AttributedGraph::new(n, edges, feats, Some(s), None, cards, SplitMasks::all_train(n))
            .unwrap()
    }

    #[test]
    fn duplicate_and_reversed_edges_collapse() {
        let g = simple_graph(&[(0, 1), (1, 0), (0, 1)], 3, Array2::<usize>::zeros((3, 1)));
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.neighbors(0), &[1]);
    }

    #[test]
    fn self_loops_are_stripped() {
        let g = simple_graph(&[(0, 0), (0, 1)], 2, Array2::<usize>::zeros((2, 1)));
        assert_eq!(g.edge_count(), 1);
        let dense = g.adjacency().to_dense();
        assert_eq!(dense[[0, 0]], 0.0);
        assert_eq!(dense[[0, 1]], 1.0);
        assert_eq!(dense[[1, 0]], 1.0);
    }

    #[test]
    fn triangle_same_attribute_has_homophily_one() {
        let s = array![[1usize], [1], [1]];
        let g = simple_graph(&[(0, 1), (1, 2), (0, 2)], 3, s);
        let h = g.node_homophily().unwrap();
        assert!(h.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn star_center_half_agreeing_neighbors() {
        // Center node 0 with neighbors 1..4; two agree, two disagree.
        let s = array![[0usize], [0], [0], [1], [1]];
        let g = simple_graph(&[(0, 1), (0, 2), (0, 3), (0, 4)], 5, s);
        let h = g.node_homophily().unwrap();
        assert!((h[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn isolated_node_conventions() {
        let s = array![[0usize], [1]];
        let g = simple_graph(&[], 2, s);
        assert_eq!(g.node_degree(), vec![0, 0]);
        assert_eq!(g.node_homophily().unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn sensitive_out_of_range_rejected() {
        let s = array![[2usize]];
        let r = AttributedGraph::new(
            1,
            &[],
            Array2::zeros((1, 1)),
            Some(s),
            None,
            vec![2],
            SplitMasks::all_train(1),
        );
        assert!(r.is_err());
    }

    #[test]
    fn overlapping_masks_rejected() {
        let mut masks = SplitMasks::all_train(2);
        masks.val[0] = true;
        let r = AttributedGraph::new(
            2,
            &[],
            Array2::zeros((2, 1)),
            None,
            None,
            vec![],
            masks,
        );
        assert!(r.is_err());
    }

    #[test]
    fn non_finite_features_rejected() {
        let mut feats = Array2::zeros((1, 1));
        feats[[0, 0]] = f64::NAN;
        let r = AttributedGraph::new(1, &[], feats, None, None, vec![], SplitMasks::all_train(1));
        assert!(r.is_err());
    }
}
