//! Victim/auxiliary graph splitting and train/val/test mask assignment.

use super::{AttributedGraph, SplitMasks};
use crate::error::{CoreError, Result};
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Split a graph into two induced subgraphs on a random half/half node
/// partition (sizes differ by at most one; the first half is the victim).
/// Edges crossing the partition are dropped.
pub fn split_victim_auxiliary(
    g: &AttributedGraph,
    seed: u64,
) -> Result<(AttributedGraph, AttributedGraph)> {
    if g.node_count < 2 {
        return Err(CoreError::Data(format!(
            "victim/auxiliary split needs >= 2 nodes, got {}",
            g.node_count
        )));
    }
    let mut order: Vec<usize> = (0..g.node_count).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let half = g.node_count.div_ceil(2);
    let mut victim_nodes = order[..half].to_vec();
    let mut aux_nodes = order[half..].to_vec();
    victim_nodes.sort_unstable();
    aux_nodes.sort_unstable();
    Ok((induced_subgraph(g, &victim_nodes)?, induced_subgraph(g, &aux_nodes)?))
}

/// Induced subgraph on a sorted node subset, re-indexing nodes to 0..k.
pub fn induced_subgraph(g: &AttributedGraph, nodes: &[usize]) -> Result<AttributedGraph> {
    let mut position = vec![usize::MAX; g.node_count];
    for (new, &old) in nodes.iter().enumerate() {
        position[old] = new;
    }
    let edges: Vec<(usize, usize)> = g
        .edges
        .iter()
        .filter(|&&(u, v)| position[u] != usize::MAX && position[v] != usize::MAX)
        .map(|&(u, v)| (position[u], position[v]))
        .collect();
    let features = g.features.select(Axis(0), nodes);
    let sensitive = g.sensitive.as_ref().map(|s| s.select(Axis(0), nodes));
    let task_labels = g
        .task_labels
        .as_ref()
        .map(|y| nodes.iter().map(|&v| y[v]).collect::<Vec<usize>>());
    let masks = SplitMasks {
        train: nodes.iter().map(|&v| g.masks.train[v]).collect(),
        val: nodes.iter().map(|&v| g.masks.val[v]).collect(),
        test: nodes.iter().map(|&v| g.masks.test[v]).collect(),
    };
    AttributedGraph::new(
        nodes.len(),
        &edges,
        features,
        sensitive,
        task_labels,
        g.sensitive_cardinalities.clone(),
        masks,
    )
}

/// Assign train/val/test masks by the given ratios. Floor counts per split;
/// remainder nodes go to train.
pub fn split_train_val_test(
    g: &AttributedGraph,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<AttributedGraph> {
    let total = ratios.0 + ratios.1 + ratios.2;
    if (total - 1.0).abs() > 1e-9 {
        return Err(CoreError::Config(format!("split ratios sum to {total}, expected 1")));
    }
    if ratios.0 < 0.0 || ratios.1 < 0.0 || ratios.2 < 0.0 {
        return Err(CoreError::Config("split ratios must be non-negative".into()));
    }
    let n = g.node_count;
    let n_val = (ratios.1 * n as f64 + 1e-9).floor() as usize;
    let n_test = (ratios.2 * n as f64 + 1e-9).floor() as usize;
    let n_train = n - n_val - n_test; // remainder to train

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut masks = SplitMasks {
        train: vec![false; n],
        val: vec![false; n],
        test: vec![false; n],
    };
    for (pos, &v) in order.iter().enumerate() {
        if pos < n_train {
            masks.train[v] = true;
        } else if pos < n_train + n_val {
            masks.val[v] = true;
        } else {
            masks.test[v] = true;
        }
    }
    let mut out = g.clone();
    out.masks = masks;
    // Re-validate through the constructor to keep the invariant chain intact.
    AttributedGraph::new(
        out.node_count,
        &out.edges,
        out.features,
        out.sensitive,
        out.task_labels,
        out.sensitive_cardinalities,
        out.masks,
    )
}

/// Feature matrix restricted to rows of a node subset.
pub fn select_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    m.select(Axis(0), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn ring_graph(n: usize) -> AttributedGraph {
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let mut feats = Array2::zeros((n, 3));
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for v in feats.iter_mut() {
            *v = rng.random::<f64>();
        }
        let s = Array2::from_shape_fn((n, 2), |(i, j)| (i + j) % 2);
        AttributedGraph::new(
            n,
            &edges,
            feats,
            Some(s),
            Some((0..n).map(|i| i % 2).collect()),
            vec![2, 2],
            SplitMasks::all_train(n),
        )
        .unwrap()
    }

    #[test]
    fn halves_are_balanced_and_account_for_all_edges() {
        let g = ring_graph(101);
        let (victim, aux) = split_victim_auxiliary(&g, 3).unwrap();
        assert_eq!(victim.node_count + aux.node_count, 101);
        assert!(victim.node_count.abs_diff(aux.node_count) <= 1);
        // Edge accounting: kept edges + cross-partition edges = total.
        let kept = victim.edge_count() + aux.edge_count();
        assert!(kept <= g.edge_count());
        let cross = g.edge_count() - kept;
        assert!(cross > 0, "a ring split must cut at least one edge");
    }

    #[test]
    fn two_node_graph_splits_to_singletons() {
        let feats = Array2::zeros((2, 1));
        let g = AttributedGraph::new(
            2,
            &[(0, 1)],
            feats,
            None,
            None,
            vec![],
            SplitMasks::all_train(2),
        )
        .unwrap();
        let (a, b) = split_victim_auxiliary(&g, 0).unwrap();
        assert_eq!(a.node_count, 1);
        assert_eq!(b.node_count, 1);
        assert_eq!(a.edge_count() + b.edge_count(), 0);
    }

    #[test]
    fn same_seed_gives_identical_partition() {
        let g = ring_graph(40);
        let (a1, b1) = split_victim_auxiliary(&g, 7).unwrap();
        let (a2, b2) = split_victim_auxiliary(&g, 7).unwrap();
        assert_eq!(a1.features, a2.features);
        assert_eq!(b1.features, b2.features);
        assert_eq!(a1.edges, a2.edges);
        assert_eq!(b1.edges, b2.edges);
    }

    #[test]
    fn ten_nodes_split_6_2_2() {
        let g = ring_graph(10);
        let g = split_train_val_test(&g, (0.6, 0.2, 0.2), 1).unwrap();
        assert_eq!(g.masks.train_indices().len(), 6);
        assert_eq!(g.masks.val_indices().len(), 2);
        assert_eq!(g.masks.test_indices().len(), 2);
    }

    #[test]
    fn single_node_goes_to_train() {
        let feats = Array2::zeros((1, 1));
        let g = AttributedGraph::new(1, &[], feats, None, None, vec![], SplitMasks::all_train(1))
            .unwrap();
        let g = split_train_val_test(&g, (0.6, 0.2, 0.2), 1).unwrap();
        assert_eq!(g.masks.train_indices(), vec![0]);
        assert!(g.masks.val_indices().is_empty());
        assert!(g.masks.test_indices().is_empty());
    }

    #[test]
    fn seven_nodes_follow_floor_then_remainder() {
        // Oracle: floor per split, remainder assigned to train.
        let n = 7usize;
        let n_val = (0.2 * n as f64).floor() as usize;
        let n_test = (0.2 * n as f64).floor() as usize;
        let n_train = n - n_val - n_test;
        assert_eq!((n_train, n_val, n_test), (5, 1, 1));
        let g = ring_graph(7);
        let g = split_train_val_test(&g, (0.6, 0.2, 0.2), 5).unwrap();
        assert_eq!(g.masks.train_indices().len(), 5);
        assert_eq!(g.masks.val_indices().len(), 1);
        assert_eq!(g.masks.test_indices().len(), 1);
    }

    #[test]
    fn bad_ratios_rejected() {
        let g = ring_graph(4);
        assert!(split_train_val_test(&g, (0.5, 0.2, 0.2), 1).is_err());
    }
}
