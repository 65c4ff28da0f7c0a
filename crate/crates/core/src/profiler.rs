//! Attack-task profiling: inter-attribute similarity, the two-level attack
//! hierarchy, and distance-correlation task weights.

use crate::error::{CoreError, Result};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// One agglomerative merge: cluster ids follow the scipy convention
/// (original tasks are `0..s`, the cluster created by step `k` is `s + k`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeStep {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Two-level grouping of attack tasks with its similarity evidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackHierarchy {
    /// Non-empty disjoint task-index sets covering `0..s`, ordered by their
    /// smallest member; members sorted.
    pub clusters: Vec<Vec<usize>>,
    /// Symmetric similarity matrix with unit diagonal (row-major).
    pub similarity: Vec<Vec<f64>>,
    pub linkage_trace: Vec<MergeStep>,
    pub is_flat: bool,
}

impl AttackHierarchy {
    pub fn task_count(&self) -> usize {
        self.clusters.iter().map(|c| c.len()).sum()
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    /// Cluster index for every task.
    pub fn task_to_cluster(&self) -> Vec<usize> {
        let s = self.task_count();
        let mut map = vec![0usize; s];
        for (j, cluster) in self.clusters.iter().enumerate() {
            for &t in cluster {
                map[t] = j;
            }
        }
        map
    }

    /// Flat hierarchy: one singleton cluster per task.
    pub fn flat(s: usize, similarity: Vec<Vec<f64>>) -> Self {
        AttackHierarchy {
            clusters: (0..s).map(|i| vec![i]).collect(),
            similarity,
            linkage_trace: Vec::new(),
            is_flat: true,
        }
    }
}

/// Encode sensitive attributes for distance-correlation inputs: binary
/// attributes contribute their raw class-index column, wider ones a one-hot
/// block.
pub fn sensitive_dcor_matrix(
    s: &Array2<usize>,
    cardinalities: &[usize],
    attributes: &[usize],
) -> Array2<f64> {
    let n = s.nrows();
    let width: usize = attributes
        .iter()
        .map(|&i| if cardinalities[i] == 2 { 1 } else { cardinalities[i] })
        .sum();
    let mut out = Array2::<f64>::zeros((n, width));
    let mut col = 0;
    for &i in attributes {
        if cardinalities[i] == 2 {
            for v in 0..n {
                out[[v, col]] = s[[v, i]] as f64;
            }
            col += 1;
        } else {
            for v in 0..n {
                out[[v, col + s[[v, i]]]] = 1.0;
            }
            col += cardinalities[i];
        }
    }
    out
}

fn pairwise_distances(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut d = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let mut acc = 0.0;
            for c in 0..x.ncols() {
                let diff = x[[i, c]] - x[[j, c]];
                acc += diff * diff;
            }
            let dist = acc.sqrt();
            d[[i, j]] = dist;
            d[[j, i]] = dist;
        }
    }
    d
}

fn double_center(d: &Array2<f64>) -> Array2<f64> {
    let n = d.nrows();
    let row_means: Vec<f64> = (0..n).map(|i| d.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    Array2::from_shape_fn((n, n), |(i, j)| d[[i, j]] - row_means[i] - row_means[j] + grand)
}

/// Sample distance correlation between two row-aligned matrices, in `[0,1]`.
/// Constant input (zero distance variance) yields 0 by convention.
pub fn distance_correlation(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    let n = a.nrows();
    if n != b.nrows() {
        return Err(CoreError::Dim(format!(
            "row mismatch: {} vs {}",
            a.nrows(),
            b.nrows()
        )));
    }
    if n < 2 {
        return Err(CoreError::Data("distance correlation needs n >= 2".into()));
    }
    if a.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::Data("distance correlation inputs must be finite".into()));
    }
    let da = double_center(&pairwise_distances(a));
    let db = double_center(&pairwise_distances(b));
    let n2 = (n * n) as f64;
    let dcov2 = (&da * &db).sum() / n2;
    let dvar_a = (&da * &da).sum() / n2;
    let dvar_b = (&db * &db).sum() / n2;
    if dvar_a <= 1e-24 || dvar_b <= 1e-24 {
        return Ok(0.0);
    }
    let dcor2 = (dcov2 / (dvar_a * dvar_b).sqrt()).max(0.0);
    Ok(dcor2.sqrt().min(1.0))
}

/// Distance correlation over a fixed-seed node subsample when `n` exceeds
/// `cap` (memory control for the O(n^2) distance matrices).
pub fn distance_correlation_capped(
    a: &Array2<f64>,
    b: &Array2<f64>,
    cap: usize,
    seed: u64,
) -> Result<f64> {
    let n = a.nrows();
    if n <= cap {
        return distance_correlation(a, b);
    }
    let rows = subsample_rows(n, cap, seed);
    let a_sub = a.select(ndarray::Axis(0), &rows);
    let b_sub = b.select(ndarray::Axis(0), &rows);
    distance_correlation(&a_sub, &b_sub)
}

/// Deterministic node subsample shared across a profiling pass.
pub fn subsample_rows(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rows.shuffle(&mut rng);
    rows.truncate(cap);
    rows.sort_unstable();
    rows
}

fn centered_one_hot(s: &Array2<usize>, attr: usize, card: usize) -> Array2<f64> {
    let n = s.nrows();
    let mut block = Array2::<f64>::zeros((n, card));
    for v in 0..n {
        block[[v, s[[v, attr]]]] = 1.0;
    }
    let means: Vec<f64> = (0..card).map(|k| block.column(k).sum() / n as f64).collect();
    for v in 0..n {
        for k in 0..card {
            block[[v, k]] -= means[k];
        }
    }
    block
}

fn is_constant_column(s: &Array2<usize>, attr: usize) -> bool {
    let first = s[[0, attr]];
    (0..s.nrows()).all(|v| s[[v, attr]] == first)
}

/// Pairwise similarity among sensitive attributes.
///
/// Blocks of equal cardinality are compared by the cosine of their flattened
/// centered one-hot encodings, which for binary attributes equals the Pearson
/// correlation of the raw columns. Unequal cardinalities fall back to the
/// mean pairwise cosine of centered indicator columns. Constant columns get
/// similarity 0 to all others.
pub fn cosine_similarity_matrix(s: &Array2<usize>, cardinalities: &[usize]) -> Array2<f64> {
    let n_attr = cardinalities.len();
    let blocks: Vec<Option<Array2<f64>>> = (0..n_attr)
        .map(|i| {
            if is_constant_column(s, i) {
                None
            } else {
                Some(centered_one_hot(s, i, cardinalities[i]))
            }
        })
        .collect();
    let mut sim = Array2::<f64>::zeros((n_attr, n_attr));
    for i in 0..n_attr {
        sim[[i, i]] = 1.0;
        for j in (i + 1)..n_attr {
            let value = match (&blocks[i], &blocks[j]) {
                (Some(bi), Some(bj)) => block_similarity(bi, bj),
                _ => 0.0,
            };
            sim[[i, j]] = value;
            sim[[j, i]] = value;
        }
    }
    sim
}

fn block_similarity(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    if a.ncols() == b.ncols() {
        let dot = (a * b).sum();
        let na = (a * a).sum().sqrt();
        let nb = (b * b).sum().sqrt();
        if na < 1e-12 || nb < 1e-12 {
            return 0.0;
        }
        dot / (na * nb)
    } else {
        let mut acc = 0.0;
        let mut count = 0.0;
        for ca in a.columns() {
            for cb in b.columns() {
                let dot: f64 = ca.iter().zip(cb.iter()).map(|(x, y)| x * y).sum();
                let na: f64 = ca.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb: f64 = cb.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na > 1e-12 && nb > 1e-12 {
                    acc += dot / (na * nb);
                }
                count += 1.0;
            }
        }
        if count > 0.0 {
            acc / count
        } else {
            0.0
        }
    }
}

/// Average-linkage agglomerative clustering on distance `1 - sim`, cut at
/// height `1 - theta_link`. When no pair reaches `theta_flat` in absolute
/// similarity the hierarchy degenerates to singletons (`is_flat`).
/// Ties break toward the lowest task index.
pub fn build_attack_hierarchy(
    sim: &Array2<f64>,
    theta_link: f64,
    theta_flat: f64,
) -> AttackHierarchy {
    let s = sim.nrows();
    let sim_rows: Vec<Vec<f64>> = (0..s).map(|i| sim.row(i).to_vec()).collect();
    if s <= 1 {
        return AttackHierarchy::flat(s, sim_rows);
    }
    let max_abs = (0..s)
        .flat_map(|i| (0..s).filter(move |&j| j != i).map(move |j| sim[[i, j]].abs()))
        .fold(0.0f64, f64::max);
    if max_abs < theta_flat {
        return AttackHierarchy::flat(s, sim_rows);
    }

    // Full dendrogram by unweighted average linkage over task distances.
    let dist = |i: usize, j: usize| 1.0 - sim[[i, j]];
    #[derive(Clone)]
    struct Active {
        id: usize,
        members: Vec<usize>,
    }
    let mut active: Vec<Active> =
        (0..s).map(|i| Active { id: i, members: vec![i] }).collect();
    let mut trace = Vec::with_capacity(s - 1);
    let mut next_id = s;
    while active.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..active.len() {
            for b in (a + 1)..active.len() {
                let mut acc = 0.0;
                for &x in &active[a].members {
                    for &y in &active[b].members {
                        acc += dist(x, y);
                    }
                }
                let d = acc / (active[a].members.len() * active[b].members.len()) as f64;
                let key = (
                    active[a].members[0].min(active[b].members[0]),
                    active[a].members[0].max(active[b].members[0]),
                );
                let better = match best {
                    None => true,
                    Some((bd, bi, bj)) => {
                        let bkey = (
                            active[bi].members[0].min(active[bj].members[0]),
                            active[bi].members[0].max(active[bj].members[0]),
                        );
                        d < bd - 1e-12 || ((d - bd).abs() <= 1e-12 && key < bkey)
                    }
                };
                if better {
                    best = Some((d, a, b));
                }
            }
        }
        let (d, a, b) = best.expect("at least one pair while len > 1");
        let (first, second) = (a.min(b), a.max(b));
        let right = active.remove(second);
        let left = active.remove(first);
        let mut members = left.members.clone();
        members.extend(&right.members);
        members.sort_unstable();
        trace.push(MergeStep {
            left: left.id.min(right.id),
            right: left.id.max(right.id),
            height: d,
            size: members.len(),
        });
        active.push(Active { id: next_id, members });
        next_id += 1;
    }

    // Cut the dendrogram: apply merges with height <= 1 - theta_link.
    let cut = 1.0 - theta_link;
    let mut parent: Vec<usize> = (0..s).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    let mut step_members: Vec<Vec<usize>> = (0..s).map(|i| vec![i]).collect();
    for step in &trace {
        let left = step_members[step.left].clone();
        let right = step_members[step.right].clone();
        let mut merged = left.clone();
        merged.extend(&right);
        merged.sort_unstable();
        step_members.push(merged);
        if step.height <= cut + 1e-12 {
            let ra = find(&mut parent, left[0]);
            let rb = find(&mut parent, right[0]);
            parent[ra] = rb;
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for t in 0..s {
        let root = find(&mut parent, t);
        groups.entry(root).or_default().push(t);
    }
    let mut clusters: Vec<Vec<usize>> = groups.into_values().collect();
    for c in &mut clusters {
        c.sort_unstable();
    }
    clusters.sort_by_key(|c| c[0]);
    let is_flat = clusters.iter().all(|c| c.len() == 1);
    AttackHierarchy { clusters, similarity: sim_rows, linkage_trace: trace, is_flat }
}

/// Per-task weights: the distance correlation between each attribute and the
/// augmented features joined with the remaining attributes. For graphs above
/// `cap` nodes a single fixed-seed subsample is shared across tasks.
pub fn task_weights(
    s: &Array2<usize>,
    cardinalities: &[usize],
    x_star: &Array2<f64>,
    cap: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = s.nrows();
    let n_attr = cardinalities.len();
    let rows: Vec<usize> = if n > cap {
        subsample_rows(n, cap, seed)
    } else {
        (0..n).collect()
    };
    let s_sub = s.select(ndarray::Axis(0), &rows);
    let x_sub = x_star.select(ndarray::Axis(0), &rows);
    let mut weights = Vec::with_capacity(n_attr);
    for i in 0..n_attr {
        let a = sensitive_dcor_matrix(&s_sub, cardinalities, &[i]);
        let others: Vec<usize> = (0..n_attr).filter(|&j| j != i).collect();
        let rest = sensitive_dcor_matrix(&s_sub, cardinalities, &others);
        let mut b = Array2::<f64>::zeros((rows.len(), x_sub.ncols() + rest.ncols()));
        for v in 0..rows.len() {
            for c in 0..x_sub.ncols() {
                b[[v, c]] = x_sub[[v, c]];
            }
            for c in 0..rest.ncols() {
                b[[v, x_sub.ncols() + c]] = rest[[v, c]];
            }
        }
        weights.push(distance_correlation(&a, &b)?);
    }
    Ok(weights)
}
