//! Tape-based reverse-mode automatic differentiation over `Array2<f64>`.
//!
//! Every operation appends a node holding its forward value; `backward`
//! walks the tape in reverse and accumulates gradients. Scalars are 1x1
//! matrices. The op set is exactly what the attack model needs: dense and
//! sparse matrix products, broadcast elementwise products for pretext
//! tokens and gate columns, ELU/ReLU, row softmax, fused masked
//! cross-entropy, and a fused prototype-softmax entropy.

use crate::sparse::Csr;
use ndarray::Array2;
use std::rc::Rc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub usize);

enum Op {
    Leaf,
    MatMul(usize, usize),
    /// Constant sparse matrix (with its transpose) times a variable.
    Spmm(Rc<Csr>, Rc<Csr>, usize),
    Add(usize, usize),
    /// Matrix plus a broadcast 1 x d row (bias).
    AddRow(usize, usize),
    Mul(usize, usize),
    /// n x d matrix times a broadcast 1 x d row (pretext token).
    MulRow(usize, usize),
    /// n x d matrix times a broadcast n x 1 column (gate weight).
    MulCol(usize, usize),
    /// Elementwise product with a constant (dropout mask).
    MulConst(usize, Rc<Array2<f64>>),
    /// Column slice, n x K -> n x 1.
    Col(usize, usize),
    ConcatCols(usize, usize),
    Elu(usize),
    Relu(usize),
    RowSoftmax(usize),
    Scale(usize, f64),
    /// Mean cross-entropy of `logits` over the selected rows with the given
    /// labels (labels aligned with `rows`). Empty selection yields 0.
    MaskedCrossEntropy {
        logits: usize,
        rows: Rc<Vec<usize>>,
        labels: Rc<Vec<usize>>,
    },
    /// Sum over selected rows of the entropy of
    /// `softmax(cos(z_row, prototypes) / tau)`; prototypes are constants.
    ProtoEntropySum {
        z: usize,
        protos: Rc<Array2<f64>>,
        rows: Rc<Vec<usize>>,
        tau: f64,
    },
    /// Weighted sum of scalar nodes.
    WeightedSum(Vec<(usize, f64)>),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Array2<f64>>,
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

fn row_softmax(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Cosine similarities between one embedding row and every prototype row,
/// with the zero-norm convention (cosine 0).
fn proto_cosines(z: &Array2<f64>, row: usize, protos: &Array2<f64>) -> Vec<f64> {
    let d = z.ncols();
    let zn: f64 = (0..d).map(|c| z[[row, c]] * z[[row, c]]).sum::<f64>().sqrt();
    (0..protos.nrows())
        .map(|k| {
            let pn: f64 = (0..d).map(|c| protos[[k, c]] * protos[[k, c]]).sum::<f64>().sqrt();
            if zn < 1e-12 || pn < 1e-12 {
                0.0
            } else {
                let dot: f64 = (0..d).map(|c| z[[row, c]] * protos[[k, c]]).sum();
                dot / (zn * pn)
            }
        })
        .collect()
}

fn softmax_vec(s: &[f64]) -> Vec<f64> {
    let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = s.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|v| v / sum).collect()
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        let shape = value.raw_dim();
        self.nodes.push(Node { value, op });
        self.grads.push(Array2::zeros(shape));
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, x: Var) -> &Array2<f64> {
        &self.nodes[x.0].value
    }

    pub fn grad(&self, x: Var) -> &Array2<f64> {
        &self.grads[x.0]
    }

    pub fn scalar_value(&self, x: Var) -> f64 {
        debug_assert_eq!(self.nodes[x.0].value.len(), 1);
        self.nodes[x.0].value[[0, 0]]
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.nodes[a.0].value.dot(&self.nodes[b.0].value);
        self.push(v, Op::MatMul(a.0, b.0))
    }

    pub fn spmm(&mut self, m: Rc<Csr>, mt: Rc<Csr>, x: Var) -> Var {
        let v = m.matmul(&self.nodes[x.0].value);
        self.push(v, Op::Spmm(m, mt, x.0))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = &self.nodes[a.0].value + &self.nodes[b.0].value;
        self.push(v, Op::Add(a.0, b.0))
    }

    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let v = &self.nodes[a.0].value + &self.nodes[bias.0].value;
        self.push(v, Op::AddRow(a.0, bias.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = &self.nodes[a.0].value * &self.nodes[b.0].value;
        self.push(v, Op::Mul(a.0, b.0))
    }

    pub fn mul_row(&mut self, a: Var, token: Var) -> Var {
        let v = &self.nodes[a.0].value * &self.nodes[token.0].value;
        self.push(v, Op::MulRow(a.0, token.0))
    }

    pub fn mul_col(&mut self, a: Var, w: Var) -> Var {
        let v = &self.nodes[a.0].value * &self.nodes[w.0].value;
        self.push(v, Op::MulCol(a.0, w.0))
    }

    pub fn mul_const(&mut self, a: Var, c: Rc<Array2<f64>>) -> Var {
        let v = &self.nodes[a.0].value * c.as_ref();
        self.push(v, Op::MulConst(a.0, c))
    }

    pub fn col(&mut self, a: Var, k: usize) -> Var {
        let src = &self.nodes[a.0].value;
        let v = Array2::from_shape_fn((src.nrows(), 1), |(r, _)| src[[r, k]]);
        self.push(v, Op::Col(a.0, k))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (left, right) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (n, da, db) = (left.nrows(), left.ncols(), right.ncols());
        let v = Array2::from_shape_fn((n, da + db), |(r, c)| {
            if c < da {
                left[[r, c]]
            } else {
                right[[r, c - da]]
            }
        });
        self.push(v, Op::ConcatCols(a.0, b.0))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(elu);
        self.push(v, Op::Elu(a.0))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a.0))
    }

    pub fn row_softmax(&mut self, a: Var) -> Var {
        let v = row_softmax(&self.nodes[a.0].value);
        self.push(v, Op::RowSoftmax(a.0))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = &self.nodes[a.0].value * c;
        self.push(v, Op::Scale(a.0, c))
    }

    pub fn masked_cross_entropy(
        &mut self,
        logits: Var,
        rows: Rc<Vec<usize>>,
        labels: Rc<Vec<usize>>,
    ) -> Var {
        assert_eq!(rows.len(), labels.len(), "rows and labels must align");
        let values = &self.nodes[logits.0].value;
        let mut total = 0.0;
        for (&r, &label) in rows.iter().zip(labels.iter()) {
            let row = values.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[label];
        }
        let mean = if rows.is_empty() { 0.0 } else { total / rows.len() as f64 };
        let v = Array2::from_elem((1, 1), mean);
        self.push(v, Op::MaskedCrossEntropy { logits: logits.0, rows, labels })
    }

    pub fn proto_entropy_sum(
        &mut self,
        z: Var,
        protos: Rc<Array2<f64>>,
        rows: Rc<Vec<usize>>,
        tau: f64,
    ) -> Var {
        let values = &self.nodes[z.0].value;
        let mut total = 0.0;
        for &r in rows.iter() {
            let cos = proto_cosines(values, r, &protos);
            let scaled: Vec<f64> = cos.iter().map(|&c| c / tau).collect();
            let p = softmax_vec(&scaled);
            total -= p.iter().filter(|&&pk| pk > 0.0).map(|&pk| pk * pk.ln()).sum::<f64>();
        }
        let v = Array2::from_elem((1, 1), total);
        self.push(v, Op::ProtoEntropySum { z: z.0, protos, rows, tau })
    }

    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Var {
        let mut total = 0.0;
        for &(t, w) in terms {
            total += w * self.nodes[t.0].value[[0, 0]];
        }
        let v = Array2::from_elem((1, 1), total);
        self.push(v, Op::WeightedSum(terms.iter().map(|&(t, w)| (t.0, w)).collect()))
    }

    /// Backpropagate from a scalar loss node.
    pub fn backward(&mut self, loss: Var) {
        assert_eq!(self.nodes[loss.0].value.len(), 1, "backward needs a scalar loss");
        for g in &mut self.grads {
            g.fill(0.0);
        }
        self.grads[loss.0][[0, 0]] = 1.0;
        for idx in (0..self.nodes.len()).rev() {
            if self.grads[idx].iter().all(|&g| g == 0.0) {
                continue;
            }
            let go = self.grads[idx].clone();
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    let ga = go.dot(&self.nodes[b].value.t());
                    let gb = self.nodes[a].value.t().dot(&go);
                    self.grads[a] += &ga;
                    self.grads[b] += &gb;
                }
                Op::Spmm(_, mt, x) => {
                    let x = *x;
                    let gx = mt.matmul(&go);
                    self.grads[x] += &gx;
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    self.grads[a] += &go;
                    self.grads[b] += &go;
                }
                Op::AddRow(a, bias) => {
                    let (a, bias) = (*a, *bias);
                    self.grads[a] += &go;
                    let summed = go.sum_axis(ndarray::Axis(0)).insert_axis(ndarray::Axis(0));
                    self.grads[bias] += &summed;
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    let ga = &go * &self.nodes[b].value;
                    let gb = &go * &self.nodes[a].value;
                    self.grads[a] += &ga;
                    self.grads[b] += &gb;
                }
                Op::MulRow(a, token) => {
                    let (a, token) = (*a, *token);
                    let ga = &go * &self.nodes[token.0 - token.0 + token].value; // token value
                    self.grads[a] += &ga;
                    let gt = (&go * &self.nodes[a].value)
                        .sum_axis(ndarray::Axis(0))
                        .insert_axis(ndarray::Axis(0));
                    self.grads[token] += &gt;
                }
                Op::MulCol(a, w) => {
                    let (a, w) = (*a, *w);
                    let ga = &go * &self.nodes[w].value;
                    self.grads[a] += &ga;
                    let gw = (&go * &self.nodes[a].value)
                        .sum_axis(ndarray::Axis(1))
                        .insert_axis(ndarray::Axis(1));
                    self.grads[w] += &gw;
                }
                Op::MulConst(a, c) => {
                    let a = *a;
                    let ga = &go * c.as_ref();
                    self.grads[a] += &ga;
                }
                Op::Col(a, k) => {
                    let (a, k) = (*a, *k);
                    for r in 0..go.nrows() {
                        self.grads[a][[r, k]] += go[[r, 0]];
                    }
                }
                Op::ConcatCols(a, b) => {
                    let (a, b) = (*a, *b);
                    let da = self.nodes[a].value.ncols();
                    for r in 0..go.nrows() {
                        for c in 0..go.ncols() {
                            if c < da {
                                self.grads[a][[r, c]] += go[[r, c]];
                            } else {
                                self.grads[b][[r, c - da]] += go[[r, c]];
                            }
                        }
                    }
                }
                Op::Elu(a) => {
                    let a = *a;
                    let ga = &go * &self.nodes[a].value.mapv(elu_grad);
                    self.grads[a] += &ga;
                }
                Op::Relu(a) => {
                    let a = *a;
                    let ga = &go * &self.nodes[a].value.mapv(|x| (x > 0.0) as u8 as f64);
                    self.grads[a] += &ga;
                }
                Op::RowSoftmax(a) => {
                    let a = *a;
                    let y = &self.nodes[idx].value;
                    let mut ga = Array2::<f64>::zeros(y.raw_dim());
                    for r in 0..y.nrows() {
                        let dot: f64 = (0..y.ncols()).map(|c| go[[r, c]] * y[[r, c]]).sum();
                        for c in 0..y.ncols() {
                            ga[[r, c]] = y[[r, c]] * (go[[r, c]] - dot);
                        }
                    }
                    self.grads[a] += &ga;
                }
                Op::Scale(a, c) => {
                    let (a, c) = (*a, *c);
                    let ga = &go * c;
                    self.grads[a] += &ga;
                }
                Op::MaskedCrossEntropy { logits, rows, labels } => {
                    let logits = *logits;
                    if rows.is_empty() {
                        continue;
                    }
                    let scale = go[[0, 0]] / rows.len() as f64;
                    let values = self.nodes[logits].value.clone();
                    for (&r, &label) in rows.iter().zip(labels.iter()) {
                        let row = values.row(r);
                        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
                        let sum: f64 = exps.iter().sum();
                        for c in 0..row.len() {
                            let p = exps[c] / sum;
                            let delta = if c == label { 1.0 } else { 0.0 };
                            self.grads[logits][[r, c]] += scale * (p - delta);
                        }
                    }
                }
                Op::ProtoEntropySum { z, protos, rows, tau } => {
                    let z = *z;
                    let scale = go[[0, 0]];
                    let values = self.nodes[z].value.clone();
                    let d = values.ncols();
                    for &r in rows.iter() {
                        let zn: f64 =
                            (0..d).map(|c| values[[r, c]] * values[[r, c]]).sum::<f64>().sqrt();
                        if zn < 1e-12 {
                            continue; // cosine fixed at 0, no gradient
                        }
                        let cos = proto_cosines(&values, r, protos);
                        let scaled: Vec<f64> = cos.iter().map(|&c| c / tau).collect();
                        let p = softmax_vec(&scaled);
                        let entropy: f64 =
                            -p.iter().filter(|&&pk| pk > 0.0).map(|&pk| pk * pk.ln()).sum::<f64>();
                        for (k, (&pk, &ck)) in p.iter().zip(cos.iter()).enumerate() {
                            // dH/ds_k = p_k * (-H - ln p_k), s_k = cos_k / tau
                            if pk <= 0.0 {
                                continue;
                            }
                            let dh_ds = pk * (-entropy - pk.ln());
                            let pn: f64 = (0..d)
                                .map(|c| protos[[k, c]] * protos[[k, c]])
                                .sum::<f64>()
                                .sqrt();
                            if pn < 1e-12 {
                                continue;
                            }
                            for c in 0..d {
                                let dcos_dz = protos[[k, c]] / (zn * pn)
                                    - ck * values[[r, c]] / (zn * zn);
                                self.grads[z][[r, c]] += scale * dh_ds * dcos_dz / tau;
                            }
                        }
                    }
                }
                Op::WeightedSum(terms) => {
                    let g = go[[0, 0]];
                    for &(t, w) in terms.iter() {
                        self.grads[t][[0, 0]] += g * w;
                    }
                }
            }
        }
    }
}
