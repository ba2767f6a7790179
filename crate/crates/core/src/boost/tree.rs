use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{BoostConfig, BoostError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        weight: f64,
    },
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
}

/// One CART regression tree stored as a flat node array, root at index 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub class_index: usize,
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                Node::Leaf { weight } => return weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    idx = if row[feature] < threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], idx: usize) -> usize {
            match nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { weight } => Some(*weight),
            Node::Split { .. } => None,
        })
    }

    pub fn splits(&self) -> usize {
        self.nodes.len() - self.leaves().count()
    }

    pub(crate) fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { weight } = n {
                *weight *= factor;
            }
        }
    }

    /// Structural validity: children exist and are visited exactly once.
    pub fn is_well_formed(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if i >= self.nodes.len() || seen[i] {
                return false;
            }
            seen[i] = true;
            match self.nodes[i] {
                Node::Leaf { weight } if !weight.is_finite() => return false,
                Node::Leaf { .. } => {}
                Node::Split {
                    left,
                    right,
                    threshold,
                    ..
                } => {
                    if !threshold.is_finite() {
                        return false;
                    }
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    row: u32,
    /// Index into the column's distinct values.
    rank: u32,
}

/// Every feature column's rows sorted by value (ties by row index). Built once
/// and shared by all trees over the same feature matrix.
#[derive(Clone, Debug)]
pub struct SortedColumns {
    columns: Vec<Vec<Entry>>,
    /// Distinct values of each column, ascending.
    values: Vec<Vec<f64>>,
    rows: usize,
}

impl SortedColumns {
    pub fn new(features: ArrayView2<'_, f64>) -> SortedColumns {
        let (rows, cols) = features.dim();
        let (columns, values) = (0..cols)
            .map(|f| {
                let col = features.column(f);
                let mut order: Vec<u32> = (0..rows as u32).collect();
                order.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                let mut values: Vec<f64> = Vec::new();
                let entries = order
                    .into_iter()
                    .map(|row| {
                        let v = col[row as usize];
                        if values.last() != Some(&v) {
                            values.push(v);
                        }
                        Entry {
                            row,
                            rank: values.len() as u32 - 1,
                        }
                    })
                    .collect();
                (entries, values)
            })
            .unzip();
        SortedColumns {
            columns,
            values,
            rows,
        }
    }
}

/// Open-node slot of a row.
type Slot = u8;
const NO_NODE: Slot = Slot::MAX;
/// Deepest tree whose `2^depth` bottom nodes still fit in a [`Slot`].
pub const MAX_TREE_DEPTH: usize = 7;

#[derive(Clone, Copy)]
struct Open {
    node: usize,
    grad: f64,
    hess: f64,
    depth: usize,
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
    left_grad: f64,
    left_hess: f64,
}

#[derive(Clone, Copy)]
struct Scan {
    grad: f64,
    hess: f64,
    /// Rank of the last value added, `u32::MAX` before the first.
    last: u32,
}

const UNSEEN: Scan = Scan {
    grad: 0.0,
    hess: 0.0,
    last: u32::MAX,
};

#[inline(always)]
fn continue_scan(s: &mut Scan, [g, h]: [f64; 2], rank: u32) {
    s.grad += g;
    s.hess += h;
    s.last = rank;
}

/// Threshold strictly between two consecutive distinct values.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t > lo {
        t
    } else {
        hi
    }
}

pub(crate) fn split_gain(gl: f64, hl: f64, g: f64, h: f64, lambda: f64, gamma: f64) -> f64 {
    let (gr, hr) = (g - gl, h - hl);
    0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (h + lambda)) - gamma
}

/// Exact greedy tree over the rows where `row_mask` is true.
pub fn build_tree(
    features: ArrayView2<'_, f64>,
    grad: &[f64],
    hess: &[f64],
    config: &BoostConfig,
    row_mask: &[bool],
) -> Result<RegressionTree, BoostError> {
    let sorted = SortedColumns::new(features);
    build_tree_presorted(features, &sorted, grad, hess, config, row_mask)
}

/// [`build_tree`] reusing presorted columns. Grows the tree level by level:
/// each level is one pass over every sorted column, scoring every boundary
/// between distinct values for every open node.
pub fn build_tree_presorted(
    features: ArrayView2<'_, f64>,
    sorted: &SortedColumns,
    grad: &[f64],
    hess: &[f64],
    config: &BoostConfig,
    row_mask: &[bool],
) -> Result<RegressionTree, BoostError> {
    build_tree_in(
        features,
        sorted,
        grad,
        hess,
        config,
        row_mask,
        &mut Workspace::default(),
    )
}

/// Scratch buffers reused across trees.
#[derive(Default)]
pub(crate) struct Workspace {
    gh: Vec<[f64; 2]>,
}

pub(crate) fn build_tree_in(
    features: ArrayView2<'_, f64>,
    sorted: &SortedColumns,
    grad: &[f64],
    hess: &[f64],
    config: &BoostConfig,
    row_mask: &[bool],
    workspace: &mut Workspace,
) -> Result<RegressionTree, BoostError> {
    let n = features.nrows();
    if grad.len() != n || hess.len() != n || row_mask.len() != n || sorted.rows != n {
        return Err(BoostError::Shape(format!(
            "{n} feature rows, {} gradients, {} hessians, {} mask entries",
            grad.len(),
            hess.len(),
            row_mask.len()
        )));
    }
    let (lambda, gamma) = (config.reg_lambda, config.gamma);

    if config.max_depth > MAX_TREE_DEPTH {
        return Err(BoostError::Config(format!(
            "max_depth {} exceeds the supported {MAX_TREE_DEPTH}",
            config.max_depth
        )));
    }

    // Gradient pairs laid out in each column's sorted order, so every level
    // streams them instead of gathering by row.
    let mut gh = std::mem::take(&mut workspace.gh);
    gh.clear();
    for column in &sorted.columns {
        gh.extend(
            column
                .iter()
                .map(|e| [grad[e.row as usize], hess[e.row as usize]]),
        );
    }
    let mut slot = vec![NO_NODE; n];
    let (mut g0, mut h0) = (0.0, 0.0);
    for r in (0..n).filter(|&r| row_mask[r]) {
        slot[r] = 0;
        g0 += grad[r];
        h0 += hess[r];
    }
    if slot.iter().all(|&s| s == NO_NODE) {
        return Err(BoostError::EmptyRows);
    }

    let mut nodes = vec![Node::Leaf { weight: 0.0 }];
    let mut open = vec![Open {
        node: 0,
        grad: g0,
        hess: h0,
        depth: 0,
    }];

    while !open.is_empty() {
        let mut best: Vec<Option<Best>> = vec![None; open.len()];
        // Every open node shares a depth, so the level is split entirely or not at all.
        if open[0].depth < config.max_depth {
            // Score of the unsplit parent, in the units of the per-boundary comparison.
            let parent: Vec<f64> = open
                .iter()
                .map(|o| o.grad * o.grad / (o.hess + lambda))
                .collect();
            // The gain is non-decreasing in the children's score, so a boundary can only
            // improve on the node's best split if its score beats the best one seen so far.
            let mut bar = parent;
            let mut scan = vec![UNSEEN; open.len()];
            for (f, column) in sorted.columns.iter().enumerate() {
                scan.iter_mut().for_each(|s| *s = UNSEEN);
                for (e, &pair) in column.iter().zip(&gh[f * n..(f + 1) * n]) {
                    let k = slot[e.row as usize];
                    if k == NO_NODE {
                        continue;
                    }
                    let k = k as usize;
                    let s = &mut scan[k];
                    if s.last != u32::MAX && e.rank > s.last {
                        let o = &open[k];
                        let (gr, hr) = (o.grad - s.grad, o.hess - s.hess);
                        let (dl, dr) = (s.hess + lambda, hr + lambda);
                        // Division-free form of `children > bar`, slackened so that
                        // rounding never rejects a true improvement.
                        let lhs = s.grad * s.grad * dr + gr * gr * dl;
                        if lhs >= bar[k] * (dl * dr) * (1.0 - 1e-9) {
                            let children = s.grad * s.grad / dl + gr * gr / dr;
                            if children <= bar[k] {
                                continue_scan(s, pair, e.rank);
                                continue;
                            }
                            let gain = split_gain(s.grad, s.hess, o.grad, o.hess, lambda, gamma);
                            if gain > best[k].map_or(0.0, |b| b.gain) {
                                bar[k] = children;
                                best[k] = Some(Best {
                                    gain,
                                    feature: f,
                                    threshold: midpoint(
                                        sorted.values[f][s.last as usize],
                                        sorted.values[f][e.rank as usize],
                                    ),
                                    left_grad: s.grad,
                                    left_hess: s.hess,
                                });
                            }
                        }
                    }
                    continue_scan(s, pair, e.rank);
                }
            }
        }

        let mut next = Vec::new();
        let mut remap = vec![(NO_NODE, NO_NODE); open.len()];
        for (k, o) in open.iter().enumerate() {
            match best[k] {
                Some(b) => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf { weight: 0.0 });
                    nodes.push(Node::Leaf { weight: 0.0 });
                    nodes[o.node] = Node::Split {
                        feature: b.feature,
                        threshold: b.threshold,
                        gain: b.gain,
                        left,
                        right: left + 1,
                    };
                    remap[k] = (next.len() as Slot, next.len() as Slot + 1);
                    next.push(Open {
                        node: left,
                        grad: b.left_grad,
                        hess: b.left_hess,
                        depth: o.depth + 1,
                    });
                    next.push(Open {
                        node: left + 1,
                        grad: o.grad - b.left_grad,
                        hess: o.hess - b.left_hess,
                        depth: o.depth + 1,
                    });
                }
                None => {
                    nodes[o.node] = Node::Leaf {
                        weight: -o.grad / (o.hess + lambda),
                    };
                }
            }
        }
        for (r, s) in slot.iter_mut().enumerate() {
            if *s == NO_NODE {
                continue;
            }
            let k = *s as usize;
            *s = match best[k] {
                Some(b) => {
                    if features[[r, b.feature]] < b.threshold {
                        remap[k].0
                    } else {
                        remap[k].1
                    }
                }
                None => NO_NODE,
            };
        }
        open = next;
    }

    workspace.gh = gh;
    Ok(RegressionTree {
        class_index: 0,
        nodes,
    })
}
