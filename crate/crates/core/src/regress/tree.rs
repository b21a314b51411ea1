use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{RegressorSpec, Variant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub min_leaf: usize,
    /// Features examined per split; `None` means all of them.
    pub max_features: Option<usize>,
}

impl Tree {
    pub fn predict(&self, z: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if z[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

pub(crate) fn default_min_leaf(variant: Variant) -> usize {
    match variant {
        Variant::FineTree => 4,
        Variant::MediumTree => 12,
        Variant::CoarseTree => 36,
        _ => 8,
    }
}

pub(crate) fn fit_tree_variant(z: &[Vec<f64>], y: &[f64], spec: &RegressorSpec) -> Result<Tree> {
    let min_leaf = match spec.get("min_leaf") {
        Some(v) if v >= 1.0 && v.fract() == 0.0 => v as usize,
        Some(v) => {
            return Err(Error::Config(format!(
                "min_leaf must be a positive integer, got {v}"
            )))
        }
        None => default_min_leaf(spec.variant),
    };
    let rows: Vec<usize> = (0..y.len()).collect();
    Ok(grow(
        z,
        y,
        &rows,
        TreeParams {
            min_leaf,
            max_features: None,
        },
        &mut NoRng,
    ))
}

/// Placeholder generator for deterministic fits that never sample.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        0
    }
    fn next_u64(&mut self) -> u64 {
        0
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        dst.fill(0);
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn best_split(
    z: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let n = rows.len();
    let total: f64 = rows.iter().map(|&i| y[i]).sum();
    let base = total * total / n as f64;
    let mut best: Option<Split> = None;
    let mut order = rows.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| z[a][f].total_cmp(&z[b][f]).then(a.cmp(&b)));
        let mut left_sum = 0.0;
        for k in 1..n {
            left_sum += y[order[k - 1]];
            if k < min_leaf || n - k < min_leaf {
                continue;
            }
            let (lo, hi) = (z[order[k - 1]][f], z[order[k]][f]);
            if !(lo < hi) {
                continue;
            }
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64;
            if best.as_ref().map_or(score > base, |b| score > b.score) {
                best = Some(Split {
                    feature: f,
                    threshold: 0.5 * (lo + hi),
                    score,
                });
            }
        }
    }
    best
}

/// CART growth on the given rows (duplicates allowed, as in bootstrap samples).
pub(crate) fn grow<R: Rng + ?Sized>(
    z: &[Vec<f64>],
    y: &[f64],
    rows: &[usize],
    params: TreeParams,
    rng: &mut R,
) -> Tree {
    let p = z[0].len();
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut stack = vec![(0usize, rows.to_vec())];
    while let Some((slot, idx)) = stack.pop() {
        let n = idx.len();
        let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
        let (lo, hi) = idx
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| {
                (a.min(y[i]), b.max(y[i]))
            });
        let splittable = n >= 2 * params.min_leaf && hi > lo;
        let split = if splittable {
            let features: Vec<usize> = match params.max_features {
                Some(m) if m < p => {
                    let mut f = sample(rng, p, m).into_vec();
                    f.sort_unstable();
                    f
                }
                _ => (0..p).collect(),
            };
            best_split(z, y, &idx, &features, params.min_leaf)
        } else {
            None
        };
        match split {
            None => {
                nodes[slot] = Node::Leaf {
                    value: if hi == lo { lo } else { mean },
                }
            }
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| z[i][s.feature] <= s.threshold);
                let left = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[slot] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right: left + 1,
                };
                stack.push((left + 1, r));
                stack.push((left, l));
            }
        }
    }
    Tree { nodes }
}
