use rand::seq::index::sample;
use rand::Rng;

use super::entropy::{gain_from_counts, Counts, Label};

/// Gains within this margin are treated as ties.
const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub features_per_split: usize,
}

/// Flat node storage; children are indices into the same vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        n_reducible: usize,
        n_irreducible: usize,
    },
}

/// Prediction layout: breadth-first, siblings adjacent (`right = left + 1`),
/// leaves carry their vote in `value`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct FlatNode {
    value: f64,
    feature: u32,
    left: u32,
}

const LEAF: u32 = u32::MAX;

fn flatten(nodes: &[Node]) -> Vec<FlatNode> {
    let blank = FlatNode {
        value: 0.0,
        feature: LEAF,
        left: 0,
    };
    let mut flat = vec![blank];
    let mut queue = std::collections::VecDeque::from([(0usize, 0usize)]);
    while let Some((ni, slot)) = queue.pop_front() {
        flat[slot] = match nodes[ni] {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let l = flat.len();
                flat.extend([blank, blank]);
                queue.push_back((left as usize, l));
                queue.push_back((right as usize, l + 1));
                FlatNode {
                    value: threshold,
                    feature: feature as u32,
                    left: l as u32,
                }
            }
            Node::Leaf {
                n_reducible,
                n_irreducible,
            } => FlatNode {
                value: leaf_vote(n_reducible, n_irreducible),
                ..blank
            },
        };
    }
    flat
}

fn leaf_vote(r: usize, i: usize) -> f64 {
    match r.cmp(&i) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Less => 0.0,
        std::cmp::Ordering::Equal => 0.5,
    }
}

/// A binary classification tree. Samples with `x[feature] <= threshold` go
/// left. `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    flat: Vec<FlatNode>,
}

impl DecisionTree {
    pub(crate) fn from_nodes(nodes: Vec<Node>) -> Self {
        assert!(!nodes.is_empty());
        let flat = flatten(&nodes);
        Self { nodes, flat }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_for(&self, x: &[f64]) -> (usize, usize) {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right } as usize,
                Node::Leaf {
                    n_reducible,
                    n_irreducible,
                } => return (n_reducible, n_irreducible),
            }
        }
    }

    /// 1 for a reducible-majority leaf, 0 for irreducible, 0.5 on ties.
    pub fn vote(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let n = self.flat[i];
            if n.feature == LEAF {
                return n.value;
            }
            i = n.left as usize + usize::from(x[n.feature as usize] > n.value);
        }
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        if self.vote(x) > 0.5 {
            Label::Reducible
        } else {
            Label::Irreducible
        }
    }

    /// Internal nodes on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn rec(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => 1 + rec(nodes, left as usize).max(rec(nodes, right as usize)),
                Node::Leaf { .. } => 0,
            }
        }
        rec(&self.nodes, 0)
    }
}

/// Best (feature, midpoint threshold) among `candidates` by information
/// gain; ties go to the lowest feature index, then the lowest threshold.
/// `None` when no split has positive gain.
pub fn best_split(samples: &[LabeledSample], candidates: &[usize]) -> Option<Split> {
    let idx: Vec<usize> = (0..samples.len()).collect();
    best_split_indexed(samples, &idx, candidates)
}

pub(crate) fn best_split_indexed(samples: &[LabeledSample], idx: &[usize], candidates: &[usize]) -> Option<Split> {
    if idx.len() < 2 {
        return None;
    }
    let mut features = candidates.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut parent = Counts::default();
    for &i in idx {
        parent.add(samples[i].label);
    }
    let mut best: Option<Split> = None;
    let mut order = idx.to_vec();
    for f in features {
        order.sort_by(|&a, &b| samples[a].features[f].total_cmp(&samples[b].features[f]));
        let mut left = Counts::default();
        let mut right = parent;
        for w in 0..order.len() - 1 {
            let s = &samples[order[w]];
            left.add(s.label);
            right.remove(s.label);
            let (lo, hi) = (s.features[f], samples[order[w + 1]].features[f]);
            if lo == hi {
                continue;
            }
            let gain = gain_from_counts(parent, [left, right]);
            if gain > best.map_or(GAIN_EPS, |b| b.gain + GAIN_EPS) {
                best = Some(Split {
                    feature: f,
                    threshold: lo + (hi - lo) / 2.0,
                    gain,
                });
            }
        }
    }
    best
}

/// Greedy top-down induction: at each node, `features_per_split` candidate
/// features are drawn without replacement; growth stops at `max_depth`, on
/// pure nodes, or when no split has positive gain.
pub fn train_tree<R: Rng + ?Sized>(samples: &[LabeledSample], params: TreeParams, rng: &mut R) -> DecisionTree {
    assert!(!samples.is_empty(), "cannot train on an empty sample set");
    let idx: Vec<usize> = (0..samples.len()).collect();
    train_tree_indexed(samples, &idx, params, rng)
}

pub(crate) fn train_tree_indexed<R: Rng + ?Sized>(
    samples: &[LabeledSample],
    idx: &[usize],
    params: TreeParams,
    rng: &mut R,
) -> DecisionTree {
    let n_features = samples[0].features.len();
    let k = params.features_per_split.clamp(1, n_features.max(1));
    let mut nodes = Vec::new();
    grow(
        samples,
        idx.to_vec(),
        0,
        params.max_depth,
        n_features,
        k,
        rng,
        &mut nodes,
    );
    DecisionTree::from_nodes(nodes)
}

#[allow(clippy::too_many_arguments)]
fn grow<R: Rng + ?Sized>(
    samples: &[LabeledSample],
    idx: Vec<usize>,
    depth: usize,
    max_depth: usize,
    n_features: usize,
    k: usize,
    rng: &mut R,
    nodes: &mut Vec<Node>,
) -> u32 {
    let mut counts = Counts::default();
    for &i in &idx {
        counts.add(samples[i].label);
    }
    let me = nodes.len() as u32;
    nodes.push(Node::Leaf {
        n_reducible: counts.reducible,
        n_irreducible: counts.irreducible,
    });
    let pure = counts.reducible == 0 || counts.irreducible == 0;
    if depth >= max_depth || pure || idx.len() < 2 || n_features == 0 {
        return me;
    }
    let candidates: Vec<usize> = sample(rng, n_features, k).into_vec();
    let Some(split) = best_split_indexed(samples, &idx, &candidates) else {
        return me;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx
        .into_iter()
        .partition(|&i| samples[i].features[split.feature] <= split.threshold);
    let left = grow(samples, l, depth + 1, max_depth, n_features, k, rng, nodes);
    let right = grow(samples, r, depth + 1, max_depth, n_features, k, rng, nodes);
    nodes[me as usize] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    me
}
