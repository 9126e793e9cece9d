//! Random-forest classifier deciding whether a subblock is worth a database
//! lookup.
//!
//! # Model file
//!
//! ```text
//! QCRRF1 <n_trees> <feature_dim> <tau>
//! # fingerprint <16 hex digits>          (optional; checked when present)
//! N <feature> <threshold>                 internal node, pre-order
//! L <n_reducible> <n_irreducible>         leaf
//! ...
//! ```
//!
//! Trees follow each other in pre-order; each is self-delimiting. Reals are
//! written with 17 significant digits so thresholds round-trip exactly.

mod entropy;
mod features;
mod training;
mod tree;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use entropy::{info_gain, shannon_entropy, Counts, Label};
pub use features::{extract_features, feature_dim};
pub use training::{block_label, generate_training_data};
pub use tree::{best_split, train_tree, DecisionTree, LabeledSample, Node, Split, TreeParams};

use crate::error::{Error, Result};
use crate::gates::GateSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// `None` selects `ceil(sqrt(F))`.
    pub features_per_split: Option<usize>,
    pub tau: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 50,
            max_depth: 12,
            features_per_split: None,
            tau: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    feature_dim: usize,
    tau: f64,
    fingerprint: Option<u64>,
}

/// Bagged trees: each tree sees a same-size bootstrap resample and draws
/// candidate features per node. Tree `i` uses its own ChaCha stream derived
/// from one draw of `rng`, so the result does not depend on scheduling.
pub fn train_forest<R: Rng + ?Sized>(
    samples: &[LabeledSample],
    params: ForestParams,
    rng: &mut R,
) -> Result<RandomForest> {
    if samples.is_empty() {
        return Err(Error::Training("no training samples".into()));
    }
    let counts = Counts::of(&samples.iter().map(|s| s.label).collect::<Vec<_>>());
    if counts.reducible == 0 || counts.irreducible == 0 {
        return Err(Error::Training("training set contains a single class".into()));
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidArgument("forest needs at least one tree".into()));
    }
    check_tau(params.tau)?;
    let dim = samples[0].features.len();
    if samples.iter().any(|s| s.features.len() != dim) {
        return Err(Error::Training("inconsistent feature dimensions".into()));
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        features_per_split: params
            .features_per_split
            .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize),
    };
    let base_seed: u64 = rng.gen();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut tree_rng = ChaCha8Rng::seed_from_u64(base_seed);
            tree_rng.set_stream(i as u64);
            let boot: Vec<usize> = (0..samples.len())
                .map(|_| tree_rng.gen_range(0..samples.len()))
                .collect();
            tree::train_tree_indexed(samples, &boot, tree_params, &mut tree_rng)
        })
        .collect();
    Ok(RandomForest {
        trees,
        feature_dim: dim,
        tau: params.tau,
        fingerprint: None,
    })
}

fn check_tau(tau: f64) -> Result<()> {
    // zero is allowed: it opens the gate unconditionally
    if (0.0..1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "vote threshold must lie in [0, 1), got {tau}"
        )))
    }
}

impl RandomForest {
    pub fn from_trees(trees: Vec<DecisionTree>, feature_dim: usize, tau: f64) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidArgument("forest needs at least one tree".into()));
        }
        check_tau(tau)?;
        Ok(Self {
            trees,
            feature_dim,
            tau,
            fingerprint: None,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        check_tau(tau)?;
        self.tau = tau;
        Ok(self)
    }

    /// Binds the model to a gate set; the fingerprint is written to the
    /// model file and checked on load.
    pub fn bind(mut self, gs: &GateSet) -> Result<Self> {
        if feature_dim(gs.len()) != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: feature_dim(gs.len()),
                got: self.feature_dim,
            });
        }
        self.fingerprint = Some(gs.fingerprint());
        Ok(self)
    }

    pub fn check_gate_set(&self, gs: &GateSet) -> Result<()> {
        if feature_dim(gs.len()) != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: feature_dim(gs.len()),
                got: self.feature_dim,
            });
        }
        match self.fingerprint {
            Some(fp) if fp != gs.fingerprint() => Err(Error::FingerprintMismatch {
                expected: gs.fingerprint(),
                found: fp,
            }),
            _ => Ok(()),
        }
    }

    /// Fraction of trees voting reducible (leaf ties count one half).
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let votes: f64 = self.trees.iter().map(|t| t.vote(x)).sum();
        Ok(votes / self.trees.len() as f64)
    }

    /// `predict_proba(x) >= tau`, stopping as soon as the outcome is fixed.
    pub fn passes_gate(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        let n = self.trees.len() as f64;
        let need = self.tau * n;
        let mut votes = 0.0;
        for (i, t) in self.trees.iter().enumerate() {
            votes += t.vote(x);
            if votes >= need {
                return Ok(true);
            }
            let remaining = n - (i + 1) as f64;
            if votes + remaining < need {
                return Ok(false);
            }
        }
        Ok(votes >= need)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("QCRRF1 {} {} {:.16e}\n", self.trees.len(), self.feature_dim, self.tau);
        if let Some(fp) = self.fingerprint {
            writeln!(out, "# fingerprint {fp:016x}").expect("writing to a String");
        }
        for t in &self.trees {
            write_preorder(t.nodes(), 0, &mut out);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let fmt = |m: String| Error::ModelFormat(m);
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (_, header) = lines.next().ok_or_else(|| fmt("empty model file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let (n_trees, feature_dim, tau) = match h.as_slice() {
            ["QCRRF1", n, f, t] => (
                n.parse::<usize>().map_err(|_| fmt(format!("bad tree count `{n}`")))?,
                f.parse::<usize>().map_err(|_| fmt(format!("bad feature dim `{f}`")))?,
                t.parse::<f64>().map_err(|_| fmt(format!("bad tau `{t}`")))?,
            ),
            _ => return Err(fmt("missing `QCRRF1 <n_trees> <feature_dim> <tau>` header".into())),
        };
        let mut fingerprint = None;
        let mut body = Vec::new();
        for (no, line) in lines {
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if let Some(hex) = c.trim().strip_prefix("fingerprint") {
                    fingerprint = Some(
                        u64::from_str_radix(hex.trim(), 16).map_err(|_| fmt(format!("line {no}: bad fingerprint")))?,
                    );
                }
                continue;
            }
            body.push((no, line));
        }
        let mut pos = 0;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let mut nodes = Vec::new();
            read_preorder(&body, &mut pos, feature_dim, &mut nodes, 0)?;
            trees.push(DecisionTree::from_nodes(nodes));
        }
        if pos != body.len() {
            return Err(fmt(format!(
                "{} unexpected node line(s) after the last tree",
                body.len() - pos
            )));
        }
        let mut forest = Self::from_trees(trees, feature_dim, tau).map_err(|e| fmt(e.to_string()))?;
        forest.fingerprint = fingerprint;
        Ok(forest)
    }
}

fn write_preorder(nodes: &[Node], i: usize, out: &mut String) {
    match nodes[i] {
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            writeln!(out, "N {feature} {threshold:.16e}").expect("writing to a String");
            write_preorder(nodes, left as usize, out);
            write_preorder(nodes, right as usize, out);
        }
        Node::Leaf {
            n_reducible,
            n_irreducible,
        } => writeln!(out, "L {n_reducible} {n_irreducible}").expect("writing to a String"),
    }
}

const MAX_TREE_DEPTH: usize = 1024;

fn read_preorder(
    body: &[(usize, &str)],
    pos: &mut usize,
    feature_dim: usize,
    nodes: &mut Vec<Node>,
    depth: usize,
) -> Result<u32> {
    let fmt = |m: String| Error::ModelFormat(m);
    if depth > MAX_TREE_DEPTH {
        return Err(fmt("tree nesting too deep".into()));
    }
    let &(no, line) = body
        .get(*pos)
        .ok_or_else(|| fmt("unexpected end of model file".into()))?;
    *pos += 1;
    let f: Vec<&str> = line.split_whitespace().collect();
    let me = nodes.len() as u32;
    match f.as_slice() {
        ["N", feat, thr] => {
            let feature: usize = feat.parse().map_err(|_| fmt(format!("line {no}: bad feature index")))?;
            if feature >= feature_dim {
                return Err(fmt(format!("line {no}: feature {feature} out of range")));
            }
            let threshold: f64 = thr.parse().map_err(|_| fmt(format!("line {no}: bad threshold")))?;
            nodes.push(Node::Leaf {
                n_reducible: 0,
                n_irreducible: 0,
            });
            let left = read_preorder(body, pos, feature_dim, nodes, depth + 1)?;
            let right = read_preorder(body, pos, feature_dim, nodes, depth + 1)?;
            nodes[me as usize] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
        }
        ["L", r, i] => nodes.push(Node::Leaf {
            n_reducible: r.parse().map_err(|_| fmt(format!("line {no}: bad leaf count")))?,
            n_irreducible: i.parse().map_err(|_| fmt(format!("line {no}: bad leaf count")))?,
        }),
        _ => return Err(fmt(format!("line {no}: expected `N <f> <t>` or `L <r> <i>`"))),
    }
    Ok(me)
}

pub fn save_forest(forest: &RandomForest, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, forest.to_text())?;
    Ok(())
}

pub fn load_forest(path: impl AsRef<Path>) -> Result<RandomForest> {
    RandomForest::from_text(&fs::read_to_string(path)?)
}
