use crate::error::{Error, Result};

/// Binary class label of a circuit subblock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Reducible,
    Irreducible,
}

/// Class counts of a label multiset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub reducible: usize,
    pub irreducible: usize,
}

impl Counts {
    pub fn of(labels: &[Label]) -> Self {
        let reducible = labels.iter().filter(|&&l| l == Label::Reducible).count();
        Self {
            reducible,
            irreducible: labels.len() - reducible,
        }
    }

    pub fn total(self) -> usize {
        self.reducible + self.irreducible
    }

    pub fn add(&mut self, l: Label) {
        match l {
            Label::Reducible => self.reducible += 1,
            Label::Irreducible => self.irreducible += 1,
        }
    }

    pub fn remove(&mut self, l: Label) {
        match l {
            Label::Reducible => self.reducible -= 1,
            Label::Irreducible => self.irreducible -= 1,
        }
    }

    /// Entropy in bits of the empirical class distribution; 0 when empty.
    pub fn entropy(self) -> f64 {
        let n = self.total();
        if n == 0 {
            return 0.0;
        }
        let p = self.reducible as f64 / n as f64;
        binary_entropy(p)
    }
}

fn plogp(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.log2()
    }
}

fn binary_entropy(p: f64) -> f64 {
    -(plogp(p) + plogp(1.0 - p))
}

/// `-sum p_i log2 p_i` with `0 log 0 = 0`.
pub fn shannon_entropy(probs: &[f64]) -> Result<f64> {
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument("probabilities must lie in [0, 1]".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("probabilities sum to {total}, not 1")));
    }
    Ok(-probs.iter().map(|&p| plogp(p)).sum::<f64>())
}

/// `H(parent) - sum_k |child_k| / |parent| * H(child_k)`.
///
/// `partition` must split `parent` as a multiset.
pub fn info_gain(parent: &[Label], partition: &[&[Label]]) -> Result<f64> {
    let pc = Counts::of(parent);
    let mut union = Counts::default();
    for child in partition {
        let c = Counts::of(child);
        union.reducible += c.reducible;
        union.irreducible += c.irreducible;
    }
    if union != pc {
        return Err(Error::InvalidArgument("children do not partition the parent".into()));
    }
    Ok(gain_from_counts(pc, partition.iter().map(|c| Counts::of(c))))
}

pub(crate) fn gain_from_counts(parent: Counts, children: impl IntoIterator<Item = Counts>) -> f64 {
    let n = parent.total();
    if n == 0 {
        return 0.0;
    }
    let conditional: f64 = children
        .into_iter()
        .map(|c| c.total() as f64 / n as f64 * c.entropy())
        .sum();
    (parent.entropy() - conditional).max(0.0)
}
