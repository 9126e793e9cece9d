use crate::circuit::{same_support, Token};
use crate::gates::GateSet;

/// Number of features for a gate set with `n_defs` token definitions.
pub fn feature_dim(n_defs: usize) -> usize {
    n_defs + 6
}

/// Fixed-order features of a (compacted) subblock:
///
/// `[len, count(def_0) .. count(def_{k-1}), distinct qubits, adjacent equal
/// pairs, adjacent inverse pairs, adjacent commuting pairs, longest run on an
/// identical qubit support]`
///
/// Pairs are adjacent on a wire: each token is paired with the first later
/// token sharing one of its qubits, so `x 0; t 1; x 0` holds an equal pair.
/// Pair relations come from the gate set's precomputed tables.
pub fn extract_features(block: &[Token], gs: &GateSet) -> Vec<f64> {
    let n_defs = gs.len();
    let mut f = vec![0.0; feature_dim(n_defs)];
    f[0] = block.len() as f64;
    for t in block {
        f[1 + t.def()] += 1.0;
    }

    let mut qubits: Vec<usize> = block.iter().flat_map(|t| t.qubits().iter().copied()).collect();
    qubits.sort_unstable();
    qubits.dedup();

    let (mut equal, mut inverse, mut commuting) = (0usize, 0usize, 0usize);
    for (i, a) in block.iter().enumerate() {
        let next = block[i + 1..].iter().find(|b| a.qubits().iter().any(|&q| b.touches(q)));
        let Some(b) = next else { continue };
        equal += usize::from(a == b);
        if let Some(rel) = gs.relation(a, b) {
            inverse += usize::from(rel.inverse);
            commuting += usize::from(rel.commutes);
        }
    }

    let mut run = usize::from(!block.is_empty());
    let mut best_run = run;
    for w in block.windows(2) {
        if same_support(&w[0], &w[1]) {
            run += 1;
        } else {
            run = 1;
        }
        best_run = best_run.max(run);
    }
    let base = 1 + n_defs;
    f[base] = qubits.len() as f64;
    f[base + 1] = equal as f64;
    f[base + 2] = inverse as f64;
    f[base + 3] = commuting as f64;
    f[base + 4] = best_run as f64;
    f
}
