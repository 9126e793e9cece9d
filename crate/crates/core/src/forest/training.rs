use rand::Rng;

use super::entropy::Label;
use super::features::extract_features;
use super::tree::LabeledSample;
use crate::circuit::{compact_to_subspace, random_circuit, select_subblock, tokens_unitary, Token};
use crate::database::FactorDatabase;
use crate::error::{Error, Result};
use crate::gates::GateSet;

/// Attempts allowed per requested sample before generation gives up.
const ATTEMPTS_PER_SAMPLE: usize = 100;

/// Oracle label of a compacted block over `n_qubits` qubits: reducible iff
/// the database holds a strictly shorter factorization of its unitary.
/// `None` when the block does not fit the database register.
pub fn block_label(block: &[Token], n_qubits: usize, gs: &GateSet, db: &FactorDatabase) -> Result<Option<Label>> {
    if n_qubits > db.qubit_count() {
        return Ok(None);
    }
    let u = tokens_unitary(block, gs, db.qubit_count());
    let label = match db.lookup(&u)? {
        Some(f) if f.len() < block.len() => Label::Reducible,
        _ => Label::Irreducible,
    };
    Ok(Some(label))
}

/// `count` blocks drawn from random circuits on the database register, with
/// lengths uniform in `len_range`, labeled by [`block_label`] and balanced by
/// rejection (reducible gets the extra sample when `count` is odd).
pub fn generate_training_data<R: Rng + ?Sized>(
    gs: &GateSet,
    db: &FactorDatabase,
    rng: &mut R,
    count: usize,
    len_range: (usize, usize),
) -> Result<Vec<LabeledSample>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let (lo, hi) = len_range;
    if lo == 0 || hi < lo {
        return Err(Error::InvalidArgument(format!("bad block length range [{lo}, {hi}]")));
    }
    db.check_gate_set(gs)?;
    let want_reducible = count.div_ceil(2);
    let want_irreducible = count / 2;
    let (mut n_red, mut n_irr) = (0, 0);
    let mut out = Vec::with_capacity(count);
    let max_attempts = ATTEMPTS_PER_SAMPLE.saturating_mul(count);
    let mut attempts = 0;
    while out.len() < count {
        if attempts == max_attempts {
            return Err(Error::Training(format!(
                "class balance not reached after {attempts} attempts \
                 ({n_red}/{want_reducible} reducible, {n_irr}/{want_irreducible} irreducible)"
            )));
        }
        attempts += 1;
        let c = random_circuit(gs, db.qubit_count(), hi, rng)?;
        let s = select_subblock(&c, rng, lo, hi)?;
        let (block, _) = compact_to_subspace(&c, s);
        let Some(label) = block_label(block.tokens(), block.n_qubits(), gs, db)? else {
            continue;
        };
        let keep = match label {
            Label::Reducible if n_red < want_reducible => {
                n_red += 1;
                true
            }
            Label::Irreducible if n_irr < want_irreducible => {
                n_irr += 1;
                true
            }
            _ => false,
        };
        if keep {
            out.push(LabeledSample {
                features: extract_features(block.tokens(), gs),
                label,
            });
        }
    }
    Ok(out)
}
