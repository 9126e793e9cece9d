//! Token chains: circuit representation, file format, subblocks, commutation
//! and qubit-subspace compaction.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gates::GateSet;
use crate::unitary::{apply_gate_rows, Unitary};

/// Largest arity of any primitive.
pub const MAX_ARITY: usize = 2;

/// A gate-set token bound to concrete qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token {
    def: usize,
    arity: u8,
    qubits: [usize; MAX_ARITY],
}

impl Token {
    /// Panics if `qubits` is empty or longer than [`MAX_ARITY`].
    pub fn new(def: usize, qubits: &[usize]) -> Self {
        assert!(
            (1..=MAX_ARITY).contains(&qubits.len()),
            "token arity must be 1..={MAX_ARITY}"
        );
        let mut q = [0; MAX_ARITY];
        q[..qubits.len()].copy_from_slice(qubits);
        Self {
            def,
            arity: qubits.len() as u8,
            qubits: q,
        }
    }

    /// Index of the token's definition in its gate set.
    pub fn def(&self) -> usize {
        self.def
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits[..self.arity as usize]
    }

    pub fn touches(&self, q: usize) -> bool {
        self.qubits().contains(&q)
    }

    fn disjoint(&self, other: &Token) -> bool {
        !self.qubits().iter().any(|&q| other.touches(q))
    }

    fn with_qubits(&self, map: impl Fn(usize) -> usize) -> Token {
        let mut t = *self;
        for q in &mut t.qubits[..self.arity as usize] {
            *q = map(*q);
        }
        t
    }
}

/// An ordered token chain on `n_qubits` qubits. `tokens[0]` acts first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Circuit {
    n_qubits: usize,
    tokens: Vec<Token>,
}

impl Circuit {
    pub fn new(n_qubits: usize, tokens: Vec<Token>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("circuit needs at least one qubit".into()));
        }
        for t in &tokens {
            check_token(t, n_qubits)?;
        }
        Ok(Self { n_qubits, tokens })
    }

    pub fn empty(n_qubits: usize) -> Self {
        assert!(n_qubits >= 1);
        Self {
            n_qubits,
            tokens: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Checks every token against `gs` (def index and arity).
    pub fn validate(&self, gs: &GateSet) -> Result<()> {
        for t in &self.tokens {
            check_token_def(t, gs)?;
        }
        Ok(())
    }
}

fn check_token(t: &Token, n_qubits: usize) -> Result<()> {
    for (i, &q) in t.qubits().iter().enumerate() {
        if q >= n_qubits {
            return Err(Error::QubitOutOfRange { index: q, n_qubits });
        }
        if t.qubits()[..i].contains(&q) {
            return Err(Error::RepeatedQubit(q));
        }
    }
    Ok(())
}

fn check_token_def(t: &Token, gs: &GateSet) -> Result<()> {
    if t.def() >= gs.len() {
        return Err(Error::InvalidArgument(format!(
            "token def index {} not in gate set",
            t.def()
        )));
    }
    let arity = gs.def(t.def()).arity();
    if arity != t.qubits().len() {
        return Err(Error::InvalidArgument(format!(
            "token `{}` needs {arity} qubit(s), got {}",
            gs.def(t.def()).name,
            t.qubits().len()
        )));
    }
    Ok(())
}

/// Parses the line-oriented circuit format: `qubits <N>` followed by one
/// `<token-name> <q0> [<q1> ...]` per line; blank lines and `#` comments are
/// ignored.
pub fn parse_circuit(text: &str, gs: &GateSet) -> Result<Circuit> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (first_no, header) = lines.next().ok_or(Error::CircuitParse {
        line: 1,
        msg: "missing `qubits <N>` header".into(),
    })?;
    let n_qubits = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["qubits", n] => n.parse::<usize>().ok().filter(|&n| n >= 1),
        _ => None,
    }
    .ok_or_else(|| Error::CircuitParse {
        line: first_no,
        msg: format!("expected `qubits <N>` with N >= 1, got `{header}`"),
    })?;

    let mut tokens = Vec::new();
    for (lineno, line) in lines {
        let err = |msg: String| Error::CircuitParse { line: lineno, msg };
        let mut fields = line.split_whitespace();
        let name = fields.next().expect("non-empty line");
        let def = gs
            .index_of(name)
            .ok_or_else(|| err(format!("unknown token `{name}`")))?;
        let qubits = fields
            .map(|f| f.parse::<usize>().map_err(|_| err(format!("bad qubit index `{f}`"))))
            .collect::<Result<Vec<_>>>()?;
        let arity = gs.def(def).arity();
        if qubits.len() != arity {
            return Err(err(format!("`{name}` takes {arity} qubit(s), got {}", qubits.len())));
        }
        let token = Token::new(def, &qubits);
        check_token(&token, n_qubits).map_err(|e| err(e.to_string()))?;
        tokens.push(token);
    }
    Ok(Circuit { n_qubits, tokens })
}

pub fn serialize_circuit(c: &Circuit, gs: &GateSet) -> String {
    let mut out = format!("qubits {}\n", c.n_qubits);
    for t in &c.tokens {
        out.push_str(&gs.def(t.def()).name);
        for q in t.qubits() {
            write!(out, " {q}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

/// `O(L) ... O(1)` on the full `2^N` register.
pub fn circuit_unitary(c: &Circuit, gs: &GateSet) -> Unitary {
    tokens_unitary(&c.tokens, gs, c.n_qubits)
}

pub(crate) fn tokens_unitary(tokens: &[Token], gs: &GateSet, n_qubits: usize) -> Unitary {
    let mut u = Unitary::identity(1 << n_qubits);
    let d = u.dim();
    for t in tokens {
        apply_gate_rows(u.entries_mut(), d, &gs.def(t.def()).matrix, t.qubits(), n_qubits);
    }
    u
}

/// Applies the circuit to a state vector in place.
pub fn simulate(c: &Circuit, gs: &GateSet, state: &mut [Complex64]) {
    assert_eq!(state.len(), 1 << c.n_qubits, "state dimension");
    for t in &c.tokens {
        apply_gate_rows(state, 1, &gs.def(t.def()).matrix, t.qubits(), c.n_qubits);
    }
}

/// A contiguous window `tokens[start..start + len]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Subblock {
    pub start: usize,
    pub len: usize,
}

impl Subblock {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Uniform length in `[min_len, min(max_len, L)]`, then uniform start.
pub fn select_subblock<R: Rng + ?Sized>(c: &Circuit, rng: &mut R, min_len: usize, max_len: usize) -> Result<Subblock> {
    if min_len == 0 || max_len < min_len {
        return Err(Error::InvalidArgument(format!(
            "block length range [{min_len}, {max_len}] is empty or starts at 0"
        )));
    }
    let l = c.len();
    if l < min_len {
        return Err(Error::CircuitTooShort { len: l, min: min_len });
    }
    let len = rng.gen_range(min_len..=max_len.min(l));
    let start = rng.gen_range(0..=l - len);
    Ok(Subblock { start, len })
}

/// `tokens[..start] ++ replacement ++ tokens[end..]`.
pub fn splice(c: &Circuit, s: Subblock, replacement: &[Token]) -> Result<Circuit> {
    if s.end() > c.len() {
        return Err(Error::InvalidArgument(format!(
            "subblock {}..{} exceeds circuit length {}",
            s.start,
            s.end(),
            c.len()
        )));
    }
    for t in replacement {
        check_token(t, c.n_qubits)?;
    }
    let mut tokens = Vec::with_capacity(c.len() - s.len + replacement.len());
    tokens.extend_from_slice(&c.tokens[..s.start]);
    tokens.extend_from_slice(replacement);
    tokens.extend_from_slice(&c.tokens[s.end()..]);
    Ok(Circuit {
        n_qubits: c.n_qubits,
        tokens,
    })
}

/// Disjoint supports commute; overlapping ones are decided by the gate set's
/// precomputed commutator table on the joint support.
pub fn commutes(a: &Token, b: &Token, gs: &GateSet) -> bool {
    if a.disjoint(b) {
        return true;
    }
    gs.relation(a, b).is_some_and(|r| r.commutes)
}

/// Up to `attempts` random adjacent swaps, each applied only when the pair
/// commutes. Returns the number of swaps performed.
pub fn commute_shuffle_in_place<R: Rng + ?Sized>(c: &mut Circuit, gs: &GateSet, rng: &mut R, attempts: usize) -> usize {
    if c.len() < 2 {
        return 0;
    }
    let mut swaps = 0;
    for _ in 0..attempts {
        let i = rng.gen_range(0..c.len() - 1);
        if commutes(&c.tokens[i], &c.tokens[i + 1], gs) {
            c.tokens.swap(i, i + 1);
            swaps += 1;
        }
    }
    swaps
}

pub fn commute_shuffle<R: Rng + ?Sized>(c: &Circuit, gs: &GateSet, rng: &mut R, attempts: usize) -> Circuit {
    let mut out = c.clone();
    commute_shuffle_in_place(&mut out, gs, rng, attempts);
    out
}

/// Relabeling between a register and a compact subspace of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QubitMap {
    forward: Vec<Option<usize>>,
    inverse: Vec<usize>,
}

impl QubitMap {
    pub fn identity(n_qubits: usize) -> Self {
        Self {
            forward: (0..n_qubits).map(Some).collect(),
            inverse: (0..n_qubits).collect(),
        }
    }

    /// Compact index of original qubit `q`.
    pub fn forward(&self, q: usize) -> Option<usize> {
        self.forward.get(q).copied().flatten()
    }

    /// Original qubit of compact index `q`.
    pub fn inverse(&self, q: usize) -> usize {
        self.inverse[q]
    }

    pub fn compact_count(&self) -> usize {
        self.inverse.len()
    }

    /// Appends unused original qubits (lowest index first) until the map
    /// covers `count` compact indices. Returns false when the register has
    /// too few spare qubits.
    pub fn extend_to(&mut self, count: usize) -> bool {
        let mut next = 0;
        while self.inverse.len() < count {
            while next < self.forward.len() && self.forward[next].is_some() {
                next += 1;
            }
            if next == self.forward.len() {
                return false;
            }
            self.forward[next] = Some(self.inverse.len());
            self.inverse.push(next);
        }
        true
    }
}

/// Restricts the subblock to the qubits it touches, numbered in order of
/// first appearance.
pub fn compact_to_subspace(c: &Circuit, s: Subblock) -> (Circuit, QubitMap) {
    let block = &c.tokens[s.start..s.end()];
    let mut map = QubitMap {
        forward: vec![None; c.n_qubits],
        inverse: Vec::new(),
    };
    for t in block {
        for &q in t.qubits() {
            if map.forward[q].is_none() {
                map.forward[q] = Some(map.inverse.len());
                map.inverse.push(q);
            }
        }
    }
    let tokens = block
        .iter()
        .map(|t| t.with_qubits(|q| map.forward[q].expect("mapped above")))
        .collect();
    let n = map.inverse.len().max(1);
    (Circuit { n_qubits: n, tokens }, map)
}

/// Maps a compact circuit's tokens back through `map`.
pub fn lift_from_subspace(c: &Circuit, map: &QubitMap) -> Result<Vec<Token>> {
    if c.n_qubits != map.compact_count() && !(c.is_empty() && map.compact_count() == 0) {
        return Err(Error::DimensionMismatch {
            expected: map.compact_count(),
            got: c.n_qubits,
        });
    }
    Ok(c.tokens.iter().map(|t| t.with_qubits(|q| map.inverse[q])).collect())
}

/// Each token uniform over all (def, ordered qubit tuple) pairs.
pub fn random_circuit<R: Rng + ?Sized>(gs: &GateSet, n_qubits: usize, length: usize, rng: &mut R) -> Result<Circuit> {
    if n_qubits == 0 {
        return Err(Error::InvalidArgument("circuit needs at least one qubit".into()));
    }
    let pool = gs.instantiations(n_qubits);
    if pool.is_empty() {
        return Err(Error::NoApplicableToken(n_qubits));
    }
    let tokens = (0..length).map(|_| pool[rng.gen_range(0..pool.len())]).collect();
    Ok(Circuit { n_qubits, tokens })
}

/// Whether two adjacent tokens act on exactly the same qubit set.
pub(crate) fn same_support(a: &Token, b: &Token) -> bool {
    a.arity == b.arity && a.qubits().iter().all(|&q| b.touches(q))
}
