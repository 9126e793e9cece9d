//! The reduction loop: pick a subblock, look for a strictly shorter
//! equivalent, splice it in after local verification, shuffle commuting
//! neighbours, repeat. The whole result is verified once more at the end.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{
    commute_shuffle_in_place, compact_to_subspace, lift_from_subspace, select_subblock, splice, tokens_unitary,
    Circuit, Subblock, Token,
};
use crate::database::FactorDatabase;
use crate::error::{Error, Result};
use crate::forest::{extract_features, RandomForest};
use crate::gates::GateSet;
use crate::unitary::{apply_gate_rows, equal_up_to_phase, PhaseTolerance};

/// Largest register verified through the full unitary trace.
pub const FULL_VERIFY_MAX_QUBITS: usize = 12;
/// Product-state probes used above [`FULL_VERIFY_MAX_QUBITS`].
pub const PRODUCT_STATE_PROBES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Rs,
    Dr,
    Rf,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::Rs, StrategyKind::Dr, StrategyKind::Rf];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Rs => "rs",
            StrategyKind::Dr => "dr",
            StrategyKind::Rf => "rf",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rs" => Ok(StrategyKind::Rs),
            "dr" => Ok(StrategyKind::Dr),
            "rf" => Ok(StrategyKind::Rf),
            _ => Err(Error::InvalidArgument(format!(
                "unknown strategy `{s}` (expected rs, dr or rf)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Strategy<'a> {
    /// Random search over shorter candidate chains.
    Rs,
    /// Database retrieval.
    Dr(&'a FactorDatabase),
    /// Database retrieval behind a classifier gate.
    Rf(&'a FactorDatabase, &'a RandomForest),
}

impl Strategy<'_> {
    pub fn kind(&self) -> StrategyKind {
        match self {
            Strategy::Rs => StrategyKind::Rs,
            Strategy::Dr(_) => StrategyKind::Dr,
            Strategy::Rf(..) => StrategyKind::Rf,
        }
    }

    pub fn check_gate_set(&self, gs: &GateSet) -> Result<()> {
        match self {
            Strategy::Rs => Ok(()),
            Strategy::Dr(db) => db.check_gate_set(gs),
            Strategy::Rf(db, forest) => {
                db.check_gate_set(gs)?;
                forest.check_gate_set(gs)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducerConfig {
    /// Inclusive subblock length range.
    pub subblock_len_range: (usize, usize),
    pub rs_samples_per_block: usize,
    pub shuffle_attempts_per_iter: usize,
    /// Consecutive iterations without an accepted replacement before stopping.
    pub stall_limit: usize,
    pub target_length: Option<usize>,
    pub wall_clock_budget: Option<Duration>,
    pub tol: PhaseTolerance,
    pub seed: u64,
    /// Test hook: corrupts the first accepted replacement after its local
    /// check so the final verification must catch it.
    #[doc(hidden)]
    pub inject_fault: bool,
}

impl Default for ReducerConfig {
    fn default() -> Self {
        Self {
            subblock_len_range: (3, 7),
            rs_samples_per_block: 500,
            shuffle_attempts_per_iter: 4,
            stall_limit: 2000,
            target_length: None,
            wall_clock_budget: None,
            tol: PhaseTolerance::default(),
            seed: 0,
            inject_fault: false,
        }
    }
}

impl ReducerConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.subblock_len_range;
        if lo == 0 || hi < lo {
            return Err(Error::InvalidArgument(format!(
                "bad subblock length range [{lo}, {hi}]"
            )));
        }
        if self.stall_limit == 0 {
            return Err(Error::InvalidArgument("stall limit must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    Accepted,
    Rejected,
    GatedOut,
    Shuffled,
}

impl Event {
    pub fn name(self) -> &'static str {
        match self {
            Event::Accepted => "accepted",
            Event::Rejected => "rejected",
            Event::GatedOut => "gated-out",
            Event::Shuffled => "shuffled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub elapsed: Duration,
    /// Circuit length after the event.
    pub length: usize,
    pub event: Event,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    TargetReached,
    Stalled,
    Budget,
}

/// Accumulated time per loop phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimes {
    pub selection: Duration,
    pub lookup: Duration,
    pub forest: Duration,
    pub verification: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionTrace {
    pub strategy: StrategyKind,
    pub input_length: usize,
    pub records: Vec<TraceRecord>,
    pub iterations: usize,
    pub termination: Termination,
    /// Set when a wall-clock budget was configured; such runs are not
    /// reproducible.
    pub budget_limited: bool,
    pub times: PhaseTimes,
    pub total: Duration,
    /// Time at which the target length was first met, if ever.
    pub time_to_target: Option<Duration>,
}

impl ReductionTrace {
    pub fn output_length(&self) -> usize {
        self.records
            .iter()
            .rev()
            .find(|r| r.event == Event::Accepted)
            .map_or(self.input_length, |r| r.length)
    }

    pub fn count(&self, event: Event) -> usize {
        self.records.iter().filter(|r| r.event == event).count()
    }

    /// `iter,elapsed_ms,length,event`, one row per record.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,elapsed_ms,length,event\n");
        for r in &self.records {
            writeln!(
                out,
                "{},{:.3},{},{}",
                r.iteration,
                r.elapsed.as_secs_f64() * 1e3,
                r.length,
                r.event.name()
            )
            .expect("writing to a String");
        }
        out
    }

    /// The records without timings; equal for runs with equal seeds.
    pub fn events(&self) -> Vec<(usize, usize, Event)> {
        self.records.iter().map(|r| (r.iteration, r.length, r.event)).collect()
    }
}

/// Outcome of one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Replace { block: Subblock, tokens: Vec<Token> },
    Miss,
    GatedOut,
}

fn pick_block<R: Rng + ?Sized>(c: &Circuit, cfg: &ReducerConfig, rng: &mut R) -> Result<Subblock> {
    let (lo, hi) = cfg.subblock_len_range;
    let lo = lo.min(c.len());
    select_subblock(c, rng, lo, hi.max(lo))
}

/// Random search: up to `rs_samples_per_block` candidates of length
/// `p < n`, tokens uniform over the block's compacted support.
pub fn step_rs<R: Rng + ?Sized>(c: &Circuit, gs: &GateSet, cfg: &ReducerConfig, rng: &mut R) -> Result<Step> {
    let s = pick_block(c, cfg, rng)?;
    let (block, map) = compact_to_subspace(c, s);
    let k = block.n_qubits();
    let target = tokens_unitary(block.tokens(), gs, k);
    let pool = gs.instantiations(k);
    let n = block.len();
    let mut cand = Vec::with_capacity(n);
    for _ in 0..cfg.rs_samples_per_block {
        let p = rng.gen_range(0..n);
        cand.clear();
        if !pool.is_empty() {
            cand.extend((0..p).map(|_| pool[rng.gen_range(0..pool.len())]));
        } else if p > 0 {
            continue;
        }
        let u = tokens_unitary(&cand, gs, k);
        if equal_up_to_phase(&u, &target, cfg.tol)? {
            let lifted = lift_from_subspace(&Circuit::new(k, cand)?, &map)?;
            return Ok(Step::Replace {
                block: s,
                tokens: lifted,
            });
        }
    }
    Ok(Step::Miss)
}

/// Database retrieval on the compacted block, identity-padded to the
/// database register.
pub fn step_dr<R: Rng + ?Sized>(
    c: &Circuit,
    gs: &GateSet,
    db: &FactorDatabase,
    cfg: &ReducerConfig,
    rng: &mut R,
) -> Result<Step> {
    let s = pick_block(c, cfg, rng)?;
    dr_lookup(c, s, gs, db)
}

fn dr_lookup(c: &Circuit, s: Subblock, gs: &GateSet, db: &FactorDatabase) -> Result<Step> {
    let (block, mut map) = compact_to_subspace(c, s);
    if block.n_qubits() > db.qubit_count() {
        return Ok(Step::Miss);
    }
    let u = tokens_unitary(block.tokens(), gs, db.qubit_count());
    let Some(f) = db.lookup(&u)? else {
        return Ok(Step::Miss);
    };
    if f.len() >= block.len() {
        return Ok(Step::Miss);
    }
    let need = f
        .iter()
        .flat_map(|t| t.qubits().iter().map(|&q| q + 1))
        .max()
        .unwrap_or(0)
        .max(block.n_qubits());
    if need > map.compact_count() && !map.extend_to(need) {
        return Ok(Step::Miss);
    }
    let lifted = lift_from_subspace(&Circuit::new(map.compact_count(), f.to_vec())?, &map)?;
    Ok(Step::Replace {
        block: s,
        tokens: lifted,
    })
}

/// Forest-gated retrieval: blocks predicted irreducible skip the lookup.
pub fn step_rf<R: Rng + ?Sized>(
    c: &Circuit,
    gs: &GateSet,
    db: &FactorDatabase,
    forest: &RandomForest,
    cfg: &ReducerConfig,
    rng: &mut R,
) -> Result<Step> {
    let s = pick_block(c, cfg, rng)?;
    let (block, _) = compact_to_subspace(c, s);
    if !forest.passes_gate(&extract_features(block.tokens(), gs))? {
        return Ok(Step::GatedOut);
    }
    dr_lookup(c, s, gs, db)
}

/// Checks `c[s] == replacement` on their joint qubit support.
fn locally_equivalent(
    c: &Circuit,
    s: Subblock,
    replacement: &[Token],
    gs: &GateSet,
    tol: PhaseTolerance,
) -> Result<bool> {
    let mut joint = c.tokens()[s.start..s.end()].to_vec();
    joint.extend_from_slice(replacement);
    let whole = Circuit::new(c.n_qubits(), joint)?;
    let (compact, _) = compact_to_subspace(
        &whole,
        Subblock {
            start: 0,
            len: whole.len(),
        },
    );
    let k = compact.n_qubits();
    let (old, new) = compact.tokens().split_at(s.len);
    equal_up_to_phase(&tokens_unitary(old, gs, k), &tokens_unitary(new, gs, k), tol)
}

fn corrupt(replacement: &mut Vec<Token>, gs: &GateSet, n_qubits: usize) {
    if let Some(&t) = gs.instantiations(n_qubits).first() {
        replacement.push(t);
    }
}

/// Runs the loop until the target length is met, `stall_limit` iterations
/// pass without an acceptance, or the wall-clock budget runs out. The output
/// is verified against the input before it is returned.
pub fn reduce(
    c: &Circuit,
    gs: &GateSet,
    strategy: Strategy<'_>,
    cfg: &ReducerConfig,
) -> Result<(Circuit, ReductionTrace)> {
    cfg.validate()?;
    c.validate(gs)?;
    strategy.check_gate_set(gs)?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cur = c.clone();
    let mut trace = ReductionTrace {
        strategy: strategy.kind(),
        input_length: c.len(),
        records: Vec::new(),
        iterations: 0,
        termination: Termination::Stalled,
        budget_limited: cfg.wall_clock_budget.is_some(),
        times: PhaseTimes::default(),
        total: Duration::ZERO,
        time_to_target: None,
    };
    let at_target = |len: usize| cfg.target_length.is_some_and(|t| len <= t);
    let mut stall = 0;
    let mut fault_pending = cfg.inject_fault;
    loop {
        if at_target(cur.len()) {
            trace.time_to_target.get_or_insert(start.elapsed());
            trace.termination = Termination::TargetReached;
            break;
        }
        if cur.is_empty() || stall >= cfg.stall_limit {
            trace.termination = Termination::Stalled;
            break;
        }
        if cfg.wall_clock_budget.is_some_and(|b| start.elapsed() >= b) {
            trace.termination = Termination::Budget;
            break;
        }
        trace.iterations += 1;
        let iteration = trace.iterations;

        let t0 = Instant::now();
        let step = match strategy {
            Strategy::Rs => {
                let r = step_rs(&cur, gs, cfg, &mut rng)?;
                trace.times.selection += t0.elapsed();
                r
            }
            Strategy::Dr(db) => {
                let s = pick_block(&cur, cfg, &mut rng)?;
                let t1 = Instant::now();
                trace.times.selection += t1 - t0;
                let r = dr_lookup(&cur, s, gs, db)?;
                trace.times.lookup += t1.elapsed();
                r
            }
            Strategy::Rf(db, forest) => {
                let s = pick_block(&cur, cfg, &mut rng)?;
                let t1 = Instant::now();
                trace.times.selection += t1 - t0;
                let (block, _) = compact_to_subspace(&cur, s);
                let open = forest.passes_gate(&extract_features(block.tokens(), gs))?;
                let t2 = Instant::now();
                trace.times.forest += t2 - t1;
                if open {
                    let r = dr_lookup(&cur, s, gs, db)?;
                    trace.times.lookup += t2.elapsed();
                    r
                } else {
                    Step::GatedOut
                }
            }
        };

        let event = match step {
            Step::Replace { block, mut tokens } => {
                debug_assert!(tokens.len() < block.len);
                let t0 = Instant::now();
                if !locally_equivalent(&cur, block, &tokens, gs, cfg.tol)? {
                    return Err(Error::Verification(format!(
                        "iteration {iteration}: replacement for tokens {}..{} is not equivalent",
                        block.start,
                        block.end()
                    )));
                }
                trace.times.verification += t0.elapsed();
                if fault_pending {
                    fault_pending = false;
                    corrupt(&mut tokens, gs, cur.n_qubits());
                }
                cur = splice(&cur, block, &tokens)?;
                stall = 0;
                Event::Accepted
            }
            Step::Miss => {
                stall += 1;
                Event::Rejected
            }
            Step::GatedOut => {
                stall += 1;
                Event::GatedOut
            }
        };
        trace.records.push(TraceRecord {
            iteration,
            elapsed: start.elapsed(),
            length: cur.len(),
            event,
        });
        if event == Event::Accepted && at_target(cur.len()) {
            continue;
        }
        if commute_shuffle_in_place(&mut cur, gs, &mut rng, cfg.shuffle_attempts_per_iter) > 0 {
            trace.records.push(TraceRecord {
                iteration,
                elapsed: start.elapsed(),
                length: cur.len(),
                event: Event::Shuffled,
            });
        }
    }

    let t0 = Instant::now();
    let ok = verify_equivalence(c, &cur, gs, cfg.tol)?;
    trace.times.verification += t0.elapsed();
    trace.total = start.elapsed();
    if !ok {
        return Err(Error::Verification(format!(
            "reduced circuit ({} tokens) is not equivalent to the input ({} tokens)",
            cur.len(),
            c.len()
        )));
    }
    Ok((cur, trace))
}

/// Equivalence up to global phase. Registers of at most
/// [`FULL_VERIFY_MAX_QUBITS`] qubits compare `|tr(A^dag B)| / d` against
/// `1 - tol`, streaming basis columns in chunks. Larger registers compare
/// the outputs of [`PRODUCT_STATE_PROBES`] random product states instead.
pub fn verify_equivalence(a: &Circuit, b: &Circuit, gs: &GateSet, tol: PhaseTolerance) -> Result<bool> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: a.n_qubits(),
            got: b.n_qubits(),
        });
    }
    a.validate(gs)?;
    b.validate(gs)?;
    let n = a.n_qubits();
    if n <= FULL_VERIFY_MAX_QUBITS {
        Ok(trace_overlap(a, b, gs) >= 1.0 - tol.value())
    } else {
        product_state_check(a, b, gs, tol)
    }
}

fn run_rows(c: &Circuit, gs: &GateSet, data: &mut [Complex64], n_cols: usize) {
    for t in c.tokens() {
        apply_gate_rows(data, n_cols, &gs.def(t.def()).matrix, t.qubits(), c.n_qubits());
    }
}

/// `|tr(A^dag B)| / d`.
fn trace_overlap(a: &Circuit, b: &Circuit, gs: &GateSet) -> f64 {
    let d = 1usize << a.n_qubits();
    let chunk = d.min(256);
    let mut total = Complex64::new(0.0, 0.0);
    let mut ca = vec![Complex64::new(0.0, 0.0); d * chunk];
    let mut cb = ca.clone();
    for j0 in (0..d).step_by(chunk) {
        ca.fill(Complex64::new(0.0, 0.0));
        for i in 0..chunk {
            ca[(j0 + i) * chunk + i] = Complex64::new(1.0, 0.0);
        }
        cb.copy_from_slice(&ca);
        run_rows(a, gs, &mut ca, chunk);
        run_rows(b, gs, &mut cb, chunk);
        total += ca.iter().zip(&cb).map(|(x, y)| x.conj() * y).sum::<Complex64>();
    }
    total.norm() / d as f64
}

fn product_state_check(a: &Circuit, b: &Circuit, gs: &GateSet, tol: PhaseTolerance) -> Result<bool> {
    let n = a.n_qubits();
    let mut rng = ChaCha8Rng::seed_from_u64(0x005e_ed0f_9e0b);
    for _ in 0..PRODUCT_STATE_PROBES {
        let mut psi = vec![Complex64::new(1.0, 0.0)];
        for _ in 0..n {
            let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            let q = [Complex64::new(v[0], v[1]) / norm, Complex64::new(v[2], v[3]) / norm];
            psi = psi.iter().flat_map(|&p| [p * q[0], p * q[1]]).collect();
        }
        let mut sa = psi.clone();
        let mut sb = psi;
        run_rows(a, gs, &mut sa, 1);
        run_rows(b, gs, &mut sb, 1);
        let ov: Complex64 = sa.iter().zip(&sb).map(|(x, y)| x.conj() * y).sum();
        if ov.norm() < 1.0 - tol.value() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{circuit_unitary, parse_circuit, random_circuit};
    use crate::database::extract_database;
    use crate::forest::{generate_training_data, train_forest, ForestParams};
    use crate::graph::build_graph;
    use crate::unitary::phase_distance;

    fn clifford_db(q: usize, d: usize) -> (GateSet, FactorDatabase) {
        let gs = GateSet::preset("clifford_t").unwrap();
        let db = extract_database(&build_graph(&gs, q, d).unwrap());
        (gs, db)
    }

    fn cfg(seed: u64) -> ReducerConfig {
        ReducerConfig {
            seed,
            stall_limit: 200,
            ..Default::default()
        }
    }

    fn check_trace(t: &ReductionTrace) {
        let mut last = t.input_length;
        for r in t.records.iter().filter(|r| r.event == Event::Accepted) {
            assert!(r.length < last, "accepted event did not shorten");
            last = r.length;
        }
    }

    #[test]
    fn involution_pair_removed() {
        let (gs, db) = clifford_db(2, 3);
        let c = parse_circuit("qubits 2\nx 0\nx 0\nh 1", &gs).unwrap();
        let (out, trace) = reduce(&c, &gs, Strategy::Dr(&db), &cfg(1)).unwrap();
        assert_eq!(out, parse_circuit("qubits 2\nh 1", &gs).unwrap());
        check_trace(&trace);
    }

    #[test]
    fn minimal_circuit_unchanged() {
        let (gs, db) = clifford_db(2, 3);
        let c = parse_circuit("qubits 2\nh 0", &gs).unwrap();
        for strategy in [Strategy::Rs, Strategy::Dr(&db)] {
            let (out, trace) = reduce(&c, &gs, strategy, &cfg(3)).unwrap();
            assert_eq!(out, c);
            assert_eq!(trace.count(Event::Accepted), 0);
            assert_eq!(trace.iterations, 200);
            assert!(trace
                .records
                .iter()
                .all(|r| matches!(r.event, Event::Rejected | Event::Shuffled)));
        }
        let empty = Circuit::empty(2);
        let (out, trace) = reduce(&empty, &gs, Strategy::Dr(&db), &cfg(0)).unwrap();
        assert!(out.is_empty());
        assert_eq!(trace.iterations, 0);
    }

    #[test]
    fn rs_finds_empty_replacement() {
        let gs = GateSet::preset("clifford_t").unwrap();
        let c = parse_circuit("qubits 1\nh 0\nh 0", &gs).unwrap();
        let conf = ReducerConfig {
            subblock_len_range: (2, 2),
            ..cfg(0)
        };
        let step = step_rs(&c, &gs, &conf, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(
            step,
            Step::Replace {
                block: Subblock { start: 0, len: 2 },
                tokens: vec![]
            }
        );
        let single = parse_circuit("qubits 1\nh 0", &gs).unwrap();
        assert_eq!(
            step_rs(&single, &gs, &conf, &mut ChaCha8Rng::seed_from_u64(0)).unwrap(),
            Step::Miss
        );
    }

    #[test]
    fn rs_iontrap_inverse_pair() {
        let gs = GateSet::preset("iontrap").unwrap();
        let c = parse_circuit("qubits 2\nrx_p2 1\nrx_m2 1", &gs).unwrap();
        let conf = ReducerConfig {
            subblock_len_range: (2, 2),
            ..cfg(0)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        match step_rs(&c, &gs, &conf, &mut rng).unwrap() {
            Step::Replace { tokens, .. } => assert!(tokens.is_empty()),
            other => panic!("expected a replacement, got {other:?}"),
        }
    }

    #[test]
    fn dr_recovers_padded_depth_two_node() {
        let (gs, db) = clifford_db(2, 4);
        let h = gs.index_of("h").unwrap();
        let s = gs.index_of("s").unwrap();
        let x = gs.index_of("x").unwrap();
        // h0 s1, padded with two inverse pairs: length 6
        let tokens = vec![
            Token::new(h, &[0]),
            Token::new(x, &[1]),
            Token::new(x, &[1]),
            Token::new(s, &[1]),
            Token::new(h, &[0]),
            Token::new(h, &[0]),
        ];
        let c = Circuit::new(2, tokens).unwrap();
        let conf = ReducerConfig {
            subblock_len_range: (6, 6),
            ..cfg(0)
        };
        match step_dr(&c, &gs, &db, &conf, &mut ChaCha8Rng::seed_from_u64(0)).unwrap() {
            Step::Replace { block, tokens } => {
                assert_eq!(block, Subblock { start: 0, len: 6 });
                assert_eq!(tokens.len(), 2);
                let out = splice(&c, block, &tokens).unwrap();
                assert!(phase_distance(&circuit_unitary(&out, &gs), &circuit_unitary(&c, &gs)).unwrap() <= 1e-9);
            }
            other => panic!("expected a replacement, got {other:?}"),
        }
    }

    #[test]
    fn dr_completeness_within_depth() {
        let (gs, db) = clifford_db(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let conf = ReducerConfig {
            subblock_len_range: (1, 6),
            ..cfg(0)
        };
        for _ in 0..300 {
            let c = random_circuit(&gs, 2, 6, &mut rng).unwrap();
            let mut probe = rng.clone();
            let s = pick_block(&c, &conf, &mut probe).unwrap();
            let (block, _) = compact_to_subspace(&c, s);
            let u = tokens_unitary(block.tokens(), &gs, 2);
            let shorter = db.lookup(&u).unwrap().is_some_and(|f| f.len() < block.len());
            let step = step_dr(&c, &gs, &db, &conf, &mut rng).unwrap();
            assert_eq!(matches!(step, Step::Replace { .. }), shorter);
        }
    }

    #[test]
    fn single_qubit_blocks_use_padded_database() {
        let (gs, db) = clifford_db(2, 3);
        let c = parse_circuit("qubits 3\nt 2\nt 2\nt 2\nt 2", &gs).unwrap();
        let conf = ReducerConfig {
            subblock_len_range: (4, 4),
            ..cfg(0)
        };
        match step_dr(&c, &gs, &db, &conf, &mut ChaCha8Rng::seed_from_u64(0)).unwrap() {
            Step::Replace { tokens, .. } => {
                // t^4 = z = s s; either way it must stay on qubit 2
                assert!(tokens.len() < 4);
                assert!(tokens.iter().all(|t| t.qubits() == [2]));
            }
            other => panic!("expected a replacement, got {other:?}"),
        }
    }

    #[test]
    fn blocks_wider_than_database_are_skipped() {
        let (gs, db) = clifford_db(1, 3);
        let c = parse_circuit("qubits 2\ncx 0 1\ncx 0 1", &gs).unwrap();
        let conf = ReducerConfig {
            subblock_len_range: (2, 2),
            ..cfg(0)
        };
        assert_eq!(
            step_dr(&c, &gs, &db, &conf, &mut ChaCha8Rng::seed_from_u64(0)).unwrap(),
            Step::Miss
        );
    }

    #[test]
    fn random_circuits_shrink_and_stay_equivalent() {
        let (gs, db) = clifford_db(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for seed in 0..4 {
            let c = random_circuit(&gs, 2, 40, &mut rng).unwrap();
            for strategy in [Strategy::Rs, Strategy::Dr(&db)] {
                let (out, trace) = reduce(&c, &gs, strategy, &cfg(seed)).unwrap();
                assert!(
                    out.len() < c.len(),
                    "{:?}: {} -> {}",
                    strategy.kind(),
                    c.len(),
                    out.len()
                );
                assert!(verify_equivalence(&c, &out, &gs, PhaseTolerance::default()).unwrap());
                assert_eq!(trace.output_length(), out.len());
                check_trace(&trace);
            }
        }
    }

    #[test]
    fn target_and_determinism() {
        let (gs, db) = clifford_db(2, 3);
        let c = random_circuit(&gs, 2, 30, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let conf = ReducerConfig {
            target_length: Some(25),
            ..cfg(9)
        };
        let (a, ta) = reduce(&c, &gs, Strategy::Dr(&db), &conf).unwrap();
        let (b, tb) = reduce(&c, &gs, Strategy::Dr(&db), &conf).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta.events(), tb.events());
        assert!(a.len() <= 25);
        assert_eq!(ta.termination, Termination::TargetReached);
        assert!(ta.time_to_target.is_some());
    }

    #[test]
    fn forest_gate_never_splices_unverified() {
        let (gs, db) = clifford_db(2, 3);
        let data = generate_training_data(&gs, &db, &mut ChaCha8Rng::seed_from_u64(2), 600, (3, 7)).unwrap();
        let forest = train_forest(
            &data,
            ForestParams {
                n_trees: 10,
                ..Default::default()
            },
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap()
        .bind(&gs)
        .unwrap();
        let c = random_circuit(&gs, 2, 30, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();

        // an open gate reproduces DR exactly
        let open = forest.clone().with_tau(0.0).unwrap();
        let (dr, tdr) = reduce(&c, &gs, Strategy::Dr(&db), &cfg(5)).unwrap();
        let (rf, trf) = reduce(&c, &gs, Strategy::Rf(&db, &open), &cfg(5)).unwrap();
        assert_eq!(dr, rf);
        assert_eq!(tdr.events(), trf.events());

        let (out, trace) = reduce(&c, &gs, Strategy::Rf(&db, &forest), &cfg(5)).unwrap();
        assert!(verify_equivalence(&c, &out, &gs, PhaseTolerance::default()).unwrap());
        check_trace(&trace);
    }

    #[test]
    fn fingerprint_mismatch_is_rejected() {
        let (_, db) = clifford_db(1, 2);
        let other = GateSet::preset("nisq").unwrap();
        let c = Circuit::empty(1);
        assert!(matches!(
            reduce(&c, &other, Strategy::Dr(&db), &cfg(0)),
            Err(Error::FingerprintMismatch { .. })
        ));
    }

    #[test]
    fn injected_fault_is_caught() {
        let (gs, db) = clifford_db(2, 3);
        let c = parse_circuit("qubits 2\nx 0\nx 0\nh 1", &gs).unwrap();
        let conf = ReducerConfig {
            inject_fault: true,
            ..cfg(1)
        };
        assert!(matches!(
            reduce(&c, &gs, Strategy::Dr(&db), &conf),
            Err(Error::Verification(_))
        ));
    }

    #[test]
    fn verify_equivalence_cases() {
        let gs = GateSet::preset("clifford_t").unwrap();
        let a = parse_circuit("qubits 2\nh 0\ncx 0 1\nt 1", &gs).unwrap();
        let tol = PhaseTolerance::default();
        assert!(verify_equivalence(&a, &a, &gs, tol).unwrap());
        let b = parse_circuit("qubits 2\nh 0\ncx 0 1\nt 1\nx 0", &gs).unwrap();
        assert!(!verify_equivalence(&a, &b, &gs, tol).unwrap());
        // s s = z up to nothing; h z h = x
        let c = parse_circuit("qubits 2\nh 0\ncx 0 1\nt 1\nh 0\ns 0\ns 0\nh 0", &gs).unwrap();
        assert!(verify_equivalence(&b, &c, &gs, tol).unwrap());
        assert!(verify_equivalence(&a, &Circuit::empty(3), &gs, tol).is_err());
    }

    #[test]
    fn product_state_path_for_wide_registers() {
        let gs = GateSet::preset("clifford_t").unwrap();
        let text = "qubits 13\nh 0\ncx 0 12\nt 12\nx 5\nx 5";
        let a = parse_circuit(text, &gs).unwrap();
        let b = parse_circuit("qubits 13\nh 0\ncx 0 12\nt 12", &gs).unwrap();
        let c = parse_circuit("qubits 13\nh 0\ncx 0 12\nt 12\nx 5", &gs).unwrap();
        let tol = PhaseTolerance::default();
        assert!(verify_equivalence(&a, &b, &gs, tol).unwrap());
        assert!(!verify_equivalence(&a, &c, &gs, tol).unwrap());
    }

    #[test]
    fn chunked_trace_matches_dense_overlap() {
        let gs = GateSet::preset("clifford_t").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in [1, 3, 9] {
            let a = random_circuit(&gs, n, 12, &mut rng).unwrap();
            let b = random_circuit(&gs, n, 12, &mut rng).unwrap();
            let dense = 1.0 - phase_distance(&circuit_unitary(&a, &gs), &circuit_unitary(&b, &gs)).unwrap();
            assert!((trace_overlap(&a, &b, &gs) - dense).abs() < 1e-9);
        }
    }
}
