//! Paired benchmark runs over seeded random circuits and box-plot summaries
//! of their wall times.

use std::fmt::Write as _;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::{random_circuit, Circuit};
use crate::database::FactorDatabase;
use crate::error::{Error, Result};
use crate::forest::RandomForest;
use crate::gates::GateSet;
use crate::reducer::{reduce, ReducerConfig, Strategy, StrategyKind, Termination};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub qubits: usize,
    pub length: usize,
    pub runs: usize,
    pub strategies: Vec<StrategyKind>,
    /// Defaults to half the input length.
    pub target: Option<usize>,
    pub seed: u64,
    /// Worker threads; `None` uses every available core.
    pub jobs: Option<usize>,
    /// Loop settings shared by all runs; `seed` and `target_length` are
    /// overridden per run.
    pub reducer: ReducerConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            qubits: 2,
            length: 100,
            runs: 100,
            strategies: StrategyKind::ALL.to_vec(),
            target: None,
            seed: 0,
            jobs: None,
            reducer: ReducerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub strategy: StrategyKind,
    pub run: usize,
    pub seed: u64,
    pub input_length: usize,
    pub output_length: usize,
    /// Time to reach the target, or the whole run when it was not reached.
    pub wall: Duration,
    pub iterations: usize,
    pub reached_target: bool,
}

/// Box-plot statistics. Percentiles interpolate linearly between order
/// statistics; whiskers are the extreme samples within 1.5 IQR of the box.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (0 for a single value).
    pub stddev: f64,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot summarize an empty sample".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let stddev = if n > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let (p25, median, p75) = (percentile(&v, 0.25), percentile(&v, 0.5), percentile(&v, 0.75));
    let iqr = p75 - p25;
    let (lo_fence, hi_fence) = (p25 - 1.5 * iqr, p75 + 1.5 * iqr);
    let inside = || v.iter().copied().filter(|&x| x >= lo_fence && x <= hi_fence);
    Ok(Summary {
        n,
        mean,
        stddev,
        median,
        p25,
        p75,
        whisker_low: inside().fold(f64::INFINITY, f64::min),
        whisker_high: inside().fold(f64::NEG_INFINITY, f64::max),
        outliers: v.iter().copied().filter(|&x| x < lo_fence || x > hi_fence).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub records: Vec<RunRecord>,
    /// Wall-time summaries in seconds, in the configured strategy order.
    pub aggregates: Vec<(StrategyKind, Summary)>,
}

impl BenchReport {
    pub fn from_records(records: Vec<RunRecord>, order: &[StrategyKind]) -> Result<Self> {
        let mut aggregates = Vec::new();
        for &k in order {
            let times: Vec<f64> = records
                .iter()
                .filter(|r| r.strategy == k)
                .map(|r| r.wall.as_secs_f64())
                .collect();
            if !times.is_empty() {
                aggregates.push((k, summarize(&times)?));
            }
        }
        Ok(Self { records, aggregates })
    }

    pub fn summary(&self, k: StrategyKind) -> Option<&Summary> {
        self.aggregates.iter().find(|(s, _)| *s == k).map(|(_, s)| s)
    }

    pub const CSV_HEADER: &'static str =
        "strategy,run,seed,input_length,output_length,wall_ms,iterations,reached_target";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{:.6},{},{}",
                r.strategy,
                r.run,
                r.seed,
                r.input_length,
                r.output_length,
                r.wall.as_secs_f64() * 1e3,
                r.iterations,
                r.reached_target
            )
            .expect("writing to a String");
        }
        out
    }

    /// One line per strategy: mean and spread of wall time in seconds.
    pub fn table(&self) -> String {
        let mut out = String::from("strategy      mean_s    stddev_s    median_s  outliers\n");
        for (k, s) in &self.aggregates {
            writeln!(
                out,
                "{:<8} {:>11.6} {:>11.6} {:>11.6} {:>9}",
                k.name(),
                s.mean,
                s.stddev,
                s.median,
                s.outliers.len()
            )
            .expect("writing to a String");
        }
        out
    }
}

/// Input circuit of run `run`; independent of the strategy list.
pub fn bench_circuit(gs: &GateSet, cfg: &BenchConfig, run: usize) -> Result<Circuit> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(run as u64);
    random_circuit(gs, cfg.qubits, cfg.length, &mut rng)
}

/// Every strategy reduces the same `runs` circuits with the same per-run
/// seed. Runs execute on a pool of `jobs` workers; records come back in
/// (run, strategy) order regardless of scheduling.
pub fn run_bench(
    gs: &GateSet,
    db: Option<&FactorDatabase>,
    forest: Option<&RandomForest>,
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    if cfg.runs == 0 {
        return Err(Error::InvalidArgument("bench needs at least one run".into()));
    }
    if cfg.strategies.is_empty() {
        return Err(Error::InvalidArgument("bench needs at least one strategy".into()));
    }
    let strategy = |k: StrategyKind| -> Result<Strategy<'_>> {
        let need_db = || db.ok_or_else(|| Error::InvalidArgument(format!("strategy {k} needs a database")));
        Ok(match k {
            StrategyKind::Rs => Strategy::Rs,
            StrategyKind::Dr => Strategy::Dr(need_db()?),
            StrategyKind::Rf => Strategy::Rf(
                need_db()?,
                forest.ok_or_else(|| Error::InvalidArgument("strategy rf needs a model".into()))?,
            ),
        })
    };
    let strategies: Vec<Strategy<'_>> = cfg.strategies.iter().map(|&k| strategy(k)).collect::<Result<_>>()?;
    for s in &strategies {
        s.check_gate_set(gs)?;
    }
    let target = cfg.target.unwrap_or(cfg.length / 2);
    let jobs: Vec<(usize, usize)> = (0..cfg.runs)
        .flat_map(|r| (0..strategies.len()).map(move |s| (r, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let records = pool.install(|| {
        jobs.par_iter()
            .map(|&(run, si)| -> Result<RunRecord> {
                let c = bench_circuit(gs, cfg, run)?;
                let seed = cfg.seed.wrapping_add(run as u64);
                let rc = ReducerConfig {
                    seed,
                    target_length: Some(target),
                    ..cfg.reducer.clone()
                };
                let (out, trace) = reduce(&c, gs, strategies[si], &rc)?;
                let reached = trace.termination == Termination::TargetReached;
                Ok(RunRecord {
                    strategy: strategies[si].kind(),
                    run,
                    seed,
                    input_length: c.len(),
                    output_length: out.len(),
                    wall: trace.time_to_target.unwrap_or(trace.total),
                    iterations: trace.iterations,
                    reached_target: reached,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    BenchReport::from_records(records, &cfg.strategies)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::database::extract_database;
    use crate::graph::build_graph;
    use proptest::prelude::*;

    #[test]
    fn summary_golden() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!((s.p25, s.median, s.p75), (2.0, 3.0, 4.0));
        assert_eq!(s.mean, 22.0);
        assert_eq!(s.outliers, vec![100.0]);
        assert_eq!((s.whisker_low, s.whisker_high), (1.0, 4.0));
        let want_sd = ((21f64.powi(2) + 20f64.powi(2) + 19f64.powi(2) + 18f64.powi(2) + 78f64.powi(2)) / 4.0).sqrt();
        assert!((s.stddev - want_sd).abs() < 1e-12);
        let one = summarize(&[7.0]).unwrap();
        assert_eq!((one.stddev, one.median, one.whisker_low), (0.0, 7.0, 7.0));
        assert!(summarize(&[]).is_err());
        assert_eq!(percentile(&[0.0, 10.0], 0.25), 2.5);
    }

    proptest! {
        #[test]
        fn summary_is_ordered(v in proptest::collection::vec(-1e3f64..1e3, 1..40)) {
            let s = summarize(&v).unwrap();
            prop_assert!(s.p25 <= s.median && s.median <= s.p75);
            prop_assert!(s.whisker_low <= s.whisker_high);
            let iqr = s.p75 - s.p25;
            for &o in &s.outliers {
                prop_assert!(o < s.p25 - 1.5 * iqr || o > s.p75 + 1.5 * iqr);
            }
            let inside = v.len() - s.outliers.len();
            prop_assert!(inside >= 1);
        }
    }

    #[test]
    fn paired_runs_share_inputs() {
        let gs = GateSet::preset("clifford_t").unwrap();
        let db = extract_database(&build_graph(&gs, 2, 3).unwrap());
        let cfg = BenchConfig {
            length: 20,
            runs: 3,
            strategies: vec![StrategyKind::Rs, StrategyKind::Dr],
            seed: 4,
            jobs: Some(1),
            reducer: ReducerConfig {
                stall_limit: 100,
                ..Default::default()
            },
            ..Default::default()
        };
        let report = run_bench(&gs, Some(&db), None, &cfg).unwrap();
        assert_eq!(report.records.len(), 6);
        for pair in report.records.chunks(2) {
            assert_eq!(pair[0].input_length, pair[1].input_length);
            assert_eq!(pair[0].seed, pair[1].seed);
            assert_eq!(pair[0].run, pair[1].run);
        }
        assert_eq!(report.to_csv().lines().count(), 7);
        assert_eq!(report.aggregates.len(), 2);
        assert!(run_bench(&gs, None, None, &cfg).is_err());
    }
}
