//! Containerization overhead measurement: the sine pipeline run natively and
//! under each boundary codec, overhead computed as
//! `(t_rune - t_native) / t_native`.
//!
//! Timing uses the per-thread CPU clock (monotone for the timing thread) and
//! covers only the call loop; bundle load and the manifest phase are
//! excluded. CPU time rather than wall time keeps scheduler preemption out
//! of the measurement, which is exactly the computation-time comparison the
//! overhead formula wants. Each configuration is repeated and the median
//! kept.

use std::fmt;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::fixtures;
use crate::runicos::{
    load, run_native, DeviceProfile, ProviderBinding, ProviderSet, RuneInstance,
};
use crate::runefile::CapabilityKind;
use crate::tensor::Codec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Native,
    RuneFixed,
    RuneVarint,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Native, Mode::RuneFixed, Mode::RuneVarint];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Native => "native",
            Mode::RuneFixed => "rune_fixed",
            Mode::RuneVarint => "rune_varint",
        }
    }

    pub fn from_name(s: &str) -> Option<Mode> {
        match s {
            "native" => Some(Mode::Native),
            "rune_fixed" => Some(Mode::RuneFixed),
            "rune_varint" => Some(Mode::RuneVarint),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub mode: Mode,
    pub iterations: u64,
    /// Median wall time over the repeats, seconds.
    pub t_total: f64,
    /// Relative to the native median at the same iteration count; absent for
    /// the native baseline itself.
    pub overhead: Option<f64>,
    /// Per-repeat wall times, seconds. Empty for records parsed from CSV.
    pub repeat_times: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("native baseline must be positive")]
    NonPositiveBaseline,
    #[error("no records to report")]
    NoRecords,
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed CSV line {0}: {1}")]
    MalformedCsv(usize, String),
    #[error("pipeline error: {0}")]
    Pipeline(String),
}

pub fn compute_overhead(t_rune: f64, t_native: f64) -> Result<f64, BenchError> {
    if t_native <= 0.0 {
        return Err(BenchError::NonPositiveBaseline);
    }
    Ok((t_rune - t_native) / t_native)
}

fn median(times: &[f64]) -> f64 {
    let mut sorted = times.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn bench_profile(seed: u64) -> DeviceProfile {
    DeviceProfile::new(
        "bench",
        vec![(CapabilityKind::Rand, ProviderBinding::Seeded(seed))],
        1 << 24,
    )
    .expect("valid profile")
}

fn make_instance(seed: u64) -> Result<RuneInstance, BenchError> {
    let mut instance = load(&fixtures::sine_bundle(), bench_profile(seed))
        .map_err(|e| BenchError::Pipeline(e.to_string()))?;
    instance
        .manifest()
        .map_err(|e| BenchError::Pipeline(e.to_string()))?;
    Ok(instance)
}

/// CPU time consumed by the calling thread, in seconds.
fn thread_cpu_time() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    assert_eq!(rc, 0, "clock_gettime(CLOCK_THREAD_CPUTIME_ID) failed");
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

/// Per-mode execution state kept alive for a whole repeat, so a repeat can
/// be timed in many short slices.
enum Runner {
    Native {
        graph: crate::runefile::PipelineGraph,
        models: std::collections::HashMap<String, crate::model::DenseModel>,
        providers: ProviderSet,
    },
    Rune {
        instance: RuneInstance,
        codec: Codec,
    },
}

impl Runner {
    fn new(mode: Mode, seed: u64) -> Result<Runner, BenchError> {
        Ok(match mode {
            Mode::Native => {
                let (graph, models) = fixtures::sine_graph_and_models();
                let providers = ProviderSet::from_profile(&bench_profile(seed))
                    .map_err(|e| BenchError::Pipeline(e.to_string()))?;
                Runner::Native { graph, models, providers }
            }
            Mode::RuneFixed | Mode::RuneVarint => {
                let codec = if mode == Mode::RuneFixed { Codec::Fixed } else { Codec::Varint };
                Runner::Rune { instance: make_instance(seed)?, codec }
            }
        })
    }

    /// Runs `iterations` executions and returns the elapsed wall time.
    fn run(&mut self, iterations: u64) -> Result<f64, BenchError> {
        match self {
            Runner::Native { graph, models, providers } => {
                let mut sink = io::sink();
                let start = thread_cpu_time();
                for _ in 0..iterations {
                    run_native(graph, models, providers, &mut sink)
                        .map_err(|e| BenchError::Pipeline(e.to_string()))?;
                }
                Ok(thread_cpu_time() - start)
            }
            Runner::Rune { instance, codec } => {
                let start = thread_cpu_time();
                for _ in 0..iterations {
                    instance.call(*codec).map_err(|e| BenchError::Pipeline(e.to_string()))?;
                }
                Ok(thread_cpu_time() - start)
            }
        }
    }
}

/// One timed run: `iterations` executions with provider seed `seed`.
fn timed_run(mode: Mode, iterations: u64, seed: u64) -> Result<f64, BenchError> {
    Runner::new(mode, seed)?.run(iterations)
}

/// Iterations per timed slice; see `run_sweep`.
const SLICE: u64 = 2_000;

/// Iterations of untimed warm-up per mode, capped by the row's count.
const WARMUP: u64 = 50_000;

/// Runs the sweep. Identical provider seeds are used across modes for a
/// given (iteration count, repeat) pair, and the native baseline is always
/// measured so rune-mode overheads can be computed.
///
/// A repeat is not timed as one contiguous block: every (mode, repeat) pair
/// keeps its state alive while the timed work is dealt out round-robin in
/// slices of at most `SLICE` iterations. Machine drift (frequency scaling,
/// scheduler interference) therefore lands on all modes and repeats evenly
/// instead of skewing whichever block happened to run during a slow patch.
pub fn run_sweep(
    iterations_list: &[u64],
    modes: &[Mode],
    repeats: usize,
) -> Result<Vec<BenchmarkRecord>, BenchError> {
    assert!(repeats > 0, "repeats must be positive");
    let mut records = Vec::new();
    for (i, &iterations) in iterations_list.iter().enumerate() {
        assert!(iterations > 0, "iteration counts must be positive");
        // warm-up, untimed
        for &mode in &Mode::ALL {
            timed_run(mode, iterations.min(WARMUP), 0)?;
        }

        let mut runners: Vec<Vec<Runner>> = Vec::new();
        for &mode in &Mode::ALL {
            let mut per_repeat = Vec::new();
            for r in 0..repeats {
                per_repeat.push(Runner::new(mode, (i * repeats + r) as u64)?);
            }
            runners.push(per_repeat);
        }

        let mut times: Vec<Vec<f64>> = vec![vec![0.0; repeats]; Mode::ALL.len()];
        let mut remaining = iterations;
        let mut round = 0usize;
        while remaining > 0 {
            let chunk = remaining.min(SLICE);
            // Rotate the visit order every round so a burst of external load
            // cannot keep landing on the same (mode, repeat) pair.
            for k in 0..repeats {
                let r = (k + round) % repeats;
                for j in 0..Mode::ALL.len() {
                    let m = (j + round) % Mode::ALL.len();
                    times[m][r] += runners[m][r].run(chunk)?;
                }
            }
            remaining -= chunk;
            round += 1;
        }

        let t_native = median(&times[0]);
        for &mode in modes {
            let m = Mode::ALL.iter().position(|&x| x == mode).expect("known mode");
            let t_total = median(&times[m]);
            let overhead = match mode {
                Mode::Native => None,
                _ => Some(compute_overhead(t_total, t_native)?),
            };
            records.push(BenchmarkRecord {
                mode,
                iterations,
                t_total,
                overhead,
                repeat_times: times[m].clone(),
            });
        }
    }
    Ok(records)
}

pub fn to_csv(records: &[BenchmarkRecord]) -> Result<String, BenchError> {
    if records.is_empty() {
        return Err(BenchError::NoRecords);
    }
    let mut out = String::from("mode,iterations,t_total_s,overhead\n");
    for r in records {
        let overhead = r.overhead.map(|o| o.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", r.mode, r.iterations, r.t_total, overhead));
    }
    Ok(out)
}

pub fn parse_csv(text: &str) -> Result<Vec<BenchmarkRecord>, BenchError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "mode,iterations,t_total_s,overhead")) => {}
        other => {
            return Err(BenchError::MalformedCsv(1, format!("bad header: {other:?}")));
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(BenchError::MalformedCsv(idx + 1, "expected 4 columns".into()));
        }
        let mode = Mode::from_name(parts[0])
            .ok_or_else(|| BenchError::MalformedCsv(idx + 1, format!("bad mode {}", parts[0])))?;
        let iterations = parts[1]
            .parse()
            .map_err(|e| BenchError::MalformedCsv(idx + 1, format!("iterations: {e}")))?;
        let t_total = parts[2]
            .parse()
            .map_err(|e| BenchError::MalformedCsv(idx + 1, format!("t_total: {e}")))?;
        let overhead = if parts[3].is_empty() {
            None
        } else {
            Some(
                parts[3]
                    .parse()
                    .map_err(|e| BenchError::MalformedCsv(idx + 1, format!("overhead: {e}")))?,
            )
        };
        records.push(BenchmarkRecord { mode, iterations, t_total, overhead, repeat_times: vec![] });
    }
    Ok(records)
}

pub fn render_table(records: &[BenchmarkRecord]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>10} {:>12} {:>10}\n",
        "Mode", "Iterations", "Time (s)", "Overhead"
    ));
    for r in records {
        let overhead = r
            .overhead
            .map(|o| format!("{:.1}%", o * 100.0))
            .unwrap_or_else(|| "-".to_string());
        out.push_str(&format!(
            "{:<12} {:>10} {:>12.6} {:>10}\n",
            r.mode.name(),
            r.iterations,
            r.t_total,
            overhead
        ));
    }
    out
}

/// Writes the CSV to `path` and returns the rendered text table.
pub fn report(records: &[BenchmarkRecord], path: &Path) -> Result<String, BenchError> {
    let csv = to_csv(records)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(csv.as_bytes())?;
    Ok(render_table(records))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overhead_formula() {
        assert!((compute_overhead(1.4, 1.0).unwrap() - 0.40).abs() < 1e-12);
        assert!((compute_overhead(1.28, 1.0).unwrap() - 0.28).abs() < 1e-12);
        assert_eq!(compute_overhead(1.0, 1.0).unwrap(), 0.0);
        assert!(compute_overhead(1.0, 0.0).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn small_sweep_has_expected_shape() {
        let records = run_sweep(&[50, 100], &Mode::ALL, 3).unwrap();
        assert_eq!(records.len(), 6);
        for r in &records {
            assert!(r.t_total > 0.0);
            assert_eq!(r.overhead.is_some(), r.mode != Mode::Native);
            assert_eq!(r.repeat_times.len(), 3);
        }
    }

    #[test]
    fn csv_round_trip() {
        let records = vec![
            BenchmarkRecord {
                mode: Mode::Native,
                iterations: 1000,
                t_total: 0.123456789,
                overhead: None,
                repeat_times: vec![],
            },
            BenchmarkRecord {
                mode: Mode::RuneVarint,
                iterations: 1000,
                t_total: 0.2,
                overhead: Some(0.6203007518796992),
                repeat_times: vec![],
            },
        ];
        let csv = to_csv(&records).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(parse_csv(&csv).unwrap(), records);
    }

    #[test]
    fn empty_report_is_an_error() {
        assert!(matches!(to_csv(&[]), Err(BenchError::NoRecords)));
    }
}
