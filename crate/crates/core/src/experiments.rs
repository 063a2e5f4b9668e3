//! Replicated runs, alpha sweeps and strategy comparisons.
//!
//! Run `r` of every design cell uses seed `base_seed + r`. Since arrivals
//! have their own random stream, runs of different strategies with the same
//! seed see identical demand.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::config::{SimConfig, Strategy};
use crate::engine::{run, MetricsRecord};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scenarios::{Scenario, Settings};

pub const DEFAULT_RUNS: usize = 50;
pub const DEFAULT_Q_LIST: [f64; 5] = [0.05, 0.075, 0.10, 0.125, 0.15];

/// Everything shared by the runs of one experiment except demand, strategy
/// and seed.
#[derive(Clone, Debug)]
pub struct Experiment<S> {
    pub scenario: Scenario<S>,
    pub v_max: u8,
    pub p: S,
    pub horizon: u64,
    pub min_green: u32,
    pub delay_window: Option<usize>,
    /// Worker threads; 0 means all available cores.
    pub jobs: usize,
}

impl<S: Scalar> Experiment<S> {
    pub fn from_settings(settings: &Settings) -> Result<Self> {
        settings.validate()?;
        Ok(Experiment {
            scenario: settings.build_scenario()?,
            v_max: settings.v_max,
            p: S::lit(settings.p),
            horizon: settings.horizon,
            min_green: settings.min_green,
            delay_window: settings.delay_window,
            jobs: 0,
        })
    }

    pub fn config(&self, q: S, strategy: Strategy<S>, seed: u64) -> SimConfig<S> {
        SimConfig {
            topology: self.scenario.topology.clone(),
            v_max: self.v_max,
            p: self.p,
            strategy,
            intensities: self.scenario.intensities(q),
            horizon: self.horizon,
            seed,
            min_green: self.min_green,
            delay_window: self.delay_window,
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))
    }
}

/// Runs seeds `base_seed .. base_seed + runs`, returned in seed order.
pub fn replicate<S: Scalar>(
    experiment: &Experiment<S>,
    q: S,
    strategy: &Strategy<S>,
    runs: usize,
    base_seed: u64,
) -> Result<Vec<MetricsRecord>> {
    let configs: Vec<SimConfig<S>> = (0..runs as u64)
        .map(|r| experiment.config(q, strategy.clone(), base_seed + r))
        .collect();
    experiment
        .pool()?
        .install(|| configs.into_par_iter().map(run).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 when `n == 1`, see `degenerate`.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub degenerate: bool,
}

/// Mean, sample standard deviation (n - 1 denominator) and extremes.
pub fn aggregate(values: &[f64]) -> Result<Stats> {
    if values.is_empty() {
        return Err(Error::Usage("cannot aggregate an empty sample".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Stats {
        n,
        mean,
        std,
        min,
        max,
        degenerate: n == 1,
    })
}

/// Welch's unequal-variance t test between two samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Welch {
    pub t: f64,
    pub df: f64,
    /// Two-sided p value.
    pub p: f64,
}

pub fn welch(a: &Stats, b: &Stats) -> Welch {
    let va = a.std * a.std / a.n as f64;
    let vb = b.std * b.std / b.n as f64;
    let diff = a.mean - b.mean;
    let se = (va + vb).sqrt();
    if se == 0.0 {
        return if diff == 0.0 {
            Welch { t: 0.0, df: f64::NAN, p: 1.0 }
        } else {
            Welch {
                t: diff.signum() * f64::INFINITY,
                df: f64::NAN,
                p: 0.0,
            }
        };
    }
    let t = diff / se;
    let df = (va + vb).powi(2)
        / (va * va / (a.n as f64 - 1.0).max(1.0) + vb * vb / (b.n as f64 - 1.0).max(1.0));
    let p = match StudentsT::new(0.0, 1.0, df) {
        Ok(dist) => (2.0 * dist.sf(t.abs())).min(1.0),
        Err(_) => f64::NAN,
    };
    Welch { t, df, p }
}

/// One design cell: a scenario, a demand level and a controller.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub scenario: String,
    pub q: f64,
    pub strategy: String,
    pub alpha: f64,
    pub runs: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub base_seed: u64,
    pub std_degenerate: bool,
}

impl SweepRow {
    pub fn stats(&self) -> Stats {
        Stats {
            n: self.runs,
            mean: self.mean,
            std: self.std,
            min: self.min,
            max: self.max,
            degenerate: self.std_degenerate,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// A sweep that stopped early; `partial` holds the rows completed before the
/// failing run.
#[derive(Debug)]
pub struct SweepError {
    pub partial: SweepResult,
    pub source: Error,
}

impl std::fmt::Display for SweepError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} completed rows)", self.source, self.partial.rows.len())
    }
}

impl std::error::Error for SweepError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

fn cell<S: Scalar>(
    experiment: &Experiment<S>,
    q: f64,
    strategy: Strategy<S>,
    runs: usize,
    base_seed: u64,
) -> Result<SweepRow> {
    if runs == 0 {
        return Err(Error::Usage("runs must be at least 1".into()));
    }
    let records = replicate(experiment, S::lit(q), &strategy, runs, base_seed)?;
    let delays: Vec<f64> = records.iter().map(|m| m.total_stop_delay as f64).collect();
    let stats = aggregate(&delays)?;
    Ok(SweepRow {
        scenario: experiment.scenario.name.clone(),
        q,
        strategy: strategy.name().to_string(),
        alpha: strategy.alpha().map_or(0.0, |a| a.as_f64()),
        runs,
        mean: stats.mean,
        std: stats.std,
        min: stats.min,
        max: stats.max,
        base_seed,
        std_degenerate: stats.degenerate,
    })
}

/// Replicates the coordinated controller for every `alpha` in `alphas`.
pub fn sweep_alpha<S: Scalar>(
    experiment: &Experiment<S>,
    q: f64,
    alphas: &[f64],
    runs: usize,
    base_seed: u64,
) -> Result<SweepResult, SweepError> {
    let mut result = SweepResult::default();
    if alphas.is_empty() {
        return Err(SweepError {
            partial: result,
            source: Error::Usage("alpha grid is empty".into()),
        });
    }
    for &alpha in alphas {
        match cell(experiment, q, Strategy::Hca { alpha: S::lit(alpha) }, runs, base_seed) {
            Ok(row) => result.rows.push(row),
            Err(source) => return Err(SweepError { partial: result, source }),
        }
    }
    Ok(result)
}

/// Back-pressure and the coordinated controller at `alpha`, on the same seeds,
/// for each demand level. Rows alternate backpressure, hca per `q`.
pub fn compare_strategies<S: Scalar>(
    experiment: &Experiment<S>,
    q_list: &[f64],
    alpha: f64,
    runs: usize,
    base_seed: u64,
) -> Result<SweepResult, SweepError> {
    let mut result = SweepResult::default();
    for &q in q_list {
        if !(0.0..=1.0).contains(&q) {
            return Err(SweepError {
                partial: result,
                source: Error::config(format!("q: probability out of range [0, 1]: {q}")),
            });
        }
        for strategy in [Strategy::Backpressure, Strategy::Hca { alpha: S::lit(alpha) }] {
            match cell(experiment, q, strategy, runs, base_seed) {
                Ok(row) => result.rows.push(row),
                Err(source) => return Err(SweepError { partial: result, source }),
            }
        }
    }
    Ok(result)
}

/// Evenly spaced grid `from, from + step, ..., to` (inclusive, to within
/// half a step).
pub fn alpha_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    let valid = step > 0.0 && from >= 0.0 && to >= from && to.is_finite();
    if !valid {
        return Err(Error::Usage(format!(
            "invalid alpha grid from {from} to {to} step {step}"
        )));
    }
    let n = ((to - from) / step + 0.5).floor() as usize;
    // Round to 12 decimals so 0.1 * 3 prints as 0.3.
    Ok((0..=n)
        .map(|i| ((from + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

pub const SWEEP_HEADER: &str =
    "scenario,q,strategy,alpha,runs,mean_delay,std_delay,min_delay,max_delay,base_seed,std_degenerate";

impl SweepResult {
    /// Fixed-precision CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.4},{},{:.4},{},{:.4},{:.4},{:.4},{:.4},{},{}",
                r.scenario,
                r.q,
                r.strategy,
                r.alpha,
                r.runs,
                r.mean,
                r.std,
                r.min,
                r.max,
                r.base_seed,
                r.std_degenerate
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(SWEEP_HEADER) {
            return Err(Error::config("sweep CSV: missing or unexpected header"));
        }
        let mut rows = Vec::new();
        for (idx, line) in lines.enumerate() {
            let bad = |what: &str| Error::config(format!("sweep CSV row {}: invalid {what}", idx + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(bad("column count"));
            }
            let num = |i: usize, what: &str| f[i].parse::<f64>().map_err(|_| bad(what));
            rows.push(SweepRow {
                scenario: f[0].to_string(),
                q: num(1, "q")?,
                strategy: f[2].to_string(),
                alpha: num(3, "alpha")?,
                runs: f[4].parse().map_err(|_| bad("runs"))?,
                mean: num(5, "mean")?,
                std: num(6, "std")?,
                min: num(7, "min")?,
                max: num(8, "max")?,
                base_seed: f[9].parse().map_err(|_| bad("base_seed"))?,
                std_degenerate: f[10].parse().map_err(|_| bad("std_degenerate"))?,
            });
        }
        Ok(SweepResult { rows })
    }
}

/// Back-pressure versus the coordinated controller at one demand level.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub scenario: String,
    pub q: f64,
    pub alpha: f64,
    pub runs: usize,
    pub bp_mean: f64,
    pub bp_std: f64,
    pub hca_mean: f64,
    pub hca_std: f64,
    /// `(bp_mean - hca_mean) / bp_mean`; 0 when both are 0.
    pub reduction: f64,
    pub welch: Welch,
    pub base_seed: u64,
}

pub const COMPARISON_HEADER: &str =
    "scenario,q,alpha,runs,bp_mean,bp_std,hca_mean,hca_std,reduction,welch_t,welch_p,base_seed";

/// Pairs up the rows produced by [`compare_strategies`].
pub fn comparison_rows(result: &SweepResult) -> Vec<ComparisonRow> {
    result
        .rows
        .chunks(2)
        .filter_map(|pair| match pair {
            [bp, hca] if bp.strategy == "backpressure" && hca.strategy == "hca" => {
                let reduction = if bp.mean == 0.0 {
                    0.0
                } else {
                    (bp.mean - hca.mean) / bp.mean
                };
                Some(ComparisonRow {
                    scenario: bp.scenario.clone(),
                    q: bp.q,
                    alpha: hca.alpha,
                    runs: bp.runs,
                    bp_mean: bp.mean,
                    bp_std: bp.std,
                    hca_mean: hca.mean,
                    hca_std: hca.std,
                    reduction,
                    welch: welch(&bp.stats(), &hca.stats()),
                    base_seed: bp.base_seed,
                })
            }
            _ => None,
        })
        .collect()
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.4},{:.4},{},{:.4},{:.4},{:.4},{:.4},{:.6},{:.6},{:.6},{}",
            r.scenario,
            r.q,
            r.alpha,
            r.runs,
            r.bp_mean,
            r.bp_std,
            r.hca_mean,
            r.hca_std,
            r.reduction,
            r.welch.t,
            r.welch.p,
            r.base_seed
        );
    }
    out
}

/// Mean of the per-q reductions.
pub fn mean_reduction(rows: &[ComparisonRow]) -> f64 {
    rows.iter().map(|r| r.reduction).sum::<f64>() / rows.len().max(1) as f64
}

/// Companion file recording what produced a CSV.
pub fn meta_text(command: &str, settings: &Settings, digest: &str, runs: usize, base_seed: u64) -> String {
    format!(
        "command={command}\nversion={}\nscenario={}\nconfig_digest={digest}\nruns={runs}\nbase_seed={base_seed}\nseeds={}..{}\nv_max={}\np={}\nhorizon={}\nmin_green={}\ndelay_window={}\n",
        env!("CARGO_PKG_VERSION"),
        settings.scenario.name(),
        base_seed,
        base_seed + runs.saturating_sub(1) as u64,
        settings.v_max,
        settings.p,
        settings.horizon,
        settings.min_green,
        settings.delay_window.map_or("none".to_string(), |w| w.to_string()),
    )
}

pub fn write_with_meta(path: &Path, csv: &str, meta: &str) -> Result<()> {
    std::fs::write(path, csv).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    let mut meta_path = path.as_os_str().to_owned();
    meta_path.push(".meta");
    std::fs::write(&meta_path, meta).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_grid() -> Experiment<f64> {
        Experiment {
            scenario: Scenario::grid(2, 20, 2).unwrap(),
            v_max: 2,
            p: 0.2,
            horizon: 300,
            min_green: 0,
            delay_window: None,
            jobs: 2,
        }
    }

    #[test]
    fn aggregate_examples() {
        let s = aggregate(&[10.0]).unwrap();
        assert_eq!((s.mean, s.std, s.min, s.max, s.degenerate), (10.0, 0.0, 10.0, 10.0, true));
        let s = aggregate(&[2.0, 4.0]).unwrap();
        assert_eq!((s.mean, s.min, s.max), (3.0, 2.0, 4.0));
        assert!((s.std - 2f64.sqrt()).abs() < 1e-12);
        assert!(!s.degenerate);
        assert!(matches!(aggregate(&[]), Err(Error::Usage(_))));
    }

    /// Welford's streaming update, independent of the two-pass formula.
    fn streaming(values: &[f64]) -> (f64, f64) {
        let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
        for &x in values {
            n += 1.0;
            let d = x - mean;
            mean += d / n;
            m2 += d * (x - mean);
        }
        (mean, (m2 / (n - 1.0)).sqrt())
    }

    #[test]
    fn aggregate_matches_streaming_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let values: Vec<f64> = (0..1000).map(|_| 5000.0 + 800.0 * rng.gen::<f64>()).collect();
        let s = aggregate(&values).unwrap();
        let (mean, std) = streaming(&values);
        assert!(((s.mean - mean) / mean).abs() < 1e-9);
        assert!(((s.std - std) / std).abs() < 1e-9);
    }

    #[test]
    fn welch_against_hand_computation() {
        // a = {1,2,3,4}, b = {2,4,6,8}: se^2 = 5/12 + 20/12, t = -2.5 / sqrt(25/12)
        let a = aggregate(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = aggregate(&[2.0, 4.0, 6.0, 8.0]).unwrap();
        let w = welch(&a, &b);
        assert!((w.t - (-2.5 / (25.0f64 / 12.0).sqrt())).abs() < 1e-12);
        // df = (25/12)^2 / ((5/12)^2/3 + (20/12)^2/3) = 625*3 / 425
        assert!((w.df - 1875.0 / 425.0).abs() < 1e-12);
        assert!(w.p > 0.05 && w.p < 0.2, "{w:?}");
        let same = welch(&a, &a);
        assert_eq!((same.t, same.p), (0.0, 1.0));
    }

    #[test]
    fn alpha_grid_has_expected_points() {
        let g = alpha_grid(0.0, 2.0, 0.1).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[3], 0.3);
        assert_eq!(g[20], 2.0);
        assert_eq!(alpha_grid(0.0, 0.0, 0.1).unwrap(), vec![0.0]);
        assert!(alpha_grid(1.0, 0.0, 0.1).is_err());
        assert!(alpha_grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn single_zero_alpha_sweep_is_one_backpressure_run() {
        let exp = small_grid();
        let sweep = sweep_alpha(&exp, 0.1, &[0.0], 1, 7).unwrap();
        assert_eq!(sweep.rows.len(), 1);
        let row = &sweep.rows[0];
        let direct = run(exp.config(0.1, Strategy::Backpressure, 7)).unwrap();
        assert_eq!(row.mean, direct.total_stop_delay as f64);
        assert!(row.std_degenerate);
    }

    #[test]
    fn zero_alpha_comparison_has_no_reduction() {
        let exp = small_grid();
        let result = compare_strategies(&exp, &[0.1, 0.2], 0.0, 3, 11).unwrap();
        let rows = comparison_rows(&result);
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert_eq!(r.bp_mean, r.hca_mean);
            assert_eq!(r.reduction, 0.0);
        }
    }

    #[test]
    fn paired_seeds_share_arrivals() {
        let exp = small_grid();
        let bp = replicate(&exp, 0.2, &Strategy::Backpressure, 4, 30).unwrap();
        let hca = replicate(&exp, 0.2, &Strategy::Hca { alpha: 1.5 }, 4, 30).unwrap();
        for (a, b) in bp.iter().zip(&hca) {
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.vehicles_arrived, b.vehicles_arrived);
        }
    }

    #[test]
    fn sweep_is_reproducible_and_thread_count_independent() {
        let mut exp = small_grid();
        let a = sweep_alpha(&exp, 0.15, &[0.0, 1.0], 4, 5).unwrap();
        exp.jobs = 1;
        let b = sweep_alpha(&exp, 0.15, &[0.0, 1.0], 4, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn failing_sweep_keeps_partial_rows() {
        let exp = small_grid();
        let err = sweep_alpha(&exp, 0.1, &[0.0, -1.0], 1, 1).unwrap_err();
        assert_eq!(err.partial.rows.len(), 1);
        assert!(matches!(err.source, Error::Config(_)));
        let err = compare_strategies(&exp, &[0.1, 1.5], 1.0, 1, 1).unwrap_err();
        assert_eq!(err.partial.rows.len(), 2);
    }

    #[test]
    fn csv_parse_emit_parse_is_stable() {
        let exp = small_grid();
        let result = sweep_alpha(&exp, 0.1, &[0.0, 0.5], 3, 2).unwrap();
        let text = result.to_csv();
        let parsed = SweepResult::from_csv(&text).unwrap();
        assert_eq!(parsed.to_csv(), text);
        assert_eq!(SweepResult::from_csv(&parsed.to_csv()).unwrap(), parsed);
        assert_eq!(parsed.rows.len(), 2);
        assert!(SweepResult::from_csv("nope\n").is_err());
    }
}
