use std::collections::BTreeMap;

use rayon::prelude::*;

use super::experiment::{analyze, Analysis, EstimatorKind};
use super::output::num;
use super::stats::{mean_std, FrontErrorStats};
use super::EvalError;
use crate::groundtruth::extract_fronts;
use crate::microsim::{simulate, SimOptions};
use crate::probe::CommMode;
use crate::scenario::{FlowSeries, ScenarioConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum RowOutcome {
    Stats(FrontErrorStats),
    /// No tick had a usable estimate.
    NoEstimate { excluded: usize },
    /// The run itself failed.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub fraction: f64,
    pub seed: u64,
    pub mode: CommMode,
    pub estimator: EstimatorKind,
    pub outcome: RowOutcome,
}

impl SweepRow {
    pub fn from_analysis(a: &Analysis, seed: u64) -> Vec<SweepRow> {
        a.scores
            .iter()
            .map(|s| SweepRow {
                fraction: a.fraction,
                seed,
                mode: a.mode,
                estimator: s.kind,
                outcome: match s.stats {
                    Some(st) => RowOutcome::Stats(st),
                    None => RowOutcome::NoEstimate { excluded: s.excluded },
                },
            })
            .collect()
    }

    pub fn stats(&self) -> Option<&FrontErrorStats> {
        match &self.outcome {
            RowOutcome::Stats(s) => Some(s),
            _ => None,
        }
    }

    /// One line of the sweep table. Runs without estimate write `nan`;
    /// failed runs write `failed` in both statistic columns.
    pub fn to_csv(&self) -> String {
        let (mean, std, n, excluded) = match &self.outcome {
            RowOutcome::Stats(s) => (num(s.mean), num(s.std), s.n, s.excluded),
            RowOutcome::NoEstimate { excluded } => ("nan".into(), "nan".into(), 0, *excluded),
            RowOutcome::Failed(_) => ("failed".into(), "failed".into(), 0, 0),
        };
        format!(
            "{},{},{},{},{mean},{std},{n},{excluded}",
            num(self.fraction),
            self.seed,
            self.mode.label(),
            self.estimator
        )
    }

    fn key(&self) -> (u64, u64, CommMode, EstimatorKind) {
        (self.fraction.to_bits(), self.seed, self.mode, self.estimator)
    }
}

fn failed_rows(fractions: &[f64], seed: u64, modes: &[CommMode], msg: &str) -> Vec<SweepRow> {
    let mut out = Vec::new();
    for &fraction in fractions {
        for &mode in modes {
            for estimator in EstimatorKind::ALL {
                out.push(SweepRow { fraction, seed, mode, estimator, outcome: RowOutcome::Failed(msg.to_owned()) });
            }
        }
    }
    out
}

fn run_seed(
    base: &ScenarioConfig,
    series: &FlowSeries,
    fractions: &[f64],
    seed: u64,
    modes: &[CommMode],
) -> Vec<SweepRow> {
    let mut config = base.clone();
    config.rng_seed = seed;
    let cap = fractions.iter().copied().fold(0.0, f64::max);
    let output = match simulate(&config, series, SimOptions::for_fraction(cap)) {
        Ok(o) => o,
        Err(e) => return failed_rows(fractions, seed, modes, &e.to_string()),
    };
    let truth = extract_fronts(&output.speed_field, config.speed_threshold);
    let detectors = output.detector_series(&config);
    let mut out = Vec::new();
    for &fraction in fractions {
        for &mode in modes {
            match analyze(&config, &output, &truth, &detectors, fraction, mode) {
                Ok(a) => out.extend(SweepRow::from_analysis(&a, seed)),
                Err(e) => out.extend(failed_rows(&[fraction], seed, &[mode], &e.to_string())),
            }
        }
    }
    out
}

/// Runs every (fraction, seed, mode) combination. Each seed is simulated
/// once with every fraction's probes recorded; probe sets are nested across
/// fractions. Rows come back sorted by (fraction, seed, mode, estimator)
/// whatever the execution order.
pub fn sweep(
    base: &ScenarioConfig,
    series: &FlowSeries,
    fractions: &[f64],
    seeds: &[u64],
    modes: &[CommMode],
) -> Result<Vec<SweepRow>, EvalError> {
    base.validate()?;
    if let Some(bad) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(EvalError::InvalidSweep(format!("fraction {bad} outside [0, 1]")));
    }
    if fractions.is_empty() || seeds.is_empty() || modes.is_empty() {
        return Ok(Vec::new());
    }
    let mut rows: Vec<SweepRow> =
        seeds.par_iter().flat_map_iter(|&seed| run_seed(base, series, fractions, seed, modes)).collect();
    rows.sort_by(|a, b| {
        a.fraction.total_cmp(&b.fraction).then_with(|| (a.seed, a.mode, a.estimator).cmp(&(b.seed, b.mode, b.estimator)))
    });
    rows.dedup_by_key(|r| r.key());
    Ok(rows)
}

/// Across-seed statistics of one (fraction, mode, estimator) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub fraction: f64,
    pub mode: CommMode,
    pub estimator: EstimatorKind,
    /// Seeds that produced statistics.
    pub seeds: usize,
    pub mean_of_mean: f64,
    pub std_of_mean: f64,
    pub mean_of_std: f64,
    pub std_of_std: f64,
}

pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut cells: BTreeMap<(u64, CommMode, EstimatorKind), (f64, Vec<FrontErrorStats>)> = BTreeMap::new();
    for r in rows {
        let cell = cells.entry((r.fraction.to_bits(), r.mode, r.estimator)).or_insert((r.fraction, Vec::new()));
        if let Some(s) = r.stats() {
            cell.1.push(*s);
        }
    }
    let mut out: Vec<SweepSummary> = cells
        .into_iter()
        .map(|((_, mode, estimator), (fraction, stats))| {
            let (mean_of_mean, std_of_mean) = mean_std(stats.iter().map(|s| s.mean));
            let (mean_of_std, std_of_std) = mean_std(stats.iter().map(|s| s.std));
            SweepSummary { fraction, mode, estimator, seeds: stats.len(), mean_of_mean, std_of_mean, mean_of_std, std_of_std }
        })
        .collect();
    out.sort_by(|a, b| a.fraction.total_cmp(&b.fraction).then_with(|| (a.mode, a.estimator).cmp(&(b.mode, b.estimator))));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(fraction: f64, seed: u64, mean: f64, std: f64) -> SweepRow {
        SweepRow {
            fraction,
            seed,
            mode: CommMode::Instantaneous,
            estimator: EstimatorKind::Regression,
            outcome: RowOutcome::Stats(FrontErrorStats { mean, std, n: 10, excluded: 0 }),
        }
    }

    #[test]
    fn summary_over_seeds() {
        let mut rows = vec![row(0.01, 1, 100.0, 300.0), row(0.01, 2, -100.0, 500.0), row(0.02, 1, 0.0, 0.0)];
        rows.push(SweepRow { outcome: RowOutcome::NoEstimate { excluded: 3 }, ..row(0.01, 3, 0.0, 0.0) });
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].seeds, 2);
        assert_eq!((s[0].mean_of_mean, s[0].std_of_mean), (0.0, 100.0));
        assert_eq!((s[0].mean_of_std, s[0].std_of_std), (400.0, 100.0));
    }

    #[test]
    fn csv_rows() {
        assert_eq!(row(0.012, 3, -36.5, 400.0).to_csv(), "0.012,3,gsm,regression,-36.5,400,10,0");
        let r = SweepRow { outcome: RowOutcome::NoEstimate { excluded: 7 }, ..row(0.0, 1, 0.0, 0.0) };
        assert_eq!(r.to_csv(), "0,1,gsm,regression,nan,nan,0,7");
        let r = SweepRow { outcome: RowOutcome::Failed("x".into()), ..row(0.0, 1, 0.0, 0.0) };
        assert_eq!(r.to_csv(), "0,1,gsm,regression,failed,failed,0,0");
    }

    #[test]
    fn empty_fraction_list() {
        let base = ScenarioConfig::with_boundary("unused.csv");
        let series = FlowSeries::constant(1000.0, 0.1).unwrap();
        assert!(sweep(&base, &series, &[], &[1, 2], &CommMode::ALL).unwrap().is_empty());
    }
}
