use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::experiment::ExperimentResult;
use super::sweep::{SweepRow, SweepSummary};
use crate::estimation::FrontEstimate;
use crate::groundtruth::FrontTruth;
use crate::microsim::DetectorSeries;
use crate::probe::FcdFeed;

pub const DETECTOR_HEADER: &str = "t_start_s,detector,flow_vehph,count";
pub const FCD_HEADER: &str = "probe_id,t_record_s,x_m,v_mps,t_available_s";
pub const TRUTH_HEADER: &str = "t_s,x_up_m,x_down_m";
pub const ESTIMATE_HEADER: &str = "t_s,x_up_est_m,x_down_est_m,n_points_or_resets,degraded_flag";
pub const SWEEP_HEADER: &str = "fraction,seed,mode,estimator,mean_m,std_m,n,excluded_bins";
pub const SUMMARY_HEADER: &str = "fraction,mode,estimator,seeds,mean_of_mean_m,std_of_mean_m,mean_of_std_m,std_of_std_m";

/// Shortest round-trip decimal, with `nan`, `inf` and `-inf` spelled out.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x}")
    }
}

fn opt(x: Option<f64>) -> String {
    num(x.unwrap_or(f64::NAN))
}

pub fn write_detectors(w: &mut impl Write, up: &DetectorSeries, down: &DetectorSeries) -> io::Result<()> {
    writeln!(w, "{DETECTOR_HEADER}")?;
    for (name, series) in [("up", up), ("down", down)] {
        for s in &series.samples {
            writeln!(w, "{},{name},{},{}", num(s.interval_start), num(s.flow), s.count)?;
        }
    }
    Ok(())
}

/// Records ordered by probe, then record time.
pub fn write_fcd(w: &mut impl Write, feed: &FcdFeed) -> io::Result<()> {
    writeln!(w, "{FCD_HEADER}")?;
    let mut records = feed.records().to_vec();
    records.sort_by(|a, b| a.probe_id.cmp(&b.probe_id).then(a.t_record.total_cmp(&b.t_record)));
    for r in records {
        writeln!(w, "{},{},{},{},{}", r.probe_id, num(r.t_record), num(r.x), num(r.v), num(r.t_available))?;
    }
    Ok(())
}

pub fn write_truth(w: &mut impl Write, truth: &FrontTruth) -> io::Result<()> {
    writeln!(w, "{TRUTH_HEADER}")?;
    for s in &truth.samples {
        writeln!(w, "{},{},{}", num(s.t), opt(s.x_up), opt(s.x_down))?;
    }
    Ok(())
}

pub fn write_estimates(w: &mut impl Write, estimates: &[FrontEstimate]) -> io::Result<()> {
    writeln!(w, "{ESTIMATE_HEADER}")?;
    for e in estimates {
        writeln!(w, "{},{},{},{},{}", num(e.t), opt(e.x_up), opt(e.x_down), e.n_points_or_resets, u8::from(e.degraded))?;
    }
    Ok(())
}

pub fn write_sweep_rows(w: &mut impl Write, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.to_csv())?;
    }
    Ok(())
}

pub fn write_summary(w: &mut impl Write, rows: &[SweepSummary]) -> io::Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for s in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            num(s.fraction),
            s.mode.label(),
            s.estimator,
            s.seeds,
            num(s.mean_of_mean),
            num(s.std_of_mean),
            num(s.mean_of_std),
            num(s.std_of_std)
        )?;
    }
    Ok(())
}

fn create(dir: &Path, name: &str) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes the per-run CSV files into `dir` (created if missing).
pub fn write_run_outputs(result: &ExperimentResult, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let a = &result.analysis;
    let mut w = create(dir, "detectors.csv")?;
    write_detectors(&mut w, &result.detectors.0, &result.detectors.1)?;
    w.flush()?;
    let mut w = create(dir, "fcd.csv")?;
    write_fcd(&mut w, &a.feed)?;
    w.flush()?;
    let mut w = create(dir, "fronts_truth.csv")?;
    write_truth(&mut w, &result.truth)?;
    w.flush()?;
    let mut w = create(dir, "estimate_regression.csv")?;
    write_estimates(&mut w, &a.regression)?;
    w.flush()?;
    let mut w = create(dir, "estimate_model.csv")?;
    write_estimates(&mut w, &a.model)?;
    w.flush()?;
    let rows = SweepRow::from_analysis(a, result.config.rng_seed);
    let mut w = create(dir, "stats.csv")?;
    write_sweep_rows(&mut w, &rows)?;
    w.flush()
}
