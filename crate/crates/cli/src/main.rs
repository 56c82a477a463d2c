use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use jamfront::evaluation::{
    run_experiment, summarize, sweep, write_run_outputs, write_summary, write_sweep_rows, EstimatorKind,
};
use jamfront::microsim::{simulate, SimOptions};
use jamfront::probe::CommMode;
use jamfront::scenario::{load_boundary_series, load_scenario};

#[derive(Parser)]
#[command(name = "jamfront", version, about = "Jam-front estimation experiments on a simulated freeway")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and evaluate both estimators.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the scenario's rng_seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write the full trajectory (large).
        #[arg(long)]
        trajectory: bool,
    },
    /// Evaluate every combination of probe fraction, seed and mode.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated probe fractions, e.g. 0.003,0.012.
        #[arg(long, default_value = "")]
        fractions: String,
        /// A range `a..b` (inclusive) or a comma-separated list.
        #[arg(long, default_value = "1..10")]
        seeds: String,
        #[arg(long, value_delimiter = ',', default_value = "gsm,wlan")]
        modes: Vec<CommMode>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().with_context(|| format!("bad seed range `{s}`"))?;
        let b: u64 = b.trim_start_matches('=').trim().parse().with_context(|| format!("bad seed range `{s}`"))?;
        if b < a {
            bail!("empty seed range `{s}`");
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|x| x.trim().parse::<u64>().with_context(|| format!("bad seed `{x}`"))).collect()
}

fn parse_fractions(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<f64>().with_context(|| format!("bad fraction `{x}`")))
        .collect()
}

fn run(config: &Path, seed: Option<u64>, out: &Path, trajectory: bool) -> Result<()> {
    let mut config = load_scenario(config)?;
    if let Some(seed) = seed {
        config.rng_seed = seed;
    }
    let series = load_boundary_series(&config.boundary_path)?;
    let result = run_experiment(&config, &series)?;
    write_run_outputs(&result, out).with_context(|| format!("writing to {}", out.display()))?;
    if trajectory {
        let mut w = BufWriter::new(File::create(out.join("trajectory.csv"))?);
        let mut options = SimOptions::for_fraction(0.0);
        options.trajectory_out = Some(&mut w);
        simulate(&config, &series, options)?;
        w.flush()?;
    }

    let o = &result.output;
    let a = &result.analysis;
    println!(
        "seed {}: {} vehicles injected, {} exited, {} probes, {} records, {} crossing events",
        config.rng_seed,
        o.injected,
        o.exited,
        a.feed.records().iter().map(|r| r.probe_id).collect::<std::collections::BTreeSet<_>>().len(),
        a.feed.len(),
        a.events.len()
    );
    if let Some(d) = a.feed.max_delay() {
        println!("max delivery delay {d:.0} s ({})", a.mode);
    }
    for kind in EstimatorKind::ALL {
        let s = a.score(kind);
        match s.stats {
            Some(st) => println!(
                "{kind}: mean {:.1} m, std {:.1} m over {} ticks ({} degraded)",
                st.mean, st.std, st.n, st.excluded
            ),
            None => println!("{kind}: no estimate ({} degraded ticks)", s.excluded),
        }
    }
    Ok(())
}

fn run_sweep(config: &Path, fractions: &str, seeds: &str, modes: &[CommMode], out: &Path) -> Result<()> {
    let config = load_scenario(config)?;
    let series = load_boundary_series(&config.boundary_path)?;
    let fractions = parse_fractions(fractions)?;
    let seeds = parse_seeds(seeds)?;
    let rows = sweep(&config, &series, &fractions, &seeds, modes)?;
    fs::create_dir_all(out)?;
    let mut w = BufWriter::new(File::create(out.join("sweep.csv"))?);
    write_sweep_rows(&mut w, &rows)?;
    w.flush()?;
    let summary = summarize(&rows);
    let mut w = BufWriter::new(File::create(out.join("sweep_summary.csv"))?);
    write_summary(&mut w, &summary)?;
    w.flush()?;
    for s in &summary {
        println!(
            "{:>6.3}% {:4} {:10} mean {:8.1} ± {:6.1} m  std {:7.1} ± {:6.1} m  ({} seeds)",
            100.0 * s.fraction,
            s.mode.label(),
            s.estimator,
            s.mean_of_mean,
            s.std_of_mean,
            s.mean_of_std,
            s.std_of_std,
            s.seeds
        );
    }
    let failed = rows.iter().filter(|r| matches!(r.outcome, jamfront::evaluation::RowOutcome::Failed(_))).count();
    if failed > 0 {
        eprintln!("{failed} rows failed; see sweep.csv");
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, out, trajectory } => run(&config, seed, &out, trajectory),
        Command::Sweep { config, fractions, seeds, modes, out } => run_sweep(&config, &fractions, &seeds, &modes, &out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("1..=2").unwrap(), vec![1, 2]);
        assert_eq!(parse_seeds("4,9").unwrap(), vec![4, 9]);
        assert!(parse_seeds("").unwrap().is_empty());
        assert!(parse_seeds("5..1").is_err());
    }

    #[test]
    fn fraction_lists() {
        assert_eq!(parse_fractions("0.003, 0.012").unwrap(), vec![0.003, 0.012]);
        assert!(parse_fractions("").unwrap().is_empty());
        assert!(parse_fractions("1%").is_err());
    }
}
