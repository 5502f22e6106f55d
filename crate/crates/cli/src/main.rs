use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use asymdelay::detection::{cusum_drift, score, threshold_monitor, write_alarms_csv, AlarmKind};
use asymdelay::harness::scenario::MAX_GAP_FRACTION;
use asymdelay::harness::{builtin, builtin_names, reproduce, run_campaign, validate_scenario, Mode, Overrides, Scenario};
use asymdelay::photon_sim::RoundTripSim;
use asymdelay::stability_metrics::{default_m_grid, tdev};
use asymdelay::timing_estimator::ClockDifferenceSeries;
use asymdelay::{CusumConfig, DelayTrajectory, Error, Result, ThresholdConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "asymdelay", version, about = "Asymmetric-delay attack campaigns on round-trip clock synchronization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    FullSim,
    Analytic,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::FullSim => Mode::FullSim,
            ModeArg::Analytic => Mode::Analytic,
        }
    }
}

#[derive(Args)]
struct RunFlags {
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the execution mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Override the epoch length in seconds.
    #[arg(long)]
    epoch_s: Option<f64>,
}

impl RunFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            mode: self.mode.map(Mode::from),
            epoch_s: self.epoch_s,
        }
    }
}

#[derive(Args)]
struct ScenarioSource {
    /// Scenario JSON file.
    #[arg(required_unless_present = "builtin", conflicts_with = "builtin")]
    scenario: Option<PathBuf>,
    /// Name of a built-in scenario instead of a file.
    #[arg(long)]
    builtin: Option<String>,
}

impl ScenarioSource {
    fn load(&self) -> Result<Scenario> {
        match (&self.builtin, &self.scenario) {
            (Some(name), _) => builtin(name),
            (None, Some(path)) => Scenario::load(path),
            (None, None) => Err(Error::config("scenario", "give a scenario file or --builtin")),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write series.csv, tdev.csv, alarms.csv and meta.json.
    Run {
        #[command(flatten)]
        source: ScenarioSource,
        #[command(flatten)]
        flags: RunFlags,
        /// Output directory (default: runs/<scenario name>).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the scenario bundle of one reference figure (fig2, fig3, fig4, fig5).
    Reproduce {
        figure: String,
        #[command(flatten)]
        flags: RunFlags,
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
    },
    /// Check scenario files against the schema without running them.
    Validate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Recompute TDEV from a series CSV.
    Tdev {
        series: PathBuf,
        /// Sample spacing; defaults to the spacing found in the file.
        #[arg(long)]
        epoch_s: Option<f64>,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply the threshold monitor and CUSUM to a series CSV.
    Detect {
        series: PathBuf,
        #[arg(long, default_value_t = 200.0)]
        threshold_ps: f64,
        #[arg(long, default_value_t = 60)]
        baseline_window: usize,
        /// CUSUM reference drift per epoch.
        #[arg(long, default_value_t = 0.05)]
        cusum_k_ps: f64,
        /// CUSUM decision limit.
        #[arg(long, default_value_t = 20.0)]
        cusum_h_ps: f64,
        /// Known attack onset; prints a score to stderr.
        #[arg(long)]
        onset_s: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List built-in scenarios, or print one as JSON.
    Builtins { name: Option<String> },
    /// Dump the raw timestamp stream of a scenario.
    Simulate {
        #[command(flatten)]
        source: ScenarioSource,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "bin")]
        format: StreamFormat,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StreamFormat {
    Bin,
    Csv,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_series(path: &Path) -> Result<ClockDifferenceSeries> {
    let s = ClockDifferenceSeries::read_csv(BufReader::new(File::open(path)?))?;
    if s.points().next().is_none() {
        return Err(Error::EmptySeries);
    }
    if s.gap_fraction() > MAX_GAP_FRACTION {
        return Err(Error::Gaps {
            gaps: s.gap_count(),
            total: s.len(),
        });
    }
    Ok(s)
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { source, flags, out_dir } => {
            let mut s = source.load()?;
            flags.overrides().apply(&mut s);
            let out = out_dir.unwrap_or_else(|| Path::new("runs").join(&s.name));
            let r = run_campaign(&s)?;
            r.write_outputs(&out)?;
            eprintln!(
                "{}: {} epochs ({} gaps), {} alarms, wrote {}",
                s.name,
                r.series.len(),
                r.meta.gap_epochs,
                r.alarms.len(),
                out.display()
            );
        }
        Command::Reproduce { figure, flags, out_dir } => {
            let results = reproduce(&figure, &out_dir, &flags.overrides())?;
            for r in &results {
                eprintln!("{}: {} epochs", r.meta.scenario_name, r.series.len());
            }
            eprintln!("wrote {}", out_dir.join(&figure).display());
        }
        Command::Validate { scenarios } => {
            let mut bad = 0;
            for path in &scenarios {
                let problems = validate_scenario(path)?;
                if problems.is_empty() {
                    println!("{}: ok", path.display());
                } else {
                    bad += 1;
                    for p in problems {
                        println!("{}: {p}", path.display());
                    }
                }
            }
            if bad > 0 {
                return Err(Error::Schema(Vec::new()));
            }
        }
        Command::Tdev { series, epoch_s, out } => {
            let s = read_series(&series)?;
            let phase: Vec<f64> = s.points().map(|p| p.delta_ps).collect();
            let tau0 = epoch_s.unwrap_or(s.epoch_length_s);
            let curve = tdev(&phase, tau0, &default_m_grid(phase.len()))?;
            curve.write_csv(output(&out)?)?;
        }
        Command::Detect {
            series,
            threshold_ps,
            baseline_window,
            cusum_k_ps,
            cusum_h_ps,
            onset_s,
            out,
        } => {
            let s = read_series(&series)?;
            let samples = s.delta_samples();
            let mut alarms = threshold_monitor(&samples, &ThresholdConfig::new(baseline_window, threshold_ps))?;
            let cusum = CusumConfig {
                reference_drift_ps: cusum_k_ps,
                decision_limit_ps: cusum_h_ps,
            };
            alarms.extend(cusum_drift(&samples, &cusum)?);
            alarms.sort_by(|a, b| a.epoch_start_s.total_cmp(&b.epoch_start_s));
            write_alarms_csv(&alarms, output(&out)?)?;
            if let Some(onset) = onset_s {
                let span = (0.0, samples.last().map_or(0.0, |p| p.0));
                for kind in [AlarmKind::Threshold, AlarmKind::Drift] {
                    let of: Vec<_> = alarms.iter().filter(|a| a.kind == kind).copied().collect();
                    let sc = score(&of, onset, span);
                    eprintln!(
                        "{}: detected={} latency_s={} false_alarms={}",
                        kind.name(),
                        sc.detected,
                        sc.latency_s.map_or("-".to_string(), |l| l.to_string()),
                        sc.false_alarms
                    );
                }
            }
        }
        Command::Builtins { name } => match name {
            Some(n) => println!("{}", builtin(&n)?.to_json()),
            None => builtin_names().iter().for_each(|n| println!("{n}")),
        },
        Command::Simulate {
            source,
            seed,
            out,
            format,
        } => {
            let mut s = source.load()?;
            if let Some(seed) = seed {
                s.run.seed = seed;
            }
            s.validate()?;
            let explicit_n = s.n_events.clone().map(DelayTrajectory::new);
            let sim = RoundTripSim::new(
                s.photon_setup(),
                s.m_trajectory(),
                &s.coordination,
                explicit_n.as_ref(),
                s.run.duration_s,
                s.run.epoch_s,
                s.run.seed,
            )?;
            let stream = sim.run();
            let w = BufWriter::new(File::create(&out)?);
            match format {
                StreamFormat::Bin => stream.write_binary(w)?,
                StreamFormat::Csv => stream.write_csv(w)?,
            }
            eprintln!("{} detections written to {}", stream.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(&e, Error::Schema(p) if p.is_empty()) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
