use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use splinewalk::experiments::*;
use splinewalk::netgen::DistributionSpec;
use splinewalk::Error;

#[derive(Parser, Debug)]
#[command(name = "splinewalk", version, about = "Monte Carlo experiments on random ReLU networks as linear splines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// CSV output path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON summary output path.
    #[arg(long, global = true)]
    summary: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "SPLINEWALK_THREADS")]
    threads: Option<usize>,
    /// Omit the timestamp from the CSV header.
    #[arg(long, global = true, default_value_t = true, action = clap::ArgAction::Set)]
    deterministic: bool,
}

fn window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let p = |v: &str| {
        let v = v.trim();
        match v {
            "inf" | "+inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => v.parse::<f64>().map_err(|e| format!("`{v}`: {e}")),
        }
    };
    Ok((p(a)?, p(b)?))
}

fn dist(s: &str) -> Result<DistributionSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Knot counts of deep networks.
    Knots {
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3, 4])]
        layers: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [10usize, 20, 40, 80])]
        width: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, value_parser = dist, default_value = "uniform")]
        dist: DistributionSpec,
    },
    /// Mean root counts for eighteen distribution combinations.
    RootsTable {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        trials: u64,
        /// 1-based rows to run; all when absent.
        #[arg(long, value_delimiter = ',')]
        rows: Vec<usize>,
    },
    /// Mean zero crossings of homogeneous walks against the step count.
    Crossings {
        #[arg(long, default_value_t = 4)]
        min_steps: usize,
        #[arg(long, default_value_t = 16384)]
        max_steps: usize,
        #[arg(long, default_value_t = 2000)]
        trials: u64,
        #[arg(long, value_parser = window, default_value = "16,inf")]
        window_fixed: (f64, f64),
        #[arg(long, value_parser = window, default_value = "4,inf")]
        window_knots: (f64, f64),
    },
    /// Exit-time survival, pre-crossing magnitudes and crossing-count PMF.
    Survival {
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, value_parser = window, default_value = "100,10000")]
        survival_window: (f64, f64),
        #[arg(long, value_parser = window, default_value = "0.001,0.3")]
        abs_y_window: (f64, f64),
        #[arg(long, value_parser = window, default_value = "0.03,1")]
        abs_y_prime_window: (f64, f64),
        #[arg(long, value_parser = window, default_value = "4,14")]
        pmf_window: (f64, f64),
    },
    /// Mean roots as c0 or c1 is scaled.
    Fudge(FudgeArgs),
    /// Mean roots as c0 or c1 is scaled with the other set to zero.
    FudgeZeroed(FudgeArgs),
    /// Walk variance per Cauchy quantile cell.
    Variance {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        trials: u64,
        #[arg(long, value_parser = window, default_value = "2,200")]
        left_window: (f64, f64),
        #[arg(long, value_parser = window, default_value = "2,200")]
        right_window: (f64, f64),
        #[arg(long, value_parser = window, default_value = "-1,1")]
        central_window: (f64, f64),
    },
    /// Correlation of walk values at shifted points.
    Correlation {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 2000)]
        trials: u64,
    },
    /// Bias-gradient distribution per layer of zero-bias networks.
    GradientDist {
        #[arg(long, value_delimiter = ',', default_values_t = [32usize, 32, 32, 32])]
        widths: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0])]
        xs: Vec<f64>,
        #[arg(long, value_parser = dist, default_value = "normal")]
        weights: DistributionSpec,
    },
    /// Medians of sample minima against closed forms.
    OrderStats {
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 10, 100, 1000, 10000])]
        sizes: Vec<u64>,
        #[arg(long, default_value_t = 2000)]
        trials: u64,
    },
    /// Networks split into walk and line, with root cross-checks.
    Decomposition {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        trials: u64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Walk values at the knots against direct evaluation.
    EquivalenceCheck {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: u64,
    },
}

#[derive(Args, Debug)]
struct FudgeArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 2000)]
    trials: u64,
    /// Scale factors; `0` and `2^k` for `k = -20..=20` when absent.
    #[arg(long, value_delimiter = ',')]
    factors: Vec<f64>,
}

impl FudgeArgs {
    fn spec(self, zero_other: bool) -> FudgeSpec {
        let d = FudgeSpec::default();
        FudgeSpec {
            n: self.n,
            trials: self.trials,
            factors: if self.factors.is_empty() { d.factors } else { self.factors },
            zero_other,
        }
    }
}

fn recipe(cmd: Command) -> Recipe {
    match cmd {
        Command::Knots { layers, width, trials, dist } => Recipe::Knots(KnotsSpec {
            layers,
            widths: width,
            trials,
            dist,
        }),
        Command::RootsTable { n, trials, rows } => Recipe::RootsTable(RootsTableSpec {
            n,
            trials,
            rows: if rows.is_empty() { RootsTableSpec::default().rows } else { rows },
        }),
        Command::Crossings {
            min_steps,
            max_steps,
            trials,
            window_fixed,
            window_knots,
        } => Recipe::Crossings(CrossingsSpec {
            min_steps,
            max_steps,
            trials,
            window_fixed,
            window_knots,
        }),
        Command::Survival {
            steps,
            trials,
            survival_window,
            abs_y_window,
            abs_y_prime_window,
            pmf_window,
        } => Recipe::Survival(SurvivalSpec {
            steps,
            trials,
            survival_window,
            abs_y_window,
            abs_y_prime_window,
            pmf_window,
        }),
        Command::Fudge(a) => Recipe::Fudge(a.spec(false)),
        Command::FudgeZeroed(a) => Recipe::FudgeZeroed(a.spec(true)),
        Command::Variance {
            n,
            trials,
            left_window,
            right_window,
            central_window,
        } => Recipe::Variance(VarianceSpec {
            n,
            trials,
            left_window,
            right_window,
            central_window,
        }),
        Command::Correlation { n, trials } => Recipe::Correlation(CorrelationSpec { n, trials }),
        Command::GradientDist {
            widths,
            trials,
            xs,
            weights,
        } => Recipe::GradientDist(GradientSpec {
            widths,
            trials,
            xs,
            weights,
        }),
        Command::OrderStats { sizes, trials } => Recipe::OrderStats(OrderStatsSpec { sizes, trials }),
        Command::Decomposition { n, trials, samples } => {
            Recipe::Decomposition(DecompositionSpec { n, trials, samples })
        }
        Command::EquivalenceCheck { n, trials } => Recipe::EquivalenceCheck(EquivalenceSpec { n, trials }),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> splinewalk::Result<()> {
    let c = cli.common;
    if let Some(t) = c.threads {
        if t == 0 {
            return Err(Error::config("threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::config("threads", e.to_string()))?;
    }
    let spec = ExperimentSpec::new(recipe(cli.command), c.seed);
    spec.validate()?;
    let timestamp = (!c.deterministic).then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs())
    });
    let header = spec.header(timestamp)?;
    let report = run_trials(&spec)?;
    match &c.out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            report.table.write(&header, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            report.table.write(&header, &mut w)?;
            w.flush()?;
        }
    }
    if let Some(p) = &c.summary {
        let doc = serde_json::json!({ "spec": spec, "summary": report.summary });
        let mut w = BufWriter::new(File::create(p)?);
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("splinewalk: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
