use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use txbeam::sim::{exact_covariance, sample_covariance, simulate_snapshots, write_snapshot_csv, Scenario};
use txbeam_harness::config::{EstimatorKind, ExperimentConfig, Method};
use txbeam_harness::methods::build_method;
use txbeam_harness::output::{emit_outputs, fmt_f, write_beampattern_csv, write_config_echo, write_design_csv};
use txbeam_harness::sweep::{estimate_from_covariance, run_sweep};
use txbeam_harness::verify::{check_monte_carlo, run_static_checks, CheckReport};

#[derive(Parser)]
#[command(name = "txbeam", version, about = "Transmit-beamspace MIMO radar DOA experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file or preset name (paper-example-2, paper-example-3).
    #[arg(long, global = true, default_value = "paper-example-2")]
    config: String,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Restrict to these methods (repeatable).
    #[arg(long = "method", global = true)]
    methods: Vec<Method>,
    #[arg(long, global = true)]
    estimator: Option<EstimatorKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Design C for each method; write design and beampattern CSVs.
    Design,
    /// Write transmit beampatterns on a uniform grid over [-90, 90] degrees.
    Beampattern {
        #[arg(long, default_value_t = 0.1)]
        step_deg: f64,
    },
    /// Simulate one set of virtual snapshots and write them as CSV.
    Simulate {
        #[arg(long, default_value_t = 10.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
    },
    /// Estimate target angles from one simulated trial.
    Estimate {
        #[arg(long, default_value_t = 10.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Use the exact covariance instead of simulated snapshots.
        #[arg(long)]
        exact: bool,
    },
    /// Print stochastic and deterministic bounds over the configured SNRs.
    Crb,
    /// Run the Monte Carlo sweep and write every output table.
    Sweep {
        #[arg(long)]
        runs: Option<usize>,
        /// Also write per-trial records to trials.csv.
        #[arg(long)]
        trial_log: bool,
    },
    /// Run the invariant checks; optionally the Monte Carlo checks too.
    Verify {
        #[arg(long)]
        monte_carlo: bool,
        #[arg(long, default_value_t = 200)]
        runs: usize,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if !common.methods.is_empty() {
        cfg.methods = common.methods.clone();
    }
    if let Some(est) = common.estimator {
        cfg.estimator = est;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn writer(dir: &Path, name: &str) -> Result<BufWriter<fs::File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn scenario(
    cfg: &ExperimentConfig,
    method: Method,
    snr_db: f64,
) -> Result<(txbeam_harness::methods::MethodSetup, Scenario)> {
    let setup = build_method(cfg, method, cfg.estimator)?;
    let s = Scenario::with_snr_db(
        setup.tx,
        setup.rx,
        setup.model.clone(),
        &cfg.targets()?,
        snr_db,
        cfg.energy(),
        cfg.pulses,
    )?;
    Ok((setup, s))
}

fn single_method(cfg: &ExperimentConfig) -> Result<Method> {
    match cfg.methods.as_slice() {
        [m] => Ok(*m),
        _ => bail!("select exactly one method with --method"),
    }
}

fn report(lines: &[CheckReport]) -> bool {
    for r in lines {
        println!("{}", r.line());
    }
    lines.iter().all(|r| r.passed)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut cfg = load(&cli.common)?;
    match cli.command {
        Command::Design => {
            let dir = out_dir(&cfg)?;
            for &m in &cfg.methods {
                let setup = build_method(&cfg, m, EstimatorKind::Music)?;
                if let Some(c) = setup.matrix() {
                    let mut w = writer(&dir, &format!("design_{m}.csv"))?;
                    write_design_csv(c, &mut w)?;
                    w.flush()?;
                }
                let mut w = writer(&dir, &format!("beampattern_{m}.csv"))?;
                write_beampattern_csv(&setup.model, &setup.tx, 0.1, &mut w)?;
                w.flush()?;
                println!("{m}: {}", setup.notes.join(" "));
            }
            write_config_echo(&cfg, &dir)?;
            println!("wrote {}", dir.display());
        }
        Command::Beampattern { step_deg } => {
            let dir = out_dir(&cfg)?;
            for &m in &cfg.methods {
                let setup = build_method(&cfg, m, EstimatorKind::Music)?;
                let mut w = writer(&dir, &format!("beampattern_{m}.csv"))?;
                write_beampattern_csv(&setup.model, &setup.tx, step_deg, &mut w)?;
                w.flush()?;
            }
            println!("wrote {}", dir.display());
        }
        Command::Simulate { snr_db, stream } => {
            let m = single_method(&cfg)?;
            let (_, s) = scenario(&cfg, m, snr_db)?;
            let x = simulate_snapshots(&s, cfg.seed, stream)?;
            match &cli.common.out {
                Some(_) => {
                    let dir = out_dir(&cfg)?;
                    let mut w = writer(&dir, "snapshots.csv")?;
                    write_snapshot_csv(&x, &mut w)?;
                    w.flush()?;
                    println!("wrote {}", dir.join("snapshots.csv").display());
                }
                None => write_snapshot_csv(&x, io::stdout().lock())?,
            }
        }
        Command::Estimate { snr_db, stream, exact } => {
            let m = single_method(&cfg)?;
            let (setup, s) = scenario(&cfg, m, snr_db)?;
            let r = if exact {
                exact_covariance(&s)?
            } else {
                sample_covariance(&simulate_snapshots(&s, cfg.seed, stream)?)
            };
            let est = estimate_from_covariance(&setup, &r, cfg.targets_deg.len(), cfg.estimator, cfg.tls)?;
            let resolved = txbeam::estimators::resolution_check(&est.angles, &cfg.targets_deg);
            let angles: Vec<String> = est.angles.iter().map(|&a| fmt_f(a)).collect();
            println!("method={m} estimator={} snr_db={snr_db}", cfg.estimator.name());
            println!("estimates_deg={}", angles.join(","));
            println!("resolved={resolved} flagged={}", est.flagged);
        }
        Command::Crb => {
            println!("snr_db,method,crb_sto_deg,crb_det_deg");
            for &m in &cfg.methods {
                let setup = build_method(&cfg, m, EstimatorKind::Music)?;
                for &snr in &cfg.snr_db {
                    let s = Scenario::with_snr_db(
                        setup.tx,
                        setup.rx,
                        setup.model.clone(),
                        &cfg.targets()?,
                        snr,
                        cfg.energy(),
                        cfg.pulses,
                    )?;
                    let mean = |v: Vec<f64>| (v.iter().sum::<f64>() / v.len() as f64).sqrt();
                    let sto = mean(txbeam::crb::stochastic_crb(&s)?.per_target_deg2());
                    let det = mean(txbeam::crb::deterministic_crb(&s, None)?.per_target_deg2());
                    println!("{},{m},{},{}", fmt_f(snr), fmt_f(sto), fmt_f(det));
                }
            }
        }
        Command::Sweep { runs, trial_log } => {
            if let Some(r) = runs {
                cfg.runs = r;
            }
            cfg.trial_log |= trial_log;
            cfg.validate()?;
            let result = run_sweep(&cfg, cli.common.workers)?;
            let dir = out_dir(&cfg)?;
            let paths = emit_outputs(&result, &dir)?;
            println!(
                "{} trials in {:.1} s on {} workers; wrote {} files to {}",
                result.trials.len(),
                result.elapsed_seconds,
                result.workers,
                paths.len(),
                dir.display()
            );
        }
        Command::Verify { monte_carlo, runs } => {
            let mut ok = report(&run_static_checks(&cfg));
            if monte_carlo {
                for preset in ["paper-example-2", "paper-example-3"] {
                    let mut mc = ExperimentConfig::preset(preset).expect("built-in preset");
                    mc.runs = runs;
                    mc.seed = cfg.seed;
                    let tb = if mc.estimator == EstimatorKind::Music {
                        Method::TbSpheroidal
                    } else {
                        Method::TbMinimax
                    };
                    let result = run_sweep(&mc, cli.common.workers)?;
                    ok &= report(&check_monte_carlo(&result, tb, cli.common.workers));
                }
            }
            if !ok {
                std::process::exit(1);
            }
        }
    }
    Ok(())
}
