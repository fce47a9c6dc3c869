use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use twoway_relay::balance::{balance, Instance};
use twoway_relay::bench::{format_float, run_experiment, ExperimentSpec};
use twoway_relay::bound::bound_for;
use twoway_relay::diagnostics::run_checks;
use twoway_relay::lm::StepGeometry;
use twoway_relay::Error;

/// Max-min fair precoding for two-way amplify-and-forward relays.
#[derive(Debug, Parser)]
#[command(name = "twoway-relay", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    opts: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo sweep over SNR points; writes the records CSV and summary.
    Bench,
    /// Balance a single channel draw and print the report.
    Solve,
    /// Print the minimax upper bound for a single channel draw.
    Bound,
    /// Run the property checks on random instances.
    Check,
}

#[derive(Debug, Args)]
struct Overrides {
    /// TOML experiment configuration; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Trials per SNR point (bench) or instances (check).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Comma-separated peak-power-to-noise ratios in dB; single-instance
    /// commands use the first.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    /// Relay-side SNR in dB.
    #[arg(long, global = true, allow_hyphen_values = true)]
    snr_mac: Option<f64>,
    /// User pairs M.
    #[arg(long, global = true)]
    pairs: Option<usize>,
    /// Relay antennas N_R.
    #[arg(long, global = true)]
    antennas: Option<usize>,
    /// Base RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Records CSV path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Bisection stopping width relative to the bound.
    #[arg(long, global = true)]
    eps_bisect: Option<f64>,
    /// LM iteration cap per bisection step.
    #[arg(long, global = true)]
    nmax: Option<usize>,
    /// Record per-trial wall time (makes output non-reproducible).
    #[arg(long, global = true)]
    timings: bool,
    /// Use the unprojected ambient-space LM step.
    #[arg(long, global = true)]
    ambient_step: bool,
}

impl Overrides {
    fn apply(&self) -> Result<ExperimentSpec, Error> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::from_toml_file(path)?,
            None => ExperimentSpec::default(),
        };
        if let Some(v) = self.trials {
            spec.trials = v;
        }
        if let Some(v) = &self.snr {
            spec.snr_list_db = v.clone();
        }
        if let Some(v) = self.snr_mac {
            spec.snr_mac_db = v;
        }
        if let Some(v) = self.pairs {
            spec.system.pairs = v;
        }
        if let Some(v) = self.antennas {
            spec.system.relay_antennas = v;
        }
        if let Some(v) = self.seed {
            spec.system.seed = v;
        }
        if let Some(v) = &self.out {
            spec.out_path = v.clone();
        }
        if let Some(v) = self.threads {
            spec.threads = v;
        }
        if let Some(v) = self.eps_bisect {
            spec.bisect.eps_bisect = v;
        }
        if let Some(v) = self.nmax {
            spec.lm.max_iterations = v;
        }
        spec.record_timing |= self.timings;
        if self.ambient_step {
            spec.lm.geometry = StepGeometry::Ambient;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn exit_for(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    if err.is_numerical() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn bench(spec: &ExperimentSpec) -> Result<ExitCode, Error> {
    let out = run_experiment(spec)?;
    println!("snr_db  trials  mean_ratio%  median_ratio%  mean_iters  mean_ls  degraded");
    for s in &out.summary {
        println!(
            "{:>6.1}  {:>6}  {:>11.3}  {:>13.3}  {:>10.2}  {:>7.3}  {:>8}",
            s.snr_db, s.trials, s.mean_rate_ratio_percent, s.median_rate_ratio_percent, s.mean_lm_iterations, s.mean_linesearch, s.degraded
        );
    }
    println!("records: {}", spec.out_path.display());
    println!("summary: {}", spec.summary_path().display());
    let failures = out.failures();
    if failures > 0 {
        for r in out.records.iter().filter(|r| r.failure.is_some()) {
            eprintln!("trial {} at {} dB failed: {}", r.trial, r.snr_db, r.failure.as_deref().unwrap_or(""));
        }
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn single_instance(spec: &ExperimentSpec) -> Result<Instance, Error> {
    Instance::generate(&spec.system_at(spec.snr_list_db[0], 0))
}

fn solve(spec: &ExperimentSpec) -> Result<ExitCode, Error> {
    let inst = single_instance(spec)?;
    let r = balance(&inst, &spec.lm, &spec.bisect)?;
    println!("snr_db            {}", format_float(inst.problem.snr_db()));
    println!("gamma_bar         {}", format_float(r.gamma_bar));
    println!("j_star            {}", r.j_star);
    println!("delta             {}", format_float(r.delta));
    println!("min_sinr          {}", format_float(r.min_sinr));
    println!("initial_min_sinr  {}", format_float(r.initial_min_sinr));
    println!("min_rate          {}", format_float(r.min_rate));
    println!("ratio_to_bound    {}", format_float(r.ratio_to_bound));
    println!("relay_power       {}", format_float(r.relay_power));
    println!("bisection_steps   {}", r.bisection_steps);
    println!("lm_iterations     {}", r.iterations);
    println!("linesearch/step   {}", format_float(r.linesearch_per_step));
    println!("wall_time_s       {}", format_float(r.wall_time));
    println!("degraded          {}", u8::from(r.degraded));
    let sinrs: Vec<String> = r.sinrs.iter().map(|&s| format_float(s)).collect();
    println!("sinrs             {}", sinrs.join(" "));
    println!("Omega:");
    for row in r.omega_matrix.row_iter() {
        let cells: Vec<String> = row.iter().map(|z| format!("{:+.6}{:+.6}i", z.re, z.im)).collect();
        println!("  {}", cells.join("  "));
    }
    Ok(ExitCode::SUCCESS)
}

fn bound(spec: &ExperimentSpec) -> Result<ExitCode, Error> {
    let inst = single_instance(spec)?;
    let (_, b) = bound_for(&inst.problem)?;
    println!("gamma_bar  {}", format_float(b.gamma_bar));
    println!("j_star     {}", b.j_star);
    for (j, l) in b.per_user_max.iter().enumerate() {
        println!("user {j:<3}   {}", format_float(*l));
    }
    Ok(ExitCode::SUCCESS)
}

fn check(spec: &ExperimentSpec) -> Result<ExitCode, Error> {
    let outcomes = run_checks(&spec.system_at(spec.snr_list_db[0], 0), spec.trials, 1000)?;
    let mut ok = true;
    for o in &outcomes {
        ok &= o.passed();
        let tag = if o.passed() { "PASS" } else { "FAIL" };
        println!("{tag}  {:<48} worst {:>12.4e}  tol {:.1e}", o.name, o.worst, o.tolerance);
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let spec = match cli.opts.apply() {
        Ok(spec) => spec,
        Err(e) => return exit_for(&e),
    };
    let result = match cli.command {
        Command::Bench => bench(&spec),
        Command::Solve => solve(&spec),
        Command::Bound => bound(&spec),
        Command::Check => check(&spec),
    };
    result.unwrap_or_else(|e| exit_for(&e))
}
