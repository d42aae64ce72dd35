use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use agop::harness::{self, ExperimentConfig};
use agop::hermite::{self, Link};
use agop::model::{Subspace, SubspaceKind};
use agop::verify::{self, DiagonalMode};
use agop::{kernel, linalg, Error};

#[derive(Parser)]
#[command(name = "agop", version, about = "AGOP subspace recovery experiments and numerical checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment grid and write one CSV row per fit.
    Run {
        /// TOML config (or JSON with a .json extension).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's base_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV; defaults to the config's out_path, then results.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for independent trials.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Allow sample sizes above max_n.
        #[arg(long)]
        allow_large_n: bool,
        /// Write 0 in the runtime_s column so reruns are byte-identical.
        #[arg(long)]
        no_runtime: bool,
    },
    /// Run the numerical verification suite and print a pass/fail table.
    Verify {
        /// Small dimensions and seed counts; finishes in seconds.
        #[arg(long)]
        fast: bool,
        /// Also write one JSON record per check to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate a single oracle and print the result.
    Oracle {
        #[command(subcommand)]
        oracle: Oracle,
    },
    /// Summarize a results CSV per (configuration, alpha, iteration).
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum Oracle {
    /// Probabilists' Hermite polynomial He_n(t).
    Hermite {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        t: f64,
    },
    /// Latent gradient covariance of a link, truncated at degree p.
    Sigma {
        #[arg(long)]
        link: Link,
        #[arg(long)]
        p: u32,
    },
    /// Gaussian L2 norm squared of a link.
    Norm {
        #[arg(long)]
        link: Link,
    },
    /// Walsh coefficients of h(Ux) on the cube, one term per line.
    Walsh {
        #[arg(long)]
        link: Link,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value = "haar")]
        subspace: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Operator-norm gap between the cube AGOP and the lifted latent covariance.
    LemmaGap {
        #[arg(long)]
        link: Link,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        p: usize,
        /// haar, sparse, or axis.
        #[arg(long, default_value = "haar")]
        subspace: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Coherence of a generated subspace.
    Coherence {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        r: usize,
        #[arg(long, default_value = "haar")]
        subspace: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fourier residual of the exponential inner-product kernel on random cube points.
    FourierResidual {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use g^(k)(0)/d^k instead of the exact cube coefficients.
        #[arg(long)]
        leading_order: bool,
    },
}

fn subspace_for(name: &str, d: usize, r: usize, seed: u64) -> agop::Result<Subspace> {
    match name {
        "axis" => Subspace::axis_aligned(d, r),
        other => other.parse::<SubspaceKind>()?.generate(d, r, seed),
    }
}

fn print_matrix(m: faer::MatRef<'_, f64>) {
    for row in linalg::to_rows(m) {
        println!("{}", row.iter().map(|v| format!("{v:.12}")).collect::<Vec<_>>().join(" "));
    }
}

fn run_oracle(oracle: Oracle) -> agop::Result<()> {
    match oracle {
        Oracle::Hermite { n, t } => println!("{}", hermite::hermite_eval(n, t)),
        Oracle::Sigma { link, p } => print_matrix(link.poly().latent_sigma(p).as_ref()),
        Oracle::Norm { link } => println!("{}", link.poly().gaussian_l2_norm_sq()),
        Oracle::Walsh { link, d, subspace, seed } => {
            let u = subspace_for(&subspace, d, link.latent_dim(), seed)?;
            print!("{}", verify::multilinear_target(&link.poly(), &u)?.dump());
        }
        Oracle::LemmaGap { link, d, p, subspace, seed } => {
            let u = subspace_for(&subspace, d, link.latent_dim(), seed)?;
            let report = verify::lemma32_gap(&link.poly(), &u, p)?;
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
        }
        Oracle::Coherence { d, r, subspace, seed } => println!("{}", subspace_for(&subspace, d, r, seed)?.coherence()),
        Oracle::FourierResidual { d, n, p, seed, leading_order } => {
            let mut s = agop::rng::stream(seed);
            let x = faer::Mat::from_fn(n, d, |_, _| if rand::Rng::random::<bool>(&mut s) { 1.0 } else { -1.0 });
            let mode = if leading_order { DiagonalMode::LeadingOrder } else { DiagonalMode::Exact };
            println!("{}", verify::kernel_fourier_residual(&kernel::Profile::Exp, x.as_ref(), p, mode)?);
        }
    }
    Ok(())
}

fn run(cli: Cli) -> agop::Result<bool> {
    match cli.command {
        Command::Run { config, seed, out, jobs, allow_large_n, no_runtime } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.allow_large_n |= allow_large_n;
            cfg.record_runtime &= !no_runtime;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            cfg.validate_at(&config)?;
            let out = out.or_else(|| cfg.out_path.clone()).unwrap_or_else(|| PathBuf::from("results.csv"));
            let rows = harness::run_experiment(&cfg, jobs)?;
            harness::write_csv(&rows, &out)?;
            let failed = rows.iter().filter(|r| !r.is_ok()).count();
            eprintln!("wrote {} rows to {} ({failed} failed)", rows.len(), out.display());
            Ok(true)
        }
        Command::Verify { fast, report } => {
            let records = verify::run_suite(fast);
            for rec in &records {
                let status = if rec.passed { "PASS" } else { "FAIL" };
                println!("{status}  {:<28} {:>8.2}s  {}", rec.name, rec.runtime_s, rec.detail);
            }
            if let Some(path) = report {
                verify::write_report(&records, std::fs::File::create(path)?)?;
            }
            Ok(records.iter().all(|r| r.passed))
        }
        Command::Oracle { oracle } => run_oracle(oracle).map(|_| true),
        Command::Aggregate { input, out } => {
            let rows = harness::read_csv(&input)?;
            let agg = harness::aggregate(&rows);
            harness::write_aggregate_csv(&agg, &out)?;
            eprintln!("wrote {} aggregated rows to {}", agg.len(), out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
