//! `aphom` command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aphom_cli::{run, ExperimentConfig, Kind, RunError};
use aphom_core::report::fit_power_law;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aphom", version, about = "Correctors and homogenization rate experiments")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "APHOM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate a coefficient field file.
    FieldCheck {
        field: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a power law to a two-column CSV series.
    Fit { series: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let code = match cli.command {
        Command::Run { config, out, seed } => run_config(&config, out.as_deref(), seed),
        Command::FieldCheck { field, out } => {
            let cfg = ExperimentConfig {
                name: "field-check".into(),
                kind: Kind::FieldCheck,
                field: Some(std::path::absolute(&field).unwrap_or(field)),
                params: serde_json::Value::Null,
                seed: 0,
                out,
                precision: Default::default(),
                assertions: Vec::new(),
                base_dir: PathBuf::new(),
            };
            finish(run(&cfg, None))
        }
        Command::Fit { series } => fit(&series),
    };
    ExitCode::from(code as u8)
}

fn run_config(path: &Path, out: Option<&Path>, seed: Option<u64>) -> i32 {
    let mut cfg = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    finish(run(&cfg, out))
}

fn finish(res: Result<aphom_cli::RunOutcome, RunError>) -> i32 {
    match res {
        Ok(o) => {
            for a in &o.report.assertions {
                println!(
                    "{} {:<28} value {:.6e} threshold {:.6e}",
                    if a.passed { "PASS" } else { "FAIL" },
                    a.id,
                    a.value,
                    a.threshold
                );
            }
            for (name, fit) in &o.report.fits {
                match fit {
                    Some(f) => println!("fit {name}: slope {:.4} (r2 {:.4})", f.slope, f.r2),
                    None => println!("fit {name}: degenerate"),
                }
            }
            println!("report {} hash {}", o.out_dir.join("report.json").display(), o.report.hash());
            o.exit_code
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn fit(path: &Path) -> i32 {
    let mut rdr = match csv::Reader::from_path(path) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            return 2;
        }
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in rdr.records() {
        let parsed =
            rec.ok().and_then(|r| Some((r.get(0)?.trim().parse::<f64>().ok()?, r.get(1)?.trim().parse::<f64>().ok()?)));
        match parsed {
            Some((x, y)) => {
                xs.push(x);
                ys.push(y);
            }
            None => {
                eprintln!("{}: expected two numeric columns", path.display());
                return 2;
            }
        }
    }
    match fit_power_law(&xs, &ys) {
        Ok(f) => {
            println!("{}", serde_json::to_string_pretty(&f).expect("fit serializes"));
            0
        }
        Err(e) => {
            eprintln!("{e}");
            2
        }
    }
}
