use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rpforest::data::write_csv;
use rpforest::experiment::{
    mean_times, read_results_csv, run_experiment, run_ttest_report, significance_table, significance_to_csv,
    write_results_csv, ExperimentConfig, DEFAULT_TTEST_THRESHOLD,
};
use rpforest::{DatasetSpec, Error};

/// Random projection forest benchmarks.
#[derive(Parser)]
#[command(name = "rpforest", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a method x forest-size x k grid and write a results CSV.
    Run(Box<RunArgs>),
    /// Compare method 1 against methods 2-4 in a results CSV.
    Ttest {
        #[arg(long)]
        results: PathBuf,
        /// Only forest sizes above this are tested.
        #[arg(long, default_value_t = DEFAULT_TTEST_THRESHOLD)]
        threshold: usize,
        /// Also write the report as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Materialize a dataset spec as a CSV file.
    Generate {
        #[arg(long)]
        dataset: DatasetSpec,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `file.csv[?header&label=N&standardize]`, `blobs:n=..,d=..`, or `rings:n=..,radii=1;5`.
    #[arg(long)]
    dataset: Option<DatasetSpec>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<u8>>,
    #[arg(long, value_delimiter = ',')]
    trees: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    leaf_capacity: Option<usize>,
    #[arg(long)]
    ntry: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    noise_sigmas: Option<Vec<f64>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print a significance table for forest sizes above this value.
    #[arg(long)]
    ttest_threshold: Option<usize>,
    /// Write 0 in the timing columns so output depends only on the seed.
    #[arg(long)]
    no_timing: bool,
}

impl RunArgs {
    fn into_config(self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                toml::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.dataset {
            cfg.dataset = Some(v);
        }
        if let Some(v) = self.methods {
            cfg.methods = v;
        }
        if let Some(v) = self.trees {
            cfg.forest_sizes = v;
        }
        if let Some(v) = self.k {
            cfg.k_values = v;
        }
        if let Some(v) = self.leaf_capacity {
            cfg.leaf_capacity = v;
        }
        if let Some(v) = self.ntry {
            cfg.n_try = v;
        }
        if let Some(v) = self.noise_sigmas {
            cfg.noise_sigmas = v;
        }
        if self.reps.is_some() {
            cfg.repetitions = self.reps;
        }
        if let Some(v) = self.seed {
            cfg.master_seed = v;
        }
        if self.out.is_some() {
            cfg.output_path = self.out;
        }
        if self.ttest_threshold.is_some() {
            cfg.ttest_threshold = self.ttest_threshold;
        }
        if self.no_timing {
            cfg.record_timing = false;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.into_config()?;
            cfg.validate()?;
            let out = cfg
                .output_path
                .clone()
                .unwrap_or_else(|| PathBuf::from("results.csv"));
            let rows = run_experiment(&cfg)?;
            write_results_csv(&rows, &out)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
            if cfg.record_timing {
                for (method, t) in mean_times(&rows) {
                    println!(
                        "method {method}: mean build {:.3} ms, mean query {:.3} ms",
                        t.build.as_secs_f64() * 1e3,
                        t.query.as_secs_f64() * 1e3
                    );
                }
            }
            if let Some(threshold) = cfg.ttest_threshold {
                print!("{}", significance_table(&run_ttest_report(&rows, threshold)?));
            }
            Ok(())
        }
        Command::Ttest { results, threshold, out } => {
            let rows = read_results_csv(&results)?;
            let report = run_ttest_report(&rows, threshold)?;
            print!("{}", significance_table(&report));
            if let Some(out) = out {
                write_text(&out, &significance_to_csv(&report))?;
            }
            Ok(())
        }
        Command::Generate { dataset, out } => {
            let data = dataset.load()?;
            write_csv(&data, &out)?;
            println!("wrote {} x {} points to {}", data.len(), data.dim(), out.display());
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io { .. } => 2,
                _ => 1,
            })
        }
    }
}
