use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use incpairs::data::{ingest_csv, write_csv, CsvSchema, PairRow, PairedSample};
use incpairs::error::{Error, Result};
use incpairs::harness::{
    analyze_dataset, reference_value, reproduce_config, run_grid, AnalyzeOptions, MethodName,
    ReproduceTarget, Tuning,
};
use incpairs::impute::multiple_impute_detailed;

#[derive(Parser)]
#[command(name = "incpairs", version, about = "Tests and imputation for incompletely observed matched pairs")]
struct Cli {
    /// Master RNG seed.
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,

    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output path (CSV for simulate/reproduce, JSON report for test,
    /// directory for impute).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo grid described by a JSON config.
    Simulate {
        config: PathBuf,
        /// Reuse per-cell results cached in this directory.
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Analyze a matched-pairs CSV with the requested methods.
    Test {
        csv: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        /// Methods to run (tml, norm, pmm, rf-mi, rf-mice).
        #[arg(long, value_delimiter = ',', default_values_t = ["tml".to_string()])]
        methods: Vec<String>,
        /// Inject Bernoulli missingness at this rate before testing.
        #[arg(long)]
        inject: Option<f64>,
        /// Imputation draws for the MI methods.
        #[arg(long, default_value_t = 5)]
        m: usize,
        /// Permutation resamples for tml.
        #[arg(long, short = 'B', default_value_t = 1000)]
        b: usize,
    },
    /// Write m completed copies of a matched-pairs CSV plus a JSON manifest.
    Impute {
        csv: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        /// Imputation engine (norm, pmm, rf-mi, rf-mice).
        #[arg(long, default_value = "norm")]
        method: String,
        #[arg(long, default_value_t = 5)]
        m: usize,
    },
    /// Re-run a published study segment and compare against its references.
    Reproduce {
        /// table1, table2 or nrmse-figure.
        target: String,
        /// Fraction of the reference replicate count (10,000) to run.
        #[arg(long, default_value_t = 0.2)]
        scale: f64,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SchemaArgs {
    /// Header name of the first pair component.
    #[arg(long, default_value = "x1")]
    x1: String,
    /// Header name of the second pair component.
    #[arg(long, default_value = "x2")]
    x2: String,
    /// Auxiliary (fully observed) predictor columns.
    #[arg(long, value_delimiter = ',')]
    aux: Vec<String>,
    /// Field delimiter.
    #[arg(long, default_value = ",")]
    delimiter: String,
}

impl SchemaArgs {
    fn build(&self) -> Result<CsvSchema> {
        let bytes = self.delimiter.as_bytes();
        if bytes.len() != 1 {
            return Err(Error::Parameter(format!(
                "delimiter must be a single byte, got '{}'",
                self.delimiter
            )));
        }
        Ok(CsvSchema {
            x1: self.x1.clone(),
            x2: self.x2.clone(),
            aux: self.aux.clone(),
            delimiter: bytes[0],
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, cache_dir } => {
            let text = fs::read_to_string(&config)?;
            let grid = incpairs::harness::GridConfig::from_json(&text)?;
            let out = cli
                .out
                .unwrap_or_else(|| PathBuf::from("simulation_results.csv"));
            let results = run_grid(&grid, &out, cache_dir.as_deref())?;
            eprintln!("wrote {} cells to {}", results.len(), out.display());
            Ok(())
        }
        Command::Test {
            csv,
            schema,
            methods,
            inject,
            m,
            b,
        } => {
            let methods = methods
                .iter()
                .map(|s| MethodName::parse(s))
                .collect::<Result<Vec<_>>>()?;
            if let Some(r) = inject {
                if !(0.0..1.0).contains(&r) {
                    return Err(Error::Parameter(format!(
                        "injection rate {r} outside [0, 1)"
                    )));
                }
            }
            let opts = AnalyzeOptions {
                schema: schema.build()?,
                methods,
                inject,
                m,
                b_perm: b,
                seed: cli.seed,
                tuning: Tuning::default(),
            };
            let report = analyze_dataset(&csv, &opts)?;
            let (n1, n2, n3) = report.counts;
            println!(
                "n = {} (complete {n1}, second-missing {n2}, first-missing {n3}), dropped {}",
                report.n, report.dropped_rows
            );
            println!("{:<10} {:>12} {:>12}", "method", "statistic", "p");
            for row in &report.rows {
                match (&row.statistic, &row.p_two_sided, &row.error) {
                    (Some(s), Some(p), _) => {
                        println!("{:<10} {:>12.4} {:>12.4}", row.method, s, p)
                    }
                    (_, _, Some(e)) => println!("{:<10} failed: {e}", row.method),
                    _ => {}
                }
            }
            if let Some(out) = cli.out {
                fs::write(&out, serde_json::to_string_pretty(&report).expect("report"))?;
                eprintln!("wrote {}", out.display());
            }
            Ok(())
        }
        Command::Impute {
            csv,
            schema,
            method,
            m,
        } => {
            let schema = schema.build()?;
            let name = MethodName::parse(&method)?;
            let tuning = Tuning::default();
            let engine = match name {
                MethodName::Tml => {
                    return Err(Error::Parameter(
                        "tml is a test, not an imputation engine".into(),
                    ))
                }
                _ => imputation_for(name, &tuning),
            };
            let ingest = ingest_csv(&csv, &schema)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let draws = multiple_impute_detailed(&ingest.sample, &engine, m, &mut rng)?;

            let out_dir = cli.out.unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&out_dir)?;
            let stem = csv
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("dataset");
            let mut files = Vec::new();
            for (k, draw) in draws.iter().enumerate() {
                let completed = completed_to_sample(&ingest.sample, &draw.dataset.matrix)?;
                let path = out_dir.join(format!("{stem}_imp{}.csv", k + 1));
                write_csv(&completed, &schema, &path)?;
                files.push(json!({
                    "file": path.to_string_lossy(),
                    "rf_mi_trace": draw.rf_mi_trace,
                }));
            }
            let manifest = json!({
                "source": csv.to_string_lossy(),
                "method": engine,
                "m": m,
                "seed": cli.seed,
                "dropped_rows": ingest.dropped_rows,
                "draws": files,
            });
            let manifest_path = out_dir.join(format!("{stem}_manifest.json"));
            fs::write(
                &manifest_path,
                serde_json::to_string_pretty(&manifest).expect("manifest"),
            )?;
            eprintln!("wrote {m} completed datasets and {}", manifest_path.display());
            Ok(())
        }
        Command::Reproduce {
            target,
            scale,
            cache_dir,
        } => {
            let target = ReproduceTarget::parse(&target)?;
            let grid = reproduce_config(target, scale, cli.seed)?;
            let out = cli.out.unwrap_or_else(|| {
                PathBuf::from(match target {
                    ReproduceTarget::Table1 => "table1.csv",
                    ReproduceTarget::Table2 => "table2.csv",
                    ReproduceTarget::NrmseFigure => "nrmse_figure.csv",
                })
            });
            let results = run_grid(&grid, &out, cache_dir.as_deref())?;
            println!(
                "{:<10} {:>5} {:<8} {:>9} {:>9} {:>7}",
                "law", "rho", "method", "observed", "reference", "diff"
            );
            for (cell, r) in &results {
                let reference = reference_value(target, cell);
                let value = if target == ReproduceTarget::NrmseFigure {
                    r.nrmse_mean.unwrap_or(f64::NAN)
                } else {
                    r.rejection_rate
                };
                match reference {
                    Some(reference) => println!(
                        "{:<10} {:>5} {:<8} {:>9.3} {:>9.3} {:>+7.3}",
                        cell.law.label(),
                        cell.rho,
                        cell.method.label(),
                        value,
                        reference,
                        value - reference
                    ),
                    None => println!(
                        "{:<10} {:>5} {:<8} {:>9.3} {:>9} {:>7}",
                        cell.law.label(),
                        cell.rho,
                        cell.method.label(),
                        value,
                        "-",
                        "-"
                    ),
                }
            }
            eprintln!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn imputation_for(name: MethodName, tuning: &Tuning) -> incpairs::impute::ImputationMethod {
    use incpairs::impute::ImputationMethod;
    match name {
        MethodName::Norm => ImputationMethod::Norm {
            sweeps: tuning.chained_sweeps,
        },
        MethodName::Pmm => ImputationMethod::Pmm {
            donors: tuning.pmm_donors,
            sweeps: tuning.chained_sweeps,
        },
        MethodName::RfMi => ImputationMethod::RfMi {
            forest: tuning.forest,
            max_iter: tuning.rf_mi_max_iter,
        },
        MethodName::RfMice => ImputationMethod::RfMice {
            forest: tuning.forest,
            sweeps: tuning.chained_sweeps,
        },
        MethodName::Tml => unreachable!("rejected earlier"),
    }
}

/// Rebuild a fully observed sample (with the original auxiliaries) from a
/// completed pair matrix.
fn completed_to_sample(original: &PairedSample, matrix: &[Vec<f64>]) -> Result<PairedSample> {
    let rows = matrix
        .iter()
        .map(|r| PairRow::complete(r[0], r[1]))
        .collect();
    PairedSample::new(rows, original.aux().cloned())
}
