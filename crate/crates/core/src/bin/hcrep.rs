use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hcrep::harness::{self, AlgorithmName, EvalConfig, EvalReport, SplitMode};
use hcrep::ingest::{self, synthetic, CACHE_MAGIC};
use hcrep::{
    build_hyperclass, CsvSchema, Error, MeasureKind, MissingPolicy, NeighborhoodConfig, Norm, RatingMatrix, Result,
    Scale, SimilarityFn, SimilarityKind,
};

#[derive(Parser)]
#[command(name = "hcrep", version, about = "Hyper-class representation and hyper-class accelerated CF")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a rating file into the binary matrix cache.
    Ingest(IngestArgs),
    /// Score every item, pick the decision feature and write the hyper-class.
    Select(SelectArgs),
    /// Cross-validate recommenders and write a JSON report.
    Eval(EvalArgs),
    /// Evaluate the hyper-class recommenders over a grid of K and measures.
    Sweep(SweepArgs),
    /// Diagnostics on a rating matrix.
    #[command(subcommand)]
    Diagnose(Diagnose),
    /// Write a seeded synthetic MovieLens-shaped rating file.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Movielens,
    Csv,
    Cache,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long, value_enum)]
    format: Format,
    #[arg(long)]
    path: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Args, Clone)]
struct CsvArgs {
    #[arg(long, default_value = "user")]
    user_col: String,
    #[arg(long, default_value = "item")]
    item_col: String,
    #[arg(long, default_value = "rating")]
    rating_col: String,
    /// Rating scale minimum for CSV input.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    scale_min: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    scale_max: f64,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Rating matrix: a cache written by `ingest`, a MovieLens file, or a CSV.
    #[arg(long)]
    input: PathBuf,
    /// Input format; detected from the file when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Args, Clone)]
struct NeighborhoodArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = NormArg::Chebyshev)]
    norm: NormArg,
    #[arg(long, value_enum, default_value_t = MissingArg::Zero)]
    missing: MissingArg,
    /// Compare raw values instead of min-max normalized ones.
    #[arg(long)]
    raw: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Chebyshev,
    Euclidean,
}

#[derive(Clone, Copy, ValueEnum)]
enum MissingArg {
    Zero,
    Skip,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    ByRating,
    ByUser,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimilarityArg {
    Cosine,
    Pearson,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long, default_value = "ce")]
    measure: MeasureKind,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    neighborhood: NeighborhoodArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct CommonEvalArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    neighborhood: NeighborhoodArgs,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SplitArg::ByRating)]
    split: SplitArg,
    /// Share of each test user's ratings revealed for training in by-user mode.
    #[arg(long, default_value_t = 0.5)]
    reveal_fraction: f64,
    #[arg(long, value_enum, default_value_t = SimilarityArg::Cosine)]
    similarity: SimilarityArg,
    #[arg(long, default_value_t = 1)]
    min_overlap: usize,
    #[arg(long)]
    mean_centered: bool,
    /// Dataset label written into the report.
    #[arg(long)]
    dataset: Option<String>,
    /// Published results to print alongside (movielens-100k, jester, rating, book).
    #[arg(long)]
    reference: Option<String>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_delimiter = ',', default_value = "usercf,itemcf,cf_ce,cf_kl,cf_js")]
    algorithms: Vec<AlgorithmName>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[command(flatten)]
    common: CommonEvalArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,20")]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "ce,kl,js")]
    measures: Vec<MeasureKind>,
    #[command(flatten)]
    common: CommonEvalArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Diagnose {
    /// Gap between KL and |CE - info entropy| for one feature.
    Property3 {
        #[arg(long)]
        feature: usize,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        neighborhood: NeighborhoodArgs,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 943)]
    users: usize,
    #[arg(long, default_value_t = 1682)]
    items: usize,
    #[arg(long, default_value_t = 100_000)]
    ratings: usize,
    #[arg(long)]
    out: PathBuf,
}

impl NeighborhoodArgs {
    fn config(&self) -> Result<NeighborhoodConfig> {
        let cfg = NeighborhoodConfig {
            delta: self.delta,
            norm: match self.norm {
                NormArg::Chebyshev => Norm::Chebyshev,
                NormArg::Euclidean => Norm::Euclidean,
            },
            normalize: !self.raw,
            missing: match self.missing {
                MissingArg::Zero => MissingPolicy::Zero,
                MissingArg::Skip => MissingPolicy::Skip,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl CsvArgs {
    fn schema(&self) -> CsvSchema {
        CsvSchema {
            user: self.user_col.clone(),
            item: self.item_col.clone(),
            rating: self.rating_col.clone(),
        }
    }

    fn scale(&self) -> Result<Scale> {
        Scale::new(self.scale_min, self.scale_max)
    }
}

fn detect_format(path: &Path) -> Result<Format> {
    let mut head = [0u8; 8];
    let n = File::open(path)?.read(&mut head)?;
    if n == head.len() && head == CACHE_MAGIC {
        return Ok(Format::Cache);
    }
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    Ok(if is_csv { Format::Csv } else { Format::Movielens })
}

fn load(format: Format, path: &Path, csv: &CsvArgs) -> Result<RatingMatrix> {
    let matrix = match format {
        Format::Movielens => ingest::load_movielens(path)?,
        Format::Csv => ingest::load_csv(path, &csv.schema(), csv.scale()?)?,
        Format::Cache => ingest::read_cache(path)?,
    };
    log::info!(
        "loaded {}: {} users, {} items, {} ratings",
        path.display(),
        matrix.n_users(),
        matrix.n_items(),
        matrix.len()
    );
    Ok(matrix)
}

impl InputArgs {
    fn load(&self) -> Result<RatingMatrix> {
        let format = match self.format {
            Some(f) => f,
            None => detect_format(&self.input)?,
        };
        load(format, &self.input, &self.csv)
    }
}

impl CommonEvalArgs {
    fn config(&self, algorithms: Vec<AlgorithmName>, k: usize) -> Result<EvalConfig> {
        let dataset = self.dataset.clone().unwrap_or_else(|| {
            self.input
                .input
                .file_stem()
                .map_or_else(|| "unnamed".into(), |s| s.to_string_lossy().into_owned())
        });
        let config = EvalConfig {
            dataset,
            reference: self.reference.clone(),
            algorithms,
            k,
            folds: self.folds,
            seed: self.seed,
            split: match self.split {
                SplitArg::ByRating => SplitMode::ByRating,
                SplitArg::ByUser => SplitMode::ByUser,
            },
            reveal_fraction: self.reveal_fraction,
            neighborhood: self.neighborhood.config()?,
            similarity: SimilarityFn {
                kind: match self.similarity {
                    SimilarityArg::Cosine => SimilarityKind::Cosine,
                    SimilarityArg::Pearson => SimilarityKind::Pearson,
                },
                min_overlap: self.min_overlap,
            },
            mean_centered: self.mean_centered,
            threads: self.threads,
        };
        config.validate()?;
        Ok(config)
    }
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn print_report(report: &EvalReport) {
    println!(
        "{}: {} users, {} items, {} ratings, {} folds",
        report.dataset.name,
        report.dataset.n_users,
        report.dataset.n_items,
        report.dataset.n_ratings,
        report.config.folds
    );
    println!("{:<8} {:>8} {:>8} {:>10}   published rmse/mae/seconds", "algo", "rmse", "mae", "seconds");
    for alg in &report.algorithms {
        let published = report
            .published
            .iter()
            .find(|p| p.algorithm == alg.algorithm.as_str())
            .map(|p| format!("{:.4} / {:.4} / {:.2}", p.rmse, p.mae, p.seconds))
            .unwrap_or_default();
        println!(
            "{:<8} {:>8.4} {:>8.4} {:>10.3}   {}",
            alg.algorithm.as_str(),
            alg.mean.rmse,
            alg.mean.mae,
            alg.mean.seconds,
            published
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(args) => {
            let matrix = load(args.format, &args.path, &args.csv)?;
            if matrix.duplicates() > 0 {
                eprintln!("warning: {} duplicate ratings replaced", matrix.duplicates());
            }
            ingest::write_cache(&matrix, &args.out)?;
            println!(
                "{} users, {} items, {} ratings -> {}",
                matrix.n_users(),
                matrix.n_items(),
                matrix.len(),
                args.out.display()
            );
        }
        Command::Select(args) => {
            let matrix = args.input.load()?;
            let hc = build_hyperclass(&matrix, args.measure, &args.neighborhood.config()?)?;
            write_json(&hc, &args.out)?;
            println!(
                "decision feature {} (item {}), {} = {}, {} blocks",
                hc.decision_feature,
                matrix.item_ids()[hc.decision_feature],
                args.measure.name(),
                hc.score,
                hc.n_blocks()
            );
        }
        Command::Eval(args) => {
            let matrix = args.common.input.load()?;
            let config = args.common.config(args.algorithms, args.k)?;
            let report = harness::evaluate(&matrix, &config)?;
            report.write_json(&args.out)?;
            print_report(&report);
        }
        Command::Sweep(args) => {
            let matrix = args.common.input.load()?;
            let config = args.common.config(vec![AlgorithmName::CfCe], 1)?;
            let cells = harness::sweep(&matrix, &config, &args.k, &args.measures)?;
            harness::write_grid_csv(&cells, BufWriter::new(File::create(&args.out)?))?;
            for cell in &cells {
                let mean = &cell.report.algorithms[0].mean;
                println!(
                    "K={:<3} {:<3} rmse {:.4} mae {:.4} seconds {:.3}",
                    cell.k,
                    cell.measure.name(),
                    mean.rmse,
                    mean.mae,
                    mean.seconds
                );
            }
        }
        Command::Diagnose(Diagnose::Property3 {
            feature,
            input,
            neighborhood,
        }) => {
            let matrix = input.load()?;
            let gap = harness::property3_gap(&matrix, feature, &neighborhood.config()?)?;
            println!("property3 gap for feature {feature}: {gap}");
        }
        Command::Synth(args) => {
            let spec = synthetic::SyntheticSpec {
                n_users: args.users,
                n_items: args.items,
                n_ratings: args.ratings,
                seed: args.seed,
                ..synthetic::SyntheticSpec::movielens_100k(args.seed)
            };
            let records = synthetic::generate(&spec)?;
            synthetic::write_movielens(&records, &args.out)?;
            println!("{} ratings -> {}", records.len(), args.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_byte(&e))
        }
    }
}

fn exit_code_byte(e: &Error) -> u8 {
    e.exit_code() as u8
}
