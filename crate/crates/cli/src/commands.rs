//! `dgvse` subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dgvse::applications::{BaseRequest, Projector, QueryMode, QueryRequest, RankedResult, ReorderRequest};
use dgvse::dataset::SyntheticSpec;
use dgvse::{fit, generate_synthetic, load_dataset, save_dataset, save_model, TrainConfig};
use serde::Serialize;

use crate::exit::{self, CliError};
use crate::payloads::{self, ServiceState, VarianceTable};
use crate::server;

#[derive(Debug, Parser)]
#[command(name = "dgvse", version, about = "Gaussian tag and item embeddings: training, retrieval and a JSON service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model on a JSONL dataset.
    Train(TrainArgs),
    /// Rank items against an edited item or tag-set query.
    Retrieve(RetrieveArgs),
    /// Rank the items of a tag (or a given subset) by relevance to it.
    Reorder(ReorderArgs),
    /// Tags by embedded variance.
    Variance(VarianceArgs),
    /// Correlations between item variance and tag statistics.
    Corr(ReportArgs),
    /// 2-D projection of tag means.
    Map(MapArgs),
    /// Serve the JSON API.
    Serve(ServeArgs),
    /// Write a clustered synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    /// One JSON record per line.
    Jsonl,
    /// The service's response body.
    Json,
}

#[derive(Debug, Args)]
pub struct Inputs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// `key = value` file applied before the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// mahalanobis, kl or w2.
    #[arg(long)]
    pub distance: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub hard_negatives: bool,
    #[arg(long)]
    pub freeze_variances: bool,
    #[arg(long)]
    pub check_gradients: bool,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    /// `item:ID` or `tags:a,b,...`.
    #[arg(long)]
    pub base: String,
    #[arg(long, value_delimiter = ',')]
    pub remove: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub add: Vec<String>,
    #[arg(short, long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Algebra)]
    pub mode: ModeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Algebra,
    Refuse,
}

impl From<ModeArg> for QueryMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Algebra => QueryMode::Algebra,
            ModeArg::Refuse => QueryMode::Refuse,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReorderArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[arg(long)]
    pub tag: String,
    /// Item ids to rank instead of every item carrying the tag.
    #[arg(long, value_delimiter = ',')]
    pub subset: Option<Vec<String>>,
    #[arg(short, long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VarianceArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long)]
    pub bottom: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub inputs: Inputs,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[arg(long, default_value = "pca")]
    pub projector: String,
    /// Restrict the map to these tags.
    #[arg(long, value_delimiter = ',')]
    pub tags: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Overrides `DGVSE_BIND`; defaults to 127.0.0.1:8080.
    #[arg(long)]
    pub bind: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub clusters: usize,
    #[arg(long, default_value_t = 40)]
    pub per_cluster: usize,
    #[arg(long, default_value_t = 16)]
    pub features: usize,
    #[arg(long, default_value_t = 0.3)]
    pub spread: f64,
    #[arg(long, default_value_t = 4)]
    pub generic: usize,
    #[arg(long, default_value_t = 8)]
    pub specific: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

type CmdResult = Result<(), CliError>;

fn io_err(e: std::io::Error) -> CliError {
    CliError::new(exit::FAILURE, format!("cannot write output: {e}"))
}

/// Parses `item:ID` or `tags:a,b`.
pub fn parse_base(raw: &str) -> Result<BaseRequest, CliError> {
    match raw.split_once(':') {
        Some(("item", id)) if !id.is_empty() => Ok(BaseRequest {
            item: Some(id.to_string()),
            tags: None,
        }),
        Some(("tags", list)) => Ok(BaseRequest {
            item: None,
            tags: Some(list.split(',').filter(|t| !t.is_empty()).map(str::to_string).collect()),
        }),
        _ => Err(CliError::new(exit::CONFIG, format!("--base must be item:ID or tags:a,b (got '{raw}')"))),
    }
}

pub fn train_config(args: &TrainArgs) -> Result<TrainConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::new(exit::CONFIG, format!("{}: {e}", path.display())))?;
            TrainConfig::from_kv(&text)?
        }
        None => TrainConfig::default(),
    };
    if let Some(d) = &args.distance {
        cfg.set("distance", d)?;
    }
    cfg.embed_dim = args.dim.unwrap_or(cfg.embed_dim);
    cfg.margin = args.margin.unwrap_or(cfg.margin);
    cfg.learning_rate = args.lr.unwrap_or(cfg.learning_rate);
    cfg.epochs = args.epochs.unwrap_or(cfg.epochs);
    cfg.batch_size = args.batch.unwrap_or(cfg.batch_size);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.negatives_per_positive = args.negatives.unwrap_or(cfg.negatives_per_positive);
    cfg.hard_negatives |= args.hard_negatives;
    cfg.freeze_variances |= args.freeze_variances;
    cfg.check_gradients |= args.check_gradients;
    cfg.validate()?;
    Ok(cfg)
}

fn data_error(path: &Path, e: dgvse::Error) -> CliError {
    CliError::new(exit::DATA, format!("{}: {e}", path.display()))
}

fn train(args: &TrainArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = train_config(args)?;
    let dataset = load_dataset(&args.data).map_err(|e| data_error(&args.data, e))?;
    let (model, report) = fit(&cfg, &dataset).map_err(|e| match e {
        dgvse::Error::EmptyDataset | dgvse::Error::ItemWithoutTags(_) => data_error(&args.data, e),
        other => CliError::from(other),
    })?;
    save_model(&model, &args.out).map_err(|e| CliError::new(exit::DATA, format!("{}: {e}", args.out.display())))?;
    write!(out, "{}", report.summary()).map_err(io_err)?;
    writeln!(out, "model written to {}", args.out.display()).map_err(io_err)
}

fn write_jsonl<T: Serialize>(out: &mut dyn Write, records: impl IntoIterator<Item = T>) -> CmdResult {
    for r in records {
        writeln!(out, "{}", payloads::to_json(&r)).map_err(io_err)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RankedLine<'a> {
    rank: usize,
    id: &'a str,
    score: f64,
}

fn print_ranked(result: &RankedResult, format: Format, out: &mut dyn Write) -> CmdResult {
    if result.degenerate {
        eprintln!("warning: the edit removed more precision than the base had; query variance was clamped");
    }
    match format {
        Format::Json => writeln!(out, "{}", payloads::to_json(result)).map_err(io_err),
        Format::Jsonl => write_jsonl(
            out,
            result.results.iter().enumerate().map(|(i, s)| RankedLine {
                rank: i + 1,
                id: &s.id,
                score: s.score,
            }),
        ),
        Format::Text => {
            let width = result.results.iter().map(|s| s.id.len()).max().unwrap_or(2).max(2);
            writeln!(out, "{:>4}  {:<width$}  {:>14}", "rank", "id", "score").map_err(io_err)?;
            for (i, s) in result.results.iter().enumerate() {
                writeln!(out, "{:>4}  {:<width$}  {:>14.6}", i + 1, s.id, s.score).map_err(io_err)?;
            }
            Ok(())
        }
    }
}

pub fn query_request(args: &RetrieveArgs) -> Result<QueryRequest, CliError> {
    Ok(QueryRequest {
        base: parse_base(&args.base)?,
        remove: args.remove.clone(),
        add: args.add.clone(),
        k: args.k,
        mode: args.mode.into(),
    })
}

fn retrieve(args: &RetrieveArgs, out: &mut dyn Write) -> CmdResult {
    let request = query_request(args)?;
    let state = ServiceState::open(&args.inputs.model, &args.inputs.data)?;
    let result = payloads::retrieve(&state, &request)?;
    print_ranked(&result, args.inputs.format, out)
}

fn reorder(args: &ReorderArgs, out: &mut dyn Write) -> CmdResult {
    let state = ServiceState::open(&args.inputs.model, &args.inputs.data)?;
    let request = ReorderRequest {
        tag: args.tag.clone(),
        subset: args.subset.clone(),
        k: args.k,
    };
    let result = payloads::reorder(&state, &request)?;
    print_ranked(&result, args.inputs.format, out)
}

/// Keeps the first `top` and last `bottom` rows; all rows when neither is set.
pub fn select_rows(table: VarianceTable, top: Option<usize>, bottom: Option<usize>) -> VarianceTable {
    if top.is_none() && bottom.is_none() {
        return table;
    }
    let n = table.rows.len();
    let (top, bottom) = (top.unwrap_or(0).min(n), bottom.unwrap_or(0).min(n));
    let rows = if top + bottom >= n {
        table.rows
    } else {
        let mut rows = table.rows[..top].to_vec();
        rows.extend_from_slice(&table.rows[n - bottom..]);
        rows
    };
    VarianceTable { rows, total: table.total }
}

fn variance(args: &VarianceArgs, out: &mut dyn Write) -> CmdResult {
    let state = ServiceState::open(&args.inputs.model, &args.inputs.data)?;
    let table = select_rows(payloads::variance(&state)?, args.top, args.bottom);
    match args.inputs.format {
        Format::Json => writeln!(out, "{}", payloads::to_json(&table)).map_err(io_err),
        Format::Jsonl => write_jsonl(out, &table.rows),
        Format::Text => {
            let width = table.rows.iter().map(|r| r.tag.len()).max().unwrap_or(3).max(3);
            writeln!(out, "{:>4}  {:<width$}  {:>12}  {:>6}", "rank", "tag", "variance", "count").map_err(io_err)?;
            let mut previous = 0;
            for r in &table.rows {
                if previous != 0 && r.rank != previous + 1 {
                    writeln!(out, "{:>4}", "...").map_err(io_err)?;
                }
                previous = r.rank;
                writeln!(out, "{:>4}  {:<width$}  {:>12.6}  {:>6}", r.rank, r.tag, r.variance, r.count).map_err(io_err)?;
            }
            Ok(())
        }
    }
}

fn corr(args: &ReportArgs, out: &mut dyn Write) -> CmdResult {
    let state = ServiceState::open(&args.inputs.model, &args.inputs.data)?;
    let matrix = payloads::correlation(&state)?;
    #[derive(Serialize)]
    struct Row<'a> {
        column: &'a str,
        values: &'a [Option<f64>],
    }
    match args.inputs.format {
        Format::Json => writeln!(out, "{}", payloads::to_json(&matrix)).map_err(io_err),
        Format::Jsonl => write_jsonl(
            out,
            matrix.columns.iter().zip(&matrix.values).map(|(c, v)| Row { column: c, values: v }),
        ),
        Format::Text => {
            let width = matrix.columns.iter().map(|c| c.len()).max().unwrap_or(0);
            write!(out, "{:width$}", "").map_err(io_err)?;
            for c in &matrix.columns {
                write!(out, "  {c:>w$}", w = c.len().max(7)).map_err(io_err)?;
            }
            writeln!(out).map_err(io_err)?;
            for (name, row) in matrix.columns.iter().zip(&matrix.values) {
                write!(out, "{name:<width$}").map_err(io_err)?;
                for (c, v) in matrix.columns.iter().zip(row) {
                    let cell = v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
                    write!(out, "  {cell:>w$}", w = c.len().max(7)).map_err(io_err)?;
                }
                writeln!(out).map_err(io_err)?;
            }
            Ok(())
        }
    }
}

fn map(args: &MapArgs, out: &mut dyn Write) -> CmdResult {
    let projector: Projector = args.projector.parse()?;
    let state = ServiceState::open(&args.inputs.model, &args.inputs.data)?;
    let export = payloads::map(&state, projector, args.tags.as_deref())?;
    match args.inputs.format {
        Format::Json => writeln!(out, "{}", payloads::to_json(&export)).map_err(io_err),
        Format::Jsonl => write_jsonl(out, &export.points),
        Format::Text => {
            let width = export.points.iter().map(|p| p.tag.len()).max().unwrap_or(3).max(3);
            writeln!(out, "{:<width$}  {:>12}  {:>12}", "tag", "x", "y").map_err(io_err)?;
            for p in &export.points {
                writeln!(out, "{:<width$}  {:>12.6}  {:>12.6}", p.tag, p.x, p.y).map_err(io_err)?;
            }
            if let Some(r) = export.explained_variance_ratio {
                writeln!(out, "explained variance ratio {r:.4}").map_err(io_err)?;
            }
            Ok(())
        }
    }
}

fn serve(args: &ServeArgs) -> CmdResult {
    let addr = server::bind_address(args.bind.as_deref())?;
    let state = ServiceState::open(&args.model, &args.data)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new(exit::FAILURE, e.to_string()))?;
    runtime.block_on(server::serve(state, addr))
}

fn synth(args: &SynthArgs, out: &mut dyn Write) -> CmdResult {
    let spec = SyntheticSpec {
        n_clusters: args.clusters,
        items_per_cluster: args.per_cluster,
        feature_dim: args.features,
        cluster_spread: args.spread,
        n_generic_tags: args.generic,
        n_specific_tags: args.specific,
        seed: args.seed,
    };
    let dataset = generate_synthetic(&spec)?;
    save_dataset(&dataset, &args.out).map_err(|e| CliError::new(exit::DATA, format!("{}: {e}", args.out.display())))?;
    writeln!(
        out,
        "wrote {} items with {} tags to {}",
        dataset.len(),
        dataset.num_tags(),
        args.out.display()
    )
    .map_err(io_err)
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> CmdResult {
    match &cli.command {
        Command::Train(a) => train(a, out),
        Command::Retrieve(a) => retrieve(a, out),
        Command::Reorder(a) => reorder(a, out),
        Command::Variance(a) => variance(a, out),
        Command::Corr(a) => corr(a, out),
        Command::Map(a) => map(a, out),
        Command::Serve(a) => serve(a),
        Command::Synth(a) => synth(a, out),
    }
}
