//! `patchtext` command-line tool.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use patchtext::masking::{MASK_RATIO, MAX_SPAN};
use patchtext::render::{MAX_PATCHES, MIN_WHITESPACE, PATCH_SIZE};
use patchtext::{RenderConfig, Strategy};

use output::{EXIT_OK, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "patchtext", version, about = "Render text to pixel patches, count them, train a small masked autoencoder and analyse its embeddings")]
struct Cli {
    /// Where to write the run manifest (default: beside the first output).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a corpus to a PXPD patch dump with a JSON sidecar.
    Render(RenderArgs),
    /// Patch and word statistics.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Sample a span mask plan as JSON.
    Mask(MaskArgs),
    /// Train a masked patch autoencoder and write a PXCK checkpoint.
    Train(TrainArgs),
    /// Encode sentences with a checkpoint into a PXEB embedding dump.
    Encode(EncodeArgs),
    /// Similarity metrics over embedding dumps.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Continuous,
    Bigrams,
    Mono,
    Words,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Continuous => Strategy::Continuous,
            StrategyArg::Bigrams => Strategy::Bigrams,
            StrategyArg::Mono => Strategy::Mono,
            StrategyArg::Words => Strategy::Words,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct RenderOpts {
    #[arg(long, value_enum, default_value = "bigrams")]
    strategy: StrategyArg,
    #[arg(long, default_value_t = PATCH_SIZE)]
    patch_size: usize,
    /// Sequence cap, EOS included.
    #[arg(long, default_value_t = MAX_PATCHES)]
    max_patches: usize,
    #[arg(long, default_value_t = MIN_WHITESPACE)]
    min_whitespace: usize,
}

impl RenderOpts {
    fn config(&self) -> RenderConfig {
        RenderConfig {
            patch_size: self.patch_size,
            max_patches: self.max_patches,
            min_whitespace: self.min_whitespace,
            strategy: self.strategy.into(),
        }
    }
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[command(flatten)]
    render: RenderOpts,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand, Debug)]
enum StatsCommand {
    /// Unique patches against sequences processed.
    Curve(CurveArgs),
    /// The most frequent patches as PGM images.
    Topk(TopkArgs),
    /// Sequence-length histogram.
    Lengths(LengthsArgs),
    /// Word frequencies and high/low frequency buckets.
    Wordfreq(WordfreqArgs),
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[command(flatten)]
    render: RenderOpts,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated sequence counts; default doubles from 1 to the corpus size.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args, Debug)]
struct TopkArgs {
    #[command(flatten)]
    render: RenderOpts,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 20)]
    k: usize,
    /// Directory for `rank_<r>_count_<c>.pgm` files and `topk.csv`.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args, Debug)]
struct LengthsArgs {
    #[command(flatten)]
    render: RenderOpts,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args, Debug)]
struct WordfreqArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// CSV `word,count`, most frequent first.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    lowercase: bool,
    /// Also write high/low frequency buckets as JSON.
    #[arg(long)]
    buckets: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    high_k: usize,
    #[arg(long, default_value_t = 100)]
    low_k: usize,
    #[arg(long, default_value_t = 5)]
    low_target: u64,
}

#[derive(Args, Debug)]
struct MaskArgs {
    /// Content patches (EOS excluded).
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = MASK_RATIO)]
    ratio: f64,
    #[arg(long, default_value_t = MAX_SPAN)]
    max_span: usize,
    #[arg(long, env = "PATCHTEXT_SEED", default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TargetNormArg {
    PerPatch,
    Raw,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    render: RenderOpts,
    #[arg(long = "in")]
    input: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Training log CSV (`step,loss,masked_patches`).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, default_value = "desk")]
    preset: String,
    #[arg(long, value_enum, default_value = "per-patch")]
    target_norm: TargetNormArg,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    adam_epsilon: f64,
    #[arg(long, default_value_t = MASK_RATIO)]
    mask_ratio: f64,
    #[arg(long, default_value_t = MAX_SPAN)]
    max_span: usize,
    #[arg(long)]
    fixed_masks: bool,
    #[arg(long, env = "PATCHTEXT_SEED", default_value_t = 0)]
    seed: u64,
    /// Rendering threads; training is single-threaded.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[command(flatten)]
    render: RenderOpts,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Corpus of sentences to encode, one per line.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// TSV `target<TAB>sentence1<TAB>sentence2<TAB>label` with label
    /// T/F or similar/different.
    #[arg(long)]
    wic: Option<PathBuf>,
    /// TSV `sentence1<TAB>sentence2<TAB>gold score`.
    #[arg(long)]
    sts: Option<PathBuf>,
    /// PXEB output; the sidecar goes to `<out>.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DumpArgs {
    #[arg(long)]
    dump: PathBuf,
    /// Annotation sidecar (default `<dump>.json`).
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum AnalyzeCommand {
    /// Similar/different/random target-word similarity distributions.
    Wic(WicArgs),
    /// Self-similarity and intra-sentence similarity per word and layer.
    Selfsim(SelfsimArgs),
    /// High/low frequency bucket similarity distributions.
    Freqbias(FreqbiasArgs),
    /// Spearman correlation with gold scores per layer.
    Sts(StsArgs),
    /// Spearman correlation of two CSV columns.
    Spearman(SpearmanArgs),
}

#[derive(Args, Debug)]
struct WicArgs {
    #[command(flatten)]
    dump: DumpArgs,
    /// Summary CSV; raw values go to `<out>.values.csv`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = patchtext::analysis::RANDOM_BASELINE_PAIRS)]
    baseline_pairs: usize,
    #[arg(long, env = "PATCHTEXT_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SelfsimArgs {
    #[command(flatten)]
    dump: DumpArgs,
    #[arg(long)]
    out: PathBuf,
    /// Words to report; default every word seen in at least `min_sentences` sentences.
    #[arg(long, value_delimiter = ',')]
    words: Vec<String>,
    #[arg(long, default_value_t = 2)]
    min_sentences: usize,
}

#[derive(Args, Debug)]
struct FreqbiasArgs {
    #[command(flatten)]
    dump: DumpArgs,
    /// Bucket JSON written by `stats wordfreq --buckets`.
    #[arg(long)]
    buckets: PathBuf,
    /// Summary CSV; raw values go to `<out>.values.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct StsArgs {
    #[command(flatten)]
    dump: DumpArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SpearmanArgs {
    /// CSV with a header row; the first two columns are compared.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("patchtext: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}

