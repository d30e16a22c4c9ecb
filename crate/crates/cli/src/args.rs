use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "aurafeat",
    version,
    about = "Acoustic feature extraction and robustness probing"
)]
pub struct Cli {
    /// JSON feature config; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Use the literal spreading-function sign and mu_t = 2.
    #[arg(long, global = true)]
    pub paper_literal: bool,

    /// Worker threads. AURAFEAT_THREADS, when set, takes precedence.
    #[arg(long, short = 'j', global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract one feature kind from WAV files or directories of WAV files.
    Extract(ExtractArgs),
    /// Extract all nine feature kinds for each input.
    ExtractAll(ExtractAllArgs),
    /// Dump a filterbank as CSV (center frequency, then coefficients).
    Filterbank(FilterbankArgs),
    /// Per-frame global masking thresholds (dB SPL) for a WAV file.
    MaskThreshold(SingleInput),
    /// Feature distortion under white noise over an SNR grid.
    Probe(ProbeArgs),
    /// WER, WERD and NWERD from transcript files.
    Metrics(MetricsArgs),
    /// Print the fully resolved configuration.
    Config(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output file, or directory when there are several inputs.
    #[arg(long, short = 'o', value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Feature kind; defaults to the config's kind.
    #[arg(long, short = 'k')]
    pub kind: Option<String>,

    /// csv or afm1; inferred from the output extension otherwise.
    #[arg(long, short = 'f')]
    pub format: Option<String>,

    #[arg(required = true, value_name = "INPUT")]
    pub inputs: Vec<PathBuf>,

    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct ExtractAllArgs {
    /// csv or afm1 (default afm1).
    #[arg(long, short = 'f')]
    pub format: Option<String>,

    #[arg(required = true, value_name = "INPUT")]
    pub inputs: Vec<PathBuf>,

    /// Output directory.
    #[arg(long, short = 'o', value_name = "DIR")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterbankArgs {
    /// mel, gammatone, gammatone-sq or dog.
    #[arg(long = "type", short = 't', default_value = "mel")]
    pub kind: String,

    /// Number of frequency bins; defaults to the STFT's.
    #[arg(long)]
    pub n_bins: Option<usize>,

    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct SingleInput {
    #[arg(value_name = "INPUT")]
    pub input: PathBuf,

    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Comma-separated feature kinds.
    #[arg(long, value_delimiter = ',', required = true)]
    pub kinds: Vec<String>,

    /// Comma-separated target SNRs in dB.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub snrs: Vec<f64>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(value_name = "INPUT")]
    pub input: PathBuf,

    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Reference transcripts, one `id<TAB>text` per line.
    #[arg(long = "ref", value_name = "PATH")]
    pub reference: PathBuf,

    /// Hypotheses on the noisy condition.
    #[arg(long, value_name = "PATH")]
    pub hyp: PathBuf,

    /// Hypotheses on the clean condition; enables WERD.
    #[arg(long, value_name = "PATH")]
    pub clean_hyp: Option<PathBuf>,

    /// Per-utterance quality scores as `id,score` CSV; enables NWERD.
    #[arg(long, value_name = "PATH", requires = "clean_hyp")]
    pub quality: Option<PathBuf>,

    /// Drop punctuation other than apostrophes before scoring.
    #[arg(long)]
    pub strip_punctuation: bool,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Print the resolved config as JSON.
    #[arg(long)]
    pub dump: bool,
}
