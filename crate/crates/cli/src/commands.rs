use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use aurafeat::dsp::stft;
use aurafeat::features::{extract, extract_all, FeatureConfig, FeatureKind};
use aurafeat::filterbank::{
    default_bin_freqs, dog_filterbank_for_bins, gammatone_filterbank_for_bins, mel_filterbank_for_bins, FilterKind,
};
use aurafeat::io::{load_config, read_wav, write_atomic, write_feature_matrix, LoadedConfig, MatrixFormat};
use aurafeat::masking::compute_thresholds;
use aurafeat::metrics::{corpus_wer, mean_nwerd, wer, werd, Transcript};
use aurafeat::probe::{probe_feature, reports_to_csv};
use rayon::prelude::*;

use crate::args::{
    Cli, Command, ConfigArgs, ExtractAllArgs, ExtractArgs, FilterbankArgs, MetricsArgs, ProbeArgs, SingleInput,
};

pub const THREADS_ENV: &str = "AURAFEAT_THREADS";

/// A failure with its exit code: 1 for invalid input, 2 for I/O.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn with_path(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }

    fn io(path: &Path, err: std::io::Error) -> Self {
        Self {
            code: 2,
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<aurafeat::Error> for CliError {
    fn from(e: aurafeat::Error) -> Self {
        Self {
            code: if e.is_io() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

struct Context {
    config: FeatureConfig,
    pool: rayon::ThreadPool,
}

fn thread_count(jobs: Option<usize>) -> CliResult<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::validation(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        };
    }
    match jobs {
        Some(0) => Err(CliError::validation("--jobs must be at least 1")),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn resolve_config(cli: &Cli) -> CliResult<FeatureConfig> {
    let loaded = match &cli.config {
        Some(path) => load_config(path)?,
        None => LoadedConfig {
            config: FeatureConfig::default().resolved(),
            notices: Vec::new(),
        },
    };
    let config = if cli.paper_literal {
        loaded.config.paper_literal()
    } else {
        loaded.config
    };
    config.validate()?;
    for note in config.notices() {
        eprintln!("note: {note}");
    }
    Ok(config)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let config = resolve_config(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cli.jobs)?)
        .build()
        .map_err(|e| CliError::validation(format!("cannot start worker pool: {e}")))?;
    let ctx = Context { config, pool };
    match &cli.command {
        Command::Extract(a) => cmd_extract(&ctx, a),
        Command::ExtractAll(a) => cmd_extract_all(&ctx, a),
        Command::Filterbank(a) => cmd_filterbank(&ctx, a),
        Command::MaskThreshold(a) => cmd_mask_threshold(&ctx, a),
        Command::Probe(a) => cmd_probe(&ctx, a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Config(a) => cmd_config(&ctx, a),
    }
}

fn emit(output: Option<&Path>, text: &str) -> CliResult<()> {
    match output {
        Some(path) => Ok(write_atomic(path, text.as_bytes())?),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io(Path::new("<stdout>"), e)),
                _ => Ok(()),
            }
        }
    }
}

fn is_wav(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// Files as given; directories expand to their WAV files in lexicographic order.
fn collect_inputs(args: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for arg in args {
        if arg.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(arg)
                .map_err(|e| CliError::io(arg, e))?
                .map(|entry| entry.map(|e| e.path()).map_err(|e| CliError::io(arg, e)))
                .collect::<CliResult<Vec<_>>>()?
                .into_iter()
                .filter(|p| p.is_file() && is_wav(p))
                .collect();
            found.sort();
            if found.is_empty() {
                return Err(CliError::validation(format!(
                    "{}: no .wav files in directory",
                    arg.display()
                )));
            }
            files.extend(found);
        } else {
            files.push(arg.clone());
        }
    }
    Ok(files)
}

fn parse_format(flag: Option<&str>, output: Option<&Path>) -> CliResult<MatrixFormat> {
    match flag {
        Some(f) => Ok(f.parse()?),
        None => Ok(output.and_then(MatrixFormat::from_path).unwrap_or(MatrixFormat::Afm1)),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned())
}

fn derived_name(dir: &Path, input: &Path, kind: FeatureKind, format: MatrixFormat) -> PathBuf {
    dir.join(format!("{}.{}.{}", stem(input), kind.key(), format.extension()))
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn check_unique(jobs: &[(PathBuf, PathBuf)]) -> CliResult<()> {
    let mut seen = BTreeSet::new();
    for (_, out) in jobs {
        if !seen.insert(out) {
            return Err(CliError::validation(format!(
                "{}: several inputs map to this output",
                out.display()
            )));
        }
    }
    Ok(())
}

/// Runs `work` over `items` on the pool and reports in input order; the first
/// failure in that order wins.
fn run_all<T: Sync, R: Send>(
    ctx: &Context,
    items: &[T],
    work: impl Fn(&T) -> CliResult<R> + Sync + Send,
) -> CliResult<Vec<R>> {
    let results: Vec<CliResult<R>> = ctx.pool.install(|| items.par_iter().map(&work).collect());
    results.into_iter().collect()
}

fn cmd_extract(ctx: &Context, a: &ExtractArgs) -> CliResult<()> {
    let kind = match &a.kind {
        Some(k) => k.parse::<FeatureKind>()?,
        None => ctx.config.kind,
    };
    let cfg = ctx.config.with_kind(kind);
    let inputs = collect_inputs(&a.inputs)?;
    let output = a.out.output.as_deref();
    let format = parse_format(a.format.as_deref(), output)?;

    let single_file = inputs.len() == 1 && !a.inputs[0].is_dir();
    let jobs: Vec<(PathBuf, PathBuf)> = match output {
        Some(out) if single_file && !out.is_dir() => vec![(inputs[0].clone(), out.to_path_buf())],
        Some(dir) => {
            ensure_dir(dir)?;
            inputs
                .iter()
                .map(|i| (i.clone(), derived_name(dir, i, kind, format)))
                .collect()
        }
        None => inputs
            .iter()
            .map(|i| {
                let dir = i.parent().unwrap_or(Path::new("."));
                (i.clone(), derived_name(dir, i, kind, format))
            })
            .collect(),
    };
    check_unique(&jobs)?;

    let written = run_all(ctx, &jobs, |(input, out)| {
        let audio = read_wav(input)?;
        let m = extract(&audio, &cfg).map_err(|e| CliError::from(e).with_path(input))?;
        write_feature_matrix(&m, out, format)?;
        Ok(format!(
            "{} -> {} ({}x{})",
            input.display(),
            out.display(),
            m.frames(),
            m.dims()
        ))
    })?;
    for line in written {
        eprintln!("{line}");
    }
    Ok(())
}

fn cmd_extract_all(ctx: &Context, a: &ExtractAllArgs) -> CliResult<()> {
    let inputs = collect_inputs(&a.inputs)?;
    let format = parse_format(a.format.as_deref(), None)?;
    ensure_dir(&a.output)?;
    let stems: Vec<(PathBuf, PathBuf)> = inputs
        .iter()
        .map(|i| (i.clone(), derived_name(&a.output, i, FeatureKind::LogSpec, format)))
        .collect();
    check_unique(&stems)?;

    let written = run_all(ctx, &inputs, |input| {
        let audio = read_wav(input)?;
        let all = extract_all(&audio, &ctx.config).map_err(|e| CliError::from(e).with_path(input))?;
        for (kind, m) in &all {
            write_feature_matrix(m, derived_name(&a.output, input, *kind, format), format)?;
        }
        Ok(format!("{} -> {} kinds", input.display(), all.len()))
    })?;
    for line in written {
        eprintln!("{line}");
    }
    Ok(())
}

fn cmd_filterbank(ctx: &Context, a: &FilterbankArgs) -> CliResult<()> {
    let cfg = &ctx.config;
    let kind: FilterKind = a.kind.parse()?;
    let bins = match a.n_bins {
        Some(n) => default_bin_freqs(n, cfg.sample_rate),
        None => cfg.stft.bin_freqs(cfg.sample_rate),
    };
    let (n, lo, hi) = (cfg.n_filters, cfg.f_min, cfg.f_max());
    let fb = match kind {
        FilterKind::Mel => mel_filterbank_for_bins(n, &bins, lo, hi)?,
        FilterKind::GammatoneNorm => gammatone_filterbank_for_bins(n, &bins, lo, hi, false)?,
        FilterKind::GammatoneSqNorm => gammatone_filterbank_for_bins(n, &bins, lo, hi, true)?,
        FilterKind::Dog => dog_filterbank_for_bins(n, &bins, lo, hi, cfg.dog_alpha)?,
    };
    emit(a.out.output.as_deref(), &fb.to_csv())
}

fn read_checked_wav(path: &Path, cfg: &FeatureConfig) -> CliResult<aurafeat::dsp::AudioBuffer> {
    let audio = read_wav(path)?;
    if audio.sample_rate() != cfg.sample_rate {
        return Err(CliError::validation(format!(
            "{}: sampled at {} Hz, config expects {} Hz",
            path.display(),
            audio.sample_rate(),
            cfg.sample_rate
        )));
    }
    Ok(audio)
}

fn cmd_mask_threshold(ctx: &Context, a: &SingleInput) -> CliResult<()> {
    let cfg = &ctx.config;
    let audio = read_checked_wav(&a.input, cfg)?;
    let spec = stft(&audio, &cfg.stft).map_err(|e| CliError::from(e).with_path(&a.input))?;
    let theta = compute_thresholds(&spec, cfg.stft.win_length, &cfg.mask)?;
    emit(a.out.output.as_deref(), &theta.to_csv())
}

fn cmd_probe(ctx: &Context, a: &ProbeArgs) -> CliResult<()> {
    let kinds = a
        .kinds
        .iter()
        .map(|k| k.parse::<FeatureKind>())
        .collect::<Result<Vec<_>, _>>()?;
    let clean = read_checked_wav(&a.input, &ctx.config)?;
    let per_kind = run_all(ctx, &kinds, |&kind| {
        Ok(probe_feature(&clean, &ctx.config.with_kind(kind), &a.snrs, a.seed)?)
    })?;
    let reports: Vec<_> = per_kind.into_iter().flatten().collect();
    emit(a.out.output.as_deref(), &reports_to_csv(&reports))
}

/// `id<TAB>text` per line; lines without a tab are keyed by line number.
fn read_transcripts(path: &Path, strip: bool) -> CliResult<BTreeMap<String, Transcript>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, words) = match line.split_once('\t') {
            Some((id, words)) => (id.trim().to_string(), words),
            None => ((i + 1).to_string(), line),
        };
        if out.insert(id.clone(), Transcript::parse_with(words, strip)).is_some() {
            return Err(CliError::validation(format!(
                "{}: duplicate utterance id `{id}`",
                path.display()
            )));
        }
    }
    if out.is_empty() {
        return Err(CliError::validation(format!("{}: no transcripts", path.display())));
    }
    Ok(out)
}

fn read_quality(path: &Path) -> CliResult<BTreeMap<String, f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || CliError::validation(format!("{}:{}: expected `id,score`", path.display(), i + 1));
        let (id, score) = line.rsplit_once(',').ok_or_else(bad)?;
        match score.trim().parse::<f64>() {
            Ok(s) => {
                out.insert(id.trim().to_string(), s);
            }
            Err(_) if i == 0 => continue,
            Err(_) => return Err(bad()),
        }
    }
    Ok(out)
}

/// Hypotheses keyed like the references; a missing hypothesis counts as empty.
fn align<'a>(
    refs: &'a BTreeMap<String, Transcript>,
    hyps: &'a BTreeMap<String, Transcript>,
    path: &Path,
) -> CliResult<Vec<(&'a str, &'a Transcript, &'a Transcript)>> {
    static EMPTY: Transcript = Transcript::EMPTY;
    if let Some(extra) = hyps.keys().find(|k| !refs.contains_key(*k)) {
        return Err(CliError::validation(format!(
            "{}: utterance `{extra}` has no reference",
            path.display()
        )));
    }
    Ok(refs
        .iter()
        .map(|(id, r)| (id.as_str(), r, hyps.get(id).unwrap_or(&EMPTY)))
        .collect())
}

fn cmd_metrics(a: &MetricsArgs) -> CliResult<()> {
    let refs = read_transcripts(&a.reference, a.strip_punctuation)?;
    let hyps = read_transcripts(&a.hyp, a.strip_punctuation)?;
    let noisy = align(&refs, &hyps, &a.hyp)?;
    let noisy_wer = corpus_wer(noisy.iter().map(|(_, r, h)| (*r, *h)))?;
    let mut out = format!("WER {noisy_wer:.4}\n");

    if let Some(clean_path) = &a.clean_hyp {
        let clean_hyps = read_transcripts(clean_path, a.strip_punctuation)?;
        let clean = align(&refs, &clean_hyps, clean_path)?;
        let clean_wer = corpus_wer(clean.iter().map(|(_, r, h)| (*r, *h)))?;
        writeln!(out, "WER_CLEAN {clean_wer:.4}").unwrap();
        writeln!(out, "WERD {:.4}", werd(clean_wer, noisy_wer)).unwrap();

        if let Some(q_path) = &a.quality {
            let quality = read_quality(q_path)?;
            let mut per_utt = Vec::with_capacity(noisy.len());
            for ((id, r, h), (_, _, c)) in noisy.iter().zip(&clean) {
                let q = quality.get(*id).ok_or_else(|| {
                    CliError::validation(format!("{}: no quality score for `{id}`", q_path.display()))
                })?;
                per_utt.push((werd(wer(r, c)?, wer(r, h)?), *q));
            }
            writeln!(out, "NWERD {:.4}", mean_nwerd(&per_utt)?).unwrap();
        }
    }
    emit(None, &out)
}

fn cmd_config(ctx: &Context, a: &ConfigArgs) -> CliResult<()> {
    let loaded = LoadedConfig {
        config: ctx.config.resolved(),
        notices: Vec::new(),
    };
    if a.dump {
        emit(None, &(loaded.to_json_pretty() + "\n"))
    } else {
        emit(None, &format!("config ok, fingerprint {}\n", ctx.config.fingerprint()))
    }
}
