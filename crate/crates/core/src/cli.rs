//! The `leadsheet` command line. [`run`] parses arguments, dispatches and
//! returns everything the process would print, so it can be tested in-process.
//!
//! Output is JSON on stdout; `--pretty` switches to a human-readable view.
//! Diagnostics go to stderr. Exit codes: 0 success, 1 operation failure,
//! 2 usage error.

use std::ffi::OsString;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{self, ConfigError};
use crate::dataset::{self, BoxManifest, PieceRecord, PreprocessOptions, Ratios};
use crate::harte::{AliasTable, DegreeTable, HarteChord, PitchSpelling};
use crate::kern::{self, KernDocument, Severity};
use crate::metrics::{self, Averaging};
use crate::mxl_convert::{ConvertOptions, Converter, KindTable};
use crate::tokenize::{self, EncodeOptions, Strategy, TokenStream, UnknownPolicy, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandResult {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Parser, Debug)]
#[command(name = "leadsheet", version, about = "Jazz lead sheet tools: Harte chords, two-spine kern, tokenisers, OMR metrics and dataset preparation")]
struct Cli {
    /// Human-readable output instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,
    /// Worker threads for batch commands (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory with shorthands.conf, aliases.conf and kinds.conf overrides.
    #[arg(long, global = true, env = config::CONFIG_DIR_ENV)]
    config_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Harte chord labels.
    #[command(subcommand)]
    Chord(ChordCommand),
    /// Two-spine kern documents.
    #[command(subcommand)]
    Kern(KernCommand),
    /// Tokenisation and vocabularies.
    #[command(subcommand)]
    Tok(TokCommand),
    /// CER, WER and LER between reference and hypothesis files or directories.
    Score(ScoreArgs),
    /// MusicXML (.xml, .musicxml, .mxl) to kern.
    Convert(ConvertArgs),
    /// Piece-level train/val/test split.
    Split(SplitArgs),
    /// Pair staff bounding boxes with kern regions.
    Regions(RegionsArgs),
    /// Normalise score images to 1x128x1000 grayscale.
    Preprocess(PreprocessArgs),
}

#[derive(Subcommand, Debug)]
enum ChordCommand {
    /// Parse and validate chords.
    Parse { chords: Vec<String> },
    /// Report every rule a chord breaks.
    Validate { chords: Vec<String> },
    /// Map a written chord-quality symbol to Harte.
    Normalize {
        symbol: String,
        #[arg(long, default_value = "C")]
        root: String,
    },
}

#[derive(Args, Debug)]
struct Inputs {
    /// Files, directories, glob patterns, or `-` for stdin.
    #[arg(required = true)]
    inputs: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum KernCommand {
    /// Parse into the JSON line model.
    Parse(Inputs),
    /// Structural and musical diagnostics.
    Validate(Inputs),
    /// Split at linebreak markers.
    Regions {
        #[command(flatten)]
        inputs: Inputs,
        /// Plain fragments without header, clef, key or terminator.
        #[arg(long)]
        no_context: bool,
    },
    /// Remove comments and measure numbers.
    Strip {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        keep_linebreaks: bool,
    },
}

#[derive(Args, Debug)]
struct StrategyArg {
    #[arg(long, default_value = "medium", value_parser = parse_strategy)]
    strategy: Strategy,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse()
}

#[derive(Subcommand, Debug)]
enum TokCommand {
    /// Tokenize kern text (or `kern parse` JSON) and optionally map to ids.
    Encode {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        strategy: StrategyArg,
        /// Vocabulary JSON; without it only tokens are printed.
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Wrap ids in <bos> ... <eos>.
        #[arg(long)]
        framing: bool,
        /// Map unknown tokens to <unk> instead of failing.
        #[arg(long)]
        unk: bool,
    },
    /// Ids (a JSON array, or an object with an `ids` field) back to kern.
    Decode {
        /// File with ids, or `-` for stdin.
        #[arg(default_value = "-")]
        input: String,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        framing: bool,
    },
    /// Build a vocabulary from a corpus.
    Vocab {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        strategy: StrategyArg,
        /// Reserve an <unk> token.
        #[arg(long)]
        unk: bool,
        /// Write the vocabulary here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    hyp: PathBuf,
    /// Average per-pair ratios instead of pooling edit counts.
    #[arg(long = "macro")]
    macro_average: bool,
    /// Include a line-level diff per pair.
    #[arg(long)]
    diff: bool,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Keep only the top voice instead of failing on polyphony.
    #[arg(long)]
    top_voice: bool,
    /// Fail when a harmony's display text contradicts its kind.
    #[arg(long)]
    strict_harmony: bool,
    /// Lyrics are never converted; only `no` is accepted.
    #[arg(long, default_value = "no", value_parser = ["no"])]
    keep_lyrics: String,
    /// Write `<stem>.krn` files here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SplitArgs {
    /// JSON array of piece records.
    pieces: PathBuf,
    #[arg(long, default_value = "0.7,0.1,0.2")]
    ratios: Ratios,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fail when multi-copy pieces alone exceed the train share.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RegionsArgs {
    /// Kern score.
    kern: PathBuf,
    /// Bounding-box manifest JSON.
    #[arg(long)]
    boxes: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    out_dir: PathBuf,
    /// Otsu binarisation.
    #[arg(long)]
    binarize: bool,
}

/// Run with the process's stdin.
pub fn run<I, T>(argv: I) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_stdin(argv, &mut std::io::stdin())
}

/// Run with an explicit stdin, read only when an input is `-`.
pub fn run_with_stdin<I, T>(argv: I, stdin: &mut dyn Read) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                CommandResult { exit_code: 2, stdout: String::new(), stderr: text }
            } else {
                CommandResult { exit_code: 0, stdout: text, stderr: String::new() }
            };
        }
    };
    let mut ctx = match Context::new(&cli, stdin) {
        Ok(ctx) => ctx,
        Err(msg) => return CommandResult { exit_code: 2, stdout: String::new(), stderr: format!("{msg}\n") },
    };
    let outcome = match &cli.command {
        Command::Chord(c) => ctx.chord(c),
        Command::Kern(c) => ctx.kern(c),
        Command::Tok(c) => ctx.tok(c),
        Command::Score(a) => ctx.score(a),
        Command::Convert(a) => ctx.convert(a),
        Command::Split(a) => ctx.split(a),
        Command::Regions(a) => ctx.regions(a),
        Command::Preprocess(a) => ctx.preprocess(a),
    };
    if let Err(msg) = outcome {
        ctx.errors.push(msg);
    }
    let mut stderr = String::new();
    for w in &ctx.warnings {
        stderr.push_str(&format!("warning: {w}\n"));
    }
    for e in &ctx.errors {
        stderr.push_str(&format!("error: {e}\n"));
    }
    if ctx.errors.len() > 1 {
        stderr.push_str(&format!("{} errors\n", ctx.errors.len()));
    }
    CommandResult { exit_code: i32::from(!ctx.errors.is_empty()), stdout: ctx.out, stderr }
}

struct Context<'a> {
    pretty: bool,
    pool: rayon::ThreadPool,
    degrees: DegreeTable,
    aliases: AliasTable,
    kinds: KindTable,
    stdin: &'a mut dyn Read,
    stdin_text: Option<String>,
    out: String,
    warnings: Vec<String>,
    errors: Vec<String>,
}

type Outcome = Result<(), String>;

/// Display name and contents, or the read error.
type Input = (String, Result<String, String>);

fn load_override<T>(dir: Option<&Path>, name: &str, standard: impl Fn() -> T, parse: impl Fn(&str) -> Result<T, ConfigError>) -> Result<T, String> {
    let Some(dir) = dir else { return Ok(standard()) };
    match config::read_optional(dir, name) {
        Ok(Some(text)) => parse(&text).map_err(|e| format!("{}: {e}", dir.join(name).display())),
        Ok(None) => Ok(standard()),
        Err(e) => Err(format!("{}: {e}", dir.join(name).display())),
    }
}

impl<'a> Context<'a> {
    fn new(cli: &Cli, stdin: &'a mut dyn Read) -> Result<Self, String> {
        let dir = cli.config_dir.as_deref();
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = cli.jobs {
            if j == 0 {
                return Err("--jobs must be at least 1".into());
            }
            builder = builder.num_threads(j);
        }
        Ok(Context {
            pretty: cli.pretty,
            pool: builder.build().map_err(|e| e.to_string())?,
            degrees: load_override(dir, "shorthands.conf", || DegreeTable::standard().clone(), DegreeTable::with_overrides)?,
            aliases: load_override(dir, "aliases.conf", || AliasTable::standard().clone(), AliasTable::with_overrides)?,
            kinds: load_override(dir, "kinds.conf", || KindTable::standard().clone(), KindTable::with_overrides)?,
            stdin,
            stdin_text: None,
            out: String::new(),
            warnings: Vec::new(),
            errors: Vec::new(),
        })
    }

    fn emit_json(&mut self, value: &impl Serialize) {
        let text = if self.pretty { serde_json::to_string_pretty(value) } else { serde_json::to_string(value) };
        self.out.push_str(&text.expect("JSON output serializes"));
        self.out.push('\n');
    }

    fn emit_text(&mut self, text: &str) {
        self.out.push_str(text);
        if !text.ends_with('\n') && !text.is_empty() {
            self.out.push('\n');
        }
    }

    fn stdin(&mut self) -> Result<String, String> {
        if self.stdin_text.is_none() {
            let mut text = String::new();
            self.stdin.read_to_string(&mut text).map_err(|e| format!("<stdin>: {e}"))?;
            self.stdin_text = Some(text);
        }
        Ok(self.stdin_text.clone().unwrap_or_default())
    }

    /// Expand inputs and read them as text, in path order.
    fn read_inputs(&mut self, inputs: &[String], exts: &[&str]) -> Result<Vec<Input>, String> {
        let mut out = Vec::new();
        for source in expand_inputs(inputs, exts)? {
            match source {
                Source::Stdin => out.push(("<stdin>".to_string(), self.stdin())),
                Source::File(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()));
                    out.push((p.display().to_string(), text));
                }
            }
        }
        Ok(out)
    }

    /// Apply `f` to every input in parallel, collecting failures.
    fn batch<T: Send>(
        &mut self,
        inputs: &[String],
        exts: &[&str],
        f: impl Fn(&str, &str) -> Result<T, String> + Sync,
    ) -> Result<Vec<(String, T)>, String> {
        let files = self.read_inputs(inputs, exts)?;
        let results: Vec<(String, Result<T, String>)> = self.pool.install(|| {
            files
                .into_par_iter()
                .map(|(name, text)| {
                    let r = text.and_then(|t| f(&name, &t).map_err(|e| format!("{name}: {e}")));
                    (name, r)
                })
                .collect()
        });
        let mut ok = Vec::new();
        for (name, r) in results {
            match r {
                Ok(v) => ok.push((name, v)),
                Err(e) => self.errors.push(e),
            }
        }
        Ok(ok)
    }

    /// One value per input: bare for a single input, else keyed by path.
    fn emit_batch<T: Serialize>(&mut self, results: &[(String, T)], single: bool) {
        if single && results.len() == 1 && self.errors.is_empty() {
            self.emit_json(&results[0].1);
        } else {
            let items: Vec<Value> = results.iter().map(|(p, v)| json!({ "path": p, "result": v })).collect();
            self.emit_json(&items);
        }
    }

    fn chord(&mut self, cmd: &ChordCommand) -> Outcome {
        match cmd {
            ChordCommand::Parse { chords } => {
                let mut items = Vec::new();
                for text in chords {
                    match self.degrees.parse_chord(text) {
                        Ok(c) => items.push(chord_json(&c, &self.degrees)),
                        Err(e) => self.errors.push(format!("{text}: {e}")),
                    }
                }
                if self.pretty {
                    for item in &items {
                        let line = format!("{}\n", item["chord"].as_str().unwrap_or_default());
                        self.out.push_str(&line);
                    }
                } else if items.len() == 1 && chords.len() == 1 {
                    self.emit_json(&items[0]);
                } else {
                    self.emit_json(&items);
                }
            }
            ChordCommand::Validate { chords } => {
                let mut items = Vec::new();
                for text in chords {
                    match crate::harte::parse_chord_syntax(text) {
                        Ok(c) => {
                            let v = self.degrees.validate_chord(&c);
                            if !v.is_ok() {
                                self.errors.push(format!("{text}: invalid"));
                            }
                            let violations: Vec<Value> = v
                                .violations
                                .iter()
                                .map(|x| json!({ "severity": if x.is_warning() { "warning" } else { "error" }, "message": x.to_string() }))
                                .collect();
                            items.push(json!({ "chord": text, "valid": v.is_ok(), "violations": violations }));
                        }
                        Err(e) => {
                            self.errors.push(format!("{text}: {e}"));
                            items.push(json!({ "chord": text, "valid": false, "violations": [{ "severity": "error", "message": e.to_string() }] }));
                        }
                    }
                }
                if items.len() == 1 {
                    self.emit_json(&items[0]);
                } else {
                    self.emit_json(&items);
                }
            }
            ChordCommand::Normalize { symbol, root } => {
                let root: PitchSpelling = root.parse().map_err(|e| format!("--root {root:?}: {e}"))?;
                let chord = self.aliases.normalize(symbol, root).map_err(|e| e.to_string())?;
                let chord = self.degrees.canonicalize(&chord);
                if self.pretty {
                    self.emit_text(&chord.to_string());
                } else {
                    self.emit_json(&json!({ "input": symbol, "chord": chord.to_string() }));
                }
            }
        }
        Ok(())
    }

    fn kern(&mut self, cmd: &KernCommand) -> Outcome {
        let exts = &["krn", "kern"];
        match cmd {
            KernCommand::Parse(i) => {
                let docs = self.batch(&i.inputs, exts, |_, t| kern::parse_kern(t).map_err(|e| e.to_string()))?;
                self.emit_batch(&docs, i.inputs.len() == 1);
            }
            KernCommand::Validate(i) => {
                let reports = self.batch(&i.inputs, exts, |_, t| {
                    let doc = kern::parse_kern_lines(t).map_err(|e| e.to_string())?;
                    Ok(kern::validate_document(&doc))
                })?;
                for (path, diags) in &reports {
                    for d in diags.iter().filter(|d| d.severity == Severity::Error) {
                        let at = d.line.map(|l| format!(":{l}")).unwrap_or_default();
                        self.errors.push(format!("{path}{at}: {}", d.message));
                    }
                }
                let items: Vec<Value> = reports
                    .iter()
                    .map(|(p, d)| json!({ "path": p, "valid": d.iter().all(|x| x.severity != Severity::Error), "diagnostics": d }))
                    .collect();
                self.emit_json(&items);
            }
            KernCommand::Regions { inputs, no_context } => {
                let include = !*no_context;
                let regions = self.batch(&inputs.inputs, exts, |_, t| {
                    let doc = kern::parse_kern(t).map_err(|e| e.to_string())?;
                    Ok(kern::split_regions(&doc, include).iter().map(KernDocument::to_string).collect::<Vec<_>>())
                })?;
                if self.pretty {
                    for (_, rs) in &regions {
                        let text = rs.join(&format!("{}\n", kern::LINEBREAK_MARKER));
                        self.emit_text(&text);
                    }
                } else {
                    self.emit_batch(&regions, inputs.inputs.len() == 1);
                }
            }
            KernCommand::Strip { inputs, keep_linebreaks } => {
                let keep = *keep_linebreaks;
                let stripped = self.batch(&inputs.inputs, exts, |_, t| {
                    let doc = kern::parse_kern(t).map_err(|e| e.to_string())?;
                    Ok(kern::strip_annotations(&doc, keep).to_string())
                })?;
                if self.pretty {
                    for (_, text) in &stripped {
                        self.emit_text(text);
                    }
                } else {
                    self.emit_batch(&stripped, inputs.inputs.len() == 1);
                }
            }
        }
        Ok(())
    }

    fn tok(&mut self, cmd: &TokCommand) -> Outcome {
        let exts = &["krn", "kern", "json"];
        match cmd {
            TokCommand::Encode { inputs, strategy, vocab, framing, unk } => {
                let strategy = strategy.strategy;
                let vocab = vocab.as_deref().map(read_vocab).transpose()?;
                let options = EncodeOptions {
                    framing: *framing,
                    unknown: if *unk { UnknownPolicy::Substitute } else { UnknownPolicy::Error },
                };
                let results = self.batch(&inputs.inputs, exts, |_, text| {
                    let stream = tokenize_input(text, strategy)?;
                    match &vocab {
                        Some(v) => {
                            let ids = tokenize::encode(&stream, v, options).map_err(|e| e.to_string())?;
                            Ok(json!({ "strategy": strategy, "ids": ids }))
                        }
                        None => Ok(json!({ "strategy": strategy, "tokens": stream.tokens })),
                    }
                })?;
                self.emit_batch(&results, inputs.inputs.len() == 1);
            }
            TokCommand::Decode { input, vocab, framing } => {
                let vocab = read_vocab(vocab)?;
                let text = if input == "-" {
                    self.stdin()?
                } else {
                    std::fs::read_to_string(input).map_err(|e| format!("{input}: {e}"))?
                };
                let value: Value = serde_json::from_str(&text).map_err(|e| format!("{input}: {e}"))?;
                let ids_value = value.get("ids").cloned().unwrap_or(value);
                let ids: Vec<u32> = serde_json::from_value(ids_value).map_err(|e| format!("{input}: expected a list of ids: {e}"))?;
                let stream = tokenize::decode(&ids, &vocab, *framing).map_err(|e| format!("{input}: {e}"))?;
                let kern = tokenize::detokenize(&stream).map_err(|e| format!("{input}: {e}"))?;
                if self.pretty {
                    self.emit_text(&kern);
                } else {
                    self.emit_json(&json!({ "kern": kern }));
                }
            }
            TokCommand::Vocab { inputs, strategy, unk, out } => {
                let files = self.read_inputs(&inputs.inputs, &["krn", "kern"])?;
                let mut corpus = Vec::new();
                for (name, text) in files {
                    match text {
                        Ok(t) => corpus.push((name, t)),
                        Err(e) => self.errors.push(e),
                    }
                }
                if !self.errors.is_empty() {
                    return Ok(());
                }
                let strategy = strategy.strategy;
                let vocab = self
                    .pool
                    .install(|| tokenize::build_vocabulary(&corpus, strategy, *unk))
                    .map_err(|e| e.to_string())?;
                let text = vocab.to_json();
                if let Some(path) = out {
                    std::fs::write(path, &text).map_err(|e| format!("{}: {e}", path.display()))?;
                }
                self.emit_text(&text);
            }
        }
        Ok(())
    }

    fn score(&mut self, args: &ScoreArgs) -> Outcome {
        let pairs = pair_files(&args.reference, &args.hyp)?;
        let mut texts = Vec::new();
        let mut names = Vec::new();
        for (name, r, h) in pairs {
            let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
            match (read(&r), h.as_deref().map(read)) {
                (Ok(rt), Some(Ok(ht))) => {
                    names.push(name);
                    texts.push((rt, ht));
                }
                (Err(e), _) | (_, Some(Err(e))) => self.errors.push(e),
                (_, None) => self.errors.push(format!("{name}: no hypothesis file")),
            }
        }
        // Empty references are reported per file and left out of the totals.
        let mut kept = Vec::new();
        for (name, (r, h)) in names.into_iter().zip(texts) {
            match metrics::edit_report(&r, &h) {
                Ok(_) => kept.push((name, r, h)),
                Err(e) => self.errors.push(format!("{name}: {e}")),
            }
        }
        if kept.is_empty() {
            return Err("no scorable pairs".into());
        }
        let averaging = if args.macro_average { Averaging::Macro } else { Averaging::Micro };
        let pair_texts: Vec<(&str, &str)> = kept.iter().map(|(_, r, h)| (r.as_str(), h.as_str())).collect();
        let report = self.pool.install(|| metrics::corpus_report(&pair_texts, averaging)).map_err(|e| e.to_string())?;
        if self.pretty {
            let mut table = format!("{:<40} {:>8} {:>8} {:>8}\n", "file", "CER%", "WER%", "LER%");
            for ((name, r, h), p) in kept.iter().zip(&report.pairs) {
                table.push_str(&format!("{:<40} {:>8.2} {:>8.2} {:>8.2}\n", name, p.cer * 100.0, p.wer * 100.0, p.ler * 100.0));
                if args.diff && p.ler > 0.0 {
                    table.push_str(&metrics::render_alignment(r, h));
                }
            }
            let a = &report.aggregate;
            table.push_str(&format!("{:<40} {:>8.2} {:>8.2} {:>8.2}\n", "total", a.cer * 100.0, a.wer * 100.0, a.ler * 100.0));
            self.emit_text(&table);
        } else {
            let pairs: Vec<Value> = kept
                .iter()
                .zip(&report.pairs)
                .map(|((name, r, h), p)| {
                    let mut v = json!({ "path": name, "cer": p.cer, "wer": p.wer, "ler": p.ler, "counts": { "characters": p.characters, "words": p.words, "lines": p.lines } });
                    if args.diff {
                        v["diff"] = json!(metrics::render_alignment(r, h));
                    }
                    v
                })
                .collect();
            let a = &report.aggregate;
            self.emit_json(&json!({
                "cer": a.cer, "wer": a.wer, "ler": a.ler,
                "averaging": averaging,
                "counts": { "characters": a.characters, "words": a.words, "lines": a.lines },
                "pairs": pairs,
            }));
        }
        Ok(())
    }

    fn convert(&mut self, args: &ConvertArgs) -> Outcome {
        let converter = Converter {
            kinds: self.kinds.clone(),
            degrees: self.degrees.clone(),
            aliases: self.aliases.clone(),
            options: ConvertOptions { top_voice: args.top_voice, strict_harmony: args.strict_harmony },
        };
        let sources = expand_inputs(&args.inputs.inputs, &["xml", "musicxml", "mxl"])?;
        let mut files = Vec::new();
        for s in sources {
            match s {
                Source::Stdin => files.push(("<stdin>".to_string(), None, self.stdin())),
                Source::File(p) => {
                    let text = crate::mxl_convert::read_score_file(&p).map_err(|e| e.to_string());
                    files.push((p.display().to_string(), Some(p), text));
                }
            }
        }
        let results: Vec<_> = self.pool.install(|| {
            files
                .into_par_iter()
                .map(|(name, path, text)| {
                    let conv = text.and_then(|t| converter.score(&t).map_err(|e| format!("{name}: {e}")));
                    (name, path, conv)
                })
                .collect()
        });
        let mut items = Vec::new();
        for (name, path, conv) in results {
            let conv = match conv {
                Ok(c) => c,
                Err(e) => {
                    self.errors.push(e);
                    continue;
                }
            };
            for w in &conv.warnings {
                let at = w.measure.as_deref().map(|m| format!(" measure {m}")).unwrap_or_default();
                self.warnings.push(format!("{name}{at}: {}", w.message));
            }
            let text = conv.document.to_string();
            if let (Some(dir), Some(path)) = (&args.out_dir, &path) {
                let stem = path.file_stem().unwrap_or_default();
                let target = dir.join(stem).with_extension("krn");
                std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&target, &text)).map_err(|e| format!("{}: {e}", target.display()))?;
            }
            items.push((name, text, conv.warnings));
        }
        if self.pretty {
            for (_, text, _) in &items {
                self.emit_text(text);
            }
        } else {
            let values: Vec<(String, Value)> =
                items.into_iter().map(|(n, text, w)| (n, json!({ "kern": text, "warnings": w }))).collect();
            self.emit_batch(&values, args.inputs.inputs.len() == 1);
        }
        Ok(())
    }

    fn split(&mut self, args: &SplitArgs) -> Outcome {
        let text = std::fs::read_to_string(&args.pieces).map_err(|e| format!("{}: {e}", args.pieces.display()))?;
        let pieces: Vec<PieceRecord> = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", args.pieces.display()))?;
        let manifest =
            dataset::make_split(&pieces, args.ratios, args.seed, args.strict).map_err(|e| format!("{}: {e}", args.pieces.display()))?;
        self.warnings.extend(manifest.warnings.iter().cloned());
        let json = manifest.to_json();
        if let Some(out) = &args.out {
            std::fs::write(out, format!("{json}\n")).map_err(|e| format!("{}: {e}", out.display()))?;
        }
        self.emit_json(&manifest);
        Ok(())
    }

    fn regions(&mut self, args: &RegionsArgs) -> Outcome {
        let kern_text = std::fs::read_to_string(&args.kern).map_err(|e| format!("{}: {e}", args.kern.display()))?;
        let doc = kern::parse_kern(&kern_text).map_err(|e| format!("{}: {e}", args.kern.display()))?;
        let boxes_text = std::fs::read_to_string(&args.boxes).map_err(|e| format!("{}: {e}", args.boxes.display()))?;
        let manifest: BoxManifest = serde_json::from_str(&boxes_text).map_err(|e| format!("{}: {e}", args.boxes.display()))?;
        let records = dataset::build_region_records(&doc, &manifest).map_err(|e| format!("{}: {e}", args.kern.display()))?;
        if let Some(out) = &args.out {
            let text = serde_json::to_string_pretty(&records).expect("records serialize");
            std::fs::write(out, format!("{text}\n")).map_err(|e| format!("{}: {e}", out.display()))?;
        }
        self.emit_json(&records);
        Ok(())
    }

    fn preprocess(&mut self, args: &PreprocessArgs) -> Outcome {
        let sources = expand_inputs(&args.inputs.inputs, &["png", "jpg", "jpeg"])?;
        let paths: Vec<PathBuf> = sources
            .into_iter()
            .filter_map(|s| match s {
                Source::File(p) => Some(p),
                Source::Stdin => None,
            })
            .collect();
        std::fs::create_dir_all(&args.out_dir).map_err(|e| format!("{}: {e}", args.out_dir.display()))?;
        let options = PreprocessOptions { binarize: args.binarize };
        let results: Vec<Result<Value, String>> = self.pool.install(|| {
            paths
                .par_iter()
                .map(|p| {
                    let img = dataset::preprocess_image(p, options).map_err(|e| e.to_string())?;
                    let target = args.out_dir.join(p.file_stem().unwrap_or_default()).with_extension("png");
                    img.save(&target).map_err(|e| format!("{}: {e}", target.display()))?;
                    Ok(json!({
                        "path": p.display().to_string(),
                        "output": target.display().to_string(),
                        "shape": img.shape(),
                        "content_width": img.content_width,
                        "content_height": img.content_height,
                    }))
                })
                .collect()
        });
        let mut items = Vec::new();
        for r in results {
            match r {
                Ok(v) => items.push(v),
                Err(e) => self.errors.push(e),
            }
        }
        self.emit_json(&items);
        Ok(())
    }
}

fn chord_json(c: &HarteChord, degrees: &DegreeTable) -> Value {
    let mut v = json!({
        "chord": c.to_string(),
        "root": c.root.to_string(),
        "shorthand": c.shorthand.to_string(),
        "extensions": c.extensions.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "degrees": degrees.degree_set(c).iter().map(ToString::to_string).collect::<Vec<_>>(),
    });
    if let Some(b) = c.bass {
        v["bass"] = json!(b.to_string());
    }
    v
}

fn read_vocab(path: &Path) -> Result<Vocabulary, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Vocabulary::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Kern text, or the JSON document printed by `kern parse`.
fn tokenize_input(text: &str, strategy: Strategy) -> Result<TokenStream, String> {
    if text.trim_start().starts_with('{') {
        let doc: KernDocument = serde_json::from_str(text).map_err(|e| format!("not a kern document: {e}"))?;
        tokenize::tokenize_document(&doc, strategy).map_err(|e| e.to_string())
    } else {
        tokenize::tokenize(text, strategy).map_err(|e| e.to_string())
    }
}

enum Source {
    Stdin,
    File(PathBuf),
}

fn has_ext(p: &Path, exts: &[&str]) -> bool {
    p.extension().and_then(|e| e.to_str()).is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

/// `-`, files, directories (walked for `exts`) and glob patterns, each
/// group sorted by path.
fn expand_inputs(inputs: &[String], exts: &[&str]) -> Result<Vec<Source>, String> {
    let mut out = Vec::new();
    let mut files = Vec::new();
    for input in inputs {
        if input == "-" {
            out.push(Source::Stdin);
            continue;
        }
        let path = Path::new(input);
        if path.is_dir() {
            for entry in walkdir::WalkDir::new(path) {
                let entry = entry.map_err(|e| format!("{input}: {e}"))?;
                if entry.file_type().is_file() && has_ext(entry.path(), exts) {
                    files.push(entry.into_path());
                }
            }
        } else if input.contains(['*', '?', '[']) && !path.exists() {
            let matches = glob::glob(input).map_err(|e| format!("{input}: {e}"))?;
            let before = files.len();
            for m in matches {
                files.push(m.map_err(|e| format!("{input}: {e}"))?);
            }
            if files.len() == before {
                return Err(format!("{input}: pattern matches no files"));
            }
        } else {
            files.push(path.to_path_buf());
        }
    }
    files.sort();
    files.dedup();
    out.extend(files.into_iter().map(Source::File));
    Ok(out)
}

/// Reference/hypothesis pairs: two files, or two directories matched by
/// relative path.
fn pair_files(reference: &Path, hyp: &Path) -> Result<Vec<(String, PathBuf, Option<PathBuf>)>, String> {
    if reference.is_dir() {
        if !hyp.is_dir() {
            return Err(format!("{}: --hyp must be a directory when --ref is", hyp.display()));
        }
        let mut out = Vec::new();
        for entry in walkdir::WalkDir::new(reference).sort_by_file_name() {
            let entry = entry.map_err(|e| format!("{}: {e}", reference.display()))?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry.path().strip_prefix(reference).expect("walked under reference");
            let h = hyp.join(rel);
            out.push((rel.display().to_string(), entry.path().to_path_buf(), h.is_file().then_some(h)));
        }
        return Ok(out);
    }
    Ok(vec![(reference.display().to_string(), reference.to_path_buf(), hyp.is_file().then(|| hyp.to_path_buf()))])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> CommandResult {
        let argv = std::iter::once("leadsheet").chain(args.iter().copied());
        run_with_stdin(argv, &mut std::io::empty())
    }

    #[test]
    fn chord_parse_json() {
        let r = run_args(&["chord", "parse", "C:7(b9)"]);
        assert_eq!(r.exit_code, 0, "{}", r.stderr);
        let v: Value = serde_json::from_str(&r.stdout).unwrap();
        assert_eq!(v["root"], "C");
        assert_eq!(v["shorthand"], "7");
        assert_eq!(v["extensions"], json!(["b9"]));
    }

    #[test]
    fn usage_and_operation_errors() {
        assert_eq!(run_args(&["chord", "frobnicate"]).exit_code, 2);
        assert_eq!(run_args(&[]).exit_code, 2);
        let help = run_args(&["chord", "parse", "--help"]);
        assert_eq!(help.exit_code, 0);
        assert!(help.stdout.contains("Usage"));
        let r = run_args(&["chord", "parse", "C:maj(7,b9)"]);
        assert_eq!(r.exit_code, 1);
        assert!(r.stderr.contains("C:maj7(b9)"), "{}", r.stderr);
    }

    #[test]
    fn normalize_symbol() {
        let r = run_args(&["chord", "normalize", "7b9", "--root", "Eb"]);
        let v: Value = serde_json::from_str(&r.stdout).unwrap();
        assert_eq!(v["chord"], "Eb:7(b9)");
    }

    #[test]
    fn stdin_kern_round_trip_through_json() {
        let text = "**kern\t**harte\n4a\tD:min7\n*-\t*-\n";
        let parsed = run_with_stdin(["leadsheet", "kern", "parse", "-"], &mut text.as_bytes());
        assert_eq!(parsed.exit_code, 0, "{}", parsed.stderr);
        let enc = run_with_stdin(["leadsheet", "tok", "encode", "-", "--strategy", "word"], &mut parsed.stdout.as_bytes());
        assert_eq!(enc.exit_code, 0, "{}", enc.stderr);
        let v: Value = serde_json::from_str(&enc.stdout).unwrap();
        assert_eq!(v["tokens"][4], "4a");
    }
}
