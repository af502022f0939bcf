//! Levenshtein-based error rates between a reference and a predicted kern
//! text: CER over grapheme clusters, WER over whitespace-separated words and
//! LER over whole lines. Line endings are normalised to `\n` first.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use unicode_segmentation::UnicodeSegmentation;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("reference has no {granularity}s")]
    EmptyReference { granularity: Granularity },
    #[error("pair {index}: {source}")]
    InPair { index: usize, source: Box<MetricsError> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Character,
    Word,
    Line,
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Granularity::Character => "character",
            Granularity::Word => "word",
            Granularity::Line => "line",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EditOp {
    Match,
    Substitute,
    Insert,
    Delete,
}

/// One column of an alignment. `Insert` has no reference index and
/// `Delete` no hypothesis index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AlignStep {
    pub op: EditOp,
    pub reference: Option<usize>,
    pub hypothesis: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EditCounts {
    pub insertions: usize,
    pub deletions: usize,
    pub substitutions: usize,
    pub reference_length: usize,
}

impl EditCounts {
    pub fn distance(&self) -> usize {
        self.insertions + self.deletions + self.substitutions
    }

    /// Edits per reference symbol; NaN when the reference is empty.
    pub fn ratio(&self) -> f64 {
        self.distance() as f64 / self.reference_length as f64
    }

    fn add(&mut self, other: &EditCounts) {
        self.insertions += other.insertions;
        self.deletions += other.deletions;
        self.substitutions += other.substitutions;
        self.reference_length += other.reference_length;
    }
}

/// Minimal unit-cost edit distance.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=hypothesis.len()).collect();
    let mut cur = vec![0; hypothesis.len() + 1];
    for (i, r) in reference.iter().enumerate() {
        cur[0] = i + 1;
        for (j, h) in hypothesis.iter().enumerate() {
            let sub = prev[j] + usize::from(r != h);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[hypothesis.len()]
}

/// A minimal alignment. Ties prefer match/substitution, then deletion.
pub fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Vec<AlignStep> {
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        d[i * w] = i;
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            d[i * w + j] = sub.min(d[(i - 1) * w + j] + 1).min(d[i * w + j - 1] + 1);
        }
    }
    let mut steps = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if here == d[(i - 1) * w + j - 1] + usize::from(!same) {
                let op = if same { EditOp::Match } else { EditOp::Substitute };
                steps.push(AlignStep { op, reference: Some(i - 1), hypothesis: Some(j - 1) });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == d[(i - 1) * w + j] + 1 {
            steps.push(AlignStep { op: EditOp::Delete, reference: Some(i - 1), hypothesis: None });
            i -= 1;
        } else {
            steps.push(AlignStep { op: EditOp::Insert, reference: None, hypothesis: Some(j - 1) });
            j -= 1;
        }
    }
    steps.reverse();
    steps
}

pub fn edit_counts<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditCounts {
    let mut counts = EditCounts { reference_length: reference.len(), ..Default::default() };
    for step in align(reference, hypothesis) {
        match step.op {
            EditOp::Match => {}
            EditOp::Substitute => counts.substitutions += 1,
            EditOp::Insert => counts.insertions += 1,
            EditOp::Delete => counts.deletions += 1,
        }
    }
    counts
}

pub fn normalize_line_endings(text: &str) -> String {
    text.replace("\r\n", "\n").replace('\r', "\n")
}

/// Extended grapheme clusters of the normalised text, separators included.
pub fn characters(text: &str) -> Vec<String> {
    normalize_line_endings(text).graphemes(true).map(String::from).collect()
}

/// Maximal runs of non-whitespace.
pub fn words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Lines without terminators; a final newline does not start an extra line.
pub fn lines(text: &str) -> Vec<String> {
    let norm = normalize_line_endings(text);
    let mut out: Vec<String> = norm.split('\n').map(String::from).collect();
    if norm.ends_with('\n') || norm.is_empty() {
        out.pop();
    }
    out
}

fn counts_at(granularity: Granularity, reference: &str, hypothesis: &str) -> Result<EditCounts, MetricsError> {
    let counts = match granularity {
        Granularity::Character => edit_counts(&characters(reference), &characters(hypothesis)),
        Granularity::Word => edit_counts(&words(reference), &words(hypothesis)),
        Granularity::Line => edit_counts(&lines(reference), &lines(hypothesis)),
    };
    if counts.reference_length == 0 {
        return Err(MetricsError::EmptyReference { granularity });
    }
    Ok(counts)
}

pub fn cer(reference: &str, hypothesis: &str) -> Result<f64, MetricsError> {
    counts_at(Granularity::Character, reference, hypothesis).map(|c| c.ratio())
}

pub fn wer(reference: &str, hypothesis: &str) -> Result<f64, MetricsError> {
    counts_at(Granularity::Word, reference, hypothesis).map(|c| c.ratio())
}

pub fn ler(reference: &str, hypothesis: &str) -> Result<f64, MetricsError> {
    counts_at(Granularity::Line, reference, hypothesis).map(|c| c.ratio())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EditReport {
    pub cer: f64,
    pub wer: f64,
    pub ler: f64,
    pub characters: EditCounts,
    pub words: EditCounts,
    pub lines: EditCounts,
}

impl EditReport {
    fn from_counts(characters: EditCounts, words: EditCounts, lines: EditCounts) -> Self {
        EditReport { cer: characters.ratio(), wer: words.ratio(), ler: lines.ratio(), characters, words, lines }
    }
}

pub fn edit_report(reference: &str, hypothesis: &str) -> Result<EditReport, MetricsError> {
    Ok(EditReport::from_counts(
        counts_at(Granularity::Character, reference, hypothesis)?,
        counts_at(Granularity::Word, reference, hypothesis)?,
        counts_at(Granularity::Line, reference, hypothesis)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Total edits over total reference length.
    #[default]
    Micro,
    /// Mean of the per-pair ratios.
    Macro,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReport {
    pub averaging: Averaging,
    /// Ratios follow `averaging`; the counts are always corpus totals.
    pub aggregate: EditReport,
    pub pairs: Vec<EditReport>,
}

pub fn corpus_report<R, H>(pairs: &[(R, H)], averaging: Averaging) -> Result<CorpusReport, MetricsError>
where
    R: AsRef<str> + Sync,
    H: AsRef<str> + Sync,
{
    let reports = pairs
        .par_iter()
        .enumerate()
        .map(|(index, (r, h))| {
            edit_report(r.as_ref(), h.as_ref()).map_err(|e| MetricsError::InPair { index, source: Box::new(e) })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let (mut c, mut w, mut l) = (EditCounts::default(), EditCounts::default(), EditCounts::default());
    for r in &reports {
        c.add(&r.characters);
        w.add(&r.words);
        l.add(&r.lines);
    }
    let mut aggregate = EditReport::from_counts(c, w, l);
    if averaging == Averaging::Macro && !reports.is_empty() {
        let n = reports.len() as f64;
        aggregate.cer = reports.iter().map(|r| r.cer).sum::<f64>() / n;
        aggregate.wer = reports.iter().map(|r| r.wer).sum::<f64>() / n;
        aggregate.ler = reports.iter().map(|r| r.ler).sum::<f64>() / n;
    }
    Ok(CorpusReport { averaging, aggregate, pairs: reports })
}

/// Line-level diff: `  ` for matching lines, `- `/`+ ` for deleted and
/// inserted ones, and `~ ` pairs for substitutions.
pub fn render_alignment(reference: &str, hypothesis: &str) -> String {
    let (r, h) = (lines(reference), lines(hypothesis));
    let mut out = String::new();
    for step in align(&r, &h) {
        let (ri, hi) = (step.reference.map(|i| &r[i]), step.hypothesis.map(|i| &h[i]));
        match step.op {
            EditOp::Match => writeln!(out, "  {}", ri.unwrap()),
            EditOp::Delete => writeln!(out, "- {}", ri.unwrap()),
            EditOp::Insert => writeln!(out, "+ {}", hi.unwrap()),
            EditOp::Substitute => writeln!(out, "~ {}\n~ {}", ri.unwrap(), hi.unwrap()),
        }
        .expect("write to string");
    }
    out
}
