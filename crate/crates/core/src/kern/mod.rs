//! Two-spine `**kern` lead sheets: a melody spine and a Harte chord spine.

mod regions;
mod token;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::harte::{self, ChordError};

pub use regions::{split_regions, strip_annotations};
pub use token::{
    Accidental, Duration, KernPitch, MelodyField, MelodyToken, NoteContent, Ornament, Recip, TokenError,
};
pub use validate::{validate_document, Diagnostic, DiagnosticCode, Severity};

pub const LINEBREAK_MARKER: &str = "!!linebreak:original";
pub const MELODY_SPINE: &str = "**kern";
pub const CHORD_SPINE: &str = "**harte";
/// Chord spine name written by older converters; read but never written.
pub const LEGACY_CHORD_SPINE: &str = "**mxhm";
pub const TERMINATOR: &str = "*-";
pub const NULL_TOKEN: &str = ".";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KernError {
    #[error("line {line}: expected 2 tab-separated fields, found {found}")]
    SpineCount { line: usize, found: usize },
    #[error("line {line}: {source}")]
    BadMelodyToken { line: usize, source: TokenError },
    #[error("line {line}: bad chord token {token:?}: {source}")]
    BadChordToken { line: usize, token: String, source: ChordError },
    #[error("line {line}: {reason}")]
    MismatchedRecord { line: usize, reason: String },
    #[error("line {line}: expected `{MELODY_SPINE}\t{CHORD_SPINE}` header, found {found:?}")]
    BadHeader { line: usize, found: String },
    #[error("missing exclusive interpretation header")]
    MissingHeader,
    #[error("missing `*-\t*-` spine terminator")]
    MissingTerminator,
    #[error("line {line}: record after spine terminator")]
    RecordAfterTerminator { line: usize },
    #[error("invalid document: {0}")]
    InvalidDocument(String),
}

impl KernError {
    pub fn line(&self) -> Option<usize> {
        match self {
            KernError::SpineCount { line, .. }
            | KernError::BadMelodyToken { line, .. }
            | KernError::BadChordToken { line, .. }
            | KernError::MismatchedRecord { line, .. }
            | KernError::BadHeader { line, .. }
            | KernError::RecordAfterTerminator { line } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineKind {
    ExclusiveInterpretation,
    Interpretation,
    Barline,
    Data,
    Comment,
    LinebreakMarker,
}

/// One line of a document. Global comments and the linebreak marker have a
/// single field; every other line has a melody field and a chord field.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernLine {
    pub kind: LineKind,
    pub fields: Vec<String>,
}

impl KernLine {
    pub fn record(kind: LineKind, melody: impl Into<String>, chord: impl Into<String>) -> Self {
        KernLine { kind, fields: vec![melody.into(), chord.into()] }
    }

    pub fn data(melody: impl Into<String>, chord: impl Into<String>) -> Self {
        KernLine::record(LineKind::Data, melody, chord)
    }

    pub fn interpretation(melody: impl Into<String>, chord: impl Into<String>) -> Self {
        KernLine::record(LineKind::Interpretation, melody, chord)
    }

    pub fn barline(token: impl Into<String>) -> Self {
        let t = token.into();
        KernLine::record(LineKind::Barline, t.clone(), t)
    }

    pub fn header() -> Self {
        KernLine::record(LineKind::ExclusiveInterpretation, MELODY_SPINE, CHORD_SPINE)
    }

    pub fn terminator() -> Self {
        KernLine::interpretation(TERMINATOR, TERMINATOR)
    }

    pub fn global_comment(text: impl Into<String>) -> Self {
        KernLine { kind: LineKind::Comment, fields: vec![text.into()] }
    }

    pub fn linebreak() -> Self {
        KernLine { kind: LineKind::LinebreakMarker, fields: vec![LINEBREAK_MARKER.to_string()] }
    }

    pub fn melody_field(&self) -> &str {
        &self.fields[0]
    }

    /// Empty for single-field lines.
    pub fn chord_field(&self) -> &str {
        self.fields.get(1).map(String::as_str).unwrap_or("")
    }

    pub fn is_global(&self) -> bool {
        self.fields.len() == 1
    }

    pub fn is_terminator(&self) -> bool {
        self.kind == LineKind::Interpretation && self.fields.iter().all(|f| f == TERMINATOR)
    }

    /// Reference records (`!!!KEY: value`) carry piece metadata.
    pub fn is_reference(&self) -> bool {
        self.kind == LineKind::Comment && self.is_global() && self.fields[0].starts_with("!!!")
    }

    fn check(&self) -> Result<(), String> {
        let expected = match self.kind {
            LineKind::LinebreakMarker => {
                return if self.fields == [LINEBREAK_MARKER] {
                    Ok(())
                } else {
                    Err(format!("linebreak marker must be exactly {LINEBREAK_MARKER:?}"))
                };
            }
            LineKind::Comment if self.is_global() => {
                let f = &self.fields[0];
                if !f.starts_with("!!") || f.contains(['\t', '\n']) || f == LINEBREAK_MARKER {
                    return Err(format!("bad global comment {f:?}"));
                }
                return Ok(());
            }
            _ => 2,
        };
        if self.fields.len() != expected {
            return Err(format!("{:?} line needs {expected} fields", self.kind));
        }
        if self.fields.iter().any(|f| f.is_empty() || f.contains(['\t', '\n'])) {
            return Err("fields must be non-empty and free of tabs and newlines".into());
        }
        let kinds: Vec<LineKind> = self.fields.iter().map(|f| classify(f)).collect();
        if kinds.iter().any(|k| *k != self.kind) {
            return Err(format!("fields {:?} do not form a {:?} record", self.fields, self.kind));
        }
        Ok(())
    }
}

impl fmt::Display for KernLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fields.join("\t"))
    }
}

fn classify(field: &str) -> LineKind {
    if field.starts_with("**") {
        LineKind::ExclusiveInterpretation
    } else if field.starts_with('*') {
        LineKind::Interpretation
    } else if field.starts_with('=') {
        LineKind::Barline
    } else if field.starts_with('!') {
        LineKind::Comment
    } else {
        LineKind::Data
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernDocument {
    pub lines: Vec<KernLine>,
}

impl KernDocument {
    pub fn new(lines: Vec<KernLine>) -> Self {
        KernDocument { lines }
    }

    pub fn metadata(&self) -> impl Iterator<Item = &KernLine> {
        self.lines.iter().filter(|l| l.is_reference())
    }

    pub fn data_lines(&self) -> impl Iterator<Item = &KernLine> {
        self.lines.iter().filter(|l| l.kind == LineKind::Data)
    }

    pub fn linebreak_count(&self) -> usize {
        self.lines.iter().filter(|l| l.kind == LineKind::LinebreakMarker).count()
    }

    /// Non-null chord fields on data lines.
    pub fn chords(&self) -> impl Iterator<Item = &str> {
        self.data_lines().map(KernLine::chord_field).filter(|c| *c != NULL_TOKEN)
    }

    /// Number of barline-delimited segments that contain at least one data line.
    pub fn measure_count(&self) -> usize {
        let mut count = 0;
        let mut has_data = false;
        for line in &self.lines {
            match line.kind {
                LineKind::Barline => {
                    count += has_data as usize;
                    has_data = false;
                }
                LineKind::Data => has_data = true,
                _ => {}
            }
        }
        count + has_data as usize
    }
}

/// Split lines and classify them, checking only line-level structure.
/// Header, terminator and token content are left to [`validate_document`].
pub fn parse_kern_lines(text: &str) -> Result<KernDocument, KernError> {
    let normalized = text.replace("\r\n", "\n");
    let mut raw: Vec<&str> = normalized.split('\n').collect();
    while raw.last().is_some_and(|l| l.is_empty()) {
        raw.pop();
    }
    let mut lines = Vec::with_capacity(raw.len());
    for (idx, l) in raw.iter().enumerate() {
        let line_no = idx + 1;
        let line = if *l == LINEBREAK_MARKER {
            KernLine::linebreak()
        } else if l.starts_with("!!") {
            KernLine::global_comment(*l)
        } else {
            let fields: Vec<String> = l.split('\t').map(str::to_string).collect();
            if fields.len() != 2 {
                return Err(KernError::SpineCount { line: line_no, found: fields.len() });
            }
            let kind = classify(&fields[0]);
            let mut fields = fields;
            if kind == LineKind::ExclusiveInterpretation && fields[1] == LEGACY_CHORD_SPINE {
                fields[1] = CHORD_SPINE.to_string();
            }
            KernLine { kind, fields }
        };
        line.check().map_err(|reason| KernError::MismatchedRecord { line: line_no, reason })?;
        lines.push(line);
    }
    Ok(KernDocument { lines })
}

/// Parse a complete document: header, terminator, melody tokens and chords
/// are all checked. The first problem found is returned.
pub fn parse_kern(text: &str) -> Result<KernDocument, KernError> {
    let doc = parse_kern_lines(text)?;
    check_document(&doc)?;
    Ok(doc)
}

fn check_document(doc: &KernDocument) -> Result<(), KernError> {
    let records: Vec<(usize, &KernLine)> =
        doc.lines.iter().enumerate().filter(|(_, l)| !l.is_global() && l.kind != LineKind::Comment).collect();
    let Some(&(last_idx, last)) = records.last() else {
        return Err(KernError::MissingTerminator);
    };
    let (first_idx, first) = records[0];
    if first.kind != LineKind::ExclusiveInterpretation {
        return Err(KernError::MissingHeader);
    }
    if first.fields != [MELODY_SPINE, CHORD_SPINE] {
        return Err(KernError::BadHeader { line: first_idx + 1, found: first.to_string() });
    }
    let terminator = records.iter().position(|(_, l)| l.is_terminator());
    match terminator {
        None => return Err(KernError::MissingTerminator),
        Some(pos) if pos + 1 < records.len() => {
            return Err(KernError::RecordAfterTerminator { line: records[pos + 1].0 + 1 });
        }
        _ => {}
    }
    debug_assert!(last.is_terminator() && last_idx >= first_idx);
    for (idx, line) in &records[1..] {
        if line.kind == LineKind::ExclusiveInterpretation {
            return Err(KernError::MismatchedRecord { line: idx + 1, reason: "repeated exclusive interpretation".into() });
        }
        if line.kind == LineKind::Data {
            check_data_line(*idx + 1, line)?;
        }
    }
    Ok(())
}

fn check_data_line(line_no: usize, line: &KernLine) -> Result<(), KernError> {
    MelodyField::parse(line.melody_field())
        .map_err(|source| KernError::BadMelodyToken { line: line_no, source })?;
    let chord = line.chord_field();
    if chord != NULL_TOKEN {
        harte::parse_chord(chord)
            .map_err(|source| KernError::BadChordToken { line: line_no, token: chord.to_string(), source })?;
    }
    Ok(())
}

/// Tab-separated, newline-terminated text. Only line-level structure is
/// checked, so region fragments without header or terminator serialize too.
pub fn serialize_kern(doc: &KernDocument) -> Result<String, KernError> {
    let mut out = String::new();
    for (idx, line) in doc.lines.iter().enumerate() {
        line.check().map_err(|r| KernError::InvalidDocument(format!("line {}: {r}", idx + 1)))?;
        out.push_str(&line.to_string());
        out.push('\n');
    }
    Ok(out)
}

impl fmt::Display for KernDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}
