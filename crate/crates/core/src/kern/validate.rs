use num_rational::Ratio;
use serde::Serialize;

use super::{
    check_document, Duration, KernDocument, KernError, LineKind, MelodyField, Ornament, NULL_TOKEN,
};
use crate::harte::{self, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticCode {
    Structure,
    BadMelodyToken,
    BadChordToken,
    DoubleAccidentalRoot,
    DurationMismatch,
    UnterminatedTie,
    UnmatchedTieClose,
    UnterminatedSlur,
    UnmatchedSlurClose,
    Polyphony,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    /// 1-based line within the document, when the problem has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    fn error(code: DiagnosticCode, line: usize, message: String) -> Self {
        Diagnostic { severity: Severity::Error, code, line: Some(line), message }
    }

    fn warning(code: DiagnosticCode, line: usize, message: String) -> Self {
        Diagnostic { severity: Severity::Warning, code, line: Some(line), message }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let severity = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        match self.line {
            Some(l) => write!(f, "line {l}: {severity}: {}", self.message),
            None => write!(f, "{severity}: {}", self.message),
        }
    }
}

fn parse_meter(token: &str) -> Option<Duration> {
    let (num, den) = token.strip_prefix("*M")?.split_once('/')?;
    let num: u64 = num.parse().ok()?;
    let den: u64 = den.parse().ok()?;
    (den > 0).then(|| Ratio::new(num, den))
}

/// Everything wrong with a document, from fatal structure problems to
/// musical warnings. Never fails; an empty list means the document is clean.
pub fn validate_document(doc: &KernDocument) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if let Err(e) = check_structure(doc) {
        out.push(Diagnostic { severity: Severity::Error, code: DiagnosticCode::Structure, line: e.line(), message: e.to_string() });
    }

    let mut meter: Option<Duration> = None;
    let mut measure_start: Option<usize> = None;
    let mut measure_total = Ratio::from_integer(0);
    let mut seen_barline = false;
    let mut open_ties: Vec<usize> = Vec::new();
    let mut open_slurs: Vec<usize> = Vec::new();

    for (idx, line) in doc.lines.iter().enumerate() {
        let line_no = idx + 1;
        match line.kind {
            LineKind::Interpretation => {
                if let Some(m) = parse_meter(line.melody_field()) {
                    meter = Some(m);
                }
            }
            LineKind::Barline => {
                // Content before the first barline is a pickup and is not checked.
                if let (true, Some(start), Some(m)) = (seen_barline, measure_start, meter) {
                    if measure_total != m {
                        out.push(Diagnostic::warning(
                            DiagnosticCode::DurationMismatch,
                            start,
                            format!("measure lasts {measure_total} of a whole note, meter requires {m}"),
                        ));
                    }
                }
                seen_barline = true;
                measure_start = None;
                measure_total = Ratio::from_integer(0);
            }
            LineKind::Data => {
                let chord = line.chord_field();
                if chord != NULL_TOKEN {
                    match harte::parse_chord_syntax(chord) {
                        Err(e) => out.push(Diagnostic::error(DiagnosticCode::BadChordToken, line_no, e.to_string())),
                        Ok(c) => {
                            for v in harte::validate_chord(&c).violations {
                                let d = match v {
                                    Violation::DoubleAccidentalRoot { .. } => Diagnostic::warning(
                                        DiagnosticCode::DoubleAccidentalRoot,
                                        line_no,
                                        format!("{chord}: {v}"),
                                    ),
                                    _ => Diagnostic::error(DiagnosticCode::BadChordToken, line_no, format!("{chord}: {v}")),
                                };
                                out.push(d);
                            }
                        }
                    }
                }
                let field = match MelodyField::parse(line.melody_field()) {
                    Ok(f) => f,
                    Err(e) => {
                        out.push(Diagnostic::error(DiagnosticCode::BadMelodyToken, line_no, e.to_string()));
                        continue;
                    }
                };
                measure_start.get_or_insert(line_no);
                measure_total += field.duration();
                if field.is_polyphonic() {
                    out.push(Diagnostic::warning(
                        DiagnosticCode::Polyphony,
                        line_no,
                        format!("polyphonic melody slice {:?}", line.melody_field()),
                    ));
                }
                if let MelodyField::Notes(notes) = &field {
                    let note = &notes[0];
                    for o in note.ornaments() {
                        match o {
                            Ornament::TieOpen => open_ties.push(line_no),
                            Ornament::TieClose => {
                                if open_ties.pop().is_none() {
                                    out.push(Diagnostic::warning(DiagnosticCode::UnmatchedTieClose, line_no, "tie closed without opening".into()));
                                }
                            }
                            Ornament::TieContinue if open_ties.is_empty() => {
                                out.push(Diagnostic::warning(DiagnosticCode::UnmatchedTieClose, line_no, "tie continued without opening".into()));
                            }
                            Ornament::SlurOpen => open_slurs.push(line_no),
                            Ornament::SlurClose => {
                                if open_slurs.pop().is_none() {
                                    out.push(Diagnostic::warning(DiagnosticCode::UnmatchedSlurClose, line_no, "slur closed without opening".into()));
                                }
                            }
                            _ => {}
                        }
                    }
                }
            }
            _ => {}
        }
    }
    for line in open_ties {
        out.push(Diagnostic::warning(DiagnosticCode::UnterminatedTie, line, "tie is never closed".into()));
    }
    for line in open_slurs {
        out.push(Diagnostic::warning(DiagnosticCode::UnterminatedSlur, line, "slur is never closed".into()));
    }
    out
}

/// Header and terminator problems only; token errors are reported per line.
fn check_structure(doc: &KernDocument) -> Result<(), KernError> {
    match check_document(doc) {
        Err(KernError::BadChordToken { .. } | KernError::BadMelodyToken { .. }) => {
            // Token errors are reported line by line; re-check structure on a
            // copy with data lines removed.
            let lines = doc.lines.iter().filter(|l| l.kind != LineKind::Data).cloned().collect();
            check_document(&KernDocument::new(lines)).map_err(|e| match e {
                // Line numbers no longer match the original once data is removed.
                KernError::RecordAfterTerminator { .. } => KernError::InvalidDocument("record after terminator".into()),
                other => other,
            })
        }
        other => other,
    }
}
