use super::{KernDocument, KernLine, LineKind};

#[derive(Debug, Clone, Default)]
struct ActiveContext {
    header: Option<KernLine>,
    clef: Option<String>,
    key: Option<String>,
    meter: Option<String>,
    initial_meter: Option<String>,
}

impl ActiveContext {
    fn observe(&mut self, line: &KernLine) {
        match line.kind {
            LineKind::ExclusiveInterpretation => self.header = Some(line.clone()),
            LineKind::Interpretation => {
                let tok = line.melody_field();
                if tok.starts_with("*clef") {
                    self.clef = Some(tok.to_string());
                } else if tok.starts_with("*k[") {
                    self.key = Some(tok.to_string());
                } else if tok.starts_with("*M") && tok[2..].starts_with(|c: char| c.is_ascii_digit()) {
                    self.initial_meter.get_or_insert_with(|| tok.to_string());
                    self.meter = Some(tok.to_string());
                }
            }
            _ => {}
        }
    }

    fn prefix(&self) -> Vec<KernLine> {
        let mut out = vec![self.header.clone().unwrap_or_else(KernLine::header)];
        out.extend(self.clef.iter().chain(&self.key).map(|t| KernLine::interpretation(t.clone(), "*")));
        if self.meter != self.initial_meter {
            out.extend(self.meter.iter().map(|t| KernLine::interpretation(t.clone(), "*")));
        }
        out
    }
}

/// Split a document into one region per staff system at each
/// `!!linebreak:original` marker. `k` markers always give `k + 1` regions,
/// and the markers themselves are dropped.
///
/// With `include_context`, every region is a standalone document: regions
/// after the first start with the exclusive interpretation, the active clef
/// and key signature (and the meter when it differs from the opening one),
/// and every region but the last gets a spine terminator. Without it the
/// regions are plain fragments; joining them with markers in between gives
/// back the input.
pub fn split_regions(doc: &KernDocument, include_context: bool) -> Vec<KernDocument> {
    let mut chunks: Vec<Vec<KernLine>> = vec![Vec::new()];
    for line in &doc.lines {
        if line.kind == LineKind::LinebreakMarker {
            chunks.push(Vec::new());
        } else {
            chunks.last_mut().expect("non-empty").push(line.clone());
        }
    }
    if !include_context {
        return chunks.into_iter().map(KernDocument::new).collect();
    }

    let last = chunks.len() - 1;
    let mut ctx = ActiveContext::default();
    let mut regions = Vec::with_capacity(chunks.len());
    for (i, chunk) in chunks.into_iter().enumerate() {
        let mut lines = if i == 0 { Vec::new() } else { ctx.prefix() };
        for line in &chunk {
            ctx.observe(line);
        }
        lines.extend(chunk);
        if i != last && !lines.last().is_some_and(KernLine::is_terminator) {
            lines.push(KernLine::terminator());
        }
        regions.push(KernDocument::new(lines));
    }
    regions
}

fn strip_measure_number(token: &str) -> String {
    let bars = token.bytes().take_while(|b| *b == b'=').count();
    let rest = &token[bars..];
    let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
    let mut rest = &rest[digits..];
    // Sub-measure letters such as `=12a`.
    if digits > 0 && rest.starts_with(|c: char| c.is_ascii_lowercase()) {
        rest = &rest[1..];
    }
    format!("{}{}", &token[..bars], rest)
}

/// Drop comment lines (optionally keeping linebreak markers) and remove
/// measure numbers from barlines, so `=12` becomes `=`.
pub fn strip_annotations(doc: &KernDocument, keep_linebreaks: bool) -> KernDocument {
    let lines = doc
        .lines
        .iter()
        .filter(|l| match l.kind {
            LineKind::Comment => false,
            LineKind::LinebreakMarker => keep_linebreaks,
            _ => true,
        })
        .map(|l| {
            if l.kind == LineKind::Barline {
                KernLine { kind: l.kind, fields: l.fields.iter().map(|f| strip_measure_number(f)).collect() }
            } else {
                l.clone()
            }
        })
        .collect();
    KernDocument::new(lines)
}
