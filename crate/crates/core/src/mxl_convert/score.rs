use std::io::{Cursor, Read};
use std::path::Path;

use num_rational::Ratio;
use roxmltree::{Document, Node, ParsingOptions};
use serde::Serialize;

use super::{duration_to_recip, pitch_to_kern, ConvertError, ConvertOptions, Converter, DegreeType, HarmonyDegree, HarmonyElement};
use crate::harte::PitchSpelling;
use crate::kern::{KernDocument, KernLine, MelodyToken, NoteContent, Ornament, NULL_TOKEN};

/// Whole-note offsets; signed because `<backup>` and harmony offsets can
/// move backwards.
type Pos = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConvertWarning {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conversion {
    pub document: KernDocument,
    pub warnings: Vec<ConvertWarning>,
    /// Harmony elements found in the input.
    pub harmony_count: usize,
    /// `<print new-system="yes">` directives after the first measure.
    pub system_breaks: usize,
}

/// Convert a partwise MusicXML document with the bundled tables.
pub fn convert_score(xml: &str, options: ConvertOptions) -> Result<Conversion, ConvertError> {
    Converter::new(options).score(xml)
}

/// Read `.musicxml`/`.xml` as text, or unpack the root file of an `.mxl`.
pub fn read_score_file(path: &Path) -> Result<String, ConvertError> {
    let io = |e: std::io::Error| ConvertError::Io(format!("{}: {e}", path.display()));
    let is_mxl = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("mxl"));
    if is_mxl {
        extract_mxl(&std::fs::read(path).map_err(io)?)
    } else {
        std::fs::read_to_string(path).map_err(io)
    }
}

/// The primary score inside a compressed `.mxl` container.
pub fn extract_mxl(bytes: &[u8]) -> Result<String, ConvertError> {
    let container = |e: String| ConvertError::Container(e);
    let mut zip = zip::ZipArchive::new(Cursor::new(bytes)).map_err(|e| container(e.to_string()))?;
    let read = |zip: &mut zip::ZipArchive<Cursor<&[u8]>>, name: &str| -> Result<String, ConvertError> {
        let mut file = zip.by_name(name).map_err(|e| container(format!("{name}: {e}")))?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(|e| container(format!("{name}: {e}")))?;
        Ok(text)
    };
    let rootfile = match read(&mut zip, "META-INF/container.xml") {
        Ok(manifest) => {
            let doc = Document::parse(&manifest).map_err(|e| container(format!("container.xml: {e}")))?;
            doc.descendants()
                .find(|n| n.has_tag_name("rootfile"))
                .and_then(|n| n.attribute("full-path"))
                .map(String::from)
                .ok_or_else(|| container("container.xml names no rootfile".into()))?
        }
        Err(_) => zip
            .file_names()
            .filter(|n| !n.starts_with("META-INF/") && (n.ends_with(".xml") || n.ends_with(".musicxml")))
            .min()
            .map(String::from)
            .ok_or_else(|| container("no score file in archive".into()))?,
    };
    read(&mut zip, &rootfile)
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(name))
}

fn child_text<'a>(node: Node<'a, '_>, name: &str) -> Option<&'a str> {
    child(node, name).and_then(|c| c.text()).map(str::trim)
}

/// Integer value of an element that MusicXML types as a decimal.
fn integral(text: &str) -> Option<i64> {
    let v: f64 = text.trim().parse().ok()?;
    (v.fract() == 0.0 && v.abs() < 1e9).then_some(v as i64)
}

fn require_int(node: Node, name: &str) -> Result<i64, ConvertError> {
    child_text(node, name).and_then(integral).ok_or_else(|| ConvertError::MissingElement(name.to_string()))
}

fn optional_alter(node: Node, name: &str) -> Result<i32, ConvertError> {
    match child_text(node, name) {
        None => Ok(0),
        Some(t) => integral(t).map(|v| v as i32).ok_or_else(|| ConvertError::UnsupportedAlter(t.to_string())),
    }
}

fn spelling(node: Node, step: &str, alter: &str) -> Result<PitchSpelling, ConvertError> {
    let s = child_text(node, step).ok_or_else(|| ConvertError::MissingElement(step.to_string()))?;
    let letter = match s.as_bytes() {
        [c @ b'A'..=b'G'] => *c as char,
        _ => return Err(ConvertError::BadStep(s.to_string())),
    };
    let alter = optional_alter(node, alter)?;
    if alter.abs() > 2 {
        return Err(ConvertError::UnsupportedAlter(alter.to_string()));
    }
    Ok(PitchSpelling::new(letter, alter as i8))
}

fn parse_harmony(node: Node) -> Result<HarmonyElement, ConvertError> {
    let root_node = child(node, "root").ok_or(ConvertError::MissingRoot)?;
    let root = spelling(root_node, "root-step", "root-alter")?;
    let kind_node = child(node, "kind").ok_or_else(|| ConvertError::MissingElement("kind".into()))?;
    let mut h = HarmonyElement::new(root, kind_node.text().unwrap_or("").trim());
    h.kind_text = kind_node.attribute("text").map(String::from);
    for d in node.children().filter(|c| c.has_tag_name("degree")) {
        let value = require_int(d, "degree-value")? as i32;
        let alter = optional_alter(d, "degree-alter")?;
        let kind = match child_text(d, "degree-type") {
            Some("add") => DegreeType::Add,
            Some("alter") => DegreeType::Alter,
            Some("subtract") => DegreeType::Subtract,
            _ => return Err(ConvertError::MissingElement("degree-type".into())),
        };
        h.degrees.push(HarmonyDegree { value, alter, kind });
    }
    if let Some(b) = child(node, "bass") {
        h.bass = Some(spelling(b, "bass-step", "bass-alter")?);
    }
    if let Some(inv) = child_text(node, "inversion").and_then(integral) {
        h.inversion = u8::try_from(inv).ok();
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamState {
    Begin,
    Continue,
    End,
    ForwardHook,
    BackwardHook,
}

/// One `<note>`, reduced to what the melody spine needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MelodyNote {
    /// Step, alter, octave; `None` for rests.
    pub pitch: Option<(char, i32, i32)>,
    pub duration: u64,
    pub dots: u8,
    pub measure_rest: bool,
    pub tie_start: bool,
    pub tie_stop: bool,
    pub slur_starts: usize,
    pub slur_stops: usize,
    pub beams: Vec<(u32, BeamState)>,
    pub fermata: bool,
    pub chord: bool,
    pub grace: bool,
    pub cue: bool,
    pub voice: String,
}

impl MelodyNote {
    fn parse(node: Node) -> Result<MelodyNote, ConvertError> {
        let pitch = match child(node, "pitch") {
            Some(p) => {
                let step = child_text(p, "step").and_then(|s| s.chars().next()).ok_or_else(|| ConvertError::MissingElement("step".into()))?;
                Some((step, optional_alter(p, "alter")?, require_int(p, "octave")? as i32))
            }
            None if child(node, "rest").is_some() => None,
            None => return Err(ConvertError::MissingElement("pitch".into())),
        };
        let grace = child(node, "grace").is_some();
        let duration = match child_text(node, "duration") {
            Some(t) => t.parse().map_err(|_| ConvertError::MissingElement("duration".into()))?,
            None if grace => 0,
            None => return Err(ConvertError::MissingElement("duration".into())),
        };
        let ties: Vec<&str> = node.children().filter(|c| c.has_tag_name("tie")).filter_map(|c| c.attribute("type")).collect();
        let notations: Vec<Node> = node.children().filter(|c| c.has_tag_name("notations")).flat_map(|n| n.children()).collect();
        let slurs = |t: &str| notations.iter().filter(|n| n.has_tag_name("slur") && n.attribute("type") == Some(t)).count();
        let mut beams: Vec<(u32, BeamState)> = node
            .children()
            .filter(|c| c.has_tag_name("beam"))
            .filter_map(|b| {
                let state = match b.text()?.trim() {
                    "begin" => BeamState::Begin,
                    "continue" => BeamState::Continue,
                    "end" => BeamState::End,
                    "forward hook" => BeamState::ForwardHook,
                    "backward hook" => BeamState::BackwardHook,
                    _ => return None,
                };
                Some((b.attribute("number").and_then(|n| n.parse().ok()).unwrap_or(1), state))
            })
            .collect();
        beams.sort_by_key(|b| b.0);
        Ok(MelodyNote {
            pitch,
            duration,
            dots: node.children().filter(|c| c.has_tag_name("dot")).count() as u8,
            measure_rest: child(node, "rest").is_some_and(|r| r.attribute("measure") == Some("yes")),
            tie_start: ties.contains(&"start"),
            tie_stop: ties.contains(&"stop"),
            slur_starts: slurs("start"),
            slur_stops: slurs("stop"),
            beams,
            fermata: notations.iter().any(|n| n.has_tag_name("fermata")),
            chord: child(node, "chord").is_some(),
            grace,
            cue: child(node, "cue").is_some(),
            voice: child_text(node, "voice").unwrap_or("1").to_string(),
        })
    }

    fn height(&self) -> i32 {
        self.pitch.map_or(i32::MIN, |(step, alter, octave)| {
            octave * 12 + PitchSpelling::new(step, 0).pitch_class() + alter
        })
    }

    fn token(&self, divisions: u64) -> Result<MelodyToken, ConvertError> {
        let recip = match duration_to_recip(self.duration, divisions, self.dots) {
            Ok(r) => r,
            // Whole-measure rests carry the measure length without dots.
            Err(e) if self.measure_rest => (1..=3)
                .find_map(|dots| duration_to_recip(self.duration, divisions, dots).ok())
                .ok_or(e)?,
            Err(e) => return Err(e),
        };
        let mut prefix = vec![Ornament::SlurOpen; self.slur_starts];
        let mut suffix = Vec::new();
        let content = match self.pitch {
            Some((step, alter, octave)) => {
                if self.tie_start && !self.tie_stop {
                    prefix.push(Ornament::TieOpen);
                }
                match (self.tie_start, self.tie_stop) {
                    (true, true) => suffix.push(Ornament::TieContinue),
                    (false, true) => suffix.push(Ornament::TieClose),
                    _ => {}
                }
                NoteContent::Pitch(pitch_to_kern(step, alter, octave)?)
            }
            None => NoteContent::Rest { repeat: 1 },
        };
        suffix.extend(std::iter::repeat_n(Ornament::SlurClose, self.slur_stops));
        if self.pitch.is_some() {
            suffix.extend(self.beams.iter().filter_map(|(_, s)| match s {
                BeamState::Begin => Some(Ornament::BeamStart),
                BeamState::End => Some(Ornament::BeamEnd),
                BeamState::ForwardHook => Some(Ornament::HookForward),
                BeamState::BackwardHook => Some(Ornament::HookBackward),
                BeamState::Continue => None,
            }));
        }
        if self.fermata {
            suffix.push(Ornament::Fermata);
        }
        Ok(MelodyToken { prefix, recip, content, suffix })
    }
}

fn key_token(fifths: i64) -> String {
    let (order, n) = if fifths >= 0 { (["f#", "c#", "g#", "d#", "a#", "e#", "b#"], fifths) } else { (["b-", "e-", "a-", "d-", "g-", "c-", "f-"], -fifths) };
    format!("*k[{}]", order[..n.min(7) as usize].concat())
}

fn clef_token(clef: Node) -> Option<String> {
    let sign = child_text(clef, "sign")?;
    if sign == "percussion" {
        return Some("*clefX".into());
    }
    if !matches!(sign, "G" | "F" | "C") {
        return None;
    }
    let line = child_text(clef, "line").unwrap_or(match sign {
        "G" => "2",
        "F" => "4",
        _ => "3",
    });
    let octave = match child_text(clef, "clef-octave-change").and_then(integral) {
        Some(-1) => "v",
        Some(1) => "^",
        _ => "",
    };
    Some(format!("*clef{sign}{octave}{line}"))
}

fn meter_token(time: Node) -> Option<String> {
    let beats: i64 = child_text(time, "beats")?.split('+').map(|b| b.trim().parse::<i64>().ok()).sum::<Option<i64>>()?;
    let beat_type = child_text(time, "beat-type")?;
    Some(format!("*M{beats}/{beat_type}"))
}

struct PendingHarmony {
    onset: Pos,
    chord: String,
    measure: String,
}

struct ScoreState<'c> {
    conv: &'c Converter,
    lines: Vec<KernLine>,
    /// Line index and onset of every emitted data line.
    data: Vec<(usize, Pos)>,
    harmonies: Vec<PendingHarmony>,
    warnings: Vec<ConvertWarning>,
    divisions: u64,
    clef: Option<String>,
    key: Option<String>,
    meter: Option<String>,
    primary_voice: Option<String>,
    /// Data line of the last note and its pitch height, for `<chord/>` notes.
    last_note: Option<(usize, i32)>,
    warned_voices: bool,
    system_breaks: usize,
}

impl ScoreState<'_> {
    fn warn(&mut self, measure: &str, message: impl Into<String>) {
        self.warnings.push(ConvertWarning { measure: Some(measure.to_string()), message: message.into() });
    }

    fn whole(&self, divisions: i64) -> Pos {
        Ratio::new(divisions, 4 * self.divisions as i64)
    }

    /// Interpretation lines for changed clef, key or meter.
    fn attributes(&mut self, node: Node) -> Vec<String> {
        if let Some(d) = child_text(node, "divisions").and_then(integral).filter(|d| *d > 0) {
            self.divisions = d as u64;
        }
        let mut out = Vec::new();
        if let Some(tok) = child(node, "clef").and_then(clef_token) {
            if self.clef.as_ref() != Some(&tok) {
                self.clef = Some(tok.clone());
                out.push(tok);
            }
        }
        if let Some(fifths) = child(node, "key").and_then(|k| child_text(k, "fifths")).and_then(integral) {
            let tok = key_token(fifths);
            if self.key.as_ref() != Some(&tok) {
                self.key = Some(tok.clone());
                out.push(tok);
            }
        }
        if let Some(tok) = child(node, "time").and_then(meter_token) {
            if self.meter.as_ref() != Some(&tok) {
                self.meter = Some(tok.clone());
                out.push(tok);
            }
        }
        out
    }

    fn note(&mut self, node: Node, onset: Pos, label: &str) -> Result<Pos, ConvertError> {
        let note = MelodyNote::parse(node)?;
        if note.grace || note.cue {
            self.warn(label, "grace or cue note skipped");
            return Ok(Pos::from_integer(0));
        }
        let advance = if note.chord { Pos::from_integer(0) } else { self.whole(note.duration as i64) };
        let primary = self.primary_voice.get_or_insert_with(|| note.voice.clone()).clone();
        if note.voice != primary {
            if note.pitch.is_some() {
                if !self.conv.options.top_voice {
                    return Err(ConvertError::PolyphonyError { voice: note.voice });
                }
                if !self.warned_voices {
                    self.warned_voices = true;
                    self.warn(label, format!("notes outside voice {primary} dropped"));
                }
            }
            return Ok(advance);
        }
        if note.chord {
            if !self.conv.options.top_voice {
                return Err(ConvertError::PolyphonyError { voice: note.voice });
            }
            if let Some((line, height)) = self.last_note {
                if note.height() > height {
                    self.lines[line].fields[0] = note.token(self.divisions)?.to_string();
                    self.last_note = Some((line, note.height()));
                }
            }
            return Ok(advance);
        }
        let token = note.token(self.divisions)?;
        self.lines.push(KernLine::data(token.to_string(), NULL_TOKEN));
        let line = self.lines.len() - 1;
        self.data.push((line, onset));
        self.last_note = Some((line, note.height()));
        Ok(advance)
    }
}

impl Converter {
    pub fn score(&self, xml: &str) -> Result<Conversion, ConvertError> {
        let opts = ParsingOptions { allow_dtd: true, ..Default::default() };
        let doc = Document::parse_with_options(xml, opts).map_err(|e| ConvertError::Xml(e.to_string()))?;
        let root = doc.root_element();
        match root.tag_name().name() {
            "score-partwise" => {}
            "score-timewise" => return Err(ConvertError::UnsupportedDocument("timewise scores are not supported".into())),
            other => return Err(ConvertError::UnsupportedDocument(format!("root element <{other}>"))),
        }
        let parts: Vec<Node> = root.children().filter(|c| c.has_tag_name("part")).collect();
        let part = match parts.as_slice() {
            [p] => *p,
            [] => return Err(ConvertError::UnsupportedDocument("no <part>".into())),
            more => return Err(ConvertError::MultiPartUnsupported(more.len())),
        };

        let mut st = ScoreState {
            conv: self,
            lines: vec![KernLine::header()],
            data: Vec::new(),
            harmonies: Vec::new(),
            warnings: Vec::new(),
            divisions: 1,
            clef: None,
            key: None,
            meter: None,
            primary_voice: None,
            last_note: None,
            warned_voices: false,
            system_breaks: 0,
        };
        let mut harmony_count = 0;
        let mut measure_start = Pos::from_integer(0);
        for (index, measure) in part.children().filter(|c| c.has_tag_name("measure")).enumerate() {
            let label = measure.attribute("number").map_or_else(|| (index + 1).to_string(), String::from);
            let first = index == 0;
            let pickup = first && measure.attribute("implicit") == Some("yes");
            let barline = match label.bytes().all(|b| b.is_ascii_digit()) && !label.is_empty() {
                true => format!("={label}"),
                false => "=".to_string(),
            };
            let mut opened = false;
            let mut pending: Vec<String> = Vec::new();
            let mut linebreak = false;
            let mut pos = Pos::from_integer(0);
            let mut max_pos = pos;

            let open = |st: &mut ScoreState, pending: &mut Vec<String>, linebreak: bool| {
                let interps = pending.drain(..).map(|t| KernLine::interpretation(t, "*"));
                if first {
                    st.lines.extend(interps);
                    if !pickup {
                        st.lines.push(KernLine::barline(barline.clone()));
                    }
                } else {
                    if linebreak {
                        st.lines.push(KernLine::linebreak());
                    }
                    st.lines.push(KernLine::barline(barline.clone()));
                    st.lines.extend(interps);
                }
            };

            for node in measure.children().filter(Node::is_element) {
                let result: Result<(), ConvertError> = (|| {
                    match node.tag_name().name() {
                        "print" => {
                            if !first && node.attribute("new-system") == Some("yes") {
                                linebreak = true;
                                st.system_breaks += 1;
                            }
                        }
                        "attributes" => {
                            let interps = st.attributes(node);
                            if opened {
                                st.lines.extend(interps.into_iter().map(|t| KernLine::interpretation(t, "*")));
                            } else {
                                pending.extend(interps);
                            }
                        }
                        "harmony" => {
                            if !opened {
                                open(&mut st, &mut pending, linebreak);
                                opened = true;
                            }
                            harmony_count += 1;
                            let h = parse_harmony(node)?;
                            let conv = self.harmony(&h)?;
                            for w in conv.warnings {
                                st.warn(&label, w);
                            }
                            let offset = child_text(node, "offset").and_then(integral).unwrap_or(0);
                            st.harmonies.push(PendingHarmony {
                                onset: measure_start + pos + st.whole(offset),
                                chord: conv.chord.to_string(),
                                measure: label.clone(),
                            });
                        }
                        "note" => {
                            if !opened {
                                open(&mut st, &mut pending, linebreak);
                                opened = true;
                            }
                            pos += st.note(node, measure_start + pos, &label)?;
                        }
                        "backup" => pos -= st.whole(require_int(node, "duration")?),
                        "forward" => pos += st.whole(require_int(node, "duration")?),
                        _ => {}
                    }
                    max_pos = max_pos.max(pos);
                    Ok(())
                })();
                result.map_err(|e| e.at(&label))?;
            }
            if !opened {
                open(&mut st, &mut pending, linebreak);
            }
            measure_start += max_pos;
        }

        for h in std::mem::take(&mut st.harmonies) {
            let idx = st.data.partition_point(|(_, onset)| *onset < h.onset);
            let &(line, onset) = st.data.get(idx).ok_or_else(|| ConvertError::UnattachedHarmony.at(&h.measure))?;
            if onset != h.onset {
                st.warn(&h.measure, format!("{} starts inside a note; attached to the next note", h.chord));
            }
            let field = &mut st.lines[line].fields[1];
            if field != NULL_TOKEN {
                return Err(ConvertError::HarmonyCollision.at(&h.measure));
            }
            *field = h.chord;
        }

        st.lines.push(KernLine::barline("=="));
        st.lines.push(KernLine::terminator());
        Ok(Conversion {
            document: KernDocument::new(st.lines),
            warnings: st.warnings,
            harmony_count,
            system_breaks: st.system_breaks,
        })
    }

    pub fn score_file(&self, path: &Path) -> Result<Conversion, ConvertError> {
        self.score(&read_score_file(path)?)
    }
}
