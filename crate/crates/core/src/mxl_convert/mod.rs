//! MusicXML lead sheets to two-spine kern, keeping every chord extension.
//!
//! Harmony kinds map to Harte qualities through a data table
//! (`data/kinds.conf`). Degree elements are applied on top: `subtract`
//! becomes a `noN` extension, `add` and `alter` become plain extensions, and
//! the result is re-encoded with the fewest extensions when needed.

mod score;

use std::sync::OnceLock;

use num_rational::Ratio;

use crate::config::{self, ConfigError};
use crate::harte::{self, AliasTable, Degree, DegreeSet, DegreeTable, HarteChord, PitchSpelling};
use crate::kern::{Accidental, KernPitch, Recip};

pub use score::{extract_mxl, read_score_file, BeamState, Conversion, ConvertWarning, MelodyNote};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConvertError {
    #[error("unknown harmony kind {kind:?}{}", suggestion.as_ref().map(|s| format!(" (the text suggests kind {s:?})")).unwrap_or_default())]
    UnknownKind { kind: String, suggestion: Option<String> },
    #[error("cannot map degree {value}: {reason}")]
    UnmappableDegree { value: i32, reason: String },
    #[error("bass {bass} is not a representable interval above {root}")]
    UnmappableBass { root: String, bass: String },
    #[error("harmony has no root")]
    MissingRoot,
    #[error("harmony text {text:?} disagrees with kind {kind:?}{}", suggestion.as_ref().map(|s| format!("; use kind {s:?}")).unwrap_or_default())]
    LegacyHarmonyText { text: String, kind: String, suggestion: Option<String> },
    #[error("octave {0} outside 0..=9")]
    OctaveOutOfRange(i32),
    #[error("unsupported alteration {0:?}")]
    UnsupportedAlter(String),
    #[error("bad pitch step {0:?}")]
    BadStep(String),
    #[error("duration of {duration} quarter notes with {dots} dot(s) has no kern recip")]
    NonRepresentableDuration { duration: String, dots: u8 },
    #[error("score has {0} parts; only single-part scores are supported")]
    MultiPartUnsupported(usize),
    #[error("more than one note sounds at once (voice {voice}); use the top-voice option to keep only the top voice")]
    PolyphonyError { voice: String },
    #[error("harmony has no following note to attach to")]
    UnattachedHarmony,
    #[error("two harmonies attach to the same note")]
    HarmonyCollision,
    #[error("missing or malformed <{0}>")]
    MissingElement(String),
    #[error("unsupported document: {0}")]
    UnsupportedDocument(String),
    #[error("XML error: {0}")]
    Xml(String),
    #[error("compressed container: {0}")]
    Container(String),
    #[error("{0}")]
    Io(String),
    #[error("measure {measure}: {source}")]
    At { measure: String, source: Box<ConvertError> },
}

impl ConvertError {
    fn at(self, measure: &str) -> ConvertError {
        match self {
            e @ ConvertError::At { .. } => e,
            e => ConvertError::At { measure: measure.to_string(), source: Box::new(e) },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegreeType {
    Add,
    Alter,
    Subtract,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HarmonyDegree {
    pub value: i32,
    pub alter: i32,
    pub kind: DegreeType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarmonyElement {
    pub root: PitchSpelling,
    pub kind: String,
    /// The `text` attribute of `<kind>`, i.e. what the engraving shows.
    pub kind_text: Option<String>,
    pub degrees: Vec<HarmonyDegree>,
    pub bass: Option<PitchSpelling>,
    pub inversion: Option<u8>,
}

impl HarmonyElement {
    pub fn new(root: PitchSpelling, kind: impl Into<String>) -> Self {
        HarmonyElement { root, kind: kind.into(), kind_text: None, degrees: Vec::new(), bass: None, inversion: None }
    }

    pub fn with_degree(mut self, value: i32, alter: i32, kind: DegreeType) -> Self {
        self.degrees.push(HarmonyDegree { value, alter, kind });
        self
    }

    pub fn with_bass(mut self, bass: PitchSpelling) -> Self {
        self.bass = Some(bass);
        self
    }
}

/// MusicXML kind → Harte quality, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KindTable {
    entries: Vec<(String, HarteChord)>,
}

const STANDARD_KINDS: &str = include_str!("../../data/kinds.conf");

impl KindTable {
    pub fn standard() -> &'static KindTable {
        static TABLE: OnceLock<KindTable> = OnceLock::new();
        TABLE.get_or_init(|| KindTable::from_config(STANDARD_KINDS).expect("bundled kind table is valid"))
    }

    pub fn from_config(text: &str) -> Result<KindTable, ConfigError> {
        let mut entries: Vec<(String, HarteChord)> = Vec::new();
        for entry in config::parse_key_values(text)? {
            let chord = harte::parse_chord(&format!("C:{}", entry.value))
                .map_err(|e| entry.error(format!("kind target {:?}: {e}", entry.value)))?;
            if chord.bass.is_some() {
                return Err(entry.error("kind targets cannot name a bass"));
            }
            if entries.iter().any(|(k, _)| *k == entry.key) {
                return Err(entry.error(format!("kind {:?} defined twice", entry.key)));
            }
            entries.push((entry.key.clone(), chord));
        }
        Ok(KindTable { entries })
    }

    pub fn with_overrides(text: &str) -> Result<KindTable, ConfigError> {
        let mut table = KindTable::standard().clone();
        for (kind, chord) in KindTable::from_config(text)?.entries {
            match table.entries.iter_mut().find(|(k, _)| *k == kind) {
                Some(slot) => slot.1 = chord,
                None => table.entries.push((kind, chord)),
            }
        }
        Ok(table)
    }

    /// The quality a kind maps to, e.g. `"dominant"` → `"7"`.
    pub fn quality(&self, kind: &str) -> Option<String> {
        self.get(kind).map(HarteChord::quality)
    }

    fn get(&self, kind: &str) -> Option<&HarteChord> {
        self.entries.iter().find(|(k, _)| k == kind).map(|(_, c)| c)
    }

    /// First kind (in table order) whose quality has this exact degree set.
    pub fn kind_for(&self, degrees: &DegreeTable, set: &DegreeSet) -> Option<&str> {
        self.entries.iter().find(|(_, c)| degrees.degree_set(c) == *set).map(|(k, _)| k.as_str())
    }

    pub fn kinds(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    fn chord(&self, kind: &str, root: PitchSpelling) -> Option<HarteChord> {
        self.get(kind).map(|c| HarteChord { root, ..c.clone() })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConvertOptions {
    /// Keep only the top note of chords and the first voice instead of
    /// failing on polyphony.
    pub top_voice: bool,
    /// Treat a `<kind text>` that contradicts the kind as an error.
    pub strict_harmony: bool,
}

/// A converted chord plus anything worth reporting about it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarmonyConversion {
    pub chord: HarteChord,
    pub warnings: Vec<String>,
}

/// Conversion tables and options.
#[derive(Debug, Clone)]
pub struct Converter {
    pub kinds: KindTable,
    pub degrees: DegreeTable,
    pub aliases: AliasTable,
    pub options: ConvertOptions,
}

impl Default for Converter {
    fn default() -> Self {
        Converter::new(ConvertOptions::default())
    }
}

impl Converter {
    pub fn new(options: ConvertOptions) -> Self {
        Converter {
            kinds: KindTable::standard().clone(),
            degrees: DegreeTable::standard().clone(),
            aliases: AliasTable::standard().clone(),
            options,
        }
    }

    pub fn harmony(&self, h: &HarmonyElement) -> Result<HarmonyConversion, ConvertError> {
        let mut warnings = Vec::new();
        let Some(base) = self.kinds.chord(&h.kind, h.root) else {
            let suggestion = self.text_chord(h).and_then(|c| self.kinds.kind_for(&self.degrees, &self.degrees.degree_set(&c)));
            return Err(ConvertError::UnknownKind { kind: h.kind.clone(), suggestion: suggestion.map(String::from) });
        };
        let base_set = self.degrees.degree_set(&base);
        let mut set = base_set.clone();
        for d in &h.degrees {
            apply_degree(&mut set, d)?;
        }
        let encoded = HarteChord {
            root: h.root,
            shorthand: base.shorthand,
            extensions: self.degrees.encode(base.shorthand, &set),
            bass: None,
        };
        let mut chord = self.degrees.canonicalize(&encoded);

        if let Some(bass) = h.bass {
            let degree = interval_degree(h.root, bass).ok_or_else(|| ConvertError::UnmappableBass {
                root: h.root.to_string(),
                bass: bass.to_string(),
            })?;
            chord.bass = Some(degree);
        } else if let Some(inv) = h.inversion.filter(|i| *i > 0) {
            let degree = set.iter().filter(|d| d.number != 1).nth(inv as usize - 1).ok_or(ConvertError::UnmappableDegree {
                value: inv as i32,
                reason: "inversion beyond the chord's degrees".into(),
            })?;
            chord.bass = Some(*degree);
        }

        if let (Some(text), Some(shown)) = (&h.kind_text, self.text_chord(h)) {
            let shown_set = self.degrees.degree_set(&shown);
            if shown_set != base_set && shown_set != set {
                let suggestion = self.kinds.kind_for(&self.degrees, &shown_set).map(String::from);
                let err = ConvertError::LegacyHarmonyText { text: text.clone(), kind: h.kind.clone(), suggestion };
                if self.options.strict_harmony {
                    return Err(err);
                }
                warnings.push(err.to_string());
            }
        }
        Ok(HarmonyConversion { chord, warnings })
    }

    fn text_chord(&self, h: &HarmonyElement) -> Option<HarteChord> {
        let text = h.kind_text.as_deref()?.trim();
        if text.is_empty() {
            return None;
        }
        self.aliases.normalize(text, h.root).ok()
    }
}

/// Convert with the bundled tables; a contradicting kind text only warns.
pub fn convert_harmony(h: &HarmonyElement) -> Result<HarteChord, ConvertError> {
    Converter::default().harmony(h).map(|c| c.chord)
}

fn apply_degree(set: &mut DegreeSet, d: &HarmonyDegree) -> Result<(), ConvertError> {
    let unmappable = |reason: &str| ConvertError::UnmappableDegree { value: d.value, reason: reason.to_string() };
    if !(1..=13).contains(&d.value) {
        return Err(unmappable("outside 1..=13"));
    }
    let number = d.value as u8;
    let existing: Vec<Degree> = set.iter().filter(|x| x.number == number).copied().collect();
    // Added degrees are relative to a dominant chord: the seventh is minor.
    let dominant = if number == 7 { -1 } else { 0 };
    let alteration = match d.kind {
        DegreeType::Add => dominant + d.alter,
        DegreeType::Alter => existing.first().map_or(dominant, |x| x.alteration as i32) + d.alter,
        DegreeType::Subtract => {
            if existing.is_empty() {
                return Err(unmappable("subtracted degree is not in the chord"));
            }
            set.retain(|x| x.number != number);
            return Ok(());
        }
    };
    if alteration.abs() > 2 {
        return Err(unmappable("alteration beyond a double accidental"));
    }
    if d.kind == DegreeType::Alter {
        set.retain(|x| x.number != number);
    }
    set.insert(Degree::new(alteration as i8, number));
    Ok(())
}

const LETTERS: &str = "CDEFGAB";
const MAJOR_SCALE: [i32; 7] = [0, 2, 4, 5, 7, 9, 11];

/// Scale degree of `bass` above `root`, by letter distance and semitones.
fn interval_degree(root: PitchSpelling, bass: PitchSpelling) -> Option<Degree> {
    let ri = LETTERS.find(root.letter)? as i32;
    let bi = LETTERS.find(bass.letter)? as i32;
    let step = (bi - ri).rem_euclid(7);
    let semis = (bass.pitch_class() - root.pitch_class()).rem_euclid(12);
    let mut alt = semis - MAJOR_SCALE[step as usize];
    if alt > 6 {
        alt -= 12;
    } else if alt < -6 {
        alt += 12;
    }
    (alt.abs() <= 2).then(|| Degree::new(alt as i8, step as u8 + 1))
}

/// Kern pitch for a MusicXML step/alter/octave; octave 4 is `c`.
pub fn pitch_to_kern(step: char, alter: i32, octave: i32) -> Result<KernPitch, ConvertError> {
    let letter = step.to_ascii_uppercase();
    if !LETTERS.contains(letter) || !step.is_ascii_alphabetic() {
        return Err(ConvertError::BadStep(step.to_string()));
    }
    if !(0..=9).contains(&octave) {
        return Err(ConvertError::OctaveOutOfRange(octave));
    }
    let accidental = match alter {
        0 => None,
        1..=3 => Some(Accidental::Sharp(alter as u8)),
        -3..=-1 => Some(Accidental::Flat((-alter) as u8)),
        _ => return Err(ConvertError::UnsupportedAlter(alter.to_string())),
    };
    Ok(KernPitch { letter, octave: octave as i8, accidental })
}

/// Recip for `duration` divisions at `divisions` per quarter note.
pub fn duration_to_recip(duration: u64, divisions: u64, dots: u8) -> Result<Recip, ConvertError> {
    let err = || ConvertError::NonRepresentableDuration {
        duration: Ratio::new(duration, divisions.max(1)).to_string(),
        dots,
    };
    if duration == 0 || divisions == 0 {
        return Err(err());
    }
    Recip::from_duration(Ratio::new(duration, 4 * divisions), dots).ok_or_else(err)
}

pub use score::convert_score;
