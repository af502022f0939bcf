//! Restricted Harte chord grammar: `root:shorthand(ext1,ext2,...)/bass`.
//!
//! Every chord names one of 24 shorthands. Extensions either add a degree,
//! alter a degree of the shorthand (a plain extension whose number is already
//! in the shorthand template replaces that template degree), or remove one
//! with the `no` prefix. A chord is only valid when no other encoding of the
//! same degree set needs fewer extensions, so `C:maj(7,b9)` is rejected in
//! favour of `C:maj7(b9)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::config::{self, ConfigError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChordError {
    #[error("malformed chord {text:?}: {reason}")]
    Syntax { text: String, reason: String },
    #[error("unknown shorthand {0:?}")]
    UnknownShorthand(String),
    #[error("chord {chord} can be written with fewer extensions as {suggestion}")]
    ShorthandExpressible { chord: String, suggestion: String },
    #[error("chord {chord} repeats extension {extension}")]
    DuplicateExtension { chord: String, extension: String },
    #[error("chord {chord}: degree {degree} outside 1..=13")]
    DegreeOutOfRange { chord: String, degree: u8 },
    #[error("invalid chord {chord}: {reason}")]
    InvalidChord { chord: String, reason: String },
    #[error("unknown surface chord symbol {0:?}")]
    UnknownSurfaceSymbol(String),
}

/// The 24 chord shorthands, in the order they are conventionally listed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Shorthand {
    Aug,
    Aug7,
    Dim,
    Dim7,
    Hdim7,
    Maj,
    Maj11,
    Maj13,
    Maj6,
    Maj7,
    Maj9,
    Min,
    Min11,
    Min13,
    Min6,
    Min7,
    Min9,
    MinMaj7,
    Sus2,
    Sus4,
    Eleven,
    Thirteen,
    Seven,
    Nine,
}

impl Shorthand {
    pub const ALL: [Shorthand; 24] = [
        Shorthand::Aug,
        Shorthand::Aug7,
        Shorthand::Dim,
        Shorthand::Dim7,
        Shorthand::Hdim7,
        Shorthand::Maj,
        Shorthand::Maj11,
        Shorthand::Maj13,
        Shorthand::Maj6,
        Shorthand::Maj7,
        Shorthand::Maj9,
        Shorthand::Min,
        Shorthand::Min11,
        Shorthand::Min13,
        Shorthand::Min6,
        Shorthand::Min7,
        Shorthand::Min9,
        Shorthand::MinMaj7,
        Shorthand::Sus2,
        Shorthand::Sus4,
        Shorthand::Eleven,
        Shorthand::Thirteen,
        Shorthand::Seven,
        Shorthand::Nine,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Shorthand::Aug => "aug",
            Shorthand::Aug7 => "aug7",
            Shorthand::Dim => "dim",
            Shorthand::Dim7 => "dim7",
            Shorthand::Hdim7 => "hdim7",
            Shorthand::Maj => "maj",
            Shorthand::Maj11 => "maj11",
            Shorthand::Maj13 => "maj13",
            Shorthand::Maj6 => "maj6",
            Shorthand::Maj7 => "maj7",
            Shorthand::Maj9 => "maj9",
            Shorthand::Min => "min",
            Shorthand::Min11 => "min11",
            Shorthand::Min13 => "min13",
            Shorthand::Min6 => "min6",
            Shorthand::Min7 => "min7",
            Shorthand::Min9 => "min9",
            Shorthand::MinMaj7 => "minmaj7",
            Shorthand::Sus2 => "sus2",
            Shorthand::Sus4 => "sus4",
            Shorthand::Eleven => "11",
            Shorthand::Thirteen => "13",
            Shorthand::Seven => "7",
            Shorthand::Nine => "9",
        }
    }

    fn index(self) -> usize {
        Shorthand::ALL.iter().position(|s| *s == self).expect("listed")
    }
}

impl fmt::Display for Shorthand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Shorthand {
    type Err = ChordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Shorthand::ALL
            .iter()
            .copied()
            .find(|sh| sh.as_str() == s)
            .ok_or_else(|| ChordError::UnknownShorthand(s.to_string()))
    }
}

impl From<Shorthand> for String {
    fn from(s: Shorthand) -> String {
        s.as_str().to_string()
    }
}

impl TryFrom<String> for Shorthand {
    type Error = ChordError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

fn write_accidentals(f: &mut fmt::Formatter<'_>, alteration: i8) -> fmt::Result {
    let sign = if alteration > 0 { '#' } else { 'b' };
    for _ in 0..alteration.unsigned_abs() {
        write!(f, "{sign}")?;
    }
    Ok(())
}

/// Consume a homogeneous run of `#` or `b`. Mixed runs such as `#b` are rejected.
fn take_accidentals(s: &str) -> Result<(i8, &str), String> {
    let run = s.bytes().take_while(|b| *b == b'#' || *b == b'b').count();
    let (acc, rest) = s.split_at(run);
    if acc.is_empty() {
        return Ok((0, rest));
    }
    if acc.bytes().all(|b| b == b'#') {
        Ok((run as i8, rest))
    } else if acc.bytes().all(|b| b == b'b') {
        Ok((-(run as i8), rest))
    } else {
        Err(format!("mixed accidentals {acc:?}"))
    }
}

/// Root spelling: a letter A-G plus a run of sharps or flats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct PitchSpelling {
    pub letter: char,
    pub alteration: i8,
}

impl PitchSpelling {
    pub fn new(letter: char, alteration: i8) -> Self {
        PitchSpelling { letter, alteration }
    }

    /// The 17 spellings in common use: naturals, five sharps, five flats.
    pub fn common() -> Vec<PitchSpelling> {
        let mut out: Vec<_> = "CDEFGAB".chars().map(|l| PitchSpelling::new(l, 0)).collect();
        out.extend("CDFGA".chars().map(|l| PitchSpelling::new(l, 1)));
        out.extend("DEGAB".chars().map(|l| PitchSpelling::new(l, -1)));
        out
    }

    /// Semitones above C, ignoring octave.
    pub fn pitch_class(self) -> i32 {
        let base = match self.letter {
            'C' => 0,
            'D' => 2,
            'E' => 4,
            'F' => 5,
            'G' => 7,
            'A' => 9,
            _ => 11,
        };
        (base + self.alteration as i32).rem_euclid(12)
    }

    fn parse_prefix(s: &str) -> Result<(PitchSpelling, &str), String> {
        let mut chars = s.chars();
        let letter = match chars.next() {
            Some(c @ 'A'..='G') => c,
            Some(c) => return Err(format!("root must start with A-G, found {c:?}")),
            None => return Err("missing root".into()),
        };
        let (alteration, rest) = take_accidentals(chars.as_str())?;
        Ok((PitchSpelling { letter, alteration }, rest))
    }
}

impl fmt::Display for PitchSpelling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter)?;
        write_accidentals(f, self.alteration)
    }
}

impl FromStr for PitchSpelling {
    type Err = ChordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let syntax = |reason: String| ChordError::Syntax { text: s.to_string(), reason };
        let (p, rest) = PitchSpelling::parse_prefix(s).map_err(syntax)?;
        if !rest.is_empty() {
            return Err(syntax(format!("trailing {rest:?} after root")));
        }
        Ok(p)
    }
}

impl From<PitchSpelling> for String {
    fn from(p: PitchSpelling) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for PitchSpelling {
    type Error = ChordError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// A spelled scale degree such as `b3`, `5` or `#11`.
///
/// Ordered by number first, so degree sets iterate from the root upwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Degree {
    pub number: u8,
    pub alteration: i8,
}

impl Degree {
    pub fn new(alteration: i8, number: u8) -> Self {
        Degree { number, alteration }
    }

    fn parse_prefix(s: &str) -> Result<(Degree, &str), String> {
        let (alteration, rest) = take_accidentals(s)?;
        let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
        if digits == 0 {
            return Err(format!("expected degree number in {s:?}"));
        }
        let (num, rest) = rest.split_at(digits);
        if num.starts_with('0') {
            return Err(format!("degree {num:?} has a leading zero"));
        }
        let number: u8 = num.parse().map_err(|_| format!("degree {num:?} too large"))?;
        Ok((Degree { number, alteration }, rest))
    }

    pub fn in_range(self) -> bool {
        (1..=13).contains(&self.number)
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_accidentals(f, self.alteration)?;
        write!(f, "{}", self.number)
    }
}

impl FromStr for Degree {
    type Err = ChordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let syntax = |reason: String| ChordError::Syntax { text: s.to_string(), reason };
        let (d, rest) = Degree::parse_prefix(s).map_err(syntax)?;
        if !rest.is_empty() {
            return Err(syntax(format!("trailing {rest:?} after degree")));
        }
        Ok(d)
    }
}

impl From<Degree> for String {
    fn from(d: Degree) -> String {
        d.to_string()
    }
}

impl TryFrom<String> for Degree {
    type Error = ChordError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// An added/altered degree, or a removed one (`no` prefix).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Extension {
    pub removal: bool,
    pub degree: Degree,
}

impl Extension {
    pub fn add(alteration: i8, number: u8) -> Self {
        Extension { removal: false, degree: Degree::new(alteration, number) }
    }

    pub fn remove(number: u8) -> Self {
        Extension { removal: true, degree: Degree::new(0, number) }
    }
}

impl fmt::Display for Extension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.removal {
            f.write_str("no")?;
        }
        write!(f, "{}", self.degree)
    }
}

impl FromStr for Extension {
    type Err = ChordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (removal, body) = match s.strip_prefix("no") {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let degree: Degree = body.parse().map_err(|_| ChordError::Syntax {
            text: s.to_string(),
            reason: "extension must be [no]<accidentals><1-13>".into(),
        })?;
        Ok(Extension { removal, degree })
    }
}

impl From<Extension> for String {
    fn from(e: Extension) -> String {
        e.to_string()
    }
}

impl TryFrom<String> for Extension {
    type Error = ChordError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

pub type DegreeSet = BTreeSet<Degree>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HarteChord {
    pub root: PitchSpelling,
    pub shorthand: Shorthand,
    #[serde(default)]
    pub extensions: Vec<Extension>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bass: Option<Degree>,
}

impl HarteChord {
    pub fn new(root: PitchSpelling, shorthand: Shorthand) -> Self {
        HarteChord { root, shorthand, extensions: Vec::new(), bass: None }
    }

    pub fn with_extensions(mut self, extensions: impl IntoIterator<Item = Extension>) -> Self {
        self.extensions.extend(extensions);
        self
    }

    pub fn with_bass(mut self, bass: Degree) -> Self {
        self.bass = Some(bass);
        self
    }

    /// Quality part of the chord, i.e. everything after `root:`.
    pub fn quality(&self) -> String {
        let s = self.to_string();
        let colon = s.find(':').expect("serialized chords contain a colon");
        s[colon + 1..].to_string()
    }

    pub fn degree_set(&self) -> DegreeSet {
        DegreeTable::standard().degree_set(self)
    }
}

/// Unchecked rendering. Use [`serialize_chord`] to enforce validity.
impl fmt::Display for HarteChord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.root, self.shorthand)?;
        if !self.extensions.is_empty() {
            f.write_str("(")?;
            for (i, ext) in self.extensions.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{ext}")?;
            }
            f.write_str(")")?;
        }
        if let Some(bass) = self.bass {
            write!(f, "/{bass}")?;
        }
        Ok(())
    }
}

/// Parse without validating the chord's semantic rules.
pub fn parse_chord_syntax(text: &str) -> Result<HarteChord, ChordError> {
    let syntax = |reason: &str| ChordError::Syntax { text: text.to_string(), reason: reason.to_string() };
    if text.is_empty() {
        return Err(syntax("empty chord"));
    }
    if text.chars().any(char::is_whitespace) {
        return Err(syntax("chord contains whitespace"));
    }
    let (root, rest) = PitchSpelling::parse_prefix(text).map_err(|r| syntax(&r))?;
    let rest = rest.strip_prefix(':').ok_or_else(|| syntax("expected ':' after root"))?;
    let end = rest.find(['(', '/']).unwrap_or(rest.len());
    let (name, mut rest) = rest.split_at(end);
    if name.is_empty() {
        return Err(syntax("missing shorthand"));
    }
    let shorthand: Shorthand = name.parse()?;

    let mut extensions = Vec::new();
    if let Some(inner) = rest.strip_prefix('(') {
        let close = inner.find(')').ok_or_else(|| syntax("unclosed extension list"))?;
        let list = &inner[..close];
        if list.is_empty() {
            return Err(syntax("empty extension list"));
        }
        for item in list.split(',') {
            if item.is_empty() {
                return Err(syntax("empty extension"));
            }
            let ext: Extension = item.parse().map_err(|_| syntax(&format!("bad extension {item:?}")))?;
            extensions.push(ext);
        }
        rest = &inner[close + 1..];
    }

    let mut bass = None;
    if let Some(b) = rest.strip_prefix('/') {
        let (degree, tail) = Degree::parse_prefix(b).map_err(|r| syntax(&r))?;
        bass = Some(degree);
        rest = tail;
    }
    if !rest.is_empty() {
        return Err(syntax(&format!("unexpected trailing {rest:?}")));
    }
    Ok(HarteChord { root, shorthand, extensions, bass })
}

/// Parse and validate a chord label. Warnings (e.g. double-accidental roots)
/// do not cause a failure.
pub fn parse_chord(text: &str) -> Result<HarteChord, ChordError> {
    DegreeTable::standard().parse_chord(text)
}

/// Render a chord, refusing chords that break the grammar's rules.
pub fn serialize_chord(chord: &HarteChord) -> Result<String, ChordError> {
    DegreeTable::standard().serialize_chord(chord)
}

pub fn validate_chord(chord: &HarteChord) -> Validation {
    DegreeTable::standard().validate_chord(chord)
}

/// Root, implied degree set and bass all agree. Extension order is irrelevant.
pub fn chords_equivalent(a: &HarteChord, b: &HarteChord) -> bool {
    DegreeTable::standard().equivalent(a, b)
}

pub fn normalize_surface(symbol: &str, root: PitchSpelling) -> Result<HarteChord, ChordError> {
    AliasTable::standard().normalize(symbol, root)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Violation {
    ShorthandExpressible { suggestion: String },
    DuplicateExtension { extension: String },
    DegreeOutOfRange { degree: String },
    /// A removal spelled with accidentals where the bare number already
    /// names exactly one degree.
    UnneededRemovalAccidental { extension: String },
    /// Warning only.
    DoubleAccidentalRoot { root: String },
}

impl Violation {
    pub fn is_warning(&self) -> bool {
        matches!(self, Violation::DoubleAccidentalRoot { .. })
    }

    fn into_error(self, chord: &HarteChord) -> ChordError {
        let chord = chord.to_string();
        match self {
            Violation::ShorthandExpressible { suggestion } => {
                ChordError::ShorthandExpressible { chord, suggestion }
            }
            Violation::DuplicateExtension { extension } => {
                ChordError::DuplicateExtension { chord, extension }
            }
            Violation::DegreeOutOfRange { degree } => {
                let number = degree.trim_start_matches(['#', 'b']).parse().unwrap_or(0);
                ChordError::DegreeOutOfRange { chord, degree: number }
            }
            other => ChordError::InvalidChord { chord, reason: format!("{other:?}") },
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ShorthandExpressible { suggestion } => {
                write!(f, "expressible with fewer extensions as {suggestion}")
            }
            Violation::DuplicateExtension { extension } => write!(f, "duplicate extension {extension}"),
            Violation::DegreeOutOfRange { degree } => write!(f, "degree {degree} outside 1..=13"),
            Violation::UnneededRemovalAccidental { extension } => {
                write!(f, "removal {extension} needs no accidentals")
            }
            Violation::DoubleAccidentalRoot { root } => write!(f, "double accidental in root {root}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Validation {
    pub violations: Vec<Violation>,
}

impl Validation {
    /// True when nothing but warnings were found.
    pub fn is_ok(&self) -> bool {
        self.violations.iter().all(Violation::is_warning)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| !v.is_warning())
    }
}

/// Shorthand templates. Each template lists each degree number at most once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeTable {
    templates: Vec<DegreeSet>,
}

const STANDARD_SHORTHANDS: &str = include_str!("../data/shorthands.conf");

impl DegreeTable {
    pub fn standard() -> &'static DegreeTable {
        static TABLE: OnceLock<DegreeTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            DegreeTable::from_config(STANDARD_SHORTHANDS).expect("bundled shorthand table is valid")
        })
    }

    /// Parse a `shorthand = degrees` config. Every one of the 24 shorthands
    /// must be defined exactly once.
    pub fn from_config(text: &str) -> Result<DegreeTable, ConfigError> {
        let mut slots: Vec<Option<DegreeSet>> = vec![None; Shorthand::ALL.len()];
        for entry in config::parse_key_values(text)? {
            let shorthand: Shorthand = entry
                .key
                .parse()
                .map_err(|_| entry.error(format!("unknown shorthand {:?}", entry.key)))?;
            let mut set = DegreeSet::new();
            for item in entry.value.split(',').map(str::trim) {
                let d: Degree = item.parse().map_err(|_| entry.error(format!("bad degree {item:?}")))?;
                if !d.in_range() {
                    return Err(entry.error(format!("degree {d} outside 1..=13")));
                }
                if set.iter().any(|x| x.number == d.number) {
                    return Err(entry.error(format!("degree number {} listed twice", d.number)));
                }
                set.insert(d);
            }
            let slot = &mut slots[shorthand.index()];
            if slot.is_some() {
                return Err(entry.error(format!("shorthand {shorthand} defined twice")));
            }
            *slot = Some(set);
        }
        let mut templates = Vec::with_capacity(slots.len());
        for (sh, slot) in Shorthand::ALL.iter().zip(slots) {
            templates.push(slot.ok_or_else(|| ConfigError::Missing(sh.to_string()))?);
        }
        for i in 0..templates.len() {
            for j in i + 1..templates.len() {
                if templates[i] == templates[j] {
                    return Err(ConfigError::Invalid(format!(
                        "shorthands {} and {} share a degree set",
                        Shorthand::ALL[i],
                        Shorthand::ALL[j]
                    )));
                }
            }
        }
        Ok(DegreeTable { templates })
    }

    /// Same as the standard table with some templates replaced.
    pub fn with_overrides(text: &str) -> Result<DegreeTable, ConfigError> {
        let mut merged: BTreeMap<String, String> = config::parse_key_values(STANDARD_SHORTHANDS)?
            .into_iter()
            .map(|e| (e.key, e.value))
            .collect();
        for e in config::parse_key_values(text)? {
            merged.insert(e.key, e.value);
        }
        let joined: String = merged.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        DegreeTable::from_config(&joined)
    }

    pub fn template(&self, shorthand: Shorthand) -> &DegreeSet {
        &self.templates[shorthand.index()]
    }

    pub fn degree_set(&self, chord: &HarteChord) -> DegreeSet {
        self.apply(chord.shorthand, &chord.extensions).0
    }

    /// Apply extensions in order. Also reports removals whose accidentals are
    /// not needed to pick the removed degree.
    fn apply(&self, shorthand: Shorthand, extensions: &[Extension]) -> (DegreeSet, Vec<Extension>) {
        let template = self.template(shorthand);
        let mut set = template.clone();
        let mut unneeded = Vec::new();
        // Only the first plain extension at a number displaces the template degree.
        let mut touched = BTreeSet::new();
        for ext in extensions {
            let n = ext.degree.number;
            let first_touch = touched.insert(n);
            if ext.removal {
                if ext.degree.alteration == 0 {
                    set.retain(|d| d.number != n);
                } else {
                    if set.iter().filter(|d| d.number == n).count() <= 1 {
                        unneeded.push(*ext);
                    }
                    set.remove(&ext.degree);
                }
                continue;
            }
            if set.contains(&ext.degree) {
                continue;
            }
            if first_touch {
                if let Some(t) = template.iter().find(|d| d.number == n) {
                    set.remove(t);
                }
            }
            set.insert(ext.degree);
        }
        (set, unneeded)
    }

    /// Extensions that turn `shorthand` into exactly `target`: removals first,
    /// then additions in ascending degree order.
    pub fn encode(&self, shorthand: Shorthand, target: &DegreeSet) -> Vec<Extension> {
        let template = self.template(shorthand);
        let numbers: BTreeSet<u8> = template.iter().chain(target.iter()).map(|d| d.number).collect();
        let mut removals = Vec::new();
        let mut additions = Vec::new();
        for n in numbers {
            let wanted: Vec<Degree> = target.iter().filter(|d| d.number == n).copied().collect();
            match template.iter().find(|d| d.number == n) {
                Some(t) if wanted.contains(t) => {
                    if wanted.len() > 1 {
                        // Re-adding the template degree after the first
                        // alteration displaced it.
                        additions.extend(wanted.iter().filter(|d| *d != t).map(|d| Extension { removal: false, degree: *d }));
                        additions.push(Extension { removal: false, degree: *t });
                    }
                }
                Some(_) if wanted.is_empty() => removals.push(Extension::remove(n)),
                _ => additions.extend(wanted.iter().map(|d| Extension { removal: false, degree: *d })),
            }
        }
        removals.extend(additions);
        removals
    }

    /// Fewest-extension encoding of a degree set. Ties prefer a shorthand
    /// contained in the set, then a larger template, then list order.
    pub fn canonical_encoding(&self, target: &DegreeSet) -> (Shorthand, Vec<Extension>) {
        Shorthand::ALL
            .iter()
            .map(|&sh| (sh, self.encode(sh, target)))
            .min_by_key(|(sh, exts)| {
                let template = self.template(*sh);
                (exts.len(), !template.is_subset(target), usize::MAX - template.len(), sh.index())
            })
            .expect("non-empty shorthand list")
    }

    /// Rewrite a chord into its canonical encoding, keeping root and bass.
    /// A chord that is already minimal keeps its own shorthand and extension order.
    pub fn canonicalize(&self, chord: &HarteChord) -> HarteChord {
        let target = self.degree_set(chord);
        let min_cost = self.min_cost(&target);
        let (_, unneeded) = self.apply(chord.shorthand, &chord.extensions);
        let has_duplicates = has_duplicate(&chord.extensions);
        if chord.extensions.len() == min_cost && unneeded.is_empty() && !has_duplicates {
            return chord.clone();
        }
        let own = self.encode(chord.shorthand, &target);
        let (shorthand, extensions) =
            if own.len() == min_cost { (chord.shorthand, own) } else { self.canonical_encoding(&target) };
        HarteChord { root: chord.root, shorthand, extensions, bass: chord.bass }
    }

    fn min_cost(&self, target: &DegreeSet) -> usize {
        Shorthand::ALL.iter().map(|&sh| self.encode(sh, target).len()).min().unwrap_or(0)
    }

    pub fn validate_chord(&self, chord: &HarteChord) -> Validation {
        let mut violations = Vec::new();
        if chord.root.alteration.unsigned_abs() > 1 {
            violations.push(Violation::DoubleAccidentalRoot { root: chord.root.to_string() });
        }
        let mut range_ok = true;
        for d in chord.extensions.iter().map(|e| e.degree).chain(chord.bass) {
            if !d.in_range() {
                range_ok = false;
                violations.push(Violation::DegreeOutOfRange { degree: d.to_string() });
            }
        }
        let mut seen = BTreeSet::new();
        for ext in &chord.extensions {
            if !seen.insert(*ext) {
                violations.push(Violation::DuplicateExtension { extension: ext.to_string() });
            }
        }
        let (target, unneeded) = self.apply(chord.shorthand, &chord.extensions);
        for ext in unneeded {
            violations.push(Violation::UnneededRemovalAccidental { extension: ext.to_string() });
        }
        if range_ok && self.min_cost(&target) < chord.extensions.len() {
            let suggestion = self.canonicalize(chord).to_string();
            violations.push(Violation::ShorthandExpressible { suggestion });
        }
        Validation { violations }
    }

    pub fn parse_chord(&self, text: &str) -> Result<HarteChord, ChordError> {
        let chord = parse_chord_syntax(text)?;
        self.check(&chord)?;
        Ok(chord)
    }

    pub fn serialize_chord(&self, chord: &HarteChord) -> Result<String, ChordError> {
        self.check(chord)?;
        Ok(chord.to_string())
    }

    fn check(&self, chord: &HarteChord) -> Result<(), ChordError> {
        let validation = self.validate_chord(chord);
        // Report the most specific rule first.
        let mut errors: Vec<Violation> = validation.errors().cloned().collect();
        errors.sort_by_key(|v| match v {
            Violation::DegreeOutOfRange { .. } => 0,
            Violation::DuplicateExtension { .. } => 1,
            Violation::UnneededRemovalAccidental { .. } => 2,
            _ => 3,
        });
        match errors.into_iter().next() {
            Some(v) => Err(v.into_error(chord)),
            None => Ok(()),
        }
    }

    pub fn equivalent(&self, a: &HarteChord, b: &HarteChord) -> bool {
        a.root == b.root && a.bass == b.bass && self.degree_set(a) == self.degree_set(b)
    }
}

fn has_duplicate(exts: &[Extension]) -> bool {
    let mut seen = BTreeSet::new();
    exts.iter().any(|e| !seen.insert(*e))
}

/// Surface symbol → canonical quality string (`shorthand[(extensions)]`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasTable {
    entries: BTreeMap<String, String>,
}

const STANDARD_ALIASES: &str = include_str!("../data/aliases.conf");

impl AliasTable {
    pub fn standard() -> &'static AliasTable {
        static TABLE: OnceLock<AliasTable> = OnceLock::new();
        TABLE.get_or_init(|| AliasTable::from_config(STANDARD_ALIASES).expect("bundled alias table is valid"))
    }

    /// Each value is checked by parsing it against a `C` root.
    pub fn from_config(text: &str) -> Result<AliasTable, ConfigError> {
        let mut entries = BTreeMap::new();
        for entry in config::parse_key_values(text)? {
            parse_chord(&format!("C:{}", entry.value))
                .map_err(|e| entry.error(format!("alias target {:?}: {e}", entry.value)))?;
            if entries.insert(entry.key.clone(), entry.value.clone()).is_some() {
                return Err(entry.error(format!("alias {:?} defined twice", entry.key)));
            }
        }
        Ok(AliasTable { entries })
    }

    /// Standard aliases extended (and overridden) by `text`.
    pub fn with_overrides(text: &str) -> Result<AliasTable, ConfigError> {
        let mut table = AliasTable::standard().clone();
        let extra = AliasTable::from_config(text)?;
        table.entries.extend(extra.entries);
        Ok(table)
    }

    pub fn get(&self, symbol: &str) -> Option<&str> {
        self.entries.get(symbol).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Canonical chord for a written quality symbol. Canonical qualities
    /// (`maj7`, `7(b9)`) map to themselves even when not listed.
    pub fn normalize(&self, symbol: &str, root: PitchSpelling) -> Result<HarteChord, ChordError> {
        if symbol.is_empty() {
            return Err(ChordError::UnknownSurfaceSymbol(String::new()));
        }
        if let Some(quality) = self.get(symbol) {
            return parse_chord(&format!("{root}:{quality}"));
        }
        parse_chord(&format!("{root}:{symbol}"))
            .map_err(|_| ChordError::UnknownSurfaceSymbol(symbol.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c() -> PitchSpelling {
        PitchSpelling::new('C', 0)
    }

    #[test]
    fn parses_common_jazz_labels() {
        let ch = parse_chord("C:7(b9)").unwrap();
        assert_eq!(ch, HarteChord::new(c(), Shorthand::Seven).with_extensions([Extension::add(-1, 9)]));
        let ch = parse_chord("C:maj(no5,b9)").unwrap();
        assert_eq!(ch.extensions, vec![Extension::remove(5), Extension::add(-1, 9)]);
        assert_eq!(parse_chord("C:maj").unwrap(), HarteChord::new(c(), Shorthand::Maj));
    }

    #[test]
    fn rejects_shorthand_expressible_extension() {
        match parse_chord("C:maj(7,b9)") {
            Err(ChordError::ShorthandExpressible { suggestion, .. }) => assert_eq!(suggestion, "C:maj7(b9)"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_chord("C:min7(b5)"), Err(ChordError::ShorthandExpressible { .. })));
        assert!(matches!(parse_chord("C:min(3)"), Err(ChordError::ShorthandExpressible { .. })));
    }

    #[test]
    fn syntax_errors() {
        for bad in ["", "C", "C:", "H:maj", "C:maj()", "C:maj(b9", "C:maj(,9)", "C:maj/", "c:maj", "C:maj(09)", "C#b:maj", "C :maj", "C:maj(x9)"] {
            assert!(matches!(parse_chord(bad), Err(ChordError::Syntax { .. })), "{bad}");
        }
        assert!(matches!(parse_chord("C:major"), Err(ChordError::UnknownShorthand(_))));
        assert!(matches!(parse_chord("C:maj(b9,b9)"), Err(ChordError::DuplicateExtension { .. })));
        assert!(matches!(parse_chord("C:maj(14)"), Err(ChordError::DegreeOutOfRange { degree: 14, .. })));
    }

    #[test]
    fn serialize_minimal_and_bass_forms() {
        assert_eq!(serialize_chord(&HarteChord::new(c(), Shorthand::Maj6)).unwrap(), "C:maj6");
        let g = HarteChord::new(PitchSpelling::new('G', 0), Shorthand::Min7).with_bass(Degree::new(-1, 7));
        let s = serialize_chord(&g).unwrap();
        assert_eq!(s, "G:min7/b7");
        assert_eq!(parse_chord(&s).unwrap(), g);
        let bad = HarteChord::new(c(), Shorthand::Maj).with_extensions([Extension::add(0, 7)]);
        assert!(serialize_chord(&bad).is_err());
    }

    #[test]
    fn validation_reports_rules() {
        let maj_7 = HarteChord::new(c(), Shorthand::Maj).with_extensions([Extension::add(0, 7)]);
        assert_eq!(
            validate_chord(&maj_7).violations,
            vec![Violation::ShorthandExpressible { suggestion: "C:maj7".into() }]
        );
        let ok = HarteChord::new(c(), Shorthand::Seven).with_extensions([Extension::add(-1, 9)]);
        assert!(validate_chord(&ok).violations.is_empty());
        let dup = HarteChord::new(c(), Shorthand::Maj).with_extensions([Extension::add(-1, 9), Extension::add(-1, 9)]);
        assert!(validate_chord(&dup)
            .violations
            .contains(&Violation::DuplicateExtension { extension: "b9".into() }));
        let far = HarteChord::new(c(), Shorthand::Maj).with_extensions([Extension::add(0, 15)]);
        assert!(validate_chord(&far).violations.contains(&Violation::DegreeOutOfRange { degree: "15".into() }));
    }

    #[test]
    fn double_accidental_root_is_only_a_warning() {
        let chord = parse_chord("F##:maj").unwrap();
        let v = validate_chord(&chord);
        assert!(v.is_ok());
        assert_eq!(v.violations.len(), 1);
        assert!(v.violations[0].is_warning());
    }

    #[test]
    fn removal_accidentals_must_be_needed() {
        assert!(parse_chord("C:hdim7(nob5)").is_err());
        assert!(parse_chord("C:7(no5)").is_ok());
    }

    #[test]
    fn alteration_replaces_template_degree() {
        let ch = parse_chord("C:7(b5)").unwrap();
        let set: Vec<String> = ch.degree_set().iter().map(|d| d.to_string()).collect();
        assert_eq!(set, ["1", "3", "b5", "b7"]);
        let ch = parse_chord("C:7(b9,#9)").unwrap();
        assert_eq!(ch.degree_set().len(), 6);
    }

    #[test]
    fn surface_normalization() {
        assert_eq!(normalize_surface("Δ7", c()).unwrap(), parse_chord("C:maj7").unwrap());
        let d = PitchSpelling::new('D', 0);
        for sym in ["-", "m", "mi", "min"] {
            assert_eq!(normalize_surface(sym, d).unwrap(), parse_chord("D:min").unwrap());
        }
        assert_eq!(normalize_surface("maj7", c()).unwrap(), parse_chord("C:maj7").unwrap());
        assert_eq!(normalize_surface("7(b9)", c()).unwrap(), parse_chord("C:7(b9)").unwrap());
        assert!(matches!(normalize_surface("zz", c()), Err(ChordError::UnknownSurfaceSymbol(_))));
    }

    #[test]
    fn equivalence_ignores_extension_order() {
        let a = parse_chord("C:7(b9,#11)").unwrap();
        let b = parse_chord("C:7(#11,b9)").unwrap();
        assert!(chords_equivalent(&a, &b));
        assert!(!chords_equivalent(&parse_chord("C:maj7").unwrap(), &parse_chord("D:maj7").unwrap()));
        assert!(chords_equivalent(&normalize_surface("Δ7", c()).unwrap(), &parse_chord("C:maj7").unwrap()));
        // Enharmonic roots stay distinct.
        assert!(!chords_equivalent(&parse_chord("C#:maj").unwrap(), &parse_chord("Db:maj").unwrap()));
    }

    #[test]
    fn table_overrides() {
        let t = DegreeTable::with_overrides("sus2 = 1,9,5").unwrap();
        assert_eq!(t.template(Shorthand::Sus2).len(), 3);
        assert!(DegreeTable::with_overrides("sus2 = 1,3,5").is_err());
        assert!(DegreeTable::with_overrides("nope = 1").is_err());
        let aliases = AliasTable::with_overrides("mj = maj7").unwrap();
        assert_eq!(aliases.normalize("mj", c()).unwrap().shorthand, Shorthand::Maj7);
        assert!(AliasTable::from_config("x = notachord").is_err());
    }
}
