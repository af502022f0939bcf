//! Melody-spine tokens: `[(]<recip><dots><pitch|rest><accidentals><ornaments>`.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;

/// Rhythmic values are fractions of a whole note.
pub type Duration = Ratio<u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ornament {
    SlurOpen,
    SlurClose,
    TieOpen,
    TieClose,
    TieContinue,
    BeamStart,
    BeamEnd,
    HookForward,
    HookBackward,
    Fermata,
}

impl Ornament {
    pub fn symbol(self) -> char {
        match self {
            Ornament::SlurOpen => '(',
            Ornament::SlurClose => ')',
            Ornament::TieOpen => '[',
            Ornament::TieClose => ']',
            Ornament::TieContinue => '_',
            Ornament::BeamStart => 'L',
            Ornament::BeamEnd => 'J',
            Ornament::HookForward => 'K',
            Ornament::HookBackward => 'k',
            Ornament::Fermata => ';',
        }
    }

    fn prefix(c: char) -> Option<Ornament> {
        match c {
            '(' => Some(Ornament::SlurOpen),
            '[' => Some(Ornament::TieOpen),
            _ => None,
        }
    }

    fn suffix(c: char) -> Option<Ornament> {
        match c {
            ')' => Some(Ornament::SlurClose),
            ']' => Some(Ornament::TieClose),
            '_' => Some(Ornament::TieContinue),
            'L' => Some(Ornament::BeamStart),
            'J' => Some(Ornament::BeamEnd),
            'K' => Some(Ornament::HookForward),
            'k' => Some(Ornament::HookBackward),
            ';' => Some(Ornament::Fermata),
            _ => None,
        }
    }

    fn note_only(self) -> bool {
        !matches!(self, Ornament::Fermata | Ornament::SlurOpen | Ornament::SlurClose)
    }
}

/// Kern duration: reciprocal of the note value plus augmentation dots.
/// `0` denotes a breve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Recip {
    pub value: u32,
    pub dots: u8,
}

impl Recip {
    pub const MAX_VALUE: u32 = 64;

    pub fn new(value: u32, dots: u8) -> Self {
        Recip { value, dots }
    }

    pub fn duration(self) -> Duration {
        let base = if self.value == 0 { Ratio::from_integer(2) } else { Ratio::new(1, self.value as u64) };
        // A note with d dots lasts (2 - 1/2^d) times its undotted value.
        let factor = Ratio::new((1u64 << (self.dots + 1)) - 1, 1u64 << self.dots);
        base * factor
    }

    /// Inverse of [`Recip::duration`] when the duration is expressible with
    /// the given number of dots.
    pub fn from_duration(duration: Duration, dots: u8) -> Option<Recip> {
        if *duration.numer() == 0 || dots > 6 {
            return None;
        }
        let factor = Ratio::new((1u64 << (dots + 1)) - 1, 1u64 << dots);
        let base = duration / factor;
        if base == Ratio::from_integer(2) {
            return Some(Recip::new(0, dots));
        }
        if *base.numer() != 1 {
            return None;
        }
        let value = *base.denom();
        (value <= Recip::MAX_VALUE as u64).then(|| Recip::new(value as u32, dots))
    }
}

impl fmt::Display for Recip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)?;
        for _ in 0..self.dots {
            f.write_str(".")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Accidental {
    Sharp(u8),
    Flat(u8),
    Natural,
}

impl Accidental {
    pub fn alteration(self) -> i8 {
        match self {
            Accidental::Sharp(n) => n as i8,
            Accidental::Flat(n) => -(n as i8),
            Accidental::Natural => 0,
        }
    }
}

impl fmt::Display for Accidental {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Accidental::Sharp(n) => f.write_str(&"#".repeat(n as usize)),
            Accidental::Flat(n) => f.write_str(&"-".repeat(n as usize)),
            Accidental::Natural => f.write_str("n"),
        }
    }
}

/// Letter repetition and case encode the octave: `c` is middle C (octave 4),
/// `cc` octave 5, `C` octave 3, `CC` octave 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KernPitch {
    pub letter: char,
    pub octave: i8,
    pub accidental: Option<Accidental>,
}

impl KernPitch {
    pub fn spelling(&self) -> String {
        let (c, n) = if self.octave >= 4 {
            (self.letter.to_ascii_lowercase(), (self.octave - 3) as usize)
        } else {
            (self.letter.to_ascii_uppercase(), (4 - self.octave) as usize)
        };
        std::iter::repeat_n(c, n).collect()
    }
}

impl fmt::Display for KernPitch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spelling())?;
        if let Some(acc) = self.accidental {
            write!(f, "{acc}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoteContent {
    Pitch(KernPitch),
    /// `r`, or `rr` for a whole-measure rest.
    Rest { repeat: u8 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MelodyToken {
    pub prefix: Vec<Ornament>,
    pub recip: Recip,
    pub content: NoteContent,
    pub suffix: Vec<Ornament>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad melody token {token:?}: {reason}")]
pub struct TokenError {
    pub token: String,
    pub reason: String,
}

impl MelodyToken {
    pub fn is_rest(&self) -> bool {
        matches!(self.content, NoteContent::Rest { .. })
    }

    pub fn duration(&self) -> Duration {
        self.recip.duration()
    }

    pub fn ornaments(&self) -> impl Iterator<Item = Ornament> + '_ {
        self.prefix.iter().chain(self.suffix.iter()).copied()
    }

    pub fn has(&self, o: Ornament) -> bool {
        self.ornaments().any(|x| x == o)
    }

    /// Split into graphical pieces: each ornament, the recip value, each dot,
    /// the pitch letters and each accidental character. Concatenating the
    /// pieces gives back the token text.
    pub fn pieces(&self) -> Vec<String> {
        let mut out: Vec<String> = self.prefix.iter().map(|o| o.symbol().to_string()).collect();
        out.push(self.recip.value.to_string());
        out.extend(std::iter::repeat_n(".".to_string(), self.recip.dots as usize));
        match self.content {
            NoteContent::Pitch(p) => {
                out.push(p.spelling());
                if let Some(acc) = p.accidental {
                    out.extend(acc.to_string().chars().map(String::from));
                }
            }
            NoteContent::Rest { repeat } => out.push("r".repeat(repeat as usize)),
        }
        out.extend(self.suffix.iter().map(|o| o.symbol().to_string()));
        out
    }
}

impl fmt::Display for MelodyToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.prefix {
            write!(f, "{}", o.symbol())?;
        }
        write!(f, "{}", self.recip)?;
        match self.content {
            NoteContent::Pitch(p) => write!(f, "{p}")?,
            NoteContent::Rest { repeat } => f.write_str(&"r".repeat(repeat as usize))?,
        }
        for o in &self.suffix {
            write!(f, "{}", o.symbol())?;
        }
        Ok(())
    }
}

fn run_of(s: &str, c: char) -> usize {
    s.chars().take_while(|x| *x == c).count()
}

impl FromStr for MelodyToken {
    type Err = TokenError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| TokenError { token: text.to_string(), reason: reason.to_string() };
        let mut rest = text;

        let mut prefix = Vec::new();
        while let Some(o) = rest.chars().next().and_then(Ornament::prefix) {
            prefix.push(o);
            rest = &rest[1..];
        }

        let digits = rest.bytes().take_while(u8::is_ascii_digit).count();
        if digits == 0 {
            return Err(err("missing duration"));
        }
        let (num, tail) = rest.split_at(digits);
        if num.len() > 1 && num.starts_with('0') {
            return Err(err("duration has a leading zero"));
        }
        let value: u32 = num.parse().map_err(|_| err("duration out of range"))?;
        if value > Recip::MAX_VALUE {
            return Err(err("duration out of range"));
        }
        rest = tail;
        let dots = run_of(rest, '.');
        rest = &rest[dots..];
        let recip = Recip::new(value, dots as u8);

        let first = rest.chars().next().ok_or_else(|| err("missing pitch or rest"))?;
        let content = match first {
            'r' => {
                let n = run_of(rest, 'r');
                if n > 2 {
                    return Err(err("too many rest markers"));
                }
                rest = &rest[n..];
                NoteContent::Rest { repeat: n as u8 }
            }
            'a'..='g' | 'A'..='G' => {
                let n = run_of(rest, first);
                rest = &rest[n..];
                let octave = if first.is_ascii_lowercase() { 3 + n as i8 } else { 4 - n as i8 };
                let accidental = match rest.chars().next() {
                    Some('#') => {
                        let k = run_of(rest, '#');
                        rest = &rest[k..];
                        Some(Accidental::Sharp(k as u8))
                    }
                    Some('-') => {
                        let k = run_of(rest, '-');
                        rest = &rest[k..];
                        Some(Accidental::Flat(k as u8))
                    }
                    Some('n') => {
                        rest = &rest[1..];
                        Some(Accidental::Natural)
                    }
                    _ => None,
                };
                NoteContent::Pitch(KernPitch { letter: first.to_ascii_uppercase(), octave, accidental })
            }
            _ => return Err(err("expected pitch letter or rest")),
        };

        let mut suffix = Vec::new();
        for c in rest.chars() {
            match Ornament::suffix(c) {
                Some(o) => suffix.push(o),
                None => return Err(err(&format!("unexpected character {c:?}"))),
            }
        }
        let token = MelodyToken { prefix, recip, content, suffix };
        if token.is_rest() && token.ornaments().any(Ornament::note_only) {
            return Err(err("beams and ties only apply to notes"));
        }
        Ok(token)
    }
}

/// Content of a melody field on a data line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MelodyField {
    /// `.`: no new event in this spine.
    Null,
    /// One token, or several space-separated ones for a polyphonic slice.
    Notes(Vec<MelodyToken>),
}

impl MelodyField {
    pub fn parse(text: &str) -> Result<MelodyField, TokenError> {
        if text == "." {
            return Ok(MelodyField::Null);
        }
        let notes = text.split(' ').map(str::parse).collect::<Result<Vec<MelodyToken>, _>>()?;
        Ok(MelodyField::Notes(notes))
    }

    pub fn is_polyphonic(&self) -> bool {
        matches!(self, MelodyField::Notes(n) if n.len() > 1)
    }

    /// Duration of the slice; polyphonic slices use their first note.
    pub fn duration(&self) -> Duration {
        match self {
            MelodyField::Null => Ratio::from_integer(0),
            MelodyField::Notes(n) => n[0].duration(),
        }
    }
}
