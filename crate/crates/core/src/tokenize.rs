//! Word, character and medium-level tokenisation of kern documents, with
//! explicit field (`<t>`) and line (`<b>`) separators so every strategy is
//! lossless.
//!
//! * word: each tab- or newline-separated field is one token.
//! * char: each character is one token.
//! * medium: one token per graphical symbol. In the melody spine the pitch
//!   letters (`ee`) and the duration (`16`) are single tokens and every
//!   other character (accidentals, dots, ties, slurs, beams) is its own
//!   token. Chords split into root, `:`, shorthand, each extension and the
//!   bass, keeping the punctuation. Interpretations, barlines and comments
//!   stay whole.
//!
//! Within a line, concatenating the tokens of a field gives back the field,
//! so [`detokenize`] is the same for all three strategies.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::harte::{self, ChordError};
use crate::kern::{self, KernDocument, KernError, KernLine, LineKind, MelodyField, TokenError, NULL_TOKEN};

pub const PAD: &str = "<pad>";
pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const TAB: &str = "<t>";
pub const NEWLINE: &str = "<b>";
pub const UNK: &str = "<unk>";

/// Specials in id order; every vocabulary starts with these.
pub const SPECIALS: [&str; 5] = [PAD, BOS, EOS, TAB, NEWLINE];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Word,
    Char,
    Medium,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Word, Strategy::Char, Strategy::Medium];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Word => "word",
            Strategy::Char => "char",
            Strategy::Medium => "medium",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown strategy {s:?} (expected word, char or medium)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TokenizeError {
    #[error(transparent)]
    Kern(#[from] KernError),
    #[error("line {line}: {source}")]
    Melody { line: usize, source: TokenError },
    #[error("line {line}: {source}")]
    Chord { line: usize, source: ChordError },
    #[error("{name}: {source}")]
    InFile { name: String, source: Box<TokenizeError> },
    #[error("malformed token stream at token {position}: {reason}")]
    MalformedStream { position: usize, reason: String },
    #[error("token {token:?} at position {position} is not in the vocabulary")]
    OutOfVocabulary { token: String, position: usize },
    #[error("id {id} at position {position} is outside the vocabulary (size {size})")]
    OutOfRangeId { id: u32, position: usize, size: usize },
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub strategy: Strategy,
    pub tokens: Vec<String>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Space-separated text form; spaces and backslashes inside tokens are
    /// escaped as `\s` and `\\`.
    pub fn to_escaped_text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.replace('\\', "\\\\").replace(' ', "\\s"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn from_escaped_text(strategy: Strategy, text: &str) -> TokenStream {
        let tokens = text
            .split(' ')
            .filter(|t| !t.is_empty())
            .map(|t| {
                let mut out = String::with_capacity(t.len());
                let mut chars = t.chars();
                while let Some(c) = chars.next() {
                    if c == '\\' {
                        match chars.next() {
                            Some('s') => out.push(' '),
                            Some(other) => out.push(other),
                            None => out.push('\\'),
                        }
                    } else {
                        out.push(c);
                    }
                }
                out
            })
            .collect();
        TokenStream { strategy, tokens }
    }
}

/// Tokenize a complete kern document.
pub fn tokenize(text: &str, strategy: Strategy) -> Result<TokenStream, TokenizeError> {
    let doc = kern::parse_kern(text)?;
    tokenize_document(&doc, strategy)
}

/// Tokenize an already-parsed document. Fragments without header or
/// terminator (e.g. regions split without context) are accepted.
pub fn tokenize_document(doc: &KernDocument, strategy: Strategy) -> Result<TokenStream, TokenizeError> {
    let mut tokens = Vec::new();
    for (idx, line) in doc.lines.iter().enumerate() {
        for (i, field) in line.fields.iter().enumerate() {
            if i > 0 {
                tokens.push(TAB.to_string());
            }
            match strategy {
                Strategy::Word => tokens.push(field.clone()),
                Strategy::Char => tokens.extend(field.chars().map(String::from)),
                Strategy::Medium => medium_field(line, i, idx + 1, &mut tokens)?,
            }
        }
        tokens.push(NEWLINE.to_string());
    }
    Ok(TokenStream { strategy, tokens })
}

fn medium_field(line: &KernLine, index: usize, line_no: usize, out: &mut Vec<String>) -> Result<(), TokenizeError> {
    let field = &line.fields[index];
    if line.kind != LineKind::Data || field == NULL_TOKEN {
        out.push(field.clone());
        return Ok(());
    }
    if index == 0 {
        let MelodyField::Notes(notes) = MelodyField::parse(field).map_err(|source| TokenizeError::Melody { line: line_no, source })?
        else {
            unreachable!("null handled above")
        };
        for (i, note) in notes.iter().enumerate() {
            if i > 0 {
                out.push(" ".to_string());
            }
            out.extend(note.pieces());
        }
    } else {
        let chord = harte::parse_chord_syntax(field).map_err(|source| TokenizeError::Chord { line: line_no, source })?;
        out.push(chord.root.to_string());
        out.push(":".into());
        out.push(chord.shorthand.to_string());
        if !chord.extensions.is_empty() {
            out.push("(".into());
            for (i, ext) in chord.extensions.iter().enumerate() {
                if i > 0 {
                    out.push(",".into());
                }
                out.push(ext.to_string());
            }
            out.push(")".into());
        }
        if let Some(bass) = chord.bass {
            out.push("/".into());
            out.push(bass.to_string());
        }
    }
    Ok(())
}

/// Rebuild kern text. A line holds at most one `<t>`, fields are never
/// empty, and only `<t>`/`<b>` may appear among the special tokens.
pub fn detokenize(stream: &TokenStream) -> Result<String, TokenizeError> {
    let malformed = |position: usize, reason: &str| TokenizeError::MalformedStream { position, reason: reason.to_string() };
    let mut out = String::new();
    let mut field_len = 0usize;
    let mut tabs = 0usize;
    for (pos, tok) in stream.tokens.iter().enumerate() {
        match tok.as_str() {
            TAB => {
                if field_len == 0 {
                    return Err(malformed(pos, "empty spine field before <t>"));
                }
                tabs += 1;
                if tabs > 1 {
                    return Err(malformed(pos, "more than two spine fields on one line"));
                }
                out.push('\t');
                field_len = 0;
            }
            NEWLINE => {
                if field_len == 0 {
                    return Err(malformed(pos, "empty field or empty line"));
                }
                out.push('\n');
                field_len = 0;
                tabs = 0;
            }
            PAD | BOS | EOS | UNK => return Err(malformed(pos, &format!("unexpected special token {tok}"))),
            "" => return Err(malformed(pos, "empty token")),
            t if t.contains(['\t', '\n']) => return Err(malformed(pos, "token contains a raw separator")),
            t => {
                out.push_str(t);
                field_len += t.len();
            }
        }
    }
    if field_len == 0 && tabs > 0 {
        return Err(malformed(stream.tokens.len(), "stream ends with an empty field"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    strategy: Strategy,
    tokens: Vec<String>,
    specials: Vec<String>,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    strategy: Strategy,
    specials: Vec<String>,
    tokens: Vec<String>,
}

impl Vocabulary {
    fn from_parts(strategy: Strategy, specials: Vec<String>, tokens: Vec<String>) -> Result<Self, TokenizeError> {
        let invalid = |m: String| TokenizeError::InvalidVocabulary(m);
        for (i, s) in SPECIALS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*s) {
                return Err(invalid(format!("id {i} must be {s}")));
            }
        }
        if specials.len() < SPECIALS.len() || tokens[..specials.len()] != specials[..] {
            return Err(invalid("specials must lead the token list in order".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(invalid(format!("duplicate token {t:?}")));
            }
        }
        Ok(Vocabulary { strategy, tokens, specials, index })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn specials(&self) -> &[String] {
        &self.specials
    }

    pub fn to_json(&self) -> String {
        let file = VocabularyFile { strategy: self.strategy, specials: self.specials.clone(), tokens: self.tokens.clone() };
        serde_json::to_string_pretty(&file).expect("vocabulary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TokenizeError> {
        let file: VocabularyFile =
            serde_json::from_str(text).map_err(|e| TokenizeError::InvalidVocabulary(e.to_string()))?;
        Vocabulary::from_parts(file.strategy, file.specials, file.tokens)
    }
}

/// Vocabulary over the union of the corpus's tokens: specials first, then
/// the remaining tokens in byte order. `corpus` pairs a file name with its
/// text; errors name the offending file.
pub fn build_vocabulary<N, T>(corpus: &[(N, T)], strategy: Strategy, include_unk: bool) -> Result<Vocabulary, TokenizeError>
where
    N: AsRef<str> + Sync,
    T: AsRef<str> + Sync,
{
    let per_file: Vec<Result<BTreeSet<String>, TokenizeError>> = corpus
        .par_iter()
        .map(|(name, text)| {
            tokenize(text.as_ref(), strategy)
                .map(|s| s.tokens.into_iter().collect())
                .map_err(|e| TokenizeError::InFile { name: name.as_ref().to_string(), source: Box::new(e) })
        })
        .collect();
    let mut seen = BTreeSet::new();
    for set in per_file {
        seen.extend(set?);
    }
    let mut specials: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    if include_unk {
        specials.push(UNK.to_string());
    }
    let mut tokens = specials.clone();
    tokens.extend(seen.into_iter().filter(|t| !specials.contains(t)));
    Vocabulary::from_parts(strategy, specials, tokens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownPolicy {
    #[default]
    Error,
    /// Replace unknown tokens with `<unk>`; the vocabulary must contain it.
    Substitute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EncodeOptions {
    /// Wrap the ids in `<bos>` ... `<eos>`.
    pub framing: bool,
    pub unknown: UnknownPolicy,
}

pub fn encode(stream: &TokenStream, vocab: &Vocabulary, options: EncodeOptions) -> Result<Vec<u32>, TokenizeError> {
    let unk = match options.unknown {
        UnknownPolicy::Error => None,
        UnknownPolicy::Substitute => Some(
            vocab.id_of(UNK).ok_or_else(|| TokenizeError::InvalidVocabulary("vocabulary has no <unk> token".into()))?,
        ),
    };
    let mut ids = Vec::with_capacity(stream.len() + 2);
    if options.framing {
        ids.push(vocab.id_of(BOS).expect("specials present"));
    }
    for (position, tok) in stream.tokens.iter().enumerate() {
        match (vocab.id_of(tok), unk) {
            (Some(id), _) => ids.push(id),
            (None, Some(u)) => ids.push(u),
            (None, None) => return Err(TokenizeError::OutOfVocabulary { token: tok.clone(), position }),
        }
    }
    if options.framing {
        ids.push(vocab.id_of(EOS).expect("specials present"));
    }
    Ok(ids)
}

/// Map ids back to tokens. With `framing`, a leading `<bos>` is skipped,
/// decoding stops at the first `<eos>` and `<pad>` ids are dropped, which is
/// what a model's output sequence needs.
pub fn decode(ids: &[u32], vocab: &Vocabulary, framing: bool) -> Result<TokenStream, TokenizeError> {
    let mut tokens = Vec::with_capacity(ids.len());
    for (position, &id) in ids.iter().enumerate() {
        let tok = vocab.token(id).ok_or(TokenizeError::OutOfRangeId { id, position, size: vocab.len() })?;
        if framing {
            match tok {
                BOS if position == 0 => continue,
                EOS => break,
                PAD => continue,
                _ => {}
            }
        }
        tokens.push(tok.to_string());
    }
    Ok(TokenStream { strategy: vocab.strategy(), tokens })
}
