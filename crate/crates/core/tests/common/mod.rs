#![allow(dead_code)]

use std::path::PathBuf;

use leadsheet::harte::{DegreeTable, Extension, HarteChord, PitchSpelling, Shorthand};
use proptest::prelude::*;

pub fn fixture_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// `(file name, text)` for every file in a fixture directory with the given
/// extension, sorted by name.
pub fn fixtures(name: &str, ext: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(fixture_dir(name))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

pub fn root() -> impl Strategy<Value = PitchSpelling> {
    (prop::sample::select(vec!['A', 'B', 'C', 'D', 'E', 'F', 'G']), -1i8..=1).prop_map(|(l, a)| PitchSpelling::new(l, a))
}

pub fn shorthand() -> impl Strategy<Value = Shorthand> {
    prop::sample::select(Shorthand::ALL.to_vec())
}

fn extension() -> impl Strategy<Value = Extension> {
    prop_oneof![
        (-1i8..=1, prop::sample::select(vec![2u8, 4, 5, 6, 7, 9, 11, 13])).prop_map(|(a, n)| Extension::add(a, n)),
        prop::sample::select(vec![1u8, 3, 5, 7]).prop_map(Extension::remove),
    ]
}

/// Valid chords in canonical form: arbitrary labels pushed through
/// [`DegreeTable::canonicalize`].
pub fn chord() -> impl Strategy<Value = HarteChord> {
    (root(), shorthand(), prop::collection::vec(extension(), 0..3), prop::option::of(prop::sample::select(vec!["3", "5", "b7", "9"])))
        .prop_filter_map("no canonical form", |(r, s, exts, bass)| {
            let mut text = HarteChord::new(r, s).with_extensions(exts).to_string();
            if let Some(b) = bass {
                text.push('/');
                text.push_str(b);
            }
            let raw = leadsheet::harte::parse_chord_syntax(&text).ok()?;
            let canon = DegreeTable::standard().canonicalize(&raw);
            leadsheet::harte::parse_chord(&canon.to_string()).ok()
        })
}

fn melody_token() -> impl Strategy<Value = String> {
    let recip = (prop::sample::select(vec![0u32, 1, 2, 3, 4, 6, 8, 12, 16, 24, 32]), 0usize..=2)
        .prop_map(|(v, d)| format!("{v}{}", ".".repeat(d)));
    let pitch = (
        prop::sample::select(vec!['a', 'b', 'c', 'd', 'e', 'f', 'g']),
        any::<bool>(),
        1usize..=3,
        prop::sample::select(vec!["", "", "#", "-", "##", "--", "n"]),
    )
        .prop_map(|(l, upper, n, acc)| {
            let c = if upper { l.to_ascii_uppercase() } else { l };
            format!("{}{acc}", c.to_string().repeat(n))
        });
    let note = (
        prop::sample::subsequence(vec!["(", "["], 0..=2),
        recip.clone(),
        pitch,
        prop::collection::vec(prop::sample::select(vec!["L", "J", "]", "_", ")", "K", "k", ";"]), 0..3),
    )
        .prop_map(|(pre, r, p, suf)| format!("{}{r}{p}{}", pre.concat(), suf.concat()));
    let rest = (recip, prop::sample::select(vec!["r", "r", "rr"]), prop::sample::select(vec!["", ";", ")"]))
        .prop_map(|(r, m, s)| format!("{r}{m}{s}"));
    prop_oneof![6 => note, 2 => rest]
}

fn melody_field() -> impl Strategy<Value = String> {
    prop_oneof![
        8 => melody_token(),
        1 => prop::collection::vec(melody_token(), 2..4).prop_map(|v| v.join(" ")),
        1 => Just(".".to_string()),
    ]
}

fn data_line() -> impl Strategy<Value = String> {
    (melody_field(), prop::option::weighted(0.35, chord())).prop_map(|(m, c)| {
        let c = c.map(|c| c.to_string()).unwrap_or_else(|| ".".into());
        format!("{m}\t{c}")
    })
}

fn measure() -> impl Strategy<Value = Vec<String>> {
    (
        prop::collection::vec(data_line(), 1..6),
        prop::option::weighted(0.15, prop::sample::select(vec!["!! comment", "!!rit.", "!!linebreak:original"])),
        prop::option::weighted(0.1, prop::sample::select(vec!["*M3/4\t*", "*k[b-]\t*", "*clefG2\t*", "*>A\t*"])),
        prop::option::weighted(0.1, Just("!cue\t!".to_string())),
    )
        .prop_map(|(data, global, interp, local)| {
            let mut out = Vec::new();
            out.extend(global.map(str::to_string));
            out.extend(interp.map(str::to_string));
            out.extend(data);
            out.extend(local);
            out
        })
}

/// Valid two-spine documents: optional reference records, context
/// interpretations, numbered measures with chords, comments, linebreak
/// markers and polyphonic slices.
pub fn kern_document() -> impl Strategy<Value = String> {
    (
        prop::option::of(prop::sample::select(vec!["!!!COM: Anon", "!!!OTL: Blue Sketch"])),
        prop::sample::select(vec!["*k[]", "*k[f#]", "*k[b-e-a-]"]),
        prop::sample::select(vec!["*M4/4", "*M3/4", "*M6/8"]),
        prop::collection::vec(measure(), 1..7),
        any::<bool>(),
    )
        .prop_map(|(reference, key, meter, measures, final_bar)| {
            let mut lines = Vec::new();
            lines.extend(reference.map(str::to_string));
            lines.push("**kern\t**harte".to_string());
            lines.push("*clefG2\t*".to_string());
            lines.push(format!("{key}\t*"));
            lines.push(format!("{meter}\t*"));
            for (i, m) in measures.into_iter().enumerate() {
                lines.push(format!("={}\t={}", i + 1, i + 1));
                lines.extend(m);
            }
            if final_bar {
                lines.push("==\t==".to_string());
            }
            lines.push("*-\t*-".to_string());
            lines.join("\n") + "\n"
        })
}

/// 163 pieces: 103 with one handwritten copy, 40 with two, 10 with four
/// and 10 with seven (293 scores).
pub fn multiplicity_profile() -> Vec<leadsheet::dataset::PieceRecord> {
    let mut pieces = Vec::new();
    for (count, copies) in [(103, 1), (40, 2), (10, 4), (10, 7)] {
        for _ in 0..count {
            let id = format!("piece{:03}", pieces.len());
            let scores: Vec<String> = (0..copies).map(|c| format!("{id}_hw{c}")).collect();
            pieces.push(leadsheet::dataset::PieceRecord::new(id, scores));
        }
    }
    pieces
}
