//! Parse, check and normalise chord labels.
//!
//! cargo run --example chord_labels -- "C:7(b9)" "C:maj(7,b9)" "F#:min7/b3"

use leadsheet::harte::{chords_equivalent, normalize_surface, parse_chord, parse_chord_syntax, validate_chord, DegreeTable, PitchSpelling};

fn main() {
    let mut labels: Vec<String> = std::env::args().skip(1).collect();
    if labels.is_empty() {
        labels = ["C:7(b9)", "C:maj(no5,b9)", "C:maj(7,b9)", "G:min7/b7", "Bb:13(#11)"].map(String::from).to_vec();
    }
    let table = DegreeTable::standard();
    for label in &labels {
        match parse_chord(label) {
            Ok(chord) => {
                let degrees: Vec<String> = table.degree_set(&chord).iter().map(ToString::to_string).collect();
                println!("{label:<16} ok       degrees {}", degrees.join(" "));
            }
            Err(e) => {
                println!("{label:<16} rejected {e}");
                if let Ok(raw) = parse_chord_syntax(label) {
                    for v in validate_chord(&raw).violations {
                        println!("{:<16}          - {v}", "");
                    }
                }
            }
        }
    }

    println!();
    let c = PitchSpelling::new('C', 0);
    for symbol in ["Δ7", "M7", "maj7", "-7", "ø", "°7", "7alt"] {
        match normalize_surface(symbol, c) {
            Ok(chord) => {
                let same = chords_equivalent(&chord, &parse_chord("C:maj7").unwrap());
                println!("{symbol:<6} -> {chord:<12} same as C:maj7: {same}");
            }
            Err(e) => println!("{symbol:<6} -> {e}"),
        }
    }
}
