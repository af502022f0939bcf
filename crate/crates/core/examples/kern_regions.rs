//! Validate a lead sheet and cut it into one document per staff system.
//!
//! cargo run --example kern_regions -- tests/fixtures/kern/tune03.krn

use leadsheet::kern::{parse_kern, split_regions, strip_annotations, validate_document};

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/kern/tune03.krn").into());
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    let doc = match parse_kern(&text) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("{path}: {e}");
            std::process::exit(1);
        }
    };
    for d in validate_document(&doc) {
        eprintln!("{path}: {d}");
    }
    println!("{} measures, {} chords, {} systems", doc.measure_count(), doc.chords().count(), doc.linebreak_count() + 1);

    for (i, region) in split_regions(&doc, true).iter().enumerate() {
        let clean = strip_annotations(region, false);
        println!("\n--- region {} ({} measures)", i + 1, clean.measure_count());
        print!("{clean}");
    }
}
