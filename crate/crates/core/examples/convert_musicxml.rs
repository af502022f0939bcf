//! Convert a MusicXML lead sheet to two-spine kern.
//!
//! cargo run --example convert_musicxml -- tests/fixtures/musicxml/misbehavin.musicxml

use std::path::PathBuf;

use leadsheet::mxl_convert::{ConvertOptions, Converter};

fn main() {
    let path: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/musicxml/misbehavin.musicxml").into())
        .into();
    let converter = Converter::new(ConvertOptions::default());
    match converter.score_file(&path) {
        Ok(conv) => {
            print!("{}", conv.document);
            for w in &conv.warnings {
                eprintln!("warning (measure {}): {}", w.measure.as_deref().unwrap_or("?"), w.message);
            }
            eprintln!("{} harmonies, {} system breaks", conv.harmony_count, conv.system_breaks);
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            std::process::exit(1);
        }
    }
}
