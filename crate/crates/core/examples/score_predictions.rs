//! Score a hypothesis against a reference and show the line diff.
//!
//! cargo run --example score_predictions -- ref.krn hyp.krn

use leadsheet::metrics::{edit_report, render_alignment};

const REFERENCE: &str = "**kern\t**harte\n*clefG2\t*\n*k[b-]\t*\n*M4/4\t*\n=1\t=1\n4f\tF:maj7\n4a\t.\n2cc\tD:min7\n==\t==\n*-\t*-\n";
const HYPOTHESIS: &str = "**kern\t**harte\n*clefG2\t*\n*k[b-]\t*\n*M4/4\t*\n=1\t=1\n4f\tF:maj7\n4g\t.\n2cc\tD:7\n==\t==\n*-\t*-\n";

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (reference, hypothesis) = match args.as_slice() {
        [r, h] => (std::fs::read_to_string(r).unwrap(), std::fs::read_to_string(h).unwrap()),
        _ => (REFERENCE.to_string(), HYPOTHESIS.to_string()),
    };
    let report = edit_report(&reference, &hypothesis).unwrap_or_else(|e| panic!("{e}"));
    for (name, ratio, counts) in
        [("CER", report.cer, report.characters), ("WER", report.wer, report.words), ("LER", report.ler, report.lines)]
    {
        println!(
            "{name} {:6.2}%  ({} sub, {} del, {} ins over {})",
            ratio * 100.0,
            counts.substitutions,
            counts.deletions,
            counts.insertions,
            counts.reference_length
        );
    }
    println!();
    print!("{}", render_alignment(&reference, &hypothesis));
}
