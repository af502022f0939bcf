//! Compare the three tokenisation strategies on a corpus and round-trip one
//! document through ids.
//!
//! cargo run --example tokenize_corpus -- tests/fixtures/kern

use leadsheet::tokenize::{build_vocabulary, decode, detokenize, encode, tokenize, EncodeOptions, Strategy, UnknownPolicy};

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/kern").into());
    let mut corpus: Vec<(String, String)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{dir}: {e}"))
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "krn"))
        .map(|p| (p.display().to_string(), std::fs::read_to_string(&p).unwrap()))
        .collect();
    corpus.sort();

    println!("{} documents", corpus.len());
    println!("{:<8} {:>8} {:>14}", "strategy", "vocab", "tokens/doc");
    for s in Strategy::ALL {
        let vocab = build_vocabulary(&corpus, s, false).unwrap_or_else(|e| panic!("{e}"));
        let total: usize = corpus.iter().map(|(_, t)| tokenize(t, s).unwrap().len()).sum();
        println!("{:<8} {:>8} {:>14.1}", s.as_str(), vocab.len(), total as f64 / corpus.len() as f64);
    }

    let (name, text) = &corpus[0];
    let vocab = build_vocabulary(&corpus, Strategy::Medium, false).unwrap();
    let stream = tokenize(text, Strategy::Medium).unwrap();
    let ids = encode(&stream, &vocab, EncodeOptions { framing: true, unknown: UnknownPolicy::Error }).unwrap();
    println!("\n{name}: first medium tokens {:?}", &stream.tokens[..12]);
    println!("ids {:?} ...", &ids[..12]);
    let back = detokenize(&decode(&ids, &vocab, true).unwrap()).unwrap();
    println!("round trip identical: {}", &back == text);
}
