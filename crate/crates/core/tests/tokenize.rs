mod common;

use leadsheet::kern::parse_kern;
use leadsheet::tokenize::{
    build_vocabulary, decode, detokenize, encode, tokenize, tokenize_document, EncodeOptions, Strategy, TokenStream, TokenizeError,
    UnknownPolicy, Vocabulary, BOS, EOS, NEWLINE, SPECIALS, TAB, UNK,
};
use proptest::prelude::*;

fn corpus() -> Vec<(String, String)> {
    common::fixtures("kern", "krn")
}

#[test]
fn corpus_round_trips_for_every_strategy() {
    for (name, text) in corpus() {
        for s in Strategy::ALL {
            let stream = tokenize(&text, s).unwrap_or_else(|e| panic!("{name} {s:?}: {e}"));
            assert_eq!(detokenize(&stream).unwrap(), text, "{name} {s:?}");
        }
    }
}

#[test]
fn vocabulary_sizes_are_ordered() {
    let corpus = corpus();
    let size = |s| build_vocabulary(&corpus, s, false).unwrap().len();
    let (c, m, w) = (size(Strategy::Char), size(Strategy::Medium), size(Strategy::Word));
    assert!(c < m && m < w, "{c} {m} {w}");
}

#[test]
fn vocabulary_is_deterministic_and_specials_first() {
    let corpus = corpus();
    let mut reversed = corpus.clone();
    reversed.reverse();
    for s in Strategy::ALL {
        let a = build_vocabulary(&corpus, s, true).unwrap();
        let b = build_vocabulary(&reversed, s, true).unwrap();
        assert_eq!(a, b);
        for (i, sp) in SPECIALS.iter().enumerate() {
            assert_eq!(a.id_of(sp), Some(i as u32));
        }
        assert!(a.id_of(UNK).is_some());
        assert_eq!(Vocabulary::from_json(&a.to_json()).unwrap(), a);
    }
}

#[test]
fn vocabulary_errors_name_the_file() {
    let corpus = vec![("good.krn", "**kern\t**harte\n4c\t.\n*-\t*-\n"), ("bad.krn", "**kern\t**harte\n4c\tC:maj(7)\n*-\t*-\n")];
    let err = build_vocabulary(&corpus, Strategy::Word, false).unwrap_err();
    assert!(err.to_string().contains("bad.krn"), "{err}");
}

#[test]
fn encode_decode_with_framing() {
    let corpus = corpus();
    let vocab = build_vocabulary(&corpus, Strategy::Medium, false).unwrap();
    let (_, text) = &corpus[0];
    let stream = tokenize(text, Strategy::Medium).unwrap();
    let opts = EncodeOptions { framing: true, unknown: UnknownPolicy::Error };
    let ids = encode(&stream, &vocab, opts).unwrap();
    assert_eq!(ids[0], vocab.id_of(BOS).unwrap());
    assert_eq!(*ids.last().unwrap(), vocab.id_of(EOS).unwrap());
    let back = decode(&ids, &vocab, true).unwrap();
    assert_eq!(back, stream);
    assert_eq!(detokenize(&back).unwrap(), *text);
}

#[test]
fn unknown_tokens() {
    let vocab = build_vocabulary(&[("a", "**kern\t**harte\n4c\t.\n*-\t*-\n")], Strategy::Word, false).unwrap();
    let stream = tokenize("**kern\t**harte\n4d\t.\n*-\t*-\n", Strategy::Word).unwrap();
    let opts = EncodeOptions { framing: false, unknown: UnknownPolicy::Error };
    assert!(matches!(encode(&stream, &vocab, opts), Err(TokenizeError::OutOfVocabulary { .. })));
    let with_unk = build_vocabulary(&[("a", "**kern\t**harte\n4c\t.\n*-\t*-\n")], Strategy::Word, true).unwrap();
    let opts = EncodeOptions { framing: false, unknown: UnknownPolicy::Substitute };
    let ids = encode(&stream, &with_unk, opts).unwrap();
    assert!(ids.contains(&with_unk.id_of(UNK).unwrap()));
    assert!(matches!(decode(&[9999], &vocab, false), Err(TokenizeError::OutOfRangeId { .. })));
}

#[test]
fn strategy_granularity() {
    let text = "**kern\t**harte\n8ee#L\tC:7(b9)\n*-\t*-\n";
    let word = tokenize(text, Strategy::Word).unwrap();
    assert_eq!(word.tokens[4..7], ["8ee#L", TAB, "C:7(b9)"]);
    let medium = tokenize(text, Strategy::Medium).unwrap();
    assert_eq!(medium.tokens[4..18], ["8", "ee", "#", "L", TAB, "C", ":", "7", "(", "b9", ")", NEWLINE, "*-", TAB]);
    let char = tokenize(text, Strategy::Char).unwrap();
    assert!(char.tokens.iter().all(|t| t.chars().count() == 1 || t.starts_with('<')));
    assert!(char.len() > medium.len() && medium.len() > word.len());
}

#[test]
fn malformed_streams_are_rejected() {
    let s = |t: &[&str]| TokenStream { strategy: Strategy::Word, tokens: t.iter().map(|x| x.to_string()).collect() };
    assert!(detokenize(&s(&["4c", TAB, TAB, "."])).is_err());
    assert!(detokenize(&s(&[TAB, "."])).is_err());
    assert!(detokenize(&s(&["4c", TAB, ".", NEWLINE, NEWLINE])).is_err());
    assert!(detokenize(&s(&[BOS, "4c"])).is_err());
    assert_eq!(detokenize(&s(&["4c", TAB, "."])).unwrap(), "4c\t.");
    assert_eq!(detokenize(&s(&["4c", TAB, ".", NEWLINE])).unwrap(), "4c\t.\n");
}

#[test]
fn escaped_text_round_trip() {
    let stream = tokenize("**kern\t**harte\n4c 4e\t.\n*-\t*-\n", Strategy::Medium).unwrap();
    let text = stream.to_escaped_text();
    assert_eq!(TokenStream::from_escaped_text(Strategy::Medium, &text), stream);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn round_trip_every_strategy(text in common::kern_document()) {
        let doc = parse_kern(&text).unwrap();
        for s in Strategy::ALL {
            let stream = tokenize_document(&doc, s).unwrap();
            prop_assert_eq!(detokenize(&stream).unwrap(), text.clone());
        }
    }
}
