mod common;

use leadsheet::kern::{
    parse_kern, parse_kern_lines, serialize_kern, split_regions, strip_annotations, validate_document, DiagnosticCode, KernError,
    LineKind, Severity, LINEBREAK_MARKER,
};
use proptest::prelude::*;

#[test]
fn corpus_parses_and_serializes_byte_identically() {
    let corpus = common::fixtures("kern", "krn");
    assert!(corpus.len() >= 20);
    for (name, text) in &corpus {
        let doc = parse_kern(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(&serialize_kern(&doc).unwrap(), text, "{name}");
        let errors: Vec<_> = validate_document(&doc).into_iter().filter(|d| d.severity == Severity::Error).collect();
        assert!(errors.is_empty(), "{name}: {errors:?}");
    }
}

#[test]
fn regions_follow_linebreaks() {
    for (name, text) in common::fixtures("kern", "krn") {
        let doc = parse_kern(&text).unwrap();
        let regions = split_regions(&doc, true);
        assert_eq!(regions.len(), doc.linebreak_count() + 1, "{name}");
        let chords: usize = regions.iter().map(|r| r.chords().count()).sum();
        assert_eq!(chords, doc.chords().count(), "{name}");
        for r in &regions {
            // Each region is a complete document of its own.
            let text = serialize_kern(r).unwrap();
            parse_kern(&text).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
            assert!(!text.contains(LINEBREAK_MARKER));
        }
        let bare = split_regions(&doc, false);
        assert!(bare[1..].iter().all(|r| r.lines.iter().all(|l| l.kind != LineKind::ExclusiveInterpretation)));
        let joined: Vec<String> = bare.iter().map(|r| r.to_string()).collect();
        assert_eq!(joined.join(&format!("{LINEBREAK_MARKER}\n")), text, "{name}");
    }
}

#[test]
fn region_context_carries_key_and_meter() {
    let text = "**kern\t**harte\n*clefG2\t*\n*k[b-]\t*\n*M4/4\t*\n=1\t=1\n1f\tF:maj7\n!!linebreak:original\n=2\t=2\n*M3/4\t*\n2.g\tG:min7\n==\t==\n*-\t*-\n";
    let doc = parse_kern(text).unwrap();
    let regions = split_regions(&doc, true);
    let second = regions[1].to_string();
    assert!(second.starts_with("**kern\t**harte\n*clefG2\t*\n*k[b-]\t*\n=2\t=2\n*M3/4\t*\n"), "{second}");
    let third = split_regions(&parse_kern(&text.replace("==\t==\n", "!!linebreak:original\n==\t==\n")).unwrap(), true);
    assert!(third[2].to_string().starts_with("**kern\t**harte\n*clefG2\t*\n*k[b-]\t*\n*M3/4\t*\n==\t==\n"));
    assert!(second.ends_with("==\t==\n*-\t*-\n"));
}

#[test]
fn strip_removes_comments_and_measure_numbers() {
    let text = "!!!OTL: x\n**kern\t**harte\n=1\t=1\n!! note\n4c\tC:maj\n!!linebreak:original\n=2\t=2\n4d\t.\n*-\t*-\n";
    let doc = parse_kern(text).unwrap();
    assert_eq!(strip_annotations(&doc, false).to_string(), "**kern\t**harte\n=\t=\n4c\tC:maj\n=\t=\n4d\t.\n*-\t*-\n");
    assert_eq!(strip_annotations(&doc, true).linebreak_count(), 1);
}

#[test]
fn structural_errors_carry_line_numbers() {
    let e = parse_kern("**kern\t**harte\n4c\tC:maj\t.\n*-\t*-\n").unwrap_err();
    assert!(matches!(e, KernError::SpineCount { line: 2, found: 3 }));
    let e = parse_kern("**kern\t**harte\n4c\tC:maj(7)\n*-\t*-\n").unwrap_err();
    assert_eq!(e.line(), Some(2));
    let e = parse_kern("**kern\t**harte\n4x\t.\n*-\t*-\n").unwrap_err();
    assert_eq!(e.line(), Some(2));
    assert!(matches!(parse_kern("**kern\t**harte\n4c\t.\n"), Err(KernError::MissingTerminator)));
    assert!(matches!(parse_kern("4c\t.\n*-\t*-\n"), Err(KernError::MissingHeader)));
}

#[test]
fn validation_reports_everything() {
    let text = "**kern\t**harte\n*M4/4\t*\n=1\t=1\n4c\tC:maj(7)\n4rL\t.\n=2\t=2\n*-\t*-\n";
    let doc = parse_kern_lines(text).unwrap();
    let diags = validate_document(&doc);
    let codes: Vec<_> = diags.iter().map(|d| d.code).collect();
    assert!(codes.contains(&DiagnosticCode::BadChordToken), "{diags:?}");
    assert!(codes.contains(&DiagnosticCode::BadMelodyToken), "{diags:?}");
}

#[test]
fn legacy_chord_spine_name_is_accepted() {
    let doc = parse_kern("**kern\t**mxhm\n4c\tC:maj\n*-\t*-\n").unwrap();
    assert!(doc.to_string().starts_with("**kern\t**harte\n"));
}

proptest! {
    #[test]
    fn generated_documents_round_trip(text in common::kern_document()) {
        let doc = parse_kern(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(serialize_kern(&doc).unwrap(), text);
    }

    #[test]
    fn regions_partition_data(text in common::kern_document()) {
        let doc = parse_kern(&text).unwrap();
        let regions = split_regions(&doc, false);
        let data: usize = regions.iter().map(|r| r.data_lines().count()).sum();
        prop_assert_eq!(data, doc.data_lines().count());
    }
}
