//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so each check reports its own timing.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use image::{DynamicImage, GrayImage, Luma};
use leadsheet::dataset::{make_split, normalize_image, PreprocessOptions, Ratios, Subset, TARGET_HEIGHT, TARGET_WIDTH};
use leadsheet::harte::{parse_chord, serialize_chord, validate_chord, ChordError, PitchSpelling, Shorthand};
use leadsheet::kern::parse_kern;
use leadsheet::metrics::{self, corpus_report, edit_distance, edit_report, Averaging};
use leadsheet::mxl_convert::{convert_score, ConvertOptions};
use leadsheet::tokenize::{build_vocabulary, detokenize, tokenize, Strategy};
use proptest::strategy::{Strategy as _, ValueTree};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {:.2} s, limit {} s", t.as_secs_f64(), limit.as_secs()))
}

fn runner(seed: u8) -> TestRunner {
    TestRunner::new_with_rng(Config::default(), TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32]))
}

fn harte_grammar() -> Check {
    let start = Instant::now();
    let roots = PitchSpelling::common();
    ensure(roots.len() == 17, || format!("{} root spellings", roots.len()))?;
    for root in &roots {
        for sh in Shorthand::ALL {
            let text = format!("{root}:{sh}");
            let chord = parse_chord(&text).map_err(|e| format!("{text}: {e}"))?;
            ensure(validate_chord(&chord).is_ok(), || format!("{text} does not validate"))?;
            let back = serialize_chord(&chord).map_err(|e| e.to_string())?;
            ensure(back == text, || format!("{text} serialized as {back}"))?;
        }
    }
    ensure(matches!(parse_chord("C:maj(7,b9)"), Err(ChordError::ShorthandExpressible { .. })), || "C:maj(7,b9) accepted".into())?;
    for ok in ["C:7(b9)", "C:maj(no5,b9)"] {
        let c = parse_chord(ok).map_err(|e| format!("{ok}: {e}"))?;
        ensure(serialize_chord(&c).unwrap() == ok, || format!("{ok} not byte-identical"))?;
    }
    within(start, Duration::from_secs(1))?;
    Ok(format!("{} labels round-trip", roots.len() * Shorthand::ALL.len()))
}

fn tokeniser_round_trip() -> Check {
    let start = Instant::now();
    let strategy = common::kern_document();
    let mut runner = runner(2);
    let mut failures = 0;
    let n = 1000;
    for _ in 0..n {
        let text = strategy.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        for s in Strategy::ALL {
            let ok = tokenize(&text, s).ok().and_then(|t| detokenize(&t).ok()).is_some_and(|back| back == text);
            if !ok {
                failures += 1;
                if failures == 1 {
                    eprintln!("first failure ({s:?}):\n{text}");
                }
            }
        }
    }
    ensure(failures == 0, || format!("{failures} failures"))?;
    within(start, Duration::from_secs(30))?;
    Ok(format!("{n} documents x 3 strategies, 0 failures"))
}

fn vocabulary_ordering() -> Check {
    let corpus = common::fixtures("kern", "krn");
    ensure(corpus.len() >= 20, || format!("only {} fixture documents", corpus.len()))?;
    let size = |s| build_vocabulary(&corpus, s, false).map(|v| v.len()).map_err(|e| e.to_string());
    let (c, m, w) = (size(Strategy::Char)?, size(Strategy::Medium)?, size(Strategy::Word)?);
    ensure(c < m && m < w, || format!("char {c}, medium {m}, word {w}"))?;
    let mut note = format!("{} documents: char {c} < medium {m} < word {w}", corpus.len());
    match std::env::var_os("LEADSHEET_DATASET_DIR") {
        Some(dir) => {
            let mut files: Vec<(String, String)> = Vec::new();
            for entry in walk(std::path::Path::new(&dir)) {
                files.push((entry.display().to_string(), std::fs::read_to_string(&entry).map_err(|e| e.to_string())?));
            }
            let (c, m, w) = (
                build_vocabulary(&files, Strategy::Char, false).map_err(|e| e.to_string())?.len(),
                build_vocabulary(&files, Strategy::Medium, false).map_err(|e| e.to_string())?.len(),
                build_vocabulary(&files, Strategy::Word, false).map_err(|e| e.to_string())?.len(),
            );
            let close = |x: usize, target: f64| (x as f64 - target).abs() <= 0.05 * target;
            ensure(c == 69 && close(m, 153.0) && close(w, 1762.0), || format!("full dataset: char {c}, medium {m}, word {w}"))?;
            note.push_str(&format!("; full dataset {c}/{m}/{w}"));
        }
        None => note.push_str("; exact 69/153/1762 skipped (LEADSHEET_DATASET_DIR not set)"),
    }
    Ok(note)
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "krn") {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

/// Every sequence over {0,1,2} of length <= `max`, in breadth-first order,
/// with the index of its prefix (all but the last symbol).
fn sequence_trie(max: usize) -> (Vec<Vec<u8>>, Vec<usize>) {
    let mut seqs: Vec<Vec<u8>> = vec![vec![]];
    let mut parent = vec![0];
    let mut level = vec![0usize];
    for _ in 0..max {
        let mut next = Vec::new();
        for &p in &level {
            for c in 0..3u8 {
                let mut s = seqs[p].clone();
                s.push(c);
                seqs.push(s);
                parent.push(p);
                next.push(seqs.len() - 1);
            }
        }
        level = next;
    }
    (seqs, parent)
}

fn metrics_oracle() -> Check {
    let start = Instant::now();
    let (seqs, parent) = sequence_trie(8);
    let n = seqs.len();
    // d(a, b) = min(d(a', b) + 1, d(a, b') + 1, d(a', b') + [last(a) != last(b)]),
    // memoised over prefix indices; parents precede children.
    let mut table = vec![0u8; n * n];
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (&seqs[i], &seqs[j]);
            table[i * n + j] = if a.is_empty() {
                b.len() as u8
            } else if b.is_empty() {
                a.len() as u8
            } else {
                let (pi, pj) = (parent[i], parent[j]);
                let sub = table[pi * n + pj] + u8::from(a.last() != b.last());
                sub.min(table[pi * n + j] + 1).min(table[i * n + pj] + 1)
            };
        }
    }
    let mut mismatches = 0u64;
    for i in 0..n {
        for j in 0..n {
            let d = edit_distance(&seqs[i], &seqs[j]);
            if d != table[i * n + j] as usize {
                mismatches += 1;
            }
            if (d == 0) != (i == j) || d != table[j * n + i] as usize {
                return Err(format!("identity or symmetry fails for {:?} {:?}", seqs[i], seqs[j]));
            }
        }
    }
    ensure(mismatches == 0, || format!("{mismatches} pairs differ from the oracle"))?;

    let short = seqs.iter().take_while(|s| s.len() <= 3).count();
    for a in 0..short {
        for b in 0..short {
            for c in 0..short {
                let (ab, bc, ac) = (table[a * n + b], table[b * n + c], table[a * n + c]);
                ensure(ac <= ab + bc, || format!("triangle inequality fails for {:?} {:?} {:?}", seqs[a], seqs[b], seqs[c]))?;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100_000 {
        let (a, b, c) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
        let d = |x: usize, y: usize| edit_distance(&seqs[x], &seqs[y]);
        ensure(d(a, c) <= d(a, b) + d(b, c), || "triangle inequality fails on a sampled triple".into())?;
    }

    // One changed character on one line moves LER by exactly 1/|lines|.
    let strategy = common::kern_document();
    let mut runner = runner(4);
    for k in 0..100 {
        let text = strategy.new_tree(&mut runner).map_err(|e| e.to_string())?.current();
        let lines = metrics::lines(&text);
        let mut chars: Vec<char> = text.chars().collect();
        let candidates: Vec<usize> = (0..chars.len()).filter(|&i| chars[i] != '\n').collect();
        let at = candidates[rng.gen_range(0..candidates.len())];
        chars[at] = if chars[at] == 'x' { 'y' } else { 'x' };
        let hyp: String = chars.into_iter().collect();
        let got = metrics::ler(&text, &hyp).map_err(|e| e.to_string())?;
        let expected = 1.0 / lines.len() as f64;
        ensure(got == expected, || format!("fixture {k}: LER {got}, expected {expected}"))?;
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!("{} pairs exhaustive, axioms hold, LER law on 100 fixtures", n * n))
}

/// Expected edit counts for one injected hypothesis.
#[derive(Default, Clone, Copy)]
struct Injected {
    chars: usize,
    words: usize,
    lines: usize,
}

/// Replace one character in `subs` distinct lines with a symbol absent from
/// the corpus and delete `dels` other whole lines. Every edited unit becomes
/// novel, so the minimal edit count is exactly substitutions plus the
/// length lost at each granularity.
fn inject(reference: &str, rng: &mut ChaCha8Rng, subs: usize, dels: usize) -> (String, Injected) {
    let lines: Vec<&str> = reference.lines().collect();
    let mut order: Vec<usize> = (0..lines.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let sub_set: BTreeSet<usize> = order[..subs].iter().copied().collect();
    let del_set: BTreeSet<usize> = order[subs..subs + dels].iter().copied().collect();
    let mut out = String::new();
    let mut expected = Injected::default();
    for (i, line) in lines.iter().enumerate() {
        if del_set.contains(&i) {
            expected.chars += line.chars().count() + 1;
            expected.words += line.split_whitespace().count();
            expected.lines += 1;
            continue;
        }
        if sub_set.contains(&i) {
            let positions: Vec<usize> = line.char_indices().filter(|(_, c)| !c.is_whitespace()).map(|(p, _)| p).collect();
            let p = positions[rng.gen_range(0..positions.len())];
            let c = line[p..].chars().next().unwrap();
            out.push_str(&line[..p]);
            out.push('§');
            out.push_str(&line[p + c.len_utf8()..]);
            expected.chars += 1;
            expected.words += 1;
            expected.lines += 1;
        } else {
            out.push_str(line);
        }
        out.push('\n');
    }
    (out, expected)
}

/// Insert `count` lines of `§§` at random positions.
fn inject_insertions(reference: &str, rng: &mut ChaCha8Rng, count: usize) -> (String, Injected) {
    let mut lines: Vec<String> = reference.lines().map(String::from).collect();
    for _ in 0..count {
        let at = rng.gen_range(0..=lines.len());
        lines.insert(at, "§§".into());
    }
    (lines.join("\n") + "\n", Injected { chars: 3 * count, words: count, lines: count })
}

fn synthetic_scores() -> Check {
    let corpus = common::fixtures("kern", "krn");
    ensure(!corpus.iter().any(|(_, t)| t.contains('§')), || "corpus contains the injection symbol".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pairs = Vec::new();
    let mut expected = Vec::new();
    for (i, (_, reference)) in corpus.iter().enumerate() {
        let n = reference.lines().count();
        let (hyp, e) = if i % 4 == 3 {
            inject_insertions(reference, &mut rng, 1 + i % 5)
        } else {
            let (subs, dels) = (rng.gen_range(0..n / 3), rng.gen_range(0..n / 4));
            inject(reference, &mut rng, subs, dels)
        };
        pairs.push((reference.clone(), hyp));
        expected.push(e);
    }
    let ratio = |num: usize, den: usize| num as f64 / den as f64;
    let mut totals = (Injected::default(), Injected::default());
    for (k, ((r, h), e)) in pairs.iter().zip(&expected).enumerate() {
        let report = edit_report(r, h).map_err(|x| x.to_string())?;
        let len = Injected { chars: metrics::characters(r).len(), words: metrics::words(r).len(), lines: metrics::lines(r).len() };
        let want = (ratio(e.chars, len.chars), ratio(e.words, len.words), ratio(e.lines, len.lines));
        ensure((report.cer, report.wer, report.ler) == want, || {
            format!("pair {k}: got {:?}, expected {want:?}", (report.cer, report.wer, report.ler))
        })?;
        totals.0.chars += e.chars;
        totals.0.words += e.words;
        totals.0.lines += e.lines;
        totals.1.chars += len.chars;
        totals.1.words += len.words;
        totals.1.lines += len.lines;
    }
    let report = corpus_report(&pairs, Averaging::Micro).map_err(|e| e.to_string())?;
    let want = (ratio(totals.0.chars, totals.1.chars), ratio(totals.0.words, totals.1.words), ratio(totals.0.lines, totals.1.lines));
    let got = (report.aggregate.cer, report.aggregate.wer, report.aggregate.ler);
    ensure(got == want, || format!("corpus: got {got:?}, expected {want:?}"))?;
    Ok(format!(
        "{} pairs exact; corpus CER {:.4} WER {:.4} LER {:.4} (published model scores need the real dataset and model)",
        pairs.len(),
        got.0,
        got.1,
        got.2
    ))
}

fn conversion_goldens() -> Check {
    let names = ["misbehavin", "degrees", "ties_triplets", "system_break", "pickup_rests"];
    let dir = common::fixture_dir("musicxml");
    let mut chords = 0;
    for name in names {
        let xml = std::fs::read_to_string(dir.join(format!("{name}.musicxml"))).map_err(|e| e.to_string())?;
        let golden = std::fs::read_to_string(dir.join(format!("{name}.krn"))).map_err(|e| e.to_string())?;
        let conv = convert_score(&xml, ConvertOptions::default()).map_err(|e| format!("{name}: {e}"))?;
        let text = conv.document.to_string();
        ensure(text == golden, || format!("{name}: output differs from golden"))?;
        let doc = parse_kern(&text).map_err(|e| format!("{name}: {e}"))?;
        ensure(doc.chords().count() == conv.harmony_count, || format!("{name}: chord count changed"))?;
        for c in doc.chords() {
            let chord = parse_chord(c).map_err(|e| format!("{name}: {e}"))?;
            ensure(validate_chord(&chord).is_ok(), || format!("{name}: {c} invalid"))?;
        }
        chords += conv.harmony_count;
    }
    Ok(format!("{} fixtures byte-identical, {chords} chords valid and preserved", names.len()))
}

fn split_generator() -> Check {
    let start = Instant::now();
    let pieces = common::multiplicity_profile();
    ensure(pieces.len() == 163, || format!("{} pieces", pieces.len()))?;
    let ids: BTreeSet<&str> = pieces.iter().map(|p| p.piece_id.as_str()).collect();
    let forced: BTreeSet<&str> = pieces.iter().filter(|p| p.copies.len() > 1).map(|p| p.piece_id.as_str()).collect();
    let mut matching = None;
    for seed in 0..1000u64 {
        let m = make_split(&pieces, Ratios::default(), seed, true).map_err(|e| format!("seed {seed}: {e}"))?;
        let assigned: BTreeSet<&str> = m.assignment.keys().map(String::as_str).collect();
        ensure(assigned == ids, || format!("seed {seed}: not a partition of the pieces"))?;
        ensure(forced.iter().all(|p| m.assignment[*p] == Subset::Train), || format!("seed {seed}: multi-copy piece outside train"))?;
        ensure(m.forced_train.iter().map(String::as_str).collect::<BTreeSet<_>>() == forced, || format!("seed {seed}: forced set"))?;
        let again = make_split(&pieces, Ratios::default(), seed, true).map_err(|e| e.to_string())?;
        ensure(again == m, || format!("seed {seed}: not deterministic"))?;
        let counts = (m.count(Subset::Train), m.count(Subset::Val), m.count(Subset::Test));
        if counts == (115, 16, 32) && matching.is_none() {
            matching = Some(seed);
        }
    }
    let seed = matching.ok_or("no seed gives 115/16/32")?;
    within(start, Duration::from_secs(10))?;
    Ok(format!("115/16/32 at seed {seed}; 1000 seeds partition, deterministic, forced-train"))
}

fn image_normalization() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut sizes: Vec<(u32, u32)> = vec![(1, 1), (1, 3000), (5000, 1), (1000, 128), (999, 128), (1001, 128), (8000, 1024), (3, 2)];
    for _ in 0..200 {
        sizes.push((rng.gen_range(1..4000), rng.gen_range(1..2000)));
    }
    for &(w, h) in &sizes {
        // Black content on a white pad makes the true content box visible.
        let img = DynamicImage::ImageLuma8(GrayImage::from_pixel(w, h, Luma([0])));
        let out = normalize_image(&img, PreprocessOptions::default()).map_err(|e| format!("{w}x{h}: {e}"))?;
        ensure(out.shape() == [1, 128, 1000] && out.pixels.len() == 128_000, || format!("{w}x{h}: shape {:?}", out.shape()))?;
        let cw = (0..TARGET_WIDTH).filter(|&x| out.get(x, 0) < 0.5).count() as f64;
        let ch = (0..TARGET_HEIGHT).filter(|&y| out.get(0, y) < 0.5).count() as f64;
        let exact_w = (w as f64 * ch / h as f64).max(1.0);
        let exact_h = (h as f64 * cw / w as f64).max(1.0);
        let err = if ch == TARGET_HEIGHT as f64 { (cw - exact_w).abs() } else { (ch - exact_h).abs() };
        ensure(err <= 1.0, || format!("{w}x{h}: content {cw}x{ch} off by {err:.2} px"))?;
        ensure(cw == TARGET_WIDTH as f64 || ch == TARGET_HEIGHT as f64, || format!("{w}x{h}: content {cw}x{ch} touches no edge"))?;
    }
    Ok(format!("{} geometries: 1x128x1000, aspect within 1 px", sizes.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("harte grammar", harte_grammar),
        ("tokeniser round trip", tokeniser_round_trip),
        ("vocabulary ordering", vocabulary_ordering),
        ("metrics oracle", metrics_oracle),
        ("synthetic error scoring", synthetic_scores),
        ("conversion goldens", conversion_goldens),
        ("split generator", split_generator),
        ("image normalization", image_normalization),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {} {name} ({secs:.2} s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name} ({secs:.2} s): {why}", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
