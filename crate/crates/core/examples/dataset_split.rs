//! Piece-level split where pieces with several handwritten copies stay in
//! train.
//!
//! cargo run --example dataset_split -- 42

use leadsheet::dataset::{make_split, PieceRecord, Ratios, Subset};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let mut pieces = Vec::new();
    for (count, copies) in [(103, 1), (40, 2), (10, 4), (10, 7)] {
        for _ in 0..count {
            let id = format!("piece{:03}", pieces.len());
            let scores: Vec<String> = (0..copies).map(|c| format!("{id}-{c}")).collect();
            pieces.push(PieceRecord::new(id, scores));
        }
    }
    let split = make_split(&pieces, Ratios::default(), seed, true).unwrap_or_else(|e| panic!("{e}"));
    let scores = split.score_counts(&pieces);
    println!("seed {seed}: {} pieces, {} forced into train", pieces.len(), split.forced_train.len());
    for s in [Subset::Train, Subset::Val, Subset::Test] {
        println!("{:<5} {:>4} pieces {:>4} scores", format!("{s:?}").to_lowercase(), split.count(s), scores.get(&s).unwrap_or(&0));
    }
    println!("first test pieces: {:?}", split.pieces(Subset::Test).take(5).collect::<Vec<_>>());
}
