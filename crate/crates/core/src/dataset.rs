//! Dataset utilities: piece-level train/val/test splits, region records that
//! pair staff bounding boxes with kern regions, and image normalisation to
//! the model's 1×128×1000 input.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use image::imageops::{self, FilterType};
use image::{DynamicImage, GrayImage};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kern::{self, KernDocument};

pub const TARGET_HEIGHT: u32 = 128;
pub const TARGET_WIDTH: u32 = 1000;
/// Grayscale value used for padding (white page).
pub const BACKGROUND: f32 = 1.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("ratios must be non-negative and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("{forced} pieces must go to train but the train target is {train_target} of {total}")]
    InfeasibleRatios { forced: usize, train_target: usize, total: usize },
    #[error("piece {0:?} is listed twice")]
    DuplicatePiece(String),
    #[error("piece {0:?} has no handwritten copies")]
    EmptyPiece(String),
    #[error("{boxes} bounding boxes but {regions} kern regions")]
    CountMismatch { boxes: usize, regions: usize },
    #[error("bounding box {index} ({x},{y},{width}x{height}) lies outside the {page_width}x{page_height} page")]
    BoxOutOfBounds { index: usize, x: u32, y: u32, width: u32, height: u32, page_width: u32, page_height: u32 },
    #[error("cannot decode image: {0}")]
    UndecodableImage(String),
    #[error("image has a zero dimension ({width}x{height})")]
    DegenerateImage { width: u32, height: u32 },
    #[error(transparent)]
    Kern(#[from] kern::KernError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceRecord {
    pub piece_id: String,
    /// Handwritten score ids.
    pub copies: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub synthetic: Vec<String>,
}

impl PieceRecord {
    pub fn new(piece_id: impl Into<String>, copies: impl IntoIterator<Item = impl Into<String>>) -> Self {
        PieceRecord { piece_id: piece_id.into(), copies: copies.into_iter().map(Into::into).collect(), synthetic: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for Ratios {
    fn default() -> Self {
        Ratios { train: 0.7, val: 0.1, test: 0.2 }
    }
}

impl Ratios {
    fn check(&self) -> Result<(), DatasetError> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|r| !r.is_finite() || *r < 0.0) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(DatasetError::InvalidRatios(all));
        }
        Ok(())
    }
}

impl std::str::FromStr for Ratios {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<Result<_, _>>()?;
        match parts.as_slice() {
            [train, val, test] => Ok(Ratios { train: *train, val: *val, test: *test }),
            _ => Err(format!("expected three comma-separated ratios, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: Ratios,
    pub forced_train: BTreeSet<String>,
    pub assignment: BTreeMap<String, Subset>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SplitManifest {
    pub fn count(&self, subset: Subset) -> usize {
        self.assignment.values().filter(|s| **s == subset).count()
    }

    pub fn pieces(&self, subset: Subset) -> impl Iterator<Item = &str> {
        self.assignment.iter().filter(move |(_, s)| **s == subset).map(|(p, _)| p.as_str())
    }

    /// Handwritten scores per subset.
    pub fn score_counts(&self, pieces: &[PieceRecord]) -> BTreeMap<Subset, usize> {
        let mut out = BTreeMap::new();
        for p in pieces {
            if let Some(s) = self.assignment.get(&p.piece_id) {
                *out.entry(*s).or_default() += p.copies.len();
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

fn floor_share(ratio: f64, n: usize) -> usize {
    (ratio * n as f64 + 1e-9).floor() as usize
}

/// Assign whole pieces to subsets. Pieces with several handwritten copies
/// always go to train; the others are shuffled with a ChaCha8 generator
/// seeded by `seed` and dealt to val, then test, then train. Val and test
/// get `floor(ratio * n)` pieces and train the remainder.
///
/// When the forced pieces exceed the train target, `strict` turns this into
/// an error; otherwise the val/test targets shrink and a warning is recorded.
pub fn make_split(pieces: &[PieceRecord], ratios: Ratios, seed: u64, strict: bool) -> Result<SplitManifest, DatasetError> {
    ratios.check()?;
    let mut seen = BTreeSet::new();
    for p in pieces {
        if p.copies.is_empty() {
            return Err(DatasetError::EmptyPiece(p.piece_id.clone()));
        }
        if !seen.insert(p.piece_id.as_str()) {
            return Err(DatasetError::DuplicatePiece(p.piece_id.clone()));
        }
    }
    let n = pieces.len();
    let mut manifest =
        SplitManifest { seed, ratios, forced_train: BTreeSet::new(), assignment: BTreeMap::new(), warnings: Vec::new() };
    if n == 0 {
        if strict {
            return Err(DatasetError::InfeasibleRatios { forced: 0, train_target: 0, total: 0 });
        }
        manifest.warnings.push("no pieces to split".into());
        return Ok(manifest);
    }

    let mut val = floor_share(ratios.val, n);
    let mut test = floor_share(ratios.test, n);
    let train_target = n - val - test;
    manifest.forced_train = pieces.iter().filter(|p| p.copies.len() > 1).map(|p| p.piece_id.clone()).collect();
    let forced = manifest.forced_train.len();
    if forced > train_target {
        if strict {
            return Err(DatasetError::InfeasibleRatios { forced, train_target, total: n });
        }
        let free = n - forced;
        let held_out = ratios.val + ratios.test;
        val = if held_out > 0.0 { floor_share(ratios.val / held_out, free) } else { 0 };
        test = free - val;
        manifest.warnings.push(format!(
            "{forced} multi-copy pieces exceed the train target of {train_target}; val/test reduced to {val}/{test}"
        ));
    }

    let mut free: Vec<&str> = pieces.iter().map(|p| p.piece_id.as_str()).filter(|id| !manifest.forced_train.contains(*id)).collect();
    free.sort_unstable();
    free.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for id in &manifest.forced_train {
        manifest.assignment.insert(id.clone(), Subset::Train);
    }
    for (i, id) in free.into_iter().enumerate() {
        let subset = if i < val {
            Subset::Val
        } else if i < val + test {
            Subset::Test
        } else {
            Subset::Train
        };
        manifest.assignment.insert(id.to_string(), subset);
    }
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

/// Staff boxes detected on one page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxManifest {
    pub score_id: String,
    pub image: String,
    pub page_width: u32,
    pub page_height: u32,
    pub boxes: Vec<BoundingBox>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub image: String,
    pub bbox: BoundingBox,
    /// Ground truth for the staff: a standalone kern document without
    /// comments or measure numbers.
    pub kern: String,
    pub score_id: String,
    pub staff: usize,
}

/// Pair the i-th box from the top of the page with the i-th kern region.
pub fn build_region_records(doc: &KernDocument, manifest: &BoxManifest) -> Result<Vec<RegionRecord>, DatasetError> {
    let regions = kern::split_regions(doc, true);
    if regions.len() != manifest.boxes.len() {
        return Err(DatasetError::CountMismatch { boxes: manifest.boxes.len(), regions: regions.len() });
    }
    for (index, b) in manifest.boxes.iter().enumerate() {
        let inside = b.width > 0
            && b.height > 0
            && b.x as u64 + b.width as u64 <= manifest.page_width as u64
            && b.y as u64 + b.height as u64 <= manifest.page_height as u64;
        if !inside {
            return Err(DatasetError::BoxOutOfBounds {
                index,
                x: b.x,
                y: b.y,
                width: b.width,
                height: b.height,
                page_width: manifest.page_width,
                page_height: manifest.page_height,
            });
        }
    }
    let mut boxes = manifest.boxes.clone();
    boxes.sort_by_key(|b| (b.y, b.x));
    Ok(boxes
        .into_iter()
        .zip(regions)
        .enumerate()
        .map(|(staff, (bbox, region))| RegionRecord {
            image: manifest.image.clone(),
            bbox,
            kern: kern::strip_annotations(&region, false).to_string(),
            score_id: manifest.score_id.clone(),
            staff,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PreprocessOptions {
    /// Threshold at Otsu's level instead of keeping grayscale.
    pub binarize: bool,
}

/// Single-channel image of exactly 128×1000, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImage {
    /// Width of the scaled content before right padding.
    pub content_width: u32,
    /// Height of the scaled content; below 128 only for very wide inputs.
    pub content_height: u32,
    /// Row-major, `TARGET_HEIGHT * TARGET_WIDTH` values.
    pub pixels: Vec<f32>,
}

impl NormalizedImage {
    pub const CHANNELS: usize = 1;

    pub fn shape(&self) -> [usize; 3] {
        [Self::CHANNELS, TARGET_HEIGHT as usize, TARGET_WIDTH as usize]
    }

    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.pixels[(y * TARGET_WIDTH + x) as usize]
    }

    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_fn(TARGET_WIDTH, TARGET_HEIGHT, |x, y| image::Luma([(self.get(x, y) * 255.0).round() as u8]))
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        self.to_gray_image().save(path).map_err(|e| DatasetError::UndecodableImage(e.to_string()))
    }
}

/// Size of the scaled content: height 128 with the aspect ratio kept, or
/// width 1000 when that would be wider than the target.
pub fn content_size(width: u32, height: u32) -> (u32, u32) {
    let (w, h) = (width as u64, height as u64);
    let tw = TARGET_WIDTH as u64;
    let th = TARGET_HEIGHT as u64;
    // Rounded integer division: round(w * th / h).
    let scaled_w = (2 * w * th + h) / (2 * h);
    if scaled_w <= tw {
        (scaled_w.max(1) as u32, TARGET_HEIGHT)
    } else {
        let scaled_h = (2 * h * tw + w) / (2 * w);
        (TARGET_WIDTH, scaled_h.max(1) as u32)
    }
}

pub fn preprocess_image(path: &Path, options: PreprocessOptions) -> Result<NormalizedImage, DatasetError> {
    let img = image::open(path).map_err(|e| DatasetError::UndecodableImage(format!("{}: {e}", path.display())))?;
    normalize_image(&img, options)
}

pub fn normalize_image(img: &DynamicImage, options: PreprocessOptions) -> Result<NormalizedImage, DatasetError> {
    let (width, height) = (img.width(), img.height());
    if width == 0 || height == 0 {
        return Err(DatasetError::DegenerateImage { width, height });
    }
    let gray = img.to_luma8();
    let (cw, ch) = content_size(width, height);
    let mut scaled = if (cw, ch) == (width, height) { gray } else { imageops::resize(&gray, cw, ch, FilterType::Triangle) };
    if options.binarize {
        let level = imageproc::contrast::otsu_level(&scaled);
        scaled = imageproc::contrast::threshold(&scaled, level, imageproc::contrast::ThresholdType::Binary);
    }
    let mut pixels = vec![BACKGROUND; (TARGET_WIDTH * TARGET_HEIGHT) as usize];
    for (x, y, p) in scaled.enumerate_pixels() {
        pixels[(y * TARGET_WIDTH + x) as usize] = p.0[0] as f32 / 255.0;
    }
    Ok(NormalizedImage { content_width: cw, content_height: ch, pixels })
}
