//! Pair staff boxes with kern regions, then normalise a staff image to the
//! 1x128x1000 model input.
//!
//! cargo run --example staff_images -- staff.jpg out.png

use image::{DynamicImage, GrayImage, Luma};
use leadsheet::dataset::{build_region_records, normalize_image, preprocess_image, BoundingBox, BoxManifest, PreprocessOptions};
use leadsheet::kern::parse_kern;

fn main() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/kern/tune07.krn")).unwrap();
    let doc = parse_kern(&text).unwrap();
    let staves = doc.linebreak_count() as u32 + 1;
    let boxes = (0..staves).map(|i| BoundingBox { x: 80, y: 300 + 260 * i, width: 2300, height: 210 }).collect();
    let manifest = BoxManifest { score_id: "tune07-hw0".into(), image: "tune07-hw0.jpg".into(), page_width: 2480, page_height: 3508, boxes };
    for r in build_region_records(&doc, &manifest).unwrap_or_else(|e| panic!("{e}")) {
        println!("staff {} at y={} -> {} kern lines", r.staff, r.bbox.y, r.kern.lines().count());
    }

    let args: Vec<String> = std::env::args().skip(1).collect();
    let options = PreprocessOptions { binarize: true };
    let img = match args.first() {
        Some(path) => preprocess_image(path.as_ref(), options),
        None => {
            let staff = GrayImage::from_fn(1800, 240, |x, y| if (y / 6) % 4 == 0 || x % 90 < 3 { Luma([30]) } else { Luma([220]) });
            normalize_image(&DynamicImage::ImageLuma8(staff), options)
        }
    }
    .unwrap_or_else(|e| panic!("{e}"));
    println!("shape {:?}, content {}x{}", img.shape(), img.content_width, img.content_height);
    let out = args.get(1).cloned().unwrap_or_else(|| std::env::temp_dir().join("staff.png").display().to_string());
    img.save(out.as_ref()).unwrap();
    println!("wrote {out}");
}
