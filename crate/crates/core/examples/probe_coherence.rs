//! Dev utility: probe augmented-matrix coherence at paper scale.

use sparsecd::matrices::{augment_with_offsets, gold_family, MatrixKind};

fn main() {
    let fam = gold_family(7, None).unwrap();
    let codes = fam.codes_for_offsets(8).unwrap();
    println!("gold n=7: {} codes available", codes.len());
    let take = 1500.min(codes.len());
    let a = augment_with_offsets(&codes[..take], 8, MatrixKind::GoldAugmented).unwrap();
    println!(
        "A_delta: {}x{}  coherence {:.6}  ({} x 1/127)",
        a.m(),
        a.n(),
        a.coherence(),
        a.coherence() * 127.0
    );
}
