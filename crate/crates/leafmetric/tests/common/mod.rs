#![allow(dead_code)]

use leafmetric::codec::encode_png;
use leafmetric_core::RgbImage;

pub const WHITE: [u8; 3] = [255; 3];
pub const BLACK: [u8; 3] = [0; 3];

/// 300×150 black rectangle on a white 320×170 page, 10 px margins.
pub fn rectangle_scan() -> RgbImage {
    let mut img = RgbImage::filled(320, 170, WHITE).unwrap();
    for y in 10..160 {
        for x in 10..310 {
            img.set(x, y, BLACK);
        }
    }
    img
}

/// A dark blob with a stalk and a few specks, so length, width, branches and
/// noise removal all have something to do.
pub fn leaf_scan() -> RgbImage {
    let (w, h) = (240, 160);
    let mut img = RgbImage::filled(w, h, WHITE).unwrap();
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = ((x as f64 - 120.0) / 90.0, (y as f64 - 80.0) / 45.0);
            let blade = dx * dx + dy * dy <= 1.0;
            let stalk = (20..40).contains(&x) && (78..83).contains(&y);
            let speck = (x % 53 == 7 && y % 41 == 5) && !blade;
            if blade || stalk || speck {
                img.set(x, y, [30, 90, 20]);
            }
        }
    }
    img
}

pub fn png(img: &RgbImage) -> Vec<u8> {
    encode_png(img)
}
