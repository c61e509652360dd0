//! Lossless image decoding (PNG, binary PGM/PPM) and PNG encoding.
//!
//! Only formats that keep leaf edges exactly as scanned are accepted. Gray
//! input is expanded to equal RGB channels and alpha is composited over white.

use std::io::Cursor;

use leafmetric_core::{Rgb, RgbImage};
use thiserror::Error;

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image file: {0}")]
    CorruptFile(String),
    #[error("image has zero width or height")]
    ZeroDimension,
}

impl DecodeError {
    /// Stable identifier used in reports and HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            DecodeError::UnsupportedFormat(_) => "UnsupportedFormat",
            DecodeError::CorruptFile(_) => "CorruptFile",
            DecodeError::ZeroDimension => "ZeroDimension",
        }
    }
}

pub fn decode_image(bytes: &[u8]) -> Result<RgbImage, DecodeError> {
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P6") {
        decode_pnm(bytes)
    } else if bytes.len() >= 2 && bytes[0] == b'P' && (b'1'..=b'7').contains(&bytes[1]) {
        Err(DecodeError::UnsupportedFormat(format!(
            "P{} netpbm files; only binary PGM (P5) and PPM (P6) are read",
            bytes[1] as char
        )))
    } else {
        Err(DecodeError::UnsupportedFormat(sniff(bytes).to_string()))
    }
}

fn sniff(bytes: &[u8]) -> &'static str {
    if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
        "JPEG is lossy and not accepted"
    } else if bytes.starts_with(b"GIF8") {
        "GIF"
    } else if bytes.starts_with(b"II*\0") || bytes.starts_with(b"MM\0*") {
        "TIFF"
    } else if bytes.starts_with(b"BM") {
        "BMP"
    } else if bytes.len() >= 12 && &bytes[..4] == b"RIFF" && &bytes[8..12] == b"WEBP" {
        "WebP"
    } else if bytes.is_empty() {
        "empty file"
    } else {
        "unrecognised file signature"
    }
}

#[inline]
fn over_white(c: u8, alpha: u8) -> u8 {
    let (c, a) = (u32::from(c), u32::from(alpha));
    ((c * a + 255 * (255 - a) + 127) / 255) as u8
}

fn decode_png(bytes: &[u8]) -> Result<RgbImage, DecodeError> {
    // The decoder reports a zero-sized IHDR as a generic format error.
    if bytes.len() >= 24 && &bytes[12..16] == b"IHDR" {
        let width = u32::from_be_bytes(bytes[16..20].try_into().unwrap());
        let height = u32::from_be_bytes(bytes[20..24].try_into().unwrap());
        if width == 0 || height == 0 {
            return Err(DecodeError::ZeroDimension);
        }
    }

    let corrupt = |e: png::DecodingError| DecodeError::CorruptFile(e.to_string());
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(corrupt)?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    if depth != png::BitDepth::Eight
        || !matches!(color, png::ColorType::Grayscale | png::ColorType::Rgb | png::ColorType::Rgba)
    {
        return Err(DecodeError::UnsupportedFormat(format!(
            "PNG {color:?} at {} bits; expected 8-bit gray, RGB or RGBA",
            depth as u8
        )));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| DecodeError::CorruptFile("image too large".into()))?;
    let mut buf = vec![0; size];
    let frame = reader.next_frame(&mut buf).map_err(corrupt)?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let data = &buf[..frame.buffer_size()];

    let pixels: Vec<Rgb> = match color {
        png::ColorType::Grayscale => data.iter().map(|&v| [v, v, v]).collect(),
        png::ColorType::Rgb => data.chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect(),
        _ => data
            .chunks_exact(4)
            .map(|p| [over_white(p[0], p[3]), over_white(p[1], p[3]), over_white(p[2], p[3])])
            .collect(),
    };
    RgbImage::from_pixels(w, h, pixels).map_err(|e| DecodeError::CorruptFile(e.to_string()))
}

/// Splits a netpbm header into its four fields and returns the raster offset.
fn pnm_header(bytes: &[u8]) -> Result<([usize; 3], usize), DecodeError> {
    let mut fields = [0usize; 3];
    let mut pos = 2;
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(DecodeError::CorruptFile("truncated netpbm header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        let digits = std::str::from_utf8(&bytes[start..pos]).unwrap_or_default();
        *field = digits
            .parse()
            .map_err(|_| DecodeError::CorruptFile("malformed netpbm header".into()))?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => Ok((fields, pos + 1)),
        _ => Err(DecodeError::CorruptFile("malformed netpbm header".into())),
    }
}

fn decode_pnm(bytes: &[u8]) -> Result<RgbImage, DecodeError> {
    let channels = if bytes[1] == b'5' { 1 } else { 3 };
    let ([w, h, maxval], offset) = pnm_header(bytes)?;
    if w == 0 || h == 0 {
        return Err(DecodeError::ZeroDimension);
    }
    if maxval != 255 {
        return Err(DecodeError::UnsupportedFormat(format!(
            "netpbm maxval {maxval}; only 255 is accepted"
        )));
    }
    let need = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| DecodeError::CorruptFile("netpbm dimensions overflow".into()))?;
    let raster = bytes
        .get(offset..offset + need)
        .ok_or_else(|| DecodeError::CorruptFile("truncated netpbm raster".into()))?;
    let pixels = if channels == 1 {
        raster.iter().map(|&v| [v, v, v]).collect()
    } else {
        raster.chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect()
    };
    RgbImage::from_pixels(w, h, pixels).map_err(|e| DecodeError::CorruptFile(e.to_string()))
}

/// Encodes an 8-bit RGB PNG.
pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().expect("writing to a Vec cannot fail");
        let data: Vec<u8> = img.pixels().iter().flatten().copied().collect();
        writer.write_image_data(&data).expect("buffer matches the declared size");
        writer.finish().expect("writing to a Vec cannot fail");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn png_bytes(w: u32, h: u32, color: png::ColorType, depth: png::BitDepth, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        let mut encoder = png::Encoder::new(&mut out, w, h);
        encoder.set_color(color);
        encoder.set_depth(depth);
        let mut writer = encoder.write_header().unwrap();
        writer.write_image_data(data).unwrap();
        writer.finish().unwrap();
        out
    }

    #[test]
    fn decodes_rgb_png() {
        let bytes = png_bytes(2, 1, png::ColorType::Rgb, png::BitDepth::Eight, &[0, 0, 0, 255, 255, 255]);
        let img = decode_image(&bytes).unwrap();
        assert_eq!((img.width(), img.height()), (2, 1));
        assert_eq!(img.pixels(), &[[0, 0, 0], [255, 255, 255]]);
    }

    #[test]
    fn expands_gray_png() {
        let bytes = png_bytes(1, 1, png::ColorType::Grayscale, png::BitDepth::Eight, &[77]);
        assert_eq!(decode_image(&bytes).unwrap().pixels(), &[[77, 77, 77]]);
    }

    #[test]
    fn composites_alpha_over_white() {
        let clear = png_bytes(1, 1, png::ColorType::Rgba, png::BitDepth::Eight, &[12, 200, 3, 0]);
        assert_eq!(decode_image(&clear).unwrap().pixels(), &[[255, 255, 255]]);
        let opaque = png_bytes(1, 1, png::ColorType::Rgba, png::BitDepth::Eight, &[12, 200, 3, 255]);
        assert_eq!(decode_image(&opaque).unwrap().pixels(), &[[12, 200, 3]]);
        // Black at alpha 128: 255 * 127 / 255 = 127.
        let half = png_bytes(1, 1, png::ColorType::Rgba, png::BitDepth::Eight, &[0, 0, 0, 128]);
        assert_eq!(decode_image(&half).unwrap().pixels(), &[[127, 127, 127]]);
    }

    #[test]
    fn rejects_other_png_layouts() {
        let sixteen = png_bytes(1, 1, png::ColorType::Grayscale, png::BitDepth::Sixteen, &[0, 1]);
        assert!(matches!(decode_image(&sixteen), Err(DecodeError::UnsupportedFormat(_))));
        let gray_alpha = png_bytes(1, 1, png::ColorType::GrayscaleAlpha, png::BitDepth::Eight, &[0, 1]);
        assert!(matches!(decode_image(&gray_alpha), Err(DecodeError::UnsupportedFormat(_))));
    }

    #[test]
    fn truncated_png_is_corrupt() {
        let bytes = png_bytes(4, 4, png::ColorType::Rgb, png::BitDepth::Eight, &[90; 48]);
        let err = decode_image(&bytes[..bytes.len() - 20]).unwrap_err();
        assert!(matches!(err, DecodeError::CorruptFile(_)), "{err:?}");
        assert!(matches!(decode_image(&bytes[..10]), Err(DecodeError::CorruptFile(_))));
    }

    #[test]
    fn zero_sized_png_header() {
        let mut bytes = png_bytes(1, 1, png::ColorType::Rgb, png::BitDepth::Eight, &[1, 2, 3]);
        bytes[16..20].copy_from_slice(&0u32.to_be_bytes());
        assert_eq!(decode_image(&bytes), Err(DecodeError::ZeroDimension));
    }

    #[test]
    fn other_formats_are_unsupported() {
        for bytes in [&b"\xFF\xD8\xFF\xE0rest"[..], b"GIF89a", b"BM....", b"", b"hello", b"P3\n1 1\n255\n0 0 0\n"] {
            assert!(matches!(decode_image(bytes), Err(DecodeError::UnsupportedFormat(_))), "{bytes:?}");
        }
    }

    #[test]
    fn reads_binary_pgm_and_ppm() {
        let pgm = b"P5\n# scanner export\n2 1\n255\n\x00\xff";
        assert_eq!(decode_image(pgm).unwrap().pixels(), &[[0, 0, 0], [255, 255, 255]]);
        let ppm = b"P6 1 1 255 \x01\x02\x03";
        assert_eq!(decode_image(ppm).unwrap().pixels(), &[[1, 2, 3]]);
    }

    #[test]
    fn pnm_errors() {
        assert_eq!(decode_image(b"P5\n0 4\n255\n"), Err(DecodeError::ZeroDimension));
        assert!(matches!(decode_image(b"P5\n1 1\n65535\n\x00\x00"), Err(DecodeError::UnsupportedFormat(_))));
        assert!(matches!(decode_image(b"P6\n2 2\n255\n\x00\x00"), Err(DecodeError::CorruptFile(_))));
        assert!(matches!(decode_image(b"P5\n2"), Err(DecodeError::CorruptFile(_))));
        assert!(matches!(decode_image(b"P5\nx 2\n255\n"), Err(DecodeError::CorruptFile(_))));
    }

    #[test]
    fn over_white_extremes() {
        for c in 0..=255 {
            assert_eq!(over_white(c, 255), c);
            assert_eq!(over_white(c, 0), 255);
        }
    }

    fn rgb_image() -> impl Strategy<Value = RgbImage> {
        (1usize..24, 1usize..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<[u8; 3]>(), w * h)
                .prop_map(move |px| RgbImage::from_pixels(w, h, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn png_round_trip(img in rgb_image()) {
            let once = decode_image(&encode_png(&img)).unwrap();
            prop_assert_eq!(&once, &img);
            prop_assert_eq!(decode_image(&encode_png(&once)).unwrap(), img);
        }
    }
}
