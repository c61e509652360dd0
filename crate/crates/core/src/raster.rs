//! Row-major pixel rasters, BT.601 grayscale reduction and rectangular crops.

use alloc::vec::Vec;
use core::fmt;

/// An 8-bit `(r, g, b)` triple.
pub type Rgb = [u8; 3];

/// A scanned colour image.
pub type RgbImage = Image<Rgb>;

/// Luminance reduction of an [`RgbImage`].
pub type GrayImage = Image<u8>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RasterError {
    ZeroDimension,
    /// Pixel buffer length disagrees with `width * height`.
    DimensionMismatch { expected: usize, actual: usize },
    RectOutOfBounds { rect: CropRect, width: usize, height: usize },
    /// Image and mask sizes differ.
    MaskMismatch { image: (usize, usize), mask: (usize, usize) },
}

impl fmt::Display for RasterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RasterError::ZeroDimension => f.write_str("image width and height must be at least 1"),
            RasterError::DimensionMismatch { expected, actual } => {
                write!(f, "expected {expected} pixels, got {actual}")
            }
            RasterError::RectOutOfBounds { rect, width, height } => write!(
                f,
                "crop {},{},{},{} does not fit a {width}x{height} image",
                rect.x, rect.y, rect.w, rect.h
            ),
            RasterError::MaskMismatch { image, mask } => write!(
                f,
                "mask is {}x{} but the image is {}x{}",
                mask.0, mask.1, image.0, image.1
            ),
        }
    }
}

impl core::error::Error for RasterError {}

/// A non-empty rectangular raster stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image<P> {
    width: usize,
    height: usize,
    pixels: Vec<P>,
}

impl<P: Copy> Image<P> {
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<P>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroDimension);
        }
        let expected = width.checked_mul(height).ok_or(RasterError::ZeroDimension)?;
        if pixels.len() != expected {
            return Err(RasterError::DimensionMismatch { expected, actual: pixels.len() });
        }
        Ok(Image { width, height, pixels })
    }

    /// Image filled with a single value.
    pub fn filled(width: usize, height: usize, value: P) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroDimension);
        }
        Ok(Image { width, height, pixels: alloc::vec![value; width * height] })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[P] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<P> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> P {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: P) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, P> {
        self.pixels.chunks_exact(self.width)
    }

    /// Applies `f` to every pixel, keeping the dimensions.
    pub fn map<Q: Copy>(&self, f: impl FnMut(P) -> Q) -> Image<Q> {
        Image {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().copied().map(f).collect(),
        }
    }

    pub fn crop(&self, rect: CropRect) -> Result<Self, RasterError> {
        crop(self, rect)
    }
}

/// Axis-aligned crop region. `x`/`y` are the inclusive top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CropRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl CropRect {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        CropRect { x, y, w, h }
    }

    /// The rectangle covering a whole `width` x `height` image.
    pub const fn full(width: usize, height: usize) -> Self {
        CropRect { x: 0, y: 0, w: width, h: height }
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.w >= 1
            && self.h >= 1
            && self.x.checked_add(self.w).is_some_and(|r| r <= width)
            && self.y.checked_add(self.h).is_some_and(|b| b <= height)
    }

    /// `inner` expressed in the coordinates of the image this rect was cut from.
    pub fn then(&self, inner: CropRect) -> CropRect {
        CropRect { x: self.x + inner.x, y: self.y + inner.y, w: inner.w, h: inner.h }
    }
}

/// Copies the `rect` window out of `img`; output pixel `(i, j)` is source `(x + i, y + j)`.
pub fn crop<P: Copy>(img: &Image<P>, rect: CropRect) -> Result<Image<P>, RasterError> {
    if !rect.fits(img.width, img.height) {
        return Err(RasterError::RectOutOfBounds { rect, width: img.width, height: img.height });
    }
    let mut pixels = Vec::with_capacity(rect.w * rect.h);
    for row in img.rows().skip(rect.y).take(rect.h) {
        pixels.extend_from_slice(&row[rect.x..rect.x + rect.w]);
    }
    Ok(Image { width: rect.w, height: rect.h, pixels })
}

/// BT.601 luma, `round(0.299 r + 0.587 g + 0.114 b)` with halves rounded up.
///
/// Evaluated in integer thousandths so the rounding is exact.
#[inline]
pub fn luma(p: Rgb) -> u8 {
    let [r, g, b] = p.map(u32::from);
    let thousandths = 299 * r + 587 * g + 114 * b;
    ((thousandths + 500) / 1000) as u8
}

pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    img.map(luma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn gray(width: usize, height: usize, values: Vec<u8>) -> GrayImage {
        Image::from_pixels(width, height, values).unwrap()
    }

    #[test]
    fn luma_anchors() {
        assert_eq!(luma([255, 255, 255]), 255);
        assert_eq!(luma([0, 0, 0]), 0);
        // 0.299 * 255 = 76.245, checked in plain floating point.
        let red = (0.299f64 * 255.0 + 0.5) as u8;
        assert_eq!(red, 76);
        assert_eq!(luma([255, 0, 0]), red);
    }

    #[test]
    fn luma_rounds_half_up() {
        // 0.587 * 230 + 0.114 * 5 = 135.58 -> 136; 0.299 * 10 + 0.587 * 5 = 5.925 -> 6
        assert_eq!(luma([0, 230, 5]), 136);
        assert_eq!(luma([10, 5, 0]), 6);
        // 0.114 * 250 = 28.5 exactly, must round up.
        assert_eq!(luma([0, 0, 250]), 29);
    }

    #[test]
    fn rejects_bad_buffers() {
        assert_eq!(Image::<u8>::from_pixels(0, 3, vec![]), Err(RasterError::ZeroDimension));
        assert_eq!(
            Image::<u8>::from_pixels(2, 2, vec![0; 3]),
            Err(RasterError::DimensionMismatch { expected: 4, actual: 3 })
        );
    }

    #[test]
    fn crop_examples() {
        let img = gray(3, 3, (0..9).collect());
        assert_eq!(crop(&img, CropRect::full(3, 3)).unwrap(), img);
        let inner = crop(&img, CropRect::new(1, 1, 2, 2)).unwrap();
        assert_eq!((inner.width(), inner.height()), (2, 2));
        assert_eq!(inner.pixels(), &[4, 5, 7, 8]);

        let line = gray(3, 1, vec![1, 2, 3]);
        assert!(matches!(
            crop(&line, CropRect::new(2, 0, 2, 1)),
            Err(RasterError::RectOutOfBounds { .. })
        ));
        assert!(crop(&line, CropRect::new(0, 0, 0, 1)).is_err());
        assert!(crop(&line, CropRect::new(usize::MAX, 0, 2, 1)).is_err());
    }

    #[test]
    fn crop_works_on_rgb() {
        let img = RgbImage::from_pixels(2, 1, vec![[1, 2, 3], [4, 5, 6]]).unwrap();
        assert_eq!(img.crop(CropRect::new(1, 0, 1, 1)).unwrap().pixels(), &[[4, 5, 6]]);
    }

    fn image_and_rects() -> impl Strategy<Value = (GrayImage, CropRect, CropRect)> {
        (1usize..12, 1usize..12)
            .prop_flat_map(|(w, h)| {
                (
                    proptest::collection::vec(any::<u8>(), w * h),
                    0..w,
                    0..h,
                    Just((w, h)),
                )
            })
            .prop_flat_map(|(px, ax, ay, (w, h))| {
                (Just(px), Just((w, h)), Just((ax, ay)), 1..=w - ax, 1..=h - ay)
            })
            .prop_flat_map(|(px, (w, h), (ax, ay), aw, ah)| {
                (Just(px), Just((w, h)), Just(CropRect::new(ax, ay, aw, ah)), 0..aw, 0..ah)
            })
            .prop_flat_map(|(px, (w, h), a, bx, by)| {
                (
                    Just(gray(w, h, px)),
                    Just(a),
                    (1..=a.w - bx, 1..=a.h - by).prop_map(move |(bw, bh)| CropRect::new(bx, by, bw, bh)),
                )
            })
    }

    proptest! {
        #[test]
        fn crop_composes((img, outer, inner) in image_and_rects()) {
            let twice = crop(&crop(&img, outer).unwrap(), inner).unwrap();
            prop_assert_eq!(twice, crop(&img, outer.then(inner)).unwrap());
        }

        #[test]
        fn grayscale_keeps_dimensions_and_neutral_values(
            w in 1usize..20, h in 1usize..20, v in any::<u8>()
        ) {
            let img = RgbImage::filled(w, h, [v, v, v]).unwrap();
            let g = to_grayscale(&img);
            prop_assert_eq!((g.width(), g.height()), (w, h));
            prop_assert!(g.pixels().iter().all(|&p| p == v));
        }

        #[test]
        fn luma_matches_float_formula(r in any::<u8>(), g in any::<u8>(), b in any::<u8>()) {
            let exact = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
            let diff = (f64::from(luma([r, g, b])) - exact).abs();
            prop_assert!(diff <= 0.5 + 1e-9);
        }
    }
}
