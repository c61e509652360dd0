//! Leaf/background classification by brightness threshold or hue range.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::raster::{GrayImage, Rgb, RgbImage};

/// Which side of the threshold the scanner background sits on.
///
/// A white background makes the leaf the darker region; a black one makes it
/// the lighter region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BackgroundPolarity {
    #[default]
    White,
    Black,
}

impl BackgroundPolarity {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackgroundPolarity::White => "white",
            BackgroundPolarity::Black => "black",
        }
    }
}

impl fmt::Display for BackgroundPolarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsePolarityError;

impl fmt::Display for ParsePolarityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("background must be `white` or `black`")
    }
}

impl core::error::Error for ParsePolarityError {}

impl FromStr for BackgroundPolarity {
    type Err = ParsePolarityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("white") {
            Ok(BackgroundPolarity::White)
        } else if s.eq_ignore_ascii_case("black") {
            Ok(BackgroundPolarity::Black)
        } else {
            Err(ParsePolarityError)
        }
    }
}

/// Per-pixel foreground flags, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    /// All-background mask.
    pub fn new(width: usize, height: usize) -> Self {
        BinaryMask { width, height, bits: alloc::vec![false; width * height] }
    }

    /// Panics if `bits.len() != width * height`.
    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "mask buffer does not match dimensions");
        BinaryMask { width, height, bits }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        BinaryMask { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Out-of-range coordinates read as background.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Every foreground pixel of `self` is foreground in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Foreground coordinates in raster order.
    pub fn foreground(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(move |(i, _)| (i % w, i / w))
    }
}

/// Foreground is `gray < threshold` on a white background and
/// `gray > threshold` on a black one.
pub fn threshold_mask(img: &GrayImage, threshold: u8, bg: BackgroundPolarity) -> BinaryMask {
    let bits = match bg {
        BackgroundPolarity::White => img.pixels().iter().map(|&g| g < threshold).collect(),
        BackgroundPolarity::Black => img.pixels().iter().map(|&g| g > threshold).collect(),
    };
    BinaryMask { width: img.width(), height: img.height(), bits }
}

/// Hexcone HSV. `h` in degrees `[0, 360)`, `s` and `v` in `[0, 1]`.
///
/// Achromatic pixels (`s == 0`) always carry `h == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsvPixel {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

pub fn rgb_to_hsv(p: Rgb) -> HsvPixel {
    let [r, g, b] = p;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let v = f64::from(max) / 255.0;
    if max == min {
        return HsvPixel { h: 0.0, s: 0.0, v };
    }
    let delta = f64::from(max - min);
    let s = delta / f64::from(max);
    let (r, g, b) = (f64::from(r), f64::from(g), f64::from(b));
    let mut h = if max == p[0] {
        60.0 * ((g - b) / delta)
    } else if max == p[1] {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    if h < 0.0 {
        h += 360.0;
    }
    if h >= 360.0 {
        h = 0.0;
    }
    HsvPixel { h, s, v }
}

pub const DEFAULT_MIN_SATURATION: f64 = 0.15;
pub const DEFAULT_MIN_VALUE: f64 = 0.15;

/// Largest hue bound; `[0, HUE_MAX]` covers every representable hue.
pub const HUE_MAX: f64 = f64::from_bits(360f64.to_bits() - 1);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HueRangeError {
    HueOutOfRange(f64),
    FractionOutOfRange(f64),
}

impl fmt::Display for HueRangeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HueRangeError::HueOutOfRange(h) => write!(f, "hue bound {h} is outside [0, 360)"),
            HueRangeError::FractionOutOfRange(v) => {
                write!(f, "saturation/value gate {v} is outside [0, 1]")
            }
        }
    }
}

impl core::error::Error for HueRangeError {}

/// A hue interval plus saturation and value gates.
///
/// `lo > hi` denotes a range that wraps through 0 degrees, so reds around
/// 350..10 can be selected in one piece. The gates keep achromatic pixels,
/// whose hue is meaningless, out of every range; set both to 0 for a pure hue
/// test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HueRange {
    lo: f64,
    hi: f64,
    min_saturation: f64,
    min_value: f64,
}

impl HueRange {
    pub fn new(lo: f64, hi: f64, min_saturation: f64, min_value: f64) -> Result<Self, HueRangeError> {
        for h in [lo, hi] {
            if !(0.0..360.0).contains(&h) {
                return Err(HueRangeError::HueOutOfRange(h));
            }
        }
        for g in [min_saturation, min_value] {
            if !(0.0..=1.0).contains(&g) {
                return Err(HueRangeError::FractionOutOfRange(g));
            }
        }
        Ok(HueRange { lo, hi, min_saturation, min_value })
    }

    /// Range with the default 0.15 saturation and value gates.
    pub fn with_default_gates(lo: f64, hi: f64) -> Result<Self, HueRangeError> {
        HueRange::new(lo, hi, DEFAULT_MIN_SATURATION, DEFAULT_MIN_VALUE)
    }

    /// Every hue, no gates.
    pub fn full() -> Self {
        HueRange { lo: 0.0, hi: HUE_MAX, min_saturation: 0.0, min_value: 0.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn min_saturation(&self) -> f64 {
        self.min_saturation
    }

    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    pub fn contains_hue(&self, h: f64) -> bool {
        if self.lo <= self.hi {
            self.lo <= h && h <= self.hi
        } else {
            h >= self.lo || h <= self.hi
        }
    }

    pub fn contains(&self, px: HsvPixel) -> bool {
        px.s >= self.min_saturation && px.v >= self.min_value && self.contains_hue(px.h)
    }
}

pub fn hue_range_mask(img: &RgbImage, range: &HueRange) -> BinaryMask {
    let bits = img.pixels().iter().map(|&p| range.contains(rgb_to_hsv(p))).collect();
    BinaryMask { width: img.width(), height: img.height(), bits }
}
