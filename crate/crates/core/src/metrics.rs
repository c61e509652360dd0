//! Pixel-to-millimetre calibration and the final leaf measurement record.

use core::fmt;

use crate::morphology::{count_foreground, label_components, skeleton_branch_points, thin};
use crate::segmentation::BinaryMask;

/// Millimetres per international inch.
pub const MM_PER_INCH: f64 = 25.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CalibrationSource {
    /// Resolution entered by the user, usually the scanner setting.
    Declared,
    /// Resolution derived from two points on a reference object.
    TwoPoint,
}

impl CalibrationSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            CalibrationSource::Declared => "declared",
            CalibrationSource::TwoPoint => "two_point",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CalibrationError {
    /// The two reference points coincide.
    DegenerateReference,
    NonPositiveLength(f64),
    InvalidDpi(f64),
}

impl fmt::Display for CalibrationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalibrationError::DegenerateReference => {
                f.write_str("reference points must be distinct")
            }
            CalibrationError::NonPositiveLength(l) => {
                write!(f, "reference length must be positive, got {l} mm")
            }
            CalibrationError::InvalidDpi(d) => {
                write!(f, "resolution must be positive and finite, got {d} dpi")
            }
        }
    }
}

impl core::error::Error for CalibrationError {}

/// Scan resolution in dots per inch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    dpi: f64,
    source: CalibrationSource,
}

impl Calibration {
    pub fn declared(dpi: f64) -> Result<Self, CalibrationError> {
        Calibration::new(dpi, CalibrationSource::Declared)
    }

    pub fn new(dpi: f64, source: CalibrationSource) -> Result<Self, CalibrationError> {
        if dpi.is_finite() && dpi > 0.0 {
            Ok(Calibration { dpi, source })
        } else {
            Err(CalibrationError::InvalidDpi(dpi))
        }
    }

    pub fn dpi(&self) -> f64 {
        self.dpi
    }

    pub fn source(&self) -> CalibrationSource {
        self.source
    }

    /// Length of one pixel edge in millimetres.
    pub fn mm_per_px(&self) -> f64 {
        MM_PER_INCH / self.dpi
    }
}

/// Two clicked pixel positions on a reference object and their true distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceMeasurement {
    pub p1: (f64, f64),
    pub p2: (f64, f64),
    pub real_length_mm: f64,
}

impl ReferenceMeasurement {
    pub fn new(p1: (f64, f64), p2: (f64, f64), real_length_mm: f64) -> Self {
        ReferenceMeasurement { p1, p2, real_length_mm }
    }

    pub fn pixel_distance(&self) -> f64 {
        libm::hypot(self.p2.0 - self.p1.0, self.p2.1 - self.p1.1)
    }
}

/// Pixels between the points divided by the reference length in inches.
pub fn dpi_from_reference(reference: &ReferenceMeasurement) -> Result<Calibration, CalibrationError> {
    let len = reference.real_length_mm;
    if !(len > 0.0) || !len.is_finite() {
        return Err(CalibrationError::NonPositiveLength(len));
    }
    if reference.p1 == reference.p2 {
        return Err(CalibrationError::DegenerateReference);
    }
    let dpi = reference.pixel_distance() / (len / MM_PER_INCH);
    Calibration::new(dpi, CalibrationSource::TwoPoint)
}

pub fn px_to_mm(length_px: f64, cal: &Calibration) -> f64 {
    length_px / cal.dpi * MM_PER_INCH
}

pub fn px2_to_mm2(area_px: usize, cal: &Calibration) -> f64 {
    area_px as f64 / (cal.dpi * cal.dpi) * (MM_PER_INCH * MM_PER_INCH)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsError {
    /// No foreground left to measure.
    EmptyMask,
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::EmptyMask => f.write_str("no leaf pixels remain after segmentation"),
        }
    }
}

impl core::error::Error for MetricsError {}

/// Area, skeleton length and mean width of a measured mask.
///
/// Length is the skeleton pixel count with no diagonal correction, and mean
/// width is area over length. `skeleton_branch_points > 0` means the skeleton
/// forks and the length overstates the midrib.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafMetrics {
    pub area_px: usize,
    pub length_px: usize,
    pub mean_width_px: f64,
    pub area_mm2: f64,
    pub length_mm: f64,
    pub width_mm: f64,
    pub component_count: usize,
    pub skeleton_branch_points: usize,
}

pub fn compute_metrics(mask: &BinaryMask, cal: &Calibration) -> Result<LeafMetrics, MetricsError> {
    let area_px = count_foreground(mask);
    if area_px == 0 {
        return Err(MetricsError::EmptyMask);
    }
    let skeleton = thin(mask);
    let length_px = count_foreground(&skeleton);
    // A non-empty mask always keeps at least one skeleton pixel per component.
    let mean_width_px = area_px as f64 / length_px as f64;
    Ok(LeafMetrics {
        area_px,
        length_px,
        mean_width_px,
        area_mm2: px2_to_mm2(area_px, cal),
        length_mm: px_to_mm(length_px as f64, cal),
        width_mm: px_to_mm(mean_width_px, cal),
        component_count: label_components(mask).count(),
        skeleton_branch_points: skeleton_branch_points(&skeleton),
    })
}
