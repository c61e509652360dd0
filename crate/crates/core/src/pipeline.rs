//! The measurement path shared by the batch CLI and the preview service.

use alloc::vec::Vec;
use core::fmt;

use crate::metrics::{compute_metrics, Calibration, LeafMetrics, MetricsError};
use crate::morphology::{count_foreground, label_components, remove_small_components};
use crate::raster::{crop, to_grayscale, CropRect, RasterError, Rgb, RgbImage};
use crate::segmentation::{hue_range_mask, threshold_mask, BackgroundPolarity, BinaryMask, HueRange};

/// How leaf pixels are told apart from the background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    Threshold { threshold: u8, polarity: BackgroundPolarity },
    Hue(HueRange),
}

impl Default for Selection {
    fn default() -> Self {
        Selection::Threshold { threshold: 128, polarity: BackgroundPolarity::White }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineParams {
    pub crop: Option<CropRect>,
    pub selection: Selection,
    /// Components smaller than this many pixels are dropped as noise.
    pub min_area: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureError {
    Raster(RasterError),
    Metrics(MetricsError),
}

impl fmt::Display for MeasureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureError::Raster(e) => e.fmt(f),
            MeasureError::Metrics(e) => e.fmt(f),
        }
    }
}

impl core::error::Error for MeasureError {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            MeasureError::Raster(e) => Some(e),
            MeasureError::Metrics(e) => Some(e),
        }
    }
}

impl From<RasterError> for MeasureError {
    fn from(e: RasterError) -> Self {
        MeasureError::Raster(e)
    }
}

impl From<MetricsError> for MeasureError {
    fn from(e: MetricsError) -> Self {
        MeasureError::Metrics(e)
    }
}

/// Output of the segmentation half of the pipeline.
#[derive(Debug, Clone)]
pub struct Segmented {
    /// The cropped colour image the mask refers to.
    pub image: RgbImage,
    /// Foreground left after noise removal.
    pub mask: BinaryMask,
    /// Areas of the surviving components in raster order.
    pub component_areas: Vec<usize>,
}

impl Segmented {
    pub fn area_px(&self) -> usize {
        count_foreground(&self.mask)
    }

    pub fn component_count(&self) -> usize {
        self.component_areas.len()
    }
}

/// crop, then binarize (grayscale threshold or hue range on the colour
/// crop), then drop components below `min_area`.
pub fn segment(img: &RgbImage, params: &PipelineParams) -> Result<Segmented, MeasureError> {
    let image = match params.crop {
        Some(rect) => crop(img, rect)?,
        None => img.clone(),
    };
    let raw = match params.selection {
        Selection::Threshold { threshold, polarity } => {
            threshold_mask(&to_grayscale(&image), threshold, polarity)
        }
        Selection::Hue(range) => hue_range_mask(&image, &range),
    };
    let mask = remove_small_components(&label_components(&raw), params.min_area);
    let component_areas = label_components(&mask).areas().to_vec();
    Ok(Segmented { image, mask, component_areas })
}

#[derive(Debug, Clone)]
pub struct Measurement {
    pub segmented: Segmented,
    pub metrics: LeafMetrics,
}

pub fn measure(
    img: &RgbImage,
    params: &PipelineParams,
    cal: &Calibration,
) -> Result<Measurement, MeasureError> {
    let segmented = segment(img, params)?;
    let metrics = compute_metrics(&segmented.mask, cal)?;
    Ok(Measurement { segmented, metrics })
}

/// Blends `tint` 50/50 into every foreground pixel, rounding halves up.
pub fn render_overlay(img: &RgbImage, mask: &BinaryMask, tint: Rgb) -> Result<RgbImage, RasterError> {
    if img.width() != mask.width() || img.height() != mask.height() {
        return Err(RasterError::MaskMismatch {
            image: (img.width(), img.height()),
            mask: (mask.width(), mask.height()),
        });
    }
    let pixels = img
        .pixels()
        .iter()
        .zip(mask.bits())
        .map(|(&p, &fg)| {
            if fg {
                core::array::from_fn(|c| (u16::from(p[c]) + u16::from(tint[c])).div_ceil(2) as u8)
            } else {
                p
            }
        })
        .collect();
    RgbImage::from_pixels(img.width(), img.height(), pixels)
}
