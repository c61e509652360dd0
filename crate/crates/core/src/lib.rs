//! Measurement primitives for scanned leaves.
//!
//! The crate turns a decoded RGB raster into leaf area, skeleton length and
//! mean width: grayscale reduction and cropping ([`raster`]), brightness and
//! hue binarization ([`segmentation`]), component labeling, noise removal and
//! Zhang-Suen thinning ([`morphology`]), and pixel-to-millimetre conversion
//! ([`metrics`]). [`pipeline`] composes them into the single measurement path
//! shared by every front end.
//!
//! Everything here is a pure function over in-memory rasters. The crate is
//! `no_std` and only needs `alloc`; decoding files, reports and the HTTP
//! service live in the `leafmetric` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod metrics;
pub mod morphology;
pub mod pipeline;
pub mod raster;
pub mod segmentation;

pub use metrics::{
    compute_metrics, dpi_from_reference, px2_to_mm2, px_to_mm, Calibration, CalibrationError,
    CalibrationSource, LeafMetrics, MetricsError, ReferenceMeasurement, MM_PER_INCH,
};
pub use morphology::{
    count_foreground, label_components, remove_small_components, skeleton_branch_points, thin,
    zhang_suen, LabeledComponents,
};
pub use pipeline::{
    measure, render_overlay, segment, Measurement, MeasureError,
    PipelineParams, Selection, Segmented,
};
pub use raster::{crop, to_grayscale, CropRect, GrayImage, Image, RasterError, Rgb, RgbImage};
pub use segmentation::{
    hue_range_mask, rgb_to_hsv, threshold_mask, BackgroundPolarity, BinaryMask, HsvPixel,
    HueRange,
};
