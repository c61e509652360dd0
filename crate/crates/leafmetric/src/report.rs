//! Measurement report records and their JSON / CSV serializations.

use std::io::Write;

use leafmetric_core::{LeafMetrics, MeasureError, MetricsError, RasterError};
use serde::{Deserialize, Serialize};

use crate::codec::DecodeError;
use crate::config::ConfigEcho;

pub const REPORT_VERSION: u32 = 1;

/// Wire form of [`LeafMetrics`]; field names are part of the report schema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub area_px: usize,
    pub length_px: usize,
    pub mean_width_px: f64,
    pub area_mm2: f64,
    pub length_mm: f64,
    pub width_mm: f64,
    pub component_count: usize,
    pub skeleton_branch_points: usize,
}

impl From<&LeafMetrics> for MetricsRecord {
    fn from(m: &LeafMetrics) -> Self {
        MetricsRecord {
            area_px: m.area_px,
            length_px: m.length_px,
            mean_width_px: m.mean_width_px,
            area_mm2: m.area_mm2,
            length_mm: m.length_mm,
            width_mm: m.width_mm,
            component_count: m.component_count,
            skeleton_branch_points: m.skeleton_branch_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub code: String,
    pub message: String,
}

impl ErrorRecord {
    pub fn new(code: &str, message: impl ToString) -> Self {
        ErrorRecord { code: code.to_string(), message: message.to_string() }
    }
}

impl From<&DecodeError> for ErrorRecord {
    fn from(e: &DecodeError) -> Self {
        ErrorRecord::new(e.code(), e)
    }
}

impl From<&MeasureError> for ErrorRecord {
    fn from(e: &MeasureError) -> Self {
        ErrorRecord::new(measure_error_code(e), e)
    }
}

pub fn measure_error_code(e: &MeasureError) -> &'static str {
    match e {
        MeasureError::Metrics(MetricsError::EmptyMask) => "EmptyMask",
        MeasureError::Raster(RasterError::RectOutOfBounds { .. }) => "RectOutOfBounds",
        MeasureError::Raster(RasterError::ZeroDimension) => "ZeroDimension",
        MeasureError::Raster(_) => "DimensionMismatch",
    }
}

/// Data-quality notes for a successful measurement.
pub fn warnings(metrics: &LeafMetrics) -> Vec<String> {
    let mut out = Vec::new();
    if metrics.component_count > 1 {
        out.push(format!(
            "{} separate objects survived noise removal; area is their total",
            metrics.component_count
        ));
    }
    if metrics.skeleton_branch_points > 0 {
        out.push(format!(
            "skeleton has {} branch point(s); length includes side branches",
            metrics.skeleton_branch_points
        ));
    }
    out
}

/// One input image. Failed images carry `error` and never `metrics`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<MetricsRecord>,
    /// Pixel areas of the objects that survived noise removal.
    #[serde(default)]
    pub component_areas: Vec<usize>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<ErrorRecord>,
    pub processing_ms: f64,
}

impl ImageRecord {
    pub fn failed(path: String, error: ErrorRecord, processing_ms: f64) -> Self {
        ImageRecord { path, metrics: None, component_areas: Vec::new(), warnings: Vec::new(), error: Some(error), processing_ms }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasurementReport {
    pub version: u32,
    pub config: ConfigEcho,
    pub images: Vec<ImageRecord>,
}

impl MeasurementReport {
    pub fn all_succeeded(&self) -> bool {
        self.images.iter().all(ImageRecord::is_ok)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    /// One row per image; millimetre values and mean width rounded to two
    /// decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "path",
            "area_px",
            "length_px",
            "mean_width_px",
            "area_mm2",
            "length_mm",
            "width_mm",
            "component_count",
            "skeleton_branch_points",
            "warnings",
            "error",
        ])?;
        for img in &self.images {
            let error = img.error.as_ref().map(|e| format!("{}: {}", e.code, e.message)).unwrap_or_default();
            let warnings = img.warnings.join("; ");
            match &img.metrics {
                Some(m) => w.write_record([
                    img.path.clone(),
                    m.area_px.to_string(),
                    m.length_px.to_string(),
                    format!("{:.2}", m.mean_width_px),
                    format!("{:.2}", m.area_mm2),
                    format!("{:.2}", m.length_mm),
                    format!("{:.2}", m.width_mm),
                    m.component_count.to_string(),
                    m.skeleton_branch_points.to_string(),
                    warnings,
                    error,
                ])?,
                None => {
                    let mut row = vec![img.path.clone()];
                    row.extend(std::iter::repeat_n(String::new(), 8));
                    row.extend([warnings, error]);
                    w.write_record(row)?
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics() -> MetricsRecord {
        MetricsRecord {
            area_px: 45_000,
            length_px: 150,
            mean_width_px: 300.0,
            area_mm2: 322.580_000_000_1,
            length_mm: 12.7,
            width_mm: 25.4,
            component_count: 1,
            skeleton_branch_points: 0,
        }
    }

    fn report() -> MeasurementReport {
        MeasurementReport {
            version: REPORT_VERSION,
            config: ConfigEcho {
                crop: None,
                background: "white",
                threshold: Some(128),
                min_area: 50,
                hue: None,
                dpi: Some(300.0),
                calibration_source: "declared",
            },
            images: vec![
                ImageRecord {
                    path: "a.png".into(),
                    metrics: Some(metrics()),
                    component_areas: vec![45_000],
                    warnings: vec![],
                    error: None,
                    processing_ms: 1.0,
                },
                ImageRecord::failed("b.jpg".into(), ErrorRecord::new("UnsupportedFormat", "JPEG"), 0.1),
            ],
        }
    }

    #[test]
    fn json_schema_field_names() {
        let v: serde_json::Value = serde_json::from_str(&report().to_json()).unwrap();
        assert_eq!(v["version"], 1);
        let ok = &v["images"][0];
        for key in [
            "area_px",
            "length_px",
            "mean_width_px",
            "area_mm2",
            "length_mm",
            "width_mm",
            "component_count",
            "skeleton_branch_points",
        ] {
            assert!(ok["metrics"].get(key).is_some(), "missing {key}");
        }
        assert!(ok.get("error").is_none());
        // full precision in JSON
        assert_eq!(ok["metrics"]["area_mm2"].as_f64(), Some(322.580_000_000_1));
        let failed = &v["images"][1];
        assert!(failed.get("metrics").is_none());
        assert_eq!(failed["error"]["code"], "UnsupportedFormat");
    }

    #[test]
    fn csv_rounds_millimetres() {
        let mut out = Vec::new();
        report().write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "a.png,45000,150,300.00,322.58,12.70,25.40,1,0,,");
        assert_eq!(lines[2], "b.jpg,,,,,,,,,,UnsupportedFormat: JPEG");
    }

    #[test]
    fn warnings_for_multiple_objects_and_branches() {
        let mut m = LeafMetrics {
            area_px: 10,
            length_px: 5,
            mean_width_px: 2.0,
            area_mm2: 1.0,
            length_mm: 1.0,
            width_mm: 1.0,
            component_count: 1,
            skeleton_branch_points: 0,
        };
        assert!(warnings(&m).is_empty());
        m.component_count = 3;
        m.skeleton_branch_points = 2;
        let w = warnings(&m);
        assert_eq!(w.len(), 2);
        assert!(w[0].starts_with("3 separate objects"));
    }
}
