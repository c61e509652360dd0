//! Batch measurement: expand inputs, measure each image, write reports and overlays.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use leafmetric_core::{
    measure, render_overlay, BinaryMask, Calibration, CropRect, PipelineParams, Rgb, RgbImage,
};
use rayon::prelude::*;
use thiserror::Error;

use crate::codec::{decode_image, encode_png};
use crate::config::PipelineConfig;
use crate::report::{warnings, ErrorRecord, ImageRecord, MeasurementReport, MetricsRecord, REPORT_VERSION};

/// Tint blended into leaf pixels on overlay images.
pub const OVERLAY_TINT: Rgb = [255, 0, 0];

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("invalid calibration: {0}")]
    Calibration(#[from] leafmetric_core::CalibrationError),
    #[error("bad input pattern `{pattern}`: {message}")]
    Pattern { pattern: String, message: String },
    #[error("writing {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

fn is_pattern(s: &str) -> bool {
    s.contains(['*', '?', '['])
}

/// Resolves paths and glob patterns in order. Patterns that match nothing
/// contribute nothing; literal paths are kept even if missing so they show
/// up as failed images.
pub fn expand_inputs(inputs: &[String]) -> Result<Vec<PathBuf>, BatchError> {
    let mut out = Vec::new();
    for input in inputs {
        if !is_pattern(input) {
            out.push(PathBuf::from(input));
            continue;
        }
        let bad = |message: String| BatchError::Pattern { pattern: input.clone(), message };
        let mut matched: Vec<PathBuf> = glob::glob(input)
            .map_err(|e| bad(e.to_string()))?
            .filter_map(Result::ok)
            .filter(|p| p.is_file())
            .collect();
        matched.sort();
        out.extend(matched);
    }
    Ok(out)
}

/// Overlay file name per input, `<stem>.overlay.png`, suffixed on clashes.
fn overlay_names(paths: &[PathBuf]) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    paths
        .iter()
        .map(|p| {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "image".into());
            let n = seen.entry(stem.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                format!("{stem}.overlay.png")
            } else {
                format!("{stem}-{n}.overlay.png")
            }
        })
        .collect()
}

/// Places a mask computed on a crop back into the frame of the whole image,
/// so overlays always have the input's dimensions.
fn full_frame_mask(img: &RgbImage, crop: Option<CropRect>, mask: &BinaryMask) -> BinaryMask {
    let Some(r) = crop else { return mask.clone() };
    BinaryMask::from_fn(img.width(), img.height(), |x, y| {
        x >= r.x && y >= r.y && x < r.x + r.w && y < r.y + r.h && mask.get(x - r.x, y - r.y)
    })
}

/// Metrics, surviving component areas and warnings for one image.
pub type Measured = (MetricsRecord, Vec<usize>, Vec<String>);

/// Measures one already-read file. Also returns the overlay when requested.
pub fn measure_bytes(
    bytes: &[u8],
    params: &PipelineParams,
    cal: &Calibration,
    with_overlay: bool,
) -> (Result<Measured, ErrorRecord>, Option<Vec<u8>>) {
    let img = match decode_image(bytes) {
        Ok(img) => img,
        Err(e) => return (Err(ErrorRecord::from(&e)), None),
    };
    match measure(&img, params, cal) {
        Ok(m) => {
            let overlay = with_overlay.then(|| {
                let mask = full_frame_mask(&img, params.crop, &m.segmented.mask);
                let tinted = render_overlay(&img, &mask, OVERLAY_TINT).expect("mask matches the image");
                encode_png(&tinted)
            });
            let record = MetricsRecord::from(&m.metrics);
            (Ok((record, m.segmented.component_areas, warnings(&m.metrics))), overlay)
        }
        Err(e) => (Err(ErrorRecord::from(&e)), None),
    }
}

fn process(path: &Path, overlay_path: Option<&Path>, params: &PipelineParams, cal: &Calibration) -> ImageRecord {
    let started = Instant::now();
    let elapsed = |s: Instant| s.elapsed().as_secs_f64() * 1e3;
    let display = path.display().to_string();
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => return ImageRecord::failed(display, ErrorRecord::new("Io", e), elapsed(started)),
    };
    let (result, overlay) = measure_bytes(&bytes, params, cal, overlay_path.is_some());
    let (metrics, component_areas, mut warnings) = match result {
        Ok(r) => r,
        Err(e) => return ImageRecord::failed(display, e, elapsed(started)),
    };
    if let (Some(png), Some(out)) = (overlay, overlay_path) {
        if let Err(e) = std::fs::write(out, png) {
            warnings.push(format!("could not write overlay {}: {e}", out.display()));
        }
    }
    ImageRecord {
        path: display,
        metrics: Some(metrics),
        component_areas,
        warnings,
        error: None,
        processing_ms: elapsed(started),
    }
}

/// Runs the whole batch. Per-image failures end up in the report; only
/// configuration and output-directory problems are returned as errors.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<MeasurementReport, BatchError> {
    let cal = cfg.calibration()?;
    let params = cfg.params();
    let paths = expand_inputs(&cfg.inputs)?;
    let write_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| BatchError::Write { path, source }
    };
    std::fs::create_dir_all(&cfg.out_dir).map_err(write_err(&cfg.out_dir))?;

    let overlays: Vec<Option<PathBuf>> = overlay_names(&paths)
        .into_iter()
        .map(|name| cfg.overlay.then(|| cfg.out_dir.join(name)))
        .collect();
    let images: Vec<ImageRecord> = paths
        .par_iter()
        .zip(overlays.par_iter())
        .map(|(path, overlay)| process(path, overlay.as_deref(), &params, &cal))
        .collect();

    let report = MeasurementReport { version: REPORT_VERSION, config: cfg.echo(), images };
    if cfg.formats.json {
        let path = cfg.out_dir.join("report.json");
        std::fs::write(&path, report.to_json()).map_err(write_err(&path))?;
    }
    if cfg.formats.csv {
        let path = cfg.out_dir.join("report.csv");
        let file = std::fs::File::create(&path).map_err(write_err(&path))?;
        report.write_csv(file).map_err(|e| BatchError::Write {
            path: path.clone(),
            source: std::io::Error::other(e),
        })?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cropped_mask_lands_at_its_offset() {
        let img = RgbImage::filled(5, 4, [0; 3]).unwrap();
        let small = BinaryMask::from_fn(2, 2, |x, y| x == y);
        let full = full_frame_mask(&img, Some(CropRect::new(3, 1, 2, 2)), &small);
        let on: Vec<_> = full.foreground().collect();
        assert_eq!(on, [(3, 1), (4, 2)]);
    }

    #[test]
    fn overlay_names_are_unique() {
        let paths = [PathBuf::from("a/leaf.png"), PathBuf::from("b/leaf.pgm"), PathBuf::from("c/other.png")];
        assert_eq!(overlay_names(&paths), ["leaf.overlay.png", "leaf-2.overlay.png", "other.overlay.png"]);
    }

    #[test]
    fn literal_paths_pass_through_and_patterns_expand() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["b.png", "a.png", "c.txt"] {
            std::fs::write(dir.path().join(name), b"x").unwrap();
        }
        let pattern = format!("{}/*.png", dir.path().display());
        let missing = dir.path().join("missing.png").display().to_string();
        let nothing = format!("{}/*.tiff", dir.path().display());
        let got = expand_inputs(&[missing.clone(), pattern, nothing]).unwrap();
        assert_eq!(
            got,
            vec![PathBuf::from(missing), dir.path().join("a.png"), dir.path().join("b.png")]
        );
        assert!(expand_inputs(&["[".into()]).is_err());
    }
}
