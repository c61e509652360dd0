//! Batch configuration: a flat `key = value` file layered under command-line flags.

use std::path::PathBuf;

use leafmetric_core::segmentation::HueRangeError;
use leafmetric_core::{
    dpi_from_reference, BackgroundPolarity, Calibration, CalibrationError, CropRect, HueRange,
    PipelineParams, ReferenceMeasurement, Selection,
};
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_MIN_AREA: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("invalid {key} `{value}`: {reason}")]
    Invalid { key: &'static str, value: String, reason: String },
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
    #[error("no calibration: give either a dpi or a two-point reference")]
    MissingCalibration,
    #[error("both a dpi and a two-point reference were given; use exactly one")]
    ConflictingCalibration,
    #[error("reading config file {path}: {message}")]
    Io { path: String, message: String },
}

fn invalid(key: &'static str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid { key, value: value.to_string(), reason: reason.to_string() }
}

fn numbers<T: std::str::FromStr>(key: &'static str, value: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(|part| part.trim().parse().map_err(|_| invalid(key, value, format!("`{}` is not a number", part.trim()))))
        .collect()
}

/// `x,y,w,h`
pub fn parse_crop(value: &str) -> Result<CropRect, ConfigError> {
    match numbers::<usize>("crop", value)?[..] {
        [x, y, w, h] if w > 0 && h > 0 => Ok(CropRect::new(x, y, w, h)),
        [_, _, _, _] => Err(invalid("crop", value, "width and height must be at least 1")),
        _ => Err(invalid("crop", value, "expected x,y,w,h")),
    }
}

/// `x1,y1,x2,y2,mm`
pub fn parse_reference(value: &str) -> Result<ReferenceMeasurement, ConfigError> {
    match numbers::<f64>("ref", value)?[..] {
        [x1, y1, x2, y2, mm] => Ok(ReferenceMeasurement::new((x1, y1), (x2, y2), mm)),
        _ => Err(invalid("ref", value, "expected x1,y1,x2,y2,mm")),
    }
}

/// `lo,hi` or `lo,hi,min-s,min-v`
pub fn parse_hue(value: &str) -> Result<HueRange, ConfigError> {
    let range = match numbers::<f64>("hue", value)?[..] {
        [lo, hi] => HueRange::with_default_gates(lo, hi),
        [lo, hi, s, v] => HueRange::new(lo, hi, s, v),
        _ => return Err(invalid("hue", value, "expected lo,hi or lo,hi,min-s,min-v")),
    };
    range.map_err(|e: HueRangeError| invalid("hue", value, e))
}

pub fn parse_threshold(value: &str) -> Result<u8, ConfigError> {
    value.trim().parse().map_err(|_| invalid("threshold", value, "expected an integer in 0..=255"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OutputFormats {
    pub json: bool,
    pub csv: bool,
}

impl Default for OutputFormats {
    fn default() -> Self {
        OutputFormats { json: true, csv: false }
    }
}

pub fn parse_formats(value: &str) -> Result<OutputFormats, ConfigError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "json" => Ok(OutputFormats { json: true, csv: false }),
        "csv" => Ok(OutputFormats { json: false, csv: true }),
        "both" => Ok(OutputFormats { json: true, csv: true }),
        _ => Err(invalid("format", value, "expected json, csv or both")),
    }
}

fn parse_bool(key: &'static str, value: &str) -> Result<bool, ConfigError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(invalid(key, value, "expected true or false")),
    }
}

/// Unvalidated settings from one source (file or flags). Values stay as
/// text until the layers are merged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub inputs: Vec<String>,
    pub crop: Option<String>,
    pub bg: Option<String>,
    pub threshold: Option<String>,
    pub min_area: Option<String>,
    pub dpi: Option<String>,
    pub reference: Option<String>,
    pub hue: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<String>,
    pub overlay: Option<String>,
}

impl RawConfig {
    /// Parses a config file. Blank lines and `#` comments are ignored;
    /// `input` may repeat.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: n + 1 })?;
            let (key, value) = (key.trim(), value.trim().to_string());
            match key.replace('-', "_").as_str() {
                "input" => raw.inputs.push(value),
                "crop" => raw.crop = Some(value),
                "bg" | "background" => raw.bg = Some(value),
                "threshold" => raw.threshold = Some(value),
                "min_area" => raw.min_area = Some(value),
                "dpi" => raw.dpi = Some(value),
                "ref" | "reference" => raw.reference = Some(value),
                "hue" => raw.hue = Some(value),
                "out" => raw.out = Some(PathBuf::from(value)),
                "format" => raw.format = Some(value),
                "overlay" => raw.overlay = Some(value),
                _ => return Err(ConfigError::UnknownKey { line: n + 1, key: key.to_string() }),
            }
        }
        Ok(raw)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        RawConfig::parse(&text)
    }

    /// `flags` on top of `self`. Inputs and calibration are replaced as a
    /// whole when the flags give any.
    pub fn overridden_by(self, flags: RawConfig) -> RawConfig {
        let flags_calibrate = flags.dpi.is_some() || flags.reference.is_some();
        RawConfig {
            inputs: if flags.inputs.is_empty() { self.inputs } else { flags.inputs },
            crop: flags.crop.or(self.crop),
            bg: flags.bg.or(self.bg),
            threshold: flags.threshold.or(self.threshold),
            min_area: flags.min_area.or(self.min_area),
            dpi: if flags_calibrate { flags.dpi } else { self.dpi },
            reference: if flags_calibrate { flags.reference } else { self.reference },
            hue: flags.hue.or(self.hue),
            out: flags.out.or(self.out),
            format: flags.format.or(self.format),
            overlay: flags.overlay.or(self.overlay),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CalibrationSpec {
    Dpi(f64),
    Reference(ReferenceMeasurement),
}

/// A validated batch run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Paths or glob patterns, in the order given.
    pub inputs: Vec<String>,
    pub crop: Option<CropRect>,
    pub polarity: BackgroundPolarity,
    /// Unused when `hue` is set.
    pub threshold: Option<u8>,
    pub min_area: usize,
    pub calibration: CalibrationSpec,
    pub hue: Option<HueRange>,
    pub out_dir: PathBuf,
    pub formats: OutputFormats,
    pub overlay: bool,
}

impl PipelineConfig {
    pub fn params(&self) -> PipelineParams {
        let selection = match self.hue {
            Some(range) => Selection::Hue(range),
            None => Selection::Threshold {
                threshold: self.threshold.expect("validated: threshold or hue present"),
                polarity: self.polarity,
            },
        };
        PipelineParams { crop: self.crop, selection, min_area: self.min_area }
    }

    pub fn calibration(&self) -> Result<Calibration, CalibrationError> {
        match self.calibration {
            CalibrationSpec::Dpi(dpi) => Calibration::declared(dpi),
            CalibrationSpec::Reference(r) => dpi_from_reference(&r),
        }
    }

    /// Report-friendly copy of the settings.
    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            crop: self.crop.map(|r| [r.x, r.y, r.w, r.h]),
            background: self.polarity.as_str(),
            threshold: self.threshold,
            min_area: self.min_area,
            hue: self.hue.map(|h| [h.lo(), h.hi(), h.min_saturation(), h.min_value()]),
            dpi: self.calibration().ok().map(|c| c.dpi()),
            calibration_source: match self.calibration {
                CalibrationSpec::Dpi(_) => "declared",
                CalibrationSpec::Reference(_) => "two_point",
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub crop: Option<[usize; 4]>,
    pub background: &'static str,
    pub threshold: Option<u8>,
    pub min_area: usize,
    pub hue: Option<[f64; 4]>,
    pub dpi: Option<f64>,
    pub calibration_source: &'static str,
}

impl TryFrom<RawConfig> for PipelineConfig {
    type Error = ConfigError;

    fn try_from(raw: RawConfig) -> Result<Self, ConfigError> {
        let calibration = match (&raw.dpi, &raw.reference) {
            (Some(_), Some(_)) => return Err(ConfigError::ConflictingCalibration),
            (None, None) => return Err(ConfigError::MissingCalibration),
            (Some(d), None) => {
                let dpi: f64 = d.trim().parse().map_err(|_| invalid("dpi", d, "not a number"))?;
                Calibration::declared(dpi).map_err(|e| invalid("dpi", d, e))?;
                CalibrationSpec::Dpi(dpi)
            }
            (None, Some(r)) => {
                let reference = parse_reference(r)?;
                dpi_from_reference(&reference).map_err(|e| invalid("ref", r, e))?;
                CalibrationSpec::Reference(reference)
            }
        };
        let hue = raw.hue.as_deref().map(parse_hue).transpose()?;
        let threshold = raw.threshold.as_deref().map(parse_threshold).transpose()?;
        if threshold.is_none() && hue.is_none() {
            return Err(ConfigError::Missing("threshold"));
        }
        let polarity = match raw.bg.as_deref() {
            Some(v) => v.trim().parse().map_err(|e| invalid("bg", v, e))?,
            None => BackgroundPolarity::White,
        };
        let min_area = match raw.min_area.as_deref() {
            Some(v) => v.trim().parse().map_err(|_| invalid("min-area", v, "expected a non-negative integer"))?,
            None => DEFAULT_MIN_AREA,
        };
        Ok(PipelineConfig {
            inputs: raw.inputs,
            crop: raw.crop.as_deref().map(parse_crop).transpose()?,
            polarity,
            threshold,
            min_area,
            calibration,
            hue,
            out_dir: raw.out.ok_or(ConfigError::Missing("out"))?,
            formats: raw.format.as_deref().map(parse_formats).transpose()?.unwrap_or_default(),
            overlay: raw.overlay.as_deref().map(|v| parse_bool("overlay", v)).transpose()?.unwrap_or(false),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RawConfig {
        RawConfig {
            threshold: Some("128".into()),
            dpi: Some("300".into()),
            out: Some("out".into()),
            ..Default::default()
        }
    }

    #[test]
    fn parses_value_lists() {
        assert_eq!(parse_crop("1, 2,30,40").unwrap(), CropRect::new(1, 2, 30, 40));
        assert!(parse_crop("1,2,0,4").is_err());
        assert!(parse_crop("1,2,3").is_err());
        let r = parse_reference("0,0,300,400,25.4").unwrap();
        assert_eq!((r.p1, r.p2, r.real_length_mm), ((0.0, 0.0), (300.0, 400.0), 25.4));
        let h = parse_hue("350,10").unwrap();
        assert_eq!((h.lo(), h.hi(), h.min_saturation()), (350.0, 10.0, 0.15));
        assert_eq!(parse_hue("90,150,0,0.3").unwrap().min_value(), 0.3);
        assert!(parse_hue("400,10").is_err());
        assert!(parse_threshold("256").is_err());
        assert_eq!(parse_formats("Both").unwrap(), OutputFormats { json: true, csv: true });
    }

    #[test]
    fn config_file_syntax() {
        let raw = RawConfig::parse(
            "# scan batch\ninput = scans/*.png\ninput=extra.pgm\n\nbg = black\nmin-area = 10\ndpi=600\nout = results\n",
        )
        .unwrap();
        assert_eq!(raw.inputs, vec!["scans/*.png", "extra.pgm"]);
        assert_eq!(raw.bg.as_deref(), Some("black"));
        assert_eq!(raw.min_area.as_deref(), Some("10"));
        assert_eq!(RawConfig::parse("dpi 300"), Err(ConfigError::Syntax { line: 1 }));
        assert!(matches!(RawConfig::parse("\ncolour = red"), Err(ConfigError::UnknownKey { line: 2, .. })));
    }

    #[test]
    fn flags_win_over_file() {
        let file = RawConfig::parse("input = a.png\nthreshold = 100\ndpi = 300\nout = o\n").unwrap();
        let flags = RawConfig {
            threshold: Some("140".into()),
            reference: Some("0,0,600,0,25.4".into()),
            ..Default::default()
        };
        let cfg = PipelineConfig::try_from(file.overridden_by(flags)).unwrap();
        assert_eq!(cfg.threshold, Some(140));
        assert_eq!(cfg.inputs, vec!["a.png"]);
        assert!(matches!(cfg.calibration, CalibrationSpec::Reference(_)));
        assert!((cfg.calibration().unwrap().dpi() - 600.0).abs() < 1e-9);
    }

    #[test]
    fn defaults() {
        let cfg = PipelineConfig::try_from(base()).unwrap();
        assert_eq!(cfg.polarity, BackgroundPolarity::White);
        assert_eq!(cfg.min_area, DEFAULT_MIN_AREA);
        assert_eq!(cfg.formats, OutputFormats { json: true, csv: false });
        assert!(!cfg.overlay);
        assert!(cfg.inputs.is_empty());
        assert_eq!(
            cfg.params().selection,
            Selection::Threshold { threshold: 128, polarity: BackgroundPolarity::White }
        );
    }

    #[test]
    fn calibration_must_be_unique() {
        let both = RawConfig { reference: Some("0,0,1,0,1".into()), ..base() };
        assert_eq!(PipelineConfig::try_from(both), Err(ConfigError::ConflictingCalibration));
        let none = RawConfig { dpi: None, ..base() };
        assert_eq!(PipelineConfig::try_from(none), Err(ConfigError::MissingCalibration));
        let degenerate = RawConfig { dpi: None, reference: Some("5,5,5,5,10".into()), ..base() };
        assert!(matches!(PipelineConfig::try_from(degenerate), Err(ConfigError::Invalid { key: "ref", .. })));
        let zero = RawConfig { dpi: Some("0".into()), ..base() };
        assert!(matches!(PipelineConfig::try_from(zero), Err(ConfigError::Invalid { key: "dpi", .. })));
    }

    #[test]
    fn threshold_or_hue_required() {
        let neither = RawConfig { threshold: None, ..base() };
        assert_eq!(PipelineConfig::try_from(neither), Err(ConfigError::Missing("threshold")));
        let hue = RawConfig { threshold: None, hue: Some("90,150".into()), ..base() };
        let cfg = PipelineConfig::try_from(hue).unwrap();
        assert!(matches!(cfg.params().selection, Selection::Hue(_)));
        let no_out = RawConfig { out: None, ..base() };
        assert_eq!(PipelineConfig::try_from(no_out), Err(ConfigError::Missing("out")));
    }
}
