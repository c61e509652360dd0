//! Command-line front end: `measure`, `calibrate` and `serve`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use leafmetric_core::dpi_from_reference;

use crate::batch::run_pipeline;
use crate::codec::decode_image;
use crate::config::{parse_reference, PipelineConfig, RawConfig};
use crate::service::{serve, ServeOptions};

pub const EXIT_OK: u8 = 0;
pub const EXIT_IMAGE_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "leafmetric", version, about = "Leaf area, length and width from scanned images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measure a batch of images and write a report.
    Measure(MeasureArgs),
    /// Compute scan resolution from two points a known distance apart.
    Calibrate(CalibrateArgs),
    /// Run the local HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    /// Image path or glob pattern; repeatable.
    #[arg(long = "input", short = 'i', value_name = "PATH|GLOB")]
    pub inputs: Vec<String>,
    /// Key-value config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "X,Y,W,H")]
    pub crop: Option<String>,
    /// Background colour: white or black.
    #[arg(long)]
    pub bg: Option<String>,
    /// Gray level 0-255 separating leaf from background.
    #[arg(long)]
    pub threshold: Option<String>,
    /// Objects smaller than this many pixels are discarded [default: 50].
    #[arg(long)]
    pub min_area: Option<String>,
    /// Declared scan resolution.
    #[arg(long)]
    pub dpi: Option<String>,
    /// Two-point reference: pixel coordinates and real distance in mm.
    #[arg(long = "ref", value_name = "X1,Y1,X2,Y2,MM")]
    pub reference: Option<String>,
    /// Select leaf pixels by hue instead of gray level.
    #[arg(long, value_name = "LO,HI[,MIN_S,MIN_V]")]
    pub hue: Option<String>,
    /// Output directory for reports and overlays.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// json, csv or both [default: json].
    #[arg(long)]
    pub format: Option<String>,
    /// Also write `<stem>.overlay.png` per image.
    #[arg(long)]
    pub overlay: bool,
}

impl MeasureArgs {
    fn raw(&self) -> RawConfig {
        RawConfig {
            inputs: self.inputs.clone(),
            crop: self.crop.clone(),
            bg: self.bg.clone(),
            threshold: self.threshold.clone(),
            min_area: self.min_area.clone(),
            dpi: self.dpi.clone(),
            reference: self.reference.clone(),
            hue: self.hue.clone(),
            out: self.out.clone(),
            format: self.format.clone(),
            overlay: self.overlay.then(|| "true".to_string()),
        }
    }

    pub fn config(&self) -> anyhow::Result<PipelineConfig> {
        let base = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        Ok(PipelineConfig::try_from(base.overridden_by(self.raw()))?)
    }
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Image the points were picked on; they must lie inside it.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long = "ref", value_name = "X1,Y1,X2,Y2,MM")]
    pub reference: String,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Directory of static files served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Sessions untouched for this long are dropped.
    #[arg(long, default_value_t = 30)]
    pub idle_timeout_mins: u64,
}

fn run_measure(args: &MeasureArgs) -> u8 {
    let cfg = match args.config() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_CONFIG;
        }
    };
    let report = match run_pipeline(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    for img in &report.images {
        match (&img.metrics, &img.error) {
            (Some(m), _) => println!(
                "{}\tarea {:.2} mm2\tlength {:.2} mm\twidth {:.2} mm",
                img.path, m.area_mm2, m.length_mm, m.width_mm
            ),
            (None, Some(e)) => println!("{}\t{}: {}", img.path, e.code, e.message),
            (None, None) => unreachable!("records carry metrics or an error"),
        }
        for w in &img.warnings {
            eprintln!("warning: {}: {w}", img.path);
        }
    }
    let failed = report.images.iter().filter(|i| !i.is_ok()).count();
    eprintln!(
        "{} image(s), {} failed; report in {}",
        report.images.len(),
        failed,
        cfg.out_dir.display()
    );
    if failed == 0 { EXIT_OK } else { EXIT_IMAGE_FAILED }
}

fn run_calibrate(args: &CalibrateArgs) -> anyhow::Result<f64> {
    let reference = parse_reference(&args.reference)?;
    let bytes = std::fs::read(&args.input)
        .map_err(|e| anyhow::anyhow!("reading {}: {e}", args.input.display()))?;
    let img = decode_image(&bytes)?;
    let (w, h) = (img.width() as f64, img.height() as f64);
    for (x, y) in [reference.p1, reference.p2] {
        if !(0.0..=w).contains(&x) || !(0.0..=h).contains(&y) {
            anyhow::bail!("point ({x}, {y}) lies outside the {w}x{h} image");
        }
    }
    Ok(dpi_from_reference(&reference)?.dpi())
}

pub fn run(cli: Cli) -> ExitCode {
    let code = match cli.command {
        Command::Measure(args) => run_measure(&args),
        Command::Calibrate(args) => match run_calibrate(&args) {
            Ok(dpi) => {
                println!("{dpi}");
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                EXIT_CONFIG
            }
        },
        Command::Serve(args) => {
            let opts = ServeOptions {
                bind: args.bind,
                static_dir: args.static_dir,
                idle_timeout: Duration::from_secs(args.idle_timeout_mins * 60),
            };
            let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
            match rt.block_on(serve(opts)) {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    EXIT_CONFIG
                }
            }
        }
    };
    ExitCode::from(code)
}
