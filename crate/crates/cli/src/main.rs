//! `densecorr` — umbrella CLI.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error (bad or missing input),
//! 4 internal error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use densecorr::io::Units;

#[derive(Debug, Parser)]
#[command(name = "densecorr", version, about = "Dense image-to-surface correspondence toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Surface mesh (Wavefront OBJ, triangles only).
    #[arg(long, global = true)]
    pub mesh: Option<PathBuf>,
    /// Per-vertex part labels, one integer per line.
    #[arg(long, global = true)]
    pub labels: Option<PathBuf>,
    /// UV atlas JSON as written by `unwrap`.
    #[arg(long, global = true)]
    pub atlas: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Length unit of the mesh: m, cm or mm. Metric thresholds are given in
    /// meters and converted.
    #[arg(long, global = true, default_value = "m")]
    pub units: Units,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a UV atlas: supplied charts where given, MDS charts elsewhere.
    Unwrap {
        /// Charts to use verbatim (same JSON layout as the atlas).
        #[arg(long)]
        charts: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the six views of a part as PNG + G-buffer + camera metadata.
    RenderViews {
        #[arg(long)]
        part: u8,
        #[arg(long, default_value_t = 512)]
        res: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick annotation targets inside a part mask.
    SamplePoints {
        /// Binary mask image (non-zero = inside).
        #[arg(long, conflicts_with = "rle")]
        mask: Option<PathBuf>,
        /// COCO RLE JSON file.
        #[arg(long)]
        rle: Option<PathBuf>,
        #[arg(long)]
        part: u8,
        /// Number of points; derived from the mask area when omitted.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the annotation HTTP service.
    Serve {
        /// Pre-rendered view bundles (from `render-views`).
        #[arg(long)]
        views: Option<PathBuf>,
        /// Session journal directory.
        #[arg(long, env = "DENSECORR_STORE", default_value = "densecorr-store")]
        store: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 512)]
        res: u32,
    },
    /// Decode DCSM score maps into an IUV PNG.
    Decode {
        #[arg(long)]
        maps: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// AP/AR over GPS thresholds and RCP AUCs of predictions against ground truth.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// GPS bandwidth in meters.
        #[arg(long, default_value_t = densecorr::metrics::DEFAULT_KAPPA)]
        kappa: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-part annotator error from repeated annotations of known points.
    AnnotatorAccuracy {
        /// Reference points with their true vertices.
        #[arg(long)]
        reference: PathBuf,
        /// Annotator points for the same images and pixels.
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repaint foreground IUV pixels from a 24-tile texture atlas.
    Texture {
        #[arg(long)]
        iuv: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// 6x4 tile grid PNG or a directory of part_NN.png tiles.
        #[arg(long)]
        texture: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "densecorr=info,warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
