//! `infoscribe`: extract, repaint, measure and label image descriptions.
//!
//! Exit codes: 0 success, 2 bad input (image, description, config or
//! usage), 3 output not writable, 4 unknown level, 5 bad lexicon.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use infoscribe_core::description::{density_profile, DescriptionError, ImageDescription};
use infoscribe_core::semantics::{annotate, load_lexicon, serialize_annotation};
use infoscribe_core::{describe, deserialize, load_image, reconstruct, save_image, serialize};

use config::Overrides;

const EXIT_INPUT: u8 = 2;
const EXIT_OUTPUT: u8 = 3;
const EXIT_LEVEL: u8 = 4;
const EXIT_LEXICON: u8 = 5;

#[derive(Parser)]
#[command(
    name = "infoscribe",
    version,
    about = "Coarse-to-fine image descriptions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Describe one or more PGM/PPM images.
    Extract(ExtractArgs),
    /// Repaint one level of a description as a PGM image.
    Reconstruct {
        description: PathBuf,
        #[arg(long, default_value_t = 0)]
        level: usize,
        /// Output image; standard output when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print bytes per pixel for every level.
    Density {
        description: PathBuf,
        #[arg(long)]
        csv: bool,
    },
    /// Fire lexicon words on regions and compose a narrative.
    Label {
        description: PathBuf,
        lexicon: PathBuf,
        /// Annotation file; defaults to `<stem>.ann.json` beside the description.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(required = true)]
    images: Vec<PathBuf>,
    /// Description file; only valid with a single image. Defaults to `<stem>.pid.json`.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    tau_seg: Option<u32>,
    #[arg(long)]
    tau_refine: Option<u32>,
    #[arg(long)]
    min_seed: Option<usize>,
    #[arg(long)]
    max_refine_passes: Option<usize>,
    #[arg(long)]
    top_max_pixels: Option<usize>,
    /// JSON file with any of the flags above (underscored names).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Images processed concurrently.
    #[arg(long)]
    jobs: Option<usize>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

type Outcome<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Extract(args) => cmd_extract(args),
        Command::Reconstruct {
            description,
            level,
            output,
        } => cmd_reconstruct(&description, level, output.as_deref()),
        Command::Density { description, csv } => cmd_density(&description, csv),
        Command::Label {
            description,
            lexicon,
            output,
        } => cmd_label(&description, &lexicon, output.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("infoscribe: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome<()> {
    std::fs::write(path, bytes)
        .map_err(|e| Failure::new(EXIT_OUTPUT, format!("cannot write {}: {e}", path.display())))
}

fn write_stdout(bytes: &[u8]) -> Outcome<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)
        .and_then(|()| out.flush())
        .map_err(|e| Failure::new(EXIT_OUTPUT, format!("cannot write to standard output: {e}")))
}

/// `dir/name.ext` -> `dir/name.<suffix>`, where `name` drops a trailing `.pid`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let stem = stem.strip_suffix(".pid").unwrap_or(&stem);
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn read_description(path: &Path) -> Outcome<ImageDescription> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("cannot read {}: {e}", path.display())))?;
    deserialize(&text).map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn cmd_extract(args: ExtractArgs) -> Outcome<()> {
    let flags = Overrides {
        tau_seg: args.tau_seg,
        tau_refine: args.tau_refine,
        min_seed: args.min_seed,
        max_refine_passes: args.max_refine_passes,
        top_max_pixels: args.top_max_pixels,
        jobs: args.jobs,
    };
    let resolved =
        config::resolve(flags, args.config.as_deref()).map_err(|m| Failure::new(EXIT_INPUT, m))?;
    if args.output.is_some() && args.images.len() > 1 {
        return Err(Failure::new(EXIT_INPUT, "--output needs exactly one image"));
    }
    let targets: Vec<(PathBuf, PathBuf)> = args
        .images
        .iter()
        .map(|img| {
            let out = args
                .output
                .clone()
                .unwrap_or_else(|| sibling(img, "pid.json"));
            (img.clone(), out)
        })
        .collect();

    let run = |(img, out): &(PathBuf, PathBuf)| extract_one(img, out, &resolved.params);
    let results: Vec<Outcome<String>> = if resolved.jobs > 1 && targets.len() > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(resolved.jobs)
            .build()
            .map_err(|e| Failure::new(EXIT_INPUT, format!("cannot start workers: {e}")))?;
        pool.install(|| targets.par_iter().map(run).collect())
    } else {
        targets.iter().map(run).collect()
    };

    // Report in input order whatever the scheduling was; the first failure sets the exit code.
    let mut first_failure = None;
    for result in results {
        match result {
            Ok(summary) => write_stdout(summary.as_bytes())?,
            Err(f) => {
                eprintln!("infoscribe: {}", f.message);
                first_failure.get_or_insert(f.code);
            }
        }
    }
    match first_failure {
        None => Ok(()),
        Some(code) if targets.len() == 1 => Err(Failure::new(code, "extraction failed")),
        Some(code) => Err(Failure::new(code, "one or more images failed")),
    }
}

fn extract_one(img: &Path, out: &Path, params: &infoscribe_core::SegParams) -> Outcome<String> {
    let bytes = std::fs::read(img)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("cannot read {}: {e}", img.display())))?;
    let raster = load_image(&bytes)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", img.display())))?;
    let d = describe(&raster, params)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", img.display())))?
        .with_density();
    write_file(out, serialize(&d).as_bytes())?;

    let mut s = format!(
        "{} -> {}\nlevel\twidth\theight\tregions\n",
        img.display(),
        out.display()
    );
    for lvl in d.levels() {
        s += &format!(
            "{}\t{}\t{}\t{}\n",
            lvl.level,
            lvl.width,
            lvl.height,
            lvl.regions.len()
        );
    }
    Ok(s)
}

fn cmd_reconstruct(path: &Path, level: usize, output: Option<&Path>) -> Outcome<()> {
    let d = read_description(path)?;
    let raster = reconstruct(&d, level).map_err(|e| match e {
        DescriptionError::UnknownLevel(_) => Failure::new(
            EXIT_LEVEL,
            format!(
                "{e}; {} has levels 0..={}",
                path.display(),
                d.levels().len() - 1
            ),
        ),
        other => Failure::new(EXIT_INPUT, format!("{}: {other}", path.display())),
    })?;
    let bytes = save_image(&raster);
    match output {
        Some(out) => write_file(out, &bytes),
        None => write_stdout(&bytes),
    }
}

fn cmd_density(path: &Path, csv: bool) -> Outcome<()> {
    let d = read_description(path)?;
    let sep = if csv { "," } else { "\t" };
    let mut s = ["level", "width", "height", "bytes", "density"].join(sep) + "\n";
    for p in density_profile(&d) {
        let row = [
            p.level.to_string(),
            p.width.to_string(),
            p.height.to_string(),
            p.bytes.to_string(),
            format!("{:.6}", p.density),
        ];
        s += &(row.join(sep) + "\n");
    }
    write_stdout(s.as_bytes())
}

fn cmd_label(path: &Path, lexicon: &Path, output: Option<&Path>) -> Outcome<()> {
    let d = read_description(path)?;
    let text = std::fs::read_to_string(lexicon).map_err(|e| {
        Failure::new(
            EXIT_LEXICON,
            format!("cannot read {}: {e}", lexicon.display()),
        )
    })?;
    let lex = load_lexicon(&text)
        .map_err(|e| Failure::new(EXIT_LEXICON, format!("{}: {e}", lexicon.display())))?;
    let annotation = annotate(&d, &lex);
    let out = output.map_or_else(|| sibling(path, "ann.json"), Path::to_path_buf);
    write_file(&out, serialize_annotation(&annotation).as_bytes())?;
    write_stdout(format!("{}\n", annotation.narrative).as_bytes())
}
