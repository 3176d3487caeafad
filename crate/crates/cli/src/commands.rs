//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use ideophone::lexicon::save_index;
use ideophone::matcher::DEFAULT_K;
use ideophone::perception::DEFAULT_DETECTOR_TIMEOUT;
use ideophone::{
    annotate_photo, build_index, load_detections, load_index, mean_vector, parse_lexicon,
    recommend, run_external_detector, tokenize, top_k, DetectionSet, EmbeddingTable, ErrorClass,
    IdeophoneIndex, MatchError, OutputFormat, RasterImage, StyleConfig, Typeface,
};

use crate::result::ResultDocument;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_UNMATCHABLE: u8 = 3;
pub const EXIT_LAYOUT: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ideophone::Error),
    #[error("{0}")]
    Usage(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.class() {
                ErrorClass::Input => EXIT_INPUT,
                ErrorClass::Unmatchable => EXIT_UNMATCHABLE,
                ErrorClass::Layout => EXIT_LAYOUT,
            },
            CliError::Usage(_) | CliError::Io { .. } => EXIT_INPUT,
        }
    }
}

fn core<E: Into<ideophone::Error>>(e: E) -> CliError {
    CliError::Core(e.into())
}

#[derive(Debug, Parser)]
#[command(
    name = "ideophone",
    version,
    about = "Recommend and draw ideophones on photos"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Vectorize a lexicon and write the definition index.
    BuildIndex(BuildIndexArgs),
    /// Recommend an ideophone for a detection file.
    Match(MatchArgs),
    /// Recommend and draw an ideophone onto a photo (or a directory of photos).
    Annotate(AnnotateArgs),
    /// List the entries whose definitions are closest to a text query.
    Nearest(NearestArgs),
}

#[derive(Debug, Args)]
pub struct BuildIndexArgs {
    #[arg(long, value_name = "PATH")]
    pub embedding: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub lexicon: PathBuf,
    /// Where to write the index.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Also average the English glosses into each definition vector.
    #[arg(long)]
    pub gloss_mix: bool,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    #[arg(long, value_name = "PATH")]
    pub embedding: PathBuf,
    #[arg(
        long,
        value_name = "PATH",
        conflicts_with = "index",
        required_unless_present = "index"
    )]
    pub lexicon: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub index: Option<PathBuf>,
    /// With --lexicon: also average the English glosses into definitions.
    #[arg(long)]
    pub gloss_mix: bool,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = DEFAULT_K, value_parser = parse_k)]
    pub k: usize,
    /// Jitter seed; 0 always picks the closest term. Random when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    pub detections: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_name = "PATH")]
    pub font: PathBuf,
    /// Detection file, or a directory of `<photo stem>.json` files in batch mode.
    #[arg(
        long,
        value_name = "PATH",
        conflicts_with = "detector",
        required_unless_present = "detector"
    )]
    pub detections: Option<PathBuf>,
    /// External detector command; `{image}` is replaced by the photo path.
    #[arg(long, value_name = "CMD")]
    pub detector: Option<String>,
    #[arg(long, value_name = "SECS", default_value_t = DEFAULT_DETECTOR_TIMEOUT.as_secs_f64())]
    pub detector_timeout: f64,
    #[arg(long, default_value_t = DEFAULT_K, value_parser = parse_k)]
    pub k: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    pub opacity: f64,
    /// Fill color as RRGGBB or RRGGBBAA.
    #[arg(long, value_parser = parse_color, default_value = "ffffff")]
    pub fill: [u8; 4],
    #[arg(long, value_parser = parse_color, default_value = "000000")]
    pub outline_color: [u8; 4],
    /// Outline width in pixels; defaults to max(2, 6% of glyph height).
    #[arg(long)]
    pub outline_width: Option<u32>,
    /// Output file (or directory in batch mode).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Write JPEG at this quality instead of PNG.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u8).range(1..=100))]
    pub jpeg_quality: Option<u8>,
    /// Also write the largest-region mask as a 1-bit PNG.
    #[arg(long)]
    pub debug_mask: bool,
    /// Photo file or directory of photos.
    pub image: PathBuf,
}

#[derive(Debug, Args)]
pub struct NearestArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = DEFAULT_K, value_parser = parse_k)]
    pub k: usize,
    pub query: String,
}

fn parse_k(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k),
        _ => Err(format!("k must be a positive integer, got {s:?}")),
    }
}

fn parse_color(s: &str) -> Result<[u8; 4], String> {
    let hex = s.trim_start_matches('#');
    if !(hex.len() == 6 || hex.len() == 8) || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(format!("expected RRGGBB or RRGGBBAA, got {s:?}"));
    }
    let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).unwrap();
    Ok([
        byte(0),
        byte(2),
        byte(4),
        if hex.len() == 8 { byte(6) } else { 255 },
    ])
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::BuildIndex(args) => cmd_build_index(&args),
        Command::Match(args) => cmd_match(&args),
        Command::Annotate(args) => cmd_annotate(&args),
        Command::Nearest(args) => cmd_nearest(&args),
    }
}

pub fn cmd_build_index(args: &BuildIndexArgs) -> Result<(), CliError> {
    let table = EmbeddingTable::load(&args.embedding).map_err(core)?;
    let entries = parse_lexicon(&args.lexicon).map_err(core)?;
    let index = build_index(&entries, &table, args.gloss_mix).map_err(core)?;
    save_index(&index, &args.out).map_err(core)?;
    for ex in index.excluded() {
        log::info!("excluded {}: {}", ex.id, ex.reason);
    }
    println!(
        "indexed {}, excluded {}, dim {}",
        index.len(),
        index.excluded().len(),
        index.dimension()
    );
    Ok(())
}

fn load_sources(source: &SourceArgs) -> Result<(EmbeddingTable, IdeophoneIndex), CliError> {
    let table = EmbeddingTable::load(&source.embedding).map_err(core)?;
    let index = match (&source.lexicon, &source.index) {
        (Some(lexicon), None) => {
            let entries = parse_lexicon(lexicon).map_err(core)?;
            build_index(&entries, &table, source.gloss_mix).map_err(core)?
        }
        (None, Some(path)) => {
            let index = load_index(path).map_err(core)?;
            index.check_embedding(&table).map_err(core)?;
            index
        }
        _ => {
            return Err(CliError::Usage(
                "exactly one of --lexicon or --index is required".into(),
            ))
        }
    };
    Ok((table, index))
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

pub fn cmd_match(args: &MatchArgs) -> Result<(), CliError> {
    let (table, index) = load_sources(&args.source)?;
    let ds = load_detections(&args.detections).map_err(core)?;
    let seed = resolve_seed(args.seed);
    let rec = recommend(&index, &ds, &table, args.k, seed).map_err(core)?;
    let doc = ResultDocument::new(ds.photo_id(), &rec, &index, None);
    eprintln!(
        "{}: {} ({}) distance {:.4} via {}",
        doc.photo_id,
        doc.selected.forms.join("/"),
        doc.selected.romaji,
        doc.selected.distance,
        doc.selected.classifier
    );
    println!("{}", doc.to_json());
    Ok(())
}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

fn is_image(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

struct PhotoJob {
    image: PathBuf,
    detections: Option<PathBuf>,
    out: PathBuf,
    seed: u64,
}

fn output_extension(args: &AnnotateArgs) -> &'static str {
    if args.jpeg_quality.is_some() {
        "jpg"
    } else {
        "png"
    }
}

fn plan_jobs(args: &AnnotateArgs, base_seed: u64) -> Result<Vec<PhotoJob>, CliError> {
    let ext = output_extension(args);
    if !args.image.is_dir() {
        if let Some(out) = &args.out {
            let named = out
                .extension()
                .and_then(|e| e.to_str())
                .map(|e| e.to_ascii_lowercase());
            let wants_jpeg = matches!(named.as_deref(), Some("jpg" | "jpeg"));
            if wants_jpeg != args.jpeg_quality.is_some() {
                return Err(CliError::Usage(format!(
                    "--out {} does not match the output format ({}); JPEG needs --jpeg-quality N and a .jpg name",
                    out.display(),
                    ext.to_ascii_uppercase()
                )));
            }
        }
        let out = args.out.clone().unwrap_or_else(|| {
            args.image
                .with_file_name(format!("{}.ideophone.{ext}", stem(&args.image)))
        });
        return Ok(vec![PhotoJob {
            image: args.image.clone(),
            detections: args.detections.clone(),
            out,
            seed: base_seed,
        }]);
    }

    let listing = fs::read_dir(&args.image).map_err(|source| CliError::Io {
        path: args.image.clone(),
        source,
    })?;
    let mut images: Vec<PathBuf> = listing
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_image(p) && !stem(p).ends_with(".ideophone"))
        .collect();
    images.sort();
    if let Some(out) = &args.out {
        fs::create_dir_all(out).map_err(|source| CliError::Io {
            path: out.clone(),
            source,
        })?;
    }
    if let Some(dir) = &args.detections {
        if !dir.is_dir() {
            return Err(CliError::Usage(format!(
                "batch mode needs --detections to be a directory, got {}",
                dir.display()
            )));
        }
    }
    Ok(images
        .into_iter()
        .enumerate()
        .map(|(i, image)| {
            let name = format!("{}.ideophone.{ext}", stem(&image));
            let out = match &args.out {
                Some(dir) => dir.join(name),
                None => image.with_file_name(name),
            };
            PhotoJob {
                detections: args
                    .detections
                    .as_ref()
                    .map(|d| d.join(format!("{}.json", stem(&image)))),
                image,
                out,
                seed: base_seed.wrapping_add(i as u64),
            }
        })
        .collect())
}

pub fn cmd_annotate(args: &AnnotateArgs) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&args.opacity) {
        return Err(CliError::Usage(format!(
            "--opacity {} is outside [0, 1]",
            args.opacity
        )));
    }
    if !(args.detector_timeout.is_finite() && args.detector_timeout > 0.0) {
        return Err(CliError::Usage(
            "--detector-timeout must be positive".into(),
        ));
    }
    let (table, index) = load_sources(&args.source)?;
    let face = Typeface::load(&args.font).map_err(core)?;
    let style = StyleConfig {
        fill_color: args.fill,
        outline_color: args.outline_color,
        outline_width: args.outline_width,
        opacity: args.opacity,
        ..StyleConfig::new(&args.font)
    };
    let jobs = plan_jobs(args, resolve_seed(args.seed))?;
    if jobs.is_empty() {
        return Err(CliError::Usage(format!(
            "no PNG or JPEG photos in {}",
            args.image.display()
        )));
    }

    let mut first_error = None;
    for job in &jobs {
        match annotate_one(args, job, &table, &index, &face, &style) {
            Ok(doc) => println!("{}", doc.to_json()),
            Err(e) => {
                eprintln!("{}: {e}", job.image.display());
                first_error.get_or_insert(e);
            }
        }
    }
    first_error.map_or(Ok(()), Err)
}

fn annotate_one(
    args: &AnnotateArgs,
    job: &PhotoJob,
    table: &EmbeddingTable,
    index: &IdeophoneIndex,
    face: &Typeface,
    style: &StyleConfig,
) -> Result<ResultDocument, CliError> {
    let source_bytes = fs::read(&job.image).map_err(|source| CliError::Io {
        path: job.image.clone(),
        source,
    })?;
    let img = RasterImage::decode(&source_bytes).map_err(core)?;
    let ds: DetectionSet = match (&job.detections, &args.detector) {
        (Some(path), _) => load_detections(path).map_err(core)?,
        (None, Some(cmd)) => run_external_detector(
            cmd,
            &job.image,
            Duration::from_secs_f64(args.detector_timeout),
        )
        .map_err(core)?,
        (None, None) => unreachable!("clap requires --detections or --detector"),
    };
    let rec = recommend(index, &ds, table, args.k, job.seed).map_err(core)?;
    let entry = &index
        .get(&rec.selected.entry_id)
        .expect("recommendation comes from the index")
        .entry;
    let annotation =
        annotate_photo(&img, entry.display_form(), face, style, job.seed).map_err(core)?;

    if style.opacity == 0.0 {
        log::warn!(
            "{}: opacity is 0, writing the photo unchanged",
            job.image.display()
        );
        fs::write(&job.out, &source_bytes).map_err(|source| CliError::Io {
            path: job.out.clone(),
            source,
        })?;
    } else {
        let format = match args.jpeg_quality {
            Some(quality) => OutputFormat::Jpeg { quality },
            None => OutputFormat::Png,
        };
        annotation.image.save(&job.out, format).map_err(core)?;
    }
    if args.debug_mask {
        let mask_path = job
            .out
            .with_file_name(format!("{}.mask.png", stem(&job.out)));
        annotation.mask.write_png(&mask_path).map_err(core)?;
    }

    let doc = ResultDocument::new(ds.photo_id(), &rec, index, Some(&annotation.placement));
    eprintln!(
        "{}: {} in {} at {:.1}° -> {}",
        job.image.display(),
        entry.display_form(),
        annotation.placement.quadrant,
        annotation.placement.angle,
        job.out.display()
    );
    Ok(doc)
}

#[derive(Debug, Serialize)]
struct NearestRow<'a> {
    id: &'a str,
    forms: &'a [String],
    romaji: &'a str,
    distance: f64,
}

pub fn cmd_nearest(args: &NearestArgs) -> Result<(), CliError> {
    let (table, index) = load_sources(&args.source)?;
    let query = mean_vector(&tokenize(&args.query), &table);
    if query.is_degenerate() {
        return Err(core(MatchError::DegenerateQuery));
    }
    let hits = top_k(&index, &query, args.k).map_err(core)?;
    let rows: Vec<NearestRow> = hits
        .iter()
        .map(|n| {
            let e = &index
                .get(&n.entry_id)
                .expect("hit comes from the index")
                .entry;
            NearestRow {
                id: &e.id,
                forms: &e.forms,
                romaji: &e.romaji,
                distance: n.distance,
            }
        })
        .collect();
    for (rank, row) in rows.iter().enumerate() {
        eprintln!(
            "{:>3}. {:.4}  {}  {}",
            rank + 1,
            row.distance,
            row.forms.join("/"),
            row.romaji
        );
    }
    println!("{}", serde_json::to_string(&rows).expect("rows serialize"));
    Ok(())
}
