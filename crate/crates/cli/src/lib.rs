//! The `meshvae` command line.
//!
//! Every subcommand writes its outputs under `--out` (default `.`). A flat
//! `key=value` file given with `--config` supplies defaults for the
//! subcommand's flags; flags on the command line win. Log verbosity follows
//! `MESHVAE_LOG` (`error`, `warn`, `info`, `debug`, `trace`).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use meshvae::corpus::{
    ingest, synthesize_corpus, IngestOptions, Labels, ShapeCorpus, SynthKind, TubeSpec,
};
use meshvae::obj::{load_obj, save_obj};
use meshvae::ops::ShapeModel;
use meshvae::rimd::{read_feature_file, write_feature_file, FrameCodec, ReconstructionMethod};
use meshvae::vae::{train, Checkpoint, TrainConfig};
use meshvae::{Error, Mesh, Result};

pub const LOG_ENV: &str = "MESHVAE_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "meshvae",
    version,
    about = "Train and use variational autoencoders over mesh collections"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Flat key=value file with flag defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a directory of OBJ files into a corpus cache.
    Ingest(IngestArgs),
    /// Encode one deformed mesh against a reference into a feature file.
    Encode(EncodeArgs),
    /// Reconstruct a mesh from a feature file.
    Decode(DecodeArgs),
    /// Train a model on a corpus cache.
    Train(TrainArgs),
    /// Sample meshes from a trained model.
    Generate(GenerateArgs),
    /// Interpolate between two meshes through the latent space.
    Interpolate(InterpolateArgs),
    /// Write low-dimensional coordinates of every corpus model.
    Embed(EmbedArgs),
    /// Decode a grid over two latent dimensions.
    Explore(ExploreArgs),
    /// Generate a synthetic tube corpus.
    SynthCorpus(SynthArgs),
    /// Per-vertex reconstruction error table on held-out models.
    Eval(EvalArgs),
    /// Serve the exploration HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory of OBJ files (optional labels.txt, labels2.txt).
    pub dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub base: usize,
    #[arg(long, default_value_t = 0.9)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cache file name inside the output directory.
    #[arg(long, default_value = "corpus.mvc")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub mesh: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub feature: PathBuf,
    /// gradient-matching or edge-energy.
    #[arg(long, default_value = "gradient-matching")]
    pub method: ReconstructionMethod,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 1e6)]
    pub alpha: f64,
    #[arg(long, default_value_t = 128)]
    pub latent_dim: usize,
    /// Comma-separated prior deviations; shorter lists are padded with 1.
    #[arg(long, value_delimiter = ',')]
    pub sigma_object: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub sigma_max: f64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Comma-separated encoder hidden widths.
    #[arg(long, value_delimiter = ',', default_value = "1024,512")]
    pub hidden: Vec<usize>,
    /// Label files (one token per line, sorted-OBJ order) to condition on.
    #[arg(long, value_delimiter = ',')]
    pub condition_files: Vec<PathBuf>,
    /// Condition on the labels stored in the corpus cache.
    #[arg(long)]
    pub conditional: bool,
    #[arg(long, default_value = "model.ckpt")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// One label per condition family, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub condition: Vec<String>,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    #[arg(long, value_delimiter = ',')]
    pub condition: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub dims: usize,
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Two latent dimensions, zero-based.
    #[arg(long, value_delimiter = ',', num_args = 1, default_value = "0,1")]
    pub dims: Vec<usize>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_negative_numbers = true,
        default_value = "-2,2"
    )]
    pub range: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub resolution: usize,
    /// Values of the other latent dimensions; zeros when omitted.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub base_code: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub condition: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// cylinder-bend, cylinder-twist, bend-twist or two-class.
    #[arg(long, default_value = "cylinder-bend")]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 80)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub rings: usize,
    #[arg(long, default_value_t = 20)]
    pub segments: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// One or more checkpoints, comma-separated; one table column each.
    #[arg(long, value_delimiter = ',', required = true)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Evaluate every model instead of the held-out split.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn"))
        .format_timestamp(None)
        .try_init();
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match with_config_defaults(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            print!("{report}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Inserts `--key value` pairs from the `--config` file directly after the
/// subcommand name, so explicit flags that follow take precedence.
fn with_config_defaults(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(pos) = argv.iter().position(|a| a == "--config") else {
        return Ok(argv);
    };
    let path = PathBuf::from(
        argv.get(pos + 1)
            .ok_or_else(|| Error::InvalidArgument("--config needs a file".into()))?,
    );
    let text = fs::read_to_string(&path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    let mut extra = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.clone(),
            line: n + 1,
            message: "expected key=value".into(),
        })?;
        let flag = format!("--{}", k.trim().replace('_', "-"));
        match v.trim() {
            "true" => extra.push(OsString::from(flag)),
            "false" => {}
            v => {
                extra.push(OsString::from(flag));
                extra.push(OsString::from(v));
            }
        }
    }
    let sub = argv
        .iter()
        .enumerate()
        .skip(1)
        .find(|(i, a)| {
            let s = a.to_string_lossy();
            !s.starts_with('-') && *i != pos + 1 && (*i < 2 || argv[i - 1] != "--out")
        })
        .map(|(i, _)| i);
    let mut out = argv.clone();
    match sub {
        Some(i) => {
            out.splice(i + 1..i + 1, extra);
        }
        None => out.extend(extra),
    }
    Ok(out)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn labels(list: &[String]) -> Option<&[String]> {
    (!list.is_empty()).then_some(list)
}

fn load_model(path: &Path) -> Result<ShapeModel> {
    ShapeModel::new(Checkpoint::load(path)?)
}

fn write_meshes(dir: &Path, prefix: &str, meshes: &[Mesh]) -> Result<Vec<PathBuf>> {
    meshes
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let path = dir.join(format!("{prefix}_{k:03}.obj"));
            save_obj(m, &path)?;
            Ok(path)
        })
        .collect()
}

fn read_label_file(path: &Path, expected: usize) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let tokens: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if tokens.len() != expected {
        return Err(Error::Condition(format!(
            "{} has {} labels for {expected} models",
            path.display(),
            tokens.len()
        )));
    }
    Ok(tokens)
}

/// Runs one parsed command and returns the text to print on success.
pub fn execute(cli: &Cli) -> Result<String> {
    let out = &cli.out;
    let mut report = String::new();
    match &cli.command {
        Command::SynthCorpus(a) => {
            ensure_dir(out)?;
            let spec = TubeSpec {
                rings: a.rings,
                segments: a.segments,
                ..Default::default()
            };
            let shapes = synthesize_corpus(out, a.kind, a.count, a.seed, &spec)?;
            writeln!(
                report,
                "wrote {} {} meshes to {}",
                shapes.len(),
                a.kind.name(),
                out.display()
            )
            .unwrap();
        }
        Command::Ingest(a) => {
            ensure_dir(out)?;
            let corpus = ingest(
                &a.dir,
                IngestOptions {
                    base: a.base,
                    train_fraction: a.train_fraction,
                    seed: a.seed,
                },
            )?;
            let path = out.join(&a.name);
            corpus.save(&path)?;
            writeln!(
                report,
                "ingested {} models (K = {}, {} train, {} held out) into {}",
                corpus.len(),
                corpus.feature_len(),
                corpus.train.len(),
                corpus.held_out.len(),
                path.display()
            )
            .unwrap();
        }
        Command::Encode(a) => {
            ensure_dir(out)?;
            let reference = load_obj(&a.reference)?;
            let mesh = load_obj(&a.mesh)?;
            if mesh.connectivity_key() != reference.connectivity_key() {
                return Err(Error::ConnectivityMismatch(format!(
                    "{} does not share the connectivity of {}",
                    a.mesh.display(),
                    a.reference.display()
                )));
            }
            let feature = FrameCodec::new(&reference)?.encode(&mesh)?;
            let stem = a.mesh.file_stem().unwrap_or_default().to_string_lossy();
            let path = out.join(format!("{stem}.rimd"));
            write_feature_file(&path, &feature, &reference.connectivity_key())?;
            writeln!(
                report,
                "wrote {} values to {}",
                feature.len(),
                path.display()
            )
            .unwrap();
        }
        Command::Decode(a) => {
            ensure_dir(out)?;
            let reference = load_obj(&a.reference)?;
            let (feature, key) = read_feature_file(&a.feature)?;
            if key != reference.connectivity_key() {
                return Err(Error::ConnectivityMismatch(format!(
                    "{} was encoded for a different connectivity than {}",
                    a.feature.display(),
                    a.reference.display()
                )));
            }
            let mesh = FrameCodec::new(&reference)?
                .with_method(a.method)
                .reconstruct(&feature)?;
            let stem = a.feature.file_stem().unwrap_or_default().to_string_lossy();
            let path = out.join(format!("{stem}.obj"));
            save_obj(&mesh, &path)?;
            writeln!(report, "wrote {}", path.display()).unwrap();
        }
        Command::Train(a) => {
            ensure_dir(out)?;
            let mut corpus = ShapeCorpus::load(&a.corpus)?;
            let mut conditional = a.conditional;
            if !a.condition_files.is_empty() {
                let families = a
                    .condition_files
                    .iter()
                    .map(|p| read_label_file(p, corpus.len()))
                    .collect::<Result<Vec<_>>>()?;
                corpus.labels = Labels::from_tokens(&families)?;
                conditional = true;
            }
            let mut sigma_object = a.sigma_object.clone();
            if sigma_object.len() > a.latent_dim {
                return Err(Error::InvalidArgument(format!(
                    "--sigma-object has {} entries for latent dimension {}",
                    sigma_object.len(),
                    a.latent_dim
                )));
            }
            sigma_object.resize(a.latent_dim, 1.0);
            let config = TrainConfig {
                alpha: a.alpha,
                learning_rate: a.learning_rate,
                batch_size: a.batch,
                epochs: a.epochs,
                seed: a.seed,
                latent_dim: a.latent_dim,
                hidden: a.hidden.clone(),
                sigma_max: a.sigma_max,
                sigma_object: Some(sigma_object),
            };
            let mut log_text = String::from("epoch\ttotal\treconstruction\tkl\n");
            let (checkpoint, _) = train(&corpus, &config, conditional, |s| {
                writeln!(
                    log_text,
                    "{}\t{:e}\t{:e}\t{:e}",
                    s.epoch, s.loss.total, s.loss.reconstruction, s.loss.kl
                )
                .unwrap();
                if s.epoch % 100 == 0 {
                    log::info!("epoch {} loss {:.6e}", s.epoch, s.loss.total);
                }
            })?;
            let path = out.join(&a.name);
            checkpoint.save(&path)?;
            let log_path = out.join("loss.tsv");
            fs::write(&log_path, log_text).map_err(|e| Error::Io {
                path: log_path.clone(),
                source: e,
            })?;
            writeln!(
                report,
                "trained {} epochs, checkpoint {}",
                a.epochs,
                path.display()
            )
            .unwrap();
        }
        Command::Generate(a) => {
            ensure_dir(out)?;
            let model = load_model(&a.checkpoint)?;
            let decoded = model.generate(a.count, a.seed, labels(&a.condition))?;
            let paths = write_meshes(out, "generated", &decoded.meshes)?;
            writeln!(report, "wrote {} meshes to {}", paths.len(), out.display()).unwrap();
        }
        Command::Interpolate(a) => {
            ensure_dir(out)?;
            let model = load_model(&a.checkpoint)?;
            let decoded = model.interpolate(
                &load_obj(&a.a)?,
                &load_obj(&a.b)?,
                a.steps,
                labels(&a.condition),
            )?;
            let paths = write_meshes(out, "frame", &decoded.meshes)?;
            writeln!(report, "wrote {} frames to {}", paths.len(), out.display()).unwrap();
        }
        Command::Embed(a) => {
            ensure_dir(out)?;
            let model = load_model(&a.checkpoint)?;
            let corpus = ShapeCorpus::load(&a.corpus)?;
            let coords = model.embed(&corpus, a.dims)?;
            let mut table = String::from("index\tname\tlabel");
            for k in 0..a.dims {
                write!(table, "\tz{k}").unwrap();
            }
            table.push('\n');
            for (m, z) in coords.iter().enumerate() {
                let label = if corpus.labels.is_empty() {
                    "-".to_string()
                } else {
                    (0..corpus.labels.vocabularies.len())
                        .map(|f| corpus.labels.label(m, f))
                        .collect::<Vec<_>>()
                        .join(",")
                };
                write!(table, "{m}\t{}\t{label}", corpus.names[m]).unwrap();
                for v in z {
                    write!(table, "\t{v}").unwrap();
                }
                table.push('\n');
            }
            let path = out.join("embedding.tsv");
            fs::write(&path, &table).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            writeln!(report, "wrote {} rows to {}", coords.len(), path.display()).unwrap();
        }
        Command::Explore(a) => {
            ensure_dir(out)?;
            let model = load_model(&a.checkpoint)?;
            if a.dims.len() != 2 || a.range.len() != 2 {
                return Err(Error::InvalidArgument(
                    "--dims and --range take exactly two values".into(),
                ));
            }
            let base = if a.base_code.is_empty() {
                vec![0.0; model.latent_dim()]
            } else {
                a.base_code.clone()
            };
            let grid = model.explore_grid(
                (a.dims[0], a.dims[1]),
                &base,
                (a.range[0], a.range[1]),
                a.resolution,
                labels(&a.condition),
            )?;
            let mut index = String::from("file\tcode\n");
            for (k, (mesh, code)) in grid
                .decoded
                .meshes
                .iter()
                .zip(&grid.decoded.codes)
                .enumerate()
            {
                let name = format!("grid_{}_{}.obj", k / grid.resolution, k % grid.resolution);
                save_obj(mesh, out.join(&name))?;
                let code: Vec<String> = code.iter().map(f64::to_string).collect();
                writeln!(index, "{name}\t{}", code.join(",")).unwrap();
            }
            let path = out.join("grid.tsv");
            fs::write(&path, index).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            writeln!(
                report,
                "wrote {} grid meshes to {}",
                grid.decoded.meshes.len(),
                out.display()
            )
            .unwrap();
        }
        Command::Eval(a) => {
            let corpus = ShapeCorpus::load(&a.corpus)?;
            let models: Vec<usize> = if a.all || corpus.held_out.is_empty() {
                (0..corpus.len()).collect()
            } else {
                corpus.held_out.clone()
            };
            let diag = corpus.base_mesh().bbox_diagonal();
            let mut columns = Vec::new();
            let mut headers = Vec::new();
            for path in &a.checkpoint {
                let model = load_model(path)?;
                headers.push(format!("d={}", model.latent_dim()));
                columns.push(model.reconstruction_errors(&corpus, &models)?);
            }
            report = eval_table(&corpus, &models, &headers, &columns, diag);
            if out != Path::new(".") {
                ensure_dir(out)?;
                let path = out.join("eval.tsv");
                fs::write(&path, &report).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
            }
        }
        Command::Serve(a) => {
            let checkpoint = Checkpoint::load(&a.checkpoint)?;
            let corpus = a.corpus.as_deref().map(ShapeCorpus::load).transpose()?;
            let state = meshvae_explorer::Explorer::new(checkpoint, corpus)?;
            let addr = SocketAddr::new(a.host, a.port);
            eprintln!("serving on http://{addr}");
            meshvae_explorer::serve_blocking(state, addr).map_err(|e| Error::Io {
                path: PathBuf::from(addr.to_string()),
                source: e,
            })?;
        }
    }
    Ok(report)
}

/// Tab-separated per-vertex error table, one column per model.
pub fn eval_table(
    corpus: &ShapeCorpus,
    models: &[usize],
    headers: &[String],
    columns: &[Vec<f64>],
    diag: f64,
) -> String {
    let mut t = String::from("model");
    for h in headers {
        write!(t, "\t{h}").unwrap();
    }
    t.push('\n');
    for (row, &m) in models.iter().enumerate() {
        t.push_str(&corpus.names[m]);
        for col in columns {
            write!(t, "\t{:.6}", col[row]).unwrap();
        }
        t.push('\n');
    }
    t.push_str("mean");
    for col in columns {
        write!(t, "\t{:.6}", col.iter().sum::<f64>() / col.len() as f64).unwrap();
    }
    t.push_str("\nmean/bbox");
    for col in columns {
        write!(
            t,
            "\t{:.4}%",
            100.0 * col.iter().sum::<f64>() / col.len() as f64 / diag
        )
        .unwrap();
    }
    t.push('\n');
    t
}
