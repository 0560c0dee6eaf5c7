//! Command-line front end over TSSF files.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input or arguments.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::attention::{attention_map_with_epsilon, DEFAULT_TAU};
use crate::bench;
use crate::error::Error;
use crate::io::{read_bundle, read_raw, read_tssf, write_raw, write_tssf};
use crate::layers::{LayerFeatures, VggLayer, CONTENT_LAYERS, STYLE_LAYERS};
use crate::losses::{
    attention_content_loss, content_loss, identity_loss, patch_style_loss, style_loss, total_loss,
    IdentityInputs, LossComponents, LossWeights,
};
use crate::matching::Matcher;
use crate::tensor::{FeatureMap, DEFAULT_EPSILON};
use crate::transform::{tssat, TssatConfig, DEFAULT_PATCH_SIZE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "tssat",
    version,
    about = "Feature statistics style transfer engine"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply global alignment and local statistics swap to a content map.
    Transform(TransformArgs),
    /// Evaluate the loss terms over feature bundles and print them as JSON.
    Loss(LossArgs),
    /// Write the self-attention map of one feature map as a 2-d TSSF file.
    Attn(AttnArgs),
    /// Time the transform for several patch sizes.
    Bench(BenchArgs),
    /// Write a seeded standard-normal feature map.
    Synth(SynthArgs),
    /// Compare two TSSF files elementwise against an absolute tolerance.
    DiffTol(DiffTolArgs),
}

#[derive(Debug, Clone, Args)]
pub struct StrideArgs {
    /// Stride between content patches [default: patch size]
    #[arg(long)]
    pub content_stride: Option<usize>,
    /// Stride between candidate style patches
    #[arg(long, default_value_t = 1)]
    pub style_stride: usize,
    /// Variance stabilizer
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f32,
    /// Patch matcher: naive or gemm
    #[arg(long, default_value_t = Matcher::Gemm)]
    pub matcher: Matcher,
}

#[derive(Debug, Clone, Args)]
pub struct PatchArgs {
    /// Patch size k of the local swap
    #[arg(long, default_value_t = DEFAULT_PATCH_SIZE)]
    pub patch_size: usize,
    #[command(flatten)]
    pub strides: StrideArgs,
}

impl PatchArgs {
    pub fn config(&self) -> TssatConfig {
        let s = &self.strides;
        TssatConfig {
            patch_size: self.patch_size,
            content_stride: s.content_stride.unwrap_or(self.patch_size),
            style_stride: s.style_stride,
            epsilon: s.epsilon,
            matcher: s.matcher,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct WeightArgs {
    /// Content loss weight
    #[arg(long, default_value_t = 5.0)]
    pub lambda1: f64,
    /// Attention-based content loss weight
    #[arg(long, default_value_t = 50_000.0)]
    pub lambda2: f64,
    /// Style loss weight
    #[arg(long, default_value_t = 6.0)]
    pub lambda3: f64,
    /// Patch-based style loss weight
    #[arg(long, default_value_t = 0.5)]
    pub lambda4: f64,
    /// Identity loss weight
    #[arg(long, default_value_t = 1.0)]
    pub lambda5: f64,
    /// Identity loss pixel-term weight
    #[arg(long = "lambda-id1", default_value_t = 50.0)]
    pub lambda_id1: f64,
    /// Identity loss feature-term weight
    #[arg(long = "lambda-id2", default_value_t = 1.0)]
    pub lambda_id2: f64,
    /// Attention softmax temperature
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
}

impl WeightArgs {
    pub fn weights(&self) -> LossWeights {
        LossWeights {
            content: self.lambda1,
            attention: self.lambda2,
            style: self.lambda3,
            patch_style: self.lambda4,
            identity: self.lambda5,
            identity_pixel: self.lambda_id1,
            identity_feature: self.lambda_id2,
            tau: self.tau,
        }
    }
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[arg(long)]
    pub content: PathBuf,
    #[arg(long)]
    pub style: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the patch assignment as "i<TAB>j<TAB>score" lines
    #[arg(long)]
    pub assignment: Option<PathBuf>,
    #[command(flatten)]
    pub patch: PatchArgs,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Content image feature bundle manifest
    #[arg(long)]
    pub content: PathBuf,
    /// Style image feature bundle manifest
    #[arg(long)]
    pub style: PathBuf,
    /// Stylized image feature bundle manifest
    #[arg(long)]
    pub stylized: PathBuf,
    /// Content image (TSSF), for the identity loss
    #[arg(long, requires_all = ["content_identity", "style_image", "style_identity", "content_identity_features", "style_identity_features"])]
    pub content_image: Option<PathBuf>,
    /// Reconstruction from two copies of the content image (TSSF)
    #[arg(long)]
    pub content_identity: Option<PathBuf>,
    /// Style image (TSSF)
    #[arg(long)]
    pub style_image: Option<PathBuf>,
    /// Reconstruction from two copies of the style image (TSSF)
    #[arg(long)]
    pub style_identity: Option<PathBuf>,
    /// Feature bundle of the content reconstruction
    #[arg(long)]
    pub content_identity_features: Option<PathBuf>,
    /// Feature bundle of the style reconstruction
    #[arg(long)]
    pub style_identity_features: Option<PathBuf>,
    #[command(flatten)]
    pub patch: PatchArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
}

#[derive(Debug, Args)]
pub struct AttnArgs {
    /// Input feature map (TSSF)
    #[arg(long, visible_alias = "input")]
    pub content: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f32,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub content: PathBuf,
    #[arg(long)]
    pub style: PathBuf,
    /// Patch sizes to time
    #[arg(long, value_delimiter = ',', default_value = "3,5,7")]
    pub k_list: Vec<usize>,
    /// Timed runs per patch size
    #[arg(long, default_value_t = 9)]
    pub repeat: usize,
    #[command(flatten)]
    pub strides: StrideArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Shape as C,H,W
    #[arg(long, value_delimiter = ',', required = true)]
    pub shape: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiffTolArgs {
    pub left: PathBuf,
    pub right: PathBuf,
    /// Largest allowed absolute elementwise difference
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl CliError {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_io() { EXIT_IO } else { EXIT_INVALID };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

fn with_input<'a>(role: &str, path: &'a Path) -> impl FnOnce(Error) -> CliError + 'a {
    let role = role.to_string();
    move |e| {
        let mut err = CliError::from(e);
        err.message = format!("{role} ({}): {}", path.display(), err.message);
        err
    }
}

fn load_map(role: &str, path: &Path) -> Result<FeatureMap, CliError> {
    read_tssf(path).map_err(with_input(role, path))
}

fn load_bundle(role: &str, path: &Path) -> Result<LayerFeatures, CliError> {
    read_bundle(path).map_err(with_input(role, path))
}

fn transform(args: &TransformArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = args.patch.config();
    cfg.validate()?;
    let content = load_map("content", &args.content)?;
    let style = load_map("style", &args.style)?;
    let (result, assignment) = tssat(&content, &style, &cfg)?;
    write_tssf(&result, &args.out).map_err(with_input("out", &args.out))?;
    if let Some(path) = &args.assignment {
        let mut text = String::new();
        for (i, (&j, &s)) in assignment
            .assignment
            .iter()
            .zip(&assignment.score)
            .enumerate()
        {
            text.push_str(&format!("{i}\t{j}\t{s}\n"));
        }
        std::fs::write(path, text)?;
    }
    writeln!(
        out,
        "wrote {} ({} content patches matched against {} style patches)",
        args.out.display(),
        assignment.content_count(),
        assignment.style_count
    )?;
    Ok(())
}

fn loss(args: &LossArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = args.patch.config();
    cfg.validate()?;
    let weights = args.weights.weights();
    weights.validate()?;
    let content = load_bundle("content", &args.content)?;
    let style = load_bundle("style", &args.style)?;
    let stylized = load_bundle("stylized", &args.stylized)?;

    let identity = match &args.content_image {
        None => 0.0,
        Some(content_image) => {
            // clap enforces that the other five are present
            let req = |p: &Option<PathBuf>| p.clone().expect("required by clap");
            let content_image = load_map("content-image", content_image)?;
            let content_recon = load_map("content-identity", &req(&args.content_identity))?;
            let style_image = load_map("style-image", &req(&args.style_image))?;
            let style_recon = load_map("style-identity", &req(&args.style_identity))?;
            let content_recon_features = load_bundle(
                "content-identity-features",
                &req(&args.content_identity_features),
            )?;
            let style_recon_features = load_bundle(
                "style-identity-features",
                &req(&args.style_identity_features),
            )?;
            let inputs = IdentityInputs {
                content_image: &content_image,
                content_recon: &content_recon,
                style_image: &style_image,
                style_recon: &style_recon,
                content_features: &content,
                content_recon_features: &content_recon_features,
                style_features: &style,
                style_recon_features: &style_recon_features,
            };
            identity_loss(&inputs, &weights, &STYLE_LAYERS)?
        }
    };

    let components = LossComponents {
        content: content_loss(&content, &stylized, &CONTENT_LAYERS)?,
        attention: attention_content_loss(&content, &stylized, weights.tau, &CONTENT_LAYERS)?,
        style: style_loss(&style, &stylized, &STYLE_LAYERS)?,
        patch_style: patch_style_loss(
            stylized.require(VggLayer::Relu4_1)?,
            style.require(VggLayer::Relu4_1)?,
            &cfg,
        )?,
        identity,
    };
    let report = total_loss(&components, &weights)?;
    let json = serde_json::to_string(&report).map_err(|e| CliError::invalid(e.to_string()))?;
    writeln!(out, "{json}")?;
    Ok(())
}

fn attn(args: &AttnArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let f = load_map("input", &args.content)?;
    let map = attention_map_with_epsilon(&f, args.tau, args.epsilon)?;
    let n = map.size() as u64;
    write_raw(&args.out, &[n, n], map.data()).map_err(with_input("out", &args.out))?;
    writeln!(out, "wrote {n}x{n} attention map to {}", args.out.display())?;
    Ok(())
}

fn run_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(&k) = args.k_list.iter().find(|&&k| k == 0) {
        return Err(CliError::invalid(format!(
            "invalid patch size {k} in --k-list"
        )));
    }
    let base = PatchArgs {
        patch_size: args.k_list.first().copied().unwrap_or(DEFAULT_PATCH_SIZE),
        strides: args.strides.clone(),
    }
    .config();
    let content = load_map("content", &args.content)?;
    let style = load_map("style", &args.style)?;
    let rows = bench::run(
        &content,
        &style,
        &base,
        args.strides.content_stride,
        &args.k_list,
        args.repeat,
    )?;
    write!(out, "{}", bench::format_table(&rows))?;
    if let Some(r) = rows.iter().find(|r| !r.deterministic) {
        return Err(CliError::invalid(format!(
            "output for k={} differed between repeats",
            r.patch_size
        )));
    }
    Ok(())
}

fn synth(args: &SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let [c, h, w] = <[usize; 3]>::try_from(args.shape.as_slice())
        .map_err(|_| CliError::invalid("--shape takes exactly three values C,H,W"))?;
    let f = FeatureMap::random_normal(c, h, w, args.seed)?;
    write_tssf(&f, &args.out).map_err(with_input("out", &args.out))?;
    writeln!(out, "wrote {c}x{h}x{w} map to {}", args.out.display())?;
    Ok(())
}

fn diff_tol(args: &DiffTolArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let a = read_raw(&args.left).map_err(with_input("left", &args.left))?;
    let b = read_raw(&args.right).map_err(with_input("right", &args.right))?;
    if a.dims != b.dims {
        return Err(CliError::invalid(format!(
            "dims differ: {:?} vs {:?}",
            a.dims, b.dims
        )));
    }
    let worst = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .fold(0.0, f64::max);
    writeln!(out, "max_abs_diff\t{worst:e}")?;
    if worst > args.tol {
        return Err(CliError::invalid(format!(
            "max abs difference {worst:e} exceeds tolerance {:e}",
            args.tol
        )));
    }
    Ok(())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Transform(a) => transform(a, out),
        Command::Loss(a) => loss(a, out),
        Command::Attn(a) => attn(a, out),
        Command::Bench(a) => run_bench(a, out),
        Command::Synth(a) => synth(a, out),
        Command::DiffTol(a) => diff_tol(a, out),
    }
}

/// Parses `args`, runs the command against stdout and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
