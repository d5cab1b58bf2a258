use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use tabinhib::cooccurrence::{estimate_corpus, CooccurrenceMatrix};
use tabinhib::corpus::{load_corpus, save_corpus};
use tabinhib::experiment::{evaluate_checkpoint, run, run_ablation, write_ablation, EvalWeights, RunManifest};
use tabinhib::heatmap::render;
use tabinhib::inhibition::{weights_from_cooccurrence, InhibitionMatrix, DEFAULT_BOOST};
use tabinhib::model::Checkpoint;
use tabinhib::persist::{self, MatrixFile};
use tabinhib::synth::{generate_corpus, SynthParams};
use tabinhib::tab::{FrameTablature, DEFAULT_FRAME_RATE};
use tabinhib::{Error, Result};

/// String/fret co-occurrence estimation, inhibition training and evaluation
/// for guitar tablature transcription.
#[derive(Parser)]
#[command(name = "tabinhib", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus directory.
    Synth(SynthArgs),
    /// Estimate pairwise likelihoods and inhibition weights from a corpus.
    Estimate(EstimateArgs),
    /// Train the variant described by a manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a corpus.
    Evaluate(EvaluateArgs),
    /// Train and evaluate every manifest in a directory.
    Ablation(AblationArgs),
    /// Render a persisted matrix as a PPM heatmap.
    ExportHeatmap(HeatmapArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    tracks: usize,
    #[arg(long, default_value_t = 256)]
    frames: usize,
    #[arg(long)]
    confusability: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_FRAME_RATE)]
    frame_rate: f64,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Repeatable. Defaults to 1 and 128.
    #[arg(long)]
    boost: Vec<u32>,
    #[arg(long, default_value_t = DEFAULT_FRAME_RATE)]
    frame_rate: f64,
    /// Write `.bin` files instead of text.
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Overrides the manifest output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides both the data and the model seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Standard (`b = 1`) inhibition matrix.
    #[arg(long)]
    weights_std: PathBuf,
    /// Boosted inhibition matrix.
    #[arg(long)]
    weights_boost: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FRAME_RATE)]
    frame_rate: f64,
}

#[derive(Args)]
struct AblationArgs {
    /// Directory of `*.toml` manifests, run in file-name order.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HeatmapArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 6)]
    strings: usize,
    #[arg(long, default_value_t = 4)]
    scale: usize,
    /// Render inhibition weights directly instead of `1 - w`.
    #[arg(long)]
    raw: bool,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{}: no such file or directory", path.display())))
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Validation(format!("{}: cannot create directory: {e}", dir.display())))
}

fn heatmap_values(file: &MatrixFile, raw: bool) -> Array2<f64> {
    match file {
        MatrixFile::Cooccurrence(m) => m.values.clone(),
        MatrixFile::Inhibition(w) if raw => w.weights().clone(),
        MatrixFile::Inhibition(w) => w.likelihood_view(),
    }
}

fn write_heatmap(path: &Path, file: &MatrixFile, strings: usize, scale: usize, raw: bool) -> Result<()> {
    let dim = file.dim();
    if strings == 0 || dim % strings != 0 {
        return Err(Error::Dimension(format!(
            "a {dim}x{dim} matrix does not split into {strings} string blocks"
        )));
    }
    if scale == 0 {
        return Err(Error::Validation("scale must be >= 1".into()));
    }
    render(&heatmap_values(file, raw), dim / strings, scale).write(path)
}

fn synth(a: SynthArgs) -> Result<()> {
    let defaults = SynthParams::default();
    let params = SynthParams {
        seed: a.seed,
        num_tracks: a.tracks,
        frames_per_track: a.frames,
        unison_confusability: a.confusability.unwrap_or(defaults.unison_confusability),
        pitch_noise: a.noise.unwrap_or(defaults.pitch_noise),
        ..defaults
    };
    let tracks = generate_corpus(&params)?;
    save_corpus(&a.out, &tracks, a.frame_rate)?;
    println!("wrote {} tracks to {}", tracks.len(), a.out.display());
    Ok(())
}

fn estimate(a: EstimateArgs) -> Result<()> {
    require(&a.corpus)?;
    let tracks = load_corpus(&a.corpus, a.frame_rate)?;
    let tabs: Vec<FrameTablature> = tracks.into_iter().map(|t| t.tablature).collect();
    let strings = tabs[0].config().num_strings();
    let likelihoods: CooccurrenceMatrix = estimate_corpus(&tabs)?;
    let boosts = if a.boost.is_empty() { vec![1, DEFAULT_BOOST] } else { a.boost };
    let mut outputs = vec![("cooccurrence".to_string(), MatrixFile::Cooccurrence(likelihoods.clone()))];
    for b in boosts {
        let w: InhibitionMatrix = weights_from_cooccurrence(&likelihoods, b)?;
        outputs.push((format!("inhibition_b{b}"), MatrixFile::Inhibition(w)));
    }
    create_dir(&a.out)?;
    let ext = if a.binary { "bin" } else { "txt" };
    for (name, file) in &outputs {
        let path = a.out.join(format!("{name}.{ext}"));
        persist::save(&path, file)?;
        write_heatmap(&a.out.join(format!("{name}.ppm")), file, strings, 4, false)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    require(&a.manifest)?;
    let mut m = RunManifest::load(&a.manifest)?;
    if let Some(seed) = a.seed {
        m.seeds.data = seed;
        m.seeds.model = seed;
    }
    if let Some(lambda) = a.lambda {
        m.lambda = lambda;
    }
    if let Some(out) = a.out {
        m.output = Some(out);
    }
    let outcome = run(&m)?;
    let dir = m.output.expect("resolved on load");
    outcome.write(&dir)?;
    let mean = &outcome.report.mean;
    println!(
        "{}: best iteration {} (validation f_tab {:.4}); test f_tab {:.4}, e_dp {:.2}, l_inh_plus {:.4}",
        m.experiment, outcome.checkpoint.iteration, outcome.checkpoint.val_f_tab, mean.f_tab, mean.e_dp, mean.l_inh_plus
    );
    println!("{}", dir.display());
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    for p in [&a.checkpoint, &a.corpus, &a.weights_std, &a.weights_boost] {
        require(p)?;
    }
    let checkpoint = Checkpoint::load(&a.checkpoint)?;
    let tracks = load_corpus(&a.corpus, a.frame_rate)?;
    let weights = EvalWeights {
        standard: persist::load(&a.weights_std)?.into_inhibition()?,
        boosted: persist::load(&a.weights_boost)?.into_inhibition()?,
    };
    let dim = checkpoint.config.num_combos();
    for w in [&weights.standard, &weights.boosted] {
        if w.dim() != dim {
            return Err(Error::Dimension(format!(
                "weight matrix is {}x{}, checkpoint has {dim} combinations",
                w.dim(),
                w.dim()
            )));
        }
    }
    let report = evaluate_checkpoint(&checkpoint, &tracks, &weights)?;
    report.save(&a.out)?;
    println!("f_tab {:.4} over {} tracks -> {}", report.mean.f_tab, report.rows.len(), a.out.display());
    Ok(())
}

/// Returns the worst exit code among the variants.
fn ablation(a: AblationArgs) -> Result<u8> {
    require(&a.manifest)?;
    let entries = std::fs::read_dir(&a.manifest)
        .map_err(|e| Error::Validation(format!("{}: {e}", a.manifest.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    if paths.len() < 2 {
        return Err(Error::Validation(format!(
            "{}: an ablation needs at least two manifests, found {}",
            a.manifest.display(),
            paths.len()
        )));
    }
    let mut manifests = Vec::with_capacity(paths.len());
    for p in &paths {
        let mut m = RunManifest::load(p)?;
        if manifests.iter().any(|o: &RunManifest| o.experiment == m.experiment) {
            return Err(Error::Validation(format!("duplicate experiment id `{}`", m.experiment)));
        }
        m.output = Some(a.out.join(&m.experiment));
        manifests.push(m);
    }
    create_dir(&a.out)?;
    let rows = run_ablation(&manifests);
    let table = a.out.join("ablation.csv");
    let file = std::fs::File::create(&table).map_err(|e| Error::Validation(format!("{}: {e}", table.display())))?;
    write_ablation(file, &rows)?;
    let mut code = 0;
    for r in &rows {
        if let Err(e) = &r.outcome {
            eprintln!("{}: {e}", r.experiment);
            code = code.max(exit_code(e));
        }
    }
    println!("{}", table.display());
    Ok(code)
}

fn export_heatmap(a: HeatmapArgs) -> Result<()> {
    require(&a.matrix)?;
    let file = persist::load(&a.matrix)?;
    write_heatmap(&a.out, &file, a.strings, a.scale, a.raw)?;
    println!("{}", a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a).map(|_| 0),
        Command::Estimate(a) => estimate(a).map(|_| 0),
        Command::Train(a) => train(a).map(|_| 0),
        Command::Evaluate(a) => evaluate(a).map(|_| 0),
        Command::Ablation(a) => ablation(a),
        Command::ExportHeatmap(a) => export_heatmap(a).map(|_| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
