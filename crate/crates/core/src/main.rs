use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use stiln::data::{build_frames, synth_generate, DatasetManifest, SampleCache, SynthSpec};
use stiln::harness::{
    emit_report, evaluate, load_samples, run_ablation, run_loocv, run_sweep, train, EvalReport,
    ReportFormat, RunConfig, SweepGrid, SEED_ENV,
};
use stiln::model::{make_ablation, Stiln, Variant};
use stiln::signal::{preprocess, BANDS};
use stiln::topomap::TopoMapper;
use stiln::{Error, Result};

#[derive(Parser)]
#[command(
    name = "stiln",
    version,
    about = "EEG emotion recognition from band-power topographic maps"
)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridName {
    Hidden,
    Lr,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trial directory.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a trial directory into a cache of topographic frames.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model on every subject.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Directory for the checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Leave-one-subject-out evaluation.
    Loocv {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "report")]
        report: PathBuf,
    },
    /// LOOCV over the LSTM-width or learning-rate grid.
    Sweep {
        #[arg(long, value_enum)]
        grid: GridName,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "report")]
        report: PathBuf,
    },
    /// LOOCV for each structural variant.
    Ablate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "report")]
        report: PathBuf,
        /// Comma-separated subset, e.g. NET0,NET5.
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<String>>,
    },
    /// Print the layer table with output shapes and parameter counts.
    Describe {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Write the frames of one sample as images.
    ExportTopo {
        /// Trial directory or frame cache.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "topo")]
        out: PathBuf,
        /// Write PNG images (otherwise JSON arrays).
        #[arg(long)]
        png: bool,
        /// Index of the window to export, in cache order.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
}

fn run_config(path: Option<&Path>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_env()?;
    Ok(cfg)
}

fn print(value: serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn reports_out(reports: &[EvalReport], dir: &Path) -> Result<()> {
    let files = emit_report(reports, dir, &ReportFormat::ALL)?;
    let rows: Vec<_> = reports
        .iter()
        .map(|r| {
            json!({
                "tag": r.tag, "variant": r.variant, "task": r.task, "param_count": r.param_count,
                "mean_acc": r.summary.mean_acc, "std_acc": r.summary.std_acc,
                "mean_f1": r.summary.mean_f1, "std_f1": r.summary.std_f1,
            })
        })
        .collect();
    print(json!({ "reports": rows, "files": files }))
}

fn frame_sets(input: &Path) -> Result<Vec<stiln::data::FrameSet>> {
    if input.join(DatasetManifest::FILE).exists() {
        let (_, trials) = DatasetManifest::load(input)?;
        let clean = trials.iter().map(preprocess).collect::<Result<Vec<_>>>()?;
        build_frames(&clean, &TopoMapper::deap())
    } else {
        Ok(SampleCache::load(input)?.sets)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { spec, out } => {
            let mut spec: SynthSpec = serde_json::from_str(&std::fs::read_to_string(&spec)?)
                .map_err(|e| Error::Config(e.to_string()))?;
            if let Ok(v) = std::env::var(SEED_ENV) {
                spec.seed = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is invalid")))?;
            }
            let trials = synth_generate(&spec)?;
            let manifest = DatasetManifest::write(&out, &trials, Some(spec))?;
            print(
                json!({ "trials": manifest.trials.len(), "split_hash": manifest.split.hash(), "out": out }),
            )
        }
        Command::Preprocess { input, out } => {
            let (_, trials) = DatasetManifest::load(&input)?;
            let clean = trials.iter().map(preprocess).collect::<Result<Vec<_>>>()?;
            let cache = SampleCache {
                sets: build_frames(&clean, &TopoMapper::deap())?,
            };
            cache.save(&out)?;
            print(json!({ "trials": trials.len(), "windows": cache.sets.len(), "out": out }))
        }
        Command::Train { config, out } => {
            let cfg = run_config(Some(&config))?;
            let samples = load_samples(&cfg.data, cfg.train.task)?;
            let model = Stiln::new(cfg.train.model.clone(), cfg.train.seed)?;
            let outcome = train(model, &samples, &cfg.train, cfg.train.seed)?;
            let mut model = outcome.model;
            let fit = evaluate(&mut model, &samples)?;
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)?;
                model
                    .params()
                    .save(&dir.join("params.bin"), &dir.join("params.json"))?;
                std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(&cfg)?)?;
            }
            print(json!({
                "samples": samples.len(), "steps": outcome.losses.len(),
                "final_loss": outcome.losses.last(), "train_acc": fit.acc, "train_f1": fit.f1,
                "param_count": model.param_count(), "checksum": model.params().checksum(), "out": out,
            }))
        }
        Command::Loocv { config, report } => {
            let cfg = run_config(Some(&config))?;
            let samples = load_samples(&cfg.data, cfg.train.task)?;
            reports_out(&[run_loocv(&samples, &cfg.train, cfg.top_k())?], &report)
        }
        Command::Sweep {
            grid,
            config,
            report,
        } => {
            let cfg = run_config(config.as_deref())?;
            let samples = load_samples(&cfg.data, cfg.train.task)?;
            let grid = match grid {
                GridName::Hidden => SweepGrid::hidden(),
                GridName::Lr => SweepGrid::lr(),
            };
            reports_out(
                &run_sweep(&samples, &cfg.train, &grid, cfg.top_k())?,
                &report,
            )
        }
        Command::Ablate {
            config,
            report,
            variants,
        } => {
            let cfg = run_config(config.as_deref())?;
            let variants = match variants {
                Some(names) => names
                    .iter()
                    .map(|n| n.parse())
                    .collect::<Result<Vec<Variant>>>()?,
                None => Variant::ALL.to_vec(),
            };
            let samples = load_samples(&cfg.data, cfg.train.task)?;
            reports_out(
                &run_ablation(&samples, &cfg.train, &variants, cfg.top_k())?,
                &report,
            )
        }
        Command::Describe {
            config,
            variant,
            json,
        } => {
            let cfg = run_config(config.as_deref())?;
            let mut model_cfg = cfg.train.model;
            if let Some(v) = variant {
                model_cfg = make_ablation(v.parse()?, &model_cfg)?;
            }
            let model = Stiln::new(model_cfg.clone(), cfg.train.seed)?;
            let rows = model.describe();
            if json {
                return print(
                    json!({ "config": model_cfg, "layers": rows, "total": model.param_count() }),
                );
            }
            println!("| Layer | Operation | Output | Params |\n|---|---|---|---:|");
            for r in &rows {
                let shape: Vec<String> = r.output.iter().map(usize::to_string).collect();
                println!(
                    "| {} | {} | {} | {} |",
                    r.name,
                    r.kind,
                    shape.join("×"),
                    r.params
                );
            }
            println!("| total | | | {} |", model.param_count());
            Ok(())
        }
        Command::ExportTopo {
            input,
            out,
            png,
            index,
        } => {
            let sets = frame_sets(&input)?;
            let set = sets.get(index).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "window {index} out of range ({} available)",
                    sets.len()
                ))
            })?;
            std::fs::create_dir_all(&out)?;
            let mut files = Vec::new();
            for (f, frame) in set.frames.iter().enumerate() {
                for (b, band) in BANDS.iter().enumerate() {
                    let stem = format!(
                        "s{:02}_t{:02}_w{:02}_f{f}_{}",
                        set.subject_id, set.trial_id, set.segment, band.name
                    );
                    let path = if png {
                        let p = out.join(format!("{stem}.png"));
                        frame
                            .band_image(b)
                            .save(&p)
                            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
                        p
                    } else {
                        let p = out.join(format!("{stem}.json"));
                        std::fs::write(&p, serde_json::to_string(&frame.band(b))?)?;
                        p
                    };
                    files.push(path);
                }
            }
            print(
                json!({ "subject": set.subject_id, "trial": set.trial_id, "window": set.segment, "files": files }),
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!(
                "{}",
                json!({ "error": "usage", "message": e.to_string().trim() })
            );
            return ExitCode::from(2);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
