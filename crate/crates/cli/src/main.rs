use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use csiloc::config::{ExperimentConfig, LearnerKind};
use csiloc::dataset::{snapshots_to_bytes, write_snapshots_csv, LabeledDataset, Split, DATASET_FORMAT_VERSION};
use csiloc::evaluation::{evaluation_report, ErrorReport, SweepAxis, REPORT_FORMAT_VERSION};
use csiloc::features::ORDERING_VERSION;
use csiloc::learners::{model_load, model_save, Activation, Model, Regressor, BETA_LAYOUT_VERSION, MODEL_FORMAT_VERSION};
use csiloc::pipeline::{self, SweepRequest};

#[derive(Parser)]
#[command(name = "csiloc", about = "Covariance-fingerprint localization experiments", disable_version_flag = true)]
struct Cli {
    /// Print the version and artifact format tags.
    #[arg(long)]
    version: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured trajectory and write the labeled dataset.
    Generate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory; defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the dataset as CSV instead of binary.
        #[arg(long)]
        csv: bool,
        /// Also dump the raw channel snapshots (snapshots.csv and snapshots.bin).
        #[arg(long)]
        snapshots: bool,
    },
    /// Train a learner on the training split of a dataset.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = ["elm", "knn"])]
        learner: Option<String>,
        #[arg(long)]
        neurons: Option<usize>,
        #[arg(long)]
        gamma: Option<f64>,
        /// γ grid searched on the test split, e.g. 1e-6:1e2:log.
        #[arg(long)]
        gamma_grid: Option<String>,
        #[arg(long)]
        activation: Option<Activation>,
        #[arg(long)]
        k: Option<usize>,
        /// Seed of the hidden weights.
        #[arg(long)]
        weight_seed: Option<u64>,
    },
    /// Predict positions for every record of a dataset.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// CSV output; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Localization error statistics of a model on a dataset split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test", value_parser = ["train", "test", "all"])]
        split: String,
    },
    /// Run a parameter sweep and write its CSV and JSON summary.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        axis: Option<SweepAxis>,
        /// Grid, e.g. 1e-6:1e2:log, 0:1:5:lin or 4,8,16,32.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        realizations: Option<usize>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full run: dataset, model, evaluation report, learner comparison,
    /// error map and error histogram.
    Report {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn version_text() -> String {
    format!(
        "csiloc {} (dataset format {DATASET_FORMAT_VERSION}, feature ordering {ORDERING_VERSION}, model format {MODEL_FORMAT_VERSION}, beta layout {BETA_LAYOUT_VERSION}, report format {REPORT_FORMAT_VERSION})",
        env!("CARGO_PKG_VERSION")
    )
}

/// Raised for bad invocations that clap cannot see, reported with exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn load_config(args: &ConfigArgs) -> anyhow::Result<ExperimentConfig> {
    let mut c = match (&args.config, args.seed) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(s)) => ExperimentConfig::with_seed(s),
        (None, None) => return Err(UsageError("either --config or --seed is required".into()).into()),
    };
    if let Some(s) = args.seed {
        c.master_seed = s;
    }
    Ok(c)
}

fn load_dataset(path: &Path) -> anyhow::Result<LabeledDataset> {
    LabeledDataset::load(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn load_model(path: &Path) -> anyhow::Result<(Model, csiloc::learners::Provenance)> {
    let bytes = fs::read(path).with_context(|| format!("reading model {}", path.display()))?;
    model_load(&bytes).with_context(|| format!("decoding model {}", path.display()))
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Generate { cfg, out, csv, snapshots } => {
            let c = load_config(&cfg)?;
            let dir = out.unwrap_or_else(|| c.output_dir.clone());
            fs::create_dir_all(&dir)?;
            let (geometry, samples) = pipeline::simulate(&c)?;
            let ds = pipeline::covariances_from(&c, geometry, &samples)?.dataset()?;
            let path = dir.join(if csv { "dataset.csv" } else { "dataset.bin" });
            ds.save(&path)?;
            if snapshots {
                let mut f = fs::File::create(dir.join("snapshots.csv"))?;
                write_snapshots_csv(&mut f, &samples.snapshots)?;
                fs::write(dir.join("snapshots.bin"), snapshots_to_bytes(&samples.snapshots))?;
            }
            eprintln!(
                "wrote {} ({} train, {} test records)",
                path.display(),
                ds.count(Split::Train),
                ds.count(Split::Test)
            );
        }
        Command::Train {
            cfg,
            data,
            out,
            learner,
            neurons,
            gamma,
            gamma_grid,
            activation,
            k,
            weight_seed,
        } => {
            let ds = load_dataset(&data)?;
            let mut c = match (&cfg.config, cfg.seed) {
                (None, None) => ExperimentConfig::with_seed(ds.provenance().master_seed),
                _ => load_config(&cfg)?,
            };
            let l = &mut c.learner;
            if let Some(kind) = learner {
                l.kind = if kind == "knn" { LearnerKind::Knn } else { LearnerKind::Elm };
            }
            l.neurons = neurons.unwrap_or(l.neurons);
            l.gamma = gamma.unwrap_or(l.gamma);
            l.activation = activation.unwrap_or(l.activation);
            l.k = k.unwrap_or(l.k);
            l.seed = weight_seed.or(l.seed);
            l.gamma_grid = gamma_grid.or(l.gamma_grid.take());
            c.validate()?;
            let fitted = pipeline::train_learner(&c, &ds)?;
            fs::write(&out, model_save(&fitted.model, c.provenance()?)?)?;
            match fitted.gamma {
                Some(g) => eprintln!("wrote {} (gamma {g:e})", out.display()),
                None => eprintln!("wrote {}", out.display()),
            }
        }
        Command::Predict { model, data, out } => {
            let (m, _) = load_model(&model)?;
            let ds = load_dataset(&data)?;
            let all = ds.samples(None);
            let est = m.predict_batch(&all.features)?;
            let mut text = String::from("split,x_m,y_m,est_x_m,est_y_m\n");
            for (r, e) in ds.records().iter().zip(&est) {
                text.push_str(&format!("{},{},{},{},{}\n", r.split.name(), r.position.x, r.position.y, e.x, e.y));
            }
            match out {
                Some(p) => fs::write(p, text)?,
                None => print!("{text}"),
            }
        }
        Command::Eval { model, data, split } => {
            let (m, provenance) = load_model(&model)?;
            let ds = load_dataset(&data)?;
            let split = match split.as_str() {
                "all" => None,
                s => Some(s.parse::<Split>()?),
            };
            let report = ErrorReport::evaluate(&m, &ds.samples(split))?;
            let label = match &m {
                Model::Elm(e) => format!("ELM ({})", e.activation()),
                Model::Knn(k) => format!("{}-nN", k.k()),
            };
            print!("{}", evaluation_report(&label, &report, provenance));
        }
        Command::Sweep {
            cfg,
            axis,
            grid,
            realizations,
            workers,
            out,
        } => {
            let c = load_config(&cfg)?;
            if let Some(w) = workers {
                if w == 0 {
                    return Err(UsageError("--workers must be at least 1".into()).into());
                }
                rayon::ThreadPoolBuilder::new().num_threads(w).build_global()?;
            }
            let request = SweepRequest { axis, grid, realizations };
            let result = pipeline::run_sweep(&c, &request)?;
            let (csv, json) = pipeline::write_sweep(&result, &out.unwrap_or_else(|| c.output_dir.clone()))?;
            eprintln!("wrote {} and {}", csv.display(), json.display());
        }
        Command::Report { cfg, out } => {
            let c = load_config(&cfg)?;
            let files = pipeline::run_report(&c, &out.unwrap_or_else(|| c.output_dir.clone()))?;
            print!("{}", fs::read_to_string(&files.report)?);
        }
    }
    Ok(())
}

/// Usage errors (bad flags, unreadable or malformed config) exit with 2,
/// everything else with 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<csiloc::Error>() {
            if matches!(e, csiloc::Error::Config(_)) {
                return 2;
            }
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.version {
        println!("{}", version_text());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (see --help)");
        return ExitCode::from(2);
    };
    match run(command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
