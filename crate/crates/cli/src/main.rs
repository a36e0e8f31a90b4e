use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gzhybrid_core::byol::HybridModel;
use gzhybrid_core::config::ExperimentConfig;
use gzhybrid_core::probe::{self, budget_sweep, direct_settings, ring_pool, SweepMethod, SweepReport};
use gzhybrid_core::schema::AnswerSchema;
use gzhybrid_core::synthdata::{load_dataset_dir, make_dataset, Dataset, DatasetConfig};
use gzhybrid_core::train::{
    save_checkpoint, train_direct, train_representation, write_metrics, write_validation, CheckpointMeta,
    FrozenEncoder, TrainMode,
};
use gzhybrid_core::Error;

const THREADS_ENV: &str = "GZHYBRID_THREADS";

#[derive(Parser)]
#[command(name = "gzhybrid", version, about = "Hybrid contrastive and vote-supervised representation learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic catalog, images and manifest.
    GenData(GenData),
    /// Train one representation (or the direct baseline).
    Train(Train),
    /// Probe one checkpoint at one or more label budgets.
    Probe(Probe),
    /// Probe several checkpoints across label budgets.
    Sweep(Sweep),
    /// Redraw plots from a sweep summary.
    Plot(Plot),
}

#[derive(Args)]
struct GenData {
    #[arg(long)]
    labelled: usize,
    #[arg(long)]
    unlabelled: usize,
    #[arg(long)]
    rings: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Image side in pixels.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Answer schema document; the synthetic schema when omitted.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    config: Option<PathBuf>,
    /// Dataset directory written by gen-data.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved config and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct Train {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    mode: Option<TrainMode>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long)]
    patience: Option<u32>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args)]
struct Probe {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Method label in the result tables.
    #[arg(long, default_value = "probe")]
    name: String,
    /// Comma-separated label budgets; the config's when omitted.
    #[arg(long, value_delimiter = ',')]
    budgets: Vec<usize>,
}

#[derive(Args)]
struct Sweep {
    #[command(flatten)]
    common: Common,
    /// `name=checkpoint`, repeatable.
    #[arg(long = "method", value_parser = parse_method)]
    methods: Vec<(String, PathBuf)>,
    /// Include the end-to-end direct baseline.
    #[arg(long)]
    direct: bool,
    #[arg(long, value_delimiter = ',')]
    budgets: Vec<usize>,
}

#[derive(Args)]
struct Plot {
    /// summary.csv from a sweep.
    summary: PathBuf,
    /// Output directory for the SVG files.
    #[arg(long)]
    out: PathBuf,
}

fn parse_method(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((n, p)) if !n.is_empty() && !p.is_empty() => Ok((n.to_string(), PathBuf::from(p))),
        _ => Err(format!("expected name=checkpoint, got `{s}`")),
    }
}

enum Failure {
    Usage(String),
    Numeric(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numeric(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        if e.is_numeric() {
            return Failure::Numeric(msg);
        }
        match e {
            Error::Config(_)
            | Error::Checkpoint(_)
            | Error::Schema(_)
            | Error::Catalog(_)
            | Error::Dataset(_)
            | Error::MissingImage { .. }
            | Error::Probe(_)
            | Error::NetworkConfig(_) => Failure::Usage(msg),
            Error::Io(ref io) if io.kind() == std::io::ErrorKind::NotFound => Failure::Usage(msg),
            _ => Failure::Runtime(msg),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(f) = configure_threads() {
        eprintln!("error: {}", f.message());
        return ExitCode::from(f.code());
    }
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Probe(a) => probe_cmd(a),
        Command::Sweep(a) => sweep(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn configure_threads() -> Outcome {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn gen_data(a: GenData) -> Outcome {
    let schema = match &a.schema {
        Some(p) => AnswerSchema::load(p)?,
        None => AnswerSchema::synthetic(),
    };
    let cfg = DatasetConfig {
        labelled: a.labelled,
        unlabelled: a.unlabelled,
        rings: a.rings,
        image_size: a.size,
        ..DatasetConfig::default()
    };
    let ds = make_dataset(&schema, &cfg, a.seed)?;
    ds.write(&a.out, a.seed, &cfg)?;
    println!("wrote {} records to {}", ds.len(), a.out.display());
    Ok(())
}

/// Config file (or desk defaults sized to the dataset) with flag overrides and the dataset itself.
struct Session {
    config: ExperimentConfig,
    schema: AnswerSchema,
    dataset: Option<Dataset>,
}

fn open_session(common: &Common, edit: impl FnOnce(&mut ExperimentConfig)) -> Result<Session, Failure> {
    let mut config = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &common.data {
        config.dataset.path = Some(d.clone());
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(o) = &common.out {
        config.output_dir = o.clone();
    }
    edit(&mut config);

    let dataset = match &config.dataset.path {
        Some(dir) if !common.print_config => {
            if !dir.is_dir() {
                return Err(Failure::Usage(format!("dataset directory {} not found", dir.display())));
            }
            Some(load_dataset_dir(dir)?)
        }
        _ => None,
    };
    if common.config.is_none() {
        // size the desk network to the images on disk
        let size = match &dataset {
            Some(ds) if !ds.is_empty() => ds.image(0)?.height(),
            _ => config.dataset.generate.image_size,
        };
        let desk = ExperimentConfig::desk(size);
        config.encoder = desk.encoder;
        config.dataset.generate.image_size = size;
    }
    let schema = match (&dataset, &config.schema) {
        (Some(ds), None) => ds.schema().clone(),
        _ => config.load_schema()?,
    };
    if let Some(ds) = &dataset {
        if ds.schema().answer_ids() != schema.answer_ids() {
            return Err(Failure::Usage("dataset schema differs from the configured schema".into()));
        }
    }
    config.resolve(&schema);
    config.validate(&schema)?;
    Ok(Session {
        config,
        schema,
        dataset,
    })
}

impl Session {
    fn dataset(&mut self) -> Result<&Dataset, Failure> {
        if self.dataset.is_none() {
            let ds = make_dataset(&self.schema, &self.config.dataset.generate, self.config.seed)?;
            self.dataset = Some(ds);
        }
        Ok(self.dataset.as_ref().expect("dataset present"))
    }
}

fn archive_config(dir: &Path, config: &ExperimentConfig) -> Outcome {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
    std::fs::write(dir.join("config.toml"), config.to_toml()).map_err(|e| Failure::Runtime(e.to_string()))
}

fn train(a: Train) -> Outcome {
    let mut session = open_session(&a.common, |c| {
        if let Some(m) = a.mode {
            c.training.mode = m;
        }
        if let Some(l) = a.lambda {
            c.objective.lambda = l;
        }
        if let Some(s) = a.max_steps {
            c.training.max_steps = s;
        }
        if let Some(p) = a.patience {
            c.training.patience = p;
        }
        if let Some(b) = a.batch_size {
            c.training.batch_size = b;
        }
    })?;
    if a.common.print_config {
        print!("{}", session.config.to_toml());
        return Ok(());
    }
    let config = session.config.clone();
    let out = config.output_dir.clone();
    archive_config(&out, &config)?;
    let schema = session.schema.clone();
    let dataset = session.dataset()?;
    let ckpt = out.join("model.ckpt");

    if config.training.mode == TrainMode::Direct {
        let (pool, labels) = ring_pool(dataset, config.probe.pool)?;
        let settings = direct_settings(
            config.training.direct_steps,
            config.training.batch_size,
            config.optimizer,
            config.augment.standard,
            config.seed,
        );
        let (model, rows) = train_direct(&config.encoder, dataset, &pool, &labels, &settings)?;
        write_metrics(&out.join("metrics.csv"), &rows)?;
        let meta = CheckpointMeta {
            mode: TrainMode::Direct,
            seed: config.seed,
            encoder: config.encoder.clone(),
            heads: None,
            answer_count: schema.answer_count(),
            best_step: rows.len() as u64,
            steps_run: rows.len() as u64,
            best_objective: None,
            final_contrastive_loss: None,
        };
        save_checkpoint(&ckpt, &model.to_tensors(), &meta)?;
        println!("direct: {} steps, final loss {:.6}", rows.len(), rows.last().map_or(f64::NAN, |r| r.combined));
        println!("checkpoint {}", ckpt.display());
        return Ok(());
    }

    let heads = config.heads.clone().expect("resolved config has heads");
    let model = HybridModel::new(&config.encoder, &heads, &schema)?;
    let every = config.training.eval_every;
    let outcome = train_representation(&model, dataset, &config, |r| {
        if r.step % every == 0 {
            eprintln!(
                "step {:>6}  contrastive {:.6}  supervised {:.6}  combined {:.6}",
                r.step, r.contrastive, r.supervised, r.combined
            );
        }
    })?;
    write_metrics(&out.join("metrics.csv"), &outcome.metrics)?;
    write_validation(&out.join("validation.csv"), &outcome.validation)?;
    save_checkpoint(&ckpt, &outcome.state.to_tensors(), &outcome.meta(&config, &model))?;
    println!(
        "{}: {} steps{}, best step {}, best objective {:.6}, final contrastive loss {:.6}",
        config.training.mode,
        outcome.steps_run,
        if outcome.stopped_early { " (patience)" } else { "" },
        outcome.best_step,
        outcome.best_objective,
        outcome.final_contrastive
    );
    println!("checkpoint {}", ckpt.display());
    Ok(())
}

fn load_frozen(name: &str, path: &Path) -> Result<SweepMethod, Failure> {
    if !path.is_file() {
        return Err(Failure::Usage(format!("checkpoint {} not found", path.display())));
    }
    let enc = FrozenEncoder::load(path)?;
    if enc.meta.mode == TrainMode::Direct {
        eprintln!("note: probing the encoder of direct checkpoint {}", path.display());
    }
    Ok(SweepMethod::frozen(name, enc))
}

fn run_sweep(session: &mut Session, methods: Vec<SweepMethod>, budgets: Vec<usize>) -> Outcome {
    let config = session.config.clone();
    let budgets = if budgets.is_empty() { config.probe.budgets.clone() } else { budgets };
    archive_config(&config.output_dir, &config)?;
    let report = budget_sweep(&methods, &budgets, session.dataset()?, &config.probe, config.seed)?;
    report.write(&config.output_dir)?;
    print_report(&report);
    println!("tables and plots in {}", config.output_dir.display());
    Ok(())
}

fn print_report(report: &SweepReport) {
    println!("{:<14}{:>8}{:>10}{:>10}", "method", "budget", "mean", "std");
    for r in &report.summary {
        match (r.mean, r.std) {
            (Some(m), Some(s)) => println!("{:<14}{:>8}{:>10.4}{:>10.4}", r.method, r.budget, m, s),
            _ => println!("{:<14}{:>8}  missing: {}", r.method, r.budget, r.error),
        }
    }
    print!("{}", report.ordering_report());
}

fn probe_cmd(a: Probe) -> Outcome {
    let mut session = open_session(&a.common, |_| {})?;
    if a.common.print_config {
        print!("{}", session.config.to_toml());
        return Ok(());
    }
    let method = load_frozen(&a.name, &a.checkpoint)?;
    run_sweep(&mut session, vec![method], a.budgets)
}

fn sweep(a: Sweep) -> Outcome {
    let mut session = open_session(&a.common, |_| {})?;
    if a.common.print_config {
        print!("{}", session.config.to_toml());
        return Ok(());
    }
    if a.methods.is_empty() && !a.direct {
        return Err(Failure::Usage("sweep needs at least one --method or --direct".into()));
    }
    let mut methods = a
        .methods
        .iter()
        .map(|(n, p)| load_frozen(n, p))
        .collect::<Result<Vec<_>, _>>()?;
    if a.direct {
        let c = &session.config;
        let settings = direct_settings(
            c.training.direct_steps,
            c.training.batch_size,
            c.optimizer,
            c.augment.standard,
            c.seed,
        );
        methods.push(SweepMethod::direct(c.encoder.clone(), settings));
    }
    run_sweep(&mut session, methods, a.budgets)
}

fn plot(a: Plot) -> Outcome {
    if !a.summary.is_file() {
        return Err(Failure::Usage(format!("{} not found", a.summary.display())));
    }
    let rows = probe::read_summary(&a.summary)?;
    if rows.iter().all(|r| r.mean.is_none()) {
        return Err(Failure::Usage(format!("{} holds no results to plot", a.summary.display())));
    }
    std::fs::create_dir_all(&a.out).map_err(|e| Failure::Usage(format!("{}: {e}", a.out.display())))?;
    let svg = probe::accuracy_plot(&rows)?;
    let target = a.out.join("accuracy_vs_budget.svg");
    std::fs::write(&target, svg).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("{}", target.display());
    let losses = a.summary.with_file_name("losses.csv");
    if losses.is_file() {
        if let Ok(svg) = probe::loss_plot(&probe::read_losses(&losses)?) {
            let target = a.out.join("contrastive_vs_accuracy.svg");
            std::fs::write(&target, svg).map_err(|e| Failure::Runtime(e.to_string()))?;
            println!("{}", target.display());
        }
    }
    Ok(())
}
