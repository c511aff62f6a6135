use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crowdimpute_core::dataset::{GroundTruth, DEFAULT_MISSING_TOKEN};
use crowdimpute_core::imputation::Provenance;
use crowdimpute_core::mice::{MiceConfig, DEFAULT_CYCLES, DEFAULT_K_D};
use crowdimpute_core::pipeline::{self, ErrorKind, PipelineError, RunConfig, RunDir, DEFAULT_K, DEFAULT_M};
use crowdimpute_core::pooling::ReportFormat;
use crowdimpute_core::questionnaire::DEFAULT_TOP_M;
use crowdimpute_core::synth;
use crowdimpute_server::ServeConfig;

#[derive(Parser)]
#[command(name = "crowdimpute", version, about = "Crowd-sourced multiple imputation with a MICE/PMM baseline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunDirArg {
    /// Run directory shared by all stages.
    #[arg(short, long, default_value = "run", env = "CROWDIMPUTE_OUT_DIR")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic lung-function style dataset and its schema.
    Synth {
        #[arg(long, default_value = "fev.csv")]
        out: PathBuf,
        #[arg(long, default_value = "schema.json")]
        schema_out: PathBuf,
        #[arg(short, long, default_value_t = 654)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Remove n observed cells per target column and keep the ground truth.
    Ampute {
        #[command(flatten)]
        run: RunDirArg,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long = "target", required = true)]
        targets: Vec<String>,
        #[arg(short, long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = DEFAULT_MISSING_TOKEN)]
        missing_token: String,
    },
    /// Compute descriptive statistics of the amputed data.
    Describe {
        #[command(flatten)]
        run: RunDirArg,
    },
    /// Build questionnaires for the missing cells.
    GenSurvey {
        #[command(flatten)]
        run: RunDirArg,
        /// Target columns; defaults to the amputed columns.
        #[arg(long = "target")]
        targets: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_TOP_M)]
        top_m: usize,
        #[arg(short, long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long)]
        prior_blurb: Option<String>,
        #[arg(long)]
        prepend_blurb: bool,
        #[arg(long)]
        template_file: Option<PathBuf>,
    },
    /// Answer the questionnaires with simulated personas.
    SimulateCrowd {
        #[command(flatten)]
        run: RunDirArg,
        #[arg(long)]
        persona_mix: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Serve the questionnaires over HTTP and collect judgments.
    Serve {
        #[arg(long, default_value_t = 8080, env = "CROWDIMPUTE_PORT")]
        port: u16,
        /// Survey directory, normally `<run>/survey`.
        #[arg(long, env = "CROWDIMPUTE_DATA_DIR")]
        data_dir: PathBuf,
        #[arg(long)]
        k_override: Option<usize>,
        /// Directory with a built survey UI to serve at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
    /// Multiple imputation by chained equations with predictive mean matching.
    ImputeMice {
        #[command(flatten)]
        run: RunDirArg,
        #[arg(short, long, default_value_t = DEFAULT_M)]
        m: usize,
        #[arg(long, default_value_t = DEFAULT_CYCLES)]
        cycles: usize,
        #[arg(long, default_value_t = DEFAULT_K_D)]
        k_d: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Pool an imputation source into per-cell summaries.
    Pool {
        #[command(flatten)]
        run: RunDirArg,
        #[arg(long)]
        provenance: Provenance,
    },
    /// Compare crowd and machine imputations against the ground truth.
    Report {
        #[command(flatten)]
        run: RunDirArg,
        #[arg(long, default_value = "txt")]
        format: ReportFormat,
    },
    /// Run every stage with a simulated crowd.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long = "target")]
    targets: Vec<String>,
    #[arg(short, long)]
    n: Option<usize>,
    #[arg(short, long)]
    k: Option<usize>,
    #[arg(short, long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    persona_mix: Option<PathBuf>,
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    cycles: Option<usize>,
    #[arg(long)]
    k_d: Option<usize>,
    #[arg(long)]
    top_m: Option<usize>,
    #[arg(long)]
    prior_blurb: Option<String>,
    #[arg(long)]
    prepend_blurb: bool,
    #[arg(long)]
    template_file: Option<PathBuf>,
    #[arg(long)]
    missing_token: Option<String>,
    #[arg(long, default_value = "txt")]
    format: ReportFormat,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| config_error(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident <- $value:expr),* $(,)?) => {
                $(if let Some(v) = $value { cfg.$field = v; })*
            };
        }
        set!(
            dataset <- self.dataset,
            schema <- self.schema,
            n_missing <- self.n,
            k <- self.k,
            m <- self.m,
            seed <- self.seed,
            out_dir <- self.out_dir,
            cycles <- self.cycles,
            k_d <- self.k_d,
            top_m <- self.top_m,
            missing_token <- self.missing_token,
        );
        if !self.targets.is_empty() {
            cfg.targets = self.targets;
        }
        if self.persona_mix.is_some() {
            cfg.persona_mix = self.persona_mix;
        }
        if self.prior_blurb.is_some() {
            cfg.prior_blurb = self.prior_blurb;
        }
        if self.template_file.is_some() {
            cfg.template_file = self.template_file;
        }
        cfg.prepend_blurb |= self.prepend_blurb;
        Ok(cfg)
    }
}

fn config_error(message: String) -> anyhow::Error {
    PipelineError::config(pipeline::Stage::Config, message).into()
}

/// Columns present in the ground truth, in first-seen order.
fn amputed_columns(run: &RunDir) -> Result<Vec<String>> {
    let gt = GroundTruth::load(run.ground_truth())
        .map_err(|e| PipelineError::config(pipeline::Stage::GenSurvey, format!("no targets given and {e}")))?;
    let mut cols: Vec<String> = Vec::new();
    for e in gt.entries {
        if !cols.contains(&e.column) {
            cols.push(e.column);
        }
    }
    Ok(cols)
}

fn write_schema(path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&synth::fev_schema())?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synth { out, schema_out, n, seed } => {
            synth::fev_like(n, seed)
                .save_csv(&out, DEFAULT_MISSING_TOKEN)
                .with_context(|| format!("writing {}", out.display()))?;
            write_schema(&schema_out)?;
            println!("wrote {} rows to {} and schema to {}", n, out.display(), schema_out.display());
        }
        Command::Ampute { run, dataset, schema, targets, n, seed, missing_token } => {
            let run = RunDir::new(run.out_dir);
            let gt = pipeline::stage_ampute(&run, &dataset, &schema, &missing_token, &targets, n, seed)?;
            println!("amputed {} cells into {}", gt.len(), run.amputed().display());
        }
        Command::Describe { run } => {
            let run = RunDir::new(run.out_dir);
            pipeline::stage_describe(&run)?;
            println!("wrote {}", run.summary().display());
        }
        Command::GenSurvey { run, targets, top_m, k, prior_blurb, prepend_blurb, template_file } => {
            let run = RunDir::new(run.out_dir);
            let targets = if targets.is_empty() { amputed_columns(&run)? } else { targets };
            let cfg = RunConfig { targets, top_m, k, prior_blurb, prepend_blurb, template_file, ..RunConfig::default() };
            let qns = pipeline::stage_gen_survey(&run, &cfg.survey_options()?)?;
            let n: usize = qns.iter().map(|q| q.questions.len()).sum();
            println!("wrote {} questionnaires ({n} questions) to {}", qns.len(), run.survey().display());
        }
        Command::SimulateCrowd { run, persona_mix, seed } => {
            let run = RunDir::new(run.out_dir);
            let mix = RunConfig { persona_mix, ..RunConfig::default() }.mix()?;
            let judgments = pipeline::stage_simulate_crowd(&run, &mix, seed)?;
            let n: usize = judgments.by_question.values().map(Vec::len).sum();
            println!("collected {n} judgments into {}", run.judgments().display());
        }
        Command::Serve { port, data_dir, k_override, static_dir } => {
            let cfg = ServeConfig { port, data_dir, k_override, static_dir };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crowdimpute_server::serve(cfg)).map_err(|e| anyhow::anyhow!(e))?;
        }
        Command::ImputeMice { run, m, cycles, k_d, seed } => {
            let run = RunDir::new(run.out_dir);
            let set = pipeline::stage_impute_mice(&run, &MiceConfig { m, cycles, k_d }, seed)?;
            println!("wrote {} imputations of {} cells", set.m, set.cells().len());
        }
        Command::Pool { run, provenance } => {
            let run = RunDir::new(run.out_dir);
            let pooled = pipeline::stage_pool(&run, provenance)?;
            println!("pooled {} cells into {}", pooled.len(), run.pooled(provenance).display());
        }
        Command::Report { run, format } => {
            let run = RunDir::new(run.out_dir);
            let report = pipeline::stage_report(&run)?;
            print!("{}", report.render(format));
        }
        Command::Run(args) => {
            let format = args.format;
            let cfg = args.into_config()?;
            let report = pipeline::run_pipeline(&cfg)?;
            print!("{}", report.render(format));
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<PipelineError>() {
        Some(e) if e.kind == ErrorKind::Config => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
