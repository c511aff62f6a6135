//! File-based pipeline stages over a run directory.
//!
//! ```text
//! run/
//!   manifest.json                 run configuration
//!   data/schema.json, data/amputed.csv, data/ground_truth.json
//!   summary.json                  descriptive statistics of the amputed data
//!   survey/job.json, survey/questionnaires/*.json, survey/judgments.jsonl
//!   imputations/{crowd,machine}/  imputation sets
//!   pooled/{crowd,machine}.json   per-cell pooled summaries
//!   report.{json,md,txt}
//! ```
//!
//! Each stage reads only files written by earlier stages, so stages can be
//! re-run on their own; [`run_pipeline`] calls them in order.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::crowd::{run_crowd, JudgmentSet, Persona, PersonaConfig, PersonaMix};
use crate::dataset::{ampute, load_csv, load_schema, ColumnSpec, Dataset, GroundTruth, DEFAULT_MISSING_TOKEN};
use crate::imputation::{ImputationSet, Provenance};
use crate::mice::{multiple_impute_traced, MiceConfig, DEFAULT_CYCLES, DEFAULT_K_D};
use crate::pooling::{compare, summarize_set, EvaluationReport, ReportFormat};
use crate::questionnaire::{
    batch, build_intro, questions_for_column, BlurbPlacement, IntroOptions, Questionnaire, Templates, DEFAULT_TOP_M,
};
use crate::rng::{derive_seed, stage};
use crate::service::{new_job, write_job, Job, JOB_FILE, JUDGMENT_LOG};
use crate::summary::{summarize, SummaryStats};

pub const DEFAULT_K: usize = 30;
pub const DEFAULT_M: usize = 30;
pub const JOB_ID: &str = "job";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Ampute,
    Describe,
    GenSurvey,
    SimulateCrowd,
    ImputeMice,
    Pool,
    Report,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ampute => "ampute",
            Stage::Describe => "describe",
            Stage::GenSurvey => "gen-survey",
            Stage::SimulateCrowd => "simulate-crowd",
            Stage::ImputeMice => "impute-mice",
            Stage::Pool => "pool",
            Stage::Report => "report",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters or unusable input files.
    Config,
    Runtime,
}

#[derive(Debug, thiserror::Error)]
#[error("[{stage}] {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: ErrorKind,
    pub message: String,
}

impl PipelineError {
    pub fn config(stage: Stage, message: impl std::fmt::Display) -> Self {
        Self { stage, kind: ErrorKind::Config, message: message.to_string() }
    }

    pub fn runtime(stage: Stage, message: impl std::fmt::Display) -> Self {
        Self { stage, kind: ErrorKind::Runtime, message: message.to_string() }
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

fn cfg_err<E: std::fmt::Display>(stage: Stage) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::config(stage, e)
}

fn rt_err<E: std::fmt::Display>(stage: Stage) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::runtime(stage, e)
}

/// Paths inside a run directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
    pub fn schema(&self) -> PathBuf {
        self.root.join("data/schema.json")
    }
    pub fn amputed(&self) -> PathBuf {
        self.root.join("data/amputed.csv")
    }
    pub fn ground_truth(&self) -> PathBuf {
        self.root.join("data/ground_truth.json")
    }
    pub fn summary(&self) -> PathBuf {
        self.root.join("summary.json")
    }
    pub fn survey(&self) -> PathBuf {
        self.root.join("survey")
    }
    pub fn judgments(&self) -> PathBuf {
        self.survey().join(JUDGMENT_LOG)
    }
    pub fn imputations(&self, p: Provenance) -> PathBuf {
        self.root.join("imputations").join(p.to_string())
    }
    pub fn pooled(&self, p: Provenance) -> PathBuf {
        self.root.join("pooled").join(format!("{p}.json"))
    }
    pub fn report(&self, f: ReportFormat) -> PathBuf {
        self.root.join(match f {
            ReportFormat::Json => "report.json",
            ReportFormat::Md => "report.md",
            ReportFormat::Txt => "report.txt",
        })
    }

    fn require(&self, path: &Path, stage: Stage, producer: &str) -> Result<()> {
        if path.exists() {
            Ok(())
        } else {
            Err(PipelineError::config(
                stage,
                format!("missing {} (run `{producer}` first)", path.display()),
            ))
        }
    }

    fn load_dataset(&self, stage: Stage) -> Result<Dataset> {
        self.require(&self.amputed(), stage, "ampute")?;
        let schema = load_schema(self.schema()).map_err(cfg_err(stage))?;
        load_csv(self.amputed(), &schema, DEFAULT_MISSING_TOKEN).map_err(cfg_err(stage))
    }

    fn load_summary(&self, stage: Stage) -> Result<SummaryStats> {
        self.require(&self.summary(), stage, "describe")?;
        let text = fs::read_to_string(self.summary()).map_err(rt_err(stage))?;
        serde_json::from_str(&text).map_err(cfg_err(stage))
    }

    fn load_questionnaires(&self, stage: Stage) -> Result<(Job, Vec<Questionnaire>)> {
        let job_path = self.survey().join(JOB_FILE);
        self.require(&job_path, stage, "gen-survey")?;
        let job: Job = serde_json::from_str(&fs::read_to_string(job_path).map_err(rt_err(stage))?)
            .map_err(cfg_err(stage))?;
        let qns = job
            .questionnaire_ids
            .iter()
            .map(|id| Questionnaire::load(crate::service::questionnaire_path(&self.survey(), id)))
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(cfg_err(stage))?;
        Ok((job, qns))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T, stage: Stage) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(rt_err(stage))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(rt_err(stage))?;
    text.push('\n');
    fs::write(path, text).map_err(rt_err(stage))
}

/// Full configuration of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub schema: PathBuf,
    pub targets: Vec<String>,
    /// Cells amputed per target column.
    pub n_missing: usize,
    pub k: usize,
    pub m: usize,
    pub seed: u64,
    pub persona_mix: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub missing_token: String,
    pub top_m: usize,
    pub cycles: usize,
    pub k_d: usize,
    pub prior_blurb: Option<String>,
    pub prepend_blurb: bool,
    pub template_file: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            schema: PathBuf::new(),
            targets: Vec::new(),
            n_missing: 10,
            k: DEFAULT_K,
            m: DEFAULT_M,
            seed: 1,
            persona_mix: None,
            out_dir: PathBuf::from("run"),
            missing_token: DEFAULT_MISSING_TOKEN.into(),
            top_m: DEFAULT_TOP_M,
            cycles: DEFAULT_CYCLES,
            k_d: DEFAULT_K_D,
            prior_blurb: None,
            prepend_blurb: false,
            template_file: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(PipelineError::config(Stage::Config, msg));
        if self.k == 0 || self.m == 0 || self.n_missing == 0 {
            return bad("k, m and n must be at least 1");
        }
        if self.k_d == 0 || self.top_m == 0 {
            return bad("k_d and top_m must be at least 1");
        }
        if self.targets.is_empty() {
            return bad("at least one target column is required");
        }
        Ok(())
    }

    pub fn survey_options(&self) -> Result<SurveyOptions> {
        let templates = match &self.template_file {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| {
                    PipelineError::config(Stage::GenSurvey, format!("template file {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text).map_err(cfg_err(Stage::GenSurvey))?
            }
            None => Templates::default(),
        };
        Ok(SurveyOptions {
            targets: self.targets.clone(),
            k: self.k,
            intro: IntroOptions {
                top_m: self.top_m,
                prior_blurb: self.prior_blurb.clone(),
                blurb_placement: if self.prepend_blurb { BlurbPlacement::Start } else { BlurbPlacement::End },
                description: None,
            },
            templates,
        })
    }

    pub fn mix(&self) -> Result<PersonaMix> {
        match &self.persona_mix {
            Some(p) => PersonaConfig::load(p).map_err(cfg_err(Stage::SimulateCrowd)),
            None => PersonaMix::single(Persona::experienced()).map_err(cfg_err(Stage::SimulateCrowd)),
        }
    }
}

/// Reads the dataset, amputes `n` observed cells in each target column and
/// writes the amputed data, its schema and the ground truth.
pub fn stage_ampute(
    run: &RunDir,
    dataset: &Path,
    schema: &Path,
    missing_token: &str,
    targets: &[String],
    n: usize,
    seed: u64,
) -> Result<GroundTruth> {
    let st = Stage::Ampute;
    let specs: Vec<ColumnSpec> = load_schema(schema)
        .map_err(|e| PipelineError::config(st, format!("schema {}: {e}", schema.display())))?;
    let mut d = load_csv(dataset, &specs, missing_token)
        .map_err(|e| PipelineError::config(st, format!("dataset {}: {e}", dataset.display())))?;
    let mut truth = GroundTruth::default();
    for (i, target) in targets.iter().enumerate() {
        let (next, gt) = ampute(&d, target, n, derive_seed(seed, stage::AMPUTE, i as u64)).map_err(cfg_err(st))?;
        d = next;
        truth.extend(gt);
    }
    fs::create_dir_all(run.root.join("data")).map_err(rt_err(st))?;
    write_json(&run.schema(), &d.schema(), st)?;
    d.save_csv(run.amputed(), DEFAULT_MISSING_TOKEN).map_err(rt_err(st))?;
    truth.save(run.ground_truth()).map_err(rt_err(st))?;
    Ok(truth)
}

pub fn stage_describe(run: &RunDir) -> Result<SummaryStats> {
    let d = run.load_dataset(Stage::Describe)?;
    let stats = summarize(&d).map_err(rt_err(Stage::Describe))?;
    for name in &stats.flagged {
        log::warn!("column '{name}' has no observed values");
    }
    write_json(&run.summary(), &stats, Stage::Describe)?;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveyOptions {
    pub targets: Vec<String>,
    pub k: usize,
    pub intro: IntroOptions,
    pub templates: Templates,
}

/// One batch of questionnaires per target column, all in one job.
pub fn stage_gen_survey(run: &RunDir, opts: &SurveyOptions) -> Result<Vec<Questionnaire>> {
    let st = Stage::GenSurvey;
    let d = run.load_dataset(st)?;
    let stats = run.load_summary(st)?;
    let mut all = Vec::new();
    for target in &opts.targets {
        let intro = build_intro(&d, &stats, target, &opts.intro).map_err(cfg_err(st))?;
        let questions = questions_for_column(&d, target, Some(&stats), &opts.templates).map_err(cfg_err(st))?;
        all.extend(batch(questions, &intro, opts.k, target).map_err(cfg_err(st))?);
    }
    let survey = run.survey();
    if survey.exists() {
        fs::remove_dir_all(&survey).map_err(rt_err(st))?;
    }
    write_job(&survey, &new_job(JOB_ID, &all, opts.k, 0), &all).map_err(rt_err(st))?;
    Ok(all)
}

/// Collects `k` simulated judgments per question into the survey's judgment
/// log, replacing any previous log.
pub fn stage_simulate_crowd(run: &RunDir, mix: &PersonaMix, seed: u64) -> Result<JudgmentSet> {
    let st = Stage::SimulateCrowd;
    let (_, qns) = run.load_questionnaires(st)?;
    let stats = run.load_summary(st)?;
    let crowd_seed = derive_seed(seed, stage::CROWD, 0);
    let mut set = JudgmentSet::default();
    for qn in &qns {
        set.merge(run_crowd(qn, mix, &stats, crowd_seed).map_err(rt_err(st))?);
    }
    let file = File::create(run.judgments()).map_err(rt_err(st))?;
    let mut w = BufWriter::new(file);
    set.write_jsonl(&mut w).map_err(rt_err(st))?;
    w.flush().map_err(rt_err(st))?;
    Ok(set)
}

pub fn stage_impute_mice(run: &RunDir, cfg: &MiceConfig, seed: u64) -> Result<ImputationSet> {
    let st = Stage::ImputeMice;
    let d = run.load_dataset(st)?;
    let (set, traces) = multiple_impute_traced(&d, cfg, derive_seed(seed, stage::MICE, 0)).map_err(rt_err(st))?;
    let dir = run.imputations(Provenance::Machine);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(rt_err(st))?;
    }
    set.save(&dir).map_err(rt_err(st))?;
    write_json(&dir.join("trace.json"), &traces, st)?;
    Ok(set)
}

/// Crowd: turns the judgment log into an imputation set first. Both: writes
/// the pooled per-cell summaries.
pub fn stage_pool(run: &RunDir, provenance: Provenance) -> Result<Vec<crate::pooling::PooledCellSummary>> {
    let st = Stage::Pool;
    let set = match provenance {
        Provenance::Crowd => {
            let d = run.load_dataset(st)?;
            let (job, qns) = run.load_questionnaires(st)?;
            run.require(&run.judgments(), st, "simulate-crowd` or `serve")?;
            let file = File::open(run.judgments()).map_err(rt_err(st))?;
            let judgments = JudgmentSet::read_jsonl(BufReader::new(file)).map_err(cfg_err(st))?;
            let set = ImputationSet::from_judgments(&d, &qns, &judgments, job.k).map_err(rt_err(st))?;
            if job.k == 1 {
                log::warn!("k = 1: crowd imputations carry no between-imputation variance");
            }
            let dir = run.imputations(Provenance::Crowd);
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(rt_err(st))?;
            }
            set.save(&dir).map_err(rt_err(st))?;
            set
        }
        Provenance::Machine => {
            run.require(&run.imputations(Provenance::Machine), st, "impute-mice")?;
            let set = ImputationSet::load(run.imputations(Provenance::Machine)).map_err(cfg_err(st))?;
            if set.m == 1 {
                log::warn!("m = 1: machine imputations carry no between-imputation variance");
            }
            set
        }
    };
    let pooled = summarize_set(&set).map_err(rt_err(st))?;
    write_json(&run.pooled(provenance), &pooled, st)?;
    Ok(pooled)
}

/// Compares crowd against machine imputations and writes the report in all
/// three formats.
pub fn stage_report(run: &RunDir) -> Result<EvaluationReport> {
    let st = Stage::Report;
    run.require(&run.ground_truth(), st, "ampute")?;
    let gt = GroundTruth::load(run.ground_truth()).map_err(cfg_err(st))?;
    let load = |p: Provenance, producer: &str| -> Result<ImputationSet> {
        run.require(&run.imputations(p), st, producer)?;
        ImputationSet::load(run.imputations(p)).map_err(cfg_err(st))
    };
    let crowd = load(Provenance::Crowd, "pool --provenance crowd")?;
    let machine = load(Provenance::Machine, "impute-mice")?;
    let report = compare(&gt, &crowd, &machine).map_err(rt_err(st))?;
    for f in [ReportFormat::Json, ReportFormat::Md, ReportFormat::Txt] {
        fs::write(run.report(f), report.render(f)).map_err(rt_err(st))?;
    }
    Ok(report)
}

/// Runs every stage with the simulated crowd and returns the report.
pub fn run_pipeline(cfg: &RunConfig) -> Result<EvaluationReport> {
    cfg.validate()?;
    let opts = cfg.survey_options()?;
    let mix = cfg.mix()?;
    let run = RunDir::new(&cfg.out_dir);
    fs::create_dir_all(&run.root).map_err(rt_err(Stage::Config))?;
    write_json(&run.manifest(), cfg, Stage::Config)?;
    stage_ampute(&run, &cfg.dataset, &cfg.schema, &cfg.missing_token, &cfg.targets, cfg.n_missing, cfg.seed)?;
    stage_describe(&run)?;
    stage_gen_survey(&run, &opts)?;
    stage_simulate_crowd(&run, &mix, cfg.seed)?;
    stage_impute_mice(&run, &MiceConfig { m: cfg.m, cycles: cfg.cycles, k_d: cfg.k_d }, cfg.seed)?;
    stage_pool(&run, Provenance::Crowd)?;
    stage_pool(&run, Provenance::Machine)?;
    stage_report(&run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn config(dir: &Path) -> RunConfig {
        let data = dir.join("fev.csv");
        synth::fev_like(300, 7).save_csv(&data, DEFAULT_MISSING_TOKEN).unwrap();
        let schema = dir.join("schema.json");
        fs::write(&schema, serde_json::to_string(&synth::fev_schema()).unwrap()).unwrap();
        RunConfig {
            dataset: data,
            schema,
            targets: vec!["age".into()],
            n_missing: 10,
            k: 30,
            m: 30,
            seed: 3,
            out_dir: dir.join("run"),
            ..RunConfig::default()
        }
    }

    #[test]
    fn full_run_writes_ten_row_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path());
        let report = run_pipeline(&cfg).unwrap();
        assert_eq!(report.rows.len(), 10);
        let run = RunDir::new(&cfg.out_dir);
        let txt = fs::read_to_string(run.report(ReportFormat::Txt)).unwrap();
        assert!(txt.starts_with("Imputations for age\nOriginal"), "{txt}");
        assert!(run.manifest().exists());
        assert!(run.pooled(Provenance::Crowd).exists() && run.pooled(Provenance::Machine).exists());
    }

    #[test]
    fn degenerate_single_imputation_run() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { k: 1, m: 1, ..config(dir.path()) };
        let report = run_pipeline(&cfg).unwrap();
        assert_eq!(report.a.m, 1);
        assert_eq!(report.b.m, 1);
    }

    #[test]
    fn errors_carry_stage_and_kind() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { schema: dir.path().join("nope.json"), ..config(dir.path()) };
        let err = run_pipeline(&cfg).unwrap_err();
        assert_eq!((err.stage, err.kind), (Stage::Ampute, ErrorKind::Config));
        assert!(err.to_string().starts_with("[ampute]"));
        let zero = RunConfig { k: 0, ..config(dir.path()) };
        assert_eq!(run_pipeline(&zero).unwrap_err().stage, Stage::Config);
        let fresh = RunDir::new(dir.path().join("empty"));
        assert_eq!(stage_describe(&fresh).unwrap_err().kind, ErrorKind::Config);
    }
}
