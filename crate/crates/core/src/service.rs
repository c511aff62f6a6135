//! Judgment store behind the survey HTTP service.
//!
//! All writes go through [`SurveyStore::submit`], which holds one lock while it
//! checks capacity and worker uniqueness, appends the judgment to the
//! JSON-lines log and bumps the per-question counter. Status reads only load
//! atomics. Worker uniqueness is keyed on the self-reported contributor id,
//! which a respondent can spoof.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::crowd::{Judgment, JudgmentSet};
use crate::dataset::Value;
use crate::questionnaire::{AnswerConstraint, Questionnaire};

pub const JOB_FILE: &str = "job.json";
pub const QUESTIONNAIRE_DIR: &str = "questionnaires";
pub const JUDGMENT_LOG: &str = "judgments.jsonl";

pub const REASON_DUPLICATE: &str = "duplicate worker";
pub const REASON_FILLED: &str = "filled";

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown questionnaire '{0}'")]
    UnknownQuestionnaire(String),
    #[error("unknown job '{0}'")]
    UnknownJob(String),
    #[error("malformed submission: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid job: {0}")]
    InvalidJob(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Validation {
    Accepted(Value),
    Rejected(String),
}

impl Validation {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Validation::Accepted(_))
    }
}

/// Checks a raw answer against a constraint. Never fails; rejections carry a
/// reason meant to be shown to the respondent.
pub fn validate(answer: &str, c: &AnswerConstraint) -> Validation {
    match c.check(answer) {
        Ok(v) => Validation::Accepted(v),
        Err(reason) => Validation::Rejected(reason),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub questionnaire_ids: Vec<String>,
    pub k: usize,
    /// Milliseconds since the Unix epoch.
    pub created: u64,
}

/// A submitted answer: JSON strings and numbers are both accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RawAnswer {
    Text(String),
    Number(f64),
}

impl RawAnswer {
    pub fn as_text(&self) -> String {
        match self {
            RawAnswer::Text(t) => t.clone(),
            RawAnswer::Number(x) => x.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub questionnaire_id: String,
    pub worker_id: String,
    pub answers: BTreeMap<String, RawAnswer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionOutcome {
    pub question_id: String,
    pub status: OutcomeStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionState {
    Open,
    Filled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionStatus {
    pub question_id: String,
    pub questionnaire_id: String,
    pub accepted: usize,
    pub state: QuestionState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: String,
    pub k: usize,
    pub questions: Vec<QuestionStatus>,
    pub accepted_total: usize,
    pub required_total: usize,
    /// `accepted_total / required_total`, in `[0, 1]`.
    pub progress: f64,
}

struct WriteState {
    workers: HashMap<String, HashSet<String>>,
    judgments: Vec<Judgment>,
    log: Option<BufWriter<File>>,
}

pub struct SurveyStore {
    job: Job,
    questionnaires: BTreeMap<String, Questionnaire>,
    /// question id -> (questionnaire id, position in questionnaire)
    index: BTreeMap<String, (String, usize)>,
    counts: BTreeMap<String, AtomicUsize>,
    state: Mutex<WriteState>,
}

pub fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl SurveyStore {
    /// Store without persistence.
    pub fn in_memory(job: Job, questionnaires: Vec<Questionnaire>) -> Result<Self, ServiceError> {
        Self::build(job, questionnaires, None)
    }

    fn build(job: Job, questionnaires: Vec<Questionnaire>, log: Option<BufWriter<File>>) -> Result<Self, ServiceError> {
        if job.k == 0 {
            return Err(ServiceError::InvalidJob("k must be at least 1".into()));
        }
        let mut by_id = BTreeMap::new();
        let mut index = BTreeMap::new();
        let mut counts = BTreeMap::new();
        for qn in questionnaires {
            for (i, q) in qn.questions.iter().enumerate() {
                if index.insert(q.id.clone(), (qn.id.clone(), i)).is_some() {
                    return Err(ServiceError::InvalidJob(format!("question id '{}' used twice", q.id)));
                }
                counts.insert(q.id.clone(), AtomicUsize::new(0));
            }
            by_id.insert(qn.id.clone(), qn);
        }
        for id in &job.questionnaire_ids {
            if !by_id.contains_key(id) {
                return Err(ServiceError::UnknownQuestionnaire(id.clone()));
            }
        }
        Ok(Self {
            job,
            questionnaires: by_id,
            index,
            counts,
            state: Mutex::new(WriteState { workers: HashMap::new(), judgments: Vec::new(), log }),
        })
    }

    /// Loads `job.json` and `questionnaires/*.json` from `data_dir`, replays
    /// `judgments.jsonl` and keeps appending to it.
    pub fn open(data_dir: impl AsRef<Path>, k_override: Option<usize>) -> Result<Self, ServiceError> {
        let dir = data_dir.as_ref();
        let mut job: Job = serde_json::from_reader(File::open(dir.join(JOB_FILE))?)?;
        if let Some(k) = k_override {
            job.k = k;
        }
        let questionnaires = job
            .questionnaire_ids
            .iter()
            .map(|id| Ok(Questionnaire::load(questionnaire_path(dir, id))?))
            .collect::<Result<Vec<_>, ServiceError>>()?;
        let log_path = dir.join(JUDGMENT_LOG);
        let previous = if log_path.exists() {
            JudgmentSet::read_jsonl(BufReader::new(File::open(&log_path)?))
                .map_err(|e| ServiceError::InvalidJob(e.to_string()))?
        } else {
            JudgmentSet::default()
        };
        let store = Self::build(job, questionnaires, None)?;
        store.replay(previous.iter().cloned());
        let log = OpenOptions::new().create(true).append(true).open(log_path)?;
        store.state.lock().log = Some(BufWriter::new(log));
        Ok(store)
    }

    /// Rebuilds counters from logged judgments, applying the same admission
    /// rules as live submissions. Entries that would now be refused (over
    /// capacity, duplicate, failing validation) are kept as rejected.
    pub fn replay(&self, judgments: impl IntoIterator<Item = Judgment>) {
        let mut state = self.state.lock();
        for mut j in judgments {
            if j.accepted {
                let admissible = self.constraint(&j.question_id).is_some_and(|c| c.check(&j.raw_answer).is_ok())
                    && self.count(&j.question_id) < self.job.k
                    && !state.workers.get(&j.question_id).is_some_and(|w| w.contains(&j.worker_id));
                if admissible {
                    state.workers.entry(j.question_id.clone()).or_default().insert(j.worker_id.clone());
                    self.counts[&j.question_id].fetch_add(1, Ordering::SeqCst);
                } else {
                    log::warn!("replay: dropping inadmissible judgment for '{}'", j.question_id);
                    j.accepted = false;
                }
            }
            state.judgments.push(j);
        }
    }

    pub fn job(&self) -> &Job {
        &self.job
    }

    pub fn questionnaire(&self, id: &str) -> Result<&Questionnaire, ServiceError> {
        self.questionnaires.get(id).ok_or_else(|| ServiceError::UnknownQuestionnaire(id.to_string()))
    }

    fn constraint(&self, question_id: &str) -> Option<&AnswerConstraint> {
        let (qn, i) = self.index.get(question_id)?;
        Some(&self.questionnaires[qn].questions[*i].constraint)
    }

    fn count(&self, question_id: &str) -> usize {
        self.counts.get(question_id).map_or(0, |c| c.load(Ordering::SeqCst))
    }

    /// Validates and stores each answer. Outcomes are returned in question-id
    /// order.
    pub fn submit(&self, s: &Submission) -> Result<Vec<QuestionOutcome>, ServiceError> {
        let qn = self.questionnaire(&s.questionnaire_id)?;
        let worker = s.worker_id.trim();
        if worker.is_empty() {
            return Err(ServiceError::Malformed("worker_id must not be empty".into()));
        }
        if s.answers.is_empty() {
            return Err(ServiceError::Malformed("no answers".into()));
        }
        for qid in s.answers.keys() {
            if qn.question(qid).is_none() {
                return Err(ServiceError::Malformed(format!(
                    "question '{qid}' is not part of questionnaire '{}'",
                    qn.id
                )));
            }
        }

        let mut state = self.state.lock();
        let mut outcomes = Vec::with_capacity(s.answers.len());
        for (qid, raw) in &s.answers {
            let raw_answer = raw.as_text();
            let counter = &self.counts[qid];
            let verdict = if counter.load(Ordering::SeqCst) >= self.job.k {
                Validation::Rejected(REASON_FILLED.into())
            } else if state.workers.get(qid).is_some_and(|w| w.contains(worker)) {
                Validation::Rejected(REASON_DUPLICATE.into())
            } else {
                validate(&raw_answer, &qn.question(qid).expect("checked above").constraint)
            };
            let judgment = Judgment {
                question_id: qid.clone(),
                worker_id: worker.to_string(),
                raw_answer,
                accepted: verdict.is_accepted(),
                timestamp: now_millis(),
                reason: match &verdict {
                    Validation::Rejected(r) => Some(r.clone()),
                    Validation::Accepted(_) => None,
                },
            };
            if let Some(log) = state.log.as_mut() {
                serde_json::to_writer(&mut *log, &judgment)?;
                log.write_all(b"\n")?;
                log.flush()?;
            }
            if judgment.accepted {
                state.workers.entry(qid.clone()).or_default().insert(worker.to_string());
                counter.fetch_add(1, Ordering::SeqCst);
            }
            outcomes.push(QuestionOutcome {
                question_id: qid.clone(),
                status: if judgment.accepted { OutcomeStatus::Accepted } else { OutcomeStatus::Rejected },
                reason: judgment.reason.clone(),
            });
            state.judgments.push(judgment);
        }
        Ok(outcomes)
    }

    pub fn job_status(&self, job_id: &str) -> Result<JobStatus, ServiceError> {
        if job_id != self.job.id {
            return Err(ServiceError::UnknownJob(job_id.to_string()));
        }
        let k = self.job.k;
        let mut questions = Vec::new();
        for qn_id in &self.job.questionnaire_ids {
            for q in &self.questionnaires[qn_id].questions {
                let accepted = self.count(&q.id);
                questions.push(QuestionStatus {
                    question_id: q.id.clone(),
                    questionnaire_id: qn_id.clone(),
                    accepted,
                    state: if accepted >= k { QuestionState::Filled } else { QuestionState::Open },
                });
            }
        }
        let accepted_total: usize = questions.iter().map(|q| q.accepted).sum();
        let required_total = k * questions.len();
        let progress = if required_total == 0 { 1.0 } else { accepted_total as f64 / required_total as f64 };
        Ok(JobStatus { job_id: self.job.id.clone(), k, questions, accepted_total, required_total, progress })
    }

    /// Every stored judgment, accepted and rejected.
    pub fn judgments(&self) -> JudgmentSet {
        let state = self.state.lock();
        let mut set = JudgmentSet::default();
        for j in &state.judgments {
            set.push(j.clone());
        }
        set
    }
}

pub fn questionnaire_path(data_dir: &Path, id: &str) -> PathBuf {
    data_dir.join(QUESTIONNAIRE_DIR).join(format!("{id}.json"))
}

/// Writes `job.json` and one file per questionnaire under `data_dir`.
pub fn write_job(data_dir: impl AsRef<Path>, job: &Job, questionnaires: &[Questionnaire]) -> Result<(), ServiceError> {
    let dir = data_dir.as_ref();
    fs::create_dir_all(dir.join(QUESTIONNAIRE_DIR))?;
    for qn in questionnaires {
        qn.save(questionnaire_path(dir, &qn.id))?;
    }
    let mut text = serde_json::to_string_pretty(job)?;
    text.push('\n');
    fs::write(dir.join(JOB_FILE), text)?;
    Ok(())
}

/// Job over `questionnaires`. `created` is milliseconds since the Unix epoch;
/// pass [`now_millis`] for live jobs or a fixed value for reproducible files.
pub fn new_job(id: impl Into<String>, questionnaires: &[Questionnaire], k: usize, created: u64) -> Job {
    Job { id: id.into(), questionnaire_ids: questionnaires.iter().map(|q| q.id.clone()).collect(), k, created }
}
