//! Multiple imputation by crowd judgments and by chained equations.
//!
//! The pipeline turns rows with missing cells into short survey questionnaires,
//! collects `k` judgments per missing cell (from simulated personas or from
//! real respondents through [`service`]), and pools them as multiple
//! imputations next to a MICE/PMM machine baseline.
//!
//! Symbol conventions: `m` is the number of imputations, `k_d` the PMM donor
//! pool size and `k` the number of judgments per question.

pub mod crowd;
pub mod dataset;
pub mod imputation;
pub mod mice;
pub mod pipeline;
pub mod pooling;
pub mod questionnaire;
pub mod rng;
pub mod service;
pub mod stats;
pub mod summary;
pub mod synth;

pub use crowd::{Judgment, JudgmentSet, Persona, PersonaMix};
pub use dataset::{ColumnKind, ColumnSpec, Dataset, GroundTruth, Value};
pub use imputation::{ImputationSet, Provenance};
pub use pooling::{EvaluationReport, PooledCellSummary};
pub use questionnaire::{AnswerConstraint, PlotSpec, Question, Questionnaire};
pub use summary::SummaryStats;
