//! Training-data curation: difficulty filtering, trace validation,
//! decontamination, diversity sampling and SFT formatting.
//!
//! Every stage returns a [`StageRow`] of per-source counts so a run can be
//! audited end to end through a [`CurationReport`].

mod annotate;
mod decontam;
mod difficulty;
mod report;
mod sample;
mod sft;
mod traces;

pub use annotate::{annotate_domains, Lexicon, UNLABELED};
pub use decontam::{
    decontaminate, deduplicate, normalize, remove_eval_overlap, DecontamConfig, EvalIndex,
    DEFAULT_NGRAM, STAGE_NAME as DECONTAM_STAGE,
};
pub use difficulty::{
    difficulty_filter, filter_by_verdicts, grade_pool, GradeOptions, VerdictRow,
    STAGE_NAME as DIFFICULTY_STAGE,
};
pub use report::{CurationReport, ReportError, StageKind, StageRow, COLLECTION_STAGE};
pub use sample::{
    diversity_sample, SampleError, SampleOutcome, SamplingPlan, RNG_ALGORITHM,
    STAGE_NAME as SAMPLE_STAGE,
};
pub use sft::{format_sft_example, parse_sft_example, SftError, SftExample};
pub use traces::{
    generate_traces, validate_traces, TraceOptions, TraceRecord, STAGE_NAME as TRACES_STAGE,
};
