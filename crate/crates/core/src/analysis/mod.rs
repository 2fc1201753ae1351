//! Normality gate, Pearson correlation with significance, and study
//! pipelines over session sets.

pub mod correlation;
pub mod distributions;
pub mod shapiro;
pub mod study;

pub use correlation::{correlate, pearson, pearson_p, CorrelationResult, DEFAULT_ALPHA};
pub use shapiro::{shapiro_wilk, NormalityResult};
pub use study::{
    correlation_study, default_pairs, load_session, low_attention_summary, state_comparison, SessionVariables,
    StateRow, StudyReport,
};
