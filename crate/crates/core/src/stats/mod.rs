//! Reader-study analysis: paired non-inferiority and inter-rater agreement.

pub mod agreement;
pub mod inference;
pub mod report;
pub mod table;

pub use agreement::{
    brennan_prediger, brennan_prediger_table, contingency, gwet_ac2, gwet_ac2_table, kendall_w, opa, opa_table, Weights,
};
pub use inference::{
    bootstrap_ci, bootstrap_stat, ni_decision, paired_t, pivot_mean, quantile_sorted, t_interval, Alternative, NiConfig,
    NiResult, NiVerdict, TTest,
};
pub use report::{analyze, write_stats_report, AgreementRow, ContingencyTable, NiRow, StatsConfig, StatsReport};
pub use table::{paired_differences, Endpoint, ScoreRow, ScoreTable, Workflow, SCORE_MAX, SCORE_MIN};
