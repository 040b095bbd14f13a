//! Experiment tooling: FLOP accounting, baseline selection strategies,
//! sampling-rate gain curves, reports and the `spider` command line.

pub mod baselines;
pub mod cli;
pub mod flops;
pub mod gain;
pub mod report;

pub use baselines::{
    build_budget_table, build_frequency_matrix, build_historical_budget, historical_baseline, random_baseline, random_budget, Budget, BudgetEntry, BudgetTable, FrequencyEntry,
    FrequencyMatrix, HistoricalStrategy, RandomStrategy, BUDGET_MASKS, BUDGET_MAX_ITERATIONS,
};
pub use flops::{count_flops, layer_flops, linear_fit};
pub use gain::{choose_threshold, gain_curve, gains, GainPoint};
pub use report::{ExperimentReport, ReportRow};
