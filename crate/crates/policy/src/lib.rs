//! One-shot cell selection: a network that predicts the whole selection
//! matrix for a timestamp from past sparse frames, plus the online
//! evaluator shared with the baseline strategies.

mod eval;
mod net;

pub use eval::{evaluate_selector, summarize, BucketSummary, EvalRecord, EvalReport, Selector};
pub use net::{bce, binarize, policy_predict, policy_train, PolicyConfig, PolicyHistory, PolicyHyper, PolicyNet};

use spider_core::data::DatasetSeries;
use spider_core::{BucketConfig, Reconstructor, Result};

/// Evaluates the policy network over the normalized test series.
pub fn policy_evaluate<R: Reconstructor + ?Sized>(net: &PolicyNet, truth: &DatasetSeries, reconstructor: &R, buckets: &BucketConfig) -> Result<EvalReport> {
    evaluate_selector(net, truth, reconstructor, net.config.net.window_frames, buckets)
}
