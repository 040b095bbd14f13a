//! The sampling agent: a pseudo-action network proposes a continuous grid
//! position, nearby and random cells form a candidate subset, and the frozen
//! reconstructor picks the candidate that lowers the error most. The network
//! is regressed toward each chosen cell, and finished episodes become
//! labeled data for the one-shot policy network.

pub mod candidates;
pub mod config;
pub mod dataset;
pub mod net;
pub mod train;

pub use candidates::{candidate_subset, candidate_subset_with_eta, eta, nearest, CandidateSet};
pub use config::AgentConfig;
pub use dataset::{export_selection_dataset, history_window, read_selection_dataset, write_selection_dataset, SelectionDataset, SelectionSample};
pub use net::{pseudo_action, AgentNet, AgentNetConfig, NetTrace, PseudoAction};
pub use train::{run_episode, select_action, train_agent, Agent, AgentEpoch};
