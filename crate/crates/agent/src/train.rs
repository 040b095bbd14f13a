//! Candidate scoring, episodes and the training loop.

use std::path::Path;

use serde::{Deserialize, Serialize};
use spider_core::{sampling, Error, GridGeometry, Reconstructor, Result};
use spider_env::{EnvState, Environment, EpisodeLog, StepResult};
use spider_nn::{Adam, AdamConfig, ParamStore};

use crate::candidates::{candidate_subset_with_eta, eta, CandidateSet};
use crate::config::AgentConfig;
use crate::net::{AgentNet, PseudoAction};

/// Trained pseudo-action network plus the settings it was trained with.
#[derive(Debug, Clone)]
pub struct Agent {
    pub config: AgentConfig,
    pub net: AgentNet,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: AgentConfig,
    rows: usize,
    cols: usize,
}

impl Agent {
    pub fn new(geometry: GridGeometry, config: AgentConfig) -> Result<Self> {
        config.validate(geometry)?;
        let net = AgentNet::new(geometry, config.net, config.prev_actions_len, config.seed)?;
        Ok(Self { config, net })
    }

    pub fn geometry(&self) -> GridGeometry {
        self.net.geometry
    }

    pub fn pseudo_action(&self, state: &EnvState) -> Result<PseudoAction> {
        crate::net::pseudo_action(&self.net, state.current(), state.time_features, &state.selected)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let g = self.geometry();
        let m = Manifest { config: self.config.clone(), rows: g.rows, cols: g.cols };
        let text = toml::to_string(&m).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(dir.join("manifest.toml"), text)?;
        self.net.params.save(&dir.join("params"))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.toml");
        let text = std::fs::read_to_string(&path)?;
        let m: Manifest = toml::from_str(&text).map_err(|e| Error::Format { path, message: e.to_string() })?;
        let mut agent = Self::new(GridGeometry::new(m.rows, m.cols)?, m.config)?;
        let params = ParamStore::load(&dir.join("params"))?;
        agent.net.params.check_layout(&params)?;
        agent.net.params = params;
        Ok(agent)
    }
}

fn score_candidates<R: Reconstructor>(env: &Environment<R>, state: &EnvState, candidates: &CandidateSet) -> Result<(usize, Vec<f64>, StepResult)> {
    if candidates.cells.is_empty() {
        return Err(Error::EmptyInput("no candidate actions to score".into()));
    }
    let mut maes = Vec::with_capacity(candidates.cells.len());
    let mut best: Option<(usize, StepResult)> = None;
    for &c in &candidates.cells {
        let r = env.step(state, c)?;
        maes.push(r.info.mae);
        let better = match &best {
            None => true,
            Some((b, br)) => r.info.mae < br.info.mae || (r.info.mae == br.info.mae && c < *b),
        };
        if better {
            best = Some((c, r));
        }
    }
    let (cell, result) = best.expect("non-empty");
    Ok((cell, maes, result))
}

/// Scores every candidate by the reconstruction MAE after revealing it and
/// returns the argmin (ties to the lowest cell index) with all scores in
/// candidate order. `state` is not modified.
pub fn select_action<R: Reconstructor>(env: &Environment<R>, state: &EnvState, candidates: &CandidateSet) -> Result<(usize, Vec<f64>)> {
    score_candidates(env, state, candidates).map(|(c, m, _)| (c, m))
}

/// Squared distance between the unclamped output and the chosen cell's
/// center is the regression loss; an optimizer step is taken when given.
fn play<R: Reconstructor>(env: &Environment<R>, agent: &mut Agent, mut state: EnvState, seed: u64, mut learn: Option<(&mut Adam, f64)>) -> Result<(EpisodeLog, EnvState, f64)> {
    let g = agent.geometry();
    let t = state.t;
    let (mut actions, mut rewards) = (Vec::new(), Vec::new());
    let mut loss_sum = 0.0;
    loop {
        let trace = agent.net.forward(state.current(), state.time_features, &state.selected)?;
        let a_hat = agent.net.clamp(trace.raw);
        let available = env.action_space(&state);
        // outside training the schedule sits at its limit
        let n_random = eta(agent.config.k, learn.as_ref().map_or(f64::INFINITY, |(_, x)| *x));
        let step_seed = sampling::derive_seed(seed, actions.len() as u64);
        let candidates = candidate_subset_with_eta(g, a_hat, &available, agent.config.k, n_random, step_seed);
        let (chosen, _, result) = score_candidates(env, &state, &candidates)?;
        if let Some((adam, _)) = learn.as_mut() {
            let (r, c) = g.center(chosen);
            let mut grads = agent.net.params.zero_grads();
            loss_sum += agent.net.backward(&mut grads, &trace, [r, c]);
            adam.step(&mut agent.net.params, &grads);
        }
        actions.push(chosen);
        rewards.push(result.reward);
        state = result.next_state;
        if result.done {
            let log = EpisodeLog {
                t,
                final_selection: state.current().mask.clone(),
                final_mae: result.info.mae,
                truncated: result.truncated,
                actions,
                rewards,
            };
            let mean_loss = loss_sum / log.actions.len() as f64;
            return Ok((log, state, mean_loss));
        }
    }
}

/// Runs one episode without learning. Candidates mix nearest and random
/// cells at the limit of the exploration schedule, round(0.1·k) random.
pub fn run_episode<R: Reconstructor>(env: &Environment<R>, agent: &Agent, t: i64, seed: u64) -> Result<(EpisodeLog, EnvState)> {
    let state = env.reset(t, seed)?;
    let mut agent = agent.clone();
    play(env, &mut agent, state, seed, None).map(|(log, s, _)| (log, s))
}

/// Per-epoch training summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentEpoch {
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_iterations: f64,
    pub mean_final_mae: f64,
}

/// Trains the pseudo-action network on every timestamp of `env`, in order,
/// for `config.epochs` epochs. The environment's reconstructor is only read.
/// Finalized frames are committed as history within an epoch and cleared
/// between epochs. Returns the agent, the final epoch's episode logs and
/// per-epoch summaries.
pub fn train_agent<R: Reconstructor>(env: &mut Environment<R>, config: &AgentConfig) -> Result<(Agent, Vec<EpisodeLog>, Vec<AgentEpoch>)> {
    let mut agent = Agent::new(env.config().geometry, config.clone())?;
    let timestamps = env.timestamps();
    if timestamps.is_empty() {
        return Err(Error::EmptyInput("training series has no timestamps".into()));
    }
    let mut adam = Adam::new(AdamConfig { learning_rate: config.learning_rate, ..AdamConfig::default() }, &agent.net.params);
    let mut episodes = 0usize;
    let mut logs = Vec::new();
    let mut history = Vec::new();
    for epoch in 0..config.epochs {
        env.clear_history();
        logs.clear();
        let mut loss = 0.0;
        for &t in &timestamps {
            let seed = sampling::derive_seed(config.seed, (epoch * timestamps.len()) as u64 + (t - timestamps[0]) as u64);
            let state = env.reset(t, seed)?;
            let x = episodes as f64 * config.x_scale;
            let (log, final_state, l) = play(env, &mut agent, state, seed, Some((&mut adam, x)))?;
            if !agent.net.params.all_finite() {
                return Err(Error::Domain(format!("agent parameters diverged at epoch {epoch}, t={t}")));
            }
            env.commit(&final_state);
            episodes += 1;
            loss += l;
            logs.push(log);
        }
        let n = logs.len() as f64;
        let summary = AgentEpoch {
            epoch,
            mean_loss: loss / n,
            mean_iterations: logs.iter().map(|l| l.iterations() as f64).sum::<f64>() / n,
            mean_final_mae: logs.iter().map(|l| l.final_mae).sum::<f64>() / n,
        };
        log::info!("agent epoch {epoch}: loss {:.4} iterations {:.1} mae {:.4}", summary.mean_loss, summary.mean_iterations, summary.mean_final_mae);
        history.push(summary);
    }
    Ok((agent, logs, history))
}
