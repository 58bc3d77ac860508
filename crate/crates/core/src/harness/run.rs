use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Algorithm, ExperimentConfig, RewardMode};
use super::report::{aggregate, write_aggregate, write_csv};
use crate::deep::{Experience, NumericDqn, OrdinalDqn};
use crate::envs::{EnvKind, EnvSpec, Environment};
use crate::ordinal::{
    change_rewards, epsilon_greedy_action, greedy_action, EpsilonSchedule, RewardMap, TierMap,
};
use crate::tabular::{top_two_gap, Discretizer, NumericQTable, OrdinalQTable};
use crate::Result;

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub seed: u64,
    /// 1-based.
    pub episode: usize,
    /// Sum of the environment's own rewards.
    pub score: f64,
    pub win: bool,
    /// Present on evaluation episodes only.
    pub greedy_score: Option<f64>,
    /// Mean value margin over the states acted in.
    pub margin: Option<f64>,
    pub epsilon: f64,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTiming {
    pub seed: u64,
    pub total_ms: f64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    /// Seed-major, in the configured seed order.
    pub records: Vec<EpisodeRecord>,
    pub timings: Vec<RunTiming>,
}

// Independent random streams of one run.
const STREAM_RESET: u64 = 1;
const STREAM_EXPLORE: u64 = 2;
const STREAM_LEARN: u64 = 3;
const STREAM_EVAL_RESET: u64 = 4;
const STREAM_EVAL_TIES: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// A learner as seen by the training loop: it encodes observations, scores
/// actions and learns from raw environment rewards.
trait Agent {
    type State: Clone;

    fn encode(&self, observation: &[f64]) -> Result<Self::State>;
    fn scores(&self, state: &Self::State) -> Result<Vec<f64>>;
    fn margin(&self, scores: &[f64]) -> Result<f64>;
    fn learn(
        &mut self,
        state: Self::State,
        action: usize,
        reward: f64,
        next: Self::State,
        terminal: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<()>;
}

fn numeric_rewards(mode: RewardMode, spec: &EnvSpec) -> Result<Option<RewardMap>> {
    match mode {
        RewardMode::Standard => Ok(None),
        RewardMode::Cr => Ok(Some(change_rewards(&spec.rewards)?)),
    }
}

fn transform(map: &Option<RewardMap>, reward: f64) -> Result<f64> {
    match map {
        Some(m) => m.apply(reward),
        None => Ok(reward),
    }
}

/// Tier map over the rewards the learner receives under `mode`.
fn tiers_for(mode: RewardMode, spec: &EnvSpec) -> Result<(Option<RewardMap>, TierMap)> {
    let map = numeric_rewards(mode, spec)?;
    let received = match &map {
        Some(m) => m.changed_rewards(),
        None => spec.rewards.clone(),
    };
    Ok((map, TierMap::from_rewards(&received)?))
}

fn relative_margin(scores: &[f64]) -> Result<f64> {
    let (best, gap) = top_two_gap(scores)?;
    Ok(gap / (best.abs() + 1e-12))
}

fn discretizer(env: EnvKind) -> Discretizer {
    match env {
        EnvKind::CartPole => Discretizer::cartpole(),
        EnvKind::Acrobot => Discretizer::acrobot(),
        EnvKind::Chain => Discretizer::chain(),
    }
}

struct TabularQ {
    table: NumericQTable,
    discretizer: Discretizer,
    rewards: Option<RewardMap>,
    alpha: f64,
    gamma: f64,
}

impl Agent for TabularQ {
    type State = usize;

    fn encode(&self, observation: &[f64]) -> Result<usize> {
        self.discretizer.discretize(observation)
    }

    fn scores(&self, state: &usize) -> Result<Vec<f64>> {
        Ok(self.table.row(*state).to_vec())
    }

    fn margin(&self, scores: &[f64]) -> Result<f64> {
        relative_margin(scores)
    }

    fn learn(&mut self, s: usize, a: usize, r: f64, next: usize, terminal: bool, _: &mut ChaCha8Rng) -> Result<()> {
        let r = transform(&self.rewards, r)?;
        self.table.update(s, a, r, next, terminal, self.alpha, self.gamma)
    }
}

struct TabularOrdinal {
    table: OrdinalQTable,
    discretizer: Discretizer,
    rewards: Option<RewardMap>,
    tiers: TierMap,
    alpha: f64,
    gamma: f64,
}

impl Agent for TabularOrdinal {
    type State = usize;

    fn encode(&self, observation: &[f64]) -> Result<usize> {
        self.discretizer.discretize(observation)
    }

    fn scores(&self, state: &usize) -> Result<Vec<f64>> {
        use crate::tabular::ActionTable;
        self.table.scores(*state)
    }

    fn margin(&self, scores: &[f64]) -> Result<f64> {
        Ok(top_two_gap(scores)?.1)
    }

    fn learn(&mut self, s: usize, a: usize, r: f64, next: usize, terminal: bool, rng: &mut ChaCha8Rng) -> Result<()> {
        let tier = self.tiers.tier_of(transform(&self.rewards, r)?)?;
        self.table.step(s, a, tier, next, terminal, self.alpha, self.gamma, rng)
    }
}

struct DeepQ {
    dqn: NumericDqn,
    env: EnvKind,
    rewards: Option<RewardMap>,
}

impl Agent for DeepQ {
    type State = Vec<f64>;

    fn encode(&self, observation: &[f64]) -> Result<Vec<f64>> {
        Ok(self.env.features(observation))
    }

    fn scores(&self, state: &Vec<f64>) -> Result<Vec<f64>> {
        self.dqn.q_values(state)
    }

    fn margin(&self, scores: &[f64]) -> Result<f64> {
        relative_margin(scores)
    }

    fn learn(
        &mut self,
        state: Vec<f64>,
        action: usize,
        r: f64,
        next_state: Vec<f64>,
        terminal: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let reward = transform(&self.rewards, r)?;
        self.dqn.remember(Experience {
            state,
            action,
            reward,
            next_state,
            terminal,
        });
        if self.dqn.ready() {
            self.dqn.replay(rng)?;
        }
        Ok(())
    }
}

struct DeepOrdinal {
    dqn: OrdinalDqn,
    env: EnvKind,
    rewards: Option<RewardMap>,
    tiers: TierMap,
}

impl Agent for DeepOrdinal {
    type State = Vec<f64>;

    fn encode(&self, observation: &[f64]) -> Result<Vec<f64>> {
        Ok(self.env.features(observation))
    }

    fn scores(&self, state: &Vec<f64>) -> Result<Vec<f64>> {
        self.dqn.scores(state)
    }

    fn margin(&self, scores: &[f64]) -> Result<f64> {
        Ok(top_two_gap(scores)?.1)
    }

    fn learn(
        &mut self,
        state: Vec<f64>,
        action: usize,
        r: f64,
        next_state: Vec<f64>,
        terminal: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let reward = self.tiers.tier_of(transform(&self.rewards, r)?)?;
        self.dqn.remember(Experience {
            state,
            action,
            reward,
            next_state,
            terminal,
        });
        if self.dqn.ready() {
            self.dqn.replay(rng)?;
        }
        Ok(())
    }
}

struct EpisodeOutcome {
    score: f64,
    win: bool,
    margin: Option<f64>,
    steps: u64,
}

fn train_episode<A: Agent>(
    agent: &mut A,
    env: &mut dyn Environment,
    reset_seed: u64,
    epsilon: f64,
    explore: &mut ChaCha8Rng,
    learn: &mut ChaCha8Rng,
) -> Result<EpisodeOutcome> {
    let mut state = agent.encode(&env.reset(reset_seed))?;
    let mut score = 0.0;
    let mut margin_sum = 0.0;
    let mut steps = 0u64;
    loop {
        let scores = agent.scores(&state)?;
        margin_sum += agent.margin(&scores)?;
        let action = epsilon_greedy_action(&scores, epsilon, explore)?;
        let out = env.step(action)?;
        steps += 1;
        score += out.reward;
        let next = agent.encode(&out.next_state)?;
        agent.learn(state, action, out.reward, next.clone(), out.terminal, learn)?;
        if out.done() {
            return Ok(EpisodeOutcome {
                score,
                win: env.spec().is_win(&out),
                margin: Some(margin_sum / steps as f64),
                steps,
            });
        }
        state = next;
    }
}

/// Plays one episode with epsilon = 0 and no learning.
fn greedy_episode<A: Agent>(
    agent: &A,
    env: &mut dyn Environment,
    reset_seed: u64,
    ties: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut state = agent.encode(&env.reset(reset_seed))?;
    let mut score = 0.0;
    loop {
        let action = greedy_action(&agent.scores(&state)?, ties)?;
        let out = env.step(action)?;
        score += out.reward;
        if out.done() {
            return Ok(score);
        }
        state = agent.encode(&out.next_state)?;
    }
}

fn drive<A: Agent>(cfg: &ExperimentConfig, seed: u64, mut agent: A) -> Result<(Vec<EpisodeRecord>, RunTiming, A)> {
    let mut env = cfg.env.make();
    let mut eval_env = cfg.env.make();
    let mut reset_rng = stream(seed, STREAM_RESET);
    let mut explore = stream(seed, STREAM_EXPLORE);
    let mut learn = stream(seed, STREAM_LEARN);
    let mut eval_reset = stream(seed, STREAM_EVAL_RESET);
    let mut eval_ties = stream(seed, STREAM_EVAL_TIES);
    let schedule = EpsilonSchedule::new(cfg.episodes, cfg.hyper.epsilon_floor)?;
    let interval = cfg.eval_interval();
    let mut records = Vec::with_capacity(cfg.episodes);
    let mut timing = RunTiming {
        seed,
        total_ms: 0.0,
        steps: 0,
    };
    for e in 0..cfg.episodes {
        let epsilon = schedule.epsilon_at(e);
        let started = Instant::now();
        let outcome = train_episode(&mut agent, env.as_mut(), reset_rng.gen(), epsilon, &mut explore, &mut learn)?;
        let ms = started.elapsed().as_secs_f64() * 1000.0;
        timing.total_ms += ms;
        timing.steps += outcome.steps;
        let greedy_score = if (e + 1) % interval == 0 {
            Some(greedy_episode(&agent, eval_env.as_mut(), eval_reset.gen(), &mut eval_ties)?)
        } else {
            None
        };
        records.push(EpisodeRecord {
            seed,
            episode: e + 1,
            score: outcome.score,
            win: outcome.win,
            greedy_score,
            margin: outcome.margin,
            epsilon,
            wall_ms: cfg.timing.then_some(ms),
        });
    }
    Ok((records, timing, agent))
}

/// A learner after training.
pub enum TrainedLearner {
    Q(NumericQTable),
    OrdinalQ(OrdinalQTable),
    Dqn(NumericDqn),
    OrdinalDqn(OrdinalDqn),
}

/// Trains one seed of `cfg` from scratch and returns the learner as well.
pub fn train_seed(cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<EpisodeRecord>, RunTiming, TrainedLearner)> {
    cfg.validate()?;
    let env = cfg.env.make();
    let spec = env.spec().clone();
    let h = &cfg.hyper;
    match cfg.algo {
        Algorithm::Q => {
            let discretizer = discretizer(cfg.env);
            let agent = TabularQ {
                table: NumericQTable::new(discretizer.state_count(), spec.action_count),
                discretizer,
                rewards: numeric_rewards(cfg.reward, &spec)?,
                alpha: h.alpha,
                gamma: h.gamma,
            };
            let (r, t, a) = drive(cfg, seed, agent)?;
            Ok((r, t, TrainedLearner::Q(a.table)))
        }
        Algorithm::OrdinalQ => {
            let discretizer = discretizer(cfg.env);
            let (rewards, tiers) = tiers_for(cfg.reward, &spec)?;
            let agent = TabularOrdinal {
                table: OrdinalQTable::new(discretizer.state_count(), spec.action_count, tiers.tiers()),
                discretizer,
                rewards,
                tiers,
                alpha: h.alpha,
                gamma: h.gamma,
            };
            let (r, t, a) = drive(cfg, seed, agent)?;
            Ok((r, t, TrainedLearner::OrdinalQ(a.table)))
        }
        Algorithm::Dqn => {
            let agent = DeepQ {
                dqn: NumericDqn::new(cfg.env.feature_dim(), spec.action_count, h.dqn_config(), seed)?,
                env: cfg.env,
                rewards: numeric_rewards(cfg.reward, &spec)?,
            };
            let (r, t, a) = drive(cfg, seed, agent)?;
            Ok((r, t, TrainedLearner::Dqn(a.dqn)))
        }
        Algorithm::OrdinalDqn => {
            let (rewards, tiers) = tiers_for(cfg.reward, &spec)?;
            let agent = DeepOrdinal {
                dqn: OrdinalDqn::new(
                    cfg.env.feature_dim(),
                    spec.action_count,
                    tiers.tiers(),
                    h.dqn_config(),
                    seed,
                )?,
                env: cfg.env,
                rewards,
                tiers,
            };
            let (r, t, a) = drive(cfg, seed, agent)?;
            Ok((r, t, TrainedLearner::OrdinalDqn(a.dqn)))
        }
    }
}

/// Trains one seed of `cfg` from scratch.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<EpisodeRecord>, RunTiming)> {
    let (records, timing, _) = train_seed(cfg, seed)?;
    Ok((records, timing))
}

/// Runs every seed (in parallel) and merges the results in seed order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let runs: Vec<_> = cfg
        .seeds()
        .into_par_iter()
        .map(|seed| run_seed(cfg, seed))
        .collect::<Result<_>>()?;
    let mut out = ExperimentOutput {
        records: Vec::new(),
        timings: Vec::new(),
    };
    for (records, timing) in runs {
        out.records.extend(records);
        out.timings.push(timing);
    }
    Ok(out)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

/// Writes the metrics CSV to `path`, the resolved configuration to
/// `<path>.cfg` and per-episode means across seeds to `<path>.agg.csv`.
pub fn write_outputs(cfg: &ExperimentConfig, output: &ExperimentOutput, path: &Path) -> Result<Vec<PathBuf>> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(&output.records, &mut w)?;
    w.flush()?;

    let cfg_path = with_suffix(path, ".cfg");
    let mut text = cfg.to_text();
    for t in &output.timings {
        if cfg.timing {
            text.push_str(&format!("# seed {} wall_ms {} steps {}\n", t.seed, t.total_ms, t.steps));
        } else {
            text.push_str(&format!("# seed {} steps {}\n", t.seed, t.steps));
        }
    }
    std::fs::write(&cfg_path, text)?;

    let agg_path = with_suffix(path, ".agg.csv");
    let mut w = BufWriter::new(File::create(&agg_path)?);
    write_aggregate(&aggregate(&output.records)?, &mut w)?;
    w.flush()?;
    Ok(vec![path.to_path_buf(), cfg_path, agg_path])
}
