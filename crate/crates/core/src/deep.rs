//! Replay-based deep learners: a numeric Double DQN and the ordinal DQN,
//! which keeps one distribution network (with its own target copy) per
//! action.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use ndarray::{Array2, Axis};
use rand::Rng;

use crate::neural::{AdamState, Mlp};
use crate::ordinal::{
    clamp_mass, epsilon_greedy_action, greedy_action, normalize_clamped, superiority_scores,
    OrdinalTier, ProbabilityVector,
};
use crate::tabular::top_two_gap;
use crate::{Error, Result};

/// One stored transition. `R` is a numeric reward or an [`OrdinalTier`].
#[derive(Debug, Clone, PartialEq)]
pub struct Experience<R> {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: R,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity memory; pushing into a full buffer evicts the oldest entry.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<R> {
    capacity: usize,
    items: VecDeque<Experience<R>>,
}

impl<R> ReplayBuffer<R> {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            items: VecDeque::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, e: Experience<R>) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience<R>> {
        self.items.iter()
    }

    /// Indices of a uniform sample without replacement of
    /// `min(batch, len)` entries.
    pub fn sample_indices<G: Rng + ?Sized>(&self, batch: usize, rng: &mut G) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let amount = batch.min(self.items.len());
        Ok(rand::seq::index::sample(rng, self.items.len(), amount).into_vec())
    }

    pub fn sample<G: Rng + ?Sized>(&self, batch: usize, rng: &mut G) -> Result<Vec<&Experience<R>>> {
        Ok(self
            .sample_indices(batch, rng)?
            .into_iter()
            .map(|i| &self.items[i])
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub gamma: f64,
    pub memory: usize,
    pub batch: usize,
    /// Batch updates between target-network syncs.
    pub sync_period: u64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            learning_rate: 0.0005,
            gamma: 0.9,
            memory: 200_000,
            batch: 64,
            sync_period: 300,
        }
    }
}

impl DqnConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::OutOfRange {
                name: "gamma",
                value: self.gamma,
            });
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::OutOfRange {
                name: "learning rate",
                value: self.learning_rate,
            });
        }
        if self.batch == 0 || self.memory == 0 || self.sync_period == 0 {
            return Err(Error::ZeroSize);
        }
        Ok(())
    }
}

fn stack<'a>(rows: impl Iterator<Item = &'a [f64]>, width: usize) -> Result<Array2<f64>> {
    let mut data = Vec::new();
    let mut count = 0;
    for r in rows {
        if r.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                got: r.len(),
            });
        }
        data.extend_from_slice(r);
        count += 1;
    }
    Array2::from_shape_vec((count, width), data).map_err(|_| Error::NonFinite)
}

fn check_state(state: &[f64], dim: usize) -> Result<()> {
    if state.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: state.len(),
        });
    }
    Ok(())
}

fn network_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index as u64 + 1)
}

/// Relative gap between the best two values, as for the numeric Q-table.
fn relative_margin(values: &[f64]) -> Result<f64> {
    let (best, gap) = top_two_gap(values)?;
    Ok(gap / (best.abs() + 1e-12))
}

/// Role of a network inside a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Eval,
    Target,
}

impl Role {
    fn as_str(self) -> &'static str {
        match self {
            Role::Eval => "eval",
            Role::Target => "target",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    /// `None` for the single numeric network covering all actions.
    pub action: Option<usize>,
    pub role: Role,
    pub net: Mlp,
}

fn write_entry<W: Write>(w: &mut W, action: Option<usize>, role: Role, net: &Mlp) -> Result<()> {
    match action {
        Some(a) => writeln!(w, "action={a} role={}", role.as_str())?,
        None => writeln!(w, "action=all role={}", role.as_str())?,
    }
    net.write_to(w)
}

/// Reads every `action=<i> role=<eval|target>` manifest line and the
/// network record that follows it.
pub fn read_checkpoint<R: BufRead>(r: &mut R) -> Result<Vec<CheckpointEntry>> {
    let mut out = Vec::new();
    loop {
        let mut line = Vec::new();
        if r.read_until(b'\n', &mut line)? == 0 {
            return Ok(out);
        }
        let text = String::from_utf8(line).map_err(|_| Error::Checkpoint("manifest not utf-8".into()))?;
        let mut action = None;
        let mut role = None;
        for field in text.trim_end().split(' ') {
            match field.split_once('=') {
                Some(("action", "all")) => action = Some(None),
                Some(("action", v)) => {
                    action = Some(Some(v.parse::<usize>().map_err(|_| {
                        Error::Checkpoint(format!("bad action '{v}'"))
                    })?))
                }
                Some(("role", "eval")) => role = Some(Role::Eval),
                Some(("role", "target")) => role = Some(Role::Target),
                _ => return Err(Error::Checkpoint(format!("bad manifest '{}'", text.trim_end()))),
            }
        }
        let (Some(action), Some(role)) = (action, role) else {
            return Err(Error::Checkpoint(format!("incomplete manifest '{}'", text.trim_end())));
        };
        let net = Mlp::read_from(r)?;
        out.push(CheckpointEntry { action, role, net });
    }
}

/// Double DQN with one network emitting a Q-value per action.
#[derive(Debug, Clone)]
pub struct NumericDqn {
    eval: Mlp,
    target: Mlp,
    adam: AdamState,
    buffer: ReplayBuffer<f64>,
    actions: usize,
    fits: u64,
    config: DqnConfig,
}

impl NumericDqn {
    pub fn new(input: usize, actions: usize, config: DqnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let eval = Mlp::new(input, &config.hidden, actions, network_seed(seed, 0))?;
        let target = eval.clone();
        let adam = AdamState::new(&eval, config.learning_rate);
        Ok(Self {
            eval,
            target,
            adam,
            buffer: ReplayBuffer::new(config.memory),
            actions,
            fits: 0,
            config,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn eval_net(&self) -> &Mlp {
        &self.eval
    }

    pub fn target_net(&self) -> &Mlp {
        &self.target
    }

    /// Replaces both networks, e.g. with hand-set parameters.
    pub fn set_networks(&mut self, eval: Mlp, target: Mlp) -> Result<()> {
        if !eval.same_architecture(&self.eval) || !target.same_architecture(&self.eval) {
            return Err(Error::ArchitectureMismatch);
        }
        self.eval = eval;
        self.target = target;
        Ok(())
    }

    pub fn buffer(&self) -> &ReplayBuffer<f64> {
        &self.buffer
    }

    pub fn fit_count(&self) -> u64 {
        self.fits
    }

    pub fn remember(&mut self, e: Experience<f64>) {
        self.buffer.push(e);
    }

    /// Warm-up is over once the buffer holds a full batch.
    pub fn ready(&self) -> bool {
        self.buffer.len() >= self.config.batch
    }

    pub fn q_values(&self, state: &[f64]) -> Result<Vec<f64>> {
        check_state(state, self.eval.input_dim())?;
        self.eval.forward(state)
    }

    pub fn act<G: Rng + ?Sized>(&self, state: &[f64], epsilon: f64, rng: &mut G) -> Result<usize> {
        epsilon_greedy_action(&self.q_values(state)?, epsilon, rng)
    }

    pub fn value_margin(&self, state: &[f64]) -> Result<f64> {
        relative_margin(&self.q_values(state)?)
    }

    /// Next actions chosen by the evaluation network and the bootstrapped
    /// targets `r + gamma * Q_target(s', a*)` for a batch.
    pub fn targets<G: Rng + ?Sized>(
        &self,
        batch: &[&Experience<f64>],
        rng: &mut G,
    ) -> Result<(Vec<usize>, Vec<f64>)> {
        let dim = self.eval.input_dim();
        let next = stack(batch.iter().map(|e| e.next_state.as_slice()), dim)?;
        let q_eval = self.eval.forward_batch(next.view())?;
        let q_target = self.target.forward_batch(next.view())?;
        let mut chosen = Vec::with_capacity(batch.len());
        let mut targets = Vec::with_capacity(batch.len());
        for (i, e) in batch.iter().enumerate() {
            let row = q_eval.row(i);
            let best = greedy_action(&row.to_vec(), rng)?;
            chosen.push(best);
            let cont = if e.terminal { 0.0 } else { q_target[[i, best]] };
            targets.push(e.reward + self.config.gamma * cont);
        }
        Ok((chosen, targets))
    }

    /// One batch update of the evaluation network; syncs the target network
    /// every `sync_period` updates. Returns the batch loss.
    pub fn replay<G: Rng + ?Sized>(&mut self, rng: &mut G) -> Result<f64> {
        let indices = self.buffer.sample_indices(self.config.batch, rng)?;
        let batch: Vec<&Experience<f64>> = indices.iter().map(|&i| &self.buffer.items[i]).collect();
        let (_, y) = self.targets(&batch, rng)?;
        let dim = self.eval.input_dim();
        let states = stack(batch.iter().map(|e| e.state.as_slice()), dim)?;
        let mut targets = Array2::zeros((batch.len(), self.actions));
        let mut mask = Array2::from_elem((batch.len(), self.actions), false);
        for (i, e) in batch.iter().enumerate() {
            if e.action >= self.actions {
                return Err(Error::InvalidAction {
                    action: e.action,
                    count: self.actions,
                });
            }
            targets[[i, e.action]] = y[i];
            mask[[i, e.action]] = true;
        }
        let loss = self
            .eval
            .fit_batch(&mut self.adam, states.view(), targets.view(), Some(mask.view()))?;
        self.fits += 1;
        if self.fits.is_multiple_of(self.config.sync_period) {
            self.target.copy_parameters_from(&self.eval)?;
        }
        Ok(loss)
    }

    pub fn save_checkpoint<W: Write>(&self, w: &mut W) -> Result<()> {
        write_entry(w, None, Role::Eval, &self.eval)?;
        write_entry(w, None, Role::Target, &self.target)
    }

    pub fn load_checkpoint<R: BufRead>(&mut self, r: &mut R) -> Result<()> {
        for entry in read_checkpoint(r)? {
            if entry.action.is_some() || !entry.net.same_architecture(&self.eval) {
                return Err(Error::ArchitectureMismatch);
            }
            match entry.role {
                Role::Eval => self.eval = entry.net,
                Role::Target => self.target = entry.net,
            }
        }
        Ok(())
    }
}

struct DistributionNet {
    eval: Mlp,
    target: Mlp,
    adam: AdamState,
}

/// Ordinal DQN: `k` networks, one per action, each predicting the
/// `n`-tier reward distribution of its action.
pub struct OrdinalDqn {
    nets: Vec<DistributionNet>,
    tiers: usize,
    buffer: ReplayBuffer<OrdinalTier>,
    fits: u64,
    config: DqnConfig,
}

impl OrdinalDqn {
    pub fn new(input: usize, actions: usize, tiers: usize, config: DqnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if actions < 2 {
            return Err(Error::TooFewActions(actions));
        }
        let nets = (0..actions)
            .map(|a| {
                let eval = Mlp::new(input, &config.hidden, tiers, network_seed(seed, a))?;
                Ok(DistributionNet {
                    target: eval.clone(),
                    adam: AdamState::new(&eval, config.learning_rate),
                    eval,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            nets,
            tiers,
            buffer: ReplayBuffer::new(config.memory),
            fits: 0,
            config,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn actions(&self) -> usize {
        self.nets.len()
    }

    pub fn tiers(&self) -> usize {
        self.tiers
    }

    pub fn eval_net(&self, action: usize) -> &Mlp {
        &self.nets[action].eval
    }

    pub fn target_net(&self, action: usize) -> &Mlp {
        &self.nets[action].target
    }

    pub fn set_networks(&mut self, action: usize, eval: Mlp, target: Mlp) -> Result<()> {
        let slot = self.nets.get_mut(action).ok_or(Error::InvalidAction {
            action,
            count: 0,
        })?;
        if !eval.same_architecture(&slot.eval) || !target.same_architecture(&slot.eval) {
            return Err(Error::ArchitectureMismatch);
        }
        slot.eval = eval;
        slot.target = target;
        Ok(())
    }

    pub fn buffer(&self) -> &ReplayBuffer<OrdinalTier> {
        &self.buffer
    }

    pub fn fit_count(&self) -> u64 {
        self.fits
    }

    pub fn remember(&mut self, e: Experience<OrdinalTier>) {
        self.buffer.push(e);
    }

    pub fn ready(&self) -> bool {
        self.buffer.len() >= self.config.batch
    }

    /// Raw predicted distributions of every action in `state`.
    pub fn distributions(&self, state: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_state(state, self.nets[0].eval.input_dim())?;
        self.nets.iter().map(|n| n.eval.forward(state)).collect()
    }

    /// Superiority scores of the clamped, normalized predictions.
    pub fn scores(&self, state: &[f64]) -> Result<Vec<f64>> {
        let probs: Vec<ProbabilityVector> = self
            .distributions(state)?
            .iter()
            .map(|d| normalize_clamped(d))
            .collect();
        superiority_scores(&probs)
    }

    pub fn act<G: Rng + ?Sized>(&self, state: &[f64], epsilon: f64, rng: &mut G) -> Result<usize> {
        epsilon_greedy_action(&self.scores(state)?, epsilon, rng)
    }

    /// Absolute gap of the two best superiority scores.
    pub fn value_margin(&self, state: &[f64]) -> Result<f64> {
        Ok(top_two_gap(&self.scores(state)?)?.1)
    }

    /// Next actions chosen by superiority over the evaluation networks and
    /// the target distributions `e_tier + gamma * D_target(s', a*)`; the
    /// bootstrapped prediction is clamped at zero like decision inputs.
    pub fn targets<G: Rng + ?Sized>(
        &self,
        batch: &[&Experience<OrdinalTier>],
        rng: &mut G,
    ) -> Result<(Vec<usize>, Array2<f64>)> {
        let dim = self.nets[0].eval.input_dim();
        let next = stack(batch.iter().map(|e| e.next_state.as_slice()), dim)?;
        let eval_out: Vec<Array2<f64>> = self
            .nets
            .iter()
            .map(|n| n.eval.forward_batch(next.view()))
            .collect::<Result<_>>()?;
        let target_out: Vec<Array2<f64>> = self
            .nets
            .iter()
            .map(|n| n.target.forward_batch(next.view()))
            .collect::<Result<_>>()?;
        let n = self.tiers;
        let mut chosen = Vec::with_capacity(batch.len());
        let mut targets = Array2::zeros((batch.len(), n));
        for (i, e) in batch.iter().enumerate() {
            if e.reward.index() > n {
                return Err(Error::TierOutOfRange {
                    tier: e.reward.index(),
                    tiers: n,
                });
            }
            let probs: Vec<ProbabilityVector> = eval_out
                .iter()
                .map(|out| normalize_clamped(&out.row(i).to_vec()))
                .collect();
            let best = greedy_action(&superiority_scores(&probs)?, rng)?;
            chosen.push(best);
            targets[[i, e.reward.offset()]] = 1.0;
            if !e.terminal {
                for j in 0..n {
                    targets[[i, j]] += self.config.gamma * clamp_mass(target_out[best][[i, j]]);
                }
            }
        }
        Ok((chosen, targets))
    }

    /// One batch update: each sample trains the evaluation network of its
    /// action. All targets are synced every `sync_period` batches.
    pub fn replay<G: Rng + ?Sized>(&mut self, rng: &mut G) -> Result<f64> {
        let indices = self.buffer.sample_indices(self.config.batch, rng)?;
        let batch: Vec<&Experience<OrdinalTier>> =
            indices.iter().map(|&i| &self.buffer.items[i]).collect();
        let (_, targets) = self.targets(&batch, rng)?;
        let dim = self.nets[0].eval.input_dim();
        let k = self.nets.len();
        let mut weighted_loss = 0.0;
        for action in 0..k {
            let rows: Vec<usize> = (0..batch.len()).filter(|&i| batch[i].action == action).collect();
            if rows.is_empty() {
                continue;
            }
            let states = stack(rows.iter().map(|&i| batch[i].state.as_slice()), dim)?;
            let t = targets.select(Axis(0), &rows);
            let net = &mut self.nets[action];
            let loss = net.eval.fit_batch(&mut net.adam, states.view(), t.view(), None)?;
            weighted_loss += loss * rows.len() as f64;
        }
        if let Some(bad) = batch.iter().find(|e| e.action >= k) {
            return Err(Error::InvalidAction {
                action: bad.action,
                count: k,
            });
        }
        self.fits += 1;
        if self.fits.is_multiple_of(self.config.sync_period) {
            for net in &mut self.nets {
                net.target.copy_parameters_from(&net.eval)?;
            }
        }
        Ok(weighted_loss / batch.len() as f64)
    }

    pub fn save_checkpoint<W: Write>(&self, w: &mut W) -> Result<()> {
        for (a, net) in self.nets.iter().enumerate() {
            write_entry(w, Some(a), Role::Eval, &net.eval)?;
            write_entry(w, Some(a), Role::Target, &net.target)?;
        }
        Ok(())
    }

    pub fn load_checkpoint<R: BufRead>(&mut self, r: &mut R) -> Result<()> {
        for entry in read_checkpoint(r)? {
            let a = entry.action.ok_or(Error::ArchitectureMismatch)?;
            let slot = self.nets.get_mut(a).ok_or(Error::ArchitectureMismatch)?;
            if !entry.net.same_architecture(&slot.eval) {
                return Err(Error::ArchitectureMismatch);
            }
            match entry.role {
                Role::Eval => slot.eval = entry.net,
                Role::Target => slot.target = entry.net,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> DqnConfig {
        DqnConfig {
            hidden: vec![8],
            learning_rate: 0.01,
            gamma: 0.9,
            memory: 100,
            batch: 4,
            sync_period: 5,
        }
    }

    /// A network with zero weights whose output is `bias` everywhere.
    fn constant_net(input: usize, hidden: &[usize], bias: &[f64]) -> Mlp {
        let mut net = Mlp::new(input, hidden, bias.len(), 0).unwrap();
        let zeros = vec![0.0; net.parameter_count()];
        net.set_parameters(&zeros).unwrap();
        let last = net.layers_mut().last_mut().unwrap();
        for (b, v) in last.bias.iter_mut().zip(bias) {
            *b = *v;
        }
        net
    }

    fn exp<R>(action: usize, reward: R, terminal: bool) -> Experience<R> {
        Experience {
            state: vec![0.5, -0.5],
            action,
            reward,
            next_state: vec![0.1, 0.2],
            terminal,
        }
    }

    #[test]
    fn ring_buffer_evicts_oldest() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(exp(i, 0.0, false));
        }
        assert_eq!(b.len(), 3);
        let actions: Vec<usize> = b.iter().map(|e| e.action).collect();
        assert_eq!(actions, vec![2, 3, 4]);
    }

    #[test]
    fn sampling_without_replacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut b = ReplayBuffer::new(10);
        assert!(matches!(b.sample(4, &mut rng), Err(Error::EmptyBuffer)));
        for i in 0..6 {
            b.push(exp(i, 0.0, false));
        }
        let mut picked = b.sample_indices(5, &mut rng).unwrap();
        picked.sort();
        picked.dedup();
        assert_eq!(picked.len(), 5);
        assert_eq!(b.sample(64, &mut rng).unwrap().len(), 6);
    }

    #[test]
    fn sampling_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut b = ReplayBuffer::new(10);
        for i in 0..10 {
            b.push(exp(i, 0.0, false));
        }
        let draws = 20_000;
        let mut counts = [0usize; 10];
        for _ in 0..draws {
            counts[b.sample(1, &mut rng).unwrap()[0].action] += 1;
        }
        let expected = draws as f64 / 10.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 9 degrees of freedom, p = 0.001
        assert!(chi2 < 27.88, "chi2 {chi2}");
    }

    #[test]
    fn zero_networks_choose_uniformly() {
        let cfg = small_config();
        let mut dqn = OrdinalDqn::new(2, 2, 3, cfg.clone(), 0).unwrap();
        for a in 0..2 {
            let z = constant_net(2, &cfg.hidden, &[0.0; 3]);
            dqn.set_networks(a, z.clone(), z).unwrap();
        }
        let scores = dqn.scores(&[0.3, 0.3]).unwrap();
        assert_eq!(scores, vec![0.5, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4000;
        let zeros = (0..n)
            .filter(|_| dqn.act(&[0.3, 0.3], 0.0, &mut rng).unwrap() == 0)
            .count();
        assert!((zeros as f64 / n as f64 - 0.5).abs() < 0.05);
    }

    #[test]
    fn hand_set_networks_pick_superior_action() {
        let cfg = small_config();
        let mut dqn = OrdinalDqn::new(2, 2, 4, cfg.clone(), 0).unwrap();
        let a = constant_net(2, &cfg.hidden, &[0.1, 0.4, 0.1, 0.4]);
        let b = constant_net(2, &cfg.hidden, &[0.4, 0.0, 0.1, 0.5]);
        dqn.set_networks(0, a.clone(), a).unwrap();
        dqn.set_networks(1, b.clone(), b).unwrap();
        let s = dqn.scores(&[0.0, 0.0]).unwrap();
        assert!((s[0] - 0.525).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert_eq!(dqn.act(&[0.0, 0.0], 0.0, &mut rng).unwrap(), 0);
        assert!((dqn.value_margin(&[0.0, 0.0]).unwrap() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn negative_predictions_are_clamped_for_decisions() {
        let cfg = small_config();
        let mut dqn = OrdinalDqn::new(2, 2, 2, cfg.clone(), 0).unwrap();
        let a = constant_net(2, &cfg.hidden, &[-5.0, 1.0]);
        let b = constant_net(2, &cfg.hidden, &[1.0, 0.0]);
        dqn.set_networks(0, a.clone(), a).unwrap();
        dqn.set_networks(1, b.clone(), b).unwrap();
        let s = dqn.scores(&[0.0, 0.0]).unwrap();
        // action 0 is treated as a unit mass on the top tier
        assert!((s[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ordinal_terminal_and_undiscounted_targets() {
        let cfg = small_config();
        let mut dqn = OrdinalDqn::new(2, 2, 3, cfg.clone(), 0).unwrap();
        let high = constant_net(2, &cfg.hidden, &[0.0, 0.0, 5.0]);
        dqn.set_networks(0, high.clone(), high.clone()).unwrap();
        dqn.set_networks(1, high.clone(), high).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tier = OrdinalTier::new(2, 3).unwrap();
        let term = exp(0, tier, true);
        let (_, t) = dqn.targets(&[&term], &mut rng).unwrap();
        assert_eq!(t.row(0).to_vec(), vec![0.0, 1.0, 0.0]);

        let cont = exp(1, tier, false);
        let (_, t) = dqn.targets(&[&cont], &mut rng).unwrap();
        assert!((t[[0, 2]] - 0.9 * 5.0).abs() < 1e-12);

        let mut undiscounted = cfg;
        undiscounted.gamma = 0.0;
        let mut flat = OrdinalDqn::new(2, 2, 3, undiscounted, 0).unwrap();
        let h = constant_net(2, &[8], &[0.0, 0.0, 5.0]);
        flat.set_networks(0, h.clone(), h.clone()).unwrap();
        flat.set_networks(1, h.clone(), h).unwrap();
        let (_, t) = flat.targets(&[&cont], &mut rng).unwrap();
        assert_eq!(t.row(0).to_vec(), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn numeric_terminal_target_is_reward() {
        let cfg = small_config();
        let mut dqn = NumericDqn::new(2, 2, cfg.clone(), 0).unwrap();
        let q = constant_net(2, &cfg.hidden, &[3.0, 4.0]);
        dqn.set_networks(q.clone(), q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (_, y) = dqn.targets(&[&exp(0, 2.5, true)], &mut rng).unwrap();
        assert_eq!(y, vec![2.5]);
        let (chosen, y) = dqn.targets(&[&exp(0, 2.5, false)], &mut rng).unwrap();
        assert_eq!(chosen, vec![1]);
        assert!((y[0] - (2.5 + 0.9 * 4.0)).abs() < 1e-12);
    }

    #[test]
    fn double_targets_decouple_selection_and_evaluation() {
        let cfg = small_config();
        let mut numeric = NumericDqn::new(2, 2, cfg.clone(), 0).unwrap();
        numeric
            .set_networks(
                constant_net(2, &cfg.hidden, &[1.0, 0.0]),
                constant_net(2, &cfg.hidden, &[0.0, 5.0]),
            )
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (chosen, y) = numeric.targets(&[&exp(1, 1.0, false)], &mut rng).unwrap();
        // the evaluation network picks action 0, valued by the target net at 0
        assert_eq!(chosen, vec![0]);
        assert!((y[0] - 1.0).abs() < 1e-12);

        let mut ordinal = OrdinalDqn::new(2, 2, 2, cfg.clone(), 0).unwrap();
        ordinal
            .set_networks(
                0,
                constant_net(2, &cfg.hidden, &[0.0, 1.0]),
                constant_net(2, &cfg.hidden, &[3.0, 0.0]),
            )
            .unwrap();
        ordinal
            .set_networks(
                1,
                constant_net(2, &cfg.hidden, &[1.0, 0.0]),
                constant_net(2, &cfg.hidden, &[0.0, 7.0]),
            )
            .unwrap();
        let tier = OrdinalTier::new(1, 2).unwrap();
        let (chosen, t) = ordinal.targets(&[&exp(1, tier, false)], &mut rng).unwrap();
        assert_eq!(chosen, vec![0]);
        assert!((t[[0, 0]] - (1.0 + 0.9 * 3.0)).abs() < 1e-12);
        assert_eq!(t[[0, 1]], 0.0);
    }

    #[test]
    fn targets_stay_frozen_between_syncs() {
        let cfg = small_config();
        let mut dqn = NumericDqn::new(2, 2, cfg.clone(), 11).unwrap();
        for i in 0..8 {
            dqn.remember(exp(i % 2, 1.0, false));
        }
        let frozen = dqn.target_net().parameters();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..cfg.sync_period - 1 {
            dqn.replay(&mut rng).unwrap();
            assert_eq!(dqn.target_net().parameters(), frozen);
        }
        assert_ne!(dqn.eval_net().parameters(), frozen);
        dqn.replay(&mut rng).unwrap();
        assert_eq!(dqn.target_net().parameters(), dqn.eval_net().parameters());

        let mut ord = OrdinalDqn::new(2, 2, 2, cfg.clone(), 11).unwrap();
        let tier = OrdinalTier::new(2, 2).unwrap();
        for i in 0..8 {
            ord.remember(exp(i % 2, tier, false));
        }
        let frozen: Vec<Vec<f64>> = (0..2).map(|a| ord.target_net(a).parameters()).collect();
        for _ in 0..cfg.sync_period - 1 {
            ord.replay(&mut rng).unwrap();
        }
        for a in 0..2 {
            assert_eq!(ord.target_net(a).parameters(), frozen[a]);
        }
        ord.replay(&mut rng).unwrap();
        for a in 0..2 {
            assert_eq!(ord.target_net(a).parameters(), ord.eval_net(a).parameters());
        }
        assert_eq!(ord.fit_count(), cfg.sync_period);
    }

    #[test]
    fn single_terminal_transition_converges() {
        let mut cfg = small_config();
        cfg.learning_rate = 0.005;
        let mut rng = ChaCha8Rng::seed_from_u64(9);

        let mut ord = OrdinalDqn::new(2, 2, 3, cfg.clone(), 1).unwrap();
        let tier = OrdinalTier::new(3, 3).unwrap();
        for _ in 0..cfg.batch {
            ord.remember(exp(1, tier, true));
        }
        for _ in 0..3000 {
            ord.replay(&mut rng).unwrap();
        }
        let d = ord.distributions(&[0.5, -0.5]).unwrap();
        for (got, want) in d[1].iter().zip([0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-3, "{:?}", d[1]);
        }

        let mut num = NumericDqn::new(2, 2, cfg.clone(), 1).unwrap();
        for _ in 0..cfg.batch {
            num.remember(exp(0, -2.0, true));
        }
        for _ in 0..3000 {
            num.replay(&mut rng).unwrap();
        }
        let q = num.q_values(&[0.5, -0.5]).unwrap();
        assert!((q[0] + 2.0).abs() < 1e-3, "{q:?}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = small_config();
        let ord = OrdinalDqn::new(2, 3, 2, cfg.clone(), 21).unwrap();
        let mut buf = Vec::new();
        ord.save_checkpoint(&mut buf).unwrap();
        let entries = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(entries.len(), 6);
        assert_eq!(entries[3].action, Some(1));
        assert_eq!(entries[3].role, Role::Target);
        let mut other = OrdinalDqn::new(2, 3, 2, cfg.clone(), 99).unwrap();
        other.load_checkpoint(&mut buf.as_slice()).unwrap();
        for a in 0..3 {
            assert_eq!(other.eval_net(a), ord.eval_net(a));
        }

        let num = NumericDqn::new(2, 2, cfg.clone(), 5).unwrap();
        let mut buf = Vec::new();
        num.save_checkpoint(&mut buf).unwrap();
        assert!(buf.starts_with(b"action=all role=eval\n"));
        let mut restored = NumericDqn::new(2, 2, cfg.clone(), 6).unwrap();
        restored.load_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(restored.eval_net(), num.eval_net());
        // an incompatible architecture is refused
        let mut wrong = NumericDqn::new(3, 2, cfg, 6).unwrap();
        assert!(wrong.load_checkpoint(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = small_config();
        cfg.gamma = 1.0;
        assert!(NumericDqn::new(2, 2, cfg.clone(), 0).is_err());
        cfg.gamma = 0.5;
        cfg.batch = 0;
        assert!(OrdinalDqn::new(2, 2, 2, cfg, 0).is_err());
    }
}
