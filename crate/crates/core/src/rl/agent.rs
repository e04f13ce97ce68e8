use rand::Rng;

use super::memory::{nn_estimate, NnMemory, NnRecord, ReplayBuffer, Transition};
use super::{AgentConfig, QNet, RlError};
use crate::hetgraph::Subgraph;
use crate::numcore::{Adam, Tape, Tensor};

/// Mean of the subgraph's raw feature rows.
pub fn encode_state(sub: &Subgraph) -> Result<Vec<f64>, RlError> {
    let n = sub.features.rows();
    if n == 0 {
        return Err(RlError::EmptySubgraph);
    }
    let d = sub.features.cols();
    let mut out = vec![0.0; d];
    for r in 0..n {
        for (o, v) in out.iter_mut().zip(sub.features.row(r)) {
            *o += v;
        }
    }
    for o in &mut out {
        *o /= n as f64;
    }
    Ok(out)
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy choice. Exactly one uniform draw decides exploration, so the
/// random stream advances identically whatever `eps` is.
pub fn select_action<R: Rng + ?Sized>(
    qnet: &QNet,
    s: &[f64],
    eps: f64,
    rng: &mut R,
) -> Result<usize, RlError> {
    let explore = rng.gen::<f64>() < eps;
    if explore {
        return Ok(rng.gen_range(0..qnet.n_actions()));
    }
    Ok(argmax(&qnet.q_values(s)?))
}

/// `α_0 (1 − β)^k` for episode `k`.
pub fn alpha_at(alpha0: f64, beta: f64, episode: usize) -> f64 {
    alpha0 * (1.0 - beta).powi(episode as i32)
}

/// `α·nn + (1 − α)(r + γ max_a Q_target(s', a))`, or the plain DQN target
/// when `nn_value` is absent.
pub fn mixed_target(reward: f64, max_next_q: f64, gamma: f64, alpha: f64, nn_value: Option<f64>) -> f64 {
    let dqn = reward + gamma * max_next_q;
    match nn_value {
        Some(nn) => alpha * nn + (1.0 - alpha) * dqn,
        None => dqn,
    }
}

/// One DQN agent: prediction and target networks, replay, and the
/// nearest-neighbor experience set.
#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    cfg: AgentConfig,
    pub pred: QNet,
    pub target: QNet,
    pub replay: ReplayBuffer,
    pub memory: NnMemory,
    /// Whether targets mix in the nearest-neighbor estimate.
    pub use_nn: bool,
    updates: u64,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        n_actions: usize,
        cfg: &AgentConfig,
        use_nn: bool,
        rng: &mut R,
    ) -> Result<Self, RlError> {
        cfg.validate()?;
        let pred = QNet::new(state_dim, n_actions, rng)?;
        let target = pred.clone();
        Ok(Self {
            cfg: cfg.clone(),
            pred,
            target,
            replay: ReplayBuffer::new(cfg.replay_capacity),
            memory: NnMemory::new(cfg.nn_capacity),
            use_nn,
            updates: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn n_actions(&self) -> usize {
        self.pred.n_actions()
    }

    /// Number of DQN updates applied so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn set_updates(&mut self, updates: u64) {
        self.updates = updates;
    }

    pub fn act<R: Rng + ?Sized>(&self, s: &[f64], eps: f64, rng: &mut R) -> Result<usize, RlError> {
        select_action(&self.pred, s, eps, rng)
    }

    pub fn greedy(&self, s: &[f64]) -> Result<usize, RlError> {
        Ok(argmax(&self.pred.q_values(s)?))
    }

    /// Stores a transition in replay and its reward in the experience set.
    pub fn observe(&mut self, t: Transition) -> Result<(), RlError> {
        if t.action >= self.n_actions() {
            return Err(RlError::ActionOutOfRange {
                action: t.action,
                n_actions: self.n_actions(),
            });
        }
        self.memory.push(NnRecord {
            state: t.state.clone(),
            action: t.action,
            value: t.reward,
        });
        self.replay.push(t);
        Ok(())
    }

    pub fn sync_target(&mut self) {
        self.target.copy_values_from(&self.pred);
    }

    /// Runs the configured number of DQN updates on replay samples and
    /// returns their mean loss, or `None` when replay is empty.
    pub fn train<R: Rng + ?Sized>(&mut self, episode: usize, rng: &mut R) -> Result<Option<f64>, RlError> {
        if self.replay.is_empty() || self.cfg.train_steps == 0 {
            return Ok(None);
        }
        let alpha = alpha_at(self.cfg.alpha0, self.cfg.beta, episode);
        let mut total = 0.0;
        for _ in 0..self.cfg.train_steps {
            let batch: Vec<Transition> = self
                .replay
                .sample(self.cfg.replay_batch, rng)
                .into_iter()
                .cloned()
                .collect();
            total += dqn_step(self, &batch, alpha)?;
        }
        Ok(Some(total / self.cfg.train_steps as f64))
    }
}

/// Mean squared error between mixed targets and predicted Q-values of the
/// taken actions, followed by one Adam update of the prediction network.
/// The target network is synced after every `target_sync` updates.
pub fn dqn_step(agent: &mut Agent, batch: &[Transition], alpha: f64) -> Result<f64, RlError> {
    if batch.is_empty() {
        return Err(RlError::EmptyBatch);
    }
    let dim = agent.pred.state_dim();
    let n_actions = agent.n_actions();
    let mut states = Vec::with_capacity(batch.len() * dim);
    let mut next = Vec::with_capacity(batch.len() * dim);
    for t in batch {
        for s in [&t.state, &t.next_state] {
            if s.len() != dim {
                return Err(RlError::StateDim {
                    expected: dim,
                    found: s.len(),
                });
            }
        }
        if t.action >= n_actions {
            return Err(RlError::ActionOutOfRange {
                action: t.action,
                n_actions,
            });
        }
        states.extend_from_slice(&t.state);
        next.extend_from_slice(&t.next_state);
    }
    let next_q = agent
        .target
        .predict(&Tensor::from_vec(batch.len(), dim, next)?)?;
    let targets: Vec<f64> = batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let max_next = next_q.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let nn = if agent.use_nn {
                nn_estimate(&agent.memory, &t.state, t.action, agent.cfg.l_corr)
            } else {
                None
            };
            mixed_target(t.reward, max_next, agent.cfg.gamma, alpha, nn)
        })
        .collect();
    let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();

    let mut tape = Tape::new();
    let vars = agent.pred.bind(&mut tape)?;
    let x = tape.constant(Tensor::from_vec(batch.len(), dim, states)?)?;
    let q = QNet::forward(&mut tape, &vars, x)?;
    let taken = tape.gather_cols(q, &actions)?;
    let y = tape.constant(Tensor::column_vector(&targets))?;
    let resid = tape.sub(taken, y)?;
    let sq = tape.sum_squares(resid)?;
    let loss = tape.scale(sq, 1.0 / batch.len() as f64)?;
    let grads = tape.backward(loss)?;
    agent.pred.accumulate(&vars, &grads);
    Adam::new(agent.cfg.lr).step(&mut agent.pred.params_mut());
    agent.updates += 1;
    if agent.updates % agent.cfg.target_sync as u64 == 0 {
        agent.sync_target();
    }
    Ok(grads.loss())
}

/// The width agent and the depth agent. They share the state stream but
/// nothing else. A missing agent means that dimension is held fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentPair {
    pub width: Option<Agent>,
    pub depth: Option<Agent>,
    /// Width used when no width agent exists.
    pub fixed_k: usize,
    /// Depth used when no depth agent exists.
    pub fixed_l: usize,
}

impl AgentPair {
    /// A policy that always answers `(k, l)`.
    pub fn fixed(k: usize, l: usize) -> Self {
        Self {
            width: None,
            depth: None,
            fixed_k: k,
            fixed_l: l,
        }
    }

    /// Builds the agents for the searched dimensions. The width agent is
    /// initialized before the depth agent.
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        cfg: &AgentConfig,
        search_k: bool,
        search_l: bool,
        use_nn: bool,
        fixed_k: usize,
        fixed_l: usize,
        rng: &mut R,
    ) -> Result<Self, RlError> {
        let width = if search_k {
            Some(Agent::new(state_dim, cfg.k_max, cfg, use_nn, rng)?)
        } else {
            None
        };
        let depth = if search_l {
            Some(Agent::new(state_dim, cfg.l_max, cfg, use_nn, rng)?)
        } else {
            None
        };
        Ok(Self {
            width,
            depth,
            fixed_k,
            fixed_l,
        })
    }

    /// ε-greedy `(k, l)`, both 1-based.
    pub fn act<R: Rng + ?Sized>(&self, s: &[f64], eps: f64, rng: &mut R) -> Result<(usize, usize), RlError> {
        let k = match &self.width {
            Some(a) => a.act(s, eps, rng)? + 1,
            None => self.fixed_k,
        };
        let l = match &self.depth {
            Some(a) => a.act(s, eps, rng)? + 1,
            None => self.fixed_l,
        };
        Ok((k, l))
    }

    /// Greedy `(k, l)`, both 1-based.
    pub fn greedy(&self, s: &[f64]) -> Result<(usize, usize), RlError> {
        let k = match &self.width {
            Some(a) => a.greedy(s)? + 1,
            None => self.fixed_k,
        };
        let l = match &self.depth {
            Some(a) => a.greedy(s)? + 1,
            None => self.fixed_l,
        };
        Ok((k, l))
    }

    pub fn agents_mut(&mut self) -> impl Iterator<Item = &mut Agent> {
        self.width.iter_mut().chain(self.depth.iter_mut())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn agent(seed: u64, cfg: &AgentConfig) -> Agent {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Agent::new(3, 2, cfg, true, &mut rng).unwrap()
    }

    fn zero_output(q: &mut QNet) {
        let (w, b) = q.layers.last_mut().unwrap();
        w.value.fill(0.0);
        b.value.fill(0.0);
    }

    #[test]
    fn greedy_ties_go_low() {
        let mut a = agent(0, &AgentConfig::default());
        zero_output(&mut a.pred);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(select_action(&a.pred, &[0.1, 0.2, 0.3], 0.0, &mut rng).unwrap(), 0);
    }

    #[test]
    fn greedy_picks_larger_q() {
        let mut a = agent(0, &AgentConfig::default());
        zero_output(&mut a.pred);
        a.pred.layers.last_mut().unwrap().1.value = Tensor::row_vector(&[0.1, 0.9]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            assert_eq!(select_action(&a.pred, &[1.0, -1.0, 0.5], 0.0, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn alpha_schedule() {
        assert_eq!(alpha_at(0.5, 0.05, 0), 0.5);
        assert!((alpha_at(0.5, 0.05, 2) - 0.45125).abs() < 1e-12);
        assert!(alpha_at(0.5, 0.05, 200) < 1e-4);
    }

    #[test]
    fn mixed_target_arithmetic() {
        assert!((mixed_target(1.0, 2.0, 0.95, 0.5, Some(-0.3)) - 1.3).abs() < 1e-12);
        assert_eq!(mixed_target(1.0, 2.0, 0.95, 0.0, Some(-0.3)), 1.0 + 0.95 * 2.0);
        assert_eq!(mixed_target(1.0, 2.0, 0.95, 0.7, None), 1.0 + 0.95 * 2.0);
    }

    #[test]
    fn single_transition_loss_is_squared_residual() {
        let cfg = AgentConfig::default();
        let mut a = agent(4, &cfg);
        a.use_nn = false;
        let t = Transition {
            state: vec![0.3, -0.2, 0.9],
            action: 1,
            next_state: vec![-0.4, 0.1, 0.2],
            reward: 1.0,
        };
        let q = a.pred.q_values(&t.state).unwrap()[1];
        let next = a.target.q_values(&t.next_state).unwrap();
        let y = 1.0 + cfg.gamma * next[0].max(next[1]);
        let loss = dqn_step(&mut a, &[t], 0.5).unwrap();
        assert!((loss - (q - y).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn target_net_frozen_between_syncs() {
        let cfg = AgentConfig {
            target_sync: 3,
            ..AgentConfig::default()
        };
        let mut a = agent(5, &cfg);
        let before = a.target.clone();
        let t = Transition {
            state: vec![1.0, 0.0, 0.0],
            action: 0,
            next_state: vec![0.0, 1.0, 0.0],
            reward: -1.0,
        };
        dqn_step(&mut a, &[t.clone()], 0.5).unwrap();
        dqn_step(&mut a, &[t.clone()], 0.5).unwrap();
        assert_eq!(a.target, before);
        assert_ne!(a.pred, before);
        dqn_step(&mut a, &[t], 0.5).unwrap();
        let s = [0.2, 0.4, -0.1];
        assert_eq!(a.target.q_values(&s).unwrap(), a.pred.q_values(&s).unwrap());
    }

    #[test]
    fn observe_rejects_bad_action() {
        let mut a = agent(6, &AgentConfig::default());
        let err = a.observe(Transition {
            state: vec![0.0; 3],
            action: 2,
            next_state: vec![0.0; 3],
            reward: 1.0,
        });
        assert!(matches!(err, Err(RlError::ActionOutOfRange { .. })));
    }
}
