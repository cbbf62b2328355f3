use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::replay::{ReplayBuffer, Transition};
use super::{
    act, epsilon_at, greedy_action, AgentConfig, AgentState, Algo, BucketSpec, StateSpace,
    TrainOutcome, TrainedAgent,
};
use crate::alpha_model::Normalization;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::labeling::HORIZONS;
use crate::nn::{Adam, AdamConfig, Mlp};

pub const STATE_DIM: usize = HORIZONS + 1;

/// Value network over standardized alphas plus the position as +/-1.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkAgent {
    pub algo: Algo,
    pub buckets: BucketSpec,
    pub alpha_norm: Normalization,
    pub net: Mlp,
}

impl NetworkAgent {
    pub fn encode(&self, state: &AgentState) -> [f64; STATE_DIM] {
        encode(&self.alpha_norm, state)
    }

    pub fn action_values(&self, state: &AgentState) -> [f64; 2] {
        let q = self.net.forward_one(&self.encode(state));
        [q[0], q[1]]
    }
}

fn encode(norm: &Normalization, state: &AgentState) -> [f64; STATE_DIM] {
    let mut x = [0.0; STATE_DIM];
    for h in 0..HORIZONS {
        x[h] = norm.apply(state.alphas[h], h);
    }
    x[HORIZONS] = state.position.sign();
    x
}

fn encode_batch<'a>(
    norm: &Normalization,
    states: impl ExactSizeIterator<Item = &'a AgentState>,
) -> Array2<f64> {
    let mut out = Array2::zeros((states.len(), STATE_DIM));
    for (mut row, s) in out.rows_mut().into_iter().zip(states) {
        for (o, v) in row.iter_mut().zip(encode(norm, s)) {
            *o = v;
        }
    }
    out
}

/// DQN: targets `r + gamma * max_a' Q'(s', a')` from a target network that is
/// hard-synced every `target_update_frequency` steps.
pub fn train_dqn<E: Environment>(
    env: &mut E,
    space: &StateSpace,
    cfg: &AgentConfig,
) -> Result<TrainOutcome> {
    train_network(env, space, cfg, Algo::Dqn)
}

/// DDQN: the target network picks `a* = argmax_a' Q'(s', a')`, the primary
/// network scores it, `y = r + gamma * Q(s', a*)`; the target follows the
/// primary by a soft update of weight `tau` every step.
pub fn train_ddqn<E: Environment>(
    env: &mut E,
    space: &StateSpace,
    cfg: &AgentConfig,
) -> Result<TrainOutcome> {
    train_network(env, space, cfg, Algo::Ddqn)
}

fn train_network<E: Environment>(
    env: &mut E,
    space: &StateSpace,
    cfg: &AgentConfig,
    algo: Algo,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sizes = vec![STATE_DIM];
    sizes.extend(&cfg.hidden_layers);
    sizes.push(2);
    let mut agent = NetworkAgent {
        algo,
        buckets: space.buckets.clone(),
        alpha_norm: space.alpha_norm.clone(),
        net: Mlp::init(&sizes, cfg.output_activation(), &mut rng),
    };
    let mut target = agent.net.clone();
    let mut adam = Adam::new(&agent.net, AdamConfig::new(cfg.learning_rate));
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let scale = env.reward_scale();
    let mut step_count = 0usize;
    let mut episode_rewards = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let epsilon = epsilon_at(episode, cfg);
        let mut state = env.reset();
        let mut total = 0.0;
        loop {
            let action = act(agent.action_values(&state), state.position, epsilon, &mut rng);
            let step = env.step(action);
            total += step.reward;
            let mut reward = step.reward / scale;
            if cfg.reward_clip > 0.0 {
                reward = reward.clamp(-cfg.reward_clip, cfg.reward_clip);
            }
            buffer.push(Transition {
                state,
                action,
                reward,
                next_state: step.next_state,
                done: step.done,
            });
            step_count += 1;

            if buffer.len() >= cfg.batch_size && step_count % cfg.train_every == 0 {
                let batch = buffer.sample(cfg.batch_size, &mut rng);
                let loss = learn(&mut agent, &target, &mut adam, &batch, cfg, algo);
                if !loss.is_finite() {
                    return Err(Error::StepDivergence { step: step_count });
                }
            }
            match algo {
                Algo::Ddqn => target.blend_from(&agent.net, cfg.tau),
                _ => {
                    if step_count % cfg.target_update_frequency == 0 {
                        target = agent.net.clone();
                    }
                }
            }
            if step.done {
                break;
            }
            state = step.next_state;
        }
        episode_rewards.push(total);
    }
    Ok(TrainOutcome {
        agent: TrainedAgent::Network(agent),
        target: Some(target),
        episode_rewards,
    })
}

/// One gradient step on the squared TD error of the taken actions. Returns
/// the batch loss, or NaN when any gradient is non-finite.
fn learn(
    agent: &mut NetworkAgent,
    target: &Mlp,
    adam: &mut Adam,
    batch: &[&Transition],
    cfg: &AgentConfig,
    algo: Algo,
) -> f64 {
    let n = batch.len();
    let x = encode_batch(&agent.alpha_norm, batch.iter().map(|t| &t.state));
    let xn = encode_batch(&agent.alpha_norm, batch.iter().map(|t| &t.next_state));
    let q_next_target = target.forward(xn.view());
    let q_next_primary = match algo {
        Algo::Ddqn => Some(agent.net.forward(xn.view())),
        _ => None,
    };
    let mut y = vec![0.0; n];
    for (i, t) in batch.iter().enumerate() {
        let future = if t.done {
            0.0
        } else {
            let qt = [q_next_target[[i, 0]], q_next_target[[i, 1]]];
            match &q_next_primary {
                Some(qp) => {
                    let a_star = greedy_action(qt, t.next_state.position);
                    qp[[i, a_star.index()]]
                }
                None => qt[0].max(qt[1]),
            }
        };
        y[i] = t.reward + cfg.gamma * future;
    }

    let cache = agent.net.forward_cached(x.view());
    let mut d_out = Array2::zeros((n, 2));
    let mut loss = 0.0;
    for (i, t) in batch.iter().enumerate() {
        let a = t.action.index();
        let diff = cache.output[[i, a]] - y[i];
        loss += diff * diff;
        d_out[[i, a]] = 2.0 * diff / n as f64;
    }
    loss /= n as f64;
    let (mut grads, _) = agent.net.backward(&cache, &d_out);
    agent.net.add_l2(&mut grads, cfg.l2_lambda);
    if !grads.all_finite() {
        return f64::NAN;
    }
    adam.step(&mut agent.net, &grads);
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{Action, Position};
    use crate::env::Step;
    use crate::nn::OutputActivation;

    /// Two states; in state A buying pays 1, in state B selling pays 1.
    /// Every action moves to the other state.
    pub(crate) struct ToyMdp {
        pub(crate) state_a: bool,
        pub(crate) t: usize,
    }

    fn toy_state(a: bool) -> AgentState {
        AgentState {
            alphas: [if a { 1.0 } else { -1.0 }; HORIZONS],
            position: Position::Short,
        }
    }

    impl Environment for ToyMdp {
        fn reset(&mut self) -> AgentState {
            self.state_a = true;
            self.t = 0;
            toy_state(true)
        }

        fn step(&mut self, action: Action) -> Step {
            let good = if self.state_a { Action::Buy } else { Action::Sell };
            let reward = if action == good { 1.0 } else { 0.0 };
            self.state_a = !self.state_a;
            self.t += 1;
            Step {
                next_state: toy_state(self.state_a),
                reward,
                done: self.t == 50,
            }
        }
    }

    fn space() -> StateSpace {
        StateSpace::fit(&[[1.0; HORIZONS], [-1.0; HORIZONS]]).unwrap()
    }

    fn cfg() -> AgentConfig {
        AgentConfig {
            episodes: 40,
            batch_size: 16,
            sigmoid_output: false,
            hidden_layers: vec![16, 16],
            learning_rate: 0.005,
            gamma: 0.5,
            seed: 3,
            ..AgentConfig::default()
        }
    }

    #[test]
    fn dqn_and_ddqn_solve_two_state_mdp() {
        for algo in [Algo::Dqn, Algo::Ddqn] {
            let mut env = ToyMdp { state_a: true, t: 0 };
            let out = train_network(&mut env, &space(), &cfg(), algo).unwrap();
            assert_eq!(out.agent.greedy(&toy_state(true)), Action::Buy, "{algo}");
            assert_eq!(out.agent.greedy(&toy_state(false)), Action::Sell, "{algo}");
            // Optimal values are 1 / (1 - gamma) = 2 for the rewarding action.
            let q = out.agent.action_values(&toy_state(true));
            assert!((q[0] - 2.0).abs() < 0.3, "{algo}: {q:?}");
        }
    }

    #[test]
    fn hard_sync_copies_bit_exactly() {
        let c = AgentConfig {
            episodes: 1,
            target_update_frequency: 50,
            ..cfg()
        };
        let mut env = ToyMdp { state_a: true, t: 0 };
        let out = train_dqn(&mut env, &space(), &c).unwrap();
        let TrainedAgent::Network(a) = &out.agent else { panic!() };
        // 50 steps, sync at step 50 which is the last one.
        assert_eq!(out.target.unwrap().flat_params(), a.net.flat_params());
    }

    #[test]
    fn soft_update_is_a_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let theta = Mlp::init(&[7, 5, 2], OutputActivation::Identity, &mut rng);
        let mut target = Mlp::init(&[7, 5, 2], OutputActivation::Identity, &mut rng);
        let before = target.flat_params();
        target.blend_from(&theta, 0.1);
        for ((new, old), t) in target.flat_params().iter().zip(&before).zip(theta.flat_params()) {
            assert!(((new - t).abs() - 0.9 * (old - t).abs()).abs() < 1e-12);
        }
        let mut one = Mlp::zeros(&[1, 1], OutputActivation::Identity);
        one.set_flat_params(&[1.0, 1.0]);
        let mut zero = Mlp::zeros(&[1, 1], OutputActivation::Identity);
        zero.blend_from(&one, 0.1);
        assert_eq!(zero.flat_params(), vec![0.1, 0.1]);
        zero.blend_from(&one, 1.0);
        assert_eq!(zero.flat_params(), one.flat_params());
    }

    #[test]
    fn same_seed_same_run() {
        let run = || {
            let mut env = ToyMdp { state_a: true, t: 0 };
            let c = AgentConfig { episodes: 3, ..cfg() };
            let out = train_ddqn(&mut env, &space(), &c).unwrap();
            let TrainedAgent::Network(a) = out.agent else { panic!() };
            (a.net.flat_params(), out.episode_rewards)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn divergence_names_the_step() {
        let c = AgentConfig {
            learning_rate: 1e300,
            episodes: 5,
            ..cfg()
        };
        let mut env = ToyMdp { state_a: true, t: 0 };
        match train_dqn(&mut env, &space(), &c) {
            Err(Error::StepDivergence { step }) => assert!(step >= 16),
            other => panic!("expected divergence, got {:?}", other.map(|o| o.episode_rewards)),
        }
    }
}
