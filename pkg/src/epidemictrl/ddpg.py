"""Deep deterministic policy gradient learner.

Actor and critic are small dense nets with soft-updated target copies and
a uniform replay buffer. Episodes here are single steps: the stored done
flag is always true, so the critic target collapses to the observed
reward and critic training is pure regression. Exploration adds Gaussian
noise to the raw action before clamping to [-1, 1].

A task only needs three things: an `observation()` vector (constant per
experiment), an `action_dim`, and `rollout(action, seed) -> reward`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .neural import Adam, Mlp, mlp_from_widths

# Evaluation episodes draw from a seed range far above training episodes
# so the two never collide.
EVAL_SEED_OFFSET = 1_000_000


@dataclass
class DdpgHyperParams:
    seed: int = 0
    discount: float = 0.99
    tau: float = 5e-3
    expl_noise: float = 0.1
    batch_size: int = 32
    train_iterations: int = 150
    burn_in: int = 10
    eval_every: int = 10
    eval_repeats: int = 5
    replicates_per_action: int = 2
    actor_lr: float = 5e-3
    critic_lr: float = 1e-2
    # Extra critic regression steps per iteration. With only ~150 samples
    # total, a 1:1 critic/actor update ratio leaves the fitted value surface
    # too rough for reliable action gradients.
    critic_updates_per_step: int = 5
    hidden: tuple[int, int] = (64, 64)
    replay_capacity: int = 10_000

    def validate(self) -> None:
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.burn_in > self.train_iterations:
            raise ValueError("burn_in cannot exceed train_iterations")
        if not 0.0 <= self.discount <= 1.0:
            raise ValueError("discount must lie in [0, 1]")
        if self.expl_noise < 0:
            raise ValueError("expl_noise must be nonnegative")
        if self.eval_every < 1 or self.eval_repeats < 1:
            raise ValueError("evaluation cadence and repeats must be positive")
        if self.replicates_per_action < 1:
            raise ValueError("replicates_per_action must be at least 1")
        if self.critic_updates_per_step < 1:
            raise ValueError("critic_updates_per_step must be at least 1")
        if self.replay_capacity < self.batch_size:
            raise ValueError("replay capacity smaller than one batch")


@dataclass(frozen=True)
class Transition:
    observation: np.ndarray
    action: np.ndarray
    reward: float
    done: bool = True


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform sampling."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.observations = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity)
        self.size = 0
        self._next = 0

    def __len__(self) -> int:
        return self.size

    def add(self, transition: Transition) -> None:
        i = self._next
        self.observations[i] = transition.observation
        self.actions[i] = transition.action
        self.rewards[i] = transition.reward
        self.dones[i] = 1.0 if transition.done else 0.0
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        if self.size < batch_size:
            raise ValueError(
                f"buffer holds {self.size} transitions, need {batch_size}"
            )
        idx = rng.integers(0, self.size, size=batch_size)
        return (
            self.observations[idx],
            self.actions[idx],
            self.rewards[idx],
            self.dones[idx],
        )


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    """theta_target <- tau * theta_online + (1 - tau) * theta_target."""
    for tp, op in zip(target.parameters(), online.parameters()):
        tp *= 1.0 - tau
        tp += tau * op


def select_action(
    actor: Mlp,
    obs: np.ndarray,
    noise_sigma: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Actor output plus per-component Gaussian noise, clamped to [-1, 1]."""
    action = actor.forward(obs)
    if noise_sigma > 0:
        action = action + rng.normal(0.0, noise_sigma, size=action.shape)
    return np.clip(action, -1.0, 1.0)


class ActorCritic:
    """Online and target networks plus their optimizer states."""

    def __init__(self, actor: Mlp, critic: Mlp, hyper: DdpgHyperParams):
        self.hyper = hyper
        self.actor = actor
        self.critic = critic
        self.target_actor = actor.copy()
        self.target_critic = critic.copy()
        self.actor_adam = Adam(actor)
        self.critic_adam = Adam(critic)

    @classmethod
    def initialize(
        cls,
        obs_dim: int,
        action_dim: int,
        hyper: DdpgHyperParams,
        rng: np.random.Generator,
    ) -> "ActorCritic":
        h1, h2 = hyper.hidden
        # The output layer starts scaled down so the initial policy sits
        # near the center of the action box.
        actor = mlp_from_widths(
            (obs_dim, h1, h2, action_dim), "relu", "tanh", rng, final_scale=0.1
        )
        critic = mlp_from_widths(
            (obs_dim + action_dim, h1, h2, 1), "relu", "identity", rng
        )
        return cls(actor, critic, hyper)

    def critic_value(self, obs: np.ndarray, action: np.ndarray) -> np.ndarray:
        return self.critic.forward(np.concatenate([obs, action], axis=-1))

    def _critic_action_gradient(self, obs: np.ndarray, action: np.ndarray):
        """dQ/da at (obs, action), plus the Q values."""
        x = np.concatenate([obs, action], axis=-1)
        q, cache = self.critic.forward_cached(x)
        _, grad_in = self.critic.backward(cache, np.ones_like(q))
        return grad_in[..., obs.shape[-1] :], q

    def critic_step(self, batch) -> float:
        """One gradient step of the critic regression; returns its loss.

        Observations are constant within an experiment and episodes are
        terminal, so the stored observation stands in for the successor
        state; the (1 - done) mask zeroes the bootstrap term anyway.
        """
        obs, actions, rewards, dones = batch
        n = obs.shape[0]
        hyper = self.hyper
        next_actions = self.target_actor.forward(obs)
        q_next = self.target_critic.forward(
            np.concatenate([obs, next_actions], axis=-1)
        )[:, 0]
        targets = rewards + hyper.discount * (1.0 - dones) * q_next

        x = np.concatenate([obs, actions], axis=-1)
        q, cache = self.critic.forward_cached(x)
        residual = q[:, 0] - targets
        critic_loss = float(np.mean(residual**2))
        grads, _ = self.critic.backward(cache, (2.0 * residual / n)[:, None])
        self.critic_adam.update(self.critic, grads, hyper.critic_lr)
        return critic_loss

    def train_step(self, batch) -> tuple[float, float]:
        """One critic regression step, one actor ascent step, soft updates.

        Returns (critic_loss, actor_objective) where the objective is the
        batch-mean critic value of the actor's own actions.
        """
        obs, actions, rewards, dones = batch
        n = obs.shape[0]
        hyper = self.hyper
        critic_loss = self.critic_step(batch)

        pi, actor_cache = self.actor.forward_cached(obs)
        dq_da, q_pi = self._critic_action_gradient(obs, pi)
        actor_objective = float(np.mean(q_pi))
        # Ascend mean Q: descend its negative through the actor.
        actor_grads, _ = self.actor.backward(actor_cache, -dq_da / n)
        self.actor_adam.update(self.actor, actor_grads, hyper.actor_lr)

        soft_update(self.target_actor, self.actor, hyper.tau)
        soft_update(self.target_critic, self.critic, hyper.tau)
        return critic_loss, actor_objective


def train_step(agent: ActorCritic, batch) -> tuple[float, float]:
    return agent.train_step(batch)


@dataclass
class TrainLog:
    iterations: list[int] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    critic_losses: list[float] = field(default_factory=list)
    actor_objectives: list[float] = field(default_factory=list)
    eval_means: list[float] = field(default_factory=list)
    eval_sds: list[float] = field(default_factory=list)

    def append(
        self,
        iteration: int,
        reward: float,
        critic_loss: float,
        actor_objective: float,
        eval_mean: float,
        eval_sd: float,
    ) -> None:
        self.iterations.append(iteration)
        self.rewards.append(reward)
        self.critic_losses.append(critic_loss)
        self.actor_objectives.append(actor_objective)
        self.eval_means.append(eval_mean)
        self.eval_sds.append(eval_sd)

    @property
    def eval_points(self) -> int:
        return sum(1 for m in self.eval_means if not math.isnan(m))

    def to_csv(self, path) -> None:
        def cell(x: float) -> str:
            return "" if math.isnan(x) else repr(x)

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "iteration",
                    "reward",
                    "critic_loss",
                    "actor_objective",
                    "eval_mean",
                    "eval_sd",
                ]
            )
            for i in range(len(self.iterations)):
                writer.writerow(
                    [
                        self.iterations[i],
                        repr(self.rewards[i]),
                        cell(self.critic_losses[i]),
                        cell(self.actor_objectives[i]),
                        cell(self.eval_means[i]),
                        cell(self.eval_sds[i]),
                    ]
                )


@dataclass
class EvalResult:
    mean: float
    sd: float
    rewards: list[float]
    action: np.ndarray
    schedule: object | None = None


@dataclass
class TrainResult:
    agent: ActorCritic
    log: TrainLog
    best_actor: Mlp
    best_eval_mean: float
    # the random actions tried during burn-in, for learning-signal checks
    burn_in_actions: list = field(default_factory=list)


def evaluate(actor: Mlp, task, repeats: int) -> EvalResult:
    """Score the noiseless policy over a fixed bank of evaluation seeds."""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    obs = task.observation()
    action = np.clip(actor.forward(obs), -1.0, 1.0)
    base = getattr(task, "seed_base", 0) + EVAL_SEED_OFFSET
    rewards = [float(task.rollout(action, base + j)) for j in range(repeats)]
    schedule = task.decode(action) if hasattr(task, "decode") else None
    return EvalResult(
        mean=float(np.mean(rewards)),
        sd=float(np.std(rewards)),
        rewards=rewards,
        action=action,
        schedule=schedule,
    )


def train(task, hyper: DdpgHyperParams | None = None) -> TrainResult:
    """Run the online training protocol against one configured task.

    The first `burn_in` iterations act uniformly at random; afterwards the
    actor acts with exploration noise. Every iteration scores its action as
    the mean of `replicates_per_action` fresh episodes, stores one
    transition, and runs one gradient step once the buffer can fill a
    batch. Every `eval_every` iterations the noiseless policy is evaluated
    and the best-scoring snapshot is kept.
    """
    if hyper is None:
        hyper = DdpgHyperParams()
    hyper.validate()

    init_ss, noise_ss, sample_ss, burn_ss = np.random.SeedSequence(hyper.seed).spawn(4)
    init_rng = np.random.Generator(np.random.PCG64(init_ss))
    noise_rng = np.random.Generator(np.random.PCG64(noise_ss))
    sample_rng = np.random.Generator(np.random.PCG64(sample_ss))
    burn_rng = np.random.Generator(np.random.PCG64(burn_ss))

    obs = task.observation()
    action_dim = task.action_dim
    agent = ActorCritic.initialize(obs.size, action_dim, hyper, init_rng)
    buffer = ReplayBuffer(hyper.replay_capacity, obs.size, action_dim)
    log = TrainLog()
    seed_base = getattr(task, "seed_base", 0)

    best_actor = agent.actor.copy()
    best_eval_mean = -math.inf
    burn_in_actions: list[np.ndarray] = []

    for iteration in range(1, hyper.train_iterations + 1):
        if iteration <= hyper.burn_in:
            action = burn_rng.uniform(-1.0, 1.0, size=action_dim)
            burn_in_actions.append(action.copy())
        else:
            action = select_action(agent.actor, obs, hyper.expl_noise, noise_rng)

        first_seed = seed_base + (iteration - 1) * hyper.replicates_per_action
        reward = float(
            np.mean(
                [
                    task.rollout(action, first_seed + i)
                    for i in range(hyper.replicates_per_action)
                ]
            )
        )
        buffer.add(Transition(obs, action, reward))

        critic_loss = actor_objective = math.nan
        if len(buffer) >= hyper.batch_size:
            for _ in range(hyper.critic_updates_per_step - 1):
                agent.critic_step(buffer.sample(hyper.batch_size, sample_rng))
            critic_loss, actor_objective = agent.train_step(
                buffer.sample(hyper.batch_size, sample_rng)
            )

        eval_mean = eval_sd = math.nan
        if iteration % hyper.eval_every == 0:
            result = evaluate(agent.actor, task, hyper.eval_repeats)
            eval_mean, eval_sd = result.mean, result.sd
            if eval_mean > best_eval_mean:
                best_eval_mean = eval_mean
                best_actor = agent.actor.copy()

        log.append(iteration, reward, critic_loss, actor_objective, eval_mean, eval_sd)

    return TrainResult(
        agent=agent,
        log=log,
        best_actor=best_actor,
        best_eval_mean=best_eval_mean,
        burn_in_actions=burn_in_actions,
    )
