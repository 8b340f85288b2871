"""Neural fitted Q iteration on a growing batch of transitions.

Each episode is collected epsilon-greedily with the current Q-network and
appended to the experience buffer.  Then, for every NFQ iteration, Bellman
targets are regenerated over the *whole* buffer against the frozen network,
hint-to-goal patterns are added, and the network is re-fitted by Rprop.
Network and optimizer are re-initialised every ``reset_period`` episodes;
the buffer is never cleared.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .env import (ACTIONS, Action, Kind, RegionSpec, State, Transition, is_terminal,
                  normalize_batch, normalize_input)
from .errors import ConfigurationError, ReplayLookupError, TrainingDivergedError
from .net import (LayerSpec, NetworkParams, PatternSet, RpropParams, RpropState, forward_batch,
                  is_finite, reset, train)
from .records import EpisodeMetrics

log = logging.getLogger(__name__)

# SeedSequence spawn-key streams
STREAM_EPISODE = 0
STREAM_NETWORK = 1


@dataclass(frozen=True)
class NfqConfig:
    gamma: float = 0.98
    epsilon: float = 0.1
    episodes: int = 300
    max_steps: int = 300
    reset_period: int = 100
    iterations: int = 1
    epochs: int = 300
    hint_count: int = 100
    seed: int = 0
    success_hold_steps: int = 1
    sizes: tuple = (4, 5, 5, 1)
    rprop: RpropParams = field(default_factory=RpropParams)
    # start every fit with Rprop step sizes at delta0 (weights are kept)
    restart_rprop: bool = True

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigurationError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must lie in [0, 1], got {self.gamma}")
        for name in ("episodes", "max_steps", "reset_period", "iterations", "epochs",
                     "hint_count", "success_hold_steps"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.reset_period > self.episodes:
            raise ConfigurationError("reset_period cannot exceed the number of episodes")
        spec = LayerSpec(self.sizes)
        if spec.sizes[0] != 4 or spec.sizes[-1] != 1:
            raise ConfigurationError("the Q-network must map 4 inputs to 1 output")

    @property
    def layer_spec(self) -> LayerSpec:
        return LayerSpec(self.sizes)


# -- seeds ---------------------------------------------------------------------

def episode_rng(seed: int, episode: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAM_EPISODE, episode)))


def network_seed(seed: int, block: int) -> int:
    """Integer init seed for the ``block``-th network (0 = initial, k = k-th reset)."""
    ss = np.random.SeedSequence(seed, spawn_key=(STREAM_NETWORK, block))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def is_reset_episode(episode: int, period: int) -> bool:
    """Episodes are 1-based; a reset happens before episodes period+1, 2*period+1, ..."""
    return episode > 1 and (episode - 1) % period == 0


# -- experience ----------------------------------------------------------------

class ExperienceBuffer:
    """Append-only store of every transition collected so far."""

    def __init__(self, capacity: int = 1024):
        self._n = 0
        self._s = np.empty((capacity, 3))
        self._a = np.empty(capacity, dtype=np.int8)
        self._c = np.empty(capacity)
        self._s2 = np.empty((capacity, 3))
        self._k = np.empty(capacity, dtype=np.int8)

    def __len__(self):
        return self._n

    def _grow(self, need):
        cap = self._s.shape[0]
        if need <= cap:
            return
        cap = max(need, 2 * cap)
        for name in ("_s", "_a", "_c", "_s2", "_k"):
            old = getattr(self, name)
            new = np.empty((cap,) + old.shape[1:], dtype=old.dtype)
            new[: self._n] = old[: self._n]
            setattr(self, name, new)

    def append(self, tr: Transition):
        self.extend([tr])

    def extend(self, transitions):
        transitions = list(transitions)
        if not transitions:
            return
        self._grow(self._n + len(transitions))
        i = self._n
        for tr in transitions:
            self._s[i] = tr.s
            self._a[i] = int(tr.a)
            self._c[i] = tr.cost
            self._s2[i] = tr.s_next
            self._k[i] = int(tr.kind)
            i += 1
        self._n = i

    @property
    def states(self):
        return self._s[: self._n]

    @property
    def actions(self):
        return self._a[: self._n]

    @property
    def costs(self):
        return self._c[: self._n]

    @property
    def next_states(self):
        return self._s2[: self._n]

    @property
    def kinds(self):
        return self._k[: self._n]

    def __getitem__(self, i) -> Transition:
        if not -self._n <= i < self._n:
            raise IndexError(i)
        i %= self._n
        return Transition(State(*map(float, self._s[i])), Action(int(self._a[i])),
                          float(self._c[i]), State(*map(float, self._s2[i])), Kind(int(self._k[i])))

    def __iter__(self):
        for i in range(self._n):
            yield self[i]


# -- action selection ----------------------------------------------------------

def q_values(net: NetworkParams, s: State, regions: RegionSpec = RegionSpec()) -> np.ndarray:
    """``[Q(s, LEFT), Q(s, RIGHT)]``."""
    x = np.stack([normalize_input(s, a, regions) for a in ACTIONS])
    return forward_batch(net, x)


def greedy_action(net: NetworkParams, s: State, regions: RegionSpec = RegionSpec()) -> Action:
    q_left, q_right = q_values(net, s, regions)
    return Action.RIGHT if q_right < q_left else Action.LEFT


def explores(epsilon: float, rng: np.random.Generator) -> bool:
    return bool(rng.random() < epsilon)


def random_action(rng: np.random.Generator) -> Action:
    return ACTIONS[int(rng.integers(2))]


def select_action(net: NetworkParams, s: State, epsilon: float, rng: np.random.Generator,
                  regions: RegionSpec = RegionSpec()) -> Action:
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigurationError(f"epsilon must lie in [0, 1], got {epsilon}")
    if explores(epsilon, rng):
        return random_action(rng)
    return greedy_action(net, s, regions)


# -- episodes ------------------------------------------------------------------

@dataclass
class Episode:
    start: State
    transitions: list
    metrics: EpisodeMetrics
    lookup_failed: bool = False

    @property
    def outcome(self) -> str:
        if self.metrics.success:
            return "success"
        if self.metrics.terminated:
            return "failure"
        return "timeout"


def episode_success(transitions, regions: RegionSpec, hold_steps: int = 1) -> bool:
    """Never entered the forbidden region and the last ``hold_steps`` states are goal states."""
    if len(transitions) < hold_steps:
        return False
    if any(tr.kind is Kind.FORBIDDEN for tr in transitions):
        return False
    return all(tr.kind is Kind.GOAL for tr in transitions[-hold_steps:])


Policy = Callable[[State, np.random.Generator], Action]


def run_episode(env, net: NetworkParams | None, config: NfqConfig, rng: np.random.Generator, *,
                start: State | None = None, epsilon: float | None = None,
                policy: Policy | None = None, episode: int = 0, reset_flag: bool = False
                ) -> Episode:
    """Roll out one episode of at most ``config.max_steps`` steps.

    Actions come from ``policy`` if given, otherwise epsilon-greedy on
    ``net`` (``epsilon`` defaults to ``config.epsilon``).  A replay lookup
    failure ends the episode without success.
    """
    eps = config.epsilon if epsilon is None else epsilon
    s = env.reset(rng) if start is None else start
    first = s
    transitions = []
    lookup_failed = False
    for _ in range(config.max_steps):
        if policy is not None:
            a = policy(s, rng)
        else:
            a = select_action(net, s, eps, rng, env.regions)
        try:
            tr = env.step(s, a, rng)
        except ReplayLookupError as exc:
            log.warning("episode %d: %s", episode, exc)
            lookup_failed = True
            break
        transitions.append(tr)
        if is_terminal(tr.kind):
            break
        s = tr.s_next
    terminated = bool(transitions) and is_terminal(transitions[-1].kind)
    success = not lookup_failed and episode_success(transitions, env.regions,
                                                    config.success_hold_steps)
    metrics = EpisodeMetrics(episode, len(transitions), float(sum(tr.cost for tr in transitions)),
                             success, terminated, reset_flag)
    return Episode(first, transitions, metrics, lookup_failed)


# -- patterns ------------------------------------------------------------------

def generate_patterns(buffer: ExperienceBuffer, net: NetworkParams, gamma: float = 0.95,
                      regions: RegionSpec = RegionSpec()) -> PatternSet:
    """Bellman targets ``cost + gamma * min_b Q(s', b)`` for every stored transition.

    Transitions into the forbidden region are terminal and keep their bare
    cost.  Targets are clipped to [0, 1].
    """
    n = len(buffer)
    if n == 0:
        raise ConfigurationError("cannot generate patterns from an empty buffer")
    inputs = normalize_batch(buffer.states, buffer.actions, regions)
    succ = buffer.next_states
    q_next = np.empty((2, n))
    for j, a in enumerate(ACTIONS):
        q_next[j] = forward_batch(net, normalize_batch(succ, np.full(n, int(a)), regions))
    targets = buffer.costs + gamma * q_next.min(axis=0)
    terminal = buffer.kinds == int(Kind.FORBIDDEN)
    targets[terminal] = buffer.costs[terminal]
    np.clip(targets, 0.0, 1.0, out=targets)
    return PatternSet(inputs, targets)


def reference_targets(buffer: ExperienceBuffer, net: NetworkParams, gamma: float,
                      regions: RegionSpec = RegionSpec()) -> np.ndarray:
    """Slow per-transition recomputation of :func:`generate_patterns` targets (verification)."""
    from .net import forward
    out = []
    for tr in buffer:
        if tr.kind is Kind.FORBIDDEN:
            t = tr.cost
        else:
            t = tr.cost + gamma * min(forward(net, normalize_input(tr.s_next, b, regions))
                                      for b in ACTIONS)
        out.append(min(max(t, 0.0), 1.0))
    return np.array(out)


def hint_to_goal(count: int, regions: RegionSpec, rng: np.random.Generator) -> PatternSet:
    """``count`` zero-target patterns on goal-region states, actions alternating LEFT/RIGHT."""
    if count < 1:
        raise ConfigurationError("hint count must be >= 1")
    pos = rng.uniform(-regions.goal_position, regions.goal_position, count)
    vel = rng.uniform(-regions.goal_velocity, regions.goal_velocity, count)
    volt = rng.uniform(-regions.v_max, regions.v_max, count)
    # uniform() is half-open; the lower edge is not a goal state
    pos[pos <= -regions.goal_position] = 0.0
    vel[vel <= -regions.goal_velocity] = 0.0
    codes = np.where(np.arange(count) % 2 == 0, int(Action.LEFT), int(Action.RIGHT))
    states = np.column_stack([pos, vel, volt])
    return PatternSet(normalize_batch(states, codes, regions), np.zeros(count))


# -- training loop -------------------------------------------------------------

@dataclass
class TrainResult:
    metrics: list
    net: NetworkParams
    opt: RpropState
    buffer: ExperienceBuffer
    losses: list = field(default_factory=list)


CheckpointHook = Callable[[str, int, NetworkParams, RpropState], None]


def train_loop(env, config: NfqConfig, *, checkpoint_hook: Optional[CheckpointHook] = None,
               episode_hook: Optional[Callable[[Episode], None]] = None,
               verify_targets: bool = False) -> TrainResult:
    """Growing-batch NFQ.  Deterministic for a given ``config.seed``.

    ``checkpoint_hook(tag, episode, net, opt)`` is called with the trained
    network just before each reset (tag ``"pre-reset"``) and once at the end
    (tag ``"final"``).
    """
    spec = config.layer_spec
    block = 0
    net, opt = reset(spec, network_seed(config.seed, block), config.rprop)
    buffer = ExperienceBuffer()
    metrics, losses = [], []
    for e in range(1, config.episodes + 1):
        reset_now = is_reset_episode(e, config.reset_period)
        if reset_now:
            if checkpoint_hook is not None:
                checkpoint_hook("pre-reset", e - 1, net, opt)
            block += 1
            net, opt = reset(spec, network_seed(config.seed, block), config.rprop)
        rng = episode_rng(config.seed, e)
        ep = run_episode(env, net, config, rng, episode=e, reset_flag=reset_now)
        buffer.extend(ep.transitions)
        metrics.append(ep.metrics)
        if episode_hook is not None:
            episode_hook(ep)
        if len(buffer) == 0:
            continue
        for _ in range(config.iterations):
            patterns = generate_patterns(buffer, net, config.gamma, env.regions)
            if verify_targets:
                ref = reference_targets(buffer, net, config.gamma, env.regions)
                if not np.allclose(patterns.targets, ref, rtol=0.0, atol=1e-12):
                    raise AssertionError(f"episode {e}: Bellman targets disagree with reference")
            patterns = patterns.concat(hint_to_goal(config.hint_count, env.regions, rng))
            if not np.all(np.isfinite(patterns.targets)):
                raise TrainingDivergedError(f"non-finite training target in episode {e}", e)
            if config.restart_rprop:
                opt = RpropState.fresh(spec.n_params, config.rprop)
            net, opt, report = train(net, opt, patterns, config.epochs)
            losses.append(report)
            if not is_finite(net):
                raise TrainingDivergedError(f"non-finite network weight in episode {e}", e)
        log.debug("episode %d steps=%d cost=%.4f success=%s buffer=%d loss=%.3g", e,
                  ep.metrics.steps, ep.metrics.total_cost, ep.metrics.success, len(buffer),
                  losses[-1].final_loss)
    if checkpoint_hook is not None:
        checkpoint_hook("final", config.episodes, net, opt)
    return TrainResult(metrics, net, opt, buffer, losses)
