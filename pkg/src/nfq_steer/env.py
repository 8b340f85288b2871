"""MDP vocabulary shared by the physics and replay environments.

Positions are fractions of a full wheel turn, velocities are position deltas
per 20 ms control step and voltages are the last applied motor command.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError

DT = 0.02
VOLTAGE_STEP = 0.1


class Action(enum.IntEnum):
    LEFT = -1
    RIGHT = 1

    @property
    def code(self) -> int:
        return int(self)


ACTIONS = (Action.LEFT, Action.RIGHT)


class Kind(enum.IntEnum):
    REGULAR = 0
    GOAL = 1
    FORBIDDEN = 2


class State(NamedTuple):
    position: float
    velocity: float
    voltage: float

    def is_finite(self) -> bool:
        return all(math.isfinite(c) for c in self)

    def mirrored(self) -> "State":
        return State(-self.position, -self.velocity, -self.voltage)


class Transition(NamedTuple):
    s: State
    a: Action
    cost: float
    s_next: State
    kind: Kind


@dataclass(frozen=True)
class RegionSpec:
    """Goal and forbidden region bounds.

    ``forbid_velocity`` turns on an extra forbidden condition
    ``|velocity| >= forbidden_velocity``; it is off by default.
    """

    goal_position: float = 0.05
    goal_velocity: float = 0.01
    forbidden_position: float = 0.7
    forbidden_velocity: float = 0.04
    forbid_velocity: bool = False
    v_max: float = 1.0

    def __post_init__(self):
        if not self.v_max > 0:
            raise ConfigurationError("v_max must be positive")
        bounds = (self.goal_position, self.goal_velocity,
                  self.forbidden_position, self.forbidden_velocity)
        if not all(b > 0 for b in bounds):
            raise ConfigurationError("region bounds must be positive")
        if self.goal_position >= self.forbidden_position:
            raise ConfigurationError("goal position bound must be below the forbidden bound")


@dataclass(frozen=True)
class CostParams:
    step_cost: float = 0.001
    away_multiplier: float = 2.0
    forbidden_cost: float = 1.0
    goal_cost: float = 0.0

    def __post_init__(self):
        if self.step_cost < 0:
            raise ConfigurationError("step cost must be non-negative")
        for c in (self.step_cost * self.away_multiplier, self.forbidden_cost, self.goal_cost):
            if not 0.0 <= c <= 1.0:
                raise ConfigurationError("costs must lie in [0, 1]")


def classify(s: State, regions: RegionSpec = RegionSpec()) -> Kind:
    pos, vel = abs(s.position), abs(s.velocity)
    if pos >= regions.forbidden_position or (
            regions.forbid_velocity and vel >= regions.forbidden_velocity):
        return Kind.FORBIDDEN
    if pos < regions.goal_position and vel < regions.goal_velocity:
        return Kind.GOAL
    return Kind.REGULAR


def cost(s_next: State, s_prev: State, regions: RegionSpec = RegionSpec(),
         params: CostParams = CostParams()) -> float:
    """Immediate cost of arriving in ``s_next`` from ``s_prev``.

    Regular steps cost ``step_cost``, doubled (by ``away_multiplier``) when
    ``|position|`` strictly grows over the step.
    """
    kind = classify(s_next, regions)
    if kind is Kind.GOAL:
        return params.goal_cost
    if kind is Kind.FORBIDDEN:
        return params.forbidden_cost
    if abs(s_next.position) > abs(s_prev.position):
        return params.step_cost * params.away_multiplier
    return params.step_cost


def apply_action(voltage: float, a: Action, v_max: float = 1.0) -> float:
    """Shift the last voltage by 0.1 V in the action's direction, clamped to +-v_max."""
    # Rounded so repeated +-0.1 increments stay on the decimal grid.
    v = round(voltage + VOLTAGE_STEP * int(a), 10)
    return min(max(v, -v_max), v_max)


def is_terminal(kind: Kind) -> bool:
    return kind is Kind.FORBIDDEN


def normalize_input(s: State, a: Action, regions: RegionSpec = RegionSpec(),
                    v_max: float | None = None) -> np.ndarray:
    """Network input ``[pos/0.7, vel/0.04, volt/v_max, code]`` clipped to [-1, 1]."""
    v_max = regions.v_max if v_max is None else v_max
    x = np.array([s.position / regions.forbidden_position,
                  s.velocity / regions.forbidden_velocity,
                  s.voltage / v_max,
                  float(int(a))])
    return np.clip(x, -1.0, 1.0)


def normalize_batch(states: np.ndarray, actions, regions: RegionSpec = RegionSpec(),
                    v_max: float | None = None) -> np.ndarray:
    """Vectorised :func:`normalize_input` for ``(D, 3)`` states and action codes."""
    v_max = regions.v_max if v_max is None else v_max
    states = np.asarray(states, dtype=float)
    x = np.empty((states.shape[0], 4))
    x[:, 0] = states[:, 0] / regions.forbidden_position
    x[:, 1] = states[:, 1] / regions.forbidden_velocity
    x[:, 2] = states[:, 2] / v_max
    x[:, 3] = actions
    return np.clip(x, -1.0, 1.0, out=x)


def classify_batch(states: np.ndarray, regions: RegionSpec = RegionSpec()) -> np.ndarray:
    states = np.asarray(states, dtype=float)
    pos, vel = np.abs(states[:, 0]), np.abs(states[:, 1])
    forbidden = pos >= regions.forbidden_position
    if regions.forbid_velocity:
        forbidden |= vel >= regions.forbidden_velocity
    goal = (pos < regions.goal_position) & (vel < regions.goal_velocity)
    out = np.full(states.shape[0], int(Kind.REGULAR), dtype=np.int8)
    out[goal] = int(Kind.GOAL)
    out[forbidden] = int(Kind.FORBIDDEN)
    return out


def make_transition(s: State, a: Action, s_next: State, regions: RegionSpec,
                    params: CostParams) -> Transition:
    return Transition(s, a, cost(s_next, s, regions, params), s_next, classify(s_next, regions))
