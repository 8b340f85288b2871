"""Synthetic DC-motor plant stepped at the 50 Hz control rate.

The velocity follows a damped first-order recurrence driven by the applied
voltage plus Gaussian process noise:

    velocity' = (1 - damping) * velocity + torque_gain * voltage' + noise
    position' = position + velocity'

It is a desk-scale stand-in for the steering hardware, not a model of it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import (DT, Action, CostParams, RegionSpec, State, Transition, apply_action,
                  make_transition)
from .errors import ConfigurationError


@dataclass(frozen=True)
class MotorModel:
    """First-order velocity dynamics: ``vel' = (1 - d) vel + k_u V' + noise``.

    The defaults put the terminal speed at full voltage (``k_u / d = 0.04``
    per step) on the velocity scale used for the network input.
    """
    torque_gain: float = 0.004
    damping: float = 0.1
    noise_std: float = 0.0005
    dt: float = DT

    def __post_init__(self):
        if not 0.0 <= self.damping < 1.0:
            raise ConfigurationError("damping must lie in [0, 1)")
        if not self.torque_gain > 0:
            raise ConfigurationError("torque_gain must be positive")
        if self.noise_std < 0:
            raise ConfigurationError("noise_std must be non-negative")


@dataclass(frozen=True)
class InitSpec:
    position_range: float = 0.5
    velocity: float = 0.0
    voltage: float = 0.0

    def __post_init__(self):
        if not self.position_range >= 0:
            raise ConfigurationError("position_range must be non-negative")


def reset_env(spec: InitSpec = InitSpec(), seed=None, regions: RegionSpec | None = None) -> State:
    """Initial state with position uniform on ``[-range, range]``.

    ``seed`` may be an int, a ``SeedSequence`` or an existing ``Generator``.
    """
    if regions is not None and spec.position_range >= regions.forbidden_position:
        raise ConfigurationError("initial position range must lie inside the forbidden bound")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    r = spec.position_range
    return State(float(rng.uniform(-r, r)), spec.velocity, spec.voltage)


def step_physics(s: State, a: Action, model: MotorModel = MotorModel(),
                 regions: RegionSpec = RegionSpec(), params: CostParams = CostParams(),
                 rng: np.random.Generator | None = None) -> Transition:
    volt = apply_action(s.voltage, a, regions.v_max)
    noise = 0.0
    if model.noise_std > 0:
        if rng is None:
            raise ConfigurationError("a random generator is required when noise_std > 0")
        noise = float(rng.normal(0.0, model.noise_std))
    vel = (1.0 - model.damping) * s.velocity + model.torque_gain * volt + noise
    return make_transition(s, a, State(s.position + vel, vel, volt), regions, params)


class PhysicsEnv:
    """Environment adapter around :func:`step_physics`."""

    name = "physics"

    def __init__(self, model: MotorModel = MotorModel(), regions: RegionSpec = RegionSpec(),
                 costs: CostParams = CostParams(), init: InitSpec = InitSpec()):
        if init.position_range >= regions.forbidden_position:
            raise ConfigurationError("initial position range must lie inside the forbidden bound")
        self.model = model
        self.regions = regions
        self.costs = costs
        self.init = init

    def reset(self, rng: np.random.Generator) -> State:
        return reset_env(self.init, rng)

    def step(self, s: State, a: Action, rng: np.random.Generator) -> Transition:
        return step_physics(s, a, self.model, self.regions, self.costs, rng)
