"""Data-driven replay simulator.

A step from state ``s`` under action ``a`` looks up the logged transition
whose start state is closest to ``s`` (weighted squared distance, among
records with the same action) and returns that record's successor state
verbatim.  Cost and region kind are recomputed for the new step.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable

import numpy as np

from .env import (Action, CostParams, RegionSpec, State, Transition, classify, cost,
                  make_transition)
from .errors import ConfigurationError, ParseError, ReplayLookupError
from .physics import InitSpec, reset_env
from .records import LoggedTransition, iter_transition_log


def default_weights(regions: RegionSpec = RegionSpec()) -> tuple[float, float, float]:
    return (1.0 / regions.forbidden_position ** 2, 1.0 / regions.forbidden_velocity ** 2,
            1.0 / regions.v_max ** 2)


class TransitionSet:
    """Immutable, ordered collection of logged transitions with lookup arrays."""

    def __init__(self, transitions: Iterable[Transition], weights=None,
                 regions: RegionSpec = RegionSpec(), match_action: bool = True):
        self.transitions = tuple(transitions)
        if not self.transitions:
            raise ConfigurationError("a replay simulator needs at least one transition")
        self.weights = tuple(float(w) for w in (weights or default_weights(regions)))
        if len(self.weights) != 3 or not all(w > 0 for w in self.weights):
            raise ConfigurationError("distance weights must be three positive numbers")
        self.match_action = match_action
        self.states = np.array([tr.s for tr in self.transitions], dtype=np.float64)
        self.actions = np.array([int(tr.a) for tr in self.transitions], dtype=np.int8)
        self._cols = [np.ascontiguousarray(self.states[:, c]) for c in range(3)]
        self._candidates = {a: np.flatnonzero(self.actions == int(a)) for a in Action}
        self._all = np.arange(len(self.transitions))

    def __len__(self):
        return len(self.transitions)

    def __getitem__(self, i) -> Transition:
        return self.transitions[i]

    def successor_states(self) -> set[State]:
        return {tr.s_next for tr in self.transitions}


def _validate(record: LoggedTransition | Transition, regions, params, path=None) -> Transition:
    line = record.line if isinstance(record, LoggedTransition) else None
    tr = record.transition if isinstance(record, LoggedTransition) else record
    if not (tr.s.is_finite() and tr.s_next.is_finite() and math.isfinite(tr.cost)):
        raise ParseError("non-finite value in transition", path, line)
    if classify(tr.s_next, regions) is not tr.kind:
        raise ParseError(f"kind {tr.kind.name} disagrees with the successor state", path, line)
    if cost(tr.s_next, tr.s, regions, params) != tr.cost:
        raise ParseError(f"cost {tr.cost!r} disagrees with the cost function", path, line)
    return tr


def build_from_log(source, regions: RegionSpec = RegionSpec(),
                   params: CostParams = CostParams(), weights=None,
                   match_action: bool = True) -> TransitionSet:
    """Build a :class:`TransitionSet` from a log path or from in-memory records.

    Records keep their log order.  Every record is checked against the
    region and cost definitions; failures name the offending line.
    """
    path = None
    if isinstance(source, (str, Path)):
        path = Path(source)
        records = iter_transition_log(path)
    else:
        records = source
    transitions = [_validate(r, regions, params, path) for r in records]
    if not transitions:
        raise ConfigurationError(f"empty transition log{f' {path}' if path else ''}")
    return TransitionSet(transitions, weights, regions, match_action)


def nearest_neighbor(tset: TransitionSet, query: State, a: Action) -> int:
    """Index of the closest stored start state; ties go to the lowest index."""
    idx = tset._candidates[Action(a)] if tset.match_action else tset._all
    if idx.size == 0:
        raise ReplayLookupError(f"no logged transition with action {Action(a).name}")
    w0, w1, w2 = tset.weights
    d = tset._cols[0][idx] - query[0]
    dist = w0 * (d * d)
    d = tset._cols[1][idx] - query[1]
    dist += w1 * (d * d)
    d = tset._cols[2][idx] - query[2]
    dist += w2 * (d * d)
    return int(idx[int(np.argmin(dist))])


def step_replay(tset: TransitionSet, s: State, a: Action, regions: RegionSpec = RegionSpec(),
                params: CostParams = CostParams()) -> Transition:
    s_next = tset.transitions[nearest_neighbor(tset, s, a)].s_next
    return make_transition(s, Action(a), s_next, regions, params)


class ReplayEnv:
    """Environment adapter around :func:`step_replay`.

    Episodes start from the same initial-state distribution as the physics
    plant; after that no randomness is involved.
    """

    name = "replay"

    def __init__(self, tset: TransitionSet, regions: RegionSpec = RegionSpec(),
                 costs: CostParams = CostParams(), init: InitSpec = InitSpec()):
        self.tset = tset
        self.regions = regions
        self.costs = costs
        self.init = init

    def reset(self, rng: np.random.Generator) -> State:
        return reset_env(self.init, rng)

    def step(self, s: State, a: Action, rng=None) -> Transition:
        return step_replay(self.tset, s, a, self.regions, self.costs)
