"""Plain-text file formats: transition logs, metrics tables, trajectory dumps.

Floats are written with ``repr`` (shortest round-tripping decimal), so every
file reads back to bit-identical values.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

from .env import Action, Kind, State, Transition
from .errors import ParseError

TRANSITION_LOG_TAG = "#format=nfq-steer-transitions/1"
TRANSITION_COLUMNS = ("episode", "t", "pos", "vel", "volt", "action_code", "cost",
                      "next_pos", "next_vel", "next_volt", "kind")
METRICS_COLUMNS = ("episode", "steps", "total_cost", "success", "terminated", "reset")
TRAJECTORY_COLUMNS = ("episode", "t", "position", "velocity", "voltage", "action", "cost", "kind")

_KIND_NAMES = {k: k.name.lower() for k in Kind}
_KINDS_BY_NAME = {v: k for k, v in _KIND_NAMES.items()}


def fmt(x: float) -> str:
    return repr(float(x))


def _float(text, path, line, name):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"column {name!r}: not a number: {text!r}", path, line) from None
    if not math.isfinite(v):
        raise ParseError(f"column {name!r}: non-finite value {text!r}", path, line)
    return v


def _int(text, path, line, name):
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"column {name!r}: not an integer: {text!r}", path, line) from None


def _flag(text, path, line, name):
    if text not in ("0", "1"):
        raise ParseError(f"column {name!r}: expected 0 or 1, got {text!r}", path, line)
    return text == "1"


def _action(text, path, line):
    code = _int(text, path, line, "action_code")
    if code not in (-1, 1):
        raise ParseError(f"action code must be -1 or 1, got {code}", path, line)
    return Action(code)


def _kind(text, path, line):
    try:
        return _KINDS_BY_NAME[text]
    except KeyError:
        raise ParseError(f"unknown kind {text!r}", path, line) from None


# -- transition log ------------------------------------------------------------

class LoggedTransition(NamedTuple):
    episode: int
    t: int
    transition: Transition
    line: int = 0


def transition_row(episode: int, t: int, tr: Transition) -> str:
    return ",".join([str(episode), str(t), fmt(tr.s.position), fmt(tr.s.velocity),
                     fmt(tr.s.voltage), str(int(tr.a)), fmt(tr.cost),
                     fmt(tr.s_next.position), fmt(tr.s_next.velocity), fmt(tr.s_next.voltage),
                     _KIND_NAMES[tr.kind]])


def write_transition_log(path, rows: Iterable[tuple[int, int, Transition]]) -> int:
    """Write ``(episode, t, transition)`` rows; returns the number of data rows."""
    path = Path(path)
    n = 0
    with path.open("w", newline="") as fh:
        fh.write(TRANSITION_LOG_TAG + "\n")
        fh.write(",".join(TRANSITION_COLUMNS) + "\n")
        for episode, t, tr in rows:
            fh.write(transition_row(episode, t, tr) + "\n")
            n += 1
    return n


def iter_transition_log(path) -> Iterator[LoggedTransition]:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline().rstrip("\n")
        if first != TRANSITION_LOG_TAG:
            raise ParseError(f"missing format tag {TRANSITION_LOG_TAG!r}", path, 1)
        header = fh.readline().rstrip("\n")
        if header != ",".join(TRANSITION_COLUMNS):
            raise ParseError("unexpected column header", path, 2)
        for lineno, raw in enumerate(fh, start=3):
            raw = raw.rstrip("\n")
            if not raw:
                continue
            cols = raw.split(",")
            if len(cols) != len(TRANSITION_COLUMNS):
                raise ParseError(f"expected {len(TRANSITION_COLUMNS)} columns, got {len(cols)}",
                                 path, lineno)
            f = [_float(cols[i], path, lineno, TRANSITION_COLUMNS[i]) for i in (2, 3, 4, 6, 7, 8, 9)]
            tr = Transition(State(f[0], f[1], f[2]), _action(cols[5], path, lineno), f[3],
                            State(f[4], f[5], f[6]), _kind(cols[10], path, lineno))
            yield LoggedTransition(_int(cols[0], path, lineno, "episode"),
                                   _int(cols[1], path, lineno, "t"), tr, lineno)


def read_transition_log(path) -> list[LoggedTransition]:
    return list(iter_transition_log(path))


# -- metrics -------------------------------------------------------------------

class EpisodeMetrics(NamedTuple):
    episode: int
    steps: int
    total_cost: float
    success: bool
    terminated: bool
    reset: bool = False


def write_metrics(path, rows: Iterable[EpisodeMetrics]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(METRICS_COLUMNS) + "\n")
        for m in rows:
            fh.write(f"{m.episode},{m.steps},{fmt(m.total_cost)},{int(m.success)},"
                     f"{int(m.terminated)},{int(m.reset)}\n")
    return path


def read_metrics(path) -> list[EpisodeMetrics]:
    path = Path(path)
    out = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != METRICS_COLUMNS:
            raise ParseError("unexpected metrics header", path, 1)
        for lineno, cols in enumerate(reader, start=2):
            if not cols:
                continue
            if len(cols) != len(METRICS_COLUMNS):
                raise ParseError(f"expected {len(METRICS_COLUMNS)} columns, got {len(cols)}",
                                 path, lineno)
            out.append(EpisodeMetrics(
                _int(cols[0], path, lineno, "episode"), _int(cols[1], path, lineno, "steps"),
                _float(cols[2], path, lineno, "total_cost"),
                _flag(cols[3], path, lineno, "success"), _flag(cols[4], path, lineno, "terminated"),
                _flag(cols[5], path, lineno, "reset")))
    return out


# -- trajectory dumps ----------------------------------------------------------

@dataclass
class TrajectoryDump:
    """One episode: ``states[t]`` for t = 0..n and the n actions taken.

    ``costs[t]`` and ``kinds[t]`` describe the step from ``states[t]`` to
    ``states[t + 1]``.
    """

    episode: int
    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    costs: list = field(default_factory=list)
    kinds: list = field(default_factory=list)
    label: str = ""

    @classmethod
    def from_transitions(cls, episode: int, start: State, transitions: Sequence[Transition],
                         label: str = "") -> "TrajectoryDump":
        states = [start] + [tr.s_next for tr in transitions]
        return cls(episode, states, [tr.a for tr in transitions],
                   [tr.cost for tr in transitions], [tr.kind for tr in transitions], label)

    @property
    def steps(self) -> int:
        return len(self.actions)

    @property
    def total_cost(self) -> float:
        return float(sum(self.costs))

    def transitions(self) -> list[Transition]:
        return [Transition(self.states[i], self.actions[i], self.costs[i], self.states[i + 1],
                           self.kinds[i]) for i in range(self.steps)]

    def rows(self):
        for t, s in enumerate(self.states):
            if t < self.steps:
                tail = [str(int(self.actions[t])), fmt(self.costs[t]), _KIND_NAMES[self.kinds[t]]]
            else:
                tail = ["", "", ""]
            yield [str(self.episode), str(t), fmt(s.position), fmt(s.velocity), fmt(s.voltage)] + tail


def write_trajectories(path, dumps: Iterable[TrajectoryDump]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for d in dumps:
            for row in d.rows():
                fh.write(",".join(row) + "\n")
    return path


def read_trajectories(path, label: str = "") -> list[TrajectoryDump]:
    path = Path(path)
    dumps: list[TrajectoryDump] = []
    current = None
    closed = True
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRAJECTORY_COLUMNS:
            raise ParseError("unexpected trajectory header", path, 1)
        for lineno, cols in enumerate(reader, start=2):
            if not cols:
                continue
            if len(cols) != len(TRAJECTORY_COLUMNS):
                raise ParseError(f"expected {len(TRAJECTORY_COLUMNS)} columns", path, lineno)
            episode = _int(cols[0], path, lineno, "episode")
            t = _int(cols[1], path, lineno, "t")
            s = State(*(_float(cols[i], path, lineno, TRAJECTORY_COLUMNS[i]) for i in (2, 3, 4)))
            if t == 0:
                if not closed:
                    raise ParseError("previous trajectory has no final state row", path, lineno)
                current = TrajectoryDump(episode, label=label)
                dumps.append(current)
            elif current is None or closed or t != len(current.states) or episode != current.episode:
                raise ParseError("trajectory rows out of order", path, lineno)
            current.states.append(s)
            if cols[5] == "":
                closed = True
            else:
                closed = False
                current.actions.append(_action(cols[5], path, lineno))
                current.costs.append(_float(cols[6], path, lineno, "cost"))
                current.kinds.append(_kind(cols[7], path, lineno))
    if not closed:
        raise ParseError("last trajectory has no final state row", path)
    return dumps
