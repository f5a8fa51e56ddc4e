"""Open-field gridworld with reflective boundaries and seeded rollouts.

States are indexed row-major, ``index = row * lx + col`` with row 0 at the
bottom.  Rollouts draw uniforms from ``numpy.random.Philox`` seeded with the
run seed; the start state uses the first uniform and every transition one
further uniform, mapped through the cumulative row of P (inverse CDF).
"""

from __future__ import annotations

import bisect
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import DimensionError, DomainError
from .markov import MdpModel, build_policy_transition, check_transition, stationary_distribution

ACTIONS = ("left", "right", "up", "down", "stay")
_MOVES = {"left": (0, -1), "right": (0, 1), "up": (1, 0), "down": (-1, 0), "stay": (0, 0)}
_OPPOSITE = {"left": "right", "right": "left", "up": "down", "down": "up", "stay": "stay"}

MAGIC = b"SFTR"
VERSION = 1
_HEADER = struct.Struct("<4sIIQQ")


@dataclass(frozen=True)
class Gridworld:
    """Rectangular field; ``self_transition`` is the policy weight of ``stay``.

    The remaining probability is split evenly over the four moves, so the
    default 0.2 is the uniform policy over all five actions.
    """

    lx: int
    ly: int
    self_transition: float = 0.2

    def __post_init__(self):
        if self.lx < 1 or self.ly < 1:
            raise DomainError(f"grid dimensions must be positive, got {self.lx}x{self.ly}")
        if not 0.0 <= self.self_transition <= 1.0:
            raise DomainError("self_transition must lie in [0, 1]")

    @property
    def n_states(self) -> int:
        return self.lx * self.ly

    def index(self, row: int, col: int) -> int:
        if not (0 <= row < self.ly and 0 <= col < self.lx):
            raise DomainError(f"cell ({row}, {col}) outside the grid")
        return row * self.lx + col

    def coords(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.n_states:
            raise DomainError(f"state {index} outside the grid")
        return divmod(index, self.lx)

    def to_grid(self, vector) -> np.ndarray:
        """Reshape a state vector to a ``ly x lx`` field indexed ``[row, col]``."""
        v = np.asarray(vector, dtype=float)
        if v.shape != (self.n_states,):
            raise DimensionError(f"expected a vector of length {self.n_states}, got {v.shape}")
        return v.reshape(self.ly, self.lx)

    def _inside(self, row: int, col: int) -> bool:
        return 0 <= row < self.ly and 0 <= col < self.lx

    def successor(self, index: int, action: str) -> int:
        """Target of ``action``; forbidden moves reflect, and stay if the reflection is forbidden too."""
        row, col = self.coords(index)
        for a in (action, _OPPOSITE[action]):
            dr, dc = _MOVES[a]
            if self._inside(row + dr, col + dc):
                return self.index(row + dr, col + dc)
        return index

    def policy(self) -> np.ndarray:
        move = (1.0 - self.self_transition) / 4.0
        row = np.array([move, move, move, move, self.self_transition])
        return np.tile(row, (self.n_states, 1))

    def model(self) -> MdpModel:
        kernel = np.zeros((self.n_states, len(ACTIONS), self.n_states))
        for s in range(self.n_states):
            for a, name in enumerate(ACTIONS):
                kernel[s, a, self.successor(s, name)] = 1.0
        return MdpModel(kernel, self.policy())


def build_transition(world: Gridworld) -> np.ndarray:
    return build_policy_transition(world.model())


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray
    n_states: int
    seed: int = 0

    def __post_init__(self):
        s = np.asarray(self.states, dtype=np.uint32)
        if s.ndim != 1:
            raise DimensionError("states must be a 1-D sequence")
        if s.size and int(s.max()) >= self.n_states:
            raise DomainError("state index out of range")
        object.__setattr__(self, "states", s)

    def __len__(self) -> int:
        return int(self.states.shape[0])

    def one_hot(self) -> "OneHotView":
        return OneHotView(self)

    def visit_frequencies(self) -> np.ndarray:
        return np.bincount(self.states, minlength=self.n_states) / len(self)


class OneHotView:
    """Rows ``x(t)`` of the one-hot encoding, materialized on request."""

    def __init__(self, trajectory: Trajectory):
        self.trajectory = trajectory

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.trajectory), self.trajectory.n_states)

    def __getitem__(self, rows) -> np.ndarray:
        s = np.atleast_1d(self.trajectory.states[rows])
        x = np.zeros((s.shape[0], self.trajectory.n_states))
        x[np.arange(s.shape[0]), s] = 1.0
        return x

    def __array__(self, dtype=None, copy=None):
        x = self[:]
        return x if dtype is None else x.astype(dtype)


def rollout(P, T: int, seed: int, start: Optional[int] = None, pi=None) -> Trajectory:
    """Sample a trajectory of length T.

    Without ``start`` the initial state is drawn from ``pi`` (computed from P
    when not given).
    """
    P = check_transition(P)
    n = P.shape[0]
    if T < 2:
        raise DomainError("T must be at least 2")
    rng = np.random.Generator(np.random.Philox(seed))
    u = rng.random(T)
    if start is None:
        p0 = stationary_distribution(P) if pi is None else np.asarray(pi, dtype=float)
        c0 = np.cumsum(p0)
        state = min(int(np.searchsorted(c0 / c0[-1], u[0], side="right")), n - 1)
    else:
        if not 0 <= start < n:
            raise DomainError(f"start state {start} out of range")
        state = int(start)
    targets, cdfs = [], []
    for row in P:
        nz = np.flatnonzero(row > 0)
        c = np.cumsum(row[nz])
        targets.append(nz.tolist())
        cdfs.append((c / c[-1]).tolist())
    out = np.empty(T, dtype=np.uint32)
    out[0] = state
    for t in range(1, T):
        cdf = cdfs[state]
        k = bisect.bisect_right(cdf, u[t])
        state = targets[state][min(k, len(cdf) - 1)]
        out[t] = state
    return Trajectory(out, n, seed)


def write_trajectory(path: Union[str, Path], traj: Trajectory) -> None:
    """Binary format: header ``<4sIIQQ`` then T little-endian u32 states."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, traj.n_states, len(traj), traj.seed))
        fh.write(traj.states.astype("<u4").tobytes())


def read_trajectory(path: Union[str, Path]) -> Trajectory:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DomainError("file too short for a trajectory header")
    magic, version, n_states, T, seed = _HEADER.unpack_from(data)
    if magic != MAGIC or version != VERSION:
        raise DomainError(f"not a version-{VERSION} trajectory file")
    body = np.frombuffer(data, dtype="<u4", offset=_HEADER.size)
    if body.shape[0] != T:
        raise DomainError(f"header announces {T} states, file holds {body.shape[0]}")
    return Trajectory(body.astype(np.uint32), n_states, seed)


def write_trajectory_csv(path: Union[str, Path], traj: Trajectory) -> None:
    with open(path, "w") as fh:
        fh.write("t,state\n")
        fh.writelines(f"{t},{s}\n" for t, s in enumerate(traj.states.tolist()))
