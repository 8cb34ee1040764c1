"""Stationary dynamical-percolation edge process.

Each unoriented edge carries an independent two-state Markov chain started
from its Bernoulli(p) equilibrium: unavailable -> available at rate vp,
available -> unavailable at rate v(1-p).  Trajectories are produced on
demand from the keyed switch-delay sequence of the edge, so regenerating a
trajectory with a larger horizon appends switches without moving earlier
ones, and every consumer of a given seed sees the identical environment.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

from . import keyed
from .lattice import UnorientedEdge, unoriented
from .randomness import VariableFamilies


class OutOfHorizonError(ValueError):
    """Raised when a trajectory is queried beyond its generated horizon."""


@dataclass
class EdgeTrajectory:
    """Alternating switch times of one edge over [0, horizon]."""

    edge: UnorientedEdge
    initial_state: int
    switch_times: list[float]
    horizon: float

    def state_at(self, t: float) -> int:
        if t < 0.0 or t > self.horizon:
            raise OutOfHorizonError(
                f"t={t} outside [0, {self.horizon}] for edge {self.edge}")
        return self.initial_state ^ (bisect_right(self.switch_times, t) & 1)


def trajectory(fam: VariableFamilies, e: UnorientedEdge,
               horizon: float) -> EdgeTrajectory:
    """Trajectory of edge ``e`` over [0, horizon], deterministic in
    (seed, edge)."""
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    e = unoriented(*e)
    p, v = fam.params.p, fam.params.v
    prefix = fam.env_switch_prefix(e)
    state = fam.edge_state(e)
    times: list[float] = []
    t = 0.0
    i = 0
    while True:
        rate = v * (1.0 - p) if state == 1 else v * p
        t += keyed.exponential(keyed.absorb(prefix, i), rate)
        if t > horizon or t == math.inf:
            break
        times.append(t)
        state ^= 1
        i += 1
    return EdgeTrajectory(e, fam.edge_state(e), times, horizon)


def state_at(traj: EdgeTrajectory, t: float) -> int:
    return traj.state_at(t)


@dataclass
class EnvironmentCache:
    """Per-family trajectory cache with automatic horizon extension."""

    fam: VariableFamilies
    base_horizon: float = 16.0
    _trajs: dict[UnorientedEdge, EdgeTrajectory] = field(default_factory=dict)

    def trajectory_for(self, e: UnorientedEdge,
                       horizon: float) -> EdgeTrajectory:
        e = unoriented(*e)
        traj = self._trajs.get(e)
        if traj is None or traj.horizon < horizon:
            h = max(self.base_horizon, horizon)
            traj = trajectory(self.fam, e, h)
            self._trajs[e] = traj
        return traj

    def state(self, e: UnorientedEdge, t: float) -> int:
        # doubling keeps the number of regenerations logarithmic in t
        return self.trajectory_for(e, 2.0 * t if t > 0 else 1.0).state_at(t)


def stationarity_table(fam: VariableFamilies, times: list[float],
                       n_edges: int) -> list[tuple[float, float, float]]:
    """Empirical availability fraction over ``n_edges`` disjoint edges at
    each requested time, with the binomial standard error.

    Rows are ``(t, empirical_p, stderr)`` -- the payload of the
    ``env-check`` CLI command.
    """
    horizon = max(times)
    edges = [((2 * k, 0), (2 * k + 1, 0)) for k in range(n_edges)]
    counts = [0] * len(times)
    for e in edges:
        traj = trajectory(fam, e, horizon)
        for i, t in enumerate(times):
            counts[i] += traj.state_at(t)
    rows = []
    for t, c in zip(times, counts):
        phat = c / n_edges
        rows.append((t, phat, math.sqrt(phat * (1.0 - phat) / n_edges)))
    return rows
