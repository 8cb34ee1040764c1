"""Reference simulator of the contact process on dynamical percolation.

The simulator realizes the graphical construction on a finite window:
recovery marks (rate-1 streams per site), infection marks (rate-lambda
streams per unoriented edge, each mark transmitting across the edge in
whichever direction applies), and the dynamic edge environment queried at
mark times.  The exterior of the window is absorbing: edges leaving the
window are dropped, so boundary sites simply have fewer neighbors.

Because everything is keyed off one :class:`VariableFamilies`, the same
seed drives this simulator and the dominated exploration processes with
bit-identical marks and environment, which is what the pathwise-domination
checks rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import environment
from .lattice import Site, Window
from .randomness import ModelParams, VariableFamilies
from .stats import wilson_interval


@dataclass
class CpdeRun:
    """One realized trajectory on a window.

    ``events`` lists the occupancy changes ``(time, site, +1/-1)`` in
    processing order; ``alive`` tells whether any site was infected at the
    horizon.
    """

    params: ModelParams
    window: Window
    horizon: float
    seed: int
    initial: frozenset[Site]
    events: list[tuple[float, Site, int]] = field(default_factory=list)
    alive: bool = False
    final_infected: frozenset[Site] = frozenset()

    def toggle_times(self) -> dict[Site, list[float]]:
        out: dict[Site, list[float]] = {}
        for t, site, _sign in self.events:
            out.setdefault(site, []).append(t)
        return out


@dataclass
class EventTable:
    """Graphical-construction events on a window, time-sorted.

    Parallel columns: ``times``, ``kinds`` (0 recovery, 1 infection),
    ``first`` / ``second`` (site indices into ``sites``; ``second`` is -1
    for recoveries).  Equal times are broken by (kind, site indices) so
    processing order is deterministic.  Infection marks falling on
    unavailable edges can never act and are dropped during construction.
    """

    sites: list[Site]
    times: list[float]
    kinds: list[int]
    first: list[int]
    second: list[int]


def event_table(fam: VariableFamilies, window: Window,
                horizon: float) -> EventTable:
    sites = list(window.sites())
    index = {x: i for i, x in enumerate(sites)}
    t_chunks: list[np.ndarray] = []
    k_chunks: list[np.ndarray] = []
    i_chunks: list[np.ndarray] = []
    j_chunks: list[np.ndarray] = []
    for x in sites:
        marks = fam.recovery_marks(x).marks_until(horizon)
        if len(marks) == 0:
            continue
        t_chunks.append(marks)
        k_chunks.append(np.zeros(len(marks), dtype=np.int64))
        i_chunks.append(np.full(len(marks), index[x], dtype=np.int64))
        j_chunks.append(np.full(len(marks), -1, dtype=np.int64))
    for e in window.interior_edges():
        marks = fam.infection_marks(e).marks_until(horizon)
        if len(marks) == 0:
            continue
        traj = environment.trajectory(fam, e, horizon)
        idx = np.searchsorted(traj.switch_times, marks, side="right")
        marks = marks[((idx & 1) ^ traj.initial_state) == 1]
        if len(marks) == 0:
            continue
        t_chunks.append(marks)
        k_chunks.append(np.ones(len(marks), dtype=np.int64))
        i_chunks.append(np.full(len(marks), index[e[0]], dtype=np.int64))
        j_chunks.append(np.full(len(marks), index[e[1]], dtype=np.int64))
    if not t_chunks:
        return EventTable(sites, [], [], [], [])
    t_all = np.concatenate(t_chunks)
    k_all = np.concatenate(k_chunks)
    i_all = np.concatenate(i_chunks)
    j_all = np.concatenate(j_chunks)
    order = np.lexsort((j_all, i_all, k_all, t_all))
    return EventTable(sites, t_all[order].tolist(), k_all[order].tolist(),
                      i_all[order].tolist(), j_all[order].tolist())


def run_events(params: ModelParams, window: Window, horizon: float,
               seed: int, initial: frozenset[Site],
               table: EventTable) -> CpdeRun:
    """Process a sorted event table into a trajectory."""
    sites = table.sites
    index = {x: i for i, x in enumerate(sites)}
    infected = bytearray(len(sites))
    n_infected = 0
    for x in initial:
        infected[index[x]] = 1
        n_infected += 1
    events: list[tuple[float, Site, int]] = []
    for t, kind, i, j in zip(table.times, table.kinds, table.first,
                             table.second):
        if kind == 0:
            if infected[i]:
                infected[i] = 0
                n_infected -= 1
                events.append((t, sites[i], -1))
                if n_infected == 0:
                    break
        elif infected[i] != infected[j]:
            target = j if infected[i] else i
            infected[target] = 1
            n_infected += 1
            events.append((t, sites[target], 1))
    final = frozenset(sites[i] for i in range(len(sites)) if infected[i])
    return CpdeRun(params, window, horizon, seed, frozenset(initial),
                   events, alive=n_infected > 0, final_infected=final)


def simulate(params: ModelParams, window: Window, horizon: float, seed: int,
             initial: frozenset[Site] | None = None) -> CpdeRun:
    """Run the contact process on dynamical percolation from the given
    initially infected set (default: the origin)."""
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    if initial is None:
        initial = frozenset({(0,) * params.d})
    if not all(window.contains(x) for x in initial):
        raise ValueError("initial infected sites must lie in the window")
    fam = VariableFamilies(seed, params)
    table = event_table(fam, window, horizon)
    return run_events(params, window, horizon, seed, frozenset(initial),
                      table)


def infected_at(run: CpdeRun, t: float) -> set[Site]:
    """Occupied set at time t (state after all events at times <= t)."""
    if t < 0.0 or t > run.horizon:
        raise ValueError(f"t={t} outside [0, {run.horizon}]")
    out = set(run.initial)
    for tt, site, sign in run.events:
        if tt > t:
            break
        if sign > 0:
            out.add(site)
        else:
            out.discard(site)
    return out


def survival_estimate(params: ModelParams, window: Window, horizon: float,
                      replicas: int, seed: int
                      ) -> tuple[float, tuple[float, float]]:
    """Fraction of replicas alive at the horizon, with a 95% Wilson
    interval.  Replica i uses master seed ``seed + i``."""
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    hits = sum(simulate(params, window, horizon, seed + i).alive
               for i in range(replicas))
    return hits / replicas, wilson_interval(hits, replicas)
