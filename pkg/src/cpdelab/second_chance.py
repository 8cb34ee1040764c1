"""The auxiliary two-site process and its extinction-time oracles.

When a second-chance infection has to wait past the source's recovery, the
construction keeps the source alive through the contact process restricted
to the source and its parent.  This module simulates that restricted pair
process event by event from the keyed mark recipe, and provides two exact
references for its extinction time:

* the phase-type survival function of the three-state chain
  {both infected} -> {one infected} -> {empty}, with rates 2, lambda and 1;
* the closed lower bound ``exp(-2 t / (lambda + 1))``, the tail of a
  Geometric(1/(lambda+1)) sum of Exp(2) sojourn times, which the true
  extinction time stochastically dominates.

The geometric-sum construction fixes the bound's rate at 2/(lambda+1); a
sometimes-quoted parameter of 1/(2(lambda+1)) is inconsistent with that
construction and is not used here (see README, "conventions and known
discrepancies").
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .lattice import OrientedEdge, Site, unoriented
from .randomness import ModelParams, VariableFamilies
from .stats import wilson_interval


@dataclass
class TwoSiteProcess:
    """Trajectory of the contact process restricted to one edge.

    ``events`` holds ``(time, site, +1/-1)`` state changes after time 0; the
    process starts with both endpoints infected when ``started_full`` and is
    identically empty otherwise.  ``extinction_time`` is ``None`` when the
    process is still alive at the horizon.
    """

    edge: OrientedEdge
    started_full: bool
    horizon: float
    events: list[tuple[float, Site, int]] = field(default_factory=list)
    extinction_time: float | None = 0.0

    def infected_at(self, t: float) -> frozenset[Site]:
        if not self.started_full:
            return frozenset()
        if t > self.horizon:
            raise ValueError(f"t={t} beyond horizon {self.horizon}")
        alive = {self.edge[0], self.edge[1]}
        for tt, site, sign in self.events:
            if tt > t:
                break
            if sign > 0:
                alive.add(site)
            else:
                alive.discard(site)
        return frozenset(alive)

    def contains(self, site: Site, t: float) -> bool:
        return site in self.infected_at(t)

    def alive_at(self, t: float) -> bool:
        return bool(self.infected_at(t))


def _run_pair(x: Site, y: Site, next_rec_x, next_rec_y, next_inf,
              horizon: float) -> tuple[list, float | None]:
    """Event loop of the two-site contact process.

    ``next_rec_*`` and ``next_inf`` map a time t to the first mark of the
    corresponding stream strictly after t.  Recovery marks on a healthy site
    are skipped by re-querying at the re-infection time.
    """
    events: list[tuple[float, Site, int]] = []
    inf_x = inf_y = True
    t = 0.0
    nx = next_rec_x(0.0)
    ny = next_rec_y(0.0)
    while True:
        if inf_x and inf_y:
            # infection marks are no-ops in the full state
            if nx <= ny:
                tn, fell_x = nx, True
            else:
                tn, fell_x = ny, False
            if tn > horizon:
                return events, None
            t = tn
            if fell_x:
                inf_x = False
                events.append((t, x, -1))
                nx = next_rec_x(t)
            else:
                inf_y = False
                events.append((t, y, -1))
                ny = next_rec_y(t)
        else:
            ti = next_inf(t)
            if inf_x:
                tr = nx
            else:
                tr = ny
            if min(ti, tr) > horizon:
                return events, None
            if ti < tr:
                t = ti
                if inf_x:
                    inf_y = True
                    events.append((t, y, 1))
                    ny = next_rec_y(t)
                else:
                    inf_x = True
                    events.append((t, x, 1))
                    nx = next_rec_x(t)
            else:
                t = tr
                if inf_x:
                    inf_x = False
                    events.append((t, x, -1))
                else:
                    inf_y = False
                    events.append((t, y, -1))
                return events, t


def run_two_site(fam: VariableFamilies, edge: OrientedEdge,
                 horizon: float) -> TwoSiteProcess:
    """Two-site process on ``edge = (x, y)`` in the frame where time 0 is
    the infection of ``y`` through ``(x, y)``.

    The process starts with both sites infected only when the infection
    delay through the edge beats the parent's recovery delay; its mark
    recipe is then: the parent's residual lifetime followed by the parent's
    recovery stream, the child's lifetime followed by the child's recovery
    stream, and the edge's infection stream.  ``horizon=math.inf`` runs to
    extinction (which is almost sure).
    """
    x, y = edge
    d_xy = fam.infection_delay((x, y))
    rec_x = fam.recovery_delay(x)
    if not d_xy < rec_x:
        return TwoSiteProcess(edge, False, horizon)
    x_first = rec_x - d_xy
    y_first = fam.recovery_delay(y)
    sx = fam.recovery_marks(x)
    sy = fam.recovery_marks(y)
    si = fam.infection_marks(unoriented(x, y))

    def next_rec_x(t: float) -> float:
        if t < x_first:
            return x_first
        return x_first + sx.first_after(t - x_first)

    def next_rec_y(t: float) -> float:
        if t < y_first:
            return y_first
        return y_first + sy.first_after(t - y_first)

    events, ext = _run_pair(x, y, next_rec_x, next_rec_y, si.first_after,
                            horizon)
    return TwoSiteProcess(edge, True, horizon, events, ext)


def run_two_site_from_marks(x_marks: list[float], y_marks: list[float],
                            infection_marks: list[float],
                            horizon: float,
                            x: Site = (0, 0),
                            y: Site = (1, 0)) -> TwoSiteProcess:
    """Same event loop fed with explicit sorted mark lists (test hook for
    monotonicity couplings and hand-built scenarios)."""

    def seek(marks):
        def nxt(t: float) -> float:
            for m in marks:
                if m > t:
                    return m
            return math.inf
        return nxt

    events, ext = _run_pair(x, y, seek(x_marks), seek(y_marks),
                            seek(infection_marks), horizon)
    return TwoSiteProcess((x, y), True, horizon, events, ext)


# ---------------------------------------------------------------------------
# Exact oracles.


@dataclass(frozen=True)
class PhaseTypeOracle:
    """Absorption-time law of the chain full -(2)-> single -(lambda)-> full,
    single -(1)-> empty, started full."""

    lam: float

    @property
    def transient_generator(self) -> np.ndarray:
        return np.array([[-2.0, 2.0],
                         [self.lam, -(self.lam + 1.0)]])

    def survival(self, t: float) -> float:
        """P(extinction time > t) via the matrix exponential of the
        transient block."""
        if t <= 0.0:
            return 1.0
        return float(expm(self.transient_generator * t)[0].sum())

    def survival_batch(self, ts: np.ndarray) -> np.ndarray:
        """Closed eigenvalue form of :meth:`survival` (the 2x2 exponential
        worked out analytically), for evaluating at many points."""
        ts = np.asarray(ts, dtype=float)
        tr = -(self.lam + 3.0)
        disc = math.sqrt(tr * tr - 8.0)
        s1 = (tr + disc) / 2.0
        s2 = (tr - disc) / 2.0
        out = (s1 * np.exp(s2 * ts) - s2 * np.exp(s1 * ts)) / (s1 - s2)
        return np.where(ts <= 0.0, 1.0, out)

    def mean(self) -> float:
        q = self.transient_generator
        return float(-np.linalg.solve(q, np.ones(2))[0])


def extinction_tail_bound(lam: float, t: float) -> float:
    """Tail of the geometric sum of full-state sojourns: a Geometric
    (1/(lambda+1)) count of Exp(2) variables sums to Exp(2/(lambda+1)), and
    the true extinction time stochastically dominates it."""
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    if t < 0.0:
        raise ValueError("t must be >= 0")
    return math.exp(-2.0 * t / (lam + 1.0))


def second_chance_floor(d: int, p: float) -> float:
    """Large-lambda guaranteed floor for the probability that the
    all-helpers second-chance product succeeds:
    p / (2^(2d-1) (1 + (2d-2)(1-p))).  Independent of the update speed."""
    if d < 2:
        raise ValueError("dimension must be >= 2")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    return p / (2 ** (2 * d - 1) * (1.0 + (2 * d - 2) * (1.0 - p)))


def canonical_special_edge(d: int) -> OrientedEdge:
    """The special edge at the all-ones base site, used for estimates."""
    y = (1,) * d
    z = (2,) + (1,) * (d - 1)
    return (y, z)


# ---------------------------------------------------------------------------
# Monte Carlo estimators (independent replicas = consecutive master seeds).


def estimate_second_chance(d: int, p: float, v: float, lam: float,
                           n: int, seed: int) -> tuple[float, tuple[float, float]]:
    """Estimate of the all-helpers second-chance success probability on the
    canonical special edge, with a 95% Wilson interval."""
    from .randomness import second_chance_all_helpers
    params = ModelParams(d=d, p=p, v=v, lam=lam)
    edge = canonical_special_edge(d)
    hits = 0
    for i in range(n):
        fam = VariableFamilies(seed + i, params)
        hits += second_chance_all_helpers(fam, edge)
    return hits / n, wilson_interval(hits, n)


def estimate_helper_intersection(d: int, p: float, v: float, lam: float,
                                 n: int, seed: int
                                 ) -> tuple[float, tuple[float, float]]:
    """Estimate of the probability that, for every helper simultaneously,
    the edge switches on before the helper edge switches off and the child
    stays infected in the helper pair process until the switch-on time (the
    first factor of the product lower bound for the second chance)."""
    from . import lattice
    params = ModelParams(d=d, p=p, v=v, lam=lam)
    y, z = canonical_special_edge(d)
    helpers = [x for x in lattice.neighbors(y) if x != z]
    hits = 0
    for i in range(n):
        fam = VariableFamilies(seed + i, params)
        t_on = fam.switch_on_delay((y, z))
        ok = True
        for x in helpers:
            if not t_on < fam.switch_off_delay(unoriented(x, y)):
                ok = False
                break
            if not run_two_site(fam, (x, y), horizon=t_on).contains(y, t_on):
                ok = False
                break
        hits += ok
    return hits / n, wilson_interval(hits, n)


def sample_extinction_times(lam: float, n: int, seed: int) -> np.ndarray:
    """Extinction times of ``n`` two-site processes conditioned on a full
    start (replicas whose construction yields the empty process are
    skipped)."""
    params = ModelParams(d=2, p=0.5, v=1.0, lam=lam)
    edge = ((0, 0), (1, 0))
    out = np.empty(n)
    got = 0
    i = 0
    while got < n:
        proc = run_two_site(VariableFamilies(seed + i, params), edge,
                            horizon=math.inf)
        i += 1
        if proc.started_full:
            out[got] = proc.extinction_time
            got += 1
    return out
