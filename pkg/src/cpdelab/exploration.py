"""Budgeted exploration of the dominated infection processes.

Both explorations grow the origin's cluster one treated site at a time,
examining each unoriented edge at most once.  The first-chance exploration
opens an edge when the infection delay beats the source's recovery and the
edge is available; the second-chance variant additionally retries special
edges found unavailable, waiting for their switch-on and, where needed,
keeping the source alive through the two-site process on its parent edge.

The treatment rule is a fixed deterministic queue (FIFO by default, LIFO
optionally); the law of the final cluster does not depend on the rule, which
is itself a tested property.  A terminated state records the discovered
sets, the edge partition (closed / first-chance / second-chance), parent
pointers, infection and recovery times, an occupancy event log, and a
per-pass audit trail.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum

from . import cpde, environment, lattice
from .lattice import OrientedEdge, Site, Window, neighbors, unoriented
from .randomness import (T_INFECTION, T_RECOVERY, ModelParams,
                         VariableFamilies, first_chance, second_chance)
from .stats import two_proportion_z

# edge outcomes recorded in the audit trail
CLOSED, FIRST_CHANCE, SECOND_CHANCE = 0, 1, 2


class ExplorationStatus(Enum):
    EXHAUSTED = "exhausted"            # frontier emptied
    BUDGET_REACHED = "budget_reached"  # treated-site cap hit
    TRUNCATED = "truncated"            # stopped by the paired exploration


@dataclass
class ExplorationState:
    """Terminal state of one exploration run."""

    seed: int
    params: ModelParams
    algorithm: str                      # "first" | "second"
    budget: int
    window: Window | None
    status: ExplorationStatus
    frontier: list[Site]                # discovered, never treated
    treated: set[Site]
    treated_order: list[Site]
    closed_edges: set[OrientedEdge]
    first_chance_edges: set[OrientedEdge]
    second_chance_edges: set[OrientedEdge]
    parent: dict[Site, Site]
    t_infect: dict[Site, float]
    t_recover: dict[Site, float]
    events: list[tuple[float, Site, int]]
    audit: list[tuple[Site, tuple[tuple[OrientedEdge, int], ...]]]
    graphical: bool = False

    @property
    def discovered(self) -> set[Site]:
        return self.treated | set(self.frontier)

    def tree_edges(self) -> set[OrientedEdge]:
        return self.first_chance_edges | self.second_chance_edges


class _IidFields:
    """Field access from the i.i.d. keyed families.

    The plain algorithm opens an available edge when the infection delay
    beats the source's recovery; the second-chance algorithm additionally
    races the edge switching off (``timed=True``).
    """

    def __init__(self, fam: VariableFamilies, timed: bool):
        self.fam = fam
        self.timed = timed

    def recovery_end(self, y: Site, t_in: float) -> float:
        return t_in + self.fam.recovery_delay(y)

    def first_chance_opens(self, y: Site, z: Site, t_in: float,
                           t_rec: float):
        fam = self.fam
        if fam.edge_state(unoriented(y, z)) != 1:
            return False, 0.0
        if self.timed:
            if first_chance(fam, (y, z)) == 1:
                return True, t_in + fam.infection_delay((y, z))
            return False, 0.0
        d = fam.infection_delay((y, z))
        if fam.less(d, T_INFECTION, fam.recovery_delay(y), T_RECOVERY):
            return True, t_in + d
        return False, 0.0


class _GraphicalFields:
    """Field access deriving the same quantities from the shared graphical
    construction: delays are the gaps to the next stream marks after the
    infection time, and the edge state is read from the environment
    trajectory at the attempt time.  Used for pathwise-domination runs."""

    def __init__(self, fam: VariableFamilies):
        self.fam = fam
        self.env = environment.EnvironmentCache(fam)

    def recovery_end(self, y: Site, t_in: float) -> float:
        return self.fam.recovery_marks(y).first_after(t_in)

    def first_chance_opens(self, y: Site, z: Site, t_in: float,
                           t_rec: float):
        e = unoriented(y, z)
        attempt = self.fam.infection_marks(e).first_after(t_in)
        if attempt < t_rec and self.env.state(e, attempt) == 1:
            return True, attempt
        return False, 0.0


def _explore(fam: VariableFamilies, budget: int, *, algorithm: str,
             rule: str, window: Window | None,
             fields) -> ExplorationState:
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if rule not in ("fifo", "lifo"):
        raise ValueError("rule must be 'fifo' or 'lifo'")
    origin: Site = (0,) * fam.params.d
    frontier: list[Site] = [origin]
    head = 0                       # FIFO pops advance this index
    discovered: set[Site] = {origin}
    treated: set[Site] = set()
    treated_order: list[Site] = []
    closed: set[OrientedEdge] = set()
    first_edges: set[OrientedEdge] = set()
    second_edges: set[OrientedEdge] = set()
    parent: dict[Site, Site] = {origin: origin}
    t_infect: dict[Site, float] = {origin: 0.0}
    t_recover: dict[Site, float] = {}
    events: list[tuple[float, Site, int]] = [(0.0, origin, 1)]
    audit: list = []
    second = algorithm == "second"

    while head < len(frontier) and len(treated) < budget:
        if rule == "fifo":
            y = frontier[head]
            head += 1
        else:
            y = frontier.pop()
        t_in = t_infect[y]
        t_rec = fields.recovery_end(y, t_in)
        t_recover[y] = t_rec
        events.append((t_rec, y, -1))
        helper = parent[y]
        exams = []
        for z in neighbors(y):
            if z in discovered:
                continue
            if window is not None and not window.contains(z):
                continue
            opened, t_child = fields.first_chance_opens(y, z, t_in, t_rec)
            if opened:
                exams.append(((y, z), FIRST_CHANCE))
                first_edges.add((y, z))
                parent[z] = y
                t_infect[z] = t_child
                events.append((t_child, z, 1))
                discovered.add(z)
                frontier.append(z)
            elif (second and fam.edge_state(unoriented(y, z)) == 0
                  and lattice.is_special((y, z))
                  and second_chance(fam, (y, z), helper) == 1):
                exams.append(((y, z), SECOND_CHANCE))
                second_edges.add((y, z))
                parent[z] = y
                t_child = (t_in + fam.switch_on_delay((y, z))
                           + fam.infection_delay((y, z)))
                t_infect[z] = t_child
                events.append((t_child, z, 1))
                discovered.add(z)
                frontier.append(z)
            else:
                exams.append(((y, z), CLOSED))
                closed.add((y, z))
        treated.add(y)
        treated_order.append(y)
        audit.append((y, tuple(exams)))

    remaining = frontier[head:] if rule == "fifo" else frontier
    status = (ExplorationStatus.EXHAUSTED if not remaining
              else ExplorationStatus.BUDGET_REACHED)
    events.sort(key=lambda ev: (ev[0], ev[1], ev[2]))
    return ExplorationState(
        seed=fam.master_seed, params=fam.params, algorithm=algorithm,
        budget=budget, window=window, status=status,
        frontier=list(remaining), treated=treated,
        treated_order=treated_order, closed_edges=closed,
        first_chance_edges=first_edges, second_chance_edges=second_edges,
        parent=parent, t_infect=t_infect, t_recover=t_recover,
        events=events, audit=audit,
        graphical=isinstance(fields, _GraphicalFields))


def explore_first(fam: VariableFamilies, budget: int, *, rule: str = "fifo",
                  window: Window | None = None,
                  graphical: bool = False) -> ExplorationState:
    """First-chance exploration.  With ``graphical=True`` the delays and
    edge states come from the shared graphical construction instead of the
    i.i.d. families (same law, pathwise compatible with the reference
    simulator under the same seed)."""
    fields = _GraphicalFields(fam) if graphical else _IidFields(fam, False)
    return _explore(fam, budget, algorithm="first", rule=rule, window=window,
                    fields=fields)


def explore_second(fam: VariableFamilies, budget: int, *,
                   rule: str = "fifo",
                   window: Window | None = None) -> ExplorationState:
    """Second-chance exploration: unavailable special edges are retried
    after their switch-on, helped by the treated site's parent."""
    return _explore(fam, budget, algorithm="second", rule=rule,
                    window=window, fields=_IidFields(fam, True))


def infected_at(state: ExplorationState, t: float) -> set[Site]:
    """The dominated process at time t: sites whose infection interval
    [t_infect, t_recover) covers t.  Sites never treated contribute
    nothing (their recovery was never simulated)."""
    if t < 0.0:
        raise ValueError("t must be >= 0")
    return {x for x in state.treated
            if state.t_infect[x] <= t < state.t_recover[x]}


def alive_at(state: ExplorationState, t: float) -> bool:
    return any(state.t_infect[x] <= t < state.t_recover[x]
               for x in state.treated)


# ---------------------------------------------------------------------------
# Structural properties of a terminated run.


def structural_report(state: ExplorationState,
                      fam: VariableFamilies | None = None) -> dict[str, bool]:
    """Verify the structural guarantees of a terminated exploration.

    Returns one boolean per property; ``all_pass`` is their conjunction.
    When the generating families object is supplied, the time recurrences
    and the second-chance edge guards are re-derived as well.
    """
    origin: Site = (0,) * state.params.d
    report: dict[str, bool] = {}

    # treated sites are exactly the once-infected ones: both times known
    report["treated_matches_infection_times"] = (
        all(x in state.t_infect and x in state.t_recover
            for x in state.treated)
        and set(state.t_recover) == state.treated
        and set(state.t_infect) == state.discovered)

    # each unoriented edge carries at most one attempt
    examined = [unoriented(*e) for e in
                (state.closed_edges | state.first_chance_edges
                 | state.second_chance_edges)]
    report["edge_examined_once"] = len(examined) == len(set(examined)) == (
        len(state.closed_edges) + len(state.first_chance_edges)
        + len(state.second_chance_edges))

    # replay: every pass examined exactly the undiscovered in-window
    # neighbors of the treated site, in the fixed neighbor order
    seen = {origin}
    ok = True
    for y, exams in state.audit:
        expected = [z for z in neighbors(y) if z not in seen
                    and (state.window is None or state.window.contains(z))]
        got = [e[1] for e, _out in exams]
        ok = ok and got == expected
        for (e, out) in exams:
            if out != CLOSED:
                seen.add(e[1])
    report["one_attempt_per_neighbor"] = ok

    # each site is infected and cured at most once, in that order
    pluses: dict[Site, int] = {}
    minuses: dict[Site, int] = {}
    for _t, site, sign in state.events:
        (pluses if sign > 0 else minuses)[site] = \
            (pluses if sign > 0 else minuses).get(site, 0) + 1
    report["single_infection_interval"] = (
        all(c == 1 for c in pluses.values())
        and all(c == 1 for c in minuses.values())
        and set(pluses) == state.discovered
        and set(minuses) == state.treated
        and all(state.t_infect[x] < state.t_recover[x]
                for x in state.treated))

    # the open edges form a tree rooted at the origin: unique incoming edge
    indeg: dict[Site, int] = {}
    for (_a, b) in state.tree_edges():
        indeg[b] = indeg.get(b, 0) + 1
    discovered = state.discovered
    non_root = discovered - {origin}
    tree_ok = (indeg.get(origin, 0) == 0
               and all(indeg.get(z, 0) == 1 for z in non_root)
               and len(state.tree_edges()) == len(non_root))
    rooted: set[Site] = {origin}  # sites whose parent chain reaches the root
    for z in non_root:
        path = []
        w = z
        while w not in rooted and len(path) <= len(discovered):
            path.append(w)
            w = state.parent.get(w, w)
            if path and w == path[-1]:  # self-parent loop off the root
                break
        if w in rooted:
            rooted.update(path)
        else:
            tree_ok = False
            break
    report["unique_parent_edge"] = tree_ok and rooted >= discovered

    # at exhaustion, every oriented edge out of the cluster was closed
    if state.status is ExplorationStatus.EXHAUSTED:
        closed_ok = True
        for y in state.treated:
            for z in neighbors(y):
                if z in state.treated:
                    continue
                if state.window is not None and not state.window.contains(z):
                    continue
                closed_ok = closed_ok and (y, z) in state.closed_edges
        report["frontier_closed"] = closed_ok
    else:
        report["frontier_closed"] = True  # only claimed at exhaustion

    if fam is not None:
        ok = True
        for (y, z) in state.first_chance_edges:
            if state.graphical:
                expected = fam.infection_marks(unoriented(y, z)) \
                              .first_after(state.t_infect[y])
            else:
                expected = state.t_infect[y] + fam.infection_delay((y, z))
            ok = ok and state.t_infect[z] == expected
        for (y, z) in state.second_chance_edges:
            ok = ok and state.t_infect[z] == (
                state.t_infect[y] + fam.switch_on_delay((y, z))
                + fam.infection_delay((y, z)))
            ok = ok and fam.edge_state(unoriented(y, z)) == 0
            ok = ok and lattice.is_special((y, z))
        for y in state.treated:
            if state.graphical:
                expected = fam.recovery_marks(y) \
                              .first_after(state.t_infect[y])
            else:
                expected = state.t_infect[y] + fam.recovery_delay(y)
            ok = ok and state.t_recover[y] == expected
        report["time_recurrences"] = ok

    report["all_pass"] = all(v for k, v in report.items() if k != "all_pass")
    return report


# ---------------------------------------------------------------------------
# Domination against the reference simulator.


def check_pathwise_domination(state: ExplorationState,
                              run: cpde.CpdeRun) -> tuple[bool, list[str]]:
    """Pathwise inclusion of the first-chance process in the reference
    trajectory built from the same seed, window and mark streams.

    Inclusion can only break when the dominated process gains a site or the
    reference loses one, so those are the instants checked.  Returns the
    verdict and a list of human-readable violations (empty when dominated).
    """
    if not state.graphical:
        raise ValueError("domination is pathwise only for graphical-mode "
                         "first-chance runs")
    if state.algorithm != "first":
        raise ValueError("pathwise domination applies to the first-chance "
                         "algorithm only")
    if state.seed != run.seed or state.window != run.window:
        raise ValueError("exploration and reference run must share seed "
                         "and window")

    toggles = run.toggle_times()

    def ref_infected(site: Site, t: float) -> bool:
        base = site in run.initial
        flips = bisect_right(toggles.get(site, []), t)
        return bool(base ^ (flips & 1))

    violations: list[str] = []
    for t, site, sign in state.events:
        if sign > 0 and t <= run.horizon and not ref_infected(site, t):
            violations.append(
                f"dominated process infected {site} at t={t} but the "
                f"reference process does not contain it")
    for t, site, sign in run.events:
        if sign < 0:
            if site in state.treated and \
                    state.t_infect[site] <= t < state.t_recover[site]:
                violations.append(
                    f"reference process lost {site} at t={t} while the "
                    f"dominated process still holds it")
    return not violations, violations


def distributional_domination_check(params: ModelParams, t: float,
                                    replicas: int, seed: int, *,
                                    window: Window, horizon: float,
                                    budget: int = 4000) -> dict:
    """Second-chance domination is distributional, not pathwise: compare
    alive-at-t frequencies of the dominated process and the reference
    simulator over independent replica blocks.  Budget-capped exploration
    runs count as alive (conservative for this one-sided comparison)."""
    if t > horizon:
        raise ValueError("t must not exceed the reference horizon")
    eta_alive = 0
    for i in range(replicas):
        fam = VariableFamilies(seed + i, params)
        st = explore_second(fam, budget, window=window)
        if st.status is ExplorationStatus.BUDGET_REACHED or alive_at(st, t):
            eta_alive += 1
    ref_alive = 0
    for i in range(replicas):
        run = cpde.simulate(params, window, horizon, seed + replicas + i)
        if cpde.infected_at(run, t):
            ref_alive += 1
    z = two_proportion_z(eta_alive, replicas, ref_alive, replicas)
    return {
        "eta_alive_frequency": eta_alive / replicas,
        "reference_alive_frequency": ref_alive / replicas,
        "z_score": z,
        "dominated_within_3_sigma": z <= 3.0,
    }


# ---------------------------------------------------------------------------
# Tree export.


def tree_payload(state: ExplorationState) -> dict:
    """JSON-ready infection tree: treated vertices with times, parents and
    the type of the edge that infected them."""
    second = state.second_chance_edges
    vertices = []
    for site in state.treated_order:
        par = state.parent[site]
        if site == par:
            edge_type = "root"
        elif (par, site) in second:
            edge_type = "second_chance"
        else:
            edge_type = "first_chance"
        vertices.append({
            "site": list(site),
            "t_infect": state.t_infect[site],
            "t_recover": state.t_recover[site],
            "parent": list(par),
            "edge_type": edge_type,
        })
    return {"status": state.status.value, "vertices": vertices}
