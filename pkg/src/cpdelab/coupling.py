"""Joint exploration of the infection cluster and a dominated percolation
cluster.

The upper side replays the exploration algorithms; the lower side explores
the same lattice with a reduced opening field supplied by a backend:

* ``ThinnedBackend`` multiplies the upper indicators by independent keyed
  Bernoulli thinning bits, so the lower field is dominated almost surely
  and the inclusion invariants can be asserted after every pass;
* ``IndependentBackend`` replaces the first-chance indicator by a fresh
  keyed Bernoulli(q) field, independent of the edge states.  No pathwise
  domination holds, but the standalone lower cluster is exactly a
  Bernoulli(pq) bond-percolation cluster (two-type with the second-chance
  bonus in the second algorithm), which is what the criticality estimates
  consume.

The two roles are deliberately split: a constructive product coupling that
achieves both at once is not implemented (see README, "couplings").

Treatment rule: each side treats its own discoveries in FIFO order; with a
dominating backend the lower side additionally waits until the upper side
has treated the site.  This keeps either side's pass sequence independent
of whether the other runs at all, so disabling one side reproduces the
other bit-exactly, while preserving the per-pass inclusion invariants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import perco
from .exploration import ExplorationStatus
from .lattice import OrientedEdge, Site, Window, is_special, neighbors, \
    unoriented
from .randomness import (ModelParams, VariableFamilies, first_chance,
                         infection_beats_recovery, second_chance_all_helpers,
                         two_type_verdict)

T_THIN_FIRST = 10
T_THIN_SECOND = 11
T_INDEP_FIRST = 12


@dataclass(frozen=True)
class ThinnedBackend:
    """Lower field = upper field times keyed Bernoulli thinning bits:
    ``theta_xi`` for first chances (per oriented edge) and ``theta_zeta``
    for second chances (per special edge).  Dominated almost surely."""

    theta_xi: float
    theta_zeta: float = 1.0
    dominating = True

    def first_chance_bit(self, fam: VariableFamilies, e: OrientedEdge,
                         upper_fn) -> int:
        if fam.extra_uniform(T_THIN_FIRST, e) >= self.theta_xi:
            return 0
        return upper_fn(fam, e)

    def second_chance_bit(self, fam: VariableFamilies,
                          e: OrientedEdge) -> int:
        if fam.extra_uniform(T_THIN_SECOND, unoriented(*e)) >= \
                self.theta_zeta:
            return 0
        return second_chance_all_helpers(fam, e)


@dataclass(frozen=True)
class IndependentBackend:
    """Fresh i.i.d. Bernoulli(q) first-chance field (independent of the
    edge states and of the upper side); second chances keep the full
    all-helpers product.  Standalone lower law: Bernoulli(pq) percolation,
    plus the second-chance bonus on special edges in the second
    algorithm."""

    q: float
    dominating = False

    def first_chance_bit(self, fam: VariableFamilies, e: OrientedEdge,
                         upper_fn) -> int:
        return 1 if fam.extra_uniform(T_INDEP_FIRST, e) < self.q else 0

    def second_chance_bit(self, fam: VariableFamilies,
                          e: OrientedEdge) -> int:
        return second_chance_all_helpers(fam, e)


class CouplingInvariantError(AssertionError):
    """Inclusion invariant broke; carries a forensic dump of the pass."""

    def __init__(self, message: str, *, pass_index: int, site: Site,
                 detail: dict):
        self.pass_index = pass_index
        self.site = site
        self.detail = detail
        super().__init__(
            f"{message}\n  pass {pass_index}, site {site}\n  "
            + "\n  ".join(f"{k}: {v}" for k, v in detail.items()))


@dataclass
class ClusterSide:
    """Exploration bookkeeping of one side of a coupled run (no times:
    the coupled algorithms only track the trees)."""

    frontier: list[Site] = field(default_factory=list)
    treated: set[Site] = field(default_factory=set)
    treated_order: list[Site] = field(default_factory=list)
    closed_edges: set[OrientedEdge] = field(default_factory=set)
    first_chance_edges: set[OrientedEdge] = field(default_factory=set)
    second_chance_edges: set[OrientedEdge] = field(default_factory=set)
    parent: dict[Site, Site] = field(default_factory=dict)
    discovered: set[Site] = field(default_factory=set)
    status: ExplorationStatus = ExplorationStatus.EXHAUSTED

    @property
    def size(self) -> int:
        return len(self.treated)


@dataclass
class CoupledState:
    upper: ClusterSide
    lower: ClusterSide
    passes: int
    invariant_checks: int


def _full_inclusion_check(upper: ClusterSide, lower: ClusterSide,
                          pass_index: int) -> None:
    if not lower.treated <= upper.treated:
        bad = sorted(lower.treated - upper.treated)[:5]
        raise CouplingInvariantError(
            "lower treated set escapes upper treated set",
            pass_index=pass_index, site=bad[0],
            detail={"escaped": bad,
                    "upper_treated": len(upper.treated),
                    "lower_treated": len(lower.treated)})
    if not lower.discovered <= upper.discovered:
        bad = sorted(lower.discovered - upper.discovered)[:5]
        raise CouplingInvariantError(
            "lower discovered set escapes upper discovered set",
            pass_index=pass_index, site=bad[0],
            detail={"escaped": bad,
                    "upper_discovered": len(upper.discovered),
                    "lower_discovered": len(lower.discovered)})


def _explore_coupled(fam: VariableFamilies, backend, budget: int, *,
                     algorithm: str, run_upper: bool, run_lower: bool,
                     window: Window | None,
                     check_invariants: bool | None) -> CoupledState:
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not (run_upper or run_lower):
        raise ValueError("at least one side must run")
    if check_invariants is None:
        check_invariants = backend.dominating and run_upper and run_lower
    if check_invariants and not backend.dominating:
        raise ValueError("inclusion invariants require a dominating backend")
    second = algorithm == "second"
    origin: Site = (0,) * fam.params.d
    upper = ClusterSide()
    lower = ClusterSide()
    gate_lower = check_invariants  # lower waits for upper treatment
    pass_index = 0
    checks = 0

    if run_upper:
        upper.frontier = [origin]
        upper.discovered = {origin}
        upper.parent[origin] = origin
    if run_lower:
        lower.frontier = [origin]
        lower.discovered = {origin}
        lower.parent[origin] = origin
    head_u = head_l = 0

    def upper_verdict(e: OrientedEdge, helper: Site) -> int:
        if second:
            return two_type_verdict(fam, e, helper)
        if fam.edge_state(unoriented(*e)) == 1 \
                and infection_beats_recovery(fam, e) == 1:
            return 1
        return 0

    def lower_verdict(e: OrientedEdge) -> int:
        if second:
            if fam.edge_state(unoriented(*e)) == 1:
                return backend.first_chance_bit(fam, e, first_chance)
            if is_special(e):
                return 2 * backend.second_chance_bit(fam, e)
            return 0
        if fam.edge_state(unoriented(*e)) == 1:
            return backend.first_chance_bit(fam, e, infection_beats_recovery)
        return 0

    while True:
        upper_active = run_upper and head_u < len(upper.frontier) \
            and len(upper.treated) < budget
        lower_pending = run_lower and head_l < len(lower.frontier) \
            and len(lower.treated) < budget
        if not upper_active and not lower_pending:
            break
        pass_index += 1

        if upper_active:
            y = upper.frontier[head_u]
            head_u += 1
            helper = upper.parent[y]
            for z in neighbors(y):
                if z in upper.discovered:
                    continue
                if window is not None and not window.contains(z):
                    continue
                verdict = upper_verdict((y, z), helper)
                if verdict == 0:
                    upper.closed_edges.add((y, z))
                else:
                    (upper.first_chance_edges if verdict == 1
                     else upper.second_chance_edges).add((y, z))
                    upper.parent[z] = y
                    upper.discovered.add(z)
                    upper.frontier.append(z)
            upper.treated.add(y)
            upper.treated_order.append(y)

        if lower_pending:
            y = lower.frontier[head_l]
            ready = True
            if gate_lower:
                if y not in upper.treated:
                    ready = False
                    upper_exhausted = not (run_upper
                                           and head_u < len(upper.frontier)
                                           and len(upper.treated) < budget)
                    if upper_exhausted:
                        # upper stopped first (budget): the lower cluster
                        # cannot be grown further without outrunning it
                        lower.status = ExplorationStatus.TRUNCATED
                        lower.frontier = lower.frontier[head_l:]
                        break
            if ready:
                head_l += 1
                if check_invariants and y not in upper.treated:
                    raise CouplingInvariantError(
                        "lower side treats a site the upper side never "
                        "treated", pass_index=pass_index, site=y,
                        detail={"lower_frontier": len(lower.frontier)
                                - head_l})
                for z in neighbors(y):
                    if z in lower.discovered:
                        continue
                    if window is not None and not window.contains(z):
                        continue
                    verdict = lower_verdict((y, z))
                    if verdict == 0:
                        lower.closed_edges.add((y, z))
                    else:
                        (lower.first_chance_edges if verdict == 1
                         else lower.second_chance_edges).add((y, z))
                        lower.parent[z] = y
                        lower.discovered.add(z)
                        lower.frontier.append(z)
                        if check_invariants and z not in upper.discovered:
                            raise CouplingInvariantError(
                                "lower side discovered a site the upper "
                                "side never discovered",
                                pass_index=pass_index, site=z,
                                detail={
                                    "edge": ((y, z)),
                                    "edge_state":
                                        fam.edge_state(unoriented(y, z)),
                                    "lower_verdict": verdict,
                                })
                lower.treated.add(y)
                lower.treated_order.append(y)

        if check_invariants and (pass_index % 1024 == 0):
            _full_inclusion_check(upper, lower, pass_index)
            checks += 1
        checks += 1

    if run_upper:
        upper.frontier = upper.frontier[head_u:]
        upper.status = (ExplorationStatus.EXHAUSTED if not upper.frontier
                        else ExplorationStatus.BUDGET_REACHED)
    if run_lower and lower.status is not ExplorationStatus.TRUNCATED:
        lower.frontier = lower.frontier[head_l:]
        lower.status = (ExplorationStatus.EXHAUSTED if not lower.frontier
                        else ExplorationStatus.BUDGET_REACHED)
    if check_invariants:
        _full_inclusion_check(upper, lower, pass_index)
        checks += 1
    return CoupledState(upper, lower, pass_index, checks)


def explore_coupled_first(fam: VariableFamilies, backend, budget: int, *,
                          run_upper: bool = True, run_lower: bool = True,
                          window: Window | None = None,
                          check_invariants: bool | None = None
                          ) -> CoupledState:
    """Joint first-chance exploration: both sides share the edge states;
    the lower side opens an edge when the backend's reduced indicator and
    the edge state are both one."""
    return _explore_coupled(fam, backend, budget, algorithm="first",
                            run_upper=run_upper, run_lower=run_lower,
                            window=window, check_invariants=check_invariants)


def explore_coupled_second(fam: VariableFamilies, backend, budget: int, *,
                           run_upper: bool = True, run_lower: bool = True,
                           window: Window | None = None,
                           check_invariants: bool | None = None
                           ) -> CoupledState:
    """Joint two-type exploration: the upper side uses the treated site's
    parent as helper, the lower side the all-helpers product, so the lower
    verdict never exceeds the upper one under a dominating backend."""
    return _explore_coupled(fam, backend, budget, algorithm="second",
                            run_upper=run_upper, run_lower=run_lower,
                            window=window, check_invariants=check_invariants)


def lower_cluster_law_check(d: int, p: float, q: float, L: int,
                            replicas: int, seed: int, *,
                            large_threshold: int | None = None) -> dict:
    """Compare the standalone independent-backend lower cluster against a
    direct Bernoulli(pq) bond-percolation sampler on the same window.

    Returns the two-sample Kolmogorov-Smirnov p-value on cluster sizes, the
    mean comparison, and the large-cluster fraction comparison.
    """
    from scipy.stats import ks_2samp

    from .stats import two_proportion_z
    window = Window(d, L)
    if large_threshold is None:
        large_threshold = max(2, window.site_count // 4)
    params = ModelParams(d=d, p=p, v=1.0, lam=1.0)  # v, lam unused below
    backend = IndependentBackend(q)
    sizes_lower = []
    for i in range(replicas):
        fam = VariableFamilies(seed + i, params)
        st = explore_coupled_first(fam, backend, window.site_count,
                                   run_upper=False, window=window)
        sizes_lower.append(st.lower.size)
    cfg = perco.PercoConfig(d=d, a=p * q, b=0.0, L=L)
    sizes_direct = [perco.sample_cluster(cfg, seed + replicas + i).size
                    for i in range(replicas)]
    ks = ks_2samp(sizes_lower, sizes_direct, method="asymp")
    k1 = sum(s >= large_threshold for s in sizes_lower)
    k2 = sum(s >= large_threshold for s in sizes_direct)
    mean_l = sum(sizes_lower) / replicas
    mean_d = sum(sizes_direct) / replicas
    var_l = sum((s - mean_l) ** 2 for s in sizes_lower) / (replicas - 1)
    var_d = sum((s - mean_d) ** 2 for s in sizes_direct) / (replicas - 1)
    mean_z = (mean_l - mean_d) / ((var_l + var_d) / replicas) ** 0.5 \
        if var_l + var_d > 0 else 0.0
    return {
        "n": replicas,
        "ks_pvalue": float(ks.pvalue),
        "ks_pass_1pct": bool(ks.pvalue > 0.01),
        "mean_lower": mean_l,
        "mean_direct": mean_d,
        "mean_z": mean_z,
        "large_threshold": large_threshold,
        "frac_large_lower": k1 / replicas,
        "frac_large_direct": k2 / replicas,
        "large_z": two_proportion_z(k1, replicas, k2, replicas),
    }
