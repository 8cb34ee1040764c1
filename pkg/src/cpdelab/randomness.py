"""Seed-deterministic random variable families.

One :class:`VariableFamilies` object carries every random input the
simulations consume, keyed by site or edge:

* ``edge_state`` -- Bernoulli(p) equilibrium state of an unoriented edge;
* ``switch_on_delay`` / ``switch_off_delay`` -- Exp(vp) / Exp(v(1-p)) waits
  until an edge switches to available / unavailable;
* ``recovery_delay`` / ``recovery_delay_retry`` -- Exp(1) waits until a
  site's next recovery (the retry variable is a fresh copy used after a
  site has been re-infected);
* ``infection_delay`` -- Exp(lambda) wait until the next infection attempt
  through an oriented edge;
* ``recovery_marks`` / ``infection_marks`` -- Poisson mark streams with
  intensities 1 and lambda.

Each value is a pure function of ``(master seed, key, family tag)``; there is
no sequential state, so algorithms that share a seed share randomness
bit-exactly regardless of query order.  Mark streams are generated in fixed
blocks of expected count one, which makes "first mark after t" an O(1)
query and keeps horizon extension from perturbing earlier marks.

On top of the families the module defines the derived indicator fields:
the first-chance infection indicators, the second-chance indicators for the
special edges (which consult the auxiliary two-site process), and the
three-valued verdicts used by the two-type percolation coupling.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from . import keyed, lattice
from .lattice import OrientedEdge, Site, UnorientedEdge, is_special, unoriented

# family tags (absorbed last, so per-site chain prefixes can be reused)
T_EDGE_STATE = 1
T_SWITCH_ON = 2
T_SWITCH_OFF = 3
T_RECOVERY = 4
T_RECOVERY_RETRY = 5
T_INFECTION = 6
T_RECOVERY_MARKS = 7
T_INFECTION_MARKS = 8
T_ENV_SWITCH = 9

# Poisson(1) CDF used for per-block mark counts; the tail beyond the table
# (< 1e-18) is truncated to the last entry.
_POISSON1_CDF: list[float] = []
_acc = 0.0
_term = math.exp(-1.0)
for _k in range(20):
    _acc += _term
    _POISSON1_CDF.append(_acc)
    _term /= _k + 1
_POISSON1_CDF_ARR = np.asarray(_POISSON1_CDF)
del _acc, _term, _k


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the contact process on dynamical percolation."""

    d: int
    p: float
    v: float
    lam: float

    def __post_init__(self) -> None:
        if self.d < 2:
            raise ValueError("dimension must be >= 2")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.v < 0.0:
            raise ValueError("update speed v must be >= 0")
        if self.lam < 0.0:
            raise ValueError("infection rate must be >= 0")


class MarkStream:
    """Poisson mark stream on [0, inf), materialized lazily per block.

    Block k covers [k/rate, (k+1)/rate); its mark count is Poisson(1) and
    the positions are uniform in the block, all derived from the block
    index, so any sub-interval can be generated without touching the rest
    of the stream.
    """

    __slots__ = ("rate", "_prefix", "_blocks")

    def __init__(self, prefix: int, rate: float):
        self.rate = rate
        self._prefix = prefix
        self._blocks: dict[int, tuple[float, ...]] = {}

    def _block(self, b: int) -> tuple[float, ...]:
        got = self._blocks.get(b)
        if got is not None:
            return got
        state = keyed.absorb(self._prefix, b)
        u0 = keyed.unit_open(keyed.absorb(state, 0))
        count = bisect_right(_POISSON1_CDF, u0)
        if count == 0:
            marks: tuple[float, ...] = ()
        else:
            marks = tuple(sorted(
                (b + keyed.unit_open(keyed.absorb(state, j))) / self.rate
                for j in range(1, count + 1)))
        self._blocks[b] = marks
        return marks

    def first_after(self, t: float) -> float:
        """Smallest mark strictly greater than ``t``."""
        if self.rate <= 0.0 or t == math.inf:
            return math.inf
        b = int(t * self.rate) - 1
        if b < 0:
            b = 0
        while True:
            for m in self._block(b):
                if m > t:
                    return m
            b += 1

    def marks_until(self, horizon: float) -> np.ndarray:
        """All marks in [0, horizon], sorted, as a float64 array
        (vectorized; bit-identical to the scalar block content)."""
        if self.rate <= 0.0 or horizon <= 0.0:
            return np.empty(0)
        nblocks = int(horizon * self.rate) + 1
        blocks = np.arange(nblocks, dtype=np.uint64)
        states = keyed.absorb_vec(np.uint64(self._prefix), blocks)
        u0 = keyed.unit_open_vec(keyed.absorb_vec(states, np.uint64(0)))
        counts = np.searchsorted(_POISSON1_CDF_ARR, u0, side="right")
        total = int(counts.sum())
        if total == 0:
            return np.empty(0)
        rep_states = np.repeat(states, counts)
        rep_blocks = np.repeat(blocks.astype(np.float64), counts)
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        jidx = (np.arange(total, dtype=np.uint64)
                - starts.astype(np.uint64) + np.uint64(1))
        u = keyed.unit_open_vec(keyed.absorb_vec(rep_states, jidx))
        marks = (rep_blocks + u) / self.rate
        marks.sort()
        return marks[marks <= horizon]


class VariableFamilies:
    """All keyed random inputs for one (seed, parameters) pair.

    Values are memoized; repeated access returns the identical float.  The
    memo dictionaries are only appended to, so concurrent readers are safe
    under CPython; families meant for parallel replicas should simply use
    distinct seeds.
    """

    def __init__(self, master_seed: int, params: ModelParams):
        self.master_seed = master_seed
        self.params = params
        self.tie_count = 0
        self._root = keyed.seed_state(master_seed)
        self._sites: dict[Site, int] = {}
        self._values: dict[tuple, float] = {}
        self._streams: dict[tuple, MarkStream] = {}

    # -- chain states -------------------------------------------------
    def _site_state(self, x: Site) -> int:
        s = self._sites.get(x)
        if s is None:
            s = keyed.chain(self._root, x)
            self._sites[x] = s
        return s

    def _pair_state(self, a: Site, b: Site) -> int:
        return keyed.chain(self._site_state(a), b)

    # -- scalar families ----------------------------------------------
    def edge_state(self, e: UnorientedEdge) -> int:
        e = unoriented(*e)
        key = (T_EDGE_STATE, e)
        got = self._values.get(key)
        if got is None:
            got = float(keyed.bernoulli(
                keyed.absorb(self._pair_state(*e), T_EDGE_STATE),
                self.params.p))
            self._values[key] = got
        return int(got)

    def _edge_exp(self, tag: int, e: UnorientedEdge, rate: float) -> float:
        e = unoriented(*e)
        key = (tag, e)
        got = self._values.get(key)
        if got is None:
            got = keyed.exponential(
                keyed.absorb(self._pair_state(*e), tag), rate)
            self._values[key] = got
        return got

    def switch_on_delay(self, e: UnorientedEdge) -> float:
        return self._edge_exp(T_SWITCH_ON, e, self.params.v * self.params.p)

    def switch_off_delay(self, e: UnorientedEdge) -> float:
        return self._edge_exp(T_SWITCH_OFF, e,
                              self.params.v * (1.0 - self.params.p))

    def _site_exp(self, tag: int, x: Site) -> float:
        key = (tag, x)
        got = self._values.get(key)
        if got is None:
            got = keyed.exponential(keyed.absorb(self._site_state(x), tag), 1.0)
            self._values[key] = got
        return got

    def recovery_delay(self, x: Site) -> float:
        return self._site_exp(T_RECOVERY, x)

    def recovery_delay_retry(self, x: Site) -> float:
        return self._site_exp(T_RECOVERY_RETRY, x)

    def infection_delay(self, e: OrientedEdge) -> float:
        key = (T_INFECTION, e)
        got = self._values.get(key)
        if got is None:
            got = keyed.exponential(
                keyed.absorb(self._pair_state(e[0], e[1]), T_INFECTION),
                self.params.lam)
            self._values[key] = got
        return got

    # -- mark streams ---------------------------------------------------
    def recovery_marks(self, x: Site) -> MarkStream:
        key = (T_RECOVERY_MARKS, x)
        s = self._streams.get(key)
        if s is None:
            s = MarkStream(
                keyed.absorb(self._site_state(x), T_RECOVERY_MARKS), 1.0)
            self._streams[key] = s
        return s

    def infection_marks(self, e: UnorientedEdge) -> MarkStream:
        e = unoriented(*e)
        key = (T_INFECTION_MARKS, e)
        s = self._streams.get(key)
        if s is None:
            s = MarkStream(
                keyed.absorb(self._pair_state(*e), T_INFECTION_MARKS),
                self.params.lam)
            self._streams[key] = s
        return s

    def env_switch_prefix(self, e: UnorientedEdge) -> int:
        """Chain prefix for the dynamic-environment switch sequence of an
        edge (consumed by :mod:`cpdelab.environment`)."""
        e = unoriented(*e)
        return keyed.absorb(self._pair_state(*e), T_ENV_SWITCH)

    # -- auxiliary keyed draws (coupling backends, tests) ---------------
    def extra_uniform(self, tag: int, parts: tuple[Site, ...]) -> float:
        state = self._root
        for s in parts:
            state = keyed.chain(state, s)
        return keyed.unit_open(keyed.absorb(state, tag))

    # -- tie-aware strict comparison ------------------------------------
    def less(self, a: float, tag_a: int, b: float, tag_b: int) -> bool:
        """Strict ``a < b`` with the measure-zero float tie broken by
        family-tag order and counted in ``tie_count``."""
        if a < b:
            return True
        if b < a:
            return False
        if a == math.inf:
            return False  # parameter degeneracy (zero rate), not a tie
        self.tie_count += 1
        return tag_a < tag_b


# ---------------------------------------------------------------------------
# Derived indicator fields.


def infection_beats_recovery(fam: VariableFamilies, e: OrientedEdge) -> int:
    """First-attempt success indicator ignoring edge updates: the infection
    delay through ``e`` beats the source's recovery delay.  Marginal
    probability lambda / (lambda + 1)."""
    return int(fam.less(fam.infection_delay(e), T_INFECTION,
                        fam.recovery_delay(e[0]), T_RECOVERY))


def first_chance(fam: VariableFamilies, e: OrientedEdge) -> int:
    """First-chance success through an available edge: the infection delay
    beats both the source's recovery and the edge switching off.  Marginal
    probability lambda / (lambda + 1 + v(1-p))."""
    d = fam.infection_delay(e)
    return int(fam.less(d, T_INFECTION, fam.recovery_delay(e[0]), T_RECOVERY)
               and fam.less(d, T_INFECTION, fam.switch_off_delay(e),
                            T_SWITCH_OFF))


def first_chance_probability(p: float, v: float, lam: float) -> float:
    """Closed form for the marginal of :func:`first_chance`."""
    return lam / (lam + 1.0 + v * (1.0 - p))


def _validate_second_chance_edge(e: OrientedEdge, helper: Site) -> None:
    if not is_special(e):
        raise ValueError(f"second chances only apply to special edges: {e}")
    y, z = e
    if helper == z or not lattice.is_adjacent(helper, y):
        raise ValueError(
            f"helper {helper} must be a neighbor of {y} other than {z}")


def second_chance(fam: VariableFamilies, e: OrientedEdge, helper: Site) -> int:
    """Success indicator of the second-chance infection through the special
    edge ``e = (y, z)`` with the help of ``y``'s neighbor ``helper``.

    Two mutually exclusive routes succeed.  Either the edge switches on
    before ``y``'s recovery and the next attempt beats both the remaining
    lifetime and the switch back off; or ``y`` recovers first, in which case
    the helper edge must still be available at the switch-on time, the
    two-site process on the helper edge must hold ``y`` infected at that
    time, and the attempt must beat a fresh recovery and the switch back
    off.
    """
    _validate_second_chance_edge(e, helper)
    y, z = e
    t_on = fam.switch_on_delay(e)
    rec = fam.recovery_delay(y)
    if fam.less(t_on, T_SWITCH_ON, rec, T_RECOVERY):
        # edge becomes available within y's first infected interval
        d = fam.infection_delay(e)
        return int(fam.less(d, T_INFECTION, rec - t_on, T_RECOVERY)
                   and fam.less(d, T_INFECTION, fam.switch_off_delay(e),
                                T_SWITCH_OFF))
    # y recovered before the edge opened: ride the helper-edge process
    helper_edge = unoriented(helper, y)
    if not fam.less(t_on, T_SWITCH_ON,
                    fam.switch_off_delay(helper_edge)
                    - fam.infection_delay((helper, y)), T_SWITCH_OFF):
        return 0
    from .second_chance import run_two_site  # deferred: avoids import cycle
    proc = run_two_site(fam, (helper, y), horizon=t_on)
    if not proc.contains(y, t_on):
        return 0
    d = fam.infection_delay(e)
    return int(fam.less(d, T_INFECTION, fam.recovery_delay_retry(y),
                        T_RECOVERY_RETRY)
               and fam.less(d, T_INFECTION, fam.switch_off_delay(e),
                            T_SWITCH_OFF))


def second_chance_all_helpers(fam: VariableFamilies, e: OrientedEdge) -> int:
    """Product of :func:`second_chance` over every helper neighbor of the
    source other than the target (the orientation-free lower bound used on
    the percolation side of the coupling).

    Evaluates the shared factors once and short-circuits, so it is much
    cheaper than literally multiplying the per-helper indicators, with which
    it agrees exactly.
    """
    if not is_special(e):
        raise ValueError(f"second chances only apply to special edges: {e}")
    y, z = e
    t_on = fam.switch_on_delay(e)
    rec = fam.recovery_delay(y)
    d = fam.infection_delay(e)
    if fam.less(t_on, T_SWITCH_ON, rec, T_RECOVERY):
        # the immediate route is helper-independent, so it decides the product
        return int(fam.less(d, T_INFECTION, rec - t_on, T_RECOVERY)
                   and fam.less(d, T_INFECTION, fam.switch_off_delay(e),
                                T_SWITCH_OFF))
    if not (fam.less(d, T_INFECTION, fam.recovery_delay_retry(y),
                     T_RECOVERY_RETRY)
            and fam.less(d, T_INFECTION, fam.switch_off_delay(e),
                         T_SWITCH_OFF)):
        return 0
    from .second_chance import run_two_site  # deferred: avoids import cycle
    for helper in lattice.neighbors(y):
        if helper == z:
            continue
        helper_edge = unoriented(helper, y)
        if not fam.less(t_on, T_SWITCH_ON,
                        fam.switch_off_delay(helper_edge)
                        - fam.infection_delay((helper, y)), T_SWITCH_OFF):
            return 0
        if not run_two_site(fam, (helper, y), horizon=t_on).contains(y, t_on):
            return 0
    return 1


def two_type_verdict(fam: VariableFamilies, e: OrientedEdge,
                     helper: Site) -> int:
    """Three-valued edge verdict: 1 for a first-chance opening through an
    available edge, 2 for a second-chance opening through an unavailable
    special edge (with the given helper), 0 otherwise."""
    if fam.edge_state(unoriented(*e)) == 1:
        return first_chance(fam, e)
    if is_special(e):
        return 2 * second_chance(fam, e, helper)
    return 0


def two_type_verdict_lower(fam: VariableFamilies, e: OrientedEdge,
                           backend) -> int:
    """Lower-side three-valued verdict, with the chance bits supplied by a
    coupling backend (see :mod:`cpdelab.coupling`).  Pointwise at most
    :func:`two_type_verdict` for every helper when the backend is
    dominating."""
    if fam.edge_state(unoriented(*e)) == 1:
        return backend.first_chance_bit(fam, e, first_chance)
    if is_special(e):
        return 2 * backend.second_chance_bit(fam, e)
    return 0


# ---------------------------------------------------------------------------
# Vectorized marginal estimator for the first-chance field (used by the
# acceptance suite, which sweeps a parameter grid at 10^6 samples per cell).


def first_chance_marginal_estimate(params: ModelParams, n: int,
                                   master_seed: int) -> float:
    """Empirical mean of the first-chance indicator over ``n`` edges with
    pairwise distinct sources (hence i.i.d. samples)."""
    root = np.uint64(keyed.seed_state(master_seed))
    idx = np.arange(n, dtype=np.int64)
    c0 = 2 * (idx % 512)
    c1 = 2 * (idx // 512)
    src = keyed.absorb_vec(keyed.absorb_vec(root, keyed.encode_i64(c0)),
                           keyed.encode_i64(c1))
    edge = keyed.absorb_vec(keyed.absorb_vec(src, keyed.encode_i64(c0 + 1)),
                            keyed.encode_i64(c1))
    rec = keyed.exponential_vec(
        keyed.absorb_vec(src, np.uint64(T_RECOVERY)), 1.0)
    off = keyed.exponential_vec(
        keyed.absorb_vec(edge, np.uint64(T_SWITCH_OFF)),
        params.v * (1.0 - params.p))
    inf_delay = keyed.exponential_vec(
        keyed.absorb_vec(edge, np.uint64(T_INFECTION)), params.lam)
    return float(np.mean((inf_delay < rec) & (inf_delay < off)))


def first_chance_marginal_scalar_probe(params: ModelParams, n: int,
                                       master_seed: int) -> list[int]:
    """Scalar re-evaluation of the first ``n`` indicators sampled by
    :func:`first_chance_marginal_estimate` (cross-path consistency tests)."""
    fam = VariableFamilies(master_seed, params)
    out = []
    for k in range(n):
        x = (2 * (k % 512), 2 * (k // 512))
        zz = (x[0] + 1, x[1])
        out.append(first_chance(fam, (x, zz)))
    return out
