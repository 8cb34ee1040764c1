"""Experiment orchestration CLI.

One executable with one subcommand per experiment.  Every command requires
an explicit ``--seed`` (no system entropy is ever consumed), derives
replica seeds as ``seed + replica_index``, and writes machine-readable
output: JSON with stable key order, or CSV with a fixed documented header.
Rerunning a command with identical flags produces byte-identical output.

Flags may also be supplied through ``--config FILE``, a flat
``key = value`` text file whose keys are the long flag names with dashes
replaced by underscores; explicit flags take precedence.

Exit codes: 0 on success, 2 on configuration errors, 3 when a runtime
invariant (a coupling inclusion or a pathwise monotonicity) is violated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import coupling, cpde, environment, exploration, perco, second_chance
from .coupling import CouplingInvariantError
from .lattice import Window
from .perco import EnhancementMonotonicityError, PercoConfig
from .randomness import ModelParams, VariableFamilies
from .stats import wilson_interval


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Estimate records and pooling.


@dataclass(frozen=True)
class EstimateRecord:
    """One binomial estimate with its provenance.

    ``wall_time`` is diagnostic only and never written into output files
    (the files must be byte-stable across reruns).
    """

    name: str
    estimate: float
    ci_low: float
    ci_high: float
    n: int
    seed: int
    wall_time: float = 0.0
    params: dict = field(default_factory=dict)
    method: str = "wilson"

    @property
    def successes(self) -> int:
        return round(self.estimate * self.n)


def make_record(name: str, successes: int, n: int, seed: int,
                params: dict | None = None,
                wall_time: float = 0.0) -> EstimateRecord:
    lo, hi = wilson_interval(successes, n)
    return EstimateRecord(name, successes / n, lo, hi, n, seed, wall_time,
                          dict(params or {}))


def merge(*records: EstimateRecord) -> EstimateRecord:
    """Pool same-experiment records into one estimate (Wilson interval on
    the pooled counts)."""
    if not records:
        raise ValueError("nothing to merge")
    first = records[0]
    for r in records[1:]:
        if r.name != first.name or r.params != first.params:
            raise ValueError(
                f"cannot merge records of different experiments: "
                f"{first.name}{first.params} vs {r.name}{r.params}")
    successes = sum(r.successes for r in records)
    n = sum(r.n for r in records)
    wall = sum(r.wall_time for r in records)
    return make_record(first.name, successes, n, first.seed, first.params,
                       wall)


# ---------------------------------------------------------------------------
# Output plumbing.


def _emit_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _emit_csv(header: list[str], rows: list[tuple], out: str | None) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v
                         for v in row])
    text = buf.getvalue()
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(
                        f"{path}:{lineno}: expected 'key = value', "
                        f"got {raw.strip()!r}")
                key, value = line.split("=", 1)
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


class _Resolver:
    """Merge explicit flags with config-file values, casting and validating
    with line-precise messages."""

    def __init__(self, args: argparse.Namespace):
        self.args = vars(args)
        self.config = {}
        if self.args.get("config"):
            self.config = _parse_config_file(self.args["config"])

    def get(self, key: str, cast, default=None, required: bool = False,
            check=None, describe: str = ""):
        value = self.args.get(key)
        if value is None and key in self.config:
            try:
                value = cast(self.config[key])
            except ValueError as exc:
                raise ConfigError(
                    f"config key {key}: cannot parse "
                    f"{self.config[key]!r}: {exc}") from exc
        if value is None:
            value = default
        if value is None and required:
            raise ConfigError(f"missing required option --{key.replace('_', '-')}"
                              + (f" ({describe})" if describe else ""))
        if value is not None and check is not None and not check(value):
            raise ConfigError(
                f"option --{key.replace('_', '-')}={value} out of range"
                + (f" ({describe})" if describe else ""))
        return value


def _probability(x: float) -> bool:
    return 0.0 <= x <= 1.0


def _floats_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _model_params(res: _Resolver, *, need_lambda: bool = True) -> ModelParams:
    d = res.get("d", int, default=2, check=lambda x: x >= 2,
                describe="dimension >= 2")
    p = res.get("p", float, required=True, check=_probability,
                describe="edge density in [0,1]")
    v = res.get("v", float, required=True, check=lambda x: x > 0,
                describe="update speed > 0")
    lam = 0.0
    if need_lambda:
        lam = res.get("lam", float, required=True,
                      check=lambda x: x >= 0, describe="infection rate >= 0")
    return ModelParams(d=d, p=p, v=v, lam=lam)


def _seed(res: _Resolver) -> int:
    return res.get("seed", int, required=True,
                   describe="master seed; commands never draw entropy")


# ---------------------------------------------------------------------------
# Subcommand handlers.


def _cmd_env_check(res: _Resolver) -> None:
    params = _model_params(res, need_lambda=False)
    seed = _seed(res)
    times = res.get("times", _floats_list, default=[0.1, 1.0, 10.0],
                    check=lambda ts: ts and all(t > 0 for t in ts))
    n_edges = res.get("n_edges", int, default=10000,
                      check=lambda x: x >= 1)
    fam = VariableFamilies(seed, params)
    rows = environment.stationarity_table(fam, times, n_edges)
    _emit_csv(["t", "empirical_p", "stderr"], rows, res.args.get("out"))


def _cmd_cpde_survival(res: _Resolver) -> None:
    params = _model_params(res)
    seed = _seed(res)
    big_l = res.get("L", int, required=True, check=lambda x: x >= 1)
    horizon = res.get("horizon", float, required=True,
                      check=lambda x: x > 0)
    replicas = res.get("replicas", int, required=True,
                       check=lambda x: x >= 1)
    est, (lo, hi) = cpde.survival_estimate(params, Window(params.d, big_l),
                                           horizon, replicas, seed)
    _emit_json({"estimate": est, "ci_low": lo, "ci_high": hi,
                "replicas": replicas}, res.args.get("out"))


def _cmd_explore(res: _Resolver) -> None:
    params = _model_params(res)
    seed = _seed(res)
    alg = res.get("alg", str, required=True,
                  check=lambda a: a in ("first", "second"))
    budget = res.get("budget", int, required=True, check=lambda x: x >= 1)
    big_l = res.get("L", int, default=None)
    window = Window(params.d, big_l) if big_l else None
    fam = VariableFamilies(seed, params)
    if alg == "first":
        state = exploration.explore_first(fam, budget, window=window)
    else:
        state = exploration.explore_second(fam, budget, window=window)
    tree_path = res.args.get("emit_tree")
    if tree_path:
        with open(tree_path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(exploration.tree_payload(state),
                                sort_keys=True, indent=2) + "\n")
    _emit_json({
        "status": state.status.value,
        "treated": len(state.treated),
        "frontier": len(state.frontier),
        "edges_closed": len(state.closed_edges),
        "edges_first_chance": len(state.first_chance_edges),
        "edges_second_chance": len(state.second_chance_edges),
    }, res.args.get("out"))


def _size_hist(sizes: list[int]) -> list[list[int]]:
    hist: dict[int, int] = {}
    for s in sizes:
        hist[s] = hist.get(s, 0) + 1
    return [[s, hist[s]] for s in sorted(hist)]


def _cmd_couple(res: _Resolver) -> None:
    params = _model_params(res)
    seed = _seed(res)
    alg = res.get("alg", str, required=True,
                  check=lambda a: a in ("first", "second"))
    backend_kind = res.get("backend", str, required=True,
                           check=lambda b: b in ("thinned", "independent"))
    budget = res.get("budget", int, required=True, check=lambda x: x >= 1)
    replicas = res.get("replicas", int, default=1, check=lambda x: x >= 1)
    if backend_kind == "thinned":
        theta_xi = res.get("theta_xi", float, required=True,
                           check=_probability)
        theta_zeta = res.get("theta_zeta", float, default=1.0,
                             check=_probability)
        backend = coupling.ThinnedBackend(theta_xi, theta_zeta)
    else:
        q = res.get("q", float, required=True, check=_probability)
        backend = coupling.IndependentBackend(q)
    runner = (coupling.explore_coupled_first if alg == "first"
              else coupling.explore_coupled_second)
    upper_sizes, lower_sizes = [], []
    for i in range(replicas):
        fam = VariableFamilies(seed + i, params)
        st = runner(fam, backend, budget)
        upper_sizes.append(st.upper.size)
        lower_sizes.append(st.lower.size)
    _emit_json({
        "violations": 0,
        "upper_size_hist": _size_hist(upper_sizes),
        "lower_size_hist": _size_hist(lower_sizes),
    }, res.args.get("out"))


def _cmd_zeta_estimate(res: _Resolver) -> None:
    params = _model_params(res)
    seed = _seed(res)
    n = res.get("n", int, required=True, check=lambda x: x >= 1)
    r = res.get("r", float, default=None,
                check=lambda x: 0.0 < x < 1.0,
                describe="target rate the confidence interval must clear")
    est, ci = second_chance.estimate_second_chance(
        params.d, params.p, params.v, params.lam, n, seed)
    bound = second_chance.second_chance_floor(params.d, params.p)
    # pass: the interval clears the target rate (or is simply nonzero
    # when no target was requested)
    ok = ci[0] > (r if r is not None else 0.0)
    _emit_json({
        "estimate": est,
        "ci": [ci[0], ci[1]],
        "lemma1_bound": bound,
        "pass": bool(ok),
        "r": r,
        "n": n,
        "seed": seed,
    }, res.args.get("out"))


def _cmd_extinction_check(res: _Resolver) -> None:
    seed = _seed(res)
    lam = res.get("lam", float, required=True, check=lambda x: x > 0)
    n = res.get("n", int, required=True, check=lambda x: x >= 1)
    points = res.get("grid_points", int, default=60,
                     check=lambda x: x >= 2)
    t_max = res.get("t_max", float, default=3.0 * (lam + 1.0),
                    check=lambda x: x > 0)
    times = second_chance.sample_extinction_times(lam, n, seed)
    oracle = second_chance.PhaseTypeOracle(lam)
    grid = np.linspace(0.0, t_max, points)
    surv = oracle.survival_batch(grid)
    rows = []
    for t, s in zip(grid, surv):
        emp = float(np.mean(times > t))
        rows.append((float(t), emp, float(s),
                     second_chance.extinction_tail_bound(lam, float(t))))
    _emit_csv(["t", "empirical_survival", "phase_type_survival",
               "exponential_bound"], rows, res.args.get("out"))


def _cmd_perco(res: _Resolver) -> None:
    seed = _seed(res)
    d = res.get("d", int, default=2, check=lambda x: x >= 2)
    a = res.get("a", float, required=True, check=_probability)
    b = res.get("b", float, default=0.0, check=_probability)
    big_l = res.get("L", int, required=True, check=lambda x: x >= 1)
    replicas = res.get("replicas", int, required=True,
                       check=lambda x: x >= 1)
    try:
        cfg = PercoConfig(d=d, a=a, b=b, L=big_l)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    est, ci = perco.boundary_reach_probability(cfg, replicas, seed)
    _emit_json({"reach_estimate": est, "ci": [ci[0], ci[1]],
                "replicas": replicas}, res.args.get("out"))


def _cmd_certify(res: _Resolver) -> None:
    params = _model_params(res)
    seed = _seed(res)
    r = res.get("r", float, required=True,
                check=lambda x: 0.0 < x < 1.0)
    q = res.get("q", float, required=True, check=_probability)
    zeta_n = res.get("zeta_n", int, default=20000, check=lambda x: x >= 1)
    a0_l = res.get("a0_L", int, default=128, check=lambda x: x >= 1)
    a0_replicas = res.get("a0_replicas", int, default=200,
                          check=lambda x: x >= 1)
    a0_grid = res.get("a0_grid", _floats_list,
                      default=[0.45, 0.47, 0.49],
                      check=lambda g: g and all(_probability(x) for x in g))
    pc_value = perco.PC_BY_DIMENSION.get(params.d)
    if pc_value is None:
        raise ConfigError(f"no percolation threshold on record for "
                          f"d={params.d}")
    est, ci = second_chance.estimate_second_chance(
        params.d, params.p, params.v, params.lam, zeta_n, seed)
    b0 = min((1.0 - pc_value) / 2.0, r * (1.0 - pc_value))
    a0, evidence = perco.empirical_enhancement_threshold(
        params.d, b0, a0_l, a0_replicas, seed + zeta_n, a0_grid)
    cert = perco.parameter_schedule_certificate(
        params.d, r=r, p=params.p, v=params.v, lam=params.lam, q=q,
        zeta_estimate=est, zeta_ci=ci, a0_proxy=a0, pc_value=pc_value,
        a0_evidence=evidence)
    _emit_json(cert, res.args.get("out"))


# ---------------------------------------------------------------------------
# Parser.


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--seed", type=int, default=None,
                    help="master seed (required; no entropy defaults)")
    sp.add_argument("--config", type=str, default=None,
                    help="flat key=value config file; flags take precedence")
    sp.add_argument("--out", type=str, default=None,
                    help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpdelab",
        description="Monte Carlo laboratory for the contact process on "
                    "dynamical bond percolation")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("env-check",
                        help="stationarity table of the edge environment "
                             "(CSV: t,empirical_p,stderr)")
    sp.add_argument("--d", type=int, default=None)
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--v", type=float, default=None)
    sp.add_argument("--times", type=_floats_list, default=None,
                    help="comma-separated probe times")
    sp.add_argument("--n-edges", dest="n_edges", type=int, default=None)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_env_check)

    sp = sub.add_parser("cpde-survival",
                        help="alive-at-horizon frequency of the reference "
                             "process (JSON)")
    for flag, typ in (("--d", int), ("--p", float), ("--v", float),
                      ("--lambda", float), ("--L", int),
                      ("--horizon", float), ("--replicas", int)):
        sp.add_argument(flag, dest=flag.strip("-").replace("lambda", "lam"),
                        type=typ, default=None)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_cpde_survival)

    sp = sub.add_parser("explore",
                        help="run one dominated exploration (JSON summary; "
                             "optional infection-tree file)")
    sp.add_argument("--alg", choices=["first", "second"], default=None)
    for flag, typ in (("--d", int), ("--p", float), ("--v", float),
                      ("--lambda", float), ("--budget", int), ("--L", int)):
        sp.add_argument(flag, dest=flag.strip("-").replace("lambda", "lam"),
                        type=typ, default=None)
    sp.add_argument("--emit-tree", dest="emit_tree", type=str, default=None,
                    help="write the infection tree as JSON to this path")
    _add_common(sp)
    sp.set_defaults(handler=_cmd_explore)

    sp = sub.add_parser("couple",
                        help="coupled upper/lower exploration replicas "
                             "(JSON size histograms; exit 3 on inclusion "
                             "violation)")
    sp.add_argument("--alg", choices=["first", "second"], default=None)
    sp.add_argument("--backend", choices=["thinned", "independent"],
                    default=None)
    for flag, typ in (("--d", int), ("--p", float), ("--v", float),
                      ("--lambda", float), ("--theta-xi", float),
                      ("--theta-zeta", float), ("--q", float),
                      ("--budget", int), ("--replicas", int)):
        dest = flag.strip("-").replace("-", "_").replace("lambda", "lam")
        sp.add_argument(flag, dest=dest, type=typ, default=None)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_couple)

    sp = sub.add_parser("zeta-estimate",
                        help="all-helpers second-chance success estimate "
                             "on the canonical special edge (JSON)")
    for flag, typ in (("--d", int), ("--p", float), ("--v", float),
                      ("--lambda", float), ("--n", int), ("--r", float)):
        sp.add_argument(flag, dest=flag.strip("-").replace("lambda", "lam"),
                        type=typ, default=None)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_zeta_estimate)

    sp = sub.add_parser("extinction-check",
                        help="two-site extinction survival curve vs exact "
                             "oracles (CSV)")
    sp.add_argument("--lambda", dest="lam", type=float, default=None)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--grid-points", dest="grid_points", type=int,
                    default=None)
    sp.add_argument("--t-max", dest="t_max", type=float, default=None)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_extinction_check)

    sp = sub.add_parser("perco",
                        help="boundary-reach estimate of the two-type "
                             "percolation (JSON)")
    for flag, typ in (("--d", int), ("--a", float), ("--b", float),
                      ("--L", int), ("--replicas", int)):
        sp.add_argument(flag, dest=flag.strip("-"), type=typ, default=None)
    _add_common(sp)
    sp.set_defaults(handler=_cmd_perco)

    sp = sub.add_parser("certify",
                        help="parameter-schedule certificate (JSON; "
                             "numerical evidence, not proof)")
    for flag, typ in (("--d", int), ("--p", float), ("--v", float),
                      ("--lambda", float), ("--q", float), ("--r", float),
                      ("--zeta-n", int), ("--a0-L", int),
                      ("--a0-replicas", int)):
        dest = flag.strip("-").replace("-", "_").replace("lambda", "lam") \
                   .replace("a0_L", "a0_L")
        sp.add_argument(flag, dest=dest, type=typ, default=None)
    sp.add_argument("--a0-grid", dest="a0_grid", type=_floats_list,
                    default=None, help="comma-separated density grid for "
                                       "the enhancement-threshold scan")
    _add_common(sp)
    sp.set_defaults(handler=_cmd_certify)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    started = time.monotonic()
    try:
        res = _Resolver(args)
        args.handler(res)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (CouplingInvariantError, EnhancementMonotonicityError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3
    print(f"wall_time_s={time.monotonic() - started:.3f}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
