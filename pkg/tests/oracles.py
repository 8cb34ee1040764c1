"""Independent oracles: straight-line simulations and closed forms written
against the model directly, sharing no code path with the package's keyed
constructions."""

import math

import numpy as np


def chain_p11(p, v, t):
    """P(edge available at t | available at 0) for the two-state chain."""
    return p + (1.0 - p) * math.exp(-v * t)


def chain_p01(p, v, t):
    """P(edge available at t | unavailable at 0)."""
    return p * (1.0 - math.exp(-v * t))


def _pair_alive_y(x_first, y_first, lam, horizon, rng):
    """Gillespie simulation of the two-site contact process (fresh
    exponential clocks, memoryless resampling); returns whether y is
    infected at the horizon.  Starts with both sites infected."""
    x_inf = y_inf = True
    t = 0.0
    next_x = x_first
    next_y = y_first
    while True:
        if x_inf and y_inf:
            tn = min(next_x, next_y)
            if tn > horizon:
                return True
            t = tn
            if next_x <= next_y:
                x_inf = False
                next_x = t + rng.exponential(1.0)
            else:
                y_inf = False
                next_y = t + rng.exponential(1.0)
        elif x_inf or y_inf:
            t_inf = t + rng.exponential(1.0 / lam)
            t_rec = next_x if x_inf else next_y
            if min(t_inf, t_rec) > horizon:
                return y_inf
            if t_inf < t_rec:
                t = t_inf
                if x_inf:
                    y_inf = True
                    next_y = t + rng.exponential(1.0)
                else:
                    x_inf = True
                    next_x = t + rng.exponential(1.0)
            else:
                t = t_rec
                if x_inf:
                    x_inf = False
                else:
                    y_inf = False
                return False  # empty; y cannot be infected at horizon
        else:
            return False


def second_chance_scenario_oracle(p, v, lam, n, seed):
    """Forward-in-time simulation of the second-chance scenario with one
    helper: the target edge is unavailable at time 0 (the moment the source
    was infected through its parent edge) and every delay is drawn fresh.

    Returns the number of successes among n replicas.
    """
    rng = np.random.default_rng(seed)
    on_rate = v * p
    off_rate = v * (1.0 - p)
    hits = 0
    for _ in range(n):
        t_on = rng.exponential(1.0 / on_rate)
        y_life = rng.exponential(1.0)
        if t_on < y_life:
            # source still in its first infected interval when the edge opens
            attempt = rng.exponential(1.0 / lam)
            re_close = rng.exponential(1.0 / off_rate)
            hits += attempt < min(y_life - t_on, re_close)
            continue
        # source recovered first: the helper edge must still be available
        # and the pair process must hold the source infected at the switch
        d_parent = rng.exponential(1.0 / lam)
        helper_life = rng.exponential(1.0)
        helper_edge_close = rng.exponential(1.0 / off_rate)
        if not t_on < helper_edge_close - d_parent:
            continue
        if not d_parent < helper_life:
            continue  # pair process starts empty
        if not _pair_alive_y(helper_life - d_parent, y_life, lam, t_on, rng):
            continue
        attempt = rng.exponential(1.0 / lam)
        re_close = rng.exponential(1.0 / off_rate)
        fresh_life = rng.exponential(1.0)
        hits += attempt < min(fresh_life, re_close)
    return hits


def direct_bond_cluster_sizes(p, L, replicas, seed):
    """Cluster-of-origin sizes for Bernoulli(p) bond percolation on the
    [-L, L]^2 window via numpy-random BFS (no keyed machinery)."""
    rng = np.random.default_rng(seed)
    sizes = []
    for _ in range(replicas):
        edges = {}

        def open_edge(a, b):
            key = (a, b) if a <= b else (b, a)
            got = edges.get(key)
            if got is None:
                got = edges[key] = rng.random() < p
            return got

        cluster = {(0, 0)}
        queue = [(0, 0)]
        while queue:
            x = queue.pop()
            cx, cy = x
            for y in ((cx - 1, cy), (cx + 1, cy), (cx, cy - 1),
                      (cx, cy + 1)):
                if y in cluster or max(abs(y[0]), abs(y[1])) > L:
                    continue
                if open_edge(x, y):
                    cluster.add(y)
                    queue.append(y)
        sizes.append(len(cluster))
    return sizes


def geometric_exponential_sum_tail(lam, t, n, seed):
    """Monte Carlo tail P(sum > t) of a Geometric(1/(lam+1)) number of
    Exp(2) variables, drawn directly with numpy."""
    rng = np.random.default_rng(seed)
    counts = rng.geometric(1.0 / (lam + 1.0), size=n)
    total = rng.gamma(shape=counts, scale=0.5)  # sum of k Exp(2) is Gamma(k, 1/2)
    return float(np.mean(total > t))
