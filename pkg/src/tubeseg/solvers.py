"""Minimisers for the Potts energy ``sum_v U[v, u(v)] + sum_{u(a) != u(b)} w_ab``.

``graph`` is anything exposing ``num_nodes``, ``edge_index`` (m x 2) and
``edge_weight`` (m,), e.g. :class:`~tubeseg.segmentation.PottsGraph`.
Passing a list as ``history`` records the energy after every accepted move.
"""

from __future__ import annotations

import numpy as np

from .maxflow import FlowGraph
from .segmentation import potts_energy

MAX_BRUTE_FORCE_STATES = 2**24


class InstanceTooLarge(ValueError):
    pass


def solve_bruteforce(graph, unary: np.ndarray) -> np.ndarray:
    """Exact minimiser by enumeration; ties go to the lexicographically smallest labelling.

    The energy of every labelling is materialised as an n-dimensional tensor
    (axis v = label of node v), so C-order argmin is the lexicographic tie-break.
    """
    n = graph.num_nodes
    n_labels = unary.shape[1]
    if n_labels**n > MAX_BRUTE_FORCE_STATES:
        raise InstanceTooLarge(f"{n_labels}^{n} labellings exceed {MAX_BRUTE_FORCE_STATES}")
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    energy = np.zeros((n_labels,) * n)
    for v in range(n):
        shape = [1] * n
        shape[v] = n_labels
        energy += np.asarray(unary[v], dtype=np.float64).reshape(shape)
    differ = 1.0 - np.eye(n_labels)
    for (a, b), w in zip(graph.edge_index, graph.edge_weight):
        if w == 0 or a == b:
            continue
        shape = [1] * n
        shape[a] = shape[b] = n_labels
        term = w * differ if a < b else w * differ.T
        energy += term.reshape(shape)
    return np.array(np.unravel_index(int(np.argmin(energy)), energy.shape), dtype=np.int64)


def _neighbours(graph):
    nbr = [[] for _ in range(graph.num_nodes)]
    for (a, b), w in zip(graph.edge_index, graph.edge_weight):
        nbr[a].append((int(b), float(w)))
        nbr[b].append((int(a), float(w)))
    return nbr


def solve_icm(graph, unary: np.ndarray, init, history: list | None = None, max_sweeps: int = 1000) -> np.ndarray:
    """Greedy single-node updates in node order until a sweep changes nothing.

    A node moves only when its local cost strictly drops; among equally good
    alternatives the smallest label wins.
    """
    labels = np.array(init, dtype=np.int64)
    n_labels = unary.shape[1]
    nbr = _neighbours(graph)
    for _ in range(max_sweeps):
        changed = False
        for v in range(graph.num_nodes):
            cost = unary[v].astype(np.float64).copy()
            for u, w in nbr[v]:
                cost += w
                cost[labels[u]] -= w
            best = int(np.argmin(cost))
            if cost[best] < cost[labels[v]]:
                labels[v] = best
                changed = True
                if history is not None:
                    history.append(potts_energy(graph, unary, labels))
        if not changed:
            break
    assert labels.max(initial=0) < n_labels
    return labels


def expansion_move(graph, unary: np.ndarray, labels: np.ndarray, alpha: int) -> np.ndarray:
    """Optimal alpha-expansion of ``labels`` via one min-cut.

    Binary variable 0 keeps the current label (source side), 1 switches to
    ``alpha`` (sink side).  Nodes already at ``alpha`` are fixed.
    """
    n = graph.num_nodes
    var = labels != alpha
    cost0 = np.where(var, unary[np.arange(n), labels], 0.0).astype(np.float64)
    cost1 = np.where(var, unary[:, alpha], 0.0).astype(np.float64)
    g = FlowGraph(n)
    for (p, q), lam in zip(graph.edge_index, graph.edge_weight):
        if lam == 0:
            continue
        vp, vq = var[p], var[q]
        if vp and vq:
            # E00 = lam*[f_p != f_q], E01 = E10 = lam, E11 = 0
            e00 = lam if labels[p] != labels[q] else 0.0
            # E = E00 + (E10 - E00) x_p + (E11 - E10) x_q + (E01 + E10 - E00 - E11)(1 - x_p) x_q
            cost1[p] += lam - e00
            cost0[q] += lam  # -lam * x_q == lam * (1 - x_q) - lam
            g.add_edge(int(p), int(q), 2 * lam - e00)
        elif vp:
            cost0[p] += lam
        elif vq:
            cost0[q] += lam
    for v in np.nonzero(var)[0]:
        base = min(cost0[v], cost1[v])
        g.add_tweights(int(v), cost1[v] - base, cost0[v] - base)
    g.maxflow()
    out = labels.copy()
    for v in np.nonzero(var)[0]:
        if not g.in_source_segment(int(v)):
            out[v] = alpha
    return out


def solve_alpha_expansion(
    graph, unary: np.ndarray, init, history: list | None = None, warm_start: bool = True
) -> np.ndarray:
    """Cycle expansion moves over all labels until a full cycle brings no decrease.

    With ``warm_start`` the cycles begin at the ICM fixed point reached from
    ``init``.  Expansion moves never raise the energy, so the result is never
    worse than ICM from the same start; a cold start can settle in a poorer
    local minimum than ICM on small instances.
    """
    labels = np.array(init, dtype=np.int64)
    if warm_start:
        labels = solve_icm(graph, unary, labels, history)
    energy = potts_energy(graph, unary, labels)
    n_labels = unary.shape[1]
    while True:
        improved = False
        for alpha in range(n_labels):
            cand = expansion_move(graph, unary, labels, alpha)
            e = potts_energy(graph, unary, cand)
            if e < energy:
                labels, energy = cand, e
                improved = True
                if history is not None:
                    history.append(energy)
        if not improved:
            return labels


SOLVERS = {
    "expansion": solve_alpha_expansion,
    "icm": solve_icm,
    "brute": lambda graph, unary, init=None: solve_bruteforce(graph, unary),
}
