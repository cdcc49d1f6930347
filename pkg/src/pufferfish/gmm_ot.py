"""Component-level optimal transport between two Gaussian mixtures.

The coupling restricted to mixtures of Gaussians reduces to a small
transportation problem: move the weights of one mixture onto the weights of
the other at cost ``W2^2`` per component pair. It is solved exactly with the
transportation simplex (north-west corner start, MODI pricing). Bland's rule
picks both the entering and the leaving cell, so degenerate pivots cannot
cycle.
"""

from __future__ import annotations

import collections
import dataclasses
from typing import NamedTuple

import numpy as np

from pufferfish.errors import ConvergenceError, MarginalMismatchError
from pufferfish.gaussian_ot import w2_squared
from pufferfish.gmm import Gmm1D

MARGINAL_TOL = 1e-9


@dataclasses.dataclass(frozen=True)
class TransportPlan:
    """Optimal coupling ``weights[m, l]`` of source component m to target component l."""

    weights: np.ndarray
    row_marginals: tuple[float, ...]
    col_marginals: tuple[float, ...]
    cost: float
    cost_matrix: np.ndarray

    def marginal_error(self) -> float:
        rows = np.abs(self.weights.sum(axis=1) - self.row_marginals).max()
        cols = np.abs(self.weights.sum(axis=0) - self.col_marginals).max()
        return float(max(rows, cols))

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "row_marginals": list(self.row_marginals),
            "col_marginals": list(self.col_marginals),
            "cost": self.cost,
        }


class CostTerm(NamedTuple):
    weight: float
    dmu: float
    dsigma: float


def w2_cost_matrix(src: Gmm1D, dst: Gmm1D) -> np.ndarray:
    return np.array([[w2_squared(a, b) for b in dst.components] for a in src.components])


def _northwest_corner(supply, demand):
    m, n = len(supply), len(demand)
    s, d = list(supply), list(demand)
    flow = np.zeros((m, n))
    basis = []
    i = j = 0
    while i < m and j < n:
        q = min(s[i], d[j])
        flow[i, j] = q
        basis.append((i, j))
        s[i] -= q
        d[j] -= q
        # exhaust exactly one line per step so the basis has m + n - 1 cells
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif s[i] <= d[j]:
            i += 1
        else:
            j += 1
    return flow, basis


def _tree_adjacency(basis, m):
    adj = collections.defaultdict(list)
    for i, j in basis:
        adj[i].append((m + j, (i, j)))
        adj[m + j].append((i, (i, j)))
    return adj


def _potentials(basis, cost, m, n):
    adj = _tree_adjacency(basis, m)
    pot = {0: 0.0}
    queue = collections.deque([0])
    while queue:
        node = queue.popleft()
        for nxt, (i, j) in adj[node]:
            if nxt in pot:
                continue
            # u_i + v_j = c_ij on basic cells
            pot[nxt] = cost[i, j] - pot[node]
            queue.append(nxt)
    u = np.array([pot[i] for i in range(m)])
    v = np.array([pot[m + j] for j in range(n)])
    return u, v


def _tree_path(basis, m, start, goal):
    adj = _tree_adjacency(basis, m)
    parent = {start: None}
    queue = collections.deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nxt, cell in adj[node]:
            if nxt not in parent:
                parent[nxt] = (node, cell)
                queue.append(nxt)
    cells = []
    node = goal
    while parent[node] is not None:
        node, cell = parent[node]
        cells.append(cell)
    return cells  # ordered from goal back to start


def tree_flows(basis, supply, demand):
    """Flows on a spanning-tree basis, found by peeling leaves."""
    m, n = len(supply), len(demand)
    rest = {i: float(supply[i]) for i in range(m)}
    rest.update({m + j: float(demand[j]) for j in range(n)})
    edges = {node: set() for node in rest}
    for i, j in basis:
        edges[i].add((i, j))
        edges[m + j].add((i, j))
    flow = np.zeros((m, n))
    leaves = collections.deque(node for node, e in edges.items() if len(e) == 1)
    while leaves:
        node = leaves.popleft()
        if len(edges[node]) != 1:
            continue
        (cell,) = edges[node]
        i, j = cell
        other = m + j if node == i else i
        flow[i, j] = rest[node]
        rest[other] -= rest[node]
        edges[node].clear()
        edges[other].discard(cell)
        if len(edges[other]) == 1:
            leaves.append(other)
    return flow


def transportation_simplex(supply, demand, cost, *, max_pivots: int = 10_000):
    """Minimise ``sum(flow * cost)`` subject to row sums ``supply`` and column sums ``demand``.

    Returns ``(flow, basis)``. ``supply`` and ``demand`` must have equal totals.
    """
    supply = np.asarray(supply, dtype=float)
    demand = np.asarray(demand, dtype=float)
    cost = np.asarray(cost, dtype=float)
    m, n = cost.shape
    flow, basis = _northwest_corner(supply, demand)
    tol = 1e-12 * (1.0 + float(np.abs(cost).max()))
    for _ in range(max_pivots):
        u, v = _potentials(basis, cost, m, n)
        reduced = cost - u[:, None] - v[None, :]
        in_basis = set(basis)
        entering = next(
            ((i, j) for i in range(m) for j in range(n)
             if (i, j) not in in_basis and reduced[i, j] < -tol),
            None,
        )
        if entering is None:
            flow = np.maximum(tree_flows(basis, supply, demand), 0.0)
            return flow, sorted(basis)
        ei, ej = entering
        path = _tree_path(basis, m, ei, m + ej)
        # path runs from column ej back to row ei; its cells alternate -, +, -, ...
        minus, plus = path[0::2], path[1::2]
        theta = min(flow[c] for c in minus)
        leaving = min(c for c in minus if flow[c] == theta)
        for c in minus:
            flow[c] -= theta
        for c in plus:
            flow[c] += theta
        flow[entering] = theta
        flow[leaving] = 0.0
        basis.remove(leaving)
        basis.append(entering)
    raise ConvergenceError("transportation simplex exceeded the pivot limit")


def solve_transport(src: Gmm1D, dst: Gmm1D) -> TransportPlan:
    """Optimal component coupling between two mixtures under the ``W2^2`` cost."""
    cost = w2_cost_matrix(src, dst)
    supply = np.asarray(src.weights)
    demand = np.asarray(dst.weights)
    # absorb the (<= 1e-9) weight-sum mismatch so the problem is balanced
    demand = demand * (supply.sum() / demand.sum())
    flow, _ = transportation_simplex(supply, demand, cost)
    return TransportPlan(
        weights=flow,
        row_marginals=tuple(src.weights),
        col_marginals=tuple(dst.weights),
        cost=float(np.sum(flow * cost)),
        cost_matrix=cost,
    )


def plan_cost_terms(plan: TransportPlan, src: Gmm1D, dst: Gmm1D) -> list[CostTerm]:
    """Per-cell ``(w_ml, |mu_m - mu_l|, |sigma_m - sigma_l|)`` for cells carrying mass."""
    w = plan.weights
    if w.shape != (src.count, dst.count):
        raise MarginalMismatchError(
            f"plan shape {w.shape} does not match mixtures ({src.count}, {dst.count})"
        )
    if (np.abs(w.sum(axis=1) - src.weights).max() > MARGINAL_TOL
            or np.abs(w.sum(axis=0) - dst.weights).max() > MARGINAL_TOL):
        raise MarginalMismatchError("plan marginals do not match the mixture weights")
    terms = []
    for m, a in enumerate(src.components):
        for l, b in enumerate(dst.components):
            if w[m, l] > 0:
                terms.append(CostTerm(float(w[m, l]), abs(a.mu - b.mu), abs(a.sigma - b.sigma)))
    return terms
