"""Exact optimal transport between finitely supported rational distributions.

The problem is solved as a min-cost flow by successive shortest augmenting
paths over exact rationals.  Every solve returns, besides the optimal value,
a feasible coupling and dual potentials (phi, psi) with
phi_i + psi_j <= cost_ij and equal primal and dual value; the certificate is
verified before returning, so a returned answer is proven optimal.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .ratio import ONE, ZERO


class TransportError(ValueError):
    pass


@dataclass(frozen=True)
class TransportResult:
    value: Fraction
    coupling: dict[tuple[int, int], Fraction]
    phi: tuple[Fraction, ...]
    psi: tuple[Fraction, ...]


def _check_masses(masses: Sequence[Fraction], side: str) -> None:
    total = ZERO
    for w in masses:
        if w <= ZERO:
            raise TransportError(f"{side} masses must be positive rationals")
        total += w
    if total != ONE:
        raise TransportError(f"{side} masses sum to {total}, not 1")


def wasserstein(
    p: Sequence[Fraction],
    q: Sequence[Fraction],
    cost: Sequence[Sequence[Fraction]],
) -> TransportResult:
    """Exact optimal transportation value between mass vectors p and q.

    cost[i][j] is the ground cost of moving mass from source item i to
    target item j; costs must lie in [0,1].
    """
    p = [Fraction(w) for w in p]
    q = [Fraction(w) for w in q]
    _check_masses(p, "source")
    _check_masses(q, "target")
    n, m = len(p), len(q)
    for i in range(n):
        if len(cost[i]) != m:
            raise TransportError("cost matrix shape mismatch")
        for j in range(m):
            c = cost[i][j]
            if c < ZERO or c > ONE:
                raise TransportError(f"cost {c} outside [0,1]")

    # Successive shortest paths on the bipartite residual graph.  supply[i]
    # and demand[j] are the unrouted masses; x is the flow.
    x = [[ZERO] * m for _ in range(n)]
    supply = list(p)
    demand = list(q)
    INF = Fraction(10 ** 9)

    while True:
        active_sources = [i for i in range(n) if supply[i] > ZERO]
        if not active_sources:
            break
        # Bellman-Ford over source and sink nodes; node ids: i in [0,n) are
        # sources, n+j are sinks.  Residual arcs: i -> n+j always (cost c_ij),
        # n+j -> i when x[i][j] > 0 (cost -c_ij).
        dist = [INF] * (n + m)
        pred: list[tuple[int, int] | None] = [None] * (n + m)
        for i in active_sources:
            dist[i] = ZERO
        for _ in range(n + m + 2):
            changed = False
            for i in range(n):
                di = dist[i]
                if di < INF:
                    row = cost[i]
                    for j in range(m):
                        nd = di + row[j]
                        if nd < dist[n + j]:
                            dist[n + j] = nd
                            pred[n + j] = (i, j)
                            changed = True
            for i in range(n):
                xi = x[i]
                for j in range(m):
                    if xi[j] > ZERO and dist[n + j] < INF:
                        nd = dist[n + j] - cost[i][j]
                        if nd < dist[i]:
                            dist[i] = nd
                            pred[i] = (i, j)
                            changed = True
            if not changed:
                break
        # Cheapest reachable sink with unmet demand.
        best = None
        for j in range(m):
            if demand[j] > ZERO and dist[n + j] < INF:
                if best is None or dist[n + j] < dist[n + best]:
                    best = j
        if best is None:
            raise TransportError("transportation problem infeasible")
        # Trace the augmenting path back to a source with remaining supply.
        path: list[tuple[str, int, int]] = []
        node = n + best
        while True:
            edge = pred[node]
            if node >= n:
                if edge is None:
                    break
                i, j = edge
                path.append(("fwd", i, j))
                node = i
            else:
                if edge is None:
                    break
                i, j = edge
                path.append(("bwd", i, j))
                node = n + j
        source = node
        bottleneck = min(supply[source], demand[best])
        for direction, i, j in path:
            if direction == "bwd":
                bottleneck = min(bottleneck, x[i][j])
        for direction, i, j in path:
            if direction == "fwd":
                x[i][j] += bottleneck
            else:
                x[i][j] -= bottleneck
        supply[source] -= bottleneck
        demand[best] -= bottleneck

    value = ZERO
    for i in range(n):
        for j in range(m):
            value += x[i][j] * cost[i][j]

    phi, psi = _dual_potentials(x, cost, n, m)
    result = TransportResult(
        value=value,
        coupling={(i, j): x[i][j] for i in range(n) for j in range(m) if x[i][j] > ZERO},
        phi=phi,
        psi=psi,
    )
    verify_certificate(p, q, cost, result)
    return result


def _dual_potentials(x, cost, n: int, m: int):
    """Shortest distances from a virtual root in the final residual graph.

    The optimal flow admits no negative residual cycle, so the distances
    exist and satisfy pi(v) <= pi(u) + c(u, v) for every residual arc, which
    is exactly dual feasibility with complementary slackness on the support.
    """
    pi = [ZERO] * (n + m)
    for _ in range(n + m + 2):
        changed = False
        for i in range(n):
            for j in range(m):
                if pi[i] + cost[i][j] < pi[n + j]:
                    pi[n + j] = pi[i] + cost[i][j]
                    changed = True
                if x[i][j] > ZERO and pi[n + j] - cost[i][j] < pi[i]:
                    pi[i] = pi[n + j] - cost[i][j]
                    changed = True
        if not changed:
            break
    else:
        raise TransportError("negative cycle in residual graph; flow is not optimal")
    phi = tuple(-pi[i] for i in range(n))
    psi = tuple(pi[n + j] for j in range(m))
    return phi, psi


def verify_certificate(p, q, cost, result: TransportResult) -> None:
    """Exact feasibility plus primal = dual optimality check."""
    n, m = len(p), len(q)
    row_sums = [ZERO] * n
    col_sums = [ZERO] * m
    for (i, j), w in result.coupling.items():
        if w <= ZERO:
            raise TransportError("coupling carries nonpositive mass")
        row_sums[i] += w
        col_sums[j] += w
    if row_sums != list(p) or col_sums != list(q):
        raise TransportError("coupling marginals do not match the inputs")
    primal = sum((w * cost[i][j] for (i, j), w in result.coupling.items()), ZERO)
    if primal != result.value:
        raise TransportError("reported value differs from the coupling cost")
    for i in range(n):
        for j in range(m):
            if result.phi[i] + result.psi[j] > cost[i][j]:
                raise TransportError(f"dual potentials infeasible at ({i},{j})")
    dual = sum((p[i] * result.phi[i] for i in range(n)), ZERO) + sum(
        (q[j] * result.psi[j] for j in range(m)), ZERO
    )
    if dual != primal:
        raise TransportError("duality gap: certificate rejected")
