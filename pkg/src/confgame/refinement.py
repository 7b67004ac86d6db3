"""Generated refinements: close a conformance on a determinized carrier
under the algebra structure of the determinization.

For subset carriers the algebra is finite union, and a refinement must
contain the inclusion order, be reflexive and transitive, and be a
congruence for binary union.  For distribution carriers the algebra is
convex combination, and a refinement is a pseudometric satisfying the
convexity inequality for every in-carrier decomposition.  For identity
determinizations only the plain relational or metric closure applies.

``close`` computes the least refinement above a given conformance, and
``is_refinement`` checks the fixpoint property.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .coalgebra import Distribution
from .conformance import (
    Conformance,
    Fibre,
    symmetric_closure_rows,
    transitive_closure_rows,
    triangle_closure_matrix,
)
from .graded import DetSystem
from .ratio import ONE, ZERO

CLOSURE_SWEEP_CAP = 500


class ClosureCapError(RuntimeError):
    """The decreasing metric fixpoint did not stabilize within the cap."""


@dataclass
class AlgebraDescriptor:
    """Carrier plus the operation evidence the closure rules act on."""

    det: DetSystem
    kind: str  # "union" | "convex" | "plain"
    _union_checked: bool = field(default=False, repr=False)
    _decompositions: Optional[list[tuple[int, int, int, Fraction]]] = field(
        default=None, repr=False
    )

    @property
    def points(self):
        return self.det.points

    def union_id(self, i: int, j: int) -> Optional[int]:
        mask = self.det.points[i] | self.det.points[j]
        try:
            return self.det.point_id(mask)
        except Exception:
            return None

    def check_union_closed(self) -> bool:
        """Complete subset carriers are closed under union; reachable-only
        carriers may be partial, in which case rules apply where defined."""
        if self.kind != "union":
            return True
        n = len(self.det.points)
        for i in range(n):
            for j in range(n):
                if self.union_id(i, j) is None:
                    return False
        return True

    def decompositions(self) -> list[tuple[int, int, int, Fraction]]:
        """All (i, j, k, p) with point_i = p * point_j + (1-p) * point_k,
        0 < p < 1 and j != k, over the distribution carrier."""
        if self._decompositions is not None:
            return self._decompositions
        out: list[tuple[int, int, int, Fraction]] = []
        if self.kind == "convex":
            pts = self.det.points
            n = len(pts)
            for j in range(n):
                for k in range(n):
                    if j == k:
                        continue
                    mj, mk = pts[j], pts[k]
                    assert isinstance(mj, Distribution) and isinstance(mk, Distribution)
                    for i in range(n):
                        if i == j or i == k:
                            continue
                        p = _decomposition_weight(pts[i], mj, mk)
                        if p is not None:
                            out.append((i, j, k, p))
        self._decompositions = out
        return out


def _decomposition_weight(mu: Distribution, m1: Distribution, m2: Distribution) -> Optional[Fraction]:
    support = sorted(set(m1.support) | set(m2.support) | set(mu.support))
    p = None
    for x in support:
        a, b = m1(x), m2(x)
        if a != b:
            p = (mu(x) - b) / (a - b)
            break
    if p is None or not (ZERO < p < ONE):
        return None
    for x in support:
        if mu(x) != p * m1(x) + (ONE - p) * m2(x):
            return None
    return p


def algebra_for(det: DetSystem) -> AlgebraDescriptor:
    name = det.instance.name
    if name in ("trace-inclusion", "btop-nfa"):
        return AlgebraDescriptor(det, "union")
    if name == "ptrace":
        return AlgebraDescriptor(det, "convex")
    return AlgebraDescriptor(det, "plain")


# ---------------------------------------------------------------------------
# closure

def close(alg: AlgebraDescriptor, q: Conformance) -> Conformance:
    """Least refinement above q, as a fixpoint of the closure rules."""
    _check_over_carrier(alg, q)
    if q.fibre.relational:
        return _close_relational(alg, q)
    return _close_metric(alg, q)


def _check_over_carrier(alg: AlgebraDescriptor, q: Conformance) -> None:
    if len(q.carrier) != len(alg.det.points):
        raise ValueError("conformance does not live over the algebra carrier")
    if q.fibre is not alg.det.instance.fibre:
        raise ValueError(
            f"fibre {q.fibre.value} does not match the instance fibre "
            f"{alg.det.instance.fibre.value}"
        )


def _inclusion_rows(alg: AlgebraDescriptor) -> list[int]:
    pts = alg.det.points
    n = len(pts)
    rows = []
    for i in range(n):
        row = 0
        for j in range(n):
            if pts[i] | pts[j] == pts[j]:
                row |= 1 << j
        rows.append(row)
    return rows


def _close_relational(alg: AlgebraDescriptor, q: Conformance) -> Conformance:
    assert q.rows is not None
    n = len(q.carrier)
    rows = list(q.rows)
    for i in range(n):
        rows[i] |= 1 << i
    if q.fibre.symmetric:
        rows = list(symmetric_closure_rows(rows))
    if alg.kind != "union":
        rows = list(transitive_closure_rows(rows))
        return Conformance.make(q.carrier, q.fibre, rows=rows, validate=False)

    if alg.check_union_closed():
        return _close_union_fast(alg, q, rows)
    return _close_union_sweep(alg, q, rows)


def _close_union_fast(alg: AlgebraDescriptor, q: Conformance, rows: list[int]) -> Conformance:
    """Closure over a union-closed subset carrier.

    One derived hop suffices: A is below B in one hop iff A is covered by B
    together with the left sides of claimed pairs whose right side is inside
    B.  Unions of claims (congruence), the inclusion order and single claims
    are all instances, and the transitive closure of the hop relation is
    closed under the congruence rule, hence equals the full rule fixpoint.
    """
    pts = alg.det.points
    n = len(pts)
    pairs = [
        (i, j)
        for i in range(n)
        for j in range(n)
        if rows[i] & (1 << j) and i != j
    ]
    hop = [0] * n
    for b in range(n):
        mask_b = pts[b]
        cover = mask_b
        for (i, j) in pairs:
            if pts[j] | mask_b == mask_b:
                cover |= pts[i]
        for a in range(n):
            if pts[a] | cover == cover:
                hop[a] |= 1 << b
    out = transitive_closure_rows(hop)
    return Conformance.make(q.carrier, q.fibre, rows=out, validate=False)


def _close_union_sweep(alg: AlgebraDescriptor, q: Conformance, rows: list[int]) -> Conformance:
    """Worklist closure for carriers that are not union closed: rules are
    applied only where the union of two carrier points is itself a point."""
    n = len(q.carrier)
    incl = _inclusion_rows(alg)
    rows = [r | s for r, s in zip(rows, incl)]
    rows = list(transitive_closure_rows(rows))
    pair_list = [(i, j) for i in range(n) for j in range(n) if rows[i] & (1 << j)]
    frontier = list(pair_list)
    while frontier:
        added: list[tuple[int, int]] = []
        for (i, j) in frontier:
            for (k, l) in pair_list:
                u = alg.union_id(i, k)
                v = alg.union_id(j, l)
                if u is not None and v is not None and not rows[u] & (1 << v):
                    rows[u] |= 1 << v
                    added.append((u, v))
        if added:
            rows = list(transitive_closure_rows(rows))
            new_pairs = [
                (i, j)
                for i in range(n)
                for j in range(n)
                if rows[i] & (1 << j) and (i, j) not in set(pair_list)
            ]
            pair_list.extend(new_pairs)
            frontier = new_pairs
        else:
            frontier = []
    return Conformance.make(q.carrier, q.fibre, rows=rows, validate=False)


def _close_metric(alg: AlgebraDescriptor, q: Conformance) -> Conformance:
    assert q.dist is not None
    n = len(q.carrier)
    d = [list(row) for row in q.dist]
    for i in range(n):
        d[i][i] = ZERO
    symmetric = q.fibre.symmetric

    groups: dict[Fraction, list[tuple[int, int, int]]] = {}
    if alg.kind == "convex":
        for (i, j, k, p) in alg.decompositions():
            groups.setdefault(p, []).append((i, j, k))
        for p, entries in groups.items():
            # every point decomposes trivially at every weight
            entries.extend((i, i, i) for i in range(n))

    for _ in range(CLOSURE_SWEEP_CAP):
        changed = False
        if symmetric:
            for i in range(n):
                for j in range(i):
                    m = min(d[i][j], d[j][i])
                    if d[i][j] != m or d[j][i] != m:
                        d[i][j] = d[j][i] = m
                        changed = True
        closed = triangle_closure_matrix(d)
        if tuple(tuple(row) for row in d) != closed:
            changed = True
            d = [list(row) for row in closed]
        for p, entries in groups.items():
            pc = ONE - p
            for (i, j, k) in entries:
                for (i2, j2, k2) in entries:
                    v = p * d[j][j2] + pc * d[k][k2]
                    if v < d[i][i2]:
                        d[i][i2] = v
                        changed = True
        if not changed:
            return Conformance.make(q.carrier, q.fibre, dist=d, validate=False)
    raise ClosureCapError(
        f"metric closure did not stabilize within {CLOSURE_SWEEP_CAP} sweeps"
    )


# ---------------------------------------------------------------------------
# refinement check

def is_refinement(alg: AlgebraDescriptor, p: Conformance) -> bool:
    """True iff p is a fixpoint of every closure rule of this algebra."""
    _check_over_carrier(alg, p)
    n = len(p.carrier)
    if p.fibre.relational:
        assert p.rows is not None
        rows = p.rows
        for i in range(n):
            if not rows[i] & (1 << i):
                return False
        if transitive_closure_rows(rows) != rows:
            return False
        if p.fibre.symmetric and symmetric_closure_rows(rows) != rows:
            return False
        if alg.kind == "union":
            incl = _inclusion_rows(alg)
            if any(inc & ~row for inc, row in zip(incl, rows)):
                return False
            pairs = [(i, j) for i in range(n) for j in range(n) if rows[i] & (1 << j)]
            for (i, j) in pairs:
                for (k, l) in pairs:
                    u = alg.union_id(i, k)
                    v = alg.union_id(j, l)
                    if u is not None and v is not None and not rows[u] & (1 << v):
                        return False
        return True
    assert p.dist is not None
    d = p.dist
    for i in range(n):
        if d[i][i] != ZERO:
            return False
        if p.fibre.symmetric and any(d[i][j] != d[j][i] for j in range(n)):
            return False
    if triangle_closure_matrix(d) != d:
        return False
    if alg.kind == "convex":
        groups: dict[Fraction, list[tuple[int, int, int]]] = {}
        for (i, j, k, pw) in alg.decompositions():
            groups.setdefault(pw, []).append((i, j, k))
        for pw, entries in groups.items():
            entries = entries + [(i, i, i) for i in range(n)]
            for (i, j, k) in entries:
                for (i2, j2, k2) in entries:
                    if pw * d[j][j2] + (ONE - pw) * d[k][k2] < d[i][i2]:
                        return False
    return True
