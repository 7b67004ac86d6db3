"""Fibre lattices of conformances over a fixed finite carrier.

A conformance is a comparison structure on a finite carrier: an equivalence,
a preorder, a 1-bounded pseudometric or hemimetric, or a finite topology
represented by its specialization preorder.  All conformances over one
carrier form a complete lattice under ``leq``, where "higher" uniformly means
"more identifying / smaller distances".  Relational variants are stored as
bitmask rows, metric variants as matrices of exact rationals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .ratio import ONE, ZERO


class FibreError(ValueError):
    """Carrier/variant mismatch or a violated structure axiom."""


class ClaimError(ValueError):
    """A claim that does not fit its fibre or carrier."""


class Fibre(str, Enum):
    EQUIVALENCE = "equivalence"
    PREORDER = "preorder"
    PSEUDOMETRIC = "pseudometric"
    HEMIMETRIC = "hemimetric"
    SPEC_PREORDER = "spec-preorder"

    @property
    def relational(self) -> bool:
        return self in (Fibre.EQUIVALENCE, Fibre.PREORDER, Fibre.SPEC_PREORDER)

    @property
    def metric(self) -> bool:
        return not self.relational

    @property
    def symmetric(self) -> bool:
        return self in (Fibre.EQUIVALENCE, Fibre.PSEUDOMETRIC)


@dataclass(frozen=True)
class Carrier:
    """Ordered finite set of opaque element identifiers."""

    elements: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.elements)) != len(self.elements):
            raise FibreError("carrier elements must be unique")
        object.__setattr__(self, "_index", {e: i for i, e in enumerate(self.elements)})

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, name: str) -> bool:
        return name in self._index  # type: ignore[attr-defined]

    def index(self, name: str) -> int:
        try:
            return self._index[name]  # type: ignore[attr-defined]
        except KeyError:
            raise FibreError(f"unknown carrier element {name!r}") from None


@dataclass(frozen=True)
class CarrierMap:
    """Total function between carriers, given on element indices."""

    domain: Carrier
    codomain: Carrier
    mapping: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.mapping) != len(self.domain):
            raise FibreError("carrier map must be total")
        for target in self.mapping:
            if not 0 <= target < len(self.codomain):
                raise FibreError(f"carrier map image index {target} out of range")

    @classmethod
    def from_names(cls, domain: Carrier, codomain: Carrier, assignment: dict[str, str]) -> "CarrierMap":
        mapping = tuple(codomain.index(assignment[e]) for e in domain.elements)
        return cls(domain, codomain, mapping)

    def __call__(self, i: int) -> int:
        return self.mapping[i]


def identity_map(carrier: Carrier) -> CarrierMap:
    return CarrierMap(carrier, carrier, tuple(range(len(carrier))))


# ---------------------------------------------------------------------------
# closure helpers on raw data

def transitive_closure_rows(rows: Sequence[int]) -> tuple[int, ...]:
    out = list(rows)
    n = len(out)
    for k in range(n):
        bit = 1 << k
        reach = out[k]
        for i in range(n):
            if out[i] & bit:
                out[i] |= reach
    return tuple(out)


def symmetric_closure_rows(rows: Sequence[int]) -> tuple[int, ...]:
    out = list(rows)
    n = len(out)
    for i in range(n):
        row = out[i]
        j = 0
        while row:
            if row & 1:
                out[j] |= 1 << i
            row >>= 1
            j += 1
    return tuple(out)


def triangle_closure_matrix(dist: Sequence[Sequence[Fraction]]) -> tuple[tuple[Fraction, ...], ...]:
    """All-pairs shortest-path relaxation; idempotent on 1-bounded inputs."""
    d = [list(row) for row in dist]
    n = len(d)
    for i in range(n):
        d[i][i] = ZERO
    for k in range(n):
        dk = d[k]
        for i in range(n):
            dik = d[i][k]
            if dik >= ONE:
                continue
            di = d[i]
            for j in range(n):
                s = dik + dk[j]
                if s < di[j]:
                    di[j] = s
    return tuple(tuple(row) for row in d)


def _check_relational(fibre: Fibre, rows: Sequence[int], n: int) -> None:
    for i in range(n):
        if not rows[i] & (1 << i):
            raise FibreError(f"relation not reflexive at index {i}")
        if rows[i] >> n:
            raise FibreError("relation row exceeds carrier size")
    if transitive_closure_rows(rows) != tuple(rows):
        raise FibreError("relation not transitive")
    if fibre.symmetric and symmetric_closure_rows(rows) != tuple(rows):
        raise FibreError("equivalence relation not symmetric")


def _check_metric(fibre: Fibre, dist: Sequence[Sequence[Fraction]], n: int) -> None:
    for i in range(n):
        if len(dist[i]) != n:
            raise FibreError("distance matrix not square")
        if dist[i][i] != ZERO:
            raise FibreError(f"nonzero distance on the diagonal at index {i}")
        for j in range(n):
            v = dist[i][j]
            if not isinstance(v, Fraction):
                raise FibreError("distance entries must be exact rationals")
            if v < ZERO or v > ONE:
                raise FibreError(f"distance {v} outside [0,1] at ({i},{j})")
            if fibre.symmetric and dist[j][i] != v:
                raise FibreError(f"pseudometric not symmetric at ({i},{j})")
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if dist[i][j] > dist[i][k] + dist[k][j]:
                    raise FibreError(
                        f"triangle inequality violated at ({i},{k},{j})"
                    )


@dataclass(frozen=True)
class Conformance:
    """One structure from the fibre over a fixed carrier."""

    carrier: Carrier
    fibre: Fibre
    rows: Optional[tuple[int, ...]] = None
    dist: Optional[tuple[tuple[Fraction, ...], ...]] = None

    # -- constructors -------------------------------------------------------

    @staticmethod
    def make(carrier: Carrier, fibre: Fibre, *, rows=None, dist=None, validate: bool = True) -> "Conformance":
        n = len(carrier)
        if fibre.relational:
            rows = tuple(rows)
            if validate:
                _check_relational(fibre, rows, n)
            return Conformance(carrier, fibre, rows=rows, dist=None)
        dist = tuple(tuple(Fraction(v) for v in row) for row in dist)
        if validate:
            _check_metric(fibre, dist, n)
        return Conformance(carrier, fibre, rows=None, dist=dist)

    @staticmethod
    def equivalence(carrier: Carrier, blocks: Iterable[Iterable[str]]) -> "Conformance":
        n = len(carrier)
        seen: set[int] = set()
        rows = [1 << i for i in range(n)]
        for block in blocks:
            idx = [carrier.index(e) for e in block]
            if seen.intersection(idx):
                raise FibreError("partition blocks must be disjoint")
            seen.update(idx)
            mask = 0
            for i in idx:
                mask |= 1 << i
            for i in idx:
                rows[i] = mask
        if len(seen) != n:
            raise FibreError("partition must cover the carrier")
        return Conformance.make(carrier, Fibre.EQUIVALENCE, rows=rows)

    @staticmethod
    def preorder(carrier: Carrier, pairs: Iterable[tuple[str, str]], *, fibre: Fibre = Fibre.PREORDER, close: bool = False) -> "Conformance":
        n = len(carrier)
        rows = [1 << i for i in range(n)]
        for a, b in pairs:
            rows[carrier.index(a)] |= 1 << carrier.index(b)
        if close:
            rows = list(transitive_closure_rows(rows))
        return Conformance.make(carrier, fibre, rows=rows)

    @staticmethod
    def spec_preorder(carrier: Carrier, pairs: Iterable[tuple[str, str]], *, close: bool = False) -> "Conformance":
        return Conformance.preorder(carrier, pairs, fibre=Fibre.SPEC_PREORDER, close=close)

    @staticmethod
    def pseudometric(carrier: Carrier, dist) -> "Conformance":
        return Conformance.make(carrier, Fibre.PSEUDOMETRIC, dist=dist)

    @staticmethod
    def hemimetric(carrier: Carrier, dist) -> "Conformance":
        return Conformance.make(carrier, Fibre.HEMIMETRIC, dist=dist)

    # -- accessors -----------------------------------------------------------

    def relates(self, i: int, j: int) -> bool:
        assert self.rows is not None
        return bool(self.rows[i] & (1 << j))

    def relates_names(self, a: str, b: str) -> bool:
        return self.relates(self.carrier.index(a), self.carrier.index(b))

    def distance(self, i: int, j: int) -> Fraction:
        assert self.dist is not None
        return self.dist[i][j]

    def distance_names(self, a: str, b: str) -> Fraction:
        return self.distance(self.carrier.index(a), self.carrier.index(b))

    def partition(self) -> tuple[frozenset[str], ...]:
        if self.fibre is not Fibre.EQUIVALENCE:
            raise FibreError("partition() requires an equivalence")
        assert self.rows is not None
        blocks = []
        seen: set[int] = set()
        for i in range(len(self.carrier)):
            if i in seen:
                continue
            mask = self.rows[i]
            members = [j for j in range(len(self.carrier)) if mask & (1 << j)]
            seen.update(members)
            blocks.append(frozenset(self.carrier.elements[j] for j in members))
        return tuple(blocks)

    def pairs(self) -> frozenset[tuple[str, str]]:
        """All related pairs (relational variants), diagonal included."""
        assert self.rows is not None
        n = len(self.carrier)
        return frozenset(
            (self.carrier.elements[i], self.carrier.elements[j])
            for i in range(n)
            for j in range(n)
            if self.rows[i] & (1 << j)
        )


def discrete(carrier: Carrier, fibre: Fibre) -> Conformance:
    """The lattice bottom: diagonal relation, or the all-ones distance."""
    n = len(carrier)
    if fibre.relational:
        return Conformance.make(carrier, fibre, rows=[1 << i for i in range(n)], validate=False)
    dist = [[ONE] * n for _ in range(n)]
    for i in range(n):
        dist[i][i] = ZERO
    return Conformance.make(carrier, fibre, dist=dist, validate=False)


def indiscrete(carrier: Carrier, fibre: Fibre) -> Conformance:
    """The lattice top: total relation, or the zero distance."""
    n = len(carrier)
    if fibre.relational:
        full = (1 << n) - 1
        return Conformance.make(carrier, fibre, rows=[full] * n, validate=False)
    return Conformance.make(carrier, fibre, dist=[[ZERO] * n for _ in range(n)], validate=False)


def _require_same_fibre(values: Sequence[Conformance]) -> tuple[Carrier, Fibre]:
    first = values[0]
    for other in values[1:]:
        if other.carrier != first.carrier:
            raise FibreError("conformances live over different carriers")
        if other.fibre is not first.fibre:
            raise FibreError("conformances live in different fibres")
    return first.carrier, first.fibre


# ---------------------------------------------------------------------------
# lattice operations

def leq(p: Conformance, q: Conformance) -> bool:
    """Fibre order: more related pairs / smaller distances is higher."""
    _require_same_fibre([p, q])
    if p.fibre.relational:
        assert p.rows is not None and q.rows is not None
        return all(r & ~s == 0 for r, s in zip(p.rows, q.rows))
    assert p.dist is not None and q.dist is not None
    n = len(p.carrier)
    return all(q.dist[i][j] <= p.dist[i][j] for i in range(n) for j in range(n))


def meet(values: Sequence[Conformance]) -> Conformance:
    """Greatest lower bound: intersection, or pointwise maximum of distances."""
    if not values:
        raise FibreError("meet of an empty family")
    carrier, fibre = _require_same_fibre(values)
    n = len(carrier)
    if fibre.relational:
        rows = [(1 << n) - 1] * n
        for p in values:
            assert p.rows is not None
            rows = [r & s for r, s in zip(rows, p.rows)]
        return Conformance.make(carrier, fibre, rows=rows, validate=False)
    dist = [[max(p.dist[i][j] for p in values) for j in range(n)] for i in range(n)]
    # pointwise sup of 1-bounded metrics keeps the triangle inequality
    _check_metric(fibre, dist, n)
    return Conformance.make(carrier, fibre, dist=dist, validate=False)


def join(values: Sequence[Conformance]) -> Conformance:
    """Least upper bound: relational closure of the union, or the
    triangle closure of the pointwise minimum of distances."""
    if not values:
        raise FibreError("join of an empty family")
    carrier, fibre = _require_same_fibre(values)
    n = len(carrier)
    if fibre.relational:
        rows = [0] * n
        for p in values:
            assert p.rows is not None
            rows = [r | s for r, s in zip(rows, p.rows)]
        if fibre.symmetric:
            rows = list(symmetric_closure_rows(rows))
        rows = transitive_closure_rows(rows)
        return Conformance.make(carrier, fibre, rows=rows, validate=False)
    dist = [[min(p.dist[i][j] for p in values) for j in range(n)] for i in range(n)]
    if fibre.symmetric:
        for i in range(n):
            for j in range(i):
                m = min(dist[i][j], dist[j][i])
                dist[i][j] = dist[j][i] = m
    return Conformance.make(carrier, fibre, dist=triangle_closure_matrix(dist), validate=False)


def reindex(f: CarrierMap, p: Conformance) -> Conformance:
    """Pull a conformance back along ``f``; the finest structure on the
    domain making ``f`` structure preserving."""
    if f.codomain != p.carrier:
        raise FibreError("reindex: map codomain differs from the carrier of the conformance")
    n = len(f.domain)
    if p.fibre.relational:
        assert p.rows is not None
        rows = []
        for i in range(n):
            row = 0
            src = p.rows[f(i)]
            for j in range(n):
                if src & (1 << f(j)):
                    row |= 1 << j
            rows.append(row)
        return Conformance.make(f.domain, p.fibre, rows=rows, validate=False)
    assert p.dist is not None
    dist = [[p.dist[f(i)][f(j)] for j in range(n)] for i in range(n)]
    return Conformance.make(f.domain, p.fibre, dist=dist, validate=False)


def pushforward(f: CarrierMap, p: Conformance) -> Conformance:
    """Push a conformance forward along ``f``; the coarsest structure on the
    codomain making ``f`` structure preserving.  Left adjoint to reindex."""
    if f.domain != p.carrier:
        raise FibreError("pushforward: map domain differs from the carrier of the conformance")
    n = len(f.codomain)
    m = len(f.domain)
    if p.fibre.relational:
        assert p.rows is not None
        rows = [1 << i for i in range(n)]
        for i in range(m):
            src = p.rows[i]
            for j in range(m):
                if src & (1 << j):
                    rows[f(i)] |= 1 << f(j)
        if p.fibre.symmetric:
            rows = list(symmetric_closure_rows(rows))
        rows = transitive_closure_rows(rows)
        return Conformance.make(f.codomain, p.fibre, rows=rows, validate=False)
    assert p.dist is not None
    dist = [[ONE] * n for _ in range(n)]
    for i in range(n):
        dist[i][i] = ZERO
    for i in range(m):
        for j in range(m):
            u, v = f(i), f(j)
            if p.dist[i][j] < dist[u][v]:
                dist[u][v] = p.dist[i][j]
    return Conformance.make(f.codomain, p.fibre, dist=triangle_closure_matrix(dist), validate=False)


# ---------------------------------------------------------------------------
# claims: the basic conformances the games are played on

@dataclass(frozen=True)
class Claim:
    """A single atomic assertion: a related pair, a bounded pair, or a
    nearness pair (the latter only in specialization-preorder fibres)."""

    kind: str  # "pair" | "bounded" | "nearness"
    lhs: str
    rhs: Optional[str] = None
    eps: Optional[Fraction] = None
    targets: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.kind == "pair":
            if self.rhs is None:
                raise ClaimError("pair claim needs two elements")
        elif self.kind == "bounded":
            if self.rhs is None or self.eps is None:
                raise ClaimError("bounded claim needs two elements and a bound")
            if not (ZERO <= self.eps <= ONE):
                raise ClaimError(f"claim bound {self.eps} outside [0,1]")
        elif self.kind == "nearness":
            if not self.targets:
                raise ClaimError("nearness claim needs a non-empty target set")
        else:
            raise ClaimError(f"unknown claim kind {self.kind!r}")

    @staticmethod
    def pair(lhs: str, rhs: str) -> "Claim":
        return Claim("pair", lhs, rhs)

    @staticmethod
    def bounded(lhs: str, rhs: str, eps: Fraction) -> "Claim":
        return Claim("bounded", lhs, rhs, eps=Fraction(eps))

    @staticmethod
    def nearness(lhs: str, targets: Iterable[str]) -> "Claim":
        return Claim("nearness", lhs, targets=tuple(targets))


def _claim_fibre_ok(claim: Claim, fibre: Fibre) -> None:
    if claim.kind == "pair" and not fibre.relational:
        raise ClaimError("pair claims live in relational fibres; use a bounded claim")
    if claim.kind == "bounded" and not fibre.metric:
        raise ClaimError("bounded claims live in metric fibres")
    if claim.kind == "nearness" and fibre is not Fibre.SPEC_PREORDER:
        raise ClaimError("nearness claims live in the specialization-preorder fibre")


def claim_to_conformance(claim: Claim, carrier: Carrier, fibre: Fibre, *, expand_nearness: bool = False) -> Conformance:
    """The conformance that is discrete except for the claimed pair.

    A nearness claim is an existential statement and is only expanded to the
    join of its single-target pairs when ``expand_nearness`` is set; the
    existential split itself is a game-level concern.
    """
    _claim_fibre_ok(claim, fibre)
    if claim.kind == "nearness":
        if not expand_nearness:
            raise ClaimError("nearness claims expand existentially; pass expand_nearness=True for the join upper bound")
        parts = [claim_to_conformance(Claim.pair(claim.lhs, t), carrier, fibre) for t in claim.targets]
        return join(parts)
    li = carrier.index(claim.lhs)
    ri = carrier.index(claim.rhs)
    n = len(carrier)
    if fibre.relational:
        rows = [1 << i for i in range(n)]
        rows[li] |= 1 << ri
        if fibre.symmetric:
            rows[ri] |= 1 << li
        return Conformance.make(carrier, fibre, rows=rows, validate=False)
    dist = [[ONE] * n for _ in range(n)]
    for i in range(n):
        dist[i][i] = ZERO
    dist[li][ri] = min(dist[li][ri], claim.eps)
    if fibre.symmetric:
        dist[ri][li] = dist[li][ri]
    return Conformance.make(carrier, fibre, dist=dist, validate=False)


def claim_holds(p: Conformance, claim: Claim) -> bool:
    """Membership test: does the conformance satisfy the claim?"""
    _claim_fibre_ok(claim, p.fibre)
    if claim.kind == "nearness":
        li = p.carrier.index(claim.lhs)
        return any(p.relates(li, p.carrier.index(t)) for t in claim.targets)
    li = p.carrier.index(claim.lhs)
    ri = p.carrier.index(claim.rhs)
    if claim.kind == "pair":
        return p.relates(li, ri)
    return p.distance(li, ri) <= claim.eps
