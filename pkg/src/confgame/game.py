"""The graded conformance game: admissibility, winning regions, value
tables, strategy extraction and interactive sessions.

Positions are basic claims over the determinized carrier.  In each round
Duplicator plays a set Z of claims whose generated refinement, lifted
through one transition step, must entail the current position; Spoiler then
challenges one claim from Z.  After the round budget is spent, the position
is checked against the depth-0 behaviour ("calling the bluff").  Winning
regions for the n-round game are computed by the canonical-move iteration
W_{k+1} = {pos : admissible(pos, W_k)}, justified by monotonicity of
admissibility in Z; the infinite game is the greatest fixpoint of the same
operator below the bluff-passing positions.  Quantitative instances are
solved by exact value tables instead of region enumeration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .conformance import Conformance, Fibre, triangle_closure_matrix
from .graded import (
    DetSystem,
    OneStep,
    _ready_distance,
    lift_compare,
    ptrace_step_distance,
)
from .ratio import ONE, ZERO, format_ratio
from .refinement import AlgebraDescriptor, algebra_for, close
from .transport import wasserstein as transport_solve

VALUE_ITERATION_CAP = 10000


class IncompleteCarrierError(RuntimeError):
    """The requested analysis needs the complete determinized carrier."""


class GameError(ValueError):
    pass


class IllegalMoveError(ValueError):
    """A malformed move; the position is unchanged."""


class OutOfTurnError(IllegalMoveError):
    """A move played out of turn or after the game ended."""


@dataclass(frozen=True)
class PointClaim:
    """A basic claim over determinized points: a pair, an eps-bounded pair,
    or a nearness pair (existential over its targets)."""

    lhs: int
    rhs: Optional[int] = None
    eps: Optional[Fraction] = None
    targets: Optional[tuple[int, ...]] = None

    @property
    def kind(self) -> str:
        if self.targets is not None:
            return "nearness"
        if self.eps is not None:
            return "bounded"
        return "pair"

    def pair(self) -> tuple[int, int]:
        assert self.rhs is not None
        return (self.lhs, self.rhs)


def pair_claim(lhs: int, rhs: int) -> PointClaim:
    return PointClaim(lhs, rhs)


def bounded_claim(lhs: int, rhs: int, eps: Fraction) -> PointClaim:
    eps = Fraction(eps)
    if not ZERO <= eps <= ONE:
        raise GameError(f"claim bound {eps} outside [0,1]")
    return PointClaim(lhs, rhs, eps=eps)


def nearness_claim(lhs: int, targets: Iterable[int]) -> PointClaim:
    targets = tuple(targets)
    if not targets:
        raise GameError("nearness claim needs at least one target")
    return PointClaim(lhs, targets=targets)


def check_claim(det: DetSystem, claim: PointClaim) -> None:
    n = len(det.points)
    ids = [claim.lhs] + ([claim.rhs] if claim.rhs is not None else []) + list(claim.targets or ())
    for i in ids:
        if not 0 <= i < n:
            raise GameError(f"claim mentions unknown point id {i}")
    if claim.kind == "nearness" and det.instance.fibre is not Fibre.SPEC_PREORDER:
        raise GameError("nearness claims only apply to specialization-preorder instances")
    if claim.kind == "bounded" and not det.instance.quantitative:
        raise GameError(f"{det.instance.name} positions are plain pairs, not bounded pairs")
    if claim.kind == "pair" and det.instance.quantitative:
        raise GameError(f"{det.instance.name} positions carry a bound; use a bounded pair")


# ---------------------------------------------------------------------------
# admissibility

def ground_from_claims(det: DetSystem, claims: Sequence[PointClaim]) -> Conformance:
    """close(algebra, join of the claim conformances)."""
    n = len(det.points)
    fibre = det.instance.fibre
    carrier = det.point_carrier()
    if fibre.relational:
        rows = [1 << i for i in range(n)]
        for c in claims:
            if c.kind != "pair":
                raise GameError("moves consist of basic pair claims")
            rows[c.lhs] |= 1 << c.rhs
            if fibre.symmetric:
                rows[c.rhs] |= 1 << c.lhs
        q = Conformance.make(carrier, fibre, rows=rows, validate=False)
    else:
        dist = [[ONE] * n for _ in range(n)]
        for i in range(n):
            dist[i][i] = ZERO
        for c in claims:
            if c.kind != "bounded":
                raise GameError("moves consist of basic bounded claims")
            if c.eps < dist[c.lhs][c.rhs]:
                dist[c.lhs][c.rhs] = c.eps
            if fibre.symmetric and c.eps < dist[c.rhs][c.lhs]:
                dist[c.rhs][c.lhs] = c.eps
        q = Conformance.make(carrier, fibre, dist=dist, validate=False)
    return close(algebra_for(det), q)


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str
    distance: Optional[Fraction] = None
    failing_label: Optional[str] = None


def admissible(det: DetSystem, pos: PointClaim, claims: Sequence[PointClaim]) -> bool:
    return admissible_verdict(det, pos, claims).ok


def admissible_verdict(det: DetSystem, pos: PointClaim, claims: Sequence[PointClaim]) -> Verdict:
    """Check one Duplicator move: lift the closed ground of the claims
    through one step and compare against the position."""
    check_claim(det, pos)
    if pos.kind == "nearness":
        raise GameError("resolve the nearness position to a witness pair first")
    for c in claims:
        check_claim(det, c)
    ground = ground_from_claims(det, claims)
    return _verdict_over_ground(det, pos, ground)


def _verdict_over_ground(det: DetSystem, pos: PointClaim, ground: Conformance) -> Verdict:
    s1 = det.step(pos.lhs)
    s2 = det.step(pos.rhs)
    outcome = lift_compare(det, s1, s2, ground)
    if det.instance.quantitative:
        ok = outcome <= pos.eps
        reason = (
            f"one-step distance {format_ratio(outcome)} "
            f"{'<=' if ok else '>'} bound {format_ratio(pos.eps)}"
        )
        return Verdict(ok, reason, distance=outcome)
    if outcome:
        return Verdict(True, "one-step comparison holds under the claimed ground")
    label = _failing_label(det, s1, s2, ground)
    return Verdict(False, _failure_reason(det, s1, s2, label), failing_label=label)


def _failing_label(det: DetSystem, s1: OneStep, s2: OneStep, ground: Conformance) -> Optional[str]:
    name = det.instance.name
    if name in ("trace-inclusion", "btop-dfa", "btop-nfa"):
        if name != "trace-inclusion" and s1.accept and not s2.accept:
            return None  # acceptance bit, not a label
        for l, (a, b) in enumerate(zip(s1.succ, s2.succ)):
            if not ground.relates(a, b):
                return det.model.labels[l]
    return None


def _failure_reason(det: DetSystem, s1: OneStep, s2: OneStep, label: Optional[str]) -> str:
    if label is None and det.instance.name in ("btop-dfa", "btop-nfa"):
        return "left side accepts the empty word, right side does not"
    if label is None:
        return "one-step comparison fails under the claimed ground"
    return f"successors under label {label!r} are not related by the claimed ground"


def bluff_check(det: DetSystem, pos: PointClaim) -> bool:
    """Does the position hold in the depth-0 behaviour object?"""
    check_claim(det, pos)
    if det.instance.name == "trace-inclusion":
        empty = det.empty_point
        if empty is None:
            return True
        if pos.kind == "nearness":
            return not (pos.lhs != empty and all(t == empty for t in pos.targets))
        return not (pos.lhs != empty and pos.rhs == empty)
    # every other built-in instance has a singleton depth-0 behaviour object
    return True


# ---------------------------------------------------------------------------
# reports

INFINITE = None  # round budget sentinel


@dataclass
class GameReport:
    """Solved game: per-level regions or value tables plus statistics.

    For an n-round report, ``levels[k]`` is the winning region of the
    k-round game; for the infinite game ``levels`` holds the decreasing
    fixpoint iterates ending in the winning region.  Quantitative reports
    carry ``tables[k]``: exact values of the k-round game.
    """

    det: DetSystem
    rounds: Optional[int]
    levels: Optional[tuple[frozenset[tuple[int, int]], ...]] = None
    tables: Optional[tuple[dict[tuple[int, int], Fraction], ...]] = None
    stats: dict = field(default_factory=dict)

    @property
    def quantitative(self) -> bool:
        return self.tables is not None

    @property
    def region(self) -> frozenset[tuple[int, int]]:
        assert self.levels is not None
        return self.levels[-1]

    def region_at(self, rounds_left: Optional[int]) -> frozenset[tuple[int, int]]:
        assert self.levels is not None
        if self.rounds is INFINITE or rounds_left is None:
            return self.levels[-1]
        return self.levels[min(rounds_left, len(self.levels) - 1)]

    def value(self, lhs: int, rhs: int, rounds_left: Optional[int] = None) -> Fraction:
        assert self.tables is not None
        if lhs == rhs:
            return ZERO
        if self.rounds is INFINITE or rounds_left is None:
            table = self.tables[-1]
        else:
            table = self.tables[min(rounds_left, len(self.tables) - 1)]
        key = self._normalize_pair(lhs, rhs)
        if key not in table:
            raise IncompleteCarrierError(
                f"no value computed for pair {self.det.point_name(lhs)!r}, "
                f"{self.det.point_name(rhs)!r}; increase the closure depth"
            )
        return table[key]

    def _normalize_pair(self, lhs: int, rhs: int) -> tuple[int, int]:
        if self.det.instance.fibre.symmetric:
            return (min(lhs, rhs), max(lhs, rhs))
        return (lhs, rhs)

    def wins(self, pos: PointClaim, rounds_left: Optional[int] = None) -> bool:
        """Does Duplicator win this position (with the given budget)?"""
        check_claim(self.det, pos)
        if pos.kind == "nearness":
            return any(
                self.wins(pair_claim(pos.lhs, t), rounds_left) for t in pos.targets
            )
        if pos.lhs == pos.rhs:
            return True
        if self.quantitative:
            return self.value(pos.lhs, pos.rhs, rounds_left) <= pos.eps
        pair = self._region_pair(pos)
        return pair in self.region_at(rounds_left)

    def _region_pair(self, pos: PointClaim) -> tuple[int, int]:
        if self.det.instance.fibre.symmetric:
            return (min(pos.lhs, pos.rhs), max(pos.lhs, pos.rhs))
        return (pos.lhs, pos.rhs)

    # -- strategies ---------------------------------------------------------

    def duplicator_move(self, pos: PointClaim, rounds_left: Optional[int]) -> Optional[list[PointClaim]]:
        """Canonical winning move at a winning position, else None."""
        if not self.wins(pos, rounds_left):
            return None
        nxt = None if rounds_left is None else rounds_left - 1
        if self.quantitative:
            assert self.tables is not None
            table = self.tables[-1] if nxt is None else self.tables[min(nxt, len(self.tables) - 1)]
            return [bounded_claim(a, b, v) for (a, b), v in sorted(table.items()) if a != b]
        region = self.region_at(nxt)
        claims = [pair_claim(a, b) for (a, b) in sorted(region)]
        if not claims:
            # a winning position is itself winnable one level down
            claims = [pair_claim(*self._region_pair(pos))]
        return claims

    def spoiler_pick(self, claims: Sequence[PointClaim], rounds_left: Optional[int]) -> Optional[PointClaim]:
        """A claim in Z that is not winnable with one round less, else None."""
        nxt = None if rounds_left is None else rounds_left - 1
        for c in claims:
            if c.kind == "nearness":
                continue
            if not self.wins(c, nxt):
                return c
        return None

    def distinguishing_word(self, pos: PointClaim) -> Optional[tuple[str, ...]]:
        """For a losing position of a relational instance: a word witnessing
        the failure, read off the Spoiler strategy."""
        if self.quantitative:
            raise GameError("distinguishing words apply to relational instances")
        if pos.kind == "nearness":
            words = [self.distinguishing_word(pair_claim(pos.lhs, t)) for t in pos.targets]
            if any(w is None for w in words):
                return None
            return max(words, key=len)
        if self.wins(pos):
            return None
        assert self.levels is not None
        det = self.det
        if det.instance.name not in ("trace-inclusion", "btop-dfa", "btop-nfa"):
            raise GameError("distinguishing words apply to trace and automata instances")

        def first_drop(pair: tuple[int, int]) -> int:
            for level, region in enumerate(self.levels):
                if pair not in region:
                    return level
            raise GameError("position is winning; no distinguishing word")

        def walk(pair: tuple[int, int]) -> tuple[str, ...]:
            level = first_drop(pair)
            if level == 0:
                # depth-0 refutation: empty word (aliveness or acceptance)
                return ()
            s1, s2 = det.step(pair[0]), det.step(pair[1])
            if det.instance.name in ("btop-dfa", "btop-nfa") and s1.accept and not s2.accept:
                return ()
            ground = ground_from_claims(
                det, [pair_claim(a, b) for (a, b) in self.levels[level - 1]]
            )
            for l, (a, b) in enumerate(zip(s1.succ, s2.succ)):
                if not ground.relates(a, b):
                    return (det.model.labels[l],) + walk((a, b))
            raise GameError("inconsistent report: no failing label at a lost position")

        return walk(self._region_pair(pos))

    def to_summary(self) -> dict:
        out = {
            "semantics": self.det.instance.name,
            "rounds": "inf" if self.rounds is INFINITE else self.rounds,
            "points": len(self.det.points),
        }
        out.update(self.stats)
        if self.levels is not None:
            out["winning"] = len(self.region)
        if self.tables is not None:
            out["pairs"] = len(self.tables[-1])
        return out


# ---------------------------------------------------------------------------
# qualitative solving

def _positions(det: DetSystem) -> list[tuple[int, int]]:
    n = len(det.points)
    if det.instance.fibre.symmetric:
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    return [(i, j) for i in range(n) for j in range(n) if i != j]


def _require_qualitative(det: DetSystem) -> None:
    if det.instance.quantitative:
        raise GameError(
            f"{det.instance.name} is quantitative; use value_table instead of region solving"
        )


def _solvable(det: DetSystem) -> None:
    if det.closure_depth is not None:
        raise IncompleteCarrierError(
            "the determinization was depth limited; region solving needs full steps"
        )


def winning_region_n(det: DetSystem, n: int) -> GameReport:
    """Winning regions of the 0..n round games via the canonical move."""
    _require_qualitative(det)
    _solvable(det)
    if n < 0:
        raise GameError("round count must be non-negative")
    positions = _positions(det)
    level = frozenset(p for p in positions if bluff_check(det, pair_claim(*p)))
    levels = [level]
    closure_sizes = []
    for _ in range(n):
        ground = ground_from_claims(det, [pair_claim(a, b) for (a, b) in levels[-1]])
        closure_sizes.append(_conformance_size(ground))
        level = frozenset(
            p for p in positions if _verdict_over_ground(det, pair_claim(*p), ground).ok
        )
        levels.append(level)
    return GameReport(
        det,
        n,
        levels=tuple(levels),
        stats={"positions": len(positions), "closure_sizes": closure_sizes},
    )


def winning_region_inf(det: DetSystem) -> GameReport:
    """Greatest fixpoint of the admissibility operator below the
    bluff-passing positions."""
    _require_qualitative(det)
    _solvable(det)
    if not det.complete:
        raise IncompleteCarrierError(
            "infinite-round solving needs the complete determinized carrier"
        )
    positions = _positions(det)
    current = frozenset(p for p in positions if bluff_check(det, pair_claim(*p)))
    iterates = [current]
    closure_sizes = []
    while True:
        ground = ground_from_claims(det, [pair_claim(a, b) for (a, b) in current])
        closure_sizes.append(_conformance_size(ground))
        nxt = frozenset(
            p for p in current if _verdict_over_ground(det, pair_claim(*p), ground).ok
        )
        if nxt == current:
            break
        current = nxt
        iterates.append(current)
    return GameReport(
        det,
        INFINITE,
        levels=tuple(iterates),
        stats={"positions": len(positions), "closure_sizes": closure_sizes,
               "iterations": len(iterates)},
    )


def _conformance_size(ground: Conformance) -> int:
    if ground.rows is not None:
        return sum(bin(r).count("1") for r in ground.rows)
    return sum(1 for row in ground.dist for v in row if v < ONE)


# ---------------------------------------------------------------------------
# exhaustive-move solving (test oracle; tiny position spaces only)

def winning_region_n_exhaustive(det: DetSystem, n: int, max_positions: int = 8) -> GameReport:
    positions = _positions(det)
    if len(positions) > max_positions:
        raise GameError(
            f"exhaustive search over {len(positions)} positions exceeds the bound {max_positions}"
        )
    basis = [pair_claim(a, b) for (a, b) in positions]
    level = frozenset(p for p in positions if bluff_check(det, pair_claim(*p)))
    levels = [level]
    for _ in range(n):
        prev = levels[-1]
        nxt = set()
        for p in positions:
            if _exhaustive_winning_move(det, pair_claim(*p), basis, prev):
                nxt.add(p)
        levels.append(frozenset(nxt))
    return GameReport(det, n, levels=tuple(levels), stats={"mode": "exhaustive"})


def winning_region_inf_exhaustive(det: DetSystem, max_positions: int = 8) -> GameReport:
    positions = _positions(det)
    if len(positions) > max_positions:
        raise GameError(
            f"exhaustive search over {len(positions)} positions exceeds the bound {max_positions}"
        )
    basis = [pair_claim(a, b) for (a, b) in positions]
    current = frozenset(p for p in positions if bluff_check(det, pair_claim(*p)))
    while True:
        nxt = frozenset(
            p
            for p in current
            if _exhaustive_winning_move(det, pair_claim(*p), basis, current)
        )
        if nxt == current:
            return GameReport(det, INFINITE, levels=(current,), stats={"mode": "exhaustive"})
        current = nxt


def _exhaustive_winning_move(det, pos, basis, winnable) -> bool:
    for r in range(1, len(basis) + 1):
        for z in itertools.combinations(basis, r):
            if all(c.pair() in winnable for c in z) and admissible(det, pos, list(z)):
                return True
    return False


# ---------------------------------------------------------------------------
# quantitative solving

def _ground_from_table(det: DetSystem, table: dict[tuple[int, int], Fraction]) -> Conformance:
    """The value table as a conformance, after triangle (and symmetry)
    closure; on exact tables the closure is the identity."""
    n = len(det.points)
    fibre = det.instance.fibre
    dist = [[ONE] * n for _ in range(n)]
    for i in range(n):
        dist[i][i] = ZERO
    for (a, b), v in table.items():
        dist[a][b] = v
        if fibre.symmetric:
            dist[b][a] = v
    closed = triangle_closure_matrix(dist)
    return Conformance.make(det.point_carrier(), fibre, dist=closed, validate=False)


def _step_value(det: DetSystem, a: int, b: int, lookup) -> Fraction:
    """One application of the lifted comparison with a callable ground."""
    s1, s2 = det.step(a), det.step(b)
    name = det.instance.name
    if name == "ptrace":
        return ptrace_step_distance(det, s1, s2, lookup).value
    metric = det.model.label_metric
    worst = ZERO
    for (l1, u) in s1.branches:
        best = ONE
        for (l2, v) in s2.branches:
            d = max(metric[l1][l2], lookup(u, v))
            if d < best:
                best = d
        if best > worst:
            worst = best
    if name == "qrsim" and s1.branches:
        worst = max(worst, _ready_distance(s1.ready, s2.ready, metric))
    return worst


def value_table(
    det: DetSystem,
    depth: Optional[int],
    roots: Optional[Sequence[tuple[int, int]]] = None,
) -> GameReport:
    """Exact value tables v_0 .. v_depth (or the infinite-game fixpoint).

    For the simulation distances each level applies the lifted one-step
    comparison over the previous table.  For probabilistic traces the
    per-pair scalar recursion is not exact (the convex recombination that
    makes the stepwise and flat readings agree may pass through mixture
    points outside the reachable carrier), so levels are evaluated stepwise
    through the determinization and compared by an exact transport solve
    over the discrete ground; the result coincides with the total variation
    of the depth-n trace distributions.

    With a fully closed carrier the tables cover every point pair; on a
    depth-limited determinization the evaluation is demand driven from the
    root pairs (the unit image by default).
    """
    if not det.instance.quantitative:
        raise GameError(f"{det.instance.name} is qualitative; use winning regions")
    sym = det.instance.fibre.symmetric
    n = len(det.points)

    if depth is None:
        report = _claim_value_iteration(det)
        return report

    if depth < 0:
        raise GameError("depth must be non-negative")
    if det.closure_depth is not None and depth > det.closure_depth:
        raise IncompleteCarrierError(
            f"requested depth {depth} exceeds the closure depth {det.closure_depth}"
        )

    needed = _needed_pairs(det, depth, roots, sym)
    if det.instance.name == "ptrace":
        tables = _ptrace_stepwise_tables(det, depth, needed)
    else:
        tables = _scalar_tables(det, depth, needed, sym)
    return GameReport(
        det,
        depth,
        tables=tuple(tables),
        stats={"pairs": len(needed[0]), "expanded_pairs": sum(len(s) for s in needed)},
    )


def _needed_pairs(det, depth, roots, sym):
    n = len(det.points)
    if roots is None:
        if det.complete and det.closure_depth is None:
            roots = [(i, j) for i in range(n) for j in range(i + 1 if sym else 0, n) if i != j]
        else:
            units = sorted(set(det.unit))
            roots = [(a, b) for a in units for b in units if a != b and (not sym or a < b)]
    needed: list[set[tuple[int, int]]] = [set(roots)]
    for _ in range(depth):
        nxt: set[tuple[int, int]] = set()
        for (a, b) in needed[-1]:
            nxt.update(_successor_pairs(det, a, b, sym))
        needed.append(nxt)
    return needed


def _scalar_tables(det, depth, needed, sym):
    tables: list[dict[tuple[int, int], Fraction]] = [
        {p: ZERO for p in needed[depth]}
    ]
    for k in range(1, depth + 1):
        prev = tables[-1]

        def lookup(u, v, prev=prev):
            if u == v:
                return ZERO
            key = (min(u, v), max(u, v)) if sym else (u, v)
            return prev[key]

        tables.append(
            {p: _step_value(det, p[0], p[1], lookup) for p in needed[depth - k]}
        )
    return tables


def _ptrace_stepwise_tables(det, depth, needed):
    from .graded import det_trace_distribution

    dist_memo: dict[tuple[int, int], dict] = {}

    def words(point: int, k: int):
        key = (point, k)
        if key not in dist_memo:
            dist_memo[key] = det_trace_distribution(det, point, k)
        return dist_memo[key]

    tables = []
    for k in range(depth + 1):
        level = {}
        for (a, b) in needed[depth - k]:
            level[(a, b)] = _word_distribution_distance(words(a, k), words(b, k))
        tables.append(level)
    return tables


def _word_distribution_distance(d1: dict, d2: dict) -> Fraction:
    """Total variation between same-length word distributions, solved as an
    exact optimal transport over the discrete ground (with certificate)."""
    if d1 == d2:
        return ZERO
    items1 = sorted(d1)
    items2 = sorted(d2)
    cost = [[ZERO if w1 == w2 else ONE for w2 in items2] for w1 in items1]
    result = transport_solve([d1[w] for w in items1], [d2[w] for w in items2], cost)
    return result.value


def claim_value_table(det: DetSystem, depth: Optional[int]) -> GameReport:
    """Per-level values of the playable claim game: each level applies the
    lifted one-step comparison (on canonical one-step forms) over the
    previous level as ground.  For the simulation instances this coincides
    with value_table; for probabilistic traces it is the value of the game
    restricted to carrier claims, used to drive interactive sessions."""
    if not det.instance.quantitative:
        raise GameError(f"{det.instance.name} is qualitative; use winning regions")
    if not (det.complete and det.closure_depth is None):
        raise IncompleteCarrierError("claim values need the complete determinized carrier")
    if depth is None:
        return _claim_value_iteration(det)
    sym = det.instance.fibre.symmetric
    n = len(det.points)
    pairs = [(i, j) for i in range(n) for j in range(i + 1 if sym else 0, n) if i != j]
    tables = [{p: ZERO for p in pairs}]
    for _ in range(depth):
        ground = _ground_from_table(det, tables[-1])
        tables.append({(a, b): _step_value(det, a, b, ground.distance) for (a, b) in pairs})
    return GameReport(det, depth, tables=tuple(tables), stats={"pairs": len(pairs)})


def _claim_value_iteration(det: DetSystem) -> GameReport:
    if not det.complete or det.closure_depth is not None:
        raise IncompleteCarrierError(
            "infinite-depth values need the complete determinized carrier"
        )
    sym = det.instance.fibre.symmetric
    n = len(det.points)
    pairs = [(i, j) for i in range(n) for j in range(i + 1 if sym else 0, n) if i != j]
    table = {p: ZERO for p in pairs}
    iterations = 0
    for _ in range(VALUE_ITERATION_CAP):
        iterations += 1
        ground = _ground_from_table(det, table)
        nxt = {(a, b): _step_value(det, a, b, ground.distance) for (a, b) in pairs}
        if nxt == table:
            return GameReport(
                det,
                INFINITE,
                tables=(dict(table),),
                stats={"iterations": iterations, "pairs": len(pairs)},
            )
        table = nxt
    raise IncompleteCarrierError(
        f"value iteration did not stabilize within {VALUE_ITERATION_CAP} rounds; "
        "the fixpoint is not reachable in finitely many exact steps"
    )


def _successor_pairs(det: DetSystem, a: int, b: int, sym: bool):
    s1, s2 = det.step(a), det.step(b)
    out = set()
    if det.instance.name == "ptrace":
        per1 = {l: pt for (l, _, pt) in s1.masses}
        per2 = {l: pt for (l, _, pt) in s2.masses}
        for l in set(per1) & set(per2):
            u, v = per1[l], per2[l]
            if u != v:
                out.add((min(u, v), max(u, v)) if sym else (u, v))
        return out
    for (_, u) in s1.branches:
        for (_, v) in s2.branches:
            if u != v:
                out.add((min(u, v), max(u, v)) if sym else (u, v))
    return out


# ---------------------------------------------------------------------------
# interactive sessions

@dataclass(frozen=True)
class Move:
    kind: str  # "claims" | "pick" | "witness" | "concede"
    claims: tuple[PointClaim, ...] = ()
    claim: Optional[PointClaim] = None
    target: Optional[int] = None


@dataclass
class SessionState:
    det: DetSystem
    human_role: str
    rounds: Optional[int]
    report: GameReport
    position: PointClaim
    rounds_left: Optional[int]
    phase: str  # "witness" | "duplicator" | "spoiler" | "done"
    pending: Optional[tuple[PointClaim, ...]]
    status: str  # "ongoing" | "duplicatorWins" | "spoilerWins"
    history: list = field(default_factory=list)
    explanation: Optional[str] = None

    @property
    def engine_role(self) -> str:
        return "duplicator" if self.human_role == "spoiler" else "spoiler"

    def human_turn(self) -> bool:
        if self.status != "ongoing":
            return False
        if self.phase == "witness" or self.phase == "duplicator":
            return self.human_role == "duplicator"
        if self.phase == "spoiler":
            return self.human_role == "spoiler"
        return False

    def _log(self, actor: str, event: str, **data) -> None:
        self.history.append({"actor": actor, "event": event, **data})


def session_new(
    det: DetSystem,
    position: PointClaim,
    human_role: str,
    rounds: Optional[int],
) -> SessionState:
    """Start a session at the given position; the engine plays the other
    role optimally from precomputed regions or value tables."""
    if human_role not in ("spoiler", "duplicator"):
        raise GameError(f"unknown role {human_role!r}")
    check_claim(det, position)
    if det.instance.quantitative:
        # sessions run on the playable claim game so that the engine's own
        # moves always pass its own admissibility check
        report = claim_value_table(det, rounds)
    else:
        report = winning_region_inf(det) if rounds is INFINITE else winning_region_n(det, rounds)
    state = SessionState(
        det=det,
        human_role=human_role,
        rounds=rounds,
        report=report,
        position=position,
        rounds_left=rounds,
        phase="witness" if position.kind == "nearness" else "duplicator",
        pending=None,
        status="ongoing",
    )
    state._log("game", "start", position=position, rounds=rounds)
    _settle_position(state)
    _engine_steps(state)
    return state


def _settle_position(state: SessionState) -> None:
    """Decide positions that need no play: reflexive claims are won, and in
    the infinite game a bluff-failing position is already refuted at depth 0."""
    pos = state.position
    if state.status != "ongoing" or pos.kind == "nearness":
        return
    if pos.lhs == pos.rhs:
        state.status = "duplicatorWins"
        state.phase = "done"
        state.explanation = "reflexive position"
        return
    if state.rounds_left is INFINITE and not bluff_check(state.det, pos):
        state.status = "spoilerWins"
        state.phase = "done"
        state.explanation = "position already fails the depth-0 comparison"
        return
    if state.rounds_left == 0:
        _call_bluff(state)


def _call_bluff(state: SessionState) -> None:
    ok = bluff_check(state.det, state.position)
    state.status = "duplicatorWins" if ok else "spoilerWins"
    state.phase = "done"
    state.explanation = (
        "bluff called: position holds at depth 0"
        if ok
        else "bluff called: position fails at depth 0"
    )
    state._log("game", "bluff", passed=ok)


def _engine_steps(state: SessionState) -> None:
    while state.status == "ongoing" and not state.human_turn():
        if state.phase == "witness":
            _engine_witness(state)
        elif state.phase == "duplicator":
            _engine_duplicator(state)
        elif state.phase == "spoiler":
            _engine_spoiler(state)
        else:
            break


def _engine_witness(state: SessionState) -> None:
    pos = state.position
    winner = next(
        (t for t in pos.targets if state.report.wins(pair_claim(pos.lhs, t), state.rounds_left)),
        pos.targets[0],
    )
    state.position = pair_claim(pos.lhs, winner)
    state.phase = "duplicator"
    state._log("engine", "witness", target=winner)
    _settle_position(state)


def _engine_duplicator(state: SessionState) -> None:
    move = state.report.duplicator_move(state.position, state.rounds_left)
    if move is None:
        state.status = "spoilerWins"
        state.phase = "done"
        state.explanation = "engine Duplicator concedes: no winning move"
        state._log("engine", "concede")
        return
    state.pending = tuple(move)
    state.phase = "spoiler"
    state._log("engine", "claims", count=len(move))


def _engine_spoiler(state: SessionState) -> None:
    pick = state.report.spoiler_pick(state.pending, state.rounds_left)
    if pick is None:
        state.status = "duplicatorWins"
        state.phase = "done"
        state.explanation = "engine Spoiler concedes: every claim is winning"
        state._log("engine", "concede")
        return
    state._log("engine", "pick", claim=pick)
    _advance_after_pick(state, pick)


def _advance_after_pick(state: SessionState, pick: PointClaim) -> None:
    state.position = pick
    state.pending = None
    state.phase = "duplicator"
    if state.rounds_left is not INFINITE:
        state.rounds_left -= 1
    _settle_position(state)


def session_move(state: SessionState, move: Move) -> SessionState:
    """Apply one human move; the engine then replies per its strategy."""
    if state.status != "ongoing":
        raise OutOfTurnError("the game is over")
    if not state.human_turn():
        raise OutOfTurnError("not your turn")
    if move.kind == "concede":
        state.status = "spoilerWins" if state.human_role == "duplicator" else "duplicatorWins"
        state.phase = "done"
        state.explanation = f"{state.human_role} concedes"
        state._log("human", "concede")
        return state
    if state.phase == "witness":
        if move.kind != "witness" or move.target is None:
            raise IllegalMoveError("choose a witness target for the nearness position")
        if move.target not in (state.position.targets or ()):
            raise IllegalMoveError("witness must be one of the nearness targets")
        state.position = pair_claim(state.position.lhs, move.target)
        state.phase = "duplicator"
        state._log("human", "witness", target=move.target)
        _settle_position(state)
        _engine_steps(state)
        return state
    if state.phase == "duplicator":
        if move.kind != "claims":
            raise IllegalMoveError("Duplicator plays a set of claims")
        if not move.claims:
            raise IllegalMoveError("a Duplicator move is a non-empty set of claims")
        for c in move.claims:
            try:
                check_claim(state.det, c)
            except GameError as exc:
                raise IllegalMoveError(str(exc)) from None
            if c.kind == "nearness":
                raise IllegalMoveError("moves consist of basic pair claims, not nearness claims")
        verdict = admissible_verdict(state.det, state.position, list(move.claims))
        state._log("human", "claims", count=len(move.claims), admissible=verdict.ok)
        if not verdict.ok:
            state.status = "spoilerWins"
            state.phase = "done"
            state.explanation = f"inadmissible move: {verdict.reason}"
            return state
        state.pending = tuple(move.claims)
        state.phase = "spoiler"
        _engine_steps(state)
        return state
    if state.phase == "spoiler":
        if move.kind != "pick" or move.claim is None:
            raise IllegalMoveError("Spoiler picks one claim from the pending move")
        if move.claim not in (state.pending or ()):
            raise IllegalMoveError("the picked claim is not part of the pending move")
        state._log("human", "pick", claim=move.claim)
        _advance_after_pick(state, move.claim)
        _engine_steps(state)
        return state
    raise IllegalMoveError(f"no move possible in phase {state.phase!r}")
