"""Independent brute-force semantics used as ground truth.

Everything here is computed by direct enumeration or classical fixpoint
constructions on the base model, deliberately without touching the lifted
one-step comparison, the refinement closure or the game solvers.  The only
exception is ``theorem_check``, which exists precisely to compare the game
module's output against these semantics, position by position.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

from .coalgebra import Distribution, Model, successors
from .ratio import ONE, ZERO, format_ratio

Word = tuple[int, ...]


def traces_n(model: Model, states: Iterable[int], n: int) -> frozenset[Word]:
    """Length-n trace set of a state set, by exhaustive path enumeration."""
    if n < 0:
        raise ValueError("trace depth must be non-negative")
    memo: dict[tuple[int, int], frozenset[Word]] = {}

    def of(x: int, k: int) -> frozenset[Word]:
        if k == 0:
            return frozenset([()])
        key = (x, k)
        if key not in memo:
            out = set()
            for (l, y) in successors(model, x):
                for w in of(y, k - 1):
                    out.add((l,) + w)
            memo[key] = frozenset(out)
        return memo[key]

    result: set[Word] = set()
    for x in states:
        result |= of(x, n)
    return frozenset(result)


def accepted_words_upto(model: Model, states: Iterable[int], n: int) -> frozenset[Word]:
    """Words of length < n accepted from a state set (nfa/dfa acceptance,
    existential over members)."""
    assert model.accepting is not None
    out: set[Word] = set()
    frontier: dict[Word, frozenset[int]] = {(): frozenset(states)}
    for depth in range(n):
        nxt: dict[Word, frozenset[int]] = {}
        for word, current in frontier.items():
            if any(x in model.accepting for x in current):
                out.add(word)
            if depth + 1 < n:
                for l in range(len(model.labels)):
                    nxt[word + (l,)] = _image(model, current, l)
        frontier = nxt
    return frozenset(out)


def _image(model: Model, states: frozenset[int], label: int) -> frozenset[int]:
    if model.kind == "dfa":
        assert model.next_table is not None
        return frozenset(model.next_table[x][label] for x in states)
    return frozenset(t.dst for t in model.transitions if t.label == label and t.src in states)


def language_inclusion(model: Model, lhs: Iterable[int], rhs: Iterable[int]) -> bool:
    """Product subset construction.

    For automata the refutation is a reachable pair whose left component
    accepts while the right does not; for plain transition systems it is a
    pair whose left component is alive (non-empty) while the right is dead.
    """
    acceptance = model.kind in ("nfa", "dfa")
    start = (frozenset(lhs), frozenset(rhs))
    seen = {start}
    stack = [start]
    while stack:
        a, b = stack.pop()
        if acceptance:
            assert model.accepting is not None
            if any(x in model.accepting for x in a) and not any(x in model.accepting for x in b):
                return False
        else:
            if a and not b:
                return False
        if not a:
            continue  # the left side can never come alive again
        for l in range(len(model.labels)):
            nxt = (_image(model, a, l), _image(model, b, l))
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return True


# ---------------------------------------------------------------------------
# probabilistic traces

def trace_distribution(model: Model, mu: Distribution, n: int) -> dict[Word, Fraction]:
    """Distribution over length-n words, by path-probability accumulation."""
    if model.kind != "lmc":
        raise ValueError("trace distributions require a labelled Markov chain")
    acc: dict[tuple[Word, int], Fraction] = {((), y): w for y, w in mu.weights}
    for _ in range(n):
        nxt: dict[tuple[Word, int], Fraction] = {}
        for (word, y), mass in acc.items():
            for (l, z), p in successors(model, y):
                key = (word + (l,), z)
                nxt[key] = nxt.get(key, ZERO) + mass * p
        acc = nxt
    out: dict[Word, Fraction] = {}
    for (word, _), mass in acc.items():
        out[word] = out.get(word, ZERO) + mass
    return out


def total_variation(d1: dict[Word, Fraction], d2: dict[Word, Fraction]) -> Fraction:
    lengths = {len(w) for w in d1} | {len(w) for w in d2}
    if len(lengths) > 1:
        raise ValueError("total variation compares same-length word distributions")
    total = ZERO
    for w in set(d1) | set(d2):
        total += abs(d1.get(w, ZERO) - d2.get(w, ZERO))
    return total / 2


# ---------------------------------------------------------------------------
# bisimilarity by partition refinement

def bisimilarity(model: Model, rounds: Optional[int] = None):
    """Partition refinement; stops after ``rounds`` refinements when given,
    else at the fixpoint."""
    n = len(model.states)
    block = [0] * n
    step = 0
    while rounds is None or step < rounds:
        signatures = {}
        new_block = []
        for x in range(n):
            sig = frozenset((l, block[y]) for (l, y) in successors(model, x))
            if sig not in signatures:
                signatures[sig] = len(signatures)
            new_block.append(signatures[sig])
        # stable renaming: refine the old blocks by the signatures
        combined = {}
        refined = []
        for x in range(n):
            key = (block[x], new_block[x])
            if key not in combined:
                combined[key] = len(combined)
            refined.append(combined[key])
        step += 1
        if refined == block:
            break
        block = refined
    blocks: dict[int, list[str]] = {}
    for x in range(n):
        blocks.setdefault(block[x], []).append(model.state_name(x))
    return tuple(frozenset(b) for _, b in sorted(blocks.items()))


def same_block(partition, a: str, b: str) -> bool:
    return any(a in blk and b in blk for blk in partition)


# ---------------------------------------------------------------------------
# quantitative simulation distances (independent recursion)

def simulation_values(model: Model, mode: str = "plain", depth: Optional[int] = None):
    """Asymmetric Hausdorff value recursion on the base states.

    v_0 = 0;  v_{k+1}(x, y) = sup over moves of x of the inf over moves of y
    of the larger of the label distance and the successor value; ready mode
    additionally takes the symmetric Hausdorff distance of the enabled label
    sets.  The infinite version iterates to the fixpoint, which is reached
    because all values are drawn from the finite set of label distances.
    """
    if model.kind != "mlts":
        raise ValueError("simulation distances require a metric LTS")
    if mode not in ("plain", "ready"):
        raise ValueError(f"unknown mode {mode!r}")
    metric = model.label_metric
    assert metric is not None
    n = len(model.states)
    succ = [sorted(successors(model, x)) for x in range(n)]
    ready = [frozenset(l for (l, _) in succ[x]) for x in range(n)]

    def ready_gap(x: int, y: int) -> Fraction:
        worst = ZERO
        for r, s in ((ready[x], ready[y]), (ready[y], ready[x])):
            for a in r:
                best = ONE
                for b in s:
                    if metric[a][b] < best:
                        best = metric[a][b]
                if best > worst:
                    worst = best
        return worst

    values = {(x, y): ZERO for x in range(n) for y in range(n)}

    def iterate(v):
        out = {}
        for x in range(n):
            for y in range(n):
                worst = ZERO
                for (a, u) in succ[x]:
                    best = ONE
                    for (b, w) in succ[y]:
                        d = max(metric[a][b], v[(u, w)])
                        if d < best:
                            best = d
                    if best > worst:
                        worst = best
                if mode == "ready" and succ[x]:
                    worst = max(worst, ready_gap(x, y))
                out[(x, y)] = worst
        return out

    if depth is not None:
        for _ in range(depth):
            values = iterate(values)
        return values
    guard = 0
    bound = (n * n) * (len(model.labels) ** 2 + 2) + 2
    while True:
        nxt = iterate(values)
        if nxt == values:
            return values
        values = nxt
        guard += 1
        if guard > bound:
            raise RuntimeError("simulation value iteration failed to stabilize")


# ---------------------------------------------------------------------------
# theorem equivalence checking

@dataclass
class TheoremReport:
    instance: str
    rounds: Optional[int]
    positions_checked: int
    discrepancies: tuple[dict, ...]

    @property
    def ok(self) -> bool:
        return not self.discrepancies


def theorem_check(inst, model: Model, rounds: Optional[int], **det_options) -> TheoremReport:
    """Compare game-module verdicts against this module's semantics for
    every position over the determinized carrier."""
    from . import game as game_mod
    from . import graded as graded_mod

    try:
        det = graded_mod.predeterminize(model, inst, **det_options)
    except graded_mod.DeterminizationCapError:
        if rounds is None:
            raise
        det = graded_mod.predeterminize(model, inst, depth_limit=rounds, **det_options)

    name = inst.name
    discrepancies = []
    checked = 0

    if name in ("trace-inclusion", "btop-dfa", "btop-nfa", "bisim"):
        report = (
            game_mod.winning_region_inf(det)
            if rounds is None
            else game_mod.winning_region_n(det, rounds)
        )
        if name == "bisim" and rounds is None:
            partition = bisimilarity(model)
        elif name == "bisim":
            partition = bisimilarity(model, rounds=rounds)
        for (i, j) in game_mod._positions(det):
            checked += 1
            game_wins = report.wins(game_mod.pair_claim(i, j))
            expected = _oracle_pair(name, model, det, i, j, rounds, partition if name == "bisim" else None)
            if game_wins != expected:
                discrepancies.append(
                    {
                        "position": (det.point_name(i), det.point_name(j)),
                        "game": game_wins,
                        "oracle": expected,
                    }
                )
        return TheoremReport(name, rounds, checked, tuple(discrepancies))

    if name == "ptrace":
        report = game_mod.value_table(det, rounds)
        assert report.tables is not None
        for (i, j), value in sorted(report.tables[-1].items()):
            checked += 1
            mu = det.points[i]
            nu = det.points[j]
            expected = total_variation(
                trace_distribution(model, mu, rounds),
                trace_distribution(model, nu, rounds),
            )
            if value != expected:
                discrepancies.append(
                    {
                        "position": (det.point_name(i), det.point_name(j)),
                        "game": format_ratio(value),
                        "oracle": format_ratio(expected),
                    }
                )
        return TheoremReport(name, rounds, checked, tuple(discrepancies))

    if name in ("qsim", "qrsim"):
        mode = "plain" if name == "qsim" else "ready"
        report = game_mod.value_table(det, rounds)
        oracle_values = simulation_values(model, mode, rounds)
        assert report.tables is not None
        for (i, j), value in sorted(report.tables[-1].items()):
            checked += 1
            expected = oracle_values[(i, j)]
            if value != expected:
                discrepancies.append(
                    {
                        "position": (det.point_name(i), det.point_name(j)),
                        "game": format_ratio(value),
                        "oracle": format_ratio(expected),
                    }
                )
        return TheoremReport(name, rounds, checked, tuple(discrepancies))

    raise ValueError(f"unhandled instance {name!r}")


def _oracle_pair(name, model, det, i, j, rounds, partition):
    if name == "trace-inclusion":
        lhs = _members(det, i)
        rhs = _members(det, j)
        if rounds is None:
            return language_inclusion(model, lhs, rhs)
        return traces_n(model, lhs, rounds) <= traces_n(model, rhs, rounds)
    if name in ("btop-dfa", "btop-nfa"):
        lhs = _members(det, i) if name == "btop-nfa" else [det.points[i]]
        rhs = _members(det, j) if name == "btop-nfa" else [det.points[j]]
        if rounds is None:
            return language_inclusion(model, lhs, rhs)
        return accepted_words_upto(model, lhs, rounds) <= accepted_words_upto(model, rhs, rounds)
    if name == "bisim":
        return same_block(partition, model.state_name(det.points[i]), model.state_name(det.points[j]))
    raise ValueError(name)


def _members(det, point_id: int) -> list[int]:
    mask = det.points[point_id]
    return [x for x in range(len(det.model.states)) if mask & (1 << x)]
