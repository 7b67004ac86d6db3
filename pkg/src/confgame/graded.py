"""Graded-semantics instances: depth-n behaviours, pre-determinization and
the lifted one-step comparison.

Seven built-in instances are provided:

* ``trace-inclusion``  LTS, preorder fibre, powerset determinization
* ``ptrace``           labelled Markov chain, pseudometric fibre,
                       distribution determinization
* ``bisim``            LTS, equivalence fibre, identity determinization
* ``btop-dfa``         DFA, specialization-preorder fibre, identity
* ``btop-nfa``         serial NFA, specialization-preorder fibre,
                       non-empty-powerset determinization
* ``qsim`` / ``qrsim`` metric LTS, hemimetric fibre, identity

Each instance fixes the determinized carrier, the one-step shape, the
behaviour object at each finite depth and the one-step comparison lifted
through a ground conformance on the carrier.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

from .coalgebra import Distribution, Model, ModelInvariantError, successors
from .conformance import Carrier, Conformance, Fibre
from .ratio import ONE, ZERO, format_ratio
from .transport import TransportResult, wasserstein as _transport

DEFAULT_POWERSET_CAP = 10
DEFAULT_POINT_CAP = 4096


class InstanceError(ValueError):
    """Instance/model incompatibility or a malformed request."""


class DeterminizationCapError(RuntimeError):
    """Reachable determinization exceeded the configured cap."""


@dataclass(frozen=True)
class Instance:
    name: str
    model_kind: str
    fibre: Fibre
    quantitative: bool
    identity_m0: bool


INSTANCES: dict[str, Instance] = {
    inst.name: inst
    for inst in (
        Instance("trace-inclusion", "lts", Fibre.PREORDER, False, False),
        Instance("ptrace", "lmc", Fibre.PSEUDOMETRIC, True, False),
        Instance("bisim", "lts", Fibre.EQUIVALENCE, False, True),
        Instance("btop-dfa", "dfa", Fibre.SPEC_PREORDER, False, True),
        Instance("btop-nfa", "nfa", Fibre.SPEC_PREORDER, False, False),
        Instance("qsim", "mlts", Fibre.HEMIMETRIC, True, True),
        Instance("qrsim", "mlts", Fibre.HEMIMETRIC, True, True),
    )
}

_ALIASES = {
    "traceinc": "trace-inclusion",
    "trace": "trace-inclusion",
    "btopdfa": "btop-dfa",
    "btopnfa": "btop-nfa",
}


def instance_by_name(name: str) -> Instance:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in INSTANCES:
        raise InstanceError(f"unknown semantics {name!r}; known: {', '.join(sorted(INSTANCES))}")
    return INSTANCES[key]


def check_compat(inst: Instance, model: Model) -> None:
    if model.kind != inst.model_kind:
        raise InstanceError(
            f"semantics {inst.name!r} applies to {inst.model_kind!r} models, got {model.kind!r}"
        )


# ---------------------------------------------------------------------------
# one-step values over a determinized carrier

@dataclass(frozen=True)
class OneStep:
    """One transition step of a determinized point, shaped by the instance.

    succ:     per-label successor point index (trace-inclusion, btop)
    branches: finite set of (label, point) (bisim, qsim, qrsim)
    masses:   per-label (mass, conditional point) (ptrace)
    accept:   acceptance bit (btop)
    ready:    available labels (qrsim)
    """

    succ: Optional[tuple[int, ...]] = None
    branches: Optional[frozenset[tuple[int, int]]] = None
    masses: Optional[tuple[tuple[int, Fraction, int], ...]] = None
    accept: Optional[bool] = None
    ready: Optional[frozenset[int]] = None


@dataclass(frozen=True)
class BehaviourObject:
    """Canonical depth-n observable behaviour; equality is structural."""

    instance: str
    depth: int
    value: object
    labels: tuple[str, ...] = ()
    label_metric: Optional[tuple[tuple[Fraction, ...], ...]] = None


@dataclass(frozen=True)
class DetSystem:
    """The reachable pre-determinization of a model under an instance."""

    instance: Instance
    model: Model
    points: tuple[object, ...]
    steps: tuple[Optional[OneStep], ...]
    unit: tuple[int, ...]
    complete: bool
    closure_depth: Optional[int] = None  # None means fully closed
    point_depth: Optional[tuple[int, ...]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "_point_index", {p: i for i, p in enumerate(self.points)})

    def point_id(self, point: object) -> int:
        try:
            return self._point_index[point]  # type: ignore[attr-defined]
        except KeyError:
            raise InstanceError(f"unknown determinized point {point!r}") from None

    def step(self, i: int) -> OneStep:
        s = self.steps[i]
        if s is None:
            raise InstanceError(
                f"point {self.point_name(i)!r} sits on the closure frontier; "
                "increase the closure depth"
            )
        return s

    def point_name(self, i: int) -> str:
        return point_name(self.instance, self.model, self.points[i])

    def point_carrier(self) -> Carrier:
        return Carrier(tuple(self.point_name(i) for i in range(len(self.points))))

    @property
    def empty_point(self) -> Optional[int]:
        if self.instance.name == "trace-inclusion":
            return self.point_id(0) if 0 in self._point_index else None  # type: ignore[attr-defined]
        return None


def point_name(inst: Instance, model: Model, point: object) -> str:
    if inst.name in ("trace-inclusion", "btop-nfa"):
        names = [model.state_name(i) for i in range(len(model.states)) if point & (1 << i)]
        return "{" + ",".join(names) + "}"
    if inst.name == "ptrace":
        assert isinstance(point, Distribution)
        if len(point.weights) == 1:
            return model.state_name(point.weights[0][0])
        return "+".join(f"{format_ratio(w)}*{model.state_name(i)}" for i, w in point.weights)
    return model.state_name(point)


# ---------------------------------------------------------------------------
# pre-determinization

def predeterminize(
    model: Model,
    inst: Instance,
    *,
    powerset_cap: int = DEFAULT_POWERSET_CAP,
    point_cap: int = DEFAULT_POINT_CAP,
    depth_limit: Optional[int] = None,
) -> DetSystem:
    check_compat(inst, model)
    n = len(model.states)
    if inst.identity_m0:
        points = tuple(range(n))
        steps = tuple(_identity_step(model, inst, x) for x in range(n))
        return DetSystem(inst, model, points, steps, points, True, None, (0,) * n)

    if inst.name in ("trace-inclusion", "btop-nfa"):
        include_empty = inst.name == "trace-inclusion"
        if n <= powerset_cap:
            masks = [m for m in range(1 << n) if include_empty or m]
            masks.sort(key=lambda m: (bin(m).count("1"), _mask_key(m, n)))
            index = {m: i for i, m in enumerate(masks)}
            steps = tuple(_subset_step(model, mask, index) for mask in masks)
            unit = tuple(index[1 << x] for x in range(n))
            return DetSystem(inst, model, tuple(masks), steps, unit, True, None, (0,) * len(masks))
        # reachable closure from the unit image (plus the empty point)
        seeds = [1 << x for x in range(n)]
        if include_empty:
            seeds.append(0)
        masks, steps, depths = _closure(
            seeds,
            lambda mask: _subset_successors(model, mask),
            point_cap,
            depth_limit,
        )
        index = {m: i for i, m in enumerate(masks)}
        step_values = tuple(
            None if s is None else _subset_step(model, mask, index)
            for mask, s in zip(masks, steps)
        )
        unit = tuple(index[1 << x] for x in range(n))
        return DetSystem(
            inst, model, tuple(masks), step_values, unit, False, depth_limit, tuple(depths)
        )

    if inst.name == "ptrace":
        seeds = [Distribution.dirac(x) for x in range(n)]
        points, raw_steps, depths = _closure(
            seeds,
            lambda mu: [pt for _, _, pt in _lmc_step(model, mu)],
            point_cap,
            depth_limit,
            cap_error=(
                "infinite or too large determinization: reachable distribution "
                f"closure exceeds {point_cap} points"
            ),
        )
        index = {p: i for i, p in enumerate(points)}
        step_values = tuple(
            None
            if s is None
            else OneStep(masses=tuple((l, w, index[pt]) for l, w, pt in _lmc_step(model, mu)))
            for mu, s in zip(points, raw_steps)
        )
        unit = tuple(index[Distribution.dirac(x)] for x in range(n))
        complete = depth_limit is None
        return DetSystem(
            inst, model, tuple(points), step_values, unit, complete,
            depth_limit, tuple(depths),
        )

    raise InstanceError(f"unhandled instance {inst.name!r}")


def _mask_key(mask: int, n: int) -> tuple[int, ...]:
    return tuple(i for i in range(n) if mask & (1 << i))


def _closure(seeds, successors_of, point_cap, depth_limit, cap_error=None):
    """Breadth-first closure under successor points.

    With a depth limit, frontier points at the limit get step None; without
    one the closure is complete or raises DeterminizationCapError.
    """
    points: list = []
    index: dict = {}
    depths: list[int] = []
    queue: list[int] = []
    for s in seeds:
        if s not in index:
            index[s] = len(points)
            points.append(s)
            depths.append(0)
            queue.append(index[s])
    head = 0
    steps: list[Optional[bool]] = []
    expanded: list[bool] = [False] * len(points)
    while head < len(queue):
        i = queue[head]
        head += 1
        if depth_limit is not None and depths[i] >= depth_limit:
            continue
        for succ in successors_of(points[i]):
            if succ not in index:
                if len(points) >= point_cap:
                    raise DeterminizationCapError(
                        cap_error
                        or f"reachable determinization exceeds {point_cap} points"
                    )
                index[succ] = len(points)
                points.append(succ)
                depths.append(depths[i] + 1)
                expanded.append(False)
                queue.append(index[succ])
        expanded[i] = True
    step_flags = [True if expanded[i] else None for i in range(len(points))]
    return points, step_flags, depths


def _subset_successors(model: Model, mask: int):
    return [_subset_one_label(model, mask, l) for l in range(len(model.labels))]


def _subset_one_label(model: Model, mask: int, label: int) -> int:
    out = 0
    for t in model.transitions:
        if t.label == label and mask & (1 << t.src):
            out |= 1 << t.dst
    return out


def _subset_step(model: Model, mask: int, index: dict[int, int]) -> OneStep:
    succ = tuple(index[_subset_one_label(model, mask, l)] for l in range(len(model.labels)))
    if model.kind == "nfa":
        assert model.accepting is not None
        accept = any(mask & (1 << x) for x in model.accepting)
        return OneStep(succ=succ, accept=accept)
    return OneStep(succ=succ)


def _lmc_step(model: Model, mu: Distribution) -> list[tuple[int, Fraction, Distribution]]:
    """Per-label mass and conditional successor distribution of gamma#."""
    per_label: dict[int, dict[int, Fraction]] = {}
    for y, w in mu.weights:
        for (l, x), p in successors(model, y):
            bucket = per_label.setdefault(l, {})
            bucket[x] = bucket.get(x, ZERO) + w * p
    out = []
    for l in sorted(per_label):
        bucket = per_label[l]
        mass = sum(bucket.values(), ZERO)
        conditional = Distribution.from_dict({x: v / mass for x, v in bucket.items()})
        out.append((l, mass, conditional))
    return out


def _identity_step(model: Model, inst: Instance, x: int) -> OneStep:
    if inst.name == "bisim":
        return OneStep(branches=frozenset(successors(model, x)))
    if inst.name == "btop-dfa":
        accept, row = successors(model, x)
        return OneStep(succ=tuple(row), accept=accept)
    if inst.name == "qsim":
        return OneStep(branches=frozenset(successors(model, x)))
    if inst.name == "qrsim":
        branches = frozenset(successors(model, x))
        ready = frozenset(l for l, _ in branches)
        return OneStep(branches=branches, ready=ready)
    raise InstanceError(f"{inst.name!r} is not an identity-determinization instance")


# ---------------------------------------------------------------------------
# depth-n behaviours

def gamma_n(model: Model, inst: Instance, x: int, n: int) -> BehaviourObject:
    """Depth-n observable behaviour of a base state."""
    check_compat(inst, model)
    if n < 0:
        raise InstanceError("behaviour depth must be non-negative")
    if not 0 <= x < len(model.states):
        raise ModelInvariantError(f"unknown state index {x}")
    value = _gamma_value(model, inst.name, x, n)
    return BehaviourObject(
        inst.name, n, value, model.labels, model.label_metric
    )


def _gamma_value(model: Model, name: str, x: int, n: int):
    if name == "trace-inclusion":
        return _trace_set(model, x, n)
    if name == "ptrace":
        return _trace_dist(model, Distribution.dirac(x), n)
    if name == "bisim":
        return _unfold_tree(model, x, n, ready=False)
    if name in ("btop-dfa", "btop-nfa"):
        return _accepted_words(model, frozenset([x]), n)
    if name == "qsim":
        return _unfold_tree(model, x, n, ready=False)
    if name == "qrsim":
        return _unfold_tree(model, x, n, ready=True)
    raise InstanceError(f"unhandled instance {name!r}")


def _trace_set(model: Model, x: int, n: int) -> frozenset[tuple[int, ...]]:
    if n == 0:
        return frozenset([()])
    out = set()
    for (l, y) in successors(model, x):
        for w in _trace_set(model, y, n - 1):
            out.add((l,) + w)
    return frozenset(out)


def _trace_dist(model: Model, mu: Distribution, n: int) -> tuple[tuple[tuple[int, ...], Fraction], ...]:
    acc: dict[tuple[int, ...], Fraction] = {(): ONE}
    current = {(): mu}
    for _ in range(n):
        nxt_mass: dict[tuple[int, ...], Fraction] = {}
        nxt_dist: dict[tuple[int, ...], dict[int, Fraction]] = {}
        for word, dist in current.items():
            base = acc[word]
            for y, w in dist.weights:
                for (l, z), p in successors(model, y):
                    key = word + (l,)
                    nxt_mass[key] = nxt_mass.get(key, ZERO) + base * w * p
                    bucket = nxt_dist.setdefault(key, {})
                    bucket[z] = bucket.get(z, ZERO) + w * p
        acc = nxt_mass
        current = {
            word: Distribution.from_dict(
                {z: v / sum(bucket.values(), ZERO) for z, v in bucket.items()}
            )
            for word, bucket in nxt_dist.items()
        }
    return tuple(sorted(acc.items()))


def _unfold_tree(model: Model, x: int, n: int, *, ready: bool):
    if n == 0:
        return ()
    out = []
    succ = successors(model, x)
    ready_set = frozenset(l for l, _ in succ) if ready else None
    for (l, y) in succ:
        sub = _unfold_tree(model, y, n - 1, ready=ready)
        out.append((ready_set, l, sub) if ready else (l, sub))
    return frozenset(out)


def _accepted_words(model: Model, states: frozenset[int], n: int) -> frozenset[tuple[int, ...]]:
    """Words of length < n accepted from a state set (union semantics)."""
    out: set[tuple[int, ...]] = set()
    frontier = {(): states}
    for depth in range(n):
        nxt: dict[tuple[int, ...], frozenset[int]] = {}
        for word, current in frontier.items():
            if _accepts_now(model, current):
                out.add(word)
            if depth + 1 < n:
                for l in range(len(model.labels)):
                    nxt[word + (l,)] = _label_image(model, current, l)
        frontier = nxt
    return frozenset(out)


def _accepts_now(model: Model, states: frozenset[int]) -> bool:
    assert model.accepting is not None
    return any(x in model.accepting for x in states)


def _label_image(model: Model, states: frozenset[int], label: int) -> frozenset[int]:
    if model.kind == "dfa":
        assert model.next_table is not None
        return frozenset(model.next_table[x][label] for x in states)
    return frozenset(t.dst for t in model.transitions if t.label == label and t.src in states)


# ---------------------------------------------------------------------------
# behaviour comparison in M_n 1

def behaviour_compare(inst: Instance, b1: BehaviourObject, b2: BehaviourObject):
    """Compare two same-depth behaviours: a boolean for relational
    instances, an exact distance for quantitative ones."""
    if b1.instance != inst.name or b2.instance != inst.name:
        raise InstanceError("behaviour objects belong to a different instance")
    if b1.depth != b2.depth:
        raise InstanceError("behaviour objects have different depths")
    name = inst.name
    if name in ("trace-inclusion", "btop-dfa", "btop-nfa"):
        return b1.value <= b2.value  # frozenset inclusion
    if name == "bisim":
        return b1.value == b2.value
    if name == "ptrace":
        return total_variation_pairs(b1.value, b2.value)
    if name in ("qsim", "qrsim"):
        metric = b1.label_metric
        assert metric is not None
        return _tree_distance(b1.value, b2.value, b1.depth, metric, name == "qrsim")
    raise InstanceError(f"unhandled instance {name!r}")


def total_variation_pairs(d1, d2) -> Fraction:
    m1 = dict(d1)
    m2 = dict(d2)
    keys = set(m1) | set(m2)
    total = ZERO
    for k in keys:
        total += abs(m1.get(k, ZERO) - m2.get(k, ZERO))
    return total / 2


def _tree_distance(t1, t2, depth: int, metric, with_ready: bool) -> Fraction:
    if depth == 0:
        return ZERO
    best_outer = ZERO
    for e1 in t1:
        best_inner = ONE
        for e2 in t2:
            if with_ready:
                r1, a, s1 = e1
                r2, b, s2 = e2
                d = max(
                    _ready_distance(r1, r2, metric),
                    metric[a][b],
                    _tree_distance(s1, s2, depth - 1, metric, with_ready),
                )
            else:
                a, s1 = e1
                b, s2 = e2
                d = max(metric[a][b], _tree_distance(s1, s2, depth - 1, metric, with_ready))
            if d < best_inner:
                best_inner = d
        if best_inner > best_outer:
            best_outer = best_inner
    return best_outer


def _ready_distance(r1: frozenset[int], r2: frozenset[int], metric) -> Fraction:
    """Symmetric Hausdorff distance between label sets under the label metric."""
    def directed(a: frozenset[int], b: frozenset[int]) -> Fraction:
        worst = ZERO
        for x in a:
            best = ONE
            for y in b:
                if metric[x][y] < best:
                    best = metric[x][y]
            if best > worst:
                worst = best
        return worst

    return max(directed(r1, r2), directed(r2, r1))


# ---------------------------------------------------------------------------
# the lifted one-step comparison

def lift_compare(det: DetSystem, s1: OneStep, s2: OneStep, ground: Conformance):
    """Compare two one-step behaviours through a ground conformance on the
    determinized carrier; boolean or exact distance by instance."""
    if len(ground.carrier) != len(det.points):
        raise InstanceError("ground conformance does not live over the determinized carrier")
    if ground.fibre is not det.instance.fibre:
        raise InstanceError(
            f"ground fibre {ground.fibre.value} does not match instance fibre "
            f"{det.instance.fibre.value}"
        )
    name = det.instance.name
    if name == "trace-inclusion":
        assert s1.succ is not None and s2.succ is not None
        return all(ground.relates(a, b) for a, b in zip(s1.succ, s2.succ))
    if name in ("btop-dfa", "btop-nfa"):
        assert s1.succ is not None and s2.succ is not None
        if s1.accept and not s2.accept:
            return False
        return all(ground.relates(a, b) for a, b in zip(s1.succ, s2.succ))
    if name == "bisim":
        assert s1.branches is not None and s2.branches is not None
        fwd = all(
            any(a == b and ground.relates(u, v) for b, v in s2.branches)
            for a, u in s1.branches
        )
        bwd = all(
            any(a == b and ground.relates(u, v) for a, u in s1.branches)
            for b, v in s2.branches
        )
        return fwd and bwd
    if name == "ptrace":
        return ptrace_step_distance(det, s1, s2, ground.distance).value
    if name in ("qsim", "qrsim"):
        metric = det.model.label_metric
        assert metric is not None
        assert s1.branches is not None and s2.branches is not None
        value = _hausdorff_step(s1.branches, s2.branches, metric, ground.distance)
        if name == "qrsim" and s1.branches:
            assert s1.ready is not None and s2.ready is not None
            value = max(value, _ready_distance(s1.ready, s2.ready, metric))
        return value
    raise InstanceError(f"unhandled instance {name!r}")


def _hausdorff_step(b1, b2, metric, ground_dist) -> Fraction:
    worst = ZERO
    for a, u in b1:
        best = ONE
        for b, v in b2:
            d = max(metric[a][b], ground_dist(u, v))
            if d < best:
                best = d
        if best > worst:
            worst = best
    return worst


def ptrace_step_distance(det: DetSystem, s1: OneStep, s2: OneStep, ground_dist) -> TransportResult:
    """Exact Wasserstein distance between two determinized one-steps.

    The ground cost on (label, point) pairs combines the discrete label
    metric and the point ground by maximum, so distinct labels cost 1.
    """
    assert s1.masses is not None and s2.masses is not None
    items1 = [(l, pt) for l, _, pt in s1.masses]
    items2 = [(l, pt) for l, _, pt in s2.masses]
    p = [w for _, w, _ in s1.masses]
    q = [w for _, w, _ in s2.masses]
    cost = [
        [ONE if a != b else ground_dist(u, v) for b, v in items2]
        for a, u in items1
    ]
    return _transport(p, q, cost)


# public re-export; the module-level operation contract lives here
def wasserstein(p: Sequence[Fraction], q: Sequence[Fraction], cost) -> TransportResult:
    return _transport(p, q, cost)


def det_trace_distribution(det: DetSystem, point_id: int, depth: int) -> dict[tuple[int, ...], Fraction]:
    """Depth-n word distribution of a determinized point, evaluated
    stepwise through the determinization (one flattening per level).

    This is the step-indexed route to the depth-n observable; the oracle
    reaches the same object by path enumeration on the base model.
    """
    if det.instance.name != "ptrace":
        raise InstanceError("stepwise word distributions apply to the ptrace instance")
    memo: dict[tuple[int, int], dict] = {}

    def eval_point(i: int, k: int) -> dict[tuple[int, ...], Fraction]:
        if k == 0:
            return {(): ONE}
        key = (i, k)
        if key not in memo:
            out: dict[tuple[int, ...], Fraction] = {}
            step = det.step(i)
            assert step.masses is not None
            for (l, mass, succ) in step.masses:
                for word, p in eval_point(succ, k - 1).items():
                    key2 = (l,) + word
                    out[key2] = out.get(key2, ZERO) + mass * p
            memo[key] = out
        return memo[key]

    return eval_point(point_id, depth)


# ---------------------------------------------------------------------------
# graded Kleisli star at a determinized point

def kleisli_star_apply(det: DetSystem, point_id: int, n: int) -> BehaviourObject:
    """Evaluate the depth-n behaviour of a determinized point through the
    algebra structure: unions for subsets, mixtures for distributions."""
    if not 0 <= point_id < len(det.points):
        raise InstanceError(f"unknown point id {point_id}")
    model = det.model
    inst = det.instance
    point = det.points[point_id]
    if inst.identity_m0:
        return gamma_n(model, inst, point, n)
    if inst.name in ("trace-inclusion", "btop-nfa"):
        members = [x for x in range(len(model.states)) if point & (1 << x)]
        if inst.name == "trace-inclusion":
            value: frozenset = frozenset()
            for x in members:
                value |= _trace_set(model, x, n)
        else:
            value = _accepted_words(model, frozenset(members), n)
        return BehaviourObject(inst.name, n, value, model.labels, model.label_metric)
    if inst.name == "ptrace":
        assert isinstance(point, Distribution)
        value = _trace_dist(model, point, n)
        return BehaviourObject(inst.name, n, value, model.labels, model.label_metric)
    raise InstanceError(f"unhandled instance {inst.name!r}")
