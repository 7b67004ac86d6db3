"""Finite system models and the system-description file format.

Five model kinds are supported: labelled transition systems (``lts``),
labelled Markov chains (``lmc``), metric labelled transition systems
(``mlts``), serial nondeterministic automata (``nfa``) and deterministic
automata (``dfa``).  Documents are JSON; probabilities and distances are
exact rationals written as ``"p/q"`` strings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .conformance import Carrier
from .ratio import ONE, ZERO, RatioError, format_ratio, parse_ratio

KINDS = ("lts", "lmc", "mlts", "nfa", "dfa")


class ModelFormatError(ValueError):
    """Syntactic problem in a system description, with position info."""


class ModelInvariantError(ValueError):
    """A well-formed document that violates a model invariant."""


@dataclass(frozen=True)
class Transition:
    src: int
    label: int
    dst: int
    prob: Optional[Fraction] = None


@dataclass(frozen=True)
class Distribution:
    """Finitely supported probability distribution over state indices."""

    weights: tuple[tuple[int, Fraction], ...]

    def __post_init__(self) -> None:
        if not self.weights:
            raise ModelInvariantError("distribution must have non-empty support")
        total = ZERO
        last = -1
        for idx, w in self.weights:
            if idx <= last:
                raise ModelInvariantError("distribution support must be sorted and duplicate free")
            last = idx
            if w <= ZERO:
                raise ModelInvariantError("distribution weights must be positive")
            total += w
        if total != ONE:
            raise ModelInvariantError(f"distribution weights sum to {format_ratio(total)}, not 1")

    @staticmethod
    def from_dict(weights: dict[int, Fraction]) -> "Distribution":
        items = tuple(sorted((i, w) for i, w in weights.items() if w != ZERO))
        return Distribution(items)

    @staticmethod
    def dirac(idx: int) -> "Distribution":
        return Distribution(((idx, ONE),))

    def __call__(self, idx: int) -> Fraction:
        for i, w in self.weights:
            if i == idx:
                return w
        return ZERO

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.weights)


@dataclass(frozen=True)
class Model:
    kind: str
    states: Carrier
    labels: tuple[str, ...]
    transitions: tuple[Transition, ...] = ()
    accepting: Optional[frozenset[int]] = None
    label_metric: Optional[tuple[tuple[Fraction, ...], ...]] = None
    metric_kind: Optional[str] = None
    next_table: Optional[tuple[tuple[int, ...], ...]] = None

    def state_name(self, i: int) -> str:
        return self.states.elements[i]

    def label_name(self, i: int) -> str:
        return self.labels[i]

    def outgoing(self, x: int) -> tuple[Transition, ...]:
        return tuple(t for t in self.transitions if t.src == x)


def successors(model: Model, x: int):
    """One-step structure of a state, shaped by the model kind.

    lts/mlts/nfa: frozenset of (label, state); lmc: Distribution over
    (label, state) as a tuple of ((label, state), prob); dfa: the pair
    (acceptance bit, per-label successor tuple).
    """
    if not 0 <= x < len(model.states):
        raise ModelInvariantError(f"unknown state index {x}")
    if model.kind in ("lts", "mlts", "nfa"):
        return frozenset((t.label, t.dst) for t in model.transitions if t.src == x)
    if model.kind == "lmc":
        return tuple(((t.label, t.dst), t.prob) for t in model.transitions if t.src == x)
    if model.kind == "dfa":
        assert model.next_table is not None and model.accepting is not None
        return (x in model.accepting, model.next_table[x])
    raise ModelInvariantError(f"unknown model kind {model.kind!r}")


# ---------------------------------------------------------------------------
# parsing

def _fail(msg: str) -> None:
    raise ModelInvariantError(msg)


def _parse_prob(raw, where: str) -> Fraction:
    try:
        value = parse_ratio(raw)
    except RatioError as exc:
        raise ModelFormatError(f"{where}: {exc}") from None
    return value


def parse_model(text: str) -> Model:
    """Parse and validate a system description document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise ModelFormatError("document must be a JSON object")
    return model_from_dict(doc)


def model_from_dict(doc: dict) -> Model:
    kind = doc.get("kind")
    if kind not in KINDS:
        _fail(f"unknown or missing kind {kind!r}; expected one of {', '.join(KINDS)}")
    states = doc.get("states")
    if not isinstance(states, list) or not all(isinstance(s, str) for s in states):
        _fail("'states' must be a list of strings")
    if not states:
        _fail("empty carrier: at least one state is required")
    labels = doc.get("labels")
    if not isinstance(labels, list) or not all(isinstance(l, str) for l in labels):
        _fail("'labels' must be a list of strings")
    if not labels:
        _fail("at least one label is required")
    if len(set(labels)) != len(labels):
        _fail("duplicate labels")
    carrier = Carrier(tuple(states))
    label_index = {l: i for i, l in enumerate(labels)}

    def state_idx(name, where: str) -> int:
        if name not in carrier:
            _fail(f"{where}: unknown state {name!r}")
        return carrier.index(name)

    def label_idx(name, where: str) -> int:
        if name not in label_index:
            _fail(f"{where}: unknown label {name!r}")
        return label_index[name]

    transitions: list[Transition] = []
    raw_transitions = doc.get("transitions", [])
    if not isinstance(raw_transitions, list):
        _fail("'transitions' must be a list")
    for pos, entry in enumerate(raw_transitions):
        where = f"transition #{pos}"
        if not isinstance(entry, dict):
            _fail(f"{where}: must be an object")
        src = state_idx(entry.get("from"), where)
        lbl = label_idx(entry.get("label"), where)
        dst = state_idx(entry.get("to"), where)
        prob = None
        if kind == "lmc":
            if "prob" not in entry:
                _fail(f"{where}: lmc transitions need a 'prob'")
            prob = _parse_prob(entry["prob"], where)
            if prob <= ZERO:
                _fail(f"{where}: probability must be positive")
        elif "prob" in entry:
            _fail(f"{where}: only lmc transitions carry probabilities")
        transitions.append(Transition(src, lbl, dst, prob))

    accepting = None
    if "accepting" in doc:
        raw_acc = doc["accepting"]
        if not isinstance(raw_acc, list):
            _fail("'accepting' must be a list of states")
        accepting = frozenset(state_idx(s, "accepting") for s in raw_acc)

    label_metric = None
    metric_kind = None
    if kind == "mlts":
        metric_kind = doc.get("metric_kind", "hemimetric")
        if metric_kind not in ("hemimetric", "pseudometric"):
            _fail(f"metric_kind must be 'hemimetric' or 'pseudometric', got {metric_kind!r}")
        m = len(labels)
        dist = [[ONE] * m for _ in range(m)]
        for i in range(m):
            dist[i][i] = ZERO
        for pos, entry in enumerate(doc.get("label_metric", [])):
            where = f"label_metric #{pos}"
            if not (isinstance(entry, list) and len(entry) == 3):
                _fail(f"{where}: expected [label, label, 'p/q']")
            a = label_idx(entry[0], where)
            b = label_idx(entry[1], where)
            v = _parse_prob(entry[2], where)
            if v < ZERO or v > ONE:
                _fail(f"{where}: distance {format_ratio(v)} outside [0,1]")
            dist[a][b] = v
            if metric_kind == "pseudometric":
                dist[b][a] = v
        for i in range(m):
            if dist[i][i] != ZERO:
                _fail(f"label metric: nonzero diagonal at {labels[i]!r}")
        for k in range(m):
            for i in range(m):
                for j in range(m):
                    if dist[i][j] > dist[i][k] + dist[k][j]:
                        _fail(
                            "label metric violates the triangle inequality at "
                            f"({labels[i]!r},{labels[k]!r},{labels[j]!r})"
                        )
        label_metric = tuple(tuple(row) for row in dist)
    elif "label_metric" in doc:
        _fail("only mlts documents carry a label metric")

    next_table = None
    if kind == "dfa":
        raw_next = doc.get("next")
        if not isinstance(raw_next, dict):
            _fail("dfa documents need a 'next' table")
        table = []
        for s in carrier.elements:
            row_raw = raw_next.get(s)
            if not isinstance(row_raw, dict):
                _fail(f"next table: missing row for state {s!r}")
            row = []
            for l in labels:
                if l not in row_raw:
                    _fail(f"next table: state {s!r} has no successor for label {l!r}")
                row.append(state_idx(row_raw[l], f"next[{s!r}][{l!r}]"))
            table.append(tuple(row))
        next_table = tuple(table)
        if accepting is None:
            accepting = frozenset()
        if transitions:
            _fail("dfa documents use the 'next' table, not 'transitions'")
    elif "next" in doc:
        _fail("only dfa documents carry a 'next' table")

    model = Model(
        kind=kind,
        states=carrier,
        labels=tuple(labels),
        transitions=tuple(transitions),
        accepting=accepting,
        label_metric=label_metric,
        metric_kind=metric_kind,
        next_table=next_table,
    )
    _validate(model)
    return model


def _validate(model: Model) -> None:
    if model.kind == "lmc":
        seen: set[tuple[int, int, int]] = set()
        totals = [ZERO] * len(model.states)
        for t in model.transitions:
            key = (t.src, t.label, t.dst)
            if key in seen:
                _fail(
                    f"duplicate lmc transition from {model.state_name(t.src)!r} "
                    f"via {model.label_name(t.label)!r} to {model.state_name(t.dst)!r}"
                )
            seen.add(key)
            totals[t.src] += t.prob
        for x, total in enumerate(totals):
            if total != ONE:
                _fail(
                    f"outgoing probabilities of state {model.state_name(x)!r} "
                    f"sum to {format_ratio(total)}, not 1"
                )
    if model.kind == "nfa":
        if model.accepting is None:
            _fail("nfa documents need an 'accepting' list")
        for x in range(len(model.states)):
            for l in range(len(model.labels)):
                if not any(t.src == x and t.label == l for t in model.transitions):
                    _fail(
                        f"nfa not serial: state {model.state_name(x)!r} has no "
                        f"successor for label {model.label_name(l)!r}"
                    )


# ---------------------------------------------------------------------------
# printing (canonical form; parse . print is the identity)

def model_to_dict(model: Model) -> dict:
    doc: dict = {
        "kind": model.kind,
        "states": list(model.states.elements),
        "labels": list(model.labels),
    }
    if model.kind != "dfa":
        entries = []
        for t in sorted(model.transitions, key=lambda t: (t.src, t.label, t.dst)):
            e = {
                "from": model.state_name(t.src),
                "label": model.label_name(t.label),
                "to": model.state_name(t.dst),
            }
            if t.prob is not None:
                e["prob"] = format_ratio(t.prob)
            entries.append(e)
        doc["transitions"] = entries
    if model.accepting is not None and model.kind in ("nfa", "dfa"):
        doc["accepting"] = sorted(model.state_name(i) for i in model.accepting)
    if model.label_metric is not None:
        entries = []
        m = len(model.labels)
        for i in range(m):
            for j in range(m):
                if i != j and model.label_metric[i][j] != ONE:
                    if model.metric_kind == "pseudometric" and j < i:
                        continue
                    entries.append([model.labels[i], model.labels[j], format_ratio(model.label_metric[i][j])])
        doc["metric_kind"] = model.metric_kind
        doc["label_metric"] = entries
    if model.next_table is not None:
        doc["next"] = {
            s: {l: model.state_name(model.next_table[i][j]) for j, l in enumerate(model.labels)}
            for i, s in enumerate(model.states.elements)
        }
    return doc


def print_model(model: Model) -> str:
    return json.dumps(model_to_dict(model), indent=2, sort_keys=True)
