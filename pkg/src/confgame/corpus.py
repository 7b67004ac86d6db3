"""Seeded random model generators for testing and oracle checks.

All randomness flows through a caller-supplied ``random.Random`` so corpora
are reproducible from a seed.
"""

from __future__ import annotations

from fractions import Fraction
from random import Random

from .coalgebra import Model, model_from_dict
from .conformance import triangle_closure_matrix
from .ratio import ONE, ZERO, format_ratio


def random_lts(rng: Random, max_states: int = 4, max_labels: int = 2, density: float = 0.35) -> Model:
    n = rng.randint(1, max_states)
    m = rng.randint(1, max_labels)
    states = [f"s{i}" for i in range(n)]
    labels = [chr(ord("a") + i) for i in range(m)]
    transitions = [
        {"from": s, "label": l, "to": t}
        for s in states
        for l in labels
        for t in states
        if rng.random() < density
    ]
    return model_from_dict(
        {"kind": "lts", "states": states, "labels": labels, "transitions": transitions}
    )


def random_nfa(rng: Random, max_states: int = 3, max_labels: int = 2, density: float = 0.3) -> Model:
    n = rng.randint(1, max_states)
    m = rng.randint(1, max_labels)
    states = [f"s{i}" for i in range(n)]
    labels = [chr(ord("a") + i) for i in range(m)]
    transitions = []
    for s in states:
        for l in labels:
            targets = [t for t in states if rng.random() < density]
            if not targets:
                targets = [rng.choice(states)]  # keep the automaton serial
            transitions.extend({"from": s, "label": l, "to": t} for t in targets)
    accepting = [s for s in states if rng.random() < 0.5]
    return model_from_dict(
        {
            "kind": "nfa",
            "states": states,
            "labels": labels,
            "transitions": transitions,
            "accepting": accepting,
        }
    )


def random_dfa(rng: Random, max_states: int = 4, max_labels: int = 2) -> Model:
    n = rng.randint(1, max_states)
    m = rng.randint(1, max_labels)
    states = [f"s{i}" for i in range(n)]
    labels = [chr(ord("a") + i) for i in range(m)]
    nxt = {s: {l: rng.choice(states) for l in labels} for s in states}
    accepting = [s for s in states if rng.random() < 0.5]
    return model_from_dict(
        {
            "kind": "dfa",
            "states": states,
            "labels": labels,
            "accepting": accepting,
            "next": nxt,
        }
    )


def random_lmc(rng: Random, max_states: int = 4, max_labels: int = 2, max_branch: int = 3) -> Model:
    n = rng.randint(1, max_states)
    m = rng.randint(1, max_labels)
    states = [f"s{i}" for i in range(n)]
    labels = [chr(ord("a") + i) for i in range(m)]
    transitions = []
    for s in states:
        k = rng.randint(1, max_branch)
        moves = []
        seen = set()
        for _ in range(k):
            move = (rng.choice(labels), rng.choice(states))
            if move not in seen:
                seen.add(move)
                moves.append(move)
        weights = [rng.randint(1, 4) for _ in moves]
        total = sum(weights)
        for (l, t), w in zip(moves, weights):
            transitions.append(
                {"from": s, "label": l, "to": t, "prob": format_ratio(Fraction(w, total))}
            )
    return model_from_dict(
        {"kind": "lmc", "states": states, "labels": labels, "transitions": transitions}
    )


def random_mlts(
    rng: Random,
    max_states: int = 5,
    max_labels: int = 3,
    density: float = 0.4,
    metric_kind: str = "hemimetric",
    discrete_labels: bool = False,
) -> Model:
    n = rng.randint(1, max_states)
    m = rng.randint(1, max_labels)
    states = [f"s{i}" for i in range(n)]
    labels = [chr(ord("a") + i) for i in range(m)]
    grid = [ZERO, Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), ONE]
    dist = [[ONE] * m for _ in range(m)]
    for i in range(m):
        dist[i][i] = ZERO
    if not discrete_labels:
        for i in range(m):
            for j in range(m):
                if i != j:
                    dist[i][j] = rng.choice(grid)
        if metric_kind == "pseudometric":
            for i in range(m):
                for j in range(i):
                    v = min(dist[i][j], dist[j][i])
                    dist[i][j] = dist[j][i] = v
        dist = [list(row) for row in triangle_closure_matrix(dist)]
    entries = [
        [labels[i], labels[j], format_ratio(dist[i][j])]
        for i in range(m)
        for j in range(m)
        if i != j and (metric_kind == "hemimetric" or i < j)
    ]
    transitions = [
        {"from": s, "label": l, "to": t}
        for s in states
        for l in labels
        for t in states
        if rng.random() < density
    ]
    return model_from_dict(
        {
            "kind": "mlts",
            "states": states,
            "labels": labels,
            "metric_kind": metric_kind,
            "label_metric": entries,
            "transitions": transitions,
        }
    )


GENERATORS = {
    "lts": random_lts,
    "nfa": random_nfa,
    "dfa": random_dfa,
    "lmc": random_lmc,
    "mlts": random_mlts,
}


def random_model_for(kind: str, rng: Random, **kwargs) -> Model:
    return GENERATORS[kind](rng, **kwargs)
