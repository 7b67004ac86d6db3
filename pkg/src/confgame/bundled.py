"""Bundled example systems, including the three-state automaton used in
the golden tests (one accepting state with a self loop, feeding a cycle
and a non-accepting sink loop)."""

from __future__ import annotations

import json

from .coalgebra import Model, parse_model

FIG1_NFA = {
    "kind": "nfa",
    "states": ["x1", "x2", "x3"],
    "labels": ["a"],
    "transitions": [
        {"from": "x1", "label": "a", "to": "x1"},
        {"from": "x1", "label": "a", "to": "x2"},
        {"from": "x1", "label": "a", "to": "x3"},
        {"from": "x2", "label": "a", "to": "x1"},
        {"from": "x3", "label": "a", "to": "x3"},
    ],
    "accepting": ["x1"],
}

FIG1_LTS = {
    "kind": "lts",
    "states": ["x1", "x2", "x3"],
    "labels": ["a"],
    "transitions": FIG1_NFA["transitions"],
}

COIN_LMC = {
    "kind": "lmc",
    "states": ["fair", "biased"],
    "labels": ["h", "t"],
    "transitions": [
        {"from": "fair", "label": "h", "to": "fair", "prob": "1/2"},
        {"from": "fair", "label": "t", "to": "fair", "prob": "1/2"},
        {"from": "biased", "label": "h", "to": "biased", "prob": "1/4"},
        {"from": "biased", "label": "t", "to": "biased", "prob": "3/4"},
    ],
}

METRIC_MLTS = {
    "kind": "mlts",
    "states": ["p", "q", "r"],
    "labels": ["a", "b"],
    "metric_kind": "pseudometric",
    "label_metric": [["a", "b", "1/4"]],
    "transitions": [
        {"from": "p", "label": "a", "to": "p"},
        {"from": "q", "label": "b", "to": "q"},
        {"from": "r", "label": "a", "to": "r"},
        {"from": "r", "label": "b", "to": "r"},
    ],
}

EVEN_DFA = {
    "kind": "dfa",
    "states": ["even", "odd"],
    "labels": ["a"],
    "accepting": ["even"],
    "next": {"even": {"a": "odd"}, "odd": {"a": "even"}},
}

BUNDLED = {
    "fig1-nfa": FIG1_NFA,
    "fig1-lts": FIG1_LTS,
    "coin-lmc": COIN_LMC,
    "metric-mlts": METRIC_MLTS,
    "even-dfa": EVEN_DFA,
}

DEFAULT_FOR_SEMANTICS = {
    "trace-inclusion": "fig1-lts",
    "ptrace": "coin-lmc",
    "bisim": "fig1-lts",
    "btop-dfa": "even-dfa",
    "btop-nfa": "fig1-nfa",
    "qsim": "metric-mlts",
    "qrsim": "metric-mlts",
}


def bundled_document(name: str) -> str:
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled system {name!r}; known: {', '.join(sorted(BUNDLED))}")
    return json.dumps(BUNDLED[name], indent=2)


def bundled_model(name: str) -> Model:
    return parse_model(bundled_document(name))
