"""Shared text and JSON codecs: determinized points, claims, moves.

Points on the wire are plain state names (identity determinizations),
sorted state-name arrays (subset determinizations) or {state: "p/q"} maps
(distribution determinizations).  Claims are
{"kind": "pair"|"bounded"|"nearness", "lhs": ..., "rhs": ..., "eps": "p/q"}.
Plain state names are accepted everywhere and transferred to the carrier
through the unit of the determinization.
"""

from __future__ import annotations

from fractions import Fraction

from .coalgebra import Distribution
from .game import Move, PointClaim, bounded_claim, nearness_claim, pair_claim
from .graded import DetSystem
from .ratio import RatioError, format_ratio, parse_ratio


class WireError(ValueError):
    pass


# ---------------------------------------------------------------------------
# points

def point_to_json(det: DetSystem, point_id: int):
    inst = det.instance.name
    model = det.model
    point = det.points[point_id]
    if inst in ("trace-inclusion", "btop-nfa"):
        return sorted(
            model.state_name(i) for i in range(len(model.states)) if point & (1 << i)
        )
    if inst == "ptrace":
        assert isinstance(point, Distribution)
        return {model.state_name(i): format_ratio(w) for i, w in point.weights}
    return model.state_name(point)


def json_to_point(det: DetSystem, obj) -> int:
    inst = det.instance.name
    model = det.model

    def state_idx(name) -> int:
        if not isinstance(name, str) or name not in model.states:
            raise WireError(f"unknown state {name!r}")
        return model.states.index(name)

    if isinstance(obj, str):
        return det.unit[state_idx(obj)]
    if isinstance(obj, list):
        if inst not in ("trace-inclusion", "btop-nfa"):
            raise WireError(f"subset points do not apply to {inst}")
        mask = 0
        for name in obj:
            mask |= 1 << state_idx(name)
        try:
            return det.point_id(mask)
        except Exception:
            raise WireError(f"subset {obj!r} is not a carrier point") from None
    if isinstance(obj, dict):
        if inst != "ptrace":
            raise WireError(f"distribution points do not apply to {inst}")
        try:
            weights = {state_idx(k): parse_ratio(v) for k, v in obj.items()}
            dist = Distribution.from_dict(weights)
        except (RatioError, ValueError) as exc:
            raise WireError(f"bad distribution point: {exc}") from None
        try:
            return det.point_id(dist)
        except Exception:
            raise WireError(f"distribution {obj!r} is not a carrier point") from None
    raise WireError(f"cannot read a point from {obj!r}")


# ---------------------------------------------------------------------------
# claims

def claim_to_json(det: DetSystem, claim: PointClaim) -> dict:
    out = {"kind": claim.kind, "lhs": point_to_json(det, claim.lhs)}
    if claim.kind == "nearness":
        out["targets"] = [point_to_json(det, t) for t in claim.targets]
    else:
        out["rhs"] = point_to_json(det, claim.rhs)
    if claim.kind == "bounded":
        out["eps"] = format_ratio(claim.eps)
    return out


def json_to_claim(det: DetSystem, obj) -> PointClaim:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise WireError("a claim is an object with a 'kind'")
    kind = obj["kind"]
    if kind == "pair":
        return pair_claim(json_to_point(det, obj.get("lhs")), json_to_point(det, obj.get("rhs")))
    if kind == "bounded":
        try:
            eps = parse_ratio(obj.get("eps"))
        except RatioError as exc:
            raise WireError(str(exc)) from None
        return bounded_claim(
            json_to_point(det, obj.get("lhs")), json_to_point(det, obj.get("rhs")), eps
        )
    if kind == "nearness":
        targets = obj.get("targets")
        if not isinstance(targets, list) or not targets:
            raise WireError("nearness claims need a non-empty 'targets' list")
        return nearness_claim(
            json_to_point(det, obj.get("lhs")), [json_to_point(det, t) for t in targets]
        )
    raise WireError(f"unknown claim kind {kind!r}")


def move_to_json(det: DetSystem, move: Move) -> dict:
    out = {"kind": move.kind}
    if move.kind == "claims":
        out["claims"] = [claim_to_json(det, c) for c in move.claims]
    elif move.kind == "pick":
        out["claim"] = claim_to_json(det, move.claim)
    elif move.kind == "witness":
        out["target"] = point_to_json(det, move.target)
    return out


def json_to_move(det: DetSystem, obj) -> Move:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise WireError("a move is an object with a 'kind'")
    kind = obj["kind"]
    if kind == "concede":
        return Move("concede")
    if kind == "claims":
        claims = obj.get("claims")
        if not isinstance(claims, list):
            raise WireError("a claims move carries a 'claims' list")
        return Move("claims", claims=tuple(json_to_claim(det, c) for c in claims))
    if kind == "pick":
        if "claim" not in obj:
            raise WireError("a pick move carries a 'claim'")
        return Move("pick", claim=json_to_claim(det, obj["claim"]))
    if kind == "witness":
        if "target" not in obj:
            raise WireError("a witness move carries a 'target'")
        return Move("witness", target=json_to_point(det, obj["target"]))
    raise WireError(f"unknown move kind {kind!r}")


# ---------------------------------------------------------------------------
# claim text syntax for the command line:
#   "x <= y"           pair (state names, {a,b} subsets)
#   "d(x, y) <= 1/4"   bounded pair
#   "x ~> y"  /  "x ~> {y, z}"   nearness

def parse_claim_text(det: DetSystem, text: str) -> PointClaim:
    s = text.strip()
    if s.startswith("d(") and "<=" in s:
        inside, _, bound = s.partition("<=")
        inside = inside.strip()
        if not inside.startswith("d(") or not inside.endswith(")"):
            raise WireError(f"cannot parse bounded claim {text!r}")
        parts = _split_args(inside[2:-1])
        if len(parts) != 2:
            raise WireError(f"bounded claims take two points: {text!r}")
        try:
            eps = parse_ratio(bound.strip())
        except RatioError as exc:
            raise WireError(str(exc)) from None
        return bounded_claim(
            _parse_point_text(det, parts[0]), _parse_point_text(det, parts[1]), eps
        )
    if "~>" in s:
        lhs, _, rhs = s.partition("~>")
        rhs = rhs.strip()
        lhs_pt = _parse_point_text(det, lhs.strip())
        if rhs.startswith("{") and det.instance.name not in ("trace-inclusion", "btop-nfa"):
            targets = [t.strip() for t in rhs[1:-1].split(",") if t.strip()]
            return nearness_claim(lhs_pt, [_parse_point_text(det, t) for t in targets])
        return nearness_claim(lhs_pt, [_parse_point_text(det, rhs)])
    if "<=" in s:
        lhs, _, rhs = s.partition("<=")
        a = _parse_point_text(det, lhs.strip())
        b = _parse_point_text(det, rhs.strip())
        if det.instance.quantitative:
            raise WireError("quantitative claims need a bound: d(x, y) <= p/q")
        return pair_claim(a, b)
    raise WireError(
        f"cannot parse claim {text!r}; use 'x <= y', 'd(x,y) <= p/q' or 'x ~> y'"
    )


def _split_args(s: str) -> list[str]:
    parts = []
    depth = 0
    current = ""
    for ch in s:
        if ch == "," and depth == 0:
            parts.append(current)
            current = ""
            continue
        if ch in "{(":
            depth += 1
        if ch in "})":
            depth -= 1
        current += ch
    parts.append(current)
    return [p for p in parts if p.strip()]


def _parse_point_text(det: DetSystem, token: str) -> int:
    token = token.strip()
    if token.startswith("{") and token.endswith("}"):
        names = [t.strip() for t in token[1:-1].split(",") if t.strip()]
        return json_to_point(det, names)
    return json_to_point(det, token)


def claim_to_text(det: DetSystem, claim: PointClaim) -> str:
    if claim.kind == "pair":
        return f"{det.point_name(claim.lhs)} <= {det.point_name(claim.rhs)}"
    if claim.kind == "bounded":
        return (
            f"d({det.point_name(claim.lhs)}, {det.point_name(claim.rhs)}) "
            f"<= {format_ratio(claim.eps)}"
        )
    targets = ", ".join(det.point_name(t) for t in claim.targets)
    return f"{det.point_name(claim.lhs)} ~> {{{targets}}}"
