"""Command-line front door.

Verbs: solve, value, check, play, prove, serve, examples.  Exit codes:
0 success, 2 usage, 3 model validation, 4 cap or incompleteness,
5 oracle discrepancy.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from random import Random

from .bundled import BUNDLED, DEFAULT_FOR_SEMANTICS, bundled_document, bundled_model
from .coalgebra import Model, ModelFormatError, ModelInvariantError, parse_model
from .corpus import random_model_for
from .game import (
    GameError,
    IllegalMoveError,
    IncompleteCarrierError,
    Move,
    pair_claim,
    session_move,
    session_new,
    value_table,
    winning_region_inf,
    winning_region_n,
)
from .graded import DeterminizationCapError, InstanceError, instance_by_name, predeterminize
from .oracle import theorem_check
from .ratio import format_ratio
from . import rellogic
from .refinement import ClosureCapError
from .wire import WireError, claim_to_text, parse_claim_text

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MODEL = 3
EXIT_CAP = 4
EXIT_DISCREPANCY = 5


def _load_model(args) -> Model:
    if getattr(args, "system", None):
        path = Path(args.system)
        if not path.exists():
            raise ModelInvariantError(f"no such system file: {path}")
        return parse_model(path.read_text(encoding="utf-8"))
    name = DEFAULT_FOR_SEMANTICS.get(args.semantics)
    if name is None:
        raise ModelInvariantError("no --system given and no bundled default for this semantics")
    return bundled_model(name)


def _parse_rounds(text: str):
    if text == "inf":
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"rounds must be a natural number or 'inf', got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError("rounds must be non-negative")
    return value


def _det(args, model: Model):
    inst = instance_by_name(args.semantics)
    options = {}
    if getattr(args, "powerset_cap", None) is not None:
        options["powerset_cap"] = args.powerset_cap
    if getattr(args, "point_cap", None) is not None:
        options["point_cap"] = args.point_cap
    try:
        return predeterminize(model, inst, **options)
    except DeterminizationCapError:
        rounds = getattr(args, "rounds", None)
        if rounds is None:
            raise
        return predeterminize(model, inst, depth_limit=rounds, **options)


def cmd_solve(args) -> int:
    model = _load_model(args)
    det = _det(args, model)
    inst = det.instance
    if inst.quantitative:
        print("semantics is quantitative; use the 'value' verb", file=sys.stderr)
        return EXIT_USAGE
    report = (
        winning_region_inf(det) if args.rounds is None else winning_region_n(det, args.rounds)
    )
    if args.claim:
        claim = parse_claim_text(det, args.claim)
        if report.wins(claim):
            print(f"Duplicator wins: {claim_to_text(det, claim)}")
            move = report.duplicator_move(
                claim if claim.kind != "nearness" else pair_claim(
                    claim.lhs,
                    next(t for t in claim.targets if report.wins(pair_claim(claim.lhs, t))),
                ),
                args.rounds,
            )
            shown = ", ".join(claim_to_text(det, c) for c in (move or [])[:12])
            more = "" if not move or len(move) <= 12 else f" (+{len(move) - 12} more)"
            print(f"canonical move: {{{shown}}}{more}")
        else:
            print(f"Spoiler wins: {claim_to_text(det, claim)}")
            try:
                word = report.distinguishing_word(claim)
                rendered = "".join(word) if word else "<empty word>"
                print(f"distinguishing word: {rendered}")
            except GameError:
                pass
    else:
        print(json.dumps(report.to_summary(), indent=2))
        for (a, b) in sorted(report.region):
            print(f"  {det.point_name(a)} <= {det.point_name(b)}")
    return EXIT_OK


def cmd_value(args) -> int:
    model = _load_model(args)
    det = _det(args, model)
    if not det.instance.quantitative:
        print("semantics is qualitative; use the 'solve' verb", file=sys.stderr)
        return EXIT_USAGE
    report = value_table(det, args.rounds)
    assert report.tables is not None
    print(json.dumps(report.to_summary(), indent=2))
    for (a, b), v in sorted(report.tables[-1].items()):
        print(f"  d({det.point_name(a)}, {det.point_name(b)}) = {format_ratio(v)}")
    return EXIT_OK


def cmd_check(args) -> int:
    if not args.oracle:
        print("check requires --oracle", file=sys.stderr)
        return EXIT_USAGE
    inst = instance_by_name(args.semantics)
    models: list[Model] = []
    if args.system:
        models.append(_load_model(args))
    elif args.random:
        rng = Random(args.seed)
        for _ in range(args.random):
            models.append(random_model_for(inst.model_kind, rng))
    else:
        models.append(bundled_model(DEFAULT_FOR_SEMANTICS[inst.name]))
    total = 0
    failures = 0
    for i, model in enumerate(models):
        report = theorem_check(inst, model, args.rounds)
        total += report.positions_checked
        if not report.ok:
            failures += len(report.discrepancies)
            print(f"model #{i}: {len(report.discrepancies)} discrepancies")
            for d in report.discrepancies[:10]:
                print(f"  {d}")
    print(f"{failures} discrepancies across {total} positions ({len(models)} models)")
    return EXIT_OK if failures == 0 else EXIT_DISCREPANCY


def cmd_play(args) -> int:
    model = _load_model(args)
    det = _det(args, model)
    claim = parse_claim_text(det, args.claim)
    state = session_new(det, claim, args.role, args.rounds)
    out = sys.stdout

    def show() -> None:
        print(f"position: {claim_to_text(det, state.position)}", file=out)
        if state.pending and state.human_turn():
            print("pending claims:", file=out)
            for idx, c in enumerate(state.pending):
                print(f"  [{idx}] {claim_to_text(det, c)}", file=out)
        if state.status != "ongoing":
            print(f"result: {state.status} ({state.explanation})", file=out)

    print(f"you play {args.role}; engine plays the other role", file=out)
    show()
    while state.status == "ongoing":
        if not state.human_turn():
            break
        if state.phase == "duplicator":
            prompt = "your claims (semicolon separated, or 'concede'): "
        elif state.phase == "spoiler":
            prompt = "pick a claim index (or 'concede'): "
        else:
            prompt = "pick a witness point (or 'concede'): "
        print(prompt, end="", flush=True)
        line = sys.stdin.readline()
        if not line:
            print("\nno more input; conceding", file=out)
            line = "concede"
        line = line.strip()
        try:
            if line == "concede":
                move = Move("concede")
            elif state.phase == "duplicator":
                claims = tuple(
                    parse_claim_text(det, part) for part in line.split(";") if part.strip()
                )
                move = Move("claims", claims=claims)
            elif state.phase == "spoiler":
                move = Move("pick", claim=state.pending[int(line)])
            else:
                from .wire import _parse_point_text

                move = Move("witness", target=_parse_point_text(det, line))
            session_move(state, move)
        except (IllegalMoveError, WireError, ValueError, IndexError) as exc:
            print(f"rejected: {exc}", file=out)
            continue
        show()
    if state.status == "ongoing":
        print("session left ongoing", file=out)
    return EXIT_OK


def cmd_prove(args) -> int:
    labels = args.labels.split(",") if args.labels else ["a", "b"]
    theory = rellogic.trace_theory([l.strip() for l in labels if l.strip()])
    goal = _parse_goal(theory, args.goal)
    try:
        proof = rellogic.prove(theory, goal, args.budget)
    except rellogic.SearchBudgetError:
        print("budget exhausted: inconclusive")
        return EXIT_CAP
    if proof is None:
        print("no proof found (search is incomplete; this is not a refutation)")
        return EXIT_OK
    print(rellogic.serialize_proof(proof))
    return EXIT_OK


def _parse_goal(theory, text: str):
    """Goal syntax: '{x<=y, y<=z} |-1 a(x) <= a(z)' (context optional)."""
    s = text.strip()
    edges = []
    carrier: set[str] = set()
    if s.startswith("{"):
        end = s.index("}")
        ctx_part = s[1:end]
        s = s[end + 1 :].strip()
        for piece in ctx_part.split(","):
            piece = piece.strip()
            if not piece:
                continue
            left, _, right = piece.partition("<=")
            left, right = left.strip(), right.strip()
            if not left or not right:
                raise WireError(f"bad context edge {piece!r}")
            carrier.update([left, right])
            edges.append((rellogic.LE, (left, right)))
    if not s.startswith("|-"):
        raise WireError("goal needs a '|-<depth>' marker")
    s = s[2:]
    depth_str = ""
    while s and s[0].isdigit():
        depth_str += s[0]
        s = s[1:]
    if not depth_str:
        raise WireError("goal needs a depth after '|-'")
    depth = int(depth_str)
    rel = rellogic.LE if "<=" in s else rellogic.EQ
    sep = "<=" if rel == rellogic.LE else "="
    left, _, right = s.partition(sep)
    lhs = _parse_term(theory, left.strip(), carrier)
    rhs = _parse_term(theory, right.strip(), carrier)
    ctx = rellogic.context(sorted(carrier), edges)
    return rellogic.Judgement(ctx, depth, rel, (lhs, rhs))


def _parse_term(theory, text: str, carrier: set[str]):
    tokens = _tokenize_term(text)
    pos = 0

    def parse_sum():
        nonlocal pos
        out = parse_item()
        while pos < len(tokens) and tokens[pos] == "+":
            pos += 1
            out = rellogic.app(theory.signature, "+", out, parse_item())
        return out

    def parse_item():
        nonlocal pos
        if pos >= len(tokens):
            raise WireError(f"unexpected end of term in {text!r}")
        tok = tokens[pos]
        pos += 1
        if tok == "(":
            inner = parse_sum()
            if pos >= len(tokens) or tokens[pos] != ")":
                raise WireError(f"unbalanced parentheses in {text!r}")
            pos += 1
            return inner
        if tok in ("+", ")"):
            raise WireError(f"unexpected {tok!r} in {text!r}")
        if pos < len(tokens) and tokens[pos] == "(":
            pos += 1
            inner = parse_sum()
            if pos >= len(tokens) or tokens[pos] != ")":
                raise WireError(f"unbalanced parentheses in {text!r}")
            pos += 1
            return rellogic.app(theory.signature, tok, inner)
        if tok == "bot":
            return rellogic.app(theory.signature, "bot")
        carrier.add(tok)
        return rellogic.var(tok)

    term = parse_sum()
    if pos != len(tokens):
        raise WireError(f"trailing tokens in term {text!r}")
    return term


def _tokenize_term(text: str) -> list[str]:
    tokens = []
    current = ""
    for ch in text:
        if ch in "+()":
            if current:
                tokens.append(current)
                current = ""
            tokens.append(ch)
        elif ch.isspace():
            if current:
                tokens.append(current)
                current = ""
        else:
            current += ch
    if current:
        tokens.append(current)
    return tokens


def cmd_serve(args) -> int:
    import uvicorn

    from .service import build_app

    uvicorn.run(build_app(), host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_examples(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in sorted(BUNDLED):
        path = out_dir / f"{name}.json"
        path.write_text(bundled_document(name) + "\n", encoding="utf-8")
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="confgame",
        description="exact conformance-game engine for finite state-based systems",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, rounds_default="inf"):
        p.add_argument("--system", help="system description file (JSON)")
        p.add_argument("--semantics", required=True, help="semantics instance name")
        p.add_argument("--rounds", type=_parse_rounds, default=_parse_rounds(rounds_default))
        p.add_argument("--powerset-cap", type=int, default=None)
        p.add_argument("--point-cap", type=int, default=None)

    p = sub.add_parser("solve", help="winning regions / claim verdicts")
    common(p)
    p.add_argument("--claim", help="claim to decide, e.g. 'x2 <= x1'")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("value", help="exact value tables for quantitative semantics")
    common(p, rounds_default="3")
    p.set_defaults(func=cmd_value)

    p = sub.add_parser("check", help="theorem-equivalence oracle checks")
    common(p, rounds_default="3")
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--random", type=int, default=0, help="check N random models")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("play", help="interactive session against the engine")
    common(p)
    p.add_argument("--role", choices=["spoiler", "duplicator"], required=True)
    p.add_argument("--claim", required=True)
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("prove", help="proof search in the trace theory")
    p.add_argument("--goal", required=True, help="e.g. '{x<=y} |-1 a(x) <= a(y)'")
    p.add_argument("--budget", type=int, default=20000)
    p.add_argument("--labels", default="a,b")
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("serve", help="start the local session API")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("examples", help="write the bundled systems to disk")
    p.add_argument("--out", default="systems")
    p.set_defaults(func=cmd_examples)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ModelFormatError, ModelInvariantError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (DeterminizationCapError, IncompleteCarrierError, ClosureCapError) as exc:
        print(f"cap error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (InstanceError, GameError, WireError, rellogic.LogicError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
