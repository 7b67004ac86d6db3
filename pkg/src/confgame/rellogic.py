"""Graded relational-algebraic logic: terms, judgements, proof checking and
bounded goal-directed proof search.

A theory has a relational signature with infinitary-free Horn axioms, a
graded signature of operations of depth 0 or 1, and graded axioms, which are
judgements in a fixed context.  Proofs are trees over four rules:

* Ctx     use an edge of the context (depth 0)
* RelAx   apply a Horn axiom (or a structural equality axiom) under a
          uniform-depth substitution
* Ax      apply a graded axiom under a uniform-depth substitution; the
          premises are the substituted context edges of the axiom
* Mor     apply an operation to related argument tuples

``check_proof`` validates a tree node by node; ``prove`` searches backwards
for inequality goals in the built-in trace theory (the search is sound but
deliberately incomplete; every found proof re-checks).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from .ratio import ONE, ZERO, format_ratio


class LogicError(ValueError):
    pass


class ProofError(ValueError):
    """A rejected proof node: rule name, violated condition and path."""

    def __init__(self, path: tuple[int, ...], rule: str, reason: str):
        self.path = path
        self.rule = rule
        self.reason = reason
        at = "/".join(map(str, path)) or "root"
        super().__init__(f"{rule} node at {at}: {reason}")


class SearchBudgetError(RuntimeError):
    """Proof search ran out of budget; inconclusive, not a refutation."""


# ---------------------------------------------------------------------------
# signatures and terms

@dataclass(frozen=True)
class Operation:
    name: str
    arity: int
    depth: int

    def __post_init__(self) -> None:
        if self.depth not in (0, 1):
            raise LogicError("only depth-0 and depth-1 operations are supported")
        if self.arity < 0:
            raise LogicError("operation arity must be a natural number")


@dataclass(frozen=True)
class GradedSignature:
    operations: tuple[Operation, ...]

    def __post_init__(self) -> None:
        names = [op.name for op in self.operations]
        if len(set(names)) != len(names):
            raise LogicError("operation names must be unique")
        object.__setattr__(self, "_by_name", {op.name: op for op in self.operations})

    def op(self, name: str) -> Operation:
        try:
            return self._by_name[name]  # type: ignore[attr-defined]
        except KeyError:
            raise LogicError(f"unknown operation {name!r}") from None

    def has_op(self, name: str) -> bool:
        return name in self._by_name  # type: ignore[attr-defined]


@dataclass(frozen=True)
class Term:
    """Variable leaf or operation node, with its cached uniform-depth set.

    The depth set of a term is either a singleton {depth_min} or the upward
    closed [depth_min, oo) when the term contains no variables (constants
    inhabit every depth above their own).
    """

    head: Optional[str]
    args: tuple["Term", ...]
    var: Optional[str]
    depth_min: int
    depth_flex: bool

    def admits_depth(self, k: int) -> bool:
        return k == self.depth_min or (self.depth_flex and k >= self.depth_min)

    def is_var(self) -> bool:
        return self.var is not None

    def variables(self) -> frozenset[str]:
        if self.var is not None:
            return frozenset([self.var])
        out: frozenset[str] = frozenset()
        for a in self.args:
            out |= a.variables()
        return out


def var(name: str) -> Term:
    return Term(None, (), name, 0, False)


def app(sig: GradedSignature, name: str, *args: Term) -> Term:
    op = sig.op(name)
    if len(args) != op.arity:
        raise LogicError(f"operation {name!r} expects {op.arity} arguments, got {len(args)}")
    if op.arity == 0:
        return Term(name, (), None, op.depth, True)
    lo = max(a.depth_min for a in args)
    fixed = [a.depth_min for a in args if not a.depth_flex]
    if fixed:
        k = fixed[0]
        if any(f != k for f in fixed) or k < lo:
            raise LogicError(f"arguments of {name!r} have no common uniform depth")
        flex = False
    else:
        k = lo
        flex = True
    return Term(name, tuple(args), None, k + op.depth, flex)


def substitute(sig: GradedSignature, term: Term, mapping: dict[str, Term]) -> Term:
    if term.var is not None:
        if term.var not in mapping:
            raise LogicError(f"substitution misses variable {term.var!r}")
        return mapping[term.var]
    if not term.args:
        return term
    return app(sig, term.head, *(substitute(sig, a, mapping) for a in term.args))


def format_term(t: Term) -> str:
    if t.var is not None:
        return t.var
    if not t.args:
        return t.head
    if t.head == "+":
        parts = []
        for a in t.args:
            s = format_term(a)
            parts.append(f"({s})" if a.head == "+" and a is t.args[1] else s)
        return "+".join(parts)
    return f"{t.head}({', '.join(format_term(a) for a in t.args)})"


# ---------------------------------------------------------------------------
# relations, edges, judgements

# A relation symbol is a plain name; the pseudometric family carries a
# rational parameter, written de[eps].
RelSym = tuple[str, Optional[Fraction]]

EQ: RelSym = ("=", None)
LE: RelSym = ("<=", None)


def de(eps: Fraction) -> RelSym:
    return ("de", Fraction(eps))


def format_rel(rel: RelSym) -> str:
    name, param = rel
    return name if param is None else f"{name}[{format_ratio(param)}]"


@dataclass(frozen=True)
class ContextStructure:
    """Finite relational structure: a carrier of variables plus edges."""

    carrier: tuple[str, ...]
    edges: frozenset[tuple[RelSym, tuple[str, ...]]]

    def __post_init__(self) -> None:
        if len(set(self.carrier)) != len(self.carrier):
            raise LogicError("context carrier has duplicate variables")
        members = set(self.carrier)
        for rel, args in self.edges:
            if rel[0] == "=":
                raise LogicError("contexts carry relational edges only, not equalities")
            for a in args:
                if a not in members:
                    raise LogicError(f"edge variable {a!r} not in the context carrier")

    def key(self):
        return (self.carrier, tuple(sorted(self.edges, key=_edge_sort_key)))


def _edge_sort_key(edge):
    rel, args = edge
    return (rel[0], rel[1] is not None, rel[1] or ZERO, args)


def context(carrier: Iterable[str], edges: Iterable[tuple[RelSym, tuple[str, ...]]] = ()) -> ContextStructure:
    return ContextStructure(tuple(carrier), frozenset(edges))


@dataclass(frozen=True)
class Judgement:
    context: ContextStructure
    depth: int
    rel: RelSym
    terms: tuple[Term, ...]

    def __post_init__(self) -> None:
        if self.depth < 0:
            raise LogicError("judgement depth must be non-negative")
        for t in self.terms:
            if not t.admits_depth(self.depth):
                raise LogicError(
                    f"term {format_term(t)} does not have uniform depth {self.depth}"
                )

    def render(self) -> str:
        sep = f" {format_rel(self.rel)} " if self.rel in (EQ, LE) else ", "
        body = sep.join(format_term(t) for t in self.terms)
        if self.rel not in (EQ, LE):
            body = f"{format_rel(self.rel)}({body})"
        return f"|-{self.depth} {body}"


# ---------------------------------------------------------------------------
# theories

@dataclass(frozen=True)
class HornClause:
    """Premises => conclusion over variables; rel parameters may be
    expressions in the clause's rational parameters."""

    name: str
    variables: tuple[str, ...]
    premises: tuple[tuple[object, tuple[str, ...]], ...]
    conclusion: tuple[object, tuple[str, ...]]
    params: tuple[str, ...] = ()


def _eval_rel(spec: object, binding: dict[str, Fraction]) -> RelSym:
    """Relation spec: a RelSym, or ("de", expr) with a small expression
    language over the clause parameters."""
    if isinstance(spec, tuple) and spec and spec[0] in ("=", "<="):
        return spec  # concrete
    if isinstance(spec, tuple) and spec[0] == "de":
        return ("de", _eval_expr(spec[1], binding))
    raise LogicError(f"bad relation spec {spec!r}")


def _eval_expr(expr: object, binding: dict[str, Fraction]) -> Fraction:
    if isinstance(expr, Fraction):
        return expr
    if isinstance(expr, str):
        if expr not in binding:
            raise LogicError(f"unbound rational parameter {expr!r}")
        return binding[expr]
    if isinstance(expr, tuple) and expr[0] == "oplus":
        return min(ONE, _eval_expr(expr[1], binding) + _eval_expr(expr[2], binding))
    if isinstance(expr, tuple) and expr[0] == "mix":
        p = _eval_expr(expr[1], binding)
        return p * _eval_expr(expr[2], binding) + (ONE - p) * _eval_expr(expr[3], binding)
    raise LogicError(f"bad rational expression {expr!r}")


@dataclass(frozen=True)
class GradedAxiom:
    """A judgement-shaped axiom: context, depth and conclusion edge, with
    terms over the context carrier."""

    name: str
    ctx: ContextStructure
    depth: int
    rel: object  # relation spec
    terms: tuple[Term, ...]
    params: tuple[str, ...] = ()


@dataclass(frozen=True)
class Theory:
    name: str
    signature: GradedSignature
    relations: tuple[str, ...]  # relation names besides "="; "de" is the parametric family
    horn: tuple[HornClause, ...]
    axioms: tuple[GradedAxiom, ...]

    def __post_init__(self) -> None:
        for ax in self.axioms:
            if ax.depth > 1:
                raise LogicError("graded axioms must have depth at most 1")
        object.__setattr__(self, "_axiom_by_name", {a.name: a for a in self.axioms})
        object.__setattr__(
            self, "_horn_by_name", {c.name: c for c in self.horn + self._equality_clauses()}
        )

    def axiom(self, name: str) -> GradedAxiom:
        try:
            return self._axiom_by_name[name]  # type: ignore[attr-defined]
        except KeyError:
            raise LogicError(f"unknown graded axiom {name!r}") from None

    def clause(self, name: str) -> HornClause:
        try:
            return self._horn_by_name[name]  # type: ignore[attr-defined]
        except KeyError:
            raise LogicError(f"unknown Horn clause {name!r}") from None

    def _equality_clauses(self) -> tuple[HornClause, ...]:
        """The structural axioms for equality: reflexivity, symmetry,
        transitivity and replacement into each relation."""
        out = [
            HornClause("eq-refl", ("x",), (), (EQ, ("x", "x"))),
            HornClause("eq-sym", ("x", "y"), ((EQ, ("x", "y")),), (EQ, ("y", "x"))),
            HornClause(
                "eq-trans",
                ("x", "y", "z"),
                ((EQ, ("x", "y")), (EQ, ("y", "z"))),
                (EQ, ("x", "z")),
            ),
        ]
        for rel in self.relations:
            if rel == "<=":
                out.append(
                    HornClause(
                        "eq-le", ("x", "y"), ((EQ, ("x", "y")),), (LE, ("x", "y"))
                    )
                )
            if rel == "de":
                out.append(
                    HornClause(
                        "eq-de",
                        ("x", "y"),
                        ((EQ, ("x", "y")),),
                        (("de", ZERO), ("x", "y")),
                    )
                )
        return tuple(out)


def trace_theory(labels: Sequence[str]) -> Theory:
    """Join semilattice with bottom at depth 0 and one unary depth-1
    operation per action, with the action operations preserving joins and
    bottom."""
    ops = [Operation("+", 2, 0), Operation("bot", 0, 0)]
    ops += [Operation(a, 1, 1) for a in labels]
    sig = GradedSignature(tuple(ops))
    x, y, z = var("x"), var("y"), var("z")
    axioms = [
        GradedAxiom("bot-least", context(["x"]), 0, LE, (app(sig, "bot"), x)),
        GradedAxiom("plus-upper", context(["x", "y"]), 0, LE, (x, app(sig, "+", x, y))),
        GradedAxiom(
            "plus-sup",
            context(["x", "y", "z"], [(LE, ("x", "z")), (LE, ("y", "z"))]),
            0,
            LE,
            (app(sig, "+", x, y), z),
        ),
        GradedAxiom("plus-comm", context(["x", "y"]), 0, EQ, (app(sig, "+", x, y), app(sig, "+", y, x))),
        GradedAxiom(
            "plus-assoc",
            context(["x", "y", "z"]),
            0,
            EQ,
            (app(sig, "+", app(sig, "+", x, y), z), app(sig, "+", x, app(sig, "+", y, z))),
        ),
        GradedAxiom("plus-idem", context(["x"]), 0, EQ, (app(sig, "+", x, x), x)),
        GradedAxiom("plus-unit", context(["x"]), 0, EQ, (app(sig, "+", x, app(sig, "bot")), x)),
    ]
    for a in labels:
        axioms.append(
            GradedAxiom(
                f"{a}-dist",
                context(["x", "y"]),
                1,
                EQ,
                (
                    app(sig, a, app(sig, "+", x, y)),
                    app(sig, "+", app(sig, a, x), app(sig, a, y)),
                ),
            )
        )
        axioms.append(
            GradedAxiom(
                f"{a}-strict",
                context([]),
                1,
                EQ,
                (app(sig, a, app(sig, "bot")), app(sig, "bot")),
            )
        )
    horn = (
        HornClause("le-refl", ("x",), (), (LE, ("x", "x"))),
        HornClause("le-trans", ("x", "y", "z"), ((LE, ("x", "y")), (LE, ("y", "z"))), (LE, ("x", "z"))),
    )
    return Theory("trace", sig, ("<=",), horn, tuple(axioms))


def ptrace_theory(labels: Sequence[str], weights: Sequence[Fraction]) -> Theory:
    """Barycentric (convex combination) theory over a finite weight set,
    with action operations distributing over mixtures.  Checker support
    only; the weight set must be closed under p -> 1-p for the skew
    commutativity axiom to be expressible."""
    weight_set = sorted({Fraction(w) for w in weights} | {ONE - Fraction(w) for w in weights})
    for w in weight_set:
        if not ZERO < w < ONE:
            raise LogicError("mixture weights must lie strictly between 0 and 1")
    ops = [Operation(f"mix[{format_ratio(p)}]", 2, 0) for p in weight_set]
    ops += [Operation(a, 1, 1) for a in labels]
    sig = GradedSignature(tuple(ops))
    x, y, z = var("x"), var("y"), var("z")
    axioms: list[GradedAxiom] = []
    for p in weight_set:
        mix = f"mix[{format_ratio(p)}]"
        comix = f"mix[{format_ratio(ONE - p)}]"
        axioms.append(
            GradedAxiom(f"idem[{format_ratio(p)}]", context(["x"]), 0, EQ, (app(sig, mix, x, x), x))
        )
        axioms.append(
            GradedAxiom(
                f"skew-comm[{format_ratio(p)}]",
                context(["x", "y"]),
                0,
                EQ,
                (app(sig, mix, x, y), app(sig, comix, y, x)),
            )
        )
        axioms.append(
            GradedAxiom(
                f"convexity[{format_ratio(p)}]",
                ContextStructure(
                    ("x", "x2", "y", "y2"),
                    frozenset(
                        [
                            (("de", "e1"), ("x", "x2")),
                            (("de", "e2"), ("y", "y2")),
                        ]
                    ),
                ),
                0,
                ("de", ("mix", p, "e1", "e2")),
                (app(sig, mix, x, y), app(sig, mix, var("x2"), var("y2"))),
                params=("e1", "e2"),
            )
        )
        for a in labels:
            axioms.append(
                GradedAxiom(
                    f"{a}-hom[{format_ratio(p)}]",
                    context(["x", "y"]),
                    1,
                    EQ,
                    (
                        app(sig, a, app(sig, mix, x, y)),
                        app(sig, mix, app(sig, a, x), app(sig, a, y)),
                    ),
                )
            )
    horn = (
        HornClause("de-refl", ("x",), (), (("de", ZERO), ("x", "x"))),
        HornClause(
            "de-sym", ("x", "y"), ((("de", "e"), ("x", "y")),), (("de", "e"), ("y", "x")), params=("e",)
        ),
        HornClause(
            "de-weaken",
            ("x", "y"),
            ((("de", "e"), ("x", "y")),),
            (("de", ("oplus", "e", "f")), ("x", "y")),
            params=("e", "f"),
        ),
        HornClause(
            "de-triangle",
            ("x", "y", "z"),
            ((("de", "e"), ("x", "y")), (("de", "f"), ("y", "z"))),
            (("de", ("oplus", "e", "f")), ("x", "z")),
            params=("e", "f"),
        ),
    )
    return Theory("ptrace", sig, ("de",), horn, tuple(axioms))


# A ContextStructure wants hashable edges; allow parameter names inside
# "de" edge specs for axioms (they are instantiated before use).
def _edges_allow_specs(edges):
    return edges


# ---------------------------------------------------------------------------
# proofs

@dataclass(frozen=True)
class ProofNode:
    rule: str  # "Ctx" | "RelAx" | "Ax" | "Mor"
    conclusion: Judgement
    premises: tuple["ProofNode", ...] = ()
    name: Optional[str] = None  # clause or axiom or operation name
    subst: tuple[tuple[str, Term], ...] = ()
    params: tuple[tuple[str, Fraction], ...] = ()


def _subst_dict(node: ProofNode) -> dict[str, Term]:
    return dict(node.subst)


def check_proof(theory: Theory, node: ProofNode, _path: tuple[int, ...] = ()) -> Judgement:
    """Validate a proof tree and return its root conclusion."""
    for i, premise in enumerate(node.premises):
        check_proof(theory, premise, _path + (i,))
    rule = node.rule
    c = node.conclusion
    if rule == "Ctx":
        _check_ctx(theory, node, _path)
    elif rule == "RelAx":
        _check_relax(theory, node, _path)
    elif rule == "Ax":
        _check_ax(theory, node, _path)
    elif rule == "Mor":
        _check_mor(theory, node, _path)
    else:
        raise ProofError(_path, rule, "unknown rule")
    return c


def _fail(path, rule, reason):
    raise ProofError(path, rule, reason)


def _check_ctx(theory: Theory, node: ProofNode, path) -> None:
    c = node.conclusion
    if node.premises:
        _fail(path, "Ctx", "Ctx nodes have no premises")
    if c.depth != 0:
        _fail(path, "Ctx", "Ctx concludes at depth 0")
    if c.rel[0] == "=":
        _fail(path, "Ctx", "contexts carry no equality edges")
    if not all(t.is_var() for t in c.terms):
        _fail(path, "Ctx", "Ctx edges relate context variables")
    edge = (c.rel, tuple(t.var for t in c.terms))
    if edge not in c.context.edges:
        _fail(path, "Ctx", f"edge {c.render()} is not in the context")


def _instantiated_premises(theory, clause_premises, subst, binding, ctx, depth, path, rule):
    out = []
    for spec, arg_vars in clause_premises:
        rel = _eval_rel(spec, binding)
        try:
            terms = tuple(subst[v] for v in arg_vars)
        except KeyError as exc:
            _fail(path, rule, f"substitution misses variable {exc.args[0]!r}")
        out.append(Judgement(ctx, depth, rel, terms))
    return out


def _check_uniform(subst: dict[str, Term], k: int, path, rule) -> None:
    for name, term in subst.items():
        if not term.admits_depth(k):
            _fail(
                path,
                rule,
                f"substitution image {format_term(term)} for {name!r} lacks uniform depth {k}",
            )


def _check_relax(theory: Theory, node: ProofNode, path) -> None:
    c = node.conclusion
    clause = theory.clause(node.name) if node.name else _fail(path, "RelAx", "missing clause name")
    binding = dict(node.params)
    for p in clause.params:
        if p not in binding:
            _fail(path, "RelAx", f"missing rational parameter {p!r}")
    subst = _subst_dict(node)
    for v in clause.variables:
        if v not in subst:
            _fail(path, "RelAx", f"substitution misses clause variable {v!r}")
    _check_uniform(subst, c.depth, path, "RelAx")
    expected = _instantiated_premises(
        theory, clause.premises, subst, binding, c.context, c.depth, path, "RelAx"
    )
    got = [p.conclusion for p in node.premises]
    if got != expected:
        _fail(path, "RelAx", "premises do not match the substituted clause body")
    head_rel = _eval_rel(clause.conclusion[0], binding)
    head_terms = tuple(subst[v] for v in clause.conclusion[1])
    if c.rel != head_rel or c.terms != head_terms:
        _fail(path, "RelAx", "conclusion does not match the substituted clause head")


def _check_ax(theory: Theory, node: ProofNode, path) -> None:
    c = node.conclusion
    axiom = theory.axiom(node.name) if node.name else _fail(path, "Ax", "missing axiom name")
    binding = dict(node.params)
    for p in axiom.params:
        if p not in binding:
            _fail(path, "Ax", f"missing rational parameter {p!r}")
    subst = _subst_dict(node)
    for v in axiom.ctx.carrier:
        if v not in subst:
            _fail(path, "Ax", f"substitution misses axiom variable {v!r}")
    k = c.depth - axiom.depth
    if k < 0:
        _fail(path, "Ax", f"conclusion depth {c.depth} below the axiom depth {axiom.depth}")
    _check_uniform(subst, k, path, "Ax")
    expected = _instantiated_premises(
        theory,
        tuple((rel, args) for rel, args in sorted(axiom.ctx.edges, key=_edge_sort_key)),
        subst,
        binding,
        c.context,
        k,
        path,
        "Ax",
    )
    got = [p.conclusion for p in node.premises]
    if got != expected:
        _fail(path, "Ax", "premises do not match the substituted axiom context")
    head_rel = _eval_rel(axiom.rel, binding)
    head_terms = tuple(substitute(theory.signature, t, subst) for t in axiom.terms)
    if c.rel != head_rel or c.terms != head_terms:
        _fail(path, "Ax", "conclusion does not match the substituted axiom")


def _check_mor(theory: Theory, node: ProofNode, path) -> None:
    c = node.conclusion
    if not node.name:
        _fail(path, "Mor", "missing operation name")
    op = theory.signature.op(node.name)
    n = len(c.terms)
    for t in c.terms:
        if t.head != op.name or len(t.args) != op.arity:
            _fail(path, "Mor", "conclusion terms must all apply the cited operation")
    if len(node.premises) != op.arity:
        _fail(path, "Mor", f"expected {op.arity} premises, one per operand position")
    k = c.depth - op.depth
    if k < 0:
        _fail(path, "Mor", "conclusion depth below the operation depth")
    for j, premise in enumerate(node.premises):
        pj = premise.conclusion
        if pj.context != c.context:
            _fail(path, "Mor", "premise context differs from the conclusion context")
        if pj.depth != k:
            _fail(path, "Mor", f"premise depth {pj.depth} is not {k}")
        if pj.rel != c.rel:
            _fail(path, "Mor", "premise relation differs from the conclusion relation")
        if tuple(c.terms[i].args[j] for i in range(n)) != pj.terms:
            _fail(path, "Mor", f"premise {j} does not relate the {j}-th operands")
    # all operand terms must share the uniform depth k, which is enforced by
    # the premise judgements themselves (their terms admit depth k)


# ---------------------------------------------------------------------------
# serialization (stable textual trees for golden tests)

def serialize_proof(node: ProofNode, indent: int = 0) -> str:
    pad = "  " * indent
    bits = [node.rule]
    if node.name:
        bits.append(node.name)
    if node.params:
        bits.append("{" + ", ".join(f"{k}={format_ratio(v)}" for k, v in sorted(node.params)) + "}")
    if node.subst:
        bits.append(
            "[" + ", ".join(f"{k}:={format_term(t)}" for k, t in sorted(node.subst)) + "]"
        )
    line = f"{pad}{' '.join(bits)} :: {node.conclusion.render()}"
    return "\n".join([line] + [serialize_proof(p, indent + 1) for p in node.premises])


# ---------------------------------------------------------------------------
# proof construction helpers (each emits genuine rule instances)

def _refl(theory: Theory, ctx: ContextStructure, k: int, t: Term) -> ProofNode:
    return ProofNode(
        "RelAx",
        Judgement(ctx, k, LE, (t, t)),
        (),
        name="le-refl",
        subst=(("x", t),),
    )


def _trans(theory: Theory, left: ProofNode, right: ProofNode) -> ProofNode:
    a, b = left.conclusion.terms
    b2, c = right.conclusion.terms
    assert b == b2, "transitivity glue mismatch"
    j = left.conclusion
    return ProofNode(
        "RelAx",
        Judgement(j.context, j.depth, LE, (a, c)),
        (left, right),
        name="le-trans",
        subst=(("x", a), ("y", b), ("z", c)),
    )


def _axiom_node(theory: Theory, name: str, ctx: ContextStructure, k: int, subst: dict[str, Term], premises: tuple[ProofNode, ...] = ()) -> ProofNode:
    axiom = theory.axiom(name)
    rel = _eval_rel(axiom.rel, {})
    terms = tuple(substitute(theory.signature, t, subst) for t in axiom.terms)
    return ProofNode(
        "Ax",
        Judgement(ctx, k + axiom.depth, rel, terms),
        premises,
        name=name,
        subst=tuple(sorted(subst.items())),
    )


def _eq_to_le(theory: Theory, eq_node: ProofNode) -> ProofNode:
    a, b = eq_node.conclusion.terms
    j = eq_node.conclusion
    return ProofNode(
        "RelAx",
        Judgement(j.context, j.depth, LE, (a, b)),
        (eq_node,),
        name="eq-le",
        subst=(("x", a), ("y", b)),
    )


def _eq_sym(theory: Theory, eq_node: ProofNode) -> ProofNode:
    a, b = eq_node.conclusion.terms
    j = eq_node.conclusion
    return ProofNode(
        "RelAx",
        Judgement(j.context, j.depth, EQ, (b, a)),
        (eq_node,),
        name="eq-sym",
        subst=(("x", a), ("y", b)),
    )


def _eq_trans(theory: Theory, left: ProofNode, right: ProofNode) -> ProofNode:
    a, b = left.conclusion.terms
    _, c = right.conclusion.terms
    j = left.conclusion
    return ProofNode(
        "RelAx",
        Judgement(j.context, j.depth, EQ, (a, c)),
        (left, right),
        name="eq-trans",
        subst=(("x", a), ("y", b), ("z", c)),
    )


def _eq_refl(theory: Theory, ctx: ContextStructure, k: int, t: Term) -> ProofNode:
    return ProofNode(
        "RelAx", Judgement(ctx, k, EQ, (t, t)), (), name="eq-refl", subst=(("x", t),)
    )


def _mor(theory: Theory, opname: str, rel: RelSym, premises: tuple[ProofNode, ...]) -> ProofNode:
    sig = theory.signature
    op = sig.op(opname)
    j0 = premises[0].conclusion
    n = len(j0.terms)
    terms = tuple(
        app(sig, opname, *(premises[j].conclusion.terms[i] for j in range(op.arity)))
        for i in range(n)
    )
    return ProofNode(
        "Mor",
        Judgement(j0.context, j0.depth + op.depth, rel, terms),
        premises,
        name=opname,
    )


# ---------------------------------------------------------------------------
# goal-directed search for the trace theory

class _Prover:
    def __init__(self, theory: Theory, budget: int):
        self.theory = theory
        self.budget = budget
        self.memo: dict = {}

    def spend(self) -> None:
        self.budget -= 1
        if self.budget < 0:
            raise SearchBudgetError("proof search budget exhausted")

    # -- normalization: distribute actions over sums, erase action(bot) ----

    def normalize(self, ctx: ContextStructure, k: int, t: Term) -> tuple[Term, Optional[ProofNode]]:
        """Returns an equal normal form and a proof of the equality (or
        None when the term is already normal)."""
        sig = self.theory.signature
        if t.is_var() or not t.args:
            return t, None
        if t.head == "+":
            l, lp = self.normalize(ctx, k, t.args[0])
            r, rp = self.normalize(ctx, k, t.args[1])
            if lp is None and rp is None:
                return t, None
            lref = lp or _eq_refl(self.theory, ctx, k, l)
            rref = rp or _eq_refl(self.theory, ctx, k, r)
            return app(sig, "+", l, r), _mor(self.theory, "+", EQ, (lref, rref))
        # unary action term
        a = t.head
        u, up = self.normalize(ctx, k - 1, t.args[0])
        node: Optional[ProofNode] = None
        term = t
        if up is not None:
            node = _mor(self.theory, a, EQ, (up,))
            term = app(sig, a, u)
        if u.head == "bot":
            strict = _axiom_node(self.theory, f"{a}-strict", ctx, k - 1, {})
            node = strict if node is None else _eq_trans(self.theory, node, strict)
            return app(sig, "bot"), node
        if u.head == "+":
            dist = _axiom_node(
                self.theory, f"{a}-dist", ctx, k - 1, {"x": u.args[0], "y": u.args[1]}
            )
            node = dist if node is None else _eq_trans(self.theory, node, dist)
            inner = app(sig, "+", app(sig, a, u.args[0]), app(sig, a, u.args[1]))
            flat, fp = self.normalize(ctx, k, inner)
            if fp is not None:
                node = _eq_trans(self.theory, node, fp)
            return flat, node
        return term, node

    # -- core entailment ----------------------------------------------------

    def prove_le(self, ctx: ContextStructure, k: int, s: Term, t: Term) -> Optional[ProofNode]:
        key = (ctx.key(), k, "le", s, t)
        if key in self.memo:
            value = self.memo[key]
            return None if value == "busy" else value
        self.memo[key] = "busy"
        self.spend()
        node = self._prove_le(ctx, k, s, t)
        self.memo[key] = node
        return node

    def _prove_le(self, ctx, k, s, t) -> Optional[ProofNode]:
        theory = self.theory
        if s == t:
            return _refl(theory, ctx, k, s)
        s_nf, sp = self.normalize(ctx, k, s)
        t_nf, tp = self.normalize(ctx, k, t)
        if sp is not None or tp is not None:
            core = self.prove_le(ctx, k, s_nf, t_nf)
            if core is None:
                return None
            node = core
            if sp is not None:
                # from s = s_nf and s_nf <= t_nf conclude s <= t_nf
                node = _relax_replace_left(theory, sp, node)
            if tp is not None:
                # from s <= t_nf and t_nf = t conclude s <= t
                node = _relax_replace_right(theory, node, _eq_sym(theory, tp))
            return node
        if s.head == "bot":
            return _axiom_node(theory, "bot-least", ctx, k, {"x": t})
        if s.head == "+":
            left = self.prove_le(ctx, k, s.args[0], t)
            if left is None:
                return None
            right = self.prove_le(ctx, k, s.args[1], t)
            if right is None:
                return None
            return ProofNode(
                "Ax",
                Judgement(ctx, k, LE, (s, t)),
                (left, right),
                name="plus-sup",
                subst=tuple(sorted({"x": s.args[0], "y": s.args[1], "z": t}.items())),
            )
        # s is an atom: a variable or an action applied to a normal term
        return self._prove_atom_le(ctx, k, s, t)

    def _prove_atom_le(self, ctx, k, s, t) -> Optional[ProofNode]:
        theory = self.theory
        if t.head == "+":
            for side in (0, 1):
                sub = self.prove_le(ctx, k, s, t.args[side])
                if sub is not None:
                    return _trans(theory, sub, self._inject(ctx, k, t, side))
            return None
        return self._prove_atom_atom(ctx, k, s, t)

    def _inject(self, ctx, k, t: Term, side: int) -> ProofNode:
        """t.args[side] <= t for a binary sum t."""
        theory = self.theory
        l, r = t.args
        if side == 0:
            return _axiom_node(theory, "plus-upper", ctx, k, {"x": l, "y": r})
        # r <= r + l, and r + l = l + r
        upper = _axiom_node(theory, "plus-upper", ctx, k, {"x": r, "y": l})
        comm = _axiom_node(theory, "plus-comm", ctx, k, {"x": r, "y": l})
        return _relax_replace_right(theory, upper, comm)

    def _prove_atom_atom(self, ctx, k, s, t) -> Optional[ProofNode]:
        theory = self.theory
        if s.is_var() and t.is_var():
            return self._prove_var_var(ctx, k, s, t)
        if s.head is not None and s.head == t.head and len(s.args) == 1:
            sub = self.prove_le(ctx, k - 1, s.args[0], t.args[0])
            if sub is not None:
                return _mor(theory, s.head, LE, (sub,))
        return None

    def _prove_var_var(self, ctx, k, s, t) -> Optional[ProofNode]:
        """Reachability through the context edges, glued by transitivity."""
        theory = self.theory
        edges: dict[str, list[str]] = {}
        for rel, args in ctx.edges:
            if rel == LE and len(args) == 2:
                edges.setdefault(args[0], []).append(args[1])
        start, goal = s.var, t.var
        previous: dict[str, Optional[str]] = {start: None}
        queue = [start]
        while queue:
            cur = queue.pop(0)
            if cur == goal:
                break
            for nxt in sorted(edges.get(cur, [])):
                if nxt not in previous:
                    previous[nxt] = cur
                    queue.append(nxt)
        if goal not in previous:
            return None
        path = [goal]
        while previous[path[-1]] is not None:
            path.append(previous[path[-1]])
        path.reverse()

        def ctx_edge(a: str, b: str) -> ProofNode:
            node = ProofNode("Ctx", Judgement(ctx, 0, LE, (var(a), var(b))))
            if k == 0:
                return node
            # promote a depth-0 edge to depth k via the transitivity clause?
            # Edges are depth-0 judgements; at k > 0 the variables do not
            # admit depth k, so var-var goals only arise at depth 0.
            raise LogicError("context edges are depth-0 judgements")

        node = None
        for a, b in zip(path, path[1:]):
            step = ctx_edge(a, b)
            node = step if node is None else _trans(theory, node, step)
        return node


def _relax_replace_left(theory: Theory, eq_node: ProofNode, le_node: ProofNode) -> ProofNode:
    """From x = x' and x' <= y conclude x <= y (equality replacement)."""
    x, x2 = eq_node.conclusion.terms
    x2b, y = le_node.conclusion.terms
    assert x2 == x2b
    first = _eq_to_le(theory, eq_node)
    return _trans(theory, first, le_node)


def _relax_replace_right(theory: Theory, le_node: ProofNode, eq_node: ProofNode) -> ProofNode:
    """From x <= y and y = y' conclude x <= y'."""
    x, y = le_node.conclusion.terms
    yb, y2 = eq_node.conclusion.terms
    assert y == yb
    second = _eq_to_le(theory, eq_node)
    return _trans(theory, le_node, second)


def prove(theory: Theory, goal: Judgement, budget: int = 20000) -> Optional[ProofNode]:
    """Bounded backward search; any returned proof re-checks.

    The search handles inequality goals of the trace theory (and plain
    equality goals by normalization); failure is inconclusive since the
    strategy set is deliberately incomplete.
    """
    if goal.depth > 1:
        raise LogicError("search handles goals of depth at most 1")
    prover = _Prover(theory, budget)
    if goal.rel == LE:
        node = prover.prove_le(goal.context, goal.depth, *goal.terms)
    elif goal.rel == EQ:
        node = _prove_eq(prover, goal)
    else:
        raise LogicError(f"search does not handle relation {format_rel(goal.rel)}")
    if node is not None:
        check_proof(theory, node)
        if node.conclusion != goal:
            raise LogicError("internal error: proof concludes a different judgement")
    return node


def _prove_eq(prover: _Prover, goal: Judgement) -> Optional[ProofNode]:
    ctx, k = goal.context, goal.depth
    s, t = goal.terms
    if s == t:
        return _eq_refl(prover.theory, ctx, k, s)
    s_nf, sp = prover.normalize(ctx, k, s)
    t_nf, tp = prover.normalize(ctx, k, t)
    if s_nf != t_nf:
        return None
    left = sp or _eq_refl(prover.theory, ctx, k, s)  # s = nf
    if tp is None:
        return left  # t is already the normal form
    return _eq_trans(prover.theory, left, _eq_sym(prover.theory, tp))


# ---------------------------------------------------------------------------
# the admissibility bridge for trace inclusion

def encode_admissibility(det, pos_pair: tuple[int, int], claims: Sequence[tuple[int, int]]):
    """Encode a trace-inclusion admissibility query as a judgement.

    Context: one variable per determinized point, with the claimed pairs as
    edges.  Goal: the one-step behaviours of the position's sides, written
    as formal sums of action terms over point variables (the empty subset
    becomes the bottom constant), compared at depth 1.
    """
    if det.instance.name != "trace-inclusion":
        raise LogicError("the logic bridge covers the trace-inclusion instance")
    theory = trace_theory(det.model.labels)
    sig = theory.signature
    names = [det.point_name(i) for i in range(len(det.points))]
    empty = det.empty_point

    edges = []
    for (a, b) in claims:
        edges.append((LE, (names[a], names[b])))
    ctx = context(names, edges)

    def term_of(point_id: int) -> Term:
        step = det.step(point_id)
        parts = []
        for l, succ in enumerate(step.succ):
            if empty is not None and succ == empty:
                continue
            parts.append(app(sig, det.model.labels[l], var(names[succ])))
        if not parts:
            return app(sig, "bot")
        out = parts[0]
        for p in parts[1:]:
            out = app(sig, "+", out, p)
        return out

    goal = Judgement(ctx, 1, LE, (term_of(pos_pair[0]), term_of(pos_pair[1])))
    return theory, goal


def admissible_via_logic(det, pos_pair: tuple[int, int], claims: Sequence[tuple[int, int]], budget: int = 20000):
    """Prove the admissibility judgement for a trace-inclusion move; returns
    the proof or None (search incompleteness is possible, unsoundness is
    not: every proof re-checks and implies semantic admissibility)."""
    theory, goal = encode_admissibility(det, pos_pair, claims)
    return prove(theory, goal, budget)
