"""Parser for the typed STRIPS subset.

Text is lowercased before tokenizing (identifiers are case-insensitive) and
``;`` comments run to end of line.  Nesting is handled with an explicit stack
so arbitrarily deep input cannot overflow the interpreter stack: any input,
including random bytes, either parses or raises :class:`PddlError` with a
line/column position.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from sceneground.pddl.model import (
    EQUALITY,
    ROOT_TYPE,
    ActionSchema,
    Atom,
    DerivedRule,
    Domain,
    GroundAtom,
    GroundLiteral,
    Literal,
    ModelError,
    Plan,
    PlanStep,
    PredicateSignature,
    Problem,
    TypeHierarchy,
    valid_name,
)


class PddlError(ValueError):
    """A parse or validation error with a source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        where = f" at {line}:{col}" if line else ""
        super().__init__(f"{message}{where}")


# ---------------------------------------------------------------------------
# Tokenizing and nesting
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"[()]|[^\s();]+|;[^\n]*")


@dataclass(frozen=True)
class _Tok:
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line = 1
    line_start = 0
    pos = 0
    for m in _TOKEN_RE.finditer(text):
        # Track line numbers across the gap since the previous token.
        gap = text[pos : m.start()]
        line += gap.count("\n")
        if "\n" in gap:
            line_start = pos + gap.rfind("\n") + 1
        pos = m.start()
        tok = m.group(0)
        if tok.startswith(";"):
            continue
        toks.append(_Tok(tok, line, m.start() - line_start + 1))
    return toks


# A node is either a _Tok or a list whose first element position we remember.
_Node = _Tok | list


def _nest(toks: list[_Tok]) -> list[_Node]:
    """Group tokens into nested lists with an explicit stack."""
    root: list[_Node] = []
    stack: list[list[_Node]] = [root]
    opens: list[_Tok] = []
    for tok in toks:
        if tok.text == "(":
            new: list[_Node] = []
            stack[-1].append(new)
            stack.append(new)
            opens.append(tok)
        elif tok.text == ")":
            if len(stack) == 1:
                raise PddlError("unbalanced ')'", tok.line, tok.col)
            stack.pop()
            opens.pop()
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        tok = opens[-1]
        raise PddlError("unbalanced '('", tok.line, tok.col)
    return root


def _pos(node: _Node) -> tuple[int, int]:
    while isinstance(node, list):
        if not node:
            return (0, 0)
        node = node[0]
    return (node.line, node.col)


def _expect_tok(node: _Node, what: str) -> _Tok:
    if not isinstance(node, _Tok):
        line, col = _pos(node)
        raise PddlError(f"expected {what}, got a list", line, col)
    return node


def _expect_list(node: _Node, what: str) -> list[_Node]:
    if not isinstance(node, list):
        raise PddlError(f"expected {what}", node.line, node.col)
    return node


def _prepare(text: str | bytes, what: str) -> list[_Node]:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise PddlError(f"{what} is not valid UTF-8: {exc}") from None
    forms = _nest(_tokenize(text.lower()))
    if len(forms) != 1:
        raise PddlError(f"expected exactly one (define ...) form in {what}")
    form = _expect_list(forms[0], "(define ...)")
    if not form or _expect_tok(form[0], "define").text != "define":
        line, col = _pos(form)
        raise PddlError("expected (define ...)", line, col)
    return form


def _name_tok(node: _Node, what: str) -> _Tok:
    tok = _expect_tok(node, what)
    if not valid_name(tok.text):
        raise PddlError(f"bad {what} {tok.text!r}", tok.line, tok.col)
    return tok


def _var_tok(node: _Node) -> _Tok:
    tok = _expect_tok(node, "variable")
    if not tok.text.startswith("?") or not valid_name(tok.text[1:]):
        raise PddlError(f"expected a ?variable, got {tok.text!r}", tok.line, tok.col)
    return tok


def _typed_list(
    nodes: list[_Node], what: str, variables: bool
) -> list[tuple[str, str, int, int]]:
    """Parse ``a b - t c - s d`` into (name, type, line, col) with default type."""
    out: list[tuple[str, str, int, int]] = []
    pending: list[_Tok] = []
    i = 0
    while i < len(nodes):
        tok = _expect_tok(nodes[i], what)
        if tok.text == "-":
            if not pending:
                raise PddlError("dangling '-' in typed list", tok.line, tok.col)
            if i + 1 >= len(nodes):
                raise PddlError("missing type after '-'", tok.line, tok.col)
            typ = _name_tok(nodes[i + 1], "type name")
            for p in pending:
                out.append((p.text, typ.text, p.line, p.col))
            pending = []
            i += 2
            continue
        if variables:
            tok = _var_tok(nodes[i])
        else:
            tok = _name_tok(nodes[i], what)
        pending.append(tok)
        i += 1
    for p in pending:
        out.append((p.text, ROOT_TYPE, p.line, p.col))
    return out


# ---------------------------------------------------------------------------
# Formula helpers
# ---------------------------------------------------------------------------


def _flatten_and(node: _Node) -> list[_Node]:
    """Return conjuncts of ``(and ...)``, or the single formula itself."""
    lst = _expect_list(node, "a formula")
    if lst and isinstance(lst[0], _Tok) and lst[0].text == "and":
        return lst[1:]
    if not lst:
        return []
    return [lst]


def _parse_literal(node: _Node) -> tuple[str, list[_Tok], bool, int, int]:
    """Parse ``(p a b)`` or ``(not (p a b))`` into (pred, args, negated, pos)."""
    lst = _expect_list(node, "a literal")
    if not lst:
        line, col = _pos(node)
        raise PddlError("empty formula", line, col)
    head = _expect_tok(lst[0], "predicate name")
    negated = False
    if head.text == "not":
        if len(lst) != 2:
            raise PddlError("(not ...) takes one formula", head.line, head.col)
        lst = _expect_list(lst[1], "a negated atom")
        if not lst:
            raise PddlError("empty negated formula", head.line, head.col)
        head = _expect_tok(lst[0], "predicate name")
        negated = True
    if head.text != EQUALITY and not valid_name(head.text):
        raise PddlError(f"bad predicate name {head.text!r}", head.line, head.col)
    args = [_expect_tok(a, "an argument") for a in lst[1:]]
    return head.text, args, negated, head.line, head.col


# ---------------------------------------------------------------------------
# Domain parsing
# ---------------------------------------------------------------------------


def parse_domain(text: str | bytes) -> Domain:
    """Parse a domain file, enforcing all domain invariants.

    Raises :class:`PddlError` on any malformed input: syntax, duplicate
    names, cyclic types, effects on derived predicates, unstratified
    (cyclic) rules, observed predicates of arity other than 1 or 2.
    """
    form = _prepare(text, "domain")
    sections = form[1:]
    if not sections:
        raise PddlError("missing (domain NAME)")
    head = _expect_list(sections[0], "(domain NAME)")
    if (
        len(head) != 2
        or _expect_tok(head[0], "domain").text != "domain"
    ):
        line, col = _pos(sections[0])
        raise PddlError("expected (domain NAME)", line, col)
    dom_name = _name_tok(head[1], "domain name").text

    type_decls: list[tuple[str, str, int, int]] = []
    pred_decls: list[tuple[str, list[tuple[str, str, int, int]], int, int]] = []
    action_nodes: list[list[_Node]] = []
    derived_nodes: list[list[_Node]] = []

    for sec in sections[1:]:
        lst = _expect_list(sec, "a domain section")
        if not lst:
            continue
        key = _expect_tok(lst[0], "a section keyword").text
        if key == ":requirements":
            continue  # declarative hints; the subset is fixed anyway
        if key == ":types":
            type_decls.extend(_typed_list(lst[1:], "type name", variables=False))
        elif key == ":predicates":
            for p in lst[1:]:
                plist = _expect_list(p, "a predicate declaration")
                if not plist:
                    line, col = _pos(p)
                    raise PddlError("empty predicate declaration", line, col)
                first = _expect_tok(plist[0], "predicate name")
                if first.text == EQUALITY:
                    raise PddlError(
                        "'=' is builtin and cannot be declared", first.line, first.col
                    )
                name = _name_tok(plist[0], "predicate name")
                params = _typed_list(plist[1:], "parameter", variables=True)
                pred_decls.append((name.text, params, name.line, name.col))
        elif key == ":action":
            action_nodes.append(lst)
        elif key == ":derived":
            derived_nodes.append(lst)
        else:
            tok = lst[0]
            line, col = _pos(tok)
            raise PddlError(f"unsupported section {key!r}", line, col)

    # Types: parents referenced but not declared become children of the root.
    declared = {n for n, _, _, _ in type_decls}
    parents: list[tuple[str, str]] = []
    for name, parent, line, col in type_decls:
        if name == ROOT_TYPE:
            raise PddlError("cannot redeclare type 'object'", line, col)
        parents.append((name, parent))
    for _, parent, line, col in type_decls:
        if parent != ROOT_TYPE and parent not in declared:
            parents.append((parent, ROOT_TYPE))
            declared.add(parent)
    try:
        hierarchy = TypeHierarchy(tuple(dict.fromkeys(parents)))
    except ModelError as exc:
        raise PddlError(str(exc)) from None

    # Predicate kinds: heads of :derived rules are derived, the rest observed.
    derived_names: set[str] = set()
    for lst in derived_nodes:
        if len(lst) != 3:
            line, col = _pos(lst[0])
            raise PddlError("(:derived HEAD BODY) takes two forms", line, col)
        hd = _expect_list(lst[1], "a rule head")
        if not hd:
            line, col = _pos(lst[1])
            raise PddlError("empty rule head", line, col)
        derived_names.add(_name_tok(hd[0], "predicate name").text)

    sig_list: list[PredicateSignature] = []
    seen_preds: set[str] = set()
    for name, params, line, col in pred_decls:
        if name in seen_preds:
            raise PddlError(f"duplicate predicate {name!r}", line, col)
        seen_preds.add(name)
        if name == EQUALITY:
            raise PddlError("'=' is builtin and cannot be declared", line, col)
        for pname, ptyp, pline, pcol in params:
            if not hierarchy.contains(ptyp):
                raise PddlError(f"unknown type {ptyp!r}", pline, pcol)
        kind = "derived" if name in derived_names else "observed"
        try:
            sig_list.append(
                PredicateSignature(
                    name, tuple((v, t) for v, t, _, _ in params), kind
                )
            )
        except ModelError as exc:
            raise PddlError(str(exc), line, col) from None
    missing = derived_names - seen_preds
    if missing:
        raise PddlError(
            f"derived predicate {sorted(missing)[0]!r} is not declared in (:predicates ...)"
        )
    sigs = {s.name: s for s in sig_list}

    def check_atom_types(
        pred: str,
        args: list[_Tok],
        var_types: dict[str, str],
        line: int,
        col: int,
        where: str,
    ) -> Atom:
        if pred == EQUALITY:
            if len(args) != 2:
                raise PddlError("'=' takes two arguments", line, col)
            for a in args:
                if not a.text.startswith("?"):
                    raise PddlError(
                        f"'=' arguments must be variables, got {a.text!r}",
                        a.line,
                        a.col,
                    )
                if a.text not in var_types:
                    raise PddlError(
                        f"variable {a.text!r} is not declared", a.line, a.col
                    )
            return Atom(EQUALITY, tuple(a.text for a in args))
        sig = sigs.get(pred)
        if sig is None:
            raise PddlError(f"unknown predicate {pred!r} in {where}", line, col)
        if len(args) != sig.arity:
            raise PddlError(
                f"{pred!r} takes {sig.arity} args, got {len(args)}", line, col
            )
        for a, (_, want) in zip(args, sig.params):
            if not a.text.startswith("?"):
                raise PddlError(
                    f"constants are not supported; got {a.text!r}", a.line, a.col
                )
            have = var_types.get(a.text)
            if have is None:
                continue  # free rule variable; bound by matching facts
            if not hierarchy.is_subtype(have, want):
                raise PddlError(
                    f"{a.text} has type {have!r}, {pred!r} requires {want!r}",
                    a.line,
                    a.col,
                )
        return Atom(pred, tuple(a.text for a in args))

    # Actions.
    actions: list[ActionSchema] = []
    action_names: set[str] = set()
    for lst in action_nodes:
        if len(lst) < 2:
            line, col = _pos(lst[0])
            raise PddlError("(:action ...) missing a name", line, col)
        name_tok = _name_tok(lst[1], "action name")
        if name_tok.text in action_names:
            raise PddlError(
                f"duplicate action {name_tok.text!r}", name_tok.line, name_tok.col
            )
        action_names.add(name_tok.text)
        parts: dict[str, _Node] = {}
        i = 2
        while i < len(lst):
            key = _expect_tok(lst[i], "an action keyword").text
            if key not in (":parameters", ":precondition", ":effect"):
                tok = _expect_tok(lst[i], "keyword")
                raise PddlError(f"unexpected {key!r} in action", tok.line, tok.col)
            if i + 1 >= len(lst):
                tok = _expect_tok(lst[i], "keyword")
                raise PddlError(f"{key} missing its form", tok.line, tok.col)
            parts[key] = lst[i + 1]
            i += 2
        if ":parameters" not in parts or ":effect" not in parts:
            raise PddlError(
                f"action {name_tok.text!r} needs :parameters and :effect",
                name_tok.line,
                name_tok.col,
            )
        raw_params = _typed_list(
            _expect_list(parts[":parameters"], "a parameter list"),
            "parameter",
            variables=True,
        )
        var_types: dict[str, str] = {}
        for v, t, line, col in raw_params:
            if v in var_types:
                raise PddlError(f"duplicate parameter {v!r}", line, col)
            if not hierarchy.contains(t):
                raise PddlError(f"unknown type {t!r}", line, col)
            var_types[v] = t

        pre: list[Literal] = []
        if ":precondition" in parts:
            for c in _flatten_and(parts[":precondition"]):
                pred, args, negated, line, col = _parse_literal(c)
                atom = check_atom_types(pred, args, var_types, line, col, "precondition")
                for a in args:
                    if a.text not in var_types:
                        raise PddlError(
                            f"variable {a.text!r} is not a parameter", a.line, a.col
                        )
                pre.append(Literal(atom, negated))
        add: list[Atom] = []
        delete: list[Atom] = []
        for c in _flatten_and(parts[":effect"]):
            pred, args, negated, line, col = _parse_literal(c)
            if pred == EQUALITY:
                raise PddlError("'=' cannot appear in effects", line, col)
            atom = check_atom_types(pred, args, var_types, line, col, "effect")
            if sigs[pred].kind == "derived":
                raise PddlError(
                    f"effect on derived predicate {pred!r}", line, col
                )
            for a in args:
                if a.text not in var_types:
                    raise PddlError(
                        f"variable {a.text!r} is not a parameter", a.line, a.col
                    )
            (delete if negated else add).append(atom)
        actions.append(
            ActionSchema(
                name_tok.text,
                tuple((v, t) for v, t, _, _ in raw_params),
                tuple(pre),
                tuple(add),
                tuple(delete),
            )
        )

    # Derived rules.
    rules: list[DerivedRule] = []
    for lst in derived_nodes:
        hd = _expect_list(lst[1], "a rule head")
        head_name = _name_tok(hd[0], "predicate name")
        sig = sigs[head_name.text]
        head_params = _typed_list(hd[1:], "parameter", variables=True)
        if len(head_params) != sig.arity:
            raise PddlError(
                f"rule head for {head_name.text!r} has {len(head_params)} "
                f"args, signature says {sig.arity}",
                head_name.line,
                head_name.col,
            )
        var_types = {}
        head_vars: list[str] = []
        for (v, t, line, col), (_, declared_t) in zip(head_params, sig.params):
            if v in var_types:
                raise PddlError(f"duplicate head variable {v!r}", line, col)
            # An untyped head variable inherits the signature's type.
            var_types[v] = declared_t if t == ROOT_TYPE else t
            head_vars.append(v)
        body: list[Atom] = []
        for c in _flatten_and(lst[2]):
            pred, args, negated, line, col = _parse_literal(c)
            if negated:
                raise PddlError(
                    "negation is not allowed in rule bodies", line, col
                )
            if pred == EQUALITY:
                raise PddlError("'=' is not allowed in rule bodies", line, col)
            body.append(
                check_atom_types(pred, args, var_types, line, col, "rule body")
            )
        if not body:
            raise PddlError(
                f"rule for {head_name.text!r} has an empty body",
                head_name.line,
                head_name.col,
            )
        try:
            rules.append(DerivedRule(Atom(head_name.text, tuple(head_vars)), tuple(body)))
        except ModelError as exc:
            raise PddlError(str(exc), head_name.line, head_name.col) from None

    # Stratification: the dependency graph over derived predicates must be
    # acyclic (self-dependency included).
    deps: dict[str, set[str]] = {n: set() for n in derived_names}
    for rule in rules:
        for atom in rule.body:
            if atom.predicate in derived_names:
                deps[rule.head.predicate].add(atom.predicate)
    state: dict[str, int] = {}

    def visit(n: str, trail: tuple[str, ...]) -> None:
        if state.get(n) == 2:
            return
        if state.get(n) == 1:
            raise PddlError(
                "unstratified rules: cycle through "
                + " -> ".join(trail + (n,))
            )
        state[n] = 1
        for m in sorted(deps[n]):
            visit(m, trail + (n,))
        state[n] = 2

    for n in sorted(deps):
        visit(n, ())

    domain = Domain(
        dom_name, hierarchy, tuple(sig_list), tuple(actions), tuple(rules)
    )
    domain.rule_strata()  # re-checks acyclicity through the model layer
    return domain


# ---------------------------------------------------------------------------
# Problem parsing
# ---------------------------------------------------------------------------


def parse_problem(text: str | bytes, domain: Domain) -> Problem:
    """Parse a problem file and type-check it against ``domain``.

    Init atoms must be observed predicates over declared objects; the goal
    may also reference derived predicates.  Raises :class:`PddlError`
    otherwise.
    """
    form = _prepare(text, "problem")
    sections = form[1:]
    if not sections:
        raise PddlError("missing (problem NAME)")
    head = _expect_list(sections[0], "(problem NAME)")
    if len(head) != 2 or _expect_tok(head[0], "problem").text != "problem":
        line, col = _pos(sections[0])
        raise PddlError("expected (problem NAME)", line, col)
    prob_name = _name_tok(head[1], "problem name").text

    domain_name: str | None = None
    objects: list[tuple[str, str]] = []
    object_types: dict[str, str] = {}
    init: set[GroundAtom] = set()
    goal: list[GroundLiteral] = []
    saw_goal = False

    def check_ground_atom(
        pred: str, args: list[_Tok], line: int, col: int, in_goal: bool
    ) -> GroundAtom:
        if pred == EQUALITY:
            raise PddlError("'=' cannot appear in problems", line, col)
        sig = domain.predicate(pred)
        if sig is None:
            raise PddlError(f"unknown predicate {pred!r}", line, col)
        if len(args) != sig.arity:
            raise PddlError(
                f"{pred!r} takes {sig.arity} args, got {len(args)}", line, col
            )
        for a, (_, want) in zip(args, sig.params):
            if a.text.startswith("?"):
                raise PddlError(
                    f"variables are not allowed here: {a.text!r}", a.line, a.col
                )
            have = object_types.get(a.text)
            if have is None:
                raise PddlError(f"unknown object {a.text!r}", a.line, a.col)
            if not domain.hierarchy.is_subtype(have, want):
                raise PddlError(
                    f"{a.text!r} has type {have!r}, {pred!r} requires {want!r}",
                    a.line,
                    a.col,
                )
        if not in_goal and sig.kind == "derived":
            raise PddlError(
                f"derived predicate {pred!r} cannot appear in :init", line, col
            )
        return GroundAtom(pred, tuple(a.text for a in args))

    for sec in sections[1:]:
        lst = _expect_list(sec, "a problem section")
        if not lst:
            continue
        key = _expect_tok(lst[0], "a section keyword").text
        if key == ":domain":
            if len(lst) != 2:
                line, col = _pos(sec)
                raise PddlError("(:domain NAME) takes one name", line, col)
            domain_name = _name_tok(lst[1], "domain name").text
        elif key == ":objects":
            for name, typ, line, col in _typed_list(
                lst[1:], "object name", variables=False
            ):
                if name in object_types:
                    raise PddlError(f"duplicate object {name!r}", line, col)
                if not domain.hierarchy.contains(typ):
                    raise PddlError(f"unknown type {typ!r}", line, col)
                object_types[name] = typ
                objects.append((name, typ))
        elif key == ":init":
            for c in lst[1:]:
                pred, args, negated, line, col = _parse_literal(c)
                if negated:
                    raise PddlError("negation is not allowed in :init", line, col)
                init.add(check_ground_atom(pred, args, line, col, in_goal=False))
        elif key == ":goal":
            saw_goal = True
            if len(lst) != 2:
                line, col = _pos(sec)
                raise PddlError("(:goal FORMULA) takes one formula", line, col)
            for c in _flatten_and(lst[1]):
                pred, args, negated, line, col = _parse_literal(c)
                goal.append(
                    GroundLiteral(
                        check_ground_atom(pred, args, line, col, in_goal=True),
                        negated,
                    )
                )
        else:
            line, col = _pos(lst[0])
            raise PddlError(f"unsupported section {key!r}", line, col)

    if domain_name is None:
        raise PddlError("missing (:domain NAME)")
    if domain_name != domain.name:
        raise PddlError(
            f"problem is for domain {domain_name!r}, got {domain.name!r}"
        )
    if not saw_goal:
        raise PddlError("missing (:goal ...)")
    return Problem(prob_name, domain_name, tuple(objects), frozenset(init), tuple(goal))


# ---------------------------------------------------------------------------
# Plan parsing
# ---------------------------------------------------------------------------


def parse_plan(text: str | bytes, domain: Domain | None = None) -> Plan:
    """Parse one ``(action arg ...)`` per line; blanks and comments skipped.

    With ``domain`` given, unknown actions and arity mismatches raise
    :class:`PddlError`; without it the plan is purely syntactic (the
    validator reports semantic problems as verdicts instead).
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise PddlError(f"plan is not valid UTF-8: {exc}") from None
    steps: list[PlanStep] = []
    for forms_line, raw in enumerate(text.lower().splitlines(), start=1):
        stripped = raw.split(";", 1)[0].strip()
        if not stripped:
            continue
        forms = _nest(_tokenize(stripped))
        if len(forms) != 1 or not isinstance(forms[0], list):
            raise PddlError("expected one (action args...) form", forms_line, 1)
        lst = forms[0]
        if not lst:
            raise PddlError("empty plan step", forms_line, 1)
        name = _name_tok(lst[0], "action name")
        args = tuple(_name_tok(a, "argument").text for a in lst[1:])
        if domain is not None:
            schema = domain.action(name.text)
            if schema is None:
                raise PddlError(
                    f"unknown action {name.text!r}", name.line, name.col
                )
            if len(args) != len(schema.params):
                raise PddlError(
                    f"{name.text!r} takes {len(schema.params)} args, got {len(args)}",
                    name.line,
                    name.col,
                )
        steps.append(PlanStep(name.text, args))
    return Plan(tuple(steps))
