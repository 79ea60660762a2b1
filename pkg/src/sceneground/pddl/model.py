"""Model types for the typed STRIPS subset.

Everything here is an immutable value object.  Construction-time validation
is limited to local shape checks; cross-object invariants (types exist,
variables declared, rules stratified) are enforced by ``Domain.validate`` and
``Problem`` construction helpers, which the parser always runs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

ROOT_TYPE = "object"
# Equality is a builtin usable in preconditions only; it is not part of the
# domain's predicate set and never appears in states.
EQUALITY = "="

_NAME_RE = re.compile(r"^[a-z0-9_-]+$")


def valid_name(name: str) -> bool:
    """True if ``name`` is a legal lowercase identifier."""
    return bool(_NAME_RE.match(name))


class ModelError(ValueError):
    """Raised when a model object violates a structural invariant."""


# ---------------------------------------------------------------------------
# Types and predicates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TypeHierarchy:
    """Type names with single inheritance rooted at ``object``.

    ``parents`` maps each non-root type to its parent.  The root is implicit
    and always present.
    """

    parents: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for name, parent in self.parents:
            if not valid_name(name) or not valid_name(parent):
                raise ModelError(f"bad type name in ({name} - {parent})")
            if name == ROOT_TYPE:
                raise ModelError("the root type cannot be redeclared")
            if name in seen:
                raise ModelError(f"duplicate type {name!r}")
            seen.add(name)
        table = dict(self.parents)
        for name in table:
            # Walk to the root; a cycle never reaches it.
            hops = 0
            cur = name
            while cur != ROOT_TYPE:
                cur = table.get(cur, ROOT_TYPE)
                hops += 1
                if hops > len(table) + 1:
                    raise ModelError(f"type cycle through {name!r}")

    def contains(self, name: str) -> bool:
        return name == ROOT_TYPE or any(n == name for n, _ in self.parents)

    def is_subtype(self, name: str, ancestor: str) -> bool:
        """True if ``name`` equals ``ancestor`` or descends from it."""
        if not self.contains(name) or not self.contains(ancestor):
            return False
        table = dict(self.parents)
        cur = name
        while True:
            if cur == ancestor:
                return True
            if cur == ROOT_TYPE:
                return False
            cur = table.get(cur, ROOT_TYPE)

    def all_types(self) -> tuple[str, ...]:
        return (ROOT_TYPE,) + tuple(n for n, _ in self.parents)


@dataclass(frozen=True)
class PredicateSignature:
    """A predicate name with typed parameters and an observed/derived kind.

    Observed predicates are those a perception layer can assert directly;
    they are the only ones allowed in initial states and action effects.
    Derived predicates are defined by rules and recomputed from the observed
    base.  Observed predicates have arity 1 or 2.
    """

    name: str
    params: tuple[tuple[str, str], ...]  # (variable, type)
    kind: str  # "observed" | "derived"

    def __post_init__(self) -> None:
        if self.kind not in ("observed", "derived"):
            raise ModelError(f"bad predicate kind {self.kind!r}")
        if not valid_name(self.name):
            raise ModelError(f"bad predicate name {self.name!r}")
        if self.kind == "observed" and len(self.params) not in (1, 2):
            raise ModelError(
                f"observed predicate {self.name!r} must have arity 1 or 2, "
                f"got {len(self.params)}"
            )
        seen = set()
        for var, _ in self.params:
            if var in seen:
                raise ModelError(f"duplicate parameter {var!r} in {self.name!r}")
            seen.add(var)

    @property
    def arity(self) -> int:
        return len(self.params)


# ---------------------------------------------------------------------------
# Lifted formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    """A predicate applied to variables (``?x``-prefixed) or object names."""

    predicate: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class Literal:
    """An atom with polarity, used in preconditions."""

    atom: Atom
    negated: bool = False


@dataclass(frozen=True)
class ActionSchema:
    """A STRIPS action: typed parameters, literal preconditions, add/delete.

    Effects may reference only observed predicates; the equality builtin may
    appear only in the precondition.
    """

    name: str
    params: tuple[tuple[str, str], ...]
    precondition: tuple[Literal, ...]
    add: tuple[Atom, ...]
    delete: tuple[Atom, ...]

    def __post_init__(self) -> None:
        if not valid_name(self.name):
            raise ModelError(f"bad action name {self.name!r}")


@dataclass(frozen=True)
class DerivedRule:
    """``head <- body`` where body is a conjunction of positive atoms.

    Body variables not bound by the head are implicitly existentially
    quantified.  Head variables must all occur in the body (range
    restriction), so rule evaluation only ever binds them to existing atoms.
    """

    head: Atom
    body: tuple[Atom, ...]

    def __post_init__(self) -> None:
        if not self.body:
            raise ModelError(f"rule for {self.head.predicate!r} has an empty body")
        head_vars = {a for a in self.head.args if a.startswith("?")}
        body_vars = {a for atom in self.body for a in atom.args if a.startswith("?")}
        missing = head_vars - body_vars
        if missing:
            raise ModelError(
                f"rule for {self.head.predicate!r} has unbound head "
                f"variables {sorted(missing)}"
            )


# ---------------------------------------------------------------------------
# Domain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Domain:
    """A parsed domain: hierarchy, predicate signatures, actions, rules."""

    name: str
    hierarchy: TypeHierarchy
    predicates: tuple[PredicateSignature, ...]
    actions: tuple[ActionSchema, ...]
    derived: tuple[DerivedRule, ...]
    _by_name: dict[str, PredicateSignature] = field(
        init=False, repr=False, compare=False, hash=False, default_factory=dict
    )

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "_by_name", {p.name: p for p in self.predicates}
        )

    def predicate(self, name: str) -> PredicateSignature | None:
        return self._by_name.get(name)

    def action(self, name: str) -> ActionSchema | None:
        for a in self.actions:
            if a.name == name:
                return a
        return None

    @property
    def observed(self) -> tuple[PredicateSignature, ...]:
        return tuple(p for p in self.predicates if p.kind == "observed")

    @property
    def derived_predicates(self) -> tuple[PredicateSignature, ...]:
        return tuple(p for p in self.predicates if p.kind == "derived")

    def rule_strata(self) -> tuple[tuple[DerivedRule, ...], ...]:
        """Rules grouped by dependency depth, lowest stratum first.

        The parser guarantees acyclicity, so a topological layering exists.
        Rule engines may still evaluate recursive rule sets built by hand;
        this helper is only for parsed domains.
        """
        depth: dict[str, int] = {}

        def pred_depth(name: str, active: tuple[str, ...] = ()) -> int:
            if name in depth:
                return depth[name]
            if name in active:
                raise ModelError(f"derived predicate {name!r} depends on itself")
            sig = self.predicate(name)
            if sig is None or sig.kind != "derived":
                return -1
            d = 0
            for rule in self.derived:
                if rule.head.predicate != name:
                    continue
                for atom in rule.body:
                    d = max(d, 1 + pred_depth(atom.predicate, active + (name,)))
            depth[name] = d
            return d

        for p in self.derived_predicates:
            pred_depth(p.name)
        if not self.derived:
            return ()
        max_d = max(depth.values(), default=0)
        strata: list[tuple[DerivedRule, ...]] = []
        for d in range(max_d + 1):
            layer = tuple(
                r for r in self.derived if depth.get(r.head.predicate, 0) == d
            )
            if layer:
                strata.append(layer)
        return tuple(strata)


# ---------------------------------------------------------------------------
# Ground state, problems, plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class GroundAtom:
    """A predicate applied to object names.  Orderable for canonical output."""

    predicate: str
    args: tuple[str, ...]

    def __str__(self) -> str:
        return "(" + " ".join((self.predicate,) + self.args) + ")"


@dataclass(frozen=True)
class GroundLiteral:
    atom: GroundAtom
    negated: bool = False

    def __str__(self) -> str:
        return f"(not {self.atom})" if self.negated else str(self.atom)


@dataclass(frozen=True)
class Problem:
    """A problem instance.  Objects are stored sorted by name (canonical)."""

    name: str
    domain_name: str
    objects: tuple[tuple[str, str], ...]
    init: frozenset[GroundAtom]
    goal: tuple[GroundLiteral, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "objects", tuple(sorted(self.objects, key=lambda o: o[0]))
        )
        if not isinstance(self.init, frozenset):
            object.__setattr__(self, "init", frozenset(self.init))

    def object_type(self, name: str) -> str | None:
        for obj, typ in self.objects:
            if obj == name:
                return typ
        return None


@dataclass(frozen=True)
class PlanStep:
    action: str
    args: tuple[str, ...]

    def __str__(self) -> str:
        return "(" + " ".join((self.action,) + self.args) + ")"


@dataclass(frozen=True)
class Plan:
    steps: tuple[PlanStep, ...]

    def __len__(self) -> int:
        return len(self.steps)


# ---------------------------------------------------------------------------
# Plannability check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    """One reason an atom set is not plannable against a domain."""

    kind: str  # unknown-predicate | bad-arity | type-mismatch | unknown-object
    atom: GroundAtom
    message: str


def check_plannable(
    atoms: frozenset[GroundAtom] | set[GroundAtom],
    domain: Domain,
    objects: tuple[tuple[str, str], ...],
) -> list[Violation]:
    """Check every atom is a typed instantiation of a domain predicate.

    Returns an empty list iff all atoms are well formed: known predicate,
    matching arity, declared objects, and argument types that are subtypes of
    the parameter types.  Violations are returned in atom-sorted order, worst
    first per atom (predicate before arity before objects before types).
    """
    type_of = dict(objects)
    out: list[Violation] = []
    for atom in sorted(atoms):
        sig = domain.predicate(atom.predicate)
        if sig is None:
            out.append(
                Violation(
                    "unknown-predicate",
                    atom,
                    f"predicate {atom.predicate!r} is not declared",
                )
            )
            continue
        if len(atom.args) != sig.arity:
            out.append(
                Violation(
                    "bad-arity",
                    atom,
                    f"{atom.predicate!r} takes {sig.arity} args, got {len(atom.args)}",
                )
            )
            continue
        ok = True
        for arg, (_, want) in zip(atom.args, sig.params):
            if arg not in type_of:
                out.append(
                    Violation(
                        "unknown-object", atom, f"object {arg!r} is not declared"
                    )
                )
                ok = False
                break
            if not domain.hierarchy.is_subtype(type_of[arg], want):
                out.append(
                    Violation(
                        "type-mismatch",
                        atom,
                        f"{arg!r} has type {type_of[arg]!r}, "
                        f"{atom.predicate!r} requires {want!r}",
                    )
                )
                ok = False
                break
        if not ok:
            continue
    return out
