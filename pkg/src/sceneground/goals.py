"""Goal construction, kept strictly upstream of init estimation.

A goal comes either from the structured grammar

    goal   := clause (AND clause)*
    clause := [NOT] predicate '(' name (',' name)* ')'

or from a chat-completions endpoint that is asked to answer in that same
grammar.  Either way the result is validated against the domain and
grounded against the merged object set only; the predicted init is never
an input, so state-grounding mistakes cannot bend the goal.
"""

from __future__ import annotations

import json
import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

from sceneground.pddl.model import Domain, GroundAtom, GroundLiteral


class GoalError(ValueError):
    """Unparsable, unknown, ill-typed, or unresolvable goal."""


@dataclass(frozen=True)
class GoalSpec:
    """Validated but not yet grounded goal: (negated, predicate, args) conjuncts."""

    conjuncts: tuple[tuple[bool, str, tuple[str, ...]], ...]
    source: str = "structured"

    def __post_init__(self):
        if not self.conjuncts:
            raise GoalError("empty goal")


_CLAUSE_RE = re.compile(
    r"^\s*(not\s+)?([a-z0-9_-]+)\s*\(\s*([a-z0-9_,\s-]*?)\s*\)\s*$"
)


def parse_structured_goal(text: str, domain: Domain, source: str = "structured") -> GoalSpec:
    """Parse and validate the structured goal grammar.

    Keywords and names are case-insensitive; predicates must exist in the
    domain (observed or derived) with matching arity.
    """
    lowered = text.lower().strip()
    if not lowered:
        raise GoalError("empty goal text")
    conjuncts = []
    for clause in re.split(r"\band\b", lowered):
        m = _CLAUSE_RE.match(clause)
        if m is None:
            raise GoalError(f"cannot parse goal clause {clause.strip()!r}")
        negated = m.group(1) is not None
        predicate = m.group(2)
        args = tuple(a.strip() for a in m.group(3).split(","))
        if any(not a for a in args):
            raise GoalError(f"bad argument list in clause {clause.strip()!r}")
        sig = domain.predicate(predicate)
        if sig is None:
            raise GoalError(f"unknown predicate {predicate!r}")
        if len(args) != sig.arity:
            raise GoalError(
                f"{predicate!r} takes {sig.arity} args, got {len(args)}"
            )
        conjuncts.append((negated, predicate, args))
    return GoalSpec(tuple(conjuncts), source)


def ground_goal(
    spec: GoalSpec,
    objects: tuple[tuple[str, str], ...],
    domain: Domain,
) -> tuple[tuple[GroundLiteral, ...], tuple[str, ...]]:
    """Resolve a goal spec against named objects.

    Returns the grounded conjunction plus the names that did not resolve,
    in first-mention order.  Unresolved names are meant to be fed back as
    phrase queries through detection merging and the goal re-grounded; a
    caller that cannot resolve them should treat the goal as failed.
    Resolved arguments are type-checked against the predicate signature.
    """
    types = dict(objects)
    unresolved: list[str] = []
    literals = []
    for negated, predicate, args in spec.conjuncts:
        sig = domain.predicate(predicate)
        assert sig is not None  # guaranteed by parse_structured_goal
        for arg, (_, want) in zip(args, sig.params):
            have = types.get(arg)
            if have is None:
                if arg not in unresolved:
                    unresolved.append(arg)
                continue
            if not domain.hierarchy.is_subtype(have, want):
                raise GoalError(
                    f"{arg!r} has type {have!r}, {predicate!r} requires {want!r}"
                )
        literals.append(GroundLiteral(GroundAtom(predicate, args), negated))
    return tuple(literals), tuple(unresolved)


def resolve_goal(
    spec: GoalSpec,
    objects: tuple[tuple[str, str], ...],
    domain: Domain,
) -> tuple[GroundLiteral, ...]:
    """Ground a goal that must resolve completely, or raise."""
    literals, unresolved = ground_goal(spec, objects, domain)
    if unresolved:
        raise GoalError(
            "unresolvable goal names: " + ", ".join(sorted(unresolved))
        )
    return literals


# ---------------------------------------------------------------------------
# Chat-completions client
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LlmEndpointConfig:
    """Where and how to reach the goal-translation endpoint."""

    base_url: str
    model: str
    api_key_env: str = "SCENEGROUND_API_KEY"
    timeout_s: float = 30.0
    retries: int = 2

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise GoalError("timeout must be positive")
        if self.retries < 0:
            raise GoalError("retries must be nonnegative")


@dataclass
class Cassette:
    """Recorded endpoint exchanges: a JSON array of {request, response}.

    In replay mode each stored exchange is consumed at most once, matched
    by exact request payload.  In record mode live responses are appended
    and the file rewritten.
    """

    path: Path
    mode: str = "replay"  # or "record"
    entries: list = field(default_factory=list)
    _used: set = field(default_factory=set)

    def __post_init__(self):
        self.path = Path(self.path)
        if self.mode not in ("replay", "record"):
            raise GoalError(f"bad cassette mode {self.mode!r}")
        if self.path.exists():
            self.entries = json.loads(self.path.read_text())

    def replay(self, request: dict) -> str | None:
        for i, entry in enumerate(self.entries):
            if i not in self._used and entry["request"] == request:
                self._used.add(i)
                return entry["response"]
        return None

    def record(self, request: dict, response: str) -> None:
        self.entries.append({"request": request, "response": response})
        self.path.write_text(json.dumps(self.entries, indent=2, sort_keys=True) + "\n")


def _goal_prompt(instruction: str, domain: Domain) -> str:
    predicates = "; ".join(
        f"{sig.name}({', '.join(t for _, t in sig.params)})"
        for sig in domain.predicates
    )
    type_names = ", ".join(sorted(domain.hierarchy.all_types()))
    return (
        "Translate the instruction into a planning goal.\n"
        f"Object types: {type_names}.\n"
        f"Predicates: {predicates}.\n"
        "Objects are referred to by lowercase names from the instruction.\n"
        f"Instruction: {instruction}\n"
        "Reply with exactly one line of the form\n"
        "  predicate(name, ...) AND NOT predicate(name, ...)\n"
        "using only the predicates above. No other text."
    )


def _post_chat(request: dict, cfg: LlmEndpointConfig) -> str:
    url = cfg.base_url.rstrip("/") + "/chat/completions"
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(cfg.api_key_env)
    if key:
        headers["Authorization"] = f"Bearer {key}"
    req = urllib.request.Request(
        url, data=json.dumps(request).encode(), headers=headers, method="POST"
    )
    with urllib.request.urlopen(req, timeout=cfg.timeout_s) as resp:
        body = json.loads(resp.read().decode("utf-8"))
    try:
        return body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise GoalError(f"malformed endpoint response: {exc}") from None


def _extract_goal_line(content: str, domain: Domain) -> GoalSpec:
    stripped = content.replace("```", "\n")
    for line in stripped.splitlines():
        line = line.strip()
        if not line or "(" not in line:
            continue
        try:
            return parse_structured_goal(line, domain, source="llm")
        except GoalError:
            continue
    raise GoalError(f"no parsable goal line in response {content!r}")


def llm_parse_goal(
    instruction: str,
    domain: Domain,
    cfg: LlmEndpointConfig,
    cassette: Cassette | None = None,
) -> GoalSpec:
    """Ask the endpoint to translate an instruction; validate its answer.

    The request is deterministic (temperature 0).  Invalid or failed
    responses are retried up to cfg.retries times, then raised as
    GoalError.  With a cassette in replay mode no network is touched.
    """
    request = {
        "model": cfg.model,
        "temperature": 0,
        "messages": [{"role": "user", "content": _goal_prompt(instruction, domain)}],
    }
    last: Exception | None = None
    for _ in range(cfg.retries + 1):
        try:
            if cassette is not None and cassette.mode == "replay":
                content = cassette.replay(request)
                if content is None:
                    raise GoalError(
                        f"no cassette entry for instruction {instruction!r}"
                    )
            else:
                content = _post_chat(request, cfg)
                if cassette is not None:
                    cassette.record(request, content)
            return _extract_goal_line(content, domain)
        except (GoalError, urllib.error.URLError, TimeoutError, OSError) as exc:
            last = exc
    raise GoalError(f"goal translation failed after {cfg.retries + 1} attempts: {last}")
