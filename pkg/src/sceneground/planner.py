"""Forward state-space search over the typed STRIPS subset.

Actions are grounded up front (equality literals are resolved away at
grounding time, dropping bindings they rule out).  Derived predicates are
recomputed as a least fixpoint after every state change; the fixpoint
engine tolerates positive recursion even though the shipped domains keep
their rule dependencies acyclic.

Two search modes: "optimal" is plain breadth-first search over unit-cost
actions; "satisficing" is greedy best-first search under an additive-cost
heuristic on the delete relaxation (derived rules cost nothing).  Every
returned plan is replayed against the model before it leaves this module.
"""

from __future__ import annotations

import itertools
import time
from collections import deque
from dataclasses import dataclass
from heapq import heappop, heappush

from sceneground.pddl.model import (
    EQUALITY,
    ActionSchema,
    Atom,
    DerivedRule,
    Domain,
    GroundAtom,
    GroundLiteral,
    Plan,
    PlanStep,
    Problem,
)

INFINITY = float("inf")


class PlannerError(ValueError):
    """Bad search configuration or an ill-formed planning input."""


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: tuple[str, ...]
    precondition: tuple[GroundLiteral, ...]
    add: frozenset[GroundAtom]
    delete: frozenset[GroundAtom]

    def step(self) -> PlanStep:
        return PlanStep(self.name, self.args)


@dataclass(frozen=True)
class State:
    """Base (observed) atoms plus the cached fixpoint of the derived ones."""

    base: frozenset[GroundAtom]
    derived: frozenset[GroundAtom]

    def holds(self, literal: GroundLiteral) -> bool:
        present = literal.atom in self.base or literal.atom in self.derived
        return present != literal.negated

    def satisfies(self, goal: tuple[GroundLiteral, ...]) -> bool:
        return all(self.holds(lit) for lit in goal)


@dataclass(frozen=True)
class SearchConfig:
    mode: str = "satisficing"
    heuristic: str = "additive-cost"
    node_limit: int = 1_000_000
    time_limit_s: float = 120.0

    def __post_init__(self):
        if self.mode not in ("optimal", "satisficing"):
            raise PlannerError(f"unknown mode {self.mode!r}")
        if self.heuristic not in ("additive-cost", "goal-count", "blind"):
            raise PlannerError(f"unknown heuristic {self.heuristic!r}")
        if self.node_limit <= 0 or self.time_limit_s <= 0:
            raise PlannerError("limits must be positive")


@dataclass(frozen=True)
class SolveResult:
    status: str  # solved | unsolvable | node-limit | time-limit
    plan: Plan | None
    expanded: int
    wall_time_ms: float

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "plan_length": len(self.plan) if self.plan is not None else None,
            "expanded_nodes": self.expanded,
            "wall_time_ms": round(self.wall_time_ms, 3),
        }


# ---------------------------------------------------------------------------
# Grounding
# ---------------------------------------------------------------------------


def _bindings(
    params: tuple[tuple[str, str], ...],
    objects: tuple[tuple[str, str], ...],
    domain: Domain,
):
    pools = []
    for _, want in params:
        pool = [name for name, typ in objects if domain.hierarchy.is_subtype(typ, want)]
        if not pool:
            return
        pools.append(pool)
    yield from itertools.product(*pools)


def _substitute(atom: Atom, env: dict[str, str]) -> GroundAtom:
    return GroundAtom(atom.predicate, tuple(env[a] for a in atom.args))


def ground_actions(
    domain: Domain, objects: tuple[tuple[str, str], ...]
) -> tuple[GroundAction, ...]:
    """All type-valid bindings of every schema, in deterministic order.

    Equality literals are evaluated against the binding right here: a
    grounding that falsifies one is dropped, and satisfied ones vanish from
    the grounded precondition.
    """
    out: list[GroundAction] = []
    seen: set[tuple[str, tuple[str, ...]]] = set()
    for schema in domain.actions:
        var_names = [v for v, _ in schema.params]
        for combo in _bindings(schema.params, objects, domain):
            key = (schema.name, combo)
            if key in seen:
                continue
            seen.add(key)
            env = dict(zip(var_names, combo))
            pre = []
            feasible = True
            for lit in schema.precondition:
                if lit.atom.predicate == EQUALITY:
                    left, right = (env[a] for a in lit.atom.args)
                    if (left == right) == lit.negated:
                        feasible = False
                        break
                    continue
                pre.append(GroundLiteral(_substitute(lit.atom, env), lit.negated))
            if not feasible:
                continue
            out.append(
                GroundAction(
                    schema.name,
                    combo,
                    tuple(pre),
                    frozenset(_substitute(a, env) for a in schema.add),
                    frozenset(_substitute(a, env) for a in schema.delete),
                )
            )
    return tuple(out)


def _rule_instances(
    rules: tuple[DerivedRule, ...],
    objects: tuple[tuple[str, str], ...],
    domain: Domain,
) -> tuple[tuple[GroundAtom, tuple[GroundAtom, ...]], ...]:
    """Fully ground every rule: (head, body) pairs over type-valid bindings."""
    instances = []
    for rule in rules:
        # Each variable must satisfy every predicate position it occupies.
        constraints: dict[str, list[str]] = {}
        order: list[str] = []
        for atom in (rule.head, *rule.body):
            sig = domain.predicate(atom.predicate)
            assert sig is not None
            for var, (_, want) in zip(atom.args, sig.params):
                if var not in constraints:
                    constraints[var] = []
                    order.append(var)
                constraints[var].append(want)
        pools = []
        for var in order:
            pool = [
                name
                for name, typ in objects
                if all(domain.hierarchy.is_subtype(typ, want) for want in constraints[var])
            ]
            pools.append(pool)
        for combo in itertools.product(*pools):
            env = dict(zip(order, combo))
            instances.append(
                (
                    _substitute(rule.head, env),
                    tuple(_substitute(a, env) for a in rule.body),
                )
            )
    return tuple(instances)


# ---------------------------------------------------------------------------
# Derived-predicate fixpoint
# ---------------------------------------------------------------------------


def axiom_closure(
    base, rules: tuple[DerivedRule, ...] | list[DerivedRule]
) -> frozenset[GroundAtom]:
    """Least fixpoint of the positive rules over the base atoms.

    Plain naive iteration: re-derive until nothing new appears.  Handles
    recursive rule sets, not just the acyclic ones the parser admits.
    """
    known: set[GroundAtom] = set(base)
    by_predicate: dict[str, list[GroundAtom]] = {}
    for atom in known:
        by_predicate.setdefault(atom.predicate, []).append(atom)
    derived: set[GroundAtom] = set()
    while True:
        fresh: set[GroundAtom] = set()
        for rule in rules:
            for env in _match_body(rule.body, by_predicate, {}):
                head = _substitute(rule.head, env)
                if head not in known:
                    fresh.add(head)
        if not fresh:
            return frozenset(derived)
        known |= fresh
        derived |= fresh
        for atom in fresh:
            by_predicate.setdefault(atom.predicate, []).append(atom)


def _match_body(body, by_predicate: dict[str, list[GroundAtom]], env: dict[str, str]):
    """Backtracking join of body atoms against the known atom set."""
    if not body:
        yield dict(env)
        return
    first, rest = body[0], body[1:]
    for atom in by_predicate.get(first.predicate, ()):
        if len(atom.args) != len(first.args):
            continue
        trial = dict(env)
        ok = True
        for var, value in zip(first.args, atom.args):
            bound = trial.get(var)
            if bound is None:
                trial[var] = value
            elif bound != value:
                ok = False
                break
        if ok:
            yield from _match_body(rest, by_predicate, trial)


def make_state(base, domain: Domain) -> State:
    base = frozenset(base)
    return State(base, axiom_closure(base, domain.derived))


def apply_action(state: State, action: GroundAction, domain: Domain) -> State:
    return make_state((state.base - action.delete) | action.add, domain)


def applicable(state: State, action: GroundAction) -> bool:
    return all(state.holds(lit) for lit in action.precondition)


# ---------------------------------------------------------------------------
# Additive-cost heuristic (delete relaxation)
# ---------------------------------------------------------------------------


class _AdditiveHeuristic:
    """h_add: cheapest relaxed cost per atom, ignoring deletes.

    Actions cost 1 plus the summed costs of their positive preconditions
    (negative ones are free in the relaxation); derived rules cost only
    their bodies.  The heuristic value is the summed cost of positive goal
    literals, plus 1 for each currently violated negative goal literal, so
    it is zero exactly on goal states.
    """

    def __init__(self, actions, rule_instances, goal):
        self.actions = [
            (
                tuple(lit.atom for lit in a.precondition if not lit.negated),
                a.add,
            )
            for a in actions
        ]
        self.rules = rule_instances
        self.goal = goal

    def __call__(self, state: State) -> float:
        cost: dict[GroundAtom, float] = {}
        for atom in state.base | state.derived:
            cost[atom] = 0.0
        changed = True
        while changed:
            changed = False
            for pre, add in self.actions:
                total = 1.0
                for atom in pre:
                    c = cost.get(atom)
                    if c is None:
                        break
                    total += c
                else:
                    for atom in add:
                        if total < cost.get(atom, INFINITY):
                            cost[atom] = total
                            changed = True
            for head, body in self.rules:
                total = 0.0
                for atom in body:
                    c = cost.get(atom)
                    if c is None:
                        break
                    total += c
                else:
                    if total < cost.get(head, INFINITY):
                        cost[head] = total
                        changed = True
        h = 0.0
        for lit in self.goal:
            if lit.negated:
                if lit.atom in cost and cost[lit.atom] == 0.0:
                    h += 1.0
            else:
                c = cost.get(lit.atom, INFINITY)
                if c == INFINITY:
                    return INFINITY
                h += c
        return h


def _goal_count(goal):
    def h(state: State) -> float:
        return float(sum(not state.holds(lit) for lit in goal))

    return h


def make_heuristic(domain: Domain, problem: Problem, name: str):
    """Build the named heuristic as a callable State -> float."""
    if name == "additive-cost":
        actions = ground_actions(domain, problem.objects)
        rules = _rule_instances(domain.derived, problem.objects, domain)
        return _AdditiveHeuristic(actions, rules, problem.goal)
    if name == "goal-count":
        return _goal_count(problem.goal)
    if name == "blind":
        return lambda state: 0.0
    raise PlannerError(f"unknown heuristic {name!r}")


# ---------------------------------------------------------------------------
# Search
# ---------------------------------------------------------------------------


def solve(
    domain: Domain, problem: Problem, cfg: SearchConfig = SearchConfig()
) -> SolveResult:
    """Search for a plan from problem.init to problem.goal.

    Optimal mode is breadth-first (shortest plan under unit costs);
    satisficing mode is greedy best-first under cfg.heuristic.  Ties break
    on grounded-action order, so equal inputs give equal plans.  The found
    plan is replayed before returning; a replay failure would be a planner
    defect and raises instead of returning a bad plan.
    """
    start = time.perf_counter()
    actions = ground_actions(domain, problem.objects)
    init = make_state(problem.init, domain)
    goal = problem.goal

    def finish(status, plan, expanded):
        wall = (time.perf_counter() - start) * 1000.0
        return SolveResult(status, plan, expanded, wall)

    if init.satisfies(goal):
        return finish("solved", Plan(()), 0)

    if cfg.mode == "optimal":
        heuristic = None
    else:
        heuristic = make_heuristic(domain, problem, cfg.heuristic)

    parents: dict[frozenset, tuple[frozenset, GroundAction]] = {}
    seen: set[frozenset] = {init.base}
    expanded = 0
    counter = itertools.count()

    if cfg.mode == "optimal":
        queue = deque([init])
        pop = queue.popleft
        push = lambda state, h: queue.append(state)
        frontier = queue
    else:
        heap: list[tuple[float, int, State]] = []
        pop = lambda: heappop(heap)[2]
        push = lambda state, h: heappush(heap, (h, next(counter), state))
        push(init, 0.0)
        frontier = heap

    while frontier:
        if expanded >= cfg.node_limit:
            return finish("node-limit", None, expanded)
        if time.perf_counter() - start > cfg.time_limit_s:
            return finish("time-limit", None, expanded)
        state = pop()
        expanded += 1
        for action in actions:
            if not applicable(state, action):
                continue
            nxt = apply_action(state, action, domain)
            if nxt.base in seen:
                continue
            seen.add(nxt.base)
            parents[nxt.base] = (state.base, action)
            if nxt.satisfies(goal):
                plan = _reconstruct(parents, init.base, nxt.base)
                _check_plan(domain, problem, plan)
                return finish("solved", plan, expanded)
            if heuristic is None:
                push(nxt, 0.0)
            else:
                h = heuristic(nxt)
                if h < INFINITY:
                    push(nxt, h)
    return finish("unsolvable", None, expanded)


def _reconstruct(parents, root, leaf) -> Plan:
    steps = []
    node = leaf
    while node != root:
        node, action = parents[node]
        steps.append(action.step())
    steps.reverse()
    return Plan(tuple(steps))


def _check_plan(domain: Domain, problem: Problem, plan: Plan) -> None:
    """Replay the plan; any failure is an internal planner defect."""
    actions = {(a.name, a.args): a for a in ground_actions(domain, problem.objects)}
    state = make_state(problem.init, domain)
    for step in plan.steps:
        action = actions.get((step.action, step.args))
        if action is None or not applicable(state, action):
            raise PlannerError(f"planner produced an invalid step {step}")
        state = apply_action(state, action, domain)
    if not state.satisfies(problem.goal):
        raise PlannerError("planner produced a plan that misses the goal")
