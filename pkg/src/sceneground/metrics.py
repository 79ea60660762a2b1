"""Scoring: grounding precision/recall, plan validation, suite evaluation.

Grounding is scored as exact-match precision/recall over observed-predicate
atoms (derived atoms never count).  Suite metrics pool tp/fp/fn across
problems (micro averaging) and also report means of per-problem ratios
(macro); micro is the primary number and the report header says so.

A problem that fails at any pipeline stage contributes zeros for the
stages it never reached; the suite never aborts on one bad problem.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean

from sceneground.goals import (
    Cassette,
    GoalError,
    LlmEndpointConfig,
    llm_parse_goal,
    parse_structured_goal,
    resolve_goal,
)
from sceneground.graph import (
    ExemplarError,
    classify_scene,
    exemplar_from_json,
    graph_to_init,
)
from sceneground.pddl import (
    PddlError,
    parse_problem,
    serialize_problem,
)
from sceneground.pddl.model import (
    EQUALITY,
    Domain,
    GroundAtom,
    Plan,
    Problem,
)
from sceneground.planner import SearchConfig, axiom_closure, solve
from sceneground.scene import (
    SceneError,
    merge_detections,
    observation_from_json,
)

AVERAGING_NOTE = (
    "P/R are micro-averaged (tp/fp/fn pooled across problems); "
    "macro columns are means of per-problem ratios"
)


class EvalError(ValueError):
    """Manifest or configuration problem that prevents scoring at all."""


@dataclass(frozen=True)
class GroundingScore:
    """Exact-match triplet counts.  As produced by triplet_pr, precision is
    tp/(tp+fp) with the empty-prediction convention and recall is tp/(tp+fn)
    (1.0 when the truth is empty).  Failure records constructed elsewhere
    may carry explicit zeros instead."""

    precision: float
    recall: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class Verdict:
    """Outcome of replaying a plan.  ok means no failing step and no
    reason; a goal violation has a reason but no step index."""

    ok: bool
    step: int | None
    reason: str | None  # precondition-unsatisfied | unknown-action | goal-unsatisfied

    def __post_init__(self):
        if self.ok and (self.step is not None or self.reason is not None):
            raise ValueError("a passing verdict carries no failure data")


def triplet_pr(
    predicted, truth, observed, empty_precision: float = 1.0
) -> GroundingScore:
    """Compare two atom sets, restricted to the observed predicates.

    empty_precision picks the convention when nothing was predicted
    (tp+fp=0): vacuous 1.0 by default, 0.0 if preferred.  Empty truth
    always gives recall 1.0.
    """
    if empty_precision not in (0.0, 1.0):
        raise EvalError("empty_precision must be 0.0 or 1.0")
    # Accept predicate names or PredicateSignature objects.
    names = {getattr(p, "name", p) for p in observed}
    predicted = {a for a in predicted if a.predicate in names}
    truth = {a for a in truth if a.predicate in names}
    tp = len(predicted & truth)
    fp = len(predicted - truth)
    fn = len(truth - predicted)
    precision = tp / (tp + fp) if tp + fp else empty_precision
    recall = tp / (tp + fn) if tp + fn else 1.0
    return GroundingScore(precision, recall, tp, fp, fn)


# ---------------------------------------------------------------------------
# Plan validation
# ---------------------------------------------------------------------------


def _full(atoms: frozenset[GroundAtom], domain: Domain) -> frozenset[GroundAtom]:
    return atoms | axiom_closure(atoms, domain.derived)


def validate_plan(domain: Domain, init, goal, plan: Plan) -> Verdict:
    """Replay the plan from init; the goal must hold after the last step.

    Steps are checked against the closure of the current state.  A step
    naming no schema (or the wrong number of arguments) is unknown-action;
    the first violation wins.
    """
    atoms = frozenset(init)
    for index, step in enumerate(plan.steps):
        schema = domain.action(step.action)
        if schema is None or len(schema.params) != len(step.args):
            return Verdict(False, index, "unknown-action")
        env = dict(zip((v for v, _ in schema.params), step.args))
        reached = _full(atoms, domain)
        for lit in schema.precondition:
            if lit.atom.predicate == EQUALITY:
                holds = env[lit.atom.args[0]] == env[lit.atom.args[1]]
            else:
                grounded = GroundAtom(
                    lit.atom.predicate, tuple(env[a] for a in lit.atom.args)
                )
                holds = grounded in reached
            if holds == lit.negated:
                return Verdict(False, index, "precondition-unsatisfied")
        delete = {
            GroundAtom(a.predicate, tuple(env[x] for x in a.args))
            for a in schema.delete
        }
        add = {
            GroundAtom(a.predicate, tuple(env[x] for x in a.args))
            for a in schema.add
        }
        atoms = frozenset((atoms - delete) | add)
    reached = _full(atoms, domain)
    if all((lit.atom in reached) != lit.negated for lit in goal):
        return Verdict(True, None, None)
    return Verdict(False, None, "goal-unsatisfied")


# ---------------------------------------------------------------------------
# Suite evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    match_threshold: float = 0.5
    search: SearchConfig = SearchConfig()
    empty_precision: float = 1.0
    llm: LlmEndpointConfig | None = None
    cassette: str | None = None
    cassette_mode: str = "replay"
    jobs: int = 1

    def __post_init__(self):
        if not 0.0 <= self.match_threshold <= 1.0:
            raise EvalError("match_threshold must lie in [0, 1]")
        if self.empty_precision not in (0.0, 1.0):
            raise EvalError("empty_precision must be 0.0 or 1.0")
        if self.jobs < 1:
            raise EvalError("jobs must be at least 1")


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    scene: str
    exemplar: str
    goal_text: str | None
    goal_structured: str | None
    ground_truth_problem: str


@dataclass(frozen=True)
class ProblemRecord:
    name: str
    grounding: GroundingScore
    problem_valid: bool
    plan_valid: bool
    success: bool
    plan_length: int | None
    failure: str | None

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "precision": self.grounding.precision,
            "recall": self.grounding.recall,
            "tp": self.grounding.tp,
            "fp": self.grounding.fp,
            "fn": self.grounding.fn,
            "problem_valid": self.problem_valid,
            "plan_valid": self.plan_valid,
            "success": self.success,
            "plan_length": self.plan_length,
            "failure": self.failure,
        }


@dataclass(frozen=True)
class DomainRow:
    domain: str
    n: int
    precision: float
    recall: float
    macro_precision: float
    macro_recall: float
    problem_validity: float
    plan_validity: float
    success: float

    def as_dict(self) -> dict:
        return {
            "domain": self.domain,
            "n": self.n,
            "precision": self.precision,
            "recall": self.recall,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "problem_validity": self.problem_validity,
            "plan_validity": self.plan_validity,
            "success": self.success,
        }


@dataclass(frozen=True)
class SuiteReport:
    rows: tuple[DomainRow, ...]
    records: tuple[ProblemRecord, ...]

    def as_dict(self) -> dict:
        return {
            "averaging": AVERAGING_NOTE,
            "rows": [row.as_dict() for row in self.rows],
            "problems": [record.as_dict() for record in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        """Aligned text table, one row per domain, header note on averaging."""
        headers = (
            "domain",
            "n",
            "P",
            "R",
            "macro-P",
            "macro-R",
            "problem-valid",
            "plan-valid",
            "success",
        )
        body = [
            (
                row.domain,
                str(row.n),
                f"{row.precision:.3f}",
                f"{row.recall:.3f}",
                f"{row.macro_precision:.3f}",
                f"{row.macro_recall:.3f}",
                f"{row.problem_validity:.3f}",
                f"{row.plan_validity:.3f}",
                f"{row.success:.3f}",
            )
            for row in self.rows
        ]
        widths = [
            max(len(headers[i]), *(len(line[i]) for line in body)) if body else len(headers[i])
            for i in range(len(headers))
        ]
        lines = ["# " + AVERAGING_NOTE]
        for line in (headers, *body):
            lines.append(
                "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(line)).rstrip()
            )
        return "\n".join(lines) + "\n"


def aggregate(
    domain_name: str, records, empty_precision: float = 1.0
) -> DomainRow:
    records = tuple(records)
    if not records:
        raise EvalError("nothing to aggregate")
    tp = sum(r.grounding.tp for r in records)
    fp = sum(r.grounding.fp for r in records)
    fn = sum(r.grounding.fn for r in records)
    return DomainRow(
        domain=domain_name,
        n=len(records),
        precision=tp / (tp + fp) if tp + fp else empty_precision,
        recall=tp / (tp + fn) if tp + fn else 1.0,
        macro_precision=fmean(r.grounding.precision for r in records),
        macro_recall=fmean(r.grounding.recall for r in records),
        problem_validity=fmean(float(r.problem_valid) for r in records),
        plan_validity=fmean(float(r.plan_valid) for r in records),
        success=fmean(float(r.success) for r in records),
    )


def load_manifest(path) -> tuple[Domain, tuple[ManifestEntry, ...]]:
    """Read a manifest JSON file; paths inside resolve against its folder."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise EvalError(f"cannot read manifest {path}: {exc}") from None
    if not isinstance(raw, dict) or "domain_file" not in raw or "problems" not in raw:
        raise EvalError("manifest must be an object with domain_file and problems")
    base = path.parent
    from sceneground.pddl import parse_domain

    try:
        domain = parse_domain((base / raw["domain_file"]).read_text(encoding="utf-8"))
    except OSError as exc:
        raise EvalError(f"cannot read domain file: {exc}") from None
    problems = raw["problems"]
    if not isinstance(problems, list) or not problems:
        raise EvalError("manifest lists no problems")
    entries = []
    for index, item in enumerate(problems):
        if not isinstance(item, dict):
            raise EvalError(f"problem {index} is not an object")
        for key in ("scene", "exemplar", "ground_truth_problem"):
            if key not in item:
                raise EvalError(f"problem {index} is missing {key}")
        text = item.get("goal_text")
        structured = item.get("goal_structured")
        if (text is None) == (structured is None):
            raise EvalError(
                f"problem {index} needs exactly one of goal_text, goal_structured"
            )
        stem = re.sub(r"[^a-z0-9_-]", "-", Path(item["scene"]).stem.lower()) or "scene"
        entries.append(
            ManifestEntry(
                name=f"{index:03d}-{stem}",
                scene=str(base / item["scene"]),
                exemplar=str(base / item["exemplar"]),
                goal_text=text,
                goal_structured=structured,
                ground_truth_problem=str(base / item["ground_truth_problem"]),
            )
        )
    return domain, tuple(entries)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SceneError(f"cannot read {path}: {exc}") from None


def _goal_literals(domain, entry, scene, config):
    if entry.goal_structured is not None:
        spec = parse_structured_goal(entry.goal_structured, domain)
    else:
        if config.llm is None:
            raise GoalError("goal_text entries need an LLM endpoint configured")
        cassette = (
            Cassette(config.cassette, mode=config.cassette_mode)
            if config.cassette
            else None
        )
        spec = llm_parse_goal(entry.goal_text, domain, config.llm, cassette)
    return resolve_goal(spec, scene.typed_objects(), domain)


def evaluate_problem(
    domain: Domain, entry: ManifestEntry, config: PipelineConfig, solver=solve
) -> ProblemRecord:
    """Score one manifest entry, never raising on per-problem failures.

    Ground truth that cannot be read or parsed is a manifest defect and
    does raise.  Pipeline stages fail softly: a stage failure zeroes that
    stage and everything after it (a failed goal stage still reports the
    grounding scores, matching the single-attempt protocol).
    """
    truth = parse_problem(_read(entry.ground_truth_problem), domain)
    observed = {sig.name for sig in domain.observed}
    truth_observed = {a for a in truth.init if a.predicate in observed}

    try:
        obs = observation_from_json(_read(entry.scene))
        exemplar = exemplar_from_json(
            _read(entry.exemplar), domain, config.match_threshold
        )
        scene = merge_detections(obs, domain, config.match_threshold)
        init = graph_to_init(classify_scene(scene, domain, exemplar))
    except (SceneError, ExemplarError) as exc:
        empty = GroundingScore(0.0, 0.0, 0, 0, len(truth_observed))
        return ProblemRecord(
            entry.name, empty, False, False, False, None, f"grounding: {exc}"
        )
    grounding = triplet_pr(init, truth.init, observed, config.empty_precision)

    try:
        goal = _goal_literals(domain, entry, scene, config)
    except GoalError as exc:
        return ProblemRecord(
            entry.name, grounding, False, False, False, None, f"goal: {exc}"
        )

    problem = Problem(entry.name, domain.name, scene.typed_objects(), init, goal)
    try:
        parse_problem(serialize_problem(problem), domain)
    except PddlError as exc:
        return ProblemRecord(
            entry.name, grounding, False, False, False, None, f"invalid-problem: {exc}"
        )

    result = solver(domain, problem, config.search)
    if result.status != "solved":
        return ProblemRecord(
            entry.name,
            grounding,
            True,
            False,
            False,
            None,
            f"planner: {result.status}",
        )
    plan_valid = validate_plan(domain, problem.init, problem.goal, result.plan).ok
    success = validate_plan(domain, truth.init, truth.goal, result.plan).ok
    return ProblemRecord(
        entry.name, grounding, True, plan_valid, success, len(result.plan), None
    )


def _pool_worker(packed):
    domain, entry, config = packed
    return evaluate_problem(domain, entry, config)


def evaluate_suite(
    manifest, config: PipelineConfig = PipelineConfig(), solver=solve
) -> SuiteReport:
    """Evaluate every manifest problem; one report row per domain.

    Runs in-process unless config.jobs > 1, the solver is the default, and
    no entry needs a live LLM call (worker processes cannot share a
    cassette safely).  Records keep manifest order either way.
    """
    domain, entries = load_manifest(manifest)
    parallel = (
        config.jobs > 1
        and solver is solve
        and all(e.goal_text is None for e in entries)
    )
    if parallel:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            records = tuple(
                pool.map(_pool_worker, [(domain, e, config) for e in entries])
            )
    else:
        records = tuple(evaluate_problem(domain, e, config, solver) for e in entries)
    row = aggregate(domain.name, records, config.empty_precision)
    return SuiteReport((row,), records)
