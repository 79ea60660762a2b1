"""Grounding scores, plan validation, and suite evaluation."""

from __future__ import annotations

import json
import random

import pytest

from naive_ref import naive_run
from sceneground.bench import domain_text
from sceneground.metrics import (
    EvalError,
    GroundingScore,
    PipelineConfig,
    ProblemRecord,
    SuiteReport,
    Verdict,
    aggregate,
    evaluate_suite,
    load_manifest,
    triplet_pr,
    validate_plan,
)
from sceneground.pddl import parse_domain, serialize_problem
from sceneground.pddl.model import (
    GroundAtom,
    GroundLiteral,
    Plan,
    PlanStep,
    Problem,
)
from sceneground.planner import (
    SearchConfig,
    SolveResult,
    applicable,
    apply_action,
    ground_actions,
    make_state,
    solve,
)
from sceneground.graph import exemplar_to_json
from sceneground.scene import Box, Detection, SceneObservation

BLOCKS = parse_domain(domain_text("blocksworld"))
HANOI = parse_domain(domain_text("hanoi"))
OBSERVED = {sig.name for sig in BLOCKS.observed}


def on(a: str, b: str) -> GroundAtom:
    return GroundAtom("on", (a, b))


def lit(predicate: str, *args: str, negated: bool = False) -> GroundLiteral:
    return GroundLiteral(GroundAtom(predicate, args), negated)


# ---------------------------------------------------------------------------
# triplet_pr
# ---------------------------------------------------------------------------


def test_half_overlap_scores_half():
    a, b, c = on("x", "y"), on("y", "z"), on("z", "x")
    score = triplet_pr({a, b}, {b, c}, OBSERVED)
    assert (score.precision, score.recall) == (0.5, 0.5)
    assert (score.tp, score.fp, score.fn) == (1, 1, 1)


def test_exact_match_scores_one():
    atoms = {on("x", "y"), on("y", "z")}
    score = triplet_pr(atoms, set(atoms), OBSERVED)
    assert (score.precision, score.recall) == (1.0, 1.0)


def test_derived_atoms_are_ignored():
    pred = {on("x", "y"), GroundAtom("covered", ("y",))}
    truth = {on("x", "y"), GroundAtom("buried", ("y",))}
    score = triplet_pr(pred, truth, OBSERVED)
    assert (score.tp, score.fp, score.fn) == (1, 0, 0)
    assert (score.precision, score.recall) == (1.0, 1.0)


def test_empty_prediction_conventions():
    truth = {on("x", "y")}
    assert triplet_pr(set(), truth, OBSERVED).precision == 1.0
    assert triplet_pr(set(), truth, OBSERVED, empty_precision=0.0).precision == 0.0
    assert triplet_pr(set(), truth, OBSERVED).recall == 0.0
    assert triplet_pr({on("x", "y")}, set(), OBSERVED).recall == 1.0
    with pytest.raises(EvalError):
        triplet_pr(set(), set(), OBSERVED, empty_precision=0.5)


def test_scores_do_not_depend_on_iteration_order():
    atoms = [on("a", "b"), on("b", "c"), on("c", "d")]
    forward = triplet_pr(atoms, atoms[:2], OBSERVED)
    backward = triplet_pr(list(reversed(atoms)), atoms[1::-1], OBSERVED)
    assert forward == backward


# ---------------------------------------------------------------------------
# validate_plan
# ---------------------------------------------------------------------------


def test_empty_plan_with_satisfied_derived_goal_is_ok():
    verdict = validate_plan(
        BLOCKS, {on("b1", "b2")}, (lit("covered", "b2"),), Plan(())
    )
    assert verdict == Verdict(True, None, None)


def test_first_step_precondition_failure_reports_step_zero():
    plan = Plan((PlanStep("unstack-from-base", ("b1", "b2")),))
    verdict = validate_plan(BLOCKS, set(), (lit("covered", "b2"),), plan)
    assert verdict == Verdict(False, 0, "precondition-unsatisfied")


def test_unknown_action_and_bad_arity():
    good_goal = (lit("covered", "b2"),)
    plan = Plan((PlanStep("teleport", ("b1",)),))
    assert validate_plan(BLOCKS, set(), good_goal, plan).reason == "unknown-action"
    plan = Plan((PlanStep("unstack-from-base", ("b1",)),))
    verdict = validate_plan(BLOCKS, set(), good_goal, plan)
    assert verdict == Verdict(False, 0, "unknown-action")


def test_goal_failure_has_no_step_index():
    plan = Plan((PlanStep("unstack-from-base", ("b1", "b2")),))
    verdict = validate_plan(BLOCKS, {on("b1", "b2")}, (lit("on", "b1", "b2"),), plan)
    assert verdict == Verdict(False, None, "goal-unsatisfied")


def test_equality_preconditions_are_enforced():
    # move requires from != to; hand it the same peg twice.
    init = {
        GroundAtom("onpeg", ("d1", "p1")),
        GroundAtom("smaller", ("d1", "d2")),
    }
    plan = Plan((PlanStep("move", ("d1", "p1", "p1")),))
    verdict = validate_plan(HANOI, init, (lit("onpeg", "d1", "p1"),), plan)
    assert verdict == Verdict(False, 0, "precondition-unsatisfied")


def test_solver_plans_validate_end_to_end():
    objects = tuple((f"b{i}", "block") for i in range(1, 5))
    problem = Problem(
        "case",
        "blocksworld",
        objects,
        frozenset({on("b1", "b2"), on("b2", "b3")}),
        (lit("on", "b3", "b1"),),
    )
    result = solve(BLOCKS, problem, SearchConfig(mode="optimal"))
    assert result.status == "solved"
    assert validate_plan(BLOCKS, problem.init, problem.goal, result.plan).ok


def test_ok_verdict_carries_no_failure_data():
    with pytest.raises(ValueError):
        Verdict(True, 3, None)
    with pytest.raises(ValueError):
        Verdict(True, None, "goal-unsatisfied")


def random_state_and_plan(rng: random.Random):
    """A random blocksworld state plus a plan that is legal, damaged, or both."""
    blocks = [f"b{i}" for i in range(1, 5)]
    objects = tuple((b, "block") for b in blocks)
    init = set()
    tower = [blocks[0]]
    for b in blocks[1:]:
        if rng.random() < 0.5:
            init.add(on(b, tower[-1]))
            tower.append(b)
        else:
            tower = [b]
    actions = ground_actions(BLOCKS, objects)
    state = make_state(frozenset(init), BLOCKS)
    steps = []
    for _ in range(rng.randint(0, 4)):
        roll = rng.random()
        if roll < 0.6:
            options = [a for a in actions if applicable(state, a)]
            if not options:
                continue
            choice = rng.choice(options)
            steps.append(choice.step())
            state = apply_action(state, choice, BLOCKS)
        elif roll < 0.8:
            choice = rng.choice(actions)  # often inapplicable
            steps.append(choice.step())
        elif roll < 0.9:
            steps.append(PlanStep("warp", tuple(rng.sample(blocks, 2))))
        else:
            steps.append(PlanStep("unstack-from-base", (rng.choice(blocks),)))
    goal = (
        lit("on", rng.choice(blocks), rng.choice(blocks)),
        lit("covered", rng.choice(blocks), negated=rng.random() < 0.5),
    )
    return frozenset(init), goal, Plan(tuple(steps))


def test_validator_agrees_with_naive_interpreter():
    for seed in range(100):
        init, goal, plan = random_state_and_plan(random.Random(seed))
        verdict = validate_plan(BLOCKS, init, goal, plan)
        ok, reason, step = naive_run(BLOCKS, init, goal, plan)
        assert (verdict.ok, verdict.reason, verdict.step) == (ok, reason, step), (
            seed,
            plan,
        )


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def record(name, tp, fp, fn, p, r, ok=True):
    return ProblemRecord(
        name, GroundingScore(p, r, tp, fp, fn), ok, ok, ok, 1 if ok else None, None
    )


def test_micro_pools_counts_and_macro_averages_ratios():
    # Problem A: tp=1 fp=0 fn=1 (P=1, R=0.5); B: tp=1 fp=1 fn=0 (P=0.5, R=1).
    rows = [record("a", 1, 0, 1, 1.0, 0.5), record("b", 1, 1, 0, 0.5, 1.0)]
    row = aggregate("blocksworld", rows)
    assert row.precision == pytest.approx(2 / 3)
    assert row.recall == pytest.approx(2 / 3)
    assert row.macro_precision == pytest.approx(0.75)
    assert row.macro_recall == pytest.approx(0.75)
    assert row.n == 2


def test_aggregate_rejects_empty_input():
    with pytest.raises(EvalError):
        aggregate("blocksworld", [])


def test_report_table_and_json_round_trip():
    row = aggregate("blocksworld", [record("a", 2, 0, 0, 1.0, 1.0)])
    report = SuiteReport((row,), (record("a", 2, 0, 0, 1.0, 1.0),))
    table = report.to_table()
    assert table.startswith("# P/R are micro-averaged")
    header, data = table.splitlines()[1:3]
    assert header.index("P") == data.index("1.000")
    parsed = json.loads(report.to_json())
    assert parsed["rows"][0]["success"] == 1.0
    assert parsed["problems"][0]["name"] == "a"


# ---------------------------------------------------------------------------
# Suite evaluation end to end
# ---------------------------------------------------------------------------

BLOCK = 10


def block_box(x: int, y: int) -> Box:
    return Box(float(x), float(y), float(x + BLOCK), float(y + BLOCK))


def block_obs(origins) -> SceneObservation:
    detections = tuple(Detection("block", block_box(x, y)) for x, y in origins)
    return SceneObservation(100, 100, detections, ())


def write_suite(tmp_path, goals):
    """A tiny blocksworld suite: one stacked pair plus a stray block.

    Scene raster names: block1 = top of the stack, block2 = the stray,
    block3 = the base, so truth init is {on(block3, block1)} under the
    exemplar's below-is-on convention.
    """
    (tmp_path / "domain.pddl").write_text(domain_text("blocksworld"))
    exemplar_obs = block_obs([(10, 40), (10, 10), (50, 10)])
    exemplar_atoms = {on("block3", "block1")}
    (tmp_path / "exemplar.json").write_text(
        exemplar_to_json(exemplar_obs, exemplar_atoms)
    )
    problems = []
    for index, goal in enumerate(goals):
        scene = block_obs([(12, 40), (12, 10), (52, 10)])
        scene_name = f"scene-{index}.json"
        (tmp_path / scene_name).write_text(scene.to_json())
        truth = Problem(
            f"truth-{index}",
            "blocksworld",
            tuple((f"block{i}", "block") for i in (1, 2, 3)),
            frozenset({on("block3", "block1")}),
            goal["truth_goal"],
        )
        truth_name = f"truth-{index}.pddl"
        (tmp_path / truth_name).write_text(serialize_problem(truth))
        problems.append(
            {
                "scene": scene_name,
                "exemplar": "exemplar.json",
                "goal_structured": goal["structured"],
                "ground_truth_problem": truth_name,
            }
        )
    manifest = tmp_path / "manifest.json"
    manifest.write_text(
        json.dumps({"domain_file": "domain.pddl", "problems": problems}, indent=2)
    )
    return manifest


TWO_GOALS = (
    {"structured": "on(block2, block1)", "truth_goal": (lit("on", "block2", "block1"),)},
    {"structured": "covered(block1)", "truth_goal": (lit("covered", "block1"),)},
)


def test_clean_suite_scores_perfectly(tmp_path):
    manifest = write_suite(tmp_path, TWO_GOALS)
    report = evaluate_suite(manifest)
    row = report.rows[0]
    assert row.domain == "blocksworld"
    assert row.n == 2
    assert (row.precision, row.recall) == (1.0, 1.0)
    assert (row.macro_precision, row.macro_recall) == (1.0, 1.0)
    assert row.problem_validity == 1.0
    assert row.plan_validity == 1.0
    assert row.success == 1.0
    assert all(r.failure is None for r in report.records)
    assert [r.name for r in report.records] == ["000-scene-0", "001-scene-1"]


def test_empty_plan_stub_counts_already_satisfied_goals(tmp_path):
    manifest = write_suite(tmp_path, TWO_GOALS)

    def stub(domain, problem, cfg):
        return SolveResult("solved", Plan(()), 0, 0.0)

    report = evaluate_suite(manifest, solver=stub)
    # covered(block1) already holds in the ground truth init; the other
    # goal needs real work, so the stub scores exactly the satisfied half.
    assert report.rows[0].success == 0.5
    assert report.rows[0].plan_validity == 0.5
    assert report.rows[0].precision == 1.0  # grounding unaffected by the stub


def test_parallel_evaluation_matches_inline(tmp_path):
    manifest = write_suite(tmp_path, TWO_GOALS)
    inline = evaluate_suite(manifest, PipelineConfig(jobs=1))
    pooled = evaluate_suite(manifest, PipelineConfig(jobs=2))
    assert inline == pooled


def test_broken_scene_zeroes_one_problem_only(tmp_path):
    manifest = write_suite(tmp_path, TWO_GOALS)
    (tmp_path / "scene-0.json").write_text("{not json")
    report = evaluate_suite(manifest)
    bad, good = report.records
    assert bad.failure is not None and bad.failure.startswith("grounding:")
    assert (bad.grounding.precision, bad.grounding.recall) == (0.0, 0.0)
    assert bad.grounding.fn == 1  # the truth atom it failed to predict
    assert not bad.success
    assert good.success
    assert report.rows[0].success == 0.5


def test_goal_failure_still_scores_grounding(tmp_path):
    goals = (
        {"structured": "on(block9, block1)", "truth_goal": (lit("on", "block2", "block1"),)},
    )
    manifest = write_suite(tmp_path, goals)
    report = evaluate_suite(manifest)
    rec = report.records[0]
    assert rec.failure is not None and rec.failure.startswith("goal:")
    assert (rec.grounding.precision, rec.grounding.recall) == (1.0, 1.0)
    assert not rec.problem_valid
    assert not rec.success


def test_goal_text_without_endpoint_is_a_goal_failure(tmp_path):
    manifest = write_suite(tmp_path, TWO_GOALS[:1])
    raw = json.loads(manifest.read_text())
    raw["problems"][0].pop("goal_structured")
    raw["problems"][0]["goal_text"] = "stack block2 onto block1"
    manifest.write_text(json.dumps(raw))
    report = evaluate_suite(manifest)
    rec = report.records[0]
    assert rec.failure is not None and rec.failure.startswith("goal:")
    assert rec.grounding.precision == 1.0


def test_success_implies_a_plan_was_produced(tmp_path):
    manifest = write_suite(tmp_path, TWO_GOALS)
    report = evaluate_suite(manifest)
    for rec in report.records:
        if rec.success:
            assert rec.plan_length is not None


# ---------------------------------------------------------------------------
# Manifest loading
# ---------------------------------------------------------------------------


def test_missing_manifest_raises():
    with pytest.raises(EvalError, match="cannot read manifest"):
        load_manifest("/nonexistent/manifest.json")


@pytest.mark.parametrize(
    "mutate,fragment",
    [
        (lambda raw: raw.pop("domain_file"), "domain_file"),
        (lambda raw: raw.update(problems=[]), "no problems"),
        (lambda raw: raw["problems"][0].pop("scene"), "missing scene"),
        (
            lambda raw: raw["problems"][0].update(goal_text="also"),
            "exactly one",
        ),
        (
            lambda raw: raw["problems"][0].pop("goal_structured"),
            "exactly one",
        ),
    ],
)
def test_malformed_manifests_are_rejected(tmp_path, mutate, fragment):
    manifest = write_suite(tmp_path, TWO_GOALS[:1])
    raw = json.loads(manifest.read_text())
    mutate(raw)
    manifest.write_text(json.dumps(raw))
    with pytest.raises(EvalError, match=fragment):
        load_manifest(manifest)


def test_pipeline_config_validation():
    with pytest.raises(EvalError):
        PipelineConfig(match_threshold=1.5)
    with pytest.raises(EvalError):
        PipelineConfig(jobs=0)
    with pytest.raises(EvalError):
        PipelineConfig(empty_precision=0.25)
