"""Command line front end.

Subcommands cover the whole pipeline: checking PDDL files, grounding a
scene into a problem, planning, validating plans, generating benchmark
suites, and scoring them.  Exit status is 0 on success, 1 on domain
errors (bad input files, unsolvable problems, failed validation), 2 on
usage errors.  Flag values win over the --config file, which wins over
built-in defaults.  Output files never embed timing, so reruns with the
same inputs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from sceneground.bench import DOMAIN_KINDS, BenchError, GenConfig, write_suite
from sceneground.goals import (
    Cassette,
    GoalError,
    LlmEndpointConfig,
    llm_parse_goal,
    parse_structured_goal,
    resolve_goal,
)
from sceneground.graph import ExemplarError, classify_scene, exemplar_from_json, ground_scene
from sceneground.metrics import EvalError, PipelineConfig, evaluate_suite, validate_plan
from sceneground.pddl import (
    PddlError,
    parse_domain,
    parse_plan,
    parse_problem,
    serialize_problem,
)
from sceneground.pddl.model import check_plannable
from sceneground.planner import PlannerError, SearchConfig, solve
from sceneground.scene import SceneError, merge_detections, observation_from_json

USER_ERRORS = (
    PddlError,
    SceneError,
    GoalError,
    ExemplarError,
    BenchError,
    EvalError,
    PlannerError,
    OSError,
)


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        raw = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise EvalError(f"bad config file {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise EvalError(f"config file {path} must hold a JSON object")
    return raw


def _setting(flag, config: dict, key: str, default):
    if flag is not None:
        return flag
    return config.get(key, default)


def _search_config(args, config: dict) -> SearchConfig:
    section = config.get("search", {})
    defaults = SearchConfig()
    return SearchConfig(
        mode=_setting(args.mode, section, "mode", defaults.mode),
        heuristic=_setting(args.heuristic, section, "heuristic", defaults.heuristic),
        node_limit=_setting(args.node_limit, section, "node_limit", defaults.node_limit),
        time_limit_s=_setting(
            args.time_limit, section, "time_limit_s", defaults.time_limit_s
        ),
    )


def _llm_config(args, config: dict) -> LlmEndpointConfig | None:
    section = config.get("llm") or {}
    base_url = _setting(getattr(args, "llm_base_url", None), section, "base_url", None)
    model = _setting(getattr(args, "llm_model", None), section, "model", None)
    if base_url is None and model is None:
        return None
    if base_url is None or model is None:
        raise GoalError("an LLM endpoint needs both a base URL and a model name")
    kwargs = {}
    key_env = _setting(getattr(args, "llm_api_key_env", None), section, "api_key_env", None)
    if key_env is not None:
        kwargs["api_key_env"] = key_env
    return LlmEndpointConfig(base_url, model, **kwargs)


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------


def _cmd_pddl_check(args, config: dict) -> int:
    domain = parse_domain(_read(args.domain))
    print(f"domain {domain.name}: ok")
    if args.problem is None:
        return 0
    problem = parse_problem(_read(args.problem), domain)
    violations = check_plannable(problem.init, domain, problem.objects)
    if violations:
        for v in violations:
            print(f"problem {problem.name}: {v}", file=sys.stderr)
        return 1
    print(f"problem {problem.name}: ok")
    return 0


def _cmd_ground(args, config: dict) -> int:
    domain = parse_domain(_read(args.domain))
    threshold = _setting(args.threshold, config, "match_threshold", 0.5)
    obs = observation_from_json(_read(args.scene))
    exemplar = exemplar_from_json(_read(args.exemplar), domain, threshold)
    scene = merge_detections(obs, domain, threshold)

    goal_text = args.goal
    if Path(goal_text).is_file():
        goal_text = _read(goal_text)
    try:
        spec = parse_structured_goal(goal_text, domain)
    except GoalError:
        llm = _llm_config(args, config)
        if llm is None:
            raise GoalError(
                "goal is not in the structured grammar and no LLM endpoint is configured"
            ) from None
        cassette_path = _setting(args.cassette, config, "cassette", None)
        cassette = None
        if cassette_path is not None:
            mode = _setting(args.cassette_mode, config, "cassette_mode", "replay")
            cassette = Cassette(Path(cassette_path), mode)
        spec = llm_parse_goal(goal_text, domain, llm, cassette)
    goal = resolve_goal(spec, scene.typed_objects(), domain)

    name = args.name or Path(args.scene).stem.lower().replace(" ", "-")
    problem = ground_scene(obs, domain, exemplar, goal, threshold, name)
    graph = classify_scene(scene, domain, exemplar)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    problem_path = out / f"{name}.pddl"
    graph_path = out / f"{name}.graph.json"
    problem_path.write_text(serialize_problem(problem), encoding="utf-8")
    graph_path.write_text(
        json.dumps(graph.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(problem_path)
    print(graph_path)
    return 0


def _cmd_plan(args, config: dict) -> int:
    domain = parse_domain(_read(args.domain))
    problem = parse_problem(_read(args.problem), domain)
    result = solve(domain, problem, _search_config(args, config))
    summary = {
        "status": result.status,
        "plan_length": len(result.plan) if result.plan is not None else None,
        "expanded_nodes": result.expanded,
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "result.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        if result.plan is not None:
            lines = "".join(f"{step}\n" for step in result.plan.steps)
            (out / "plan.txt").write_text(lines, encoding="utf-8")
    if result.status != "solved":
        print(f"error: {result.status}", file=sys.stderr)
        return 1
    return 0


def _cmd_validate(args, config: dict) -> int:
    domain = parse_domain(_read(args.domain))
    problem = parse_problem(_read(args.problem), domain)
    plan = parse_plan(_read(args.plan))
    verdict = validate_plan(domain, problem.init, problem.goal, plan)
    print(
        json.dumps(
            {"ok": verdict.ok, "step": verdict.step, "reason": verdict.reason},
            indent=2,
            sort_keys=True,
        )
    )
    return 0 if verdict.ok else 1


def _cmd_genbench(args, config: dict) -> int:
    sigma = _setting(args.sigma, config, "sigma", 0.0)
    cfg = GenConfig(
        kind=args.kind, n=args.n, d=args.d, g=args.g, sigma=sigma, seed=args.seed
    )
    manifest = write_suite(cfg, args.seeds, args.out)
    print(manifest)
    return 0


def _cmd_eval(args, config: dict) -> int:
    cassette_path = _setting(args.cassette, config, "cassette", None)
    pipeline = PipelineConfig(
        match_threshold=_setting(args.threshold, config, "match_threshold", 0.5),
        search=_search_config(args, config),
        empty_precision=_setting(args.empty_precision, config, "empty_precision", 1.0),
        llm=_llm_config(args, config),
        cassette=cassette_path,
        cassette_mode=_setting(args.cassette_mode, config, "cassette_mode", "replay"),
        jobs=_setting(args.jobs, config, "jobs", 1),
    )
    report = evaluate_suite(Path(args.manifest), pipeline)
    print(report.to_table())
    if args.out is not None:
        Path(args.out).write_text(report.to_json(), encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------
# Argument wiring
# ---------------------------------------------------------------------------


def _add_search_flags(sub):
    sub.add_argument("--mode", choices=("optimal", "satisficing"))
    sub.add_argument(
        "--heuristic", choices=("additive-cost", "goal-count", "blind")
    )
    sub.add_argument("--node-limit", type=int)
    sub.add_argument("--time-limit", type=float, metavar="SECONDS")


def _add_llm_flags(sub):
    sub.add_argument("--llm-base-url")
    sub.add_argument("--llm-model")
    sub.add_argument("--llm-api-key-env")
    sub.add_argument("--cassette", metavar="FILE")
    sub.add_argument("--cassette-mode", choices=("replay", "record"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sceneground",
        description="Scene observations to PDDL problems, plans, and scores.",
    )
    parser.add_argument("--config", metavar="FILE", help="JSON defaults file")
    commands = parser.add_subparsers(dest="command", required=True)

    pddl = commands.add_parser("pddl", help="static checks on PDDL files")
    pddl_sub = pddl.add_subparsers(dest="pddl_command", required=True)
    check = pddl_sub.add_parser("check", help="parse and type-check files")
    check.add_argument("domain")
    check.add_argument("problem", nargs="?")
    check.set_defaults(handler=_cmd_pddl_check)

    ground = commands.add_parser(
        "ground", help="scene + exemplar + goal to problem PDDL and graph JSON"
    )
    ground.add_argument("domain")
    ground.add_argument("scene")
    ground.add_argument("exemplar")
    ground.add_argument("--goal", required=True, metavar="TEXT_OR_FILE")
    ground.add_argument("--out", default=".", metavar="DIR")
    ground.add_argument("--name", help="basename for the outputs")
    ground.add_argument("--threshold", type=float, metavar="IOU")
    _add_llm_flags(ground)
    ground.set_defaults(handler=_cmd_ground)

    plan = commands.add_parser("plan", help="solve a problem")
    plan.add_argument("domain")
    plan.add_argument("problem")
    plan.add_argument("--out", metavar="DIR", help="write plan.txt and result.json")
    _add_search_flags(plan)
    plan.set_defaults(handler=_cmd_plan)

    validate = commands.add_parser("validate", help="replay a plan file")
    validate.add_argument("domain")
    validate.add_argument("problem")
    validate.add_argument("plan")
    validate.set_defaults(handler=_cmd_validate)

    genbench = commands.add_parser("genbench", help="write a benchmark suite")
    genbench.add_argument("kind", choices=DOMAIN_KINDS)
    genbench.add_argument("--n", type=int, default=5, help="blocksworld blocks")
    genbench.add_argument("--d", type=int, default=4, help="hanoi disks")
    genbench.add_argument("--g", type=int, default=3, help="hanoi pegs")
    genbench.add_argument("--seeds", type=int, default=10, help="problem count")
    genbench.add_argument("--sigma", type=float, metavar="NOISE")
    genbench.add_argument("--seed", type=int, default=0, help="first seed")
    genbench.add_argument("--out", required=True, metavar="DIR")
    genbench.set_defaults(handler=_cmd_genbench)

    evaluate = commands.add_parser("eval", help="score a suite manifest")
    evaluate.add_argument("manifest")
    evaluate.add_argument("--out", metavar="FILE", help="also write report JSON")
    evaluate.add_argument("--threshold", type=float, metavar="IOU")
    evaluate.add_argument("--empty-precision", type=float, choices=(0.0, 1.0))
    evaluate.add_argument("--jobs", type=int)
    _add_search_flags(evaluate)
    _add_llm_flags(evaluate)
    evaluate.set_defaults(handler=_cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return args.handler(args, config)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
