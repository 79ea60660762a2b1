"""Ground object detections into plannable PDDL problems and solve them.

The pipeline: detections -> typed object set -> domain-conditioned scene
graph (one edge per grounded observed predicate, via one-shot nearest-neighbor
classification over box features) -> PDDL problem -> plan.  Benchmark
generators for three tabletop domains and an evaluation harness live in
:mod:`sceneground.bench` and :mod:`sceneground.metrics`.
"""

__version__ = "0.1.0"

from sceneground.pddl import (
    Domain,
    GroundAtom,
    PddlError,
    Plan,
    Problem,
    parse_domain,
    parse_problem,
    serialize_problem,
)

__all__ = [
    "Domain",
    "GroundAtom",
    "PddlError",
    "Plan",
    "Problem",
    "parse_domain",
    "parse_problem",
    "serialize_problem",
    "__version__",
]
