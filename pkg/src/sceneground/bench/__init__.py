"""Synthetic scene suites for the three shipped evaluation domains."""

from importlib import resources

DOMAIN_KINDS = ("blocksworld", "hanoi", "cooking")


def domain_text(kind: str) -> str:
    """PDDL source of a shipped domain file (blocksworld, hanoi, cooking)."""
    if kind not in DOMAIN_KINDS:
        raise ValueError(f"no shipped domain named {kind!r}")
    path = resources.files("sceneground.bench").joinpath("data", f"{kind}.pddl")
    return path.read_text(encoding="utf-8")


from sceneground.bench.generate import (  # noqa: E402  (needs domain_text above)
    SEPARATION_MARGIN,
    BenchError,
    GenConfig,
    GeneratedProblem,
    Meta,
    derive_atoms,
    gen_blocksworld,
    gen_cooking,
    gen_hanoi,
    gen_hanoi_preset,
    generate,
    perturb,
    write_suite,
)

__all__ = [
    "DOMAIN_KINDS",
    "SEPARATION_MARGIN",
    "BenchError",
    "GenConfig",
    "GeneratedProblem",
    "Meta",
    "derive_atoms",
    "domain_text",
    "gen_blocksworld",
    "gen_cooking",
    "gen_hanoi",
    "gen_hanoi_preset",
    "generate",
    "perturb",
    "write_suite",
]
