"""Reference problems used by the test suite, the CLI and the benchmarks."""

from __future__ import annotations

import numpy as np

from .finite import Alphabet, make_distribution
from .problems import LearnerSpec, LearningProblem, ProblemSpec


def _problem(instances, hypotheses, loss, sigma="auto"):
    return LearningProblem(Alphabet(tuple(instances)), Alphabet(tuple(hypotheses)), loss, sigma)


def zero_one(k: int) -> np.ndarray:
    return 1.0 - np.eye(k)


def copy_channel(p_z=(0.5, 0.5)) -> ProblemSpec:
    """Binary 0-1 loss, n = 1, learner outputs its single training sample."""
    problem = _problem(("0", "1"), ("0", "1"), zero_one(2))
    return ProblemSpec(problem, make_distribution(("0", "1"), p_z),
                       LearnerSpec("erm_noisy", noise=0.0), 1)


def independent(constant_loss: bool = False, n: int = 2) -> ProblemSpec:
    loss = np.full((2, 2), 0.5) if constant_loss else zero_one(2)
    problem = _problem(("0", "1"), ("0", "1"), loss)
    return ProblemSpec(problem, make_distribution(("0", "1"), (0.5, 0.5)),
                       LearnerSpec("independent"), n)


def gibbs_golden() -> ProblemSpec:
    """|Z| = |W| = 2, 0-1 loss, uniform P_Z and prior, n = 2, beta = 1."""
    problem = _problem(("0", "1"), ("0", "1"), zero_one(2))
    return ProblemSpec(problem, make_distribution(("0", "1"), (0.5, 0.5)),
                       LearnerSpec("gibbs", beta=1.0), 2)


EXTENDED_LOSS = np.array(
    [
        [0.0, 0.6, 1.0],
        [0.3, 0.2, 0.8],
        [1.0, 0.4, 0.1],
        [0.5, 0.5, 0.5],
        [0.9, 0.0, 0.7],
    ]
)


def extended_gibbs(n: int, beta: float) -> ProblemSpec:
    """|Z| = 3, |W| = 5 Gibbs learner with uniform P_Z and prior."""
    problem = _problem(("a", "b", "c"), ("h0", "h1", "h2", "h3", "h4"), EXTENDED_LOSS)
    return ProblemSpec(problem, make_distribution(("a", "b", "c"), (1.0, 1.0, 1.0)),
                       LearnerSpec("gibbs", beta=beta), n)


def random_problem(rng: np.random.Generator, max_size: int = 4, max_n: int = 4) -> ProblemSpec:
    """A random small problem with a Gibbs or noisy-ERM learner.

    Instance weights are drawn from [0.5, 1] so no dataset is vanishingly rare.
    """
    kz = int(rng.integers(2, max_size + 1))
    kw = int(rng.integers(2, max_size + 1))
    n = int(rng.integers(1, max_n + 1))
    instances = tuple(f"z{i}" for i in range(kz))
    hypotheses = tuple(f"w{i}" for i in range(kw))
    loss = np.round(rng.uniform(0.0, 1.0, size=(kw, kz)), 3)
    problem = _problem(instances, hypotheses, loss)
    p_z = make_distribution(instances, rng.uniform(0.5, 1.0, size=kz))
    if rng.random() < 0.6:
        prior = make_distribution(hypotheses, rng.uniform(0.2, 1.0, size=kw))
        learner = LearnerSpec("gibbs", beta=float(rng.uniform(0.5, 4.0)), prior=prior)
    else:
        learner = LearnerSpec("erm_noisy", noise=float(rng.uniform(0.05, 0.9)))
    return ProblemSpec(problem, p_z, learner, n)


def random_problems(count: int = 30, seed: int = 20240917) -> list[ProblemSpec]:
    rng = np.random.default_rng(seed)
    return [random_problem(rng) for _ in range(count)]


def golden_suite() -> dict[str, ProblemSpec]:
    """The reference configuration: copy channel, independent kernel, the Gibbs
    golden case, extended Gibbs (n = 1..6, beta in {0.5, 2}) and 30 seeded
    random problems."""
    suite = {
        "copy": copy_channel(),
        "independent": independent(),
        "independent_constant": independent(constant_loss=True),
        "gibbs_golden": gibbs_golden(),
    }
    for n in range(1, 7):
        for beta in (0.5, 2.0):
            suite[f"extended_n{n}_b{beta:g}"] = extended_gibbs(n, beta)
    for i, spec in enumerate(random_problems()):
        suite[f"random_{i:02d}"] = spec
    return suite
