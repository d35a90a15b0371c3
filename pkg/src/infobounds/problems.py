"""Synthetic learning problems and the randomized learners run on them.

A problem document is JSON::

    {"instances": ["0", "1"], "hypotheses": ["0", "1"],
     "p_z": [0.5, 0.5], "loss": [[0, 1], [1, 0]], "sigma": "auto",
     "learner": {"kind": "gibbs", "beta": 1.0, "prior": [0.5, 0.5]},
     "n": 2}

``loss[w][z]`` is the loss of hypothesis ``w`` on instance ``z``. The Gibbs
learner uses the summed (not averaged) training loss in its exponent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import kernels
from .finite import (
    DEFAULT_ATOM_BUDGET,
    Alphabet,
    FiniteDistribution,
    JointModel,
    PosteriorKernel,
    build_joint,
    check_budget,
    dataset_tuples,
    make_distribution,
    product_alphabet,
)

DEGENERATE_SIGMA = 1e-12
ERM_TIE_TOL = 1e-12
LEARNER_KINDS = ("gibbs", "erm_noisy", "independent")


class SpecError(ValueError):
    """Invalid problem document. ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = ""
        if line is not None:
            where = f"line {line}: "
        if field is not None:
            where += f"field '{field}': "
        super().__init__(where + message)


@dataclass(frozen=True, eq=False)
class LearningProblem:
    instance_alphabet: Alphabet
    hypothesis_alphabet: Alphabet
    loss: np.ndarray
    sigma: Union[float, str] = "auto"

    def __post_init__(self):
        loss = np.array(self.loss, dtype=np.float64)
        if loss.shape != (self.hypothesis_alphabet.size, self.instance_alphabet.size):
            raise ValueError("loss table dimensions do not match alphabets")
        if not np.all(np.isfinite(loss)) or np.any(loss < 0):
            raise ValueError("loss entries must be finite and nonnegative")
        if self.sigma != "auto":
            s = float(self.sigma)
            if not (s > 0 and math.isfinite(s)):
                raise ValueError("sigma must be positive")
            object.__setattr__(self, "sigma", s)
        loss.setflags(write=False)
        object.__setattr__(self, "loss", loss)

    @property
    def resolved_sigma(self) -> float:
        return sigma_from_bounded_loss(self)

    @property
    def sigma_degenerate(self) -> bool:
        return self.sigma == "auto" and float(np.ptp(self.loss)) == 0.0

    def with_loss(self, loss) -> "LearningProblem":
        return LearningProblem(self.instance_alphabet, self.hypothesis_alphabet, loss, self.sigma)


def sigma_from_bounded_loss(problem: LearningProblem) -> float:
    """Subgaussian parameter: the user's value, or half the loss range.

    A constant loss under ``"auto"`` gives the placeholder ``1e-12``; check
    :attr:`LearningProblem.sigma_degenerate` to detect it.
    """
    if problem.sigma != "auto":
        return float(problem.sigma)
    if problem.loss.size == 0:
        raise ValueError("loss table is empty")
    half_range = float(np.ptp(problem.loss)) / 2.0
    return half_range if half_range > 0 else DEGENERATE_SIGMA


def _datasets(problem: LearningProblem, n: int):
    return product_alphabet(problem.instance_alphabet, n), dataset_tuples(
        problem.instance_alphabet.size, n
    )


def empirical_loss_sums(problem: LearningProblem, tuples: np.ndarray) -> np.ndarray:
    """``sums[j, w] = sum_k loss(w, z_k)`` for each dataset row of ``tuples``."""
    sums = np.zeros((tuples.shape[0], problem.hypothesis_alphabet.size))
    for k in range(tuples.shape[1]):
        sums = sums + problem.loss[:, tuples[:, k]].T
    return sums


def gibbs_log_weights(problem, tuples, beta, prior_log) -> np.ndarray:
    return prior_log[None, :] - beta * empirical_loss_sums(problem, tuples)


def gibbs_kernel(
    problem: LearningProblem, n: int, beta: float, prior: FiniteDistribution
) -> PosteriorKernel:
    """Posterior proportional to ``prior(w) * exp(-beta * sum_k loss(w, z_k))``."""
    if not (beta >= 0 and math.isfinite(beta)):
        raise ValueError("beta must be a nonnegative real")
    _check_prior(problem, prior)
    alphabet, tuples = _datasets(problem, n)
    lw = gibbs_log_weights(problem, tuples, beta, prior.log_probs)
    return PosteriorKernel.from_log_weights(alphabet, problem.hypothesis_alphabet, lw)


def erm_noisy_log_probs(problem, tuples, noise) -> np.ndarray:
    sums = empirical_loss_sums(problem, tuples)
    best = sums.min(axis=1, keepdims=True)
    argmin = sums <= best + ERM_TIE_TOL
    probs = (1.0 - noise) * argmin / argmin.sum(axis=1, keepdims=True)
    probs = probs + noise / problem.hypothesis_alphabet.size
    with np.errstate(divide="ignore"):
        return np.log(probs)


def erm_noisy_kernel(problem: LearningProblem, n: int, noise: float) -> PosteriorKernel:
    """Uniform over the empirical risk minimizers, mixed toward uniform by ``noise``."""
    if not (0.0 <= noise <= 1.0):
        raise ValueError("noise must lie in [0, 1]")
    alphabet, tuples = _datasets(problem, n)
    lw = erm_noisy_log_probs(problem, tuples, noise)
    return PosteriorKernel.from_log_weights(alphabet, problem.hypothesis_alphabet, lw)


def independent_kernel(
    prior: FiniteDistribution, n: int, instance_alphabet: Alphabet
) -> PosteriorKernel:
    """A learner that ignores its data and samples from ``prior``."""
    alphabet = product_alphabet(instance_alphabet, n)
    lw = np.broadcast_to(prior.log_probs, (alphabet.size, prior.alphabet.size))
    return PosteriorKernel(alphabet, prior.alphabet, np.array(lw))


def _check_prior(problem, prior):
    if prior.alphabet != problem.hypothesis_alphabet:
        raise ValueError("prior must be defined over the hypothesis alphabet")


@dataclass(frozen=True)
class LearnerSpec:
    kind: str
    beta: Optional[float] = None
    prior: Optional[FiniteDistribution] = None
    noise: Optional[float] = None

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if self.kind == "gibbs" and (self.beta is None or not self.beta >= 0):
            raise ValueError("gibbs learner needs beta >= 0")
        if self.kind == "erm_noisy" and (self.noise is None or not 0 <= self.noise <= 1):
            raise ValueError("erm_noisy learner needs noise in [0, 1]")

    def prior_for(self, problem: LearningProblem) -> FiniteDistribution:
        if self.prior is not None:
            return self.prior
        k = problem.hypothesis_alphabet.size
        return make_distribution(problem.hypothesis_alphabet.symbols, [1.0] * k)

    def kernel(self, problem: LearningProblem, n: int) -> PosteriorKernel:
        if self.kind == "gibbs":
            return gibbs_kernel(problem, n, float(self.beta), self.prior_for(problem))
        if self.kind == "erm_noisy":
            return erm_noisy_kernel(problem, n, float(self.noise))
        return independent_kernel(self.prior_for(problem), n, problem.instance_alphabet)

    def log_posterior(self, problem: LearningProblem, tuples: np.ndarray) -> np.ndarray:
        """Normalized log-posterior rows for arbitrary dataset rows, without enumeration."""
        if self.kind == "gibbs":
            lw = gibbs_log_weights(problem, tuples, float(self.beta), self.prior_for(problem).log_probs)
        elif self.kind == "erm_noisy":
            lw = erm_noisy_log_probs(problem, tuples, float(self.noise))
        else:
            lw = np.broadcast_to(
                self.prior_for(problem).log_probs, (tuples.shape[0], problem.hypothesis_alphabet.size)
            )
        lw = np.ascontiguousarray(lw)
        return lw - kernels.logsumexp_rows(lw)[:, None]


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """A parsed problem document: everything needed to build a joint model."""

    problem: LearningProblem
    p_z: FiniteDistribution
    learner: LearnerSpec
    n: int
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def atom_count(self) -> int:
        """Size of the joint table, ``|W| * |Z|**n``."""
        return self.problem.hypothesis_alphabet.size * self.problem.instance_alphabet.size**self.n

    def with_n(self, n: int) -> "ProblemSpec":
        return ProblemSpec(self.problem, self.p_z, self.learner, int(n), self.raw)

    def with_learner(self, **changes) -> "ProblemSpec":
        params = {"kind": self.learner.kind, "beta": self.learner.beta,
                  "prior": self.learner.prior, "noise": self.learner.noise}
        params.update(changes)
        return ProblemSpec(self.problem, self.p_z, LearnerSpec(**params), self.n, self.raw)

    def build(self, budget: int = DEFAULT_ATOM_BUDGET) -> JointModel:
        # refuse before the kernel enumerates every dataset
        check_budget(self.atom_count, budget)
        return build_joint(self.p_z, self.n, self.learner.kernel(self.problem, self.n), budget)


_TOP_FIELDS = {"instances", "hypotheses", "p_z", "loss", "sigma", "learner", "n"}
_LEARNER_FIELDS = {"kind", "beta", "prior", "noise"}


def _line_of(text: Optional[str], key: str) -> Optional[int]:
    if text is None:
        return None
    needle = f'"{key}"'
    pos = text.find(needle)
    return None if pos < 0 else text.count("\n", 0, pos) + 1


def parse_problem(doc: dict, text: Optional[str] = None) -> ProblemSpec:
    """Validate a problem document and turn it into a :class:`ProblemSpec`."""

    def fail(msg, name, key=None):
        raise SpecError(msg, name, _line_of(text, key or name.split(".")[-1]))

    if not isinstance(doc, dict):
        raise SpecError("problem document must be a JSON object")
    unknown = sorted(set(doc) - _TOP_FIELDS)
    if unknown:
        fail("unknown field", unknown[0])
    for name in ("instances", "hypotheses", "p_z", "loss", "learner", "n"):
        if name not in doc:
            raise SpecError("missing required field", name)

    try:
        instances = Alphabet(tuple(str(s) for s in doc["instances"]))
    except (TypeError, ValueError) as exc:
        fail(str(exc), "instances")
    try:
        hypotheses = Alphabet(tuple(str(s) for s in doc["hypotheses"]))
    except (TypeError, ValueError) as exc:
        fail(str(exc), "hypotheses")

    n = doc["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        fail("n must be a positive integer", "n")

    try:
        p_z = make_distribution(instances.symbols, doc["p_z"])
    except (TypeError, ValueError) as exc:
        fail(str(exc), "p_z")

    loss = doc["loss"]
    if (
        not isinstance(loss, list)
        or len(loss) != hypotheses.size
        or any(not isinstance(row, list) or len(row) != instances.size for row in loss)
    ):
        fail(
            f"expected {hypotheses.size} rows of {instances.size} entries (loss[w][z])",
            "loss",
        )
    try:
        loss_arr = np.array(loss, dtype=np.float64)
    except (TypeError, ValueError):
        fail("entries must be numbers", "loss")
    if not np.all(np.isfinite(loss_arr)) or np.any(loss_arr < 0):
        fail("entries must be finite and nonnegative", "loss")

    sigma = doc.get("sigma", "auto")
    if sigma != "auto":
        if isinstance(sigma, bool) or not isinstance(sigma, (int, float)) or not sigma > 0:
            fail('must be "auto" or a positive number', "sigma")
    problem = LearningProblem(instances, hypotheses, loss_arr, sigma)

    learner_doc = doc["learner"]
    if not isinstance(learner_doc, dict):
        fail("must be an object", "learner")
    unknown = sorted(set(learner_doc) - _LEARNER_FIELDS)
    if unknown:
        fail("unknown field", f"learner.{unknown[0]}")
    kind = learner_doc.get("kind")
    if kind not in LEARNER_KINDS:
        fail(f"must be one of {', '.join(LEARNER_KINDS)}", "learner.kind", "kind")
    prior = None
    if "prior" in learner_doc:
        try:
            prior = make_distribution(hypotheses.symbols, learner_doc["prior"])
        except (TypeError, ValueError) as exc:
            fail(str(exc), "learner.prior", "prior")
    try:
        learner = LearnerSpec(
            kind=kind,
            beta=None if "beta" not in learner_doc else float(learner_doc["beta"]),
            prior=prior,
            noise=None if "noise" not in learner_doc else float(learner_doc["noise"]),
        )
    except (TypeError, ValueError) as exc:
        fail(str(exc), "learner", "learner")
    return ProblemSpec(problem, p_z, learner, n, doc)


def load_problem(path) -> ProblemSpec:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(exc.msg, line=exc.lineno) from None
    return parse_problem(doc, text)


def problem_document(spec: ProblemSpec) -> dict:
    """Inverse of :func:`parse_problem` (up to normalization of ``p_z``)."""
    learner = {"kind": spec.learner.kind}
    if spec.learner.beta is not None:
        learner["beta"] = spec.learner.beta
    if spec.learner.noise is not None:
        learner["noise"] = spec.learner.noise
    if spec.learner.prior is not None:
        learner["prior"] = spec.learner.prior.probs.tolist()
    return {
        "instances": list(spec.problem.instance_alphabet.symbols),
        "hypotheses": list(spec.problem.hypothesis_alphabet.symbols),
        "p_z": spec.p_z.probs.tolist(),
        "loss": spec.problem.loss.tolist(),
        "sigma": spec.problem.sigma,
        "learner": learner,
        "n": spec.n,
    }
