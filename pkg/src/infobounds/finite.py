"""Exact discrete probability substrate.

Distributions live in the log domain. Products over ``n`` samples are formed
by adding log-probabilities, marginals by log-sum-exp, and expectations by
compensated summation, so nothing underflows before it has to.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from . import kernels

DEFAULT_ATOM_BUDGET = 10**7
NORMALIZATION_TOL = 1e-12
TUPLE_SEPARATOR = "|"


class BudgetExceededError(ValueError):
    """Raised when exact enumeration would exceed the atom budget."""


@dataclass(frozen=True, eq=False)
class Alphabet:
    """Ordered set of distinct string labels."""

    symbols: tuple[str, ...]

    def __post_init__(self):
        symbols = tuple(str(s) for s in self.symbols)
        if not symbols:
            raise ValueError("alphabet must contain at least one symbol")
        if len(set(symbols)) != len(symbols):
            raise ValueError("alphabet labels must be unique")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "_lookup", {s: i for i, s in enumerate(symbols)})

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, label: str) -> int:
        try:
            return self._lookup[label]
        except KeyError:
            raise KeyError(f"unknown symbol {label!r}") from None

    def __len__(self):
        return len(self.symbols)

    def __eq__(self, other):
        return isinstance(other, Alphabet) and self.symbols == other.symbols

    def __hash__(self):
        return hash(self.symbols)


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    """Probability vector over an :class:`Alphabet`, stored as log-probabilities."""

    alphabet: Alphabet
    log_probs: np.ndarray

    def __post_init__(self):
        lp = np.array(self.log_probs, dtype=np.float64)
        if lp.shape != (self.alphabet.size,):
            raise ValueError("one log-probability per symbol is required")
        if np.any(np.isnan(lp)) or np.any(lp > NORMALIZATION_TOL):
            raise ValueError("log-probabilities must be <= 0")
        total = kernels.logsumexp(lp)
        if not abs(total) <= NORMALIZATION_TOL:
            raise ValueError(f"distribution not normalized (log-sum-exp = {total!r})")
        lp.setflags(write=False)
        object.__setattr__(self, "log_probs", lp)

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(np.isfinite(self.log_probs))

    def __len__(self):
        return self.alphabet.size


def _normalized_log(weights: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        lw = np.log(weights)
    return lw - kernels.logsumexp(lw)


def make_distribution(labels: Sequence[str], weights: Sequence[float]) -> FiniteDistribution:
    """Normalize nonnegative weights into a log-domain distribution."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] != len(labels):
        raise ValueError("weights must match labels in length")
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ValueError("invalid weight")
    if not np.any(w > 0):
        raise ValueError("degenerate distribution")
    return FiniteDistribution(Alphabet(tuple(labels)), _normalized_log(w))


def from_log_weights(alphabet: Alphabet, log_weights) -> FiniteDistribution:
    """Normalize unnormalized log-weights (``-inf`` allowed) over ``alphabet``."""
    lw = np.asarray(log_weights, dtype=np.float64)
    total = kernels.logsumexp(lw)
    if not np.isfinite(total):
        raise ValueError("degenerate distribution")
    return FiniteDistribution(alphabet, lw - total)


def dataset_tuples(k: int, n: int) -> np.ndarray:
    """All ``k**n`` index tuples in lexicographic order, shape ``(k**n, n)``.

    The first coordinate is the most significant one.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    grid = np.indices((k,) * n).reshape(n, -1).T
    return np.ascontiguousarray(grid, dtype=np.intp)


def check_budget(atoms: int, budget: int):
    """Raise :class:`BudgetExceededError` when ``atoms`` exceeds ``budget``."""
    if atoms > budget:
        raise BudgetExceededError(
            f"enumeration too large: {atoms} atoms exceeds budget {budget}"
        )


def product_alphabet(alphabet: Alphabet, n: int) -> Alphabet:
    tuples = dataset_tuples(alphabet.size, n)
    syms = alphabet.symbols
    return Alphabet(tuple(TUPLE_SEPARATOR.join(syms[i] for i in row) for row in tuples))


def product_power(
    p_z: FiniteDistribution, n: int, budget: int = DEFAULT_ATOM_BUDGET
) -> FiniteDistribution:
    """The i.i.d. product distribution of ``n`` draws from ``p_z``."""
    if n < 1 or int(n) != n:
        raise ValueError("n must be a positive integer")
    check_budget(p_z.alphabet.size**n, budget)
    tuples = dataset_tuples(p_z.alphabet.size, n)
    # column-wise accumulation fixes the addition order
    lp = np.zeros(tuples.shape[0])
    for k in range(n):
        lp = lp + p_z.log_probs[tuples[:, k]]
    return FiniteDistribution(product_alphabet(p_z.alphabet, n), lp)


@dataclass(frozen=True, eq=False)
class PosteriorKernel:
    """Conditional distribution of the hypothesis given each dataset.

    ``log_matrix[j, w]`` is ``log P(W = w | Z^n = dataset j)``.
    """

    dataset_alphabet: Alphabet
    hypothesis_alphabet: Alphabet
    log_matrix: np.ndarray

    def __post_init__(self):
        lm = np.array(self.log_matrix, dtype=np.float64)
        if lm.shape != (self.dataset_alphabet.size, self.hypothesis_alphabet.size):
            raise ValueError("kernel needs one conditional per dataset symbol")
        if np.any(np.isnan(lm)) or np.any(lm > NORMALIZATION_TOL):
            raise ValueError("kernel log-probabilities must be <= 0")
        totals = kernels.logsumexp_rows(lm)
        if not np.all(np.abs(totals) <= NORMALIZATION_TOL):
            raise ValueError("kernel conditional not normalized")
        lm.setflags(write=False)
        object.__setattr__(self, "log_matrix", lm)

    @classmethod
    def from_log_weights(cls, dataset_alphabet, hypothesis_alphabet, log_weights):
        lw = np.asarray(log_weights, dtype=np.float64)
        norm = kernels.logsumexp_rows(lw)
        if not np.all(np.isfinite(norm)):
            raise ValueError("degenerate distribution")
        return cls(dataset_alphabet, hypothesis_alphabet, lw - norm[:, None])

    @property
    def conditionals(self) -> list[FiniteDistribution]:
        return [FiniteDistribution(self.hypothesis_alphabet, row) for row in self.log_matrix]

    def conditional(self, zn_index: int) -> FiniteDistribution:
        return FiniteDistribution(self.hypothesis_alphabet, self.log_matrix[zn_index])


@dataclass(frozen=True, eq=False)
class JointModel:
    """Joint law of (hypothesis, dataset) induced by ``p_z``, ``n`` and a kernel.

    ``joint_log_probs[w, j]`` is ``log P(W = w, Z^n = dataset j)``.
    """

    p_z: FiniteDistribution
    n: int
    kernel: PosteriorKernel
    p_zn: FiniteDistribution
    p_w: FiniteDistribution
    joint_log_probs: np.ndarray

    @property
    def hypothesis_alphabet(self) -> Alphabet:
        return self.kernel.hypothesis_alphabet

    @property
    def dataset_alphabet(self) -> Alphabet:
        return self.p_zn.alphabet

    @property
    def shape(self) -> tuple[int, int]:
        return self.joint_log_probs.shape

    @property
    def dataset_tuples(self) -> np.ndarray:
        return dataset_tuples(self.p_z.alphabet.size, self.n)

    @property
    def support_mask(self) -> np.ndarray:
        return np.isfinite(self.joint_log_probs)

    def check_invariants(self, tol: float = NORMALIZATION_TOL):
        """Assert marginal consistency and absolute continuity atom-wise."""
        joint = np.exp(self.joint_log_probs)
        if np.max(np.abs(joint.sum(axis=0) - self.p_zn.probs)) > tol:
            raise AssertionError("dataset marginal inconsistent with joint")
        if np.max(np.abs(joint.sum(axis=1) - self.p_w.probs)) > tol:
            raise AssertionError("hypothesis marginal inconsistent with joint")
        ref = self.p_w.log_probs[:, None] + self.p_zn.log_probs[None, :]
        if np.any(self.support_mask & ~np.isfinite(ref)):
            raise AssertionError("joint not absolutely continuous w.r.t. product")


def build_joint(
    p_z: FiniteDistribution,
    n: int,
    kernel: PosteriorKernel,
    budget: int = DEFAULT_ATOM_BUDGET,
) -> JointModel:
    """Assemble the joint model and its marginals."""
    check_budget(p_z.alphabet.size**n * kernel.hypothesis_alphabet.size, budget)
    p_zn = product_power(p_z, n, budget)
    if kernel.dataset_alphabet != p_zn.alphabet:
        raise ValueError("kernel/dataset mismatch")
    joint = np.ascontiguousarray((kernel.log_matrix + p_zn.log_probs[:, None]).T)
    p_w = FiniteDistribution(kernel.hypothesis_alphabet, kernels.logsumexp_rows(joint))
    joint.setflags(write=False)
    model = JointModel(p_z, int(n), kernel, p_zn, p_w, joint)
    model.check_invariants()
    return model


Integrand = Union[float, np.ndarray, Callable[[np.ndarray, np.ndarray], np.ndarray]]


def _atom_values(model: JointModel, f: Integrand) -> np.ndarray:
    shape = model.shape
    if callable(f):
        w_idx, zn_idx = np.indices(shape)
        vals = np.asarray(f(w_idx, zn_idx), dtype=np.float64)
    else:
        vals = np.asarray(f, dtype=np.float64)
    return np.broadcast_to(vals, shape)


def expect(model: JointModel, f: Integrand) -> float:
    """Expectation of an atom-indexed function under the joint.

    ``f`` may be a scalar, an array of shape ``(|W|, |Z|**n)``, or a callable
    taking broadcast index arrays ``(w, zn)``. Atoms of probability zero are
    skipped, so ``f`` only has to be finite on the support.
    """
    vals = _atom_values(model, f)
    mask = model.support_mask
    on_support = vals[mask]
    if not np.all(np.isfinite(on_support)):
        raise ValueError("non-finite integrand")
    return kernels.weighted_sum(model.joint_log_probs[mask], on_support)


def probability(model: JointModel, event) -> float:
    """Joint mass of a boolean atom mask (or callable producing one)."""
    if callable(event):
        event = event(*np.indices(model.shape))
    mask = np.broadcast_to(np.asarray(event, dtype=bool), model.shape)
    return kernels.masked_mass(model.joint_log_probs, mask)


def log_product_reference(model: JointModel) -> np.ndarray:
    """``log P_W(w) + log P_{Z^n}(z^n)`` for every atom."""
    return model.p_w.log_probs[:, None] + model.p_zn.log_probs[None, :]
