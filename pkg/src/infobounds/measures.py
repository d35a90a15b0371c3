"""Information density and the dependence measures built on it.

All quantities are in nats. Zero-probability atoms of the joint never enter
an expectation or an essential supremum.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import kernels
from .finite import JointModel

ZERO_CLAMP = 1e-12
CONSTANT_TOL = 1e-12

_profiles: "weakref.WeakKeyDictionary[JointModel, InfoProfile]" = weakref.WeakKeyDictionary()


@dataclass(frozen=True, eq=False)
class InfoProfile:
    """Atom-level law of the information density on the joint support."""

    w_index: np.ndarray
    zn_index: np.ndarray
    log_prob: np.ndarray
    density: np.ndarray
    mean: float

    @property
    def size(self) -> int:
        return self.density.shape[0]

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_prob)

    def is_constant(self) -> bool:
        return float(np.ptp(self.density)) <= CONSTANT_TOL


def information_profile(model: JointModel) -> InfoProfile:
    """Information density of every support atom plus its mean.

    Results are memoized per model object.
    """
    cached = _profiles.get(model)
    if cached is not None:
        return cached
    w_idx, zn_idx = np.nonzero(model.support_mask)
    log_prob = model.joint_log_probs[w_idx, zn_idx]
    density = log_prob - model.p_w.log_probs[w_idx] - model.p_zn.log_probs[zn_idx]
    mean = kernels.weighted_sum(log_prob, density)
    if abs(mean) <= ZERO_CLAMP:
        mean = 0.0
    for arr in (w_idx, zn_idx, log_prob, density):
        arr.setflags(write=False)
    profile = InfoProfile(w_idx, zn_idx, log_prob, density, mean)
    _profiles[model] = profile
    return profile


def _profile(obj) -> InfoProfile:
    return obj if isinstance(obj, InfoProfile) else information_profile(obj)


def mutual_information(profile) -> float:
    """I(W; Z^n), the mean information density."""
    return _profile(profile).mean


def _check_order(m: float):
    if not (m > 0 and math.isfinite(m)):
        raise ValueError("invalid moment order")


def _log_power_mean(log_w: np.ndarray, dev: np.ndarray, m: float) -> float:
    # (sum_i w_i dev_i^m)^(1/m) evaluated as exp(lse(log w + m log dev) / m)
    with np.errstate(divide="ignore"):
        terms = log_w + m * np.log(dev)
    lse = kernels.logsumexp(terms)
    return 0.0 if lse == -math.inf else math.exp(lse / m)


def central_moment_root(profile, m: float) -> float:
    """m-th root of the m-th central absolute moment of the density."""
    _check_order(m)
    p = _profile(profile)
    if p.is_constant():
        return 0.0
    return _log_power_mean(p.log_prob, np.abs(p.density - p.mean), m)


def moment_root_infinity(profile) -> float:
    """Largest absolute deviation of the density from its mean on the support."""
    p = _profile(profile)
    if p.is_constant():
        return 0.0
    return float(np.max(np.abs(p.density - p.mean)))


def max_information(profile) -> float:
    """Largest information density value on the support."""
    value = float(np.max(_profile(profile).density))
    return 0.0 if abs(value) <= ZERO_CLAMP else value


def info_tail(profile, gamma: float, strict: bool = False) -> float:
    """Joint mass of atoms with density >= gamma (> gamma when ``strict``)."""
    p = _profile(profile)
    mask = p.density > gamma if strict else p.density >= gamma
    return kernels.masked_mass(p.log_prob, mask)


def _density_matrix(model: JointModel) -> np.ndarray:
    """Full ``(|W|, |Z|**n)`` density matrix with ``-inf`` off the joint support."""
    p = information_profile(model)
    dens = np.full(model.shape, -np.inf)
    dens[p.w_index, p.zn_index] = p.density
    return dens


def alpha_mutual_information(model: JointModel, alpha: float) -> float:
    """Sibson's alpha-mutual information of the channel from dataset to hypothesis.

    ``alpha/(alpha-1) * log E_{P_W}[ E_{P_Zn}[r^alpha]^(1/alpha) ]`` with ``r``
    the density ratio of the joint to the product of its marginals. It is
    nondecreasing in ``alpha`` and tends to :func:`maximal_leakage`.
    """
    if not (alpha > 1):
        raise ValueError("alpha out of range")
    dens = _density_matrix(model)
    w_sup = model.p_w.support
    zn_sup = model.p_zn.support
    inner = alpha * dens[np.ix_(w_sup, zn_sup)] + model.p_zn.log_probs[zn_sup][None, :]
    per_w = kernels.logsumexp_rows(inner) / alpha
    outer = kernels.logsumexp(model.p_w.log_probs[w_sup] + per_w)
    value = alpha / (alpha - 1.0) * outer
    return 0.0 if abs(value) <= ZERO_CLAMP else value


def maximal_leakage(model: JointModel) -> float:
    """log E_{P_W}[max over supported datasets of the density ratio]."""
    dens = _density_matrix(model)
    w_sup = model.p_w.support
    zn_sup = model.p_zn.support
    peak = np.max(dens[np.ix_(w_sup, zn_sup)], axis=1)
    value = kernels.logsumexp(model.p_w.log_probs[w_sup] + peak)
    return 0.0 if abs(value) <= ZERO_CLAMP else value


def _divergence_rows(model: JointModel, rows: np.ndarray) -> np.ndarray:
    log_k = model.kernel.log_matrix[rows]
    with np.errstate(invalid="ignore"):
        f = log_k - model.p_w.log_probs[None, :]
    values = kernels.weighted_sum_rows(log_k, np.where(np.isfinite(log_k), f, 0.0))
    values[np.abs(values) <= ZERO_CLAMP] = 0.0
    return values


def posterior_divergence(model: JointModel, zn_index: int) -> float:
    """Relative entropy of the posterior at one dataset from the hypothesis marginal."""
    if not math.isfinite(model.p_zn.log_probs[zn_index]):
        raise ValueError("conditioning on null set")
    return float(_divergence_rows(model, np.array([zn_index]))[0])


def posterior_divergences(model: JointModel) -> np.ndarray:
    """:func:`posterior_divergence` for every dataset; NaN on null datasets."""
    out = np.full(model.p_zn.alphabet.size, np.nan)
    sup = model.p_zn.support
    out[sup] = _divergence_rows(model, sup)
    return out


def divergence_moment_root(model: JointModel, m: float) -> float:
    """(E_{P_Zn}[D(P_{W|Z^n} || P_W)^m])^(1/m)."""
    _check_order(m)
    sup = model.p_zn.support
    divs = posterior_divergences(model)[sup]
    return _log_power_mean(model.p_zn.log_probs[sup], np.maximum(divs, 0.0), m)


def binary_entropy(delta: float) -> float:
    """Binary entropy in nats with ``0 log 0 = 0``."""
    if not (0.0 <= delta <= 1.0):
        raise ValueError("invalid probability")
    if delta in (0.0, 1.0):
        return 0.0
    return -delta * math.log(delta) - (1.0 - delta) * math.log1p(-delta)


def _fmt_key(x: float) -> str:
    return f"{x:g}"


@dataclass
class MeasureReport:
    mutual_information: float
    moment_roots: dict[float, float] = field(default_factory=dict)
    moment_infinity: float = 0.0
    maximal_leakage: float = 0.0
    max_information: float = 0.0
    alpha_mi: dict[float, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, float]:
        out = {"mutual_information": self.mutual_information}
        for m, v in self.moment_roots.items():
            out[f"moment_root_{_fmt_key(m)}"] = v
        out["moment_infinity"] = self.moment_infinity
        out["maximal_leakage"] = self.maximal_leakage
        out["max_information"] = self.max_information
        for a, v in self.alpha_mi.items():
            out[f"alpha_mi_{_fmt_key(a)}"] = v
        return out


DEFAULT_MOMENTS = (1.0, 2.0, 3.0, 4.0, 8.0, 16.0)
DEFAULT_ALPHAS = (1.1, 1.5, 2.0, 4.0, 10.0, 100.0, 1e4)


def measure_report(
    model: JointModel,
    moments: Iterable[float] = DEFAULT_MOMENTS,
    alphas: Iterable[float] = DEFAULT_ALPHAS,
) -> MeasureReport:
    profile = information_profile(model)
    return MeasureReport(
        mutual_information=mutual_information(profile),
        moment_roots={float(m): central_moment_root(profile, m) for m in moments},
        moment_infinity=moment_root_infinity(profile),
        maximal_leakage=maximal_leakage(model),
        max_information=max_information(profile),
        alpha_mi={float(a): alpha_mutual_information(model, a) for a in alphas},
    )
