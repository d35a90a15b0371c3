"""Closed-form generalization-error bounds.

Every bound has the shape ``eps = sqrt((2 sigma^2 / n) * A)`` where ``A``
collects the information term and the confidence terms. A negative ``A``
(or a strong-converse tail that eats the whole confidence budget) is
reported as an infeasible result with ``epsilon = inf``, never raised.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import kernels
from .finite import JointModel
from .measures import (
    alpha_mutual_information,
    binary_entropy,
    central_moment_root,
    divergence_moment_root,
    info_tail,
    information_profile,
    maximal_leakage,
    moment_root_infinity,
    mutual_information,
    posterior_divergence,
    posterior_divergences,
)
from .problems import LearningProblem

GAMMA_STEP = 1e-9
LOG2 = math.log(2.0)

BOUND_IDS = (
    "average",
    "pac_bayes_data",
    "pac_bayes_moment",
    "single_draw_data",
    "single_draw_moment",
    "single_draw_m_inf",
    "single_draw_leakage",
    "strong_converse",
    "baseline_mi",
    "baseline_alpha",
    "rederived_moment",
    "rederived_leakage",
)
PAC_BAYES_IDS = frozenset({"pac_bayes_data", "pac_bayes_moment"})
SINGLE_DRAW_IDS = frozenset(
    {
        "single_draw_data",
        "single_draw_moment",
        "single_draw_m_inf",
        "single_draw_leakage",
        "strong_converse",
        "baseline_mi",
        "baseline_alpha",
        "rederived_moment",
        "rederived_leakage",
    }
)
_NEEDS_M = frozenset({"pac_bayes_moment", "single_draw_moment", "rederived_moment"})


@dataclass(frozen=True)
class BoundQuery:
    bound_id: str
    delta: Optional[float] = None
    m: Optional[float] = None
    alpha: Optional[float] = None
    gamma: Union[float, str, None] = None
    sigma: Optional[float] = None
    n: Optional[int] = None
    zn_index: Optional[int] = None

    def __post_init__(self):
        if self.bound_id not in BOUND_IDS:
            raise ValueError(f"unknown bound id {self.bound_id!r}")
        if self.sigma is None or not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.n is None or int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.bound_id != "average":
            _check_delta(self.delta)
        if self.bound_id in _NEEDS_M:
            _check_m(self.m)
        if self.bound_id == "baseline_alpha":
            _check_alpha(self.alpha)
        if self.bound_id == "strong_converse":
            if self.gamma is None:
                raise ValueError("strong_converse needs gamma (a number or 'optimize')")
            if self.gamma != "optimize" and not math.isfinite(float(self.gamma)):
                raise ValueError("gamma must be finite")

    @property
    def params(self) -> dict:
        return {
            "delta": self.delta,
            "m": self.m,
            "alpha": self.alpha,
            "gamma": self.gamma,
            "sigma": self.sigma,
            "n": self.n,
        }


@dataclass
class BoundResult:
    bound_id: str
    epsilon: float
    feasible: bool
    params: dict = field(default_factory=dict)
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "bound_id": self.bound_id,
            "params": {k: _json_number(v) for k, v in self.params.items()},
            "epsilon": _json_number(self.epsilon),
            "feasible": self.feasible,
            "detail": {k: _json_number(v) for k, v in self.detail.items()},
        }


def _json_number(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, np.floating):
        return _json_number(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _check_delta(delta):
    if delta is None or not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")


def _check_m(m):
    if m is None or not (m > 0 and math.isfinite(m)):
        raise ValueError("invalid moment order")


def _check_alpha(alpha):
    if alpha is None or not (alpha > 1):
        raise ValueError("alpha out of range")


def scale(sigma: float, n: int) -> float:
    """The common prefactor ``2 sigma^2 / n``."""
    return 2.0 * sigma * sigma / n


def epsilon_from_argument(argument: float, sigma: float, n: int) -> float:
    """``sqrt(2 sigma^2 / n * argument)``, or ``inf`` when the argument is negative."""
    if not argument >= 0:
        return math.inf
    return math.sqrt(scale(sigma, n) * argument)


def _result(bound_id, argument, sigma, n, params, **detail) -> BoundResult:
    eps = epsilon_from_argument(argument, sigma, n)
    detail["argument"] = argument
    return BoundResult(bound_id, eps, math.isfinite(eps), params, detail)


def _params(delta=None, m=None, alpha=None, gamma=None, sigma=None, n=None):
    return {"delta": delta, "m": m, "alpha": alpha, "gamma": gamma, "sigma": sigma, "n": n}


# -- generalization error -------------------------------------------------

_gen_cache: "weakref.WeakKeyDictionary[JointModel, tuple]" = weakref.WeakKeyDictionary()


def population_risk(problem: LearningProblem, p_z) -> np.ndarray:
    """``E_{P_Z}[loss(w, Z)]`` for every hypothesis."""
    return np.array([kernels.weighted_sum(p_z.log_probs, row) for row in problem.loss])


def gen_matrix(problem: LearningProblem, model: JointModel) -> np.ndarray:
    """Generalization error of every (hypothesis, dataset) atom (read-only, memoized)."""
    cached = _gen_cache.get(model)
    if cached is not None and cached[0] is problem:
        return cached[1]
    tuples = model.dataset_tuples
    emp = np.zeros(model.shape)
    for k in range(model.n):
        emp += problem.loss[:, tuples[:, k]]
    gen = emp / model.n - population_risk(problem, model.p_z)[:, None]
    gen.setflags(write=False)
    _gen_cache[model] = (problem, gen)
    return gen


def gen_error(problem: LearningProblem, w_index: int, zn_index: int, model: JointModel) -> float:
    """Empirical risk of ``w`` on dataset ``zn_index`` minus its population risk."""
    z = model.dataset_tuples[zn_index]
    emp = sum(problem.loss[w_index, zk] for zk in z) / model.n
    pop = kernels.weighted_sum(model.p_z.log_probs, problem.loss[w_index])
    return float(emp - pop)


# -- formula-level evaluators ---------------------------------------------


def moment_argument(mi: float, moment: float, delta: float, m: float) -> float:
    return mi + moment / (delta / 2.0) ** (1.0 / m) + math.log(2.0 / delta)


def strong_converse_argument(gamma: float, tail: float, delta: float) -> float:
    if not delta - tail > 0:
        return -math.inf
    return gamma + math.log(2.0 / (delta - tail))


# -- model-level bounds ---------------------------------------------------


def avg_gen_bound(model: JointModel, sigma: float, n: int) -> BoundResult:
    mi = mutual_information(information_profile(model))
    return _result("average", mi, sigma, n, _params(sigma=sigma, n=n), mutual_information=mi)


def pac_bayes_bound(model: JointModel, zn_index: int, delta: float, sigma: float, n: int) -> BoundResult:
    """Data-dependent PAC-Bayes bound at one dataset."""
    _check_delta(delta)
    div = posterior_divergence(model, zn_index)
    return _result(
        "pac_bayes_data",
        div + math.log(1.0 / delta),
        sigma,
        n,
        _params(delta=delta, sigma=sigma, n=n),
        zn_index=int(zn_index),
        divergence=div,
    )


def pac_bayes_epsilons(model: JointModel, delta: float, sigma: float, n: int) -> np.ndarray:
    """Per-dataset PAC-Bayes epsilons (NaN on null datasets)."""
    _check_delta(delta)
    divs = posterior_divergences(model)
    with np.errstate(invalid="ignore"):
        return np.sqrt(scale(sigma, n) * (divs + math.log(1.0 / delta)))


def pac_bayes_moment_bound(model: JointModel, delta: float, m: float, sigma: float, n: int) -> BoundResult:
    _check_delta(delta)
    _check_m(m)
    dm = divergence_moment_root(model, m)
    arg = dm / (delta / 2.0) ** (1.0 / m) + math.log(2.0 / delta)
    return _result(
        "pac_bayes_moment", arg, sigma, n, _params(delta=delta, m=m, sigma=sigma, n=n),
        divergence_moment_root=dm,
    )


def single_draw_pointwise_bound(density_value: float, delta: float, sigma: float, n: int) -> BoundResult:
    """Data-dependent single-draw bound for one atom's information density."""
    _check_delta(delta)
    return _result(
        "single_draw_data",
        density_value + math.log(1.0 / delta),
        sigma,
        n,
        _params(delta=delta, sigma=sigma, n=n),
        density=density_value,
    )


def single_draw_epsilons(profile, delta: float, sigma: float, n: int) -> np.ndarray:
    """Per-atom single-draw epsilons aligned with ``profile``; ``inf`` where infeasible."""
    _check_delta(delta)
    arg = profile.density + math.log(1.0 / delta)
    out = np.full(arg.shape, np.inf)
    ok = arg >= 0
    out[ok] = np.sqrt(scale(sigma, n) * arg[ok])
    return out


def single_draw_moment_bound(model: JointModel, delta: float, m: float, sigma: float, n: int) -> BoundResult:
    _check_delta(delta)
    _check_m(m)
    profile = information_profile(model)
    mi = mutual_information(profile)
    mm = central_moment_root(profile, m)
    return _result(
        "single_draw_moment", moment_argument(mi, mm, delta, m), sigma, n,
        _params(delta=delta, m=m, sigma=sigma, n=n),
        mutual_information=mi, moment_root=mm,
    )


def single_draw_m_infinity_bound(model: JointModel, delta: float, sigma: float, n: int) -> BoundResult:
    _check_delta(delta)
    profile = information_profile(model)
    mi = mutual_information(profile)
    minf = moment_root_infinity(profile)
    return _result(
        "single_draw_m_inf", mi + minf + math.log(2.0 / delta), sigma, n,
        _params(delta=delta, m=math.inf, sigma=sigma, n=n),
        mutual_information=mi, moment_infinity=minf,
    )


def single_draw_leakage_bound(model: JointModel, delta: float, sigma: float, n: int) -> BoundResult:
    _check_delta(delta)
    leak = maximal_leakage(model)
    return _result(
        "single_draw_leakage", leak + 2.0 * math.log(2.0 / delta), sigma, n,
        _params(delta=delta, sigma=sigma, n=n), maximal_leakage=leak,
    )


def strong_converse_bound(model: JointModel, delta: float, gamma: float, sigma: float, n: int) -> BoundResult:
    """Tail-based bound at a fixed threshold ``gamma`` (inclusive tail)."""
    _check_delta(delta)
    if not math.isfinite(gamma):
        raise ValueError("gamma must be finite")
    tail = info_tail(information_profile(model), gamma)
    return _result(
        "strong_converse", strong_converse_argument(gamma, tail, delta), sigma, n,
        _params(delta=delta, gamma=gamma, sigma=sigma, n=n),
        gamma=gamma, tail=tail, gamma_policy="fixed",
    )


def strong_converse_candidates(profile) -> np.ndarray:
    """Thresholds examined by :func:`optimize_strong_converse`, ascending."""
    values = np.unique(profile.density)
    cands = np.concatenate([values, values + GAMMA_STEP, [values[0] - GAMMA_STEP]])
    return np.unique(cands)


def optimize_strong_converse(model: JointModel, delta: float, sigma: float, n: int) -> BoundResult:
    """Strong-converse bound minimized over the step points of the density tail.

    The tail is a right-continuous step function of the threshold, so on each
    flat piece the bound is smallest at the piece's left edge. Candidates are
    every distinct density value ``v`` and ``v + 1e-9``, plus one point below
    the minimum. Ties go to the smaller threshold.
    """
    _check_delta(delta)
    profile = information_profile(model)
    best_eps, best_gamma, best_tail = math.inf, None, None
    cands = strong_converse_candidates(profile)
    # inclusive tails of all candidates from one sorted pass
    order = np.argsort(profile.density, kind="stable")
    suffix = kernels.suffix_mass(profile.log_prob[order])
    tails = suffix[np.searchsorted(profile.density[order], cands, side="left")]
    for g, tail in zip(cands.tolist(), tails.tolist()):
        eps = epsilon_from_argument(strong_converse_argument(g, tail, delta), sigma, n)
        if eps < best_eps:
            best_eps, best_gamma = eps, g
    evaluated = len(cands)
    if best_gamma is not None:
        best_tail = info_tail(profile, best_gamma)
        best_eps = epsilon_from_argument(strong_converse_argument(best_gamma, best_tail, delta), sigma, n)
    params = _params(delta=delta, gamma="optimize", sigma=sigma, n=n)
    detail = {"gamma_policy": "optimized", "candidates": evaluated}
    if best_gamma is None:
        return BoundResult("strong_converse", math.inf, False, params, detail)
    detail.update(
        gamma=best_gamma,
        tail=best_tail,
        argument=strong_converse_argument(best_gamma, best_tail, delta),
    )
    return BoundResult("strong_converse", best_eps, True, params, detail)


def baseline_mi_bound(model: JointModel, delta: float, sigma: float, n: int) -> BoundResult:
    _check_delta(delta)
    mi = mutual_information(information_profile(model))
    arg = (mi + binary_entropy(delta)) / delta + LOG2
    return _result(
        "baseline_mi", arg, sigma, n, _params(delta=delta, sigma=sigma, n=n), mutual_information=mi
    )


def baseline_alpha_bound(model: JointModel, delta: float, alpha: float, sigma: float, n: int) -> BoundResult:
    _check_delta(delta)
    _check_alpha(alpha)
    ia = alpha_mutual_information(model, alpha)
    arg = ia + LOG2 + alpha / (alpha - 1.0) * math.log(1.0 / delta)
    return _result(
        "baseline_alpha", arg, sigma, n, _params(delta=delta, alpha=alpha, sigma=sigma, n=n),
        alpha_mutual_information=ia,
    )


def rederived_moment_bound(model: JointModel, delta: float, m: float, sigma: float, n: int) -> BoundResult:
    """Moment bound obtained from the strong-converse bound via Markov's inequality."""
    _check_delta(delta)
    _check_m(m)
    profile = information_profile(model)
    mi = mutual_information(profile)
    mm = central_moment_root(profile, m)
    gamma = mi + mm / (delta / 2.0) ** (1.0 / m)
    return _result(
        "rederived_moment", gamma + math.log(4.0 / delta), sigma, n,
        _params(delta=delta, m=m, sigma=sigma, n=n),
        mutual_information=mi, moment_root=mm, gamma=gamma,
    )


def rederived_leakage_bound(model: JointModel, delta: float, sigma: float, n: int) -> BoundResult:
    _check_delta(delta)
    leak = maximal_leakage(model)
    return _result(
        "rederived_leakage", leak + math.log(4.0 / delta) + math.log(2.0 / delta), sigma, n,
        _params(delta=delta, sigma=sigma, n=n), maximal_leakage=leak,
    )


# -- dispatch -------------------------------------------------------------


def _envelope_single_draw(model, q: BoundQuery) -> BoundResult:
    profile = information_profile(model)
    eps = single_draw_epsilons(profile, q.delta, q.sigma, q.n)
    bad = ~np.isfinite(eps)
    infeasible_mass = kernels.masked_mass(profile.log_prob, bad)
    detail = {"envelope": "max_over_atoms", "atoms": int(eps.size), "infeasible_mass": infeasible_mass}
    worst = math.inf if bad.any() else float(eps.max())
    return BoundResult(q.bound_id, worst, math.isfinite(worst), q.params, detail)


def _envelope_pac_bayes(model, q: BoundQuery) -> BoundResult:
    eps = pac_bayes_epsilons(model, q.delta, q.sigma, q.n)[model.p_zn.support]
    worst = float(eps.max())
    detail = {"envelope": "max_over_datasets", "datasets": int(eps.size)}
    return BoundResult(q.bound_id, worst, math.isfinite(worst), q.params, detail)


def evaluate(query: BoundQuery, model: JointModel) -> BoundResult:
    """Evaluate any bound from a :class:`BoundQuery`.

    ``pac_bayes_data`` is evaluated at ``query.zn_index`` when given. Without
    an index, and always for ``single_draw_data``, the result is the largest
    epsilon over the support, ``inf`` if any atom is infeasible.
    """
    q = query
    bid = q.bound_id
    if bid == "average":
        res = avg_gen_bound(model, q.sigma, q.n)
    elif bid == "pac_bayes_data":
        if q.zn_index is None:
            return _envelope_pac_bayes(model, q)
        res = pac_bayes_bound(model, q.zn_index, q.delta, q.sigma, q.n)
    elif bid == "pac_bayes_moment":
        res = pac_bayes_moment_bound(model, q.delta, q.m, q.sigma, q.n)
    elif bid == "single_draw_data":
        return _envelope_single_draw(model, q)
    elif bid == "single_draw_moment":
        res = single_draw_moment_bound(model, q.delta, q.m, q.sigma, q.n)
    elif bid == "single_draw_m_inf":
        res = single_draw_m_infinity_bound(model, q.delta, q.sigma, q.n)
    elif bid == "single_draw_leakage":
        res = single_draw_leakage_bound(model, q.delta, q.sigma, q.n)
    elif bid == "strong_converse":
        if q.gamma == "optimize":
            res = optimize_strong_converse(model, q.delta, q.sigma, q.n)
        else:
            res = strong_converse_bound(model, q.delta, float(q.gamma), q.sigma, q.n)
    elif bid == "baseline_mi":
        res = baseline_mi_bound(model, q.delta, q.sigma, q.n)
    elif bid == "baseline_alpha":
        res = baseline_alpha_bound(model, q.delta, q.alpha, q.sigma, q.n)
    elif bid == "rederived_moment":
        res = rederived_moment_bound(model, q.delta, q.m, q.sigma, q.n)
    else:
        res = rederived_leakage_bound(model, q.delta, q.sigma, q.n)
    res.params = q.params
    return res
