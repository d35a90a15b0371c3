"""Exact certification of the bounds on enumerable models.

Each check enumerates the joint support and compares the bound against the
true law of the generalization error. Violations use the strict event
``|gen| > eps``; an infeasible bound counts as violated.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .bounds import (
    PAC_BAYES_IDS,
    SINGLE_DRAW_IDS,
    BoundQuery,
    avg_gen_bound,
    evaluate,
    gen_matrix,
    pac_bayes_epsilons,
    population_risk,
    single_draw_epsilons,
)
from .finite import (
    DEFAULT_ATOM_BUDGET,
    JointModel,
    dataset_tuples,
    expect,
    log_product_reference,
    product_power,
)
from .measures import (
    info_tail,
    information_profile,
    max_information,
    maximal_leakage,
    moment_root_infinity,
    mutual_information,
)
from .problems import LearningProblem, ProblemSpec

COVERAGE_TOL = 1e-12
THEOREM1_TOL = 1e-9
ORDERING_TOL = 1e-9
DEFAULT_DELTAS = (0.5, 0.25, 0.1, 0.05)
DEFAULT_HOEFFDING_EPS = tuple(round(0.1 * k, 1) for k in range(1, 10))
MC_MIN_SAMPLES = 1000
MC_BLOCK = 8192


def default_lambda_grid() -> np.ndarray:
    """81 points on [-50, 50] plus +-1000."""
    return np.concatenate([np.linspace(-50.0, 50.0, 81), [-1e3, 1e3]])


@dataclass
class Theorem1Report:
    max_value: float
    argmax_lambda: float
    values: list
    passed: bool

    def to_dict(self):
        return {"max_value": self.max_value, "argmax_lambda": self.argmax_lambda,
                "grid_points": len(self.values), "passed": self.passed}


def theorem1_check(model: JointModel, problem: LearningProblem, lambda_grid=None) -> Theorem1Report:
    """``E[exp(lam*gen - lam^2 sigma^2/(2n) - density)] <= 1`` for each ``lam`` on the grid."""
    grid = default_lambda_grid() if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    sigma = problem.resolved_sigma
    n = model.n
    profile = information_profile(model)
    gen = gen_matrix(problem, model)[profile.w_index, profile.zn_index]
    base = profile.log_prob - profile.density
    values = []
    for lam in grid:
        log_val = kernels.logsumexp(base + lam * gen - lam * lam * sigma * sigma / (2.0 * n))
        values.append(math.exp(log_val))
    k = int(np.argmax(values))
    return Theorem1Report(values[k], float(grid[k]), values, values[k] <= 1.0 + THEOREM1_TOL)


@dataclass
class CoverageReport:
    bound_id: str
    delta: float
    violation_mass: float
    passed: bool
    params: dict = field(default_factory=dict)
    epsilon: Optional[float] = None
    per_atom_detail: Optional[list] = None

    def to_dict(self, verbose: bool = False):
        out = {
            "bound_id": self.bound_id,
            "delta": self.delta,
            "violation_mass": self.violation_mass,
            "passed": self.passed,
            "params": {k: v for k, v in self.params.items() if v is not None},
        }
        if self.epsilon is not None:
            out["epsilon"] = "inf" if math.isinf(self.epsilon) else self.epsilon
        if verbose and self.per_atom_detail is not None:
            out["per_atom_detail"] = self.per_atom_detail
        return out


def _json_float(x) -> float | str:
    x = float(x)
    return "inf" if math.isinf(x) else x


def _query(model, problem, bound_id, delta, m=None, alpha=None, gamma=None) -> BoundQuery:
    if bound_id == "strong_converse" and gamma is None:
        gamma = "optimize"
    return BoundQuery(bound_id, delta=delta, m=m, alpha=alpha, gamma=gamma,
                      sigma=problem.resolved_sigma, n=model.n)


def _finish(bound_id, delta, mass, query, eps, detail):
    mass = min(max(mass, 0.0), 1.0)
    return CoverageReport(bound_id, delta, mass, mass <= delta + COVERAGE_TOL,
                          dict(query.params), eps, detail)


def coverage_single_draw(
    model: JointModel,
    problem: LearningProblem,
    bound_id: str,
    delta: float,
    *,
    m: Optional[float] = None,
    alpha: Optional[float] = None,
    gamma=None,
    epsilon_scale: float = 1.0,
    verbose: bool = False,
) -> CoverageReport:
    """Exact joint mass of atoms where a single-draw bound fails."""
    if bound_id not in SINGLE_DRAW_IDS:
        raise ValueError(f"{bound_id} is not a single-draw bound")
    q = _query(model, problem, bound_id, delta, m, alpha, gamma)
    profile = information_profile(model)
    abs_gen = np.abs(gen_matrix(problem, model)[profile.w_index, profile.zn_index])
    if bound_id == "single_draw_data":
        eps = single_draw_epsilons(profile, delta, q.sigma, q.n)
        feasible = np.isfinite(eps)
        eps = eps * epsilon_scale
        eps_report = None
    else:
        res = evaluate(q, model)
        eps_report = res.epsilon * epsilon_scale
        eps = np.full(abs_gen.shape, eps_report)
        feasible = np.full(abs_gen.shape, res.feasible)
    violated = ~feasible | (abs_gen > eps)
    mass = kernels.masked_mass(profile.log_prob, violated)
    detail = None
    if verbose:
        detail = [
            {"w": int(w), "zn": int(z), "abs_gen": float(g), "epsilon": _json_float(e), "violated": bool(v)}
            for w, z, g, e, v in zip(profile.w_index, profile.zn_index, abs_gen, eps, violated)
        ]
    return _finish(bound_id, delta, mass, q, eps_report, detail)


def conditional_mean_gen(problem: LearningProblem, model: JointModel) -> np.ndarray:
    """``E[gen(W, z^n) | Z^n = z^n]`` per dataset (NaN on null datasets)."""
    gen = gen_matrix(problem, model)
    out = np.full(model.p_zn.alphabet.size, np.nan)
    sup = model.p_zn.support
    out[sup] = kernels.weighted_sum_rows(model.kernel.log_matrix[sup], gen[:, sup].T)
    return out


def coverage_pac_bayes(
    model: JointModel,
    problem: LearningProblem,
    bound_id: str,
    delta: float,
    *,
    m: Optional[float] = None,
    epsilon_scale: float = 1.0,
    verbose: bool = False,
) -> CoverageReport:
    """Exact dataset mass where the posterior-averaged error exceeds a PAC-Bayes bound."""
    if bound_id not in PAC_BAYES_IDS:
        raise ValueError(f"{bound_id} is not a PAC-Bayes bound")
    q = _query(model, problem, bound_id, delta, m)
    sup = model.p_zn.support
    abs_mean = np.abs(conditional_mean_gen(problem, model)[sup])
    if bound_id == "pac_bayes_data":
        eps = pac_bayes_epsilons(model, delta, q.sigma, q.n)[sup] * epsilon_scale
        feasible = np.isfinite(eps)
        eps_report = None
    else:
        res = evaluate(q, model)
        eps_report = res.epsilon * epsilon_scale
        eps = np.full(abs_mean.shape, eps_report)
        feasible = np.full(abs_mean.shape, res.feasible)
    violated = ~feasible | (abs_mean > eps)
    mass = kernels.masked_mass(model.p_zn.log_probs[sup], violated)
    detail = None
    if verbose:
        detail = [
            {"zn": int(z), "abs_mean_gen": float(g), "epsilon": _json_float(e), "violated": bool(v)}
            for z, g, e, v in zip(sup, abs_mean, eps, violated)
        ]
    return _finish(bound_id, delta, mass, q, eps_report, detail)


def coverage(model, problem, bound_id, delta, **kw) -> CoverageReport:
    if bound_id in PAC_BAYES_IDS:
        kw.pop("alpha", None)
        kw.pop("gamma", None)
        return coverage_pac_bayes(model, problem, bound_id, delta, **kw)
    return coverage_single_draw(model, problem, bound_id, delta, **kw)


@dataclass
class AverageReport:
    mean_gen: float
    epsilon: float
    slack: float
    passed: bool

    def to_dict(self):
        return asdict(self)


def coverage_average(model: JointModel, problem: LearningProblem, epsilon_scale: float = 1.0) -> AverageReport:
    """Compare ``|E[gen]|`` with the mutual-information average bound."""
    mean = expect(model, gen_matrix(problem, model))
    eps = avg_gen_bound(model, problem.resolved_sigma, model.n).epsilon * epsilon_scale
    slack = eps - abs(mean)
    return AverageReport(mean, eps, slack, slack >= -COVERAGE_TOL)


@dataclass
class LemmaReport:
    epsilon: float
    gamma: float
    p_event: float
    p_tail: float
    q_event: float
    rhs: float
    passed: bool

    def to_dict(self):
        return asdict(self)


def lemma_split_check(model: JointModel, problem: LearningProblem, epsilon: float, gamma: float,
                      _gen=None) -> LemmaReport:
    """``P[E] <= P[density > gamma] + e^gamma Q[E]`` for ``E = {|gen| > epsilon}``.

    ``P`` is the joint and ``Q`` the product of its marginals. The tail here is
    strict, unlike the inclusive tail of the strong-converse bound.
    """
    gen = gen_matrix(problem, model) if _gen is None else _gen
    event = np.abs(gen) > epsilon
    p_event = kernels.masked_mass(model.joint_log_probs, event)
    p_tail = info_tail(information_profile(model), gamma, strict=True)
    q_event = kernels.masked_mass(log_product_reference(model), event)
    rhs = p_tail + math.exp(gamma) * q_event
    return LemmaReport(float(epsilon), float(gamma), p_event, p_tail, q_event, rhs,
                       p_event <= rhs + COVERAGE_TOL)


def default_lemma_grid(model: JointModel, problem: LearningProblem):
    """5 epsilons spanning the observed ``|gen|`` range times 5 thresholds
    spanning the density range (one unit beyond each end)."""
    gen = np.abs(gen_matrix(problem, model))
    dens = information_profile(model).density
    eps = np.linspace(0.0, float(gen.max()), 5)
    gammas = np.linspace(float(dens.min()) - 1.0, float(dens.max()) + 1.0, 5)
    return [(float(e), float(g)) for e in eps for g in gammas]


def lemma_grid_check(model, problem, grid=None) -> list[LemmaReport]:
    grid = default_lemma_grid(model, problem) if grid is None else grid
    gen = gen_matrix(problem, model)
    return [lemma_split_check(model, problem, e, g, _gen=gen) for e, g in grid]


@dataclass
class HoeffdingRow:
    w: int
    epsilon: float
    lhs: float
    rhs: float
    passed: bool


def hoeffding_tail_check(problem: LearningProblem, p_z, n: int,
                         epsilon_grid: Sequence[float] = DEFAULT_HOEFFDING_EPS,
                         budget: int = DEFAULT_ATOM_BUDGET) -> list[HoeffdingRow]:
    """``P_{Z^n}[|gen(w, Z^n)| > eps] <= 2 exp(-n eps^2 / (2 sigma^2))`` for every ``w``."""
    sigma = problem.resolved_sigma
    p_zn = product_power(p_z, n, budget)
    tuples = dataset_tuples(p_z.alphabet.size, n)
    emp = np.zeros((problem.hypothesis_alphabet.size, tuples.shape[0]))
    for k in range(n):
        emp = emp + problem.loss[:, tuples[:, k]]
    gen = emp / n - population_risk(problem, p_z)[:, None]
    rows = []
    for w in range(gen.shape[0]):
        for eps in epsilon_grid:
            lhs = kernels.masked_mass(p_zn.log_probs, np.abs(gen[w]) > eps)
            rhs = 2.0 * math.exp(-n * eps * eps / (2.0 * sigma * sigma))
            rows.append(HoeffdingRow(w, float(eps), lhs, rhs, lhs <= rhs + COVERAGE_TOL))
    return rows


@dataclass
class OrderingReport:
    maximal_leakage: float
    max_information: float
    mi_plus_moment_infinity: float
    passed: bool

    def to_dict(self):
        return asdict(self)


def ordering_check(model: JointModel) -> OrderingReport:
    """Maximal leakage <= max-information <= I + M_inf."""
    profile = information_profile(model)
    leak = maximal_leakage(model)
    imax = max_information(profile)
    upper = mutual_information(profile) + moment_root_infinity(profile)
    ok = leak <= imax + ORDERING_TOL and imax <= upper + ORDERING_TOL
    return OrderingReport(leak, imax, upper, ok)


# -- Monte Carlo ----------------------------------------------------------


@dataclass
class McEstimate:
    estimate: float
    std_error: float
    samples: int
    seed: int
    violations: int = 0
    epsilon: Optional[float] = None

    def to_dict(self):
        out = asdict(self)
        if self.epsilon is not None and math.isinf(self.epsilon):
            out["epsilon"] = "inf"
        return out


_MC_IDS = SINGLE_DRAW_IDS - {"single_draw_data"}


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed + (block << 64)))


def _mc_block(spec: ProblemSpec, eps: float, feasible: bool, seed: int, block: int, size: int) -> int:
    rng = _block_rng(seed, block)
    problem, n = spec.problem, spec.n
    cdf_z = np.cumsum(spec.p_z.probs)
    cdf_z /= cdf_z[-1]
    z = np.searchsorted(cdf_z, rng.random((size, n)), side="right")
    z = np.minimum(z, cdf_z.size - 1)
    post = np.exp(spec.learner.log_posterior(problem, z))
    cdf_w = np.cumsum(post, axis=1)
    cdf_w /= cdf_w[:, -1:]
    u = rng.random(size)
    w = np.minimum((cdf_w <= u[:, None]).sum(axis=1), cdf_w.shape[1] - 1)
    if not feasible:
        return size
    emp = np.zeros(size)
    for k in range(n):
        emp = emp + problem.loss[w, z[:, k]]
    gen = emp / n - population_risk(problem, spec.p_z)[w]
    return int(np.count_nonzero(np.abs(gen) > eps))


def coverage_monte_carlo(
    spec: ProblemSpec,
    bound_id: str,
    samples: int,
    seed: int,
    *,
    epsilon: Optional[float] = None,
    exact_model: Optional[JointModel] = None,
    delta: Optional[float] = None,
    m: Optional[float] = None,
    alpha: Optional[float] = None,
    gamma=None,
    epsilon_scale: float = 1.0,
    workers: int = 1,
    block_size: int = MC_BLOCK,
) -> McEstimate:
    """Sampled violation frequency of a data-independent single-draw bound.

    Datasets are drawn i.i.d. from ``spec.p_z`` and hypotheses from the
    learner's posterior computed per sample, so the joint is never built.
    ``epsilon`` is either supplied or evaluated on ``exact_model``. Block
    ``b`` draws from a Philox stream keyed by ``(seed, b)``, so the estimate
    does not depend on ``workers``.
    """
    if bound_id not in _MC_IDS:
        raise ValueError("bound not MC-estimable")
    if samples < MC_MIN_SAMPLES:
        raise ValueError(f"need at least {MC_MIN_SAMPLES} samples")
    if not (0 <= seed < 2**64):
        raise ValueError("seed must be an unsigned 64-bit integer")
    if epsilon is None:
        if exact_model is None:
            raise ValueError("supply epsilon or an exact model to evaluate it on")
        q = _query(exact_model, spec.problem, bound_id, delta, m, alpha, gamma)
        res = evaluate(q, exact_model)
        epsilon, feasible = res.epsilon, res.feasible
    else:
        feasible = math.isfinite(epsilon)
    epsilon = epsilon * epsilon_scale
    sizes = [block_size] * (samples // block_size)
    if samples % block_size:
        sizes.append(samples % block_size)

    def run(args):
        b, size = args
        return _mc_block(spec, epsilon, feasible, seed, b, size)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(run, enumerate(sizes)))
    else:
        counts = [run(a) for a in enumerate(sizes)]
    hits = sum(counts)
    est = hits / samples
    return McEstimate(est, math.sqrt(est * (1.0 - est) / samples), samples, seed, hits, epsilon)


# -- suite ----------------------------------------------------------------

SUITE_CHECKS = ("theorem1", "coverage", "lemma", "hoeffding", "ordering", "average")


def coverage_plan(m_grid: Iterable[float] = (1.0, 2.0, 4.0)) -> list[tuple[str, dict]]:
    """Bound configurations certified by the coverage check."""
    plan = [("pac_bayes_data", {})]
    plan += [("pac_bayes_moment", {"m": m}) for m in m_grid]
    plan += [("single_draw_data", {})]
    plan += [("single_draw_moment", {"m": m}) for m in m_grid]
    plan += [("single_draw_m_inf", {}), ("single_draw_leakage", {}),
             ("strong_converse", {"gamma": "optimize"})]
    plan += [("rederived_moment", {"m": m}) for m in m_grid]
    plan += [("rederived_leakage", {})]
    return plan


def run_suite(
    model: JointModel,
    problem: LearningProblem,
    checks: Iterable[str] = SUITE_CHECKS,
    deltas: Iterable[float] = DEFAULT_DELTAS,
    epsilon_scale: float = 1.0,
    verbose: bool = False,
) -> dict:
    """Run the selected checks; ``result["passed"]`` is true iff all pass."""
    checks = list(checks)
    unknown = set(checks) - set(SUITE_CHECKS)
    if unknown:
        raise ValueError(f"unknown checks: {sorted(unknown)}")
    out: dict = {"checks": {}}
    ok = True
    if "theorem1" in checks:
        r = theorem1_check(model, problem)
        out["checks"]["theorem1"] = r.to_dict()
        ok &= r.passed
    if "average" in checks:
        r = coverage_average(model, problem, epsilon_scale)
        out["checks"]["average"] = r.to_dict()
        ok &= r.passed
    if "coverage" in checks:
        rows = []
        for delta in deltas:
            for bound_id, kw in coverage_plan():
                r = coverage(model, problem, bound_id, delta,
                             epsilon_scale=epsilon_scale, verbose=verbose, **kw)
                rows.append(r.to_dict(verbose))
                ok &= r.passed
        out["checks"]["coverage"] = rows
    if "lemma" in checks:
        rows = lemma_grid_check(model, problem)
        out["checks"]["lemma"] = [r.to_dict() for r in rows]
        ok &= all(r.passed for r in rows)
    if "hoeffding" in checks:
        rows = hoeffding_tail_check(problem, model.p_z, model.n)
        out["checks"]["hoeffding"] = [asdict(r) for r in rows]
        ok &= all(r.passed for r in rows)
    if "ordering" in checks:
        r = ordering_check(model)
        out["checks"]["ordering"] = r.to_dict()
        ok &= r.passed
    out["passed"] = bool(ok)
    return out
