import json
import math

import numpy as np
import pytest

from infobounds import golden
from infobounds.bounds import gen_matrix
from infobounds.finite import probability
from infobounds.measures import information_profile
from infobounds.verify import (
    DEFAULT_DELTAS,
    McEstimate,
    coverage,
    coverage_average,
    coverage_monte_carlo,
    coverage_pac_bayes,
    coverage_plan,
    coverage_single_draw,
    default_lambda_grid,
    default_lemma_grid,
    hoeffding_tail_check,
    lemma_grid_check,
    lemma_split_check,
    ordering_check,
    run_suite,
    theorem1_check,
)
from oracle import Oracle

SINGLE_DRAW_PLAN = [(b, kw) for b, kw in coverage_plan() if not b.startswith("pac_bayes")]


class TestTheorem1:
    def test_grid(self):
        grid = default_lambda_grid()
        assert grid.size == 83
        assert grid.min() == -1000 and grid.max() == 1000

    def test_constant_loss_equality(self):
        spec = golden.independent(constant_loss=True)
        r = theorem1_check(spec.build(), spec.problem, [-5.0, 0.0, 3.0])
        assert r.values == pytest.approx([1.0, 1.0, 1.0], abs=1e-15)

    def test_lambda_zero_copy(self, copy_spec, copy_model):
        r = theorem1_check(copy_model, copy_spec.problem, [0.0])
        assert r.values[0] == pytest.approx(0.5, abs=1e-15)

    def test_gibbs_full_grid(self, gibbs_spec, gibbs_model):
        r = theorem1_check(gibbs_model, gibbs_spec.problem)
        assert r.passed and r.max_value <= 1 + 1e-9

    @pytest.mark.parametrize("lam", [-7.5, 0.0, 2.5, 20.0])
    def test_matches_oracle(self, gibbs_spec, gibbs_model, lam):
        r = theorem1_check(gibbs_model, gibbs_spec.problem, [lam])
        expected = float(Oracle(gibbs_spec).theorem1_value(lam, 0.5))
        assert r.values[0] == pytest.approx(expected, rel=1e-12)


class TestCoverage:
    @pytest.mark.parametrize("bound_id, kw", coverage_plan())
    def test_constant_loss_zero(self, bound_id, kw):
        spec = golden.independent(constant_loss=True)
        r = coverage(spec.build(), spec.problem, bound_id, 0.1, **kw)
        assert r.violation_mass == 0.0 and r.passed

    def test_copy_pointwise(self, copy_spec, copy_model):
        r = coverage_single_draw(copy_model, copy_spec.problem, "single_draw_data", 0.1, verbose=True)
        assert r.violation_mass == 0.0
        eps = {round(d["epsilon"], 6) for d in r.per_atom_detail}
        assert eps == {round(math.sqrt(0.5 * (math.log(2) + math.log(10))), 6)}
        assert all(d["abs_gen"] == 0.5 for d in r.per_atom_detail)

    def test_copy_pac_bayes(self, copy_spec, copy_model):
        r = coverage_pac_bayes(copy_model, copy_spec.problem, "pac_bayes_data", 0.1, verbose=True)
        assert r.violation_mass == 0.0
        assert [abs(d["abs_mean_gen"]) for d in r.per_atom_detail] == [0.5, 0.5]

    @pytest.mark.parametrize("delta", DEFAULT_DELTAS)
    @pytest.mark.parametrize("bound_id, kw", SINGLE_DRAW_PLAN)
    def test_gibbs_single_draw(self, gibbs_spec, gibbs_model, bound_id, kw, delta):
        r = coverage_single_draw(gibbs_model, gibbs_spec.problem, bound_id, delta, **kw)
        assert r.violation_mass <= delta

    @pytest.mark.parametrize("delta", DEFAULT_DELTAS)
    @pytest.mark.parametrize("m", [1, 2])
    def test_gibbs_pac_bayes_moment(self, gibbs_spec, gibbs_model, m, delta):
        r = coverage_pac_bayes(gibbs_model, gibbs_spec.problem, "pac_bayes_moment", delta, m=m)
        assert r.violation_mass <= delta

    def test_infeasible_counts_as_violation(self, gibbs_spec, gibbs_model):
        # at delta 0.5 the pointwise bound is infeasible on negative-density atoms
        r = coverage_single_draw(gibbs_model, gibbs_spec.problem, "single_draw_data", 0.5, verbose=True)
        bad = [d for d in r.per_atom_detail if d["epsilon"] == "inf"]
        assert bad and all(d["violated"] for d in bad)
        assert r.violation_mass > 0 and r.passed

    def test_epsilon_scale_rejects(self, gibbs_spec, gibbs_model):
        results = [
            coverage(gibbs_model, gibbs_spec.problem, b, d, epsilon_scale=0.5, **kw)
            for d in DEFAULT_DELTAS for b, kw in coverage_plan()
        ]
        assert not all(r.passed for r in results)

    def test_report_serializes(self, gibbs_spec, gibbs_model):
        r = coverage(gibbs_model, gibbs_spec.problem, "single_draw_data", 0.5, verbose=True)
        doc = json.loads(json.dumps(r.to_dict(verbose=True), allow_nan=False))
        assert "per_atom_detail" in doc
        assert "per_atom_detail" not in r.to_dict()


class TestAverage:
    def test_independent(self, indep_spec, indep_model):
        r = coverage_average(indep_model, indep_spec.problem)
        assert r.mean_gen == pytest.approx(0.0, abs=1e-16) and r.epsilon == 0.0 and r.passed

    def test_copy(self, copy_spec, copy_model):
        r = coverage_average(copy_model, copy_spec.problem)
        assert r.mean_gen == pytest.approx(-0.5)
        assert r.epsilon == pytest.approx(0.588705, abs=5e-7)
        assert r.slack == pytest.approx(r.epsilon - 0.5)

    def test_gibbs_slack(self, gibbs_spec, gibbs_model):
        r = coverage_average(gibbs_model, gibbs_spec.problem)
        assert r.mean_gen == pytest.approx(-0.19039853898894122, rel=1e-12)
        assert r.slack == pytest.approx(0.20242693912642214 - 0.19039853898894122, rel=1e-10)


class TestLemma:
    def test_gamma_above_max(self, gibbs_spec, gibbs_model):
        dens = information_profile(gibbs_model).density
        r = lemma_split_check(gibbs_model, gibbs_spec.problem, 0.1, float(dens.max()) + 1)
        assert r.p_tail == 0.0 and r.passed

    def test_gamma_below_min(self, gibbs_spec, gibbs_model):
        dens = information_profile(gibbs_model).density
        r = lemma_split_check(gibbs_model, gibbs_spec.problem, 0.1, float(dens.min()) - 1)
        assert r.p_tail == pytest.approx(1.0) and r.passed

    def test_strict_tail(self, copy_spec, copy_model):
        r = lemma_split_check(copy_model, copy_spec.problem, 0.1, math.log(2))
        assert r.p_tail == 0.0

    def test_gibbs_grid(self, gibbs_spec, gibbs_model):
        grid = default_lemma_grid(gibbs_model, gibbs_spec.problem)
        assert len(grid) == 25
        reports = lemma_grid_check(gibbs_model, gibbs_spec.problem, grid)
        assert all(r.p_event <= r.rhs + 1e-12 for r in reports)


class TestHoeffding:
    def test_eps_zero(self, gibbs_spec):
        rows = hoeffding_tail_check(gibbs_spec.problem, gibbs_spec.p_z, 2, [0.0])
        assert all(r.rhs == 2.0 and r.passed for r in rows)

    def test_constant_loss(self):
        spec = golden.independent(constant_loss=True)
        rows = hoeffding_tail_check(spec.problem, spec.p_z, 3, [0.1, 0.5])
        assert all(r.lhs == 0.0 for r in rows)

    def test_copy_n4(self, copy_spec):
        rows = hoeffding_tail_check(copy_spec.problem, copy_spec.p_z, 4)
        assert len(rows) == 2 * 9 and all(r.passed for r in rows)


class TestOrdering:
    def test_independent(self, indep_model):
        r = ordering_check(indep_model)
        assert (r.maximal_leakage, r.max_information, r.mi_plus_moment_infinity) == (0.0, 0.0, 0.0)

    def test_copy_tight(self, copy_model):
        r = ordering_check(copy_model)
        assert r.maximal_leakage == pytest.approx(r.mi_plus_moment_infinity, abs=1e-15)
        assert r.passed

    def test_random_models(self, golden_models):
        assert all(ordering_check(m).passed for name, (_, m) in golden_models.items() if name.startswith("random"))


class TestMonteCarlo:
    def test_constant_loss_zero(self):
        spec = golden.independent(constant_loss=True)
        est = coverage_monte_carlo(spec, "single_draw_moment", 5000, 3, exact_model=spec.build(), delta=0.1, m=2)
        assert est.estimate == 0.0 and est.std_error == 0.0

    def test_deterministic(self, gibbs_spec, gibbs_model):
        kw = dict(exact_model=gibbs_model, delta=0.5, m=2)
        a = coverage_monte_carlo(gibbs_spec, "single_draw_moment", 20000, 11, **kw)
        b = coverage_monte_carlo(gibbs_spec, "single_draw_moment", 20000, 11, **kw)
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
        c = coverage_monte_carlo(gibbs_spec, "single_draw_moment", 20000, 12, **kw)
        assert c.violations != a.violations or c.seed != a.seed

    def test_workers_do_not_matter(self, gibbs_spec):
        kw = dict(epsilon=0.3, block_size=1000)
        a = coverage_monte_carlo(gibbs_spec, "single_draw_leakage", 7500, 5, workers=1, **kw)
        b = coverage_monte_carlo(gibbs_spec, "single_draw_leakage", 7500, 5, workers=4, **kw)
        assert a == b

    def test_agrees_with_exact(self, gibbs_spec, gibbs_model):
        # with a fixed epsilon the exact violation mass is P[|gen| > 0.3]
        est = coverage_monte_carlo(gibbs_spec, "single_draw_leakage", 50000, 1, epsilon=0.3)
        truth = probability(gibbs_model, np.abs(gen_matrix(gibbs_spec.problem, gibbs_model)) > 0.3)
        assert abs(est.estimate - truth) <= 3 * est.std_error

    @pytest.mark.parametrize("bound_id", ["single_draw_data", "pac_bayes_data", "pac_bayes_moment"])
    def test_not_estimable(self, gibbs_spec, bound_id):
        with pytest.raises(ValueError, match="bound not MC-estimable"):
            coverage_monte_carlo(gibbs_spec, bound_id, 1000, 0, epsilon=1.0)

    def test_min_samples(self, gibbs_spec):
        with pytest.raises(ValueError, match="at least"):
            coverage_monte_carlo(gibbs_spec, "single_draw_leakage", 999, 0, epsilon=1.0)

    def test_infeasible_all_violations(self, gibbs_spec):
        est = coverage_monte_carlo(gibbs_spec, "single_draw_leakage", 1000, 0, epsilon=math.inf)
        assert isinstance(est, McEstimate)
        # an infeasible bound is violated by every sample
        assert est.estimate == 1.0


class TestSuite:
    def test_gibbs_passes(self, gibbs_spec, gibbs_model):
        out = run_suite(gibbs_model, gibbs_spec.problem)
        assert out["passed"]
        assert set(out["checks"]) == {"theorem1", "coverage", "lemma", "hoeffding", "ordering", "average"}
        json.dumps(out, allow_nan=False)

    def test_negative_control(self, gibbs_spec, gibbs_model):
        out = run_suite(gibbs_model, gibbs_spec.problem, ["coverage"], epsilon_scale=0.5)
        assert not out["passed"]

    def test_unknown_check(self, gibbs_spec, gibbs_model):
        with pytest.raises(ValueError):
            run_suite(gibbs_model, gibbs_spec.problem, ["nope"])

    @pytest.mark.parametrize("name", ["extended_n3_b0.5", "random_05", "random_21"])
    def test_other_models(self, golden_models, name):
        spec, model = golden_models[name]
        assert run_suite(model, spec.problem)["passed"]
