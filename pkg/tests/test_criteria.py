import math

import numpy as np
import pytest

from nopasim.criteria import (
    Criterion,
    cluster_combos,
    criteria_contrast,
    evaluate,
    ghz_combos,
    nopa_criteria,
)
from nopasim.gaussian import QuadratureCombination, vacuum_state
from nopasim.protocol import build_four_mode_state

R_GRID = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]


class TestNopaCriteria:
    @pytest.mark.parametrize("R", R_GRID)
    def test_bounds_exactly_two(self, R):
        for c in nopa_criteria(R):
            assert c.bound == 2.0

    def test_zero_reflectivity_drops_middle_mode(self):
        first = nopa_criteria(0.0)[0]
        coeffs = {(m, q): c for m, q, c in first.combo.terms}
        assert coeffs[("a1", "X")] == 1.0
        assert coeffs[("a2", "X")] == 0.0
        assert coeffs[("a3", "X")] == 1.0

    def test_four_criteria_two_of_each_type(self):
        crit = nopa_criteria(0.5)
        assert len(crit) == 4
        x_type = [c for c in crit if all(q == "X" for _, q, _ in c.combo.terms)]
        p_type = [c for c in crit if all(q == "P" for _, q, _ in c.combo.terms)]
        assert len(x_type) == 2 and len(p_type) == 2

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            nopa_criteria(1.2)


class TestEvaluate:
    @pytest.mark.parametrize("R", [0.0, 0.35, 0.7])
    def test_squeezed_resource_passes(self, R):
        state, led = build_four_mode_state(1.0, 1.0, R)
        want = 2 * math.exp(-2)
        for target in (state, led):
            report = evaluate(target, nopa_criteria(R))
            assert report.passed
            for res in report.results:
                assert res.variance == pytest.approx(want, abs=1e-10)

    def test_vacuum_resource_fails(self):
        state, _ = build_four_mode_state(0.0, 0.0, 0.5)
        report = evaluate(state, nopa_criteria(0.5))
        assert not report.passed
        for res in report.results:
            assert res.variance == pytest.approx(2.0, abs=1e-12)
            assert not res.passed

    def test_one_sided_squeezing(self):
        # r2 = 0 leaves the idler-side pair at shot noise
        state, _ = build_four_mode_state(1.0, 0.0, 0.5)
        report = evaluate(state, nopa_criteria(0.5))
        by_label = {r.label: r for r in report.results}
        assert by_label["X[a1,a2,a3]"].passed
        assert by_label["P[a1,a2,a3]"].passed
        assert not by_label["X[a2,a3,a4]"].passed
        assert not by_label["P[a2,a3,a4]"].passed
        assert by_label["X[a2,a3,a4]"].variance == pytest.approx(2.0, abs=1e-12)

    def test_unknown_target_type(self):
        with pytest.raises(TypeError):
            evaluate(42, nopa_criteria(0.5))

    def test_unknown_mode(self):
        state = vacuum_state(2, ["u", "v"])
        with pytest.raises(ValueError):
            evaluate(state, nopa_criteria(0.5))


class TestClusterAndGhz:
    def test_cluster_bounds(self):
        bounds = [c.bound for c in cluster_combos()]
        assert bounds == [3.0, 2.0, 2.0, 3.0]

    def test_cluster_count(self):
        assert len(cluster_combos()) == 4

    def test_cluster_vacuum_saturates(self):
        state = vacuum_state(4, ["m1", "m2", "m3", "m4"])
        report = evaluate(state, cluster_combos(state.modes))
        assert not report.passed
        for res in report.results:
            assert res.variance == res.bound

    def test_ghz_combo_count(self):
        combos = ghz_combos()
        assert len(combos) == 1 + math.comb(4, 2)

    def test_ghz_total_x_bound(self):
        assert ghz_combos()[0].bound == 4.0

    def test_ghz_vacuum_saturates(self):
        state = vacuum_state(4, ["m1", "m2", "m3", "m4"])
        report = evaluate(state, ghz_combos(state.modes))
        assert not report.passed
        for res in report.results:
            assert res.variance == res.bound


class TestContrast:
    def test_mode_counts(self):
        rep = criteria_contrast(0.5)
        assert rep.mode_counts["nopa"] == (3, 3, 3, 3)
        assert 2 in rep.mode_counts["cluster"]
        assert rep.mode_counts["ghz"][1:] == (2,) * 6
        assert rep.nopa_all_three_mode
        assert rep.cluster_has_two_mode
        assert rep.ghz_has_two_mode

    def test_range_is_open_interval(self):
        with pytest.raises(ValueError):
            criteria_contrast(0.0)
        with pytest.raises(ValueError):
            criteria_contrast(1.0)


class TestInvariants:
    @pytest.mark.parametrize("r", [0.0, 0.5, 1.0, 2.0])
    @pytest.mark.parametrize("R", [0.0, 0.25, 0.5, 0.75, 1.0])
    def test_variances_closed_form(self, r, R):
        _, led = build_four_mode_state(r, r, R)
        report = evaluate(led, nopa_criteria(R))
        want = 2 * math.exp(-2 * r)
        for res in report.results:
            assert res.variance == pytest.approx(want, abs=1e-10)
            assert res.passed == (r > 0)

    def test_bound_invariant_under_sign_flips(self):
        c = nopa_criteria(0.37)[0]
        flipped = Criterion(
            c.label,
            QuadratureCombination(tuple((m, q, -v) for m, q, v in c.combo.terms)),
        )
        assert flipped.bound == c.bound

    def test_engine_agreement(self):
        for R in (0.15, 0.6):
            state, led = build_four_mode_state(0.7, 1.2, R)
            rs = evaluate(state, nopa_criteria(R)).results
            rl = evaluate(led, nopa_criteria(R)).results
            for a, b in zip(rs, rl):
                assert a.variance == pytest.approx(b.variance, abs=1e-10)

    def test_margin_continuous_in_R(self):
        # the b-pair terms cancel identically, so the variance (and margin)
        # is flat in R
        margins = []
        for R in np.linspace(0.05, 0.95, 19):
            _, led = build_four_mode_state(1.0, 1.0, R)
            margins.append(evaluate(led, nopa_criteria(R)).results[0].margin)
        assert max(margins) - min(margins) < 1e-10

    def test_nonpositive_bound_rejected(self):
        crit = Criterion("bad", QuadratureCombination((("a", "X", 0.0),)))
        with pytest.raises(ValueError):
            _ = crit.bound
