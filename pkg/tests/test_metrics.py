import math

import pandas as pd
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from fairpsl.metrics import (METRICS, MetricError, MetricsReport, absolute_unfairness, aggregate, balance, evaluate,
                             mae, metric_rows, non_parity, overestimation_unfairness, prediction_set, render_table,
                             rmse, underestimation_unfairness, value_unfairness)


def preds(rows):
    """rows of (user, item, predicted, true, protected)"""
    u, i, p, t, g = zip(*rows)
    return prediction_set(u, i, p, t, g)


# Two items, users 1-2 protected and 3-4 unprotected; user 2 did not rate item B.
FIXTURE = preds([
    (1, "A", 4, 5, True), (2, "A", 3, 3, True), (3, "A", 4, 3, False), (4, "A", 2, 2, False),
    (1, "B", 2, 1, True), (3, "B", 5, 4, False), (4, "B", 3, 5, False),
])
# Worked by hand.  Errors (pred - true): A -1, 0, +1, 0; B +1, +1, -2.
# Per-item group mean errors: A protected -0.5, unprotected +0.5;
# B protected +1, unprotected -0.5.  Group prediction means 3 and 3.5.
FIXTURE_EXPECTED = {
    "rmse": math.sqrt(8 / 7),
    "mae": 6 / 7,
    "non_parity": 0.5,
    "value": (1.0 + 1.5) / 2,
    "absolute": (0.0 + 0.5) / 2,
    "underestimation": (0.5 + 0.5) / 2,
    "overestimation": (0.5 + 1.0) / 2,
    "balance": 0.625,
}


class TestFixture:
    @pytest.mark.parametrize("metric", METRICS)
    def test_hand_worked_values(self, metric):
        assert abs(getattr(evaluate(FIXTURE), metric) - FIXTURE_EXPECTED[metric]) <= 1e-12


class TestExamples:
    def test_perfect_predictions(self):
        p = preds([(1, 1, 3, 3, True), (2, 1, 4, 4, False), (1, 2, 5, 5, True), (2, 2, 1, 1, False)])
        rep = evaluate(p)
        assert rep.rmse == rep.mae == 0.0
        assert rep.value == rep.absolute == rep.underestimation == rep.overestimation == rep.balance == 0.0

    def test_rmse_mae(self):
        p = preds([(1, 1, 3, 1, True), (2, 1, 3, 5, False)])
        assert rmse(p) == 2.0 and mae(p) == 2.0

    def test_single_entry_off_by_half(self):
        p = preds([(1, 1, 3.5, 3, True)])
        assert rmse(p) == 0.5 and mae(p) == 0.5

    def test_non_parity(self):
        p = preds([(1, 1, 3.0, 3, True), (2, 1, 3.5, 3, False)])
        assert non_parity(p) == 0.5
        assert non_parity(preds([(1, 1, 3.2, 3, True), (2, 2, 3.2, 3, False)])) == 0.0

    def test_non_parity_needs_both_groups(self):
        with pytest.raises(MetricError):
            non_parity(preds([(1, 1, 3.0, 3, True)]))

    def test_opposite_errors(self):
        p = preds([(1, 1, 4, 3, True), (2, 1, 2, 3, False)])
        assert value_unfairness(p) == 2.0
        assert absolute_unfairness(p) == 0.0
        assert underestimation_unfairness(p) == 1.0
        assert overestimation_unfairness(p) == 1.0

    def test_absolute_one(self):
        assert absolute_unfairness(preds([(1, 1, 4, 3, True), (2, 1, 3, 3, False)])) == 1.0

    def test_same_underestimate(self):
        p = preds([(1, 1, 2.5, 3, True), (2, 1, 3.5, 4, False)])
        assert underestimation_unfairness(p) == 0.0

    def test_single_group_item_excluded(self):
        extra = pd.concat([FIXTURE, preds([(1, "C", 1, 5, True), (2, "C", 1, 5, True)])], ignore_index=True)
        assert value_unfairness(extra) == FIXTURE_EXPECTED["value"]

    def test_no_eligible_item(self):
        with pytest.raises(MetricError, match="both groups"):
            value_unfairness(preds([(1, 1, 3, 3, True), (2, 2, 3, 3, False)]))

    @pytest.mark.parametrize("under, over, want", [(0.2, 0.4, 0.3), (0.0, 0.0, 0.0)])
    def test_balance(self, under, over, want):
        assert balance(under, over) == pytest.approx(want, abs=1e-15)


class TestValidation:
    def test_empty(self):
        with pytest.raises(MetricError):
            rmse(prediction_set([], [], [], [], []))

    def test_non_finite_prediction(self):
        with pytest.raises(MetricError, match="non-finite"):
            preds([(1, 1, float("nan"), 3, True)])

    def test_truth_out_of_range(self):
        with pytest.raises(MetricError):
            preds([(1, 1, 3, 6, True)])


@st.composite
def prediction_sets(draw):
    n_items = draw(st.integers(1, 4))
    rows = []
    for item in range(n_items):
        # one protected and one unprotected user per item guarantee eligibility
        for user, prot in ((0, True), (1, False)):
            rows.append((user, item, draw(st.floats(1, 5)), draw(st.integers(1, 5)), prot))
        for user in draw(st.lists(st.integers(2, 6), max_size=4, unique=True)):
            rows.append((user, item, draw(st.floats(1, 5)), draw(st.integers(1, 5)), user % 2 == 0))
    return preds(rows)


UNFAIRNESS = ("non_parity", "value", "absolute", "underestimation", "overestimation", "balance")


class TestProperties:
    @given(prediction_sets())
    @settings(max_examples=80)
    def test_label_swap_invariance(self, p):
        a, b = evaluate(p), evaluate(p.assign(protected=~p["protected"]))
        for m in UNFAIRNESS:
            assert getattr(a, m) == pytest.approx(getattr(b, m), abs=1e-12)

    @given(prediction_sets(), st.floats(-0.5, 0.5))
    @settings(max_examples=80)
    def test_shift_invariance(self, p, c):
        shifted = p.assign(pred=p["pred"] + c, true=p["true"] + c)
        assume(shifted["true"].between(1, 5).all())
        a, b = evaluate(p), evaluate(shifted)
        for m in ("value", "absolute", "underestimation", "overestimation", "balance"):
            assert getattr(a, m) == pytest.approx(getattr(b, m), abs=1e-9)

    @given(prediction_sets())
    @settings(max_examples=80)
    def test_inequalities(self, p):
        rep = evaluate(p)
        assert rep.rmse >= rep.mae - 1e-12
        assert rep.value <= rep.underestimation + rep.overestimation + 1e-12
        assert all(v >= 0 for v in rep.as_dict().values())
        assert rep.balance == pytest.approx((rep.underestimation + rep.overestimation) / 2)


def report(v):
    return MetricsReport(**{m: v for m in METRICS})


class TestAggregate:
    def test_population_sd(self):
        agg = aggregate([report(v) for v in (1.0, 2.0, 3.0, 4.0, 5.0)])
        assert agg.rmse == 3.0
        assert agg.sd["rmse"] == pytest.approx(math.sqrt(2.0))
        assert len(agg.per_fold) == 5

    def test_empty(self):
        with pytest.raises(MetricError):
            aggregate([])

    def test_table_and_rows(self):
        agg = aggregate([report(0.5), report(1.5)])
        table = render_table({"MC_CF": agg})
        lines = table.splitlines()
        assert lines[0].startswith("Model") and "Non-Parity" in lines[0]
        assert "1.000 (0.500)" in lines[2]
        rows = metric_rows("MC_CF", agg)
        assert ("MC_CF", "rmse", "mean", 1.0) in rows and ("MC_CF", "rmse", "sd", 0.5) in rows
        assert len(rows) == 8 * 2 + 8 * 2
