"""Accuracy and group-unfairness metrics for rating predictions.

All metrics work on the 1-5 star scale.  The item-level unfairness metrics
compare, for each item rated by both groups in the evaluated set, the group
means of predictions and of true ratings, and average over those items.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

METRICS = ("rmse", "mae", "overestimation", "absolute", "non_parity",
           "underestimation", "value", "balance")
TABLE_HEADERS = {
    "rmse": "RMSE", "mae": "MAE", "overestimation": "Overestimation",
    "absolute": "Absolute", "non_parity": "Non-Parity", "underestimation": "Underestimation",
    "value": "Value", "balance": "Balance",
}


class MetricError(ValueError):
    pass


def prediction_set(user, item, predicted, truth, protected) -> pd.DataFrame:
    """Normalise inputs into the frame the metric functions expect."""
    frame = pd.DataFrame({"user": user, "item": item,
                          "pred": np.asarray(predicted, dtype=np.float64),
                          "true": np.asarray(truth, dtype=np.float64),
                          "protected": np.asarray(protected, dtype=bool)})
    if not np.isfinite(frame["pred"]).all():
        raise MetricError("non-finite prediction")
    if ((frame["true"] < 1) | (frame["true"] > 5)).any():
        raise MetricError("true ratings must lie in [1, 5]")
    return frame


def _nonempty(preds):
    if len(preds) == 0:
        raise MetricError("empty prediction set")


def rmse(preds: pd.DataFrame) -> float:
    _nonempty(preds)
    err = preds["pred"].to_numpy() - preds["true"].to_numpy()
    return float(np.sqrt(np.mean(err * err)))


def mae(preds: pd.DataFrame) -> float:
    _nonempty(preds)
    return float(np.mean(np.abs(preds["pred"].to_numpy() - preds["true"].to_numpy())))


def non_parity(preds: pd.DataFrame) -> float:
    prot = preds["protected"].to_numpy()
    if prot.all() or not prot.any():
        raise MetricError("non-parity needs both protected and unprotected entries")
    p = preds["pred"].to_numpy()
    return float(abs(p[prot].mean() - p[~prot].mean()))


def group_item_means(preds: pd.DataFrame) -> pd.DataFrame:
    """Per eligible item: group means of predictions (``y_p``, ``y_u``) and
    truths (``r_p``, ``r_u``).  Items not rated by both groups are dropped."""
    g = preds.groupby(["item", "protected"])[["pred", "true"]].mean().unstack("protected")
    g = g.dropna()
    if (True not in g["pred"].columns) or (False not in g["pred"].columns) or len(g) == 0:
        raise MetricError("no item is rated by both groups")
    return pd.DataFrame({"y_p": g[("pred", True)], "y_u": g[("pred", False)],
                         "r_p": g[("true", True)], "r_u": g[("true", False)]})


def value_unfairness(preds) -> float:
    m = group_item_means(preds)
    return float(np.mean(np.abs((m.y_p - m.r_p) - (m.y_u - m.r_u))))


def absolute_unfairness(preds) -> float:
    m = group_item_means(preds)
    return float(np.mean(np.abs(np.abs(m.y_p - m.r_p) - np.abs(m.y_u - m.r_u))))


def underestimation_unfairness(preds) -> float:
    m = group_item_means(preds)
    return float(np.mean(np.abs(np.maximum(0.0, m.r_p - m.y_p) - np.maximum(0.0, m.r_u - m.y_u))))


def overestimation_unfairness(preds) -> float:
    m = group_item_means(preds)
    return float(np.mean(np.abs(np.maximum(0.0, m.y_p - m.r_p) - np.maximum(0.0, m.y_u - m.r_u))))


def balance(under: float, over: float) -> float:
    return (under + over) / 2.0


@dataclass
class MetricsReport:
    rmse: float
    mae: float
    non_parity: float
    value: float
    absolute: float
    underestimation: float
    overestimation: float
    balance: float
    per_fold: list["MetricsReport"] = field(default_factory=list, repr=False)
    sd: dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict[str, float]:
        return {m: getattr(self, m) for m in METRICS}


def evaluate(preds: pd.DataFrame) -> MetricsReport:
    under = underestimation_unfairness(preds)
    over = overestimation_unfairness(preds)
    return MetricsReport(rmse=rmse(preds), mae=mae(preds), non_parity=non_parity(preds),
                         value=value_unfairness(preds), absolute=absolute_unfairness(preds),
                         underestimation=under, overestimation=over, balance=balance(under, over))


def aggregate(reports: list[MetricsReport]) -> MetricsReport:
    """Mean over folds with population standard deviation (ddof=0)."""
    if not reports:
        raise MetricError("no fold reports to aggregate")
    table = np.array([[getattr(r, m) for m in METRICS] for r in reports])
    mean = table.mean(axis=0)
    sd = table.std(axis=0, ddof=0)
    out = MetricsReport(**dict(zip(METRICS, mean.tolist())))
    out.per_fold = list(reports)
    out.sd = dict(zip(METRICS, sd.tolist()))
    return out


def render_table(rows: dict[str, MetricsReport]) -> str:
    """Text table with ``mean (sd)`` per metric, one line per model."""
    name_w = max([len("Model")] + [len(n) for n in rows])
    cells = [[f"{r.as_dict()[m]:.3f} ({r.sd.get(m, 0.0):.3f})" for m in METRICS] for r in rows.values()]
    col_w = [max(len(TABLE_HEADERS[m]), *(len(c[k]) for c in cells)) for k, m in enumerate(METRICS)]
    head = "Model".ljust(name_w) + " | " + " | ".join(TABLE_HEADERS[m].ljust(w) for m, w in zip(METRICS, col_w))
    lines = [head, "-" * len(head)]
    for name, c in zip(rows, cells):
        lines.append(name.ljust(name_w) + " | " + " | ".join(x.ljust(w) for x, w in zip(c, col_w)))
    return "\n".join(lines) + "\n"


def metric_rows(model: str, report: MetricsReport) -> list[tuple[str, str, str, float]]:
    """Machine-readable rows ``(model, metric, fold, value)``; fold ``mean``/``sd`` for aggregates."""
    rows = []
    for k, fold in enumerate(report.per_fold):
        for m in METRICS:
            rows.append((model, m, str(k), getattr(fold, m)))
    for m in METRICS:
        rows.append((model, m, "mean", getattr(report, m)))
        if report.sd:
            rows.append((model, m, "sd", report.sd[m]))
    return rows
