"""One cross-validation fold end to end: evidence, grounding, MAP inference,
denormalised predictions."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .dataio import RatingsDataset, FoldSplit, denormalize
from .fairness import FairnessSpec, add_batches, build_fairness_rules, fairness_predicates, latent_gaps
from .model import ModelSpec, body_filters, build_model, required_measures
from .rulekit import PotentialSet, ground
from .simgraph import SimilarityGraph, build_graph
from .solver import SolverConfig, SolveReport, map_inference

log = logging.getLogger(__name__)


@dataclass
class FoldResult:
    predictions: pd.DataFrame  # user, movie, predicted (stars), true (stars), protected
    report: SolveReport
    n_templates: int
    latent_gap: dict[str, float]
    timings: dict[str, float]


def fold_graphs(dataset: RatingsDataset, train: pd.DataFrame, variant: str, k: int,
                cosine_norm: str = "corated") -> dict[str, SimilarityGraph]:
    return {m: build_graph(m, train, dataset.users, dataset.movies, k, cosine_norm)
            for m in required_measures(variant)}


def run_fold(dataset: RatingsDataset, split: FoldSplit, fold: int, spec: ModelSpec,
             fairness: FairnessSpec | None = None, solver: SolverConfig | None = None,
             graphs: dict[str, SimilarityGraph] | None = None, fairness_body: str = "targets",
             cosine_norm: str = "corated") -> FoldResult:
    """Train on every fold but ``fold``; predict the ratings of ``fold``."""
    timings = {}
    t0 = time.perf_counter()
    train = dataset.ratings.iloc[split.train_rows(fold)]
    test = dataset.ratings.iloc[split.test_rows(fold)]
    if graphs is None:
        graphs = fold_graphs(dataset, train, spec.variant, spec.k, cosine_norm)
    timings["similarity"] = time.perf_counter() - t0
    result = predict(dataset, train, test, spec, fairness, solver, graphs, fairness_body)
    result.timings = {**timings, **result.timings}
    return result


def predict(dataset: RatingsDataset, train: pd.DataFrame, test: pd.DataFrame, spec: ModelSpec,
            fairness: FairnessSpec | None = None, solver: SolverConfig | None = None,
            graphs: dict[str, SimilarityGraph] | None = None, fairness_body: str = "targets") -> FoldResult:
    timings = {}
    t0 = time.perf_counter()
    extra = fairness_predicates(fairness) if fairness is not None else ()
    templates, table = build_model(spec, train, test[["user", "movie"]], dataset.users["user"],
                                   dataset.movies["movie"], graphs, extra, freeze=False)
    if fairness is not None:
        fair_templates, batches = build_fairness_rules(fairness, dataset.users, dataset.movies)
        templates = templates + fair_templates
        add_batches(table, batches)
    table.freeze()
    filters = body_filters(templates, spec, fairness_body)
    parts = []
    for k, (t, bf) in enumerate(zip(templates, filters)):
        if t.weight == 0.0:
            continue
        parts.append(ground(t, table, template_id=k, body_filter=bf))
        log.info("grounded %-24s %9d potentials", t.name, len(parts[-1]))
    potentials = PotentialSet.concat(parts)
    timings["grounding"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    y, report = map_inference(potentials, table.n_targets, solver)
    timings["inference"] = time.perf_counter() - t0
    log.info("MAP inference: %d variables, %d potentials, %d iterations, objective %.6g, converged=%s",
             report.n_variables, report.n_potentials, report.iterations, report.objective, report.converged)

    rating_vars = table.frame("Rating")
    rating_vars = rating_vars[rating_vars["var"] >= 0]
    pred = pd.DataFrame({"user": rating_vars["a0"].to_numpy(), "movie": rating_vars["a1"].to_numpy(),
                         "predicted": np.clip(denormalize(y[rating_vars["var"].to_numpy()],
                                                          dataset.normalize), 1.0, 5.0)})
    truth = test[["user", "movie", "stars"]].rename(columns={"stars": "true"})
    pred = pred.merge(truth, on=["user", "movie"], how="left")
    gender = dataset.users.set_index("user")["gender"]
    pred["protected"] = (pred["user"].map(gender) == "F").to_numpy()
    return FoldResult(pred, report, len(templates), latent_gaps(table, y), timings)
