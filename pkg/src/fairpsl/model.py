"""Rule sets of the hybrid recommender: mean-centering priors, neighbourhood
collaborative filtering, demographic/content similarity and a negative prior."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import pandas as pd

from .rulekit import AtomTable, Predicate, RuleTemplate, parse_rule
from .simgraph import SimilarityGraph

log = logging.getLogger(__name__)

VARIANTS = ("MC", "MC_CF", "MC_CF_DC")

PREDICATES = (
    Predicate("Rating", 2, ("User", "Item"), closed=False),
    Predicate("AverageUserRating", 1, ("User",)),
    Predicate("AverageItemRating", 1, ("Item",)),
    Predicate("SimilarUsersCosine", 2, ("User", "User")),
    Predicate("SimilarItemsCosine", 2, ("Item", "Item")),
    Predicate("SimilarItemsAdjCosine", 2, ("Item", "Item")),
    Predicate("SimilarUsersDemo", 2, ("User", "User")),
    Predicate("SimilarItemsContent", 2, ("Item", "Item")),
)

# rule name -> (rule body text, default weight, default exponent)
RULES = {
    "avg_user": ("AverageUserRating(U) -> Rating(U,I)", 1.0, 2),
    "avg_user_neg": ("!AverageUserRating(U) -> !Rating(U,I)", 1.0, 2),
    "avg_item": ("AverageItemRating(I) -> Rating(U,I)", 1.0, 2),
    "avg_item_neg": ("!AverageItemRating(I) -> !Rating(U,I)", 1.0, 2),
    "neg_prior": ("!Rating(U,I)", 0.1, 1),
    "sim_users_cosine": ("SimilarUsersCosine(U1,U2) & Rating(U1,I) -> Rating(U2,I)", 5.0, 2),
    "sim_items_cosine": ("SimilarItemsCosine(I1,I2) & Rating(U,I1) -> Rating(U,I2)", 5.0, 2),
    "sim_items_adjcos": ("SimilarItemsAdjCosine(I1,I2) & Rating(U,I1) -> Rating(U,I2)", 5.0, 2),
    "sim_users_demo": ("SimilarUsersDemo(U1,U2) & Rating(U1,I) -> Rating(U2,I)", 1.0, 2),
    "sim_items_content": ("SimilarItemsContent(I1,I2) & Rating(U,I1) -> Rating(U,I2)", 1.0, 2),
}

MC_RULES = ("avg_user", "avg_user_neg", "avg_item", "avg_item_neg", "neg_prior")
CF_RULES = ("sim_users_cosine", "sim_items_cosine", "sim_items_adjcos")
DC_RULES = ("sim_users_demo", "sim_items_content")

# similarity rule -> (measure, predicate)
SIMILARITY_RULES = {
    "sim_users_cosine": ("user-cosine", "SimilarUsersCosine"),
    "sim_items_cosine": ("item-cosine", "SimilarItemsCosine"),
    "sim_items_adjcos": ("item-adjusted-cosine", "SimilarItemsAdjCosine"),
    "sim_users_demo": ("user-demographic", "SimilarUsersDemo"),
    "sim_items_content": ("item-content", "SimilarItemsContent"),
}


def variant_rules(variant: str) -> tuple[str, ...]:
    if variant == "MC":
        return MC_RULES
    if variant == "MC_CF":
        return MC_RULES + CF_RULES
    if variant == "MC_CF_DC":
        return MC_RULES + CF_RULES + DC_RULES
    raise ValueError(f"unknown model variant {variant!r}; expected one of {VARIANTS}")


def required_measures(variant: str) -> list[str]:
    return [SIMILARITY_RULES[r][0] for r in variant_rules(variant) if r in SIMILARITY_RULES]


@dataclass
class ModelSpec:
    variant: str = "MC_CF"
    weights: dict[str, float] = field(default_factory=dict)
    exponents: dict[str, int] = field(default_factory=dict)
    k: int = 20
    body_ratings: str = "all"  # Rating atoms allowed in rule bodies: "all" | "observed"

    def __post_init__(self):
        rules = variant_rules(self.variant)
        for name in list(self.weights) + list(self.exponents):
            if name not in RULES:
                raise ValueError(f"unknown rule name {name!r}")
        for name in rules:
            if self.weight(name) < 0:
                raise ValueError(f"weight of {name} must be nonnegative")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.body_ratings not in ("all", "observed"):
            raise ValueError(f"body_ratings must be 'all' or 'observed', got {self.body_ratings!r}")

    def weight(self, name: str) -> float:
        return float(self.weights.get(name, RULES[name][1]))

    def exponent(self, name: str) -> int:
        return int(self.exponents.get(name, RULES[name][2]))

    @property
    def rule_names(self) -> tuple[str, ...]:
        return variant_rules(self.variant)


def templates_for(spec: ModelSpec) -> list[RuleTemplate]:
    preds = {p.name: p for p in PREDICATES}
    out = []
    for name in spec.rule_names:
        text, _, _ = RULES[name]
        suffix = " ^2" if spec.exponent(name) == 2 else ""
        out.append(parse_rule(f"{spec.weight(name)!r}: {text}{suffix}", preds, name=name))
    return out


def compute_priors(train: pd.DataFrame, users, items) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Mean normalised training rating per user and per item.

    Entities without training ratings fall back to the global training mean.
    Returns two frames with columns ``(user|movie, value)``.
    """
    global_mean = float(train["normalized"].mean()) if len(train) else 0.5
    out = []
    for key, ids in (("user", users), ("movie", items)):
        means = train.groupby(key)["normalized"].mean()
        ids = pd.Index(np.asarray(ids), name=key)
        vals = means.reindex(ids)
        cold = vals.isna()
        if cold.any():
            log.warning("%d %ss have no training ratings; using the global mean %.4f",
                        int(cold.sum()), key, global_mean)
            vals = vals.fillna(global_mean)
        out.append(pd.DataFrame({key: ids.to_numpy(), "value": vals.to_numpy(dtype=np.float64)}))
    return out[0], out[1]


def add_rating_atoms(table: AtomTable, train: pd.DataFrame, targets: pd.DataFrame):
    table.observe("Rating", train[["user", "movie"]], train["normalized"].to_numpy())
    table.target("Rating", targets[["user", "movie"]])


def build_model(spec: ModelSpec, train: pd.DataFrame, targets: pd.DataFrame,
                users, items, graphs: Mapping[str, SimilarityGraph] | None = None,
                extra_predicates=(), freeze: bool = True):
    """Templates and atom table for one train/test split.

    ``train`` carries ``user, movie, normalized``; ``targets`` the ``user, movie``
    pairs to predict.  ``graphs`` maps measure names to kNN graphs and must
    cover the measures the variant uses.  Returns ``(templates, table)``; with
    ``freeze=False`` the table stays open so more atoms can be added.
    """
    graphs = graphs or {}
    missing = [m for m in required_measures(spec.variant) if m not in graphs]
    if missing:
        raise ValueError(f"variant {spec.variant} needs similarity graphs {missing}")
    templates = templates_for(spec)
    table = AtomTable(list(PREDICATES) + list(extra_predicates))
    add_rating_atoms(table, train, targets)
    user_avg, item_avg = compute_priors(train, users, items)
    table.observe("AverageUserRating", user_avg[["user"]], user_avg["value"].to_numpy())
    table.observe("AverageItemRating", item_avg[["movie"]], item_avg["value"].to_numpy())
    for name in spec.rule_names:
        if name not in SIMILARITY_RULES:
            continue
        measure, pred = SIMILARITY_RULES[name]
        edges = graphs[measure].edges
        # Similar(a, b) holds when a is among the k nearest neighbours of b
        table.observe(pred, edges[["neighbor", "entity"]].astype(np.int64), 1.0)
    if freeze:
        table.freeze()
    return templates, table


def body_filters(templates, spec: ModelSpec, fairness_body: str = "targets"):
    """Per-template Rating restrictions for rule bodies."""
    out = []
    for t in templates:
        if t.name.startswith("fair_"):
            out.append(None if fairness_body == "all" else {"Rating": fairness_body})
        elif t.name in SIMILARITY_RULES and spec.body_ratings == "observed":
            out.append({"Rating": "observed"})
        else:
            out.append(None)
    return out
