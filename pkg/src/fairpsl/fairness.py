"""Fairness rules: latent protected/unprotected ratings per item and per item
group, tied together by soft equality (two opposite implications)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import pandas as pd

from .dataio import GENRES
from .rulekit import Predicate, RuleTemplate, parse_rule

FAIR_PREDICATES = (
    Predicate("IsFemale", 1, ("User",)),
    Predicate("IsGenre", 2, ("Item", "Group")),
    Predicate("ProtectedItemRating", 1, ("Item",), closed=False),
    Predicate("UnprotectedItemRating", 1, ("Item",), closed=False),
    Predicate("ProtectedItemGroupRating", 1, ("Group",), closed=False),
    Predicate("UnprotectedItemGroupRating", 1, ("Group",), closed=False),
)

ITEM_AGGREGATION = {
    "fair_item_protected": "{P}(U) & Rating(U,I) -> ProtectedItemRating(I)",
    "fair_item_unprotected": "!{P}(U) & Rating(U,I) -> UnprotectedItemRating(I)",
}
ITEM_COUPLING = {
    "fair_item_couple_pu": "ProtectedItemRating(I) -> UnprotectedItemRating(I)",
    "fair_item_couple_up": "UnprotectedItemRating(I) -> ProtectedItemRating(I)",
}
GROUP_AGGREGATION = {
    "fair_group_protected": "{P}(U) & Rating(U,I) & {G}(I,G) -> ProtectedItemGroupRating(G)",
    "fair_group_unprotected": "!{P}(U) & Rating(U,I) & {G}(I,G) -> UnprotectedItemGroupRating(G)",
}
# converse of the aggregation rules: with squared hinges the pair pulls each
# latent to the mean of its group's ratings and each rating toward its latent
ITEM_RECALL = {
    "fair_item_protected_back": "{P}(U) & ProtectedItemRating(I) -> Rating(U,I)",
    "fair_item_unprotected_back": "!{P}(U) & UnprotectedItemRating(I) -> Rating(U,I)",
}
GROUP_RECALL = {
    "fair_group_protected_back": "{P}(U) & ProtectedItemGroupRating(G) & {G}(I,G) -> Rating(U,I)",
    "fair_group_unprotected_back": "!{P}(U) & UnprotectedItemGroupRating(G) & {G}(I,G) -> Rating(U,I)",
}
LATENT_PRIORS = {
    "item": {"fair_item_protected_prior": "!ProtectedItemRating(I)",
             "fair_item_unprotected_prior": "!UnprotectedItemRating(I)"},
    "group": {"fair_group_protected_prior": "!ProtectedItemGroupRating(G)",
              "fair_group_unprotected_prior": "!UnprotectedItemGroupRating(G)"},
}
AGGREGATIONS = ("one-sided", "two-sided", "latent-prior")
GROUP_COUPLING = {
    "fair_group_couple_pu": "ProtectedItemGroupRating(G) -> UnprotectedItemGroupRating(G)",
    "fair_group_couple_up": "UnprotectedItemGroupRating(G) -> ProtectedItemGroupRating(G)",
}


class AtomBatch(NamedTuple):
    predicate: str
    rows: pd.DataFrame
    values: np.ndarray | None  # None: target atoms


@dataclass
class FairnessSpec:
    protected_predicate: str = "IsFemale"
    group_predicate: str = "IsGenre"
    aggregation_weight: float = 1.0
    coupling_weight: float = 10.0
    apply_to_items: bool = True
    apply_to_groups: bool = True
    exponent: int = 2
    groups: tuple[str, ...] = GENRES
    aggregation: str = "two-sided"
    latent_prior_weight: float = 0.1

    def __post_init__(self):
        if self.aggregation_weight < 0 or self.coupling_weight < 0:
            raise ValueError("fairness weights must be nonnegative")
        if not (self.apply_to_items or self.apply_to_groups):
            raise ValueError("enable fairness for items, item groups, or both")
        if self.exponent not in (1, 2):
            raise ValueError("exponent must be 1 or 2")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")


def protected_atoms(users: pd.DataFrame) -> pd.DataFrame:
    """``IsFemale(u)``: 1 for gender F, 0 for M."""
    gender = users["gender"].astype(str)
    unknown = ~gender.isin(["F", "M"])
    if unknown.any():
        raise ValueError(f"unknown gender code {gender[unknown].iloc[0]!r} "
                         f"for user {users.loc[unknown, 'user'].iloc[0]}")
    return pd.DataFrame({"user": users["user"].to_numpy(),
                         "value": (gender == "F").to_numpy(dtype=np.float64)})


def group_atoms(movies: pd.DataFrame, groups=GENRES) -> pd.DataFrame:
    """``IsGenre(i, g)`` membership rows over the item groups (case-insensitive)."""
    wanted = {g.lower(): g for g in groups}
    rows = [(m, wanted[g.lower()]) for m, gs in zip(movies["movie"], movies["genres"])
            for g in gs if g.lower() in wanted]
    return pd.DataFrame(rows, columns=["movie", "group"])


def _rules(texts: dict, weight: float, exponent: int, spec: FairnessSpec) -> list[RuleTemplate]:
    preds = None  # predicate names are substituted; checked when grounding
    suffix = " ^2" if exponent == 2 else ""
    out = []
    for name, text in texts.items():
        body = text.format(P=spec.protected_predicate, G=spec.group_predicate)
        out.append(parse_rule(f"{float(weight)!r}: {body}{suffix}", preds, name=name))
    return out


def _extra_rules(spec: FairnessSpec, recall: dict, priors: dict) -> list[RuleTemplate]:
    if spec.aggregation == "two-sided":
        return _rules(recall, spec.aggregation_weight, spec.exponent, spec)
    if spec.aggregation == "latent-prior":
        return _rules(priors, spec.latent_prior_weight, 1, spec)
    return []


def fairness_predicates(spec: FairnessSpec) -> tuple[Predicate, ...]:
    preds = list(FAIR_PREDICATES)
    if spec.protected_predicate != "IsFemale":
        preds[0] = Predicate(spec.protected_predicate, 1, ("User",))
    if spec.group_predicate != "IsGenre":
        preds[1] = Predicate(spec.group_predicate, 2, ("Item", "Group"))
    return tuple(preds)


def build_fairness_rules(spec: FairnessSpec, users: pd.DataFrame, movies: pd.DataFrame):
    """Fairness templates plus the atoms they need.

    Returns ``(templates, batches)`` where ``batches`` is a list of
    :class:`AtomBatch`: observed protected-attribute and group-membership atoms,
    and one target latent atom per item (and per group) and side.
    """
    templates: list[RuleTemplate] = []
    batches: list[AtomBatch] = []
    prot = protected_atoms(users)
    batches.append(AtomBatch(spec.protected_predicate, prot[["user"]], prot["value"].to_numpy()))
    items = pd.DataFrame({"movie": np.sort(movies["movie"].to_numpy())})
    if spec.apply_to_items:
        templates += _rules(ITEM_AGGREGATION, spec.aggregation_weight, spec.exponent, spec)
        templates += _rules(ITEM_COUPLING, spec.coupling_weight, spec.exponent, spec)
        templates += _extra_rules(spec, ITEM_RECALL, LATENT_PRIORS["item"])
        batches.append(AtomBatch("ProtectedItemRating", items, None))
        batches.append(AtomBatch("UnprotectedItemRating", items, None))
    if spec.apply_to_groups:
        membership = group_atoms(movies, spec.groups)
        groups = pd.DataFrame({"group": sorted(membership["group"].unique())})
        templates += _rules(GROUP_AGGREGATION, spec.aggregation_weight, spec.exponent, spec)
        templates += _rules(GROUP_COUPLING, spec.coupling_weight, spec.exponent, spec)
        templates += _extra_rules(spec, GROUP_RECALL, LATENT_PRIORS["group"])
        batches.append(AtomBatch(spec.group_predicate, membership, np.ones(len(membership))))
        batches.append(AtomBatch("ProtectedItemGroupRating", groups, None))
        batches.append(AtomBatch("UnprotectedItemGroupRating", groups, None))
    return templates, batches


def add_batches(table, batches):
    for b in batches:
        if b.values is None:
            table.target(b.predicate, b.rows)
        else:
            table.observe(b.predicate, b.rows, b.values)


def latent_gaps(table, assignment) -> dict[str, float]:
    """Mean |protected - unprotected| latent value over items and over groups."""
    y = np.asarray(assignment)
    out = {}
    for key, (p, u) in {"item": ("ProtectedItemRating", "UnprotectedItemRating"),
                        "group": ("ProtectedItemGroupRating", "UnprotectedItemGroupRating")}.items():
        if p not in table.predicates:
            continue
        fp, fu = table.frame(p), table.frame(u)
        if len(fp) == 0:
            continue
        merged = fp.merge(fu, on="a0", suffixes=("_p", "_u"))
        out[key] = float(np.mean(np.abs(y[merged["var_p"].to_numpy()] - y[merged["var_u"].to_numpy()])))
    return out
