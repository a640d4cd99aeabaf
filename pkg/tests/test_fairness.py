import numpy as np
import pandas as pd
import pytest

from fairpsl.dataio import GENRES
from fairpsl.fairness import (FairnessSpec, add_batches, build_fairness_rules, fairness_predicates, group_atoms,
                              protected_atoms)
from fairpsl.model import PREDICATES, ModelSpec, build_model, templates_for
from fairpsl.pipeline import fold_graphs, predict
from fairpsl.rulekit import AtomTable, ground, render_rules

from conftest import make_dataset


def users_frame(genders):
    return pd.DataFrame({"user": range(1, len(genders) + 1), "gender": list(genders), "age": 1, "occupation": 1})


def movies_frame(n, genres=("Action",)):
    return pd.DataFrame({"movie": range(1, n + 1), "title": "t", "genres": [tuple(genres)] * n})


def latent_count(batches):
    return sum(len(b.rows) for b in batches if b.values is None)


class TestStructure:
    @pytest.mark.parametrize("items, groups, n_templates, n_latents", [
        (True, False, 4, 20), (False, True, 4, 10), (True, True, 8, 30)])
    def test_one_sided_counts(self, items, groups, n_templates, n_latents):
        movies = pd.DataFrame({"movie": range(10), "title": "t",
                               "genres": [(g,) for g in ("Action", "Romance", "Crime", "Musical", "Sci-Fi")] * 2})
        spec = FairnessSpec(apply_to_items=items, apply_to_groups=groups, aggregation="one-sided")
        templates, batches = build_fairness_rules(spec, users_frame("FM"), movies)
        assert len(templates) == n_templates
        assert latent_count(batches) == n_latents

    @pytest.mark.parametrize("items, groups, n_templates", [(True, False, 6), (False, True, 6), (True, True, 12)])
    def test_two_sided_adds_converse_rules(self, items, groups, n_templates):
        spec = FairnessSpec(apply_to_items=items, apply_to_groups=groups)
        templates, _ = build_fairness_rules(spec, users_frame("FM"), movies_frame(3))
        assert len(templates) == n_templates
        assert sum(t.name.endswith("_back") for t in templates) == 2 * (items + groups)

    def test_latent_prior_mode(self):
        spec = FairnessSpec(aggregation="latent-prior", apply_to_groups=False)
        templates, _ = build_fairness_rules(spec, users_frame("FM"), movies_frame(3))
        priors = [t for t in templates if t.is_prior]
        assert len(priors) == 2 and all(t.weight == spec.latent_prior_weight for t in priors)

    def test_rules_serialize(self):
        templates, _ = build_fairness_rules(FairnessSpec(aggregation="one-sided"), users_frame("FM"), movies_frame(2))
        text = render_rules(templates)
        assert "1.0: IsFemale(U) & Rating(U,I) -> ProtectedItemRating(I) ^2" in text
        assert "10.0: ProtectedItemGroupRating(G) -> UnprotectedItemGroupRating(G) ^2" in text

    @pytest.mark.parametrize("kwargs", [{"aggregation_weight": -1}, {"coupling_weight": -0.5},
                                        {"apply_to_items": False, "apply_to_groups": False},
                                        {"exponent": 3}, {"aggregation": "max"}])
    def test_spec_validation(self, kwargs):
        with pytest.raises(ValueError):
            FairnessSpec(**kwargs)


class TestAtoms:
    def test_protected(self):
        atoms = protected_atoms(users_frame("FM"))
        assert atoms["value"].tolist() == [1.0, 0.0]

    def test_unknown_gender(self):
        with pytest.raises(ValueError, match="unknown gender"):
            protected_atoms(users_frame("FX"))

    def test_groups_case_insensitive(self):
        movies = pd.DataFrame({"movie": [1, 2, 3], "title": "t",
                               "genres": [("Sci-Fi", "Drama"), ("Documentary",), ("ROMANCE", "Action")]})
        rows = group_atoms(movies).values.tolist()
        assert rows == [[1, "sci-fi"], [3, "romance"], [3, "action"]]
        assert set(GENRES) == {"action", "romance", "crime", "musical", "sci-fi"}


def fair_table(protected_value):
    spec = FairnessSpec(aggregation="one-sided", apply_to_groups=False)
    table = AtomTable(list(PREDICATES) + list(fairness_predicates(spec)))
    table.observe("IsFemale", [(1,)], protected_value)
    table.target("Rating", [(1, 7)])
    table.target("ProtectedItemRating", [(7,)])
    table.target("UnprotectedItemRating", [(7,)])
    templates, _ = build_fairness_rules(spec, users_frame("F"), movies_frame(1))
    return {t.name: t for t in templates}, table.freeze()


class TestLukasiewiczForm:
    def test_protected_aggregation(self):
        templates, table = fair_table(1.0)
        pots = ground(templates["fair_item_protected"], table)
        assert len(pots) == 1
        p = pots[0]
        # max(r - P, 0)^2 with r = var 0 and P = var 1
        assert sorted(p.coefficients) == [(0, 1.0), (1, -1.0)]
        assert p.constant == 0.0 and p.exponent == 2

    def test_unprotected_user_skipped(self):
        templates, table = fair_table(0.0)
        assert len(ground(templates["fair_item_protected"], table)) == 0
        # the negated body literal is satisfied instead
        assert len(ground(templates["fair_item_unprotected"], table)) == 1

    def test_coupling_pair(self):
        templates, table = fair_table(1.0)
        pu = ground(templates["fair_item_couple_pu"], table)[0]
        up = ground(templates["fair_item_couple_up"], table)[0]
        assert sorted(pu.coefficients) == [(1, 1.0), (2, -1.0)] and pu.constant == 0.0
        assert sorted(up.coefficients) == [(1, -1.0), (2, 1.0)] and up.constant == 0.0
        assert pu.weight == up.weight == 10.0


class TestWithModel:
    def test_base_templates_untouched(self, synthetic_dataset):
        ds = synthetic_dataset
        spec = ModelSpec("MC")
        base = templates_for(spec)
        fair, batches = build_fairness_rules(FairnessSpec(), ds.users, ds.movies)
        combined = base + fair
        assert combined[:len(base)] == base
        assert not {t.name for t in base} & {t.name for t in fair}

    def test_base_potentials_are_a_subset(self, synthetic_dataset):
        ds = synthetic_dataset
        train, test = ds.ratings.iloc[200:], ds.ratings.iloc[:200]
        spec = ModelSpec("MC")
        templates, table = build_model(spec, train, test, ds.users["user"], ds.movies["movie"])
        base = [p for k, t in enumerate(templates) for p in ground(t, table, k)]
        fspec = FairnessSpec()
        templates2, table2 = build_model(spec, train, test, ds.users["user"], ds.movies["movie"],
                                         extra_predicates=fairness_predicates(fspec), freeze=False)
        _, batches = build_fairness_rules(fspec, ds.users, ds.movies)
        add_batches(table2, batches)
        table2.freeze()
        with_fair = [p for k, t in enumerate(templates2) for p in ground(t, table2, k)]
        assert base == with_fair
        assert table2.n_targets == table.n_targets + latent_count(batches)

    def test_coupling_shrinks_latent_gap(self, synthetic_dataset):
        ds = synthetic_dataset
        train, test = ds.ratings.iloc[400:], ds.ratings.iloc[:400]
        gaps = []
        for cw in (1.0, 100.0):
            res = predict(ds, train, test, ModelSpec("MC"), FairnessSpec(coupling_weight=cw))
            gaps.append(res.latent_gap["item"])
        assert gaps[1] < gaps[0]

    def test_fair_run_reports_latent_variables(self, synthetic_dataset):
        ds = synthetic_dataset
        train, test = ds.ratings.iloc[400:], ds.ratings.iloc[:400]
        graphs = fold_graphs(ds, train, "MC_CF", 5)
        base = predict(ds, train, test, ModelSpec("MC_CF", k=5), None, graphs=graphs)
        fair = predict(ds, train, test, ModelSpec("MC_CF", k=5), FairnessSpec(), graphs=graphs)
        n_groups = len(group_atoms(ds.movies)["group"].unique())
        assert fair.report.n_variables == base.report.n_variables + 2 * len(ds.movies) + 2 * n_groups
        assert fair.predictions[["user", "movie"]].equals(base.predictions[["user", "movie"]])

    def test_one_sided_latents_saturate(self):
        # with the displayed one-sided rules nothing pulls the latents down, and
        # the pooled latent sits at (or near) the largest rating in its pool
        ds = make_dataset([(1, 1, 5), (2, 1, 2), (3, 1, 1), (1, 2, 3), (2, 2, 3), (3, 2, 3)],
                          {1: "F", 2: "F", 3: "M"})
        res = predict(ds, ds.ratings.iloc[:0], ds.ratings, ModelSpec("MC"),
                      FairnessSpec(aggregation="one-sided", apply_to_groups=False, coupling_weight=0.0))
        assert np.isfinite(res.latent_gap["item"])
