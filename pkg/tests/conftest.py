import numpy as np
import pandas as pd
import pytest

from fairpsl import dataio, synth


def make_dataset(ratings, genders, genres=None, normalize="minmax"):
    """Small in-memory dataset from ``(user, movie, stars)`` triples."""
    r = pd.DataFrame(ratings, columns=["user", "movie", "stars"])
    r["normalized"] = dataio.normalize_stars(r["stars"], normalize)
    r["timestamp"] = np.arange(len(r))
    users = pd.DataFrame({"user": sorted(genders), "gender": [genders[u] for u in sorted(genders)],
                          "age": 25, "occupation": 1})
    movie_ids = sorted(set(r["movie"]))
    genres = genres or {}
    movies = pd.DataFrame({"movie": movie_ids, "title": [f"m{m}" for m in movie_ids],
                           "genres": [tuple(genres.get(m, ("Action",))) for m in movie_ids]})
    return dataio.RatingsDataset(users, movies, r[dataio.RATINGS_COLUMNS], normalize)


@pytest.fixture(scope="session")
def synthetic_ml(tmp_path_factory):
    """A small MovieLens-format directory generated once per session."""
    out = tmp_path_factory.mktemp("ml")
    return synth.write_movielens(out, n_users=150, n_movies=120, mean_ratings=70, seed=11)


@pytest.fixture(scope="session")
def synthetic_dataset(synthetic_ml):
    return dataio.filter_dataset(dataio.parse_movielens(synthetic_ml), min_user_ratings=20)


ACCEPTANCE_RESULTS: list[tuple[str, str, str]] = []


@pytest.fixture
def record():
    """Record one acceptance verdict; the line is also printed at the end of the run."""
    def _record(number, verdict, detail):
        line = f"criterion {number}: {verdict} {detail}"
        print(line)
        ACCEPTANCE_RESULTS.append((str(number), verdict, detail))
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, verdict, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: (int(r[0].rstrip('abc')), r[0])):
        terminalreporter.write_line(f"criterion {number}: {verdict:<4} {detail}")
