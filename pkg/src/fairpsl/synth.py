"""Synthetic data in the MovieLens 1M ``.dat`` layout.

Ratings come from a low-rank model with user/item biases plus a gender x genre
effect, and observation is biased the same way, so the output shows the
population imbalance the fairness rules target.  Used for tests and smoke runs
when the real dataset is not at hand.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

ML_GENRES = ("Action", "Adventure", "Animation", "Children's", "Comedy", "Crime", "Documentary",
             "Drama", "Fantasy", "Film-Noir", "Horror", "Musical", "Mystery", "Romance", "Sci-Fi",
             "Thriller", "War", "Western")
AGE_CODES = (1, 18, 25, 35, 45, 50, 56)
# gender x genre preference shift (in stars) for female users; males get the negative
GENDER_TASTE = {"Romance": 0.35, "Musical": 0.3, "Action": -0.25, "Sci-Fi": -0.3, "Crime": -0.1}


def generate(n_users: int = 600, n_movies: int = 400, mean_ratings: float = 120.0,
             seed: int = 0, female_share: float = 0.28, rank: int = 4):
    """Return ``(users, movies, ratings)`` as lists of ``.dat`` field tuples."""
    rng = np.random.default_rng(seed)
    movies = []
    taste = np.zeros((n_movies,))
    popularity = rng.lognormal(0.0, 1.0, n_movies)
    for m in range(n_movies):
        k = int(rng.choice([1, 2, 3], p=[0.5, 0.35, 0.15]))
        gs = sorted(rng.choice(len(ML_GENRES), k, replace=False))
        names = [ML_GENRES[g] for g in gs]
        taste[m] = sum(GENDER_TASTE.get(g, 0.0) for g in names)
        year = 1930 + int(rng.integers(0, 71))
        movies.append((m + 1, f"Synthetic Movie {m + 1} ({year})", "|".join(names)))

    female = rng.random(n_users) < female_share
    users = []
    for u in range(n_users):
        users.append((u + 1, "F" if female[u] else "M", int(rng.choice(AGE_CODES)),
                      int(rng.integers(0, 21)), f"{int(rng.integers(10000, 99999))}"))

    U = rng.normal(0, 0.45, (n_users, rank))
    V = rng.normal(0, 0.45, (n_movies, rank))
    bu = rng.normal(0, 0.35, n_users)
    bi = rng.normal(0, 0.45, n_movies)
    sign = np.where(female, 1.0, -1.0)

    ratings = []
    counts = np.clip(rng.lognormal(np.log(mean_ratings), 0.6, n_users).astype(int), 20, n_movies)
    for u in range(n_users):
        # observation bias: users see more of what their group likes
        weight = popularity * np.exp(1.2 * sign[u] * taste)
        weight /= weight.sum()
        seen = rng.choice(n_movies, counts[u], replace=False, p=weight)
        score = 3.55 + bu[u] + bi[seen] + U[u] @ V[seen].T + sign[u] * taste[seen] \
            + rng.normal(0, 0.6, seen.size)
        stars = np.clip(np.rint(score), 1, 5).astype(int)
        ts = 956703932 + rng.integers(0, 90_000_000, seen.size)
        for m, s, t in zip(seen, stars, ts):
            ratings.append((u + 1, int(m) + 1, int(s), int(t)))
    return users, movies, ratings


def write_movielens(out_dir, **kwargs) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    users, movies, ratings = generate(**kwargs)
    with open(out / "users.dat", "w", encoding="latin-1") as fh:
        fh.writelines("::".join(map(str, r)) + "\n" for r in users)
    with open(out / "movies.dat", "w", encoding="latin-1") as fh:
        fh.writelines("::".join(map(str, r)) + "\n" for r in movies)
    with open(out / "ratings.dat", "w", encoding="latin-1") as fh:
        fh.writelines("::".join(map(str, r)) + "\n" for r in ratings)
    return out
