"""MovieLens 1M parsing, genre/activity filtering, normalisation and folds."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

log = logging.getLogger(__name__)

GENRES = ("action", "romance", "crime", "musical", "sci-fi")
MIN_USER_RATINGS = 50
SUBSAMPLE_MIN_USER_RATINGS = 10
N_FOLDS = 5
EXPECTED_COUNTS = {"ratings": 443_079, "movies": 1_305, "users": 2_965}

RATINGS_COLUMNS = ["user", "movie", "stars", "normalized", "timestamp"]
USERS_COLUMNS = ["user", "gender", "age", "occupation"]
MOVIES_COLUMNS = ["movie", "title", "genres"]


class DataError(Exception):
    """Missing or malformed input data."""


@dataclass
class RatingsDataset:
    users: pd.DataFrame  # user, gender, age, occupation
    movies: pd.DataFrame  # movie, title, genres (tuple of str)
    ratings: pd.DataFrame  # user, movie, stars, normalized, timestamp
    normalize: str = "minmax"

    def counts(self) -> dict[str, int]:
        return {"ratings": len(self.ratings), "movies": len(self.movies), "users": len(self.users)}

    def subset(self, rating_rows) -> "RatingsDataset":
        return RatingsDataset(self.users, self.movies,
                              self.ratings.iloc[rating_rows].reset_index(drop=True), self.normalize)


# --------------------------------------------------------------------------
# normalisation


def normalize_stars(stars, scheme: str = "minmax"):
    stars = np.asarray(stars, dtype=np.float64)
    if scheme == "minmax":
        return (stars - 1.0) / 4.0
    if scheme == "div5":
        return stars / 5.0
    raise ValueError(f"unknown normalisation {scheme!r}")


def denormalize(values, scheme: str = "minmax"):
    values = np.asarray(values, dtype=np.float64)
    if scheme == "minmax":
        return 4.0 * values + 1.0
    if scheme == "div5":
        return 5.0 * values
    raise ValueError(f"unknown normalisation {scheme!r}")


# --------------------------------------------------------------------------
# parsing


def _read_dat(path: Path, n_fields: int, strict: bool) -> list[list[str]]:
    if not path.exists():
        raise DataError(f"missing file: {path}")
    rows = []
    with open(path, encoding="latin-1") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split("::")
            if len(parts) != n_fields:
                msg = f"{path.name}:{lineno}: expected {n_fields} fields, got {len(parts)}"
                if strict:
                    raise DataError(msg)
                log.warning("skipping malformed line %s", msg)
                continue
            rows.append(parts)
    return rows


def _to_int(rows, cols, path, strict):
    good = []
    for k, r in enumerate(rows):
        try:
            good.append([int(r[c]) if c in cols else r[c] for c in range(len(r))])
        except ValueError:
            msg = f"{path}: non-integer field in record {k + 1}"
            if strict:
                raise DataError(msg) from None
            log.warning("skipping %s", msg)
    return good


def parse_movielens(data_dir, strict: bool = False, normalize: str = "minmax") -> RatingsDataset:
    """Read ``ratings.dat``, ``users.dat`` and ``movies.dat`` from ``data_dir``."""
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataError(f"data directory does not exist: {data_dir}")
    r = _to_int(_read_dat(data_dir / "ratings.dat", 4, strict), {0, 1, 2, 3}, "ratings.dat", strict)
    u = _to_int(_read_dat(data_dir / "users.dat", 5, strict), {0, 2, 3}, "users.dat", strict)
    m = _to_int(_read_dat(data_dir / "movies.dat", 3, strict), {0}, "movies.dat", strict)

    ratings = pd.DataFrame(r, columns=["user", "movie", "stars", "timestamp"])
    bad = ~ratings["stars"].between(1, 5)
    if bad.any():
        msg = f"ratings.dat: star value out of 1..5 in {int(bad.sum())} records"
        if strict:
            raise DataError(msg)
        log.warning("dropping %s", msg)
        ratings = ratings[~bad]
    users = pd.DataFrame([row[:4] for row in u], columns=USERS_COLUMNS)
    movies = pd.DataFrame({"movie": [row[0] for row in m], "title": [row[1] for row in m],
                           "genres": [tuple(g for g in row[2].split("|") if g) for row in m]})
    ratings = ratings[ratings["user"].isin(users["user"]) & ratings["movie"].isin(movies["movie"])]
    ratings = ratings.assign(normalized=normalize_stars(ratings["stars"], normalize))
    ratings = ratings[RATINGS_COLUMNS].reset_index(drop=True)
    return RatingsDataset(users.reset_index(drop=True), movies.reset_index(drop=True), ratings, normalize)


# --------------------------------------------------------------------------
# filtering


def has_target_genre(genres, targets=GENRES) -> bool:
    wanted = {g.lower() for g in targets}
    return any(g.lower() in wanted for g in genres)


def filter_dataset(raw: RatingsDataset, min_user_ratings: int = MIN_USER_RATINGS,
                   genres=GENRES) -> RatingsDataset:
    """Keep movies tagged with one of ``genres``, then users with more than
    ``min_user_ratings`` remaining ratings."""
    movies = raw.movies[raw.movies["genres"].map(lambda g: has_target_genre(g, genres))]
    ratings = raw.ratings[raw.ratings["movie"].isin(movies["movie"])]
    per_user = ratings.groupby("user").size()
    keep_users = per_user.index[per_user > min_user_ratings]
    ratings = ratings[ratings["user"].isin(keep_users)]
    users = raw.users[raw.users["user"].isin(keep_users)]
    movies = movies[movies["movie"].isin(ratings["movie"].unique())]
    out = RatingsDataset(users.reset_index(drop=True), movies.reset_index(drop=True),
                         ratings.reset_index(drop=True), raw.normalize)
    log.info("filtered dataset: %(ratings)d ratings, %(movies)d movies, %(users)d users", out.counts())
    return out


def subsample_users(raw: RatingsDataset, n_users: int, seed: int,
                    min_user_ratings: int = SUBSAMPLE_MIN_USER_RATINGS, genres=GENRES) -> RatingsDataset:
    """Seeded uniform choice of ``n_users`` users, then the genre filter and the
    scaled-down activity threshold."""
    ids = np.sort(raw.users["user"].to_numpy())
    keys = splitmix64(seed ^ 0x5EED, len(ids))
    chosen = ids[np.argsort(keys, kind="stable")[:n_users]]
    small = RatingsDataset(raw.users[raw.users["user"].isin(chosen)],
                           raw.movies, raw.ratings[raw.ratings["user"].isin(chosen)], raw.normalize)
    return filter_dataset(small, min_user_ratings, genres)


# --------------------------------------------------------------------------
# folds

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, n: int) -> np.ndarray:
    """First ``n`` outputs of the SplitMix64 generator seeded with ``seed``."""
    with np.errstate(over="ignore"):
        state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GAMMA * np.arange(1, n + 1, dtype=np.uint64)
        z = state
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


@dataclass
class FoldSplit:
    assignments: np.ndarray
    seed: int
    fold_count: int = N_FOLDS

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def sizes(self) -> list[int]:
        return np.bincount(self.assignments, minlength=self.fold_count).tolist()


def make_folds(n_ratings: int | RatingsDataset, seed: int, fold_count: int = N_FOLDS) -> FoldSplit:
    """Uniform random partition: rank ratings by SplitMix64 keys and deal the
    ranked list round-robin into ``fold_count`` folds."""
    if isinstance(n_ratings, RatingsDataset):
        n_ratings = len(n_ratings.ratings)
    order = np.argsort(splitmix64(seed, n_ratings), kind="stable")
    assignments = np.empty(n_ratings, dtype=np.int64)
    assignments[order] = np.arange(n_ratings) % fold_count
    return FoldSplit(assignments, seed, fold_count)


# --------------------------------------------------------------------------
# prepared-dataset directory


def write_prepared(out_dir, dataset: RatingsDataset, folds: FoldSplit):
    """Write ``ratings.tsv``, ``users.tsv``, ``movies.tsv`` and ``folds.tsv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset.ratings[RATINGS_COLUMNS].to_csv(out / "ratings.tsv", sep="\t", index=False)
    dataset.users[USERS_COLUMNS].to_csv(out / "users.tsv", sep="\t", index=False)
    movies = dataset.movies.assign(genres=dataset.movies["genres"].map("|".join))
    movies[MOVIES_COLUMNS].to_csv(out / "movies.tsv", sep="\t", index=False)
    pd.DataFrame({"rating": np.arange(len(folds.assignments)), "fold": folds.assignments}).to_csv(
        out / "folds.tsv", sep="\t", index=False)
    with open(out / "meta.tsv", "w", encoding="utf-8") as fh:
        fh.write(f"seed\t{folds.seed}\nfolds\t{folds.fold_count}\nnormalize\t{dataset.normalize}\n")


def read_prepared(prep_dir) -> tuple[RatingsDataset, FoldSplit]:
    prep = Path(prep_dir)
    for name in ("ratings.tsv", "users.tsv", "movies.tsv", "folds.tsv", "meta.tsv"):
        if not (prep / name).exists():
            raise DataError(f"prepared dataset is missing {prep / name}; run `prepare` first")
    meta = dict(line.rstrip("\n").split("\t") for line in open(prep / "meta.tsv", encoding="utf-8"))
    ratings = pd.read_csv(prep / "ratings.tsv", sep="\t")
    users = pd.read_csv(prep / "users.tsv", sep="\t", dtype={"gender": str})
    movies = pd.read_csv(prep / "movies.tsv", sep="\t", keep_default_na=False)
    movies["genres"] = movies["genres"].map(lambda s: tuple(g for g in s.split("|") if g))
    folds = pd.read_csv(prep / "folds.tsv", sep="\t")
    split = FoldSplit(folds["fold"].to_numpy(dtype=np.int64), int(meta["seed"]), int(meta["folds"]))
    return RatingsDataset(users, movies, ratings, meta.get("normalize", "minmax")), split
