"""User/item similarity measures and directed kNN graphs.

The scalar functions (``cosine``, ``adjusted_cosine``, ...) work on small
mappings; the ``*_matrix`` functions compute the same quantities for every pair
at once from the training ratings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd
import scipy.sparse as sp

MEASURES = ("user-cosine", "item-cosine", "item-adjusted-cosine", "user-demographic", "item-content")
USER_MEASURES = ("user-cosine", "user-demographic")
MIN_ADJUSTED_SUPPORT = 2


# --------------------------------------------------------------------------
# pairwise measures


def cosine(a: Mapping, b: Mapping, norm: str = "corated") -> float:
    """Cosine of two sparse rating vectors.

    With ``norm="corated"`` both norms run over the co-rated ids only.
    """
    common = sorted(set(a) & set(b))
    if not common:
        return 0.0
    dot = math.fsum(a[k] * b[k] for k in common)
    if norm == "corated":
        na = math.fsum(a[k] * a[k] for k in common)
        nb = math.fsum(b[k] * b[k] for k in common)
    elif norm == "full":
        na = math.fsum(v * v for v in a.values())
        nb = math.fsum(v * v for v in b.values())
    else:
        raise ValueError(f"unknown cosine norm {norm!r}")
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / math.sqrt(na * nb)


def adjusted_cosine(item_a: Mapping, item_b: Mapping, user_means: Mapping) -> float:
    """Cosine of user-mean-centred co-ratings of two items (users -> stars)."""
    common = sorted(set(item_a) & set(item_b))
    if len(common) < MIN_ADJUSTED_SUPPORT:
        return 0.0
    for u in common:
        if u not in user_means:
            raise KeyError(f"no mean rating for user {u!r}")
    da = [item_a[u] - user_means[u] for u in common]
    db = [item_b[u] - user_means[u] for u in common]
    na = math.fsum(x * x for x in da)
    nb = math.fsum(x * x for x in db)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return math.fsum(x * y for x, y in zip(da, db)) / math.sqrt(na * nb)


DEMOGRAPHIC_FIELDS = ("gender", "age", "occupation")


def demographic_similarity(a: Mapping, b: Mapping) -> float:
    """One-hot cosine over gender, age bracket and occupation: matches / 3."""
    for user in (a, b):
        for f in DEMOGRAPHIC_FIELDS:
            if user.get(f) is None:
                raise KeyError(f"missing demographic attribute {f!r}")
    return sum(a[f] == b[f] for f in DEMOGRAPHIC_FIELDS) / 3.0


def content_similarity(genres_a, genres_b) -> float:
    a, b = set(genres_a), set(genres_b)
    if not a or not b:
        return 0.0
    return len(a & b) / math.sqrt(len(a) * len(b))


# --------------------------------------------------------------------------
# all-pairs matrices


def _symmetric(s: np.ndarray) -> np.ndarray:
    s = 0.5 * (s + s.T)
    np.fill_diagonal(s, 0.0)
    return s


def _ratio(num, den):
    out = np.zeros_like(num)
    np.divide(num, np.sqrt(den), out=out, where=den > 0)
    return np.clip(out, -1.0, 1.0)


def cosine_matrix(R: sp.csr_matrix, norm: str = "corated") -> np.ndarray:
    """Row-by-row cosine of a sparse rating matrix (rows are entities)."""
    R = sp.csr_matrix(R, dtype=np.float64)
    num = (R @ R.T).toarray()
    if norm == "corated":
        B = R.copy()
        B.data = np.ones_like(B.data)
        R2 = R.multiply(R).tocsr()
        sq = (R2 @ B.T).toarray()  # sq[a, b] = sum over co-rated of R[a]^2
        den = sq * sq.T
    elif norm == "full":
        n = np.asarray(R.multiply(R).sum(axis=1)).ravel()
        den = np.outer(n, n)
    else:
        raise ValueError(f"unknown cosine norm {norm!r}")
    return _symmetric(_ratio(num, den))


def adjusted_cosine_matrix(R: sp.csr_matrix) -> np.ndarray:
    """Item-item adjusted cosine from a user x item matrix of stars."""
    R = sp.csr_matrix(R, dtype=np.float64)
    B = R.copy()
    B.data = np.ones_like(B.data)
    counts = np.asarray(B.sum(axis=1)).ravel()
    means = np.asarray(R.sum(axis=1)).ravel() / np.maximum(counts, 1)
    C = R.copy()
    C.data = C.data - np.repeat(means, np.diff(C.indptr))
    C.eliminate_zeros()  # centred zeros contribute nothing; support comes from B
    Ct = C.T.tocsr()
    Bt = B.T.tocsr()
    num = (Ct @ Ct.T).toarray()
    C2 = Ct.multiply(Ct).tocsr()
    sq = (C2 @ Bt.T).toarray()
    den = sq * sq.T
    sim = _ratio(num, den)
    support = (Bt @ Bt.T).toarray()
    sim[support < MIN_ADJUSTED_SUPPORT] = 0.0
    return _symmetric(sim)


def demographic_matrix(users: pd.DataFrame) -> np.ndarray:
    parts = []
    for f in DEMOGRAPHIC_FIELDS:
        codes = pd.factorize(users[f])[0]
        if (codes < 0).any():
            raise KeyError(f"missing demographic attribute {f!r}")
        onehot = np.zeros((len(users), codes.max() + 1))
        onehot[np.arange(len(users)), codes] = 1.0
        parts.append(onehot)
    D = np.hstack(parts)
    return _symmetric(D @ D.T / 3.0)


def content_matrix(genres: list) -> np.ndarray:
    vocab = sorted({g for gs in genres for g in gs})
    col = {g: k for k, g in enumerate(vocab)}
    G = np.zeros((len(genres), len(vocab)))
    for r, gs in enumerate(genres):
        for g in gs:
            G[r, col[g]] = 1.0
    n = G.sum(axis=1)
    return _symmetric(_ratio(G @ G.T, np.outer(n, n)))


# --------------------------------------------------------------------------
# kNN graphs


@dataclass
class SimilarityGraph:
    measure: str
    k: int
    edges: pd.DataFrame  # entity, neighbor, similarity

    def neighbors(self, entity) -> list:
        return self.edges.loc[self.edges["entity"] == entity, "neighbor"].tolist()

    def write(self, path):
        """Cache format: one ``entityId neighborId similarity`` line per edge."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for e, n, s in self.edges.itertuples(index=False):
                fh.write(f"{e} {n} {s!r}\n")

    @classmethod
    def read(cls, path, measure: str, k: int) -> "SimilarityGraph":
        edges = pd.read_csv(path, sep=" ", header=None, names=["entity", "neighbor", "similarity"])
        return cls(measure, k, edges)


def knn(similarities, k: int, ids=None, measure: str = "") -> SimilarityGraph:
    """Top-``k`` positive-similarity neighbours per entity; ties go to the lower id.

    ``similarities`` is either a square array aligned with ``ids`` or a mapping
    ``entity -> {neighbor: similarity}``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rows = []
    if isinstance(similarities, Mapping):
        for e in sorted(similarities):
            cands = [(n, s) for n, s in similarities[e].items() if n != e and s > 0]
            cands.sort(key=lambda t: (-t[1], t[0]))
            rows.extend((e, n, s) for n, s in cands[:k])
        return SimilarityGraph(measure, k, pd.DataFrame(rows, columns=["entity", "neighbor", "similarity"]))

    S = np.asarray(similarities, dtype=np.float64)
    ids = np.arange(S.shape[0]) if ids is None else np.asarray(ids)
    order_ids = np.argsort(ids, kind="stable")
    # work in id-sorted order so a stable sort on -similarity breaks ties by id
    S = S[np.ix_(order_ids, order_ids)]
    sorted_ids = ids[order_ids]
    ent, nb, sim = [], [], []
    for r in range(S.shape[0]):
        row = S[r].copy()
        row[r] = -np.inf
        pos = np.flatnonzero(row > 0)
        if pos.size == 0:
            continue
        if pos.size > k:
            top = pos[np.argsort(-row[pos], kind="stable")[:k]]
        else:
            top = pos[np.argsort(-row[pos], kind="stable")]
        ent.append(np.full(top.size, r))
        nb.append(top)
        sim.append(row[top])
    if not ent:
        return SimilarityGraph(measure, k, pd.DataFrame({"entity": [], "neighbor": [], "similarity": []}))
    ent, nb, sim = np.concatenate(ent), np.concatenate(nb), np.concatenate(sim)
    edges = pd.DataFrame({"entity": sorted_ids[ent], "neighbor": sorted_ids[nb], "similarity": sim})
    return SimilarityGraph(measure, k, edges)


def rating_matrix(ratings: pd.DataFrame, users, movies, value: str = "stars"):
    """Sparse user x movie matrix aligned with the given id arrays."""
    u_index = pd.Index(users)
    m_index = pd.Index(movies)
    r = u_index.get_indexer(ratings["user"])
    c = m_index.get_indexer(ratings["movie"])
    ok = (r >= 0) & (c >= 0)
    return sp.csr_matrix((ratings[value].to_numpy(dtype=np.float64)[ok], (r[ok], c[ok])),
                         shape=(len(u_index), len(m_index)))


def build_graph(measure: str, train: pd.DataFrame, users: pd.DataFrame, movies: pd.DataFrame,
                k: int = 20, cosine_norm: str = "corated") -> SimilarityGraph:
    """kNN graph for ``measure`` computed from the training ratings only.

    An edge ``(entity, neighbor)`` means ``neighbor`` is among the k nearest
    neighbours of ``entity``.
    """
    user_ids = np.sort(users["user"].to_numpy())
    movie_ids = np.sort(movies["movie"].to_numpy())
    if measure == "user-cosine":
        S = cosine_matrix(rating_matrix(train, user_ids, movie_ids), cosine_norm)
        ids = user_ids
    elif measure == "item-cosine":
        S = cosine_matrix(rating_matrix(train, user_ids, movie_ids).T.tocsr(), cosine_norm)
        ids = movie_ids
    elif measure == "item-adjusted-cosine":
        S = adjusted_cosine_matrix(rating_matrix(train, user_ids, movie_ids))
        ids = movie_ids
    elif measure == "user-demographic":
        S = demographic_matrix(users.set_index("user").loc[user_ids].reset_index())
        ids = user_ids
    elif measure == "item-content":
        genres = movies.set_index("movie").loc[movie_ids, "genres"].tolist()
        S = content_matrix(genres)
        ids = movie_ids
    else:
        raise ValueError(f"unknown similarity measure {measure!r}")
    return knn(S, k, ids, measure)
