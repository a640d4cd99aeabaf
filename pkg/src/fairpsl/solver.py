"""MAP inference for hinge-loss MRFs by consensus ADMM.

Minimises ``sum_j w_j * max(0, c_j . y + b_j) ** p_j`` over ``y in [0, 1]^n``.
Each potential keeps a local copy of its variables; the local proximal steps
have closed forms for ``p in {1, 2}``, and the consensus step averages the
copies and projects onto the box.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .rulekit import PotentialSet

log = logging.getLogger(__name__)

COEF_FLOOR = 1e-12

__all__ = ["SolverConfig", "SolveReport", "map_inference", "objective", "dump_potentials"]


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 25_000
    primal_tolerance: float = 1e-5
    dual_tolerance: float = 1e-5
    rho: float = 1.0
    seed: int = 0  # initialisation is deterministic; kept for config round-trips
    check_every: int = 10
    record_history: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (self.primal_tolerance > 0 and self.dual_tolerance > 0):
            raise ValueError("tolerances must be positive")
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.check_every < 1:
            raise ValueError("check_every must be >= 1")


@dataclass
class SolveReport:
    objective: float
    iterations: int
    converged: bool
    primal_residual: float
    dual_residual: float
    n_variables: int = 0
    n_potentials: int = 0
    history: list[float] = field(default_factory=list)


def objective(potentials: PotentialSet, assignment) -> float:
    """Weighted sum of hinge potentials at ``assignment``."""
    y = np.asarray(assignment, dtype=np.float64)
    if len(potentials) and potentials.max_index() >= y.shape[0]:
        raise ValueError(f"assignment has {y.shape[0]} entries, potentials reference "
                         f"index {potentials.max_index()}")
    if not len(potentials):
        return 0.0
    return float(np.sum(potentials.values(y)))


def _validate(potentials: PotentialSet, n_targets: int):
    if not (np.isfinite(potentials.coef).all() and np.isfinite(potentials.constant).all()
            and np.isfinite(potentials.weight).all()):
        raise ValueError("non-finite coefficient, constant or weight")
    if (potentials.weight < 0).any():
        raise ValueError("negative potential weight")
    if len(potentials) and (potentials.max_index() >= n_targets or potentials.index.min() < -1):
        raise ValueError(f"coefficient index out of range for {n_targets} targets")


def map_inference(potentials: PotentialSet, n_targets: int,
                  config: SolverConfig | None = None) -> tuple[np.ndarray, SolveReport]:
    config = config or SolverConfig()
    _validate(potentials, n_targets)
    if n_targets == 0:
        return np.zeros(0), SolveReport(0.0, 0, True, 0.0, 0.0, 0, len(potentials))

    # flatten the local copies: one entry per (potential, variable) slot;
    # coefficients below the floor change l(y) by less than COEF_FLOOR on the box
    mask = (potentials.index >= 0) & (np.abs(potentials.coef) > COEF_FLOOR)
    rows, cols = np.nonzero(mask)
    var = potentials.index[rows, cols]
    c = potentials.coef[rows, cols]
    m = len(potentials)
    b = potentials.constant
    w = potentials.weight
    sq = potentials.exponent == 2
    rho = config.rho

    counts = np.bincount(var, minlength=n_targets).astype(np.float64)
    touched = counts > 0
    safe_counts = np.where(touched, counts, 1.0)
    cnorm2 = np.bincount(rows, weights=c * c, minlength=m)
    cnorm2 = np.where(cnorm2 > 0, cnorm2, 1.0)

    z = np.where(touched, 0.5, 0.0)
    x = z[var].copy()
    u = np.zeros_like(x)
    history: list[float] = []

    best_z, best_obj = z.copy(), np.inf
    converged = False
    r_norm = s_norm = np.inf
    it = 0
    sqrt_n = np.sqrt(len(var))
    for it in range(1, config.max_iterations + 1):
        v = z[var] - u
        lin = np.bincount(rows, weights=c * v, minlength=m) + b
        # p = 1: step w/rho along -c if that stays on the active side, else
        # project onto the hyperplane l = 0.
        step1 = w / rho
        after = lin - step1 * cnorm2
        t1 = np.where(after >= 0, step1, lin / cnorm2)
        # p = 2: rank-one quadratic update
        t2 = 2.0 * w * lin / (rho + 2.0 * w * cnorm2)
        t = np.where(lin > 0, np.where(sq, t2, t1), 0.0)
        x = v - t[rows] * c

        z_old = z
        z = np.bincount(var, weights=x + u, minlength=n_targets) / safe_counts
        np.clip(z, 0.0, 1.0, out=z)
        z[~touched] = 0.0
        zv = z[var]
        u += x - zv

        if config.record_history:
            history.append(float(np.sum(_values(c, rows, var, b, w, sq, z, m))))

        if it % config.check_every == 0 or it == config.max_iterations:
            r_norm = float(np.sqrt(np.sum((x - zv) ** 2)))
            s_norm = float(rho * np.sqrt(np.sum(counts * (z - z_old) ** 2)))
            eps_pri = sqrt_n * config.primal_tolerance + config.primal_tolerance * max(
                float(np.linalg.norm(x)), float(np.linalg.norm(zv)))
            eps_dual = sqrt_n * config.dual_tolerance + config.dual_tolerance * rho * float(np.linalg.norm(u))
            if r_norm <= eps_pri and s_norm <= eps_dual:
                converged = True
                break
            obj = float(np.sum(_values(c, rows, var, b, w, sq, z, m)))
            if obj < best_obj:
                best_obj, best_z = obj, z.copy()

    if converged:
        result = z
    else:
        final = float(np.sum(_values(c, rows, var, b, w, sq, z, m)))
        result = z if final <= best_obj else best_z
        log.warning("ADMM stopped after %d iterations without converging "
                    "(primal %.3g, dual %.3g)", it, r_norm, s_norm)
    obj = float(np.sum(_values(c, rows, var, b, w, sq, result, m)))
    report = SolveReport(obj, it, converged, r_norm, s_norm, n_targets, m, history)
    return result.copy(), report


def _values(c, rows, var, b, w, sq, z, m):
    lin = np.bincount(rows, weights=c * z[var], minlength=m) + b
    h = np.maximum(lin, 0.0)
    return w * np.where(sq, h * h, h)


def dump_potentials(path, potentials: PotentialSet, assignment=None):
    """Write one potential per line: ``weight exponent constant idx:coef ...``.

    When ``assignment`` is given, a trailing ``# solution`` block lists
    ``index value`` pairs.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for p in potentials:
            terms = " ".join(f"{i}:{c!r}" for i, c in p.coefficients)
            fh.write(f"{p.weight!r} {p.exponent} {p.constant!r} {terms}\n")
        if assignment is not None:
            fh.write("# solution\n")
            for i, v in enumerate(np.asarray(assignment)):
                fh.write(f"# {i} {float(v)!r}\n")


def load_potentials(path) -> PotentialSet:
    from .rulekit import GroundPotential
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            w, p, const, *terms = line.split()
            coefs = tuple((int(i), float(v)) for i, v in (t.split(":") for t in terms))
            out.append(GroundPotential(coefs, float(const), int(p), float(w)))
    return PotentialSet.from_potentials(out)
