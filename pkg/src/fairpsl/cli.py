"""Experiment driver: ``prepare``, ``similarity``, ``run``, ``evaluate``, ``cv``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver non-convergence
(``--strict`` only).  Settings come from defaults, then an INI config file
(``--config``), then command-line flags.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import itertools
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import pandas as pd

from . import dataio, metrics
from .dataio import DataError
from .fairness import AGGREGATIONS, FairnessSpec
from .model import RULES, VARIANTS, ModelSpec, required_measures
from .pipeline import predict
from .simgraph import SimilarityGraph, build_graph
from .solver import SolverConfig

log = logging.getLogger("fairpsl")

WORKDIR_ENV = "FAIRPSL_WORKDIR"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    data_dir: str = "ml-1m"
    work_dir: str = "work"
    variant: str = "MC_CF"
    fair: bool = False
    k: int = 20
    seed: int = 42
    folds: int = 5
    subsample: int | None = None
    normalize: str = "minmax"
    cosine_norm: str = "corated"
    body_ratings: str = "all"
    fairness_body: str = "targets"
    weights: dict[str, float] = field(default_factory=dict)
    exponents: dict[str, int] = field(default_factory=dict)
    fairness: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise UsageError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.k < 1:
            raise UsageError("k must be >= 1")
        if self.folds < 2:
            raise UsageError("folds must be >= 2")
        if self.fairness_body not in ("all", "targets", "observed"):
            raise UsageError("fairness_body must be all, targets or observed")
        if self.cosine_norm not in ("corated", "full"):
            raise UsageError("cosine_norm must be corated or full")

    @property
    def model_name(self) -> str:
        return ("Fair_" if self.fair else "") + self.variant

    def model_spec(self) -> ModelSpec:
        return ModelSpec(self.variant, dict(self.weights), dict(self.exponents), self.k, self.body_ratings)

    def fairness_spec(self) -> FairnessSpec | None:
        return FairnessSpec(**self.fairness) if self.fair else None

    def solver_config(self) -> SolverConfig:
        return SolverConfig(**self.solver)

    @property
    def prepared_dir(self) -> Path:
        return Path(self.work_dir) / "prepared"

    @property
    def similarity_dir(self) -> Path:
        return Path(self.work_dir) / "similarity"

    def run_dir(self, fold: int) -> Path:
        return Path(self.work_dir) / "runs" / self.model_name / f"fold{fold}"


# --------------------------------------------------------------------------
# configuration

_FAIRNESS_KEYS = {"aggregation_weight": float, "coupling_weight": float, "apply_to_items": "bool",
                  "apply_to_groups": "bool", "exponent": int, "aggregation": str,
                  "latent_prior_weight": float}
_SOLVER_KEYS = {"max_iterations": int, "primal_tolerance": float, "dual_tolerance": float,
                "rho": float, "check_every": int}


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def load_config_file(path) -> dict:
    """Read an INI file with sections ``experiment``, ``weights``, ``exponents``,
    ``fairness`` and ``solver``."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if not parser.read(path, encoding="utf-8"):
        raise UsageError(f"cannot read config file {path}")
    out: dict = {}
    if parser.has_section("experiment"):
        for key, value in parser.items("experiment"):
            out[key] = value
    for section, cast in (("weights", float), ("exponents", int)):
        if parser.has_section(section):
            out[section] = {k: cast(v) for k, v in parser.items(section)}
    for section, keys in (("fairness", _FAIRNESS_KEYS), ("solver", _SOLVER_KEYS)):
        if parser.has_section(section):
            vals = {}
            for k, v in parser.items(section):
                if k not in keys:
                    raise UsageError(f"unknown key {k!r} in [{section}]")
                vals[k] = _bool(v) if keys[k] == "bool" else keys[k](v)
            out[section] = vals
    return out


def _kv_pairs(items, cast):
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"expected NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = cast(v)
    return out


def resolve_config(args) -> ExperimentConfig:
    values: dict = {}
    env_work = os.environ.get(WORKDIR_ENV)
    if env_work:
        values["work_dir"] = env_work
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    scalar = {"data_dir": str, "work_dir": str, "variant": str, "k": int, "seed": int, "folds": int,
              "subsample": int, "normalize": str, "cosine_norm": str, "body_ratings": str,
              "fairness_body": str}
    for key, cast in scalar.items():
        if key in values and isinstance(values[key], str):
            values[key] = cast(values[key])
    if "fair" in values:
        values["fair"] = _bool(values["fair"])
    for key in scalar:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if getattr(args, "fair", None) is not None:
        values["fair"] = args.fair
    values.setdefault("weights", {}).update(_kv_pairs(getattr(args, "weight", None), float))
    values.setdefault("exponents", {}).update(_kv_pairs(getattr(args, "exponent", None), int))
    fair_cli = _kv_pairs(getattr(args, "fairness_opt", None), str)
    fair_vals = dict(values.get("fairness", {}))
    for k, v in fair_cli.items():
        if k not in _FAIRNESS_KEYS:
            raise UsageError(f"unknown fairness option {k!r}")
        fair_vals[k] = _bool(v) if _FAIRNESS_KEYS[k] == "bool" else _FAIRNESS_KEYS[k](v)
    values["fairness"] = fair_vals
    solver_vals = dict(values.get("solver", {}))
    if getattr(args, "max_iterations", None) is not None:
        solver_vals["max_iterations"] = args.max_iterations
    if getattr(args, "tolerance", None) is not None:
        solver_vals["primal_tolerance"] = solver_vals["dual_tolerance"] = args.tolerance
    if getattr(args, "rho", None) is not None:
        solver_vals["rho"] = args.rho
    values["solver"] = solver_vals
    unknown = set(values) - {f for f in ExperimentConfig.__dataclass_fields__}
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig(**values)
    for name in list(cfg.weights) + list(cfg.exponents):
        if name not in RULES:
            raise UsageError(f"unknown rule name {name!r}; known: {sorted(RULES)}")
    try:
        cfg.model_spec()
        cfg.fairness_spec()
        cfg.solver_config()
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    return cfg


# --------------------------------------------------------------------------
# commands


def cmd_prepare(cfg: ExperimentConfig, strict_counts: bool = False, strict_parse: bool = False) -> dict:
    t0 = time.perf_counter()
    raw = dataio.parse_movielens(cfg.data_dir, strict=strict_parse, normalize=cfg.normalize)
    if cfg.subsample:
        ds = dataio.subsample_users(raw, cfg.subsample, cfg.seed)
    else:
        ds = dataio.filter_dataset(raw)
    folds = dataio.make_folds(ds, cfg.seed, cfg.folds)
    dataio.write_prepared(cfg.prepared_dir, ds, folds)
    counts = ds.counts()
    print(f"ratings\t{counts['ratings']}\nmovies\t{counts['movies']}\nusers\t{counts['users']}")
    log.info("prepared %s in %.1fs", cfg.prepared_dir, time.perf_counter() - t0)
    if strict_counts and counts != dataio.EXPECTED_COUNTS:
        raise DataError(f"counts {counts} differ from expected {dataio.EXPECTED_COUNTS}")
    return counts


def _similarity_fingerprint(cfg: ExperimentConfig) -> str:
    h = hashlib.sha256()
    for name in ("ratings.tsv", "users.tsv", "movies.tsv", "folds.tsv"):
        h.update((cfg.prepared_dir / name).read_bytes())
    h.update(f"{cfg.k}|{cfg.cosine_norm}".encode())
    return h.hexdigest()


def cache_path(cfg: ExperimentConfig, measure: str, fold: int) -> Path:
    return cfg.similarity_dir / f"{measure}.fold{fold}.k{cfg.k}.txt"


def cmd_similarity(cfg: ExperimentConfig, dataset=None, split=None) -> list[Path]:
    """Write every kNN cache the variant needs; returns the files written."""
    measures = required_measures(cfg.variant)
    if not measures:
        return []
    if dataset is None:
        dataset, split = dataio.read_prepared(cfg.prepared_dir)
    fingerprint = _similarity_fingerprint(cfg)
    manifest_path = cfg.similarity_dir / "manifest.json"
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}
    written = []
    for fold in range(split.fold_count):
        train = dataset.ratings.iloc[split.train_rows(fold)]
        for measure in measures:
            path = cache_path(cfg, measure, fold)
            if path.exists() and manifest.get(path.name) == fingerprint:
                continue
            graph = build_graph(measure, train, dataset.users, dataset.movies, cfg.k, cfg.cosine_norm)
            graph.write(path)
            manifest[path.name] = fingerprint
            written.append(path)
            log.info("wrote %s (%d edges)", path, len(graph.edges))
    cfg.similarity_dir.mkdir(parents=True, exist_ok=True)
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return written


def _load_graphs(cfg, dataset, train, fold):
    graphs = {}
    measures = required_measures(cfg.variant)
    if not measures:
        return graphs
    manifest_path = cfg.similarity_dir / "manifest.json"
    manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {}
    fingerprint = _similarity_fingerprint(cfg) if manifest else None
    for measure in measures:
        path = cache_path(cfg, measure, fold)
        if path.exists() and manifest.get(path.name) == fingerprint:
            graphs[measure] = SimilarityGraph.read(path, measure, cfg.k)
        else:
            graphs[measure] = build_graph(measure, train, dataset.users, dataset.movies, cfg.k,
                                          cfg.cosine_norm)
    return graphs


def cmd_run(cfg: ExperimentConfig, fold: int, dataset=None, split=None) -> dict:
    if dataset is None:
        dataset, split = dataio.read_prepared(cfg.prepared_dir)
    if not 0 <= fold < split.fold_count:
        raise UsageError(f"fold must be in 0..{split.fold_count - 1}, got {fold}")
    train = dataset.ratings.iloc[split.train_rows(fold)]
    test = dataset.ratings.iloc[split.test_rows(fold)]
    t0 = time.perf_counter()
    graphs = _load_graphs(cfg, dataset, train, fold)
    t_sim = time.perf_counter() - t0
    result = predict(dataset, train, test, cfg.model_spec(), cfg.fairness_spec(), cfg.solver_config(),
                     graphs, cfg.fairness_body)
    out = cfg.run_dir(fold)
    out.mkdir(parents=True, exist_ok=True)
    preds = result.predictions
    with open(out / "predictions.tsv", "w", encoding="utf-8") as fh:
        fh.write("user\tmovie\tpredicted\n")
        for u, m, p in zip(preds["user"], preds["movie"], preds["predicted"]):
            fh.write(f"{u}\t{m}\t{float(p)!r}\n")
    rep = result.report
    report = {
        "model": cfg.model_name, "fold": fold, "objective": rep.objective, "iterations": rep.iterations,
        "converged": rep.converged, "primal_residual": rep.primal_residual,
        "dual_residual": rep.dual_residual, "variables": rep.n_variables, "potentials": rep.n_potentials,
        "templates": result.n_templates, "latent_gap": result.latent_gap,
    }
    (out / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True))
    log.info("fold %d: %d predictions, converged=%s (similarity %.1fs, grounding %.1fs, inference %.1fs)",
             fold, len(preds), rep.converged, t_sim, result.timings["grounding"], result.timings["inference"])
    return report


def fold_predictions(cfg: ExperimentConfig, dataset, split, fold: int) -> pd.DataFrame:
    path = cfg.run_dir(fold) / "predictions.tsv"
    if not path.exists():
        raise DataError(f"missing predictions for fold {fold}: {path}")
    pred = pd.read_csv(path, sep="\t")
    test = dataset.ratings.iloc[split.test_rows(fold)][["user", "movie", "stars"]]
    merged = pred.merge(test, on=["user", "movie"], how="inner")
    if len(merged) != len(test):
        raise DataError(f"fold {fold}: {len(test) - len(merged)} test ratings have no prediction")
    gender = dataset.users.set_index("user")["gender"]
    return metrics.prediction_set(merged["user"], merged["movie"], merged["predicted"], merged["stars"],
                                  merged["user"].map(gender) == "F")


def cmd_evaluate(cfg: ExperimentConfig, dataset=None, split=None) -> metrics.MetricsReport:
    if dataset is None:
        dataset, split = dataio.read_prepared(cfg.prepared_dir)
    reports = [metrics.evaluate(fold_predictions(cfg, dataset, split, f)) for f in range(split.fold_count)]
    summary = metrics.aggregate(reports)
    out = Path(cfg.work_dir) / "reports"
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"{cfg.model_name}.metrics.tsv", "w", encoding="utf-8") as fh:
        fh.write("model\tmetric\tfold\tvalue\n")
        for row in metrics.metric_rows(cfg.model_name, summary):
            fh.write("\t".join(map(str, row[:3])) + f"\t{row[3]!r}\n")
    table = metrics.render_table({cfg.model_name: summary})
    (out / f"{cfg.model_name}.table.txt").write_text(table)
    print(table, end="")
    return summary


def cmd_cv(cfg: ExperimentConfig) -> tuple[metrics.MetricsReport, list[dict]]:
    dataset, split = dataio.read_prepared(cfg.prepared_dir)
    cmd_similarity(cfg, dataset, split)
    reports = [cmd_run(cfg, f, dataset, split) for f in range(split.fold_count)]
    return cmd_evaluate(cfg, dataset, split), reports


def cmd_weight_grid(cfg: ExperimentConfig, grid: dict[str, list[float]]) -> list[tuple[dict, float]]:
    """Cross-validated RMSE for every combination of the given rule weights."""
    names = sorted(grid)
    results = []
    for combo in itertools.product(*(grid[n] for n in names)):
        weights = {**cfg.weights, **dict(zip(names, combo))}
        sub = replace(cfg, weights=weights, work_dir=str(Path(cfg.work_dir)))
        summary, _ = cmd_cv(sub)
        results.append((dict(zip(names, combo)), summary.rmse))
        print("\t".join(f"{n}={v}" for n, v in zip(names, combo)) + f"\trmse={summary.rmse:.4f}")
    return results


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--data-dir", dest="data_dir")
    common.add_argument("--work-dir", dest="work_dir", help=f"work directory (env {WORKDIR_ENV})")
    common.add_argument("--variant", choices=VARIANTS)
    fair = common.add_mutually_exclusive_group()
    fair.add_argument("--fair", dest="fair", action="store_true", default=None)
    fair.add_argument("--no-fair", dest="fair", action="store_false")
    common.add_argument("--k", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--folds", type=int)
    common.add_argument("--subsample", type=int, help="number of users for a desk-scale run")
    common.add_argument("--normalize", choices=("minmax", "div5"))
    common.add_argument("--cosine-norm", dest="cosine_norm", choices=("corated", "full"))
    common.add_argument("--body-ratings", dest="body_ratings", choices=("all", "observed"))
    common.add_argument("--fairness-body", dest="fairness_body", choices=("all", "targets", "observed"))
    common.add_argument("--weight", action="append", metavar="RULE=W")
    common.add_argument("--exponent", action="append", metavar="RULE=P")
    common.add_argument("--fairness-opt", dest="fairness_opt", action="append", metavar="KEY=VALUE",
                        help=f"fairness option, e.g. coupling_weight=10 or aggregation={AGGREGATIONS[0]}")
    common.add_argument("--max-iterations", dest="max_iterations", type=int)
    common.add_argument("--tolerance", type=float)
    common.add_argument("--rho", type=float)
    common.add_argument("--strict", action="store_true", help="exit 3 when ADMM does not converge")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="fairpsl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("prepare", parents=[common], help="parse, filter and split MovieLens")
    p.add_argument("--strict-counts", action="store_true")
    p.add_argument("--strict-parse", action="store_true", help="fail on malformed lines")
    sub.add_parser("similarity", parents=[common], help="write kNN similarity caches")
    p = sub.add_parser("run", parents=[common], help="ground, solve and predict one fold")
    p.add_argument("--fold", type=int, required=True)
    sub.add_parser("evaluate", parents=[common], help="aggregate metrics over folds")
    sub.add_parser("cv", parents=[common], help="similarity, all folds, evaluate")
    p = sub.add_parser("weight-grid", parents=[common], help="cross-validated RMSE over a weight grid")
    p.add_argument("--grid", action="append", required=True, metavar="RULE=W1,W2,...")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "prepare":
            cmd_prepare(cfg, args.strict_counts, args.strict_parse)
        elif args.command == "similarity":
            cmd_similarity(cfg)
        elif args.command == "run":
            report = cmd_run(cfg, args.fold)
            if args.strict and not report["converged"]:
                print(f"fold {args.fold}: solver did not converge", file=sys.stderr)
                return EXIT_SOLVER
        elif args.command == "evaluate":
            cmd_evaluate(cfg)
        elif args.command == "cv":
            _, reports = cmd_cv(cfg)
            if args.strict and not all(r["converged"] for r in reports):
                print("solver did not converge on every fold", file=sys.stderr)
                return EXIT_SOLVER
        elif args.command == "weight-grid":
            grid = {k: [float(x) for x in v.split(",")] for k, v in _kv_pairs(args.grid, str).items()}
            cmd_weight_grid(cfg, grid)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
