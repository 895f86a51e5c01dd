"""Batch command line: select, diagnose, sweep, gram.

Options may come from a flat ``key = value`` config file (``--config``);
command-line flags override it. Exit codes: 0 success, 2 usage or config
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile

import numpy as np

from . import approx, evaluate, select
from .data import (
    ConditionalDistribution,
    DataError,
    Dataset,
    SelectionMask,
    checkerboard_centers,
    load_csv,
    make_gaussian_mixture,
)
from .kernel import KernelError, KernelSpec, SingularMatrixError, gram, spectral_model, write_gram_csv

log = logging.getLogger("infoselect")

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

STRATEGIES = (
    "random",
    "facility",
    "facility-weighted",
    "ted-greedy",
    "ted-sequential",
    "inverse-diagonal",
    "uncertainty",
)

# key -> (type, default)
OPTIONS = {
    "data": (str, None),
    "label_col": (str, None),
    "synthetic": (str, None),
    "n_per_class": (int, 100),
    "centers": (str, "0,0;2,0"),
    "sigma": (float, None),
    "grid_rows": (int, 6),
    "grid_cols": (int, 10),
    "kernel": (str, "rbf"),
    "gamma": (float, None),
    "degree": (int, 2),
    "coef0": (float, 1.0),
    "scale": (float, 1.0),
    "strategy": (str, "ted-greedy"),
    "strategies": (str, "random,facility,ted-greedy,inverse-diagonal"),
    "m": (int, None),
    "fraction": (float, None),
    "fractions": (str, None),
    "ridge": (float, 0.0),
    "ted_gamma": (float, 1.0),
    "max_iter": (int, 100),
    "tol": (float, 1e-6),
    "spectral_tol": (float, 0.0),
    "seed": (int, 0),
    "knn_k": (int, 5),
    "weights": (str, None),
    "selection": (str, None),
    "out": (str, "."),
}


class ConfigError(Exception):
    pass


def read_config(path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    if not os.path.isfile(path):
        raise ConfigError(f"missing config file: {path}")
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in OPTIONS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value
    return out


def resolve_options(args: argparse.Namespace) -> dict:
    raw = read_config(args.config) if args.config else {}
    for key in OPTIONS:
        v = getattr(args, key, None)
        if v is not None:
            raw[key] = v
    opts = {}
    for key, (typ, default) in OPTIONS.items():
        v = raw.get(key, default)
        if v is not None and not isinstance(v, typ):
            try:
                v = typ(v)
            except ValueError:
                raise ConfigError(f"invalid value for {key}: {v!r}") from None
        opts[key] = v
    return opts


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="infoselect", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("select", "diagnose", "sweep", "gram"):
        sp = sub.add_parser(name)
        sp.add_argument("--config")
        sp.add_argument("--data")
        sp.add_argument("--label-col", dest="label_col")
        sp.add_argument("--synthetic", choices=("mixture", "checkerboard"))
        sp.add_argument("--n-per-class", dest="n_per_class", type=int)
        sp.add_argument("--centers", help="'x1,y1;x2,y2;...'")
        sp.add_argument("--sigma", type=float)
        sp.add_argument("--grid-rows", dest="grid_rows", type=int)
        sp.add_argument("--grid-cols", dest="grid_cols", type=int)
        sp.add_argument("--kernel", choices=("linear", "rbf", "cosine", "poly", "polynomial"))
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--degree", type=int)
        sp.add_argument("--coef0", type=float)
        sp.add_argument("--scale", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--spectral-tol", dest="spectral_tol", type=float)
        if name == "select":
            sp.add_argument("--strategy", choices=STRATEGIES)
            sp.add_argument("--weights", help="file with one weight per line")
        if name in ("select", "sweep"):
            sp.add_argument("--ridge", type=float)
            sp.add_argument("--ted-gamma", dest="ted_gamma", type=float)
            sp.add_argument("--max-iter", dest="max_iter", type=int)
            sp.add_argument("--tol", type=float)
            sp.add_argument("--knn-k", dest="knn_k", type=int)
        if name == "select":
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--m", type=int)
            g.add_argument("--fraction", type=float)
        if name == "diagnose":
            sp.add_argument("--selection", help="selection.json or indices.txt")
        if name == "sweep":
            sp.add_argument("--strategies", help="comma separated; 'mixed:<ratio>' allowed")
            sp.add_argument("--fractions", help="comma separated fractions in (0, 1]")
    return p


def load_dataset(opts) -> tuple[Dataset, ConditionalDistribution | None]:
    if (opts["data"] is None) == (opts["synthetic"] is None):
        raise ConfigError("give exactly one dataset source: data or synthetic")
    if opts["data"] is not None:
        return load_csv(opts["data"], opts["label_col"]), None
    if opts["synthetic"] == "checkerboard":
        centers, owner = checkerboard_centers(opts["grid_rows"], opts["grid_cols"])
        sigma = 0.35 if opts["sigma"] is None else opts["sigma"]
        return make_gaussian_mixture(opts["seed"], opts["n_per_class"], centers, sigma, owner)
    if opts["synthetic"] == "mixture":
        try:
            centers = [[float(v) for v in c.split(",")] for c in opts["centers"].split(";")]
        except ValueError:
            raise ConfigError(f"cannot parse centers {opts['centers']!r}") from None
        sigma = 1.0 if opts["sigma"] is None else opts["sigma"]
        return make_gaussian_mixture(opts["seed"], opts["n_per_class"], centers, sigma)
    raise ConfigError(f"unknown synthetic generator {opts['synthetic']!r}")


def kernel_spec(opts, ds: Dataset) -> KernelSpec:
    spec = KernelSpec(
        family=opts["kernel"],
        gamma=opts["gamma"],
        degree=opts["degree"],
        coef0=opts["coef0"],
        scale=opts["scale"],
    )
    return spec.resolve(ds.features)


def _budget(opts, n: int) -> int:
    if opts["m"] is not None:
        m = opts["m"]
    elif opts["fraction"] is not None:
        if not 0 < opts["fraction"] <= 1:
            raise ConfigError("fraction must lie in (0, 1]")
        m = max(1, int(round(opts["fraction"] * n)))
    else:
        raise ConfigError("give m or fraction")
    if m > n:
        raise ConfigError("m exceeds dataset size")
    if m < 1:
        raise ConfigError("m must be positive")
    return m


def write_atomic(path, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_select(opts) -> None:
    ds, _ = load_dataset(opts)
    m = _budget(opts, ds.n)
    strategy = opts["strategy"]
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}")
    seed = opts["seed"]
    if strategy == "random":
        res = select.select_random(ds.n, m, seed)
    elif strategy == "facility":
        res = select.select_facility_location(ds.features, m)
    elif strategy == "facility-weighted":
        if not opts["weights"]:
            raise ConfigError("facility-weighted needs a weights file")
        if not os.path.isfile(opts["weights"]):
            raise ConfigError(f"missing weights file: {opts['weights']}")
        w = np.loadtxt(opts["weights"], ndmin=1)
        res = select.select_facility_location_weighted(ds.features, m, w)
    elif strategy == "uncertainty":
        if ds.labels is None:
            raise ConfigError("uncertainty sampling needs labels")
        order = evaluate._uncertainty_order(ds, m, seed, opts["knn_k"])
        res = select.SelectionResult(order, [0.0] * m, "uncertainty", seed)
    else:
        k = gram(kernel_spec(opts, ds), ds.features)
        if strategy == "ted-greedy":
            res = select.select_ted_greedy(k, m, opts["ridge"])
        elif strategy == "ted-sequential":
            res = select.select_ted_sequential(
                k, m, opts["ted_gamma"], opts["scale"], opts["max_iter"], opts["tol"]
            )
        else:
            res = select.select_inverse_diagonal(k, m)
    res.seed = seed
    res.info.pop("backend", None)
    write_atomic(os.path.join(opts["out"], "selection.json"), res.to_json() + "\n")
    write_atomic(os.path.join(opts["out"], "indices.txt"), res.indices_text())


def read_selection(path) -> list[int]:
    if not path:
        raise ConfigError("diagnose needs a selection file")
    if not os.path.isfile(path):
        raise ConfigError(f"missing selection file: {path}")
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return select.SelectionResult.from_dict(json.loads(text)).order
    try:
        return [int(t) for t in text.split()]
    except ValueError:
        raise ConfigError(f"cannot parse selection file {path}") from None


def cmd_diagnose(opts) -> None:
    ds, truth = load_dataset(opts)
    mask = SelectionMask(read_selection(opts["selection"]), ds.n)
    k = gram(kernel_spec(opts, ds), ds.features)
    prof = approx.power_profile(k, mask)
    if truth is not None:
        p, source = truth, "exact"
    elif ds.labels is not None:
        p, source = ConditionalDistribution.from_labels(ds.labels, ds.class_count), "labels"
    else:
        p, source = None, "none"
    if p is not None:
        report = approx.bound_report(k, mask, spectral_model(k, opts["spectral_tol"]), p).to_dict()
    else:
        th = float(np.sum(prof.values))
        trace = float(np.mean(np.diag(k.values)))
        first = th / (2.0 * ds.n) * np.sqrt(trace)
        report = approx.BoundReport(th, trace, (), first, first, None, prof.clamped_count, ds.n, mask.m).to_dict()
    report["p_source"] = source
    write_atomic(os.path.join(opts["out"], "bound_report.json"), _dump(report))
    path = os.path.join(opts["out"], "power_profile.csv")
    lines = ["index,value"] + [f"{i},{format(float(v), '.17g')}" for i, v in enumerate(prof.values)]
    write_atomic(path, "\n".join(lines) + "\n")


def cmd_sweep(opts) -> None:
    ds, truth = load_dataset(opts)
    if ds.labels is None:
        raise ConfigError("sweep requires labels")
    strategies = [s.strip() for s in opts["strategies"].split(",") if s.strip()]
    for s in strategies:
        base, _ = evaluate.parse_strategy(s)
        if base not in STRATEGIES + ("mixed", "inverse") or base == "facility-weighted":
            raise ConfigError(f"unknown sweep strategy {s!r}")
    if opts["fractions"]:
        try:
            fractions = [float(f) for f in opts["fractions"].split(",")]
        except ValueError:
            raise ConfigError("cannot parse fractions") from None
    else:
        fractions = list(evaluate.DEFAULT_FRACTIONS)
    params = {
        "ridge": opts["ridge"],
        "ted_gamma": opts["ted_gamma"],
        "c": opts["scale"],
        "max_iter": opts["max_iter"],
        "tol": opts["tol"],
    }
    records = evaluate.run_sweep(
        ds, kernel_spec(opts, ds), strategies, fractions, opts["seed"], truth, opts["knn_k"], params
    )
    write_atomic(os.path.join(opts["out"], "sweep.csv"), evaluate.records_to_csv(records))
    summary = {"strategies": {}, "n": ds.n, "seed": opts["seed"]}
    for s in strategies:
        rs = [r for r in records if r.strategy_id == s]
        summary["strategies"][s] = {"points": len(rs), "spearman": _safe_spearman(rs)}
    summary["pooled_spearman"] = _safe_spearman(records)
    write_atomic(os.path.join(opts["out"], "summary.json"), _dump(summary))


def _safe_spearman(records):
    try:
        return evaluate.spearman([r.ted_half_trace for r in records], [r.error_rate for r in records])
    except DataError:
        return None


def cmd_gram(opts) -> None:
    ds, _ = load_dataset(opts)
    k = gram(kernel_spec(opts, ds), ds.features)
    path = os.path.join(opts["out"], "gram.csv")
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    os.close(fd)
    write_gram_csv(k, tmp)
    os.replace(tmp, path)


COMMANDS = {"select": cmd_select, "diagnose": cmd_diagnose, "sweep": cmd_sweep, "gram": cmd_gram}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    cmd = args.command
    try:
        opts = resolve_options(args)
        COMMANDS[cmd](opts)
    except (ConfigError, DataError, KernelError) as exc:
        log.error("%s: %s", cmd, exc)
        return EXIT_CONFIG
    except (SingularMatrixError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.error("%s: numerical failure: %s", cmd, exc)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
