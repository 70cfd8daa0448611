"""Batch front end: experiment specs in, JSON reports and plot-ready CSV out.

A specification is a JSON object ``{kind, seed, params, ...}`` validated
against the shipped schema before dispatch.  Every run writes
``<stem>.report.json``; kinds carrying series data (flow, counterexample
sweeps) also write ``<stem>.csv``.  Exit codes encode verdicts so suites can
be scripted: 0 for holds / product / converged outcomes, 2 for violated /
not-product outcomes, 1 for any error.

All randomness flows from the single spec seed; reports are byte-identical
across re-runs apart from the wall-clock field.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import platform
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__, blconst, convex, flow, gaussmc, gcicheck
from .errors import GciLabError, InvalidInput, NoSeries
from .symmat import SymMatrix

__all__ = ["main", "run_experiment", "emit_plot_data", "load_schema"]

_KINDS = (
    "center",
    "measure",
    "verify-gci",
    "equality",
    "translate-independent",
    "bl-constant",
    "flow",
    "counterexample",
)

_DEFAULT_BUDGET = 100_000
_DEFAULT_METHOD = "monte_carlo"

_EXIT_OK = 0
_EXIT_ERROR = 1
_EXIT_NEGATIVE = 2


def load_schema(name: str) -> dict:
    text = (
        importlib.resources.files("gcilab")
        .joinpath("schemas", f"{name}.schema.json")
        .read_text(encoding="utf-8")
    )
    return json.loads(text)


def _validate(instance: dict, schema_name: str) -> None:
    schema = load_schema(schema_name)
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(instance), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors[:8]:
            path = "/".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"  at {path}: {e.message}")
        raise InvalidInput(f"{schema_name} schema violation:\n" + "\n".join(lines))


def _matrix(obj) -> SymMatrix:
    return SymMatrix(np.asarray(obj, dtype=np.float64))


def _spec_for(sigma, dim: int) -> gaussmc.GaussianSpec:
    if sigma is None:
        return gaussmc.GaussianSpec.standard(dim)
    m = _matrix(sigma)
    return gaussmc.GaussianSpec(m, m.n)


def _band_from_params(params: dict, datum: blconst.BLDatum) -> blconst.ConstraintBand:
    if "band_g" in params:
        g = [_matrix(m) for m in params["band_g"]]
    else:
        g = [SymMatrix.identity(b.shape[0]) for b in datum.maps]
    if "band_h" in params:
        h = [None if m is None else _matrix(m) for m in params["band_h"]]
    else:
        h = [None] * len(g)
    return blconst.ConstraintBand(g, h)


def _run_center(spec: dict):
    p = spec["params"]
    k = convex.set_from_json(p["set"])
    gspec = _spec_for(p.get("sigma"), k.dim)
    res = gcicheck.center_set(
        k,
        gspec,
        spec.get("budget", _DEFAULT_BUDGET),
        spec["seed"],
        tol=spec.get("tol", 1e-6),
        method=spec.get("method", _DEFAULT_METHOD),
        max_iter=p.get("max_iter", 200),
    )
    results = {
        "b0": res.b0.tolist(),
        "iterations": res.iterations,
        "converged": res.converged,
        "warning": res.warning,
    }
    code = _EXIT_OK if res.converged else _EXIT_NEGATIVE
    return results, None, code


def _run_measure(spec: dict):
    p = spec["params"]
    k = convex.set_from_json(p["set"])
    gspec = _spec_for(p.get("sigma"), k.dim)
    est = gaussmc.measure(
        k,
        gspec,
        spec.get("budget", _DEFAULT_BUDGET),
        spec["seed"],
        method=spec.get("method", _DEFAULT_METHOD),
    )
    return {"measure": est.to_json()}, None, _EXIT_OK


def _run_verify(spec: dict):
    p = spec["params"]
    sets = [convex.set_from_json(s) for s in p["sets"]]
    n = sets[0].dim
    sigma0 = _matrix(p["sigma0"]) if "sigma0" in p else SymMatrix.identity(n)
    if "sigmas" in p:
        sigmas = [_matrix(s) for s in p["sigmas"]]
    else:
        sigmas = [SymMatrix.identity(n) for _ in sets]
    rep = gcicheck.verify_gci(
        sets,
        sigma0,
        sigmas,
        spec.get("budget", _DEFAULT_BUDGET),
        spec["seed"],
        method=spec.get("method", _DEFAULT_METHOD),
    )
    code = _EXIT_NEGATIVE if rep.verdict == "violated" else _EXIT_OK
    return rep.to_json(), None, code


def _run_equality(spec: dict):
    p = spec["params"]
    k1 = convex.set_from_json(p["set1"])
    k2 = convex.set_from_json(p["set2"])
    res = gcicheck.detect_equality_structure(
        k1,
        k2,
        spec.get("budget", _DEFAULT_BUDGET),
        spec["seed"],
        tol=spec.get("tol", 1e-3),
        method=spec.get("method", _DEFAULT_METHOD),
        probes=p.get("probes", 4096),
    )
    code = _EXIT_OK if res.verdict == "product" else _EXIT_NEGATIVE
    return res.to_json(), None, code


def _run_translate(spec: dict):
    p = spec["params"]
    k1 = convex.set_from_json(p["set1"])
    k2 = convex.set_from_json(p["set2"])
    tol = spec.get("tol", 1e-3)
    res = gcicheck.find_independent_translations(
        k1,
        k2,
        _spec_for(p.get("sigma"), k1.dim),
        spec.get("budget", _DEFAULT_BUDGET),
        spec["seed"],
        tol=tol,
        method=spec.get("method", "quadrature"),
    )
    code = _EXIT_OK if abs(res.phi - 1.0) <= tol else _EXIT_NEGATIVE
    return res.to_json(), None, code


def _run_bl(spec: dict):
    p = spec["params"]
    datum = blconst.BLDatum.from_json(p["datum"])
    fin = blconst.finiteness_check(datum)
    sur = blconst.surjectivity_check(datum)
    results = {
        "finiteness": {
            "status": fin.status,
            "witness": None if fin.witness is None else fin.witness.tolist(),
        },
        "surjectivity": {"status": sur.status, "index": sur.index},
    }
    band = _band_from_params(p, datum)
    res = blconst.gaussian_bl_infimum(
        datum,
        band,
        seed=spec["seed"],
        n_starts=p.get("n_starts", 8),
        max_iter=p.get("max_iter", 2000),
        tol=spec.get("tol", 1e-9),
    )
    results.update(res.to_json())
    return results, None, _EXIT_OK


def _run_flow(spec: dict):
    p = spec["params"]
    f0 = flow.uniform_density(
        inner=p.get("inner", 1.0), k=p.get("k", 128), window=p.get("window", 8.0)
    )
    eye1 = SymMatrix.identity(1)
    datum = blconst.gci_datum(eye1, [eye1, eye1])
    rep = flow.ball_iterate(f0, f0, p["steps"], datum)
    final = rep.densities[-1][0].normalized()
    series = {
        "flow": {
            "header": ["k", "bl_value", "l1", "mass"],
            "rows": [
                [float(s.k), s.bl_value, s.l1_to_gaussian, s.mass] for s in rep.steps
            ],
        },
        "density": {
            "header": ["x", "f"],
            "rows": [[float(x), float(v)] for x, v in zip(final.x, final.values)],
        },
    }
    results = {
        "steps": rep.to_json()["steps"],
        "final_l1": rep.steps[-1].l1_to_gaussian,
    }
    return results, series, _EXIT_OK


def _run_counterexample(spec: dict):
    p = spec["params"]
    r2 = p["r2"]
    grid = [float(r) for r in (r2 if isinstance(r2, list) else [r2])]
    rows = []
    items = []
    for r in grid:
        res = gcicheck.bary_gci_counterexample(r)
        rows.append([r, res.lhs])
        items.append({"r2": r, **res.to_json()})
    results = {"points": items}
    series = None
    if isinstance(r2, list):
        series = {"sweep": {"header": ["r2", "value"], "rows": rows}}
    return results, series, _EXIT_OK


_RUNNERS = {
    "center": _run_center,
    "measure": _run_measure,
    "verify-gci": _run_verify,
    "equality": _run_equality,
    "translate-independent": _run_translate,
    "bl-constant": _run_bl,
    "flow": _run_flow,
    "counterexample": _run_counterexample,
}

# The primary series written to <stem>.csv by run_experiment.
_MAIN_SERIES = {"flow": "flow", "counterexample": "sweep"}


def _versions() -> dict:
    return {
        "gcilab": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def run_experiment(path, out_stem=None) -> int:
    """Execute one experiment spec file; returns the verdict exit code."""
    path = Path(path)
    spec = json.loads(path.read_text(encoding="utf-8"))
    _validate(spec, "experiment")
    stem = Path(out_stem or spec.get("out") or path.with_suffix(""))

    start = time.monotonic()
    results, series, code = _RUNNERS[spec["kind"]](spec)
    elapsed = time.monotonic() - start

    report = {
        "kind": spec["kind"],
        "seed": spec["seed"],
        "spec": spec,
        "results": results,
        "versions": _versions(),
        "wall_clock_seconds": elapsed,
    }
    if series is not None:
        report["series"] = series
    _validate(report, "report")
    report_path = stem.with_name(stem.name + ".report.json")
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
        newline="\n",
    )
    main_series = _MAIN_SERIES.get(spec["kind"])
    if series and main_series in series:
        s = series[main_series]
        _write_csv(stem.with_name(stem.name + ".csv"), s["header"], s["rows"])
    return code


def emit_plot_data(report_path, out_stem=None) -> list:
    """Write one CSV per series of a report; returns the paths written."""
    report_path = Path(report_path)
    report = json.loads(report_path.read_text(encoding="utf-8"))
    _validate(report, "report")
    series = report.get("series")
    if not series:
        raise NoSeries(f"report kind {report['kind']!r} carries no series data")
    name = report_path.name
    for suffix in (".report.json", ".json"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
            break
    stem = Path(out_stem) if out_stem else report_path.with_name(name)
    written = []
    for key in sorted(series):
        p = stem.with_name(f"{stem.name}.{key}.csv")
        _write_csv(p, series[key]["header"], series[key]["rows"])
        written.append(p)
    return written


def _add_global_flags(sub):
    sub.add_argument("--seed", type=int, help="base seed (spec field overrides)")
    sub.add_argument("--budget", type=int, help="sample budget")
    sub.add_argument("--tol", type=float, help="tolerance")
    sub.add_argument(
        "--method", choices=["monte_carlo", "qmc", "quadrature"], help="estimator"
    )
    sub.add_argument(
        "--threads",
        type=int,
        help="worker hint; estimators are vectorized, results never depend on it",
    )
    sub.add_argument("--out", help="output path stem")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gcilab", description="Gaussian correlation experiment runner"
    )
    subs = parser.add_subparsers(dest="command", required=True)

    run = subs.add_parser("run", help="execute a full experiment spec file")
    run.add_argument("spec", help="path to the experiment JSON")
    run.add_argument("--out", help="output path stem")

    plot = subs.add_parser("plot-data", help="extract CSV series from a report")
    plot.add_argument("report", help="path to a .report.json file")
    plot.add_argument("--out", help="output path stem")

    for kind in _KINDS:
        sub = subs.add_parser(kind, help=f"run a {kind} experiment")
        sub.add_argument("params", help="JSON file with the kind-specific params")
        _add_global_flags(sub)
    return parser


def _spec_from_args(args) -> dict:
    loaded = json.loads(Path(args.params).read_text(encoding="utf-8"))
    # A bare params object is wrapped; a full spec passes through with its
    # own fields taking precedence over command-line flags.
    if "kind" in loaded and "params" in loaded:
        spec = dict(loaded)
    else:
        spec = {"kind": args.command, "params": loaded}
    for field in ("seed", "budget", "tol", "method", "threads"):
        value = getattr(args, field)
        if value is not None and field not in spec:
            spec[field] = value
    if "seed" not in spec:
        raise InvalidInput("seed is mandatory: pass --seed or a seed field")
    if spec["kind"] != args.command:
        raise InvalidInput(
            f"spec kind {spec['kind']!r} disagrees with subcommand {args.command!r}"
        )
    return spec


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return run_experiment(args.spec, args.out)
        if args.command == "plot-data":
            for p in emit_plot_data(args.report, args.out):
                print(p)
            return _EXIT_OK
        spec = _spec_from_args(args)
        _validate(spec, "experiment")
        import tempfile

        with tempfile.NamedTemporaryFile(
            "w", suffix=".json", delete=False, encoding="utf-8"
        ) as fh:
            json.dump(spec, fh)
            tmp = fh.name
        stem = args.out or Path(args.params).with_suffix("")
        return run_experiment(tmp, stem)
    except (GciLabError, OSError, json.JSONDecodeError) as exc:
        print(f"gcilab: error: {exc}", file=sys.stderr)
        return _EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
