"""Command line front end: config driven batch runs, model listing, invariant suite.

    lagfocal run CONFIG.yaml      run the analyses listed in a YAML config
    lagfocal models list          print the registered model names
    lagfocal verify [--only 1,6]  run the acceptance suite

Exit status: 0 success, 2 unreadable or invalid config, 3 model/domain error
or unwritable output, 4 numerical failure (or a failing verify criterion).
The output directory given in the config is overridden by the environment
variable LAGFOCAL_OUTPUT_DIR.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, InputError, LagfocalError, NumericalError
from .focal_scan import DEFAULT_GRID, alternation_report, focal_times, reduced_focal_times, FocalScan
from .integral_reduction import IntegralTuple, check_involution, dynamical_curvature_delta, ricci_curvature, \
    brute_force_reduced_form, curvature_report
from .models import MODEL_DESCRIPTIONS, MODEL_NAMES, NBodyState, build_model, energy_integral, momentum_integral, \
    nbody_reduced_ricci_closed_form, random_nbody_state, rotation_integral

SCHEMA_VERSION = "1.0"
OUTPUT_ENV = "LAGFOCAL_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_MODEL, EXIT_NUMERIC = 0, 2, 3, 4

OUTPUT_KINDS = ("curvature", "reduced-curvature", "ricci", "focal", "reduced-focal", "alternation")
DEFAULT_TOLERANCES = {"integrator": 1e-12, "root": 1e-10, "rank": 1e-8}
TOLERANCE_RANGES = {"integrator": (2.3e-14, 1e-6), "root": (1e-14, 1e-4), "rank": (1e-14, 1e-2)}
CONFIG_KEYS = {"model", "initial_state", "integrals", "window", "tolerances", "outputs", "seed", "grid_points",
               "output_dir"}


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    model: str
    params: dict = field(default_factory=dict)
    initial_state: tuple = None
    integrals: tuple = ()
    window: tuple = (0.0, np.pi)
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    outputs: tuple = ("focal",)
    seed: int = 0
    grid_points: int = DEFAULT_GRID
    output_dir: str = None
    source: str = None

    def as_dict(self):
        return {"model": {"name": self.model, "params": self.params},
                "initial_state": None if self.initial_state is None else list(self.initial_state),
                "integrals": list(self.integrals), "window": list(self.window), "tolerances": self.tolerances,
                "outputs": list(self.outputs), "seed": self.seed, "grid_points": self.grid_points}


def _number(x, what):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{what} must be a number, got {x!r}")
    if not np.isfinite(x):
        raise ConfigError(f"{what} must be finite")
    return float(x)


def _integral_spec(item):
    if isinstance(item, str):
        if item not in ("default", "energy"):
            raise ConfigError(f"unknown integral {item!r}; use default, energy, rotation or momentum")
        return item
    if isinstance(item, dict) and len(item) == 1:
        (key, val), = item.items()
        if key == "rotation" and isinstance(val, list) and len(val) == 2 and all(isinstance(v, int) for v in val):
            return f"rotation {val[0]} {val[1]}"
        if key == "momentum" and isinstance(val, int) and not isinstance(val, bool):
            return f"momentum {val}"
    raise ConfigError(f"cannot read integral definition {item!r}")


def parse_config(data, source=None):
    """Validate a mapping (already loaded from YAML) into a :class:`RunConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "model" not in data:
        raise ConfigError("config needs a 'model' entry")
    model = data["model"]
    if isinstance(model, str):
        name, params = model, {}
    elif isinstance(model, dict) and isinstance(model.get("name"), str):
        name, params = model["name"], model.get("params") or {}
        if set(model) - {"name", "params"} or not isinstance(params, dict):
            raise ConfigError("model must be {name: ..., params: {...}}")
    else:
        raise ConfigError("model must be a name or {name, params}")

    window = data.get("window", [0.0, float(np.pi)])
    if not isinstance(window, list) or len(window) != 2:
        raise ConfigError("window must be a list [t_min, t_max]")
    t0, t1 = (_number(w, "window end") for w in window)
    if t1 <= 0 or t1 <= t0 or t0 < 0:
        raise ConfigError(f"window must satisfy 0 <= t_min < t_max, got {window!r}")

    tol = dict(DEFAULT_TOLERANCES)
    given = data.get("tolerances") or {}
    if not isinstance(given, dict) or set(given) - set(tol):
        raise ConfigError(f"tolerances must be a mapping with keys among {sorted(tol)}")
    for key, val in given.items():
        val = _number(val, f"tolerance {key}")
        lo, hi = TOLERANCE_RANGES[key]
        if not lo <= val <= hi:
            raise ConfigError(f"tolerance {key}={val:g} outside [{lo:g}, {hi:g}]")
        tol[key] = val

    outputs = data.get("outputs", ["focal"])
    if isinstance(outputs, str):
        outputs = [outputs]
    if not isinstance(outputs, list) or not outputs or any(o not in OUTPUT_KINDS for o in outputs):
        raise ConfigError(f"outputs must be a non-empty list drawn from {', '.join(OUTPUT_KINDS)}")

    state = data.get("initial_state")
    if state is not None:
        if not isinstance(state, list) or not state:
            raise ConfigError("initial_state must be a list of numbers")
        state = tuple(_number(x, "initial_state entry") for x in state)

    integrals = data.get("integrals") or []
    if isinstance(integrals, str):
        integrals = [integrals]
    if not isinstance(integrals, list):
        raise ConfigError("integrals must be a list")
    seed = data.get("seed", 0)
    grid = data.get("grid_points", DEFAULT_GRID)
    for key, val in (("seed", seed), ("grid_points", grid)):
        if isinstance(val, bool) or not isinstance(val, int) or val < 0:
            raise ConfigError(f"{key} must be a non-negative integer")
    if grid < 10:
        raise ConfigError("grid_points must be at least 10")
    out_dir = data.get("output_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("output_dir must be a string")
    return RunConfig(name, dict(params), state, tuple(_integral_spec(i) for i in integrals), (t0, t1), tol,
                     tuple(dict.fromkeys(outputs)), seed, grid, out_dir, source)


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    return parse_config(data, str(path))


# --------------------------------------------------------------------------
# running


def _resolve(cfg):
    """(model, integrals, initial state) for a parsed config."""
    model, default_integrals, default_state = build_model(cfg.model, cfg.params)
    n = model.n
    rng = np.random.default_rng(cfg.seed)
    if cfg.initial_state is not None:
        z = np.array(cfg.initial_state)
    elif default_state is not None:
        z = np.asarray(default_state, dtype=float)
    elif cfg.model == "nbody":
        z = random_nbody_state(n // 2, rng).phase
    else:
        z = rng.normal(size=2 * n)
    if z.shape != (2 * n,):
        raise InputError(f"initial_state has {z.size} entries, model {cfg.model} needs {2 * n}")
    model.energy(z)
    parts = []
    for spec in cfg.integrals:
        words = spec.split()
        if words[0] == "default":
            if default_integrals is None:
                raise InputError(f"model {cfg.model} has no default integrals")
            parts.append(default_integrals)
        elif words[0] == "energy":
            parts.append(energy_integral(model))
        elif words[0] == "rotation":
            i, j = int(words[1]), int(words[2])
            if not (0 <= i < n and 0 <= j < n and i != j):
                raise InputError(f"rotation indices {i}, {j} invalid for n = {n}")
            parts.append(rotation_integral(n, i, j))
        else:
            i = int(words[1])
            if not 0 <= i < n:
                raise InputError(f"momentum index {i} invalid for n = {n}")
            parts.append(momentum_integral(n, i))
    integrals = IntegralTuple.empty(n)
    for part in parts:
        integrals = integrals.concat(part)
    if integrals.s:
        if integrals.s >= n:
            raise InputError(f"{integrals.s} integrals leave nothing to reduce in dimension {n}")
        samples = [z] + [z + 0.1 * rng.normal(size=2 * n) for _ in range(11)]
        samples = [w for w in samples if _inside(model, w)]
        rep = check_involution(model, integrals, samples if len(samples) >= 10 else [z] * 10)
        if not rep.passed:
            raise InputError(f"integrals are not in involution (worst bracket {max(rep.max_h_bracket, rep.max_pair_bracket):.2e})")
    return model, integrals, z


def _inside(model, z):
    try:
        model.energy(z)
    except InputError:
        return False
    return model.clearance is None or model.clearance(z[model.n:]) > 1e-3


def _labels(prefix, k):
    return [f"{prefix}{i + 1}" for i in range(k)]


def _coord_names(n):
    return _labels("p", n) + _labels("q", n)


def _matrix_rows(name, M, rows, cols):
    M = np.atleast_2d(M)
    return [(name, r, c, M[i, j]) for i, r in enumerate(rows) for j, c in enumerate(cols)]


def _oracles(cfg, model, integrals, z):
    n = model.n
    p, q = z[:n], z[n:]
    out = {}
    if cfg.model == "kepler":
        r, c = q[0], p[1]
        out["original_curvature_dp_r"] = -2.0 / r ** 3
        out["reduced_curvature_dp_r"] = 3.0 * c ** 2 / r ** 4 - 2.0 / r ** 3
    elif cfg.model in ("natural", "oscillator"):
        out["curvature_form"] = model.eval_hess(p, q)[n:, n:].tolist()
    elif cfg.model in ("nbody", "eight"):
        st = NBodyState.from_phase(z)
        out["reduced_ricci_displayed"] = nbody_reduced_ricci_closed_form(st)
        out["reduced_ricci_corrected"] = nbody_reduced_ricci_closed_form(st, corrected=True)
    elif cfg.model == "sphere":
        out["ricci"] = 2.0 * model.energy(z)
    return out


def execute(cfg):
    """Run every requested analysis; returns (tables, summary) without touching the disk."""
    tol = cfg.tolerances
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        model, integrals, z = _resolve(cfg)
        n = model.n
        tables = {}
        results = {}
        oracles = _oracles(cfg, model, integrals, z)
        discrepancies = []
        wants = set(cfg.outputs)
        needs_red = wants & {"reduced-curvature", "reduced-focal", "alternation"}
        if needs_red and not integrals.s:
            raise InputError(f"outputs {sorted(needs_red)} need at least one integral")

        if "curvature" in wants:
            rep = curvature_report(model, z)
            rows_ = _labels("dp", rep.form.shape[0])
            table = _matrix_rows("basis", rep.basis.T, rows_, _coord_names(n))
            table += _matrix_rows("operator", rep.operator, rows_, rows_)
            table += _matrix_rows("form", rep.form, rows_, rows_)
            tables["curvature.csv"] = (("matrix", "row", "col", "value"), table)
            results["curvature"] = {"ricci": rep.ricci, "form": rep.form.tolist(),
                                    "eigenvalues": rep.eigenvalues().tolist()}
            if "curvature_form" in oracles:
                diff = float(np.max(np.abs(rep.form - np.array(oracles["curvature_form"]))))
                discrepancies.append({"quantity": "curvature form vs Hess U", "max_abs_difference": diff})
            if "original_curvature_dp_r" in oracles:
                val = float(rep.form[0, 0])
                discrepancies.append({"quantity": "curvature on dp_r vs -2/r^3", "pipeline": val,
                                      "oracle": oracles["original_curvature_dp_r"],
                                      "abs_difference": abs(val - oracles["original_curvature_dp_r"])})

        if "reduced-curvature" in wants:
            delta = dynamical_curvature_delta(model, integrals, z)
            K = delta.basis
            orig = curvature_report(model, z).form_on(K)
            red = orig + delta.delta_form
            direct, _, _ = brute_force_reduced_form(model, integrals, z)
            labels = _labels("k", K.shape[1])
            table = _matrix_rows("basis", K.T, labels, _coord_names(n))
            for name, M in (("original_form", orig), ("delta_form", delta.delta_form), ("reduced_form", red),
                            ("reduced_form_direct", direct)):
                table += _matrix_rows(name, M, labels, labels)
            tables["reduced_curvature.csv"] = (("matrix", "row", "col", "value"), table)
            results["reduced_curvature"] = {"original_form": orig.tolist(), "delta_form": delta.delta_form.tolist(),
                                            "reduced_form": red.tolist(), "reduced_form_direct": direct.tolist(),
                                            "upsilon": delta.A.tolist(), "delta_rank": delta.rank(tol["rank"])}
            discrepancies.append({"quantity": "reduced form: delta path vs direct reduced jet",
                                  "max_abs_difference": float(np.max(np.abs(red - direct)))})
            if "reduced_curvature_dp_r" in oracles:
                val = float(red[0, 0] / (K[0, 0] ** 2))
                discrepancies.append({"quantity": "reduced curvature on dp_r vs 3c^2/r^4 - 2/r^3", "pipeline": val,
                                      "oracle": oracles["reduced_curvature_dp_r"],
                                      "abs_difference": abs(val - oracles["reduced_curvature_dp_r"])})

        if "ricci" in wants:
            rr = ricci_curvature(model, z, integrals if integrals.s else None)
            fields = ("original", "reduced", "x_term", "delta_trace", "kernel_trace")
            table = [(f, getattr(rr, f)) for f in fields if getattr(rr, f) is not None]
            tables["ricci.csv"] = (("quantity", "value"), table)
            results["ricci"] = dict(table)
            if "ricci" in oracles:
                discrepancies.append({"quantity": "Ricci vs constant curvature", "pipeline": rr.original,
                                      "oracle": oracles["ricci"], "abs_difference": abs(rr.original - oracles["ricci"])})
            if "reduced_ricci_displayed" in oracles and rr.reduced is not None:
                for key in ("reduced_ricci_displayed", "reduced_ricci_corrected"):
                    discrepancies.append({"quantity": f"reduced Ricci vs {key.split('_')[-1]} closed form",
                                          "pipeline": rr.reduced, "oracle": oracles[key],
                                          "abs_difference": abs(rr.reduced - oracles[key])})

        scan_args = dict(window=cfg.window, tol=tol["root"], grid_points=cfg.grid_points, integ_tol=tol["integrator"],
                         rank_tol=tol["rank"])
        originals = reduceds = None
        if wants & {"focal", "alternation"}:
            originals = focal_times(model, z, None, **scan_args)
        if wants & {"reduced-focal", "alternation"}:
            reduceds = reduced_focal_times(model, integrals, z, **scan_args)
        for key, recs in (("focal", originals), ("reduced-focal", reduceds)):
            if key in wants:
                rows_ = [(r.time, r.multiplicity, r.kind) for r in recs]
                tables[key.replace("-", "_") + ".csv"] = (("time", "multiplicity", "kind"), rows_)
                results[key.replace("-", "_")] = {"count": sum(r.multiplicity for r in recs),
                                                  "times": [r.time for r in recs],
                                                  "multiplicities": [r.multiplicity for r in recs],
                                                  "residuals": [r.residual for r in recs]}
        if "alternation" in wants:
            scan = FocalScan(cfg.window, originals, reduceds, integrals.s)
            rep = alternation_report(scan)
            m = max(len(rep.reduced_times), len(rep.original_times))
            table = [(i + 1, rep.reduced_times[i] if i < len(rep.reduced_times) else None,
                      rep.original_times[i] if i < len(rep.original_times) else None) for i in range(m)]
            tables["alternation.csv"] = (("index", "reduced_time", "original_time"), table)
            results["alternation"] = {"count_original": len(rep.original_times),
                                      "count_reduced": len(rep.reduced_times),
                                      "count_difference": rep.count_difference, "s": integrals.s,
                                      "inequality_ok": rep.inequality_ok, "alternating_ok": rep.alternating_ok,
                                      "first_reduced_not_later": rep.first_reduced_not_later,
                                      "table": [list(row) for row in table]}
    summary = {"schema_version": SCHEMA_VERSION, "config": cfg.as_dict(),
               "model": {"name": cfg.model, "n": n, "description": MODEL_DESCRIPTIONS[cfg.model]},
               "initial_state": z.tolist(),
               "integrals": {"definitions": list(cfg.integrals), "s": integrals.s,
                             "values": integrals.values(z).tolist()},
               "tolerances": dict(cfg.tolerances), "results": results, "oracles": oracles,
               "discrepancies": discrepancies, "warnings": sorted({str(w.message) for w in caught}),
               "files": sorted(tables)}
    return tables, summary


# --------------------------------------------------------------------------
# output


def format_cell(x):
    """Decimal text with 12 significant digits for floats; integers and labels unchanged."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if x == 0:
            return "0"
        return np.format_float_positional(x, precision=12, unique=False, fractional=False, trim="-")
    return str(x)


def _round(obj):
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        return float(f"{float(obj):.12g}")
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def emit_report(tables, summary, out_dir):
    """Write every table as CSV and the summary as JSON; returns the written paths."""
    out = Path(out_dir)
    blobs = {}
    for name, (header, rows) in sorted(tables.items()):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(x) for x in row])
        blobs[name] = buf.getvalue()
    blobs["summary.json"] = json.dumps(_round(summary), sort_keys=True, indent=2) + "\n"
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, text in blobs.items():
            path = out / name
            path.write_text(text)
            paths.append(path)
    except OSError as exc:
        raise InputError(f"cannot write outputs to {out}: {exc}") from exc
    return paths


def output_dir_for(cfg):
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env)
    if cfg.output_dir:
        base = Path(cfg.source).parent if cfg.source else Path.cwd()
        return base / cfg.output_dir
    stem = Path(cfg.source).stem if cfg.source else "run"
    return Path.cwd() / "lagfocal_output" / stem


def run_config(path, out_dir=None, stream=None, echo=True):
    """Run a config file end to end; returns the exit status."""
    stream = sys.stderr if stream is None else stream
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=stream)
        return EXIT_CONFIG
    try:
        tables, summary = execute(cfg)
        target = Path(out_dir) if out_dir is not None else output_dir_for(cfg)
        paths = emit_report(tables, summary, target)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=stream)
        print(f"  module: {exc.module}  time: {exc.time}", file=stream)
        return EXIT_NUMERIC
    except (InputError, LagfocalError) as exc:
        print(f"model error: {exc}", file=stream)
        return EXIT_MODEL
    if echo:
        print(f"wrote {len(paths)} files to {target}")
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point


def _parser():
    ap = argparse.ArgumentParser(prog="lagfocal", description="curvature and focal times of Jacobi curves")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a YAML config")
    run.add_argument("config")
    run.add_argument("--output-dir", default=None, help=f"output directory (beats {OUTPUT_ENV} and the config)")
    models = sub.add_parser("models", help="model registry")
    models.add_argument("action", choices=["list"])
    ver = sub.add_parser("verify", help="run the acceptance suite")
    ver.add_argument("--only", default=None, help="comma separated criterion numbers")
    return ap


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.command == "run":
        return run_config(args.config, args.output_dir)
    if args.command == "models":
        for name in MODEL_NAMES:
            print(f"{name:<11s} {MODEL_DESCRIPTIONS[name]}")
        return EXIT_OK
    from .acceptance import run_suite
    only = None
    if args.only:
        try:
            only = [int(x) for x in args.only.split(",")]
        except ValueError:
            print("--only takes comma separated integers", file=sys.stderr)
            return EXIT_CONFIG
    results = run_suite(only, echo=True)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
