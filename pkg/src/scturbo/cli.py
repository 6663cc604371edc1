"""Command line front end.

Every subcommand reads one JSON config (plus dotted --set overrides),
runs a job, and writes deterministic artifacts under --output-dir:
a CSV whose first line echoes the resolved config, a .meta.json sidecar
describing the run, and (unless --no-figures) a PNG rendering.

Exit codes: 0 success, 2 config problems, 1 anything else.  Failures
print a one-line JSON object to stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .de import DEParams, de_fixed_point
from .ensemble import EnsembleSpec, ensemble_from_config
from .simulate import sweep
from .thresholds import (bp_exit_curve, bp_threshold, map_threshold,
                         emit_table, tabulate)
from .transfer import TransferFunction
from .trellis import GeneratorSpec


class ConfigError(Exception):
    """Bad config file, section, key, or value."""


_SECTION_KEYS = {
    "de": {"max_iterations", "delta", "p_target"},
    "threshold": {"resolution", "scan_step", "with_map"},
    "map": {"grid_step", "tolerance", "jump_window", "jump_points"},
    "exit_curve": {"grid"},
    "de_trace": {"eps", "iterations"},
    "transfer": {"generators", "sys_grid", "par_grid"},
    "simulate": {"block_length", "eps", "trials", "seed", "max_iterations"},
    "table": {"rows", "coupling_memories", "coupling_length", "resolution",
              "with_map"},
    "output": {"dir", "prefix", "figures"},
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _apply_overrides(cfg: dict, assignments) -> None:
    for item in assignments or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects dotted.key=value, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {part} is not an object")
        node[parts[-1]] = value


def _validate_config(cfg: dict) -> None:
    for section, body in cfg.items():
        if section == "ensemble":
            _parse_ensemble(body, "ensemble")
            continue
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown config section: {section}")
        if not isinstance(body, dict):
            raise ConfigError(f"section {section} must be a JSON object")
        unknown = sorted(set(body) - _SECTION_KEYS[section])
        if unknown:
            raise ConfigError(f"{section}: unknown keys {unknown}")


def _parse_ensemble(body, where: str) -> EnsembleSpec:
    if not isinstance(body, dict):
        raise ConfigError(f"{where} must be a JSON object")
    try:
        return ensemble_from_config(body)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _ensemble(cfg: dict) -> EnsembleSpec:
    if "ensemble" not in cfg:
        raise ConfigError("missing required section: ensemble")
    return _parse_ensemble(cfg["ensemble"], "ensemble")


def _num(body: dict, section: str, key: str, default: float,
         lo: float | None = None, hi: float | None = None) -> float:
    value = body.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number")
    value = float(value)
    if lo is not None and value < lo or hi is not None and value > hi:
        raise ConfigError(f"{section}.{key} out of range")
    return value


def _int(body: dict, section: str, key: str, default: int,
         lo: int | None = None) -> int:
    value = body.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{section}.{key} must be an integer")
    if lo is not None and value < lo:
        raise ConfigError(f"{section}.{key} must be >= {lo}")
    return value


def _bool(body: dict, section: str, key: str, default: bool) -> bool:
    value = body.get(key, default)
    if not isinstance(value, bool):
        raise ConfigError(f"{section}.{key} must be true or false")
    return value


def _grid(body: dict, section: str, key: str,
          default: np.ndarray) -> np.ndarray:
    spec = body.get(key)
    if spec is None:
        return default
    if isinstance(spec, list):
        if not spec or not all(isinstance(v, (int, float))
                               and not isinstance(v, bool) for v in spec):
            raise ConfigError(f"{section}.{key} must list numbers")
        return np.asarray(spec, dtype=float)
    if isinstance(spec, dict):
        unknown = sorted(set(spec) - {"start", "stop", "count"})
        if unknown:
            raise ConfigError(f"{section}.{key}: unknown keys {unknown}")
        start = _num(spec, f"{section}.{key}", "start", 0.0)
        stop = _num(spec, f"{section}.{key}", "stop", 1.0)
        count = _int(spec, f"{section}.{key}", "count", 11, lo=1)
        return np.linspace(start, stop, count)
    raise ConfigError(f"{section}.{key} must be a list or start/stop/count")


def _de_params(cfg: dict) -> DEParams:
    body = cfg.get("de", {})
    try:
        return DEParams(**body)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"de: {exc}") from exc


def _fmt(value: float) -> str:
    return format(float(value), ".10g")


def _jsonable(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _atomic_write(path: Path, data: str | bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode) as handle:
        handle.write(data)
    os.replace(tmp, path)


@dataclass
class _Outputs:
    """Artifact writer for one CLI run; everything lands in one directory."""

    root: Path
    prefix: str
    figures: bool
    command: str
    config: dict
    artifacts: list[str] = field(default_factory=list)

    @property
    def echo(self) -> str:
        return json.dumps(self.config, sort_keys=True, separators=(",", ":"))

    def _record(self, path: Path) -> Path:
        self.artifacts.append(path.name)
        return path

    def path(self, suffix: str) -> Path:
        return self.root / f"{self.prefix}{suffix}"

    def write_csv(self, suffix: str, header, rows) -> Path:
        buf = io.StringIO()
        buf.write(f"# config: {self.echo}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        path = self.path(suffix)
        _atomic_write(path, buf.getvalue())
        return self._record(path)

    def write_text(self, suffix: str, text: str) -> Path:
        path = self.path(suffix)
        _atomic_write(path, text)
        return self._record(path)

    def figure(self, suffix: str, render) -> Path | None:
        if not self.figures:
            return None
        path = self.path(suffix)
        tmp = path.with_name(path.name + ".tmp")
        render(tmp)
        os.replace(tmp, path)
        return self._record(path)

    def write_meta(self, results: dict) -> Path:
        path = self.path(".meta.json")
        meta = {"command": self.command, "config": self.config,
                "artifacts": sorted(self.artifacts + [path.name]),
                "results": results}
        _atomic_write(path, json.dumps(meta, indent=2, sort_keys=True,
                                       default=_jsonable) + "\n")
        self.artifacts.append(path.name)
        return path


def _outputs(cfg: dict, args) -> _Outputs:
    body = cfg.get("output", {})
    root = Path(args.output_dir or body.get("dir", "."))
    prefix = args.prefix or body.get("prefix", args.command.replace("-", "_"))
    figures = _bool(body, "output", "figures", True) and not args.no_figures
    if not isinstance(prefix, str) or not prefix:
        raise ConfigError("output.prefix must be a non-empty string")
    root.mkdir(parents=True, exist_ok=True)
    return _Outputs(root, prefix, figures, args.command, cfg)


def _parallel_map(fn, items, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _cmd_transfer(cfg: dict, out: _Outputs, threads: int) -> dict:
    body = cfg.get("transfer", {})
    gen_text = body.get("generators")
    if gen_text is None and isinstance(cfg.get("ensemble"), dict):
        gen_text = cfg["ensemble"].get("generators")
        if isinstance(gen_text, list):
            gen_text = gen_text[0]
    if gen_text is None:
        raise ConfigError("transfer.generators is required")
    try:
        gens = GeneratorSpec.parse(str(gen_text))
    except ValueError as exc:
        raise ConfigError(f"transfer.generators: {exc}") from exc
    default = np.linspace(0.0, 1.0, 11)
    sys_grid = _grid(body, "transfer", "sys_grid", default)
    par_grid = _grid(body, "transfer", "par_grid", default)
    fn = TransferFunction.for_generators(gens)
    mesh_s, mesh_p = np.meshgrid(sys_grid, par_grid, indexing="ij")
    f_sys, f_par = fn.batch(mesh_s.ravel(), mesh_p.ravel())
    rows = [(_fmt(a), _fmt(b), _fmt(c), _fmt(d))
            for a, b, c, d in zip(mesh_s.ravel(), mesh_p.ravel(), f_sys, f_par)]
    out.write_csv(".csv", ("sys_erasure", "par_erasure",
                           "sys_extrinsic", "par_extrinsic"), rows)
    shape = (sys_grid.size, par_grid.size)
    out.figure(".png", lambda p: _plotting().transfer_figure(
        sys_grid, par_grid, f_sys.reshape(shape), f_par.reshape(shape), p))
    return {"generators": str(gens), "points": int(f_sys.size)}


def _cmd_de_trace(cfg: dict, out: _Outputs, threads: int) -> dict:
    spec = _ensemble(cfg)
    body = cfg.get("de_trace", {})
    if "eps" not in body:
        raise ConfigError("de_trace.eps is required")
    eps = _num(body, "de_trace", "eps", 0.0, lo=0.0, hi=1.0)
    iterations = _int(body, "de_trace", "iterations", 100, lo=1)
    params = dataclasses.replace(_de_params(cfg), max_iterations=iterations)
    result = de_fixed_point(spec, eps, params, record_trace=True,
                            trace_limit=iterations)
    names = list(result.stream_trace[0])
    rows = []
    for it, (profile, streams) in enumerate(zip(result.profile_trace,
                                                result.stream_trace)):
        for pos in range(profile.size):
            rows.append((it, pos + 1,
                         *(_fmt(streams[n][pos]) for n in names),
                         _fmt(profile[pos])))
    out.write_csv(".csv", ("iteration", "position", *names, "aposteriori"),
                  rows)
    trace = np.asarray(result.profile_trace)
    out.figure(".png", lambda p: _plotting().de_trace_figure(trace, p))
    return {"ensemble": spec.label, "eps": eps, "status": result.status,
            "iterations": result.iterations,
            "max_aposteriori": result.max_aposteriori}


def _threshold_knobs(cfg: dict):
    body = cfg.get("threshold", {})
    resolution = _num(body, "threshold", "resolution", 1e-4, lo=0.0, hi=1.0)
    scan_step = _num(body, "threshold", "scan_step", 0.1, lo=0.0, hi=0.5)
    with_map = _bool(body, "threshold", "with_map", True)
    return resolution, scan_step, with_map


def _map_kwargs(cfg: dict) -> dict:
    body = cfg.get("map", {})
    return {
        "grid_step": _num(body, "map", "grid_step", 1e-3, lo=0.0, hi=1.0),
        "tolerance": _num(body, "map", "tolerance", 1e-3, lo=0.0),
        "jump_window": _num(body, "map", "jump_window", 0.01, lo=0.0, hi=1.0),
        "jump_points": _int(body, "map", "jump_points", 60, lo=2),
    }


def _cmd_threshold(cfg: dict, out: _Outputs, threads: int) -> dict:
    spec = _ensemble(cfg)
    resolution, scan_step, with_map = _threshold_knobs(cfg)
    params = _de_params(cfg)
    bp = bp_threshold(spec, resolution=resolution, params=params,
                      scan_step=scan_step)
    estimate = None
    if with_map and not spec.coupled:
        estimate = map_threshold(spec, params=params, **_map_kwargs(cfg))
    map_cell = "" if estimate is None else f"{estimate.value:.6f}"
    out.write_csv(".csv", ("Ensemble", "Rate", "eps_BP", "eps_MAP"),
                  [(spec.label, spec.rate_label, f"{bp.value:.6f}", map_cell)])
    out.figure(".png", lambda p: _plotting().threshold_figure(
        bp.probes, bp.value, p))
    results = {"ensemble": spec.label, "rate": spec.rate_label,
               "bp": {"value": bp.value, "lower": bp.lower, "upper": bp.upper,
                      "resolution": bp.resolution, "probes": len(bp.probes)}}
    if estimate is not None:
        results["map"] = {"value": estimate.value,
                          "value_error": estimate.value_error,
                          "area_error": estimate.area_error}
    return results


def _cmd_map(cfg: dict, out: _Outputs, threads: int) -> dict:
    spec = _ensemble(cfg)
    estimate = map_threshold(spec, params=_de_params(cfg), **_map_kwargs(cfg))
    out.write_csv(".csv",
                  ("Ensemble", "Rate", "eps_BP", "eps_MAP", "value_error"),
                  [(spec.label, spec.rate_label, f"{estimate.bp_value:.6f}",
                    f"{estimate.value:.6f}", _fmt(estimate.value_error))])
    out.write_csv("_curve.csv", ("eps", "entropy"),
                  [(_fmt(e), _fmt(h))
                   for e, h in zip(estimate.grid, estimate.curve)])
    out.figure(".png", lambda p: _plotting().exit_curve_figure(
        estimate.grid, estimate.curve, estimate.design_rate,
        estimate.bp_value, p, map_value=estimate.value))
    return {"ensemble": spec.label, "rate": spec.rate_label,
            "bp": estimate.bp_value, "map": estimate.value,
            "design_rate": estimate.design_rate,
            "total_area": estimate.total_area,
            "area_error": estimate.area_error,
            "value_error": estimate.value_error,
            "grid_points": int(estimate.grid.size)}


def _cmd_exit_curve(cfg: dict, out: _Outputs, threads: int) -> dict:
    spec = _ensemble(cfg)
    body = cfg.get("exit_curve", {})
    grid = _grid(body, "exit_curve", "grid", np.linspace(0.0, 1.0, 101))
    params = _de_params(cfg)
    chunks = (np.array_split(grid, min(threads * 4, grid.size))
              if threads > 1 and grid.size > 1 else [grid])
    pieces = _parallel_map(lambda g: bp_exit_curve(spec, g, params), chunks,
                           threads)
    curve = np.concatenate(pieces, axis=0)
    resolution, scan_step, _ = _threshold_knobs(cfg)
    bp = bp_threshold(spec, resolution=resolution, params=params,
                      scan_step=scan_step)
    out.write_csv(".csv", ("eps", "entropy"),
                  [(_fmt(e), _fmt(h)) for e, h in curve])
    out.figure(".png", lambda p: _plotting().exit_curve_figure(
        curve[:, 0], curve[:, 1], spec.design_rate, bp.value, p))
    return {"ensemble": spec.label, "bp": bp.value,
            "grid_points": int(grid.size)}


def _cmd_simulate(cfg: dict, out: _Outputs, threads: int) -> dict:
    spec = _ensemble(cfg)
    body = cfg.get("simulate", {})
    if "block_length" not in body:
        raise ConfigError("simulate.block_length is required")
    if "eps" not in body:
        raise ConfigError("simulate.eps is required")
    block_length = _int(body, "simulate", "block_length", 0, lo=1)
    eps_grid = _grid(body, "simulate", "eps", np.empty(0))
    trials = _int(body, "simulate", "trials", 100, lo=1)
    seed = _int(body, "simulate", "seed", 0, lo=0)
    max_iterations = _int(body, "simulate", "max_iterations", 50, lo=1)
    if np.any(eps_grid < 0.0) or np.any(eps_grid > 1.0):
        raise ConfigError("simulate.eps values must lie in [0, 1]")
    points = sweep(spec, block_length, eps_grid, trials, seed=seed,
                   max_iterations=max_iterations, threads=threads)
    rows = [(_fmt(p.eps), p.trials, _fmt(p.bit_erasure_rate),
             _fmt(p.frame_erasure_rate), _fmt(p.mean_iterations))
            for p in points]
    out.write_csv(".csv", ("eps", "trials", "bit_erasure_rate",
                           "frame_erasure_rate", "mean_iterations"), rows)
    out.figure(".png", lambda p: _plotting().waterfall_figure(points, p))
    return {"ensemble": spec.label, "block_length": block_length,
            "trials": trials, "seed": seed,
            "max_iterations": max_iterations, "points": len(points)}


def _cmd_table(cfg: dict, out: _Outputs, threads: int) -> dict:
    body = cfg.get("table", {})
    rows_cfg = body.get("rows")
    if rows_cfg is None:
        if "ensemble" not in cfg:
            raise ConfigError("table.rows (or an ensemble section) is required")
        rows_cfg = [cfg["ensemble"]]
    if not isinstance(rows_cfg, list) or not rows_cfg:
        raise ConfigError("table.rows must be a non-empty list")
    specs = [_parse_ensemble(row, f"table.rows[{i}]")
             for i, row in enumerate(rows_cfg)]
    memories = body.get("coupling_memories", [1, 3])
    if (not isinstance(memories, list) or not memories
            or not all(isinstance(m, int) and not isinstance(m, bool)
                       and m >= 1 for m in memories)):
        raise ConfigError("table.coupling_memories must list integers >= 1")
    length = _int(body, "table", "coupling_length", 100, lo=1)
    resolution = _num(body, "table", "resolution", 1e-4, lo=0.0, hi=1.0)
    with_map = _bool(body, "table", "with_map", True)
    params = _de_params(cfg)
    reports = _parallel_map(
        lambda s: tabulate(s, coupling_memories=tuple(memories),
                           coupling_length=length, resolution=resolution,
                           params=params, with_map=with_map),
        specs, threads)
    out.write_text(".csv", f"# config: {out.echo}\n" + emit_table(reports))
    out.figure(".png", lambda p: _plotting().table_figure(reports, p))
    return {"rows": [{"name": r.name, "rate": r.rate_label, "bp": r.bp,
                      "map": r.map_estimate,
                      "coupled": {str(m): v
                                  for m, v in sorted((r.coupled or {}).items())}}
                     for r in reports]}


def _plotting():
    # imported lazily so --no-figures runs never touch matplotlib
    from . import plotting

    return plotting


_COMMANDS = {
    "transfer": (_cmd_transfer, "component transfer function over a grid"),
    "de-trace": (_cmd_de_trace, "iteration-by-iteration erasure profiles"),
    "threshold": (_cmd_threshold, "iterative decoding threshold"),
    "map": (_cmd_map, "area-based optimal-decoding threshold"),
    "exit-curve": (_cmd_exit_curve, "fixed-point entropy curve"),
    "simulate": (_cmd_simulate, "finite-length Monte Carlo sweep"),
    "table": (_cmd_table, "threshold table over several ensembles"),
}


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get("SCTURBO_THREADS", "1")))
    except ValueError:
        return 1


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("-c", "--config", metavar="FILE",
                        help="JSON config file")
    shared.add_argument("-s", "--set", action="append", metavar="KEY=VALUE",
                        help="override a config entry (dotted key, JSON value)")
    shared.add_argument("-o", "--output-dir", metavar="DIR",
                        help="directory for artifacts (default: config or .)")
    shared.add_argument("--prefix", metavar="NAME",
                        help="artifact file name stem (default: command name)")
    shared.add_argument("--no-figures", action="store_true",
                        help="skip PNG rendering")
    shared.add_argument("--threads", type=int, default=_default_threads(),
                        help="worker threads for independent jobs "
                             "(default: SCTURBO_THREADS or 1)")
    parser = argparse.ArgumentParser(
        prog="scturbo",
        description="analysis tools for spatially coupled turbo-like codes "
                    "on the binary erasure channel")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in _COMMANDS.items():
        sub.add_parser(name, parents=[shared], help=help_text)
    return parser


def _fail(kind: str, exc: Exception) -> None:
    print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        _apply_overrides(cfg, args.set)
        _validate_config(cfg)
        out = _outputs(cfg, args)
        results = _COMMANDS[args.command][0](cfg, out, max(1, args.threads))
        out.write_meta(results)
    except ConfigError as exc:
        _fail("config-error", exc)
        return 2
    except Exception as exc:  # single reporting boundary for the CLI
        _fail(type(exc).__name__, exc)
        return 1
    for name in out.artifacts:
        print(out.root / name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
