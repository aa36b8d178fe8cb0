"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 impossible
post-selection.  Machine-readable outputs carry a run record (command,
resolved configuration, version, seed, timestamp) so any result can be
reproduced; CSV outputs write the record as JSON to stderr.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, scenarios
from .ensemble import CSV_HEADER, EnsembleConfig, detectability, run_ensemble
from .errors import ImpossiblePostSelection, InvalidCircuit, StructuralError
from .pointer import PointerConfig, couple, first_order_shift, leak_ratio, postselect
from .tsvf import IMPOSSIBLE_THRESHOLD, point_projector, two_state_at, weak_value

EXIT_OK, EXIT_USAGE, EXIT_IMPOSSIBLE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x: float) -> str:
    """17 significant digits, so CSV values round-trip exactly."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    return x


def run_record(command: str, config: dict, seed: int | None = None) -> dict:
    return {
        "command": command,
        "config": _jsonable(config),
        "version": __version__,
        "seed": seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def _write_csv(rows: Sequence[Sequence[Any]], header: Sequence[str], out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, int, np.floating, np.integer)) and not isinstance(v, bool)
                    else v for v in row])


def _emit(args, record: dict, result: dict, header: Sequence[str], rows: Sequence[Sequence[Any]],
          title: str = "") -> None:
    out = sys.stdout
    if args.format == "json":
        json.dump(_jsonable({"record": record, "result": result}), out, indent=2, allow_nan=False)
        out.write("\n")
    elif args.format == "csv":
        _write_csv(rows, header, out)
        print(json.dumps(_jsonable(record)), file=sys.stderr)
    else:
        if title:
            out.write(title + "\n")
        widths = [max(len(h), *(len(_cell(r[i])) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
        out.write("  ".join(h.ljust(w) for h, w in zip(header, widths)) + "\n")
        for r in rows:
            out.write("  ".join(_cell(v).ljust(w) for v, w in zip(r, widths)) + "\n")


def _cell(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.10g}"
    return str(v)


def _clean(x: float, tol: float = 1e-14) -> float:
    return 0.0 if abs(x) < tol else x


def _preset_and_post(args):
    preset = scenarios.load(args.scenario)
    return preset, preset.post(args.post)


def _check_point(preset, point: str) -> None:
    if point not in preset.circuit.marked_points:
        raise StructuralError(f"unknown point {point!r} for {preset.id}; known: {sorted(preset.circuit.marked_points)}")


# -- commands -----------------------------------------------------------------

def cmd_weak_values(args) -> int:
    preset, post = _preset_and_post(args)
    points = args.points or list(preset.points)
    for p in points:
        _check_point(preset, p)
    rows, table = [], {}
    for p in points:
        tsv = two_state_at(preset.circuit, preset.pre, post, p)
        wv = weak_value(tsv, point_projector(preset.circuit, p)).value
        wv = complex(_clean(wv.real), _clean(wv.imag))
        table[p] = {"weak_value": wv, "shift_in_units_of_delta": wv.real}
        rows.append((p, wv.real, wv.imag, wv.real))
    record = run_record("weak-values", {"scenario": args.scenario, "post": args.post, "points": points})
    _emit(args, record, {"scenario": args.scenario, "post": args.post, "points": table},
          ("point", "weak_value_re", "weak_value_im", "shift_over_delta"), rows,
          title=f"# {args.scenario}, post-selected on {args.post}")
    return EXIT_OK


def _pointer_eval(preset, post, point: str, epsilon: float, width: float, need_first_order: bool):
    cfg = PointerConfig(width, epsilon)
    joint = couple(preset.circuit, preset.pre, [(point, cfg)])
    state, prob = postselect(joint, post)
    # the amplitude threshold of the two-state check, squared
    if prob < IMPOSSIBLE_THRESHOLD**2:
        raise ImpossiblePostSelection(message="impossible post-selection (zero probability)")
    exact = state.mean(0)
    momentum = state.momentum_mean(0)
    first = math.nan
    wv = None
    try:
        wv = weak_value(two_state_at(preset.circuit, preset.pre, post, point),
                        point_projector(preset.circuit, point)).value
        first = first_order_shift(wv, cfg)
    except ImpossiblePostSelection:
        if need_first_order:
            raise
    return {
        "exact_shift": _clean(exact, 1e-300),
        "first_order_shift": first,
        "difference": exact - first,
        "postselection_probability": prob,
        "exact_momentum_shift": momentum,
        "weak_value": wv,
        "delta": cfg.shift,
    }


def cmd_pointer(args) -> int:
    preset, post = _preset_and_post(args)
    _check_point(preset, args.point)
    res = _pointer_eval(preset, post, args.point, args.epsilon, args.width, args.mode != "exact")
    cols = {"exact": ("exact_shift",), "first-order": ("first_order_shift",),
            "both": ("exact_shift", "first_order_shift", "difference")}[args.mode]
    header = ("point", "epsilon", "width") + cols + ("postselection_probability",)
    row = (args.point, args.epsilon, args.width) + tuple(res[c] for c in cols) + (res["postselection_probability"],)
    record = run_record("pointer", {k: getattr(args, k) for k in ("scenario", "post", "point", "epsilon", "width", "mode")})
    _emit(args, record, {"point": args.point, **res}, header, [row],
          title=f"# {args.scenario}, post-selected on {args.post}, pointer at {args.point}")
    return EXIT_OK


def cmd_ensemble(args) -> int:
    preset, _ = _preset_and_post(args)
    points = args.points or list(preset.points)
    for p in points:
        _check_point(preset, p)
    cfg = EnsembleConfig(args.scenario, args.post, tuple((p, args.epsilon) for p in points),
                         width=args.width, trials=args.trials, seed=args.seed)
    result = run_ensemble(cfg, threads=args.threads)
    record = run_record("ensemble", cfg.to_dict(), seed=cfg.seed)
    record["rng"] = result.rng
    record["outputs"] = {"counts": result.counts, "postselection_rate": result.postselection_rate}
    buf = io.StringIO()
    _write_csv(result.csv_rows(), CSV_HEADER, buf)
    if args.out:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(buf.getvalue())
        except OSError as exc:
            raise UsageError(f"cannot write {args.out}: {exc}") from exc
        record["outputs"]["csv"] = str(args.out)
    else:
        sys.stdout.write(buf.getvalue())
    if args.detail:
        record["outputs"]["detail"] = result.to_dict()
    print(json.dumps(_jsonable(record), allow_nan=False), file=sys.stderr)
    return EXIT_OK


def _sweep_values(args) -> np.ndarray:
    if args.steps < 1:
        raise UsageError("--steps must be at least 1")
    lo, hi = getattr(args, "from"), args.to
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise UsageError(f"malformed range [{lo}, {hi}]")
    if args.param == "width" and lo <= 0:
        raise UsageError("width range must be positive")
    if args.steps == 1:
        return np.array([lo])
    return np.linspace(lo, hi, args.steps)


def cmd_sweep(args) -> int:
    values = _sweep_values(args)
    preset, post = _preset_and_post(args)
    _check_point(preset, args.point)
    rows = []
    for v in values:
        eps = v if args.param == "epsilon" else args.epsilon
        width = v if args.param == "width" else args.width
        res = _pointer_eval(preset, post, args.point, float(eps), float(width), False)
        leak_exact, leak_asym = leak_ratio(abs(float(eps)))
        rows.append((float(v), res["exact_shift"], res["first_order_shift"], res["difference"],
                     res["postselection_probability"], leak_exact, leak_asym))
    header = (args.param, "exact_shift", "first_order_shift", "difference", "postselection_probability",
              "leak_ratio_exact", "leak_ratio_asymptotic")
    config = {k: getattr(args, k) for k in ("scenario", "post", "point", "param", "to", "steps", "epsilon", "width")}
    config["from"] = getattr(args, "from")
    record = run_record("sweep", config)
    out_fmt = args.format if args.format != "table" else "csv"
    if args.out:
        with open(args.out, "w", newline="") as fh:
            _write_csv(rows, header, fh)
        record["outputs"] = {"csv": str(args.out)}
        print(json.dumps(_jsonable(record)), file=sys.stderr)
        return EXIT_OK
    args.format = out_fmt
    _emit(args, record, {"rows": [dict(zip(header, r)) for r in rows]}, header, rows)
    return EXIT_OK


def cmd_leak_ratio(args) -> int:
    if args.epsilon < 0 or not math.isfinite(args.epsilon):
        raise UsageError("--epsilon must be a finite non-negative number")
    exact, asym = leak_ratio(args.epsilon)
    record = run_record("leak-ratio", {"epsilon": args.epsilon})
    _emit(args, record, {"epsilon": args.epsilon, "exact": exact, "asymptotic": asym},
          ("epsilon", "exact", "asymptotic"), [(args.epsilon, exact, asym)])
    return EXIT_OK


def cmd_scenarios(args) -> int:
    if args.action == "list":
        rows = [(pid, scenarios.load(pid).note) for pid in scenarios.list_presets()]
        record = run_record("scenarios list", {})
        _emit(args, record, {"scenarios": [r[0] for r in rows]}, ("id", "description"), rows)
        return EXIT_OK
    if not args.id:
        raise UsageError("scenarios show needs a scenario id")
    preset = scenarios.load(args.id)
    rows = []
    for post, table in preset.expected.items():
        for pt, v in table.items():
            rows.append((post, pt, v.real, v.imag))
    result = {
        "id": preset.id,
        "note": preset.note,
        "circuit": scenarios.circuit_to_dict(preset.circuit),
        "posts": list(preset.posts),
        "impossible_posts": list(preset.impossible_posts),
        "points": list(preset.points),
        "expected_weak_values": {post: {pt: v for pt, v in t.items()} for post, t in preset.expected.items()},
    }
    record = run_record("scenarios show", {"id": args.id})
    _emit(args, record, result, ("post", "point", "weak_value_re", "weak_value_im"), rows,
          title=f"# {preset.id}: {preset.note}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        doc = json.loads(Path(args.file).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {args.file}: {exc}") from exc
    diags = scenarios.check_circuit_document(doc)
    for d in diags:
        print(d, file=sys.stderr)
    if not diags:
        print("ok")
    return EXIT_OK if not diags else EXIT_USAGE


def cmd_detectability(args) -> int:
    preset, _ = _preset_and_post(args)
    points = args.points or list(preset.points)
    cfg = EnsembleConfig(args.scenario, args.post, tuple((p, args.epsilon) for p in points),
                         width=args.width, trials=args.trials, seed=args.seed)
    det = detectability(cfg, threads=args.threads)
    rows = [(d.point, math.nan if d.z is None else d.z, d.predicted_z, d.stderr_defined) for d in det.values()]
    record = run_record("detectability", cfg.to_dict(), seed=cfg.seed)
    _emit(args, record, {"points": {d.point: {"z": d.z, "predicted_z": d.predicted_z,
                                               "stderr_defined": d.stderr_defined} for d in det.values()}},
          ("point", "z", "predicted_z", "stderr_defined"), rows)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tsvf-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, fmt=True):
        p.add_argument("--config", help="JSON file whose keys override the command-line flags")
        if fmt:
            p.add_argument("--format", choices=("table", "json", "csv"), default="table")

    def scen(p):
        p.add_argument("--scenario", required=True)
        p.add_argument("--post", required=True, help="post-selection id, e.g. D2 or D2_H")

    p = sub.add_parser("weak-values", help="weak values of the path projectors at every marked point")
    scen(p)
    p.add_argument("--points", nargs="+")
    common(p)
    p.set_defaults(func=cmd_weak_values)

    p = sub.add_parser("pointer", help="exact and first-order pointer shift at one point")
    scen(p)
    p.add_argument("--point", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--mode", choices=("exact", "first-order", "both"), default="both")
    common(p)
    p.set_defaults(func=cmd_pointer)

    p = sub.add_parser("ensemble", help="Monte Carlo ensemble; writes a CSV table")
    scen(p)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", nargs="+")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--threads", type=int)
    p.add_argument("--detail", action="store_true", help="include the full result in the run record")
    common(p, fmt=False)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("detectability", help="observed and predicted z-scores of an ensemble")
    scen(p)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", nargs="+")
    p.add_argument("--threads", type=int)
    common(p)
    p.set_defaults(func=cmd_detectability)

    p = sub.add_parser("sweep", help="pointer shift over a range of epsilon or width (tidy CSV)")
    scen(p)
    p.add_argument("--point", required=True)
    p.add_argument("--param", choices=("epsilon", "width"), default="epsilon")
    p.add_argument("--from", type=float, required=True)
    p.add_argument("--to", type=float, required=True)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--epsilon", type=float, default=0.1, help="fixed epsilon when sweeping width")
    p.add_argument("--width", type=float, default=1.0, help="fixed width when sweeping epsilon")
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("leak-ratio", help="flux leaking through a spoiled dark port")
    p.add_argument("--epsilon", type=float, required=True)
    common(p)
    p.set_defaults(func=cmd_leak_ratio)

    p = sub.add_parser("scenarios", help="list or show the shipped presets")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("id", nargs="?")
    common(p)
    p.set_defaults(func=cmd_scenarios)

    p = sub.add_parser("validate", help="check a circuit definition file")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate, config=None)
    return parser


def _apply_config(args) -> None:
    path = getattr(args, "config", None)
    if not path:
        return
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    for key, value in cfg.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr) or attr in ("func", "command", "config"):
            raise UsageError(f"config key {key!r} is not an option of {args.command}")
        setattr(args, attr, value)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        return args.func(args)
    except ImpossiblePostSelection as exc:
        print(f"tsvf-lab: {exc}", file=sys.stderr)
        return EXIT_IMPOSSIBLE
    except (UsageError, StructuralError, InvalidCircuit, ValueError) as exc:
        print(f"tsvf-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
