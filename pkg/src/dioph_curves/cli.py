"""Command line driver.

Every subcommand reads an optional JSON config (``--config``); flags given on
the command line override its values.  All inputs are parsed and validated
before any computation, results go to CSV (or JSON with ``--format json``),
and a manifest with the resolved inputs, versions and wall time is written
next to the output as ``<out>.manifest.json`` (or to stderr for stdout).

Exit codes: 0 success, 2 configuration error, 3 validation failure,
4 refused by a compute guard.
"""

from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import math
import operator
import os
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._validation import ValidationError
from .curves import decompose_nondegenerate, parse_curve
from .funcs import Power, check_t04_admissible, parse_dimension, parse_function, reduce_min_max
from .limsup import (
    first_moment_bound,
    lebesgue_fraction,
    level_counts,
    membership_test,
    multiplicative_fraction,
    multiplicative_membership,
    slope_dimension_estimate,
)
from .resonant import ComputeGuard, ShiftedQuery, brute_force_oracle, count_query, parse_policy
from .series import CRITERIA, classify, dimension_s0
from .ubiquity import DEFAULT_C_GRID, verify_local_ubiquity

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_GUARD = 0, 2, 3, 4


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# small expression language for numbers, shifts and delta(Q)

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_FUNCS = {"sqrt": math.sqrt, "pow": math.pow, "log": math.log, "exp": math.exp}
_CONSTS = {"pi": math.pi, "e": math.e}


def evaluate_expr(text, **names) -> float:
    """Evaluate arithmetic such as ``sqrt(2)-1`` or ``0.5*pow(Q,-0.5)``."""
    if isinstance(text, (int, float)):
        return float(text)

    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in names:
                return float(names[node.id])
            if node.id in _CONSTS:
                return _CONSTS[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and not node.keywords):
            return _FUNCS[node.func.id](*(ev(a) for a in node.args))
        raise ConfigError(f"unsupported expression {text!r}")

    try:
        return ev(ast.parse(str(text).strip(), mode="eval").body)
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse {text!r}") from exc


def parse_pair(text, name) -> tuple:
    if isinstance(text, (list, tuple)):
        parts = list(text)
    else:
        parts = _split_top(str(text))
    if len(parts) != 2:
        raise ConfigError(f"{name} needs two comma separated values, got {text!r}")
    return tuple(evaluate_expr(p) for p in parts)


def _split_top(text):
    # split on commas outside parentheses
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    out.append(cur)
    return [p.strip() for p in out]


def parse_range(text, name) -> list:
    """``"8:14"`` (inclusive) or ``"8"`` to a list of ints."""
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    parts = str(text).split(":")
    try:
        if len(parts) == 1:
            return [int(parts[0])]
        a, b = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise ConfigError(f"bad {name} {text!r}") from exc
    if b < a:
        raise ConfigError(f"empty {name} {text!r}")
    return list(range(a, b + 1))


def parse_grid(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [evaluate_expr(p) for p in _split_top(str(text))]


# ---------------------------------------------------------------------------
# argument handling

COMMON = {"threads": None, "format": "csv", "out": None, "no_timing": False}

DEFAULTS = {
    "series": {"criterion": "t04", "psi1": None, "psi2": None, "h": "pow(s=1)", "s": None,
               "levels": 40, "diagnostics": None},
    "count": {"curve": "parabola", "interval": None, "Q": None, "t_range": None,
              "delta": "0.1", "theta": "0,0", "mode": "all", "policy": "strict",
              "oracle": False},
    "ubiquity": {"curve": "parabola", "interval": "0.1,0.9", "psi": "pow(v=0.5)",
                 "theta": "0,0", "t_range": "8:13", "C_grid": ",".join(f"{c:g}" for c in DEFAULT_C_GRID),
                 "mode": "half", "policy": "strict"},
    "cover": {"curve": "parabola", "psi1": "pow(v=0.6)", "psi2": "pow(v=0.8)", "h": "pow(s=0.9)",
              "theta": "0,0", "t_range": "6:13", "eta": 0.9, "margin": None},
    "dimension": {"curve": "parabola", "v1": 0.8, "v2": 0.6, "theta": "0,0", "t_range": "6:13",
                  "burn_in": 2, "mode": "exact"},
    "lebesgue": {"curve": "parabola", "psi1": "pow(v=0.5)", "psi2": "pow(v=0.5)", "theta": "0,0",
                 "window": "1,8192", "samples": 10000, "seed": 0, "batch": 1000,
                 "samples_out": None},
    "member": {"curve": "parabola", "x": None, "psi1": "pow(v=0.5)", "psi2": "pow(v=0.5)",
               "theta": "0,0", "Q_max": 8192, "q_min": 1},
    "mult": {"curve": "parabola", "x": None, "psi": "powlog(v=1,a=3)", "theta": "0,0",
             "window": "1,8192", "samples": 10000, "seed": 0, "batch": 1000},
}

HELP = {
    "series": "classify a series criterion",
    "count": "count shifted rational points near a curve",
    "ubiquity": "coverage of a window by balls around resonant points",
    "cover": "cover counts and h-measure contributions per level",
    "dimension": "slope estimate of the cover dimension",
    "lebesgue": "Monte Carlo share of points with a simultaneous witness",
    "member": "smallest witness q for one point",
    "mult": "multiplicative witnesses: one point or a Monte Carlo share",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dioph-curves", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, defaults in DEFAULTS.items():
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", help="JSON file of option values")
        p.add_argument("--out", "-o", help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--threads", type=int)
        p.add_argument("--no-timing", action="store_true", default=None,
                       help="leave timing columns empty for reproducible files")
        for key, default in defaults.items():
            flag = "--" + key.replace("_", "-")
            if isinstance(default, bool):
                p.add_argument(flag, action="store_true", default=None)
            else:
                p.add_argument(flag, dest=key, default=None,
                               help=None if default is None else f"default {default}")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags, in that order of precedence."""
    cfg = {**COMMON, **DEFAULTS[args.command]}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        for key, value in loaded.items():
            key = key.replace("-", "_")
            if key == "command":
                continue
            if key not in cfg:
                raise ConfigError(f"unknown config key {key!r} for {args.command}")
            cfg[key] = value
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError(f"unknown format {cfg['format']!r}")
    return cfg


def _int(cfg, key):
    try:
        return int(cfg[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be an integer, got {cfg[key]!r}") from exc


def _float(cfg, key):
    return evaluate_expr(cfg[key])


def _required(cfg, *keys):
    for k in keys:
        if cfg[k] in (None, ""):
            raise ConfigError(f"missing --{k.replace('_', '-')}")


def _curve(cfg):
    interval = parse_pair(cfg["interval"], "interval") if cfg.get("interval") else None
    return parse_curve(str(cfg["curve"]), interval)


# ---------------------------------------------------------------------------
# subcommands: each returns (fieldnames, rows, extra manifest results)


def prepare_series(cfg):
    _required(cfg, "psi1")
    psi1 = parse_function(cfg["psi1"])
    psi2 = parse_function(cfg["psi2"]) if cfg["psi2"] else None
    h = parse_dimension(cfg["h"]) if cfg["h"] else None
    s = _float(cfg, "s") if cfg["s"] is not None else None
    T = _int(cfg, "levels")
    if cfg["criterion"] not in CRITERIA:
        raise ConfigError(f"unknown criterion {cfg['criterion']!r}")

    def run():
        v = classify(cfg["criterion"], psi1, psi2, h, s, T=T)
        print(v.line())
        if cfg["diagnostics"]:
            with open(cfg["diagnostics"], "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "partial_sum"])
                for t, val in enumerate(v.diagnostics):
                    w.writerow([t, repr(float(val))])
        e, a = (repr(float(x)) for x in v.exponents) if v.exponents is not None else ("", "")
        row = {"criterion": cfg["criterion"], "verdict": v.verdict.value,
               "method": v.method.value, "E": e, "A": a, "reason": v.reason}
        return list(row), [row], {"verdict": v.verdict.value}

    return run


def _q_values(cfg):
    if cfg["Q"] is not None and cfg["t_range"] is not None:
        raise ConfigError("give either --Q or --t-range")
    if cfg["Q"] is not None:
        return [_int(cfg, "Q")]
    if cfg["t_range"] is not None:
        return [2**t for t in parse_range(cfg["t_range"], "t-range")]
    raise ConfigError("missing --Q or --t-range")


def prepare_count(cfg):
    curve = _curve(cfg)
    window = curve.interval
    Qs = _q_values(cfg)
    theta = parse_pair(cfg["theta"], "theta")
    policy = parse_policy(cfg["policy"])
    deltas = [evaluate_expr(cfg["delta"], Q=Q) for Q in Qs]
    if cfg["mode"] not in ("all", "half"):
        raise ConfigError("count mode must be 'all' or 'half'")
    for d in deltas:
        if not 0 < d < 0.5:
            raise ValidationError(f"delta must lie in (0, 1/2), got {d}")
    if cfg["oracle"] and max(Qs) > 2**9:
        raise ComputeGuard(f"oracle refuses Q = {max(Qs)} > 512")
    queries = [ShiftedQuery(curve, Q, window=window, lower=cfg["mode"], delta=d, theta=theta,
                            policy=policy) for Q, d in zip(Qs, deltas)]

    def run():
        fields = ["Q", "delta", "count", "count_over_deltaQ2", "seconds"]
        if cfg["oracle"]:
            fields.append("oracle")
        rows = []
        for Q, d, query in zip(Qs, deltas, queries):
            t0 = time.perf_counter()
            n = count_query(query, cfg["threads"])
            secs = time.perf_counter() - t0
            row = {"Q": Q, "delta": repr(d), "count": n, "count_over_deltaQ2": repr(n / (d * Q * Q)),
                   "seconds": "" if cfg["no_timing"] else f"{secs:.3f}"}
            if cfg["oracle"]:
                if cfg["mode"] != "all":
                    raise ConfigError("--oracle needs mode 'all'")
                row["oracle"] = brute_force_oracle(curve, window, Q, d, theta, policy)
            rows.append(row)
        return fields, rows, {}

    return run


def prepare_ubiquity(cfg):
    curve = _curve({**cfg, "interval": None})
    J = parse_pair(cfg["interval"], "interval")
    psi = parse_function(cfg["psi"])
    theta = parse_pair(cfg["theta"], "theta")
    Qs = [2**t for t in parse_range(cfg["t_range"], "t-range")]
    grid = parse_grid(cfg["C_grid"])
    policy = parse_policy(cfg["policy"])

    def run():
        reports = verify_local_ubiquity(curve, J, psi, theta, Qs, grid, cfg["mode"],
                                        policy=policy, threads=cfg["threads"])
        rows = [{**r.row(), "fraction": repr(r.fraction)} for r in reports]
        return ["Q", "C", "fraction", "minimal_C_flag", "points_used"], rows, {}

    return run


def prepare_cover(cfg):
    curve = _curve(cfg)
    psi1, psi2 = parse_function(cfg["psi1"]), parse_function(cfg["psi2"])
    h = parse_dimension(cfg["h"])
    theta = parse_pair(cfg["theta"], "theta")
    levels = parse_range(cfg["t_range"], "t-range")
    margin = _float(cfg, "margin") if cfg["margin"] is not None else None
    pieces = decompose_nondegenerate(curve, margin, _float(cfg, "eta")).pieces
    small, big = reduce_min_max(psi1, psi2)
    report = check_t04_admissible(h)
    if not report.admissible:
        raise ValidationError(f"dimension function not admissible: {report.reason}")

    def run():
        th = cfg["threads"]
        ex = [level_counts(curve, levels, a, b, theta, "exact", pieces, th)
              for a, b in ((small, big), (big, small))]
        su = [level_counts(curve, levels, a, b, theta, "sufficient", pieces, th)
              for a, b in ((small, big), (big, small))]
        rows = []
        for t in levels:
            q = 2.0**t
            contrib = (ex[0][t] * float(h(2 * small(q) / q)) + ex[1][t] * float(h(2 * big(q) / q)))
            rows.append({"t": t, "count_exact": ex[0][t] + ex[1][t],
                         "count_sufficient": su[0][t] + su[1][t], "h_contrib": repr(contrib)})
        return ["t", "count_exact", "count_sufficient", "h_contrib"], rows, {}

    return run


def prepare_dimension(cfg):
    curve = _curve(cfg)
    v1, v2 = _float(cfg, "v1"), _float(cfg, "v2")
    s0 = dimension_s0(v1, v2).s0
    theta = parse_pair(cfg["theta"], "theta")
    levels = parse_range(cfg["t_range"], "t-range")
    burn_in = _int(cfg, "burn_in")
    small, big = Power(max(v1, v2)), Power(min(v1, v2))

    def run():
        counts = level_counts(curve, levels, small, big, theta, cfg["mode"], threads=cfg["threads"])
        est = slope_dimension_estimate(counts, max(v1, v2), burn_in)
        rows = [{"t": t, "count": counts[t], "used": int(t in est.levels_used)} for t in levels]
        result = {"slope": est.slope, "stderr": est.stderr, "residual": est.residual,
                  "s0": float(s0)}
        print(f"slope={est.slope:.6f} stderr={est.stderr:.6f} s0={float(s0):.6f}", file=sys.stderr)
        return ["t", "count", "used"], rows, result

    return run


def _window(cfg):
    lo, hi = parse_pair(cfg["window"], "window")
    if lo != int(lo) or hi != int(hi):
        raise ConfigError("window bounds must be integers")
    return int(lo), int(hi)


def _mc_rows(est, path):
    if path:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "hit"])
            for x, hit in zip(est.samples, est.hits):
                w.writerow([repr(float(x)), int(hit)])
    row = est.row()
    row["fraction"] = repr(row["fraction"])
    return ["samples", "window_lo", "window_hi", "fraction", "seed"], [row]


def prepare_lebesgue(cfg):
    curve = _curve(cfg)
    psi1, psi2 = parse_function(cfg["psi1"]), parse_function(cfg["psi2"])
    theta = parse_pair(cfg["theta"], "theta")
    window = _window(cfg)
    samples, seed, batch = _int(cfg, "samples"), _int(cfg, "seed"), _int(cfg, "batch")

    def run():
        est = lebesgue_fraction(curve, psi1, psi2, theta, window, samples, seed, batch,
                                cfg["threads"])
        fields, rows = _mc_rows(est, cfg["samples_out"])
        return fields, rows, {"first_moment_bound": first_moment_bound(psi1, psi2, window)}

    return run


def prepare_member(cfg):
    _required(cfg, "x")
    curve = _curve(cfg)
    x = _float(cfg, "x")
    psi1, psi2 = parse_function(cfg["psi1"]), parse_function(cfg["psi2"])
    theta = parse_pair(cfg["theta"], "theta")
    Q_max, q_min = _int(cfg, "Q_max"), _int(cfg, "q_min")

    def run():
        w = membership_test(x, curve, psi1, psi2, theta, Q_max, q_min)
        row = {"x": repr(x), "q": "", "p1": "", "p2": "", "residual1": "", "residual2": ""}
        if w is not None:
            row.update(q=w.q, p1=w.p1, p2=w.p2, residual1=repr(w.residuals[0]),
                       residual2=repr(w.residuals[1]))
        return list(row), [row], {"witness": w is not None}

    return run


def prepare_mult(cfg):
    curve = _curve(cfg)
    psi = parse_function(cfg["psi"])
    theta = parse_pair(cfg["theta"], "theta")
    window = _window(cfg)
    samples, seed, batch = _int(cfg, "samples"), _int(cfg, "seed"), _int(cfg, "batch")
    x = _float(cfg, "x") if cfg["x"] is not None else None

    def run():
        if x is not None:
            q = multiplicative_membership(x, float(curve.f(np.float64(x))), psi, theta,
                                          window[1], window[0])
            return ["x", "q"], [{"x": repr(x), "q": "" if q is None else q}], {}
        est = multiplicative_fraction(curve, psi, theta, window, samples, seed, batch,
                                      cfg["threads"])
        fields, rows = _mc_rows(est, None)
        return fields, rows, {}

    return run


PREPARE = {"series": prepare_series, "count": prepare_count, "ubiquity": prepare_ubiquity,
           "cover": prepare_cover, "dimension": prepare_dimension, "lebesgue": prepare_lebesgue,
           "member": prepare_member, "mult": prepare_mult}


# ---------------------------------------------------------------------------
# output


def render(fields, rows, fmt) -> str:
    if fmt == "json":
        return json.dumps([{k: r.get(k, "") for k in fields} for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def manifest(cfg, command, results, wall) -> dict:
    import mpmath
    import sklearn

    return {"command": command, "config": cfg, "results": results,
            "versions": {"dioph_curves": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "mpmath": mpmath.__version__,
                         "scikit-learn": sklearn.__version__},
            "seed": cfg.get("seed"), "threads": cfg["threads"] or os.cpu_count(),
            "wall_seconds": wall}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve(args)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            job = PREPARE[args.command](cfg)  # all validation happens here
            t0 = time.perf_counter()
            fields, rows, results = job()
            wall = time.perf_counter() - t0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ComputeGuard as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ValidationError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    text = render(fields, rows, cfg["format"])
    record = json.dumps(manifest(cfg, args.command, results, wall), indent=2, default=str) + "\n"
    if cfg["out"]:
        out = Path(cfg["out"])
        tmp = out.with_name(out.name + ".tmp")
        tmp.write_text(text)
        tmp.replace(out)
        out.with_name(out.name + ".manifest.json").write_text(record)
    else:
        sys.stdout.write(text)
        sys.stderr.write(record)
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
