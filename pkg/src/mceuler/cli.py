"""Command line front end.

Subcommands:

  table           convergence table for one builtin experiment model
  convergence     multi-seed convergence study with an order fit
  diagnose        dominator traces, restricted moments, event
                  probabilities, or the drift-only blow-up demo
  reference       compute (and cache) a reference value
  validate-model  spot-check a model's regularity constants

Every run echoes its resolved configuration as '# key=value' comment
lines above the CSV header, so an output file is self-describing.
Options can come from a flat key=value config file (--config); explicit
flags win over file entries.  Execution details that cannot change
results (--workers, --out, the config path itself) are not part of the
echoed configuration.

Floats are printed with 17 significant digits: round-tripping them
yields bit-identical doubles, which the reproducibility checks rely on.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Optional

import numpy as np

from . import __version__, _kernels
from .brownian import increments, sample_path
from .dominator import check_domination, dominator_table
from .estimator import (
    ConvergenceRow,
    abs_power_payoff,
    coupled_sweep,
    error_rows,
    fit_order,
    moment_diagnostics,
    prob_omega_complement,
)
from .euler import divergence_demo, euler_path
from .models import BUILTIN_FACTORIES, cubic, get_model, validate_growth
from .reference import (
    GL_SECOND_MOMENT_TARGET,
    ReferenceCache,
    cubic_reference,
    gbm_reference,
    gl_second_moment_reference,
)

_SCALES = ("desk", "paper")

# scale presets: (gl reference samples, cubic reference steps)
_GL_REF_SAMPLES = {"desk": 10**6, "paper": 10**7}
_CUBIC_REF_STEPS = {"desk": 2**10, "paper": 2**12}


# ---------------------------------------------------------------- config


def _parse_seeds(text: str) -> list:
    """'4' -> [4]; '0,2,5' -> [0, 2, 5]; '0..9' -> 0 through 9."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise ValueError("seed range %r is empty" % text)
        return list(range(lo, hi + 1))
    return [int(part) for part in text.split(",") if part.strip() != ""]


def _parse_reference(text: str):
    text = text.strip()
    if text == "auto":
        return "auto"
    return float(text)


def _parse_model_params(text: str) -> dict:
    """'a=0.5,b=0.25' -> {'a': 0.5, 'b': 0.25}."""
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError("model parameter %r is not key=value" % part)
        key, val = part.split("=", 1)
        out[key.strip()] = float(val)
    return out


def _parse_scale(text: str) -> str:
    if text not in _SCALES:
        raise ValueError("scale must be one of %s, got %r" % ("|".join(_SCALES), text))
    return text


def _load_config(path: str) -> dict:
    cfg = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError("%s:%d: expected key=value, got %r" % (path, lineno, line))
            key, val = line.split("=", 1)
            cfg[key.strip()] = val.strip()
    return cfg


def _resolve(args, config: dict, spec: list) -> dict:
    """Merge flag values, config file entries and defaults.

    spec rows are (dest, parse_fn, default).  A flag that argparse left
    at None falls through to the config file, then to the default.
    Unknown config keys are an error so that typos surface instead of
    silently running defaults.
    """
    known = {dest for dest, _, _ in spec}
    unknown = set(config) - known
    if unknown:
        raise ValueError(
            "config keys %s are not options of this command" % sorted(unknown)
        )
    resolved = {}
    for dest, parse, default in spec:
        flag_val = getattr(args, dest, None)
        if flag_val is not None:
            resolved[dest] = flag_val
        elif dest in config:
            resolved[dest] = parse(config[dest])
        else:
            resolved[dest] = default
    return resolved


def _config_value_str(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    if isinstance(value, dict):
        return ",".join("%s=%r" % (k, value[k]) for k in sorted(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _comment_lines(command: str, resolved: dict, extra: Optional[list] = None) -> list:
    lines = ["mceuler %s" % __version__, "command=%s" % command]
    for key in sorted(resolved):
        lines.append("%s=%s" % (key, _config_value_str(resolved[key])))
    if extra:
        lines.extend(extra)
    return lines


# ---------------------------------------------------------------- output


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _emit_csv(out: Optional[str], comments: list, header: list, rows: list) -> None:
    if out in (None, "-"):
        fh, close = sys.stdout, False
    else:
        fh, close = open(out, "w", encoding="utf-8", newline=""), True
    try:
        for comment in comments:
            fh.write("# %s\n" % comment)
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(v) for v in row) + "\n")
    finally:
        if close:
            fh.close()


# ---------------------------------------------------------------- shared


def _pow2_range(n_min: int, n_max: int) -> list:
    def expo(n):
        k = int(n).bit_length() - 1
        if n < 1 or 2**k != n:
            raise ValueError("step counts must be powers of two, got %d" % n)
        return k

    k_lo, k_hi = expo(n_min), expo(n_max)
    if k_hi < k_lo:
        raise ValueError("n_max %d is below n_min %d" % (n_max, n_min))
    return [2**k for k in range(k_lo, k_hi + 1)]


def _build_model(name: str, params: dict):
    try:
        return get_model(name, **params)
    except TypeError as exc:
        raise ValueError("bad parameters for model %r: %s" % (name, exc)) from None


def _cache(resolved: dict) -> Optional[ReferenceCache]:
    path = resolved.get("cache_file")
    return ReferenceCache(path) if path else None


def _auto_reference(model_name: str, resolved: dict, model=None):
    """Reference value + provenance comments for a convergence run."""
    scale = resolved["scale"]
    if model_name == "ginzburg_landau":
        return GL_SECOND_MOMENT_TARGET, ["reference_method=gl_known_target"]
    if model_name == "cubic":
        ref = cubic_reference(
            seed=0, n_steps=_CUBIC_REF_STEPS[scale], cache=_cache(resolved)
        )
        return ref.value, [
            "reference_method=%s" % ref.method,
            "reference_n_steps=%d" % ref.parameters["n_steps"],
            "reference_std_error=%s" % _fmt_cell(ref.std_error),
        ]
    if model_name == "gbm":
        ref = gbm_reference(model, resolved["payoff_power"])
        return ref.value, ["reference_method=%s" % ref.method]
    raise ValueError("no automatic reference for model %r" % model_name)


def _apply_workers(args) -> None:
    _kernels.set_worker_threads(getattr(args, "workers", 1) or 1)


_CONV_HEADER = ["seed", "model", "N", "M", "estimate", "restricted", "abs_error", "effort"]


def _conv_row_cells(row: ConvergenceRow) -> list:
    return [
        row.seed,
        row.model,
        row.n_steps,
        row.n_samples,
        row.estimate,
        row.restricted,
        row.abs_error,
        row.effort,
    ]


# ---------------------------------------------------------------- commands


def _cmd_table(args, config) -> int:
    spec = [
        ("which", str, None),
        ("seed", int, 0),
        ("n_min", int, 1),
        ("n_max", int, 512),
        ("payoff_power", float, 2.0),
        ("reference", _parse_reference, "auto"),
        ("scale", _parse_scale, "desk"),
        ("cache_file", str, None),
    ]
    r = _resolve(args, config, spec)
    if r["which"] not in ("ginzburg", "cubic"):
        raise ValueError("--which must be ginzburg or cubic, got %r" % r["which"])
    _apply_workers(args)
    model = cubic() if r["which"] == "cubic" else get_model("ginzburg_landau")
    ns = _pow2_range(r["n_min"], r["n_max"])
    payoff = abs_power_payoff(r["payoff_power"])
    depth_cap = max(10, int(math.log2(ns[-1])))
    rows = coupled_sweep(model, payoff, ns, r["seed"], depth_cap=depth_cap)
    if r["reference"] == "auto":
        ref_value, ref_comments = _auto_reference(model.name, r, model)
    else:
        ref_value, ref_comments = r["reference"], ["reference_method=explicit"]
    rows = error_rows(rows, ref_value)
    comments = _comment_lines(
        "table", r, ref_comments + ["reference_value=%s" % _fmt_cell(float(ref_value))]
    )
    _emit_csv(args.out, comments, _CONV_HEADER, [_conv_row_cells(row) for row in rows])
    return 0


def _cmd_convergence(args, config) -> int:
    spec = [
        ("model", str, "ginzburg_landau"),
        ("model_param", _parse_model_params, {}),
        ("seeds", _parse_seeds, None),
        ("seed", int, 0),
        ("n_min", int, 16),
        ("n_max", int, 512),
        ("payoff_power", float, 2.0),
        ("reference", _parse_reference, "auto"),
        ("scale", _parse_scale, "desk"),
        ("cache_file", str, None),
    ]
    r = _resolve(args, config, spec)
    if r["seeds"] is None:
        r["seeds"] = [r["seed"]]
    _apply_workers(args)
    model = _build_model(r["model"], r["model_param"])
    ns = _pow2_range(r["n_min"], r["n_max"])
    payoff = abs_power_payoff(r["payoff_power"])
    depth_cap = max(10, int(math.log2(ns[-1])))
    if r["reference"] == "auto":
        ref_value, ref_comments = _auto_reference(model.name, r, model)
    else:
        ref_value, ref_comments = r["reference"], ["reference_method=explicit"]

    all_rows = []
    by_n = {n: [] for n in ns}
    for seed in r["seeds"]:
        rows = error_rows(coupled_sweep(model, payoff, ns, seed, depth_cap=depth_cap), ref_value)
        all_rows.extend(rows)
        for row in rows:
            by_n[row.n_steps].append(row.abs_error)

    # order fit on the per-N median error so one wild seed cannot tilt
    # the line
    median_rows = [
        ConvergenceRow(
            seed=-1,
            model=model.name,
            n_steps=n,
            n_samples=n * n,
            estimate=float("nan"),
            restricted=float("nan"),
            abs_error=float(np.median(by_n[n])),
            effort=float(n) ** 3,
        )
        for n in ns
    ]
    fit_comments = []
    try:
        fit = fit_order(median_rows)
        fit_comments = [
            "fit_slope=%s" % _fmt_cell(fit.slope),
            "fit_intercept=%s" % _fmt_cell(fit.intercept),
            "fit_r_squared=%s" % _fmt_cell(fit.r_squared),
            "fit_rows=%d" % fit.n_rows,
        ]
    except ValueError as exc:
        fit_comments = ["fit_unavailable=%s" % exc]

    comments = _comment_lines(
        "convergence",
        r,
        ref_comments
        + ["reference_value=%s" % _fmt_cell(float(ref_value))]
        + fit_comments,
    )
    _emit_csv(args.out, comments, _CONV_HEADER, [_conv_row_cells(row) for row in all_rows])
    return 0


def _cmd_diagnose(args, config) -> int:
    spec = [
        ("kind", str, None),
        ("model", str, None),
        ("model_param", _parse_model_params, {}),
        ("seeds", _parse_seeds, None),
        ("seed", int, 0),
        ("n_min", int, None),
        ("n_max", int, None),
        ("samples", int, 10**4),
        ("payoff_power", float, 2.0),
        ("event", str, "auto"),
        ("x0", float, 10.0),
        ("steps", int, 10),
        ("threshold", float, 1e50),
        ("scale", _parse_scale, "desk"),
    ]
    r = _resolve(args, config, spec)
    kind = r["kind"]
    if kind not in ("dominator", "moments", "omega-prob", "divergence"):
        raise ValueError(
            "--kind must be dominator|moments|omega-prob|divergence, got %r" % kind
        )
    _apply_workers(args)

    if kind == "dominator":
        model_name = r["model"] or "ginzburg_landau"
        model = _build_model(model_name, r["model_param"])
        seeds = r["seeds"] if r["seeds"] is not None else list(range(10))
        ns = _pow2_range(r["n_min"] or 16, r["n_max"] or 256)
        rows = []
        total_violations = 0
        for seed in seeds:
            for n in ns:
                k = int(math.log2(n))
                path = sample_path(seed, 1, k, model.horizon_T)
                incs = increments(path, n)
                traj = euler_path(model, n, incs)
                trace = dominator_table(traj)
                bad = check_domination(trace, traj)
                total_violations += len(bad)
                last_finite = (
                    traj.n_steps
                    if traj.first_nonfinite is None
                    else traj.first_nonfinite - 1
                )
                rows.append(
                    [seed, n, model.name, last_finite, len(bad), trace.is_member]
                )
        comments = _comment_lines("diagnose", r) + [
            "columns_note=n_max is the last step with a finite value",
            "total_violations=%d" % total_violations,
        ]
        _emit_csv(
            args.out,
            comments,
            ["seed", "N", "model", "n_max", "violations", "omega_N_member"],
            rows,
        )
        return 1 if total_violations else 0

    if kind == "moments":
        model_name = r["model"] or "cubic"
        model = _build_model(model_name, r["model_param"])
        ns = _pow2_range(r["n_min"] or 32, r["n_max"] or 512)
        rows = moment_diagnostics(
            model, r["payoff_power"], ns, r["samples"], r["seed"], event=r["event"]
        )
        empty_ns = [str(row.n_steps) for row in rows if row.event_empty]
        comments = _comment_lines("diagnose", r) + [
            "event_resolved=%s" % rows[0].event,
            "event_empty_for_N=%s" % (",".join(empty_ns) if empty_ns else "none"),
        ]
        _emit_csv(
            args.out,
            comments,
            ["model", "p", "N", "M", "restricted_moment", "finite_fraction"],
            [
                [model.name, row.power, row.n_steps, row.n_samples,
                 row.restricted_moment, row.finite_fraction]
                for row in rows
            ],
        )
        return 0

    if kind == "omega-prob":
        model_name = r["model"] or "ginzburg_landau"
        model = _build_model(model_name, r["model_param"])
        ns = _pow2_range(r["n_min"] or 32, r["n_max"] or 256)
        rows = prob_omega_complement(model, ns, r["samples"], r["seed"])
        empty_ns = [str(row.n_steps) for row in rows if row.event_empty]
        comments = _comment_lines("diagnose", r) + [
            "event_empty_for_N=%s" % (",".join(empty_ns) if empty_ns else "none"),
        ]
        _emit_csv(
            args.out,
            comments,
            ["model", "N", "M", "p_complement", "std_err"],
            [
                [model.name, row.n_steps, row.n_samples, row.p_complement, row.std_err]
                for row in rows
            ],
        )
        return 0

    # divergence: deterministic drift-only escape demo
    model_name = r["model"] or "cubic"
    model = _build_model(model_name, r["model_param"])
    demo = divergence_demo(model, r["x0"], r["steps"], r["threshold"])
    comments = _comment_lines("diagnose", r) + [
        "steps_to_exceed_empty_means=threshold never reached",
    ]
    _emit_csv(
        args.out,
        comments,
        ["model", "x0", "N", "T", "threshold", "steps_to_exceed"],
        [
            [
                model.name,
                demo.x0,
                demo.n_steps,
                model.horizon_T,
                demo.threshold,
                demo.steps_to_exceed,
            ]
        ],
    )
    return 0


def _cmd_reference(args, config) -> int:
    spec = [
        ("which", str, None),
        ("seed", int, 0),
        ("samples", int, None),
        ("riemann_points", int, 4096),
        ("rule", str, "left"),
        ("n_steps", int, None),
        ("model_param", _parse_model_params, {}),
        ("payoff_power", float, 2.0),
        ("scale", _parse_scale, "desk"),
        ("cache_file", str, None),
    ]
    r = _resolve(args, config, spec)
    if r["which"] not in ("gl", "cubic", "gbm"):
        raise ValueError("--which must be gl, cubic or gbm, got %r" % r["which"])
    _apply_workers(args)
    cache = _cache(r)
    if r["which"] == "gl":
        samples = r["samples"] or _GL_REF_SAMPLES[r["scale"]]
        ref = gl_second_moment_reference(
            n_samples=samples,
            seed=r["seed"],
            riemann_points=r["riemann_points"],
            rule=r["rule"],
            cache=cache,
        )
    elif r["which"] == "cubic":
        n_steps = r["n_steps"] or _CUBIC_REF_STEPS[r["scale"]]
        ref = cubic_reference(seed=r["seed"], n_steps=n_steps, cache=cache)
    else:
        model = _build_model("gbm", r["model_param"])
        ref = gbm_reference(model, r["payoff_power"])
    param_comments = [
        "param_%s=%s" % (key, _config_value_str(ref.parameters[key]))
        for key in sorted(ref.parameters)
    ]
    comments = _comment_lines("reference", r, param_comments)
    _emit_csv(
        args.out,
        comments,
        ["method", "value", "std_error", "seed"],
        [[ref.method, ref.value, ref.std_error, ref.seed]],
    )
    return 0


def _cmd_validate_model(args, config) -> int:
    spec = [
        ("model", str, None),
        ("model_param", _parse_model_params, {}),
        ("grid_min", float, -10.0),
        ("grid_max", float, 10.0),
        ("grid_points", int, 201),
        ("pair_samples", int, 1000),
        ("seed", int, 0),
    ]
    r = _resolve(args, config, spec)
    if not r["model"]:
        raise ValueError("--model is required (one of %s)" % sorted(BUILTIN_FACTORIES))
    model = _build_model(r["model"], r["model_param"])
    grid = np.linspace(r["grid_min"], r["grid_max"], r["grid_points"])
    report = validate_growth(model, grid, pair_samples=r["pair_samples"], seed=r["seed"])
    comments = _comment_lines("validate-model", r) + [
        "tested_range=[%s, %s]" % (report.grid_min, report.grid_max),
        "passed=%d" % (1 if report.passed else 0),
    ]
    _emit_csv(
        args.out,
        comments,
        ["kind", "which", "order", "x", "y", "lhs", "rhs"],
        [
            [v.kind, v.which, v.order, v.x, v.y, v.lhs, v.rhs]
            for v in report.violations
        ],
    )
    return 0 if report.passed else 1


# ---------------------------------------------------------------- parser


def _add_shared(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--out", default=None, help="output CSV path, '-' for stdout")
    sub.add_argument("--config", default=None, help="flat key=value config file")
    sub.add_argument(
        "--workers",
        type=int,
        default=None,
        help="compute threads for the compiled backend; never changes results",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mceuler",
        description="Monte Carlo Euler experiments for SDEs with superlinear drift",
    )
    parser.add_argument("--version", action="version", version="mceuler %s" % __version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("table", help="convergence table for one experiment model")
    p.add_argument("--which", choices=("ginzburg", "cubic"))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-min", dest="n_min", type=int, default=None)
    p.add_argument(
        "--n-max",
        dest="n_max",
        type=int,
        default=None,
        help="largest step count; values beyond 1024 are honored but expensive",
    )
    p.add_argument("--payoff-power", dest="payoff_power", type=float, default=None)
    p.add_argument(
        "--reference",
        type=_parse_reference,
        default=None,
        help="'auto' or an explicit reference value",
    )
    p.add_argument("--scale", type=_parse_scale, default=None, choices=_SCALES)
    p.add_argument("--cache-file", dest="cache_file", default=None)
    _add_shared(p)
    p.set_defaults(func=_cmd_table)

    p = subs.add_parser("convergence", help="multi-seed convergence study + order fit")
    p.add_argument("--model", choices=sorted(BUILTIN_FACTORIES), default=None)
    p.add_argument(
        "--model-param",
        dest="model_param",
        action="append",
        default=None,
        metavar="KEY=VALUE",
        help="model factory parameter; repeatable",
    )
    p.add_argument("--seeds", type=_parse_seeds, default=None, help="'0..9' or '1,4,7'")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-min", dest="n_min", type=int, default=None)
    p.add_argument("--n-max", dest="n_max", type=int, default=None)
    p.add_argument("--payoff-power", dest="payoff_power", type=float, default=None)
    p.add_argument("--reference", type=_parse_reference, default=None)
    p.add_argument("--scale", type=_parse_scale, default=None, choices=_SCALES)
    p.add_argument("--cache-file", dest="cache_file", default=None)
    _add_shared(p)
    p.set_defaults(func=_cmd_convergence)

    p = subs.add_parser("diagnose", help="dominator, moment, probability or blow-up checks")
    p.add_argument("--kind", choices=("dominator", "moments", "omega-prob", "divergence"))
    p.add_argument("--model", choices=sorted(BUILTIN_FACTORIES), default=None)
    p.add_argument(
        "--model-param", dest="model_param", action="append", default=None,
        metavar="KEY=VALUE",
    )
    p.add_argument("--seeds", type=_parse_seeds, default=None,
                   help="dominator campaign seeds, default 0..9")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n-min", dest="n_min", type=int, default=None)
    p.add_argument("--n-max", dest="n_max", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--payoff-power", dest="payoff_power", type=float, default=None)
    p.add_argument("--event", choices=("auto", "dominator", "intro"), default=None)
    p.add_argument("--x0", type=float, default=None, help="divergence start value")
    p.add_argument("--steps", type=int, default=None, help="divergence step count")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--scale", type=_parse_scale, default=None, choices=_SCALES)
    _add_shared(p)
    p.set_defaults(func=_cmd_diagnose)

    p = subs.add_parser("reference", help="compute or fetch a reference value")
    p.add_argument("--which", choices=("gl", "cubic", "gbm"))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--riemann-points", dest="riemann_points", type=int, default=None)
    p.add_argument("--rule", choices=("left", "trapezoid"), default=None)
    p.add_argument("--n-steps", dest="n_steps", type=int, default=None)
    p.add_argument(
        "--model-param", dest="model_param", action="append", default=None,
        metavar="KEY=VALUE",
    )
    p.add_argument("--payoff-power", dest="payoff_power", type=float, default=None)
    p.add_argument("--scale", type=_parse_scale, default=None, choices=_SCALES)
    p.add_argument("--cache-file", dest="cache_file", default=None)
    _add_shared(p)
    p.set_defaults(func=_cmd_reference)

    p = subs.add_parser("validate-model", help="spot-check model regularity constants")
    p.add_argument("--model", choices=sorted(BUILTIN_FACTORIES), default=None)
    p.add_argument(
        "--model-param", dest="model_param", action="append", default=None,
        metavar="KEY=VALUE",
    )
    p.add_argument("--grid-min", dest="grid_min", type=float, default=None)
    p.add_argument("--grid-max", dest="grid_max", type=float, default=None)
    p.add_argument("--grid-points", dest="grid_points", type=int, default=None)
    p.add_argument("--pair-samples", dest="pair_samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    _add_shared(p)
    p.set_defaults(func=_cmd_validate_model)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "model_param", None) is not None:
        args.model_param = _parse_model_params(",".join(args.model_param))
    try:
        config = _load_config(args.config) if args.config else {}
        return args.func(args, config)
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
