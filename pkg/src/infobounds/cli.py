"""Command-line front end: ``infobounds {measures,bound,verify,sweep}``.

Exit codes: 0 success, 1 verification failure, 2 usage or problem-file error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor

from .bounds import BOUND_IDS, BoundQuery, evaluate
from .finite import BudgetExceededError
from .measures import (
    central_moment_root,
    information_profile,
    max_information,
    maximal_leakage,
    measure_report,
    moment_root_infinity,
    mutual_information,
)
from .problems import SpecError, load_problem
from .verify import DEFAULT_DELTAS, SUITE_CHECKS, coverage_monte_carlo, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SWEEP_AXES = ("delta", "m", "alpha", "n", "beta")
SWEEP_COLUMNS = ("axis", "value", "bound_id", "epsilon", "feasible", "I", "M_m", "L", "I_max", "reason")


class UsageError(Exception):
    pass


def _num(text: str) -> float:
    v = float(text)
    if math.isnan(v):
        raise ValueError("nan is not allowed")
    return v


def _m_value(text: str) -> float:
    return math.inf if text.strip().lower() in ("inf", "infinity", "∞") else _num(text)


def _gamma_value(text: str):
    return "optimize" if text == "optimize" else _num(text)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return "" if v is None else str(v)


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_jsonable(x) for x in v]
    return v


def _emit(args, text: str):
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def _emit_report(args, obj):
    """JSON, or a two-column ``path,value`` CSV of the flattened report."""
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path", "value"])
        for path, v in _flatten(obj):
            w.writerow([path, _fmt(v)])
        _emit(args, buf.getvalue())
    else:
        _emit(args, _dump_json(obj))


def _load(args):
    spec = load_problem(args.problem)
    if args.n is not None:
        if args.n < 1:
            raise UsageError("--n must be a positive integer")
        spec = spec.with_n(args.n)
    return spec


# -- subcommands ----------------------------------------------------------


def cmd_measures(args) -> int:
    spec = _load(args)
    model = spec.build()
    report = measure_report(model).to_dict()
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["measure", "value"])
        for k, v in report.items():
            w.writerow([k, _fmt(v)])
        _emit(args, buf.getvalue())
    else:
        _emit(args, _dump_json(report))
    return EXIT_OK


def _make_query(bound_id, spec, args_or_params, n=None) -> BoundQuery:
    p = args_or_params
    m = p.get("m")
    if bound_id == "single_draw_moment" and m is not None and math.isinf(m):
        bound_id, m = "single_draw_m_inf", None
    elif m is not None and math.isinf(m):
        raise ValueError("m = inf is only defined for single_draw_moment")
    gamma = p.get("gamma")
    if bound_id == "strong_converse" and gamma is None:
        gamma = "optimize"
    return BoundQuery(
        bound_id,
        delta=p.get("delta"),
        m=m,
        alpha=p.get("alpha"),
        gamma=gamma,
        sigma=spec.problem.resolved_sigma,
        n=spec.n if n is None else n,
        zn_index=p.get("zn_index"),
    )


def cmd_bound(args) -> int:
    spec = _load(args)
    params = {"delta": args.delta, "m": args.m, "alpha": args.alpha, "gamma": args.gamma,
              "zn_index": args.zn_index}
    try:
        query = _make_query(args.bound, spec, params)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    model = spec.build()
    res = evaluate(query, model)
    if args.epsilon_scale != 1.0:
        res.epsilon *= args.epsilon_scale
        res.detail["epsilon_scale"] = args.epsilon_scale
    if spec.problem.sigma_degenerate:
        res.detail["sigma_degenerate"] = True
    _emit_report(args, res.to_dict())
    return EXIT_OK


def _parse_list(text: str, conv=_num) -> list:
    items = [s for s in (t.strip() for t in text.split(",")) if s]
    return [conv(s) for s in items]


def cmd_verify(args) -> int:
    spec = _load(args)
    checks = _parse_list(args.suite, str) if args.suite else list(SUITE_CHECKS)
    unknown = [c for c in checks if c not in SUITE_CHECKS]
    if unknown:
        raise UsageError(f"unknown check '{unknown[0]}'; choose from {', '.join(SUITE_CHECKS)}")
    deltas = _parse_list(args.delta_grid) if args.delta_grid else list(DEFAULT_DELTAS)
    if not deltas or any(not 0 < d < 1 for d in deltas):
        raise UsageError("--delta-grid values must lie in (0, 1)")

    model = None
    try:
        model = spec.build()
    except BudgetExceededError as exc:
        if not args.mc:
            raise UsageError(
                f"{exc}. Rerun with --mc --bound ID --epsilon X --samples N --seed S "
                "to estimate coverage by sampling."
            ) from None

    out = {"problem": args.problem, "n": spec.n}
    ok = True
    if model is not None:
        suite = run_suite(model, spec.problem, checks, deltas, args.epsilon_scale, args.verbose)
        out.update(suite)
        ok = suite["passed"]
    if args.mc:
        ok &= _verify_mc(args, spec, model, out)
    out["passed"] = bool(ok)
    _emit_report(args, out)
    return EXIT_OK if ok else EXIT_FAIL


def _verify_mc(args, spec, model, out) -> bool:
    if not args.bound:
        raise UsageError("--mc needs --bound")
    if model is None and args.epsilon is None:
        raise UsageError("model too large for exact evaluation: supply --epsilon")
    delta = args.delta if args.delta is not None else 0.1
    try:
        est = coverage_monte_carlo(
            spec, args.bound, args.samples, args.seed,
            epsilon=args.epsilon, exact_model=model, delta=delta, m=args.m,
            alpha=args.alpha, gamma=args.gamma, epsilon_scale=args.epsilon_scale,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    passed = est.estimate <= delta + 3.0 * est.std_error
    out["monte_carlo"] = dict(est.to_dict(), bound_id=args.bound, delta=delta, passed=passed)
    return passed


_BOUND_TOKEN = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_bound_token(token: str) -> tuple[str, dict]:
    """``"single_draw_moment(m=2)"`` -> ``("single_draw_moment", {"m": 2.0})``."""
    match = _BOUND_TOKEN.match(token)
    if not match or match.group(1) not in BOUND_IDS:
        raise UsageError(f"invalid bound id '{token}'")
    params = {}
    if match.group(2):
        for part in match.group(2).split(","):
            key, _, val = part.partition("=")
            key = key.strip()
            if key == "m":
                params["m"] = _m_value(val)
            elif key == "alpha":
                params["alpha"] = _num(val)
            elif key == "gamma":
                params["gamma"] = _gamma_value(val.strip())
            else:
                raise UsageError(f"unknown bound parameter '{key}' in '{token}'")
    return match.group(1), params


def _split_bounds(text: str) -> list[str]:
    tokens, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            tokens.append(cur)
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    tokens.append(cur)
    return [t.strip() for t in tokens if t.strip()]


def _sweep_spec(args) -> dict:
    if args.sweep:
        with open(args.sweep, encoding="utf-8") as fh:
            doc = json.load(fh)
        unknown = set(doc) - {"axis", "values", "fixed", "bounds"}
        if unknown:
            raise UsageError(f"unknown sweep field '{sorted(unknown)[0]}'")
        axis, values = doc.get("axis"), doc.get("values", [])
        fixed, bounds = dict(doc.get("fixed", {})), doc.get("bounds", [])
        values = [_m_value(v) if isinstance(v, str) else float(v) for v in values]
        if "m" in fixed and isinstance(fixed["m"], str):
            fixed["m"] = _m_value(fixed["m"])
    else:
        axis = args.axis
        values = _parse_list(args.values or "", _m_value)
        bounds = _split_bounds(args.bounds or "")
        fixed = {k: getattr(args, k) for k in ("delta", "m", "alpha", "gamma") if getattr(args, k) is not None}
    if axis not in SWEEP_AXES:
        raise UsageError(f"sweep axis must be one of {', '.join(SWEEP_AXES)}")
    if not values:
        raise UsageError("sweep values must be a nonempty list")
    if not bounds:
        raise UsageError("sweep needs at least one bound id")
    return {"axis": axis, "values": values, "fixed": fixed, "bounds": [parse_bound_token(b) for b in bounds]}


def _sweep_cell(spec, sweep, value, bound_id, bparams) -> dict:
    axis = sweep["axis"]
    row = {"axis": axis, "value": value, "bound_id": bound_id, "epsilon": None, "feasible": False,
           "I": None, "M_m": None, "L": None, "I_max": None, "reason": ""}
    params = {"delta": 0.1, "m": 2.0}
    params.update(sweep["fixed"])
    params.update(bparams)
    try:
        cell_spec = spec
        if axis == "n":
            if value != int(value) or value < 1:
                raise ValueError("n must be a positive integer")
            cell_spec = spec.with_n(int(value))
        elif axis == "beta":
            if spec.learner.kind != "gibbs":
                raise ValueError("beta axis needs a gibbs learner")
            cell_spec = spec.with_learner(beta=float(value))
        else:
            params[axis] = value
        model = cell_spec.build()
        query = _make_query(bound_id, cell_spec, params)
        res = evaluate(query, model)
    except (ValueError, BudgetExceededError) as exc:
        row["reason"] = str(exc)
        return row
    profile = information_profile(model)
    m = params.get("m")
    row.update(
        epsilon=res.epsilon,
        feasible=res.feasible,
        I=mutual_information(profile),
        M_m=moment_root_infinity(profile) if m is None or math.isinf(m) else central_moment_root(profile, m),
        L=maximal_leakage(model),
        I_max=max_information(profile),
        reason="" if res.feasible else "bound infeasible",
    )
    if bound_id == "single_draw_moment" and query.bound_id == "single_draw_m_inf":
        row["bound_id"] = "single_draw_m_inf"
    return row


def cmd_sweep(args) -> int:
    spec = _load(args)
    sweep = _sweep_spec(args)
    cells = [(v, b, p) for v in sweep["values"] for b, p in sweep["bounds"]]

    def run(cell):
        return _sweep_cell(spec, sweep, *cell)

    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(run, cells))
    else:
        rows = [run(c) for c in cells]
    if args.format == "json":
        _emit(args, _dump_json(rows))
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in SWEEP_COLUMNS])
        _emit(args, buf.getvalue())
    return EXIT_OK


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", required=True, metavar="FILE", help="problem document (JSON)")
    common.add_argument("--n", type=int, help="override the sample size in the problem file")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--out", metavar="FILE", help="write output here instead of stdout")

    params = argparse.ArgumentParser(add_help=False)
    params.add_argument("--delta", type=_num)
    params.add_argument("--m", type=_m_value, help="moment order, or 'inf'")
    params.add_argument("--alpha", type=_num)
    params.add_argument("--gamma", type=_gamma_value, help="threshold, or 'optimize'")
    params.add_argument("--epsilon-scale", type=_num, default=1.0,
                        help="multiply every epsilon (test hook; default 1)")

    parser = argparse.ArgumentParser(prog="infobounds", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measures", parents=[common], help="information measures of a problem")
    p.set_defaults(func=cmd_measures, default_format="json")

    p = sub.add_parser("bound", parents=[common, params], help="evaluate one bound")
    p.add_argument("--bound", required=True, choices=BOUND_IDS)
    p.add_argument("--zn-index", type=int, help="dataset index for data-dependent bounds")
    p.set_defaults(func=cmd_bound, default_format="json")

    p = sub.add_parser("verify", parents=[common, params], help="certify the bounds exactly")
    p.add_argument("--suite", help=f"comma list from {','.join(SUITE_CHECKS)} (default all)")
    p.add_argument("--delta-grid", help="comma list of confidence levels")
    p.add_argument("--verbose", action="store_true", help="include per-atom coverage detail")
    p.add_argument("--mc", action="store_true", help="also estimate coverage by sampling")
    p.add_argument("--bound", choices=BOUND_IDS, help="bound for --mc")
    p.add_argument("--epsilon", type=_num, help="externally supplied epsilon for --mc")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify, default_format="json")

    p = sub.add_parser("sweep", parents=[common, params], help="tabulate bounds along one axis")
    p.add_argument("--sweep", metavar="FILE", help="sweep document (JSON)")
    p.add_argument("--axis", choices=SWEEP_AXES)
    p.add_argument("--values", help="comma list of axis values ('inf' allowed for m)")
    p.add_argument("--bounds", help="comma list of bound ids, e.g. single_draw_moment(m=2)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep, default_format="csv")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"infobounds: problem file error: {exc}", file=sys.stderr)
    except BudgetExceededError as exc:
        print(f"infobounds: {exc}", file=sys.stderr)
    except UsageError as exc:
        print(f"infobounds: {exc}", file=sys.stderr)
    except (OSError, ValueError) as exc:
        print(f"infobounds: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
