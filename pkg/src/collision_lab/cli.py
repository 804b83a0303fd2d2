"""Command-line front end.

Exit status: 0 success, 1 failed verification, 2 invalid input,
3 numerical or resource failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from itertools import product

from . import __version__
from . import asymptotics as asy
from . import exact_dist as ed
from . import expectations as ex
from . import measures as ms
from . import montecarlo as mc
from .configuration import Configuration, MultinomialModel, parse_rational
from .errors import CollisionLabError, DomainError, InvalidQueryError, NumericError, ResourceError

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# configuration sources
# --------------------------------------------------------------------------

def _parse_sizes(text: str) -> Configuration:
    try:
        sizes = tuple(int(v) for v in text.replace(" ", "").split(",") if v != "")
    except ValueError:
        raise DomainError(f"--sizes expects comma-separated integers, got {text!r}") from None
    return Configuration(sizes)


def _parse_multinomial(text: str) -> MultinomialModel:
    head, sep, tail = text.partition(":")
    if not sep:
        raise DomainError("--multinomial expects N:p1,p2,... with rational p_i like 1/3")
    try:
        n = int(head)
    except ValueError:
        raise DomainError(f"not an integer ball count: {head!r}") from None
    return MultinomialModel(n, tuple(parse_rational(p) for p in tail.split(",")))


def _load_file(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DomainError(f"cannot read configuration file {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DomainError(f"configuration file {path!r} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or len(doc.keys() & {"sizes", "multinomial", "classical"}) != 1:
        raise DomainError("configuration file needs exactly one of 'sizes', 'multinomial', 'classical'")
    if "sizes" in doc:
        if not isinstance(doc["sizes"], list):
            raise DomainError("'sizes' must be a list of integers")
        return Configuration(tuple(doc["sizes"]))
    if "classical" in doc:
        return Configuration.classical(_positive(doc["classical"], "classical"))
    spec = doc["multinomial"]
    if not isinstance(spec, dict) or "n" not in spec or "p" not in spec:
        raise DomainError("'multinomial' needs fields 'n' and 'p'")
    probs = spec["p"]
    if not isinstance(probs, list) or any(isinstance(p, float) for p in probs):
        raise DomainError("multinomial probabilities must be strings like \"1/3\" to stay exact")
    return MultinomialModel(_positive(spec["n"], "n"), tuple(parse_rational(p) for p in probs))


def _positive(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise DomainError(f"{name!r} must be a positive integer, got {value!r}")
    return value


def _source(args):
    if args.sizes is not None:
        return _parse_sizes(args.sizes)
    if args.config_file is not None:
        return _load_file(args.config_file)
    if args.multinomial is not None:
        return _parse_multinomial(args.multinomial)
    return Configuration.classical(args.classical)


def _fixed(source) -> Configuration:
    if isinstance(source, MultinomialModel):
        raise InvalidQueryError("this command needs a fixed configuration, not a multinomial model")
    return source


# --------------------------------------------------------------------------
# rendering
# --------------------------------------------------------------------------

def _num(x):
    """JSON rendering: floats to 15 significant digits, rationals as strings."""
    if isinstance(x, Fraction):
        exact = str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
        return {"exact": exact, "value": _num(float(x))}
    if isinstance(x, float):
        if math.isnan(x) or math.isinf(x):
            return str(x)
        return float(f"{x:.15g}")
    if isinstance(x, dict):
        return {str(k): _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    if hasattr(x, "__dataclass_fields__"):
        return {k: _num(getattr(x, k)) for k in x.__dataclass_fields__}
    if hasattr(x, "item"):
        return _num(x.item())
    if hasattr(x, "tolist"):
        return _num(x.tolist())
    return x


def _cell(x) -> str:
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    if isinstance(x, float):
        return f"{x:.15g}"
    return "" if x is None else str(x)


def _flatten(prefix: str, x, out: list):
    if isinstance(x, Fraction):
        out.append((prefix, _cell(x), _cell(float(x))))
    elif isinstance(x, dict):
        for k, v in x.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(x, (list, tuple)):
        for i, v in enumerate(x):
            _flatten(f"{prefix}[{i}]", v, out)
    elif hasattr(x, "__dataclass_fields__"):
        _flatten(prefix, {k: getattr(x, k) for k in x.__dataclass_fields__}, out)
    else:
        val = _cell(x.item() if hasattr(x, "item") else x)
        out.append((prefix, val, val))


def _write(args, argv, result: dict, table: tuple | None = None):
    """Emit the report; ``table`` is ``(header, rows)`` for per-k / per-t output."""
    meta = {"argv": list(argv), "command": args.command, "version": __version__,
            "seed": getattr(args, "seed", 0)}
    if args.format == "json":
        doc = {"request": meta, "version": __version__, "seed": meta["seed"], "result": _num(result)}
        text = json.dumps(doc, indent=2) + "\n"
    else:
        buf = io.StringIO()
        buf.write(f"# collision-lab {__version__} seed={meta['seed']} argv={json.dumps(meta['argv'])}\n")
        w = csv.writer(buf, lineterminator="\n")
        if table is not None:
            header, rows = table
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
        else:
            w.writerow(["key", "exact", "value"])
            flat: list = []
            _flatten("", result, flat)
            w.writerows(flat)
        text = buf.getvalue()
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise DomainError(f"cannot write {args.out!r}: {exc.strerror}") from None
    else:
        sys.stdout.write(text)


def _exact_flag(args):
    return None if args.exact is None else args.exact == "exact"


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _cmd_dist(args, argv):
    source = _source(args)
    r, mode = args.r, args.mode
    if isinstance(source, MultinomialModel):
        if mode == "R":
            raise InvalidQueryError("the repetition time has no exact formula for multinomial models")
        k_max = source.n if args.k_max is None else args.k_max
        fn = ed.survival_K1_multinomial if mode == "K1" else ed.survival_K2_multinomial
        probs = [fn(source, r, k) for k in range(k_max + 1)]
        is_exact = True
    else:
        table = ed.survival_table(source, r, mode, k_max=args.k_max, exact=_exact_flag(args))
        probs, is_exact = list(table.entries), table.exact
    rows = [(k, p, float(p)) for k, p in enumerate(probs)]
    result = {"mode": mode, "r": r, "exact": is_exact,
              "survival": [{"k": k, "probability": p} for k, p in enumerate(probs)]}
    _write(args, argv, result, (["k", "probability", "probability_float"], rows))


def _cmd_expect(args, argv):
    config = _fixed(_source(args))
    modes = ["K1", "K2", "R"] if args.mode == "all" else [args.mode]
    out = {}
    for mode in modes:
        if mode != "R" and config.max_size() < args.r:
            out[mode] = None
            continue
        entry = {}
        if args.method in ("exact", "both"):
            entry["exact"] = ex.expectation_exact(config, args.r, mode, exact=_exact_flag(args))
        if args.method in ("quadrature", "both"):
            entry["quadrature"] = ex.expectation_quadrature(config, args.r, mode, tol=args.tol)
        out[mode] = entry
    if all(v is None for v in out.values()):
        config.require_collisions(args.r)
    closed = ex.closed_forms(config, args.r)
    if closed is not None:
        out["closed_form"] = closed
    _write(args, argv, {"r": args.r, "n": config.n, "m": config.m, "expectations": out})


def _cmd_bounds(args, argv):
    config = _fixed(_source(args))
    stats = ex.config_statistics(config, args.r)
    result = {
        "lower": ex.bounds_lower(stats),
        "upper_majorization": ex.bounds_upper_majorization(stats, tol=args.tol),
        "upper_matched": ex.bounds_upper_matched(stats),
    }
    if stats.s_r:
        result["gap"] = ex.gap_bound(stats)
    if config.n >= 2:
        result["repetition_before_collision"] = ex.true_collision_split_bounds(config)
    _write(args, argv, {"r": args.r, "bounds": result})


def _parse_grid(text: str) -> list[float]:
    # "0,5;1,5" uses decimal commas, "0.5,1.5" decimal points
    parts = text.split(";") if ";" in text else text.split(",")
    try:
        grid = [float(v.strip().replace(",", ".")) for v in parts if v.strip()]
    except ValueError:
        raise DomainError(f"--t-grid expects comma-separated numbers, got {text!r}") from None
    if any(t < 0 for t in grid):
        raise DomainError("--t-grid values must be nonnegative")
    return grid


def _cmd_limits(args, argv):
    config = _fixed(_source(args))
    stats = ex.config_statistics(config, args.r)
    scales = asy.time_scales(stats)
    regime = asy.classify_regime(stats)
    grid = _parse_grid(args.t_grid)
    rows = []
    if regime.model is not None:
        for t in grid:
            if regime.model.variant == "Type3_discrete":
                if t != int(t):
                    continue
                t = int(t)
            rows.append((t, asy.limit_survival(regime.model, t)))
    rep_model = asy.LimitModel("Type2_repetition", args.r, stats.theta)
    rep_rows = [asy.limit_survival(rep_model, t) for t in grid]
    result = {
        "scales": {
            "collision_expectation_scale": scales["collision_scale"],
            "repetition_expectation_scale": scales["repetition_scale"],
            "collision_limit_scale_m_r^(1/r)": scales["limit_scale"],
            "collision_limit_scale_alt_m_r^((r-1)/r)": scales["limit_scale_alt"],
            "repetition_limit_scale": scales["repetition_limit_scale"],
        },
        "regime": regime.regime,
        "model": regime.model,
        "s_r": regime.s_r,
        "m_r": regime.m_r,
        "max_share": regime.max_share,
        "thresholds": regime.thresholds,
        "collision_limit_survival": [{"t": t, "survival": v} for t, v in rows],
        "repetition_limit_survival": [{"t": t, "survival": v} for t, v in zip(grid, rep_rows)],
    }
    table = (["t", "collision_limit_survival", "repetition_limit_survival"],
             [(t, dict(rows).get(t), v) for t, v in zip(grid, rep_rows)])
    _write(args, argv, result, table)


def _cmd_simulate(args, argv):
    source = _source(args)
    if isinstance(source, MultinomialModel):
        rep = mc.simulate_two_stage(source, args.r, args.mode, args.trials, args.seed)
    else:
        rep = mc.simulate_waiting_times(source, args.r, args.mode, args.trials, args.seed)
    result = {"mode": rep.mode, "r": rep.r, "trials": rep.trials, "seed": rep.seed,
              "mean": rep.mean, "stderr": rep.stderr, "extras": rep.extras,
              "empirical_survival": [{"k": k, "fraction": f} for k, f in rep.empirical_survival]}
    _write(args, argv, result, (["k", "fraction"], rep.empirical_survival)
           if args.format == "csv" else None)


def _cmd_measures(args, argv):
    config = _fixed(_source(args))
    report = ms.balance_measures(config, args.r)
    moments = ms.random_mapping_moments(config.n, config.m, args.r)
    _write(args, argv, {"r": args.r, "balance": report, "uniform_random_mapping": moments})


def _partitions(n: int, parts: int):
    def rec(left, cap, k):
        if left == 0:
            yield ()
            return
        if k == 0:
            return
        for x in range(min(left, cap), 0, -1):
            for rest in rec(left - x, x, k - 1):
                yield (x,) + rest
    yield from rec(n, n, parts)


def _cmd_verify(args, argv):
    top = 5 if args.battery == "small" else 6
    checks = failures = 0
    problems = []

    def check(ok: bool, label: str):
        nonlocal checks, failures
        checks += 1
        if not ok:
            failures += 1
            problems.append(label)

    for n in range(1, top + 1):
        for sizes in _partitions(n, 4):
            config = Configuration(sizes)
            for r, mode in product((2, 3), ("K1", "K2", "R")):
                if mode != "R" and max(sizes) < r:
                    continue
                exact = ed.survival_table(config, r, mode, k_max=n + 2, exact=True).entries
                brute = mc.brute_force_survival(config, r, mode, n + 2).entries
                check(exact == brute, f"oracle {sizes} r={r} {mode}")
            if max(sizes) >= 2:
                dist = mc.enumerate_fixed_indegree(config)
                for k in range(n + 1):
                    k1 = ed.survival_K1(config, 2, k + 1, exact=True)
                    check(dist.Z_survival(k) == k1, f"cyclic points {sizes} k={k}")
                    rho = Fraction(n - k, n) * ed.survival_K1(config, 2, k, exact=True)
                    check(dist.rho_survival(k) == rho, f"rho length {sizes} k={k}")
    hand = Configuration((2, 2))
    check(ed.survival_K1(hand, 2, 2) == Fraction(2, 3), "hand K1")
    check(ed.survival_K2(hand, 2, 2) == Fraction(3, 4), "hand K2")
    check(ed.survival_R(hand, 2, 2) == Fraction(1, 2), "hand R")
    for mode, val in (("K1", Fraction(8, 3)), ("K2", Fraction(11, 3)), ("R", Fraction(5, 2))):
        check(ex.expectation_exact(hand, 2, mode) == val, f"hand E {mode}")
    check(mc.brute_force_true_collision(hand, 2) == Fraction(1, 2), "hand true collision")
    result = {"battery": args.battery, "checks": checks, "failures": failures, "failed": problems}
    _write(args, argv, result)
    return EXIT_OK if failures == 0 else EXIT_VERIFY


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _order(text: str) -> int:
    try:
        r = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"collision order must be an integer, got {text!r}") from None
    if r < 2:
        raise argparse.ArgumentTypeError("collision order must be at least 2")
    return r


def _nonneg(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("expected a nonnegative integer")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text.replace(",", "."))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("expected a positive number")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="collision-lab",
                     description="Waiting times for first multi-collisions and repetitions in urn drawing.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, csv_default=False, config=True):
        if config:
            src = p.add_mutually_exclusive_group(required=True)
            src.add_argument("--sizes", help="comma-separated preimage sizes, e.g. 2,2,1")
            src.add_argument("--config-file", help="JSON file with 'sizes', 'multinomial' or 'classical'")
            src.add_argument("--multinomial", help="N:p1,p2,... with rational probabilities")
            src.add_argument("--classical", type=_nonneg, help="M cells holding one ball each")
            p.add_argument("--r", type=_order, default=2, help="collision order (default 2)")
        p.add_argument("--format", choices=("json", "csv"), default="csv" if csv_default else "json")
        p.add_argument("--out", help="write the report here instead of standard output")

    p = sub.add_parser("dist", help="exact survival table P(T > k)")
    common(p, csv_default=True)
    p.add_argument("--mode", choices=ed.MODES, default="K1")
    p.add_argument("--k-max", type=_nonneg)
    p.add_argument("--exact", choices=("exact", "float"), help="force the exact or float path")

    p = sub.add_parser("expect", help="expected waiting times")
    common(p)
    p.add_argument("--mode", choices=ed.MODES + ("all",), default="all")
    p.add_argument("--method", choices=("exact", "quadrature", "both"), default="exact")
    p.add_argument("--tol", type=_positive_float, default=1e-10)
    p.add_argument("--exact", choices=("exact", "float"), help="force the exact or float path")

    p = sub.add_parser("bounds", help="lower and upper bounds on the expectations")
    common(p)
    p.add_argument("--tol", type=_positive_float, default=1e-10)

    p = sub.add_parser("limits", help="time scales, regime and limit survival values")
    common(p)
    p.add_argument("--t-grid", default="0,0.5,1,1.5,2,3",
                   help="comma-separated t values; separate with ';' to use decimal commas")

    p = sub.add_parser("simulate", help="Monte Carlo simulation")
    common(p)
    p.add_argument("--mode", choices=ed.MODES, default="K1")
    p.add_argument("--trials", type=_nonneg, default=10_000)
    p.add_argument("--seed", type=_nonneg, default=0)

    p = sub.add_parser("measures", help="balance measures of a configuration")
    common(p)

    p = sub.add_parser("verify", help="cross-check exact formulas against exhaustive enumeration")
    common(p, config=False)
    p.add_argument("--battery", choices=("small", "full"), default="small")
    return parser


_COMMANDS = {
    "dist": _cmd_dist,
    "expect": _cmd_expect,
    "bounds": _cmd_bounds,
    "limits": _cmd_limits,
    "simulate": _cmd_simulate,
    "measures": _cmd_measures,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "classical", None) == 0:
            parser.error("--classical needs at least one cell")
    except SystemExit as exc:
        # usage errors, --help and --version end here
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    try:
        status = _COMMANDS[args.command](args, argv)
    except (NumericError, ResourceError) as exc:
        print(f"collision-lab: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, InvalidQueryError, CollisionLabError) as exc:
        print(f"collision-lab: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK if status is None else status


if __name__ == "__main__":
    sys.exit(main())
