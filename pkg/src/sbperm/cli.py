"""Command-line front end.

Exit codes: 0 success, 1 a verification failed (or a resource cap was hit),
2 usage or domain error. Output goes to ``--output`` or standard output;
relative output paths are placed under $SBPERM_OUTPUT_DIR when it is set.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import asymptotics as asy
from . import exact_laws as ex
from . import stick_breaking as sb
from .dist_models import GammaModel, parse_model, sample_iid
from .errors import ResourceError, SbpError
from .rng import DEFAULT_SEED, substream
from .sampler import sbp_by_definition, sbp_by_exponential_keys

OUTPUT_DIR_ENV = "SBPERM_OUTPUT_DIR"
METHODS = ("definition", "keys", "patil-taillie", "reverse", "gem")


@dataclass
class RunConfig:
    command: str
    model_spec: Optional[str] = None
    n: Optional[int] = None
    k: Optional[int] = None
    replicas: Optional[int] = None
    u: Optional[float] = None
    a: Optional[float] = None
    lam: Optional[float] = None
    eps: Optional[float] = None
    seed: int = DEFAULT_SEED
    output_path: Optional[str] = None
    format: str = "csv"


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or (isinstance(v, str) and v == ""):
        return ""
    return "%.17g" % float(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    from .verification import _jsonable

    return json.dumps(_jsonable(obj), sort_keys=True, indent=1) + "\n"


def _resolve_path(path):
    if path is None:
        return None
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _emit(text: str, path):
    path = _resolve_path(path)
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def _seed(value: str) -> int:
    if value == "random":
        return int(np.random.SeedSequence().entropy % (1 << 63))
    try:
        s = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer or 'random', got {value!r}")
    if not 0 <= s < (1 << 64):
        raise argparse.ArgumentTypeError("seed must be a 64-bit nonnegative integer")
    return s


def _pos_int(value):
    v = int(value)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return v


# -- subcommands ----------------------------------------------------------------

def _cmd_sample(args) -> int:
    cfg = RunConfig("sample", args.model, args.n, None, args.replicas, seed=args.seed,
                    output_path=args.output, format=args.format)
    rows = []
    for rep in range(cfg.replicas):
        rng = substream(cfg.seed, rep)
        src = None
        if args.method in ("definition", "keys"):
            model = parse_model(cfg.model_spec)
            x = sample_iid(model, cfg.n, rng)
            smp = (sbp_by_definition if args.method == "definition" else sbp_by_exponential_keys)(x, rng)
            vals, src = smp.values, smp.pick_order
        elif args.method in ("patil-taillie", "reverse"):
            model = parse_model(cfg.model_spec)
            if not isinstance(model, GammaModel):
                raise UsageError(f"--method {args.method} needs a gamma model, got {model.name}")
            f = sb.patil_taillie_sample if args.method == "patil-taillie" else sb.reverse_representation_sample
            vals = f(model.shape, model.rate, cfg.n, rng)
        else:
            vals = sb.gem_sample(sb.GemParams(args.alpha, args.theta), cfg.n, rng)
        for k, v in enumerate(vals, start=1):
            rows.append((rep, k, v, "" if src is None else int(src[k - 1])))
    if cfg.format == "json":
        text = _json_text({"config": asdict(cfg), "method": args.method,
                           "rows": [dict(zip(("replica", "k", "value", "source_index"), r)) for r in rows]})
    else:
        text = _csv_text(("replica", "k", "value", "source_index"), rows)
    _emit(text, cfg.output_path)
    return 0


def _grid(args):
    if args.x:
        return np.array([float(t) for t in args.x.split(",")])
    return np.linspace(args.x_min, args.x_max, args.points)


def _cmd_density(args) -> int:
    kind = args.kind
    xs = _grid(args)
    if kind == "f_nk":
        vals = [float(ex.f_nk_density(args.n, args.k, x)) for x in xs]
    else:
        model = parse_model(args.model)
        if kind == "marginal":
            if args.n is None or args.k is None:
                raise UsageError("--kind marginal needs --n and --k")
            vals = [ex.marginal_density(model, args.n, args.k, x) for x in xs]
        elif kind in ("fu", "gu"):
            if args.u is None:
                raise UsageError(f"--kind {kind} needs --u")
            law = ex.successive_law(model, args.u)
            f = law.fu_density if kind == "fu" else law.gu_density
            vals = [float(f(x)) for x in xs]
        else:
            vals = [float(model.density(x)) for x in xs]
    _emit(_csv_text(("x", "value"), zip(xs, vals)), args.output)
    return 0


def _cmd_identities(args) -> int:
    model = parse_model(args.model)
    grid = _grid(args)
    u = args.u
    law = ex.successive_law(model, u)
    integ = ex.integral_identity_residual(model, u, grid)
    ode = [ex.evolution_ode_residual(model, u, x) for x in grid] if u < 1 else []
    mf = ex.mean_function_m(model, u)
    tol = args.tol
    plus_ok = bool(ode) and max(abs(r.plus) for r in ode) < tol
    minus_ok = bool(ode) and max(abs(r.minus) for r in ode) < tol
    report = {
        "model": model.name, "u": u, "y": law.y, "mu_u": law.mu_u, "tolerance": tol,
        "integral_identity": {"residual_c_1": integ.c_one, "residual_c_u": integ.c_u, "pinned": integ.pinned(tol)},
        "evolution_ode": {
            "max_relative_residual_plus": max((abs(r.plus) for r in ode), default=None),
            "max_relative_residual_minus": max((abs(r.minus) for r in ode), default=None),
            "pinned": [s for s, ok in (("+", plus_ok), ("-", minus_ok)) if ok],
        },
        "mean_function": asdict(mf) | {"matching": mf.matching()},
    }
    _emit(_json_text(report), args.output)
    ok = len(integ.pinned(tol)) == 1 or u == 1
    if ode:
        ok = ok and (plus_ok != minus_ok)
    return 0 if ok else 1


def _cmd_limit(args) -> int:
    a, lam, kmax, eps, reps, seed = args.a, args.lam, args.kmax, args.eps, args.replicas, args.seed
    J, bounds = asy.limit_j_prefix(a, kmax, eps, reps, substream(seed, 0))
    summary = {"a": a, "lambda": lam, "kmax": kmax, "eps": eps, "replicas": reps, "seed": seed,
               "max_truncation_bound": float(bounds.max()) if bounds.size else None,
               "J_mean": [float(v) for v in J.mean(axis=0)],
               "P_J1_eq_1": float((J[:, 0] == 1).mean())}
    rows = []
    if a == 1.0:
        kmax_tab = args.table_max
        emp = np.bincount(np.minimum(J[:, 0], kmax_tab + 1), minlength=kmax_tab + 2)[1:] / reps
        for k in range(1, kmax_tab + 1):
            rows.append((k, asy.j1_pmf(k), emp[k - 1]))
        summary["j1_pmf_1"] = asy.j1_pmf(1)
    _emit(_json_text(summary), args.output)
    if args.csv:
        if not rows:
            raise UsageError("--csv table needs --a 1 (the pmf is only available there)")
        _emit(_csv_text(("k", "pmf", "empirical"), rows), args.csv)
    return 0


def _cmd_verify(args) -> int:
    from .verification import reports_to_json, run_suite

    names = [t.strip() for t in args.suite.split(",") if t.strip()]
    reports = run_suite(names, args.seed, args.budget, scale=args.scale, workers=args.threads)
    _emit(reports_to_json(reports) + "\n", args.output)
    return 0 if all(r.passed for r in reports) else 1


def constants_report() -> dict:
    mass, mean = asy.j1_moments(200)
    return {
        "prob_last_pick_is_min": asy.prob_last_pick_is_min(),
        "P_K1_eq_1": asy.k1_pmf(1),
        "P_J1_eq_1": asy.j1_pmf(1),
        "E_J1": mean,
        "J1_total_mass": mass,
        "K1_partial_expectation_N1e3": asy.k1_partial_expectation(1000),
        "K1_partial_expectation_N1e6": asy.k1_partial_expectation(10**6),
    }


def _cmd_constants(args) -> int:
    _emit(_json_text(constants_report()), args.output)
    return 0


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sbperm", description="Size-biased permutations of i.i.d. sequences.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--output", "-o", help=f"output file (default stdout; relative paths go under ${OUTPUT_DIR_ENV})")
        if seed:
            sp.add_argument("--seed", type=_seed, default=DEFAULT_SEED,
                            help=f"master seed, or 'random' (default {DEFAULT_SEED})")

    sp = sub.add_parser("sample", help="draw size-biased permutations",
                        description="Draw size-biased permutations X_n[1..n] of i.i.d. values: by the "
                                    "sequential definition, by exponential keys, by the gamma beta-break "
                                    "(Patil-Taillie) or reverse uniform-order-statistics representation, "
                                    "or GEM(alpha, theta) stick-breaking fractions.")
    sp.add_argument("--model", default="gamma:a=1,rate=1", help="source law, e.g. gamma:a=2,rate=1 or discrete:1@0.5,2@0.5")
    sp.add_argument("--n", type=_pos_int, required=True, help="sequence length (pieces for gem)")
    sp.add_argument("--method", choices=METHODS, default="keys")
    sp.add_argument("--replicas", type=_pos_int, default=1)
    sp.add_argument("--alpha", type=float, default=0.0, help="GEM alpha")
    sp.add_argument("--theta", type=float, default=1.0, help="GEM theta")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    common(sp)
    sp.set_defaults(func=_cmd_sample)

    sp = sub.add_parser("density", help="tabulate densities",
                        description="Tabulate x,value for the marginal density of the k-th size-biased pick "
                                    "X_n[k], the density f_{n,k} of the k-th largest of n uniforms, the "
                                    "successive-sampling laws F_u and G_u, or the source density.")
    sp.add_argument("--kind", choices=("marginal", "f_nk", "fu", "gu", "source"), default="marginal")
    sp.add_argument("--model", default="gamma:a=1,rate=1")
    sp.add_argument("--n", type=_pos_int)
    sp.add_argument("--k", type=_pos_int)
    sp.add_argument("--u", type=float)
    sp.add_argument("--x", help="comma-separated evaluation points")
    sp.add_argument("--x-min", type=float, default=0.05)
    sp.add_argument("--x-max", type=float, default=5.0)
    sp.add_argument("--points", type=_pos_int, default=50)
    common(sp, seed=False)
    sp.set_defaults(func=_cmd_density)

    sp = sub.add_parser("identities", help="residuals of the successive-sampling identities",
                        description="JSON residual report for the integral identity int_0^u G_s ds = c F_u "
                                    "(c = 1 and c = u), the evolution equation d/du[u f] = +/- x f / mu_u, "
                                    "and the candidates for the mean function m(u).")
    sp.add_argument("--model", default="gamma:a=1,rate=1")
    sp.add_argument("--u", type=float, required=True)
    sp.add_argument("--x", help="comma-separated grid")
    sp.add_argument("--x-min", type=float, default=0.1)
    sp.add_argument("--x-max", type=float, default=5.0)
    sp.add_argument("--points", type=_pos_int, default=12)
    sp.add_argument("--tol", type=float, default=1e-5)
    common(sp, seed=False)
    sp.set_defaults(func=_cmd_identities)

    sp = sub.add_parser("limit", help="simulate the limit coupling point process",
                        description="Simulate the Poisson coupling of the last size-biased picks and the "
                                    "smallest order statistics; report the certified permutation J and, "
                                    "for a = 1, the law of J_1 against its geometric-mixture pmf.")
    sp.add_argument("--a", type=float, default=1.0)
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--kmax", type=_pos_int, default=1)
    sp.add_argument("--eps", type=float, default=1e-6)
    sp.add_argument("--replicas", type=_pos_int, default=10_000)
    sp.add_argument("--table-max", type=_pos_int, default=10)
    sp.add_argument("--csv", help="also write a k,pmf,empirical table here")
    common(sp)
    sp.set_defaults(func=_cmd_limit)

    sp = sub.add_parser("verify", help="run the verification suite",
                        description="Run named verification tests or groups (sampler, stick, exact, "
                                    "successive, asymptotics, all) and print the JSON report list.")
    sp.add_argument("--suite", default="all")
    sp.add_argument("--budget", type=float, help="wall-clock cap in seconds")
    sp.add_argument("--scale", type=float, default=1.0, help="Monte Carlo size multiplier")
    sp.add_argument("--threads", type=_pos_int, default=1, help="worker processes")
    common(sp)
    sp.set_defaults(func=_cmd_verify)

    sp = sub.add_parser("constants", help="closing constants of the limit coupling",
                        description="P(last pick is the minimum) = P(J_1 = 1) = P(K_1 = 1), E(J_1), and "
                                    "partial expectations of K_1, by quadrature of the geometric mixtures.")
    common(sp, seed=False)
    sp.set_defaults(func=_cmd_constants)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if getattr(args, "eps", None) is not None and args.command == "limit" and not (0 < args.eps <= 1e-3):
        print("error: --eps must lie in (0, 1e-3]", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SbpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
