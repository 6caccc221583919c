"""Command-line interface: generate, certify, evaluate, sweep, fit and compare."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .energy import h_t_eval, kernel_energy, kernel_energy_offdiag, r_t_eval, riesz_energy
from .experiments import (
    FAMILIES,
    KERNELS,
    METRICS,
    SweepTable,
    TrialPlan,
    compare_report,
    fit_exponent,
    make_kernel,
    riesz_leading,
    run_sweep,
    trial_rng,
)
from .geometry import uniform_sphere
from .partition import eq_partition
from .pointsets import FIXTURES, PointFileError, fibonacci_sphere, fixture, load_points, riesz_minimize, save_points, separation
from .quality import DEFAULT_TOL, design_defect, wce_logspace, wce_sobolev

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

GEN_FAMILIES = tuple(FIXTURES) + ("cross_polytope", "simplex", "fibonacci", "uniform", "jittered", "minimizer")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _n_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad N-list {text!r}") from exc


def _config(args: argparse.Namespace) -> dict:
    skip = {"func"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _emit(payload: dict, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2, default=_json_default)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError("missing " + ", ".join("--" + m.replace("_", "-") for m in missing))


# -- subcommands ------------------------------------------------------------------

def cmd_gen(args) -> int:
    fam = args.family
    if fam in FIXTURES:
        pts = fixture(fam)
    elif fam in ("cross_polytope", "simplex"):
        _require(args, "d")
        pts = fixture(fam, args.d)
    elif fam == "fibonacci":
        _require(args, "n")
        pts = fibonacci_sphere(args.n)
    else:
        _require(args, "n")
        d = args.d or 2
        rng = trial_rng(args.seed, args.n, 0)
        if fam == "uniform":
            pts = uniform_sphere(d, args.n, rng)
        elif fam == "jittered":
            pts = eq_partition(d, args.n).sample_pointset(rng)
        else:
            start = fibonacci_sphere(args.n) if d == 2 else uniform_sphere(d, args.n, rng)
            pts = riesz_minimize(start, args.s if args.s is not None else d - 1, steps=args.steps).points
    header = json.dumps({"config": _config(args), "version": __version__}, default=_json_default)
    if args.out:
        save_points(args.out, pts, header=header)
    else:
        save_points(sys.stdout.buffer, pts, header=header)
    return EXIT_OK


def cmd_certify(args) -> int:
    pts = load_points(args.input, args.d)
    cert = design_defect(pts, args.t, args.tol)
    payload = {"config": _config(args), "version": __version__, "certificate": cert.to_dict()}
    if pts.N >= 2:
        sep = separation(pts)
        payload["separation"] = {
            "min_distance": sep.min_distance,
            "c1_hat": sep.c1_hat,
            "argmin_pair": list(sep.argmin_pair),
        }
    _emit(payload, args.out)
    return EXIT_OK


def cmd_energy(args) -> int:
    pts = load_points(args.input, args.d)
    m = args.metric
    if m == "riesz":
        _require(args, "s")
        result = riesz_energy(pts, args.s, threads=args.threads).to_dict()
    elif m == "wce-sobolev":
        _require(args, "s")
        result = wce_sobolev(pts, args.s, args.tol, threads=args.threads).to_dict()
    elif m == "wce-logspace":
        _require(args, "gamma")
        result = wce_logspace(pts, args.gamma, args.tol, threads=args.threads).to_dict()
    elif m in ("kernel", "kernel-offdiag"):
        plan = TrialPlan(
            d=pts.d, n_list=(pts.N,), metric=m, kernel=args.kernel, s=args.s, gamma=args.gamma, tol=args.tol
        )
        kern = make_kernel(plan)
        fn = kernel_energy if m == "kernel" else kernel_energy_offdiag
        result = fn(pts, kern, threads=args.threads).to_dict()
    else:
        raise UsageError(f"unknown metric {m!r}")
    _emit({"config": _config(args), "version": __version__, "result": result}, args.out)
    return EXIT_OK


def cmd_expand(args) -> int:
    _require(args, "d", "s", "t")
    xs = [float(v) for v in args.x.replace(",", " ").split()]
    h = [h_t_eval(args.d, args.s, args.bigk, args.t, x) for x in xs]
    r = [r_t_eval(args.d, args.s, args.bigk, args.t, x) if abs(x) < 1 else None for x in xs]
    _emit({"config": _config(args), "version": __version__, "x": xs, "h_t": h, "r_t": r}, args.out)
    return EXIT_OK


_PLAN_KEYS = {
    "d": ("d", int),
    "n_list": ("n_list", _n_list),
    "n-list": ("n_list", _n_list),
    "trials": ("trials", int),
    "seed": ("master_seed", int),
    "master_seed": ("master_seed", int),
    "family": ("family", str),
    "metric": ("metric", str),
    "s": ("s", float),
    "gamma": ("gamma", float),
    "t": ("t", int),
    "kernel": ("kernel", str),
    "tol": ("tol", float),
    "steps": ("minimizer_steps", int),
    "minimizer_steps": ("minimizer_steps", int),
    "manifest": ("manifest", str),
    "threads": ("threads", int),
}


def read_plan_file(path) -> dict:
    """``key = value`` lines with ``#`` comments."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _PLAN_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        name, conv = _PLAN_KEYS[key]
        out[name] = conv(value)
    return out


def read_manifest(path) -> dict:
    """``N path`` per line; relative paths resolve against the manifest's directory."""
    base = Path(path).parent
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        n, file = line.split(None, 1)
        p = Path(file)
        out[int(n)] = str(p if p.is_absolute() else base / p)
    return out


def cmd_experiment(args) -> int:
    if args.replay:
        table = SweepTable.load(args.replay)
        plan_dict = dict(table.metadata.get("plan", {}))
        if not plan_dict:
            raise UsageError(f"{args.replay} carries no plan")
    else:
        plan_dict = read_plan_file(args.plan) if args.plan else {}
        overrides = {
            "d": args.d,
            "n_list": args.n_list,
            "trials": args.trials,
            "master_seed": args.seed,
            "family": args.family,
            "metric": args.metric,
            "s": args.s,
            "gamma": args.gamma,
            "t": args.t,
            "kernel": args.kernel,
            "tol": args.tol,
            "minimizer_steps": args.steps,
            "threads": args.threads,
        }
        plan_dict.update({k: v for k, v in overrides.items() if v is not None})
        if isinstance(plan_dict.get("manifest"), str):
            plan_dict["manifest"] = read_manifest(plan_dict["manifest"])
        if args.manifest:
            plan_dict["manifest"] = read_manifest(args.manifest)
        for key in ("d", "n_list"):
            if key not in plan_dict:
                raise UsageError(f"plan needs {key}")
    plan = TrialPlan.from_dict(plan_dict)
    table = run_sweep(plan)
    if args.out:
        table.save(args.out)
        if Path(args.out).suffix != ".json":
            Path(args.out).with_suffix(".json").write_text(table.to_json(indent=2))
    else:
        sys.stdout.write(table.to_csv())
    return EXIT_OK


def _leading(args, table: SweepTable):
    if args.leading is None:
        return None
    plan = table.metadata.get("plan", {})
    s = args.s if args.s is not None else plan.get("s")
    d = args.d if args.d is not None else plan.get("d")
    if args.leading == "value":
        _require(args, "value")
        return lambda N: np.full_like(np.asarray(N, dtype=float), args.value)
    if s is None or d is None:
        raise UsageError("--leading riesz needs s and d (from flags or the table metadata)")
    return riesz_leading(s, d, per_pair=args.leading == "riesz-pair")


def cmd_fit(args) -> int:
    table = SweepTable.load(args.input)
    transform = "subtract-leading" if args.leading else "raw"
    fit = fit_exponent(
        table,
        transform,
        _leading(args, table),
        scale_power=args.scale_power,
        log_power=args.log_power,
        include_smallest=args.include_smallest,
    )
    _emit({"config": _config(args), "version": __version__, "table_metadata": table.metadata, "fit": fit.to_dict()}, args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    det = SweepTable.load(args.deterministic)
    prob = SweepTable.load(args.probabilistic)
    transform = "subtract-leading" if args.leading else "raw"
    rep = compare_report(det, prob, transform, _leading(args, det), include_smallest=args.include_smallest)
    print(rep.text())
    if args.out:
        payload = {"config": _config(args), "version": __version__, "report": rep.to_dict()}
        Path(args.out).write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")
    return EXIT_OK


# -- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spherical-energy", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write a point file")
    g.add_argument("--family", required=True, choices=GEN_FAMILIES)
    g.add_argument("--d", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--s", type=float, help="Riesz exponent for the minimizer family")
    g.add_argument("--steps", type=int, default=200)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("certify", help="design defects and separation of a point file")
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--d", type=int)
    c.add_argument("--t", type=int, required=True)
    c.add_argument("--tol", type=float, default=DEFAULT_TOL)
    c.add_argument("--out")
    c.set_defaults(func=cmd_certify)

    e = sub.add_parser("energy", help="energy or worst-case error of a point file")
    e.add_argument("--in", dest="input", required=True)
    e.add_argument("--d", type=int)
    e.add_argument("--metric", required=True, choices=("riesz", "kernel", "kernel-offdiag", "wce-sobolev", "wce-logspace"))
    e.add_argument("--kernel", choices=KERNELS, default="const")
    e.add_argument("--s", type=float)
    e.add_argument("--gamma", type=float)
    e.add_argument("--tol", type=float, default=DEFAULT_TOL)
    e.add_argument("--threads", type=int, default=1)
    e.add_argument("--out")
    e.set_defaults(func=cmd_energy)

    x = sub.add_parser("expand", help="truncated expansion h_t and its tail r_t")
    x.add_argument("--d", type=int)
    x.add_argument("--s", type=float)
    x.add_argument("--bigk", type=int)
    x.add_argument("--t", type=int)
    x.add_argument("--x", default="0")
    x.add_argument("--out")
    x.set_defaults(func=cmd_expand)

    r = sub.add_parser("experiment", help="run a seeded sweep")
    r.add_argument("--plan")
    r.add_argument("--replay", help="re-run the plan embedded in a JSON or CSV table")
    r.add_argument("--d", type=int)
    r.add_argument("--n-list", type=_n_list)
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--family", choices=FAMILIES)
    r.add_argument("--metric", choices=METRICS)
    r.add_argument("--kernel", choices=KERNELS)
    r.add_argument("--s", type=float)
    r.add_argument("--gamma", type=float)
    r.add_argument("--t", type=int)
    r.add_argument("--tol", type=float)
    r.add_argument("--steps", type=int)
    r.add_argument("--manifest")
    r.add_argument("--threads", type=int)
    r.add_argument("--out")
    r.set_defaults(func=cmd_experiment)

    for name, func, helptext in (("fit", cmd_fit, "fit a power law to a sweep"), ("compare", cmd_compare, "compare two sweeps")):
        f = sub.add_parser(name, help=helptext)
        if name == "fit":
            f.add_argument("--in", dest="input", required=True)
        else:
            f.add_argument("deterministic")
            f.add_argument("probabilistic")
        f.add_argument("--leading", choices=("riesz-half", "riesz-pair", "value"))
        f.add_argument("--value", type=float)
        f.add_argument("--s", type=float)
        f.add_argument("--d", type=int)
        f.add_argument("--include-smallest", action="store_true")
        if name == "fit":
            f.add_argument("--scale-power", type=float, default=0.0)
            f.add_argument("--log-power", type=float, default=0.0)
        f.add_argument("--out")
        f.set_defaults(func=func)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PointFileError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
