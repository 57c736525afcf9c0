"""Command line front end: ``gen``, ``solve``, ``verify`` and ``bound``.

Exit codes: 0 converged / checks passed, 1 usage or IO error, 2 iteration or
time limit, 3 infeasible stage, 4 instance too large, 5 invariant violated.
"""
from __future__ import annotations

import argparse
import csv
from dataclasses import asdict, is_dataclass
import datetime as dt
import hashlib
import json
import logging
import math
import os
from pathlib import Path
import sys
import tempfile

import numpy as np

from . import __version__
from . import instances as gen
from .approx import LipschitzViolation, load_pools_json, dumps_pools
from .ddp import (CONVERGED, INFEASIBLE, BoundParams, DynamicRelative, InvalidParams, Pools,
                  SolveConfig, SolveFailed, Static, eval_upper_bound, solve)
from .model import SUPPORT_LIMIT, ModelError, TooLarge, _path_count, load_instance, save_instance
from .oracle import GapControlViolation, InfeasibleStage

EXIT_OK, EXIT_USAGE, EXIT_LIMIT, EXIT_INFEASIBLE, EXIT_TOO_LARGE, EXIT_INVARIANT = range(6)

log = logging.getLogger("drmco")


def fmt(x) -> str:
    """Float with 17 significant digits (exact round trip)."""
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if is_dataclass(obj):
        return _jsonable(asdict(obj))
    return obj


def write_json_atomic(path: Path, data) -> None:
    """Write through a temporary file and rename, so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(data), fh, indent=1)
    os.replace(tmp, path)


def _setup_logging():
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("DDP_LOG", "error").lower(), logging.ERROR)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s", force=True)


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


# --- gen -------------------------------------------------------------------------------

_FAMILIES = {
    "inventory": gen.InventoryParams,
    "hydro": gen.HydroParams,
    "worstcase": gen.WorstCaseParams,
}


def _parse_kv(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"parameter {item!r} is not KEY=VALUE")
        k, v = item.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def cmd_gen(args) -> int:
    params = _parse_kv(args.param)
    fam = args.family
    if fam in _FAMILIES:
        cls = _FAMILIES[fam]
        params.setdefault("seed", args.seed)
        extra = {}
        if fam == "inventory":
            extra["with_recourse"] = bool(params.pop("with_recourse", not args.no_recourse))
        if fam == "hydro":
            extra["singleton"] = bool(params.pop("singleton", False))
        p = cls(**params)
        fn = {"inventory": gen.gen_inventory, "hydro": gen.gen_hydrothermal,
              "worstcase": gen.gen_worstcase}[fam]
        inst = fn(p, **extra)
        record = {"family": fam, "params": vars(p), **extra}
    elif fam == "chain":
        inst = gen.gen_pathological_chain(int(params.get("T", 5)), params.get("reg"))
        record = {"family": fam, "params": params}
    elif fam == "t2tiny":
        inst = gen.t2_tiny(params.get("ambiguity", "simplex"), params.get("reg", 5.0))
        record = {"family": fam, "params": params}
    elif fam == "random":
        inst = gen.gen_random_small(int(params.pop("seed", args.seed)), **params)
        record = {"family": fam, "params": params, "seed": args.seed}
    else:
        raise ValueError(f"unknown family {fam!r}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_instance(inst, out)
    record["seed"] = record.get("seed", args.seed)
    record["version"] = __version__
    write_json_atomic(out.with_name(out.name + ".params.json"), record)
    print(str(out))
    return EXIT_OK


# --- solve -----------------------------------------------------------------------------

def _parse_schedule(text):
    if text is None:
        return None
    kind, _, body = text.partition(":")
    if kind == "static":
        return Static([float(v) for v in body.split(",")])
    if kind == "dynamic":
        return DynamicRelative(float(body))
    raise ValueError(f"schedule must be static:d1,...,dT or dynamic:alpha, got {text!r}")


def _config(args) -> SolveConfig:
    cfg = SolveConfig(mode=args.mode, epsilon=args.eps, rel_gap=args.rel_gap,
                      gap_schedule=_parse_schedule(args.schedule),
                      max_iterations=args.max_iter, max_wall_time=args.max_time,
                      rng_seed=args.seed, threads=args.threads, adaptive_m=args.adaptive_m)
    if cfg.rel_gap is not None and args.eps_given is False:
        cfg.epsilon = None
    return cfg


def _apply_reg(inst, args):
    if args.unregularized or (args.reg is not None and args.reg == "unregularized"):
        return inst.with_reg(None)
    if args.reg is not None:
        return inst.with_reg(float(args.reg))
    return inst


def _load(args):
    inst = load_instance(args.inp)
    return _apply_reg(inst, args)


def _hash_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _manifest(args, cfg, inst_path):
    cfg_data = _jsonable(cfg)
    return {
        "command_line": sys.argv if args.argv is None else args.argv,
        "config": cfg_data,
        "config_hash": _hash_bytes(json.dumps(cfg_data, sort_keys=True).encode()),
        "instance": str(inst_path),
        "instance_hash": _hash_bytes(Path(inst_path).read_bytes()),
        "seed": args.seed,
        "version": __version__,
        "started": dt.datetime.now(dt.timezone.utc).isoformat(),
    }


class TraceWriter:
    """Appends one CSV row per iteration and flushes it immediately."""

    COLUMNS = ["iter", "stage_path", "lb", "ub", "gap", "n_eval", "wall_ms"]

    def __init__(self, path):
        self.fh = open(path, "w", newline="", encoding="utf-8")
        self.w = csv.writer(self.fh)
        self.w.writerow(self.COLUMNS)
        self.fh.flush()

    def __call__(self, rec):
        self.w.writerow([rec.iteration, "-".join(map(str, rec.stage_path)), fmt(rec.lower),
                         fmt(rec.upper), fmt(rec.gap), rec.n_eval, fmt(rec.wall * 1000.0)])
        self.fh.flush()

    def close(self):
        self.fh.close()


def _warm_pools(inst, path, check_lipschitz=True):
    pools = Pools.empty(inst)
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    load_pools_json(data, pools.under, pools.over, check_lipschitz=check_lipschitz)
    return pools


def _solution_json(sol):
    return {"x1": sol.x1, "y1": sol.y1, "lb": sol.lower_bound, "ub": sol.upper_bound,
            "n_eval": sol.n_eval, "status": sol.status}


def cmd_solve(args) -> int:
    inst = _load(args)
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json_atomic(out / "manifest.json", _manifest(args, cfg, args.inp))
    pools = _warm_pools(inst, args.warm_start) if args.warm_start else None
    trace = TraceWriter(out / "trace.csv")
    try:
        sol, slog, pools = solve(inst, cfg, pools, on_record=trace)
    except SolveFailed as exc:
        trace.close()
        write_json_atomic(out / "solution.json", {"status": INFEASIBLE, "error": str(exc.cause)})
        _err(str(exc.cause))
        return EXIT_INFEASIBLE if isinstance(exc.cause, InfeasibleStage) else EXIT_INVARIANT
    trace.close()
    write_json_atomic(out / "solution.json", _solution_json(sol))
    (out / "pools.json").write_text(dumps_pools(pools.under, pools.over), encoding="utf-8")
    print(f"status {sol.status} lb {fmt(sol.lower_bound)} ub {fmt(sol.upper_bound)} "
          f"n_eval {sol.n_eval}")
    return EXIT_OK if sol.status == CONVERGED else EXIT_LIMIT


# --- verify ----------------------------------------------------------------------------

def cmd_verify(args) -> int:
    from .verify import SandwichChecker, Violation

    inst = _load(args)
    paths = _path_count(inst, 1)
    if paths > args.support_limit:
        raise TooLarge(f"{paths} tree nodes exceed the limit {args.support_limit}")
    cfg = _config(args)
    checker = SandwichChecker(inst, n_states=args.samples, seed=args.seed)
    pools = None
    if args.warm_start:
        pools = _warm_pools(inst, args.warm_start, check_lipschitz=False)
        checker.check_pools(pools, "warm start")
    status = None
    if checker.ok:
        pools = pools or Pools.empty(inst)
        try:
            sol, _, _ = solve(inst, cfg, pools, on_record=checker.hook(pools))
            status = sol.status
            if sol.status == CONVERGED and sol.gap > (cfg.rel_gap * abs(sol.lower_bound)
                                                      if cfg.rel_gap is not None else cfg.epsilon):
                checker.violations.append(Violation("termination", "final", "gap above target"))
        except SolveFailed as exc:
            status = INFEASIBLE
            name = "gap-control" if isinstance(exc.cause, GapControlViolation) else "oracle"
            checker.violations.append(Violation(name, "solve", str(exc.cause)))
        except (GapControlViolation, LipschitzViolation) as exc:
            name = "gap-control" if isinstance(exc, GapControlViolation) else "lipschitz"
            checker.violations.append(Violation(name, "solve", str(exc)))
    report = {
        "instance": str(args.inp),
        "optimum": checker.optimum,
        "samples_per_stage": args.samples,
        "checks": checker.checks,
        "solve_status": status,
        "ok": checker.ok,
        "violations": [v.as_dict() for v in checker.violations],
    }
    out = Path(args.out)
    write_json_atomic(out / "verify.json", report)
    if checker.ok:
        print(f"ok: {checker.checks} sandwich checks passed, optimum {fmt(checker.optimum)}")
        return EXIT_OK
    for v in checker.violations:
        _err(f"invariant violated: {v.invariant} ({v.where}): {v.detail}")
    return EXIT_INVARIANT


# --- bound -----------------------------------------------------------------------------

def _floats(text, n, name):
    vals = [float(v) for v in str(text).split(",")]
    if len(vals) == 1:
        vals = vals * n
    if len(vals) != n:
        raise InvalidParams(f"--{name} needs 1 or {n} values")
    return vals


def _last_n_eval(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: trace is empty")
    return int(rows[-1]["n_eval"])


def cmd_bound(args) -> int:
    extra = {}
    if args.deltas:
        extra["deltas"] = [float(v) for v in args.deltas.split(",")]
    if args.alpha is not None:
        if args.C is None:
            raise InvalidParams("--alpha needs --C")
        extra["alpha"], extra["cost_floor"] = args.alpha, args.C
    if args.eps is not None:
        extra["epsilon"] = args.eps
    if args.inp:
        inst = _load(args)
        params = BoundParams.from_instance(inst, **extra)
    else:
        if args.T is None or args.d is None or args.M is None or args.D is None:
            raise InvalidParams("give --in or all of --T --d --M --D")
        n = args.T - 1
        params = BoundParams(args.T, [int(v) for v in _floats(args.d, n, "d")],
                             _floats(args.D, n, "D"), _floats(args.M, n, "M"), **extra)
    modes = ["seq", "nddp"] if args.mode == "both" else [args.mode]
    bounds = {m: eval_upper_bound(params, m) for m in modes}
    for m, b in bounds.items():
        print(f"{m} {fmt(b) if b != int(b) or b > 2 ** 53 else int(b)}")
    if args.trace:
        observed = _last_n_eval(args.trace)
        ok = all(observed <= b for b in bounds.values())
        print(f"observed n_eval {observed} {'<=' if ok else '>'} bound")
        return EXIT_OK if ok else EXIT_INVARIANT
    return EXIT_OK


# --- entry point -----------------------------------------------------------------------

def _add_solve_flags(p):
    p.add_argument("--in", dest="inp", required=True, help="instance JSON")
    p.add_argument("--mode", choices=["seq", "nddp"], default="seq")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--rel-gap", type=float, default=None)
    p.add_argument("--schedule", default=None, help="static:d1,...,dT or dynamic:alpha")
    p.add_argument("--reg", default=None, help="uniform M, or 'unregularized'")
    p.add_argument("--unregularized", action="store_true",
                   help="diagnostic mode with hard state copies")
    p.add_argument("--adaptive-m", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--max-iter", type=int, default=100_000)
    p.add_argument("--max-time", type=float, default=math.inf)
    p.add_argument("--warm-start", default=None, help="pools JSON from a previous run")
    p.add_argument("--out", default="out")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="drmco", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("family", choices=["inventory", "hydro", "worstcase", "chain", "t2tiny",
                                      "random"])
    g.add_argument("--param", action="append", metavar="KEY=VALUE")
    g.add_argument("--no-recourse", action="store_true", help="inventory without recourse")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="instance JSON path")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run Seq-DDP or NDDP")
    _add_solve_flags(s)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check invariants against the extensive form")
    _add_solve_flags(v)
    v.add_argument("--samples", type=int, default=50, help="random states per stage")
    v.add_argument("--support-limit", type=int, default=SUPPORT_LIMIT)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bound", help="evaluate the oracle-evaluation bound")
    b.add_argument("--in", dest="inp", default=None)
    b.add_argument("--T", type=int)
    b.add_argument("--d", help="state dimension(s), one or T-1 values")
    b.add_argument("--M", help="Lipschitz / regularization factor(s)")
    b.add_argument("--D", help="state space diameter(s)")
    b.add_argument("--eps", type=float, default=None)
    b.add_argument("--deltas", default=None, help="comma separated delta_1..delta_T")
    b.add_argument("--alpha", type=float, default=None)
    b.add_argument("--C", type=float, default=None, help="positive cost floor")
    b.add_argument("--mode", choices=["seq", "nddp", "both"], default="both")
    b.add_argument("--trace", default=None, help="trace CSV to compare against")
    b.add_argument("--reg", default=None)
    b.add_argument("--unregularized", action="store_true")
    b.set_defaults(func=cmd_bound)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    args.argv = list(argv) if argv is not None else None
    if hasattr(args, "eps") and args.command in ("solve", "verify"):
        args.eps_given = args.eps is not None
        if args.eps is None:
            args.eps = 1e-6
    try:
        return args.func(args)
    except TooLarge as exc:
        _err(str(exc))
        return EXIT_TOO_LARGE
    except LipschitzViolation as exc:
        _err(f"invariant violated: lipschitz: {exc}")
        return EXIT_INVARIANT
    except GapControlViolation as exc:
        _err(f"invariant violated: gap-control: {exc}")
        return EXIT_INVARIANT
    except InfeasibleStage as exc:
        _err(str(exc))
        return EXIT_INFEASIBLE
    except (OSError, ValueError, ModelError, KeyError) as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
