"""Command-line front end: analyze, simulate, sweep, optimize.

Exit codes: 0 success, 1 usage error, 2 runtime/divergence, 3 I/O error.

Output files are CSV (comma separated, dot decimal, one header row).  Fields
are constructed so that quoting is never needed; in particular the lambda
column joins degree:probability pairs with ';'.  Floats are written with
full round-trip precision (repr), so CSV bodies are byte-reproducible from
(command line, seed).  Every output file is accompanied by
``<out>.manifest.json`` recording the command line, a config snapshot, the
root seed, the tool version and the wall time (the only non-reproducible
field).
"""

import argparse
import json
import math
import shlex
import sys
import time

from . import __version__
from .analysis import (
    DivergenceError,
    aoi_irsa,
    aoi_sa,
    irsa_load,
    sa_optimal_aoi,
    sa_throughput,
)
from .model import (
    Protocol,
    SystemConfig,
    format_config_text,
    format_lambda,
    load_config,
    parse_lambda,
    require_valid,
)
from .optimize import PlrCache, aoi_ratio_curves, optimal_frame_size, sweep_aoi_vs_activity
from .sim import estimate_plr, simulate_aoi_irsa, simulate_aoi_sa


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(float(value))  # plain-float repr even for numpy scalars
    return str(value)


def _row(values) -> str:
    return ",".join(_fmt(v) for v in values)


def parse_grid(spec: str, integer: bool = False):
    """Grid spec ``start:stop:count[:log]`` -> list of values."""
    parts = spec.split(":")
    if len(parts) not in (3, 4):
        raise UsageError(f"bad grid spec {spec!r}: expected start:stop:count[:log]")
    try:
        start = float(parts[0])
        stop = float(parts[1])
        count = int(parts[2])
    except ValueError as exc:
        raise UsageError(f"bad grid spec {spec!r}: {exc}") from None
    log = False
    if len(parts) == 4:
        if parts[3] != "log":
            raise UsageError(f"bad grid spec {spec!r}: trailing token must be 'log'")
        log = True
    if count < 1:
        raise UsageError(f"bad grid spec {spec!r}: count must be >= 1")
    if count == 1:
        values = [start]
    elif log:
        if start <= 0 or stop <= 0:
            raise UsageError(f"bad grid spec {spec!r}: log grid needs positive endpoints")
        ratio = (stop / start) ** (1.0 / (count - 1))
        values = [start * ratio**i for i in range(count)]
    else:
        step = (stop - start) / (count - 1)
        values = [start + step * i for i in range(count)]
    if integer:
        ints = sorted({int(round(v)) for v in values})
        if any(v < 1 for v in ints):
            raise UsageError(f"bad grid spec {spec!r}: integer grid must be >= 1")
        return ints
    return values


def _write_output(path, header, rows, manifest):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(row + "\n")
        with open(str(path) + ".manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError:
        raise


def _manifest(argv, snapshot: str, seed: int, started: float) -> dict:
    return {
        "command_line": shlex.join(["irsa-aoi"] + list(argv)),
        "config_snapshot": snapshot,
        "root_seed": seed,
        "tool_version": __version__,
        "wall_time_s": time.perf_counter() - started,
    }


def _config_from_args(args) -> SystemConfig:
    if args.config is not None:
        cfg = load_config(args.config)
        protocol = Protocol(args.protocol) if args.protocol else cfg.protocol
        n = args.n if args.n is not None else cfg.n
        m = args.m if args.m is not None else cfg.m
        pa = args.pa if args.pa is not None else cfg.pa
        lam = parse_lambda(args.lam) if args.lam else cfg.lam
    else:
        if args.protocol is None:
            raise UsageError("--protocol is required (or use --config)")
        protocol = Protocol(args.protocol)
        if args.n is None or args.pa is None:
            raise UsageError("--n and --pa are required (or use --config)")
        n, pa = args.n, args.pa
        if protocol is Protocol.SA:
            m = 1
            # an explicit non-unit lambda is a config error, not ignored input
            lam = parse_lambda(args.lam) if args.lam else parse_lambda("1:1.0")
        else:
            if args.m is None:
                raise UsageError("--m is required for protocol irsa")
            m = args.m
            lam = parse_lambda(args.lam) if args.lam else parse_lambda("3:1.0")
    cfg = SystemConfig(n=n, m=m, pa=pa, lam=lam, protocol=protocol)
    require_valid(cfg)
    return cfg


# --- analyze ----------------------------------------------------------------

_ANALYZE_HEADER = "protocol,n,m,pa,plr,throughput,frame_term,inter_update_term,wait_term,total"


def cmd_analyze(args, argv) -> int:
    protocol = Protocol(args.protocol)
    given = [name for name, val in (("plr", args.plr), ("throughput", args.throughput))
             if val is not None]
    if args.optimal:
        if protocol is not Protocol.SA:
            raise UsageError("--optimal applies to --protocol sa only")
        if given:
            raise UsageError("--optimal excludes --plr/--throughput")
        if args.n is None:
            raise UsageError("--n is required")
        pa_star, total = sa_optimal_aoi(args.n)
        s = sa_throughput(args.n, pa_star)
        row = _row(["sa", args.n, 1, pa_star, None, s, 0.5, total - 0.5, 0.0, total])
        print(_ANALYZE_HEADER)
        print(row)
        return 0
    if len(given) != 1:
        raise UsageError("exactly one of --plr or --throughput is required")
    if args.n is None:
        raise UsageError("--n is required")
    if protocol is Protocol.SA:
        if args.throughput is not None:
            s = args.throughput
            plr = None
        else:
            if args.pa is None:
                raise UsageError("--pa is required to combine sa with --plr")
            plr = args.plr
            s = (1.0 - plr) * args.n * args.pa
        total = aoi_sa(args.n, s)
        row = _row(["sa", args.n, 1, args.pa, plr, s, 0.5, total - 0.5, 0.0, total])
    else:
        if args.m is None or args.pa is None:
            raise UsageError("--m and --pa are required for protocol irsa")
        if args.throughput is not None:
            s = args.throughput
            plr = None
        else:
            plr = args.plr
            s = (1.0 - plr) * irsa_load(args.n, args.m, args.pa)
        bd = aoi_irsa(args.n, args.m, args.pa, s)
        row = _row(["irsa", args.n, args.m, args.pa, plr, s,
                    bd.frame_term, bd.inter_update_term, bd.wait_term, bd.total])
    print(_ANALYZE_HEADER)
    print(row)
    return 0


# --- simulate ---------------------------------------------------------------

_SIMULATE_HEADER = "n,m,pa,lambda,load,plr,plr_stderr,throughput,aoi_formula,aoi_sim,aoi_stderr,frames,seed"


def cmd_simulate(args, argv) -> int:
    started = time.perf_counter()
    cfg = _config_from_args(args)
    lam_s = format_lambda(cfg.lam, sep=";")
    if args.mode == "plr":
        if cfg.protocol is not Protocol.IRSA:
            raise UsageError("--mode plr requires --protocol irsa")
        if args.frames is None:
            raise UsageError("--frames is required in plr mode")
        est = estimate_plr(cfg, args.frames, args.seed)
        s = (1.0 - est.plr) * est.load
        aoi_formula = _try_formula(cfg, s)
        row = _row([cfg.n, cfg.m, cfg.pa, lam_s, est.load, est.plr, est.stderr,
                    s, aoi_formula, None, None, args.frames, args.seed])
        budget = args.frames
    else:
        if cfg.protocol is Protocol.IRSA:
            if args.frames is None:
                raise UsageError("--frames is required for irsa aoi mode")
            stats = simulate_aoi_irsa(cfg, args.frames, args.seed, args.transient)
            budget = args.frames
        else:
            if args.slots is None:
                raise UsageError("--slots is required for sa aoi mode")
            stats = simulate_aoi_sa(cfg, args.slots, args.seed, args.transient)
            budget = args.slots
        load = irsa_load(cfg.n, cfg.m, cfg.pa) if cfg.protocol is Protocol.IRSA else cfg.n * cfg.pa
        aoi_formula = _try_formula(cfg, stats.throughput)
        row = _row([cfg.n, cfg.m, cfg.pa, lam_s, load, None, None,
                    stats.throughput, aoi_formula, stats.network_aoi,
                    stats.per_node_stderr, budget, args.seed])
    manifest = _manifest(argv, format_config_text(cfg), args.seed, started)
    _write_output(args.out, _SIMULATE_HEADER, [row], manifest)
    return 0


def _try_formula(cfg: SystemConfig, s: float):
    try:
        if cfg.protocol is Protocol.SA:
            return aoi_sa(cfg.n, s)
        return aoi_irsa(cfg.n, cfg.m, cfg.pa, s).total
    except DivergenceError:
        return None


# --- sweep ------------------------------------------------------------------

_SWEEP_HEADER = "n_pa,m,load,plr,plr_stderr,throughput,aoi_formula,aoi_sim,aoi_sim_stderr,seed,flag"


def cmd_sweep(args, argv) -> int:
    started = time.perf_counter()
    protocol = Protocol(args.protocol)
    lam = parse_lambda(args.lam) if args.lam else parse_lambda("3:1.0")
    pa_grid = parse_grid(args.pa_grid)
    m = 1 if protocol is Protocol.SA else args.m
    if protocol is Protocol.IRSA and m is None:
        raise UsageError("--m is required for protocol irsa")
    points = sweep_aoi_vs_activity(
        args.n, m, lam, pa_grid, args.budget, args.seed,
        protocol=protocol, aoi_budget=args.aoi_budget,
        transient=args.transient, jobs=args.jobs,
    )
    rows = [
        _row([p.n_pa, p.m, p.load, p.plr, p.plr_stderr, p.throughput,
              p.aoi_formula, p.aoi_sim, p.aoi_sim_stderr, p.seed, p.flag])
        for p in points
    ]
    snapshot = (
        f"protocol = {protocol.value}\nn = {args.n}\nm = {m}\n"
        f"lambda = {format_lambda(lam)}\npa_grid = {args.pa_grid}\n"
        f"budget = {args.budget}\naoi_budget = {args.aoi_budget}\n"
    )
    manifest = _manifest(argv, snapshot, args.seed, started)
    _write_output(args.out, _SWEEP_HEADER, rows, manifest)
    return 0


# --- optimize ---------------------------------------------------------------

_FRAME_HEADER = "n_pa,m_star,aoi_star,grid_points,seed,flag"
_RATIO_HEADER = "n_pa,m_star,ratio_opt_vs_fixed,ratio_irsa_vs_sa,seed,flag"


def cmd_optimize(args, argv) -> int:
    started = time.perf_counter()
    lam = parse_lambda(args.lam) if args.lam else parse_lambda("3:1.0")
    pa_grid = parse_grid(args.pa_grid)
    m_grid = parse_grid(args.m_grid, integer=True)
    refine = not args.no_refine
    if args.mode == "frame":
        cache = PlrCache()
        rows = []
        for pa in pa_grid:
            res = optimal_frame_size(args.n, pa, lam, m_grid, args.budget,
                                     args.seed, cache=cache, refine=refine)
            flag = None if math.isfinite(res.aoi_star) else "diverged"
            aoi = res.aoi_star if math.isfinite(res.aoi_star) else None
            rows.append(_row([res.n_pa, res.m_star, aoi,
                              len(res.grid_evaluated), args.seed, flag]))
        header = _FRAME_HEADER
    else:
        if args.m_fixed is None:
            raise UsageError("--m-fixed is required in ratio mode")
        points = aoi_ratio_curves(args.n, lam, pa_grid, args.m_fixed, m_grid,
                                  args.budget, args.seed, refine=refine,
                                  jobs=args.jobs)
        rows = [
            _row([p.n_pa, p.m_star, p.ratio_opt_vs_fixed, p.ratio_irsa_vs_sa,
                  args.seed, p.flag])
            for p in points
        ]
        header = _RATIO_HEADER
    snapshot = (
        f"n = {args.n}\nlambda = {format_lambda(lam)}\npa_grid = {args.pa_grid}\n"
        f"m_grid = {args.m_grid}\nm_fixed = {args.m_fixed}\nbudget = {args.budget}\n"
        f"mode = {args.mode}\nrefine = {refine}\n"
    )
    manifest = _manifest(argv, snapshot, args.seed, started)
    _write_output(args.out, header, rows, manifest)
    return 0


# --- parser -----------------------------------------------------------------

DEFAULT_SEED = 20240917


def build_parser() -> _Parser:
    parser = _Parser(prog="irsa-aoi", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="evaluate the closed-form age expressions")
    pa.add_argument("--protocol", choices=["sa", "irsa"], required=True)
    pa.add_argument("--n", type=int)
    pa.add_argument("--m", type=int)
    pa.add_argument("--pa", type=float)
    pa.add_argument("--plr", type=float)
    pa.add_argument("--throughput", type=float)
    pa.add_argument("--optimal", action="store_true",
                    help="report the single-copy optimum (pa = 1/n)")
    pa.set_defaults(func=cmd_analyze)

    ps = sub.add_parser("simulate", help="run one Monte Carlo estimate")
    ps.add_argument("--mode", choices=["plr", "aoi"], required=True)
    ps.add_argument("--protocol", choices=["sa", "irsa"])
    ps.add_argument("--config", help="flat key-value config file; flags override")
    ps.add_argument("--n", type=int)
    ps.add_argument("--m", type=int)
    ps.add_argument("--pa", type=float)
    ps.add_argument("--lambda", dest="lam", help="degree distribution, e.g. 3:1.0")
    ps.add_argument("--frames", type=int)
    ps.add_argument("--slots", type=int)
    ps.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ps.add_argument("--transient", type=int, default=10)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_simulate)

    pw = sub.add_parser("sweep", help="age vs activity sweep")
    pw.add_argument("--protocol", choices=["sa", "irsa"], required=True)
    pw.add_argument("--n", type=int, required=True)
    pw.add_argument("--m", type=int)
    pw.add_argument("--lambda", dest="lam")
    pw.add_argument("--pa-grid", required=True, metavar="START:STOP:COUNT[:log]")
    pw.add_argument("--budget", type=int, default=10000,
                    help="loss-estimation frames per grid point")
    pw.add_argument("--aoi-budget", type=int,
                    help="optional direct age simulation budget per point")
    pw.add_argument("--transient", type=int, default=10)
    pw.add_argument("--seed", type=int, default=DEFAULT_SEED)
    pw.add_argument("--jobs", type=int, default=1)
    pw.add_argument("--out", required=True)
    pw.set_defaults(func=cmd_sweep)

    po = sub.add_parser("optimize", help="frame-size optimisation / age ratios")
    po.add_argument("--mode", choices=["frame", "ratio"], required=True)
    po.add_argument("--n", type=int, required=True)
    po.add_argument("--lambda", dest="lam")
    po.add_argument("--pa-grid", required=True, metavar="START:STOP:COUNT[:log]")
    po.add_argument("--m-grid", required=True, metavar="START:STOP:COUNT[:log]")
    po.add_argument("--m-fixed", type=int)
    po.add_argument("--budget", type=int, default=10000)
    po.add_argument("--no-refine", action="store_true",
                    help="skip the +-3 neighbourhood refinement of the minimiser")
    po.add_argument("--seed", type=int, default=DEFAULT_SEED)
    po.add_argument("--jobs", type=int, default=1)
    po.add_argument("--out", required=True)
    po.set_defaults(func=cmd_optimize)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, argv)
    except UsageError as exc:
        print(f"irsa-aoi: usage error: {exc}", file=sys.stderr)
        return 1
    except DivergenceError as exc:
        print(f"irsa-aoi: divergence: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"irsa-aoi: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"irsa-aoi: i/o error: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
