"""Command-line interface.

Subcommands: simulate, exact, opt, bounds, btree, sweep, plot. Every
randomized subcommand requires an explicit --seed; all primary outputs
(CSV, SVG) are byte-identical across repeated invocations with the same
flags. Output files start with comment lines recording the invocation,
seed(s) and package version.

Exit codes: 0 success, 2 bad arguments, 3 state space over the cap,
4 runtime error.
"""

from __future__ import annotations

import argparse
import math
import shlex
import sys
from concurrent.futures import ProcessPoolExecutor

from . import __version__, bounds as bounds_mod, btree as btree_mod, exact, mc, svg
from .dists import parse_dist
from .errors import StateSpaceTooLarge
from .strategies import STATELESS, StrategyKind, StrategySpec, parse_strategy


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _write_rows(out_path, argv, seeds, header, rows) -> None:
    lines = [
        f"# ballrec {shlex.join(argv)}",
        f"# seeds: {','.join(str(s) for s in seeds) if seeds else 'none'}",
        f"# version: {__version__}",
        ",".join(header),
    ]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> _Parser:
    p = _Parser(prog="ballrec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_game_flags(sp, with_strategy=True):
        if with_strategy:
            sp.add_argument("--strategy", required=True,
                            help="fullest-bin | golden-gate | random-ball | least-full | ae:<inner>")
        sp.add_argument("--dist", required=True,
                        help="uniform | skyscraper | powerlaw:<s> | file:<path>")
        sp.add_argument("-m", type=int, required=True, help="number of balls")
        sp.add_argument("-n", type=int, help="number of bins (inferred for file: dists)")

    sim = sub.add_parser("simulate", help="Monte Carlo rate estimate")
    add_game_flags(sim)
    sim.add_argument("--rounds", type=int, required=True)
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--burn-in", type=int, default=None)
    sim.add_argument("--window", type=int, default=None)
    sim.add_argument("--init", choices=mc.INITIAL_MODES, default="throw")
    sim.add_argument("--convergence-check", action="store_true")
    sim.add_argument("--ae-l-size", type=int, default=None)
    sim.add_argument("--ae-l-threshold", type=float, default=None)
    sim.add_argument("--per-bin-out", default=None, help="also write per-bin CSV here")
    sim.add_argument("--out", default=None)

    ex = sub.add_parser("exact", help="exact stationary analysis plus the optimal gain")
    add_game_flags(ex)
    ex.add_argument("--state-cap", type=int, default=exact.DEFAULT_STATE_CAP)
    ex.add_argument("--dump-pi", default=None, help="write stationary probabilities here")
    ex.add_argument("--out", default=None)

    op = sub.add_parser("opt", help="optimal average-reward policy")
    add_game_flags(op, with_strategy=False)
    op.add_argument("--state-cap", type=int, default=exact.DEFAULT_STATE_CAP)
    op.add_argument("--policy-out", default=None, help="write the state -> bin table here")
    op.add_argument("--out", default=None)

    bd = sub.add_parser("bounds", help="closed-form bounds for one game")
    add_game_flags(bd, with_strategy=False)
    bd.add_argument("--out", default=None, help="write CSV here (stdout shows a table)")

    bt = sub.add_parser("btree", help="buffered B-tree insertion simulation")
    bt.add_argument("--policy", required=True, choices=btree_mod.FLUSH_POLICIES)
    bt.add_argument("--keydist", required=True,
                    help="uniform[:lo:hi] | pareto:<alpha>[:xmin] | normal[:mu:sigma]")
    bt.add_argument("--buffer", type=int, default=2500)
    bt.add_argument("--leaf-capacity", type=int, default=160)
    bt.add_argument("--inserts", type=int, required=True)
    bt.add_argument("--window", type=int, required=True)
    bt.add_argument("--seed", type=int, required=True)
    bt.add_argument("--freeze-leaves", type=int, default=None,
                    help="fixed equal-probability leaf count; disables splits")
    bt.add_argument("--out", default=None)

    sw = sub.add_parser(
        "sweep",
        help="cartesian parameter sweep of another subcommand (one row per point)",
    )
    sw.add_argument("--range", action="append", default=[], metavar="FLAG=A:B:STEP",
                    help="numeric grid dimension (inclusive)")
    sw.add_argument("--list", action="append", default=[], metavar="FLAG=V1,V2,...",
                    help="categorical grid dimension")
    sw.add_argument("--jobs", type=int, default=None)
    sw.add_argument("--out", default=None)
    sw.add_argument("target", choices=["simulate", "exact", "opt", "bounds", "btree"])
    sw.add_argument("target_args", nargs=argparse.REMAINDER)

    pl = sub.add_parser("plot", help="render CSV columns to an SVG line chart")
    pl.add_argument("--csv", required=True)
    pl.add_argument("--x", required=True, help="x column name")
    pl.add_argument("--y", required=True, help="comma-separated y column names")
    pl.add_argument("--out", required=True)
    return p


def _make_strategy(args) -> StrategySpec:
    spec = parse_strategy(args.strategy)
    if spec.kind is StrategyKind.AGGRESSIVE_EMPTY:
        l_size = getattr(args, "ae_l_size", None)
        l_threshold = getattr(args, "ae_l_threshold", None)
        if l_size is not None or l_threshold is not None:
            spec = StrategySpec(spec.kind, inner=spec.inner,
                                l_size=l_size, l_threshold=l_threshold)
    return spec


def _game_inputs(args):
    dist = parse_dist(args.dist, args.n)
    return dist, dist.n


SIM_HEADER = ["strategy", "dist", "m", "n", "seed", "burnin", "rounds",
              "rate", "rate_ci95", "e_r2", "max_flow_residual"]


def _row_simulate(args):
    dist, n = _game_inputs(args)
    spec = _make_strategy(args)
    cfg = mc.SimConfig(
        m=args.m, n=n, dist=dist, strategy=spec, seed=args.seed,
        rounds=args.rounds, burn_in=args.burn_in, window=args.window,
        initial=args.init, convergence_check=args.convergence_check,
    )
    est = mc.run_sim(cfg)
    max_resid = max(abs(pb.flow_residual) for pb in est.per_bin)
    row = [spec.label, dist.label, args.m, n, args.seed, est.burn_in,
           args.rounds, est.rate, est.rate_ci95, est.e_r2, max_resid]
    return SIM_HEADER, [row], est


def cmd_simulate(args, argv):
    header, rows, est = _row_simulate(args)
    _write_rows(args.out, argv, [args.seed], header, rows)
    if args.per_bin_out:
        pb_rows = [[pb.bin, pb.p_i, pb.f_i, pb.r_i, pb.flow_residual]
                   for pb in est.per_bin]
        _write_rows(args.per_bin_out, argv, [args.seed],
                    ["bin", "p_i", "f_i", "R_i", "flow_residual"], pb_rows)
    return 0


EXACT_HEADER = ["m", "n", "dist", "strategy", "rate", "e_r2", "gain_opt",
                "upper_bound", "ratio_to_opt"]


def _row_exact(args):
    dist, n = _game_inputs(args)
    spec = parse_strategy(args.strategy)
    if spec.kind is StrategyKind.GOLDEN_GATE:
        an = exact.solve_golden_gate(args.m, n, dist, state_cap=args.state_cap)
    elif spec.kind in STATELESS:
        an = exact.solve_stationary(spec.kind, args.m, n, dist, state_cap=args.state_cap)
    else:
        raise UsageError("exact analysis supports stateless strategies and golden-gate")
    upper = bounds_mod.bound_report(args.m, n, dist).upper_general
    gain = ratio = None
    if all(w > 0.0 for w in dist.weights):
        gain = exact.solve_opt(args.m, n, dist, state_cap=args.state_cap).gain
        ratio = an.rate / gain
    row = [args.m, n, dist.label, spec.label, an.rate, an.e_r2, gain, upper, ratio]
    return EXACT_HEADER, [row], an


def cmd_exact(args, argv):
    header, rows, an = _row_exact(args)
    _write_rows(args.out, argv, [], header, rows)
    if args.dump_pi:
        pi_rows = [["|".join(str(c) for c in state), p]
                   for state, p in zip(an.space.states, an.pi)]
        _write_rows(args.dump_pi, argv, [], ["state", "prob"], pi_rows)
    return 0


OPT_HEADER = ["m", "n", "dist", "gain_opt", "upper_bound"]


def _row_opt(args):
    dist, n = _game_inputs(args)
    sol = exact.solve_opt(args.m, n, dist, state_cap=args.state_cap)
    upper = bounds_mod.bound_report(args.m, n, dist).upper_general
    return OPT_HEADER, [[args.m, n, dist.label, sol.gain, upper]], sol


def cmd_opt(args, argv):
    header, rows, sol = _row_opt(args)
    _write_rows(args.out, argv, [], header, rows)
    if args.policy_out:
        pol_rows = [["|".join(str(c) for c in state), int(a)]
                    for state, a in zip(sol.space.states, sol.policy)]
        _write_rows(args.policy_out, argv, [], ["state", "bin"], pol_rows)
    return 0


BOUNDS_HEADER = ["m", "n", "dist", "half_norm", "upper_general", "upper_capped",
                 "rb_lower_general", "uniform_upper", "uniform_lower_fb_gg",
                 "pairflow_ratio_uniform", "rb_uniform_upper"]


def _row_bounds(args):
    dist, n = _game_inputs(args)
    rep = bounds_mod.bound_report(args.m, n, dist)
    row = [args.m, n, dist.label, rep.half_norm, rep.upper_general,
           rep.upper_capped, rep.rb_lower_general, rep.uniform_upper,
           rep.uniform_lower_fb_gg, rep.pairflow_ratio_uniform,
           rep.rb_uniform_upper]
    return BOUNDS_HEADER, [row], rep


def cmd_bounds(args, argv):
    header, rows, rep = _row_bounds(args)
    for name, value in zip(header, rows[0]):
        sys.stdout.write(f"{name:>24}  {_fmt(value) or '-'}\n")
    if args.out:
        _write_rows(args.out, argv, [], header, rows)
    return 0


BTREE_HEADER = ["insertions", "flushes", "recycle_rate", "num_leaves",
                "max_leaf_ratio", "p95_leaf_ratio"]


def _btree_config(args) -> btree_mod.BTreeConfig:
    return btree_mod.BTreeConfig(
        policy=args.policy,
        keydist=btree_mod.parse_keydist(args.keydist),
        inserts=args.inserts,
        window=args.window,
        seed=args.seed,
        buffer_capacity=args.buffer,
        leaf_capacity=args.leaf_capacity,
        freeze_leaves=args.freeze_leaves,
    )


def cmd_btree(args, argv):
    stats = btree_mod.run_btree(_btree_config(args))
    rows = [[w.insertions, w.flushes, w.recycle_rate, w.num_leaves,
             w.max_leaf_ratio, w.p95_leaf_ratio] for w in stats]
    _write_rows(args.out, argv, [args.seed], BTREE_HEADER, rows)
    return 0


def _row_btree(args):
    """Sweep summary for a btree run: the second half of its windows pooled."""
    stats = btree_mod.run_btree(_btree_config(args))
    if not stats:
        raise UsageError("btree sweep needs at least one full window")
    tail = stats[len(stats) // 2:]
    flushes = sum(w.flushes for w in tail)
    inserts = len(tail) * args.window
    rate = inserts / flushes if flushes else math.inf
    last = stats[-1]
    row = [last.insertions, flushes, rate, last.num_leaves,
           last.max_leaf_ratio, last.p95_leaf_ratio]
    return BTREE_HEADER, [row], stats


_SWEEP_ROWS = {
    "simulate": _row_simulate,
    "exact": _row_exact,
    "opt": _row_opt,
    "bounds": _row_bounds,
    "btree": _row_btree,
}


def _parse_grid(range_specs, list_specs):
    dims = []
    for spec in range_specs:
        try:
            flag, rng = spec.split("=", 1)
            a, b, step = (float(x) for x in rng.split(":"))
        except ValueError:
            raise UsageError(f"bad --range {spec!r}; expected FLAG=A:B:STEP")
        if step <= 0:
            raise UsageError(f"--range step must be positive in {spec!r}")
        values = []
        v = a
        while v <= b + 1e-9 * step:
            values.append(int(round(v)) if float(v).is_integer() else v)
            v += step
        dims.append((flag, values))
    for spec in list_specs:
        try:
            flag, items = spec.split("=", 1)
        except ValueError:
            raise UsageError(f"bad --list {spec!r}; expected FLAG=V1,V2,...")
        dims.append((flag, items.split(",")))
    return dims


def _sweep_point(work):
    target, point_argv = work
    parser = build_parser()
    args = parser.parse_args([target] + point_argv)
    header, rows, _ = _SWEEP_ROWS[target](args)
    return header, rows


def cmd_sweep(args, argv):
    dims = _parse_grid(args.range, args.list)
    base = list(args.target_args)
    grid: list[list] = [[]]
    for _flag, values in dims:
        grid = [g + [v] for g in grid for v in values]
    if dims and not grid:
        grid = []

    def point_argv(point):
        extra = []
        for (flag, _), v in zip(dims, point):
            extra.append(f"-{flag}" if len(flag) == 1 else f"--{flag}")
            extra.append(str(v))
        return base + extra

    work = [(args.target, point_argv(p)) for p in grid] if dims else []
    if not dims:
        work = [(args.target, base)]
        grid = [[]]

    jobs = args.jobs
    if jobs is None:
        import os
        jobs = os.cpu_count() or 1
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, work))
    else:
        results = [_sweep_point(w) for w in work]

    dim_names = [flag for flag, _ in dims]
    base_header = {
        "simulate": SIM_HEADER, "exact": EXACT_HEADER, "opt": OPT_HEADER,
        "bounds": BOUNDS_HEADER, "btree": BTREE_HEADER,
    }[args.target]
    row_header = results[0][0] if results else base_header
    # Grid columns already present in the subcommand's row are not repeated.
    keep = [i for i, name in enumerate(dim_names) if name not in row_header]
    header = [dim_names[i] for i in keep] + row_header
    out_rows = []
    for point, (_h, rows) in zip(grid, results):
        for row in rows:
            out_rows.append([point[i] for i in keep] + row)
    seeds = []
    if "--seed" in base:
        seeds = [base[base.index("--seed") + 1]]
    _write_rows(args.out, argv, seeds, header, out_rows)
    return 0


def _read_csv(path):
    header = None
    columns: dict[str, list[float]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                columns = {name: [] for name in header}
                continue
            for name, cell in zip(header, line.split(",")):
                try:
                    columns[name].append(float(cell))
                except ValueError:
                    columns[name].append(float("nan"))
    if header is None:
        raise UsageError(f"{path}: no CSV header found")
    return columns


def cmd_plot(args, argv):
    columns = _read_csv(args.csv)
    y_names = args.y.split(",")
    for name in [args.x] + y_names:
        if name not in columns:
            raise UsageError(f"column {name!r} not in {args.csv}")
    xs = columns[args.x]
    series = [(name, xs, columns[name]) for name in y_names]
    chart = svg.line_chart(series, x_label=args.x,
                           y_label=y_names[0] if len(y_names) == 1 else "value")
    text = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f"<!-- ballrec {shlex.join(argv)} | version {__version__} -->\n"
        + chart
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "exact": cmd_exact,
    "opt": cmd_opt,
    "bounds": cmd_bounds,
    "btree": cmd_btree,
    "sweep": cmd_sweep,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args, argv)
    except (UsageError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except StateSpaceTooLarge as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3
    except SystemExit:
        raise
    except Exception as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 4


def entry() -> None:
    sys.exit(main())
