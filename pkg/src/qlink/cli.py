"""Batch command-line front end.

    qlink analytic|simulate|optimize|sweep|reproduce --config <path> --out <path>
          [--seed N] [--threads N]

All commands read a JSON RunConfig, write one CSV ResultTable with a '#'
metadata header, and are deterministic given (config, seed).  Exit codes:
0 success, 2 config error, 3 numeric/limit error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

from . import __version__
from . import cutoff as ca
from . import network as net
from . import optimize as opt
from .config import ConfigError, FIGURES, LinkSpec, RunConfig, load_config, parse_config
from .csvio import ResultTable, config_hash, write_result_table
from .engine import LinkParams, simulate_trajectories
from .quantum import FidelityCurve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


class LimitError(RuntimeError):
    """A requested computation exceeds a documented mode limit."""


def _tstar_cell(tstar: ca.Cutoff):
    return math.inf if tstar.is_infinite else tstar.finite_value


def _link_curve(link: LinkSpec) -> Optional[FidelityCurve]:
    return link.fidelity.curve() if link.fidelity is not None else None


def _metadata(config: RunConfig, seed: Optional[int] = None) -> dict[str, str]:
    meta = {
        "qlink-version": __version__,
        "mode": config.mode,
        "config-hash": config_hash(config.hash_source()),
    }
    if config.figure is not None:
        meta["figure"] = config.figure
    if seed is not None:
        meta["seed"] = str(seed)
    return meta


# ---------------------------------------------------------------------------
# analytic / sweep
# ---------------------------------------------------------------------------

def _analytic_rows(link: LinkSpec, times: Sequence[int]) -> list[tuple]:
    curve = _link_curve(link)
    rows = []
    for t in times:
        active = ca.prob_active(t, link.tstar, link.p)
        e_s = ca.expected_success_rate(t, link.tstar, link.p)
        if curve is not None:
            fid = ca.expected_fidelity_cutoff(t, link.tstar, link.p, curve)
            e_ftilde, e_f = fid.e_ftilde, fid.e_f
        else:
            e_ftilde, e_f = None, None
        rows.append((link.p, _tstar_cell(link.tstar), t, active, e_ftilde, e_f, e_s))
    return rows


ANALYTIC_COLUMNS = ["p", "tstar", "t", "prob_active", "e_ftilde", "e_f", "e_s"]
WAITING_COLUMNS = ["p", "tstar", "t_req", "e_wait", "e_wait_limit"]


def run_analytic(config: RunConfig) -> ResultTable:
    assert config.link is not None
    link = config.link
    if config.t_req and not config.times:
        table = ResultTable(columns=list(WAITING_COLUMNS), rows=[],
                            metadata=_metadata(config))
        for t_req in config.t_req:
            wait = ca.waiting_time(t_req, link.tstar, link.p)
            table.append(link.p, _tstar_cell(link.tstar), t_req,
                         wait.expectation, wait.limit)
        return table
    table = ResultTable(columns=list(ANALYTIC_COLUMNS), rows=[],
                        metadata=_metadata(config))
    table.rows.extend(_analytic_rows(link, config.times))
    return table


def run_sweep(config: RunConfig, threads: int) -> ResultTable:
    assert config.link is not None and config.sweep_field is not None
    base = config.link

    def link_for(value) -> LinkSpec:
        if config.sweep_field == "p":
            return LinkSpec(p=value, tstar=base.tstar, fidelity=base.fidelity)
        return LinkSpec(p=base.p, tstar=value, fidelity=base.fidelity)

    def sort_key(value):
        if config.sweep_field == "p":
            return (0, value)
        return (1, 0) if value.is_infinite else (0, value.finite_value)

    values = sorted(config.sweep_values, key=sort_key)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        blocks = list(pool.map(
            lambda v: _analytic_rows(link_for(v), config.times), values))
    table = ResultTable(columns=list(ANALYTIC_COLUMNS), rows=[],
                        metadata=_metadata(config))
    for block in blocks:  # deterministic: sorted by sweep value, then t
        table.rows.extend(block)
    return table


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

SIMULATE_COLUMNS = [
    "t", "prob_active_exact", "prob_active", "prob_active_se",
    "e_ftilde", "e_ftilde_se", "e_s", "e_s_se", "e_f", "e_f_se",
]


def run_simulate(config: RunConfig, seed_override: Optional[int]) -> ResultTable:
    assert config.link is not None and config.horizon is not None
    assert config.trials is not None
    seed = seed_override if seed_override is not None else config.seed
    assert seed is not None
    link = config.link
    curve = _link_curve(link) or FidelityCurve.constant(1.0)
    params = LinkParams.symbolic(link.p, curve)
    policy = ca.cutoff_policy(link.tstar)
    result = simulate_trajectories(params, policy, config.horizon,
                                   config.trials, seed)
    table = ResultTable(columns=list(SIMULATE_COLUMNS), rows=[],
                        metadata=_metadata(config, seed=seed))
    for t in range(1, config.horizon + 1):
        idx = t - 1
        table.append(
            t,
            ca.prob_active(t, link.tstar, link.p),
            result.prob_active[idx], result.prob_active_se[idx],
            result.e_ftilde[idx], result.e_ftilde_se[idx],
            result.e_s[idx], result.e_s_se[idx],
            result.e_f[idx], result.e_f_se[idx],
        )
    return table


# ---------------------------------------------------------------------------
# optimize
# ---------------------------------------------------------------------------

OPTIMIZE_COLUMNS = ["policy", "e_ftilde", "e_x", "e_f"]


def run_optimize(config: RunConfig) -> tuple[ResultTable, dict]:
    assert config.link is not None and config.horizon is not None
    link = config.link
    curve = _link_curve(link)
    assert curve is not None
    params = LinkParams.symbolic(link.p, curve)
    T = config.horizon
    if config.optimizer_mode == "full":
        if T > opt.FULL_TREE_MAX_T:
            raise LimitError(
                f"horizon {T} exceeds the full-tree cap {opt.FULL_TREE_MAX_T}; "
                f"use optimizer_mode 'reduced'")
        result = opt.backward_recursion_full(params, T)
    else:
        result = opt.backward_recursion_reduced(params, T)

    table = ResultTable(columns=list(OPTIMIZE_COLUMNS), rows=[],
                        metadata=_metadata(config))
    if result.policy is not None and result.policy.decide_state is not None:
        check = opt.evaluate_state_policy(params, result.policy, T + 1)
        table.append("optimal", result.optimal_value, check.e_x, check.e_f)
    else:
        table.append("optimal", result.optimal_value, None, None)

    greedy = opt.forward_greedy(params)
    ev = opt.evaluate_state_policy(params, greedy, T + 1)
    table.append("greedy", ev.e_ftilde, ev.e_x, ev.e_f)

    cutoffs = [ca.Cutoff(v) for v in range(T + 1)] + [ca.Cutoff(math.inf)]
    for cut in cutoffs:
        active = ca.prob_active(T + 1, cut, link.p)
        fid = ca.expected_fidelity_cutoff(T + 1, cut, link.p, curve)
        table.append(f"cutoff({cut})", fid.e_ftilde, active, fid.e_f)

    policy_dump: dict = {"horizon": T, "mode": result.mode, "actions": []}
    if result.table is not None and result.mode == "reduced":
        for (j, x, m), action in sorted(result.table.decisions.items()):
            policy_dump["actions"].append({"t": j, "x": x, "m": m, "action": action})
    return table, policy_dump


# ---------------------------------------------------------------------------
# figure reproduction
# ---------------------------------------------------------------------------

DEFAULT_TSTARS = (0, 5, 10, 35, "inf")
FIG8_CUTOFFS = (5, 15, 10, 20)


def _p_grid(n: int = 50, include_zero: bool = False) -> list[float]:
    start = 0 if include_zero else 1
    return [i / n for i in range(start, n + 1)]


def reproduce_figure(figure: str, overrides: Optional[dict] = None) -> ResultTable:
    """The exact data grids behind the paper-style figures."""
    if figure not in FIGURES:
        raise ConfigError(f"unknown figure {figure!r}")
    ov = overrides or {}
    tstars = [ca.Cutoff.parse(v) for v in ov.get("tstars", DEFAULT_TSTARS)]
    p = ov.get("p", 0.3)

    if figure == "fig4-left":
        # E[X(t)] against p at a fixed time, one curve per cutoff
        t = ov.get("t", 10)
        table = ResultTable(columns=["tstar", "t", "p", "e_x"], rows=[])
        for cut in tstars:
            for pv in _p_grid(include_zero=True):
                table.append(_tstar_cell(cut), t, pv, ca.prob_active(t, cut, pv))
        return table
    if figure == "fig4-right":
        times = range(1, ov.get("t_max", 60) + 1)
        table = ResultTable(columns=["tstar", "t", "e_x"], rows=[])
        for cut in tstars:
            for t in times:
                table.append(_tstar_cell(cut), t, ca.prob_active(t, cut, p))
        return table
    if figure == "fig5":
        times = range(1, ov.get("t_max", 100) + 1)
        table = ResultTable(columns=["tstar", "t", "e_s"], rows=[])
        for cut in tstars:
            for t in times:
                table.append(_tstar_cell(cut), t,
                             ca.expected_success_rate(t, cut, p))
        return table
    if figure == "fig7":
        t_reqs = range(0, ov.get("t_req_max", 100) + 1)
        table = ResultTable(columns=["tstar", "t_req", "e_wait"], rows=[])
        for cut in tstars:
            for t_req in t_reqs:
                table.append(_tstar_cell(cut), t_req,
                             ca.waiting_time(t_req, cut, p).expectation)
        return table

    # fig8 / fig9: four parallel links with the captioned cutoffs at t = 50
    t = ov.get("t", 50)
    cutoffs = [ca.Cutoff.parse(v) for v in ov.get("cutoffs", FIG8_CUTOFFS)]
    if figure == "fig8":
        table = ResultTable(columns=["p", "t", "e_total"], rows=[])
        for pv in _p_grid(include_zero=True):
            links = tuple(net.ParallelLinkSpec(p=pv, tstar=c) for c in cutoffs)
            edge = net.EdgeConfig(edge_id="e", links=links)
            table.append(pv, t, net.expected_flow(edge, t))
        return table
    # fig9: collective status of the same links placed on separate edges
    table = ResultTable(columns=["p", "t", "collective"], rows=[])
    for pv in _p_grid(include_zero=True):
        edges = tuple(
            net.EdgeConfig(edge_id=f"e{i}",
                           links=(net.ParallelLinkSpec(p=pv, tstar=c),))
            for i, c in enumerate(cutoffs))
        table.append(pv, t, net.collective_status(net.NetworkConfig(edges=edges), t))
    return table


def run_reproduce(config: RunConfig) -> ResultTable:
    assert config.figure is not None
    table = reproduce_figure(config.figure, config.figure_overrides)
    table.metadata = _metadata(config)
    return table


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _resolve_threads(arg: Optional[int]) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("QLINK_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"QLINK_THREADS must be an integer, got {env!r}") from exc
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlink", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("analytic", "simulate", "optimize", "sweep", "reproduce"):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="JSON run configuration")
        cmd.add_argument("--out", required=True, help="output CSV path")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--threads", type=int, default=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if config.mode != args.command:
            raise ConfigError(
                f"config mode {config.mode!r} does not match command {args.command!r}")
        threads = _resolve_threads(args.threads)
        policy_dump = None
        if config.mode == "analytic":
            table = run_analytic(config)
        elif config.mode == "simulate":
            table = run_simulate(config, args.seed)
        elif config.mode == "optimize":
            table, policy_dump = run_optimize(config)
        elif config.mode == "sweep":
            table = run_sweep(config, threads)
        else:
            table = run_reproduce(config)
    except ConfigError as exc:
        print(f"qlink: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"qlink: {exc}", file=sys.stderr)
        return EXIT_IO
    except LimitError as exc:
        print(f"qlink: limit error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, ArithmeticError) as exc:
        print(f"qlink: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    try:
        write_result_table(table, args.out)
        if policy_dump is not None:
            with open(args.out + ".policy.json", "w") as handle:
                json.dump(policy_dump, handle, indent=2, sort_keys=True)
                handle.write("\n")
    except OSError as exc:
        print(f"qlink: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
