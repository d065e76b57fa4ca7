"""Command-line interface.

Subcommands:

* ``sare``         solve the gain equation for the configured model
* ``graph-check``  topology verdict, partition, and spectral diagnostics
* ``run``          integrate one configured experiment and write artifacts
* ``sweep``        re-run an experiment over a list of values of one field

Exit codes: 0 success, 1 configuration error, 2 gain-equation failure,
3 topology or protocol validation failure, 4 blow-up in at least one
path (outputs written so far are kept and inventoried).
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np

from .config import parse_config
from .errors import ConfigInvalid, ConsensimError, NotStabilizable
from .graph_topology import build_laplacian, spectral_diagnostics
from .protocol import DIRECTED_VARIANTS
from .riccati import solve_sare
from .runner import (
    DEFAULT_THRESHOLD_RATIO,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_SARE,
    EXIT_TOPOLOGY,
    FMT,
    RunResult,
    run_experiment,
    set_config_value,
    topology_summary,
)


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _matrix_lines(name: str, mat: np.ndarray) -> str:
    mat = np.atleast_2d(mat)
    body = "\n".join("  " + "  ".join("%.12g" % v for v in row) for row in mat)
    return f"{name}:\n{body}"


def cmd_sare(args) -> int:
    cfg = parse_config(args.config, require=("model",))
    try:
        sol = solve_sare(cfg.model)
    except NotStabilizable as exc:
        print(f"gain equation not solvable: {exc}", file=sys.stderr)
        return EXIT_SARE
    print(_matrix_lines("P", sol.P))
    print(_matrix_lines("K", sol.K))
    print(_matrix_lines("Gamma", sol.Gamma))
    print(f"residual: {sol.residual:.6e}")
    print(f"lambda_max(P): {sol.lambda_max_P:.12g}")
    print(f"iterations: {sol.iterations}")
    return EXIT_OK


def cmd_graph_check(args) -> int:
    cfg = parse_config(args.config, require=("graph", "protocol"))
    summary = topology_summary(cfg.graph)
    print(f"spanning tree: {summary['spanning_tree']}")
    if summary["spanning_tree"]:
        print(f"leaders: {summary['leaders']}")
        print(f"followers: {summary['followers']}")
        print("r: " + "  ".join("%.12g" % v for v in summary["r"]))
        print("s: " + "  ".join("%.12g" % v for v in summary["s"]))
        for key in ("lambda2_L11_tilde", "lambda1_L22_tilde", "sigma_max_SL21"):
            if summary.get(key) is not None:
                print(f"{key}: {summary[key]:.12g}")
    if cfg.graph.is_undirected:
        fiedler = spectral_diagnostics(build_laplacian(cfg.graph)).lambda2_undirected
        print(f"lambda2_undirected: {fiedler:.12g}")

    if cfg.protocol.variant in DIRECTED_VARIANTS:
        ok = summary["spanning_tree"]
        requirement = "directed spanning tree"
    else:
        ok = cfg.graph.is_undirected and summary.get("spanning_tree", False)
        requirement = "connected undirected graph"
    print(f"requirement ({requirement}): {'satisfied' if ok else 'NOT satisfied'}")
    return EXIT_OK if ok else EXIT_TOPOLOGY


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    result = run_experiment(
        cfg,
        out_dir=args.out,
        threads=args.threads,
        force=args.force,
        emit_plots=args.emit_plots,
    )
    _report(result)
    return result.exit_code


def cmd_sweep(args) -> int:
    raw = json.loads(Path(args.config).read_text())
    parse_config(raw)  # validate the base configuration up front
    values = [v for v in (t.strip() for t in args.values.split(",")) if v]
    if not values:
        print("sweep: empty value list", file=sys.stderr)
        return EXIT_CONFIG
    leaf = args.key.split(".")[-1]
    out_base = Path(args.out) if args.out else Path(raw["output"]["directory"])

    rows = []
    worst = EXIT_OK
    for token in values:
        value = json.loads(token)
        data = copy.deepcopy(raw)
        try:
            set_config_value(data, args.key, value)
            cfg = parse_config(data)
        except (KeyError, ValueError, ConfigInvalid) as exc:
            print(f"sweep {args.key}={token}: {exc}", file=sys.stderr)
            worst = worst or EXIT_CONFIG
            if not args.keep_going:
                return worst
            continue
        sub_dir = out_base / f"{leaf}_{value:g}"
        result = run_experiment(
            cfg,
            out_dir=sub_dir,
            threads=args.threads,
            force=args.force,
            emit_plots=args.emit_plots,
        )
        _report(result, prefix=f"[{args.key}={token}] ")
        if result.exit_code == EXIT_OK:
            analysis = result.manifest["analysis"]
            fit = analysis["rate_fit"] or {}
            rows.append(
                [
                    value,
                    analysis["time_to_threshold"],
                    fit.get("delta_hat", float("nan")),
                    fit.get("r_squared", float("nan")),
                ]
            )
        else:
            worst = worst or result.exit_code
            if not args.keep_going:
                break

    out_base.mkdir(parents=True, exist_ok=True)
    with (out_base / "comparison.csv").open("w") as fh:
        fh.write("value,time_to_threshold,delta_hat,r_squared\n")
        for row in rows:
            fh.write(",".join(FMT % v for v in row) + "\n")
    print(f"comparison written to {out_base / 'comparison.csv'} "
          f"(threshold ratio {DEFAULT_THRESHOLD_RATIO:g})")
    return worst


def _report(result: RunResult, prefix: str = "") -> None:
    if result.message:
        print(prefix + result.message)
    if result.out_dir is not None:
        print(f"{prefix}artifacts in {result.out_dir}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="consensim", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=False):
        p.add_argument("--config", required=True, help="path to the JSON configuration")
        if needs_out:
            p.add_argument("--out", default=None, help="output directory (overrides config)")
            p.add_argument("--threads", type=int, default=1, help="path-level worker threads")
            p.add_argument("--force", action="store_true",
                           help="run despite hard validation failures")
            p.add_argument("--emit-plots", action="store_true",
                           help="also write simple line plot images")

    p = sub.add_parser("sare", help="solve the gain equation and print P, K, Gamma")
    common(p)
    p.set_defaults(func=cmd_sare)

    p = sub.add_parser("graph-check", help="topology verdict and diagnostics")
    common(p)
    p.set_defaults(func=cmd_graph_check)

    p = sub.add_parser("run", help="run one configured experiment")
    common(p, needs_out=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="re-run over a list of values of one field")
    common(p, needs_out=True)
    p.add_argument("--key", required=True, help="dotted field, e.g. protocol.gamma")
    p.add_argument("--values", required=True, help="comma-separated list, e.g. 0,0.5,1")
    p.add_argument("--keep-going", action="store_true",
                   help="continue the sweep past a failing value")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"configuration error: invalid JSON at line {exc.lineno}: {exc.msg}",
              file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConsensimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
