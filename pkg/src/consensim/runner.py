"""Experiment orchestration and file emission.

A run solves the gain equation, validates the protocol against the
topology, integrates the ensemble, writes the CSV artifacts, and finally
writes a manifest (resolved configuration echo, gain matrices, validation
report, seed provenance, and a digest inventory of every file written).
The manifest is always written last, after everything it references
exists.  All numeric output uses 17 significant digits so values
round-trip losslessly.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .analysis import fit_exponential_rate, gain_convergence, input_sup, ms_curves, time_to_threshold
from .config import ExperimentConfig
from .errors import NonpositiveData, NotStabilizable
from .graph_topology import (
    build_laplacian,
    decompose_leader_follower,
    has_spanning_tree,
    spectral_diagnostics,
)
from .protocol import validate
from .riccati import sare_residual, solve_sare
from .sde_sim import X0_STREAM, SimConfig, run_ensemble

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SARE = 2
EXIT_TOPOLOGY = 3
EXIT_BLOWUP = 4

DEFAULT_THRESHOLD_RATIO = 1e-2
RATE_WINDOW = (0.2, 0.8)  # fractions of the horizon

FMT = "%.17g"


@dataclass
class RunResult:
    exit_code: int
    out_dir: Path | None = None
    manifest: dict | None = None
    message: str = ""


def _fmt_row(values) -> str:
    return ",".join(FMT % v for v in values)


def _write_csv(path: Path, header: str, rows) -> None:
    with path.open("w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(_fmt_row(row) + "\n")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def _plain(obj):
    """Recursively convert numpy scalars and arrays for JSON emission."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def trajectory_header(N: int, n: int, m: int) -> str:
    cols = ["t"]
    cols += [f"x_{i}_{j}" for i in range(1, N + 1) for j in range(1, n + 1)]
    cols += [f"c_{i}" for i in range(1, N + 1)]
    cols += [f"u_{i}_{j}" for i in range(1, N + 1) for j in range(1, m + 1)]
    return ",".join(cols)


def write_trajectory_csv(path: Path, traj) -> None:
    samples, N, n = traj.states.shape
    m = traj.inputs.shape[2]
    rows = np.column_stack(
        [
            traj.times,
            traj.states.reshape(samples, N * n),
            traj.gains,
            traj.inputs.reshape(samples, N * m),
        ]
    )
    _write_csv(path, trajectory_header(N, n, m), rows)


def ms_curves_header(N: int) -> str:
    cols = ["t"]
    cols += [f"ms_err_{i}" for i in range(2, N + 1)]
    cols += ["ms_theta"]
    cols += [f"se_{i}" for i in range(2, N + 1)]
    return ",".join(cols)


def write_ms_curves_csv(path: Path, curves) -> None:
    N = len(curves.agents) + 1
    rows = np.column_stack(
        [curves.times, curves.pair_curves.T, curves.ms_theta, curves.pair_se.T]
    )
    _write_csv(path, ms_curves_header(N), rows)


def topology_summary(graph) -> dict:
    """Spanning-tree verdict, partition, and spectral numbers for reports."""
    summary: dict = {"spanning_tree": has_spanning_tree(graph)}
    if summary["spanning_tree"]:
        dec = decompose_leader_follower(graph)
        diag = spectral_diagnostics(dec)
        summary.update(
            {
                "leaders": [i + 1 for i in dec.leader_indices],
                "followers": [i + 1 for i in dec.follower_indices],
                "r": dec.r.tolist(),
                "s": dec.s.tolist(),
                "lambda2_L11_tilde": diag.lambda2_L11_tilde,
                "lambda1_L22_tilde": diag.lambda1_L22_tilde,
                "sigma_max_SL21": diag.sigma_max_SL21,
            }
        )
    if graph.is_undirected:
        lap = build_laplacian(graph)
        summary["lambda2_undirected"] = spectral_diagnostics(lap).lambda2_undirected
    return summary


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: str | Path | None = None,
    threads: int = 1,
    force: bool = False,
    emit_plots: bool = False,
    echo=print,
) -> RunResult:
    """Execute one configured experiment end to end."""
    started = time.perf_counter()
    out = Path(out_dir) if out_dir is not None else Path(cfg.output.directory)

    try:
        sol = solve_sare(cfg.model)
    except NotStabilizable as exc:
        return RunResult(EXIT_SARE, message=f"gain equation not solvable: {exc}")

    report = validate(cfg.protocol, sol, cfg.graph)
    echo(report.render())
    overridden = False
    if not report.ok:
        if not force:
            failures = "; ".join(c.name for c in report.hard_failures)
            return RunResult(
                EXIT_TOPOLOGY,
                message=f"validation failed ({failures}); use --force to run anyway",
            )
        overridden = True
        echo("validation failures overridden, proceeding")

    x0 = cfg.resolve_x0()
    sim = SimConfig(
        model=cfg.model,
        graph=cfg.graph,
        spec=cfg.protocol,
        sol=sol,
        h=cfg.simulation.h,
        T=cfg.simulation.T,
        output_stride=cfg.simulation.output_stride,
        master_seed=cfg.simulation.master_seed,
        x0=x0,
        blowup_threshold=cfg.simulation.blowup_threshold,
    )
    ensemble = run_ensemble(sim, cfg.simulation.M, threads=threads)
    blowups = [
        {"path": t.path_index, "reason": t.reason}
        for t in ensemble
        if t.terminated_early
    ]

    out.mkdir(parents=True, exist_ok=True)
    inventory: list[Path] = []
    kinds = cfg.output.files

    if "trajectories" in kinds:
        for p in cfg.output.trajectory_paths:
            path = out / f"trajectory_{p:03d}.csv"
            write_trajectory_csv(path, ensemble[p])
            inventory.append(path)

    curves = None
    fit = None
    t_thresh = float("nan")
    if not blowups:
        curves = ms_curves(ensemble)
        if "ms_curves" in kinds:
            path = out / "ms_curves.csv"
            write_ms_curves_csv(path, curves)
            inventory.append(path)
        window = (RATE_WINDOW[0] * sim.T, RATE_WINDOW[1] * sim.T)
        try:
            fit = fit_exponential_rate(
                curves.times, curves.ms_theta, window,
                theory_delta=1.0 / sol.lambda_max_P,
            )
        except NonpositiveData:
            fit = None
        if fit is not None and "rate_fit" in kinds:
            path = out / "rate_fit.csv"
            _write_csv(
                path,
                "delta_hat,window_lo,window_hi,r_squared,theory_delta",
                [[fit.delta_hat, fit.window[0], fit.window[1], fit.r_squared, fit.theory_delta]],
            )
            inventory.append(path)
        t_thresh = time_to_threshold(
            curves.times, curves.ms_theta, DEFAULT_THRESHOLD_RATIO * curves.ms_theta[0]
        )
        if "gains" in kinds:
            path = out / "gains.csv"
            finals, flags = zip(*(gain_convergence(t) for t in ensemble))
            N = cfg.model.N
            header = (
                "path,"
                + ",".join(f"c_final_{i}" for i in range(1, N + 1))
                + ","
                + ",".join(f"plateau_{i}" for i in range(1, N + 1))
            )
            rows = [
                [p, *finals[p], *map(float, flags[p])] for p in range(len(ensemble))
            ]
            _write_csv(path, header, rows)
            inventory.append(path)
        if "inputs" in kinds:
            path = out / "inputs.csv"
            sups, argmaxes = zip(*(input_sup(t) for t in ensemble))
            N = cfg.model.N
            header = (
                "path,"
                + ",".join(f"sup_u_{i}" for i in range(1, N + 1))
                + ","
                + ",".join(f"argmax_t_{i}" for i in range(1, N + 1))
            )
            rows = [[p, *sups[p], *argmaxes[p]] for p in range(len(ensemble))]
            _write_csv(path, header, rows)
            inventory.append(path)
    else:
        echo(f"{len(blowups)} of {len(ensemble)} paths blew up; "
             "ensemble statistics skipped, per-path outputs kept")

    if emit_plots and curves is not None:
        inventory.append(_emit_plot(out, curves))

    manifest = {
        "version": __version__,
        "resolved_config": cfg.to_dict(resolved_x0=x0),
        "riccati": {
            "P": sol.P.tolist(),
            "K": sol.K.tolist(),
            "Gamma": sol.Gamma.tolist(),
            "residual": sol.residual,
            "lambda_max_P": sol.lambda_max_P,
            "iterations": sol.iterations,
        },
        "topology": topology_summary(cfg.graph),
        "validation": {
            "ok": report.ok,
            "overridden": overridden,
            "checks": [
                {
                    "name": c.name,
                    "passed": c.passed,
                    "severity": c.severity,
                    "detail": c.detail,
                }
                for c in report.checks
            ],
        },
        "seed_provenance": {
            "master_seed": cfg.simulation.master_seed,
            "path_stream": "philox64 key (master_seed, path_index)",
            "x0_stream_constant": X0_STREAM,
            "x0_mode": "sampler" if not isinstance(cfg.simulation.x0, np.ndarray) else "explicit",
        },
        "simulation": {
            "backend": BACKEND,
            "threads": threads,
            "paths": len(ensemble),
            "blowups": blowups,
            "wall_clock_s": time.perf_counter() - started,
        },
        "analysis": {
            "threshold_ratio": DEFAULT_THRESHOLD_RATIO,
            "time_to_threshold": t_thresh,
            "rate_fit": None
            if fit is None
            else {
                "delta_hat": fit.delta_hat,
                "window": list(fit.window),
                "r_squared": fit.r_squared,
                "theory_delta": fit.theory_delta,
            },
        },
        "files": [
            {"name": p.name, "bytes": p.stat().st_size, "sha256": _sha256(p)}
            for p in inventory
        ],
    }
    if cfg.P_reference is not None:
        manifest["riccati"]["P_reference"] = cfg.P_reference.tolist()
        manifest["riccati"]["P_reference_residual"] = sare_residual(
            cfg.model, cfg.P_reference
        )

    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(_plain(manifest), indent=2) + "\n")

    code = EXIT_BLOWUP if blowups else EXIT_OK
    msg = "completed with blow-ups" if blowups else "completed"
    return RunResult(code, out_dir=out, manifest=manifest, message=msg)


def _emit_plot(out: Path, curves) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for k, agent in enumerate(curves.agents):
        ax.semilogy(curves.times, curves.pair_curves[k], label=f"agent {agent + 1}")
    ax.semilogy(curves.times, curves.ms_theta, "k--", label="|theta|^2")
    ax.set_xlabel("t")
    ax.set_ylabel("mean-square error")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = out / "ms_curves.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def set_config_value(data: dict, dotted_key: str, value) -> None:
    """Set a scalar field addressed as block.key in a raw config dict."""
    parts = dotted_key.split(".")
    if len(parts) != 2:
        raise ValueError(f"key must look like block.field, got {dotted_key!r}")
    block, leaf = parts
    if block not in data or not isinstance(data[block], dict):
        raise KeyError(f"config has no block {block!r}")
    data[block][leaf] = value
