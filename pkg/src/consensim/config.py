"""Experiment configuration: strict JSON in, typed objects out.

A configuration is one JSON object with up to five blocks (model, graph,
protocol, simulation, output).  Parsing is strict: unknown keys anywhere
are an error, required keys must be present, and all dimensions are
cross-checked before any computation starts.  Error messages always name
the offending key path.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigInvalid
from .graph_topology import WeightedDigraph
from .protocol import VARIANTS, ProtocolSpec
from .riccati import SystemModel
from .sde_sim import sample_uniform_x0

FILE_KINDS = ("trajectories", "ms_curves", "rate_fit", "gains", "inputs")

_UNIFORM_RE = re.compile(
    r"^uniform\(\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*\)$"
)


@dataclass
class X0Sampler:
    """Uniform initial-state sampler, drawn once per experiment."""

    lo: float
    hi: float

    def spec_string(self) -> str:
        return f"uniform({self.lo:g},{self.hi:g})"


@dataclass
class SimulationSettings:
    h: float
    T: float
    master_seed: int
    M: int
    x0: np.ndarray | X0Sampler
    output_stride: int = 10
    blowup_threshold: float = 1e9


@dataclass
class OutputSettings:
    directory: str
    files: list[str] = field(default_factory=lambda: list(FILE_KINDS))
    trajectory_paths: list[int] = field(default_factory=lambda: [0])


@dataclass
class ExperimentConfig:
    """Typed view of one configuration file.

    Blocks a command does not need may be absent (None); commands declare
    which blocks they require when parsing.
    """

    model: SystemModel | None = None
    P_reference: np.ndarray | None = None
    graph: WeightedDigraph | None = None
    undirected_flag: bool = False
    protocol: ProtocolSpec | None = None
    simulation: SimulationSettings | None = None
    output: OutputSettings | None = None

    def resolve_x0(self) -> np.ndarray:
        """Materialize the initial state (sampling once if configured so)."""
        sim = self.simulation
        if isinstance(sim.x0, X0Sampler):
            size = self.model.N * self.model.n
            return sample_uniform_x0(sim.master_seed, size, sim.x0.lo, sim.x0.hi)
        return np.asarray(sim.x0, dtype=float)

    def to_dict(self, resolved_x0: np.ndarray | None = None) -> dict:
        """Canonical plain-data form; parses back to an equal config."""
        out: dict = {}
        if self.model is not None:
            out["model"] = {
                "A": self.model.A.tolist(),
                "B": self.model.B.tolist(),
                "C": self.model.C.tolist(),
            }
            if self.P_reference is not None:
                out["model"]["P_reference"] = self.P_reference.tolist()
        if self.graph is not None:
            out["graph"] = {
                "N": self.graph.n_nodes,
                "adjacency": self.graph.adjacency.tolist(),
                "undirected": self.undirected_flag,
            }
        if self.protocol is not None:
            out["protocol"] = {
                "variant": self.protocol.variant,
                "k1": self.protocol.k1,
                "k2": self.protocol.k2,
                "mu": self.protocol.mu,
                "gamma": self.protocol.gamma,
                "c0": self.protocol.c0.tolist(),
            }
        if self.simulation is not None:
            sim = self.simulation
            if resolved_x0 is not None:
                x0_out = np.asarray(resolved_x0).tolist()
            elif isinstance(sim.x0, X0Sampler):
                x0_out = sim.x0.spec_string()
            else:
                x0_out = np.asarray(sim.x0).tolist()
            out["simulation"] = {
                "h": sim.h,
                "T": sim.T,
                "output_stride": sim.output_stride,
                "master_seed": sim.master_seed,
                "M": sim.M,
                "x0": x0_out,
                "blowup_threshold": sim.blowup_threshold,
            }
        if self.output is not None:
            out["output"] = {
                "directory": self.output.directory,
                "files": list(self.output.files),
                "trajectory_paths": list(self.output.trajectory_paths),
            }
        return out


def _require_keys(block: dict, path: str, required: tuple, optional: tuple):
    unknown = set(block) - set(required) - set(optional)
    if unknown:
        raise ConfigInvalid(f"{path}.{sorted(unknown)[0]}: unknown key")
    for key in required:
        if key not in block:
            raise ConfigInvalid(f"{path}.{key}: required key missing")


def _as_matrix(value, path: str, rows: int | None = None, cols: int | None = None):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"{path}: not a numeric array ({exc})") from exc
    if arr.ndim == 1 and rows is not None and cols is not None:
        if arr.size != rows * cols:
            raise ConfigInvalid(
                f"{path}: flat array of length {arr.size}, expected {rows * cols}"
            )
        arr = arr.reshape(rows, cols)
    if arr.ndim != 2:
        raise ConfigInvalid(f"{path}: expected a matrix, got {arr.ndim} dimensions")
    if rows is not None and arr.shape[0] != rows:
        raise ConfigInvalid(f"{path}: expected {rows} rows, got {arr.shape[0]}")
    if cols is not None and arr.shape[1] != cols:
        raise ConfigInvalid(f"{path}: expected {cols} columns, got {arr.shape[1]}")
    return arr


def _scalar(block, key, path, kind=float, required=False, default=None):
    if key not in block:
        if required:
            raise ConfigInvalid(f"{path}.{key}: required key missing")
        return default
    value = block[key]
    if isinstance(value, bool) and kind is not bool:
        raise ConfigInvalid(f"{path}.{key}: expected a number, got a boolean")
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"{path}.{key}: expected {kind.__name__} ({exc})") from exc


def parse_config(
    source: str | Path | dict,
    require: tuple = ("model", "graph", "protocol", "simulation", "output"),
) -> ExperimentConfig:
    """Parse and validate a configuration from a file path or a dict."""
    if isinstance(source, (str, Path)):
        try:
            data = json.loads(Path(source).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"{source}: invalid JSON at line {exc.lineno}, "
                                f"column {exc.colno}: {exc.msg}") from exc
        except OSError as exc:
            raise ConfigInvalid(f"{source}: {exc}") from exc
    else:
        data = source
    if not isinstance(data, dict):
        raise ConfigInvalid("configuration root must be an object")

    known_blocks = ("model", "graph", "protocol", "simulation", "output")
    unknown = set(data) - set(known_blocks)
    if unknown:
        raise ConfigInvalid(f"unknown top-level block {sorted(unknown)[0]!r}")
    for block in require:
        if block not in data:
            raise ConfigInvalid(f"{block}: required block missing")

    cfg = ExperimentConfig()

    graph_n = None
    if "graph" in data:
        g = data["graph"]
        _require_keys(g, "graph", ("N", "adjacency"), ("undirected",))
        graph_n = _scalar(g, "N", "graph", int, required=True)
        if graph_n < 2:
            raise ConfigInvalid("graph.N: need at least 2 agents")
        adjacency = _as_matrix(g["adjacency"], "graph.adjacency", graph_n, graph_n)
        undirected = g.get("undirected", False)
        if not isinstance(undirected, bool):
            raise ConfigInvalid("graph.undirected: expected a boolean")
        if undirected and not np.array_equal(adjacency, adjacency.T):
            raise ConfigInvalid(
                "graph.undirected: flag is true but the adjacency is not symmetric"
            )
        cfg.graph = WeightedDigraph(graph_n, adjacency)
        cfg.undirected_flag = undirected

    if "model" in data:
        mb = data["model"]
        _require_keys(mb, "model", ("A", "B", "C"), ("P_reference",))
        A = _as_matrix(mb["A"], "model.A")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ConfigInvalid(f"model.A: must be square, got {A.shape}")
        B = _as_matrix(mb["B"], "model.B", rows=n)
        C = _as_matrix(mb["C"], "model.C", rows=n, cols=n)
        cfg.model = SystemModel(A=A, B=B, C=C, N=graph_n if graph_n else 2)
        if "P_reference" in mb:
            cfg.P_reference = _as_matrix(mb["P_reference"], "model.P_reference", n, n)

    if "protocol" in data:
        pb = data["protocol"]
        _require_keys(pb, "protocol", ("variant",), ("k1", "k2", "mu", "gamma", "c0"))
        variant = pb["variant"]
        if variant not in VARIANTS:
            raise ConfigInvalid(
                f"protocol.variant: unknown variant {variant!r}, "
                f"expected one of {list(VARIANTS)}"
            )
        c0_raw = pb.get("c0", 1.0)
        c0 = np.atleast_1d(np.asarray(c0_raw, dtype=float))
        if graph_n and c0.size not in (1, graph_n):
            raise ConfigInvalid(
                f"protocol.c0: length {c0.size}, expected a scalar or {graph_n} values"
            )
        cfg.protocol = ProtocolSpec(
            variant=variant,
            k1=_scalar(pb, "k1", "protocol", float, default=1.0),
            k2=_scalar(pb, "k2", "protocol", float, default=1.0),
            mu=_scalar(pb, "mu", "protocol", float, default=2.0),
            gamma=_scalar(pb, "gamma", "protocol", float, default=0.0),
            c0=c0,
        )

    if "simulation" in data:
        sb = data["simulation"]
        _require_keys(
            sb,
            "simulation",
            ("h", "T", "master_seed", "M", "x0"),
            ("output_stride", "blowup_threshold"),
        )
        x0_raw = sb["x0"]
        if isinstance(x0_raw, str):
            match = _UNIFORM_RE.match(x0_raw.strip())
            if not match:
                raise ConfigInvalid(
                    "simulation.x0: expected an array or 'uniform(lo,hi)'"
                )
            lo, hi = float(match.group(1)), float(match.group(2))
            if not lo < hi:
                raise ConfigInvalid("simulation.x0: sampler needs lo < hi")
            x0: np.ndarray | X0Sampler = X0Sampler(lo, hi)
        else:
            x0 = np.asarray(x0_raw, dtype=float).ravel()
            if cfg.model is not None and x0.size != cfg.model.N * cfg.model.n:
                raise ConfigInvalid(
                    f"simulation.x0: length {x0.size}, expected "
                    f"N*n={cfg.model.N * cfg.model.n}"
                )
        cfg.simulation = SimulationSettings(
            h=_scalar(sb, "h", "simulation", float, required=True),
            T=_scalar(sb, "T", "simulation", float, required=True),
            master_seed=_scalar(sb, "master_seed", "simulation", int, required=True),
            M=_scalar(sb, "M", "simulation", int, required=True),
            x0=x0,
            output_stride=_scalar(sb, "output_stride", "simulation", int, default=10),
            blowup_threshold=_scalar(
                sb, "blowup_threshold", "simulation", float, default=1e9
            ),
        )
        if cfg.simulation.M < 1:
            raise ConfigInvalid("simulation.M: need at least one path")

    if "output" in data:
        ob = data["output"]
        _require_keys(ob, "output", ("directory",), ("files", "trajectory_paths"))
        files = ob.get("files", list(FILE_KINDS))
        if not isinstance(files, list) or any(f not in FILE_KINDS for f in files):
            raise ConfigInvalid(f"output.files: entries must be among {FILE_KINDS}")
        paths = ob.get("trajectory_paths", [0])
        if not isinstance(paths, list) or any(
            not isinstance(p, int) or isinstance(p, bool) or p < 0 for p in paths
        ):
            raise ConfigInvalid("output.trajectory_paths: expected nonnegative integers")
        if cfg.simulation is not None:
            bad = [p for p in paths if p >= cfg.simulation.M]
            if bad:
                raise ConfigInvalid(
                    f"output.trajectory_paths: path {bad[0]} outside 0..M-1"
                )
        cfg.output = OutputSettings(
            directory=str(ob["directory"]), files=list(files), trajectory_paths=list(paths)
        )

    return cfg
