"""Graph files, run configurations and result writers."""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import GraphValidationError
from .graph import QuantumGraph, RootedQuantumGraph, ValidationBounds, build_quantum_graph

__all__ = [
    "SCHEMA",
    "RunConfig",
    "format_number",
    "graph_to_dict",
    "parse_complex",
    "parse_graph_file",
    "parse_root",
    "write_csv",
    "write_json",
]

SCHEMA = "v1"

# parameters accepted per command; everything else is rejected
COMMAND_PARAMS: dict[str, frozenset[str]] = {
    "spectrum": frozenset({"graph", "lmax", "method", "resolution", "out"}),
    "green": frozenset({"graph", "root", "point", "z", "out"}),
    "esm": frozenset({"graph", "chi", "hist", "lam", "eps", "out"}),
    "bs-dist": frozenset({"graph_a", "graph_b", "root_a", "root_b", "kmax", "strict", "out"}),
    "lift": frozenset({"graph", "n", "rmax", "out"}),
    "converge": frozenset(
        {"family", "sizes", "chi", "limit", "length", "condition", "alpha", "law", "law_range", "radius", "base", "out"}
    ),
    "selftest": frozenset({"pytest"}),
}


def parse_graph_file(path, bounds: ValidationBounds | None = None) -> QuantumGraph:
    """Read and validate a JSON graph description; errors name the file and field."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise GraphValidationError(f"{p}: cannot read graph file ({exc.strerror or exc})") from exc
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphValidationError(f"{p}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(spec, Mapping):
        raise GraphValidationError(f"{p}: top level must be an object")
    try:
        return build_quantum_graph(spec, bounds)
    except GraphValidationError as exc:
        raise GraphValidationError(f"{p}: {exc}") from exc


def graph_to_dict(q: QuantumGraph) -> dict:
    """Inverse of the file format.  Conditions are written as matrices."""
    g = q.graph
    edges = []
    for e, ed in enumerate(q.edge_data):
        item = {"u": int(g.edges[e][0]), "v": int(g.edges[e][1]), "length": float(ed.length)}
        pot = ed.potential
        if not pot.is_zero:
            uniform = np.linspace(0.0, pot.length, len(pot.knots))
            if not np.allclose(pot.knots, uniform, rtol=0, atol=1e-12 * pot.length):
                raise GraphValidationError(f"edge {e}: potential knots are not uniform and cannot be written")
            item["potential"] = [float(x) for x in pot.values]
        edges.append(item)
    conditions = [
        {"vertex": v, "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in U]}
        for v, U in enumerate(q.conditions)
    ]
    beta = [[g.terminus(b) for b in q.beta[v]] for v in range(g.vertex_count)]
    return {"vertices": g.vertex_count, "edges": edges, "conditions": conditions, "beta": beta}


def parse_root(text: str, q: QuantumGraph) -> RootedQuantumGraph:
    """``b<k>:s`` is offset ``s`` along bond ``k``; ``e<k>:t`` is position ``t`` from edge ``k``'s origin."""
    try:
        tag, pos = text.split(":")
        kind, idx = tag[0], int(tag[1:])
        val = float(pos)
    except (ValueError, IndexError):
        raise GraphValidationError(f"bad root {text!r}; expected b<bond>:<offset> or e<edge>:<position>") from None
    if kind == "b":
        return RootedQuantumGraph(q, idx, val)
    if kind == "e":
        if not 0 <= idx < q.edge_count:
            raise GraphValidationError(f"root edge {idx} does not exist")
        return RootedQuantumGraph(q, 2 * idx, val)
    raise GraphValidationError(f"bad root {text!r}; prefix must be b or e")


def parse_complex(text: str) -> complex:
    """``re:im``."""
    try:
        re_, im_ = text.split(":")
        return complex(float(re_), float(im_))
    except ValueError:
        raise GraphValidationError(f"bad complex number {text!r}; expected re:im") from None


def _jsonable(x):
    if isinstance(x, Mapping):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return None if not math.isfinite(x) else x
    if isinstance(x, complex):
        return [_jsonable(x.real), _jsonable(x.imag)]
    return x


@dataclass(frozen=True)
class RunConfig:
    """Command name, its parameters and the seed; hashed into every artifact."""

    command: str
    params: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        allowed = COMMAND_PARAMS.get(self.command)
        if allowed is None:
            raise GraphValidationError(f"unknown command {self.command!r}")
        unknown = sorted(set(self.params) - allowed)
        if unknown:
            raise GraphValidationError(f"unknown parameter(s) for {self.command}: {', '.join(unknown)}")
        object.__setattr__(self, "params", {k: _jsonable(v) for k, v in self.params.items()})

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "command": self.command, "params": dict(self.params), "seed": int(self.seed)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        extra = sorted(set(data) - {"schema", "command", "params", "seed"})
        if extra:
            raise GraphValidationError(f"unknown config key(s): {', '.join(extra)}")
        if data.get("schema", SCHEMA) != SCHEMA:
            raise GraphValidationError(f"unsupported config schema {data.get('schema')!r}")
        if "command" not in data:
            raise GraphValidationError("config is missing 'command'")
        return cls(str(data["command"]), dict(data.get("params", {})), int(data.get("seed", 0)))

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _csv_text(columns: Sequence[str], rows: Iterable[Sequence], config: RunConfig) -> str:
    buf = _io.StringIO()
    buf.write(f"# schema={SCHEMA} config_hash={config.config_hash} seed={config.seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_number(v) for v in row])
    return buf.getvalue()


def _json_text(payload: Mapping[str, Any], config: RunConfig) -> str:
    doc = {
        "schema": SCHEMA,
        "config_hash": config.config_hash,
        "seed": config.seed,
        "config": config.to_dict(),
        "result": _jsonable(payload),
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _emit(text: str, path) -> str:
    if path is not None and str(path) != "-":
        Path(path).write_text(text, encoding="utf-8")
    return text


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], config: RunConfig) -> str:
    """Write (or return, for ``path`` ``None`` or ``-``) a CSV with the provenance line first."""
    return _emit(_csv_text(columns, rows, config), path)


def write_json(path, payload: Mapping[str, Any], config: RunConfig) -> str:
    return _emit(_json_text(payload, config), path)
