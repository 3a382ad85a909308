"""Run configurations: a JSON document and/or command-line flags.

Recognised keys (all optional except where a subcommand needs them)::

    {
      "graph": {"kind": "ring", "L": 6} | "petersen",
      "mode": "site" | "rank-one",
      "detected": [5],                      # defaults to the support of the initial state
      "initial": 5 | [[6, 1], [7, 1]],      # site, or (site, amplitude) pairs, normalized
      "eta": [0.1, 0.5, 1.0] | 0.5,
      "t": 0.9 | "t_grid": [0, "2*pi", 201],
      "steps": 2000 | "inf",
      "n_list": [1, 2, 10, "inf"],
      "method": "finite" | "series" | "vectorized" | "integral" | "trajectory",
      "shots": 100000, "seed": 1234, "jobs": 1, "tol": 1e-4,
      "out": "out.csv", "format": "csv" | "json" | "svg"
    }

Numbers may be written as simple expressions in ``pi`` (``"2*pi"``, ``"pi/2"``).
"""

from __future__ import annotations

import ast
import json
import math
import operator
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigError, WeakWalkError
from .graphs import KINDS, GraphSpec, Hamiltonian, build_hamiltonian, load_custom_graph
from .monitor import MeasurementSetup, RankOne, SiteSet, check_eta, site_state

METHODS = ("finite", "series", "vectorized", "integral", "trajectory")
FORMATS = ("csv", "json", "svg")
MODES = ("site", "rank-one")
DEFAULT_ETAS = tuple(round(0.1 * k, 1) for k in range(1, 11))
KNOWN_KEYS = {
    "graph", "mode", "detected", "initial", "eta", "t", "t_grid", "steps", "n_list",
    "method", "shots", "seed", "jobs", "tol", "out", "format",
}
GRAPH_KEYS = {"kind", "L", "alpha", "m", "n", "rows", "cols", "p", "seed", "edges", "path"}

_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}


def _eval_node(node):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.Name) and node.id == "inf":
        return math.inf
    if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval_node(node.operand))
    raise ValueError("unsupported expression")


def parse_number(value, name="value") -> float:
    """Float from a number or an arithmetic string in ``pi`` and ``inf``."""
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}", field=name)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        text = value.strip().replace("π", "pi")
        try:
            return _eval_node(ast.parse(text, mode="eval"))
        except (SyntaxError, ValueError, ZeroDivisionError):
            pass
    raise ConfigError(f"expected a number, got {value!r}", field=name)


def _steps(value, name="steps"):
    x = parse_number(value, name)
    if x == math.inf:
        return math.inf
    if x != int(x) or x < 1:
        raise ConfigError(f"must be a positive integer or inf, got {value!r}", field=name)
    return int(x)


def _int(value, name, lo=None):
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(f"expected an integer, got {value!r}", field=name)
    try:
        x = int(value)
    except ValueError:
        raise ConfigError(f"expected an integer, got {value!r}", field=name) from None
    if isinstance(value, float) and x != value:
        raise ConfigError(f"expected an integer, got {value!r}", field=name)
    if lo is not None and x < lo:
        raise ConfigError(f"must be >= {lo}, got {x}", field=name)
    return x


def _amplitude(value, name):
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(parse_number(value[0], name), parse_number(value[1], name))
    return complex(parse_number(value, name))


@dataclass(frozen=True)
class RunConfig:
    graph: GraphSpec
    mode: str = "site"
    detected: tuple[int, ...] | None = None
    initial: tuple[tuple[int, complex], ...] = ((0, 1.0 + 0j),)
    etas: tuple[float, ...] = DEFAULT_ETAS
    t_grid: tuple[float, float, int] = (0.0, 2 * math.pi, 201)
    steps: float = 2000
    n_list: tuple[float, ...] = (1, 2, 10, 100, math.inf)
    method: str = "finite"
    shots: int = 100_000
    seed: int = 1234
    jobs: int = 1
    tol: float = 1e-4
    out: str | None = None
    fmt: str = "csv"
    given: frozenset = field(default_factory=frozenset, compare=False, repr=False)

    @cached_property
    def hamiltonian(self) -> Hamiltonian:
        return build_hamiltonian(self.graph)

    @property
    def times(self) -> np.ndarray:
        start, stop, points = self.t_grid
        return np.linspace(start, stop, points)

    def psi(self) -> np.ndarray:
        return site_state(self.graph.num_vertices, dict(self.initial))

    def detection(self):
        psi = self.psi()
        if self.mode == "rank-one":
            return RankOne(psi)
        sites = self.detected
        if sites is None:
            sites = tuple(int(i) for i in np.flatnonzero(np.abs(psi) > 0))
        return SiteSet(sites)

    def setup(self, eta=None, t=None) -> MeasurementSetup:
        eta = self.etas[0] if eta is None else eta
        t = self.t_grid[0] if t is None else t
        return MeasurementSetup(self.hamiltonian, self.detection(), eta, t, self.psi())

    def header(self) -> str:
        return (
            f"graph={self.graph.describe()}, mode={self.mode}, "
            f"vertex_labels={self.graph.vertex_labels()}"
        )

    def validate(self):
        """Build one setup so dimension and subspace errors surface as ``ConfigError``."""
        steps = (
            ("initial", self.psi),
            ("detected", self.detection),
            (None, lambda: self.setup(eta=1.0, t=self.t_grid[0])),
        )
        for field, check in steps:
            try:
                check()
            except ConfigError:
                raise
            except WeakWalkError as exc:
                raise ConfigError(str(exc), field=field) from exc
        return self


def _graph_from_doc(doc, base_dir=None) -> GraphSpec:
    if isinstance(doc, str):
        doc = {"kind": doc}
    if not isinstance(doc, dict):
        raise ConfigError("expected an object or a kind name", field="graph")
    unknown = set(doc) - GRAPH_KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field="graph")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {', '.join(KINDS)}, got {kind!r}", field="graph.kind")

    def need(key, lo=None):
        if doc.get(key) is None:
            raise ConfigError(f"{kind} needs '{key}'", field=f"graph.{key}")
        return _int(doc[key], f"graph.{key}", lo)

    if kind == "two-vertex":
        return GraphSpec.two_vertex()
    if kind == "benzene":
        return GraphSpec.benzene()
    if kind == "petersen":
        return GraphSpec.petersen()
    if kind == "ring":
        return GraphSpec.ring(need("L", 2))
    if kind == "magnetic-ring":
        return GraphSpec.magnetic_ring(need("L", 2), parse_number(doc.get("alpha", 0.0), "graph.alpha"))
    if kind == "complete-bipartite":
        m = _int(doc.get("m", 5), "graph.m", 1)
        n = _int(doc.get("n", 5), "graph.n", 1)
        return GraphSpec.complete_bipartite(m, n)
    if kind == "grid":
        return GraphSpec.grid(need("rows", 2), need("cols", 2))
    if kind == "random":
        p = parse_number(doc.get("p", 0.3), "graph.p")
        if not 0.0 < p <= 1.0:
            raise ConfigError(f"edge probability must be in (0, 1], got {p}", field="graph.p")
        return GraphSpec.seeded_random(need("n", 2), p, need("seed", 0))
    # custom
    if "path" in doc:
        path = Path(doc["path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        try:
            return load_custom_graph(path)
        except (OSError, WeakWalkError) as exc:
            raise ConfigError(str(exc), field="graph.path") from exc
    if "edges" not in doc:
        raise ConfigError("custom graph needs 'edges' or 'path'", field="graph.edges")
    try:
        edges = [(int(i), int(j)) for i, j in doc["edges"]]
    except (TypeError, ValueError):
        raise ConfigError("edges must be pairs of integers", field="graph.edges") from None
    n = need("n", 1) if "n" in doc else 1 + max(max(e) for e in edges)
    return GraphSpec.custom(n, edges)


def _initial(value):
    if isinstance(value, bool):
        raise ConfigError(f"expected a site or (site, amplitude) pairs, got {value!r}", field="initial")
    if isinstance(value, (int, float, str)):
        return ((_int(value, "initial", 0), 1.0 + 0j),)
    if isinstance(value, dict):
        value = list(value.items())
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError("expected a site or a non-empty list", field="initial")
    out = []
    for item in value:
        if isinstance(item, (list, tuple)) and len(item) == 2:
            out.append((_int(item[0], "initial", 0), _amplitude(item[1], "initial")))
        else:
            out.append((_int(item, "initial", 0), 1.0 + 0j))
    return tuple(out)


def from_dict(doc: dict, base_dir=None) -> RunConfig:
    """Validate a parsed document; errors name the offending field."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", field=sorted(unknown)[0])
    kw = {}
    if "graph" not in doc:
        raise ConfigError("missing graph", field="graph")
    kw["graph"] = _graph_from_doc(doc["graph"], base_dir)
    if "mode" in doc:
        if doc["mode"] not in MODES:
            raise ConfigError(f"must be one of {MODES}, got {doc['mode']!r}", field="mode")
        kw["mode"] = doc["mode"]
    if doc.get("detected") is not None:
        det = doc["detected"]
        det = [det] if not isinstance(det, (list, tuple)) else det
        kw["detected"] = tuple(_int(s, "detected", 0) for s in det)
    if "initial" in doc:
        kw["initial"] = _initial(doc["initial"])
    if "eta" in doc:
        etas = doc["eta"] if isinstance(doc["eta"], (list, tuple)) else [doc["eta"]]
        if not etas:
            raise ConfigError("eta grid is empty", field="eta")
        vals = []
        for e in etas:
            x = parse_number(e, "eta")
            # eta = 0 is only meaningful for spectra; the subcommand decides
            if not 0.0 <= x <= 1.0:
                raise ConfigError(f"eta must lie in (0, 1], got {x}", field="eta")
            vals.append(x)
        kw["etas"] = tuple(vals)
    if "t" in doc and "t_grid" in doc:
        raise ConfigError("give either 't' or 't_grid'", field="t")
    if "t" in doc:
        t = parse_number(doc["t"], "t")
        kw["t_grid"] = (t, t, 1)
    if "t_grid" in doc:
        g = doc["t_grid"]
        if not isinstance(g, (list, tuple)) or len(g) != 3:
            raise ConfigError("expected [start, stop, points]", field="t_grid")
        start, stop = parse_number(g[0], "t_grid"), parse_number(g[1], "t_grid")
        points = _int(g[2], "t_grid", 1)
        kw["t_grid"] = (start, stop, points)
    if "t_grid" in kw:
        start, stop, _ = kw["t_grid"]
        if not (math.isfinite(start) and math.isfinite(stop)) or min(start, stop) < 0:
            raise ConfigError("sampling times must be finite and >= 0", field="t_grid")
    if "steps" in doc:
        kw["steps"] = _steps(doc["steps"])
    if "n_list" in doc:
        if not isinstance(doc["n_list"], (list, tuple)) or not doc["n_list"]:
            raise ConfigError("expected a non-empty list", field="n_list")
        kw["n_list"] = tuple(_steps(v, "n_list") for v in doc["n_list"])
    if "method" in doc:
        if doc["method"] not in METHODS:
            raise ConfigError(f"must be one of {METHODS}, got {doc['method']!r}", field="method")
        kw["method"] = doc["method"]
    for key in ("shots", "jobs"):
        if key in doc:
            kw[key] = _int(doc[key], key, 1)
    if "seed" in doc:
        kw["seed"] = _int(doc["seed"], "seed", 0)
    if "tol" in doc:
        tol = parse_number(doc["tol"], "tol")
        if not tol > 0:
            raise ConfigError("must be positive", field="tol")
        kw["tol"] = tol
    if "out" in doc:
        kw["out"] = str(doc["out"]) if doc["out"] is not None else None
    if "format" in doc:
        if doc["format"] not in FORMATS:
            raise ConfigError(f"must be one of {FORMATS}, got {doc['format']!r}", field="format")
        kw["fmt"] = doc["format"]
    kw["given"] = frozenset(doc)
    return RunConfig(**kw)


def field_line(text: str, key: str):
    """1-based line of the first ``"key":`` in ``text``, if any."""
    top = key.split(".")[-1]
    m = re.search(r'"%s"\s*:' % re.escape(top), text)
    if m is None:
        return None
    return text.count("\n", 0, m.start()) + 1


def read_config_document(path) -> tuple[dict, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", field="config") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object", line=1)
    return doc, text


def load_config(path, overrides: dict | None = None) -> RunConfig:
    """Parse a JSON config file; ``overrides`` (e.g. from flags) replace file entries."""
    doc, text = read_config_document(path)
    merged = dict(doc)
    merged.update(overrides or {})
    try:
        return from_dict(merged, base_dir=Path(path).parent)
    except ConfigError as exc:
        if exc.field is not None and exc.line is None and exc.field.split(".")[0] in doc:
            raise ConfigError(
                exc.message, field=exc.field, line=field_line(text, exc.field)
            ) from exc
        raise


def checked_etas(cfg: RunConfig, allow_zero=False):
    try:
        return [check_eta(e, allow_zero=allow_zero) for e in cfg.etas]
    except WeakWalkError as exc:
        raise ConfigError(str(exc), field="eta") from exc
