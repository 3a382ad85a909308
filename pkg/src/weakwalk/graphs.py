"""Graph descriptions and their tight-binding Hamiltonians ``H = -A``.

Vertex labels are ``0..n-1``. Named graphs use these conventions:

* rings: consecutive sites ``j`` and ``j+1 mod L`` are coupled; ``Ring(2)``
  therefore carries the bond twice (``H = -2 sigma_x``), which keeps the
  dispersion ``-2 cos(2 pi k / L)`` valid for every ``L``;
* Petersen: outer 5-cycle ``0..4``, spokes ``i -- i+5``, inner pentagram
  ``5+i -- 5+(i+2 mod 5)``;
* grid: row-major, vertex ``(r, c)`` has label ``r * cols + c``, open boundaries;
* complete bipartite ``K_{m,n}``: parts ``0..m-1`` and ``m..m+n-1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InvalidSpec
from .linalg import EigenSystem, eig_hermitian

KINDS = (
    "two-vertex",
    "ring",
    "magnetic-ring",
    "benzene",
    "complete-bipartite",
    "petersen",
    "grid",
    "random",
    "custom",
)


@dataclass(frozen=True)
class GraphSpec:
    kind: str
    L: int | None = None
    alpha: float = 0.0
    m: int | None = None
    n: int | None = None
    rows: int | None = None
    cols: int | None = None
    p: float | None = None
    seed: int | None = None
    edges: tuple[tuple[int, int], ...] | None = field(default=None, repr=False)

    @classmethod
    def two_vertex(cls):
        return cls("two-vertex")

    @classmethod
    def ring(cls, L):
        return cls("ring", L=L)

    @classmethod
    def magnetic_ring(cls, L, alpha):
        return cls("magnetic-ring", L=L, alpha=float(alpha))

    @classmethod
    def benzene(cls):
        return cls("benzene")

    @classmethod
    def complete_bipartite(cls, m=5, n=5):
        return cls("complete-bipartite", m=m, n=n)

    @classmethod
    def petersen(cls):
        return cls("petersen")

    @classmethod
    def grid(cls, rows, cols):
        return cls("grid", rows=rows, cols=cols)

    @classmethod
    def seeded_random(cls, n, p, seed):
        return cls("random", n=n, p=float(p), seed=int(seed))

    @classmethod
    def custom(cls, n, edges):
        edges = tuple(sorted({(min(i, j), max(i, j)) for i, j in edges}))
        return cls("custom", n=int(n), edges=edges)

    @property
    def num_vertices(self) -> int:
        k = self.kind
        if k == "two-vertex":
            return 2
        if k in ("ring", "magnetic-ring"):
            return self.L
        if k == "benzene":
            return 6
        if k == "complete-bipartite":
            return self.m + self.n
        if k == "petersen":
            return 10
        if k == "grid":
            return self.rows * self.cols
        return self.n

    def describe(self) -> str:
        k = self.kind
        if k in ("ring",):
            return f"ring(L={self.L})"
        if k == "magnetic-ring":
            return f"magnetic-ring(L={self.L};alpha={self.alpha!r})"
        if k == "complete-bipartite":
            return f"complete-bipartite(m={self.m};n={self.n})"
        if k == "grid":
            return f"grid(rows={self.rows};cols={self.cols})"
        if k == "random":
            return f"random(n={self.n};p={self.p!r};seed={self.seed})"
        if k == "custom":
            return f"custom(n={self.n};edges={len(self.edges)})"
        return k

    def vertex_labels(self) -> str:
        """One-line statement of the labeling convention, for output headers."""
        k = self.kind
        if k in ("ring", "magnetic-ring", "benzene", "two-vertex"):
            return "0-based consecutive around the ring"
        if k == "petersen":
            return "0-based outer cycle 0-4 then inner 5-9 (spoke i--i+5)"
        if k == "grid":
            return "0-based row-major r*cols+c"
        if k == "complete-bipartite":
            return f"0-based part A 0..{self.m - 1} then part B"
        return "0-based as given"


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    matrix: np.ndarray
    spec: GraphSpec

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def eig(self) -> EigenSystem:
        return eig_hermitian(self.matrix)


def _require(cond, msg):
    if not cond:
        raise InvalidSpec(msg)


def _ring_matrix(L, alpha=0.0):
    h = np.zeros((L, L), dtype=complex)
    hop = np.exp(1j * alpha)
    for j in range(L):
        k = (j + 1) % L
        h[j, k] -= hop
        h[k, j] -= np.conj(hop)
    return h


def _from_edges(n, edges):
    a = np.zeros((n, n))
    for i, j in edges:
        a[i, j] = a[j, i] = 1.0
    return a


def _petersen_edges():
    edges = []
    for i in range(5):
        edges += [(i, (i + 1) % 5), (i, i + 5), (5 + i, 5 + (i + 2) % 5)]
    return edges


def _grid_edges(rows, cols):
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return edges


def is_connected(adjacency) -> bool:
    a = np.asarray(adjacency) != 0
    n = a.shape[0]
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = [0]
    while frontier:
        v = frontier.pop()
        for w in np.flatnonzero(a[v] & ~seen):
            seen[w] = True
            frontier.append(int(w))
    return bool(seen.all())


def random_adjacency(n, p, seed, max_tries=1000):
    """Connected Erdos-Renyi G(n, p) sample; disconnected draws are rejected."""
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    for _ in range(max_tries):
        a = np.zeros((n, n))
        a[iu] = rng.random(iu[0].size) < p
        a = a + a.T
        if is_connected(a):
            return a
    raise InvalidSpec(f"no connected G({n}, {p}) sample in {max_tries} draws")


def build_hamiltonian(spec: GraphSpec) -> Hamiltonian:
    k = spec.kind
    if k == "two-vertex":
        h = -_from_edges(2, [(0, 1)]).astype(complex)
    elif k == "benzene":
        h = _ring_matrix(6)
    elif k in ("ring", "magnetic-ring"):
        _require(spec.L is not None and spec.L >= 2, f"ring length must be >= 2, got {spec.L}")
        _require(np.isfinite(spec.alpha), "Peierls phase must be finite")
        h = _ring_matrix(spec.L, spec.alpha if k == "magnetic-ring" else 0.0)
    elif k == "complete-bipartite":
        _require(spec.m is not None and spec.n is not None, "complete-bipartite needs m and n")
        _require(spec.m >= 1 and spec.n >= 1, f"bipartite parts must be >= 1, got {spec.m}, {spec.n}")
        m, n = spec.m, spec.n
        a = np.zeros((m + n, m + n))
        a[:m, m:] = 1.0
        a[m:, :m] = 1.0
        h = -a.astype(complex)
    elif k == "petersen":
        h = -_from_edges(10, _petersen_edges()).astype(complex)
    elif k == "grid":
        _require(spec.rows is not None and spec.cols is not None, "grid needs rows and cols")
        _require(spec.rows >= 2 and spec.cols >= 2, f"grid dims must be >= 2, got {spec.rows}x{spec.cols}")
        h = -_from_edges(spec.rows * spec.cols, _grid_edges(spec.rows, spec.cols)).astype(complex)
    elif k == "random":
        _require(spec.n is not None and spec.n >= 2, f"random graph needs n >= 2, got {spec.n}")
        _require(spec.p is not None and 0.0 < spec.p <= 1.0, f"edge probability must be in (0, 1], got {spec.p}")
        _require(spec.seed is not None, "random graph needs a seed")
        h = -random_adjacency(spec.n, spec.p, spec.seed).astype(complex)
    elif k == "custom":
        _require(spec.n is not None and spec.n >= 1, "custom graph needs n >= 1")
        for i, j in spec.edges:
            _require(0 <= i < spec.n and 0 <= j < spec.n, f"edge ({i}, {j}) out of range for n={spec.n}")
            _require(i != j, f"self-loop at vertex {i}")
        h = -_from_edges(spec.n, spec.edges).astype(complex)
    else:
        raise InvalidSpec(f"unknown graph kind {k!r}; expected one of {', '.join(KINDS)}")
    h.setflags(write=False)
    return Hamiltonian(h, spec)


def load_custom_graph(path) -> GraphSpec:
    """Read ``{"n": int, "edges": [[i, j], ...]}`` JSON or an ``i j`` edge-list text file.

    For edge lists, ``#`` starts a comment and ``n`` is one past the largest label.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidSpec(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(doc, dict) or "n" not in doc or "edges" not in doc:
            raise InvalidSpec(f"{path}: expected an object with 'n' and 'edges'")
        try:
            edges = [(int(i), int(j)) for i, j in doc["edges"]]
        except (TypeError, ValueError) as exc:
            raise InvalidSpec(f"{path}: edges must be pairs of integers") from exc
        return GraphSpec.custom(int(doc["n"]), edges)
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidSpec(f"{path}: line {lineno}: expected 'i j', got {line!r}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise InvalidSpec(f"{path}: line {lineno}: non-integer vertex") from exc
    if not edges:
        raise InvalidSpec(f"{path}: no edges")
    n = 1 + max(max(e) for e in edges)
    return GraphSpec.custom(n, edges)
