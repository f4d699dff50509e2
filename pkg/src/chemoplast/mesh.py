"""Linear triangle meshes: ingestion, plate-with-hole generation and P1 sampling.

Mesh file grammar (whitespace delimited, ``#`` starts a comment)::

    nodes <n>
    x y                 # n lines
    elements <m>
    i j k               # m lines, 0-based node indices
    edges <p>
    a b tag             # p lines, boundary edges with a string tag
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial import Delaunay


class MeshError(ValueError):
    """Invalid mesh data."""


class MeshParseError(MeshError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.line = line


def _signed_areas(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    p = nodes[elements]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


@dataclass(frozen=True)
class Mesh:
    """Three-node triangle mesh with tagged boundary edges and named node sets.

    Use :meth:`from_arrays` to build one; it repairs clockwise elements and
    checks all invariants. Arrays are made read-only.
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: tuple[str, ...]
    node_sets: Mapping[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_arrays(cls, nodes, elements, boundary_edges=(), edge_tags: Sequence[str] = (),
                    node_sets: Mapping[str, Sequence[int]] | None = None,
                    check_loops: bool = True) -> "Mesh":
        nodes = np.array(nodes, dtype=float).reshape(-1, 2)
        elements = np.array(elements, dtype=np.int64).reshape(-1, 3)
        edges = np.array(boundary_edges, dtype=np.int64).reshape(-1, 2)
        tags = tuple(str(t) for t in edge_tags)
        if len(tags) != edges.shape[0]:
            raise MeshError("one tag per boundary edge is required")
        n = nodes.shape[0]
        for name, arr in (("element", elements), ("edge", edges)):
            bad = np.flatnonzero(((arr < 0) | (arr >= n)).any(axis=1))
            if bad.size:
                raise MeshError(
                    f"{name} {int(bad[0])} references node index out of range "
                    f"(valid 0..{n - 1}): {arr[bad[0]].tolist()}"
                )
        if not np.isfinite(nodes).all():
            raise MeshError("node coordinates must be finite")
        area = _signed_areas(nodes, elements)
        scale = max(float(np.ptp(nodes, axis=0).max()) if n else 1.0, 1e-300)
        degenerate = np.flatnonzero(np.abs(area) <= 1e-14 * scale * scale)
        if degenerate.size:
            raise MeshError(f"degenerate (zero-area) elements: {degenerate.tolist()[:20]}")
        cw = area < 0
        if cw.any():
            elements = elements.copy()
            elements[cw] = elements[cw][:, [0, 2, 1]]

        sets = {}
        for tag in dict.fromkeys(tags):
            sel = edges[[t == tag for t in tags]]
            sets[tag] = np.unique(sel)
        if edges.size:
            sets.setdefault("boundary", np.unique(edges))
        for name, idx in (node_sets or {}).items():
            idx = np.unique(np.asarray(idx, dtype=np.int64))
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise MeshError(f"node set {name!r} references node index out of range")
            sets[name] = idx
        for arr in [nodes, elements, edges, *sets.values()]:
            arr.setflags(write=False)
        mesh = cls(nodes, elements, edges, tags, MappingProxyType(sets))
        if check_loops:
            mesh._check_edges()
        return mesh

    def _check_edges(self) -> None:
        if self.boundary_edges.size == 0:
            return
        free = {tuple(sorted(e)) for e in self.free_edges().tolist()}
        for i, e in enumerate(self.boundary_edges.tolist()):
            if tuple(sorted(e)) not in free:
                raise MeshError(f"boundary edge {i} {e} is not an edge on the mesh boundary")
        deg = np.bincount(self.boundary_edges.ravel(), minlength=self.n_nodes)
        odd = np.flatnonzero(deg % 2)
        if odd.size:
            raise MeshError(f"boundary edges do not form closed loops near nodes {odd.tolist()[:10]}")

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    def node_set(self, name: str) -> np.ndarray:
        try:
            return self.node_sets[name]
        except KeyError:
            raise MeshError(
                f"unknown node set {name!r}; available: {sorted(self.node_sets)}"
            ) from None

    def edges_with_tag(self, tag: str) -> np.ndarray:
        if tag not in self.edge_tags:
            raise MeshError(f"unknown edge tag {tag!r}; available: {sorted(set(self.edge_tags))}")
        return self.boundary_edges[[t == tag for t in self.edge_tags]]

    def areas(self) -> np.ndarray:
        return _signed_areas(self.nodes, self.elements)

    def centroids(self) -> np.ndarray:
        return self.nodes[self.elements].mean(axis=1)

    def shape_gradients(self) -> np.ndarray:
        """Constant P1 shape-function gradients, shape ``(m, 3, 2)``."""
        p = self.nodes[self.elements]
        x, y = p[..., 0], p[..., 1]
        two_a = 2.0 * self.areas()
        b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        return np.stack([b, c], axis=2) / two_a[:, None, None]

    def strain_matrices(self) -> np.ndarray:
        """CST strain-displacement matrices ``(m, 3, 6)`` for engineering strain.

        Local dof order is ``[u0x, u0y, u1x, u1y, u2x, u2y]``.
        """
        g = self.shape_gradients()
        B = np.zeros((self.n_elements, 3, 6))
        B[:, 0, 0::2] = g[:, :, 0]
        B[:, 1, 1::2] = g[:, :, 1]
        B[:, 2, 0::2] = g[:, :, 1]
        B[:, 2, 1::2] = g[:, :, 0]
        return B

    def free_edges(self) -> np.ndarray:
        """Edges that belong to exactly one element."""
        e = self.elements
        all_e = np.sort(np.concatenate([e[:, [0, 1]], e[:, [1, 2]], e[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(all_e, axis=0, return_counts=True)
        return uniq[counts == 1]

    def locate(self, points, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
        """Containing element and barycentric coordinates of each point.

        Raises
        ------
        MeshError
            If a point lies outside the mesh.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        p = self.nodes[self.elements]
        a = self.areas()
        elem = np.empty(len(pts), dtype=np.int64)
        bary = np.empty((len(pts), 3))
        for i, q in enumerate(pts):
            l0 = _tri_area(q, p[:, 1], p[:, 2]) / a
            l1 = _tri_area(p[:, 0], q, p[:, 2]) / a
            l2 = 1.0 - l0 - l1
            worst = np.minimum(np.minimum(l0, l1), l2)
            k = int(np.argmax(worst))
            if worst[k] < -tol:
                raise MeshError(f"point {q.tolist()} lies outside the mesh domain")
            elem[i] = k
            bary[i] = (l0[k], l1[k], l2[k])
        return elem, bary

    def interpolate(self, values: np.ndarray, points) -> np.ndarray:
        elem, bary = self.locate(points)
        vals = np.asarray(values)
        local = vals[self.elements[elem]]
        if local.ndim == 2:
            return np.einsum("ij,ij->i", local, bary)
        return np.einsum("ijk,ij->ik", local, bary)


def _tri_area(a, b, c):
    a = np.asarray(a)
    return 0.5 * ((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                  - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))


@dataclass(frozen=True)
class NodalField:
    """Nodal values: one scalar or one 2-vector per node."""

    values: np.ndarray
    kind: str = "scalar"

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if self.kind == "scalar":
            v = v.reshape(-1)
        elif self.kind == "vector2":
            v = v.reshape(-1, 2)
        else:
            raise ValueError(f"unknown field kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    def check(self, mesh: Mesh) -> None:
        if self.n_nodes != mesh.n_nodes:
            raise MeshError(f"field has {self.n_nodes} nodes, mesh has {mesh.n_nodes}")


@dataclass(frozen=True)
class PathSample:
    arclength: float
    value: float | np.ndarray


def sample_along_path(mesh: Mesh, field: NodalField, path, count: int = 51) -> list[PathSample]:
    """Interpolate ``field`` at ``count`` stations uniformly spaced along a polyline.

    Parameters
    ----------
    mesh : Mesh
    field : NodalField
    path : array_like, shape (k, 2)
        Polyline vertices, ``k >= 2``.
    count : int
        Number of stations including both ends.
    """
    field.check(mesh)
    pts = np.asarray(path, dtype=float).reshape(-1, 2)
    if len(pts) < 2 or count < 2:
        raise ValueError("a path needs at least two vertices and two stations")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if cum[-1] <= 0.0:
        raise ValueError("path has zero length")
    s = np.linspace(0.0, cum[-1], count)
    x = np.interp(s, cum, pts[:, 0])
    y = np.interp(s, cum, pts[:, 1])
    vals = mesh.interpolate(field.values, np.column_stack([x, y]))
    return [PathSample(float(si), v if np.ndim(v) else float(v)) for si, v in zip(s, vals)]


# ---------------------------------------------------------------- file input

def _parse_count(tokens, keyword, lineno, path):
    if len(tokens) != 2 or tokens[0] != keyword:
        raise MeshParseError(f"expected '{keyword} <count>', got {' '.join(tokens)!r}", lineno, path)
    try:
        n = int(tokens[1])
    except ValueError:
        raise MeshParseError(f"invalid count {tokens[1]!r}", lineno, path) from None
    if n < 0:
        raise MeshParseError("count must be non-negative", lineno, path)
    return n


def parse_mesh(text: str, path: str | None = None) -> Mesh:
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].split()
        if body:
            lines.append((lineno, body))
    pos = 0

    def take_block(keyword, width, conv):
        nonlocal pos
        if pos >= len(lines):
            raise MeshParseError(f"missing '{keyword}' section", None, path)
        lineno, tok = lines[pos]
        n = _parse_count(tok, keyword, lineno, path)
        pos += 1
        rows, extra = [], []
        for _ in range(n):
            if pos >= len(lines):
                raise MeshParseError(f"unexpected end of file in '{keyword}' section", None, path)
            lineno, tok = lines[pos]
            pos += 1
            want = width + (1 if keyword == "edges" else 0)
            if len(tok) != want:
                raise MeshParseError(f"expected {want} fields in '{keyword}' line, got {len(tok)}",
                                     lineno, path)
            try:
                rows.append([conv(t) for t in tok[:width]])
            except ValueError:
                raise MeshParseError(f"invalid value in '{keyword}' line: {' '.join(tok)}",
                                     lineno, path) from None
            if keyword == "edges":
                extra.append(tok[width])
        return rows, extra, lineno

    nodes, _, _ = take_block("nodes", 2, float)
    elements, _, el_line = take_block("elements", 3, int)
    edges, tags = [], []
    if pos < len(lines):
        edges, tags, _ = take_block("edges", 2, int)
    if pos < len(lines):
        lineno, tok = lines[pos]
        raise MeshParseError(f"unexpected content {' '.join(tok)!r}", lineno, path)
    try:
        return Mesh.from_arrays(nodes, elements, edges, tags)
    except MeshError as exc:
        raise MeshError(f"{path + ': ' if path else ''}{exc}") from None


def load_mesh(path) -> Mesh:
    """Read a mesh in the plain-text grammar described in the module docstring.

    Raises
    ------
    FileNotFoundError
    MeshParseError
        With the offending line number.
    MeshError
        For degenerate elements, out-of-range indices or open boundary loops.
    """
    p = Path(path)
    return parse_mesh(p.read_text(), str(p))


def write_mesh(mesh: Mesh, path) -> None:
    out = [f"nodes {mesh.n_nodes}"]
    out += [f"{x:.17g} {y:.17g}" for x, y in mesh.nodes]
    out.append(f"elements {mesh.n_elements}")
    out += [" ".join(map(str, e)) for e in mesh.elements]
    out.append(f"edges {len(mesh.edge_tags)}")
    out += [f"{a} {b} {t}" for (a, b), t in zip(mesh.boundary_edges, mesh.edge_tags)]
    Path(path).write_text("\n".join(out) + "\n")


# ---------------------------------------------------------------- generation

LAYOUTS = ("annulus", "delaunay")


def generate_plate_with_hole(length: float = 0.36, height: float = 0.20, hole_radius: float = 0.05,
                             refinement: int = 6, jitter: float = 0.25, seed: int = 0,
                             layout: str = "annulus") -> Mesh:
    """Triangulation of a rectangle minus a centred circular hole.

    ``layout="annulus"`` (default) maps a structured ``12k x 3k`` quadrilateral grid
    between the hole and the outer rectangle and splits each quadrilateral along
    alternating diagonals; ``jitter`` and ``seed`` are ignored. ``layout="delaunay"``
    triangulates a jittered hexagonal lattice (see :func:`_delaunay_plate`).

    Node sets: the edge tags ``hole``, ``left_edge``, ``right_edge``, ``top_edge``,
    ``bottom_edge``, plus ``outer``, ``corner_bl``, ``point_A`` (right-edge midpoint),
    ``point_B`` (hole top) and ``path_C`` (nodes on the segment from the hole top to
    the top edge).
    """
    L, Hh, r = float(length), float(height), float(hole_radius)
    k = int(refinement)
    if not (L > 0 and Hh > 0):
        raise MeshError("plate dimensions must be positive")
    if not (0 < r < min(L, Hh) / 2):
        raise MeshError(f"hole radius must satisfy 0 < r < min(L, H)/2, got r={r}")
    if k < 1 or k != refinement:
        raise MeshError("refinement must be an integer >= 1")
    if layout == "annulus":
        nodes, tri, is_hole = _annulus_plate(L, Hh, r, k)
        return _finish_plate(nodes, tri, is_hole, L, Hh, r)
    if layout != "delaunay":
        raise MeshError(f"unknown mesh layout {layout!r}; choose from {LAYOUTS}")
    return _delaunay_plate(L, Hh, r, k, jitter, seed)


def _annulus_plate(L, Hh, r, k):
    xc, yc = L / 2, Hh / 2
    n_long = 2 * max(1, round(k * L / Hh))

    def side(p, q, n):
        p, q = np.asarray(p, float), np.asarray(q, float)
        return p + (q - p) * (np.arange(n)[:, None] / n)

    # outer loop counterclockwise from the right-edge midpoint
    outer = np.vstack([side((L, yc), (L, Hh), k), side((L, Hh), (0, Hh), n_long),
                       side((0, Hh), (0, 0), 2 * k), side((0, 0), (L, 0), n_long),
                       side((L, 0), (L, yc), k)])
    nt = len(outer)
    ang = np.arctan2(outer[:, 1] - yc, outer[:, 0] - xc)
    inner = np.column_stack([xc + r * np.cos(ang), yc + r * np.sin(ang)])
    # exact axis points where the rays are axis-aligned
    for j, (dx, dy) in enumerate(outer - (xc, yc)):
        if abs(dy) < 1e-12 * Hh:
            inner[j] = (xc + math.copysign(r, dx), yc)
        elif abs(dx) < 1e-12 * L:
            inner[j] = (xc, yc + math.copysign(r, dy))
    nr = 3 * k
    s = np.arange(nr + 1) / nr
    nodes = (inner[None] * (1 - s)[:, None, None] + outer[None] * s[:, None, None]).reshape(-1, 2)
    i, j = np.meshgrid(np.arange(nr), np.arange(nt), indexing="ij")
    i, j = i.ravel(), j.ravel()
    a, b = i * nt + j, i * nt + (j + 1) % nt
    c, d = b + nt, a + nt
    alt = (i + j) % 2 == 1
    tri = np.concatenate([np.where(alt[:, None], np.column_stack([a, b, d]),
                                   np.column_stack([a, b, c])),
                          np.where(alt[:, None], np.column_stack([b, c, d]),
                                   np.column_stack([a, c, d]))])
    is_hole = np.zeros(len(nodes), dtype=bool)
    is_hole[:nt] = True
    return nodes, tri, is_hole


def _delaunay_plate(L, Hh, r, k, jitter, seed) -> Mesh:
    """Delaunay triangulation of a jittered lattice on a rectangle minus a centred hole.

    Interior points come from a hexagonal lattice of spacing ``h = height / (4 k)``.
    Rows hit both horizontal edges and the mid-height line, and the hole polygon has a
    multiple of four vertices, so the right-edge midpoint and the hole top are nodes.
    Interior lattice points are displaced by up to ``jitter * h`` (seeded), which gives
    an unstructured mesh without edges aligned to any preferred direction.
    """
    if not 0.0 <= jitter < 0.5:
        raise MeshError("jitter must lie in [0, 0.5)")
    h = Hh / (4 * k)
    xc, yc = L / 2, Hh / 2
    gap = min(L / 2 - r, Hh / 2 - r)

    ny = max(2, 2 * round(Hh / (h * math.sqrt(3) / 2) / 2))
    nx = max(2, 2 * round(L / h / 2))
    dx = L / nx
    pts = []
    for j in range(ny + 1):
        y = Hh * j / ny
        if j % 2 == 0 or j == ny:
            xs = dx * np.arange(nx + 1)
        else:
            xs = np.concatenate([[0.0], dx * (np.arange(nx) + 0.5), [L]])
            xs = np.concatenate([xs, [xc]])
        pts.extend((x, y) for x in np.unique(xs))
    pts = np.array(pts)
    if jitter:
        eps = 1e-9 * h
        inner = ((pts[:, 0] > eps) & (pts[:, 0] < L - eps) & (pts[:, 1] > eps)
                 & (pts[:, 1] < Hh - eps) & (np.abs(pts[:, 0] - xc) > eps))
        rng = np.random.default_rng(seed)
        ang_j = rng.uniform(0.0, 2 * math.pi, len(pts))
        rad_j = jitter * h * np.sqrt(rng.uniform(0.0, 1.0, len(pts)))
        shift = np.column_stack([rad_j * np.cos(ang_j), rad_j * np.sin(ang_j)])
        # damp the displacement near the straight edges so points stay inside
        room = np.minimum.reduce([pts[:, 0], L - pts[:, 0], pts[:, 1], Hh - pts[:, 1]])
        shift *= np.minimum(1.0, room / (2 * jitter * h))[:, None]
        pts[inner] += shift[inner]
    # keep the lattice clear of the hole boundary
    clear = min(0.6 * h, 0.5 * gap)
    dist = np.hypot(pts[:, 0] - xc, pts[:, 1] - yc)
    pts = pts[dist >= r + clear]

    nh = max(8, 4 * math.ceil(2 * math.pi * r / h / 4))
    ang = 2 * math.pi * np.arange(nh) / nh
    circ = np.column_stack([xc + r * np.cos(ang), yc + r * np.sin(ang)])
    circ[nh // 4] = (xc, yc + r)
    # exact axis points
    circ[0] = (xc + r, yc)
    circ[nh // 2] = (xc - r, yc)
    circ[3 * nh // 4] = (xc, yc - r)
    nodes = np.vstack([pts, circ])
    hole_ids = np.arange(len(pts), len(nodes))

    tri = Delaunay(nodes).simplices
    cen = nodes[tri].mean(axis=1)
    keep = np.hypot(cen[:, 0] - xc, cen[:, 1] - yc) > r
    tri = tri[keep]
    area = _signed_areas(nodes, tri)
    tri = tri[np.abs(area) > 1e-12 * h * h]

    used = np.unique(tri)
    remap = -np.ones(len(nodes), dtype=np.int64)
    remap[used] = np.arange(used.size)
    nodes, tri = nodes[used], remap[tri]
    is_hole = np.zeros(len(remap), dtype=bool)
    is_hole[hole_ids] = True
    is_hole = is_hole[used]
    mesh = _finish_plate(nodes, tri, is_hole, L, Hh, r)
    if len(mesh.edges_with_tag("hole")) != nh:
        raise MeshError("hole boundary was not resolved; try a higher refinement")
    return mesh


def _finish_plate(nodes, tri, is_hole, L, Hh, r) -> Mesh:
    """Tag the boundary edges and build the benchmark node sets."""
    xc, yc = L / 2, Hh / 2
    prelim = Mesh.from_arrays(nodes, tri, check_loops=False)
    free = prelim.free_edges()
    tol = 1e-12 * max(L, Hh)
    x, y = nodes[:, 0], nodes[:, 1]
    tags = []
    for a, b in free:
        if is_hole[a] and is_hole[b]:
            tags.append("hole")
        elif abs(x[a]) < tol and abs(x[b]) < tol:
            tags.append("left_edge")
        elif abs(x[a] - L) < tol and abs(x[b] - L) < tol:
            tags.append("right_edge")
        elif abs(y[a]) < tol and abs(y[b]) < tol:
            tags.append("bottom_edge")
        elif abs(y[a] - Hh) < tol and abs(y[b] - Hh) < tol:
            tags.append("top_edge")
        else:
            raise MeshError("mesh generation produced an unexpected boundary edge; "
                            "try a different refinement")

    def nearest(px, py):
        return int(np.argmin(np.hypot(x - px, y - py)))

    on_c = np.flatnonzero((np.abs(x - xc) < tol) & (y >= yc + r - tol))
    outer_tags = {"left_edge", "right_edge", "top_edge", "bottom_edge"}
    outer = np.unique(free[[t in outer_tags for t in tags]])
    sets = {
        "outer": outer,
        "corner_bl": [nearest(0.0, 0.0)],
        "point_A": [nearest(L, yc)],
        "point_B": [nearest(xc, yc + r)],
        "path_C": on_c[np.argsort(y[on_c])],
    }
    mesh = Mesh.from_arrays(nodes, tri, free, tags, sets)
    return mesh


def plate_probe_path(length: float, height: float, hole_radius: float) -> np.ndarray:
    """Polyline of the path from the hole top to the top edge."""
    return np.array([[length / 2, height / 2 + hole_radius], [length / 2, height]])
