"""Triangle meshes: validation, generators and a plain-text exchange format.

Text format (whitespace separated ASCII)::

    vertices N
    x y            (N lines)
    triangles M
    i j k          (M lines, 0-based vertex indices)
    edges E        (optional section)
    i j tag        (E lines, tag in Gamma | Sigma | None)

Boundary edges missing from the ``edges`` section are tagged ``Gamma``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.spatial

from ..errors import InvalidMesh, SingularElement

TAGS = ("Gamma", "Sigma", "None")
GAMMA, SIGMA, NONE = 0, 1, 2


@dataclass
class Mesh:
    vertices: np.ndarray  # (N, 2)
    triangles: np.ndarray  # (M, 3), counter-clockwise
    boundary_edges: np.ndarray  # (E, 2) vertex pairs
    boundary_markers: np.ndarray  # (E,) codes into TAGS

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        self.boundary_edges = np.asarray(self.boundary_edges, dtype=np.int64).reshape(-1, 2)
        self.boundary_markers = np.asarray(self.boundary_markers, dtype=np.int8).reshape(-1)
        validate(self)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def areas(self) -> np.ndarray:
        return self.signed_areas()

    def edge_vertices(self, tag: int) -> np.ndarray:
        """Sorted unique vertices lying on edges with the given tag."""
        return np.unique(self.boundary_edges[self.boundary_markers == tag])

    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.boundary_edges[:, 1]] - self.vertices[self.boundary_edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def h_max(self) -> float:
        p = self.vertices[self.triangles]
        lengths = np.linalg.norm(p - np.roll(p, 1, axis=1), axis=2)
        return float(lengths.max())


def boundary_edges_of(triangles: np.ndarray) -> np.ndarray:
    """Edges used by exactly one triangle, oriented as in that triangle."""
    t = np.asarray(triangles)
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    if np.any(counts > 2):
        raise InvalidMesh("an edge is shared by more than two triangles")
    return edges[counts[inverse] == 1]


def validate(mesh: Mesh) -> None:
    v, t = mesh.vertices, mesh.triangles
    if v.ndim != 2 or v.shape[1] != 2:
        raise InvalidMesh("vertices must have shape (N, 2)")
    if t.ndim != 2 or t.shape[1] != 3 or len(t) == 0:
        raise InvalidMesh("triangles must have shape (M, 3) with M >= 1")
    if t.min() < 0 or t.max() >= len(v):
        raise InvalidMesh("triangle references a missing vertex")
    if np.any(t[:, 0] == t[:, 1]) or np.any(t[:, 1] == t[:, 2]) or np.any(t[:, 0] == t[:, 2]):
        raise SingularElement("triangle with repeated vertices")
    area = mesh.signed_areas()
    scale = max(float(np.ptp(v, axis=0).max()), 1e-300) ** 2
    if np.any(np.abs(area) <= 1e-14 * scale):
        raise SingularElement(f"zero-area triangle at index {int(np.argmin(np.abs(area)))}")
    if np.any(area < 0):
        raise InvalidMesh("triangles must be positively oriented")
    expected = {tuple(e) for e in np.sort(boundary_edges_of(t), axis=1)}
    given = [tuple(e) for e in np.sort(mesh.boundary_edges, axis=1)]
    if len(given) != len(mesh.boundary_markers):
        raise InvalidMesh("one marker per boundary edge is required")
    if set(given) != expected or len(given) != len(expected):
        raise InvalidMesh("boundary edge list does not match the triangulation boundary (non-conforming mesh?)")
    if mesh.boundary_markers.size and (mesh.boundary_markers.min() < 0 or mesh.boundary_markers.max() > 2):
        raise InvalidMesh("unknown boundary marker")


Tagger = Callable[[np.ndarray], np.ndarray]


def _tag_edges(vertices, edges, tagger: Tagger | None) -> np.ndarray:
    if tagger is None:
        return np.full(len(edges), GAMMA, dtype=np.int8)
    mid = 0.5 * (vertices[edges[:, 0]] + vertices[edges[:, 1]])
    return np.asarray(tagger(mid), dtype=np.int8)


def from_triangulation(vertices, triangles, tagger: Tagger | None = None) -> Mesh:
    """Orient triangles counter-clockwise, extract and tag the boundary."""
    v = np.asarray(vertices, dtype=float)
    t = np.array(triangles, dtype=np.int64)
    p = v[t]
    signed = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    t[signed < 0] = t[signed < 0][:, [0, 2, 1]]
    edges = boundary_edges_of(t)
    return Mesh(v, t, edges, _tag_edges(v, edges, tagger))


def rectangle_mesh(lx: float, ly: float, nx: int, ny: int, tagger: Tagger | None = None,
                   origin=(0.0, 0.0)) -> Mesh:
    """Uniform ``nx`` by ``ny`` grid of squares, each split along alternating diagonals."""
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be at least 1")
    x = origin[0] + np.linspace(0.0, lx, nx + 1)
    y = origin[1] + np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(x, y)
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    j, i = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    v00 = i * (nx + 1) + j
    v10, v01, v11 = v00 + 1, v00 + nx + 1, v00 + nx + 2
    flip = (i + j) % 2 == 1
    t1 = np.where(flip[:, None], np.column_stack([v00, v10, v01]), np.column_stack([v00, v10, v11]))
    t2 = np.where(flip[:, None], np.column_stack([v10, v11, v01]), np.column_stack([v00, v11, v01]))
    return from_triangulation(vertices, np.concatenate([t1, t2]), tagger)


def disk_mesh(center=(0.5, 0.5), radius: float = 0.5, n_rings: int = 20, tagger: Tagger | None = None) -> Mesh:
    """Quasi-uniform disk: concentric rings of points at spacing ``radius/n_rings``,
    connected by Delaunay triangulation. About ``2*pi*n_rings**2`` triangles."""
    if n_rings < 1:
        raise ValueError("n_rings must be at least 1")
    pts = [np.zeros((1, 2))]
    for j in range(1, n_rings + 1):
        n = max(6, int(round(2.0 * np.pi * j)))
        # alternate the angular offset so neighbouring rings interleave
        a = 2.0 * np.pi * (np.arange(n) + 0.5 * (j % 2)) / n
        r = radius * j / n_rings
        pts.append(np.column_stack([r * np.cos(a), r * np.sin(a)]))
    local = np.concatenate(pts)
    tri = scipy.spatial.Delaunay(local, qhull_options="Qbb Qc Qz Q12").simplices
    return from_triangulation(local + np.asarray(center, dtype=float), tri, tagger)


def disk_rings_for(n_triangles: int) -> int:
    return max(1, int(round(np.sqrt(n_triangles / (2.0 * np.pi)))))


def read_mesh(path) -> Mesh:
    tokens = Path(path).read_text().split()
    pos = 0

    def expect(word):
        nonlocal pos
        if pos >= len(tokens) or tokens[pos] != word:
            raise InvalidMesh(f"expected '{word}' at token {pos}")
        pos += 1
        count = int(tokens[pos])
        pos += 1
        return count

    try:
        n = expect("vertices")
        v = np.array(tokens[pos:pos + 2 * n], dtype=float).reshape(n, 2)
        pos += 2 * n
        m = expect("triangles")
        t = np.array(tokens[pos:pos + 3 * m], dtype=np.int64).reshape(m, 3)
        pos += 3 * m
        tagged = {}
        if pos < len(tokens):
            e = expect("edges")
            for k in range(e):
                a, b, tag = tokens[pos + 3 * k:pos + 3 * k + 3]
                if tag not in TAGS:
                    raise InvalidMesh(f"unknown edge tag {tag!r}")
                tagged[tuple(sorted((int(a), int(b))))] = TAGS.index(tag)
            pos += 3 * e
        if pos != len(tokens):
            raise InvalidMesh("trailing content after mesh sections")
    except ValueError as exc:
        if isinstance(exc, InvalidMesh):
            raise
        raise InvalidMesh(f"malformed mesh file: {exc}") from exc
    edges = boundary_edges_of(t)
    markers = np.array([tagged.get(tuple(sorted(e)), GAMMA) for e in edges.tolist()], dtype=np.int8)
    return Mesh(v, t, edges, markers)


def write_mesh(mesh: Mesh, path) -> None:
    lines = [f"vertices {mesh.n_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    lines.append(f"edges {len(mesh.boundary_edges)}")
    lines += [f"{a} {b} {TAGS[m]}" for (a, b), m in zip(mesh.boundary_edges.tolist(), mesh.boundary_markers.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")
