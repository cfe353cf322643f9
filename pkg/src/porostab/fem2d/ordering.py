"""Fill-reducing vertex ordering by geometric nested dissection."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


def vertex_adjacency(mesh: Mesh) -> sp.csr_matrix:
    t = mesh.triangles
    a = np.concatenate([t[:, 0], t[:, 1], t[:, 2], t[:, 1], t[:, 2], t[:, 0]])
    b = np.concatenate([t[:, 1], t[:, 2], t[:, 0], t[:, 0], t[:, 1], t[:, 2]])
    n = mesh.n_vertices
    return sp.csr_matrix((np.ones(len(a)), (a, b)), shape=(n, n))


def nested_dissection(mesh: Mesh, leaf: int = 16) -> np.ndarray:
    """Vertex permutation: recursive median bisection along the longer axis,
    separator vertices numbered after both halves."""
    xy = mesh.vertices
    adj = vertex_adjacency(mesh)
    side = np.zeros(len(xy))
    out = []

    def recurse(idx):
        if len(idx) <= leaf:
            out.append(idx)
            return
        c = xy[idx]
        axis = int(np.argmax(np.ptp(c, axis=0)))
        median = np.median(c[:, axis])
        left, right = idx[c[:, axis] <= median], idx[c[:, axis] > median]
        if len(left) == 0 or len(right) == 0:
            out.append(idx)
            return
        side[right] = 1.0
        touches = (adj[left] @ side) > 0
        side[right] = 0.0
        recurse(left[~touches])
        recurse(right)
        out.append(left[touches])

    recurse(np.arange(len(xy)))
    return np.concatenate(out)
