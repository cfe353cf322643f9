"""Degree-of-freedom maps for the mixed discretisation.

Unknown vector layout ``X = [U, P, Psi, W1, W2]``:

* ``U``: vector P1 plus one cubic bubble per triangle and component, ordered
  ``[ux at vertices, uy at vertices, bubble x per triangle, bubble y per triangle]``;
* ``P``: fluid pressure, P1;
* ``Psi``: total pressure, P0;
* ``W1``, ``W2``: concentrations, P1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidMesh
from .mesh import Mesh


@dataclass(frozen=True)
class DofMap:
    n_vertices: int
    n_triangles: int
    u_local: np.ndarray  # (M, 8) local order [x: l0, l1, l2, bubble | y: l0, l1, l2, bubble]
    p_local: np.ndarray  # (M, 3)
    psi_local: np.ndarray  # (M,)
    w1_local: np.ndarray  # (M, 3)
    w2_local: np.ndarray  # (M, 3)

    @property
    def n1(self) -> int:
        """Displacement DoFs."""
        return 2 * self.n_vertices + 2 * self.n_triangles

    @property
    def n2(self) -> int:
        """Total-pressure DoFs."""
        return self.n_triangles

    @property
    def n3(self) -> int:
        """Fluid-pressure DoFs."""
        return self.n_vertices

    @property
    def n4(self) -> int:
        """DoFs per concentration."""
        return self.n_vertices

    @property
    def total(self) -> int:
        return self.n1 + self.n2 + self.n3 + 2 * self.n4

    @property
    def offsets(self) -> dict[str, int]:
        o_p = self.n1
        o_psi = o_p + self.n3
        o_w1 = o_psi + self.n2
        return {"u": 0, "p": o_p, "psi": o_psi, "w1": o_w1, "w2": o_w1 + self.n4, "end": self.total}

    def block(self, name: str) -> slice:
        order = ["u", "p", "psi", "w1", "w2", "end"]
        off = self.offsets
        return slice(off[name], off[order[order.index(name) + 1]])

    def vertex_dofs_u(self, vertices: np.ndarray) -> np.ndarray:
        v = np.asarray(vertices, dtype=np.int64)
        return np.concatenate([v, v + self.n_vertices])


def build_spaces(mesh: Mesh) -> DofMap:
    if not isinstance(mesh, Mesh):
        raise InvalidMesh("build_spaces expects a Mesh")
    n, m = mesh.n_vertices, mesh.n_triangles
    t = mesh.triangles
    e = np.arange(m, dtype=np.int64)
    u_local = np.column_stack([t, 2 * n + e, t + n, 2 * n + m + e])
    o_p = 2 * n + 2 * m
    o_psi = o_p + n
    o_w1 = o_psi + m
    return DofMap(
        n_vertices=n,
        n_triangles=m,
        u_local=u_local,
        p_local=t + o_p,
        psi_local=e + o_psi,
        w1_local=t + o_w1,
        w2_local=t + o_w1 + n,
    )
