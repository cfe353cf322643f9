"""Vectorised element integrals and global scatter.

Local displacement basis per component: the three barycentric hats and the
cubic bubble ``27*l0*l1*l2``. Element arrays index the eight local
displacement functions as ``c*4 + a`` (component ``c``, scalar function ``a``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import SingularElement
from .mesh import Mesh
from .quadrature import DEGREE4, DEGREE6, GAUSS2_EDGE, TriangleRule, require_degree
from .spaces import DofMap


@dataclass(frozen=True)
class Geometry:
    coords: np.ndarray  # (M, 3, 2)
    area: np.ndarray  # (M,)
    grad_l: np.ndarray  # (M, 3, 2) gradients of barycentric coordinates


def element_geometry(mesh: Mesh) -> Geometry:
    p = mesh.vertices[mesh.triangles]
    area = mesh.signed_areas()
    if np.any(area <= 0):
        raise SingularElement("non-positive element area")
    # grad l_i = rot(p_{i+2} - p_{i+1}) / (2|T|)
    nxt, prv = np.roll(p, -1, axis=1), np.roll(p, -2, axis=1)
    d = prv - nxt
    grad = np.stack([-d[..., 1], d[..., 0]], axis=-1) / (2.0 * area[:, None, None])
    return Geometry(coords=p, area=area, grad_l=grad)


@dataclass(frozen=True)
class QuadBasis:
    rule: TriangleRule
    lam: np.ndarray  # (nq, 3)
    phi: np.ndarray  # (nq, 4) hats then bubble
    grad: np.ndarray  # (M, nq, 4, 2)
    x: np.ndarray  # (M, nq, 2)
    wa: np.ndarray  # (M, nq) weights times area


def quad_basis(geom: Geometry, rule: TriangleRule) -> QuadBasis:
    lam = rule.barycentric
    l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
    phi = np.column_stack([lam, 27.0 * l0 * l1 * l2])
    # d(bubble) = 27 * sum_i (product of the other two) grad l_i
    others = np.column_stack([l1 * l2, l0 * l2, l0 * l1])
    gb = 27.0 * np.einsum("qi,eid->eqd", others, geom.grad_l)
    gh = np.broadcast_to(geom.grad_l[:, None, :, :], (len(geom.area), len(lam), 3, 2))
    grad = np.concatenate([gh, gb[:, :, None, :]], axis=2)
    x = np.einsum("qi,eid->eqd", lam, geom.coords)
    wa = geom.area[:, None] * rule.weights[None, :]
    return QuadBasis(rule=rule, lam=lam, phi=phi, grad=grad, x=x, wa=wa)


@dataclass(frozen=True)
class LocalForms:
    """Constant element matrices (exact integration)."""

    mass_u: np.ndarray  # (M, 8, 8) vector mass incl. bubble
    stiff_u: np.ndarray  # (M, 8, 8) 2 mu eps:eps with mu = 1
    div_u: np.ndarray  # (M, 8) int div(phi_(c,a)) over the element
    mass_p1: np.ndarray  # (M, 3, 3)
    stiff_p1: np.ndarray  # (M, 3, 3)
    p1_p0: np.ndarray  # (M, 3) int l_i
    area: np.ndarray


def local_forms(geom: Geometry) -> LocalForms:
    # bubble-bubble mass is degree 6
    qb = quad_basis(geom, DEGREE6)
    require_degree(qb.rule, 6)
    m4 = np.einsum("eq,qa,qb->eab", qb.wa, qb.phi, qb.phi)
    m = len(geom.area)
    mass_u = np.zeros((m, 2, 4, 2, 4))
    mass_u[:, 0, :, 0, :] = m4
    mass_u[:, 1, :, 1, :] = m4
    # P[e, a, i, b, j] = int d_i phi_a d_j phi_b
    P = np.einsum("eq,eqai,eqbj->eaibj", qb.wa, qb.grad, qb.grad)
    S = np.einsum("eaibi->eab", P)
    # test (d, b), trial (c, a): delta_cd grad.grad + d_d phi_a d_c phi_b, halved and doubled away
    K = np.einsum("eadbc->edbca", P).copy()
    K[:, 0, :, 0, :] += S.transpose(0, 2, 1)
    K[:, 1, :, 1, :] += S.transpose(0, 2, 1)
    div = np.einsum("eq,eqai->eia", qb.wa, qb.grad).reshape(m, 8)
    a = geom.area
    mass_p1 = a[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))
    stiff_p1 = a[:, None, None] * np.einsum("eid,ejd->eij", geom.grad_l, geom.grad_l)
    return LocalForms(
        mass_u=mass_u.reshape(m, 8, 8),
        stiff_u=K.reshape(m, 8, 8),
        div_u=div,
        mass_p1=mass_p1,
        stiff_p1=stiff_p1,
        p1_p0=np.repeat(a[:, None] / 3.0, 3, axis=1),
        area=a,
    )


def scatter_matrix(rows, cols, vals, shape) -> sp.csr_matrix:
    """Sum element blocks ``vals[e, i, j]`` into ``(rows[e, i], cols[e, j])``."""
    rows = np.asarray(rows).reshape(len(vals), -1)
    cols = np.asarray(cols).reshape(len(vals), -1)
    r = np.broadcast_to(rows[:, :, None], vals.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], vals.shape).ravel()
    return sp.coo_matrix((np.asarray(vals).ravel(), (r, c)), shape=shape).tocsr()


def scatter_vector(idx, vals, n) -> np.ndarray:
    return np.bincount(np.asarray(idx).ravel(), weights=np.asarray(vals).ravel(), minlength=n)


def boundary_mass_u(mesh: Mesh, dofs: DofMap, edge_mask: np.ndarray) -> sp.csr_matrix:
    """``int u.v ds`` over the selected boundary edges (bubbles vanish there)."""
    e = mesh.boundary_edges[edge_mask]
    length = mesh.edge_lengths()[edge_mask]
    local = length[:, None, None] / 6.0 * (np.ones((2, 2)) + np.eye(2))
    n = dofs.n1
    out = sp.csr_matrix((n, n))
    for comp in range(2):
        idx = e + comp * dofs.n_vertices
        out = out + scatter_matrix(idx, idx, local, (n, n))
    return out


def boundary_load_u(mesh: Mesh, dofs: DofMap, edge_mask: np.ndarray, traction, t: float) -> np.ndarray:
    """``int t(x, time).v ds`` over selected edges, two-point Gauss per edge.

    ``traction(x, t)`` maps points ``(n, 2)`` to vectors ``(n, 2)``.
    """
    e = mesh.boundary_edges[edge_mask]
    out = np.zeros(dofs.n1)
    if len(e) == 0:
        return out
    length = mesh.edge_lengths()[edge_mask]
    pa, pb = mesh.vertices[e[:, 0]], mesh.vertices[e[:, 1]]
    s, w = GAUSS2_EDGE
    for sq, wq in zip(s, w):
        x = (1.0 - sq) * pa + sq * pb
        tv = np.asarray(traction(x, t), dtype=float).reshape(-1, 2)
        for comp in range(2):
            idx = e + comp * dofs.n_vertices
            vals = (wq * length * tv[:, comp])[:, None] * np.column_stack([1.0 - sq + 0 * length, sq + 0 * length])
            out += scatter_vector(idx, vals, dofs.n1)
    return out


def body_load_u(qb: QuadBasis, dofs: DofMap, force, t: float) -> np.ndarray:
    """``int f(x, t).v`` with ``force(x, t)`` mapping ``(..., 2)`` points to vectors."""
    f = np.asarray(force(qb.x, t), dtype=float)
    vals = np.einsum("eq,eqc,qa->eca", qb.wa, f, qb.phi).reshape(len(qb.wa), 8)
    return scatter_vector(dofs.u_local, vals, dofs.n1)


def scalar_load_p1(qb: QuadBasis, local_idx, source, t: float, n: int) -> np.ndarray:
    s = np.asarray(source(qb.x, t), dtype=float)
    vals = np.einsum("eq,eq,qi->ei", qb.wa, s, qb.lam)
    return scatter_vector(local_idx, vals, n)


NONLINEAR_RULE = DEGREE4
