"""Global block matrices and load vectors in the time-scaled layout.

Rows of the displacement equation are multiplied by ``dt**2`` and the rows of
the pressure and concentration equations by ``dt``, so that with
``X = (U, P, Psi, W1, W2)`` one step reads

    (At1 + A1) U + dt^2 B1^T Psi                   = F + At1 (2 U^n - U^{n-1})
    (At2 + A2) P - B2^T Psi                        = G + At2 P^n - B2^T Psi^n
    B1 U + B2 P - A3 Psi                           = 0
    (At4 + A4) W1 + C1                             = J1 + At4 W1^n
    (At5 + A5) W2 + C2                             = J2 + At5 W2^n

with ``C1, C2`` the convection vectors. ``F``, ``J1``, ``J2`` and ``C`` depend
on the iterate; :func:`assemble_forms` evaluates them at a given state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import boundary_load_u, body_load_u, scalar_load_p1, scatter_vector
from .mesh import Mesh
from .physics import Physics
from .solver import CoupledSolver, FemState, _keys


@dataclass
class DiscreteForms:
    At1: sp.csr_matrix
    A1: sp.csr_matrix
    B1: sp.csr_matrix  # (N2, N1)
    B2: sp.csr_matrix  # (N2, N3)
    At2: sp.csr_matrix
    A2: sp.csr_matrix
    A3: sp.csr_matrix
    At4: sp.csr_matrix
    A4: sp.csr_matrix
    At5: sp.csr_matrix
    A5: sp.csr_matrix
    F: np.ndarray
    G: np.ndarray
    J1: np.ndarray
    J2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    dt: float

    def residual(self, new: FemState, old: FemState, older: FemState | None = None) -> dict[str, np.ndarray]:
        """Row residuals of the scaled system; ``older`` defaults to ``old``."""
        older = older if older is not None else old
        dt2 = self.dt**2
        return {
            "u": (self.At1 + self.A1) @ new.u + dt2 * (self.B1.T @ new.psi) - self.F
            - self.At1 @ (2.0 * old.u - older.u),
            "p": (self.At2 + self.A2) @ new.p - self.B2.T @ new.psi - self.G - self.At2 @ old.p + self.B2.T @ old.psi,
            "psi": self.B1 @ new.u + self.B2 @ new.p - self.A3 @ new.psi,
            "w1": (self.At4 + self.A4) @ new.w1 + self.C1 - self.J1 - self.At4 @ old.w1,
            "w2": (self.At5 + self.A5) @ new.w2 + self.C2 - self.J2 - self.At5 @ old.w2,
        }


def assemble_forms(mesh: Mesh, physics: Physics, dt: float, state: FemState, previous: FemState | None = None,
                   solver: CoupledSolver | None = None) -> DiscreteForms:
    """Assemble every block for the step ending at ``state.time``.

    ``previous`` is the state at the start of the step; it enters the
    velocity in the convection term and in the dilatation source of the
    reactions. It defaults to ``state`` (zero velocity).
    """
    s = solver if solver is not None else CoupledSolver(mesh, physics, dt)
    p, d, f = physics.params, s.dofs, s.forms
    m, n = d.n_triangles, d.n_vertices
    t = state.time
    previous = previous if previous is not None else state
    x, x_n = state.vector(), previous.vector()
    ul = d.u_local
    pl = d.p_local - d.offsets["p"]
    vl = np.arange(n)[mesh.triangles]
    el = np.arange(m)[:, None]

    def mat(rows, cols, vals, shape):
        return sp.coo_matrix((np.asarray(vals).ravel(), _keys(rows, cols)), shape=shape).tocsr()

    n1, n2, n3, n4 = d.n1, d.n2, d.n3, d.n4
    mass_u = mat(ul, ul, f.mass_u, (n1, n1))
    stiff_u = mat(ul, ul, f.stiff_u, (n1, n1))
    robin = sp.csr_matrix((n1, n1))
    if s.robin is not None:
        robin = s.robin[:n1, :n1] * s.zeta(t)
    mass_p = mat(pl, pl, f.mass_p1, (n3, n3))
    stiff_p = mat(pl, pl, f.stiff_p1, (n3, n3))
    mass_w = mat(vl, vl, f.mass_p1, (n4, n4))
    stiff_w = mat(vl, vl, f.stiff_p1, (n4, n4))
    storage = p.c0 + p.alpha**2 / p.lam

    # state-dependent vectors
    qb, wa, lam = s.qb, s.qb.wa, s.qb.lam
    ut_q, _div_q, w1q, w2q, g1, g2, kin = s._pointwise(x, x_n, t)
    load_u = np.zeros(n1)
    if p.tau != 0:
        r = physics.active.r(w1q, w2q, t)
        ru = ((wa * r)[:, :, None] * s.k_q).transpose(0, 2, 1) @ s._kgrad
        load_u += scatter_vector(ul, p.tau * ru.reshape(m, 8), n1)
    if physics.body_force is not None:
        load_u += body_load_u(qb, d, physics.body_force, t)
    if physics.traction is not None and s.traction_mask.any():
        load_u += boundary_load_u(mesh, d, s.traction_mask, physics.traction, t)
    load_p = np.zeros(n3)
    if physics.fluid_source is not None:
        load_p = scalar_load_p1(qb, pl, physics.fluid_source, t, n3)
    elif p.ell != 0:
        load_p = p.ell * scatter_vector(pl, f.p1_p0, n3)
    conv1 = np.einsum("eqc,ec->eq", ut_q, g1)
    conv2 = np.einsum("eqc,ec->eq", ut_q, g2)

    def p1_load(values):
        return scatter_vector(vl, (wa * values) @ lam, n4)

    return DiscreteForms(
        At1=p.rho * mass_u,
        A1=dt**2 * (p.mu * stiff_u + robin),
        B1=mat(el, ul, -f.div_u[:, None, :], (n2, n1)),
        B2=mat(el, pl, p.alpha / p.lam * f.p1_p0[:, None, :], (n2, n3)),
        At2=storage * mass_p,
        A2=dt * p.mobility * stiff_p,
        A3=sp.diags(f.area / p.lam).tocsr(),
        At4=mass_w,
        A4=dt * p.D1 * stiff_w,
        At5=mass_w.copy(),
        A5=dt * p.D2 * stiff_w,
        F=dt**2 * load_u,
        G=dt * load_p,
        J1=dt * p1_load(kin.f),
        J2=dt * p1_load(kin.g),
        C1=dt * p1_load(conv1),
        C2=dt * p1_load(conv2),
        dt=dt,
    )
