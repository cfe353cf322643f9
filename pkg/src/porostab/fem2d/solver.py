"""Coupled time stepping: residual, exact Newton tangent and sparse LU.

Per step the unknown ``X = [U, P, Psi, W1, W2]`` at ``t^{n+1}`` solves
``R(X) = A X + N(X) - H = 0`` where ``A`` holds every linear form, ``N`` the
active stress, convection and reaction terms and ``H`` the history and load
terms. The total-pressure rows are multiplied by ``lambda`` to balance them
against the momentum rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import LinearSolveFailure, NewtonDiverged
from ..model import ModelParams
from .assembly import (
    NONLINEAR_RULE,
    body_load_u,
    boundary_load_u,
    boundary_mass_u,
    element_geometry,
    local_forms,
    quad_basis,
    scalar_load_p1,
    scatter_vector,
)
from .mesh import GAMMA, SIGMA, Mesh
from .ordering import nested_dissection
from .physics import Physics
from .spaces import DofMap, build_spaces


@dataclass
class FemState:
    u: np.ndarray
    p: np.ndarray
    psi: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    time: float = 0.0

    def vector(self) -> np.ndarray:
        return np.concatenate([self.u, self.p, self.psi, self.w1, self.w2])

    @classmethod
    def from_vector(cls, dofs: DofMap, x: np.ndarray, time: float) -> "FemState":
        b = dofs.block
        return cls(*(np.array(x[b(k)]) for k in ("u", "p", "psi", "w1", "w2")), time=time)

    def copy(self) -> "FemState":
        return replace(self, u=self.u.copy(), p=self.p.copy(), psi=self.psi.copy(), w1=self.w1.copy(), w2=self.w2.copy())


@dataclass
class StepReport:
    iterations: int
    residuals: list = field(default_factory=list)
    constraint_residual: float = 0.0


def _keys(rows, cols):
    r = np.broadcast_to(rows[:, :, None], (rows.shape[0], rows.shape[1], cols.shape[1])).ravel()
    c = np.broadcast_to(cols[:, None, :], (cols.shape[0], rows.shape[1], cols.shape[1])).ravel()
    return r, c


class CoupledSolver:
    """Owns the discretisation of one scenario and advances states in time."""

    def __init__(self, mesh: Mesh, physics: Physics, dt: float, newton_tol: float = 1e-6, max_newton: int = 25):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.mesh = mesh
        self.physics = physics
        self.params: ModelParams = physics.params
        self.dt = float(dt)
        self.newton_tol = newton_tol
        self.max_newton = max_newton
        self.dofs = build_spaces(mesh)
        self.geom = element_geometry(mesh)
        self.forms = local_forms(self.geom)
        self.qb = quad_basis(self.geom, NONLINEAR_RULE)
        self.kinetics = physics.kinetics_law()
        self.k_q = physics.fibre(self.qb.x)  # (M, nq, 2)
        qb, m = self.qb, mesh.n_triangles
        nq = len(qb.rule.weights)
        self._grad_flat = qb.grad.reshape(m, nq, 8)
        self._kgrad = (qb.grad @ self.k_q[..., None])[..., 0]  # k . grad(phi_a), (M, nq, 4)
        self._kk_grad = (self.k_q[:, :, :, None] * self._kgrad[:, :, None, :]).reshape(m, nq, 8)
        self._lam_phi = (qb.lam[:, :, None] * qb.phi[:, None, :]).reshape(nq, 12)
        self._lam_lam = (qb.lam[:, :, None] * qb.lam[:, None, :]).reshape(nq, 9)
        self._dirichlet()
        self._constant_operator()
        self._pattern()

    # ------------------------------------------------------------------ setup
    def _dirichlet(self):
        """Solve-order numbering of the free DoFs.

        Vertex-based DoFs come first, blocked per vertex and ordered by nested
        dissection; the element-interior DoFs (two bubbles and the total
        pressure of each triangle) follow in contiguous triples and are
        condensed out exactly before factorisation.
        """
        d, mesh = self.dofs, self.mesh
        n, m = d.n_vertices, d.n_triangles
        off = d.offsets
        fixed = []
        if self.physics.bc_mode == "ClampedGamma_TractionSigma":
            fixed.append(d.vertex_dofs_u(mesh.edge_vertices(GAMMA)))
            fixed.append(mesh.edge_vertices(SIGMA) + off["p"])
        fixed = np.unique(np.concatenate(fixed)) if fixed else np.empty(0, dtype=np.int64)
        is_free = np.ones(d.total, dtype=bool)
        is_free[fixed] = False
        rank = np.empty(n, dtype=np.int64)
        rank[nested_dissection(mesh)] = np.arange(n)
        starts = [0, n, off["p"], off["w1"], off["w2"]]
        vert = np.concatenate([np.arange(n)] * 5)
        fields = np.repeat(np.arange(5), n)
        full = np.concatenate([s0 + np.arange(n) for s0 in starts])
        keep = is_free[full]
        full, vert, fields = full[keep], vert[keep], fields[keep]
        boundary = full[np.lexsort((fields, rank[vert]))]
        e = np.arange(m)
        interior = np.column_stack([2 * n + e, 2 * n + m + e, d.psi_local]).ravel()
        self.fixed = fixed
        self.order = np.concatenate([boundary, interior])
        self.n_b = len(boundary)
        self.reduced = np.full(d.total, -1, dtype=np.int64)
        self.reduced[self.order] = np.arange(len(self.order))

    def _constant_operator(self):
        p, d, f, dt = self.params, self.dofs, self.forms, self.dt
        lam, al = p.lam, p.alpha
        storage = p.c0 + al * al / lam
        m = d.n_triangles
        ul, pl, wl1, wl2 = d.u_local, d.p_local, d.w1_local, d.w2_local
        psl = d.psi_local[:, None]
        ones = np.ones((m, 1, 1))
        blocks = [
            (ul, ul, p.rho / dt**2 * f.mass_u + p.mu * 2.0 * 0.5 * f.stiff_u),
            (ul, psl, -f.div_u[:, :, None]),  # b1(v, psi)
            (pl, pl, storage / dt * f.mass_p1 + p.mobility * f.stiff_p1),
            (pl, psl, -al / (lam * dt) * f.p1_p0[:, :, None]),
            (psl, ul, -lam * f.div_u[:, None, :]),  # lambda * b1(u, phi)
            (psl, pl, al * f.p1_p0[:, None, :]),
            (psl, psl, -f.area[:, None, None] * ones),
            (wl1, wl1, f.mass_p1 / dt + p.D1 * f.stiff_p1),
            (wl2, wl2, f.mass_p1 / dt + p.D2 * f.stiff_p1),
        ]
        rows, cols, vals = [], [], []
        for r, c, v in blocks:
            rr, cc = _keys(r, c)
            rows.append(rr)
            cols.append(cc)
            vals.append(np.asarray(v).ravel())
        self._const_coo = (np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))
        n = d.total
        self.A = sp.coo_matrix((self._const_coo[2], self._const_coo[:2]), shape=(n, n)).tocsr()
        # history operators
        self.mass_u = sp.coo_matrix((f.mass_u.ravel(), _keys(ul, ul)), shape=(n, n)).tocsr()
        self.mass_p1 = sp.coo_matrix((f.mass_p1.ravel(), _keys(pl - d.offsets["p"], pl - d.offsets["p"])), shape=(d.n3, d.n3)).tocsr()
        self.p1_p0 = sp.coo_matrix((f.p1_p0.ravel(), _keys(pl - d.offsets["p"], (psl - d.offsets["psi"]).repeat(1, axis=1))), shape=(d.n3, d.n2)).tocsr()
        if self.physics.bc_mode == "Robin":
            rb = boundary_mass_u(self.mesh, d, np.ones(len(self.mesh.boundary_edges), dtype=bool)).tocoo()
            rb = sp.coo_matrix((rb.data, (rb.row, rb.col)), shape=(n, n))
            self._robin_coo = (rb.row.astype(np.int64), rb.col.astype(np.int64), rb.data)
            self.robin = rb.tocsr()
        else:
            self._robin_coo = None
            self.robin = None
        self.traction_mask = self.mesh.boundary_markers == SIGMA

    def _nonlinear_index(self):
        d = self.dofs
        wl = np.concatenate([d.w1_local, d.w2_local], axis=1)
        parts = [_keys(d.u_local, wl), _keys(wl, d.u_local), _keys(wl, wl)]
        if self.kinetics.uses_psi:
            parts.append(_keys(wl, d.psi_local[:, None]))
        return np.concatenate([a for a, _ in parts]), np.concatenate([b for _, b in parts])

    def _pattern(self):
        n = len(self.order)
        rc, cc, _ = self._const_coo
        rn, cn = self._nonlinear_index()
        sources = [(rc, cc), (rn, cn)]
        if self._robin_coo is not None:
            sources.append(self._robin_coo[:2])
        keys, keeps = [], []
        for r, c in sources:
            rr, cr = self.reduced[r], self.reduced[c]
            keep = (rr >= 0) & (cr >= 0)
            keeps.append(keep)
            keys.append(cr[keep] * n + rr[keep])  # column-major: CSC order
        uniq, inv = np.unique(np.concatenate(keys), return_inverse=True)
        sizes = np.cumsum([0] + [len(k) for k in keys])
        self._slot = [inv[sizes[i]:sizes[i + 1]] for i in range(len(keys))]
        self._keep = keeps
        self._indices = (uniq % n).astype(np.int32)
        col = uniq // n
        self._indptr = np.concatenate([[0], np.cumsum(np.bincount(col, minlength=n))]).astype(np.int32)
        self._nnz = len(uniq)
        self._const_data = np.bincount(self._slot[0], weights=self._const_coo[2][keeps[0]], minlength=self._nnz)
        if self._robin_coo is not None:
            self._robin_data = np.bincount(self._slot[2], weights=self._robin_coo[2][keeps[2]], minlength=self._nnz)
        # interior block is constant: bubble-bubble, bubble-psi and psi-psi couplings only
        const = sp.csc_matrix((self._const_data, self._indices, self._indptr), shape=(n, n))
        jii = const[self.n_b:, self.n_b:].tocoo()
        blocks = np.zeros(((n - self.n_b) // 3, 3, 3))
        if np.any(jii.row // 3 != jii.col // 3):
            raise AssertionError("interior DoFs couple across elements")
        blocks[jii.row // 3, jii.row % 3, jii.col % 3] = jii.data
        inv = np.linalg.inv(blocks)
        rows = np.arange(n - self.n_b).reshape(-1, 3)
        self._jii_inv = sp.csr_matrix(
            (inv.ravel(), (np.repeat(rows, 3, axis=1).ravel(), np.tile(rows, (1, 3)).ravel())),
            shape=(n - self.n_b, n - self.n_b),
        )

    # ---------------------------------------------------------------- physics
    def zeta(self, t: float) -> float:
        return float(self.physics.robin_stiffness(t)) if self.physics.robin_stiffness is not None else 0.0

    def history(self, x_n: np.ndarray, x_nm1: np.ndarray, t: float) -> np.ndarray:
        """Known right-hand side ``H`` for the step ending at time ``t``."""
        p, d, dt = self.params, self.dofs, self.dt
        b = d.block
        h = np.zeros(d.total)
        if p.rho > 0:
            h[b("u")] = p.rho / dt**2 * (self.mass_u @ (2.0 * x_n - x_nm1))[b("u")]
        if self.physics.body_force is not None:
            h[b("u")] += body_load_u(self.qb, d, self.physics.body_force, t)
        if self.physics.traction is not None and self.traction_mask.any():
            h[b("u")] += boundary_load_u(self.mesh, d, self.traction_mask, self.physics.traction, t)
        storage = p.c0 + p.alpha**2 / p.lam
        h[b("p")] = storage / dt * (self.mass_p1 @ x_n[b("p")]) - p.alpha / (p.lam * dt) * (self.p1_p0 @ x_n[b("psi")])
        if self.physics.fluid_source is not None:
            h[b("p")] += scalar_load_p1(self.qb, d.p_local - d.offsets["p"], self.physics.fluid_source, t, d.n3)
        elif p.ell != 0:
            h[b("p")] += p.ell * scatter_vector(d.p_local - d.offsets["p"], self.forms.p1_p0, d.n3)
        for name in ("w1", "w2"):
            h[b(name)] = self.mass_p1 @ x_n[b(name)] / dt
        return h

    def _pointwise(self, x, x_n, t):
        d, qb, dt = self.dofs, self.qb, self.dt
        m = d.n_triangles
        ut = ((x[d.u_local] - x_n[d.u_local]) / dt).reshape(m, 2, 4)
        ut_q = (ut @ qb.phi.T).transpose(0, 2, 1)  # (M, nq, 2)
        ut_ac = ut.transpose(0, 2, 1).reshape(m, 8, 1)  # (a, c) order matches grad
        div_q = (self._grad_flat @ ut_ac)[..., 0]
        W1, W2 = x[d.w1_local], x[d.w2_local]
        w1q, w2q = W1 @ qb.lam.T, W2 @ qb.lam.T
        g1 = (W1[:, None, :] @ self.geom.grad_l)[:, 0]
        g2 = (W2[:, None, :] @ self.geom.grad_l)[:, 0]
        psi = x[d.psi_local][:, None]
        kin = self.kinetics(w1q, w2q, div_q, psi)
        return ut_q, div_q, w1q, w2q, g1, g2, kin

    def nonlinear(self, x, x_n, t, jacobian: bool = True):
        """``N(X)`` and, optionally, the COO values of its derivative."""
        d, qb, dt, p = self.dofs, self.qb, self.dt, self.params
        m = d.n_triangles
        ut_q, div_q, w1q, w2q, g1, g2, kin = self._pointwise(x, x_n, t)
        wa, lam = qb.wa, qb.lam
        conv1 = np.einsum("eqc,ec->eq", ut_q, g1)
        conv2 = np.einsum("eqc,ec->eq", ut_q, g2)
        out = np.zeros(d.total)
        out += scatter_vector(d.w1_local, (wa * (conv1 - kin.f)) @ lam, d.total)
        out += scatter_vector(d.w2_local, (wa * (conv2 - kin.g)) @ lam, d.total)
        tau = p.tau
        if tau != 0:
            r = self.physics.active.r(w1q, w2q, t)
            ru = ((wa * r)[:, :, None] * self.k_q).transpose(0, 2, 1) @ self._kgrad
            out += scatter_vector(d.u_local, -tau * ru.reshape(m, 8), d.total)
        if not jacobian:
            return out, None
        # d R_u / d W : (M, 8, 6)
        juw = np.zeros((m, 8, 6))
        if tau != 0:
            r1, r2 = self.physics.active.dr(w1q, w2q, t)
            juw[:, :, :3] = -tau * (((wa * r1)[:, :, None] * self._kk_grad).transpose(0, 2, 1) @ lam)
            juw[:, :, 3:] = -tau * (((wa * r2)[:, :, None] * self._kk_grad).transpose(0, 2, 1) @ lam)
        # d R_w / d U : (M, 6, 8)
        jwu = np.zeros((m, 6, 2, 4))
        for s, (gw, fd) in enumerate(((g1, kin.f_div), (g2, kin.g_div))):
            conv_part = ((wa @ self._lam_phi).reshape(m, 3, 1, 4)) * gw[:, None, :, None]
            src = ((wa * fd)[:, :, None] * lam).transpose(0, 2, 1) @ self._grad_flat  # (M, 3, 8) in (a, c)
            jwu[:, 3 * s:3 * s + 3] = (conv_part - src.reshape(m, 3, 4, 2).transpose(0, 1, 3, 2)) / dt
        jwu = jwu.reshape(m, 6, 8)
        # d R_w / d W : (M, 6, 6)
        adv = ut_q @ self.geom.grad_l.transpose(0, 2, 1)  # (M, nq, 3)
        lam_w = (wa[:, :, None] * lam).transpose(0, 2, 1)  # (M, 3, nq)
        transport = lam_w @ adv
        ll = self._lam_lam

        def react(c):
            return ((wa * c) @ ll).reshape(m, 3, 3)

        jww = np.empty((m, 6, 6))
        jww[:, :3, :3] = transport - react(kin.f_w1)
        jww[:, :3, 3:] = -react(kin.f_w2)
        jww[:, 3:, :3] = -react(kin.g_w1)
        jww[:, 3:, 3:] = transport - react(kin.g_w2)
        vals = [juw.ravel(), jwu.ravel(), jww.ravel()]
        if self.kinetics.uses_psi:
            jwp = np.concatenate([-(wa * kin.f_psi) @ lam, -(wa * kin.g_psi) @ lam], axis=1)
            vals.append(jwp.ravel())
        return out, np.concatenate(vals)

    # ----------------------------------------------------------------- Newton
    def residual(self, x, x_n, h, t, jacobian: bool = True):
        nl, jvals = self.nonlinear(x, x_n, t, jacobian)
        r = self.A @ x + nl - h
        z = self.zeta(t)
        if self.robin is not None and z != 0:
            r += z * (self.robin @ x)
        return r, jvals

    def tangent(self, jvals, t) -> sp.csc_matrix:
        data = self._const_data + np.bincount(self._slot[1], weights=jvals[self._keep[1]], minlength=self._nnz)
        if self.robin is not None:
            data = data + self.zeta(t) * self._robin_data
        n = len(self.order)
        return sp.csc_matrix((data, self._indices, self._indptr), shape=(n, n))

    def weighted_norm(self, r, jac: sp.csc_matrix, x, h) -> float:
        """Largest block residual relative to the size of that block's terms."""
        size = np.zeros(self.dofs.total)
        size[self.order] = abs(jac) @ np.abs(x[self.order])
        worst = 0.0
        for name in ("u", "p", "psi", "w1", "w2"):
            b = self.dofs.block(name)
            fb = self.order[(self.order >= b.start) & (self.order < b.stop)]
            num = np.linalg.norm(r[fb])
            if num == 0:
                continue
            den = np.linalg.norm(size[fb]) + np.linalg.norm(h[fb])
            worst = max(worst, num / den if den > 0 else np.inf)
        return worst

    def solve_tangent(self, jac: sp.csc_matrix, rhs: np.ndarray) -> np.ndarray:
        """Solve ``jac @ y = rhs`` (solve-order numbering) by condensing the
        element-interior DoFs and factorising the vertex-DoF Schur complement."""
        nb = self.n_b
        jr = jac.tocsr()
        j_bb, j_bi = jr[:nb, :nb], jr[:nb, nb:]
        j_ib = jr[nb:, :nb]
        tmp = self._jii_inv @ j_ib
        schur = (j_bb - j_bi @ tmp).tocsc()
        r_b, r_i = rhs[:nb], rhs[nb:]
        z_i = self._jii_inv @ r_i
        try:
            lu = spla.splu(schur, permc_spec="NATURAL", diag_pivot_thresh=0.1)
            y_b = lu.solve(r_b - j_bi @ z_i)
        except RuntimeError as exc:
            raise LinearSolveFailure(str(exc)) from exc
        y_i = z_i - tmp @ y_b
        y = np.concatenate([y_b, y_i])
        if not np.all(np.isfinite(y)):
            raise LinearSolveFailure("non-finite Newton increment")
        return y

    def newton_step(self, x, x_n, h, t):
        """One Newton update: ``(increment, weighted residual norm before it)``."""
        r, jvals = self.residual(x, x_n, h, t)
        jac = self.tangent(jvals, t)
        omega = self.weighted_norm(r, jac, x, h)
        dx = np.zeros_like(x)
        if omega > 0:
            dx[self.order] = self.solve_tangent(jac, -r[self.order])
        return dx, omega

    def solve_step(self, x_n, x_nm1, t) -> tuple[np.ndarray, StepReport]:
        h = self.history(x_n, x_nm1, t)
        x = x_n.copy()
        report = StepReport(iterations=0)
        growth = 0
        for it in range(self.max_newton + 1):
            r, jvals = self.residual(x, x_n, h, t)
            jac = self.tangent(jvals, t)
            omega = self.weighted_norm(r, jac, x, h)
            report.residuals.append(omega)
            if omega < self.newton_tol:
                break
            if it == self.max_newton:
                raise NewtonDiverged(f"no convergence in {self.max_newton} iterations (residual {omega:.3e})")
            if len(report.residuals) > 1 and omega > report.residuals[-2]:
                growth += 1
                if growth >= 3:
                    raise NewtonDiverged(f"residual grew three consecutive iterations ({omega:.3e})")
            else:
                growth = 0
            x[self.order] += self.solve_tangent(jac, -r[self.order])
            report.iterations += 1
        report.constraint_residual = self.constraint_residual(x)
        return x, report

    def constraint_residual(self, x) -> float:
        """Max over P0 tests of ``|b1(u, phi) + b2(p, phi) - a3(psi, phi)|``,
        relative to the largest of the three terms."""
        d, f, p = self.dofs, self.forms, self.params
        b1 = -np.einsum("ea,ea->e", f.div_u, x[d.u_local])
        b2 = p.alpha / p.lam * np.einsum("ei,ei->e", f.p1_p0, x[d.p_local])
        a3 = f.area * x[d.psi_local] / p.lam
        scale = max(np.abs(b1).max(), np.abs(b2).max(), np.abs(a3).max(), 1e-300)
        return float(np.abs(b1 + b2 - a3).max() / scale)

    def advance(self, state_n: FemState, state_nm1: FemState | None = None) -> tuple[FemState, StepReport]:
        x_n = state_n.vector()
        # rest start: u^{-1} = u^0
        x_nm1 = state_nm1.vector() if state_nm1 is not None else x_n
        t = state_n.time + self.dt
        x, report = self.solve_step(x_n, x_nm1, t)
        return FemState.from_vector(self.dofs, x, t), report

    def zero_state(self) -> FemState:
        d = self.dofs
        return FemState(np.zeros(d.n1), np.zeros(d.n3), np.zeros(d.n2), np.zeros(d.n4), np.zeros(d.n4), 0.0)
