"""Dispersion relation of the linearised poroelastic/reaction-diffusion system.

Plane-wave perturbations ``exp(phi*t + i k.x)`` of the homogeneous state
(zero displacement, constant pressures, equilibrium concentrations) satisfy
``P1(phi)^(d-1) * P2(phi) = 0`` where ``P1 = rho*phi**2 + mu*k**2`` carries the
shear waves and the quintic ``P2`` couples the dilatational wave, Darcy flow
and the two species. Two independent routes are provided:

* :func:`assemble_quintic` gives closed-form real coefficients of ``P2`` with
  the active-stress direction tensor replaced by the identity;
* :func:`assemble_symbol_matrix` builds the first-order pencil
  ``phi*M z = L z`` from the linearised equations directly. Its finite
  generalised eigenvalues are the ground truth the quintic is checked against.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import RegimeMismatch, RhoZero
from .model import ModelParams, SteadyState


class Regime(str, enum.Enum):
    GENERAL = "general"
    UNCOUPLED = "uncoupled"
    ZERO_BETA1 = "zero_beta1"
    ZERO_BETA2 = "zero_beta2"
    ZERO_BETA3 = "zero_beta3"


@dataclass(frozen=True)
class DispersionPoly:
    degree: int
    coeffs: np.ndarray  # ascending: coeffs[j] multiplies phi**j
    regime: Regime
    k2: float

    @property
    def highest_first(self) -> np.ndarray:
        return self.coeffs[: self.degree + 1][::-1]


def check_regime(params: ModelParams, regime: Regime) -> Regime:
    regime = Regime(regime)
    required = {
        Regime.ZERO_BETA1: "beta1",
        Regime.ZERO_BETA2: "beta2",
        Regime.ZERO_BETA3: "beta3",
    }
    name = required.get(regime)
    if name is not None and getattr(params, name) != 0:
        raise RegimeMismatch(f"regime {regime.value} requires {name}=0, got {getattr(params, name)}")
    return regime


def quintic_coefficients(params: ModelParams, ss: SteadyState, k2, coupled: bool = True) -> np.ndarray:
    """Ascending coefficients ``A_0..A_5`` of ``P2``, vectorised over ``k2``.

    Returns an array of shape ``(6,) + shape(k2)``. With ``rho == 0`` the two
    top entries vanish and the remainder is the quasi-static cubic.
    """
    k2 = np.asarray(k2, dtype=float)
    rho, c0, K, al = params.rho, params.c0, params.mobility, params.alpha
    D1, D2 = params.D1, params.D2
    M = 2.0 * params.mu + params.lam  # P-wave modulus
    fw1, fw2, gw1, gw2 = ss.fw1, ss.fw2, ss.gw1, ss.gw2
    tr, det = ss.trace, ss.det
    drift = D2 * fw1 + D1 * gw2  # linear-in-k^2 term of the classical Turing bracket
    storage = c0 * M + al * al

    if coupled:
        gam = params.gamma
        th1, th2, w10, w20 = ss.theta1, ss.theta2, ss.w10, ss.w20
        s_theta = gam * (w10 * th1 + w20 * th2)
        s_theta_d = gam * (w10 * th1 * D2 + w20 * th2 * D1)
        x_theta = gam * (-fw1 * th2 * w20 + fw2 * th1 * w20 + gw1 * th2 * w10 - gw2 * th1 * w10)
    else:
        s_theta = s_theta_d = x_theta = 0.0

    k4, k6, k8 = k2 * k2, k2**3, k2**4
    A5 = rho * c0 + 0.0 * k2
    A4 = rho * (c0 * (D1 + D2) + K) * k2 - rho * c0 * tr
    A3 = (
        rho * (K * (D1 + D2) + c0 * D1 * D2) * k4
        + (storage - rho * c0 * drift - rho * K * tr + c0 * s_theta) * k2
        + rho * c0 * det
    )
    A2 = (
        rho * K * D1 * D2 * k6
        + (storage * (D1 + D2) + K * M - rho * K * drift + K * s_theta + c0 * s_theta_d) * k4
        + (-storage * tr + rho * K * det + c0 * x_theta) * k2
    )
    A1 = (
        (storage * D1 * D2 + K * M * (D1 + D2) + K * s_theta_d) * k6
        + (-storage * drift - K * M * tr + K * x_theta) * k4
        + storage * det * k2
    )
    A0 = K * M * k4 * (D1 * D2 * k4 - drift * k2 + det)
    return np.stack(np.broadcast_arrays(A0, A1, A2, A3, A4, A5))


def assemble_quintic(params: ModelParams, ss: SteadyState, k2: float, regime: Regime = Regime.GENERAL) -> DispersionPoly:
    """``P2(phi; k^2)`` for one wavenumber; a cubic when ``rho == 0``."""
    regime = check_regime(params, regime)
    if k2 < 0:
        raise ValueError("k2 must be non-negative")
    coeffs = quintic_coefficients(params, ss, k2, coupled=regime is not Regime.UNCOUPLED)
    degree = 5 if params.rho > 0 else 3
    if degree == 3:
        coeffs = coeffs[:4].copy()
    return DispersionPoly(degree=degree, coeffs=np.asarray(coeffs, dtype=float), regime=regime, k2=float(k2))


def p1_factor_roots(params: ModelParams, k2: float) -> tuple[complex, complex]:
    """Shear-wave roots ``+-i*sqrt(mu k^2 / rho)`` of ``P1``."""
    if params.rho == 0:
        raise RhoZero("P1 degenerates to a constant when rho = 0")
    w = np.sqrt(params.mu * k2 / params.rho)
    return complex(0.0, w), complex(0.0, -w)


@dataclass(frozen=True)
class SymbolMatrix:
    """Pencil ``phi*M z = L z`` for ``z = (u, v, p, psi, w1, w2)``, ``v = du/dt``."""

    M: np.ndarray
    L: np.ndarray
    k_vec: np.ndarray
    identity_upsilon: bool

    @property
    def size(self) -> int:
        return self.M.shape[0]

    @property
    def dim(self) -> int:
        return len(self.k_vec)

    def blocks(self):
        d = self.dim
        mech = np.r_[0 : 2 * d + 2]
        chem = np.r_[2 * d + 2 : 2 * d + 4]
        return mech, chem


def assemble_symbol_matrix(
    params: ModelParams,
    ss: SteadyState,
    k_vec,
    identity_upsilon: bool = True,
    coupled: bool = True,
) -> SymbolMatrix:
    """Linearised operator symbol for the wave vector ``k_vec``.

    With ``identity_upsilon`` the active stress acts isotropically (the
    specialisation behind the real quintic); otherwise it acts along
    ``params.k_dir`` and the pencil carries the complex coupling.
    """
    k = np.asarray(k_vec, dtype=float)
    d = len(k)
    n = 2 * d + 4
    iu, iv = np.arange(d), np.arange(d, 2 * d)
    ip, ipsi, iw1, iw2 = 2 * d, 2 * d + 1, 2 * d + 2, 2 * d + 3
    M = np.zeros((n, n), dtype=complex)
    L = np.zeros((n, n), dtype=complex)
    k2 = float(k @ k)
    mu, lam, al, rho = params.mu, params.lam, params.alpha, params.rho
    if identity_upsilon:
        ups = np.eye(d)
    else:
        kd = np.asarray(params.k_dir, dtype=float)
        if len(kd) != d:
            raise ValueError("k_dir dimension does not match k_vec")
        ups = np.outer(kd, kd)
    gam = params.gamma if coupled else 0.0
    th1, th2 = (ss.theta1, ss.theta2) if coupled else (0.0, 0.0)

    # du/dt = v
    M[iu, iu] = 1.0
    L[iu, iv] = 1.0
    # rho dv/dt = div(2 mu eps(u) - psi I + sigma_act)
    M[np.ix_(iv, iv)] = rho * np.eye(d)
    L[np.ix_(iv, iu)] = -mu * k2 * np.eye(d) - mu * np.outer(k, k)
    L[iv, ipsi] = -1j * k
    L[iv, iw1] = 1j * (ups @ k) * th1
    L[iv, iw2] = 1j * (ups @ k) * th2
    # (c0 + alpha^2/lam) dp/dt - alpha/lam dpsi/dt = -kappa/eta k^2 p
    M[ip, ip] = params.c0 + al * al / lam
    M[ip, ipsi] = -al / lam
    L[ip, ip] = -params.mobility * k2
    # 0 = alpha p - psi - lam div u
    L[ipsi, ip] = al
    L[ipsi, ipsi] = -1.0
    L[ipsi, iu] = -lam * 1j * k
    # dw/dt = J w - D k^2 w + gamma w0 div v
    M[iw1, iw1] = 1.0
    M[iw2, iw2] = 1.0
    L[iw1, iw1] = ss.fw1 - params.D1 * k2
    L[iw1, iw2] = ss.fw2
    L[iw2, iw1] = ss.gw1
    L[iw2, iw2] = ss.gw2 - params.D2 * k2
    L[iw1, iv] = gam * ss.w10 * 1j * k
    L[iw2, iv] = gam * ss.w20 * 1j * k
    return SymbolMatrix(M=M, L=L, k_vec=k, identity_upsilon=identity_upsilon)


def pencil_eigenvalues(sm: SymbolMatrix, rtol: float = 1e-9) -> np.ndarray:
    """Finite generalised eigenvalues of ``(L, M)`` via QZ.

    Infinite eigenvalues (from the algebraic total-pressure row, or the whole
    momentum block when ``rho == 0``) have a vanishing ``beta`` and are dropped.
    """
    # rescale rows so the algebraic constraint and the stiff momentum rows do
    # not dominate the backward error
    size = np.maximum(np.abs(sm.L).max(axis=1), np.abs(sm.M).max(axis=1))
    scale = 1.0 / np.where(size > 0, size, 1.0)
    L = sm.L * scale[:, None]
    M = sm.M * scale[:, None]
    ab = scipy.linalg.eigvals(L, M, homogeneous_eigvals=True)
    alpha, beta = ab
    finite = np.abs(beta) > rtol * np.abs(alpha)
    return alpha[finite] / beta[finite]


def match_roots(a, b) -> float:
    """Greedy nearest-pair matching; returns the largest relative mismatch
    ``|a_i - b_j| / (1 + |a_i|)``. Sizes must agree."""
    a = list(np.asarray(a, dtype=complex))
    b = list(np.asarray(b, dtype=complex))
    if len(a) != len(b):
        return np.inf
    worst = 0.0
    dist = np.abs(np.subtract.outer(np.array(a), np.array(b))) / (1.0 + np.abs(np.array(a)))[:, None]
    used_a, used_b = set(), set()
    for flat in np.argsort(dist, axis=None):
        i, j = divmod(int(flat), len(b))
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        worst = max(worst, dist[i, j])
        if len(used_a) == len(a):
            break
    return float(worst)
