"""Physical parameters, reaction kinetics and the homogeneous steady state.

Two kinetic laws are provided: the volume-modulated Schnackenberg pair used
throughout the stability analysis and the pattern tests, and the
stress-sensitive calcium exchange law (extra/intra-cellular concentrations
driven by the total pressure).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .errors import DegenerateEquilibrium

ThetaVariant = Literal["linear", "quadratic"]
ThetaConvention = Literal["constant", "state"]


@dataclass(frozen=True)
class ModelParams:
    """Model constants. Defaults are the reference parameter block.

    ``theta_variant`` selects the active-stress intensity ``r(w)``:
    ``"linear"`` is ``w1 + w2`` and ``"quadratic"`` is ``w1**2``.
    ``theta_convention`` only affects the quadratic variant: ``"constant"``
    uses the constant derivative ``-2*tau*(1, 0)`` and ``"state"`` evaluates
    ``-2*tau*(w10, 0)`` at the equilibrium.
    """

    D1: float = 0.05
    D2: float = 1.0
    beta1: float = 170.0
    beta2: float = 0.1305
    beta3: float = 0.7695
    gamma: float = 1e-4
    tau: float = 0.0
    E: float = 3e4
    nu: float = 0.495
    rho: float = 1.0
    c0: float = 1e-3
    kappa: float = 1e-4
    eta: float = 1.0
    alpha: float = 0.1
    ell: float = 0.0
    k_dir: tuple[float, ...] = (1.0, 0.0)
    theta_variant: ThetaVariant = "linear"
    theta_convention: ThetaConvention = "constant"

    def __post_init__(self):
        for name in ("D1", "D2", "beta1", "E", "eta", "c0", "kappa", "tau", "gamma", "rho"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.eta == 0:
            raise ValueError("eta must be positive")
        if not 0.0 < self.nu < 0.5:
            raise ValueError(f"nu must lie in (0, 0.5), got {self.nu}")
        if self.E <= 0:
            raise ValueError("E must be positive")
        object.__setattr__(self, "k_dir", tuple(float(c) for c in self.k_dir))
        if abs(math.hypot(*self.k_dir) - 1.0) > 1e-12:
            raise ValueError(f"k_dir must be a unit vector, got {self.k_dir}")
        if self.theta_variant not in ("linear", "quadratic"):
            raise ValueError(f"unknown theta_variant {self.theta_variant!r}")
        if self.theta_convention not in ("constant", "state"):
            raise ValueError(f"unknown theta_convention {self.theta_convention!r}")

    @property
    def mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lam(self) -> float:
        return self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))

    @property
    def mobility(self) -> float:
        """Hydraulic mobility kappa/eta."""
        return self.kappa / self.eta

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SteadyState:
    w10: float
    w20: float
    fw1: float
    fw2: float
    gw1: float
    gw2: float
    theta1: float
    theta2: float
    p0: float = 0.0
    psi0: float = 0.0

    @property
    def trace(self) -> float:
        return self.fw1 + self.gw2

    @property
    def det(self) -> float:
        return self.fw1 * self.gw2 - self.fw2 * self.gw1

    @property
    def jacobian(self) -> np.ndarray:
        return np.array([[self.fw1, self.fw2], [self.gw1, self.gw2]])

    @property
    def theta(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2])


@dataclass(frozen=True)
class CalciumParams:
    """Stress-modulated calcium exchange constants (SI-like units, mM)."""

    D1c: float = 2.94e-6
    D2c: float = 3.17e-5
    k1: float = 2e-4
    k2: float = 5e-4
    chi1: float = 2e3
    chi2: float = 4e3
    k_stress: float = 4.5e-5
    w0_bath: float = 0.1

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")


def schnackenberg_rhs(params: ModelParams, w1, w2, div_u_dot=0.0):
    """Net reactions ``(f, g)``; works on scalars and arrays alike."""
    b1, b2, b3, gam = params.beta1, params.beta2, params.beta3, params.gamma
    w1sq_w2 = w1 * w1 * w2
    f = b1 * (b2 - w1 + w1sq_w2) + gam * w1 * div_u_dot
    g = b1 * (b3 - w1sq_w2) + gam * w2 * div_u_dot
    return f, g


def active_intensity(params: ModelParams, w1, w2):
    """r(w) for the selected variant."""
    if params.theta_variant == "linear":
        return w1 + w2
    return w1 * w1


def active_stress_scalar(params: ModelParams, w1, w2):
    """sigma_act(w) = -tau * r(w); the full tensor is this times k_dir (x) k_dir."""
    return -params.tau * active_intensity(params, w1, w2)


def steady_state(params: ModelParams) -> SteadyState:
    s = params.beta2 + params.beta3
    if s == 0:
        raise DegenerateEquilibrium("beta2 + beta3 = 0 has no homogeneous equilibrium")
    w10 = s
    w20 = params.beta3 / (s * s)
    b1 = params.beta1
    fw1 = b1 * (-1.0 + 2.0 * w10 * w20)
    fw2 = b1 * w10 * w10
    gw1 = -2.0 * b1 * w10 * w20
    gw2 = -b1 * w10 * w10
    tau = params.tau
    if params.theta_variant == "linear":
        th1, th2 = -tau, -tau
    elif params.theta_convention == "constant":
        th1, th2 = -2.0 * tau, 0.0
    else:
        th1, th2 = -2.0 * tau * w10, 0.0
    return SteadyState(w10=w10, w20=w20, fw1=fw1, fw2=fw2, gw1=gw1, gw2=gw2, theta1=th1, theta2=th2)


def calcium_rhs(params: CalciumParams, w1, w2, psi):
    """Calcium exchange ``(f, g)``: extra-cellular ``w1``, intra-cellular ``w2``.

    The exchange fluxes are damped by ``exp(-k_stress*|psi|)``; at zero total
    pressure both brackets equal one.
    """
    decay = np.exp(-params.k_stress * np.abs(psi))
    c1, c2 = params.chi1, params.chi2
    bracket1 = (-c1 + (1.0 + c1) * decay) / c1
    bracket2 = (-c2 + (1.0 + c2) * decay) / c2
    w2sq = w2 * w2
    f = -params.D1c * (w1 - w2) + bracket1 * w2sq / (w2sq + params.k1**2)
    g = -f + params.D2c * (params.w0_bath - w2) - bracket2 * w2 / (w2 + params.k2)
    return f, g


def calcium_jacobian(params: CalciumParams, w1, w2, psi):
    """Partial derivatives ``(f_w1, f_w2, g_w1, g_w2)`` of :func:`calcium_rhs`."""
    decay = np.exp(-params.k_stress * np.abs(psi))
    c1, c2 = params.chi1, params.chi2
    bracket1 = (-c1 + (1.0 + c1) * decay) / c1
    bracket2 = (-c2 + (1.0 + c2) * decay) / c2
    k1sq = params.k1**2
    hill1_d = 2.0 * w2 * k1sq / (w2 * w2 + k1sq) ** 2
    hill2_d = params.k2 / (w2 + params.k2) ** 2
    f_w1 = -params.D1c + 0.0 * w2
    f_w2 = params.D1c + bracket1 * hill1_d
    g_w1 = -f_w1
    g_w2 = -f_w2 - params.D2c - bracket2 * hill2_d
    return f_w1, f_w2, g_w1, g_w2
