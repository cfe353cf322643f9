"""Pointwise constitutive pieces used by the coupled solver: reaction
kinetics, active-stress intensity, fibre direction and boundary data."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Optional

import numpy as np

from ..model import CalciumParams, ModelParams, calcium_jacobian, calcium_rhs


@dataclass(frozen=True)
class KineticsEval:
    f: np.ndarray
    g: np.ndarray
    f_w1: np.ndarray
    f_w2: np.ndarray
    f_div: np.ndarray  # derivative w.r.t. div(du/dt)
    f_psi: np.ndarray
    g_w1: np.ndarray
    g_w2: np.ndarray
    g_div: np.ndarray
    g_psi: np.ndarray


class Schnackenberg:
    uses_psi = False

    def __init__(self, params: ModelParams):
        self.params = params

    def __call__(self, w1, w2, div_ut, psi) -> KineticsEval:
        b1, b2, b3, gam = self.params.beta1, self.params.beta2, self.params.beta3, self.params.gamma
        w1sq = w1 * w1
        w1w2 = w1 * w2
        q = w1sq * w2
        zero = np.zeros_like(w1)
        return KineticsEval(
            f=b1 * (b2 - w1 + q) + gam * w1 * div_ut,
            g=b1 * (b3 - q) + gam * w2 * div_ut,
            f_w1=b1 * (-1.0 + 2.0 * w1w2) + gam * div_ut,
            f_w2=b1 * w1sq,
            f_div=gam * w1,
            f_psi=zero,
            g_w1=-2.0 * b1 * w1w2,
            g_w2=-b1 * w1sq + gam * div_ut,
            g_div=gam * w2,
            g_psi=zero,
        )


class Calcium:
    """Stress-sensitive calcium exchange; depends on the total pressure."""

    uses_psi = True

    def __init__(self, params: CalciumParams):
        self.params = params

    def __call__(self, w1, w2, div_ut, psi) -> KineticsEval:
        cp = self.params
        psi = np.broadcast_to(psi, np.shape(w1))
        f, g = calcium_rhs(cp, w1, w2, psi)
        f_w1, f_w2, g_w1, g_w2 = calcium_jacobian(cp, w1, w2, psi)
        # d/dpsi of the decay factor; the kink at psi = 0 takes the zero subgradient
        ddecay = -cp.k_stress * np.sign(psi) * np.exp(-cp.k_stress * np.abs(psi))
        w2sq = w2 * w2
        f_psi = (1.0 + cp.chi1) / cp.chi1 * ddecay * w2sq / (w2sq + cp.k1**2)
        g_psi = -f_psi - (1.0 + cp.chi2) / cp.chi2 * ddecay * w2 / (w2 + cp.k2)
        zero = np.zeros_like(w1)
        return KineticsEval(f, g, f_w1, f_w2, zero, f_psi, g_w1, g_w2, zero, g_psi)


ActiveKind = Literal["linear", "quadratic", "growth"]


@dataclass(frozen=True)
class ActiveLaw:
    """Active-stress intensity ``r``: ``w1 + w2``, ``w1**2`` or ``tau2*t + w1**2``."""

    kind: ActiveKind = "linear"
    tau2: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "quadratic", "growth"):
            raise ValueError(f"unknown active law {self.kind!r}")

    def r(self, w1, w2, t: float):
        if self.kind == "linear":
            return w1 + w2
        if self.kind == "quadratic":
            return w1 * w1
        return self.tau2 * t + w1 * w1

    def dr(self, w1, w2, t: float):
        if self.kind == "linear":
            one = np.ones_like(w1)
            return one, one
        return 2.0 * w1, np.zeros_like(w1)


@dataclass(frozen=True)
class FibreField:
    """Direction ``k`` of the active stress: a constant vector, or the
    unnormalised radial field ``x - center``."""

    kind: Literal["constant", "radial"] = "constant"
    vector: tuple[float, float] = (1.0, 0.0)
    center: tuple[float, float] = (0.5, 0.5)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.broadcast_to(np.asarray(self.vector, dtype=float), x.shape)
        if self.kind == "radial":
            return x - np.asarray(self.center, dtype=float)
        raise ValueError(f"unknown fibre field {self.kind!r}")


@dataclass(frozen=True)
class PatchTraction:
    """``(0, -s0*sin(pi*t))`` on ``x_min <= x1 <= x_max``, zero elsewhere."""

    s0: float = 25000.0
    x_min: float = 0.4
    x_max: float = 0.6

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        out = np.zeros_like(x, dtype=float)
        inside = (x[..., 0] >= self.x_min) & (x[..., 0] <= self.x_max)
        out[..., 1] = np.where(inside, -self.s0 * math.sin(math.pi * t), 0.0)
        return out


@dataclass(frozen=True)
class LinearRamp:
    """Spring stiffness ``zeta(t) = rate * t``."""

    rate: float

    def __call__(self, t: float) -> float:
        return self.rate * t


BcMode = Literal["ClampedGamma_TractionSigma", "Robin"]


@dataclass
class Physics:
    params: ModelParams
    bc_mode: BcMode = "ClampedGamma_TractionSigma"
    active: ActiveLaw = ActiveLaw()
    fibre: FibreField = FibreField()
    kinetics: Literal["schnackenberg", "calcium"] = "schnackenberg"
    calcium: Optional[CalciumParams] = None
    traction: Optional[Callable] = None
    robin_stiffness: Optional[Callable[[float], float]] = None
    body_force: Optional[Callable] = None  # force density (rho*b), maps (x, t) -> vectors
    fluid_source: Optional[Callable] = None  # ell(x, t)

    def __post_init__(self):
        if self.bc_mode not in ("ClampedGamma_TractionSigma", "Robin"):
            raise ValueError(f"unknown bc_mode {self.bc_mode!r}")
        if self.bc_mode == "Robin" and self.robin_stiffness is None:
            raise ValueError("Robin mode needs robin_stiffness")
        if self.kinetics not in ("schnackenberg", "calcium"):
            raise ValueError(f"unknown kinetics {self.kinetics!r}")

    def kinetics_law(self):
        if self.kinetics == "calcium":
            return Calcium(self.calcium or CalciumParams())
        return Schnackenberg(self.params)
