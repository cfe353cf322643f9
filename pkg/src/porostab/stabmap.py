"""Stability maps over (wavenumber, parameter) grids.

Everything here is built on :func:`porostab.dispersion.quintic_coefficients`:
Routh-Hurwitz fields and their null level sets, the (beta2, beta3)
patterning space of the uncoupled model, critical-parameter searches and
dispersion curves.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Literal, Union

import numpy as np

from . import polyroots
from .contour import marching_squares
from .dispersion import Regime, check_regime, p1_factor_roots, quintic_coefficients
from .errors import NoSignChange, RegimeMismatch
from .model import ModelParams, SteadyState, steady_state

SCAN_PARAMS = ("beta1", "beta2", "beta3", "tau", "gamma")

Expression = Union[str, Callable[[ModelParams, SteadyState, np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class ScanGrid:
    param_name: str
    param_values: np.ndarray
    k_values: np.ndarray
    regime: Regime = Regime.GENERAL
    theta_variant: str = "linear"
    rho_mode: Literal["inertial", "quasi_static"] = "inertial"

    def __post_init__(self):
        if self.param_name not in SCAN_PARAMS:
            raise ValueError(f"param_name must be one of {SCAN_PARAMS}, got {self.param_name!r}")
        for name in ("param_values", "k_values"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1 or arr.size < 2:
                raise ValueError(f"{name} needs at least two points")
            if not np.all(np.diff(arr) > 0):
                raise ValueError(f"{name} must be strictly increasing")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "regime", Regime(self.regime))
        if self.rho_mode not in ("inertial", "quasi_static"):
            raise ValueError(f"unknown rho_mode {self.rho_mode!r}")

    def configure(self, params: ModelParams) -> ModelParams:
        """Apply the grid's variant and inertia mode to ``params``."""
        changes = {"theta_variant": self.theta_variant}
        if self.rho_mode == "quasi_static":
            changes["rho"] = 0.0
        elif params.rho == 0:
            raise ValueError("inertial scans need rho > 0")
        return params.with_(**changes)

    @property
    def degree(self) -> int:
        return 3 if self.rho_mode == "quasi_static" else 5


@dataclass
class LevelSetField:
    values: np.ndarray  # [n_k, n_param]
    label: str
    param_values: np.ndarray
    k_values: np.ndarray
    contour_polylines: list = field(default_factory=list)


def log_k_axis(k_min: float, k_max: float, n: int) -> np.ndarray:
    return np.logspace(math.log10(k_min), math.log10(k_max), n)


def _evaluate(params: ModelParams, k2, label: Expression, degree: int, coupled: bool):
    ss = steady_state(params)
    if callable(label):
        return np.asarray(label(params, ss, k2), dtype=float)
    a = quintic_coefficients(params, ss, k2, coupled=coupled)
    if label.startswith("a"):
        j = int(label[1:])
        if j > degree:
            raise ValueError(f"{label} does not exist for degree {degree}")
        return a[j]
    exprs = polyroots.rh_expressions(a, degree)
    if label not in exprs:
        raise ValueError(f"{label} is not a Routh-Hurwitz expression for degree {degree}")
    return exprs[label]


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("POROSTAB_THREADS", "1")))
    except ValueError:
        return 1


def scan(params: ModelParams, grid: ScanGrid, expression: Expression, contours: bool = True) -> LevelSetField:
    """Evaluate a coefficient or Routh-Hurwitz expression on the grid.

    ``expression`` is a label (``"a0".."a5"``, ``"C2".."C4"``) or a callable
    ``(params, steady_state, k2) -> values`` used as a test seam.
    """
    base = grid.configure(params)
    check_regime(base.with_(**{grid.param_name: grid.param_values[0]}), grid.regime)
    k2 = grid.k_values**2
    coupled = grid.regime is not Regime.UNCOUPLED

    def column(p, k2=k2):
        pp = base.with_(**{grid.param_name: float(p)})
        check_regime(pp, grid.regime)
        return _evaluate(pp, k2, expression, grid.degree, coupled)

    threads = _threads()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            cols = list(pool.map(column, grid.param_values))
    else:
        cols = [column(p) for p in grid.param_values]
    values = np.column_stack(cols)
    label = expression if isinstance(expression, str) else getattr(expression, "__name__", "custom")
    lines = marching_squares(grid.param_values, grid.k_values, values) if contours else []
    lines = [_polish_polyline(line, grid, values, column) for line in lines]
    return LevelSetField(values=values, label=label, param_values=grid.param_values, k_values=grid.k_values, contour_polylines=lines)


def _polish_polyline(line, grid: ScanGrid, values, column):
    """Move each interpolated vertex to the exact zero on its grid edge.

    Linear interpolation is the starting guess; a few regula falsi (Illinois)
    steps along the same edge remove the interpolation error, so vertices
    stay on sign-changing edges.
    """
    ps, ks = grid.param_values, grid.k_values
    out = np.array(line, dtype=float)
    for v in out:
        p, k = v
        jp = np.flatnonzero(ps == p)
        if jp.size:  # vertical edge: k varies at fixed parameter
            i = min(max(int(np.searchsorted(ks, k)) - 1, 0), len(ks) - 2)
            a, b = ks[i], ks[i + 1]
            fa, fb = values[i, jp[0]], values[i + 1, jp[0]]

            def f(x, p=p):
                return float(column(p, np.array([x * x]))[0])
            v[1] = _illinois(f, a, b, fa, fb, k)
        else:  # horizontal edge: parameter varies at fixed k
            i = int(np.flatnonzero(ks == k)[0]) if np.any(ks == k) else None
            if i is None:
                continue
            j = min(max(int(np.searchsorted(ps, p)) - 1, 0), len(ps) - 2)

            def f(x, k=k):
                return float(column(x, np.array([k * k]))[0])
            v[0] = _illinois(f, ps[j], ps[j + 1], values[i, j], values[i, j + 1], p)
    return out


def _illinois(f, a, b, fa, fb, guess, iters=30):
    if not (np.sign(fa) * np.sign(fb) < 0):
        return guess
    side = 0
    x = guess
    for _ in range(iters):
        x = (a * fb - b * fa) / (fb - fa)
        fx = f(x)
        if fx == 0 or abs(b - a) <= 1e-14 * max(abs(a), abs(b)):
            break
        if np.sign(fx) == np.sign(fb):
            b, fb = x, fx
            if side == -1:
                fa *= 0.5
            side = -1
        else:
            a, fa = x, fx
            if side == 1:
                fb *= 0.5
            side = 1
    return x


# ---------------------------------------------------------------------------
# (beta2, beta3) patterning space of the uncoupled model


def turing_drift(params: ModelParams, beta2, beta3):
    """``D2*f_w1 + D1*g_w2``: the linear-in-k^2 coefficient of the a0 bracket."""
    s = beta2 + beta3
    return params.beta1 * (params.D2 * (beta3 - beta2) / s - params.D1 * s * s)


def onset_condition(params: ModelParams, beta2, beta3):
    """``D2(beta3-beta2) - D1(beta2+beta3)^3``; positive where a0 can turn negative."""
    return params.D2 * (beta3 - beta2) - params.D1 * (beta2 + beta3) ** 3


def critical_point_discriminant(params: ModelParams, beta2, beta3):
    """Discriminant of the non-trivial factor of ``d a0 / d(k^2)``, scaled as
    ``36 T^2 det^2 - 128 D1 D2 det^3``; positive where a0 has real interior
    critical wavenumbers."""
    t = turing_drift(params, beta2, beta3)
    det = params.beta1**2 * (beta2 + beta3) ** 2
    return 36.0 * t * t * det * det - 128.0 * params.D1 * params.D2 * det**3


def homogeneous_margin(beta2, beta3):
    """``(beta2+beta3)^3 - (beta3-beta2)``; positive iff the k=0 quadratic is stable."""
    return (beta2 + beta3) ** 3 - (beta3 - beta2)


@dataclass
class PatterningSpace:
    beta2: np.ndarray
    beta3: np.ndarray
    onset: np.ndarray  # [n_beta3, n_beta2]
    discriminant: np.ndarray
    homogeneous: np.ndarray
    onset_curves: list
    discriminant_curves: list
    homogeneous_curves: list


def patterning_space(params: ModelParams, beta2_range, beta3_range, n=(200, 200)) -> PatterningSpace:
    if min(beta2_range) <= 0 or min(beta3_range) <= 0:
        raise ValueError("ranges must be positive")
    n2, n3 = (n, n) if np.isscalar(n) else n
    b2 = np.linspace(beta2_range[0], beta2_range[1], n2)
    b3 = np.linspace(beta3_range[0], beta3_range[1], n3)
    B2, B3 = np.meshgrid(b2, b3)
    onset = onset_condition(params, B2, B3)
    disc = critical_point_discriminant(params, B2, B3)
    hom = homogeneous_margin(B2, B3)
    return PatterningSpace(
        beta2=b2,
        beta3=b3,
        onset=onset,
        discriminant=disc,
        homogeneous=hom,
        onset_curves=marching_squares(b2, b3, onset),
        discriminant_curves=marching_squares(b2, b3, disc),
        homogeneous_curves=marching_squares(b2, b3, hom),
    )


# ---------------------------------------------------------------------------
# critical parameters

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_min(fun, lo: float, hi: float, tol: float = 1e-10) -> tuple[float, float]:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while abs(b - a) > tol * max(1.0, abs(a) + abs(b)):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return x, fun(x)


def min_over_k(params: ModelParams, expression: Expression, k_min: float, k_max: float,
               degree: int, coupled: bool, n_coarse: int = 64) -> tuple[float, float]:
    """Minimum of the expression over ``k in [k_min, k_max]``.

    Coarse log-spaced scan, then golden-section refinement in log k^2 around
    each local minimum of the samples. Returns ``(k_at_min, value)``.
    """
    ks = log_k_axis(k_min, k_max, n_coarse)
    vals = _evaluate(params, ks**2, expression, degree, coupled)

    def f(logk2):
        return float(_evaluate(params, np.array([math.exp(logk2)]), expression, degree, coupled)[0])

    # refine every local minimum of the coarse samples: the global coarse
    # argmin can sit at an endpoint while a deeper interior dip hides
    # between two samples
    padded = np.concatenate([[np.inf], vals, [np.inf]])
    local = np.flatnonzero((padded[1:-1] <= padded[:-2]) & (padded[1:-1] <= padded[2:]))
    i = int(np.argmin(vals))
    best_k, best_v = float(ks[i]), float(vals[i])
    for j in local:
        lo = math.log(ks[max(j - 1, 0)] ** 2)
        hi = math.log(ks[min(j + 1, n_coarse - 1)] ** 2)
        x, v = _golden_min(f, lo, hi)
        if v < best_v:
            best_k, best_v = math.sqrt(math.exp(x)), v
    return best_k, best_v


def critical_point(params: ModelParams, grid: ScanGrid, expression: Expression,
                   n_coarse: int = 64, rtol: float = 1e-8) -> tuple[float, float]:
    """``(p_c, k_c)``: the parameter value where ``min_k expression`` crosses
    zero and the wavenumber attaining that minimum.

    The first sign change along ``grid.param_values`` is located, then refined
    by bisection (geometric while the bracket spans more than a decade).
    """
    base = grid.configure(params)
    coupled = grid.regime is not Regime.UNCOUPLED
    k_min, k_max = float(grid.k_values[0]), float(grid.k_values[-1])

    def m(p):
        pp = base.with_(**{grid.param_name: float(p)})
        check_regime(pp, grid.regime)
        return min_over_k(pp, expression, k_min, k_max, grid.degree, coupled, n_coarse)

    ps = grid.param_values
    samples = [m(p) for p in ps]
    bracket = None
    for i in range(len(ps) - 1):
        if samples[i][1] == 0:
            return float(ps[i]), samples[i][0]
        if np.sign(samples[i][1]) != np.sign(samples[i + 1][1]):
            bracket = (float(ps[i]), float(ps[i + 1]), samples[i][1])
            break
    if bracket is None:
        raise NoSignChange(f"min over k of {expression} keeps one sign across the {grid.param_name} range")
    lo, hi, flo = bracket
    while hi - lo > rtol * max(abs(lo), abs(hi)):
        geometric = lo > 0 and hi / lo > 10.0
        mid = math.sqrt(lo * hi) if geometric else 0.5 * (lo + hi)
        k_mid, fm = m(mid)
        if fm == 0:
            return mid, k_mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    # read the minimiser on the negative side: there it is a genuine interior
    # minimum rather than the k -> 0 limit
    return 0.5 * (lo + hi), m(lo if flo < 0 else hi)[0]


def critical_parameter(params: ModelParams, grid: ScanGrid, expression: Expression,
                       n_coarse: int = 64, rtol: float = 1e-8) -> float:
    return critical_point(params, grid, expression, n_coarse, rtol)[0]


def a0_minimizer(params: ModelParams) -> float:
    """Wavenumber minimising the uncoupled ``a0(k^2)`` at fixed parameters:
    the larger root of ``4 D1 D2 x^2 - 3 T x + 2 det = 0`` with ``x = k^2``.
    At the critical parameter this is the critical wavenumber.
    """
    ss = steady_state(params)
    t = params.D2 * ss.fw1 + params.D1 * ss.gw2
    disc = 9.0 * t * t - 32.0 * params.D1 * params.D2 * ss.det
    if t <= 0 or disc < 0:
        raise NoSignChange("a0 has no interior critical wavenumber")
    x = (3.0 * t + math.sqrt(disc)) / (8.0 * params.D1 * params.D2)
    return math.sqrt(x)


def turing_critical_wavenumber(params: ModelParams, param_name: str = "beta2") -> float:
    """Critical wavenumber of the uncoupled model: ``a0`` has a double root
    ``a0(k_c^2) = a0'(k_c^2) = 0`` at the critical value of ``param_name``.

    At the double root ``D1 D2 k_c^4 = det``.
    """
    values = {
        "beta2": np.linspace(1e-4, params.beta3, 400),
        "beta3": np.linspace(params.beta3, 10.0 * params.beta3, 400),
    }[param_name]
    grid = ScanGrid(param_name, values, log_k_axis(1e-2, 1e4, 64), regime=Regime.UNCOUPLED, rho_mode="quasi_static")
    p_c = critical_parameter(params, grid, "a0", rtol=1e-12)
    ss = steady_state(params.with_(**{param_name: p_c}))
    return (ss.det / (params.D1 * params.D2)) ** 0.25


# ---------------------------------------------------------------------------
# dispersion curves and homogeneous stability


def dispersion_curve(params: ModelParams, k_values, regime: Regime = Regime.GENERAL) -> np.ndarray:
    """Largest real part of the growth rates for each wavenumber.

    With inertia the shear roots (pure imaginary) are included. The
    quasi-static polynomial vanishes identically at ``k = 0``; that point is
    reported as ``nan``.
    """
    regime = check_regime(params, regime)
    ss = steady_state(params)
    ks = np.asarray(k_values, dtype=float)
    coeffs = quintic_coefficients(params, ss, ks**2, coupled=regime is not Regime.UNCOUPLED)
    degree = 5 if params.rho > 0 else 3
    out = np.empty(ks.shape)
    for i, k in enumerate(ks):
        c = coeffs[: degree + 1, i][::-1]
        if not np.any(c):
            out[i] = np.nan
            continue
        rate = polyroots.max_growth_rate(c)
        if params.rho > 0:
            rate = max(rate, max(r.real for r in p1_factor_roots(params, k * k)))
        out[i] = rate
    return out


@dataclass(frozen=True)
class HomogeneousVerdict:
    stable: bool
    margin: float  # (beta2+beta3)^3 - (beta3-beta2)
    quadratic: tuple[float, float, float] | None  # highest first; None when rho = 0
    reason: str


def homogeneous_verdict(params: ModelParams) -> HomogeneousVerdict:
    """Stability of the ``k = 0`` modes.

    For ``rho > 0``, ``P2(phi; 0) = phi^3 * q(phi)`` and the classifier uses
    the closed-form sign test on the quadratic ``q``. For ``rho = 0`` every
    coefficient of ``P2(phi; 0)`` vanishes: no homogeneous mode is selected
    and the state is reported stable.
    """
    b2, b3 = params.beta2, params.beta3
    margin = float(homogeneous_margin(b2, b3))
    if params.rho == 0:
        return HomogeneousVerdict(True, margin, None, "P2(phi;0) vanishes identically for rho = 0")
    ss = steady_state(params)
    a = quintic_coefficients(params, ss, 0.0)
    quad = (float(a[5]), float(a[4]), float(a[3]))
    if params.beta1 == 0:
        return HomogeneousVerdict(True, margin, quad, "no kinetics: q(phi) = rho c0 phi^2")
    return HomogeneousVerdict(margin > 0, margin, quad, "sign of (beta2+beta3)^3 - (beta3-beta2)")


def instability_interval_beta3(params: ModelParams) -> tuple[float, float]:
    """Interval of inhibitor basal rates that admits instability when beta2 = 0."""
    if params.beta2 != 0:
        raise RegimeMismatch("the beta3 interval applies only to the beta2 = 0 regime")
    return 0.0, math.sqrt(min(1.0, params.D2 / params.D1))
