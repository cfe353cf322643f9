"""Roots and Routh-Hurwitz tests for low-degree real polynomials.

All functions take coefficients highest degree first, the ``numpy.roots``
convention. Routh-Hurwitz labels still refer to ``a_j`` as the coefficient
of ``phi**j``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAllZero, UnsupportedDegree, ZeroLeadingCoefficient

MAX_ABERTH_ITER = 200


@dataclass(frozen=True)
class RhReport:
    degree: int
    condition_values: tuple[tuple[str, float], ...]
    all_satisfied: bool
    first_violated: str | None

    def value(self, label: str) -> float:
        return dict(self.condition_values)[label]


def rh_expressions(a, degree: int) -> dict[str, float]:
    """Routh-Hurwitz quantities from ascending coefficients ``a[0..degree]``.

    Works elementwise when each ``a[j]`` is an array.
    """
    if degree == 2:
        return {}
    if degree == 3:
        a0, a1, a2, a3 = a[0], a[1], a[2], a[3]
        return {"C2": a1 * a2 - a0 * a3}
    if degree == 5:
        a0, a1, a2, a3, a4, a5 = (a[j] for j in range(6))
        return {
            "C2": a3 * a4 - a2 * a5,
            "C3": a2 * a3 * a4 - a2**2 * a5 - a1 * a4**2 + a0 * a4 * a5,
            "C4": (
                a0 * a2 * a3 * a4 * a5
                - a0 * a3**2 * a4**2
                + a1 * a2 * a3 * a4**2
                - a1 * a2**2 * a4 * a5
                - a1**2 * a4**3
                + 2 * a0 * a1 * a4**2 * a5
                - a0**2 * a4 * a5**2
            ),
        }
    raise UnsupportedDegree(f"Routh-Hurwitz tests are implemented for degrees 2, 3, 5; got {degree}")


def rh_labels(degree: int) -> tuple[str, ...]:
    if degree not in (2, 3, 5):
        raise UnsupportedDegree(f"unsupported degree {degree}")
    extra = {2: (), 3: ("C2",), 5: ("C2", "C3", "C4")}[degree]
    return tuple(f"a{j}" for j in range(degree + 1)) + extra


def routh_hurwitz(coeffs, degree: int | None = None) -> RhReport:
    """Evaluate the Routh-Hurwitz conditions with strict ``> 0`` tests.

    A negative leading coefficient is handled by flipping the overall sign,
    so the test is invariant under scaling by any nonzero constant.
    """
    c = np.asarray(coeffs, dtype=float)
    if degree is None:
        degree = len(c) - 1
    if degree not in (2, 3, 5):
        raise UnsupportedDegree(f"unsupported degree {degree}")
    if len(c) != degree + 1:
        raise ValueError(f"expected {degree + 1} coefficients, got {len(c)}")
    if c[0] == 0:
        raise ZeroLeadingCoefficient("leading coefficient is zero")
    if c[0] < 0:
        c = -c
    a = c[::-1]
    values = [(f"a{j}", float(a[j])) for j in range(degree + 1)]
    values += [(k, float(v)) for k, v in rh_expressions(a, degree).items()]
    first = next((label for label, v in values if not v > 0), None)
    return RhReport(degree=degree, condition_values=tuple(values), all_satisfied=first is None, first_violated=first)


def _strip(coeffs) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs))
    if c.ndim != 1:
        raise ValueError("coefficients must be one-dimensional")
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0:
        raise DegenerateAllZero("all coefficients are zero")
    nz = np.flatnonzero(np.abs(c) > 1e-300 * scale)
    return c[nz[0]:]


def _cauchy_radius(c: np.ndarray) -> float:
    return 1.0 + float(np.max(np.abs(c[1:] / c[0])))


def _horner(c, z):
    p = 0j
    dp = 0j
    for a in c:
        dp = dp * z + p
        p = p * z + a
    return p, dp


def _aberth(c: np.ndarray) -> np.ndarray | None:
    # scalar complex arithmetic: for degree <= 5 this beats array overhead
    n = len(c) - 1
    cl = [complex(a) for a in c]
    r = abs(cl[-1] / cl[0]) ** (1.0 / n)
    if not np.isfinite(r) or r == 0:
        r = _cauchy_radius(c) / 2.0
    # offset angle breaks symmetry with real-axis root clusters
    z = [r * cmath.exp(1j * (2 * cmath.pi * j / n + 0.4)) for j in range(n)]
    for _ in range(MAX_ABERTH_ITER):
        done = True
        for i in range(n):
            p, dp = _horner(cl, z[i])
            if p == 0:
                continue
            if dp == 0:
                return None
            ratio = p / dp
            s = 0j
            zi = z[i]
            for j in range(n):
                if j != i:
                    diff = zi - z[j]
                    if diff == 0:
                        return None
                    s += 1.0 / diff
            denom = 1.0 - ratio * s
            if denom == 0:
                return None
            step = ratio / denom
            if not cmath.isfinite(step):
                return None
            z[i] = zi - step
            if abs(step) > 1e-15 * max(abs(z[i]), 1e-300):
                done = False
        if done:
            return np.array(z, dtype=complex)
    return None


def _polish(c: np.ndarray, z: np.ndarray) -> np.ndarray:
    dc = np.polyder(c)
    for _ in range(3):
        dp = np.polyval(dc, z)
        ok = dp != 0
        z = np.where(ok, z - np.polyval(c, z) / np.where(ok, dp, 1.0), z)
    return z


def _residual_ok(c: np.ndarray, z) -> bool:
    absc = [abs(complex(a)) for a in c]
    cl = [complex(a) for a in c]
    for zi in z:
        p, _ = _horner(cl, complex(zi))
        bound = 0.0
        az = abs(zi)
        for a in absc:
            bound = bound * az + a
        if not abs(p) <= 1e-10 * bound:
            return False
    return True


def _low_degree(c) -> np.ndarray | None:
    if len(c) == 2:
        return np.array([-complex(c[1]) / complex(c[0])])
    if len(c) != 3:
        return None
    a, b, cc = (complex(x) for x in c)
    b, cc = b / a, cc / a
    # z = sigma*y keeps the discriminant clear of underflow and overflow
    sigma = max(abs(b), math.sqrt(abs(cc)))
    if sigma == 0:
        return np.zeros(2, dtype=complex)
    bs, cs = b / sigma, cc / sigma / sigma
    d = cmath.sqrt(bs * bs - 4.0 * cs)
    # sign choice avoids cancellation; |q| >= 1/2, so the product rule is safe
    q = -0.5 * (bs + d if (bs.conjugate() * d).real >= 0 else bs - d)
    z1 = sigma * q
    return np.array([z1, cc / z1])


def poly_roots(coeffs) -> np.ndarray:
    """All complex roots: closed form up to degree two, otherwise
    Aberth-Ehrlich iteration.

    Falls back to companion-matrix eigenvalues when the iteration stalls or
    the backward-error check fails.
    """
    c = _strip(coeffs).astype(complex if np.iscomplexobj(coeffs) else float)
    n = len(c) - 1
    if n == 0:
        return np.empty(0, dtype=complex)
    # zero roots are exact; deflate them before iterating
    nzeros = 0
    while c[-1] == 0:
        c = c[:-1]
        nzeros += 1
    if len(c) == 1:
        z = np.empty(0, dtype=complex)
    else:
        z = _low_degree(c)
        if z is None:
            z = _aberth(c)
    if z is None or not _residual_ok(c, z):
        z = np.roots(c).astype(complex)
        z = _polish(c, z)
    if not _residual_ok(c, z):
        raise ArithmeticError("root residual bound violated")
    return np.concatenate([z, np.zeros(nzeros, dtype=complex)])


def max_growth_rate(coeffs) -> float:
    return float(np.max(poly_roots(coeffs).real))
